//! Binary parameter checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"PDCKPT"
//! version u16
//! count   u32
//! count x { name_len u32, name utf-8, ndim u32, dims u64 * ndim, values f64 * prod(dims) }
//! ```

use std::io::{Read, Write};

use super::{NumericsError, ParamSet, Tensor};

const MAGIC: &[u8; 6] = b"PDCKPT";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn write_checkpoint<W: Write>(params: &ParamSet, mut w: W) -> Result<(), NumericsError> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, t) in params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn checkpoint_bytes(params: &ParamSet) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + params.numel() * 8);
    write_checkpoint(params, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NumericsError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, NumericsError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParamSet, NumericsError> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NumericsError::Checkpoint("bad magic".into()));
    }
    let mut vb = [0u8; 2];
    r.read_exact(&mut vb)?;
    let version = u16::from_le_bytes(vb);
    if version != CHECKPOINT_VERSION {
        return Err(NumericsError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let count = read_u32(&mut r)?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name)
            .map_err(|_| NumericsError::Checkpoint("parameter name is not utf-8".into()))?;
        let ndim = read_u32(&mut r)? as usize;
        let shape = (0..ndim)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n: usize = shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(read_u64(&mut r)?.to_le_bytes()));
        }
        if params.id_of(&name).is_some() {
            return Err(NumericsError::Checkpoint(format!(
                "duplicate tensor {name}"
            )));
        }
        params.add(name, Tensor::new(shape, data)?);
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = seeded_rng(0);
        let mut p = ParamSet::new();
        p.add_uniform("w", &[3, 4], 0.1, &mut rng);
        p.add_zeros("b", &[3]);
        let bytes = checkpoint_bytes(&p);
        let q = read_checkpoint(bytes.as_slice()).unwrap();
        assert_eq!(p, q);
        assert_eq!(checkpoint_bytes(&q), bytes);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_checkpoint(&b"NOTACKPT"[..]).is_err());
        let mut bytes = checkpoint_bytes(&ParamSet::new());
        bytes[6] = 9;
        assert!(read_checkpoint(bytes.as_slice()).is_err());
    }
}
