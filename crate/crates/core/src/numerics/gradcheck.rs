//! Central finite-difference gradient checking.
//!
//! Only forward evaluations are used here, so the check is independent of
//! [`Graph::backward`](super::Graph::backward).

use super::{ParamGrads, ParamSet, SeededRng};

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is essentially zero are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<(String, usize, f64, f64)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares `analytic` against central differences of `loss`.
///
/// At most `per_tensor` coordinates of each parameter tensor are checked,
/// chosen with `rng`; `usize::MAX` checks them all.
pub fn check_gradients<F>(
    params: &ParamSet,
    analytic: &ParamGrads,
    eps: f64,
    per_tensor: usize,
    rng: &mut SeededRng,
    mut loss: F,
) -> GradCheckReport
where
    F: FnMut(&ParamSet) -> f64,
{
    let mut work = params.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    for (k, id) in params.ids().enumerate() {
        let n = params.get(id).len();
        let mut coords: Vec<usize> = (0..n).collect();
        if per_tensor < n {
            rng.shuffle(&mut coords);
            coords.truncate(per_tensor);
            coords.sort_unstable();
        }
        for c in coords {
            let orig = params.get(id).data()[c];
            work.get_mut(id).data_mut()[c] = orig + eps;
            let up = loss(&work);
            work.get_mut(id).data_mut()[c] = orig - eps;
            let down = loss(&work);
            work.get_mut(id).data_mut()[c] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic.get(k).data()[c];
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((params.name(id).to_string(), c, a, numeric));
                }
            }
        }
    }
    report
}
