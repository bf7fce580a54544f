//! Synthetic relation corpora with planted patterns and controlled DS noise.
//!
//! Positive instances realise one of the planted templates, negatives realise
//! a distractor template or a plain filler sentence. DS labels are derived
//! from the hidden gold labels by flipping positives to negative with
//! probability `fn_rate` and negatives to positive with probability `fp_rate`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Corpus, CorpusError, EntitySpan, Instance, Label};
use crate::numerics::{seeded_rng, SeededRng};
use crate::pattern::{Element, EntitySlot, GapBucket, Pattern, PatternError};

#[derive(Debug, Error)]
pub enum SyntheticError {
    #[error("template {template:?}: {source}")]
    Template {
        template: String,
        #[source]
        source: PatternError,
    },
    #[error("template {0:?} must contain both ENTITY1 and ENTITY2")]
    MissingEntity(String),
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub relation: String,
    /// Number of filler words.
    pub vocab_size: usize,
    pub n_instances: usize,
    pub positive_templates: Vec<String>,
    pub distractor_templates: Vec<String>,
    pub fn_rate: f64,
    pub fp_rate: f64,
    /// Fraction of instances whose gold label is positive.
    pub positive_fraction: f64,
    /// Distinct surface names per entity type.
    pub names_per_type: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            relation: "birthplace".into(),
            vocab_size: 200,
            n_instances: 5000,
            positive_templates: vec![
                "ENTITY1:PER PAD{1,3} born PAD{1,3} ENTITY2:CITY".into(),
                "ENTITY2:CITY native ENTITY1:PER".into(),
            ],
            distractor_templates: vec![
                "ENTITY1:PER PAD{1,3} visited PAD{1,3} ENTITY2:CITY".into(),
                "ENTITY1:PER left PAD{4,9} ENTITY2:CITY".into(),
            ],
            fn_rate: 0.6,
            fp_rate: 0.1,
            positive_fraction: 0.4,
            names_per_type: 50,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<(), SyntheticError> {
        for (name, v) in [
            ("fn_rate", self.fn_rate),
            ("fp_rate", self.fp_rate),
            ("positive_fraction", self.positive_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SyntheticError::Spec(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.positive_templates.is_empty() {
            return Err(SyntheticError::Spec(
                "at least one planted template is required".into(),
            ));
        }
        if self.vocab_size == 0 || self.names_per_type == 0 {
            return Err(SyntheticError::Spec(
                "vocab_size and names_per_type must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn parse_template(text: &str) -> Result<Pattern, SyntheticError> {
    let p: Pattern = text.parse().map_err(|source| SyntheticError::Template {
        template: text.to_string(),
        source,
    })?;
    if p.entity(EntitySlot::Head).is_none() || p.entity(EntitySlot::Tail).is_none() {
        return Err(SyntheticError::MissingEntity(text.to_string()));
    }
    Ok(p)
}

struct Generator {
    fillers: Vec<String>,
    names_per_type: usize,
}

impl Generator {
    fn filler(&self, rng: &mut SeededRng) -> String {
        self.fillers[rng.below(self.fillers.len())].clone()
    }

    fn entity_name(&self, ty: &str, rng: &mut SeededRng) -> String {
        format!("{ty}_{}", rng.below(self.names_per_type))
    }

    fn gap_len(bucket: GapBucket, rng: &mut SeededRng) -> usize {
        match bucket {
            GapBucket::Zero => 0,
            GapBucket::Short => rng.range_inclusive(1, 3),
            GapBucket::Medium => rng.range_inclusive(4, 9),
            GapBucket::Long => rng.range_inclusive(10, 12),
        }
    }

    /// Surface realisation of a template with random fillers around it.
    fn realise(
        &self,
        template: &Pattern,
        rng: &mut SeededRng,
    ) -> (Vec<String>, EntitySpan, EntitySpan) {
        let mut tokens: Vec<String> = (0..rng.range_inclusive(0, 3))
            .map(|_| self.filler(rng))
            .collect();
        let mut head = None;
        let mut tail = None;
        for (k, element) in template.elements().iter().enumerate() {
            if k > 0 {
                for _ in 0..Self::gap_len(template.gaps()[k - 1], rng) {
                    tokens.push(self.filler(rng));
                }
            }
            match element {
                Element::Literal(tok) => tokens.push(tok.clone()),
                Element::Entity { slot, entity_type } => {
                    let span = EntitySpan::new(tokens.len(), tokens.len() + 1, entity_type.clone());
                    tokens.push(self.entity_name(entity_type, rng));
                    match slot {
                        EntitySlot::Head => head = Some(span),
                        EntitySlot::Tail => tail = Some(span),
                    }
                }
            }
        }
        for _ in 0..rng.range_inclusive(0, 3) {
            tokens.push(self.filler(rng));
        }
        (tokens, head.unwrap(), tail.unwrap())
    }

    /// Entity pair separated only by filler words.
    fn plain(
        &self,
        head_type: &str,
        tail_type: &str,
        rng: &mut SeededRng,
    ) -> (Vec<String>, EntitySpan, EntitySpan) {
        let gap = [GapBucket::Short, GapBucket::Medium][rng.below(2)];
        let text = format!(
            "ENTITY1:{head_type} {} ENTITY2:{tail_type}",
            match gap {
                GapBucket::Short => "PAD{1,3}",
                _ => "PAD{4,9}",
            }
        );
        let p: Pattern = text.parse().expect("plain template is well formed");
        self.realise(&p, rng)
    }
}

/// Generates a corpus whose instances all carry gold labels.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus, SyntheticError> {
    spec.validate()?;
    let positives = spec
        .positive_templates
        .iter()
        .map(|t| parse_template(t))
        .collect::<Result<Vec<_>, _>>()?;
    let distractors = spec
        .distractor_templates
        .iter()
        .map(|t| parse_template(t))
        .collect::<Result<Vec<_>, _>>()?;
    let reserved: Vec<&str> = positives
        .iter()
        .chain(&distractors)
        .flat_map(|p| p.literals())
        .collect();
    let fillers: Vec<String> = (0..spec.vocab_size)
        .map(|k| format!("w{k}"))
        .filter(|w| !reserved.contains(&w.as_str()))
        .collect();
    if fillers.is_empty() {
        return Err(SyntheticError::Spec("no filler words left".into()));
    }
    let generator = Generator {
        fillers,
        names_per_type: spec.names_per_type,
    };
    let head_type = positives[0].entity(EntitySlot::Head).unwrap().to_string();
    let tail_type = positives[0].entity(EntitySlot::Tail).unwrap().to_string();

    let mut rng = seeded_rng(spec.seed);
    let width = spec.n_instances.max(1).to_string().len();
    let mut instances = Vec::with_capacity(spec.n_instances);
    for k in 0..spec.n_instances {
        let gold_positive = rng.bernoulli(spec.positive_fraction);
        let (tokens, head, tail) = if gold_positive {
            let t = &positives[rng.below(positives.len())];
            generator.realise(t, &mut rng)
        } else if !distractors.is_empty() && rng.bernoulli(0.5) {
            let t = &distractors[rng.below(distractors.len())];
            generator.realise(t, &mut rng)
        } else {
            generator.plain(&head_type, &tail_type, &mut rng)
        };
        let flip = if gold_positive {
            rng.bernoulli(spec.fn_rate)
        } else {
            rng.bernoulli(spec.fp_rate)
        };
        let gold = Label::from_bool(gold_positive);
        let ds = Label::from_bool(gold_positive != flip);
        instances.push(Instance {
            id: format!("syn{k:0width$}"),
            tokens,
            head,
            tail,
            relation: spec.relation.clone(),
            ds_label: ds,
            gold_label: Some(gold),
        });
    }
    Ok(Corpus::from_instances(instances, spec.relation.clone())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_corpus;
    use crate::pattern::matches;

    fn small(n: usize) -> SyntheticSpec {
        SyntheticSpec {
            n_instances: n,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn no_noise_means_ds_equals_gold() {
        let spec = SyntheticSpec {
            fn_rate: 0.0,
            fp_rate: 0.0,
            ..small(500)
        };
        let c = generate_synthetic(&spec).unwrap();
        assert!(c.instances.iter().all(|i| Some(i.ds_label) == i.gold_label));
    }

    #[test]
    fn deterministic_bytes() {
        let spec = small(300);
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_corpus(&generate_synthetic(&spec).unwrap(), &mut a).unwrap();
        write_corpus(&generate_synthetic(&spec).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn false_negative_rate_is_controlled() {
        // Roughly 2000 positives: binomial sd of the flip fraction is ~0.011.
        let spec = SyntheticSpec {
            fn_rate: 0.6,
            ..small(5000)
        };
        let c = generate_synthetic(&spec).unwrap();
        let pos: Vec<_> = c
            .instances
            .iter()
            .filter(|i| i.gold_label == Some(Label::Positive))
            .collect();
        let flipped = pos.iter().filter(|i| i.ds_label == Label::Negative).count();
        let rate = flipped as f64 / pos.len() as f64;
        assert!((rate - 0.6).abs() < 0.03, "rate {rate}");
    }

    #[test]
    fn positives_realise_a_planted_template() {
        let spec = small(400);
        let planted: Vec<Pattern> = spec
            .positive_templates
            .iter()
            .map(|t| t.parse().unwrap())
            .collect();
        let c = generate_synthetic(&spec).unwrap();
        for inst in &c.instances {
            let hit = planted.iter().any(|p| matches(p, inst));
            assert_eq!(
                hit,
                inst.gold_label == Some(Label::Positive),
                "{:?}",
                inst.tokens
            );
        }
    }

    #[test]
    fn bad_template_is_error() {
        let spec = SyntheticSpec {
            positive_templates: vec!["ENTITY1:PER PAD{2,5} x ENTITY2:CITY".into()],
            ..small(10)
        };
        assert!(matches!(
            generate_synthetic(&spec),
            Err(SyntheticError::Template { .. })
        ));
        let spec = SyntheticSpec {
            positive_templates: vec!["ENTITY1:PER born".into()],
            ..small(10)
        };
        assert!(matches!(
            generate_synthetic(&spec),
            Err(SyntheticError::MissingEntity(_))
        ));
    }

    #[test]
    fn all_instances_valid() {
        let c = generate_synthetic(&small(200)).unwrap();
        for (k, inst) in c.instances.iter().enumerate() {
            inst.validate(k + 1, super::super::DEFAULT_MAX_SENTENCE_LEN)
                .unwrap();
        }
    }
}
