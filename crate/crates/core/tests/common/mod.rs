//! Oracles and generators shared by the integration tests and the pipeline
//! acceptance target.
#![allow(dead_code)]

use patdiag_core::agent::{ActionSequence, AgentConfig, PolicyNetwork};
use patdiag_core::corpus::{Corpus, EntitySpan, Instance, Label};
use patdiag_core::nre::{NreConfig, NreModel};
use patdiag_core::numerics::gradcheck::{check_gradients, GradCheckReport};
use patdiag_core::numerics::{ParamSet, SeededRng, Tensor};
use patdiag_core::pattern::{Element, EntitySlot, GapBucket, Pattern};
use patdiag_core::wlf::WlfParams;

/// `P(Y = +1 | L)` as the ratio of the two joint probabilities, each a
/// plain product over labeling functions.
pub fn joint_ratio(row: &[i8], alpha: &[f64], beta: &[f64]) -> f64 {
    let joint = |y: i8| {
        let mut p = 0.5;
        for i in 0..row.len() {
            p *= match row[i] {
                0 => 1.0 - beta[i],
                l if l == y => beta[i] * alpha[i],
                _ => beta[i] * (1.0 - alpha[i]),
            };
        }
        p
    };
    let (pos, neg) = (joint(1), joint(-1));
    pos / (pos + neg)
}

pub fn wlf_params(alpha: Vec<f64>, beta: Vec<f64>) -> WlfParams {
    let lf_names = (0..alpha.len()).map(|i| format!("lf{i}")).collect();
    WlfParams {
        alpha,
        beta,
        lf_names,
    }
}

/// Random label vector with `m` entries and parameters in `[delta, 1 - delta]`.
pub fn random_dp_case(rng: &mut SeededRng, m: usize, delta: f64) -> (Vec<i8>, WlfParams) {
    let row = (0..m).map(|_| rng.below(3) as i8 - 1).collect();
    let alpha = (0..m)
        .map(|_| rng.uniform_range(delta, 1.0 - delta))
        .collect();
    let beta = (0..m)
        .map(|_| rng.uniform_range(delta, 1.0 - delta))
        .collect();
    (row, wlf_params(alpha, beta))
}

/// Draws `(L, Y)` from the generative model with a uniform class prior.
pub fn sample_generative(
    rng: &mut SeededRng,
    alpha: &[f64],
    beta: &[f64],
    n: usize,
) -> Vec<(Vec<i8>, Label)> {
    (0..n)
        .map(|_| {
            let y: i8 = if rng.bernoulli(0.5) { 1 } else { -1 };
            let row = alpha
                .iter()
                .zip(beta)
                .map(|(&a, &b)| {
                    if !rng.bernoulli(b) {
                        0
                    } else if rng.bernoulli(a) {
                        y
                    } else {
                        -y
                    }
                })
                .collect();
            (row, Label::from_bool(y == 1))
        })
        .collect()
}

/// Exhaustive alignment search: every element is tried at every token range
/// of the instance, backtracking over all combinations of placements.
pub fn brute_force_match(p: &Pattern, inst: &Instance) -> bool {
    let t = inst.tokens.len();
    let fits = |e: &Element, s: usize, end: usize| match e {
        Element::Literal(tok) => end == s + 1 && inst.tokens[s] == *tok,
        Element::Entity { slot, entity_type } => {
            let span = match slot {
                EntitySlot::Head => &inst.head,
                EntitySlot::Tail => &inst.tail,
            };
            span.start == s && span.end == end && span.entity_type == *entity_type
        }
    };
    let placements: Vec<Vec<(usize, usize)>> = p
        .elements()
        .iter()
        .map(|e| {
            let mut v = Vec::new();
            for s in 0..t {
                for end in s + 1..=t {
                    if fits(e, s, end) {
                        v.push((s, end));
                    }
                }
            }
            v
        })
        .collect();
    fn walk(
        k: usize,
        prev_end: Option<usize>,
        placements: &[Vec<(usize, usize)>],
        gaps: &[GapBucket],
    ) -> bool {
        if k == placements.len() {
            return true;
        }
        placements[k].iter().any(|&(start, end)| {
            let ok = match prev_end {
                None => true,
                Some(pe) => start >= pe && gaps[k - 1].contains(start - pe),
            };
            ok && walk(k + 1, Some(end), placements, gaps)
        })
    }
    walk(0, None, &placements, p.gaps())
}

const SMALL_VOCAB: [&str; 4] = ["a", "b", "c", "d"];
const TYPES: [&str; 2] = ["PER", "CITY"];

/// Random instance with `t` tokens and two disjoint spans of length 1 or 2.
pub fn random_instance(rng: &mut SeededRng, t: usize, id: &str) -> Instance {
    assert!(t >= 2);
    let tokens: Vec<&str> = (0..t).map(|_| SMALL_VOCAB[rng.below(4)]).collect();
    loop {
        let span = |rng: &mut SeededRng| {
            let len = if t > 2 { rng.range_inclusive(1, 2) } else { 1 };
            let start = rng.below(t - len + 1);
            EntitySpan::new(start, start + len, TYPES[rng.below(2)])
        };
        let head = span(rng);
        let tail = span(rng);
        if !head.overlaps(&tail) {
            return Instance::new(id, &tokens, head, tail, "r", Label::Negative);
        }
    }
}

/// Random pattern with 1 to `max_elements` elements over the small
/// vocabulary, with uniformly drawn gap buckets.
pub fn random_pattern(rng: &mut SeededRng, max_elements: usize) -> Pattern {
    let n = rng.range_inclusive(1, max_elements);
    let mut slots = vec![EntitySlot::Head, EntitySlot::Tail];
    let elements: Vec<Element> = (0..n)
        .map(|_| {
            if !slots.is_empty() && rng.bernoulli(0.4) {
                let slot = slots.remove(rng.below(slots.len()));
                Element::Entity {
                    slot,
                    entity_type: TYPES[rng.below(2)].to_string(),
                }
            } else {
                Element::Literal(SMALL_VOCAB[rng.below(4)].to_string())
            }
        })
        .collect();
    let gaps = (1..n).map(|_| GapBucket::ALL[rng.below(4)]).collect();
    Pattern::new(elements, gaps).expect("generated pattern is valid")
}

pub fn tiny_nre_config() -> NreConfig {
    NreConfig {
        word_dim: 4,
        pos_dim: 2,
        max_rel_dist: 6,
        hidden: 3,
        dropout_embed: 0.0,
        dropout_encoder: 0.0,
        dropout_final: 0.0,
        lr: 0.01,
        batch_size: 4,
        max_epochs: 1,
        validation_fraction: 0.0,
    }
}

pub fn random_corpus(rng: &mut SeededRng, n: usize, max_len: usize) -> Corpus {
    let instances = (0..n)
        .map(|k| {
            let t = rng.range_inclusive(2, max_len);
            let mut inst = random_instance(rng, t, &format!("i{k}"));
            inst.ds_label = Label::from_bool(rng.bernoulli(0.5));
            inst
        })
        .collect();
    Corpus::from_instances(instances, "r").expect("ids are unique")
}

/// Replaces every parameter value by a uniform draw from `[-scale, scale]`,
/// which keeps most gradient coordinates well above the roundoff floor.
pub fn redraw(params: &mut ParamSet, scale: f64, rng: &mut SeededRng) {
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        for v in params.get_mut(id).data_mut() {
            *v = rng.uniform_range(-scale, scale);
        }
    }
}

/// Finite-difference check of the mean BCE of a random soft-labelled batch.
pub fn nre_gradient_check(draw: u64) -> GradCheckReport {
    let mut rng = SeededRng::new(1000 + draw);
    let corpus = random_corpus(&mut rng, 3, 6);
    let mut model =
        NreModel::new(tiny_nre_config(), corpus.vocabulary.clone(), draw).expect("valid config");
    redraw(model.params_mut(), 0.5, &mut rng);
    let targets: Vec<f64> = (0..corpus.len()).map(|_| rng.uniform()).collect();
    let batch: Vec<(&Instance, f64)> = corpus.instances.iter().zip(targets).collect();
    let (_, grads) = model.loss_and_grads(&batch, None).expect("forward");
    check_gradients(model.params(), &grads, 1e-5, usize::MAX, &mut rng, |p| {
        model.loss_with(p, &batch)
    })
}

pub fn tiny_agent_config() -> AgentConfig {
    AgentConfig {
        hidden: 3,
        ..AgentConfig::default()
    }
}

/// Finite-difference check of the surrogate `R ln pi(a | x)` for a random
/// input, action sequence and reward.
pub fn agent_gradient_check(draw: u64) -> GradCheckReport {
    let mut rng = SeededRng::new(2000 + draw);
    let (d_x, t) = (5, rng.range_inclusive(2, 6));
    let x =
        Tensor::matrix(d_x, t, (0..d_x * t).map(|_| rng.normal()).collect()).expect("finite input");
    let actions = ActionSequence::new((0..t).map(|_| rng.bernoulli(0.5) as u8).collect());
    let r = rng.uniform_range(-2.0, 2.0);
    let mut agent = PolicyNetwork::new(d_x, tiny_agent_config(), draw).expect("valid config");
    redraw(agent.params_mut(), 0.5, &mut rng);
    let grads = agent.policy_gradient(&x, &actions, r).expect("backward");
    check_gradients(agent.params(), &grads, 1e-5, usize::MAX, &mut rng, |p| {
        r * agent.log_prob_with(p, &x, &actions).expect("forward")
    })
}

/// Corpus whose label is exactly "the sentence contains `born`".
pub fn born_corpus(rng: &mut SeededRng, n: usize) -> Corpus {
    const FILLER: [&str; 8] = ["the", "of", "a", "met", "saw", "city", "year", "and"];
    let instances = (0..n)
        .map(|k| {
            let positive = k % 2 == 0;
            let before = rng.range_inclusive(0, 2);
            let between = rng.range_inclusive(1, 3);
            let after = rng.range_inclusive(0, 2);
            let mut tokens: Vec<&str> = Vec::new();
            tokens.extend((0..before).map(|_| FILLER[rng.below(8)]));
            let head = tokens.len();
            tokens.push("PERSON");
            let mut middle: Vec<&str> = (0..between).map(|_| FILLER[rng.below(8)]).collect();
            if positive {
                middle[rng.below(between)] = "born";
            }
            tokens.extend(middle);
            let tail = tokens.len();
            tokens.push("PLACE");
            tokens.extend((0..after).map(|_| FILLER[rng.below(8)]));
            let label = Label::from_bool(positive);
            let mut inst = Instance::new(
                format!("t{k:03}"),
                &tokens,
                EntitySpan::new(head, head + 1, "PER"),
                EntitySpan::new(tail, tail + 1, "CITY"),
                "born_in",
                label,
            );
            inst.gold_label = Some(label);
            inst
        })
        .collect();
    Corpus::from_instances(instances, "born_in").expect("ids are unique")
}

pub fn small_nre_config() -> NreConfig {
    NreConfig {
        word_dim: 8,
        pos_dim: 2,
        max_rel_dist: 10,
        hidden: 8,
        dropout_embed: 0.0,
        dropout_encoder: 0.0,
        dropout_final: 0.0,
        lr: 0.01,
        batch_size: 10,
        max_epochs: 30,
        validation_fraction: 0.0,
    }
}

pub fn gold_signs(corpus: &Corpus) -> Vec<i8> {
    corpus
        .instances
        .iter()
        .map(|i| i.gold_label.unwrap_or(i.ds_label).sign())
        .collect()
}
