//! Report documents and their plain-text renderings.

use std::fmt::Write as _;

use patdiag_core::eval::{macro_average, EvalError, Metrics};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub ds: Metrics,
    pub denoised: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub ds: Metrics,
    pub denoised: Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub relation: String,
    pub mode: String,
    pub per_seed: Vec<SeedRow>,
    pub mean: MeanRow,
}

impl Report {
    pub fn new(relation: String, mode: String, per_seed: Vec<SeedRow>) -> Result<Self, EvalError> {
        let ds: Vec<Metrics> = per_seed.iter().map(|r| r.ds).collect();
        let denoised: Vec<Metrics> = per_seed.iter().map(|r| r.denoised).collect();
        let mean = MeanRow {
            ds: macro_average(&ds)?,
            denoised: macro_average(&denoised)?,
        };
        Ok(Report {
            relation,
            mode,
            per_seed,
            mean,
        })
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "relation: {}   fusion: {}", self.relation, self.mode);
        let _ = writeln!(
            s,
            "{:<6} {:>7} {:>7} {:>7}   {:>7} {:>7} {:>7}",
            "seed", "DS P", "DS R", "DS F1", "new P", "new R", "new F1"
        );
        let row = |s: &mut String, label: &str, a: &Metrics, b: &Metrics| {
            let _ = writeln!(
                s,
                "{:<6} {:>7.2} {:>7.2} {:>7.2}   {:>7.2} {:>7.2} {:>7.2}",
                label,
                100.0 * a.precision,
                100.0 * a.recall,
                100.0 * a.f1,
                100.0 * b.precision,
                100.0 * b.recall,
                100.0 * b.f1
            );
        };
        for r in &self.per_seed {
            row(&mut s, &r.seed.to_string(), &r.ds, &r.denoised);
        }
        row(&mut s, "mean", &self.mean.ds, &self.mean.denoised);
        let _ = writeln!(
            s,
            "F1 change: {:+.2}",
            100.0 * (self.mean.denoised.f1 - self.mean.ds.f1)
        );
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub relation: String,
    pub annotated: usize,
    /// DS labels scored against the human labels of the annotated instances.
    pub ds_precision: f64,
    pub ds_recall: f64,
    pub ds_accuracy: f64,
    pub positive_patterns: usize,
    pub negative_patterns: usize,
    pub discarded_patterns: usize,
}

impl Diagnosis {
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "relation: {}", self.relation);
        let _ = writeln!(s, "annotated instances: {}", self.annotated);
        let _ = writeln!(
            s,
            "{:>7} {:>7} {:>7}   {:>5} {:>5} {:>5}",
            "DS P", "DS R", "DS Acc", "#pos", "#neg", "#disc"
        );
        let _ = writeln!(
            s,
            "{:>7.2} {:>7.2} {:>7.2}   {:>5} {:>5} {:>5}",
            100.0 * self.ds_precision,
            100.0 * self.ds_recall,
            100.0 * self.ds_accuracy,
            self.positive_patterns,
            self.negative_patterns,
            self.discarded_patterns
        );
        s
    }
}
