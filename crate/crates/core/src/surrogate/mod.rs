//! Fitness approximation: a ridge model from cheap probe features to full
//! fitness, the phase machine deciding who gets a true evaluation, and the
//! best-of-N memetic wrapper around variation operators.

mod memetic;
mod phase;
mod ridge;

pub use memetic::{memetic_apply, MemeticChoice, MEMETIC_TRIALS};
pub use phase::{EvalPlan, Phase, PhaseState, DEFAULT_FOLDS, SAMPLE_RATE, SWITCH_THRESHOLD};
pub use ridge::{cv_error, fit, generation_weight, RidgeModel, DEFAULT_ALPHA, MIN_SAMPLES};

use crate::evolution::Metrics;

pub const FEATURES: usize = 5;

/// Model inputs, in this order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub score: f64,
    pub log_lifetime: f64,
    pub log_written: f64,
    pub rate: f64,
    pub max_nodes: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURES] {
        [self.score, self.log_lifetime, self.log_written, self.rate, self.max_nodes]
    }

    pub fn from_array(a: [f64; FEATURES]) -> FeatureVector {
        FeatureVector {
            score: a[0],
            log_lifetime: a[1],
            log_written: a[2],
            rate: a[3],
            max_nodes: a[4],
        }
    }
}

pub fn vectorize(m: &Metrics, n1: usize, n2: usize) -> FeatureVector {
    FeatureVector {
        score: m.avg_score,
        log_lifetime: m.avg_reached_round.max(1.0).log10(),
        log_written: m.avg_written_bytes.max(1.0).log10(),
        rate: m.writing_rate,
        max_nodes: n1.max(n2) as f64,
    }
}

/// One training row: probe features, the fitness a full evaluation gave,
/// and when it was gathered.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub features: FeatureVector,
    pub fitness: f64,
    pub generation: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SurrogateError {
    #[error("{have} samples, need at least {need}")]
    TooFewSamples { have: usize, need: usize },
    #[error("weighted design matrix is singular")]
    DegenerateDesign,
    #[error("dataset line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub const DATASET_HEADER: &str = "score,log_lifetime,log_written,rate,max_nodes,fitness,generation";

/// Dataset as CSV with [`DATASET_HEADER`].
pub fn dataset_to_csv(data: &[Sample]) -> String {
    let mut out = String::from(DATASET_HEADER);
    out.push('\n');
    for s in data {
        let f = s.features;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            f.score, f.log_lifetime, f.log_written, f.rate, f.max_nodes, s.fitness, s.generation
        ));
    }
    out
}

pub fn dataset_from_csv(text: &str) -> Result<Vec<Sample>, SurrogateError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == DATASET_HEADER => {}
        _ => {
            return Err(SurrogateError::Parse {
                line: 1,
                message: "missing dataset header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: &str| SurrogateError::Parse {
            line: i + 1,
            message: m.into(),
        };
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != FEATURES + 2 {
            return Err(bad("expected 7 columns"));
        }
        let mut v = [0.0; FEATURES + 1];
        for (k, c) in cells[..FEATURES + 1].iter().enumerate() {
            v[k] = c.trim().parse().map_err(|_| bad("bad number"))?;
        }
        out.push(Sample {
            features: FeatureVector::from_array([v[0], v[1], v[2], v[3], v[4]]),
            fitness: v[5],
            generation: cells[FEATURES + 1].trim().parse().map_err(|_| bad("bad generation"))?,
        });
    }
    Ok(out)
}
