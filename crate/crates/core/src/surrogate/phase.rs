//! Switching between true evaluation and approximation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ridge::{cv_error, fit, RidgeModel, DEFAULT_ALPHA};
use super::Sample;

/// Cross-validated mean absolute error at or below which approximation is
/// trusted: 5% of the 2.5 fitness range.
pub const SWITCH_THRESHOLD: f64 = 0.125;
/// Share of each approximated generation that still gets a true evaluation.
pub const SAMPLE_RATE: f64 = 0.30;
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Actual,
    Approx,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Actual => "actual",
            Phase::Approx => "approx",
        }
    }

    pub fn parse(s: &str) -> Option<Phase> {
        match s {
            "actual" => Some(Phase::Actual),
            "approx" => Some(Phase::Approx),
            _ => None,
        }
    }
}

/// Which individuals of a generation get a true evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPlan {
    pub phase: Phase,
    pub actual: Vec<bool>,
}

impl EvalPlan {
    pub fn all_actual(n: usize) -> EvalPlan {
        EvalPlan {
            phase: Phase::Actual,
            actual: vec![true; n],
        }
    }

    pub fn actual_count(&self) -> usize {
        self.actual.iter().filter(|a| **a).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub phase: Phase,
    pub dataset: Vec<Sample>,
    pub threshold: f64,
    pub sample_rate: f64,
    pub folds: usize,
    pub alpha: f64,
    pub last_cv: Option<f64>,
    /// Set once the phase has reached `Approx`; the model is only offered
    /// to callers from then on.
    pub switched: bool,
    model: Option<RidgeModel>,
}

impl Default for PhaseState {
    fn default() -> Self {
        PhaseState::new()
    }
}

impl PhaseState {
    pub fn new() -> PhaseState {
        PhaseState {
            phase: Phase::Actual,
            dataset: Vec::new(),
            threshold: SWITCH_THRESHOLD,
            sample_rate: SAMPLE_RATE,
            folds: DEFAULT_FOLDS,
            alpha: DEFAULT_ALPHA,
            last_cv: None,
            switched: false,
            model: None,
        }
    }

    /// Restores a state from a saved dataset and phase, refitting the model.
    pub fn restore(dataset: Vec<Sample>, phase: Phase, switched: bool) -> PhaseState {
        let mut s = PhaseState {
            dataset,
            switched,
            ..PhaseState::new()
        };
        s.refit();
        s.phase = phase;
        s
    }

    pub fn model(&self) -> Option<&RidgeModel> {
        if self.switched {
            self.model.as_ref()
        } else {
            None
        }
    }

    /// Evaluation plan for a population of `n`. In the approximation phase
    /// a seeded shuffle picks `ceil(sample_rate * n)` individuals.
    pub fn plan(&self, n: usize, seed: u64) -> EvalPlan {
        if self.phase == Phase::Actual || self.model.is_none() {
            return EvalPlan::all_actual(n);
        }
        // The tolerance keeps exact products such as 0.3 * 10 from rounding up.
        let k = ((self.sample_rate * n as f64 - 1e-9).ceil() as usize).min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut actual = vec![false; n];
        for &i in &idx[..k] {
            actual[i] = true;
        }
        EvalPlan {
            phase: Phase::Approx,
            actual,
        }
    }

    fn refit(&mut self) {
        self.model = fit(&self.dataset, self.alpha).ok();
        self.last_cv = cv_error(&self.dataset, self.folds, self.alpha).ok();
    }

    /// Adds a generation's truly evaluated samples, refits and moves
    /// between phases on the cross-validated error.
    pub fn ingest(&mut self, samples: &[Sample]) {
        self.dataset.extend_from_slice(samples);
        self.refit();
        let good = matches!(self.last_cv, Some(e) if e <= self.threshold) && self.model.is_some();
        self.phase = if good { Phase::Approx } else { Phase::Actual };
        if good {
            self.switched = true;
        }
    }

    /// Ingests results, then plans the next generation.
    pub fn step_phase(&mut self, samples: &[Sample], n: usize, seed: u64) -> EvalPlan {
        self.ingest(samples);
        self.plan(n, seed)
    }

    /// Drops everything learned, e.g. after the adversary changes.
    pub fn reset(&mut self) {
        *self = PhaseState {
            threshold: self.threshold,
            sample_rate: self.sample_rate,
            folds: self.folds,
            alpha: self.alpha,
            ..PhaseState::new()
        };
    }

    pub fn predict(&self, f: &super::FeatureVector) -> Option<f64> {
        self.model.as_ref().map(|m| m.predict(f))
    }
}
