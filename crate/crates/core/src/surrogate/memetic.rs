use super::{FeatureVector, RidgeModel};

pub const MEMETIC_TRIALS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct MemeticChoice<T> {
    pub child: T,
    /// Predicted fitness of `child`; `None` when no model was available.
    pub predicted: Option<f64>,
    /// Predictions for every candidate, in generation order.
    pub candidates: Vec<f64>,
}

/// Runs `operator` `trials` times and keeps the candidate the model rates
/// highest, the first one on ties. `probe` turns candidates into features
/// (it receives them all at once so it can evaluate them in parallel).
/// Without a model this is a single plain application.
pub fn memetic_apply<T, R, Op, Probe>(
    mut operator: Op,
    rng: &mut R,
    trials: usize,
    model: Option<&RidgeModel>,
    probe: Probe,
) -> MemeticChoice<T>
where
    Op: FnMut(&mut R) -> T,
    Probe: FnOnce(&[T]) -> Vec<FeatureVector>,
{
    let Some(model) = model else {
        return MemeticChoice {
            child: operator(rng),
            predicted: None,
            candidates: Vec::new(),
        };
    };
    let mut pool: Vec<T> = (0..trials.max(1)).map(|_| operator(rng)).collect();
    let features = probe(&pool);
    assert_eq!(features.len(), pool.len(), "one feature vector per candidate");
    let candidates: Vec<f64> = features.iter().map(|f| model.predict(f)).collect();
    let mut best = 0;
    for (i, p) in candidates.iter().enumerate() {
        if *p > candidates[best] {
            best = i;
        }
    }
    MemeticChoice {
        child: pool.swap_remove(best),
        predicted: Some(candidates[best]),
        candidates,
    }
}
