//! Fits the fitness surrogate to noisy synthetic samples and shows when
//! the phase machine would switch to approximation.

use cgforge::surrogate::{cv_error, fit, FeatureVector, PhaseState, Sample, DEFAULT_ALPHA, DEFAULT_FOLDS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for noise in [0.0, 0.1, 0.3, 0.6] {
        let data: Vec<Sample> = (0..96)
            .map(|i| {
                let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..5.3), rng.gen_range(0.0..4.0), 0.05, 60.0];
                Sample {
                    features: FeatureVector::from_array(x),
                    fitness: 2.0 * x[0] + 0.02 * x[1] + 0.03 * x[2] + noise * rng.gen_range(-1.0..1.0),
                    generation: i / 24,
                }
            })
            .collect();
        let model = fit(&data, DEFAULT_ALPHA).unwrap();
        let cv = cv_error(&data, DEFAULT_FOLDS, DEFAULT_ALPHA).unwrap();
        let mut state = PhaseState::new();
        state.ingest(&data);
        println!(
            "noise {:.1}: coefficients {:.3?}, cv {:.4}, phase {:?}",
            noise,
            model.coefficients(),
            cv,
            state.phase
        );
    }
}
