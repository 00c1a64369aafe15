//! Weighted ridge regression on standardized features.

use super::{FeatureVector, Sample, SurrogateError, FEATURES};

pub const DEFAULT_ALPHA: f64 = 0.3;
/// Fewest samples `fit` accepts: one per coefficient plus the intercept.
pub const MIN_SAMPLES: usize = FEATURES + 1;

/// Sample weight for data gathered at `generation`: later samples count more.
pub fn generation_weight(generation: u32) -> f64 {
    (generation as f64 + 1.0).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub alpha: f64,
    /// Weighted feature means and standard deviations used to standardize
    /// inputs at prediction time.
    pub mean: [f64; FEATURES],
    pub scale: [f64; FEATURES],
    /// Coefficients on standardized features.
    pub beta: [f64; FEATURES],
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let x = x.to_array();
        let mut y = self.intercept;
        for j in 0..FEATURES {
            y += self.beta[j] * (x[j] - self.mean[j]) / self.scale[j];
        }
        y
    }

    /// Coefficients in original feature units.
    pub fn coefficients(&self) -> [f64; FEATURES] {
        let mut c = [0.0; FEATURES];
        for j in 0..FEATURES {
            c[j] = self.beta[j] / self.scale[j];
        }
        c
    }

    /// Intercept in original feature units.
    pub fn raw_intercept(&self) -> f64 {
        let c = self.coefficients();
        self.intercept - (0..FEATURES).map(|j| c[j] * self.mean[j]).sum::<f64>()
    }
}

/// Minimizes `sum_i w_i (y_i - z_i.beta - b)^2 + alpha |beta|^2` with
/// `w_i = sqrt(generation_i + 1)` normalized to sum to one, over features
/// standardized with the same weights. The intercept is not penalized.
pub fn fit(data: &[Sample], alpha: f64) -> Result<RidgeModel, SurrogateError> {
    if data.len() < MIN_SAMPLES {
        return Err(SurrogateError::TooFewSamples {
            have: data.len(),
            need: MIN_SAMPLES,
        });
    }
    let raw: Vec<f64> = data.iter().map(|s| generation_weight(s.generation)).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let xs: Vec<[f64; FEATURES]> = data.iter().map(|s| s.features.to_array()).collect();

    let mut mean = [0.0; FEATURES];
    let mut y_mean = 0.0;
    for (i, x) in xs.iter().enumerate() {
        for j in 0..FEATURES {
            mean[j] += w[i] * x[j];
        }
        y_mean += w[i] * data[i].fitness;
    }
    let mut scale = [0.0; FEATURES];
    for (i, x) in xs.iter().enumerate() {
        for j in 0..FEATURES {
            scale[j] += w[i] * (x[j] - mean[j]).powi(2);
        }
    }
    for s in &mut scale {
        *s = s.sqrt();
        // A constant feature carries no information; leave it unscaled so
        // its standardized column is all zeros.
        if *s < 1e-12 {
            *s = 1.0;
        }
    }

    let mut a = [[0.0; FEATURES]; FEATURES];
    let mut b = [0.0; FEATURES];
    for (i, x) in xs.iter().enumerate() {
        let mut z = [0.0; FEATURES];
        for j in 0..FEATURES {
            z[j] = (x[j] - mean[j]) / scale[j];
        }
        let r = data[i].fitness - y_mean;
        for j in 0..FEATURES {
            b[j] += w[i] * z[j] * r;
            for k in 0..FEATURES {
                a[j][k] += w[i] * z[j] * z[k];
            }
        }
    }
    for (j, row) in a.iter_mut().enumerate() {
        row[j] += alpha;
    }
    let beta = solve(a, b).ok_or(SurrogateError::DegenerateDesign)?;
    Ok(RidgeModel {
        alpha,
        mean,
        scale,
        beta,
        intercept: y_mean,
    })
}

/// Gaussian elimination with partial pivoting.
fn solve(mut a: [[f64; FEATURES]; FEATURES], mut b: [f64; FEATURES]) -> Option<[f64; FEATURES]> {
    let n = FEATURES;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; FEATURES];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Mean absolute error of held-out predictions over `folds` folds, sample
/// `i` belonging to fold `i % folds`.
pub fn cv_error(data: &[Sample], folds: usize, alpha: f64) -> Result<f64, SurrogateError> {
    if folds < 2 || data.len() < folds {
        return Err(SurrogateError::TooFewSamples {
            have: data.len(),
            need: folds.max(2),
        });
    }
    let mut abs_err = 0.0;
    for f in 0..folds {
        let train: Vec<Sample> = data
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds != f)
            .map(|(_, s)| *s)
            .collect();
        let model = fit(&train, alpha)?;
        for s in data.iter().skip(f).step_by(folds) {
            abs_err += (model.predict(&s.features) - s.fitness).abs();
        }
    }
    Ok(abs_err / data.len() as f64)
}
