//! Linear SVM base learner: one-vs-rest, L2-regularized hinge loss, trained with the
//! Pegasos stochastic subgradient schedule `eta_t = 1 / (lambda * t)`.
//!
//! The bias is learned as the weight of a constant feature and is regularized with the rest.
//! Each binary problem returns the average of the iterates visited during the last epoch.

use rand::seq::SliceRandom;

use super::LinearModel;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::rng::{derive, rng_from};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseTrainerConfig {
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for BaseTrainerConfig {
    fn default() -> Self {
        BaseTrainerConfig {
            lambda: 1e-4,
            epochs: 20,
            seed: 0,
        }
    }
}

impl BaseTrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("svm lambda must be > 0, got {}", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(Error::config("svm epochs must be >= 1"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        BaseTrainerConfig { seed, ..self }
    }
}

/// Trains the one-vs-rest base classifier sequentially.
pub fn train_base(data: &Dataset, cfg: &BaseTrainerConfig) -> Result<LinearModel> {
    train_base_with(data, cfg, Execution::Sequential)
}

/// Trains the one-vs-rest base classifier, optionally running the binary problems on the
/// rayon pool. Output is bit-identical in both modes.
pub fn train_base_with(data: &Dataset, cfg: &BaseTrainerConfig, exec: Execution) -> Result<LinearModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("cannot train a base learner on an empty dataset"));
    }
    let k = data.num_classes();
    let d = data.feature_dim();
    let counts = data.class_counts();
    let mut model = LinearModel::zeros(k, d);

    let present: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
    if present.len() == 1 {
        for c in 0..k {
            model.row_mut(c)[d] = if c == present[0] { 1.0 } else { -1.0 };
        }
        return Ok(model);
    }

    let rows = par::map_range(exec, k, |c| pegasos_binary(data, c, cfg));
    for (c, row) in rows.into_iter().enumerate() {
        model.row_mut(c).copy_from_slice(&row);
    }
    Ok(model)
}

fn pegasos_binary(data: &Dataset, class: usize, cfg: &BaseTrainerConfig) -> Vec<f64> {
    let d = data.feature_dim();
    let lambda = cfg.lambda;
    let radius_sq = 1.0 / lambda;
    let mut rng = rng_from(derive(cfg.seed, class as u64));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let rows = data.observations();
    // squared norm of each point with the constant bias feature appended
    let sq: Vec<f64> = rows.iter().map(|o| dot(&o.features, &o.features) + 1.0).collect();

    // the iterate is scale * v; v[d] is the bias weight
    let mut v = vec![0.0; d + 1];
    let mut scale = 1.0;
    let mut v_sq;
    let mut avg = vec![0.0; d + 1];
    let mut t = 0usize;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let last = epoch + 1 == cfg.epochs;
        // the incremental norm drifts slowly; refresh it once per epoch
        v_sq = dot(&v, &v);
        for &i in &order {
            t += 1;
            let obs = &rows[i];
            let y = if obs.label == class { 1.0 } else { -1.0 };
            let eta = 1.0 / (lambda * t as f64);
            let vx = dot(&v[..d], &obs.features) + v[d];
            let margin = y * scale * vx;
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|x| *x = 0.0);
                scale = 1.0;
                v_sq = 0.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let c = eta * y / scale;
                let vx = if v_sq == 0.0 { 0.0 } else { vx };
                for (w, x) in v[..d].iter_mut().zip(&obs.features) {
                    *w += c * x;
                }
                v[d] += c;
                v_sq += 2.0 * c * vx + c * c * sq[i];
            }
            let norm_sq = scale * scale * v_sq;
            if norm_sq > radius_sq {
                scale *= (radius_sq / norm_sq).sqrt();
            }
            if scale < 1e-100 {
                v.iter_mut().for_each(|x| *x *= scale);
                v_sq *= scale * scale;
                scale = 1.0;
            }
            if last {
                for (a, x) in avg.iter_mut().zip(&v) {
                    *a += scale * x;
                }
            }
        }
    }
    let n = data.len() as f64;
    avg.iter_mut().for_each(|a| *a /= n);
    avg
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Regularized hinge objective of one binary sub-problem:
/// `lambda/2 * ||(w, b)||^2 + mean(max(0, 1 - y (w.x + b)))`.
pub fn binary_objective(model: &LinearModel, class: usize, data: &Dataset, lambda: f64) -> f64 {
    let row = model.row(class);
    let reg = 0.5 * lambda * row.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = data
        .iter()
        .map(|o| {
            let y = if o.label == class { 1.0 } else { -1.0 };
            (1.0 - y * model.score(class, &o.features)).max(0.0)
        })
        .sum();
    reg + hinge / data.len() as f64
}

/// Sum of the per-class objectives.
pub fn objective(model: &LinearModel, data: &Dataset, lambda: f64) -> f64 {
    (0..model.num_classes())
        .map(|c| binary_objective(model, c, data, lambda))
        .sum()
}
