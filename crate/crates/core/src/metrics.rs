//! Prediction quality and replication statistics.
//!
//! "Precision" here is the overall fraction of correct predictions and "recall" is the
//! per-class correct fraction averaged over the classes present in the test set; the
//! F-measure is their harmonic mean.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::learning::LinearModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub window_index: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

fn check(model: &LinearModel, test: &Dataset) -> Result<()> {
    if test.is_empty() {
        return Err(Error::domain("cannot evaluate on an empty test set"));
    }
    if model.feature_dim() != test.feature_dim() {
        return Err(Error::domain("model and test set differ in feature dimension"));
    }
    Ok(())
}

/// Per-class (correct, total) counts.
fn tallies(model: &LinearModel, test: &Dataset) -> Vec<(usize, usize)> {
    let mut t = vec![(0, 0); test.num_classes()];
    for o in test {
        let entry = &mut t[o.label];
        entry.1 += 1;
        if model.predict_unchecked(&o.features) == o.label {
            entry.0 += 1;
        }
    }
    t
}

fn precision_of(t: &[(usize, usize)]) -> f64 {
    let (correct, total) = t.iter().fold((0, 0), |(c, n), (a, b)| (c + a, n + b));
    correct as f64 / total as f64
}

fn recall_of(t: &[(usize, usize)]) -> f64 {
    let per_class: Vec<f64> = t
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(c, n)| *c as f64 / *n as f64)
        .collect();
    per_class.iter().sum::<f64>() / per_class.len() as f64
}

/// Fraction of test points predicted correctly.
pub fn precision(model: &LinearModel, test: &Dataset) -> Result<f64> {
    check(model, test)?;
    Ok(precision_of(&tallies(model, test)))
}

/// Macro-averaged per-class recall over the classes present in `test`.
pub fn recall(model: &LinearModel, test: &Dataset) -> Result<f64> {
    check(model, test)?;
    Ok(recall_of(&tallies(model, test)))
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r <= 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Precision, recall and F-measure from a single pass over the test set.
pub fn evaluate(model: &LinearModel, test: &Dataset, window_index: usize) -> Result<EvaluationResult> {
    check(model, test)?;
    let t = tallies(model, test);
    let precision = precision_of(&t);
    let recall = recall_of(&t);
    Ok(EvaluationResult {
        window_index,
        precision,
        recall,
        f_measure: f_measure(precision, recall),
    })
}

/// First and one-past-last 0-based window index of the convergence interval
/// (windows 50 through 100 when counting from 1).
pub const CONVERGENCE_WINDOWS: (usize, usize) = (49, 100);

/// Mean of `series` over the convergence interval.
pub fn convergence_mean(series: &[f64]) -> Result<f64> {
    let (lo, hi) = CONVERGENCE_WINDOWS;
    if series.len() < hi {
        return Err(Error::domain(format!(
            "convergence interval needs {hi} windows, series has {}",
            series.len()
        )));
    }
    let slice = &series[lo..hi];
    Ok(slice.iter().sum::<f64>() / slice.len() as f64)
}

/// Benchmark mean minus run mean over the convergence interval, in percentage points.
pub fn convergence_loss(run_f1: &[f64], benchmark_f1: &[f64]) -> Result<f64> {
    Ok((convergence_mean(benchmark_f1)? - convergence_mean(run_f1)?) * 100.0)
}

/// Per-window mean and Student-t half-width across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub mean: Vec<f64>,
    pub half_width: Vec<f64>,
}

pub fn replication_summary(replications: &[Vec<f64>], confidence: f64) -> Result<ReplicationSummary> {
    let r = replications.len();
    if r < 2 {
        return Err(Error::domain("confidence intervals need at least two replications"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::domain(format!("confidence {confidence} outside (0, 1)")));
    }
    let len = replications[0].len();
    if replications.iter().any(|s| s.len() != len) {
        return Err(Error::domain("replication series differ in length"));
    }
    let t = StudentsT::new(0.0, 1.0, (r - 1) as f64)
        .map_err(|e| Error::domain(e.to_string()))?
        .inverse_cdf(0.5 + confidence / 2.0);
    let n = r as f64;
    let mut mean = Vec::with_capacity(len);
    let mut half_width = Vec::with_capacity(len);
    for w in 0..len {
        let m = replications.iter().map(|s| s[w]).sum::<f64>() / n;
        let var = replications.iter().map(|s| (s[w] - m).powi(2)).sum::<f64>() / (n - 1.0);
        mean.push(m);
        half_width.push(t * (var / n).sqrt());
    }
    Ok(ReplicationSummary { mean, half_width })
}

/// Mean of each column without an interval; used when only one replication exists.
pub fn column_means(replications: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = replications.first() else {
        return Vec::new();
    };
    let n = replications.len() as f64;
    (0..first.len())
        .map(|w| replications.iter().map(|s| s[w]).sum::<f64>() / n)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Observation;

    /// Model that predicts class `c` exactly when feature `c` is the largest.
    fn identity_model(k: usize) -> LinearModel {
        let mut m = LinearModel::zeros(k, k);
        for c in 0..k {
            m.row_mut(c)[c] = 1.0;
        }
        m
    }

    fn points(pairs: &[(usize, usize)], k: usize) -> Dataset {
        // (true label, predicted label)
        let rows = pairs
            .iter()
            .map(|&(y, yhat)| {
                let mut f = vec![0.0; k];
                f[yhat] = 1.0;
                Observation::new(f, y)
            })
            .collect();
        Dataset::new(rows, k, k).unwrap()
    }

    #[test]
    fn perfect_and_always_wrong() {
        let m = identity_model(2);
        let good = points(&[(0, 0), (1, 1), (1, 1)], 2);
        assert_eq!(precision(&m, &good).unwrap(), 1.0);
        assert_eq!(recall(&m, &good).unwrap(), 1.0);
        let bad = points(&[(0, 1), (1, 0)], 2);
        assert_eq!(precision(&m, &bad).unwrap(), 0.0);
        assert_eq!(recall(&m, &bad).unwrap(), 0.0);
        assert_eq!(evaluate(&m, &bad, 0).unwrap().f_measure, 0.0);
    }

    #[test]
    fn hand_counted_values() {
        let m = identity_model(2);
        // class 0: 3 of 4 right; class 1: 1 of 2 right -> precision 4/6, recall 0.625
        let d = points(&[(0, 0), (0, 0), (0, 0), (0, 1), (1, 1), (1, 0)], 2);
        assert!((precision(&m, &d).unwrap() - 4.0 / 6.0).abs() < 1e-12);
        assert!((recall(&m, &d).unwrap() - 0.625).abs() < 1e-12);
        let d = points(&[(0, 0), (0, 0), (0, 0), (1, 0)], 2);
        assert_eq!(precision(&m, &d).unwrap(), 0.75);
        let d = points(&[(0, 0), (0, 0), (1, 1), (1, 0)], 2);
        assert_eq!(recall(&m, &d).unwrap(), 0.75);
        let d = points(&[(0, 0), (1, 0)], 2);
        assert_eq!(recall(&m, &d).unwrap(), 0.5);
    }

    #[test]
    fn f_measure_values() {
        assert!((f_measure(0.37, 0.37) - 0.37).abs() < 1e-15);
        assert_eq!(f_measure(1.0, 0.0), 0.0);
        assert_eq!(f_measure(0.0, 0.0), 0.0);
        assert!((f_measure(0.6, 0.66) - 0.6286).abs() < 1e-4);
    }

    #[test]
    fn convergence_losses() {
        let a = vec![0.5; 100];
        assert_eq!(convergence_loss(&a, &a).unwrap(), 0.0);
        let run = vec![0.61; 100];
        let bench = vec![0.63; 100];
        assert!((convergence_loss(&run, &bench).unwrap() - 2.0).abs() < 1e-9);
        assert!(convergence_loss(&bench, &run).unwrap() < 0.0);
        assert!(convergence_loss(&run[..99], &bench).is_err());
        // only windows 50..=100 count
        let mut early_bad = vec![0.63; 100];
        early_bad[..49].iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(convergence_loss(&early_bad, &bench).unwrap(), 0.0);
    }

    #[test]
    fn replication_intervals() {
        let same = vec![vec![0.5, 0.6]; 4];
        let s = replication_summary(&same, 0.95).unwrap();
        assert_eq!(s.half_width, vec![0.0, 0.0]);
        let s = replication_summary(&[vec![0.6], vec![0.64]], 0.95).unwrap();
        assert!((s.mean[0] - 0.62).abs() < 1e-12);
        assert!((s.half_width[0] - 0.2541).abs() < 1e-3);
        assert!(replication_summary(&[vec![0.6]], 0.95).is_err());
    }
}
