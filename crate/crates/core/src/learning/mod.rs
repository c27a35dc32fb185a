//! Model mathematics: the linear classifier, its SVM base learner, GreedyTL re-training,
//! model averaging and the label-entropy index used for center election.

mod greedy_tl;
mod linear;
mod svm;

pub use greedy_tl::{greedy_tl, greedy_tl_fit, Atom, GreedyFit, GreedyTLConfig};
pub use linear::{model_wire_bits, LinearModel, HEADER_BYTES};
pub use svm::{binary_objective, objective, train_base, train_base_with, BaseTrainerConfig};

use rand::seq::SliceRandom;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Label entropy with logarithm base `num_classes`, so the result lies in `[0, 1]`.
/// Empty data has entropy 0.
pub fn entropy(data: &Dataset, num_classes: usize) -> f64 {
    if data.is_empty() || num_classes < 2 {
        return 0.0;
    }
    entropy_of_counts(&data.class_counts(), num_classes)
}

pub fn entropy_of_counts(counts: &[usize], num_classes: usize) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 || num_classes < 2 {
        return 0.0;
    }
    let base = (num_classes as f64).ln();
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln() / base
        })
        .sum();
    h.clamp(0.0, 1.0)
}

/// Elementwise mean of the weight matrices.
pub fn average_models(models: &[LinearModel]) -> Result<LinearModel> {
    let first = models
        .first()
        .ok_or_else(|| Error::domain("cannot average an empty list of models"))?;
    if let Some(bad) = models.iter().position(|m| !m.same_shape(first)) {
        return Err(Error::domain(format!("model {bad} differs in shape from model 0")));
    }
    let mut sum = vec![0.0; first.weights().len()];
    for m in models {
        for (s, w) in sum.iter_mut().zip(m.weights()) {
            *s += w;
        }
    }
    let n = models.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    LinearModel::from_weights(first.num_classes(), first.feature_dim(), sum)
}

/// Keeps `min(n, available)` random rows of each class, in their original relative order.
pub fn subsample_per_class(data: &Dataset, n: usize, rng: &mut SimRng) -> Dataset {
    let mut keep = Vec::new();
    for mut group in data.indices_by_class() {
        let take = n.min(group.len());
        let (chosen, _) = group.partial_shuffle(rng, take);
        keep.extend_from_slice(chosen);
    }
    keep.sort_unstable();
    let rows = keep.into_iter().map(|i| data.observations()[i].clone()).collect();
    data.with_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Observation;
    use crate::rng::rng_from;

    fn labelled(counts: &[usize]) -> Dataset {
        let mut rows = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            for i in 0..n {
                rows.push(Observation::new(vec![i as f64], c));
            }
        }
        Dataset::new(rows, counts.len(), 1).unwrap()
    }

    #[test]
    fn entropy_boundaries() {
        assert!((entropy(&labelled(&[3; 7]), 7) - 1.0).abs() < 1e-12);
        assert_eq!(entropy(&labelled(&[0, 0, 5, 0, 0, 0, 0]), 7), 0.0);
        assert_eq!(entropy(&Dataset::empty(7, 1), 7), 0.0);
    }

    #[test]
    fn entropy_two_classes_three_to_one() {
        let h = entropy(&labelled(&[3, 1]), 2);
        let expected = -(0.75f64 * 0.75f64.log2() + 0.25 * 0.25f64.log2());
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 0.8113).abs() < 1e-4);
    }

    #[test]
    fn averaging() {
        let ones = LinearModel::from_weights(2, 1, vec![1.0; 4]).unwrap();
        let threes = LinearModel::from_weights(2, 1, vec![3.0; 4]).unwrap();
        assert_eq!(average_models(&[ones.clone(), threes]).unwrap().weights(), &[2.0; 4]);
        assert_eq!(average_models(&[ones.clone(), ones.clone(), ones.clone()]).unwrap(), ones);
        assert!(average_models(&[]).is_err());
        assert!(average_models(&[ones, LinearModel::zeros(3, 1)]).is_err());
    }

    #[test]
    fn subsample_counts() {
        let data = labelled(&[10; 7]);
        let a = subsample_per_class(&data, 2, &mut rng_from(1));
        let b = subsample_per_class(&data, 2, &mut rng_from(2));
        assert_eq!(a.len(), 14);
        assert_eq!(a.class_counts(), vec![2; 7]);
        assert_eq!(b.class_counts(), vec![2; 7]);
        assert_ne!(a, b);
        let capped = subsample_per_class(&labelled(&[3, 1]), 5, &mut rng_from(1));
        assert_eq!(capped.class_counts(), vec![3, 1]);
    }
}
