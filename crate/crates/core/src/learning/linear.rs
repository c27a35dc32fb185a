use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HTLM";
/// Size of the serialized header: magic, K as u32, d as u64.
pub const HEADER_BYTES: usize = 16;

/// One-vs-rest linear classifier stored as a row-major `K x (d + 1)` matrix whose last
/// column holds the per-class bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: Vec<f64>,
    num_classes: usize,
    feature_dim: usize,
}

impl LinearModel {
    pub fn zeros(num_classes: usize, feature_dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; num_classes * (feature_dim + 1)],
            num_classes,
            feature_dim,
        }
    }

    pub fn from_weights(num_classes: usize, feature_dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != num_classes * (feature_dim + 1) {
            return Err(Error::domain(format!(
                "expected {} weights for a {num_classes}x({feature_dim}+1) model, got {}",
                num_classes * (feature_dim + 1),
                weights.len()
            )));
        }
        if let Some(bad) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::domain(format!("weight {bad} is not finite")));
        }
        Ok(LinearModel {
            weights,
            num_classes,
            feature_dim,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Row `c`: `d` feature weights followed by the bias.
    pub fn row(&self, class: usize) -> &[f64] {
        let w = self.feature_dim + 1;
        &self.weights[class * w..(class + 1) * w]
    }

    pub fn row_mut(&mut self, class: usize) -> &mut [f64] {
        let w = self.feature_dim + 1;
        &mut self.weights[class * w..(class + 1) * w]
    }

    pub fn bias(&self, class: usize) -> f64 {
        self.row(class)[self.feature_dim]
    }

    pub fn same_shape(&self, other: &LinearModel) -> bool {
        self.num_classes == other.num_classes && self.feature_dim == other.feature_dim
    }

    /// Score of `class` at `x`. `x` must have length `d`.
    #[inline]
    pub fn score(&self, class: usize, x: &[f64]) -> f64 {
        let row = self.row(class);
        let (w, b) = row.split_at(self.feature_dim);
        w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b[0]
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_classes).map(|c| self.score(c, x)).collect()
    }

    /// Argmax class; ties go to the lowest class id.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.feature_dim {
            return Err(Error::domain(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.feature_dim
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..self.num_classes {
            let s = self.score(c, x);
            if s > best_score {
                best = c;
                best_score = s;
            }
        }
        best
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> LinearModel {
        LinearModel {
            weights: self.weights.iter().map(|w| w * factor).collect(),
            ..self.clone()
        }
    }

    /// Wire size in bits: the 128-bit header plus 64 bits per weight.
    pub fn wire_bits(&self) -> u64 {
        model_wire_bits(self.num_classes, self.feature_dim)
    }

    /// Little-endian encoding: `b"HTLM"`, K (u32), d (u64), then the weights row-major.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_BYTES + 8 * self.weights.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.num_classes as u32).to_le_bytes());
        out.extend_from_slice(&(self.feature_dim as u64).to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_BYTES || &bytes[..4] != MAGIC {
            return Err(Error::domain("not a serialized linear model"));
        }
        let k = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
        let d = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[HEADER_BYTES..];
        if body.len() != 8 * k * (d + 1) {
            return Err(Error::domain(format!(
                "model body has {} bytes, header implies {}",
                body.len(),
                8 * k * (d + 1)
            )));
        }
        let weights = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        LinearModel::from_weights(k, d, weights)
    }
}

pub fn model_wire_bits(num_classes: usize, feature_dim: usize) -> u64 {
    (HEADER_BYTES as u64) * 8 + (num_classes * (feature_dim + 1)) as u64 * 64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_predicts_class_zero() {
        let m = LinearModel::zeros(7, 3);
        assert_eq!(m.predict(&[1.0, -2.0, 3.0]).unwrap(), 0);
    }

    #[test]
    fn dominant_row_wins_on_positive_inputs() {
        let mut m = LinearModel::zeros(3, 2);
        m.row_mut(2).copy_from_slice(&[1.0, 1.0, 0.0]);
        for x in [[0.1, 0.2], [5.0, 0.0], [1.0, 1.0]] {
            assert_eq!(m.predict(&x).unwrap(), 2);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = LinearModel::zeros(2, 3);
        assert!(matches!(m.predict(&[1.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn wire_size_matches_serialization() {
        let m = LinearModel::zeros(7, 54);
        assert_eq!(m.wire_bits(), 24_768);
        assert_eq!(m.to_bytes().len() as u64 * 8, m.wire_bits());
        assert_eq!(model_wire_bits(1, 0), 192);
        assert_eq!(LinearModel::zeros(1, 0).to_bytes().len() * 8, 192);
    }

    #[test]
    fn bytes_round_trip() {
        let w: Vec<f64> = (0..12).map(|i| i as f64 * 0.25 - 1.0).collect();
        let m = LinearModel::from_weights(3, 3, w).unwrap();
        assert_eq!(LinearModel::from_bytes(&m.to_bytes()).unwrap(), m);
        assert!(LinearModel::from_bytes(&m.to_bytes()[..20]).is_err());
    }

    #[test]
    fn non_finite_weights_rejected() {
        assert!(LinearModel::from_weights(1, 1, vec![f64::NAN, 0.0]).is_err());
        assert!(LinearModel::from_weights(1, 1, vec![0.0]).is_err());
    }
}
