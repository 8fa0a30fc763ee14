//! Cosine prototype classifiers trained with a quality-adaptive angular margin.

mod model;
mod qamc;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use model::{Head, HeadMeta, ModelFile, PlaceHeadRef, MODEL_MAGIC, MODEL_VERSION};
pub use qamc::{loss_and_grad, qamc_logits, qamc_loss, softmax, LossGrad};
pub use train::{train_prototypes, Sample, TrainReport, TrainSchedule};

/// Unit-norm tolerance for descriptors and prototype rows.
pub const UNIT_TOL: f64 = 1e-6;

/// How the target logit is adjusted during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginMode {
    /// Margin modulated by the per-sample quality.
    Adaptive,
    /// Quality pinned to 0.5: plain additive margin `m`.
    Fixed,
    /// No margin: scaled-cosine softmax cross-entropy.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginParams {
    pub m: f64,
    pub s: f64,
    pub mode: MarginMode,
}

impl Default for MarginParams {
    fn default() -> Self {
        Self {
            m: 0.2,
            s: 100.0,
            mode: MarginMode::Adaptive,
        }
    }
}

impl MarginParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return Err(Error::Config(format!("margin m must be >= 0, got {}", self.m)));
        }
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::Config(format!("scale s must be > 0, got {}", self.s)));
        }
        Ok(())
    }

    /// Quality actually fed to the margin for a sample of quality `q`.
    pub fn effective_quality(&self, q: f64) -> f64 {
        match self.mode {
            MarginMode::Adaptive => q,
            MarginMode::Fixed | MarginMode::None => 0.5,
        }
    }

    pub fn effective_margin(&self) -> f64 {
        match self.mode {
            MarginMode::None => 0.0,
            _ => self.m,
        }
    }
}

/// `rows × cols` row-major weights with unit-norm rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMatrix {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl PrototypeMatrix {
    /// Normalizes every row; zero rows are rejected.
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape("at least one row and column", format!("{rows}×{cols}")));
        }
        if weights.len() != rows * cols {
            return Err(Error::shape(format!("{rows}×{cols} weights"), weights.len()));
        }
        let mut m = Self { rows, cols, weights };
        for r in 0..rows {
            if !normalize(m.row_mut(r)) {
                return Err(Error::Domain(format!("prototype row {r} has zero or non-finite norm")));
            }
        }
        Ok(m)
    }

    /// Rows read back from storage: kept as stored (already unit norm up to
    /// f32 rounding) so a saved model reproduces its in-memory scores.
    pub(crate) fn from_stored(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || weights.len() != rows * cols {
            return Err(Error::shape(format!("{rows}×{cols} weights"), weights.len()));
        }
        let m = Self { rows, cols, weights };
        for r in 0..rows {
            let n = m.row(r).iter().map(|w| w * w).sum::<f64>().sqrt();
            if !((n - 1.0).abs() <= 1e-4) {
                return Err(Error::Domain(format!("stored prototype row {r} has norm {n}")));
            }
        }
        Ok(m)
    }

    /// Rounds every weight through f32, the on-disk precision.
    pub(crate) fn round_to_f32(&mut self) {
        self.weights.iter_mut().for_each(|w| *w = f64::from(*w as f32));
    }

    pub(crate) fn from_normalized(rows: usize, cols: usize, weights: Vec<f64>) -> Self {
        debug_assert_eq!(weights.len(), rows * cols);
        Self { rows, cols, weights }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.weights[r * self.cols..(r + 1) * self.cols]
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn renormalize(&mut self) {
        for r in 0..self.rows {
            normalize(self.row_mut(r));
        }
    }

    /// `row_j · x` for every row.
    pub fn cosines(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Mismatch(format!(
                "descriptor has {} dimensions, prototypes expect {}",
                x.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }

    /// `softmax(s · cos)`, no margin.
    pub fn predict(&self, x: &[f64], s: f64) -> Result<Vec<f64>> {
        let logits: Vec<f64> = self.cosines(x)?.into_iter().map(|c| s * c).collect();
        Ok(softmax(&logits))
    }
}

/// Normalizes `x` and scores it against the prototypes; see [`PrototypeMatrix::predict`].
pub fn predict(descriptor: &[f64], prototypes: &PrototypeMatrix, s: f64) -> Result<Vec<f64>> {
    let n = norm(descriptor);
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::Contract("descriptor has zero or non-finite norm".into()));
    }
    let x: Vec<f64> = descriptor.iter().map(|v| v / n).collect();
    prototypes.predict(&x, s)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Returns false, leaving `v` untouched, when its norm is zero or non-finite.
pub(crate) fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if !(n > 0.0 && n.is_finite()) {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

pub(crate) fn check_unit(x: &[f64]) -> Result<()> {
    let n = norm(x);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::Contract(format!("descriptor norm {n} is not 1 within {UNIT_TOL}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matching_prototype_dominates() {
        let d = 8;
        let mut w = vec![0.0; 3 * d];
        for r in 0..3 {
            w[r * d + r] = 1.0;
        }
        let p = PrototypeMatrix::new(3, d, w).unwrap();
        let mut x = vec![0.0; d];
        x[1] = 1.0;
        let probs = p.predict(&x, 100.0).unwrap();
        // softmax(0, 100, 0)
        let oracle = 1.0 / (1.0 + 2.0 * (-100f64).exp());
        assert!((probs[1] - oracle).abs() < 1e-15);
        assert!(probs[1] > 0.999);
    }

    #[test]
    fn single_class_is_certain() {
        let p = PrototypeMatrix::new(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(p.predict(&[0.5, 0.5, 0.5, 0.5], 100.0).unwrap(), vec![1.0]);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = PrototypeMatrix::new(2, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert!(matches!(p.predict(&[1.0, 0.0], 1.0), Err(Error::Mismatch(_))));
        assert!(PrototypeMatrix::new(2, 3, vec![0.0; 6]).is_err());
    }

    #[test]
    fn rows_are_unit_norm() {
        let p = PrototypeMatrix::new(2, 2, vec![3.0, 4.0, -1.0, 0.0]).unwrap();
        for r in 0..2 {
            assert!((norm(p.row(r)) - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn probabilities_sum_to_one(seed in proptest::collection::vec(-1.0f64..1.0, 5 * 6), x in proptest::collection::vec(-1.0f64..1.0, 6)) {
            prop_assume!(norm(&x) > 1e-3);
            let Ok(p) = PrototypeMatrix::new(5, 6, seed) else { return Ok(()); };
            let probs = predict(&x, &p, 100.0).unwrap();
            prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn argmax_ignores_input_scale(w in proptest::collection::vec(-1.0f64..1.0, 4 * 5), x in proptest::collection::vec(-1.0f64..1.0, 5), k in 0.01f64..100.0) {
            prop_assume!(norm(&x) > 1e-3);
            let Ok(p) = PrototypeMatrix::new(4, 5, w) else { return Ok(()); };
            let scaled: Vec<f64> = x.iter().map(|v| v * k).collect();
            let a = predict(&x, &p, 100.0).unwrap();
            let b = predict(&scaled, &p, 100.0).unwrap();
            prop_assert_eq!(crate::altbins::argmax(&a), crate::altbins::argmax(&b));
        }
    }
}
