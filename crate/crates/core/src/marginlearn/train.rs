use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::qamc::accumulate;
use super::{check_unit, normalize, MarginParams, PrototypeMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Unit-norm descriptor.
    pub descriptor: Vec<f64>,
    pub label: usize,
    /// Composite quality in `[0, 1]`.
    pub quality: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub batch_size: usize,
    pub lr: f64,
    /// Epochs without improvement before the rate is halved.
    pub patience: usize,
    pub lr_floor: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            batch_size: 64,
            lr: 1e-2,
            patience: 10,
            lr_floor: 1e-6,
            max_epochs: 500,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config("batch size, patience and max epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr_floor > 0.0) {
            return Err(Error::Config(format!(
                "learning rates must be > 0, got lr {} and floor {}",
                self.lr, self.lr_floor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub final_lr: f64,
    /// Mean loss per epoch.
    pub epoch_losses: Vec<f64>,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Relative improvement an epoch needs to reset the plateau counter.
const PLATEAU_THRESHOLD: f64 = 1e-4;

/// Learns `n_classes` unit-norm prototypes from frozen descriptors.
///
/// Rows start at the normalized class means. Each mini-batch takes one Adam
/// step on the mean loss, then rows are re-normalized. Shuffles come from a
/// per-epoch stream of the schedule seed, and gradients are summed in sample
/// order, so a run is a pure function of its inputs.
pub fn train_prototypes(
    samples: &[Sample],
    n_classes: usize,
    params: &MarginParams,
    schedule: &TrainSchedule,
) -> Result<(PrototypeMatrix, TrainReport)> {
    params.validate()?;
    schedule.validate()?;
    let d = samples
        .first()
        .map(|s| s.descriptor.len())
        .ok_or_else(|| Error::Training("no training samples".into()))?;
    if n_classes == 0 || d == 0 {
        return Err(Error::Training("need at least one class and one dimension".into()));
    }
    let mut means = vec![0.0; n_classes * d];
    let mut counts = vec![0usize; n_classes];
    for (i, s) in samples.iter().enumerate() {
        if s.descriptor.len() != d {
            return Err(Error::shape(format!("{d}-dimensional descriptor"), format!("sample {i} with {}", s.descriptor.len())));
        }
        if s.label >= n_classes {
            return Err(Error::Training(format!("sample {i} has label {} >= {n_classes}", s.label)));
        }
        if !(0.0..=1.0).contains(&s.quality) {
            return Err(Error::Training(format!("sample {i} has quality {} outside [0, 1]", s.quality)));
        }
        check_unit(&s.descriptor)?;
        counts[s.label] += 1;
        means[s.label * d..(s.label + 1) * d]
            .iter_mut()
            .zip(&s.descriptor)
            .for_each(|(m, v)| *m += v);
    }
    let missing: Vec<usize> = (0..n_classes).filter(|&c| counts[c] == 0).collect();
    if !missing.is_empty() {
        return Err(Error::Training(format!("no samples for labels {missing:?}")));
    }
    for c in 0..n_classes {
        let row = &mut means[c * d..(c + 1) * d];
        if !normalize(row) {
            // Opposing samples cancelled out; any unit vector is a valid start.
            row.iter_mut().for_each(|v| *v = 0.0);
            row[c % d] = 1.0;
        }
    }
    let mut w = PrototypeMatrix::from_normalized(n_classes, d, means);

    let n_w = n_classes * d;
    let mut m1 = vec![0.0; n_w];
    let mut m2 = vec![0.0; n_w];
    let mut grad = vec![0.0; n_w];
    let mut step = 0i32;
    let mut lr = schedule.lr;
    let mut best = f64::INFINITY;
    let mut bad_epochs = 0;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut losses = Vec::new();

    while losses.len() < schedule.max_epochs && lr >= schedule.lr_floor {
        let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed);
        rng.set_stream(losses.len() as u64);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(schedule.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let s = &samples[i];
                epoch_loss += accumulate(&s.descriptor, w.weights(), n_classes, s.label, s.quality, params, &mut grad, None);
            }
            let scale = 1.0 / batch.len() as f64;
            step += 1;
            let bc1 = 1.0 - BETA1.powi(step);
            let bc2 = 1.0 - BETA2.powi(step);
            for ((wv, g), (a, b)) in w.weights_mut().iter_mut().zip(&grad).zip(m1.iter_mut().zip(m2.iter_mut())) {
                let g = g * scale;
                *a = BETA1 * *a + (1.0 - BETA1) * g;
                *b = BETA2 * *b + (1.0 - BETA2) * g * g;
                *wv -= lr * (*a / bc1) / ((*b / bc2).sqrt() + ADAM_EPS);
            }
            w.renormalize();
        }
        let mean = epoch_loss / samples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Training(format!("loss diverged at epoch {}", losses.len())));
        }
        losses.push(mean);
        if mean < best * (1.0 - PLATEAU_THRESHOLD) || best.is_infinite() {
            best = mean;
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs > schedule.patience {
                lr *= 0.5;
                bad_epochs = 0;
            }
        }
    }
    Ok((
        w,
        TrainReport {
            epochs: losses.len(),
            final_lr: lr,
            epoch_losses: losses,
        },
    ))
}
