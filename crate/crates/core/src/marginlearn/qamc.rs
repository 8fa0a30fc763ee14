use super::{check_unit, dot, MarginParams, PrototypeMatrix};
use crate::error::{Error, Result};

/// Keeps `acos` away from its infinite-slope endpoints.
const COS_CLAMP: f64 = 1.0 - 1e-7;

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

struct TargetTerm {
    /// Margin-adjusted target cosine, before scaling.
    value: f64,
    /// d value / d cos θ_y.
    slope: f64,
}

/// `cos(θ + g_angle) − g_add` with `ĥ = 2q − 1`, `g_angle = −m·ĥ`, `g_add = m·ĥ + m`.
fn target_term(cos_y: f64, q: f64, m: f64) -> TargetTerm {
    let h = 2.0 * q - 1.0;
    let g_angle = -m * h;
    let g_add = m * h + m;
    if m == 0.0 {
        return TargetTerm { value: cos_y, slope: 1.0 };
    }
    let clamped = cos_y.clamp(-COS_CLAMP, COS_CLAMP);
    let theta = clamped.acos();
    let shifted = theta + g_angle;
    let angle = shifted.clamp(0.0, std::f64::consts::PI);
    let slope = if clamped != cos_y || angle != shifted {
        0.0
    } else {
        angle.sin() / theta.sin()
    };
    TargetTerm {
        value: angle.cos() - g_add,
        slope,
    }
}

/// Scaled logits with the target adjusted by the quality-dependent margin.
pub fn qamc_logits(
    descriptor: &[f64],
    prototypes: &PrototypeMatrix,
    target: usize,
    quality: f64,
    params: &MarginParams,
) -> Result<Vec<f64>> {
    check_unit(descriptor)?;
    check_args(prototypes.rows(), target, quality)?;
    let mut cos = prototypes.cosines(descriptor)?;
    let t = target_term(cos[target], params.effective_quality(quality), params.effective_margin());
    cos[target] = t.value;
    Ok(cos.into_iter().map(|c| params.s * c).collect())
}

fn check_args(rows: usize, target: usize, quality: f64) -> Result<()> {
    if target >= rows {
        return Err(Error::Domain(format!("target class {target} outside [0, {rows})")));
    }
    if !(0.0..=1.0).contains(&quality) {
        return Err(Error::Domain(format!("quality must lie in [0, 1], got {quality}")));
    }
    Ok(())
}

/// Softmax cross-entropy `logsumexp(z) − z_target`.
pub fn qamc_loss(logits: &[f64], target: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[target]
}

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad_x: Vec<f64>,
    /// Row-major, same layout as the prototype weights.
    pub grad_w: Vec<f64>,
}

/// Loss and its gradient with respect to the descriptor and every prototype
/// entry. Inputs are used as given (no unit-norm check), so perturbed
/// weights or descriptors can be differentiated numerically.
pub fn loss_and_grad(
    descriptor: &[f64],
    weights: &[f64],
    rows: usize,
    target: usize,
    quality: f64,
    params: &MarginParams,
) -> Result<LossGrad> {
    let d = descriptor.len();
    if weights.len() != rows * d {
        return Err(Error::shape(format!("{rows}×{d} weights"), weights.len()));
    }
    check_args(rows, target, quality)?;
    let mut grad_w = vec![0.0; rows * d];
    let mut grad_x = vec![0.0; d];
    let loss = accumulate(descriptor, weights, rows, target, quality, params, &mut grad_w, Some(&mut grad_x));
    Ok(LossGrad { loss, grad_x, grad_w })
}

/// Adds this sample's weight gradient into `grad_w` (and descriptor
/// gradient into `grad_x` when given) and returns its loss.
#[allow(clippy::too_many_arguments)]
pub(crate) fn accumulate(
    x: &[f64],
    weights: &[f64],
    rows: usize,
    target: usize,
    quality: f64,
    params: &MarginParams,
    grad_w: &mut [f64],
    mut grad_x: Option<&mut [f64]>,
) -> f64 {
    let d = x.len();
    let row = |r: usize| &weights[r * d..(r + 1) * d];
    let cos: Vec<f64> = (0..rows).map(|r| dot(row(r), x)).collect();
    let t = target_term(cos[target], params.effective_quality(quality), params.effective_margin());
    let mut logits: Vec<f64> = cos.iter().map(|c| params.s * c).collect();
    logits[target] = params.s * t.value;
    let loss = qamc_loss(&logits, target);
    let probs = softmax(&logits);
    for r in 0..rows {
        // dL/dcos_r
        let g = if r == target {
            params.s * (probs[r] - 1.0) * t.slope
        } else {
            params.s * probs[r]
        };
        if g.abs() < 1e-14 {
            continue;
        }
        let gw = &mut grad_w[r * d..(r + 1) * d];
        gw.iter_mut().zip(x).for_each(|(a, xv)| *a += g * xv);
        if let Some(gx) = grad_x.as_deref_mut() {
            gx.iter_mut().zip(row(r)).for_each(|(a, wv)| *a += g * wv);
        }
    }
    loss
}
