use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geoindex::RetrievalResult;
use crate::synthmap::Utm;

/// Errors above this are clipped in the capped localization mean.
pub const D_AVG_CAP_M: f64 = 1000.0;

fn pct(hits: usize, n: usize) -> f64 {
    100.0 * hits as f64 / n as f64
}

/// Mean absolute altitude error and, per threshold `D`, the share of
/// estimates with `|error| < D`.
pub fn altitude_metrics(pairs: &[(f64, f64)], thresholds: &[u32]) -> Result<(f64, BTreeMap<u32, f64>)> {
    if pairs.is_empty() {
        return Err(Error::Domain("altitude metrics need at least one estimate".into()));
    }
    let errors: Vec<f64> = pairs.iter().map(|(h_hat, h)| (h_hat - h).abs()).collect();
    let e_avg = errors.iter().sum::<f64>() / errors.len() as f64;
    let p = thresholds
        .iter()
        .map(|&d| (d, pct(errors.iter().filter(|&&e| e < d as f64).count(), errors.len())))
        .collect();
    Ok((e_avg, p))
}

/// A query counts at rank `N` when any of its first `N` retrieved
/// coordinates lies within `radius` of the truth.
pub fn recall_at_n(
    results: &[RetrievalResult],
    truths: &[Utm],
    n_values: &[usize],
    radius: f64,
) -> Result<BTreeMap<usize, f64>> {
    if results.len() != truths.len() {
        return Err(Error::shape(format!("{} truths", results.len()), format!("{} truths", truths.len())));
    }
    if results.is_empty() {
        return Err(Error::Domain("recall needs at least one query".into()));
    }
    // Rank of the first hit per query, if any.
    let first_hit: Vec<Option<usize>> = results
        .iter()
        .zip(truths)
        .map(|(r, t)| r.coords.iter().position(|c| c.distance(t) <= radius))
        .collect();
    Ok(n_values
        .iter()
        .map(|&n| {
            let hits = first_hit.iter().filter(|h| matches!(h, Some(rank) if *rank < n)).count();
            (n, pct(hits, results.len()))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationMetrics {
    pub d_avg: f64,
    /// Mean error with every term clipped at [`D_AVG_CAP_M`].
    pub d_avg_capped: f64,
    pub s_loc: f64,
    pub n_success: usize,
    pub n_total: usize,
}

pub fn localization_metrics(fixes: &[Utm], truths: &[Utm], radius: f64) -> Result<LocalizationMetrics> {
    if fixes.len() != truths.len() {
        return Err(Error::shape(format!("{} truths", fixes.len()), format!("{} truths", truths.len())));
    }
    if fixes.is_empty() {
        return Err(Error::Domain("localization metrics need at least one fix".into()));
    }
    if !(radius > 0.0) {
        return Err(Error::Config(format!("success radius must be > 0, got {radius}")));
    }
    let errors: Vec<f64> = fixes.iter().zip(truths).map(|(f, t)| f.distance(t)).collect();
    let n = errors.len();
    let n_success = errors.iter().filter(|&&e| e < radius).count();
    Ok(LocalizationMetrics {
        d_avg: errors.iter().sum::<f64>() / n as f64,
        d_avg_capped: errors.iter().map(|e| e.min(D_AVG_CAP_M)).sum::<f64>() / n as f64,
        s_loc: pct(n_success, n),
        n_success,
        n_total: n,
    })
}
