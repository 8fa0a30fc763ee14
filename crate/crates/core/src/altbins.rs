//! Altitude discretization into fixed or exponentially growing intervals.
//!
//! Fixed bins use 1-based class numbers and variable bins 0-based ones, the
//! native conventions of each scheme. [`AltitudeEstimate::bin_index`] is always
//! 0-based.

use serde::{Deserialize, Serialize};

use crate::codec::{PutLe, Reader};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinKind {
    Fixed,
    Variable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BinParams {
    Fixed { h_min: f64, h_max: f64, delta_h: f64 },
    Variable { h0: f64, delta0: f64, growth_r: f64, h_max: f64 },
}

/// A partition of `[lower, h_max)` into contiguous altitude intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct AltitudeBinning {
    params: BinParams,
    /// `n_bins + 1` ascending edges; the last equals `h_max`.
    bounds: Vec<f64>,
    centers: Vec<f64>,
}

const MAX_BINS: usize = 100_000;

impl AltitudeBinning {
    pub fn fixed(h_min: f64, h_max: f64, delta_h: f64) -> Result<Self> {
        if !(h_min.is_finite() && h_max.is_finite() && h_max > h_min) {
            return Err(Error::Config(format!("invalid altitude range [{h_min}, {h_max})")));
        }
        if !(delta_h > 0.0 && delta_h.is_finite()) {
            return Err(Error::Config(format!("bin width must be > 0, got {delta_h}")));
        }
        let ratio = (h_max - h_min) / delta_h;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio.max(1.0) || n < 1.0 || n > MAX_BINS as f64 {
            return Err(Error::Config(format!(
                "(h_max - h_min) / delta_h = {ratio} must be a positive integer"
            )));
        }
        let n = n as usize;
        let bounds: Vec<f64> = (0..=n)
            .map(|i| if i == n { h_max } else { h_min + i as f64 * delta_h })
            .collect();
        let centers = (1..=n).map(|i| h_min + (i as f64 - 0.5) * delta_h).collect();
        Ok(Self {
            params: BinParams::Fixed { h_min, h_max, delta_h },
            bounds,
            centers,
        })
    }

    /// Intervals `[H_k, H_{k+1})` with `H_k = h0 + Δ0·(r^k − 1)/(r − 1)`; the
    /// last interval is clipped at `h_max` and its center uses the clipped edge.
    pub fn variable(h0: f64, delta0: f64, growth_r: f64, h_max: f64) -> Result<Self> {
        if !(h0.is_finite() && h_max.is_finite() && h_max > h0) {
            return Err(Error::Config(format!("invalid altitude range [{h0}, {h_max})")));
        }
        if !(delta0 > 0.0 && delta0.is_finite()) {
            return Err(Error::Config(format!("base interval must be > 0, got {delta0}")));
        }
        if !(growth_r > 0.0 && growth_r.is_finite()) {
            return Err(Error::Config(format!("growth rate must be > 0, got {growth_r}")));
        }
        let mut bounds = vec![h0];
        let mut k = 0usize;
        loop {
            let next = variable_edge(h0, delta0, growth_r, k + 1);
            if !(next > *bounds.last().unwrap()) {
                return Err(Error::Config(format!(
                    "intervals with r = {growth_r} never reach h_max = {h_max}"
                )));
            }
            if next >= h_max {
                bounds.push(h_max);
                break;
            }
            bounds.push(next);
            k += 1;
            if k >= MAX_BINS {
                return Err(Error::Config(format!("more than {MAX_BINS} variable bins")));
            }
        }
        let centers = bounds.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Ok(Self {
            params: BinParams::Variable {
                h0,
                delta0,
                growth_r,
                h_max,
            },
            bounds,
            centers,
        })
    }

    pub fn from_params(params: BinParams) -> Result<Self> {
        match params {
            BinParams::Fixed { h_min, h_max, delta_h } => Self::fixed(h_min, h_max, delta_h),
            BinParams::Variable {
                h0,
                delta0,
                growth_r,
                h_max,
            } => Self::variable(h0, delta0, growth_r, h_max),
        }
    }

    pub fn params(&self) -> BinParams {
        self.params
    }

    pub fn kind(&self) -> BinKind {
        match self.params {
            BinParams::Fixed { .. } => BinKind::Fixed,
            BinParams::Variable { .. } => BinKind::Variable,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.centers.len()
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn lower(&self) -> f64 {
        self.bounds[0]
    }

    pub fn upper(&self) -> f64 {
        *self.bounds.last().unwrap()
    }

    /// Offset between native class numbers and 0-based bins.
    fn base(&self) -> usize {
        match self.kind() {
            BinKind::Fixed => 1,
            BinKind::Variable => 0,
        }
    }

    /// 0-based bin containing `h`.
    pub fn bin_of(&self, h: f64) -> Result<usize> {
        if h.is_nan() {
            return Err(Error::Domain("altitude is NaN".into()));
        }
        if h < self.lower() {
            return Err(Error::Domain(format!("altitude {h} m is below the lower bound {} m", self.lower())));
        }
        if h >= self.upper() {
            return Err(Error::Domain(format!(
                "altitude {h} m is at or above the upper bound {} m",
                self.upper()
            )));
        }
        let guess = match self.params {
            BinParams::Fixed { h_min, delta_h, .. } => ((h - h_min) / delta_h).floor(),
            BinParams::Variable {
                h0, delta0, growth_r, ..
            } => {
                if (growth_r - 1.0).abs() < 1e-12 {
                    ((h - h0) / delta0).floor()
                } else {
                    ((1.0 + (h - h0) * (growth_r - 1.0) / delta0).ln() / growth_r.ln()).floor()
                }
            }
        };
        // The closed form can land one bin off next to an edge in floating
        // point; settle against the stored edges.
        let mut k = (guess.max(0.0) as usize).min(self.n_bins() - 1);
        while k > 0 && h < self.bounds[k] {
            k -= 1;
        }
        while k + 1 < self.n_bins() && h >= self.bounds[k + 1] {
            k += 1;
        }
        Ok(k)
    }

    /// Native class number of `h`: 1-based for fixed bins, 0-based for variable.
    pub fn class_of(&self, h: f64) -> Result<usize> {
        Ok(self.bin_of(h)? + self.base())
    }

    /// Center altitude of a native class number.
    pub fn class2alt(&self, class: usize) -> Result<f64> {
        let base = self.base();
        if class < base || class - base >= self.n_bins() {
            return Err(Error::Domain(format!(
                "class {class} outside [{base}, {}]",
                self.n_bins() - 1 + base
            )));
        }
        Ok(self.centers[class - base])
    }

    /// Center altitude of a 0-based bin.
    pub fn center(&self, bin: usize) -> Result<f64> {
        self.centers
            .get(bin)
            .copied()
            .ok_or_else(|| Error::Domain(format!("bin {bin} outside [0, {})", self.n_bins())))
    }

    /// Argmax over `probabilities` (lowest index on ties), mapped to its center.
    pub fn alt_classify(&self, probabilities: &[f64]) -> Result<AltitudeEstimate> {
        if probabilities.len() != self.n_bins() {
            return Err(Error::shape(
                format!("{} probabilities", self.n_bins()),
                probabilities.len(),
            ));
        }
        let bin = argmax(probabilities);
        Ok(AltitudeEstimate {
            bin_index: bin,
            kind: self.kind(),
            center_altitude_m: self.centers[bin],
            probabilities: probabilities.to_vec(),
        })
    }

    /// Kind tag, parameters as f64, bin count as u32.
    pub(crate) fn encode(&self, out: &mut Vec<u8>) {
        match self.params {
            BinParams::Fixed { h_min, h_max, delta_h } => {
                out.put_u8(0);
                [h_min, h_max, delta_h].iter().for_each(|&v| out.put_f64(v));
            }
            BinParams::Variable {
                h0,
                delta0,
                growth_r,
                h_max,
            } => {
                out.put_u8(1);
                [h0, delta0, growth_r, h_max].iter().for_each(|&v| out.put_f64(v));
            }
        }
        out.put_u32(self.n_bins() as u32);
    }

    /// Reads the body after the kind tag.
    pub(crate) fn decode(tag: u8, r: &mut Reader) -> Result<Self> {
        let params = match tag {
            0 => BinParams::Fixed {
                h_min: r.f64()?,
                h_max: r.f64()?,
                delta_h: r.f64()?,
            },
            1 => BinParams::Variable {
                h0: r.f64()?,
                delta0: r.f64()?,
                growth_r: r.f64()?,
                h_max: r.f64()?,
            },
            t => return Err(r.error(format!("unknown binning kind {t}"))),
        };
        let n = r.u32()? as usize;
        let binning = Self::from_params(params).map_err(|e| r.error(e.to_string()))?;
        if binning.n_bins() != n {
            return Err(r.error(format!(
                "binning declares {n} bins but its parameters give {}",
                binning.n_bins()
            )));
        }
        Ok(binning)
    }
}

fn variable_edge(h0: f64, delta0: f64, r: f64, k: usize) -> f64 {
    if (r - 1.0).abs() < 1e-12 {
        h0 + delta0 * k as f64
    } else {
        h0 + delta0 * (r.powi(k as i32) - 1.0) / (r - 1.0)
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltitudeEstimate {
    /// 0-based regardless of kind.
    pub bin_index: usize,
    pub kind: BinKind,
    pub center_altitude_m: f64,
    pub probabilities: Vec<f64>,
}

/// Corrects an altitude estimated under nominal intrinsics for a camera with a
/// different focal length (equal footprints: `h_raw / f_nominal = h / f_actual`).
pub fn scale_for_intrinsics(h_raw: f64, f_actual: f64, f_nominal: f64) -> Result<f64> {
    if !(f_actual > 0.0 && f_nominal > 0.0) {
        return Err(Error::Domain(format!(
            "focal lengths must be > 0, got actual {f_actual} and nominal {f_nominal}"
        )));
    }
    Ok(h_raw * f_actual / f_nominal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::Path;

    fn fixed() -> AltitudeBinning {
        AltitudeBinning::fixed(100.0, 700.0, 50.0).unwrap()
    }

    fn variable() -> AltitudeBinning {
        AltitudeBinning::variable(100.0, 20.0, 1.1, 700.0).unwrap()
    }

    /// Linear scan over edges built independently of the binning.
    fn scan(edges: &[f64], h: f64) -> usize {
        (0..edges.len() - 1).find(|&i| edges[i] <= h && h < edges[i + 1]).unwrap()
    }

    fn oracle_variable_edges(h_max: f64) -> Vec<f64> {
        let mut edges = vec![100.0];
        let mut width = 20.0;
        loop {
            let next = edges.last().unwrap() + width;
            width *= 1.1;
            if next >= h_max {
                edges.push(h_max);
                return edges;
            }
            edges.push(next);
        }
    }

    #[test]
    fn fixed_examples() {
        let b = fixed();
        assert_eq!(b.n_bins(), 12);
        assert_eq!(b.class_of(100.0).unwrap(), 1);
        assert_eq!(b.class_of(150.0).unwrap(), 2);
        // ⌊(349 − 100)/50⌋ + 1 = ⌊4.98⌋ + 1
        assert_eq!(b.class_of(349.0).unwrap(), 5);
        assert_eq!(b.class2alt(1).unwrap(), 125.0);
        assert_eq!(b.class2alt(12).unwrap(), 675.0);
        let expect: Vec<f64> = (0..12).map(|i| 125.0 + 50.0 * i as f64).collect();
        assert_eq!(b.centers(), &expect[..]);
    }

    #[test]
    fn variable_examples() {
        let b = variable();
        assert!((b.bounds()[1] - 120.0).abs() < 1e-9);
        assert!((b.bounds()[2] - 142.0).abs() < 1e-9);
        assert_eq!(b.class_of(130.0).unwrap(), 1);
        assert!((b.class2alt(0).unwrap() - 110.0).abs() < 1e-12);
        assert_eq!(b.class_of(100.0).unwrap(), 0);
    }

    #[test]
    fn out_of_range_names_the_bound() {
        let b = fixed();
        let low = b.class_of(99.9).unwrap_err().to_string();
        assert!(low.contains("below") && low.contains("100"), "{low}");
        let high = b.class_of(700.0).unwrap_err().to_string();
        assert!(high.contains("above") && high.contains("700"), "{high}");
        assert!(b.class2alt(0).is_err());
        assert!(b.class2alt(13).is_err());
        assert!(variable().class2alt(variable().n_bins()).is_err());
    }

    #[test]
    fn non_integral_fixed_range_is_rejected() {
        assert!(AltitudeBinning::fixed(100.0, 710.0, 50.0).is_err());
        assert!(AltitudeBinning::fixed(100.0, 700.0, 0.0).is_err());
    }

    #[test]
    fn variable_last_interval_is_clipped() {
        let b = variable();
        let edges = oracle_variable_edges(700.0);
        assert_eq!(b.n_bins(), edges.len() - 1);
        for (a, e) in b.bounds().iter().zip(&edges) {
            assert!((a - e).abs() < 1e-9 * e, "{a} vs {e}");
        }
        assert_eq!(b.upper(), 700.0);
        let n = b.n_bins();
        assert_eq!(b.centers()[n - 1], 0.5 * (b.bounds()[n - 1] + 700.0));
        // The natural next edge would reach h_max.
        let natural = b.bounds()[n - 1] + 20.0 * 1.1f64.powi(n as i32 - 1);
        assert!(natural >= 700.0);
    }

    #[test]
    fn variable_geometry() {
        let b = variable();
        let e = b.bounds();
        for k in 0..b.n_bins() - 1 {
            let want = 20.0 * 1.1f64.powi(k as i32);
            assert!(((e[k + 1] - e[k]) - want).abs() <= 1e-9 * want, "k={k}");
        }
    }

    #[test]
    fn partition_matches_linear_scan() {
        let fixed_edges: Vec<f64> = (0..=12).map(|i| 100.0 + 50.0 * i as f64).collect();
        let var_edges = oracle_variable_edges(700.0);
        let f = fixed();
        let v = variable();
        let mut h = 100.0;
        while h < 700.0 {
            assert_eq!(f.bin_of(h).unwrap(), scan(&fixed_edges, h), "fixed h={h}");
            assert_eq!(v.bin_of(h).unwrap(), scan(&var_edges, h), "variable h={h}");
            h += 0.5;
        }
    }

    #[test]
    fn exact_variable_edges_land_in_the_upper_bin() {
        let v = variable();
        for k in 1..v.n_bins() {
            assert_eq!(v.bin_of(v.bounds()[k]).unwrap(), k);
            let below = f64::from_bits(v.bounds()[k].to_bits() - 1);
            assert_eq!(v.bin_of(below).unwrap(), k - 1);
        }
    }

    #[test]
    fn round_trip_through_centers() {
        for b in [fixed(), variable()] {
            let base = if b.kind() == BinKind::Fixed { 1 } else { 0 };
            for class in base..b.n_bins() + base {
                assert_eq!(b.class_of(b.class2alt(class).unwrap()).unwrap(), class);
            }
        }
    }

    #[test]
    fn alt_classify_examples() {
        let b = fixed();
        let mut p = vec![0.0; 12];
        p[2] = 1.0;
        assert_eq!(b.alt_classify(&p).unwrap().center_altitude_m, 225.0);
        let est = b.alt_classify(&[1.0 / 12.0; 12]).unwrap();
        assert_eq!((est.bin_index, est.center_altitude_m), (0, 125.0));
        let three = AltitudeBinning::fixed(100.0, 250.0, 50.0).unwrap();
        assert_eq!(three.alt_classify(&[0.1, 0.7, 0.2]).unwrap().bin_index, 1);
        assert!(b.alt_classify(&[0.5, 0.5]).is_err());
    }

    #[test]
    fn intrinsics_scaling() {
        assert_eq!(scale_for_intrinsics(300.0, 900.0, 900.0).unwrap(), 300.0);
        // Equal footprints: res/f_nom · h_raw = res/f_act · h  ⇒  h = h_raw · f_act / f_nom.
        let oracle = |h_raw: f64, fa: f64, fnom: f64| {
            let footprint = 2048.0 / fnom * h_raw;
            footprint * fa / 2048.0
        };
        assert_eq!(scale_for_intrinsics(300.0, 1200.0, 600.0).unwrap(), oracle(300.0, 1200.0, 600.0));
        assert_eq!(scale_for_intrinsics(300.0, 1200.0, 600.0).unwrap(), 600.0);
        assert_eq!(scale_for_intrinsics(300.0, 600.0, 1200.0).unwrap(), 150.0);
        assert!(scale_for_intrinsics(300.0, 0.0, 1200.0).is_err());
        assert!(scale_for_intrinsics(300.0, 600.0, -1.0).is_err());
    }

    #[test]
    fn encode_decode() {
        for b in [fixed(), variable()] {
            let mut buf = Vec::new();
            b.encode(&mut buf);
            let mut r = Reader::new(&buf, Path::new("m"));
            let tag = r.u8().unwrap();
            assert_eq!(AltitudeBinning::decode(tag, &mut r).unwrap(), b);
            assert_eq!(r.remaining(), 0);
        }
        let mut buf = Vec::new();
        fixed().encode(&mut buf);
        let n = buf.len();
        buf[n - 4] = 11;
        let mut r = Reader::new(&buf, Path::new("m"));
        let tag = r.u8().unwrap();
        assert!(AltitudeBinning::decode(tag, &mut r).is_err());
    }

    proptest! {
        #[test]
        fn class_of_is_monotone(a in 100.0f64..700.0, b in 100.0f64..700.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for bin in [fixed(), variable()] {
                prop_assert!(bin.class_of(lo).unwrap() <= bin.class_of(hi).unwrap());
            }
        }

        #[test]
        fn bins_contain_their_altitude(
            h0 in 0.0f64..500.0, d0 in 1.0f64..60.0, r in 0.9f64..1.5, span in 10.0f64..2000.0, t in 0.0f64..1.0,
        ) {
            let Ok(b) = AltitudeBinning::variable(h0, d0, r, h0 + span) else {
                // Shrinking intervals may never cover the span.
                prop_assume!(false);
                unreachable!()
            };
            let h = h0 + t * span * 0.999_999;
            let k = b.bin_of(h).unwrap();
            prop_assert!(b.bounds()[k] <= h && h < b.bounds()[k + 1]);
        }
    }
}
