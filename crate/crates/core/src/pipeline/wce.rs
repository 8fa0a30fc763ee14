use crate::error::{Error, Result};
use crate::synthmap::Utm;

/// Inverse-distance weights `1/(d_i + ε)`, normalized to sum to 1.
pub fn wce_weights(distances: &[f64], epsilon: f64) -> Vec<f64> {
    let raw: Vec<f64> = distances.iter().map(|d| 1.0 / (d + epsilon)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Feature-distance weighted average of the retained coordinates.
///
/// `distances[i]` is `‖d_q − d_i‖` for candidate `i`; only indices in
/// `retained` contribute.
pub fn wce(distances: &[f64], coords: &[Utm], retained: &[usize], epsilon: f64) -> Result<Utm> {
    if retained.is_empty() {
        return Err(Error::Refinement("no retained candidates to average".into()));
    }
    if distances.len() != coords.len() {
        return Err(Error::shape(format!("{} distances", coords.len()), distances.len()));
    }
    if let Some(&bad) = retained.iter().find(|&&i| i >= coords.len()) {
        return Err(Error::Refinement(format!("retained index {bad} outside {} candidates", coords.len())));
    }
    let d: Vec<f64> = retained.iter().map(|&i| distances[i]).collect();
    let w = wce_weights(&d, epsilon);
    let (mut e, mut n) = (0.0, 0.0);
    for (wi, &i) in w.iter().zip(retained) {
        e += wi * coords[i].easting;
        n += wi * coords[i].northing;
    }
    Ok(Utm::new(e, n))
}

/// [`wce`] with distances computed from the candidate descriptors.
pub fn wce_from_features(query: &[f64], features: &[&[f64]], coords: &[Utm], retained: &[usize], epsilon: f64) -> Result<Utm> {
    let distances: Vec<f64> = features
        .iter()
        .map(|f| query.iter().zip(*f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect();
    wce(&distances, coords, retained, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_candidate_is_exact() {
        let c = [Utm::new(432_123.25, 4_401_999.5)];
        assert_eq!(wce(&[0.37], &c, &[0], 1e-8).unwrap(), c[0]);
    }

    #[test]
    fn equidistant_gives_midpoint() {
        let c = [Utm::new(0.0, 0.0), Utm::new(100.0, 50.0)];
        let u = wce(&[0.4, 0.4], &c, &[0, 1], 1e-8).unwrap();
        assert!((u.easting - 50.0).abs() < 1e-12 && (u.northing - 25.0).abs() < 1e-12);
    }

    #[test]
    fn one_to_three_distances() {
        // w ∝ (1, 1/3) → (0.75, 0.25)
        let w = wce_weights(&[1.0, 3.0], 0.0);
        assert!((w[0] - 0.75).abs() < 1e-15 && (w[1] - 0.25).abs() < 1e-15);
        let c = [Utm::new(0.0, 0.0), Utm::new(400.0, -80.0)];
        let u = wce(&[1.0, 3.0], &c, &[0, 1], 1e-12).unwrap();
        assert!((u.easting - 100.0).abs() < 1e-6 && (u.northing + 20.0).abs() < 1e-6);
    }

    #[test]
    fn features_path_and_errors() {
        let q = [1.0, 0.0];
        let f1 = [1.0, 0.0];
        let f2 = [0.0, 1.0];
        let c = [Utm::new(10.0, 10.0), Utm::new(90.0, 90.0)];
        let u = wce_from_features(&q, &[&f1, &f2], &c, &[0, 1], 1e-8).unwrap();
        // Exact match dominates.
        assert!((u.easting - 10.0).abs() < 1e-5);
        assert!(matches!(wce(&[1.0], &c[..1], &[], 1e-8), Err(Error::Refinement(_))));
        assert!(wce(&[1.0, 2.0], &c, &[5], 1e-8).is_err());
    }

    proptest! {
        #[test]
        fn convex_combination(
            d in proptest::collection::vec(0.0f64..2.0, 1..10),
            e in proptest::collection::vec(-1e4f64..1e4, 10),
            n in proptest::collection::vec(-1e4f64..1e4, 10),
        ) {
            let k = d.len();
            let coords: Vec<Utm> = (0..k).map(|i| Utm::new(e[i], n[i])).collect();
            let retained: Vec<usize> = (0..k).collect();
            let w = wce_weights(&d, 1e-8);
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let u = wce(&d, &coords, &retained, 1e-8).unwrap();
            let (lo_e, hi_e) = coords.iter().fold((f64::MAX, f64::MIN), |(a, b), c| (a.min(c.easting), b.max(c.easting)));
            let (lo_n, hi_n) = coords.iter().fold((f64::MAX, f64::MIN), |(a, b), c| (a.min(c.northing), b.max(c.northing)));
            prop_assert!(u.easting >= lo_e - 1e-7 && u.easting <= hi_e + 1e-7);
            prop_assert!(u.northing >= lo_n - 1e-7 && u.northing <= hi_n + 1e-7);
        }
    }
}
