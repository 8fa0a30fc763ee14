use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geoindex::CellId;
use crate::marginlearn::{PlaceHeadRef, PrototypeMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub cell: CellId,
    /// Position of the head in the model.
    pub head: usize,
    /// Class index within the head.
    pub class: usize,
    pub probability: f64,
}

/// Scores every (head, class) pair and returns the `n_class` most probable
/// cells; ties go to the lower (head, class) pair.
pub fn classify_cells(
    descriptor: &[f64],
    heads: &[(&PrototypeMatrix, &PlaceHeadRef)],
    scale: f64,
    n_class: usize,
) -> Result<Vec<CellScore>> {
    if heads.is_empty() {
        return Err(Error::Mismatch("no place heads loaded".into()));
    }
    let mut pooled = Vec::new();
    for (h, (protos, reference)) in heads.iter().enumerate() {
        let probs = protos.predict(descriptor, scale)?;
        pooled.extend(probs.into_iter().enumerate().map(|(c, p)| CellScore {
            cell: CellId::new(reference.cells[c].0, reference.cells[c].1),
            head: h,
            class: c,
            probability: p,
        }));
    }
    let order = |a: &CellScore, b: &CellScore| {
        b.probability
            .total_cmp(&a.probability)
            .then(a.head.cmp(&b.head))
            .then(a.class.cmp(&b.class))
    };
    let k = n_class.min(pooled.len());
    if k < pooled.len() {
        pooled.select_nth_unstable_by(k, order);
        pooled.truncate(k);
    }
    pooled.sort_unstable_by(order);
    Ok(pooled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn head(rows: usize, d: usize, rng: &mut ChaCha8Rng, first_cell: i64) -> (PrototypeMatrix, PlaceHeadRef) {
        let w = (0..rows * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        (
            PrototypeMatrix::new(rows, d, w).unwrap(),
            PlaceHeadRef {
                cell_size_m: 100.0,
                group_modulus: 2,
                group: (0, 0),
                cells: (0..rows as i64).map(|i| (first_cell + 2 * i, 0)).collect(),
            },
        )
    }

    #[test]
    fn single_cell() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (p, r) = head(1, 4, &mut rng, 7);
        let top = classify_cells(&[0.5, 0.5, 0.5, 0.5], &[(&p, &r)], 100.0, 3).unwrap();
        assert_eq!(top.len(), 1);
        assert_eq!(top[0].cell, CellId::new(7, 0));
        assert!(classify_cells(&[1.0], &[], 1.0, 1).is_err());
    }

    #[test]
    fn matches_pooled_full_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let heads: Vec<_> = (0..4).map(|g| head(10, 8, &mut rng, g * 100)).collect();
        let refs: Vec<(&PrototypeMatrix, &PlaceHeadRef)> = heads.iter().map(|(p, r)| (p, r)).collect();
        for _ in 0..50 {
            let mut x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= n);
            // s = 1 keeps probabilities distinct enough to exercise the ordering.
            let got = classify_cells(&x, &refs, 1.0, 3).unwrap();
            let mut all = Vec::new();
            for (h, (p, r)) in refs.iter().enumerate() {
                for (c, prob) in p.predict(&x, 1.0).unwrap().into_iter().enumerate() {
                    all.push((prob, h, c, r.cells[c]));
                }
            }
            all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let want: Vec<CellId> = all.iter().take(3).map(|a| CellId::new(a.3 .0, a.3 .1)).collect();
            assert_eq!(got.iter().map(|s| s.cell).collect::<Vec<_>>(), want);
        }
    }

    #[test]
    fn ties_prefer_lower_head_and_class() {
        // Two heads with identical single rows: equal probabilities (1.0 each).
        let p = PrototypeMatrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        let r0 = PlaceHeadRef { cell_size_m: 100.0, group_modulus: 2, group: (0, 0), cells: vec![(0, 0)] };
        let r1 = PlaceHeadRef { cell_size_m: 100.0, group_modulus: 2, group: (1, 0), cells: vec![(1, 0)] };
        let top = classify_cells(&[1.0, 0.0], &[(&p, &r1), (&p, &r0)], 1.0, 1).unwrap();
        assert_eq!((top[0].head, top[0].cell), (0, CellId::new(1, 0)));
    }
}
