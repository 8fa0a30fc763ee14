use crate::synthmap::Utm;

/// Sets this small or smaller are kept whole.
pub const MIN_FIT_POINTS: usize = 3;
const MAX_ITERS: usize = 20_000;
const STEP_TOL: f64 = 1e-13;
/// Decision values within this of zero count as on the boundary.
const DECISION_TOL: f64 = 1e-7;

/// A fitted one-class SVM on 2-D points with an RBF kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct OneClassSvm {
    points: Vec<[f64; 2]>,
    alpha: Vec<f64>,
    rho: f64,
    gamma: f64,
}

/// `γ = 1 / (2·σ²)` with σ² the coordinate variance pooled over both axes,
/// or 1 when every point coincides.
///
/// A width tied to the whole spread (rather than to typical pair distances)
/// makes a tight cluster look like one dense mode, so an isolated candidate
/// cannot soak up enough dual weight to sit on the boundary.
pub fn rbf_gamma(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    if points.is_empty() {
        return 1.0;
    }
    let (se, sn) = points.iter().fold((0.0, 0.0), |(e, nn), p| (e + p[0], nn + p[1]));
    let (me, mn) = (se / n, sn / n);
    let var = points.iter().map(|p| (p[0] - me).powi(2) + (p[1] - mn).powi(2)).sum::<f64>() / (2.0 * n);
    if var > 0.0 {
        1.0 / (2.0 * var)
    } else {
        1.0
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn kernel(gamma: f64, a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = dist(a, b);
    (-gamma * d * d).exp()
}

/// Euclidean projection onto `{0 ≤ a_i ≤ upper, Σ a_i = 1}`.
fn project_capped_simplex(y: &[f64], upper: f64) -> Vec<f64> {
    let total = |tau: f64| y.iter().map(|v| (v - tau).clamp(0.0, upper)).sum::<f64>();
    let mut lo = y.iter().cloned().fold(f64::INFINITY, f64::min) - upper;
    let mut hi = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let tau = 0.5 * (lo + hi);
    y.iter().map(|v| (v - tau).clamp(0.0, upper)).collect()
}

impl OneClassSvm {
    /// Solves the ν-dual `min ½ αᵀKα` over `0 ≤ α_i ≤ 1/(νn)`, `Σα = 1` by
    /// accelerated projected gradient.
    pub fn fit(points: &[[f64; 2]], nu: f64, gamma: f64) -> Self {
        let n = points.len();
        assert!(n > 0, "one-class fit needs at least one point");
        assert!(nu > 0.0 && nu <= 1.0, "nu must lie in (0, 1]");
        let upper = 1.0 / (nu * n as f64);
        let k: Vec<f64> = (0..n * n).map(|ij| kernel(gamma, points[ij / n], points[ij % n])).collect();
        let grad = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| k[i * n + j] * a[j]).sum()).collect() };
        // λ_max(K) ≤ max row sum.
        let lipschitz = (0..n).map(|i| k[i * n..(i + 1) * n].iter().sum::<f64>()).fold(0.0, f64::max);
        let step = 1.0 / lipschitz.max(1e-12);

        let objective = |a: &[f64], g: &[f64]| 0.5 * a.iter().zip(g).map(|(x, y)| x * y).sum::<f64>();
        let pg_step = |a: &[f64], g: &[f64]| {
            project_capped_simplex(&a.iter().zip(g).map(|(a, g)| a - step * g).collect::<Vec<_>>(), upper)
        };
        let mut alpha = project_capped_simplex(&vec![1.0 / n as f64; n], upper);
        let mut y = alpha.clone();
        let mut t = 1.0f64;
        let mut prev_obj = f64::INFINITY;
        for _ in 0..MAX_ITERS {
            let next = pg_step(&y, &grad(&y));
            let g_next = grad(&next);
            let obj = objective(&next, &g_next);
            // Stop on the fixed-point residual at the iterate itself, not at
            // the extrapolated point.
            let residual = pg_step(&next, &g_next)
                .iter()
                .zip(&next)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if obj > prev_obj {
                // Momentum overshoot: restart from the last iterate.
                t = 1.0;
                y = alpha.clone();
                prev_obj = f64::INFINITY;
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = next.iter().zip(&alpha).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
            alpha = next;
            t = t_next;
            prev_obj = obj;
            if residual < STEP_TOL {
                break;
            }
        }

        let g = grad(&alpha);
        let slack = 1e-9 * upper;
        let free: Vec<f64> = (0..n).filter(|&i| alpha[i] > slack && alpha[i] < upper - slack).map(|i| g[i]).collect();
        let rho = if !free.is_empty() {
            free.iter().sum::<f64>() / free.len() as f64
        } else {
            // No free vector: any ρ between the bounded and zero groups satisfies KKT.
            let at_upper = (0..n).filter(|&i| alpha[i] >= upper - slack).map(|i| g[i]).fold(f64::NEG_INFINITY, f64::max);
            let at_zero = (0..n).filter(|&i| alpha[i] <= slack).map(|i| g[i]).fold(f64::INFINITY, f64::min);
            match (at_upper.is_finite(), at_zero.is_finite()) {
                (true, true) => 0.5 * (at_upper + at_zero),
                (true, false) => at_upper,
                (false, true) => at_zero,
                (false, false) => 0.0,
            }
        };
        Self {
            points: points.to_vec(),
            alpha,
            rho,
            gamma,
        }
    }

    /// `f(u) = Σ α_j K(u_j, u) − ρ`.
    pub fn decision(&self, u: [f64; 2]) -> f64 {
        self.points.iter().zip(&self.alpha).map(|(p, a)| a * kernel(self.gamma, *p, u)).sum::<f64>() - self.rho
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

/// Indices of `coords` the one-class boundary keeps (`f ≥ 0`). Sets of at
/// most three points are kept whole.
pub fn oc_filter(coords: &[Utm], nu: f64) -> Vec<usize> {
    let n = coords.len();
    if n <= MIN_FIT_POINTS {
        return (0..n).collect();
    }
    // Centering keeps UTM magnitudes out of the kernel arithmetic.
    let (me, mn) = coords.iter().fold((0.0, 0.0), |(e, nn), c| (e + c.easting, nn + c.northing));
    let (me, mn) = (me / n as f64, mn / n as f64);
    let points: Vec<[f64; 2]> = coords.iter().map(|c| [c.easting - me, c.northing - mn]).collect();
    let svm = OneClassSvm::fit(&points, nu, rbf_gamma(&points));
    (0..n).filter(|&i| svm.decision(points[i]) >= -DECISION_TOL).collect()
}
