//! Pointwise distortion analytics for differentiable maps: operator norm
//! and Jacobian, outer dilatation with its exact branch semantics, the
//! gauge-growth (Calderón-type) integral test, and multiplicity
//! estimation from samples.

use crate::error::{QmodError, Result};
use crate::linalg::{dist, norm, SquareMatrix};
use crate::quad::integrate_adaptive;
use std::sync::Arc;

/// A vector-valued map of chart points.
pub type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A closed-form derivative of a [`MapFn`].
pub type DerivativeFn = Arc<dyn Fn(&[f64]) -> SquareMatrix + Send + Sync>;

/// Largest singular value and determinant of a derivative matrix.
pub fn operator_norm_and_jacobian(j: &SquareMatrix) -> (f64, f64) {
    (j.operator_norm(), j.det())
}

/// Outer dilatation `K_O` of a derivative matrix:
/// `‖J‖ⁿ/|det J|` when the determinant is nonzero, `1` for the zero
/// matrix, `+∞` for singular nonzero matrices.
pub fn outer_dilatation(j: &SquareMatrix, n: usize) -> f64 {
    let (nrm, det) = operator_norm_and_jacobian(j);
    if det != 0.0 {
        nrm.powi(n as i32) / det.abs()
    } else if j.is_zero() {
        1.0
    } else {
        f64::INFINITY
    }
}

/// A map with an optional closed-form derivative.
#[derive(Clone)]
pub struct MapSample {
    f: MapFn,
    derivative: Option<DerivativeFn>,
    domain_tag: String,
}

impl std::fmt::Debug for MapSample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MapSample")
            .field("domain_tag", &self.domain_tag)
            .field("closed_form_derivative", &self.derivative.is_some())
            .finish()
    }
}

impl MapSample {
    pub fn new(
        domain_tag: impl Into<String>,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        MapSample {
            f: Arc::new(f),
            derivative: None,
            domain_tag: domain_tag.into(),
        }
    }

    pub fn with_derivative(
        mut self,
        d: impl Fn(&[f64]) -> SquareMatrix + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn domain_tag(&self) -> &str {
        &self.domain_tag
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }

    pub fn has_closed_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    /// Central finite-difference Jacobian with the ball-aware step
    /// `h = 1e-5 · (1 - |x|)`.
    pub fn fd_jacobian(&self, x: &[f64]) -> SquareMatrix {
        self.fd_jacobian_with_step(x, 1e-5 * (1.0 - norm(x)))
    }

    pub fn fd_jacobian_with_step(&self, x: &[f64], h: f64) -> SquareMatrix {
        let n = x.len();
        let mut m = SquareMatrix::zeros(n);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        for col in 0..n {
            xp[col] = x[col] + h;
            xm[col] = x[col] - h;
            let fp = self.eval(&xp);
            let fm = self.eval(&xm);
            for row in 0..n {
                m.set(row, col, (fp[row] - fm[row]) / (2.0 * h));
            }
            xp[col] = x[col];
            xm[col] = x[col];
        }
        m
    }

    /// Closed-form derivative when present, finite differences otherwise.
    pub fn jacobian(&self, x: &[f64]) -> SquareMatrix {
        match &self.derivative {
            Some(d) => d(x),
            None => self.fd_jacobian(x),
        }
    }

    /// Step-halving residual of the finite-difference Jacobian; `O(h)` on
    /// smooth samples.
    pub fn richardson_residual(&self, x: &[f64]) -> f64 {
        let h = 1e-5 * (1.0 - norm(x));
        let a = self.fd_jacobian_with_step(x, h);
        let b = self.fd_jacobian_with_step(x, h / 2.0);
        a.max_norm_distance(&b)
    }
}

/// Verdict of the gauge-growth test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CalderonVerdict {
    Converges,
    DivergesOrInconclusive,
}

/// Partial integrals of `∫₁^T [t/φ(t)]^{1/(n-2)} dt` over a doubling
/// schedule, with a convergence verdict.
#[derive(Debug, Clone)]
pub struct CalderonReport {
    /// `(T, ∫₁^T ...)` for `T = 2, 4, 8, …`.
    pub partials: Vec<(f64, f64)>,
    pub verdict: CalderonVerdict,
    pub last_increment: f64,
}

/// Numeric test of the gauge-growth condition for a nondecreasing
/// positive gauge `φ` on `[1, ∞)`, `n ≥ 3`.
///
/// The verdict is a heuristic: converges when the doubling increments
/// have dropped below `tol` and the tail decays (geometric ratio at most
/// 0.9, or a fitted power-law exponent in the doubling index of at least
/// 1.1 — the latter catches slowly-converging gauges such as
/// `t² log²(e+t)`).
pub fn calderon_check(
    phi: &dyn Fn(f64) -> f64,
    n: usize,
    t_max: f64,
    tol: f64,
) -> Result<CalderonReport> {
    if n < 3 {
        return Err(QmodError::domain("the gauge test requires n >= 3"));
    }
    if t_max < 4.0 {
        return Err(QmodError::validation("t_max must be at least 4"));
    }
    // monotonicity audit on a log-spaced sample
    let mut prev = phi(1.0);
    if prev.is_nan() || prev <= 0.0 {
        return Err(QmodError::validation("φ must be positive on [1, ∞)"));
    }
    let probes = 256;
    for k in 1..=probes {
        let t = t_max.powf(k as f64 / probes as f64);
        let v = phi(t);
        if v.is_nan() || v <= 0.0 || v < prev * (1.0 - 1e-12) {
            return Err(QmodError::validation(format!(
                "φ is not nondecreasing near t = {t:.6e}"
            )));
        }
        prev = v;
    }
    let pw = 1.0 / (n as f64 - 2.0);
    let integrand = |t: f64| (t / phi(t)).powf(pw);
    let mut partials = Vec::new();
    let mut total = 0.0;
    let mut lo = 1.0f64;
    let mut t = 2.0f64;
    loop {
        let piece = integrate_adaptive(&integrand, lo, t, 1e-11)
            .finite()
            .ok_or_else(|| QmodError::numeric("gauge integrand blew up"))?;
        total += piece;
        partials.push((t, total));
        lo = t;
        t *= 2.0;
        if t > t_max * (1.0 + 1e-12) {
            break;
        }
    }
    let increments: Vec<f64> = std::iter::once(partials[0].1)
        .chain(partials.windows(2).map(|w| w[1].1 - w[0].1))
        .collect();
    let m = increments.len();
    let last = increments[m - 1];
    let verdict = if m >= 4 && last < tol {
        let tail = &increments[m - 4..];
        let decreasing = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        let ratio = tail
            .windows(2)
            .map(|w| w[1] / w[0].max(1e-300))
            .fold(0.0f64, f64::max);
        // power-law exponent in the doubling index from the tail ends
        let k0 = (m - 3) as f64;
        let k1 = m as f64;
        let p_hat = if tail[0] > 0.0 && tail[3] > 0.0 {
            (tail[0] / tail[3]).ln() / (k1 / k0).ln()
        } else {
            f64::INFINITY
        };
        if decreasing && (ratio <= 0.9 || p_hat >= 1.1) {
            CalderonVerdict::Converges
        } else {
            CalderonVerdict::DivergesOrInconclusive
        }
    } else {
        CalderonVerdict::DivergesOrInconclusive
    };
    Ok(CalderonReport {
        partials,
        verdict,
        last_increment: last,
    })
}

/// Sample-based multiplicity estimate.
#[derive(Debug, Clone, Copy)]
pub struct MultiplicityEstimate {
    /// Number of preimage clusters found: a lower bound of the covering
    /// multiplicity over the sampled set.
    pub count: usize,
    /// Set when most of the sample set maps onto the target, which makes
    /// the cluster count meaningless (near-constant map).
    pub degenerate: bool,
    pub matched_samples: usize,
}

/// Count clusters of sample points that `f` maps within `tol` of `y`;
/// clusters are merged under single linkage at `10·tol`.
pub fn multiplicity_estimate(
    f: &MapSample,
    samples: &[Vec<f64>],
    y: &[f64],
    tol: f64,
) -> Result<MultiplicityEstimate> {
    if tol <= 0.0 {
        return Err(QmodError::validation(
            "multiplicity tolerance must be positive",
        ));
    }
    let matched: Vec<&Vec<f64>> = samples
        .iter()
        .filter(|x| dist(&f.eval(x), y) < tol)
        .collect();
    let m = matched.len();
    if m == 0 {
        return Ok(MultiplicityEstimate {
            count: 0,
            degenerate: false,
            matched_samples: 0,
        });
    }
    // union-find single linkage
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let link = 10.0 * tol;
    for i in 0..m {
        for j in (i + 1)..m {
            if dist(matched[i], matched[j]) <= link {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut roots: Vec<usize> = (0..m).map(|i| find(&mut parent, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    Ok(MultiplicityEstimate {
        count: roots.len(),
        degenerate: m * 2 > samples.len(),
        matched_samples: m,
    })
}

/// Sampled finite-distortion audit: fraction of points where the
/// derivative is singular but nonzero (`K_O = ∞`).
pub fn infinite_dilatation_fraction(f: &MapSample, samples: &[Vec<f64>], n: usize) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let bad = samples
        .iter()
        .filter(|x| outer_dilatation(&f.jacobian(x), n).is_infinite())
        .count();
    bad as f64 / samples.len() as f64
}

/// Gauge energy of a map over the Euclidean chart ball of radius `rho`:
/// `∫ φ(|∇F|) dm` with `|∇F|` the Frobenius norm of the derivative,
/// by seeded Monte Carlo over the flat (Lebesgue) volume.
///
/// A finite value is the numeric membership spot-check for the gauge
/// class; no function-space machinery is involved.
pub fn orlicz_energy(
    f: &MapSample,
    n: usize,
    rho: f64,
    phi: &dyn Fn(f64) -> f64,
    budget: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if budget == 0 {
        return Err(QmodError::numeric("energy budget must be positive"));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(QmodError::domain("chart ball radius must lie in (0, 1)"));
    }
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let vol = crate::unit_sphere_area(n) * rho.powi(n as i32) / n as f64;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut drawn = 0usize;
    while drawn < budget {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-rho..rho)).collect();
        if norm(&x) >= rho {
            continue;
        }
        let g = f.jacobian(&x).frobenius_norm();
        let v = phi(g);
        sum += v;
        sum2 += v * v;
        drawn += 1;
    }
    let mean = sum / budget as f64;
    let var = (sum2 / budget as f64 - mean * mean).max(0.0);
    Ok((vol * mean, vol * (var / budget as f64).sqrt()))
}
