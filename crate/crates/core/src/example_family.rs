//! A two-branch radial map family on a charted ball: linear scaling on an
//! inner ball glued to a radial logarithmic stretch on the complementary
//! annulus. The closed-form derivative norm and Jacobian make it the
//! reference workload for the distortion, divergence and equicontinuity
//! checks.

use crate::error::{QmodError, Result};
use crate::geometry::{euclid_radius, hyp_distance, normal_radius, ChartedNeighborhood, QuotientPoint};
use crate::linalg::norm;
use crate::measures::ScalarField;
use crate::mobius::DiscreteGroup;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Configuration of the family: dimension, family index, chart ball.
#[derive(Debug, Clone)]
pub struct ExampleFamilyConfig {
    n: usize,
    m: u32,
    /// Hyperbolic radius of the chart ball.
    r0: f64,
    /// Euclidean radius of the chart ball: `(e^{r0}-1)/(e^{r0}+1)`.
    r0_prime: f64,
    nbhd: ChartedNeighborhood,
}

impl ExampleFamilyConfig {
    /// Family over the quotient by `group`, charted at the projection of
    /// the origin with hyperbolic radius `r0`.
    pub fn new(n: usize, m: u32, r0: f64, group: Arc<DiscreteGroup>) -> Result<Self> {
        if m < 2 {
            return Err(QmodError::validation(
                "family index m must be at least 2 (m = 1 collapses the inner ball)",
            ));
        }
        if r0.is_nan() || r0 <= 0.0 {
            return Err(QmodError::validation("chart radius must be positive"));
        }
        let origin = vec![0.0; n];
        let nr = normal_radius(&group, &origin)?;
        if r0 > nr {
            return Err(QmodError::validation(format!(
                "chart radius {r0} exceeds the normal radius {nr} at the base point"
            )));
        }
        let center = QuotientPoint::new(group, origin)?;
        let nbhd = ChartedNeighborhood::new(center, r0)?;
        Ok(ExampleFamilyConfig {
            n,
            m,
            r0,
            r0_prime: euclid_radius(r0),
            nbhd,
        })
    }

    /// Trivial-group instance on the ball itself.
    pub fn on_ball(n: usize, m: u32, r0: f64) -> Result<Self> {
        Self::new(n, m, r0, Arc::new(DiscreteGroup::trivial(n)))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r0_prime(&self) -> f64 {
        self.r0_prime
    }

    pub fn neighborhood(&self) -> &ChartedNeighborhood {
        &self.nbhd
    }

    /// `|r0' - tanh(r0/2)|` — the chart-radius consistency invariant.
    pub fn consistency_residual(&self) -> f64 {
        (self.r0_prime - euclid_radius(self.r0)).abs()
    }

    /// Gluing radius `r0'(m-1)/m`.
    pub fn gluing_radius(&self) -> f64 {
        self.gluing_radius_for(self.m)
    }

    pub fn gluing_radius_for(&self, m: u32) -> f64 {
        self.r0_prime * (m as f64 - 1.0) / m as f64
    }

    /// Inner-branch slope `(m/(m-1)) log(e·m/(m-1))`.
    pub fn inner_slope(&self) -> f64 {
        self.inner_slope_for(self.m)
    }

    pub fn inner_slope_for(&self, m: u32) -> f64 {
        let u = m as f64 / (m as f64 - 1.0);
        u * (std::f64::consts::E * u).ln()
    }
}

/// Image and closed-form derivative data at one point.
#[derive(Debug, Clone)]
pub struct GmEval {
    pub image: Vec<f64>,
    /// Closed-form operator norm of the derivative.
    pub norm_closed: f64,
    /// Closed-form absolute Jacobian.
    pub jac_closed: f64,
}

impl GmEval {
    /// Outer dilatation from the closed forms.
    pub fn ko(&self, n: usize) -> f64 {
        self.norm_closed.powi(n as i32) / self.jac_closed
    }
}

/// Evaluate the family map and its closed-form derivative data at `y`.
///
/// Inner ball `|y| ≤ r0'(m-1)/m`: the conformal scaling `c_m · y` with
/// `‖g'‖ = c_m`, `|J| = c_mⁿ`. Annulus: the radial logarithmic map
/// `(r0' y/|y|) log(e r0'/|y|)` with `‖g'‖ = (r0'/|y|) log(e r0'/|y|)`
/// and `|J| = (r0'/|y|)ⁿ log^{n-1}(e r0'/|y|)`.
pub fn gm_family_eval(cfg: &ExampleFamilyConfig, y: &[f64]) -> Result<GmEval> {
    gm_family_eval_for(cfg, cfg.m, y)
}

/// Same, with an explicit family index (for sweeps over `m`).
pub fn gm_family_eval_for(cfg: &ExampleFamilyConfig, m: u32, y: &[f64]) -> Result<GmEval> {
    if y.len() != cfg.n {
        return Err(QmodError::validation("point dimension mismatch"));
    }
    let s = norm(y);
    let rp = cfg.r0_prime;
    if s > rp * (1.0 + 1e-12) {
        return Err(QmodError::domain(format!(
            "point with |y| = {s} outside the chart ball of radius {rp}"
        )));
    }
    let nf = cfg.n as f64;
    let glue = cfg.gluing_radius_for(m);
    if s <= glue {
        let c = cfg.inner_slope_for(m);
        Ok(GmEval {
            image: y.iter().map(|v| c * v).collect(),
            norm_closed: c,
            jac_closed: c.powf(nf),
        })
    } else {
        let lg = (std::f64::consts::E * rp / s).ln();
        let scale = rp * lg / s;
        Ok(GmEval {
            image: y.iter().map(|v| scale * v).collect(),
            norm_closed: (rp / s) * lg,
            jac_closed: (rp / s).powf(nf) * lg.powf(nf - 1.0),
        })
    }
}

/// The distortion majorant `Q(y) = log^{n-1}(e r0'/|y|)` as a field in
/// chart coordinates (radial in the Euclidean chart radius).
pub fn q_field(cfg: &ExampleFamilyConfig) -> ScalarField {
    let rp = cfg.r0_prime;
    let pw = cfg.n as f64 - 1.0;
    ScalarField::from_fn("log-majorant", move |y: &[f64]| {
        let s = norm(y);
        if s == 0.0 {
            f64::INFINITY
        } else {
            (std::f64::consts::E * rp / s).ln().powf(pw)
        }
    })
}

/// The charted majorant `Q₁(p) = log^{n-1}(C/h̃(p, p₀))` with
/// `C = e r0' c₁*`; radial in the hyperbolic radius, so it feeds the
/// radial quadratures and the divergence criterion directly.
pub fn q1_field(cfg: &ExampleFamilyConfig, c1_star: f64) -> ScalarField {
    let c = std::f64::consts::E * cfg.r0_prime * c1_star;
    let pw = cfg.n as f64 - 1.0;
    ScalarField::radial("charted-log-majorant", move |t: f64| {
        if t <= 0.0 {
            f64::INFINITY
        } else {
            (c / t).ln().max(0.0).powf(pw)
        }
    })
}

/// Empirical metric-comparison constant on `B_h(0, r0)`:
/// `ĉ₁ = min |z₁-z₂| / h(z₁, z₂)` over sampled pairs (pairs with the
/// origin included), returned as `ĉ₁* = 1/ĉ₁ ≥ 1`.
pub fn empirical_c1_star(cfg: &ExampleFamilyConfig, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rho = cfg.r0_prime;
    let n = cfg.n;
    let mut c1 = 1.0f64;
    let origin = vec![0.0; n];
    for k in 0..pairs {
        let a = sample_in_ball(&mut rng, n, rho);
        let b = if k % 4 == 0 {
            origin.clone()
        } else if k % 4 == 1 {
            // infinitesimal pair at the same radius
            a.iter().map(|v| v * (1.0 - 1e-6)).collect()
        } else {
            sample_in_ball(&mut rng, n, rho)
        };
        if a == b {
            continue;
        }
        let e = crate::linalg::dist(&a, &b);
        let h = hyp_distance(&a, &b).expect("samples inside the ball");
        if h > 0.0 {
            c1 = c1.min(e / h);
        }
    }
    1.0 / c1
}

fn sample_in_ball(rng: &mut ChaCha8Rng, n: usize, rho: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-rho..rho)).collect();
        if norm(&x) < rho {
            return x;
        }
    }
}

/// Outcome of the distortion audit over a sample cloud.
#[derive(Debug, Clone)]
pub struct DistortionReport {
    /// `max over samples of K_O^{n-1} - Q` (equality on the annulus).
    pub max_excess: f64,
    /// Samples where `Q < 1` (analytically none on the chart ball).
    pub q_below_one: usize,
    /// Samples where `Q > Q₁` with the empirical `c₁*` (analytically none).
    pub q1_violations: usize,
    pub c1_star_hat: f64,
    /// Max branch mismatch on the gluing sphere.
    pub gluing_mismatch: f64,
    /// Max deviation of the finite-difference operator norm from the
    /// closed form, away from the gluing sphere.
    pub fd_norm_deviation: f64,
    pub samples: usize,
}

/// Check the pointwise distortion bound `K_O^{n-1} ≤ Q` and the charted
/// majorant `Q ≤ Q₁` over a seeded sample cloud.
pub fn example_distortion_check(
    cfg: &ExampleFamilyConfig,
    sample_count: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if sample_count == 0 {
        return Err(QmodError::validation("sample count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n;
    let nf = n as f64;
    let rp = cfg.r0_prime;
    let glue = cfg.gluing_radius();
    let q = q_field(cfg);
    let c1_star_hat = empirical_c1_star(cfg, 4000, seed.wrapping_add(1));
    let cbig = std::f64::consts::E * rp * c1_star_hat;

    let mut max_excess = f64::NEG_INFINITY;
    let mut q_below_one = 0usize;
    let mut q1_violations = 0usize;
    let map = crate::distortion::MapSample::new("family", {
        let cfg = cfg.clone();
        move |y: &[f64]| gm_family_eval(&cfg, y).expect("sample inside chart ball").image
    });
    let mut fd_norm_deviation = 0.0f64;
    for k in 0..sample_count {
        // radius sweep mixes the two branches and hugs the gluing sphere
        let s = match k % 8 {
            0 => rng.random_range(0.0..glue),
            1 => glue * (1.0 - 1e-9),
            2 => glue * (1.0f64 + 1e-9).min(rp / glue),
            _ => rng.random_range(0.0..rp),
        };
        let u = random_direction(&mut rng, n);
        let y: Vec<f64> = u.iter().map(|v| v * s).collect();
        let ev = gm_family_eval(cfg, &y)?;
        let ko = ev.ko(n);
        let qv = q.eval(&y);
        if qv.is_finite() {
            max_excess = max_excess.max(ko.powf(nf - 1.0) - qv);
            if qv < 1.0 {
                q_below_one += 1;
            }
            let t = hyp_distance(&y, &vec![0.0; n])?;
            if t > 0.0 {
                let q1 = (cbig / t).ln().max(0.0).powf(nf - 1.0);
                if qv > q1 * (1.0 + 1e-12) {
                    q1_violations += 1;
                }
            }
        }
        // finite differences vs closed forms off the gluing sphere
        if k % 16 == 0 && s > 1e-3 && (s - glue).abs() > 1e-3 && s < rp - 1e-3 {
            let fd = map.fd_jacobian(&y);
            let fd_norm = fd.operator_norm();
            fd_norm_deviation = fd_norm_deviation.max((fd_norm - ev.norm_closed).abs());
        }
    }
    // branch agreement on the gluing sphere, both formulas evaluated there
    let mut gluing_mismatch = 0.0f64;
    for _ in 0..64 {
        let u = random_direction(&mut rng, n);
        let y: Vec<f64> = u.iter().map(|v| v * glue).collect();
        let c = cfg.inner_slope();
        let inner: Vec<f64> = y.iter().map(|v| c * v).collect();
        let lg = (std::f64::consts::E * rp / glue).ln();
        let annulus: Vec<f64> = y.iter().map(|v| rp * lg * v / glue).collect();
        gluing_mismatch = gluing_mismatch.max(crate::linalg::dist(&inner, &annulus));
    }
    Ok(DistortionReport {
        max_excess,
        q_below_one,
        q1_violations,
        c1_star_hat,
        gluing_mismatch,
        fd_norm_deviation,
        samples: sample_count,
    })
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nv = norm(&v);
        if nv > 1e-6 && nv < 1.0 {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
}

/// One row of the equicontinuity table: quotient-ball radius δ and the
/// supremum of the image displacement over the family.
#[derive(Debug, Clone, Copy)]
pub struct EquicontinuityRow {
    pub delta: f64,
    /// `sup over m and over h̃(π(x), p₀) < δ of |g_m(π(x)) - g_m(p₀)|`.
    pub sup_displacement: f64,
    /// The uniform inner-slope bound `2 log(2e) · tanh(δ/2)`.
    pub bound: f64,
}

/// Displacement profile of the family over shrinking quotient balls.
///
/// The maps are radial with a piecewise-monotone profile peaking at the
/// gluing sphere, so the supremum over the δ-ball is
/// `max_m min(tanh(δ/2), s_m) · c_m`, cross-checked against a radial
/// sample grid.
pub fn equicontinuity_profile(
    cfg: &ExampleFamilyConfig,
    m_list: &[u32],
    delta_list: &[f64],
) -> Result<Vec<EquicontinuityRow>> {
    if m_list.is_empty() || m_list.iter().any(|&m| m < 2) {
        return Err(QmodError::validation("m_list must be nonempty with m >= 2"));
    }
    if delta_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(QmodError::validation("delta_list must be strictly decreasing"));
    }
    if delta_list.iter().any(|&d| d < 0.0 || d > cfg.r0) {
        return Err(QmodError::domain("delta_list must lie in [0, r0]"));
    }
    let two_log_2e = 2.0 * (2.0 * std::f64::consts::E).ln();
    let mut rows = Vec::with_capacity(delta_list.len());
    for &delta in delta_list {
        let rho = euclid_radius(delta);
        let mut sup = 0.0f64;
        for &m in m_list {
            let s_m = cfg.gluing_radius_for(m);
            let c_m = cfg.inner_slope_for(m);
            sup = sup.max(rho.min(s_m) * c_m);
        }
        rows.push(EquicontinuityRow {
            delta,
            sup_displacement: sup,
            bound: two_log_2e * rho,
        });
    }
    Ok(rows)
}

/// Radial profile of one family member on a uniform grid, with
/// monotonicity verdicts for the inner branch and the full profile.
#[derive(Debug, Clone)]
pub struct RadialProfileReport {
    pub rows: Vec<(f64, f64)>,
    pub strictly_increasing_inner: bool,
    pub strictly_increasing_full: bool,
    /// Largest image radius (attained at the gluing sphere).
    pub peak_image_radius: f64,
}

pub fn radial_profile_report(
    cfg: &ExampleFamilyConfig,
    m: u32,
    grid_points: usize,
) -> Result<RadialProfileReport> {
    if grid_points < 3 {
        return Err(QmodError::validation("profile grid needs at least 3 points"));
    }
    let rp = cfg.r0_prime;
    let glue = cfg.gluing_radius_for(m);
    let mut rows = Vec::with_capacity(grid_points);
    let dir = {
        let mut d = vec![0.0; cfg.n];
        d[0] = 1.0;
        d
    };
    let mut radii: Vec<f64> = (0..grid_points)
        .map(|k| rp * k as f64 / (grid_points - 1) as f64)
        .collect();
    radii.push(glue);
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    radii.dedup();
    for s in radii {
        let y: Vec<f64> = dir.iter().map(|v| v * s).collect();
        let img = gm_family_eval_for(cfg, m, &y)?.image;
        rows.push((s, norm(&img)));
    }
    let strictly_increasing_full = rows.windows(2).all(|w| w[1].1 > w[0].1);
    let strictly_increasing_inner = rows
        .windows(2)
        .filter(|w| w[1].0 <= glue)
        .all(|w| w[1].1 > w[0].1);
    let peak = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(RadialProfileReport {
        rows,
        strictly_increasing_inner,
        strictly_increasing_full,
        peak_image_radius: peak,
    })
}

/// The restricted family and its omitted continuum.
///
/// Restricting each member to the half-radius quotient ball makes the
/// family omit a fixed nondegenerate continuum of the target ball: the
/// images are centered balls of radius at most `sup_image_radius`, so the
/// spherical shell between that radius and the target radius is avoided
/// by every member. Its hyperbolic diameter is what the equicontinuity
/// hypothesis asks to bound from below.
#[derive(Debug, Clone)]
pub struct RestrictedFamilyReport {
    /// Hyperbolic radius of the restricted chart ball: `r0/2`.
    pub r0_star: f64,
    /// Euclidean radius of the restricted chart ball.
    pub rho_star: f64,
    /// `(m, image radius of the restricted member)`.
    pub image_radii: Vec<(u32, f64)>,
    pub sup_image_radius: f64,
    /// Euclidean radius of the target ball the family maps into.
    pub target_radius: f64,
    /// Inner and outer Euclidean radii of the omitted shell.
    pub omitted_shell: (f64, f64),
    /// Hyperbolic diameter of the omitted shell (between antipodal
    /// points of its outer sphere).
    pub omitted_diameter: f64,
}

/// Instantiate the restricted family over `m_list` and report the omitted
/// continuum.
pub fn restricted_family_report(
    cfg: &ExampleFamilyConfig,
    m_list: &[u32],
) -> Result<RestrictedFamilyReport> {
    if m_list.is_empty() || m_list.iter().any(|&m| m < 2) {
        return Err(QmodError::validation("m_list must be nonempty with m >= 2"));
    }
    let r0_star = cfg.r0 / 2.0;
    let rho_star = euclid_radius(r0_star);
    let mut image_radii = Vec::with_capacity(m_list.len());
    let mut sup = 0.0f64;
    for &m in m_list {
        // radial profile increases up to the gluing sphere and decreases
        // beyond it, so the restricted image is the centered ball of
        // radius min(rho*, s_m) · c_m
        let r = rho_star.min(cfg.gluing_radius_for(m)) * cfg.inner_slope_for(m);
        image_radii.push((m, r));
        sup = sup.max(r);
    }
    // target ball: half-way between the image envelope and the unit
    // sphere, so the omitted shell is nondegenerate on both sides
    let target_radius = (0.5 * (sup + 1.0)).min(0.999);
    if target_radius <= sup {
        return Err(QmodError::numeric(
            "restricted images already fill the target ball",
        ));
    }
    let omitted_diameter = 2.0 * ((1.0 + target_radius) / (1.0 - target_radius)).ln();
    Ok(RestrictedFamilyReport {
        r0_star,
        rho_star,
        image_radii,
        sup_image_radius: sup,
        target_radius,
        omitted_shell: (sup, target_radius),
        omitted_diameter,
    })
}

/// Spherical-mean profile of `Q₁` against the `C₁ log^{n-1}(C/r)` cap.
#[derive(Debug, Clone)]
pub struct QProfileBound {
    /// `(r, q*(r), cap(r))` rows.
    pub rows: Vec<(f64, f64, f64)>,
    /// Empirical `Ĉ₁ = max q*(r)/log^{n-1}(C/r)`.
    pub c1_const_hat: f64,
    pub bounded: bool,
}

/// Verify the spherical-mean growth cap of the charted majorant on a
/// radial grid inside the chart ball.
pub fn q1_profile_bound(
    cfg: &ExampleFamilyConfig,
    c1_star: f64,
    grid_points: usize,
) -> Result<QProfileBound> {
    let n = cfg.n;
    let q1 = q1_field(cfg, c1_star);
    let cbig = std::f64::consts::E * cfg.r0_prime * c1_star;
    let pw = n as f64 - 1.0;
    // the analytic cap constant: sup of (sinh r / r)^{n-1} on (0, r0]
    let cap_const = (cfg.r0.sinh() / cfg.r0).powf(pw);
    let mut rows = Vec::with_capacity(grid_points);
    let mut c1_hat = 0.0f64;
    let mut bounded = true;
    for k in 1..=grid_points {
        let r = cfg.r0 * k as f64 / (grid_points + 1) as f64;
        let qs = crate::measures::q_stats(&cfg.nbhd, r, &q1)?.q_mean;
        let log_term = (cbig / r).ln().powf(pw);
        let cap = cap_const * log_term;
        rows.push((r, qs, cap));
        if log_term > 0.0 {
            c1_hat = c1_hat.max(qs / log_term);
        }
        if qs > cap * (1.0 + 1e-9) {
            bounded = false;
        }
    }
    Ok(QProfileBound {
        rows,
        c1_const_hat: c1_hat,
        bounded,
    })
}
