//! Hyperbolic volume and geodesic-sphere integrals on charted normal
//! neighborhoods, the volume/shell sandwich, spherical means and
//! mean-oscillation profiles.
//!
//! All integrals are evaluated in chart coordinates: the neighborhood is a
//! Euclidean ball of radius `tanh(r/2)` about the origin, lengths carry the
//! density `2/(1-|x|²)` and volumes the density `2ⁿ/(1-|x|²)ⁿ`.

use crate::error::{QmodError, Result};
use crate::geometry::{euclid_radius, ChartedNeighborhood};
use crate::linalg::norm;
use crate::quad::{gauss_legendre, integrate_adaptive};
use crate::unit_sphere_area;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Default Monte Carlo budget for ball integrals.
pub const DEFAULT_MC_BUDGET: usize = 200_000;

/// A pointwise density in chart coordinates.
pub type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A profile of the hyperbolic radius.
pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A nonnegative density evaluated in chart coordinates.
///
/// Fields that only depend on the hyperbolic distance to the chart center
/// can carry their radial profile; volume integrals then use an exact
/// radial product quadrature instead of Monte Carlo.
#[derive(Clone)]
pub struct ScalarField {
    label: String,
    eval: FieldFn,
    radial: Option<RadialFn>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("label", &self.label)
            .field("radial", &self.radial.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn constant(c: f64) -> Self {
        ScalarField {
            label: format!("const({c})"),
            eval: Arc::new(move |_| c),
            radial: Some(Arc::new(move |_| c)),
        }
    }

    /// Field depending only on the hyperbolic radius `t = h(x, 0)`.
    pub fn radial(
        label: impl Into<String>,
        profile: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let profile: RadialFn = Arc::new(profile);
        let p = profile.clone();
        ScalarField {
            label: label.into(),
            eval: Arc::new(move |x: &[f64]| {
                let rho = norm(x);
                p(((1.0 + rho) / (1.0 - rho)).ln())
            }),
            radial: Some(profile),
        }
    }

    /// General pointwise field in chart coordinates.
    pub fn from_fn(
        label: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarField {
            label: label.into(),
            eval: Arc::new(f),
            radial: None,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn radial_profile(&self) -> Option<&RadialFn> {
        self.radial.as_ref()
    }

    /// Pointwise power of the field; radial structure is preserved.
    pub fn pow(&self, p: f64) -> ScalarField {
        let eval = self.eval.clone();
        let radial = self.radial.as_ref().map(|r| {
            let r = r.clone();
            Arc::new(move |t: f64| r(t).powf(p)) as RadialFn
        });
        ScalarField {
            label: format!("{}^{}", self.label, p),
            eval: Arc::new(move |x: &[f64]| eval(x).powf(p)),
            radial,
        }
    }

    /// Sampled finiteness audit: fraction of non-finite draws over the
    /// chart ball.
    pub fn finiteness_fraction(
        &self,
        nbhd: &ChartedNeighborhood,
        samples: usize,
        seed: u64,
    ) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = nbhd.euclid_radius();
        let n = nbhd.dim();
        let mut bad = 0usize;
        for _ in 0..samples {
            let x = sample_ball(&mut rng, n, rho);
            if !self.eval(&x).is_finite() {
                bad += 1;
            }
        }
        bad as f64 / samples as f64
    }
}

/// Quadrature nodes on the unit sphere `S^{n-1}` with weights summing to
/// `ω_{n-1}`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    dim: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SphereQuadrature {
    /// Rule for the sphere in `R^n`: 256-node trapezoid on the circle, a
    /// Gauss–Legendre × uniform product grid (612 nodes) on `S²`, and
    /// seeded Monte Carlo directions in higher dimensions.
    pub fn for_dim(n: usize) -> Result<Self> {
        match n {
            0 | 1 => Err(QmodError::validation("sphere quadrature needs n >= 2")),
            2 => Ok(Self::circle(256)),
            3 => Ok(Self::product_s2(17, 36)),
            _ => Ok(Self::monte_carlo(n, 4096, 0x5EED_0001)),
        }
    }

    pub fn circle(count: usize) -> Self {
        let w = std::f64::consts::TAU / count as f64;
        let mut nodes = Vec::with_capacity(count);
        for k in 0..count {
            let theta = std::f64::consts::TAU * (k as f64 + 0.5) / count as f64;
            nodes.push(vec![theta.cos(), theta.sin()]);
        }
        SphereQuadrature {
            dim: 2,
            nodes,
            weights: vec![w; count],
        }
    }

    /// Gauss–Legendre in the polar cosine times a uniform azimuthal grid.
    pub fn product_s2(n_polar: usize, n_azimuth: usize) -> Self {
        let (gl_nodes, gl_weights) = gauss_legendre(n_polar);
        let wphi = std::f64::consts::TAU / n_azimuth as f64;
        let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
        let mut weights = Vec::with_capacity(n_polar * n_azimuth);
        for (c, wc) in gl_nodes.iter().zip(&gl_weights) {
            let s = (1.0 - c * c).sqrt();
            for k in 0..n_azimuth {
                let phi = std::f64::consts::TAU * (k as f64 + 0.5) / n_azimuth as f64;
                nodes.push(vec![s * phi.cos(), s * phi.sin(), *c]);
                weights.push(wc * wphi);
            }
        }
        SphereQuadrature {
            dim: 3,
            nodes,
            weights,
        }
    }

    pub fn monte_carlo(n: usize, count: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = unit_sphere_area(n) / count as f64;
        let nodes = (0..count).map(|_| sample_direction(&mut rng, n)).collect();
        SphereQuadrature {
            dim: n,
            nodes,
            weights: vec![w; count],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integral over the Euclidean sphere of radius `rho` of a pointwise
    /// function, with respect to Euclidean surface measure.
    pub fn integrate(&self, rho: f64, f: impl Fn(&[f64]) -> f64) -> f64 {
        let scale = rho.powi(self.dim as i32 - 1);
        let mut s = 0.0;
        let mut x = vec![0.0; self.dim];
        for (u, w) in self.nodes.iter().zip(&self.weights) {
            for (xi, ui) in x.iter_mut().zip(u) {
                *xi = rho * ui;
            }
            s += w * f(&x);
        }
        s * scale
    }
}

fn sample_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        // Box–Muller pairs, normalized.
        let mut v = Vec::with_capacity(n + 1);
        while v.len() < n {
            let u1: f64 = rng.random::<f64>().max(1e-300);
            let u2: f64 = rng.random();
            let r = (-2.0 * u1.ln()).sqrt();
            v.push(r * (std::f64::consts::TAU * u2).cos());
            v.push(r * (std::f64::consts::TAU * u2).sin());
        }
        v.truncate(n);
        let nv = norm(&v);
        if nv > 1e-12 {
            for x in v.iter_mut() {
                *x /= nv;
            }
            return v;
        }
    }
}

fn sample_ball(rng: &mut ChaCha8Rng, n: usize, rho: f64) -> Vec<f64> {
    let u = sample_direction(rng, n);
    let r = rho * rng.random::<f64>().powf(1.0 / n as f64);
    u.into_iter().map(|v| v * r).collect()
}

/// Hyperbolic area of the geodesic sphere of radius `r`:
/// `ω_{n-1} sinh^{n-1}(r)`.
pub fn hyperbolic_sphere_area(n: usize, r: f64) -> f64 {
    unit_sphere_area(n) * r.sinh().powi(n as i32 - 1)
}

/// Hyperbolic volume of the geodesic ball of radius `r`.
pub fn hyperbolic_ball_volume(n: usize, r: f64) -> f64 {
    match n {
        2 => 4.0 * std::f64::consts::PI * (r / 2.0).sinh().powi(2),
        3 => std::f64::consts::PI * ((2.0 * r).sinh() - 2.0 * r),
        _ => integrate_adaptive(&|t: f64| hyperbolic_sphere_area(n, t), 0.0, r, 1e-12)
            .finite()
            .expect("sphere-area integrand is finite"),
    }
}

fn check_sphere_radius(nbhd: &ChartedNeighborhood, r: f64) -> Result<()> {
    // the closed endpoint is admitted so shell quadratures can evaluate
    // their integrand at the outer radius
    if r <= 0.0 || r > nbhd.radius() {
        return Err(QmodError::domain(format!(
            "sphere radius {r} outside (0, {}]",
            nbhd.radius()
        )));
    }
    Ok(())
}

/// Integral of `Q` over the geodesic sphere of radius `r` about the chart
/// center, with respect to the hyperbolic surface measure: a Euclidean
/// quadrature at radius `tanh(r/2)` carrying the area density
/// `(2/(1-ρ²))^{n-1}`.
pub fn sphere_integral(nbhd: &ChartedNeighborhood, r: f64, q: &ScalarField) -> Result<f64> {
    check_sphere_radius(nbhd, r)?;
    Ok(sphere_integral_unchecked(nbhd, r, |x| q.eval(x), true))
}

/// Same sphere but with the plain Euclidean surface measure (the measure
/// in which the explicit shell bracket is stated).
pub fn sphere_integral_euclid(nbhd: &ChartedNeighborhood, r: f64, q: &ScalarField) -> Result<f64> {
    check_sphere_radius(nbhd, r)?;
    Ok(sphere_integral_unchecked(nbhd, r, |x| q.eval(x), false))
}

fn sphere_integral_unchecked(
    nbhd: &ChartedNeighborhood,
    r: f64,
    f: impl Fn(&[f64]) -> f64,
    hyperbolic: bool,
) -> f64 {
    let n = nbhd.dim();
    let quad = SphereQuadrature::for_dim(n).expect("dimension checked at construction");
    let rho = euclid_radius(r);
    let density = if hyperbolic {
        (2.0 / (1.0 - rho * rho)).powi(n as i32 - 1)
    } else {
        1.0
    };
    quad.integrate(rho, f) * density
}

/// Mean and `L^{n-1}` norm of `Q` on the geodesic sphere of radius `r`.
#[derive(Debug, Clone, Copy)]
pub struct QStats {
    /// `(1/(ω_{n-1} r^{n-1})) ∫ Q dH^{n-1}` — spherical mean normalized by
    /// the flat sphere area at the hyperbolic radius.
    pub q_mean: f64,
    /// `(∫ Q^{n-1} dH^{n-1})^{1/(n-1)}`.
    pub q_norm: f64,
}

/// Spherical mean and norm of `Q` at radius `r`.
pub fn q_stats(nbhd: &ChartedNeighborhood, r: f64, q: &ScalarField) -> Result<QStats> {
    check_sphere_radius(nbhd, r)?;
    let n = nbhd.dim();
    let omega = unit_sphere_area(n);
    let mean_int = sphere_integral_unchecked(nbhd, r, |x| q.eval(x), true);
    let pw = (n - 1) as f64;
    let norm_int = sphere_integral_unchecked(nbhd, r, |x| q.eval(x).powf(pw), true);
    Ok(QStats {
        q_mean: mean_int / (omega * r.powf(pw)),
        q_norm: norm_int.powf(1.0 / pw),
    })
}

/// Spherical mean of `Q^{n-1}` at radius `r` (the profile entering the
/// norm identity and the divergence criterion).
pub fn q_tilde(nbhd: &ChartedNeighborhood, r: f64, q: &ScalarField) -> Result<f64> {
    check_sphere_radius(nbhd, r)?;
    let n = nbhd.dim();
    let pw = (n - 1) as f64;
    let int = sphere_integral_unchecked(nbhd, r, |x| q.eval(x).powf(pw), true);
    Ok(int / (unit_sphere_area(n) * r.powf(pw)))
}

/// Monte Carlo ball integral: value and standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

/// `∫_{B̃(p₀, r0)} Q dṽ` by fixed-seed radius-stratified Monte Carlo.
///
/// Sampling is uniform in the Euclidean chart ball split into equal-volume
/// radial strata; the integrand carries the hyperbolic volume density.
pub fn ball_integral_mc(
    nbhd: &ChartedNeighborhood,
    r0: f64,
    q: &ScalarField,
    budget: usize,
    seed: u64,
) -> Result<McEstimate> {
    if budget == 0 {
        return Err(QmodError::numeric("Monte Carlo budget must be positive"));
    }
    if r0 <= 0.0 || r0 > nbhd.radius() {
        return Err(QmodError::domain(format!(
            "ball radius {r0} outside (0, {}]",
            nbhd.radius()
        )));
    }
    let n = nbhd.dim();
    let rho0 = euclid_radius(r0);
    let strata = (budget / 32).clamp(1, 64);
    let per = (budget / strata).max(2);
    let total_vol = unit_sphere_area(n) * rho0.powi(n as i32) / n as f64;
    let stratum_vol = total_vol / strata as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = n as f64;
    let mut value = 0.0;
    let mut var = 0.0;
    for k in 0..strata {
        // equal-volume radial breakpoints: r^n uniform within the stratum
        let lo_pow = rho0.powf(nf) * k as f64 / strata as f64;
        let hi_pow = rho0.powf(nf) * (k + 1) as f64 / strata as f64;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..per {
            let u = sample_direction(&mut rng, n);
            let r = (lo_pow + rng.random::<f64>() * (hi_pow - lo_pow)).powf(1.0 / nf);
            let x: Vec<f64> = u.iter().map(|v| v * r).collect();
            let dens = (2.0 / (1.0 - r * r)).powi(n as i32);
            let f = q.eval(&x) * dens;
            sum += f;
            sum2 += f * f;
        }
        let mean = sum / per as f64;
        let s2 = (sum2 / per as f64 - mean * mean).max(0.0);
        value += stratum_vol * mean;
        var += stratum_vol * stratum_vol * s2 / per as f64;
    }
    Ok(McEstimate {
        value,
        stderr: var.sqrt(),
        samples: per * strata,
        seed,
    })
}

/// Exact radial route for fields with a radial profile:
/// `∫_0^{r0} F(t) · ω_{n-1} sinh^{n-1}(t) dt`.
pub fn ball_integral_radial(nbhd: &ChartedNeighborhood, r0: f64, q: &ScalarField) -> Result<f64> {
    let profile = q
        .radial_profile()
        .ok_or_else(|| QmodError::validation("field has no radial profile"))?
        .clone();
    if r0 <= 0.0 || r0 > nbhd.radius() {
        return Err(QmodError::domain(format!(
            "ball radius {r0} outside (0, {}]",
            nbhd.radius()
        )));
    }
    radial_integral(nbhd.dim(), 0.0, r0, move |t| profile(t))
}

fn radial_integral(n: usize, a: f64, b: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
    let omega = unit_sphere_area(n);
    // the sphere-area factor vanishes at the origin; profiles with an
    // integrable singularity there must not poison the endpoint value
    let g = move |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        f(t) * omega * t.sinh().powi(n as i32 - 1)
    };
    // split into panels first so short-range features are not missed
    let panels = 16;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        match integrate_adaptive(&g, lo, lo + h, 1e-11) {
            crate::quad::IntegralOutcome::Finite(v) => total += v,
            crate::quad::IntegralOutcome::Divergent => {
                return Err(QmodError::numeric("radial integral diverged"))
            }
        }
    }
    Ok(total)
}

/// Ball integral dispatch: exact radial product quadrature when the field
/// carries a radial profile, Monte Carlo with reported standard error
/// otherwise.
pub fn ball_integral(
    nbhd: &ChartedNeighborhood,
    r0: f64,
    q: &ScalarField,
    budget: usize,
    seed: u64,
) -> Result<McEstimate> {
    if q.radial_profile().is_some() {
        if budget == 0 {
            return Err(QmodError::numeric("integration budget must be positive"));
        }
        let value = ball_integral_radial(nbhd, r0, q)?;
        Ok(McEstimate {
            value,
            stderr: 0.0,
            samples: 0,
            seed,
        })
    } else {
        ball_integral_mc(nbhd, r0, q, budget, seed)
    }
}

/// Both sides of the volume/shell sandwich together with the computed
/// constant bracket.
#[derive(Debug, Clone, Copy)]
pub struct FubiniSandwich {
    /// `∫_{B̃(p₀,r0)} Q dṽ` (Monte Carlo; standard error reported).
    pub volume: f64,
    pub volume_stderr: f64,
    /// `∫_0^{r0} ∫ Q dH^{n-1}_euclid dr` — shell integral in the measure
    /// the explicit bracket is stated for.
    pub shell_euclid: f64,
    /// `∫_0^{r0} ∫ Q dH^{n-1}_hyper dr` — shell integral in the intrinsic
    /// surface measure (coarea makes this equal the volume).
    pub shell_hyper: f64,
    pub ratio_euclid: f64,
    pub ratio_hyper: f64,
    /// Lower constant of the bracket: `2^{n-1}`.
    pub bracket_lo: f64,
    /// Upper constant of the bracket: `2ⁿ · C(r0)`,
    /// `C(r0) = 1/(2 (1-ρ₀²)^{n-1})`, `ρ₀ = tanh(r0/2)`.
    pub bracket_hi: f64,
    pub within_bracket: bool,
}

/// Evaluate the sandwich at radius `r0`: volume integral against shell
/// integrals, with the explicit `[2^{n-1}, 2ⁿ C(r0)]` bracket on the
/// volume-to-Euclidean-shell ratio.
pub fn fubini_sandwich(
    nbhd: &ChartedNeighborhood,
    r0: f64,
    q: &ScalarField,
    budget: usize,
    seed: u64,
) -> Result<FubiniSandwich> {
    if r0 <= 0.0 || r0 > nbhd.radius() {
        return Err(QmodError::domain(format!(
            "sandwich radius {r0} outside (0, {}]",
            nbhd.radius()
        )));
    }
    let n = nbhd.dim();
    let vol = ball_integral_mc(nbhd, r0, q, budget, seed)?;
    let shell_euclid = shell_integral(nbhd, r0, q, false)?;
    let shell_hyper = shell_integral(nbhd, r0, q, true)?;
    let rho0 = euclid_radius(r0);
    let c_r0 = 1.0 / (2.0 * (1.0 - rho0 * rho0).powi(n as i32 - 1));
    let bracket_lo = 2f64.powi(n as i32 - 1);
    let bracket_hi = 2f64.powi(n as i32) * c_r0;
    let ratio_euclid = if shell_euclid > 0.0 {
        vol.value / shell_euclid
    } else {
        f64::NAN
    };
    let ratio_hyper = if shell_hyper > 0.0 {
        vol.value / shell_hyper
    } else {
        f64::NAN
    };
    let within = if shell_euclid == 0.0 && vol.value == 0.0 {
        true
    } else {
        ratio_euclid >= bracket_lo && ratio_euclid <= bracket_hi
    };
    Ok(FubiniSandwich {
        volume: vol.value,
        volume_stderr: vol.stderr,
        shell_euclid,
        shell_hyper,
        ratio_euclid,
        ratio_hyper,
        bracket_lo,
        bracket_hi,
        within_bracket: within,
    })
}

/// `∫_0^{r0} (sphere integral of Q at radius r) dr`, adaptive in `r` so
/// radial discontinuities of the field are resolved.
pub fn shell_integral(
    nbhd: &ChartedNeighborhood,
    r0: f64,
    q: &ScalarField,
    hyperbolic: bool,
) -> Result<f64> {
    let g = |r: f64| {
        if r <= 0.0 {
            0.0
        } else {
            sphere_integral_unchecked(nbhd, r, |x| q.eval(x), hyperbolic)
        }
    };
    let panels = 16usize;
    let h = r0 / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = p as f64 * h;
        match integrate_adaptive(&g, lo, lo + h, 1e-10) {
            crate::quad::IntegralOutcome::Finite(v) => total += v,
            crate::quad::IntegralOutcome::Divergent => {
                return Err(QmodError::numeric("shell integral diverged"));
            }
        }
    }
    Ok(total)
}

/// One row of a mean-oscillation profile.
#[derive(Debug, Clone, Copy)]
pub struct FmoRow {
    pub eps: f64,
    /// Ball mean `Q̄_ε`.
    pub mean: f64,
    /// `(1/ṽ(B̃(p₀,ε))) ∫ |Q - Q̄_ε| dṽ`.
    pub oscillation: f64,
    pub stderr: f64,
}

/// Mean oscillations of `Q` over the shrinking balls `B̃(p₀, ε)`.
///
/// `eps_list` must be strictly decreasing inside `(0, radius)`.
pub fn fmo_profile(
    nbhd: &ChartedNeighborhood,
    q: &ScalarField,
    eps_list: &[f64],
    budget: usize,
    seed: u64,
) -> Result<Vec<FmoRow>> {
    if eps_list.is_empty() {
        return Err(QmodError::validation("eps_list must be nonempty"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(QmodError::validation("eps_list must be strictly decreasing"));
    }
    if eps_list[0] >= nbhd.radius() || *eps_list.last().unwrap() <= 0.0 {
        return Err(QmodError::domain("eps_list must lie inside (0, radius)"));
    }
    let n = nbhd.dim();
    let mut rows = Vec::with_capacity(eps_list.len());
    for (k, &eps) in eps_list.iter().enumerate() {
        let vol = hyperbolic_ball_volume(n, eps);
        let (mean, osc, stderr) = if let Some(profile) = q.radial_profile() {
            let p = profile.clone();
            let total = radial_integral(n, 0.0, eps, move |t| p(t))?;
            let mean = total / vol;
            let p2 = profile.clone();
            let osc_int = radial_integral(n, 0.0, eps, move |t| (p2(t) - mean).abs())?;
            (mean, osc_int / vol, 0.0)
        } else {
            let est = ball_integral_mc(nbhd, eps, q, budget, seed.wrapping_add(k as u64))?;
            let mean = est.value / vol;
            let dev = ScalarField::from_fn(format!("|{} - mean|", q.label()), {
                let q = q.clone();
                move |x: &[f64]| (q.eval(x) - mean).abs()
            });
            let osc_est =
                ball_integral_mc(nbhd, eps, &dev, budget, seed.wrapping_add(1000 + k as u64))?;
            (mean, osc_est.value / vol, osc_est.stderr / vol)
        };
        rows.push(FmoRow {
            eps,
            mean,
            oscillation: osc,
            stderr,
        });
    }
    Ok(rows)
}

/// Bounded-limsup heuristic over a profile: the largest oscillation must
/// not exceed twice the median. Constant profiles count as bounded.
pub fn fmo_bounded_verdict(rows: &[FmoRow]) -> bool {
    if rows.is_empty() {
        return true;
    }
    let mut vals: Vec<f64> = rows.iter().map(|r| r.oscillation).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = vals[vals.len() / 2];
    let max = *vals.last().unwrap();
    max <= 2.0 * median || max < 1e-12
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ball(n: usize, r: f64) -> ChartedNeighborhood {
        ChartedNeighborhood::centered_ball(n, r).unwrap()
    }

    #[test]
    fn quadrature_weights_sum_to_sphere_area() {
        for n in 2..=5 {
            let q = SphereQuadrature::for_dim(n).unwrap();
            assert!(
                (q.weight_sum() - unit_sphere_area(n)).abs() < 1e-9,
                "n = {n}"
            );
        }
    }

    #[test]
    fn sphere_integral_of_one_matches_hyperbolic_area() {
        for n in [2usize, 3] {
            let nbhd = ball(n, 2.0);
            for r in [0.3, 0.7, 1.2] {
                let v = sphere_integral(&nbhd, r, &ScalarField::constant(1.0)).unwrap();
                let rho = euclid_radius(r);
                let closed = unit_sphere_area(n)
                    * rho.powi(n as i32 - 1)
                    * (2.0 / (1.0 - rho * rho)).powi(n as i32 - 1);
                assert!(
                    (v - closed).abs() < 1e-9 * closed,
                    "n={n} r={r}: {v} vs {closed}"
                );
                assert!((closed - hyperbolic_sphere_area(n, r)).abs() < 1e-9 * closed);
            }
        }
    }

    #[test]
    fn sphere_integral_zero_and_linearity() {
        let nbhd = ball(2, 1.0);
        assert_eq!(
            sphere_integral(&nbhd, 0.5, &ScalarField::constant(0.0)).unwrap(),
            0.0
        );
        let q1 = ScalarField::radial("t", |t| t + 1.0);
        let q2 = ScalarField::radial("cos", |t| (1.0 + t.cos()).abs());
        let combo =
            ScalarField::radial("combo", |t| 2.0 * (t + 1.0) + 3.0 * (1.0 + t.cos()).abs());
        let i1 = sphere_integral(&nbhd, 0.4, &q1).unwrap();
        let i2 = sphere_integral(&nbhd, 0.4, &q2).unwrap();
        let ic = sphere_integral(&nbhd, 0.4, &combo).unwrap();
        assert!((ic - (2.0 * i1 + 3.0 * i2)).abs() < 1e-10 * ic.abs());
    }

    #[test]
    fn sphere_integral_rejects_out_of_range_radius() {
        let nbhd = ball(2, 0.5);
        assert!(sphere_integral(&nbhd, 0.6, &ScalarField::constant(1.0)).is_err());
        assert!(sphere_integral(&nbhd, 0.0, &ScalarField::constant(1.0)).is_err());
    }

    #[test]
    fn ball_integral_disk_area_n2() {
        let nbhd = ball(2, 1.0);
        let r0 = 0.8;
        let est = ball_integral_mc(&nbhd, r0, &ScalarField::constant(1.0), 200_000, 42).unwrap();
        let exact = 4.0 * PI * (r0 / 2.0).sinh().powi(2);
        assert!(
            (est.value - exact).abs() < 3.0 * est.stderr.max(1e-6),
            "MC {} vs exact {} (stderr {})",
            est.value,
            exact,
            est.stderr
        );
        let radial = ball_integral_radial(&nbhd, r0, &ScalarField::constant(1.0)).unwrap();
        assert!((radial - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn ball_integral_zero_budget_errors() {
        let nbhd = ball(2, 1.0);
        assert!(ball_integral(&nbhd, 0.5, &ScalarField::constant(1.0), 0, 1).is_err());
    }

    #[test]
    fn ball_integral_monotone_in_radius() {
        let nbhd = ball(2, 1.0);
        let q = ScalarField::radial("lin", |t| t);
        let a = ball_integral_radial(&nbhd, 0.4, &q).unwrap();
        let b = ball_integral_radial(&nbhd, 0.8, &q).unwrap();
        assert!(b > a && a > 0.0);
    }

    #[test]
    fn fubini_sandwich_constant_field_n2() {
        let nbhd = ball(2, 1.0);
        let s = fubini_sandwich(&nbhd, 0.5, &ScalarField::constant(1.0), 100_000, 7).unwrap();
        assert!(
            s.within_bracket,
            "ratio {} not in [{}, {}]",
            s.ratio_euclid, s.bracket_lo, s.bracket_hi
        );
        assert!((s.bracket_lo - 2.0).abs() < 1e-14);
        let rho0 = euclid_radius(0.5);
        assert!((s.bracket_hi - 2.0 / (1.0 - rho0 * rho0)).abs() < 1e-12);
        // coarea: hyperbolic shell equals the volume integral exactly
        let exact_vol = 4.0 * PI * (0.25f64).sinh().powi(2);
        assert!((s.shell_hyper - exact_vol).abs() < 1e-6 * exact_vol);
        assert!((s.ratio_hyper - 1.0).abs() < 0.02);
    }

    #[test]
    fn fubini_sandwich_zero_field() {
        let nbhd = ball(2, 1.0);
        let s = fubini_sandwich(&nbhd, 0.5, &ScalarField::constant(0.0), 10_000, 7).unwrap();
        assert_eq!(s.volume, 0.0);
        assert_eq!(s.shell_euclid, 0.0);
        assert!(s.within_bracket);
    }

    #[test]
    fn shell_integral_of_indicator_reduces_to_subinterval() {
        let nbhd = ball(2, 1.0);
        let (a, b) = (0.3, 0.5);
        let ind = ScalarField::radial("indicator", move |t| {
            if t >= a && t <= b {
                1.0
            } else {
                0.0
            }
        });
        let full = shell_integral(&nbhd, 0.8, &ind, true).unwrap();
        // brute-force radial slice over [a, b] only
        let slice = integrate_adaptive(&|r: f64| hyperbolic_sphere_area(2, r), a, b, 1e-11)
            .finite()
            .unwrap();
        assert!((full - slice).abs() < 1e-5 * slice, "{full} vs {slice}");
    }

    #[test]
    fn ball_derivative_matches_shell_integrand_within_bracket() {
        // d/dr0 of the volume integral against the Euclidean shell
        // integrand: the ratio is the density factor, inside the bracket
        let nbhd = ball(2, 1.5);
        let q = ScalarField::radial("smooth", |t| 1.0 + t * t);
        let r0 = 0.6;
        let h = 1e-4;
        let vp = ball_integral_radial(&nbhd, r0 + h, &q).unwrap();
        let vm = ball_integral_radial(&nbhd, r0 - h, &q).unwrap();
        let dv = (vp - vm) / (2.0 * h);
        let shell_e = sphere_integral_euclid(&nbhd, r0, &q).unwrap();
        let ratio = dv / shell_e;
        let rho0 = euclid_radius(r0);
        let lo = 2.0;
        let hi = 4.0 / (2.0 * (1.0 - rho0 * rho0));
        assert!(
            ratio >= lo - 1e-6 && ratio <= hi + 1e-6,
            "ratio {ratio} not in [{lo}, {hi}]"
        );
    }

    #[test]
    fn q_stats_constant_field() {
        for n in [2usize, 3] {
            let nbhd = ball(n, 1.0);
            let r = 0.5;
            let st = q_stats(&nbhd, r, &ScalarField::constant(1.0)).unwrap();
            let area = hyperbolic_sphere_area(n, r);
            let pw = 1.0 / (n as f64 - 1.0);
            assert!((st.q_norm - area.powf(pw)).abs() < 1e-9 * area.powf(pw));
            // norm identity: 1/q_norm = ω^{-1/(n-1)} / (r · q̃^{1/(n-1)})
            let qt = q_tilde(&nbhd, r, &ScalarField::constant(1.0)).unwrap();
            let lhs = 1.0 / st.q_norm;
            let rhs = 1.0 / (unit_sphere_area(n).powf(pw) * r * qt.powf(pw));
            assert!((lhs - rhs).abs() < 1e-9 * lhs);
        }
    }

    #[test]
    fn q_stats_homogeneity() {
        let nbhd = ball(2, 1.0);
        let q = ScalarField::radial("lin", |t| 1.0 + t);
        let qc = ScalarField::radial("lin3", |t| 3.0 * (1.0 + t));
        let a = q_stats(&nbhd, 0.4, &q).unwrap();
        let b = q_stats(&nbhd, 0.4, &qc).unwrap();
        assert!((b.q_mean - 3.0 * a.q_mean).abs() < 1e-10 * b.q_mean);
        assert!((b.q_norm - 3.0 * a.q_norm).abs() < 1e-10 * b.q_norm);
    }

    #[test]
    fn fmo_constant_is_flat_zero() {
        let nbhd = ball(2, 1.0);
        let rows =
            fmo_profile(&nbhd, &ScalarField::constant(2.5), &[0.4, 0.2, 0.1], 1000, 3).unwrap();
        for r in &rows {
            assert!(r.oscillation.abs() < 1e-12);
        }
        assert!(fmo_bounded_verdict(&rows));
    }

    #[test]
    fn fmo_log_exemplar_is_bounded() {
        let nbhd = ball(2, 1.0);
        let c = 1.0;
        let q = ScalarField::radial("log", move |t| (c / t).ln().max(0.0));
        let eps: Vec<f64> = (0..8).map(|k| 0.4 * 0.5f64.powi(k)).collect();
        let rows = fmo_profile(&nbhd, &q, &eps, 1000, 3).unwrap();
        let vals: Vec<f64> = rows.iter().map(|r| r.oscillation).collect();
        let max = vals.iter().cloned().fold(0.0, f64::max);
        let mut sorted = vals.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        assert!(max <= 2.0 * median, "max {max} vs median {median}");
        assert!(fmo_bounded_verdict(&rows));
    }

    #[test]
    fn fmo_inverse_distance_diverges() {
        let nbhd = ball(2, 1.0);
        let q = ScalarField::radial("inv", |t| 1.0 / t);
        let eps: Vec<f64> = (0..8).map(|k| 0.4 * 0.5f64.powi(k)).collect();
        let rows = fmo_profile(&nbhd, &q, &eps, 1000, 3).unwrap();
        assert!(!fmo_bounded_verdict(&rows));
        // oscillations grow without bound across the list
        assert!(rows.last().unwrap().oscillation > 4.0 * rows[0].oscillation);
    }

    #[test]
    fn fmo_rejects_bad_eps_list() {
        let nbhd = ball(2, 1.0);
        let q = ScalarField::constant(1.0);
        assert!(fmo_profile(&nbhd, &q, &[0.1, 0.2], 100, 0).is_err());
        assert!(fmo_profile(&nbhd, &q, &[1.5, 0.2], 100, 0).is_err());
    }

    #[test]
    fn sphere_area_invariant_under_orbit_translate() {
        use crate::geometry::QuotientPoint;
        use crate::mobius::{DiscreteGroup, MobiusMotion, DEDUP_TOL};
        use std::sync::Arc;
        let g = MobiusMotion::translation(&[0.6, 0.0]).unwrap();
        let group = Arc::new(DiscreteGroup::generate(vec![g], 2, DEDUP_TOL).unwrap());
        let z0 = vec![0.05, 0.1];
        let z1 = group.elements()[1].motion.apply(&z0).unwrap();
        let p0 = QuotientPoint::new(group.clone(), z0).unwrap();
        let p1 = QuotientPoint::new(group.clone(), z1).unwrap();
        let n0 = ChartedNeighborhood::new(p0, 10.0).unwrap();
        let n1 = ChartedNeighborhood::new(p1, 10.0).unwrap();
        let r = 0.9 * n0.radius().min(n1.radius());
        let a0 = sphere_integral(&n0, r, &ScalarField::constant(1.0)).unwrap();
        let a1 = sphere_integral(&n1, r, &ScalarField::constant(1.0)).unwrap();
        assert!((a0 - a1).abs() < 1e-6 * a0);
    }

    #[test]
    fn nonnegative_fields_have_nonnegative_integrals() {
        let nbhd = ball(3, 1.0);
        let q = ScalarField::radial("bump", |t| (1.0 - t).max(0.0));
        assert!(sphere_integral(&nbhd, 0.5, &q).unwrap() >= 0.0);
        assert!(ball_integral_radial(&nbhd, 0.5, &q).unwrap() >= 0.0);
    }

    #[test]
    fn finiteness_audit_on_singular_field() {
        let nbhd = ball(2, 1.0);
        let ok = ScalarField::radial("inv", |t| 1.0 / t);
        // 1/t is finite a.e.; random draws never hit t = 0
        assert!(ok.finiteness_fraction(&nbhd, 2000, 9) < 1e-3);
    }
}
