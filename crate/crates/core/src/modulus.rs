//! Moduli of curve families: the analytic ring baseline, a discrete
//! convex solver with duality certificates, the weighted-infimum identity,
//! extremal radial weights, and the ring inequality they assemble into.
//!
//! The solver minimizes `Σ_i w_i ρ_iⁿ` over cell densities `ρ ≥ 0` subject
//! to one linear constraint per curve, `Σ_i ρ_i ℓ_{i,γ} ≥ 1`, where
//! `ℓ_{i,γ}` is the metric length of curve `γ` inside cell `i`. Dual
//! ascent on the per-curve multipliers recovers the primal in closed form,
//! `ρ_i = (Σ_γ λ_γ ℓ_{i,γ} / (n w_i))^{1/(n-1)}`, and weak duality gives a
//! computable optimality certificate.

use crate::error::{QmodError, Result};
use crate::geometry::{euclid_radius, ChartedNeighborhood};
use crate::linalg::norm;
use crate::measures::{self, ScalarField};
use crate::quad::{integrate_adaptive, IntegralOutcome};
use crate::unit_sphere_area;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Which length/volume densities the discrete program uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Hyperbolic,
}

impl Metric {
    fn length_density(&self, x: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => 1.0,
            Metric::Hyperbolic => 2.0 / (1.0 - x.iter().map(|v| v * v).sum::<f64>()),
        }
    }

    fn volume_density(&self, x: &[f64], n: usize) -> f64 {
        match self {
            Metric::Euclidean => 1.0,
            Metric::Hyperbolic => {
                (2.0 / (1.0 - x.iter().map(|v| v * v).sum::<f64>())).powi(n as i32)
            }
        }
    }
}

/// Exact modulus of the curve family joining the boundary spheres of the
/// spherical ring `r1 < |x| < r2`: `ω_{n-1} (log(r2/r1))^{1-n}`.
pub fn ring_modulus_exact(r1: f64, r2: f64, n: usize) -> Result<f64> {
    if !(r1 > 0.0 && r2 > r1) {
        return Err(QmodError::domain(format!(
            "ring radii must satisfy 0 < r1 < r2, got ({r1}, {r2})"
        )));
    }
    Ok(unit_sphere_area(n) * (r2 / r1).ln().powi(1 - n as i32))
}

/// A family of polyline curves in the chart, tagged with the metric their
/// lengths are measured in.
#[derive(Debug, Clone)]
pub struct CurveFamily {
    curves: Vec<Vec<Vec<f64>>>,
    metric: Metric,
    dim: usize,
}

/// Serialization mirror of [`CurveFamily`]; loading re-validates.
#[derive(serde::Serialize, serde::Deserialize)]
struct CurveFamilyDto {
    metric: String,
    curves: Vec<Vec<Vec<f64>>>,
}

impl CurveFamily {
    pub fn new(curves: Vec<Vec<Vec<f64>>>, metric: Metric) -> Result<Self> {
        let dim = curves
            .first()
            .and_then(|c| c.first())
            .map(|v| v.len())
            .unwrap_or(0);
        for (k, c) in curves.iter().enumerate() {
            if c.len() < 2 {
                return Err(QmodError::validation(format!(
                    "curve {k} has fewer than 2 vertices"
                )));
            }
            let mut len = 0.0;
            for v in c {
                if v.len() != dim {
                    return Err(QmodError::validation("mixed dimensions in curve family"));
                }
                if norm(v) >= 1.0 {
                    return Err(QmodError::validation(format!(
                        "curve {k} leaves the unit ball"
                    )));
                }
            }
            for w in c.windows(2) {
                len += crate::linalg::dist(&w[0], &w[1]);
            }
            if !(len.is_finite() && len > 0.0) {
                return Err(QmodError::validation(format!(
                    "curve {k} has non-positive length"
                )));
            }
        }
        Ok(CurveFamily { curves, metric, dim })
    }

    pub fn empty(dim: usize, metric: Metric) -> Self {
        CurveFamily {
            curves: Vec::new(),
            metric,
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn curves(&self) -> &[Vec<Vec<f64>>] {
        &self.curves
    }

    pub fn to_json(&self) -> String {
        let dto = CurveFamilyDto {
            metric: match self.metric {
                Metric::Euclidean => "euclidean".into(),
                Metric::Hyperbolic => "hyperbolic".into(),
            },
            curves: self.curves.clone(),
        };
        serde_json::to_string(&dto).expect("curve family serializes")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let dto: CurveFamilyDto = serde_json::from_str(json)
            .map_err(|e| QmodError::validation(format!("curve family: {e}")))?;
        let metric = match dto.metric.as_str() {
            "euclidean" => Metric::Euclidean,
            "hyperbolic" => Metric::Hyperbolic,
            other => {
                return Err(QmodError::validation(format!(
                    "unknown metric tag {other:?}"
                )))
            }
        };
        Self::new(dto.curves, metric)
    }
}

/// Uniform Cartesian grid over an axis-aligned chart box.
#[derive(Debug, Clone)]
pub struct GridSpec {
    lo: Vec<f64>,
    hi: Vec<f64>,
    cells_per_axis: usize,
}

/// Hard cap on the total cell count.
pub const MAX_CELLS: usize = 1 << 22;

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, cells_per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(QmodError::validation("grid box dimensions mismatch"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| a >= b) {
            return Err(QmodError::validation("grid box must have positive extent"));
        }
        if cells_per_axis == 0 {
            return Err(QmodError::validation("grid needs at least one cell"));
        }
        let total = (cells_per_axis as f64).powi(lo.len() as i32);
        if total > MAX_CELLS as f64 {
            return Err(QmodError::validation(format!(
                "grid of {cells_per_axis}^{} cells exceeds the cap of 2^22",
                lo.len()
            )));
        }
        Ok(GridSpec {
            lo,
            hi,
            cells_per_axis,
        })
    }

    /// Symmetric cube `[-b, b]^n`.
    pub fn symmetric(dim: usize, half_width: f64, cells_per_axis: usize) -> Result<Self> {
        Self::new(
            vec![-half_width; dim],
            vec![half_width; dim],
            cells_per_axis,
        )
    }

    /// The canonical chart box `[-1, 1]^n` covering the whole ball model.
    ///
    /// Curve families should be gridded here rather than on their snug
    /// bounding box: cell size is then fixed by the chart, and the default
    /// direction counts keep every touched shell densely covered.
    pub fn chart_box(dim: usize, cells_per_axis: usize) -> Result<Self> {
        Self::symmetric(dim, 1.0, cells_per_axis)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn total_cells(&self) -> usize {
        self.cells_per_axis.pow(self.dim() as u32)
    }

    fn step(&self, d: usize) -> f64 {
        (self.hi[d] - self.lo[d]) / self.cells_per_axis as f64
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    fn cell_of(&self, x: &[f64]) -> usize {
        let k = self.cells_per_axis;
        let mut idx = 0usize;
        for (d, xd) in x.iter().enumerate() {
            let mut i = ((xd - self.lo[d]) / self.step(d)).floor() as isize;
            i = i.clamp(0, k as isize - 1);
            idx = idx * k + i as usize;
        }
        idx
    }

    fn cell_midpoint(&self, mut idx: usize) -> Vec<f64> {
        let k = self.cells_per_axis;
        let n = self.dim();
        let mut coords = vec![0usize; n];
        for d in (0..n).rev() {
            coords[d] = idx % k;
            idx /= k;
        }
        (0..n)
            .map(|d| self.lo[d] + (coords[d] as f64 + 0.5) * self.step(d))
            .collect()
    }

    fn cell_volume_euclid(&self) -> f64 {
        (0..self.dim()).map(|d| self.step(d)).product()
    }
}

/// Optimal density on the touched cells of the grid.
#[derive(Debug, Clone)]
pub struct GridField {
    pub grid: GridSpec,
    /// `(global cell index, ρ, hyperbolic-or-euclid cell volume)` for the
    /// cells some curve passes through; untouched cells carry ρ = 0.
    pub cells: Vec<(usize, f64, f64)>,
}

/// Weak-duality certificate emitted by the solver.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SolverCertificate {
    pub objective: f64,
    pub dual_bound: f64,
    pub max_violation: f64,
    pub iterations: usize,
}

/// Solution of the discrete modulus program.
#[derive(Debug, Clone)]
pub struct ModulusSolution {
    pub value: f64,
    pub density: GridField,
    pub duals: Vec<f64>,
    pub certificate: SolverCertificate,
}

impl ModulusSolution {
    /// JSON export: value, certificate block, per-curve duals and the
    /// sparse optimal density.
    pub fn to_json(&self) -> String {
        let cells: Vec<serde_json::Value> = self
            .density
            .cells
            .iter()
            .map(|&(cell, rho, w)| serde_json::json!([cell, rho, w]))
            .collect();
        serde_json::json!({
            "value": self.value,
            "certificate": self.certificate,
            "duals": self.duals,
            "density_cells": cells,
        })
        .to_string()
    }
}

/// Split a segment into per-cell pieces, accumulating metric lengths.
fn accumulate_segment(
    grid: &GridSpec,
    metric: Metric,
    p: &[f64],
    q: &[f64],
    into: &mut BTreeMap<usize, f64>,
) {
    let n = grid.dim();
    let elen = crate::linalg::dist(p, q);
    if elen == 0.0 {
        return;
    }
    // crossing parameters of all grid planes along the segment
    let mut params = vec![0.0f64, 1.0];
    for d in 0..n {
        let dir = q[d] - p[d];
        if dir.abs() < 1e-300 {
            continue;
        }
        let step = grid.step(d);
        let t0 = (p[d] - grid.lo[d]) / step;
        let t1 = (q[d] - grid.lo[d]) / step;
        let (a, b) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
        let first = a.ceil() as i64;
        let last = b.floor() as i64;
        for k in first..=last {
            let t = (grid.lo[d] + k as f64 * step - p[d]) / dir;
            if t > 0.0 && t < 1.0 {
                params.push(t);
            }
        }
    }
    params.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut x = vec![0.0; n];
    for w in params.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        if tb - ta < 1e-15 {
            continue;
        }
        let tm = 0.5 * (ta + tb);
        for d in 0..n {
            x[d] = p[d] + tm * (q[d] - p[d]);
        }
        let cell = grid.cell_of(&x);
        let piece = elen * (tb - ta) * metric.length_density(&x);
        *into.entry(cell).or_insert(0.0) += piece;
    }
}

/// Solve the discrete modulus program.
///
/// `tol` controls both the relative duality gap and the feasibility
/// residual of the returned density. The exponent of the objective is the
/// grid dimension.
pub fn modulus_solve(
    grid: &GridSpec,
    family: &CurveFamily,
    tol: f64,
    max_iter: usize,
) -> Result<ModulusSolution> {
    if tol <= 0.0 {
        return Err(QmodError::validation("solver tolerance must be positive"));
    }
    if family.is_empty() {
        return Ok(ModulusSolution {
            value: 0.0,
            density: GridField {
                grid: grid.clone(),
                cells: Vec::new(),
            },
            duals: Vec::new(),
            certificate: SolverCertificate {
                objective: 0.0,
                dual_bound: 0.0,
                max_violation: 0.0,
                iterations: 0,
            },
        });
    }
    if family.dim() != grid.dim() {
        return Err(QmodError::validation("family and grid dimension mismatch"));
    }
    for (k, c) in family.curves().iter().enumerate() {
        for v in c {
            if !grid.contains(v) {
                return Err(QmodError::validation(format!(
                    "curve {k} leaves the grid box"
                )));
            }
        }
    }
    let n = grid.dim();
    let nf = n as f64;
    let metric = family.metric();

    // per-curve sparse traversal rows over global cells
    let mut global_rows: Vec<BTreeMap<usize, f64>> = Vec::with_capacity(family.len());
    for c in family.curves() {
        let mut row = BTreeMap::new();
        for w in c.windows(2) {
            accumulate_segment(grid, metric, &w[0], &w[1], &mut row);
        }
        global_rows.push(row);
    }

    // compact to touched cells, deterministic ordering by global index
    let mut touched: BTreeMap<usize, usize> = BTreeMap::new();
    for row in &global_rows {
        for &cell in row.keys() {
            let next = touched.len();
            touched.entry(cell).or_insert(next);
        }
    }
    let n_cells = touched.len();
    let mut weights = vec![0.0f64; n_cells];
    let mut global_of = vec![0usize; n_cells];
    let vol_e = grid.cell_volume_euclid();
    for (&cell, &local) in &touched {
        let mid = grid.cell_midpoint(cell);
        weights[local] = vol_e * metric.volume_density(&mid, n);
        global_of[local] = cell;
    }
    let rows: Vec<Vec<(u32, f64)>> = global_rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|(cell, len)| (touched[cell] as u32, *len))
                .collect()
        })
        .collect();
    drop(global_rows);

    let m = rows.len();
    let mut s = vec![0.0f64; n_cells];
    let mut rho = vec![0.0f64; n_cells];
    let mut lak = vec![0.0f64; m];
    let mut lengths = vec![0.0f64; m];

    let recompute =
        |lam: &[f64], s: &mut [f64], rho: &mut [f64], lengths: &mut [f64]| -> (f64, f64, f64) {
            s.iter_mut().for_each(|v| *v = 0.0);
            for (g, row) in rows.iter().enumerate() {
                let l = lam[g];
                if l == 0.0 {
                    continue;
                }
                for &(i, len) in row {
                    s[i as usize] += l * len;
                }
            }
            let mut primal = 0.0;
            for i in 0..n_cells {
                let r = (s[i] / (nf * weights[i])).powf(1.0 / (nf - 1.0));
                rho[i] = r;
                primal += weights[i] * r.powf(nf);
            }
            let mut min_len = f64::INFINITY;
            for (g, row) in rows.iter().enumerate() {
                let mut acc = 0.0;
                for &(i, len) in row {
                    acc += rho[i as usize] * len;
                }
                lengths[g] = acc;
                min_len = min_len.min(acc);
            }
            let dual = lam.iter().sum::<f64>() - (nf - 1.0) * primal;
            (primal, dual, min_len)
        };

    // initial multipliers: uniform level that activates the tightest curve
    let mut lam = vec![1.0f64; m];
    let (_, _, min_len0) = recompute(&lam, &mut s, &mut rho, &mut lengths);
    if min_len0 <= 0.0 {
        return Err(QmodError::numeric(
            "a curve has zero traversal length on the grid",
        ));
    }
    // ρ scales like λ^{1/(n-1)}: rescale so min constraint is active
    let scale = (1.0 / min_len0).powf(nf - 1.0);
    lam.iter_mut().for_each(|v| *v *= scale);
    let (mut primal, mut dual, mut min_len) = recompute(&lam, &mut s, &mut rho, &mut lengths);

    let mut step = 1.0f64;
    let mut iterations = 0usize;
    let mut best = ModulusSolution {
        value: f64::INFINITY,
        density: GridField {
            grid: grid.clone(),
            cells: Vec::new(),
        },
        duals: lam.clone(),
        certificate: SolverCertificate {
            objective: f64::INFINITY,
            dual_bound: dual,
            max_violation: 0.0,
            iterations: 0,
        },
    };
    loop {
        // feasible rescaling of the current primal iterate
        let feas_scale = 1.0 / min_len;
        let obj_feas = primal * feas_scale.powf(nf);
        if obj_feas < best.value {
            best.value = obj_feas;
            best.duals = lam.clone();
            best.certificate = SolverCertificate {
                objective: obj_feas,
                dual_bound: dual,
                max_violation: 0.0,
                iterations,
            };
            best.density.cells = (0..n_cells)
                .map(|i| (global_of[i], rho[i] * feas_scale, weights[i]))
                .collect();
        }
        let gap = best.value - dual.max(0.0);
        if gap <= tol * best.value.max(1e-300) {
            best.certificate.dual_bound = dual.max(best.certificate.dual_bound);
            best.certificate.iterations = iterations;
            return Ok(best);
        }
        if iterations >= max_iter {
            return Err(QmodError::numeric(format!(
                "modulus solver did not converge in {max_iter} iterations: \
                 objective {:.6e}, dual bound {:.6e}, relative gap {:.3e}",
                best.value,
                dual,
                gap / best.value.max(1e-300)
            )));
        }
        iterations += 1;

        // preconditioned projected gradient step on the dual
        for g in 0..m {
            let mut d = 0.0;
            for &(i, len) in &rows[g] {
                let i = i as usize;
                if s[i] > 0.0 {
                    d += len * len * rho[i] / ((nf - 1.0) * s[i]);
                }
            }
            lak[g] = d.max(1e-300);
        }
        let prev_dual = dual;
        let lam_old = lam.clone();
        loop {
            for g in 0..m {
                lam[g] = (lam_old[g] + step * (1.0 - lengths[g]) / lak[g]).max(0.0);
            }
            let (p, dl, ml) = recompute(&lam, &mut s, &mut rho, &mut lengths);
            if dl >= prev_dual - 1e-14 * prev_dual.abs().max(1.0) || step < 1e-12 {
                primal = p;
                dual = dl;
                min_len = ml;
                step = (step * 1.2).min(8.0);
                break;
            }
            step *= 0.5;
        }
    }
}

/// Deterministic low-discrepancy directions: equally spaced on the circle,
/// a Fibonacci lattice on `S²`.
pub fn low_discrepancy_directions(n: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    match n {
        2 => Ok((0..count)
            .map(|k| {
                let theta = std::f64::consts::TAU * (k as f64 + 0.5) / count as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect()),
        3 => Ok((0..count)
            .map(|k| {
                let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                let r = (1.0 - z * z).sqrt();
                let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
                let phi = golden * k as f64 + 0.25;
                vec![r * phi.cos(), r * phi.sin(), z]
            })
            .collect()),
        _ => Err(QmodError::validation(
            "direction sets are provided for n = 2 and n = 3",
        )),
    }
}

/// Radial curve family of the spherical ring `r1 < |x| < r2`: one straight
/// segment per direction.
pub fn radial_ray_family(
    n: usize,
    r1: f64,
    r2: f64,
    directions: usize,
    metric: Metric,
) -> Result<CurveFamily> {
    if !(r1 > 0.0 && r2 > r1 && r2 < 1.0) {
        return Err(QmodError::domain(
            "ring radii must satisfy 0 < r1 < r2 < 1",
        ));
    }
    let dirs = low_discrepancy_directions(n, directions)?;
    let curves = dirs
        .into_iter()
        .map(|u| {
            vec![
                u.iter().map(|v| v * r1).collect::<Vec<f64>>(),
                u.iter().map(|v| v * r2).collect::<Vec<f64>>(),
            ]
        })
        .collect();
    CurveFamily::new(curves, metric)
}

/// Horizontal segments joining the two vertical (length-`b`) sides of the
/// centered `a × b` rectangle.
pub fn rectangle_family(a: f64, b: f64, count: usize) -> Result<CurveFamily> {
    if a <= 0.0 || b <= 0.0 || (a * a + b * b).sqrt() >= 2.0 {
        return Err(QmodError::domain("rectangle must fit inside the unit ball"));
    }
    let curves = (0..count)
        .map(|k| {
            let y = -b / 2.0 + b * (k as f64 + 0.5) / count as f64;
            vec![vec![-a / 2.0, y], vec![a / 2.0, y]]
        })
        .collect();
    CurveFamily::new(curves, Metric::Euclidean)
}

/// A finite measure space with positive atom weights and a positive
/// integrand, for the weighted-infimum identity.
#[derive(Debug, Clone)]
pub struct DiscreteMeasureSpace {
    weights: Vec<f64>,
    phi: Vec<f64>,
}

impl DiscreteMeasureSpace {
    pub fn new(weights: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != phi.len() {
            return Err(QmodError::validation(
                "measure space needs matching nonempty weights and values",
            ));
        }
        let bad = |v: &f64| v.is_nan() || *v <= 0.0 || !v.is_finite();
        if weights.iter().any(bad) || phi.iter().any(bad)
        {
            return Err(QmodError::validation(
                "weights and φ must be positive and finite",
            ));
        }
        Ok(DiscreteMeasureSpace { weights, phi })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Objective `Σ μ_i φ_i α_i^q`.
    pub fn objective(&self, alpha: &[f64], q: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.phi)
            .zip(alpha)
            .map(|((mu, phi), a)| mu * phi * a.powf(q))
            .sum()
    }

    /// Constraint functional `Σ μ_i α_i`.
    pub fn mass(&self, alpha: &[f64]) -> f64 {
        self.weights.iter().zip(alpha).map(|(mu, a)| mu * a).sum()
    }
}

/// Closed form of the weighted infimum together with its extremizer.
#[derive(Debug, Clone)]
pub struct WeightedInf {
    /// `[Σ μ_i φ_i^{-λ}]^{-1/λ}`, `λ = 1/(q-1)`.
    pub value: f64,
    /// The minimizing `α`: `φ^{-λ}` normalized to unit mass.
    pub alpha_star: Vec<f64>,
    /// Objective evaluated at `alpha_star`.
    pub attained: f64,
}

/// Infimum of `Σ μ φ αᵠ` over `α ≥ 0` with `Σ μ α = 1`.
pub fn weighted_inf_integral(space: &DiscreteMeasureSpace, q: f64) -> Result<WeightedInf> {
    if q <= 1.0 {
        return Err(QmodError::domain("weighted infimum requires q > 1"));
    }
    let lambda = 1.0 / (q - 1.0);
    let z: f64 = space
        .weights()
        .iter()
        .zip(space.phi())
        .map(|(mu, phi)| mu * phi.powf(-lambda))
        .sum();
    let value = z.powf(-1.0 / lambda);
    let alpha_star: Vec<f64> = space.phi().iter().map(|phi| phi.powf(-lambda) / z).collect();
    let attained = space.objective(&alpha_star, q);
    Ok(WeightedInf {
        value,
        alpha_star,
        attained,
    })
}

/// Independent minimizer for the same program: multilevel lattice search
/// over the constraint simplex in mass coordinates `c_i = μ_i α_i`,
/// followed by pairwise-exchange refinement with a shrinking step. Used as
/// the oracle the closed form is checked against; it never touches the
/// Lagrange formula.
pub fn simplex_grid_oracle(space: &DiscreteMeasureSpace, q: f64, levels: usize) -> f64 {
    let k = space.len();
    let eval = |c: &[f64]| -> f64 {
        c.iter()
            .zip(space.weights())
            .zip(space.phi())
            .map(|((ci, mu), phi)| mu * phi * (ci / mu).powf(q))
            .sum()
    };
    // coarse exhaustive lattice: compositions of `parts` among k atoms
    let parts = 6usize;
    let mut best_c = vec![0.0; k];
    let mut best = f64::INFINITY;
    let mut comp = vec![0usize; k];
    fn rec(
        i: usize,
        left: usize,
        comp: &mut [usize],
        parts: usize,
        eval: &dyn Fn(&[f64]) -> f64,
        best: &mut f64,
        best_c: &mut [f64],
    ) {
        let k = comp.len();
        if i == k - 1 {
            comp[i] = left;
            let c: Vec<f64> = comp.iter().map(|&x| x as f64 / parts as f64).collect();
            let v = eval(&c);
            if v < *best {
                *best = v;
                best_c.copy_from_slice(&c);
            }
            return;
        }
        for x in 0..=left {
            comp[i] = x;
            rec(i + 1, left - x, comp, parts, eval, best, best_c);
        }
    }
    rec(0, parts, &mut comp, parts, &eval, &mut best, &mut best_c);
    // pairwise mass exchanges with halving step
    let mut delta = 1.0 / parts as f64;
    for _ in 0..levels {
        loop {
            let mut improved = false;
            for i in 0..k {
                for j in 0..k {
                    // best_c mutates inside this loop: re-check the donor
                    if i == j || best_c[i] < delta {
                        continue;
                    }
                    let mut c = best_c.clone();
                    c[i] -= delta;
                    c[j] += delta;
                    let v = eval(&c);
                    if v < best - 1e-300 {
                        best = v;
                        best_c = c;
                        improved = true;
                    }
                }
            }
            if !improved {
                break;
            }
        }
        delta *= 0.5;
    }
    best
}

/// Extremal radial weight `η₀` built from a spherical-mean profile.
pub struct Eta0Weight {
    /// `I = ∫_{r1}^{r2} dr / (r q^{1/(n-1)}(r))`, or divergent.
    pub integral: IntegralOutcome,
    n: usize,
    r1: f64,
    r2: f64,
    profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Eta0Weight {
    /// The weight `η₀(r) = 1/(I · r · q^{1/(n-1)}(r))`; identically zero in
    /// the degenerate case `I = ∞`.
    pub fn eta0(&self, r: f64) -> f64 {
        match self.integral {
            IntegralOutcome::Finite(i) => {
                if r <= self.r1 || r >= self.r2 {
                    0.0
                } else {
                    let q = (self.profile)(r);
                    1.0 / (i * r * q.powf(1.0 / (self.n as f64 - 1.0)))
                }
            }
            IntegralOutcome::Divergent => 0.0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.integral.is_divergent()
    }
}

/// Build the extremal weight for a spherical-mean profile `q(r)` on
/// `(r1, r2)`: computes `I` by adaptive quadrature (flagging divergence)
/// and returns the normalized weight.
pub fn eta0_weight(
    q_profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    n: usize,
    r1: f64,
    r2: f64,
) -> Result<Eta0Weight> {
    if !(r1 >= 0.0 && r2 > r1) {
        return Err(QmodError::domain("weight interval must satisfy 0 <= r1 < r2"));
    }
    let p = q_profile.clone();
    let pw = 1.0 / (n as f64 - 1.0);
    let integrand = move |r: f64| {
        if r <= 0.0 {
            return f64::INFINITY;
        }
        let q = p(r);
        1.0 / (r * q.powf(pw))
    };
    let integral = integrate_adaptive(&integrand, r1.max(1e-300), r2, 1e-10);
    if let IntegralOutcome::Finite(i) = integral {
        if i <= 0.0 {
            return Err(QmodError::validation(
                "profile integrates to zero: q is not a valid spherical mean",
            ));
        }
    }
    Ok(Eta0Weight {
        integral,
        n,
        r1,
        r2,
        profile: q_profile,
    })
}

/// The two algebraically equal routes to the reduced lower bound.
#[derive(Debug, Clone, Copy)]
pub struct LowerBoundIntegral {
    /// `∫_ε^{ε₀} dr / ‖Q‖_{n-1}(r)`; `+∞` when the norm profile vanishes
    /// somewhere (the bound is then trivially true).
    pub value: f64,
    /// Same integral through the norm identity:
    /// `ω^{-1/(n-1)} ∫ dr / (r q̃^{1/(n-1)}(r))`.
    pub via_identity: f64,
    pub rel_residual: f64,
}

/// Reduced sphere-family lower bound between radii `eps < eps0`.
pub fn lower_bound_integral(
    nbhd: &ChartedNeighborhood,
    q: &ScalarField,
    eps: f64,
    eps0: f64,
) -> Result<LowerBoundIntegral> {
    if !(eps > 0.0 && eps < eps0 && eps0 <= nbhd.radius()) {
        return Err(QmodError::domain(
            "radii must satisfy 0 < eps < eps0 <= neighborhood radius",
        ));
    }
    let n = nbhd.dim();
    let pw = 1.0 / (n as f64 - 1.0);
    let f_norm = |r: f64| {
        let st = measures::q_stats(nbhd, r, q).expect("radius inside the neighborhood");
        1.0 / st.q_norm
    };
    let direct = integrate_adaptive(&f_norm, eps, eps0, 1e-9);
    let f_ident = |r: f64| {
        let qt = measures::q_tilde(nbhd, r, q).expect("radius inside the neighborhood");
        1.0 / (r * qt.powf(pw))
    };
    let ident = integrate_adaptive(&f_ident, eps, eps0, 1e-9);
    match (direct, ident) {
        (IntegralOutcome::Finite(v), IntegralOutcome::Finite(w)) => {
            let via_identity = w / unit_sphere_area(n).powf(pw);
            let rel = (v - via_identity).abs() / v.abs().max(1e-300);
            Ok(LowerBoundIntegral {
                value: v,
                via_identity,
                rel_residual: rel,
            })
        }
        _ => Ok(LowerBoundIntegral {
            value: f64::INFINITY,
            via_identity: f64::INFINITY,
            rel_residual: 0.0,
        }),
    }
}

/// Verdict of the radial divergence criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum DivergenceVerdict {
    Divergent,
    Convergent,
}

/// Tail integrals of the divergence criterion.
#[derive(Debug, Clone)]
pub struct DivergenceProfile {
    /// `(ε, I(ε) = ∫_ε^{ε₀} dr/(r q^{1/(n-1)}(r)))`, ε decreasing.
    pub rows: Vec<(f64, f64)>,
    /// Growth of `I` per unit of `log(1/ε)` over the last step.
    pub last_slope: f64,
    pub verdict: DivergenceVerdict,
}

/// Slope threshold (in `log(1/ε)`) below which the tail is declared
/// convergent.
pub const DIVERGENCE_SLOPE_TOL: f64 = 0.01;

/// Evaluate `I(ε)` along a decreasing schedule and classify the tail:
/// divergent when `I` keeps growing with slope at least
/// [`DIVERGENCE_SLOPE_TOL`] in `log(1/ε)`.
pub fn divergence_profile(
    nbhd: &ChartedNeighborhood,
    q: &ScalarField,
    eps0: f64,
    eps_list: &[f64],
) -> Result<DivergenceProfile> {
    if eps_list.is_empty() {
        return Err(QmodError::validation("eps_list must be nonempty"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(QmodError::validation("eps_list must be strictly decreasing"));
    }
    if eps_list[0] >= eps0 || *eps_list.last().unwrap() <= 0.0 || eps0 > nbhd.radius() {
        return Err(QmodError::domain(
            "schedule must satisfy 0 < eps < eps0 <= neighborhood radius",
        ));
    }
    let n = nbhd.dim();
    let pw = 1.0 / (n as f64 - 1.0);
    let integrand = |r: f64| {
        let qm = measures::q_stats(nbhd, r, q)
            .expect("radius inside the neighborhood")
            .q_mean;
        1.0 / (r * qm.powf(pw))
    };
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut upper = eps0;
    let mut acc = 0.0;
    for &eps in eps_list {
        let piece = integrate_adaptive(&integrand, eps, upper, 1e-10)
            .finite()
            .ok_or_else(|| QmodError::numeric("tail integral diverged inside a segment"))?;
        acc += piece;
        rows.push((eps, acc));
        upper = eps;
    }
    let last_slope = if rows.len() >= 2 {
        let (e1, i1) = rows[rows.len() - 2];
        let (e2, i2) = rows[rows.len() - 1];
        (i2 - i1) / ((1.0 / e2).ln() - (1.0 / e1).ln())
    } else {
        let (e, i) = rows[0];
        i / ((1.0 / e).ln() - (1.0 / eps0).ln()).max(1e-300)
    };
    let verdict = if last_slope >= DIVERGENCE_SLOPE_TOL {
        DivergenceVerdict::Divergent
    } else {
        DivergenceVerdict::Convergent
    };
    Ok(DivergenceProfile {
        rows,
        last_slope,
        verdict,
    })
}

/// Parameters of the discretized ring solve.
#[derive(Debug, Clone, Copy)]
pub struct RingSolveParams {
    pub directions: usize,
    pub cells_per_axis: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Vertices per image curve (radial sampling resolution of the map).
    pub samples_per_curve: usize,
    /// Monte Carlo budget used for the empirical neighborhood constants.
    pub budget: usize,
    pub seed: u64,
}

impl RingSolveParams {
    pub fn defaults(n: usize) -> Self {
        RingSolveParams {
            directions: if n == 2 { 512 } else { 2048 },
            cells_per_axis: if n == 2 { 256 } else { 48 },
            tol: 1e-6,
            max_iter: 50_000,
            samples_per_curve: 48,
            budget: measures::DEFAULT_MC_BUDGET,
            seed: 17,
        }
    }

    /// Parameters matched to a ring with Euclidean outer radius `rho2`:
    /// the direction count targets slightly-sparse coverage of the outer
    /// shell, so the discretized sub-family keeps the solver value at or
    /// below the continuum modulus (the regime the inequality checks
    /// assume), while the cell size stays well below the inner radius.
    pub fn matched(n: usize, rho2: f64) -> Self {
        let mut p = Self::defaults(n);
        let h = 2.0 / p.cells_per_axis as f64;
        let dirs = match n {
            2 => 0.85 * std::f64::consts::TAU * rho2 / (1.27 * h),
            _ => 0.6 * 4.0 * std::f64::consts::PI * rho2 * rho2 / (1.6 * h * h),
        };
        p.directions = (dirs as usize).clamp(64, 4096);
        p
    }
}

/// Everything the ring inequality run reports.
#[derive(Debug, Clone)]
pub struct RingInequalityReport {
    /// Discrete modulus of the image of the ring's radial family.
    pub lhs_modulus: f64,
    /// `∫_Ã Q ηⁿ(h̃(p, p₀)) dṽ`.
    pub rhs_integral: f64,
    pub holds: bool,
    pub margin: f64,
    pub eta_integral: f64,
    /// `ω_{n-1} / I^{n-1}`.
    pub omega_over_i: f64,
    /// `∫_Ã Q η₀ⁿ dṽ`.
    pub int_q_eta0: f64,
    /// `∫_Ã Q ηⁿ dṽ` (same as `rhs_integral`).
    pub int_q_eta: f64,
    pub m1_hat: f64,
    pub m2_hat: f64,
    /// `ω/I^{n-1} ≤ M̂₁ ∫Qη₀ⁿ ≤ M̂₂ ∫Qηⁿ`.
    pub sandwich_ok: bool,
    pub certificate: SolverCertificate,
}

/// Empirical neighborhood constants: extreme ratios of the volume
/// integral to the hyperbolic shell integral over a field battery,
/// measured through independent numerical routes (radial quadrature or
/// Monte Carlo against the shell quadrature).
pub fn empirical_fubini_constants(
    nbhd: &ChartedNeighborhood,
    r0: f64,
    battery: &[ScalarField],
    budget: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (k, q) in battery.iter().enumerate() {
        let shell = measures::shell_integral(nbhd, r0, q, true)?;
        if shell <= 0.0 {
            continue;
        }
        if q.radial_profile().is_some() {
            let v = measures::ball_integral_radial(nbhd, r0, q)?;
            lo = lo.min(v / shell);
            hi = hi.max(v / shell);
        }
        let mc = measures::ball_integral_mc(nbhd, r0, q, budget, seed.wrapping_add(k as u64))?;
        lo = lo.min(mc.value / shell);
        hi = hi.max(mc.value / shell);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(QmodError::numeric(
            "empirical constants need a nonzero battery",
        ));
    }
    Ok((lo, hi))
}

/// Run the ring inequality for a map of the charted ring: discretize the
/// image of the radial family, solve its modulus, and compare with the
/// weighted volume integral. Also evaluates the extremal-weight sandwich
/// with empirical neighborhood constants.
pub fn ring_inequality_check(
    nbhd: &ChartedNeighborhood,
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    q: &ScalarField,
    r1: f64,
    r2: f64,
    eta: &dyn Fn(f64) -> f64,
    params: &RingSolveParams,
) -> Result<RingInequalityReport> {
    if !(r1 > 0.0 && r1 < r2 && r2 <= nbhd.radius()) {
        return Err(QmodError::domain(
            "ring radii must satisfy 0 < r1 < r2 <= neighborhood radius",
        ));
    }
    let n = nbhd.dim();
    let nf = n as f64;
    // admissibility of the test weight
    let eta_integral = integrate_adaptive(&|r: f64| eta(r).max(0.0), r1, r2, 1e-10)
        .finite()
        .ok_or_else(|| QmodError::validation("η is not integrable on (r1, r2)"))?;
    if eta_integral < 1.0 - 1e-6 {
        return Err(QmodError::validation(format!(
            "η must integrate to at least 1 over (r1, r2); got {eta_integral:.6}"
        )));
    }

    // image of the radial family under the map
    let dirs = low_discrepancy_directions(n, params.directions)?;
    let s = params.samples_per_curve.max(2);
    let mut curves = Vec::with_capacity(dirs.len());
    for u in &dirs {
        let mut poly = Vec::with_capacity(s);
        for j in 0..s {
            let t = r1 + (r2 - r1) * j as f64 / (s - 1) as f64;
            let rho = euclid_radius(t);
            let x: Vec<f64> = u.iter().map(|v| v * rho).collect();
            poly.push(map(&x));
        }
        curves.push(poly);
    }
    let family = CurveFamily::new(curves, Metric::Hyperbolic)?;
    let grid = GridSpec::chart_box(n, params.cells_per_axis)?;
    let sol = modulus_solve(&grid, &family, params.tol, params.max_iter)?;

    // weighted volume integrals over the ring, by shell factorization
    let weighted = |w: &dyn Fn(f64) -> f64| -> Result<f64> {
        let f = |r: f64| {
            let sphere = measures::sphere_integral(nbhd, r, q).expect("radius inside ring");
            w(r).max(0.0).powf(nf) * sphere
        };
        integrate_adaptive(&f, r1, r2, 1e-10)
            .finite()
            .ok_or_else(|| QmodError::numeric("weighted ring integral diverged"))
    };
    let rhs_integral = weighted(&|r| eta(r))?;

    // extremal weight from the spherical-mean profile of Q
    let nb = nbhd.clone();
    let qf = q.clone();
    let profile: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |r: f64| {
        measures::q_stats(&nb, r, &qf)
            .expect("radius inside ring")
            .q_mean
    });
    let w0 = eta0_weight(profile, n, r1, r2)?;
    let (omega_over_i, int_q_eta0) = match w0.integral {
        IntegralOutcome::Finite(i) => {
            let v = weighted(&|r| w0.eta0(r))?;
            (unit_sphere_area(n) / i.powf(nf - 1.0), v)
        }
        IntegralOutcome::Divergent => (0.0, 0.0),
    };

    let battery = [ScalarField::constant(1.0), q.clone()];
    let (c2_hat, c1_hat) =
        empirical_fubini_constants(nbhd, r2, &battery, params.budget, params.seed)?;
    let m1_hat = 1.0 / c2_hat;
    let m2_hat = c1_hat / (c2_hat * c2_hat);
    // float slack for quadrature-computed quantities that agree exactly
    // in the analytic limit
    let slack = 1e-6;
    let sandwich_ok = omega_over_i <= m1_hat * int_q_eta0 * (1.0 + slack)
        && m1_hat * int_q_eta0 <= m2_hat * rhs_integral * (1.0 + slack);

    Ok(RingInequalityReport {
        lhs_modulus: sol.value,
        rhs_integral,
        holds: sol.value <= rhs_integral,
        margin: rhs_integral - sol.value,
        eta_integral,
        omega_over_i,
        int_q_eta0,
        int_q_eta: rhs_integral,
        m1_hat,
        m2_hat,
        sandwich_ok,
        certificate: sol.certificate,
    })
}
