//! Hyperbolic and quotient metrics, Dirichlet-domain membership, normal
//! neighborhoods and their charts.

use crate::error::{QmodError, Result};
use crate::linalg::{dist, norm};
use crate::mobius::{DiscreteGroup, MobiusMotion};
use crate::linalg::SquareMatrix;
use std::sync::Arc;

/// Cap on the normal radius reported for the trivial group, in hyperbolic
/// units. All desk-scale experiments live well inside it.
pub const TRIVIAL_GROUP_RADIUS_CAP: f64 = 5.0;

/// Euclidean radius of the hyperbolic sphere of radius `t` about the
/// origin: `(e^t - 1)/(e^t + 1) = tanh(t/2)`.
pub fn euclid_radius(t: f64) -> f64 {
    (t / 2.0).tanh()
}

/// Hyperbolic radius of the Euclidean sphere of radius `rho` about the
/// origin: `log((1 + rho)/(1 - rho))`.
pub fn hyper_radius(rho: f64) -> f64 {
    ((1.0 + rho) / (1.0 - rho)).ln()
}

fn check_inside(x: &[f64]) -> Result<()> {
    if norm(x) >= 1.0 {
        return Err(QmodError::domain(format!(
            "point must lie strictly inside the unit ball, |x| = {}",
            norm(x)
        )));
    }
    Ok(())
}

/// Hyperbolic distance on `B^n`:
/// `h(x, y) = log((1+t)/(1-t))`, `t = |x-y| / sqrt(|x-y|² + (1-|x|²)(1-|y|²))`.
pub fn hyp_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_inside(x)?;
    check_inside(y)?;
    let d = dist(x, y);
    if d == 0.0 {
        return Ok(0.0);
    }
    let a = 1.0 - x.iter().map(|v| v * v).sum::<f64>();
    let b = 1.0 - y.iter().map(|v| v * v).sum::<f64>();
    let t = d / (d * d + a * b).sqrt();
    Ok(((1.0 + t) / (1.0 - t)).ln())
}

/// Distance between truncated orbits:
/// minimum of `h(x, g y)` and `h(y, g x)` over the stored elements. An
/// upper bound on the full-group infimum, exact whenever both points lie
/// in a common normal neighborhood.
pub fn quotient_distance(group: &DiscreteGroup, x: &[f64], y: &[f64]) -> Result<f64> {
    check_inside(x)?;
    check_inside(y)?;
    let mut best = f64::INFINITY;
    for e in group.elements() {
        let gy = e.motion.apply(y)?;
        best = best.min(hyp_distance(x, &gy)?);
        let gx = e.motion.apply(x)?;
        best = best.min(hyp_distance(y, &gx)?);
    }
    Ok(best)
}

/// Injectivity radius at `x0` over the truncated enumeration:
/// half the smallest displacement of `x0` by a stored non-identity
/// element, capped at [`TRIVIAL_GROUP_RADIUS_CAP`].
pub fn normal_radius(group: &DiscreteGroup, x0: &[f64]) -> Result<f64> {
    check_inside(x0)?;
    let mut min_move = f64::INFINITY;
    for t in group.nonidentity() {
        let tx = t.apply(x0)?;
        min_move = min_move.min(hyp_distance(x0, &tx)?);
    }
    Ok((0.5 * min_move).min(TRIVIAL_GROUP_RADIUS_CAP))
}

/// Strict Dirichlet-domain membership: `h(x, x0) < h(x, T x0)` for every
/// stored non-identity `T`.
pub fn dirichlet_contains(group: &DiscreteGroup, x0: &[f64], x: &[f64]) -> Result<bool> {
    check_inside(x0)?;
    check_inside(x)?;
    let d0 = hyp_distance(x, x0)?;
    for t in group.nonidentity() {
        let tx0 = t.apply(x0)?;
        if d0 >= hyp_distance(x, &tx0)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Default relative-change threshold for polyline length refinement.
pub const CURVE_REFINEMENT_TOL: f64 = 1e-4;

/// Length of a polyline on the quotient: sum of quotient distances of
/// consecutive vertices, refined by vertex doubling (factor 2 per pass)
/// until the relative change drops below `rel_tol` (default
/// [`CURVE_REFINEMENT_TOL`]). A lower bound of the quotient curve length
/// converging under refinement.
pub fn quotient_polyline_length(
    group: &DiscreteGroup,
    vertices: &[Vec<f64>],
    rel_tol: f64,
) -> Result<f64> {
    if vertices.len() < 2 {
        return Err(QmodError::validation("polyline needs at least 2 vertices"));
    }
    let mut verts: Vec<Vec<f64>> = vertices.to_vec();
    let mut prev = polyline_sum(group, &verts)?;
    for _ in 0..20 {
        let mut refined = Vec::with_capacity(verts.len() * 2);
        for w in verts.windows(2) {
            refined.push(w[0].clone());
            let mid: Vec<f64> = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
            refined.push(mid);
        }
        refined.push(verts.last().unwrap().clone());
        let cur = polyline_sum(group, &refined)?;
        let change = (cur - prev).abs() / cur.max(1e-300);
        verts = refined;
        prev = cur;
        if change < rel_tol {
            break;
        }
    }
    Ok(prev)
}

fn polyline_sum(group: &DiscreteGroup, verts: &[Vec<f64>]) -> Result<f64> {
    let mut s = 0.0;
    for w in verts.windows(2) {
        s += quotient_distance(group, &w[0], &w[1])?;
    }
    Ok(s)
}

/// An orbit of the group action, tagged by a chosen representative.
#[derive(Debug, Clone)]
pub struct QuotientPoint {
    rep: Vec<f64>,
    group: Arc<DiscreteGroup>,
}

impl QuotientPoint {
    pub fn new(group: Arc<DiscreteGroup>, rep: Vec<f64>) -> Result<Self> {
        check_inside(&rep)?;
        if rep.len() != group.dim() && !group.is_trivial() {
            return Err(QmodError::validation("representative dimension mismatch"));
        }
        Ok(QuotientPoint { rep, group })
    }

    pub fn rep(&self) -> &[f64] {
        &self.rep
    }

    pub fn group(&self) -> &Arc<DiscreteGroup> {
        &self.group
    }

    /// Quotient distance to another point of the same quotient.
    pub fn distance(&self, other: &QuotientPoint) -> Result<f64> {
        quotient_distance(&self.group, &self.rep, &other.rep)
    }
}

/// A normal neighborhood of a quotient point together with its chart.
///
/// The chart is the inverse natural projection normalized so the center
/// sits at the origin of the ball model: integrals over the neighborhood
/// become integrals over a centered Euclidean ball of radius
/// `tanh(radius/2)` with hyperbolic densities.
#[derive(Debug, Clone)]
pub struct ChartedNeighborhood {
    center: QuotientPoint,
    radius: f64,
    dim: usize,
    to_origin: MobiusMotion,
}

impl ChartedNeighborhood {
    /// Chart at `center`, shrunk to the normal radius of the truncated
    /// group when the requested radius is larger.
    pub fn new(center: QuotientPoint, requested_radius: f64) -> Result<Self> {
        if requested_radius <= 0.0 {
            return Err(QmodError::validation("neighborhood radius must be positive"));
        }
        let nr = normal_radius(&center.group, &center.rep)?;
        let radius = requested_radius.min(nr);
        let dim = center.rep.len();
        let to_origin = MobiusMotion::make_motion(&center.rep, &SquareMatrix::identity(dim))?;
        Ok(ChartedNeighborhood {
            center,
            radius,
            dim,
            to_origin,
        })
    }

    /// Chart at the origin of the ball under the trivial group.
    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        let group = Arc::new(DiscreteGroup::trivial(dim));
        let center = QuotientPoint::new(group, vec![0.0; dim])?;
        Self::new(center, radius)
    }

    pub fn center(&self) -> &QuotientPoint {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Euclidean radius of the chart ball.
    pub fn euclid_radius(&self) -> f64 {
        euclid_radius(self.radius)
    }

    /// Chart coordinates of a ball point near the center's orbit.
    pub fn chart(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.to_origin.apply(x)
    }

    /// Ball point of a chart coordinate (inverse chart).
    pub fn unchart(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.to_origin.inverse().apply(y)
    }
}
