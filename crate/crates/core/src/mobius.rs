//! Möbius automorphisms of the unit ball and finitely generated discrete
//! groups acting on it.
//!
//! Motions are stored in the hyperboloid (Lorentz) model: an
//! orientation-preserving matrix `L` of order `n+1` with `Lᵀ J L = J`,
//! `J = diag(1, …, 1, -1)` (time coordinate last). Composition is then an
//! exact matrix product; ball-model evaluation converts
//! point → hyperboloid → act → ball.

use crate::error::{QmodError, Result};
use crate::linalg::{norm, SquareMatrix};
use serde::{Deserialize, Serialize};

/// Tolerance for the Lorentz-form invariant `Lᵀ J L = J`.
pub const LORENTZ_TOL: f64 = 1e-10;

/// Matrix max-norm separation below which two group elements are
/// considered equal during enumeration.
pub const DEDUP_TOL: f64 = 1e-9;

/// Compositions allowed before the Lorentz frame is re-orthonormalized.
const RENORM_PERIOD: u32 = 32;

/// Lift a ball point to the upper hyperboloid sheet.
pub fn ball_to_hyperboloid(x: &[f64]) -> Vec<f64> {
    let r2 = x.iter().map(|v| v * v).sum::<f64>();
    let s = 1.0 - r2;
    let mut out = Vec::with_capacity(x.len() + 1);
    for v in x {
        out.push(2.0 * v / s);
    }
    out.push((1.0 + r2) / s);
    out
}

/// Project a hyperboloid point back to the ball model.
pub fn hyperboloid_to_ball(xi: &[f64]) -> Vec<f64> {
    let n = xi.len() - 1;
    let t = xi[n];
    xi[..n].iter().map(|v| v / (1.0 + t)).collect()
}

/// A conformal automorphism of `B^n` in Lorentz form.
#[derive(Debug, Clone)]
pub struct MobiusMotion {
    dim: usize,
    lorentz: SquareMatrix,
    /// Compositions absorbed since the last re-orthonormalization.
    comps: u32,
}

impl MobiusMotion {
    pub fn identity(dim: usize) -> Self {
        MobiusMotion {
            dim,
            lorentz: SquareMatrix::identity(dim + 1),
            comps: 0,
        }
    }

    /// Motion from a Lorentz matrix; validates the form residual.
    pub fn from_lorentz(dim: usize, lorentz: SquareMatrix) -> Result<Self> {
        if lorentz.order() != dim + 1 {
            return Err(QmodError::validation("Lorentz matrix order must be n+1"));
        }
        let m = MobiusMotion {
            dim,
            lorentz,
            comps: 0,
        };
        let res = m.lorentz_residual();
        if res > LORENTZ_TOL {
            return Err(QmodError::validation(format!(
                "matrix violates the Lorentz form: residual {res:.3e}"
            )));
        }
        if m.lorentz.get(dim, dim) <= 0.0 {
            return Err(QmodError::validation(
                "matrix must preserve the upper hyperboloid sheet",
            ));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lorentz_matrix(&self) -> &SquareMatrix {
        &self.lorentz
    }

    /// Pure hyperbolic translation: maps `a` to the origin and `0` to `-a`
    /// (the standard ball automorphism σ_a as a Lorentz boost).
    pub fn translation(a: &[f64]) -> Result<Self> {
        let dim = a.len();
        let r = norm(a);
        if r >= 1.0 {
            return Err(QmodError::domain(format!(
                "translation base point must lie inside the unit ball, |a| = {r}"
            )));
        }
        if r == 0.0 {
            return Ok(Self::identity(dim));
        }
        // Boost of rapidity -ξ along a/|a| with ξ = log((1+|a|)/(1-|a|)).
        let xi = ((1.0 + r) / (1.0 - r)).ln();
        let (sh, ch) = (-xi.sinh(), xi.cosh());
        let u: Vec<f64> = a.iter().map(|v| v / r).collect();
        let mut l = SquareMatrix::identity(dim + 1);
        for i in 0..dim {
            for j in 0..dim {
                let add = (ch - 1.0) * u[i] * u[j];
                l.set(i, j, l.get(i, j) + add);
            }
            l.set(i, dim, sh * u[i]);
            l.set(dim, i, sh * u[i]);
        }
        l.set(dim, dim, ch);
        Ok(MobiusMotion {
            dim,
            lorentz: l,
            comps: 0,
        })
    }

    /// Rotation about the origin by an orthogonal matrix with `det R = 1`.
    pub fn rotation(r: &SquareMatrix) -> Result<Self> {
        let dim = r.order();
        let res = r.orthogonality_residual();
        if res > LORENTZ_TOL {
            return Err(QmodError::validation(format!(
                "rotation block is not orthogonal: residual {res:.3e}"
            )));
        }
        if r.det() < 0.0 {
            return Err(QmodError::validation(
                "rotation block must be orientation-preserving (det = +1)",
            ));
        }
        let mut l = SquareMatrix::identity(dim + 1);
        for i in 0..dim {
            for j in 0..dim {
                l.set(i, j, r.get(i, j));
            }
        }
        Ok(MobiusMotion {
            dim,
            lorentz: l,
            comps: 0,
        })
    }

    /// General motion `R ∘ σ_a`: sends `a` to the origin, then rotates.
    pub fn make_motion(a: &[f64], r: &SquareMatrix) -> Result<Self> {
        if r.order() != a.len() {
            return Err(QmodError::validation(
                "rotation block order must match the dimension of a",
            ));
        }
        let rot = Self::rotation(r)?;
        let tr = Self::translation(a)?;
        Ok(rot.compose(&tr))
    }

    /// Evaluate the motion at a ball point.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(QmodError::validation("point dimension mismatch"));
        }
        let r = norm(x);
        if r >= 1.0 {
            return Err(QmodError::domain(format!(
                "point must lie inside the unit ball, |x| = {r}"
            )));
        }
        let xi = ball_to_hyperboloid(x);
        let eta = self.lorentz.mul_vec(&xi);
        Ok(hyperboloid_to_ball(&eta))
    }

    /// Matrix-product composition: `(self ∘ other)(x) = self(other(x))`.
    ///
    /// The Lorentz frame is re-orthonormalized every [`RENORM_PERIOD`]
    /// compositions to keep the form residual bounded along long chains.
    pub fn compose(&self, other: &MobiusMotion) -> MobiusMotion {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut m = MobiusMotion {
            dim: self.dim,
            lorentz: self.lorentz.mul(&other.lorentz),
            comps: self.comps + other.comps + 1,
        };
        if m.comps >= RENORM_PERIOD {
            m.renormalize();
        }
        m
    }

    /// Inverse via the Lorentz-group identity `L⁻¹ = J Lᵀ J`.
    pub fn inverse(&self) -> MobiusMotion {
        let np1 = self.dim + 1;
        let lt = self.lorentz.transpose();
        let mut inv = SquareMatrix::zeros(np1);
        for i in 0..np1 {
            for j in 0..np1 {
                let sign = if (i == self.dim) ^ (j == self.dim) {
                    -1.0
                } else {
                    1.0
                };
                inv.set(i, j, sign * lt.get(i, j));
            }
        }
        MobiusMotion {
            dim: self.dim,
            lorentz: inv,
            comps: self.comps,
        }
    }

    /// Max-norm residual of `Lᵀ J L - J`.
    pub fn lorentz_residual(&self) -> f64 {
        let np1 = self.dim + 1;
        let mut j = SquareMatrix::identity(np1);
        j.set(self.dim, self.dim, -1.0);
        let ltjl = self.lorentz.transpose().mul(&j).mul(&self.lorentz);
        ltjl.max_norm_distance(&j)
    }

    /// Gram–Schmidt against the Lorentz form: restores `Lᵀ J L = J` to
    /// machine precision after float drift.
    pub fn renormalize(&mut self) {
        let n = self.dim;
        let np1 = n + 1;
        let jdot = |a: &[f64], b: &[f64]| -> f64 {
            let mut s = 0.0;
            for k in 0..n {
                s += a[k] * b[k];
            }
            s - a[n] * b[n]
        };
        let mut cols: Vec<Vec<f64>> = (0..np1)
            .map(|c| (0..np1).map(|r| self.lorentz.get(r, c)).collect())
            .collect();
        // Time column first: it carries the -1 normalization.
        let tnorm = (-jdot(&cols[n], &cols[n])).sqrt();
        for v in cols[n].iter_mut() {
            *v /= tnorm;
        }
        for i in 0..n {
            let (head, tail) = cols.split_at_mut(n);
            let t = &tail[0];
            let proj = jdot(&head[i], t);
            for k in 0..np1 {
                head[i][k] += proj * t[k];
            }
            for j in 0..i {
                let (a, b) = head.split_at_mut(i);
                let p = jdot(&b[0], &a[j]);
                for k in 0..np1 {
                    b[0][k] -= p * a[j][k];
                }
            }
            let snorm = jdot(&cols[i], &cols[i]).sqrt();
            for v in cols[i].iter_mut() {
                *v /= snorm;
            }
        }
        for (c, col) in cols.iter().enumerate() {
            for (r, v) in col.iter().enumerate() {
                self.lorentz.set(r, c, *v);
            }
        }
        self.comps = 0;
    }

    /// Entry-wise closeness of the underlying Lorentz matrices.
    pub fn is_close(&self, other: &MobiusMotion, tol: f64) -> bool {
        self.lorentz.max_norm_distance(&other.lorentz) <= tol
    }
}

/// One enumerated group element: reduced word over the generators
/// (1-based indices, negative for inverses) and its motion.
#[derive(Debug, Clone)]
pub struct GroupElement {
    pub word: Vec<i32>,
    pub motion: MobiusMotion,
}

/// A finitely generated discrete Möbius group, enumerated to a word-length
/// depth with proximity dedup.
///
/// The identity is always element 0 with the empty word. The trivial group
/// (`generators = []`) models a quotient that is the ball itself.
#[derive(Debug, Clone)]
pub struct DiscreteGroup {
    dim: usize,
    generators: Vec<MobiusMotion>,
    elements: Vec<GroupElement>,
    depth: usize,
    dedup_tol: f64,
}

impl DiscreteGroup {
    /// The trivial group on `B^n`.
    pub fn trivial(dim: usize) -> Self {
        DiscreteGroup {
            dim,
            generators: Vec::new(),
            elements: vec![GroupElement {
                word: Vec::new(),
                motion: MobiusMotion::identity(dim),
            }],
            depth: 0,
            dedup_tol: DEDUP_TOL,
        }
    }

    /// Enumerate all reduced words of length at most `depth` over the
    /// generators and their inverses, deduplicated by matrix proximity.
    pub fn generate(generators: Vec<MobiusMotion>, depth: usize, dedup_tol: f64) -> Result<Self> {
        let dim = match generators.first() {
            Some(g) => g.dim(),
            None => {
                return Ok(DiscreteGroup {
                    dim: 0,
                    generators,
                    elements: vec![GroupElement {
                        word: Vec::new(),
                        motion: MobiusMotion::identity(0),
                    }],
                    depth,
                    dedup_tol,
                })
            }
        };
        if generators.iter().any(|g| g.dim() != dim) {
            return Err(QmodError::validation("generators must share one dimension"));
        }
        for (i, g) in generators.iter().enumerate() {
            let res = g.lorentz_residual();
            if res > LORENTZ_TOL {
                return Err(QmodError::validation(format!(
                    "generator {i} violates the Lorentz form: residual {res:.3e}"
                )));
            }
        }
        // Alphabet: +(i+1) for generator i, -(i+1) for its inverse.
        let mut alphabet: Vec<(i32, MobiusMotion)> = Vec::new();
        for (i, g) in generators.iter().enumerate() {
            alphabet.push((i as i32 + 1, g.clone()));
            alphabet.push((-(i as i32 + 1), g.inverse()));
        }
        let mut elements = vec![GroupElement {
            word: Vec::new(),
            motion: MobiusMotion::identity(dim),
        }];
        let mut frontier: Vec<usize> = vec![0];
        for _level in 0..depth {
            let mut next = Vec::new();
            for &idx in &frontier {
                let base_word = elements[idx].word.clone();
                let base = elements[idx].motion.clone();
                for (letter, gen) in &alphabet {
                    // Skip immediate cancellation: word stays reduced.
                    if base_word.last() == Some(&-letter) {
                        continue;
                    }
                    let cand = gen.compose(&base);
                    if elements
                        .iter()
                        .any(|e| e.motion.is_close(&cand, dedup_tol))
                    {
                        continue;
                    }
                    let mut word = base_word.clone();
                    word.push(*letter);
                    next.push(elements.len());
                    elements.push(GroupElement { word, motion: cand });
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        Ok(DiscreteGroup {
            dim,
            generators,
            elements,
            depth,
            dedup_tol,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dedup_tolerance(&self) -> f64 {
        self.dedup_tol
    }

    pub fn generators(&self) -> &[MobiusMotion] {
        &self.generators
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    /// Stored non-identity motions.
    pub fn nonidentity(&self) -> impl Iterator<Item = &MobiusMotion> {
        self.elements.iter().skip(1).map(|e| &e.motion)
    }
}

/// Per-sample outcome of the group-action audit.
#[derive(Debug, Clone, Serialize)]
pub struct SampleAudit {
    pub point: Vec<f64>,
    /// Smallest displacement `h(x, Tx)` over stored non-identity elements
    /// (infinite for the trivial group).
    pub min_nonidentity_move: f64,
    pub fixed_point_free: bool,
    /// Stored non-identity elements with `h(x, Tx) < 2·radius`.
    pub nearby_orbit_count: usize,
}

/// Report of [`verify_group_action`].
#[derive(Debug, Clone, Serialize)]
pub struct GroupActionReport {
    pub samples: Vec<SampleAudit>,
    pub all_fixed_point_free: bool,
    pub max_nearby_count: usize,
}

/// Fixed-point tolerance used by the audit.
pub const FIXED_POINT_TOL: f64 = 1e-9;

/// Heuristic audit of discontinuity and fixed-point-freeness on the
/// truncated enumeration: flags any sample a stored non-identity element
/// fails to move, and counts orbit points within `2·radius`.
pub fn verify_group_action(
    group: &DiscreteGroup,
    samples: &[Vec<f64>],
    radius: f64,
) -> Result<GroupActionReport> {
    let mut out = Vec::with_capacity(samples.len());
    for x in samples {
        if norm(x) >= 1.0 {
            return Err(QmodError::domain("audit samples must lie inside B^n"));
        }
        let mut min_move = f64::INFINITY;
        let mut nearby = 0usize;
        for t in group.nonidentity() {
            let tx = t.apply(x)?;
            let d = crate::geometry::hyp_distance(x, &tx)?;
            if d < min_move {
                min_move = d;
            }
            if d < 2.0 * radius {
                nearby += 1;
            }
        }
        out.push(SampleAudit {
            point: x.clone(),
            min_nonidentity_move: min_move,
            fixed_point_free: min_move >= FIXED_POINT_TOL,
            nearby_orbit_count: nearby,
        });
    }
    let all_free = out.iter().all(|s| s.fixed_point_free);
    let max_nearby = out.iter().map(|s| s.nearby_orbit_count).max().unwrap_or(0);
    Ok(GroupActionReport {
        samples: out,
        all_fixed_point_free: all_free,
        max_nearby_count: max_nearby,
    })
}

/// On-disk group definition.
///
/// ```json
/// { "n": 2, "generators": [ { "a": [0.5, 0.0], "R": [[1.0,0.0],[0.0,1.0]] } ], "depth": 4 }
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupFile {
    pub n: usize,
    pub generators: Vec<GeneratorSpec>,
    pub depth: usize,
    #[serde(default)]
    pub dedup_tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub a: Vec<f64>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
}

impl GroupFile {
    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| QmodError::validation(format!("group file: {e}")))
    }

    /// Build and enumerate the group this file describes.
    pub fn build(&self) -> Result<DiscreteGroup> {
        let mut gens = Vec::with_capacity(self.generators.len());
        for (i, spec) in self.generators.iter().enumerate() {
            if spec.a.len() != self.n || spec.r.len() != self.n {
                return Err(QmodError::validation(format!(
                    "generator {i} has wrong dimension (expected n = {})",
                    self.n
                )));
            }
            let r = SquareMatrix::from_rows(&spec.r);
            gens.push(MobiusMotion::make_motion(&spec.a, &r)?);
        }
        if gens.is_empty() {
            return Ok(DiscreteGroup::trivial(self.n));
        }
        DiscreteGroup::generate(gens, self.depth, self.dedup_tol.unwrap_or(DEDUP_TOL))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::hyp_distance;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rot90_xy(dim: usize) -> SquareMatrix {
        let mut r = SquareMatrix::identity(dim);
        r.set(0, 0, 0.0);
        r.set(0, 1, -1.0);
        r.set(1, 0, 1.0);
        r.set(1, 1, 0.0);
        r
    }

    fn random_point(rng: &mut ChaCha8Rng, dim: usize, rmax: f64) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            if norm(&x) < rmax {
                return x;
            }
        }
    }

    fn random_motion(rng: &mut ChaCha8Rng, dim: usize) -> MobiusMotion {
        let a = random_point(rng, dim, 0.7);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut r = SquareMatrix::identity(dim);
        r.set(0, 0, theta.cos());
        r.set(0, 1, -theta.sin());
        r.set(1, 0, theta.sin());
        r.set(1, 1, theta.cos());
        MobiusMotion::make_motion(&a, &r).unwrap()
    }

    #[test]
    fn identity_motion_from_zero_data() {
        let m = MobiusMotion::make_motion(&[0.0, 0.0], &SquareMatrix::identity(2)).unwrap();
        assert!(m
            .lorentz_matrix()
            .max_norm_distance(&SquareMatrix::identity(3))
            < 1e-14);
    }

    #[test]
    fn translation_sends_base_point_to_origin() {
        let a = [0.5, 0.0, 0.0];
        let m = MobiusMotion::make_motion(&a, &SquareMatrix::identity(3)).unwrap();
        let img = m.apply(&a).unwrap();
        assert!(norm(&img) < 1e-12);
    }

    #[test]
    fn translation_sends_origin_to_minus_a() {
        let a = [0.5, 0.0, 0.0];
        let m = MobiusMotion::make_motion(&a, &SquareMatrix::identity(3)).unwrap();
        let img = m.apply(&[0.0, 0.0, 0.0]).unwrap();
        assert!((img[0] + 0.5).abs() < 1e-12 && img[1].abs() < 1e-14 && img[2].abs() < 1e-14);
    }

    #[test]
    fn rotation_fixes_origin_and_rotates() {
        let m = MobiusMotion::make_motion(&[0.0, 0.0, 0.0], &rot90_xy(3)).unwrap();
        let o = m.apply(&[0.0, 0.0, 0.0]).unwrap();
        assert!(norm(&o) < 1e-14);
        let img = m.apply(&[0.3, 0.0, 0.0]).unwrap();
        assert!((img[0]).abs() < 1e-12 && (img[1] - 0.3).abs() < 1e-12 && img[2].abs() < 1e-14);
    }

    #[test]
    fn apply_identity_is_identity() {
        let m = MobiusMotion::identity(2);
        let x = [0.3, -0.4];
        assert!(crate::linalg::dist(&m.apply(&x).unwrap(), &x) < 1e-15);
    }

    #[test]
    fn apply_rejects_boundary_points() {
        let m = MobiusMotion::identity(2);
        assert!(matches!(
            m.apply(&[1.0, 0.0]),
            Err(QmodError::Domain(_))
        ));
    }

    #[test]
    fn make_motion_rejects_bad_inputs() {
        assert!(matches!(
            MobiusMotion::make_motion(&[1.0, 0.0], &SquareMatrix::identity(2)),
            Err(QmodError::Domain(_))
        ));
        let mut bad = SquareMatrix::identity(2);
        bad.set(0, 1, 0.5);
        assert!(matches!(
            MobiusMotion::make_motion(&[0.0, 0.0], &bad),
            Err(QmodError::Validation(_))
        ));
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_motion(&mut rng, 2);
            let prod = m.compose(&m.inverse());
            assert!(prod
                .lorentz_matrix()
                .max_norm_distance(&SquareMatrix::identity(3))
                < 1e-10);
        }
    }

    #[test]
    fn compose_identity_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_motion(&mut rng, 2);
        let prod = MobiusMotion::identity(2).compose(&m);
        assert!(prod.is_close(&m, 1e-14));
    }

    #[test]
    fn compose_agrees_with_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t1 = random_motion(&mut rng, 2);
        let t2 = random_motion(&mut rng, 2);
        let c = t1.compose(&t2);
        for _ in 0..100 {
            let x = random_point(&mut rng, 2, 0.9);
            let a = c.apply(&x).unwrap();
            let b = t1.apply(&t2.apply(&x).unwrap()).unwrap();
            assert!(crate::linalg::dist(&a, &b) < 1e-10);
        }
    }

    #[test]
    fn lorentz_residual_survives_long_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut acc = MobiusMotion::identity(2);
        for _ in 0..100 {
            acc = acc.compose(&random_motion(&mut rng, 2));
        }
        assert!(acc.lorentz_residual() < LORENTZ_TOL);
    }

    #[test]
    fn isometry_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let m = random_motion(&mut rng, 2);
            let x = random_point(&mut rng, 2, 0.9);
            let y = random_point(&mut rng, 2, 0.9);
            let d0 = hyp_distance(&x, &y).unwrap();
            let d1 = hyp_distance(&m.apply(&x).unwrap(), &m.apply(&y).unwrap()).unwrap();
            assert!((d0 - d1).abs() < 1e-9, "isometry violated: {d0} vs {d1}");
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(128))]
        #[test]
        fn isometry_property(seed in 0u64..1_000_000, dim in 2usize..=3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_point(&mut rng, dim, 0.7);
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let mut r = SquareMatrix::identity(dim);
            r.set(0, 0, theta.cos());
            r.set(0, 1, -theta.sin());
            r.set(1, 0, theta.sin());
            r.set(1, 1, theta.cos());
            let t = MobiusMotion::make_motion(&a, &r).unwrap();
            let x = random_point(&mut rng, dim, 0.9);
            let y = random_point(&mut rng, dim, 0.9);
            let d0 = hyp_distance(&x, &y).unwrap();
            let d1 = hyp_distance(&t.apply(&x).unwrap(), &t.apply(&y).unwrap()).unwrap();
            proptest::prop_assert!((d0 - d1).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_generator_list_gives_trivial_group() {
        let g = DiscreteGroup::generate(Vec::new(), 5, DEDUP_TOL).unwrap();
        assert_eq!(g.elements().len(), 1);
        assert!(g.elements()[0].word.is_empty());
    }

    #[test]
    fn cyclic_translation_group_word_count() {
        let g = MobiusMotion::translation(&[0.5, 0.0]).unwrap();
        let group = DiscreteGroup::generate(vec![g], 3, DEDUP_TOL).unwrap();
        // reduced words over {g, g⁻¹} of length ≤ 3 dedup to {g^k : |k| ≤ 3}
        assert_eq!(group.elements().len(), 7);
    }

    #[test]
    fn duplicate_generators_dedup_to_same_set() {
        let g = MobiusMotion::translation(&[0.5, 0.0]).unwrap();
        let group1 = DiscreteGroup::generate(vec![g.clone()], 3, DEDUP_TOL).unwrap();
        let group2 = DiscreteGroup::generate(vec![g.clone(), g], 3, DEDUP_TOL).unwrap();
        assert_eq!(group1.elements().len(), group2.elements().len());
    }

    #[test]
    fn stored_words_are_closed_under_inverse() {
        let g = MobiusMotion::translation(&[0.4, 0.1]).unwrap();
        let h = MobiusMotion::make_motion(&[0.0, 0.55], &rot90_xy(2)).unwrap();
        let group = DiscreteGroup::generate(vec![g, h], 3, DEDUP_TOL).unwrap();
        for e in group.elements() {
            let inv = e.motion.inverse();
            assert!(
                group
                    .elements()
                    .iter()
                    .any(|f| f.motion.is_close(&inv, 1e-8)),
                "inverse of word {:?} not stored",
                e.word
            );
        }
    }

    #[test]
    fn group_axioms_on_stored_products_within_depth() {
        let g = MobiusMotion::translation(&[0.5, 0.0]).unwrap();
        let group = DiscreteGroup::generate(vec![g], 4, DEDUP_TOL).unwrap();
        for a in group.elements() {
            for b in group.elements() {
                if a.word.len() + b.word.len() <= 4 {
                    let prod = a.motion.compose(&b.motion);
                    assert!(group
                        .elements()
                        .iter()
                        .any(|e| e.motion.is_close(&prod, 1e-7)));
                }
            }
        }
    }

    #[test]
    fn audit_trivial_group_passes() {
        let g = DiscreteGroup::trivial(2);
        let rep = verify_group_action(&g, &[vec![0.0, 0.0], vec![0.2, 0.1]], 0.5).unwrap();
        assert!(rep.all_fixed_point_free);
        assert_eq!(rep.max_nearby_count, 0);
    }

    #[test]
    fn audit_flags_rotation_fixed_point() {
        let rot = MobiusMotion::make_motion(&[0.0, 0.0], &rot90_xy(2)).unwrap();
        let group = DiscreteGroup::generate(vec![rot], 2, DEDUP_TOL).unwrap();
        let rep = verify_group_action(&group, &[vec![0.0, 0.0]], 0.5).unwrap();
        assert!(!rep.all_fixed_point_free);
    }

    #[test]
    fn audit_counts_orbit_points_along_translation_axis() {
        let a = [0.5, 0.0];
        let g = MobiusMotion::translation(&a).unwrap();
        let ell = hyp_distance(&[0.0, 0.0], &g.apply(&[0.0, 0.0]).unwrap()).unwrap();
        let depth = 4;
        let group = DiscreteGroup::generate(vec![g], depth, DEDUP_TOL).unwrap();
        let radius = 1.3 * ell;
        let rep = verify_group_action(&group, &[vec![0.0, 0.0]], radius).unwrap();
        // orbit of 0 sits at distances |k|·ℓ along the axis
        let expected = (1..=depth as i32)
            .filter(|k| (*k as f64) * ell < 2.0 * radius)
            .count()
            * 2;
        assert_eq!(rep.samples[0].nearby_orbit_count, expected);
    }

    #[test]
    fn group_file_round_trip() {
        let json = r#"{ "n": 2, "generators": [ { "a": [0.5, 0.0], "R": [[1.0,0.0],[0.0,1.0]] } ], "depth": 2 }"#;
        let gf = GroupFile::parse(json).unwrap();
        let group = gf.build().unwrap();
        assert_eq!(group.elements().len(), 5);
        assert!(GroupFile::parse(r#"{ "n": 2, "bogus": 1 }"#).is_err());
    }
}
