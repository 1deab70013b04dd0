//! Numerical toolkit for hyperbolic quotient spaces `B^n/G` under discrete
//! Möbius groups.
//!
//! The crate provides, on desk scale:
//!
//! - Möbius automorphisms of the unit ball in Lorentz form and truncated
//!   enumeration of finitely generated discrete groups ([`mobius`]);
//! - the hyperbolic and quotient metrics, Dirichlet domains and normal
//!   neighborhoods with isometric charts ([`geometry`]);
//! - hyperbolic volume and geodesic-sphere integrals, the volume/shell
//!   sandwich, spherical means and mean-oscillation profiles ([`measures`]);
//! - analytic and discrete moduli of curve families, the extremal-weight
//!   machinery and the associated ring inequalities ([`modulus`]);
//! - pointwise distortion analytics: operator norm, Jacobian, outer
//!   dilatation, gauge-growth checks, multiplicity estimation
//!   ([`distortion`]);
//! - a closed-form two-branch radial map family used as the reference
//!   workload for the distortion and equicontinuity checks
//!   ([`example_family`]).

pub mod distortion;
pub mod error;
pub mod example_family;
pub mod geometry;
pub mod linalg;
pub mod measures;
pub mod mobius;
pub mod modulus;
pub mod quad;

pub use error::{QmodError, Result};

/// Surface area of the unit sphere `S^{n-1}` in `R^n`.
///
/// `ω₁ = 2π`, `ω₂ = 4π`, and in general `2 π^{n/2} / Γ(n/2)`.
pub fn unit_sphere_area(n: usize) -> f64 {
    assert!(n >= 1, "ambient dimension must be at least 1");
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half(n)
}

/// Γ(n/2) for integer n ≥ 1 via the half-integer recurrence.
fn gamma_half(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        // Γ(k) = (k-1)!
        let k = n / 2;
        (1..k).map(|i| i as f64).product()
    } else {
        // Γ(k + 1/2) = (2k)! √π / (4^k k!)
        let k = (n - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for i in 0..k {
            v *= i as f64 + 0.5;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas_match_known_values() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-12);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-12);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((unit_sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }
}
