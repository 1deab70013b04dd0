//! One-dimensional quadrature: Gauss–Legendre panels and adaptive Simpson
//! with blow-up detection for improper integrals.

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
///
/// Nodes are computed by Newton iteration on the Legendre recurrence; for
/// the small orders used here this is accurate to machine precision.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and derivative via recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre over `[a, b]` with `panels` equal panels.
pub fn composite_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Outcome of an improper integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntegralOutcome {
    Finite(f64),
    Divergent,
}

impl IntegralOutcome {
    pub fn finite(&self) -> Option<f64> {
        match self {
            IntegralOutcome::Finite(v) => Some(*v),
            IntegralOutcome::Divergent => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, IntegralOutcome::Divergent)
    }
}

/// Adaptive Simpson on `[a, b]`.
///
/// Values exceeding `cap` (default 1e12 through [`integrate_adaptive`]) or
/// recursion that keeps refining at max depth near a singular endpoint are
/// reported as divergent rather than returned as garbage.
pub fn integrate_adaptive_capped<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    cap: f64,
) -> IntegralOutcome {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }

    fn eval<F: Fn(f64) -> f64>(f: &F, x: f64, cap: f64) -> Option<f64> {
        let v = f(x);
        if !v.is_finite() || v.abs() > cap {
            None
        } else {
            Some(v)
        }
    }

    struct Ctx<'a, F> {
        f: &'a F,
        cap: f64,
        diverged: bool,
    }

    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        ctx: &mut Ctx<F>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        if ctx.diverged {
            return 0.0;
        }
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let (flm, frm) = match (eval(ctx.f, lm, ctx.cap), eval(ctx.f, rm, ctx.cap)) {
            (Some(x), Some(y)) => (x, y),
            _ => {
                ctx.diverged = true;
                return 0.0;
            }
        };
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 {
            // Still refining at max depth: treat an exploding panel as a
            // sign of a non-integrable singularity.
            if delta.abs() > 1.0 && (left + right).abs() > ctx.cap {
                ctx.diverged = true;
            }
            return left + right + delta / 15.0;
        }
        if delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        let l = rec(ctx, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
        let r = rec(ctx, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
        l + r
    }

    if a == b {
        return IntegralOutcome::Finite(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = match (eval(f, a, cap), eval(f, m, cap), eval(f, b, cap)) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return IntegralOutcome::Divergent,
    };
    let whole = simpson(fa, fm, fb, b - a);
    let mut ctx = Ctx {
        f,
        cap,
        diverged: false,
    };
    let v = rec(&mut ctx, a, b, fa, fm, fb, whole, tol, 48);
    if ctx.diverged || !v.is_finite() || v.abs() > cap {
        IntegralOutcome::Divergent
    } else {
        IntegralOutcome::Finite(v)
    }
}

/// Adaptive Simpson with the default divergence cap of `1e12`.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> IntegralOutcome {
    integrate_adaptive_capped(f, a, b, tol, 1e12)
}
