//! Acceptance suite: one test per acceptance criterion, each printing a
//! single PASS/FAIL line with the measured quantities.
//!
//! Run with `cargo test -p qmod-cli --test acceptance -- --nocapture`.

use qmod_core::distortion::{outer_dilatation, operator_norm_and_jacobian};
use qmod_core::example_family::{
    empirical_c1_star, equicontinuity_profile, example_distortion_check, q1_field,
    ExampleFamilyConfig,
};
use qmod_core::geometry::{euclid_radius, hyp_distance, ChartedNeighborhood};
use qmod_core::linalg::{norm, SquareMatrix};
use qmod_core::measures::{self, ScalarField};
use qmod_core::mobius::MobiusMotion;
use qmod_core::modulus::{
    divergence_profile, empirical_fubini_constants, eta0_weight, modulus_solve,
    radial_ray_family, simplex_grid_oracle, weighted_inf_integral,
    DiscreteMeasureSpace, DivergenceVerdict, GridSpec, Metric,
};
use qmod_core::quad::integrate_adaptive;
use qmod_core::unit_sphere_area;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

fn criterion(id: &str, body: impl FnOnce() -> Result<String, String>) {
    match body() {
        Ok(detail) => println!("ACCEPTANCE {id}: PASS — {detail}"),
        Err(detail) => {
            println!("ACCEPTANCE {id}: FAIL — {detail}");
            panic!("acceptance criterion {id} failed: {detail}");
        }
    }
}

fn check(cond: bool, msg: impl Into<String>, log: &mut Vec<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        let m = msg.into();
        log.push(m.clone());
        Err(m)
    }
}

#[test]
fn criterion_01_ring_modulus_baseline() {
    criterion("01 ring-modulus-baseline", || {
        let mut details = Vec::new();
        for (n, cells, dirs, tol, limit_s, target) in [
            (2usize, 256usize, 512usize, 0.05, 60.0, 2.0 * PI),
            (3, 48, 2048, 0.08, 300.0, 4.0 * PI),
        ] {
            let r1 = 0.25;
            let r2 = 0.25 * std::f64::consts::E;
            let family = radial_ray_family(n, r1, r2, dirs, Metric::Euclidean)
                .map_err(|e| e.to_string())?;
            let grid = GridSpec::chart_box(n, cells).map_err(|e| e.to_string())?;
            let started = std::time::Instant::now();
            let sol = modulus_solve(&grid, &family, 1e-6, 100_000).map_err(|e| e.to_string())?;
            let secs = started.elapsed().as_secs_f64();
            let rel = (sol.value - target).abs() / target;
            if rel > tol {
                return Err(format!(
                    "n={n}: solver {:.6} vs {target:.6}, rel err {:.4} > {tol}",
                    sol.value, rel
                ));
            }
            if secs > limit_s {
                return Err(format!("n={n}: solve took {secs:.1}s > {limit_s}s"));
            }
            details.push(format!("n={n}: rel_err={:.3}% in {:.2}s", rel * 100.0, secs));
        }
        Ok(details.join("; "))
    });
}

#[test]
fn criterion_02_isometry_suite() {
    criterion("02 isometry-suite", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut worst = 0.0f64;
        let mut failures = 0usize;
        for trial in 0..10_000 {
            let n = if trial % 2 == 0 { 2 } else { 3 };
            let a = random_point(&mut rng, n, 0.7);
            let theta: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let mut r = SquareMatrix::identity(n);
            r.set(0, 0, theta.cos());
            r.set(0, 1, -theta.sin());
            r.set(1, 0, theta.sin());
            r.set(1, 1, theta.cos());
            let t = MobiusMotion::make_motion(&a, &r).map_err(|e| e.to_string())?;
            let x = random_point(&mut rng, n, 0.9);
            let y = random_point(&mut rng, n, 0.9);
            let d0 = hyp_distance(&x, &y).map_err(|e| e.to_string())?;
            let d1 = hyp_distance(
                &t.apply(&x).map_err(|e| e.to_string())?,
                &t.apply(&y).map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            let dev = (d0 - d1).abs();
            worst = worst.max(dev);
            if dev >= 1e-9 {
                failures += 1;
            }
        }
        if failures > 0 {
            return Err(format!("{failures} trials deviated >= 1e-9 (worst {worst:.3e})"));
        }
        Ok(format!("10^4 trials, worst deviation {worst:.3e} < 1e-9"))
    });
}

#[test]
fn criterion_03_weighted_infimum_oracle() {
    criterion("03 weighted-infimum-oracle", || {
        let mut rng = ChaCha8Rng::seed_from_u64(3003);
        let qs = [1.5, 2.0, 3.0];
        let mut worst_gap = 0.0f64;
        let mut worst_attain = 0.0f64;
        for trial in 0..200 {
            let atoms = rng.random_range(1..=8);
            let mu: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
            let phi: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.5..2.0)).collect();
            let space = DiscreteMeasureSpace::new(mu, phi).map_err(|e| e.to_string())?;
            let q = qs[trial % qs.len()];
            let closed = weighted_inf_integral(&space, q).map_err(|e| e.to_string())?;
            let oracle = simplex_grid_oracle(&space, q, 28);
            let gap = (closed.value - oracle).abs();
            worst_gap = worst_gap.max(gap / closed.value.max(1.0));
            if gap > 1e-3 * closed.value.max(1.0) {
                return Err(format!(
                    "trial {trial}: closed {:.8} vs oracle {oracle:.8}",
                    closed.value
                ));
            }
            let attain = (closed.attained - closed.value).abs() / closed.value.max(1e-300);
            worst_attain = worst_attain.max(attain);
            if attain > 1e-10 {
                return Err(format!("trial {trial}: extremizer attains only to {attain:.3e}"));
            }
        }
        Ok(format!(
            "200 spaces: worst oracle gap {worst_gap:.3e} <= 1e-3, worst attainment {worst_attain:.3e} <= 1e-10"
        ))
    });
}

#[test]
fn criterion_04_fubini_sandwich() {
    criterion("04 fubini-sandwich", || {
        let budget = 200_000;
        let mut rows = 0usize;
        for n in [2usize, 3] {
            let nbhd = ChartedNeighborhood::centered_ball(n, 0.8).map_err(|e| e.to_string())?;
            for (k, r0) in [0.25f64, 0.5].into_iter().enumerate() {
                let battery = [
                    ScalarField::constant(1.0),
                    shell_indicator(0.4 * r0, 0.8 * r0),
                    log_fmo_field(1.0),
                ];
                for (j, q) in battery.iter().enumerate() {
                    let s = measures::fubini_sandwich(
                        &nbhd,
                        r0,
                        q,
                        budget,
                        9000 + (n * 100 + k * 10 + j) as u64,
                    )
                    .map_err(|e| e.to_string())?;
                    if !s.within_bracket {
                        return Err(format!(
                            "n={n} r0={r0} field={}: ratio {:.6} outside [{:.6}, {:.6}]",
                            q.label(),
                            s.ratio_euclid,
                            s.bracket_lo,
                            s.bracket_hi
                        ));
                    }
                    if s.volume > 0.0 && s.volume_stderr >= 0.01 * s.volume {
                        return Err(format!(
                            "n={n} r0={r0} field={}: MC stderr {:.3e} >= 1% of {:.6e}",
                            q.label(),
                            s.volume_stderr,
                            s.volume
                        ));
                    }
                    rows += 1;
                }
            }
        }
        Ok(format!(
            "{rows} (n, r0, Q) combinations inside the computed bracket with MC error < 1%"
        ))
    });
}

#[test]
fn criterion_05_extremal_weight_sandwich() {
    criterion("05 extremal-weight-sandwich", || {
        let (r1, r2) = (0.25f64, 0.5f64);
        let mut combos = 0usize;
        for n in [2usize, 3] {
            let nf = n as f64;
            let nbhd = ChartedNeighborhood::centered_ball(n, 0.8).map_err(|e| e.to_string())?;
            // neighborhood constants, shared by every battery member
            let const_battery = [ScalarField::constant(1.0), log_fmo_field(1.0)];
            let (c2_hat, c1_hat) =
                empirical_fubini_constants(&nbhd, r2, &const_battery, 200_000, 500 + n as u64)
                    .map_err(|e| e.to_string())?;
            let m1 = 1.0 / c2_hat;
            let m2 = c1_hat / (c2_hat * c2_hat);
            for q in [ScalarField::constant(1.0), log_fmo_field(1.0)] {
                let nb = nbhd.clone();
                let qf = q.clone();
                let profile: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(move |r: f64| {
                    measures::q_stats(&nb, r, &qf).expect("radius inside ring").q_mean
                });
                let w0 = eta0_weight(profile, n, r1, r2).map_err(|e| e.to_string())?;
                let i_val = match w0.integral {
                    qmod_core::quad::IntegralOutcome::Finite(v) => v,
                    _ => return Err("degenerate extremal weight".into()),
                };
                let omega_over_i = unit_sphere_area(n) / i_val.powf(nf - 1.0);
                let weighted = |eta: &dyn Fn(f64) -> f64| -> Result<f64, String> {
                    let f = |r: f64| {
                        let sphere =
                            measures::sphere_integral(&nbhd, r, &q).expect("radius inside ring");
                        eta(r).max(0.0).powf(nf) * sphere
                    };
                    integrate_adaptive(&f, r1, r2, 1e-10)
                        .finite()
                        .ok_or_else(|| "weighted integral diverged".to_string())
                };
                let int_eta0 = weighted(&|r| w0.eta0(r))?;
                let uniform = |_r: f64| 1.0 / (r2 - r1);
                let triangular = |r: f64| {
                    let mid = 0.5 * (r1 + r2);
                    let w = r2 - r1;
                    if r <= r1 || r >= r2 {
                        0.0
                    } else if r <= mid {
                        4.0 * (r - r1) / (w * w)
                    } else {
                        4.0 * (r2 - r) / (w * w)
                    }
                };
                let battery: [(&str, &dyn Fn(f64) -> f64); 3] = [
                    ("eta0", &|r| w0.eta0(r)),
                    ("uniform", &uniform),
                    ("triangular", &triangular),
                ];
                let slack = 1e-9;
                for (name, eta) in battery {
                    let int_eta = weighted(eta)?;
                    let first = omega_over_i <= m1 * int_eta0 * (1.0 + slack);
                    let second = m1 * int_eta0 <= m2 * int_eta * (1.0 + slack);
                    if !(first && second) {
                        return Err(format!(
                            "n={n} Q={} eta={name}: {:.9e} <= {:.9e} <= {:.9e} fails (M1={m1:.6}, M2={m2:.6})",
                            q.label(),
                            omega_over_i,
                            m1 * int_eta0,
                            m2 * int_eta
                        ));
                    }
                    combos += 1;
                }
            }
        }
        Ok(format!(
            "{combos} (n, Q, η) combinations ordered with shared empirical constants"
        ))
    });
}

#[test]
fn criterion_06_distortion_bound() {
    criterion("06 example-family-distortion", || {
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_mismatch = 0.0f64;
        for n in [2usize, 3] {
            for m in [2u32, 3, 10, 100] {
                let cfg = ExampleFamilyConfig::on_ball(n, m, 0.5).map_err(|e| e.to_string())?;
                let rep =
                    example_distortion_check(&cfg, 100_000, 600 + m as u64).map_err(|e| e.to_string())?;
                worst_excess = worst_excess.max(rep.max_excess);
                worst_mismatch = worst_mismatch.max(rep.gluing_mismatch);
                if rep.max_excess > 1e-9 {
                    return Err(format!("n={n} m={m}: excess {:.3e} > 1e-9", rep.max_excess));
                }
                if rep.gluing_mismatch >= 1e-12 {
                    return Err(format!(
                        "n={n} m={m}: gluing mismatch {:.3e} >= 1e-12",
                        rep.gluing_mismatch
                    ));
                }
                if rep.q_below_one != 0 || rep.q1_violations != 0 {
                    return Err(format!(
                        "n={n} m={m}: majorant violations ({}, {})",
                        rep.q_below_one, rep.q1_violations
                    ));
                }
            }
        }
        Ok(format!(
            "8 (n, m) pairs x 10^5 samples: worst excess {worst_excess:.3e} <= 1e-9, worst gluing mismatch {worst_mismatch:.3e} < 1e-12"
        ))
    });
}

#[test]
fn criterion_07_divergence_criterion() {
    criterion("07 divergence-criterion", || {
        let mut details = Vec::new();
        for n in [2usize, 3] {
            let cfg = ExampleFamilyConfig::on_ball(n, 3, 0.5).map_err(|e| e.to_string())?;
            let c1s = empirical_c1_star(&cfg, 4000, 70 + n as u64);
            let q1 = q1_field(&cfg, c1s);
            let eps0 = 0.9 * cfg.r0_prime();
            let eps_list: Vec<f64> = (1..=10).map(|k| eps0 * 0.5f64.powi(k)).collect();
            let prof = divergence_profile(cfg.neighborhood(), &q1, eps0, &eps_list)
                .map_err(|e| e.to_string())?;
            if prof.verdict != DivergenceVerdict::Divergent {
                return Err(format!("n={n}: log-power majorant not reported divergent"));
            }
            let increasing = prof.rows.windows(2).all(|w| w[1].1 > w[0].1);
            let growth = prof.rows.last().unwrap().1 - prof.rows.first().unwrap().1;
            if !increasing || growth < 0.5 {
                return Err(format!(
                    "n={n}: tail integral grew only {growth:.3} over the halving schedule"
                ));
            }
            // convergent counterexample: spherical mean ~ exp((n-1)/r)
            let nbhd = ChartedNeighborhood::centered_ball(n, 0.8).map_err(|e| e.to_string())?;
            let pw = n as f64 - 1.0;
            let conv = ScalarField::radial("exp-growth", move |t| {
                if t <= 0.0 {
                    f64::INFINITY
                } else {
                    (pw / t).exp()
                }
            });
            let eps0c = 0.4;
            let eps_c: Vec<f64> = (1..=8).map(|k| eps0c * 0.5f64.powi(k)).collect();
            let prof_c =
                divergence_profile(&nbhd, &conv, eps0c, &eps_c).map_err(|e| e.to_string())?;
            if prof_c.verdict != DivergenceVerdict::Convergent {
                return Err(format!("n={n}: counterexample not reported convergent"));
            }
            details.push(format!(
                "n={n}: divergent (growth {growth:.2} over 10 halvings), counterexample convergent"
            ));
        }
        Ok(details.join("; "))
    });
}

#[test]
fn criterion_08_equicontinuity() {
    criterion("08 equicontinuity", || {
        let cfg = ExampleFamilyConfig::on_ball(2, 2, 0.5).map_err(|e| e.to_string())?;
        let m_list: Vec<u32> = (2..=50).collect();
        let deltas: Vec<f64> = (0..12).map(|k| 0.4 * 0.6f64.powi(k)).collect();
        let rows = equicontinuity_profile(&cfg, &m_list, &deltas).map_err(|e| e.to_string())?;
        for w in rows.windows(2) {
            if w[1].sup_displacement > w[0].sup_displacement + 1e-15 {
                return Err(format!(
                    "profile not nonincreasing at delta {}",
                    w[1].delta
                ));
            }
        }
        let last = rows.last().unwrap();
        let bound = 2.0 * (2.0 * std::f64::consts::E).ln() * euclid_radius(last.delta);
        if last.sup_displacement > bound + 1e-9 {
            return Err(format!(
                "smallest delta {}: sup {:.9e} > bound {:.9e} + 1e-9",
                last.delta, last.sup_displacement, bound
            ));
        }
        Ok(format!(
            "profile nonincreasing over 12 radii; at delta={:.3e}: sup {:.6e} <= 2log(2e)·rho + 1e-9",
            last.delta, last.sup_displacement
        ))
    });
}

#[test]
fn criterion_09_dilatation_branches() {
    criterion("09 dilatation-branches", || {
        let mut log = Vec::new();
        check(
            outer_dilatation(&SquareMatrix::identity(3), 3) == 1.0,
            "identity must give 1",
            &mut log,
        )?;
        check(
            outer_dilatation(&SquareMatrix::zeros(3), 3) == 1.0,
            "zero matrix must give 1",
            &mut log,
        )?;
        let singular = SquareMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        check(
            outer_dilatation(&singular, 2).is_infinite(),
            "singular nonzero must give +inf",
            &mut log,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(909);
        let mut done = 0usize;
        let mut worst = f64::INFINITY;
        while done < 10_000 {
            let n = if done.is_multiple_of(2) { 2 } else { 3 };
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let j = SquareMatrix::from_rows(&rows);
            let (_, det) = operator_norm_and_jacobian(&j);
            if det.abs() < 1e-8 {
                continue;
            }
            let k = outer_dilatation(&j, n);
            worst = worst.min(k);
            if k < 1.0 - 1e-9 {
                return Err(format!("K_O = {k} < 1 for a nonsingular matrix"));
            }
            done += 1;
        }
        Ok(format!(
            "branch semantics exact; min K_O over 10^4 nonsingular matrices = {worst:.12}"
        ))
    });
}

#[test]
fn criterion_10_determinism() {
    criterion("10 determinism", || {
        let dir = std::env::temp_dir().join(format!("qmod-acceptance-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let cfg_path = dir.join("cfg.json");
        std::fs::write(
            &cfg_path,
            r#"{ "command": "verify-fubini", "n": 2, "r0_list": [0.25], "budget": 50000, "seed": 123 }"#,
        )
        .map_err(|e| e.to_string())?;
        let mut bodies = Vec::new();
        for run in 0..2 {
            let out = dir.join(format!("out{run}"));
            let status = std::process::Command::new(env!("CARGO_BIN_EXE_qmod"))
                .arg("run")
                .arg(&cfg_path)
                .arg("--out")
                .arg(&out)
                .args(["--seed", "123"])
                .status()
                .map_err(|e| e.to_string())?;
            if !status.success() {
                return Err(format!("run {run} exited with {status}"));
            }
            bodies.push(
                std::fs::read(out.join("verify-fubini.csv")).map_err(|e| e.to_string())?,
            );
        }
        let identical = bodies[0] == bodies[1];
        std::fs::remove_dir_all(&dir).ok();
        if !identical {
            return Err("CSV bodies differ between identical runs".into());
        }
        Ok(format!(
            "two runs with identical config+seed produced byte-identical CSV bodies ({} bytes)",
            bodies[0].len()
        ))
    });
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, rmax: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if norm(&x) < rmax {
            return x;
        }
    }
}

fn shell_indicator(lo: f64, hi: f64) -> ScalarField {
    ScalarField::radial(format!("indicator[{lo:.3},{hi:.3}]"), move |t| {
        if t >= lo && t <= hi {
            1.0
        } else {
            0.0
        }
    })
}

fn log_fmo_field(c: f64) -> ScalarField {
    ScalarField::radial(format!("log_fmo(C={c})"), move |t| {
        if t <= 0.0 {
            f64::INFINITY
        } else {
            (c / t).ln().max(0.0)
        }
    })
}
