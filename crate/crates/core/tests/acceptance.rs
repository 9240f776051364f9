//! Acceptance suite: one test per release criterion, each printing a
//! single `[PASS]`/`[FAIL]` line (run with `-- --nocapture` to see the
//! lines for passing tests).  Tolerances here are release gates; loosening
//! them is an API break, not a test fix.

use std::sync::{Arc, OnceLock};
use wavelab::functionals::{
    e0, hardy_sobolev_max_ratio, monotonicity_report, weighted_integral, MonotonicityReport,
    WeightKind,
};
use wavelab::geometry::{corner_exponent, corner_fit, synthetic_corner_graph, Side};
use wavelab::harness::{replay, run_experiment_at, ExperimentConfig, MANIFEST_NAME};
use wavelab::local_energy::verify_energy_lemma;
use wavelab::model::EquationSpec;
use wavelab::radial_solver::{
    estimate_blowup_time, evolve, RadialGrid, RadialState, RadialTrajectory, RunStatus,
    SolveControls,
};
use wavelab::similarity::{evolve_w, to_similarity, SimilarityFrame, WControls, WTrajectory};
use wavelab::soliton_ode::{
    barycenter, integrate_system, zeta_bar, CenterSystem, ForcingFn,
};
use wavelab::solitons::{
    decompose, e0_of_kappa0, fit_single, kappa, kappa0, synthetic_decomposition_frame,
};
use wavelab::ygrid::YGrid;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: usize, ok: bool, detail: &str) {
    println!(
        "[{}] criterion {criterion:>2}: {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion}: {detail}");
}

// ---- shared fixtures ----

struct MonoRun {
    label: &'static str,
    wt: WTrajectory,
    rep: MonotonicityReport,
}

/// Damped-functional suite: five equations, near-soliton and generic data,
/// each evolved over Δs = 5.2 in the slab.
fn mono_runs() -> &'static [MonoRun] {
    static RUNS: OnceLock<Vec<MonoRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        struct Case {
            label: &'static str,
            spec: EquationSpec,
            r0: f64,
            init: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        }
        // the fixed-frame soliton is unstable (time-translation mode grows
        // like e^s), so a perturbation of size a leaves the soliton
        // neighbourhood near s = ln(1/a); amplitudes here are sized to keep
        // all runs near-soliton through s = 5.2
        let near = |p: f64, d: f64, amp: f64| {
            Box::new(move |y: f64| {
                kappa(p, d, y) + amp * (std::f64::consts::FRAC_PI_2 * y).cos() * (1.0 - y * y)
            }) as Box<dyn Fn(f64) -> f64 + Send + Sync>
        };
        let generic = |a: f64, b: f64| {
            Box::new(move |y: f64| {
                a * (std::f64::consts::FRAC_PI_2 * y).cos() + b * (std::f64::consts::PI * y).sin()
            }) as Box<dyn Fn(f64) -> f64 + Send + Sync>
        };
        let cases = vec![
            Case {
                label: "pure-power p=3 near-soliton",
                spec: EquationSpec::pure_power(3.0, 1).unwrap(),
                r0: 2.0,
                init: near(3.0, 0.3, 0.005),
            },
            Case {
                label: "pure-power p=3 generic",
                spec: EquationSpec::pure_power(3.0, 1).unwrap(),
                r0: 2.0,
                init: generic(0.3, 0.1),
            },
            Case {
                label: "pure-power p=2 near-soliton",
                spec: EquationSpec::pure_power(2.0, 1).unwrap(),
                r0: 2.0,
                init: near(2.0, -0.2, 0.02),
            },
            Case {
                label: "klein-gordon p=3 near-soliton",
                spec: EquationSpec::klein_gordon(3.0, 1).unwrap(),
                r0: 2.0,
                init: near(3.0, 0.4, 0.05),
            },
            Case {
                label: "klein-gordon p=2 generic",
                spec: EquationSpec::klein_gordon(2.0, 1).unwrap(),
                r0: 2.0,
                init: generic(1.0, 0.4),
            },
            Case {
                label: "klein-gordon p=3 N=3 near-soliton",
                spec: EquationSpec::klein_gordon(3.0, 3).unwrap(),
                r0: 5.0,
                init: near(3.0, 0.0, 0.05),
            },
        ];
        std::thread::scope(|scope| {
            let handles: Vec<_> = cases
                .iter()
                .map(|case| {
                    scope.spawn(move || {
                        let grid = Arc::new(YGrid::clustered(257, 1e-3).unwrap());
                        let w0: Vec<f64> =
                            grid.nodes().iter().map(|&y| (case.init)(y)).collect();
                        let ws0 = vec![0.0; grid.n()];
                        let wt = evolve_w(
                            &case.spec,
                            grid,
                            case.r0,
                            1.0,
                            &w0,
                            &ws0,
                            0.0,
                            5.2,
                            &WControls::default(),
                        )
                        .unwrap_or_else(|e| panic!("{} failed: {e}", case.label));
                        let rep = monotonicity_report(&wt, None).unwrap();
                        MonoRun { label: case.label, wt, rep }
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        })
    })
}

struct ConstantBlowup {
    traj: RadialTrajectory,
    t_est: f64,
}

/// Constant unit data on [0, 4]: spatially uniform blow-up at the ODE time,
/// causally clean around r = 2 for T − t ≳ e^{-8}.
fn constant_blowup() -> &'static ConstantBlowup {
    static RUN: OnceLock<ConstantBlowup> = OnceLock::new();
    RUN.get_or_init(|| {
        let spec = EquationSpec::pure_power(3.0, 1).unwrap();
        let grid = RadialGrid::new(0.0, 4.0, 401, 1).unwrap();
        let init = RadialState::new(vec![1.0; grid.n], vec![0.0; grid.n]);
        let controls = SolveControls {
            blowup_threshold: 2e4,
            target_slices: 600,
            ..Default::default()
        };
        let traj = evolve(&spec, &grid, &init, &controls).unwrap();
        assert_eq!(traj.status, RunStatus::BlowupDetected);
        let center = grid.n / 2;
        let fit = estimate_blowup_time(&traj, center, 50.0).unwrap();
        ConstantBlowup { traj, t_est: fit.t_est }
    })
}

// ---- criteria ----

#[test]
fn c01_damped_functional_is_monotone() {
    let runs = mono_runs();
    let mut ok = runs.len() >= 5;
    let mut worst = f64::NEG_INFINITY;
    let mut detail = String::new();
    for run in runs {
        let rel = run.rep.max_violation / run.rep.tol.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if run.rep.max_violation > run.rep.tol {
            ok = false;
            detail = format!(
                " ({}: violation {:.2e} > tol {:.2e})",
                run.label, run.rep.max_violation, run.rep.tol
            );
        }
    }
    report(
        1,
        ok,
        &format!(
            "H non-increasing on {} slab runs, worst violation {:.2}% of the 1e-3*max|H| budget{}",
            runs.len(),
            worst.max(0.0) * 100.0,
            detail
        ),
    );
}

#[test]
fn c02_h_stays_above_blowup_threshold() {
    let runs = mono_runs();
    let mut min_h = f64::INFINITY;
    let mut ok = true;
    let mut detail = String::new();
    for run in runs {
        let m = run.rep.h_values.iter().cloned().fold(f64::INFINITY, f64::min);
        min_h = min_h.min(m);
        if m < -1e-3 {
            ok = false;
            detail = format!(" ({}: min H = {m:.3e})", run.label);
        }
        assert_eq!(run.wt.frames.len(), run.rep.h_values.len());
    }
    report(
        2,
        ok,
        &format!("H >= -1e-3 on every frame of all {} runs (min {min_h:.3e}){detail}", runs.len()),
    );
}

#[test]
fn c03_soliton_profiles_are_stationary() {
    // mean node spacing 2(1-eps)/800 < 1/400
    let ds_total = 5.0;
    let p = 3.0;
    let spec = EquationSpec::pure_power(p, 1).unwrap();
    let dists: Vec<(f64, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = [0.0, 0.3, -0.3, 0.6, -0.6]
            .iter()
            .map(|&d| {
                let spec = &spec;
                scope.spawn(move || {
                    let grid = Arc::new(YGrid::clustered(801, 1e-3).unwrap());
                    let w0: Vec<f64> = grid.nodes().iter().map(|&y| kappa(p, d, y)).collect();
                    let ws0 = vec![0.0; grid.n()];
                    let controls = WControls { out_ds: 0.25, ..WControls::default() };
                    let wt = evolve_w(
                        spec, grid.clone(), 0.0, 1.0, &w0, &ws0, 0.0, ds_total, &controls,
                    )
                    .unwrap();
                    let max_dist = wt
                        .frames
                        .iter()
                        .map(|f| {
                            let diff_sq: Vec<f64> = f
                                .w
                                .iter()
                                .zip(&w0)
                                .map(|(a, b)| (a - b) * (a - b))
                                .collect();
                            weighted_integral(&diff_sq, &grid, p, WeightKind::Rho).sqrt()
                        })
                        .fold(0.0f64, f64::max);
                    (d, max_dist)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let worst = dists.iter().map(|&(_, m)| m).fold(0.0f64, f64::max);
    let ok = worst <= 1e-2;
    report(
        3,
        ok,
        &format!(
            "kappa(d) drifts at most {worst:.2e} in weighted L2 over Delta-s = {ds_total} \
             for d in {{0, +-0.3, +-0.6}} (tol 1e-2)"
        ),
    );
}

#[test]
fn c04_uniform_blowup_converges_to_the_soliton() {
    let run = constant_blowup();
    let p = 3.0;
    let root2 = kappa0(p);

    // amplitude law sup|u| * (T-t)^{2/(p-1)} -> kappa0
    let mut q_late = f64::NAN;
    for i in 0..run.traj.amp.len() {
        let a = run.traj.amp[i];
        if a >= 1e3 && a <= 1e4 {
            q_late = a * (run.t_est - run.traj.amp_times[i]);
        }
    }
    let amp_ok = (q_late - root2).abs() <= 0.02 * root2;

    // slab fits: residual decreasing in s, final |d| small.  Reconstructed
    // frames carry an error floor of ~3e-5 (slice interpolation plus the
    // estimated blow-up time feeding the e^{+s} frame mode), and the
    // solution reaches that floor near s = 2; the decrease is examined
    // while the distance to the soliton is still resolvable above it.
    let grid = Arc::new(YGrid::clustered(257, 1e-3).unwrap());
    let s_values: Vec<f64> = (0..5).map(|i| 0.8 + 0.25 * i as f64).collect();
    let wt = to_similarity(&run.traj, 2.0, run.t_est, &s_values, grid).unwrap();
    let fits: Vec<(f64, f64)> = wt
        .frames
        .iter()
        .map(|f| {
            let (params, residual) = fit_single(f, p);
            (params.d, residual)
        })
        .collect();
    let decreasing = fits.windows(2).all(|w| w[1].1 < w[0].1);
    let d_final = fits.last().unwrap().0;
    let ok = amp_ok && decreasing && d_final.abs() <= 0.02;
    let residuals: Vec<String> = fits.iter().map(|f| format!("{:.2e}", f.1)).collect();
    report(
        4,
        ok,
        &format!(
            "amplitude law {q_late:.4} vs {root2:.4} (2% tol), fit residuals [{}] \
             decreasing={decreasing}, final |d|={:.2e} (tol 0.02)",
            residuals.join(", "),
            d_final.abs()
        ),
    );
}

#[test]
fn c05_explicit_center_solution_solves_the_system() {
    let mut worst_residual = 0.0f64;
    let mut worst_bary = 0.0f64;
    for &p in &[2.0, 3.0] {
        for k in [2usize, 3, 4] {
            let system = CenterSystem::new(p, k, 1.0).unwrap();
            let res = wavelab::soliton_ode::explicit_solution_residual(&system, 2.0, 1e3, 200)
                .unwrap();
            worst_residual = worst_residual.max(res);
            for &s in &[2.0, 10.0, 1e2, 1e4] {
                let z = zeta_bar(&system, s).unwrap();
                worst_bary = worst_bary.max(barycenter(&z).abs());
            }
        }
    }
    let ok = worst_residual < 1e-10 && worst_bary <= 1e-14;
    report(
        5,
        ok,
        &format!(
            "explicit solution residual {worst_residual:.2e} (tol 1e-10), \
             barycenter {worst_bary:.2e} (tol 1e-14) for k in {{2,3,4}}, p in {{2,3}}"
        ),
    );
}

#[test]
fn c06_centers_converge_to_the_explicit_solution() {
    let p = 3.0;
    let s_lo = 2.0;
    let s_hi = 1e4;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst_free = 0.0f64;
    let mut worst_forced = 0.0f64;
    let mut worst_drift = 0.0f64;
    for trial in 0..20 {
        let k = if trial % 2 == 0 { 2 } else { 3 };
        let system = CenterSystem::new(p, k, 1.0).unwrap();
        let mut init = zeta_bar(&system, s_lo).unwrap();
        let mut offs: Vec<f64> = (0..k).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let mean = offs.iter().sum::<f64>() / k as f64;
        for o in &mut offs {
            *o -= mean;
        }
        for (z, o) in init.iter_mut().zip(&offs) {
            *z += o;
        }

        let deviation = |traj: &wavelab::soliton_ode::CenterTrajectory| {
            let zb = zeta_bar(&system, s_hi).unwrap();
            let end = traj.zetas.last().unwrap();
            let offsets: Vec<f64> = end.iter().zip(&zb).map(|(z, zb)| z - zb).collect();
            let zeta0 = offsets.iter().sum::<f64>() / offsets.len() as f64;
            offsets.iter().map(|o| (o - zeta0).abs()).fold(0.0f64, f64::max)
        };

        let free = integrate_system(&system, &init, s_lo, s_hi, None).unwrap();
        worst_drift = worst_drift.max(
            (barycenter(free.zetas.last().unwrap()) - barycenter(&init)).abs(),
        );
        worst_free = worst_free.max(deviation(&free));

        let forcing = |i: usize, s: f64| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * 0.3 / s.powf(1.5)
        };
        let forced =
            integrate_system(&system, &init, s_lo, s_hi, Some(&forcing as &ForcingFn)).unwrap();
        worst_forced = worst_forced.max(deviation(&forced));
    }
    let ok = worst_drift <= 1e-10 && worst_free < 1e-2 && worst_forced < 5e-2;
    report(
        6,
        ok,
        &format!(
            "20 random starts: barycenter drift {worst_drift:.2e} (tol 1e-10), \
             deviation from common limit {worst_free:.2e} free (tol 1e-2), \
             {worst_forced:.2e} forced (tol 5e-2)"
        ),
    );
}

#[test]
fn c07_decomposition_recovers_synthetic_frames() {
    let p = 3.0;
    // the outermost soliton lives a distance 1-|d| = 2e^{-2|zeta|} from the
    // slab edge; the cutoff and node density must resolve that scale or the
    // frame itself (not the fit) loses part of a soliton.  Energy counting
    // by rounding E0/E0(kappa0) needs the interaction shift below 1/(2k),
    // which for k = 4 means gaps above roughly 2.2.
    let grid = Arc::new(YGrid::clustered(2049, 1e-5).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut fit_failures = 0usize;
    let mut energy_hits = 0usize;
    let mut worst_center_err = 0.0f64;
    let total = 50;
    for trial in 0..total {
        let k = 1 + trial % 4;
        let theta1: i8 = if trial % 2 == 0 { 1 } else { -1 };
        let gaps: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(2.2..2.8)).collect();
        let mut zetas = vec![0.0];
        for g in &gaps {
            zetas.push(zetas.last().unwrap() + g);
        }
        let mean = zetas.iter().sum::<f64>() / k as f64;
        for z in &mut zetas {
            *z -= mean;
        }
        let frame = synthetic_decomposition_frame(grid.clone(), p, theta1, &zetas, 3.0);

        let dec = decompose(&frame, p, 5);
        let centers_ok = dec.k == k
            && dec
                .zetas
                .iter()
                .zip(&zetas)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
                < 1e-2;
        if centers_ok {
            worst_center_err = worst_center_err.max(
                dec.zetas
                    .iter()
                    .zip(&zetas)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max),
            );
        } else {
            fit_failures += 1;
        }

        let k_energy = (e0(&frame, p) / e0_of_kappa0(p)).round() as usize;
        if k_energy == k {
            energy_hits += 1;
        }
    }
    let ok = fit_failures == 0 && energy_hits >= 48;
    report(
        7,
        ok,
        &format!(
            "{}/{total} frames decomposed (worst center error {worst_center_err:.2e}, tol 1e-2), \
             energy k-estimate right on {energy_hits}/{total} (need 48)",
            total - fit_failures
        ),
    );
}

#[test]
fn c08_energy_levels_count_solitons() {
    let p = 3.0;
    let grid = Arc::new(YGrid::clustered(801, 1e-3).unwrap());
    let level = e0_of_kappa0(p);

    let n = grid.n();
    let w = vec![kappa0(p); n];
    let frame = SimilarityFrame::new(grid.clone(), 0.0, w, vec![0.0; n], None);
    let base_err = (e0(&frame, p) - 4.0 / 3.0).abs();
    let base_ok = base_err <= 1e-4;

    // Cross terms between alternating-sign solitons shift E0 by about +11%
    // of one level near gap 3 and decay like e^{-gap}, so the 5% band is
    // only reachable once neighbours sit 5+ apart.  Each outer soliton
    // concentrates its energy in an edge spike of width 1-|d| = 2e^{-2|zeta|};
    // the grid cutoff has to sit well inside that width, hence eps shrinking
    // with k as the outermost centre moves out.
    let mut worst_rel = 0.0f64;
    for (k, n, eps) in [(2usize, 4097, 1e-5), (3, 8193, 1e-7), (4, 65537, 1e-9)] {
        let grid = Arc::new(YGrid::clustered(n, eps).unwrap());
        let zetas: Vec<f64> = (0..k).map(|i| (i as f64 - (k as f64 - 1.0) / 2.0) * 6.0).collect();
        let frame = synthetic_decomposition_frame(grid, p, 1, &zetas, 3.0);
        let rel = (e0(&frame, p) - k as f64 * level).abs() / (k as f64 * level);
        worst_rel = worst_rel.max(rel);
    }
    let ok = base_ok && worst_rel <= 0.05;
    report(
        8,
        ok,
        &format!(
            "E0(kappa0) = 4/3 within {base_err:.2e} (tol 1e-4); \
             k-soliton frames within {:.2}% of k*E0(kappa0) (tol 5%)",
            worst_rel * 100.0
        ),
    );
}

#[test]
fn c09_corner_exponent_is_recovered() {
    let mut worst_rel = 0.0f64;
    for &p in &[2.0, 3.0] {
        for k in [2usize, 3] {
            let graph = synthetic_corner_graph(0.0, 1.0, p, k, 0.8, 1.2, 1e-5, 0.15, 60);
            let beta = corner_exponent(k, p);
            for side in [Side::Left, Side::Right] {
                let fit = corner_fit(&graph, 0.0, p, k, side, 3.0).unwrap();
                worst_rel = worst_rel.max((fit.exponent_fit - beta).abs() / beta);
            }
        }
    }
    let ok = worst_rel <= 0.05;
    report(
        9,
        ok,
        &format!(
            "corner exponent within {:.2}% of (k-1)(p-1)/2 across k in {{2,3}}, p in {{2,3}} \
             on >= 3 decades (tol 5%)",
            worst_rel * 100.0
        ),
    );
}

#[test]
fn c10_weighted_ratio_is_bounded_and_grid_stable() {
    let p = 3.0;
    let coarse = YGrid::clustered(401, 1e-3).unwrap();
    let fine = YGrid::clustered(801, 1e-3).unwrap();
    let r1 = hardy_sobolev_max_ratio(&coarse, p, 500, 7);
    let r2 = hardy_sobolev_max_ratio(&fine, p, 500, 7);
    let rel = (r2 - r1).abs() / r1;
    let ok = r1.is_finite() && r2.is_finite() && rel < 0.05;
    report(
        10,
        ok,
        &format!(
            "max ratio over 500 random functions: {r1:.4} at n=401, {r2:.4} at n=801, \
             change {:.2}% (tol 5%)",
            rel * 100.0
        ),
    );
}

#[test]
fn c11_shrinking_ball_constant_is_refinement_stable() {
    let base = EquationSpec::klein_gordon(3.0, 1).unwrap();
    let c_fit = |lambda: f64, n: usize| {
        let spec = base.rescaled(lambda);
        let grid = RadialGrid::new(-2.0, 2.0, n, 1).unwrap();
        let u: Vec<f64> = (0..n)
            .map(|j| {
                let s: f64 = grid.r(j) / 0.6;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    0.3 * (1.0 - s * s).powi(4)
                }
            })
            .collect();
        let init = RadialState::new(u, vec![0.0; n]);
        let controls = SolveControls {
            t_end: Some(0.8),
            target_slices: 120,
            ..Default::default()
        };
        let traj = evolve(&spec, &grid, &init, &controls).unwrap();
        verify_energy_lemma(&traj, lambda, &base).unwrap().c_fit
    };
    let mut ok = true;
    let mut detail = String::new();
    for &lambda in &[1.0, 0.1] {
        let coarse = c_fit(lambda, 801);
        let fine = c_fit(lambda, 1601);
        let rel = (fine - coarse).abs() / coarse.abs().max(f64::MIN_POSITIVE);
        detail.push_str(&format!(
            "lambda={lambda}: C {coarse:.4} -> {fine:.4} ({:.2}%); ",
            rel * 100.0
        ));
        if !(rel <= 0.10) {
            ok = false;
        }
    }
    report(11, ok, &format!("{detail}tol 10% under grid doubling"));
}

#[test]
fn c12_solver_is_second_order() {
    // small-amplitude Klein-Gordon pulse; fixed step counts land every
    // resolution on exactly t = 0.45, so the comparison is same-time.
    // Compactly supported data: the support (light cone included) stays
    // inside the domain, so the one-sided boundary stencils never see a
    // signal and the interior scheme's order is what gets measured.
    let spec = EquationSpec::klein_gordon(3.0, 1).unwrap();
    let solve = |n: usize, steps: usize| {
        let grid = RadialGrid::new(-1.0, 1.0, n, 1).unwrap();
        let u: Vec<f64> = (0..n)
            .map(|j| {
                let s = grid.r(j) / 0.5;
                if s.abs() >= 1.0 { 0.0 } else { 0.05 * (1.0 - s * s).powi(8) }
            })
            .collect();
        let init = RadialState::new(u, vec![0.0; n]);
        let controls = SolveControls {
            max_steps: steps,
            target_slices: 10 * steps,
            ..Default::default()
        };
        let traj = evolve(&spec, &grid, &init, &controls).unwrap();
        (traj.times.last().copied().unwrap(), traj.slices.last().unwrap().u.clone())
    };
    let (t1, u129) = solve(129, 64);
    let (t2, u257) = solve(257, 128);
    let (t3, u513) = solve(513, 256);
    assert!((t1 - t2).abs() < 1e-12 && (t2 - t3).abs() < 1e-12, "{t1} {t2} {t3}");

    let max_err = |coarse: &[f64], fine: &[f64]| {
        coarse
            .iter()
            .enumerate()
            .map(|(j, &c)| (c - fine[2 * j]).abs())
            .fold(0.0f64, f64::max)
    };
    let e_coarse = max_err(&u129, &u257);
    let e_fine = max_err(&u257, &u513);
    let ratio = e_coarse / e_fine;
    let ok = (3.5..=4.5).contains(&ratio);
    report(
        12,
        ok,
        &format!(
            "error {e_coarse:.3e} -> {e_fine:.3e} under halving dr,dt: ratio {ratio:.2} \
             (need 3.5..4.5)"
        ),
    );
}

#[test]
fn c13_every_experiment_replays_byte_identically() {
    let equation = r#"
[equation]
preset = "pure_power"
p = 3.0
N = 1
"#;
    let configs: Vec<(&str, String)> = vec![
        (
            "simulate",
            format!(
                r#"experiment = "simulate"
{equation}
[radial]
r_min = -1.0
r_max = 1.0
n = 64
blowup_threshold = 50.0
fitting_floor = 3.0
target_slices = 50
[initial]
kind = "constant"
amplitude = 1.0
"#
            ),
        ),
        (
            "similarity",
            format!(
                r#"experiment = "similarity"
seed = 3
{equation}
[similarity]
n = 65
s0 = 0.0
s_end = 0.4
out_ds = 0.1
[similarity.w_init]
kind = "generic"
amplitude = 0.4
"#
            ),
        ),
        (
            "diagnose",
            format!(
                r#"experiment = "diagnose"
{equation}
[similarity]
n = 65
s0 = 0.0
s_end = 0.4
out_ds = 0.1
[similarity.w_init]
kind = "kappa_perturbed"
d = 0.2
amplitude = 0.05
"#
            ),
        ),
        (
            "decompose",
            format!(
                r#"experiment = "decompose"
seed = 12
{equation}
[decompose]
k = 2
grid_n = 129
k_max = 3
"#
            ),
        ),
        (
            "centers",
            format!(
                r#"experiment = "centers"
{equation}
[centers]
k = 3
s_lo = 2.0
s_hi = 500.0
samples = 40
forcing_amp = 0.1
"#
            ),
        ),
        (
            "geometry",
            format!(
                r#"experiment = "geometry"
{equation}
[radial]
r_min = -1.0
r_max = 1.0
n = 128
blowup_threshold = 1000.0
fitting_floor = 5.0
target_slices = 300
[initial]
kind = "constant"
amplitude = 1.0
[geometry]
r0 = 0.0
window = 0.4
"#
            ),
        ),
        (
            "energy",
            format!(
                r#"experiment = "energy"
[equation]
preset = "klein_gordon"
p = 3.0
N = 1
[radial]
r_min = -2.0
r_max = 2.0
n = 201
t_end = 0.5
target_slices = 40
[initial]
kind = "bump"
amplitude = 0.3
center = 0.0
width = 0.6
[energy]
lambda = 0.5
"#
            ),
        ),
    ];
    let root = tempfile::tempdir().unwrap();
    let mut ok = true;
    let mut detail = String::new();
    let mut artifacts = 0usize;
    for (name, toml_src) in &configs {
        let config = ExperimentConfig::from_toml(toml_src)
            .unwrap_or_else(|e| panic!("{name} config: {e}"));
        let dir = root.path().join(name);
        let manifest = run_experiment_at(&config, &dir)
            .unwrap_or_else(|e| panic!("{name} run: {e}"));
        artifacts += manifest.outputs.len();
        match replay(&dir.join(MANIFEST_NAME)) {
            Ok(_) => {}
            Err(e) => {
                ok = false;
                detail.push_str(&format!(" {name}: {e};"));
            }
        }
    }
    report(
        13,
        ok,
        &format!(
            "all {} experiment kinds replay byte-identically ({artifacts} artifacts){detail}",
            configs.len()
        ),
    );
}
