//! Local energy bounds near the blow-up graph.
//!
//! For the λ-dilated equation the natural localized energy lives on balls
//! shrinking at light speed,
//!
//! ```text
//! 𝓔(U(t)) = ∫_{|x| < 1−t} [ ½(∂ₜU)² + ½|∇U|² − |U|^{p+1}/(p+1)
//!            − λ^{(2p+2)/(p−1)} F(λ^{−2/(p−1)} U) ] dx,
//! ```
//!
//! with F the antiderivative of the unscaled lower-order term f.  Along a
//! solution, 𝓔 at time t is controlled by its initial value plus two
//! non-negative accumulations: the |U|^{p+1} flux through the lateral cone
//! boundary {|x| = 1−s} and λ times the same density over the interior,
//! up to one multiplicative constant and an additive λ^{2/(p−1)}.  This
//! module evaluates both sides of that inequality on stored radial
//! trajectories and fits the smallest constant that makes it hold.
//!
//! The radial measure is ω_{N−1} r^{N−1} dr for N ≥ 2 (state sampled on
//! [0, 1−t]); for N = 1 the "ball" is the interval (−(1−t), 1−t) and the
//! lateral boundary reduces to its two endpoints.

use crate::error::{Error, Result};
use crate::model::EquationSpec;
use crate::radial_solver::{RadialGrid, RadialState, RadialTrajectory};
use serde::{Deserialize, Serialize};

/// Surface measure of the unit sphere S^{N−1}: 2π^{N/2}/Γ(N/2).
/// ω₀ = 2 (two endpoints), ω₁ = 2π, ω₂ = 4π.
pub fn sphere_measure(n_dim: u32) -> f64 {
    let pi = std::f64::consts::PI;
    // Γ(m/2) by the recursion Γ(x+1) = xΓ(x) from Γ(1/2) = √π, Γ(1) = 1
    let mut gamma = if n_dim % 2 == 1 { pi.sqrt() } else { 1.0 };
    let mut x = if n_dim % 2 == 1 { 0.5 } else { 1.0 };
    while x + 1.0 <= n_dim as f64 / 2.0 + 1e-12 {
        gamma *= x;
        x += 1.0;
    }
    2.0 * pi.powf(n_dim as f64 / 2.0) / gamma
}

/// Integrate the piecewise-linear interpolant of nodal values over
/// [a, b] ⊆ [r_min, r_max].
fn trapezoid_between(vals: &[f64], grid: &RadialGrid, a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    let n = vals.len();
    let pos = |x: f64| (x - grid.r_min) / grid.dr;
    let value_at = |x: f64| {
        let s = pos(x).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let frac = s - i as f64;
        vals[i] * (1.0 - frac) + vals[i + 1] * frac
    };
    let ia = pos(a).ceil().max(0.0) as usize;
    let ib = (pos(b).floor() as usize).min(n - 1);
    if ia > ib {
        return 0.5 * (value_at(a) + value_at(b)) * (b - a);
    }
    let mut total = 0.0;
    for j in ia..ib {
        total += 0.5 * (vals[j] + vals[j + 1]) * grid.dr;
    }
    let ra = grid.r(ia);
    if ra > a {
        total += 0.5 * (value_at(a) + vals[ia]) * (ra - a);
    }
    let rb = grid.r(ib);
    if rb < b {
        total += 0.5 * (vals[ib] + value_at(b)) * (b - rb);
    }
    total
}

/// Linear interpolation of nodal values at one point.
fn sample_at(vals: &[f64], grid: &RadialGrid, x: f64) -> f64 {
    let n = vals.len();
    let s = ((x - grid.r_min) / grid.dr).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    let frac = s - i as f64;
    vals[i] * (1.0 - frac) + vals[i + 1] * frac
}

/// Central-difference radial derivative on the uniform grid (one-sided at
/// the array ends).
fn radial_derivative(u: &[f64], dr: f64) -> Vec<f64> {
    let n = u.len();
    let mut du = vec![0.0; n];
    du[0] = (u[1] - u[0]) / dr;
    du[n - 1] = (u[n - 1] - u[n - 2]) / dr;
    for j in 1..n - 1 {
        du[j] = (u[j + 1] - u[j - 1]) / (2.0 * dr);
    }
    du
}

fn check_ball_coverage(grid: &RadialGrid, n_dim: u32, radius: f64) -> Result<()> {
    let slack = 1e-9 * grid.dr;
    if n_dim == 1 {
        if grid.r_min > -radius + slack || grid.r_max < radius - slack {
            return Err(Error::DomainCoverage {
                detail: format!(
                    "N = 1 ball |x| < {radius} needs the grid to cover [{}, {}], have [{}, {}]",
                    -radius, radius, grid.r_min, grid.r_max
                ),
            });
        }
    } else {
        // solver grids keep r_min > 0 (axis term); a start within half a
        // cell of the axis leaves an uncovered core of mass O(r_min^N),
        // below the quadrature error
        if grid.r_min > 0.5 * grid.dr {
            return Err(Error::DomainCoverage {
                detail: format!(
                    "N = {n_dim} ball integral needs the grid to start within dr/2 of r = 0, \
                     have r_min = {}",
                    grid.r_min
                ),
            });
        }
        if grid.r_max < radius - slack {
            return Err(Error::DomainCoverage {
                detail: format!(
                    "ball radius {radius} exceeds the grid extent {}",
                    grid.r_max
                ),
            });
        }
    }
    Ok(())
}

/// Integrate nodal values over the ball {|x| < radius} with the radial
/// surface measure (interval measure for N = 1).
fn ball_integral(vals: &[f64], grid: &RadialGrid, n_dim: u32, radius: f64) -> f64 {
    if n_dim == 1 {
        trapezoid_between(vals, grid, -radius, radius)
    } else {
        let om = sphere_measure(n_dim);
        let weighted: Vec<f64> = vals
            .iter()
            .enumerate()
            .map(|(j, &v)| om * grid.r(j).powi(n_dim as i32 - 1) * v)
            .collect();
        trapezoid_between(&weighted, grid, grid.r_min.max(0.0), radius)
    }
}

/// The shrinking-ball energy 𝓔(U(t)) of one state.  `spec` is the base
/// (unscaled) equation: its antiderivative F enters through the dilation
/// factors, so the same spec serves every λ ∈ (0, 1].
pub fn e_bar(
    state: &RadialState,
    grid: &RadialGrid,
    t: f64,
    lambda: f64,
    spec: &EquationSpec,
) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::DomainCoverage {
            detail: format!("shrinking-ball time t = {t} outside [0, 1)"),
        });
    }
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config { detail: format!("lambda = {lambda} outside (0, 1]") });
    }
    let radius = 1.0 - t;
    check_ball_coverage(grid, spec.n_dim, radius)?;
    let p = spec.p;
    let du = radial_derivative(&state.u, grid.dr);
    let lam_out = lambda.powf((2.0 * p + 2.0) / (p - 1.0));
    let lam_in = lambda.powf(-2.0 / (p - 1.0));
    let f_zero = spec.f.is_zero();
    let integrand: Vec<f64> = state
        .u
        .iter()
        .zip(&state.v)
        .zip(&du)
        .map(|((&u, &v), &ux)| {
            let mut e = 0.5 * v * v + 0.5 * ux * ux - u.abs().powf(p + 1.0) / (p + 1.0);
            if !f_zero {
                e -= lam_out * spec.antiderivative_f(lam_in * u);
            }
            e
        })
        .collect();
    Ok(ball_integral(&integrand, grid, spec.n_dim, radius))
}

/// Kinetic plus gradient energy on the shrinking ball, no potential terms.
/// For free-wave data still supported inside the ball this is conserved
/// (the classical flux identity), which calibrates the quadrature.
pub fn linear_wave_energy(
    state: &RadialState,
    grid: &RadialGrid,
    t: f64,
    n_dim: u32,
) -> Result<f64> {
    if !(0.0..1.0).contains(&t) {
        return Err(Error::DomainCoverage {
            detail: format!("shrinking-ball time t = {t} outside [0, 1)"),
        });
    }
    let radius = 1.0 - t;
    check_ball_coverage(grid, n_dim, radius)?;
    let du = radial_derivative(&state.u, grid.dr);
    let integrand: Vec<f64> = state
        .v
        .iter()
        .zip(&du)
        .map(|(&v, &ux)| 0.5 * v * v + 0.5 * ux * ux)
        .collect();
    Ok(ball_integral(&integrand, grid, n_dim, radius))
}

/// One time sample of the lemma's bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalEnergyReadout {
    pub t: f64,
    pub e_bar: f64,
    /// Cumulative lateral flux ∫₀ᵗ ∫_{|x|=1−s} |U|^{p+1}.
    pub boundary_cum: f64,
    /// Cumulative interior term λ ∫₀ᵗ ∫_{|x|<1−s} |U|^{p+1}.
    pub interior_cum: f64,
    pub lambda: f64,
}

/// Result of fitting the lemma inequality
/// 𝓔(t) ≤ C·[𝓔(0) + boundary_cum(t) + interior_cum(t) + λ^{2/(p−1)}]
/// along a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyLemmaReport {
    pub lambda: f64,
    pub readouts: Vec<LocalEnergyReadout>,
    /// Smallest constant making the inequality hold wherever the bracket is
    /// positive (0 when the left side never exceeds 0).
    pub c_fit: f64,
    /// Times where the bracket is non-positive while 𝓔(t) > 0: no constant
    /// can repair those.
    pub impossible: Vec<f64>,
}

impl EnergyLemmaReport {
    /// Right-hand bracket at one readout (to be multiplied by the constant).
    pub fn bracket(&self, r: &LocalEnergyReadout, p: f64) -> f64 {
        let e0 = self.readouts.first().map_or(0.0, |first| first.e_bar);
        e0 + r.boundary_cum + r.interior_cum + self.lambda.powf(2.0 / (p - 1.0))
    }
}

/// Evaluate the shrinking-ball lemma along `traj` (which should solve the
/// λ-dilated equation, see [`EquationSpec::rescaled`]) and fit the
/// constant.  `base_spec` is the unscaled equation providing p and F.
pub fn verify_energy_lemma(
    traj: &RadialTrajectory,
    lambda: f64,
    base_spec: &EquationSpec,
) -> Result<EnergyLemmaReport> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Config { detail: format!("lambda = {lambda} outside (0, 1]") });
    }
    debug_assert_eq!(traj.spec.p, base_spec.p);
    let p = base_spec.p;
    let n_dim = base_spec.n_dim;
    let grid = &traj.grid;
    let om = sphere_measure(n_dim);

    let mut readouts: Vec<LocalEnergyReadout> = Vec::new();
    let mut boundary_cum = 0.0;
    let mut interior_cum = 0.0;
    let mut prev: Option<(f64, f64, f64)> = None; // (t, boundary rate, interior rate)
    for (&t, slice) in traj.times.iter().zip(&traj.slices) {
        if !(0.0..1.0).contains(&t) {
            continue;
        }
        let radius = 1.0 - t;
        let e = e_bar(slice, grid, t, lambda, base_spec)?;
        let density: Vec<f64> = slice.u.iter().map(|&u| u.abs().powf(p + 1.0)).collect();
        let boundary_rate = if n_dim == 1 {
            sample_at(&density, grid, radius) + sample_at(&density, grid, -radius)
        } else {
            om * radius.powi(n_dim as i32 - 1) * sample_at(&density, grid, radius)
        };
        let interior_rate = lambda * ball_integral(&density, grid, n_dim, radius);
        if let Some((t0, b0, i0)) = prev {
            let dt = t - t0;
            boundary_cum += 0.5 * (b0 + boundary_rate) * dt;
            interior_cum += 0.5 * (i0 + interior_rate) * dt;
        }
        prev = Some((t, boundary_rate, interior_rate));
        readouts.push(LocalEnergyReadout { t, e_bar: e, boundary_cum, interior_cum, lambda });
    }
    if readouts.len() < 2 {
        return Err(Error::DomainCoverage {
            detail: format!(
                "need at least 2 stored slices with t in [0, 1), found {}",
                readouts.len()
            ),
        });
    }

    let e0 = readouts[0].e_bar;
    let additive = lambda.powf(2.0 / (p - 1.0));
    let mut c_fit = 0.0f64;
    let mut impossible = Vec::new();
    for r in &readouts {
        let bracket = e0 + r.boundary_cum + r.interior_cum + additive;
        if bracket > 0.0 {
            c_fit = c_fit.max(r.e_bar / bracket);
        } else if r.e_bar > 0.0 {
            impossible.push(r.t);
        }
    }
    Ok(EnergyLemmaReport { lambda, readouts, c_fit, impossible })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_solver::{evolve, RunStatus, SolveControls};

    fn line_grid(n: usize, half: f64) -> RadialGrid {
        RadialGrid::new(-half, half, n, 1).unwrap()
    }

    #[test]
    fn sphere_measures_match_known_values() {
        assert!((sphere_measure(1) - 2.0).abs() < 1e-14);
        assert!((sphere_measure(2) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((sphere_measure(3) - 4.0 * std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let spec = EquationSpec::pure_power(3.0, 1).unwrap();
        let grid = line_grid(801, 1.2);
        let state = RadialState::new(vec![0.0; 801], vec![0.0; 801]);
        for lam in [1.0, 0.5, 0.1] {
            assert_eq!(e_bar(&state, &grid, 0.0, lam, &spec).unwrap(), 0.0);
        }
    }

    #[test]
    fn constant_state_closed_forms() {
        // pure power: E = 2(1-t)·(−c^{p+1}/(p+1)); Klein-Gordon at λ adds
        // +λ²c²/2 inside the integrand
        let c = 0.7f64;
        let grid = line_grid(1201, 1.2);
        let state = RadialState::new(vec![c; 1201], vec![0.0; 1201]);

        let pp = EquationSpec::pure_power(3.0, 1).unwrap();
        let got = e_bar(&state, &grid, 0.0, 1.0, &pp).unwrap();
        let want = 2.0 * (-c.powi(4) / 4.0);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");

        let kg = EquationSpec::klein_gordon(3.0, 1).unwrap();
        let got = e_bar(&state, &grid, 0.0, 1.0, &kg).unwrap();
        let want = 2.0 * (-c.powi(4) / 4.0 + c * c / 2.0);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");

        let lam = 0.5f64;
        let got = e_bar(&state, &grid, 0.0, lam, &kg).unwrap();
        let want = 2.0 * (-c.powi(4) / 4.0 + lam * lam * c * c / 2.0);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");

        // shrinking ball at t = 0.25 scales the interval length
        let got = e_bar(&state, &grid, 0.25, 1.0, &pp).unwrap();
        let want = 2.0 * 0.75 * (-c.powi(4) / 4.0);
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn radial_measure_matches_closed_form_in_3d() {
        let c = 0.9f64;
        let spec = EquationSpec::pure_power(3.0, 3).unwrap();
        let grid = RadialGrid::new(1e-6, 1.2, 1201, 3).unwrap();
        let state = RadialState::new(vec![c; 1201], vec![0.0; 1201]);
        let got = e_bar(&state, &grid, 0.0, 1.0, &spec).unwrap();
        let want = -4.0 * std::f64::consts::PI / 3.0 * c.powi(4) / 4.0;
        assert!((got - want).abs() < 1e-5 * want.abs(), "{got} vs {want}");
    }

    #[test]
    fn coverage_errors_are_reported() {
        let spec1 = EquationSpec::pure_power(3.0, 1).unwrap();
        let right_half = RadialGrid::new(0.0, 2.0, 64, 1).unwrap();
        let state = RadialState::new(vec![0.1; 64], vec![0.0; 64]);
        assert!(matches!(
            e_bar(&state, &right_half, 0.0, 1.0, &spec1),
            Err(Error::DomainCoverage { .. })
        ));

        let spec3 = EquationSpec::pure_power(3.0, 3).unwrap();
        let offset = RadialGrid::new(0.5, 2.0, 64, 3).unwrap();
        assert!(matches!(
            e_bar(&state, &offset, 0.0, 1.0, &spec3),
            Err(Error::DomainCoverage { .. })
        ));

        let ok_grid = RadialGrid::new(1e-6, 2.0, 64, 3).unwrap();
        assert!(matches!(
            e_bar(&state, &ok_grid, 1.2, 1.0, &spec3),
            Err(Error::DomainCoverage { .. })
        ));
    }

    /// C³ bump supported on |x| < w.
    fn bump(x: f64, w: f64) -> f64 {
        let s = x / w;
        if s.abs() >= 1.0 { 0.0 } else { (1.0 - s * s).powi(4) }
    }

    fn bump_prime(x: f64, w: f64) -> f64 {
        let s = x / w;
        if s.abs() >= 1.0 { 0.0 } else { -8.0 * s / w * (1.0 - s * s).powi(3) }
    }

    #[test]
    fn free_wave_energy_constant_while_support_stays_inside() {
        // d'Alembert solution u = (phi(x-t) + phi(x+t))/2 with support
        // |x| < 0.3 + t: inside the shrinking ball for t <= 0.3
        let grid = line_grid(2001, 1.2);
        let w = 0.3;
        let energy_at = |t: f64| {
            let u: Vec<f64> = (0..2001)
                .map(|j| 0.5 * (bump(grid.r(j) - t, w) + bump(grid.r(j) + t, w)))
                .collect();
            let v: Vec<f64> = (0..2001)
                .map(|j| 0.5 * (-bump_prime(grid.r(j) - t, w) + bump_prime(grid.r(j) + t, w)))
                .collect();
            linear_wave_energy(&RadialState::new(u, v), &grid, t, 1).unwrap()
        };
        let e0 = energy_at(0.0);
        assert!(e0 > 0.0);
        for i in 1..=6 {
            let e = energy_at(0.05 * i as f64);
            assert!(
                (e - e0).abs() < 2e-4 * e0,
                "flux identity broken at t = {}: {e} vs {e0}",
                0.05 * i as f64
            );
        }
    }

    #[test]
    fn lemma_on_zero_solution_is_free() {
        let spec = EquationSpec::pure_power(3.0, 1).unwrap();
        let grid = line_grid(64, 1.2);
        let times: Vec<f64> = (0..10).map(|i| 0.05 * i as f64).collect();
        let slices: Vec<RadialState> =
            times.iter().map(|_| RadialState::new(vec![0.0; 64], vec![0.0; 64])).collect();
        let traj = RadialTrajectory::from_slices(
            grid,
            spec.clone(),
            times,
            slices,
            RunStatus::Completed,
        );
        let report = verify_energy_lemma(&traj, 0.5, &spec).unwrap();
        assert_eq!(report.c_fit, 0.0);
        assert!(report.impossible.is_empty());
        let last = report.readouts.last().unwrap();
        assert_eq!(last.boundary_cum, 0.0);
        assert_eq!(last.interior_cum, 0.0);
    }

    fn bump_run(spec: &EquationSpec, n: usize, t_end: f64) -> RadialTrajectory {
        let grid = RadialGrid::new(-2.0, 2.0, n, 1).unwrap();
        let u: Vec<f64> = (0..n).map(|j| 0.3 * bump(grid.r(j), 0.6)).collect();
        let init = RadialState::new(u, vec![0.0; n]);
        let controls = SolveControls {
            t_end: Some(t_end),
            target_slices: 120,
            ..SolveControls::default()
        };
        evolve(spec, &grid, &init, &controls).unwrap()
    }

    #[test]
    fn lemma_constant_stable_under_refinement() {
        let spec = EquationSpec::pure_power(3.0, 1).unwrap();
        let coarse = verify_energy_lemma(&bump_run(&spec, 801, 0.7), 1.0, &spec).unwrap();
        let fine = verify_energy_lemma(&bump_run(&spec, 1601, 0.7), 1.0, &spec).unwrap();
        assert!(coarse.impossible.is_empty() && fine.impossible.is_empty());
        assert!(coarse.c_fit > 0.0 && coarse.c_fit.is_finite());
        assert!(
            (fine.c_fit - coarse.c_fit).abs() < 0.1 * coarse.c_fit,
            "fitted constant drifts under refinement: {} -> {}",
            coarse.c_fit,
            fine.c_fit
        );
        // cumulative terms never decrease
        for r in coarse.readouts.windows(2) {
            assert!(r[1].boundary_cum >= r[0].boundary_cum);
            assert!(r[1].interior_cum >= r[0].interior_cum);
        }
    }

    #[test]
    fn lemma_holds_for_scaled_klein_gordon_at_small_lambda() {
        // the λ-dilated Klein-Gordon runs carry a mass term −λ²U; the same
        // base spec supplies F for every λ
        let base = EquationSpec::klein_gordon(3.0, 1).unwrap();
        let mut c_fits = Vec::new();
        for lam in [1.0, 0.1] {
            let scaled = base.rescaled(lam);
            let traj = bump_run(&scaled, 801, 0.7);
            let report = verify_energy_lemma(&traj, lam, &base).unwrap();
            assert!(report.impossible.is_empty(), "lambda = {lam}");
            assert!(report.c_fit.is_finite());
            c_fits.push(report.c_fit);
        }
        // one constant serves both runs: the inequality is monotone in C
        let c_star = c_fits.iter().cloned().fold(0.0f64, f64::max);
        assert!(c_star.is_finite() && c_star >= 0.0);
    }
}
