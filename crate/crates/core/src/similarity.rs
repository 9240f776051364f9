//! Similarity variables around a prospective blow-up point.
//!
//! For a point (r₀, T₀) define
//!
//! ```text
//! w(y, s) = (T₀−t)^{2/(p−1)} u(r₀ + y(T₀−t), t),   s = −log(T₀−t),
//! ```
//!
//! so the backward light cone of (r₀, T₀) becomes the slab |y| < 1, s ≥ s₀.
//! The transformed equation is
//!
//! ```text
//! ∂ₛ²w = 𝓛w − 2(p+1)/(p−1)² w + |w|^{p−1}w − (p+3)/(p−1) ∂ₛw − 2y ∂ᵧ∂ₛw
//!        + e^{−s}(N−1)/(r₀+y e^{−s}) ∂ᵧw
//!        + e^{−2ps/(p−1)} f(e^{2s/(p−1)} w) + (g-term),
//!
//! 𝓛w = (1/ρ) ∂ᵧ(ρ(1−y²)∂ᵧw),   ρ(y) = (1−y²)^{2/(p−1)}.
//! ```
//!
//! 𝓛 is discretized in flux form on the clustered grid with zero flux
//! through the cutoff faces: the operator degenerates at |y| = 1, no
//! boundary condition is imposed, and zero exterior flux is what preserves
//! the summation-by-parts identity the Lyapunov functionals rely on.
//!
//! `to_similarity` evaluates w, ∂ᵧw, ∂ₛw from a stored radial trajectory by
//! cubic interpolation in r and t; the chain rule is applied analytically
//! (∂ᵧw from the interpolant's r-derivative, ∂ₛw from the stored ∂ₜu), so
//! no interpolant is numerically differentiated twice.

use crate::error::{Error, Result};
use crate::model::EquationSpec;
use crate::radial_solver::RadialTrajectory;
use crate::ygrid::YGrid;
use std::sync::Arc;

/// One similarity-time slice on the shared clustered grid.
#[derive(Debug, Clone)]
pub struct SimilarityFrame {
    pub grid: Arc<YGrid>,
    pub s: f64,
    pub w: Vec<f64>,
    /// ∂ₛw
    pub ws: Vec<f64>,
    /// ∂ᵧw
    pub wy: Vec<f64>,
}

impl SimilarityFrame {
    /// Frame from explicit profiles; wy is computed from w by grid
    /// differences unless provided.
    pub fn new(grid: Arc<YGrid>, s: f64, w: Vec<f64>, ws: Vec<f64>, wy: Option<Vec<f64>>) -> Self {
        let wy = wy.unwrap_or_else(|| {
            let mut out = vec![0.0; w.len()];
            grid.derivative(&w, &mut out);
            out
        });
        SimilarityFrame { grid, s, w, ws, wy }
    }
}

/// A sequence of frames sharing one grid and blow-up point.
#[derive(Debug, Clone)]
pub struct WTrajectory {
    pub spec: EquationSpec,
    pub grid: Arc<YGrid>,
    pub r0: f64,
    pub t0: f64,
    pub frames: Vec<SimilarityFrame>,
}

/// Controls for the w-equation evolution.
#[derive(Debug, Clone)]
pub struct WControls {
    /// Step fraction of the characteristic limit min Δy/(1+|y|).
    pub cfl: f64,
    /// Output spacing in s.
    pub out_ds: f64,
    pub max_steps: usize,
    /// |w| beyond this is treated as blow-up of w itself.
    pub w_cap: f64,
}

impl Default for WControls {
    fn default() -> Self {
        WControls { cfl: 1.2, out_ds: 0.02, max_steps: 400_000_000, w_cap: 1e8 }
    }
}

/// ρ(y) = (1−y²)^{2/(p−1)}.
pub fn rho(p: f64, y: f64) -> f64 {
    (1.0 - y * y).powf(2.0 / (p - 1.0))
}

/// Precomputed flux-form discretization of 𝓛 on a grid.
pub struct LOperator {
    /// ρ(y_f)(1−y_f²)/h_f at interior faces.
    face_c: Vec<f64>,
    /// 1/(ρ(y_j)·cell_j).
    inv_rho_cell: Vec<f64>,
}

impl LOperator {
    pub fn new(grid: &YGrid, p: f64) -> LOperator {
        let face_c = grid
            .face_midpoints()
            .iter()
            .zip(grid.face_widths())
            .map(|(&ym, &h)| rho(p, ym) * (1.0 - ym * ym) / h)
            .collect();
        let inv_rho_cell = grid
            .nodes()
            .iter()
            .zip(grid.cells())
            .map(|(&y, &c)| 1.0 / (rho(p, y) * c))
            .collect();
        LOperator { face_c, inv_rho_cell }
    }

    /// Apply 𝓛 in flux form; zero flux through the cutoff faces.
    pub fn apply(&self, w: &[f64], out: &mut [f64]) {
        let n = w.len();
        debug_assert_eq!(out.len(), n);
        let mut flux_prev = 0.0;
        for j in 0..n {
            let flux_next = if j < n - 1 { self.face_c[j] * (w[j + 1] - w[j]) } else { 0.0 };
            out[j] = (flux_next - flux_prev) * self.inv_rho_cell[j];
            flux_prev = flux_next;
        }
    }

    /// The discrete Dirichlet energy paired with `apply` by summation by
    /// parts: ∑ c_f (Δw)²/h_f = −∑ (𝓛w)_j w_j ρ_j cell_j exactly.
    pub fn dirichlet_energy(&self, w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for j in 0..w.len() - 1 {
            let d = w[j + 1] - w[j];
            acc += self.face_c[j] * d * d;
        }
        acc
    }
}

/// Build 𝓛w on the grid (convenience for single applications).
pub fn apply_l(grid: &YGrid, p: f64, w: &[f64]) -> Vec<f64> {
    let op = LOperator::new(grid, p);
    let mut out = vec![0.0; w.len()];
    op.apply(w, &mut out);
    out
}

/// Transform a radial trajectory to similarity variables around (r0, t0)
/// at the requested s values.
pub fn to_similarity(
    traj: &RadialTrajectory,
    r0: f64,
    t0: f64,
    s_values: &[f64],
    grid: Arc<YGrid>,
) -> Result<WTrajectory> {
    let p = traj.spec.p;
    let a = 2.0 / (p - 1.0);
    let times = &traj.times;
    let t_lo = times[0];
    let t_hi = *times.last().unwrap();
    let mut frames = Vec::with_capacity(s_values.len());
    for &s in s_values {
        let phi = (-s).exp(); // T0 - t
        let t = t0 - phi;
        if t < t_lo || t > t_hi {
            return Err(Error::OutOfDomain {
                y: 0.0,
                s,
                detail: format!("t = {t} outside stored range [{t_lo}, {t_hi}]"),
            });
        }
        let n = grid.n();
        let mut w = vec![0.0; n];
        let mut ws = vec![0.0; n];
        let mut wy = vec![0.0; n];
        let scale = phi.powf(a);
        let scale_d = phi.powf(a + 1.0); // (T0-t)^{(p+1)/(p-1)}
        for (j, &y) in grid.nodes().iter().enumerate() {
            let r = r0 + y * phi;
            if r < traj.grid.r_min || r > traj.grid.r_max {
                return Err(Error::OutOfDomain {
                    y,
                    s,
                    detail: format!(
                        "r = {r} outside grid [{}, {}]",
                        traj.grid.r_min, traj.grid.r_max
                    ),
                });
            }
            let (u, ur, ut) = interp_space_time(traj, r, t);
            w[j] = scale * u;
            wy[j] = scale_d * ur;
            ws[j] = -a * w[j] - y * wy[j] + scale_d * ut;
        }
        frames.push(SimilarityFrame { grid: grid.clone(), s, w, ws, wy });
    }
    Ok(WTrajectory { spec: traj.spec.clone(), grid, r0, t0, frames })
}

/// Cubic Lagrange interpolation of (u, ∂ᵣu, ∂ₜu) at (r, t): 4-point
/// stencils in each direction; ∂ᵣu is the analytic derivative of the
/// spatial interpolant; ∂ₜu interpolates the stored velocity field.
fn interp_space_time(traj: &RadialTrajectory, r: f64, t: f64) -> (f64, f64, f64) {
    let times = &traj.times;
    let m = times.len();
    let k = match times.binary_search_by(|probe| probe.partial_cmp(&t).unwrap()) {
        Ok(i) => i,
        Err(i) => i.saturating_sub(1),
    };
    let k0 = k.saturating_sub(1).min(m.saturating_sub(4));
    let kn = (k0 + 4).min(m);
    let mut us = [0.0; 4];
    let mut urs = [0.0; 4];
    let mut uts = [0.0; 4];
    let mut tk = [0.0; 4];
    for (idx, kk) in (k0..kn).enumerate() {
        let slice = &traj.slices[kk];
        let (u, ur) = interp_space(&slice.u, traj.grid.r_min, traj.grid.dr, r);
        let (ut, _) = interp_space(&slice.v, traj.grid.r_min, traj.grid.dr, r);
        us[idx] = u;
        urs[idx] = ur;
        uts[idx] = ut;
        tk[idx] = times[kk];
    }
    let nk = kn - k0;
    (
        lagrange(&tk[..nk], &us[..nk], t),
        lagrange(&tk[..nk], &urs[..nk], t),
        lagrange(&tk[..nk], &uts[..nk], t),
    )
}

/// Cubic Lagrange on a uniform grid: value and analytic derivative.
fn interp_space(f: &[f64], r_min: f64, dr: f64, r: f64) -> (f64, f64) {
    let n = f.len();
    let x = (r - r_min) / dr;
    let i = (x.floor() as isize).clamp(1, n as isize - 3) as usize;
    let j0 = i - 1;
    let xs: Vec<f64> = (0..4).map(|k| (j0 + k) as f64).collect();
    let ys = &f[j0..j0 + 4];
    let v = lagrange(&xs, ys, x);
    let d = lagrange_derivative(&xs, ys, x) / dr;
    (v, d)
}

fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut li = 1.0;
        for j in 0..n {
            if j != i {
                li *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += ys[i] * li;
    }
    acc
}

fn lagrange_derivative(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut dsum = 0.0;
        for k in 0..n {
            if k == i {
                continue;
            }
            let mut term = 1.0 / (xs[i] - xs[k]);
            for j in 0..n {
                if j != i && j != k {
                    term *= (x - xs[j]) / (xs[i] - xs[j]);
                }
            }
            dsum += term;
        }
        acc += ys[i] * dsum;
    }
    acc
}

/// Evolve the w-equation from (w0, ws0) at s0 to s_end, emitting frames
/// every `out_ds`.  Explicit RK4; the step obeys the characteristic speeds
/// −y ± 1 of the principal part on the clustered grid.
#[allow(clippy::too_many_arguments)]
pub fn evolve_w(
    spec: &EquationSpec,
    grid: Arc<YGrid>,
    r0: f64,
    t0: f64,
    w0: &[f64],
    ws0: &[f64],
    s0: f64,
    s_end: f64,
    controls: &WControls,
) -> Result<WTrajectory> {
    let n = grid.n();
    assert_eq!(w0.len(), n);
    assert_eq!(ws0.len(), n);
    if spec.n_dim >= 2 {
        let needed = (-(r0 / 2.0).ln()).max(-t0.ln());
        if s0 < needed {
            return Err(Error::OutOfDomain {
                y: 0.0,
                s: s0,
                detail: format!(
                    "s0 must be >= max(-log T0, -log(r0/2)) = {needed} for the drift term"
                ),
            });
        }
    }
    let op = LOperator::new(&grid, spec.p);
    let p = spec.p;
    let c0 = 2.0 * (p + 1.0) / ((p - 1.0) * (p - 1.0));
    let c1 = (p + 3.0) / (p - 1.0);
    let nd = spec.n_dim as f64;
    let ys = grid.nodes().to_vec();

    // characteristic step limit
    let mut ds_lim = f64::INFINITY;
    for j in 0..n - 1 {
        let h = grid.face_widths()[j];
        let speed = 1.0 + ys[j].abs().max(ys[j + 1].abs());
        ds_lim = ds_lim.min(h / speed);
    }
    let ds = controls.cfl * ds_lim;
    let total_steps = ((s_end - s0) / ds).ceil() as usize;
    if total_steps > controls.max_steps {
        return Err(Error::InvalidGrid {
            detail: format!(
                "evolution needs {total_steps} steps > max_steps {}",
                controls.max_steps
            ),
        });
    }
    let out_every = (controls.out_ds / ds).round().max(1.0) as usize;

    let mut w = w0.to_vec();
    let mut v = ws0.to_vec();
    let mut frames = Vec::new();
    let mut emit = |s: f64, w: &[f64], v: &[f64]| -> Result<()> {
        let mut wy = vec![0.0; n];
        grid.derivative(w, &mut wy);
        let max = w.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if !max.is_finite() || max > controls.w_cap {
            return Err(Error::NonFinite { t: s, step: frames.len() });
        }
        frames.push(SimilarityFrame { grid: grid.clone(), s, w: w.to_vec(), ws: v.to_vec(), wy });
        Ok(())
    };

    let rhs = |s: f64, w: &[f64], v: &[f64], dw: &mut [f64], dv: &mut [f64],
               wy: &mut [f64], vy: &mut [f64], lw: &mut [f64]| {
        grid.derivative(w, wy);
        grid.derivative(v, vy);
        op.apply(w, lw);
        let es = (-s).exp();
        let has_f = !spec.f.is_zero();
        let has_g = !spec.g.is_zero();
        for j in 0..n {
            let y = ys[j];
            let wj = w[j];
            let mut acc = lw[j] - c0 * wj + wj.abs().powf(p - 1.0) * wj - c1 * v[j]
                - 2.0 * y * vy[j];
            if nd >= 2.0 {
                acc += es * (nd - 1.0) / (r0 + y * es) * wy[j];
            }
            if has_f {
                acc += spec.scaled_f(s, wj);
            }
            if has_g {
                acc += spec.scaled_g(s, y, r0, t0, wj, wy[j], v[j]);
            }
            dw[j] = v[j];
            dv[j] = acc;
        }
    };

    // scratch
    let mut k1w = vec![0.0; n];
    let mut k1v = vec![0.0; n];
    let mut k2w = vec![0.0; n];
    let mut k2v = vec![0.0; n];
    let mut k3w = vec![0.0; n];
    let mut k3v = vec![0.0; n];
    let mut k4w = vec![0.0; n];
    let mut k4v = vec![0.0; n];
    let mut tw = vec![0.0; n];
    let mut tv = vec![0.0; n];
    let mut wy = vec![0.0; n];
    let mut vy = vec![0.0; n];
    let mut lw = vec![0.0; n];

    emit(s0, &w, &v)?;
    let mut s = s0;
    for step in 1..=total_steps {
        let h = ds.min(s_end - s);
        rhs(s, &w, &v, &mut k1w, &mut k1v, &mut wy, &mut vy, &mut lw);
        for j in 0..n {
            tw[j] = w[j] + 0.5 * h * k1w[j];
            tv[j] = v[j] + 0.5 * h * k1v[j];
        }
        rhs(s + 0.5 * h, &tw, &tv, &mut k2w, &mut k2v, &mut wy, &mut vy, &mut lw);
        for j in 0..n {
            tw[j] = w[j] + 0.5 * h * k2w[j];
            tv[j] = v[j] + 0.5 * h * k2v[j];
        }
        rhs(s + 0.5 * h, &tw, &tv, &mut k3w, &mut k3v, &mut wy, &mut vy, &mut lw);
        for j in 0..n {
            tw[j] = w[j] + h * k3w[j];
            tv[j] = v[j] + h * k3v[j];
        }
        rhs(s + h, &tw, &tv, &mut k4w, &mut k4v, &mut wy, &mut vy, &mut lw);
        for j in 0..n {
            w[j] += h / 6.0 * (k1w[j] + 2.0 * k2w[j] + 2.0 * k3w[j] + k4w[j]);
            v[j] += h / 6.0 * (k1v[j] + 2.0 * k2v[j] + 2.0 * k3v[j] + k4v[j]);
        }
        s += h;
        if step % out_every == 0 || s >= s_end {
            // cutoff concentration guard
            let edge = w
                .iter()
                .take(3)
                .chain(w.iter().rev().take(3))
                .fold(0.0f64, |m, &x| m.max(x.abs()));
            let mut interior: Vec<f64> =
                w[3..n - 3].iter().map(|x| x.abs()).collect();
            interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = interior[interior.len() / 2];
            if edge > 10.0 * median && edge > 1e-3 {
                return Err(Error::CutoffViolation { s, edge, median });
            }
            emit(s, &w, &v)?;
            if s >= s_end {
                break;
            }
        }
    }
    Ok(WTrajectory { spec: spec.clone(), grid, r0, t0, frames })
}
