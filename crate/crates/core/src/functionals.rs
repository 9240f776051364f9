//! Lyapunov functionals in similarity variables and the weighted
//! quadrature they sit on.
//!
//! All integrals live on (−1, 1) against degenerate weights built from
//! ρ(y) = (1−y²)^{2/(p−1)}.  The grid stops at ±(1−ε); each integral is a
//! trapezoid sum over the nodes plus end caps on [±(1−ε), ±1] that use the
//! analytic limit of the weight (0 for ρ and ρ(1−y²); the finite limit of
//! ρ/(1−y²) when 2/(p−1) ≥ 1, constant extension otherwise).
//!
//! The functional hierarchy:
//!
//! ```text
//! E₀ = ∫ [½wₛ² + ½wᵧ²(1−y²) + (p+1)/(p−1)² w² − |w|^{p+1}/(p+1)] ρ dy
//! I  = −e^{−2(p+1)s/(p−1)} ∫ F(e^{2s/(p−1)} w) ρ dy,   F(u) = ∫₀ᵘ f
//! J  = −e^{−γs} ∫ w wₛ ρ dy
//! E  = E₀ + I + J
//! H  = E · exp((p+3)/(2γ) e^{−γs}) + μ e^{−2γs}
//! ```
//!
//! H is nonincreasing along solutions once μ clears the fitted constant of
//! the raw differential inequality
//!
//! ```text
//! dE/ds ≤ (p+3)/2 · e^{−γs} E − 3/(p−1) · ∫ wₛ² ρ/(1−y²) dy + C e^{−2γs},
//! ```
//!
//! and H ≥ 0 (up to tolerance) on any solution that keeps existing: a
//! negative H is the computable blow-up criterion.

use crate::error::{Error, Result};
use crate::model::{EquationSpec, Preset};
use crate::par;
use crate::similarity::{SimilarityFrame, WTrajectory};
use crate::ygrid::YGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Weight selector for `weighted_integral`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// ρ = (1−y²)^{2/(p−1)}
    Rho,
    /// ρ(1−y²)
    RhoOneMinusY2,
    /// ρ/(1−y²)
    RhoOverOneMinusY2,
}

impl WeightKind {
    pub fn value(self, p: f64, y: f64) -> f64 {
        let b = 1.0 - y * y;
        match self {
            WeightKind::Rho => b.powf(2.0 / (p - 1.0)),
            WeightKind::RhoOneMinusY2 => b.powf(2.0 / (p - 1.0) + 1.0),
            WeightKind::RhoOverOneMinusY2 => b.powf(2.0 / (p - 1.0) - 1.0),
        }
    }

    /// Limit of the weight as |y| → 1, when it exists.
    fn edge_limit(self, p: f64) -> Option<f64> {
        let expo = match self {
            WeightKind::Rho => 2.0 / (p - 1.0),
            WeightKind::RhoOneMinusY2 => 2.0 / (p - 1.0) + 1.0,
            WeightKind::RhoOverOneMinusY2 => 2.0 / (p - 1.0) - 1.0,
        };
        if expo > 0.0 {
            Some(0.0)
        } else if expo == 0.0 {
            Some(1.0)
        } else {
            None
        }
    }
}

/// Trapezoid quadrature of samples·weight over (−1,1): node sum plus end
/// caps to ±1.  Caps use the weight's edge limit and extend the samples by
/// their end values; a divergent weight is extended as a constant instead.
pub fn weighted_integral(samples: &[f64], grid: &YGrid, p: f64, kind: WeightKind) -> f64 {
    let y = grid.nodes();
    let n = y.len();
    assert_eq!(samples.len(), n, "samples must live on the grid");
    let mut acc = 0.0;
    let mut g_prev = kind.value(p, y[0]) * samples[0];
    let g_first = g_prev;
    for j in 1..n {
        let g = kind.value(p, y[j]) * samples[j];
        acc += 0.5 * (g_prev + g) * (y[j] - y[j - 1]);
        g_prev = g;
    }
    let g_last = g_prev;
    // end caps over [−1, y₀] and [y_{n−1}, 1]
    let cap_l = 1.0 + y[0];
    let cap_r = 1.0 - y[n - 1];
    match kind.edge_limit(p) {
        Some(limit) => {
            acc += 0.5 * (limit * samples[0] + g_first) * cap_l;
            acc += 0.5 * (limit * samples[n - 1] + g_last) * cap_r;
        }
        None => {
            acc += g_first * cap_l;
            acc += g_last * cap_r;
        }
    }
    acc
}

/// All scalar readouts of one frame.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct FunctionalReadout {
    pub s: f64,
    pub e0: f64,
    pub i: f64,
    pub j: f64,
    /// E = E₀ + I + J by definition.
    pub e: f64,
    pub h: f64,
    /// ∫ wₛ² ρ/(1−y²) dy
    pub dissipation: f64,
}

/// exp((p+3)/(2γ) e^{−γs}), the integrating factor of H.
pub fn h_factor(spec: &EquationSpec, s: f64) -> f64 {
    ((spec.p + 3.0) / (2.0 * spec.gamma) * (-spec.gamma * s).exp()).exp()
}

/// E₀: the energy part of the Lyapunov functional.
pub fn e0(frame: &SimilarityFrame, p: f64) -> f64 {
    let c = (p + 1.0) / ((p - 1.0) * (p - 1.0));
    let grid = &frame.grid;
    let vals: Vec<f64> = (0..grid.n())
        .map(|j| {
            let y = grid.nodes()[j];
            let w = frame.w[j];
            0.5 * frame.ws[j] * frame.ws[j]
                + 0.5 * frame.wy[j] * frame.wy[j] * (1.0 - y * y)
                + c * w * w
                - w.abs().powf(p + 1.0) / (p + 1.0)
        })
        .collect();
    weighted_integral(&vals, grid, p, WeightKind::Rho)
}

/// I: the lower-order correction from the antiderivative of f.
///
/// The Klein–Gordon preset collapses in closed form to e^{−2s}/2 ∫w²ρ dy,
/// which avoids evaluating e^{2s/(p−1)}w at large s.
pub fn i_term(frame: &SimilarityFrame, s: f64, spec: &EquationSpec) -> f64 {
    match spec.preset {
        Preset::PurePower => 0.0,
        Preset::KleinGordon => {
            let sq: Vec<f64> = frame.w.iter().map(|&w| w * w).collect();
            0.5 * (-2.0 * s).exp() * weighted_integral(&sq, &frame.grid, spec.p, WeightKind::Rho)
        }
        Preset::Custom => {
            let vals: Vec<f64> = frame
                .w
                .iter()
                .map(|&w| spec.scaled_antiderivative_f(s, w))
                .collect();
            -weighted_integral(&vals, &frame.grid, spec.p, WeightKind::Rho)
        }
    }
}

/// J = −e^{−γs} ∫ w wₛ ρ dy.
pub fn j_term(frame: &SimilarityFrame, s: f64, spec: &EquationSpec) -> f64 {
    let vals: Vec<f64> = frame.w.iter().zip(&frame.ws).map(|(&w, &ws)| w * ws).collect();
    -(-spec.gamma * s).exp() * weighted_integral(&vals, &frame.grid, spec.p, WeightKind::Rho)
}

/// Assemble every readout of a frame at similarity time s.
pub fn h_total(frame: &SimilarityFrame, s: f64, spec: &EquationSpec, mu: f64) -> FunctionalReadout {
    let e0v = e0(frame, spec.p);
    let iv = i_term(frame, s, spec);
    let jv = j_term(frame, s, spec);
    let e = e0v + iv + jv;
    let diss: Vec<f64> = frame.ws.iter().map(|&ws| ws * ws).collect();
    let dissipation =
        weighted_integral(&diss, &frame.grid, spec.p, WeightKind::RhoOverOneMinusY2);
    let h = e * h_factor(spec, s) + mu * (-2.0 * spec.gamma * s).exp();
    FunctionalReadout { s, e0: e0v, i: iv, j: jv, e, h, dissipation }
}

/// Monotonicity verdict for a trajectory.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MonotonicityReport {
    pub s_values: Vec<f64>,
    pub h_values: Vec<f64>,
    pub readouts: Vec<FunctionalReadout>,
    /// (s, ΔH) at every step where H increased beyond tolerance.
    pub violations: Vec<(f64, f64)>,
    pub max_violation: f64,
    /// 1e−3 · max |H|.
    pub tol: f64,
    pub mu: f64,
    /// Smallest C making the raw dE/ds inequality hold at every midpoint.
    pub c_fit: f64,
    pub gamma: f64,
    /// Grid cutoff the ρ/(1−y²) readouts depend on.
    pub eps: f64,
}

/// Evaluate H along a trajectory and flag increases.
///
/// When `mu` is None it is calibrated from the trajectory itself: the raw
/// inequality is fitted for C, and μ = 1.2·max(C,0)·Φ(s₀)/(2γ) + 1e−9 is
/// the margin that makes dH/ds ≤ 0 provable from that C (Φ(s₀) bounds the
/// integrating factor, 2γ is the decay rate of the μ-term).
pub fn monotonicity_report(wt: &WTrajectory, mu: Option<f64>) -> Result<MonotonicityReport> {
    let spec = &wt.spec;
    if wt.frames.len() < 2 {
        return Err(Error::FunctionalInput {
            detail: format!("need at least 2 frames, got {}", wt.frames.len()),
        });
    }
    let gamma = spec.gamma;
    let p = spec.p;
    let base: Vec<FunctionalReadout> =
        par::map_collect(&wt.frames, |f| h_total(f, f.s, spec, 0.0));

    // fit C in dE/ds ≤ (p+3)/2 e^{−γs}E − 3/(p−1) diss + C e^{−2γs}
    let mut c_fit = f64::NEG_INFINITY;
    for k in 0..base.len() - 1 {
        let (a, b) = (&base[k], &base[k + 1]);
        let ds = b.s - a.s;
        if ds <= 0.0 {
            return Err(Error::FunctionalInput {
                detail: format!("frames not strictly increasing in s at s = {}", a.s),
            });
        }
        let sm = 0.5 * (a.s + b.s);
        let em = 0.5 * (a.e + b.e);
        let dm = 0.5 * (a.dissipation + b.dissipation);
        let de = (b.e - a.e) / ds;
        let need =
            (de - 0.5 * (p + 3.0) * (-gamma * sm).exp() * em + 3.0 / (p - 1.0) * dm)
                * (2.0 * gamma * sm).exp();
        c_fit = c_fit.max(need);
    }
    let s0 = base[0].s;
    let mu = mu.unwrap_or_else(|| {
        1.2 * c_fit.max(0.0) * h_factor(spec, s0) / (2.0 * gamma) + 1e-9
    });

    let readouts: Vec<FunctionalReadout> = base
        .iter()
        .map(|r| FunctionalReadout {
            h: r.e * h_factor(spec, r.s) + mu * (-2.0 * gamma * r.s).exp(),
            ..*r
        })
        .collect();
    let s_values: Vec<f64> = readouts.iter().map(|r| r.s).collect();
    let h_values: Vec<f64> = readouts.iter().map(|r| r.h).collect();
    let max_h = h_values.iter().fold(0.0f64, |m, &h| m.max(h.abs()));
    let tol = 1e-3 * max_h;
    let mut violations = Vec::new();
    let mut max_violation = 0.0f64;
    for k in 0..h_values.len() - 1 {
        let dh = h_values[k + 1] - h_values[k];
        if dh > 0.0 {
            max_violation = max_violation.max(dh);
            if dh > tol {
                violations.push((s_values[k + 1], dh));
            }
        }
    }
    Ok(MonotonicityReport {
        s_values,
        h_values,
        readouts,
        violations,
        max_violation,
        tol,
        mu,
        c_fit,
        gamma,
        eps: wt.grid.eps(),
    })
}

/// Verdict of the computable blow-up criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionVerdict {
    Consistent,
    ViolatesCriterion,
}

/// A solution that keeps existing must have H ≥ 0 for large s; H below
/// −1e−3 on an existing solution flags an inconsistency.
pub fn blowup_criterion(readout: &FunctionalReadout) -> CriterionVerdict {
    if readout.h < -1e-3 {
        CriterionVerdict::ViolatesCriterion
    } else {
        CriterionVerdict::Consistent
    }
}

/// ‖q‖²_H = ∫ (q₁² + (q₁′)²(1−y²) + q₂²) ρ dy for samples of a pair.
pub fn pair_hnorm_sq(grid: &YGrid, p: f64, q1: &[f64], q1p: &[f64], q2: &[f64]) -> f64 {
    let vals: Vec<f64> = (0..grid.n())
        .map(|j| {
            let y = grid.nodes()[j];
            q1[j] * q1[j] + q1p[j] * q1p[j] * (1.0 - y * y) + q2[j] * q2[j]
        })
        .collect();
    weighted_integral(&vals, grid, p, WeightKind::Rho)
}

/// H-norm of a frame's (w, ∂ₛw) pair.
pub fn hnorm(frame: &SimilarityFrame, p: f64) -> f64 {
    pair_hnorm_sq(&frame.grid, p, &frame.w, &frame.wy, &frame.ws).sqrt()
}

/// Ratio ∫h²ρ/(1−y²) dy over ‖h‖²-like denominator ∫h²ρ + ∫(h′)²ρ(1−y²).
/// None when the denominator is below 1e−14.
pub fn check_hardy_sobolev(
    h_samples: &[f64],
    h_prime_samples: &[f64],
    grid: &YGrid,
    p: f64,
) -> Option<f64> {
    let sq: Vec<f64> = h_samples.iter().map(|&h| h * h).collect();
    let dsq: Vec<f64> = h_prime_samples.iter().map(|&d| d * d).collect();
    let num = weighted_integral(&sq, grid, p, WeightKind::RhoOverOneMinusY2);
    let den = weighted_integral(&sq, grid, p, WeightKind::Rho)
        + weighted_integral(&dsq, grid, p, WeightKind::RhoOneMinusY2);
    if den < 1e-14 {
        None
    } else {
        Some(num / den)
    }
}

/// Empirical Hardy–Sobolev constant over random truncated cosine series.
/// Coefficients are drawn once from the seed, then every function is
/// evaluated analytically on the grid, so refining the grid reuses the
/// same functions.
pub fn hardy_sobolev_max_ratio(grid: &YGrid, p: f64, count: usize, seed: u64) -> f64 {
    let modes = 9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..modes).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ratios = par::map_collect(&coeffs, |a| {
        let h: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&y| {
                (0..modes)
                    .map(|k| a[k] * (k as f64 * std::f64::consts::FRAC_PI_2 * y).cos())
                    .sum()
            })
            .collect();
        let hp: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&y| {
                (0..modes)
                    .map(|k| {
                        let om = k as f64 * std::f64::consts::FRAC_PI_2;
                        -a[k] * om * (om * y).sin()
                    })
                    .sum()
            })
            .collect();
        check_hardy_sobolev(&h, &hp, grid, p)
    });
    ratios
        .into_iter()
        .flatten()
        .fold(f64::NEG_INFINITY, f64::max)
}
