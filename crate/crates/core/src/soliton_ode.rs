//! Dynamics of multi-soliton centers.
//!
//! The centers ζ₁ < … < ζ_k of a decomposing solution obey
//!
//! ```text
//! (1/c₁) ζ̇ᵢ = e^{−(2/(p−1))(ζᵢ−ζ_{i−1})} − e^{−(2/(p−1))(ζ_{i+1}−ζᵢ)},
//! ```
//!
//! where the missing neighbors of ζ₁ and ζ_k contribute nothing (formally
//! ζ₀ = −∞, ζ_{k+1} = +∞).  Under that convention the system has the exact
//! zero-barycenter solution
//!
//! ```text
//! ζ̄ᵢ(s) = (i−(k+1)/2)·((p−1)/2)·log s + ᾱᵢ,
//! ```
//!
//! with the ᾱᵢ fixed by the interaction strengths bᵢ = (p−1)·i·(k−i)/(4c₁):
//! ᾱ_{i+1} − ᾱᵢ = −((p−1)/2)·ln bᵢ, normalized to Σᾱᵢ = 0.  (Telescoping
//! the system: the ansatz makes each coupling bᵢ/s, so b_{i−1} − bᵢ must
//! equal (i−(k+1)/2)(p−1)/(2c₁) with b₀ = b_k = 0, whose partial sums give
//! the product formula.)  Any other zero-barycenter solution converges to
//! a translate ζ̄ᵢ + ζ₀, and the barycenter itself is conserved because
//! every interaction appears once with each sign.

use crate::error::{Error, Result};
use crate::ode::{dopri5, OdeOptions, StepOutcome};

/// Parameters of a k-soliton center system.
#[derive(Debug, Clone)]
pub struct CenterSystem {
    pub p: f64,
    pub k: usize,
    pub c1: f64,
    pub alpha_bar: Vec<f64>,
}

impl CenterSystem {
    pub fn new(p: f64, k: usize, c1: f64) -> Result<CenterSystem> {
        let alpha_bar = alpha_bars(p, k, c1)?;
        Ok(CenterSystem { p, k, c1, alpha_bar })
    }
}

/// The ᾱᵢ of the explicit solution: gaps −((p−1)/2)·ln bᵢ with
/// bᵢ = (p−1)·i·(k−i)/(4c₁), normalized to zero mean.
pub fn alpha_bars(p: f64, k: usize, c1: f64) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Config { detail: format!("center system needs k >= 2, got {k}") });
    }
    if !(p > 1.0) || !(c1 > 0.0) {
        return Err(Error::Config { detail: format!("need p > 1 and c1 > 0, got p = {p}, c1 = {c1}") });
    }
    let mut alphas = vec![0.0; k];
    for i in 1..k {
        let b = (p - 1.0) * i as f64 * (k - i) as f64 / (4.0 * c1);
        alphas[i] = alphas[i - 1] - (p - 1.0) / 2.0 * b.ln();
    }
    let mean: f64 = alphas.iter().sum::<f64>() / k as f64;
    for a in alphas.iter_mut() {
        *a -= mean;
    }
    Ok(alphas)
}

/// The explicit zero-barycenter solution at time s.
pub fn zeta_bar(system: &CenterSystem, s: f64) -> Result<Vec<f64>> {
    if s <= 0.0 {
        return Err(Error::Config { detail: format!("zeta_bar needs s > 0, got {s}") });
    }
    let k = system.k;
    let slope = (system.p - 1.0) / 2.0 * s.ln();
    Ok((1..=k)
        .map(|i| (i as f64 - (k as f64 + 1.0) / 2.0) * slope + system.alpha_bar[i - 1])
        .collect())
}

/// d/ds of the explicit solution, analytically.
pub fn zeta_bar_dot(system: &CenterSystem, s: f64) -> Vec<f64> {
    let k = system.k;
    (1..=k)
        .map(|i| (i as f64 - (k as f64 + 1.0) / 2.0) * (system.p - 1.0) / (2.0 * s))
        .collect()
}

/// Right-hand side ζ̇ = c₁·(couplings + forcing).
fn center_rhs(system: &CenterSystem, s: f64, z: &[f64], forcing: Option<&ForcingFn>, dz: &mut [f64]) {
    let k = system.k;
    let a = 2.0 / (system.p - 1.0);
    // interaction through each interior gap
    let mut inter = vec![0.0; k + 1]; // inter[0] = inter[k] = 0: dropped neighbors
    for i in 1..k {
        inter[i] = (-a * (z[i] - z[i - 1])).exp();
    }
    for i in 0..k {
        let mut v = inter[i] - inter[i + 1];
        if let Some(f) = forcing {
            v += f(i, s);
        }
        dz[i] = system.c1 * v;
    }
}

/// Largest residual of the explicit solution in the center system over
/// log-spaced sample times: max |(1/c₁)ζ̄̇ᵢ − couplings(ζ̄)|.
pub fn explicit_solution_residual(system: &CenterSystem, s_lo: f64, s_hi: f64, samples: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut dz = vec![0.0; system.k];
    for m in 0..samples {
        let s = s_lo * (s_hi / s_lo).powf(m as f64 / (samples - 1) as f64);
        let z = zeta_bar(system, s)?;
        center_rhs(system, s, &z, None, &mut dz);
        let zd = zeta_bar_dot(system, s);
        for i in 0..system.k {
            worst = worst.max((dz[i] / system.c1 - zd[i] / system.c1).abs());
        }
    }
    Ok(worst)
}

pub type ForcingFn = dyn Fn(usize, f64) -> f64;

/// Center trajectory from adaptive integration.
#[derive(Debug, Clone)]
pub struct CenterTrajectory {
    pub s: Vec<f64>,
    /// zetas[m] is the center vector at s[m].
    pub zetas: Vec<Vec<f64>>,
}

/// Integrate the center system from `zeta_init` at s_lo to s_hi.
/// Ordering must hold initially and is monitored: a gap collapsing below
/// 1e−8 aborts with StepFailure.
pub fn integrate_system(
    system: &CenterSystem,
    zeta_init: &[f64],
    s_lo: f64,
    s_hi: f64,
    forcing: Option<&ForcingFn>,
) -> Result<CenterTrajectory> {
    if zeta_init.len() != system.k {
        return Err(Error::Config {
            detail: format!("zeta_init has length {}, system k = {}", zeta_init.len(), system.k),
        });
    }
    if !zeta_init.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Config { detail: "zeta_init must be strictly increasing".into() });
    }
    let opts = OdeOptions { max_steps: 20_000_000, ..OdeOptions::default() };
    let sol = dopri5(
        |s, z, dz| center_rhs(system, s, z, forcing, dz),
        s_lo,
        zeta_init,
        s_hi,
        &opts,
        |s, z| {
            for i in 0..z.len() - 1 {
                if z[i + 1] - z[i] < 1e-8 {
                    return Err(Error::StepFailure {
                        s,
                        detail: format!("gap {} collapsed: {} .. {}", i, z[i], z[i + 1]),
                    });
                }
            }
            Ok(StepOutcome::Continue)
        },
    )?;
    Ok(CenterTrajectory { s: sol.s, zetas: sol.y })
}

/// Arithmetic mean of the centers; conserved under zero forcing.
pub fn barycenter(zetas: &[f64]) -> f64 {
    zetas.iter().sum::<f64>() / zetas.len() as f64
}
