//! Adaptive Dormand–Prince 5(4) integrator for small ODE systems.
//!
//! Used by the scalar blow-up reference ODE and by the soliton-center
//! system.  Embedded 4th-order error estimate with a standard step
//! controller; first-same-as-last evaluation reuse.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; `None` picks 1e-4·(range).
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-10, atol: 1e-12, h_init: None, h_max: f64::INFINITY, max_steps: 2_000_000 }
    }
}

/// Decision returned by the per-step callback.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continue,
    /// Accept this step, then stop integrating.
    Stop,
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    pub s: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// true if the callback requested an early stop.
    pub stopped: bool,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Integrate dy/ds = rhs(s, y) from s0 to s_end (s_end > s0).  `check` is
/// invoked after every accepted step and may stop the run or reject the
/// state with an error.
pub fn dopri5<R, C>(
    rhs: R,
    s0: f64,
    y0: &[f64],
    s_end: f64,
    opts: &OdeOptions,
    mut check: C,
) -> Result<OdeSolution>
where
    R: Fn(f64, &[f64], &mut [f64]),
    C: FnMut(f64, &[f64]) -> Result<StepOutcome>,
{
    let dim = y0.len();
    let mut s = s0;
    let mut y = y0.to_vec();
    let mut out_s = vec![s0];
    let mut out_y = vec![y.clone()];
    let mut h = opts.h_init.unwrap_or(1e-4 * (s_end - s0).abs()).min(opts.h_max);
    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut k5 = vec![0.0; dim];
    let mut k6 = vec![0.0; dim];
    let mut k7 = vec![0.0; dim];
    let mut ytmp = vec![0.0; dim];
    let mut ynew = vec![0.0; dim];
    rhs(s, &y, &mut k1);
    let mut stopped = false;

    for step in 0..opts.max_steps {
        if s >= s_end || stopped {
            break;
        }
        h = h.min(s_end - s).min(opts.h_max);
        // stages
        for i in 0..dim {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs(s + C2 * h, &ytmp, &mut k2);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(s + C3 * h, &ytmp, &mut k3);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(s + C4 * h, &ytmp, &mut k4);
        for i in 0..dim {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(s + C5 * h, &ytmp, &mut k5);
        for i in 0..dim {
            ytmp[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(s + h, &ytmp, &mut k6);
        for i in 0..dim {
            ynew[i] =
                y[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        rhs(s + h, &ynew, &mut k7);

        // scaled error norm
        let mut err = 0.0;
        for i in 0..dim {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        err = (err / dim as f64).sqrt();

        if !err.is_finite() {
            return Err(Error::NonFinite { t: s, step });
        }

        if err <= 1.0 {
            s += h;
            y.copy_from_slice(&ynew);
            k1.copy_from_slice(&k7); // FSAL
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { t: s, step });
            }
            out_s.push(s);
            out_y.push(y.clone());
            match check(s, &y)? {
                StepOutcome::Continue => {}
                StepOutcome::Stop => stopped = true,
            }
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
        h *= fac;
        if h <= f64::EPSILON * s.abs().max(1.0) {
            return Err(Error::NonFinite { t: s, step });
        }
    }
    Ok(OdeSolution { s: out_s, y: out_y, stopped })
}
