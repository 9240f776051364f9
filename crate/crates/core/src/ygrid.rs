//! Clustered grid on the similarity slab y ∈ (−1, 1).
//!
//! Nodes follow y_j = (1−ε)·sin(π ξ_j / 2) with ξ_j uniform on [−1, 1], so
//! spacing shrinks like Δξ² toward the cutoff ±(1−ε).  This resolves the
//! degenerate weight ρ(y) = (1−y²)^{2/(p−1)} near |y| = 1 and (because
//! Δy/√(1−y²) stays of one scale for the second-order part) keeps explicit
//! stepping of the w-equation workable.  The same node set carries the
//! trapezoid quadrature of the functionals, so the flux-form operator built
//! on the dual cells is summation-by-parts compatible with it.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YGrid {
    eps: f64,
    y: Vec<f64>,
    /// Dual-cell widths tiling [−1, 1]: interior cells span face midpoints,
    /// end cells run all the way to ±1 so the zero-exterior-flux closure of
    /// the flux-form operator is the exact balance over the end cell (the
    /// degenerate coefficient ρ(1−y²) vanishes at ±1).
    cell: Vec<f64>,
    /// Face midpoints (n−1 faces between adjacent nodes).
    face_mid: Vec<f64>,
    /// Face widths y_{j+1} − y_j.
    face_h: Vec<f64>,
}

impl YGrid {
    /// Build the clustered grid with `n` nodes and cutoff `eps`.
    pub fn clustered(n: usize, eps: f64) -> Result<YGrid> {
        if n < 8 {
            return Err(Error::InvalidGrid { detail: format!("need at least 8 nodes, got {n}") });
        }
        if !(0.0..0.2).contains(&eps) || eps == 0.0 {
            return Err(Error::InvalidGrid { detail: format!("cutoff eps = {eps} outside (0, 0.2)") });
        }
        let m = (n - 1) as f64;
        let mut y: Vec<f64> = (0..n)
            .map(|j| {
                let xi = -1.0 + 2.0 * j as f64 / m;
                (1.0 - eps) * (std::f64::consts::FRAC_PI_2 * xi).sin()
            })
            .collect();
        // enforce exact symmetry against rounding
        for j in 0..n / 2 {
            let v = 0.5 * (y[n - 1 - j] - y[j]);
            y[n - 1 - j] = v;
            y[j] = -v;
        }
        if n % 2 == 1 {
            y[n / 2] = 0.0;
        }
        let mut cell = vec![0.0; n];
        // End cells reach the true boundary ±1, not just the node span.
        // Dropping the exterior flux is then consistent: the omitted flux
        // sits exactly where ρ(1−y²) = 0.  (Half-width end cells turn that
        // dropped flux into a spurious source that grows under refinement.)
        cell[0] = 0.5 * (y[1] + y[0]) + 1.0;
        cell[n - 1] = 1.0 - 0.5 * (y[n - 1] + y[n - 2]);
        for j in 1..n - 1 {
            cell[j] = 0.5 * (y[j + 1] - y[j - 1]);
        }
        let face_mid: Vec<f64> = (0..n - 1).map(|j| 0.5 * (y[j] + y[j + 1])).collect();
        let face_h: Vec<f64> = (0..n - 1).map(|j| y[j + 1] - y[j]).collect();
        Ok(YGrid { eps, y, cell, face_mid, face_h })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn nodes(&self) -> &[f64] {
        &self.y
    }

    pub fn cells(&self) -> &[f64] {
        &self.cell
    }

    pub fn face_midpoints(&self) -> &[f64] {
        &self.face_mid
    }

    pub fn face_widths(&self) -> &[f64] {
        &self.face_h
    }

    /// Smallest node spacing (at the cutoff edges by construction).
    pub fn min_spacing(&self) -> f64 {
        self.face_h.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Second-order derivative at all nodes: three-point nonuniform central
    /// differences, one-sided at the two edge nodes.
    pub fn derivative(&self, f: &[f64], out: &mut [f64]) {
        let n = self.y.len();
        debug_assert_eq!(f.len(), n);
        debug_assert_eq!(out.len(), n);
        let y = &self.y;
        for j in 1..n - 1 {
            let hm = y[j] - y[j - 1];
            let hp = y[j + 1] - y[j];
            out[j] = (f[j + 1] * hm * hm - f[j - 1] * hp * hp + f[j] * (hp * hp - hm * hm))
                / (hp * hm * (hp + hm));
        }
        // one-sided 3-point ends (exact for quadratics)
        let h1 = y[1] - y[0];
        let h2 = y[2] - y[1];
        out[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1]
            - h1 / (h2 * (h1 + h2)) * f[2];
        let g1 = y[n - 1] - y[n - 2];
        let g2 = y[n - 2] - y[n - 3];
        out[n - 1] = (2.0 * g1 + g2) / (g1 * (g1 + g2)) * f[n - 1]
            - (g1 + g2) / (g1 * g2) * f[n - 2]
            + g1 / (g2 * (g1 + g2)) * f[n - 3];
    }
}
