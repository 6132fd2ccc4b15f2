//! Physical fields recovered from a Lagrangian state.
//!
//! Positions are `x_i = ξ_i + θ_i` and the height at node `i` is the
//! reference height divided by the stretch of the node's dual cell,
//! `h_i = h_ref,i w_i / |dual cell_i|`, where the dual cell runs between the
//! midpoints of the adjacent image intervals. Quadrature over the dual cells
//! therefore reproduces the reference mass exactly. In the interior the dual
//! stretch is the centered `η_ξ`; at the endpoints the height vanishes.
//!
//! Contact slopes use the degenerate limit `∂_x h(±1) = h_ref'(±1)/η_ξ(±1)²`
//! with the one-sided second-order endpoint `η_ξ`.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lagrangian_solver::{endpoint_slopes, LagState, ReferenceProfile, Variant};
use crate::output::{write_header, write_row};

/// Eulerian fields on the image of the Lagrangian nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerianSnapshot {
    pub t: f64,
    /// Reference nodes `ξ_i`.
    pub xi: Vec<f64>,
    /// Physical positions `η(ξ_i, t)`.
    pub x: Vec<f64>,
    /// Height `h(x_i, t)`.
    pub h: Vec<f64>,
    /// Velocity `u(x_i, t)`.
    pub u: Vec<f64>,
    /// Stretch `η_ξ` used for the height (dual-cell value in the interior,
    /// one-sided value at the endpoints).
    pub eta_xi: Vec<f64>,
    /// Left contact line `a(t)`.
    pub a: f64,
    /// Right contact line `b(t)`.
    pub b: f64,
    /// `∂_x h` at `a`.
    pub slope_a: f64,
    /// `∂_x h` at `b`.
    pub slope_b: f64,
    /// Contact-line speed `ȧ`.
    pub adot: f64,
    /// Contact-line speed `ḃ`.
    pub bdot: f64,
}

/// Builds the Eulerian snapshot of `state`.
pub fn reconstruct(grid: &Grid, reference: &ReferenceProfile, state: &LagState) -> Result<EulerianSnapshot> {
    grid.check_len(&state.theta)?;
    grid.check_len(&state.theta_t)?;
    let n = grid.n();
    let dx = grid.dx();
    let x = state.eta(grid);
    if let Some(index) = (0..n).find(|&i| !(x[i + 1] > x[i])) {
        return Err(Error::NonMonotoneMap { t: state.t, index });
    }
    let (left, right) = endpoint_slopes(grid, &state.theta);
    let eta_a = 1.0 + left;
    let eta_b = 1.0 + right;
    let mut eta_xi = vec![0.0; n + 1];
    eta_xi[0] = eta_a;
    eta_xi[n] = eta_b;
    for i in 1..n {
        eta_xi[i] = (x[i + 1] - x[i - 1]) / (2.0 * dx);
    }
    let href = reference.h();
    let mut h: Vec<f64> = (0..=n).map(|i| href[i] / eta_xi[i]).collect();
    h[0] = 0.0;
    h[n] = 0.0;
    let d1 = reference.d(1);
    Ok(EulerianSnapshot {
        t: state.t,
        xi: grid.nodes().to_vec(),
        a: x[0],
        b: x[n],
        x,
        h,
        u: state.theta_t.clone(),
        eta_xi,
        slope_a: d1[0] / (eta_a * eta_a),
        slope_b: d1[n] / (eta_b * eta_b),
        adot: state.theta_t[0],
        bdot: state.theta_t[n],
    })
}

impl EulerianSnapshot {
    /// Lengths of the dual cells around each node on the image grid.
    pub fn dual_lengths(&self) -> Vec<f64> {
        let n = self.x.len() - 1;
        (0..=n)
            .map(|i| {
                let lo = if i == 0 { self.x[0] } else { 0.5 * (self.x[i - 1] + self.x[i]) };
                let hi = if i == n { self.x[n] } else { 0.5 * (self.x[i] + self.x[i + 1]) };
                hi - lo
            })
            .collect()
    }

    /// `∫ h dx` by dual-cell quadrature on the image grid.
    pub fn mass(&self) -> f64 {
        self.dual_lengths().iter().zip(&self.h).map(|(l, h)| l * h).sum()
    }

    /// `∫ h u dx` by dual-cell quadrature on the image grid.
    pub fn momentum(&self) -> f64 {
        self.dual_lengths()
            .iter()
            .zip(self.h.iter().zip(&self.u))
            .map(|(l, (h, u))| l * h * u)
            .sum()
    }

    /// Writes the nodal fields as CSV with columns `xi, x, h, u, eta_xi`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        write_header(w, &["xi", "x", "h", "u", "eta_xi"])?;
        for i in 0..self.x.len() {
            write_row(w, &[self.xi[i], self.x[i], self.h[i], self.u[i], self.eta_xi[i]])?;
        }
        Ok(())
    }

    /// Scalar sidecar `{t, a, b, slope_a, slope_b, adot, bdot}`.
    pub fn sidecar(&self) -> serde_json::Value {
        json!({
            "t": self.t,
            "a": self.a,
            "b": self.b,
            "slope_a": self.slope_a,
            "slope_b": self.slope_b,
            "adot": self.adot,
            "bdot": self.bdot,
        })
    }

    /// Height linearly interpolated onto `m` uniformly spaced points of `[a, b]`.
    pub fn resample_uniform(&self, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if m < 2 {
            return Err(Error::config("m", "resampling needs at least two points"));
        }
        let xs: Vec<f64> = (0..m)
            .map(|k| self.a + (self.b - self.a) * k as f64 / (m - 1) as f64)
            .collect();
        let mut hs = Vec::with_capacity(m);
        let mut j = 0;
        for &xv in &xs {
            while j + 2 < self.x.len() && self.x[j + 1] < xv {
                j += 1;
            }
            let s = ((xv - self.x[j]) / (self.x[j + 1] - self.x[j])).clamp(0.0, 1.0);
            hs.push(self.h[j] + s * (self.h[j + 1] - self.h[j]));
        }
        Ok((xs, hs))
    }
}

/// One row of the contact-line time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactRow {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub slope_a: f64,
    pub slope_b: f64,
    pub adot: f64,
    pub bdot: f64,
    /// `α² - (∂_x h(a))²`.
    pub deviation_a: f64,
    /// `α² - (∂_x h(b))²`.
    pub deviation_b: f64,
    /// `ν ȧ - (α² - (∂_x h(a))²)` under the dynamic law.
    pub law_residual_a: Option<f64>,
    /// `ν ḃ + (α² - (∂_x h(b))²)` under the dynamic law.
    pub law_residual_b: Option<f64>,
}

/// Contact-line positions, slopes, speeds and speed-law residuals per snapshot.
pub fn contact_report(snapshots: &[EulerianSnapshot], alpha: f64, variant: &Variant) -> Result<Vec<ContactRow>> {
    if snapshots.len() < 2 {
        return Err(Error::config("snapshots", "contact report needs at least two snapshots"));
    }
    let dynamic = !variant.is_static();
    let nu = variant.nu();
    Ok(snapshots
        .iter()
        .map(|s| {
            let deviation_a = alpha * alpha - s.slope_a * s.slope_a;
            let deviation_b = alpha * alpha - s.slope_b * s.slope_b;
            ContactRow {
                t: s.t,
                a: s.a,
                b: s.b,
                slope_a: s.slope_a,
                slope_b: s.slope_b,
                adot: s.adot,
                bdot: s.bdot,
                deviation_a,
                deviation_b,
                law_residual_a: dynamic.then(|| nu * s.adot - deviation_a),
                law_residual_b: dynamic.then(|| nu * s.bdot + deviation_b),
            }
        })
        .collect())
}

/// Writes contact rows as CSV; absent residuals are written as empty fields.
pub fn write_contact_csv(w: &mut impl Write, rows: &[ContactRow]) -> Result<()> {
    write_header(
        w,
        &[
            "t",
            "a",
            "b",
            "slope_a",
            "slope_b",
            "adot",
            "bdot",
            "deviation_a",
            "deviation_b",
            "law_residual_a",
            "law_residual_b",
        ],
    )?;
    for r in rows {
        let base = [r.t, r.a, r.b, r.slope_a, r.slope_b, r.adot, r.bdot, r.deviation_a, r.deviation_b];
        let mut fields: Vec<String> = base.iter().map(|&v| crate::output::fmt_f64(v)).collect();
        for v in [r.law_residual_a, r.law_residual_b] {
            fields.push(v.map(crate::output::fmt_f64).unwrap_or_default());
        }
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
