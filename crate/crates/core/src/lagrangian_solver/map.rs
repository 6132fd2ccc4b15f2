//! Initial flow map from a target height by matching cumulative mass.
//!
//! The map `η₀` satisfies `∫_{a₀}^{η₀(ξ)} h_target dx = ∫_{-1}^{ξ} h_ref dξ'`.
//! Both cumulative masses use the trapezoid rule; between target samples the
//! height is linear, so the target cumulative mass is piecewise quadratic and
//! is inverted exactly on each interval.

use crate::error::{Error, Result};
use crate::grid::Grid;

use super::reference::ReferenceProfile;

/// Relative tolerance of the mass compatibility check.
pub const MASS_TOL: f64 = 1e-8;

/// Checks that `x` increases strictly, `h` is nonnegative, vanishes at both
/// ends and is positive somewhere.
pub fn validate_height(x: &[f64], h: &[f64]) -> Result<()> {
    if x.len() != h.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: h.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::InvalidHeight("at least three samples are required".into()));
    }
    if let Some(i) = (1..x.len()).find(|&i| !(x[i] > x[i - 1])) {
        return Err(Error::InvalidHeight(format!("x does not increase at row {i}")));
    }
    if let Some(i) = h.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidHeight(format!("negative or non-finite height at row {i}")));
    }
    let last = h.len() - 1;
    if h[0] != 0.0 || h[last] != 0.0 {
        return Err(Error::InvalidHeight(format!(
            "height must vanish at both ends, found {} and {}",
            h[0], h[last]
        )));
    }
    if !h.iter().any(|v| *v > 0.0) {
        return Err(Error::InvalidHeight("height vanishes identically".into()));
    }
    Ok(())
}

/// Trapezoid cumulative integral of `h` over the samples `x`.
fn cumulative(x: &[f64], h: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (h[i] + h[i - 1]);
        out.push(acc);
    }
    out
}

/// Flow map `η₀` at the grid nodes sending `reference` onto the height
/// `h_target` sampled at increasing positions `x`.
pub fn lagrangian_map(x: &[f64], h_target: &[f64], grid: &Grid, reference: &ReferenceProfile) -> Result<Vec<f64>> {
    validate_height(x, h_target)?;
    let target = cumulative(x, h_target);
    let total = *target.last().expect("nonempty");
    let ref_cum = cumulative(grid.nodes(), reference.h());
    let ref_total = *ref_cum.last().expect("nonempty");
    let relative = (total - ref_total).abs() / ref_total;
    if relative > MASS_TOL {
        return Err(Error::IncompatibleMass {
            target: total,
            reference: ref_total,
            relative,
        });
    }
    let n = grid.n();
    let last = x.len() - 1;
    let mut eta = Vec::with_capacity(n + 1);
    let mut j = 0;
    for (i, &m) in ref_cum.iter().enumerate() {
        if i == 0 {
            eta.push(x[0]);
            continue;
        }
        if i == n {
            eta.push(x[last]);
            continue;
        }
        let m = m * total / ref_total;
        while j + 1 < last && target[j + 1] < m {
            j += 1;
        }
        let (h0, h1) = (h_target[j], h_target[j + 1]);
        let dx = x[j + 1] - x[j];
        let r = m - target[j];
        // Solve r = h0 s + (h1 - h0) s² / (2 dx) for s in [0, dx].
        let a = 0.5 * (h1 - h0) / dx;
        let disc = h0 * h0 + 4.0 * a * r;
        let s = if disc < 0.0 {
            return Err(Error::InvalidHeight(format!("cumulative mass not invertible near x = {}", x[j])));
        } else if h0 + disc.sqrt() > 0.0 {
            2.0 * r / (h0 + disc.sqrt())
        } else {
            0.0
        };
        eta.push(x[j] + s.clamp(0.0, dx));
    }
    if let Some(i) = (1..eta.len()).find(|&i| !(eta[i] > eta[i - 1])) {
        return Err(Error::InvalidHeight(format!(
            "cumulative mass is not strictly increasing near node {i}"
        )));
    }
    Ok(eta)
}
