//! Linearized dynamics about the equilibrium droplet.
//!
//! The linear equation `h_s θ_tt + K θ + C θ_t = 0` with
//! `K = -2∂_ξ(m_s ∂_ξ ·) + 2∂_ξ²(h_s² ∂_ξ² ·)` and `C = -4μ ∂_ξ(h_s ∂_ξ ·)`
//! is discretized on the interior nodes with the endpoints slaved through the
//! one-sided closure `θ_ξ(±1) = 0`. Operators are stored per unit length so
//! that quadratic forms approximate the continuous integrals.
//!
//! Constants span the common kernel of `K` and `C`. Because the mass weight
//! `M^{1/2} 1` spans an invariant subspace of the symmetrized operators, the
//! spectrum on its orthogonal complement (the constrained subspace
//! `∫ h_s θ = ∫ h_s θ_t = 0`) is computed from a reduced companion matrix and
//! the translation mode is reported as a single zero eigenvalue.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::banded::Banded;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lagrangian_solver::model::dot;
use crate::lagrangian_solver::ReferenceProfile;

/// Eigenvalues with modulus at most this value count as kernel.
pub const KERNEL_TOL: f64 = 1e-8;

/// Discrete linear operators on the interior unknowns `θ_1 .. θ_{N-1}`.
#[derive(Debug, Clone)]
pub struct LinearOperators {
    grid: Grid,
    m: Vec<f64>,
    k: Banded,
    c: Banded,
    k_full: Banded,
    c_full: Banded,
}

impl LinearOperators {
    /// Mass diagonal `h_s(ξ_i)` at interior nodes.
    pub fn m(&self) -> &[f64] {
        &self.m
    }

    /// Stiffness on interior unknowns (endpoints slaved).
    pub fn k(&self) -> &Banded {
        &self.k
    }

    /// Damping on interior unknowns (endpoints slaved).
    pub fn c(&self) -> &Banded {
        &self.c
    }

    /// Stiffness acting on all nodal values, before the closure is applied.
    pub fn k_full(&self) -> &Banded {
        &self.k_full
    }

    /// Damping acting on all nodal values, before the closure is applied.
    pub fn c_full(&self) -> &Banded {
        &self.c_full
    }

    /// Grid the operators live on.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of interior unknowns.
    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// Interior values of a nodal vector.
    pub fn interior(&self, full: &[f64]) -> Vec<f64> {
        full[1..full.len() - 1].to_vec()
    }

    /// Nodal vector from interior values through the closure `θ_ξ(±1) = 0`.
    pub fn extend(&self, interior: &[f64]) -> Vec<f64> {
        let n = interior.len();
        let mut out = Vec::with_capacity(n + 2);
        out.push((4.0 * interior[0] - interior[1]) / 3.0);
        out.extend_from_slice(interior);
        out.push((4.0 * interior[n - 1] - interior[n - 2]) / 3.0);
        out
    }

    /// `∫ h_s θ dξ` in the discrete mass inner product.
    pub fn mean(&self, theta: &[f64]) -> f64 {
        self.grid.dx() * self.m.iter().zip(theta).map(|(m, t)| m * t).sum::<f64>()
    }

    /// Acceleration `θ_tt = -M⁻¹(K θ + C θ_t)` on interior unknowns.
    pub fn acceleration(&self, theta: &[f64], theta_t: &[f64]) -> Vec<f64> {
        let kt = self.k.mul_vec(theta);
        let ct = self.c.mul_vec(theta_t);
        (0..self.dim()).map(|i| -(kt[i] + ct[i]) / self.m[i]).collect()
    }
}

/// Assembles the linear operators of the equilibrium reference with viscosity `mu`.
pub fn assemble(grid: &Grid, reference: &ReferenceProfile, mu: f64) -> Result<LinearOperators> {
    let h = reference.h();
    let ms: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (h0, h1, h2) = (h[i], reference.d(1)[i], reference.d(2)[i]);
            2.0 * h1 * h1 - 4.0 * h0 * h2 + h0 * h0
        })
        .collect();
    assemble_with(grid, h, &ms, mu)
}

/// Assembles the linear operators from nodal samples of `h_s` and `m_s`.
pub fn assemble_with(grid: &Grid, h: &[f64], ms: &[f64], mu: f64) -> Result<LinearOperators> {
    grid.check_len(h)?;
    grid.check_len(ms)?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::config("mu", format!("must be finite and positive, got {mu}")));
    }
    let n = grid.n();
    let dx = grid.dx();
    let mut k_full = Banded::zeros(n + 1, 2);
    let mut c_full = Banded::zeros(n + 1, 2);
    for i in 0..n {
        let m_half = 0.5 * (ms[i] + ms[i + 1]);
        let h_half = 0.5 * (h[i] + h[i + 1]);
        let kk = 2.0 * m_half / (dx * dx);
        let cc = 4.0 * mu * h_half / (dx * dx);
        for (mat, v) in [(&mut k_full, kk), (&mut c_full, cc)] {
            mat.add(i, i, v);
            mat.add(i + 1, i + 1, v);
            mat.add(i, i + 1, -v);
            mat.add(i + 1, i, -v);
        }
    }
    let l = [1.0, -2.0, 1.0];
    for i in 1..n {
        let w = 2.0 * h[i] * h[i] / dx.powi(4);
        for a in 0..3 {
            for b in 0..3 {
                k_full.add(i + a - 1, i + b - 1, w * l[a] * l[b]);
            }
        }
    }
    let k = slave(&k_full);
    let c = slave(&c_full);
    Ok(LinearOperators {
        grid: grid.clone(),
        m: h[1..n].to_vec(),
        k,
        c,
        k_full,
        c_full,
    })
}

/// `Sᵀ A S` where `S` maps interior values to nodal values through the closure.
fn slave(a: &Banded) -> Banded {
    let n_full = a.dim();
    let n = n_full - 1;
    let map = |i: usize| -> Vec<(usize, f64)> {
        if i == 0 {
            vec![(0, 4.0 / 3.0), (1, -1.0 / 3.0)]
        } else if i == n {
            vec![(n - 2, 4.0 / 3.0), (n - 3, -1.0 / 3.0)]
        } else {
            vec![(i - 1, 1.0)]
        }
    };
    let kb = a.half_bandwidth();
    let mut out = Banded::zeros(n - 1, kb);
    for i in 0..n_full {
        for j in i.saturating_sub(kb)..=(i + kb).min(n) {
            let v = a.get(i, j);
            if v == 0.0 {
                continue;
            }
            for (p, sp) in map(i) {
                for (q, sq) in map(j) {
                    out.add(p, q, sp * sq * v);
                }
            }
        }
    }
    out
}

/// Symmetrized operators restricted to the constrained subspace.
struct Constrained {
    /// `Qᵀ M^{-1/2} K M^{-1/2} Q`.
    k: DMatrix<f64>,
    /// `Qᵀ M^{-1/2} C M^{-1/2} Q`.
    c: DMatrix<f64>,
}

fn constrained(ops: &LinearOperators) -> Constrained {
    let n = ops.dim();
    let s: Vec<f64> = ops.m.iter().map(|m| 1.0 / m.sqrt()).collect();
    let sym = |b: &Banded| DMatrix::from_fn(n, n, |i, j| s[i] * b.get(i, j) * s[j]);
    let ks = sym(&ops.k);
    let cs = sym(&ops.c);
    // Householder reflector P with P z = ±|z| e_0 for z = M^{1/2} 1; the
    // trailing columns of P span the orthogonal complement of z.
    let z = DVector::from_iterator(n, ops.m.iter().map(|m| m.sqrt()));
    let mut v = z.clone();
    v[0] += z.norm();
    let vv = v.dot(&v);
    let reflect = |a: &DMatrix<f64>| -> DMatrix<f64> {
        let av = a * &v;
        let vta = a.transpose() * &v;
        let vav = v.dot(&av);
        let mut out = a.clone();
        out -= (&av * v.transpose()) * (2.0 / vv);
        out -= (&v * vta.transpose()) * (2.0 / vv);
        out += (&v * v.transpose()) * (4.0 * vav / (vv * vv));
        out
    };
    let k = reflect(&ks).view((1, 1), (n - 1, n - 1)).into_owned();
    let c = reflect(&cs).view((1, 1), (n - 1, n - 1)).into_owned();
    Constrained { k, c }
}

/// Eigenvalues of the first-order companion system.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Eigenvalues sorted by decreasing real part; the translation mode is the
    /// single zero entry.
    pub eigenvalues: Vec<Complex<f64>>,
    /// Spectral gap: minus the largest real part among nonzero eigenvalues.
    pub lambda_num: f64,
    /// Number of eigenvalues with modulus `<= 1e-8`.
    pub kernel_dim: usize,
}

impl Spectrum {
    /// Eigenvalues on the constrained subspace (the translation mode removed).
    pub fn constrained(&self) -> impl Iterator<Item = &Complex<f64>> {
        let mut skipped = false;
        self.eigenvalues.iter().filter(move |l| {
            if !skipped && l.re == 0.0 && l.im == 0.0 {
                skipped = true;
                false
            } else {
                true
            }
        })
    }

    /// Slowest decaying eigenvalue on the constrained subspace.
    pub fn slowest(&self) -> Complex<f64> {
        *self.constrained().next().expect("spectrum has nonzero modes")
    }
}

/// Dense spectrum of `d/dt (θ, θ_t) = ((0, I), (-M⁻¹K, -M⁻¹C)) (θ, θ_t)`.
pub fn spectrum(ops: &LinearOperators) -> Result<Spectrum> {
    if ops.grid.n() < 8 {
        return Err(Error::config("N", "spectrum needs at least 8 intervals"));
    }
    let Constrained { k, c } = constrained(ops);
    let r = k.nrows();
    let mut a = DMatrix::zeros(2 * r, 2 * r);
    a.view_mut((0, r), (r, r)).fill_with_identity();
    a.view_mut((r, 0), (r, r)).copy_from(&(-&k));
    a.view_mut((r, r), (r, r)).copy_from(&(-&c));
    let eig = a
        .clone()
        .try_schur(1e-14, 0)
        .ok_or_else(|| Error::Eigen("Schur iteration did not converge".into()))?
        .complex_eigenvalues();
    let mut eigenvalues: Vec<Complex<f64>> = eig.iter().copied().collect();
    if eigenvalues.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let reduced_kernel = eigenvalues.iter().filter(|l| l.norm() <= KERNEL_TOL).count();
    let lambda_num = -eigenvalues
        .iter()
        .filter(|l| l.norm() > KERNEL_TOL)
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    eigenvalues.push(Complex::new(0.0, 0.0));
    eigenvalues.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    Ok(Spectrum {
        eigenvalues,
        lambda_num,
        kernel_dim: 1 + reduced_kernel,
    })
}

/// The `count` eigenvalues nearest to the real shift `sigma` on the
/// constrained subspace, by block shift-invert iteration with the banded
/// matrix `K + σC + σ²M` and Rayleigh-Ritz extraction. Complex pairs are
/// resolved because the block spans both members of a pair.
pub fn nearest_eigenvalues(
    ops: &LinearOperators,
    sigma: f64,
    count: usize,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<Complex<f64>>> {
    let n = ops.dim();
    let p = count + 2;
    if count == 0 || 2 * n < p {
        return Err(Error::config("count", format!("must lie in 1..={}", 2 * n - 2)));
    }
    let mut pencil = ops.k.clone();
    pencil.add_scaled(&ops.c, sigma);
    for i in 0..n {
        pencil.add(i, i, sigma * sigma * ops.m[i]);
    }
    let total: f64 = ops.m.iter().sum();
    let deflate = |x: &mut [f64]| {
        let mean = ops.m.iter().zip(x.iter()).map(|(m, v)| m * v).sum::<f64>() / total;
        x.iter_mut().for_each(|v| *v -= mean);
    };
    // (A - σ)⁻¹ (x, y): solve P x' = -M y - (C + σM) x, then y' = x + σ x'.
    let apply = |col: &[f64]| -> Result<Vec<f64>> {
        let (x, y) = col.split_at(n);
        let cx = ops.c.mul_vec(x);
        let rhs: Vec<f64> = (0..n).map(|i| -ops.m[i] * y[i] - cx[i] - sigma * ops.m[i] * x[i]).collect();
        let mut xn = pencil.solve(&rhs)?;
        deflate(&mut xn);
        let mut yn: Vec<f64> = (0..n).map(|i| x[i] + sigma * xn[i]).collect();
        deflate(&mut yn);
        xn.extend(yn);
        Ok(xn)
    };
    let xi = ops.grid.nodes();
    let mut v = DMatrix::from_fn(2 * n, p, |r, j| {
        let s = xi[r % n + 1];
        (std::f64::consts::PI * (j as f64 + 1.0) * (s + 0.5 * r as f64 / n as f64)).sin()
    });
    for j in 0..p {
        let mut col: Vec<f64> = v.column(j).iter().copied().collect();
        let (x, y) = col.split_at_mut(n);
        deflate(x);
        deflate(y);
        v.set_column(j, &DVector::from_vec(col));
    }
    v = v.qr().q();
    let mut previous: Vec<Complex<f64>> = Vec::new();
    for _ in 0..max_iter {
        let mut w = DMatrix::zeros(2 * n, p);
        for j in 0..p {
            let col: Vec<f64> = v.column(j).iter().copied().collect();
            w.set_column(j, &DVector::from_vec(apply(&col)?));
        }
        let h = v.transpose() * &w;
        let mut lambdas: Vec<Complex<f64>> = h
            .complex_eigenvalues()
            .iter()
            .map(|mu| Complex::new(sigma, 0.0) + Complex::new(1.0, 0.0) / mu)
            .collect();
        lambdas.sort_by(|a, b| {
            let da = (a - sigma).norm();
            let db = (b - sigma).norm();
            da.total_cmp(&db).then(b.im.total_cmp(&a.im))
        });
        lambdas.truncate(count);
        let converged = previous.len() == count
            && lambdas
                .iter()
                .zip(&previous)
                .all(|(a, b)| (a - b).norm() <= tol * a.norm().max(1.0));
        if converged {
            return Ok(lambdas);
        }
        previous = lambdas;
        v = w.qr().q();
    }
    Err(Error::Eigen(format!(
        "block inverse iteration from shift {sigma} did not converge in {max_iter} iterations"
    )))
}

/// Values of the linear energy `ℰ₀` and dissipation `𝒟₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPair {
    pub c1: f64,
    pub e0: f64,
    pub d0: f64,
}

/// `ℰ₀` and `𝒟₀` of a state given by nodal `θ` and `θ_t`:
///
/// ```text
/// ℰ₀ = ½∫h_s θ_t² + ½⟨Kθ,θ⟩ + (c1/2)⟨Cθ,θ⟩ + c1∫h_s θ_t θ
/// 𝒟₀ = ⟨Cθ_t,θ_t⟩ - c1∫h_s θ_t² + c1⟨Kθ,θ⟩
/// ```
///
/// where `½⟨Kθ,θ⟩ = ∫m_s θ_ξ² + ∫h_s² θ_ξξ²` and `⟨Cθ,θ⟩ = 4μ∫h_s θ_ξ²`.
pub fn energy_pair(ops: &LinearOperators, theta: &[f64], theta_t: &[f64], c1: f64) -> Result<EnergyPair> {
    ops.grid.check_len(theta)?;
    ops.grid.check_len(theta_t)?;
    let th = ops.interior(theta);
    let tt = ops.interior(theta_t);
    let dx = ops.grid.dx();
    let mass = |a: &[f64], b: &[f64]| dx * (0..a.len()).map(|i| ops.m[i] * a[i] * b[i]).sum::<f64>();
    let form = |m: &Banded, a: &[f64]| dx * dot(a, &m.mul_vec(a));
    let k = form(&ops.k, &th);
    let c_th = form(&ops.c, &th);
    let c_tt = form(&ops.c, &tt);
    let e0 = 0.5 * mass(&tt, &tt) + 0.5 * k + 0.5 * c1 * c_th + c1 * mass(&tt, &th);
    let d0 = c_tt - c1 * mass(&tt, &tt) + c1 * k;
    Ok(EnergyPair { c1, e0, d0 })
}

/// Matrices of `ℰ₀` and `𝒟₀` on the constrained subspace in symmetrized coordinates.
fn pair_matrices(con: &Constrained, c1: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let r = con.k.nrows();
    let id = DMatrix::<f64>::identity(r, r);
    let mut e = DMatrix::zeros(2 * r, 2 * r);
    e.view_mut((0, 0), (r, r)).copy_from(&(&con.k * 0.5 + &con.c * (0.5 * c1)));
    e.view_mut((0, r), (r, r)).copy_from(&(&id * (0.5 * c1)));
    e.view_mut((r, 0), (r, r)).copy_from(&(&id * (0.5 * c1)));
    e.view_mut((r, r), (r, r)).copy_from(&(&id * 0.5));
    let mut d = DMatrix::zeros(2 * r, 2 * r);
    d.view_mut((0, 0), (r, r)).copy_from(&(&con.k * c1));
    d.view_mut((r, r), (r, r)).copy_from(&(&con.c - &id * c1));
    (e, d)
}

/// Largest `κ` with `𝒟₀ ⪰ κ ℰ₀` on the constrained subspace, or an error when
/// `ℰ₀` is not positive definite there.
pub fn kappa_max(ops: &LinearOperators, c1: f64) -> Result<f64> {
    kappa_of(&constrained(ops), c1)
}

fn kappa_of(con: &Constrained, c1: f64) -> Result<f64> {
    let (e, d) = pair_matrices(con, c1);
    let chol = e
        .cholesky()
        .ok_or_else(|| Error::NoAdmissibleCoupling(format!("energy form is not positive definite at c1 = {c1}")))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Eigen("singular Cholesky factor".into()))?;
    let g = &linv * d * linv.transpose();
    let g = (&g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(g);
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Result of the coupling-constant sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingChoice {
    pub c1: f64,
    pub kappa_max: f64,
}

/// Gap required by [`choose_c1`].
pub const KAPPA_FLOOR: f64 = 1e-3;

/// Largest `c1 ∈ {2⁻¹⁰, …, 2⁰}` with `ℰ₀ ⪰ 0` and `𝒟₀ - κℰ₀ ⪰ 0` on the
/// constrained subspace for `κ = 1e-3`.
pub fn choose_c1(ops: &LinearOperators) -> Result<CouplingChoice> {
    let con = constrained(ops);
    for p in 0..=10 {
        let c1 = 2f64.powi(-p);
        if let Ok(kappa) = kappa_of(&con, c1) {
            if kappa >= KAPPA_FLOOR {
                return Ok(CouplingChoice { c1, kappa_max: kappa });
            }
        }
    }
    Err(Error::NoAdmissibleCoupling(
        "no c1 in 2^-10..2^0 makes the energy pair coercive".into(),
    ))
}

/// Exponential decay rate: minus the least-squares slope of `ln(value)`
/// against `t` over samples with `t` in `[t_lo, t_hi]`.
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if pts.len() < 2 {
        return Err(Error::Fit(format!("fewer than two samples in window [{}, {}]", window.0, window.1)));
    }
    if let Some(&(t, v)) = pts.iter().find(|&&(_, v)| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Fit(format!("non-positive value {v} at t = {t}")));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let lm = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1.ln() - lm)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all samples share one time".into()));
    }
    Ok(-sxy / sxx)
}
