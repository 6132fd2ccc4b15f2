//! Empirical constants of the one-dimensional Hardy inequalities and of the
//! weighted Poincaré inequalities with the equilibrium weight.
//!
//! Hardy, for `p > 1`:
//! - `k + 1/p > 1`: `∫₀¹ (s^{k-1}|g|)^p ≤ C ∫₀¹ (s^k|g'|)^p + (s^k|g|)^p`;
//! - `k + 1/p < 1`: `∫₀¹ (s^{k-1}|g - g(0)|)^p ≤ C ∫₀¹ (s^k|g'|)^p`.
//!
//! Poincaré, for `∫ h_s g = 0`:
//! `∫ h_s g² ≤ C ∫ h_s g'²` (weighted) and `∫ g² ≤ C ∫ h_s g'²` (unweighted).
//!
//! Each estimate is the largest ratio of left- to right-hand side over a fixed
//! test family, recorded on a sequence of resolutions.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::EquilibriumProfile;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Relative variation allowed between the two finest resolutions.
pub const REFINEMENT_TOL: f64 = 0.1;

/// Fixed families of smooth test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFamily {
    /// `s^j` for `j = 0..=max_degree`.
    Monomials { max_degree: usize },
    /// `cos(jπs)` and `sin(jπs)` for `j = 1..=modes`.
    Trigonometric { modes: usize },
    /// `count` polynomials of the given degree with coefficients uniform in `[-1, 1]`.
    RandomPolynomials { seed: u64, count: usize, degree: usize },
    /// A single polynomial with coefficients in increasing degree.
    Polynomial { coefficients: Vec<f64> },
}

/// One member of a test family with its derivative.
#[derive(Debug, Clone)]
enum Member {
    Poly(Vec<f64>),
    Cos(f64),
    Sin(f64),
}

impl Member {
    fn eval(&self, s: f64) -> (f64, f64) {
        match self {
            Member::Poly(c) => {
                let (mut g, mut dg) = (0.0, 0.0);
                for &cj in c.iter().rev() {
                    dg = dg * s + g;
                    g = g * s + cj;
                }
                (g, dg)
            }
            Member::Cos(w) => ((w * s).cos(), -w * (w * s).sin()),
            Member::Sin(w) => ((w * s).sin(), w * (w * s).cos()),
        }
    }
}

impl TestFamily {
    /// Default family used by the command line: monomials, trigonometric modes
    /// and seeded random degree-6 polynomials.
    pub fn standard() -> Vec<TestFamily> {
        vec![
            TestFamily::Monomials { max_degree: 6 },
            TestFamily::Trigonometric { modes: 4 },
            TestFamily::RandomPolynomials {
                seed: 7,
                count: 16,
                degree: 6,
            },
        ]
    }

    fn members(&self) -> Vec<Member> {
        match self {
            TestFamily::Monomials { max_degree } => (0..=*max_degree)
                .map(|j| {
                    let mut c = vec![0.0; j + 1];
                    c[j] = 1.0;
                    Member::Poly(c)
                })
                .collect(),
            TestFamily::Trigonometric { modes } => (1..=*modes)
                .flat_map(|j| {
                    let w = j as f64 * PI;
                    [Member::Cos(w), Member::Sin(w)]
                })
                .collect(),
            TestFamily::RandomPolynomials { seed, count, degree } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*count)
                    .map(|_| Member::Poly((0..=*degree).map(|_| rng.random_range(-1.0..=1.0)).collect()))
                    .collect()
            }
            TestFamily::Polynomial { coefficients } => vec![Member::Poly(coefficients.clone())],
        }
    }

    /// Compact text form used in reports.
    pub fn descriptor(&self) -> String {
        match self {
            TestFamily::Monomials { max_degree } => format!("monomials(degree<={max_degree})"),
            TestFamily::Trigonometric { modes } => format!("trigonometric(modes<={modes})"),
            TestFamily::RandomPolynomials { seed, count, degree } => {
                format!("random_polynomials(seed={seed},count={count},degree={degree})")
            }
            TestFamily::Polynomial { coefficients } => format!("polynomial({coefficients:?})"),
        }
    }
}

/// Empirical constant of one inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityEstimate {
    /// `hardy_case1`, `hardy_case2`, `poincare_weighted` or `poincare_unweighted`.
    pub id: String,
    pub k: Option<f64>,
    pub p: Option<f64>,
    /// Constant on the finest resolution.
    pub constant: f64,
    pub family: String,
    /// Resolutions, coarse to fine (panel counts for Hardy, grid sizes for Poincaré).
    pub grids: Vec<usize>,
    /// Constant per resolution.
    pub constants: Vec<f64>,
    /// Whether the two finest constants agree within [`REFINEMENT_TOL`].
    pub refinement_stable: bool,
}

impl InequalityEstimate {
    fn new(id: &str, k: Option<f64>, p: Option<f64>, family: String, grids: &[usize], constants: Vec<f64>) -> Self {
        let m = constants.len();
        let constant = constants[m - 1];
        let refinement_stable = constant.is_finite()
            && constant > 0.0
            && (m < 2 || (constant - constants[m - 2]).abs() <= REFINEMENT_TOL * constant);
        Self {
            id: id.to_string(),
            k,
            p,
            constant,
            family,
            grids: grids.to_vec(),
            constants,
            refinement_stable,
        }
    }
}

fn family_descriptor(families: &[TestFamily]) -> String {
    families.iter().map(TestFamily::descriptor).collect::<Vec<_>>().join("+")
}

fn check_resolutions(grids: &[usize]) -> Result<()> {
    if grids.is_empty() {
        return Err(Error::config("grids", "at least one resolution is required"));
    }
    Ok(())
}

/// `∫₀¹ f` by 8-point Gauss–Legendre on `panels` panels graded as `(j/panels)³`.
pub fn graded_integral(panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(8).expect("nonzero"));
    let edge = |j: usize| (j as f64 / panels as f64).powi(3);
    (0..panels).map(|j| rule.integrate(edge(j), edge(j + 1), &f)).sum()
}

/// Largest Hardy ratio over `families` at each panel count in `grids`.
pub fn hardy_check(k: f64, p: f64, families: &[TestFamily], grids: &[usize]) -> Result<InequalityEstimate> {
    if !(p > 1.0) || !p.is_finite() || !k.is_finite() {
        return Err(Error::config("p", "Hardy inequality needs finite k and p > 1"));
    }
    let index = k + 1.0 / p;
    if (index - 1.0).abs() <= 1e-12 {
        return Err(Error::HardyBorderline { k, p });
    }
    check_resolutions(grids)?;
    let case1 = index > 1.0;
    let members: Vec<Member> = families.iter().flat_map(TestFamily::members).collect();
    let mut constants = Vec::with_capacity(grids.len());
    for &panels in grids {
        let mut best = f64::NAN;
        for m in &members {
            let g0 = m.eval(0.0).0;
            let lhs = graded_integral(panels, |s| {
                let g = m.eval(s).0;
                let v = if case1 { g } else { g - g0 };
                (s.powf(k - 1.0) * v.abs()).powf(p)
            });
            let rhs = graded_integral(panels, |s| {
                let (g, dg) = m.eval(s);
                let w = s.powf(k);
                let mut r = (w * dg.abs()).powf(p);
                if case1 {
                    r += (w * g.abs()).powf(p);
                }
                r
            });
            if rhs > 1e-300 && lhs.is_finite() {
                let ratio = lhs / rhs;
                if !(ratio <= best) {
                    best = ratio;
                }
            }
        }
        if best.is_nan() {
            return Err(Error::Empty("no family member with a nonzero right-hand side".into()));
        }
        constants.push(best);
    }
    let id = if case1 { "hardy_case1" } else { "hardy_case2" };
    Ok(InequalityEstimate::new(
        id,
        Some(k),
        Some(p),
        family_descriptor(families),
        grids,
        constants,
    ))
}

/// Weighted and unweighted Poincaré constants over `families` after projecting
/// each member onto `∫ h_s g = 0`, on each grid size in `grids`.
pub fn poincare_check(
    families: &[TestFamily],
    grids: &[usize],
    profile: &EquilibriumProfile,
) -> Result<(InequalityEstimate, InequalityEstimate)> {
    check_resolutions(grids)?;
    let members: Vec<Member> = families.iter().flat_map(TestFamily::members).collect();
    let mut weighted = Vec::with_capacity(grids.len());
    let mut unweighted = Vec::with_capacity(grids.len());
    for &n in grids {
        let grid = Grid::with_profile(n, profile)?;
        let h = grid.h();
        let total = grid.integrate(h)?;
        let (mut best_w, mut best_u) = (f64::NAN, f64::NAN);
        for m in &members {
            let (g, dg): (Vec<f64>, Vec<f64>) = grid.nodes().iter().map(|&x| m.eval(x)).unzip();
            let hg: Vec<f64> = h.iter().zip(&g).map(|(a, b)| a * b).collect();
            let mean = grid.integrate(&hg)? / total;
            let g: Vec<f64> = g.iter().map(|v| v - mean).collect();
            let hg: Vec<f64> = h.iter().zip(&g).map(|(a, b)| a * b).collect();
            let residual = grid.integrate(&hg)?;
            let scale = grid.integrate(&hg.iter().map(|v| v.abs()).collect::<Vec<_>>())?;
            if residual.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::Projection(residual));
            }
            let rhs = grid.integrate(&h.iter().zip(&dg).map(|(a, d)| a * d * d).collect::<Vec<_>>())?;
            if rhs <= 1e-14 {
                continue;
            }
            let lhs_w = grid.integrate(&h.iter().zip(&g).map(|(a, v)| a * v * v).collect::<Vec<_>>())?;
            let lhs_u = grid.integrate(&g.iter().map(|v| v * v).collect::<Vec<_>>())?;
            if !(lhs_w / rhs <= best_w) {
                best_w = lhs_w / rhs;
            }
            if !(lhs_u / rhs <= best_u) {
                best_u = lhs_u / rhs;
            }
        }
        if best_w.is_nan() {
            return Err(Error::Empty("every family member is constant after projection".into()));
        }
        weighted.push(best_w);
        unweighted.push(best_u);
    }
    let family = family_descriptor(families);
    Ok((
        InequalityEstimate::new("poincare_weighted", None, None, family.clone(), grids, weighted),
        InequalityEstimate::new("poincare_unweighted", None, None, family, grids, unweighted),
    ))
}
