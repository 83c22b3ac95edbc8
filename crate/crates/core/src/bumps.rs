//! Smooth compactly supported bumps with prescribed moments.
//!
//! Everything is built from the base mollifier `ψ(t) = Z exp(−1/(t(1−t)))`
//! on `(0,1)` and its translates/dilates `ψ_{x,r}(t) = ψ((t−x)/r)/r`, which
//! have unit mass and live on `(x, x+r)`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::compensated::{dot2, CompensatedSum};
use crate::quadrature::integrate_adaptive;
use crate::symbolic::Polynomial;
use crate::{Error, Rational, Result};

/// Ratio between consecutive atom centres and radii in [`moment_bump`].
pub const SCALE_RATIO: f64 = 0.5;
/// Largest moment order served from the cache.
pub const MAX_MOMENT: u32 = 64;
/// Largest number of constrained moments besides the zeroth.
pub const MAX_CONSTRAINTS: usize = 12;
/// Largest derivative order available in closed form.
pub const MAX_DERIVATIVE: usize = 8;

const MOMENT_TOL: f64 = 1e-12;

fn unnormalized(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        (-1.0 / (t * (1.0 - t))).exp()
    }
}

struct Mollifier {
    z: f64,
    moments: Vec<f64>,
    /// Monomial coefficients of `Q_n` in `ψ^{(n)} = ψ Q_n / h^{2n}`, `h = t(1−t)`.
    q: Vec<Vec<f64>>,
}

fn mollifier() -> &'static Mollifier {
    static CELL: OnceLock<Mollifier> = OnceLock::new();
    CELL.get_or_init(|| {
        let mass = integrate_adaptive(unnormalized, 0.0, 1.0, 1e-17).expect("mollifier mass converges");
        let z = 1.0 / mass;
        let moments = (0..=MAX_MOMENT)
            .map(|m| {
                if m == 0 {
                    return 1.0;
                }
                integrate_adaptive(|t| z * t.powi(m as i32) * unnormalized(t), 0.0, 1.0, 1e-17)
                    .expect("mollifier moments converge")
            })
            .collect();
        Mollifier { z, moments, q: derivative_polynomials(MAX_DERIVATIVE) }
    })
}

/// `Q_0 = 1`, `Q_{n+1} = h′Q_n + h²Q_n′ − 2n h h′ Q_n`, computed exactly.
fn derivative_polynomials(max: usize) -> Vec<Vec<f64>> {
    use num_traits::ToPrimitive;
    let t = Polynomial::var(1, 0);
    let one = Polynomial::constant(1, Rational::from_integer(1.into()));
    let h = &t * &(&one - &t);
    let hp = h.derivative(0);
    let h2 = &h * &h;
    let hhp = &h * &hp;
    let mut q = one;
    let mut out = Vec::with_capacity(max + 1);
    for n in 0..=max {
        let deg = q.total_degree().unwrap_or(0) as usize;
        let mut coeffs = vec![0.0; deg + 1];
        for (alpha, c) in q.terms() {
            coeffs[alpha.0[0] as usize] = c.to_f64().unwrap_or(f64::NAN);
        }
        out.push(coeffs);
        let two_n = Rational::from_integer((2 * n as i64).into());
        q = &(&(&hp * &q) + &(&h2 * &q.derivative(0))) - &(&hhp * &q).scale(&two_n);
    }
    out
}

/// Normalization constant `Z` with `∫ψ = 1`.
pub fn normalization() -> f64 {
    mollifier().z
}

/// `b_m = ∫ t^m ψ(t) dt`, cached for `m ≤ 64`.
pub fn base_moment(m: u32) -> Result<f64> {
    mollifier()
        .moments
        .get(m as usize)
        .copied()
        .ok_or_else(|| Error::invalid(format!("moment order {m} exceeds {MAX_MOMENT}")))
}

/// `ψ(t)`, exactly zero outside `(0,1)`.
pub fn psi(t: f64) -> f64 {
    normalization() * unnormalized(t)
}

/// `ψ^{(n)}(t)` for `n ≤ 8`, evaluated as `Z exp(−1/h − 2n ln h) Q_n(t)`.
pub fn psi_derivative(n: usize, t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    assert!(n <= MAX_DERIVATIVE, "derivative order {n} exceeds {MAX_DERIVATIVE}");
    let m = mollifier();
    let coeffs = &m.q[n];
    let h = t * (1.0 - t);
    let poly = coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
    m.z * (-1.0 / h - 2.0 * n as f64 * h.ln()).exp() * poly
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// One term `c·ψ_{x,r}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Atom {
    pub c: f64,
    pub x: f64,
    pub r: f64,
}

impl TryFrom<[f64; 3]> for Atom {
    type Error = String;

    fn try_from([c, x, r]: [f64; 3]) -> std::result::Result<Self, String> {
        if !(r > 0.0 && r.is_finite() && x.is_finite() && c.is_finite()) {
            return Err(format!("invalid atom ({c}, {x}, {r}): radius must be positive and values finite"));
        }
        Ok(Atom { c, x, r })
    }
}

impl From<Atom> for [f64; 3] {
    fn from(a: Atom) -> Self {
        [a.c, a.x, a.r]
    }
}

impl Atom {
    pub fn eval(&self, t: f64) -> f64 {
        self.c * psi((t - self.x) / self.r) / self.r
    }

    pub fn derivative(&self, n: usize, t: f64) -> f64 {
        self.c * psi_derivative(n, (t - self.x) / self.r) / self.r.powi(n as i32 + 1)
    }

    /// `∫ t^m c ψ_{x,r}` from the cached base moments.
    pub fn analytic_moment(&self, m: u32) -> Result<f64> {
        let mut sum = 0.0;
        for k in 0..=m {
            sum += binomial(m, k) * base_moment(k)? * self.r.powi(k as i32) * self.x.powi((m - k) as i32);
        }
        Ok(self.c * sum)
    }
}

/// Finite signed combination `Σ c_j ψ_{x_j, r_j}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BumpCombination {
    atoms: Vec<Atom>,
}

impl BumpCombination {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        for a in &atoms {
            Atom::try_from([a.c, a.x, a.r]).map_err(Error::InvalidInput)?;
        }
        Ok(Self { atoms })
    }

    /// The base mollifier itself.
    pub fn base() -> Self {
        Self {
            atoms: vec![Atom { c: 1.0, x: 0.0, r: 1.0 }],
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.atoms.iter().map(|a| a.eval(t)).sum()
    }

    pub fn derivative(&self, n: usize, t: f64) -> f64 {
        self.atoms.iter().map(|a| a.derivative(n, t)).sum()
    }

    /// Smallest interval containing every atom's support.
    pub fn support(&self) -> (f64, f64) {
        let lo = self.atoms.iter().map(|a| a.x).fold(f64::INFINITY, f64::min);
        let hi = self.atoms.iter().map(|a| a.x + a.r).fold(f64::NEG_INFINITY, f64::max);
        if self.atoms.is_empty() {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// Largest `|c_j|`.
    pub fn coefficient_scale(&self) -> f64 {
        self.atoms.iter().map(|a| a.c.abs()).fold(0.0, f64::max)
    }

    /// `∫ t^m f(t) dt` by adaptive Gauss–Legendre.
    ///
    /// Each atom is integrated in its unit coordinate, `c ∫₀¹ (x + ru)^m ψ(u) du`,
    /// and the products are summed with compensation, so cancellation between
    /// large coefficients is not swamped by per-atom quadrature noise.
    pub fn moment(&self, m: u32) -> Result<f64> {
        if m > MAX_MOMENT {
            return Err(Error::invalid(format!("moment order {m} exceeds {MAX_MOMENT}")));
        }
        let mut total = CompensatedSum::new();
        for a in &self.atoms {
            let local = integrate_adaptive(|u| (a.x + a.r * u).powi(m as i32) * psi(u), 0.0, 1.0, MOMENT_TOL)?;
            total.add_product(a.c, local);
        }
        Ok(total.value())
    }

    pub fn scale_coefficients(&self, k: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| Atom { c: a.c * k, ..*a }).collect(),
        }
    }

    /// `f^{(λ)}(t) = λ f(λt)`: atoms become `(c, x/λ, r/λ)`.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom { c: a.c, x: a.x / lambda, r: a.r / lambda })
                .collect(),
        }
    }
}

/// Product `∏ f_i(t_i)` of one-dimensional combinations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TensorBump {
    factors: Vec<BumpCombination>,
}

impl TensorBump {
    pub fn new(factors: Vec<BumpCombination>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::invalid("tensor bump needs at least one factor"));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[BumpCombination] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        self.factors.iter().zip(t).map(|(f, &x)| f.eval(x)).product()
    }

    /// `∂^α` of the product.
    pub fn derivative(&self, alpha: &[usize], t: &[f64]) -> f64 {
        self.factors
            .iter()
            .zip(alpha)
            .zip(t)
            .map(|((f, &n), &x)| f.derivative(n, x))
            .product()
    }

    /// `∫ t^α ∏ f_i = ∏ ∫ t_i^{α_i} f_i`.
    pub fn moment(&self, alpha: &[u32]) -> Result<f64> {
        if alpha.len() != self.factors.len() {
            return Err(Error::DimensionMismatch {
                expected: self.factors.len(),
                got: alpha.len(),
            });
        }
        self.factors
            .iter()
            .zip(alpha)
            .map(|(f, &m)| f.moment(m))
            .product()
    }

    pub fn support(&self) -> Vec<(f64, f64)> {
        self.factors.iter().map(BumpCombination::support).collect()
    }

    pub fn scale_coefficients(&self, k: f64) -> Self {
        let mut factors = self.factors.clone();
        factors[0] = factors[0].scale_coefficients(k);
        Self { factors }
    }

    /// `f^{(λ)}` with one factor per coordinate: `λ_i f_i(λ_i t_i)` in each slot.
    pub fn dilate(&self, lambda: &[f64]) -> Self {
        Self {
            factors: self.factors.iter().zip(lambda).map(|(f, &l)| f.dilate(l)).collect(),
        }
    }
}

/// Result of [`moment_bump`]: the bump and a residual report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentBump {
    pub bump: BumpCombination,
    /// Constrained exponents in system order `(0, a₁, excluded…)`.
    pub exponents: Vec<u32>,
    /// Quadrature moments for `exponents`.
    pub moments: Vec<f64>,
    /// `|∫ς|`.
    pub mass_residual: f64,
    /// `max |∫t^{a_l}ς|` over excluded exponents (0 when there are none).
    pub excluded_residual: f64,
    /// `∫t^{a₁}ς`.
    pub target_moment: f64,
    /// Determinant of the assembled system.
    pub determinant: f64,
    /// `y₀⋯y_k ∏_{l<l′}(c^{a_l′} − c^{a_l})` with `y_l = ∫t^{a_l}ψ_{x₁,r₁}`.
    pub determinant_formula: f64,
}

impl MomentBump {
    /// Thresholds: mass `< 1e-10`, excluded `< 1e-9`, target `> 1e-6·max|c_j|`.
    pub fn passes(&self) -> bool {
        self.mass_residual < 1e-10
            && self.excluded_residual < 1e-9
            && self.target_moment.abs() > 1e-6 * self.bump.coefficient_scale().max(1.0)
    }
}

/// Bump on `(0, a)` with `∫ς = 0`, `∫t^{a₁}ς = 1` and `∫t^{a_l}ς = 0` for
/// every excluded `a_l`, assembled from `k+1` atoms with
/// `x_j = r_j = (a/2)c^j`, `c = 1/2`.
pub fn moment_bump(a: f64, a1: u32, excluded: &[u32]) -> Result<MomentBump> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("support length {a} must be positive")));
    }
    let mut exponents = vec![0, a1];
    exponents.extend_from_slice(excluded);
    if exponents[1..].iter().any(|&e| e == 0) {
        return Err(Error::invalid("exponents must be positive"));
    }
    if let Some(&bad) = exponents.iter().find(|&&e| e > MAX_MOMENT) {
        return Err(Error::invalid(format!("exponent {bad} exceeds {MAX_MOMENT}")));
    }
    if excluded.len() + 1 > MAX_CONSTRAINTS {
        return Err(Error::invalid(format!(
            "{} constrained moments exceed the limit of {MAX_CONSTRAINTS}",
            excluded.len() + 1
        )));
    }
    if excluded.contains(&a1) {
        return Err(Error::invalid(format!("target exponent {a1} is also excluded")));
    }
    let mut sorted = exponents.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != exponents.len() {
        return Err(Error::invalid("excluded exponents must be distinct"));
    }

    let n = exponents.len();
    let rho: Vec<f64> = (0..n).map(|j| 0.5 * a * SCALE_RATIO.powi(j as i32)).collect();
    let unit: Vec<Atom> = rho.iter().map(|&p| Atom { c: 1.0, x: p, r: p }).collect();
    let mut entries = Vec::with_capacity(n * n);
    for &e in &exponents {
        for atom in &unit {
            entries.push(atom.analytic_moment(e)?);
        }
    }
    let m = DMatrix::from_row_slice(n, n, &entries);
    let mut rhs = DVector::zeros(n);
    rhs[1] = 1.0;
    let coeffs = solve_refined(&m, &rhs)?;

    let atoms: Vec<Atom> = unit.iter().zip(coeffs.iter()).map(|(u, &c)| Atom { c, ..*u }).collect();
    let bump = BumpCombination { atoms };

    let moments = exponents.iter().map(|&e| bump.moment(e)).collect::<Result<Vec<_>>>()?;
    let excluded_residual = moments[2..].iter().map(|v| v.abs()).fold(0.0, f64::max);

    let first = BumpCombination { atoms: vec![unit[0]] };
    let mut determinant_formula = 1.0;
    for &e in &exponents {
        determinant_formula *= first.moment(e)?;
    }
    for l in 0..n {
        for lp in (l + 1)..n {
            determinant_formula *=
                SCALE_RATIO.powi(exponents[lp] as i32) - SCALE_RATIO.powi(exponents[l] as i32);
        }
    }

    Ok(MomentBump {
        mass_residual: moments[0].abs(),
        target_moment: moments[1],
        excluded_residual,
        determinant: m.clone().lu().determinant(),
        determinant_formula,
        moments,
        exponents,
        bump,
    })
}

/// LU solve followed by refinement with doubly-compensated residuals.
fn solve_refined(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let lu = m.clone().lu();
    let mut x = lu
        .solve(rhs)
        .ok_or_else(|| Error::Singular("moment system is singular".into()))?;
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    for _ in 0..4 {
        let xs: Vec<f64> = x.iter().copied().collect();
        let residual = DVector::from_iterator(
            m.nrows(),
            rows.iter().zip(rhs.iter()).map(|(row, &b)| {
                let mut ext = row.clone();
                ext.push(-1.0);
                let mut v = xs.clone();
                v.push(b);
                -dot2(&ext, &v)
            }),
        );
        let Some(d) = lu.solve(&residual) else { break };
        x += &d;
        if d.amax() <= f64::EPSILON * x.amax() {
            break;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("moment system produced non-finite coefficients".into()));
    }
    Ok(x)
}
