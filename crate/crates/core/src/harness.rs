//! Discretized translation-line Radon operators on ℝ and L² norm estimates.
//!
//! An operator `Tf(x) = Σ_k ∫ f(x − p(t)) ς^{(δ_k)}(t) dt` is evaluated in
//! normalized coordinates `u = δ_k t`, so each term reads
//! `∫ f(x − p(δ_k^{-1}u)) ς(u) du`. Grid functions are nodal values with
//! linear (hat) interpolation and zero nodal values outside the window.
//! Because the flow is a translation, every term collapses to a Toeplitz
//! kernel on the grid: each quadrature node deposits its weight onto the two
//! grid offsets bracketing its displacement.

use std::sync::Arc;

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use realfft::num_complex::Complex;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::Serialize;

use crate::bumps::{moment_bump, TensorBump};
use crate::compensated::CompensatedSum;
use crate::quadrature::gauss_legendre;
use crate::symbolic::Polynomial;
use crate::{Error, Rational, Result};

/// Seed of the power-iteration start vector.
pub const POWER_SEED: u64 = 0x5eed;
/// Cells are split until the displacement varies by at most this many grid spacings.
pub const CELL_SPREAD: f64 = 1.0;
/// Every atom rectangle is split at least this many times per axis (as a power of two).
pub const MIN_DEPTH: u32 = 2;
const MAX_DEPTH: u32 = 30;

/// Uniform grid `xmin = x_0 < … < x_{n−1} = xmax`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid1D {
    pub xmin: f64,
    pub xmax: f64,
    pub n: usize,
}

impl Default for Grid1D {
    fn default() -> Self {
        Self { xmin: -4.0, xmax: 4.0, n: 2048 }
    }
}

impl Grid1D {
    pub fn new(xmin: f64, xmax: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("grid needs at least 2 points, got {n}")));
        }
        if !(xmin < xmax && xmin.is_finite() && xmax.is_finite()) {
            return Err(Error::invalid(format!("grid window [{xmin}, {xmax}] is empty")));
        }
        Ok(Self { xmin, xmax, n })
    }

    pub fn h(&self) -> f64 {
        (self.xmax - self.xmin) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.xmin + i as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n).map(|i| f(self.node(i))).collect()
    }

    /// Hat interpolation of nodal values; zero beyond the outermost hats.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let q = (x - self.xmin) / self.h();
        let i = q.floor();
        let fr = q - i;
        let at = |j: f64| {
            if j >= 0.0 && (j as usize) < self.n {
                values[j as usize]
            } else {
                0.0
            }
        };
        (1.0 - fr) * at(i) + fr * at(i + 1.0)
    }

    /// `(Σ h |f_i|²)^{1/2}`.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        (self.h() * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }
}

/// Polynomial with floating coefficients, used for flow displacements.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledPolynomial {
    terms: Vec<(f64, Vec<u32>)>,
    nvars: usize,
}

impl ScaledPolynomial {
    /// `p(λ^{-1} u)`, i.e. coefficients `c_α ∏ λ_i^{−α_i}`.
    pub fn from_polynomial(p: &Polynomial, inverse_of: &[f64]) -> Result<Self> {
        if inverse_of.len() != p.nvars() {
            return Err(Error::DimensionMismatch {
                expected: p.nvars(),
                got: inverse_of.len(),
            });
        }
        let terms = p
            .terms()
            .map(|(alpha, c)| {
                let mut coef = rational_to_f64(c);
                for (&l, &a) in inverse_of.iter().zip(alpha.components()) {
                    coef /= l.powi(a as i32);
                }
                (coef, alpha.components().to_vec())
            })
            .collect();
        Ok(Self { terms, nvars: p.nvars() })
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, a)| c * a.iter().zip(u).map(|(&e, &x)| x.powi(e as i32)).product::<f64>())
            .sum()
    }

    /// Enclosure of the range over a box, by interval arithmetic.
    pub fn range(&self, bx: &[(f64, f64)]) -> (f64, f64) {
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (c, alpha) in &self.terms {
            let mut term = (*c, *c);
            for (&e, &iv) in alpha.iter().zip(bx) {
                term = interval_mul(term, interval_pow(iv, e));
            }
            lo += term.0;
            hi += term.1;
        }
        (lo, hi)
    }
}

fn rational_to_f64(c: &Rational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

fn interval_mul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let p = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        p.iter().copied().fold(f64::INFINITY, f64::min),
        p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
}

fn interval_pow(a: (f64, f64), e: u32) -> (f64, f64) {
    if e == 0 {
        return (1.0, 1.0);
    }
    let (l, h) = (a.0.powi(e as i32), a.1.powi(e as i32));
    if e % 2 == 1 || a.0 >= 0.0 {
        (l.min(h), l.max(h))
    } else if a.1 <= 0.0 {
        (h, l)
    } else {
        (0.0, l.max(h))
    }
}

/// One dyadic term `ς^{(δ)}`, with `δ` given by its coordinate factors.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicTerm {
    pub atom: TensorBump,
    pub factors: Vec<f64>,
}

/// `Σ_k ∫ f(x − p(t)) ς_k^{(δ_k)}(t) dt` on a grid, as a Toeplitz kernel.
#[derive(Clone, Debug)]
pub struct DiscretizedOperator {
    grid: Grid1D,
    quad_order: usize,
    /// `κ[m + n − 1]` multiplies `f_{i−m}` in `(Tf)_i`.
    kernel: Vec<f64>,
}

impl DiscretizedOperator {
    /// Assembles the kernel; terms are processed in parallel and summed in order.
    pub fn new(grid: Grid1D, displacement: &Polynomial, terms: &[DyadicTerm], quad_order: usize) -> Result<Self> {
        let kernels = terms
            .par_iter()
            .map(|t| term_kernel(&grid, displacement, t, quad_order))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_term_kernels(grid, quad_order, &kernels))
    }

    /// Sums precomputed per-term kernels in the given order.
    pub fn from_term_kernels(grid: Grid1D, quad_order: usize, kernels: &[Vec<f64>]) -> Self {
        let mut kernel = vec![0.0; 2 * grid.n - 1];
        for k in kernels {
            for (a, b) in kernel.iter_mut().zip(k) {
                *a += b;
            }
        }
        Self { grid, quad_order, kernel }
    }

    pub fn zero(grid: Grid1D) -> Self {
        Self {
            grid,
            quad_order: 0,
            kernel: vec![0.0; 2 * grid.n - 1],
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }
}

/// Toeplitz kernel of one term, integrating each product of atoms over its
/// own rectangle with adaptive cell splitting.
pub fn term_kernel(grid: &Grid1D, displacement: &Polynomial, term: &DyadicTerm, quad_order: usize) -> Result<Vec<f64>> {
    let dim = term.atom.dim();
    if term.factors.len() != dim || displacement.nvars() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: if term.factors.len() != dim { term.factors.len() } else { displacement.nvars() },
        });
    }
    if quad_order == 0 {
        return Err(Error::invalid("quadrature order must be positive"));
    }
    let q = ScaledPolynomial::from_polynomial(displacement, &term.factors)?;
    let n = grid.n;
    let h = grid.h();
    let rule = gauss_legendre(quad_order);
    let mut kernel = vec![0.0; 2 * n - 1];
    let factors = term.atom.factors();
    let mut choice = vec![0usize; dim];
    let total: usize = factors.iter().map(|f| f.atoms().len()).product();
    for _ in 0..total {
        let atoms: Vec<_> = factors.iter().zip(&choice).map(|(f, &j)| f.atoms()[j]).collect();
        let bx: Vec<(f64, f64)> = atoms.iter().map(|a| (a.x, a.x + a.r)).collect();
        let reach = (n as f64 + 1.0) * h;
        for cell in leaf_cells(&q, bx, h, reach) {
            deposit_cell(&mut kernel, &cell, &rule, &atoms, &q, n, h);
        }
        for (c, f) in choice.iter_mut().zip(factors) {
            *c += 1;
            if *c < f.atoms().len() {
                break;
            }
            *c = 0;
        }
    }
    Ok(kernel)
}

/// Splits `bx` until the displacement range on every cell is at most
/// `CELL_SPREAD · h`, after `MIN_DEPTH` uniform halvings per axis. Cells
/// whose displacements all exceed `reach` in absolute value are dropped.
pub fn leaf_cells(q: &ScaledPolynomial, bx: Vec<(f64, f64)>, h: f64, reach: f64) -> Vec<Vec<(f64, f64)>> {
    let dim = bx.len() as u32;
    let mut out = Vec::new();
    let mut stack = vec![(bx, 0u32)];
    while let Some((cell, depth)) = stack.pop() {
        if depth < MIN_DEPTH * dim {
            stack.extend(bisect(&cell, (depth % dim) as usize).map(|c| (c, depth + 1)));
            continue;
        }
        let (lo, hi) = q.range(&cell);
        if lo > reach || hi < -reach {
            continue;
        }
        if hi - lo > CELL_SPREAD * h && depth < MAX_DEPTH * dim {
            stack.extend(bisect(&cell, steepest_axis(q, &cell)).map(|c| (c, depth + 1)));
            continue;
        }
        out.push(cell);
    }
    out
}

/// Halves `cell` along `axis`.
fn bisect(cell: &[(f64, f64)], axis: usize) -> [Vec<(f64, f64)>; 2] {
    let (a, b) = cell[axis];
    let mid = 0.5 * (a + b);
    let mut left = cell.to_vec();
    let mut right = cell.to_vec();
    left[axis].1 = mid;
    right[axis].0 = mid;
    [left, right]
}

/// Axis whose collapse to its midpoint shrinks the displacement range most.
fn steepest_axis(q: &ScaledPolynomial, cell: &[(f64, f64)]) -> usize {
    let mut best = (0, f64::INFINITY);
    for axis in 0..cell.len() {
        let mut pinned = cell.to_vec();
        let mid = 0.5 * (cell[axis].0 + cell[axis].1);
        pinned[axis] = (mid, mid);
        let (lo, hi) = q.range(&pinned);
        if hi - lo < best.1 {
            best = (axis, hi - lo);
        }
    }
    best.0
}

fn deposit_cell(
    kernel: &mut [f64],
    cell: &[(f64, f64)],
    rule: &Arc<[(f64, f64)]>,
    atoms: &[crate::bumps::Atom],
    q: &ScaledPolynomial,
    n: usize,
    h: f64,
) {
    let dim = cell.len();
    let order = rule.len();
    // Per-axis nodes and weights, with the atom folded into the weight.
    let axes: Vec<Vec<(f64, f64)>> = cell
        .iter()
        .zip(atoms)
        .map(|(&(a, b), atom)| {
            let half = 0.5 * (b - a);
            rule.iter()
                .map(|&(x, wx)| {
                    let u = a + half * (x + 1.0);
                    (u, half * wx * atom.eval(u))
                })
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; dim];
    let mut u = vec![0.0; dim];
    let last = (2 * n - 1) as i64;
    for _ in 0..order.pow(dim as u32) {
        let mut w = 1.0;
        for i in 0..dim {
            let (x, wx) = axes[i][idx[i]];
            u[i] = x;
            w *= wx;
        }
        if w != 0.0 {
            let s = q.eval(&u) / h;
            let m = s.floor();
            let fr = s - m;
            if m.abs() < n as f64 + 1.0 {
                let j = m as i64 + n as i64 - 1;
                if (0..last).contains(&j) {
                    kernel[j as usize] += w * (1.0 - fr);
                }
                if (0..last).contains(&(j + 1)) {
                    kernel[(j + 1) as usize] += w * fr;
                }
            }
        }
        for i in 0..dim {
            idx[i] += 1;
            if idx[i] < order {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// `(Tf)_i = Σ_j κ[i−j] f_j`, serially summed in index order with compensation.
pub fn apply_operator(op: &DiscretizedOperator, f: &[f64]) -> Result<Vec<f64>> {
    let n = op.grid.n;
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = CompensatedSum::new();
            for (j, &fj) in f.iter().enumerate() {
                let k = op.kernel[i + n - 1 - j];
                if k != 0.0 {
                    acc.add_product(k, fj);
                }
            }
            acc.value()
        })
        .collect())
}

/// FFT-based application of `T` and `Tᵀ` as circular convolutions of
/// length `2n`; the outputs needed never wrap around.
struct ToeplitzFft {
    n: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    spectrum: Vec<Complex<f64>>,
    spectrum_t: Vec<Complex<f64>>,
}

impl ToeplitzFft {
    fn new(kernel: &[f64], n: usize) -> Self {
        let size = 2 * n;
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(size);
        let inverse = planner.plan_fft_inverse(size);
        let transform = |coeffs: &mut dyn Iterator<Item = f64>| {
            let mut buf: Vec<f64> = coeffs.collect();
            buf.resize(size, 0.0);
            let mut out = forward.make_output_vec();
            forward.process(&mut buf, &mut out).expect("buffer sizes match the plan");
            out
        };
        let spectrum = transform(&mut kernel.iter().copied());
        let spectrum_t = transform(&mut kernel.iter().rev().copied());
        Self { n, forward, inverse, spectrum, spectrum_t }
    }

    fn apply(&self, f: &[f64], transpose: bool) -> Vec<f64> {
        let size = 2 * self.n;
        let mut buf = f.to_vec();
        buf.resize(size, 0.0);
        let mut spec = self.forward.make_output_vec();
        self.forward.process(&mut buf, &mut spec).expect("buffer sizes match the plan");
        let kernel = if transpose { &self.spectrum_t } else { &self.spectrum };
        for (b, k) in spec.iter_mut().zip(kernel) {
            *b *= k;
        }
        // DC and Nyquist bins of a real signal are real.
        spec[0].im = 0.0;
        let last = spec.len() - 1;
        spec[last].im = 0.0;
        self.inverse.process(&mut spec, &mut buf).expect("buffer sizes match the plan");
        let scale = 1.0 / size as f64;
        buf[self.n - 1..2 * self.n - 1].iter().map(|x| x * scale).collect()
    }
}

/// Result of [`operator_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value of the discrete operator on `ℓ²(h)`, by power
/// iteration on `TᵀT` from a fixed pseudo-random start vector.
pub fn operator_norm(op: &DiscretizedOperator, max_iters: usize, tol: f64) -> NormEstimate {
    let n = op.grid.n;
    if op.kernel.iter().all(|&k| k == 0.0) {
        return NormEstimate { value: 0.0, iterations: 0, converged: true };
    }
    let fft = ToeplitzFft::new(&op.kernel, n);
    let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut estimate = 0.0;
    for it in 1..=max_iters {
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let tv = fft.apply(&v, false);
        let next = norm(&tv);
        let converged = (next - estimate).abs() <= tol * next;
        estimate = next;
        if converged {
            return NormEstimate { value: estimate, iterations: it, converged: true };
        }
        v = fft.apply(&tv, true);
        if norm(&v) == 0.0 {
            return NormEstimate { value: estimate, iterations: it, converged: true };
        }
    }
    NormEstimate { value: estimate, iterations: max_iters, converged: false }
}

/// The three model experiments on the translation line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    /// `x − st`, terms `ς^{(2^k, 2^{−k})}`.
    Kitty,
    /// `x − 2^{−L}s³ − 2^{−L}t³ − st`, terms `ς^{(2^k, 2^{−k})}`.
    Know,
    /// `x − s − st`, terms `ς^{(2^{−k}, 2^k)}`.
    Billy,
}

impl Case {
    pub fn name(&self) -> &'static str {
        match self {
            Case::Kitty => "kitty",
            Case::Know => "know",
            Case::Billy => "billy",
        }
    }

    /// Displacement polynomial `p(s, t)`.
    pub fn displacement(&self, l: u32) -> Polynomial {
        let s = Polynomial::var(2, 0);
        let t = Polynomial::var(2, 1);
        let st = &s * &t;
        match self {
            Case::Kitty => st,
            Case::Know => {
                let c = Rational::new(1.into(), num_bigint::BigInt::from(2).pow(l));
                let cubes = &(&(&s * &s) * &s) + &(&(&t * &t) * &t);
                &cubes.scale(&c) + &st
            }
            Case::Billy => &s + &st,
        }
    }

    /// Coordinate factors of the `k`-th term.
    pub fn term_factors(&self, k: u32) -> [f64; 2] {
        let up = 2f64.powi(k as i32);
        let down = 2f64.powi(-(k as i32));
        match self {
            Case::Kitty | Case::Know => [up, down],
            Case::Billy => [down, up],
        }
    }
}

impl std::str::FromStr for Case {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kitty" => Ok(Case::Kitty),
            "know" => Ok(Case::Know),
            "billy" => Ok(Case::Billy),
            other => Err(Error::invalid(format!("unknown case '{other}' (expected kitty, know or billy)"))),
        }
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Numerical parameters of a growth experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub grid: Grid1D,
    pub quad_order: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// One-dimensional factor of the tensor atom is `moment_bump(bump_a, 1, ∅)`.
    pub bump_a: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: Grid1D::default(),
            quad_order: 16,
            max_iters: 20_000,
            tol: 1e-10,
            bump_a: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthRow {
    pub m: u32,
    pub norm: f64,
    pub ratio: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthTable {
    pub case: Case,
    pub l: u32,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Norm of the single-term operator, the ratio denominator.
    pub base_norm: f64,
    pub rows: Vec<GrowthRow>,
}

impl GrowthTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# case={} L={} grid=[{}, {}] n={} quad_order={} seed={:#x}\nM,L,norm,ratio\n",
            self.case, self.l, self.config.grid.xmin, self.config.grid.xmax, self.config.grid.n, self.config.quad_order, self.seed
        );
        for r in &self.rows {
            out.push_str(&format!("{},{},{:.12e},{:.12}\n", r.m, self.l, r.norm, r.ratio));
        }
        out
    }
}

/// Tensor atom `φ ⊗ φ` with `φ = moment_bump(a, 1, ∅)`.
pub fn experiment_atom(a: f64) -> Result<TensorBump> {
    let phi = moment_bump(a, 1, &[])?.bump;
    TensorBump::new(vec![phi.clone(), phi])
}

/// Norms of `T_M = Σ_{k ≤ M}` (one term per `k`) and their ratios to `T_0`.
pub fn growth_experiment(case: Case, m_list: &[u32], l: u32, config: &ExperimentConfig) -> Result<GrowthTable> {
    let atom = experiment_atom(config.bump_a)?;
    let p = case.displacement(l);
    let top = m_list.iter().copied().max().unwrap_or(0);
    let kernels = (0..=top)
        .into_par_iter()
        .map(|k| {
            let term = DyadicTerm { atom: atom.clone(), factors: case.term_factors(k).to_vec() };
            term_kernel(&config.grid, &p, &term, config.quad_order)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut wanted: Vec<u32> = m_list.to_vec();
    wanted.push(0);
    wanted.sort_unstable();
    wanted.dedup();
    let estimates: Vec<(u32, NormEstimate)> = wanted
        .par_iter()
        .map(|&m| {
            let op = DiscretizedOperator::from_term_kernels(config.grid, config.quad_order, &kernels[..=m as usize]);
            (m, operator_norm(&op, config.max_iters, config.tol))
        })
        .collect();
    let base = estimates[0].1.value;
    let rows = m_list
        .iter()
        .map(|&m| {
            let e = estimates.iter().find(|(mm, _)| *mm == m).expect("every requested M is computed").1;
            GrowthRow { m, norm: e.value, ratio: e.value / base, iterations: e.iterations, converged: e.converged }
        })
        .collect();
    Ok(GrowthTable { case, l, seed: POWER_SEED, config: config.clone(), base_norm: base, rows })
}
