//! Dyadic multi-parameter kernel sequences `K = Σ_k ς_k^{(2^k)}`.
//!
//! Kernels are kept as finite dyadic data: a map from `k ∈ ℕ^ν̄` to a signed
//! sum of tensor bumps. The module checks the cancellation conditions,
//! samples product-kernel size bounds, and implements two exact rewritings
//! of dilated sums into dyadic normal form: regrouping a one-parameter
//! family along a direction, and telescoping a shifted family.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bumps::{BumpCombination, TensorBump};
use crate::dilations::ExponentScheme;
use crate::quadrature::gauss_legendre;
use crate::{Error, Result};

/// Slice integrals below this are treated as vanishing.
pub const CANCELLATION_TOL: f64 = 1e-9;
/// Gauss–Legendre order used per atom for slice integrals.
pub const SLICE_ORDER: usize = 24;

/// `coef · bump`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTerm {
    pub coef: f64,
    #[serde(rename = "factors")]
    pub bump: TensorBump,
}

/// Signed sum of tensor bumps.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct KernelEntry {
    terms: Vec<KernelTerm>,
}

impl KernelEntry {
    pub fn new(terms: Vec<KernelTerm>) -> Result<Self> {
        if let Some(first) = terms.first() {
            let dim = first.bump.dim();
            if let Some(bad) = terms.iter().find(|t| t.bump.dim() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: bad.bump.dim(),
                });
            }
        }
        Ok(Self { terms })
    }

    pub fn single(bump: TensorBump) -> Self {
        Self {
            terms: vec![KernelTerm { coef: 1.0, bump }],
        }
    }

    pub fn terms(&self) -> &[KernelTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn push(&mut self, coef: f64, bump: TensorBump) {
        self.terms.push(KernelTerm { coef, bump });
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        self.terms.iter().map(|term| term.coef * term.bump.eval(t)).sum()
    }

    pub fn derivative(&self, alpha: &[usize], t: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|term| term.coef * term.bump.derivative(alpha, t))
            .sum()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| KernelTerm { coef: t.coef * k, bump: t.bump.clone() })
                .collect(),
        }
    }

    /// `ς^{(δ)}` for per-coordinate factors `λ_i = δ^{e_i}`.
    pub fn dilate_coordinates(&self, factors: &[f64]) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| KernelTerm { coef: t.coef, bump: t.bump.dilate(factors) })
                .collect(),
        }
    }

    /// `ς^{(δ)}` under `scheme`.
    pub fn dilate(&self, delta: &[f64], scheme: &ExponentScheme) -> Result<Self> {
        Ok(self.dilate_coordinates(&scheme.coordinate_factors(delta)?))
    }

    /// Smallest box containing every term's support.
    pub fn support_box(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for term in &self.terms {
            for (i, (lo, hi)) in term.bump.support().into_iter().enumerate() {
                match out.get_mut(i) {
                    Some(slot) => *slot = (slot.0.min(lo), slot.1.max(hi)),
                    None => out.push((lo, hi)),
                }
            }
        }
        out
    }

    /// Largest Euclidean norm over the corners of all term support boxes.
    pub fn support_radius(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.bump
                    .support()
                    .iter()
                    .map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Sampled `sup |∂^β ς|` over `|β| = m` for `m = 0, 1, 2`, on a uniform
    /// grid with `per_axis` points spanning the support box.
    pub fn sampled_cm_norms(&self, per_axis: usize) -> [f64; 3] {
        let bx = self.support_box();
        let dim = bx.len();
        let mut out = [0.0_f64; 3];
        let orders: Vec<Vec<usize>> = multi_indices(dim, 2);
        for point in grid_points(&bx, per_axis.max(2)) {
            for beta in &orders {
                let m: usize = beta.iter().sum();
                let v = self.derivative(beta, &point).abs();
                out[m] = out[m].max(v);
            }
        }
        out
    }
}

/// All `β ∈ ℕ^dim` with `|β| ≤ max`.
fn multi_indices(dim: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0; dim]];
    for _ in 0..max {
        let mut next = Vec::new();
        for b in &out {
            for i in 0..dim {
                let mut c = b.clone();
                c[i] += 1;
                if !out.contains(&c) && !next.contains(&c) {
                    next.push(c);
                }
            }
        }
        out.extend(next);
    }
    out
}

fn grid_points(bx: &[(f64, f64)], per_axis: usize) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for &(lo, hi) in bx {
        let axis: Vec<f64> = (0..per_axis)
            .map(|j| lo + (hi - lo) * j as f64 / (per_axis - 1) as f64)
            .collect();
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    points
}

/// `2^x`, bit-exact when `x` is an integer.
pub fn pow2(x: f64) -> f64 {
    if x.fract() == 0.0 && x.abs() < 1000.0 {
        2f64.powi(x as i32)
    } else {
        x.exp2()
    }
}

/// `⌊log₂ x⌋` for positive finite `x`, read off the binary exponent.
pub fn floor_log2(x: f64) -> i32 {
    assert!(x > 0.0 && x.is_finite(), "floor_log2 needs a positive finite argument");
    let (m, e) = if x.is_normal() { (x, 0) } else { (x * 2f64.powi(64), -64) };
    ((m.to_bits() >> 52) & 0x7ff) as i32 - 1023 + e
}

/// Finite dyadic sequence `{ς_k}` on `ℝ^N̄` with a ν̄-parameter scheme.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicKernelSeq {
    scheme: ExponentScheme,
    support: f64,
    entries: BTreeMap<Vec<u32>, KernelEntry>,
}

impl DyadicKernelSeq {
    pub fn new(scheme: ExponentScheme, support: f64) -> Result<Self> {
        if !(support > 0.0 && support.is_finite()) {
            return Err(Error::invalid(format!("support radius {support} must be positive")));
        }
        Ok(Self {
            scheme,
            support,
            entries: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, k: Vec<u32>, entry: KernelEntry) -> Result<()> {
        if k.len() != self.scheme.nu() {
            return Err(Error::DimensionMismatch {
                expected: self.scheme.nu(),
                got: k.len(),
            });
        }
        if let Some(t) = entry.terms.iter().find(|t| t.bump.dim() != self.scheme.n()) {
            return Err(Error::DimensionMismatch {
                expected: self.scheme.n(),
                got: t.bump.dim(),
            });
        }
        self.entries.insert(k, entry);
        Ok(())
    }

    pub fn scheme(&self) -> &ExponentScheme {
        &self.scheme
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<u32>, &KernelEntry)> {
        self.entries.iter()
    }

    pub fn get(&self, k: &[u32]) -> Option<&KernelEntry> {
        self.entries.get(k)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries with `|k|₁ ≤ m`.
    pub fn truncate(&self, m: u32) -> Self {
        Self {
            scheme: self.scheme.clone(),
            support: self.support,
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| k.iter().sum::<u32>() <= m)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Replaces every `ς_k` by `ς_k^{(δ)}`.
    pub fn dilate_entries(&self, delta: &[f64]) -> Result<Self> {
        let factors = self.scheme.coordinate_factors(delta)?;
        let max = factors.iter().fold(0.0_f64, |m, f| m.max(1.0 / f));
        Ok(Self {
            scheme: self.scheme.clone(),
            support: self.support * max.max(1.0),
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (k.clone(), v.dilate_coordinates(&factors)))
                .collect(),
        })
    }

    /// Every `ς_k^{(2^k)}`, in key order.
    pub fn dilated_terms(&self) -> Result<Vec<KernelEntry>> {
        self.entries
            .iter()
            .map(|(k, v)| {
                let delta: Vec<f64> = k.iter().map(|&x| pow2(f64::from(x))).collect();
                v.dilate(&delta, &self.scheme)
            })
            .collect()
    }

    /// `Σ_k ς_k^{(2^k)}(t)`.
    pub fn eval(&self, t: &[f64]) -> Result<f64> {
        Ok(self.dilated_terms()?.iter().map(|e| e.eval(t)).sum())
    }

    /// Serializes to the kernel JSON format.
    pub fn to_json(&self) -> Result<String> {
        let file = KernelFile {
            n: self.scheme.n(),
            nu: self.scheme.nu(),
            e: self.scheme.clone(),
            a: self.support,
            entries: self
                .entries
                .iter()
                .map(|(k, v)| EntryFile {
                    k: k.clone(),
                    terms: v.terms.clone(),
                    dirac: false,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).map_err(|e| Error::invalid(e.to_string()))
    }

    /// Parses the kernel JSON format.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: KernelFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            column: e.column(),
            message: format!("line {}: {e}", e.line()),
        })?;
        if file.e.n() != file.n || file.e.nu() != file.nu {
            return Err(Error::invalid(format!(
                "header declares n={}, nu={} but e is {}×{}",
                file.n,
                file.nu,
                file.e.n(),
                file.e.nu()
            )));
        }
        let mut seq = Self::new(file.e, file.a)?;
        for entry in file.entries {
            if entry.dirac {
                return Err(dirac_error());
            }
            seq.insert(entry.k, KernelEntry::new(entry.terms)?)?;
        }
        Ok(seq)
    }
}

fn dirac_error() -> Error {
    Error::Unrepresentable(
        "the Dirac mass has no finite dyadic representation by smooth bumps; \
         only finite sums of bump products are supported"
            .into(),
    )
}

/// The Dirac mass at the origin as a kernel: always rejected.
pub fn dirac_delta(_scheme: &ExponentScheme) -> Result<DyadicKernelSeq> {
    Err(dirac_error())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelFile {
    n: usize,
    nu: usize,
    e: ExponentScheme,
    a: f64,
    entries: Vec<EntryFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    k: Vec<u32>,
    #[serde(default)]
    terms: Vec<KernelTerm>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    dirac: bool,
}

/// A slice integral above tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceViolation {
    pub k: Vec<u32>,
    /// Zero-based parameter index.
    pub mu: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CancellationReport {
    pub passed: bool,
    pub max_slice: f64,
    pub checked: usize,
    pub violations: Vec<SliceViolation>,
    /// Keys of entries reaching outside the ball of radius `a`.
    pub support_violations: Vec<Vec<u32>>,
}

/// `∫ f` with a fixed Gauss–Legendre rule on each atom's own support.
fn atom_aligned_integral(f: &BumpCombination) -> f64 {
    let rule = gauss_legendre(SLICE_ORDER);
    f.atoms()
        .iter()
        .map(|a| {
            let half = 0.5 * a.r;
            let mid = a.x + half;
            half * rule.iter().map(|&(x, w)| w * a.eval(mid + half * x)).sum::<f64>()
        })
        .sum()
}

/// Checks `∫ ς_k dt^μ ≡ 0` for every `k` and every `μ` with `k_μ ≠ 0`.
///
/// The slice integral is a function of the remaining variables; it is
/// evaluated on a uniform grid over the entry's support box.
pub fn verify_cancellation(seq: &DyadicKernelSeq) -> CancellationReport {
    let scheme = seq.scheme();
    let mut report = CancellationReport {
        passed: true,
        max_slice: 0.0,
        checked: 0,
        violations: Vec::new(),
        support_violations: Vec::new(),
    };
    for (k, entry) in seq.entries() {
        if entry.support_radius() > seq.support() * (1.0 + 1e-12) {
            report.support_violations.push(k.clone());
        }
        let integrals: Vec<Vec<f64>> = entry
            .terms()
            .iter()
            .map(|t| t.bump.factors().iter().map(atom_aligned_integral).collect())
            .collect();
        for (mu, _) in k.iter().enumerate().filter(|(_, &km)| km != 0) {
            let slice_vars = scheme.coordinates_of(mu);
            let rest: Vec<usize> = (0..scheme.n()).filter(|i| !slice_vars.contains(i)).collect();
            let bx = entry.support_box();
            let rest_box: Vec<(f64, f64)> = rest.iter().map(|&i| bx[i]).collect();
            let per_axis = if rest.is_empty() {
                1
            } else {
                (20_000f64.powf(1.0 / rest.len() as f64) as usize).clamp(5, 201)
            };
            let points = if rest.is_empty() { vec![Vec::new()] } else { grid_points(&rest_box, per_axis) };
            let mut worst = 0.0_f64;
            for p in &points {
                let value: f64 = entry
                    .terms()
                    .iter()
                    .zip(&integrals)
                    .map(|(term, ints)| {
                        let sliced: f64 = slice_vars.iter().map(|&i| ints[i]).product();
                        let free: f64 = rest
                            .iter()
                            .zip(p)
                            .map(|(&i, &x)| term.bump.factors()[i].eval(x))
                            .product();
                        term.coef * sliced * free
                    })
                    .sum();
                worst = worst.max(value.abs());
            }
            report.checked += 1;
            report.max_slice = report.max_slice.max(worst);
            if worst >= CANCELLATION_TOL {
                report.violations.push(SliceViolation { k: k.clone(), mu, value: worst });
            }
        }
    }
    report.passed = report.violations.is_empty() && report.support_violations.is_empty();
    report
}

/// `±a·2^{−j/4}` for `j = 0..=levels` on both axes.
pub fn default_product_samples(a: f64, levels: u32) -> Vec<[f64; 2]> {
    let axis: Vec<f64> = (0..=levels)
        .flat_map(|j| {
            let v = a * (-(f64::from(j)) / 4.0).exp2();
            [v, -v]
        })
        .collect();
    axis.iter().flat_map(|&s| axis.iter().map(move |&t| [s, t])).collect()
}

/// `sup |∂_s^{α₁}∂_t^{α₂} K(s,t)| · |s|^{1+α₁} |t|^{1+α₂}` over the samples,
/// for `K = Σ_{|k|₁ ≤ m} ς_k^{(2^k)}` on the two-parameter product scheme.
pub fn sample_product_kernel_bounds(
    seq: &DyadicKernelSeq,
    m: u32,
    alpha: [usize; 2],
    samples: &[[f64; 2]],
) -> Result<f64> {
    if *seq.scheme() != ExponentScheme::product(2) {
        return Err(Error::Unsupported(
            "product-kernel bounds need the two-parameter product scheme".into(),
        ));
    }
    if let Some(p) = samples.iter().find(|p| p[0] == 0.0 || p[1] == 0.0) {
        return Err(Error::invalid(format!("sample ({}, {}) lies on an axis", p[0], p[1])));
    }
    let terms = seq.truncate(m).dilated_terms()?;
    let weight = |p: &[f64; 2]| p[0].abs().powi(1 + alpha[0] as i32) * p[1].abs().powi(1 + alpha[1] as i32);
    Ok(samples
        .iter()
        .map(|p| {
            let v: f64 = terms.iter().map(|e| e.derivative(&alpha, p)).sum();
            v.abs() * weight(p)
        })
        .fold(0.0, f64::max))
}

/// `σ = τ̃ ∘ 2^{kn}` componentwise.
pub fn regroup_scale(tilde_tau: &[f64], n: &[f64], k: u32) -> Vec<f64> {
    tilde_tau
        .iter()
        .zip(n)
        .map(|(&t, &d)| t * pow2(f64::from(k) * d))
        .collect()
}

/// Rewrites `Σ_{k=0}^{M} ς^{(τ̃ 2^{kn})}` as `Σ_i ς̃_i^{(2^i)}` with
/// `ς̃_i = Σ_{k: i = ⌊log₂ τ̃ + kn⌋} ς^{(τ̃ 2^{kn} 2^{−i})}`.
///
/// Every inner scale lies in `[1,2)^ν̄`. The identity is exact whenever the
/// scales are products of powers of two.
pub fn regroup_to_dyadic(
    atom: &KernelEntry,
    scheme: &ExponentScheme,
    tilde_tau: &[f64],
    n: &[f64],
    m: u32,
    support: f64,
) -> Result<DyadicKernelSeq> {
    let nu = scheme.nu();
    if tilde_tau.len() != nu || n.len() != nu {
        return Err(Error::DimensionMismatch {
            expected: nu,
            got: if tilde_tau.len() != nu { tilde_tau.len() } else { n.len() },
        });
    }
    if tilde_tau.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::invalid("tilde_tau must be positive and finite"));
    }
    let mut seq = DyadicKernelSeq::new(scheme.clone(), support)?;
    let mut grouped: BTreeMap<Vec<u32>, KernelEntry> = BTreeMap::new();
    for k in 0..=m {
        let sigma = regroup_scale(tilde_tau, n, k);
        if sigma.iter().any(|s| !(*s > 1.0)) {
            return Err(Error::precondition(format!(
                "log2(tilde_tau) + k·n must be positive for every k ≤ {m}; fails at k = {k}"
            )));
        }
        let i: Vec<u32> = sigma.iter().map(|&s| floor_log2(s) as u32).collect();
        let inner: Vec<f64> = sigma.iter().zip(&i).map(|(&s, &e)| s * pow2(-f64::from(e))).collect();
        let piece = atom.dilate(&inner, scheme)?;
        let slot = grouped.entry(i).or_default();
        slot.terms.extend(piece.terms);
    }
    for (i, entry) in grouped {
        seq.insert(i, entry)?;
    }
    Ok(seq)
}

/// One signed term of a telescoped entry: `sign · ς_source^{(2^{shift} σ)}`
/// placed in entry `l`, where `shift = −p − m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TelescopeTerm {
    pub l: Vec<u32>,
    pub source: Vec<u32>,
    pub shift: Vec<i64>,
    pub sign: i8,
}

/// Index bookkeeping of the telescoping decomposition.
///
/// For every `l` with `|(l−m)₊| ≤ M` and every `p ∈ {0,1}^ν̄` with `p ≤ l`
/// and `p ≤ (m+1−l)₊`, emits `(−1)^{|p|} ς_{(l−m)₊}^{(2^{−p−m} σ)}` in `φ_l`.
pub fn telescope_terms(m: &[u32], max: u32) -> Vec<TelescopeTerm> {
    let nu = m.len();
    let mut ls: Vec<Vec<u32>> = vec![Vec::new()];
    for &mm in m {
        ls = ls
            .into_iter()
            .flat_map(|l| {
                (0..=mm + max).map(move |x| {
                    let mut v = l.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    let mut out = Vec::new();
    for l in ls {
        let source: Vec<u32> = l.iter().zip(m).map(|(&a, &b)| a.saturating_sub(b)).collect();
        if source.iter().sum::<u32>() > max {
            continue;
        }
        for mask in 0..(1u32 << nu) {
            let p: Vec<u32> = (0..nu).map(|mu| (mask >> mu) & 1).collect();
            let admissible = (0..nu).all(|mu| p[mu] <= l[mu] && p[mu] <= (m[mu] + 1).saturating_sub(l[mu]));
            if !admissible {
                continue;
            }
            let shift: Vec<i64> = (0..nu).map(|mu| -i64::from(p[mu]) - i64::from(m[mu])).collect();
            let sign = if p.iter().sum::<u32>() % 2 == 0 { 1 } else { -1 };
            out.push(TelescopeTerm { l: l.clone(), source: source.clone(), shift, sign });
        }
    }
    out
}

/// Builds `{φ_l}` with `Σ_l φ_l^{(2^l)} = Σ_{k ≥ m, |k−m| ≤ M} ς_{k−m}^{(2^{k−m} σ)}`.
///
/// Requires `2^{m+1} ≤ σ < 2^{m+2}` componentwise; the inner scales
/// `2^{−p−m}σ` then lie in `[1,4)`.
pub fn telescope_decompose<F>(
    family: F,
    scheme: &ExponentScheme,
    m: &[u32],
    sigma: &[f64],
    max: u32,
    support: f64,
) -> Result<DyadicKernelSeq>
where
    F: Fn(&[u32]) -> Result<KernelEntry>,
{
    let nu = scheme.nu();
    if m.len() != nu || sigma.len() != nu {
        return Err(Error::DimensionMismatch {
            expected: nu,
            got: if m.len() != nu { m.len() } else { sigma.len() },
        });
    }
    for mu in 0..nu {
        let lo = pow2(f64::from(m[mu]) + 1.0);
        if !(lo <= sigma[mu] && sigma[mu] < 2.0 * lo) {
            return Err(Error::precondition(format!(
                "scale {} is not bracketed by 2^{} and 2^{}",
                sigma[mu],
                m[mu] + 1,
                m[mu] + 2
            )));
        }
    }
    let mut grouped: BTreeMap<Vec<u32>, KernelEntry> = BTreeMap::new();
    let mut cache: BTreeMap<Vec<u32>, KernelEntry> = BTreeMap::new();
    for term in telescope_terms(m, max) {
        if !cache.contains_key(&term.source) {
            cache.insert(term.source.clone(), family(&term.source)?);
        }
        let base = &cache[&term.source];
        let delta: Vec<f64> = sigma
            .iter()
            .zip(&term.shift)
            .map(|(&s, &e)| s * pow2(e as f64))
            .collect();
        let piece = base.dilate(&delta, scheme)?.scale(f64::from(term.sign));
        grouped.entry(term.l).or_default().terms.extend(piece.terms);
    }
    let mut seq = DyadicKernelSeq::new(scheme.clone(), support)?;
    for (l, entry) in grouped {
        seq.insert(l, entry)?;
    }
    Ok(seq)
}
