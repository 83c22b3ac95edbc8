//! Exponent schemes, multi-index degrees and multi-parameter dilations.
//!
//! A scheme `e = {e_1, …, e_N} ⊂ [0,∞)^ν` dilates `t ∈ ℝ^N` by
//! `δt = (δ^{e_1} t_1, …, δ^{e_N} t_N)` with `δ^{e_i} = ∏_μ δ_μ^{e_i^μ}`.
//! Degrees of multi-indices are computed exactly; dilations act on floats.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Rational, Result};

/// Rows `e_i ∈ [0,∞)^ν`, one per coordinate of `t ∈ ℝ^N`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExponentScheme {
    rows: Vec<Vec<Rational>>,
    nu: usize,
}

impl ExponentScheme {
    /// Every row and every column must contain a nonzero entry, and all
    /// entries must be nonnegative.
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("exponent scheme needs at least one row"));
        }
        let nu = rows[0].len();
        if nu == 0 {
            return Err(Error::invalid("exponent scheme needs at least one parameter"));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != nu {
                return Err(Error::DimensionMismatch {
                    expected: nu,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| v.is_negative()) {
                return Err(Error::invalid(format!("row {} has a negative entry", i + 1)));
            }
            if row.iter().all(|v| v.is_zero()) {
                return Err(Error::invalid(format!("row {} is identically zero", i + 1)));
            }
        }
        for mu in 0..nu {
            if rows.iter().all(|row| row[mu].is_zero()) {
                return Err(Error::invalid(format!(
                    "parameter {} has no nonzero exponent",
                    mu + 1
                )));
            }
        }
        Ok(Self { rows, nu })
    }

    /// Integer rows, for the common case.
    pub fn from_integers(rows: &[&[i64]]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|row| row.iter().map(|&v| Rational::from_integer(v.into())).collect())
                .collect(),
        )
    }

    /// The product scheme `e_i = unit vector i` on `ℝ^n` (ν = n).
    pub fn product(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Rational::from_integer(i64::from(i == j).into()))
                    .collect()
            })
            .collect();
        Self { rows, nu: n }
    }

    /// Ambient dimension N.
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Number of parameters ν.
    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.rows[i]
    }

    /// Coordinates `i` with `e_i^μ ≠ 0`, i.e. the variables making up `t^μ`.
    pub fn coordinates_of(&self, mu: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.rows[i][mu].is_zero()).collect()
    }

    /// `δ^{e_i}` for every coordinate `i`, with `0^0 = 1`.
    pub fn coordinate_factors(&self, delta: &[f64]) -> Result<Vec<f64>> {
        check_len(self.nu, delta.len())?;
        if let Some(d) = delta.iter().find(|d| !(**d >= 0.0)) {
            return Err(Error::invalid(format!("dilation component {d} is negative")));
        }
        Ok(self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(delta)
                    .map(|(e, &d)| rational_pow(d, e))
                    .product()
            })
            .collect())
    }
}

/// A rational written either as an integer or as a `"p/q"` string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalRepr {
    Int(i64),
    Text(String),
}

impl RationalRepr {
    pub fn to_rational(&self) -> Result<Rational> {
        match self {
            RationalRepr::Int(v) => Ok(Rational::from_integer((*v).into())),
            RationalRepr::Text(s) => parse_rational(s),
        }
    }

    pub fn from_rational(v: &Rational) -> Self {
        match (v.is_integer(), v.to_integer().to_i64()) {
            (true, Some(i)) => RationalRepr::Int(i),
            _ => RationalRepr::Text(v.to_string()),
        }
    }
}

/// Parses `"3"`, `"-3"` or `"3/4"` (surrounding whitespace allowed).
pub fn parse_rational(text: &str) -> Result<Rational> {
    let bad = || Error::invalid(format!("'{text}' is not a rational number"));
    let (num, den) = match text.trim().split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (text.trim(), "1"),
    };
    let num: num_bigint::BigInt = num.parse().map_err(|_| bad())?;
    let den: num_bigint::BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(num, den))
}

impl Serialize for ExponentScheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<RationalRepr>> = self
            .rows
            .iter()
            .map(|row| row.iter().map(RationalRepr::from_rational).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExponentScheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<RationalRepr>> = Vec::deserialize(d)?;
        let rows = rows
            .iter()
            .map(|row| row.iter().map(RationalRepr::to_rational).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        ExponentScheme::new(rows).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for ExponentScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "(")?;
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{v}")?;
            }
            write!(f, ")")?;
        }
        write!(f, "}}")
    }
}

/// `base^e` for a nonnegative base and rational exponent, with `0^0 = 1`.
fn rational_pow(base: f64, e: &Rational) -> f64 {
    if e.is_zero() {
        return 1.0;
    }
    if e.is_integer() {
        if let Some(k) = e.to_integer().to_i32() {
            return base.powi(k);
        }
    }
    base.powf(e.to_f64().unwrap_or(f64::NAN))
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Multi-index `α ∈ ℕ^N`. Ordered graded-lexicographically: total degree
/// first, then lexicographically with the first variable most significant,
/// so `(3,0) > (0,3) > (1,1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn new(components: Vec<u32>) -> Self {
        Self(components)
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        Self(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|α| = α_1 + … + α_N`.
    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&a| a == 0)
    }

    pub fn components(&self) -> &[u32] {
        &self.0
    }

    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total()
            .cmp(&other.total())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &MultiIndex {
    type Output = MultiIndex;

    fn add(self, rhs: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// A ν-parameter degree in `[0,∞)^ν`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Degree(pub Vec<Rational>);

impl Degree {
    pub fn components(&self) -> &[Rational] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn nonzero_count(&self) -> usize {
        self.0.iter().filter(|v| !v.is_zero()).count()
    }
}

impl Add for &Degree {
    type Output = Degree;

    fn add(self, rhs: &Degree) -> Degree {
        Degree(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// `deg(α) = α_1 e_1 + ⋯ + α_N e_N`.
pub fn degree(alpha: &MultiIndex, scheme: &ExponentScheme) -> Result<Degree> {
    check_len(scheme.n(), alpha.len())?;
    let mut out = vec![Rational::zero(); scheme.nu()];
    for (a, row) in alpha.0.iter().zip(scheme.rows()) {
        if *a == 0 {
            continue;
        }
        let a = Rational::from_integer((*a).into());
        for (acc, e) in out.iter_mut().zip(row) {
            *acc += &a * e;
        }
    }
    Ok(Degree(out))
}

/// A degree is pure when exactly one component is nonzero.
pub fn is_pure(d: &Degree) -> Result<bool> {
    match d.nonzero_count() {
        0 => Err(Error::invalid("pure/nonpure is undefined for the zero degree")),
        k => Ok(k == 1),
    }
}

/// `δt = (δ^{e_1} t_1, …, δ^{e_N} t_N)`.
pub fn dilate_point(delta: &[f64], t: &[f64], scheme: &ExponentScheme) -> Result<Vec<f64>> {
    check_len(scheme.n(), t.len())?;
    let factors = scheme.coordinate_factors(delta)?;
    Ok(t.iter().zip(&factors).map(|(x, f)| x * f).collect())
}

/// `ς^{(δ)}(t) = δ^{e_1+⋯+e_N} ς(δt)`; preserves the total integral.
pub fn scale_function<F>(
    f: F,
    delta: &[f64],
    scheme: &ExponentScheme,
) -> Result<impl Fn(&[f64]) -> f64>
where
    F: Fn(&[f64]) -> f64,
{
    if let Some(d) = delta.iter().find(|d| !(**d > 0.0)) {
        return Err(Error::invalid(format!(
            "function dilation needs positive components, got {d}"
        )));
    }
    let factors = scheme.coordinate_factors(delta)?;
    let jacobian: f64 = factors.iter().product();
    Ok(move |t: &[f64]| {
        let scaled: Vec<f64> = t.iter().zip(&factors).map(|(x, s)| x * s).collect();
        jacobian * f(&scaled)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn deg(v: &[i64]) -> Degree {
        Degree(v.iter().map(|&x| q(x, 1)).collect())
    }

    #[test]
    fn degree_examples() {
        let id = ExponentScheme::product(2);
        assert_eq!(degree(&MultiIndex(vec![2, 3]), &id).unwrap(), deg(&[2, 3]));
        assert_eq!(degree(&MultiIndex(vec![1, 1]), &id).unwrap(), deg(&[1, 1]));
        let e = ExponentScheme::from_integers(&[&[2, 1], &[0, 3]]).unwrap();
        assert_eq!(degree(&MultiIndex(vec![1, 2]), &e).unwrap(), deg(&[2, 7]));
    }

    #[test]
    fn degree_rejects_mismatch() {
        let id = ExponentScheme::product(2);
        assert!(matches!(
            degree(&MultiIndex(vec![1, 2, 3]), &id),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scheme_validation() {
        assert!(ExponentScheme::from_integers(&[&[1, 0], &[0, 0]]).is_err());
        assert!(ExponentScheme::from_integers(&[&[1, 0], &[1, 0]]).is_err());
        assert!(ExponentScheme::from_integers(&[&[1, -1], &[0, 1]]).is_err());
        let half = ExponentScheme::new(vec![vec![q(1, 2), q(0, 1)], vec![q(0, 1), q(3, 2)]]);
        assert!(half.is_ok());
    }

    #[test]
    fn scheme_serde_round_trip() {
        let e = ExponentScheme::new(vec![vec![q(1, 2), q(0, 1)], vec![q(0, 1), q(3, 1)]]).unwrap();
        let text = serde_json::to_string(&e).unwrap();
        assert_eq!(text, r#"[["1/2",0],[0,3]]"#);
        assert_eq!(serde_json::from_str::<ExponentScheme>(&text).unwrap(), e);
        assert!(serde_json::from_str::<ExponentScheme>("[[0,0]]").is_err());
        assert!(parse_rational("1/0").is_err());
        assert_eq!(parse_rational(" -6/4 ").unwrap(), q(-3, 2));
    }

    #[test]
    fn purity() {
        assert!(is_pure(&deg(&[2, 0])).unwrap());
        assert!(!is_pure(&deg(&[1, 1])).unwrap());
        assert!(is_pure(&deg(&[0, 0, 5])).unwrap());
        assert!(is_pure(&deg(&[0, 0])).is_err());
    }

    #[test]
    fn dilate_examples() {
        let id = ExponentScheme::product(2);
        let t = [0.3, -1.7];
        assert_eq!(dilate_point(&[1.0, 1.0], &t, &id).unwrap(), t.to_vec());
        assert_eq!(
            dilate_point(&[2.0, 0.5], &[1.0, 1.0], &id).unwrap(),
            vec![2.0, 0.5]
        );
        let e = ExponentScheme::from_integers(&[&[1, 1]]).unwrap();
        assert_eq!(dilate_point(&[2.0, 3.0], &[1.0], &e).unwrap(), vec![6.0]);
        assert!(dilate_point(&[-1.0, 1.0], &t, &id).is_err());
    }

    #[test]
    fn zero_component_annihilates_exactly_dependent_coordinates() {
        let e = ExponentScheme::from_integers(&[&[1, 0], &[0, 1], &[1, 1]]).unwrap();
        let out = dilate_point(&[0.0, 2.0], &[5.0, 5.0, 5.0], &e).unwrap();
        assert_eq!(out, vec![0.0, 10.0, 0.0]);
    }

    #[test]
    fn scale_identity_and_rejects_nonpositive() {
        let id = ExponentScheme::product(2);
        let f = |t: &[f64]| (t[0] * 3.0).sin() + t[1] * t[1];
        let g = scale_function(f, &[1.0, 1.0], &id).unwrap();
        for t in [[0.1, 0.2], [-3.0, 4.0]] {
            assert_eq!(g(&t), f(&t));
        }
        assert!(scale_function(f, &[0.0, 1.0], &id).is_err());
    }

    fn smooth_bump(t: &[f64]) -> f64 {
        t.iter()
            .map(|&x| {
                if x.abs() < 1.0 {
                    (-1.0 / (1.0 - x * x)).exp() * (1.0 + x)
                } else {
                    0.0
                }
            })
            .product()
    }

    /// Tensor Gauss-Legendre over a box split into `panels` per axis.
    fn box_integral(f: &dyn Fn(&[f64]) -> f64, lo: [f64; 2], hi: [f64; 2]) -> f64 {
        let panels = 40;
        let rule = gauss_legendre(20);
        let mut total = 0.0;
        for i in 0..panels {
            let (a0, a1) = panel(lo[0], hi[0], panels, i);
            for j in 0..panels {
                let (b0, b1) = panel(lo[1], hi[1], panels, j);
                for &(x, wx) in rule.iter() {
                    for &(y, wy) in rule.iter() {
                        let s = 0.5 * (a0 + a1) + 0.5 * (a1 - a0) * x;
                        let t = 0.5 * (b0 + b1) + 0.5 * (b1 - b0) * y;
                        total += 0.25 * (a1 - a0) * (b1 - b0) * wx * wy * f(&[s, t]);
                    }
                }
            }
        }
        total
    }

    fn panel(lo: f64, hi: f64, n: usize, i: usize) -> (f64, f64) {
        let h = (hi - lo) / n as f64;
        (lo + h * i as f64, lo + h * (i + 1) as f64)
    }

    #[test]
    fn scaling_preserves_integral() {
        let id = ExponentScheme::product(2);
        let delta = [32.0, 0.125];
        let scaled = scale_function(smooth_bump, &delta, &id).unwrap();
        let before = box_integral(&smooth_bump, [-1.0, -1.0], [1.0, 1.0]);
        let after = box_integral(&scaled, [-1.0 / 32.0, -8.0], [1.0 / 32.0, 8.0]);
        assert!((before - after).abs() < 1e-10, "{before} vs {after}");
    }

    #[test]
    fn support_moves_with_dilation() {
        let id = ExponentScheme::product(2);
        let scaled = scale_function(smooth_bump, &[4.0, 0.5], &id).unwrap();
        assert_eq!(scaled(&[0.26, 0.0]), 0.0);
        assert!(scaled(&[0.24, 0.0]) > 0.0);
        assert!(scaled(&[0.0, 1.9]) > 0.0);
        assert_eq!(scaled(&[0.0, 2.1]), 0.0);
    }

    proptest! {
        #[test]
        fn degree_is_additive(
            a in proptest::collection::vec(0u32..6, 3),
            b in proptest::collection::vec(0u32..6, 3),
        ) {
            let e = ExponentScheme::new(vec![
                vec![q(1, 1), q(0, 1)],
                vec![q(1, 2), q(2, 1)],
                vec![q(0, 1), q(3, 4)],
            ]).unwrap();
            let (a, b) = (MultiIndex(a), MultiIndex(b));
            let lhs = degree(&(&a + &b), &e).unwrap();
            let rhs = &degree(&a, &e).unwrap() + &degree(&b, &e).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn purity_partitions_nonzero_degrees(v in proptest::collection::vec(0i64..4, 1..5)) {
            let d = deg(&v);
            if d.is_zero() {
                prop_assert!(is_pure(&d).is_err());
            } else {
                let pure = is_pure(&d).unwrap();
                prop_assert_eq!(pure, d.nonzero_count() == 1);
            }
        }

        #[test]
        fn scaling_composes(
            d1 in (-6i32..6, -6i32..6),
            d2 in (-6i32..6, -6i32..6),
            s in -1.0f64..1.0,
            t in -1.0f64..1.0,
        ) {
            let e = ExponentScheme::from_integers(&[&[1, 0], &[1, 2]]).unwrap();
            let delta = [2f64.powi(d1.0), 2f64.powi(d1.1)];
            let delta2 = [2f64.powi(d2.0), 2f64.powi(d2.1)];
            let both = [delta[0] * delta2[0], delta[1] * delta2[1]];
            let once = scale_function(smooth_bump, &delta, &e).unwrap();
            let twice = scale_function(once, &delta2, &e).unwrap();
            let direct = scale_function(smooth_bump, &both, &e).unwrap();
            let (x, y) = (twice(&[s, t]), direct(&[s, t]));
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{} vs {}", x, y);
        }
    }
}
