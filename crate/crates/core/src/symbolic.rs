//! Exact multivariate polynomials, polynomial vector fields, Lie brackets and
//! the closed-form `W` / `X̂` expansions for the two supported curve families.
//!
//! Families:
//! * translation on the line, `γ_t(x) = x − p(t)`;
//! * the Heisenberg group in exponential coordinates,
//!   `γ_s(ξ) = exp(P₁(s)X + P₂(s)Y + P₃(s)T)·ξ`.
//!
//! Heisenberg fields are stored by their constant coordinates in the ordered
//! basis `{X, Y, T}` with `[X, Y] = T` and `T` central.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::dilations::{degree, Degree, ExponentScheme, MultiIndex};
use crate::{Error, Rational, Result};

fn rat(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Exact polynomial with rational coefficients in `nvars` variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<MultiIndex, Rational>,
}

/// How variables are named when printing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarStyle {
    /// `s` for the first variable, `t` for the second.
    Plain,
    /// A letter followed by a one-based index, e.g. `x1, x2, x3`.
    Indexed(char),
}

impl VarStyle {
    fn default_for(nvars: usize) -> Self {
        if nvars <= 2 {
            VarStyle::Plain
        } else {
            VarStyle::Indexed('t')
        }
    }

    fn name(&self, i: usize) -> String {
        match self {
            VarStyle::Plain => ["s", "t"].get(i).map_or_else(|| format!("t{}", i + 1), |v| v.to_string()),
            VarStyle::Indexed(c) => format!("{c}{}", i + 1),
        }
    }
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        Self::monomial(MultiIndex::zero(nvars), c)
    }

    /// The single variable `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        Self::monomial(MultiIndex::unit(nvars, i), Rational::one())
    }

    pub fn monomial(alpha: MultiIndex, c: Rational) -> Self {
        let mut p = Self::zero(alpha.len());
        p.add_term(alpha, c);
        p
    }

    /// Builds from `(exponents, coefficient)` pairs; repeated exponents add up.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (MultiIndex, Rational)>,
    {
        let mut p = Self::zero(nvars);
        for (alpha, c) in terms {
            if alpha.len() != nvars {
                return Err(Error::DimensionMismatch {
                    expected: nvars,
                    got: alpha.len(),
                });
            }
            p.add_term(alpha, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, alpha: MultiIndex, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(alpha) {
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if slot.get().is_zero() {
                    slot.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&MultiIndex, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> Rational {
        self.terms.get(alpha).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coeff(&MultiIndex::zero(self.nvars))
    }

    /// Constant polynomials, including zero.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 if self.terms.keys().next().is_some_and(MultiIndex::is_zero) => {
                Some(self.constant_term())
            }
            _ => None,
        }
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(MultiIndex::total).max()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        Self {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    /// `∂p/∂x_i`.
    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (alpha, c) in &self.terms {
            let a = alpha.0[i];
            if a == 0 {
                continue;
            }
            let mut beta = alpha.clone();
            beta.0[i] -= 1;
            out.add_term(beta, c * rat(a.into()));
        }
        out
    }

    /// `Σ |α| c_α t^α`, i.e. `d/dε p(εt)` at `ε = 1`.
    pub fn euler(&self) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(k, v)| (k.clone(), v * rat(k.total().into())))
                .collect(),
        }
    }

    /// `p(λ₁x₁, …, λ_n x_n)`.
    pub fn scale_variables(&self, lambda: &[Rational]) -> Result<Self> {
        if lambda.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                got: lambda.len(),
            });
        }
        let mut out = Self::zero(self.nvars);
        for (alpha, c) in &self.terms {
            let mut v = c.clone();
            for (a, l) in alpha.0.iter().zip(lambda) {
                v *= num_traits::pow(l.clone(), *a as usize);
            }
            out.add_term(alpha.clone(), v);
        }
        Ok(out)
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(alpha, c)| {
                let mono: f64 = alpha
                    .0
                    .iter()
                    .zip(x)
                    .map(|(&a, &xi)| xi.powi(a as i32))
                    .product();
                c.to_f64().unwrap_or(f64::NAN) * mono
            })
            .sum()
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.terms
            .iter()
            .map(|(alpha, c)| {
                alpha
                    .0
                    .iter()
                    .zip(x)
                    .fold(c.clone(), |acc, (&a, xi)| acc * num_traits::pow(xi.clone(), a as usize))
            })
            .fold(Rational::zero(), |acc, v| acc + v)
    }

    /// Parses the polynomial grammar (`3*s^2*t - 1/2*s*t^3`).
    ///
    /// Variables are `s, t` (first and second variable) or indexed names
    /// `s1…`, `t1…`, `x1…` using a single letter throughout.
    pub fn parse(text: &str, nvars: usize) -> Result<Self> {
        let (p, max_var) = Parser::new(text)?.parse(nvars)?;
        if let Some((idx, column)) = max_var {
            if idx >= nvars {
                return Err(Error::Parse {
                    column,
                    message: format!("variable index {} exceeds the {nvars} available", idx + 1),
                });
            }
        }
        Ok(p)
    }

    /// Parses and infers the variable count: two for plain `s, t`, else the
    /// largest index used.
    pub fn parse_auto(text: &str) -> Result<Self> {
        let parser = Parser::new(text)?;
        let n = parser.inferred_nvars();
        Self::parse(text, n)
    }

    pub fn display_with(&self, style: VarStyle) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, (alpha, c)) in self.terms.iter().rev().enumerate() {
            let negative = c.is_negative();
            match (i, negative) {
                (0, true) => out.push('-'),
                (0, false) => {}
                (_, true) => out.push_str(" - "),
                (_, false) => out.push_str(" + "),
            }
            let abs = c.abs();
            let mut factors: Vec<String> = Vec::new();
            if !abs.is_one() || alpha.is_zero() {
                factors.push(abs.to_string());
            }
            for (j, &a) in alpha.0.iter().enumerate() {
                match a {
                    0 => {}
                    1 => factors.push(style.name(j)),
                    _ => factors.push(format!("{}^{a}", style.name(j))),
                }
            }
            out.push_str(&factors.join("*"));
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(VarStyle::default_for(self.nvars)))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "polynomial variable counts differ");
        let mut out = self.clone();
        for (k, v) in &rhs.terms {
            out.add_term(k.clone(), v.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(k, v)| (k.clone(), -v)).collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars, "polynomial variable counts differ");
        let mut out = Polynomial::zero(self.nvars);
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                out.add_term(a + b, ca * cb);
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Var { letter: char, index: Option<usize> },
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end_column: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        let chars: Vec<char> = text.chars().collect();
        let mut toks = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let single = match c {
                '+' => Some(Tok::Plus),
                '-' => Some(Tok::Minus),
                '*' => Some(Tok::Star),
                '/' => Some(Tok::Slash),
                '^' => Some(Tok::Caret),
                _ => None,
            };
            if let Some(tok) = single {
                toks.push((tok, column));
                i += 1;
            } else if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let n: BigInt = digits.parse().map_err(|_| Error::Parse {
                    column,
                    message: format!("bad integer literal '{digits}'"),
                })?;
                toks.push((Tok::Num(n), column));
            } else if matches!(c, 's' | 't' | 'x') {
                i += 1;
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let index = if start == i {
                    None
                } else {
                    let digits: String = chars[start..i].iter().collect();
                    let k: usize = digits.parse().map_err(|_| Error::Parse {
                        column,
                        message: format!("bad variable index '{digits}'"),
                    })?;
                    if k == 0 {
                        return Err(Error::Parse {
                            column,
                            message: "variable indices start at 1".into(),
                        });
                    }
                    Some(k - 1)
                };
                if i < chars.len() && chars[i].is_alphabetic() {
                    return Err(Error::Parse {
                        column,
                        message: "unknown identifier".into(),
                    });
                }
                toks.push((Tok::Var { letter: c, index }, column));
            } else {
                return Err(Error::Parse {
                    column,
                    message: format!("unexpected character '{c}'"),
                });
            }
        }
        Ok(Self {
            toks,
            pos: 0,
            end_column: chars.len() + 1,
        })
    }

    fn inferred_nvars(&self) -> usize {
        let mut n = 0;
        for (tok, _) in &self.toks {
            if let Tok::Var { index, .. } = tok {
                n = n.max(index.map_or(2, |k| k + 1));
            }
        }
        n.max(1)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_column, |t| t.1)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            column: self.column(),
            message: message.into(),
        })
    }

    /// Returns the polynomial and the largest variable index with its column.
    fn parse(mut self, nvars: usize) -> Result<(Polynomial, Option<(usize, usize)>)> {
        let mut poly = Polynomial::zero(nvars);
        let mut style: Option<(char, bool)> = None;
        let mut max_var: Option<(usize, usize)> = None;
        if self.toks.is_empty() {
            return self.err("empty polynomial");
        }
        let mut first = true;
        loop {
            let negative = match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    false
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    true
                }
                None => break,
                _ if first => false,
                _ => return self.err("expected '+' or '-'"),
            };
            first = false;
            let (alpha, c) = self.term(nvars, &mut style, &mut max_var)?;
            poly.add_term(alpha, if negative { -c } else { c });
        }
        Ok((poly, max_var))
    }

    fn term(
        &mut self,
        nvars: usize,
        style: &mut Option<(char, bool)>,
        max_var: &mut Option<(usize, usize)>,
    ) -> Result<(MultiIndex, Rational)> {
        let mut coeff = Rational::one();
        let mut alpha = vec![0u32; nvars];
        loop {
            let column = self.column();
            match self.peek().cloned() {
                Some(Tok::Num(n)) => {
                    self.pos += 1;
                    let mut value = Rational::from_integer(n);
                    if self.peek() == Some(&Tok::Slash) {
                        self.pos += 1;
                        match self.peek().cloned() {
                            Some(Tok::Num(d)) if !d.is_zero() => {
                                self.pos += 1;
                                value /= Rational::from_integer(d);
                            }
                            Some(Tok::Num(_)) => return self.err("zero denominator"),
                            _ => return self.err("expected a denominator"),
                        }
                    }
                    if self.peek() == Some(&Tok::Caret) {
                        return self.err("powers of numeric literals are not supported");
                    }
                    coeff *= value;
                }
                Some(Tok::Var { letter, index }) => {
                    self.pos += 1;
                    let key = if index.is_some() { (letter, true) } else { (' ', false) };
                    match style {
                        None => *style = Some(key),
                        Some(s) if *s != key => {
                            return Err(Error::Parse {
                                column,
                                message: "mixed variable naming styles".into(),
                            })
                        }
                        _ => {}
                    }
                    let idx = match (letter, index) {
                        (_, Some(k)) => k,
                        ('s', None) => 0,
                        ('t', None) => 1,
                        _ => {
                            return Err(Error::Parse {
                                column,
                                message: format!("variable '{letter}' needs an index"),
                            })
                        }
                    };
                    if max_var.is_none_or(|(m, _)| idx > m) {
                        *max_var = Some((idx, column));
                    }
                    let mut power = 1u32;
                    if self.peek() == Some(&Tok::Caret) {
                        self.pos += 1;
                        match self.peek().cloned() {
                            Some(Tok::Num(k)) => {
                                self.pos += 1;
                                power = k.to_u32().filter(|&k| k <= 1000).ok_or(Error::Parse {
                                    column: self.column(),
                                    message: "exponent too large".into(),
                                })?;
                            }
                            _ => return self.err("expected an integer exponent"),
                        }
                    }
                    if idx >= nvars {
                        return Err(Error::Parse {
                            column,
                            message: format!("variable index {} exceeds the {nvars} available", idx + 1),
                        });
                    }
                    alpha[idx] += power;
                }
                _ => return self.err("expected a number or a variable"),
            }
            match self.peek() {
                Some(Tok::Star) => self.pos += 1,
                Some(Tok::Plus | Tok::Minus) | None => break,
                _ => return self.err("expected '*', '+', '-' or end of input"),
            }
        }
        Ok((MultiIndex(alpha), coeff))
    }
}

/// Vector field `Σ_i a_i(x) ∂_{x_i}` on `ℝ^n` with polynomial coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolyVectorField {
    coeffs: Vec<Polynomial>,
}

impl PolyVectorField {
    pub fn new(coeffs: Vec<Polynomial>) -> Result<Self> {
        let n = coeffs.len();
        if let Some(bad) = coeffs.iter().find(|c| c.nvars() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.nvars(),
            });
        }
        Ok(Self { coeffs })
    }

    pub fn zero(n: usize) -> Self {
        Self {
            coeffs: vec![Polynomial::zero(n); n],
        }
    }

    /// `∂_{x_i}`.
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut f = Self::zero(n);
        f.coeffs[i] = Polynomial::constant(n, Rational::one());
        f
    }

    /// Constant field with the given components.
    pub fn constant(components: &[Rational]) -> Self {
        let n = components.len();
        Self {
            coeffs: components
                .iter()
                .map(|c| Polynomial::constant(n, c.clone()))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[Polynomial] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Polynomial::is_zero)
    }

    /// Components when every coefficient is constant.
    pub fn as_constant(&self) -> Option<Vec<Rational>> {
        self.coeffs.iter().map(Polynomial::as_constant).collect()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|p| p.scale(c)).collect(),
        }
    }

    /// `A(p) = Σ_j A_j ∂_j p`.
    pub fn apply(&self, p: &Polynomial) -> Polynomial {
        self.coeffs
            .iter()
            .enumerate()
            .fold(Polynomial::zero(self.dim()), |acc, (j, a)| {
                &acc + &(a * &p.derivative(j))
            })
    }

    pub fn display_with(&self, style: VarStyle) -> String {
        let parts: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| {
                let d = match style {
                    VarStyle::Plain => format!("∂{}", style.name(i)),
                    VarStyle::Indexed(l) => format!("∂{l}{}", i + 1),
                };
                match c.as_constant() {
                    Some(v) if v.is_one() => d,
                    Some(v) if v == -Rational::one() => format!("-{d}"),
                    Some(v) => format!("{v}*{d}"),
                    None => format!("({})*{d}", c.display_with(style)),
                }
            })
            .collect();
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

impl fmt::Display for PolyVectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(VarStyle::Indexed('x')))
    }
}

impl Add for &PolyVectorField {
    type Output = PolyVectorField;

    fn add(self, rhs: &PolyVectorField) -> PolyVectorField {
        PolyVectorField {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &PolyVectorField {
    type Output = PolyVectorField;

    fn sub(self, rhs: &PolyVectorField) -> PolyVectorField {
        PolyVectorField {
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &PolyVectorField {
    type Output = PolyVectorField;

    fn neg(self) -> PolyVectorField {
        PolyVectorField {
            coeffs: self.coeffs.iter().map(|a| -a).collect(),
        }
    }
}

/// `[A, B]_i = Σ_j A_j ∂_j B_i − B_j ∂_j A_i`.
pub fn lie_bracket(a: &PolyVectorField, b: &PolyVectorField) -> Result<PolyVectorField> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let coeffs = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(ai, bi)| &a.apply(bi) - &b.apply(ai))
        .collect();
    Ok(PolyVectorField { coeffs })
}

/// Bracket of `aX + bY + cT` and `a′X + b′Y + c′T`: `(ab′ − a′b)T`.
pub fn heisenberg_bracket(u: &[Rational; 3], v: &[Rational; 3]) -> [Rational; 3] {
    [
        Rational::zero(),
        Rational::zero(),
        &u[0] * &v[1] - &v[0] * &u[1],
    ]
}

/// Realizes `aX + bY + cT` as a left-invariant field on `ℝ³` for the group
/// law `(x,y,t)·(x′,y′,t′) = (x+x′, y+y′, t+t′+½(xy′−x′y))`:
/// `X = ∂x − ½y∂t`, `Y = ∂y + ½x∂t`, `T = ∂t`.
pub fn heisenberg_realization(v: &[Rational; 3]) -> PolyVectorField {
    let half = Rational::new(1.into(), 2.into());
    let x = Polynomial::var(3, 0);
    let y = Polynomial::var(3, 1);
    let t_coeff = &(&Polynomial::constant(3, v[2].clone()) - &y.scale(&(&half * &v[0])))
        + &x.scale(&(&half * &v[1]));
    PolyVectorField {
        coeffs: vec![
            Polynomial::constant(3, v[0].clone()),
            Polynomial::constant(3, v[1].clone()),
            t_coeff,
        ],
    }
}

/// Curve family together with its dilation scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GammaSpec {
    /// `γ_t(x) = x − p(t)` on `ℝ`.
    Translation { p: Polynomial, scheme: ExponentScheme },
    /// `γ_s(ξ) = exp(P₁X + P₂Y + P₃T)·ξ` on the Heisenberg group.
    Heisenberg {
        p: [Polynomial; 3],
        scheme: ExponentScheme,
    },
}

impl GammaSpec {
    pub fn translation(p: Polynomial, scheme: ExponentScheme) -> Result<Self> {
        let spec = GammaSpec::Translation { p, scheme };
        spec.validate()?;
        Ok(spec)
    }

    pub fn heisenberg(p: [Polynomial; 3], scheme: ExponentScheme) -> Result<Self> {
        let spec = GammaSpec::Heisenberg { p, scheme };
        spec.validate()?;
        Ok(spec)
    }

    pub fn scheme(&self) -> &ExponentScheme {
        match self {
            GammaSpec::Translation { scheme, .. } | GammaSpec::Heisenberg { scheme, .. } => scheme,
        }
    }

    pub fn polynomials(&self) -> Vec<&Polynomial> {
        match self {
            GammaSpec::Translation { p, .. } => vec![p],
            GammaSpec::Heisenberg { p, .. } => p.iter().collect(),
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            GammaSpec::Translation { .. } => "translation",
            GammaSpec::Heisenberg { .. } => "heisenberg",
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.scheme().n();
        for (i, p) in self.polynomials().into_iter().enumerate() {
            if p.nvars() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: p.nvars(),
                });
            }
            if !p.constant_term().is_zero() {
                return Err(Error::invalid(format!(
                    "polynomial {} has a nonzero constant term",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// Basis in which the fields of a [`WExpansion`] are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    /// Coordinate fields `∂_{x_i}` on `ℝⁿ`.
    Coordinates,
    /// Constant coordinates in the ordered basis `{X, Y, T}`.
    Heisenberg,
}

/// One term `t^α X_α` of an expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionTerm {
    pub field: PolyVectorField,
    pub degree: Degree,
}

/// Finite expansion `Σ_α t^α X_α`; only nonzero fields are stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WExpansion {
    scheme: ExponentScheme,
    basis: Basis,
    entries: BTreeMap<MultiIndex, ExpansionTerm>,
}

impl WExpansion {
    pub fn new(scheme: ExponentScheme, basis: Basis) -> Self {
        Self {
            scheme,
            basis,
            entries: BTreeMap::new(),
        }
    }

    /// Inserts (or replaces) the field at `alpha`; zero fields remove it.
    pub fn insert(&mut self, alpha: MultiIndex, field: PolyVectorField) -> Result<()> {
        if alpha.is_zero() {
            return Err(Error::invalid("expansion index must be nonzero"));
        }
        let degree = degree(&alpha, &self.scheme)?;
        if field.is_zero() {
            self.entries.remove(&alpha);
        } else {
            self.entries.insert(alpha, ExpansionTerm { field, degree });
        }
        Ok(())
    }

    pub fn scheme(&self) -> &ExponentScheme {
        &self.scheme
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, alpha: &MultiIndex) -> Option<&ExpansionTerm> {
        self.entries.get(alpha)
    }

    /// Entries in ascending graded-lex order of `α`.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (&MultiIndex, &ExpansionTerm)> {
        self.entries.iter()
    }

    /// Heisenberg coordinates `(a, b, c)` of the field at `alpha`.
    pub fn heisenberg_coords(&self, alpha: &MultiIndex) -> Option<[Rational; 3]> {
        let term = self.entries.get(alpha)?;
        heisenberg_coords(&term.field)
    }

    /// Human-readable field in the expansion's basis.
    pub fn field_string(&self, field: &PolyVectorField) -> String {
        match self.basis {
            Basis::Coordinates if field.dim() == 1 => field
                .display_with(VarStyle::Indexed('x'))
                .replace("∂x1", "∂x")
                .replace("x1", "x"),
            Basis::Coordinates => field.to_string(),
            Basis::Heisenberg => {
                heisenberg_coords(field).map_or_else(|| field.to_string(), |c| heisenberg_string(&c))
            }
        }
    }
}

fn heisenberg_coords(field: &PolyVectorField) -> Option<[Rational; 3]> {
    let c = field.as_constant()?;
    let [a, b, t]: [Rational; 3] = c.try_into().ok()?;
    Some([a, b, t])
}

/// `aX + bY + cT` in canonical text form.
pub fn heisenberg_string(c: &[Rational; 3]) -> String {
    let mut out = String::new();
    for (v, name) in c.iter().zip(["X", "Y", "T"]) {
        if v.is_zero() {
            continue;
        }
        let neg = v.is_negative();
        if out.is_empty() {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let a = v.abs();
        if !a.is_one() {
            out.push_str(&format!("{a}*"));
        }
        out.push_str(name);
    }
    if out.is_empty() {
        "0".into()
    } else {
        out
    }
}

fn heisenberg_field(c: [Rational; 3]) -> PolyVectorField {
    PolyVectorField::constant(&c)
}

/// `W = −Σ |α| c_α t^α ∂_x` for `γ_t(x) = x − p(t)`.
pub fn w_from_translation_gamma(spec: &GammaSpec) -> Result<WExpansion> {
    let GammaSpec::Translation { p, scheme } = spec else {
        return Err(Error::Unsupported(
            "translation W requested for a non-translation family".into(),
        ));
    };
    spec.validate()?;
    let mut w = WExpansion::new(scheme.clone(), Basis::Coordinates);
    for (alpha, c) in p.euler().terms() {
        w.insert(alpha.clone(), PolyVectorField::constant(&[-c]))?;
    }
    Ok(w)
}

/// `W = Ṗ₁X + Ṗ₂Y + (Ṗ₃ − ½(Ṗ₁P₂ − Ṗ₂P₁))T` with `Ṗ = Σ |α| c_α s^α`.
pub fn w_from_heisenberg_gamma(spec: &GammaSpec) -> Result<WExpansion> {
    let GammaSpec::Heisenberg { p, scheme } = spec else {
        return Err(Error::Unsupported(
            "Heisenberg W requested for a non-Heisenberg family".into(),
        ));
    };
    spec.validate()?;
    let dot: Vec<Polynomial> = p.iter().map(Polynomial::euler).collect();
    let half = Rational::new(1.into(), 2.into());
    let commutator = &(&dot[0] * &p[1]) - &(&dot[1] * &p[0]);
    let central = &dot[2] - &commutator.scale(&half);
    let comps = [&dot[0], &dot[1], &central];
    let support: BTreeSet<&MultiIndex> = comps.iter().flat_map(|q| q.terms().map(|(k, _)| k)).collect();
    let mut w = WExpansion::new(scheme.clone(), Basis::Heisenberg);
    for alpha in support {
        let coords = [comps[0].coeff(alpha), comps[1].coeff(alpha), comps[2].coeff(alpha)];
        w.insert(alpha.clone(), heisenberg_field(coords))?;
    }
    Ok(w)
}

/// `W` for either supported family.
pub fn w_expansion(spec: &GammaSpec) -> Result<WExpansion> {
    match spec {
        GammaSpec::Translation { .. } => w_from_translation_gamma(spec),
        GammaSpec::Heisenberg { .. } => w_from_heisenberg_gamma(spec),
    }
}

/// The fields `X̂_α` of the exponential representation, read off directly.
pub fn xhat_expansion(spec: &GammaSpec) -> Result<WExpansion> {
    spec.validate()?;
    match spec {
        GammaSpec::Translation { p, scheme } => {
            let mut w = WExpansion::new(scheme.clone(), Basis::Coordinates);
            for (alpha, c) in p.terms() {
                w.insert(alpha.clone(), PolyVectorField::constant(&[-c]))?;
            }
            Ok(w)
        }
        GammaSpec::Heisenberg { p, scheme } => {
            let support: BTreeSet<&MultiIndex> = p.iter().flat_map(|q| q.terms().map(|(k, _)| k)).collect();
            let mut w = WExpansion::new(scheme.clone(), Basis::Heisenberg);
            for alpha in support {
                let coords = [p[0].coeff(alpha), p[1].coeff(alpha), p[2].coeff(alpha)];
                w.insert(alpha.clone(), heisenberg_field(coords))?;
            }
            Ok(w)
        }
    }
}

/// Per-index comparison of `X_α` against `|α| X̂_α + V_α`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaylorEntry {
    pub alpha: MultiIndex,
    pub x_alpha: PolyVectorField,
    pub xhat_alpha: PolyVectorField,
    pub v_alpha: PolyVectorField,
    pub residual: PolyVectorField,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaylorReport {
    pub passed: bool,
    pub entries: Vec<TaylorEntry>,
}

/// Checks `X_α = |α| X̂_α + V_α` for every index in either expansion.
///
/// `V_α` vanishes for the translation family; on the Heisenberg group it is
/// `−½ Σ_{β+β′=α} |β| [X̂_β, X̂_β′]`.
pub fn verify_taylor_relation(spec: &GammaSpec) -> Result<TaylorReport> {
    let w = w_expansion(spec)?;
    let xhat = xhat_expansion(spec)?;
    let dim = match spec {
        GammaSpec::Translation { .. } => 1,
        GammaSpec::Heisenberg { .. } => 3,
    };
    let mut correction: BTreeMap<MultiIndex, PolyVectorField> = BTreeMap::new();
    if let GammaSpec::Heisenberg { .. } = spec {
        let half = Rational::new(1.into(), 2.into());
        let terms: Vec<(&MultiIndex, [Rational; 3])> = xhat
            .iter()
            .filter_map(|(k, t)| heisenberg_coords(&t.field).map(|c| (k, c)))
            .collect();
        for (b1, u) in &terms {
            for (b2, v) in &terms {
                let br = heisenberg_bracket(u, v);
                let weight = -(&half * rat(b1.total().into()));
                let contrib = heisenberg_field(br).scale(&weight);
                let key = *b1 + *b2;
                let slot = correction.entry(key).or_insert_with(|| PolyVectorField::zero(3));
                *slot = &*slot + &contrib;
            }
        }
    }
    let keys: BTreeSet<MultiIndex> = w
        .iter()
        .map(|(k, _)| k.clone())
        .chain(xhat.iter().map(|(k, _)| k.clone()))
        .chain(correction.keys().cloned())
        .collect();
    let zero = PolyVectorField::zero(dim);
    let mut entries = Vec::with_capacity(keys.len());
    let mut passed = true;
    for alpha in keys {
        let x_alpha = w.get(&alpha).map_or_else(|| zero.clone(), |t| t.field.clone());
        let xhat_alpha = xhat.get(&alpha).map_or_else(|| zero.clone(), |t| t.field.clone());
        let v_alpha = correction.get(&alpha).cloned().unwrap_or_else(|| zero.clone());
        let predicted = &xhat_alpha.scale(&rat(alpha.total().into())) + &v_alpha;
        let residual = &x_alpha - &predicted;
        passed &= residual.is_zero();
        entries.push(TaylorEntry {
            alpha,
            x_alpha,
            xhat_alpha,
            v_alpha,
            residual,
        });
    }
    Ok(TaylorReport { passed, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn poly(text: &str) -> Polynomial {
        Polynomial::parse(text, 2).unwrap()
    }

    fn field(texts: &[&str]) -> PolyVectorField {
        let n = texts.len();
        PolyVectorField::new(texts.iter().map(|t| Polynomial::parse(t, n).unwrap()).collect()).unwrap()
    }

    #[test]
    fn parse_and_print() {
        let p = poly("3*s^2*t - 1/2*s*t^3");
        assert_eq!(p.len(), 2);
        assert_eq!(p.coeff(&MultiIndex(vec![2, 1])), q(3, 1));
        assert_eq!(p.coeff(&MultiIndex(vec![1, 3])), q(-1, 2));
        assert_eq!(p.to_string(), "-1/2*s*t^3 + 3*s^2*t");
        assert_eq!(poly(" s^3 +t^3+ s*t ").to_string(), "s^3 + t^3 + s*t");
        assert_eq!(poly("s*t - s*t").to_string(), "0");
        assert_eq!(poly("-s").to_string(), "-s");
        assert_eq!(poly("2*3*s*s").to_string(), "6*s^2");
        let indexed = Polynomial::parse("s1*s2 + 2/4*s1", 2).unwrap();
        assert_eq!(indexed, poly("s*t + 1/2*s"));
        assert_eq!(Polynomial::parse_auto("x3 - x1").unwrap().nvars(), 3);
    }

    #[test]
    fn parse_errors_have_columns() {
        let cases = [
            ("s**t", 3),
            ("s + ", 5),
            ("s + t1", 5),
            ("3*s^", 5),
            ("1/0*s", 3),
            ("s # t", 3),
            ("s t", 3),
            ("s3", 1),
            ("", 1),
        ];
        for (text, column) in cases {
            match Polynomial::parse(text, 2) {
                Err(Error::Parse { column: c, .. }) => assert_eq!(c, column, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn arithmetic() {
        let a = poly("s + t");
        let b = poly("s - t");
        assert_eq!(&a * &b, poly("s^2 - t^2"));
        assert_eq!(&a + &b, poly("2*s"));
        assert_eq!(poly("s^3*t").derivative(0), poly("3*s^2*t"));
        assert_eq!(poly("s^3 + t^3 + s*t").euler(), poly("3*s^3 + 3*t^3 + 2*s*t"));
        assert_eq!(
            poly("s^2*t + t").scale_variables(&[q(2, 1), q(-1, 3)]).unwrap(),
            poly("-4/3*s^2*t - 1/3*t")
        );
        assert!((poly("s^2 - 1/2*t").eval_f64(&[3.0, 2.0]) - 8.0).abs() < 1e-15);
        assert_eq!(poly("s^2 - 1/2*t").eval(&[q(1, 2), q(1, 1)]), q(-1, 4));
    }

    #[test]
    fn bracket_examples() {
        let d1 = PolyVectorField::coordinate(2, 0);
        let x1d2 = field(&["0", "x1"]);
        assert_eq!(lie_bracket(&d1, &x1d2).unwrap(), PolyVectorField::coordinate(2, 1));
        let a = field(&["x2", "0"]);
        let b = field(&["0", "x1"]);
        assert_eq!(lie_bracket(&a, &b).unwrap(), field(&["-x1", "x2"]));
        assert!(lie_bracket(&a, &PolyVectorField::zero(3)).is_err());
    }

    #[test]
    fn realization_matches_structure_constants() {
        let x = heisenberg_realization(&[q(1, 1), q(0, 1), q(0, 1)]);
        let y = heisenberg_realization(&[q(0, 1), q(1, 1), q(0, 1)]);
        let t = heisenberg_realization(&[q(0, 1), q(0, 1), q(1, 1)]);
        assert_eq!(lie_bracket(&x, &y).unwrap(), t);
        assert!(lie_bracket(&x, &t).unwrap().is_zero());
        assert!(lie_bracket(&y, &t).unwrap().is_zero());
    }

    fn product_scheme() -> ExponentScheme {
        ExponentScheme::product(2)
    }

    #[test]
    fn translation_w_examples() {
        let spec = GammaSpec::translation(poly("-s*t"), product_scheme()).unwrap();
        let w = w_from_translation_gamma(&spec).unwrap();
        assert_eq!(w.len(), 1);
        let term = w.get(&MultiIndex(vec![1, 1])).unwrap();
        assert_eq!(term.field, PolyVectorField::constant(&[q(2, 1)]));
        assert_eq!(w.field_string(&term.field), "2*∂x");
        let id = GammaSpec::translation(Polynomial::zero(2), product_scheme()).unwrap();
        assert!(w_from_translation_gamma(&id).unwrap().is_empty());
        let know = GammaSpec::translation(poly("s^3 + t^3 + s*t"), product_scheme()).unwrap();
        let w = w_from_translation_gamma(&know).unwrap();
        assert_eq!(w.get(&MultiIndex(vec![3, 0])).unwrap().field, PolyVectorField::constant(&[q(-3, 1)]));
        assert_eq!(w.get(&MultiIndex(vec![1, 1])).unwrap().field, PolyVectorField::constant(&[q(-2, 1)]));
        assert!(GammaSpec::translation(poly("1 + s"), product_scheme()).is_err());
    }

    fn heis(p1: &str, p2: &str, p3: &str) -> GammaSpec {
        GammaSpec::heisenberg([poly(p1), poly(p2), poly(p3)], product_scheme()).unwrap()
    }

    #[test]
    fn heisenberg_w_examples() {
        let w = w_from_heisenberg_gamma(&heis("s", "t", "0")).unwrap();
        assert_eq!(w.heisenberg_coords(&MultiIndex(vec![1, 0])).unwrap(), [q(1, 1), q(0, 1), q(0, 1)]);
        assert_eq!(w.heisenberg_coords(&MultiIndex(vec![0, 1])).unwrap(), [q(0, 1), q(1, 1), q(0, 1)]);
        assert_eq!(w.len(), 2);

        let w = w_from_heisenberg_gamma(&heis("0", "0", "s*t")).unwrap();
        assert_eq!(w.heisenberg_coords(&MultiIndex(vec![1, 1])).unwrap(), [q(0, 1), q(0, 1), q(2, 1)]);

        // The product P₁P₂ is symmetric, so the correction cancels and only
        // 2·s·t survives in the central direction.
        let w = w_from_heisenberg_gamma(&heis("s", "t", "s*t")).unwrap();
        assert_eq!(w.heisenberg_coords(&MultiIndex(vec![1, 1])).unwrap(), [q(0, 1), q(0, 1), q(2, 1)]);

        // Unequal homogeneities leave a visible correction: (s, t², 0) gives
        // −½(1·t²·s − 2t²·s) = ½ s t².
        let w = w_from_heisenberg_gamma(&heis("s", "t^2", "0")).unwrap();
        assert_eq!(w.heisenberg_coords(&MultiIndex(vec![1, 2])).unwrap(), [q(0, 1), q(0, 1), q(1, 2)]);
        assert_eq!(w.field_string(&w.get(&MultiIndex(vec![0, 2])).unwrap().field), "2*Y");
    }

    /// Finite-difference oracle from the group law: `d/dε γ_{εs}(γ_s^{-1}(0))` at `ε = 1`.
    fn group_law_velocity(p: &[Polynomial; 3], s: [f64; 2]) -> [f64; 3] {
        fn mul(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
            [a[0] + b[0], a[1] + b[1], a[2] + b[2] + 0.5 * (a[0] * b[1] - b[0] * a[1])]
        }
        let at = |eps: f64| -> [f64; 3] {
            let e = [eps * s[0], eps * s[1]];
            let g = [p[0].eval_f64(&e), p[1].eval_f64(&e), p[2].eval_f64(&e)];
            let g1 = [p[0].eval_f64(&s), p[1].eval_f64(&s), p[2].eval_f64(&s)];
            mul(g, [-g1[0], -g1[1], -g1[2]])
        };
        let h = 1e-5;
        let (plus, minus) = (at(1.0 + h), at(1.0 - h));
        [0, 1, 2].map(|i| (plus[i] - minus[i]) / (2.0 * h))
    }

    #[test]
    fn heisenberg_w_matches_group_law() {
        let specs = [
            heis("s", "t^2", "0"),
            heis("s + 2*t^2", "s^2*t - t", "s*t^3"),
            heis("1/3*s^3", "t - s*t", "s^2"),
        ];
        for spec in &specs {
            let GammaSpec::Heisenberg { p, .. } = spec else { unreachable!() };
            let w = w_from_heisenberg_gamma(spec).unwrap();
            for s in [[0.3, -0.7], [1.1, 0.4]] {
                let fd = group_law_velocity(p, s);
                let mut closed = [0.0; 3];
                for (alpha, term) in w.iter() {
                    let mono = s[0].powi(alpha.0[0] as i32) * s[1].powi(alpha.0[1] as i32);
                    let c = heisenberg_coords(&term.field).unwrap();
                    for i in 0..3 {
                        closed[i] += c[i].to_f64().unwrap() * mono;
                    }
                }
                for i in 0..3 {
                    assert!((fd[i] - closed[i]).abs() < 1e-7, "{spec:?} {i}: {fd:?} vs {closed:?}");
                }
            }
        }
    }

    #[test]
    fn xhat_examples() {
        let spec = GammaSpec::translation(poly("s*t"), product_scheme()).unwrap();
        let x = xhat_expansion(&spec).unwrap();
        assert_eq!(x.get(&MultiIndex(vec![1, 1])).unwrap().field, PolyVectorField::constant(&[q(-1, 1)]));
        let id = GammaSpec::translation(Polynomial::zero(2), product_scheme()).unwrap();
        assert!(xhat_expansion(&id).unwrap().is_empty());
        let x = xhat_expansion(&heis("s", "t", "s*t")).unwrap();
        assert_eq!(x.len(), 3);
        let s = |a: u32, b: u32| x.field_string(&x.get(&MultiIndex(vec![a, b])).unwrap().field);
        assert_eq!((s(1, 0), s(0, 1), s(1, 1)), ("X".into(), "Y".into(), "T".into()));
    }

    #[test]
    fn taylor_relation_examples() {
        let spec = GammaSpec::translation(poly("s^3 + t^3 + s*t"), product_scheme()).unwrap();
        assert!(verify_taylor_relation(&spec).unwrap().passed);
        let report = verify_taylor_relation(&heis("s", "t", "s*t")).unwrap();
        assert!(report.passed);
        let e = report.entries.iter().find(|e| e.alpha == MultiIndex(vec![1, 1])).unwrap();
        assert_eq!(heisenberg_coords(&e.x_alpha).unwrap(), [q(0, 1), q(0, 1), q(2, 1)]);
        assert!(e.v_alpha.is_zero());
        let report = verify_taylor_relation(&heis("s", "t^2", "0")).unwrap();
        assert!(report.passed);
        let e = report.entries.iter().find(|e| e.alpha == MultiIndex(vec![1, 2])).unwrap();
        assert_eq!(heisenberg_coords(&e.v_alpha).unwrap(), [q(0, 1), q(0, 1), q(1, 2)]);
    }

    fn arb_poly(n: usize, max_deg: u32) -> impl Strategy<Value = Polynomial> {
        proptest::collection::vec(
            (proptest::collection::vec(0..=max_deg, n), -4i64..=4, 1i64..=3),
            0..5,
        )
        .prop_map(move |terms| {
            Polynomial::from_terms(n, terms.into_iter().map(|(a, num, den)| (MultiIndex(a), q(num, den))))
                .unwrap()
        })
    }

    fn arb_field(n: usize) -> impl Strategy<Value = PolyVectorField> {
        proptest::collection::vec(arb_poly(n, 2), n).prop_map(|c| PolyVectorField::new(c).unwrap())
    }

    proptest! {
        #[test]
        fn print_parse_round_trip(p in arb_poly(2, 4)) {
            prop_assert_eq!(Polynomial::parse(&p.to_string(), 2).unwrap(), p.clone());
            let indexed = p.display_with(VarStyle::Indexed('x'));
            prop_assert_eq!(Polynomial::parse(&indexed, 2).unwrap(), p);
        }

        #[test]
        fn bracket_antisymmetric(a in arb_field(3), b in arb_field(3)) {
            let ab = lie_bracket(&a, &b).unwrap();
            let ba = lie_bracket(&b, &a).unwrap();
            prop_assert_eq!(ab, -&ba);
            prop_assert!(lie_bracket(&a, &a).unwrap().is_zero());
        }

        #[test]
        fn bracket_jacobi(a in arb_field(2), b in arb_field(2), c in arb_field(2)) {
            let t1 = lie_bracket(&a, &lie_bracket(&b, &c).unwrap()).unwrap();
            let t2 = lie_bracket(&b, &lie_bracket(&c, &a).unwrap()).unwrap();
            let t3 = lie_bracket(&c, &lie_bracket(&a, &b).unwrap()).unwrap();
            prop_assert!((&(&t1 + &t2) + &t3).is_zero());
        }

        #[test]
        fn heisenberg_bracket_agrees_with_realization(
            u in proptest::array::uniform3(-3i64..=3),
            v in proptest::array::uniform3(-3i64..=3),
        ) {
            let u = u.map(|x| q(x, 1));
            let v = v.map(|x| q(x, 1));
            let direct = heisenberg_realization(&heisenberg_bracket(&u, &v));
            let realized = lie_bracket(&heisenberg_realization(&u), &heisenberg_realization(&v)).unwrap();
            prop_assert_eq!(direct, realized);
        }

        #[test]
        fn taylor_relation_holds(
            p1 in arb_poly(2, 3), p2 in arb_poly(2, 3), p3 in arb_poly(2, 3),
        ) {
            let strip = |p: Polynomial| &p - &Polynomial::constant(2, p.constant_term());
            let spec = GammaSpec::heisenberg([strip(p1), strip(p2), strip(p3)], product_scheme()).unwrap();
            let report = verify_taylor_relation(&spec).unwrap();
            prop_assert!(report.passed);
            let w = w_from_heisenberg_gamma(&spec).unwrap();
            prop_assert!(w.iter().all(|(k, t)| !k.is_zero() && !t.field.is_zero()));
        }
    }
}
