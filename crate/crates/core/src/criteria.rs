//! Exact boundedness criteria.
//!
//! * On the line (`γ = x − p(s,t)`): every exponent of `p` must lie on or
//!   above the line through `(a,0)` and `(0,b)`, where `a`, `b` are the
//!   smallest pure exponents in each variable.
//! * On the Heisenberg group: for every nonpure `α₀` and every line through
//!   `deg(α₀)` with nonnegative normal, `X̂_{α₀}` must lie in the span of the
//!   bracket closure of the pure fields whose degrees sit on or below it.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::ser::{SerializeStruct, Serializer};
use serde::Serialize;

use crate::dilations::{is_pure, Degree, MultiIndex};
use crate::symbolic::{
    heisenberg_bracket, heisenberg_string, xhat_expansion, Basis, GammaSpec, Polynomial, WExpansion,
};
use crate::{Error, Rational, Result};

/// Decision rendered by a criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Bounded,
    Unbounded,
    Inconclusive,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Bounded => "Bounded",
            Outcome::Unbounded => "Unbounded",
            Outcome::Inconclusive => "Inconclusive",
        })
    }
}

/// A violating index together with the normal of a line it fails against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub alpha0: MultiIndex,
    pub degree: Degree,
    /// Primitive nonnegative integer normal `(b₁, b₂)`.
    pub normal: Vec<Rational>,
}

/// Closure element with its degree and a human-readable provenance label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowerElement {
    /// Constant coordinates (basis `{X,Y,T}` or `∂x`).
    pub coords: Vec<Rational>,
    pub degree: Degree,
    pub label: String,
}

/// One sector of normals, a representative normal, and the spanning subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectorCertificate {
    pub normal: Vec<Rational>,
    pub combination: Vec<(Rational, PowerElement)>,
}

/// Evidence that a nonpure term is dominated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    /// Real-line test: `e/a + f/b ≥ 1` with `x/∞ = 0`.
    Newton {
        alpha0: MultiIndex,
        a: Option<Rational>,
        b: Option<Rational>,
        value: Rational,
    },
    /// Supporting-line test: target spanned in every sector of normals.
    Span {
        alpha0: MultiIndex,
        target: Vec<Rational>,
        sectors: Vec<SectorCertificate>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub witnesses: Vec<Witness>,
    pub certificates: Vec<Certificate>,
    pub diagnostics: Vec<String>,
    basis: Basis,
}

impl Verdict {
    fn new(outcome: Outcome, basis: Basis) -> Self {
        Self {
            outcome,
            witnesses: Vec::new(),
            certificates: Vec::new(),
            diagnostics: Vec::new(),
            basis,
        }
    }

    fn inconclusive(basis: Basis, why: impl Into<String>) -> Self {
        let mut v = Self::new(Outcome::Inconclusive, basis);
        v.diagnostics.push(why.into());
        v
    }

    /// Text form of a constant field in this verdict's basis.
    pub fn field_string(&self, coords: &[Rational]) -> String {
        coords_string(self.basis, coords)
    }
}

fn coords_string(basis: Basis, coords: &[Rational]) -> String {
    match (basis, coords) {
        (Basis::Heisenberg, [a, b, c]) => heisenberg_string(&[a.clone(), b.clone(), c.clone()]),
        _ => {
            let parts: Vec<String> = coords
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| {
                    let d = if coords.len() == 1 { "∂x".to_string() } else { format!("∂x{}", i + 1) };
                    if c.is_one() {
                        d
                    } else {
                        format!("{c}*{d}")
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
}

fn rational_strings(v: &[Rational]) -> Vec<String> {
    v.iter().map(ToString::to_string).collect()
}

struct ElementView<'a>(&'a PowerElement, Basis, Option<&'a Rational>);

impl Serialize for ElementView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Element", 4)?;
        if let Some(c) = self.2 {
            st.serialize_field("coefficient", &c.to_string())?;
        }
        st.serialize_field("field", &coords_string(self.1, &self.0.coords))?;
        st.serialize_field("degree", &rational_strings(self.0.degree.components()))?;
        st.serialize_field("label", &self.0.label)?;
        st.end()
    }
}

struct CertificateView<'a>(&'a Certificate, Basis);

impl Serialize for CertificateView<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let inf = |x: &Option<Rational>| x.as_ref().map_or_else(|| "inf".to_string(), ToString::to_string);
        match self.0 {
            Certificate::Newton { alpha0, a, b, value } => {
                let mut st = s.serialize_struct("Newton", 5)?;
                st.serialize_field("kind", "newton")?;
                st.serialize_field("alpha0", alpha0)?;
                st.serialize_field("a", &inf(a))?;
                st.serialize_field("b", &inf(b))?;
                st.serialize_field("value", &value.to_string())?;
                st.end()
            }
            Certificate::Span { alpha0, target, sectors } => {
                let sectors: Vec<serde_json::Value> = sectors
                    .iter()
                    .map(|sec| {
                        let comb: Vec<serde_json::Value> = sec
                            .combination
                            .iter()
                            .map(|(c, e)| serde_json::to_value(ElementView(e, self.1, Some(c))).unwrap_or_default())
                            .collect();
                        serde_json::json!({ "normal": rational_strings(&sec.normal), "combination": comb })
                    })
                    .collect();
                let mut st = s.serialize_struct("Span", 4)?;
                st.serialize_field("kind", "span")?;
                st.serialize_field("alpha0", alpha0)?;
                st.serialize_field("target", &coords_string(self.1, target))?;
                st.serialize_field("sectors", &sectors)?;
                st.end()
            }
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let witnesses: Vec<serde_json::Value> = self
            .witnesses
            .iter()
            .map(|w| {
                serde_json::json!({
                    "alpha0": w.alpha0,
                    "degree": rational_strings(w.degree.components()),
                    "normal": rational_strings(&w.normal),
                })
            })
            .collect();
        let certificates: Vec<CertificateView> =
            self.certificates.iter().map(|c| CertificateView(c, self.basis)).collect();
        let mut st = s.serialize_struct("Verdict", 4)?;
        st.serialize_field("outcome", &self.outcome)?;
        st.serialize_field("witnesses", &witnesses)?;
        st.serialize_field("certificates", &certificates)?;
        st.serialize_field("diagnostics", &self.diagnostics)?;
        st.end()
    }
}

/// Pure and nonpure fields together with the bracket closure of the pure set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowerSets {
    pub pure: Vec<(MultiIndex, PowerElement)>,
    pub nonpure: Vec<(MultiIndex, PowerElement)>,
    pub closure: Vec<PowerElement>,
}

fn alpha_label(alpha: &MultiIndex) -> String {
    format!("X̂{alpha}")
}

/// Splits constant-field expansions into pure/nonpure entries.
fn split_constant(xhat: &WExpansion) -> Result<Option<PowerSets>> {
    let mut sets = PowerSets {
        pure: Vec::new(),
        nonpure: Vec::new(),
        closure: Vec::new(),
    };
    // Descending graded order, so brackets read [X̂(1,0), X̂(0,1)].
    for (alpha, term) in xhat.iter().rev() {
        let Some(coords) = term.field.as_constant() else {
            return Ok(None);
        };
        let element = PowerElement {
            coords,
            degree: term.degree.clone(),
            label: alpha_label(alpha),
        };
        if is_pure(&term.degree)? {
            sets.pure.push((alpha.clone(), element));
        } else {
            sets.nonpure.push((alpha.clone(), element));
        }
    }
    sets.closure = sets.pure.iter().map(|(_, e)| e.clone()).collect();
    Ok(Some(sets))
}

/// Pure/nonpure split and the closure of the pure set under
/// `[aX+bY+cT, a′X+b′Y+c′T] = (ab′−a′b)T`, degrees adding, zeros dropped.
pub fn pure_closure_heisenberg(xhat: &WExpansion) -> Result<PowerSets> {
    if xhat.basis() != Basis::Heisenberg {
        return Err(Error::invalid("expansion is not expressed in the {X, Y, T} basis"));
    }
    let mut sets = split_constant(xhat)?
        .ok_or_else(|| Error::invalid("Heisenberg expansion with non-constant coordinates"))?;
    let mut frontier = 0;
    while frontier < sets.closure.len() {
        let end = sets.closure.len();
        let mut fresh = Vec::new();
        for i in 0..end {
            for j in (i + 1).max(frontier)..end {
                let (u, v) = (&sets.closure[i], &sets.closure[j]);
                let br = heisenberg_bracket(&to3(&u.coords), &to3(&v.coords));
                if br.iter().all(Zero::is_zero) {
                    continue;
                }
                let element = PowerElement {
                    coords: br.to_vec(),
                    degree: &u.degree + &v.degree,
                    label: format!("[{}, {}]", u.label, v.label),
                };
                let known = sets
                    .closure
                    .iter()
                    .chain(&fresh)
                    .any(|e: &PowerElement| e.coords == element.coords && e.degree == element.degree);
                if !known {
                    fresh.push(element);
                }
            }
        }
        frontier = end;
        sets.closure.extend(fresh);
    }
    Ok(sets)
}

fn to3(v: &[Rational]) -> [Rational; 3] {
    [v[0].clone(), v[1].clone(), v[2].clone()]
}

/// Coefficients `c` with `Σ c_j v_j = target`, supported on a linearly
/// independent subset, or `None` when the target is outside the span.
pub fn solve_span(vectors: &[&[Rational]], target: &[Rational]) -> Option<Vec<Rational>> {
    let dim = target.len();
    let n = vectors.len();
    // Augmented matrix, one row per coordinate.
    let mut m: Vec<Vec<Rational>> = (0..dim)
        .map(|r| {
            let mut row: Vec<Rational> = vectors.iter().map(|v| v[r].clone()).collect();
            row.push(target[r].clone());
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..dim).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(row, p);
        let inv = m[row][col].recip();
        for x in m[row].iter_mut() {
            *x *= &inv;
        }
        for r in 0..dim {
            if r != row && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                for c in 0..=n {
                    let delta = &f * &m[row][c];
                    m[r][c] -= delta;
                }
            }
        }
        pivots.push(col);
        row += 1;
        if row == dim {
            break;
        }
    }
    if (row..dim).any(|r| !m[r][n].is_zero()) {
        return None;
    }
    let mut coeffs = vec![Rational::zero(); n];
    for (r, &col) in pivots.iter().enumerate() {
        coeffs[col] = m[r][n].clone();
    }
    Some(coeffs)
}

fn dot(b: &[Rational], d: &Degree) -> Rational {
    b.iter().zip(d.components()).map(|(x, y)| x * y).fold(Rational::zero(), |a, v| a + v)
}

/// Scales a nonnegative rational vector to a primitive integer vector.
fn primitive(v: &[Rational]) -> Vec<Rational> {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Rational::from_integer(lcm.clone())).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    let g = if g.is_zero() { BigInt::one() } else { g };
    ints.into_iter().map(|x| Rational::from_integer(x / &g)).collect()
}

/// Result of the supporting-line test for one nonpure index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SupportOutcome {
    /// Spanned in every sector.
    Holds(Vec<SectorCertificate>),
    /// Not spanned for the given (primitive) normal.
    Fails { normal: Vec<Rational> },
}

/// Decides whether `target` lies in `span H_π` for every line `π` through
/// `degree0` with nonnegative normal, where `H_π` collects the closure
/// elements on or below `π`.
///
/// Normals are parametrized as `(1−θ, θ)`, `θ ∈ [0,1]`. Membership only
/// changes at `θ` where some `b·(d − d₀)` changes sign, so one rational
/// midpoint per open interval between consecutive critical values decides
/// the whole family; the endpoints contain the sets of their neighbours.
pub fn supporting_line_condition(
    degree0: &Degree,
    target: &[Rational],
    closure: &[PowerElement],
) -> Result<SupportOutcome> {
    if degree0.components().len() != 2 {
        return Err(Error::Unsupported(format!(
            "supporting-line test needs two parameters, got {}",
            degree0.components().len()
        )));
    }
    if is_pure(degree0)? {
        return Err(Error::invalid(format!("degree {degree0} is pure")));
    }
    if target.iter().all(Zero::is_zero) {
        return Err(Error::invalid("target field is zero"));
    }
    let d0 = degree0.components();
    let mut critical = vec![Rational::zero(), Rational::one()];
    for e in closure {
        let d1 = &e.degree.components()[0] - &d0[0];
        let d2 = &e.degree.components()[1] - &d0[1];
        if d1 != d2 {
            let theta = &d1 / (&d1 - &d2);
            if theta.is_positive() && theta < Rational::one() {
                critical.push(theta);
            }
        }
    }
    critical.sort();
    critical.dedup();
    let two = Rational::from_integer(2.into());
    let mut sectors = Vec::new();
    for w in critical.windows(2) {
        let theta = (&w[0] + &w[1]) / &two;
        let normal = vec![Rational::one() - &theta, theta];
        let level = dot(&normal, degree0);
        let h: Vec<&PowerElement> = closure.iter().filter(|e| dot(&normal, &e.degree) <= level).collect();
        let vectors: Vec<&[Rational]> = h.iter().map(|e| e.coords.as_slice()).collect();
        match solve_span(&vectors, target) {
            None => return Ok(SupportOutcome::Fails { normal: primitive(&normal) }),
            Some(coeffs) => {
                let combination = coeffs
                    .into_iter()
                    .zip(h)
                    .filter(|(c, _)| !c.is_zero())
                    .map(|(c, e)| (c, e.clone()))
                    .collect();
                sectors.push(SectorCertificate {
                    normal: primitive(&normal),
                    combination,
                });
            }
        }
    }
    Ok(SupportOutcome::Holds(sectors))
}

fn span_verdict(sets: &PowerSets, nu: usize, basis: Basis) -> Result<Verdict> {
    if nu == 1 || sets.nonpure.is_empty() {
        let mut v = Verdict::new(Outcome::Bounded, basis);
        if nu == 1 {
            v.diagnostics.push("single parameter: every nonzero degree is pure".into());
        } else {
            v.diagnostics.push("no nonpure terms".into());
        }
        return Ok(v);
    }
    if nu > 2 {
        return Ok(Verdict::inconclusive(
            basis,
            format!("supporting-line test is implemented for two parameters, scheme has {nu}"),
        ));
    }
    let mut verdict = Verdict::new(Outcome::Bounded, basis);
    for (alpha0, element) in &sets.nonpure {
        match supporting_line_condition(&element.degree, &element.coords, &sets.closure)? {
            SupportOutcome::Holds(sectors) => verdict.certificates.push(Certificate::Span {
                alpha0: alpha0.clone(),
                target: element.coords.clone(),
                sectors,
            }),
            SupportOutcome::Fails { normal } => {
                verdict.outcome = Outcome::Unbounded;
                verdict.witnesses.push(Witness {
                    alpha0: alpha0.clone(),
                    degree: element.degree.clone(),
                    normal,
                });
            }
        }
    }
    if verdict.outcome == Outcome::Unbounded {
        verdict.certificates.clear();
    }
    Ok(verdict)
}

/// Heisenberg-group criterion for `γ_s(ξ) = exp(P₁X + P₂Y + P₃T)·ξ`.
pub fn heisenberg_verdict(spec: &GammaSpec) -> Result<Verdict> {
    if !matches!(spec, GammaSpec::Heisenberg { .. }) {
        return Err(Error::Unsupported("heisenberg_verdict needs the Heisenberg family".into()));
    }
    let xhat = xhat_expansion(spec)?;
    let sets = pure_closure_heisenberg(&xhat)?;
    span_verdict(&sets, spec.scheme().nu(), Basis::Heisenberg)
}

/// Commutative case: every field is a constant multiple of one field, so all
/// brackets vanish and the supporting-line test runs on the pure set alone.
pub fn scalar_control_verdict(w: &WExpansion) -> Result<Verdict> {
    let basis = w.basis();
    let Some(sets) = split_constant(w)? else {
        return Ok(Verdict::inconclusive(
            basis,
            "non-constant fields: span membership with variable coefficients is not decided",
        ));
    };
    let all: Vec<&PowerElement> = sets.pure.iter().chain(&sets.nonpure).map(|(_, e)| e).collect();
    if let Some(first) = all.first() {
        let base: Vec<&[Rational]> = vec![&first.coords];
        if let Some(e) = all.iter().find(|e| solve_span(&base, &e.coords).is_none()) {
            return Ok(Verdict::inconclusive(
                basis,
                format!("field {} is not parallel to {}", e.label, first.label),
            ));
        }
    }
    span_verdict(&sets, w.scheme().nu(), basis)
}

/// Real-line criterion for `γ_{(s,t)}(x) = x − p(s,t)`.
pub fn real_line_verdict(p: &Polynomial) -> Result<Verdict> {
    if p.nvars() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: p.nvars(),
        });
    }
    if !p.constant_term().is_zero() {
        return Err(Error::invalid("p has a nonzero constant term"));
    }
    let exps: Vec<(u32, u32)> = p.terms().map(|(k, _)| (k.0[0], k.0[1])).collect();
    let a = exps.iter().filter(|e| e.1 == 0).map(|e| e.0).min();
    let b = exps.iter().filter(|e| e.0 == 0).map(|e| e.1).min();
    let ratio = |x: u32, m: Option<u32>| {
        m.map_or_else(Rational::zero, |m| Rational::new(x.into(), m.into()))
    };
    let mut verdict = Verdict::new(Outcome::Bounded, Basis::Coordinates);
    let (ra, rb) = (a.map(|v| Rational::from_integer(v.into())), b.map(|v| Rational::from_integer(v.into())));
    for &(e, f) in exps.iter().filter(|e| e.0 > 0 && e.1 > 0) {
        let value = ratio(e, a) + ratio(f, b);
        let alpha0 = MultiIndex(vec![e, f]);
        if value >= Rational::one() {
            verdict.certificates.push(Certificate::Newton {
                alpha0,
                a: ra.clone(),
                b: rb.clone(),
                value,
            });
        } else {
            verdict.outcome = Outcome::Unbounded;
            let inv = |m: Option<u32>| m.map_or_else(Rational::zero, |m| Rational::new(1.into(), m.into()));
            let normal = match (a, b) {
                (None, None) => vec![Rational::one(), Rational::one()],
                _ => primitive(&[inv(a), inv(b)]),
            };
            let degree = Degree(vec![Rational::from_integer(e.into()), Rational::from_integer(f.into())]);
            verdict.witnesses.push(Witness { alpha0, degree, normal });
        }
    }
    if verdict.outcome == Outcome::Unbounded {
        verdict.certificates.clear();
    }
    if exps.iter().all(|e| e.0 == 0 || e.1 == 0) {
        verdict.diagnostics.push("no nonpure terms".into());
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dilations::ExponentScheme;
    use crate::symbolic::{w_from_translation_gamma, PolyVectorField};
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn poly(text: &str) -> Polynomial {
        Polynomial::parse(text, 2).unwrap()
    }

    fn heis(p1: &str, p2: &str, p3: &str) -> GammaSpec {
        GammaSpec::heisenberg([poly(p1), poly(p2), poly(p3)], ExponentScheme::product(2)).unwrap()
    }

    fn ints(v: &[Rational]) -> Vec<i64> {
        v.iter().map(|x| i64::try_from(x.to_integer()).unwrap()).collect()
    }

    #[test]
    fn real_line_examples() {
        let v = real_line_verdict(&poly("s*t")).unwrap();
        assert_eq!(v.outcome, Outcome::Unbounded);
        assert_eq!(v.witnesses[0].alpha0, MultiIndex(vec![1, 1]));
        assert_eq!(ints(&v.witnesses[0].normal), vec![1, 1]);

        let v = real_line_verdict(&poly("s^3 + t^3 + s*t")).unwrap();
        assert_eq!(v.outcome, Outcome::Unbounded);
        assert_eq!(v.witnesses[0].alpha0, MultiIndex(vec![1, 1]));
        assert_eq!(ints(&v.witnesses[0].normal), vec![1, 1]);

        let v = real_line_verdict(&poly("s + s*t")).unwrap();
        assert_eq!(v.outcome, Outcome::Bounded);
        match &v.certificates[0] {
            Certificate::Newton { a, b, value, .. } => {
                assert_eq!(a, &Some(q(1, 1)));
                assert_eq!(b, &None);
                assert_eq!(value, &q(1, 1));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn real_line_on_the_line_is_bounded() {
        assert_eq!(real_line_verdict(&poly("s^2 + t^2 + s*t")).unwrap().outcome, Outcome::Bounded);
        assert_eq!(real_line_verdict(&poly("s^4 + t^2 + s^2*t")).unwrap().outcome, Outcome::Bounded);
        assert_eq!(real_line_verdict(&poly("s^4 + t^2 + s*t")).unwrap().outcome, Outcome::Unbounded);
        assert!(real_line_verdict(&poly("1 + s")).is_err());
        assert!(real_line_verdict(&Polynomial::parse("x1", 3).unwrap()).is_err());
    }

    #[test]
    fn closure_examples() {
        let xhat = xhat_expansion(&heis("s", "t", "0")).unwrap();
        let sets = pure_closure_heisenberg(&xhat).unwrap();
        assert_eq!(sets.closure.len(), 3);
        let added = &sets.closure[2];
        assert_eq!(added.coords, vec![q(0, 1), q(0, 1), q(1, 1)]);
        assert_eq!(added.degree, Degree(vec![q(1, 1), q(1, 1)]));

        let sets = pure_closure_heisenberg(&xhat_expansion(&heis("0", "0", "s + t")).unwrap()).unwrap();
        assert_eq!(sets.closure.len(), 2);

        let sets = pure_closure_heisenberg(&xhat_expansion(&heis("0", "0", "s^3 + t^3 + s*t")).unwrap()).unwrap();
        assert_eq!((sets.pure.len(), sets.nonpure.len(), sets.closure.len()), (2, 1, 2));
        assert_eq!(sets.nonpure[0].0, MultiIndex(vec![1, 1]));
    }

    fn element(coords: [i64; 3], degree: [i64; 2]) -> PowerElement {
        PowerElement {
            coords: coords.iter().map(|&c| q(c, 1)).collect(),
            degree: Degree(degree.iter().map(|&d| q(d, 1)).collect()),
            label: "e".into(),
        }
    }

    #[test]
    fn supporting_line_examples() {
        let t = [q(0, 1), q(0, 1), q(1, 1)];
        let d11 = Degree(vec![q(1, 1), q(1, 1)]);
        let cubic = [element([0, 0, 1], [3, 0]), element([0, 0, 1], [0, 3])];
        match supporting_line_condition(&d11, &t, &cubic).unwrap() {
            SupportOutcome::Fails { normal } => assert_eq!(ints(&normal), vec![1, 1]),
            other => panic!("{other:?}"),
        }
        let square = [element([0, 0, 1], [2, 0]), element([0, 0, 1], [0, 2])];
        assert!(matches!(
            supporting_line_condition(&d11, &t, &square).unwrap(),
            SupportOutcome::Holds(_)
        ));
        let selfish = [element([0, 0, 1], [1, 1])];
        assert!(matches!(
            supporting_line_condition(&d11, &t, &selfish).unwrap(),
            SupportOutcome::Holds(_)
        ));
        assert!(supporting_line_condition(&Degree(vec![q(2, 1), q(0, 1)]), &t, &selfish).is_err());
    }

    #[test]
    fn heisenberg_examples() {
        let v = heisenberg_verdict(&heis("s", "t", "s*t")).unwrap();
        assert_eq!(v.outcome, Outcome::Bounded);
        let Certificate::Span { sectors, .. } = &v.certificates[0] else { panic!() };
        for sector in sectors {
            assert_eq!(sector.combination.len(), 1);
            let (c, e) = &sector.combination[0];
            assert!(c.is_one());
            assert_eq!(v.field_string(&e.coords), "T");
            assert!(e.label == "[X̂(1,0), X̂(0,1)]" || e.label == "X̂(1,1)");
        }
        assert_eq!(heisenberg_verdict(&heis("0", "0", "s*t")).unwrap().outcome, Outcome::Unbounded);
        assert_eq!(heisenberg_verdict(&heis("0", "0", "s + s*t")).unwrap().outcome, Outcome::Bounded);
        assert_eq!(heisenberg_verdict(&heis("s", "t + s*t", "0")).unwrap().outcome, Outcome::Bounded);
        // The bracket of X at (2,0) and Y at (0,2) sits at (2,2), above the
        // line through (1,1); the scalar analogue s²+t²+st would be bounded.
        let v = heisenberg_verdict(&heis("s^2", "t^2", "s*t")).unwrap();
        assert_eq!(v.outcome, Outcome::Unbounded);
        assert_eq!(ints(&v.witnesses[0].normal), vec![3, 1]);
    }

    fn scalar_w(p: &str) -> WExpansion {
        let spec = GammaSpec::translation(poly(p), ExponentScheme::product(2)).unwrap();
        w_from_translation_gamma(&spec).unwrap()
    }

    #[test]
    fn scalar_control_examples() {
        assert_eq!(scalar_control_verdict(&scalar_w("s^2 + t^2 + s*t")).unwrap().outcome, Outcome::Bounded);
        assert_eq!(scalar_control_verdict(&scalar_w("s^3 + t^3 + s*t")).unwrap().outcome, Outcome::Unbounded);
        assert_eq!(scalar_control_verdict(&scalar_w("s*t")).unwrap().outcome, Outcome::Unbounded);
    }

    #[test]
    fn scalar_control_rejects_non_parallel_and_non_constant() {
        let scheme = ExponentScheme::product(2);
        let mut w = WExpansion::new(scheme.clone(), Basis::Coordinates);
        w.insert(MultiIndex(vec![1, 0]), PolyVectorField::coordinate(2, 0)).unwrap();
        w.insert(MultiIndex(vec![0, 1]), PolyVectorField::coordinate(2, 1)).unwrap();
        assert_eq!(scalar_control_verdict(&w).unwrap().outcome, Outcome::Inconclusive);
        let mut w = WExpansion::new(scheme, Basis::Coordinates);
        let field = PolyVectorField::new(vec![Polynomial::zero(2), Polynomial::var(2, 0)]).unwrap();
        w.insert(MultiIndex(vec![0, 1]), field).unwrap();
        assert_eq!(scalar_control_verdict(&w).unwrap().outcome, Outcome::Inconclusive);
    }

    #[test]
    fn three_parameters_are_inconclusive() {
        let scheme = ExponentScheme::product(3);
        let p = [
            Polynomial::zero(3),
            Polynomial::zero(3),
            Polynomial::parse("t1*t2", 3).unwrap(),
        ];
        let spec = GammaSpec::heisenberg(p, scheme).unwrap();
        assert_eq!(heisenberg_verdict(&spec).unwrap().outcome, Outcome::Inconclusive);
    }

    #[test]
    fn verdict_serializes_rationals_as_strings() {
        let v = real_line_verdict(&poly("s + 1/2*s*t")).unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["outcome"], "bounded");
        assert_eq!(json["certificates"][0]["b"], "inf");
        let v = heisenberg_verdict(&heis("s", "t", "s*t")).unwrap();
        let json = serde_json::to_value(&v).unwrap();
        assert_eq!(json["certificates"][0]["sectors"][0]["combination"][0]["field"], "T");
    }

    /// Independent brute force over 1001 normals `(1000−k, k)`.
    fn brute_force(degree0: &Degree, target: &[Rational], closure: &[PowerElement]) -> bool {
        (0..=1000).all(|k| {
            let b = [q(1000 - k, 1), q(k, 1)];
            let level = dot(&b, degree0);
            let h: Vec<&[Rational]> = closure
                .iter()
                .filter(|e| dot(&b, &e.degree) <= level)
                .map(|e| e.coords.as_slice())
                .collect();
            rank(&h) == rank(&h.iter().copied().chain([target]).collect::<Vec<_>>())
        })
    }

    /// Rank by fraction-free elimination on integer-scaled rows.
    fn rank(vs: &[&[Rational]]) -> usize {
        let mut rows: Vec<Vec<Rational>> = vs.iter().map(|v| v.to_vec()).collect();
        let mut r = 0;
        let cols = rows.first().map_or(0, Vec::len);
        for c in 0..cols {
            if let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) {
                rows.swap(r, p);
                for i in 0..rows.len() {
                    if i != r {
                        let f = &rows[i][c] / &rows[r][c];
                        for j in 0..cols {
                            let d = &f * &rows[r][j];
                            rows[i][j] -= d;
                        }
                    }
                }
                r += 1;
            }
        }
        r
    }

    fn arb_heis_poly() -> impl Strategy<Value = Polynomial> {
        proptest::collection::vec(((0u32..=5, 0u32..=5), -3i64..=3), 0..5).prop_map(|terms| {
            Polynomial::from_terms(
                2,
                terms
                    .into_iter()
                    .filter(|((a, b), _)| a + b > 0 && a + b <= 6)
                    .map(|((a, b), c)| (MultiIndex(vec![a, b]), q(c, 1))),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn heisenberg_central_agrees_with_real_line(p in arb_heis_poly()) {
            let spec = GammaSpec::heisenberg([Polynomial::zero(2), Polynomial::zero(2), p.clone()], ExponentScheme::product(2)).unwrap();
            prop_assert_eq!(heisenberg_verdict(&spec).unwrap().outcome, real_line_verdict(&p).unwrap().outcome);
        }

        #[test]
        fn verdicts_match_brute_force(p1 in arb_heis_poly(), p2 in arb_heis_poly(), p3 in arb_heis_poly()) {
            let spec = GammaSpec::heisenberg([p1, p2, p3], ExponentScheme::product(2)).unwrap();
            let verdict = heisenberg_verdict(&spec).unwrap();
            let sets = pure_closure_heisenberg(&xhat_expansion(&spec).unwrap()).unwrap();
            let all_hold = sets.nonpure.iter().all(|(_, e)| brute_force(&e.degree, &e.coords, &sets.closure));
            prop_assert_eq!(verdict.outcome == Outcome::Bounded, all_hold);
            for w in &verdict.witnesses {
                let (_, e) = sets.nonpure.iter().find(|(a, _)| *a == w.alpha0).unwrap();
                let level = dot(&w.normal, &w.degree);
                let h: Vec<&[Rational]> = sets.closure.iter()
                    .filter(|c| dot(&w.normal, &c.degree) <= level)
                    .map(|c| c.coords.as_slice())
                    .collect();
                let with: Vec<&[Rational]> = h.iter().copied().chain([e.coords.as_slice()]).collect();
                prop_assert!(rank(&with) > rank(&h), "witness normal does not fail");
            }
            for c in &verdict.certificates {
                let Certificate::Span { alpha0, target, sectors } = c else { unreachable!() };
                let (_, source) = sets.nonpure.iter().find(|(a, _)| a == alpha0).unwrap();
                for sector in sectors {
                    let level = dot(&sector.normal, &source.degree);
                    let mut sum = vec![Rational::zero(); 3];
                    for (coef, e) in &sector.combination {
                        for i in 0..3 { sum[i] += coef * &e.coords[i]; }
                        prop_assert!(dot(&sector.normal, &e.degree) <= level);
                    }
                    prop_assert_eq!(&sum, target);
                }
            }
        }

        #[test]
        fn real_line_is_scale_invariant(p in arb_heis_poly(), l in 1i64..5, m in -4i64..4, d in 1i64..4) {
            prop_assume!(m != 0);
            let scaled = p.scale_variables(&[q(l, d), q(m, d)]).unwrap();
            prop_assert_eq!(real_line_verdict(&scaled).unwrap().outcome, real_line_verdict(&p).unwrap().outcome);
        }

        #[test]
        fn adding_terms_above_the_line_keeps_bounded(p in arb_heis_poly(), e in 1u32..8, f in 1u32..8) {
            let base = real_line_verdict(&p).unwrap();
            let a = p.terms().filter(|(k, _)| k.0[1] == 0).map(|(k, _)| k.0[0]).min();
            let b = p.terms().filter(|(k, _)| k.0[0] == 0).map(|(k, _)| k.0[1]).min();
            let ratio = |x: u32, m: Option<u32>| m.map_or(0.0, |m| f64::from(x) / f64::from(m));
            prop_assume!(base.outcome == Outcome::Bounded && ratio(e, a) + ratio(f, b) >= 1.0);
            let extra = Polynomial::monomial(MultiIndex(vec![e, f]), q(1, 1));
            let grown = &p + &extra;
            prop_assume!(grown.coeff(&MultiIndex(vec![e, f])) != Rational::zero());
            prop_assert_eq!(real_line_verdict(&grown).unwrap().outcome, Outcome::Bounded);
        }
    }
}
