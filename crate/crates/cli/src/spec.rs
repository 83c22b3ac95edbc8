//! Problem specification files.
//!
//! A spec file is TOML with a `[problem]` section, an optional `[scheme]`
//! section and an optional `[experiment]` section:
//!
//! ```toml
//! [problem]
//! family = "translation"
//! p = "s^3 + t^3 + s*t"
//!
//! [scheme]
//! e = [[1, 0], [0, 1]]
//! ```
//!
//! For the Heisenberg family `p` is a list of three polynomials.

use anyhow::{anyhow, bail, Context, Result};
use radon_core::dilations::ExponentScheme;
use radon_core::harness::Case;
use radon_core::symbolic::{GammaSpec, Polynomial, VarStyle};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub problem: Problem,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Translation,
    Heisenberg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Polys {
    One(String),
    Many(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem {
    pub family: Family,
    pub p: Polys,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub e: ExponentScheme,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub case: Option<Case>,
    pub m: Option<Vec<u32>>,
    pub l: Option<u32>,
    pub grid_n: Option<usize>,
    pub quad_order: Option<usize>,
    pub window: Option<[f64; 2]>,
    pub bump_a: Option<f64>,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                anyhow!("spec parse error at line {line}, column {col}: {}", e.message())
            }
            None => anyhow!("spec parse error: {}", e.message()),
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Curve family described by the `[problem]` and `[scheme]` sections.
    pub fn gamma(&self) -> Result<GammaSpec> {
        let texts: Vec<&str> = match (&self.problem.family, &self.problem.p) {
            (Family::Translation, Polys::One(p)) => vec![p],
            (Family::Translation, Polys::Many(v)) if v.len() == 1 => vec![&v[0]],
            (Family::Heisenberg, Polys::Many(v)) if v.len() == 3 => v.iter().map(String::as_str).collect(),
            (Family::Translation, _) => bail!("translation family needs a single polynomial p"),
            (Family::Heisenberg, _) => bail!("heisenberg family needs p = [P1, P2, P3]"),
        };
        let n = match &self.scheme {
            Some(s) => s.e.n(),
            None => {
                let mut n = 0;
                for (i, t) in texts.iter().enumerate() {
                    n = n.max(parse_poly(t, None, i)?.nvars());
                }
                n
            }
        };
        let polys = texts
            .iter()
            .enumerate()
            .map(|(i, t)| parse_poly(t, Some(n), i))
            .collect::<Result<Vec<_>>>()?;
        let scheme = match &self.scheme {
            Some(s) => s.e.clone(),
            None => ExponentScheme::product(n),
        };
        let spec = match self.problem.family {
            Family::Translation => GammaSpec::translation(polys[0].clone(), scheme)?,
            Family::Heisenberg => {
                let [a, b, c]: [Polynomial; 3] = polys.try_into().map_err(|_| anyhow!("expected three polynomials"))?;
                GammaSpec::heisenberg([a, b, c], scheme)?
            }
        };
        Ok(spec)
    }

    /// Canonical spec file for `gamma`, suitable for echoing in reports.
    pub fn echo(gamma: &GammaSpec, experiment: Option<Experiment>) -> Self {
        let n = gamma.scheme().n();
        let style = if n <= 2 { VarStyle::Plain } else { VarStyle::Indexed('t') };
        let texts: Vec<String> = gamma.polynomials().iter().map(|p| p.display_with(style)).collect();
        let (family, p) = match gamma {
            GammaSpec::Translation { .. } => (Family::Translation, Polys::One(texts[0].clone())),
            GammaSpec::Heisenberg { .. } => (Family::Heisenberg, Polys::Many(texts)),
        };
        Self {
            problem: Problem { family, p },
            scheme: Some(SchemeSection { e: gamma.scheme().clone() }),
            experiment,
        }
    }
}

fn parse_poly(text: &str, n: Option<usize>, index: usize) -> Result<Polynomial> {
    let parsed = match n {
        Some(n) => Polynomial::parse(text, n),
        None => Polynomial::parse_auto(text),
    };
    parsed.map_err(|e| match e {
        radon_core::Error::Parse { column, message } => {
            anyhow!("polynomial {} ('{text}'), column {column}: {message}", index + 1)
        }
        other => anyhow!("polynomial {} ('{text}'): {other}", index + 1),
    })
}
