//! Report assembly and rendering for each subcommand.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use radon_core::bumps::{moment_bump, BumpCombination};
use radon_core::criteria::{heisenberg_verdict, real_line_verdict, scalar_control_verdict, Certificate, Outcome, Verdict};
use radon_core::dilations::{is_pure, ExponentScheme};
use radon_core::harness::{growth_experiment, Case, ExperimentConfig, Grid1D, GrowthTable};
use radon_core::kernels::{default_product_samples, sample_product_kernel_bounds, verify_cancellation, DyadicKernelSeq};
use radon_core::symbolic::{w_expansion, xhat_expansion, GammaSpec, WExpansion};
use serde_json::{json, Value};

use crate::spec::{Experiment, SpecFile};
use crate::{Format, Rendered};

/// Sample levels `j` in `±a·2^{−j/4}` used for size bounds.
const SAMPLE_LEVELS: u32 = 48;

pub struct Options {
    pub format: Format,
    pub timestamp: bool,
}

fn header(opts: &Options) -> serde_json::Map<String, Value> {
    let mut map = serde_json::Map::new();
    map.insert("tool".into(), json!("radon"));
    map.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    if opts.timestamp {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        map.insert("generated_at_unix".into(), json!(secs));
    }
    map
}

fn json_body(map: serde_json::Map<String, Value>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Value::Object(map))? + "\n")
}

fn outcome_code(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Bounded => 0,
        Outcome::Unbounded => 2,
        Outcome::Inconclusive => 3,
    }
}

/// Runs the criterion that fits the family and scheme.
pub fn decide(gamma: &GammaSpec) -> Result<(&'static str, Verdict)> {
    Ok(match gamma {
        GammaSpec::Translation { p, scheme } if *scheme == ExponentScheme::product(2) => {
            ("real-line", real_line_verdict(p)?)
        }
        GammaSpec::Translation { .. } => ("scalar-control", scalar_control_verdict(&w_expansion(gamma)?)?),
        GammaSpec::Heisenberg { .. } => ("heisenberg", heisenberg_verdict(gamma)?),
    })
}

fn expansion_json(e: &WExpansion) -> Result<Vec<Value>> {
    e.iter()
        .map(|(alpha, term)| {
            Ok(json!({
                "alpha": alpha,
                "degree": term.degree.components().iter().map(ToString::to_string).collect::<Vec<_>>(),
                "pure": is_pure(&term.degree)?,
                "field": e.field_string(&term.field),
            }))
        })
        .collect()
}

fn certificate_text(v: &Verdict, c: &Certificate) -> Vec<String> {
    match c {
        Certificate::Newton { alpha0, a, b, value } => {
            let show = |x: &Option<radon_core::Rational>| x.as_ref().map_or("inf".to_string(), ToString::to_string);
            vec![format!(
                "{alpha0}: e/a + f/b = {value} >= 1 (a = {}, b = {})",
                show(a),
                show(b)
            )]
        }
        Certificate::Span { alpha0, target, sectors } => {
            let mut lines = vec![format!("{alpha0}: target {} spanned in {} sector(s)", v.field_string(target), sectors.len())];
            for s in sectors {
                let normal: Vec<String> = s.normal.iter().map(ToString::to_string).collect();
                let combo: Vec<String> = s
                    .combination
                    .iter()
                    .map(|(c, e)| if c == &radon_core::Rational::from_integer(1.into()) { e.label.clone() } else { format!("{c}*{}", e.label) })
                    .collect();
                lines.push(format!(
                    "normal ({}): {} = {}",
                    normal.join(","),
                    v.field_string(target),
                    combo.join(" + ")
                ));
            }
            lines
        }
    }
}

pub fn analyze(file: &SpecFile, opts: &Options) -> Result<Rendered> {
    let gamma = file.gamma()?;
    let (criterion, verdict) = decide(&gamma)?;
    let w = w_expansion(&gamma)?;
    let xhat = xhat_expansion(&gamma)?;
    let code = outcome_code(verdict.outcome);
    let mut pure = Vec::new();
    let mut nonpure = Vec::new();
    for (alpha, term) in xhat.iter() {
        if is_pure(&term.degree)? {
            pure.push(format!("X̂{alpha}"));
        } else {
            nonpure.push(format!("X̂{alpha}"));
        }
    }
    let body = match opts.format {
        Format::Json => {
            let mut map = header(opts);
            map.insert("input".into(), serde_json::to_value(SpecFile::echo(&gamma, None))?);
            map.insert("criterion".into(), json!(criterion));
            map.insert("verdict".into(), serde_json::to_value(&verdict)?);
            map.insert("w_expansion".into(), json!(expansion_json(&w)?));
            map.insert("xhat_expansion".into(), json!(expansion_json(&xhat)?));
            map.insert("pure".into(), json!(pure));
            map.insert("nonpure".into(), json!(nonpure));
            json_body(map)?
        }
        Format::Text => {
            let echo = SpecFile::echo(&gamma, None);
            let mut out = String::new();
            writeln!(out, "family:    {}", gamma.family_name())?;
            match &echo.problem.p {
                crate::spec::Polys::One(p) => writeln!(out, "p:         {p}")?,
                crate::spec::Polys::Many(ps) => writeln!(out, "P:         ({})", ps.join(", "))?,
            }
            writeln!(out, "scheme:    {}", gamma.scheme())?;
            writeln!(out, "criterion: {criterion}")?;
            writeln!(out, "verdict:   {}", verdict.outcome)?;
            for wit in &verdict.witnesses {
                let normal: Vec<String> = wit.normal.iter().map(ToString::to_string).collect();
                writeln!(out, "  witness {} degree {} normal ({})", wit.alpha0, wit.degree, normal.join(","))?;
            }
            for c in &verdict.certificates {
                for (i, line) in certificate_text(&verdict, c).into_iter().enumerate() {
                    let lead = if i == 0 { "  certificate " } else { "    " };
                    writeln!(out, "{lead}{line}")?;
                }
            }
            for d in &verdict.diagnostics {
                writeln!(out, "  note: {d}")?;
            }
            for (name, e) in [("W", &w), ("X̂", &xhat)] {
                writeln!(out, "{name} expansion:")?;
                for (alpha, term) in e.iter() {
                    let tag = if is_pure(&term.degree)? { "pure" } else { "nonpure" };
                    writeln!(out, "  {alpha:<10} deg {:<12} {tag:<8} {}", term.degree.to_string(), e.field_string(&term.field))?;
                }
            }
            writeln!(out, "pure:      {}", pure.join(", "))?;
            writeln!(out, "nonpure:   {}", nonpure.join(", "))?;
            out
        }
        Format::Csv => bail!("analyze has no CSV output; use --format text or json"),
    };
    Ok(Rendered { body, code })
}

pub fn bump(a: f64, a1: u32, excluded: &[u32], opts: &Options) -> Result<(Rendered, BumpCombination)> {
    let mb = moment_bump(a, a1, excluded)?;
    let passes = mb.passes();
    let code = if passes { 0 } else { 2 };
    let body = match opts.format {
        Format::Json => {
            let mut map = header(opts);
            map.insert("input".into(), json!({ "a": a, "a1": a1, "excluded": excluded }));
            map.insert("passes".into(), json!(passes));
            map.insert("report".into(), serde_json::to_value(&mb)?);
            json_body(map)?
        }
        Format::Text => {
            let mut out = String::new();
            writeln!(out, "moment bump on (0, {a}): a1 = {a1}, excluded = {excluded:?}")?;
            writeln!(out, "atoms (c, x, r):")?;
            for atom in mb.bump.atoms() {
                writeln!(out, "  {:+.12e}  {:.12e}  {:.12e}", atom.c, atom.x, atom.r)?;
            }
            writeln!(out, "|∫ς|              = {:.3e}  (< 1e-10)", mb.mass_residual)?;
            writeln!(out, "max excluded |∫t^aς| = {:.3e}  (< 1e-9)", mb.excluded_residual)?;
            writeln!(out, "∫t^{a1}ς            = {:.12}", mb.target_moment)?;
            writeln!(out, "determinant       = {:.12e} (formula {:.12e})", mb.determinant, mb.determinant_formula)?;
            writeln!(out, "result: {}", if passes { "pass" } else { "fail" })?;
            out
        }
        Format::Csv => bail!("bump has no CSV output; use --format text or json"),
    };
    Ok((Rendered { body, code }, mb.bump))
}

pub fn kernel_check(seq: &DyadicKernelSeq, max_m: u32, alphas: &[[usize; 2]], opts: &Options) -> Result<Rendered> {
    let report = verify_cancellation(seq);
    let code = if report.passed { 0 } else { 2 };
    let bounds: Option<Vec<(u32, Vec<f64>)>> = if *seq.scheme() == ExponentScheme::product(2) {
        let samples = default_product_samples(seq.support(), SAMPLE_LEVELS);
        Some(
            (0..=max_m)
                .map(|m| {
                    let row = alphas
                        .iter()
                        .map(|&a| sample_product_kernel_bounds(seq, m, a, &samples))
                        .collect::<radon_core::Result<Vec<_>>>()?;
                    Ok((m, row))
                })
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    let alpha_names: Vec<String> = alphas.iter().map(|a| format!("C({},{})", a[0], a[1])).collect();
    let body = match opts.format {
        Format::Json => {
            let mut map = header(opts);
            map.insert("input".into(), json!({ "entries": seq.len(), "n": seq.scheme().n(), "nu": seq.scheme().nu(), "a": seq.support(), "max_m": max_m, "alpha": alphas }));
            map.insert("cancellation".into(), serde_json::to_value(&report)?);
            map.insert(
                "bounds".into(),
                match &bounds {
                    Some(rows) => json!(rows
                        .iter()
                        .map(|(m, r)| {
                            let mut o = serde_json::Map::new();
                            o.insert("M".into(), json!(m));
                            for (name, v) in alpha_names.iter().zip(r) {
                                o.insert(name.clone(), json!(v));
                            }
                            Value::Object(o)
                        })
                        .collect::<Vec<_>>()),
                    None => Value::Null,
                },
            );
            json_body(map)?
        }
        Format::Text | Format::Csv => {
            let mut out = String::new();
            if opts.format == Format::Text {
                writeln!(
                    out,
                    "cancellation: {} ({} slices, max slice {:.3e}, tolerance 1e-9)",
                    if report.passed { "pass" } else { "fail" },
                    report.checked,
                    report.max_slice
                )?;
                for v in &report.violations {
                    let k: Vec<String> = v.k.iter().map(ToString::to_string).collect();
                    writeln!(out, "  violation k=({}) mu={} slice sup {:.3e}", k.join(","), v.mu + 1, v.value)?;
                }
                for k in &report.support_violations {
                    let k: Vec<String> = k.iter().map(ToString::to_string).collect();
                    writeln!(out, "  entry k=({}) reaches outside the ball of radius {}", k.join(","), seq.support())?;
                }
            }
            match &bounds {
                Some(rows) => {
                    writeln!(out, "M,{}", alpha_names.join(","))?;
                    for (m, r) in rows {
                        let vals: Vec<String> = r.iter().map(|v| format!("{v:.9e}")).collect();
                        writeln!(out, "{m},{}", vals.join(","))?;
                    }
                }
                None => writeln!(out, "size bounds: skipped (need the two-parameter product scheme)")?,
            }
            out
        }
    };
    Ok(Rendered { body, code })
}

pub fn experiment_config(exp: &Experiment) -> Result<(Case, Vec<u32>, u32, ExperimentConfig)> {
    let Some(case) = exp.case else { bail!("experiment case is missing") };
    let mut cfg = ExperimentConfig::default();
    let window = exp.window.unwrap_or([cfg.grid.xmin, cfg.grid.xmax]);
    cfg.grid = Grid1D::new(window[0], window[1], exp.grid_n.unwrap_or(cfg.grid.n))?;
    cfg.quad_order = exp.quad_order.unwrap_or(cfg.quad_order);
    cfg.bump_a = exp.bump_a.unwrap_or(cfg.bump_a);
    let m = exp.m.clone().unwrap_or_else(|| (0..=8).collect());
    if m.is_empty() {
        bail!("experiment M list is empty");
    }
    let l = exp.l.unwrap_or(if case == Case::Know { 20 } else { 0 });
    Ok((case, m, l, cfg))
}

fn table_text(t: &GrowthTable) -> Result<String> {
    let mut out = String::new();
    writeln!(
        out,
        "case {}  L = {}  grid [{}, {}] n = {}  quad order {}  seed {:#x}",
        t.case, t.l, t.config.grid.xmin, t.config.grid.xmax, t.config.grid.n, t.config.quad_order, t.seed
    )?;
    writeln!(out, "{:>4}  {:>16}  {:>10}  {:>6}", "M", "norm", "ratio", "iters")?;
    for r in &t.rows {
        let flag = if r.converged { "" } else { "  (not converged)" };
        writeln!(out, "{:>4}  {:>16.9}  {:>10.6}  {:>6}{flag}", r.m, r.norm, r.ratio, r.iterations)?;
    }
    Ok(out)
}

pub fn norm_growth(exp: &Experiment, opts: &Options) -> Result<Rendered> {
    let (case, m, l, cfg) = experiment_config(exp)?;
    let table = growth_experiment(case, &m, l, &cfg)?;
    let body = match opts.format {
        Format::Csv => table.to_csv(),
        Format::Text => table_text(&table)?,
        Format::Json => {
            let mut map = header(opts);
            let echo = Experiment {
                case: Some(case),
                m: Some(m.clone()),
                l: Some(l),
                grid_n: Some(cfg.grid.n),
                quad_order: Some(cfg.quad_order),
                window: Some([cfg.grid.xmin, cfg.grid.xmax]),
                bump_a: Some(cfg.bump_a),
            };
            map.insert("input".into(), serde_json::to_value(echo)?);
            map.insert("table".into(), serde_json::to_value(&table)?);
            json_body(map)?
        }
    };
    Ok(Rendered { body, code: 0 })
}
