//! `radon`: command-line front end for the boundedness criteria, moment
//! bumps, kernel checks and operator-norm experiments.
//!
//! Exit codes: 0 bounded/pass, 2 unbounded/fail, 3 inconclusive, 1 error.

mod report;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "radon", version, about = "Boundedness criteria and numerics for multi-parameter singular Radon transforms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide boundedness for the curve family in a spec file.
    Analyze {
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Build a moment bump and report its moments.
    Bump {
        /// Support length of the bump.
        #[arg(long, default_value_t = 1.0)]
        a: f64,
        /// Exponent of the prescribed nonvanishing moment.
        #[arg(long)]
        a1: u32,
        /// Exponents of moments that must vanish (comma separated).
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<u32>,
        /// Where to write the bump as JSON.
        #[arg(long)]
        bump_out: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check cancellation and sampled size bounds of a kernel file.
    KernelCheck {
        #[arg(long)]
        kernel: PathBuf,
        /// Largest truncation order |k|₁ ≤ M for the size bounds.
        #[arg(long = "max-m", default_value_t = 8)]
        max_m: u32,
        /// Derivative orders as `a1,a2`; repeatable.
        #[arg(long = "alpha", value_parser = parse_alpha)]
        alpha: Vec<[usize; 2]>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Operator-norm growth table for kitty, know or billy.
    NormGrowth {
        /// Spec file with an `[experiment]` section; flags override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_parser = ["kitty", "know", "billy"])]
        case: Option<String>,
        /// Truncation orders, e.g. `0..8` or `0,2,4`.
        #[arg(long, value_parser = parse_m_list)]
        m: Option<MList>,
        /// Scale parameter L (know only).
        #[arg(long)]
        l: Option<u32>,
        #[arg(long)]
        grid_n: Option<usize>,
        #[arg(long)]
        quad_order: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Omit the timestamp from JSON reports.
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Debug)]
struct MList(Vec<u32>);

fn parse_m_list(s: &str) -> std::result::Result<MList, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let lo: u32 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let hi: u32 = b.trim().trim_start_matches('=').parse().map_err(|e| format!("bad range end: {e}"))?;
        if lo > hi {
            return Err(format!("empty range {s}"));
        }
        return Ok(MList((lo..=hi).collect()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| format!("bad order '{t}': {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(MList)
}

fn parse_alpha(s: &str) -> std::result::Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.trim().parse().map_err(|e| format!("bad order '{a}': {e}"))?,
            b.trim().parse().map_err(|e| format!("bad order '{b}': {e}"))?,
        ]),
        _ => Err(format!("expected two comma-separated orders, got '{s}'")),
    }
}

/// Rendered output plus the exit code it implies.
pub struct Rendered {
    pub body: String,
    pub code: u8,
}

fn emit(out: &OutputArgs, rendered: &Rendered) -> Result<()> {
    match &out.out {
        Some(path) => std::fs::write(path, &rendered.body).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{}", rendered.body);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let (rendered, output) = match cli.command {
        Command::Analyze { spec, output } => {
            let file = spec::SpecFile::load(&spec)?;
            (report::analyze(&file, &output.report_options())?, output)
        }
        Command::Bump { a, a1, exclude, bump_out, output } => {
            let (rendered, bump) = report::bump(a, a1, &exclude, &output.report_options())?;
            if let Some(path) = bump_out {
                let text = serde_json::to_string_pretty(&bump)?;
                std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
            }
            (rendered, output)
        }
        Command::KernelCheck { kernel, max_m, alpha, output } => {
            let text = std::fs::read_to_string(&kernel).with_context(|| format!("reading {}", kernel.display()))?;
            let seq = radon_core::kernels::DyadicKernelSeq::from_json(&text).with_context(|| format!("in {}", kernel.display()))?;
            let alpha = if alpha.is_empty() { vec![[0, 0], [1, 0], [0, 1], [1, 1]] } else { alpha };
            (report::kernel_check(&seq, max_m, &alpha, &output.report_options())?, output)
        }
        Command::NormGrowth { spec, case, m, l, grid_n, quad_order, output } => {
            let mut exp = match &spec {
                Some(path) => spec::SpecFile::load(path)?.experiment.unwrap_or_default(),
                None => spec::Experiment::default(),
            };
            if let Some(c) = case {
                exp.case = Some(c.parse()?);
            }
            if let Some(MList(v)) = m {
                exp.m = Some(v);
            }
            exp.l = l.or(exp.l);
            exp.grid_n = grid_n.or(exp.grid_n);
            exp.quad_order = quad_order.or(exp.quad_order);
            if exp.case.is_none() {
                bail!("norm-growth needs --case or an [experiment] case");
            }
            (report::norm_growth(&exp, &output.report_options())?, output)
        }
    };
    emit(&output, &rendered)?;
    Ok(rendered.code)
}

impl OutputArgs {
    fn report_options(&self) -> report::Options {
        report::Options { format: self.format, timestamp: !self.no_timestamp }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
