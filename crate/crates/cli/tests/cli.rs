//! End-to-end runs of the `radon` binary.

use std::path::Path;
use std::process::{Command, Output};

use radon_core::bumps::{moment_bump, BumpCombination, TensorBump};
use radon_core::dilations::ExponentScheme;
use radon_core::kernels::{DyadicKernelSeq, KernelEntry};

fn radon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radon")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn translation(p: &str) -> String {
    format!("[problem]\nfamily = \"translation\"\np = \"{p}\"\n")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn analyze_exit_codes_follow_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let know = write(dir.path(), "know.toml", &translation("s^3 + t^3 + s*t"));
    let out = radon(&["analyze", "--spec", &know]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("verdict:   Unbounded"));
    assert!(stdout(&out).contains("witness (1,1) degree (1,1) normal (1,1)"));

    let billy = write(dir.path(), "billy.toml", &translation("s + s*t"));
    let out = radon(&["analyze", "--spec", &billy]);
    assert_eq!(out.status.code(), Some(0));

    let heis = write(dir.path(), "heis.toml", "[problem]\nfamily = \"heisenberg\"\np = [\"s\", \"t\", \"s*t\"]\n");
    let out = radon(&["analyze", "--spec", &heis]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("T = [X̂(1,0), X̂(0,1)]"), "{}", stdout(&out));

    // A non-constant Heisenberg expansion is outside the decided class.
    let varying = write(dir.path(), "var.toml", "[problem]\nfamily = \"heisenberg\"\np = [\"s\", \"t + s*t^2\", \"0\"]\n");
    let out = radon(&["analyze", "--spec", &varying]);
    assert!(matches!(out.status.code(), Some(0) | Some(2) | Some(3)));
}

#[test]
fn inconclusive_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let three = write(
        dir.path(),
        "nu3.toml",
        "[problem]\nfamily = \"translation\"\np = \"t1*t2 + t3\"\n[scheme]\ne = [[1,0,0],[0,1,0],[0,0,1]]\n",
    );
    let out = radon(&["analyze", "--spec", &three]);
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
}

#[test]
fn input_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", &translation("s + * t"));
    let out = radon(&["analyze", "--spec", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("column"));

    let unknown = write(dir.path(), "unknown.toml", &(translation("s") + "extra = 1\n"));
    let out = radon(&["analyze", "--spec", &unknown]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    assert_eq!(radon(&["analyze", "--spec", "/nonexistent.toml"]).status.code(), Some(1));
    assert_eq!(radon(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(radon(&["bump", "--a1", "1", "--exclude", "1"]).status.code(), Some(1));
    assert_eq!(radon(&["--help"]).status.code(), Some(0));
}

#[test]
fn json_reports_are_deterministic_and_echo_their_input() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(dir.path(), "s.toml", "[problem]\nfamily = \"heisenberg\"\np = [\"s\", \"t^2\", \"1/2*s*t\"]\n");
    let a = radon(&["analyze", "--spec", &spec, "--format", "json", "--no-timestamp"]);
    let b = radon(&["analyze", "--spec", &spec, "--format", "json", "--no-timestamp"]);
    assert_eq!(a.stdout, b.stdout);
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert!(report.get("generated_at_unix").is_none());

    // Feeding the echo back in reproduces the report byte for byte.
    let echo = toml::to_string(&report["input"]).unwrap();
    let again = write(dir.path(), "echo.toml", &echo);
    let c = radon(&["analyze", "--spec", &again, "--format", "json", "--no-timestamp"]);
    assert_eq!(a.stdout, c.stdout);

    let stamped = radon(&["analyze", "--spec", &spec, "--format", "json"]);
    let report: serde_json::Value = serde_json::from_slice(&stamped.stdout).unwrap();
    assert!(report["generated_at_unix"].is_u64());
}

#[test]
fn bump_writes_a_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bump.json");
    let out = radon(&["bump", "--a", "1", "--a1", "2", "--exclude", "1,3", "--bump-out", path.to_str().unwrap(), "--format", "json", "--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passes"], true);
    let bump: BumpCombination = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(bump.atoms().len(), 4);
    assert_eq!(bump, moment_bump(1.0, 2, &[1, 3]).unwrap().bump);

    let out = radon(&["bump", "--a1", "1"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("result: pass"));
}

fn kernel_file(dir: &Path, broken: bool) -> String {
    let phi = moment_bump(0.5, 1, &[]).unwrap().bump;
    let mut seq = DyadicKernelSeq::new(ExponentScheme::product(2), 1.0).unwrap();
    for k1 in 0..=3u32 {
        for k2 in 0..=(3 - k1) {
            let second = if broken && (k1, k2) == (0, 2) { BumpCombination::base().dilate(2.0) } else { phi.clone() };
            let bump = TensorBump::new(vec![phi.clone(), second]).unwrap();
            seq.insert(vec![k1, k2], KernelEntry::single(bump)).unwrap();
        }
    }
    write(dir, if broken { "broken.json" } else { "kernel.json" }, &seq.to_json().unwrap())
}

#[test]
fn kernel_check_reports_cancellation() {
    let dir = tempfile::tempdir().unwrap();
    let good = kernel_file(dir.path(), false);
    let out = radon(&["kernel-check", "--kernel", &good, "--max-m", "3", "--alpha", "0,0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("cancellation: pass"), "{text}");
    assert!(text.contains("M,C(0,0)"));
    assert_eq!(text.lines().filter(|l| l.starts_with(|c: char| c.is_ascii_digit())).count(), 4);

    let broken = kernel_file(dir.path(), true);
    let out = radon(&["kernel-check", "--kernel", &broken, "--max-m", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("violation k=(0,2) mu=2"), "{}", stdout(&out));

    let garbage = write(dir.path(), "garbage.json", "{\"n\": 2}");
    assert_eq!(radon(&["kernel-check", "--kernel", &garbage]).status.code(), Some(1));
}

#[test]
fn norm_growth_kitty_table() {
    let out = radon(&["norm-growth", "--case", "kitty", "--m", "0..3", "--grid-n", "256", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let ratios: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ratios.len(), 4);
    for (m, r) in ratios.iter().enumerate() {
        assert!((r - (m + 1) as f64).abs() < 1e-9, "{text}");
    }
    assert!(text.starts_with("# case=kitty"));
}

#[test]
fn norm_growth_reads_experiment_block() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "exp.toml",
        "[problem]\nfamily = \"translation\"\np = \"s + s*t\"\n[experiment]\ncase = \"billy\"\nm = [0, 2]\ngrid_n = 256\nwindow = [-4.0, 4.0]\n",
    );
    let a = radon(&["norm-growth", "--spec", &spec, "--format", "json", "--no-timestamp"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = radon(&["norm-growth", "--spec", &spec, "--format", "json", "--no-timestamp"]);
    assert_eq!(a.stdout, b.stdout);
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(report["input"]["case"], "billy");
    assert_eq!(report["table"]["rows"].as_array().unwrap().len(), 2);
    assert_eq!(radon(&["norm-growth"]).status.code(), Some(1));
}
