use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nlsp_cli::plot::{emit_plot_script, Fit, PlotError, PlotKind};

fn nlsp(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nlsp"));
    c.args(args).env_remove(nlsp_cli::OUT_DIR_ENV);
    if let Some(d) = env_out {
        c.env(nlsp_cli::OUT_DIR_ENV, d);
    }
    c.output().unwrap()
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

const EIG: &str = "[model]\nd = 3\nsigma = 1\n[grid]\nn = 4096\nr_max = 60\n";

#[test]
fn eig_run_writes_profile_table_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "eig.toml", EIG);
    let out = tmp.path().join("run");
    let o = nlsp(&["eig", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["status"], "pass");
    assert_eq!(s["config"]["grid.n"], 4096);
    let mu1 = s["results"]["mu1"].as_f64().unwrap();
    assert!((mu1 + 0.25).abs() < 1e-3, "{mu1}");
    let csv = fs::read_to_string(out.join("eig.csv")).unwrap();
    assert!(csv.starts_with("d,sigma,coupling,n,mu1,residual\n"));
    let prof = nlsp::profile::Profile::load(&out.join("eig.profile")).unwrap();
    assert_eq!(prof.field.grid.n, 4096);
    assert!(!out.join("FAILED").exists());
}

#[test]
fn same_config_and_seed_give_identical_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[model]\nd = 2\nsigma = 0.5\nalpha = 1\n[grid]\nn = 1024\nr_max = 20\n[run]\namplitude = 1.2\nperturbation = 0.05\nt_end = 0.5\ndt = 1e-2\nout_every = 1\n";
    let cfg = write_cfg(tmp.path(), "ev.toml", text);
    let run = |name: &str, seed: &str| {
        let out = tmp.path().join(name);
        let o = nlsp(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", seed], None);
        // The coarse step may miss the drift verdicts; only the bytes matter here.
        assert!(matches!(o.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("trace.csv")).unwrap()
    };
    let a = run("a", "3");
    let b = run("b", "3");
    let c = run("c", "4");
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(tmp.path().join("a/trace_virial.py").exists());
}

#[test]
fn invalid_config_exits_two_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "bad.toml", "[model]\nd = 3\nsigma = 2.5\n");
    let out = tmp.path().join("run");
    let o = nlsp(&["eig", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.sigma"));
    assert!(!out.exists());
    let o = nlsp(&["eig", "--config", tmp.path().join("missing.toml").to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    // Unknown command rejected by the argument parser.
    let o = nlsp(&["eigen", "--config", &cfg], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_verdict_exits_one_with_marker() {
    let tmp = tempfile::tempdir().unwrap();
    // A small Gaussian disperses; asking for blow-up must fail.
    let text = "[model]\nd = 3\nsigma = 0.5\nalpha = 2\n[grid]\nn = 1024\nr_max = 30\n[run]\namplitude = 0.1\nt_end = 0.2\ndt = 1e-2\nexpect = \"blowup\"\n";
    let cfg = write_cfg(tmp.path(), "ev.toml", text);
    let out = tmp.path().join("run");
    let o = nlsp(&["evolve", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    let marker = fs::read_to_string(out.join("FAILED")).unwrap();
    assert!(marker.contains("expected_blowup"), "{marker}");
    assert_eq!(summary(&out)["status"], "verdict-failure");
    assert!(out.join("trace.csv").exists());
}

#[test]
fn numerical_failure_exits_three_and_keeps_partial_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[model]\nd = 2\nsigma = 0.5\nalpha = 1\n[grid]\nn = 1024\nr_max = 20\n[run]\na = 2\nmax_steps = 1\n";
    let cfg = write_cfg(tmp.path(), "min.toml", text);
    let out = tmp.path().join("run");
    let o = nlsp(&["minimize", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&out);
    assert_eq!(s["status"], "error");
    assert!(s["error"].as_str().unwrap().starts_with("elliptic:"));
    assert!(out.join("FAILED").exists());
}

#[test]
fn precondition_found_during_the_run_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    // a above a* in the mass-critical case.
    let text = "[model]\nd = 1\nsigma = 0.5\n[grid]\nn = 1024\nr_max = 20\n[run]\na = 3\n";
    let cfg = write_cfg(tmp.path(), "min.toml", text);
    let out = tmp.path().join("run");
    let o = nlsp(&["minimize", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("FAILED").exists());
}

#[test]
fn output_directory_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "eig.toml", EIG);
    let env_dir = tmp.path().join("from-env");
    let o = nlsp(&["eig", "--config", &cfg], Some(&env_dir));
    assert_eq!(o.status.code(), Some(0));
    assert!(env_dir.join("summary.json").exists());
    // --out wins over the environment.
    let flag_dir = tmp.path().join("from-flag");
    let o = nlsp(&["eig", "--config", &cfg, "--out", flag_dir.to_str().unwrap(), "--threads", "2"], Some(&env_dir));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(summary(&flag_dir)["threads"], 2);
}

#[test]
fn uniqueness_check_reports_every_condition() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "[model]\nd = 3\nsigma = 0.5\nalpha = 1\n[grid]\nn = 2048\nr_max = 30\n[run]\nomega = 1\n";
    let cfg = write_cfg(tmp.path(), "u.toml", text);
    let out = tmp.path().join("run");
    let o = nlsp(&["uniqueness-check", "--config", &cfg, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let s = summary(&out);
    assert_eq!(s["verdicts"].as_array().unwrap().len(), 7);
    assert!(s["results"]["report"]["r1"].as_f64().unwrap() > 0.0);
}

#[test]
fn plot_scripts() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("trace.csv");
    fs::write(&trace, "t,mass,energy,variance,virialQ,gradnorm\n0,1,1,1,1,1\n").unwrap();
    let s = fs::read_to_string(emit_plot_script(&trace, PlotKind::Virial, None).unwrap()).unwrap();
    assert!(s.contains("T[\"variance\"]") && s.contains("T[\"virialQ\"]") && s.contains("T[\"t\"]"));

    let sweep = tmp.path().join("sweep.csv");
    fs::write(&sweep, "a,beta_a,I_a\n1,0.5,-1\n").unwrap();
    let fit = Fit { slope: -0.33, intercept: 0.1, expected_slope: -1.0 / 3.0 };
    let s = fs::read_to_string(emit_plot_script(&sweep, PlotKind::Sweep, Some(fit)).unwrap()).unwrap();
    assert!(s.contains("SLOPE, INTERCEPT, EXPECTED = -0.33, 0.1,"));
    assert!(s.contains("slope %.5f"));

    assert!(matches!("histogram".parse::<PlotKind>(), Err(PlotError::UnknownKind(_))));
    assert!(matches!(emit_plot_script(&tmp.path().join("none.csv"), PlotKind::Rescaled, None), Err(PlotError::MissingTable(_))));
}
