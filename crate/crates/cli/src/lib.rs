//! Batch front end: `nlsp <command> --config <file>`.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use config::{parse_config, Command};
use output::OutDir;

/// Output directory used when `--out` is absent.
pub const OUT_DIR_ENV: &str = "NLSP_OUT_DIR";
const DEFAULT_OUT: &str = "nlsp-out";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub struct Invocation {
    pub command: Command,
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

fn resolve_out(out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Runs one experiment and returns the process exit code.
pub fn execute(inv: &Invocation) -> i32 {
    let text = match std::fs::read_to_string(&inv.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", inv.config.display());
            return EXIT_CONFIG;
        }
    };
    let mut cfg = match parse_config(&text, Some(inv.command)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", inv.config.display());
            return EXIT_CONFIG;
        }
    };
    if let Some(s) = inv.seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(t) = inv.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_CONFIG;
        }
        // Only fails if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let root = resolve_out(inv.out.as_deref());
    let mut out = match OutDir::create(&root) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", root.display());
            return EXIT_NUMERICAL;
        }
    };

    let start = Instant::now();
    let outcome = commands::run(&cfg, &mut out);
    let wall = start.elapsed().as_secs_f64();
    let (code, status, verdicts, results, error) = match outcome {
        Ok(o) => {
            let pass = o.verdicts.iter().all(|v| v.pass);
            let code = if pass { EXIT_PASS } else { EXIT_VERDICT };
            (code, if pass { "pass" } else { "verdict-failure" }, o.verdicts, o.results, None)
        }
        Err(e) => {
            let code = if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERICAL };
            (code, "error", Vec::new(), serde_json::Value::Null, Some(e.to_string()))
        }
    };
    let mut files = out.written.clone();
    files.push("summary.json".into());
    let summary = json!({
        "command": cfg.command.name(),
        "status": status,
        "exit_code": code,
        "error": error,
        "versions": { "nlsp": env!("CARGO_PKG_VERSION") },
        "config": cfg.echo,
        "wall_time_s": wall,
        "threads": rayon::current_num_threads(),
        "verdicts": verdicts,
        "results": results,
        "files": files,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    if let Err(e) = out.write("summary.json", &(text + "\n")) {
        eprintln!("error: cannot write summary: {e}");
        return EXIT_NUMERICAL;
    }
    for v in &verdicts {
        println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
    }
    if code != EXIT_PASS {
        let reason = match &error {
            Some(e) => format!("error: {e}"),
            None => {
                let failed: Vec<&str> = verdicts.iter().filter(|v| !v.pass).map(|v| v.name.as_str()).collect();
                format!("verdicts failed: {}", failed.join(", "))
            }
        };
        eprintln!("{reason}");
        if let Err(e) = out.mark_failed(&reason) {
            eprintln!("error: cannot write FAILED marker: {e}");
        }
    }
    println!("{status}: results in {}", root.display());
    code
}
