//! Self-contained matplotlib scripts for the tables a run leaves behind.
//! Columns are looked up by header name.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// V(t) with V'' against 8Q(u(t)), from a trace table.
    Virial,
    /// log(-I(a)/a) against log β_a with the fitted line, from a sweep table.
    Sweep,
    /// w_a against λ₀^{d/2} Q(λ₀ ·), from a rescaled-profile table.
    Rescaled,
}

impl FromStr for PlotKind {
    type Err = PlotError;
    fn from_str(s: &str) -> Result<Self, PlotError> {
        match s {
            "virial" => Ok(PlotKind::Virial),
            "sweep" => Ok(PlotKind::Sweep),
            "rescaled" => Ok(PlotKind::Rescaled),
            other => Err(PlotError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PlotError {
    #[error("unknown plot kind `{0}`")]
    UnknownKind(String),
    #[error("table {0} does not exist")]
    MissingTable(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Fitted line drawn on sweep plots.
#[derive(Debug, Clone, Copy)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub expected_slope: f64,
}

const PRELUDE: &str = r#"import csv
import math
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(HERE, name), newline="") as f:
        rows = list(csv.DictReader(f))
    return {k: [float(r[k]) for r in rows] for k in rows[0]}

"#;

fn py(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        "float(\"nan\")".into()
    }
}

/// Writes `<table stem>_<kind>.py` next to `table` and returns its path.
pub fn emit_plot_script(table: &Path, kind: PlotKind, fit: Option<Fit>) -> Result<PathBuf, PlotError> {
    if !table.is_file() {
        return Err(PlotError::MissingTable(table.to_path_buf()));
    }
    let name = table.file_name().and_then(|s| s.to_str()).unwrap_or("table.csv").to_string();
    let stem = table.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
    let (suffix, png) = match kind {
        PlotKind::Virial => ("virial", "virial.png"),
        PlotKind::Sweep => ("sweep", "sweep.png"),
        PlotKind::Rescaled => ("rescaled", "rescaled.png"),
    };
    let mut s = String::from(PRELUDE);
    let _ = writeln!(s, "T = load({name:?})");
    match kind {
        PlotKind::Virial => {
            s.push_str(
                r#"t, V, Q = T["t"], T["variance"], T["virialQ"]
tt, d2 = [], []
for k in range(1, len(t) - 1):
    h = t[k + 1] - t[k]
    tt.append(t[k])
    d2.append((V[k + 1] - 2 * V[k] + V[k - 1]) / (h * h))
fig, (a1, a2) = plt.subplots(2, 1, sharex=True, figsize=(7, 7))
a1.plot(t, V)
a1.set_ylabel("V(t)")
a2.plot(tt, d2, label="V''(t), centred differences")
a2.plot(t, [8 * q for q in Q], "--", label="8 Q(u(t))")
if d2:
    # The last sample of a collapsing run can dwarf everything else.
    lo, hi = min(d2), max(d2)
    pad = 0.2 * (hi - lo) + 1e-12
    a2.set_ylim(lo - pad, hi + pad)
a2.set_xlabel("t")
a2.legend()
"#,
            );
        }
        PlotKind::Sweep => {
            let f = fit.unwrap_or(Fit {
                slope: f64::NAN,
                intercept: f64::NAN,
                expected_slope: f64::NAN,
            });
            let _ = writeln!(s, "SLOPE, INTERCEPT, EXPECTED = {}, {}, {}", py(f.slope), py(f.intercept), py(f.expected_slope));
            s.push_str(
                r#"x = [math.log(b) for b in T["beta_a"]]
y = [math.log(-i / a) for i, a in zip(T["I_a"], T["a"])]
fig, ax = plt.subplots(figsize=(7, 5))
ax.plot(x, y, "o", label="log(-I(a)/a)")
xs = [min(x), max(x)]
ax.plot(xs, [INTERCEPT + SLOPE * v for v in xs], "-", label="fit")
ax.annotate("slope %.5f (expected %.5f)" % (SLOPE, EXPECTED), xy=(0.05, 0.05), xycoords="axes fraction")
ax.set_xlabel("log beta_a")
ax.legend()
"#,
            );
        }
        PlotKind::Rescaled => {
            s.push_str(
                r#"fig, ax = plt.subplots(figsize=(7, 5))
ax.plot(T["r"], T["w_a"], label="w_a")
ax.plot(T["r"], T["target"], "--", label="lambda0^(d/2) Q(lambda0 r)")
ax.set_xlim(0, 10)
ax.set_xlabel("r")
ax.legend()
"#,
            );
        }
    }
    let _ = writeln!(s, "fig.tight_layout()\nfig.savefig(os.path.join(HERE, {png:?}), dpi=150)\nif \"--show\" in sys.argv:\n    plt.show()");
    let out = table.with_file_name(format!("{stem}_{suffix}.py"));
    std::fs::write(&out, s)?;
    Ok(out)
}
