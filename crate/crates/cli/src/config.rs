//! Experiment configuration: TOML with `[model]`, `[grid]`, `[run]` and
//! `[output]` sections and an optional top-level `command`. Every key
//! belongs to a section and to a set of commands; anything else is
//! rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde_json::{json, Value};
use thiserror::Error;

use nlsp::critical::SWEEP_FRACTIONS;
use nlsp::elliptic::Resolution;
use nlsp::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eig,
    GroundState,
    Minimize,
    Classify,
    Evolve,
    CriticalSweep,
    UniquenessCheck,
    Stability,
}

use Command::*;

const ALL: &[Command] = &[Eig, GroundState, Minimize, Classify, Evolve, CriticalSweep, UniquenessCheck, Stability];

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Eig => "eig",
            GroundState => "groundstate",
            Minimize => "minimize",
            Classify => "classify",
            Evolve => "evolve",
            CriticalSweep => "critical-sweep",
            UniquenessCheck => "uniqueness-check",
            Stability => "stability",
        }
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ALL.iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` is not used by `{command}`")]
    Unused { line: usize, key: String, command: Command },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("line {line}: key `{key}`: {msg}")]
    Type { line: usize, key: String, msg: String },
    #[error("key `{key}` out of range: {msg}")]
    Range { key: String, msg: String },
    #[error("config says command `{config}` but `{cli}` was requested")]
    CommandMismatch { config: Command, cli: Command },
}

type Result<T> = std::result::Result<T, ConfigError>;

struct KeySpec {
    section: &'static str,
    key: &'static str,
    commands: &'static [Command],
}

const fn k(section: &'static str, key: &'static str, commands: &'static [Command]) -> KeySpec {
    KeySpec { section, key, commands }
}

const KEYS: &[KeySpec] = &[
    k("", "command", ALL),
    k("model", "d", ALL),
    k("model", "sigma", ALL),
    k("model", "alpha", ALL),
    k("model", "coupling", ALL),
    k("grid", "n", ALL),
    k("grid", "r_max", ALL),
    k("run", "omega", &[GroundState, Classify, Evolve, UniquenessCheck]),
    k("run", "solver", &[GroundState]),
    k("run", "a", &[Minimize, Stability]),
    k("run", "max_steps", &[Minimize, CriticalSweep, Stability]),
    k("run", "a_fractions", &[CriticalSweep]),
    k("run", "sweep_n", &[CriticalSweep]),
    k("run", "extent", &[CriticalSweep]),
    k("run", "tau", &[CriticalSweep]),
    k("run", "profile", &[Classify, Evolve]),
    k("run", "family_size", &[Classify]),
    k("run", "init", &[Evolve]),
    k("run", "amplitude", &[Evolve]),
    k("run", "width", &[Evolve]),
    k("run", "lambda", &[Evolve]),
    k("run", "mu", &[Evolve]),
    k("run", "perturbation", &[Evolve]),
    k("run", "expect", &[Evolve]),
    k("run", "dt", &[Evolve, Stability]),
    k("run", "t_end", &[Evolve, Stability]),
    k("run", "out_every", &[Evolve, Stability]),
    k("run", "adaptive", &[Evolve]),
    k("run", "delta", &[Stability]),
    k("run", "trials", &[Stability]),
    k("run", "tolerance", &[Stability]),
    k("run", "seed", &[Evolve, Stability]),
    k("run", "corroborate", &[UniquenessCheck]),
    k("output", "plots", ALL),
    k("output", "tag", ALL),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Shooting,
    Descent,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Gaussian { amplitude: f64, width: f64 },
    /// μ φ_ω^λ.
    GroundState { lambda: f64, mu: f64 },
    Profile(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expect {
    Nothing,
    BlowUp,
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Knobs {
    Eig,
    GroundState { omega: f64, solver: SolverChoice },
    Minimize { a: f64, max_steps: usize },
    Classify { omega: f64, profiles: Vec<PathBuf>, family_size: usize },
    Evolve {
        omega: Option<f64>,
        init: Init,
        perturbation: f64,
        dt: f64,
        t_end: f64,
        out_every: usize,
        adaptive: bool,
        expect: Expect,
    },
    CriticalSweep { fractions: Vec<f64>, sweep_n: usize, extent: f64, tau: Vec<f64>, max_steps: usize },
    UniquenessCheck { omega: f64, corroborate: bool },
    Stability { a: f64, delta: f64, t_end: f64, trials: usize, dt: f64, out_every: usize, tolerance: f64, max_steps: usize },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub params: ModelParams,
    pub res: Resolution,
    pub knobs: Knobs,
    pub seed: u64,
    pub plots: bool,
    pub tag: String,
    /// Every resolved setting, defaults included, as `section.key`.
    pub echo: BTreeMap<String, Value>,
}

struct Entry {
    line: usize,
    value: toml::Value,
}

struct Raw {
    command: Command,
    entries: BTreeMap<String, Entry>,
    echo: BTreeMap<String, Value>,
}

fn type_error(e: &Entry, key: &str, want: &str) -> ConfigError {
    ConfigError::Type {
        line: e.line,
        key: key.into(),
        msg: format!("expected {want}, got `{}`", e.value),
    }
}

fn number(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl Raw {
    fn take(&mut self, name: &str) -> Option<Entry> {
        self.entries.remove(name)
    }

    fn float(&mut self, name: &str, default: Option<f64>) -> Result<f64> {
        let v = match self.take(name) {
            Some(e) => number(&e.value).ok_or_else(|| type_error(&e, name, "a number"))?,
            None => default.ok_or_else(|| ConfigError::Missing { key: name.into() })?,
        };
        if !v.is_finite() {
            return Err(range(name, "must be finite"));
        }
        self.echo.insert(name.into(), json!(v));
        Ok(v)
    }

    fn positive(&mut self, name: &str, default: Option<f64>) -> Result<f64> {
        let v = self.float(name, default)?;
        if v <= 0.0 {
            return Err(range(name, format!("need a positive value, got {v}")));
        }
        Ok(v)
    }

    fn uint(&mut self, name: &str, default: Option<usize>) -> Result<usize> {
        let v = match self.take(name) {
            Some(e) => match e.value {
                toml::Value::Integer(i) if i >= 0 => i as usize,
                _ => return Err(type_error(&e, name, "a non-negative integer")),
            },
            None => default.ok_or_else(|| ConfigError::Missing { key: name.into() })?,
        };
        self.echo.insert(name.into(), json!(v));
        Ok(v)
    }

    fn boolean(&mut self, name: &str, default: bool) -> Result<bool> {
        let v = match self.take(name) {
            Some(e) => e.value.as_bool().ok_or_else(|| type_error(&e, name, "true or false"))?,
            None => default,
        };
        self.echo.insert(name.into(), json!(v));
        Ok(v)
    }

    fn string(&mut self, name: &str) -> Result<Option<String>> {
        let v = match self.take(name) {
            Some(e) => Some(e.value.as_str().ok_or_else(|| type_error(&e, name, "a string"))?.to_string()),
            None => None,
        };
        if let Some(s) = &v {
            self.echo.insert(name.into(), json!(s));
        }
        Ok(v)
    }

    /// A string or an array of strings.
    fn strings(&mut self, name: &str) -> Result<Vec<String>> {
        let v = match self.take(name) {
            None => Vec::new(),
            Some(e) => match &e.value {
                toml::Value::String(s) => vec![s.clone()],
                toml::Value::Array(items) => items
                    .iter()
                    .map(|x| x.as_str().map(str::to_string).ok_or_else(|| type_error(&e, name, "an array of strings")))
                    .collect::<Result<Vec<String>>>()?,
                _ => return Err(type_error(&e, name, "a string or an array of strings")),
            },
        };
        if !v.is_empty() {
            self.echo.insert(name.into(), json!(v));
        }
        Ok(v)
    }

    /// An array of numbers; a bare number is a list of one.
    fn list(&mut self, name: &str, default: &[f64]) -> Result<Vec<f64>> {
        let v = match self.take(name) {
            None => default.to_vec(),
            Some(e) => match &e.value {
                toml::Value::Array(items) => items
                    .iter()
                    .map(|x| number(x).ok_or_else(|| type_error(&e, name, "an array of numbers")))
                    .collect::<Result<Vec<f64>>>()?,
                x => vec![number(x).ok_or_else(|| type_error(&e, name, "an array of numbers"))?],
            },
        };
        self.echo.insert(name.into(), json!(v));
        Ok(v)
    }

    fn choice(&mut self, name: &str, allowed: &[&str], default: &str) -> Result<String> {
        let (line, v) = match self.take(name) {
            None => (0, default.to_string()),
            Some(e) => (e.line, e.value.as_str().ok_or_else(|| type_error(&e, name, "a string"))?.to_string()),
        };
        if !allowed.contains(&v.as_str()) {
            return Err(ConfigError::Type {
                line,
                key: name.into(),
                msg: format!("expected one of {}, got `{v}`", allowed.join(", ")),
            });
        }
        self.echo.insert(name.into(), json!(v));
        Ok(v)
    }
}

fn range(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key: key.into(),
        msg: msg.into(),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of every `section.key` as written, for diagnostics.
fn key_lines(text: &str) -> BTreeMap<String, usize> {
    let mut lines = BTreeMap::new();
    let Ok(doc) = toml::de::DeTable::parse(text) else {
        return lines;
    };
    for (k, v) in doc.get_ref() {
        let line = line_of(text, k.span().start);
        match v.get_ref().as_table() {
            Some(t) => {
                lines.insert(k.get_ref().to_string(), line);
                for (kk, _) in t {
                    lines.insert(format!("{}.{}", k.get_ref(), kk.get_ref()), line_of(text, kk.span().start));
                }
            }
            None => {
                lines.insert(k.get_ref().to_string(), line);
            }
        }
    }
    lines
}

/// Parses the TOML text into `section.key` entries and checks every key
/// against the table for `command`. The command may come from the text,
/// from the caller, or both, in which case they must agree.
fn tokenize(text: &str, cli: Option<Command>) -> Result<Raw> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let span = e.span().unwrap_or(0..0);
        let at = text.get(span.clone()).unwrap_or("").trim();
        let msg = match at {
            "" => e.message().to_string(),
            at if at.contains('\n') => e.message().to_string(),
            at => format!("{} at `{at}`", e.message()),
        };
        ConfigError::Syntax { line: line_of(text, span.start), msg }
    })?;
    let lines = key_lines(text);
    let known = |section: &str, key: &str| KEYS.iter().any(|s| s.section == section && s.key == key);
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (name, value) in doc {
        match value {
            toml::Value::Table(t) => {
                if !KEYS.iter().any(|s| s.section == name) {
                    let line = lines.get(&name).copied().unwrap_or(0);
                    return Err(ConfigError::Syntax { line, msg: format!("unknown section `[{name}]`") });
                }
                for (key, value) in t {
                    let full = format!("{name}.{key}");
                    let line = lines.get(&full).copied().unwrap_or(0);
                    if !known(&name, &key) {
                        return Err(ConfigError::UnknownKey { line, key: full });
                    }
                    entries.insert(full, Entry { line, value });
                }
            }
            value => {
                let line = lines.get(&name).copied().unwrap_or(0);
                if !known("", &name) {
                    return Err(ConfigError::UnknownKey { line, key: name });
                }
                entries.insert(name, Entry { line, value });
            }
        }
    }
    let from_text = match entries.remove("command") {
        Some(e) => {
            let s = e.value.as_str().ok_or_else(|| type_error(&e, "command", "a string"))?;
            Some(s.parse::<Command>().map_err(|msg| ConfigError::Type { line: e.line, key: "command".into(), msg })?)
        }
        None => None,
    };
    let command = match (from_text, cli) {
        (Some(a), Some(b)) if a != b => return Err(ConfigError::CommandMismatch { config: a, cli: b }),
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => return Err(ConfigError::Missing { key: "command".into() }),
    };
    // Report the first offending key in file order.
    let mut unused: Vec<(&String, &Entry)> = entries
        .iter()
        .filter(|(full, _)| {
            let (section, key) = full.split_once('.').unwrap_or(("", full));
            !KEYS.iter().any(|s| s.section == section && s.key == key && s.commands.contains(&command))
        })
        .collect();
    unused.sort_by_key(|(_, e)| e.line);
    if let Some((full, e)) = unused.first() {
        return Err(ConfigError::Unused { line: e.line, key: (*full).clone(), command });
    }
    let mut echo = BTreeMap::new();
    echo.insert("command".into(), json!(command.name()));
    Ok(Raw { command, entries, echo })
}

/// Parses and validates a configuration. `cli` is the command named on the
/// command line, if any.
pub fn parse_config(text: &str, cli: Option<Command>) -> Result<ExperimentConfig> {
    let mut raw = tokenize(text, cli)?;
    let command = raw.command;

    let d = raw.uint("model.d", None)?;
    if d == 0 {
        return Err(range("model.d", "need d >= 1"));
    }
    let sigma = raw.float("model.sigma", None)?;
    if !(sigma > 0.0 && sigma < 2f64.min(d as f64)) {
        return Err(range("model.sigma", format!("need 0 < sigma < min(2, d) = {}, got {sigma}", 2f64.min(d as f64))));
    }
    let alpha = raw.float("model.alpha", Some(4.0 / d as f64))?;
    let coupling = raw.float("model.coupling", Some(1.0))?;
    let params = ModelParams::new(d, sigma, alpha)
        .and_then(|p| p.with_coupling(coupling))
        .map_err(|e| match e {
            nlsp::Error::Param { name, msg } => range(&format!("model.{name}"), msg),
            other => range("model", other.to_string()),
        })?;

    let n = raw.uint("grid.n", Some(1 << 14))?;
    if n < 16 {
        return Err(range("grid.n", format!("need n >= 16, got {n}")));
    }
    let r_max = raw.positive("grid.r_max", Some(40.0))?;
    let res = Resolution { n, r_max };

    let seed = raw.uint("run.seed", Some(0))? as u64;
    let knobs = match command {
        Eig => Knobs::Eig,
        GroundState => {
            let omega = raw.float("run.omega", None)?;
            let solver = match raw.choice("run.solver", &["shooting", "descent", "both"], "both")?.as_str() {
                "shooting" => SolverChoice::Shooting,
                "descent" => SolverChoice::Descent,
                _ => SolverChoice::Both,
            };
            Knobs::GroundState { omega, solver }
        }
        Minimize => Knobs::Minimize {
            a: raw.positive("run.a", None)?,
            max_steps: raw.uint("run.max_steps", Some(100_000))?,
        },
        Classify => {
            let omega = raw.float("run.omega", None)?;
            let profiles: Vec<PathBuf> = raw.strings("run.profile")?.into_iter().map(PathBuf::from).collect();
            let family_size = raw.uint("run.family_size", Some(100))?;
            if profiles.is_empty() && family_size == 0 {
                return Err(range("run.family_size", "need at least one field"));
            }
            Knobs::Classify { omega, profiles, family_size }
        }
        Evolve => {
            let init = match raw.choice("run.init", &["gaussian", "ground_state", "profile"], "gaussian")?.as_str() {
                "gaussian" => Init::Gaussian {
                    amplitude: raw.positive("run.amplitude", Some(1.0))?,
                    width: raw.positive("run.width", Some(1.0))?,
                },
                "ground_state" => Init::GroundState {
                    lambda: raw.positive("run.lambda", Some(1.0))?,
                    mu: raw.positive("run.mu", Some(1.0))?,
                },
                _ => Init::Profile(PathBuf::from(raw.string("run.profile")?.ok_or_else(|| ConfigError::Missing { key: "run.profile".into() })?)),
            };
            let omega = match init {
                Init::GroundState { .. } => Some(raw.float("run.omega", None)?),
                _ => None,
            };
            let perturbation = raw.float("run.perturbation", Some(0.0))?;
            if perturbation < 0.0 {
                return Err(range("run.perturbation", "must be >= 0"));
            }
            let out_every = raw.uint("run.out_every", Some(10))?;
            if out_every == 0 {
                return Err(range("run.out_every", "must be >= 1"));
            }
            let expect = match raw.choice("run.expect", &["none", "blowup", "global"], "none")?.as_str() {
                "blowup" => Expect::BlowUp,
                "global" => Expect::Global,
                _ => Expect::Nothing,
            };
            Knobs::Evolve {
                omega,
                init,
                perturbation,
                dt: raw.positive("run.dt", Some(1e-3))?,
                t_end: raw.positive("run.t_end", Some(10.0))?,
                out_every,
                adaptive: raw.boolean("run.adaptive", true)?,
                expect,
            }
        }
        CriticalSweep => {
            if params.mass_regime() != 0 {
                return Err(range("model.alpha", format!("critical-sweep needs alpha = 4/d = {}", 4.0 / d as f64)));
            }
            let fractions = raw.list("run.a_fractions", &SWEEP_FRACTIONS)?;
            if fractions.len() < 2 {
                return Err(range("run.a_fractions", "need at least two masses"));
            }
            if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0 && f < 1.0)) {
                return Err(range("run.a_fractions", format!("fractions must lie in (0, 1), got {f}")));
            }
            let tau = raw.list("run.tau", &[4.0, 8.0, 16.0])?;
            if let Some(t) = tau.iter().find(|&&t| t < 1.0) {
                return Err(range("run.tau", format!("need tau >= 1, got {t}")));
            }
            let sweep_n = raw.uint("run.sweep_n", Some(1 << 16))?;
            if sweep_n < 16 {
                return Err(range("run.sweep_n", "need at least 16 nodes"));
            }
            Knobs::CriticalSweep {
                fractions,
                sweep_n,
                extent: raw.positive("run.extent", Some(40.0))?,
                tau,
                max_steps: raw.uint("run.max_steps", Some(100_000))?,
            }
        }
        UniquenessCheck => Knobs::UniquenessCheck {
            omega: raw.float("run.omega", None)?,
            corroborate: raw.boolean("run.corroborate", true)?,
        },
        Stability => {
            let delta = raw.float("run.delta", Some(1e-2))?;
            if delta < 0.0 {
                return Err(range("run.delta", "must be >= 0"));
            }
            let trials = raw.uint("run.trials", Some(5))?;
            if trials == 0 {
                return Err(range("run.trials", "need at least one trial"));
            }
            let out_every = raw.uint("run.out_every", Some(50))?;
            if out_every == 0 {
                return Err(range("run.out_every", "must be >= 1"));
            }
            Knobs::Stability {
                a: raw.positive("run.a", None)?,
                delta,
                t_end: raw.positive("run.t_end", Some(20.0))?,
                trials,
                dt: raw.positive("run.dt", Some(2e-3))?,
                out_every,
                tolerance: raw.positive("run.tolerance", Some(0.1))?,
                max_steps: raw.uint("run.max_steps", Some(100_000))?,
            }
        }
    };
    let plots = raw.boolean("output.plots", true)?;
    let tag = raw.string("output.tag")?.unwrap_or_else(|| command.name().to_string());
    raw.echo.insert("output.tag".into(), json!(tag));
    if let Some((key, e)) = raw.entries.iter().next() {
        return Err(ConfigError::Unused { line: e.line, key: key.clone(), command });
    }
    if !matches!(command, Evolve | Stability) {
        raw.echo.remove("run.seed");
    }
    Ok(ExperimentConfig {
        command,
        params,
        res,
        knobs,
        seed,
        plots,
        tag,
        echo: raw.echo,
    })
}

impl ExperimentConfig {
    /// Replaces the seed, as `--seed` does.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if self.echo.contains_key("run.seed") {
            self.echo.insert("run.seed".into(), json!(seed));
        }
        self
    }
}
