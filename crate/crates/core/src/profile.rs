//! Plain-text profile files: a short `key=value` header, then one
//! `r, re, im` row per node with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::RadialField;
use crate::grid::build_grid;

#[derive(Debug, Clone)]
pub struct Profile {
    pub sigma: f64,
    pub alpha: f64,
    pub tag: String,
    pub field: RadialField,
}

pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl Profile {
    pub fn to_text(&self) -> String {
        let g = &self.field.grid;
        let mut s = String::with_capacity(64 * g.n + 128);
        let _ = writeln!(s, "d={}", g.d);
        let _ = writeln!(s, "sigma={}", format_f64(self.sigma));
        let _ = writeln!(s, "alpha={}", format_f64(self.alpha));
        let _ = writeln!(s, "tag={}", self.tag);
        let _ = writeln!(s, "n={}", g.n);
        let _ = writeln!(s, "r_max={}", format_f64(g.r_max));
        for (r, z) in g.r.iter().zip(&self.field.values) {
            let _ = writeln!(s, "{}, {}, {}", format_f64(*r), format_f64(z.re), format_f64(z.im));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Profile> {
        let mut d = None;
        let mut sigma = None;
        let mut alpha = None;
        let mut tag = None;
        let mut n = None;
        let mut r_max = None;
        let mut rows: Vec<(usize, f64, Complex64)> = Vec::new();
        let perr = |line: usize, msg: String| Error::Parse { line, msg };
        let num = |line: usize, s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| perr(line, format!("bad number `{}`: {e}", s.trim())))
        };
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let l = raw.trim();
            if l.is_empty() {
                continue;
            }
            if let Some((key, val)) = l.split_once('=') {
                let val = val.trim();
                match key.trim() {
                    "d" => d = Some(val.parse::<usize>().map_err(|e| perr(line, format!("d: {e}")))?),
                    "sigma" => sigma = Some(num(line, val)?),
                    "alpha" => alpha = Some(num(line, val)?),
                    "tag" => tag = Some(val.to_string()),
                    "n" => n = Some(val.parse::<usize>().map_err(|e| perr(line, format!("n: {e}")))?),
                    "r_max" => r_max = Some(num(line, val)?),
                    other => return Err(perr(line, format!("unknown header key `{other}`"))),
                }
                continue;
            }
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 3 {
                return Err(perr(line, format!("expected 3 columns, found {}", cols.len())));
            }
            rows.push((line, num(line, cols[0])?, Complex64::new(num(line, cols[1])?, num(line, cols[2])?)));
        }
        let missing = |k: &str| perr(0, format!("missing header `{k}`"));
        let d = d.ok_or_else(|| missing("d"))?;
        let n = n.ok_or_else(|| missing("n"))?;
        let r_max = r_max.ok_or_else(|| missing("r_max"))?;
        if rows.len() != n {
            return Err(perr(0, format!("header says n={n} but found {} rows", rows.len())));
        }
        let grid = Arc::new(build_grid(d, r_max, n)?);
        for ((line, r, _), &rg) in rows.iter().zip(&grid.r) {
            if (r - rg).abs() > 1e-12 * rg.max(1.0) {
                return Err(perr(*line, format!("radius {r} does not match grid node {rg}")));
            }
        }
        let field = RadialField::new(grid, rows.into_iter().map(|(_, _, z)| z).collect())?;
        Ok(Profile {
            sigma: sigma.ok_or_else(|| missing("sigma"))?,
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
            tag: tag.unwrap_or_default(),
            field,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Profile> {
        Profile::parse(&std::fs::read_to_string(path)?)
    }
}
