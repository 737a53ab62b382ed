//! Run directory: CSV tables, profiles, the JSON summary and the FAILED
//! marker. Numbers go out with 17 significant digits.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nlsp::profile::{format_f64, Profile};
use nlsp::{ModelParams, RadialField};

pub const FAILED: &str = "FAILED";

/// One CSV cell.
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    B(bool),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::U(x as u64)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::U(x)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format_f64(*x),
            Cell::U(x) => x.to_string(),
            Cell::B(x) => x.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::from($x)),*] };
}

pub struct OutDir {
    pub root: PathBuf,
    /// Files written so far, relative to `root`.
    pub written: Vec<String>,
}

impl OutDir {
    /// Creates the directory and clears a FAILED marker left by an earlier run.
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        let marker = root.join(FAILED);
        if marker.exists() {
            fs::remove_file(marker)?;
        }
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, text: &str) -> io::Result<PathBuf> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&p, text)?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(p)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> io::Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        self.write(name, &String::from_utf8(bytes).expect("CSV of UTF-8 cells"))
    }

    pub fn profile(&mut self, name: &str, p: &ModelParams, tag: &str, field: &RadialField) -> io::Result<PathBuf> {
        let prof = Profile {
            sigma: p.sigma(),
            alpha: p.alpha(),
            tag: tag.to_string(),
            field: field.clone(),
        };
        self.write(name, &prof.to_text())
    }

    pub fn mark_failed(&mut self, reason: &str) -> io::Result<PathBuf> {
        self.write(FAILED, &format!("{reason}\n"))
    }
}
