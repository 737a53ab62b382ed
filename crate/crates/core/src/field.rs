use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{param, Error, Result};
use crate::grid::RadialGrid;

/// Complex radial profile sampled at the nodes of a shared grid.
#[derive(Debug, Clone)]
pub struct RadialField {
    pub grid: Arc<RadialGrid>,
    pub values: Vec<Complex64>,
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.n
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(param("values", "field contains non-finite entries"));
        }
        Ok(RadialField { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let n = grid.n;
        RadialField {
            grid,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn from_real(grid: Arc<RadialGrid>, re: &[f64]) -> Result<Self> {
        Self::new(grid, re.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.r.iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn from_real_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, |r| Complex64::new(f(r), 0.0))
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn same_grid(&self, other: &RadialField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(d={}, n={}, r_max={}) vs (d={}, n={}, r_max={})",
                self.grid.d, self.grid.n, self.grid.r_max, other.grid.d, other.grid.n, other.grid.r_max
            )))
        }
    }

    pub fn scaled(&self, s: f64) -> RadialField {
        RadialField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z * s).collect(),
        }
    }

    pub fn rotated(&self, theta: f64) -> RadialField {
        let e = Complex64::from_polar(1.0, theta);
        RadialField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z * e).collect(),
        }
    }

    pub fn sub(&self, other: &RadialField) -> Result<RadialField> {
        self.same_grid(other)?;
        Ok(RadialField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &RadialField) -> Result<RadialField> {
        self.same_grid(other)?;
        Ok(RadialField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    /// Cubic local interpolation at radius r, using even reflection through
    /// the origin and zero beyond r_max.
    pub fn sample(&self, r: f64) -> Complex64 {
        interp_cubic(&self.grid, &self.values, r)
    }

    /// Resample onto another grid via `self(map(r))` with cubic interpolation.
    pub fn resample(&self, target: Arc<RadialGrid>, map: impl Fn(f64) -> f64) -> RadialField {
        let values = target.r.iter().map(|&r| self.sample(map(r))).collect();
        RadialField {
            grid: target,
            values,
        }
    }
}

pub(crate) fn interp_cubic(grid: &RadialGrid, v: &[Complex64], r: f64) -> Complex64 {
    let r = r.abs();
    if r > grid.r_max {
        return Complex64::new(0.0, 0.0);
    }
    let n = grid.n as i64;
    let s = r / grid.h - 0.5;
    let i = s.floor() as i64;
    let t = s - i as f64;
    let at = |j: i64| -> Complex64 {
        let j = if j < 0 { -j - 1 } else { j };
        if j >= n {
            Complex64::new(0.0, 0.0)
        } else {
            v[j as usize]
        }
    };
    let (pm, p0, p1, p2) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    // Lagrange weights on nodes -1, 0, 1, 2.
    let wm = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
    pm * wm + p0 * w0 + p1 * w1 + p2 * w2
}
