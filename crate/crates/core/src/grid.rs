use serde::Serialize;

use crate::error::{param, Result};

/// Surface area of the unit sphere S^{d-1}; for d = 1 this counts the two
/// endpoints of the unit interval.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        _ => 2.0 * std::f64::consts::PI * sphere_area(d - 2) / (d as f64 - 2.0),
    }
}

/// Cell-centred radial grid on [0, r_max].
///
/// Node i sits at r_i = (i + 1/2) h and owns the shell [i h, (i+1) h]. The
/// weight w_i is the exact volume of that shell, so the constant function
/// integrates to the ball volume up to roundoff. Faces sit at r = i h; face 0
/// carries no flux (even reflection) and the ghost value behind face n is 0.
#[derive(Debug, Clone, Serialize)]
pub struct RadialGrid {
    pub d: usize,
    pub n: usize,
    pub h: f64,
    pub r_max: f64,
    pub r: Vec<f64>,
    pub w: Vec<f64>,
    /// Surface area at face i, i = 0..=n.
    #[serde(skip)]
    pub face_area: Vec<f64>,
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.n == other.n && self.r_max.to_bits() == other.r_max.to_bits()
    }
}

pub fn build_grid(d: usize, r_max: f64, n: usize) -> Result<RadialGrid> {
    if d == 0 {
        return Err(param("d", "dimension must be at least 1"));
    }
    if n < 16 {
        return Err(param("n", format!("need at least 16 nodes, got {n}")));
    }
    if !(r_max > 0.0 && r_max.is_finite()) {
        return Err(param("r_max", format!("need r_max > 0, got {r_max}")));
    }
    let h = r_max / n as f64;
    let area = sphere_area(d);
    let df = d as f64;
    let faces: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let r = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let w = (0..n)
        .map(|i| area / df * (faces[i + 1].powi(d as i32) - faces[i].powi(d as i32)))
        .collect();
    let face_area = faces.iter().map(|&f| area * f.powi(d as i32 - 1)).collect();
    Ok(RadialGrid {
        d,
        n,
        h,
        r_max,
        r,
        w,
        face_area,
    })
}

impl RadialGrid {
    /// Exact cell integrals of |x|^{-s} over each shell. Finite for s < d.
    pub fn potential_weights(&self, s: f64) -> Vec<f64> {
        let e = self.d as f64 - s;
        let c = sphere_area(self.d) / e;
        (0..self.n)
            .map(|i| {
                let lo = i as f64 * self.h;
                let hi = lo + self.h;
                c * (hi.powf(e) - lo.powf(e))
            })
            .collect()
    }

    /// Stiffness matrix of the Dirichlet form sum_f A_f (u_f - u_{f-1})^2 / h as
    /// (diag, off) with off[i] coupling nodes i and i+1.
    pub fn stiffness(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let a = &self.face_area;
        let diag = (0..n)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { a[i] };
                (left + a[i + 1]) / self.h
            })
            .collect();
        let off = (1..n).map(|i| -a[i] / self.h).collect();
        (diag, off)
    }

    /// Quadrature of a radial function given at the nodes.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.r.iter().zip(&self.w).map(|(&r, &w)| w * f(r)).sum()
    }

    pub fn ball_volume(&self) -> f64 {
        sphere_area(self.d) / self.d as f64 * self.r_max.powi(self.d as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn ball_volume_and_interval_length() {
        let g = build_grid(3, 1.0, 10_000).unwrap();
        let v = g.integrate(|_| 1.0);
        assert!((v - 4.0 * PI / 3.0).abs() / (4.0 * PI / 3.0) < 1e-6);
        let g = build_grid(1, 7.5, 100).unwrap();
        assert!((g.integrate(|_| 1.0) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn second_moment_in_the_plane() {
        let g = build_grid(2, 1.0, 10_000).unwrap();
        let v = g.integrate(|r| r * r);
        assert!((v - PI / 2.0).abs() / (PI / 2.0) < 1e-5);
    }

    #[test]
    fn polynomial_moments_up_to_two() {
        for d in 1..=4 {
            let g = build_grid(d, 2.0, 10_000).unwrap();
            for k in 0..=2 {
                let exact = sphere_area(d) * 2f64.powi(d as i32 + k) / (d as f64 + k as f64);
                let got = g.integrate(|r| r.powi(k));
                assert!((got - exact).abs() / exact < 1e-5, "d={d} k={k}");
            }
        }
    }

    #[test]
    fn potential_weights_sum_to_exact_integral() {
        let g = build_grid(3, 2.0, 64).unwrap();
        let s: f64 = g.potential_weights(1.0).iter().sum();
        assert!((s - 4.0 * PI * 2.0 * 2.0 / 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(build_grid(3, 1.0, 15).is_err());
        assert!(build_grid(3, 0.0, 100).is_err());
        assert!(build_grid(3, -1.0, 100).is_err());
    }

    #[test]
    fn weights_positive() {
        let g = build_grid(5, 3.0, 256).unwrap();
        assert!(g.w.iter().all(|&w| w > 0.0));
    }
}
