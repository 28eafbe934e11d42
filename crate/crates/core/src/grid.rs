//! Time grids and the finite-difference / quadrature rules used on sampled
//! series. All rules are local Lagrange polynomials: 5-point stencils for
//! derivatives, 4-point cubics for interpolation and cumulative integrals.
//! They work unchanged on nonuniform grids and shift to one-sided stencils
//! at the ends.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing sample points starting at `tau = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        if points[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("grid must start at 0, starts at {}", points[0])));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite grid point".into()));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "grid not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(Self { points })
    }

    /// `steps + 1` equally spaced points on `[0, t_max]`.
    pub fn uniform(t_max: f64, steps: usize) -> Result<Self> {
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        if steps < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 steps, got {steps}")));
        }
        let dt = t_max / steps as f64;
        let mut points: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
        points[steps] = t_max;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    pub fn max_step(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn check_max_step(&self, bound: f64) -> Result<()> {
        let step = self.max_step();
        if step > bound {
            return Err(Error::InvalidGrid(format!("max step {step} exceeds bound {bound}")));
        }
        Ok(())
    }

    /// Grid with every interval split into `factor` equal pieces.
    pub fn refined(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let mut points = Vec::with_capacity((self.len() - 1) * factor + 1);
        for w in self.points.windows(2) {
            let h = (w[1] - w[0]) / factor as f64;
            for j in 0..factor {
                points.push(w[0] + j as f64 * h);
            }
        }
        points.push(self.t_max());
        Self { points }
    }

    /// Index of the interval `[t_k, t_{k+1}]` containing `tau`, clamped to
    /// the grid.
    pub fn interval_of(&self, tau: f64) -> usize {
        let n = self.points.len();
        match self.points.binary_search_by(|p| p.total_cmp(&tau)) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        }
    }

    /// Index range `[lo, hi]` of grid points inside `[a, b]`.
    pub fn window_indices(&self, a: f64, b: f64) -> Result<(usize, usize)> {
        let lo = self.points.iter().position(|&t| t >= a - 1e-12);
        let hi = self.points.iter().rposition(|&t| t <= b + 1e-12);
        match (lo, hi) {
            (Some(lo), Some(hi)) if hi > lo => Ok((lo, hi)),
            _ => Err(Error::InvalidGrid(format!("window [{a}, {b}] contains fewer than 2 grid points"))),
        }
    }
}

/// Fornberg's recursion: weights `w[j][d]` such that the `d`-th derivative
/// at `z` of the polynomial through `(xs[j], f_j)` is `sum_j w[j][d] f_j`.
pub fn fornberg_weights(z: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; max_order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

fn stencil_start(center: usize, len: usize, width: usize) -> usize {
    let width = width.min(len);
    center.saturating_sub(width / 2).min(len - width)
}

/// Values that can be combined linearly with real weights.
pub trait Sample: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {}
impl<T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>> Sample for T {}

fn combine<T: Sample>(values: &[T], start: usize, weights: impl Iterator<Item = f64>) -> T {
    weights
        .enumerate()
        .fold(T::default(), |acc, (j, w)| acc + values[start + j] * w)
}

/// First derivative at every grid point (5-point stencils).
pub fn differentiate<T: Sample>(grid: &[f64], values: &[T]) -> Vec<T> {
    assert_eq!(grid.len(), values.len());
    let n = grid.len();
    (0..n)
        .map(|k| {
            let start = stencil_start(k, n, 5);
            let width = 5.min(n);
            let w = fornberg_weights(grid[k], &grid[start..start + width], 1);
            combine(values, start, w.iter().map(|row| row[1]))
        })
        .collect()
}

/// Interpolation weights at `tau`: returns `(start, weights)` for a 4-point
/// cubic through the interval containing `tau`.
pub fn interpolation_weights(grid: &[f64], tau: f64) -> (usize, [f64; 4]) {
    let n = grid.len();
    let k = match grid.binary_search_by(|p| p.total_cmp(&tau)) {
        Ok(k) => k.min(n - 2),
        Err(k) => k.saturating_sub(1).min(n - 2),
    };
    let width = 4.min(n);
    let start = k.saturating_sub(1).min(n - width);
    let w = fornberg_weights(tau, &grid[start..start + width], 0);
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(&w) {
        *o = row[0];
    }
    (start, out)
}

pub fn interpolate<T: Sample>(grid: &[f64], values: &[T], tau: f64) -> T {
    let (start, w) = interpolation_weights(grid, tau);
    let width = 4.min(grid.len());
    combine(values, start, w.into_iter().take(width))
}

/// `F(t_k) = int_0^{t_k} f`, integrating the local cubic interpolant exactly
/// on each interval (two-point Gauss-Legendre).
pub fn cumulative_integral<T: Sample>(grid: &[f64], values: &[T]) -> Vec<T> {
    assert_eq!(grid.len(), values.len());
    let n = grid.len();
    let mut out = Vec::with_capacity(n);
    let mut acc = T::default();
    out.push(acc);
    let g = 0.5 / 3f64.sqrt();
    for k in 0..n - 1 {
        let (a, b) = (grid[k], grid[k + 1]);
        let mid = 0.5 * (a + b);
        let h = b - a;
        let width = 4.min(n);
        let start = k.saturating_sub(1).min(n - width);
        let nodes = &grid[start..start + width];
        let mut piece = T::default();
        for x in [mid - g * h, mid + g * h] {
            let w = fornberg_weights(x, nodes, 0);
            piece = piece + combine(values, start, w.iter().map(|r| r[0])) * (0.5 * h);
        }
        acc = acc + piece;
        out.push(acc);
    }
    out
}

/// Composite trapezoid cumulative integral.
pub fn cumulative_trapezoid<T: Sample>(grid: &[f64], values: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = T::default();
    out.push(acc);
    for k in 0..grid.len() - 1 {
        acc = acc + (values[k] + values[k + 1]) * (0.5 * (grid[k + 1] - grid[k]));
        out.push(acc);
    }
    out
}

/// Contiguous `[start, end]` index runs where `mask` is true.
pub fn runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((s, k - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, mask.len() - 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn jittered(n: usize, t_max: f64) -> Vec<f64> {
        let h = t_max / n as f64;
        (0..=n)
            .map(|k| {
                let t = k as f64 * h;
                if k == 0 || k == n {
                    t
                } else {
                    t + 0.3 * h * ((k as f64) * 1.7).sin()
                }
            })
            .collect()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0, 2.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::uniform(0.0, 10).is_err());
        let g = TimeGrid::uniform(2.0, 4).unwrap();
        assert_eq!(g.points(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.refined(2).len(), 9);
        assert_eq!(g.interval_of(0.75), 1);
        assert_eq!(g.interval_of(2.0), 3);
        assert!(g.check_max_step(0.4).is_err());
    }

    #[test]
    fn derivative_is_fourth_order_on_nonuniform_grid() {
        let grid = jittered(400, 3.0);
        let vals: Vec<f64> = grid.iter().map(|t| (1.3 * t).sin()).collect();
        let d = differentiate(&grid, &vals);
        let err = grid
            .iter()
            .zip(&d)
            .map(|(t, v)| (v - 1.3 * (1.3 * t).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "err = {err}");
    }

    #[test]
    fn cumulative_integral_of_complex_phase() {
        let grid = jittered(500, 4.0);
        let vals: Vec<Complex64> = grid.iter().map(|t| Complex64::from_polar(1.0, 2.0 * t)).collect();
        let f = cumulative_integral(&grid, &vals);
        for (t, v) in grid.iter().zip(&f) {
            let exact = (Complex64::from_polar(1.0, 2.0 * t) - 1.0) / Complex64::new(0.0, 2.0);
            assert!((v - exact).norm() < 5e-9, "err {}", (v - exact).norm());
        }
    }

    #[test]
    fn cubic_interpolation_reproduces_cubics() {
        let grid = jittered(20, 2.0);
        let p = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t * t;
        let vals: Vec<f64> = grid.iter().map(|&t| p(t)).collect();
        for tau in [0.0, 0.05, 0.77, 1.31, 1.999, 2.0] {
            assert!((interpolate(&grid, &vals, tau) - p(tau)).abs() < 1e-12);
        }
    }

    #[test]
    fn run_detection() {
        assert_eq!(runs(&[false, true, true, false, true]), vec![(1, 2), (4, 4)]);
        assert!(runs(&[false, false]).is_empty());
    }
}
