//! θ-scheme finite differences for `D_t v = A(t)v` with zero Dirichlet data
//! on the box `[−R, R]^d`, `d ∈ {1, 2}`.

use std::fmt::Write as _;

use crate::error::{Error, Result};

mod evolve;
pub(crate) mod operator;

pub use evolve::{
    convolve_source, dirichlet_step, propagate_linear, propagate_tapered, truncation_bound,
    LinearRun, TruncationBound, MAX_TRUNCATION_RADIUS,
};
pub use operator::{theta_step, StepDiagnostics};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    d: usize,
    radius: f64,
    n: usize,
    h: f64,
}

impl Grid {
    /// `n` points per axis, `n ≥ 5` and odd.
    pub fn new(d: usize, radius: f64, n: usize) -> Result<Self> {
        if !(d == 1 || d == 2) {
            return Err(Error::Unsupported(format!("grid backend in dimension {d} (supported: 1, 2)")));
        }
        if n < 5 || n % 2 == 0 {
            return Err(Error::InvalidInput(format!("points per axis must be odd and ≥ 5, got {n}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("grid radius must be positive, got {radius}")));
        }
        Ok(Self {
            d,
            radius,
            n,
            h: 2.0 * radius / (n - 1) as f64,
        })
    }

    /// Odd point count giving spacing at most `h`.
    pub fn with_spacing(d: usize, radius: f64, h: f64) -> Result<Self> {
        let mut n = (2.0 * radius / h).ceil() as usize + 1;
        if n % 2 == 0 {
            n += 1;
        }
        Self::new(d, radius, n.max(5))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, k: usize) -> f64 {
        if k == self.n - 1 {
            self.radius
        } else {
            -self.radius + k as f64 * self.h
        }
    }

    /// Axis indices of flat index `idx` (axis 0 fastest).
    pub fn axes(&self, idx: usize) -> [usize; 2] {
        [idx % self.n, idx / self.n]
    }

    pub fn point(&self, idx: usize, x: &mut [f64]) {
        let a = self.axes(idx);
        for (k, xk) in x.iter_mut().enumerate().take(self.d) {
            *xk = self.coord(a[k]);
        }
    }

    pub fn point_vec(&self, idx: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.d];
        self.point(idx, &mut x);
        x
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let a = self.axes(idx);
        (0..self.d).any(|k| a[k] == 0 || a[k] == self.n - 1)
    }

    /// Flat indices with `|x|_2 ≤ r`.
    pub fn indices_within(&self, r: f64) -> Vec<usize> {
        let mut x = vec![0.0; self.d];
        (0..self.len())
            .filter(|&i| {
                self.point(i, &mut x);
                x.iter().map(|v| v * v).sum::<f64>() <= r * r * (1.0 + 1e-12)
            })
            .collect()
    }
}

/// Quintic smoothstep on `[0, 1]`.
fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 - 15.0 * u + 6.0 * u * u)
}

/// Cutoff equal to 1 on `[−R+1, R−1]^d`, 0 on the boundary, quintic in the
/// outer unit ring of each axis.
pub fn taper(grid: &Grid, x: &[f64]) -> f64 {
    let width = 1.0_f64.min(grid.radius());
    x.iter()
        .map(|&xi| smoothstep((grid.radius() - xi.abs()) / width))
        .product()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
    /// Boundary ring held at zero.
    dirichlet: bool,
}

impl GridField {
    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            dirichlet: true,
        }
    }

    /// Samples `f` and zeroes the boundary ring.
    pub fn from_fn(grid: Grid, f: &dyn Fn(&[f64]) -> f64) -> Result<Self> {
        let mut x = vec![0.0; grid.dim()];
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            if grid.is_boundary(i) {
                values.push(0.0);
                continue;
            }
            grid.point(i, &mut x);
            let v = f(&x);
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite sample {v} at x = {x:?}")));
            }
            values.push(v);
        }
        Ok(Self {
            grid,
            values,
            dirichlet: true,
        })
    }

    /// `f · taper`, see [`taper`].
    pub fn tapered(grid: Grid, f: &dyn Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_fn(grid, &|x| f(x) * taper(&grid, x))
    }

    /// Wraps raw values; with `dirichlet` the boundary ring must be zero.
    pub fn from_values(grid: Grid, values: Vec<f64>, dirichlet: bool) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite grid value {v}")));
        }
        if dirichlet && (0..grid.len()).any(|i| grid.is_boundary(i) && values[i] != 0.0) {
            return Err(Error::InvalidInput("Dirichlet field with nonzero boundary value".into()));
        }
        Ok(Self {
            grid,
            values,
            dirichlet,
        })
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        Self {
            grid,
            values,
            dirichlet: true,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_dirichlet(&self) -> bool {
        self.dirichlet
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    /// Sup norm over grid points with `|x| ≤ r`.
    pub fn sup_norm_within(&self, r: f64) -> f64 {
        self.grid
            .indices_within(r)
            .into_iter()
            .fold(0.0_f64, |a, i| a.max(self.values[i].abs()))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        let grid = self.grid;
        let values = (0..grid.len())
            .map(|i| {
                if self.dirichlet && grid.is_boundary(i) {
                    0.0
                } else {
                    f(self.values[i])
                }
            })
            .collect();
        GridField {
            grid,
            values,
            dirichlet: self.dirichlet,
        }
    }

    /// `self + a·other` on the same grid.
    pub fn axpy(&self, a: f64, other: &GridField) -> Result<GridField> {
        if self.grid != other.grid {
            return Err(Error::InvalidInput("fields live on different grids".into()));
        }
        Ok(GridField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect(),
            dirichlet: self.dirichlet && other.dirichlet,
        })
    }

    /// Max of `|self − other|` over points with `|x| ≤ r`.
    pub fn max_diff_within(&self, other: &GridField, r: f64) -> f64 {
        self.grid
            .indices_within(r)
            .into_iter()
            .fold(0.0_f64, |a, i| a.max((self.values[i] - other.values[i]).abs()))
    }

    /// Tensor 4-point Lagrange interpolation.
    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let g = &self.grid;
        if x.len() != g.dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| v.abs() > g.radius() * (1.0 + 1e-12)) {
            return Err(Error::InvalidInput(format!("point {x:?} outside the grid box")));
        }
        let mut base = [0usize; 2];
        let mut w = [[0.0; 4]; 2];
        for k in 0..g.dim() {
            let u = (x[k] + g.radius()) / g.h();
            let i0 = (u.floor() as isize - 1).clamp(0, g.n() as isize - 4) as usize;
            base[k] = i0;
            let s = u - i0 as f64;
            let nodes = [0.0, 1.0, 2.0, 3.0];
            for a in 0..4 {
                let mut l = 1.0;
                for b in 0..4 {
                    if a != b {
                        l *= (s - nodes[b]) / (nodes[a] - nodes[b]);
                    }
                }
                w[k][a] = l;
            }
        }
        let n = g.n();
        Ok(match g.dim() {
            1 => (0..4).map(|a| w[0][a] * self.values[base[0] + a]).sum(),
            _ => {
                let mut acc = 0.0;
                for b in 0..4 {
                    for a in 0..4 {
                        acc += w[0][a] * w[1][b] * self.values[(base[1] + b) * n + base[0] + a];
                    }
                }
                acc
            }
        })
    }

    /// CSV block: first line axis coordinates, then values (one line in
    /// 1-d; one line per axis-1 coordinate in 2-d).
    pub fn to_csv(&self) -> String {
        let g = &self.grid;
        let n = g.n();
        let mut s = String::new();
        let coords: Vec<String> = (0..n).map(|k| format!("{:.12e}", g.coord(k))).collect();
        let _ = writeln!(s, "{}", coords.join(","));
        let rows = if g.dim() == 1 { 1 } else { n };
        for j in 0..rows {
            let row: Vec<String> = (0..n).map(|i| format!("{:.12e}", self.values[j * n + i])).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Central differences inside, one-sided second order on the boundary ring.
pub fn grid_gradient(field: &GridField) -> Vec<GridField> {
    let g = *field.grid();
    let n = g.n();
    let h = g.h();
    let v = field.values();
    (0..g.dim())
        .map(|axis| {
            let stride = if axis == 0 { 1 } else { n };
            let values = (0..g.len())
                .map(|idx| {
                    let k = g.axes(idx)[axis];
                    if k == 0 {
                        (-3.0 * v[idx] + 4.0 * v[idx + stride] - v[idx + 2 * stride]) / (2.0 * h)
                    } else if k == n - 1 {
                        (3.0 * v[idx] - 4.0 * v[idx - stride] + v[idx - 2 * stride]) / (2.0 * h)
                    } else {
                        (v[idx + stride] - v[idx - stride]) / (2.0 * h)
                    }
                })
                .collect();
            GridField {
                grid: g,
                values,
                dirichlet: false,
            }
        })
        .collect()
}

/// Time discretization and linear-solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    /// `1/2`: trapezoidal, `1`: implicit Euler.
    pub theta: f64,
    pub dt: f64,
    /// Relative residual target of the linear solve.
    pub solve_tol: f64,
    pub max_solver_iters: usize,
    /// Warn when `dt·|b|/h` exceeds this.
    pub advection_threshold: f64,
    /// Tail mass accepted by the truncation check.
    pub tail_epsilon: f64,
}

impl SchemeConfig {
    /// Trapezoidal with `dt = h`.
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            theta: 0.5,
            dt: grid.h(),
            solve_tol: 1e-12,
            max_solver_iters: 4000,
            advection_threshold: 10.0,
            tail_epsilon: 0.5,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.theta) {
            return Err(Error::InvalidInput(format!("theta must lie in [1/2, 1], got {}", self.theta)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.solve_tol > 0.0) {
            return Err(Error::InvalidInput("solver tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Uniform steps covering `[s, t]` with step at most `dt`.
    pub fn steps_for(&self, s: f64, t: f64) -> (usize, f64) {
        let n = ((t - s) / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, (t - s) / n as f64)
    }
}
