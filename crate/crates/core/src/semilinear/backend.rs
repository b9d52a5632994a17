//! Linear one-step propagators used inside the Picard iteration.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::grid::{taper, Grid, GridField, SchemeConfig};
use crate::grid::operator::Marcher;
use crate::ou::Propagator;
use crate::problem::ProblemSpec;
use crate::quadrature::gauss_hermite_standard;

/// Fixed 1-d lattice on which the closed-form backend stores iterates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuLattice {
    pub half_width: f64,
    pub points: usize,
    /// Gauss–Hermite nodes per one-step propagation.
    pub order: usize,
}

impl Default for OuLattice {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            points: 401,
            order: 20,
        }
    }
}

impl OuLattice {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points)
            .map(|i| {
                if i == self.points - 1 {
                    self.half_width
                } else {
                    -self.half_width + i as f64 * h
                }
            })
            .collect()
    }
}

/// Second derivatives of the natural cubic spline through `y` on a uniform
/// mesh of spacing `h`.
pub(crate) fn spline_second_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on 1·M_{i-1} + 4·M_i + 1·M_{i+1} = r_i, interior only.
    let k = n - 2;
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    let scale = 6.0 / (h * h);
    for i in 0..k {
        let r = scale * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
        let denom = 4.0 - if i > 0 { c[i - 1] } else { 0.0 };
        c[i] = 1.0 / denom;
        d[i] = (r - if i > 0 { d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..k).rev() {
        let next = if i + 1 < k { m[i + 2] } else { 0.0 };
        m[i + 1] = d[i] - c[i] * next;
    }
    m
}

/// Natural spline evaluation with constant extrapolation.
pub(crate) fn spline_eval(x0: f64, h: f64, y: &[f64], m: &[f64], x: f64) -> f64 {
    let n = y.len();
    let u = (x - x0) / h;
    if u <= 0.0 {
        return y[0];
    }
    if u >= (n - 1) as f64 {
        return y[n - 1];
    }
    let j = (u.floor() as usize).min(n - 2);
    let t = u - j as f64;
    spline_cell(h, y, m, j, t)
}

#[inline]
fn spline_cell(h: f64, y: &[f64], m: &[f64], j: usize, t: f64) -> f64 {
    let s = 1.0 - t;
    s * y[j] + t * y[j + 1] + h * h / 6.0 * ((s * s * s - s) * m[j] + (t * t * t - t) * m[j + 1])
}

/// Location of a quadrature point: cell index and offset, or a clamp to an end.
#[derive(Clone, Copy)]
pub(crate) enum Loc {
    Inside(u32, f64),
    Left,
    Right,
}

pub(crate) struct Kernel {
    /// `points × order` locations, row-major.
    locs: Vec<Loc>,
}

pub(crate) enum Stepper<'a> {
    Ou {
        spec: &'a ProblemSpec,
        lattice: OuLattice,
        coords: Vec<f64>,
        z: Vec<f64>,
        w: Vec<f64>,
        cache: HashMap<(u64, u64), Kernel>,
    },
    Grid {
        grid: Grid,
        marcher: Marcher<'a>,
    },
}

impl<'a> Stepper<'a> {
    pub fn ou(spec: &'a ProblemSpec, lattice: OuLattice) -> Result<Self> {
        spec.ou()?;
        if spec.dim() != 1 {
            return Err(Error::Unsupported(format!(
                "closed-form semilinear backend in dimension {} (supported: 1)",
                spec.dim()
            )));
        }
        if lattice.points < 5 || lattice.order == 0 || !(lattice.half_width > 0.0) {
            return Err(Error::InvalidInput(format!("invalid lattice {lattice:?}")));
        }
        let (z, w) = gauss_hermite_standard(lattice.order);
        Ok(Stepper::Ou {
            spec,
            coords: lattice.coords(),
            lattice,
            z,
            w,
            cache: HashMap::new(),
        })
    }

    pub fn grid(spec: &'a ProblemSpec, grid: Grid, scheme: SchemeConfig) -> Result<Self> {
        Ok(Stepper::Grid {
            grid,
            marcher: Marcher::new(spec, grid, scheme)?,
        })
    }

    /// Nodes whose values are unknowns (grid boundary excluded).
    pub fn is_free(&self, i: usize) -> bool {
        match self {
            Stepper::Ou { .. } => true,
            Stepper::Grid { grid, .. } => !grid.is_boundary(i),
        }
    }

    pub fn sample(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        match self {
            Stepper::Ou { coords, .. } => coords
                .iter()
                .map(|&x| {
                    let v = f(&[x]);
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(Error::InvalidInput(format!("initial datum is {v} at x = {x}")))
                    }
                })
                .collect(),
            Stepper::Grid { grid, .. } => Ok(GridField::from_fn(*grid, &|x| f(x) * taper(grid, x))?.into_values()),
        }
    }

    pub fn begin_slab(&mut self) {
        if let Stepper::Ou { cache, .. } = self {
            cache.clear();
        }
    }

    /// `G(t1, t0)` applied to node values.
    pub fn step(&mut self, t0: f64, t1: f64, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            Stepper::Grid { marcher, .. } => marcher.step(v, t0, t1 - t0, None),
            Stepper::Ou {
                spec,
                lattice,
                coords,
                z,
                w,
                cache,
            } => {
                let key = (t0.to_bits(), t1.to_bits());
                if !cache.contains_key(&key) {
                    let p = Propagator::new(spec.ou()?, t0, t1)?;
                    let (a, m, var) = (p.u[(0, 0)], p.mshift[0], p.sigma[(0, 0)].max(0.0));
                    let sd = var.sqrt();
                    let h = lattice.spacing();
                    let x0 = -lattice.half_width;
                    let n = coords.len();
                    let mut locs = Vec::with_capacity(n * z.len());
                    for &x in coords.iter() {
                        let mean = a * x + m;
                        for &zk in z.iter() {
                            let u = (mean + sd * zk - x0) / h;
                            locs.push(if u <= 0.0 {
                                Loc::Left
                            } else if u >= (n - 1) as f64 {
                                Loc::Right
                            } else {
                                let j = (u.floor() as usize).min(n - 2);
                                Loc::Inside(j as u32, u - j as f64)
                            });
                        }
                    }
                    cache.insert(key, Kernel { locs });
                }
                let kernel = &cache[&key];
                let h = lattice.spacing();
                let m2 = spline_second_derivatives(v, h);
                let q = z.len();
                let n = v.len();
                Ok((0..n)
                    .map(|i| {
                        let row = &kernel.locs[i * q..(i + 1) * q];
                        let mut acc = 0.0;
                        for (loc, wk) in row.iter().zip(w.iter()) {
                            acc += wk * match *loc {
                                Loc::Left => v[0],
                                Loc::Right => v[n - 1],
                                Loc::Inside(j, t) => spline_cell(h, v, &m2, j as usize, t),
                            };
                        }
                        acc
                    })
                    .collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubic_interior_and_constants() {
        let h = 0.1;
        let y: Vec<f64> = (0..41).map(|i| 2.0 + 0.0 * i as f64).collect();
        let m = spline_second_derivatives(&y, h);
        assert!(m.iter().all(|v| v.abs() < 1e-12));
        assert_eq!(spline_eval(0.0, h, &y, &m, 1.234), 2.0);
        let s: Vec<f64> = (0..201).map(|i| (i as f64 * 0.05).sin()).collect();
        let ms = spline_second_derivatives(&s, 0.05);
        let e = (spline_eval(0.0, 0.05, &s, &ms, 5.0123) - 5.0123f64.sin()).abs();
        assert!(e < 1e-6, "{e}");
        assert_eq!(spline_eval(0.0, 0.05, &s, &ms, -3.0), s[0]);
    }
}
