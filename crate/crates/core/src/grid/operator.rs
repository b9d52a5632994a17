use super::{Grid, SchemeConfig};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepDiagnostics {
    pub steps: usize,
    /// Largest solver iteration count over the steps.
    pub iterations: usize,
    /// Largest final relative residual over the steps.
    pub residual: f64,
    /// Largest `dt·|b|/h` seen.
    pub max_advection: f64,
    pub warnings: Vec<String>,
    /// How far the unclipped result left `[min(0, min f), max(0, max f)]`.
    pub clip_excess: f64,
}

/// Stencil form of `A_h(t)`; rows of boundary points are zero.
pub(crate) struct Assembled {
    pub t: f64,
    pub offsets: Vec<isize>,
    /// `coef[p * offsets.len() + k]` multiplies `v[p + offsets[k]]`.
    pub coef: Vec<f64>,
    pub center: usize,
    pub max_speed: f64,
    pub dominance_violated: bool,
}

pub(crate) fn assemble(spec: &ProblemSpec, grid: &Grid, t: f64) -> Result<Assembled> {
    let d = grid.dim();
    if spec.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: spec.dim(),
            got: d,
        });
    }
    let n = grid.n() as isize;
    let h = grid.h();
    let (offsets, center): (Vec<isize>, usize) = if d == 1 {
        (vec![-1, 0, 1], 1)
    } else {
        let mut o = Vec::with_capacity(9);
        for dj in [-1isize, 0, 1] {
            for di in [-1isize, 0, 1] {
                o.push(di + dj * n);
            }
        }
        (o, 4)
    };
    let no = offsets.len();
    let mut coef = vec![0.0; grid.len() * no];
    let mut q = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut max_speed = 0.0_f64;
    let mut dominance_violated = false;
    let ih2 = 1.0 / (h * h);
    let i2h = 0.5 / h;
    for p in 0..grid.len() {
        if grid.is_boundary(p) {
            continue;
        }
        grid.point(p, &mut x);
        spec.coefficients.q_into(t, &x, &mut q);
        spec.coefficients.b_into(t, &x, &mut b);
        if q.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t,
                what: format!("coefficients at x = {x:?}"),
            });
        }
        let c = &mut coef[p * no..(p + 1) * no];
        let speed = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        max_speed = max_speed.max(speed);
        if d == 1 {
            c[0] = q[0] * ih2 - b[0] * i2h;
            c[1] = -2.0 * q[0] * ih2;
            c[2] = q[0] * ih2 + b[0] * i2h;
        } else {
            let (q11, q12, q22) = (q[0], q[1], q[3]);
            if 2.0 * q12.abs() > q11 + q22 {
                dominance_violated = true;
            }
            // index = (di + 1) + 3 (dj + 1)
            c[3] += q11 * ih2 - b[0] * i2h;
            c[5] += q11 * ih2 + b[0] * i2h;
            c[1] += q22 * ih2 - b[1] * i2h;
            c[7] += q22 * ih2 + b[1] * i2h;
            c[4] += -2.0 * (q11 + q22) * ih2;
            let cross = 2.0 * q12 * 0.25 * ih2;
            c[8] += cross;
            c[0] += cross;
            c[6] -= cross;
            c[2] -= cross;
        }
    }
    Ok(Assembled {
        t,
        offsets,
        coef,
        center,
        max_speed,
        dominance_violated,
    })
}

impl Assembled {
    /// `out = v + s·A v` on interior rows, `out = v` on boundary rows.
    fn shifted_apply(&self, grid: &Grid, s: f64, v: &[f64], out: &mut [f64]) {
        let no = self.offsets.len();
        for p in 0..v.len() {
            if grid.is_boundary(p) {
                out[p] = v[p];
                continue;
            }
            let c = &self.coef[p * no..(p + 1) * no];
            let mut acc = 0.0;
            for (k, &o) in self.offsets.iter().enumerate() {
                acc += c[k] * v[(p as isize + o) as usize];
            }
            out[p] = v[p] + s * acc;
        }
    }

    fn shifted_diag(&self, grid: &Grid, s: f64) -> Vec<f64> {
        let no = self.offsets.len();
        (0..grid.len())
            .map(|p| {
                if grid.is_boundary(p) {
                    1.0
                } else {
                    1.0 + s * self.coef[p * no + self.center]
                }
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned BiCGSTAB. Returns `(iterations, relative residual)`.
pub(crate) fn bicgstab(
    apply: &dyn Fn(&[f64], &mut [f64]),
    diag: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iters: usize,
) -> Result<(usize, f64)> {
    let n = rhs.len();
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok((0, 0.0));
    }
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    let mut rel = norm(&r) / bnorm;
    if rel <= tol {
        return Ok((0, rel));
    }
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut tv = vec![0.0; n];
    for it in 1..=max_iters {
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // Restart on breakdown.
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.fill(0.0);
            p.fill(0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = inv[i] * p[i];
        }
        apply(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok((it, norm(&s) / bnorm));
        }
        for i in 0..n {
            z[i] = inv[i] * s[i];
        }
        apply(&z, &mut tv);
        let tt = dot(&tv, &tv);
        omega = if tt > 0.0 { dot(&tv, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * tv[i];
        }
        rel = norm(&r) / bnorm;
        if !rel.is_finite() {
            break;
        }
        if rel <= tol {
            return Ok((it, rel));
        }
    }
    Err(Error::SolverDivergence {
        residual: rel,
        iterations: max_iters,
    })
}

/// Marches the θ-scheme, reusing the operator assembled at the end of the
/// previous step as the start operator of the next one.
pub(crate) struct Marcher<'a> {
    spec: &'a ProblemSpec,
    grid: Grid,
    cfg: SchemeConfig,
    cached: Option<Assembled>,
    pub diag: StepDiagnostics,
}

impl<'a> Marcher<'a> {
    pub fn new(spec: &'a ProblemSpec, grid: Grid, cfg: SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        if spec.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: spec.dim(),
                got: grid.dim(),
            });
        }
        Ok(Self {
            spec,
            grid,
            cfg,
            cached: None,
            diag: StepDiagnostics::default(),
        })
    }

    fn operator_at(&mut self, t: f64) -> Result<Assembled> {
        match self.cached.take() {
            Some(a) if a.t == t => Ok(a),
            _ => assemble(self.spec, &self.grid, t),
        }
    }

    /// One step from `t` to `t + dt`; `source = (g(t), g(t+dt))` enters with
    /// θ-weighting.
    pub fn step(&mut self, v: &[f64], t: f64, dt: f64, source: Option<(&[f64], &[f64])>) -> Result<Vec<f64>> {
        let theta = self.cfg.theta;
        let grid = self.grid;
        let old = self.operator_at(t)?;
        let new = assemble(self.spec, &grid, t + dt)?;
        let mut rhs = vec![0.0; v.len()];
        old.shifted_apply(&grid, (1.0 - theta) * dt, v, &mut rhs);
        if let Some((g0, g1)) = source {
            for p in 0..rhs.len() {
                if !grid.is_boundary(p) {
                    rhs[p] += dt * (theta * g1[p] + (1.0 - theta) * g0[p]);
                }
            }
        }
        for p in 0..rhs.len() {
            if grid.is_boundary(p) {
                rhs[p] = 0.0;
            }
        }
        let s = -theta * dt;
        let diag = new.shifted_diag(&grid, s);
        let mut x = v.to_vec();
        for p in 0..x.len() {
            if grid.is_boundary(p) {
                x[p] = 0.0;
            }
        }
        let (iters, res) = bicgstab(
            &|a, out| new.shifted_apply(&grid, s, a, out),
            &diag,
            &rhs,
            &mut x,
            self.cfg.solve_tol,
            self.cfg.max_solver_iters,
        )?;
        for p in 0..x.len() {
            if grid.is_boundary(p) {
                x[p] = 0.0;
            }
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: t + dt,
                what: format!("grid solution value {bad}"),
            });
        }
        let adv = dt * new.max_speed.max(old.max_speed) / grid.h();
        self.diag.steps += 1;
        self.diag.iterations = self.diag.iterations.max(iters);
        self.diag.residual = self.diag.residual.max(res);
        self.diag.max_advection = self.diag.max_advection.max(adv);
        if adv > self.cfg.advection_threshold {
            let w = format!(
                "advection number dt·|b|/h = {adv:.3} exceeds {}",
                self.cfg.advection_threshold
            );
            if !self.diag.warnings.iter().any(|x| x.starts_with("advection number")) {
                self.diag.warnings.push(w);
            }
        }
        if new.dominance_violated || old.dominance_violated {
            let w = "cross-derivative dominance 2|q12| > q11 + q22 violated".to_string();
            if !self.diag.warnings.contains(&w) {
                self.diag.warnings.push(w);
            }
        }
        self.cached = Some(new);
        Ok(x)
    }
}

/// `A_h(t) v` on interior points, zero on the boundary.
pub(crate) fn apply_operator(spec: &ProblemSpec, grid: &Grid, t: f64, v: &[f64]) -> Result<Vec<f64>> {
    let a = assemble(spec, grid, t)?;
    let mut out = vec![0.0; v.len()];
    a.shifted_apply(grid, 1.0, v, &mut out);
    for p in 0..v.len() {
        out[p] = if grid.is_boundary(p) { 0.0 } else { out[p] - v[p] };
    }
    Ok(out)
}

/// One θ-step of `D_t v = A(t)v + g` from `t` to `t + dt`.
pub fn theta_step(
    spec: &ProblemSpec,
    grid: &Grid,
    v: &[f64],
    t: f64,
    dt: f64,
    source: Option<(&[f64], &[f64])>,
    cfg: &SchemeConfig,
) -> Result<(Vec<f64>, StepDiagnostics)> {
    let mut m = Marcher::new(spec, *grid, *cfg)?;
    let out = m.step(v, t, dt, source)?;
    Ok((out, m.diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bicgstab_solves_nonsymmetric_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                out[i] = 4.0 * x[i] - 1.5 * l - 0.5 * r;
            }
        };
        let want: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut rhs = vec![0.0; n];
        apply(&want, &mut rhs);
        let mut x = vec![0.0; n];
        let (_, res) = bicgstab(&apply, &vec![4.0; n], &rhs, &mut x, 1e-13, 500).unwrap();
        assert!(res <= 1e-13);
        for i in 0..n {
            assert!((x[i] - want[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let mut x = vec![1.0; 3];
        let r = bicgstab(&|a, o| o.copy_from_slice(a), &[1.0; 3], &[0.0; 3], &mut x, 1e-12, 10).unwrap();
        assert_eq!(r, (0, 0.0));
        assert_eq!(x, vec![0.0; 3]);
    }
}
