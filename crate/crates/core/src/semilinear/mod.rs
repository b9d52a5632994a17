//! Mild solutions of `D_t u = A(t)u + ψ(t, u)` by Picard iteration of
//!
//! ```text
//! (Γu)(t) = G(t,s)f + ∫_s^t G(t,r) ψ(r, u(r)) dr
//! ```
//!
//! on consecutive time slabs, with the time integral done by the trapezoidal
//! rule on the slab mesh.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{Grid, GridField, SchemeConfig, StepDiagnostics};
use crate::problem::{check_growth_and_dissipativity, GrowthClause, ProblemSpec, SamplePlan};

mod backend;
mod gronwall;
mod linearize;
mod residual;

pub use backend::OuLattice;
pub use gronwall::{gronwall_check, GronwallReport, GronwallVariant, GronwallVerdict};
pub use linearize::{linearize, r_omega, LinearizedProblem};
pub use residual::{residual_classical, residual_refinement, RefinementReport, ResidualReport};

use backend::{spline_eval, spline_second_derivatives, Stepper};

/// Allowed excess of the computed trajectory over an a-priori bound.
pub const APRIORI_SLACK: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Closed-form Gaussian kernels on a fixed 1-d lattice (OU coefficients only).
    OuClosedForm(OuLattice),
    Grid { grid: Grid, scheme: SchemeConfig },
}

/// Starting iterate of each slab.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialIterate {
    /// `u⁰(t) = G(t, t0) u(t0)`.
    Linear,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardConfig {
    pub backend: Backend,
    /// Weight of the norm `sup_t e^{−ω(t−t0)}‖·‖∞`; `None` uses `2 L_R` per slab.
    pub omega: Option<f64>,
    pub max_iters: usize,
    /// Fixed-point tolerance, relative to `max(1, ‖u(t0)‖∞)`.
    pub tol: f64,
    /// Upper bound on the slab length.
    pub slab: f64,
    /// Smallest slab the continuation may shrink to.
    pub min_slab: f64,
    /// Target step of the slab mesh.
    pub dt: f64,
    /// Sup-norm level treated as blow-up.
    pub ceiling: f64,
    pub initial: InitialIterate,
}

impl PicardConfig {
    pub fn ou() -> Self {
        Self::with_backend(Backend::OuClosedForm(OuLattice::default()), 1e-3)
    }

    /// Grid backend; the slab mesh step defaults to `1e-3`, independent of
    /// the scheme's own `dt`.
    pub fn grid(grid: Grid) -> Self {
        let scheme = SchemeConfig::for_grid(&grid);
        Self::with_backend(Backend::Grid { grid, scheme }, 1e-3)
    }

    pub fn grid_with_scheme(grid: Grid, scheme: SchemeConfig) -> Self {
        Self::with_backend(Backend::Grid { grid, scheme }, scheme.dt)
    }

    fn with_backend(backend: Backend, dt: f64) -> Self {
        Self {
            backend,
            omega: None,
            max_iters: 100,
            tol: 1e-10,
            slab: 0.25,
            min_slab: 5e-3,
            dt,
            ceiling: 1e8,
            initial: InitialIterate::Linear,
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = Some(omega);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        if let Backend::Grid { scheme, .. } = &mut self.backend {
            scheme.dt = dt;
        }
        self
    }

    pub fn with_slab(mut self, slab: f64) -> Self {
        self.slab = slab;
        self
    }

    pub fn with_initial(mut self, initial: InitialIterate) -> Self {
        self.initial = initial;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(format!("PicardConfig: {what}")));
        if let Some(w) = self.omega {
            if !(w >= 0.0) {
                return bad("omega must be ≥ 0");
            }
        }
        if !(self.tol > 0.0) {
            return bad("tolerance must be > 0");
        }
        if !(self.dt > 0.0) || !(self.slab > 0.0) || !(self.min_slab > 0.0) || self.min_slab > self.slab {
            return bad("need dt > 0 and 0 < min_slab ≤ slab");
        }
        if self.max_iters == 0 || !(self.ceiling > 0.0) {
            return bad("max_iters and ceiling must be positive");
        }
        if let Backend::Grid { scheme, .. } = &self.backend {
            scheme.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Completed,
    BlowupDetected,
    MaxIters,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Completed => "completed",
            Status::BlowupDetected => "blowup_detected",
            Status::MaxIters => "max_iters",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlabRecord {
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    pub iterations: usize,
    /// Sampled Lipschitz constant of `ψ` on `[−R, R]`, `R = 2‖u(t0)‖∞ + 1`.
    pub lipschitz: f64,
    pub omega: f64,
    /// Ratios of successive weighted updates above the rounding floor.
    pub ratios: Vec<f64>,
    pub final_update: f64,
    /// Tolerance the final update was compared with.
    pub tolerance: f64,
    /// Times the slab was halved before it was accepted.
    pub halvings: usize,
}

/// Bound the trajectory must respect by a global-existence argument.
#[derive(Debug, Clone, PartialEq)]
pub struct AprioriCheck {
    pub route: String,
    pub formula: String,
    /// `max_k (‖u(t_k)‖∞ − bound(t_k))`.
    pub worst_excess: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Nodes {
    Lattice(OuLattice, Vec<f64>),
    Grid(Grid),
}

#[derive(Debug, Clone)]
pub struct MildSolution {
    times: Vec<f64>,
    levels: Vec<Vec<f64>>,
    nodes: Nodes,
    pub slabs: Vec<SlabRecord>,
    pub status: Status,
    pub blowup_bracket: Option<(f64, f64)>,
    pub apriori: Vec<AprioriCheck>,
    pub notes: Vec<String>,
    pub grid_diagnostics: Option<StepDiagnostics>,
}

impl MildSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    /// Node coordinates of the lattice, or `None` on the grid backend.
    pub fn lattice(&self) -> Option<&[f64]> {
        match &self.nodes {
            Nodes::Lattice(_, c) => Some(c),
            Nodes::Grid(_) => None,
        }
    }

    pub fn grid(&self) -> Option<&Grid> {
        match &self.nodes {
            Nodes::Grid(g) => Some(g),
            Nodes::Lattice(..) => None,
        }
    }

    pub fn sup_norm(&self, k: usize) -> f64 {
        self.levels[k].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_norm_trace(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.sup_norm(k)).collect()
    }

    /// Index of the stored level closest to `t`.
    pub fn nearest_level(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, &tk) in self.times.iter().enumerate() {
            if (tk - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    /// `u(t_k, x)`: spline on the lattice, Lagrange interpolation on the grid.
    pub fn eval(&self, k: usize, x: &[f64]) -> Result<f64> {
        match &self.nodes {
            Nodes::Lattice(lat, _) => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch { expected: 1, got: x.len() });
                }
                let m = spline_second_derivatives(&self.levels[k], lat.spacing());
                Ok(spline_eval(-lat.half_width, lat.spacing(), &self.levels[k], &m, x[0]))
            }
            Nodes::Grid(g) => self.grid_field(k).unwrap().interpolate(x).map_err(|e| {
                if g.dim() != x.len() {
                    Error::DimensionMismatch { expected: g.dim(), got: x.len() }
                } else {
                    e
                }
            }),
        }
    }

    /// Level `k` as a function of `x`; zero outside the grid box.
    pub fn level_function(&self, k: usize) -> Box<dyn Fn(&[f64]) -> f64 + Send + Sync + '_> {
        match &self.nodes {
            Nodes::Lattice(lat, _) => {
                let (x0, h) = (-lat.half_width, lat.spacing());
                let y = &self.levels[k];
                let m = spline_second_derivatives(y, h);
                Box::new(move |x: &[f64]| spline_eval(x0, h, y, &m, x[0]))
            }
            Nodes::Grid(_) => {
                let field = self.grid_field(k).unwrap();
                Box::new(move |x: &[f64]| field.interpolate(x).unwrap_or(0.0))
            }
        }
    }

    pub fn grid_field(&self, k: usize) -> Option<GridField> {
        match &self.nodes {
            Nodes::Grid(g) => Some(GridField::from_parts_unchecked(*g, self.levels[k].clone())),
            Nodes::Lattice(..) => None,
        }
    }

    /// Largest recorded contraction ratio over all slabs.
    pub fn max_contraction_ratio(&self) -> f64 {
        self.slabs
            .iter()
            .flat_map(|s| s.ratios.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Columns `t, sup_norm, u(p_1), …` at the given trace points.
    pub fn to_csv(&self, points: &[Vec<f64>]) -> Result<String> {
        let mut s = String::from("t,sup_norm");
        for p in points {
            let label: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            write!(s, ",u({})", label.join(" ")).unwrap();
        }
        s.push('\n');
        for k in 0..self.len() {
            write!(s, "{:.12e},{:.12e}", self.times[k], self.sup_norm(k)).unwrap();
            for p in points {
                write!(s, ",{:.12e}", self.eval(k, p)?).unwrap();
            }
            s.push('\n');
        }
        Ok(s)
    }

    /// Full dump of level `k` as `x…,u` rows.
    pub fn level_to_csv(&self, k: usize) -> String {
        match &self.nodes {
            Nodes::Grid(_) => self.grid_field(k).unwrap().to_csv(),
            Nodes::Lattice(_, c) => {
                let mut s = String::from("x0,u\n");
                for (x, v) in c.iter().zip(&self.levels[k]) {
                    writeln!(s, "{x:.12e},{v:.12e}").unwrap();
                }
                s
            }
        }
    }
}

/// Sampled Lipschitz constant of `ψ` on `[−r, r] × [t0, t1]`.
fn sampled_lipschitz(spec: &ProblemSpec, r: f64, t0: f64, t1: f64) -> f64 {
    const N: usize = 2001;
    let h = 2.0 * r / (N - 1) as f64;
    let mut l: f64 = 0.0;
    for j in 0..5 {
        let t = t0 + (t1 - t0) * j as f64 / 4.0;
        let mut prev = spec.nonlinearity.eval(t, -r);
        for i in 1..N {
            let xi = -r + i as f64 * h;
            let v = spec.nonlinearity.eval(t, xi);
            l = l.max(((v - prev) / h).abs());
            prev = v;
        }
    }
    l
}

enum SlabOutcome {
    Converged {
        times: Vec<f64>,
        levels: Vec<Vec<f64>>,
        record: SlabRecord,
    },
    Diverged(String),
    Stalled(String),
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn solve_slab(
    spec: &ProblemSpec,
    stepper: &mut Stepper<'_>,
    cfg: &PicardConfig,
    t0: f64,
    delta: f64,
    u0: &[f64],
) -> Result<SlabOutcome> {
    let n = ((delta / cfg.dt - 1e-9).ceil() as usize).max(2);
    let h = delta / n as f64;
    let times: Vec<f64> = (0..=n)
        .map(|k| if k == n { t0 + delta } else { t0 + k as f64 * h })
        .collect();
    let sup0 = sup(u0);
    let lip = sampled_lipschitz(spec, 2.0 * sup0 + 1.0, t0, t0 + delta);
    let omega = cfg.omega.unwrap_or(2.0 * lip);
    let tol = cfg.tol * sup0.max(1.0);
    // Stop well below `tol` so the distance to the discrete fixed point,
    // not just the last update, is under the tolerance.
    let stop = tol / 16.0;
    let floor = 1e-12 * (1.0 + sup0);
    let weights: Vec<f64> = times.iter().map(|&t| (-omega * (t - t0)).exp()).collect();
    let len = u0.len();
    let free: Vec<bool> = (0..len).map(|i| stepper.is_free(i)).collect();

    stepper.begin_slab();
    let mut lin = vec![u0.to_vec()];
    for k in 0..n {
        let next = stepper.step(times[k], times[k + 1], &lin[k])?;
        lin.push(next);
    }
    let mut u: Vec<Vec<f64>> = match cfg.initial {
        InitialIterate::Linear => lin.clone(),
        InitialIterate::Zero => vec![vec![0.0; len]; n + 1],
    };
    let ceiling = cfg.ceiling.max(4.0 * (2.0 * sup0 + 1.0));
    let mut ratios = Vec::new();
    let mut prev_update = f64::NAN;
    let mut rising = 0;
    for iter in 1..=cfg.max_iters {
        let g: Vec<Vec<f64>> = u
            .iter()
            .zip(&times)
            .map(|(uk, &t)| {
                uk.iter()
                    .enumerate()
                    .map(|(i, &v)| if free[i] { spec.nonlinearity.eval(t, v) } else { 0.0 })
                    .collect()
            })
            .collect();
        // Trapezoidal Duhamel sum: S_{k+1} = G(t_{k+1}, t_k)(S_k + h/2 g_k) + h/2 g_{k+1}.
        let mut new = Vec::with_capacity(n + 1);
        let mut s = vec![0.0; len];
        new.push(lin[0].clone());
        for k in 0..n {
            let pre: Vec<f64> = s.iter().zip(&g[k]).map(|(a, b)| a + 0.5 * h * b).collect();
            let mut next = stepper.step(times[k], times[k + 1], &pre)?;
            for (x, gk) in next.iter_mut().zip(&g[k + 1]) {
                *x += 0.5 * h * gk;
            }
            s = next;
            new.push(lin[k + 1].iter().zip(&s).map(|(a, b)| a + b).collect());
        }
        let mut update: f64 = 0.0;
        let mut biggest: f64 = 0.0;
        for k in 0..=n {
            let d = new[k].iter().zip(&u[k]).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
            update = update.max(weights[k] * d);
            biggest = biggest.max(sup(&new[k]));
        }
        if !update.is_finite() || !biggest.is_finite() || biggest > ceiling {
            return Ok(SlabOutcome::Diverged(format!(
                "iterate {iter} on [{t0}, {}] reached sup norm {biggest:.3e}",
                t0 + delta
            )));
        }
        if prev_update.is_finite() {
            if prev_update > floor {
                ratios.push(update / prev_update);
            }
            rising = if update > prev_update && prev_update > floor { rising + 1 } else { 0 };
            if rising >= 3 {
                return Ok(SlabOutcome::Diverged(format!(
                    "weighted updates increased three times in a row on [{t0}, {}]",
                    t0 + delta
                )));
            }
        }
        u = new;
        if update < stop {
            return Ok(SlabOutcome::Converged {
                times,
                levels: u,
                record: SlabRecord {
                    t0,
                    t1: t0 + delta,
                    steps: n,
                    iterations: iter,
                    lipschitz: lip,
                    omega,
                    ratios,
                    final_update: update,
                    tolerance: tol,
                    halvings: 0,
                },
            });
        }
        prev_update = update;
    }
    Ok(SlabOutcome::Stalled(format!(
        "no convergence in {} iterations on [{t0}, {}] (last update {prev_update:.3e})",
        cfg.max_iters,
        t0 + delta
    )))
}

fn run(
    spec: &ProblemSpec,
    f: &dyn Fn(&[f64]) -> f64,
    s: f64,
    tau: f64,
    cfg: &PicardConfig,
    adaptive: bool,
) -> Result<MildSolution> {
    cfg.validate()?;
    if !(tau >= s) {
        return Err(Error::InvalidInput(format!("need s ≤ τ, got s = {s}, τ = {tau}")));
    }
    let (mut stepper, nodes) = match cfg.backend {
        Backend::OuClosedForm(lat) => (Stepper::ou(spec, lat)?, Nodes::Lattice(lat, lat.coords())),
        Backend::Grid { grid, scheme } => (
            Stepper::grid(spec, grid, SchemeConfig { dt: cfg.dt, ..scheme })?,
            Nodes::Grid(grid),
        ),
    };
    let u0 = stepper.sample(f)?;
    let mut times = vec![s];
    let mut levels = vec![u0];
    let mut slabs: Vec<SlabRecord> = Vec::new();
    let mut notes = Vec::new();
    let mut status = Status::Completed;
    let mut bracket = None;
    let mut t = s;
    let mut slab_end_sups = vec![sup(&levels[0])];
    let span = (tau - s).max(1.0);
    while tau - t > 1e-12 * span {
        let current = levels.last().unwrap().clone();
        let sup0 = sup(&current);
        let lip = sampled_lipschitz(spec, 2.0 * sup0 + 1.0, t, (t + cfg.slab).min(tau));
        let mut delta = if lip > 0.0 { cfg.slab.min(0.5 / lip) } else { cfg.slab };
        delta = delta.max(cfg.min_slab).min(tau - t);
        let mut halvings = 0;
        let accepted = loop {
            match solve_slab(spec, &mut stepper, cfg, t, delta, &current)? {
                SlabOutcome::Converged {
                    times: ts,
                    levels: ls,
                    mut record,
                } => {
                    record.halvings = halvings;
                    break Some((ts, ls, record));
                }
                outcome => {
                    let (diverged, msg) = match outcome {
                        SlabOutcome::Diverged(m) => (true, m),
                        SlabOutcome::Stalled(m) => (false, m),
                        SlabOutcome::Converged { .. } => unreachable!(),
                    };
                    if adaptive && delta / 2.0 >= cfg.min_slab * (1.0 - 1e-12) {
                        delta /= 2.0;
                        halvings += 1;
                        continue;
                    }
                    notes.push(msg);
                    let n = slab_end_sups.len();
                    let growing = n >= 3 && slab_end_sups[n - 1] > slab_end_sups[n - 2] && slab_end_sups[n - 2] > slab_end_sups[n - 3];
                    if diverged && growing {
                        status = Status::BlowupDetected;
                        bracket = Some((t, t + 2.0 * delta));
                    } else {
                        status = Status::MaxIters;
                    }
                    break None;
                }
            }
        };
        let Some((ts, ls, record)) = accepted else { break };
        times.extend_from_slice(&ts[1..]);
        levels.extend(ls.into_iter().skip(1));
        t = record.t1;
        slabs.push(record);
        let end_sup = sup(levels.last().unwrap());
        slab_end_sups.push(end_sup);
        if end_sup > cfg.ceiling {
            let n = slab_end_sups.len();
            let doubling = n >= 4 && (1..=3).all(|j| slab_end_sups[n - j] >= 2.0 * slab_end_sups[n - j - 1]);
            if doubling {
                status = Status::BlowupDetected;
                bracket = Some((slabs[slabs.len() - 1].t0, t));
                break;
            }
            notes.push(format!("sup norm {end_sup:.3e} above ceiling at t = {t} without a doubling trend"));
        }
    }
    if let Some(bad) = levels.iter().position(|l| l.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite {
            t: times[bad],
            what: "mild solution level".into(),
        });
    }
    let grid_diagnostics = match &stepper {
        Stepper::Grid { marcher, .. } => Some(marcher.diag.clone()),
        Stepper::Ou { .. } => None,
    };
    Ok(MildSolution {
        times,
        levels,
        nodes,
        slabs,
        status,
        blowup_bracket: bracket,
        apriori: Vec::new(),
        notes,
        grid_diagnostics,
    })
}

/// Slab-by-slab Picard iteration up to `τ` with slab length
/// `min(slab, 1/(2 L_R))`.
pub fn picard_solve(
    spec: &ProblemSpec,
    f: &dyn Fn(&[f64]) -> f64,
    s: f64,
    tau: f64,
    cfg: &PicardConfig,
) -> Result<MildSolution> {
    run(spec, f, s, tau, cfg, false)
}

/// Like [`picard_solve`] but halves stalled slabs down to `min_slab`, flags
/// blow-up and checks the trajectory against the a-priori bounds the spec
/// qualifies for.
pub fn continue_solution(
    spec: &ProblemSpec,
    f: &dyn Fn(&[f64]) -> f64,
    s: f64,
    tau: f64,
    cfg: &PicardConfig,
) -> Result<MildSolution> {
    let mut sol = run(spec, f, s, tau, cfg, true)?;
    let f_sup = sol.sup_norm(0);
    let mut plan = SamplePlan::for_spec(spec);
    plan.t0 = s;
    plan.t1 = tau.max(s + 1e-9);
    plan.xi_max = plan.xi_max.max(2.0 * f_sup + 1.0);
    let term = &spec.nonlinearity;
    let trace = sol.sup_norm_trace();
    let slack = APRIORI_SLACK * (1.0 + f_sup);
    let times = sol.times.clone();
    let reach = sol.final_time();
    let mut checks = Vec::new();
    let mut check = |route: &str, formula: String, bound: &dyn Fn(f64) -> f64| {
        let worst = trace
            .iter()
            .zip(&times)
            .map(|(&u, &t)| u - bound(t))
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(AprioriCheck {
            route: route.into(),
            formula,
            worst_excess: worst,
            holds: worst <= slack,
        });
    };
    if let Some(p0) = term.psi0 {
        let rep = check_growth_and_dissipativity(spec, &plan, &[GrowthClause::Dissipative])?;
        if rep.all_pass() {
            check(
                "one-sided-growth",
                format!("‖u(t)‖∞ ≤ e^{{{p0}(t−s)}}‖f‖∞"),
                &|t| (p0 * (t - s)).exp() * f_sup,
            );
        }
    }
    if let Some(h) = term.linear_growth_h {
        let rep = check_growth_and_dissipativity(spec, &plan, &[GrowthClause::LinearGrowth])?;
        if rep.all_pass() {
            check(
                "linear-growth",
                format!("‖u(t)‖∞ ≤ (‖f‖∞ + {h}(τ−s))e^{{{h}(t−s)}}"),
                &|t| (f_sup + h * (reach - s)) * (h * (t - s)).exp(),
            );
        }
    }
    sol.apriori = checks;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{builtin, SemilinearTerm};

    fn spec(term: SemilinearTerm) -> ProblemSpec {
        builtin("ou1d").unwrap().with_nonlinearity(term)
    }

    #[test]
    fn constant_data_decay() {
        let sp = spec(SemilinearTerm::new("-x", |_, x| -x));
        let sol = picard_solve(&sp, &|_| 1.0, 0.0, 1.0, &PicardConfig::ou()).unwrap();
        assert_eq!(sol.status, Status::Completed);
        for (k, &t) in sol.times().iter().enumerate() {
            let e = (sol.eval(k, &[0.3]).unwrap() - (-t).exp()).abs();
            assert!(e < 1e-6, "t = {t}: {e}");
        }
        assert!(sol.max_contraction_ratio() <= 0.55);
    }

    #[test]
    fn square_blows_up_near_one() {
        let sp = spec(SemilinearTerm::new("x^2", |_, x| x * x));
        let cfg = PicardConfig::ou();
        let sol = continue_solution(&sp, &|_| 1.0, 0.0, 2.0, &cfg).unwrap();
        assert_eq!(sol.status, Status::BlowupDetected, "{:?}", sol.notes);
        let (a, b) = sol.blowup_bracket.unwrap();
        assert!(a <= 1.0 && 1.0 <= b, "[{a}, {b}]");
        assert!(b - a <= 2.0 * cfg.min_slab + 1e-12);
        for (k, &t) in sol.times().iter().enumerate().step_by(7) {
            if t < 0.9 {
                let e = (sol.sup_norm(k) - 1.0 / (1.0 - t)).abs();
                assert!(e < 1e-6 / (1.0 - t).powi(3), "t = {t}: {e}");
            }
        }
    }

    #[test]
    fn cubic_damping_completes_monotone() {
        let sp = spec(SemilinearTerm::new("-x^3", |_, x| -x * x * x).with_psi0(0.0));
        let sol = continue_solution(&sp, &|_| 5.0, 0.0, 5.0, &PicardConfig::ou()).unwrap();
        assert_eq!(sol.status, Status::Completed);
        let tr = sol.sup_norm_trace();
        assert!(tr.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert_eq!(sol.apriori.len(), 1);
        assert!(sol.apriori[0].holds);
        let e = (tr.last().unwrap() - 1.0 / (1.0f64 / 25.0 + 10.0).sqrt()).abs();
        assert!(e < 1e-6, "{e}");
    }

    #[test]
    fn linear_growth_bound_attached() {
        let sp = spec(SemilinearTerm::new("sin", |_, x| x.sin()).with_linear_growth(1.0));
        let sol = continue_solution(&sp, &|x| x[0].cos(), 0.0, 1.0, &PicardConfig::ou()).unwrap();
        assert_eq!(sol.status, Status::Completed);
        assert_eq!(sol.apriori.len(), 1);
        assert!(sol.apriori[0].holds && sol.apriori[0].worst_excess < 0.0);
    }

    #[test]
    fn zero_nonlinearity_is_linear_flow() {
        let sp = spec(SemilinearTerm::zero());
        let f = |x: &[f64]| (-x[0] * x[0]).exp();
        let sol = picard_solve(&sp, &f, 0.0, 0.5, &PicardConfig::ou()).unwrap();
        let rule = crate::quadrature::QuadratureRule::default_for(1).unwrap();
        let k = sol.len() - 1;
        for x in [-1.0, 0.0, 0.8] {
            let exact = crate::ou::apply_ou(sp.ou().unwrap(), &f, &[x], 0.0, 0.5, &rule).unwrap();
            assert!((sol.eval(k, &[x]).unwrap() - exact).abs() < 1e-5);
        }
    }

    #[test]
    fn initial_iterates_agree() {
        let sp = spec(SemilinearTerm::new("-x+x^3", |_, x| -x + x * x * x));
        let f = |x: &[f64]| 0.5 * x[0].tanh();
        let cfg = PicardConfig::ou();
        let a = picard_solve(&sp, &f, 0.0, 0.5, &cfg).unwrap();
        let b = picard_solve(&sp, &f, 0.0, 0.5, &cfg.clone().with_initial(InitialIterate::Zero)).unwrap();
        let d = (0..a.len())
            .map(|k| a.level(k).iter().zip(b.level(k)).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs())))
            .fold(0.0, f64::max);
        assert!(d < 2.0 * cfg.tol, "{d}");
    }

    #[test]
    fn grid_backend_constant_decay_and_residual() {
        let grid = Grid::new(1, 8.0, 161).unwrap();
        let sp = spec(SemilinearTerm::new("-x", |_, x| -x));
        let sol = continue_solution(&sp, &|_| 1.0, 0.0, 1.0, &PicardConfig::grid(grid)).unwrap();
        assert_eq!(sol.status, Status::Completed);
        let k = sol.len() - 1;
        assert!((sol.eval(k, &[0.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-6);
        let r = residual_classical(&sp, &sol, &[0.25, 0.5, 0.75], &[vec![0.0], vec![0.5]]).unwrap();
        assert!(r.worst <= 1e-6, "{r:?}");
    }
}
