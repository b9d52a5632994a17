use super::operator::{Marcher, StepDiagnostics};
use super::{taper, Grid, GridField, SchemeConfig};
use crate::error::{Error, Result};
use crate::problem::{check_base_hypotheses, ProblemSpec, SamplePlan, SmoothField};

/// Largest radius the truncation search will consider.
pub const MAX_TRUNCATION_RADIUS: f64 = 1e4;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationBound {
    pub rho: f64,
    /// Bound on the kernel mass outside `B_rho` for starting points in the
    /// `x_range` ball.
    pub epsilon_tail: f64,
    /// A-priori bound on `E φ(X)`.
    pub m_tilde: f64,
    pub provenance: String,
}

/// One θ-step of size `cfg.dt` from time `t`.
pub fn dirichlet_step(
    spec: &ProblemSpec,
    field: &GridField,
    t: f64,
    cfg: &SchemeConfig,
) -> Result<(GridField, StepDiagnostics)> {
    let grid = *field.grid();
    let mut m = Marcher::new(spec, grid, *cfg)?;
    let v = m.step(field.values(), t, cfg.dt, None)?;
    Ok((GridField::from_parts_unchecked(grid, v), m.diag))
}

fn clip(values: &mut [f64], lo: f64, hi: f64) -> f64 {
    let mut excess = 0.0_f64;
    for v in values.iter_mut() {
        if *v > hi {
            excess = excess.max(*v - hi);
            *v = hi;
        } else if *v < lo {
            excess = excess.max(lo - *v);
            *v = lo;
        }
    }
    excess
}

/// Composes θ-steps over `[s, t]` starting from an already tapered field.
/// The result is clipped to `[min(0, min f), max(0, max f)]`; the amount
/// clipped is recorded in the diagnostics.
pub fn propagate_tapered(
    spec: &ProblemSpec,
    field: &GridField,
    s: f64,
    t: f64,
    cfg: &SchemeConfig,
) -> Result<(GridField, StepDiagnostics)> {
    if !(t >= s) {
        return Err(Error::InvalidInput(format!("need t ≥ s, got s = {s}, t = {t}")));
    }
    let grid = *field.grid();
    if t == s {
        return Ok((field.clone(), StepDiagnostics::default()));
    }
    let (lo, hi) = field.min_max();
    let (lo, hi) = (lo.min(0.0), hi.max(0.0));
    let (n, dt) = cfg.steps_for(s, t);
    let mut m = Marcher::new(spec, grid, *cfg)?;
    let mut v = field.values().to_vec();
    for k in 0..n {
        v = m.step(&v, s + k as f64 * dt, dt, None)?;
    }
    let mut diag = m.diag;
    diag.clip_excess = clip(&mut v, lo, hi);
    Ok((GridField::from_parts_unchecked(grid, v), diag))
}

/// Result of [`propagate_linear`].
#[derive(Debug, Clone)]
pub struct LinearRun {
    pub field: GridField,
    pub bound: TruncationBound,
    pub diagnostics: StepDiagnostics,
}

/// `G(t,s)f` on the grid: taper, march, clip. The grid radius must cover the
/// truncation radius for starting points in the `R/2` ball at tail mass
/// `cfg.tail_epsilon`.
pub fn propagate_linear(
    spec: &ProblemSpec,
    f: &dyn Fn(&[f64]) -> f64,
    s: f64,
    t: f64,
    grid: &Grid,
    cfg: &SchemeConfig,
) -> Result<LinearRun> {
    if !(t > s) {
        return Err(Error::InvalidInput(format!("need t > s, got s = {s}, t = {t}")));
    }
    let bound = truncation_bound(spec, s, t, 0.5 * grid.radius(), cfg.tail_epsilon)?;
    if grid.radius() < bound.rho {
        return Err(Error::Truncation(format!(
            "grid radius {} is smaller than the truncation radius {:.6} required for tail mass {}",
            grid.radius(),
            bound.rho,
            cfg.tail_epsilon
        )));
    }
    let f0 = GridField::tapered(*grid, f)?;
    let (field, diagnostics) = propagate_tapered(spec, &f0, s, t, cfg)?;
    Ok(LinearRun {
        field,
        bound,
        diagnostics,
    })
}

/// `v(t) = ∫_s^t G(t,r) g(r,·) dr` by marching `D_t v = A(t)v + g`, `v(s) = 0`,
/// with the tapered source θ-weighted in each step.
pub fn convolve_source(
    spec: &ProblemSpec,
    g: &dyn Fn(f64, &[f64]) -> f64,
    s: f64,
    t: f64,
    grid: &Grid,
    cfg: &SchemeConfig,
) -> Result<(GridField, StepDiagnostics)> {
    if !(t >= s) {
        return Err(Error::InvalidInput(format!("need t ≥ s, got s = {s}, t = {t}")));
    }
    if t == s {
        return Ok((GridField::zeros(*grid), StepDiagnostics::default()));
    }
    let sample = |r: f64| -> Result<Vec<f64>> {
        let fld = GridField::from_fn(*grid, &|x| g(r, x) * taper(grid, x))?;
        Ok(fld.into_values())
    };
    let (n, dt) = cfg.steps_for(s, t);
    let mut m = Marcher::new(spec, *grid, *cfg)?;
    let mut v = vec![0.0; grid.len()];
    let mut g0 = sample(s)?;
    for k in 0..n {
        let r = s + k as f64 * dt;
        let g1 = sample(r + dt)?;
        v = m.step(&v, r, dt, Some((&g0, &g1)))?;
        g0 = g1;
    }
    Ok((GridField::from_parts_unchecked(*grid, v), m.diag))
}

fn directions(d: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..d {
        for sgn in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = sgn;
            dirs.push(e);
        }
    }
    if d == 2 {
        let k = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in [(k, k), (k, -k), (-k, k), (-k, -k)] {
            dirs.push(vec![a, b]);
        }
    }
    dirs
}

/// Sampled `inf_{|x| ≥ rho} φ(x)`.
fn phi_tail_inf(phi: &dyn SmoothField, dirs: &[Vec<f64>], rho: f64) -> f64 {
    let mut best = f64::INFINITY;
    let mut r = rho;
    loop {
        for e in dirs {
            let x: Vec<f64> = e.iter().map(|v| v * r).collect();
            best = best.min(phi.value(&x));
        }
        if r >= MAX_TRUNCATION_RADIUS * 4.0 {
            break;
        }
        r = if r == 0.0 { 1e-3 } else { (r * 1.05).min(MAX_TRUNCATION_RADIUS * 4.0) };
    }
    best
}

/// Smallest sampled `rho` with `M̃ / inf_{|x|≥rho} φ ≤ epsilon`, where
/// `M̃ = max(sup_{|x|≤x_range} φ, a/c)` bounds `E φ(X)` by the Lyapunov
/// inequality `d/dt E φ ≤ a − c E φ`.
pub fn truncation_bound(
    spec: &ProblemSpec,
    s: f64,
    t: f64,
    x_range: f64,
    epsilon: f64,
) -> Result<TruncationBound> {
    if !(epsilon > 0.0) || !(x_range >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "truncation needs epsilon > 0 and x_range ≥ 0, got {epsilon}, {x_range}"
        )));
    }
    let mut plan = SamplePlan::for_spec(spec);
    plan.t0 = s;
    plan.t1 = t.max(s);
    let rep = check_base_hypotheses(spec, &plan);
    for name in ["phi_nonnegative", "phi_coercive", "lyapunov_drift"] {
        if let Some(c) = rep.clause(name) {
            if !c.pass {
                return Err(Error::Precondition(format!(
                    "Lyapunov certificate of `{}` fails clause {name} (slack {:.3e} at t = {}, x = {:?})",
                    spec.name, c.worst_slack, c.witness_t, c.witness
                )));
            }
        }
    }
    let lyap = &spec.lyapunov;
    let phi = lyap.phi.as_ref();
    let dirs = directions(spec.dim());
    let mut sup_ball = 0.0_f64;
    for k in 0..=64 {
        let r = x_range * k as f64 / 64.0;
        for e in &dirs {
            let x: Vec<f64> = e.iter().map(|v| v * r).collect();
            sup_ball = sup_ball.max(phi.value(&x));
        }
    }
    let m_tilde = sup_ball.max(lyap.stationary_bound());
    let ok = |rho: f64| m_tilde <= epsilon * phi_tail_inf(phi, &dirs, rho);
    let provenance = format!(
        "Chebyshev bound M̃/inf φ with M̃ = max(sup φ on |x| ≤ {x_range}, a/c) = {m_tilde:.6e}"
    );
    if ok(0.0) {
        return Ok(TruncationBound {
            rho: 0.0,
            epsilon_tail: epsilon,
            m_tilde,
            provenance,
        });
    }
    if !ok(MAX_TRUNCATION_RADIUS) {
        return Err(Error::Truncation(format!(
            "tail mass {epsilon} unattainable within radius {MAX_TRUNCATION_RADIUS} (M̃ = {m_tilde:.6e})"
        )));
    }
    let (mut lo, mut hi) = (0.0, MAX_TRUNCATION_RADIUS);
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(TruncationBound {
        rho: hi,
        epsilon_tail: epsilon,
        m_tilde,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ou1d, polycoef};

    #[test]
    fn truncation_example() {
        let spec = ou1d();
        let b = truncation_bound(&spec, 0.0, 1.0, 2.0, 0.01).unwrap();
        assert_eq!(b.m_tilde, 5.0);
        assert!((b.rho - 499f64.sqrt()).abs() < 1e-8, "{}", b.rho);
        let z = truncation_bound(&spec, 0.0, 1.0, 2.0, 5.0).unwrap();
        assert_eq!(z.rho, 0.0);
        let wider = truncation_bound(&spec, 0.0, 1.0, 2.0, 0.02).unwrap();
        assert!(wider.rho <= b.rho);
    }

    #[test]
    fn truncation_refuses_heat_certificate() {
        let spec = crate::problem::heat1d();
        assert!(matches!(truncation_bound(&spec, 0.0, 1.0, 2.0, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn zero_field_stays_zero() {
        let spec = ou1d();
        let g = Grid::new(1, 8.0, 101).unwrap();
        let cfg = SchemeConfig::for_grid(&g);
        let (out, _) = dirichlet_step(&spec, &GridField::zeros(g), 0.0, &cfg).unwrap();
        assert!(out.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ou_linear_data_decays() {
        let spec = ou1d();
        let g = Grid::new(1, 8.0, 513).unwrap();
        let cfg = SchemeConfig::for_grid(&g).with_dt(1e-3);
        let run = propagate_linear(&spec, &|x| x[0], 0.0, 1.0, &g, &cfg).unwrap();
        let e = (-1f64).exp();
        for i in g.indices_within(4.0) {
            let x = g.coord(i);
            assert!((run.field.values()[i] - e * x).abs() < 2e-3);
        }
    }

    #[test]
    fn heat_kernel_on_gaussian_bump() {
        let spec = crate::problem::heat1d();
        let g = Grid::new(1, 8.0, 641).unwrap();
        let cfg = SchemeConfig::for_grid(&g).with_dt(5e-3);
        let bump = |x: &[f64]| (-x[0] * x[0] / 0.2).exp();
        let f0 = GridField::tapered(g, &bump).unwrap();
        let (out, _) = propagate_tapered(&spec, &f0, 0.0, 0.45, &cfg).unwrap();
        // N(0, 0.1) bump convolved with variance 0.9: amplitude sqrt(0.1/1.0).
        for i in g.indices_within(4.0) {
            let x = g.coord(i);
            let want = (0.1f64 / 1.0).sqrt() * (-x * x / 2.0).exp();
            assert!((out.values()[i] - want).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_source_accumulates_time() {
        let spec = ou1d();
        let g = Grid::new(1, 8.0, 321).unwrap();
        let cfg = SchemeConfig::for_grid(&g);
        let (v, _) = convolve_source(&spec, &|_, _| 1.0, 0.0, 0.7, &g, &cfg).unwrap();
        assert!(v.max_diff_within(&GridField::from_fn(g, &|_| 0.7).unwrap(), 4.0) < 5e-3);
        let (w, _) = convolve_source(&spec, &|_, x| x[0], 0.0, 0.7, &g, &cfg).unwrap();
        let want = GridField::from_fn(g, &|x| x[0] * (1.0 - (-0.7f64).exp())).unwrap();
        assert!(w.max_diff_within(&want, 4.0) < 2e-3);
        assert!(w.interpolate(&[0.0]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn polycoef_grid_runs_implicit() {
        let spec = polycoef(0.0, 1.0, 1.0, 1).unwrap();
        let g = Grid::new(1, 6.0, 241).unwrap();
        let cfg = SchemeConfig::for_grid(&g).with_theta(1.0).with_dt(2e-3);
        let run = propagate_linear(&spec, &|x| 1.0 / (1.0 + x[0] * x[0]), 0.0, 0.25, &g, &cfg).unwrap();
        assert!(run.diagnostics.clip_excess < 1e-9);
        assert!(run.field.sup_norm() <= 1.0);
    }
}
