//! Suites for the linear evolution operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{measure_at, Case, EstimateReport, TestFunction, CLOSED_FORM_TOL, GRID_TOL};
use crate::error::{Error, Result};
use crate::grid::{grid_gradient, propagate_linear, Grid, SchemeConfig};
use crate::mc::{simulate, SDEConfig};
use crate::ou::{apply_ou, Propagator};
use crate::problem::ProblemSpec;
use crate::quadrature::{composite_gauss_legendre, QuadratureRule, DEFAULT_ORDER};

/// Gauss–Hermite order for the nested invariance check in one dimension.
pub const NESTED_ORDER_1D: usize = 80;

/// Order for nested (kernel inside measure) quadrature: narrow kernels lose
/// accuracy at the default order, and 1-d can afford more nodes.
pub fn linear_nested_order(spec: &ProblemSpec) -> usize {
    if spec.dim() == 1 {
        NESTED_ORDER_1D
    } else {
        DEFAULT_ORDER
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinearBackend {
    /// Gauss–Hermite rule of the given order per axis.
    ClosedForm { order: usize },
    Grid { grid: Grid, scheme: SchemeConfig },
}

impl LinearBackend {
    pub fn closed_form() -> Self {
        LinearBackend::ClosedForm { order: DEFAULT_ORDER }
    }

    pub fn grid(grid: Grid) -> Self {
        LinearBackend::Grid {
            scheme: SchemeConfig::for_grid(&grid),
            grid,
        }
    }

    fn describe(&self) -> String {
        match self {
            LinearBackend::ClosedForm { order } => format!("closed-form OU kernel, Gauss–Hermite order {order}"),
            LinearBackend::Grid { grid, scheme } => format!(
                "grid d={} R={} n={} h={:.4} θ={} dt={:.4}",
                grid.dim(),
                grid.radius(),
                grid.n(),
                grid.h(),
                scheme.theta,
                scheme.dt
            ),
        }
    }

    fn tolerance(&self) -> f64 {
        match self {
            LinearBackend::ClosedForm { .. } => 1e-9,
            LinearBackend::Grid { .. } => GRID_TOL,
        }
    }

    /// `(G(t,s)f)(x_k)` for each `x_k`.
    fn apply(&self, spec: &ProblemSpec, f: &TestFunction, xs: &[Vec<f64>], s: f64, t: f64) -> Result<Vec<f64>> {
        match self {
            LinearBackend::ClosedForm { order } => {
                let rule = QuadratureRule::gauss_hermite(spec.dim(), *order)?;
                let ou = spec.ou()?;
                let g = |y: &[f64]| f.eval(y);
                xs.iter().map(|x| apply_ou(ou, &g, x, s, t, &rule)).collect()
            }
            LinearBackend::Grid { grid, scheme } => {
                let g = |y: &[f64]| f.eval(y);
                let run = propagate_linear(spec, &g, s, t, grid, scheme)?;
                xs.iter().map(|x| run.field.interpolate(x)).collect()
            }
        }
    }
}

/// Random `(x, s, t)` triples: `s` in the spec window, `t − s` in `gap`,
/// `x` uniform in `[−x_range, x_range]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomCases {
    pub n: usize,
    pub seed: u64,
    pub x_range: f64,
    pub gap: (f64, f64),
}

impl Default for RandomCases {
    fn default() -> Self {
        Self {
            n: 20,
            seed: 7,
            x_range: 2.0,
            gap: (0.1, 2.0),
        }
    }
}

impl RandomCases {
    pub fn draw(&self, spec: &ProblemSpec) -> Vec<(Vec<f64>, f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (s0, s1) = (spec.time.s, spec.time.tau);
        (0..self.n)
            .map(|_| {
                let x: Vec<f64> = (0..spec.dim()).map(|_| rng.random_range(-self.x_range..=self.x_range)).collect();
                let s = if s1 > s0 { rng.random_range(s0..=s1) } else { s0 };
                let t = s + rng.random_range(self.gap.0..=self.gap.1);
                (x, s, t)
            })
            .collect()
    }
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(" "))
}

/// `G(t,s)1 = 1`.
pub fn markov_report(spec: &ProblemSpec, backend: &LinearBackend, cases: &RandomCases) -> Result<EstimateReport> {
    let one = TestFunction::named("one")?;
    let mut r = EstimateReport::new(
        "markov",
        "conservation G(t,s)1 = 1",
        backend.tolerance(),
        backend.describe(),
    );
    for (k, (x, s, t)) in cases.draw(spec).into_iter().enumerate() {
        let v = backend.apply(spec, &one, &[x.clone()], s, t)?[0];
        r.push(Case::new(
            format!("{k}"),
            format!("x={} s={s:.6} t={t:.6}", fmt_point(&x)),
            (v - 1.0).abs(),
            0.0,
        ));
    }
    Ok(r.finish())
}

/// `|G(t,s)f(x)| ≤ ‖f‖∞`.
pub fn contraction_report(
    spec: &ProblemSpec,
    backend: &LinearBackend,
    f: &TestFunction,
    cases: &RandomCases,
) -> Result<EstimateReport> {
    let name = format!("contraction/{}", f.name);
    let anchor = "sup-norm contraction ‖G(t,s)f‖∞ ≤ ‖f‖∞";
    if !f.sup.is_finite() {
        return Ok(EstimateReport::not_applicable(&name, anchor, format!("{} is unbounded", f.name)));
    }
    let mut r = EstimateReport::new(&name, anchor, backend.tolerance(), backend.describe());
    for (k, (x, s, t)) in cases.draw(spec).into_iter().enumerate() {
        let v = backend.apply(spec, f, &[x.clone()], s, t)?[0];
        r.push(Case::new(
            format!("{k}"),
            format!("x={} s={s:.6} t={t:.6}", fmt_point(&x)),
            v.abs(),
            f.sup,
        ));
    }
    Ok(r.finish())
}

/// `G(t,s)f = G(t,r)G(r,s)f` with `r` the midpoint; closed form only.
pub fn chapman_kolmogorov_report(
    spec: &ProblemSpec,
    f: &TestFunction,
    cases: &RandomCases,
    order: usize,
) -> Result<EstimateReport> {
    let name = format!("chapman_kolmogorov/{}", f.name);
    let anchor = "evolution law G(t,s) = G(t,r)G(r,s)";
    let Ok(ou) = spec.ou() else {
        return Ok(EstimateReport::not_applicable(&name, anchor, "needs OU coefficients"));
    };
    let rule = QuadratureRule::gauss_hermite(spec.dim(), order)?;
    let mut r = EstimateReport::new(&name, anchor, CLOSED_FORM_TOL, format!("closed-form OU kernel, Gauss–Hermite order {order}"));
    let g = |y: &[f64]| f.eval(y);
    for (k, (x, s, t)) in cases.draw(spec).into_iter().enumerate() {
        let mid = 0.5 * (s + t);
        let direct = apply_ou(ou, &g, &x, s, t, &rule)?;
        let inner = Propagator::new(ou, s, mid)?;
        let outer = Propagator::new(ou, mid, t)?;
        let h = |y: &[f64]| inner.apply(&g, y, &rule).unwrap_or(f64::NAN);
        let two = outer.apply(&h, &x, &rule)?;
        r.push(Case::new(
            format!("{k}"),
            format!("x={} s={s:.6} r={mid:.6} t={t:.6}", fmt_point(&x)),
            (direct - two).abs(),
            0.0,
        ));
    }
    Ok(r.finish())
}

/// `∫G(t,s)f dμ_t = ∫f dμ_s`.
pub fn invariance_report(
    spec: &ProblemSpec,
    fs: &[TestFunction],
    cases: &RandomCases,
    order: usize,
) -> Result<EstimateReport> {
    let anchor = "invariance ∫G(t,s)f dμ_t = ∫f dμ_s";
    let Ok(ou) = spec.ou() else {
        return Ok(EstimateReport::not_applicable("invariance", anchor, "needs the Gaussian evolution system"));
    };
    let rule = QuadratureRule::gauss_hermite(spec.dim(), order)?;
    let mut r = EstimateReport::new(
        "invariance",
        anchor,
        CLOSED_FORM_TOL,
        format!("closed-form OU kernel and μ_t, Gauss–Hermite order {order} (nested)"),
    );
    for (k, (_, s, t)) in cases.draw(spec).into_iter().enumerate() {
        let mu_s = measure_at(spec, s)?;
        let mu_t = measure_at(spec, t)?;
        let p = Propagator::new(ou, s, t)?;
        for f in fs {
            let g = |y: &[f64]| f.eval(y);
            let rhs = mu_s.expect(&g, &rule)?;
            let lhs = mu_t.expect(&|x| p.apply(&g, x, &rule).unwrap_or(f64::NAN), &rule)?;
            r.push(Case::new(
                format!("{}/{k}", f.name),
                format!("s={s:.6} t={t:.6}"),
                (lhs - rhs).abs(),
                0.0,
            ));
        }
    }
    Ok(r.finish())
}

/// `sup_x |∇_x G(t,s)f|` at the start time `s` of the spec window.
fn max_gradient(spec: &ProblemSpec, backend: &LinearBackend, f: &TestFunction, s: f64, tau: f64, x_range: f64) -> Result<f64> {
    match backend {
        LinearBackend::ClosedForm { .. } => {
            if spec.dim() != 1 {
                return Err(Error::Unsupported("closed-form gradient scan in d > 1".into()));
            }
            let p = Propagator::new(spec.ou()?, s, s + tau)?;
            let (a, m, sd) = (p.u[(0, 0)], p.mshift[0], p.sigma[(0, 0)].max(0.0).sqrt());
            let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
            // ∂_x E f(a x + m + sd Z) = (a / sd) E[f(a x + m + sd Z) Z].
            let grad = |x: f64| {
                let mean = a * x + m;
                a / sd
                    * composite_gauss_legendre(-12.0, 12.0, 480, 8, |z| {
                        f.eval(&[mean + sd * z]) * z * norm * (-0.5 * z * z).exp()
                    })
            };
            let n = 2001;
            Ok((0..n)
                .map(|i| grad(-x_range + 2.0 * x_range * i as f64 / (n - 1) as f64).abs())
                .fold(0.0, f64::max))
        }
        LinearBackend::Grid { grid, scheme } => {
            let g = |y: &[f64]| f.eval(y);
            let run = propagate_linear(spec, &g, s, s + tau, grid, scheme)?;
            let grads = grid_gradient(&run.field);
            let idx = grid.indices_within(x_range);
            Ok(idx
                .iter()
                .map(|&i| grads.iter().map(|g| g.values()[i] * g.values()[i]).sum::<f64>().sqrt())
                .fold(0.0, f64::max))
        }
    }
}

/// Log-log slope of `sup|∇G(t,s)f|` against `t − s = 2^{−k}`, expected in
/// `[−0.6, −0.4]`.
pub fn gradient_scaling_report(
    spec: &ProblemSpec,
    backend: &LinearBackend,
    f: &TestFunction,
    ks: &[u32],
) -> Result<EstimateReport> {
    let name = format!("gradient_scaling/{}", f.name);
    let anchor = "gradient smoothing ‖∇G(t,s)f‖∞ ≤ K1 (t−s)^{-1/2} ‖f‖∞";
    if ks.len() < 2 {
        return Err(Error::InvalidInput("need at least two gaps for a fit".into()));
    }
    let s = spec.time.s;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut r = EstimateReport::new(&name, anchor, 0.0, backend.describe());
    let mut k1: f64 = 0.0;
    for &k in ks {
        let tau = 2f64.powi(-(k as i32));
        let g = max_gradient(spec, backend, f, s, tau, 3.0)?;
        r.note(format!("t−s = 2^-{k}: sup|∇G f| = {g:.6e}"));
        k1 = k1.max(g * tau.sqrt() / f.sup);
        xs.push(tau.ln());
        ys.push(g.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    r.envelope("fitted_exponent", slope);
    r.envelope("K1", k1);
    r.push(Case::new("exponent_upper", "slope ≤ −0.4", slope, -0.4));
    r.push(Case::new("exponent_lower", "slope ≥ −0.6", -0.6, slope));
    Ok(r.finish())
}

/// Markov, contraction, evolution law, invariance and gradient scaling on the
/// default families.
pub fn verify_linear_estimates(
    spec: &ProblemSpec,
    backend: &LinearBackend,
    cases: &RandomCases,
) -> Result<Vec<EstimateReport>> {
    let mut out = vec![markov_report(spec, backend, cases)?];
    for name in ["cos", "tanh", "gauss"] {
        out.push(contraction_report(spec, backend, &TestFunction::named(name)?, cases)?);
    }
    let closed = matches!(backend, LinearBackend::ClosedForm { .. }) && spec.ou().is_ok();
    if closed {
        let order = match backend {
            LinearBackend::ClosedForm { order } => *order,
            _ => DEFAULT_ORDER,
        };
        out.push(chapman_kolmogorov_report(spec, &TestFunction::named("cos")?, cases, order)?);
        let fam: Vec<TestFunction> = ["one", "x", "x2", "gauss", "cos"]
            .iter()
            .map(|n| TestFunction::named(n))
            .collect::<Result<_>>()?;
        out.push(invariance_report(spec, &fam, cases, order.max(linear_nested_order(spec)))?);
    } else {
        out.push(EstimateReport::not_applicable(
            "invariance",
            "invariance ∫G(t,s)f dμ_t = ∫f dμ_s",
            "needs the closed-form backend and OU coefficients",
        ));
    }
    if spec.dim() == 1 && (closed || matches!(backend, LinearBackend::Grid { .. })) {
        let ks: Vec<u32> = match backend {
            LinearBackend::ClosedForm { .. } => (3..=9).collect(),
            LinearBackend::Grid { .. } => (1..=4).collect(),
        };
        let f = match backend {
            LinearBackend::ClosedForm { .. } => TestFunction::named("steep_tanh")?,
            LinearBackend::Grid { .. } => TestFunction::new("tanh(5x)", 1.0, |x| (5.0 * x[0]).tanh()),
        };
        out.push(gradient_scaling_report(spec, backend, &f, &ks)?);
    }
    Ok(out)
}

/// Grid and Monte Carlo against the closed form at random `(x, s, t)`. One
/// path ensemble per case is shared by all test functions.
pub fn backend_agreement(
    spec: &ProblemSpec,
    fs: &[TestFunction],
    cases: &RandomCases,
    grid: &Grid,
    scheme: &SchemeConfig,
    sde: &SDEConfig,
) -> Result<Vec<EstimateReport>> {
    let closed = LinearBackend::closed_form();
    let gridb = LinearBackend::Grid {
        grid: *grid,
        scheme: *scheme,
    };
    let mut rg = EstimateReport::new(
        "agreement/grid",
        "grid and closed-form G(t,s)f agree",
        GRID_TOL,
        gridb.describe(),
    );
    let mut rm = EstimateReport::new(
        "agreement/mc",
        "Monte Carlo and closed-form G(t,s)f agree within 3·stderr + 2·dt",
        0.0,
        format!(
            "Euler–Maruyama dt={} paths={} seed={} antithetic={}",
            sde.dt, sde.n_paths, sde.seed, sde.antithetic
        ),
    );
    for (k, (x, s, t)) in cases.draw(spec).into_iter().enumerate() {
        let ens = simulate(spec, &x, s, t, sde)?;
        let inputs = format!("x={} s={s:.6} t={t:.6}", fmt_point(&x));
        for f in fs {
            let exact = closed.apply(spec, f, &[x.clone()], s, t)?[0];
            let g = gridb.apply(spec, f, &[x.clone()], s, t)?[0];
            rg.push(Case::new(format!("{}/{k}", f.name), inputs.clone(), (g - exact).abs(), 0.0));
            let ff = |y: &[f64]| f.eval(y);
            let (est, se) = ens.mean_with_stderr(&ff);
            rm.push(Case::new(
                format!("{}/{k}", f.name),
                format!("{inputs} stderr={se:.3e}"),
                (est - exact).abs(),
                3.0 * se + 2.0 * sde.dt,
            ));
        }
    }
    Ok(vec![rg.finish(), rm.finish()])
}
