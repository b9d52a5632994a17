//! The time derivative of `t ↦ ∫ g(t) dμ_t` and the space-time measure `ν`.

use std::sync::Arc;

use nalgebra::DVector;

use super::{measure_at, Case, EstimateReport};
use crate::error::{Error, Result};
use crate::ou::GaussianMeasure;
use crate::problem::{generator_at, ProblemSpec, SmoothField};
use crate::quadrature::{gauss_legendre, QuadratureRule};

/// Tolerance of the derivative identity.
pub const DERIVATIVE_TOL: f64 = 1e-5;

/// `x ↦ exp(−1/(1 − |x − c|²/w²))` inside the ball, zero outside.
#[derive(Debug, Clone, PartialEq)]
struct Bump {
    center: Vec<f64>,
    width: f64,
}

impl Bump {
    /// `(B(u), B'(u), B''(u))` with `u = |x − c|²/w²`.
    fn profile(u: f64) -> (f64, f64, f64) {
        if u >= 1.0 {
            return (0.0, 0.0, 0.0);
        }
        let r = 1.0 / (1.0 - u);
        let b = (-r).exp();
        (b, -b * r * r, b * (r.powi(4) - 2.0 * r.powi(3)))
    }

    fn u(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() / (self.width * self.width)
    }
}

impl SmoothField for Bump {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        Self::profile(self.u(x)).0
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let (_, b1, _) = Self::profile(self.u(x));
        let w2 = self.width * self.width;
        for i in 0..x.len() {
            out[i] = b1 * 2.0 * (x[i] - self.center[i]) / w2;
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let (_, b1, b2) = Self::profile(self.u(x));
        let d = x.len();
        let w2 = self.width * self.width;
        for i in 0..d {
            for j in 0..d {
                let ui = 2.0 * (x[i] - self.center[i]) / w2;
                let uj = 2.0 * (x[j] - self.center[j]) / w2;
                out[i * d + j] = b2 * ui * uj + if i == j { b1 * 2.0 / w2 } else { 0.0 };
            }
        }
    }
}

/// `g(t, x) = a(t) · bump(x)` with `a` and `a'` supplied.
#[derive(Clone)]
pub struct BumpTest {
    pub name: String,
    pub center: Vec<f64>,
    pub width: f64,
    pub a: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
}

impl std::fmt::Debug for BumpTest {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BumpTest({})", self.name)
    }
}

impl BumpTest {
    pub fn new(
        name: &str,
        center: Vec<f64>,
        width: f64,
        a: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            center,
            width,
            a: Arc::new(a),
        }
    }

    /// `g ≡ 0`, realized as a zero amplitude.
    pub fn zero(d: usize) -> Self {
        Self::new("zero", vec![0.0; d], 1.0, |_| (0.0, 0.0))
    }

    fn bump(&self) -> Bump {
        Bump {
            center: self.center.clone(),
            width: self.width,
        }
    }
}

/// Centers `{0, 0.5 e₁, −e₁}` × widths `{0.5, 1, 2}` × amplitudes
/// `{1, 1 + t²/2, cos t}`.
pub fn bump_family(d: usize) -> Vec<BumpTest> {
    let mut out = Vec::new();
    for (cn, c1) in [("c0", 0.0), ("c+0.5", 0.5), ("c-1", -1.0)] {
        for w in [0.5, 1.0, 2.0] {
            let mut c = vec![0.0; d];
            c[0] = c1;
            out.push(BumpTest::new(&format!("{cn}/w{w}/const"), c.clone(), w, |_| (1.0, 0.0)));
            out.push(BumpTest::new(&format!("{cn}/w{w}/quad"), c.clone(), w, |t| (1.0 + 0.5 * t * t, t)));
            out.push(BumpTest::new(&format!("{cn}/w{w}/cos"), c, w, |t| (t.cos(), -t.sin())));
        }
    }
    out
}

/// Tensor composite Gauss–Legendre nodes on the support box of a bump,
/// weights times the Gaussian density.
struct BoxRule {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

const PANELS: usize = 32;
const ORDER: usize = 8;

impl BoxRule {
    fn new(mu: &GaussianMeasure, center: &[f64], width: f64) -> Result<Self> {
        let d = mu.dim();
        if d > 2 {
            return Err(Error::Unsupported(format!("bump quadrature in dimension {d} (supported: 1, 2)")));
        }
        for i in 0..d {
            let sd = mu.cov[(i, i)].sqrt();
            let (lo, hi) = (center[i] - width, center[i] + width);
            if lo < mu.mean[i] - 10.0 * sd || hi > mu.mean[i] + 10.0 * sd {
                return Err(Error::Precondition(format!(
                    "bump support [{lo}, {hi}] on axis {i} leaves the resolved region mean ± 10 sd"
                )));
            }
        }
        let chol = mu
            .cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Precondition("μ_t covariance is not positive definite".into()))?;
        let inv = chol.inverse();
        let det: f64 = mu.cov.determinant();
        let norm = ((2.0 * std::f64::consts::PI).powi(d as i32) * det).sqrt().recip();
        let (z, w) = gauss_legendre(ORDER);
        let h = 2.0 * width / PANELS as f64;
        let mut axis: Vec<(f64, f64)> = Vec::with_capacity(PANELS * ORDER);
        for p in 0..PANELS {
            let mid = -width + (p as f64 + 0.5) * h;
            for k in 0..ORDER {
                axis.push((mid + 0.5 * h * z[k], 0.5 * h * w[k]));
            }
        }
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut push = |x: Vec<f64>, wt: f64| {
            let dx = DVector::from_iterator(d, x.iter().zip(mu.mean.iter()).map(|(a, m)| a - m));
            let q = (dx.transpose() * &inv * &dx)[(0, 0)];
            weights.push(wt * norm * (-0.5 * q).exp());
            nodes.push(x);
        };
        if d == 1 {
            for &(u, wu) in &axis {
                push(vec![center[0] + u], wu);
            }
        } else {
            for &(v, wv) in &axis {
                for &(u, wu) in &axis {
                    push(vec![center[0] + u, center[1] + v], wu * wv);
                }
            }
        }
        Ok(Self { nodes, weights })
    }

    fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)).sum()
    }
}

/// `∫ bump dμ_t`.
fn bump_mass(spec: &ProblemSpec, b: &BumpTest, t: f64) -> Result<f64> {
    let mu = measure_at(spec, t)?;
    let rule = BoxRule::new(&mu, &b.center, b.width)?;
    let bump = b.bump();
    Ok(rule.integrate(|x| bump.value(x)))
}

/// Centered difference of `t ↦ ∫ g(t) dμ_t` with step `dt` against
/// `∫ D_t g dμ_t − ∫ A(t) g dμ_t`.
pub fn verify_measure_derivative(
    spec: &ProblemSpec,
    family: &[BumpTest],
    times: &[f64],
    dt: f64,
) -> Result<EstimateReport> {
    let anchor = "d/dt ∫g dμ_t = ∫D_t g dμ_t − ∫A(t)g dμ_t";
    if spec.ou().is_err() {
        return Ok(EstimateReport::not_applicable("measure_derivative", anchor, "needs OU coefficients"));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {dt}")));
    }
    let d = spec.dim();
    let mut r = EstimateReport::new(
        "measure_derivative",
        anchor,
        DERIVATIVE_TOL,
        format!("closed-form μ_t, composite Gauss–Legendre {PANELS}×{ORDER} per axis on the support, δt = {dt}"),
    );
    let mut scratch = vec![0.0; 2 * d * d + 2 * d];
    for b in family {
        if b.center.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: b.center.len(),
            });
        }
        let bump = b.bump();
        for &t in times {
            let (a_p, _) = (b.a)(t + dt);
            let (a_m, _) = (b.a)(t - dt);
            let lhs = (a_p * bump_mass(spec, b, t + dt)? - a_m * bump_mass(spec, b, t - dt)?) / (2.0 * dt);
            let (a, da) = (b.a)(t);
            let mu = measure_at(spec, t)?;
            let rule = BoxRule::new(&mu, &b.center, b.width)?;
            let mass = rule.integrate(|x| bump.value(x));
            let gen = rule.integrate(|x| generator_at(&spec.coefficients, &bump, t, x, &mut scratch));
            let rhs = da * mass - a * gen;
            r.push(Case::new(
                format!("{}/t{t}", b.name),
                format!("lhs=FD, rhs=quadrature, a(t)={a:.6}"),
                (lhs - rhs).abs(),
                0.0,
            ));
        }
    }
    Ok(r.finish())
}

/// `ν(J × O) = ∫_J μ_t(O) dt` with composite Gauss–Legendre in time.
#[derive(Debug, Clone)]
pub struct SpaceTimeMeasure {
    pub s: f64,
    pub tau: f64,
    /// `(t_j, w_j, μ_{t_j})`.
    pub slices: Vec<(f64, f64, GaussianMeasure)>,
}

impl SpaceTimeMeasure {
    pub fn new(spec: &ProblemSpec, s: f64, tau: f64, panels: usize) -> Result<Self> {
        if !(tau > s) || panels == 0 {
            return Err(Error::InvalidInput(format!("need s < τ and panels > 0, got [{s}, {tau}], {panels}")));
        }
        let (z, w) = gauss_legendre(ORDER);
        let h = (tau - s) / panels as f64;
        let mut slices = Vec::with_capacity(panels * ORDER);
        for p in 0..panels {
            let mid = s + (p as f64 + 0.5) * h;
            for k in 0..ORDER {
                let t = mid + 0.5 * h * z[k];
                slices.push((t, 0.5 * h * w[k], measure_at(spec, t)?));
            }
        }
        Ok(Self { s, tau, slices })
    }

    /// `∫∫ f(t, x) ν(dt, dx)`.
    pub fn integrate(&self, f: &dyn Fn(f64, &[f64]) -> f64, rule: &QuadratureRule) -> Result<f64> {
        let mut acc = 0.0;
        for (t, w, mu) in &self.slices {
            acc += w * mu.expect(&|x| f(*t, x), rule)?;
        }
        Ok(acc)
    }

    /// `ν([s, τ] × ℝ^d)`, which should equal `τ − s`.
    pub fn total_mass(&self, rule: &QuadratureRule) -> Result<f64> {
        self.integrate(&|_, _| 1.0, rule)
    }

    /// `‖u‖_{L^p(ν)}`.
    pub fn lp_norm(&self, u: &dyn Fn(f64, &[f64]) -> f64, p: f64, rule: &QuadratureRule) -> Result<f64> {
        if !(p >= 1.0 && p.is_finite()) {
            return Err(Error::Precondition(format!("L^p norm needs p ≥ 1 finite, got {p}")));
        }
        Ok(self.integrate(&|t, x| u(t, x).abs().powf(p), rule)?.powf(1.0 / p))
    }
}
