//! Problem instances: coefficients of `A(t)`, the nonlinearity `ψ` and the
//! Lyapunov certificate, plus sample-based hypothesis validators.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::symmetrize_in_place;
use crate::ou::OUCoefficients;

mod builtins;
mod hypotheses;

pub use builtins::{builtin, heat1d, ou1d, ou_timedep, polycoef, BUILTIN_NAMES};
pub use hypotheses::{
    check_base_hypotheses, check_growth_and_dissipativity, ClauseReport, GlobalRoute,
    GrowthClause, HypothesisReport, SamplePlan,
};

/// `t ↦ value`.
pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// `(t, x, out)`: writes a vector or a row-major `d×d` matrix into `out`.
pub type FieldFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;
/// `(t, ξ) ↦ ψ(t, ξ)`.
pub type PsiFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A scalar `C²` function on `ℝ^d` with analytic first and second derivatives.
pub trait SmoothField: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Row-major `d×d` Hessian.
    fn hessian(&self, x: &[f64], out: &mut [f64]);
}

/// `φ(x) = (1 + |x|²)^r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialPower {
    pub dim: usize,
    pub r: f64,
}

impl SmoothField for RadialPower {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (1.0 + norm2(x)).powf(self.r)
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let w = 1.0 + norm2(x);
        let g = 2.0 * self.r * w.powf(self.r - 1.0);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = g * xi;
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let w = 1.0 + norm2(x);
        let g = 2.0 * self.r * w.powf(self.r - 1.0);
        let h = 4.0 * self.r * (self.r - 1.0) * w.powf(self.r - 2.0);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = h * x[i] * x[j] + if i == j { g } else { 0.0 };
            }
        }
    }
}

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type DerivFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// A [`SmoothField`] assembled from closures.
#[derive(Clone)]
pub struct ClosureField {
    dim: usize,
    value: ValueFn,
    gradient: DerivFn,
    hessian: DerivFn,
}

impl ClosureField {
    pub fn new(
        dim: usize,
        value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        hessian: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }

    /// The constant function `c`.
    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(
            dim,
            move |_| c,
            |_, g| g.fill(0.0),
            |_, h| h.fill(0.0),
        )
    }
}

impl fmt::Debug for ClosureField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosureField").field("dim", &self.dim).finish()
    }
}

impl SmoothField for ClosureField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        (self.hessian)(x, out)
    }
}

/// Bounds `k(t)`, `m(t)` of the gradient hypotheses on the coefficients.
#[derive(Clone)]
pub struct SmoothBounds {
    pub k: TimeFn,
    pub m: TimeFn,
}

impl SmoothBounds {
    pub fn constant(k: f64, m: f64) -> Self {
        Self {
            k: Arc::new(move |_| k),
            m: Arc::new(move |_| m),
        }
    }
}

/// Diffusion matrix `Q(t,x)` and drift `b(t,x)` of `A(t)`.
#[derive(Clone)]
pub struct CoefficientField {
    dim: usize,
    q: FieldFn,
    b: FieldFn,
    eta0_claimed: f64,
    smooth_bounds: Option<SmoothBounds>,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &self.dim)
            .field("eta0_claimed", &self.eta0_claimed)
            .field("smooth_bounds", &self.smooth_bounds.is_some())
            .finish()
    }
}

impl CoefficientField {
    pub fn new(
        dim: usize,
        q: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        b: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        eta0_claimed: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        if !(eta0_claimed > 0.0 && eta0_claimed.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "ellipticity floor eta0 must be positive, got {eta0_claimed}"
            )));
        }
        Ok(Self {
            dim,
            q: Arc::new(q),
            b: Arc::new(b),
            eta0_claimed,
            smooth_bounds: None,
        })
    }

    /// Zero-diffusion coefficients. Not elliptic; only meant for frozen-dynamics
    /// oracle checks.
    pub fn degenerate(
        dim: usize,
        b: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            q: Arc::new(|_, _, out: &mut [f64]| out.fill(0.0)),
            b: Arc::new(b),
            eta0_claimed: 0.0,
            smooth_bounds: None,
        }
    }

    pub fn with_smooth_bounds(mut self, bounds: SmoothBounds) -> Self {
        self.smooth_bounds = Some(bounds);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eta0_claimed(&self) -> f64 {
        self.eta0_claimed
    }

    pub fn smooth_bounds(&self) -> Option<&SmoothBounds> {
        self.smooth_bounds.as_ref()
    }

    /// Symmetrized `Q(t,x)` into a row-major `d×d` buffer.
    pub fn q_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.q)(t, x, out);
        symmetrize_in_place(out, self.dim);
    }

    pub fn b_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.b)(t, x, out);
    }

    pub fn q(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        self.q_into(t, x, &mut out);
        out
    }

    pub fn b(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.b_into(t, x, &mut out);
        out
    }
}

/// The nonlinearity `ψ(t, ξ)` and its optional structural constants.
#[derive(Clone)]
pub struct SemilinearTerm {
    pub psi: PsiFn,
    pub d_psi_at_zero: Option<TimeFn>,
    pub lipschitz_l: Option<f64>,
    pub psi0: Option<f64>,
    pub growth_k: Option<f64>,
    pub linear_growth_h: Option<f64>,
    /// Free-form label used in reports.
    pub label: String,
}

impl fmt::Debug for SemilinearTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemilinearTerm")
            .field("label", &self.label)
            .field("lipschitz_l", &self.lipschitz_l)
            .field("psi0", &self.psi0)
            .field("growth_k", &self.growth_k)
            .field("linear_growth_h", &self.linear_growth_h)
            .finish()
    }
}

impl SemilinearTerm {
    pub fn new(label: impl Into<String>, psi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            psi: Arc::new(psi),
            d_psi_at_zero: None,
            lipschitz_l: None,
            psi0: None,
            growth_k: None,
            linear_growth_h: None,
            label: label.into(),
        }
    }

    /// `ψ ≡ 0`.
    pub fn zero() -> Self {
        let mut s = Self::new("0", |_, _| 0.0);
        s.d_psi_at_zero = Some(Arc::new(|_| 0.0));
        s.lipschitz_l = Some(0.0);
        s.psi0 = Some(0.0);
        s.growth_k = Some(0.0);
        s.linear_growth_h = Some(0.0);
        s
    }

    pub fn with_derivative_at_zero(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.d_psi_at_zero = Some(Arc::new(d));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz_l = Some(l);
        self
    }

    pub fn with_psi0(mut self, psi0: f64) -> Self {
        self.psi0 = Some(psi0);
        self
    }

    pub fn with_growth_k(mut self, k: f64) -> Self {
        self.growth_k = Some(k);
        self
    }

    pub fn with_linear_growth(mut self, h: f64) -> Self {
        self.linear_growth_h = Some(h);
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, xi: f64) -> f64 {
        (self.psi)(t, xi)
    }
}

/// Lyapunov function `φ` with `A(t)φ ≤ a − cφ`.
#[derive(Clone)]
pub struct LyapunovCertificate {
    pub phi: Arc<dyn SmoothField>,
    pub a: f64,
    pub c: f64,
    /// `(C0, C1, C2)` of the growth conditions.
    pub growth_consts: Option<(f64, f64, f64)>,
    /// Increasing radii along which `φ` must grow without bound.
    pub escape_radii: Vec<f64>,
}

impl fmt::Debug for LyapunovCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovCertificate")
            .field("a", &self.a)
            .field("c", &self.c)
            .field("growth_consts", &self.growth_consts)
            .finish()
    }
}

impl LyapunovCertificate {
    pub fn new(phi: Arc<dyn SmoothField>, a: f64, c: f64) -> Result<Self> {
        if !(a > 0.0 && c > 0.0 && a.is_finite() && c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "Lyapunov constants must be positive, got a = {a}, c = {c}"
            )));
        }
        Ok(Self {
            phi,
            a,
            c,
            growth_consts: None,
            escape_radii: (0..12).map(|k| 2f64.powi(k)).collect(),
        })
    }

    pub fn with_growth_consts(mut self, c0: f64, c1: f64, c2: f64) -> Self {
        self.growth_consts = Some((c0, c1, c2));
        self
    }

    /// `a / c`, the long-time bound on `∫ φ dμ_t`.
    pub fn stationary_bound(&self) -> f64 {
        self.a / self.c
    }
}

/// `I = (lower, ∞)` with the working window `[s, τ] ⊂ I`; `lower = None` is `−∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    pub lower: Option<f64>,
    pub s: f64,
    pub tau: f64,
}

impl TimeInterval {
    pub fn new(lower: Option<f64>, s: f64, tau: f64) -> Result<Self> {
        if !(s.is_finite() && tau.is_finite() && tau > s) {
            return Err(Error::InvalidInput(format!(
                "working window needs finite s < tau, got [{s}, {tau}]"
            )));
        }
        if let Some(l) = lower {
            if s < l {
                return Err(Error::InvalidInput(format!(
                    "window start {s} lies before the interval start {l}"
                )));
            }
        }
        Ok(Self { lower, s, tau })
    }

    pub fn whole_line(s: f64, tau: f64) -> Result<Self> {
        Self::new(None, s, tau)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lower.is_none_or(|l| t >= l)
    }

    pub fn len(&self) -> f64 {
        self.tau - self.s
    }
}

/// A complete problem instance.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub coefficients: CoefficientField,
    pub nonlinearity: SemilinearTerm,
    pub lyapunov: LyapunovCertificate,
    pub time: TimeInterval,
    pub ou: Option<OUCoefficients>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("nonlinearity", &self.nonlinearity.label)
            .field("time", &self.time)
            .field("ou", &self.ou.is_some())
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        coefficients: CoefficientField,
        nonlinearity: SemilinearTerm,
        lyapunov: LyapunovCertificate,
        time: TimeInterval,
    ) -> Result<Self> {
        let d = coefficients.dim();
        if lyapunov.phi.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: lyapunov.phi.dim(),
            });
        }
        Ok(Self {
            name: name.into(),
            coefficients,
            nonlinearity,
            lyapunov,
            time,
            ou: None,
        })
    }

    pub fn with_ou(mut self, ou: OUCoefficients) -> Result<Self> {
        if ou.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: ou.dim(),
            });
        }
        self.ou = Some(ou);
        Ok(self)
    }

    pub fn with_nonlinearity(mut self, term: SemilinearTerm) -> Self {
        self.nonlinearity = term;
        self
    }

    pub fn with_window(mut self, s: f64, tau: f64) -> Result<Self> {
        self.time = TimeInterval::new(self.time.lower, s, tau)?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn ou(&self) -> Result<&OUCoefficients> {
        self.ou.as_ref().ok_or_else(|| {
            Error::Unsupported(format!("problem `{}` has no Ornstein–Uhlenbeck structure", self.name))
        })
    }
}

/// `Tr(Q D²ζ) + ⟨b, ∇ζ⟩` at one point; `scratch` must hold `2d² + 2d` entries.
pub(crate) fn generator_at(
    coeff: &CoefficientField,
    field: &dyn SmoothField,
    t: f64,
    x: &[f64],
    scratch: &mut [f64],
) -> f64 {
    let d = coeff.dim();
    let (q, rest) = scratch.split_at_mut(d * d);
    let (hess, rest) = rest.split_at_mut(d * d);
    let (b, rest) = rest.split_at_mut(d);
    let grad = &mut rest[..d];
    coeff.q_into(t, x, q);
    coeff.b_into(t, x, b);
    field.hessian(x, hess);
    field.gradient(x, grad);
    let mut acc = 0.0;
    for i in 0..d {
        for j in 0..d {
            acc += q[i * d + j] * hess[j * d + i];
        }
        acc += b[i] * grad[i];
    }
    acc
}

/// `(A(t)ζ)(x)` for each point.
pub fn apply_generator(
    spec: &ProblemSpec,
    field: &dyn SmoothField,
    t: f64,
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let d = spec.dim();
    if field.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: field.dim(),
        });
    }
    let mut scratch = vec![0.0; 2 * d * d + 2 * d];
    points
        .iter()
        .map(|x| {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
            Ok(generator_at(&spec.coefficients, field, t, x, &mut scratch))
        })
        .collect()
}

#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> ClosureField {
        ClosureField::new(1, |x| x[0] * x[0], |x, g| g[0] = 2.0 * x[0], |_, h| h[0] = 2.0)
    }

    #[test]
    fn generator_on_quadratic_ou() {
        let spec = ou1d();
        let pts: Vec<Vec<f64>> = (-4..=4).map(|k| vec![k as f64 * 0.7]).collect();
        let v = apply_generator(&spec, &square(), 0.3, &pts).unwrap();
        for (p, val) in pts.iter().zip(v) {
            assert_eq!(val, 2.0 - 2.0 * p[0] * p[0]);
        }
    }

    #[test]
    fn generator_kills_constants() {
        let spec = polycoef(0.0, 1.0, 1.0, 2).unwrap();
        let c = ClosureField::constant(2, 3.5);
        let pts = vec![vec![0.1, -2.0], vec![5.0, 1.0]];
        assert!(apply_generator(&spec, &c, 1.0, &pts).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn certificate_identity_ou1d() {
        let spec = ou1d();
        let pts: Vec<Vec<f64>> = (-10..=10).map(|k| vec![k as f64]).collect();
        let v = apply_generator(&spec, spec.lyapunov.phi.as_ref(), 0.0, &pts).unwrap();
        for (p, val) in pts.iter().zip(v) {
            let phi = 1.0 + p[0] * p[0];
            assert!((val - (4.0 - 2.0 * phi)).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = ou1d();
        let c = ClosureField::constant(2, 1.0);
        assert!(matches!(
            apply_generator(&spec, &c, 0.0, &[vec![0.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn radial_power_derivatives_match_differences() {
        let phi = RadialPower { dim: 2, r: 1.5 };
        let x = [0.3, -0.8];
        let mut g = [0.0; 2];
        let mut h = [0.0; 4];
        phi.gradient(&x, &mut g);
        phi.hessian(&x, &mut h);
        let e = 1e-5;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += e;
            xm[i] -= e;
            let fd = (phi.value(&xp) - phi.value(&xm)) / (2.0 * e);
            assert!((fd - g[i]).abs() < 1e-8);
            let mut gp = [0.0; 2];
            let mut gm = [0.0; 2];
            phi.gradient(&xp, &mut gp);
            phi.gradient(&xm, &mut gm);
            for j in 0..2 {
                assert!(((gp[j] - gm[j]) / (2.0 * e) - h[j * 2 + i]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn time_interval_validation() {
        assert!(TimeInterval::new(Some(0.0), -1.0, 1.0).is_err());
        assert!(TimeInterval::new(None, 1.0, 1.0).is_err());
        let ti = TimeInterval::new(Some(0.0), 0.0, 2.0).unwrap();
        assert!(ti.contains(5.0) && !ti.contains(-0.1));
    }
}
