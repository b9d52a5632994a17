//! Ornstein–Uhlenbeck coefficients `Q(t)`, `b(t,x) = B(t)x + f(t)`: Gaussian
//! transition kernels and the tight evolution system of measures.
//!
//! For `u(t) = G(t,s)f` solving `D_t u = A(t)u`, `u(s) = f`, the kernel
//! `p(t,s,x,·)` is `N(M(t,s)x + m(t,s), Σ(t,s))` with
//!
//! ```text
//! ∂_t M(t,s) = M(t,s) B(t),   M(s,s) = I,
//! m(t,s) = ∫_s^t M(r,s) f(r) dr,
//! Σ(t,s) = ∫_s^t M(r,s) 2Q(r) M(r,s)ᵀ dr.
//! ```
//!
//! The factor 2 comes from the generator `Tr(Q D²)` having no `1/2`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_eigenvalue, min_eigenvalue, psd_sqrt, symmetrize};
use crate::problem::CoefficientField;
use crate::quadrature::{simpson_weights, QuadratureRule};

mod measure;

pub use measure::{gaussian_lp_norm, ou_evolution_measure, GaussianMeasure, DEFAULT_HORIZON};

/// ODE steps per unit time used when no explicit count is given.
pub const STEPS_PER_UNIT_TIME: f64 = 64.0;

type MatTimeFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;
type VecTimeFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
pub struct OUCoefficients {
    d: usize,
    q: MatTimeFn,
    b: MatTimeFn,
    f: VecTimeFn,
}

impl fmt::Debug for OUCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OUCoefficients").field("d", &self.d).finish()
    }
}

impl OUCoefficients {
    pub fn new(
        d: usize,
        q: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
        b: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
        f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("dimension must be positive".into()));
        }
        let ou = Self {
            d,
            q: Arc::new(q),
            b: Arc::new(b),
            f: Arc::new(f),
        };
        let (q0, b0, f0) = (ou.q(0.0), ou.b(0.0), ou.f(0.0));
        for (what, r, c) in [
            ("q", q0.nrows(), q0.ncols()),
            ("B", b0.nrows(), b0.ncols()),
            ("fvec", f0.nrows(), 1),
        ] {
            let want = if what == "fvec" { (d, 1) } else { (d, d) };
            if (r, c) != want {
                return Err(Error::InvalidInput(format!(
                    "{what} has shape {r}×{c}, expected {}×{}",
                    want.0, want.1
                )));
            }
        }
        Ok(ou)
    }

    /// Time-independent coefficients.
    pub fn constant(q: DMatrix<f64>, b: DMatrix<f64>, f: DVector<f64>) -> Result<Self> {
        let d = q.nrows();
        Self::new(d, move |_| q.clone(), move |_| b.clone(), move |_| f.clone())
    }

    /// Scalar 1-d coefficients.
    pub fn scalar(
        q: impl Fn(f64) -> f64 + Send + Sync + 'static,
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            d: 1,
            q: Arc::new(move |t| DMatrix::from_element(1, 1, q(t))),
            b: Arc::new(move |t| DMatrix::from_element(1, 1, b(t))),
            f: Arc::new(move |t| DVector::from_element(1, f(t))),
        }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Symmetrized diffusion matrix.
    pub fn q(&self, t: f64) -> DMatrix<f64> {
        symmetrize(&(self.q)(t))
    }

    pub fn b(&self, t: f64) -> DMatrix<f64> {
        (self.b)(t)
    }

    pub fn f(&self, t: f64) -> DVector<f64> {
        (self.f)(t)
    }

    /// Largest eigenvalue of the symmetric part of `B(t)`.
    pub fn log_norm(&self, t: f64) -> f64 {
        max_eigenvalue(&self.b(t))
    }

    /// The general coefficient view `Q(t,x) = Q(t)`, `b(t,x) = B(t)x + f(t)`.
    pub fn to_coefficient_field(&self, eta0_claimed: f64) -> Result<CoefficientField> {
        let d = self.d;
        let q = self.q.clone();
        let b = self.b.clone();
        let f = self.f.clone();
        CoefficientField::new(
            d,
            move |t, _x, out| {
                let m = q(t);
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = m[(i, j)];
                    }
                }
            },
            move |t, x, out| {
                let bm = b(t);
                let fv = f(t);
                for i in 0..d {
                    let mut acc = fv[i];
                    for j in 0..d {
                        acc += bm[(i, j)] * x[j];
                    }
                    out[i] = acc;
                }
            },
            eta0_claimed,
        )
    }

    /// Smallest eigenvalue of `Q` over `n` uniform samples of `[t0, t1]`.
    pub fn sampled_ellipticity(&self, t0: f64, t1: f64, n: usize) -> f64 {
        (0..=n)
            .map(|k| min_eigenvalue(&self.q(t0 + (t1 - t0) * k as f64 / n.max(1) as f64)))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Data of the kernel `p(t,s,x,·) = N(u x + mshift, sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagator {
    pub s: f64,
    pub t: f64,
    /// Kernel mean map `M(t,s)`.
    pub u: DMatrix<f64>,
    pub mshift: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

fn check_finite_mat(m: &DMatrix<f64>, t: f64, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            t,
            what: what.to_string(),
        })
    }
}

/// Default uniform step count for `[s, t]`: 64 per unit time, even, at least 2.
pub fn default_steps(s: f64, t: f64) -> usize {
    let n = ((t - s) * STEPS_PER_UNIT_TIME).ceil().max(2.0) as usize;
    n + n % 2
}

/// `M`, `m`, `Σ` over `[s, t]` by classical RK4 for `M` and composite Simpson
/// for the two integrals on the same mesh. An odd step count is bumped by one.
pub fn compute_propagator(ou: &OUCoefficients, s: f64, t: f64, ode_steps: usize) -> Result<Propagator> {
    if !(t >= s) {
        return Err(Error::InvalidInput(format!("propagator needs t ≥ s, got s = {s}, t = {t}")));
    }
    if ode_steps == 0 {
        return Err(Error::InvalidInput("ode_steps must be at least 1".into()));
    }
    let d = ou.dim();
    if t == s {
        return Ok(Propagator {
            s,
            t,
            u: DMatrix::identity(d, d),
            mshift: DVector::zeros(d),
            sigma: DMatrix::zeros(d, d),
        });
    }
    let n = ode_steps + ode_steps % 2;
    let h = (t - s) / n as f64;
    let w = simpson_weights(n, h);
    let mut m = DMatrix::<f64>::identity(d, d);
    let mut mshift = DVector::<f64>::zeros(d);
    let mut sigma = DMatrix::<f64>::zeros(d, d);
    let mut b_lo = ou.b(s);
    check_finite_mat(&b_lo, s, "drift matrix B")?;
    for i in 0..=n {
        let r = if i == n { t } else { s + i as f64 * h };
        let q = ou.q(r);
        let f = ou.f(r);
        check_finite_mat(&q, r, "diffusion q")?;
        if !f.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                t: r,
                what: "drift shift fvec".into(),
            });
        }
        mshift += &m * f * w[i];
        sigma += &m * q * m.transpose() * (2.0 * w[i]);
        if i == n {
            break;
        }
        let r_next = if i + 1 == n { t } else { s + (i + 1) as f64 * h };
        let b_mid = ou.b(r + 0.5 * h);
        let b_hi = ou.b(r_next);
        check_finite_mat(&b_mid, r + 0.5 * h, "drift matrix B")?;
        check_finite_mat(&b_hi, r_next, "drift matrix B")?;
        let k1 = &m * &b_lo;
        let k2 = (&m + &k1 * (0.5 * h)) * &b_mid;
        let k3 = (&m + &k2 * (0.5 * h)) * &b_mid;
        let k4 = (&m + &k3 * h) * &b_hi;
        m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        check_finite_mat(&m, r_next, "fundamental matrix")?;
        b_lo = b_hi;
    }
    Ok(Propagator {
        s,
        t,
        u: m,
        mshift,
        sigma: symmetrize(&sigma),
    })
}

impl Propagator {
    /// [`compute_propagator`] on the [`default_steps`] mesh and on its
    /// halving, combined by one Richardson step (both rules are fourth order).
    pub fn new(ou: &OUCoefficients, s: f64, t: f64) -> Result<Self> {
        let n = default_steps(s, t);
        let coarse = compute_propagator(ou, s, t, n)?;
        if t == s {
            return Ok(coarse);
        }
        let fine = compute_propagator(ou, s, t, 2 * n)?;
        let (a, b) = (16.0 / 15.0, -1.0 / 15.0);
        Ok(Propagator {
            s,
            t,
            u: &fine.u * a + &coarse.u * b,
            mshift: &fine.mshift * a + &coarse.mshift * b,
            sigma: symmetrize(&(&fine.sigma * a + &coarse.sigma * b)),
        })
    }

    pub fn dim(&self) -> usize {
        self.u.nrows()
    }

    /// Composition with a propagator over the following interval:
    /// `self` on `[s, r]`, `later` on `[r, t]` gives `[s, t]`.
    pub fn then(&self, later: &Propagator) -> Result<Propagator> {
        if (later.s - self.t).abs() > 1e-12 * (1.0 + self.t.abs()) {
            return Err(Error::InvalidInput(format!(
                "cannot compose propagators on [{}, {}] and [{}, {}]",
                self.s, self.t, later.s, later.t
            )));
        }
        Ok(Propagator {
            s: self.s,
            t: later.t,
            u: &self.u * &later.u,
            mshift: &self.u * &later.mshift + &self.mshift,
            sigma: symmetrize(&(&self.u * &later.sigma * self.u.transpose() + &self.sigma)),
        })
    }

    /// Mean of `p(t,s,x,·)`.
    pub fn mean_at(&self, x: &[f64]) -> DVector<f64> {
        &self.u * DVector::from_column_slice(x) + &self.mshift
    }

    /// Push-forward of `N(mean, cov)` through the kernel.
    pub fn push_forward(&self, mean: &DVector<f64>, cov: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        (
            &self.u * mean + &self.mshift,
            symmetrize(&(&self.u * cov * self.u.transpose() + &self.sigma)),
        )
    }

    /// `(G(t,s)f)(x)` by Gauss–Hermite quadrature.
    pub fn apply(&self, f: &dyn Fn(&[f64]) -> f64, x: &[f64], rule: &QuadratureRule) -> Result<f64> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
        if self.t == self.s {
            return Ok(f(x));
        }
        let mean = self.mean_at(x);
        let (root, _) = psd_sqrt(&self.sigma);
        expect_affine(f, &mean, &root, rule)
    }

    /// Diagnostics for the covariance: `(min eigenvalue, −tol_psd)`.
    pub fn psd_margin(&self) -> (f64, f64) {
        let tol = 1e-12 * max_abs(&self.sigma);
        (min_eigenvalue(&self.sigma), -tol)
    }
}

/// `E f(mean + root·Z)`, `Z ~ N(0, I)`.
pub(crate) fn expect_affine(
    f: &dyn Fn(&[f64]) -> f64,
    mean: &DVector<f64>,
    root: &DMatrix<f64>,
    rule: &QuadratureRule,
) -> Result<f64> {
    let d = mean.len();
    if rule.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: rule.dim(),
        });
    }
    let mut y = vec![0.0; d];
    Ok(rule.expect(|z| {
        for i in 0..d {
            let mut acc = mean[i];
            for j in 0..d {
                acc += root[(i, j)] * z[j];
            }
            y[i] = acc;
        }
        f(&y)
    }))
}

/// `(G(t,s)f)(x)` with the default ODE mesh.
pub fn apply_ou(
    ou: &OUCoefficients,
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    s: f64,
    t: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if rule.dim() != ou.dim() {
        return Err(Error::DimensionMismatch {
            expected: ou.dim(),
            got: rule.dim(),
        });
    }
    if t == s {
        return Ok(f(x));
    }
    Propagator::new(ou, s, t)?.apply(f, x, rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_ou() -> OUCoefficients {
        OUCoefficients::scalar(|_| 1.0, |_| -1.0, |_| 0.0)
    }

    #[test]
    fn constant_drift_closed_forms() {
        let p = compute_propagator(&std_ou(), 0.0, 1.0, 1000).unwrap();
        assert!((p.u[(0, 0)] - (-1f64).exp()).abs() < 1e-10);
        assert!((p.sigma[(0, 0)] - (1.0 - (-2f64).exp())).abs() < 1e-10);
        assert!(p.mshift[0].abs() < 1e-15);
    }

    #[test]
    fn empty_interval_is_identity() {
        let ou = OUCoefficients::scalar(|t| 2.0 + t.sin(), |_| -1.0, |t| t.cos());
        let p = compute_propagator(&ou, 0.7, 0.7, 10).unwrap();
        assert_eq!(p.u[(0, 0)], 1.0);
        assert_eq!(p.mshift[0], 0.0);
        assert_eq!(p.sigma[(0, 0)], 0.0);
    }

    #[test]
    fn cocycle_time_dependent() {
        let ou = OUCoefficients::scalar(|t| 2.0 + t.sin(), |t| -(1.0 + 0.5 * t.cos()), |t| t.cos());
        let whole = compute_propagator(&ou, 0.0, 2.0, 256).unwrap();
        let a = compute_propagator(&ou, 0.0, 1.0, 128).unwrap();
        let b = compute_propagator(&ou, 1.0, 2.0, 128).unwrap();
        let comp = a.then(&b).unwrap();
        assert!((whole.u[(0, 0)] - b.u[(0, 0)] * a.u[(0, 0)]).abs() < 1e-8);
        assert!((whole.mshift[0] - comp.mshift[0]).abs() < 1e-8);
        assert!((whole.sigma[(0, 0)] - comp.sigma[(0, 0)]).abs() < 1e-8);
    }

    #[test]
    fn moments_of_standard_ou() {
        let rule = QuadratureRule::default_for(1).unwrap();
        let ou = std_ou();
        let m1 = apply_ou(&ou, &|y| y[0], &[2.0], 0.0, 1.0, &rule).unwrap();
        assert!((m1 - 2.0 * (-1f64).exp()).abs() < 1e-10);
        let m2 = apply_ou(&ou, &|y| y[0] * y[0], &[0.0], 0.0, 1.0, &rule).unwrap();
        assert!((m2 - (1.0 - (-2f64).exp())).abs() < 1e-9);
        let one = apply_ou(&ou, &|_| 1.0, &[3.0], 0.0, 0.4, &rule).unwrap();
        assert!((one - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rule_dimension_checked() {
        let rule = QuadratureRule::gauss_hermite(2, 4).unwrap();
        assert!(apply_ou(&std_ou(), &|_| 1.0, &[0.0], 0.0, 1.0, &rule).is_err());
    }

    #[test]
    fn time_dependent_chapman_kolmogorov() {
        let ou = OUCoefficients::scalar(|t| 2.0 + t.sin(), |t| -(1.0 + 0.5 * t.cos()), |t| t.cos());
        let rule = QuadratureRule::default_for(1).unwrap();
        let f = |y: &[f64]| (y[0]).cos() + 0.1 * y[0] * y[0];
        let (s, r, t) = (0.0, 0.6, 1.5);
        let direct = apply_ou(&ou, &f, &[0.4], s, t, &rule).unwrap();
        let inner = Propagator::new(&ou, s, r).unwrap();
        let outer = Propagator::new(&ou, r, t).unwrap();
        let g = |y: &[f64]| inner.apply(&f, y, &rule).unwrap();
        let two = outer.apply(&g, &[0.4], &rule).unwrap();
        assert!((direct - two).abs() < 1e-8, "{direct} vs {two}");
    }

    #[test]
    fn two_dimensional_rotation_drift() {
        // B = [[-1, 1], [-1, -1]] has symmetric part -I.
        let b = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, -1.0, -1.0]);
        let ou = OUCoefficients::constant(DMatrix::identity(2, 2), b, DVector::zeros(2)).unwrap();
        let p = compute_propagator(&ou, 0.0, 1.0, 512).unwrap();
        // M(t) = e^{-t} R(t): Σ = (1 - e^{-2}) I.
        let want = 1.0 - (-2f64).exp();
        assert!((p.sigma[(0, 0)] - want).abs() < 1e-10);
        assert!(p.sigma[(0, 1)].abs() < 1e-10);
        let (lmin, floor) = p.psd_margin();
        assert!(lmin >= floor);
    }
}
