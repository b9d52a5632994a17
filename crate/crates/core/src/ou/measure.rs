use nalgebra::{DMatrix, DVector};

use super::{expect_affine, OUCoefficients, Propagator};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, psd_sqrt, symmetrize};
use crate::quadrature::QuadratureRule;

/// Horizon used by callers that do not choose one.
pub const DEFAULT_HORIZON: f64 = 40.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianMeasure {
    /// Checks symmetry and positive definiteness (Cholesky).
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cov.nrows(),
            });
        }
        let cov = symmetrize(&cov);
        if cov.clone().cholesky().is_none() {
            return Err(Error::InvalidInput("covariance is not positive definite".into()));
        }
        Ok(Self { mean, cov })
    }

    pub fn standard(d: usize) -> Self {
        Self {
            mean: DVector::zeros(d),
            cov: DMatrix::identity(d, d),
        }
    }

    pub fn scalar(mean: f64, var: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, mean), DMatrix::from_element(1, 1, var))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `∫ f dμ` by Gauss–Hermite after the affine change to `N(0, I)`.
    pub fn expect(&self, f: &dyn Fn(&[f64]) -> f64, rule: &QuadratureRule) -> Result<f64> {
        let (root, _) = psd_sqrt(&self.cov);
        expect_affine(f, &self.mean, &root, rule)
    }

    /// Max-norm distance between the parameter sets.
    pub fn distance(&self, other: &GaussianMeasure) -> f64 {
        let dm = (&self.mean - &other.mean).amax();
        dm.max(max_abs(&(&self.cov - &other.cov)))
    }
}

/// `(∫ |f|^p dμ)^{1/p}`, `p > 1`.
pub fn gaussian_lp_norm(
    f: &dyn Fn(&[f64]) -> f64,
    mu: &GaussianMeasure,
    p: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("L^p norm needs 1 < p < ∞, got p = {p}")));
    }
    let integral = mu.expect(&|x| f(x).abs().powf(p), rule)?;
    Ok(integral.max(0.0).powf(1.0 / p))
}

/// Samples per unit time for the contractivity check.
const LOG_NORM_SAMPLES_PER_UNIT: f64 = 8.0;

/// `μ_t` as the law of `p(t + H, t, 0, ·)` for large `H`.
///
/// Both `H = horizon` and `2H` are computed; the result is the `2H` measure,
/// accepted when the two differ by less than `tol` in max norm.
pub fn ou_evolution_measure(ou: &OUCoefficients, t: f64, horizon: f64, tol: f64) -> Result<GaussianMeasure> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let n = ((2.0 * horizon * LOG_NORM_SAMPLES_PER_UNIT).ceil() as usize).max(16);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_t = t;
    for k in 0..=n {
        let r = t + 2.0 * horizon * k as f64 / n as f64;
        let l = ou.log_norm(r);
        if l > worst {
            worst = l;
            worst_t = r;
        }
    }
    if !(worst < 0.0) {
        return Err(Error::NonContractive(format!(
            "logarithmic norm of B reaches {worst:.6e} at t = {worst_t:.6} on [{t}, {}]",
            t + 2.0 * horizon
        )));
    }
    let first = Propagator::new(ou, t, t + horizon)?;
    let second = Propagator::new(ou, t + horizon, t + 2.0 * horizon)?;
    let both = first.then(&second)?;
    let near = GaussianMeasure {
        mean: first.mshift.clone(),
        cov: first.sigma.clone(),
    };
    let far = GaussianMeasure {
        mean: both.mshift,
        cov: both.sigma,
    };
    let change = near.distance(&far);
    if !(change < tol) {
        return Err(Error::HorizonNotConverged { horizon, change, tol });
    }
    GaussianMeasure::new(far.mean, far.cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_ou_measure_is_standard_normal() {
        let ou = OUCoefficients::scalar(|_| 1.0, |_| -1.0, |_| 0.0);
        for t in [-3.0, 0.0, 2.5] {
            let mu = ou_evolution_measure(&ou, t, 40.0, 1e-10).unwrap();
            assert!(mu.mean[0].abs() < 1e-12);
            assert!((mu.cov[(0, 0)] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_shift_mean() {
        let ou = OUCoefficients::scalar(|_| 1.0, |_| -1.0, |t| t.cos());
        for t in [0.0, 0.9, 2.0] {
            let mu = ou_evolution_measure(&ou, t, 40.0, 1e-8).unwrap();
            let want = 0.5 * ((t as f64).cos() - (t as f64).sin());
            assert!((mu.mean[0] - want).abs() < 1e-8, "t = {t}: {} vs {want}", mu.mean[0]);
            assert!((mu.cov[(0, 0)] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn expanding_drift_refused() {
        let ou = OUCoefficients::scalar(|_| 1.0, |_| 0.1, |_| 0.0);
        assert!(matches!(
            ou_evolution_measure(&ou, 0.0, 10.0, 1e-8),
            Err(Error::NonContractive(_))
        ));
    }

    #[test]
    fn short_horizon_not_converged() {
        let ou = OUCoefficients::scalar(|_| 1.0, |_| -0.1, |_| 0.0);
        assert!(matches!(
            ou_evolution_measure(&ou, 0.0, 5.0, 1e-10),
            Err(Error::HorizonNotConverged { .. })
        ));
    }

    #[test]
    fn lp_norms_of_identity() {
        let rule = QuadratureRule::default_for(1).unwrap();
        let mu = GaussianMeasure::standard(1);
        let n2 = gaussian_lp_norm(&|x| x[0], &mu, 2.0, &rule).unwrap();
        let n4 = gaussian_lp_norm(&|x| x[0], &mu, 4.0, &rule).unwrap();
        assert!((n2 - 1.0).abs() < 1e-13);
        assert!((n4 - 3f64.powf(0.25)).abs() < 1e-12);
        let c = gaussian_lp_norm(&|_| -2.5, &mu, 3.0, &rule).unwrap();
        assert!((c - 2.5).abs() < 1e-13);
        assert!(gaussian_lp_norm(&|x| x[0], &mu, 1.0, &rule).is_err());
    }

    #[test]
    fn invariance_identity_time_periodic() {
        let ou = OUCoefficients::scalar(|_| 1.0, |_| -1.0, |t| t.cos());
        let rule = QuadratureRule::default_for(1).unwrap();
        let (s, t) = (0.3, 1.4);
        let mu_s = ou_evolution_measure(&ou, s, 40.0, 1e-10).unwrap();
        let mu_t = ou_evolution_measure(&ou, t, 40.0, 1e-10).unwrap();
        let p = Propagator::new(&ou, s, t).unwrap();
        let f = |y: &[f64]| y[0] * y[0];
        let lhs = mu_t.expect(&|x| p.apply(&f, x, &rule).unwrap(), &rule).unwrap();
        let rhs = mu_s.expect(&f, &rule).unwrap();
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }
}
