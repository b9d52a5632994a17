//! Linearization of `ψ` at zero: `B(t) = A(t) + ∂_ξψ(t,0)`, remainder `Φ`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{propagate_tapered, GridField, SchemeConfig, StepDiagnostics};
use crate::ou::apply_ou;
use crate::problem::{ProblemSpec, SamplePlan, TimeFn};
use crate::quadrature::{adaptive_simpson, QuadratureRule};

#[derive(Clone)]
pub struct LinearizedProblem {
    /// `t ↦ ∂_ξψ(t, 0)`.
    pub shift: TimeFn,
    /// Central-difference step used when the spec gave no derivative.
    pub shift_fd_step: Option<f64>,
    /// `−sup_t shift(t)` over the sampled times.
    pub omega0: f64,
    /// Set when `omega0 ≤ 0`, i.e. the linear part is not exponentially stable.
    pub flagged: bool,
    pub sampled_times: Vec<f64>,
    pub base: ProblemSpec,
}

impl std::fmt::Debug for LinearizedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearizedProblem")
            .field("problem", &self.base.name)
            .field("omega0", &self.omega0)
            .field("flagged", &self.flagged)
            .field("shift_fd_step", &self.shift_fd_step)
            .finish()
    }
}

impl LinearizedProblem {
    pub fn shift_at(&self, t: f64) -> f64 {
        (self.shift)(t)
    }

    /// `Φ(t, ξ) = ψ(t, ξ) − ∂_ξψ(t, 0) ξ`.
    pub fn phi(&self, t: f64, xi: f64) -> f64 {
        self.base.nonlinearity.eval(t, xi) - self.shift_at(t) * xi
    }

    /// `∫_s^t ∂_ξψ(σ, 0) dσ`.
    pub fn shift_integral(&self, s: f64, t: f64) -> f64 {
        let g = |r: f64| (self.shift)(r);
        adaptive_simpson(&g, s, t, 1e-12)
    }

    /// Scalar factor relating `G_B(t,s)` to `G(t,s)`.
    pub fn gb_factor(&self, s: f64, t: f64) -> f64 {
        self.shift_integral(s, t).exp()
    }

    /// `(G_B(t,s) f)(x)` with the closed-form OU kernel.
    pub fn apply_gb_ou(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        x: &[f64],
        s: f64,
        t: f64,
        rule: &QuadratureRule,
    ) -> Result<f64> {
        Ok(self.gb_factor(s, t) * apply_ou(self.base.ou()?, f, x, s, t, rule)?)
    }

    /// `G_B(t,s) f` on the grid.
    pub fn apply_gb_grid(
        &self,
        field: &GridField,
        s: f64,
        t: f64,
        cfg: &SchemeConfig,
    ) -> Result<(GridField, StepDiagnostics)> {
        let (g, diag) = propagate_tapered(&self.base, field, s, t, cfg)?;
        let c = self.gb_factor(s, t);
        Ok((g.map(|v| c * v), diag))
    }

    /// `sup_{t, |ξ| ≤ ρ} |∂_ξΦ(t, ξ)|` over the sampled times.
    pub fn phi_lipschitz_on(&self, rho: f64) -> f64 {
        const N: usize = 2001;
        let mut k: f64 = 0.0;
        for &t in &self.sampled_times {
            for i in 0..N {
                let xi = -rho + 2.0 * rho * i as f64 / (N - 1) as f64;
                let e = 1e-5 * (1.0 + xi.abs());
                let d = (self.phi(t, xi + e) - self.phi(t, xi - e)) / (2.0 * e);
                k = k.max(d.abs());
            }
        }
        k
    }
}

/// Builds the linearization; a missing `∂_ξψ(·, 0)` is replaced by a central
/// difference with step `1e-6`.
pub fn linearize(spec: &ProblemSpec) -> LinearizedProblem {
    let (shift, step): (TimeFn, Option<f64>) = match &spec.nonlinearity.d_psi_at_zero {
        Some(d) => (d.clone(), None),
        None => {
            let psi = spec.nonlinearity.psi.clone();
            let e = 1e-6;
            (Arc::new(move |t| (psi(t, e) - psi(t, -e)) / (2.0 * e)), Some(e))
        }
    };
    let mut plan = SamplePlan::for_spec(spec);
    plan.n_times = 101;
    let sampled_times = plan.times();
    let sup = sampled_times.iter().map(|&t| shift(t)).fold(f64::NEG_INFINITY, f64::max);
    let omega0 = -sup;
    LinearizedProblem {
        shift,
        shift_fd_step: step,
        omega0,
        flagged: !(omega0 > 0.0),
        sampled_times,
        base: spec.clone(),
    }
}

/// Radius `r_ω = ρ/2`, with `ρ` the largest radius (found by bisection)
/// where `sup |∂_ξΦ| ≤ (ω0 − ω)/2` on `[−ρ, ρ]`.
pub fn r_omega(lin: &LinearizedProblem, omega: f64) -> Result<f64> {
    if lin.flagged {
        return Err(Error::Precondition(format!(
            "linear part not exponentially stable (ω0 = {})",
            lin.omega0
        )));
    }
    if !(omega > 0.0 && omega < lin.omega0) {
        return Err(Error::InvalidInput(format!(
            "need 0 < ω < ω0 = {}, got {omega}",
            lin.omega0
        )));
    }
    let target = 0.5 * (lin.omega0 - omega);
    let cap = 1e3;
    if lin.phi_lipschitz_on(cap) <= target {
        return Ok(cap / 2.0);
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if lin.phi_lipschitz_on(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    if lo == 0.0 {
        return Err(Error::Precondition(
            "∂_ξΦ does not vanish at 0 within the sampled tolerance".into(),
        ));
    }
    Ok(lo / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{builtin, SemilinearTerm};

    fn with_psi(term: SemilinearTerm) -> ProblemSpec {
        builtin("ou1d").unwrap().with_nonlinearity(term)
    }

    #[test]
    fn cubic_perturbation_of_decay() {
        let lin = linearize(&with_psi(SemilinearTerm::new("-x+x^3", |_, x| -x + x * x * x)));
        assert!((lin.omega0 - 1.0).abs() < 1e-9);
        assert!(!lin.flagged);
        for &x in &[-2.0, -0.3, 0.0, 0.7, 3.0] {
            assert!((lin.phi(0.4, x) - x * x * x).abs() < 1e-8 * (1.0 + x.abs().powi(3)));
        }
        let r = r_omega(&lin, 0.5).unwrap();
        assert!((r - (1.0f64 / 12.0).sqrt() / 2.0).abs() < 1e-6, "{r}");
    }

    #[test]
    fn time_dependent_shift_factor() {
        let spec = with_psi(
            SemilinearTerm::new("-(2+sin t)x", |t, x| -(2.0 + t.sin()) * x)
                .with_derivative_at_zero(|t| -(2.0 + t.sin())),
        )
        .with_window(0.0, 2.0 * std::f64::consts::PI)
        .unwrap();
        let lin = linearize(&spec);
        assert!((lin.omega0 - 1.0).abs() < 1e-3);
        assert_eq!(lin.phi(0.3, 1.7), 0.0);
        let (s, t) = (0.2f64, 0.9f64);
        let exact = -(2.0 * (t - s) + s.cos() - t.cos());
        assert!((lin.shift_integral(s, t) - exact).abs() < 1e-10);
        let rule = QuadratureRule::default_for(1).unwrap();
        let f = |x: &[f64]| (x[0]).cos();
        let g = apply_ou(spec.ou().unwrap(), &f, &[0.4], s, t, &rule).unwrap();
        let gb = lin.apply_gb_ou(&f, &[0.4], s, t, &rule).unwrap();
        assert!((gb - exact.exp() * g).abs() < 1e-12);
    }

    #[test]
    fn square_is_flagged() {
        let lin = linearize(&with_psi(SemilinearTerm::new("x^2", |_, x| x * x)));
        assert!(lin.shift.as_ref()(0.0).abs() < 1e-9);
        assert!(lin.flagged);
        assert!(lin.shift_fd_step.is_some());
        assert!(r_omega(&lin, 0.1).is_err());
    }
}
