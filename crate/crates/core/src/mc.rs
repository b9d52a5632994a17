//! Euler–Maruyama / Feynman–Kac oracle for `G(t,s)`.
//!
//! `(G(t,s)f)(x) = E f(Y_{t−s})` where `Y_0 = x` and
//! `dY_τ = b(t−τ, Y) dτ + √(2Q(t−τ, Y)) dW_τ`, i.e. the diffusion runs on the
//! reversed clock. Path `i` draws from the ChaCha8 stream `i` of the seed
//! (antithetic pairs share the stream of their pair), so ensembles do not
//! depend on how paths are scheduled across threads.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, psd_sqrt_small, sym_eig_extremes};
use crate::problem::{check_base_hypotheses, ProblemSpec, SamplePlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SDEConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl SDEConfig {
    pub fn new(dt: f64, n_paths: usize, seed: u64) -> Self {
        Self {
            dt,
            n_paths,
            seed,
            antithetic: false,
        }
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput(format!("SDE step must be positive, got {}", self.dt)));
        }
        if self.n_paths < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 paths, got {}", self.n_paths)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub dim: usize,
    /// Row-major `n_paths × dim` terminal points.
    pub points: Vec<f64>,
    pub s: f64,
    pub t: f64,
    pub config: SDEConfig,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.config.n_paths
    }

    pub fn is_empty(&self) -> bool {
        self.config.n_paths == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Ensemble mean of `f` with its standard error. Antithetic ensembles use
    /// pair averages for the error estimate.
    pub fn mean_with_stderr(&self, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> (f64, f64) {
        let vals: Vec<f64> = (0..self.len()).into_par_iter().map(|i| f(self.point(i))).collect();
        let samples: Vec<f64> = if self.config.antithetic {
            vals.chunks(2).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect()
        } else {
            vals
        };
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    }

    /// Per-axis sample mean and variance.
    pub fn moments(&self, axis: usize) -> (f64, f64) {
        let n = self.len() as f64;
        let mean = (0..self.len()).map(|i| self.point(i)[axis]).sum::<f64>() / n;
        let var = (0..self.len())
            .map(|i| {
                let v = self.point(i)[axis] - mean;
                v * v
            })
            .sum::<f64>()
            / (n - 1.0);
        (mean, var)
    }

    /// One row per path.
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.points.len() * 20);
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for i in 0..self.len() {
            let row: Vec<String> = self.point(i).iter().map(|v| format!("{v:.12e}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Per-step coefficients of OU specs, shared by all paths.
struct OuTable {
    b: Vec<DMatrix<f64>>,
    f: Vec<DVector<f64>>,
    sig: Vec<DMatrix<f64>>,
}

fn ou_table(spec: &ProblemSpec, t: f64, n: usize, dt: f64) -> Option<OuTable> {
    let ou = spec.ou.as_ref()?;
    let mut tab = OuTable {
        b: Vec::with_capacity(n),
        f: Vec::with_capacity(n),
        sig: Vec::with_capacity(n),
    };
    for k in 0..n {
        let c = t - k as f64 * dt;
        tab.b.push(ou.b(c));
        tab.f.push(ou.f(c));
        tab.sig.push(psd_sqrt(&(ou.q(c) * 2.0)).0);
    }
    Some(tab)
}

/// Terminal points of `n_paths` Euler–Maruyama paths from `x0` over `[s, t]`.
pub fn simulate(spec: &ProblemSpec, x0: &[f64], s: f64, t: f64, cfg: &SDEConfig) -> Result<PathEnsemble> {
    cfg.validate()?;
    let d = spec.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x0.len(),
        });
    }
    if !(t > s) {
        return Err(Error::InvalidInput(format!("simulation needs t > s, got s = {s}, t = {t}")));
    }
    let n_steps = ((t - s) / cfg.dt - 1e-9).ceil().max(1.0) as usize;
    let dt = (t - s) / n_steps as f64;
    let sq = dt.sqrt();
    let table = ou_table(spec, t, n_steps, dt);
    let coeff = &spec.coefficients;

    let run = |path: usize| -> Result<Vec<f64>> {
        let (stream, sign) = if cfg.antithetic {
            ((path / 2) as u64, if path % 2 == 1 { -1.0 } else { 1.0 })
        } else {
            (path as u64, 1.0)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(stream);
        let mut y = x0.to_vec();
        let mut z = vec![0.0; d];
        let mut q = vec![0.0; d * d];
        let mut sig = vec![0.0; d * d];
        let mut b = vec![0.0; d];
        let mut two_q = vec![0.0; d * d];
        for k in 0..n_steps {
            for zi in z.iter_mut() {
                let v: f64 = StandardNormal.sample(&mut rng);
                *zi = sign * v;
            }
            match &table {
                Some(tab) => {
                    let (bm, fv, sm) = (&tab.b[k], &tab.f[k], &tab.sig[k]);
                    if d == 1 {
                        y[0] += (bm[(0, 0)] * y[0] + fv[0]) * dt + sm[(0, 0)] * sq * z[0];
                    } else {
                        let old = y.clone();
                        for i in 0..d {
                            let mut drift = fv[i];
                            let mut noise = 0.0;
                            for j in 0..d {
                                drift += bm[(i, j)] * old[j];
                                noise += sm[(i, j)] * z[j];
                            }
                            y[i] = old[i] + drift * dt + noise * sq;
                        }
                    }
                }
                None => {
                    let c = t - k as f64 * dt;
                    coeff.q_into(c, &y, &mut q);
                    coeff.b_into(c, &y, &mut b);
                    for (o, v) in two_q.iter_mut().zip(&q) {
                        *o = 2.0 * v;
                    }
                    psd_sqrt_small(&two_q, d, &mut sig);
                    let old = y.clone();
                    for i in 0..d {
                        let mut noise = 0.0;
                        for j in 0..d {
                            noise += sig[i * d + j] * z[j];
                        }
                        y[i] = old[i] + b[i] * dt + noise * sq;
                    }
                }
            }
            if !y.iter().all(|v| v.is_finite()) {
                return Err(Error::PathBlowup { step: k + 1, path });
            }
        }
        Ok(y)
    };

    let results: Vec<Result<Vec<f64>>> = (0..cfg.n_paths).into_par_iter().map(run).collect();
    let mut points = Vec::with_capacity(cfg.n_paths * d);
    for r in results {
        points.extend(r?);
    }
    Ok(PathEnsemble {
        dim: d,
        points,
        s,
        t,
        config: *cfg,
    })
}

/// `(estimate, stderr)` of `(G(t,s)f)(x)`.
pub fn estimate_propagator(
    spec: &ProblemSpec,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    x: &[f64],
    s: f64,
    t: f64,
    cfg: &SDEConfig,
) -> Result<(f64, f64)> {
    let ens = simulate(spec, x, s, t, cfg)?;
    Ok(ens.mean_with_stderr(f))
}

/// Default radii of the tail ladder.
pub const DEFAULT_TAIL_LADDER: [f64; 8] = [0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0];

#[derive(Debug, Clone)]
pub struct MeasureSample {
    pub ensemble: PathEnsemble,
    /// `(ρ, fraction of points with |x| > ρ)`.
    pub tail: Vec<(f64, f64)>,
    pub phi_mean: f64,
    pub phi_stderr: f64,
    /// `a / c` of the certificate.
    pub phi_bound: f64,
    /// "tight system member" for contractive OU drifts, otherwise "candidate measure".
    pub label: &'static str,
}

impl MeasureSample {
    /// `mean φ ≤ a/c + 3·stderr`.
    pub fn moment_bound_holds(&self) -> bool {
        self.phi_mean <= self.phi_bound + 3.0 * self.phi_stderr
    }
}

/// Empirical `μ_t`: the law at time `t + horizon` of paths started at 0,
/// i.e. samples of `p(t + horizon, t, 0, ·)`.
pub fn sample_measure(spec: &ProblemSpec, t: f64, horizon: f64, cfg: &SDEConfig) -> Result<MeasureSample> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    let contractive = spec.ou.as_ref().is_some_and(|ou| {
        let n = (horizon * 8.0).ceil() as usize;
        (0..=n).all(|k| ou.log_norm(t + horizon * k as f64 / n as f64) < 0.0)
    });
    if !contractive {
        let mut plan = SamplePlan::for_spec(spec);
        plan.t0 = t;
        plan.t1 = t + horizon;
        let rep = check_base_hypotheses(spec, &plan);
        if let Some(c) = rep.clause("lyapunov_drift").filter(|c| !c.pass) {
            return Err(Error::Precondition(format!(
                "no contractive drift and the Lyapunov certificate fails (slack {:.3e} at x = {:?})",
                c.worst_slack, c.witness
            )));
        }
    }
    let d = spec.dim();
    let ensemble = simulate(spec, &vec![0.0; d], t, t + horizon, cfg)?;
    let n = ensemble.len() as f64;
    let norms: Vec<f64> = (0..ensemble.len())
        .map(|i| ensemble.point(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let tail = DEFAULT_TAIL_LADDER
        .iter()
        .map(|&r| (r, norms.iter().filter(|&&v| v > r).count() as f64 / n))
        .collect();
    let phi = spec.lyapunov.phi.clone();
    let (phi_mean, phi_stderr) = ensemble.mean_with_stderr(&|x| phi.value(x));
    Ok(MeasureSample {
        ensemble,
        tail,
        phi_mean,
        phi_stderr,
        phi_bound: spec.lyapunov.stationary_bound(),
        label: if contractive {
            "tight system member"
        } else {
            "candidate measure"
        },
    })
}

/// Smallest eigenvalue of `Q` along an ensemble, a cheap ellipticity probe.
pub fn ensemble_ellipticity(spec: &ProblemSpec, ens: &PathEnsemble) -> f64 {
    let d = spec.dim();
    let mut q = vec![0.0; d * d];
    let mut best = f64::INFINITY;
    for i in 0..ens.len() {
        spec.coefficients.q_into(ens.t, ens.point(i), &mut q);
        best = best.min(sym_eig_extremes(&q, d).0);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ou1d, CoefficientField, LyapunovCertificate, RadialPower, SemilinearTerm, TimeInterval};
    use std::sync::Arc;

    #[test]
    fn frozen_dynamics() {
        let coeff = CoefficientField::degenerate(1, |_, _, out| out[0] = 0.0);
        let lyap = LyapunovCertificate::new(Arc::new(RadialPower { dim: 1, r: 1.0 }), 1.0, 1.0).unwrap();
        let spec = ProblemSpec::new(
            "frozen",
            coeff,
            SemilinearTerm::zero(),
            lyap,
            TimeInterval::whole_line(0.0, 1.0).unwrap(),
        )
        .unwrap();
        let ens = simulate(&spec, &[0.7], 0.0, 1.0, &SDEConfig::new(0.1, 16, 3)).unwrap();
        assert!(ens.points.iter().all(|v| *v == 0.7));
    }

    #[test]
    fn reproducible_and_thread_independent() {
        let spec = ou1d();
        let cfg = SDEConfig::new(1e-2, 500, 42);
        let a = simulate(&spec, &[1.0], 0.0, 1.0, &cfg).unwrap();
        let b = simulate(&spec, &[1.0], 0.0, 1.0, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| simulate(&spec, &[1.0], 0.0, 1.0, &cfg).unwrap());
        assert_eq!(a.points, b.points);
        assert_eq!(a.points, c.points);
        let other = simulate(&spec, &[1.0], 0.0, 1.0, &SDEConfig::new(1e-2, 500, 43)).unwrap();
        assert_ne!(a.points, other.points);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let spec = ou1d();
        let (m, se) = estimate_propagator(&spec, &|_| 2.0, &[0.0], 0.0, 0.5, &SDEConfig::new(1e-2, 100, 1)).unwrap();
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn antithetic_pairs_mirror() {
        let spec = ou1d();
        let cfg = SDEConfig::new(1e-2, 10, 9).with_antithetic(true);
        let ens = simulate(&spec, &[0.0], 0.0, 1.0, &cfg).unwrap();
        for k in 0..5 {
            assert!((ens.point(2 * k)[0] + ens.point(2 * k + 1)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn ou_variance_uses_factor_two() {
        let spec = ou1d();
        let ens = simulate(&spec, &[0.0], 0.0, 1.0, &SDEConfig::new(1e-3, 40_000, 5)).unwrap();
        let (_, var) = ens.moments(0);
        let want = 1.0 - (-2f64).exp();
        assert!((var - want).abs() < 0.02 * want, "{var}");
    }

    #[test]
    fn tail_ladder_is_monotone() {
        let spec = ou1d();
        let m = sample_measure(&spec, 0.0, 10.0, &SDEConfig::new(1e-2, 5000, 11)).unwrap();
        assert!(m.tail.windows(2).all(|w| w[1].1 <= w[0].1));
        assert_eq!(m.label, "tight system member");
        assert!(m.moment_bound_holds());
    }

    #[test]
    fn non_ou_spec_uses_coefficient_path() {
        let spec = crate::problem::polycoef(0.0, 1.0, 1.0, 1).unwrap();
        let m = sample_measure(&spec, 0.0, 2.0, &SDEConfig::new(1e-3, 4000, 2)).unwrap();
        assert_eq!(m.label, "candidate measure");
        assert!(m.moment_bound_holds());
        assert!(ensemble_ellipticity(&spec, &m.ensemble) >= 1.0);
    }
}
