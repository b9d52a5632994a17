//! Discrete self-test of Gronwall-type decay claims.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GronwallVariant {
    /// `w(t) ≤ k + h∫_a^t w` implies `w(t) ≤ e^{h(t−a)} k`.
    IntegralInequality,
    /// `w(t) ≤ w(r) + h∫_r^t w` for all `r ≤ t`, `h ≤ 0`, implies
    /// `w(t) ≤ e^{h(t−a)} w(a)`.
    Dissipative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GronwallVerdict {
    Pass,
    /// Hypothesis holds, conclusion does not.
    Fail,
    /// The series does not satisfy the hypothesis; nothing is concluded.
    HypothesisFails,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub variant: GronwallVariant,
    pub verdict: GronwallVerdict,
    /// `min (rhs − lhs)` of the hypothesis over the samples (or pairs).
    pub hypothesis_margin: f64,
    /// `min (bound − w)` of the conclusion.
    pub conclusion_margin: f64,
    /// Time where the conclusion margin is smallest.
    pub worst_t: f64,
    pub tolerance: f64,
}

impl GronwallReport {
    pub fn pass(&self) -> bool {
        self.verdict == GronwallVerdict::Pass
    }
}

/// Checks the hypothesis with trapezoidal integrals, up to `tol` times the
/// scale of the data, and then the conclusion.
pub fn gronwall_check(
    times: &[f64],
    w: &[f64],
    k: f64,
    h: f64,
    variant: GronwallVariant,
    tol: f64,
) -> Result<GronwallReport> {
    if times.len() != w.len() || times.is_empty() {
        return Err(Error::InvalidInput(format!(
            "time series of lengths {} and {}",
            times.len(),
            w.len()
        )));
    }
    if times.windows(2).any(|p| !(p[1] > p[0])) {
        return Err(Error::InvalidInput("times must be strictly increasing".into()));
    }
    if let Some(bad) = w.iter().chain([&k, &h]).find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value {bad} in series")));
    }
    if variant == GronwallVariant::Dissipative && h > 0.0 {
        return Err(Error::Precondition(format!("dissipative variant needs h ≤ 0, got {h}")));
    }
    let scale = 1.0 + k.abs() + w.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let tolerance = tol * scale;
    let a = times[0];
    // Prefix trapezoid integrals I_j = ∫_a^{t_j} w.
    let mut prefix = vec![0.0; w.len()];
    for j in 1..w.len() {
        prefix[j] = prefix[j - 1] + 0.5 * (times[j] - times[j - 1]) * (w[j] + w[j - 1]);
    }
    let mut hyp = f64::INFINITY;
    let (base, anchor) = match variant {
        GronwallVariant::IntegralInequality => {
            for j in 0..w.len() {
                hyp = hyp.min(k + h * prefix[j] - w[j]);
            }
            (k, a)
        }
        GronwallVariant::Dissipative => {
            for j in 0..w.len() {
                for r in 0..=j {
                    hyp = hyp.min(w[r] + h * (prefix[j] - prefix[r]) - w[j]);
                }
            }
            (w[0], a)
        }
    };
    let mut concl = f64::INFINITY;
    let mut worst_t = a;
    for (&t, &wt) in times.iter().zip(w) {
        let m = (h * (t - anchor)).exp() * base - wt;
        if m < concl {
            concl = m;
            worst_t = t;
        }
    }
    let verdict = if hyp < -tolerance {
        GronwallVerdict::HypothesisFails
    } else if concl < -tolerance {
        GronwallVerdict::Fail
    } else {
        GronwallVerdict::Pass
    };
    Ok(GronwallReport {
        variant,
        verdict,
        hypothesis_margin: hyp,
        conclusion_margin: concl,
        worst_t,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(h_rate: f64, k: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let w = t.iter().map(|&s| k * (h_rate * s).exp()).collect();
        (t, w)
    }

    #[test]
    fn equality_case_passes_with_zero_margin() {
        let (t, w) = series(0.7, 2.0, 400);
        let r = gronwall_check(&t, &w, 2.0, 0.7, GronwallVariant::IntegralInequality, 1e-6).unwrap();
        assert!(r.pass());
        assert_eq!(r.conclusion_margin, 0.0);
    }

    #[test]
    fn constant_with_zero_rate_passes() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let w = vec![3.0; 50];
        for v in [GronwallVariant::IntegralInequality, GronwallVariant::Dissipative] {
            let r = gronwall_check(&t, &w, 3.0, 0.0, v, 1e-12).unwrap();
            assert!(r.pass(), "{r:?}");
        }
    }

    #[test]
    fn slower_growth_passes_faster_growth_violates_hypothesis() {
        let (h, k) = (0.8, 1.5);
        let (t, slow) = series(h / 2.0, k, 400);
        let r = gronwall_check(&t, &slow, k, h, GronwallVariant::IntegralInequality, 1e-6).unwrap();
        assert!(r.pass());
        assert!(r.hypothesis_margin >= 0.0 && r.conclusion_margin >= 0.0);
        assert!((h * 1.0f64).exp() * k - slow.last().unwrap() > 0.1);
        // k e^{2h(t−a)} exceeds k + h∫ w as soon as t > a.
        let (t, fast) = series(2.0 * h, k, 400);
        let r = gronwall_check(&t, &fast, k, h, GronwallVariant::IntegralInequality, 1e-6).unwrap();
        assert_eq!(r.verdict, GronwallVerdict::HypothesisFails);
    }

    #[test]
    fn dissipative_variant() {
        let (t, w) = series(-1.3, 2.0, 300);
        let r = gronwall_check(&t, &w, 0.0, -1.3, GronwallVariant::Dissipative, 1e-4).unwrap();
        assert!(r.pass(), "{r:?}");
        let (t, w) = series(-0.5, 2.0, 300);
        let r = gronwall_check(&t, &w, 0.0, -1.3, GronwallVariant::Dissipative, 1e-4).unwrap();
        assert_eq!(r.verdict, GronwallVerdict::HypothesisFails);
        assert!(gronwall_check(&t, &w, 0.0, 0.5, GronwallVariant::Dissipative, 1e-4).is_err());
    }

    #[test]
    fn malformed_series_rejected() {
        assert!(gronwall_check(&[0.0, 0.0], &[1.0, 1.0], 1.0, 0.0, GronwallVariant::IntegralInequality, 1e-9).is_err());
        assert!(gronwall_check(&[0.0], &[1.0, 1.0], 1.0, 0.0, GronwallVariant::IntegralInequality, 1e-9).is_err());
    }
}
