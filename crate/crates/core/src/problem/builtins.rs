use std::sync::Arc;

use super::{
    apply_generator, CoefficientField, LyapunovCertificate, ProblemSpec, RadialPower, SemilinearTerm,
    SmoothBounds, TimeInterval,
};
use crate::error::{Error, Result};
use crate::ou::OUCoefficients;

pub const BUILTIN_NAMES: &[&str] = &["ou1d", "ou_timedep", "polycoef", "heat1d"];

fn quadratic_phi() -> Arc<RadialPower> {
    Arc::new(RadialPower { dim: 1, r: 1.0 })
}

/// Standard 1-d OU: `Q = 1`, `b = −x`, `φ = 1 + x²`, `Aφ = 4 − 2φ`.
pub fn ou1d() -> ProblemSpec {
    let ou = OUCoefficients::scalar(|_| 1.0, |_| -1.0, |_| 0.0);
    let coeff = ou
        .to_coefficient_field(1.0)
        .expect("valid constants")
        .with_smooth_bounds(SmoothBounds::constant(0.0, -1.0));
    let lyap = LyapunovCertificate::new(quadratic_phi(), 4.0, 2.0)
        .expect("valid constants")
        .with_growth_consts(1.0, 1.0, 1.0);
    ProblemSpec::new(
        "ou1d",
        coeff,
        SemilinearTerm::zero(),
        lyap,
        TimeInterval::whole_line(0.0, 1.0).expect("valid window"),
    )
    .and_then(|s| s.with_ou(ou))
    .expect("consistent builtin")
}

/// `Q = 2 + sin t`, `b = −x + cos t`.
///
/// `Aφ = 2(2 + sin t) − 2x² + 2x cos t ≤ 8 − φ`.
pub fn ou_timedep() -> ProblemSpec {
    let ou = OUCoefficients::scalar(|t| 2.0 + t.sin(), |_| -1.0, |t| t.cos());
    let coeff = ou
        .to_coefficient_field(1.0)
        .expect("valid constants")
        .with_smooth_bounds(SmoothBounds::constant(0.0, -1.0));
    let lyap = LyapunovCertificate::new(quadratic_phi(), 8.0, 1.0)
        .expect("valid constants")
        .with_growth_consts(3.0, 3.0, 1.0);
    ProblemSpec::new(
        "ou_timedep",
        coeff,
        SemilinearTerm::zero(),
        lyap,
        TimeInterval::whole_line(0.0, 1.0).expect("valid window"),
    )
    .and_then(|s| s.with_ou(ou))
    .expect("consistent builtin")
}

/// Heat coefficients `Q = 1`, `b = 0` with the (invalid) certificate
/// `φ = 1 + x²`, `a = 4`, `c = 2`.
pub fn heat1d() -> ProblemSpec {
    let ou = OUCoefficients::scalar(|_| 1.0, |_| 0.0, |_| 0.0);
    let coeff = ou
        .to_coefficient_field(1.0)
        .expect("valid constants")
        .with_smooth_bounds(SmoothBounds::constant(0.0, 0.0));
    let lyap = LyapunovCertificate::new(quadratic_phi(), 4.0, 2.0).expect("valid constants");
    ProblemSpec::new(
        "heat1d",
        coeff,
        SemilinearTerm::zero(),
        lyap,
        TimeInterval::whole_line(0.0, 1.0).expect("valid window"),
    )
    .and_then(|s| s.with_ou(ou))
    .expect("consistent builtin")
}

const POLY_SCAN_RADIUS: f64 = 64.0;
const POLY_SCAN_POINTS: usize = 8192;

/// `Q = (1+|x|²)^l I`, `b = −x(1+|x|²)^m`, `φ = (1+|x|²)^r`, `c = 1`.
///
/// `a` is the radial supremum of `Aφ + φ` with a small relative margin; the
/// construction fails when the supremum is attained at the scan edge, which
/// happens when the drift does not dominate (`m ≤ l − 1`).
pub fn polycoef(l: f64, m: f64, r: f64, d: usize) -> Result<ProblemSpec> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    if !(l >= 0.0 && m >= 0.0 && r > 0.0) {
        return Err(Error::InvalidInput(format!(
            "polycoef needs l, m ≥ 0 and r > 0, got l = {l}, m = {m}, r = {r}"
        )));
    }
    let coeff = CoefficientField::new(
        d,
        move |_t, x, out| {
            out.fill(0.0);
            let w = (1.0 + super::norm2(x)).powf(l);
            for i in 0..d {
                out[i * d + i] = w;
            }
        },
        move |_t, x, out| {
            let w = (1.0 + super::norm2(x)).powf(m);
            for i in 0..d {
                out[i] = -x[i] * w;
            }
        },
        1.0,
    )?
    .with_smooth_bounds(SmoothBounds::constant(l, 0.0));
    let phi = Arc::new(RadialPower { dim: d, r });
    let c = 1.0;
    let probe = LyapunovCertificate::new(phi.clone(), 1.0, c)?;
    let name = format!("polycoef(l={l},m={m},r={r},d={d})");
    let window = TimeInterval::whole_line(0.0, 1.0)?;
    let spec = ProblemSpec::new(name.clone(), coeff.clone(), SemilinearTerm::zero(), probe, window)?;
    let pts: Vec<Vec<f64>> = (0..=POLY_SCAN_POINTS)
        .map(|k| {
            let mut x = vec![0.0; d];
            x[0] = POLY_SCAN_RADIUS * k as f64 / POLY_SCAN_POINTS as f64;
            x
        })
        .collect();
    let a_phi = apply_generator(&spec, phi.as_ref(), 0.0, &pts)?;
    let (mut sup, mut at) = (f64::NEG_INFINITY, 0);
    for (k, (v, x)) in a_phi.iter().zip(&pts).enumerate() {
        let val = v + c * super::SmoothField::value(phi.as_ref(), x);
        if val > sup {
            sup = val;
            at = k;
        }
    }
    if at == POLY_SCAN_POINTS {
        return Err(Error::Precondition(format!(
            "no Lyapunov certificate of the form (1+|x|²)^{r} for l = {l}, m = {m}: Aφ + φ still grows at radius {POLY_SCAN_RADIUS}"
        )));
    }
    let a = (sup + 1e-3 * (1.0 + sup.abs())).max(1e-3);
    let lyap = LyapunovCertificate::new(phi, a, c)?.with_growth_consts(1.0, d as f64, 1.0);
    let mut spec = ProblemSpec::new(name, coeff, SemilinearTerm::zero(), lyap, window)?;
    if l == 0.0 && m == 0.0 {
        let ou = OUCoefficients::constant(
            nalgebra::DMatrix::identity(d, d),
            -nalgebra::DMatrix::identity(d, d),
            nalgebra::DVector::zeros(d),
        )?;
        spec = spec.with_ou(ou)?;
    }
    Ok(spec)
}

/// Looks up a named instance; `polycoef` uses `l = 0`, `m = 1`, `r = 1`, `d = 1`.
pub fn builtin(name: &str) -> Result<ProblemSpec> {
    match name {
        "ou1d" => Ok(ou1d()),
        "ou_timedep" => Ok(ou_timedep()),
        "heat1d" => Ok(heat1d()),
        "polycoef" => polycoef(0.0, 1.0, 1.0, 1),
        other => Err(Error::InvalidInput(format!(
            "unknown built-in problem `{other}` (known: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polycoef_default_constants() {
        let spec = polycoef(0.0, 1.0, 1.0, 1).unwrap();
        // Aφ + φ = 3 − x² − 2x⁴, maximal at the origin.
        assert!((spec.lyapunov.a - 3.004).abs() < 1e-12);
        assert!(spec.ou.is_none());
        assert!(polycoef(0.0, 0.0, 1.0, 2).unwrap().ou.is_some());
    }

    #[test]
    fn polycoef_without_drift_dominance_fails() {
        assert!(polycoef(2.0, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn builtin_lookup() {
        for n in BUILTIN_NAMES {
            assert!(builtin(n).is_ok());
        }
        assert!(builtin("nope").is_err());
    }
}
