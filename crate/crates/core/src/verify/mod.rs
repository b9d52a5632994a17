//! Executable estimate suites. Every suite returns [`EstimateReport`]s whose
//! verdict can be recomputed from the stored cases.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ou::{ou_evolution_measure, GaussianMeasure, DEFAULT_HORIZON};
use crate::problem::ProblemSpec;

mod linear;
mod measure;
mod stability;

pub use linear::{
    backend_agreement, chapman_kolmogorov_report, contraction_report, gradient_scaling_report, invariance_report,
    linear_nested_order, markov_report, verify_linear_estimates, LinearBackend, RandomCases,
};
pub use measure::{bump_family, verify_measure_derivative, BumpTest, SpaceTimeMeasure};
pub use stability::{
    continuous_dependence_report, exponent_schedule, lsi_probe, small_data_decay_report, sup_decay_report,
    verify_hypercontractivity, verify_lp_stability, verify_sup_stability, Evolution, LsiProbe,
};

/// Comparisons that only involve closed-form kernels and quadrature.
pub const CLOSED_FORM_TOL: f64 = 1e-7;
/// Grid against closed form.
pub const GRID_TOL: f64 = 5e-3;
/// Relative slack of the `L^p` suites.
pub const LP_SLACK: f64 = 0.01;
/// Tolerance on `μ_t` horizon convergence.
pub const MEASURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "NOT-APPLICABLE",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub id: String,
    pub inputs: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl Case {
    pub fn new(id: impl Into<String>, inputs: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            id: id.into(),
            inputs: inputs.into(),
            lhs,
            rhs,
        }
    }

    /// `lhs − rhs`; NaN counts as `+∞`.
    pub fn margin(&self) -> f64 {
        let m = self.lhs - self.rhs;
        if m.is_nan() {
            f64::INFINITY
        } else {
            m
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub name: String,
    /// The estimate being tested, in words and formula.
    pub anchor: String,
    pub cases: Vec<Case>,
    pub tolerance: f64,
    pub verdict: Verdict,
    /// Backend and resolution used.
    pub provenance: String,
    pub notes: Vec<String>,
    /// Empirical constants, reported but not tested.
    pub envelopes: Vec<(String, f64)>,
}

impl EstimateReport {
    pub fn new(name: &str, anchor: &str, tolerance: f64, provenance: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            anchor: anchor.into(),
            cases: Vec::new(),
            tolerance,
            verdict: Verdict::NotApplicable,
            provenance: provenance.into(),
            notes: Vec::new(),
            envelopes: Vec::new(),
        }
    }

    pub fn not_applicable(name: &str, anchor: &str, reason: impl Into<String>) -> Self {
        let mut r = Self::new(name, anchor, 0.0, "none");
        r.notes.push(reason.into());
        r
    }

    pub fn push(&mut self, case: Case) {
        self.cases.push(case);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn envelope(&mut self, name: &str, value: f64) {
        self.envelopes.push((name.into(), value));
    }

    /// `max(lhs − rhs)` over the cases, `−∞` when there are none.
    pub fn worst_margin(&self) -> f64 {
        self.cases.iter().map(Case::margin).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn worst_case(&self) -> Option<&Case> {
        self.cases.iter().max_by(|a, b| a.margin().total_cmp(&b.margin()))
    }

    /// Verdict implied by the cases; a report without cases is not applicable.
    pub fn recomputed_verdict(&self) -> Verdict {
        if self.cases.is_empty() {
            Verdict::NotApplicable
        } else if self.worst_margin() <= self.tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn finish(mut self) -> Self {
        self.verdict = self.recomputed_verdict();
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Rows `suite,case,lhs,rhs,margin,tolerance,verdict` (no header), one per
    /// case; a not-applicable report yields a single row with empty numbers.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        if self.cases.is_empty() {
            writeln!(s, "{},,,,,,{}", csv_field(&self.name), self.verdict).unwrap();
            return s;
        }
        for c in &self.cases {
            let v = if c.margin() <= self.tolerance { Verdict::Pass } else { Verdict::Fail };
            writeln!(
                s,
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{}",
                csv_field(&self.name),
                csv_field(&c.id),
                c.lhs,
                c.rhs,
                c.margin(),
                self.tolerance,
                v
            )
            .unwrap();
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        writeln!(s, "### {}: {}\n", self.name, self.verdict).unwrap();
        writeln!(s, "Estimate: {}\n", self.anchor).unwrap();
        writeln!(s, "Provenance: {}\n", self.provenance).unwrap();
        writeln!(
            s,
            "Worst margin {:.6e}, tolerance {:.3e}, {} cases.\n",
            self.worst_margin(),
            self.tolerance,
            self.cases.len()
        )
        .unwrap();
        for (k, v) in &self.envelopes {
            writeln!(s, "- envelope {k} = {v:.6e}").unwrap();
        }
        for n in &self.notes {
            writeln!(s, "- note: {n}").unwrap();
        }
        if !self.cases.is_empty() {
            s.push_str("\n| case | inputs | lhs | rhs | margin |\n|---|---|---|---|---|\n");
            for c in &self.cases {
                writeln!(
                    s,
                    "| {} | {} | {:.6e} | {:.6e} | {:.3e} |",
                    c.id,
                    c.inputs.replace('|', "\\|"),
                    c.lhs,
                    c.rhs,
                    c.margin()
                )
                .unwrap();
            }
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub const CSV_HEADER: &str = "suite,case,lhs,rhs,margin,tolerance,verdict";

/// Reports ordered by suite name, then their rows in case order.
pub fn reports_to_csv(reports: &[EstimateReport]) -> String {
    let mut sorted: Vec<&EstimateReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let mut s = format!("{CSV_HEADER}\n");
    for r in sorted {
        s.push_str(&r.csv_rows());
    }
    s
}

pub fn reports_to_markdown(reports: &[EstimateReport]) -> String {
    let mut sorted: Vec<&EstimateReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name));
    let mut s = String::from("# Estimate reports\n\n| suite | verdict | worst margin | tolerance |\n|---|---|---|---|\n");
    for r in &sorted {
        writeln!(s, "| {} | {} | {:.6e} | {:.3e} |", r.name, r.verdict, r.worst_margin(), r.tolerance).unwrap();
    }
    s.push('\n');
    for r in sorted {
        s.push_str(&r.to_markdown());
        s.push('\n');
    }
    s
}

/// Named scalar test function with its sup norm (`∞` if unbounded).
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub sup: f64,
    pub f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TestFunction({}, sup = {})", self.name, self.sup)
    }
}

impl TestFunction {
    pub fn new(name: &str, sup: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            sup,
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// `λ f`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let f = self.f.clone();
        Self::new(&format!("{lambda}*{}", self.name), lambda.abs() * self.sup, move |x| lambda * f(x))
    }

    /// Functions of the first coordinate: `one`, `x`, `x2`, `cos`, `tanh`,
    /// `gauss` (`e^{−x²}`), `steep_tanh` (`tanh(x/10⁻³)`).
    pub fn named(name: &str) -> Result<Self> {
        Ok(match name {
            "one" => Self::new(name, 1.0, |_| 1.0),
            "x" => Self::new(name, f64::INFINITY, |x| x[0]),
            "x2" => Self::new(name, f64::INFINITY, |x| x[0] * x[0]),
            "cos" => Self::new(name, 1.0, |x| x[0].cos()),
            "tanh" => Self::new(name, 1.0, |x| x[0].tanh()),
            "gauss" => Self::new(name, 1.0, |x| (-x[0] * x[0]).exp()),
            "steep_tanh" => Self::new(name, 1.0, |x| (x[0] * 1e3).tanh()),
            _ => return Err(Error::InvalidInput(format!("unknown test function '{name}'"))),
        })
    }
}

/// `μ_t` of an OU spec with the default horizon.
pub(crate) fn measure_at(spec: &ProblemSpec, t: f64) -> Result<GaussianMeasure> {
    ou_evolution_measure(spec.ou()?, t, DEFAULT_HORIZON, MEASURE_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_follows_margin() {
        let mut r = EstimateReport::new("demo", "a ≤ b", 1e-3, "test");
        r.push(Case::new("c1", "", 1.0, 2.0));
        r.push(Case::new("c2", "", 2.0005, 2.0));
        let r = r.finish();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!((r.worst_margin() - 5e-4).abs() < 1e-12);
        let mut bad = r.clone();
        bad.push(Case::new("c3", "", f64::NAN, 0.0));
        assert_eq!(bad.finish().verdict, Verdict::Fail);
        assert_eq!(EstimateReport::new("e", "", 0.0, "").finish().verdict, Verdict::NotApplicable);
    }

    #[test]
    fn csv_is_sorted_and_quoted() {
        let a = EstimateReport::new("zeta", "", 0.0, "").finish();
        let mut b = EstimateReport::new("alpha", "", 0.0, "");
        b.push(Case::new("x,y", "", 0.0, 1.0));
        let csv = reports_to_csv(&[a, b.finish()]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("alpha,\"x,y\","));
        assert_eq!(lines[2], "zeta,,,,,,NOT-APPLICABLE");
    }
}
