//! Scenario files: a TOML document with `[problem]`, `[run]` and `[output]`
//! tables.
//!
//! ```toml
//! problem = "ou1d"            # or a [problem] table
//!
//! [run]
//! command = "verify"
//! suites = ["linear"]
//! window = [0.0, 1.0]
//! ```

use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};

use super::expr::{Expr, Node, Scope, Var};
use crate::error::{Error, Result};
use crate::ou::OUCoefficients;
use crate::problem::{
    builtin, polycoef, ClosureField, CoefficientField, LyapunovCertificate, ProblemSpec, SemilinearTerm,
    SmoothBounds, TimeInterval,
};
use crate::verify::TestFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    #[serde(deserialize_with = "problem_or_name")]
    pub problem: ProblemDoc,
    #[serde(default)]
    pub run: RunDoc,
    #[serde(default)]
    pub output: OutputDoc,
}

/// Either a built-in (`base`, optionally with `params` and a nonlinearity
/// override) or inline coefficients.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// One entry (scalar times identity) or `d²` row-major entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta0: Option<f64>,
    /// `[k, m]` of the coefficient gradient bounds.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smooth_bounds: Option<[f64; 2]>,
    /// Left end of the time interval; absent means `−∞`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear_growth_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<PolyParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ou: Option<OuDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyParams {
    pub l: f64,
    pub m: f64,
    pub r: f64,
    #[serde(default = "one")]
    pub d: usize,
}

fn one() -> usize {
    1
}

/// `Q(t)`, `B(t)`, `f(t)` of an Ornstein–Uhlenbeck operator, as expressions in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuDoc {
    pub q: Vec<String>,
    #[serde(rename = "B")]
    pub b: Vec<String>,
    pub f: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovDoc {
    pub phi: String,
    pub a: f64,
    pub c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// `closed-form`, `grid` or `mc`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suites: Option<Vec<String>>,
    /// Initial data: names of built-in test functions or expressions in `x1..xd`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cases: Option<usize>,
    /// Output time slices in `(s, τ]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub times: Option<usize>,
    /// Output points per axis on `[−extent, extent]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_exponents: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyper_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lsi_k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard: Option<PicardDoc>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slab: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    /// Subset of `csv`, `markdown`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<String>>,
}

fn problem_or_name<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ProblemDoc, D::Error> {
    match toml::Value::deserialize(d)? {
        toml::Value::String(base) => Ok(ProblemDoc {
            base: Some(base),
            ..Default::default()
        }),
        other => ProblemDoc::deserialize(other).map_err(serde::de::Error::custom),
    }
}

pub const COMMANDS: &[&str] = &["validate", "evolve-linear", "solve", "measures", "verify", "oracle-compare"];
pub const SUITES: &[&str] = &[
    "linear",
    "backend-agreement",
    "measure-derivative",
    "sup-stability",
    "lp-stability",
    "hypercontractivity",
];
pub const BACKENDS: &[&str] = &["closed-form", "grid", "mc"];
pub const FORMATS: &[&str] = &["csv", "markdown"];

/// A validated scenario: the document plus the compiled problem and data.
#[derive(Clone)]
pub struct Scenario {
    pub doc: ScenarioDoc,
    pub spec: ProblemSpec,
    pub initial: Vec<TestFunction>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario").field("doc", &self.doc).field("spec", &self.spec).finish()
    }
}

impl PartialEq for Scenario {
    fn eq(&self, other: &Self) -> bool {
        self.doc == other.doc
    }
}

impl Scenario {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(&self.doc).map_err(|e| Error::InvalidInput(format!("cannot serialize scenario: {e}")))
    }

    pub fn backend(&self) -> &str {
        self.doc.run.backend.as_deref().unwrap_or(if self.spec.ou.is_some() { "closed-form" } else { "grid" })
    }

    pub fn seed(&self) -> u64 {
        self.doc.run.seed.unwrap_or(7)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn field_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Scenario {
        path: path.into(),
        message: message.into(),
    }
}

fn parse_at(path: &str, src: &str, scope: Scope) -> Result<Expr> {
    Expr::parse(src, scope).map_err(|e| field_err(path, e.to_string()))
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    compile(doc)
}

/// Validates a document and compiles its expressions.
pub fn compile(doc: ScenarioDoc) -> Result<Scenario> {
    check_choice("run.command", doc.run.command.as_deref(), COMMANDS)?;
    check_choice("run.backend", doc.run.backend.as_deref(), BACKENDS)?;
    for (k, s) in doc.run.suites.iter().flatten().enumerate() {
        check_choice(&format!("run.suites[{k}]"), Some(s), SUITES)?;
    }
    for (k, s) in doc.output.formats.iter().flatten().enumerate() {
        check_choice(&format!("output.formats[{k}]"), Some(s), FORMATS)?;
    }
    let mut spec = build_problem(&doc.problem)?;
    if let Some([s, tau]) = doc.run.window {
        spec.time = TimeInterval::new(None, s, tau).map_err(|e| field_err("run.window", e.to_string()))?;
    }
    if let Some(lower) = doc.problem.lower {
        spec.time = TimeInterval::new(Some(lower), spec.time.s, spec.time.tau)
            .map_err(|e| field_err("problem.lower", e.to_string()))?;
    }
    let d = spec.dim();
    let names: Vec<String> = doc.run.initial.clone().unwrap_or_else(|| vec!["tanh".into()]);
    let initial = names
        .iter()
        .enumerate()
        .map(|(k, src)| initial_datum(&format!("run.initial[{k}]"), src, d))
        .collect::<Result<Vec<_>>>()?;
    if initial.is_empty() {
        return Err(field_err("run.initial", "at least one initial datum is required"));
    }
    positive("run.horizon", doc.run.horizon)?;
    positive("run.extent", doc.run.extent)?;
    if let Some(g) = &doc.run.grid {
        positive("run.grid.radius", g.radius)?;
        positive("run.grid.dt", g.dt)?;
    }
    if let Some(m) = &doc.run.mc {
        positive("run.mc.dt", m.dt)?;
    }
    if let Some(p) = &doc.run.picard {
        positive("run.picard.tol", p.tol)?;
        positive("run.picard.dt", p.dt)?;
        positive("run.picard.slab", p.slab)?;
    }
    Ok(Scenario { doc, spec, initial })
}

fn check_choice(path: &str, value: Option<&str>, allowed: &[&str]) -> Result<()> {
    match value {
        Some(v) if !allowed.contains(&v) => Err(field_err(path, format!("`{v}` is not one of {}", allowed.join(", ")))),
        _ => Ok(()),
    }
}

fn positive(path: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(field_err(path, format!("must be positive, got {x}"))),
        _ => Ok(()),
    }
}

/// Named test functions (of the first coordinate), or an expression whose sup is estimated on a box;
/// growth between the inner and the outer box marks it unbounded.
fn initial_datum(path: &str, src: &str, d: usize) -> Result<TestFunction> {
    if let Ok(f) = TestFunction::named(src) {
        return Ok(f);
    }
    let e = parse_at(path, src, Scope::space(d))?;
    let inner = sampled_sup(&e, d, 25.0);
    let outer = sampled_sup(&e, d, 50.0);
    let sup = if outer > inner * (1.0 + 1e-9) + 1e-12 { f64::INFINITY } else { outer };
    Ok(TestFunction::new(src, sup, move |x| e.eval(0.0, x, 0.0)))
}

fn sampled_sup(e: &Expr, d: usize, r: f64) -> f64 {
    let n: usize = if d == 1 { 4001 } else { 201 };
    let total = n.pow(d.min(3) as u32);
    let mut x = vec![0.0; d];
    let mut sup: f64 = 0.0;
    for idx in 0..total {
        let mut k = idx;
        for xi in x.iter_mut().take(d.min(3)) {
            *xi = -r + 2.0 * r * (k % n) as f64 / (n - 1) as f64;
            k /= n;
        }
        sup = sup.max(e.eval(0.0, &x, 0.0).abs());
    }
    sup
}

fn build_problem(p: &ProblemDoc) -> Result<ProblemSpec> {
    let mut spec = match &p.base {
        Some(base) => {
            for (field, set) in [
                ("dim", p.dim.is_some()),
                ("q", p.q.is_some()),
                ("b", p.b.is_some()),
                ("eta0", p.eta0.is_some()),
                ("ou", p.ou.is_some()),
                ("lyapunov", p.lyapunov.is_some()),
                ("smooth_bounds", p.smooth_bounds.is_some()),
            ] {
                if set {
                    return Err(field_err(
                        format!("problem.{field}"),
                        format!("cannot be combined with the built-in `{base}`"),
                    ));
                }
            }
            match (base.as_str(), p.params) {
                ("polycoef", Some(pp)) => {
                    polycoef(pp.l, pp.m, pp.r, pp.d).map_err(|e| field_err("problem.params", e.to_string()))?
                }
                (_, Some(_)) => return Err(field_err("problem.params", "only the `polycoef` built-in takes parameters")),
                (name, None) => builtin(name).map_err(|e| field_err("problem.base", e.to_string()))?,
            }
        }
        None => inline_problem(p)?,
    };
    if let Some(name) = &p.name {
        spec.name = name.clone();
    }
    let consts_set = p.lipschitz.is_some() || p.psi0.is_some() || p.growth_k.is_some() || p.linear_growth_h.is_some();
    match &p.psi {
        Some(src) => {
            let e = parse_at("problem.psi", src, Scope::nonlinearity())?;
            let de = e.diff(Var::U);
            let mut term = SemilinearTerm::new(src.clone(), move |t, xi| e.eval(t, &[], xi))
                .with_derivative_at_zero(move |t| de.eval(t, &[], 0.0));
            if let Some(l) = p.lipschitz {
                term = term.with_lipschitz(l);
            }
            if let Some(v) = p.psi0 {
                term = term.with_psi0(v);
            }
            if let Some(v) = p.growth_k {
                term = term.with_growth_k(v);
            }
            if let Some(v) = p.linear_growth_h {
                term = term.with_linear_growth(v);
            }
            spec = spec.with_nonlinearity(term);
        }
        None if consts_set => {
            return Err(field_err("problem.psi", "structural constants given without a nonlinearity"));
        }
        None => {}
    }
    Ok(spec)
}

fn inline_problem(p: &ProblemDoc) -> Result<ProblemSpec> {
    let d = p.dim.ok_or_else(|| field_err("problem.dim", "missing (required for inline coefficients)"))?;
    if d == 0 {
        return Err(field_err("problem.dim", "must be positive"));
    }
    let eta0 = p.eta0.ok_or_else(|| field_err("problem.eta0", "missing (required for inline coefficients)"))?;
    let lyap_doc = p
        .lyapunov
        .as_ref()
        .ok_or_else(|| field_err("problem.lyapunov", "missing (required for inline coefficients)"))?;

    let (coeff, ou) = match (&p.ou, &p.q, &p.b) {
        (Some(ou_doc), None, None) => {
            let ou = ou_coefficients(ou_doc, d)?;
            let field = ou.to_coefficient_field(eta0).map_err(|e| field_err("problem.eta0", e.to_string()))?;
            (field, Some(ou))
        }
        (Some(_), _, _) => return Err(field_err("problem.ou", "cannot be combined with `q`/`b`")),
        (None, Some(q), Some(b)) => (coefficient_field(q, b, d, eta0)?, None),
        (None, None, _) => return Err(field_err("problem.q", "missing")),
        (None, _, None) => return Err(field_err("problem.b", "missing")),
    };
    let coeff = match p.smooth_bounds {
        Some([k, m]) => coeff.with_smooth_bounds(SmoothBounds::constant(k, m)),
        None => coeff,
    };
    let phi = lyapunov_field(&lyap_doc.phi, d)?;
    let mut lyap = LyapunovCertificate::new(Arc::new(phi), lyap_doc.a, lyap_doc.c)
        .map_err(|e| field_err("problem.lyapunov", e.to_string()))?;
    if let Some([c0, c1, c2]) = lyap_doc.growth {
        lyap = lyap.with_growth_consts(c0, c1, c2);
    }
    let name = p.name.clone().unwrap_or_else(|| "inline".into());
    let spec = ProblemSpec::new(name, coeff, SemilinearTerm::zero(), lyap, TimeInterval::whole_line(0.0, 1.0)?)?;
    match ou {
        Some(ou) => spec.with_ou(ou),
        None => Ok(spec),
    }
}

fn expr_list(path: &str, srcs: &[String], scope: Scope, lens: &[usize]) -> Result<Vec<Expr>> {
    if !lens.contains(&srcs.len()) {
        let want: Vec<String> = lens.iter().map(|l| l.to_string()).collect();
        return Err(field_err(
            path,
            format!("expected {} entries, got {}", want.join(" or "), srcs.len()),
        ));
    }
    srcs.iter()
        .enumerate()
        .map(|(k, s)| parse_at(&format!("{path}[{k}]"), s, scope))
        .collect()
}

/// Expands a one-entry matrix to `c I`.
fn matrix_entry(es: &[Expr], d: usize, i: usize, j: usize) -> Option<&Expr> {
    if es.len() == 1 {
        (i == j).then(|| &es[0])
    } else {
        Some(&es[i * d + j])
    }
}

fn coefficient_field(q: &[String], b: &[String], d: usize, eta0: f64) -> Result<CoefficientField> {
    let qs = expr_list("problem.q", q, Scope::field(d), &[1, d * d])?;
    let bs = expr_list("problem.b", b, Scope::field(d), &[d])?;
    CoefficientField::new(
        d,
        move |t, x, out| {
            for i in 0..d {
                for j in 0..d {
                    out[i * d + j] = matrix_entry(&qs, d, i, j).map_or(0.0, |e| e.eval(t, x, 0.0));
                }
            }
        },
        move |t, x, out| {
            for (o, e) in out.iter_mut().zip(&bs) {
                *o = e.eval(t, x, 0.0);
            }
        },
        eta0,
    )
    .map_err(|e| field_err("problem.eta0", e.to_string()))
}

fn ou_coefficients(doc: &OuDoc, d: usize) -> Result<OUCoefficients> {
    use nalgebra::{DMatrix, DVector};
    let qs = expr_list("problem.ou.q", &doc.q, Scope::time(), &[1, d * d])?;
    let bs = expr_list("problem.ou.B", &doc.b, Scope::time(), &[1, d * d])?;
    let fs = expr_list("problem.ou.f", &doc.f, Scope::time(), &[d])?;
    let matrix = |es: Vec<Expr>| {
        move |t: f64| DMatrix::from_fn(d, d, |i, j| matrix_entry(&es, d, i, j).map_or(0.0, |e| e.eval(t, &[], 0.0)))
    };
    OUCoefficients::new(
        d,
        matrix(qs),
        matrix(bs),
        move |t| DVector::from_iterator(d, fs.iter().map(|e| e.eval(t, &[], 0.0))),
    )
    .map_err(|e| field_err("problem.ou", e.to_string()))
}

fn lyapunov_field(src: &str, d: usize) -> Result<ClosureField> {
    let phi = parse_at("problem.lyapunov.phi", src, Scope::space(d))?;
    let grad: Vec<Node> = (0..d).map(|i| phi.diff(Var::X(i))).collect();
    let hess: Vec<Node> = (0..d * d).map(|k| grad[k / d].diff(Var::X(k % d))).collect();
    Ok(ClosureField::new(
        d,
        move |x| phi.eval(0.0, x, 0.0),
        move |x, out| {
            for (o, g) in out.iter_mut().zip(&grad) {
                *o = g.eval(0.0, x, 0.0);
            }
        },
        move |x, out| {
            for (o, h) in out.iter_mut().zip(&hess) {
                *o = h.eval(0.0, x, 0.0);
            }
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_by_name() {
        let sc = parse_scenario("problem = \"ou1d\"\n[run]\nwindow = [0.0, 1.0]\n").unwrap();
        assert_eq!(sc.spec.name, "ou1d");
        assert_eq!(sc.spec.time.tau, 1.0);
        assert_eq!(sc.backend(), "closed-form");
    }

    #[test]
    fn inline_polynomial_drift() {
        let text = r#"
[problem]
dim = 1
q = ["1"]
b = ["-x1*(1 + x1^2)"]
eta0 = 1.0
[problem.lyapunov]
phi = "1 + x1^2"
a = 3.004
c = 1.0
"#;
        let sc = parse_scenario(text).unwrap();
        let reference = polycoef(0.0, 1.0, 1.0, 1).unwrap();
        for x in [-2.0, -0.3, 0.0, 1.7] {
            assert_eq!(sc.spec.coefficients.b(0.0, &[x]), reference.coefficients.b(0.0, &[x]));
            assert_eq!(sc.spec.coefficients.q(0.5, &[x]), reference.coefficients.q(0.5, &[x]));
            let mut h = [0.0];
            sc.spec.lyapunov.phi.hessian(&[x], &mut h);
            assert_eq!(h[0], 2.0);
        }
        assert_eq!(sc.backend(), "grid");
    }

    #[test]
    fn malformed_expression_points_at_operator() {
        let text = "[problem]\ndim = 1\nq = [\"1 +\"]\nb = [\"-x1\"]\neta0 = 1.0\n[problem.lyapunov]\nphi = \"1 + x1^2\"\na = 4.0\nc = 2.0\n";
        match parse_scenario(text) {
            Err(Error::Scenario { path, message }) => {
                assert_eq!(path, "problem.q[0]");
                assert!(message.contains("column 4"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_have_positions() {
        match parse_scenario("problem = \"ou1d\"\n[run\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match parse_scenario("problem = \"ou1d\"\n[run]\nbogus = 1\n") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let path_of = |text: &str| match parse_scenario(text) {
            Err(Error::Scenario { path, .. }) => path,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(path_of("[problem]\ndim = 1\n"), "problem.eta0");
        assert_eq!(path_of("problem = \"nope\"\n"), "problem.base");
        assert_eq!(path_of("problem = \"ou1d\"\n[run]\ncommand = \"fly\"\n"), "run.command");
        assert_eq!(path_of("problem = \"ou1d\"\n[run]\nsuites = [\"linear\", \"x\"]\n"), "run.suites[1]");
        assert_eq!(
            path_of("[problem]\nbase = \"ou1d\"\ndim = 2\n"),
            "problem.dim"
        );
    }

    #[test]
    fn initial_data_bounds() {
        assert_eq!(initial_datum("p", "tanh", 1).unwrap().sup, 1.0);
        assert!((initial_datum("p", "exp(-x1^2) * 3", 1).unwrap().sup - 3.0).abs() < 1e-12);
        assert!(initial_datum("p", "x1^2", 1).unwrap().sup.is_infinite());
    }
}
