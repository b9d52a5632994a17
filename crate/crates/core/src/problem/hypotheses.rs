use std::fmt;

use super::{generator_at, ProblemSpec, SmoothField};
use crate::error::{Error, Result};
use crate::linalg::sym_eig_extremes;

/// Where and how densely the hypotheses are sampled. Every report carries
/// its plan, since the checks only cover the sampled region.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePlan {
    pub t0: f64,
    pub t1: f64,
    pub n_times: usize,
    /// Spatial box `[−radius, radius]^d`.
    pub radius: f64,
    pub lattice_per_axis: usize,
    pub halton_points: usize,
    /// `ξ`-grid `[−xi_max, xi_max]` for the nonlinearity clauses.
    pub xi_max: f64,
    pub xi_points: usize,
}

impl SamplePlan {
    pub fn for_spec(spec: &ProblemSpec) -> Self {
        let lattice = match spec.dim() {
            1 => 81,
            2 => 21,
            3 => 7,
            _ => 4,
        };
        Self {
            t0: spec.time.s,
            t1: spec.time.tau,
            n_times: 11,
            radius: 10.0,
            lattice_per_axis: lattice,
            halton_points: 200,
            xi_max: 10.0,
            xi_points: 401,
        }
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn times(&self) -> Vec<f64> {
        let n = self.n_times.max(1);
        if n == 1 {
            return vec![self.t0];
        }
        (0..n)
            .map(|k| self.t0 + (self.t1 - self.t0) * k as f64 / (n - 1) as f64)
            .collect()
    }

    /// Lattice points of the box followed by Halton points in it.
    pub fn points(&self, d: usize) -> Vec<Vec<f64>> {
        let n = self.lattice_per_axis.max(2);
        let total = n.pow(d as u32);
        let mut pts = Vec::with_capacity(total + self.halton_points);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            pts.push(
                idx.iter()
                    .map(|&k| -self.radius + 2.0 * self.radius * k as f64 / (n - 1) as f64)
                    .collect(),
            );
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < n {
                    break;
                }
                *slot = 0;
            }
        }
        for k in 1..=self.halton_points {
            pts.push(
                (0..d)
                    .map(|axis| self.radius * (2.0 * radical_inverse(k, PRIMES[axis % PRIMES.len()]) - 1.0))
                    .collect(),
            );
        }
        pts
    }

    pub fn xi_grid(&self) -> Vec<f64> {
        let n = self.xi_points.max(2);
        (0..n)
            .map(|k| -self.xi_max + 2.0 * self.xi_max * k as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn describe(&self) -> String {
        format!(
            "t ∈ [{}, {}] ({} times), x ∈ [−{r}, {r}]^d ({} per axis + {} Halton), ξ ∈ [−{m}, {m}] ({} points)",
            self.t0,
            self.t1,
            self.n_times,
            self.lattice_per_axis,
            self.halton_points,
            self.xi_points,
            r = self.radius,
            m = self.xi_max,
        )
    }
}

const PRIMES: [usize; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut acc = 0.0;
    let scale = inv;
    while k > 0 {
        acc += (k % base) as f64 * inv;
        k /= base;
        inv *= scale;
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClauseReport {
    pub name: String,
    pub pass: bool,
    /// Minimum over samples of `RHS − LHS`; negative means violated.
    pub worst_slack: f64,
    /// Time and point (or `[ξ]`, `[ξ, η]`) where the worst slack occurs.
    pub witness_t: f64,
    pub witness: Vec<f64>,
    pub samples: usize,
}

/// Running minimum of slack with a pass rule tolerant to rounding.
struct Tally {
    name: &'static str,
    rel_tol: f64,
    worst: f64,
    ok: bool,
    wt: f64,
    wx: Vec<f64>,
    n: usize,
    strict: bool,
}

const ROUNDING: f64 = 64.0 * f64::EPSILON;
const FD_REL: f64 = 1e-6;

impl Tally {
    fn new(name: &'static str, rel_tol: f64) -> Self {
        Self {
            name,
            rel_tol,
            worst: f64::INFINITY,
            ok: true,
            wt: f64::NAN,
            wx: Vec::new(),
            n: 0,
            strict: false,
        }
    }

    fn push(&mut self, t: f64, x: &[f64], lhs: f64, rhs: f64) {
        let slack = rhs - lhs;
        self.n += 1;
        let fine = if self.strict {
            slack > 0.0
        } else {
            slack >= -self.rel_tol * (lhs.abs() + rhs.abs() + 1.0)
        };
        if !fine || slack.is_nan() {
            self.ok = false;
        }
        if slack < self.worst || slack.is_nan() || self.wx.is_empty() {
            self.worst = if slack.is_nan() { f64::NEG_INFINITY } else { slack };
            self.wt = t;
            self.wx = x.to_vec();
        }
    }

    fn finish(self) -> ClauseReport {
        ClauseReport {
            name: self.name.to_string(),
            pass: self.ok,
            worst_slack: self.worst,
            witness_t: self.wt,
            witness: self.wx,
            samples: self.n,
        }
    }
}

/// Which global existence argument the instance qualifies for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalRoute {
    /// `|ψ(t,ξ)| ≤ h(1 + |ξ|)`: Gronwall on the mild formulation.
    LinearGrowth,
    /// `ξψ(t,ξ) ≤ k(1 + ξ²)` (or dissipativity): maximum principle on the
    /// classical solution.
    OneSidedGrowth,
}

impl fmt::Display for GlobalRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GlobalRoute::LinearGrowth => "linear-growth",
            GlobalRoute::OneSidedGrowth => "one-sided-growth",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub problem: String,
    pub plan: SamplePlan,
    pub clauses: Vec<ClauseReport>,
    pub routes: Vec<GlobalRoute>,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.clauses.iter().all(|c| c.pass)
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseReport> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("# Hypotheses: {}\n\nSampling: {}\n\n", self.problem, self.plan.describe());
        s.push_str("| clause | verdict | worst slack | witness t | witness point | samples |\n");
        s.push_str("|---|---|---|---|---|---|\n");
        for c in &self.clauses {
            s.push_str(&format!(
                "| {} | {} | {:.12e} | {} | {:?} | {} |\n",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                c.worst_slack,
                c.witness_t,
                c.witness,
                c.samples
            ));
        }
        if !self.routes.is_empty() {
            let r: Vec<String> = self.routes.iter().map(|r| r.to_string()).collect();
            s.push_str(&format!("\nGlobal existence routes: {}\n", r.join(", ")));
        }
        s
    }
}

fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.abs())
}

/// Symmetry, ellipticity, the Lyapunov clauses and, when bounds are given,
/// the gradient clauses on the coefficients (by central differences).
pub fn check_base_hypotheses(spec: &ProblemSpec, plan: &SamplePlan) -> HypothesisReport {
    let coeff = &spec.coefficients;
    let d = coeff.dim();
    let lyap = &spec.lyapunov;
    let phi: &dyn SmoothField = lyap.phi.as_ref();
    let times = plan.times();
    let points = plan.points(d);

    let mut sym = Tally::new("q_symmetric", 0.0);
    let mut ell = Tally::new("ellipticity", ROUNDING);
    let mut pos = Tally::new("phi_nonnegative", ROUNDING);
    let mut coercive = Tally::new("phi_coercive", 0.0);
    coercive.strict = true;
    let mut drift = Tally::new("lyapunov_drift", ROUNDING);
    let mut qgrad = Tally::new("q_gradient_bound", FD_REL);
    let mut bgrad = Tally::new("b_gradient_bound", FD_REL);

    let mut q = vec![0.0; d * d];
    let mut qp = vec![0.0; d * d];
    let mut qm = vec![0.0; d * d];
    let mut bp = vec![0.0; d];
    let mut bm = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let mut qgrads = vec![0.0; d * d * d];
    let mut scratch = vec![0.0; 2 * d * d + 2 * d];
    let mut xs = vec![0.0; d];

    for x in &points {
        pos.push(f64::NAN, x, 0.0, phi.value(x));
    }
    // Escape along ±e_i and the two main diagonals.
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        for sgn in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = sgn;
            dirs.push(e);
        }
    }
    for sgn in [1.0, -1.0] {
        dirs.push(vec![sgn / (d as f64).sqrt(); d]);
    }
    for e in &dirs {
        let mut prev: Option<f64> = None;
        for &r in &lyap.escape_radii {
            let x: Vec<f64> = e.iter().map(|v| v * r).collect();
            let v = phi.value(&x);
            if let Some(p) = prev {
                coercive.push(f64::NAN, &x, p, v);
            }
            prev = Some(v);
        }
    }

    for &t in &times {
        for x in &points {
            coeff.q_into(t, x, &mut q);
            let mut asym = 0.0_f64;
            for i in 0..d {
                for j in 0..d {
                    asym = asym.max((q[i * d + j] - q[j * d + i]).abs());
                }
            }
            sym.push(t, x, asym, 0.0);
            let (lmin, _) = sym_eig_extremes(&q, d);
            ell.push(t, x, coeff.eta0_claimed(), lmin);
            let a_phi = generator_at(coeff, phi, t, x, &mut scratch);
            drift.push(t, x, a_phi, lyap.a - lyap.c * phi.value(x));

            if let Some(bounds) = coeff.smooth_bounds() {
                xs.copy_from_slice(x);
                for axis in 0..d {
                    let h = fd_step(x[axis]);
                    xs[axis] = x[axis] + h;
                    coeff.q_into(t, &xs, &mut qp);
                    coeff.b_into(t, &xs, &mut bp);
                    xs[axis] = x[axis] - h;
                    coeff.q_into(t, &xs, &mut qm);
                    coeff.b_into(t, &xs, &mut bm);
                    xs[axis] = x[axis];
                    for ij in 0..d * d {
                        qgrads[ij * d + axis] = (qp[ij] - qm[ij]) / (2.0 * h);
                    }
                    for i in 0..d {
                        // jac[i][axis] = ∂_axis b_i
                        jac[i * d + axis] = (bp[i] - bm[i]) / (2.0 * h);
                    }
                }
                let k = (bounds.k)(t);
                for ij in 0..d * d {
                    let g = &qgrads[ij * d..(ij + 1) * d];
                    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                    qgrad.push(t, x, norm, k * lmin);
                }
                let (_, lmax) = sym_eig_extremes(&jac, d);
                bgrad.push(t, x, lmax, (bounds.m)(t));
            }
        }
    }

    let mut clauses = vec![
        sym.finish(),
        ell.finish(),
        pos.finish(),
        coercive.finish(),
        drift.finish(),
    ];
    if coeff.smooth_bounds().is_some() {
        clauses.push(qgrad.finish());
        clauses.push(bgrad.finish());
    }
    HypothesisReport {
        problem: spec.name.clone(),
        plan: plan.clone(),
        clauses,
        routes: Vec::new(),
    }
}

/// Optional clauses on the coefficients' growth and on `ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthClause {
    /// `|Qx| ≤ C0|x|φ`, `Tr Q ≤ C1(1+|x|)φ`, `⟨b,x⟩ ≤ C2|x|φ`.
    Growth,
    /// `ξψ ≤ ψ0 ξ²`.
    Dissipative,
    /// `ξψ ≤ k(1 + ξ²)`.
    OneSided,
    /// `|ψ| ≤ h(1 + |ξ|)`.
    LinearGrowth,
    /// `|ψ(ξ) − ψ(η)| ≤ L|ξ − η|`.
    Lipschitz,
}

impl GrowthClause {
    pub const ALL: [GrowthClause; 5] = [
        GrowthClause::Growth,
        GrowthClause::Dissipative,
        GrowthClause::OneSided,
        GrowthClause::LinearGrowth,
        GrowthClause::Lipschitz,
    ];
}

/// Checks the requested clauses; a clause whose constant is absent from the
/// spec is a configuration error.
pub fn check_growth_and_dissipativity(
    spec: &ProblemSpec,
    plan: &SamplePlan,
    requested: &[GrowthClause],
) -> Result<HypothesisReport> {
    let term = &spec.nonlinearity;
    for c in requested {
        let missing = match c {
            GrowthClause::Growth if spec.lyapunov.growth_consts.is_none() => Some("lyapunov.growth_consts"),
            GrowthClause::Dissipative if term.psi0.is_none() => Some("nonlinearity.psi0"),
            GrowthClause::OneSided if term.growth_k.is_none() => Some("nonlinearity.growth_k"),
            GrowthClause::LinearGrowth if term.linear_growth_h.is_none() => {
                Some("nonlinearity.linear_growth_h")
            }
            GrowthClause::Lipschitz if term.lipschitz_l.is_none() => Some("nonlinearity.lipschitz_l"),
            _ => None,
        };
        if let Some(field) = missing {
            return Err(Error::MissingField(field.into()));
        }
    }
    let d = spec.dim();
    let times = plan.times();
    let xi = plan.xi_grid();
    let mut clauses = Vec::new();
    let mut routes = Vec::new();

    for c in requested {
        match c {
            GrowthClause::Growth => {
                let (c0, c1, c2) = spec.lyapunov.growth_consts.unwrap();
                let phi = spec.lyapunov.phi.as_ref();
                let mut tq = Tally::new("growth_qx", ROUNDING);
                let mut tt = Tally::new("growth_trace", ROUNDING);
                let mut tb = Tally::new("growth_drift", ROUNDING);
                let mut q = vec![0.0; d * d];
                let mut b = vec![0.0; d];
                let points = plan.points(d);
                for &t in &times {
                    for x in &points {
                        spec.coefficients.q_into(t, x, &mut q);
                        spec.coefficients.b_into(t, x, &mut b);
                        let nx = super::norm2(x).sqrt();
                        let ph = phi.value(x);
                        let qx = (0..d)
                            .map(|i| {
                                let r: f64 = (0..d).map(|j| q[i * d + j] * x[j]).sum();
                                r * r
                            })
                            .sum::<f64>()
                            .sqrt();
                        tq.push(t, x, qx, c0 * nx * ph);
                        let tr: f64 = (0..d).map(|i| q[i * d + i]).sum();
                        tt.push(t, x, tr, c1 * (1.0 + nx) * ph);
                        let bx: f64 = (0..d).map(|i| b[i] * x[i]).sum();
                        tb.push(t, x, bx, c2 * nx * ph);
                    }
                }
                clauses.extend([tq.finish(), tt.finish(), tb.finish()]);
            }
            GrowthClause::Dissipative => {
                let p0 = term.psi0.unwrap();
                let mut tally = Tally::new("dissipative", ROUNDING);
                for &t in &times {
                    for &v in &xi {
                        tally.push(t, &[v], v * term.eval(t, v), p0 * v * v);
                    }
                }
                let r = tally.finish();
                if r.pass {
                    routes.push(GlobalRoute::OneSidedGrowth);
                }
                clauses.push(r);
            }
            GrowthClause::OneSided => {
                let k = term.growth_k.unwrap();
                let mut tally = Tally::new("one_sided_growth", ROUNDING);
                for &t in &times {
                    for &v in &xi {
                        tally.push(t, &[v], v * term.eval(t, v), k * (1.0 + v * v));
                    }
                }
                let r = tally.finish();
                if r.pass && !routes.contains(&GlobalRoute::OneSidedGrowth) {
                    routes.push(GlobalRoute::OneSidedGrowth);
                }
                clauses.push(r);
            }
            GrowthClause::LinearGrowth => {
                let h = term.linear_growth_h.unwrap();
                let mut tally = Tally::new("linear_growth", ROUNDING);
                for &t in &times {
                    for &v in &xi {
                        tally.push(t, &[v], term.eval(t, v).abs(), h * (1.0 + v.abs()));
                    }
                }
                let r = tally.finish();
                if r.pass {
                    routes.insert(0, GlobalRoute::LinearGrowth);
                }
                clauses.push(r);
            }
            GrowthClause::Lipschitz => {
                let l = term.lipschitz_l.unwrap();
                let mut tally = Tally::new("lipschitz", ROUNDING);
                for &t in &times {
                    let vals: Vec<f64> = xi.iter().map(|&v| term.eval(t, v)).collect();
                    let n = xi.len();
                    for i in 0..n {
                        for j in [i + 1, n - 1 - i, n / 2] {
                            if j < n && j != i {
                                tally.push(
                                    t,
                                    &[xi[i], xi[j]],
                                    (vals[i] - vals[j]).abs(),
                                    l * (xi[i] - xi[j]).abs(),
                                );
                            }
                        }
                    }
                }
                clauses.push(tally.finish());
            }
        }
    }
    Ok(HypothesisReport {
        problem: spec.name.clone(),
        plan: plan.clone(),
        clauses,
        routes,
    })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;

    #[test]
    fn ou1d_passes_everything() {
        let spec = ou1d();
        let plan = SamplePlan::for_spec(&spec);
        let rep = check_base_hypotheses(&spec, &plan);
        assert!(rep.all_pass(), "{}", rep.to_markdown());
        let drift = rep.clause("lyapunov_drift").unwrap();
        assert_eq!(drift.worst_slack, 0.0);
    }

    #[test]
    fn heat_fails_lyapunov_with_witness() {
        let spec = heat1d();
        let rep = check_base_hypotheses(&spec, &SamplePlan::for_spec(&spec));
        let c = rep.clause("lyapunov_drift").unwrap();
        assert!(!c.pass);
        let x = c.witness[0];
        // 2 > 4 − 2(1 + x²) exactly when x² > 0.
        assert!(x.abs() > 1.0 && 2.0 > 4.0 - 2.0 * (1.0 + x * x));
    }

    #[test]
    fn polycoef_family_passes() {
        for (l, m, r, d) in [(0.0, 1.0, 1.0, 1), (1.0, 1.0, 1.0, 1), (0.5, 0.0, 1.0, 2), (1.0, 0.5, 2.0, 2)] {
            let spec = polycoef(l, m, r, d).unwrap();
            let rep = check_base_hypotheses(&spec, &SamplePlan::for_spec(&spec));
            assert!(rep.all_pass(), "{}", rep.to_markdown());
            let g = check_growth_and_dissipativity(&spec, &SamplePlan::for_spec(&spec), &[GrowthClause::Growth])
                .unwrap();
            assert!(g.all_pass(), "{}", g.to_markdown());
        }
    }

    #[test]
    fn cubic_dissipation_and_growth() {
        let term = SemilinearTerm::new("-u^3", |_, u| -u * u * u)
            .with_psi0(0.0)
            .with_linear_growth(10.0);
        let spec = ou1d().with_nonlinearity(term);
        let plan = SamplePlan::for_spec(&spec);
        let rep = check_growth_and_dissipativity(
            &spec,
            &plan,
            &[GrowthClause::Dissipative, GrowthClause::LinearGrowth],
        )
        .unwrap();
        assert!(rep.clause("dissipative").unwrap().pass);
        assert!(!rep.clause("linear_growth").unwrap().pass);
        assert_eq!(rep.routes, vec![GlobalRoute::OneSidedGrowth]);
    }

    #[test]
    fn quadratic_fails_one_sided() {
        let term = SemilinearTerm::new("u^2", |_, u| u * u).with_growth_k(5.0);
        let spec = ou1d().with_nonlinearity(term);
        let rep = check_growth_and_dissipativity(&spec, &SamplePlan::for_spec(&spec), &[GrowthClause::OneSided])
            .unwrap();
        let c = rep.clause("one_sided_growth").unwrap();
        assert!(!c.pass && c.witness[0] > 0.0);
        assert!(rep.routes.is_empty());
    }

    #[test]
    fn missing_constant_is_configuration_error() {
        let spec = ou1d().with_nonlinearity(SemilinearTerm::new("sin", |_, u| u.sin()));
        let err = check_growth_and_dissipativity(&spec, &SamplePlan::for_spec(&spec), &[GrowthClause::LinearGrowth])
            .unwrap_err();
        assert!(matches!(err, Error::MissingField(ref f) if f == "nonlinearity.linear_growth_h"));
    }

    #[test]
    fn ou1d_growth_constants() {
        let spec = ou1d();
        let rep = check_growth_and_dissipativity(&spec, &SamplePlan::for_spec(&spec), &GrowthClause::ALL).unwrap();
        assert!(rep.all_pass(), "{}", rep.to_markdown());
        assert_eq!(rep.routes, vec![GlobalRoute::LinearGrowth, GlobalRoute::OneSidedGrowth]);
    }

    #[test]
    fn sample_plan_shapes() {
        let spec = polycoef(0.0, 1.0, 1.0, 2).unwrap();
        let plan = SamplePlan::for_spec(&spec);
        let pts = plan.points(2);
        assert_eq!(pts.len(), 21 * 21 + 200);
        assert!(pts.iter().all(|p| p.iter().all(|v| v.abs() <= 10.0)));
        assert_eq!(plan.times().len(), 11);
    }
}
