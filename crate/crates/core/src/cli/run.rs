use std::fs;
use std::path::{Path, PathBuf};

use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::grid::{propagate_linear, Grid, SchemeConfig};
use crate::mc::{estimate_propagator, SDEConfig};
use crate::ou::{apply_ou, ou_evolution_measure, DEFAULT_HORIZON};
use crate::problem::{check_base_hypotheses, check_growth_and_dissipativity, GrowthClause, SamplePlan};
use crate::quadrature::QuadratureRule;
use crate::semilinear::{picard_solve, PicardConfig};
use crate::verify::{
    backend_agreement, bump_family, reports_to_csv, reports_to_markdown, verify_hypercontractivity,
    verify_linear_estimates, verify_lp_stability, verify_measure_derivative, verify_sup_stability, EstimateReport,
    Evolution, LinearBackend, RandomCases, Verdict,
};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success,
    Failure,
    NotApplicable,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::Failure => 1,
            ExitStatus::NotApplicable => 2,
        }
    }

    /// Any failure wins; only-not-applicable maps to 2.
    pub fn from_reports(reports: &[EstimateReport]) -> Self {
        if reports.iter().any(|r| r.verdict == Verdict::Fail) {
            ExitStatus::Failure
        } else if !reports.is_empty() && reports.iter().all(|r| r.verdict == Verdict::NotApplicable) {
            ExitStatus::NotApplicable
        } else {
            ExitStatus::Success
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(path.to_path_buf())
}

/// Writes `reports.csv` and/or `reports.md`, sorted by suite then case id.
pub fn emit_report(reports: &[EstimateReport], formats: &[String], dir: &Path) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::Precondition("no reports to emit".into()));
    }
    let mut files = Vec::new();
    for fmt in formats {
        match fmt.as_str() {
            "csv" => files.push(write_file(&dir.join("reports.csv"), &reports_to_csv(reports))?),
            "markdown" => files.push(write_file(&dir.join("reports.md"), &reports_to_markdown(reports))?),
            other => return Err(Error::InvalidInput(format!("unknown output format `{other}`"))),
        }
    }
    Ok(files)
}

struct Ctx<'a> {
    sc: &'a Scenario,
    dir: PathBuf,
    formats: Vec<String>,
    seed: u64,
}

/// Runs `command` on a validated scenario. A `run.command` in the scenario
/// must agree with `command`.
pub fn run_scenario(sc: &Scenario, command: &str, out: Option<&Path>, seed: Option<u64>) -> Result<RunOutcome> {
    if let Some(declared) = sc.doc.run.command.as_deref() {
        if declared != command {
            return Err(Error::Scenario {
                path: "run.command".into(),
                message: format!("scenario declares `{declared}` but `{command}` was requested"),
            });
        }
    }
    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(sc.doc.output.dir.as_deref().unwrap_or("out")));
    let ctx = Ctx {
        sc,
        dir,
        formats: sc
            .doc
            .output
            .formats
            .clone()
            .unwrap_or_else(|| vec!["csv".into(), "markdown".into()]),
        seed: seed.unwrap_or_else(|| sc.seed()),
    };
    let res = match command {
        "validate" => validate(&ctx),
        "evolve-linear" => evolve_linear(&ctx),
        "solve" => solve(&ctx),
        "measures" => measures(&ctx),
        "verify" => verify(&ctx),
        "oracle-compare" => oracle_compare(&ctx),
        other => Err(Error::InvalidInput(format!("unknown command `{other}`"))),
    };
    res.map_err(|e| e.context(format!("scenario `{}`, command `{command}`", sc.spec.name)))
}

impl Ctx<'_> {
    fn window(&self) -> (f64, f64) {
        (self.sc.spec.time.s, self.sc.spec.time.tau)
    }

    fn out_times(&self) -> Vec<f64> {
        let (s, tau) = self.window();
        let k = self.sc.doc.run.times.unwrap_or(4).max(1);
        (1..=k).map(|i| s + (tau - s) * i as f64 / k as f64).collect()
    }

    /// Tensor points on `[−extent, extent]^d`.
    fn out_points(&self) -> Vec<Vec<f64>> {
        let d = self.sc.spec.dim();
        let n = self.sc.doc.run.points.unwrap_or(if d == 1 { 41 } else { 11 }).max(2);
        let e = self.sc.doc.run.extent.unwrap_or(3.0);
        let axis: Vec<f64> = (0..n).map(|k| -e + 2.0 * e * k as f64 / (n - 1) as f64).collect();
        let mut pts = vec![Vec::new()];
        for _ in 0..d {
            pts = pts
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&a| {
                        let mut q = p.clone();
                        q.push(a);
                        q
                    })
                })
                .collect();
        }
        pts
    }

    fn grid(&self) -> Result<(Grid, SchemeConfig)> {
        let g = self.sc.doc.run.grid.unwrap_or_default();
        let d = self.sc.spec.dim();
        let grid = Grid::new(d, g.radius.unwrap_or(10.0), g.points.unwrap_or(if d == 1 { 401 } else { 81 }))?;
        let mut scheme = SchemeConfig::for_grid(&grid);
        if let Some(dt) = g.dt {
            scheme = scheme.with_dt(dt);
        }
        if let Some(theta) = g.theta {
            scheme = scheme.with_theta(theta);
        }
        scheme.validate()?;
        Ok((grid, scheme))
    }

    fn sde(&self) -> SDEConfig {
        let m = self.sc.doc.run.mc.unwrap_or_default();
        SDEConfig::new(m.dt.unwrap_or(1e-3), m.paths.unwrap_or(100_000), self.seed)
    }

    fn picard(&self) -> Result<PicardConfig> {
        let mut cfg = match self.sc.backend() {
            "closed-form" => PicardConfig::ou(),
            "grid" => {
                let (grid, scheme) = self.grid()?;
                PicardConfig::grid_with_scheme(grid, scheme)
            }
            other => {
                return Err(Error::Unsupported(format!("the semilinear solver has no `{other}` backend")));
            }
        };
        if let Some(p) = self.sc.doc.run.picard {
            if let Some(tol) = p.tol {
                cfg = cfg.with_tol(tol);
            }
            if let Some(dt) = p.dt {
                cfg = cfg.with_dt(dt);
            }
            if let Some(slab) = p.slab {
                cfg = cfg.with_slab(slab);
            }
            if let Some(omega) = p.omega {
                cfg = cfg.with_omega(omega);
            }
            if let Some(n) = p.max_iters {
                cfg.max_iters = n;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn cases(&self) -> RandomCases {
        RandomCases {
            n: self.sc.doc.run.cases.unwrap_or(20),
            seed: self.seed,
            ..RandomCases::default()
        }
    }

    fn horizon(&self) -> f64 {
        let (s, tau) = self.window();
        self.sc.doc.run.horizon.unwrap_or(tau - s)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        write_file(&self.dir.join(name), contents)
    }
}

fn validate(ctx: &Ctx) -> Result<RunOutcome> {
    let spec = &ctx.sc.spec;
    let plan = SamplePlan::for_spec(spec);
    let base = check_base_hypotheses(spec, &plan);
    let mut doc = base.to_markdown();
    let mut pass = base.all_pass();
    let term = &spec.nonlinearity;
    let mut requested = Vec::new();
    if spec.lyapunov.growth_consts.is_some() {
        requested.push(GrowthClause::Growth);
    }
    for (clause, present) in [
        (GrowthClause::Dissipative, term.psi0.is_some()),
        (GrowthClause::OneSided, term.growth_k.is_some()),
        (GrowthClause::LinearGrowth, term.linear_growth_h.is_some()),
        (GrowthClause::Lipschitz, term.lipschitz_l.is_some()),
    ] {
        if present {
            requested.push(clause);
        }
    }
    if !requested.is_empty() {
        let growth = check_growth_and_dissipativity(spec, &plan, &requested)?;
        pass &= growth.all_pass();
        doc.push('\n');
        doc.push_str(&growth.to_markdown());
    }
    let file = ctx.write("hypotheses.md", &doc)?;
    let status = if pass { ExitStatus::Success } else { ExitStatus::NotApplicable };
    Ok(RunOutcome {
        status,
        files: vec![file],
        summary: format!("hypotheses {}", if pass { "hold on all samples" } else { "fail on some samples" }),
    })
}

fn csv_header(d: usize, lead: &str) -> String {
    let xs: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    format!("{lead},{},value\n", xs.join(","))
}

fn csv_point(x: &[f64]) -> String {
    x.iter().map(|v| format!("{v:.12e}")).collect::<Vec<_>>().join(",")
}

fn evolve_linear(ctx: &Ctx) -> Result<RunOutcome> {
    let spec = &ctx.sc.spec;
    let (s, _) = ctx.window();
    let points = ctx.out_points();
    let mut out = csv_header(spec.dim(), "datum,t");
    for f in &ctx.sc.initial {
        for t in ctx.out_times() {
            let values: Vec<f64> = match ctx.sc.backend() {
                "closed-form" => {
                    let rule = QuadratureRule::default_for(spec.dim())?;
                    let ou = spec.ou()?;
                    points
                        .iter()
                        .map(|x| apply_ou(ou, f.f.as_ref(), x, s, t, &rule))
                        .collect::<Result<_>>()?
                }
                "grid" => {
                    let (grid, scheme) = ctx.grid()?;
                    let run = propagate_linear(spec, f.f.as_ref(), s, t, &grid, &scheme)?;
                    points.iter().map(|x| run.field.interpolate(x)).collect::<Result<_>>()?
                }
                _ => {
                    let sde = ctx.sde();
                    points
                        .iter()
                        .map(|x| estimate_propagator(spec, f.f.as_ref(), x, s, t, &sde).map(|(m, _)| m))
                        .collect::<Result<_>>()?
                }
            };
            for (x, v) in points.iter().zip(values) {
                out.push_str(&format!("{},{t:.12e},{},{v:.12e}\n", f.name, csv_point(x)));
            }
        }
    }
    let file = ctx.write("evolve_linear.csv", &out)?;
    Ok(RunOutcome {
        status: ExitStatus::Success,
        files: vec![file],
        summary: format!("{} data × {} times on the {} backend", ctx.sc.initial.len(), ctx.out_times().len(), ctx.sc.backend()),
    })
}

fn solve(ctx: &Ctx) -> Result<RunOutcome> {
    let spec = &ctx.sc.spec;
    let (s, tau) = ctx.window();
    let cfg = ctx.picard()?;
    let f = &ctx.sc.initial[0];
    let sol = picard_solve(spec, f.f.as_ref(), s, tau, &cfg)?;
    let csv = sol.to_csv(&ctx.out_points())?;
    let mut md = format!(
        "# Mild solution: {}\n\nDatum: `{}`\n\nStatus: {}\n\nReached t = {:.12e} over {} slabs, max contraction ratio {:.6}\n",
        spec.name,
        f.name,
        sol.status,
        sol.final_time(),
        sol.slabs.len(),
        sol.max_contraction_ratio()
    );
    if let Some((a, b)) = sol.blowup_bracket {
        md.push_str(&format!("\nBlow-up bracket: [{a:.12e}, {b:.12e}]\n"));
    }
    for c in &sol.apriori {
        md.push_str(&format!(
            "\nA-priori bound ({}): {} worst excess {:.6e} ({})\n",
            c.route,
            c.formula,
            c.worst_excess,
            if c.holds { "holds" } else { "violated" }
        ));
    }
    for n in &sol.notes {
        md.push_str(&format!("\nNote: {n}\n"));
    }
    let files = vec![ctx.write("solution.csv", &csv)?, ctx.write("solution.md", &md)?];
    Ok(RunOutcome {
        status: ExitStatus::Success,
        files,
        summary: format!("{} at t = {:.6}", sol.status, sol.final_time()),
    })
}

fn measures(ctx: &Ctx) -> Result<RunOutcome> {
    let spec = &ctx.sc.spec;
    let ou = spec.ou()?;
    let d = spec.dim();
    let (s, tau) = ctx.window();
    let k = ctx.sc.doc.run.times.unwrap_or(4).max(1);
    let mut head = vec!["t".to_string()];
    head.extend((1..=d).map(|i| format!("mean{i}")));
    for i in 1..=d {
        for j in 1..=d {
            head.push(format!("cov{i}{j}"));
        }
    }
    let mut out = head.join(",") + "\n";
    for i in 0..=k {
        let t = s + (tau - s) * i as f64 / k as f64;
        let mu = ou_evolution_measure(ou, t, ctx.sc.doc.run.horizon.unwrap_or(DEFAULT_HORIZON), 1e-12)?;
        let mut row = vec![format!("{t:.12e}")];
        row.extend(mu.mean.iter().map(|v| format!("{v:.12e}")));
        row.extend(mu.cov.transpose().iter().map(|v| format!("{v:.12e}")));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let file = ctx.write("measures.csv", &out)?;
    Ok(RunOutcome {
        status: ExitStatus::Success,
        files: vec![file],
        summary: format!("{} evolution measures", k + 1),
    })
}

fn linear_backend(ctx: &Ctx) -> Result<LinearBackend> {
    match ctx.sc.backend() {
        "closed-form" => Ok(LinearBackend::closed_form()),
        "grid" => {
            let (grid, scheme) = ctx.grid()?;
            Ok(LinearBackend::Grid { grid, scheme })
        }
        other => Err(Error::Unsupported(format!("the linear suites have no `{other}` backend"))),
    }
}

fn run_suite(ctx: &Ctx, suite: &str) -> Result<Vec<EstimateReport>> {
    let spec = &ctx.sc.spec;
    let fs = &ctx.sc.initial;
    match suite {
        "linear" => verify_linear_estimates(spec, &linear_backend(ctx)?, &ctx.cases()),
        "backend-agreement" => {
            let (grid, scheme) = ctx.grid()?;
            backend_agreement(spec, fs, &ctx.cases(), &grid, &scheme, &ctx.sde())
        }
        "measure-derivative" => {
            let (s, tau) = ctx.window();
            let times: Vec<f64> = (0..5).map(|k| s + (tau - s) * k as f64 / 4.0).collect();
            Ok(vec![verify_measure_derivative(spec, &bump_family(spec.dim()), &times, 1e-3)?])
        }
        "sup-stability" => verify_sup_stability(spec, fs, ctx.horizon(), &ctx.picard()?, ctx.seed),
        "lp-stability" => {
            let ps = ctx.sc.doc.run.lp_exponents.clone().unwrap_or_else(|| vec![1.5, 2.0, 4.0]);
            verify_lp_stability(spec, fs, &ps, ctx.horizon(), &ctx.picard()?)
        }
        "hypercontractivity" => {
            let evo = if spec.nonlinearity.label == "0" {
                Evolution::Linear
            } else {
                Evolution::Semilinear(ctx.picard()?)
            };
            verify_hypercontractivity(
                spec,
                fs,
                ctx.sc.doc.run.hyper_p.unwrap_or(2.0),
                ctx.horizon(),
                ctx.sc.doc.run.lsi_k,
                &evo,
            )
        }
        other => Err(Error::InvalidInput(format!("unknown suite `{other}`"))),
    }
}

fn finish_reports(ctx: &Ctx, reports: Vec<EstimateReport>) -> Result<RunOutcome> {
    let files = emit_report(&reports, &ctx.formats, &ctx.dir)?;
    let status = ExitStatus::from_reports(&reports);
    let tally = |v: Verdict| reports.iter().filter(|r| r.verdict == v).count();
    Ok(RunOutcome {
        status,
        files,
        summary: format!(
            "{} reports: {} pass, {} fail, {} not applicable",
            reports.len(),
            tally(Verdict::Pass),
            tally(Verdict::Fail),
            tally(Verdict::NotApplicable)
        ),
    })
}

fn verify(ctx: &Ctx) -> Result<RunOutcome> {
    let suites = ctx.sc.doc.run.suites.clone().unwrap_or_else(|| vec!["linear".into()]);
    let mut reports = Vec::new();
    for suite in &suites {
        reports.extend(run_suite(ctx, suite).map_err(|e| e.context(format!("suite `{suite}`")))?);
    }
    finish_reports(ctx, reports)
}

fn oracle_compare(ctx: &Ctx) -> Result<RunOutcome> {
    let reports = run_suite(ctx, "backend-agreement")?;
    finish_reports(ctx, reports)
}
