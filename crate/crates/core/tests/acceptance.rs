//! Acceptance criteria. Each test prints one `criterion N ...: PASS|FAIL` line
//! and then asserts. Tests hold a shared lock so the wall-clock budgets are
//! measured one criterion at a time.

use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use parabolica::grid::{Grid, SchemeConfig};
use parabolica::mc::SDEConfig;
use parabolica::ou::GaussianMeasure;
use parabolica::problem::{builtin, check_base_hypotheses, heat1d, ou1d, polycoef, SamplePlan, SemilinearTerm};
use parabolica::semilinear::{continue_solution, picard_solve, InitialIterate, PicardConfig, Status};
use parabolica::verify::{
    backend_agreement, bump_family, continuous_dependence_report, gradient_scaling_report, invariance_report,
    lsi_probe, sup_decay_report, verify_hypercontractivity, verify_linear_estimates, verify_lp_stability,
    linear_nested_order, verify_measure_derivative, EstimateReport, Evolution, LinearBackend, RandomCases,
    TestFunction, Verdict,
};

static SERIAL: Mutex<()> = Mutex::new(());

fn criterion(n: u32, name: &str, budget_s: u64, body: impl FnOnce() -> (bool, String)) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (ok, detail) = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= Duration::from_secs(budget_s);
    let pass = ok && in_time;
    println!(
        "criterion {n:>2} {name}: {} ({detail}; {:.1}s of {budget_s}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
    assert!(in_time, "criterion {n} ({name}) exceeded {budget_s}s: {:.1}s", elapsed.as_secs_f64());
}

fn named(names: &[&str]) -> Vec<TestFunction> {
    names.iter().map(|n| TestFunction::named(n).unwrap()).collect()
}

fn summary(reports: &[EstimateReport]) -> String {
    reports
        .iter()
        .map(|r| format!("{}={} worst {:.2e}", r.name, r.verdict, r.worst_margin()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn all_pass(reports: &[EstimateReport]) -> bool {
    !reports.is_empty() && reports.iter().all(|r| r.verdict == Verdict::Pass && r.recomputed_verdict() == r.verdict)
}

fn with_psi(term: SemilinearTerm) -> parabolica::ProblemSpec {
    ou1d().with_nonlinearity(term)
}

#[test]
fn criterion_01_backend_agreement() {
    criterion(1, "backend agreement (OU)", 120, || {
        let spec = ou1d();
        let grid = Grid::new(1, 10.0, 401).unwrap();
        let scheme = SchemeConfig::for_grid(&grid);
        let sde = SDEConfig::new(1e-3, 100_000, 2024);
        let cases = RandomCases::default();
        assert_eq!((cases.n, cases.gap), (20, (0.1, 2.0)));
        let reports = backend_agreement(&spec, &named(&["x", "x2", "cos", "tanh"]), &cases, &grid, &scheme, &sde).unwrap();
        let tol_ok = reports.iter().any(|r| r.name == "agreement/grid" && r.tolerance == 5e-3)
            && reports.iter().any(|r| r.name == "agreement/mc");
        (tol_ok && all_pass(&reports), summary(&reports))
    });
}

#[test]
fn criterion_02_markov_contraction() {
    criterion(2, "Markov and sup-norm contraction", 30, || {
        let spec = ou1d();
        let cases = RandomCases::default();
        let grid = Grid::new(1, 10.0, 401).unwrap();
        let mut reports = Vec::new();
        for backend in [LinearBackend::closed_form(), LinearBackend::grid(grid)] {
            let want = if matches!(backend, LinearBackend::ClosedForm { .. }) { 1e-9 } else { 5e-3 };
            let bundle = verify_linear_estimates(&spec, &backend, &cases).unwrap();
            for r in bundle {
                if r.name.starts_with("markov") {
                    assert_eq!(r.tolerance, want, "{}", r.name);
                    reports.push(r);
                } else if r.name.starts_with("contraction") {
                    reports.push(r);
                }
            }
        }
        (reports.len() == 8 && all_pass(&reports), summary(&reports))
    });
}

#[test]
fn criterion_03_invariance() {
    criterion(3, "evolution-measure invariance", 30, || {
        let fam = named(&["one", "x", "x2", "gauss", "cos"]);
        let reports: Vec<EstimateReport> = ["ou1d", "ou_timedep"]
            .iter()
            .map(|n| {
                let spec = builtin(n).unwrap();
                invariance_report(&spec, &fam, &RandomCases::default(), linear_nested_order(&spec)).unwrap()
            })
            .collect();
        let tol_ok = reports.iter().all(|r| r.tolerance == 1e-7);
        (tol_ok && all_pass(&reports), summary(&reports))
    });
}

#[test]
fn criterion_04_gradient_scaling() {
    criterion(4, "gradient scaling exponent", 120, || {
        let ks: Vec<u32> = (3..=9).collect();
        let r = gradient_scaling_report(
            &ou1d(),
            &LinearBackend::closed_form(),
            &TestFunction::named("steep_tanh").unwrap(),
            &ks,
        )
        .unwrap();
        let exponent = r.envelopes.iter().find(|(k, _)| k == "fitted_exponent").map(|e| e.1).unwrap();
        let ok = (-0.6..=-0.4).contains(&exponent) && r.verdict == Verdict::Pass;
        (ok, format!("fitted exponent {exponent:.4}"))
    });
}

#[test]
fn criterion_05_picard_machinery() {
    criterion(5, "Picard contraction, uniqueness, continuous dependence", 180, || {
        let mut detail = Vec::new();
        let mut ok = true;
        let cfg = PicardConfig::ou();
        let f = |x: &[f64]| x[0].tanh();
        for term in [
            SemilinearTerm::new("sin u", |_, u| u.sin()),
            SemilinearTerm::new("-u-u^3", |_, u| -u - u * u * u),
            SemilinearTerm::new("u-u^3", |_, u| u - u * u * u),
        ] {
            let label = term.label.clone();
            let spec = with_psi(term);
            let sol = continue_solution(&spec, &f, 0.0, 2.0, &cfg).unwrap();
            let omega_ok = sol.slabs.iter().all(|s| (s.omega - 2.0 * s.lipschitz).abs() <= 1e-12 * (1.0 + s.omega));
            let ratio = sol.max_contraction_ratio();
            ok &= sol.status == Status::Completed && omega_ok && ratio <= 0.55;

            let zero = picard_solve(&spec, &f, 0.0, 2.0, &cfg.clone().with_initial(InitialIterate::Zero)).unwrap();
            let lin = picard_solve(&spec, &f, 0.0, 2.0, &cfg).unwrap();
            let gap = (0..lin.len().min(zero.len()))
                .map(|k| lin.level(k).iter().zip(zero.level(k)).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
                .fold(0.0f64, f64::max);
            ok &= lin.len() == zero.len() && gap <= 2.0 * cfg.tol;
            detail.push(format!("{label}: ratio {ratio:.3}, iterate gap {gap:.1e}"));
        }
        let spec = with_psi(SemilinearTerm::new("sin u", |_, u| u.sin()).with_lipschitz(1.0));
        let r = continuous_dependence_report(&spec, 10, 11, &cfg).unwrap();
        ok &= r.cases.len() >= 10 && r.verdict == Verdict::Pass && r.tolerance == 5e-3;
        detail.push(format!("dependence worst {:.2e}", r.worst_margin()));
        (ok, detail.join("; "))
    });
}

#[test]
fn criterion_06_ode_reduction() {
    criterion(6, "ODE reduction and blow-up bracket", 60, || {
        let c = 0.5f64;
        type Exact = fn(f64, f64) -> f64;
        let cases: [(&str, fn(f64, f64) -> f64, Exact); 5] = [
            ("-u", |_, u| -u, |c, t| c * (-t).exp()),
            ("-u^3", |_, u| -u * u * u, |c, t| c / (1.0 + 2.0 * c * c * t).sqrt()),
            ("u^2", |_, u| u * u, |c, t| c / (1.0 - c * t)),
            ("sin u", |_, u| u.sin(), |c, t| 2.0 * ((c / 2.0).tan() * t.exp()).atan()),
            ("u-u^3", |_, u| u - u * u * u, |c, t| {
                c * t.exp() / (1.0 + c * c * ((2.0 * t).exp() - 1.0)).sqrt()
            }),
        ];
        let mut ok = true;
        let mut detail = Vec::new();
        for (label, psi, exact) in cases {
            let spec = with_psi(SemilinearTerm::new(label, psi));
            let sol = continue_solution(&spec, &move |_| c, 0.0, 1.0, &PicardConfig::ou()).unwrap();
            let mut worst = 0.0f64;
            for (k, &t) in sol.times().iter().enumerate() {
                for x in [-2.0, 0.0, 1.3] {
                    worst = worst.max((sol.eval(k, &[x]).unwrap() - exact(c, t)).abs());
                }
            }
            ok &= sol.status == Status::Completed && worst <= 1e-6;
            detail.push(format!("{label} {worst:.1e}"));
        }
        let spec = with_psi(SemilinearTerm::new("u^2", |_, u| u * u));
        let sol = continue_solution(&spec, &|_| 1.0, 0.0, 2.0, &PicardConfig::ou()).unwrap();
        match sol.blowup_bracket {
            Some((a, b)) => {
                ok &= sol.status == Status::BlowupDetected && a <= 1.0 && 1.0 <= b && b - a <= 0.02;
                detail.push(format!("bracket [{a:.4}, {b:.4}]"));
            }
            None => {
                ok = false;
                detail.push(format!("no bracket, status {}", sol.status));
            }
        }
        (ok, detail.join(", "))
    });
}

#[test]
fn criterion_07_sup_decay() {
    criterion(7, "sup-norm decay", 120, || {
        let f = TestFunction::named("tanh").unwrap();
        let cfg = PicardConfig::ou();
        let reports: Vec<EstimateReport> = [
            SemilinearTerm::new("-u-u^3", |_, u| -u - u * u * u).with_psi0(-1.0),
            SemilinearTerm::new("-u^3", |_, u| -u * u * u).with_psi0(0.0),
        ]
        .into_iter()
        .map(|term| sup_decay_report(&with_psi(term).with_window(0.0, 3.0).unwrap(), &f, 3.0, &cfg).unwrap())
        .collect();
        let tol_ok = reports.iter().all(|r| r.tolerance == 5e-3);
        (tol_ok && all_pass(&reports), summary(&reports))
    });
}

#[test]
fn criterion_08_lp_decay() {
    criterion(8, "L^p decay and contraction", 120, || {
        let fs = named(&["tanh", "cos"]);
        let cfg = PicardConfig::ou();
        let mut reports = Vec::new();
        for term in [SemilinearTerm::zero(), SemilinearTerm::new("-u^3", |_, u| -u * u * u).with_psi0(0.0)] {
            let spec = with_psi(term).with_window(0.0, 2.0).unwrap();
            reports.extend(verify_lp_stability(&spec, &fs, &[1.5, 2.0, 4.0], 2.0, &cfg).unwrap());
        }
        (all_pass(&reports), summary(&reports))
    });
}

#[test]
fn criterion_09_hypercontractivity() {
    criterion(9, "LSI probe and hypercontractivity", 180, || {
        let probe = lsi_probe(&GaussianMeasure::standard(1)).unwrap();
        let k_ok = (0.45..=0.55).contains(&probe.k_lower);
        let f = TestFunction::new("exp(min(x,8)/2)", f64::INFINITY, |x| (x[0].min(8.0) / 2.0).exp());
        let spec = ou1d().with_window(0.0, 1.5).unwrap();
        let reports = verify_hypercontractivity(&spec, &[f], 2.0, 1.5, None, &Evolution::Linear).unwrap();
        let slack_ok = reports.iter().all(|r| r.name != "hypercontractivity" || r.tolerance > 0.0);
        (
            k_ok && slack_ok && all_pass(&reports),
            format!("K_lower {:.5}; {}", probe.k_lower, summary(&reports)),
        )
    });
}

#[test]
fn criterion_10_measure_derivative() {
    criterion(10, "measure-derivative identity", 30, || {
        let reports: Vec<EstimateReport> = ["ou1d", "ou_timedep"]
            .iter()
            .map(|n| {
                let spec = builtin(n).unwrap();
                verify_measure_derivative(&spec, &bump_family(1), &[0.0, 0.5, 1.0, 2.0], 1e-3).unwrap()
            })
            .collect();
        let tol_ok = reports.iter().all(|r| r.tolerance == 1e-5);
        (tol_ok && all_pass(&reports), summary(&reports))
    });
}

#[test]
fn criterion_11_hypothesis_validators() {
    criterion(11, "hypothesis validators", 10, || {
        let ou = ou1d();
        let rep = check_base_hypotheses(&ou, &SamplePlan::for_spec(&ou));
        // Gradient clauses use central differences; their slack is only
        // meaningful up to the checker's rounding allowance.
        let ou_ok = rep.all_pass() && rep.clause("lyapunov_drift").unwrap().worst_slack >= 0.0;

        let heat = heat1d();
        let rep = check_base_hypotheses(&heat, &SamplePlan::for_spec(&heat));
        let drift = rep.clause("lyapunov_drift").unwrap();
        let heat_ok = !drift.pass && drift.worst_slack < 0.0 && drift.witness.len() == 1;

        let poly = polycoef(0.0, 1.0, 1.0, 1).unwrap();
        let rep = check_base_hypotheses(&poly, &SamplePlan::for_spec(&poly));
        let poly_ok = rep.all_pass();
        (
            ou_ok && heat_ok && poly_ok,
            format!(
                "ou1d all pass: {ou_ok}; heat witness x = {:?}, slack {:.3e}; polycoef(l=0,m=1) pass: {poly_ok}",
                drift.witness, drift.worst_slack
            ),
        )
    });
}

#[test]
fn criterion_12_cli_determinism() {
    criterion(12, "CLI determinism", 60, || {
        let dir = tempfile::tempdir().unwrap();
        let scenario = dir.path().join("scenario.toml");
        std::fs::write(
            &scenario,
            r#"problem = "ou1d"

[run]
command = "verify"
suites = ["linear", "backend-agreement"]
initial = ["cos", "tanh"]
cases = 5

[run.mc]
paths = 4000
"#,
        )
        .unwrap();
        let run = |tag: &str| {
            let out = dir.path().join(tag);
            let status = Command::new(env!("CARGO_BIN_EXE_parabolica"))
                .args(["verify", "--scenario"])
                .arg(&scenario)
                .arg("--out")
                .arg(&out)
                .args(["--seed", "42"])
                .status()
                .unwrap();
            (status.code(), std::fs::read(out.join("reports.csv")).unwrap())
        };
        let (c1, a) = run("a");
        let (c2, b) = run("b");
        let ok = c1 == Some(0) && c2 == Some(0) && a == b && !a.is_empty();
        (ok, format!("exit codes {c1:?}/{c2:?}, {} bytes, identical: {}", a.len(), a == b))
    });
}
