use proptest::prelude::*;

use parabolica::cli::expr::{Expr, Node, Scope};
use parabolica::cli::{compile, parse_scenario, ScenarioDoc};
use parabolica::problem::{builtin, ou1d, SemilinearTerm};
use parabolica::quadrature::QuadratureRule;
use parabolica::semilinear::PicardConfig;
use parabolica::verify::{
    contraction_report, exponent_schedule, gradient_scaling_report, invariance_report, linear_nested_order,
    reports_to_csv, sup_decay_report, verify_lp_stability, Case, EstimateReport, LinearBackend, RandomCases,
    SpaceTimeMeasure, TestFunction, Verdict, CSV_HEADER,
};

fn report_from(margins: &[(f64, f64)], tol: f64) -> EstimateReport {
    let mut r = EstimateReport::new("prop", "lhs ≤ rhs", tol, "synthetic");
    for (k, (lhs, rhs)) in margins.iter().enumerate() {
        r.push(Case::new(format!("c{k}"), "", *lhs, *rhs));
    }
    r.finish()
}

proptest! {
    #[test]
    fn verdict_is_recomputable(
        cases in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..20),
        tol in 0.0f64..1.0,
    ) {
        let r = report_from(&cases, tol);
        let worst = cases.iter().map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(r.verdict, r.recomputed_verdict());
        prop_assert_eq!(r.verdict == Verdict::Pass, worst <= tol);
        prop_assert_eq!(r.worst_margin(), worst);
    }

    #[test]
    fn nan_case_fails(lhs in -1.0f64..1.0) {
        let r = report_from(&[(lhs, -1.0), (f64::NAN, 0.0)], 1e3);
        prop_assert_eq!(r.verdict, Verdict::Fail);
    }

    #[test]
    fn exponent_schedule_is_increasing(
        p in 1.01f64..8.0,
        eta0 in 0.1f64..4.0,
        k in 0.1f64..4.0,
        s in -3.0f64..3.0,
        dt in 1e-3f64..2.0,
    ) {
        prop_assert_eq!(exponent_schedule(p, eta0, k, s, s), p);
        let a = exponent_schedule(p, eta0, k, s, s + dt);
        let b = exponent_schedule(p, eta0, k, s, s + 2.0 * dt);
        prop_assert!(p < a && a < b);
    }

    #[test]
    fn space_time_mass(s in -2.0f64..2.0, len in 0.1f64..3.0, panels in 1usize..6) {
        let spec = builtin("ou_timedep").unwrap();
        let nu = SpaceTimeMeasure::new(&spec, s, s + len, panels).unwrap();
        let mass = nu.total_mass(&QuadratureRule::default_for(1).unwrap()).unwrap();
        prop_assert!((mass / len - 1.0).abs() <= 1e-8, "mass {} for length {}", mass, len);
    }

    #[test]
    fn expressions_survive_printing(node in arb_node(3)) {
        let printed = node.to_string();
        let reparsed = Expr::parse(&printed, Scope::field(2)).unwrap();
        for (t, x) in [(0.3, [0.2, -0.7]), (1.1, [1.5, 0.4])] {
            let a = node.eval(t, &x, 0.0);
            let b = reparsed.eval(t, &x, 0.0);
            prop_assert!(a == b || (a.is_nan() && b.is_nan()), "{}: {} vs {}", printed, a, b);
        }
    }

    #[test]
    fn run_documents_round_trip(
        seed in prop::option::of(0u64..1000),
        cases in prop::option::of(1usize..50),
        horizon in prop::option::of(0.1f64..5.0),
        ps in prop::option::of(prop::collection::vec(1.1f64..6.0, 1..4)),
        backend in prop::option::of(prop::sample::select(vec!["closed-form", "grid", "mc"])),
    ) {
        let mut doc: ScenarioDoc = toml::from_str("problem = \"ou1d\"").unwrap();
        doc.run.seed = seed;
        doc.run.cases = cases;
        doc.run.horizon = horizon;
        doc.run.lp_exponents = ps;
        doc.run.backend = backend.map(String::from);
        let sc = compile(doc).unwrap();
        let again = parse_scenario(&sc.to_toml().unwrap()).unwrap();
        prop_assert_eq!(sc, again);
    }
}

fn arb_node(depth: u32) -> impl Strategy<Value = Node> {
    use parabolica::cli::expr::{Func, Var};
    let leaf = prop_oneof![
        (0.0f64..5.0).prop_map(|c| Node::Num((c * 8.0).round() / 8.0)),
        Just(Node::Var(Var::T)),
        Just(Node::Var(Var::X(0))),
        Just(Node::Var(Var::X(1))),
    ];
    leaf.prop_recursive(depth, 24, 2, |inner| {
        let b = |n: Node| Box::new(n);
        prop_oneof![
            inner.clone().prop_map(move |a| Node::Neg(b(a))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Node::Add(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Node::Sub(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Node::Mul(b(x), b(y))),
            (inner.clone(), inner.clone()).prop_map(move |(x, y)| Node::Div(b(x), b(y))),
            (inner.clone(), 0u32..4).prop_map(move |(x, k)| Node::Pow(b(x), b(Node::Num(k as f64)))),
            (inner, prop::sample::select(vec![Func::Exp, Func::Sin, Func::Cos, Func::Tanh]))
                .prop_map(move |(x, f)| Node::Call(f, b(x))),
        ]
    })
}

/// Hand-written scenarios plus generated built-in/command combinations.
fn corpus() -> Vec<String> {
    let mut v = vec![
        "problem = \"ou1d\"\n".to_string(),
        "problem = \"ou_timedep\"\n[run]\ncommand = \"measures\"\nwindow = [0.0, 6.0]\ntimes = 8\n".into(),
        "[problem]\nbase = \"ou1d\"\npsi = \"-u - u^3\"\npsi0 = -1.0\n[run]\ncommand = \"verify\"\nsuites = [\"sup-stability\"]\n".into(),
        "[problem]\nbase = \"ou1d\"\npsi = \"u^2\"\n[run]\ncommand = \"solve\"\nwindow = [0.0, 2.0]\ninitial = [\"1\"]\n".into(),
        "[problem]\nbase = \"polycoef\"\n[problem.params]\nl = 0.0\nm = 1.0\nr = 1.0\n".into(),
        "[problem]\nbase = \"polycoef\"\n[problem.params]\nl = 0.5\nm = 2.0\nr = 1.0\nd = 2\n".into(),
        "[problem]\ndim = 1\nq = [\"1\"]\nb = [\"-x1*(1 + x1^2)\"]\neta0 = 1.0\n[problem.lyapunov]\nphi = \"1 + x1^2\"\na = 3.004\nc = 1.0\n".into(),
        "[problem]\nname = \"ou2\"\ndim = 2\neta0 = 0.5\n[problem.ou]\nq = [\"1\", \"0\", \"0\", \"1 + 0.5*sin(t)\"]\nB = [\"-1\", \"0.3\", \"-0.3\", \"-2\"]\nf = [\"cos(t)\", \"0\"]\n[problem.lyapunov]\nphi = \"1 + x1^2 + x2^2\"\na = 12.0\nc = 1.0\ngrowth = [2.0, 3.0, 1.0]\n".into(),
        "[problem]\ndim = 2\neta0 = 0.5\nq = [\"1 + 0.5*tanh(x1)^2\", \"0\", \"0\", \"1\"]\nb = [\"-x1\", \"-x2^3 - x2\"]\nsmooth_bounds = [0.0, -1.0]\nlower = -1.0\n[problem.lyapunov]\nphi = \"1 + x1^2 + x2^2\"\na = 10.0\nc = 1.0\n".into(),
        "[problem]\nbase = \"ou1d\"\npsi = \"sin(u)\"\nlipschitz = 1.0\nlinear_growth_h = 1.0\n[run]\ncommand = \"solve\"\n[run.picard]\ntol = 1e-9\ndt = 0.002\nslab = 0.5\n".into(),
        "problem = \"heat1d\"\n[run]\ncommand = \"validate\"\n".into(),
        "problem = \"ou1d\"\n[run]\ncommand = \"oracle-compare\"\ninitial = [\"x\", \"x2\", \"cos\", \"tanh\"]\n[run.mc]\npaths = 5000\ndt = 0.001\n[run.grid]\nradius = 10.0\npoints = 401\n".into(),
        "problem = \"ou1d\"\n[run]\ncommand = \"verify\"\nsuites = [\"hypercontractivity\"]\nhyper_p = 2.0\nlsi_k = 0.55\nhorizon = 1.5\n[output]\ndir = \"hc\"\nformats = [\"csv\"]\n".into(),
        "problem = \"ou1d\"\n[run]\ncommand = \"evolve-linear\"\nbackend = \"grid\"\npoints = 21\nextent = 2.5\ninitial = [\"exp(-x1^2)\", \"tanh(5*x1)\"]\n[run.grid]\ntheta = 1.0\ndt = 0.01\n".into(),
    ];
    for base in ["ou1d", "ou_timedep", "heat1d", "polycoef"] {
        for command in ["validate", "evolve-linear", "verify"] {
            v.push(format!("problem = \"{base}\"\n[run]\ncommand = \"{command}\"\nseed = 3\n"));
        }
    }
    v
}

#[test]
fn scenario_corpus_round_trips() {
    let corpus = corpus();
    assert!(corpus.len() >= 20);
    for text in &corpus {
        let sc = parse_scenario(text).unwrap_or_else(|e| panic!("{text}\n{e}"));
        let printed = sc.to_toml().unwrap();
        let again = parse_scenario(&printed).unwrap_or_else(|e| panic!("{printed}\n{e}"));
        assert_eq!(sc, again, "{printed}");
    }
}

#[test]
fn csv_is_sorted_by_suite() {
    let a = report_from(&[(0.0, 1.0)], 0.0);
    let mut b = EstimateReport::new("alpha", "x", 0.0, "p");
    b.push(Case::new("z", "", 0.0, 0.0));
    let b = b.finish();
    let csv = reports_to_csv(&[a, b]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert!(lines[1].starts_with("alpha,"));
    assert!(lines[2].starts_with("prop,"));
}

fn assert_scaled(r1: &EstimateReport, r2: &EstimateReport, lambda: f64) {
    assert_eq!(r1.verdict, r2.verdict, "{}", r1.name);
    assert_eq!(r1.cases.len(), r2.cases.len());
    for (a, b) in r1.cases.iter().zip(&r2.cases) {
        for (x, y) in [(a.lhs, b.lhs), (a.rhs, b.rhs)] {
            assert!((y - lambda * x).abs() <= 1e-9 * (1.0 + (lambda * x).abs()), "{}/{}: {x} vs {y}", r1.name, a.id);
        }
    }
}

#[test]
fn linear_estimates_scale_with_data() {
    let spec = ou1d();
    let cases = RandomCases {
        n: 6,
        ..RandomCases::default()
    };
    let cos = TestFunction::named("cos").unwrap();
    let closed = LinearBackend::closed_form();
    for lambda in [0.1, 10.0] {
        let r1 = contraction_report(&spec, &closed, &cos, &cases).unwrap();
        let r2 = contraction_report(&spec, &closed, &cos.scaled(lambda), &cases).unwrap();
        assert_scaled(&r1, &r2, lambda);

        let fam = vec![TestFunction::named("gauss").unwrap()];
        let scaled: Vec<TestFunction> = fam.iter().map(|f| f.scaled(lambda)).collect();
        let order = linear_nested_order(&spec);
        let i1 = invariance_report(&spec, &fam, &cases, order).unwrap();
        let i2 = invariance_report(&spec, &scaled, &cases, order).unwrap();
        assert_eq!(i1.verdict, i2.verdict);
        for (a, b) in i1.cases.iter().zip(&i2.cases) {
            assert!(b.lhs <= lambda * a.lhs + 1e-12 * lambda);
        }

        let steep = TestFunction::named("steep_tanh").unwrap();
        let g1 = gradient_scaling_report(&spec, &closed, &steep, &[3, 5, 7]).unwrap();
        let g2 = gradient_scaling_report(&spec, &closed, &steep.scaled(lambda), &[3, 5, 7]).unwrap();
        assert_eq!(g1.verdict, g2.verdict);
        let exp = |r: &EstimateReport| r.envelopes.iter().find(|e| e.0 == "fitted_exponent").unwrap().1;
        assert!((exp(&g1) - exp(&g2)).abs() < 1e-9);
    }
}

#[test]
fn stability_estimates_scale_with_linear_data() {
    let cfg = PicardConfig::ou();
    let damped = ou1d()
        .with_nonlinearity(SemilinearTerm::new("-u", |_, u| -u).with_psi0(-1.0))
        .with_window(0.0, 1.0)
        .unwrap();
    let tanh = TestFunction::named("tanh").unwrap();
    let free = ou1d().with_window(0.0, 1.0).unwrap();
    for lambda in [0.1, 10.0] {
        let r1 = sup_decay_report(&damped, &tanh, 1.0, &cfg).unwrap();
        let r2 = sup_decay_report(&damped, &tanh.scaled(lambda), 1.0, &cfg).unwrap();
        assert_eq!(r1.verdict, r2.verdict);
        let b1 = verify_lp_stability(&free, &[tanh.clone()], &[2.0], 1.0, &cfg).unwrap();
        let b2 = verify_lp_stability(&free, &[tanh.scaled(lambda)], &[2.0], 1.0, &cfg).unwrap();
        for (a, b) in b1.iter().zip(&b2) {
            assert_scaled(a, b, lambda);
        }
    }
}

#[test]
fn lp_suites_reject_p_at_most_one() {
    let spec = ou1d();
    let f = [TestFunction::named("tanh").unwrap()];
    assert!(verify_lp_stability(&spec, &f, &[1.0], 1.0, &PicardConfig::ou()).is_err());
}
