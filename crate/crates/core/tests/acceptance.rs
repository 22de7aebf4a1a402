//! Acceptance criteria. Each prints one PASS/FAIL line to the real stdout so
//! the verdicts show up even when test output is captured.

use std::f64::consts::PI;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use ivp_bounds::bspline::{build_bump_family, build_scaled_bump, phi_r_m, sign_pattern};
use ivp_bounds::harness::{
    fit_rate, run_adversary_pipeline, run_rate_experiment, AdversarySpec, RateSpec,
    ToleranceProfile,
};
use ivp_bounds::model::SmoothnessClass;
use ivp_bounds::quadrature::{integrate, KfoldOracle, OracleMode};
use ivp_bounds::reduction::{
    build_reduction_plan, exact_integrals, lower_bound_queries, recover_mean, solve_weights,
    verify_weight_identities, MeanInstance, Setting,
};
use ivp_bounds::solvers::SolverMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, passed: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let ok = passed && elapsed <= limit;
    let line = format!(
        "{} criterion {id} ({name}): {detail}; {:.2}s of {}s\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(ok, "{line}");
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

/// `U_n(t)` from `sin((n + 1) theta) / sin(theta)`, independent of the
/// polynomial coefficients used by the library.
fn chebyshev_u_trig(n: usize, t: f64) -> f64 {
    let theta = t.clamp(-1.0, 1.0).acos();
    ((n + 1) as f64 * theta).sin() / theta.sin()
}

#[test]
fn criterion_1_orthogonality_and_endpoints() {
    let start = Instant::now();
    let mut worst_moment: f64 = 0.0;
    let mut worst_quad_moment: f64 = 0.0;
    let mut worst_endpoint: f64 = 0.0;
    let mut worst_bound: f64 = 0.0;
    for r in 1..=8 {
        let pattern = sign_pattern(r).unwrap();
        // Zeros of U_{r+1} are cos(i pi / (r + 2)).
        let zeros: Vec<f64> = (1..=r + 1)
            .map(|i| (i as f64 * PI / (r + 2) as f64).cos())
            .collect();
        for p in 0..=r {
            worst_moment = worst_moment.max(pattern.moment(p).abs());
            let q = integrate(
                |t| t.powi(p as i32) * chebyshev_u_trig(r + 1, t).signum(),
                -1.0,
                1.0,
                1e-14,
                &zeros,
                2000,
            )
            .unwrap();
            worst_quad_moment = worst_quad_moment.max(q.value.abs());
        }
        let growing: Vec<f64> = (0..=r).map(|j| 1.5f64.powi(j as i32)).collect();
        let classes = [
            SmoothnessClass::unit(r, 0.0, 1.0).unwrap(),
            SmoothnessClass::new(r, growing, (0.0, 3.0)).unwrap(),
        ];
        for class in &classes {
            let mut bumps = Vec::new();
            for (c, d) in [(0.0, 1.0), (0.0, 0.5), (0.2, 0.7), (1.0, 1.01)] {
                bumps.push(build_scaled_bump(c, d, class).unwrap());
            }
            for n in [2, 4, 16] {
                let family = build_bump_family(class, n).unwrap();
                bumps.extend((0..n).map(|i| family.bump(i).clone()));
            }
            for bump in &bumps {
                worst_endpoint = worst_endpoint.max(bump.endpoint_residual(class));
                for j in 0..=r {
                    let sup = bump.body().nth_derivative(j).sup_abs();
                    worst_bound = worst_bound.max(sup / class.derivative_bounds()[j]);
                }
                assert!(bump.check_membership(class, 2001).passed);
            }
        }
    }
    let passed = worst_moment <= 1e-10
        && worst_quad_moment <= 1e-10
        && worst_endpoint <= 1e-9
        && worst_bound <= 1.0 + 1e-12;
    report(
        1,
        "orthogonality and endpoints",
        passed,
        start.elapsed(),
        Duration::from_secs(5),
        &format!(
            "max moment {worst_moment:.2e} (quadrature {worst_quad_moment:.2e}), endpoint {worst_endpoint:.2e}, max sup/D {worst_bound:.12}"
        ),
    );
}

#[test]
fn criterion_2_iterated_integral_constants() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for r in 1..=3 {
        let class = SmoothnessClass::unit(r, 0.0, 1.0).unwrap();
        for (c, d) in [(0.0, 1.0), (0.0, 0.5)] {
            let bump = build_scaled_bump(c, d, &class).unwrap();
            let oracle = KfoldOracle::new(1e-13)
                .mode(OracleMode::Nested)
                .breakpoints(bump.body().breakpoints());
            for m in 1..=3 {
                let closed =
                    (d - c).powi((r + m) as i32) * phi_r_m(r, m, bump.alpha()).unwrap().value;
                let quad = oracle.integrate(|x| bump.eval(x), c, d, m).unwrap();
                worst = worst.max(rel(closed, quad));
            }
        }
    }
    let class = SmoothnessClass::unit(1, 0.0, 1.0).unwrap();
    let alpha = build_scaled_bump(0.0, 1.0, &class).unwrap().alpha();
    let fixture = rel(phi_r_m(1, 1, alpha).unwrap().value, alpha / 16.0);
    report(
        2,
        "iterated-integral constants",
        worst <= 1e-7 && fixture <= 1e-14,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("max rel {worst:.2e}, phi_1^1 vs alpha/16 rel {fixture:.2e}"),
    );
}

#[test]
fn criterion_3_bump_family_integrals() {
    let start = Instant::now();
    let mut worst_nested: f64 = 0.0;
    let mut worst_kernel: f64 = 0.0;
    let mut worst_partial: f64 = 0.0;
    for r in 1..=2 {
        let class = SmoothnessClass::unit(r, 0.0, 1.0).unwrap();
        for n in [2, 4] {
            let family = build_bump_family(&class, n).unwrap();
            for k in 1..=3 {
                for i in 0..n {
                    let bp = family.bump(i).body().breakpoints().to_vec();
                    let nested = KfoldOracle::new(1e-12)
                        .mode(OracleMode::Nested)
                        .breakpoints(&bp);
                    let kernel = KfoldOracle::new(1e-13).breakpoints(&bp);
                    let closed = family.bump_kfold_integral(i, k).unwrap();
                    let f = |x: f64| family.eval(i, x);
                    worst_nested =
                        worst_nested.max(rel(closed, nested.integrate(f, 0.0, 1.0, k).unwrap()));
                    worst_kernel =
                        worst_kernel.max(rel(closed, kernel.integrate(f, 0.0, 1.0, k).unwrap()));
                    let (lo, hi) = (family.anchors()[i], family.anchors()[i + 1]);
                    for x in [0.5 * (lo + hi), hi + 0.3 * (1.0 - hi)] {
                        let want = kernel.integrate(f, 0.0, x, k).unwrap();
                        let got = family.bump_partial_kfold_integral(i, k, x).unwrap();
                        worst_partial = worst_partial.max((got - want).abs() / closed.abs());
                    }
                }
            }
        }
    }
    report(
        3,
        "bump family k-fold integrals",
        worst_nested <= 1e-6 && worst_kernel <= 1e-6 && worst_partial <= 1e-6,
        start.elapsed(),
        Duration::from_secs(30),
        &format!("max rel nested {worst_nested:.2e}, kernel {worst_kernel:.2e}, partial {worst_partial:.2e}"),
    );
}

#[test]
fn criterion_4_reduction_identities() {
    let start = Instant::now();
    let mut worst_weights: f64 = 0.0;
    let mut worst_roundtrip: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 1..=6 {
        for n in [2, 4, 8, 16] {
            let class = SmoothnessClass::unit(1, 0.0, 1.0).unwrap();
            let plan = build_reduction_plan(k, n, &class).unwrap();
            worst_weights = worst_weights.max(verify_weight_identities(&plan).relative());
            for _ in 0..100 {
                let lambdas: Vec<f64> = (0..k * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let inst = MeanInstance::new(lambdas).unwrap();
                let exact = exact_integrals(plan.shift(), &inst).unwrap();
                let est = recover_mean(&plan, &exact, 0.0).unwrap().estimate;
                // The mean of random signs can be near zero; measure against
                // the natural scale of the data as well.
                let scale = inst.mean().abs().max(inst.abs_mean());
                worst_roundtrip = worst_roundtrip.max((est - inst.mean()).abs() / scale);
            }
        }
    }
    let c1 = solve_weights(1).unwrap().weights;
    let c2 = solve_weights(2).unwrap().weights;
    let fixtures = c1 == vec![1.0] && (c2[0] + 4.0).abs() <= 1e-12 && (c2[1] - 4.0).abs() <= 1e-12;
    report(
        4,
        "reduction identities",
        worst_weights <= 1e-8 && worst_roundtrip <= 1e-8 && fixtures,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("max weight residual/sum|c| {worst_weights:.2e}, max roundtrip rel {worst_roundtrip:.2e}, fixtures {fixtures}"),
    );
}

fn slope(mode: SolverMode, r: usize, k: usize, trials: usize) -> f64 {
    let spec = RateSpec::new(mode, r, k, (4, 12), trials, 17);
    let table = run_rate_experiment(&spec).unwrap();
    fit_rate(&table, spec.fit_column()).unwrap().exponent
}

#[test]
fn criterion_5_deterministic_rate() {
    let start = Instant::now();
    let mut detail = Vec::new();
    let mut passed = true;
    for r in 1..=2 {
        for k in 1..=3 {
            let s = slope(SolverMode::Deterministic, r, k, 1);
            passed &= (s - r as f64).abs() <= 0.3;
            detail.push(format!("r={r} k={k}: {s:.3}"));
        }
    }
    report(
        5,
        "deterministic rate",
        passed,
        start.elapsed(),
        Duration::from_secs(60),
        &detail.join(", "),
    );
}

#[test]
fn criterion_6_randomized_rate_independent_of_k() {
    let start = Instant::now();
    let mut detail = Vec::new();
    let mut passed = true;
    for r in 1..=2 {
        for k in 1..=3 {
            let rand = slope(SolverMode::Randomized, r, k, 100);
            let det = slope(SolverMode::Deterministic, r, k, 1);
            passed &= (rand - (r as f64 + 0.5)).abs() <= 0.3;
            passed &= (rand - det - 0.5).abs() <= 0.3;
            detail.push(format!("r={r} k={k}: {rand:.3} (gain {:.3})", rand - det));
        }
    }
    report(
        6,
        "randomized rate, k-independent gain",
        passed,
        start.elapsed(),
        Duration::from_secs(180),
        &detail.join(", "),
    );
}

#[test]
fn criterion_7_end_to_end_adversary() {
    let start = Instant::now();
    let tol = ToleranceProfile::Default.tolerances();
    let mut detail = Vec::new();
    let mut passed = true;
    for k in 1..=2 {
        for n in [8, 16] {
            let spec = AdversarySpec::new(Setting::Randomized, k, 1, n, 200, 99);
            let rep = run_adversary_pipeline(&spec, &tol).unwrap();
            let ratio = rep.ratio.unwrap();
            passed &= ratio <= 10.0;
            detail.push(format!("k={k} n={n}: ratio {ratio:.3}"));
            let mut oracle = spec.clone();
            oracle.oracle = true;
            let rep = run_adversary_pipeline(&oracle, &tol).unwrap();
            passed &= rep.observed_max <= 1e-8;
        }
    }
    report(
        7,
        "end-to-end adversary",
        passed,
        start.elapsed(),
        Duration::from_secs(120),
        &detail.join(", "),
    );
}

#[test]
fn criterion_8_bound_calculators() {
    let start = Instant::now();
    // (setting, kn, eps1, expected), worked by hand.
    let table = [
        (Setting::Quantum, 1000, 0.01, 100),
        (Setting::Randomized, 1000, 0.01, 1000),
        (Setting::Randomized, 1000, 0.1, 100),
        (Setting::Quantum, 50, 0.1, 10),
        (Setting::Quantum, 5, 0.1, 5),
        (Setting::Quantum, 1000, 0.3, 4),
        (Setting::Randomized, 1000, 0.3, 12),
        (Setting::Randomized, 64, 0.25, 16),
        (Setting::Randomized, 1_000_000, 0.003, 111_112),
        (Setting::Quantum, 1, 0.5, 1),
    ];
    let mut mismatches = Vec::new();
    for (setting, kn, eps1, want) in table {
        let got = lower_bound_queries(setting, kn, eps1).unwrap();
        if got != want {
            mismatches.push(format!("{setting} kn={kn} eps1={eps1}: {got} != {want}"));
        }
    }
    report(
        8,
        "bound calculators",
        mismatches.is_empty(),
        start.elapsed(),
        Duration::from_secs(1),
        &if mismatches.is_empty() {
            "10/10 exact".to_string()
        } else {
            mismatches.join("; ")
        },
    );
}

#[test]
fn criterion_9_negative_controls() {
    let start = Instant::now();
    let bin = env!("CARGO_BIN_EXE_ivp-bounds");
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    let spline = run(&[
        "verify-spline",
        "--r",
        "3",
        "--inject-fault",
        "sign-pattern",
    ]);
    let weights = run(&[
        "verify-reduction",
        "--k",
        "3",
        "--n",
        "4",
        "--inject-fault",
        "weights",
    ]);
    let clean_spline = run(&["verify-spline", "--r", "3"]);
    let clean_weights = run(&["verify-reduction", "--k", "3", "--n", "4"]);
    let passed = spline == Some(1)
        && weights == Some(1)
        && clean_spline == Some(0)
        && clean_weights == Some(0);
    report(
        9,
        "negative controls",
        passed,
        start.elapsed(),
        Duration::from_secs(5),
        &format!(
            "corrupted sign pattern exit {spline:?}, corrupted weights exit {weights:?}, clean runs {clean_spline:?}/{clean_weights:?}"
        ),
    );
}
