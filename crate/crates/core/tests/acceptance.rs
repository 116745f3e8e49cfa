//! Acceptance suite. Runs every criterion in sequence, prints one PASS/FAIL
//! line per criterion and exits non-zero if any criterion fails.
//!
//! Run with `cargo test -p formdom-core --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use formdom::bundle::{
    fiber_norm, random_section, random_unitary_connection, signed_vector_inequality_check, CMatrix,
};
use formdom::config::DEFAULT_T_GRID;
use formdom::fixtures::{
    build_instance, lower_potential, pi_flux_pair, random_graph, random_instance, random_psd,
};
use formdom::forms::{
    assemble_magnetic, assemble_scalar, check_first_bd, check_kato_random, check_lattice_random,
};
use formdom::metrics::{check_intrinsic, check_strongly_intrinsic, EdgeLengths, PseudoMetric};
use formdom::probe::{
    run_probe, transfer_evidence, ConnectionSpec, ProbeConfig, TransferThresholds,
};
use formdom::semigroup::{check_domination, check_positivity_preserving, expm_dense, expm_krylov};
use formdom::{EndomorphismField, FamilySpec, Section, Tolerances, Verdict, WeightedGraph};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// 200 instances, 25 sections each, dense semigroups on the standard time grid.
fn domination_suite() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_seed = 0;
    for seed in 0..200 {
        let inst = random_instance(seed, 40, 3);
        let r = check_domination(
            &inst.magnetic,
            &inst.scalar,
            &DEFAULT_T_GRID,
            25,
            seed,
            1e-10,
        )
        .expect("domination check runs");
        if r.max_violation > worst {
            worst = r.max_violation;
            worst_seed = seed;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && secs <= 60.0,
        format!("max violation {worst:.3e} (seed {worst_seed}), runtime {secs:.1}s"),
    )
}

/// An instance with `λ_min(W(0)) < c(0)` must be caught by one of the checks.
fn violation_detector() -> Outcome {
    for seed in 0..20 {
        let inst = random_instance(seed, 12, 3);
        let mut killing = inst.graph.killing().to_vec();
        killing[0] = 1.0;
        let edges: Vec<_> = inst
            .graph
            .edges()
            .iter()
            .map(|e| (e.x, e.y, e.weight))
            .collect();
        let g = WeightedGraph::new(inst.graph.measure().to_vec(), killing, edges).unwrap();
        let w = lower_potential(&g, &inst.potential, 0, 1.0).unwrap();
        let mag = assemble_magnetic(&g, &inst.connection, &w).unwrap();
        let sc = assemble_scalar(&g).unwrap();
        let dom = check_domination(&mag, &sc, &DEFAULT_T_GRID, 25, seed, 1e-10).unwrap();
        let kato = check_kato_random(&mag, &sc, 25, seed, 1e-10).unwrap();
        if dom.verdict == Verdict::Fail || kato.verdict == Verdict::Fail {
            return outcome(
                true,
                format!(
                    "seed {seed}: domination {:?} (max {:.3e}), kato {:?} (max {:.3e})",
                    dom.verdict, dom.max_violation, kato.verdict, kato.max_violation
                ),
            );
        }
    }
    outcome(false, "no failure detected on 20 perturbed instances")
}

/// 500 pairs `(u, v)`: 100 instances with 5 pairs each.
fn kato_inequality() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut samples = 0;
    for seed in 0..100 {
        let inst = random_instance(1000 + seed, 40, 3);
        let r = check_kato_random(&inst.magnetic, &inst.scalar, 5, seed, 1e-10).unwrap();
        samples += r.samples;
        worst = worst.max(r.max_violation);
    }
    outcome(
        worst <= 1e-10,
        format!("{samples} pairs, max of Kato and domain gaps {worst:.3e}"),
    )
}

fn gaussian_vector(d: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    (0..d)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

/// 10⁴ draws in fiber dimensions 1..=8, with occasional zero vectors.
fn sign_inequality_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..10_000 {
        let d = rng.random_range(1..=8);
        let mut a = gaussian_vector(d, &mut rng);
        let b = gaussian_vector(d, &mut rng);
        if i % 50 == 0 {
            a.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
        let alpha = rng.random::<f64>() * fiber_norm(&a);
        let beta = rng.random::<f64>() * fiber_norm(&b);
        let o = signed_vector_inequality_check(&a, &b, alpha, beta, 1e-12);
        if o.verdict != Verdict::Pass {
            failures += 1;
        }
        worst = worst.max(o.lhs - o.rhs);
    }
    outcome(
        failures == 0,
        format!("10000 draws, {failures} failures, max lhs - rhs {worst:.3e}"),
    )
}

/// 50 random scalar graphs: first Beurling-Deny on 500 samples each and
/// positivity of `e^{-tB} δ_x`.
fn beurling_deny_and_positivity() -> Outcome {
    let mut bd = f64::NEG_INFINITY;
    let mut pos = f64::NEG_INFINITY;
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
        let n = rng.random_range(2..=40);
        let sc = assemble_scalar(&random_graph(n, &mut rng)).unwrap();
        bd = bd.max(check_first_bd(&sc, 500, seed, 1e-10).unwrap().max_violation);
        pos = pos.max(
            check_positivity_preserving(&sc, &DEFAULT_T_GRID, 0, seed, 1e-12)
                .unwrap()
                .max_violation,
        );
    }
    outcome(
        bd <= 1e-10 && pos <= 1e-12,
        format!("max Q(|f|) - Q(f) and Q(f+) - Q(f) {bd:.3e}, max negativity {pos:.3e}"),
    )
}

/// 10³ real pairs on each of 20 scalar forms.
fn lattice_inequality() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let n = rng.random_range(2..=40);
        let sc = assemble_scalar(&random_graph(n, &mut rng)).unwrap();
        worst = worst.max(
            check_lattice_random(&sc, 1000, seed, 1e-10)
                .unwrap()
                .max_violation,
        );
    }
    outcome(worst <= 1e-10, format!("max excess {worst:.3e}"))
}

/// Sparse instance with `100 ≤ n·d ≤ 600` and small killing and potential.
fn krylov_instance(seed: u64) -> formdom::fixtures::RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(50..=200);
    let d = rng.random_range(1..=(600 / n).min(3));
    let mut edges = std::collections::BTreeMap::new();
    for x in 1..n {
        edges.insert((rng.random_range(0..x), x), rng.random_range(0.1..=2.0));
    }
    for _ in 0..n / 2 {
        let (x, y) = (rng.random_range(0..n), rng.random_range(0..n));
        if x != y {
            edges.insert((x.min(y), x.max(y)), rng.random_range(0.1..=2.0));
        }
    }
    let measure = (0..n).map(|_| rng.random_range(0.5..=2.0)).collect();
    let killing: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=0.1)).collect();
    let g = WeightedGraph::new(
        measure,
        killing.clone(),
        edges.into_iter().map(|((x, y), b)| (x, y, b)),
    )
    .unwrap();
    let conn = random_unitary_connection(&g, d, rng.random()).unwrap();
    let w = killing
        .iter()
        .map(|&c| random_psd(d, 0.1, &mut rng) + CMatrix::identity(d, d) * Complex64::new(c, 0.0))
        .collect();
    let w = EndomorphismField::new(d, w, &Tolerances::default()).unwrap();
    build_instance(seed, g, conn, w)
}

fn krylov_fidelity() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_case = String::new();
    for seed in 0..50 {
        let inst = krylov_instance(5000 + seed);
        let form = &inst.magnetic;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xi = random_section(form.n(), form.dim(), &mut rng);
        let sg = formdom::semigroup::DenseSemigroup::new(form).unwrap();
        for &t in &DEFAULT_T_GRID {
            let dense = sg.apply(t, &xi).unwrap();
            let krylov = expm_krylov(form, t, &xi, 1e-9).unwrap();
            let err = krylov
                .add_scaled(Complex64::new(-1.0, 0.0), &dense)
                .norm_m(form.measure())
                / dense.norm_m(form.measure());
            if err > worst {
                worst = err;
                worst_case = format!("seed {seed}, n·d = {}, t = {t}", form.size());
            }
        }
    }
    outcome(
        worst <= 1e-8,
        format!("max relative error {worst:.3e} ({worst_case})"),
    )
}

fn exhaustion_probe() -> Outcome {
    let scalar = run_probe(&ProbeConfig::new(FamilySpec::path(1)), &[50, 100, 200]).unwrap();
    let ratios: Vec<f64> = scalar.scalar_gap.windows(2).map(|w| w[1] / w[0]).collect();
    let ratios_ok = ratios.iter().all(|r| (r - 0.25).abs() <= 0.25 * 0.15);

    let mut config = ProbeConfig::new(FamilySpec::path(1));
    config.connection = ConnectionSpec::Random { dim: 1 };
    config.seed = 8;
    let magnetic = run_probe(&config, &[25, 50, 100, 200, 400]).unwrap();
    let monotone = magnetic.magnetic_gap.windows(2).all(|w| w[1] <= w[0]);
    let last = *magnetic.magnetic_gap.last().unwrap();
    let evidence = transfer_evidence(&magnetic, &TransferThresholds::default()).unwrap();
    outcome(
        ratios_ok && monotone && last < 1e-2 && evidence.verdict == Verdict::Supported,
        format!(
            "gap ratios {:.4?}, magnetic gaps non-increasing: {monotone}, magneticGap(400) = {last:.3e}, transfer {:?}",
            ratios, evidence.verdict
        ),
    )
}

fn closed_form_equality() -> Outcome {
    let (_, mag, sc) = pi_flux_pair();
    let xi = Section::from_real(&[1.0, 0.0]);
    let mut worst = 0.0f64;
    for &t in &DEFAULT_T_GRID {
        let a = expm_dense(&mag, t, &xi).unwrap();
        let b = expm_dense(&sc, t, &xi).unwrap();
        let e = (-2.0 * t).exp();
        let a_exact = [0.5 * (e + 1.0), 0.5 * (e - 1.0)];
        let b_exact = [0.5 * (1.0 + e), 0.5 * (1.0 - e)];
        for x in 0..2 {
            worst = worst
                .max((a.values()[x].norm() - b.values()[x].re).abs())
                .max((a.values()[x] - Complex64::new(a_exact[x], 0.0)).norm())
                .max((b.values()[x] - Complex64::new(b_exact[x], 0.0)).norm());
        }
    }
    outcome(worst <= 1e-12, format!("max deviation {worst:.3e}"))
}

fn intrinsic_fixtures() -> Outcome {
    let p = formdom::graph::generate_family(&FamilySpec::path(20)).unwrap();
    let check = |s: f64| {
        let l = EdgeLengths::constant(&p, s).unwrap();
        let d = PseudoMetric::from_lengths(&p, &l).unwrap();
        (
            check_strongly_intrinsic(&p, &l, 1e-12).unwrap(),
            check_intrinsic(&p, &d, 1e-12).unwrap(),
        )
    };
    let (strong_half, plain_half) = check(0.5f64.sqrt());
    let (strong_one, plain_one) = check(1.0);
    let ratio = |r: &formdom::VerificationReport| r.worst_case["ratio"].as_f64().unwrap();
    let pass = strong_half.passed()
        && plain_half.passed()
        && strong_one.verdict == Verdict::Fail
        && plain_one.verdict == Verdict::Fail
        && (ratio(&strong_one) - 2.0).abs() <= 1e-12
        && (ratio(&plain_one) - 2.0).abs() <= 1e-12;
    outcome(
        pass,
        format!(
            "sigma = 2^-1/2: {:?}/{:?}; sigma = 1: {:?}/{:?} with worst ratio {} at vertex {}",
            strong_half.verdict,
            plain_half.verdict,
            strong_one.verdict,
            plain_one.verdict,
            ratio(&plain_one),
            plain_one.worst_case["vertex"]
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("semigroup domination on random instances", domination_suite),
        ("violation detector", violation_detector),
        ("Kato form inequality", kato_inequality),
        ("sign rescaling inequality fuzz", sign_inequality_fuzz),
        (
            "first Beurling-Deny and positivity",
            beurling_deny_and_positivity,
        ),
        ("lattice inequality", lattice_inequality),
        ("Krylov fidelity", krylov_fidelity),
        ("exhaustion probe on the path", exhaustion_probe),
        ("closed-form equality case", closed_form_equality),
        ("intrinsic metric fixtures", intrinsic_fixtures),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
