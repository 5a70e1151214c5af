//! Acceptance suite. Each criterion prints one PASS/FAIL line with the
//! measured numbers; the process fails if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use eitrecon::basis::BoundaryBasis;
use eitrecon::cli::{execute, Command};
use eitrecon::config::RunConfig;
use eitrecon::forward::{assemble_system, solve_neumann, ConductivityField, PixelConductivity};
use eitrecon::geometry::{build_structured_mesh, refine_mesh, roi_order, validate_ordering, Mesh, Partition, Side};
use eitrecon::monotonicity::{lambda_min, spectral_norm};
use eitrecon::nd_map::{assemble_nd, NdMatrix};
use eitrecon::reconstruction::{PixelStatus, ReconProblem, ReconResult, ReconSettings, TestVariant};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn nd_of(mesh: &Mesh, part: &Partition, field: &ConductivityField, m: usize) -> NdMatrix {
    let basis = BoundaryBasis::new(mesh, m).unwrap();
    let sys = assemble_system(mesh, part, field).unwrap();
    assemble_nd(&sys, &basis, m).unwrap()
}

fn within(elapsed: Duration, budget_s: u64) -> bool {
    elapsed <= Duration::from_secs(budget_s)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn analytic_nd_spectrum() -> Verdict {
    let start = Instant::now();
    let (mesh, part) = build_structured_mesh(1, 1, 1.0 / 64.0, &[Side::Bottom]).unwrap();
    let a = nd_of(&mesh, &part, &ConductivityField::uniform(1, 1.0).unwrap(), 8);
    let errors: Vec<f64> = (1..=8)
        .map(|k| {
            let kp = k as f64 * PI;
            rel(a.matrix[(k - 1, k - 1)], 1.0 / (kp.tanh() * kp))
        })
        .collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);

    // L²(Γ) error of the trace for the flux g_1 against the separable solution.
    let trace_error = |h: f64| {
        let (mesh, part) = build_structured_mesh(1, 1, h, &[Side::Bottom]).unwrap();
        let basis = BoundaryBasis::new(&mesh, 1).unwrap();
        let sys = assemble_system(&mesh, &part, &ConductivityField::uniform(1, 1.0).unwrap()).unwrap();
        let sol = solve_neumann(&sys, &basis, &[1.0]).unwrap();
        let amp = 2f64.sqrt() / (PI.tanh() * PI);
        basis.l2_error(&mesh, &sol.nodal, |p| amp * (PI * p[0]).cos())
    };
    let ratio = trace_error(1.0 / 32.0) / trace_error(1.0 / 64.0);
    let elapsed = start.elapsed();
    let errs: Vec<String> = errors.iter().map(|e| format!("{:.2}%", 100.0 * e)).collect();
    verdict(
        worst <= 0.01 && (3.5..=4.5).contains(&ratio) && within(elapsed, 10),
        format!(
            "diag rel errors k=1..8 [{}], worst {:.2}% (limit 1%); trace ratio {ratio:.3} (limit [3.5, 4.5]); {elapsed:.2?}",
            errs.join(", "),
            100.0 * worst
        ),
    )
}

fn scaling_identity() -> Verdict {
    let start = Instant::now();
    let (mesh, part) = build_structured_mesh(2, 2, 1.0 / 32.0, &[Side::Bottom, Side::Left]).unwrap();
    let a1 = nd_of(&mesh, &part, &ConductivityField::uniform(4, 1.0).unwrap(), 16);
    let a2 = nd_of(&mesh, &part, &ConductivityField::uniform(4, 2.0).unwrap(), 16);
    let err = (&a2.matrix - &a1.matrix * 0.5).norm() / (&a1.matrix * 0.5).norm();
    let elapsed = start.elapsed();
    verdict(
        err <= 1e-10 && within(elapsed, 5),
        format!("relative Frobenius error {err:.2e} (limit 1e-10); {elapsed:.2?}"),
    )
}

fn random_gamma(rng: &mut ChaCha8Rng) -> Vec<Side> {
    loop {
        let sides: Vec<Side> = Side::all().into_iter().filter(|_| rng.random_bool(0.5)).collect();
        if !sides.is_empty() {
            return sides;
        }
    }
}

fn loewner_monotonicity() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    for i in 0..50 {
        let n = if i % 2 == 0 { 2 } else { 3 };
        let gamma = random_gamma(&mut rng);
        let (mesh, part) = build_structured_mesh(n, n, 1.0 / 32.0, &gamma).unwrap();
        let s1: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.2..5.0)).collect();
        let s2: Vec<f64> = s1.iter().map(|v| v * rng.random_range(1.0..3.0)).collect();
        let a1 = nd_of(&mesh, &part, &ConductivityField::from_values(&s1).unwrap(), 8);
        let a2 = nd_of(&mesh, &part, &ConductivityField::from_values(&s2).unwrap(), 8);
        let ratio = lambda_min(&(&a1.matrix - &a2.matrix)) / spectral_norm(&a1.matrix);
        worst = worst.min(ratio);
        if ratio < -1e-8 {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        failures == 0 && within(elapsed, 120),
        format!(
            "50 pairs, {failures} violations, min λ_min/‖A₁‖₂ = {worst:.2e} (limit -1e-8); {elapsed:.2?}"
        ),
    )
}

fn extreme_sandwich() -> Verdict {
    let start = Instant::now();
    let (mesh, part) = build_structured_mesh(2, 2, 1.0 / 32.0, &[Side::Bottom]).unwrap();
    let background = [1.0, 2.0, 0.5, 3.0];
    let mut worst = f64::INFINITY;
    let mut details = Vec::new();
    for flip in [2, 3] {
        let finite = ConductivityField::from_values(&background).unwrap();
        let mut cond = finite.clone();
        cond.set(flip, PixelConductivity::Conducting);
        let mut ins = finite.clone();
        ins.set(flip, PixelConductivity::Insulating);
        let (ac, af, ai) = (
            nd_of(&mesh, &part, &cond, 8),
            nd_of(&mesh, &part, &finite, 8),
            nd_of(&mesh, &part, &ins, 8),
        );
        let lower = lambda_min(&(&af.matrix - &ac.matrix)) / spectral_norm(&af.matrix);
        let upper = lambda_min(&(&ai.matrix - &af.matrix)) / spectral_norm(&ai.matrix);
        worst = worst.min(lower).min(upper);
        details.push(format!("pixel {flip}: {lower:.2e}, {upper:.2e}"));
    }
    let elapsed = start.elapsed();
    verdict(
        worst >= -1e-8 && within(elapsed, 30),
        format!(
            "scaled λ_min of (finite − conducting), (insulating − finite): {} (limit -1e-8); {elapsed:.2?}",
            details.join("; ")
        ),
    )
}

fn consistent_data() -> Verdict {
    let start = Instant::now();
    let all = Side::all();
    // Γ touches only pixel 0 in the lower-test cases: an insulating pixel on
    // Γ has no bounded ND map.
    let cases: [(usize, usize, &[Side], usize, usize, TestVariant); 6] = [
        (1, 1, &all, 16, 32, TestVariant::Upper),
        (2, 2, &all, 48, 96, TestVariant::Upper),
        (3, 3, &all, 48, 96, TestVariant::Upper),
        (1, 1, &all, 16, 32, TestVariant::Lower),
        (1, 2, &[Side::Left], 48, 24, TestVariant::Lower),
        (2, 1, &[Side::Bottom], 48, 24, TestVariant::Lower),
    ];
    let mut worst: f64 = 0.0;
    let mut details = Vec::new();
    for &(rows, cols, gamma, inv_h, m, variant) in &cases {
        let (mesh, part) = build_structured_mesh(rows, cols, 1.0 / inv_h as f64, gamma).unwrap();
        let mut case_worst: f64 = 0.0;
        for c in [0.3, 1.0, 7.0] {
            let field = ConductivityField::uniform(rows * cols, c).unwrap();
            let measured = nd_of(&mesh, &part, &field, m);
            let settings = ReconSettings {
                variant,
                ..ReconSettings::default()
            };
            let problem = ReconProblem::new(&mesh, &part, None, measured, settings).unwrap();
            let result = problem.reconstruct().unwrap();
            for p in 0..rows * cols {
                let e = match result.outcome(p) {
                    Some(o) if o.status != PixelStatus::BracketCapHit => rel(o.value, c),
                    _ => f64::INFINITY,
                };
                case_worst = case_worst.max(e);
            }
        }
        worst = worst.max(case_worst);
        details.push(format!("{rows}x{cols} {variant} M={m}: {case_worst:.1e}"));
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-4 && within(elapsed, 60),
        format!(
            "worst relative error per case over c in {{0.3, 1, 7}}: [{}] (limit 1e-4); {elapsed:.2?}",
            details.join(", ")
        ),
    )
}

struct Phantom {
    mesh: Mesh,
    part: Partition,
    values: Vec<f64>,
    measured: NdMatrix,
}

/// 3×3 partition with Γ = bottom + left, values drawn from [0.5, 4], data
/// from the once-refined mesh with M = 16.
fn phantom() -> Phantom {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let values: Vec<f64> = (0..9).map(|_| rng.random_range(0.5..4.0)).collect();
    let (mesh, part) = build_structured_mesh(3, 3, 1.0 / 24.0, &[Side::Bottom, Side::Left]).unwrap();
    let (fine_mesh, fine_part) = refine_mesh(&mesh, &part).unwrap();
    let measured = nd_of(
        &fine_mesh,
        &fine_part,
        &ConductivityField::from_values(&values).unwrap(),
        16,
    );
    Phantom {
        mesh,
        part,
        values,
        measured,
    }
}

fn run_variant(ph: &Phantom, variant: TestVariant, order: Option<Vec<usize>>) -> Result<ReconResult, String> {
    let settings = ReconSettings {
        variant,
        ..ReconSettings::default()
    };
    ReconProblem::new(&ph.mesh, &ph.part, order, ph.measured.clone(), settings)
        .and_then(|p| p.reconstruct())
        .map_err(|e| e.to_string())
}

fn describe(result: &Result<ReconResult, String>) -> String {
    match result {
        Ok(r) => {
            let v: Vec<String> = r
                .outcomes
                .iter()
                .map(|o| format!("{}:{:.4}", o.pixel, o.value))
                .collect();
            format!("{} [{}]", r.status, v.join(" "))
        }
        Err(e) => format!("error: {e}"),
    }
}

fn phantom_reconstruction() -> Verdict {
    let start = Instant::now();
    let ph = phantom();
    let upper = run_variant(&ph, TestVariant::Upper, None);
    let lower = run_variant(&ph, TestVariant::Lower, None);
    let errors = |r: &Result<ReconResult, String>| -> f64 {
        match r {
            Ok(r) => (0..9)
                .map(|p| match r.outcome(p) {
                    Some(o) if o.status != PixelStatus::BracketCapHit => rel(o.value, ph.values[p]),
                    _ => f64::INFINITY,
                })
                .fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    };
    let (eu, el) = (errors(&upper), errors(&lower));
    let agree = match (&upper, &lower) {
        (Ok(u), Ok(l)) => (0..9)
            .map(|p| match (u.outcome(p), l.outcome(p)) {
                (Some(a), Some(b)) => rel(a.value, b.value),
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max),
        _ => f64::INFINITY,
    };
    let elapsed = start.elapsed();
    let truth: Vec<String> = ph.values.iter().map(|v| format!("{v:.4}")).collect();
    verdict(
        eu <= 0.05 && el <= 0.05 && agree <= 0.01 && within(elapsed, 600),
        format!(
            "truth [{}]; upper {} max err {eu:.2e}; lower {} max err {el:.2e}; agreement {agree:.2e} (limits 5%, 1%); {elapsed:.2?}",
            truth.join(" "),
            describe(&upper),
            describe(&lower)
        ),
    )
}

fn finite_m_probe() -> Verdict {
    let start = Instant::now();
    let ph = phantom();
    let problem = ReconProblem::new(&ph.mesh, &ph.part, None, ph.measured.clone(), ReconSettings::default()).unwrap();
    let gamma1 = ph.values[problem.order[0]];
    let orders: Vec<usize> = (1..=16).collect();
    let below = problem.m_sweep(1, 0.8 * gamma1, &[], &orders).unwrap();
    let above = problem.m_sweep(1, 1.2 * gamma1, &[], &orders).unwrap();
    // Smallest M_1 such that the inequality fails for every tested M ≥ M_1.
    let m1 = (0..below.len())
        .find(|&i| below[i..].iter().all(|r| !r.holds))
        .map(|i| below[i].order);
    let above_ok = above.iter().all(|r| r.holds);
    let elapsed = start.elapsed();
    let fmt = |rows: &[eitrecon::reconstruction::SweepRow]| {
        rows.iter().map(|r| format!("{:.1e}", r.lambda_min)).collect::<Vec<_>>().join(" ")
    };
    verdict(
        m1.is_some_and(|m| m <= 16) && above_ok && within(elapsed, 300),
        format!(
            "γ_1 = {gamma1:.4}; t = 0.8γ_1 λ_min(M=1..16) [{}] → M_1 = {m1:?}; t = 1.2γ_1 [{}] holds for all M: {above_ok}; {elapsed:.2?}",
            fmt(&below),
            fmt(&above)
        ),
    )
}

fn roi_path() -> Verdict {
    let start = Instant::now();
    let ph = phantom();
    let order = roi_order(&ph.part, &ph.mesh, &[4]).unwrap();
    let valid = validate_ordering(&ph.part, &ph.mesh, &order).valid;
    let roi = run_variant(&ph, TestVariant::Upper, Some(order.clone()));
    let full = run_variant(&ph, TestVariant::Upper, None);
    let center = |r: &Result<ReconResult, String>| {
        r.as_ref()
            .ok()
            .and_then(|r| r.outcome(4))
            .filter(|o| o.status != PixelStatus::BracketCapHit)
            .map(|o| o.value)
    };
    let (c_roi, c_full) = (center(&roi), center(&full));
    let diff = match (c_roi, c_full) {
        (Some(a), Some(b)) => rel(a, b),
        _ => f64::INFINITY,
    };
    let elapsed = start.elapsed();
    verdict(
        valid && order.len() == 2 && diff <= 0.01 && within(elapsed, 180),
        format!(
            "ROI ordering {order:?} valid {valid}; center ROI {c_roi:?} vs full sweep {c_full:?} (truth {:.4}), rel diff {diff:.2e} (limit 1%); full sweep {}; {elapsed:.2?}",
            ph.values[4],
            describe(&full)
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let config_text = "rows = 2\ncols = 2\nh = 1/16\ngamma = bottom, left\nphantom = 1, 2, 0.5, 3\nM = 8\nnoise = 0.001\nseed = 9\n";
    let run = |tag: &str| -> (Vec<u8>, Vec<u8>) {
        let overrides = vec![format!("data={tag}.nd"), format!("result={tag}.res")];
        let config = RunConfig::from_text(config_text, &overrides, dir.path()).unwrap();
        execute(Command::Simulate, &config).unwrap();
        execute(Command::Reconstruct, &config).unwrap();
        let read = |p: &Path| std::fs::read(p).unwrap();
        (
            read(config.data.as_ref().unwrap()),
            read(config.result.as_ref().unwrap()),
        )
    };
    let (nd1, res1) = run("a");
    let (nd2, res2) = run("b");
    let nd_text = String::from_utf8(nd1.clone()).unwrap();
    let res_text = String::from_utf8(res1.clone()).unwrap();
    let nd_round = NdMatrix::from_text(&nd_text, "x").unwrap().to_text() == nd_text;
    let res_round = ReconResult::from_text(&res_text).unwrap().to_text() == res_text;
    verdict(
        nd1 == nd2 && res1 == res2 && nd_round && res_round,
        format!(
            "NDMatrix identical {}, ReconResult identical {}, NDMatrix round trip {nd_round}, ReconResult round trip {res_round}",
            nd1 == nd2,
            res1 == res2
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 9] = [
        ("analytic ND spectrum", analytic_nd_spectrum),
        ("scaling identity", scaling_identity),
        ("Loewner monotonicity suite", loewner_monotonicity),
        ("extreme sandwich", extreme_sandwich),
        ("consistent-data exactness", consistent_data),
        ("phantom reconstruction", phantom_reconstruction),
        ("finite-M probe", finite_m_probe),
        ("ROI path", roi_path),
        ("determinism and round trip", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| verdict(false, "panicked".into()));
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} - {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
