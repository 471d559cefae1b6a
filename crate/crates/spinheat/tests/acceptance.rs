//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the lines always print. The process
//! fails if any criterion fails, except those listed in `UNATTAINABLE`, which
//! must still fail (a listed criterion that starts passing is also an error).

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinheat::commands::cmd_heat;
use spinheat::RunConfig;
use spinheat_core::asymptotics::{estimate_cw1w1, extrapolate_sigma_zero, fit_heat_coefficients, gamma_order_check, ExtrapolationPolicy};
use spinheat_core::heat::{
    duhamel_f, dseff_free, dseff_w2_projection, heat_trace_free, log_sigma_grid, trace_w2_heat, HeatSeries, SeriesLabel,
};
use spinheat_core::linalg::polyfit_weighted;
use spinheat_core::operators::{scalar_invariants_for, BlockSet, DeformationConfig, ScalarDatum};
use spinheat_core::validation::{
    check_clifford_trace, check_monolithic_equivalence, check_prop_vanishing, check_spectrum_free, conjugate_w1,
    inject_w1_diagonal, level_counts, sector_signs, Thresholds,
};

/// Criteria that cannot pass in a faithful implementation, with the reason.
const UNATTAINABLE: &[(&str, &str)] = &[(
    "5b",
    "W1 anticommutes with the chirality grading while D^2 and W2 commute with it, so every odd-in-W1 Duhamel \
     term vanishes and K_gamma depends on gamma^4 only; the remainder after the order-gamma^4 terms is O(gamma^8)",
)];

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn cos_theta() -> ScalarDatum {
    ScalarDatum::cos_theta()
}

fn p1_half_p2() -> ScalarDatum {
    ScalarDatum::new(vec![0.0, 1.0, 0.5]).unwrap()
}

fn blocks(n: usize, gamma: f64, f: ScalarDatum) -> BlockSet {
    spinheat::engine::assemble(&DeformationConfig::new(n, gamma, f).unwrap()).unwrap()
}

fn criterion_1() -> Vec<Outcome> {
    let start = Instant::now();
    let report = check_spectrum_free(20, &cos_theta(), &Thresholds::default()).unwrap();
    let set = blocks(20, 0.0, cos_theta());
    let spectrum = spinheat::engine::spectrum(&set).unwrap();
    let (counts, deviation) = level_counts(spectrum.values(), 20);
    let multiplicities = counts[0] == 0 && (1..=20).all(|n| counts[n] == 4 * n);
    let elapsed = start.elapsed().as_secs_f64();
    vec![Outcome {
        id: "1",
        passed: report.passed && deviation <= 1e-10 && multiplicities && elapsed < 5.0,
        detail: format!("free spectrum N=20: max |nu - n^2| = {deviation:.2e}, multiplicities 4n: {multiplicities}, {elapsed:.2}s"),
    }]
}

fn criterion_2() -> Vec<Outcome> {
    let grid = log_sigma_grid(0.005, 0.05, 40).unwrap();
    let series = HeatSeries::tabulate(SeriesLabel::K0, 120, &grid, |s| heat_trace_free(120, s));
    let fit = fit_heat_coefficients(&series, 2, 1e-10).unwrap();
    let (c0, c1) = (fit.coefficients[0], fit.coefficients[1]);
    let a0 = 4.0 * PI * c0;
    vec![Outcome {
        id: "2",
        passed: (c0 - 2.0).abs() <= 1e-3 && (c1 + 1.0 / 3.0).abs() <= 5e-3 && (a0 / (8.0 * PI) - 1.0).abs() <= 4e-3,
        detail: format!("sigma*K0 fit N=120 on [0.005, 0.05]: c0 = {c0:.8}, c1 = {c1:.6}, A0/8pi = {:.8}", a0 / (8.0 * PI)),
    }]
}

fn criterion_3() -> Vec<Outcome> {
    let sigmas = [0.01, 0.1, 1.0];
    let th = Thresholds::default();
    let mut worst = 0.0f64;
    let mut passed = true;
    for f in [cos_theta(), p1_half_p2()] {
        let r = check_prop_vanishing(&blocks(60, 0.5, f), &sigmas, &th);
        worst = worst.max(r.max_deviation);
        passed &= r.passed;
    }
    let control = check_prop_vanishing(&inject_w1_diagonal(&blocks(20, 0.5, cos_theta()), 3, 1e-3), &sigmas, &th);
    vec![Outcome {
        id: "3",
        passed: passed && !control.passed,
        detail: format!("max |Tr(W1 e^-sD2)|/K0 = {worst:.2e} (cos, P1+P2/2); injected diagonal gives {:.2e}, failed: {}", control.max_deviation, !control.passed),
    }]
}

fn criterion_4() -> Vec<Outcome> {
    let grid = log_sigma_grid(0.004, 0.05, 40).unwrap();
    let policy = ExtrapolationPolicy::default();
    let limit = |f: ScalarDatum| {
        let set = blocks(120, 0.5, f);
        let series = HeatSeries::tabulate(SeriesLabel::Derived, 120, &grid, |s| s * trace_w2_heat(&set.blocks, s));
        extrapolate_sigma_zero(&series, &policy).unwrap()
    };
    let cos = limit(cos_theta());
    let mixed = limit(p1_half_p2());
    let oracle = scalar_invariants_for(&p1_half_p2()).unwrap().0 / (8.0 * PI);
    let rel = (mixed.limit - oracle).abs() / oracle;
    vec![Outcome {
        id: "4",
        passed: (cos.limit - 0.1).abs() <= 1e-3 && rel <= 5e-3,
        detail: format!("-delta2a/gamma^4 -> {:.8} (cos); P1+P2/2: {:.8} vs (1/8pi) int f^4 = {oracle:.8}, rel {rel:.1e}", cos.limit, mixed.limit),
    }]
}

fn criterion_5() -> Vec<Outcome> {
    let set = blocks(60, 0.0, cos_theta());
    let r = gamma_order_check(&set, 0.1, 0.6).unwrap();
    vec![
        Outcome {
            id: "5a",
            passed: (3.7..=4.3).contains(&r.p1),
            detail: format!("order of K_gamma - K0 between gamma 0.6 and 0.3 at sigma 0.1, N=60: p1 = {:.4}", r.p1),
        },
        Outcome {
            id: "5b",
            passed: (5.0..=7.0).contains(&r.p2),
            detail: format!(
                "order of remainder after delta2a + delta2b: p2 = {:.4} (remainders {:.3e}, {:.3e}; noise floor {:.1e})",
                r.p2, r.remainder.0, r.remainder.1, r.noise_floor
            ),
        },
    ]
}

fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (left, right) = (simpson(f, a, m), simpson(f, m, b));
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, left, 0.5 * tol, depth - 1) + adaptive(f, m, b, right, 0.5 * tol, depth - 1)
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let whole = simpson(&f, a, b);
    adaptive(&f, a, b, whole, tol, 40)
}

fn criterion_6() -> Vec<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (a, b, s) = (rng.random_range(0.0..400.0), rng.random_range(0.0..400.0), rng.random_range(0.002..0.5));
        let tol = 1e-13 * s * s * (-s * f64::min(a, b)).exp();
        let want = integrate(|u| integrate(|r| (-(s - u + r) * a - (u - r) * b).exp(), 0.0, u, tol / s), 0.0, s, tol);
        worst = worst.max(((duhamel_f(a, b, s) - want) / want).abs());
    }
    vec![Outcome {
        id: "6",
        passed: worst <= 1e-8,
        detail: format!("duhamel_F vs adaptive 2-D quadrature, 20 seeded triples: max rel error {worst:.2e}"),
    }]
}

fn criterion_7() -> Vec<Outcome> {
    let grid = log_sigma_grid(0.005, 0.05, 40).unwrap();
    let w = vec![1.0; grid.len()];
    let ds: Vec<f64> = grid.iter().map(|&s| dseff_free(120, s)).collect();
    let fit = polyfit_weighted(&grid, &ds, 2, &w).unwrap();
    let gamma: f64 = 0.5;
    let set = blocks(120, gamma, cos_theta());
    let proj: Vec<f64> = grid.iter().map(|&s| dseff_w2_projection(&set.blocks, s, gamma) / gamma.powi(4)).collect();
    let pfit = polyfit_weighted(&grid, &proj, 2, &w).unwrap();
    let (c0, c1, p1) = (fit.coefficients[0], fit.coefficients[1], pfit.coefficients[1]);
    vec![Outcome {
        id: "7",
        passed: (c0 - 2.0).abs() <= 1e-3 && (c1 - 1.0 / 3.0).abs() <= 0.02 && (p1 - 0.1).abs() <= 5e-3,
        detail: format!("dseff(s, 0) fit: intercept {c0:.7}, slope {c1:.5}; w2 projection/gamma^4 slope {p1:.6}"),
    }]
}

fn criterion_8() -> Vec<Outcome> {
    let grid = log_sigma_grid(0.004, 0.05, 40).unwrap();
    let set = blocks(120, 0.5, cos_theta());
    let r = check_clifford_trace(&set, &grid, &ExtrapolationPolicy::default(), &Thresholds::default()).unwrap();
    let series = HeatSeries::tabulate(SeriesLabel::Derived, 120, &grid, |s| s * spinheat_core::heat::trace_w1_squared_heat(&set.blocks, s));
    let limit = extrapolate_sigma_zero(&series, &ExtrapolationPolicy::default()).unwrap().limit;
    vec![Outcome {
        id: "8",
        passed: r.passed && (limit - 4.0 / 15.0).abs() <= 1e-3,
        detail: format!("sigma Tr(W1^2 e^-sD2) -> {limit:.8} vs 4/15 = {:.8}", 4.0 / 15.0),
    }]
}

fn criterion_9() -> Vec<Outcome> {
    let grid = log_sigma_grid(0.0075, 0.05, 40).unwrap();
    let policy = ExtrapolationPolicy { windows: vec![(0.0075, 0.03), (0.01, 0.05)], rel_threshold: 0.02, ..Default::default() };
    let sets: Vec<BlockSet> = [60, 80, 100].iter().map(|&n| blocks(n, 0.0, cos_theta())).collect();
    let refs: Vec<&BlockSet> = sets.iter().collect();
    let base = estimate_cw1w1(&refs, &grid, 0.5, &policy).unwrap();
    let spread = base.combined.relative_spread();
    let conjugated: Vec<BlockSet> = sets.iter().enumerate().map(|(k, s)| conjugate_w1(s, sector_signs(90 + k as u64)).unwrap()).collect();
    let crefs: Vec<&BlockSet> = conjugated.iter().collect();
    let conj = estimate_cw1w1(&crefs, &grid, 0.5, &policy).unwrap();
    let shift = (conj.combined.limit - base.combined.limit).abs();
    let other_gamma = estimate_cw1w1(&refs, &grid, 0.3, &policy).unwrap();
    let gamma_shift = (other_gamma.combined.limit - base.combined.limit).abs();
    let tol = base.combined.uncertainty;
    vec![Outcome {
        id: "9",
        passed: spread <= 0.02 && base.combined.converged && shift <= tol && gamma_shift <= tol,
        detail: format!(
            "C_W1W1 = {:.8} +- {:.1e} over N in {{60, 80, 100}} and two windows (rel spread {spread:.1e}); \
             conjugated shift {shift:.1e}, gamma 0.3 vs 0.5 shift {gamma_shift:.1e}",
            base.combined.limit, base.combined.uncertainty
        ),
    }]
}

fn criterion_10() -> Vec<Outcome> {
    let th = Thresholds::default();
    let mut worst = 0.0f64;
    let mut passed = true;
    for n in [3, 4] {
        for (gamma, f) in [(0.7, cos_theta()), (0.4, p1_half_p2())] {
            let r = check_monolithic_equivalence(n, gamma, &f, &th).unwrap();
            worst = worst.max(r.max_deviation);
            passed &= r.passed;
        }
    }
    vec![Outcome {
        id: "10",
        passed,
        detail: format!("monolithic vs blocked spectra, N in {{3, 4}}, (0.7, cos) and (0.4, P1+P2/2): max deviation {worst:.2e}"),
    }]
}

fn criterion_11() -> Vec<Outcome> {
    let cfg = RunConfig::from_json(
        r#"{
            "truncation_N": 40, "gammas": [0.3, 0.6],
            "sigma": {"min": 0.01, "max": 1.0, "points_per_decade": 20},
            "f": {"legendre": [0.0, 1.0, 0.5]},
            "fit": {"windows": [[0.02, 0.05], [0.03, 0.1]], "degrees": [2]},
            "output_dir": "unused", "seed": 11
        }"#,
    )
    .unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = cmd_heat(&cfg, a.path()).unwrap();
    let fb = cmd_heat(&cfg, b.path()).unwrap();
    let identical = fa.len() == fb.len()
        && fa.iter().zip(&fb).all(|(x, y)| x.file_name() == y.file_name() && std::fs::read(x).unwrap() == std::fs::read(y).unwrap());
    vec![Outcome {
        id: "11",
        passed: identical && !fa.is_empty(),
        detail: format!("two cmd_heat runs, {} files each: byte-identical {identical}", fa.len()),
    }]
}

fn main() {
    let start = Instant::now();
    let criteria: [fn() -> Vec<Outcome>; 11] = [
        criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8, criterion_9,
        criterion_10, criterion_11,
    ];
    let mut unexpected = Vec::new();
    for run in criteria {
        for o in run() {
            let known = UNATTAINABLE.iter().find(|(id, _)| *id == o.id);
            let tag = if o.passed { "PASS" } else { "FAIL" };
            println!("{tag} criterion {:>3}: {}", o.id, o.detail);
            if let Some((_, reason)) = known {
                println!("               known unattainable: {reason}");
                if o.passed {
                    unexpected.push(format!("{} passed but is listed as unattainable", o.id));
                }
            } else if !o.passed {
                unexpected.push(format!("{} failed", o.id));
            }
        }
    }
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        eprintln!("acceptance: {}", unexpected.join("; "));
        std::process::exit(1);
    }
}
