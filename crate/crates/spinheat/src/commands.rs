//! The five batch commands. Each reads a validated [`RunConfig`] and writes
//! its artifacts into an output directory.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use spinheat_core::asymptotics::{
    estimate_cw1w1, extrapolate_sigma_zero, fit_heat_coefficients, seeley_dewitt, CouplingEstimate, ExtrapolationResult,
};
use spinheat_core::heat::{
    delta1, delta2a, delta2b, dseff, dseff_w2_projection, heat_trace_deformed, in_valid_window, log_sigma_grid, tail_bound,
    trace_w1_squared_heat, trace_w2_heat, HeatSeries, SeriesLabel, Spectrum,
};
use spinheat_core::linalg::FitReport;
use spinheat_core::operators::{scalar_invariants_for, BlockSet, ScalarDatum};
use spinheat_core::validation::{
    check_azimuthal_symmetry, check_clifford_trace, check_convention_invariance, check_monolithic_equivalence,
    check_prop_vanishing, check_spectrum_free, conjugate_w1, inject_w1_diagonal, sector_mixing, trace_changes, CheckContext,
    CheckReport,
};

use crate::config::RunConfig;
use crate::engine;
use crate::error::CliError;
use crate::output::{gamma_tag, num, write_csv, write_json};

pub const SPECTRUM_HEADER: [&str; 4] = ["m", "index", "eigenvalue", "gamma"];
pub const HEAT_HEADER: [&str; 8] = ["sigma", "K0", "Kgamma", "delta1", "delta2a", "delta2b", "remainder", "tail_bound"];
pub const DSEFF_HEADER: [&str; 4] = ["sigma", "dseff_free", "dseff_gamma", "dseff_w2_projection"];

fn prepare(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

/// `W₁`, `W₂` at the configured truncation; couplings are applied per command.
fn base_set(cfg: &RunConfig, n_trunc: usize) -> Result<BlockSet, CliError> {
    Ok(engine::assemble(&cfg.deformation(n_trunc, 0.0))?)
}

/// Eigenvalues per block, sorted, one file per γ.
pub fn cmd_spectrum(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    prepare(out)?;
    let base = base_set(cfg, cfg.truncation_n)?;
    let mut files = Vec::new();
    for &gamma in &cfg.gammas {
        let spectrum = engine::spectrum(&base.with_gamma(gamma))?;
        let mut rows = Vec::with_capacity(base.dimension());
        for (block, values) in base.blocks.iter().zip(&spectrum.per_block) {
            let mut values = values.clone();
            values.sort_by(f64::total_cmp);
            for (i, v) in values.iter().enumerate() {
                rows.push(vec![block.m.value().to_string(), i.to_string(), num(*v), num(gamma)]);
            }
        }
        let path = out.join(format!("spectrum_gamma_{}.csv", gamma_tag(gamma)));
        files.push(write_csv(&path, &SPECTRUM_HEADER, rows)?);
    }
    Ok(files)
}

/// Free spectrum through the same diagonalisation path as the deformed ones,
/// so that every γ = 0 difference vanishes identically.
fn free_spectrum(base: &BlockSet) -> Result<Spectrum, CliError> {
    Ok(engine::spectrum(&base.with_gamma(0.0))?)
}

/// Heat trace and its Duhamel decomposition on the σ grid, one file per γ.
pub fn cmd_heat(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    prepare(out)?;
    let n = cfg.truncation_n;
    let grid = cfg.sigma_grid()?;
    let base = base_set(cfg, n)?;
    let free = free_spectrum(&base)?;
    let k0: Vec<f64> = engine::map_grid(&grid, |s| heat_trace_deformed(&free, s));
    let mut files = Vec::new();
    for &gamma in &cfg.gammas {
        let set = base.with_gamma(gamma);
        let spectrum = engine::spectrum(&set)?;
        let rows = engine::map_grid(&grid, |s| {
            let kg = heat_trace_deformed(&spectrum, s);
            let d1 = delta1(&set.blocks, s, gamma);
            let d2a = delta2a(&set.blocks, s, gamma);
            let d2b = delta2b(&set.blocks, s, gamma);
            (kg, d1, d2a, d2b)
        });
        let rows = grid.iter().zip(&k0).zip(rows).map(|((&s, &k), (kg, d1, d2a, d2b))| {
            let remainder = kg - k - d1 - d2a - d2b;
            vec![num(s), num(k), num(kg), num(d1), num(d2a), num(d2b), num(remainder), num(tail_bound(n, s))]
        });
        let path = out.join(format!("heat_gamma_{}.csv", gamma_tag(gamma)));
        files.push(write_csv(&path, &HEAT_HEADER, rows)?);
    }
    Ok(files)
}

/// Effective spectral dimension on the σ grid, one file per γ.
pub fn cmd_dseff(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    prepare(out)?;
    let n = cfg.truncation_n;
    let grid = cfg.sigma_grid()?;
    let base = base_set(cfg, n)?;
    let free = free_spectrum(&base)?;
    let d0: Vec<f64> = engine::map_grid(&grid, |s| dseff(&free, s));
    let mut files = Vec::new();
    for &gamma in &cfg.gammas {
        let spectrum = engine::spectrum(&base.with_gamma(gamma))?;
        let cols = engine::map_grid(&grid, |s| (dseff(&spectrum, s), dseff_w2_projection(&base.blocks, s, gamma)));
        let rows = grid.iter().zip(&d0).zip(cols).map(|((&s, &f), (g, w))| vec![num(s), num(f), num(g), num(w)]);
        let path = out.join(format!("dseff_gamma_{}.csv", gamma_tag(gamma)));
        files.push(write_csv(&path, &DSEFF_HEADER, rows)?);
    }
    Ok(files)
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatFit {
    pub window: [f64; 2],
    pub degree: usize,
    pub fit: FitReport,
    /// `A_{2m} = 4π c_m`.
    pub seeley_dewitt: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleComparison {
    pub result: ExtrapolationResult,
    pub oracle: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingReport {
    pub gamma: f64,
    pub truncations: Vec<usize>,
    pub estimate: CouplingEstimate,
    /// `(1/4π) ∫ f² |∇f|²`, the diagonal-approximation scale.
    pub diagonal_scale: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub truncation_n: usize,
    pub heat_coefficients: Vec<HeatFit>,
    pub c0: f64,
    pub c1: f64,
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    /// Limit of `-Δ₂ₐ/γ⁴ = σ Tr(W₂ e^{-σD²})`, oracle `(1/8π) ∫ f⁴`.
    pub w2_constant: OracleComparison,
    /// Limit of `σ Tr(W₁² e^{-σD²})`, oracle `(1/2π) ∫ f² |∇f|²`.
    pub clifford_trace: OracleComparison,
    pub cw1w1: CouplingReport,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn within(grid: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    grid.iter().copied().filter(|&s| s >= lo * (1.0 - 1e-12) && s <= hi * (1.0 + 1e-12)).collect()
}

/// Truncations for the cross-N coupling estimate: about 0.6N, 0.8N and N.
pub fn coupling_truncations(n: usize) -> Vec<usize> {
    let mut ns: Vec<usize> = [0.6, 0.8, 1.0].iter().map(|r| ((r * n as f64).round() as usize).max(1)).collect();
    ns.dedup();
    ns
}

/// Heat coefficients, σ → 0 constants and `C_{W₁W₁}` into `fit.json`.
pub fn cmd_fit(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    prepare(out)?;
    let summary = fit_summary(cfg)?;
    Ok(vec![write_json(&out.join("fit.json"), &summary)?])
}

pub fn fit_summary(cfg: &RunConfig) -> Result<FitSummary, CliError> {
    let n = cfg.truncation_n;
    let grid = cfg.sigma_grid()?;
    let policy = cfg.policy();
    if cfg.fit.windows.is_empty() || cfg.fit.degrees.is_empty() {
        return Err(CliError::Config("fit needs at least one window and one degree".into()));
    }

    let mut heat_coefficients = Vec::new();
    for w in &cfg.fit.windows {
        let sub = within(&grid, w[0], w[1]);
        let series = HeatSeries::tabulate(SeriesLabel::K0, n, &sub, |s| spinheat_core::heat::heat_trace_free(n, s));
        for &degree in &cfg.fit.degrees {
            let fit = fit_heat_coefficients(&series, degree, cfg.tolerances.tail)?;
            let seeley_dewitt = seeley_dewitt(&fit);
            heat_coefficients.push(HeatFit { window: *w, degree, fit, seeley_dewitt });
        }
    }
    let c0 = median(heat_coefficients.iter().map(|h| h.fit.coefficients[0]).collect());
    let c1 = median(heat_coefficients.iter().filter(|h| h.degree >= 1).map(|h| h.fit.coefficients[1]).collect());

    let f = cfg.datum();
    let (quartic, gradient) = scalar_invariants_for(&f)?;
    let set = base_set(cfg, n)?;
    let w2 = HeatSeries::tabulate(SeriesLabel::Derived, n, &grid, |s| s * trace_w2_heat(&set.blocks, s));
    let w1sq = HeatSeries::tabulate(SeriesLabel::Derived, n, &grid, |s| s * trace_w1_squared_heat(&set.blocks, s));
    let w2_constant = OracleComparison { result: extrapolate_sigma_zero(&w2, &policy)?, oracle: quartic / (8.0 * PI) };
    let clifford_trace = OracleComparison { result: extrapolate_sigma_zero(&w1sq, &policy)?, oracle: gradient / (2.0 * PI) };

    let gamma = cfg.gammas.iter().copied().find(|&g| g > 0.0).unwrap_or(1.0);
    let truncations = coupling_truncations(n);
    let sets = truncations.par_iter().map(|&m| base_set(cfg, m)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&BlockSet> = sets.iter().collect();
    let estimate = estimate_cw1w1(&refs, &grid, gamma, &policy)?;
    let cw1w1 = CouplingReport { gamma, truncations, estimate, diagonal_scale: gradient / (4.0 * PI) };

    Ok(FitSummary {
        truncation_n: n,
        heat_coefficients,
        c0,
        c1,
        a0: 4.0 * PI * c0,
        a2: 4.0 * PI * c1,
        w2_constant,
        clifford_trace,
        cw1w1,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub checks: Vec<CheckReport>,
    /// Mutated configurations; each must fail its check.
    pub negative_controls: Vec<CheckReport>,
    pub all_passed: bool,
}

impl ValidationSummary {
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        out.extend(self.negative_controls.iter().filter(|c| c.passed).map(|c| format!("{} (control passed)", c.name)));
        out
    }
}

/// Datum used by the fixed cross-checks and the negative controls.
pub fn reference_datum() -> ScalarDatum {
    ScalarDatum::new(vec![0.0, 1.0, 0.5]).expect("valid datum")
}

/// Smallest truncation `≥ n` at which every σ in `sigmas` obeys the tail rule.
pub fn valid_truncation(n: usize, sigmas: &[f64], tail: f64) -> usize {
    (n.max(1)..).find(|&m| sigmas.iter().all(|&s| in_valid_window(m, s, tail))).expect("unbounded search")
}

type Check<'a> = Box<dyn Fn() -> Result<CheckReport, CliError> + Send + Sync + 'a>;

fn renamed(mut r: CheckReport, name: String) -> CheckReport {
    r.name = name;
    r
}

/// Every validation check plus negative controls, into `validate.json`.
/// Returns a validation error (exit code 1) after writing the report if anything failed.
pub fn cmd_validate(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    prepare(out)?;
    let summary = validation_summary(cfg)?;
    let path = write_json(&out.join("validate.json"), &summary)?;
    if summary.all_passed {
        Ok(vec![path])
    } else {
        Err(CliError::Validation(summary.failures().join(", ")))
    }
}

pub fn validation_summary(cfg: &RunConfig) -> Result<ValidationSummary, CliError> {
    let n = cfg.truncation_n;
    let th = cfg.tolerances.thresholds();
    let f = cfg.datum();
    let gamma = cfg.gammas.iter().copied().find(|&g| g > 0.0).unwrap_or(0.5);
    let small = n.min(20);
    let neg_n = small.max(6);
    let vanishing_sigmas = [0.01, 0.1, 1.0];
    let conv_sigma = 0.1;

    let lo = cfg.fit.windows.iter().map(|w| w[0]).fold(f64::INFINITY, f64::min);
    let hi = cfg.fit.windows.iter().map(|w| w[1]).fold(0.0, f64::max);
    let clifford_grid = if cfg.fit.windows.is_empty() { Vec::new() } else { log_sigma_grid(lo, hi, cfg.sigma.points_per_decade)? };
    let clifford_n = valid_truncation(n, &clifford_grid, cfg.tolerances.tail);

    let set_at = |m: usize, g: f64, datum: &ScalarDatum| -> Result<BlockSet, CliError> {
        let mut d = cfg.deformation(m, g);
        d.f = datum.clone();
        Ok(engine::assemble(&d)?)
    };

    let mut checks: Vec<Check> = vec![
        Box::new(|| Ok(check_spectrum_free(n.min(40), &f, &th)?)),
        Box::new(|| Ok(renamed(check_prop_vanishing(&set_at(n, gamma, &f)?, &vanishing_sigmas, &th), "prop_vanishing/config_f".into()))),
        Box::new(|| {
            let r = check_prop_vanishing(&set_at(n, gamma, &reference_datum())?, &vanishing_sigmas, &th);
            Ok(renamed(r, "prop_vanishing/p1_half_p2".into()))
        }),
        Box::new(|| {
            let g = cfg.gammas.iter().copied().find(|&g| g > 0.0).unwrap_or(0.7);
            let r = check_monolithic_equivalence(n.min(3), g, &f, &th)?;
            Ok(renamed(r, format!("monolithic_equivalence/N={}", n.min(3))))
        }),
        Box::new(|| {
            let r = check_monolithic_equivalence(n.min(4), 0.4, &reference_datum(), &th)?;
            Ok(renamed(r, format!("monolithic_equivalence/N={}", n.min(4))))
        }),
        Box::new(|| {
            let set = set_at(clifford_n, gamma, &f)?;
            Ok(check_clifford_trace(&set, &clifford_grid, &cfg.policy(), &th)?)
        }),
        Box::new(|| Ok(check_azimuthal_symmetry(&set_at(small, gamma, &f)?, &th)?)),
    ];
    for k in 0..10u64 {
        let seed = cfg.seed.wrapping_add(k);
        let (f, set_at, th) = (&f, &set_at, &th);
        checks.push(Box::new(move || {
            let r = check_convention_invariance(&set_at(small, gamma, f)?, conv_sigma, seed, th)?;
            Ok(renamed(r, format!("convention_invariance/seed={seed}")))
        }));
    }

    let controls: Vec<Check> = vec![
        Box::new(|| {
            let set = inject_w1_diagonal(&set_at(neg_n, gamma, &reference_datum())?, cfg.seed, 1e-3);
            Ok(renamed(check_prop_vanishing(&set, &vanishing_sigmas, &th), "prop_vanishing/injected_diagonal".into()))
        }),
        Box::new(|| {
            let set = set_at(neg_n, gamma, &reference_datum())?;
            let mixed = conjugate_w1(&set, sector_mixing(0.4))?;
            let deviation = trace_changes(&set, &mixed, conv_sigma)?;
            let context = CheckContext { n_trunc: neg_n, gamma, f: reference_datum().coefficients().to_vec(), sigmas: vec![conv_sigma], seed: None };
            Ok(CheckReport::new("convention_invariance/sector_mixing", deviation, th.convention, context))
        }),
    ];

    let run = |list: &[Check]| -> Result<Vec<CheckReport>, CliError> {
        let mut reports = list.par_iter().map(|c| c()).collect::<Result<Vec<_>, _>>()?;
        reports.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(reports)
    };
    let checks = run(&checks)?;
    let negative_controls = run(&controls)?;
    let all_passed = checks.iter().all(|c| c.passed) && negative_controls.iter().all(|c| !c.passed);
    Ok(ValidationSummary { checks, negative_controls, all_passed })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Heat,
    Dseff,
    Fit,
    Validate,
}

pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Spectrum => cmd_spectrum(cfg, out),
        Command::Heat => cmd_heat(cfg, out),
        Command::Dseff => cmd_dseff(cfg, out),
        Command::Fit => cmd_fit(cfg, out),
        Command::Validate => cmd_validate(cfg, out),
    }
}
