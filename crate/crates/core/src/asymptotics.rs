//! Small-σ coefficient extraction from tabulated heat series.
//!
//! Fits only ever use σ values that satisfy the truncation-tail rule; a window
//! containing a violating σ is rejected with the offending values listed.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::heat::{delta1, delta2a, delta2b, heat_trace_deformed, heat_trace_free, tail_bound, HeatSeries, Spectrum};
use crate::linalg::{polyfit_weighted, FitReport, FitWindow};
use crate::math::log2;
use crate::operators::BlockSet;
use crate::{Error, Result};

/// Windows, degrees and the convergence threshold used by an extrapolation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtrapolationPolicy {
    pub windows: Vec<(f64, f64)>,
    pub degrees: Vec<usize>,
    /// Relative spread of the intercepts accepted as converged.
    pub rel_threshold: f64,
    /// Tail rule: `tail_bound(N, σ) ≤ tail · K₀(σ)`.
    pub tail: f64,
}

impl Default for ExtrapolationPolicy {
    fn default() -> Self {
        ExtrapolationPolicy {
            windows: alloc::vec![(0.004, 0.02), (0.01, 0.05)],
            degrees: alloc::vec![2, 3],
            rel_threshold: 1e-3,
            tail: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExtrapolationResult {
    pub limit: f64,
    /// Largest minus smallest intercept over all fits.
    pub uncertainty: f64,
    pub windows_used: Vec<FitWindow>,
    pub converged: bool,
}

impl ExtrapolationResult {
    pub fn relative_spread(&self) -> f64 {
        if self.limit == 0.0 {
            if self.uncertainty == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            self.uncertainty / self.limit.abs()
        }
    }
}

/// σ values of `series` that break the tail rule.
pub fn window_violations(series: &HeatSeries, tail: f64) -> Vec<f64> {
    series
        .sigma_grid
        .iter()
        .zip(&series.tail_bounds)
        .filter(|&(&s, &t)| !(s > 0.0 && t <= tail * heat_trace_free(series.n_trunc, s)))
        .map(|(&s, _)| s)
        .collect()
}

fn check_window(n_trunc: usize, sigmas: &[f64], tail: f64) -> Result<()> {
    let bad: Vec<f64> = sigmas
        .iter()
        .copied()
        .filter(|&s| !(s > 0.0 && tail_bound(n_trunc, s) <= tail * heat_trace_free(n_trunc, s)))
        .collect();
    if bad.is_empty() { Ok(()) } else { Err(Error::WindowViolation(bad)) }
}

/// Grid points of `series` inside `[lo, hi]`, as `(σ, value)` columns.
fn restrict(series: &HeatSeries, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
    // Relative slack so that window edges computed as decimal literals keep grid points.
    let (lo, hi) = (lo * (1.0 - 1e-12), hi * (1.0 + 1e-12));
    series
        .sigma_grid
        .iter()
        .zip(&series.values)
        .filter(|&(&s, _)| s >= lo && s <= hi)
        .map(|(&s, &v)| (s, v))
        .unzip()
}

/// Fit `σ K(σ) ≈ c₀ + c₁σ + …` over the whole grid of `series`.
pub fn fit_heat_coefficients(series: &HeatSeries, degree: usize, tail: f64) -> Result<FitReport> {
    let bad = window_violations(series, tail);
    if !bad.is_empty() {
        return Err(Error::WindowViolation(bad));
    }
    let ys: Vec<f64> = series.sigma_grid.iter().zip(&series.values).map(|(s, k)| s * k).collect();
    let w = alloc::vec![1.0; ys.len()];
    polyfit_weighted(&series.sigma_grid, &ys, degree, &w)
}

/// Seeley-DeWitt analogues `A_{2m} = 4π c_m` in two dimensions.
pub fn seeley_dewitt(fit: &FitReport) -> Vec<f64> {
    fit.coefficients.iter().map(|c| 4.0 * PI * c).collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) }
}

/// Polynomial-in-σ fits of `series` per (window, degree); the limit is the
/// median intercept and the uncertainty the full intercept spread.
pub fn extrapolate_sigma_zero(series: &HeatSeries, policy: &ExtrapolationPolicy) -> Result<ExtrapolationResult> {
    if policy.windows.len() < 2 {
        return Err(Error::config("extrapolation needs at least two windows"));
    }
    if policy.degrees.is_empty() {
        return Err(Error::config("extrapolation needs at least one degree"));
    }
    let mut intercepts = Vec::new();
    let mut windows_used = Vec::new();
    for &(lo, hi) in &policy.windows {
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::config("fit window needs 0 < lo < hi"));
        }
        let (xs, ys) = restrict(series, lo, hi);
        check_window(series.n_trunc, &xs, policy.tail)?;
        let w = alloc::vec![1.0; xs.len()];
        for &degree in &policy.degrees {
            let fit = polyfit_weighted(&xs, &ys, degree, &w)?;
            intercepts.push(fit.coefficients[0]);
            if !windows_used.contains(&fit.window) {
                windows_used.push(fit.window);
            }
        }
    }
    let lo = intercepts.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = intercepts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let limit = median(&mut intercepts);
    let mut out = ExtrapolationResult { limit, uncertainty: hi - lo, windows_used, converged: false };
    out.converged = out.relative_spread() <= policy.rel_threshold;
    Ok(out)
}

/// `C_{W₁W₁}` from every truncation in `sets`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CouplingEstimate {
    /// Median over truncations; uncertainty covers the cross-N spread and every per-N spread.
    pub combined: ExtrapolationResult,
    pub per_truncation: Vec<(usize, ExtrapolationResult)>,
    /// Largest minus smallest per-N limit.
    pub cross_n_spread: f64,
}

/// The series `Δ₂ᵦ(σ) / (γ⁴ σ)` of one block set.
pub fn cw1w1_series(set: &BlockSet, grid: &[f64], gamma: f64) -> HeatSeries {
    let g4 = crate::math::powi(gamma, 4);
    HeatSeries::tabulate(crate::heat::SeriesLabel::Derived, set.n_trunc(), grid, |s| {
        delta2b(&set.blocks, s, gamma) / (g4 * s)
    })
}

/// Extrapolate `Δ₂ᵦ(σ)/(γ⁴σ)` to σ → 0 per truncation and report the
/// N-stabilised value. No extrapolation in N is attempted.
pub fn estimate_cw1w1(sets: &[&BlockSet], grid: &[f64], gamma: f64, policy: &ExtrapolationPolicy) -> Result<CouplingEstimate> {
    if sets.len() < 2 {
        return Err(Error::config("C_W1W1 estimate needs at least two truncations"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::config("C_W1W1 estimate needs gamma > 0"));
    }
    let mut per_truncation = Vec::with_capacity(sets.len());
    for set in sets {
        let series = cw1w1_series(set, grid, gamma);
        per_truncation.push((set.n_trunc(), extrapolate_sigma_zero(&series, policy)?));
    }
    let mut limits: Vec<f64> = per_truncation.iter().map(|(_, r)| r.limit).collect();
    let lo = limits.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = limits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cross_n_spread = hi - lo;
    let limit = median(&mut limits);
    let uncertainty = per_truncation.iter().map(|(_, r)| r.uncertainty).fold(cross_n_spread, f64::max);
    let mut windows_used: Vec<FitWindow> = Vec::new();
    for (_, r) in &per_truncation {
        for w in &r.windows_used {
            if !windows_used.contains(w) {
                windows_used.push(*w);
            }
        }
    }
    let mut combined = ExtrapolationResult { limit, uncertainty, windows_used, converged: false };
    combined.converged = combined.relative_spread() <= policy.rel_threshold && per_truncation.iter().all(|(_, r)| r.converged);
    Ok(CouplingEstimate { combined, per_truncation, cross_n_spread })
}

/// Remainders of `K_γ` at one σ for the couplings `γ` and `γ/2`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GammaOrder {
    pub sigma: f64,
    pub gamma: f64,
    /// `K_γ - K₀` at `γ` and `γ/2`.
    pub shift: (f64, f64),
    /// `K_γ - K₀ - Δ₁ - Δ₂ₐ - Δ₂ᵦ` at `γ` and `γ/2`.
    pub remainder: (f64, f64),
    /// `log₂` ratio of the shifts, expected near 4.
    pub p1: f64,
    /// `log₂` ratio of the remainders, expected near 6.
    pub p2: f64,
    /// Propagated eigensolver roundoff in `K_γ`.
    pub noise_floor: f64,
    /// Some difference is below `100 ×` the noise floor.
    pub inconclusive: bool,
}

/// Shift and remainder of the deformed trace at one coupling.
fn trace_shifts(base: &BlockSet, k0: f64, sigma: f64, gamma: f64) -> Result<(f64, f64, f64, f64)> {
    let set = base.with_gamma(gamma);
    let spectrum = Spectrum::compute(&set)?;
    let kg = heat_trace_deformed(&spectrum, sigma);
    let shift = kg - k0;
    let remainder = shift - delta1(&set.blocks, sigma, gamma) - delta2a(&set.blocks, sigma, gamma) - delta2b(&set.blocks, sigma, gamma);
    let qnorm = set.blocks.iter().map(|b| b.q_gamma.max_abs()).fold(0.0, f64::max);
    // An eigenvalue error of 1e-12 ‖Q‖ moves K_γ by at most σ · 1e-12 ‖Q‖ · K_γ.
    let floor = 1e-12 * qnorm * sigma * kg;
    Ok((shift, remainder, floor, kg))
}

/// Empirical order in `γ` of `K_γ - K₀` and of the Duhamel remainder,
/// comparing `γ` against `γ/2` at fixed σ.
pub fn gamma_order_check(base: &BlockSet, sigma: f64, gamma: f64) -> Result<GammaOrder> {
    if !(sigma > 0.0 && gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::config("order check needs sigma > 0 and gamma >= 0"));
    }
    let k0 = heat_trace_deformed(&Spectrum::compute(&base.with_gamma(0.0))?, sigma);
    let (s1, r1, n1, _) = trace_shifts(base, k0, sigma, gamma)?;
    let (s2, r2, n2, _) = trace_shifts(base, k0, sigma, 0.5 * gamma)?;
    let noise_floor = n1.max(n2);
    let p1 = log2(s1 / s2);
    let p2 = log2(r1 / r2);
    let smallest = s1.abs().min(s2.abs()).min(r1.abs()).min(r2.abs());
    let resolved = smallest >= 100.0 * noise_floor;
    let inconclusive = !resolved || !p1.is_finite() || !p2.is_finite();
    Ok(GammaOrder { sigma, gamma, shift: (s1, s2), remainder: (r1, r2), p1, p2, noise_floor, inconclusive })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::{log_sigma_grid, SeriesLabel};
    use crate::operators::{DeformationConfig, ScalarDatum};

    #[test]
    fn synthetic_laurent_series_is_recovered() {
        let grid = log_sigma_grid(0.005, 0.05, 30).unwrap();
        let series = HeatSeries::tabulate(SeriesLabel::K0, 200, &grid, |s| 3.0 / s - 0.25);
        let fit = fit_heat_coefficients(&series, 1, 1e-10).unwrap();
        assert!((fit.coefficients[0] - 3.0).abs() < 1e-12);
        assert!((fit.coefficients[1] + 0.25).abs() < 1e-10);
        assert!((seeley_dewitt(&fit)[0] - 12.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn violating_grid_is_rejected_with_offenders() {
        let grid = log_sigma_grid(0.001, 0.05, 10).unwrap();
        let series = HeatSeries::tabulate(SeriesLabel::K0, 40, &grid, |s| heat_trace_free(40, s));
        match fit_heat_coefficients(&series, 2, 1e-10) {
            Err(Error::WindowViolation(bad)) => {
                assert!(!bad.is_empty());
                assert!(bad.iter().all(|&s| tail_bound(40, s) > 1e-10 * heat_trace_free(40, s)));
                assert!(bad.iter().all(|&s| s < 0.02));
            }
            other => panic!("expected a window violation, got {other:?}"),
        }
    }

    #[test]
    fn constant_series_has_zero_spread() {
        let grid = log_sigma_grid(0.004, 0.05, 40).unwrap();
        let series = HeatSeries::tabulate(SeriesLabel::Derived, 150, &grid, |_| 0.7);
        let r = extrapolate_sigma_zero(&series, &ExtrapolationPolicy::default()).unwrap();
        assert!((r.limit - 0.7).abs() < 1e-13);
        assert!(r.uncertainty < 1e-12);
        assert!(r.converged);
        assert_eq!(r.windows_used.len(), 2);
    }

    #[test]
    fn extrapolation_needs_two_windows() {
        let grid = log_sigma_grid(0.004, 0.05, 40).unwrap();
        let series = HeatSeries::tabulate(SeriesLabel::Derived, 150, &grid, |_| 1.0);
        let policy = ExtrapolationPolicy { windows: alloc::vec![(0.01, 0.05)], ..Default::default() };
        assert!(extrapolate_sigma_zero(&series, &policy).is_err());
    }

    #[test]
    fn inconsistent_fits_are_flagged_not_fatal() {
        let grid = log_sigma_grid(0.004, 0.05, 40).unwrap();
        // Non-polynomial behaviour that the two windows resolve differently.
        let series = HeatSeries::tabulate(SeriesLabel::Derived, 150, &grid, libm::sqrt);
        let r = extrapolate_sigma_zero(&series, &ExtrapolationPolicy::default()).unwrap();
        assert!(!r.converged);
        assert!(r.uncertainty > 0.0);
    }

    #[test]
    fn zero_coupling_gives_identically_zero_shifts() {
        let cfg = DeformationConfig::new(6, 0.0, ScalarDatum::cos_theta()).unwrap();
        let set = BlockSet::assemble(&cfg).unwrap();
        let r = gamma_order_check(&set, 0.1, 0.0).unwrap();
        assert_eq!(r.shift, (0.0, 0.0));
        assert_eq!(r.remainder, (0.0, 0.0));
        assert!(r.inconclusive);
    }
}
