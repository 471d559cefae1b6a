//! Heat traces, Duhamel corrections through order `γ⁴`, and the effective
//! spectral dimension.
//!
//! Every reduction runs over blocks in ascending `m` and over basis states in
//! block order, accumulating with [`CompensatedSum`].

use alloc::vec::Vec;

use crate::math::{exp, expm1, powi};
use crate::operators::{BlockSet, SpectralBlock};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// `Σ_{n=1}^{N} 4n e^{-σn²}`, the truncated trace of `e^{-σD²}`.
pub fn heat_trace_free(n_trunc: usize, sigma: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for n in 1..=n_trunc {
        let nf = n as f64;
        acc.add(4.0 * nf * exp(-sigma * nf * nf));
    }
    acc.value()
}

/// Upper bound on the omitted levels `Σ_{n>N} 4n e^{-σn²}`.
pub fn tail_bound(n_trunc: usize, sigma: f64) -> f64 {
    let n = n_trunc as f64;
    let n1 = n + 1.0;
    2.0 * exp(-sigma * n * n) / sigma + 4.0 * n1 * exp(-sigma * n1 * n1)
}

/// Valid-window rule for asymptotics: the tail is negligible against `K₀`.
pub fn in_valid_window(n_trunc: usize, sigma: f64, rel_tol: f64) -> bool {
    sigma > 0.0 && tail_bound(n_trunc, sigma) <= rel_tol * heat_trace_free(n_trunc, sigma)
}

/// Below this `|z|` the φ-functions use their Taylor series.
pub const PHI_SERIES_SWITCH: f64 = 0.05;
const PHI_SERIES_TERMS: usize = 10;

/// `φ₁(z) = (e^z - 1)/z`.
pub fn phi1(z: f64) -> Result<f64> {
    if z > 700.0 || z.is_nan() {
        return Err(Error::Phi2Overflow(z));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    Ok(expm1(z) / z)
}

/// `φ₂(z) = (e^z - 1 - z)/z²`, the second divided difference of `exp` on
/// `{0, 0, z}`.
pub fn phi2(z: f64) -> Result<f64> {
    if z > 700.0 || z.is_nan() {
        return Err(Error::Phi2Overflow(z));
    }
    if z.abs() < PHI_SERIES_SWITCH {
        // Σ z^k/(k+2)!, Horner from the top term.
        let mut acc = 0.0;
        for k in (0..PHI_SERIES_TERMS).rev() {
            let denom: f64 = (1..=k + 2).map(|i| i as f64).product();
            acc = acc * z + 1.0 / denom;
        }
        return Ok(acc);
    }
    Ok((expm1(z) - z) / (z * z))
}

/// `F(μa, μb, σ) = ∫₀^σ ∫₀^s e^{-(σ-s+r)μa} e^{-(s-r)μb} dr ds
///              = σ² e^{-σμa} φ₂(-σ(μb - μa))`.
///
/// For `μb < μa` the equivalent form `σ² e^{-σμb} (φ₁(-z) - φ₂(-z))`,
/// `z = σ(μa - μb)`, avoids the growing exponential.
pub fn duhamel_f(mu_a: f64, mu_b: f64, sigma: f64) -> f64 {
    let delta = mu_b - mu_a;
    let s2 = sigma * sigma;
    if delta >= 0.0 {
        s2 * exp(-sigma * mu_a) * phi2(-sigma * delta).expect("non-positive argument")
    } else {
        let w = sigma * delta;
        let p1 = phi1(w).expect("negative argument");
        let p2 = phi2(w).expect("negative argument");
        s2 * exp(-sigma * mu_b) * (p1 - p2)
    }
}

/// `Σ_a A_aa e^{-σμ_a}` over all blocks for a chosen diagonal source.
fn diagonal_trace(blocks: &[SpectralBlock], sigma: f64, pick: impl Fn(&SpectralBlock, usize) -> f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for b in blocks {
        for (a, &mu) in b.d2_diag.iter().enumerate() {
            let v = pick(b, a);
            if v != 0.0 {
                acc.add(v * exp(-sigma * mu as f64));
            }
        }
    }
    acc.value()
}

/// `Tr(W₁ e^{-σD²})`.
pub fn trace_w1_heat(blocks: &[SpectralBlock], sigma: f64) -> f64 {
    diagonal_trace(blocks, sigma, |b, a| b.w1[(a, a)])
}

/// `Tr(W₂ e^{-σD²})`.
pub fn trace_w2_heat(blocks: &[SpectralBlock], sigma: f64) -> f64 {
    diagonal_trace(blocks, sigma, |b, a| b.w2[(a, a)])
}

/// Visit the nonzero `W₁` entries with `|j_a - j_c|` inside the declared band.
fn for_each_w1_entry(block: &SpectralBlock, mut visit: impl FnMut(usize, usize, f64)) {
    let nj = block.n_j();
    let band = block.w1_band;
    for a in 0..block.size() {
        let ka = a % nj;
        let lo = ka.saturating_sub(band);
        let hi = (ka + band).min(nj - 1);
        for offset in [0, nj] {
            for c in offset + lo..=offset + hi {
                let w = block.w1[(a, c)];
                if w != 0.0 {
                    visit(a, c, w);
                }
            }
        }
    }
}

/// `Tr(W₁² e^{-σD²}) = Σ_{a,c} (W₁)²_{ac} e^{-σμ_a}`.
pub fn trace_w1_squared_heat(blocks: &[SpectralBlock], sigma: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for b in blocks {
        for_each_w1_entry(b, |a, _, w| acc.add(w * w * exp(-sigma * b.d2_diag[a] as f64)));
    }
    acc.value()
}

/// `Δ₁(σ) = -γ²σ Tr(W₁ e^{-σD²})`.
pub fn delta1(blocks: &[SpectralBlock], sigma: f64, gamma: f64) -> f64 {
    -gamma * gamma * sigma * trace_w1_heat(blocks, sigma)
}

/// `Δ₂ₐ(σ) = -γ⁴σ Tr(W₂ e^{-σD²})`.
pub fn delta2a(blocks: &[SpectralBlock], sigma: f64, gamma: f64) -> f64 {
    -powi(gamma, 4) * sigma * trace_w2_heat(blocks, sigma)
}

/// `Δ₂ᵦ(σ) = γ⁴ Σ_{a,c} (W₁)²_{ac} F(μ_a, μ_c, σ)`; non-negative term by term.
pub fn delta2b(blocks: &[SpectralBlock], sigma: f64, gamma: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for b in blocks {
        for_each_w1_entry(b, |a, c, w| {
            acc.add(w * w * duhamel_f(b.d2_diag[a] as f64, b.d2_diag[c] as f64, sigma));
        });
    }
    powi(gamma, 4) * acc.value()
}

/// Eigenvalues of every block's `q_gamma`, cached for σ sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub gamma: f64,
    pub per_block: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn compute(set: &BlockSet) -> Result<Self> {
        let per_block = set.blocks.iter().map(|b| b.eigenvalues(&set.cfg.tol)).collect::<Result<Vec<_>>>()?;
        Ok(Spectrum { gamma: set.gamma(), per_block })
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        self.per_block.iter().flatten().copied()
    }

    pub fn min(&self) -> f64 {
        self.values().fold(f64::INFINITY, f64::min)
    }
}

/// `K_γ(σ) = Σ_ν e^{-σν}`.
pub fn heat_trace_deformed(spectrum: &Spectrum, sigma: f64) -> f64 {
    spectrum.values().map(|v| exp(-sigma * v)).collect::<CompensatedSum>().value()
}

/// `2σ Σ ν e^{-σν} / Σ e^{-σν}`, the exact `-2 ∂ log K / ∂ log σ`.
pub fn dseff_from_values<I: Iterator<Item = (f64, f64)> + Clone>(weighted: I, sigma: f64) -> f64 {
    // Items are (eigenvalue, multiplicity); shift by the minimum for large σ.
    let floor = weighted.clone().map(|(v, _)| v).fold(f64::INFINITY, f64::min);
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for (v, mult) in weighted {
        let e = mult * exp(-sigma * (v - floor));
        num.add(v * e);
        den.add(e);
    }
    2.0 * sigma * num.value() / den.value()
}

/// Effective spectral dimension of the deformed spectrum.
pub fn dseff(spectrum: &Spectrum, sigma: f64) -> f64 {
    dseff_from_values(spectrum.values().map(|v| (v, 1.0)), sigma)
}

/// Effective spectral dimension of the free truncated spectrum.
pub fn dseff_free(n_trunc: usize, sigma: f64) -> f64 {
    dseff_from_values((1..=n_trunc).map(|n| ((n * n) as f64, 4.0 * n as f64)), sigma)
}

/// Spectral-dimension shift produced by the `W₂` sector alone: `d_s,eff` of
/// the surrogate trace `K₀ + Δ₂ₐ` minus `d_s,eff` of `K₀`, both summed over
/// the same basis so that the shift vanishes identically at `γ = 0`.
pub fn dseff_w2_projection(blocks: &[SpectralBlock], sigma: f64, gamma: f64) -> f64 {
    let g4 = powi(gamma, 4);
    // K_s = Σ_a e^{-σμ}(1 - γ⁴σ w_a),  -σ K_s' = Σ_a σ e^{-σμ}(μ(1 - γ⁴σ w_a) + γ⁴ w_a).
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    let mut num0 = CompensatedSum::new();
    let mut den0 = CompensatedSum::new();
    for b in blocks {
        for (a, &mu) in b.d2_diag.iter().enumerate() {
            let mu = mu as f64;
            let w = b.w2[(a, a)];
            let e = exp(-sigma * mu);
            num.add(e * (mu * (1.0 - g4 * sigma * w) + g4 * w));
            den.add(e * (1.0 - g4 * sigma * w));
            num0.add(e * mu);
            den0.add(e);
        }
    }
    2.0 * sigma * (num.value() / den.value() - num0.value() / den0.value())
}

/// What a [`HeatSeries`] tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SeriesLabel {
    K0,
    Kgamma,
    Delta1,
    Delta2a,
    Delta2b,
    Dseff,
    /// Any derived quantity, e.g. `σ Tr(W₂ e^{-σD²})`.
    Derived,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeatSeries {
    pub label: SeriesLabel,
    pub n_trunc: usize,
    pub sigma_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub tail_bounds: Vec<f64>,
}

impl HeatSeries {
    pub fn tabulate(label: SeriesLabel, n_trunc: usize, grid: &[f64], mut value: impl FnMut(f64) -> f64) -> Self {
        HeatSeries {
            label,
            n_trunc,
            sigma_grid: grid.to_vec(),
            values: grid.iter().map(|&s| value(s)).collect(),
            tail_bounds: grid.iter().map(|&s| tail_bound(n_trunc, s)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.sigma_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_grid.is_empty()
    }
}

/// Log-spaced grid `min · 10^{k/ppd}` up to `max`.
pub fn log_sigma_grid(min: f64, max: f64, points_per_decade: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min && min.is_finite() && max.is_finite()) || points_per_decade == 0 {
        return Err(Error::config("sigma grid needs 0 < min < max and a positive density"));
    }
    let ppd = points_per_decade as f64;
    let decades = libm::log10(max / min);
    let count = libm::floor(decades * ppd + 1e-9) as usize + 1;
    Ok((0..count).map(|k| min * libm::pow(10.0, k as f64 / ppd)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{DeformationConfig, ScalarDatum};

    #[test]
    fn free_trace_limits() {
        let v = heat_trace_free(50, 10.0);
        assert!((v / (4.0 * exp(-10.0)) - 1.0).abs() < 1e-12);
        let n = 30;
        assert!((heat_trace_free(n, 1e-12) - (2 * n * (n + 1)) as f64).abs() < 1e-6);
        // 2/σ - 1/3 - σ/30 - σ²/126 at σ = 0.01
        let k = heat_trace_free(200, 0.01);
        assert!((k - (200.0 - 1.0 / 3.0)).abs() < 0.01 + tail_bound(200, 0.01));
        let series = 200.0 - 1.0 / 3.0 - 0.01 / 30.0 - 1e-4 / 126.0;
        assert!((k - series).abs() < 1e-8, "{k} vs {series}");
    }

    #[test]
    fn tail_bound_dominates_direct_sum() {
        let direct: f64 = (6..=200).map(|n| 4.0 * n as f64 * exp(-0.5 * (n * n) as f64)).sum();
        assert!(tail_bound(5, 0.5) >= direct);
        assert!(tail_bound(100, 0.01) < 1e-38);
        let lead = 2.0 * exp(-100.0) / 0.01;
        assert!(tail_bound(100, 0.01) >= lead && tail_bound(100, 0.01) <= 1.3 * lead);
        for n in 1..40 {
            assert!(tail_bound(n + 1, 0.02) < tail_bound(n, 0.02));
        }
    }

    #[test]
    fn phi2_values() {
        assert_eq!(phi2(0.0).unwrap(), 0.5);
        assert!((phi2(-1.0).unwrap() - exp(-1.0)).abs() < 1e-16);
        assert!((phi2(-1e-9).unwrap() - (0.5 - 1e-9 / 6.0)).abs() < 1e-16);
        assert!(matches!(phi2(701.0), Err(Error::Phi2Overflow(_))));
        // Both branches near the series switch against 40-digit references.
        for (z, want) in [(PHI_SERIES_SWITCH, 0.508_438_550_409_615_8), (-PHI_SERIES_SWITCH, 0.491_769_800_285_603_6)] {
            for v in [phi2(z * (1.0 - 1e-13)).unwrap(), phi2(z * (1.0 + 1e-13)).unwrap()] {
                assert!((v - want).abs() < 1e-14 * want, "{z}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn duhamel_kernel_closed_forms() {
        let mu = 3.7;
        let s = 0.4;
        assert!((duhamel_f(mu, mu, s) - s * s * exp(-s * mu) / 2.0).abs() < 1e-16);
        assert!((duhamel_f(0.0, 1.0, 1.0) - exp(-1.0)).abs() < 1e-15);
        // Swap-symmetric sum is the first divided difference σ (e^{-σa} - e^{-σb})/(b - a).
        let (a, b) = (2.0, 7.5);
        let sum = duhamel_f(a, b, s) + duhamel_f(b, a, s);
        let want = s * (exp(-s * a) - exp(-s * b)) / (b - a);
        assert!((sum - want).abs() < 1e-15 * want);
        assert!(duhamel_f(14400.0, 1.0, 1.0) >= 0.0);
    }

    #[test]
    fn log_grid() {
        let g = log_sigma_grid(0.01, 1.0, 40).unwrap();
        assert_eq!(g.len(), 81);
        assert!((g[80] - 1.0).abs() < 1e-14);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(log_sigma_grid(0.0, 1.0, 10).is_err());
    }

    #[test]
    fn undeformed_trace_matches_closed_sum() {
        let cfg = DeformationConfig::new(12, 0.0, ScalarDatum::cos_theta()).unwrap();
        let set = BlockSet::assemble(&cfg).unwrap();
        let spec = Spectrum::compute(&set).unwrap();
        for s in [0.01, 0.1, 1.0] {
            let k = heat_trace_deformed(&spec, s);
            let k0 = heat_trace_free(12, s);
            assert!((k - k0).abs() <= 1e-12 * k0);
            assert!((dseff(&spec, s) - dseff_free(12, s)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_level_dimension() {
        let v = dseff_from_values(core::iter::once((3.0, 1.0)), 0.7);
        assert!((v - 2.0 * 0.7 * 3.0).abs() < 1e-15);
    }
}
