//! Independent oracles and cross-checks.
//!
//! Every check returns a [`CheckReport`] whose `passed` flag is exactly
//! `max_deviation <= threshold`, with thresholds taken from one [`Thresholds`]
//! table. Seeded checks use ChaCha8, so reports are reproducible bit for bit.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::asymptotics::{extrapolate_sigma_zero, ExtrapolationPolicy};
use crate::basis::{azimuthal_indices, basis_dimension, enumerate_block, gauss_legendre_rule, wigner_d_explicit, BasisIndex};
use crate::heat::{delta2a, delta2b, heat_trace_deformed, heat_trace_free, trace_w1_heat, trace_w1_squared_heat, HeatSeries, SeriesLabel, Spectrum};
use crate::linalg::{eigvalsh, DenseMatrix};
use crate::math::{acos, cos, sin, sqrt};
use crate::operators::{scalar_invariants_for, BlockSet, DeformationConfig, ScalarDatum, SpectralBlock};
use crate::{HalfInt, Result};

/// Largest truncation at which the free spectrum is counted exactly.
pub const MAX_SPECTRUM_CHECK_N: usize = 40;
/// Largest truncation accepted by the unblocked assembly.
pub const MAX_MONOLITHIC_N: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Thresholds {
    pub spectrum: f64,
    pub vanishing: f64,
    pub convention: f64,
    pub monolithic: f64,
    pub clifford: f64,
    pub symmetry: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            spectrum: 1e-10,
            vanishing: 1e-14,
            convention: 1e-12,
            monolithic: 1e-10,
            clifford: 1e-3,
            symmetry: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckContext {
    pub n_trunc: usize,
    pub gamma: f64,
    pub f: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub seed: Option<u64>,
}

impl CheckContext {
    fn of(set: &BlockSet) -> Self {
        CheckContext {
            n_trunc: set.n_trunc(),
            gamma: set.gamma(),
            f: set.cfg.f.coefficients().to_vec(),
            sigmas: Vec::new(),
            seed: None,
        }
    }

    fn sigmas(mut self, sigmas: &[f64]) -> Self {
        self.sigmas = sigmas.to_vec();
        self
    }

    fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckReport {
    pub name: String,
    pub max_deviation: f64,
    pub threshold: f64,
    pub passed: bool,
    pub context: CheckContext,
}

impl CheckReport {
    pub fn new(name: &str, max_deviation: f64, threshold: f64, context: CheckContext) -> Self {
        CheckReport {
            name: name.into(),
            max_deviation,
            threshold,
            // NaN deviations never pass.
            passed: max_deviation <= threshold,
            context,
        }
    }
}

/// Count of eigenvalues nearest to each `n²`, `n = 1..=n_max`; index 0 counts
/// values outside that range.
pub fn level_counts(values: impl Iterator<Item = f64>, n_max: usize) -> (Vec<usize>, f64) {
    let mut counts = alloc::vec![0usize; n_max + 1];
    let mut deviation = 0.0f64;
    for v in values {
        let n = libm::round(sqrt(v.max(0.0))) as usize;
        let slot = if (1..=n_max).contains(&n) { n } else { 0 };
        counts[slot] += 1;
        deviation = deviation.max((v - (n * n) as f64).abs());
    }
    (counts, deviation)
}

/// Eigenvalues of the assembled `Q₀` are `n²` with multiplicity `4n`.
pub fn check_spectrum_free(n_trunc: usize, f: &ScalarDatum, thresholds: &Thresholds) -> Result<CheckReport> {
    if n_trunc > MAX_SPECTRUM_CHECK_N {
        return Err(crate::Error::config("free-spectrum check is limited to N <= 40"));
    }
    let set = BlockSet::assemble(&DeformationConfig::new(n_trunc, 0.0, f.clone())?)?;
    let spectrum = Spectrum::compute(&set)?;
    let (counts, mut deviation) = level_counts(spectrum.values(), n_trunc);
    if counts[0] != 0 || (1..=n_trunc).any(|n| counts[n] != 4 * n) {
        deviation = f64::INFINITY;
    }
    Ok(CheckReport::new("spectrum_free", deviation, thresholds.spectrum, CheckContext::of(&set)))
}

/// `max_σ |Tr(W₁ e^{-σD²})| / Tr(e^{-σD²})`.
pub fn check_prop_vanishing(set: &BlockSet, sigmas: &[f64], thresholds: &Thresholds) -> CheckReport {
    let deviation = sigmas
        .iter()
        .map(|&s| (trace_w1_heat(&set.blocks, s) / heat_trace_free(set.n_trunc(), s)).abs())
        .fold(0.0, f64::max);
    CheckReport::new("prop_vanishing", deviation, thresholds.vanishing, CheckContext::of(set).sigmas(sigmas))
}

/// Copy of `set` with seeded values of size `amplitude` added to the diagonal of every `W₁`.
pub fn inject_w1_diagonal(set: &BlockSet, seed: u64, amplitude: f64) -> BlockSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = set.clone();
    for b in &mut out.blocks {
        for a in 0..b.size() {
            b.w1[(a, a)] += amplitude * rng.random_range(0.5..1.0);
        }
        b.set_gamma(b.gamma);
    }
    out
}

/// Replace each block's `W₁` by `R W₁ Rᵀ`; `W₂` and `D²` are left untouched.
pub fn conjugate_w1(set: &BlockSet, mut transform: impl FnMut(&SpectralBlock) -> DenseMatrix) -> Result<BlockSet> {
    let mut out = set.clone();
    for b in &mut out.blocks {
        let r = transform(b);
        let mut w1 = r.matmul(&b.w1)?.matmul(&r.transpose())?;
        // Restore exact symmetry lost to rounding in the products.
        let n = w1.rows();
        for i in 0..n {
            for k in 0..i {
                let v = 0.5 * (w1[(i, k)] + w1[(k, i)]);
                w1[(i, k)] = v;
                w1[(k, i)] = v;
            }
        }
        b.w1 = w1;
        b.set_gamma(b.gamma);
    }
    Ok(out)
}

/// Seeded `±1` per spin sector of every block, as a diagonal matrix.
pub fn sector_signs(seed: u64) -> impl FnMut(&SpectralBlock) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    move |b| {
        let nj = b.n_j();
        let plus = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let minus = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let diag: Vec<f64> = (0..2 * nj).map(|a| if a < nj { plus } else { minus }).collect();
        DenseMatrix::from_diagonal(&diag)
    }
}

/// Rotation by `(k + 1) · angle` within each pair `(+1/2, j_k)`, `(-1/2, j_k)`.
/// Commutes with `D²` but mixes the spin sectors; the `j`-dependent angle keeps
/// it from commuting with `W₂` even when both sectors carry the same `W₂`.
pub fn sector_mixing(angle: f64) -> impl FnMut(&SpectralBlock) -> DenseMatrix {
    move |b| {
        let nj = b.n_j();
        let mut r = DenseMatrix::identity(2 * nj);
        for k in 0..nj {
            let (c, s) = (cos((k + 1) as f64 * angle), sin((k + 1) as f64 * angle));
            r[(k, k)] = c;
            r[(k, nj + k)] = -s;
            r[(nj + k, k)] = s;
            r[(nj + k, nj + k)] = c;
        }
        r
    }
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }
}

/// Largest relative change of `K_γ`, `Δ₂ₐ`, `Δ₂ᵦ` at `sigma` between two block sets.
pub fn trace_changes(reference: &BlockSet, other: &BlockSet, sigma: f64) -> Result<f64> {
    let gamma = reference.gamma();
    let k_ref = heat_trace_deformed(&Spectrum::compute(reference)?, sigma);
    let k_other = heat_trace_deformed(&Spectrum::compute(other)?, sigma);
    let changes = [
        relative_change(k_ref, k_other),
        relative_change(delta2a(&reference.blocks, sigma, gamma), delta2a(&other.blocks, sigma, gamma)),
        relative_change(delta2b(&reference.blocks, sigma, gamma), delta2b(&other.blocks, sigma, gamma)),
    ];
    Ok(changes.into_iter().fold(0.0, f64::max))
}

/// Traces are unchanged when `W₁` is conjugated by seeded per-sector signs.
pub fn check_convention_invariance(set: &BlockSet, sigma: f64, seed: u64, thresholds: &Thresholds) -> Result<CheckReport> {
    let conjugated = conjugate_w1(set, sector_signs(seed))?;
    let deviation = trace_changes(set, &conjugated, sigma)?;
    let context = CheckContext::of(set).sigmas(&[sigma]).seed(seed);
    Ok(CheckReport::new("convention_invariance", deviation, thresholds.convention, context))
}

/// `Φ_{s,j,m}` at `x = cos θ` from the explicit Wigner sum.
fn phi_explicit(b: &BasisIndex, x: f64) -> f64 {
    sqrt((2.0 * b.j.value() + 1.0) * 0.5) * wigner_d_explicit(b.j, b.m, -b.s, acos(x))
}

/// The full `Q_γ` as a real symmetric embedding `[[A, -B], [B, A]]` of the
/// Hermitian matrix `A + iB`, integrated on a Gauss-Legendre × uniform grid
/// with the azimuthal factors kept explicit.
pub fn monolithic_embedding(n_trunc: usize, gamma: f64, f: &ScalarDatum) -> Result<DenseMatrix> {
    let mut basis = Vec::with_capacity(basis_dimension(n_trunc));
    for m in azimuthal_indices(n_trunc) {
        basis.extend(enumerate_block(n_trunc, m)?);
    }
    let dim = basis.len();
    let rule = gauss_legendre_rule(2 * n_trunc + 4 * f.degree() + 10)?;
    let k_phi = 4 * n_trunc + 9;
    let phis: Vec<f64> = (0..k_phi).map(|k| 2.0 * PI * k as f64 / k_phi as f64).collect();
    let tables: Vec<Vec<f64>> = basis.iter().map(|b| rule.nodes().iter().map(|&x| phi_explicit(b, x)).collect()).collect();
    let g2 = gamma * gamma;
    let g4 = g2 * g2;
    // Spinor potential: h σ_x on the two spin components plus f⁴/4 on both.
    let h: Vec<f64> = rule.nodes().iter().map(|&x| f.commutator_profile(x)).collect();
    let quartic: Vec<f64> = rule
        .nodes()
        .iter()
        .map(|&x| {
            let v = f.value(x);
            0.25 * v * v * v * v
        })
        .collect();
    let mut re = DenseMatrix::zeros(dim, dim);
    let mut im = DenseMatrix::zeros(dim, dim);
    for a in 0..dim {
        for c in a..dim {
            let (ba, bc) = (&basis[a], &basis[c]);
            let potential: &[f64] = if ba.s == bc.s { &quartic } else { &h };
            let coupling = if ba.s == bc.s { g4 } else { g2 };
            let polar: f64 = (0..rule.len()).map(|i| rule.weights()[i] * tables[a][i] * potential[i] * tables[c][i]).sum();
            // (1/2π) Σ_k Δφ e^{i(m_c - m_a)φ_k}
            let dm = (bc.m - ba.m).value();
            let (mut azi_re, mut azi_im) = (0.0, 0.0);
            for &p in &phis {
                azi_re += cos(dm * p);
                azi_im += sin(dm * p);
            }
            azi_re /= k_phi as f64;
            azi_im /= k_phi as f64;
            let mut vre = coupling * polar * azi_re;
            let vim = coupling * polar * azi_im;
            if a == c {
                vre += ba.d2_value() as f64;
            }
            re[(a, c)] = vre;
            re[(c, a)] = vre;
            im[(a, c)] = vim;
            im[(c, a)] = -vim;
        }
    }
    Ok(DenseMatrix::from_fn(2 * dim, 2 * dim, |r, c| {
        let (ri, rb) = (r % dim, r / dim);
        let (ci, cb) = (c % dim, c / dim);
        match (rb, cb) {
            (0, 0) | (1, 1) => re[(ri, ci)],
            (0, 1) => -im[(ri, ci)],
            _ => im[(ri, ci)],
        }
    }))
}

/// Sorted spectrum of the unblocked operator against the union of block spectra.
pub fn check_monolithic_equivalence(n_trunc: usize, gamma: f64, f: &ScalarDatum, thresholds: &Thresholds) -> Result<CheckReport> {
    if n_trunc > MAX_MONOLITHIC_N {
        return Err(crate::Error::config("monolithic assembly is limited to N <= 4"));
    }
    let set = BlockSet::assemble(&DeformationConfig::new(n_trunc, gamma, f.clone())?)?;
    let mut blocked: Vec<f64> = Spectrum::compute(&set)?.values().collect();
    blocked.sort_by(f64::total_cmp);
    let doubled = eigvalsh(&monolithic_embedding(n_trunc, gamma, f)?)?;
    let full: Vec<f64> = doubled.iter().step_by(2).copied().collect();
    let mut deviation = if full.len() == blocked.len() { 0.0f64 } else { f64::INFINITY };
    for (x, y) in full.iter().zip(&blocked) {
        deviation = deviation.max((x - y).abs());
    }
    // The embedding pairs eigenvalues exactly; a broken pair is a failure.
    for pair in doubled.chunks(2) {
        deviation = deviation.max((pair[0] - pair[1]).abs());
    }
    Ok(CheckReport::new("monolithic_equivalence", deviation, thresholds.monolithic, CheckContext::of(&set)))
}

/// `σ Tr(W₁² e^{-σD²})` extrapolated to σ → 0 against `(1/4π) · 2 ∫ f²|∇f|²`.
pub fn check_clifford_trace(set: &BlockSet, grid: &[f64], policy: &ExtrapolationPolicy, thresholds: &Thresholds) -> Result<CheckReport> {
    let series = HeatSeries::tabulate(SeriesLabel::Derived, set.n_trunc(), grid, |s| s * trace_w1_squared_heat(&set.blocks, s));
    let result = extrapolate_sigma_zero(&series, policy)?;
    let (_, gradient) = scalar_invariants_for(&set.cfg.f)?;
    let target = 2.0 * gradient / (4.0 * PI);
    let deviation = if target == 0.0 { result.limit.abs() } else { (result.limit - target).abs() / target.abs() };
    Ok(CheckReport::new("clifford_trace", deviation, thresholds.clifford, CheckContext::of(set).sigmas(grid)))
}

/// Blocks `m` and `-m` are isospectral.
pub fn check_azimuthal_symmetry(set: &BlockSet, thresholds: &Thresholds) -> Result<CheckReport> {
    let mut deviation = 0.0f64;
    for b in set.blocks.iter().filter(|b| b.m > HalfInt::ZERO) {
        let Some(mirror) = set.block(-b.m) else {
            deviation = f64::INFINITY;
            continue;
        };
        let x = b.eigenvalues(&set.cfg.tol)?;
        let y = mirror.eigenvalues(&set.cfg.tol)?;
        if x.len() != y.len() {
            deviation = f64::INFINITY;
            continue;
        }
        for (u, v) in x.iter().zip(&y) {
            deviation = deviation.max((u - v).abs());
        }
    }
    Ok(CheckReport::new("azimuthal_symmetry", deviation, thresholds.symmetry, CheckContext::of(set)))
}
