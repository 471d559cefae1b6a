//! Truncated spin-weighted harmonic basis on the unit sphere.
//!
//! A spinor component of spin weight `s = ±1/2` and azimuthal index `m` is
//! expanded in the profiles
//!
//! ```text
//! Φ_{s,j,m}(x) = sqrt((2j+1)/2) · d^j_{m,-s}(θ),   x = cos θ,
//! ```
//!
//! which are orthonormal on `[-1, 1]` with the flat measure `dx`. The azimuthal
//! factor `e^{imφ}/sqrt(2π)` never appears explicitly: the scalar datum is
//! axisymmetric, so it integrates out and every operator is block diagonal in
//! `m`. The state `(s, j, m)` is an eigenvector of `D²` with eigenvalue
//! `(j + 1/2)²`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::math::{cos, exp, ln, powi, sqrt};
use crate::{Error, HalfInt, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i g(x_i)`.
    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        crate::sum::csum(self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)))
    }
}

const NEWTON_CAP: usize = 100;

/// Value and derivative of the Legendre polynomial `P_n` at `x`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    let dp = nf * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// The `n`-point Gauss-Legendre rule.
///
/// Roots are polished by Newton iteration from the Tricomi initial guess and
/// the rule is mirrored about zero so it is exactly symmetric.
pub fn gauss_legendre_rule(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::config("Gauss-Legendre rule needs at least one node"));
    }
    if n == 1 {
        return Ok(QuadratureRule { nodes: alloc::vec![0.0], weights: alloc::vec![2.0] });
    }
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let nf = n as f64;
    // Node i counts from the right end; nodes[n-1-i] = x, nodes[i] = -x.
    for i in 0..n.div_ceil(2) {
        let mut x = cos(PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut converged = false;
        for _ in 0..NEWTON_CAP {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::QuadratureNoConvergence { node: i, order: n });
        }
        if 2 * i + 1 == n {
            x = 0.0;
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Quadrature size used for a truncation `n_trunc` and a scalar datum of
/// Legendre degree `f_degree`.
///
/// `2N + 8` covers every assembled integrand for `f_degree ≤ (N + 7)/2`; the
/// second term keeps the `f⁴/4` products exact for higher degrees at small `N`.
pub fn rule_size(n_trunc: usize, f_degree: usize) -> usize {
    (2 * n_trunc + 8).max(n_trunc + 2 * f_degree + 1)
}

/// One basis state `(s, j, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasisIndex {
    pub s: HalfInt,
    pub j: HalfInt,
    pub m: HalfInt,
}

impl BasisIndex {
    /// `n = j + 1/2`, so the `D²` eigenvalue is `n²`.
    pub fn level(&self) -> u64 {
        ((self.j.doubled() + 1) / 2) as u64
    }

    pub fn d2_value(&self) -> u64 {
        let n = self.level();
        n * n
    }
}

fn check_spin(s: HalfInt) -> Result<()> {
    if s == HalfInt::HALF || s == HalfInt::MINUS_HALF {
        Ok(())
    } else {
        Err(Error::InvalidSpin(s))
    }
}

/// Smallest `j` in the block of azimuthal index `m`.
pub fn block_j_min(m: HalfInt) -> HalfInt {
    m.abs().max(HalfInt::HALF)
}

/// Number of `j` values per spin sector in block `m`, zero when `|m| > N - 1/2`.
pub fn block_j_count(n_trunc: usize, m: HalfInt) -> usize {
    let top = 2 * n_trunc as i32 - 1;
    let lo = block_j_min(m).doubled();
    if !m.is_half_odd() || lo > top {
        0
    } else {
        ((top - lo) / 2 + 1) as usize
    }
}

/// Azimuthal indices `-(N-1/2), ..., N-1/2`, ascending.
pub fn azimuthal_indices(n_trunc: usize) -> impl Iterator<Item = HalfInt> + Clone {
    let top = 2 * n_trunc as i32 - 1;
    (0..n_trunc as i32 * 2).map(move |k| HalfInt::from_doubled(-top + 2 * k))
}

/// The states of block `m`: the `s = +1/2` sector first, then `s = -1/2`,
/// each ascending in `j`.
pub fn enumerate_block(n_trunc: usize, m: HalfInt) -> Result<Vec<BasisIndex>> {
    let count = block_j_count(n_trunc, m);
    if count == 0 {
        return Err(Error::EmptyBlock { m, n_trunc });
    }
    let j_min = block_j_min(m);
    let mut out = Vec::with_capacity(2 * count);
    for s in [HalfInt::HALF, HalfInt::MINUS_HALF] {
        out.extend((0..count).map(|k| BasisIndex { s, j: j_min + HalfInt::from_int(k as i32), m }));
    }
    Ok(out)
}

/// Total number of basis states, `2N(N+1)`.
pub fn basis_dimension(n_trunc: usize) -> usize {
    2 * n_trunc * (n_trunc + 1)
}

/// Normalized profiles `Φ_{s,j,m}(x_i)` for one `(s, m)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerTable {
    m: HalfInt,
    s: HalfInt,
    j_min: HalfInt,
    n_j: usize,
    n_nodes: usize,
    /// Row `k` holds `j = j_min + k` at every node.
    values: Vec<f64>,
}

impl WignerTable {
    pub fn m(&self) -> HalfInt {
        self.m
    }

    pub fn s(&self) -> HalfInt {
        self.s
    }

    pub fn j_min(&self) -> HalfInt {
        self.j_min
    }

    pub fn n_j(&self) -> usize {
        self.n_j
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn row(&self, j_index: usize) -> &[f64] {
        &self.values[j_index * self.n_nodes..(j_index + 1) * self.n_nodes]
    }

    pub fn get(&self, j_index: usize, node: usize) -> f64 {
        self.values[j_index * self.n_nodes + node]
    }
}

/// `ln C(n, k)` as a sum of logs of ratios.
fn ln_binomial(n: i32, k: i32) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ln(f64::from(n - k + i) / f64::from(i))).sum()
}

/// `C(n, k)` in floating point (exact for the sizes used here up to rounding).
fn binomial(n: i32, k: i32) -> f64 {
    let k = k.min(n - k);
    (1..=k).fold(1.0, |acc, i| acc * f64::from(n - k + i) / f64::from(i))
}

const RESCALE: f64 = 1e100;

/// Column `d^j_{m1,m2}(θ(x))` for `j = j0, ..., j0 + len - 1`, by upward recursion
/// from the single-term closed form at `j0 = max(|m1|, |m2|)`.
fn wigner_column(m1: HalfInt, m2: HalfInt, x: f64, len: usize, node: usize, out: &mut [f64]) -> Result<()> {
    let j0 = m1.abs().max(m2.abs());
    let (j0d, m1d, m2d) = (j0.doubled(), m1.doubled(), m2.doubled());
    let k = ((m2d - m1d) / 2).max(0);
    let cos_pow = (2 * j0d + m2d - m1d) / 2 - 2 * k;
    let sin_pow = (m1d - m2d) / 2 + 2 * k;
    let negative = ((m1d - m2d) / 2 + k).rem_euclid(2) == 1;
    let c = sqrt(0.5 * (1.0 + x));
    let s = sqrt(0.5 * (1.0 - x));
    let ln_seed = 0.5 * ln_binomial(j0d, (j0d + m2d) / 2) + f64::from(cos_pow) * ln(c) + f64::from(sin_pow) * ln(s);

    // The column is carried as cur * exp(log_scale).
    let (mut cur, mut log_scale) = if ln_seed >= -300.0 {
        (sqrt(binomial(j0d, (j0d + m2d) / 2)) * (powi(c, cos_pow) * powi(s, sin_pow)), 0.0)
    } else {
        (1.0, ln_seed)
    };
    if negative {
        cur = -cur;
    }
    let mut prev = 0.0;
    let (m1f, m2f) = (m1.value(), m2.value());
    for (step, slot) in out.iter_mut().enumerate().take(len) {
        let j = j0 + HalfInt::from_int(step as i32);
        if !cur.is_finite() {
            return Err(Error::RecursionOverflow { j, node });
        }
        *slot = if log_scale == 0.0 {
            cur
        } else if cur == 0.0 {
            0.0
        } else {
            let l = log_scale + ln(cur.abs());
            if l < -745.0 {
                0.0
            } else {
                cur.signum() * exp(l)
            }
        };
        if step + 1 == len {
            break;
        }
        let jf = j.value();
        let j1 = jf + 1.0;
        let back = (jf * jf - m1f * m1f) * (jf * jf - m2f * m2f);
        let back = if back > 0.0 { (jf + 1.0) * sqrt(back) } else { 0.0 };
        let denom = jf * sqrt((j1 * j1 - m1f * m1f) * (j1 * j1 - m2f * m2f));
        let next = ((2.0 * jf + 1.0) * (jf * j1 * x - m1f * m2f) * cur - back * prev) / denom;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += ln(RESCALE);
        }
    }
    Ok(())
}

/// Tabulate `Φ_{s,j,m}` at the rule's nodes for all `j` in block `m`.
pub fn wigner_table(n_trunc: usize, m: HalfInt, s: HalfInt, rule: &QuadratureRule) -> Result<WignerTable> {
    check_spin(s)?;
    let n_j = block_j_count(n_trunc, m);
    if n_j == 0 {
        return Err(Error::EmptyBlock { m, n_trunc });
    }
    let required = 2 * n_trunc + 8;
    if rule.len() < required {
        return Err(Error::RuleTooSmall { required, found: rule.len() });
    }
    let n_nodes = rule.len();
    let j_min = block_j_min(m);
    let mut values = alloc::vec![0.0; n_j * n_nodes];
    let mut column = alloc::vec![0.0; n_j];
    for (node, &x) in rule.nodes().iter().enumerate() {
        wigner_column(m, -s, x, n_j, node, &mut column)?;
        for (k, &d) in column.iter().enumerate() {
            let j = j_min + HalfInt::from_int(k as i32);
            values[k * n_nodes + node] = sqrt((2.0 * j.value() + 1.0) * 0.5) * d;
        }
    }
    Ok(WignerTable { m, s, j_min, n_j, n_nodes, values })
}

/// `d^j_{m1,m2}(θ)` from the explicit factorial sum.
///
/// Independent of the recursion in [`wigner_table`]; intended for small `j`
/// (reference values and the unblocked assembly in the validation module).
pub fn wigner_d_explicit(j: HalfInt, m1: HalfInt, m2: HalfInt, theta: f64) -> f64 {
    let (jd, ad, bd) = (j.doubled(), m1.doubled(), m2.doubled());
    // Wigner's formula with d^j_{m'm}: m' = m1, m = m2.
    let jp = (jd + bd) / 2; // j + m
    let jm = (jd - bd) / 2; // j - m
    let pp = (jd + ad) / 2; // j + m'
    let pm = (jd - ad) / 2; // j - m'
    let diff = (ad - bd) / 2; // m' - m
    if jp < 0 || jm < 0 || pp < 0 || pm < 0 {
        return 0.0;
    }
    let ln_fact = |n: i32| -> f64 { (2..=n).map(|k| ln(f64::from(k))).sum() };
    let pref = 0.5 * (ln_fact(jp) + ln_fact(jm) + ln_fact(pp) + ln_fact(pm));
    let ch = cos(0.5 * theta);
    let sh = crate::math::sin(0.5 * theta);
    let lo = 0.max(-diff);
    let hi = jp.min(pm);
    let mut total = 0.0;
    for k in lo..=hi {
        let denom = ln_fact(jp - k) + ln_fact(k) + ln_fact(diff + k) + ln_fact(pm - k);
        let mag = exp(pref - denom);
        let sign = if (diff + k).rem_euclid(2) == 1 { -1.0 } else { 1.0 };
        total += sign * mag * powi(ch, jd + (bd - ad) / 2 - 2 * k) * powi(sh, diff + 2 * k);
    }
    total
}
