//! Dense symmetric eigendecomposition and weighted polynomial least squares.

use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::math::{hypot, sqrt};
use crate::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: alloc::vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: other.rows });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// First `(row, col)` where the matrix differs from its transpose.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        if !self.is_square() {
            return Some((0, 0));
        }
        (0..self.rows).flat_map(|i| (0..i).map(move |j| (i, j))).find(|&(i, j)| self[(i, j)] != self[(j, i)])
    }

    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    /// `D A D` for a diagonal `D` given by its entries.
    pub fn conjugate_diagonal(&self, d: &[f64]) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| d[i] * self[(i, j)] * d[j])
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

impl EigenDecomposition {
    /// `‖A V - V diag(values)‖_F`.
    pub fn residual(&self, a: &DenseMatrix) -> f64 {
        let n = self.values.len();
        let av = a.matmul(&self.vectors).expect("square");
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                let r = av[(i, k)] - self.vectors[(i, k)] * self.values[k];
                acc += r * r;
            }
        }
        sqrt(acc)
    }

    /// `max |VᵀV - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.values.len();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..=a {
                let dot: f64 = (0..n).map(|i| self.vectors[(i, a)] * self.vectors[(i, b)]).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

const QL_SWEEP_CAP: usize = 60;

/// Householder reduction to tridiagonal form (`z` holds the matrix on entry and
/// the accumulated transform on exit when `vectors` is set).
fn tridiagonalize(z: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], vectors: bool) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = z[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = z[at(i - 1, j)];
                z[at(i, j)] = 0.0;
                z[at(j, i)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e[..i].iter_mut() {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                z[at(j, i)] = f;
                g = e[j] + z[at(j, j)] * f;
                for k in j + 1..i {
                    g += z[at(k, j)] * d[k];
                    e[k] += z[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    z[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = z[at(i - 1, j)];
                z[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    if vectors {
        for i in 0..n - 1 {
            z[at(n - 1, i)] = z[at(i, i)];
            z[at(i, i)] = 1.0;
            let h = d[i + 1];
            if h != 0.0 {
                for k in 0..=i {
                    d[k] = z[at(k, i + 1)] / h;
                }
                for j in 0..=i {
                    let mut g = 0.0;
                    for k in 0..=i {
                        g += z[at(k, i + 1)] * z[at(k, j)];
                    }
                    for k in 0..=i {
                        z[at(k, j)] -= g * d[k];
                    }
                }
            }
            for k in 0..=i {
                z[at(k, i + 1)] = 0.0;
            }
        }
        for j in 0..n {
            d[j] = z[at(n - 1, j)];
            z[at(n - 1, j)] = 0.0;
        }
        z[at(n - 1, n - 1)] = 1.0;
    } else {
        for j in 0..n {
            d[j] = z[at(j, j)];
        }
        // Without accumulation the diagonal of the reduced matrix is left in z.
    }
    e[0] = 0.0;
}

/// Implicit QL iterations on the tridiagonal `(d, e)`.
fn tridiagonal_ql(z: &mut [f64], n: usize, d: &mut [f64], e: &mut [f64], vectors: bool) -> Result<()> {
    let at = |i: usize, j: usize| i * n + j;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > QL_SWEEP_CAP {
                    return Err(Error::EigenNoConvergence { size: n, residual: e[l].abs() });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if vectors {
                        for k in 0..n {
                            h = z[at(k, i + 1)];
                            z[at(k, i + 1)] = s * z[at(k, i)] + c * h;
                            z[at(k, i)] = c * z[at(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn check_symmetric(a: &DenseMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
    }
    match a.asymmetry() {
        Some((row, col)) => Err(Error::NotSymmetric { row, col }),
        None => Ok(()),
    }
}

/// Eigendecomposition of a symmetric matrix, values ascending.
pub fn eigh_symmetric(a: &DenseMatrix) -> Result<EigenDecomposition> {
    check_symmetric(a)?;
    let n = a.rows();
    if n == 0 {
        return Ok(EigenDecomposition { values: Vec::new(), vectors: DenseMatrix::zeros(0, 0) });
    }
    let mut z = a.as_slice().to_vec();
    let mut d = alloc::vec![0.0; n];
    let mut e = alloc::vec![0.0; n];
    tridiagonalize(&mut z, n, &mut d, &mut e, true);
    tridiagonal_ql(&mut z, n, &mut d, &mut e, true)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| z[r * n + order[c]]);
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: &DenseMatrix) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut z = a.as_slice().to_vec();
    let mut d = alloc::vec![0.0; n];
    let mut e = alloc::vec![0.0; n];
    tridiagonalize(&mut z, n, &mut d, &mut e, false);
    tridiagonal_ql(&mut z, n, &mut d, &mut e, false)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Largest polynomial degree accepted by [`polyfit_weighted`].
pub const MAX_FIT_DEGREE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitWindow {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Polynomial fit, coefficients in ascending powers of the raw abscissa.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitReport {
    pub coefficients: Vec<f64>,
    pub window: FitWindow,
    pub residual_rms: f64,
    pub condition_estimate: f64,
}

impl FitReport {
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

/// Weighted least-squares polynomial fit minimising `Σ wᵢ (p(xᵢ) - yᵢ)²`.
///
/// The abscissae are mapped affinely onto `[-1, 1]` and the weighted design
/// matrix is reduced by Householder QR; the normal equations are never formed.
pub fn polyfit_weighted(xs: &[f64], ys: &[f64], degree: usize, weights: &[f64]) -> Result<FitReport> {
    let count = xs.len();
    if ys.len() != count {
        return Err(Error::DimensionMismatch { expected: count, found: ys.len() });
    }
    if weights.len() != count {
        return Err(Error::DimensionMismatch { expected: count, found: weights.len() });
    }
    if degree > MAX_FIT_DEGREE {
        return Err(Error::config("fit degree above the supported maximum"));
    }
    let ncoef = degree + 1;
    if count < ncoef {
        return Err(Error::RankDeficient { degree, count });
    }
    if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) || xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::config("fit inputs must be finite with positive weights"));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (lo + hi);
    let half = if hi > lo { 0.5 * (hi - lo) } else { 1.0 };

    // Column-major design matrix with √w scaling.
    let mut a = alloc::vec![0.0; count * ncoef];
    let mut b: Vec<f64> = Vec::with_capacity(count);
    for i in 0..count {
        let sw = sqrt(weights[i]);
        let t = (xs[i] - center) / half;
        let mut p = sw;
        for k in 0..ncoef {
            a[k * count + i] = p;
            p *= t;
        }
        b.push(sw * ys[i]);
    }
    let mut rdiag = alloc::vec![0.0; ncoef];
    for k in 0..ncoef {
        let col = k * count;
        let norm = sqrt(a[col + k..col + count].iter().map(|x| x * x).sum());
        if norm == 0.0 {
            return Err(Error::RankDeficient { degree, count });
        }
        let alpha = if a[col + k] > 0.0 { -norm } else { norm };
        a[col + k] -= alpha;
        let vnorm2: f64 = a[col + k..col + count].iter().map(|x| x * x).sum();
        for jc in k + 1..ncoef {
            let colj = jc * count;
            let dot: f64 = (k..count).map(|i| a[col + i] * a[colj + i]).sum();
            let scale = 2.0 * dot / vnorm2;
            for i in k..count {
                a[colj + i] -= scale * a[col + i];
            }
        }
        let dot: f64 = (k..count).map(|i| a[col + i] * b[i]).sum();
        let scale = 2.0 * dot / vnorm2;
        for i in k..count {
            b[i] -= scale * a[col + i];
        }
        rdiag[k] = alpha;
    }
    let rmax = rdiag.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let rmin = rdiag.iter().fold(f64::INFINITY, |m, r| m.min(r.abs()));
    if rmin <= 1e-13 * rmax {
        return Err(Error::RankDeficient { degree, count });
    }
    // Back substitution in the scaled variable.
    let mut scaled = alloc::vec![0.0; ncoef];
    for k in (0..ncoef).rev() {
        let mut acc = b[k];
        for jc in k + 1..ncoef {
            acc -= a[jc * count + k] * scaled[jc];
        }
        scaled[k] = acc / rdiag[k];
    }
    // Expand Σ a_k ((x - c)/h)^k into raw powers of x.
    let mut coefficients = alloc::vec![0.0; ncoef];
    for (k, &ak) in scaled.iter().enumerate() {
        let hk = crate::math::powi(half, k as i32);
        let mut binom = 1.0;
        for (p, coef) in coefficients.iter_mut().enumerate().take(k + 1) {
            // C(k, p) x^p (-c)^(k-p)
            *coef += ak * binom * crate::math::powi(-center, (k - p) as i32) / hk;
            binom = binom * (k - p) as f64 / (p + 1) as f64;
        }
    }
    let report_partial = FitReport {
        coefficients,
        window: FitWindow { lo, hi, count },
        residual_rms: 0.0,
        condition_estimate: rmax / rmin,
    };
    let wsum: f64 = weights.iter().sum();
    let rss: f64 = (0..count)
        .map(|i| {
            let r = report_partial.eval(xs[i]) - ys[i];
            weights[i] * r * r
        })
        .sum();
    Ok(FitReport { residual_rms: sqrt(rss / wsum), ..report_partial })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_input() {
        let a = DenseMatrix::from_diagonal(&[3.0, -1.0, 2.0]);
        let e = eigh_symmetric(&a).unwrap();
        assert_eq!(e.values, alloc::vec![-1.0, 2.0, 3.0]);
        for c in 0..3 {
            let col: Vec<f64> = (0..3).map(|r| e.vectors[(r, c)].abs()).collect();
            assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(col.iter().filter(|&&v| v == 0.0).count(), 2);
        }
    }

    #[test]
    fn two_by_two_swap() {
        let a = DenseMatrix::from_fn(2, 2, |i, j| if i == j { 0.0 } else { 1.0 });
        let e = eigh_symmetric(&a).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15);
        assert!((e.values[1] - 1.0).abs() < 1e-15);
        assert_eq!(eigvalsh(&a).unwrap(), e.values);
    }

    #[test]
    fn random_symmetric_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for n in [1, 2, 5, 50] {
            let mut a = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            let e = eigh_symmetric(&a).unwrap();
            let fnorm = a.frobenius_norm();
            assert!(e.residual(&a) <= 1e-10 * fnorm);
            assert!(e.orthonormality_defect() <= 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            assert!((e.values.iter().sum::<f64>() - a.trace()).abs() <= 1e-10 * fnorm);
            let vals = eigvalsh(&a).unwrap();
            for (x, y) in vals.iter().zip(&e.values) {
                assert!((x - y).abs() <= 1e-12 * fnorm);
            }
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut a = DenseMatrix::identity(3);
        a[(0, 2)] = 1e-9;
        assert!(matches!(eigh_symmetric(&a), Err(Error::NotSymmetric { row: 2, col: 0 })));
    }

    #[test]
    fn fit_reproduces_polynomial() {
        let xs: Vec<f64> = (0..30).map(|i| 0.005 + 0.0015 * i as f64).collect();
        let truth = [2.0, -1.0 / 3.0, -1.0 / 30.0, 0.5];
        let ys: Vec<f64> = xs.iter().map(|&x| truth.iter().rev().fold(0.0, |a, &c| a * x + c)).collect();
        let w = alloc::vec![1.0; xs.len()];
        let fit = polyfit_weighted(&xs, &ys, 3, &w).unwrap();
        // Higher coefficients lose digits to the conditioning of the raw basis on a narrow window.
        for (p, (c, t)) in fit.coefficients.iter().zip(truth).enumerate() {
            let tol = [1e-13, 1e-11, 1e-8, 1e-6][p];
            assert!((c - t).abs() <= tol * t.abs().max(1.0), "{c} vs {t}");
        }
        for &x in &xs {
            let y = truth.iter().rev().fold(0.0, |a, &c| a * x + c);
            assert!((fit.eval(x) - y).abs() < 1e-13);
        }
        assert!(fit.residual_rms < 1e-14);
        assert_eq!(fit.window.count, 30);
    }

    #[test]
    fn degree_zero_is_weighted_mean() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [1.0, 4.0, 10.0];
        let w = [1.0, 2.0, 1.0];
        let fit = polyfit_weighted(&xs, &ys, 0, &w).unwrap();
        assert!((fit.coefficients[0] - 19.0 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(polyfit_weighted(&[1.0, 2.0], &[1.0, 2.0], 2, &[1.0, 1.0]), Err(Error::RankDeficient { .. })));
        assert!(matches!(polyfit_weighted(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0], 1, &[1.0; 3]), Err(Error::RankDeficient { .. })));
        assert!(polyfit_weighted(&[1.0, 2.0], &[1.0, 2.0], 1, &[1.0]).is_err());
    }
}
