//! Per-block assembly of `D²`, `W₁`, `W₂` and `Q_γ = D² + γ²W₁ + γ⁴W₂`.
//!
//! `W₂ = f⁴/4` is a multiplication operator and only couples equal spin
//! weights. `W₁ = -i f c(df)` is Clifford multiplication by `dθ` times the
//! profile `h(θ) = -f(θ) f'(θ)` and only couples opposite spin weights. The unit
//! phase in `c(dθ)` is fixed so that `i c(dθ)` is the real swap of the two spin
//! sectors, which makes every block real symmetric.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::basis::{
    azimuthal_indices, block_j_count, enumerate_block, gauss_legendre_rule, rule_size, wigner_table, BasisIndex,
    QuadratureRule, WignerTable,
};
use crate::linalg::{eigvalsh, DenseMatrix};
use crate::math::sqrt;
use crate::{Error, HalfInt, Result};

/// Largest Legendre degree accepted for the scalar datum.
pub const MAX_LEGENDRE_DEGREE: usize = 8;

/// Axisymmetric real datum `f(θ) = Σ_L c_L P_L(cos θ)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScalarDatum {
    legendre: Vec<f64>,
}

impl ScalarDatum {
    pub fn new(legendre: Vec<f64>) -> Result<Self> {
        if legendre.is_empty() {
            return Err(Error::config("scalar datum needs at least one Legendre coefficient"));
        }
        if legendre.len() > MAX_LEGENDRE_DEGREE + 1 {
            return Err(Error::config("scalar datum exceeds the maximum Legendre degree 8"));
        }
        if legendre.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("scalar datum coefficients must be finite"));
        }
        Ok(ScalarDatum { legendre })
    }

    /// `f = cos θ`.
    pub fn cos_theta() -> Self {
        ScalarDatum { legendre: alloc::vec![0.0, 1.0] }
    }

    pub fn constant(c: f64) -> Self {
        ScalarDatum { legendre: alloc::vec![c] }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.legendre
    }

    /// Highest Legendre degree with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        self.legendre.iter().rposition(|&c| c != 0.0).unwrap_or(0)
    }

    /// `(f(x), df/dx(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let (mut p_prev, mut p) = (1.0, x);
        let (mut dp_prev, mut dp) = (0.0, 1.0);
        let mut f = self.legendre[0];
        let mut df = 0.0;
        for (l, &c) in self.legendre.iter().enumerate().skip(1) {
            if l >= 2 {
                let lf = l as f64;
                let next = ((2.0 * lf - 1.0) * x * p - (lf - 1.0) * p_prev) / lf;
                // P'_{l} = P'_{l-2} + (2l - 1) P_{l-1}
                let dnext = dp_prev + (2.0 * lf - 1.0) * p;
                p_prev = p;
                p = next;
                dp_prev = dp;
                dp = dnext;
            }
            f += c * p;
            df += c * dp;
        }
        (f, df)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// `h = -f ∂_θ f = f sin θ df/dx`, the profile of the commutator sector.
    pub fn commutator_profile(&self, x: f64) -> f64 {
        let (f, df) = self.eval(x);
        f * sqrt(1.0 - x * x) * df
    }
}

/// Numerical tolerances carried with a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    /// Relative eigensolver residual (trace and Frobenius identities).
    pub eig_residual: f64,
    /// Truncation tail relative to `K₀` for any σ used in asymptotics.
    pub tail: f64,
    /// Quadrature orthonormality guard for basis tables.
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eig_residual: 1e-10, tail: 1e-10, quadrature: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeformationConfig {
    pub n_trunc: usize,
    pub gamma: f64,
    pub f: ScalarDatum,
    pub tol: Tolerances,
}

impl DeformationConfig {
    pub fn new(n_trunc: usize, gamma: f64, f: ScalarDatum) -> Result<Self> {
        let cfg = DeformationConfig { n_trunc, gamma, f, tol: Tolerances::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trunc == 0 {
            return Err(Error::config("truncation N must be positive"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("gamma must be finite and non-negative"));
        }
        let t = &self.tol;
        if [t.eig_residual, t.tail, t.quadrature].iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::config("tolerances must be positive"));
        }
        Ok(())
    }

    /// Quadrature rule shared by every block of this configuration.
    pub fn rule(&self) -> Result<QuadratureRule> {
        gauss_legendre_rule(rule_size(self.n_trunc, self.f.degree()))
    }
}

/// `Φ` tables of both spin weights for one azimuthal index.
#[derive(Debug, Clone)]
pub struct SpinTables {
    pub plus: WignerTable,
    pub minus: WignerTable,
}

impl SpinTables {
    pub fn new(n_trunc: usize, m: HalfInt, rule: &QuadratureRule) -> Result<Self> {
        Ok(SpinTables {
            plus: wigner_table(n_trunc, m, HalfInt::HALF, rule)?,
            minus: wigner_table(n_trunc, m, HalfInt::MINUS_HALF, rule)?,
        })
    }
}

fn check_values(values: &[f64], table: &WignerTable, rule: &QuadratureRule) -> Result<()> {
    if values.len() != rule.len() {
        return Err(Error::DimensionMismatch { expected: rule.len(), found: values.len() });
    }
    if table.n_nodes() != rule.len() {
        return Err(Error::DimensionMismatch { expected: rule.len(), found: table.n_nodes() });
    }
    Ok(())
}

/// Weighted rows `wᵢ g(xᵢ) Φ_j(xᵢ)`.
fn weighted_rows(g: &[f64], table: &WignerTable, rule: &QuadratureRule) -> Vec<f64> {
    let n = rule.len();
    let mut out = Vec::with_capacity(table.n_j() * n);
    for k in 0..table.n_j() {
        out.extend(table.row(k).iter().zip(rule.weights()).zip(g).map(|((p, w), gv)| w * gv * p));
    }
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `⟨s,j',m| g(θ) |s,j,m⟩` by quadrature; exactly symmetric.
pub fn mult_matrix_same_spin(g: &[f64], table: &WignerTable, rule: &QuadratureRule) -> Result<DenseMatrix> {
    check_values(g, table, rule)?;
    let n = rule.len();
    let nj = table.n_j();
    let rows = weighted_rows(g, table, rule);
    let mut out = DenseMatrix::zeros(nj, nj);
    for a in 0..nj {
        for b in 0..=a {
            let v = dot(&rows[a * n..(a + 1) * n], table.row(b));
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// `⟨-1/2,j',m| h(θ) |+1/2,j,m⟩` by quadrature; rows index `j'`, columns `j`.
pub fn mult_matrix_cross_spin(
    h: &[f64],
    table_plus: &WignerTable,
    table_minus: &WignerTable,
    rule: &QuadratureRule,
) -> Result<DenseMatrix> {
    check_values(h, table_plus, rule)?;
    check_values(h, table_minus, rule)?;
    if table_plus.m() != table_minus.m() {
        return Err(Error::config("cross-spin tables must share the azimuthal index"));
    }
    let n = rule.len();
    let rows = weighted_rows(h, table_minus, rule);
    Ok(DenseMatrix::from_fn(table_minus.n_j(), table_plus.n_j(), |a, b| {
        dot(&rows[a * n..(a + 1) * n], table_plus.row(b))
    }))
}

/// `W₁` for block `m`: zero same-spin blocks, cross block `B = ⟨-|h|+⟩` and `Bᵀ`.
pub fn assemble_w1(f: &ScalarDatum, tables: &SpinTables, rule: &QuadratureRule) -> Result<DenseMatrix> {
    let h: Vec<f64> = rule.nodes().iter().map(|&x| f.commutator_profile(x)).collect();
    let cross = mult_matrix_cross_spin(&h, &tables.plus, &tables.minus, rule)?;
    let nj = tables.plus.n_j();
    let mut w1 = DenseMatrix::zeros(2 * nj, 2 * nj);
    for a in 0..nj {
        for b in 0..nj {
            let v = cross[(a, b)];
            w1[(nj + a, b)] = v;
            w1[(b, nj + a)] = v;
        }
    }
    Ok(w1)
}

/// `W₂ = f⁴/4` for block `m`: same-spin blocks only.
pub fn assemble_w2(f: &ScalarDatum, tables: &SpinTables, rule: &QuadratureRule) -> Result<DenseMatrix> {
    let g: Vec<f64> = rule
        .nodes()
        .iter()
        .map(|&x| {
            let v = f.value(x);
            0.25 * (v * v) * (v * v)
        })
        .collect();
    let nj = tables.plus.n_j();
    let mut w2 = DenseMatrix::zeros(2 * nj, 2 * nj);
    for (offset, table) in [(0, &tables.plus), (nj, &tables.minus)] {
        let sector = mult_matrix_same_spin(&g, table, rule)?;
        for a in 0..nj {
            for b in 0..nj {
                w2[(offset + a, offset + b)] = sector[(a, b)];
            }
        }
    }
    Ok(w2)
}

/// One azimuthal block of the deformed operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBlock {
    pub m: HalfInt,
    pub basis: Vec<BasisIndex>,
    /// `(j + 1/2)²` per basis state.
    pub d2_diag: Vec<u64>,
    pub w1: DenseMatrix,
    pub w2: DenseMatrix,
    /// Largest `|j - j'|` at which `W₁` can be nonzero.
    pub w1_band: usize,
    pub gamma: f64,
    pub q_gamma: DenseMatrix,
}

impl SpectralBlock {
    pub fn from_parts(m: HalfInt, basis: Vec<BasisIndex>, w1: DenseMatrix, w2: DenseMatrix, w1_band: usize, gamma: f64) -> Self {
        let d2_diag = basis.iter().map(BasisIndex::d2_value).collect();
        let mut block = SpectralBlock {
            m,
            basis,
            d2_diag,
            w1,
            w2,
            w1_band,
            gamma,
            q_gamma: DenseMatrix::zeros(0, 0),
        };
        block.q_gamma = block.q_for(gamma);
        block
    }

    pub fn size(&self) -> usize {
        self.basis.len()
    }

    /// Spin-sector size (the number of `j` values).
    pub fn n_j(&self) -> usize {
        self.basis.len() / 2
    }

    /// `diag((j+1/2)²) + γ² W₁ + γ⁴ W₂`.
    pub fn q_for(&self, gamma: f64) -> DenseMatrix {
        let g2 = gamma * gamma;
        let g4 = g2 * g2;
        let n = self.size();
        DenseMatrix::from_fn(n, n, |a, b| {
            let diag = if a == b { self.d2_diag[a] as f64 } else { 0.0 };
            diag + (g2 * self.w1[(a, b)] + g4 * self.w2[(a, b)])
        })
    }

    pub fn set_gamma(&mut self, gamma: f64) {
        self.gamma = gamma;
        self.q_gamma = self.q_for(gamma);
    }

    /// Eigenvalues of `q_gamma`, checked against the trace and Frobenius
    /// identities `Σν = tr Q`, `Σν² = ‖Q‖²_F`.
    pub fn eigenvalues(&self, tol: &Tolerances) -> Result<Vec<f64>> {
        let values = eigvalsh(&self.q_gamma)?;
        let fnorm = self.q_gamma.frobenius_norm();
        let tr_defect = (crate::sum::csum(values.iter().copied()) - self.q_gamma.trace()).abs();
        let fro_defect = (sqrt(crate::sum::csum(values.iter().map(|v| v * v))) - fnorm).abs();
        let residual = tr_defect.max(fro_defect);
        if residual > tol.eig_residual * fnorm.max(1.0) {
            return Err(Error::EigenNoConvergence { size: self.size(), residual });
        }
        Ok(values)
    }
}

/// Assemble block `m` with an explicit shared rule.
pub fn assemble_block(cfg: &DeformationConfig, m: HalfInt, rule: &QuadratureRule) -> Result<SpectralBlock> {
    let basis = enumerate_block(cfg.n_trunc, m)?;
    let tables = SpinTables::new(cfg.n_trunc, m, rule)?;
    let w1 = assemble_w1(&cfg.f, &tables, rule)?;
    let w2 = assemble_w2(&cfg.f, &tables, rule)?;
    Ok(SpectralBlock::from_parts(m, basis, w1, w2, 2 * cfg.f.degree(), cfg.gamma))
}

/// Assemble block `m`.
pub fn assemble_q(cfg: &DeformationConfig, m: HalfInt) -> Result<SpectralBlock> {
    cfg.validate()?;
    if block_j_count(cfg.n_trunc, m) == 0 {
        return Err(Error::EmptyBlock { m, n_trunc: cfg.n_trunc });
    }
    assemble_block(cfg, m, &cfg.rule()?)
}

/// All azimuthal blocks of one configuration, ascending in `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSet {
    pub cfg: DeformationConfig,
    pub blocks: Vec<SpectralBlock>,
}

impl BlockSet {
    /// Sequential assembly; the `spinheat` crate provides a parallel variant
    /// with identical output.
    pub fn assemble(cfg: &DeformationConfig) -> Result<Self> {
        cfg.validate()?;
        let rule = cfg.rule()?;
        let blocks = azimuthal_indices(cfg.n_trunc)
            .map(|m| assemble_block(cfg, m, &rule))
            .collect::<Result<Vec<_>>>()?;
        Ok(BlockSet { cfg: cfg.clone(), blocks })
    }

    pub fn from_blocks(cfg: DeformationConfig, blocks: Vec<SpectralBlock>) -> Self {
        BlockSet { cfg, blocks }
    }

    pub fn gamma(&self) -> f64 {
        self.cfg.gamma
    }

    pub fn n_trunc(&self) -> usize {
        self.cfg.n_trunc
    }

    pub fn dimension(&self) -> usize {
        self.blocks.iter().map(SpectralBlock::size).sum()
    }

    /// Same `W₁`, `W₂`, new coupling.
    pub fn with_gamma(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        out.cfg.gamma = gamma;
        for b in &mut out.blocks {
            b.set_gamma(gamma);
        }
        out
    }

    pub fn block(&self, m: HalfInt) -> Option<&SpectralBlock> {
        self.blocks.iter().find(|b| b.m == m)
    }
}

/// `(∫ f⁴ dvol, ∫ f² |∇f|² dvol)` on the unit sphere.
pub fn scalar_invariants(f: &ScalarDatum, rule: &QuadratureRule) -> Result<(f64, f64)> {
    let required = 8 * f.degree() + 2;
    if rule.len() < required {
        return Err(Error::RuleTooSmall { required, found: rule.len() });
    }
    let quartic = 2.0 * PI * rule.integrate(|x| {
        let v = f.value(x);
        (v * v) * (v * v)
    });
    let gradient = 2.0 * PI * rule.integrate(|x| {
        let (v, dv) = f.eval(x);
        v * v * (1.0 - x * x) * dv * dv
    });
    Ok((quartic, gradient))
}

/// [`scalar_invariants`] with a rule sized for `f`.
pub fn scalar_invariants_for(f: &ScalarDatum) -> Result<(f64, f64)> {
    scalar_invariants(f, &gauss_legendre_rule(8 * f.degree() + 2)?)
}
