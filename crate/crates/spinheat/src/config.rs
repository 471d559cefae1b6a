//! JSON run configuration. Unknown fields anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spinheat_core::asymptotics::ExtrapolationPolicy;
use spinheat_core::linalg::MAX_FIT_DEGREE;
use spinheat_core::operators::{DeformationConfig, ScalarDatum, Tolerances, MAX_LEGENDRE_DEGREE};
use spinheat_core::validation::Thresholds;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaGrid {
    pub min: f64,
    pub max: f64,
    pub points_per_decade: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Datum {
    pub legendre: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    pub windows: Vec<[f64; 2]>,
    pub degrees: Vec<usize>,
}

/// Every numerical tolerance and validation threshold, by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceTable {
    pub eig_residual: f64,
    pub tail: f64,
    pub quadrature: f64,
    /// Relative intercept spread accepted as a converged extrapolation.
    pub extrapolation: f64,
    pub spectrum: f64,
    pub vanishing: f64,
    pub convention: f64,
    pub monolithic: f64,
    pub clifford: f64,
    pub symmetry: f64,
}

impl Default for ToleranceTable {
    fn default() -> Self {
        let t = Tolerances::default();
        let v = Thresholds::default();
        ToleranceTable {
            eig_residual: t.eig_residual,
            tail: t.tail,
            quadrature: t.quadrature,
            extrapolation: 1e-3,
            spectrum: v.spectrum,
            vanishing: v.vanishing,
            convention: v.convention,
            monolithic: v.monolithic,
            clifford: v.clifford,
            symmetry: v.symmetry,
        }
    }
}

impl ToleranceTable {
    pub fn numerical(&self) -> Tolerances {
        Tolerances { eig_residual: self.eig_residual, tail: self.tail, quadrature: self.quadrature }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            spectrum: self.spectrum,
            vanishing: self.vanishing,
            convention: self.convention,
            monolithic: self.monolithic,
            clifford: self.clifford,
            symmetry: self.symmetry,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "truncation_N")]
    pub truncation_n: usize,
    pub gammas: Vec<f64>,
    pub sigma: SigmaGrid,
    pub f: Datum,
    pub fit: FitSettings,
    #[serde(default)]
    pub tolerances: ToleranceTable,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Config(msg.into()));
        if self.truncation_n == 0 {
            return bad("truncation_N must be positive");
        }
        if self.gammas.is_empty() {
            return bad("gammas must not be empty");
        }
        if self.gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return bad("gammas must be finite and non-negative");
        }
        let s = &self.sigma;
        if !(s.min > 0.0 && s.max > s.min && s.max.is_finite()) {
            return bad("sigma needs 0 < min < max");
        }
        if s.points_per_decade == 0 {
            return bad("sigma.points_per_decade must be positive");
        }
        if self.f.legendre.len() > MAX_LEGENDRE_DEGREE + 1 {
            return bad("f.legendre has more than 9 coefficients");
        }
        ScalarDatum::new(self.f.legendre.clone()).map_err(CliError::from_core)?;
        for w in &self.fit.windows {
            if !(w[0] > 0.0 && w[1] > w[0]) {
                return bad("fit windows need 0 < lo < hi");
            }
            if w[0] < s.min || w[1] > s.max {
                return bad("every fit window must lie inside [sigma.min, sigma.max]");
            }
        }
        if self.fit.degrees.iter().any(|&d| d > MAX_FIT_DEGREE) {
            return bad("fit degrees above 4 are not supported");
        }
        let t = &self.tolerances;
        if [t.eig_residual, t.tail, t.quadrature, t.extrapolation].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("numerical tolerances must be positive");
        }
        let v = self.tolerances.thresholds();
        if [v.spectrum, v.vanishing, v.convention, v.monolithic, v.clifford, v.symmetry].iter().any(|x| x.is_nan() || *x < 0.0) {
            return bad("validation thresholds must be non-negative");
        }
        Ok(())
    }

    pub fn datum(&self) -> ScalarDatum {
        ScalarDatum::new(self.f.legendre.clone()).expect("validated")
    }

    pub fn deformation(&self, n_trunc: usize, gamma: f64) -> DeformationConfig {
        DeformationConfig { n_trunc, gamma, f: self.datum(), tol: self.tolerances.numerical() }
    }

    pub fn policy(&self) -> ExtrapolationPolicy {
        ExtrapolationPolicy {
            windows: self.fit.windows.iter().map(|w| (w[0], w[1])).collect(),
            degrees: self.fit.degrees.clone(),
            rel_threshold: self.tolerances.extrapolation,
            tail: self.tolerances.tail,
        }
    }

    pub fn sigma_grid(&self) -> Result<Vec<f64>, CliError> {
        spinheat_core::heat::log_sigma_grid(self.sigma.min, self.sigma.max, self.sigma.points_per_decade).map_err(CliError::from_core)
    }
}
