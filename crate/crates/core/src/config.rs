//! Run configuration for the command-line driver.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmls::GmlsConfig;
use crate::manufactured::AnalyticScalar;
use crate::point_cloud::ManifoldShape;
use crate::stokes::{Formulation, HydroParams, SolverConfig};
use crate::surface_ops::OperatorKind;

/// Overrides the configured output directory when set.
pub const OUTPUT_DIR_ENV: &str = "GMLS_SURFACE_OUTPUT_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingMode {
    /// Forcing manufactured from the exact flow `v = curl0 field`.
    Manufactured,
    /// `b = 0`.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydroConfig {
    pub mu_m: f64,
    pub gamma: f64,
    pub formulation: Formulation,
    /// Also solve with the other formulation on the same clouds.
    pub compare: bool,
    pub forcing: ForcingMode,
}

impl Default for HydroConfig {
    fn default() -> Self {
        let p = HydroParams::default();
        HydroConfig {
            mu_m: p.mu_m,
            gamma: p.gamma,
            formulation: Formulation::Split,
            compare: false,
            forcing: ForcingMode::Manufactured,
        }
    }
}

impl HydroConfig {
    pub fn params(&self) -> HydroParams {
        HydroParams {
            mu_m: self.mu_m,
            gamma: self.gamma,
        }
    }

    pub fn formulations(&self) -> Vec<Formulation> {
        let mut out = vec![self.formulation];
        if self.compare {
            out.push(match self.formulation {
                Formulation::Split => Formulation::Biharmonic,
                Formulation::Biharmonic => Formulation::Split,
            });
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbationConfig {
    pub alphas: Vec<f64>,
    /// Polynomial order used for both geometry and field in the study.
    pub order: usize,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            alphas: vec![0.0, 0.05, 0.1, 0.5],
            order: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub shape: ManifoldShape,
    /// Target spacings, coarse to fine.
    pub levels: Vec<f64>,
    pub gmls: GmlsConfig,
    pub hydro: HydroConfig,
    pub solver: SolverConfig,
    /// Operator for `op-convergence`.
    pub operator: OperatorKind,
    /// Test field for operator studies and the manufactured flow.
    pub field: AnalyticScalar,
    pub perturbation: PerturbationConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            shape: ManifoldShape::ellipsoid_a(),
            levels: vec![0.1, 0.05],
            gmls: GmlsConfig::default(),
            hydro: HydroConfig::default(),
            solver: SolverConfig::default(),
            operator: OperatorKind::LaplaceBeltrami,
            field: AnalyticScalar::test_field(),
            perturbation: PerturbationConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 1,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Replace the output directory from the environment, if set.
    pub fn apply_env(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate().map_err(Error::Config)?;
        if self.levels.is_empty() {
            return Err(Error::Config("at least one level is required".into()));
        }
        if let Some(h) = self.levels.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::Config(format!("target spacing must be positive, got {h}")));
        }
        if self.levels.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("levels must be strictly decreasing".into()));
        }
        self.gmls.validate()?;
        self.hydro.params().validate()?;
        if !(self.solver.tolerance > 0.0 && self.solver.tolerance < 1.0) {
            return Err(Error::Config("solver tolerance must lie in (0, 1)".into()));
        }
        if !(self.solver.tangency_tolerance > 0.0) {
            return Err(Error::Config("tangency tolerance must be positive".into()));
        }
        if self.perturbation.alphas.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::Config("perturbation strengths must be non-negative".into()));
        }
        if self.perturbation.order < 2 {
            return Err(Error::Config("perturbation study needs order >= 2".into()));
        }
        if let AnalyticScalar::HarmonicPolynomial { degree } = self.field {
            if degree > 6 {
                return Err(Error::Config(format!("harmonic test fields are available up to degree 6, got {degree}")));
            }
        }
        Ok(())
    }

    /// Levels for commands that need a refinement sequence.
    pub fn study_levels(&self) -> Result<&[f64]> {
        if self.levels.len() < 2 {
            return Err(Error::Config("a convergence study needs at least 2 levels".into()));
        }
        Ok(&self.levels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = RunConfig::from_json(r#"{"levels": [0.2, 0.1], "gmls": {"m1": 4}, "hydro": {"formulation": "biharmonic"}}"#).unwrap();
        assert_eq!(c.levels, vec![0.2, 0.1]);
        assert_eq!(c.gmls.m1, 4);
        assert_eq!(c.gmls.m2, 6);
        assert_eq!(c.hydro.formulation, Formulation::Biharmonic);
        assert_eq!(c.seed, 1);
    }

    #[test]
    fn shapes_by_tag() {
        let c = RunConfig::from_json(r#"{"shape": {"kind": "torus_d", "s1_sq": 0.7, "s2_sq": 0.09}}"#).unwrap();
        assert_eq!(c.shape, ManifoldShape::torus_d());
    }

    #[test]
    fn rejects_bad_values() {
        for json in [
            r#"{"levels": [0.1, -0.05]}"#,
            r#"{"levels": [0.05, 0.1]}"#,
            r#"{"levels": []}"#,
            r#"{"gmls": {"alpha_star": 0.5}}"#,
            r#"{"hydro": {"mu_m": -1.0}}"#,
            r#"{"solver": {"tolerance": 0.0}}"#,
            r#"{"shape": {"kind": "torus_d", "s1_sq": 0.2, "s2_sq": 0.09}}"#,
        ] {
            let c = RunConfig::from_json(json).unwrap();
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{json}");
        }
        assert!(RunConfig::from_json(r#"{"level": [0.1]}"#).is_err());
    }
}
