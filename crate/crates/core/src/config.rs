//! Run configuration, read from TOML and overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{build_cutoff, CylinderDomain};
use crate::error::{Error, Result};
use crate::estimates::{check_estimate_id, find_case, HarnessSettings, ManufacturedCase, ESTIMATE_IDS, HARNESS_TOL};
use crate::solver::SolverOptions;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DomainSection {
    pub radius: f64,
    pub half_height: f64,
    pub r0: f64,
}

impl Default for DomainSection {
    fn default() -> Self {
        Self { radius: 1.0, half_height: 1.0, r0: 0.25 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nr: usize,
    pub nz: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { nr: 64, nz: 64 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CutoffSection {
    pub c0: f64,
    pub rho: f64,
}

impl Default for CutoffSection {
    fn default() -> Self {
        Self { c0: 1.0, rho: 0.2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: Option<usize>,
    /// Fault injection for the harness.
    pub broken_axis: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self { tol: HARNESS_TOL, max_iter: None, broken_axis: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MellinSection {
    /// Contour height of the single-contour demo.
    pub h: f64,
    pub h1: f64,
    pub h2: f64,
    pub hbar1: f64,
    pub hbar2: f64,
    /// Gaussian `g′(τ) = exp(−(τ − center)²/(2·width²))`.
    pub center: f64,
    pub width: f64,
    pub sigma_max: f64,
    pub sigma_points: usize,
}

impl Default for MellinSection {
    fn default() -> Self {
        Self {
            h: 0.5,
            h1: -0.5,
            h2: 0.5,
            hbar1: -0.5,
            hbar2: 1.5,
            center: 2.0,
            width: 1.0,
            sigma_max: 20.0,
            sigma_points: 401,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct HardySection {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl Default for HardySection {
    fn default() -> Self {
        Self {
            alphas: vec![-0.5, 0.0, 0.5],
            betas: vec![0.501, 0.505, 0.51, 0.55, 0.6, 0.75, 1.0, 1.5, 2.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    pub grid: GridSection,
    pub cutoff: CutoffSection,
    pub solver: SolverSection,
    /// Case names; empty means the whole suite plus the zero case.
    pub cases: Vec<String>,
    /// Estimate ids; empty means all.
    pub estimates: Vec<String>,
    pub mus: Vec<f64>,
    /// `n` of successive `n × n` meshes.
    pub meshes: Vec<usize>,
    /// Forcing for `solve`.
    pub solve_case: String,
    pub output_dir: PathBuf,
    pub mellin: MellinSection,
    pub hardy: HardySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainSection::default(),
            grid: GridSection::default(),
            cutoff: CutoffSection::default(),
            solver: SolverSection::default(),
            cases: Vec::new(),
            estimates: Vec::new(),
            mus: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            meshes: vec![64, 128, 256],
            solve_case: "polynomial".into(),
            output_dir: PathBuf::from("axistream-out"),
            mellin: MellinSection::default(),
            hardy: HardySection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn domain(&self) -> Result<CylinderDomain> {
        CylinderDomain::new(self.domain.radius, self.domain.half_height, self.domain.r0)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { tol: self.solver.tol, max_iter: self.solver.max_iter }
    }

    pub fn harness(&self) -> Result<HarnessSettings> {
        Ok(HarnessSettings {
            domain: self.domain()?,
            solver: self.solver_options(),
            cutoff: build_cutoff(self.cutoff.c0, self.cutoff.rho).map_err(|e| Error::Config(e.to_string()))?,
            broken_axis: self.solver.broken_axis,
        })
    }

    pub fn selected_cases(&self) -> Result<Vec<ManufacturedCase>> {
        if self.cases.is_empty() {
            return Ok(crate::estimates::all_cases());
        }
        self.cases.iter().map(|c| find_case(c)).collect()
    }

    pub fn selected_estimates(&self) -> Vec<String> {
        if self.estimates.is_empty() {
            ESTIMATE_IDS.iter().map(|s| s.to_string()).collect()
        } else {
            self.estimates.clone()
        }
    }

    /// Everything that can be checked without running anything.
    pub fn validate(&self) -> Result<()> {
        self.harness()?;
        crate::domain::build_partition(&self.domain()?).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.solver.tol > 0.0 && self.solver.tol <= 1e-6) {
            return Err(Error::Config(format!("solver tolerance must lie in (0, 1e-6], got {}", self.solver.tol)));
        }
        if self.grid.nr < 4 || self.grid.nz < 4 {
            return Err(Error::Config("grid needs at least 4 cells per direction".into()));
        }
        self.selected_cases()?;
        find_case(&self.solve_case)?;
        for id in self.selected_estimates() {
            check_estimate_id(&id)?;
        }
        if let Some(m) = self.mus.iter().find(|m| !(m.is_finite() && **m >= 0.0 && **m < 1.0)) {
            return Err(Error::Config(format!("weight exponent {m} outside [0, 1)")));
        }
        if self.meshes.iter().any(|&n| n < 8) {
            return Err(Error::Config("meshes need at least 8 cells".into()));
        }
        Ok(())
    }

    /// Create the output directory and check that it accepts files.
    pub fn prepare_output(&self) -> Result<PathBuf> {
        let dir = &self.output_dir;
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
        let probe = dir.join(".axistream-write-test");
        std::fs::write(&probe, b"")
            .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
        let _ = std::fs::remove_file(probe);
        Ok(dir.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml("meshes = [16, 32, 64]\n[solver]\ntol = 1e-9\n").unwrap();
        assert_eq!(c.meshes, vec![16, 32, 64]);
        assert_eq!(c.solver.tol, 1e-9);
        assert_eq!(c.domain, DomainSection::default());
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(RunConfig::from_toml("colour = 3").is_err());
        let bad = [
            "cases = [\"nope\"]",
            "estimates = [\"T9.9\"]",
            "mus = [1.5]",
            "[solver]\ntol = 1e-3",
            "[domain]\nr0 = 0.6",
        ];
        for text in bad {
            assert!(RunConfig::from_toml(text).unwrap().validate().is_err(), "{text}");
        }
    }
}
