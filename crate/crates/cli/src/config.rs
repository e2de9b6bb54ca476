use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use kite_core::ot_semidiscrete::SiteSymmetry;

use crate::CliError;

/// Everything a run depends on. Loaded from defaults, then an optional JSON
/// file, then explicit flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_sites: usize,
    pub seed: u64,
    pub symmetry: SiteSymmetry,
    pub lloyd_iters: usize,
    pub tol_mass: f64,
    pub max_iters: usize,
    /// Regression radius in units of the site spacing.
    pub r_loc_mult: f64,
    /// Image-plane radius range; both unset means the data-driven default.
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    pub n_radii: usize,
    /// Source grid resolution for the conformal sample cloud.
    pub grid_n: usize,
    /// Uniform samples for the pointwise checks.
    pub samples: usize,
    pub sample_seed: u64,
    pub out_dir: PathBuf,
    /// Empty selects every check of the subcommand.
    pub checks: Vec<String>,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_sites: 1000,
            seed: 1,
            symmetry: SiteSymmetry::Symmetrized,
            lloyd_iters: 20,
            tol_mass: 1e-7,
            max_iters: 50,
            r_loc_mult: 3.0,
            r_min: None,
            r_max: None,
            n_radii: 12,
            grid_n: 250,
            samples: 2000,
            sample_seed: 7,
            out_dir: PathBuf::from("."),
            checks: Vec::new(),
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let counts = [
            ("n_sites", self.n_sites),
            ("max_iters", self.max_iters),
            ("n_radii", self.n_radii),
            ("grid_n", self.grid_n),
            ("samples", self.samples),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::Usage(format!("{name} must be positive")));
        }
        if !(self.tol_mass > 0.0 && self.tol_mass < 1.0) {
            return Err(CliError::Usage(format!("tol_mass must lie in (0, 1), got {}", self.tol_mass)));
        }
        if !(self.r_loc_mult > 0.0) {
            return Err(CliError::Usage(format!("r_loc_mult must be positive, got {}", self.r_loc_mult)));
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("threads must be positive".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the settings that influence results. Output location
    /// and thread count are left out, so moving a run does not change it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.threads = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    pub fn selected(&self, check: &str) -> bool {
        self.checks.is_empty() || self.checks.iter().any(|c| c == check)
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}
