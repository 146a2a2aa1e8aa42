use std::fs;
use std::path::{Path, PathBuf};

use planshare_core::glm::SolverConfig;
use planshare_core::ingest::PlanSchema;
use planshare_core::interpret::GroupPatterns;
use planshare_core::preprocess::PreprocessConfig;
use planshare_core::select::{CvConfig, SelectionRule, SplitConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub plans: Option<PathBuf>,
    pub totals: Option<PathBuf>,
    /// Canonical dataset; defaults to the one `ingest` writes.
    pub dataset: Option<PathBuf>,
    pub scenarios: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            plans: None,
            totals: None,
            dataset: None,
            scenarios: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Everything a run needs. Loaded from TOML; every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub ingest: PlanSchema,
    pub preprocess: PreprocessConfig,
    pub solver: SolverConfig,
    pub cv: CvConfig,
    pub split: SplitConfig,
    pub groups: GroupPatterns,
}

/// Command-line values that win over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub plans: Option<PathBuf>,
    pub totals: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub scenarios: Option<PathBuf>,
    pub rule: Option<SelectionRule>,
    pub k_folds: Option<usize>,
}

impl RunConfig {
    /// Parses TOML. Relative paths are taken from `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let p = &mut cfg.paths;
        for slot in [
            &mut p.plans,
            &mut p.totals,
            &mut p.dataset,
            &mut p.scenarios,
        ]
        .into_iter()
        .flatten()
        {
            *slot = base.join(&*slot);
        }
        p.out_dir = base.join(&p.out_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|_| CliError::MissingInput {
            path: path.to_path_buf(),
            what: "config file",
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    /// Defaults, then the config file if any, then `overrides`.
    pub fn resolve(config: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match config {
            Some(path) => Self::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.cv.seed = seed;
            self.split.seed = seed;
        }
        if let Some(dir) = &o.out_dir {
            self.paths.out_dir = dir.clone();
        }
        let pairs = [
            (&mut self.paths.plans, &o.plans),
            (&mut self.paths.totals, &o.totals),
            (&mut self.paths.dataset, &o.dataset),
            (&mut self.paths.scenarios, &o.scenarios),
        ];
        for (slot, value) in pairs {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        if let Some(rule) = o.rule {
            self.cv.rule = rule;
        }
        if let Some(k) = o.k_folds {
            self.cv.k_folds = k;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.preprocess.validate()?;
        self.solver.validate()?;
        if self.cv.k_folds < 2 {
            return Err(CliError::Config(format!(
                "cv.k_folds must be at least 2, got {}",
                self.cv.k_folds
            )));
        }
        let f = self.split.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::Config(format!(
                "split.test_fraction must lie in (0, 1), got {f}"
            )));
        }
        Ok(())
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.paths
            .dataset
            .clone()
            .unwrap_or_else(|| self.artifact(crate::artifacts::DATASET))
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.paths.out_dir.join(name)
    }
}
