//! Resolving settings from defaults, a TOML file and the command line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use retrolab::photon::CollapsePreBeable;
use retrolab::{Angle, ModelId};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_N: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollapseBeable {
    Prepared,
    Eigenstate,
}

impl From<CollapseBeable> for CollapsePreBeable {
    fn from(c: CollapseBeable) -> Self {
        match c {
            CollapseBeable::Prepared => CollapsePreBeable::Prepared,
            CollapseBeable::Eigenstate => CollapsePreBeable::Eigenstate,
        }
    }
}

/// Keys accepted in a config file; the same names as the long flags.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<String>,
    pub sigma_l: Option<f64>,
    pub sigma_r: Option<f64>,
    pub sigma_r_alt: Option<f64>,
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub degrees: Option<bool>,
    pub records: Option<PathBuf>,
    pub collapse_beable: Option<CollapseBeable>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: FileConfig) -> FileConfig {
        FileConfig {
            model: over.model.or(self.model),
            sigma_l: over.sigma_l.or(self.sigma_l),
            sigma_r: over.sigma_r.or(self.sigma_r),
            sigma_r_alt: over.sigma_r_alt.or(self.sigma_r_alt),
            n: over.n.or(self.n),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            format: over.format.or(self.format),
            degrees: over.degrees.or(self.degrees),
            records: over.records.or(self.records),
            collapse_beable: over.collapse_beable.or(self.collapse_beable),
        }
    }
}

/// Fully resolved settings. Angles are in radians.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_l: Option<Angle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_r: Option<Angle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_r_alt: Option<Angle>,
    pub n: u64,
    pub seed: u64,
    pub format: Format,
    pub collapse_beable: CollapseBeable,
    /// Subcommand-specific choices (game side, demon kind, ...).
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<&'static str, serde_json::Value>,
    #[serde(skip)]
    pub degrees: bool,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub records: Option<PathBuf>,
}

impl Resolved {
    pub fn from_file_config(c: FileConfig) -> Result<Self, CliError> {
        let degrees = c.degrees.unwrap_or(false);
        let angle = |x: Option<f64>| -> Result<Option<Angle>, CliError> {
            x.map(|v| {
                if degrees {
                    Angle::from_degrees(v)
                } else {
                    Angle::new(v)
                }
            })
            .transpose()
            .map_err(|e| CliError::Config(e.to_string()))
        };
        let model = c
            .model
            .map(|m| m.parse::<ModelId>())
            .transpose()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let n = c.n.unwrap_or(DEFAULT_N);
        if n == 0 {
            return Err(CliError::Config("n must be at least 1".into()));
        }
        Ok(Resolved {
            model,
            sigma_l: angle(c.sigma_l)?,
            sigma_r: angle(c.sigma_r)?,
            sigma_r_alt: angle(c.sigma_r_alt)?,
            n,
            seed: c.seed.unwrap_or(DEFAULT_SEED),
            format: c.format.unwrap_or_default(),
            collapse_beable: c.collapse_beable.unwrap_or(CollapseBeable::Prepared),
            options: BTreeMap::new(),
            degrees,
            out: c.out,
            records: c.records,
        })
    }

    pub fn model(&self) -> Result<ModelId, CliError> {
        self.model
            .ok_or_else(|| CliError::Config("no model given".into()))
    }

    pub fn sigma_l_or_zero(&self) -> Angle {
        self.sigma_l.unwrap_or(Angle::ZERO)
    }

    pub fn sigma_r_or_zero(&self) -> Angle {
        self.sigma_r.unwrap_or(Angle::ZERO)
    }

    pub fn require(&self, value: Option<Angle>, name: &str) -> Result<Angle, CliError> {
        value.ok_or_else(|| CliError::Config(format!("missing {name}")))
    }

    pub fn trajectory(&self) -> retrolab::photon::TrajectoryConfig {
        retrolab::photon::TrajectoryConfig {
            collapse_pre_beable: self.collapse_beable.into(),
            ..Default::default()
        }
    }
}
