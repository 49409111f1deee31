//! TOML configuration shared by all subcommands.

use std::path::{Path, PathBuf};

use amcg_core::extraction::ExtractionConfig;
use amcg_core::induction::InductionConfig;
use amcg_mt::HttpConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Mock,
    #[default]
    CacheOnly,
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Mock rules JSON; identity rules when absent.
    pub rules: Option<PathBuf>,
    /// Translation cache (JSON lines); in-memory when absent.
    pub cache: Option<PathBuf>,
    pub http: HttpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub sample_per_template: usize,
    pub dedupe_terms: bool,
    pub csv: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            sample_per_template: 50,
            dedupe_terms: true,
            csv: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub source_checklist: Option<PathBuf>,
    pub source_lang: String,
    pub target_lang: Option<String>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Cap on expansions per source template.
    pub expand_limit: usize,
    /// Source templates processed at once; 0 means one per CPU.
    pub workers: usize,
    pub predictions: Option<PathBuf>,
    pub provider: ProviderConfig,
    pub extraction: ExtractionConfig,
    pub induction: InductionConfig,
    pub metrics: MetricsConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            source_checklist: None,
            source_lang: "en".into(),
            target_lang: None,
            seed: 0,
            out: None,
            expand_limit: 10_000,
            workers: 0,
            predictions: None,
            provider: ProviderConfig::default(),
            extraction: ExtractionConfig::default(),
            induction: InductionConfig::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl Config {
    /// Parse a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let mut cfg: Config = toml::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.source_checklist,
            &mut cfg.out,
            &mut cfg.predictions,
            &mut cfg.provider.rules,
            &mut cfg.provider.cache,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.extraction
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;
        self.induction
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;
        if self.expand_limit == 0 {
            return Err(CliError::Input("expand_limit must be at least 1".into()));
        }
        Ok(())
    }

    pub fn workers(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, usize::from)
        }
    }
}
