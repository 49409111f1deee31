//! `amcg` command-line tool: expand source CheckLists, translate, induce
//! target-language templates, and evaluate or diff the results.

pub mod commands;
pub mod config;
pub mod pipeline;

use std::io::Write;
use std::path::{Path, PathBuf};

use amcg_mt::{HttpProvider, MockProvider, MockRuleSet, MtError, TranslationCache, Translator};
use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{Config, ProviderConfig, ProviderKind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Empty(String),
    #[error("{0}")]
    Provider(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Empty(_) => 3,
            CliError::Provider(_) => 4,
            CliError::Output(_) => 1,
        }
    }
}

impl From<MtError> for CliError {
    fn from(e: MtError) -> Self {
        match e {
            MtError::ProviderUnavailable(_) | MtError::CacheMiss { .. } | MtError::AuthError(_) => {
                CliError::Provider(e.to_string())
            }
            MtError::InvalidRequest(_) | MtError::Cache { .. } | MtError::Rules(_) => {
                CliError::Input(e.to_string())
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "amcg",
    version,
    about = "Generate target-language CheckLists from a source CheckList"
)]
pub struct Cli {
    /// TOML config file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default: current directory)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiffMode {
    Strict,
    Lenient,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write every sentence a CheckList generates, one file per capability
    Expand {
        checklist: PathBuf,
        #[arg(long)]
        capability: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Translate a sentence file line by line
    Translate {
        sentences: PathBuf,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, value_enum)]
        provider: Option<ProviderKind>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Induce a capability from a sentence file
    Induce {
        sentences: PathBuf,
        /// Capability name (default: file stem)
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        language: Option<String>,
    },
    /// Expand, translate and induce a whole CheckList (needs --config)
    Pipeline,
    /// Diversity, cross-template BLEU and (with predictions) failure rates
    Metrics {
        checklist: PathBuf,
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
    /// Compare a candidate CheckList against a reference
    Diff {
        candidate: PathBuf,
        reference: PathBuf,
        #[arg(long, value_enum, default_value = "strict")]
        mode: DiffMode,
        #[arg(long)]
        json: bool,
    },
    /// Report suspicious templates and lexicon entries
    Lint { checklist: PathBuf },
}

/// Effective settings after applying global flags to the config file.
pub struct Context {
    pub cfg: Config,
    pub config_path: Option<PathBuf>,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Context {
    pub fn new(cli: &Cli) -> Result<Self, CliError> {
        let mut cfg = match &cli.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &cli.out {
            cfg.out = Some(out.clone());
        }
        let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
        Ok(Self {
            cfg,
            config_path: cli.config.clone(),
            out,
            quiet: cli.quiet,
        })
    }

    pub fn status(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let ctx = Context::new(cli)?;
    match &cli.command {
        Command::Expand {
            checklist,
            capability,
            limit,
        } => commands::expand(&ctx, checklist, capability.as_deref(), *limit),
        Command::Translate {
            sentences,
            from,
            to,
            provider,
            rules,
            cache,
        } => {
            let mut pc = ctx.cfg.provider.clone();
            if let Some(k) = provider {
                pc.kind = *k;
            }
            if rules.is_some() {
                pc.rules = rules.clone();
            }
            if cache.is_some() {
                pc.cache = cache.clone();
            }
            let from = from.clone().unwrap_or_else(|| ctx.cfg.source_lang.clone());
            let to = to
                .clone()
                .or_else(|| ctx.cfg.target_lang.clone())
                .ok_or_else(|| {
                    CliError::Input("no target language (--to or target_lang)".into())
                })?;
            commands::translate(&ctx, sentences, &pc, &from, &to)
        }
        Command::Induce {
            sentences,
            name,
            language,
        } => commands::induce(&ctx, sentences, name.as_deref(), language.as_deref()),
        Command::Pipeline => pipeline::cmd_pipeline(&ctx),
        Command::Metrics {
            checklist,
            predictions,
            csv,
        } => commands::metrics(&ctx, checklist, predictions.as_deref(), *csv, stdout),
        Command::Diff {
            candidate,
            reference,
            mode,
            json,
        } => commands::diff(candidate, reference, *mode, *json, stdout),
        Command::Lint { checklist } => commands::lint(checklist, stdout),
    }
}

pub fn build_translator(pc: &ProviderConfig) -> Result<Translator, CliError> {
    let cache = match &pc.cache {
        Some(p) => TranslationCache::open(p)?,
        None => TranslationCache::in_memory(),
    };
    Ok(match pc.kind {
        ProviderKind::CacheOnly => Translator::cache_only(cache),
        ProviderKind::Mock => {
            let rules = match &pc.rules {
                Some(p) => MockRuleSet::from_path(p)?,
                None => MockRuleSet::default(),
            };
            Translator::new(cache, Box::new(MockProvider::new(rules)?))
        }
        ProviderKind::Http => Translator::new(
            cache,
            Box::new(HttpProvider::new(pc.http.clone().with_env())?),
        ),
    })
}

pub fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Non-blank lines with trailing whitespace removed.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_input(path)?
        .lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

pub fn lines_to_bytes(lines: &[String]) -> Vec<u8> {
    let mut s = String::new();
    for l in lines {
        s.push_str(l);
        s.push('\n');
    }
    s.into_bytes()
}

pub fn json_bytes<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// File-name-safe form of a capability name.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    if s.is_empty() {
        "capability".into()
    } else {
        s
    }
}

/// Write all files, each through a temporary file renamed into place.
/// Nothing is written before every output has been computed.
pub fn commit(files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    let err = |p: &Path, e: std::io::Error| CliError::Output(format!("{}: {e}", p.display()));
    for (path, bytes) in files {
        let dir = match path.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        std::fs::create_dir_all(dir).map_err(|e| err(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| err(dir, e))?;
        tmp.write_all(bytes).map_err(|e| err(path, e))?;
        tmp.persist(path).map_err(|e| err(path, e.error))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("Vocabulary"), "Vocabulary");
        assert_eq!(slug("Negation / NOT"), "Negation___NOT");
        assert_eq!(slug(""), "capability");
    }

    #[test]
    fn commit_writes_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        commit(&[(p.clone(), b"one".to_vec())]).unwrap();
        commit(&[(p.clone(), b"two".to_vec())]).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(
            std::fs::read_dir(dir.path().join("sub")).unwrap().count(),
            1
        );
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Input(String::new()).exit_code(), 2);
        assert_eq!(CliError::Empty(String::new()).exit_code(), 3);
        assert_eq!(
            CliError::from(MtError::AuthError("x".into())).exit_code(),
            4
        );
        assert_eq!(CliError::from(MtError::Rules("x".into())).exit_code(), 2);
    }
}
