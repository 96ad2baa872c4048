use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harvest::{SourceKind, DEFAULT_RELEVANCE_THRESHOLD};
use crate::llm::{ProviderKind, ProviderProfile};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn default_k() -> usize {
    5
}
fn default_items() -> usize {
    20
}
fn default_iters() -> usize {
    3
}
fn default_threshold() -> f64 {
    DEFAULT_RELEVANCE_THRESHOLD
}
fn default_max_results() -> usize {
    200
}
fn default_output() -> PathBuf {
    PathBuf::from("league-out")
}
fn default_cache() -> PathBuf {
    PathBuf::from(".league-cache")
}

/// One run. Relative paths in a config file resolve against the file's
/// directory; paths given as flags resolve against the working directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topic: String,
    pub cutoff_date: NaiveDate,
    #[serde(default = "default_k")]
    pub k_datasets: usize,
    /// Maximum rows per board.
    #[serde(default = "default_items")]
    pub items: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_threshold")]
    pub relevance_threshold: f64,
    #[serde(default = "default_max_results")]
    pub max_results: usize,
    pub source_kind: SourceKind,
    #[serde(default)]
    pub fixture_dir: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_cache")]
    pub cache_dir: PathBuf,
    /// Forbids every network call.
    #[serde(default)]
    pub offline: bool,
    /// Replaces the built-in metric alias and direction table.
    #[serde(default)]
    pub metrics_table: Option<PathBuf>,
    pub extraction: ProviderProfile,
    /// Defaults to the extraction profile.
    #[serde(default)]
    pub judge: Option<ProviderProfile>,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub topic: Option<String>,
    pub cutoff: Option<NaiveDate>,
    pub k: Option<usize>,
    pub items: Option<usize>,
    pub iters: Option<usize>,
    /// Path to a provider profile file.
    pub provider: Option<PathBuf>,
    pub judge: Option<PathBuf>,
    /// `arxiv`, or a fixture directory.
    pub source: Option<String>,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub offline: bool,
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn rebase_profile(base: &Path, profile: &mut ProviderProfile) {
    if let Some(s) = &profile.script {
        let p = Path::new(s);
        if p.is_relative() {
            profile.script = Some(base.join(p).to_string_lossy().into_owned());
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a provider profile file (TOML); its script path resolves against
/// the file's directory.
pub fn load_profile(path: &Path) -> Result<ProviderProfile, ConfigError> {
    let mut profile: ProviderProfile = toml::from_str(&read(path)?).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    rebase_profile(path.parent().unwrap_or(Path::new(".")), &mut profile);
    Ok(profile)
}

impl RunConfig {
    /// A configuration with every default filled in.
    pub fn new(topic: &str, cutoff_date: NaiveDate, source_kind: SourceKind, extraction: ProviderProfile) -> RunConfig {
        RunConfig {
            topic: topic.to_string(),
            cutoff_date,
            k_datasets: default_k(),
            items: default_items(),
            iters: default_iters(),
            relevance_threshold: default_threshold(),
            max_results: default_max_results(),
            source_kind,
            fixture_dir: None,
            output_dir: default_output(),
            cache_dir: default_cache(),
            offline: false,
            metrics_table: None,
            extraction,
            judge: None,
        }
    }

    pub fn parse(text: &str, base: &Path) -> Result<RunConfig, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: base.to_path_buf(),
            message: e.to_string(),
        })?;
        if let Some(d) = &mut cfg.fixture_dir {
            rebase(base, d);
        }
        if let Some(m) = &mut cfg.metrics_table {
            rebase(base, m);
        }
        rebase(base, &mut cfg.output_dir);
        rebase(base, &mut cfg.cache_dir);
        rebase_profile(base, &mut cfg.extraction);
        if let Some(j) = &mut cfg.judge {
            rebase_profile(base, j);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        Self::parse(&read(path)?, path.parent().unwrap_or(Path::new("."))).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn apply(&mut self, o: Overrides) -> Result<(), ConfigError> {
        if let Some(t) = o.topic {
            self.topic = t;
        }
        if let Some(c) = o.cutoff {
            self.cutoff_date = c;
        }
        if let Some(k) = o.k {
            self.k_datasets = k;
        }
        if let Some(n) = o.items {
            self.items = n;
        }
        if let Some(n) = o.iters {
            self.iters = n;
        }
        if let Some(p) = o.provider {
            self.extraction = load_profile(&p)?;
        }
        if let Some(p) = o.judge {
            self.judge = Some(load_profile(&p)?);
        }
        match o.source.as_deref() {
            None => {}
            Some("arxiv") => {
                self.source_kind = SourceKind::Arxiv;
                self.fixture_dir = None;
            }
            Some(dir) => {
                self.source_kind = SourceKind::FixtureDir;
                self.fixture_dir = Some(PathBuf::from(dir));
            }
        }
        if let Some(p) = o.out {
            self.output_dir = p;
        }
        if let Some(p) = o.cache {
            self.cache_dir = p;
        }
        self.offline |= o.offline;
        Ok(())
    }

    pub fn judge_profile(&self) -> &ProviderProfile {
        self.judge.as_ref().unwrap_or(&self.extraction)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.topic.trim().is_empty() {
            return bad("topic is empty".into());
        }
        for (name, v) in [
            ("k_datasets", self.k_datasets),
            ("items", self.items),
            ("iters", self.iters),
            ("max_results", self.max_results),
        ] {
            if v < 1 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.relevance_threshold) {
            return bad(format!(
                "relevance_threshold {} is outside [0, 1]",
                self.relevance_threshold
            ));
        }
        if self.source_kind == SourceKind::FixtureDir && self.fixture_dir.is_none() {
            return bad("a fixture_dir source needs fixture_dir".into());
        }
        for (name, p) in [("extraction", &self.extraction), ("judge", self.judge_profile())] {
            p.validate()
                .map_err(|m| ConfigError::Invalid(format!("{name} profile: {m}")))?;
            if self.offline && p.provider_kind == ProviderKind::LiveHttp {
                return bad(format!("{name} profile is live but the run is offline"));
            }
        }
        if self.offline && self.source_kind == SourceKind::Arxiv {
            return bad("the arxiv source needs the network but the run is offline".into());
        }
        Ok(())
    }
}
