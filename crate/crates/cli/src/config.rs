//! Layered configuration. A TOML file supplies the base, command-line flags
//! (and their `INFODENSITY_*` environment variables, resolved by clap) are
//! applied on top.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use infodensity_core::analysis::DEFAULT_INTERP_POINTS;
use infodensity_core::ingest::{SegmentationConfig, Segmenter};
use infodensity_core::judge::JudgeConfig;
use infodensity_core::reward::RewardParams;
use serde::{Deserialize, Serialize};

use crate::cli::GlobalArgs;
use crate::CliError;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub interp_points: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            interp_points: DEFAULT_INTERP_POINTS,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub rollouts: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub labeled: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: DEFAULT_BIND.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogConfig {
    /// One of error, warn, info, debug, trace.
    pub level: String,
}

impl Default for LogConfig {
    fn default() -> Self {
        Self { level: "info".into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub judge: JudgeConfig,
    pub reward: RewardParams,
    pub segmentation: SegmentationConfig,
    pub analysis: AnalysisConfig,
    pub paths: PathsConfig,
    pub service: ServiceConfig,
    pub log: LogConfig,
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p.as_mut() {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        rebase(base, &mut cfg.judge.mock_fixture);
        rebase(base, &mut cfg.paths.rollouts);
        rebase(base, &mut cfg.paths.out);
        rebase(base, &mut cfg.paths.labeled);
        rebase(base, &mut cfg.paths.out_dir);
        Ok(cfg)
    }

    /// Config file (if any) with the global flags applied.
    pub fn resolve(globals: &GlobalArgs) -> Result<Self, CliError> {
        let mut cfg = match &globals.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        cfg.apply_globals(globals);
        Ok(cfg)
    }

    pub fn apply_globals(&mut self, g: &GlobalArgs) {
        let j = &mut self.judge;
        if let Some(b) = g.judge_backend {
            j.backend = b.into();
        }
        if let Some(u) = &g.judge_endpoint {
            j.endpoint_url = u.clone();
        }
        if let Some(m) = &g.judge_model {
            j.model_name = m.clone();
        }
        if let Some(f) = &g.mock_fixture {
            j.mock_fixture = Some(f.clone());
        }
        if let Some(t) = &g.auth_token {
            j.auth_token = Some(t.clone());
        }
        if let Some(k) = g.top_k {
            j.top_k = k;
        }
        if let Some(n) = g.max_parallel_requests {
            j.max_parallel_requests = n;
        }
        if let Some(ms) = g.request_timeout_ms {
            j.request_timeout_ms = ms;
        }
        if let Some(level) = &g.log_level {
            self.log.level = level.clone();
        }
    }

    pub fn bind_addr(&self) -> Result<SocketAddr, CliError> {
        let addr: SocketAddr = self
            .service
            .bind
            .parse()
            .map_err(|e| CliError::Config(format!("service.bind {:?}: {e}", self.service.bind)))?;
        if addr.port() == 0 {
            return Err(CliError::Config("service.bind port must be in 1..=65535".into()));
        }
        Ok(addr)
    }

    pub fn log_level(&self) -> Result<tracing::Level, CliError> {
        self.log
            .level
            .parse()
            .map_err(|_| CliError::Config(format!("unknown log level {:?}", self.log.level)))
    }

    /// Checks everything the scoring engine and analysis need. The judge
    /// section is checked separately because analysis over precomputed
    /// trajectories runs without one.
    pub fn validate(&self) -> Result<(), CliError> {
        self.reward
            .validate()
            .map_err(|e| CliError::Config(format!("reward: {e}")))?;
        Segmenter::new(&self.segmentation).map_err(|e| CliError::Config(format!("segmentation: {e}")))?;
        if self.analysis.interp_points < 2 {
            return Err(CliError::Config("analysis.interp_points must be at least 2".into()));
        }
        self.bind_addr()?;
        self.log_level()?;
        Ok(())
    }
}
