//! Command-line surface. Every flag can also come from an environment
//! variable named `INFODENSITY_` plus the flag name in upper snake case.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use infodensity_core::judge::BackendKind;

#[derive(Debug, Parser)]
#[command(name = "infodensity", version, about = "Information-density rewards for reasoning traces")]
pub struct Cli {
    #[command(flatten)]
    pub globals: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Http,
    Mock,
}

impl From<Backend> for BackendKind {
    fn from(b: Backend) -> Self {
        match b {
            Backend::Http => BackendKind::Http,
            Backend::Mock => BackendKind::Mock,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true, env = "INFODENSITY_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "INFODENSITY_JUDGE_BACKEND")]
    pub judge_backend: Option<Backend>,
    /// Completions URL of the judge server.
    #[arg(long, global = true, env = "INFODENSITY_JUDGE_ENDPOINT")]
    pub judge_endpoint: Option<String>,
    #[arg(long, global = true, env = "INFODENSITY_JUDGE_MODEL")]
    pub judge_model: Option<String>,
    /// Fixture for the mock judge backend.
    #[arg(long, global = true, env = "INFODENSITY_MOCK_FIXTURE")]
    pub mock_fixture: Option<PathBuf>,
    /// Bearer token sent to the judge.
    #[arg(long, global = true, env = "INFODENSITY_AUTH_TOKEN", hide_env_values = true)]
    pub auth_token: Option<String>,
    #[arg(long, global = true, env = "INFODENSITY_TOP_K")]
    pub top_k: Option<u32>,
    #[arg(long, global = true, env = "INFODENSITY_MAX_PARALLEL_REQUESTS")]
    pub max_parallel_requests: Option<usize>,
    #[arg(long, global = true, env = "INFODENSITY_REQUEST_TIMEOUT_MS")]
    pub request_timeout_ms: Option<u64>,
    #[arg(long, global = true, env = "INFODENSITY_LOG_LEVEL")]
    pub log_level: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score rollout groups and write one reward record per trace.
    Score(ScoreArgs),
    /// Entropy-trajectory statistics over step-labelled traces.
    Analyze(AnalyzeArgs),
    /// Serve /v1/score, /v1/trajectory and /healthz.
    Serve(ServeArgs),
    /// Score and analyse the bundled synthetic fixtures with the mock judge.
    MockDemo(MockDemoArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScoreArgs {
    #[arg(long, env = "INFODENSITY_ROLLOUTS")]
    pub rollouts: Option<PathBuf>,
    #[arg(long, env = "INFODENSITY_OUT")]
    pub out: Option<PathBuf>,
    /// Fail on the first malformed record or unscorable group.
    #[arg(long, env = "INFODENSITY_STRICT")]
    pub strict: bool,
    #[arg(long, env = "INFODENSITY_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "INFODENSITY_LAMBDA")]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AnalyzeArgs {
    #[arg(long, env = "INFODENSITY_LABELED")]
    pub labeled: Option<PathBuf>,
    #[arg(long, env = "INFODENSITY_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, env = "INFODENSITY_INTERP_N")]
    pub interp_n: Option<usize>,
    #[arg(long, env = "INFODENSITY_STRICT")]
    pub strict: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ServeArgs {
    /// Address and port, e.g. 0.0.0.0:8080.
    #[arg(long, env = "INFODENSITY_BIND")]
    pub bind: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct MockDemoArgs {
    /// Also write rewards and analysis artifacts here.
    #[arg(long, env = "INFODENSITY_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}
