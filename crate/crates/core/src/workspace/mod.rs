//! Run configuration, the artifact cache, the end-to-end pipeline and the
//! report files.

mod cache;
mod config;
mod pipeline;
mod report;

pub use cache::{sha256_hex, Cache, CacheError, CacheKey, Stage};
pub use config::{load_profile, ConfigError, Overrides, RunConfig};
pub use pipeline::{
    run_pipeline, Counts, DatasetOutcome, IterationLog, PipelineError, RunArtifacts, Runtime, Skip, TimingReport,
    UsageSummary, API_KEY_ENV,
};
pub use report::{dataset_slug, emit_report, summary_json, ReportSummary};
