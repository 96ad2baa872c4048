//! The whole run: harvest, parse, census, digest, assemble, refine, judge
//! and select, with every provider call going through the cache.

use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cache::{sha256_hex, Cache, CacheError, CacheKey, Stage};
use super::config::{ConfigError, RunConfig};
use crate::assembly::{
    assemble_board, build_quintuples, census_datasets, Conflict, DatasetCensus, DigestRecord, LeaderboardTable,
    MetricKnowledge,
};
use crate::eval::{
    refine_board, score_multiaspect, score_structure, select_best_index, Candidate, CandidateSet, Edit, EvalError,
    QualityReport, Rejection, Score, StructureJudgment,
};
use crate::harvest::{
    fetch_source, filter_by_date, filter_by_relevance, search_papers, ArxivSource, FetchStatus, FixtureSource,
    HarvestError, PaperRecord, PaperSource, SourceKind, SourceQuery,
};
use crate::http::{LiveTransport, OfflineTransport, Transport};
use crate::intel::{digest_paper, list_datasets, Billed, IntelError, TableDigest};
use crate::latex::{parse_bundle, LatexBundle, ParsedPaper};
use crate::llm::{
    estimate_cost, totals_of, Cost, Gateway, LiveProvider, LlmError, Provider, ProviderKind, ProviderProfile,
    ScriptedMock, UsageEntry, UsageTotals,
};
use crate::prompts;

pub const API_KEY_ENV: &str = "LEAGUE_API_KEY";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("no papers survived {0}")]
    NoPapersSurvived(String),
    #[error("{stage}: provider failed: {message}")]
    Provider { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// 2 for configuration, 3 for provider or source failures, 4 for an
    /// empty corpus, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Provider { .. } => 3,
            PipelineError::NoPapersSurvived(_) => 4,
            _ => 1,
        }
    }
}

/// Process-level dependencies: the HTTP transport and the API key.
pub struct Runtime {
    pub transport: Arc<dyn Transport>,
    pub api_key: Option<String>,
    /// Space arXiv requests out as its usage policy asks.
    pub polite: bool,
}

impl Runtime {
    /// Live transport unless offline; key from `LEAGUE_API_KEY`.
    pub fn from_env(offline: bool) -> Result<Runtime, PipelineError> {
        let transport: Arc<dyn Transport> = if offline {
            Arc::new(OfflineTransport)
        } else {
            Arc::new(
                LiveTransport::new(Duration::from_secs(120)).map_err(|e| PipelineError::Provider {
                    stage: "setup",
                    message: e.to_string(),
                })?,
            )
        };
        Ok(Runtime {
            transport,
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            polite: true,
        })
    }

    pub fn offline() -> Runtime {
        Runtime {
            transport: Arc::new(OfflineTransport),
            api_key: None,
            polite: false,
        }
    }
}

/// Something left out of the run, and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub paper_id: String,
    pub stage: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub retrieved: usize,
    pub relevant: usize,
    pub recent: usize,
    pub fetched: usize,
    pub parsed: usize,
    pub digests: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub applied: Vec<Edit>,
    pub rejected: Vec<Rejection>,
    pub structure: Option<StructureJudgment>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetOutcome {
    pub dataset: String,
    pub best_index: usize,
    pub board: LeaderboardTable,
    pub report: QualityReport,
    pub candidates: CandidateSet,
    pub iterations: Vec<IterationLog>,
    pub conflicts: Vec<Conflict>,
    /// The digests the board was assembled from, in paper order.
    pub digests: Vec<DigestRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct UsageSummary {
    pub extraction: UsageTotals,
    pub judge: UsageTotals,
    pub total: UsageTotals,
}

/// Wall-clock figures. They differ between runs, so they are kept apart
/// from the deterministic artifacts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub stages: IndexMap<String, f64>,
    pub total_seconds: f64,
    /// Calls that reached a provider in this process; cached results are free.
    pub provider_calls: u64,
    /// Summed provider latency of those calls.
    pub provider_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunArtifacts {
    pub topic: String,
    pub cutoff_date: NaiveDate,
    pub counts: Counts,
    pub census: DatasetCensus,
    pub datasets: Vec<DatasetOutcome>,
    pub multiaspect: Score,
    pub usage: UsageSummary,
    #[serde(serialize_with = "serialize_cost")]
    pub cost: Cost,
    pub skipped: Vec<Skip>,
    pub timing: TimingReport,
}

fn serialize_cost<S: serde::Serializer>(c: &Cost, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&c.display_3dp())
}

/// Identity of a provider setup, for cache keys: anything that can change
/// a reply is in here, including the mock script's contents.
#[derive(Debug, Serialize)]
struct ProfileId {
    kind: ProviderKind,
    model: String,
    temperature: f64,
    max_output_tokens: u32,
    input_token_cap: usize,
    endpoint: Option<String>,
    script_sha: Option<String>,
}

struct Provisioned {
    gateway: Gateway,
    id: ProfileId,
}

fn provision(profile: &ProviderProfile, runtime: &Runtime, role: &str) -> Result<Provisioned, PipelineError> {
    let config_err = |m: String| PipelineError::Config(ConfigError::Invalid(format!("{role} profile: {m}")));
    let (provider, script_sha): (Box<dyn Provider>, Option<String>) = match profile.provider_kind {
        ProviderKind::ScriptedMock => {
            let path = profile
                .script
                .as_deref()
                .ok_or_else(|| config_err("no script".into()))?;
            let bytes = std::fs::read(path).map_err(|e| config_err(format!("{path}: {e}")))?;
            let mock = ScriptedMock::load(Path::new(path)).map_err(|e| config_err(e.to_string()))?;
            (Box::new(mock), Some(sha256_hex(&bytes)))
        }
        ProviderKind::LiveHttp => {
            let endpoint = profile
                .endpoint
                .clone()
                .ok_or_else(|| config_err("no endpoint".into()))?;
            if runtime.api_key.is_none() {
                log::warn!("{role} profile is live but {API_KEY_ENV} is not set");
            }
            (
                Box::new(LiveProvider::new(
                    runtime.transport.clone(),
                    endpoint,
                    runtime.api_key.clone(),
                )),
                None,
            )
        }
    };
    Ok(Provisioned {
        gateway: Gateway::new(provider, profile.clone()),
        id: ProfileId {
            kind: profile.provider_kind,
            model: profile.model_name.clone(),
            temperature: profile.temperature,
            max_output_tokens: profile.max_output_tokens,
            input_token_cap: profile.input_token_cap,
            endpoint: profile.endpoint.clone(),
            script_sha,
        },
    })
}

/// A provider-backed result as stored in the cache.
#[derive(Serialize, Deserialize)]
struct StoredCall<T> {
    ok: Option<T>,
    error: Option<String>,
    usage: Vec<UsageEntry>,
}

fn transient(e: &LlmError) -> bool {
    matches!(e, LlmError::Provider(_) | LlmError::ScriptMiss { .. })
}

/// Runs `op` unless its result is cached. Hits replay their usage into the
/// gateway's ledger so totals match the original run. Provider failures are
/// never cached and abort the run; other failures are cached like results.
fn cached_call<T, E>(
    cache: &Cache,
    stage: Stage,
    gateway: &Gateway,
    inputs: &impl Serialize,
    is_transient: impl Fn(&E) -> bool,
    op: impl FnOnce() -> Billed<Result<T, E>>,
) -> Result<Result<T, String>, PipelineError>
where
    T: Serialize + DeserializeOwned,
    E: Display,
{
    let key = CacheKey::of(stage, inputs);
    if let Some(stored) = cache.get_json::<StoredCall<T>>(&key)? {
        for e in &stored.usage {
            gateway.ledger().append(e.clone());
        }
        return Ok(match (stored.ok, stored.error) {
            (Some(v), _) => Ok(v),
            (None, e) => Err(e.unwrap_or_default()),
        });
    }
    let billed = op();
    let usage: Vec<UsageEntry> = billed
        .usage
        .into_iter()
        .map(|mut e| {
            e.wall_time = 0.0;
            e
        })
        .collect();
    let (ok, error) = match billed.value {
        Ok(v) => (Some(v), None),
        Err(e) if is_transient(&e) => {
            return Err(PipelineError::Provider {
                stage: stage.name(),
                message: e.to_string(),
            })
        }
        Err(e) => (None, Some(e.to_string())),
    };
    let stored = StoredCall { ok, error, usage };
    cache.put_json(&key, &stored)?;
    Ok(match (stored.ok, stored.error) {
        (Some(v), _) => Ok(v),
        (None, e) => Err(e.unwrap_or_default()),
    })
}

fn intel_transient(e: &IntelError) -> bool {
    matches!(e, IntelError::Llm(l) if transient(l))
}

fn eval_transient(e: &EvalError) -> bool {
    matches!(e, EvalError::Llm(l) if transient(l))
}

fn harvest_error(stage: &'static str, e: HarvestError) -> PipelineError {
    match e {
        HarvestError::InvalidQuery(m) => PipelineError::Config(ConfigError::Invalid(m)),
        HarvestError::SourceUnreachable(m) => PipelineError::Provider { stage, message: m },
        HarvestError::MalformedResponse(m) => PipelineError::Stage { stage, message: m },
    }
}

struct Paper {
    record: PaperRecord,
    parsed: ParsedPaper,
    doc_sha: String,
}

fn timed<T>(timings: &mut IndexMap<String, f64>, name: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *timings.entry(name.to_string()).or_default() += start.elapsed().as_secs_f64();
    out
}

fn search(config: &RunConfig, source: &dyn PaperSource, cache: &Cache) -> Result<Vec<PaperRecord>, PipelineError> {
    let query = SourceQuery {
        topic: config.topic.clone(),
        cutoff_date: config.cutoff_date,
        max_results: config.max_results,
        source_kind: config.source_kind,
    };
    if source.kind() != SourceKind::Arxiv {
        return search_papers(source, &query).map_err(|e| harvest_error("search", e));
    }
    let key = CacheKey::of(Stage::Search, &query);
    if let Some(records) = cache.get_json(&key)? {
        return Ok(records);
    }
    let records = search_papers(source, &query).map_err(|e| harvest_error("search", e))?;
    cache.put_json(&key, &records)?;
    Ok(records)
}

fn fetch(source: &dyn PaperSource, cache: &Cache, paper: PaperRecord) -> Result<PaperRecord, PipelineError> {
    if source.kind() != SourceKind::Arxiv {
        return Ok(fetch_source(source, paper));
    }
    let key = CacheKey::of(Stage::Fetch, &paper.paper_id);
    if let Some(bundle) = cache.get_json::<LatexBundle>(&key)? {
        let mut paper = paper;
        paper.latex_bundle = Some(bundle);
        paper.fetch_status = FetchStatus::Fetched;
        return Ok(paper);
    }
    let paper = fetch_source(source, paper);
    if let Some(b) = &paper.latex_bundle {
        cache.put_json(&key, b)?;
    }
    Ok(paper)
}

/// Runs every stage and returns the artifacts; nothing is written outside
/// the cache. See [`super::emit_report`] for the output files.
pub fn run_pipeline(config: &RunConfig, runtime: &Runtime) -> Result<RunArtifacts, PipelineError> {
    config.validate()?;
    let started = Instant::now();
    let mut timings: IndexMap<String, f64> = IndexMap::new();
    let cache = Cache::new(&config.cache_dir);
    let knowledge = match &config.metrics_table {
        Some(p) => MetricKnowledge::load(p).map_err(|e| ConfigError::Invalid(e.to_string()))?,
        None => MetricKnowledge::builtin().clone(),
    };
    let extraction = provision(&config.extraction, runtime, "extraction")?;
    let judge = provision(config.judge_profile(), runtime, "judge")?;
    let source: Box<dyn PaperSource> = match config.source_kind {
        SourceKind::FixtureDir => Box::new(FixtureSource::new(config.fixture_dir.clone().expect("validated"))),
        SourceKind::Arxiv => {
            let s = ArxivSource::new(runtime.transport.clone());
            Box::new(if runtime.polite { s } else { s.without_delays() })
        }
    };
    let mut counts = Counts::default();
    let mut skipped: Vec<Skip> = Vec::new();
    let skip = |paper_id: &str, stage: &str, reason: String| Skip {
        paper_id: paper_id.to_string(),
        stage: stage.to_string(),
        reason,
    };

    // collection and filtering
    let records = timed(&mut timings, "search", || search(config, source.as_ref(), &cache))?;
    counts.retrieved = records.len();
    let relevant = filter_by_relevance(records, &config.topic, config.relevance_threshold);
    counts.relevant = relevant.len();
    let p_total = relevant.len();
    let p_new = relevant.iter().filter(|p| p.published >= config.cutoff_date).count();
    let recent = filter_by_date(relevant, config.cutoff_date);
    counts.recent = recent.len();
    if recent.is_empty() {
        return Err(PipelineError::NoPapersSurvived("the date and relevance filters".into()));
    }

    let fetched: Vec<PaperRecord> = timed(&mut timings, "fetch", || {
        recent
            .into_par_iter()
            .map(|p| fetch(source.as_ref(), &cache, p))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut papers = Vec::new();
    timed(&mut timings, "parse", || {
        let parsed: Vec<(PaperRecord, Result<ParsedPaper, String>)> = fetched
            .into_par_iter()
            .map(|p| {
                let parsed = match (&p.fetch_status, &p.latex_bundle) {
                    (FetchStatus::Fetched, Some(b)) => parse_bundle(b).map_err(|e| e.to_string()),
                    (FetchStatus::Failed { error }, _) => Err(format!("fetch failed: {error}")),
                    _ => Err("no source".into()),
                };
                (p, parsed)
            })
            .collect();
        for (record, parsed) in parsed {
            if record.is_fetched() {
                counts.fetched += 1;
            }
            match parsed {
                Ok(p) if p.tables.is_empty() => skipped.push(skip(&record.paper_id, "parse", "no tables".into())),
                Ok(parsed) => {
                    let doc_sha = sha256_hex(parsed.document.as_bytes());
                    papers.push(Paper {
                        record,
                        parsed,
                        doc_sha,
                    });
                }
                Err(e) => skipped.push(skip(&record.paper_id, "parse", e)),
            }
        }
    });
    counts.parsed = papers.len();
    if papers.is_empty() {
        return Err(PipelineError::NoPapersSurvived("fetching and parsing".into()));
    }

    // which datasets each paper reports on, then the census
    let datasets_prompt = sha256_hex(prompts::DATASETS.as_bytes());
    let listed: Vec<Result<Vec<String>, String>> = timed(&mut timings, "datasets", || {
        papers
            .par_iter()
            .map(|p| {
                let inputs = (
                    &extraction.id,
                    &datasets_prompt,
                    &p.record.paper_id,
                    &p.record.title,
                    &p.doc_sha,
                );
                cached_call(
                    &cache,
                    Stage::Datasets,
                    &extraction.gateway,
                    &inputs,
                    intel_transient,
                    || list_datasets(&p.record.title, &p.parsed.experiment_text(), &extraction.gateway),
                )
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut mentions: Vec<(String, String)> = Vec::new();
    let mut paper_datasets: Vec<BTreeSet<String>> = Vec::new();
    for (p, l) in papers.iter().zip(listed) {
        match l {
            Ok(names) => {
                paper_datasets.push(names.iter().map(|n| n.to_lowercase()).collect());
                mentions.extend(names.into_iter().map(|n| (p.record.paper_id.clone(), n)));
            }
            Err(e) => {
                paper_datasets.push(BTreeSet::new());
                skipped.push(skip(&p.record.paper_id, "datasets", e));
            }
        }
    }
    let census = census_datasets(&mentions, config.k_datasets)
        .map_err(|_| PipelineError::NoPapersSurvived("the dataset census".into()))?;

    let tasks: Vec<(usize, usize)> = census
        .selected
        .iter()
        .enumerate()
        .flat_map(|(d, name)| {
            let key = name.to_lowercase();
            paper_datasets
                .iter()
                .enumerate()
                .filter(move |(_, set)| set.contains(&key))
                .map(move |(p, _)| (d, p))
        })
        .collect();
    let digests: Vec<Result<TableDigest, String>> = timed(&mut timings, "digest", || {
        tasks
            .par_iter()
            .map(|&(d, p)| {
                let dataset = &census.selected[d];
                let paper = &papers[p];
                let system = sha256_hex(prompts::extraction_system(dataset).as_bytes());
                let inputs = (&extraction.id, &system, &paper.record.paper_id, &paper.doc_sha, dataset);
                cached_call(
                    &cache,
                    Stage::Digest,
                    &extraction.gateway,
                    &inputs,
                    intel_transient,
                    || {
                        digest_paper(
                            &paper.parsed.tables,
                            &paper.record.title,
                            dataset,
                            &paper.parsed.experiment_text(),
                            &extraction.gateway,
                        )
                    },
                )
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut per_dataset: Vec<Vec<DigestRecord>> = vec![Vec::new(); census.selected.len()];
    for (&(d, p), digest) in tasks.iter().zip(digests) {
        let record = &papers[p].record;
        match digest {
            Ok(mut digest) => {
                if digest.title != record.title {
                    log::debug!(
                        "{}: digest title {:?} replaced by {:?}",
                        record.paper_id,
                        digest.title,
                        record.title
                    );
                }
                // the harvested title is the row identity
                digest.title = record.title.clone();
                per_dataset[d].push(DigestRecord {
                    paper_id: record.paper_id.clone(),
                    published: record.published,
                    digest,
                });
                counts.digests += 1;
            }
            Err(e) => skipped.push(skip(&record.paper_id, &format!("digest {}", census.selected[d]), e)),
        }
    }

    // assemble, then refine and judge once per iteration
    let refine_prompt = sha256_hex(prompts::REFINE.as_bytes());
    let judge_prompt = sha256_hex(prompts::STRUCTURE_JUDGE.as_bytes());
    let outcomes: Vec<DatasetOutcome> = timed(&mut timings, "boards", || {
        census
            .selected
            .par_iter()
            .zip(per_dataset)
            .map(|(dataset, records)| {
                let assembled = assemble_board(dataset, build_quintuples(&records), config.items, &knowledge);
                let mut candidates = Vec::new();
                let mut iterations = Vec::new();
                for i in 1..=config.iters {
                    let variant = format!("{i} of {}", config.iters);
                    let inputs = (&judge.id, &refine_prompt, &assembled.board, &variant);
                    let refined = cached_call(&cache, Stage::Refine, &judge.gateway, &inputs, eval_transient, || {
                        refine_board(assembled.board.clone(), &judge.gateway, Some(&variant))
                    })?;
                    let mut log = IterationLog {
                        iteration: i,
                        applied: Vec::new(),
                        rejected: Vec::new(),
                        structure: None,
                        note: None,
                    };
                    let board = match refined {
                        Ok(r) => {
                            log.applied = r.applied;
                            log.rejected = r.rejected;
                            r.board
                        }
                        Err(e) => {
                            log.note = Some(format!("refinement failed, board kept as assembled: {e}"));
                            assembled.board.clone()
                        }
                    };
                    let inputs = (&judge.id, &judge_prompt, &board, &variant);
                    let judged = cached_call(&cache, Stage::Judge, &judge.gateway, &inputs, eval_transient, || {
                        score_structure(&board, &judge.gateway, Some(&variant))
                    })?;
                    match judged {
                        Ok(j) => {
                            let report = QualityReport::new(
                                dataset,
                                (board.rows.len(), p_total, p_new),
                                j.score,
                                j.rationale.clone(),
                            )
                            .map_err(|e| PipelineError::Stage {
                                stage: "judge",
                                message: e.to_string(),
                            })?;
                            log.structure = Some(j);
                            candidates.push(Candidate { board, report });
                        }
                        Err(e) => log.note = Some(format!("no structure score, candidate dropped: {e}")),
                    }
                    iterations.push(log);
                }
                let set = CandidateSet {
                    candidates,
                    iters: config.iters,
                };
                let best_index = select_best_index(&set).map_err(|_| PipelineError::Stage {
                    stage: "judge",
                    message: format!("no candidate board for {dataset} could be scored"),
                })?;
                Ok(DatasetOutcome {
                    dataset: dataset.clone(),
                    best_index,
                    board: set.candidates[best_index].board.clone(),
                    report: set.candidates[best_index].report.clone(),
                    candidates: set,
                    iterations,
                    conflicts: assembled.conflicts,
                    digests: records,
                })
            })
            .collect::<Result<Vec<_>, PipelineError>>()
    })?;

    let reports: Vec<QualityReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    let multiaspect = score_multiaspect(&reports).map_err(|e| PipelineError::Stage {
        stage: "report",
        message: e.to_string(),
    })?;
    let ex_entries = extraction.gateway.ledger().entries();
    let judge_entries = judge.gateway.ledger().entries();
    let (ex, ju) = (totals_of(&ex_entries), totals_of(&judge_entries));
    let usage = UsageSummary {
        extraction: ex,
        judge: ju,
        total: UsageTotals {
            requests: ex.requests + ju.requests,
            input_tokens: ex.input_tokens + ju.input_tokens,
            output_tokens: ex.output_tokens + ju.output_tokens,
        },
    };
    let cost = estimate_cost(&ex_entries, &config.extraction) + estimate_cost(&judge_entries, config.judge_profile());
    let provider_seconds = ex_entries.iter().chain(&judge_entries).map(|e| e.wall_time).sum();
    Ok(RunArtifacts {
        topic: config.topic.clone(),
        cutoff_date: config.cutoff_date,
        counts,
        census,
        datasets: outcomes,
        multiaspect,
        usage,
        cost,
        skipped,
        timing: TimingReport {
            stages: timings,
            total_seconds: started.elapsed().as_secs_f64(),
            provider_calls: extraction.gateway.provider_calls() + judge.gateway.provider_calls(),
            provider_seconds,
        },
    })
}
