//! Paper harvesting: search a source, filter by date and topic relevance, and
//! download LaTeX sources.

mod archive;
mod arxiv;
mod fixture;

use std::collections::BTreeSet;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::latex::LatexBundle;

pub use archive::bundle_from_archive;
pub use arxiv::{parse_atom_feed, ArxivSource, ARXIV_API_BASE, ARXIV_EPRINT_BASE};
pub use fixture::{parse_fixture, FixtureSource};

/// Relevance threshold used when the configuration does not set one.
pub const DEFAULT_RELEVANCE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("source unreachable: {0}")]
    SourceUnreachable(String),
    #[error("malformed source response: {0}")]
    MalformedResponse(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "reason", content = "detail", rename_all = "snake_case")]
pub enum FetchError {
    #[error("source archive unavailable: {0}")]
    ArchiveUnavailable(String),
    #[error("source archive has no .tex member")]
    ArchiveNotLatex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Arxiv,
    FixtureDir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceQuery {
    pub topic: String,
    pub cutoff_date: NaiveDate,
    pub max_results: usize,
    pub source_kind: SourceKind,
}

impl SourceQuery {
    pub fn validate(&self) -> Result<(), HarvestError> {
        if self.topic.trim().is_empty() {
            return Err(HarvestError::InvalidQuery("topic is empty".into()));
        }
        if self.max_results == 0 {
            return Err(HarvestError::InvalidQuery("max_results must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum FetchStatus {
    Pending,
    Fetched,
    Failed { error: FetchError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub published: NaiveDate,
    pub relevance: f64,
    pub latex_bundle: Option<LatexBundle>,
    pub fetch_status: FetchStatus,
}

impl PaperRecord {
    pub fn new(
        paper_id: impl Into<String>,
        title: impl Into<String>,
        abstract_text: impl Into<String>,
        published: NaiveDate,
    ) -> Self {
        Self {
            paper_id: paper_id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
            published,
            relevance: 0.0,
            latex_bundle: None,
            fetch_status: FetchStatus::Pending,
        }
    }

    pub fn is_fetched(&self) -> bool {
        self.fetch_status == FetchStatus::Fetched
    }
}

/// A place papers come from. Implementations only fetch; validation, ordering
/// and truncation live in [`search_papers`] and [`fetch_source`].
pub trait PaperSource: Send + Sync {
    fn kind(&self) -> SourceKind;

    fn search(&self, query: &SourceQuery) -> Result<Vec<PaperRecord>, HarvestError>;

    fn download(&self, paper: &PaperRecord) -> Result<LatexBundle, FetchError>;
}

/// Searches `source`, returning at most `max_results` metadata-only records
/// with unique ids. Fixture sources come back sorted by id.
pub fn search_papers(source: &dyn PaperSource, query: &SourceQuery) -> Result<Vec<PaperRecord>, HarvestError> {
    query.validate()?;
    let mut records = source.search(query)?;
    if source.kind() == SourceKind::FixtureDir {
        records.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
    }
    let mut seen = BTreeSet::new();
    records.retain(|r| seen.insert(r.paper_id.clone()));
    for r in &records {
        if r.paper_id.is_empty() || r.title.trim().is_empty() {
            return Err(HarvestError::MalformedResponse(format!(
                "record without id or title: {:?}",
                r.paper_id
            )));
        }
    }
    records.truncate(query.max_results);
    for r in &mut records {
        r.latex_bundle = None;
        r.fetch_status = FetchStatus::Pending;
    }
    Ok(records)
}

/// Records published on or after `cutoff`, in input order.
pub fn filter_by_date(papers: Vec<PaperRecord>, cutoff: NaiveDate) -> Vec<PaperRecord> {
    papers.into_iter().filter(|p| p.published >= cutoff).collect()
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Fraction of distinct topic tokens present in the title or abstract.
///
/// A topic without any alphanumeric token scores 0.
pub fn score_relevance(paper: &PaperRecord, topic: &str) -> f64 {
    let wanted: BTreeSet<String> = tokenize(topic).collect();
    if wanted.is_empty() {
        return 0.0;
    }
    let present: BTreeSet<String> = tokenize(&paper.title).chain(tokenize(&paper.abstract_text)).collect();
    let matched = wanted.iter().filter(|t| present.contains(*t)).count();
    matched as f64 / wanted.len() as f64
}

/// Keeps records scoring at least `threshold`; each kept record carries its score.
pub fn filter_by_relevance(papers: Vec<PaperRecord>, topic: &str, threshold: f64) -> Vec<PaperRecord> {
    debug_assert!((0.0..=1.0).contains(&threshold));
    papers
        .into_iter()
        .filter_map(|mut p| {
            p.relevance = score_relevance(&p, topic);
            (p.relevance >= threshold).then_some(p)
        })
        .collect()
}

/// Downloads the LaTeX source of a pending record. Failures are recorded on
/// the record, which is always returned. Non-pending records come back unchanged.
pub fn fetch_source(source: &dyn PaperSource, mut paper: PaperRecord) -> PaperRecord {
    if paper.fetch_status != FetchStatus::Pending {
        return paper;
    }
    match source.download(&paper) {
        Ok(bundle) if !bundle.is_empty() => {
            paper.latex_bundle = Some(bundle);
            paper.fetch_status = FetchStatus::Fetched;
        }
        Ok(_) => {
            paper.latex_bundle = None;
            paper.fetch_status = FetchStatus::Failed {
                error: FetchError::ArchiveNotLatex,
            };
        }
        Err(error) => {
            log::warn!("fetch of {} failed: {error}", paper.paper_id);
            paper.latex_bundle = None;
            paper.fetch_status = FetchStatus::Failed { error };
        }
    }
    paper
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn paper(id: &str, title: &str, abs: &str, published: &str) -> PaperRecord {
        PaperRecord::new(id, title, abs, date(published))
    }

    #[test]
    fn date_filter_keeps_on_or_after() {
        let ps = vec![
            paper("a", "t", "", "2023-01-01"),
            paper("b", "t", "", "2024-06-01"),
            paper("c", "t", "", "2025-01-01"),
        ];
        let ids: Vec<_> = filter_by_date(ps.clone(), date("2024-01-01"))
            .into_iter()
            .map(|p| p.paper_id)
            .collect();
        assert_eq!(ids, vec!["b", "c"]);
        assert_eq!(filter_by_date(ps.clone(), date("2000-01-01")), ps);
    }

    #[test]
    fn relevance_floor_and_ceiling() {
        let p = paper("a", "Graph kernels", "We study graphs.", "2024-01-01");
        assert_eq!(score_relevance(&p, "medical image segmentation"), 0.0);
        let topic = "semi-supervised medical image segmentation";
        let p = paper("b", "Untitled", topic, "2024-01-01");
        assert_eq!(score_relevance(&p, topic), 1.0);
    }

    #[test]
    fn relevance_half_match() {
        // topic tokens {multi, hop, question, answering}; "question" and
        // "answering" appear in the abstract: 2/4.
        let p = paper(
            "a",
            "Reading comprehension",
            "Open-domain question answering at scale.",
            "2024-01-01",
        );
        assert_eq!(score_relevance(&p, "multi-hop question answering"), 0.5);
    }

    #[test]
    fn relevance_threshold_edges() {
        let topic = "medical image segmentation";
        let ps = vec![
            paper("a", "Medical image segmentation", "", "2024-01-01"),
            paper("b", "Medical imaging", "", "2024-01-01"),
            paper("c", "Nothing", "", "2024-01-01"),
        ];
        assert_eq!(filter_by_relevance(ps.clone(), topic, 0.0).len(), 3);
        let full = filter_by_relevance(ps, topic, 1.0);
        assert_eq!(full.len(), 1);
        assert_eq!(full[0].paper_id, "a");
        assert_eq!(full[0].relevance, 1.0);
    }

    #[test]
    fn empty_topic_is_rejected() {
        let q = SourceQuery {
            topic: "   ".into(),
            cutoff_date: date("2024-01-01"),
            max_results: 5,
            source_kind: SourceKind::FixtureDir,
        };
        assert!(matches!(q.validate(), Err(HarvestError::InvalidQuery(_))));
    }

    fn arb_papers() -> impl Strategy<Value = Vec<PaperRecord>> {
        proptest::collection::vec((0u32..3000, "[a-z ]{0,30}"), 0..200).prop_map(|items| {
            items
                .into_iter()
                .enumerate()
                .map(|(i, (days, abs))| {
                    let d = date("2020-01-01") + chrono::Duration::days(days as i64);
                    PaperRecord::new(format!("p{i:04}"), "title", abs, d)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn date_filter_matches_linear_scan(ps in arb_papers(), offset in 0u32..3000) {
            let cutoff = date("2020-01-01") + chrono::Duration::days(offset as i64);
            let mut expected = Vec::new();
            for p in &ps {
                if p.published >= cutoff {
                    expected.push(p.clone());
                }
            }
            let got = filter_by_date(ps.clone(), cutoff);
            prop_assert_eq!(&got, &expected);
            prop_assert_eq!(filter_by_date(got.clone(), cutoff), got);
        }

        #[test]
        fn relevance_filter_is_ordered_subset(ps in arb_papers(), threshold in 0.0f64..=1.0) {
            let topic = "deep graph learning";
            let got = filter_by_relevance(ps.clone(), topic, threshold);
            let mut it = ps.iter();
            for g in &got {
                prop_assert!(g.relevance >= threshold);
                prop_assert!(it.any(|p| p.paper_id == g.paper_id));
            }
        }

        #[test]
        fn relevance_is_monotone_in_matches(extra in proptest::collection::vec("[a-z]{2,6}", 0..6)) {
            let topic = "alpha beta gamma delta";
            let base = PaperRecord::new("x", "alpha", extra.join(" "), date("2024-01-01"));
            let mut richer = base.clone();
            richer.abstract_text.push_str(" beta");
            prop_assert!(score_relevance(&richer, topic) >= score_relevance(&base, topic));
        }
    }
}
