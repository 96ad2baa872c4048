use std::sync::Arc;
use std::time::Duration;

use chrono::NaiveDate;
use quick_xml::events::Event;
use quick_xml::Reader;

use super::{
    bundle_from_archive, tokenize, FetchError, HarvestError, PaperRecord, PaperSource, SourceKind, SourceQuery,
};
use crate::http::{HttpRequest, HttpResponse, Politeness, RetryPolicy, Transport, TransportError};
use crate::latex::LatexBundle;

pub const ARXIV_API_BASE: &str = "http://export.arxiv.org/api/query";
pub const ARXIV_EPRINT_BASE: &str = "https://arxiv.org/e-print";

/// arXiv asks clients to leave three seconds between calls.
const ARXIV_MIN_INTERVAL: Duration = Duration::from_secs(3);

/// The arXiv export API plus e-print source downloads.
pub struct ArxivSource {
    transport: Arc<dyn Transport>,
    politeness: Politeness,
    retry: RetryPolicy,
    api_base: String,
    eprint_base: String,
}

impl ArxivSource {
    pub fn new(transport: Arc<dyn Transport>) -> Self {
        Self {
            transport,
            politeness: Politeness::new(ARXIV_MIN_INTERVAL),
            retry: RetryPolicy::default(),
            api_base: ARXIV_API_BASE.into(),
            eprint_base: ARXIV_EPRINT_BASE.into(),
        }
    }

    /// For replayed traffic, where waiting buys nothing.
    pub fn without_delays(mut self) -> Self {
        self.politeness = Politeness::new(Duration::ZERO);
        self.retry = RetryPolicy::immediate(self.retry.max_retries);
        self
    }

    pub fn search_url(&self, query: &SourceQuery) -> String {
        let terms: Vec<String> = tokenize(&query.topic).map(|t| format!("abs:{t}")).collect();
        format!(
            "{}?search_query={}&start=0&max_results={}&sortBy=submittedDate&sortOrder=descending",
            self.api_base,
            terms.join("+AND+"),
            query.max_results
        )
    }

    pub fn eprint_url(&self, paper_id: &str) -> String {
        format!("{}/{paper_id}", self.eprint_base)
    }

    fn get(&self, url: &str) -> Result<HttpResponse, TransportError> {
        let request = HttpRequest::get(url);
        self.retry.run(|attempt| {
            if attempt > 0 {
                log::info!("retrying {url} (attempt {})", attempt + 1);
            }
            match self.politeness.run(|| self.transport.execute(&request)) {
                Ok(resp) if resp.is_server_error() => {
                    Err((TransportError::Network(format!("{url}: HTTP {}", resp.status)), true))
                }
                Ok(resp) => Ok(resp),
                Err(e @ TransportError::Network(_)) => Err((e, true)),
                Err(e) => Err((e, false)),
            }
        })
    }
}

impl PaperSource for ArxivSource {
    fn kind(&self) -> SourceKind {
        SourceKind::Arxiv
    }

    fn search(&self, query: &SourceQuery) -> Result<Vec<PaperRecord>, HarvestError> {
        let url = self.search_url(query);
        let resp = self
            .get(&url)
            .map_err(|e| HarvestError::SourceUnreachable(e.to_string()))?;
        if !resp.is_success() {
            return Err(HarvestError::SourceUnreachable(format!("{url}: HTTP {}", resp.status)));
        }
        parse_atom_feed(&resp.text())
    }

    fn download(&self, paper: &PaperRecord) -> Result<LatexBundle, FetchError> {
        let url = self.eprint_url(&paper.paper_id);
        let resp = self
            .get(&url)
            .map_err(|e| FetchError::ArchiveUnavailable(e.to_string()))?;
        if !resp.is_success() {
            return Err(FetchError::ArchiveUnavailable(format!("{url}: HTTP {}", resp.status)));
        }
        bundle_from_archive(&resp.body)
    }
}

#[derive(Default)]
struct EntryFields {
    id: String,
    title: String,
    summary: String,
    published: String,
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `http://arxiv.org/abs/2401.01234v2` -> `2401.01234`
fn versionless_id(raw: &str) -> String {
    let id = raw.trim();
    let id = id.rsplit_once("/abs/").map_or(id, |(_, tail)| tail);
    match id.rfind('v') {
        Some(n) if n > 0 && id[n + 1..].chars().all(|c| c.is_ascii_digit()) && n + 1 < id.len() => id[..n].to_string(),
        _ => id.to_string(),
    }
}

/// Parses an arXiv Atom feed into metadata-only records, in feed order.
pub fn parse_atom_feed(xml: &str) -> Result<Vec<PaperRecord>, HarvestError> {
    let malformed = |msg: String| HarvestError::MalformedResponse(msg);
    let mut reader = Reader::from_str(xml);
    let mut records = Vec::new();
    let mut entry: Option<EntryFields> = None;
    let mut field: Option<&'static str> = None;
    let mut depth_in_entry = 0usize;

    loop {
        match reader.read_event().map_err(|e| malformed(format!("atom: {e}")))? {
            Event::Start(e) => {
                let name = e.local_name();
                if name.as_ref() == b"entry" {
                    entry = Some(EntryFields::default());
                    depth_in_entry = 0;
                } else if entry.is_some() {
                    depth_in_entry += 1;
                    field = match (depth_in_entry, name.as_ref()) {
                        (1, b"id") => Some("id"),
                        (1, b"title") => Some("title"),
                        (1, b"summary") => Some("summary"),
                        (1, b"published") => Some("published"),
                        _ => None,
                    };
                }
            }
            Event::End(e) => {
                if e.local_name().as_ref() == b"entry" {
                    let f = entry.take().ok_or_else(|| malformed("stray </entry>".into()))?;
                    records.push(finish_entry(f)?);
                } else if entry.is_some() {
                    depth_in_entry = depth_in_entry.saturating_sub(1);
                    field = None;
                }
            }
            Event::Text(t) => {
                if let (Some(f), Some(name)) = (entry.as_mut(), field) {
                    let text = t.unescape().map_err(|e| malformed(format!("atom text: {e}")))?;
                    push_field(f, name, &text);
                }
            }
            Event::CData(t) => {
                if let (Some(f), Some(name)) = (entry.as_mut(), field) {
                    push_field(f, name, &String::from_utf8_lossy(&t.into_inner()));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if entry.is_some() {
        return Err(malformed("unterminated <entry>".into()));
    }
    Ok(records)
}

fn push_field(f: &mut EntryFields, name: &str, text: &str) {
    let slot = match name {
        "id" => &mut f.id,
        "title" => &mut f.title,
        "summary" => &mut f.summary,
        _ => &mut f.published,
    };
    slot.push_str(text);
}

fn finish_entry(f: EntryFields) -> Result<PaperRecord, HarvestError> {
    let id = versionless_id(&f.id);
    let title = collapse_ws(&f.title);
    if id.is_empty() || title.is_empty() {
        return Err(HarvestError::MalformedResponse(format!(
            "entry without id or title: {:?}",
            f.id
        )));
    }
    let date_part = f.published.trim().get(..10).unwrap_or("");
    let published = NaiveDate::parse_from_str(date_part, "%Y-%m-%d")
        .map_err(|e| HarvestError::MalformedResponse(format!("{id}: bad published date {:?}: {e}", f.published)))?;
    Ok(PaperRecord::new(id, title, collapse_ws(&f.summary), published))
}
