use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::NaiveDate;

use super::{bundle_from_archive, FetchError, HarvestError, PaperRecord, PaperSource, SourceKind, SourceQuery};
use crate::latex::LatexBundle;

/// A parsed fixture file.
#[derive(Debug, Clone, PartialEq)]
pub struct FixturePaper {
    pub record: PaperRecord,
    pub body: String,
    /// Optional archive path (relative to the fixture directory) that stands
    /// in for the LaTeX body.
    pub source: Option<String>,
}

/// Parses the fixture format: `KEY: value` front-matter lines (`ID`, `TITLE`,
/// `DATE`, `ABSTRACT`, optional `SOURCE`) followed by the LaTeX body. One
/// blank line between header and body is dropped.
pub fn parse_fixture(name: &str, text: &str) -> Result<FixturePaper, HarvestError> {
    let mut fields: BTreeMap<String, String> = BTreeMap::new();
    let mut rest = text;
    loop {
        let (line, tail) = match rest.find('\n') {
            Some(n) => (&rest[..n], &rest[n + 1..]),
            None => (rest, ""),
        };
        let line_trim = line.trim_end_matches('\r');
        let key_len = line_trim
            .bytes()
            .take_while(|b| b.is_ascii_uppercase() || *b == b'_')
            .count();
        if key_len > 0 && line_trim[key_len..].starts_with(':') {
            fields.insert(
                line_trim[..key_len].to_string(),
                line_trim[key_len + 1..].trim().to_string(),
            );
            rest = tail;
            if tail.is_empty() {
                break;
            }
            continue;
        }
        if line_trim.trim().is_empty() {
            rest = tail;
        }
        break;
    }
    let get = |key: &str| {
        fields
            .get(key)
            .cloned()
            .ok_or_else(|| HarvestError::MalformedResponse(format!("{name}: missing {key}:")))
    };
    let id = get("ID")?;
    let title = get("TITLE")?;
    let date = get("DATE")?;
    let published = NaiveDate::parse_from_str(&date, "%Y-%m-%d")
        .map_err(|e| HarvestError::MalformedResponse(format!("{name}: bad DATE {date:?}: {e}")))?;
    let abstract_text = fields.get("ABSTRACT").cloned().unwrap_or_default();
    Ok(FixturePaper {
        record: PaperRecord::new(id, title, abstract_text, published),
        body: rest.to_string(),
        source: fields.get("SOURCE").cloned(),
    })
}

/// Offline source: every regular, non-hidden file in a directory is one paper.
pub struct FixtureSource {
    dir: PathBuf,
    index: OnceLock<Result<BTreeMap<String, PathBuf>, String>>,
}

impl FixtureSource {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            index: OnceLock::new(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn files(&self) -> Result<Vec<PathBuf>, HarvestError> {
        let entries = fs::read_dir(&self.dir)
            .map_err(|e| HarvestError::SourceUnreachable(format!("{}: {e}", self.dir.display())))?;
        let mut files = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| HarvestError::SourceUnreachable(e.to_string()))?;
            let path = entry.path();
            let hidden = path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with('.'));
            if path.is_file() && !hidden {
                files.push(path);
            }
        }
        files.sort();
        Ok(files)
    }

    fn load(&self, path: &Path) -> Result<FixturePaper, HarvestError> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarvestError::MalformedResponse(format!("{}: {e}", path.display())))?;
        parse_fixture(&path.display().to_string(), &text)
    }

    fn locate(&self, paper_id: &str) -> Option<PathBuf> {
        let index = self.index.get_or_init(|| {
            let mut map = BTreeMap::new();
            for path in self.files().map_err(|e| e.to_string())? {
                if let Ok(p) = self.load(&path) {
                    map.insert(p.record.paper_id, path);
                }
            }
            Ok(map)
        });
        index.as_ref().ok()?.get(paper_id).cloned()
    }
}

impl PaperSource for FixtureSource {
    fn kind(&self) -> SourceKind {
        SourceKind::FixtureDir
    }

    fn search(&self, _query: &SourceQuery) -> Result<Vec<PaperRecord>, HarvestError> {
        self.files()?
            .iter()
            .map(|path| self.load(path).map(|p| p.record))
            .collect()
    }

    fn download(&self, paper: &PaperRecord) -> Result<LatexBundle, FetchError> {
        let path = self
            .locate(&paper.paper_id)
            .ok_or_else(|| FetchError::ArchiveUnavailable(format!("no fixture for {}", paper.paper_id)))?;
        let fixture = self
            .load(&path)
            .map_err(|e| FetchError::ArchiveUnavailable(e.to_string()))?;
        if let Some(source) = fixture.source {
            let archive = self.dir.join(&source);
            let bytes = fs::read(&archive)
                .map_err(|e| FetchError::ArchiveUnavailable(format!("{}: {e}", archive.display())))?;
            return bundle_from_archive(&bytes);
        }
        if fixture.body.trim().is_empty() {
            return Err(FetchError::ArchiveNotLatex);
        }
        Ok(LatexBundle::single(format!("{}.tex", paper.paper_id), fixture.body))
    }
}
