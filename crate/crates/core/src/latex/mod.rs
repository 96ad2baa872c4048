//! LaTeX corpus handling: source bundles, section splitting, table extraction
//! and markup stripping.
//!
//! There is no TeX expansion here. A comment-aware scanner tracks environment
//! nesting, which is enough for the regular structure of float and tabular
//! environments in research papers.

mod bundle;
mod markup;
pub mod scan;
mod sections;
mod tables;

use thiserror::Error;

pub use bundle::{BundleFile, LatexBundle};
pub use markup::strip_latex_markup;
pub use sections::{select_experiment_sections, split_sections, Section, SectionLevel, EXPERIMENT_LEXICON};
pub use tables::{extract_tables, TableBlock, TableExtraction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatexError {
    #[error("empty LaTeX bundle")]
    EmptyBundle,
    #[error("no sectioning command found")]
    NoSections,
    #[error("\\begin{{{env}}} at byte {offset} has no matching \\end")]
    UnbalancedEnvironment { env: String, offset: usize },
}

/// A parsed paper: resolved document text, its sections and its tables.
#[derive(Debug, Clone)]
pub struct ParsedPaper {
    pub document: String,
    pub sections: Vec<Section>,
    pub experiment_sections: Vec<Section>,
    pub tables: Vec<TableBlock>,
    pub skipped: Vec<LatexError>,
}

impl ParsedPaper {
    /// Raw text of the experiment sections, or the whole document when the
    /// paper has no sectioning commands.
    pub fn experiment_text(&self) -> String {
        if self.sections.is_empty() {
            return self.document.clone();
        }
        self.experiment_sections.iter().map(|s| s.body.as_str()).collect()
    }
}

pub fn parse_bundle(bundle: &LatexBundle) -> Result<ParsedPaper, LatexError> {
    let document = bundle.resolve_document();
    if document.trim().is_empty() {
        return Err(LatexError::EmptyBundle);
    }
    let sections = match split_sections(&document) {
        Ok(s) => s,
        Err(LatexError::NoSections) => Vec::new(),
        Err(e) => return Err(e),
    };
    let experiment_sections = select_experiment_sections(&sections);
    let TableExtraction { tables, skipped } = extract_tables(&document, &sections);
    for err in &skipped {
        log::warn!("skipping table: {err}");
    }
    Ok(ParsedPaper {
        document,
        sections,
        experiment_sections,
        tables,
        skipped,
    })
}
