use serde::{Deserialize, Serialize};

use super::markup::strip_latex_markup;
use super::scan::{read_group, skip_optional, CommentMask};
use super::LatexError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectionLevel {
    Section,
    Subsection,
    Subsubsection,
}

impl SectionLevel {
    fn command(self) -> &'static str {
        match self {
            SectionLevel::Section => "\\section",
            SectionLevel::Subsection => "\\subsection",
            SectionLevel::Subsubsection => "\\subsubsection",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub level: SectionLevel,
    /// Raw LaTeX from the sectioning command up to the next one.
    pub body: String,
    /// Byte offsets `(start, end)` of `body` in the source text.
    pub char_span: (usize, usize),
}

/// Headings that mark experiment sections (case-insensitive substring match).
pub const EXPERIMENT_LEXICON: &[&str] = &["experiment", "evaluation", "results", "empirical study"];

/// Splits `text` at every `\section`, `\subsection` and `\subsubsection`.
///
/// Bodies tile the text from the first sectioning command to the end, so
/// concatenating them gives back that suffix verbatim.
pub fn split_sections(text: &str) -> Result<Vec<Section>, LatexError> {
    if text.trim().is_empty() {
        return Err(LatexError::EmptyBundle);
    }
    let mask = CommentMask::new(text);
    let mut heads: Vec<(usize, SectionLevel, String)> = Vec::new();
    // Longest command first so `\subsection` is not read as `\section`.
    for level in [
        SectionLevel::Subsubsection,
        SectionLevel::Subsection,
        SectionLevel::Section,
    ] {
        let cmd = level.command();
        for (pos, _) in text.match_indices(cmd) {
            if mask.contains(pos) || heads.iter().any(|(p, _, _)| *p == pos) {
                continue;
            }
            if pos > 0 && text.as_bytes()[pos - 1] == b'\\' {
                continue;
            }
            let mut after = pos + cmd.len();
            match text.as_bytes().get(after) {
                Some(b'*') => after += 1,
                Some(c) if c.is_ascii_alphabetic() => continue,
                _ => {}
            }
            let after = skip_optional(text, after);
            let Some((raw_heading, _)) = read_group(text, after) else {
                continue;
            };
            let heading = strip_latex_markup(raw_heading);
            heads.push((pos, level, heading));
        }
    }
    if heads.is_empty() {
        return Err(LatexError::NoSections);
    }
    heads.sort_by_key(|(p, _, _)| *p);

    let mut sections = Vec::with_capacity(heads.len());
    for (idx, (start, level, heading)) in heads.iter().enumerate() {
        let end = heads.get(idx + 1).map(|h| h.0).unwrap_or(text.len());
        sections.push(Section {
            heading: if heading.is_empty() {
                "(untitled)".to_string()
            } else {
                heading.clone()
            },
            level: *level,
            body: text[*start..end].to_string(),
            char_span: (*start, end),
        });
    }
    Ok(sections)
}

fn is_experiment_heading(heading: &str) -> bool {
    let lower = heading.to_lowercase();
    EXPERIMENT_LEXICON.iter().any(|k| lower.contains(k))
}

/// Sections whose heading matches the experiment lexicon, together with
/// their subsections. Falls back to every section when nothing matches.
pub fn select_experiment_sections(sections: &[Section]) -> Vec<Section> {
    let mut picked = Vec::new();
    let mut inside: Option<SectionLevel> = None;
    for section in sections {
        if let Some(level) = inside {
            if section.level > level {
                picked.push(section.clone());
                continue;
            }
            inside = None;
        }
        if is_experiment_heading(&section.heading) {
            picked.push(section.clone());
            inside = Some(section.level);
        }
    }
    if picked.is_empty() {
        sections.to_vec()
    } else {
        picked
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn headings(s: &[Section]) -> Vec<&str> {
        s.iter().map(|x| x.heading.as_str()).collect()
    }

    #[test]
    fn two_sections() {
        let s = split_sections("\\section{Intro}a\\section{Experiments}b").unwrap();
        assert_eq!(headings(&s), vec!["Intro", "Experiments"]);
        assert_eq!(s[1].body, "\\section{Experiments}b");
    }

    #[test]
    fn no_sections() {
        assert_eq!(split_sections("plain text"), Err(LatexError::NoSections));
    }

    #[test]
    fn starred_and_optional_forms() {
        let s = split_sections("\\section*{A}x\\subsection[short]{Long \\textbf{B}}y").unwrap();
        assert_eq!(headings(&s), vec!["A", "Long B"]);
        assert_eq!(s[1].level, SectionLevel::Subsection);
    }

    #[test]
    fn commented_sections_are_ignored() {
        let s = split_sections("\\section{A}\n% \\section{B}\n").unwrap();
        assert_eq!(s.len(), 1);
    }

    fn sec(heading: &str, level: SectionLevel) -> Section {
        Section {
            heading: heading.into(),
            level,
            body: String::new(),
            char_span: (0, 1),
        }
    }

    #[test]
    fn selects_experiment_headings() {
        let all = vec![
            sec("Introduction", SectionLevel::Section),
            sec("Experiments", SectionLevel::Section),
            sec("Conclusion", SectionLevel::Section),
        ];
        assert_eq!(headings(&select_experiment_sections(&all)), vec!["Experiments"]);

        let all = vec![
            sec("Intro", SectionLevel::Section),
            sec("Evaluation", SectionLevel::Section),
        ];
        assert_eq!(headings(&select_experiment_sections(&all)), vec!["Evaluation"]);
    }

    #[test]
    fn subsections_follow_their_parent() {
        let all = vec![
            sec("Experiments", SectionLevel::Section),
            sec("Setup", SectionLevel::Subsection),
            sec("Related Work", SectionLevel::Section),
        ];
        assert_eq!(
            headings(&select_experiment_sections(&all)),
            vec!["Experiments", "Setup"]
        );
    }

    #[test]
    fn falls_back_to_everything() {
        let all = vec![
            sec("Intro", SectionLevel::Section),
            sec("Method", SectionLevel::Section),
        ];
        assert_eq!(select_experiment_sections(&all), all);
    }
}
