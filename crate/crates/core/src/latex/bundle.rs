use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::scan::{read_group, CommentMask};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleFile {
    pub name: String,
    pub content: String,
}

/// The `.tex` members of one paper's source archive, in archive order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LatexBundle {
    pub files: Vec<BundleFile>,
}

impl LatexBundle {
    pub fn single(name: impl Into<String>, content: impl Into<String>) -> Self {
        Self {
            files: vec![BundleFile {
                name: name.into(),
                content: content.into(),
            }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.files.iter().all(|f| f.content.is_empty())
    }

    /// All member contents joined in archive order.
    pub fn concatenated(&self) -> String {
        self.files.iter().map(|f| f.content.as_str()).collect()
    }

    /// The file holding `\documentclass` (else `\begin{document}`), else the first.
    pub fn main_file(&self) -> Option<&BundleFile> {
        let has = |f: &&BundleFile, needle: &str| {
            let mask = CommentMask::new(&f.content);
            f.content.match_indices(needle).any(|(pos, _)| !mask.contains(pos))
        };
        self.files
            .iter()
            .find(|f| has(f, "\\documentclass"))
            .or_else(|| self.files.iter().find(|f| has(f, "\\begin{document}")))
            .or_else(|| self.files.first())
    }

    fn lookup(&self, target: &str) -> Option<&BundleFile> {
        let target = target.trim().trim_start_matches("./");
        let with_ext = if target.ends_with(".tex") {
            target.to_string()
        } else {
            format!("{target}.tex")
        };
        self.files
            .iter()
            .find(|f| f.name == with_ext || f.name == target)
            .or_else(|| self.files.iter().find(|f| f.name.ends_with(&format!("/{with_ext}"))))
    }

    /// The main file with its `\input`/`\include` directives replaced by the
    /// referenced member, one level deep. Each member is inlined at most once;
    /// unresolved or repeated directives stay verbatim.
    pub fn resolve_document(&self) -> String {
        let Some(main) = self.main_file() else {
            return String::new();
        };
        let mut visited: HashSet<&str> = HashSet::new();
        visited.insert(main.name.as_str());
        let text = &main.content;
        let mask = CommentMask::new(text);
        let mut out = String::with_capacity(text.len());
        let mut last = 0;
        for (pos, directive) in input_directives(text) {
            if mask.contains(pos) {
                continue;
            }
            let Some((target, end)) = directive_target(text, pos + directive.len()) else {
                continue;
            };
            let Some(file) = self.lookup(&target) else {
                continue;
            };
            if !visited.insert(file.name.as_str()) {
                continue;
            }
            out.push_str(&text[last..pos]);
            out.push_str(&file.content);
            if !file.content.ends_with('\n') {
                out.push('\n');
            }
            last = end;
        }
        out.push_str(&text[last..]);
        out
    }
}

fn input_directives(text: &str) -> Vec<(usize, &'static str)> {
    let mut found: Vec<(usize, &'static str)> = Vec::new();
    for directive in ["\\input", "\\include"] {
        for (pos, _) in text.match_indices(directive) {
            let after = pos + directive.len();
            let next = text[after..].chars().next();
            // `\includegraphics`, `\inputencoding`, ...
            if next.is_some_and(|c| c.is_ascii_alphabetic()) {
                continue;
            }
            found.push((pos, directive));
        }
    }
    found.sort();
    found
}

/// `{name}` or a bare ` name` token after an input directive.
fn directive_target(text: &str, pos: usize) -> Option<(String, usize)> {
    if let Some((name, end)) = read_group(text, pos) {
        return Some((name.to_string(), end));
    }
    let rest = &text[pos..];
    let trimmed = rest.trim_start_matches([' ', '\t']);
    let start = pos + (rest.len() - trimmed.len());
    let len = trimmed
        .find(|c: char| c.is_whitespace() || c == '%' || c == '\\')
        .unwrap_or(trimmed.len());
    if len == 0 || start == pos {
        return None;
    }
    Some((trimmed[..len].to_string(), start + len))
}
