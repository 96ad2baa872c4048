use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::markup::strip_latex_markup;
use super::scan::{
    env_tokens, matching_end, read_group, skip_optional, skip_ws, split_top_level, strip_comments, EnvToken,
};
use super::sections::Section;
use super::LatexError;

const TABLE_ENVS: &[&str] = &["table", "table*"];
const FLOAT_ENVS: &[&str] = &["table", "table*", "figure", "figure*", "wrapfigure", "wraptable"];
/// Tabular-like environments and whether they take a width argument first.
const TABULAR_ENVS: &[(&str, bool)] = &[
    ("tabular", false),
    ("tabular*", true),
    ("tabularx", true),
    ("tabulary", true),
    ("NiceTabular", false),
    ("array", false),
];
/// Row-level commands dropped before a row is split into cells.
const ROW_RULES: &[(&str, usize)] = &[
    ("\\hline", 0),
    ("\\toprule", 0),
    ("\\midrule", 0),
    ("\\bottomrule", 0),
    ("\\hdashline", 0),
    ("\\endhead", 0),
    ("\\endfirsthead", 0),
    ("\\endfoot", 0),
    ("\\endlastfoot", 0),
    ("\\addlinespace", 0),
    ("\\cline", 1),
    ("\\cmidrule", 1),
    ("\\Xhline", 1),
    ("\\noalign", 1),
    ("\\rowcolor", 1),
    ("\\arrayrulecolor", 1),
    ("\\specialrule", 3),
    ("\\rowcolors", 3),
];

static REF_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\\(?:[cC]ref|autoref|ref|subref|vref|Vref)\*?\{([^}]*)\}").expect("valid ref regex"));
static PARAGRAPH_BREAK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n[ \t]*\n").expect("valid paragraph regex"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableBlock {
    pub index_in_paper: usize,
    /// The full environment text, verbatim from the source.
    pub raw_env: String,
    pub caption: String,
    /// Rectangular cell matrix after multicolumn expansion.
    pub grid: Vec<Vec<String>>,
    /// Prose describing the table, empty when nothing was found.
    pub description: String,
    pub label: Option<String>,
    /// Byte offsets of `raw_env` in the source text.
    pub span: (usize, usize),
}

impl TableBlock {
    pub fn rows(&self) -> usize {
        self.grid.len()
    }

    pub fn cols(&self) -> usize {
        self.grid.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableExtraction {
    pub tables: Vec<TableBlock>,
    /// Environments skipped because they were never closed.
    pub skipped: Vec<LatexError>,
}

/// Extracts every `table`/`table*` environment of `text` in document order.
///
/// `sections` must come from [`super::split_sections`] on the same text; they
/// scope the search for descriptive paragraphs. Unclosed environments are
/// reported in [`TableExtraction::skipped`] and do not consume an index.
pub fn extract_tables(text: &str, sections: &[Section]) -> TableExtraction {
    let tokens = env_tokens(text);
    let floats = float_ranges(text, &tokens);
    let mut out = TableExtraction::default();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        if !(tok.begin && TABLE_ENVS.contains(&tok.name.as_str())) {
            i += 1;
            continue;
        }
        let Some(close) = matching_end(&tokens, i) else {
            out.skipped.push(LatexError::UnbalancedEnvironment {
                env: tok.name.clone(),
                offset: tok.start,
            });
            i += 1;
            continue;
        };
        let span = (tok.start, tokens[close].end);
        let raw_env = &text[span.0..span.1];
        let inner = strip_comments(raw_env);
        let label = find_label(&inner);
        let scope = sections
            .iter()
            .find(|s| s.char_span.0 <= span.0 && span.0 < s.char_span.1)
            .map(|s| s.char_span)
            .unwrap_or((0, text.len()));
        let description = describe(text, scope, span, label.as_deref(), &floats);
        out.tables.push(TableBlock {
            index_in_paper: out.tables.len(),
            raw_env: raw_env.to_string(),
            caption: find_caption(&inner),
            grid: parse_grid(&inner),
            description,
            label,
            span,
        });
        i = close + 1;
    }
    out
}

fn float_ranges(text: &str, tokens: &[EnvToken]) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].begin && FLOAT_ENVS.contains(&tokens[i].name.as_str()) {
            if let Some(close) = matching_end(tokens, i) {
                ranges.push((tokens[i].start, tokens[close].end));
                i = close + 1;
                continue;
            }
        }
        i += 1;
    }
    debug_assert!(ranges.iter().all(|r| r.1 <= text.len()));
    ranges
}

/// Caption at the deepest environment nesting (first one on ties), markup-stripped.
fn find_caption(inner: &str) -> String {
    let tokens = env_tokens(inner);
    let mut best: Option<(i32, &str)> = None;
    for (pos, _) in inner.match_indices("\\caption") {
        let after = pos + "\\caption".len();
        if inner[after..].chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            continue;
        }
        let after = skip_optional(inner, after);
        let Some((content, _)) = read_group(inner, after) else {
            continue;
        };
        let depth: i32 = tokens
            .iter()
            .take_while(|t| t.start < pos)
            .map(|t| if t.begin { 1 } else { -1 })
            .sum();
        if best.is_none_or(|(d, _)| depth > d) {
            best = Some((depth, content));
        }
    }
    best.map(|(_, c)| strip_latex_markup(c)).unwrap_or_default()
}

fn find_label(inner: &str) -> Option<String> {
    let pos = inner.find("\\label")?;
    read_group(inner, pos + "\\label".len()).map(|(l, _)| l.trim().to_string())
}

/// Grid of the first (outermost) tabular-like environment; empty if none.
fn parse_grid(inner: &str) -> Vec<Vec<String>> {
    let tokens = env_tokens(inner);
    let Some((open, width_arg)) = tokens.iter().enumerate().find_map(|(idx, t)| {
        if !t.begin {
            return None;
        }
        TABULAR_ENVS.iter().find(|(n, _)| *n == t.name).map(|(_, w)| (idx, *w))
    }) else {
        return Vec::new();
    };
    let Some(close) = matching_end(&tokens, open) else {
        return Vec::new();
    };
    let mut pos = tokens[open].end;
    if width_arg {
        if let Some((_, end)) = read_group(inner, pos) {
            pos = end;
        }
    }
    pos = skip_optional(inner, pos);
    if let Some((_, end)) = read_group(inner, pos) {
        pos = end;
    }
    let body = &inner[pos..tokens[close].start];
    grid_from_body(body)
}

fn grid_from_body(body: &str) -> Vec<Vec<String>> {
    let body = body.replace("\\tabularnewline", "\\\\");
    let mut rows: Vec<Vec<String>> = Vec::new();
    for segment in split_top_level(&body, "\\\\") {
        let row = strip_row_rules(segment);
        if row.trim().is_empty() {
            continue;
        }
        let mut cells = Vec::new();
        for raw in split_top_level(row, "&") {
            let (text, span) = expand_cell(raw);
            cells.push(text);
            cells.extend(std::iter::repeat_n(String::new(), span.saturating_sub(1)));
        }
        rows.push(cells);
    }
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    for row in &mut rows {
        row.resize(width, String::new());
    }
    rows
}

/// Drops rule commands, `\\[2pt]` spacing and `\\*` residue from a row's start.
fn strip_row_rules(segment: &str) -> &str {
    let mut s = segment;
    loop {
        let trimmed = s.trim_start();
        if let Some(rest) = trimmed.strip_prefix('*') {
            s = rest;
            continue;
        }
        if trimmed.starts_with('[') {
            let end = skip_optional(trimmed, 0);
            if end > 0 {
                s = &trimmed[end..];
                continue;
            }
        }
        let mut matched = false;
        for (cmd, nargs) in ROW_RULES {
            if let Some(rest) = trimmed.strip_prefix(cmd) {
                if rest.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                    continue;
                }
                let mut pos = trimmed.len() - rest.len();
                pos = skip_optional(trimmed, pos);
                // `\cmidrule(lr){2-3}`
                let p = skip_ws(trimmed, pos);
                if trimmed[p..].starts_with('(') {
                    if let Some(n) = trimmed[p..].find(')') {
                        pos = p + n + 1;
                    }
                }
                for _ in 0..*nargs {
                    if let Some((_, end)) = read_group(trimmed, pos) {
                        pos = end;
                    }
                }
                pos = skip_optional(trimmed, pos);
                s = &trimmed[pos..];
                matched = true;
                break;
            }
        }
        if !matched {
            return trimmed;
        }
    }
}

/// Returns the stripped cell text and the number of columns it spans.
fn expand_cell(raw: &str) -> (String, usize) {
    let trimmed = raw.trim();
    if let Some(rest) = trimmed.strip_prefix("\\multicolumn") {
        let base = trimmed.len() - rest.len();
        if let Some((n, after_n)) = read_group(trimmed, base) {
            let span = n.trim().parse::<usize>().unwrap_or(1).max(1);
            if let Some((_, after_spec)) = read_group(trimmed, after_n) {
                if let Some((content, end)) = read_group(trimmed, after_spec) {
                    let mut text = content.to_string();
                    text.push_str(&trimmed[end..]);
                    return (strip_latex_markup(&text), span);
                }
            }
        }
    }
    (strip_latex_markup(trimmed), 1)
}

/// Paragraphs of `text[start..end]` with floats removed and comments stripped.
fn paragraphs(text: &str, start: usize, end: usize, floats: &[(usize, usize)]) -> Vec<String> {
    let mut buf = String::new();
    let mut pos = start;
    for &(fs, fe) in floats {
        if fe <= start || fs >= end {
            continue;
        }
        if fs > pos {
            buf.push_str(&text[pos..fs]);
        }
        buf.push_str("\n\n");
        pos = pos.max(fe);
    }
    if pos < end {
        buf.push_str(&text[pos..end]);
    }
    let cleaned = strip_comments(&buf);
    PARAGRAPH_BREAK
        .split(&cleaned)
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

fn references(paragraph: &str, label: &str) -> bool {
    REF_RE.captures_iter(paragraph).any(|c| {
        c.get(1)
            .is_some_and(|m| m.as_str().split(',').any(|l| l.trim() == label))
    })
}

fn describe(
    text: &str,
    scope: (usize, usize),
    span: (usize, usize),
    label: Option<&str>,
    floats: &[(usize, usize)],
) -> String {
    if let Some(label) = label {
        let referencing: Vec<String> = paragraphs(text, scope.0, scope.1, floats)
            .into_iter()
            .filter(|p| references(p, label))
            .collect();
        if !referencing.is_empty() {
            return referencing.join("\n\n");
        }
    }
    let end = scope.1.max(span.1);
    paragraphs(text, span.1, end, floats)
        .into_iter()
        .find(|p| !p.starts_with("\\end{document}"))
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::super::split_sections;
    use super::*;

    fn tables_of(text: &str) -> TableExtraction {
        let sections = split_sections(text).unwrap_or_default();
        extract_tables(text, &sections)
    }

    #[test]
    fn single_table_with_caption() {
        let t = "\\begin{table}\\caption{Main results.}\\begin{tabular}{cc}a&b\\\\c&d\\end{tabular}\\end{table}";
        let x = tables_of(t);
        assert_eq!(x.tables.len(), 1);
        assert_eq!(x.tables[0].caption, "Main results.");
        assert_eq!(x.tables[0].grid, vec![vec!["a", "b"], vec!["c", "d"]]);
    }

    #[test]
    fn commented_table_is_ignored() {
        let t = "%\\begin{table}\\caption{x}\\end{table}\nnothing";
        assert!(tables_of(t).tables.is_empty());
    }

    #[test]
    fn unbalanced_is_reported_not_fatal() {
        let t = "\\begin{table}\\caption{Broken}\n\n\\begin{table}\\caption{Ok}\\end{table}";
        let x = tables_of(t);
        assert_eq!(x.tables.len(), 1);
        assert_eq!(x.tables[0].caption, "Ok");
        assert_eq!(x.tables[0].index_in_paper, 0);
        assert_eq!(
            x.skipped,
            vec![LatexError::UnbalancedEnvironment {
                env: "table".into(),
                offset: 0
            }]
        );
    }

    #[test]
    fn paper_entity_table_grid() {
        let t = r"\begin{table}[t]
    \centering
    \caption{\label{entity_type}Illustration of cell entity recognition.}
    \begin{adjustbox}{width=0.5\textwidth}
    \renewcommand\arraystretch{0.8}
    \begin{tabular}{c|c|c}
      \toprule
           \rowcolor{green!10} \multicolumn{1}{c|}{} & \multicolumn{2}{c}{\textbf{KonIQ-10K}} \\ \midrule
             \cellcolor{cyan!10}{Method} & \cellcolor{blue!10}{SRCC$\uparrow$} & \cellcolor{blue!10}{PLCC$\uparrow$} \\ \midrule
    \cellcolor{violet!10}{w/o direct pathway} & \underline{0.9376} & \underline{0.9495} \\
    \cellcolor{violet!10}{w/o indirect pathway} & 0.9361 & 0.9479 \\
    \cellcolor{violet!10}{w/o both pathways} & 0.9363 & 0.9463 \\ \midrule
    \cellcolor{cyan!10}{\textbf{RichIQA}} &\textbf{0.9383}& \textbf{0.9500}\\
    \bottomrule
    \end{tabular}
    \end{adjustbox}
\end{table}";
        let x = tables_of(t);
        let g = &x.tables[0].grid;
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec!["", "KonIQ-10K", ""]);
        assert_eq!(g[1], vec!["Method", "SRCC↑", "PLCC↑"]);
        assert_eq!(g[2], vec!["w/o direct pathway", "0.9376", "0.9495"]);
        assert_eq!(g[5], vec!["RichIQA", "0.9383", "0.9500"]);
        assert_eq!(x.tables[0].label.as_deref(), Some("entity_type"));
    }

    #[test]
    fn multirow_and_ragged_rows_are_rectangular() {
        let t = "\\begin{table*}\\begin{tabular}{lcc}\\multirow{2}{*}{A} & x & y\\\\ & z\\\\ \\cmidrule(lr){2-3} \\multicolumn{3}{c}{wide}\\\\\\end{tabular}\\end{table*}";
        let g = &tables_of(t).tables[0].grid;
        assert_eq!(
            g,
            &vec![
                vec!["A".to_string(), "x".into(), "y".into()],
                vec!["".into(), "z".into(), "".into()],
                vec!["wide".into(), "".into(), "".into()],
            ]
        );
    }

    #[test]
    fn nested_tabular_stays_in_one_cell() {
        let t = "\\begin{table}\\begin{tabular}{cc}\\begin{tabular}{c}top\\\\bottom\\end{tabular} & v\\\\\\end{tabular}\\end{table}";
        let g = &tables_of(t).tables[0].grid;
        assert_eq!(g, &vec![vec!["top bottom".to_string(), "v".into()]]);
    }

    #[test]
    fn description_prefers_ref_paragraphs() {
        let t = "\\section{Experiments}\nIntro text.\n\nAs shown in Table~\\ref{tab:main}, we win.\n\n\\begin{table}\\caption{R}\\label{tab:main}\\end{table}\nAfter the table.\n\n\\section{Other}\nTable \\ref{tab:main} again.";
        let x = tables_of(t);
        assert_eq!(x.tables[0].description, "As shown in Table~\\ref{tab:main}, we win.");
    }

    #[test]
    fn description_falls_back_to_following_paragraph() {
        let t = "\\section{Results}\n\\begin{table}\\caption{R}\\end{table}\n\nFollowing prose.\nMore.\n\nLater.";
        let x = tables_of(t);
        assert_eq!(x.tables[0].description, "Following prose.\nMore.");
    }

    #[test]
    fn tabularx_width_argument_is_skipped() {
        let t = "\\begin{table}\\begin{tabularx}{\\linewidth}{lX}a & b\\\\\\end{tabularx}\\end{table}";
        assert_eq!(tables_of(t).tables[0].grid, vec![vec!["a", "b"]]);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(300))]
        #[test]
        fn never_panics_on_multibyte_soup(parts in proptest::collection::vec(
            proptest::sample::select(vec![
                "\\begin{table}", "\\end{table}", "\\begin{tabular}{lc}", "\\end{tabular}",
                "\\caption{", "}", "{", " & ", "\\\\", "\\", "%", "\n", "↓", "é", "±", "\\↑", "\\multicolumn{2}{c}{",
                "\\section{X}", "\\label{t}", "\\cmidrule(", "\\\\[", "]", "x", "1.5",
            ]),
            0..40,
        )) {
            let text: String = parts.concat();
            let out = tables_of(&text);
            for t in &out.tables {
                proptest::prop_assert!(t.grid.iter().all(|r| r.len() == t.cols()));
            }
        }
    }
}
