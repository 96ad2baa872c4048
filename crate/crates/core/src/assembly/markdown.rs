use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::board::LeaderboardTable;
use super::metrics::{MetricColumn, Unit};

const FIXED_HEADERS: [&str; 3] = ["No.", "Title", "Experimental Setting"];
const MISSING: &str = "-";

fn escape(cell: &str) -> String {
    let one_line = cell.split_whitespace().collect::<Vec<_>>().join(" ");
    one_line.replace('\\', "\\\\").replace('|', "\\|")
}

fn header(c: &MetricColumn) -> String {
    let mut h = c.canonical_name.clone();
    if c.unit == Unit::Percent {
        h.push_str(" (%)");
    }
    let arrow = c.direction.arrow();
    if !arrow.is_empty() {
        h.push(' ');
        h.push_str(arrow);
    }
    h
}

fn line(cells: impl IntoIterator<Item = String>) -> String {
    let mut out = String::from("|");
    for c in cells {
        let _ = write!(out, " {c} |");
    }
    out.push('\n');
    out
}

/// GitHub-flavored Markdown table. A board without rows renders as the
/// header line alone.
pub fn render_markdown(board: &LeaderboardTable) -> String {
    let headers: Vec<String> = FIXED_HEADERS
        .iter()
        .map(|h| h.to_string())
        .chain(board.columns.iter().map(|c| escape(&header(c))))
        .collect();
    let width = headers.len();
    let mut out = line(headers);
    if board.rows.is_empty() {
        return out;
    }
    out.push_str(&line(std::iter::repeat_n("---".to_string(), width)));
    for r in &board.rows {
        let values = board.columns.iter().map(|c| {
            r.values
                .get(&c.canonical_name)
                .map_or(MISSING.to_string(), |v| escape(&v.text))
        });
        out.push_str(&line(
            [r.rank.to_string(), escape(&r.title), escape(&r.setting)]
                .into_iter()
                .chain(values),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkdownRow {
    pub rank: usize,
    pub title: String,
    pub setting: String,
    pub values: Vec<Option<String>>,
}

/// A rendered board read back as text cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkdownBoard {
    pub metric_headers: Vec<String>,
    pub rows: Vec<MarkdownRow>,
}

fn split_cells(line: &str) -> Option<Vec<String>> {
    let inner = line.trim().strip_prefix('|')?.strip_suffix('|')?;
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(n @ ('\\' | '|')) => cur.push(n),
                Some(n) => {
                    cur.push('\\');
                    cur.push(n);
                }
                None => cur.push('\\'),
            },
            '|' => cells.push(std::mem::take(&mut cur).trim().to_string()),
            _ => cur.push(c),
        }
    }
    cells.push(cur.trim().to_string());
    Some(cells)
}

/// Reads a table produced by [`render_markdown`].
pub fn parse_markdown(text: &str) -> Result<MarkdownBoard, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = split_cells(lines.next().ok_or("no header line")?).ok_or("header is not a table row")?;
    if head.len() < 3 || head[..3] != FIXED_HEADERS {
        return Err(format!("unexpected header {head:?}"));
    }
    let width = head.len();
    let mut rows = Vec::new();
    if let Some(rule) = lines.next() {
        let rule = split_cells(rule).ok_or("rule is not a table row")?;
        if rule.len() != width
            || !rule
                .iter()
                .all(|c| !c.is_empty() && c.chars().all(|x| x == '-' || x == ':'))
        {
            return Err("malformed rule line".into());
        }
    }
    for (i, l) in lines.enumerate() {
        let cells = split_cells(l).ok_or_else(|| format!("row {i} is not a table row"))?;
        if cells.len() != width {
            return Err(format!("row {i} has {} cells, header has {width}", cells.len()));
        }
        let rank = cells[0]
            .parse()
            .map_err(|_| format!("row {i}: bad rank {:?}", cells[0]))?;
        rows.push(MarkdownRow {
            rank,
            title: cells[1].clone(),
            setting: cells[2].clone(),
            values: cells[3..].iter().map(|c| (c != MISSING).then(|| c.clone())).collect(),
        });
    }
    Ok(MarkdownBoard {
        metric_headers: head[3..].to_vec(),
        rows,
    })
}
