use std::cmp::Ordering;
use std::collections::BTreeSet;

use chrono::NaiveDate;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::metrics::{unify_metrics, Conflict, Direction, MetricColumn, MetricKnowledge, Unit};
use super::values::{parse_metric_value, MetricValue};
use super::{AssemblyError, DigestRecord, Quintuple, Settings, SourceRef};
use crate::latex::strip_latex_markup;

/// A column is dropped when strictly more than this share of rows lack it.
pub const MAX_MISSING_FRACTION: (usize, usize) = (3, 5);

const SETTING_WORDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardRow {
    pub rank: usize,
    pub title: String,
    /// Short "model, training strategy" text.
    pub setting: String,
    /// Column name to value; a missing value is simply absent.
    pub values: IndexMap<String, MetricValue>,
    pub published: NaiveDate,
    pub paper_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardTable {
    pub dataset: String,
    pub columns: Vec<MetricColumn>,
    pub rows: Vec<BoardRow>,
    /// Maximum number of rows.
    pub items: usize,
    pub primary_metric: Option<String>,
    /// Warnings a reader should see, such as ranking by a metric whose
    /// direction is unknown.
    #[serde(default)]
    pub flags: Vec<String>,
}

impl LeaderboardTable {
    pub fn empty(dataset: &str, items: usize) -> LeaderboardTable {
        LeaderboardTable {
            dataset: dataset.to_string(),
            columns: Vec::new(),
            rows: Vec::new(),
            items,
            primary_metric: None,
            flags: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<&MetricColumn> {
        self.columns.iter().find(|c| c.canonical_name == name)
    }

    fn flag(&mut self, text: String) {
        if !self.flags.contains(&text) {
            log::warn!("{}: {text}", self.dataset);
            self.flags.push(text);
        }
    }

    /// Checks every board invariant; the message names the first violation.
    pub fn validate(&self) -> Result<(), String> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.rank != i + 1 {
                return Err(format!("row {i} has rank {}", row.rank));
            }
            for (name, v) in &row.values {
                let col = self
                    .column(name)
                    .ok_or_else(|| format!("{:?} has a value for unknown column {name:?}", row.title))?;
                if v.percent != (col.unit == Unit::Percent) {
                    return Err(format!(
                        "{:?}: value {} does not match the unit of {name}",
                        row.title, v.text
                    ));
                }
            }
        }
        if self.rows.len() > self.items {
            return Err(format!("{} rows exceed the limit of {}", self.rows.len(), self.items));
        }
        let titles: BTreeSet<String> = self.rows.iter().map(|r| title_key(&r.title)).collect();
        if titles.len() != self.rows.len() {
            return Err("duplicate titles".into());
        }
        let mut names = BTreeSet::new();
        let mut aliases = BTreeSet::new();
        for c in &self.columns {
            if !names.insert(&c.canonical_name) {
                return Err(format!("column {} appears twice", c.canonical_name));
            }
            for a in &c.aliases {
                if !aliases.insert(a) {
                    return Err(format!("alias {a} is shared by two columns"));
                }
            }
        }
        if self.columns.len() > 1 {
            for c in &self.columns {
                if too_sparse(missing_count(self, &c.canonical_name), self.rows.len()) {
                    return Err(format!("column {} is missing too often", c.canonical_name));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub board: LeaderboardTable,
    pub conflicts: Vec<Conflict>,
}

fn collapse(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn title_key(title: &str) -> String {
    collapse(title).to_lowercase()
}

/// One quintuple per distinct title. When a title repeats, the later
/// publication wins, and on equal dates the larger paper id.
pub fn build_quintuples(records: &[DigestRecord]) -> Vec<Quintuple> {
    let mut by_title: IndexMap<String, Quintuple> = IndexMap::new();
    for r in records {
        let d = &r.digest;
        let title = collapse(&strip_latex_markup(&d.title));
        let mut metrics = IndexMap::new();
        for (name, raw) in &d.core_results {
            match parse_metric_value(raw) {
                Some(v) => {
                    metrics.entry(name.clone()).or_insert(v);
                }
                None => log::info!("{}: {name} has no usable value ({raw})", r.paper_id),
            }
        }
        let q = Quintuple {
            title: title.clone(),
            dataset: d.dataset.clone(),
            metrics,
            settings: Settings {
                model_size: collapse(&d.setting_model_size),
                training_strategy: collapse(&d.setting_training_strategy),
                hyperparameters: d.setting_hyperparameters.clone(),
            },
            source: SourceRef {
                paper_id: r.paper_id.clone(),
                published: r.published,
                github: d.github.clone(),
            },
        };
        match by_title.get_mut(&title_key(&title)) {
            Some(existing) => {
                let newer =
                    (q.source.published, &q.source.paper_id) > (existing.source.published, &existing.source.paper_id);
                log::info!(
                    "duplicate title {title:?}: keeping {}",
                    if newer {
                        &q.source.paper_id
                    } else {
                        &existing.source.paper_id
                    }
                );
                if newer {
                    *existing = q;
                }
            }
            None => {
                by_title.insert(title_key(&title), q);
            }
        }
    }
    by_title.into_values().collect()
}

/// "model, training strategy", at most eight words; "-" when both are empty.
pub fn setting_summary(settings: &Settings) -> String {
    let parts: Vec<String> = [&settings.model_size, &settings.training_strategy]
        .into_iter()
        .map(|s| collapse(&strip_latex_markup(s)))
        .filter(|s| !s.is_empty() && !matches!(s.to_lowercase().as_str(), "n/a" | "none" | "-"))
        .collect();
    let words: Vec<&str> = parts.iter().flat_map(|p| p.split(' ')).collect();
    if words.is_empty() {
        return "-".into();
    }
    let joined = parts.join(", ");
    if words.len() <= SETTING_WORDS {
        joined
    } else {
        joined
            .split(' ')
            .take(SETTING_WORDS)
            .collect::<Vec<_>>()
            .join(" ")
            .trim_end_matches(',')
            .to_string()
    }
}

pub fn missing_count(board: &LeaderboardTable, column: &str) -> usize {
    board.rows.iter().filter(|r| !r.values.contains_key(column)).count()
}

fn too_sparse(missing: usize, rows: usize) -> bool {
    missing * MAX_MISSING_FRACTION.1 > rows * MAX_MISSING_FRACTION.0
}

/// Drops every column missing in strictly more than 60% of rows. The densest
/// column survives even when it fails too.
pub fn prune_sparse_columns(mut board: LeaderboardTable) -> LeaderboardTable {
    let rows = board.rows.len();
    if rows == 0 || board.columns.is_empty() {
        return board;
    }
    let missing: Vec<usize> = board
        .columns
        .iter()
        .map(|c| missing_count(&board, &c.canonical_name))
        .collect();
    let mut keep: Vec<bool> = missing.iter().map(|&m| !too_sparse(m, rows)).collect();
    if !keep.iter().any(|&k| k) {
        let densest = (0..missing.len())
            .min_by_key(|&i| missing[i])
            .expect("columns are not empty");
        keep[densest] = true;
        let name = board.columns[densest].canonical_name.clone();
        board.flag(format!("every column is missing in more than 60% of rows; kept {name}"));
    }
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for (c, k) in board.columns.drain(..).zip(keep) {
        if k {
            kept.push(c);
        } else {
            dropped.push(c.canonical_name);
        }
    }
    board.columns = kept;
    for name in &dropped {
        log::info!("{}: dropped sparse column {name}", board.dataset);
        for r in &mut board.rows {
            r.values.shift_remove(name);
        }
    }
    if board.primary_metric.as_ref().is_some_and(|p| dropped.contains(p)) {
        board.primary_metric = None;
    }
    board
}

/// The column with the fewest missing values, earliest on ties.
pub fn primary_metric(board: &LeaderboardTable) -> Option<String> {
    board
        .columns
        .iter()
        .min_by_key(|c| missing_count(board, &c.canonical_name))
        .map(|c| c.canonical_name.clone())
}

fn compare_rows(a: &BoardRow, b: &BoardRow, key: Option<(&str, Direction)>) -> Ordering {
    if let Some((name, direction)) = key {
        match (a.values.get(name), b.values.get(name)) {
            (Some(x), Some(y)) => {
                let o = x.value().partial_cmp(&y.value()).unwrap_or(Ordering::Equal);
                let o = match direction {
                    Direction::HigherBetter => o.reverse(),
                    Direction::LowerBetter => o,
                    Direction::Unknown => Ordering::Equal,
                };
                if o != Ordering::Equal {
                    return o;
                }
            }
            (Some(_), None) => return Ordering::Less,
            (None, Some(_)) => return Ordering::Greater,
            (None, None) => {}
        }
    }
    b.published
        .cmp(&a.published)
        .then_with(|| a.title.cmp(&b.title))
        .then_with(|| a.paper_id.cmp(&b.paper_id))
}

fn renumber(board: &mut LeaderboardTable) {
    for (i, r) in board.rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
}

/// Sorts rows by `primary` in its direction, missing values last, then newer
/// first, then by title, and renumbers ranks from 1.
pub fn rank_rows(mut board: LeaderboardTable, primary: &str) -> Result<LeaderboardTable, AssemblyError> {
    let direction = board
        .column(primary)
        .ok_or_else(|| AssemblyError::UnknownMetric(primary.to_string()))?
        .direction;
    if direction == Direction::Unknown {
        board.flag(format!(
            "direction of {primary} is unknown; rows lacking it are placed last, others by date"
        ));
    }
    board
        .rows
        .sort_by(|a, b| compare_rows(a, b, Some((primary, direction))));
    renumber(&mut board);
    board.primary_metric = Some(primary.to_string());
    Ok(board)
}

/// Ranks by [`primary_metric`], or by date and title when there are no columns.
pub fn rank_by_primary(board: LeaderboardTable) -> LeaderboardTable {
    match primary_metric(&board) {
        Some(p) => rank_rows(board, &p).expect("primary metric is a column"),
        None => {
            let mut board = board;
            board.rows.sort_by(|a, b| compare_rows(a, b, None));
            renumber(&mut board);
            board.primary_metric = None;
            board
        }
    }
}

/// Unify, prune, rank, keep the top `items` rows, then prune and rank again
/// since the cut can leave new sparse columns.
pub fn assemble_board(
    dataset: &str,
    quintuples: Vec<Quintuple>,
    items: usize,
    knowledge: &MetricKnowledge,
) -> Assembled {
    let unified = unify_metrics(quintuples, knowledge);
    let mut board = LeaderboardTable::empty(dataset, items);
    board.columns = unified.columns;
    board.rows = unified
        .quintuples
        .into_iter()
        .map(|q| BoardRow {
            rank: 0,
            setting: setting_summary(&q.settings),
            title: q.title,
            values: q.metrics,
            published: q.source.published,
            paper_id: q.source.paper_id,
        })
        .collect();
    let mut board = rank_by_primary(prune_sparse_columns(board));
    board.rows.truncate(items);
    let board = rank_by_primary(prune_sparse_columns(board));
    Assembled {
        board,
        conflicts: unified.conflicts,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::assembly::values::parse_number_text;
    use proptest::prelude::*;

    pub(crate) fn column(name: &str, direction: Direction) -> MetricColumn {
        MetricColumn {
            canonical_name: name.into(),
            aliases: BTreeSet::from([name.to_lowercase()]),
            direction,
            unit: Unit::Absolute,
        }
    }

    pub(crate) fn row(title: &str, date: (i32, u32, u32), values: &[(&str, &str)]) -> BoardRow {
        BoardRow {
            rank: 0,
            title: title.into(),
            setting: "-".into(),
            values: values
                .iter()
                .map(|(k, v)| (k.to_string(), parse_number_text(v).unwrap()))
                .collect(),
            published: NaiveDate::from_ymd_opt(date.0, date.1, date.2).unwrap(),
            paper_id: title.into(),
        }
    }

    fn board(columns: Vec<MetricColumn>, rows: Vec<BoardRow>) -> LeaderboardTable {
        let mut b = LeaderboardTable::empty("LA", 100);
        b.columns = columns;
        b.rows = rows;
        b
    }

    fn digest_record(title: &str, id: &str, date: &str) -> DigestRecord {
        DigestRecord {
            paper_id: id.into(),
            published: date.parse().unwrap(),
            digest: crate::intel::TableDigest {
                title: title.into(),
                number_of_tables: 1,
                classification_of_tables: [(1, crate::intel::TableClass::MainResult)].into(),
                selected_table_index: 1,
                metrics_text: String::new(),
                selected_table_metrics: "Dice".into(),
                core_results: [("Dice".to_string(), serde_json::json!("91.2"))].into_iter().collect(),
                setting_model_size: "V-Net".into(),
                setting_training_strategy: "10% labeled".into(),
                setting_hyperparameters: IndexMap::new(),
                github: None,
                dataset: "LA".into(),
            },
        }
    }

    #[test]
    fn one_digest_one_quintuple() {
        let q = build_quintuples(&[digest_record("Mean Teachers", "2401.1", "2024-01-03")]);
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].title, "Mean Teachers");
        assert_eq!(q[0].metrics["Dice"].text, "91.2");
        assert_eq!(q[0].settings.model_size, "V-Net");
        assert_eq!(q[0].source.paper_id, "2401.1");
    }

    #[test]
    fn duplicate_titles_keep_the_newest() {
        let q = build_quintuples(&[
            digest_record("Mean Teachers", "2402.2", "2024-02-01"),
            digest_record("mean  teachers", "2401.1", "2024-01-03"),
        ]);
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].source.paper_id, "2402.2");
        let q = build_quintuples(&[
            digest_record("Mean Teachers", "2401.1", "2024-01-03"),
            digest_record("Mean Teachers", "2402.2", "2024-02-01"),
        ]);
        assert_eq!(q[0].source.paper_id, "2402.2");
    }

    fn sparse_board(rows: usize, missing: usize) -> LeaderboardTable {
        let rs = (0..rows)
            .map(|i| {
                let mut v = vec![("Dice", "0.9")];
                if i >= missing {
                    v.push(("ASD", "1.5"));
                }
                row(&format!("t{i}"), (2024, 1, 1), &v)
            })
            .collect();
        board(
            vec![
                column("Dice", Direction::HigherBetter),
                column("ASD", Direction::LowerBetter),
            ],
            rs,
        )
    }

    #[test]
    fn prune_boundary() {
        let b = prune_sparse_columns(sparse_board(20, 13));
        assert_eq!(b.columns.len(), 1);
        assert!(b.rows.iter().all(|r| !r.values.contains_key("ASD")));
        assert_eq!(prune_sparse_columns(sparse_board(20, 12)).columns.len(), 2);
        assert_eq!(prune_sparse_columns(sparse_board(5, 2)).columns.len(), 2);
        assert_eq!(prune_sparse_columns(sparse_board(5, 4)).columns.len(), 1);
    }

    #[test]
    fn densest_column_always_survives() {
        let rs = (0..10)
            .map(|i| match i {
                0 | 1 => row(&format!("t{i}"), (2024, 1, 1), &[("A", "1")]),
                2 => row("t2", (2024, 1, 1), &[("B", "1")]),
                _ => row(&format!("t{i}"), (2024, 1, 1), &[]),
            })
            .collect();
        let b = prune_sparse_columns(board(
            vec![column("B", Direction::Unknown), column("A", Direction::Unknown)],
            rs,
        ));
        assert_eq!(b.columns.len(), 1);
        assert_eq!(b.columns[0].canonical_name, "A");
        assert_eq!(b.flags.len(), 1);
    }

    #[test]
    fn ranking_respects_direction() {
        let b = board(
            vec![column("Dice", Direction::HigherBetter)],
            vec![
                row("a", (2024, 1, 1), &[("Dice", "0.91")]),
                row("b", (2024, 1, 1), &[("Dice", "0.95")]),
                row("c", (2024, 1, 1), &[("Dice", "0.93")]),
            ],
        );
        let b = rank_rows(b, "Dice").unwrap();
        let order: Vec<&str> = b.rows.iter().map(|r| r.title.as_str()).collect();
        assert_eq!(order, ["b", "c", "a"]);
        assert_eq!(b.rows.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3]);

        let b = board(
            vec![column("95HD", Direction::LowerBetter)],
            vec![
                row("a", (2024, 1, 1), &[("95HD", "7.1")]),
                row("b", (2024, 1, 1), &[("95HD", "5.2")]),
            ],
        );
        let b = rank_rows(b, "95HD").unwrap();
        assert_eq!(b.rows[0].title, "b");
        assert!(matches!(rank_rows(b, "Dice"), Err(AssemblyError::UnknownMetric(_))));
    }

    #[test]
    fn missing_sinks_and_ties_prefer_newer() {
        let b = board(
            vec![column("Dice", Direction::HigherBetter)],
            vec![
                row("missing", (2025, 1, 1), &[]),
                row("old", (2023, 1, 1), &[("Dice", "0.9")]),
                row("new", (2024, 1, 1), &[("Dice", "0.90")]),
            ],
        );
        let b = rank_rows(b, "Dice").unwrap();
        let order: Vec<&str> = b.rows.iter().map(|r| r.title.as_str()).collect();
        assert_eq!(order, ["new", "old", "missing"]);
    }

    #[test]
    fn settings_are_short() {
        let s = Settings {
            model_size: "V-Net".into(),
            training_strategy: "semi-supervised with 10% labeled scans and heavy augmentation".into(),
            hyperparameters: IndexMap::new(),
        };
        let text = setting_summary(&s);
        assert!(text.split_whitespace().count() <= 8, "{text}");
        assert!(text.starts_with("V-Net, semi-supervised"));
        assert_eq!(setting_summary(&Settings::default()), "-");
    }

    #[test]
    fn assembly_truncates_and_validates() {
        let mut qs = Vec::new();
        for i in 0..8 {
            let mut q = Quintuple::bare(&format!("paper {i}"), "LA");
            q.metrics
                .insert("Dice".into(), parse_number_text(&format!("0.8{i}")).unwrap());
            if i < 2 {
                q.metrics.insert("ASD".into(), parse_number_text("2.0").unwrap());
            }
            qs.push(q);
        }
        let a = assemble_board("LA", qs, 5, MetricKnowledge::builtin());
        a.board.validate().unwrap();
        assert_eq!(a.board.rows.len(), 5);
        assert_eq!(a.board.rows[0].title, "paper 7");
        assert_eq!(a.board.primary_metric.as_deref(), Some("Dice"));
        assert_eq!(a.board.columns.len(), 1);
    }

    fn arb_board() -> impl Strategy<Value = LeaderboardTable> {
        let names = ["A", "B", "C", "D"];
        (1usize..5, 0usize..25).prop_flat_map(move |(ncols, nrows)| {
            let cells = proptest::collection::vec(
                proptest::collection::vec(proptest::option::weighted(0.55, 0u32..1000), ncols),
                nrows,
            );
            let dates = proptest::collection::vec(0u32..5, nrows);
            let dirs = proptest::collection::vec(0u8..3, ncols);
            (cells, dates, dirs).prop_map(move |(cells, dates, dirs)| {
                let columns = (0..ncols)
                    .map(|c| {
                        let d = [Direction::HigherBetter, Direction::LowerBetter, Direction::Unknown][dirs[c] as usize];
                        column(names[c], d)
                    })
                    .collect();
                let rows = cells
                    .iter()
                    .zip(&dates)
                    .enumerate()
                    .map(|(i, (vals, d))| {
                        let vs: Vec<(&str, String)> = vals
                            .iter()
                            .enumerate()
                            .filter_map(|(c, v)| v.map(|v| (names[c], format!("{}.{}", v / 100, v % 100))))
                            .collect();
                        let refs: Vec<(&str, &str)> = vs.iter().map(|(a, b)| (*a, b.as_str())).collect();
                        row(&format!("row {i}"), (2024, 1 + d, 1), &refs)
                    })
                    .collect();
                board(columns, rows)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn prune_is_idempotent(b in arb_board()) {
            let once = prune_sparse_columns(b);
            let twice = prune_sparse_columns(once.clone());
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn rank_is_a_permutation(b in arb_board(), pick in 0usize..4) {
            let col = b.columns[pick % b.columns.len()].canonical_name.clone();
            let before: BTreeSet<String> = b.rows.iter().map(|r| format!("{:?}", (&r.title, &r.values))).collect();
            let ranked = rank_rows(b, &col).unwrap();
            let after: BTreeSet<String> = ranked.rows.iter().map(|r| format!("{:?}", (&r.title, &r.values))).collect();
            prop_assert_eq!(before, after);
            prop_assert!(ranked.rows.iter().enumerate().all(|(i, r)| r.rank == i + 1));
        }

        #[test]
        fn rank_matches_sort_oracle(b in arb_board()) {
            let col = b.columns[0].clone();
            let ranked = rank_rows(b.clone(), &col.canonical_name).unwrap();
            // oracle: scaled integers, explicit key tuple, stable sort
            let mut rows = b.rows.clone();
            let key = |r: &BoardRow| {
                let v = r.values.get(&col.canonical_name).map(|v| (v.value() * 100.0).round() as i64);
                let signed = match (v, col.direction) {
                    (Some(x), Direction::HigherBetter) => (0, -x),
                    (Some(x), Direction::LowerBetter) => (0, x),
                    (Some(_), Direction::Unknown) => (0, 0),
                    (None, _) => (1, 0),
                };
                (signed, std::cmp::Reverse(r.published), r.title.clone())
            };
            rows.sort_by_key(key);
            let want: Vec<&String> = rows.iter().map(|r| &r.title).collect();
            let got: Vec<&String> = ranked.rows.iter().map(|r| &r.title).collect();
            prop_assert_eq!(got, want);
        }
    }
}
