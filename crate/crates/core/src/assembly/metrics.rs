//! Metric names: normalization, alias clustering, units and directions.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;
use std::sync::LazyLock;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::values::MetricValue;
use super::{AssemblyError, Quintuple};
use crate::latex::strip_latex_markup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
    Unknown,
}

impl Direction {
    pub fn arrow(self) -> &'static str {
        match self {
            Direction::HigherBetter => "↑",
            Direction::LowerBetter => "↓",
            Direction::Unknown => "",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Ratio,
    Percent,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricColumn {
    pub canonical_name: String,
    /// Normalized names that map to this column.
    pub aliases: BTreeSet<String>,
    pub direction: Direction,
    pub unit: Unit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnownMetric {
    pub canonical: String,
    pub aliases: Vec<String>,
    pub direction: Direction,
    /// Values live in [0, 1] or [0, 100], so ratio and percent are both possible.
    pub bounded: bool,
}

/// Alias and direction table. The built-in copy ships as `data/metrics.json`.
#[derive(Debug, Clone)]
pub struct MetricKnowledge {
    entries: Vec<KnownMetric>,
    by_alias: HashMap<String, usize>,
}

const BUILTIN_METRICS: &str = include_str!("../../data/metrics.json");

static BUILTIN: LazyLock<MetricKnowledge> =
    LazyLock::new(|| MetricKnowledge::from_json(BUILTIN_METRICS).expect("built-in metric table is valid"));

impl MetricKnowledge {
    pub fn builtin() -> &'static MetricKnowledge {
        &BUILTIN
    }

    pub fn from_json(text: &str) -> Result<MetricKnowledge, AssemblyError> {
        let entries: Vec<KnownMetric> =
            serde_json::from_str(text).map_err(|e| AssemblyError::BadMetricTable(e.to_string()))?;
        let mut by_alias: HashMap<String, usize> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            let names = e.aliases.iter().chain(std::iter::once(&e.canonical));
            for alias in names {
                let key = normalize_metric_name(alias);
                if let Some(&j) = by_alias.get(&key) {
                    if j != i {
                        return Err(AssemblyError::BadMetricTable(format!(
                            "alias {alias:?} belongs to both {} and {}",
                            entries[j].canonical, e.canonical
                        )));
                    }
                }
                by_alias.insert(key, i);
            }
        }
        Ok(MetricKnowledge { entries, by_alias })
    }

    pub fn load(path: &Path) -> Result<MetricKnowledge, AssemblyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AssemblyError::BadMetricTable(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn lookup(&self, raw_name: &str) -> Option<&KnownMetric> {
        self.by_alias
            .get(&normalize_metric_name(raw_name))
            .map(|&i| &self.entries[i])
    }
}

/// Case-folded name with markup, arrows, spaces, hyphens, underscores and
/// other punctuation removed: `HD_95 ↓` and `hd95` agree.
pub fn normalize_metric_name(name: &str) -> String {
    strip_latex_markup(name)
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

pub fn arrow_direction(name: &str) -> Option<Direction> {
    let clean = strip_latex_markup(name);
    if clean.contains(['↑', '⇑']) {
        Some(Direction::HigherBetter)
    } else if clean.contains(['↓', '⇓']) {
        Some(Direction::LowerBetter)
    } else {
        None
    }
}

fn display_name(raw: &str) -> String {
    let clean = strip_latex_markup(raw).replace("(%)", "");
    clean
        .chars()
        .filter(|c| !matches!(c, '↑' | '↓' | '⇑' | '⇓' | '%'))
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Same title and metric, different values: the first is kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub title: String,
    pub metric: String,
    pub kept: String,
    pub discarded: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Unified {
    pub columns: Vec<MetricColumn>,
    pub quintuples: Vec<Quintuple>,
    pub conflicts: Vec<Conflict>,
}

struct Draft {
    display: String,
    aliases: BTreeSet<String>,
    arrow: Option<Direction>,
    known: Option<(Direction, bool)>,
}

/// Clusters metric names into columns, picks one unit per column and
/// converts every value into it. Columns come in order of first appearance.
pub fn unify_metrics(quintuples: Vec<Quintuple>, knowledge: &MetricKnowledge) -> Unified {
    let mut drafts: IndexMap<String, Draft> = IndexMap::new();
    // (quintuple, column id, value with resolved percent flag)
    let mut placed: Vec<Vec<(String, MetricValue)>> = Vec::with_capacity(quintuples.len());

    for q in &quintuples {
        let mut mine = Vec::new();
        for (raw, value) in &q.metrics {
            let key = normalize_metric_name(raw);
            if key.is_empty() {
                log::warn!("{}: metric name {raw:?} is empty after normalization", q.title);
                continue;
            }
            let known = knowledge.lookup(raw);
            let id = known.map_or(key.clone(), |k| normalize_metric_name(&k.canonical));
            let draft = drafts.entry(id.clone()).or_insert_with(|| Draft {
                display: known.map_or_else(|| display_name(raw), |k| k.canonical.clone()),
                aliases: BTreeSet::new(),
                arrow: None,
                known: known.map(|k| (k.direction, k.bounded)),
            });
            draft.aliases.insert(key);
            if draft.arrow.is_none() {
                draft.arrow = arrow_direction(raw);
            }
            let bounded = draft.known.is_some_and(|(_, b)| b);
            let name_says_percent = strip_latex_markup(raw).contains('%');
            let percent = value.percent || name_says_percent || (bounded && value.value().abs() > 1.0);
            let mut v = value.clone();
            v.percent = percent;
            mine.push((id, v));
        }
        placed.push(mine);
    }

    let mut columns = Vec::new();
    let mut units: HashMap<String, Unit> = HashMap::new();
    for (id, d) in &drafts {
        let values = placed.iter().flatten().filter(|(i, _)| i == id).map(|(_, v)| v);
        let (pct, ratio) = values.fold(
            (0usize, 0usize),
            |(p, r), v| if v.percent { (p + 1, r) } else { (p, r + 1) },
        );
        let bounded = d.known.is_some_and(|(_, b)| b);
        let unit = if bounded || pct > 0 {
            if pct > ratio {
                Unit::Percent
            } else {
                Unit::Ratio
            }
        } else {
            Unit::Absolute
        };
        units.insert(id.clone(), unit);
        columns.push(MetricColumn {
            canonical_name: d.display.clone(),
            aliases: d.aliases.clone(),
            direction: d.arrow.or(d.known.map(|(dir, _)| dir)).unwrap_or(Direction::Unknown),
            unit,
        });
    }
    let names: HashMap<&String, &String> = drafts.iter().map(|(id, d)| (id, &d.display)).collect();

    let mut conflicts = Vec::new();
    let mut out = Vec::with_capacity(quintuples.len());
    for (mut q, mine) in quintuples.into_iter().zip(placed) {
        let mut metrics: IndexMap<String, MetricValue> = IndexMap::new();
        for (id, v) in mine {
            let v = match units[&id] {
                Unit::Percent => v.in_unit(true),
                Unit::Ratio => v.in_unit(false),
                Unit::Absolute => v,
            };
            let name = names[&id].clone();
            match metrics.get(&name) {
                Some(existing) if existing.value() != v.value() => {
                    log::warn!(
                        "{}: conflicting values for {name}: {} vs {}",
                        q.title,
                        existing.text,
                        v.text
                    );
                    conflicts.push(Conflict {
                        title: q.title.clone(),
                        metric: name,
                        kept: existing.text.clone(),
                        discarded: v.text,
                    });
                }
                Some(_) => {}
                None => {
                    metrics.insert(name, v);
                }
            }
        }
        q.metrics = metrics;
        out.push(q);
    }
    Unified {
        columns,
        quintuples: out,
        conflicts,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{values::parse_number_text, Quintuple};

    fn q(title: &str, metrics: &[(&str, &str)]) -> Quintuple {
        let mut q = Quintuple::bare(title, "LA");
        for (k, v) in metrics {
            q.metrics.insert(k.to_string(), parse_number_text(v).unwrap());
        }
        q
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_metric_name("HD_95 ↓"), "hd95");
        assert_eq!(normalize_metric_name("srcc$\\uparrow$"), "srcc");
        assert_eq!(normalize_metric_name("Dice (%)"), "dice");
        let k = MetricKnowledge::builtin();
        for a in ["95HD", "HD95", "HD_95", "HD", "hausdorff distance"] {
            assert_eq!(k.lookup(a).unwrap().canonical, "95HD", "{a}");
        }
        assert_eq!(k.lookup("DSC").unwrap().canonical, "Dice");
        assert!(k.lookup("BrandNewScore").is_none());
    }

    #[test]
    fn percent_and_ratio_meet() {
        let u = unify_metrics(
            vec![
                q("a", &[("Dice", "50%")]),
                q("b", &[("Dice", "0.5")]),
                q("c", &[("DSC", "0.7")]),
            ],
            MetricKnowledge::builtin(),
        );
        assert_eq!(u.columns.len(), 1);
        assert_eq!(u.columns[0].unit, Unit::Ratio);
        assert_eq!(
            u.quintuples[0].metrics["Dice"].value(),
            u.quintuples[1].metrics["Dice"].value()
        );
    }

    #[test]
    fn srcc_arrow_variants_share_a_column() {
        let u = unify_metrics(
            vec![q("a", &[("SRCC", "0.91")]), q("b", &[("srcc↑", "0.93")])],
            MetricKnowledge::builtin(),
        );
        assert_eq!(u.columns.len(), 1);
        assert_eq!(u.columns[0].direction, Direction::HigherBetter);
    }

    #[test]
    fn unknown_metric_takes_arrow_or_unknown() {
        let u = unify_metrics(
            vec![q("a", &[("Zeta score ↓", "3.1"), ("Omega", "2")])],
            MetricKnowledge::builtin(),
        );
        assert_eq!(u.columns[0].canonical_name, "Zeta score");
        assert_eq!(u.columns[0].direction, Direction::LowerBetter);
        assert_eq!(u.columns[0].unit, Unit::Absolute);
        assert_eq!(u.columns[1].direction, Direction::Unknown);
    }

    #[test]
    fn majority_unit_with_ratio_on_tie() {
        let u = unify_metrics(
            vec![
                q("a", &[("Dice", "91.2")]),
                q("b", &[("Dice", "90.1")]),
                q("c", &[("Dice", "0.89")]),
            ],
            MetricKnowledge::builtin(),
        );
        assert_eq!(u.columns[0].unit, Unit::Percent);
        assert_eq!(u.quintuples[2].metrics["Dice"].text, "89");
        let u = unify_metrics(
            vec![q("a", &[("Dice", "91.2")]), q("c", &[("Dice", "0.89")])],
            MetricKnowledge::builtin(),
        );
        assert_eq!(u.columns[0].unit, Unit::Ratio);
        assert_eq!(u.quintuples[0].metrics["Dice"].text, "0.912");
    }

    #[test]
    fn conflicting_aliases_keep_first() {
        let u = unify_metrics(
            vec![q("a", &[("HD", "7.1"), ("95HD", "6.9")])],
            MetricKnowledge::builtin(),
        );
        assert_eq!(u.quintuples[0].metrics["95HD"].text, "7.1");
        assert_eq!(u.conflicts.len(), 1);
        let u = unify_metrics(
            vec![q("a", &[("Dice", "0.9"), ("DSC", "90%")])],
            MetricKnowledge::builtin(),
        );
        assert!(u.conflicts.is_empty());
    }

    #[test]
    fn overlapping_aliases_are_rejected() {
        let bad = r#"[{"canonical": "A", "aliases": ["x"], "direction": "unknown", "bounded": false},
                      {"canonical": "B", "aliases": ["X"], "direction": "unknown", "bounded": false}]"#;
        assert!(MetricKnowledge::from_json(bad).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(256))]

        #[test]
        fn aliases_are_unique_and_values_placed_once(
            picks in proptest::collection::vec(proptest::collection::vec((0usize..14, 0u32..10_000, proptest::bool::ANY), 0..5), 1..12)
        ) {
            let pool = ["Dice", "DSC", "dice (%)", "Jaccard", "IoU", "95HD", "HD95", "HD_95", "hd",
                        "ASD", "SRCC", "srcc↑", "Odd-Metric", "odd metric ↓"];
            let mut input = Vec::new();
            for (i, ms) in picks.iter().enumerate() {
                let mut q = Quintuple::bare(&format!("p{i}"), "LA");
                for (n, v, pct) in ms {
                    let text = format!("{}.{}{}", v / 100, v % 100, if *pct { "%" } else { "" });
                    q.metrics.entry(pool[*n].to_string()).or_insert(parse_number_text(&text).unwrap());
                }
                input.push(q);
            }
            let placed_in: usize = input.iter().map(|q| q.metrics.len()).sum();
            let u = unify_metrics(input, MetricKnowledge::builtin());
            let mut seen = std::collections::BTreeSet::new();
            for c in &u.columns {
                for a in &c.aliases {
                    proptest::prop_assert!(seen.insert(a.clone()), "alias {} in two columns", a);
                }
            }
            let names: std::collections::BTreeSet<&String> = u.columns.iter().map(|c| &c.canonical_name).collect();
            proptest::prop_assert_eq!(names.len(), u.columns.len());
            let placed_out: usize = u.quintuples.iter().map(|q| q.metrics.len()).sum();
            let merged = placed_in - placed_out;
            proptest::prop_assert!(merged >= u.conflicts.len());
            for q in &u.quintuples {
                for (k, v) in &q.metrics {
                    let col = u.columns.iter().find(|c| &c.canonical_name == k);
                    proptest::prop_assert!(col.is_some());
                    proptest::prop_assert_eq!(v.percent, col.unwrap().unit == Unit::Percent);
                }
            }
        }
    }
}
