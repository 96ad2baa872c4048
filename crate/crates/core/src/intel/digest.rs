use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{billed, Billed, IntelError, TableClass};
use crate::latex::{strip_latex_markup, TableBlock};
use crate::llm::{count_tokens, parse_json_payload, Gateway, JSON_ONLY_REMINDER};
use crate::prompts;

/// Keys of the persisted digest, in order.
pub const DIGEST_KEYS: [&str; 11] = [
    "title",
    "number of tables",
    "classification of tables",
    "selected table's index",
    "metrics",
    "selected table's metrics",
    "selected table's core results",
    "selected table's settings (model & size)",
    "selected table's settings (training strategy)",
    "selected table's settings (hyperparameter selection)",
    "github",
];

/// Structured extraction for one (paper, dataset) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDigest {
    pub title: String,
    pub number_of_tables: usize,
    pub classification_of_tables: BTreeMap<usize, TableClass>,
    pub selected_table_index: usize,
    pub metrics_text: String,
    pub selected_table_metrics: String,
    /// Metric name to value as reported; numbers or decorated strings.
    pub core_results: IndexMap<String, Value>,
    pub setting_model_size: String,
    pub setting_training_strategy: String,
    pub setting_hyperparameters: IndexMap<String, Value>,
    pub github: Option<String>,
    /// The dataset this digest targets; not part of the schema document.
    pub dataset: String,
}

fn violation(msg: impl Into<String>) -> IntelError {
    IntelError::SchemaViolation(msg.into())
}

fn as_count(v: &Value) -> Option<i64> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn as_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => strip_latex_markup(s),
        Value::Array(items) => items.iter().map(as_text).collect::<Vec<_>>().join(", "),
        other => other.to_string(),
    }
}

fn clean_value(v: &Value) -> Value {
    match v {
        Value::String(s) => Value::String(strip_latex_markup(s)),
        other => other.clone(),
    }
}

impl TableDigest {
    /// The schema document, keys in the fixed order.
    pub fn to_schema_json(&self) -> Value {
        let mut doc = Map::new();
        let classes: Map<String, Value> = self
            .classification_of_tables
            .iter()
            .map(|(i, c)| (i.to_string(), Value::from(c.schema_label())))
            .collect();
        let values = [
            Value::from(self.title.clone()),
            Value::from(self.number_of_tables),
            Value::Object(classes),
            Value::from(self.selected_table_index),
            Value::from(self.metrics_text.clone()),
            Value::from(self.selected_table_metrics.clone()),
            Value::Object(self.core_results.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
            Value::from(self.setting_model_size.clone()),
            Value::from(self.setting_training_strategy.clone()),
            Value::Object(
                self.setting_hyperparameters
                    .iter()
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect(),
            ),
            self.github.clone().map_or(Value::Null, Value::from),
        ];
        for (key, value) in DIGEST_KEYS.iter().zip(values) {
            doc.insert(key.to_string(), value);
        }
        Value::Object(doc)
    }

    /// Reads and validates a schema document.
    ///
    /// `expected_tables` is the number of tables shown to the provider.
    /// A classification without any main-result table yields
    /// [`IntelError::NoMainResultTable`]; other defects are schema violations.
    pub fn from_schema_json(
        doc: &Map<String, Value>,
        dataset: &str,
        expected_tables: Option<usize>,
    ) -> Result<TableDigest, IntelError> {
        let get = |k: &str| doc.get(k).ok_or_else(|| violation(format!("missing {k:?}")));

        let n = as_count(get("number of tables")?)
            .filter(|n| *n >= 0)
            .ok_or_else(|| violation("\"number of tables\" is not a count"))? as usize;
        let raw_classes = get("classification of tables")?
            .as_object()
            .ok_or_else(|| violation("\"classification of tables\" is not a dict"))?;
        let mut classes = BTreeMap::new();
        for (k, v) in raw_classes {
            let idx: usize = k
                .trim()
                .parse()
                .map_err(|_| violation(format!("table key {k:?} is not an index")))?;
            let label = v.as_str().unwrap_or_default();
            let class =
                TableClass::parse_label(label).ok_or_else(|| violation(format!("unknown table class {label:?}")))?;
            classes.insert(idx, class);
        }
        if classes.len() != n || classes.keys().any(|&i| i >= n) {
            return Err(violation(format!(
                "\"classification of tables\" has {} entries for {n} tables",
                classes.len()
            )));
        }
        if let Some(expected) = expected_tables {
            if n != expected {
                return Err(violation(format!(
                    "\"number of tables\" is {n}, the article has {expected}"
                )));
            }
        }
        if !classes.values().any(|c| *c == TableClass::MainResult) {
            return Err(IntelError::NoMainResultTable);
        }
        let selected = as_count(get("selected table's index")?)
            .filter(|i| *i >= 0 && (*i as usize) < n)
            .ok_or_else(|| violation("\"selected table's index\" is out of range"))? as usize;
        if classes[&selected] != TableClass::MainResult {
            return Err(violation(format!(
                "selected table {selected} is not a main-result table"
            )));
        }

        let core: IndexMap<String, Value> = get("selected table's core results")?
            .as_object()
            .ok_or_else(|| violation("\"selected table's core results\" is not a dict"))?
            .iter()
            .map(|(k, v)| (strip_latex_markup(k), clean_value(v)))
            .filter(|(k, v)| !k.is_empty() && !v.is_null())
            .collect();
        if core.is_empty() {
            return Err(violation("\"selected table's core results\" is empty"));
        }
        let hyper = match doc.get("selected table's settings (hyperparameter selection)") {
            Some(Value::Object(m)) => m.iter().map(|(k, v)| (k.clone(), clean_value(v))).collect(),
            _ => IndexMap::new(),
        };
        let github = doc.get("github").map(as_text).filter(|g| {
            !g.is_empty() && !matches!(g.to_lowercase().as_str(), "n/a" | "none" | "null" | "not available")
        });

        Ok(TableDigest {
            title: as_text(get("title")?),
            number_of_tables: n,
            classification_of_tables: classes,
            selected_table_index: selected,
            metrics_text: doc.get("metrics").map(as_text).unwrap_or_default(),
            selected_table_metrics: doc.get("selected table's metrics").map(as_text).unwrap_or_default(),
            core_results: core,
            setting_model_size: doc
                .get("selected table's settings (model & size)")
                .map(as_text)
                .unwrap_or_default(),
            setting_training_strategy: doc
                .get("selected table's settings (training strategy)")
                .map(as_text)
                .unwrap_or_default(),
            setting_hyperparameters: hyper,
            github,
            dataset: dataset.to_string(),
        })
    }
}

/// The article shown to the provider: title, the prose with floats cut out
/// (truncated to `prose_budget` tokens), then every table labelled with its index.
pub fn article_text(title: &str, prose: &str, blocks: &[TableBlock], prose_budget: usize) -> String {
    let mut prose_clean = prose.to_string();
    for b in blocks {
        prose_clean = prose_clean.replace(&b.raw_env, "");
    }
    let words: Vec<&str> = prose_clean.split_whitespace().collect();
    let prose_clean = if words.len() > prose_budget {
        log::warn!(
            "{title}: truncating prose from {} to {prose_budget} tokens",
            words.len()
        );
        words[..prose_budget].join(" ")
    } else {
        prose_clean.trim().to_string()
    };
    let mut out = format!("\\title{{{title}}}\n{prose_clean}\n");
    for (i, b) in blocks.iter().enumerate() {
        out.push_str(&format!("% Table {i}\n{}\n", b.raw_env.trim()));
    }
    out
}

fn user_prompt(article: &str, dataset: &str) -> String {
    format!(
        "Now I provide you with an article:\n\n<article>{article}</article>\n\nThen I specify the dataset as {dataset}, and you should output:"
    )
}

/// One provider round-trip producing the digest of `blocks` for `dataset`.
/// `prose` is the experiment text; it is trimmed to fit the input cap.
/// A malformed or inconsistent reply is re-asked once.
pub fn digest_paper(
    blocks: &[TableBlock],
    title: &str,
    dataset: &str,
    prose: &str,
    gateway: &Gateway,
) -> Billed<Result<TableDigest, IntelError>> {
    billed(|usage| {
        if blocks.is_empty() {
            return Err(IntelError::NoMainResultTable);
        }
        if dataset.trim().is_empty() {
            return Err(IntelError::InvalidInput("dataset is empty".into()));
        }
        let system = prompts::extraction_system(dataset);
        let fixed = count_tokens(&system) + count_tokens(&user_prompt(&article_text(title, "", blocks, 0), dataset));
        // room for the re-ask reminder
        let headroom = count_tokens(JSON_ONLY_REMINDER) + 64;
        let budget = gateway.profile().input_token_cap.saturating_sub(fixed + headroom);
        let article = article_text(title, prose, blocks, budget);
        let mut request = gateway.request(system, user_prompt(&article, dataset));

        for attempt in 0..2 {
            let (text, entry) = gateway.complete(&request)?;
            usage.push(entry);
            let outcome = parse_json_payload(&text, &DIGEST_KEYS)
                .map_err(IntelError::from)
                .and_then(|doc| TableDigest::from_schema_json(&doc, dataset, Some(blocks.len())));
            match outcome {
                Ok(d) => return Ok(d),
                Err(IntelError::NoMainResultTable) => return Err(IntelError::NoMainResultTable),
                Err(e) if attempt == 0 => {
                    log::warn!("{title}: re-asking digest: {e}");
                    request = request.with_appended(&format!("{JSON_ONLY_REMINDER} Problem: {e}."));
                }
                Err(IntelError::Llm(e)) => return Err(IntelError::SchemaViolation(e.to_string())),
                Err(e) => return Err(e),
            }
        }
        unreachable!("loop returns on the second attempt")
    })
}
