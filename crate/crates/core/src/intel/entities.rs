use std::sync::LazyLock;

use regex::Regex;
use serde_json::Value;

use super::{billed, Billed, EntityLabel, IntelError, Shots};
use crate::latex::TableBlock;
use crate::llm::{parse_json_payload, Gateway};
use crate::prompts;

static NUMERIC_CELL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^[\s(]*[-+−]?\d+(?:[.,]\d+)*\s*%?\s*(?:(?:±|\+/-|\+-)\s*\d+(?:\.\d+)?\s*%?)?[\s)]*[↑↓†‡*]*$")
        .expect("valid numeric regex")
});

/// True for result-like cells: numbers with optional sign, percent, spread
/// or marker glyphs.
pub fn is_numeric_cell(cell: &str) -> bool {
    NUMERIC_CELL.is_match(cell.trim())
}

fn label_grid(value: &Value) -> Option<Vec<Vec<Option<EntityLabel>>>> {
    value
        .as_array()?
        .iter()
        .map(|row| {
            row.as_array().map(|cells| {
                cells
                    .iter()
                    .map(|c| c.as_str().and_then(EntityLabel::parse_label))
                    .collect()
            })
        })
        .collect()
}

/// Labels every cell of `block`. Numeric and empty cells are always
/// [`EntityLabel::None`]. A reply of the wrong shape is re-asked once.
pub fn tag_table_entities(
    block: &TableBlock,
    gateway: &Gateway,
    shots: Shots,
) -> Billed<Result<Vec<Vec<EntityLabel>>, IntelError>> {
    billed(|usage| {
        let want = (block.rows(), block.cols());
        if block.grid.iter().any(|r| r.len() != want.1) {
            return Err(IntelError::InvalidInput("grid is not rectangular".into()));
        }
        let system = match shots {
            Shots::Zero => prompts::ENTITIES.to_string(),
            Shots::One => format!("{}\n{}", prompts::ENTITIES, prompts::ENTITIES_EXAMPLE),
        };
        let user = format!(
            "Caption: {}\nTable:\n{}",
            block.caption,
            serde_json::to_string(&block.grid).expect("grid serializes")
        );
        let mut request = gateway.request(system, user);
        for attempt in 0..2 {
            let (text, entry) = gateway.complete(&request)?;
            usage.push(entry);
            let grid = parse_json_payload(&text, &["labels"])
                .ok()
                .and_then(|doc| label_grid(&doc["labels"]));
            let got = grid
                .as_ref()
                .map_or((0, 0), |g| (g.len(), g.first().map_or(0, Vec::len)));
            let fits = grid.as_ref().is_some_and(|g| {
                g.len() == want.0 && g.iter().all(|r| r.len() == want.1 && r.iter().all(Option::is_some))
            });
            if fits {
                let grid = grid.expect("checked above");
                return Ok(block
                    .grid
                    .iter()
                    .zip(grid)
                    .map(|(cells, labels)| {
                        cells
                            .iter()
                            .zip(labels)
                            .map(|(cell, label)| {
                                if cell.trim().is_empty() || is_numeric_cell(cell) {
                                    EntityLabel::None
                                } else {
                                    label.expect("checked above")
                                }
                            })
                            .collect()
                    })
                    .collect());
            }
            if attempt == 1 {
                return Err(IntelError::ShapeMismatch { got, want });
            }
            request = request.with_appended(&format!(
                "\n\nThe table has {} rows and {} columns; reply with a label grid of exactly that shape, using only method, dataset, metric, setting or none.",
                want.0, want.1
            ));
        }
        unreachable!("loop returns on the second attempt")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ProviderProfile, ScriptedMock};
    use serde_json::json;

    fn gateway(script: Value) -> Gateway {
        Gateway::new(
            Box::new(ScriptedMock::from_json(&script.to_string()).unwrap()),
            ProviderProfile::mock("inline"),
        )
    }

    fn block(grid: &[&[&str]]) -> TableBlock {
        TableBlock {
            index_in_paper: 0,
            raw_env: String::new(),
            caption: "c".into(),
            grid: grid.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
            description: String::new(),
            label: None,
            span: (0, 0),
        }
    }

    #[test]
    fn numeric_cells() {
        for s in [
            "0.9383",
            "95.2%",
            "76.57±11.65",
            "-3",
            "(+6.49)",
            "12.3†",
            "1,024",
            "0.95↑",
        ] {
            assert!(is_numeric_cell(s), "{s}");
        }
        for s in ["RichIQA", "SRCC↑", "KonIQ-10K", "w/o direct pathway", "", "ResNet-50"] {
            assert!(!is_numeric_cell(s), "{s}");
        }
    }

    #[test]
    fn numeric_cells_forced_to_none() {
        let gw = gateway(
            json!([{"match": {"prompt_regex": "."}, "response": {"labels": [["method", "metric"], ["method", "method"]]}}]),
        );
        let b = block(&[&["Method", "SRCC↑"], &["RichIQA", "0.9383"]]);
        let labels = tag_table_entities(&b, &gw, Shots::Zero).value.unwrap();
        assert_eq!(
            labels,
            vec![
                vec![EntityLabel::Method, EntityLabel::Metric],
                vec![EntityLabel::Method, EntityLabel::None]
            ]
        );
    }

    #[test]
    fn shape_mismatch_reasks_then_fails() {
        let gw = gateway(json!([
            {"match": {"prompt_regex": "exactly that shape"}, "response": {"labels": [["none"]]}},
            {"match": {"prompt_regex": "."}, "response": {"labels": [["none", "none"]]}},
        ]));
        let b = block(&[&["a", "b"], &["c", "d"]]);
        let out = tag_table_entities(&b, &gw, Shots::Zero);
        assert!(matches!(
            out.value,
            Err(IntelError::ShapeMismatch {
                got: (1, 1),
                want: (2, 2)
            })
        ));
        assert_eq!(out.usage.len(), 2);
    }
}
