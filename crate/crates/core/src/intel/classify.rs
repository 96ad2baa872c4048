use serde::{Deserialize, Serialize};

use super::{billed, render_table_for_prompt, Billed, IntelError, TableClass};
use crate::latex::TableBlock;
use crate::llm::Gateway;
use crate::prompts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shots {
    Zero,
    #[default]
    One,
}

const LABEL_REMINDER: &str =
    "\n\nReply with exactly one of: main-result/comparison, ablation, hyper-parameter, others.";

/// Asks the provider for the class of one table. An unreadable label is
/// re-asked once, then falls back to [`TableClass::Other`].
pub fn classify_table(block: &TableBlock, gateway: &Gateway, shots: Shots) -> Billed<Result<TableClass, IntelError>> {
    billed(|usage| {
        if block.caption.trim().is_empty() && block.grid.iter().flatten().all(|c| c.trim().is_empty()) {
            return Err(IntelError::InvalidInput("table has neither caption nor cells".into()));
        }
        let system = match shots {
            Shots::Zero => prompts::CLASSIFY.to_string(),
            Shots::One => format!("{}\n{}", prompts::CLASSIFY, prompts::CLASSIFY_EXAMPLES),
        };
        let request = gateway.request(system, render_table_for_prompt(block));
        let (text, entry) = gateway.complete(&request)?;
        usage.push(entry);
        if let Some(class) = TableClass::parse_label(&text) {
            return Ok(class);
        }
        let (text, entry) = gateway.complete(&request.with_appended(LABEL_REMINDER))?;
        usage.push(entry);
        Ok(TableClass::parse_label(&text).unwrap_or_else(|| {
            log::warn!(
                "table {}: unreadable class {text:?}, using others",
                block.index_in_paper
            );
            TableClass::Other
        }))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ProviderProfile, ScriptedMock};

    fn block(caption: &str) -> TableBlock {
        TableBlock {
            index_in_paper: 0,
            raw_env: String::new(),
            caption: caption.into(),
            grid: vec![vec!["a".into(), "b".into()]],
            description: String::new(),
            label: None,
            span: (0, 0),
        }
    }

    fn gateway(script: serde_json::Value) -> Gateway {
        Gateway::new(
            Box::new(ScriptedMock::from_json(&script.to_string()).unwrap()),
            ProviderProfile::mock("inline"),
        )
    }

    #[test]
    fn caption_driven_script() {
        let gw = gateway(serde_json::json!([
            {"match": {"prompt_regex": "Caption: Ablation study"}, "response": "ablation"},
            {"match": {"prompt_regex": "Caption: Cost of API"}, "response": "others"},
            {"match": {"prompt_regex": "Caption: Main"}, "response": "main-result/comparison"},
        ]));
        let c = |cap: &str| classify_table(&block(cap), &gw, Shots::Zero).value.unwrap();
        assert_eq!(
            c("Ablation study for League with components removed."),
            TableClass::Ablation
        );
        assert_eq!(c("Cost of API."), TableClass::Other);
        assert_eq!(c("Main comparison."), TableClass::MainResult);
    }

    #[test]
    fn one_shot_includes_one_exemplar_per_class() {
        let gw = gateway(serde_json::json!([
            {"match": {"prompt_regex": "(?s)Type: main-result.*Type: ablation.*Type: hyper-parameter.*Type: others"}, "response": "ablation"},
            {"match": {"prompt_regex": "."}, "response": "others"},
        ]));
        assert_eq!(
            classify_table(&block("x"), &gw, Shots::One).value.unwrap(),
            TableClass::Ablation
        );
        assert_eq!(
            classify_table(&block("x"), &gw, Shots::Zero).value.unwrap(),
            TableClass::Other
        );
    }

    #[test]
    fn unreadable_label_reasks_then_falls_back() {
        let gw = gateway(serde_json::json!([
            {"match": {"prompt_regex": "Reply with exactly one"}, "response": "???"},
            {"match": {"prompt_regex": "."}, "response": "I am not sure"},
        ]));
        let out = classify_table(&block("x"), &gw, Shots::Zero);
        assert_eq!(out.value.unwrap(), TableClass::Other);
        assert_eq!(out.usage.len(), 2);
    }
}
