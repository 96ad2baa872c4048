use std::collections::BTreeSet;

use super::{billed, Billed, IntelError};
use crate::latex::strip_latex_markup;
use crate::llm::{count_tokens, Gateway};
use crate::prompts;

/// Asks which datasets a paper reports main results on. Names are cleaned of
/// markup and deduplicated case-insensitively, first spelling kept.
pub fn list_datasets(title: &str, prose: &str, gateway: &Gateway) -> Billed<Result<Vec<String>, IntelError>> {
    billed(|usage| {
        let cap = gateway.profile().input_token_cap;
        let budget = cap.saturating_sub(count_tokens(prompts::DATASETS) + count_tokens(title) + 128);
        let words: Vec<&str> = prose.split_whitespace().collect();
        let prose = words[..words.len().min(budget)].join(" ");
        let request = gateway.request(
            prompts::DATASETS,
            format!("Title: {title}\n\n<article>{prose}</article>"),
        );
        let (doc, entries) = gateway.complete_json(&request, &["datasets"]);
        usage.extend(entries);
        let doc = doc?;
        let mut seen = BTreeSet::new();
        let names = doc["datasets"]
            .as_array()
            .ok_or_else(|| IntelError::SchemaViolation("\"datasets\" is not a list".into()))?
            .iter()
            .filter_map(|v| v.as_str())
            .map(strip_latex_markup)
            .filter(|n| !n.is_empty() && seen.insert(n.to_lowercase()))
            .collect();
        Ok(names)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{ProviderProfile, ScriptedMock};
    use serde_json::json;

    #[test]
    fn dedups_case_insensitively() {
        let script = json!([{"match": {"prompt_regex": "Title: P1"}, "response": {"datasets": ["LA", "\\textbf{Pancreas-NIH}", "la", ""]}}]);
        let gw = Gateway::new(
            Box::new(ScriptedMock::from_json(&script.to_string()).unwrap()),
            ProviderProfile::mock("inline"),
        );
        let out = list_datasets("P1", "text", &gw);
        assert_eq!(out.value.unwrap(), vec!["LA", "Pancreas-NIH"]);
        assert_eq!(out.usage.len(), 1);
    }
}
