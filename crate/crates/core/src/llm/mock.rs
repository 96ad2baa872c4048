use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{count_tokens, ChatRequest, Completion, LlmError, Provider};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptMatch {
    Fingerprint(String),
    /// Searched in `system_prompt + "\n" + user_prompt`.
    PromptRegex(String),
}

/// One scripted reply. A non-string `response` is sent as compact JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match")]
    pub matcher: ScriptMatch,
    pub response: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_tokens: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_tokens: Option<u64>,
}

impl ScriptEntry {
    fn text(&self) -> String {
        match &self.response {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    }
}

/// Deterministic stand-in for a chat model. Fingerprint entries win; the
/// first matching regex entry is the fallback.
pub struct ScriptedMock {
    entries: Vec<ScriptEntry>,
    regexes: Vec<Option<Regex>>,
}

impl ScriptedMock {
    pub fn new(entries: Vec<ScriptEntry>) -> Result<Self, LlmError> {
        let regexes = entries
            .iter()
            .map(|e| match &e.matcher {
                ScriptMatch::PromptRegex(p) => Regex::new(p)
                    .map(Some)
                    .map_err(|err| LlmError::Provider(format!("bad prompt_regex {p:?}: {err}"))),
                ScriptMatch::Fingerprint(_) => Ok(None),
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { entries, regexes })
    }

    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let entries: Vec<ScriptEntry> =
            serde_json::from_str(text).map_err(|e| LlmError::Provider(format!("bad mock script: {e}")))?;
        Self::new(entries)
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|e| LlmError::Provider(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn lookup(&self, request: &ChatRequest) -> Option<&ScriptEntry> {
        let by_fp = self
            .entries
            .iter()
            .find(|e| matches!(&e.matcher, ScriptMatch::Fingerprint(fp) if *fp == request.request_fingerprint));
        if by_fp.is_some() {
            return by_fp;
        }
        let haystack = format!("{}\n{}", request.system_prompt, request.user_prompt);
        self.entries
            .iter()
            .zip(&self.regexes)
            .find(|(_, re)| re.as_ref().is_some_and(|re| re.is_match(&haystack)))
            .map(|(e, _)| e)
    }
}

impl Provider for ScriptedMock {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, LlmError> {
        let entry = self.lookup(request).ok_or_else(|| LlmError::ScriptMiss {
            fingerprint: request.request_fingerprint.clone(),
        })?;
        let text = entry.text();
        Ok(Completion {
            input_tokens: entry.input_tokens.unwrap_or(request.input_tokens() as u64),
            output_tokens: entry.output_tokens.unwrap_or(count_tokens(&text) as u64),
            text,
        })
    }
}
