use serde_json::{Map, Value};

use super::LlmError;

/// Appended to the user prompt when re-asking after a malformed reply.
pub const JSON_ONLY_REMINDER: &str = "\n\nYour previous reply could not be parsed. Please return only JSON.";

/// Extracts the first well-formed JSON object in `text`, ignoring code fences
/// and prose around it, and checks that every key in `required` is present.
pub fn parse_json_payload(text: &str, required: &[&str]) -> Result<Map<String, Value>, LlmError> {
    let doc = first_object(text).ok_or(LlmError::NoJsonFound)?;
    let missing: Vec<String> = required
        .iter()
        .filter(|k| !doc.contains_key(**k))
        .map(|k| k.to_string())
        .collect();
    if missing.is_empty() {
        Ok(doc)
    } else {
        Err(LlmError::MissingKeys(missing))
    }
}

fn first_object(text: &str) -> Option<Map<String, Value>> {
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}
