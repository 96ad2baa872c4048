//! Low-level, comment-aware scanning helpers over raw LaTeX.

/// True when the `%` at byte `pos` starts a comment (not escaped by an odd
/// number of backslashes).
fn is_comment_start(bytes: &[u8], pos: usize) -> bool {
    if bytes[pos] != b'%' {
        return false;
    }
    let mut backslashes = 0;
    let mut i = pos;
    while i > 0 && bytes[i - 1] == b'\\' {
        backslashes += 1;
        i -= 1;
    }
    backslashes % 2 == 0
}

/// Byte ranges of every comment (from `%` up to, not including, the newline).
pub fn comment_ranges(text: &str) -> Vec<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if is_comment_start(bytes, i) {
            let end = text[i..].find('\n').map(|n| i + n).unwrap_or(bytes.len());
            out.push((i, end));
            i = end;
        } else {
            i += 1;
        }
    }
    out
}

/// Removes comments, keeping the line breaks that ended them.
pub fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for (start, end) in comment_ranges(text) {
        out.push_str(&text[last..start]);
        last = end;
    }
    out.push_str(&text[last..]);
    out
}

/// Tracks whether byte offsets fall inside comments.
pub struct CommentMask {
    ranges: Vec<(usize, usize)>,
}

impl CommentMask {
    pub fn new(text: &str) -> Self {
        Self {
            ranges: comment_ranges(text),
        }
    }

    pub fn contains(&self, pos: usize) -> bool {
        let idx = self.ranges.partition_point(|&(s, _)| s <= pos);
        idx > 0 && pos < self.ranges[idx - 1].1
    }
}

/// Given `text[open]` == `{`, returns the index just past the matching `}`.
pub fn matching_brace(text: &str, open: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    debug_assert_eq!(bytes.get(open), Some(&b'{'));
    let mut depth = 0usize;
    let mut i = open;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                i += 2;
                continue;
            }
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
        i += 1;
    }
    None
}

/// Same as [`matching_brace`] for `[`/`]`, ignoring brackets nested in braces.
pub fn matching_bracket(text: &str, open: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut brace = 0usize;
    let mut i = open + 1;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                i += 2;
                continue;
            }
            b'{' => brace += 1,
            b'}' => brace = brace.saturating_sub(1),
            b']' if brace == 0 => return Some(i + 1),
            _ => {}
        }
        i += 1;
    }
    None
}

pub fn skip_ws(text: &str, mut pos: usize) -> usize {
    let bytes = text.as_bytes();
    while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
        pos += 1;
    }
    pos
}

/// Reads a `{...}` group starting at `pos` (after optional whitespace).
/// Returns (content, index past the group).
pub fn read_group(text: &str, pos: usize) -> Option<(&str, usize)> {
    let start = skip_ws(text, pos);
    if text.as_bytes().get(start) != Some(&b'{') {
        return None;
    }
    let end = matching_brace(text, start)?;
    Some((&text[start + 1..end - 1], end))
}

/// Reads an optional `[...]` argument; returns the position after it (or `pos`).
pub fn skip_optional(text: &str, pos: usize) -> usize {
    let start = skip_ws(text, pos);
    if text.as_bytes().get(start) == Some(&b'[') {
        if let Some(end) = matching_bracket(text, start) {
            return end;
        }
    }
    pos
}

/// A `\begin{name}` or `\end{name}` token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvToken {
    pub name: String,
    pub begin: bool,
    /// Offset of the backslash.
    pub start: usize,
    /// Offset just past the closing brace of the name.
    pub end: usize,
}

/// Every `\begin{..}`/`\end{..}` outside comments, in document order.
pub fn env_tokens(text: &str) -> Vec<EnvToken> {
    let mask = CommentMask::new(text);
    let mut out = Vec::new();
    for (marker, begin) in [("\\begin", true), ("\\end", false)] {
        let mut from = 0;
        while let Some(found) = text[from..].find(marker) {
            let start = from + found;
            from = start + marker.len();
            if mask.contains(start) || is_escaped(text, start) {
                continue;
            }
            let after = start + marker.len();
            // `\beginx` is a different macro.
            if text[after..].chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                continue;
            }
            if let Some((name, end)) = read_group(text, after) {
                out.push(EnvToken {
                    name: name.trim().to_string(),
                    begin,
                    start,
                    end,
                });
            }
        }
    }
    out.sort_by_key(|t| t.start);
    out
}

/// True when the backslash at `pos` is itself escaped (`\\begin` is a line break
/// followed by text, not a macro).
fn is_escaped(text: &str, pos: usize) -> bool {
    let bytes = text.as_bytes();
    let mut n = 0;
    let mut i = pos;
    while i > 0 && bytes[i - 1] == b'\\' {
        n += 1;
        i -= 1;
    }
    n % 2 == 1
}

/// Finds the token index of the `\end` matching the `\begin` at `tokens[open]`.
pub fn matching_end(tokens: &[EnvToken], open: usize) -> Option<usize> {
    let name = &tokens[open].name;
    let mut depth = 0usize;
    for (idx, tok) in tokens.iter().enumerate().skip(open) {
        if &tok.name != name {
            continue;
        }
        if tok.begin {
            depth += 1;
        } else {
            depth -= 1;
            if depth == 0 {
                return Some(idx);
            }
        }
    }
    None
}

/// Splits `text` on `sep` at brace depth 0 and outside nested environments.
/// `sep` is matched literally; escaped separators (`\&`) are skipped.
pub fn split_top_level<'a>(text: &'a str, sep: &str) -> Vec<&'a str> {
    let bytes = text.as_bytes();
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut env_depth = 0i32;
    let mut last = 0;
    let mut i = 0;
    while i < bytes.len() {
        // byte comparison: `i` may sit inside a multi-byte char after `\\x`
        if bytes[i..].starts_with(sep.as_bytes()) && depth == 0 && env_depth == 0 && !is_escaped(text, i) {
            parts.push(&text[last..i]);
            i += sep.len();
            last = i;
            continue;
        }
        match bytes[i] {
            b'\\' => {
                let rest = &bytes[i..];
                if rest.starts_with(b"\\begin{") {
                    env_depth += 1;
                } else if rest.starts_with(b"\\end{") {
                    env_depth -= 1;
                }
                // skip the escaped char so `\{` or `\\` never counts
                i += 2;
                continue;
            }
            b'{' => depth += 1,
            b'}' => depth -= 1,
            _ => {}
        }
        i += 1;
    }
    parts.push(&text[last..]);
    parts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaped_percent_is_not_a_comment() {
        assert_eq!(strip_comments("95.2\\% acc % note\nnext"), "95.2\\% acc \nnext");
        assert_eq!(strip_comments("a\\\\% comment\nb"), "a\\\\\nb");
    }

    #[test]
    fn env_tokens_skip_comments() {
        let t = "x\n% \\begin{table}\n\\begin{table*}y\\end{table*}";
        let toks = env_tokens(t);
        assert_eq!(toks.len(), 2);
        assert_eq!(toks[0].name, "table*");
        assert!(toks[0].begin);
        assert!(!toks[1].begin);
    }

    #[test]
    fn top_level_split_respects_groups() {
        let parts = split_top_level("a & \\multicolumn{2}{c}{x & y} & b \\& c", "&");
        assert_eq!(parts, vec!["a ", " \\multicolumn{2}{c}{x & y} ", " b \\& c"]);
    }

    #[test]
    fn non_ascii_cells_split_cleanly() {
        let parts = split_top_level("HD ↓ & \\↓ & x", "&");
        assert_eq!(parts, vec!["HD ↓ ", " \\↓ ", " x"]);
    }

    #[test]
    fn nested_environment_is_one_cell() {
        let parts = split_top_level("a & \\begin{tabular}{c}x & y\\end{tabular} & b", "&");
        assert_eq!(parts.len(), 3);
    }

    #[test]
    fn matching_brace_handles_escapes() {
        let t = "{a\\}b{c}}rest";
        assert_eq!(matching_brace(t, 0), Some(9));
    }
}
