//! Best-effort removal of LaTeX markup from short snippets (cells, captions).

use super::scan::{matching_brace, matching_bracket, skip_ws};

/// Macros replaced by a literal glyph.
const SYMBOLS: &[(&str, &str)] = &[
    ("uparrow", "↑"),
    ("downarrow", "↓"),
    ("Uparrow", "⇑"),
    ("Downarrow", "⇓"),
    ("rightarrow", "→"),
    ("leftarrow", "←"),
    ("to", "→"),
    ("pm", "±"),
    ("mp", "∓"),
    ("times", "×"),
    ("cdot", "·"),
    ("approx", "≈"),
    ("sim", "∼"),
    ("textasciitilde", "∼"),
    ("leq", "≤"),
    ("le", "≤"),
    ("geq", "≥"),
    ("ge", "≥"),
    ("neq", "≠"),
    ("infty", "∞"),
    ("dagger", "†"),
    ("ddagger", "‡"),
    ("star", "⋆"),
    ("ast", "*"),
    ("checkmark", "✓"),
    ("cmark", "✓"),
    ("xmark", "✗"),
    ("circ", "∘"),
    ("degree", "°"),
    ("textdegree", "°"),
    ("ldots", "…"),
    ("dots", "…"),
    ("cdots", "⋯"),
    ("textendash", "–"),
    ("textemdash", "—"),
    ("textunderscore", "_"),
    ("textbar", "|"),
    ("textless", "<"),
    ("textgreater", ">"),
    ("alpha", "α"),
    ("beta", "β"),
    ("gamma", "γ"),
    ("delta", "δ"),
    ("Delta", "Δ"),
    ("epsilon", "ε"),
    ("theta", "θ"),
    ("lambda", "λ"),
    ("mu", "μ"),
    ("rho", "ρ"),
    ("sigma", "σ"),
    ("tau", "τ"),
    ("newline", " "),
    ("linebreak", " "),
    ("quad", " "),
    ("qquad", " "),
];

/// Macros whose mandatory arguments are discarded entirely.
const DROP_ARGS: &[(&str, usize)] = &[
    ("cite", 1),
    ("citep", 1),
    ("citet", 1),
    ("citealp", 1),
    ("citeauthor", 1),
    ("citeyear", 1),
    ("ref", 1),
    ("eqref", 1),
    ("autoref", 1),
    ("cref", 1),
    ("Cref", 1),
    ("label", 1),
    ("footnote", 1),
    ("tnote", 1),
    ("hspace", 1),
    ("vspace", 1),
    ("includegraphics", 1),
    ("cellcolor", 1),
    ("rowcolor", 1),
    ("color", 1),
    ("arrayrulecolor", 1),
    ("cline", 1),
    ("cmidrule", 1),
    ("rule", 2),
    ("specialrule", 3),
    ("setlength", 2),
    ("renewcommand", 2),
];

/// Macros that render only their last mandatory argument.
const KEEP_LAST: &[(&str, usize)] = &[
    ("textcolor", 2),
    ("colorbox", 2),
    ("href", 2),
    ("multicolumn", 3),
    ("multirow", 3),
    ("resizebox", 3),
    ("scalebox", 2),
];

/// Strips markup from a cell or caption: formatting wrappers keep their
/// argument, citations and references vanish, math delimiters go while their
/// content stays, escaped specials resolve and whitespace collapses.
///
/// The result is a fixpoint, so applying it twice changes nothing.
pub fn strip_latex_markup(text: &str) -> String {
    let mut current = one_pass(text);
    for _ in 0..16 {
        let next = one_pass(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn one_pass(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    render(text, &mut out);
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn render(text: &str, out: &mut String) {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < text.len() {
        let c = text[i..].chars().next().expect("in bounds");
        match c {
            '\\' => i = render_macro(text, i, out),
            '{' | '}' | '$' => i += 1,
            '~' => {
                out.push(' ');
                i += 1;
            }
            '_' | '^' if bytes.get(i + 1) == Some(&b'{') => i += 1,
            _ => {
                out.push(c);
                i += c.len_utf8();
            }
        }
    }
}

/// Renders the control sequence at `text[start]` (a backslash); returns the
/// position after everything it consumed.
fn render_macro(text: &str, start: usize, out: &mut String) -> usize {
    let rest = &text[start + 1..];
    let Some(next) = rest.chars().next() else {
        return start + 1;
    };
    if !next.is_ascii_alphabetic() {
        let after = start + 1 + next.len_utf8();
        match next {
            '%' | '&' | '#' | '_' | '$' => out.push(next),
            '\\' | ',' | ';' | ':' | ' ' | '!' => out.push(' '),
            _ => {}
        }
        return after;
    }
    let name_len = rest.bytes().take_while(|b| b.is_ascii_alphabetic()).count();
    let name = &rest[..name_len];
    let mut pos = start + 1 + name_len;
    if text.as_bytes().get(pos) == Some(&b'*') {
        pos += 1;
    }

    if let Some((_, glyph)) = SYMBOLS.iter().find(|(n, _)| *n == name) {
        out.push_str(glyph);
        // TeX swallows spaces after a control word
        return if glyph.trim().is_empty() {
            pos
        } else {
            skip_ws(text, pos)
        };
    }
    if let Some(&(_, n)) = DROP_ARGS.iter().find(|(m, _)| *m == name) {
        pos = skip_optionals(text, pos);
        for _ in 0..n {
            match group_end(text, pos) {
                Some((_, end)) => pos = skip_optionals(text, end),
                None => break,
            }
        }
        return pos;
    }
    if let Some(&(_, n)) = KEEP_LAST.iter().find(|(m, _)| *m == name) {
        pos = skip_optionals(text, pos);
        let mut last = None;
        for _ in 0..n {
            match group_end(text, pos) {
                Some((inner, end)) => {
                    last = Some(inner);
                    pos = skip_optionals(text, end);
                }
                None => break,
            }
        }
        if let Some((s, e)) = last {
            render(&text[s..e], out);
        }
        return pos;
    }
    if name == "frac" {
        pos = skip_optionals(text, pos);
        if let Some((num, end)) = group_end(text, pos) {
            if let Some((den, end2)) = group_end(text, end) {
                render(&text[num.0..num.1], out);
                out.push('/');
                render(&text[den.0..den.1], out);
                return end2;
            }
        }
        return pos;
    }
    if name == "begin" || name == "end" {
        let Some(((s, e), mut end)) = group_end(text, pos) else {
            return pos;
        };
        if name == "begin" {
            // column spec (and width) of tabular-like environments
            let env = &text[s..e];
            let nargs = match env {
                "tabular" | "array" => 1,
                "tabular*" | "tabularx" | "tabulary" => 2,
                _ => 0,
            };
            end = skip_optionals(text, end);
            for _ in 0..nargs {
                match group_end(text, end) {
                    Some((_, after)) => end = skip_optionals(text, after),
                    None => break,
                }
            }
        }
        out.push(' ');
        return end;
    }
    if name == "makecell" || name == "shortstack" {
        return skip_optionals(text, pos);
    }
    // Unknown or formatting macro: drop the name, its argument text is
    // rendered by the caller's loop. Keep a word boundary.
    if text[pos..].starts_with(' ') && !out.ends_with(' ') && !out.is_empty() {
        out.push(' ');
    }
    pos
}

/// Skips `[..]` and `(..)` optional arguments.
fn skip_optionals(text: &str, mut pos: usize) -> usize {
    loop {
        let p = skip_ws(text, pos);
        match text.as_bytes().get(p) {
            Some(b'[') => match matching_bracket(text, p) {
                Some(end) => pos = end,
                None => return pos,
            },
            Some(b'(') => match text[p..].find(')') {
                Some(n) if !text[p..p + n].contains('{') => pos = p + n + 1,
                _ => return pos,
            },
            _ => return pos,
        }
    }
}

/// Returns ((inner_start, inner_end), end) for a `{..}` group at `pos`, or a
/// single bare token (`\multicolumn2c{x}` style).
fn group_end(text: &str, pos: usize) -> Option<((usize, usize), usize)> {
    let p = skip_ws(text, pos);
    let bytes = text.as_bytes();
    match bytes.get(p)? {
        b'{' => {
            let end = matching_brace(text, p)?;
            Some(((p + 1, end - 1), end))
        }
        b'}' | b'&' => None,
        b'\\' => {
            let len = text[p + 1..]
                .bytes()
                .take_while(|b| b.is_ascii_alphabetic())
                .count()
                .max(1);
            Some(((p, p + 1 + len), p + 1 + len))
        }
        _ => {
            let c = text[p..].chars().next()?;
            Some(((p, p + c.len_utf8()), p + c.len_utf8()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bold_number() {
        assert_eq!(strip_latex_markup("\\textbf{0.9383}"), "0.9383");
    }

    #[test]
    fn escaped_percent() {
        assert_eq!(strip_latex_markup("95.2\\%"), "95.2%");
    }

    #[test]
    fn underline_with_math_arrow() {
        assert_eq!(strip_latex_markup("\\underline{0.9376}$\\uparrow$"), "0.9376↑");
    }

    #[test]
    fn citations_vanish() {
        assert_eq!(strip_latex_markup("BERT~\\cite{devlin2019}"), "BERT");
        assert_eq!(strip_latex_markup("see Table~\\ref{tab:x}."), "see Table .");
    }

    #[test]
    fn colours_and_multicolumn() {
        assert_eq!(strip_latex_markup("\\cellcolor{cyan!10}{Method}"), "Method");
        assert_eq!(
            strip_latex_markup("\\multicolumn{2}{c}{\\textbf{KonIQ-10K}}"),
            "KonIQ-10K"
        );
        assert_eq!(strip_latex_markup("\\textcolor{red}{\\scriptsize{(+6.49)}}"), "(+6.49)");
    }

    #[test]
    fn subscripted_spread() {
        assert_eq!(strip_latex_markup("$76.57_{\\pm 11.65}$"), "76.57±11.65");
        assert_eq!(strip_latex_markup("Speed$_{/s}$"), "Speed/s");
    }

    #[test]
    fn makecell_line_breaks() {
        assert_eq!(strip_latex_markup("\\makecell[c]{Model\\\\Size}"), "Model Size");
    }

    #[test]
    fn unknown_macros_keep_argument_text() {
        assert_eq!(strip_latex_markup("\\mymacro{kept} text"), "kept text");
        assert_eq!(strip_latex_markup("{\\bf 12.3}"), "12.3");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]
        #[test]
        fn idempotent(s in "[a-z0-9 {}$%&_^~\\\\.]{0,40}") {
            let once = strip_latex_markup(&s);
            prop_assert_eq!(strip_latex_markup(&once), once);
        }

        #[test]
        fn idempotent_on_macro_soup(parts in proptest::collection::vec(
            prop_oneof![
                Just("\\textbf{".to_string()), Just("}".to_string()), Just("$".to_string()),
                Just("\\%".to_string()), Just("\\uparrow".to_string()), Just("\\cite{k}".to_string()),
                Just("\\{".to_string()), Just("\\$".to_string()), Just("_{".to_string()),
                Just("~".to_string()), Just("\\\\".to_string()), "[a-z0-9.]{1,4}",
            ], 0..12)) {
            let s: String = parts.concat();
            let once = strip_latex_markup(&s);
            prop_assert_eq!(strip_latex_markup(&once), once);
        }
    }
}
