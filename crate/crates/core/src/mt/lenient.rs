//! Recovery of JSON values from loosely formatted model output.
//!
//! The repair pipeline always runs in the same order: strip code fences,
//! extract the outermost bracketed value, repair quoting (single-quoted
//! strings, bare keys), map Python literals, drop trailing commas. The result
//! must then pass a strict JSON parse.

use serde_json::Value;
use thiserror::Error;

/// Candidate start positions tried before giving up.
const MAX_CANDIDATES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LenientError {
    #[error("no JSON array could be recovered: {0}")]
    NoArrayFound(String),
    #[error("no JSON object could be recovered: {0}")]
    NoObjectFound(String),
}

/// Recovers the first JSON array embedded in `raw`.
pub fn recover_array(raw: &str) -> Result<Value, LenientError> {
    recover(raw, '[', ']').map_err(LenientError::NoArrayFound)
}

/// Recovers the first JSON object embedded in `raw`.
pub fn recover_object(raw: &str) -> Result<Value, LenientError> {
    recover(raw, '{', '}').map_err(LenientError::NoObjectFound)
}

fn recover(raw: &str, open: char, close: char) -> Result<Value, String> {
    let body = strip_fences(raw, open);
    let starts: Vec<usize> = body
        .char_indices()
        .filter(|&(_, c)| c == open)
        .map(|(i, _)| i)
        .take(MAX_CANDIDATES)
        .collect();
    if starts.is_empty() {
        return Err(format!("no '{open}' in input"));
    }
    let mut last_err = String::new();
    for start in starts {
        let Some(candidate) = extract_balanced(&body[start..], close) else {
            last_err = format!("unbalanced '{open}' at offset {start}");
            continue;
        };
        let repaired = repair(candidate);
        match serde_json::from_str::<Value>(&repaired) {
            Ok(v) => return Ok(v),
            Err(e) => last_err = e.to_string(),
        }
    }
    Err(last_err)
}

/// Applies the textual repairs to an already extracted candidate.
pub fn repair(candidate: &str) -> String {
    let quoted = repair_quotes(candidate);
    let literals = map_python_literals(&quoted);
    remove_trailing_commas(&literals)
}

/// Returns the contents of the first fenced block that contains `open`, or
/// the whole input when there is no such block.
fn strip_fences(raw: &str, open: char) -> &str {
    let mut rest = raw;
    while let Some(fence) = rest.find("```") {
        let after = &rest[fence + 3..];
        // Skip the info string (`json`, `python`, ...).
        let content_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
        let content = &after[content_start..];
        let (block, next) = match content.find("```") {
            Some(end) => (&content[..end], &content[end + 3..]),
            None => (content, ""),
        };
        if block.contains(open) {
            return block;
        }
        rest = next;
    }
    raw
}

/// Whether a `'` at `bytes[i]` closes a single-quoted string: only when the
/// next non-blank character could follow a JSON value.
fn closes_single_quote(s: &str, i: usize) -> bool {
    match s[i + 1..].trim_start().chars().next() {
        None => true,
        Some(c) => matches!(c, ',' | ':' | ']' | '}'),
    }
}

/// Finds the slice from the opening bracket at `s[0]` to its matching `close`, respecting
/// both quoting styles.
fn extract_balanced(s: &str, close: char) -> Option<&str> {
    let mut depth = 0usize;
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if let Some(q) = quote {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q && (q == '"' || closes_single_quote(s, i)) {
                quote = None;
            }
            continue;
        }
        match c {
            '"' | '\'' => quote = Some(c),
            '[' | '{' => depth += 1,
            ']' | '}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return (c == close).then(|| &s[..=i]);
                }
            }
            _ => {}
        }
    }
    // Unterminated: fall back to the last closing bracket, if any.
    s.rfind(close).map(|end| &s[..=end])
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || c == '$'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '$' || c == '-'
}

/// Rewrites single-quoted strings as JSON strings and quotes bare object keys.
fn repair_quotes(s: &str) -> String {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut out = String::with_capacity(s.len() + 16);
    let mut last_significant: Option<char> = None;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        match c {
            '"' => {
                out.push('"');
                i += 1;
                while i < chars.len() {
                    let (_, c) = chars[i];
                    if c == '\\' && i + 1 < chars.len() {
                        let next = chars[i + 1].1;
                        // `\'` is not a JSON escape.
                        if next == '\'' {
                            out.push('\'');
                        } else {
                            out.push('\\');
                            out.push(next);
                        }
                        i += 2;
                        continue;
                    }
                    out.push(c);
                    i += 1;
                    if c == '"' {
                        break;
                    }
                }
                last_significant = Some('"');
            }
            '\'' => {
                out.push('"');
                i += 1;
                while i < chars.len() {
                    let (p, c) = chars[i];
                    if c == '\\' && i + 1 < chars.len() {
                        let next = chars[i + 1].1;
                        if next == '\'' {
                            out.push('\'');
                        } else {
                            out.push('\\');
                            out.push(next);
                        }
                        i += 2;
                        continue;
                    }
                    i += 1;
                    if c == '\'' && closes_single_quote(s, p) {
                        break;
                    }
                    if c == '"' {
                        out.push('\\');
                    }
                    out.push(c);
                }
                out.push('"');
                last_significant = Some('"');
            }
            c if is_ident_start(c) => {
                let start = pos;
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j].1) {
                    j += 1;
                }
                let end = chars.get(j).map(|&(p, _)| p).unwrap_or(s.len());
                let word = &s[start..end];
                let is_key = matches!(last_significant, Some('{') | Some(','))
                    && s[end..].trim_start().starts_with(':');
                if is_key {
                    out.push('"');
                    out.push_str(word);
                    out.push('"');
                } else {
                    out.push_str(word);
                }
                last_significant = Some('a');
                i = j;
            }
            c => {
                out.push(c);
                if !c.is_whitespace() {
                    last_significant = Some(c);
                }
                i += 1;
            }
        }
    }
    out
}

/// Calls `f` for every maximal run of text outside double-quoted strings and
/// copies string literals through unchanged.
fn map_outside_strings(s: &str, mut f: impl FnMut(&str, &mut String)) -> String {
    let mut out = String::with_capacity(s.len());
    let mut segment_start = 0;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
                out.push_str(&s[segment_start..=i]);
                segment_start = i + 1;
            }
        } else if c == '"' {
            f(&s[segment_start..i], &mut out);
            in_string = true;
            segment_start = i;
        }
    }
    if in_string {
        out.push_str(&s[segment_start..]);
    } else {
        f(&s[segment_start..], &mut out);
    }
    out
}

fn map_python_literals(s: &str) -> String {
    map_outside_strings(s, |segment, out| {
        let mut rest = segment;
        while !rest.is_empty() {
            let word_end = rest
                .char_indices()
                .find(|&(_, c)| !is_ident_char(c))
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            if word_end == 0 {
                let c = rest.chars().next().unwrap_or_default();
                out.push(c);
                rest = &rest[c.len_utf8()..];
                continue;
            }
            let word = &rest[..word_end];
            out.push_str(match word {
                "True" => "true",
                "False" => "false",
                "None" => "null",
                other => other,
            });
            rest = &rest[word_end..];
        }
    })
}

fn remove_trailing_commas(s: &str) -> String {
    // The lookahead has to see past string boundaries, so this works on the
    // whole text while tracking string state itself.
    let mut out = String::with_capacity(s.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        if in_string {
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_string = false;
            }
            out.push(c);
            continue;
        }
        match c {
            '"' => {
                in_string = true;
                out.push(c);
            }
            ',' if matches!(s[i + 1..].trim_start().chars().next(), Some(']') | Some('}')) => {}
            c => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn strict_json_passes_through() {
        assert_eq!(recover_array(r#"[1, "a", {"b": null}]"#).unwrap(), json!([1, "a", {"b": null}]));
    }

    #[test]
    fn prose_and_fences_are_stripped() {
        let raw = "Here's what I found:\n```json\n[{\"id\": \"MR1\"}]\n```\nHope it helps [sic].";
        assert_eq!(recover_array(raw).unwrap(), json!([{"id": "MR1"}]));
    }

    #[test]
    fn single_quotes_with_apostrophes() {
        let raw = "[{'scenario': 'the pet's status', 'n': 1}]";
        assert_eq!(recover_array(raw).unwrap(), json!([{"scenario": "the pet's status", "n": 1}]));
        let raw = r#"[{'q': 'say "hi"', 'e': 'it\'s'}]"#;
        assert_eq!(recover_array(raw).unwrap(), json!([{"q": "say \"hi\"", "e": "it's"}]));
    }

    #[test]
    fn bare_keys_literals_and_trailing_commas() {
        let raw = "[{id: 'MR1', ok: True, gone: None, off: False,},]";
        assert_eq!(
            recover_array(raw).unwrap(),
            json!([{"id": "MR1", "ok": true, "gone": null, "off": false}])
        );
    }

    #[test]
    fn literals_inside_strings_are_untouched() {
        let raw = r#"["True story", "None, really,]"]"#;
        assert_eq!(recover_array(raw).unwrap(), json!(["True story", "None, really,]"]));
    }

    #[test]
    fn prose_without_array_is_rejected() {
        assert!(matches!(
            recover_array("I could not generate relations."),
            Err(LenientError::NoArrayFound(_))
        ));
        assert!(matches!(recover_array("[[[ nope"), Err(LenientError::NoArrayFound(_))));
    }

    #[test]
    fn objects_are_recovered_too() {
        let raw = "Sure!\n```\n{'a': [1, 2,], b: True}\n```";
        assert_eq!(recover_object(raw).unwrap(), json!({"a": [1, 2], "b": true}));
    }
}
