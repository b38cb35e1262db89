use std::collections::BTreeMap;

use super::{HttpMethod, Operation, SpecError};

/// How strongly a template segment pins the concrete segment it matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Rank {
    Placeholder,
    Mixed,
    Literal,
}

fn split_segments(path: &str) -> Vec<&str> {
    let trimmed = path.strip_prefix('/').unwrap_or(path);
    let trimmed = if trimmed.len() > 1 {
        trimmed.strip_suffix('/').unwrap_or(trimmed)
    } else {
        trimmed
    };
    if trimmed.is_empty() {
        Vec::new()
    } else {
        trimmed.split('/').collect()
    }
}

/// Drops any `?query` or `#fragment` suffix.
pub fn strip_query(path: &str) -> &str {
    let end = path.find(['?', '#']).unwrap_or(path.len());
    &path[..end]
}

fn match_segment(template: &str, concrete: &str) -> Option<Rank> {
    if concrete.is_empty() {
        return (template.is_empty()).then_some(Rank::Literal);
    }
    let Some(open) = template.find('{') else {
        return (template == concrete).then_some(Rank::Literal);
    };
    let close = template.rfind('}')?;
    if open == 0 && close == template.len() - 1 && template[1..close].find(['{', '}']).is_none() {
        return Some(Rank::Placeholder);
    }
    // Segments such as `{name}.json`: the literal prefix and suffix must match
    // and at least one character must remain for the placeholder part.
    let prefix = &template[..open];
    let suffix = &template[close + 1..];
    let ok = concrete.len() > prefix.len() + suffix.len()
        && concrete.starts_with(prefix)
        && concrete.ends_with(suffix);
    ok.then_some(Rank::Mixed)
}

fn match_template(template: &str, concrete: &[&str]) -> Option<Vec<Rank>> {
    let segments = split_segments(template);
    if segments.len() != concrete.len() {
        return None;
    }
    segments
        .iter()
        .zip(concrete)
        .map(|(t, c)| match_segment(t, c))
        .collect()
}

pub(super) fn resolve<'a>(
    operations: &'a [Operation],
    method: HttpMethod,
    concrete_path: &str,
) -> Result<Option<&'a Operation>, SpecError> {
    let path = strip_query(concrete_path);
    let concrete = split_segments(path);
    let mut matches: Vec<(Vec<Rank>, &Operation)> = operations
        .iter()
        .filter(|op| op.http_method == method)
        .filter_map(|op| match_template(&op.path_template, &concrete).map(|r| (r, op)))
        .collect();
    matches.sort_by(|a, b| b.0.cmp(&a.0));
    match matches.as_slice() {
        [] => Ok(None),
        [(_, only)] => Ok(Some(only)),
        [(best, op), (second, other), ..] => {
            if best == second {
                Err(SpecError::AmbiguousMatch {
                    method: method.to_string(),
                    path: path.to_string(),
                    candidates: vec![op.path_template.clone(), other.path_template.clone()],
                })
            } else {
                Ok(Some(op))
            }
        }
    }
}

/// Names of the `{param}` placeholders in a template, in order.
pub fn placeholders(template: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(len) = rest[open..].find('}') else {
            break;
        };
        out.push(rest[open + 1..open + len].to_string());
        rest = &rest[open + len + 1..];
    }
    out
}

fn encode_segment(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for b in value.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~') {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

/// Substitutes every placeholder with its percent-encoded argument. Returns the
/// name of the first placeholder without an argument on failure.
pub fn fill_template(template: &str, args: &BTreeMap<String, String>) -> Result<String, String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let Some(len) = rest[open..].find('}') else {
            break;
        };
        let name = &rest[open + 1..open + len];
        let value = args.get(name).ok_or_else(|| name.to_string())?;
        out.push_str(&rest[..open]);
        out.push_str(&encode_segment(value));
        rest = &rest[open + len + 1..];
    }
    out.push_str(rest);
    Ok(out)
}
