use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::Hlmt;

fn mr_identifier() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // A whole token: delimited on both sides by text boundaries or
    // characters that are not ASCII letters/digits, so `mr2a` stays.
    RE.get_or_init(|| Regex::new(r"(^|[^a-z0-9])mr\s*[0-9]+($|[^a-z0-9])").expect("static regex"))
}

/// Deterministic slug for a scenario title: lower-case, MR identifiers
/// (`MR12`, `MR 12`) removed, every run of non-alphanumerics turned into a
/// single `_`, no leading or trailing `_`.
pub fn normalize_title(title: &str) -> String {
    let mut text = title.to_lowercase();
    loop {
        let next = mr_identifier().replace_all(&text, "${1}${2}").into_owned();
        if next == text {
            break;
        }
        text = next;
    }

    let mut slug = String::with_capacity(text.len());
    let mut pending_sep = false;
    for c in text.chars() {
        if c.is_ascii_lowercase() || c.is_ascii_digit() {
            if pending_sep && !slug.is_empty() {
                slug.push('_');
            }
            pending_sep = false;
            slug.push(c);
        } else {
            pending_sep = true;
        }
    }
    slug
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MemberRef {
    pub session_id: String,
    pub iteration: u32,
    pub hlmt_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticGroup {
    pub slug: String,
    pub members: Vec<MemberRef>,
}

/// Groups scenarios drawn from any number of sessions by slug. Groups come out
/// sorted by slug; members keep input order.
pub fn group_semantic_across<'a>(
    hlmts: impl IntoIterator<Item = (&'a str, &'a Hlmt)>,
) -> Vec<SemanticGroup> {
    let mut groups: BTreeMap<&str, Vec<MemberRef>> = BTreeMap::new();
    for (session_id, hlmt) in hlmts {
        groups
            .entry(hlmt.semantic_slug())
            .or_default()
            .push(MemberRef {
                session_id: session_id.to_string(),
                iteration: hlmt.iteration_index(),
                hlmt_id: hlmt.id().to_string(),
            });
    }
    groups
        .into_iter()
        .map(|(slug, members)| SemanticGroup {
            slug: slug.to_string(),
            members,
        })
        .collect()
}

/// Groups the scenarios of a single session.
pub fn group_semantic(session_id: &str, hlmts: &[Hlmt]) -> Vec<SemanticGroup> {
    group_semantic_across(hlmts.iter().map(|h| (session_id, h)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_title_gives_empty_slug() {
        assert_eq!(normalize_title(""), "");
        assert_eq!(normalize_title("  --- "), "");
    }

    #[test]
    fn mr_tokens_inside_words_are_kept() {
        assert_eq!(normalize_title("Summer 2 sale"), "summer_2_sale");
        assert_eq!(normalize_title("mr smith"), "mr_smith");
        assert_eq!(normalize_title("Check (MR7) twice"), "check_twice");
        assert_eq!(normalize_title("x_mr12 y"), "x_y");
    }

    #[test]
    fn non_ascii_letters_become_separators() {
        assert_eq!(normalize_title("Crème brûlée"), "cr_me_br_l_e");
    }

    #[test]
    fn groups_are_sorted_and_partition_input() {
        let a = Hlmt::new("MR1", "Beta MR1", "g", "w", "t");
        let b = Hlmt::new("MR2", "Alpha", "g", "w", "t");
        let c = Hlmt::new("MR3", "beta mr 3", "g", "w", "t");
        let groups = group_semantic("s", &[a, b, c]);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].slug, "alpha");
        assert_eq!(groups[1].slug, "beta");
        assert_eq!(groups[1].members.len(), 2);
        assert!(group_semantic("s", &[]).is_empty());
    }
}
