//! High-level metamorphic tests: the Given/When/Then scenario model, lenient
//! recovery of scenario lists from model output, and slug-based grouping.

mod hlmt;
pub mod lenient;
mod slug;

pub use hlmt::{parse_hlmt_list, validate_hlmt, Hlmt, HlmtRecord, ParsedHlmts};
pub use lenient::LenientError;
pub use slug::{group_semantic, group_semantic_across, normalize_title, MemberRef, SemanticGroup};
