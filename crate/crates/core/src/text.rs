//! String normalization shared by every comparison in the crate.

use unicode_normalization::UnicodeNormalization;

/// NFC-normalizes `s` and trims outer whitespace.
pub fn normalize(s: &str) -> String {
    s.trim().nfc().collect()
}

/// Case-folded form used by the containment filter.
pub fn fold_case(s: &str) -> String {
    normalize(s).to_lowercase()
}
