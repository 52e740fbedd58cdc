//! Code-point offset helpers.
//!
//! Every character offset in this toolkit (annotation spans, element
//! extents, token spans) counts Unicode code points, not bytes. These
//! helpers convert between the two views of a `&str`.

/// Number of code points in `s`.
pub fn cp_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte index of code point `cp` in `s`; `s.len()` when `cp` equals the
/// code-point length. `None` when `cp` is past the end.
pub fn byte_of_cp(s: &str, cp: usize) -> Option<usize> {
    let mut seen = 0usize;
    for (b, _) in s.char_indices() {
        if seen == cp {
            return Some(b);
        }
        seen += 1;
    }
    (cp == seen).then_some(s.len())
}

/// Slice `s` by the half-open code-point range `[start, end)`.
pub fn cp_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = byte_of_cp(s, start)?;
    let b1 = byte_of_cp(s, end)?;
    Some(&s[b0..b1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_matches_bytes() {
        let s = "severe headache";
        assert_eq!(cp_len(s), 15);
        assert_eq!(cp_slice(s, 0, 6), Some("severe"));
        assert_eq!(cp_slice(s, 7, 15), Some("headache"));
    }

    #[test]
    fn multibyte_counts_code_points() {
        let s = "naïve † test";
        assert_eq!(cp_len(s), 12);
        assert_eq!(cp_slice(s, 0, 5), Some("naïve"));
        assert_eq!(cp_slice(s, 6, 7), Some("†"));
        assert_eq!(cp_slice(s, 8, 12), Some("test"));
    }

    #[test]
    fn out_of_range_is_none() {
        assert_eq!(cp_slice("abc", 1, 9), None);
        assert_eq!(cp_slice("abc", 3, 3), Some(""));
    }
}
