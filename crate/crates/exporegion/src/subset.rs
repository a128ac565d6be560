//! Bitmask representation of nonempty subsets of decision centers `{1..K}`.
//!
//! Center `k` (1-based) occupies bit `k-1`. Labels are digit strings such as
//! `"12"` for `{1,2}`, which keeps the JSON plan format and the sigma
//! variable names (`s_12`) readable; this limits `K` to 9, far beyond the
//! K <= 4 the region evaluators support.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubsetMask(u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    pub fn from_indices(indices: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &k in indices {
            if k == 0 || k > 9 {
                return Err(Error::IndexOutOfRange(format!(
                    "center index {k} outside 1..=9"
                )));
            }
            mask |= 1 << (k - 1);
        }
        Ok(SubsetMask(mask))
    }

    pub fn full(k: usize) -> Self {
        SubsetMask(((1u64 << k) - 1) as u32)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, k: usize) -> bool {
        k >= 1 && (self.0 >> (k - 1)) & 1 == 1
    }

    pub fn is_superset_of(self, other: SubsetMask) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn intersects(self, other: SubsetMask) -> bool {
        self.0 & other.0 != 0
    }

    pub fn insert(self, k: usize) -> Self {
        SubsetMask(self.0 | (1 << (k - 1)))
    }

    /// Largest center index in the subset (the paper's `l*_I`), 0 if empty.
    pub fn max_index(self) -> usize {
        if self.0 == 0 {
            0
        } else {
            32 - self.0.leading_zeros() as usize
        }
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Iterate over the 1-based center indices in the subset.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (1..=32usize).filter(move |k| (mask >> (k - 1)) & 1 == 1)
    }

    /// All nonempty subsets of `{1..K}`, ascending by mask value.
    pub fn nonempty_subsets(k: usize) -> impl Iterator<Item = SubsetMask> {
        (1u32..(1u32 << k)).map(SubsetMask)
    }

    /// All subsets of `{1..K}` including the empty one.
    pub fn all_subsets(k: usize) -> impl Iterator<Item = SubsetMask> {
        (0u32..(1u32 << k)).map(SubsetMask)
    }

    /// Digit-string label, e.g. `{1,3}` -> `"13"`. Empty subset -> `"0"`.
    pub fn label(self) -> String {
        if self.0 == 0 {
            return "0".to_string();
        }
        self.indices().map(|k| k.to_string()).collect()
    }

    /// Parse a digit-string label such as `"12"`.
    pub fn parse_label(s: &str) -> Result<Self> {
        if s == "0" {
            return Ok(SubsetMask::EMPTY);
        }
        let mut mask = SubsetMask::EMPTY;
        for ch in s.chars() {
            let d = ch
                .to_digit(10)
                .filter(|&d| d >= 1)
                .ok_or_else(|| Error::SpecError(format!("bad subset label `{s}`")))?;
            mask = mask.insert(d as usize);
        }
        Ok(mask)
    }
}

impl std::fmt::Display for SubsetMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{{{}}}",
            self.indices()
                .map(|k| k.to_string())
                .collect::<Vec<_>>()
                .join(",")
        )
    }
}

impl serde::Serialize for SubsetMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> serde::Deserialize<'de> for SubsetMask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        SubsetMask::parse_label(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_round_trip_labels() {
        for k in 1..=4 {
            for s in SubsetMask::nonempty_subsets(k) {
                assert_eq!(SubsetMask::parse_label(&s.label()).unwrap(), s);
            }
        }
    }

    #[test]
    fn max_index_is_largest_member() {
        let s = SubsetMask::from_indices(&[1, 3]).unwrap();
        assert_eq!(s.max_index(), 3);
        assert!(s.contains(1) && !s.contains(2) && s.contains(3));
        assert_eq!(SubsetMask::EMPTY.max_index(), 0);
    }

    #[test]
    fn subset_count_is_two_pow_k_minus_one() {
        assert_eq!(SubsetMask::nonempty_subsets(3).count(), 7);
        assert_eq!(
            SubsetMask::full(3),
            SubsetMask::from_indices(&[1, 2, 3]).unwrap()
        );
    }
}
