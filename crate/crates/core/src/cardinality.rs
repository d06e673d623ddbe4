//! Cardinalities: non-empty sets of natural numbers, kept as a normalized
//! union of inclusive ranges.
//!
//! The textual form follows the usual class-diagram shorthands: `1`, `0..1`,
//! `1..*`, `*`. Comma-separated unions such as `0,2..3` are also accepted.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// An inclusive range `low..=high`; `high == None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CardRange {
    pub low: u32,
    pub high: Option<u32>,
}

impl CardRange {
    fn contains(&self, n: u64) -> bool {
        n >= u64::from(self.low) && self.high.is_none_or(|h| n <= u64::from(h))
    }

    /// Upper end as `u64`, with unbounded mapped to `u64::MAX`.
    fn end(&self) -> u64 {
        self.high.map_or(u64::MAX, u64::from)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CardinalityError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("bound at position {position} does not fit in 32 bits")]
    Overflow { position: usize },
    #[error("inverted range {low}..{high} at position {position}")]
    Inverted { position: usize, low: u32, high: u32 },
    #[error("cardinality denotes the empty set")]
    Empty,
}

/// A non-empty set of admissible counts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cardinality {
    ranges: Vec<CardRange>,
}

impl Cardinality {
    /// Builds a cardinality from arbitrary ranges, normalizing them.
    pub fn from_ranges<I>(ranges: I) -> Result<Self, CardinalityError>
    where
        I: IntoIterator<Item = CardRange>,
    {
        let mut ranges: Vec<CardRange> = ranges
            .into_iter()
            .filter(|r| r.high.is_none_or(|h| h >= r.low))
            .collect();
        if ranges.is_empty() {
            return Err(CardinalityError::Empty);
        }
        ranges.sort();
        let mut merged: Vec<CardRange> = Vec::with_capacity(ranges.len());
        for r in ranges {
            match merged.last_mut() {
                // Overlapping or adjacent ranges collapse into one.
                Some(last) if last.end() == u64::MAX || u64::from(r.low) <= last.end() + 1 => {
                    if r.end() > last.end() {
                        last.high = r.high;
                    }
                }
                _ => merged.push(r),
            }
        }
        Ok(Self { ranges: merged })
    }

    pub fn exactly(n: u32) -> Self {
        Self::between(n, n)
    }

    /// `low..high`; panics if `low > high`.
    pub fn between(low: u32, high: u32) -> Self {
        assert!(low <= high, "inverted cardinality range {low}..{high}");
        Self {
            ranges: vec![CardRange {
                low,
                high: Some(high),
            }],
        }
    }

    pub fn at_least(low: u32) -> Self {
        Self {
            ranges: vec![CardRange { low, high: None }],
        }
    }

    /// `*`, i.e. every natural number.
    pub fn any() -> Self {
        Self::at_least(0)
    }

    pub fn ranges(&self) -> &[CardRange] {
        &self.ranges
    }

    pub fn is_any(&self) -> bool {
        self.ranges == [CardRange { low: 0, high: None }]
    }

    pub fn contains(&self, n: u64) -> bool {
        self.ranges.iter().any(|r| r.contains(n))
    }

    pub fn lower_bound(&self) -> u32 {
        self.ranges[0].low
    }

    /// Largest member, `None` if unbounded.
    pub fn upper_bound(&self) -> Option<u32> {
        self.ranges.last().and_then(|r| r.high)
    }

    /// Largest finite bound mentioned in the description. Membership is
    /// constant for all `n` strictly above it.
    pub fn largest_bound(&self) -> u32 {
        let last = self.ranges.last().expect("non-empty");
        last.high.unwrap_or(last.low)
    }

    pub fn is_subset_of(&self, other: &Cardinality) -> bool {
        // `other` is normalized, so a contiguous range of `self` must fit
        // inside a single range of `other`.
        self.ranges.iter().all(|r| {
            other
                .ranges
                .iter()
                .any(|o| o.low <= r.low && r.end() <= o.end())
        })
    }
}

impl Default for Cardinality {
    fn default() -> Self {
        Self::any()
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, r) in self.ranges.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match (r.low, r.high) {
                (0, None) => f.write_str("*")?,
                (low, None) => write!(f, "{low}..*")?,
                (low, Some(high)) if low == high => write!(f, "{low}")?,
                (low, Some(high)) => write!(f, "{low}..{high}")?,
            }
        }
        Ok(())
    }
}

impl FromStr for Cardinality {
    type Err = CardinalityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_cardinality(s)
    }
}

struct Cursor<'a> {
    text: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.text.get(self.pos).is_some_and(u8::is_ascii_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.text.get(self.pos).copied()
    }

    fn eat(&mut self, token: &[u8]) -> bool {
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn syntax(&self, message: impl Into<String>) -> CardinalityError {
        CardinalityError::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn number(&mut self) -> Result<u32, CardinalityError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.syntax("expected a non-negative integer"));
        }
        let digits = std::str::from_utf8(&self.text[start..self.pos]).expect("ascii digits");
        digits
            .parse::<u32>()
            .map_err(|_| CardinalityError::Overflow { position: start })
    }

    fn item(&mut self) -> Result<CardRange, CardinalityError> {
        self.skip_ws();
        if self.eat(b"*") {
            return Ok(CardRange { low: 0, high: None });
        }
        let start = self.pos;
        let low = self.number()?;
        self.skip_ws();
        if !self.eat(b"..") {
            return Ok(CardRange {
                low,
                high: Some(low),
            });
        }
        self.skip_ws();
        if self.eat(b"*") {
            return Ok(CardRange { low, high: None });
        }
        let high = self.number()?;
        if high < low {
            return Err(CardinalityError::Inverted {
                position: start,
                low,
                high,
            });
        }
        Ok(CardRange {
            low,
            high: Some(high),
        })
    }
}

/// Parses `N | N..M | N..* | *`, optionally joined by commas.
pub fn parse_cardinality(text: &str) -> Result<Cardinality, CardinalityError> {
    let mut cursor = Cursor {
        text: text.as_bytes(),
        pos: 0,
    };
    let mut ranges = vec![cursor.item()?];
    loop {
        cursor.skip_ws();
        match cursor.peek() {
            None => break,
            Some(b',') => {
                cursor.pos += 1;
                ranges.push(cursor.item()?);
            }
            Some(_) => return Err(cursor.syntax("unexpected character")),
        }
    }
    Cardinality::from_ranges(ranges)
}

impl Serialize for Cardinality {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Cardinality {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn card(s: &str) -> Cardinality {
        s.parse().unwrap()
    }

    #[test]
    fn shorthands() {
        assert_eq!(card("1"), Cardinality::exactly(1));
        assert_eq!(card("1..*"), Cardinality::at_least(1));
        assert_eq!(card("0..1"), Cardinality::between(0, 1));
        assert_eq!(card("*"), Cardinality::any());
        assert_eq!(card("1..5"), Cardinality::between(1, 5));
    }

    #[test]
    fn membership() {
        assert!(card("1").contains(1));
        assert!(!card("0..1").contains(2));
        assert!(!card("1..*").contains(0));
        assert!(card("1..*").contains(u64::MAX));
        assert!(card("0,3..4").contains(3));
        assert!(!card("0,3..4").contains(2));
    }

    #[test]
    fn unions_normalize() {
        assert_eq!(card("3..4, 0..1, 2"), Cardinality::between(0, 4));
        assert_eq!(card("5..*,0..6"), Cardinality::any());
        assert_eq!(card("0,2").to_string(), "0,2");
        assert_eq!(card("0..*").to_string(), "*");
    }

    #[test]
    fn errors_carry_positions() {
        assert_eq!(
            parse_cardinality("1..x"),
            Err(CardinalityError::Syntax {
                position: 3,
                message: "expected a non-negative integer".into()
            })
        );
        assert!(matches!(
            parse_cardinality(""),
            Err(CardinalityError::Syntax { position: 0, .. })
        ));
        assert!(matches!(
            parse_cardinality("1 2"),
            Err(CardinalityError::Syntax { position: 2, .. })
        ));
        assert_eq!(
            parse_cardinality("3..1"),
            Err(CardinalityError::Inverted {
                position: 0,
                low: 3,
                high: 1
            })
        );
        assert_eq!(
            parse_cardinality("0..4294967296"),
            Err(CardinalityError::Overflow { position: 3 })
        );
        assert_eq!(
            Cardinality::from_ranges(Vec::new()),
            Err(CardinalityError::Empty)
        );
    }

    #[test]
    fn subsets() {
        assert!(card("1").is_subset_of(&card("0..1")));
        assert!(card("1").is_subset_of(&card("*")));
        assert!(!card("1..*").is_subset_of(&card("0")));
        assert!(!card("0..2").is_subset_of(&card("0,2")));
        assert!(card("2..*").is_subset_of(&card("1..*")));
    }

    fn arb_card() -> impl Strategy<Value = Cardinality> {
        prop::collection::vec((0u32..20, prop::option::of(0u32..20)), 1..5).prop_map(|raw| {
            let ranges = raw.into_iter().map(|(a, b)| match b {
                Some(b) => CardRange {
                    low: a.min(b),
                    high: Some(a.max(b)),
                },
                None => CardRange { low: a, high: None },
            });
            Cardinality::from_ranges(ranges).unwrap()
        })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(c in arb_card()) {
            prop_assert_eq!(c.to_string().parse::<Cardinality>().unwrap(), c);
        }

        #[test]
        fn normalized_ranges_are_sorted_and_separated(c in arb_card()) {
            for w in c.ranges().windows(2) {
                let end = w[0].high.expect("only the last range may be unbounded");
                prop_assert!(u64::from(w[1].low) > u64::from(end) + 1);
            }
        }

        #[test]
        fn subset_agrees_with_membership(a in arb_card(), b in arb_card()) {
            let brute = (0u64..45).all(|n| !a.contains(n) || b.contains(n))
                && (a.upper_bound().is_some() || b.upper_bound().is_none());
            prop_assert_eq!(a.is_subset_of(&b), brute);
        }
    }
}
