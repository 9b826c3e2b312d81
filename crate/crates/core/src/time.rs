//! Protocol time stamps of the form `round:step substep`, written `1:01`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Ordered lexicographically by (round, step, substep).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TimeStamp {
    pub round: u32,
    pub step: u32,
    pub substep: u32,
}

impl TimeStamp {
    pub const ZERO: TimeStamp = TimeStamp { round: 0, step: 0, substep: 0 };

    pub const fn new(round: u32, step: u32, substep: u32) -> Self {
        TimeStamp { round, step, substep }
    }

    pub fn plus_substeps(self, delay: u32) -> Self {
        TimeStamp { substep: self.substep + delay, ..self }
    }
}

impl fmt::Display for TimeStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.step < 10 && self.substep < 10 {
            write!(f, "{}:{}{}", self.round, self.step, self.substep)
        } else {
            write!(f, "{}:{}.{}", self.round, self.step, self.substep)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed time stamp `{0}` (expected `round:ij` or `round:i.j`)")]
pub struct TimeParseError(pub String);

impl FromStr for TimeStamp {
    type Err = TimeParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || TimeParseError(s.to_string());
        let (round, rest) = s.split_once(':').ok_or_else(err)?;
        let round = round.parse::<u32>().map_err(|_| err())?;
        let (step, substep) = match rest.split_once('.') {
            Some((i, j)) => (
                i.parse::<u32>().map_err(|_| err())?,
                j.parse::<u32>().map_err(|_| err())?,
            ),
            None => {
                let digits: Vec<u32> = rest.chars().map(|c| c.to_digit(10)).collect::<Option<_>>().ok_or_else(err)?;
                match digits.as_slice() {
                    [i, j] => (*i, *j),
                    _ => return Err(err()),
                }
            }
        };
        Ok(TimeStamp { round, step, substep })
    }
}

impl Serialize for TimeStamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeStamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_compact_and_dotted_forms() {
        assert_eq!("1:01".parse::<TimeStamp>().unwrap(), TimeStamp::new(1, 0, 1));
        assert_eq!("3:12.4".parse::<TimeStamp>().unwrap(), TimeStamp::new(3, 12, 4));
        assert!("1:1".parse::<TimeStamp>().is_err());
        assert!("n:01".parse::<TimeStamp>().is_err());
        assert!("101".parse::<TimeStamp>().is_err());
    }

    #[test]
    fn display_round_trips() {
        for t in [TimeStamp::new(1, 2, 1), TimeStamp::new(0, 0, 0), TimeStamp::new(2, 11, 3)] {
            assert_eq!(t.to_string().parse::<TimeStamp>().unwrap(), t);
        }
    }

    #[test]
    fn lexicographic_order() {
        let a = TimeStamp::new(1, 0, 9);
        let b = TimeStamp::new(1, 1, 0);
        let c = TimeStamp::new(2, 0, 0);
        assert!(a < b && b < c);
        assert_eq!(a.plus_substeps(1), TimeStamp::new(1, 0, 10));
    }
}
