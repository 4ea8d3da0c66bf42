//! Compact ontology term identifiers.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// An ontology identifier, stored in its printed form.
///
/// Most ids are CURIEs (`UBERON:0003675`), split at the first colon into a
/// prefix and a local part. Ids without a colon are kept whole; OBO typedef
/// ids (`part_of`) and bare words from annotation text land in that shape and
/// are resolved or rejected downstream.
///
/// Ordering, equality, and hashing all follow the printed form.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermId(Box<str>);

impl TermId {
    /// Parses an id, accepting both CURIE and unprefixed forms.
    ///
    /// Rejects empty input, embedded whitespace, and a leading colon
    /// (a CURIE prefix must be non-empty).
    pub fn parse(text: &str) -> Result<TermId> {
        if text.is_empty() {
            return Err(Error::InvalidTermId {
                text: text.into(),
                reason: "empty",
            });
        }
        if text.chars().any(char::is_whitespace) {
            return Err(Error::InvalidTermId {
                text: text.into(),
                reason: "contains whitespace",
            });
        }
        if text.starts_with(':') {
            return Err(Error::InvalidTermId {
                text: text.into(),
                reason: "empty prefix",
            });
        }
        Ok(TermId(text.into()))
    }

    /// Builds a CURIE from its two parts, validating both.
    pub fn new(prefix: &str, local: &str) -> Result<TermId> {
        if prefix.is_empty() {
            return Err(Error::InvalidTermId {
                text: format!(":{local}"),
                reason: "empty prefix",
            });
        }
        if prefix.contains(':') {
            return Err(Error::InvalidTermId {
                text: format!("{prefix}:{local}"),
                reason: "colon in prefix",
            });
        }
        TermId::parse(&format!("{prefix}:{local}"))
    }

    /// Wraps an id that has no prefix, such as an OBO typedef id.
    pub fn unprefixed(name: &str) -> Result<TermId> {
        if name.contains(':') {
            return Err(Error::InvalidTermId {
                text: name.into(),
                reason: "unexpected colon",
            });
        }
        TermId::parse(name)
    }

    /// The printed form.
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The prefix before the first colon, or `""` for unprefixed ids.
    pub fn prefix(&self) -> &str {
        match self.0.find(':') {
            Some(i) => &self.0[..i],
            None => "",
        }
    }

    /// The part after the first colon, or the whole id when unprefixed.
    pub fn local(&self) -> &str {
        match self.0.find(':') {
            Some(i) => &self.0[i + 1..],
            None => &self.0,
        }
    }

    /// True when the id has a prefix.
    pub fn is_curie(&self) -> bool {
        self.0.contains(':')
    }
}

impl fmt::Display for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for TermId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TermId({})", self.0)
    }
}

impl FromStr for TermId {
    type Err = Error;

    fn from_str(s: &str) -> Result<TermId> {
        TermId::parse(s)
    }
}

impl serde::Serialize for TermId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> serde::Deserialize<'de> for TermId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        TermId::parse(&text).map_err(serde::de::Error::custom)
    }
}
