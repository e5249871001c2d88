//! Recognition of database values in free text.

use std::collections::HashMap;

use crate::model::{AttributeName, Database, Domain};
use crate::text::{self, Token};

/// Attribute recognized by shape rather than lexicon.
pub const REFERENCE_ATTRIBUTE: &str = crate::engine::REFERENCE_ATTRIBUTE;

/// Where a value may come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValueEntry {
    pub domain: Domain,
    pub attribute: AttributeName,
}

/// A recognized value occurrence, in chars of the scanned text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recognized {
    pub start: usize,
    pub end: usize,
    /// First token index and one past the last.
    pub tokens: (usize, usize),
    pub entries: Vec<ValueEntry>,
}

impl Recognized {
    pub fn has(&self, domain: &str, attribute: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.domain.as_str() == domain && e.attribute.as_str() == attribute)
    }

    pub fn has_attribute(&self, attribute: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.attribute.as_str() == attribute)
    }
}

/// Squashed value text to the (domain, attribute) pairs it belongs to.
#[derive(Debug, Clone, Default)]
pub struct ValueIndex {
    map: HashMap<String, Vec<ValueEntry>>,
    max_tokens: usize,
    /// Lexicon sizes per (domain, attribute).
    sizes: HashMap<(String, String), usize>,
    /// Values of small lexicons, for fuzzy matching.
    small: HashMap<(String, String), Vec<String>>,
    reference_domains: Vec<Domain>,
}

/// Lexicons up to this size are also matched fuzzily.
pub const SMALL_LEXICON: usize = 64;

/// Eight upper-case hex digits, the shape of a booking reference.
pub fn is_reference(s: &str) -> bool {
    s.len() == 8
        && s.chars()
            .all(|c| c.is_ascii_digit() || ('A'..='F').contains(&c))
        && s.chars().any(|c| c.is_ascii_digit())
}

impl ValueIndex {
    pub fn build(db: &Database) -> Self {
        let mut columns: HashMap<(Domain, AttributeName), Vec<String>> = HashMap::new();
        for (domain, entities) in &db.entities {
            for e in entities {
                for (a, v) in &e.attributes {
                    columns
                        .entry((domain.clone(), a.clone()))
                        .or_default()
                        .push(v.clone());
                }
            }
        }
        for (domain, lex) in &db.lexicons {
            for (a, vs) in lex {
                columns
                    .entry((domain.clone(), a.clone()))
                    .or_default()
                    .extend(vs.iter().cloned());
            }
        }
        let mut index = ValueIndex::default();
        let mut keys: Vec<_> = columns.keys().cloned().collect();
        keys.sort();
        for key in keys {
            let mut values = columns.remove(&key).expect("key present");
            values.sort();
            values.dedup();
            let (domain, attribute) = key;
            index
                .sizes
                .insert((domain.to_string(), attribute.to_string()), values.len());
            if values.len() <= SMALL_LEXICON {
                index
                    .small
                    .insert((domain.to_string(), attribute.to_string()), values.clone());
            }
            for v in values {
                index.max_tokens = index.max_tokens.max(text::tokenize(&v).len());
                let entry = ValueEntry {
                    domain: domain.clone(),
                    attribute: attribute.clone(),
                };
                let slot = index.map.entry(text::squash(&v)).or_default();
                if !slot.contains(&entry) {
                    slot.push(entry);
                }
            }
        }
        index.reference_domains = db
            .schemas
            .iter()
            .filter(|(_, s)| s.contains(&AttributeName::from(REFERENCE_ATTRIBUTE)))
            .map(|(d, _)| d.clone())
            .collect();
        index
    }

    pub fn lexicon_size(&self, domain: &str, attribute: &str) -> usize {
        self.sizes
            .get(&(domain.to_string(), attribute.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn small_lexicon(&self, domain: &str, attribute: &str) -> Option<&[String]> {
        self.small
            .get(&(domain.to_string(), attribute.to_string()))
            .map(Vec::as_slice)
    }

    /// Entries for an exact (squashed) value.
    pub fn lookup(&self, value: &str) -> &[ValueEntry] {
        self.map
            .get(&text::squash(value))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Longest-first, non-overlapping value occurrences in `text`.
    pub fn recognize(&self, text: &str) -> Vec<Recognized> {
        let tokens = text::tokenize(text);
        self.recognize_tokens(text, &tokens)
    }

    pub fn recognize_tokens(&self, source: &str, tokens: &[Token]) -> Vec<Recognized> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let mut found = None;
            for len in (1..=self.max_tokens.min(tokens.len() - i)).rev() {
                let (start, end) = (tokens[i].start, tokens[i + len - 1].end);
                let surface = text::char_slice(source, start, end);
                if let Some(entries) = self.map.get(&text::squash(surface)) {
                    found = Some((
                        len,
                        Recognized {
                            start,
                            end,
                            tokens: (i, i + len),
                            entries: entries.clone(),
                        },
                    ));
                    break;
                }
                if len == 1 && is_reference(surface) {
                    let entries = self
                        .reference_domains
                        .iter()
                        .map(|d| ValueEntry {
                            domain: d.clone(),
                            attribute: REFERENCE_ATTRIBUTE.into(),
                        })
                        .collect();
                    found = Some((
                        1,
                        Recognized {
                            start,
                            end,
                            tokens: (i, i + 1),
                            entries,
                        },
                    ));
                }
            }
            match found {
                Some((len, r)) => {
                    out.push(r);
                    i += len;
                }
                None => i += 1,
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbgen::{self, DbConfig};

    #[test]
    fn recognizes_longest_values_and_references() {
        let db = dbgen::generate(1, &DbConfig::uniform(30));
        let idx = ValueIndex::build(&db);
        let hits = idx.recognize("I want Japanese food in the north on Monday, ref 1A2B3C4D.");
        assert!(hits.iter().any(|h| h.has("restaurant", "food")));
        assert!(hits.iter().any(|h| h.has_attribute("area")));
        assert!(hits.iter().any(|h| h.has_attribute("day")));
        assert!(hits.iter().any(|h| h.has_attribute(REFERENCE_ATTRIBUTE)));
        assert!(is_reference("0A1B2C3D") && !is_reference("ABCDEFAB") && !is_reference("0a1b2c3d"));
    }
}
