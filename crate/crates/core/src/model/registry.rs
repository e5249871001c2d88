use serde::{Deserialize, Serialize};

use super::{AttributeName, Domain};

/// The 26 attribute names used across the database and manuals.
pub const STANDARD_ATTRIBUTES: [&str; 26] = [
    "address",
    "area",
    "arrive",
    "car",
    "choice",
    "class",
    "day",
    "department",
    "departure",
    "destination",
    "facility",
    "food",
    "id",
    "leave",
    "name",
    "people",
    "phone",
    "postcode",
    "price",
    "reference num.",
    "score",
    "station",
    "star",
    "stay",
    "time",
    "type",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainInfo {
    pub name: Domain,
    /// Domains such as taxi have no entity table.
    #[serde(default)]
    pub entity_less: bool,
}

/// Attribute and domain registry. Extensible; [`Registry::standard`] is the
/// default used by bundled data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub attributes: Vec<AttributeName>,
    pub domains: Vec<DomainInfo>,
}

impl Default for Registry {
    fn default() -> Self {
        Self::standard()
    }
}

impl Registry {
    pub fn standard() -> Self {
        let domains = [
            "attraction",
            "hospital",
            "hotel",
            "restaurant",
            "train",
            "taxi",
        ]
        .iter()
        .map(|d| DomainInfo {
            name: Domain::from(*d),
            entity_less: *d == "taxi",
        })
        .collect();
        Self {
            attributes: STANDARD_ATTRIBUTES
                .iter()
                .map(|a| AttributeName::from(*a))
                .collect(),
            domains,
        }
    }

    pub fn has_attribute(&self, name: &AttributeName) -> bool {
        self.attributes.contains(name)
    }

    pub fn domain(&self, name: &Domain) -> Option<&DomainInfo> {
        self.domains.iter().find(|d| &d.name == name)
    }

    pub fn is_entity_less(&self, name: &Domain) -> bool {
        self.domain(name).is_some_and(|d| d.entity_less)
    }

    /// Names that appear more than once.
    pub fn duplicate_attributes(&self) -> Vec<AttributeName> {
        let mut seen = std::collections::BTreeSet::new();
        let mut dups = Vec::new();
        for a in &self.attributes {
            if !seen.insert(a) && !dups.contains(a) {
                dups.push(a.clone());
            }
        }
        dups
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_registry_is_unique_and_complete() {
        let r = Registry::standard();
        assert_eq!(r.attributes.len(), 26);
        assert!(r.duplicate_attributes().is_empty());
        assert!(r.is_entity_less(&Domain::from("taxi")));
        assert!(!r.is_entity_less(&Domain::from("hotel")));
        assert!(r.has_attribute(&AttributeName::from("reference num.")));
    }
}
