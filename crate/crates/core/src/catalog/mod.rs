//! Bundled domain knowledge: domain profiles, the API catalog, instruction
//! families with their paraphrase variants, and the surface-language pack
//! used by the simulator and responder.

pub mod lang;
pub mod phrasing;
pub mod template;

use std::collections::BTreeMap;

use crate::model::{
    ApiId, ApiInput, ApiSpec, AttributeName, Domain, DomainSchema, FamilyId, Operation, Registry,
};

/// Static description of one bundled domain.
#[derive(Debug, Clone, Copy)]
pub struct DomainProfile {
    pub domain: &'static str,
    /// Singular noun used in templates.
    pub noun: &'static str,
    pub entity_less: bool,
    pub schema: &'static [&'static str],
    /// Attributes stored on entities (subset of `schema`).
    pub entity_attributes: &'static [&'static str],
    /// Entity table size.
    pub entity_count: usize,
    /// Instruction count per manual.
    pub instruction_count: usize,
    /// Attribute identifying an entity in lookups and bookings.
    pub key: &'static str,
    pub searchable: &'static [&'static str],
    pub requestable: &'static [&'static str],
    /// Second input of the booking API (the first is `key`).
    pub booking_extra: Option<&'static str>,
    pub editable: &'static [&'static str],
}

impl DomainProfile {
    pub fn domain(&self) -> Domain {
        Domain::from(self.domain)
    }

    pub fn bookable(&self) -> bool {
        self.booking_extra.is_some() || self.entity_less
    }
}

pub const PROFILES: [DomainProfile; 6] = [
    DomainProfile {
        domain: "attraction",
        noun: "attraction",
        entity_less: false,
        schema: &[
            "name", "type", "area", "price", "score", "address", "phone", "postcode",
        ],
        entity_attributes: &[
            "name", "type", "area", "price", "score", "address", "phone", "postcode",
        ],
        entity_count: 465,
        instruction_count: 90,
        key: "name",
        searchable: &["type", "area", "price", "name"],
        requestable: &["address", "phone", "postcode", "score"],
        booking_extra: None,
        editable: &[],
    },
    DomainProfile {
        domain: "hospital",
        noun: "hospital",
        entity_less: false,
        schema: &["name", "department", "area", "address", "phone", "postcode"],
        entity_attributes: &["name", "department", "area", "address", "phone", "postcode"],
        entity_count: 91,
        instruction_count: 43,
        key: "name",
        searchable: &["department", "area", "name"],
        requestable: &["address", "phone", "postcode"],
        booking_extra: None,
        editable: &[],
    },
    DomainProfile {
        domain: "hotel",
        noun: "hotel",
        entity_less: false,
        schema: &[
            "name",
            "type",
            "area",
            "price",
            "star",
            "facility",
            "address",
            "phone",
            "postcode",
            "day",
            "people",
            "stay",
            "reference num.",
        ],
        entity_attributes: &[
            "name", "type", "area", "price", "star", "facility", "address", "phone", "postcode",
        ],
        entity_count: 1133,
        instruction_count: 80,
        key: "name",
        searchable: &["type", "area", "price", "star", "facility", "name"],
        requestable: &["address", "phone", "postcode", "reference num."],
        booking_extra: Some("day"),
        editable: &["day", "people", "stay"],
    },
    DomainProfile {
        domain: "restaurant",
        noun: "restaurant",
        entity_less: false,
        schema: &[
            "name",
            "food",
            "area",
            "price",
            "score",
            "address",
            "phone",
            "postcode",
            "day",
            "time",
            "people",
            "reference num.",
        ],
        entity_attributes: &[
            "name", "food", "area", "price", "score", "address", "phone", "postcode",
        ],
        entity_count: 951,
        instruction_count: 114,
        key: "name",
        searchable: &["food", "area", "price", "name"],
        requestable: &["address", "phone", "postcode", "score", "reference num."],
        booking_extra: Some("time"),
        editable: &["time", "day", "people"],
    },
    DomainProfile {
        domain: "train",
        noun: "train",
        entity_less: false,
        schema: &[
            "name",
            "id",
            "departure",
            "destination",
            "day",
            "leave",
            "arrive",
            "time",
            "price",
            "station",
            "people",
            "reference num.",
        ],
        entity_attributes: &[
            "name",
            "id",
            "departure",
            "destination",
            "day",
            "leave",
            "arrive",
            "time",
            "price",
            "station",
        ],
        entity_count: 1022,
        instruction_count: 133,
        key: "id",
        searchable: &["departure", "destination", "day", "leave", "arrive"],
        requestable: &["price", "time", "station", "reference num."],
        booking_extra: Some("people"),
        editable: &["people"],
    },
    DomainProfile {
        domain: "taxi",
        noun: "taxi",
        entity_less: true,
        schema: &[
            "departure",
            "destination",
            "leave",
            "car",
            "phone",
            "reference num.",
        ],
        entity_attributes: &[],
        entity_count: 0,
        instruction_count: 56,
        key: "departure",
        searchable: &[],
        requestable: &["car", "phone"],
        booking_extra: None,
        editable: &["leave", "destination"],
    },
];

pub fn profile(domain: &str) -> Option<&'static DomainProfile> {
    PROFILES.iter().find(|p| p.domain == domain)
}

/// Total instructions per bundled manual.
pub fn manual_size() -> usize {
    PROFILES.iter().map(|p| p.instruction_count).sum()
}

pub fn schemas() -> BTreeMap<Domain, DomainSchema> {
    PROFILES
        .iter()
        .map(|p| {
            let schema = DomainSchema {
                entity_less: p.entity_less,
                attributes: p.schema.iter().map(|a| AttributeName::from(*a)).collect(),
            };
            (p.domain(), schema)
        })
        .collect()
}

pub fn registry() -> Registry {
    Registry::standard()
}

/// Search subsets of size 1 and 2, in `searchable` order.
pub fn search_subsets(p: &DomainProfile) -> Vec<Vec<&'static str>> {
    let s = p.searchable;
    let mut out: Vec<Vec<&str>> = s.iter().map(|a| vec![*a]).collect();
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            out.push(vec![s[i], s[j]]);
        }
    }
    out
}

pub fn search_api_id(domain: &str, attrs: &[&str]) -> ApiId {
    ApiId::new(format!("{domain}_search[{}]", attrs.join("+")))
}

pub fn lookup_api_id(domain: &str, attr: &str) -> ApiId {
    ApiId::new(format!("{domain}_lookup[{attr}]"))
}

pub fn book_api_id(domain: &str) -> ApiId {
    ApiId::new(format!("{domain}_book"))
}

pub fn edit_api_id(domain: &str, attr: &str) -> ApiId {
    ApiId::new(format!("{domain}_book_edit[{attr}]"))
}

pub fn cancel_api_id(domain: &str) -> ApiId {
    ApiId::new(format!("{domain}_book_cancel"))
}

fn inputs(attrs: &[&str]) -> Vec<ApiInput> {
    attrs
        .iter()
        .map(|a| ApiInput {
            attribute: AttributeName::from(*a),
            required: true,
        })
        .collect()
}

fn names(attrs: &[&str]) -> Vec<AttributeName> {
    attrs.iter().map(|a| AttributeName::from(*a)).collect()
}

/// Attributes a lookup can answer: requestable entity attributes.
pub fn lookup_attributes(p: &DomainProfile) -> Vec<&'static str> {
    p.requestable
        .iter()
        .copied()
        .filter(|a| p.entity_attributes.contains(a))
        .collect()
}

/// Booking API inputs for a profile.
pub fn booking_inputs(p: &DomainProfile) -> Vec<&'static str> {
    if p.entity_less {
        vec!["departure", "destination"]
    } else {
        p.booking_extra.map(|x| vec![p.key, x]).unwrap_or_default()
    }
}

/// The bundled API catalog.
pub fn api_catalog() -> Vec<ApiSpec> {
    let mut apis = Vec::new();
    for p in &PROFILES {
        let d = p.domain();
        for subset in search_subsets(p) {
            let mut outputs = vec![p.key];
            outputs.extend(subset.iter().filter(|a| **a != p.key));
            apis.push(ApiSpec {
                id: search_api_id(p.domain, &subset),
                name: format!("{}_search", p.domain),
                domain: d.clone(),
                operation: Operation::Find,
                inputs: inputs(&subset),
                outputs: names(&outputs),
            });
        }
        for attr in lookup_attributes(p) {
            apis.push(ApiSpec {
                id: lookup_api_id(p.domain, attr),
                name: format!("{}_search", p.domain),
                domain: d.clone(),
                operation: Operation::Find,
                inputs: inputs(&[p.key]),
                outputs: names(&[p.key, attr]),
            });
        }
        if p.bookable() {
            let outputs: &[&str] = if p.entity_less {
                &["car", "phone", "reference num."]
            } else {
                &["reference num."]
            };
            apis.push(ApiSpec {
                id: book_api_id(p.domain),
                name: format!("{}_booking", p.domain),
                domain: d.clone(),
                operation: Operation::Add,
                inputs: inputs(&booking_inputs(p)),
                outputs: names(outputs),
            });
            for attr in p.editable {
                apis.push(ApiSpec {
                    id: edit_api_id(p.domain, attr),
                    name: format!("{}_booking_edit", p.domain),
                    domain: d.clone(),
                    operation: Operation::Edit,
                    inputs: inputs(&["reference num.", attr]),
                    outputs: names(&["reference num.", attr]),
                });
            }
            apis.push(ApiSpec {
                id: cancel_api_id(p.domain),
                name: format!("{}_booking_cancel", p.domain),
                domain: d.clone(),
                operation: Operation::Delete,
                inputs: inputs(&["reference num."]),
                outputs: names(&["reference num."]),
            });
        }
    }
    apis
}

/// What situation an instruction family covers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    Find(Vec<&'static str>),
    Recommend,
    AskMore,
    NoResult,
    Lookup(&'static str),
    Book,
    BookAsk(&'static str),
    Edit(&'static str),
    Cancel,
    AnythingElse,
    TaxiAsk(&'static str),
    Faq(usize, usize),
}

impl FamilyKind {
    pub fn family_id(&self, domain: &str) -> FamilyId {
        let tail = match self {
            FamilyKind::Find(attrs) => format!("find.{}", attrs.join("+")),
            FamilyKind::Recommend => "recommend".into(),
            FamilyKind::AskMore => "ask-more".into(),
            FamilyKind::NoResult => "no-result".into(),
            FamilyKind::Lookup(a) => format!("lookup.{a}"),
            FamilyKind::Book => "book".into(),
            FamilyKind::BookAsk(a) => format!("book-ask.{a}"),
            FamilyKind::Edit(a) => format!("edit.{a}"),
            FamilyKind::Cancel => "cancel".into(),
            FamilyKind::AnythingElse => "anything-else".into(),
            FamilyKind::TaxiAsk(a) => format!("ask.{a}"),
            FamilyKind::Faq(i, a) => format!(
                "faq.{}.{}",
                phrasing::FAQ_INTENT_KEYS[*i],
                phrasing::slug(phrasing::FAQ_ASPECTS[*a])
            ),
        };
        FamilyId::new(format!("{domain}.{}", tail.replace(' ', "_")))
    }

    pub fn api(&self, p: &DomainProfile) -> Option<ApiId> {
        match self {
            FamilyKind::Find(attrs) => Some(search_api_id(p.domain, attrs)),
            FamilyKind::Lookup(a) => Some(lookup_api_id(p.domain, a)),
            FamilyKind::Book => Some(book_api_id(p.domain)),
            FamilyKind::Edit(a) => Some(edit_api_id(p.domain, a)),
            FamilyKind::Cancel => Some(cancel_api_id(p.domain)),
            _ => None,
        }
    }
}

/// Families of a domain in manual order, sized to `instruction_count`.
pub fn families(p: &DomainProfile) -> Vec<FamilyKind> {
    let mut out = Vec::new();
    if !p.entity_less {
        out.extend(search_subsets(p).into_iter().map(FamilyKind::Find));
        out.extend([
            FamilyKind::Recommend,
            FamilyKind::AskMore,
            FamilyKind::NoResult,
        ]);
        out.extend(lookup_attributes(p).into_iter().map(FamilyKind::Lookup));
        if let Some(extra) = p.booking_extra {
            out.push(FamilyKind::Book);
            out.push(FamilyKind::BookAsk(extra));
        }
    } else {
        out.push(FamilyKind::Book);
        out.push(FamilyKind::TaxiAsk("departure"));
        out.push(FamilyKind::TaxiAsk("destination"));
    }
    if p.bookable() {
        out.extend(p.editable.iter().map(|a| FamilyKind::Edit(a)));
        out.push(FamilyKind::Cancel);
    }
    out.push(FamilyKind::AnythingElse);
    let mut faq = (0..phrasing::FAQ_ASPECTS.len())
        .flat_map(|a| (0..phrasing::FAQ_INTENT_KEYS.len()).map(move |i| FamilyKind::Faq(i, a)));
    while out.len() < p.instruction_count {
        out.push(
            faq.next()
                .expect("enough faq families to fill every domain"),
        );
    }
    out.truncate(p.instruction_count);
    out
}
