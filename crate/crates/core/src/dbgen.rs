//! Seeded synthetic database shaped like the bundled domain profiles:
//! entity tables per domain, value lexicons for booking attributes and taxi
//! places, and the API catalog.
//!
//! Entity names are built from a vocabulary disjoint from every attribute
//! value, so a value never occurs inside a name.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, DomainProfile, PROFILES};
use crate::model::{AttributeMap, AttributeName, Database, Domain, Entity, Registry};
use crate::seed;

pub const AREAS: [&str; 5] = ["north", "south", "east", "west", "center"];
pub const PRICES: [&str; 3] = ["cheap", "moderate", "expensive"];
pub const DAYS: [&str; 7] = [
    "Monday",
    "Tuesday",
    "Wednesday",
    "Thursday",
    "Friday",
    "Saturday",
    "Sunday",
];
pub const FOODS: [&str; 20] = [
    "Japanese",
    "Chinese",
    "Italian",
    "Indian",
    "Thai",
    "French",
    "Korean",
    "Mexican",
    "Spanish",
    "Turkish",
    "Greek",
    "Lebanese",
    "Vietnamese",
    "British",
    "German",
    "Portuguese",
    "Brazilian",
    "Moroccan",
    "Ethiopian",
    "Persian",
];
pub const ATTRACTION_TYPES: [&str; 10] = [
    "museum",
    "park",
    "theatre",
    "church",
    "cinema",
    "college",
    "boat",
    "nightclub",
    "architecture",
    "zoo",
];
pub const HOTEL_TYPES: [&str; 5] = ["guesthouse", "resort", "hostel", "boutique", "apartment"];
pub const FACILITIES: [&str; 6] = [
    "free parking",
    "free wifi",
    "swimming pool",
    "gym",
    "spa",
    "breakfast",
];
pub const DEPARTMENTS: [&str; 20] = [
    "cardiology",
    "neurology",
    "oncology",
    "paediatrics",
    "dermatology",
    "orthopaedics",
    "urology",
    "gastroenterology",
    "haematology",
    "nephrology",
    "psychiatry",
    "radiology",
    "ophthalmology",
    "gynaecology",
    "emergency",
    "rheumatology",
    "endocrinology",
    "immunology",
    "infectious diseases",
    "respiratory medicine",
];
pub const CITIES: [&str; 10] = [
    "Ashford",
    "Bexley",
    "Carlow",
    "Dunmore",
    "Elston",
    "Farley",
    "Glenrock",
    "Hartwell",
    "Ivybridge",
    "Kenmore",
];

const NAME_FIRST: [&str; 50] = [
    "Golden", "Silver", "Amber", "Crimson", "Azure", "Ivory", "Jade", "Scarlet", "Copper",
    "Velvet", "Misty", "Quiet", "Royal", "Hidden", "Lucky", "Happy", "Gentle", "Bright", "Lively",
    "Merry", "Noble", "Rustic", "Sunny", "Windy", "Frosty", "Mellow", "Humble", "Proud", "Swift",
    "Brave", "Little", "Grand", "Olde", "Maple", "Cedar", "Willow", "Juniper", "Hazel", "Rowan",
    "Aspen", "Birch", "Laurel", "Thistle", "Bramble", "Clover", "Saffron", "Indigo", "Coral",
    "Pearl", "Opal",
];
const NAME_SECOND: [&str; 50] = [
    "Heron",
    "Falcon",
    "Badger",
    "Otter",
    "Fox",
    "Lantern",
    "Anchor",
    "Compass",
    "Harbour",
    "Meadow",
    "Orchard",
    "Bridge",
    "Tower",
    "Crown",
    "Feather",
    "Acorn",
    "Thimble",
    "Kettle",
    "Barrel",
    "Lark",
    "Robin",
    "Wren",
    "Swan",
    "Stag",
    "Hare",
    "Pheasant",
    "Magpie",
    "Sparrow",
    "Kestrel",
    "Raven",
    "Beacon",
    "Quill",
    "Chalice",
    "Garland",
    "Mill",
    "Forge",
    "Cottage",
    "Spindle",
    "Tapestry",
    "Lighthouse",
    "Pebble",
    "Brook",
    "Glade",
    "Hollow",
    "Ridge",
    "Summit",
    "Canyon",
    "Harvest",
    "Ember",
    "Comet",
];
const STREETS: [&str; 15] = [
    "Maple", "Station", "Chapel", "Mill", "Bridge", "Market", "Castle", "Victoria", "Albert",
    "Queens", "Kings", "Hill", "Green", "Abbey", "Regent",
];
const STREET_KINDS: [&str; 4] = ["Street", "Road", "Lane", "Avenue"];

fn suffixes(domain: &str) -> &'static [&'static str] {
    match domain {
        "attraction" => &["Hall", "Pavilion", "Grounds", "Collection"],
        "hospital" => &["Hospital", "Clinic", "Infirmary"],
        "hotel" => &["Hotel", "Suites", "Residence"],
        "restaurant" => &["Kitchen", "Bistro", "Diner", "Grill", "Eatery"],
        _ => &["Place"],
    }
}

/// Every value an attribute can take outside names, ids and free-form
/// fields. Used to check that names stay disjoint from values.
pub fn closed_vocabularies() -> Vec<&'static str> {
    let mut out: Vec<&str> = Vec::new();
    out.extend(AREAS);
    out.extend(PRICES);
    out.extend(DAYS);
    out.extend(FOODS);
    out.extend(ATTRACTION_TYPES);
    out.extend(HOTEL_TYPES);
    out.extend(FACILITIES);
    out.extend(DEPARTMENTS);
    out.extend(CITIES);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DbConfig {
    /// Entity count per domain; missing domains use the profile size.
    pub entity_counts: BTreeMap<String, usize>,
    /// Number of places taxis can go between.
    pub taxi_places: usize,
}

impl Default for DbConfig {
    fn default() -> Self {
        DbConfig {
            entity_counts: BTreeMap::new(),
            taxi_places: 150,
        }
    }
}

impl DbConfig {
    /// Every entity table resized to `n`.
    pub fn uniform(n: usize) -> Self {
        DbConfig {
            entity_counts: PROFILES
                .iter()
                .filter(|p| !p.entity_less)
                .map(|p| (p.domain.to_string(), n))
                .collect(),
            taxi_places: n.max(2),
        }
    }

    fn count(&self, p: &DomainProfile) -> usize {
        self.entity_counts
            .get(p.domain)
            .copied()
            .unwrap_or(p.entity_count)
    }
}

fn attrs(pairs: Vec<(&str, String)>) -> AttributeMap {
    pairs
        .into_iter()
        .map(|(k, v)| (AttributeName::from(k), v))
        .collect()
}

fn hhmm(minutes: u32) -> String {
    format!("{:02}:{:02}", (minutes / 60) % 24, minutes % 60)
}

fn pick<'a>(rng: &mut seed::Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).expect("nonempty vocabulary")
}

fn address(rng: &mut seed::Rng) -> String {
    format!(
        "{} {} {}",
        rng.gen_range(1..200),
        pick(rng, &STREETS),
        pick(rng, &STREET_KINDS)
    )
}

fn phone(rng: &mut seed::Rng) -> String {
    format!(
        "01{:03} {:06}",
        rng.gen_range(200..1000),
        rng.gen_range(0..1_000_000)
    )
}

fn postcode(rng: &mut seed::Rng) -> String {
    let letters = b"ABDEFGHJLNPQRSTUWXYZ";
    let l = |rng: &mut seed::Rng| letters[rng.gen_range(0..letters.len())] as char;
    format!(
        "CB{} {}{}{}",
        rng.gen_range(1..10),
        rng.gen_range(1..10),
        l(rng),
        l(rng)
    )
}

fn score(rng: &mut seed::Rng) -> String {
    format!("{:.1}", rng.gen_range(30..=50) as f64 / 10.0)
}

fn names(domain: &str, n: usize, rng: &mut seed::Rng) -> Vec<String> {
    let mut combos: Vec<String> = Vec::new();
    for a in NAME_FIRST {
        for b in NAME_SECOND {
            for s in suffixes(domain) {
                combos.push(format!("{a} {b} {s}"));
            }
        }
    }
    combos.shuffle(rng);
    // One suffix per first+second pair keeps names of a domain far apart.
    let mut seen = BTreeSet::new();
    combos
        .into_iter()
        .filter(|c| {
            seen.insert(
                c.rsplit_once(' ')
                    .map(|(head, _)| head.to_string())
                    .unwrap_or_default(),
            )
        })
        .take(n)
        .collect()
}

fn entity(p: &DomainProfile, name: String, rng: &mut seed::Rng, index: usize) -> Entity {
    let attributes = match p.domain {
        "attraction" => attrs(vec![
            ("name", name),
            ("type", pick(rng, &ATTRACTION_TYPES).into()),
            ("area", pick(rng, &AREAS).into()),
            ("price", pick(rng, &PRICES).into()),
            ("score", score(rng)),
            ("address", address(rng)),
            ("phone", phone(rng)),
            ("postcode", postcode(rng)),
        ]),
        "hospital" => attrs(vec![
            ("name", name),
            ("department", pick(rng, &DEPARTMENTS).into()),
            ("area", pick(rng, &AREAS).into()),
            ("address", address(rng)),
            ("phone", phone(rng)),
            ("postcode", postcode(rng)),
        ]),
        "hotel" => attrs(vec![
            ("name", name),
            ("type", pick(rng, &HOTEL_TYPES).into()),
            ("area", pick(rng, &AREAS).into()),
            ("price", pick(rng, &PRICES).into()),
            ("star", rng.gen_range(1..=5).to_string()),
            ("facility", pick(rng, &FACILITIES).into()),
            ("address", address(rng)),
            ("phone", phone(rng)),
            ("postcode", postcode(rng)),
        ]),
        "restaurant" => attrs(vec![
            ("name", name),
            ("food", pick(rng, &FOODS).into()),
            ("area", pick(rng, &AREAS).into()),
            ("price", pick(rng, &PRICES).into()),
            ("score", score(rng)),
            ("address", address(rng)),
            ("phone", phone(rng)),
            ("postcode", postcode(rng)),
        ]),
        "train" => {
            let dep = rng.gen_range(0..CITIES.len());
            let dest = (dep + rng.gen_range(1..CITIES.len())) % CITIES.len();
            let leave = rng.gen_range(60..276) * 5;
            let duration = rng.gen_range(6..40) * 5;
            let id = format!("TR{:04}", 1000 + index);
            attrs(vec![
                ("name", id.clone()),
                ("id", id),
                ("departure", CITIES[dep].into()),
                ("destination", CITIES[dest].into()),
                ("day", pick(rng, &DAYS).into()),
                ("leave", hhmm(leave)),
                ("arrive", hhmm(leave + duration)),
                ("time", format!("{duration} minutes")),
                (
                    "price",
                    format!(
                        "{}.{:02} pounds",
                        rng.gen_range(4..60),
                        rng.gen_range(0..100)
                    ),
                ),
                ("station", format!("platform {}", rng.gen_range(1..13))),
            ])
        }
        _ => AttributeMap::new(),
    };
    Entity {
        domain: p.domain(),
        attributes,
    }
}

fn lexicon(values: impl IntoIterator<Item = String>) -> Vec<String> {
    values.into_iter().collect()
}

fn booking_times() -> Vec<String> {
    (44..88).map(|q| hhmm(q * 15)).collect()
}

fn counts(range: std::ops::RangeInclusive<u32>) -> Vec<String> {
    range.map(|n| n.to_string()).collect()
}

/// Builds the database for `seed`.
pub fn generate(seed_value: u64, config: &DbConfig) -> Database {
    let mut entities: BTreeMap<Domain, Vec<Entity>> = BTreeMap::new();
    for p in PROFILES.iter().filter(|p| !p.entity_less) {
        let mut rng = seed::rng(seed::derive(seed_value, &format!("db/{}", p.domain)));
        let n = config.count(p);
        let table: Vec<Entity> = if p.domain == "train" {
            (0..n)
                .map(|i| entity(p, String::new(), &mut rng, i))
                .collect()
        } else {
            names(p.domain, n, &mut rng)
                .into_iter()
                .enumerate()
                .map(|(i, name)| entity(p, name, &mut rng, i))
                .collect()
        };
        entities.insert(p.domain(), table);
    }
    entities.insert(Domain::from("taxi"), Vec::new());

    let mut places: Vec<String> = ["attraction", "hotel", "restaurant"]
        .iter()
        .flat_map(|d| {
            entities[&Domain::from(*d)]
                .iter()
                .filter_map(|e| e.name().map(str::to_string))
        })
        .collect();
    let mut rng = seed::rng(seed::derive(seed_value, "db/taxi"));
    places.shuffle(&mut rng);
    places.truncate(config.taxi_places);
    places.sort();

    let day = lexicon(DAYS.iter().map(|d| d.to_string()));
    let mut lexicons: BTreeMap<Domain, BTreeMap<AttributeName, Vec<String>>> = BTreeMap::new();
    let mut put = |d: &str, a: &str, vs: Vec<String>| {
        lexicons
            .entry(Domain::from(d))
            .or_default()
            .insert(AttributeName::from(a), vs);
    };
    put("hotel", "day", day.clone());
    put("hotel", "people", counts(1..=8));
    put("hotel", "stay", counts(1..=7));
    put("restaurant", "day", day);
    put("restaurant", "time", booking_times());
    put("restaurant", "people", counts(1..=8));
    put("train", "people", counts(1..=8));
    put("taxi", "departure", places.clone());
    put("taxi", "destination", places);
    put("taxi", "leave", booking_times());

    Database {
        registry: Registry::standard(),
        schemas: catalog::schemas(),
        entities,
        lexicons,
        apis: catalog::api_catalog(),
    }
}
