//! Surface language pack for simulated users and the fixed agent turns.
//! Swapping the pack changes the wording of generated dialogues without
//! touching simulator logic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Templates keyed by dialogue act and attribute. `{noun}` is the domain
/// noun, `{values}` a sequence of value phrases, `{attr}` a requested
/// attribute's name, and `{<attribute>}` a value placeholder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguagePack {
    pub greetings: Vec<String>,
    pub agent_greetings: Vec<String>,
    pub farewells: Vec<String>,
    pub agent_farewells: Vec<String>,
    /// First utterance about a domain.
    pub inform_first: Vec<String>,
    /// Further constraints for the current domain.
    pub inform_more: Vec<String>,
    /// Booking request carrying the booking value.
    pub book_with: Vec<String>,
    /// Booking request without the booking value.
    pub book_without: Vec<String>,
    /// Answer to the agent asking for a missing value.
    pub give_value: Vec<String>,
    pub request: Vec<String>,
    /// Restating constraints after an unsuccessful search.
    pub correction: Vec<String>,
    /// Changing a booked value; `{values}` carries the new value.
    pub edit: Vec<String>,
    pub cancel: Vec<String>,
    /// Questions per FAQ intent, with `{asp}` for the aspect.
    pub faq_questions: Vec<Vec<String>>,
    /// Attribute name as the user says it.
    pub attribute_names: BTreeMap<String, String>,
    /// Value phrases per attribute; each contains the `{<attribute>}` placeholder.
    pub value_phrases: BTreeMap<String, Vec<String>>,
    /// Domain nouns as the user says them.
    pub nouns: BTreeMap<String, String>,
    /// Words that directly precede a value of the attribute.
    pub cues: BTreeMap<String, Vec<String>>,
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl LanguagePack {
    pub fn english() -> Self {
        let value_phrases: BTreeMap<String, Vec<String>> = [
            ("food", &["that serves {food} food", "with {food} food"][..]),
            ("area", &["in the {area}", "located in the {area}"]),
            ("price", &["in the {price} price range", "that is {price}"]),
            ("type", &["that is a {type}", "of type {type}"]),
            ("star", &["with {star} stars", "rated {star} stars"]),
            ("facility", &["with {facility}", "that has {facility}"]),
            (
                "department",
                &[
                    "with a {department} department",
                    "that has a {department} department",
                ],
            ),
            ("name", &["called {name}", "named {name}"]),
            ("departure", &["from {departure}"]),
            ("destination", &["to {destination}"]),
            ("day", &["on {day}"]),
            ("leave", &["leaving after {leave}"]),
            ("arrive", &["arriving by {arrive}"]),
            ("time", &["at {time}"]),
            ("people", &["for {people} people"]),
            ("stay", &["for {stay} nights"]),
        ]
        .into_iter()
        .map(|(a, ps)| (a.to_string(), strings(ps)))
        .collect();
        let cues: BTreeMap<String, Vec<String>> = [
            ("departure", &["from"][..]),
            ("destination", &["to"]),
            ("day", &["on"]),
            ("leave", &["after"]),
            ("arrive", &["by"]),
            ("time", &["at"]),
            ("people", &["for"]),
            ("stay", &["for"]),
            ("name", &["called", "named"]),
        ]
        .into_iter()
        .map(|(a, ps)| (a.to_string(), strings(ps)))
        .collect();
        let attribute_names = [
            ("address", "address"),
            ("phone", "phone number"),
            ("postcode", "postcode"),
            ("score", "rating"),
            ("price", "price"),
            ("time", "travel time"),
            ("station", "departure station"),
            ("car", "car type"),
            ("reference num.", "reference number"),
        ]
        .into_iter()
        .map(|(a, n)| (a.to_string(), n.to_string()))
        .collect();
        let nouns = [
            "attraction",
            "hospital",
            "hotel",
            "restaurant",
            "train",
            "taxi",
        ]
        .into_iter()
        .map(|d| (d.to_string(), d.to_string()))
        .collect();
        LanguagePack {
            greetings: strings(&[
                "Hello.",
                "Hi there.",
                "Good day.",
                "Hello, I need some help.",
            ]),
            agent_greetings: strings(&["Hello, how can I help you?", "Hi, what can I do for you?"]),
            farewells: strings(&[
                "Thanks, that is all I need.",
                "Great, goodbye.",
                "Thank you, bye.",
            ]),
            agent_farewells: strings(&["You are welcome, goodbye.", "Have a nice day!"]),
            inform_first: strings(&[
                "I am looking for a {noun} {values}.",
                "Can you find me a {noun} {values}?",
                "I need a {noun} {values}.",
                "Please help me find a {noun} {values}.",
            ]),
            inform_more: strings(&[
                "It should be {values}.",
                "I would like one {values}.",
                "Make it one {values}, please.",
                "Also, I prefer one {values}.",
            ]),
            book_with: strings(&[
                "Please book it {values}.",
                "Can you reserve it {values}?",
                "I want to book it {values}.",
            ]),
            book_without: strings(&[
                "Can you book it for me?",
                "Please make a reservation.",
                "I would like to book it.",
            ]),
            give_value: strings(&[
                "Make it {values}.",
                "Let us say {values}.",
                "I want it {values}.",
            ]),
            request: strings(&[
                "What is the {attr}?",
                "Could you tell me the {attr}?",
                "Can I have the {attr}, please?",
                "I also need the {attr}.",
            ]),
            correction: strings(&[
                "Sorry, I meant one {values}.",
                "Actually, I need one {values}.",
                "My mistake, it should be {values}.",
            ]),
            edit: strings(&[
                "Could you change my {noun} booking {values}?",
                "Please move the {noun} booking {values}.",
                "I need to change the {noun} reservation {values}.",
            ]),
            cancel: strings(&[
                "Please cancel my {noun} booking.",
                "I no longer need the {noun} reservation, cancel it please.",
                "Can you cancel the {noun} booking?",
            ]),
            faq_questions: [
                &[
                    "Does the {noun} have {asp}?",
                    "Is {asp} available at the {noun}?",
                ][..],
                &[
                    "Is {asp} free at the {noun}?",
                    "Do I pay extra for {asp} at the {noun}?",
                ],
                &[
                    "What are the rules for {asp} at the {noun}?",
                    "Is there a policy on {asp} at the {noun}?",
                ],
                &[
                    "Where can I find {asp} at the {noun}?",
                    "Where is {asp} at the {noun}?",
                ],
                &[
                    "When is {asp} possible at the {noun}?",
                    "At what times does {asp} work at the {noun}?",
                ],
                &[
                    "Do I need to arrange {asp} in advance at the {noun}?",
                    "Does {asp} need booking ahead at the {noun}?",
                ],
                &[
                    "Are there exceptions for {asp} at the {noun}?",
                    "Can the {noun} make a special case for {asp}?",
                ],
                &[
                    "What documents do I need for {asp} at the {noun}?",
                    "What should I bring for {asp} at the {noun}?",
                ],
                &[
                    "Who should I contact about {asp} at the {noun}?",
                    "Who handles {asp} at the {noun}?",
                ],
            ]
            .iter()
            .map(|qs| strings(qs))
            .collect(),
            attribute_names,
            value_phrases,
            nouns,
            cues,
        }
    }

    pub fn noun<'a>(&'a self, domain: &'a str) -> &'a str {
        self.nouns.get(domain).map(String::as_str).unwrap_or(domain)
    }

    pub fn attribute_name<'a>(&'a self, attr: &'a str) -> &'a str {
        self.attribute_names
            .get(attr)
            .map(String::as_str)
            .unwrap_or(attr)
    }

    pub fn value_phrases(&self, attr: &str) -> Vec<String> {
        self.value_phrases
            .get(attr)
            .cloned()
            .unwrap_or_else(|| vec![format!("with {{{attr}}}")])
    }

    pub fn cues(&self, attr: &str) -> &[String] {
        self.cues.get(attr).map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Default for LanguagePack {
    fn default() -> Self {
        Self::english()
    }
}
