//! Seed phrasings for every instruction family.
//!
//! Templates contain choice groups `<a|b|c>`. Variant `v` of a family takes
//! option `(v + offset) mod n` of each group, where the offset depends on the
//! family and the group position. Neighbouring groups have coprime sizes
//! (mostly 3 and 5), so two variants share a multi-word phrase only when
//! their indices agree modulo every group size it touches. This keeps the
//! variants of a family lexically diverse.
//!
//! Placeholders: `{attr}` in solutions is replaced by a result value when a
//! response is realized; `[[attr|mention]]` in API descriptions marks an
//! attribute mention.

use super::{booking_inputs, DomainProfile, FamilyKind};
use crate::seed::stable_hash;

pub const FAQ_INTENT_KEYS: [&str; 9] = [
    "availability",
    "cost",
    "rules",
    "location",
    "timing",
    "advance",
    "exceptions",
    "documents",
    "contact",
];

pub const FAQ_ASPECTS: [&str; 13] = [
    "parking",
    "wifi",
    "pets",
    "wheelchair access",
    "card payment",
    "opening hours",
    "group discounts",
    "luggage storage",
    "dress code",
    "smoking",
    "children",
    "cancellation fees",
    "photography",
];

pub fn slug(s: &str) -> String {
    s.replace(' ', "-")
}

/// The unrealized text of one family variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedText {
    pub condition: String,
    pub api: Option<String>,
    pub solution: String,
}

const OPEN: &str =
    "<If|When|Whenever|In case|Once> the <user|customer|guest|caller|client|visitor|traveller>";
const LEAD: &str = "<Okay|Sure|Right|Alright|Well|Thanks|So>, ";

/// Resolves every `<a|b|…>` group of `template` for `variant`. Groups may
/// nest; an inner group is resolved with its own offset.
pub fn expand(template: &str, variant: usize, salt: &str) -> String {
    let mut out = String::with_capacity(template.len());
    let mut group = 0usize;
    let mut chars = template.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c != '<' {
            out.push(c);
            continue;
        }
        let mut depth = 1;
        let mut cuts = vec![i + 1];
        let mut end = template.len();
        for (j, d) in chars.by_ref() {
            match d {
                '<' => depth += 1,
                '>' => {
                    depth -= 1;
                    if depth == 0 {
                        end = j;
                        break;
                    }
                }
                '|' if depth == 1 => cuts.push(j + 1),
                _ => {}
            }
        }
        cuts.push(end + 1);
        let n = cuts.len() - 1;
        let offset = stable_hash(&[salt, &group.to_string()]) as usize;
        let k = (variant + offset) % n;
        let option = &template[cuts[k]..cuts[k + 1] - 1];
        out.push_str(&expand(option, variant, &format!("{salt}.{group}")));
        group += 1;
    }
    out
}

/// Choice group naming an attribute.
pub fn attribute_phrases(attr: &str) -> &'static str {
    match attr {
        "name" => "<name|place name|exact name|full name|listed name>",
        "id" => "<train ID|train number|service code|train code|service number>",
        "food" => "<cuisine|food type|kind of food>",
        "area" => "<area|part of town|district|neighbourhood|zone>",
        "price" => "<price range|budget|price level>",
        "type" => "<type|kind|category|sort of place|variety>",
        "star" => "<star rating|number of stars|star level>",
        "facility" => "<facility|amenity|feature|service on site|extra>",
        "department" => "<department|medical unit|ward>",
        "departure" => "<departure place|starting point|origin|pickup place|start location>",
        "destination" => "<destination|end point|place to go|drop-off place|final stop>",
        "day" => "<day|date|weekday|day of the visit|booking day>",
        "leave" => "<departure time|leaving time|time to leave>",
        "arrive" => "<arrival time|time to arrive|latest arrival|arrival deadline|time of arrival>",
        "time" => "<time|reservation time|hour|time slot|booking time>",
        "people" => "<number of people|party size|group size|head count|number of guests>",
        "stay" => "<length of stay|number of nights|nights>",
        "reference num." => "<reference number|booking reference|confirmation code>",
        "address" => "<address|street address|location>",
        "phone" => "<phone number|telephone|contact number>",
        "postcode" => "<postcode|postal code|zip code>",
        "score" => "<rating|review score|score>",
        "station" => "<station|boarding point|platform>",
        "car" => "<car|vehicle|car model>",
        "class" => "<class|travel class>",
        "choice" => "<number of choices|count>",
        _ => "value",
    }
}

/// Plain name of an attribute, used inside solutions.
pub fn attribute_name(attr: &str) -> String {
    let phrases = attribute_phrases(attr);
    phrases
        .trim_start_matches('<')
        .split(['|', '>'])
        .next()
        .unwrap_or(attr)
        .to_string()
}

/// Agent-side phrase presenting a value of `attr`, with the `{attr}`
/// placeholder.
pub fn value_phrase(attr: &str) -> String {
    let p = match attr {
        "food" => "<serving|offering|known for> {food} <food|cuisine|dishes|cooking|meals>",
        "area" => {
            "<in the|around the|located in the> {area} <area|part of town|district|side|quarter>"
        }
        "price" => {
            "<in the|within the|at the> {price} <price range|price level|budget|end|bracket>"
        }
        "type" => "of the {type} <type|kind|variety>",
        "star" => {
            "<rated|with|holding> {star} <stars|star rating|star grade|star level|stars overall>"
        }
        "facility" => "<offering|with|that has> {facility}",
        "department" => {
            "<with|that has|hosting> a {department} <department|unit|ward|service|clinic>"
        }
        "name" => "<named|called|listed as> {name}",
        "departure" => "<leaving from|departing from|starting at> {departure}",
        "destination" => "<going to|heading to|bound for|travelling to|arriving in> {destination}",
        "day" => "on {day}",
        "leave" => "<departing after|leaving after|setting off after> {leave}",
        "arrive" => "<arriving by|getting in by|reaching its stop by|due by|in before> {arrive}",
        "time" => "at {time}",
        "people" => "for {people} <people|guests|persons>",
        "stay" => "for {stay} <nights|night stays|overnight stays>",
        other => return format!("with the {} {{{other}}}", attribute_name(other)),
    };
    p.to_string()
}

fn join_and(parts: &[String]) -> String {
    match parts {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// Text of family `kind` of domain `p` in paraphrase set `variant`.
pub fn family_text(p: &DomainProfile, kind: &FamilyKind, variant: usize) -> SeedText {
    let fam = kind.family_id(p.domain);
    let fam = fam.as_str();
    let noun = p.noun;
    let render = |template: &str, slot: &str| {
        expand(template, variant, &format!("{fam}/{slot}")).replace("{noun}", noun)
    };
    let (condition, api, solution): (String, Option<String>, String) = match kind {
        FamilyKind::Find(attrs) => {
            let names: Vec<String> = attrs.iter().map(|a| format!("the {}", attribute_phrases(a))).collect();
            let mentions: Vec<String> =
                attrs.iter().map(|a| format!("[[{a}|the {}]]", attribute_phrases(a))).collect();
            let vals: Vec<String> = attrs.iter().map(|a| value_phrase(a)).collect();
            (
                format!(
                    "{OPEN} <is looking for|wants|needs|asks for|requests> a {{noun}} <and gives|giving|stating> {}.",
                    join_and(&names)
                ),
                Some(format!(
                    "<Search|Query|Filter> the {{noun}} <table|records|database|listings|index> <by|using|with> {}.",
                    join_and(&mentions)
                )),
                format!(
                    "<I found|There are|We have> {{choice}} <options|matches|places|results|candidates> {}. <{{name}} is one of them|One is {{name}}|For example, {{name}}|{{name}} is among them|Take {{name}}, for instance>.",
                    vals.join(" ")
                )
                .replace("{name}", &format!("{{{}}}", p.key)),
            )
        }
        FamilyKind::Recommend => (
            format!("{OPEN} <has|is left with|still sees|gets back|is shown> <several|many|multiple> {{noun}} <options|results|matches|candidates|choices>."),
            None,
            "<I would recommend|You might enjoy|My suggestion is|How about|I can suggest> {name}, <a nice one|a good pick|a fine choice>."
                .replace("{name}", &format!("{{{}}}", p.key)),
        ),
        FamilyKind::AskMore => (
            format!("{OPEN} <gets|sees|faces|receives|has> <too many|a long list of|plenty of> {{noun}} <matches|results|options|candidates|hits> <to decide|at once|with no favourite>."),
            None,
            "<Do you have|Is there|Can you name|Could you give me|Would you add> <any other|one more|a further> <preference|requirement|wish|criterion|detail>?".into(),
        ),
        FamilyKind::NoResult => (
            format!("{OPEN} <gets|receives|ends up with|is given|sees> <no|zero|not a single> {{noun}} <from the search|in the results|back|as a match|at all>."),
            None,
            "<Sorry|Unfortunately|I am afraid|Sadly|Regrettably>, <there is no|I found no|we have no> {noun} <matching that|like that|fitting those requirements|of that kind|meeting that>.".into(),
        ),
        FamilyKind::Lookup(a) => (
            format!(
                "{OPEN} <asks for|wants to know|needs|requests|enquires about> the {} of <a|the chosen|that|the selected|the given> {{noun}}.",
                attribute_phrases(a)
            ),
            Some(format!(
                "<Look it up|Query the records|Search|Find the entry|Retrieve it> <by|using|with> [[{}|the {}]].",
                p.key,
                attribute_phrases(p.key)
            )),
            format!(
                "<The {{anom}} of {{{k}}} is {{{a}}}|{{{k}}} has the {{anom}} {{{a}}}|For {{{k}}}, the {{anom}} is {{{a}}}|You asked about {{{k}}}: its {{anom}} is {{{a}}}|Here is the {{anom}} for {{{k}}}: {{{a}}}>. <Anything else on that|Hope that helps|Let me know if you need more>.",
                k = p.key
            )
            .replace("{anom}", attribute_phrases(a)),
        ),
        FamilyKind::Book if p.entity_less => (
            format!("{OPEN} <needs|wants|asks for|requests|would like> a {{noun}} <ride|trip|journey> <between two places|somewhere|to get around|from one place to another|across town>."),
            Some(format!(
                "<Book|Order|Reserve|Arrange|Request> a car <with|using|from> [[departure|the {}]] <and|to|plus> [[destination|the {}]].",
                attribute_phrases("departure"),
                attribute_phrases("destination")
            )),
            "<A|Your|The booked> {car} will <pick you up at|collect you from|meet you at|wait at|come to> {departure} <and go to|heading for|to take you to> {destination}. <The contact number is|Call|The driver can be reached on|Phone|Contact> {phone} <and the reference is|with reference|for reference number> {reference num.}.".into(),
        ),
        FamilyKind::Book => {
            let inputs = booking_inputs(p);
            let (key, extra) = (inputs[0], inputs[1]);
            (
                format!("{OPEN} <wants to reserve|asks to book|would like to book|decides to reserve|is ready to book> <a|the|this> {{noun}}."),
                Some(format!(
                    "<Reserve|Book|Place the booking|Make the reservation|Submit the booking> <with|using|for> [[{key}|the {}]] <and|plus|together with|along with|as well as> [[{extra}|the {}]].",
                    attribute_phrases(key),
                    attribute_phrases(extra)
                )),
                format!(
                    "<Done|All set|Great|Confirmed|Perfect>, {{{key}}} is <booked|reserved|confirmed> {}. <Your reference number is|The reference is|Please note reference number|Keep the reference|Your booking reference is> {{reference num.}}.",
                    value_phrase(extra)
                ),
            )
        }
        FamilyKind::BookAsk(x) | FamilyKind::TaxiAsk(x) => {
            let verb = if matches!(kind, FamilyKind::BookAsk(_)) {
                "<wants to book|asks to reserve|tries to book|would like to reserve|requests>"
            } else {
                "<asks for|wants|needs|requests|orders>"
            };
            (
                format!("{OPEN} {verb} a {{noun}} <but gives no|without the|and forgets the> {}.", attribute_phrases(x)),
                None,
                format!(
                    "<Could you tell me|Please give me|I still need|May I have|Let me know> the {} <for the booking|first|please>.",
                    attribute_name(x)
                ),
            )
        }
        FamilyKind::Edit(a) => (
            format!(
                "{OPEN} <wants to change|asks to modify|needs a new|requests another|would like a different> {} <for the|on an existing|in the> {{noun}} <booking|reservation>.",
                attribute_phrases(a)
            ),
            Some(format!(
                "<Update|Change|Edit|Modify|Amend> the booking <with|using|given> [[reference num.|the {}]] <and|plus|together with|along with|as well as> [[{a}|the new {}]].",
                attribute_phrases("reference num."),
                attribute_phrases(a)
            )),
            format!(
                "<Booking|Reservation|Your booking> {{reference num.}} <is now|has been changed and is|now stands|was updated and is|has become> {}. <Anything else|Is that all|Can I help further|Need anything more|What else>?",
                value_phrase(a)
            ),
        ),
        FamilyKind::Cancel => (
            format!("{OPEN} <wants to cancel|no longer needs|asks to call off|decides to drop|requests cancellation of> <a|the|their> {{noun}} <booking|reservation>."),
            Some(format!(
                "<Cancel|Call off|Remove|Drop|Withdraw> the booking <using|with|given> [[reference num.|the {}]].",
                attribute_phrases("reference num.")
            )),
            "<Booking|Reservation|Your booking> {reference num.} <is cancelled|has been called off|no longer exists|was removed|is now void>. <Sorry to see it go|Done|Anything else>?".into(),
        ),
        FamilyKind::AnythingElse => (
            format!("{OPEN} <has everything needed for|is done with|got all details about|seems satisfied with|has finished asking about> the {{noun}} <part|request|task>."),
            None,
            "<Is there anything else|Can I help with something else|Do you need anything more|What else can I do|Anything more> <for you|today|at the moment>?".into(),
        ),
        FamilyKind::Faq(i, a) => {
            let (c, s) = faq_templates(*i);
            let asp = FAQ_ASPECTS[*a];
            (
                format!("{OPEN} <at the|regarding the|about the|contacting the|of the> {{noun}} {}", c.replace("{asp}", asp)),
                None,
                s.replace("{asp}", asp),
            )
        }
    };
    SeedText {
        condition: render(&condition, "condition"),
        api: api.map(|t| render(&t, "api")),
        solution: render(&format!("{LEAD}{solution}"), "solution"),
    }
}

fn faq_templates(intent: usize) -> (&'static str, &'static str) {
    match intent {
        0 => (
            "<asks whether|wants to know if|checks if|wonders whether|enquires if> the {noun} <has|offers|provides> {asp}.",
            "<Yes|Good news|Certainly|Indeed|Of course>, {asp} <is available|is provided|is on offer> <there|on site|for guests|at the place|as standard>.",
        ),
        1 => (
            "<asks whether|wants to know if|checks if|wonders whether|enquires if> {asp} <costs extra|is free|is charged> <at the {noun}|here|during the visit|for guests|at all>.",
            "<There is no extra charge for|Nothing more is charged for|You pay nothing extra for|No fee applies to|The price already covers> {asp} <at the {noun}|there|during your stay>.",
        ),
        2 => (
            "<asks about|wants to know|checks|enquires about|wonders about> the <rules|policy|guidelines> <on|for|regarding|concerning|about> {asp}.",
            "<The usual|Standard|Normal|The posted|Common> <rules|policies|guidelines> apply to {asp}<, and staff can explain|; ask staff for details|, as signposted|; details are on site|, nothing unusual>.",
        ),
        3 => (
            "<asks where|wants to know where|checks where|wonders where|enquires where> {asp} <is|can be found|is located> <at the {noun}|on site|in the building|inside|nearby>.",
            "<Ask at the front desk|The staff can show you|Follow the signs|Reception will guide you|A member of staff will help> <to find|towards|to reach> {asp}.",
        ),
        4 => (
            "<asks when|wants to know when|checks at what times|wonders when|enquires when> {asp} <is offered|works|is possible> <at the {noun}|here|each day|during the week|on weekends>.",
            "<Regular|Normal|Standard|Usual|Ordinary> <hours|times|schedules> apply to {asp}<, every day|, all week|, as posted|, with no exceptions|, as listed>.",
        ),
        5 => (
            "<asks whether|wants to know if|checks if|wonders whether|enquires if> {asp} <must be arranged|needs booking|requires notice> <in advance|ahead of time|beforehand|early|before arrival>.",
            "<It is best to|Please|We suggest you|Remember to|Try to> <mention|arrange|request> {asp} <when booking|a day ahead|in advance|early|beforehand>.",
        ),
        6 => (
            "<asks about|wants to know about|checks for|wonders about|enquires about> <exceptions|special cases|special treatment> <for|regarding|concerning|on|about> {asp}.",
            "<Exceptions|Special requests|Unusual cases|Changes|Special arrangements> <for|about|on> {asp} <are decided by the manager|are handled case by case|need approval|can be discussed on site|depend on the day>.",
        ),
        7 => (
            "<asks what to bring|wants to know which documents are needed|checks if paperwork is needed|wonders what is required|enquires about documents> <for|regarding|concerning> {asp} <at the {noun}|here|on arrival|in advance|at all>.",
            "<Nothing special is needed|A valid ID is enough|Just bring your booking|No paperwork is required|A confirmation is enough> <for|regarding|concerning> {asp} <at all|here|today|on site|in general>.",
        ),
        _ => (
            "<asks whom to contact|wants a contact|checks who handles|wonders who to call|enquires who deals with> <about|regarding|for> {asp} <at the {noun}|here|on site|there|today>.",
            "<The front desk|Reception|The staff|The manager|Customer service> <handles|takes care of|deals with> {asp} <at the {noun}|there|on site|every day|directly>.",
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{families, PROFILES};

    #[test]
    fn every_family_renders_for_all_variants() {
        for p in &PROFILES {
            for kind in families(p) {
                for v in 0..14 {
                    let t = family_text(p, &kind, v);
                    assert!(!t.condition.is_empty() && !t.solution.is_empty());
                    assert_eq!(t.api.is_some(), kind.api(p).is_some(), "{kind:?}");
                    for s in [&t.condition, &t.solution] {
                        assert!(!s.contains('<') && !s.contains('>'), "{s}");
                    }
                }
            }
        }
    }

    #[test]
    fn variants_of_a_family_are_distinct() {
        let p = &PROFILES[3];
        let kind = FamilyKind::Find(vec!["food", "area"]);
        let texts: std::collections::BTreeSet<_> = (0..14)
            .map(|v| family_text(p, &kind, v).condition)
            .collect();
        assert_eq!(texts.len(), 14);
    }

    #[test]
    fn expand_cycles_through_options() {
        let seen: std::collections::BTreeSet<_> =
            (0..3).map(|v| expand("x <a|b|c> y", v, "s")).collect();
        assert_eq!(seen.len(), 3);
        assert_eq!(expand("plain", 4, "s"), "plain");
        let nested = expand("<a <b|c>|a <b|c>>", 1, "s");
        assert!(nested == "a b" || nested == "a c");
    }
}
