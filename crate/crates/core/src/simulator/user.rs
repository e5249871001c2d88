//! Agenda-based simulated user: plans dialogue acts from its goal, realizes
//! them with the language pack and tracks which constraints the agent has
//! confirmed and which requests it has answered.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::SimConfig;
use crate::catalog::lang::LanguagePack;
use crate::catalog::phrasing::FAQ_ASPECTS;
use crate::catalog::template::{self, Filled};
use crate::catalog::{self, DomainProfile, FamilyKind};
use crate::engine::{self, REFERENCE_ATTRIBUTE};
use crate::goals::wants_booking;
use crate::metrics::value_present;
use crate::model::{
    ApiResult, AttributeMap, AttributeName, Constraint, Database, Domain, Request, UserGoal,
};
use crate::seed::Rng;
use crate::text;

/// An attribute value pair said by the user.
pub type Said = (AttributeName, String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InformStyle {
    First,
    More,
    Correction,
}

/// One user dialogue act.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "act", rename_all = "kebab-case")]
pub enum UserAct {
    Greet,
    /// Search constraints; `more` when further constraints of the domain follow.
    Inform {
        domain: Domain,
        values: Vec<Said>,
        style: InformStyle,
        more: bool,
    },
    /// Constraints of which one is wrong and yields no result.
    Misinform {
        domain: Domain,
        values: Vec<Said>,
        style: InformStyle,
    },
    /// Booking of the entity on offer, with or without the booking value.
    Book {
        domain: Domain,
        extra: Option<Said>,
    },
    /// Taxi order with one or both endpoints.
    Taxi {
        domain: Domain,
        given: Vec<Said>,
    },
    /// Value the agent asked for in order to book.
    Give {
        domain: Domain,
        value: Said,
    },
    Request {
        domain: Domain,
        attribute: AttributeName,
    },
    Edit {
        domain: Domain,
        value: Said,
    },
    Cancel {
        domain: Domain,
    },
    Faq {
        domain: Domain,
        intent: usize,
        aspect: usize,
    },
    Farewell,
}

impl UserAct {
    pub fn domain(&self) -> Option<&Domain> {
        match self {
            UserAct::Greet | UserAct::Farewell => None,
            UserAct::Inform { domain, .. }
            | UserAct::Misinform { domain, .. }
            | UserAct::Book { domain, .. }
            | UserAct::Taxi { domain, .. }
            | UserAct::Give { domain, .. }
            | UserAct::Request { domain, .. }
            | UserAct::Edit { domain, .. }
            | UserAct::Cancel { domain }
            | UserAct::Faq { domain, .. } => Some(domain),
        }
    }
}

/// Acts of one user turn; `closes` names the domain this turn finishes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTurn {
    pub acts: Vec<UserAct>,
    pub closes: Option<Domain>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerConstraint {
    pub constraint: Constraint,
    pub expressed: bool,
    pub checked: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerRequest {
    pub request: Request,
    pub filled: Option<String>,
}

/// The user's goal table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserLedger {
    pub constraints: Vec<LedgerConstraint>,
    pub requests: Vec<LedgerRequest>,
}

impl UserLedger {
    pub fn new(goal: &UserGoal) -> Self {
        UserLedger {
            constraints: goal
                .constraints
                .iter()
                .map(|c| LedgerConstraint {
                    constraint: c.clone(),
                    expressed: false,
                    checked: false,
                })
                .collect(),
            requests: goal
                .requests
                .iter()
                .map(|r| LedgerRequest {
                    request: r.clone(),
                    filled: None,
                })
                .collect(),
        }
    }

    /// All constraints checked and all requests filled.
    pub fn is_complete(&self) -> bool {
        self.constraints.iter().all(|c| c.checked)
            && self.requests.iter().all(|r| r.filled.is_some())
    }

    pub fn express(&mut self, domain: &Domain, attribute: &AttributeName, value: &str) {
        for c in &mut self.constraints {
            let k = &c.constraint;
            if &k.domain == domain
                && &k.attribute == attribute
                && text::normalize(&k.value) == text::normalize(value)
            {
                c.expressed = true;
            }
        }
    }

    /// Reads an agent response: expressed constraints whose value appears
    /// are checked; open requests are filled from results of their domain
    /// whose value appears.
    pub fn observe(&mut self, response: &str, results: &[(Domain, ApiResult)]) {
        for c in self
            .constraints
            .iter_mut()
            .filter(|c| c.expressed && !c.checked)
        {
            c.checked = value_present(response, &c.constraint.value);
        }
        for r in self.requests.iter_mut().filter(|r| r.filled.is_none()) {
            let attr = r.request.attribute.as_str();
            for (_, result) in results.iter().rev().filter(|(d, _)| *d == r.request.domain) {
                let candidates: Vec<&str> = match result {
                    ApiResult::Find { entities, .. } => {
                        entities.iter().filter_map(|e| e.get(attr)).collect()
                    }
                    ApiResult::Add { reference, details }
                    | ApiResult::Edit {
                        reference, details, ..
                    } => {
                        if attr == REFERENCE_ATTRIBUTE {
                            vec![reference.as_str()]
                        } else {
                            details.get(attr).map(String::as_str).into_iter().collect()
                        }
                    }
                    ApiResult::Delete { .. } => vec![],
                };
                if let Some(v) = candidates.into_iter().find(|v| value_present(response, v)) {
                    r.filled = Some(v.to_string());
                    break;
                }
            }
        }
    }
}

fn profile(domain: &Domain) -> &'static DomainProfile {
    catalog::profile(domain.as_str()).expect("goal domains are bundled domains")
}

fn said(c: &Constraint) -> Said {
    (c.attribute.clone(), c.value.clone())
}

/// A value for `attribute` that makes `query` match nothing in `domain`.
fn wrong_value(
    db: &Database,
    domain: &Domain,
    query: &AttributeMap,
    attribute: &AttributeName,
    rng: &mut Rng,
) -> Option<String> {
    let correct = query.get(attribute).map(|v| text::normalize(v));
    let mut pool: Vec<String> = db
        .domains()
        .flat_map(|d| db.value_set(d, attribute))
        .collect();
    pool.sort();
    pool.dedup();
    pool.shuffle(rng);
    pool.into_iter()
        .filter(|v| Some(text::normalize(v)) != correct)
        .find(|v| {
            let mut q = query.clone();
            q.insert(attribute.clone(), v.clone());
            engine::matching(db, domain, &q).is_empty()
        })
}

fn other_value(
    db: &Database,
    domain: &Domain,
    attribute: &AttributeName,
    current: Option<&str>,
    rng: &mut Rng,
) -> Option<String> {
    let pool: Vec<String> = db
        .value_set(domain, attribute)
        .into_iter()
        .filter(|v| current.is_none_or(|c| text::normalize(c) != text::normalize(v)))
        .collect();
    pool.choose(rng).cloned()
}

/// Plans the user's turns for `goal`.
pub fn plan(
    goal: &UserGoal,
    db: &Database,
    config: &SimConfig,
    rng: &mut Rng,
) -> VecDeque<PlannedTurn> {
    let mut turns = VecDeque::new();
    if rng.gen_bool(config.greeting_probability) {
        turns.push_back(PlannedTurn {
            acts: vec![UserAct::Greet],
            closes: None,
        });
    }
    for domain in &goal.domains {
        let start = turns.len();
        plan_domain(goal, domain, db, config, rng, &mut turns);
        if turns.len() > start {
            turns.back_mut().expect("domain planned a turn").closes = Some(domain.clone());
        }
    }
    turns
}

fn plan_domain(
    goal: &UserGoal,
    domain: &Domain,
    db: &Database,
    config: &SimConfig,
    rng: &mut Rng,
    turns: &mut VecDeque<PlannedTurn>,
) {
    let p = profile(domain);
    let turn = |acts: Vec<UserAct>| PlannedTurn { acts, closes: None };
    let booking = wants_booking(goal, domain);
    let lookups: Vec<AttributeName> = goal
        .requests_for(domain)
        .filter(|r| catalog::lookup_attributes(p).contains(&r.attribute.as_str()))
        .map(|r| r.attribute.clone())
        .collect();

    if p.entity_less {
        let ends: Vec<Said> = goal.constraints_for(domain).map(said).collect();
        if ends.len() == 2 && rng.gen_bool(config.book_ask_probability) {
            let (first, second) = if rng.gen_bool(0.5) { (1, 0) } else { (0, 1) };
            turns.push_back(turn(vec![UserAct::Taxi {
                domain: domain.clone(),
                given: vec![ends[first].clone()],
            }]));
            turns.push_back(turn(vec![UserAct::Give {
                domain: domain.clone(),
                value: ends[second].clone(),
            }]));
        } else {
            turns.push_back(turn(vec![UserAct::Taxi {
                domain: domain.clone(),
                given: ends,
            }]));
        }
        plan_after_booking(domain, p, db, config, rng, turns);
        return;
    }

    let search: Vec<&Constraint> = goal
        .constraints_for(domain)
        .filter(|c| p.searchable.contains(&c.attribute.as_str()))
        .collect();
    let chunks: Vec<Vec<&Constraint>> = if search.len() > 2 {
        search.chunks(2).map(<[_]>::to_vec).collect()
    } else if search.len() == 2 && rng.gen_bool(config.split_inform_probability) {
        search.iter().map(|c| vec![*c]).collect()
    } else {
        vec![search.clone()]
    };
    let mut query = AttributeMap::new();
    for (n, chunk) in chunks.iter().enumerate() {
        let style = if n == 0 {
            InformStyle::First
        } else {
            InformStyle::More
        };
        let more = n + 1 < chunks.len();
        let values: Vec<Said> = chunk.iter().map(|c| said(c)).collect();
        let mut detoured = false;
        if rng.gen_bool(config.detour_probability) {
            let mut q = query.clone();
            q.extend(values.iter().cloned());
            let (attr, _) = values.last().expect("chunks are nonempty");
            if let Some(wrong) = wrong_value(db, domain, &q, attr, rng) {
                let mut bad = values.clone();
                bad.last_mut().expect("nonempty").1 = wrong;
                turns.push_back(turn(vec![UserAct::Misinform {
                    domain: domain.clone(),
                    values: bad,
                    style,
                }]));
                turns.push_back(turn(vec![UserAct::Inform {
                    domain: domain.clone(),
                    values: values.clone(),
                    style: InformStyle::Correction,
                    more,
                }]));
                detoured = true;
            }
        }
        if !detoured {
            turns.push_back(turn(vec![UserAct::Inform {
                domain: domain.clone(),
                values: values.clone(),
                style,
                more,
            }]));
        }
        query.extend(values);
    }

    let requests: Vec<UserAct> = lookups
        .iter()
        .map(|a| UserAct::Request {
            domain: domain.clone(),
            attribute: a.clone(),
        })
        .collect();
    if booking {
        let extra_attr = p
            .booking_extra
            .expect("booking domains have an extra input");
        let extra = goal
            .constraints_for(domain)
            .find(|c| c.attribute.as_str() == extra_attr)
            .map(said)
            .expect("booking goals carry the booking value");
        let combine = rng.gen_bool(config.combine_requests_probability);
        let mut last = if rng.gen_bool(config.book_ask_probability) {
            turns.push_back(turn(vec![UserAct::Book {
                domain: domain.clone(),
                extra: None,
            }]));
            vec![UserAct::Give {
                domain: domain.clone(),
                value: extra,
            }]
        } else {
            vec![UserAct::Book {
                domain: domain.clone(),
                extra: Some(extra),
            }]
        };
        if combine {
            last.extend(requests);
            turns.push_back(turn(last));
        } else {
            turns.push_back(turn(last));
            if !requests.is_empty() {
                turns.push_back(turn(requests));
            }
        }
        plan_after_booking(domain, p, db, config, rng, turns);
    } else if !requests.is_empty() {
        turns.push_back(turn(requests));
    }
    let faqs: Vec<(usize, usize)> = catalog::families(p)
        .into_iter()
        .filter_map(|k| match k {
            FamilyKind::Faq(i, a) => Some((i, a)),
            _ => None,
        })
        .collect();
    if !faqs.is_empty() && rng.gen_bool(config.faq_probability) {
        let (intent, aspect) = *faqs.choose(rng).expect("nonempty");
        turns.push_back(turn(vec![UserAct::Faq {
            domain: domain.clone(),
            intent,
            aspect,
        }]));
    }
}

fn plan_after_booking(
    domain: &Domain,
    p: &DomainProfile,
    db: &Database,
    config: &SimConfig,
    rng: &mut Rng,
    turns: &mut VecDeque<PlannedTurn>,
) {
    let x: f64 = rng.gen();
    if x < config.edit_probability && !p.editable.is_empty() {
        let attr = AttributeName::from(*p.editable.choose(rng).expect("nonempty"));
        if let Some(v) = other_value(db, domain, &attr, None, rng) {
            turns.push_back(PlannedTurn {
                acts: vec![UserAct::Edit {
                    domain: domain.clone(),
                    value: (attr, v),
                }],
                closes: None,
            });
        }
    } else if x < config.edit_probability + config.cancel_probability {
        turns.push_back(PlannedTurn {
            acts: vec![UserAct::Cancel {
                domain: domain.clone(),
            }],
            closes: None,
        });
    }
}

/// A realized user turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserTurn {
    pub acts: Vec<UserAct>,
    pub closes: Option<Domain>,
    pub utterance: Filled,
}

/// The simulated user.
#[derive(Debug, Clone)]
pub struct UserSim<'a> {
    goal: &'a UserGoal,
    pack: &'a LanguagePack,
    pub ledger: UserLedger,
    agenda: VecDeque<PlannedTurn>,
    mentioned: BTreeSet<Domain>,
    finished: bool,
}

impl<'a> UserSim<'a> {
    pub fn new(
        goal: &'a UserGoal,
        db: &Database,
        pack: &'a LanguagePack,
        config: &SimConfig,
        rng: &mut Rng,
    ) -> Self {
        UserSim {
            goal,
            pack,
            ledger: UserLedger::new(goal),
            agenda: plan(goal, db, config, rng),
            mentioned: BTreeSet::new(),
            finished: false,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Reads the last agent response, then produces the next utterance.
    /// Returns `None` once the user has said goodbye.
    pub fn user_step(
        &mut self,
        last: Option<(&str, &[(Domain, ApiResult)])>,
        rng: &mut Rng,
    ) -> Option<UserTurn> {
        if let Some((response, results)) = last {
            self.ledger.observe(response, results);
        }
        if self.finished {
            return None;
        }
        let planned = match self.agenda.pop_front() {
            Some(t) => t,
            None if self.ledger.is_complete() => {
                self.finished = true;
                PlannedTurn {
                    acts: vec![UserAct::Farewell],
                    closes: None,
                }
            }
            None => self.repair(),
        };
        for act in &planned.acts {
            self.mark_expressed(act);
        }
        let utterance = self.realize(&planned.acts, rng);
        Some(UserTurn {
            acts: planned.acts,
            closes: planned.closes,
            utterance,
        })
    }

    /// Restates the first unconfirmed constraint or repeats the first open
    /// request.
    fn repair(&self) -> PlannedTurn {
        let goal = self.goal;
        if let Some(c) = self.ledger.constraints.iter().find(|c| !c.checked) {
            let domain = c.constraint.domain.clone();
            let p = profile(&domain);
            let act = if p.entity_less {
                UserAct::Taxi {
                    domain: domain.clone(),
                    given: goal.constraints_for(&domain).map(said).collect(),
                }
            } else if p.booking_extra == Some(c.constraint.attribute.as_str()) {
                UserAct::Book {
                    domain: domain.clone(),
                    extra: Some(said(&c.constraint)),
                }
            } else {
                UserAct::Inform {
                    domain,
                    values: vec![said(&c.constraint)],
                    style: InformStyle::More,
                    more: false,
                }
            };
            return PlannedTurn {
                acts: vec![act],
                closes: None,
            };
        }
        let r = self
            .ledger
            .requests
            .iter()
            .find(|r| r.filled.is_none())
            .expect("incomplete ledger has an open item");
        let domain = r.request.domain.clone();
        let p = profile(&domain);
        let act = if catalog::lookup_attributes(p).contains(&r.request.attribute.as_str()) {
            UserAct::Request {
                domain,
                attribute: r.request.attribute.clone(),
            }
        } else if p.entity_less {
            UserAct::Taxi {
                domain: domain.clone(),
                given: goal.constraints_for(&domain).map(said).collect(),
            }
        } else {
            let extra = p
                .booking_extra
                .and_then(|x| {
                    goal.constraints_for(&domain)
                        .find(|c| c.attribute.as_str() == x)
                })
                .map(said);
            UserAct::Book { domain, extra }
        };
        PlannedTurn {
            acts: vec![act],
            closes: None,
        }
    }

    fn mark_expressed(&mut self, act: &UserAct) {
        let mut express = |d: &Domain, values: &[Said]| {
            for (a, v) in values {
                self.ledger.express(d, a, v);
            }
        };
        match act {
            UserAct::Inform { domain, values, .. } | UserAct::Misinform { domain, values, .. } => {
                express(domain, values)
            }
            UserAct::Taxi { domain, given } => express(domain, given),
            UserAct::Book {
                domain,
                extra: Some(v),
            }
            | UserAct::Give { domain, value: v } => express(domain, std::slice::from_ref(v)),
            _ => {}
        }
    }

    fn realize(&mut self, acts: &[UserAct], rng: &mut Rng) -> Filled {
        let mut out = Filled::default();
        for act in acts {
            let piece = self.realize_act(act, rng);
            out.append(" ", piece);
        }
        out
    }

    fn realize_act(&mut self, act: &UserAct, rng: &mut Rng) -> Filled {
        let pack = self.pack;
        let pick = |xs: &[String], rng: &mut Rng| xs.choose(rng).cloned().unwrap_or_default();
        let plain = |s: String| Filled {
            text: s,
            slots: vec![],
        };
        match act {
            UserAct::Greet => plain(pick(&pack.greetings, rng)),
            UserAct::Farewell => plain(pick(&pack.farewells, rng)),
            UserAct::Inform {
                domain,
                values,
                style,
                ..
            }
            | UserAct::Misinform {
                domain,
                values,
                style,
            } => {
                let first = !self.mentioned.contains(domain);
                self.mentioned.insert(domain.clone());
                let templates = match style {
                    InformStyle::Correction => &pack.correction,
                    _ if first => &pack.inform_first,
                    _ => &pack.inform_more,
                };
                let t = pick(templates, rng);
                fill_values(pack, &t, domain, values, &[], rng)
            }
            UserAct::Taxi { domain, given } => {
                self.mentioned.insert(domain.clone());
                let t = pick(&pack.inform_first, rng);
                fill_values(pack, &t, domain, given, &[], rng)
            }
            UserAct::Book {
                domain,
                extra: Some(v),
            } => fill_values(
                pack,
                &pick(&pack.book_with, rng),
                domain,
                std::slice::from_ref(v),
                &[],
                rng,
            ),
            UserAct::Book { extra: None, .. } => plain(pick(&pack.book_without, rng)),
            UserAct::Give { domain, value } => fill_values(
                pack,
                &pick(&pack.give_value, rng),
                domain,
                std::slice::from_ref(value),
                &[],
                rng,
            ),
            UserAct::Request { domain, attribute } => {
                let name = pack.attribute_name(attribute.as_str()).to_string();
                fill_values(
                    pack,
                    &pick(&pack.request, rng),
                    domain,
                    &[],
                    &[("attr", name)],
                    rng,
                )
            }
            UserAct::Edit { domain, value } => fill_values(
                pack,
                &pick(&pack.edit, rng),
                domain,
                std::slice::from_ref(value),
                &[],
                rng,
            ),
            UserAct::Cancel { domain } => {
                fill_values(pack, &pick(&pack.cancel, rng), domain, &[], &[], rng)
            }
            UserAct::Faq {
                domain,
                intent,
                aspect,
            } => {
                let qs = pack
                    .faq_questions
                    .get(*intent)
                    .map(Vec::as_slice)
                    .unwrap_or(&[]);
                let asp = FAQ_ASPECTS[*aspect].to_string();
                fill_values(pack, &pick(qs, rng), domain, &[], &[("asp", asp)], rng)
            }
        }
    }
}

/// Fills `{values}` with value phrases, `{noun}` and the given words. Only
/// attribute values are kept as slots.
fn fill_values(
    pack: &LanguagePack,
    template: &str,
    domain: &Domain,
    values: &[Said],
    words: &[(&str, String)],
    rng: &mut Rng,
) -> Filled {
    let phrases: Vec<String> = values
        .iter()
        .map(|(a, _)| {
            pack.value_phrases(a.as_str())
                .choose(rng)
                .cloned()
                .unwrap_or_default()
        })
        .collect();
    let t = template.replace("{values}", &phrases.join(" and "));
    let noun = pack.noun(domain.as_str()).to_string();
    let mut filled = template::fill(&t, |a| {
        if a.as_str() == "noun" {
            return Some(noun.clone());
        }
        if let Some((_, w)) = words.iter().find(|(k, _)| *k == a.as_str()) {
            return Some(w.clone());
        }
        values.iter().find(|(k, _)| k == a).map(|(_, v)| v.clone())
    })
    .unwrap_or_else(|a| Filled {
        text: t.replace(&format!("{{{a}}}"), ""),
        slots: vec![],
    });
    filled
        .slots
        .retain(|s| values.iter().any(|(k, _)| *k == s.attribute));
    filled
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbgen::{self, DbConfig};
    use crate::seed;

    fn goal() -> UserGoal {
        UserGoal {
            id: "g".into(),
            domains: vec!["restaurant".into()],
            constraints: vec![Constraint {
                domain: "restaurant".into(),
                attribute: "food".into(),
                value: "Japanese".into(),
            }],
            requests: vec![Request {
                domain: "restaurant".into(),
                attribute: "address".into(),
            }],
        }
    }

    #[test]
    fn fresh_user_mentions_the_food_constraint() {
        let db = dbgen::generate(1, &DbConfig::uniform(30));
        let pack = LanguagePack::english();
        let g = goal();
        let config = SimConfig {
            greeting_probability: 0.0,
            detour_probability: 0.0,
            faq_probability: 0.0,
            ..Default::default()
        };
        let mut rng = seed::rng(3);
        let mut user = UserSim::new(&g, &db, &pack, &config, &mut rng);
        let t = user.user_step(None, &mut rng).unwrap();
        assert!(
            t.utterance.text.contains("Japanese"),
            "{}",
            t.utterance.text
        );
        assert!(t.utterance.text.contains("restaurant"));
        assert_eq!(t.utterance.slots.len(), 1);
        assert!(user.ledger.constraints[0].expressed);
    }

    #[test]
    fn confirmed_constraint_leads_to_the_address_question() {
        let db = dbgen::generate(1, &DbConfig::uniform(30));
        let pack = LanguagePack::english();
        let g = goal();
        let config = SimConfig {
            greeting_probability: 0.0,
            detour_probability: 0.0,
            faq_probability: 0.0,
            ..Default::default()
        };
        let mut rng = seed::rng(3);
        let mut user = UserSim::new(&g, &db, &pack, &config, &mut rng);
        user.user_step(None, &mut rng).unwrap();
        let t = user
            .user_step(Some(("We have 3 Japanese places.", &[])), &mut rng)
            .unwrap();
        assert!(user.ledger.constraints[0].checked);
        assert_eq!(
            t.acts,
            vec![UserAct::Request {
                domain: "restaurant".into(),
                attribute: "address".into()
            }]
        );
        assert!(t.utterance.text.contains("address"));
    }

    #[test]
    fn response_with_the_address_fills_the_request() {
        let mut ledger = UserLedger::new(&goal());
        let e = crate::model::Entity {
            domain: "restaurant".into(),
            attributes: [("address".into(), "12 Mill Road".to_string())].into(),
        };
        let results = [(
            Domain::from("restaurant"),
            ApiResult::Find {
                count: 1,
                entities: vec![e],
            },
        )];
        ledger.observe("It is at 12 Mill Road.", &results);
        assert_eq!(ledger.requests[0].filled.as_deref(), Some("12 Mill Road"));
        assert!(!ledger.is_complete());
    }
}
