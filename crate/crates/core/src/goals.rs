//! User goal sampling, rendering and checklist parsing.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{self, DomainProfile};
use crate::engine::REFERENCE_ATTRIBUTE;
use crate::model::{
    AttributeName, Constraint, Database, Domain, GoalId, GoalSet, Request, UserGoal,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GoalError {
    #[error("invalid goal config: {0}")]
    Config(String),
    #[error("domain {domain} offers {available} constraint attributes, config demands {demanded}")]
    TooManyConstraints {
        domain: Domain,
        available: usize,
        demanded: usize,
    },
    #[error("no sampleable domain in database")]
    NoDomains,
    #[error("only {found} distinct goals after {attempts} attempts, {wanted} requested")]
    NotEnoughDistinct {
        wanted: usize,
        found: usize,
        attempts: usize,
    },
}

/// Rules removing unreasonable attribute combinations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalRules {
    /// Taxi goals constrain both departure and destination.
    pub taxi_endpoints: bool,
    /// Train goals constrain departure, destination, day and exactly one of
    /// leave/arrive.
    pub train_schedule: bool,
    /// Attributes that may only be requested.
    pub request_only: Vec<String>,
    /// Attributes never sampled.
    pub never: Vec<String>,
}

impl Default for GoalRules {
    fn default() -> Self {
        GoalRules {
            taxi_endpoints: true,
            train_schedule: true,
            request_only: ["reference num.", "phone", "address", "postcode", "id"]
                .map(String::from)
                .to_vec(),
            never: vec!["choice".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GoalConfig {
    pub max_domains: usize,
    /// Weight of goals with 1, 2, … domains.
    pub domain_count_weights: Vec<f64>,
    /// Domains to sample from; empty means every domain in the database.
    pub domains: Vec<String>,
    pub min_constraints: usize,
    pub max_constraints: usize,
    pub max_requests: usize,
    /// Chance that a bookable entity domain includes a booking.
    pub booking_probability: f64,
    /// Chance that an entity domain is constrained by name only.
    pub name_probability: f64,
    pub rules: GoalRules,
}

impl Default for GoalConfig {
    fn default() -> Self {
        GoalConfig {
            max_domains: 4,
            domain_count_weights: vec![0.2, 0.35, 0.3, 0.15],
            domains: vec![],
            min_constraints: 1,
            max_constraints: 2,
            max_requests: 2,
            booking_probability: 0.5,
            name_probability: 0.08,
            rules: GoalRules::default(),
        }
    }
}

impl GoalConfig {
    fn check(&self) -> Result<(), GoalError> {
        let bad = |m: &str| Err(GoalError::Config(m.into()));
        if !(1..=crate::model::MAX_GOAL_DOMAINS).contains(&self.max_domains) {
            return bad("max_domains must be in 1..=4");
        }
        if self.min_constraints == 0 || self.min_constraints > self.max_constraints {
            return bad("need 1 <= min_constraints <= max_constraints");
        }
        if self
            .domain_count_weights
            .iter()
            .take(self.max_domains)
            .all(|w| *w <= 0.0)
            || self
                .domain_count_weights
                .iter()
                .any(|w| !w.is_finite() || *w < 0.0)
        {
            return bad("domain_count_weights need a positive entry within max_domains");
        }
        for p in [self.booking_probability, self.name_probability] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        Ok(())
    }

    fn constrainable(&self, p: &DomainProfile) -> Vec<&'static str> {
        p.searchable
            .iter()
            .copied()
            .filter(|a| *a != "name" && !self.excluded(a))
            .collect()
    }

    fn excluded(&self, attr: &str) -> bool {
        self.rules.request_only.iter().any(|x| x == attr)
            || self.rules.never.iter().any(|x| x == attr)
    }
}

fn candidate_domains<'a>(db: &Database, config: &GoalConfig) -> Vec<&'a DomainProfile> {
    catalog::PROFILES
        .iter()
        .filter(|p| config.domains.is_empty() || config.domains.iter().any(|d| d == p.domain))
        .filter(|p| db.schema(&p.domain()).is_some())
        .filter(|p| p.entity_less || !db.entities(&p.domain()).is_empty())
        .filter(|p| {
            !p.entity_less
                || db
                    .lexicons
                    .get(&p.domain())
                    .is_some_and(|l| l.contains_key("departure"))
        })
        .collect()
}

fn lexicon<'a>(db: &'a Database, domain: &str, attr: &str) -> &'a [String] {
    db.lexicons
        .get(domain)
        .and_then(|l| l.get(attr))
        .map(Vec::as_slice)
        .unwrap_or(&[])
}

/// Samples one goal. Deterministic in `(db, seed, config)`.
pub fn sample_goal(
    db: &Database,
    seed_value: u64,
    config: &GoalConfig,
) -> Result<UserGoal, GoalError> {
    config.check()?;
    let pool = candidate_domains(db, config);
    if pool.is_empty() {
        return Err(GoalError::NoDomains);
    }
    let mut rng = seed::rng(seed_value);
    let limit = config
        .max_domains
        .min(pool.len())
        .min(config.domain_count_weights.len());
    let weights = &config.domain_count_weights[..limit];
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    let mut count = limit;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            count = i + 1;
            break;
        }
        x -= w;
    }
    let chosen: Vec<&DomainProfile> = pool.choose_multiple(&mut rng, count).copied().collect();

    let mut goal = UserGoal {
        id: GoalId::new(format!("g{seed_value:016x}")),
        domains: chosen.iter().map(|p| p.domain()).collect(),
        constraints: vec![],
        requests: vec![],
    };
    for p in chosen {
        sample_domain(db, p, config, &mut rng, &mut goal)?;
    }
    Ok(goal)
}

fn sample_domain(
    db: &Database,
    p: &DomainProfile,
    config: &GoalConfig,
    rng: &mut seed::Rng,
    goal: &mut UserGoal,
) -> Result<(), GoalError> {
    let d = p.domain();
    let mut constraints: Vec<(&str, String)> = Vec::new();
    let mut booking = false;
    if p.entity_less {
        let places = lexicon(db, p.domain, "departure");
        let (from, to) = if config.rules.taxi_endpoints {
            let picked: Vec<&String> = places.choose_multiple(rng, 2).collect();
            (
                picked[0].clone(),
                picked
                    .get(1)
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| picked[0].clone()),
            )
        } else {
            let from = places.choose(rng).cloned().unwrap_or_default();
            (
                from,
                lexicon(db, p.domain, "destination")
                    .choose(rng)
                    .cloned()
                    .unwrap_or_default(),
            )
        };
        constraints.push(("departure", from));
        constraints.push(("destination", to));
        booking = true;
    } else {
        let anchor = db.entities(&d).choose(rng).expect("domain has entities");
        let value = |a: &str| anchor.get(a).unwrap_or_default().to_string();
        if p.domain == "train" && config.rules.train_schedule {
            let time = if rng.gen_bool(0.5) { "leave" } else { "arrive" };
            for a in ["departure", "destination", "day", time] {
                constraints.push((a, value(a)));
            }
        } else if p.searchable.contains(&"name")
            && !config.excluded("name")
            && rng.gen_bool(config.name_probability)
        {
            constraints.push(("name", value("name")));
        } else {
            let available = config.constrainable(p);
            if available.len() < config.min_constraints {
                return Err(GoalError::TooManyConstraints {
                    domain: d,
                    available: available.len(),
                    demanded: config.min_constraints,
                });
            }
            let n =
                rng.gen_range(config.min_constraints..=config.max_constraints.min(available.len()));
            let mut attrs: Vec<&str> = available.choose_multiple(rng, n).copied().collect();
            attrs.sort_by_key(|a| p.searchable.iter().position(|s| s == a));
            for a in attrs {
                constraints.push((a, value(a)));
            }
        }
        if let Some(extra) = p.booking_extra {
            if rng.gen_bool(config.booking_probability) {
                if let Some(v) = lexicon(db, p.domain, extra).choose(rng) {
                    constraints.push((extra, v.clone()));
                    booking = true;
                }
            }
        }
    }
    let requestable: Vec<&str> = p
        .requestable
        .iter()
        .copied()
        .filter(|a| !constraints.iter().any(|(c, _)| c == a))
        .filter(|a| !config.rules.never.iter().any(|x| x == a))
        .filter(|a| booking || *a != REFERENCE_ATTRIBUTE)
        .collect();
    let n = rng.gen_range(0..=config.max_requests.min(requestable.len()));
    let mut requests: Vec<&str> = requestable.choose_multiple(rng, n).copied().collect();
    requests.sort_by_key(|a| p.requestable.iter().position(|s| s == a));

    goal.constraints
        .extend(constraints.into_iter().map(|(a, v)| Constraint {
            domain: d.clone(),
            attribute: AttributeName::from(a),
            value: v,
        }));
    goal.requests.extend(requests.into_iter().map(|a| Request {
        domain: d.clone(),
        attribute: AttributeName::from(a),
    }));
    Ok(())
}

/// Whether the goal asks for a booking in `domain`.
pub fn wants_booking(goal: &UserGoal, domain: &Domain) -> bool {
    let Some(p) = catalog::profile(domain.as_str()) else {
        return false;
    };
    p.entity_less
        || p.booking_extra.is_some_and(|x| {
            goal.constraints_for(domain)
                .any(|c| c.attribute.as_str() == x)
        })
}

/// Samples `count` goals with distinct content. Goal `i` uses a seed derived
/// from `master` and the attempt number.
pub fn sample_goals(
    db: &Database,
    master: u64,
    count: usize,
    config: &GoalConfig,
) -> Result<GoalSet, GoalError> {
    let mut seen = std::collections::HashSet::new();
    let mut goals = Vec::with_capacity(count);
    let max_attempts = count.saturating_mul(20).max(100);
    let mut attempt = 0;
    while goals.len() < count {
        if attempt == max_attempts {
            return Err(GoalError::NotEnoughDistinct {
                wanted: count,
                found: goals.len(),
                attempts: attempt,
            });
        }
        let mut goal = sample_goal(db, seed::derive(master, &format!("goal/{attempt}")), config)?;
        attempt += 1;
        if seen.insert(goal.content_key()) {
            goal.id = GoalId::new(format!("goal-{:05}", goals.len()));
            goals.push(goal);
        }
    }
    Ok(GoalSet { goals })
}

/// One row of the goal checklist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChecklistItem {
    /// A constraint the user must see confirmed.
    Check {
        domain: Domain,
        attribute: AttributeName,
        value: String,
        checked: bool,
    },
    /// A request the user must get answered.
    Fill {
        domain: Domain,
        attribute: AttributeName,
        value: Option<String>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checklist {
    pub items: Vec<ChecklistItem>,
}

impl Checklist {
    pub fn for_goal(goal: &UserGoal) -> Self {
        let mut items = Vec::new();
        for d in &goal.domains {
            items.extend(goal.constraints_for(d).map(|c| ChecklistItem::Check {
                domain: c.domain.clone(),
                attribute: c.attribute.clone(),
                value: c.value.clone(),
                checked: false,
            }));
            items.extend(goal.requests_for(d).map(|r| ChecklistItem::Fill {
                domain: r.domain.clone(),
                attribute: r.attribute.clone(),
                value: None,
            }));
        }
        Checklist { items }
    }

    pub fn is_complete(&self) -> bool {
        self.items.iter().all(|i| match i {
            ChecklistItem::Check { checked, .. } => *checked,
            ChecklistItem::Fill { value, .. } => value.is_some(),
        })
    }

    pub fn checks(&self) -> impl Iterator<Item = &ChecklistItem> {
        self.items
            .iter()
            .filter(|i| matches!(i, ChecklistItem::Check { .. }))
    }

    pub fn fills(&self) -> impl Iterator<Item = &ChecklistItem> {
        self.items
            .iter()
            .filter(|i| matches!(i, ChecklistItem::Fill { .. }))
    }

    /// Table form: one `check` or `fill` row per item, fields separated by
    /// ` | `.
    pub fn to_table(&self) -> String {
        let mut out = String::from("kind | domain | attribute | value\n");
        for item in &self.items {
            let _ = match item {
                ChecklistItem::Check {
                    domain,
                    attribute,
                    value,
                    checked,
                } => {
                    writeln!(
                        out,
                        "check{} | {domain} | {attribute} | {value}",
                        if *checked { "ed" } else { "" }
                    )
                }
                ChecklistItem::Fill {
                    domain,
                    attribute,
                    value,
                } => {
                    writeln!(
                        out,
                        "fill | {domain} | {attribute} | {}",
                        value.as_deref().unwrap_or("")
                    )
                }
            };
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("checklist line {line}: {reason}")]
pub struct ChecklistParseError {
    pub line: usize,
    pub reason: String,
}

/// Parses [`Checklist::to_table`] output.
pub fn parse_checklist(table: &str) -> Result<Checklist, ChecklistParseError> {
    let mut items = Vec::new();
    for (i, line) in table.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: &str| ChecklistParseError {
            line: i + 1,
            reason: reason.into(),
        };
        let fields: Vec<&str> = line.splitn(4, " | ").collect();
        let [kind, domain, attribute, value] = fields[..] else {
            return Err(err("expected 4 fields"));
        };
        let (domain, attribute) = (Domain::from(domain), AttributeName::from(attribute));
        items.push(match kind {
            "check" | "checked" => ChecklistItem::Check {
                domain,
                attribute,
                value: value.to_string(),
                checked: kind == "checked",
            },
            "fill" => ChecklistItem::Fill {
                domain,
                attribute,
                value: (!value.is_empty()).then(|| value.to_string()),
            },
            _ => return Err(err("unknown row kind")),
        });
    }
    Ok(Checklist { items })
}

/// Goal text shown to a user plus its checklist.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedGoal {
    pub description: String,
    pub checklist: Checklist,
    pub table: String,
}

pub fn render_goal(goal: &UserGoal) -> RenderedGoal {
    let mut parts = Vec::new();
    for (i, d) in goal.domains.iter().enumerate() {
        let noun = catalog::profile(d.as_str())
            .map(|p| p.noun)
            .unwrap_or(d.as_str());
        let lead = if i == 0 {
            "You are looking for a"
        } else {
            "You also need a"
        };
        let cons: Vec<String> = goal
            .constraints_for(d)
            .map(|c| {
                format!(
                    "{} {}",
                    catalog::phrasing::attribute_name(c.attribute.as_str()),
                    c.value
                )
            })
            .collect();
        let mut s = format!("{lead} {noun} ({}).", d);
        if !cons.is_empty() {
            s = format!("{lead} {noun} with {}.", cons.join(", "));
        }
        if wants_booking(goal, d) && catalog::profile(d.as_str()).is_some_and(|p| !p.entity_less) {
            s.push_str(" Make a booking.");
        }
        let reqs: Vec<String> = goal
            .requests_for(d)
            .map(|r| catalog::phrasing::attribute_name(r.attribute.as_str()))
            .collect();
        if !reqs.is_empty() {
            let _ = write!(s, " Ask for the {}.", reqs.join(" and the "));
        }
        parts.push(s);
    }
    let checklist = Checklist::for_goal(goal);
    RenderedGoal {
        description: parts.join(" "),
        table: checklist.to_table(),
        checklist,
    }
}

/// Constraint and request sets read back from a checklist.
pub fn checklist_sets(list: &Checklist) -> (Vec<Constraint>, Vec<Request>) {
    let mut cons = Vec::new();
    let mut reqs = Vec::new();
    for item in &list.items {
        match item {
            ChecklistItem::Check {
                domain,
                attribute,
                value,
                ..
            } => cons.push(Constraint {
                domain: domain.clone(),
                attribute: attribute.clone(),
                value: value.clone(),
            }),
            ChecklistItem::Fill {
                domain, attribute, ..
            } => reqs.push(Request {
                domain: domain.clone(),
                attribute: attribute.clone(),
            }),
        }
    }
    (cons, reqs)
}

/// Per-domain counts used by coverage checks.
pub fn attribute_coverage(goals: &[UserGoal]) -> BTreeMap<(Domain, AttributeName), usize> {
    let mut out = BTreeMap::new();
    for g in goals {
        for c in &g.constraints {
            *out.entry((c.domain.clone(), c.attribute.clone()))
                .or_insert(0) += 1;
        }
        for r in &g.requests {
            *out.entry((r.domain.clone(), r.attribute.clone()))
                .or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbgen::{self, DbConfig};
    use crate::model::{Context, Validate};

    fn db() -> Database {
        dbgen::generate(3, &DbConfig::default())
    }

    #[test]
    fn goals_validate_and_keep_c_r_disjoint() {
        let db = db();
        for s in 0..300 {
            let g = sample_goal(&db, s, &GoalConfig::default()).unwrap();
            assert!((1..=4).contains(&g.domains.len()));
            assert!(g.validate(&Context::with_db(&db)).is_empty(), "{g:?}");
        }
    }

    #[test]
    fn same_seed_same_goal() {
        let db = db();
        let c = GoalConfig::default();
        assert_eq!(
            sample_goal(&db, 9, &c).unwrap(),
            sample_goal(&db, 9, &c).unwrap()
        );
    }

    #[test]
    fn minimal_config_gives_one_constraint_no_requests() {
        let db = db();
        let c = GoalConfig {
            max_domains: 1,
            domain_count_weights: vec![1.0],
            domains: vec!["restaurant".into()],
            max_constraints: 1,
            max_requests: 0,
            booking_probability: 0.0,
            name_probability: 0.0,
            ..GoalConfig::default()
        };
        let g = sample_goal(&db, 1, &c).unwrap();
        assert_eq!(g.domains.len(), 1);
        assert_eq!(g.constraints.len(), 1);
        assert!(g.requests.is_empty());
        assert!(g.validate(&Context::with_db(&db)).is_empty());
    }

    #[test]
    fn demanding_too_many_constraints_is_a_config_error() {
        let db = db();
        let c = GoalConfig {
            domains: vec!["hospital".into()],
            min_constraints: 5,
            max_constraints: 5,
            name_probability: 0.0,
            ..GoalConfig::default()
        };
        assert!(matches!(
            sample_goal(&db, 1, &c),
            Err(GoalError::TooManyConstraints { .. })
        ));
    }

    #[test]
    fn japanese_restaurant_checklist() {
        let goal = UserGoal {
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
        };
        let r = render_goal(&goal);
        assert_eq!(r.checklist.checks().count(), 1);
        assert_eq!(r.checklist.fills().count(), 1);
        assert!(r.description.contains("restaurant") && r.description.contains("Japanese"));
        let parsed = parse_checklist(&r.table).unwrap();
        assert_eq!(parsed, r.checklist);
    }

    #[test]
    fn taxi_and_train_rules_hold() {
        let db = db();
        for s in 0..400 {
            let g = sample_goal(&db, s, &GoalConfig::default()).unwrap();
            for d in &g.domains {
                let attrs: Vec<&str> = g.constraints_for(d).map(|c| c.attribute.as_str()).collect();
                match d.as_str() {
                    "taxi" => {
                        assert!(attrs.contains(&"departure") && attrs.contains(&"destination"))
                    }
                    "train" => {
                        assert!(attrs.contains(&"day"));
                        assert_eq!(
                            attrs
                                .iter()
                                .filter(|a| **a == "leave" || **a == "arrive")
                                .count(),
                            1
                        );
                    }
                    _ => {}
                }
                assert!(!attrs.contains(&"choice"));
            }
        }
    }
}
