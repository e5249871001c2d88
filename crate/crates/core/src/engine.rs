//! API execution against the database with find carryover and a booking
//! ledger. Entities are never modified; bookings live in the session state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    ApiCall, ApiId, ApiResult, ApiSpec, Argument, AttributeMap, AttributeName, BookingRecord,
    BookingStatus, CarryoverState, Context, Database, Domain, Entity, Operation, Validate,
    Violation,
};
use crate::text;

pub const REFERENCE_ATTRIBUTE: &str = "reference num.";
/// Default cap on entities returned by a find; the full count is always kept.
pub const DEFAULT_FIND_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("unknown api '{0}'")]
    UnknownApi(ApiId),
    #[error("invalid call: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidCall(Vec<Violation>),
    #[error("attribute '{attribute}' is not in the schema of domain '{domain}'")]
    Schema {
        domain: Domain,
        attribute: AttributeName,
    },
    #[error("{api} is missing arguments: {}", .missing.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(", "))]
    MissingArguments {
        api: ApiId,
        missing: Vec<AttributeName>,
    },
    #[error("no active booking with reference number '{0}'")]
    NotFound(String),
    #[error("no {domain} entity with {attribute} '{value}'")]
    UnknownEntity {
        domain: Domain,
        attribute: AttributeName,
        value: String,
    },
    #[error("{0} is not a find api")]
    NotFind(ApiId),
    #[error("range query on '{attribute}' ('{value}') is unsupported; find matches exact values")]
    RangeQuery {
        attribute: AttributeName,
        value: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub find_limit: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            find_limit: DEFAULT_FIND_LIMIT,
        }
    }
}

/// Per-dialogue database state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionDbState {
    pub carryover: CarryoverState,
    pub bookings: Vec<BookingRecord>,
    pub ref_counter: u64,
    pub seed: u64,
}

const CARS: [&str; 8] = [
    "white Toyota",
    "black Volkswagen",
    "red Skoda",
    "grey Ford",
    "blue Honda",
    "silver Audi",
    "yellow Tesla",
    "black Lexus",
];

impl SessionDbState {
    pub fn new(seed: u64) -> Self {
        SessionDbState {
            seed,
            ..Default::default()
        }
    }

    /// Next reference number: eight upper-case hex digits. Distinct counters
    /// give distinct numbers for a fixed seed.
    pub fn next_reference(&mut self) -> String {
        self.ref_counter += 1;
        let mask = (self.seed ^ (self.seed >> 32)) as u32;
        let code = (self.ref_counter as u32).wrapping_mul(0x9E37_79B1) ^ mask;
        format!("{code:08X}")
    }

    pub fn active_references(&self) -> Vec<&str> {
        self.bookings
            .iter()
            .filter(|b| b.status == BookingStatus::Active)
            .map(|b| b.reference.as_str())
            .collect()
    }

    pub fn reset(&mut self, domain: &Domain) {
        self.carryover.reset(domain);
    }

    fn active_booking_mut(&mut self, reference: &str) -> Result<&mut BookingRecord, EngineError> {
        let wanted = text::normalize(reference);
        self.bookings
            .iter_mut()
            .find(|b| b.status == BookingStatus::Active && text::normalize(&b.reference) == wanted)
            .ok_or_else(|| EngineError::NotFound(reference.to_string()))
    }

    fn vehicle(&self) -> (String, String) {
        let mix = self
            .seed
            .wrapping_add(self.ref_counter.wrapping_mul(0x2545_F491_4F6C_DD1D));
        let car = CARS[(mix % CARS.len() as u64) as usize].to_string();
        let phone = format!("07{:09}", (mix >> 8) % 1_000_000_000);
        (car, phone)
    }
}

fn spec<'a>(db: &'a Database, call: &ApiCall) -> Result<&'a ApiSpec, EngineError> {
    db.api(&call.api)
        .ok_or_else(|| EngineError::UnknownApi(call.api.clone()))
}

fn check_call(db: &Database, call: &ApiCall) -> Result<(), EngineError> {
    let violations = call.validate(&Context::with_db(db));
    if violations.is_empty() {
        Ok(())
    } else {
        Err(EngineError::InvalidCall(violations))
    }
}

fn check_schema(
    db: &Database,
    domain: &Domain,
    attribute: &AttributeName,
) -> Result<(), EngineError> {
    if db.schema(domain).is_some_and(|s| s.contains(attribute)) {
        Ok(())
    } else {
        Err(EngineError::Schema {
            domain: domain.clone(),
            attribute: attribute.clone(),
        })
    }
}

/// Carryover for the call's domain overlaid with the call's arguments. The
/// carryover is updated to the returned query.
pub fn effective_query(
    state: &mut CarryoverState,
    spec: &ApiSpec,
    call: &ApiCall,
    db: &Database,
) -> Result<AttributeMap, EngineError> {
    if spec.operation != Operation::Find {
        return Err(EngineError::NotFind(spec.id.clone()));
    }
    for a in &call.args {
        check_schema(db, &spec.domain, &a.attribute)?;
    }
    let mut query = state.get(&spec.domain).cloned().unwrap_or_default();
    for a in &call.args {
        query.insert(a.attribute.clone(), a.value.clone());
    }
    state.domains.insert(spec.domain.clone(), query.clone());
    Ok(query)
}

/// Entities of `domain` matching every attribute of `query` exactly after
/// normalization.
pub fn matching<'a>(db: &'a Database, domain: &Domain, query: &AttributeMap) -> Vec<&'a Entity> {
    let wanted: Vec<(&AttributeName, String)> =
        query.iter().map(|(k, v)| (k, text::normalize(v))).collect();
    db.entities(domain)
        .iter()
        .filter(|e| {
            wanted.iter().all(|(k, v)| {
                e.attributes
                    .get(*k)
                    .is_some_and(|x| &text::normalize(x) == v)
            })
        })
        .collect()
}

fn project(entity: &Entity, keep: &[&AttributeName]) -> Entity {
    Entity {
        domain: entity.domain.clone(),
        attributes: entity
            .attributes
            .iter()
            .filter(|(k, _)| keep.contains(k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
    }
}

fn required_args(spec: &ApiSpec, call: &ApiCall) -> Result<(), EngineError> {
    let missing: Vec<AttributeName> = spec
        .inputs
        .iter()
        .filter(|i| {
            i.required
                && call
                    .arg(i.attribute.as_str())
                    .is_none_or(|v| v.trim().is_empty())
        })
        .map(|i| i.attribute.clone())
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(EngineError::MissingArguments {
            api: spec.id.clone(),
            missing,
        })
    }
}

pub fn execute(
    call: &ApiCall,
    db: &Database,
    state: &mut SessionDbState,
) -> Result<ApiResult, EngineError> {
    execute_with(call, db, state, &EngineConfig::default())
}

/// Executes `call`. Finds match on the carried-over query and return entities
/// projected onto the API outputs and the call's own arguments, truncated to
/// `config.find_limit`.
fn is_number(s: &str) -> bool {
    let s = s.trim();
    !s.is_empty()
        && s.chars().any(|c| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_digit() || c == '.')
}

/// Comparison or interval values such as `< 50`, `at least 4` or `10-20`.
pub fn is_range_query(value: &str) -> bool {
    let v = value.trim().to_lowercase();
    if v.starts_with(['<', '>', '≤', '≥']) {
        return true;
    }
    const PREFIXES: [&str; 8] = [
        "under ",
        "over ",
        "below ",
        "above ",
        "at least ",
        "at most ",
        "less than ",
        "more than ",
    ];
    if PREFIXES
        .iter()
        .any(|p| v.strip_prefix(p).is_some_and(is_number))
    {
        return true;
    }
    if let Some(rest) = v.strip_prefix("between ") {
        if let Some((a, b)) = rest.split_once(" and ") {
            return is_number(a) && is_number(b);
        }
    }
    [" to ", "-"].iter().any(|sep| {
        v.split_once(sep)
            .is_some_and(|(a, b)| is_number(a) && is_number(b))
    })
}

pub fn execute_with(
    call: &ApiCall,
    db: &Database,
    state: &mut SessionDbState,
    config: &EngineConfig,
) -> Result<ApiResult, EngineError> {
    let spec = spec(db, call)?;
    check_call(db, call)?;
    match spec.operation {
        Operation::Find => {
            if let Some(a) = call.args.iter().find(|a| is_range_query(&a.value)) {
                return Err(EngineError::RangeQuery {
                    attribute: a.attribute.clone(),
                    value: a.value.clone(),
                });
            }
            let query = effective_query(&mut state.carryover, spec, call, db)?;
            let keep: Vec<&AttributeName> = spec
                .outputs
                .iter()
                .chain(call.args.iter().map(|a| &a.attribute))
                .collect();
            let hits = matching(db, &spec.domain, &query);
            let entities = hits
                .iter()
                .take(config.find_limit)
                .map(|e| project(e, &keep))
                .collect();
            Ok(ApiResult::Find {
                count: hits.len(),
                entities,
            })
        }
        Operation::Add => {
            required_args(spec, call)?;
            let entity_less = db.is_entity_less(&spec.domain);
            if !entity_less {
                if let Some(key) = spec.inputs.first() {
                    let value = call.arg(key.attribute.as_str()).unwrap_or_default();
                    let query = AttributeMap::from([(key.attribute.clone(), value.to_string())]);
                    if matching(db, &spec.domain, &query).is_empty() {
                        return Err(EngineError::UnknownEntity {
                            domain: spec.domain.clone(),
                            attribute: key.attribute.clone(),
                            value: value.to_string(),
                        });
                    }
                }
            }
            let mut details: AttributeMap = call
                .args
                .iter()
                .map(|a| (a.attribute.clone(), a.value.clone()))
                .collect();
            let (car, phone) = state.vehicle();
            for out in &spec.outputs {
                match out.as_str() {
                    "car" => {
                        details.insert(out.clone(), car.clone());
                    }
                    "phone" => {
                        details.insert(out.clone(), phone.clone());
                    }
                    _ => {}
                }
            }
            let reference = state.next_reference();
            state.bookings.push(BookingRecord {
                reference: reference.clone(),
                domain: spec.domain.clone(),
                attributes: details.clone(),
                status: BookingStatus::Active,
            });
            Ok(ApiResult::Add { reference, details })
        }
        Operation::Edit => {
            required_args(spec, call)?;
            let reference = call
                .arg(REFERENCE_ATTRIBUTE)
                .unwrap_or_default()
                .to_string();
            let record = state.active_booking_mut(&reference)?;
            let mut details = AttributeMap::new();
            for a in call
                .args
                .iter()
                .filter(|a| a.attribute.as_str() != REFERENCE_ATTRIBUTE)
            {
                record
                    .attributes
                    .insert(a.attribute.clone(), a.value.clone());
                details.insert(a.attribute.clone(), a.value.clone());
            }
            Ok(ApiResult::Edit {
                reference: record.reference.clone(),
                status: record.status,
                details,
            })
        }
        Operation::Delete => {
            required_args(spec, call)?;
            let reference = call
                .arg(REFERENCE_ATTRIBUTE)
                .unwrap_or_default()
                .to_string();
            let record = state.active_booking_mut(&reference)?;
            record.status = BookingStatus::Cancelled;
            Ok(ApiResult::Delete {
                reference: record.reference.clone(),
                status: record.status,
            })
        }
    }
}

/// One executed call as recorded in the call log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub turn: usize,
    pub call: ApiCall,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CallRecord {
    pub fn args(&self) -> &[Argument] {
        &self.call.args
    }
}

/// Executes `call` and appends the outcome to `log`.
pub fn execute_logged(
    call: &ApiCall,
    db: &Database,
    state: &mut SessionDbState,
    config: &EngineConfig,
    turn: usize,
    log: &mut Vec<CallRecord>,
) -> Result<ApiResult, EngineError> {
    let result = execute_with(call, db, state, config);
    log.push(CallRecord {
        turn,
        call: call.clone(),
        result_digest: result.as_ref().ok().map(ApiResult::digest),
        error: result.as_ref().err().map(ToString::to_string),
    });
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbgen::{self, DbConfig};

    #[test]
    fn comparisons_and_intervals_are_range_queries() {
        for v in [
            "< 50",
            ">4",
            "at least 4",
            "under 20.5",
            "10-20",
            "1 to 3",
            "between 2 and 5",
        ] {
            assert!(is_range_query(v), "{v}");
        }
        for v in [
            "cheap",
            "09:15",
            "4",
            "cb2 1tn",
            "tr-1234",
            "to the centre",
            "a-b",
        ] {
            assert!(!is_range_query(v), "{v}");
        }
    }

    #[test]
    fn generated_values_are_never_range_queries() {
        let db = dbgen::generate(7, &DbConfig::default());
        for domain in db.domains() {
            for e in db.entities(domain) {
                for v in e.attributes.values() {
                    assert!(!is_range_query(v), "{domain}: {v}");
                }
            }
        }
    }

    #[test]
    fn range_find_is_rejected_without_touching_carryover() {
        let db = dbgen::generate(7, &DbConfig::uniform(10));
        let spec = db
            .apis
            .iter()
            .find(|a| a.operation == Operation::Find && !a.inputs.is_empty())
            .unwrap();
        let call = ApiCall {
            api: spec.id.clone(),
            instruction: None,
            args: vec![Argument {
                attribute: spec.inputs[0].attribute.clone(),
                value: "at most 3".into(),
                span: None,
            }],
        };
        let mut state = SessionDbState::new(1);
        let err = execute(&call, &db, &mut state).unwrap_err();
        assert!(matches!(err, EngineError::RangeQuery { .. }), "{err}");
        assert!(state.carryover.get(&spec.domain).is_none());
    }
}
