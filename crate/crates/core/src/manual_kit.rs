//! Manual compilation from seed families, the paraphrase-diversity gate and
//! the instruction search index.
//!
//! Seed API descriptions mark attribute mentions as `[[attribute|mention
//! text]]`; compilation strips the markup and records each mention's char
//! range.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{self, phrasing, PROFILES};
use crate::metrics::{NgramCounts, NgramStats, MAX_NGRAM};
use crate::model::{
    ApiId, ApiSpec, AttributeName, Domain, FamilyId, Instruction, InstructionApi, InstructionId,
    Manual, ManualId, Mention,
};
use crate::text;

/// Number of bundled manuals.
pub const BUNDLED_MANUALS: usize = 14;
/// Self-BLEU at or above this rejects a family.
pub const SELF_BLEU_LIMIT: f64 = 0.8;

/// One instruction family with its paraphrase variants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedFamily {
    pub family: FamilyId,
    pub domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api: Option<ApiId>,
    pub variants: Vec<SeedVariant>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedVariant {
    pub condition: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_text: Option<String>,
    pub solution: String,
}

impl SeedVariant {
    /// Variant text as it appears in a compiled manual.
    pub fn plain_text(&self) -> String {
        let api = self.api_text.as_deref().map(|t| {
            parse_mentions(t)
                .map(|(s, _)| s)
                .unwrap_or_else(|_| t.into())
        });
        match api {
            Some(api) => format!("{} {} {}", self.condition, api, self.solution),
            None => format!("{} {}", self.condition, self.solution),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("{family}: unknown api '{api}'")]
    UnknownApi { family: FamilyId, api: ApiId },
    #[error("{family}: {mentions} attribute mentions for an api with {inputs} inputs")]
    Arity {
        family: FamilyId,
        mentions: usize,
        inputs: usize,
    },
    #[error("{family}: mention order {found:?} differs from api inputs {expected:?}")]
    Order {
        family: FamilyId,
        found: Vec<AttributeName>,
        expected: Vec<AttributeName>,
    },
    #[error("{family}: malformed mention markup at char {at}")]
    Markup { family: FamilyId, at: usize },
    #[error("{family}: api description without api or api without description")]
    ApiText { family: FamilyId },
    #[error("{family}: no variant {set} (family has {available})")]
    MissingVariant {
        family: FamilyId,
        set: usize,
        available: usize,
    },
    #[error("{family}: empty condition or solution")]
    Empty { family: FamilyId },
    #[error("family {0} appears twice")]
    DuplicateFamily(FamilyId),
}

/// Strips `[[attr|text]]` markup. Returns the plain text and the mentions,
/// or the char offset of the first malformed marker.
pub fn parse_mentions(marked: &str) -> Result<(String, Vec<Mention>), usize> {
    let mut plain = String::new();
    let mut mentions = Vec::new();
    let mut len = 0;
    let mut rest = marked;
    let mut consumed = 0;
    while let Some(open) = rest.find("[[") {
        let head = &rest[..open];
        if head.contains("]]") {
            return Err(consumed + text::char_len(&head[..head.find("]]").unwrap_or(0)]));
        }
        plain.push_str(head);
        len += text::char_len(head);
        let at = consumed + text::char_len(head);
        let body_end = rest[open..].find("]]").ok_or(at)?;
        let body = &rest[open + 2..open + body_end];
        let (attr, surface) = body.split_once('|').ok_or(at)?;
        if attr.is_empty() || surface.is_empty() || surface.contains("[[") {
            return Err(at);
        }
        let n = text::char_len(surface);
        mentions.push(Mention {
            attribute: AttributeName::from(attr),
            start: len,
            end: len + n,
        });
        plain.push_str(surface);
        len += n;
        consumed += text::char_len(&rest[..open + body_end + 2]);
        rest = &rest[open + body_end + 2..];
    }
    if rest.contains("]]") {
        return Err(consumed + text::char_len(&rest[..rest.find("]]").unwrap_or(0)]));
    }
    plain.push_str(rest);
    Ok((plain, mentions))
}

/// Builds manual `id` from variant `set` of each seed family.
pub fn compile_manual(
    id: &ManualId,
    seeds: &[SeedFamily],
    set: usize,
    apis: &[ApiSpec],
) -> Result<Manual, CompileError> {
    let mut instructions = Vec::with_capacity(seeds.len());
    let mut seen = std::collections::BTreeSet::new();
    for seed in seeds {
        let family = seed.family.clone();
        if !seen.insert(family.clone()) {
            return Err(CompileError::DuplicateFamily(family));
        }
        let variant = seed
            .variants
            .get(set)
            .ok_or_else(|| CompileError::MissingVariant {
                family: family.clone(),
                set,
                available: seed.variants.len(),
            })?;
        if variant.condition.trim().is_empty() || variant.solution.trim().is_empty() {
            return Err(CompileError::Empty { family });
        }
        let api = match (&seed.api, &variant.api_text) {
            (None, None) => None,
            (Some(api_id), Some(marked)) => {
                let spec = apis.iter().find(|a| &a.id == api_id).ok_or_else(|| {
                    CompileError::UnknownApi {
                        family: family.clone(),
                        api: api_id.clone(),
                    }
                })?;
                let (plain, mentions) =
                    parse_mentions(marked).map_err(|at| CompileError::Markup {
                        family: family.clone(),
                        at,
                    })?;
                if mentions.len() != spec.arity() {
                    return Err(CompileError::Arity {
                        family,
                        mentions: mentions.len(),
                        inputs: spec.arity(),
                    });
                }
                let found: Vec<AttributeName> =
                    mentions.iter().map(|m| m.attribute.clone()).collect();
                let expected: Vec<AttributeName> = spec.input_attributes().cloned().collect();
                if found != expected {
                    return Err(CompileError::Order {
                        family,
                        found,
                        expected,
                    });
                }
                Some(InstructionApi {
                    api: api_id.clone(),
                    text: plain,
                    mentions,
                })
            }
            _ => return Err(CompileError::ApiText { family }),
        };
        instructions.push(Instruction {
            id: InstructionId::compose(id, &seed.family),
            family: seed.family.clone(),
            domain: seed.domain.clone(),
            condition: variant.condition.clone(),
            solution: variant.solution.clone(),
            api,
        });
    }
    Ok(Manual {
        id: id.clone(),
        instructions,
    })
}

pub fn manual_id(set: usize) -> ManualId {
    ManualId::new(format!("m{:02}", set + 1))
}

/// The bundled seed families of every domain with all their variants.
pub fn bundled_seeds() -> Vec<SeedFamily> {
    let mut out = Vec::with_capacity(catalog::manual_size());
    for p in &PROFILES {
        for kind in catalog::families(p) {
            let variants = (0..BUNDLED_MANUALS)
                .map(|v| {
                    let t = phrasing::family_text(p, &kind, v);
                    SeedVariant {
                        condition: t.condition,
                        api_text: t.api,
                        solution: t.solution,
                    }
                })
                .collect();
            out.push(SeedFamily {
                family: kind.family_id(p.domain),
                domain: p.domain(),
                api: kind.api(p),
                variants,
            });
        }
    }
    out
}

/// The bundled manuals `m01`..`m14`.
pub fn bundled_manuals() -> Vec<Manual> {
    let seeds = bundled_seeds();
    let apis = catalog::api_catalog();
    (0..BUNDLED_MANUALS)
        .map(|set| {
            compile_manual(&manual_id(set), &seeds, set, &apis).expect("bundled seeds compile")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GateError {
    #[error("need at least 2 variants, got {0}")]
    TooFewVariants(usize),
    #[error("variant {0} has no tokens")]
    Degenerate(usize),
}

/// N-gram overlap between two variants, the first as candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOverlap {
    pub candidate: usize,
    pub reference: usize,
    pub matches: [usize; MAX_NGRAM],
    pub totals: [usize; MAX_NGRAM],
    pub bleu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    /// Mean over variants of each variant's BLEU against all the others.
    pub self_bleu: f64,
    pub accepted: bool,
    pub per_variant: Vec<f64>,
    pub pairs: Vec<PairOverlap>,
}

/// Self-BLEU diversity check. Accepts iff self-BLEU is below
/// [`SELF_BLEU_LIMIT`].
pub fn paraphrase_gate<S: AsRef<str>>(variants: &[S]) -> Result<GateReport, GateError> {
    if variants.len() < 2 {
        return Err(GateError::TooFewVariants(variants.len()));
    }
    let tokens: Vec<Vec<String>> = variants.iter().map(|v| text::terms(v.as_ref())).collect();
    if let Some(i) = tokens.iter().position(Vec::is_empty) {
        return Err(GateError::Degenerate(i));
    }
    let counts: Vec<NgramCounts<'_>> = tokens.iter().map(|t| NgramCounts::new(t)).collect();
    let per_variant: Vec<f64> = (0..counts.len())
        .map(|i| {
            let refs: Vec<&NgramCounts<'_>> = counts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, c)| c)
                .collect();
            NgramStats::from_counts(&counts[i], &refs).bleu()
        })
        .collect();
    let mut pairs = Vec::new();
    for (i, ci) in counts.iter().enumerate() {
        for (j, cj) in counts.iter().enumerate() {
            if i != j {
                let s = NgramStats::from_counts(ci, &[cj]);
                pairs.push(PairOverlap {
                    candidate: i,
                    reference: j,
                    matches: s.matches,
                    totals: s.totals,
                    bleu: s.bleu(),
                });
            }
        }
    }
    let self_bleu = per_variant.iter().sum::<f64>() / per_variant.len() as f64;
    Ok(GateReport {
        self_bleu,
        accepted: self_bleu < SELF_BLEU_LIMIT,
        per_variant,
        pairs,
    })
}

/// Gate result for one family across a set of manuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyGate {
    pub family: FamilyId,
    pub report: GateReport,
}

/// Runs the gate on every family shared by `manuals`, using each
/// instruction's full text.
pub fn gate_manuals(manuals: &[Manual]) -> Result<Vec<FamilyGate>, GateError> {
    let mut variants: BTreeMap<&FamilyId, Vec<String>> = BTreeMap::new();
    for m in manuals {
        for i in &m.instructions {
            variants.entry(&i.family).or_default().push(i.full_text());
        }
    }
    variants
        .into_iter()
        .map(|(family, texts)| {
            Ok(FamilyGate {
                family: family.clone(),
                report: paraphrase_gate(&texts)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SearchError {
    #[error("k must be positive")]
    ZeroK,
}

/// TF-IDF index over instruction condition and solution text.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    ids: Vec<InstructionId>,
    idf: HashMap<String, f64>,
    docs: Vec<HashMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub instruction: InstructionId,
    pub score: f64,
}

/// Unit-length TF-IDF vector of `terms`; unknown terms are dropped.
pub fn tfidf_vector(terms: &[String], idf: &HashMap<String, f64>) -> HashMap<String, f64> {
    let mut v: HashMap<String, f64> = HashMap::new();
    for t in terms {
        if let Some(w) = idf.get(t) {
            *v.entry(t.clone()).or_insert(0.0) += w;
        }
    }
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.values_mut().for_each(|x| *x /= norm);
    }
    v
}

pub fn cosine(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .filter_map(|(k, x)| large.get(k).map(|y| x * y))
        .sum()
}

/// Smoothed inverse document frequency: `ln((1 + N) / (1 + df)) + 1`.
pub fn idf_table(docs: &[Vec<String>]) -> HashMap<String, f64> {
    let mut df: HashMap<&str, usize> = HashMap::new();
    for d in docs {
        let mut uniq: Vec<&str> = d.iter().map(String::as_str).collect();
        uniq.sort_unstable();
        uniq.dedup();
        for t in uniq {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let n = docs.len() as f64;
    df.into_iter()
        .map(|(t, c)| (t.to_string(), ((1.0 + n) / (1.0 + c as f64)).ln() + 1.0))
        .collect()
}

impl SearchIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Scores of every instruction against `query`, in index order.
    pub fn scores(&self, query: &str) -> Vec<SearchHit> {
        let q = tfidf_vector(&text::terms(query), &self.idf);
        self.ids
            .iter()
            .zip(&self.docs)
            .map(|(id, d)| SearchHit {
                instruction: id.clone(),
                score: cosine(&q, d),
            })
            .collect()
    }
}

pub fn build_index(manual: &Manual) -> SearchIndex {
    let docs: Vec<Vec<String>> = manual
        .instructions
        .iter()
        .map(|i| text::terms(&format!("{} {}", i.condition, i.solution)))
        .collect();
    let idf = idf_table(&docs);
    SearchIndex {
        ids: manual.instructions.iter().map(|i| i.id.clone()).collect(),
        docs: docs.iter().map(|d| tfidf_vector(d, &idf)).collect(),
        idf,
    }
}

/// Top `k` instructions by cosine similarity; ties broken by instruction id.
pub fn search(index: &SearchIndex, query: &str, k: usize) -> Result<Vec<SearchHit>, SearchError> {
    if k == 0 {
        return Err(SearchError::ZeroK);
    }
    let mut hits = index.scores(query);
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.instruction.cmp(&b.instruction))
    });
    hits.truncate(k);
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mentions_are_parsed_with_char_ranges() {
        let (plain, m) = parse_mentions("Book [[name|the hôtel]] on [[day|the day]].").unwrap();
        assert_eq!(plain, "Book the hôtel on the day.");
        assert_eq!((m[0].start, m[0].end), (5, 14));
        assert_eq!(text::char_slice(&plain, m[1].start, m[1].end), "the day");
        assert!(parse_mentions("bad [[name the]]").is_err());
        assert!(parse_mentions("bad ]] text").is_err());
    }

    #[test]
    fn bundled_manuals_have_516_instructions() {
        let manuals = bundled_manuals();
        assert_eq!(manuals.len(), 14);
        assert!(manuals.iter().all(|m| m.instructions.len() == 516));
    }

    #[test]
    fn zero_k_is_rejected() {
        let m = &bundled_manuals()[0];
        assert_eq!(search(&build_index(m), "taxi", 0), Err(SearchError::ZeroK));
    }
}
