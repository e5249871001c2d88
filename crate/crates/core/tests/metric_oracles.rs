use std::collections::{BTreeMap, BTreeSet, HashMap};

use mgdial_core::metrics::{
    aer, bleu, instr_sentence_accuracy, sentence_bleu, set_prf, token_tag_accuracy, Prf,
};
use mgdial_core::model::{ApiResult, AttributeMap, BookingStatus, Entity, InstructionId};
use mgdial_core::nlu::codec::Tag;
use mgdial_core::nlu::MatchDecision;

/// Corpus BLEU written from the definition: clipped n-gram counts summed
/// over the corpus, closest reference length (shorter on ties) for the
/// brevity penalty, 1e-9 for empty precisions.
fn reference_bleu(candidates: &[&str], references: &[Vec<&str>]) -> f64 {
    let mut matched = [0.0f64; 4];
    let mut total = [0.0f64; 4];
    let (mut c_len, mut r_len) = (0.0, 0.0);
    for (c, refs) in candidates.iter().zip(references) {
        let c: Vec<&str> = c.split_whitespace().collect();
        let refs: Vec<Vec<&str>> = refs
            .iter()
            .map(|r| r.split_whitespace().collect())
            .collect();
        c_len += c.len() as f64;
        let closest = refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| ((l as i64 - c.len() as i64).abs(), l))
            .unwrap();
        r_len += closest as f64;
        for n in 1..=4 {
            let grams = |t: &[&str]| -> HashMap<String, usize> {
                let mut m = HashMap::new();
                for w in t.windows(n) {
                    *m.entry(w.join(" ")).or_insert(0) += 1;
                }
                m
            };
            let cg = grams(&c);
            let mut best: HashMap<String, usize> = HashMap::new();
            for r in &refs {
                for (g, k) in grams(r) {
                    let e = best.entry(g).or_insert(0);
                    *e = (*e).max(k);
                }
            }
            for (g, k) in &cg {
                matched[n - 1] += (*k).min(best.get(g).copied().unwrap_or(0)) as f64;
                total[n - 1] += *k as f64;
            }
        }
    }
    let logs: f64 = (0..4)
        .map(|i| {
            if matched[i] == 0.0 || total[i] == 0.0 {
                1e-9f64.ln()
            } else {
                (matched[i] / total[i]).ln()
            }
        })
        .sum();
    let bp = if c_len >= r_len {
        1.0
    } else {
        (1.0 - r_len / c_len).exp()
    };
    bp * (logs / 4.0).exp()
}

#[test]
fn bleu_on_the_hand_fixture() {
    let hand = (5.0 / 6.0 * 3.0 / 5.0 * 1.0 / 4.0 * 1e-9f64).powf(0.25);
    let got = sentence_bleu("the cat sat on the mat", &["the cat is on the mat"]);
    assert!((got - hand).abs() < 1e-9, "{got} vs {hand}");
    let short = sentence_bleu("the cat on the mat", &["the cat sat on the mat"]);
    let hand = (1.0f64 - 6.0 / 5.0).exp() * (1.0 * 3.0 / 4.0 * 1.0 / 3.0 * 1e-9f64).powf(0.25);
    assert!((short - hand).abs() < 1e-9, "{short} vs {hand}");
}

#[test]
fn corpus_bleu_matches_the_reference_implementation() {
    let candidates = [
        "i booked a table for two at the river bar",
        "the hotel is in the north",
        "there are 3 cheap restaurants in the center",
        "ok",
    ];
    let references = vec![
        vec![
            "i have booked a table for two at the river bar",
            "a table for two is booked",
        ],
        vec!["the hotel is in the north of town"],
        vec![
            "there are 3 cheap restaurants in the centre",
            "3 cheap places are in the center",
        ],
        vec!["okay then", "ok"],
    ];
    let got = bleu(&candidates, &references).unwrap();
    let want = reference_bleu(&candidates, &references);
    assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    let same: Vec<Vec<&str>> = candidates.iter().map(|c| vec![*c]).collect();
    assert_eq!(bleu(&candidates, &same).unwrap(), 1.0);
}

/// Deterministic 50-turn prediction/gold fixture over 8 instruction ids,
/// including turns where one or both sets are empty.
fn fixture() -> (Vec<BTreeSet<String>>, Vec<BTreeSet<String>>) {
    let mut x: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = || {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        x
    };
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for _ in 0..50 {
        let (p, g) = (next(), next());
        let set = |bits: u64| {
            (0..8)
                .filter(|i| bits >> (i * 3) & 7 == 0)
                .map(|i| format!("m01:f{i}"))
                .collect()
        };
        pred.push(set(p));
        gold.push(set(g));
    }
    (pred, gold)
}

/// Macro P/R/F1 from the convention: both empty scores 1, otherwise empty
/// prediction has precision 0 and empty gold recall 0.
fn reference_prf(pred: &[BTreeSet<String>], gold: &[BTreeSet<String>]) -> (f64, f64, f64) {
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for (a, b) in pred.iter().zip(gold) {
        let (tp, np, ng) = (
            a.iter().filter(|x| b.contains(*x)).count() as f64,
            a.len() as f64,
            b.len() as f64,
        );
        let (tp_, rp) = if np == 0.0 && ng == 0.0 {
            (1.0, 1.0)
        } else {
            (
                if np > 0.0 { tp / np } else { 0.0 },
                if ng > 0.0 { tp / ng } else { 0.0 },
            )
        };
        p += tp_;
        r += rp;
        f += if tp_ + rp > 0.0 {
            2.0 * tp_ * rp / (tp_ + rp)
        } else {
            0.0
        };
    }
    let n = pred.len() as f64;
    (p / n, r / n, f / n)
}

#[test]
fn set_prf_matches_the_reference_on_fifty_turns() {
    let (pred, gold) = fixture();
    assert_eq!(pred.len(), 50);
    assert!(pred
        .iter()
        .zip(&gold)
        .any(|(p, g)| p.is_empty() && g.is_empty()));
    assert!(pred
        .iter()
        .zip(&gold)
        .any(|(p, g)| p.is_empty() != g.is_empty()));
    let got = set_prf(&pred, &gold).unwrap().macro_avg;
    let (p, r, f) = reference_prf(&pred, &gold);
    assert!((got.precision - p).abs() < 1e-12);
    assert!((got.recall - r).abs() < 1e-12);
    assert!((got.f1 - f).abs() < 1e-12);
    assert!(got.f1 > 0.0 && got.f1 < 1.0);
}

#[test]
fn gold_against_gold_is_perfect_everywhere() {
    let (_, gold) = fixture();
    assert_eq!(set_prf(&gold, &gold).unwrap().macro_avg, Prf::PERFECT);
    let decisions: Vec<Vec<MatchDecision>> = gold
        .iter()
        .map(|g| {
            (0..8)
                .map(|i| {
                    let id = InstructionId::new(format!("m01:f{i}"));
                    MatchDecision {
                        selected: g.contains(id.as_str()),
                        instruction: id,
                        score: 0.0,
                    }
                })
                .collect()
        })
        .collect();
    let gold_ids: Vec<BTreeSet<InstructionId>> = gold
        .iter()
        .map(|g| g.iter().map(|s| InstructionId::new(s.clone())).collect())
        .collect();
    assert_eq!(instr_sentence_accuracy(&decisions, &gold_ids).unwrap(), 1.0);
    let tags = vec![vec![Tag::O, Tag::B(1), Tag::I(1), Tag::B(2)], vec![Tag::O]];
    assert_eq!(token_tag_accuracy(&tags, &tags).unwrap(), 1.0);
}

fn booking(reference: &str, details: &[(&str, &str)]) -> ApiResult {
    let details: AttributeMap = details
        .iter()
        .map(|(k, v)| ((*k).into(), (*v).to_string()))
        .collect();
    ApiResult::Add {
        reference: reference.into(),
        details,
    }
}

#[test]
fn aer_fixtures_give_zero_one_and_half() {
    let result = booking("7F3A21C0", &[("name", "River Bar"), ("day", "Monday")]);
    let all = aer(
        &["Booked River Bar on Monday, reference 7F3A21C0."],
        &[vec![result.clone()]],
    )
    .unwrap();
    assert_eq!(all.rate, 0.0);
    let none = aer(&["Sorry, something went wrong."], &[vec![result]]).unwrap();
    assert_eq!(none.rate, 1.0);
    let half = aer(
        &["Done, your number is 7F3A21C0."],
        &[vec![booking("7F3A21C0", &[("day", "Monday")])]],
    )
    .unwrap();
    assert_eq!(half.rate, 0.5);
    let cancelled = ApiResult::Delete {
        reference: "00000001".into(),
        status: BookingStatus::Cancelled,
    };
    let skipped = aer(
        &["Hello.", "Cancelled 00000001."],
        &[vec![], vec![cancelled]],
    )
    .unwrap();
    assert_eq!((skipped.rate, skipped.included_turns), (0.0, 1));
}

#[test]
fn find_results_expect_the_anchor_entity_and_the_count() {
    let entity = |name: &str, area: &str| Entity {
        domain: "restaurant".into(),
        attributes: BTreeMap::from([
            ("name".into(), name.to_string()),
            ("area".into(), area.to_string()),
        ]),
    };
    let found = ApiResult::Find {
        count: 2,
        entities: vec![entity("Golden Wok", "north"), entity("Pasta Bay", "south")],
    };
    let report = aer(&["There are 2; Pasta Bay is in the south."], &[vec![found]]).unwrap();
    assert_eq!(report.rate, 0.0);
}
