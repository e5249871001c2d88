use mgdial_core::model::{Span, Speaker, Utterance};
use mgdial_core::nlu::codec::{alphabet, decode, encode, history_tokens, IndexedSpan, Tag};
use proptest::prelude::*;

const WORDS: [&str; 8] = ["alpha", "b", "café", "d3", "echo", "fox", "über", "x"];

/// Utterances of 1..=10 words and, per utterance, sorted disjoint token
/// ranges with argument indices.
type Case = (usize, Vec<Vec<usize>>, Vec<Vec<(usize, usize, usize)>>);

fn case() -> impl Strategy<Value = Case> {
    (1usize..=3).prop_flat_map(|max_args| {
        let utterance = proptest::collection::vec(0..WORDS.len(), 1..=10);
        proptest::collection::vec(utterance, 1..=4).prop_flat_map(move |utts| {
            let cuts: Vec<_> = utts
                .iter()
                .map(|u| {
                    let n = u.len();
                    proptest::collection::vec(
                        (0..n, 1..=3usize, 1..=max_args, any::<bool>()),
                        0..=3,
                    )
                    .prop_map(move |raw| disjoint(n, raw))
                })
                .collect();
            (Just(max_args), Just(utts), cuts)
        })
    })
}

/// Keeps the ranges that fit after the previous one.
fn disjoint(n: usize, mut raw: Vec<(usize, usize, usize, bool)>) -> Vec<(usize, usize, usize)> {
    raw.sort();
    let mut out = Vec::new();
    let mut free = 0;
    for (start, len, k, keep) in raw {
        let end = (start + len).min(n);
        if keep && start >= free && start < end {
            out.push((start, end, k));
            free = end;
        }
    }
    out
}

fn texts(utts: &[Vec<usize>]) -> Vec<String> {
    utts.iter()
        .map(|u| u.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" "))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn decode_inverts_encode((max_args, utts, cuts) in case()) {
        let texts = texts(&utts);
        let history: Vec<Utterance<'_>> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Utterance { turn: i / 2, speaker: if i % 2 == 0 { Speaker::User } else { Speaker::Agent }, text: t })
            .collect();
        let tokens = history_tokens(&history);
        let mut spans: Vec<IndexedSpan> = Vec::new();
        let mut offset = 0;
        for (u, ranges) in cuts.iter().enumerate() {
            let toks: Vec<_> = tokens.iter().skip(offset).take(utts[u].len()).collect();
            for &(a, b, k) in ranges {
                let (first, last) = (toks[a].span, toks[b - 1].span);
                spans.push((k, Span { turn: first.turn, speaker: first.speaker, start: first.start, end: last.end }));
            }
            offset += utts[u].len();
        }
        let seq = encode(&spans, &tokens, max_args).unwrap();
        prop_assert!(seq.is_well_formed());
        let sigma = alphabet(max_args);
        prop_assert_eq!(sigma.len(), 1 + 2 * max_args);
        prop_assert!(seq.tags.iter().all(|t| sigma.contains(t)));
        prop_assert_eq!(decode(&seq), spans);
    }
}

#[test]
fn out_of_range_index_and_overlap_are_rejected() {
    let text = "one two three";
    let h = [Utterance {
        turn: 0,
        speaker: Speaker::User,
        text,
    }];
    let tokens = history_tokens(&h);
    let span = |s, e| Span {
        turn: 0,
        speaker: Speaker::User,
        start: s,
        end: e,
    };
    assert!(encode(&[(3, span(0, 3))], &tokens, 2).is_err());
    assert!(encode(&[(0, span(0, 3))], &tokens, 2).is_err());
    assert!(encode(&[(1, span(0, 7)), (2, span(4, 13))], &tokens, 2).is_err());
    assert!(encode(&[(1, span(3, 4))], &tokens, 2).is_err());
    let seq = encode(&[(2, span(4, 13))], &tokens, 2).unwrap();
    assert_eq!(seq.tags, vec![Tag::O, Tag::B(2), Tag::I(2)]);
}
