//! Seeded generators for synthetic sentences, graphs and noisy predictions.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::data::{Opinion, Polarity, Sentence, SentimentGraph, SpanSet, TokenSet};
use crate::encodings::lossless_precondition;

const FILLER: &[&str] = &[
    "the", "a", "very", "quite", "but", "and", "was", "is", "rather", "staff", "room", "food",
    "view", "price", "ørret", "café", "it", "we", "they", "really", "so", ".", ",", "!",
];

pub fn random_sentence<R: Rng>(
    rng: &mut R,
    sent_id: impl Into<String>,
    n_tokens: usize,
) -> Sentence {
    let words: Vec<&str> = (0..n_tokens)
        .map(|_| *FILLER.choose(rng).unwrap())
        .collect();
    Sentence::new(sent_id, words.join(" "))
}

/// A contiguous span, or with some probability two separated pieces.
fn random_span<R: Rng>(rng: &mut R, n: usize) -> TokenSet {
    let len = rng.random_range(1..=n.min(4));
    let start = rng.random_range(0..=n - len);
    let mut span: TokenSet = (start..start + len).collect();
    if rng.random_bool(0.15) {
        let len2 = rng.random_range(1..=n.min(2));
        let start2 = rng.random_range(0..=n - len2);
        span.extend(start2..start2 + len2);
    }
    span
}

fn random_polarity<R: Rng>(rng: &mut R) -> Polarity {
    Polarity::ALL[rng.random_range(0..3)]
}

/// A graph in the domain of the lossless encodings. Spans may nest, overlap
/// and be discontinuous; expressions with several holders or targets carry
/// the full cross product of opinions.
pub fn random_graph<R: Rng>(rng: &mut R, sent_id: impl Into<String>) -> SentimentGraph {
    let n = rng.random_range(1..=14);
    let sentence = random_sentence(rng, sent_id, n);
    let mut graph = SentimentGraph::new(sentence, Vec::new());
    let n_expressions = rng.random_range(0..=3);
    let mut used_expressions: Vec<TokenSet> = Vec::new();
    for _ in 0..n_expressions {
        let expression = random_span(rng, n);
        if used_expressions.contains(&expression) {
            continue;
        }
        let polarity = random_polarity(rng);
        let pick = |rng: &mut R| -> Vec<TokenSet> {
            let k = [0, 1, 1, 1, 2][rng.random_range(0..5)];
            let mut spans: Vec<TokenSet> = Vec::new();
            for _ in 0..k {
                let s = random_span(rng, n);
                if s != expression && !spans.contains(&s) {
                    spans.push(s);
                }
            }
            if spans.is_empty() {
                spans.push(TokenSet::new());
            }
            spans
        };
        let holders = pick(rng);
        let targets = pick(rng);
        for h in &holders {
            for t in &targets {
                let op = graph.opinion_from_tokens(h, t, &expression, polarity);
                graph.opinions.push(op);
            }
        }
        used_expressions.push(expression);
    }
    graph.opinions.shuffle(rng);
    debug_assert!(lossless_precondition(&graph));
    graph
}

/// Every span is a contiguous block disjoint from all others, each block
/// serves one role only, and each expression has at most one holder and one
/// target. Holder and target blocks may be shared between expressions.
pub fn nesting_free_graph<R: Rng>(rng: &mut R, sent_id: impl Into<String>) -> SentimentGraph {
    let n = rng.random_range(1..=16);
    let sentence = random_sentence(rng, sent_id, n);
    let mut blocks: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        let len = rng.random_range(1..=3).min(n - i);
        if rng.random_bool(0.6) {
            blocks.push((i, i + len));
        }
        i += len;
    }
    blocks.shuffle(rng);
    let mut expressions = Vec::new();
    let mut holders = Vec::new();
    let mut targets = Vec::new();
    for (k, &(s, e)) in blocks.iter().enumerate() {
        let span: TokenSet = (s..e).collect();
        match k % 3 {
            0 => expressions.push(span),
            1 => targets.push(span),
            _ => holders.push(span),
        }
    }
    let mut graph = SentimentGraph::new(sentence, Vec::new());
    let empty = TokenSet::new();
    for e in &expressions {
        let h = if rng.random_bool(0.5) {
            holders.choose(rng).unwrap_or(&empty)
        } else {
            &empty
        };
        let t = if rng.random_bool(0.8) {
            targets.choose(rng).unwrap_or(&empty)
        } else {
            &empty
        };
        let op = graph.opinion_from_tokens(h, t, e, random_polarity(rng));
        graph.opinions.push(op);
    }
    graph
}

pub fn random_corpus<R: Rng>(rng: &mut R, n: usize) -> Vec<SentimentGraph> {
    (0..n).map(|i| random_graph(rng, format!("r{i}"))).collect()
}

pub fn nesting_free_corpus<R: Rng>(rng: &mut R, n: usize) -> Vec<SentimentGraph> {
    (0..n)
        .map(|i| nesting_free_graph(rng, format!("nf{i}")))
        .collect()
}

/// Corruption rates applied by [`noisy_prediction`].
#[derive(Clone, Copy, Debug)]
pub struct Noise {
    pub drop: f64,
    pub flip_polarity: f64,
    pub jitter_span: f64,
    pub spurious: f64,
}

impl Default for Noise {
    fn default() -> Self {
        Noise {
            drop: 0.2,
            flip_polarity: 0.15,
            jitter_span: 0.3,
            spurious: 0.2,
        }
    }
}

fn jitter<R: Rng>(rng: &mut R, span: &TokenSet, n: usize) -> TokenSet {
    if span.is_empty() {
        return span.clone();
    }
    let mut out = span.clone();
    let first = *span.first().unwrap();
    let last = *span.last().unwrap();
    match rng.random_range(0..4) {
        0 if first > 0 => {
            out.insert(first - 1);
        }
        1 if last + 1 < n => {
            out.insert(last + 1);
        }
        2 if out.len() > 1 => {
            out.remove(&first);
        }
        3 if out.len() > 1 => {
            out.remove(&last);
        }
        _ => {}
    }
    out
}

/// A system output derived from `gold` by dropping, relabeling and
/// reshaping opinions and by adding spurious ones.
pub fn noisy_prediction<R: Rng>(
    rng: &mut R,
    gold: &SentimentGraph,
    noise: &Noise,
) -> SentimentGraph {
    let n = gold.sentence.len();
    let mut pred = SentimentGraph::new(gold.sentence.clone(), Vec::new());
    for op in &gold.opinions {
        if rng.random_bool(noise.drop) {
            continue;
        }
        let mut spans = [
            op.holder.tokens().clone(),
            op.target.tokens().clone(),
            op.expression.tokens().clone(),
        ];
        for s in spans.iter_mut() {
            if rng.random_bool(noise.jitter_span) {
                *s = jitter(rng, s, n);
            }
        }
        let polarity = if rng.random_bool(noise.flip_polarity) {
            random_polarity(rng)
        } else {
            op.polarity
        };
        let p = pred.opinion_from_tokens(&spans[0], &spans[1], &spans[2], polarity);
        pred.opinions.push(p);
    }
    if n > 0 && rng.random_bool(noise.spurious) {
        let e = random_span(rng, n);
        let t = if rng.random_bool(0.5) {
            random_span(rng, n)
        } else {
            TokenSet::new()
        };
        let p = pred.opinion_from_tokens(&TokenSet::new(), &t, &e, random_polarity(rng));
        pred.opinions.push(p);
    }
    pred
}

const NAMES: &[&str] = &["Kari", "Ola", "Miren", "Jordi", "Anna", "Peio"];
const NOUNS: &[&str] = &[
    "hotel", "film", "book", "pizza", "concert", "phone", "album", "service",
];
const ADJ: &[&str] = &["old", "new", "cheap", "small", "local", "famous"];
const POSITIVE: &[&str] = &["loved", "enjoyed", "admired", "praised"];
const NEGATIVE: &[&str] = &["hated", "disliked", "criticised", "regretted"];
const NEUTRAL: &[&str] = &["mentioned", "described", "reviewed", "visited"];

/// Template sentences of the form "Kari loved the cheap hotel ." with an
/// optional second clause, used by the overfitting smoke test. No word
/// repeats inside a sentence (except the unanchored "someone"), since a
/// parser without positional information cannot tell equal tokens apart.
pub fn template_corpus<R: Rng>(rng: &mut R, n: usize) -> Vec<SentimentGraph> {
    (0..n)
        .map(|i| template_sentence(rng, format!("t{i}")))
        .collect()
}

fn pick_fresh<R: Rng>(rng: &mut R, pool: &[&str], used: &[String]) -> String {
    let fresh: Vec<&&str> = pool
        .iter()
        .filter(|w| !used.iter().any(|u| u == **w))
        .collect();
    fresh
        .choose(rng)
        .expect("template pools are larger than two clauses")
        .to_string()
}

fn template_sentence<R: Rng>(rng: &mut R, sent_id: String) -> SentimentGraph {
    let mut words: Vec<String> = Vec::new();
    // (holder, target, expression, polarity) as token index sets
    let mut spans: Vec<(TokenSet, TokenSet, TokenSet, Polarity)> = Vec::new();
    let clauses = if rng.random_bool(0.4) { 2 } else { 1 };
    for c in 0..clauses {
        if c > 0 {
            words.push("and".into());
        }
        let holder: TokenSet = if rng.random_bool(0.7) {
            let name = pick_fresh(rng, NAMES, &words);
            words.push(name);
            [words.len() - 1].into()
        } else {
            words.push("someone".into());
            TokenSet::new()
        };
        let polarity = random_polarity(rng);
        let verbs = match polarity {
            Polarity::Positive => POSITIVE,
            Polarity::Negative => NEGATIVE,
            Polarity::Neutral => NEUTRAL,
        };
        let verb = pick_fresh(rng, verbs, &words);
        words.push(verb);
        let expression: TokenSet = [words.len() - 1].into();
        let start = words.len();
        words.push(if c == 0 { "the" } else { "a" }.into());
        if rng.random_bool(0.5) {
            let adj = pick_fresh(rng, ADJ, &words);
            words.push(adj);
        }
        let noun = pick_fresh(rng, NOUNS, &words);
        words.push(noun);
        let target: TokenSet = (start..words.len()).collect();
        spans.push((holder, target, expression, polarity));
    }
    words.push(".".into());
    let sentence = Sentence::new(sent_id, words.join(" "));
    let opinions: Vec<Opinion> = spans
        .iter()
        .map(|(h, t, e, p)| {
            Opinion::new(
                SpanSet::from_tokens(&sentence, h),
                SpanSet::from_tokens(&sentence, t),
                SpanSet::from_tokens(&sentence, e),
                *p,
            )
        })
        .collect();
    SentimentGraph::new(sentence, opinions)
}
