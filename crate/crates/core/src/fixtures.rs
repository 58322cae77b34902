//! Small hand-built graphs shared by tests, examples and documentation.

use crate::data::{CharRange, Opinion, Polarity, Sentence, SentimentGraph, SpanSet};

pub const NESTED_TARGETS_TEXT: &str = "Nowadays I actually enjoy the bad acting.";

fn span(sentence: &Sentence, ranges: &[(usize, usize)]) -> SpanSet {
    SpanSet::from_ranges(
        sentence,
        ranges.iter().map(|&(s, e)| CharRange::new(s, e)).collect(),
    )
    .expect("fixture spans are valid")
}

/// "Nowadays I actually enjoy the bad acting." with two opinions whose
/// targets nest: I --enjoy(+)--> "the bad acting" and --bad(-)--> "acting".
///
/// The second opinion has no holder.
pub fn nested_targets() -> SentimentGraph {
    let sentence = Sentence::new("nested-targets", NESTED_TARGETS_TEXT);
    let positive = Opinion::new(
        span(&sentence, &[(9, 10)]),
        span(&sentence, &[(26, 40)]),
        span(&sentence, &[(20, 25)]),
        Polarity::Positive,
    );
    let negative = Opinion::new(
        SpanSet::empty(),
        span(&sentence, &[(34, 40)]),
        span(&sentence, &[(30, 33)]),
        Polarity::Negative,
    );
    SentimentGraph::new(sentence, vec![positive, negative])
}
