//! Sentences, opinion tuples and the JSON dataset format.
//!
//! All character offsets count Unicode scalar values, matching the offsets
//! used by the distributed datasets.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use serde_json::Value;

use crate::error::DataError;

/// Sorted set of token positions within a sentence.
pub type TokenSet = BTreeSet<usize>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, char_start: usize, char_end: usize) -> Self {
        Token {
            text: text.into(),
            char_start,
            char_end,
        }
    }

    fn overlaps(&self, range: CharRange) -> bool {
        self.char_start < range.end && range.start < self.char_end
    }
}

/// Splits text into maximal runs of non-whitespace characters.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;
    let mut len = 0;
    for (idx, ch) in text.chars().enumerate() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(Token::new(std::mem::take(&mut current), start, idx));
            }
        } else {
            if current.is_empty() {
                start = idx;
            }
            current.push(ch);
        }
        len = idx + 1;
    }
    if !current.is_empty() {
        tokens.push(Token::new(current, start, len));
    }
    tokens
}

/// Half-open character interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharRange {
    pub start: usize,
    pub end: usize,
}

impl CharRange {
    pub fn new(start: usize, end: usize) -> Self {
        CharRange { start, end }
    }
}

impl fmt::Display for CharRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.end)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    pub sent_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    char_len: usize,
}

impl Sentence {
    pub fn new(sent_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        let char_len = text.chars().count();
        Sentence {
            sent_id: sent_id.into(),
            text,
            tokens,
            char_len,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Length of the text in characters.
    pub fn char_len(&self) -> usize {
        self.char_len
    }

    /// Text between two character offsets, if they lie within bounds.
    pub fn slice(&self, range: CharRange) -> Option<&str> {
        if range.start > range.end || range.end > self.char_len {
            return None;
        }
        let byte_at = |char_idx: usize| {
            self.text
                .char_indices()
                .nth(char_idx)
                .map(|(b, _)| b)
                .unwrap_or(self.text.len())
        };
        Some(&self.text[byte_at(range.start)..byte_at(range.end)])
    }

    /// Token positions whose characters overlap any of the ranges by at least one character.
    pub fn span_to_tokens(&self, ranges: &[CharRange]) -> Result<TokenSet, DataError> {
        let mut out = TokenSet::new();
        for &range in ranges {
            if range.start > range.end || range.end > self.char_len {
                return Err(DataError::OutOfBounds {
                    sent_id: self.sent_id.clone(),
                    range,
                    len: self.char_len,
                });
            }
            out.extend(
                self.tokens
                    .iter()
                    .enumerate()
                    .filter(|(_, tok)| tok.overlaps(range))
                    .map(|(i, _)| i),
            );
        }
        Ok(out)
    }

    /// Character ranges covering maximal runs of consecutive token positions.
    pub fn tokens_to_ranges(&self, tokens: &TokenSet) -> Vec<CharRange> {
        let mut ranges = Vec::new();
        let mut run: Option<(usize, usize)> = None;
        for &idx in tokens.iter().filter(|&&i| i < self.tokens.len()) {
            run = match run {
                Some((first, last)) if last + 1 == idx => Some((first, idx)),
                Some((first, last)) => {
                    ranges.push(CharRange::new(
                        self.tokens[first].char_start,
                        self.tokens[last].char_end,
                    ));
                    Some((idx, idx))
                }
                None => Some((idx, idx)),
            };
        }
        if let Some((first, last)) = run {
            ranges.push(CharRange::new(
                self.tokens[first].char_start,
                self.tokens[last].char_end,
            ));
        }
        ranges
    }
}

/// A possibly empty, possibly discontinuous span of text.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SpanSet {
    ranges: Vec<CharRange>,
    tokens: TokenSet,
}

impl SpanSet {
    pub fn empty() -> Self {
        SpanSet::default()
    }

    /// Builds a span from character ranges, which must be non-empty, sorted and disjoint.
    pub fn from_ranges(sentence: &Sentence, ranges: Vec<CharRange>) -> Result<Self, DataError> {
        for (i, r) in ranges.iter().enumerate() {
            if r.start >= r.end {
                return Err(DataError::InvalidRange {
                    sent_id: sentence.sent_id.clone(),
                    range: *r,
                    reason: "zero-length or reversed range",
                });
            }
            if i > 0 && ranges[i - 1].end > r.start {
                return Err(DataError::InvalidRange {
                    sent_id: sentence.sent_id.clone(),
                    range: *r,
                    reason: "ranges overlap or are out of order",
                });
            }
        }
        let tokens = sentence.span_to_tokens(&ranges)?;
        Ok(SpanSet { ranges, tokens })
    }

    /// Builds the span covering exactly the given tokens.
    pub fn from_tokens(sentence: &Sentence, tokens: &TokenSet) -> Self {
        let tokens: TokenSet = tokens
            .iter()
            .copied()
            .filter(|&i| i < sentence.len())
            .collect();
        SpanSet {
            ranges: sentence.tokens_to_ranges(&tokens),
            tokens,
        }
    }

    pub fn ranges(&self) -> &[CharRange] {
        &self.ranges
    }

    pub fn tokens(&self) -> &TokenSet {
        &self.tokens
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// First and last token positions.
    pub fn first_token(&self) -> Option<usize> {
        self.tokens.first().copied()
    }

    pub fn last_token(&self) -> Option<usize> {
        self.tokens.last().copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Neutral, Polarity::Negative];

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "Positive",
            Polarity::Neutral => "Neutral",
            Polarity::Negative => "Negative",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Polarity> {
        Polarity::ALL.get(idx).copied()
    }
}

impl std::str::FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "Positive" => Ok(Polarity::Positive),
            "Neutral" => Ok(Polarity::Neutral),
            "Negative" => Ok(Polarity::Negative),
            other => Err(format!("unknown polarity {other:?}")),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The three span roles of an opinion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Holder,
    Target,
    Expression,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Holder, Role::Target, Role::Expression];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Holder => "holder",
            Role::Target => "target",
            Role::Expression => "expression",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One (holder, target, expression, polarity) tuple.
///
/// Holder and target may be empty; the expression never is. The intensity
/// string is carried through serialization and otherwise ignored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Opinion {
    pub holder: SpanSet,
    pub target: SpanSet,
    pub expression: SpanSet,
    pub polarity: Polarity,
    pub intensity: Option<String>,
}

/// Order-insensitive identity of an opinion: token sets plus polarity.
pub type OpinionKey = (TokenSet, TokenSet, TokenSet, Polarity);

impl Opinion {
    pub fn new(holder: SpanSet, target: SpanSet, expression: SpanSet, polarity: Polarity) -> Self {
        Opinion {
            holder,
            target,
            expression,
            polarity,
            intensity: None,
        }
    }

    pub fn span(&self, role: Role) -> &SpanSet {
        match role {
            Role::Holder => &self.holder,
            Role::Target => &self.target,
            Role::Expression => &self.expression,
        }
    }

    pub fn key(&self) -> OpinionKey {
        (
            self.holder.tokens().clone(),
            self.target.tokens().clone(),
            self.expression.tokens().clone(),
            self.polarity,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SentimentGraph {
    pub sentence: Sentence,
    pub opinions: Vec<Opinion>,
}

impl SentimentGraph {
    pub fn new(sentence: Sentence, opinions: Vec<Opinion>) -> Self {
        SentimentGraph { sentence, opinions }
    }

    /// Opinion keys in sorted order.
    pub fn opinion_keys(&self) -> Vec<OpinionKey> {
        let mut keys: Vec<_> = self.opinions.iter().map(Opinion::key).collect();
        keys.sort();
        keys
    }

    /// Multiset equality of opinions, comparing spans as token sets.
    pub fn same_opinions(&self, other: &SentimentGraph) -> bool {
        self.opinion_keys() == other.opinion_keys()
    }

    /// Builds an opinion whose spans are given as token positions.
    pub fn opinion_from_tokens(
        &self,
        holder: &TokenSet,
        target: &TokenSet,
        expression: &TokenSet,
        polarity: Polarity,
    ) -> Opinion {
        Opinion::new(
            SpanSet::from_tokens(&self.sentence, holder),
            SpanSet::from_tokens(&self.sentence, target),
            SpanSet::from_tokens(&self.sentence, expression),
            polarity,
        )
    }
}

const HOLDER_KEY: &str = "Source";
const TARGET_KEY: &str = "Target";
const EXPRESSION_KEY: &str = "Polar_expression";
const POLARITY_KEY: &str = "Polarity";
const INTENSITY_KEY: &str = "Intensity";

/// Parses a JSON array of annotated sentences.
pub fn parse_dataset(json_text: &str) -> Result<Vec<SentimentGraph>, DataError> {
    let value: Value = serde_json::from_str(json_text)?;
    let items = value.as_array().ok_or(DataError::NotAnArray)?;
    items
        .iter()
        .enumerate()
        .map(|(idx, item)| parse_sentence(idx, item))
        .collect()
}

fn parse_sentence(idx: usize, item: &Value) -> Result<SentimentGraph, DataError> {
    let sent_id = item
        .get("sent_id")
        .and_then(Value::as_str)
        .ok_or_else(|| DataError::MissingField {
            sent_id: format!("#{idx}"),
            field: "sent_id".into(),
        })?
        .to_string();
    let missing = |field: &str| DataError::MissingField {
        sent_id: sent_id.clone(),
        field: field.into(),
    };
    let text = item
        .get("text")
        .and_then(Value::as_str)
        .ok_or_else(|| missing("text"))?;
    let raw_opinions = item
        .get("opinions")
        .and_then(Value::as_array)
        .ok_or_else(|| missing("opinions"))?;

    let sentence = Sentence::new(sent_id.clone(), text);
    let opinions = raw_opinions
        .iter()
        .enumerate()
        .map(|(k, op)| parse_opinion(&sentence, k, op))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SentimentGraph::new(sentence, opinions))
}

fn parse_opinion(sentence: &Sentence, k: usize, op: &Value) -> Result<Opinion, DataError> {
    let sent_id = &sentence.sent_id;
    let field = |name: &str| format!("opinions[{k}].{name}");
    let holder = parse_span(sentence, op, HOLDER_KEY, &field(HOLDER_KEY))?;
    let target = parse_span(sentence, op, TARGET_KEY, &field(TARGET_KEY))?;
    let expression = parse_span(sentence, op, EXPRESSION_KEY, &field(EXPRESSION_KEY))?;
    if expression.is_empty() {
        return Err(DataError::EmptyExpression {
            sent_id: sent_id.clone(),
            field: field(EXPRESSION_KEY),
        });
    }
    let polarity_str = op
        .get(POLARITY_KEY)
        .and_then(Value::as_str)
        .ok_or_else(|| DataError::MissingField {
            sent_id: sent_id.clone(),
            field: field(POLARITY_KEY),
        })?;
    let polarity = polarity_str.parse().map_err(|reason| DataError::BadValue {
        sent_id: sent_id.clone(),
        field: field(POLARITY_KEY),
        reason,
    })?;
    let intensity = match op.get(INTENSITY_KEY) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => {
            return Err(DataError::BadValue {
                sent_id: sent_id.clone(),
                field: field(INTENSITY_KEY),
                reason: format!("expected a string, found {other}"),
            })
        }
    };
    Ok(Opinion {
        holder,
        target,
        expression,
        polarity,
        intensity,
    })
}

fn parse_span(
    sentence: &Sentence,
    op: &Value,
    key: &str,
    field: &str,
) -> Result<SpanSet, DataError> {
    let sent_id = &sentence.sent_id;
    let bad = |reason: String| DataError::BadValue {
        sent_id: sent_id.clone(),
        field: field.to_string(),
        reason,
    };
    let pair = op
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| DataError::MissingField {
            sent_id: sent_id.clone(),
            field: field.to_string(),
        })?;
    if pair.len() != 2 {
        return Err(bad(format!(
            "expected [strings, offsets], found {} elements",
            pair.len()
        )));
    }
    let strings = string_list(&pair[0])
        .ok_or_else(|| bad("surface strings must be a list of strings".into()))?;
    let offsets =
        string_list(&pair[1]).ok_or_else(|| bad("offsets must be a list of strings".into()))?;
    if strings.len() != offsets.len() {
        return Err(bad(format!(
            "{} surface strings but {} offsets",
            strings.len(),
            offsets.len()
        )));
    }
    let mut ranges = Vec::with_capacity(offsets.len());
    for (surface, offset) in strings.iter().zip(&offsets) {
        let range = parse_offset(offset).ok_or_else(|| DataError::BadOffset {
            sent_id: sent_id.clone(),
            field: field.to_string(),
            value: offset.to_string(),
        })?;
        let slice = sentence.slice(range).ok_or(DataError::OutOfBounds {
            sent_id: sent_id.clone(),
            range,
            len: sentence.char_len(),
        })?;
        if slice != *surface {
            return Err(DataError::TextMismatch {
                sent_id: sent_id.clone(),
                field: field.to_string(),
                declared: surface.to_string(),
                found: slice.to_string(),
            });
        }
        ranges.push(range);
    }
    SpanSet::from_ranges(sentence, ranges)
}

fn string_list(v: &Value) -> Option<Vec<&str>> {
    v.as_array()?.iter().map(Value::as_str).collect()
}

fn parse_offset(s: &str) -> Option<CharRange> {
    let (b, e) = s.split_once(':')?;
    Some(CharRange::new(b.parse().ok()?, e.parse().ok()?))
}

#[derive(Serialize)]
struct RawSentence<'a> {
    sent_id: &'a str,
    text: &'a str,
    opinions: Vec<RawOpinion<'a>>,
}

type RawSpan = (Vec<String>, Vec<String>);

#[derive(Serialize)]
struct RawOpinion<'a> {
    #[serde(rename = "Source")]
    source: RawSpan,
    #[serde(rename = "Target")]
    target: RawSpan,
    #[serde(rename = "Polar_expression")]
    expression: RawSpan,
    #[serde(rename = "Polarity")]
    polarity: Polarity,
    #[serde(rename = "Intensity", skip_serializing_if = "Option::is_none")]
    intensity: Option<&'a str>,
}

fn raw_span(sentence: &Sentence, span: &SpanSet) -> RawSpan {
    span.ranges()
        .iter()
        .map(|&r| {
            (
                sentence.slice(r).unwrap_or_default().to_string(),
                r.to_string(),
            )
        })
        .unzip()
}

/// Serializes graphs to the JSON dataset format with a fixed key order.
pub fn serialize_dataset(graphs: &[SentimentGraph]) -> String {
    let raw: Vec<RawSentence<'_>> = graphs
        .iter()
        .map(|g| RawSentence {
            sent_id: &g.sentence.sent_id,
            text: &g.sentence.text,
            opinions: g
                .opinions
                .iter()
                .map(|op| RawOpinion {
                    source: raw_span(&g.sentence, &op.holder),
                    target: raw_span(&g.sentence, &op.target),
                    expression: raw_span(&g.sentence, &op.expression),
                    polarity: op.polarity,
                    intensity: op.intensity.as_deref(),
                })
                .collect(),
        })
        .collect();
    serde_json::to_string(&raw).expect("dataset serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::nested_targets;

    const TEXT: &str = "Nowadays I actually enjoy the bad acting.";

    #[test]
    fn tokenize_edge_cases() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
        assert_eq!(tokenize("enjoy"), vec![Token::new("enjoy", 0, 5)]);
    }

    #[test]
    fn tokenize_running_example() {
        let toks = tokenize(TEXT);
        let expected = [
            ("Nowadays", 0, 8),
            ("I", 9, 10),
            ("actually", 11, 19),
            ("enjoy", 20, 25),
            ("the", 26, 29),
            ("bad", 30, 33),
            ("acting.", 34, 41),
        ];
        assert_eq!(toks.len(), expected.len());
        for (tok, (text, s, e)) in toks.iter().zip(expected) {
            assert_eq!(tok, &Token::new(text, s, e));
            let chars: String = TEXT.chars().skip(s).take(e - s).collect();
            assert_eq!(chars, text);
        }
    }

    #[test]
    fn tokenize_counts_characters_not_bytes() {
        let toks = tokenize("Smaken på øl");
        assert_eq!(toks[1], Token::new("på", 7, 9));
        assert_eq!(toks[2], Token::new("øl", 10, 12));
    }

    #[test]
    fn span_to_tokens_cases() {
        let s = Sentence::new("s", TEXT);
        assert!(s.span_to_tokens(&[]).unwrap().is_empty());
        let all = s.span_to_tokens(&[CharRange::new(0, 41)]).unwrap();
        assert_eq!(all, (0..7).collect());
        let the_bad_acting = s.span_to_tokens(&[CharRange::new(26, 40)]).unwrap();
        assert_eq!(the_bad_acting, [4, 5, 6].into());
        // one character of overlap is enough
        assert_eq!(
            s.span_to_tokens(&[CharRange::new(24, 27)]).unwrap(),
            [3, 4].into()
        );
        // whitespace only
        assert!(s
            .span_to_tokens(&[CharRange::new(8, 9)])
            .unwrap()
            .is_empty());
        assert!(matches!(
            s.span_to_tokens(&[CharRange::new(30, 42)]),
            Err(DataError::OutOfBounds { .. })
        ));
    }

    #[test]
    fn tokens_to_ranges_splits_discontinuous_runs() {
        let s = Sentence::new("s", TEXT);
        let ranges = s.tokens_to_ranges(&[1, 3, 4].into());
        assert_eq!(ranges, vec![CharRange::new(9, 10), CharRange::new(20, 29)]);
    }

    #[test]
    fn span_rejects_overlap_and_empty_ranges() {
        let s = Sentence::new("s", TEXT);
        assert!(SpanSet::from_ranges(&s, vec![CharRange::new(3, 3)]).is_err());
        assert!(
            SpanSet::from_ranges(&s, vec![CharRange::new(0, 5), CharRange::new(4, 8)]).is_err()
        );
        assert!(
            SpanSet::from_ranges(&s, vec![CharRange::new(9, 10), CharRange::new(0, 8)]).is_err()
        );
    }

    #[test]
    fn parse_empty_dataset() {
        assert!(parse_dataset("[]").unwrap().is_empty());
        assert_eq!(serialize_dataset(&[]), "[]");
    }

    #[test]
    fn parse_single_opinion_field_by_field() {
        let json = r#"[{"sent_id": "doc-1", "text": "Nowadays I actually enjoy the bad acting.",
            "opinions": [{"Source": [["I"], ["9:10"]],
                          "Target": [["the bad acting"], ["26:40"]],
                          "Polar_expression": [["enjoy"], ["20:25"]],
                          "Polarity": "Positive", "Intensity": "Standard"}]}]"#;
        let graphs = parse_dataset(json).unwrap();
        assert_eq!(graphs.len(), 1);
        let g = &graphs[0];
        assert_eq!(g.sentence.sent_id, "doc-1");
        assert_eq!(g.sentence.len(), 7);
        assert_eq!(g.opinions.len(), 1);
        let op = &g.opinions[0];
        assert_eq!(op.holder.ranges(), &[CharRange::new(9, 10)]);
        assert_eq!(op.holder.tokens(), &[1].into());
        assert_eq!(op.target.tokens(), &[4, 5, 6].into());
        assert_eq!(op.expression.tokens(), &[3].into());
        assert_eq!(op.polarity, Polarity::Positive);
        assert_eq!(op.intensity.as_deref(), Some("Standard"));
    }

    #[test]
    fn parse_errors_name_sentence_and_field() {
        let mismatch = r#"[{"sent_id": "x7", "text": "I like it",
            "opinions": [{"Source": [[], []], "Target": [["it"], ["7:9"]],
                          "Polar_expression": [["love"], ["2:6"]], "Polarity": "Positive"}]}]"#;
        match parse_dataset(mismatch) {
            Err(DataError::TextMismatch { sent_id, field, .. }) => {
                assert_eq!(sent_id, "x7");
                assert_eq!(field, "opinions[0].Polar_expression");
            }
            other => panic!("unexpected {other:?}"),
        }

        let missing = r#"[{"sent_id": "x8", "text": "I like it", "opinions": [{"Source": [[], []],
            "Target": [[], []], "Polar_expression": [["like"], ["2:6"]]}]}]"#;
        assert!(matches!(
            parse_dataset(missing),
            Err(DataError::MissingField { ref sent_id, ref field }) if sent_id == "x8" && field == "opinions[0].Polarity"
        ));

        let bad_offset = r#"[{"sent_id": "x9", "text": "I like it", "opinions": [{"Source": [[], []],
            "Target": [[], []], "Polar_expression": [["like"], ["2-6"]], "Polarity": "Positive"}]}]"#;
        assert!(matches!(
            parse_dataset(bad_offset),
            Err(DataError::BadOffset { .. })
        ));

        let empty_exp = r#"[{"sent_id": "x10", "text": "I like it", "opinions": [{"Source": [[], []],
            "Target": [[], []], "Polar_expression": [[], []], "Polarity": "Positive"}]}]"#;
        assert!(matches!(
            parse_dataset(empty_exp),
            Err(DataError::EmptyExpression { .. })
        ));

        assert!(matches!(parse_dataset("{"), Err(DataError::Json(_))));
        assert!(matches!(parse_dataset("{}"), Err(DataError::NotAnArray)));
    }

    #[test]
    fn serialization_is_stable_and_round_trips() {
        let g = nested_targets();
        let once = serialize_dataset(std::slice::from_ref(&g));
        let twice = serialize_dataset(std::slice::from_ref(&g));
        assert_eq!(once, twice);
        assert!(once.starts_with(r#"[{"sent_id":"#));
        let back = parse_dataset(&once).unwrap();
        assert_eq!(back, vec![g]);
    }
}
