//! Sentiment graph F1, its non-polar variant, and token-level span F1.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde_json::json;

use crate::data::{Opinion, Role, SentimentGraph, TokenSet};
use crate::error::EvalError;

/// Which side's token count normalizes the overlap in [`tuple_weight`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Denominator {
    Pred,
    Gold,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Weighted true positives on the precision side.
    pub tp_precision: f64,
    /// Weighted true positives on the recall side.
    pub tp_recall: f64,
    pub denom_precision: f64,
    pub denom_recall: f64,
}

impl Prf {
    /// Precision with no predictions is 0 and recall with no gold items is 0,
    /// except that agreeing on "nothing at all" scores 1.
    pub fn from_counts(
        tp_precision: f64,
        denom_precision: f64,
        tp_recall: f64,
        denom_recall: f64,
    ) -> Prf {
        let (precision, recall) = if denom_precision == 0.0 && denom_recall == 0.0 {
            (1.0, 1.0)
        } else {
            (
                if denom_precision > 0.0 {
                    tp_precision / denom_precision
                } else {
                    0.0
                },
                if denom_recall > 0.0 {
                    tp_recall / denom_recall
                } else {
                    0.0
                },
            )
        };
        Prf {
            precision,
            recall,
            f1: f1(precision, recall),
            tp_precision,
            tp_recall,
            denom_precision,
            denom_recall,
        }
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn overlap(a: &TokenSet, b: &TokenSet) -> usize {
    a.intersection(b).count()
}

fn element_score(gold: &TokenSet, pred: &TokenSet, denominator: Denominator) -> f64 {
    let denom = match denominator {
        Denominator::Pred => pred,
        Denominator::Gold => gold,
    };
    match (gold.is_empty(), pred.is_empty()) {
        (true, true) => 1.0,
        _ if denom.is_empty() => 0.0,
        _ => overlap(gold, pred) as f64 / denom.len() as f64,
    }
}

/// Mean over holder, target and expression of the token overlap divided by
/// the predicted (or gold) span size. Two empty spans score 1.
pub fn tuple_weight(gold: &Opinion, pred: &Opinion, denominator: Denominator) -> f64 {
    Role::ALL
        .iter()
        .map(|&r| element_score(gold.span(r).tokens(), pred.span(r).tokens(), denominator))
        .sum::<f64>()
        / 3.0
}

fn compatible(gold: &TokenSet, pred: &TokenSet) -> bool {
    (gold.is_empty() && pred.is_empty()) || overlap(gold, pred) > 0
}

fn eligible(gold: &Opinion, pred: &Opinion, require_polarity: bool) -> bool {
    overlap(gold.expression.tokens(), pred.expression.tokens()) > 0
        && compatible(gold.holder.tokens(), pred.holder.tokens())
        && compatible(gold.target.tokens(), pred.target.tokens())
        && (!require_polarity || gold.polarity == pred.polarity)
}

/// Per-sentence contribution to the corpus-level sentiment graph F1.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SentenceCounts {
    pub tp_precision: f64,
    pub n_pred: f64,
    pub tp_recall: f64,
    pub n_gold: f64,
}

impl SentenceCounts {
    pub fn add(&mut self, other: &SentenceCounts) {
        self.tp_precision += other.tp_precision;
        self.n_pred += other.n_pred;
        self.tp_recall += other.tp_recall;
        self.n_gold += other.n_gold;
    }

    pub fn prf(&self) -> Prf {
        Prf::from_counts(self.tp_precision, self.n_pred, self.tp_recall, self.n_gold)
    }
}

/// One-to-one greedy matching of predicted to gold opinions by descending
/// combined weight; ties go to the earlier gold, then the earlier prediction.
pub fn match_opinions(
    gold: &[Opinion],
    pred: &[Opinion],
    require_polarity: bool,
) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, g) in gold.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            if eligible(g, p, require_polarity) {
                let w =
                    tuple_weight(g, p, Denominator::Pred) + tuple_weight(g, p, Denominator::Gold);
                pairs.push((w, gi, pi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gold_used = vec![false; gold.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut matched = Vec::new();
    for (_, gi, pi) in pairs {
        if !gold_used[gi] && !pred_used[pi] {
            gold_used[gi] = true;
            pred_used[pi] = true;
            matched.push((gi, pi));
        }
    }
    matched
}

pub fn sentence_counts(
    gold: &SentimentGraph,
    pred: &SentimentGraph,
    require_polarity: bool,
) -> SentenceCounts {
    let mut counts = SentenceCounts {
        n_pred: pred.opinions.len() as f64,
        n_gold: gold.opinions.len() as f64,
        ..Default::default()
    };
    for (gi, pi) in match_opinions(&gold.opinions, &pred.opinions, require_polarity) {
        let (g, p) = (&gold.opinions[gi], &pred.opinions[pi]);
        counts.tp_precision += tuple_weight(g, p, Denominator::Pred);
        counts.tp_recall += tuple_weight(g, p, Denominator::Gold);
    }
    counts
}

/// Pairs every gold sentence with the prediction carrying the same id.
pub fn align<'a>(
    gold: &[SentimentGraph],
    pred: &'a [SentimentGraph],
) -> Result<Vec<&'a SentimentGraph>, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let in_order = gold
        .iter()
        .zip(pred)
        .all(|(g, p)| g.sentence.sent_id == p.sentence.sent_id);
    if in_order {
        return Ok(pred.iter().collect());
    }
    let by_id: HashMap<&str, &SentimentGraph> = pred
        .iter()
        .map(|p| (p.sentence.sent_id.as_str(), p))
        .collect();
    gold.iter()
        .map(|g| {
            by_id
                .get(g.sentence.sent_id.as_str())
                .copied()
                .ok_or_else(|| EvalError::MissingPrediction {
                    sent_id: g.sentence.sent_id.clone(),
                })
        })
        .collect()
}

/// Per-sentence counts for one prediction run, in gold order.
pub fn corpus_counts(
    gold: &[SentimentGraph],
    pred: &[SentimentGraph],
    require_polarity: bool,
) -> Result<Vec<SentenceCounts>, EvalError> {
    let aligned = align(gold, pred)?;
    Ok(gold
        .iter()
        .zip(aligned)
        .map(|(g, p)| sentence_counts(g, p, require_polarity))
        .collect())
}

pub fn sent_graph_f1(
    gold: &[SentimentGraph],
    pred: &[SentimentGraph],
    require_polarity: bool,
) -> Result<Prf, EvalError> {
    let mut total = SentenceCounts::default();
    for c in corpus_counts(gold, pred, require_polarity)? {
        total.add(&c);
    }
    Ok(total.prf())
}

fn role_tokens(g: &SentimentGraph, role: Role) -> TokenSet {
    g.opinions
        .iter()
        .flat_map(|op| op.span(role).tokens().iter().copied())
        .collect()
}

/// Micro-averaged token F1 of the union of spans of one role per sentence.
pub fn span_f1(
    gold: &[SentimentGraph],
    pred: &[SentimentGraph],
    role: Role,
) -> Result<Prf, EvalError> {
    let aligned = align(gold, pred)?;
    let (mut tp, mut n_pred, mut n_gold) = (0usize, 0usize, 0usize);
    for (g, p) in gold.iter().zip(aligned) {
        let gt = role_tokens(g, role);
        let pt = role_tokens(p, role);
        tp += overlap(&gt, &pt);
        n_pred += pt.len();
        n_gold += gt.len();
    }
    Ok(Prf::from_counts(
        tp as f64,
        n_pred as f64,
        tp as f64,
        n_gold as f64,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub sf1: Prf,
    pub nsf1: Prf,
    pub holder: Prf,
    pub target: Prf,
    pub expression: Prf,
}

impl MetricsReport {
    pub fn span(&self, role: Role) -> &Prf {
        match role {
            Role::Holder => &self.holder,
            Role::Target => &self.target,
            Role::Expression => &self.expression,
        }
    }

    fn entries(&self) -> Vec<(String, &Prf)> {
        let mut out = vec![
            ("sf1".to_string(), &self.sf1),
            ("nsf1".to_string(), &self.nsf1),
        ];
        for role in Role::ALL {
            out.push((format!("spans.{role}"), self.span(role)));
        }
        out
    }

    /// `key value` lines with scores as percentages.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, prf) in self.entries() {
            for (suffix, v) in [("p", prf.precision), ("r", prf.recall), ("f1", prf.f1)] {
                writeln!(out, "{key}.{suffix} {:.2}", 100.0 * v).unwrap();
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let prf = |p: &Prf| json!({"p": p.precision, "r": p.recall, "f1": p.f1});
        json!({
            "sf1": prf(&self.sf1),
            "nsf1": prf(&self.nsf1),
            "spans": {
                "holder": prf(&self.holder),
                "target": prf(&self.target),
                "expression": prf(&self.expression),
            }
        })
    }
}

pub fn evaluate(
    gold: &[SentimentGraph],
    pred: &[SentimentGraph],
) -> Result<MetricsReport, EvalError> {
    Ok(MetricsReport {
        sf1: sent_graph_f1(gold, pred, true)?,
        nsf1: sent_graph_f1(gold, pred, false)?,
        holder: span_f1(gold, pred, Role::Holder)?,
        target: span_f1(gold, pred, Role::Target)?,
        expression: span_f1(gold, pred, Role::Expression)?,
    })
}
