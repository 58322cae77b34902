//! Finite-difference check of the analytic gradients.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sentgraph::SentimentGraph;

use crate::model::Dropout;
use crate::objective::{loss, loss_summands, match_queries, GoldTargets, Matching};
use crate::params::ParamId;
use crate::tape::Tape;
use crate::train::Parser;
use crate::vocab::PAD_CHAR;

/// Relative errors below this denominator are measured absolutely, so
/// entries whose true derivative is zero do not blow up on roundoff.
pub const DENOMINATOR_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// `(tensor, index, analytic, numeric)` of the worst entry.
    pub worst: Option<(String, usize, f64, f64)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR)
}

fn summands(
    parser: &Parser,
    gold: &GoldTargets,
    graph: &SentimentGraph,
    matching: &Matching,
) -> Vec<f64> {
    loss_summands(
        &parser.scores(&graph.sentence),
        gold,
        matching,
        parser.config.gamma(),
    )
}

/// Entries of a tensor the loss can depend on: all of them, except for
/// embedding tables, where only the rows looked up by the sentence count.
fn candidates(parser: &Parser, graph: &SentimentGraph, id: ParamId) -> Vec<usize> {
    let p = parser.store.get(id);
    let rows: Option<BTreeSet<usize>> = if id == parser.model.word_embedding() {
        Some(
            graph
                .sentence
                .tokens
                .iter()
                .map(|t| parser.vocab.word(&t.text))
                .collect::<BTreeSet<_>>(),
        )
    } else if Some(id) == parser.model.char_embedding() {
        let mut r: BTreeSet<usize> = graph
            .sentence
            .tokens
            .iter()
            .flat_map(|t| parser.vocab.chars_of(&t.text))
            .collect();
        r.insert(PAD_CHAR);
        Some(r)
    } else {
        None
    };
    match rows {
        Some(rows) => rows
            .into_iter()
            .flat_map(|r| r * p.cols..(r + 1) * p.cols)
            .collect(),
        None => (0..p.value.len()).collect(),
    }
}

/// Compares analytic gradients of one sentence's loss (dropout off, matching
/// fixed at the current parameters) against central differences with step
/// `eps`, on about `per_tensor` random entries of every trainable tensor.
pub fn grad_check(
    parser: &Parser,
    graph: &SentimentGraph,
    per_tensor: usize,
    eps: f64,
    seed: u64,
) -> GradCheckReport {
    let enc = parser.config.graph_mode;
    let gold = GoldTargets::new(enc, graph);
    let mut work = parser.clone();
    work.store.zero_grad();
    let mut t = Tape::new();
    let out = work.forward(&mut t, &graph.sentence, &mut Dropout::eval());
    let matching = match_queries(&gold, &out.values(&t)).expect("finite scores");
    let terms = loss(&mut t, &out, &gold, &matching, work.config.gamma());
    t.backward(terms.total, &mut work.store);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        worst: None,
    };
    for id in work.store.ids() {
        if work.store.get(id).frozen {
            continue;
        }
        let cand = candidates(&work, graph, id);
        let picks: Vec<usize> = sample(&mut rng, cand.len(), per_tensor.min(cand.len()))
            .into_iter()
            .map(|k| cand[k])
            .collect();
        for i in picks {
            let analytic = work.store.get(id).grad[i];
            let orig = work.store.get(id).value[i];
            work.store.get_mut(id).value[i] = orig + eps;
            let plus = summands(&work, &gold, graph, &matching);
            work.store.get_mut(id).value[i] = orig - eps;
            let minus = summands(&work, &gold, graph, &matching);
            work.store.get_mut(id).value[i] = orig;
            // differencing term by term keeps the rounding error of the
            // total out of the quotient
            let numeric = plus.iter().zip(&minus).map(|(p, m)| p - m).sum::<f64>() / (2.0 * eps);
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                report.worst = Some((work.store.get(id).name.clone(), i, analytic, numeric));
            }
        }
    }
    report
}
