//! Query-to-node matching and the training loss.

use sentgraph::encodings::{Encoding, GeneralGraph};
use sentgraph::SentimentGraph;

use crate::error::ParserError;
use crate::hungarian::hungarian;
use crate::model::{Outputs, QueryPredictions};
use crate::tape::{focal_bce, focal_nll, log_sigmoid, log_softmax_rows, Tape, Var};

/// Gold graph in canonical node order, as label and anchor indicators.
#[derive(Clone, Debug, PartialEq)]
pub struct GoldTargets {
    pub encoding: Encoding,
    pub n_tokens: usize,
    /// Node label index into `encoding.node_labels()`.
    pub labels: Vec<usize>,
    /// `anchors[node][channel][token]`
    pub anchors: Vec<Vec<Vec<bool>>>,
    /// `(from, to, edge label index)`
    pub edges: Vec<(usize, usize, Option<usize>)>,
}

impl GoldTargets {
    pub fn new(encoding: Encoding, graph: &SentimentGraph) -> GoldTargets {
        GoldTargets::from_general(&encoding.encode(graph))
    }

    /// Canonicalizes first, so the targets do not depend on the order in
    /// which nodes were listed.
    pub fn from_general(graph: &GeneralGraph) -> GoldTargets {
        let g = graph.canonicalize();
        let enc = g.encoding;
        let n_tokens = g.sentence.len();
        let labels = g
            .nodes
            .iter()
            .map(|n| {
                enc.node_labels()
                    .iter()
                    .position(|&l| l == n.label)
                    .expect("label of the encoding")
            })
            .collect();
        let anchors = g
            .nodes
            .iter()
            .map(|n| {
                n.anchors
                    .iter()
                    .map(|a| (0..n_tokens).map(|t| a.contains(&t)).collect())
                    .collect()
            })
            .collect();
        let edges = g
            .edges
            .iter()
            .map(|e| {
                let label = e.label.as_ref().map(|l| {
                    enc.edge_labels()
                        .iter()
                        .position(|x| x == l)
                        .expect("edge label of the encoding")
                });
                (e.from, e.to, label)
            })
            .collect();
        GoldTargets {
            encoding: enc,
            n_tokens,
            labels,
            anchors,
            edges,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }
}

/// Gold node to query assignment. Nodes left without a query (only when the
/// graph has more nodes than there are queries) are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matching {
    pub node_to_query: Vec<Option<usize>>,
    pub total_cost: f64,
}

impl Matching {
    /// `(node, query)` pairs in node order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.node_to_query
            .iter()
            .enumerate()
            .filter_map(|(n, q)| q.map(|q| (n, q)))
            .collect()
    }

    pub fn dropped(&self) -> usize {
        self.node_to_query.iter().filter(|q| q.is_none()).count()
    }
}

/// Row-major `nodes x queries` matrix: negative log-probability of the
/// node's label plus the mean negative log-likelihood of its anchors.
pub fn cost_matrix(gold: &GoldTargets, pred: &QueryPredictions) -> Vec<f64> {
    let q = pred.n_queries;
    let t = pred.n_tokens;
    assert_eq!(t, gold.n_tokens, "token count mismatch");
    let logp = log_softmax_rows(&pred.label_logits, pred.n_labels);
    let channels = pred.anchor_logits.len();
    let per_anchor = (channels * t).max(1) as f64;
    let mut cost = Vec::with_capacity(gold.n_nodes() * q);
    for (label, anchors) in gold.labels.iter().zip(&gold.anchors) {
        for query in 0..q {
            let mut anchor_nll = 0.0;
            for (c, logits) in pred.anchor_logits.iter().enumerate() {
                for (tok, &y) in anchors[c].iter().enumerate() {
                    let x = logits[query * t + tok];
                    anchor_nll -= log_sigmoid(if y { x } else { -x });
                }
            }
            cost.push(-logp[query * pred.n_labels + label] + anchor_nll / per_anchor);
        }
    }
    cost
}

/// Minimum-cost injective assignment of gold nodes to queries. With more
/// nodes than queries every query takes one node and the rest are dropped.
pub fn match_queries(gold: &GoldTargets, pred: &QueryPredictions) -> Result<Matching, ParserError> {
    let n = gold.n_nodes();
    let q = pred.n_queries;
    let cost = cost_matrix(gold, pred);
    if n <= q {
        let a = hungarian(&cost, n, q)?;
        return Ok(Matching {
            node_to_query: a.row_to_col.into_iter().map(Some).collect(),
            total_cost: a.cost,
        });
    }
    let mut transposed = vec![0.0; n * q];
    for i in 0..n {
        for j in 0..q {
            transposed[j * n + i] = cost[i * q + j];
        }
    }
    let a = hungarian(&transposed, q, n)?;
    let mut node_to_query = vec![None; n];
    for (query, &node) in a.row_to_col.iter().enumerate() {
        node_to_query[node] = Some(query);
    }
    let total_cost = node_to_query
        .iter()
        .enumerate()
        .filter_map(|(node, q_)| q_.map(|query| cost[node * q + query]))
        .sum();
    Ok(Matching {
        node_to_query,
        total_cost,
    })
}

/// Loss terms, each a 1x1 tape variable (absent terms are `None`).
#[derive(Clone, Debug)]
pub struct LossTerms {
    pub label: Var,
    pub anchor: Option<Var>,
    pub edge_presence: Option<Var>,
    pub edge_label: Option<Var>,
    pub total: Var,
}

/// Sum of label cross-entropy over all queries (unmatched ones against
/// NULL), anchor binary cross-entropy of matched queries, and for edge
/// encodings edge presence and edge label losses between matched queries.
/// The focal exponent `gamma` applies to the label and anchor terms.
pub fn loss(
    t: &mut Tape,
    out: &Outputs,
    gold: &GoldTargets,
    matching: &Matching,
    gamma: f64,
) -> LossTerms {
    let n_labels = t.shape(out.label).1;
    let null = n_labels - 1;
    let pairs = matching.pairs();
    let mut targets = vec![null; out.n_queries];
    for &(node, query) in &pairs {
        targets[query] = gold.labels[node];
    }
    let label = t.softmax_ce(out.label, &targets, gamma);
    let mut total = label;

    let anchor = if pairs.is_empty() {
        None
    } else {
        let queries: Vec<usize> = pairs.iter().map(|&(_, q)| q).collect();
        let mut sum = None;
        for (c, &logits) in out.anchors.iter().enumerate() {
            let rows = t.gather(logits, &queries);
            let y: Vec<bool> = pairs
                .iter()
                .flat_map(|&(node, _)| gold.anchors[node][c].iter().copied())
                .collect();
            let l = t.bce(rows, &y, None, gamma);
            sum = Some(match sum {
                None => l,
                Some(s) => t.add(s, l),
            });
        }
        sum
    };
    if let Some(a) = anchor {
        total = t.add(total, a);
    }

    let mut edge_presence = None;
    let mut edge_label = None;
    if let Some(presence) = out.edge_presence {
        let mut query_of = vec![None; gold.n_nodes()];
        for &(node, query) in &pairs {
            query_of[node] = Some(query);
        }
        let mut at = Vec::new();
        let mut y = Vec::new();
        for &(a, qa) in &pairs {
            for &(b, qb) in &pairs {
                if a != b {
                    at.push((qa, qb));
                    y.push(gold.edges.iter().any(|&(f, to, _)| f == a && to == b));
                }
            }
        }
        if !at.is_empty() {
            let picked = t.pick(presence, &at);
            let l = t.bce(picked, &y, None, 0.0);
            total = t.add(total, l);
            edge_presence = Some(l);
        }
        if !out.edge_labels.is_empty() {
            let mut at = Vec::new();
            let mut classes = Vec::new();
            for &(from, to, label) in &gold.edges {
                if let (Some(qf), Some(qt), Some(l)) = (query_of[from], query_of[to], label) {
                    at.push((qf, qt));
                    classes.push(l);
                }
            }
            if !at.is_empty() {
                let columns: Vec<Var> = out.edge_labels.iter().map(|&m| t.pick(m, &at)).collect();
                let logits = t.concat_cols(&columns);
                let l = t.softmax_ce(logits, &classes, 0.0);
                total = t.add(total, l);
                edge_label = Some(l);
            }
        }
    }
    LossTerms {
        label,
        anchor,
        edge_presence,
        edge_label,
        total,
    }
}

/// The elementary summands of [`loss`], recomputed in plain arithmetic from
/// the score values: one per query label, anchor cell, edge pair and gold
/// edge label, in that order. Their sum equals the tape loss up to rounding.
pub fn loss_summands(
    pred: &QueryPredictions,
    gold: &GoldTargets,
    matching: &Matching,
    gamma: f64,
) -> Vec<f64> {
    let (q, t, l) = (pred.n_queries, pred.n_tokens, pred.n_labels);
    let pairs = matching.pairs();
    let mut targets = vec![l - 1; q];
    for &(node, query) in &pairs {
        targets[query] = gold.labels[node];
    }
    let logp = log_softmax_rows(&pred.label_logits, l);
    let mut out: Vec<f64> = targets
        .iter()
        .enumerate()
        .map(|(i, &y)| focal_nll(logp[i * l + y], gamma))
        .collect();
    for (c, logits) in pred.anchor_logits.iter().enumerate() {
        for &(node, query) in &pairs {
            for (tok, &y) in gold.anchors[node][c].iter().enumerate() {
                let x = logits[query * t + tok];
                out.push(focal_bce(if y { x } else { -x }, gamma));
            }
        }
    }
    if let Some(presence) = &pred.edge_presence_logits {
        for &(a, qa) in &pairs {
            for &(b, qb) in &pairs {
                if a != b {
                    let x = presence[qa * q + qb];
                    let y = gold.edges.iter().any(|&(f, to, _)| f == a && to == b);
                    out.push(focal_bce(if y { x } else { -x }, 0.0));
                }
            }
        }
        if !pred.edge_label_logits.is_empty() {
            let e = pred.edge_label_logits.len();
            for &(from, to, label) in &gold.edges {
                if let (Some(qf), Some(qt), Some(y)) = (
                    matching.node_to_query[from],
                    matching.node_to_query[to],
                    label,
                ) {
                    let row: Vec<f64> = pred
                        .edge_label_logits
                        .iter()
                        .map(|m| m[qf * q + qt])
                        .collect();
                    out.push(focal_nll(log_softmax_rows(&row, e)[y], 0.0));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hungarian::brute_force;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use sentgraph::fixtures::nested_targets;

    fn preds(rng: &mut ChaCha8Rng, enc: Encoding, q: usize, t: usize) -> QueryPredictions {
        let l = enc.node_labels().len() + 1;
        let mut r = |n: usize| {
            (0..n)
                .map(|_| rng.random_range(-3.0..3.0))
                .collect::<Vec<f64>>()
        };
        QueryPredictions {
            n_tokens: t,
            n_queries: q,
            n_labels: l,
            label_logits: r(q * l),
            anchor_logits: enc.channels().iter().map(|_| r(q * t)).collect(),
            edge_presence_logits: None,
            edge_label_logits: Vec::new(),
        }
    }

    #[test]
    fn uniform_labels_cost_log_l() {
        let g = GoldTargets::new(Encoding::OpinionTuple, &nested_targets());
        let p = QueryPredictions {
            n_tokens: 7,
            n_queries: 7,
            n_labels: 4,
            label_logits: vec![0.0; 28],
            anchor_logits: vec![vec![0.0; 49]; 3],
            edge_presence_logits: None,
            edge_label_logits: Vec::new(),
        };
        let cost = cost_matrix(&g, &p);
        // log 4 from the label, log 2 from every anchor
        let expected = 4f64.ln() + 2f64.ln();
        assert!(cost.iter().all(|c| (c - expected).abs() < 1e-12));
    }

    #[test]
    fn confident_correct_query_costs_nothing() {
        let g = GoldTargets::new(Encoding::OpinionTuple, &nested_targets());
        let mut p = QueryPredictions {
            n_tokens: 7,
            n_queries: 7,
            n_labels: 4,
            label_logits: vec![0.0; 28],
            anchor_logits: vec![vec![-800.0; 49]; 3],
            edge_presence_logits: None,
            edge_label_logits: Vec::new(),
        };
        p.label_logits[g.labels[0]] = 800.0;
        for c in 0..3 {
            for (tok, &y) in g.anchors[0][c].iter().enumerate() {
                if y {
                    p.anchor_logits[c][tok] = 800.0;
                }
            }
        }
        assert_eq!(cost_matrix(&g, &p)[0], 0.0);
    }

    #[test]
    fn matching_agrees_with_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = GoldTargets::new(Encoding::NodeCentric, &nested_targets());
        for _ in 0..20 {
            let p = preds(&mut rng, Encoding::NodeCentric, 14, 7);
            let m = match_queries(&g, &p).unwrap();
            let b = brute_force(&cost_matrix(&g, &p), g.n_nodes(), 14);
            assert!((m.total_cost - b.cost).abs() < 1e-12);
        }
    }

    #[test]
    fn too_many_nodes_drop_some() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = GoldTargets::new(Encoding::NodeCentric, &nested_targets());
        let p = preds(&mut rng, Encoding::NodeCentric, 2, 7);
        let m = match_queries(&g, &p).unwrap();
        assert_eq!(m.dropped(), g.n_nodes() - 2);
        let mut used: Vec<usize> = m.pairs().iter().map(|&(_, q)| q).collect();
        used.sort();
        assert_eq!(used, vec![0, 1]);
    }
}
