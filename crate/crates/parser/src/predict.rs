//! Turning query scores into sentiment graphs.
//!
//! Queries whose best label is not NULL become nodes, anchored to every token
//! with a positive anchor logit; edges are kept where the presence logit is
//! positive. The resulting graph is repaired to satisfy the encoding's
//! structural rules before decoding, and everything removed on the way is
//! counted.

use std::collections::{BTreeMap, BTreeSet};

use sentgraph::data::{Sentence, SentimentGraph, TokenSet};
use sentgraph::encodings::{
    parse_expression_label, Encoding, GeneralEdge, GeneralGraph, GeneralNode, HOLDER, ROOT, TARGET,
};

use crate::model::QueryPredictions;

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub graph: SentimentGraph,
    /// Raw graph read off the queries, before repair.
    pub raw: GeneralGraph,
    /// Nodes, edges and opinions discarded as structurally invalid or
    /// duplicated.
    pub dropped: usize,
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate() {
        if x > row[best] {
            best = i;
        }
    }
    best
}

/// Graph read directly off the scores, with `nodes[i]` coming from the i-th
/// selected query. Also returns those query indices.
pub fn read_graph(
    encoding: Encoding,
    sentence: &Sentence,
    pred: &QueryPredictions,
) -> (GeneralGraph, Vec<usize>) {
    let labels = encoding.node_labels();
    let (q, t, l) = (pred.n_queries, pred.n_tokens, pred.n_labels);
    let mut g = GeneralGraph::new(encoding, sentence.clone());
    let mut queries = Vec::new();
    for query in 0..q {
        let label = argmax(&pred.label_logits[query * l..(query + 1) * l]);
        if label >= labels.len() {
            continue;
        }
        let anchors = pred
            .anchor_logits
            .iter()
            .map(|a| (0..t).filter(|&tok| a[query * t + tok] > 0.0).collect())
            .collect();
        g.nodes.push(GeneralNode::new(labels[label], anchors));
        queries.push(query);
    }
    if let Some(presence) = &pred.edge_presence_logits {
        for (i, &qi) in queries.iter().enumerate() {
            for (j, &qj) in queries.iter().enumerate() {
                if i == j || presence[qi * q + qj] <= 0.0 {
                    continue;
                }
                let label = (!pred.edge_label_logits.is_empty()).then(|| {
                    let row: Vec<f64> = pred
                        .edge_label_logits
                        .iter()
                        .map(|m| m[qi * q + qj])
                        .collect();
                    encoding.edge_labels()[argmax(&row)].to_string()
                });
                g.edges.push(GeneralEdge {
                    from: i,
                    to: j,
                    label,
                });
            }
        }
    }
    (g, queries)
}

/// Repairs a raw graph so the decoder accepts it. Returns the repaired graph
/// and the number of removed nodes and edges.
pub fn sanitize(
    raw: &GeneralGraph,
    pred: &QueryPredictions,
    queries: &[usize],
) -> (GeneralGraph, usize) {
    match raw.encoding {
        Encoding::OpinionTuple => (raw.clone(), 0),
        Encoding::NodeCentric => sanitize_node_centric(raw),
        Encoding::LabeledEdge => sanitize_labeled_edge(raw, pred, queries),
    }
}

/// Keeps nodes with anchors, merges nodes equal in label and anchors, and
/// keeps only expression -> holder/target edges.
fn sanitize_node_centric(raw: &GeneralGraph) -> (GeneralGraph, usize) {
    let mut out = GeneralGraph::new(raw.encoding, raw.sentence.clone());
    let mut dropped = 0;
    let mut ids: BTreeMap<(&str, &TokenSet), usize> = BTreeMap::new();
    let mut remap = vec![None; raw.nodes.len()];
    for (i, node) in raw.nodes.iter().enumerate() {
        if node.anchors[0].is_empty() {
            dropped += 1;
            continue;
        }
        let key = (node.label.as_str(), &node.anchors[0]);
        remap[i] = Some(*ids.entry(key).or_insert_with(|| {
            out.nodes.push(node.clone());
            out.nodes.len() - 1
        }));
    }
    dropped += raw.nodes.len() - dropped - out.nodes.len();
    let mut edges = BTreeSet::new();
    for e in &raw.edges {
        let (Some(from), Some(to)) = (remap[e.from], remap[e.to]) else {
            dropped += 1;
            continue;
        };
        let ok = parse_expression_label(&out.nodes[from].label).is_some()
            && matches!(out.nodes[to].label.as_str(), HOLDER | TARGET);
        if ok && from != to {
            edges.insert(GeneralEdge {
                from,
                to,
                label: None,
            });
        } else {
            dropped += 1;
        }
    }
    out.edges = edges.into_iter().collect();
    (out, dropped)
}

/// Keeps the single most confident root (unanchored), span nodes with
/// anchors, root -> span expression edges, and holder/target edges leaving
/// spans that have an expression edge.
fn sanitize_labeled_edge(
    raw: &GeneralGraph,
    pred: &QueryPredictions,
    queries: &[usize],
) -> (GeneralGraph, usize) {
    let l = pred.n_labels;
    let root_label = Encoding::LabeledEdge
        .node_labels()
        .iter()
        .position(|&x| x == ROOT)
        .expect("root label");
    let roots: Vec<usize> = (0..raw.nodes.len())
        .filter(|&i| raw.nodes[i].label == ROOT)
        .collect();
    let best_root = roots.iter().copied().reduce(|best, i| {
        let score = |n: usize| pred.label_logits[queries[n] * l + root_label];
        if score(i) > score(best) {
            i
        } else {
            best
        }
    });
    let mut out = GeneralGraph::new(raw.encoding, raw.sentence.clone());
    let Some(best_root) = best_root else {
        // without a root no span can be an expression
        return (out, raw.nodes.len() + raw.edges.len());
    };
    let mut dropped = roots.len() - 1;
    let mut remap = vec![None; raw.nodes.len()];
    remap[best_root] = Some(0);
    out.nodes
        .push(GeneralNode::new(ROOT, vec![TokenSet::new()]));
    for (i, node) in raw.nodes.iter().enumerate() {
        if node.label == ROOT {
            continue;
        }
        if node.anchors[0].is_empty() {
            dropped += 1;
            continue;
        }
        remap[i] = Some(out.nodes.len());
        out.nodes.push(node.clone());
    }
    let mut expressions = BTreeSet::new();
    let mut edges = BTreeSet::new();
    let mut rest = Vec::new();
    for e in &raw.edges {
        let (Some(from), Some(to)) = (remap[e.from], remap[e.to]) else {
            dropped += 1;
            continue;
        };
        let is_expression = e
            .label
            .as_deref()
            .and_then(parse_expression_label)
            .is_some();
        if from == 0 && to != 0 && is_expression {
            expressions.insert(to);
            edges.insert(GeneralEdge {
                from,
                to,
                label: e.label.clone(),
            });
        } else if from != 0 && to != 0 && matches!(e.label.as_deref(), Some(HOLDER | TARGET)) {
            rest.push(GeneralEdge {
                from,
                to,
                label: e.label.clone(),
            });
        } else {
            dropped += 1;
        }
    }
    for e in rest {
        if expressions.contains(&e.from) {
            edges.insert(e);
        } else {
            dropped += 1;
        }
    }
    out.edges = edges.into_iter().collect();
    (out, dropped)
}

/// Full prediction pipeline for one sentence.
pub fn decode_predictions(
    encoding: Encoding,
    sentence: &Sentence,
    pred: &QueryPredictions,
) -> Prediction {
    let (raw, queries) = read_graph(encoding, sentence, pred);
    let (clean, mut dropped) = sanitize(&raw, pred, &queries);
    let decoded = encoding.decode(&clean).expect("sanitized graphs decode");
    dropped += decoded.dropped;
    let mut graph = decoded.graph;
    let mut seen = BTreeSet::new();
    let before = graph.opinions.len();
    graph.opinions.retain(|op| seen.insert(op.key()));
    dropped += before - graph.opinions.len();
    Prediction {
        graph,
        raw,
        dropped,
    }
}

/// Scores under which query `i` produces exactly node `i` of `gold` (in the
/// given order) with margin `margin`, and all other queries produce NULL.
pub fn oracle_predictions(gold: &GeneralGraph, n_queries: usize, margin: f64) -> QueryPredictions {
    let enc = gold.encoding;
    let t = gold.sentence.len();
    let l = enc.node_labels().len() + 1;
    assert!(gold.nodes.len() <= n_queries);
    let mut label_logits = vec![0.0; n_queries * l];
    let mut anchor_logits = vec![vec![-margin; n_queries * t]; enc.channels().len()];
    for q in 0..n_queries {
        let label = match gold.nodes.get(q) {
            Some(node) => enc
                .node_labels()
                .iter()
                .position(|&x| x == node.label)
                .expect("label"),
            None => l - 1,
        };
        label_logits[q * l + label] = margin;
        if let Some(node) = gold.nodes.get(q) {
            for (c, anchors) in node.anchors.iter().enumerate() {
                for &tok in anchors {
                    anchor_logits[c][q * t + tok] = margin;
                }
            }
        }
    }
    let edge_presence_logits = enc.has_edges().then(|| {
        let mut m = vec![-margin; n_queries * n_queries];
        for e in &gold.edges {
            m[e.from * n_queries + e.to] = margin;
        }
        m
    });
    let edge_label_logits = enc
        .edge_labels()
        .iter()
        .map(|&name| {
            let mut m = vec![0.0; n_queries * n_queries];
            for e in &gold.edges {
                if e.label.as_deref() == Some(name) {
                    m[e.from * n_queries + e.to] = margin;
                }
            }
            m
        })
        .collect();
    QueryPredictions {
        n_tokens: t,
        n_queries,
        n_labels: l,
        label_logits,
        anchor_logits,
        edge_presence_logits,
        edge_label_logits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use sentgraph::fixtures::nested_targets;

    #[test]
    fn perfect_scores_decode_to_the_gold_opinions() {
        let g = nested_targets();
        for enc in Encoding::ALL {
            let gold = enc.encode(&g);
            let pred = oracle_predictions(&gold, 2 * g.sentence.len(), 10.0);
            let out = decode_predictions(enc, &g.sentence, &pred);
            assert!(out.graph.same_opinions(&g), "{enc}");
            assert_eq!(out.dropped, 0);
        }
    }

    #[test]
    fn random_scores_never_crash() {
        let g = nested_targets();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for enc in Encoding::ALL {
            for _ in 0..200 {
                let q = 2 * g.sentence.len();
                let t = g.sentence.len();
                let l = enc.node_labels().len() + 1;
                let mut r = |n: usize| {
                    (0..n)
                        .map(|_| rng.random_range(-2.0..2.0))
                        .collect::<Vec<f64>>()
                };
                let pred = QueryPredictions {
                    n_tokens: t,
                    n_queries: q,
                    n_labels: l,
                    label_logits: r(q * l),
                    anchor_logits: enc.channels().iter().map(|_| r(q * t)).collect(),
                    edge_presence_logits: enc.has_edges().then(|| r(q * q)),
                    edge_label_logits: enc.edge_labels().iter().map(|_| r(q * q)).collect(),
                };
                let out = decode_predictions(enc, &g.sentence, &pred);
                assert!(out
                    .graph
                    .opinions
                    .iter()
                    .all(|op| !op.expression.is_empty()));
            }
        }
    }

    #[test]
    fn duplicate_tuples_are_merged() {
        let g = nested_targets();
        let mut gold = Encoding::OpinionTuple.encode(&g);
        gold.nodes.push(gold.nodes[0].clone());
        let pred = oracle_predictions(&gold, 7, 10.0);
        let out = decode_predictions(Encoding::OpinionTuple, &g.sentence, &pred);
        assert!(out.graph.same_opinions(&g));
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn labeled_edge_keeps_the_best_root() {
        let g = nested_targets();
        let mut gold = Encoding::LabeledEdge.encode(&g);
        let root = gold.nodes.iter().position(|n| n.label == ROOT).unwrap();
        gold.nodes.push(gold.nodes[root].clone());
        let mut pred = oracle_predictions(&gold, 14, 10.0);
        // the extra root is less confident
        let last = gold.nodes.len() - 1;
        pred.label_logits[last * 3] = 5.0;
        let out = decode_predictions(Encoding::LabeledEdge, &g.sentence, &pred);
        assert!(out.graph.same_opinions(&g));
        assert_eq!(out.dropped, 1);
    }
}
