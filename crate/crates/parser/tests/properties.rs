use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sentgraph::encodings::{Encoding, GeneralEdge, GeneralGraph};
use sentgraph::synth::{random_graph, template_corpus};
use sentgraph::Sentence;
use sentgraph_parser::hungarian::{brute_force, hungarian};
use sentgraph_parser::model::{Dropout, QueryPredictions};
use sentgraph_parser::objective::{loss_summands, match_queries, GoldTargets};
use sentgraph_parser::predict::{decode_predictions, oracle_predictions};
use sentgraph_parser::tape::Tape;
use sentgraph_parser::{Config, Parser};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn encoding(k: usize) -> Encoding {
    Encoding::ALL[k % 3]
}

fn random_scores(
    rng: &mut ChaCha8Rng,
    enc: Encoding,
    n_tokens: usize,
    n_queries: usize,
    scale: f64,
) -> QueryPredictions {
    let mut draw =
        |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-scale..=scale)).collect() };
    let n_labels = enc.node_labels().len() + 1;
    QueryPredictions {
        n_tokens,
        n_queries,
        n_labels,
        label_logits: draw(n_queries * n_labels),
        anchor_logits: (0..enc.channels().len())
            .map(|_| draw(n_queries * n_tokens))
            .collect(),
        edge_presence_logits: enc.has_edges().then(|| draw(n_queries * n_queries)),
        edge_label_logits: enc
            .edge_labels()
            .iter()
            .map(|_| draw(n_queries * n_queries))
            .collect(),
    }
}

fn permute(g: &GeneralGraph, perm: &[usize]) -> GeneralGraph {
    let mut inverse = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    let mut out = g.clone();
    out.nodes = perm.iter().map(|&i| g.nodes[i].clone()).collect();
    out.edges = g
        .edges
        .iter()
        .rev()
        .map(|e| GeneralEdge {
            from: inverse[e.from],
            to: inverse[e.to],
            label: e.label.clone(),
        })
        .collect();
    out
}

fn tiny_config(enc: Encoding) -> Config {
    Config {
        graph_mode: enc,
        hidden_size: 8,
        n_attention_heads: 2,
        n_layers: 1,
        hidden_size_anchor: 4,
        hidden_size_edge_label: 4,
        hidden_size_edge_presence: 4,
        char_embedding_size: 4,
        ..Config::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hungarian_matches_exhaustive_search(seed in any::<u64>(), n in 1usize..=5, extra in 0usize..=2) {
        let m = n + extra;
        let mut r = rng(seed);
        let cost: Vec<f64> = (0..n * m).map(|_| r.random_range(0..20) as f64 / 4.0).collect();
        let h = hungarian(&cost, n, m).unwrap();
        prop_assert_eq!(h.cost, brute_force(&cost, n, m).cost);
        let mut used = h.row_to_col.clone();
        used.sort_unstable();
        used.dedup();
        prop_assert_eq!(used.len(), n);
        prop_assert!(h.row_to_col.iter().all(|&j| j < m));
    }

    #[test]
    fn matching_ignores_gold_node_order(seed in any::<u64>(), k in 0usize..3, queries in 1usize..12) {
        let enc = encoding(k);
        let mut r = rng(seed);
        let graph = random_graph(&mut r, "p");
        prop_assume!(!graph.sentence.tokens.is_empty());
        let general = enc.encode(&graph);
        let pred = random_scores(&mut r, enc, graph.sentence.len(), queries, 5.0);
        let base = match_queries(&GoldTargets::from_general(&general), &pred).unwrap();
        let mut perm: Vec<usize> = (0..general.nodes.len()).collect();
        perm.shuffle(&mut r);
        let gold = GoldTargets::from_general(&permute(&general, &perm));
        let other = match_queries(&gold, &pred).unwrap();
        prop_assert_eq!(base.total_cost.to_bits(), other.total_cost.to_bits());
        prop_assert_eq!(base.dropped(), other.dropped());
        let a = loss_summands(&pred, &GoldTargets::from_general(&general), &base, 2.0);
        let b = loss_summands(&pred, &gold, &other, 2.0);
        prop_assert_eq!(a.iter().sum::<f64>().to_bits(), b.iter().sum::<f64>().to_bits());
    }

    #[test]
    fn loss_stays_finite_and_non_negative_at_extreme_logits(seed in any::<u64>(), k in 0usize..3, queries in 1usize..10, focal in any::<bool>()) {
        let enc = encoding(k);
        let mut r = rng(seed);
        let graph = random_graph(&mut r, "x");
        prop_assume!(!graph.sentence.tokens.is_empty());
        let gold = GoldTargets::new(enc, &graph);
        let pred = random_scores(&mut r, enc, graph.sentence.len(), queries, 50.0);
        let matching = match_queries(&gold, &pred).unwrap();
        prop_assert!(matching.total_cost.is_finite());
        let gamma = if focal { 2.0 } else { 0.0 };
        for term in loss_summands(&pred, &gold, &matching, gamma) {
            prop_assert!(term.is_finite() && term >= 0.0, "term {}", term);
        }
    }

    #[test]
    fn confident_oracle_scores_decode_to_gold(seed in any::<u64>(), k in 0usize..3) {
        let enc = encoding(k);
        let graph = random_graph(&mut rng(seed), "o");
        let general = enc.encode(&graph);
        // one label per query pair: a span that is both holder and target of
        // one expression needs two parallel edges, which the heads cannot emit
        let mut pairs: Vec<_> = general.edges.iter().map(|e| (e.from, e.to)).collect();
        pairs.sort_unstable();
        pairs.dedup();
        prop_assume!(pairs.len() == general.edges.len());
        let queries = general.nodes.len() + 2;
        let pred = oracle_predictions(&general, queries, 30.0);
        let decoded = decode_predictions(enc, &graph.sentence, &pred);
        prop_assert!(decoded.graph.same_opinions(&graph));
        let gold = GoldTargets::from_general(&general);
        let matching = match_queries(&gold, &pred).unwrap();
        prop_assert_eq!(matching.dropped(), 0);
        prop_assert!(matching.total_cost < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn untrained_model_outputs_are_finite(seed in any::<u64>(), k in 0usize..3, text in "[a-zæøå]{1,8}( [a-zæøå]{1,8}){0,9}") {
        let enc = encoding(k);
        let data = template_corpus(&mut rng(seed), 4);
        let parser = Parser::new(Config { seed, ..tiny_config(enc) }, &data).unwrap();
        let sentence = Sentence::new("u", text);
        let mut t = Tape::new();
        let out = parser.forward(&mut t, &sentence, &mut Dropout::eval());
        prop_assert!(t.first_non_finite().is_none());
        let values = out.values(&t);
        prop_assert_eq!(values.n_tokens, sentence.len());
        let predicted = parser.predict(&sentence);
        prop_assert!(predicted.graph.opinions.iter().all(|o| !o.expression.tokens().is_empty()));
    }
}
