//! Lossless graph encodings of sentiment graphs for the text-to-graph parser.
//!
//! * **Node-centric**: labeled nodes (`Holder`, `Target`, `Exp:<polarity>`),
//!   unlabeled edges from each expression to its holder and target.
//! * **Labeled-edge**: one unlabeled `Span` node per distinct text span plus a
//!   virtual `Root`; polarity lives on the `Root -> expression` edge label and
//!   the roles on `Target` / `Holder` edge labels.
//! * **Opinion-tuple**: one node per opinion labeled with its polarity and
//!   anchored through three channels, no edges.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{OpinionKey, Polarity, Sentence, SentimentGraph, TokenSet};
use crate::error::{DataError, GraphError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    NodeCentric,
    LabeledEdge,
    OpinionTuple,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Anchor,
    Holder,
    Target,
    Expression,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Anchor => "anchor",
            Channel::Holder => "holder",
            Channel::Target => "target",
            Channel::Expression => "expression",
        }
    }
}

pub const HOLDER: &str = "Holder";
pub const TARGET: &str = "Target";
pub const ROOT: &str = "Root";
pub const SPAN: &str = "Span";

const NODE_CENTRIC_LABELS: [&str; 5] = [
    HOLDER,
    TARGET,
    "Exp:Positive",
    "Exp:Neutral",
    "Exp:Negative",
];
const LABELED_EDGE_NODE_LABELS: [&str; 2] = [ROOT, SPAN];
const LABELED_EDGE_EDGE_LABELS: [&str; 5] = [
    "Exp:Positive",
    "Exp:Neutral",
    "Exp:Negative",
    TARGET,
    HOLDER,
];
const OPINION_TUPLE_LABELS: [&str; 3] = ["Positive", "Neutral", "Negative"];

/// `Exp:<polarity>` label used by the node-centric and labeled-edge encodings.
pub fn expression_label(polarity: Polarity) -> &'static str {
    match polarity {
        Polarity::Positive => "Exp:Positive",
        Polarity::Neutral => "Exp:Neutral",
        Polarity::Negative => "Exp:Negative",
    }
}

/// Inverse of [`expression_label`].
pub fn parse_expression_label(label: &str) -> Option<Polarity> {
    label.strip_prefix("Exp:")?.parse().ok()
}

impl Encoding {
    pub const ALL: [Encoding; 3] = [
        Encoding::NodeCentric,
        Encoding::LabeledEdge,
        Encoding::OpinionTuple,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Encoding::NodeCentric => "node-centric",
            Encoding::LabeledEdge => "labeled-edge",
            Encoding::OpinionTuple => "opinion-tuple",
        }
    }

    /// Anchor channels, in the order used by [`GeneralNode::anchors`].
    pub fn channels(self) -> &'static [Channel] {
        match self {
            Encoding::NodeCentric | Encoding::LabeledEdge => &[Channel::Anchor],
            Encoding::OpinionTuple => &[Channel::Holder, Channel::Target, Channel::Expression],
        }
    }

    pub fn node_labels(self) -> &'static [&'static str] {
        match self {
            Encoding::NodeCentric => &NODE_CENTRIC_LABELS,
            Encoding::LabeledEdge => &LABELED_EDGE_NODE_LABELS,
            Encoding::OpinionTuple => &OPINION_TUPLE_LABELS,
        }
    }

    /// Edge label vocabulary; empty when edges are unlabeled or absent.
    pub fn edge_labels(self) -> &'static [&'static str] {
        match self {
            Encoding::LabeledEdge => &LABELED_EDGE_EDGE_LABELS,
            _ => &[],
        }
    }

    pub fn has_edges(self) -> bool {
        !matches!(self, Encoding::OpinionTuple)
    }

    pub fn has_edge_labels(self) -> bool {
        matches!(self, Encoding::LabeledEdge)
    }

    pub fn encode(self, g: &SentimentGraph) -> GeneralGraph {
        match self {
            Encoding::NodeCentric => encode_node_centric(g),
            Encoding::LabeledEdge => encode_labeled_edge(g),
            Encoding::OpinionTuple => encode_opinion_tuple(g),
        }
    }

    pub fn decode(self, g: &GeneralGraph) -> Result<Decoded, GraphError> {
        match self {
            Encoding::NodeCentric => decode_node_centric(g),
            Encoding::LabeledEdge => decode_labeled_edge(g),
            Encoding::OpinionTuple => decode_opinion_tuple(g),
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Encoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Encoding::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown encoding {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneralNode {
    pub label: String,
    /// One token set per channel of the graph's encoding.
    pub anchors: Vec<TokenSet>,
}

impl GeneralNode {
    pub fn new(label: impl Into<String>, anchors: Vec<TokenSet>) -> Self {
        GeneralNode {
            label: label.into(),
            anchors,
        }
    }

    fn first_anchor(&self) -> Option<usize> {
        self.anchors.iter().filter_map(|a| a.first().copied()).min()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GeneralEdge {
    pub from: usize,
    pub to: usize,
    pub label: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralGraph {
    pub encoding: Encoding,
    pub sentence: Sentence,
    pub nodes: Vec<GeneralNode>,
    pub edges: Vec<GeneralEdge>,
}

impl GeneralGraph {
    pub fn new(encoding: Encoding, sentence: Sentence) -> Self {
        GeneralGraph {
            encoding,
            sentence,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    /// Deterministic node order: first anchor index (unanchored first), then
    /// label, then the full anchor sets. Edges are remapped and sorted.
    pub fn canonicalize(&self) -> GeneralGraph {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| {
            let (na, nb) = (&self.nodes[a], &self.nodes[b]);
            (na.first_anchor(), &na.label, &na.anchors).cmp(&(
                nb.first_anchor(),
                &nb.label,
                &nb.anchors,
            ))
        });
        let mut new_id = vec![0; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let mut edges: Vec<GeneralEdge> = self
            .edges
            .iter()
            .map(|e| GeneralEdge {
                from: new_id[e.from],
                to: new_id[e.to],
                label: e.label.clone(),
            })
            .collect();
        edges.sort();
        GeneralGraph {
            encoding: self.encoding,
            sentence: self.sentence.clone(),
            nodes: order.iter().map(|&i| self.nodes[i].clone()).collect(),
            edges,
        }
    }

    /// Checks the structural constraints of the declared encoding.
    pub fn validate(&self) -> Result<(), GraphError> {
        let enc = self.encoding;
        let n_tokens = self.sentence.len();
        for (i, node) in self.nodes.iter().enumerate() {
            if !enc.node_labels().contains(&node.label.as_str()) {
                return Err(GraphError::IllFormed(format!(
                    "node {i}: label {:?} not in the {enc} vocabulary",
                    node.label
                )));
            }
            if node.anchors.len() != enc.channels().len() {
                return Err(GraphError::IllFormed(format!(
                    "node {i}: expected {} anchor channels",
                    enc.channels().len()
                )));
            }
            if node.anchors.iter().flatten().any(|&t| t >= n_tokens) {
                return Err(GraphError::IllFormed(format!(
                    "node {i}: anchor outside the sentence"
                )));
            }
        }
        if !enc.has_edges() && !self.edges.is_empty() {
            return Err(GraphError::IllFormed(format!("{enc} graphs have no edges")));
        }
        for e in &self.edges {
            if e.from >= self.nodes.len() || e.to >= self.nodes.len() {
                return Err(GraphError::IllFormed(format!(
                    "edge {}->{} has a missing endpoint",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(GraphError::IllFormed(format!(
                    "self-loop on node {}",
                    e.from
                )));
            }
            match (&e.label, enc.has_edge_labels()) {
                (Some(l), true) if enc.edge_labels().contains(&l.as_str()) => {}
                (None, false) => {}
                _ => {
                    return Err(GraphError::IllFormed(format!(
                        "edge {}->{} has an invalid label {:?}",
                        e.from, e.to, e.label
                    )))
                }
            }
        }
        if enc == Encoding::LabeledEdge
            && self.nodes.iter().filter(|n| n.label == ROOT).count() != 1
        {
            return Err(GraphError::IllFormed(
                "labeled-edge graphs need exactly one root".into(),
            ));
        }
        Ok(())
    }

    /// Plain-text dump: `N<id> <label> <channel>=<tokens>` per node and
    /// `E <from> <to> <label|_>` per edge, nodes ordered by first anchor then label.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by(|&a, &b| {
            let (na, nb) = (&self.nodes[a], &self.nodes[b]);
            (na.first_anchor(), &na.label, a).cmp(&(nb.first_anchor(), &nb.label, b))
        });
        for id in order {
            let node = &self.nodes[id];
            write!(out, "N{id} {}", node.label).unwrap();
            for (channel, anchors) in self.encoding.channels().iter().zip(&node.anchors) {
                let idx: Vec<String> = anchors.iter().map(usize::to_string).collect();
                write!(out, " {}={}", channel.as_str(), idx.join(",")).unwrap();
            }
            out.push('\n');
        }
        let mut edges = self.edges.clone();
        edges.sort();
        for e in edges {
            writeln!(
                out,
                "E {} {} {}",
                e.from,
                e.to,
                e.label.as_deref().unwrap_or("_")
            )
            .unwrap();
        }
        out
    }
}

/// Output of a decoder together with the number of nodes that could not be
/// turned into valid opinions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decoded {
    pub graph: SentimentGraph,
    pub dropped: usize,
}

fn check_encoding(g: &GeneralGraph, expected: Encoding) -> Result<(), GraphError> {
    if g.encoding != expected {
        return Err(GraphError::WrongEncoding {
            expected: expected.name(),
            found: g.encoding.name(),
        });
    }
    Ok(())
}

pub fn encode_opinion_tuple(g: &SentimentGraph) -> GeneralGraph {
    let mut out = GeneralGraph::new(Encoding::OpinionTuple, g.sentence.clone());
    out.nodes = g
        .opinions
        .iter()
        .map(|op| {
            GeneralNode::new(
                op.polarity.as_str(),
                vec![
                    op.holder.tokens().clone(),
                    op.target.tokens().clone(),
                    op.expression.tokens().clone(),
                ],
            )
        })
        .collect();
    out.canonicalize()
}

pub fn decode_opinion_tuple(g: &GeneralGraph) -> Result<Decoded, GraphError> {
    check_encoding(g, Encoding::OpinionTuple)?;
    let mut graph = SentimentGraph::new(g.sentence.clone(), Vec::new());
    let mut dropped = 0;
    for node in &g.nodes {
        let polarity: Option<Polarity> = node.label.parse().ok();
        match (polarity, node.anchors.as_slice()) {
            (Some(p), [holder, target, expression]) if !expression.is_empty() => {
                let op = graph.opinion_from_tokens(holder, target, expression, p);
                graph.opinions.push(op);
            }
            _ => dropped += 1,
        }
    }
    Ok(Decoded { graph, dropped })
}

/// Interns nodes by (label, anchors).
struct NodeTable {
    ids: BTreeMap<(String, TokenSet), usize>,
    nodes: Vec<GeneralNode>,
}

impl NodeTable {
    fn new() -> Self {
        NodeTable {
            ids: BTreeMap::new(),
            nodes: Vec::new(),
        }
    }

    fn intern(&mut self, label: &str, anchors: &TokenSet) -> usize {
        let key = (label.to_string(), anchors.clone());
        if let Some(&id) = self.ids.get(&key) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes
            .push(GeneralNode::new(label, vec![anchors.clone()]));
        self.ids.insert(key, id);
        id
    }
}

fn edge(from: usize, to: usize, label: Option<&str>) -> GeneralEdge {
    GeneralEdge {
        from,
        to,
        label: label.map(str::to_string),
    }
}

pub fn encode_node_centric(g: &SentimentGraph) -> GeneralGraph {
    let mut table = NodeTable::new();
    let mut edges = BTreeSet::new();
    for op in &g.opinions {
        let exp = table.intern(expression_label(op.polarity), op.expression.tokens());
        if !op.holder.is_empty() {
            let h = table.intern(HOLDER, op.holder.tokens());
            edges.insert(edge(exp, h, None));
        }
        if !op.target.is_empty() {
            let t = table.intern(TARGET, op.target.tokens());
            edges.insert(edge(exp, t, None));
        }
    }
    let mut out = GeneralGraph::new(Encoding::NodeCentric, g.sentence.clone());
    out.nodes = table.nodes;
    out.edges = edges.into_iter().collect();
    out.canonicalize()
}

/// Emits the opinions of one expression: the cross product of its holder and
/// target choices, where an absent role contributes a single empty choice.
fn expand(
    graph: &mut SentimentGraph,
    expression: &TokenSet,
    polarity: Polarity,
    holders: &[&TokenSet],
    targets: &[&TokenSet],
) {
    let empty = TokenSet::new();
    let holders: Vec<&TokenSet> = if holders.is_empty() {
        vec![&empty]
    } else {
        holders.to_vec()
    };
    let targets: Vec<&TokenSet> = if targets.is_empty() {
        vec![&empty]
    } else {
        targets.to_vec()
    };
    for h in &holders {
        for t in &targets {
            let op = graph.opinion_from_tokens(h, t, expression, polarity);
            graph.opinions.push(op);
        }
    }
}

pub fn decode_node_centric(g: &GeneralGraph) -> Result<Decoded, GraphError> {
    check_encoding(g, Encoding::NodeCentric)?;
    let mut holders: Vec<Vec<&TokenSet>> = vec![Vec::new(); g.nodes.len()];
    let mut targets: Vec<Vec<&TokenSet>> = vec![Vec::new(); g.nodes.len()];
    for e in &g.edges {
        let (from, to) = node_pair(g, e)?;
        if parse_expression_label(&from.label).is_none() {
            return Err(GraphError::IllFormed(format!(
                "edge {}->{} leaves a {} node; only expressions have outgoing edges",
                e.from, e.to, from.label
            )));
        }
        match to.label.as_str() {
            HOLDER => holders[e.from].push(&to.anchors[0]),
            TARGET => targets[e.from].push(&to.anchors[0]),
            other => {
                return Err(GraphError::IllFormed(format!(
                    "edge {}->{} points to a {other} node",
                    e.from, e.to
                )))
            }
        }
    }
    let mut graph = SentimentGraph::new(g.sentence.clone(), Vec::new());
    let mut dropped = 0;
    for (id, node) in g.nodes.iter().enumerate() {
        let Some(polarity) = parse_expression_label(&node.label) else {
            continue;
        };
        match node.anchors.first() {
            Some(exp) if !exp.is_empty() => {
                expand(&mut graph, exp, polarity, &holders[id], &targets[id]);
            }
            _ => dropped += 1,
        }
    }
    Ok(Decoded { graph, dropped })
}

fn node_pair<'a>(
    g: &'a GeneralGraph,
    e: &GeneralEdge,
) -> Result<(&'a GeneralNode, &'a GeneralNode), GraphError> {
    match (g.nodes.get(e.from), g.nodes.get(e.to)) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(GraphError::IllFormed(format!(
            "edge {}->{} has a missing endpoint",
            e.from, e.to
        ))),
    }
}

pub fn encode_labeled_edge(g: &SentimentGraph) -> GeneralGraph {
    let mut table = NodeTable::new();
    let root = table.intern(ROOT, &TokenSet::new());
    let mut edges = BTreeSet::new();
    for op in &g.opinions {
        let exp = table.intern(SPAN, op.expression.tokens());
        edges.insert(edge(root, exp, Some(expression_label(op.polarity))));
        if !op.holder.is_empty() {
            let h = table.intern(SPAN, op.holder.tokens());
            edges.insert(edge(exp, h, Some(HOLDER)));
        }
        if !op.target.is_empty() {
            let t = table.intern(SPAN, op.target.tokens());
            edges.insert(edge(exp, t, Some(TARGET)));
        }
    }
    let mut out = GeneralGraph::new(Encoding::LabeledEdge, g.sentence.clone());
    out.nodes = table.nodes;
    out.edges = edges.into_iter().collect();
    out.canonicalize()
}

pub fn decode_labeled_edge(g: &GeneralGraph) -> Result<Decoded, GraphError> {
    check_encoding(g, Encoding::LabeledEdge)?;
    let roots: Vec<usize> = (0..g.nodes.len())
        .filter(|&i| g.nodes[i].label == ROOT)
        .collect();
    let root = match roots.as_slice() {
        [] if g.nodes.is_empty() => {
            return Ok(Decoded {
                graph: SentimentGraph::new(g.sentence.clone(), Vec::new()),
                dropped: 0,
            })
        }
        [r] => *r,
        _ => {
            return Err(GraphError::IllFormed(format!(
                "expected one root, found {}",
                roots.len()
            )))
        }
    };

    let mut polarities: Vec<Vec<Polarity>> = vec![Vec::new(); g.nodes.len()];
    for e in g.edges.iter().filter(|e| e.from == root) {
        node_pair(g, e)?;
        let polarity = e
            .label
            .as_deref()
            .and_then(parse_expression_label)
            .ok_or_else(|| {
                GraphError::IllFormed(format!(
                    "root edge to {} is not an expression edge ({:?})",
                    e.to, e.label
                ))
            })?;
        polarities[e.to].push(polarity);
    }

    let mut holders: Vec<Vec<&TokenSet>> = vec![Vec::new(); g.nodes.len()];
    let mut targets: Vec<Vec<&TokenSet>> = vec![Vec::new(); g.nodes.len()];
    for e in g.edges.iter().filter(|e| e.from != root) {
        let (_, to) = node_pair(g, e)?;
        if polarities[e.from].is_empty() {
            return Err(GraphError::IllFormed(format!(
                "{:?} edge {}->{} leaves a node that is not an expression",
                e.label, e.from, e.to
            )));
        }
        match e.label.as_deref() {
            Some(HOLDER) => holders[e.from].push(&to.anchors[0]),
            Some(TARGET) => targets[e.from].push(&to.anchors[0]),
            other => {
                return Err(GraphError::IllFormed(format!(
                    "edge {}->{} has label {other:?}; expected Holder or Target",
                    e.from, e.to
                )))
            }
        }
    }

    let mut graph = SentimentGraph::new(g.sentence.clone(), Vec::new());
    let mut dropped = 0;
    for (id, node) in g.nodes.iter().enumerate() {
        for &polarity in &polarities[id] {
            match node.anchors.first() {
                Some(exp) if !exp.is_empty() => {
                    expand(&mut graph, exp, polarity, &holders[id], &targets[id]);
                }
                _ => dropped += 1,
            }
        }
    }
    Ok(Decoded { graph, dropped })
}

/// Result of encoding and decoding one graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundTrip {
    pub missing: Vec<OpinionKey>,
    pub extra: Vec<OpinionKey>,
}

impl RoundTrip {
    pub fn is_lossless(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty()
    }
}

/// Multiset difference between gold and recovered opinions.
pub fn opinion_diff(gold: &SentimentGraph, recovered: &SentimentGraph) -> RoundTrip {
    let mut remaining: Vec<OpinionKey> = recovered.opinion_keys();
    let mut missing = Vec::new();
    for key in gold.opinion_keys() {
        match remaining.iter().position(|k| *k == key) {
            Some(pos) => {
                remaining.remove(pos);
            }
            None => missing.push(key),
        }
    }
    RoundTrip {
        missing,
        extra: remaining,
    }
}

pub fn roundtrip_check(g: &SentimentGraph, encoding: Encoding) -> RoundTrip {
    let decoded = encoding
        .decode(&encoding.encode(g))
        .expect("decoders accept encoder output");
    opinion_diff(g, &decoded.graph)
}

/// Whether `g` is in the class of graphs every encoding reproduces exactly:
/// opinions sharing an expression node must form a full holder x target
/// cross product, share the polarity, and no holder or target may equal its
/// own expression span.
pub fn lossless_precondition(g: &SentimentGraph) -> bool {
    let keys = g.opinion_keys();
    if keys.windows(2).any(|w| w[0] == w[1]) {
        return false;
    }
    let mut groups: BTreeMap<&TokenSet, Vec<&OpinionKey>> = BTreeMap::new();
    for k in &keys {
        if k.0 == k.2 || k.1 == k.2 {
            return false;
        }
        groups.entry(&k.2).or_default().push(k);
    }
    groups.values().all(|group| {
        if group.iter().any(|k| k.3 != group[0].3) {
            return false;
        }
        let choices = |pick: fn(&OpinionKey) -> &TokenSet| -> BTreeSet<TokenSet> {
            let set: BTreeSet<TokenSet> = group
                .iter()
                .map(|k| pick(k).clone())
                .filter(|s| !s.is_empty())
                .collect();
            if set.is_empty() {
                [TokenSet::new()].into()
            } else {
                set
            }
        };
        let holders = choices(|k| &k.0);
        let targets = choices(|k| &k.1);
        let actual: BTreeSet<(TokenSet, TokenSet)> =
            group.iter().map(|k| (k.0.clone(), k.1.clone())).collect();
        actual.len() == holders.len() * targets.len()
            && holders.iter().all(|h| {
                targets
                    .iter()
                    .all(|t| actual.contains(&(h.clone(), t.clone())))
            })
    })
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    sent_id: String,
    text: String,
    encoding: Encoding,
    nodes: Vec<GeneralNode>,
    edges: Vec<GeneralEdge>,
}

/// JSON array of encoded graphs, one object per sentence.
pub fn serialize_graphs(graphs: &[GeneralGraph]) -> String {
    let raw: Vec<RawGraph> = graphs
        .iter()
        .map(|g| RawGraph {
            sent_id: g.sentence.sent_id.clone(),
            text: g.sentence.text.clone(),
            encoding: g.encoding,
            nodes: g.nodes.clone(),
            edges: g.edges.clone(),
        })
        .collect();
    serde_json::to_string(&raw).expect("graph serialization cannot fail")
}

pub fn parse_graphs(json: &str) -> Result<Vec<GeneralGraph>, DataError> {
    let raw: Vec<RawGraph> = serde_json::from_str(json)?;
    raw.into_iter()
        .map(|r| {
            let g = GeneralGraph {
                encoding: r.encoding,
                sentence: Sentence::new(r.sent_id, r.text),
                nodes: r.nodes,
                edges: r.edges,
            };
            g.validate().map_err(|e| DataError::BadValue {
                sent_id: g.sentence.sent_id.clone(),
                field: "nodes".into(),
                reason: e.to_string(),
            })?;
            Ok(g)
        })
        .collect()
}
