//! Network: token encoder, latent queries, transformer stack and heads.
//!
//! Token representation = word embedding + final states of a bidirectional
//! character GRU. Each token is projected onto `query_length` queries, which
//! run through pre-norm transformer layers without positional information.
//! Heads score a node label per query (with a NULL class), anchors per
//! channel (scaled bilinear between query and token), and for edge-bearing
//! encodings edge presence and edge labels between query pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sentgraph::data::Sentence;
use sentgraph::encodings::Encoding;

use crate::config::Config;
use crate::params::{Group, ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::vocab::{Vocab, PAD_CHAR, UNK_WORD};

const LN_EPS: f64 = 1e-5;

/// Dropout masks come from `rng`; without one the network runs in
/// evaluation mode.
pub struct Dropout<'a> {
    rng: Option<&'a mut ChaCha8Rng>,
}

impl<'a> Dropout<'a> {
    pub fn eval() -> Dropout<'static> {
        Dropout { rng: None }
    }

    pub fn train(rng: &'a mut ChaCha8Rng) -> Dropout<'a> {
        Dropout { rng: Some(rng) }
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    fn apply(&mut self, t: &mut Tape, x: Var, p: f64) -> Var {
        let Some(rng) = self.rng.as_deref_mut() else {
            return x;
        };
        if p == 0.0 {
            return x;
        }
        let (r, c) = t.shape(x);
        let keep = 1.0 / (1.0 - p);
        let mask = (0..r * c)
            .map(|_| if rng.random_bool(p) { 0.0 } else { keep })
            .collect();
        let m = t.constant(r, c, mask);
        t.mul(x, m)
    }

    fn replace_words(&mut self, ids: &mut [usize], p: f64) {
        if let Some(rng) = self.rng.as_deref_mut() {
            if p > 0.0 {
                for id in ids.iter_mut() {
                    if rng.random_bool(p) {
                        *id = UNK_WORD;
                    }
                }
            }
        }
    }
}

struct Init<'a> {
    store: &'a mut ParamStore,
    rng: ChaCha8Rng,
}

impl Init<'_> {
    fn xavier(&mut self, name: String, rows: usize, cols: usize, group: Group) -> ParamId {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let v = (0..rows * cols)
            .map(|_| self.rng.random_range(-a..a))
            .collect();
        self.store.add(name, rows, cols, v, group)
    }

    fn fill(&mut self, name: String, rows: usize, cols: usize, x: f64, group: Group) -> ParamId {
        self.store
            .add(name, rows, cols, vec![x; rows * cols], group)
    }

    fn normal(
        &mut self,
        name: String,
        rows: usize,
        cols: usize,
        std: f64,
        group: Group,
    ) -> ParamId {
        let d = Normal::new(0.0, std).expect("positive std");
        let v = (0..rows * cols).map(|_| d.sample(&mut self.rng)).collect();
        self.store.add(name, rows, cols, v, group)
    }

    fn linear(&mut self, name: &str, inp: usize, out: usize, group: Group) -> Linear {
        Linear {
            w: self.xavier(format!("{name}.weight"), inp, out, group),
            b: self.fill(format!("{name}.bias"), 1, out, 0.0, group),
        }
    }

    fn layer_norm(&mut self, name: &str, size: usize) -> Norm {
        Norm {
            gain: self.fill(format!("{name}.gain"), 1, size, 1.0, Group::Decoder),
            bias: self.fill(format!("{name}.bias"), 1, size, 0.0, Group::Decoder),
        }
    }

    fn bilinear(&mut self, name: &str, inp: usize, size: usize, outputs: usize) -> Bilinear {
        Bilinear {
            left: self.linear(&format!("{name}.left"), inp, size, Group::Decoder),
            right: self.linear(&format!("{name}.right"), inp, size, Group::Decoder),
            u: (0..outputs)
                .map(|k| self.xavier(format!("{name}.u{k}"), size, size, Group::Decoder))
                .collect(),
            bias: (0..outputs)
                .map(|k| self.fill(format!("{name}.b{k}"), 1, 1, 0.0, Group::Decoder))
                .collect(),
            size,
        }
    }
}

#[derive(Clone, Debug)]
struct Linear {
    w: ParamId,
    b: ParamId,
}

impl Linear {
    fn forward(&self, t: &mut Tape, s: &ParamStore, x: Var) -> Var {
        let w = t.param(s, self.w);
        let b = t.param(s, self.b);
        let y = t.matmul(x, w);
        t.add_row(y, b)
    }
}

#[derive(Clone, Debug)]
struct Norm {
    gain: ParamId,
    bias: ParamId,
}

impl Norm {
    fn forward(&self, t: &mut Tape, s: &ParamStore, x: Var) -> Var {
        let n = t.layer_norm(x, LN_EPS);
        let g = t.param(s, self.gain);
        let b = t.param(s, self.bias);
        let y = t.mul_row(n, g);
        t.add_row(y, b)
    }
}

/// score_k(a, b) = gelu(left a) U_k gelu(right b)^T / sqrt(size) + bias_k
#[derive(Clone, Debug)]
struct Bilinear {
    left: Linear,
    right: Linear,
    u: Vec<ParamId>,
    bias: Vec<ParamId>,
    size: usize,
}

impl Bilinear {
    fn forward(&self, t: &mut Tape, s: &ParamStore, a: Var, b: Var) -> Vec<Var> {
        let l = self.left.forward(t, s, a);
        let l = t.gelu(l);
        let r = self.right.forward(t, s, b);
        let r = t.gelu(r);
        let scale = 1.0 / (self.size as f64).sqrt();
        self.u
            .iter()
            .zip(&self.bias)
            .map(|(&u, &bias)| {
                let u = t.param(s, u);
                let lu = t.matmul(l, u);
                let sc = t.matmul_t(lu, r);
                let sc = t.scale(sc, scale);
                let b = t.param(s, bias);
                t.add_scalar(sc, b)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
struct Gru {
    input: Linear,
    hidden: Linear,
    size: usize,
}

impl Gru {
    /// Runs over right-padded character sequences (`steps[k]` holds
    /// character k of every sequence) and returns the state after each
    /// sequence's last character.
    fn forward(&self, t: &mut Tape, s: &ParamStore, steps: &[Var], lengths: &[usize]) -> Var {
        let n = lengths.len();
        let hs = self.size;
        let mut h = t.constant(n, hs, vec![0.0; n * hs]);
        for (step, &x) in steps.iter().enumerate() {
            let gi = self.input.forward(t, s, x);
            let gh = self.hidden.forward(t, s, h);
            let i_r = t.slice_cols(gi, 0, hs);
            let i_z = t.slice_cols(gi, hs, hs);
            let i_n = t.slice_cols(gi, 2 * hs, hs);
            let h_r = t.slice_cols(gh, 0, hs);
            let h_z = t.slice_cols(gh, hs, hs);
            let h_n = t.slice_cols(gh, 2 * hs, hs);
            let r = t.add(i_r, h_r);
            let r = t.sigmoid(r);
            let z = t.add(i_z, h_z);
            let z = t.sigmoid(z);
            let rn = t.mul(r, h_n);
            let nn = t.add(i_n, rn);
            let nn = t.tanh(nn);
            // h' = n + z * (h - n)
            let diff = t.sub(h, nn);
            let zd = t.mul(z, diff);
            let h_new = t.add(nn, zd);
            let active: Vec<f64> = (0..n)
                .flat_map(|i| std::iter::repeat_n(if step < lengths[i] { 1.0 } else { 0.0 }, hs))
                .collect();
            if active.iter().all(|&a| a == 1.0) {
                h = h_new;
            } else {
                // keep the old state on padded positions
                let m = t.constant(n, hs, active);
                let delta = t.sub(h_new, h);
                let md = t.mul(m, delta);
                h = t.add(h, md);
            }
        }
        h
    }
}

#[derive(Clone, Debug)]
struct Layer {
    norm_attn: Norm,
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    norm_ff: Norm,
    ff1: Linear,
    ff2: Linear,
}

/// Parameter handles of the whole network.
#[derive(Clone, Debug)]
pub struct Model {
    pub encoding: Encoding,
    word_embedding: ParamId,
    char_embedding: Option<ParamId>,
    char_forward: Option<Gru>,
    char_backward: Option<Gru>,
    query: Linear,
    layers: Vec<Layer>,
    final_norm: Option<Norm>,
    label: Linear,
    anchors: Vec<Bilinear>,
    edge_presence: Option<Bilinear>,
    edge_label: Option<Bilinear>,
    hidden: usize,
    heads: usize,
    query_length: usize,
    n_labels: usize,
}

/// Tape handles of one forward pass.
#[derive(Clone, Debug)]
pub struct Outputs {
    pub n_tokens: usize,
    pub n_queries: usize,
    /// queries x (labels + NULL)
    pub label: Var,
    /// per channel: queries x tokens
    pub anchors: Vec<Var>,
    /// queries x queries
    pub edge_presence: Option<Var>,
    /// per edge label: queries x queries
    pub edge_labels: Vec<Var>,
}

/// Plain values of [`Outputs`], detached from the tape.
#[derive(Clone, Debug, PartialEq)]
pub struct QueryPredictions {
    pub n_tokens: usize,
    pub n_queries: usize,
    pub n_labels: usize,
    pub label_logits: Vec<f64>,
    pub anchor_logits: Vec<Vec<f64>>,
    pub edge_presence_logits: Option<Vec<f64>>,
    pub edge_label_logits: Vec<Vec<f64>>,
}

impl Outputs {
    pub fn values(&self, t: &Tape) -> QueryPredictions {
        QueryPredictions {
            n_tokens: self.n_tokens,
            n_queries: self.n_queries,
            n_labels: t.shape(self.label).1,
            label_logits: t.value(self.label).to_vec(),
            anchor_logits: self.anchors.iter().map(|&a| t.value(a).to_vec()).collect(),
            edge_presence_logits: self.edge_presence.map(|e| t.value(e).to_vec()),
            edge_label_logits: self
                .edge_labels
                .iter()
                .map(|&e| t.value(e).to_vec())
                .collect(),
        }
    }
}

impl Model {
    /// Registers all parameters in `store` in a fixed order and initializes
    /// them from `config.seed`.
    pub fn new(config: &Config, vocab: &Vocab, store: &mut ParamStore) -> Model {
        let h = config.hidden_size;
        let enc = config.graph_mode;
        let mut init = Init {
            store,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
        };
        let word_embedding = init.normal(
            "encoder.word_embedding".into(),
            vocab.n_words(),
            h,
            1.0,
            Group::Encoder,
        );
        let (char_embedding, char_forward, char_backward) = if config.char_embedding {
            let ce = config.char_embedding_size;
            let emb = init.normal(
                "encoder.char_embedding".into(),
                vocab.n_chars(),
                ce,
                1.0,
                Group::Encoder,
            );
            let gru = |init: &mut Init, name: &str| Gru {
                input: init.linear(
                    &format!("encoder.{name}.input"),
                    ce,
                    3 * h / 2,
                    Group::Encoder,
                ),
                hidden: init.linear(
                    &format!("encoder.{name}.hidden"),
                    h / 2,
                    3 * h / 2,
                    Group::Encoder,
                ),
                size: h / 2,
            };
            let f = gru(&mut init, "char_gru_forward");
            let b = gru(&mut init, "char_gru_backward");
            (Some(emb), Some(f), Some(b))
        } else {
            (None, None, None)
        };
        let ql = config.query_length();
        let query = init.linear("decoder.query", h, ql * h, Group::Decoder);
        let ff = config.hidden_size_ff();
        let layers = (0..config.n_layers)
            .map(|i| {
                let p = format!("decoder.layer{i}");
                Layer {
                    norm_attn: init.layer_norm(&format!("{p}.norm_attn"), h),
                    q: init.linear(&format!("{p}.attn_q"), h, h, Group::Decoder),
                    k: init.linear(&format!("{p}.attn_k"), h, h, Group::Decoder),
                    v: init.linear(&format!("{p}.attn_v"), h, h, Group::Decoder),
                    o: init.linear(&format!("{p}.attn_o"), h, h, Group::Decoder),
                    norm_ff: init.layer_norm(&format!("{p}.norm_ff"), h),
                    ff1: init.linear(&format!("{p}.ff1"), h, ff, Group::Decoder),
                    ff2: init.linear(&format!("{p}.ff2"), ff, h, Group::Decoder),
                }
            })
            .collect();
        let final_norm = (config.n_layers > 0).then(|| init.layer_norm("decoder.final_norm", h));
        let n_labels = enc.node_labels().len() + 1;
        let label = init.linear("decoder.label", h, n_labels, Group::Decoder);
        let anchors = enc
            .channels()
            .iter()
            .map(|c| {
                init.bilinear(
                    &format!("decoder.anchor_{}", c.as_str()),
                    h,
                    config.hidden_size_anchor,
                    1,
                )
            })
            .collect();
        let edge_presence = enc.has_edges().then(|| {
            init.bilinear(
                "decoder.edge_presence",
                h,
                config.hidden_size_edge_presence,
                1,
            )
        });
        let edge_label = enc.has_edge_labels().then(|| {
            init.bilinear(
                "decoder.edge_label",
                h,
                config.hidden_size_edge_label,
                enc.edge_labels().len(),
            )
        });
        let model = Model {
            encoding: enc,
            word_embedding,
            char_embedding,
            char_forward,
            char_backward,
            query,
            layers,
            final_norm,
            label,
            anchors,
            edge_presence,
            edge_label,
            hidden: h,
            heads: config.n_attention_heads,
            query_length: ql,
            n_labels,
        };
        model.apply_freezing(config, init.store);
        model
    }

    /// Marks frozen parameters according to the configuration.
    pub fn apply_freezing(&self, config: &Config, store: &mut ParamStore) {
        for id in store.ids() {
            let p = store.get_mut(id);
            p.frozen = (config.freeze_bert && p.group == Group::Encoder)
                || (config.encoder_freeze_embedding && id == self.word_embedding);
        }
    }

    pub fn word_embedding(&self) -> ParamId {
        self.word_embedding
    }

    pub fn char_embedding(&self) -> Option<ParamId> {
        self.char_embedding
    }

    /// Index of the NULL label (the last class).
    pub fn null_label(&self) -> usize {
        self.n_labels - 1
    }

    pub fn query_length(&self) -> usize {
        self.query_length
    }

    /// Contextless token representations, `tokens x hidden`.
    pub fn encode_tokens(
        &self,
        t: &mut Tape,
        s: &ParamStore,
        vocab: &Vocab,
        sentence: &Sentence,
        drop: &mut Dropout,
        dropout_word: f64,
    ) -> Var {
        let mut ids: Vec<usize> = sentence
            .tokens
            .iter()
            .map(|tok| vocab.word(&tok.text))
            .collect();
        drop.replace_words(&mut ids, dropout_word);
        let words = t.gather_param(s, self.word_embedding, &ids);
        let (Some(emb), Some(fw), Some(bw)) =
            (self.char_embedding, &self.char_forward, &self.char_backward)
        else {
            return words;
        };
        let chars: Vec<Vec<usize>> = sentence
            .tokens
            .iter()
            .map(|tok| vocab.chars_of(&tok.text))
            .collect();
        let lengths: Vec<usize> = chars.iter().map(|c| c.len().max(1)).collect();
        let max_len = lengths.iter().copied().max().unwrap_or(0);
        let gather_step = |t: &mut Tape, k: usize, reverse: bool| {
            let idx: Vec<usize> = chars
                .iter()
                .map(|c| {
                    let pos = if reverse {
                        c.len().checked_sub(k + 1)
                    } else {
                        Some(k)
                    };
                    pos.and_then(|p| c.get(p).copied()).unwrap_or(PAD_CHAR)
                })
                .collect();
            t.gather_param(s, emb, &idx)
        };
        let forward: Vec<Var> = (0..max_len).map(|k| gather_step(t, k, false)).collect();
        let backward: Vec<Var> = (0..max_len).map(|k| gather_step(t, k, true)).collect();
        let f = fw.forward(t, s, &forward, &lengths);
        let b = bw.forward(t, s, &backward, &lengths);
        let both = t.concat_cols(&[f, b]);
        t.add(words, both)
    }

    /// `query_length` queries per token, row `i * query_length + k` being
    /// query k of token i.
    pub fn queries(&self, t: &mut Tape, s: &ParamStore, tokens: Var) -> Var {
        let n = t.shape(tokens).0;
        let q = self.query.forward(t, s, tokens);
        t.reshape(q, n * self.query_length, self.hidden)
    }

    fn attention(
        &self,
        t: &mut Tape,
        s: &ParamStore,
        layer: &Layer,
        x: Var,
        drop: &mut Dropout,
        p_attn: f64,
    ) -> Var {
        let q = layer.q.forward(t, s, x);
        let k = layer.k.forward(t, s, x);
        let v = layer.v.forward(t, s, x);
        let d = self.hidden / self.heads;
        let scale = 1.0 / (d as f64).sqrt();
        let heads: Vec<Var> = (0..self.heads)
            .map(|hd| {
                let qh = t.slice_cols(q, hd * d, d);
                let kh = t.slice_cols(k, hd * d, d);
                let vh = t.slice_cols(v, hd * d, d);
                let sc = t.matmul_t(qh, kh);
                let sc = t.scale(sc, scale);
                let p = t.softmax_rows(sc);
                let p = drop.apply(t, p, p_attn);
                t.matmul(p, vh)
            })
            .collect();
        let ctx = if heads.len() == 1 {
            heads[0]
        } else {
            t.concat_cols(&heads)
        };
        layer.o.forward(t, s, ctx)
    }

    /// Transformer stack and heads on top of given queries.
    pub fn decode(
        &self,
        t: &mut Tape,
        s: &ParamStore,
        tokens: Var,
        queries: Var,
        drop: &mut Dropout,
        cfg: &Config,
    ) -> Outputs {
        let mut h = queries;
        for layer in &self.layers {
            let a = layer.norm_attn.forward(t, s, h);
            let a = self.attention(t, s, layer, a, drop, cfg.dropout_transformer_attention);
            let a = drop.apply(t, a, cfg.dropout_transformer);
            h = t.add(h, a);
            let f = layer.norm_ff.forward(t, s, h);
            let f = layer.ff1.forward(t, s, f);
            let f = t.gelu(f);
            let f = layer.ff2.forward(t, s, f);
            let f = drop.apply(t, f, cfg.dropout_transformer);
            h = t.add(h, f);
        }
        if let Some(norm) = &self.final_norm {
            h = norm.forward(t, s, h);
        }
        let label_in = drop.apply(t, h, cfg.dropout_label);
        let label = self.label.forward(t, s, label_in);
        let anchor_in = drop.apply(t, h, cfg.dropout_anchor);
        let anchors = self
            .anchors
            .iter()
            .map(|head| head.forward(t, s, anchor_in, tokens)[0])
            .collect();
        let edge_presence = self.edge_presence.as_ref().map(|head| {
            let x = drop.apply(t, h, cfg.dropout_edge_presence);
            head.forward(t, s, x, x)[0]
        });
        let edge_labels = match &self.edge_label {
            Some(head) => {
                let x = drop.apply(t, h, cfg.dropout_edge_label);
                head.forward(t, s, x, x)
            }
            None => Vec::new(),
        };
        Outputs {
            n_tokens: t.shape(tokens).0,
            n_queries: t.shape(queries).0,
            label,
            anchors,
            edge_presence,
            edge_labels,
        }
    }

    pub fn forward(
        &self,
        t: &mut Tape,
        s: &ParamStore,
        vocab: &Vocab,
        sentence: &Sentence,
        drop: &mut Dropout,
        cfg: &Config,
    ) -> Outputs {
        assert!(
            !sentence.tokens.is_empty(),
            "cannot run the network on an empty sentence"
        );
        let tokens = self.encode_tokens(t, s, vocab, sentence, drop, cfg.dropout_word);
        let queries = self.queries(t, s, tokens);
        self.decode(t, s, tokens, queries, drop, cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sentgraph::fixtures::nested_targets;

    fn small(enc: Encoding, layers: usize) -> Config {
        Config {
            graph_mode: enc,
            hidden_size: 16,
            n_attention_heads: 4,
            n_layers: layers,
            hidden_size_anchor: 8,
            hidden_size_edge_label: 8,
            hidden_size_edge_presence: 8,
            char_embedding_size: 6,
            ..Config::default()
        }
    }

    #[test]
    fn output_shapes() {
        for enc in Encoding::ALL {
            let cfg = small(enc, 1);
            let g = nested_targets();
            let vocab = Vocab::build(std::slice::from_ref(&g));
            let mut store = ParamStore::default();
            let model = Model::new(&cfg, &vocab, &mut store);
            let mut t = Tape::new();
            let out = model.forward(
                &mut t,
                &store,
                &vocab,
                &g.sentence,
                &mut Dropout::eval(),
                &cfg,
            );
            let q = 7 * cfg.query_length();
            assert_eq!(out.n_queries, q);
            assert_eq!(t.shape(out.label), (q, enc.node_labels().len() + 1));
            assert_eq!(out.anchors.len(), enc.channels().len());
            for &a in &out.anchors {
                assert_eq!(t.shape(a), (q, 7));
            }
            assert_eq!(
                out.edge_presence.map(|e| t.shape(e)),
                enc.has_edges().then_some((q, q))
            );
            assert_eq!(out.edge_labels.len(), enc.edge_labels().len());
            assert!(t.first_non_finite().is_none());
        }
    }

    #[test]
    fn one_token_sentence() {
        let cfg = small(Encoding::OpinionTuple, 2);
        let s = Sentence::new("one", "word");
        let vocab = Vocab::build(&[]);
        let mut store = ParamStore::default();
        let model = Model::new(&cfg, &vocab, &mut store);
        let mut t = Tape::new();
        let out = model.forward(&mut t, &store, &vocab, &s, &mut Dropout::eval(), &cfg);
        assert_eq!(t.shape(out.label), (1, 4));
        assert_eq!(t.shape(out.anchors[0]), (1, 1));
    }

    #[test]
    fn without_layers_the_queries_are_the_projection() {
        let cfg = small(Encoding::OpinionTuple, 0);
        let g = nested_targets();
        let vocab = Vocab::build(std::slice::from_ref(&g));
        let mut store = ParamStore::default();
        let model = Model::new(&cfg, &vocab, &mut store);
        assert!(store
            .iter()
            .all(|p| !p.name.contains("layer") && !p.name.contains("final_norm")));
        let mut t = Tape::new();
        let tokens = model.encode_tokens(
            &mut t,
            &store,
            &vocab,
            &g.sentence,
            &mut Dropout::eval(),
            0.0,
        );
        let q = model.queries(&mut t, &store, tokens);
        let out = model.decode(&mut t, &store, tokens, q, &mut Dropout::eval(), &cfg);
        // the label head reads the projected queries directly
        let w = store.get(store.find("decoder.label.weight").unwrap());
        let qv = t.value(q);
        let expected: f64 = (0..16).map(|k| qv[k] * w.value[k * 4]).sum();
        assert!((t.value(out.label)[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn dropout_only_in_training() {
        let cfg = small(Encoding::NodeCentric, 1);
        let g = nested_targets();
        let vocab = Vocab::build(std::slice::from_ref(&g));
        let mut store = ParamStore::default();
        let model = Model::new(&cfg, &vocab, &mut store);
        let run = |drop: &mut Dropout| {
            let mut t = Tape::new();
            let out = model.forward(&mut t, &store, &vocab, &g.sentence, drop, &cfg);
            out.values(&t)
        };
        assert_eq!(run(&mut Dropout::eval()), run(&mut Dropout::eval()));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_ne!(
            run(&mut Dropout::train(&mut rng)),
            run(&mut Dropout::eval())
        );
    }

    #[test]
    fn freezing_flags() {
        let g = nested_targets();
        let vocab = Vocab::build(std::slice::from_ref(&g));
        let mut store = ParamStore::default();
        let cfg = Config {
            freeze_bert: true,
            ..small(Encoding::OpinionTuple, 1)
        };
        Model::new(&cfg, &vocab, &mut store);
        for p in store.iter() {
            assert_eq!(p.frozen, p.group == Group::Encoder, "{}", p.name);
        }
        let mut store = ParamStore::default();
        let cfg = Config {
            encoder_freeze_embedding: false,
            ..small(Encoding::OpinionTuple, 1)
        };
        Model::new(&cfg, &vocab, &mut store);
        assert!(store.iter().all(|p| !p.frozen));
    }
}
