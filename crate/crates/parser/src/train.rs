//! The trainable parser: configuration, vocabulary, parameters and the
//! training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sentgraph::data::{Sentence, SentimentGraph};
use sentgraph::eval::sent_graph_f1;
use serde::Serialize;

use crate::config::Config;
use crate::error::ParserError;
use crate::model::{Dropout, Model, Outputs, QueryPredictions};
use crate::objective::{loss, match_queries, GoldTargets, Matching};
use crate::optim::AdamW;
use crate::params::ParamStore;
use crate::predict::{decode_predictions, Prediction};
use crate::tape::{Tape, Var};
use crate::vocab::Vocab;

// keeps the shuffling/dropout stream apart from parameter initialization
const TRAIN_STREAM: u64 = 1;

#[derive(Clone, Debug)]
pub struct Parser {
    pub config: Config,
    pub vocab: Vocab,
    pub store: ParamStore,
    pub model: Model,
    /// Optimizer updates applied so far.
    pub step: usize,
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub step: usize,
    pub train_loss: f64,
    pub dropped_nodes: usize,
    pub decoder_lr: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dev_sf1: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions<'a> {
    /// Scored after every epoch; the best-scoring parameters are kept.
    pub dev: Option<&'a [SentimentGraph]>,
    /// Stop as soon as the dev SF1 reaches this value.
    pub stop_at_dev_sf1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    /// Epoch (1-based) whose parameters were kept, with its dev SF1.
    pub best: Option<(usize, f64)>,
}

impl Parser {
    /// Fresh parser with a vocabulary built from `train`.
    pub fn new(config: Config, train: &[SentimentGraph]) -> Result<Parser, ParserError> {
        config.validate()?;
        let vocab = Vocab::build(train);
        let mut store = ParamStore::default();
        let model = Model::new(&config, &vocab, &mut store);
        Ok(Parser {
            config,
            vocab,
            store,
            model,
            step: 0,
        })
    }

    /// Reassembles a parser from stored parts; parameter names and shapes
    /// must match what the configuration builds.
    pub fn from_parts(
        config: Config,
        vocab: Vocab,
        store: ParamStore,
        step: usize,
    ) -> Result<Parser, ParserError> {
        config.validate()?;
        let mut fresh = ParamStore::default();
        let model = Model::new(&config, &vocab, &mut fresh);
        let expected: Vec<(&str, usize, usize)> = fresh
            .iter()
            .map(|p| (p.name.as_str(), p.rows, p.cols))
            .collect();
        let found: Vec<(&str, usize, usize)> = store
            .iter()
            .map(|p| (p.name.as_str(), p.rows, p.cols))
            .collect();
        if expected != found {
            return Err(ParserError::Checkpoint(
                "parameter layout does not match the configuration".into(),
            ));
        }
        let mut store = store;
        model.apply_freezing(&config, &mut store);
        Ok(Parser {
            config,
            vocab,
            store,
            model,
            step,
        })
    }

    pub fn forward(&self, t: &mut Tape, sentence: &Sentence, drop: &mut Dropout) -> Outputs {
        self.model
            .forward(t, &self.store, &self.vocab, sentence, drop, &self.config)
    }

    pub fn scores(&self, sentence: &Sentence) -> QueryPredictions {
        let mut t = Tape::new();
        let out = self.forward(&mut t, sentence, &mut Dropout::eval());
        out.values(&t)
    }

    /// Loss of one annotated sentence on a fresh tape. Fails when the
    /// forward pass produced a non-finite value.
    pub fn sentence_loss(
        &self,
        t: &mut Tape,
        gold: &GoldTargets,
        sentence: &Sentence,
        drop: &mut Dropout,
    ) -> Result<(Var, Matching), String> {
        let out = self.forward(t, sentence, drop);
        if let Some(v) = t.first_non_finite() {
            return Err(format!(
                "non-finite value at tape node {v} in the forward pass"
            ));
        }
        let matching = match_queries(gold, &out.values(t)).map_err(|e| e.to_string())?;
        let terms = loss(t, &out, gold, &matching, self.config.gamma());
        if let Some(v) = t.first_non_finite() {
            return Err(format!("non-finite value at tape node {v} in the loss"));
        }
        Ok((terms.total, matching))
    }

    pub fn predict(&self, sentence: &Sentence) -> Prediction {
        let enc = self.config.graph_mode;
        if sentence.tokens.is_empty() {
            let empty = sentgraph::encodings::GeneralGraph::new(enc, sentence.clone());
            return Prediction {
                graph: SentimentGraph::new(sentence.clone(), Vec::new()),
                raw: empty,
                dropped: 0,
            };
        }
        decode_predictions(enc, sentence, &self.scores(sentence))
    }

    /// Predictions for many sentences, computed in parallel.
    pub fn predict_all(&self, sentences: &[Sentence]) -> Vec<Prediction> {
        sentences.par_iter().map(|s| self.predict(s)).collect()
    }

    pub fn dev_sf1(&self, dev: &[SentimentGraph]) -> Result<f64, ParserError> {
        let sentences: Vec<Sentence> = dev.iter().map(|g| g.sentence.clone()).collect();
        let pred: Vec<SentimentGraph> = self
            .predict_all(&sentences)
            .into_iter()
            .map(|p| p.graph)
            .collect();
        Ok(sent_graph_f1(dev, &pred, true)?.f1)
    }

    pub fn total_steps(&self, n_train: usize) -> usize {
        self.config.epochs * n_train.div_ceil(self.config.batch_size)
    }

    /// Runs `config.epochs` epochs of minibatch training, calling `on_epoch`
    /// after each. Batch gradients are the mean over the batch's sentences.
    pub fn train(
        &mut self,
        train: &[SentimentGraph],
        options: &TrainOptions,
        mut on_epoch: impl FnMut(&EpochMetrics),
    ) -> Result<TrainReport, ParserError> {
        let usable: Vec<&SentimentGraph> = train
            .iter()
            .filter(|g| !g.sentence.tokens.is_empty())
            .collect();
        if usable.is_empty() {
            return Err(ParserError::EmptyDataset);
        }
        let enc = self.config.graph_mode;
        let golds: Vec<GoldTargets> = usable.iter().map(|g| GoldTargets::new(enc, g)).collect();
        let mut opt = AdamW::new(&self.config, self.total_steps(usable.len()));
        opt.step = self.step;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(TRAIN_STREAM);
        let mut order: Vec<usize> = (0..usable.len()).collect();
        let mut report = TrainReport {
            epochs: Vec::new(),
            best: None,
        };
        let mut best_store: Option<ParamStore> = None;
        for epoch in 1..=self.config.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut dropped_nodes = 0;
            for batch in order.chunks(self.config.batch_size) {
                self.store.zero_grad();
                let scale = 1.0 / batch.len() as f64;
                for &i in batch {
                    let mut t = Tape::new();
                    let mut drop = Dropout::train(&mut rng);
                    let (total, matching) = self
                        .sentence_loss(&mut t, &golds[i], &usable[i].sentence, &mut drop)
                        .map_err(|detail| ParserError::Diverged {
                            epoch,
                            step: opt.step,
                            detail: format!("{detail} (sentence {})", usable[i].sentence.sent_id),
                        })?;
                    dropped_nodes += matching.dropped();
                    epoch_loss += t.scalar(total);
                    let scaled = t.scale(total, scale);
                    t.backward(scaled, &mut self.store);
                }
                if let Some(p) = self
                    .store
                    .iter()
                    .find(|p| p.grad.iter().any(|g| !g.is_finite()))
                {
                    return Err(ParserError::Diverged {
                        epoch,
                        step: opt.step,
                        detail: format!("non-finite gradient in {}", p.name),
                    });
                }
                opt.update(&mut self.store);
            }
            self.step = opt.step;
            let dev_sf1 = options.dev.map(|d| self.dev_sf1(d)).transpose()?;
            let metrics = EpochMetrics {
                epoch,
                step: opt.step,
                train_loss: epoch_loss / usable.len() as f64,
                dropped_nodes,
                decoder_lr: opt.learning_rate(crate::params::Group::Decoder, opt.step),
                dev_sf1,
            };
            on_epoch(&metrics);
            report.epochs.push(metrics);
            if let Some(sf1) = dev_sf1 {
                if report.best.is_none_or(|(_, b)| sf1 > b) {
                    report.best = Some((epoch, sf1));
                    best_store = Some(self.store.clone());
                }
                if options.stop_at_dev_sf1.is_some_and(|target| sf1 >= target) {
                    break;
                }
            }
        }
        if let Some(best) = best_store {
            // keep the optimizer moments of the final step with the best weights
            self.store = best;
        }
        Ok(report)
    }
}

impl EpochMetrics {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("metrics serialize")
    }
}
