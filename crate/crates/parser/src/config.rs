//! Training and model configuration read from flat `key = value` files.
//!
//! Keys follow the hyperparameter names of the reference configuration
//! (`decoder_learning_rate`, `dropout_label`, `query_length`, ...). A few
//! extra keys exist for the desk-scale encoder: `hidden_size`, `seed`,
//! `focal_gamma`, `warmup_fraction`.

use std::fmt;
use std::path::Path;

use sentgraph::encodings::Encoding;
use serde::{Deserialize, Serialize};

use crate::error::ParserError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub graph_mode: Encoding,
    /// Queries per token; `None` means 2 for node-centric and labeled-edge
    /// graphs and 1 for opinion tuples.
    pub query_length: Option<usize>,
    pub n_layers: usize,
    pub hidden_size: usize,
    pub hidden_size_ff: Option<usize>,
    pub n_attention_heads: usize,
    pub hidden_size_anchor: usize,
    pub hidden_size_edge_label: usize,
    pub hidden_size_edge_presence: usize,
    pub char_embedding: bool,
    pub char_embedding_size: usize,
    pub pre_norm: bool,
    pub encoder: String,
    pub dropout_anchor: f64,
    pub dropout_edge_label: f64,
    pub dropout_edge_presence: f64,
    pub dropout_label: f64,
    pub dropout_transformer: f64,
    pub dropout_transformer_attention: f64,
    pub dropout_word: f64,
    pub focal: bool,
    pub focal_gamma: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta_2: f64,
    pub decoder_learning_rate: f64,
    pub decoder_weight_decay: f64,
    pub encoder_learning_rate: f64,
    pub encoder_weight_decay: f64,
    pub encoder_freeze_embedding: bool,
    /// Freezes the whole text encoder (`freeze_encoder` is accepted too).
    pub freeze_bert: bool,
    pub layerwise_lr_decay: f64,
    pub warmup_fraction: f64,
    pub seed: u64,
}

pub const DESK_ENCODER: &str = "desk";

impl Default for Config {
    fn default() -> Self {
        Config {
            graph_mode: Encoding::OpinionTuple,
            query_length: None,
            n_layers: 3,
            hidden_size: 768,
            hidden_size_ff: None,
            n_attention_heads: 8,
            hidden_size_anchor: 256,
            hidden_size_edge_label: 256,
            hidden_size_edge_presence: 256,
            char_embedding: true,
            char_embedding_size: 128,
            pre_norm: true,
            encoder: DESK_ENCODER.into(),
            dropout_anchor: 0.4,
            dropout_edge_label: 0.5,
            dropout_edge_presence: 0.5,
            dropout_label: 0.85,
            dropout_transformer: 0.25,
            dropout_transformer_attention: 0.1,
            dropout_word: 0.1,
            focal: true,
            focal_gamma: 2.0,
            batch_size: 16,
            epochs: 200,
            beta_2: 0.98,
            decoder_learning_rate: 6.0e-4,
            decoder_weight_decay: 1.2e-6,
            encoder_learning_rate: 6.0e-6,
            encoder_weight_decay: 0.1,
            encoder_freeze_embedding: true,
            freeze_bert: false,
            layerwise_lr_decay: 0.9,
            warmup_fraction: 0.1,
            seed: 0,
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ParserError> {
    match v {
        "True" | "true" => Ok(true),
        "False" | "false" => Ok(false),
        _ => Err(ParserError::Config(format!(
            "{key}: expected True or False, got {v:?}"
        ))),
    }
}

/// Numbers, optionally written as a product such as `4 * 768`.
fn parse_f64(key: &str, v: &str) -> Result<f64, ParserError> {
    v.split('*')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| ParserError::Config(format!("{key}: expected a number, got {v:?}")))
        })
        .product()
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ParserError> {
    let x = parse_f64(key, v)?;
    if x < 0.0 || x.fract() != 0.0 || x > usize::MAX as f64 {
        return Err(ParserError::Config(format!(
            "{key}: expected a non-negative integer, got {v:?}"
        )));
    }
    Ok(x as usize)
}

fn unquote(v: &str) -> &str {
    v.trim_matches(|c| c == '"' || c == '\'')
}

impl Config {
    pub fn query_length(&self) -> usize {
        self.query_length.unwrap_or(match self.graph_mode {
            Encoding::NodeCentric | Encoding::LabeledEdge => 2,
            Encoding::OpinionTuple => 1,
        })
    }

    pub fn hidden_size_ff(&self) -> usize {
        self.hidden_size_ff.unwrap_or(4 * self.hidden_size)
    }

    pub fn gamma(&self) -> f64 {
        if self.focal {
            self.focal_gamma
        } else {
            0.0
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ParserError> {
        let v = value.trim();
        match key {
            "graph_mode" => self.graph_mode = unquote(v).parse().map_err(ParserError::Config)?,
            "query_length" => self.query_length = Some(parse_usize(key, v)?),
            "n_layers" => self.n_layers = parse_usize(key, v)?,
            "hidden_size" => self.hidden_size = parse_usize(key, v)?,
            "hidden_size_ff" => self.hidden_size_ff = Some(parse_usize(key, v)?),
            "n_attention_heads" => self.n_attention_heads = parse_usize(key, v)?,
            "hidden_size_anchor" => self.hidden_size_anchor = parse_usize(key, v)?,
            "hidden_size_edge_label" => self.hidden_size_edge_label = parse_usize(key, v)?,
            "hidden_size_edge_presence" => self.hidden_size_edge_presence = parse_usize(key, v)?,
            "char_embedding" => self.char_embedding = parse_bool(key, v)?,
            "char_embedding_size" => self.char_embedding_size = parse_usize(key, v)?,
            "pre_norm" => self.pre_norm = parse_bool(key, v)?,
            "encoder" => self.encoder = unquote(v).to_string(),
            "dropout_anchor" => self.dropout_anchor = parse_f64(key, v)?,
            "dropout_edge_label" => self.dropout_edge_label = parse_f64(key, v)?,
            "dropout_edge_presence" => self.dropout_edge_presence = parse_f64(key, v)?,
            "dropout_label" => self.dropout_label = parse_f64(key, v)?,
            "dropout_transformer" => self.dropout_transformer = parse_f64(key, v)?,
            "dropout_transformer_attention" => {
                self.dropout_transformer_attention = parse_f64(key, v)?
            }
            "dropout_word" => self.dropout_word = parse_f64(key, v)?,
            "focal" => self.focal = parse_bool(key, v)?,
            "focal_gamma" => self.focal_gamma = parse_f64(key, v)?,
            "batch_size" => self.batch_size = parse_usize(key, v)?,
            "epochs" => self.epochs = parse_usize(key, v)?,
            "beta_2" => self.beta_2 = parse_f64(key, v)?,
            "decoder_learning_rate" => self.decoder_learning_rate = parse_f64(key, v)?,
            "decoder_weight_decay" => self.decoder_weight_decay = parse_f64(key, v)?,
            "encoder_learning_rate" => self.encoder_learning_rate = parse_f64(key, v)?,
            "encoder_weight_decay" => self.encoder_weight_decay = parse_f64(key, v)?,
            "encoder_freeze_embedding" => self.encoder_freeze_embedding = parse_bool(key, v)?,
            "freeze_bert" | "freeze_encoder" => self.freeze_bert = parse_bool(key, v)?,
            "layerwise_lr_decay" => self.layerwise_lr_decay = parse_f64(key, v)?,
            "warmup_fraction" => self.warmup_fraction = parse_f64(key, v)?,
            "seed" => self.seed = parse_usize(key, v)? as u64,
            _ => {
                return Err(ParserError::Config(format!(
                    "unknown configuration key {key:?}"
                )))
            }
        }
        Ok(())
    }

    /// Parses a configuration file on top of the defaults. Blank lines and
    /// `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Config, ParserError> {
        let mut cfg = Config::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ParserError::Config(format!("line {}: expected key = value", n + 1))
            })?;
            cfg.set(key.trim(), value)
                .map_err(|e| ParserError::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ParserError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ParserError::Io(format!("{}: {e}", path.display())))?;
        Config::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ParserError> {
        let fail = |m: String| Err(ParserError::Config(m));
        if self.encoder != DESK_ENCODER {
            return fail(format!(
                "encoder {:?} is not available; only the trainable {DESK_ENCODER:?} encoder is implemented",
                self.encoder
            ));
        }
        if !self.pre_norm {
            return fail("only pre-norm transformer layers are implemented".into());
        }
        if self.hidden_size == 0 || !self.hidden_size.is_multiple_of(2) {
            return fail("hidden_size must be a positive even number".into());
        }
        if self.n_attention_heads == 0 || !self.hidden_size.is_multiple_of(self.n_attention_heads) {
            return fail("hidden_size must be divisible by n_attention_heads".into());
        }
        if self.query_length() == 0 {
            return fail("query_length must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        for (name, rate) in [
            ("dropout_anchor", self.dropout_anchor),
            ("dropout_edge_label", self.dropout_edge_label),
            ("dropout_edge_presence", self.dropout_edge_presence),
            ("dropout_label", self.dropout_label),
            ("dropout_transformer", self.dropout_transformer),
            (
                "dropout_transformer_attention",
                self.dropout_transformer_attention,
            ),
            ("dropout_word", self.dropout_word),
            ("warmup_fraction", self.warmup_fraction),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return fail(format!("{name} must lie in [0, 1), got {rate}"));
            }
        }
        if !(0.0..1.0).contains(&self.beta_2) {
            return fail("beta_2 must lie in [0, 1)".into());
        }
        Ok(())
    }

    /// All dropout rates set to zero.
    pub fn without_dropout(&self) -> Config {
        Config {
            dropout_anchor: 0.0,
            dropout_edge_label: 0.0,
            dropout_edge_presence: 0.0,
            dropout_label: 0.0,
            dropout_transformer: 0.0,
            dropout_transformer_attention: 0.0,
            dropout_word: 0.0,
            ..self.clone()
        }
    }
}

impl fmt::Display for Config {
    /// Writes the configuration back in the file format accepted by
    /// [`Config::parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = |x: bool| if x { "True" } else { "False" };
        writeln!(f, "graph_mode = \"{}\"", self.graph_mode)?;
        writeln!(f, "query_length = {}", self.query_length())?;
        writeln!(f, "n_layers = {}", self.n_layers)?;
        writeln!(f, "hidden_size = {}", self.hidden_size)?;
        writeln!(f, "hidden_size_ff = {}", self.hidden_size_ff())?;
        writeln!(f, "n_attention_heads = {}", self.n_attention_heads)?;
        writeln!(f, "hidden_size_anchor = {}", self.hidden_size_anchor)?;
        writeln!(
            f,
            "hidden_size_edge_label = {}",
            self.hidden_size_edge_label
        )?;
        writeln!(
            f,
            "hidden_size_edge_presence = {}",
            self.hidden_size_edge_presence
        )?;
        writeln!(f, "char_embedding = {}", b(self.char_embedding))?;
        writeln!(f, "char_embedding_size = {}", self.char_embedding_size)?;
        writeln!(f, "pre_norm = {}", b(self.pre_norm))?;
        writeln!(f, "encoder = \"{}\"", self.encoder)?;
        writeln!(f, "dropout_anchor = {}", self.dropout_anchor)?;
        writeln!(f, "dropout_edge_label = {}", self.dropout_edge_label)?;
        writeln!(f, "dropout_edge_presence = {}", self.dropout_edge_presence)?;
        writeln!(f, "dropout_label = {}", self.dropout_label)?;
        writeln!(f, "dropout_transformer = {}", self.dropout_transformer)?;
        writeln!(
            f,
            "dropout_transformer_attention = {}",
            self.dropout_transformer_attention
        )?;
        writeln!(f, "dropout_word = {}", self.dropout_word)?;
        writeln!(f, "focal = {}", b(self.focal))?;
        writeln!(f, "focal_gamma = {}", self.focal_gamma)?;
        writeln!(f, "batch_size = {}", self.batch_size)?;
        writeln!(f, "epochs = {}", self.epochs)?;
        writeln!(f, "beta_2 = {}", self.beta_2)?;
        writeln!(
            f,
            "decoder_learning_rate = {:e}",
            self.decoder_learning_rate
        )?;
        writeln!(f, "decoder_weight_decay = {:e}", self.decoder_weight_decay)?;
        writeln!(
            f,
            "encoder_learning_rate = {:e}",
            self.encoder_learning_rate
        )?;
        writeln!(f, "encoder_weight_decay = {:e}", self.encoder_weight_decay)?;
        writeln!(
            f,
            "encoder_freeze_embedding = {}",
            b(self.encoder_freeze_embedding)
        )?;
        writeln!(f, "freeze_bert = {}", b(self.freeze_bert))?;
        writeln!(f, "layerwise_lr_decay = {}", self.layerwise_lr_decay)?;
        writeln!(f, "warmup_fraction = {}", self.warmup_fraction)?;
        writeln!(f, "seed = {}", self.seed)
    }
}
