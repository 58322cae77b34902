//! Paired bootstrap significance tests over several runs per system.
//!
//! Resamples are split into fixed-size chunks, each drawing from its own
//! ChaCha stream, so results depend on the seed only and not on how rayon
//! schedules the chunks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::data::SentimentGraph;
use crate::error::EvalError;
use crate::eval::{corpus_counts, SentenceCounts};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BootstrapConfig {
    pub b_joint: usize,
    pub b_pair: usize,
    pub alpha: f64,
    pub pair_wins_required: usize,
    pub seed: u64,
    pub require_polarity: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            b_joint: 1_000_000,
            b_pair: 100_000,
            alpha: 0.05,
            pair_wins_required: 15,
            seed: 0,
            require_polarity: true,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.b_joint == 0 || self.b_pair == 0 {
            return Err(EvalError::Config(
                "resample counts must be at least 1".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EvalError::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

const CHUNK: usize = 256;
const JOINT_STREAM: u64 = 1 << 32;
const PAIR_STREAM: u64 = 2 << 32;

/// For every (a, b) series pair, the number of resamples in which
/// F1(a) - F1(b) <= 0. All pairs share the same resampled indices.
fn count_non_positive(
    a: &[Vec<SentenceCounts>],
    b: &[Vec<SentenceCounts>],
    resamples: usize,
    seed: u64,
    stream: u64,
) -> Vec<Vec<usize>> {
    let n = a.first().map_or(0, Vec::len);
    let chunks = resamples.div_ceil(CHUNK);
    let zero = vec![vec![0usize; b.len()]; a.len()];
    (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream + chunk as u64);
            let draws = CHUNK.min(resamples - chunk * CHUNK);
            let mut hits = zero.clone();
            let mut idx = vec![0usize; n];
            let mut tot_a = vec![SentenceCounts::default(); a.len()];
            let mut tot_b = vec![SentenceCounts::default(); b.len()];
            for _ in 0..draws {
                for i in idx.iter_mut() {
                    *i = rng.random_range(0..n);
                }
                for (series, tot) in a
                    .iter()
                    .zip(tot_a.iter_mut())
                    .chain(b.iter().zip(tot_b.iter_mut()))
                {
                    *tot = SentenceCounts::default();
                    for &i in &idx {
                        tot.add(&series[i]);
                    }
                }
                let fa: Vec<f64> = tot_a.iter().map(|t| t.prf().f1).collect();
                let fb: Vec<f64> = tot_b.iter().map(|t| t.prf().f1).collect();
                for (ia, x) in fa.iter().enumerate() {
                    for (ib, y) in fb.iter().enumerate() {
                        if x - y <= 0.0 {
                            hits[ia][ib] += 1;
                        }
                    }
                }
            }
            hits
        })
        .reduce(
            || zero.clone(),
            |mut acc, h| {
                for (ra, rh) in acc.iter_mut().zip(h) {
                    for (x, y) in ra.iter_mut().zip(rh) {
                        *x += y;
                    }
                }
                acc
            },
        )
}

fn check_runs(a: &[Vec<SentenceCounts>], b: &[Vec<SentenceCounts>]) -> Result<usize, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Config(
            "each system needs at least one run".into(),
        ));
    }
    let n = a[0].len();
    if a.iter().chain(b).any(|r| r.len() != n) {
        return Err(EvalError::Config(
            "all runs must cover the same sentences".into(),
        ));
    }
    if n == 0 {
        return Err(EvalError::Config(
            "cannot resample an empty test set".into(),
        ));
    }
    Ok(n)
}

fn pool(runs: &[Vec<SentenceCounts>]) -> Vec<SentenceCounts> {
    (0..runs[0].len())
        .map(|i| {
            let mut c = SentenceCounts::default();
            for r in runs {
                c.add(&r[i]);
            }
            c
        })
        .collect()
}

/// One-sided p-value for "A beats B" with the contributions of all runs of
/// each system pooled per sentence.
pub fn joint_p_value(
    a: &[Vec<SentenceCounts>],
    b: &[Vec<SentenceCounts>],
    resamples: usize,
    seed: u64,
) -> Result<f64, EvalError> {
    check_runs(a, b)?;
    let hits = count_non_positive(&[pool(a)], &[pool(b)], resamples, seed, JOINT_STREAM);
    Ok(hits[0][0] as f64 / resamples as f64)
}

/// p-values for every run of A against every run of B.
pub fn pairwise_p_values(
    a: &[Vec<SentenceCounts>],
    b: &[Vec<SentenceCounts>],
    resamples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, EvalError> {
    check_runs(a, b)?;
    let hits = count_non_positive(a, b, resamples, seed, PAIR_STREAM);
    Ok(hits
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|h| h as f64 / resamples as f64)
                .collect()
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    SignificantlyBetter,
    NotSignificant,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::SignificantlyBetter => "SignificantlyBetter",
            Decision::NotSignificant => "NotSignificant",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignificanceReport {
    pub joint_p: f64,
    pub pairwise_p: Vec<Vec<f64>>,
    pub pairwise_wins: usize,
    pub decision: Decision,
}

/// A wins if enough pairwise tests and the joint test all reject at alpha.
pub fn decide(joint_p: f64, pairwise_p: &[Vec<f64>], cfg: &BootstrapConfig) -> (usize, Decision) {
    let wins = pairwise_p
        .iter()
        .flatten()
        .filter(|&&p| p < cfg.alpha)
        .count();
    let decision = if joint_p < cfg.alpha && wins >= cfg.pair_wins_required {
        Decision::SignificantlyBetter
    } else {
        Decision::NotSignificant
    };
    (wins, decision)
}

pub fn significance_from_counts(
    a: &[Vec<SentenceCounts>],
    b: &[Vec<SentenceCounts>],
    cfg: &BootstrapConfig,
) -> Result<SignificanceReport, EvalError> {
    cfg.validate()?;
    let joint_p = joint_p_value(a, b, cfg.b_joint, cfg.seed)?;
    let pairwise_p = pairwise_p_values(a, b, cfg.b_pair, cfg.seed)?;
    let (pairwise_wins, decision) = decide(joint_p, &pairwise_p, cfg);
    Ok(SignificanceReport {
        joint_p,
        pairwise_p,
        pairwise_wins,
        decision,
    })
}

fn runs_counts(
    gold: &[SentimentGraph],
    runs: &[Vec<SentimentGraph>],
    require_polarity: bool,
) -> Result<Vec<Vec<SentenceCounts>>, EvalError> {
    runs.iter()
        .map(|r| corpus_counts(gold, r, require_polarity))
        .collect()
}

pub fn bootstrap_joint(
    gold: &[SentimentGraph],
    runs_a: &[Vec<SentimentGraph>],
    runs_b: &[Vec<SentimentGraph>],
    cfg: &BootstrapConfig,
) -> Result<f64, EvalError> {
    cfg.validate()?;
    let a = runs_counts(gold, runs_a, cfg.require_polarity)?;
    let b = runs_counts(gold, runs_b, cfg.require_polarity)?;
    joint_p_value(&a, &b, cfg.b_joint, cfg.seed)
}

pub fn bootstrap_pairwise_decision(
    gold: &[SentimentGraph],
    runs_a: &[Vec<SentimentGraph>],
    runs_b: &[Vec<SentimentGraph>],
    cfg: &BootstrapConfig,
) -> Result<SignificanceReport, EvalError> {
    let a = runs_counts(gold, runs_a, cfg.require_polarity)?;
    let b = runs_counts(gold, runs_b, cfg.require_polarity)?;
    significance_from_counts(&a, &b, cfg)
}

impl SignificanceReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("joint_p {:.6}\n", self.joint_p);
        for (i, row) in self.pairwise_p.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                out.push_str(&format!("pair a{} b{} p {:.6}\n", i + 1, j + 1, p));
            }
        }
        let total: usize = self.pairwise_p.iter().map(Vec::len).sum();
        out.push_str(&format!("pairwise_wins {}/{}\n", self.pairwise_wins, total));
        out.push_str(&format!("decision {}\n", self.decision.as_str()));
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let round = |p: f64| format!("{p:.6}").parse::<f64>().unwrap();
        json!({
            "joint_p": round(self.joint_p),
            "pairwise_p": self.pairwise_p.iter().map(|r| r.iter().map(|&p| round(p)).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "pairwise_wins": self.pairwise_wins,
            "decision": self.decision.as_str(),
        })
    }
}
