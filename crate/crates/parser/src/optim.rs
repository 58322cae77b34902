//! AdamW with per-group learning rates and a warmup + cosine schedule.

use crate::config::Config;
use crate::params::{Group, ParamStore};

const BETA_1: f64 = 0.9;
const EPS: f64 = 1e-8;

/// Multiplier on the peak learning rate: linear warmup from 0 over the first
/// `warmup` steps, then cosine decay to 0 at `total`.
pub fn schedule(step: usize, warmup: usize, total: usize) -> f64 {
    if step < warmup {
        return step as f64 / warmup as f64;
    }
    if total <= warmup {
        return 1.0;
    }
    let progress = ((step - warmup) as f64 / (total - warmup) as f64).min(1.0);
    0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamW {
    pub encoder_lr: f64,
    pub encoder_wd: f64,
    pub decoder_lr: f64,
    pub decoder_wd: f64,
    pub beta_2: f64,
    pub warmup: usize,
    pub total: usize,
    /// Number of updates applied so far.
    pub step: usize,
}

impl AdamW {
    pub fn new(config: &Config, total_steps: usize) -> AdamW {
        AdamW {
            encoder_lr: config.encoder_learning_rate,
            encoder_wd: config.encoder_weight_decay,
            decoder_lr: config.decoder_learning_rate,
            decoder_wd: config.decoder_weight_decay,
            beta_2: config.beta_2,
            warmup: (config.warmup_fraction * total_steps as f64).round() as usize,
            total: total_steps,
            step: 0,
        }
    }

    pub fn learning_rate(&self, group: Group, step: usize) -> f64 {
        let peak = match group {
            Group::Encoder => self.encoder_lr,
            Group::Decoder => self.decoder_lr,
        };
        peak * schedule(step, self.warmup, self.total)
    }

    /// Applies one update from the gradients in `store`; frozen parameters
    /// are left untouched, moments included.
    pub fn update(&mut self, store: &mut ParamStore) {
        let t = (self.step + 1) as i32;
        let c1 = 1.0 - BETA_1.powi(t);
        let c2 = 1.0 - self.beta_2.powi(t);
        for p in store.iter_mut() {
            if p.frozen {
                continue;
            }
            let lr = self.learning_rate(p.group, self.step);
            let wd = match p.group {
                Group::Encoder => self.encoder_wd,
                Group::Decoder => self.decoder_wd,
            };
            for i in 0..p.value.len() {
                let g = p.grad[i];
                p.adam_m[i] = BETA_1 * p.adam_m[i] + (1.0 - BETA_1) * g;
                p.adam_v[i] = self.beta_2 * p.adam_v[i] + (1.0 - self.beta_2) * g * g;
                let m = p.adam_m[i] / c1;
                let v = p.adam_v[i] / c2;
                p.value[i] -= lr * (m / (v.sqrt() + EPS) + wd * p.value[i]);
            }
        }
        self.step += 1;
    }
}
