use super::model::{sequence_loss, sequence_loss_backward, ReaderLm};
use crate::corpus::TokenWindow;
use crate::nn::{zeroed_like, SgdMomentum};
use crate::rng::Rng;
use crate::Result;
use rand::Rng as _;
use serde::Serialize;

/// Phase-1 training: the attention module is absent and fixations are drawn
/// i.i.d. Bernoulli(keep_rate) — Binomial skipping noise — fresh for every
/// window in every epoch. Embeddings train here and are frozen afterwards.
#[derive(Debug, Clone)]
pub struct Phase1Config {
    pub epochs: usize,
    pub keep_rate: f64,
    pub lr: f64,
    pub momentum: f64,
    /// every k-th window is held out for the epoch log
    pub heldout_every: usize,
}

impl Default for Phase1Config {
    fn default() -> Self {
        Self { epochs: 8, keep_rate: 0.7, lr: 0.2, momentum: 0.0, heldout_every: 10 }
    }
}

/// One line of the training log (serialized as JSONL).
#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub split: String,
    pub mean_loss: f64,
    pub mean_fixation_rate: f64,
}

fn sample_mask(n: usize, keep_rate: f64, rng: &mut Rng) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.gen::<f64>() < keep_rate)).collect()
}

/// Splits windows into (train, heldout) by index. Every `heldout_every`-th
/// window is held out; 0 disables the split.
pub fn split_heldout(
    windows: &[TokenWindow],
    heldout_every: usize,
) -> (Vec<&TokenWindow>, Vec<&TokenWindow>) {
    if heldout_every == 0 {
        return (windows.iter().collect(), Vec::new());
    }
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (i, w) in windows.iter().enumerate() {
        if (i + 1) % heldout_every == 0 {
            held.push(w);
        } else {
            train.push(w);
        }
    }
    (train, held)
}

/// Trains reader, decoder, output projections and embeddings jointly with
/// momentum SGD under Binomial skipping noise. Returns the per-epoch log.
/// Held-out windows keep one fixed sampled mask across epochs so their curve
/// is comparable epoch to epoch.
pub fn train_phase1(
    lm: &mut ReaderLm,
    windows: &[TokenWindow],
    cfg: &Phase1Config,
    seed: u64,
) -> Result<Vec<EpochLog>> {
    assert!((0.0..=1.0).contains(&cfg.keep_rate), "keep_rate must be in [0,1]");
    let (train, held) = split_heldout(windows, cfg.heldout_every);
    assert!(!train.is_empty(), "no training windows");

    let mut mask_rng = crate::rng::stream(seed, "phase1/masks", 0);
    let held_masks: Vec<Vec<u8>> = held
        .iter()
        .map(|w| sample_mask(w.ids.len(), cfg.keep_rate, &mut mask_rng))
        .collect();

    let mut opt = SgdMomentum::new(cfg.lr, cfg.momentum);
    let mut log = Vec::new();

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut shuffle_rng = crate::rng::stream(seed, "phase1/shuffle", epoch as u64);
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut epoch_rng = crate::rng::stream(seed, "phase1/noise", epoch as u64);
        let mut loss_sum = 0.0;
        let mut fix_sum = 0.0;
        let mut tok_count = 0usize;
        for &wi in &order {
            let w = train[wi];
            let omega = sample_mask(w.ids.len(), cfg.keep_rate, &mut epoch_rng);
            let mut grads = zeroed_like(lm);
            let loss = sequence_loss_backward(lm, w, &omega, &mut grads);
            opt.step(lm, &grads);
            loss_sum += loss.total;
            fix_sum += omega.iter().map(|&b| b as f64).sum::<f64>();
            tok_count += omega.len();
        }
        log.push(EpochLog {
            epoch,
            split: "train".into(),
            mean_loss: loss_sum / train.len() as f64,
            mean_fixation_rate: fix_sum / tok_count as f64,
        });

        if !held.is_empty() {
            let mut loss_sum = 0.0;
            let mut fix_sum = 0.0;
            let mut tok_count = 0usize;
            for (w, m) in held.iter().zip(&held_masks) {
                loss_sum += sequence_loss(lm, w, m).total;
                fix_sum += m.iter().map(|&b| b as f64).sum::<f64>();
                tok_count += m.len();
            }
            log.push(EpochLog {
                epoch,
                split: "heldout".into(),
                mean_loss: loss_sum / held.len() as f64,
                mean_fixation_rate: fix_sum / tok_count as f64,
            });
        }
    }

    // embeddings are only ever trained here
    lm.emb.trainable = false;
    Ok(log)
}

pub fn write_log_jsonl(path: &std::path::Path, log: &[EpochLog]) -> Result<()> {
    let mut out = String::new();
    for entry in log {
        out.push_str(&serde_json::to_string(entry)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
