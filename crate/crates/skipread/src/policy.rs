//! Hard-attention policy for the windowed LM reader. At each position the
//! policy sees the upcoming word's embedding (parafoveal preview), the
//! reader's current state, and the log probability the reader assigns to
//! that word, and emits P(fixate). Sampling is sequential because skipping
//! changes the reader state that later decisions condition on.
//!
//! Training is score-function (REINFORCE) gradient descent on
//!   E[ L(omega|w) + alpha * ||omega||_1 ]  -  entropy_weight * sum_i H(p_i)
//! with a per-position baseline (bidirectional LSTM over the raw window
//! embeddings) subtracted from the realized return, and global-norm gradient
//! clipping. The reader and decoder stay frozen here.

use crate::corpus::{TokenWindow, SKIP_ID};
use crate::impl_parameterized;
use crate::lm::{sequence_loss, ReaderLm};
use crate::nn::{
    axpy, bernoulli_entropy_dp, safe_ln, sigmoid, softmax, zeroed_like, Dense, LstmCell, LstmRun,
    Parameterized, SgdMomentum,
};
use crate::rng::Rng;
use rand::Rng as _;
use serde::Serialize;

// ─── Attention network ─────────────────────────────────────────────────────

/// One-layer feed-forward net: tanh hidden layer over
/// [word embedding; reader state; ln P_R(word)] -> scalar logit.
#[derive(Debug, Clone)]
pub struct AttentionNet {
    pub hidden: Dense,
    pub out: Dense,
}

impl_parameterized!(AttentionNet {
    "hidden.w" => hidden.w,
    "hidden.b" => hidden.b,
    "out.w" => out.w,
    "out.b" => out.b,
});

pub struct NetCache {
    feat: Vec<f64>,
    post: Vec<f64>,
}

impl AttentionNet {
    pub fn new(emb_dim: usize, reader_hidden: usize, net_hidden: usize, rng: &mut Rng, bound: f64) -> Self {
        let mut hidden = Dense::zeros(emb_dim + reader_hidden + 1, net_hidden);
        let mut out = Dense::zeros(net_hidden, 1);
        hidden.init_uniform(rng, bound);
        out.init_uniform(rng, bound);
        Self { hidden, out }
    }

    pub fn zeros(emb_dim: usize, reader_hidden: usize, net_hidden: usize) -> Self {
        Self {
            hidden: Dense::zeros(emb_dim + reader_hidden + 1, net_hidden),
            out: Dense::zeros(net_hidden, 1),
        }
    }

    pub fn logit(&self, feat: &[f64]) -> (f64, NetCache) {
        let pre = self.hidden.forward(feat);
        let post: Vec<f64> = pre.iter().map(|v| v.tanh()).collect();
        let logit = self.out.forward(&post)[0];
        (logit, NetCache { feat: feat.to_vec(), post })
    }

    /// Accumulates d(logit)/d(params) scaled by `dlogit` into `grads`.
    pub fn backward(&self, cache: &NetCache, dlogit: f64, grads: &mut AttentionNet) {
        let dpost = self.out.backward(&cache.post, &[dlogit], &mut grads.out);
        let dpre: Vec<f64> = dpost
            .iter()
            .zip(&cache.post)
            .map(|(d, t)| d * (1.0 - t * t))
            .collect();
        self.hidden.backward(&cache.feat, &dpre, &mut grads.hidden);
    }
}

/// P(fixate) for one position's feature vector.
pub fn fixation_prob(net: &AttentionNet, feat: &[f64]) -> f64 {
    sigmoid(net.logit(feat).0)
}

// ─── Baseline ──────────────────────────────────────────────────────────────

/// Per-position estimate of the expected return, from a small bidirectional
/// LSTM over the raw (unmasked) window embeddings. Only used for variance
/// reduction: it is subtracted from the realized return inside the score
/// term, which leaves the gradient's expectation unchanged.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub fwd: LstmCell,
    pub bwd: LstmCell,
    pub proj: Dense,
}

impl_parameterized!(Baseline {
    "fwd.w_ih" => fwd.w_ih,
    "fwd.w_hh" => fwd.w_hh,
    "fwd.bias" => fwd.bias,
    "bwd.w_ih" => bwd.w_ih,
    "bwd.w_hh" => bwd.w_hh,
    "bwd.bias" => bwd.bias,
    "proj.w" => proj.w,
    "proj.b" => proj.b,
});

impl Baseline {
    pub fn new(emb_dim: usize, cells: usize, rng: &mut Rng, bound: f64) -> Self {
        let mut fwd = LstmCell::zeros(emb_dim, cells);
        let mut bwd = LstmCell::zeros(emb_dim, cells);
        let mut proj = Dense::zeros(2 * cells, 1);
        fwd.init_uniform(rng, bound);
        bwd.init_uniform(rng, bound);
        proj.init_uniform(rng, bound);
        Self { fwd, bwd, proj }
    }

    fn runs(&self, lm: &ReaderLm, window: &TokenWindow) -> (Vec<Vec<f64>>, LstmRun, LstmRun) {
        let xs: Vec<Vec<f64>> = window.ids.iter().map(|&id| lm.emb.lookup(id).to_vec()).collect();
        let cells = self.fwd.hidden_dim;
        let fwd_run = LstmRun::forward(&self.fwd, &xs, vec![0.0; cells], vec![0.0; cells]);
        let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
        let bwd_run = LstmRun::forward(&self.bwd, &rev, vec![0.0; cells], vec![0.0; cells]);
        (xs, fwd_run, bwd_run)
    }

    /// Per-position estimates b_i.
    pub fn estimate(&self, lm: &ReaderLm, window: &TokenWindow) -> Vec<f64> {
        let n = window.ids.len();
        let (_, fwd_run, bwd_run) = self.runs(lm, window);
        (0..n)
            .map(|i| {
                let mut cat = fwd_run.hs[i + 1].clone();
                cat.extend_from_slice(&bwd_run.hs[n - i]);
                self.proj.forward(&cat)[0]
            })
            .collect()
    }

    /// Squared-error regression of every position's estimate onto the
    /// realized return. Accumulates gradients, returns (estimates, sq error).
    pub fn regress(
        &self,
        lm: &ReaderLm,
        window: &TokenWindow,
        target: f64,
        grads: &mut Baseline,
    ) -> (Vec<f64>, f64) {
        let n = window.ids.len();
        let (_, fwd_run, bwd_run) = self.runs(lm, window);
        let cells = self.fwd.hidden_dim;
        let mut ests = Vec::with_capacity(n);
        let mut fwd_dhs = vec![vec![0.0; cells]; n];
        let mut bwd_dhs = vec![vec![0.0; cells]; n];
        let mut sq = 0.0;
        for i in 0..n {
            let mut cat = fwd_run.hs[i + 1].clone();
            cat.extend_from_slice(&bwd_run.hs[n - i]);
            let b = self.proj.forward(&cat)[0];
            ests.push(b);
            let err = b - target;
            sq += err * err;
            let dcat = self.proj.backward(&cat, &[2.0 * err], &mut grads.proj);
            axpy(&mut fwd_dhs[i], 1.0, &dcat[..cells]);
            axpy(&mut bwd_dhs[n - 1 - i], 1.0, &dcat[cells..]);
        }
        let zeros = vec![0.0; cells];
        fwd_run.backward(&self.fwd, &fwd_dhs, &zeros, &mut grads.fwd);
        bwd_run.backward(&self.bwd, &bwd_dhs, &zeros, &mut grads.bwd);
        (ests, sq)
    }
}

// ─── Tradeoff configuration ────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct TradeoffConfig {
    /// price per fixation (economy term weight)
    pub alpha: f64,
    /// entropy-regularizer weight
    pub entropy_weight: f64,
    pub lr: f64,
    pub momentum: f64,
    pub baseline_lr: f64,
    pub clip_norm: f64,
    pub batch: usize,
}

impl Default for TradeoffConfig {
    fn default() -> Self {
        Self {
            alpha: 5.0,
            entropy_weight: 5.0,
            lr: 0.01,
            momentum: 0.0,
            baseline_lr: 0.01,
            clip_norm: 5.0,
            batch: 8,
        }
    }
}

impl TradeoffConfig {
    pub fn validate(&self) -> crate::Result<()> {
        for (name, v, nonneg) in [
            ("alpha", self.alpha, true),
            ("entropy_weight", self.entropy_weight, true),
            ("lr", self.lr, false),
            ("baseline_lr", self.baseline_lr, false),
            ("clip_norm", self.clip_norm, false),
        ] {
            if !v.is_finite() || (nonneg && v < 0.0) || (!nonneg && v <= 0.0) {
                return Err(crate::Error::Config {
                    field: format!("tradeoff.{name}"),
                    reason: format!("got {v}"),
                });
            }
        }
        Ok(())
    }
}

// ─── Rollouts ──────────────────────────────────────────────────────────────

/// One sequential pass of policy + reader over a window. When `forced` is
/// given the mask is imposed instead of sampled (used by the enumeration
/// oracle and the causality tests); probabilities are still those the policy
/// emits along that path.
pub struct Rollout {
    pub omega: Vec<u8>,
    /// P(fixate | prefix) at each position
    pub probs: Vec<f64>,
    caches: Vec<NetCache>,
}

impl Rollout {
    pub fn log_prob(&self) -> f64 {
        self.omega
            .iter()
            .zip(&self.probs)
            .map(|(&w, &p)| if w == 1 { safe_ln(p) } else { safe_ln(1.0 - p) })
            .sum()
    }

    pub fn fixation_count(&self) -> f64 {
        self.omega.iter().map(|&w| w as f64).sum()
    }

    pub fn fixation_rate(&self) -> f64 {
        self.fixation_count() / self.omega.len() as f64
    }

    /// Accumulates sum_i coef[i] * d log p(omega_i) / d theta into `grads`.
    pub fn add_score_gradient(
        &self,
        net: &AttentionNet,
        coef: &[f64],
        grads: &mut AttentionNet,
    ) {
        for i in 0..self.omega.len() {
            // d log p(omega_i) / d logit_i = omega_i - p_i
            let dlogit = coef[i] * (self.omega[i] as f64 - self.probs[i]);
            if dlogit != 0.0 {
                net.backward(&self.caches[i], dlogit, grads);
            }
        }
    }

    /// Accumulates weight * d/dtheta sum_i H(Bernoulli(p_i)) into `grads`,
    /// treating the trajectory (and so each cache) as fixed.
    pub fn add_entropy_gradient(&self, net: &AttentionNet, weight: f64, grads: &mut AttentionNet) {
        for i in 0..self.probs.len() {
            let p = self.probs[i];
            let dlogit = weight * bernoulli_entropy_dp(p) * p * (1.0 - p);
            net.backward(&self.caches[i], dlogit, grads);
        }
    }
}

pub fn rollout(
    lm: &ReaderLm,
    net: &AttentionNet,
    window: &TokenWindow,
    forced: Option<&[u8]>,
    rng: &mut Rng,
) -> Rollout {
    let n = window.ids.len();
    let hd = lm.reader.hidden_dim;
    let mut h = vec![0.0; hd];
    let mut c = vec![0.0; hd];
    let mut omega = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    let mut caches = Vec::with_capacity(n);
    for i in 0..n {
        let word = window.ids[i];
        let p_r = softmax(&lm.reader_out.forward(&h));
        let mut feat = lm.emb.lookup(word).to_vec();
        feat.extend_from_slice(&h);
        feat.push(safe_ln(p_r[word]));
        let (logit, cache) = net.logit(&feat);
        let p = sigmoid(logit);
        let w = match forced {
            Some(f) => f[i],
            None => u8::from(rng.gen::<f64>() < p),
        };
        omega.push(w);
        probs.push(p);
        caches.push(cache);
        let input = if w == 1 { word } else { SKIP_ID };
        let (nh, nc, _) = lm.reader.step(lm.emb.lookup(input), &h, &c);
        h = nh;
        c = nc;
    }
    Rollout { omega, probs, caches }
}

/// Samples one fixation sequence; returns (mask, per-position probabilities).
pub fn sample_fixations(
    lm: &ReaderLm,
    net: &AttentionNet,
    window: &TokenWindow,
    rng: &mut Rng,
) -> (Vec<u8>, Vec<f64>) {
    let r = rollout(lm, net, window, None, rng);
    (r.omega, r.probs)
}

// ─── REINFORCE ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct ReinforceStats {
    pub mean_loss: f64,
    pub mean_return: f64,
    pub mean_fixation_rate: f64,
    pub baseline_mse: f64,
    pub grad_norm: f64,
}

/// The score-function gradient for one sampled window:
///   sum_i (return - b_i) * d log p(omega_i)   [+ entropy term separately].
/// Exposed for the unbiasedness oracle; `reinforce_update` averages this
/// over a minibatch and applies it.
pub fn policy_gradient_sample(
    lm: &ReaderLm,
    net: &AttentionNet,
    window: &TokenWindow,
    alpha: f64,
    baseline: Option<&[f64]>,
    rng: &mut Rng,
) -> (AttentionNet, Rollout, f64) {
    let roll = rollout(lm, net, window, None, rng);
    let loss = sequence_loss(lm, window, &roll.omega).total;
    let ret = loss + alpha * roll.fixation_count();
    let coef: Vec<f64> = match baseline {
        Some(b) => b.iter().map(|bi| ret - bi).collect(),
        None => vec![ret; window.ids.len()],
    };
    let mut grads = zeroed_like(net);
    roll.add_score_gradient(net, &coef, &mut grads);
    (grads, roll, loss)
}

/// One minibatch update of the attention net (reader/decoder frozen), with
/// concurrent baseline regression. Gradient:
///   (1/|B|) sum_w [ sum_i (return_w - b_i(w)) d log p(omega_i)
///                   - entropy_weight * sum_i dH(p_i) ]
/// clipped to `clip_norm` (global norm), then a momentum SGD step.
pub fn reinforce_update(
    lm: &ReaderLm,
    net: &mut AttentionNet,
    baseline: &mut Baseline,
    windows: &[&TokenWindow],
    cfg: &TradeoffConfig,
    opt: &mut SgdMomentum,
    baseline_opt: &mut SgdMomentum,
    rng: &mut Rng,
) -> ReinforceStats {
    assert!(!windows.is_empty());
    let inv = 1.0 / windows.len() as f64;
    let mut grads = zeroed_like(net);
    let mut bgrads = zeroed_like(baseline);
    let mut stats = ReinforceStats {
        mean_loss: 0.0,
        mean_return: 0.0,
        mean_fixation_rate: 0.0,
        baseline_mse: 0.0,
        grad_norm: 0.0,
    };

    for w in windows {
        let roll = rollout(lm, net, w, None, rng);
        let loss = sequence_loss(lm, w, &roll.omega).total;
        let ret = loss + cfg.alpha * roll.fixation_count();
        let (ests, sq) = baseline.regress(lm, w, ret, &mut bgrads);

        let coef: Vec<f64> = ests.iter().map(|b| (ret - b) * inv).collect();
        roll.add_score_gradient(net, &coef, &mut grads);

        if cfg.entropy_weight > 0.0 {
            // descent on -entropy_weight * H
            roll.add_entropy_gradient(net, -cfg.entropy_weight * inv, &mut grads);
        }

        stats.mean_loss += loss * inv;
        stats.mean_return += ret * inv;
        stats.mean_fixation_rate += roll.fixation_rate() * inv;
        stats.baseline_mse += sq / w.ids.len() as f64 * inv;
    }

    stats.grad_norm = grads.clip_global_norm(cfg.clip_norm);
    opt.step(net, &grads);
    bgrads.scale_params(inv);
    baseline_opt.step(baseline, &bgrads);
    stats
}

/// Whole-phase driver: iterates minibatches over shuffled windows.
pub fn train_attention(
    lm: &ReaderLm,
    net: &mut AttentionNet,
    baseline: &mut Baseline,
    windows: &[TokenWindow],
    cfg: &TradeoffConfig,
    epochs: usize,
    seed: u64,
) -> Vec<ReinforceStats> {
    let mut opt = SgdMomentum::new(cfg.lr, cfg.momentum);
    let mut bopt = SgdMomentum::new(cfg.baseline_lr, 0.0);
    let mut log = Vec::new();
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..windows.len()).collect();
        let mut srng = crate::rng::stream(seed, "attn/shuffle", epoch as u64);
        for i in (1..order.len()).rev() {
            let j = srng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut rng = crate::rng::stream(seed, "attn/sample", epoch as u64);
        for chunk in order.chunks(cfg.batch.max(1)) {
            let batch: Vec<&TokenWindow> = chunk.iter().map(|&i| &windows[i]).collect();
            let stats = reinforce_update(
                lm, net, baseline, &batch, cfg, &mut opt, &mut bopt, &mut rng,
            );
            log.push(stats);
        }
    }
    log
}

// ─── Exact gradient by enumeration (small windows only) ────────────────────

/// grad of E[loss + alpha*||omega||_1] over all 2^N masks — the oracle the
/// Monte-Carlo estimator is checked against. Exponential in N.
pub fn enumerate_exact_gradient(
    lm: &ReaderLm,
    net: &AttentionNet,
    window: &TokenWindow,
    alpha: f64,
) -> AttentionNet {
    let n = window.ids.len();
    assert!(n <= 16, "enumeration over 2^{n} masks");
    let mut exact = zeroed_like(net);
    let mut dead = crate::rng::root(0); // forced rollouts never draw
    for bits in 0u32..(1u32 << n) {
        let omega: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
        let roll = rollout(lm, net, window, Some(&omega), &mut dead);
        let p_omega = roll.log_prob().exp();
        let ret = sequence_loss(lm, window, &omega).total + alpha * roll.fixation_count();
        // d/dtheta P(omega)*R = P(omega) R d log P(omega)
        let coef = vec![p_omega * ret; n];
        roll.add_score_gradient(net, &coef, &mut exact);
    }
    exact
}

/// Expected fixation rate by enumeration, for economy-curve oracles.
pub fn enumerate_expected_rate(
    lm: &ReaderLm,
    net: &AttentionNet,
    window: &TokenWindow,
) -> f64 {
    let n = window.ids.len();
    assert!(n <= 16);
    let mut dead = crate::rng::root(0);
    let mut acc = 0.0;
    for bits in 0u32..(1u32 << n) {
        let omega: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
        let roll = rollout(lm, net, window, Some(&omega), &mut dead);
        acc += roll.log_prob().exp() * roll.fixation_rate();
    }
    acc
}

// ─── Simulation output ─────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize)]
pub struct SimRecord {
    pub doc: usize,
    pub position: usize,
    pub token: String,
    pub prob: f64,
    pub sampled: u8,
}

/// Samples one fixation sequence per window and reports, per position, the
/// fixation probability the policy emitted given the sampled prefix.
pub fn simulate_fixation_probs(
    lm: &ReaderLm,
    net: &AttentionNet,
    windows: &[TokenWindow],
    vocab: &crate::corpus::Vocabulary,
    seed: u64,
) -> Vec<SimRecord> {
    let mut out = Vec::new();
    for (k, w) in windows.iter().enumerate() {
        let mut rng = crate::rng::stream(seed, "simulate", k as u64);
        let roll = rollout(lm, net, w, None, &mut rng);
        for i in 0..w.ids.len() {
            out.push(SimRecord {
                doc: w.doc,
                position: w.start + i,
                token: vocab.token_of(w.ids[i]).to_string(),
                prob: roll.probs[i],
                sampled: roll.omega[i],
            });
        }
    }
    out
}

pub fn write_sim_jsonl(path: &std::path::Path, records: &[SimRecord]) -> crate::Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
