//! Cloze question answering over partially fixated text.
//!
//! A forward/backward LSTM pair encodes the (masked) passage, another pair
//! encodes the question; a bilinear relevance score pools the passage states
//! and an entity projection turns the pooled vector into an answer
//! distribution. Which tokens the encoders get to see is decided by a small
//! logistic policy over hand-designed features, trained with REINFORCE to
//! trade answer accuracy against the number of fixations.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingStore, QAExample, SKIP_ID};
use crate::impl_parameterized;
use crate::nn::{
    bernoulli_entropy_dp, dot, safe_ln, sigmoid, softmax, softmax_xent_grad, zeroed_like,
    LstmCell, LstmRun, Parameterized, SgdMomentum, Tensor,
};
use crate::rng::Rng;
use rand::Rng as _;

// ─── Answering head ────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy)]
pub struct QaDims {
    pub vocab: usize,
    pub emb: usize,
    /// memory cells per direction; passage/question states are `2*cells` wide
    pub cells: usize,
    pub entities: usize,
}

/// Passage and question encoders plus the answer selector. `bilinear` scores
/// the relevance of each token representation to the question vector;
/// `entity_out` maps the pooled representation to entity logits.
#[derive(Debug, Clone)]
pub struct QaModel {
    pub emb: EmbeddingStore,
    pub fwd_text: LstmCell,
    pub bwd_text: LstmCell,
    pub fwd_question: LstmCell,
    pub bwd_question: LstmCell,
    /// [2*cells, 2*cells]
    pub bilinear: Tensor,
    /// [entities, 2*cells]
    pub entity_out: Tensor,
}

impl_parameterized!(QaModel {
    "emb" => emb.table,
    "fwd_text.w_ih" => fwd_text.w_ih,
    "fwd_text.w_hh" => fwd_text.w_hh,
    "fwd_text.bias" => fwd_text.bias,
    "bwd_text.w_ih" => bwd_text.w_ih,
    "bwd_text.w_hh" => bwd_text.w_hh,
    "bwd_text.bias" => bwd_text.bias,
    "fwd_question.w_ih" => fwd_question.w_ih,
    "fwd_question.w_hh" => fwd_question.w_hh,
    "fwd_question.bias" => fwd_question.bias,
    "bwd_question.w_ih" => bwd_question.w_ih,
    "bwd_question.w_hh" => bwd_question.w_hh,
    "bwd_question.bias" => bwd_question.bias,
    "bilinear" => bilinear,
    "entity_out" => entity_out,
});

impl QaModel {
    pub fn new(dims: QaDims, rng: &mut Rng, bound: f64) -> Self {
        let mut cell = |input| {
            let mut c = LstmCell::zeros(input, dims.cells);
            c.init_glorot(rng);
            c
        };
        let fwd_text = cell(dims.emb);
        let bwd_text = cell(dims.emb);
        let fwd_question = cell(dims.emb);
        let bwd_question = cell(dims.emb);
        let mut bilinear = Tensor::zeros(vec![2 * dims.cells, 2 * dims.cells]);
        bilinear.init_uniform(rng, bound);
        let mut entity_out = Tensor::zeros(vec![dims.entities, 2 * dims.cells]);
        entity_out.init_uniform(rng, bound);
        Self {
            emb: EmbeddingStore::random(dims.vocab, dims.emb, rng, bound),
            fwd_text,
            bwd_text,
            fwd_question,
            bwd_question,
            bilinear,
            entity_out,
        }
    }

    pub fn cells(&self) -> usize {
        self.fwd_text.hidden_dim
    }

    pub fn entities(&self) -> usize {
        self.entity_out.rows()
    }
}

/// Forward pass of all four encoders over one example. Skipped text tokens
/// are replaced by the placeholder before embedding, so nothing downstream
/// can depend on them.
pub struct QaEncoding {
    masked_ids: Vec<usize>,
    question_ids: Vec<usize>,
    fwd_run: LstmRun,
    bwd_run: LstmRun,
    qf_run: LstmRun,
    qb_run: LstmRun,
    /// [R_i; q_i] per token, each 2*cells wide
    pub states: Vec<Vec<f64>>,
    /// question vector r (2*cells)
    pub question: Vec<f64>,
}

pub fn qa_encode(
    model: &QaModel,
    text: &[usize],
    omega: &[u8],
    question: &[usize],
) -> crate::Result<QaEncoding> {
    if text.is_empty() || question.is_empty() {
        return Err(crate::Error::Shape(format!(
            "encode needs nonempty text and question (got {} / {})",
            text.len(),
            question.len()
        )));
    }
    if omega.len() != text.len() {
        return Err(crate::Error::Shape(format!(
            "mask length {} vs text length {}",
            omega.len(),
            text.len()
        )));
    }
    let n = text.len();
    let cells = model.cells();
    let masked_ids: Vec<usize> = text
        .iter()
        .zip(omega)
        .map(|(&id, &w)| if w == 1 { id } else { SKIP_ID })
        .collect();
    let xs: Vec<Vec<f64>> = masked_ids.iter().map(|&id| model.emb.lookup(id).to_vec()).collect();
    let rev: Vec<Vec<f64>> = xs.iter().rev().cloned().collect();
    let fwd_run = LstmRun::forward(&model.fwd_text, &xs, vec![0.0; cells], vec![0.0; cells]);
    let bwd_run = LstmRun::forward(&model.bwd_text, &rev, vec![0.0; cells], vec![0.0; cells]);

    let qx: Vec<Vec<f64>> = question.iter().map(|&id| model.emb.lookup(id).to_vec()).collect();
    let qrev: Vec<Vec<f64>> = qx.iter().rev().cloned().collect();
    let qf_run = LstmRun::forward(&model.fwd_question, &qx, vec![0.0; cells], vec![0.0; cells]);
    let qb_run = LstmRun::forward(&model.bwd_question, &qrev, vec![0.0; cells], vec![0.0; cells]);

    // forward state after token i, backward state covering the suffix from i
    let states: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut v = fwd_run.hs[i + 1].clone();
            v.extend_from_slice(&bwd_run.hs[n - i]);
            v
        })
        .collect();
    let mut question_vec = qf_run.final_h().to_vec();
    question_vec.extend_from_slice(qb_run.final_h());

    Ok(QaEncoding {
        masked_ids,
        question_ids: question.to_vec(),
        fwd_run,
        bwd_run,
        qf_run,
        qb_run,
        states,
        question: question_vec,
    })
}

/// Relevance-weighted pooling and the entity softmax. Relevance scores are
/// kept in log space; `softmax` subtracts the maximum, which is what keeps
/// the exp in the weighting from overflowing.
pub struct AnswerDist {
    pub log_weights: Vec<f64>,
    pub weights: Vec<f64>,
    pub pooled: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn answer_distribution(model: &QaModel, enc: &QaEncoding) -> AnswerDist {
    let log_weights: Vec<f64> = enc
        .states
        .iter()
        .map(|v| dot(&enc.question, &model.bilinear.matvec(v)))
        .collect();
    let weights = softmax(&log_weights);
    let width = 2 * model.cells();
    let mut pooled = vec![0.0; width];
    for (v, &w) in enc.states.iter().zip(&weights) {
        for k in 0..width {
            pooled[k] += w * v[k];
        }
    }
    let logits = model.entity_out.matvec(&pooled);
    let probs = softmax(&logits);
    AnswerDist { log_weights, weights, pooled, logits, probs }
}

pub fn answer_nll(model: &QaModel, enc: &QaEncoding, answer: usize) -> (f64, AnswerDist) {
    let dist = answer_distribution(model, enc);
    (-safe_ln(dist.probs[answer]), dist)
}

/// Strictly-highest-probability criterion: ties lose.
pub fn is_correct(dist: &AnswerDist, answer: usize) -> bool {
    dist.probs
        .iter()
        .enumerate()
        .all(|(e, &p)| e == answer || p < dist.probs[answer])
}

/// Backward pass of −log t[answer] through pooling, both passage encoders,
/// both question encoders, and the embeddings (when trainable).
pub fn answer_nll_backward(
    model: &QaModel,
    enc: &QaEncoding,
    dist: &AnswerDist,
    answer: usize,
    grads: &mut QaModel,
) {
    let n = enc.states.len();
    let cells = model.cells();
    let width = 2 * cells;

    let dlogits = softmax_xent_grad(&dist.probs, answer);
    grads.entity_out.add_outer(&dlogits, &dist.pooled);
    let dpooled = model.entity_out.matvec_t(&dlogits);

    // pooled = sum_i weights_i * v_i with weights = softmax(log_weights)
    let dweights: Vec<f64> = enc.states.iter().map(|v| dot(&dpooled, v)).collect();
    let inner: f64 = dist.weights.iter().zip(&dweights).map(|(&w, &dw)| w * dw).sum();
    let dlogw: Vec<f64> = dist
        .weights
        .iter()
        .zip(&dweights)
        .map(|(&w, &dw)| w * (dw - inner))
        .collect();

    let mut dstates = vec![vec![0.0; width]; n];
    let mut dquestion = vec![0.0; width];
    let bt_r = model.bilinear.matvec_t(&enc.question);
    for i in 0..n {
        for k in 0..width {
            dstates[i][k] += dist.weights[i] * dpooled[k] + dlogw[i] * bt_r[k];
        }
        let bv = model.bilinear.matvec(&enc.states[i]);
        for k in 0..width {
            dquestion[k] += dlogw[i] * bv[k];
        }
        let scaled_r: Vec<f64> = enc.question.iter().map(|&r| dlogw[i] * r).collect();
        grads.bilinear.add_outer(&scaled_r, &enc.states[i]);
    }

    // split [R_i; q_i] gradients back onto the two passage runs
    let mut fwd_dhs = vec![vec![0.0; cells]; n];
    let mut bwd_dhs = vec![vec![0.0; cells]; n];
    for i in 0..n {
        fwd_dhs[i].copy_from_slice(&dstates[i][..cells]);
        bwd_dhs[n - 1 - i].copy_from_slice(&dstates[i][cells..]);
    }
    let zeros = vec![0.0; cells];
    let (fwd_dxs, _, _) = enc.fwd_run.backward(&model.fwd_text, &fwd_dhs, &zeros, &mut grads.fwd_text);
    let (bwd_dxs, _, _) = enc.bwd_run.backward(&model.bwd_text, &bwd_dhs, &zeros, &mut grads.bwd_text);

    // question vector only feeds from the two final states
    let qn = enc.question_ids.len();
    let mut qf_dhs = vec![vec![0.0; cells]; qn];
    let mut qb_dhs = vec![vec![0.0; cells]; qn];
    qf_dhs[qn - 1].copy_from_slice(&dquestion[..cells]);
    qb_dhs[qn - 1].copy_from_slice(&dquestion[cells..]);
    let (qf_dxs, _, _) =
        enc.qf_run.backward(&model.fwd_question, &qf_dhs, &zeros, &mut grads.fwd_question);
    let (qb_dxs, _, _) =
        enc.qb_run.backward(&model.bwd_question, &qb_dhs, &zeros, &mut grads.bwd_question);

    if model.emb.trainable {
        let mut add_row = |id: usize, dx: &[f64]| {
            let row = grads.emb.table.row_mut(id);
            for (r, d) in row.iter_mut().zip(dx) {
                *r += d;
            }
        };
        for (i, dx) in fwd_dxs.iter().enumerate() {
            add_row(enc.masked_ids[i], dx);
        }
        for (k, dx) in bwd_dxs.iter().enumerate() {
            add_row(enc.masked_ids[n - 1 - k], dx);
        }
        for (i, dx) in qf_dxs.iter().enumerate() {
            add_row(enc.question_ids[i], dx);
        }
        for (k, dx) in qb_dxs.iter().enumerate() {
            add_row(enc.question_ids[qn - 1 - k], dx);
        }
    }
}

// ─── Head training ─────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct HeadConfig {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    /// fixation rate of the random-skipping noise at the first epoch …
    pub start_rate: f64,
    /// … annealed linearly down to this rate at the last epoch
    pub end_rate: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self { epochs: 24, lr: 0.05, momentum: 0.8, start_rate: 1.0, end_rate: 0.6 }
    }
}

impl HeadConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let check = |field: &str, ok: bool, reason: String| {
            if ok {
                Ok(())
            } else {
                Err(crate::Error::Config { field: format!("head.{field}"), reason })
            }
        };
        check("epochs", self.epochs >= 1, format!("got {}", self.epochs))?;
        check("lr", self.lr > 0.0 && self.lr.is_finite(), format!("got {}", self.lr))?;
        check(
            "momentum",
            (0.0..1.0).contains(&self.momentum),
            format!("got {}", self.momentum),
        )?;
        for (name, v) in [("start_rate", self.start_rate), ("end_rate", self.end_rate)] {
            check(name, (0.0..=1.0).contains(&v), format!("got {v}"))?;
        }
        Ok(())
    }
}

/// Linear anneal of the random-fixation rate across epochs.
pub fn anneal_keep_rate(cfg: &HeadConfig, epoch: usize) -> f64 {
    if cfg.epochs <= 1 {
        return cfg.start_rate;
    }
    let t = epoch as f64 / (cfg.epochs - 1) as f64;
    cfg.start_rate + t * (cfg.end_rate - cfg.start_rate)
}

#[derive(Debug, Clone, Serialize)]
pub struct HeadEpochLog {
    pub epoch: usize,
    pub keep_rate: f64,
    pub mean_nll: f64,
    pub sampled_rate: f64,
}

/// SGD on −log t[answer] with random skipping whose rate follows the anneal
/// schedule. The question is never masked. Embeddings train here (when the
/// store allows it) and freeze at the end, like the sequence model's first
/// phase.
pub fn train_qa_head(
    model: &mut QaModel,
    examples: &[QAExample],
    cfg: &HeadConfig,
    seed: u64,
) -> crate::Result<Vec<HeadEpochLog>> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(crate::Error::EmptyCorpus("no training triples".into()));
    }
    let mut opt = SgdMomentum::new(cfg.lr, cfg.momentum);
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let keep = anneal_keep_rate(cfg, epoch);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut srng = crate::rng::stream(seed, "qa-head/shuffle", epoch as u64);
        for i in (1..order.len()).rev() {
            let j = srng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut nrng = crate::rng::stream(seed, "qa-head/noise", epoch as u64);
        let mut nll_sum = 0.0;
        let mut fix_sum = 0.0;
        let mut tok_count = 0usize;
        for &k in &order {
            let ex = &examples[k];
            let omega: Vec<u8> = ex
                .text
                .iter()
                .map(|_| u8::from(nrng.gen::<f64>() < keep))
                .collect();
            fix_sum += omega.iter().map(|&w| w as f64).sum::<f64>();
            tok_count += omega.len();
            let enc = qa_encode(model, &ex.text, &omega, &ex.question)?;
            let (nll, dist) = answer_nll(model, &enc, ex.answer);
            if !nll.is_finite() {
                return Err(crate::Error::NonFinite(format!(
                    "answer loss diverged at epoch {epoch}, example {k}"
                )));
            }
            nll_sum += nll;
            let mut grads = zeroed_like(model);
            answer_nll_backward(model, &enc, &dist, ex.answer, &mut grads);
            opt.step(model, &grads);
        }
        log.push(HeadEpochLog {
            epoch,
            keep_rate: keep,
            mean_nll: nll_sum / examples.len() as f64,
            sampled_rate: fix_sum / tok_count as f64,
        });
    }
    model.emb.trainable = false;
    Ok(log)
}

/// Indices of the examples the head answers correctly with every token
/// fixated — the training set for the policy phase.
pub fn filter_answerable(model: &QaModel, examples: &[QAExample]) -> crate::Result<Vec<usize>> {
    let mut keep = Vec::new();
    for (k, ex) in examples.iter().enumerate() {
        let omega = vec![1u8; ex.text.len()];
        let enc = qa_encode(model, &ex.text, &omega, &ex.question)?;
        let dist = answer_distribution(model, &enc);
        if is_correct(&dist, ex.answer) {
            keep.push(k);
        }
    }
    Ok(keep)
}

pub fn full_attention_accuracy(model: &QaModel, examples: &[QAExample]) -> crate::Result<f64> {
    let right = filter_answerable(model, examples)?.len();
    Ok(right as f64 / examples.len() as f64)
}

/// Accuracy under i.i.d. Bernoulli skipping at a fixed rate — the strategy-
/// free baseline the trained policy is compared against.
pub fn random_skip_accuracy(
    model: &QaModel,
    examples: &[QAExample],
    rate: f64,
    seed: u64,
) -> crate::Result<f64> {
    let mut right = 0usize;
    for (k, ex) in examples.iter().enumerate() {
        let mut rng = crate::rng::stream(seed, "qa-random-skip", k as u64);
        let omega: Vec<u8> = ex.text.iter().map(|_| u8::from(rng.gen::<f64>() < rate)).collect();
        let enc = qa_encode(model, &ex.text, &omega, &ex.question)?;
        let dist = answer_distribution(model, &enc);
        if is_correct(&dist, ex.answer) {
            right += 1;
        }
    }
    Ok(right as f64 / examples.len() as f64)
}

// ─── Policy features ───────────────────────────────────────────────────────

pub const FEATURE_COUNT: usize = 5;

/// Reading condition of one simulated trial. The code is the raw value of
/// feature (b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    Preview,
    NoPreview,
}

impl Condition {
    pub fn code(self) -> f64 {
        match self {
            Condition::Preview => -0.5,
            Condition::NoPreview => 0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Preview => "preview",
            Condition::NoPreview => "no_preview",
        }
    }

    pub fn parse(s: &str) -> crate::Result<Self> {
        match s {
            "preview" => Ok(Condition::Preview),
            "no_preview" => Ok(Condition::NoPreview),
            other => Err(crate::Error::Config {
                field: "condition".into(),
                reason: format!("expected preview|no_preview, got {other}"),
            }),
        }
    }

    pub const BOTH: [Condition; 2] = [Condition::Preview, Condition::NoPreview];
}

/// Per-feature mean and range collected from the training split; every raw
/// feature is mapped through (x − mean) / range before scoring. A feature
/// with no spread maps to 0.
///
/// Features, in order: (a) token position, (b) condition code, (c) their
/// product, (d) token occurs in the question, (e) decaying average of (d)
/// over fixated predecessors. (d) and (e) exist only with question preview;
/// without it they are pinned to the centered value 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: [f64; FEATURE_COUNT],
    pub range: [f64; FEATURE_COUNT],
}

impl FeatureStats {
    pub fn identity() -> Self {
        Self { mean: [0.0; FEATURE_COUNT], range: [1.0; FEATURE_COUNT] }
    }

    pub fn scale(&self, k: usize, raw: f64) -> f64 {
        if self.range[k] > 0.0 {
            (raw - self.mean[k]) / self.range[k]
        } else {
            0.0
        }
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn in_question_flags(ex: &QAExample) -> Vec<f64> {
    let qset: HashSet<usize> = ex.question.iter().copied().collect();
    ex.text.iter().map(|id| f64::from(qset.contains(id))).collect()
}

/// One pass over the training split with full attention and the given decay,
/// accumulating mean and range per feature. (a)–(c) are pooled over both
/// conditions; (d) and (e) only exist with preview, so their statistics come
/// from preview passes alone.
pub fn collect_feature_stats(examples: &[QAExample], decay: f64) -> crate::Result<FeatureStats> {
    if examples.is_empty() {
        return Err(crate::Error::EmptyCorpus("no examples for feature statistics".into()));
    }
    let mut lo = [f64::INFINITY; FEATURE_COUNT];
    let mut hi = [f64::NEG_INFINITY; FEATURE_COUNT];
    let mut sum = [0.0; FEATURE_COUNT];
    let mut count = [0usize; FEATURE_COUNT];
    fn add(
        k: usize,
        x: f64,
        lo: &mut [f64; FEATURE_COUNT],
        hi: &mut [f64; FEATURE_COUNT],
        sum: &mut [f64; FEATURE_COUNT],
        count: &mut [usize; FEATURE_COUNT],
    ) {
        lo[k] = lo[k].min(x);
        hi[k] = hi[k].max(x);
        sum[k] += x;
        count[k] += 1;
    }
    for ex in examples {
        let d = in_question_flags(ex);
        for cond in Condition::BOTH {
            let code = cond.code();
            let mut e = 0.0;
            for i in 0..ex.text.len() {
                let pos = (i + 1) as f64;
                add(0, pos, &mut lo, &mut hi, &mut sum, &mut count);
                add(1, code, &mut lo, &mut hi, &mut sum, &mut count);
                add(2, pos * code, &mut lo, &mut hi, &mut sum, &mut count);
                if cond == Condition::Preview {
                    add(3, d[i], &mut lo, &mut hi, &mut sum, &mut count);
                    add(4, e, &mut lo, &mut hi, &mut sum, &mut count);
                    // full attention: every predecessor counts
                    e = decay * e + (1.0 - decay) * d[i];
                }
            }
        }
    }
    let mut mean = [0.0; FEATURE_COUNT];
    let mut range = [0.0; FEATURE_COUNT];
    for k in 0..FEATURE_COUNT {
        if count[k] > 0 {
            mean[k] = sum[k] / count[k] as f64;
            range[k] = hi[k] - lo[k];
        }
    }
    Ok(FeatureStats { mean, range })
}

// ─── Logistic attention policy ─────────────────────────────────────────────

/// Which linear term the 5-entry weight vector contributes. The score is
///   FeatureWeights:   u + v·X_i + X_iᵀ A ŵ_i     (default)
///   EmbeddingWeights: u + v'·ŵ_i + X_iᵀ A ŵ_i
/// The two readings disagree about what v multiplies; both are kept and the
/// choice is part of the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreForm {
    FeatureWeights,
    EmbeddingWeights,
}

impl ScoreForm {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreForm::FeatureWeights => "feature_weights",
            ScoreForm::EmbeddingWeights => "embedding_weights",
        }
    }

    pub fn parse(s: &str) -> crate::Result<Self> {
        match s {
            "feature_weights" => Ok(ScoreForm::FeatureWeights),
            "embedding_weights" => Ok(ScoreForm::EmbeddingWeights),
            other => Err(crate::Error::Config {
                field: "score_form".into(),
                reason: format!("expected feature_weights|embedding_weights, got {other}"),
            }),
        }
    }
}

/// The logistic fixate/skip model: bias u, feature weights v, interaction
/// matrix A between features and the token embedding, and the decay of
/// feature (e), stored as a logit so it stays in (0,1).
#[derive(Debug, Clone)]
pub struct QaAttention {
    pub form: ScoreForm,
    /// [1]
    pub bias: Tensor,
    /// [FEATURE_COUNT]
    pub feat_w: Tensor,
    /// [FEATURE_COUNT, emb] — X_iᵀ A ŵ_i
    pub interact: Tensor,
    /// [emb] — only used by the EmbeddingWeights form
    pub embed_w: Tensor,
    /// [1]; decay = σ(decay_logit)
    pub decay_logit: Tensor,
}

impl_parameterized!(QaAttention {
    "bias" => bias,
    "feat_w" => feat_w,
    "interact" => interact,
    "embed_w" => embed_w,
    "decay_logit" => decay_logit,
});

impl QaAttention {
    pub fn new(emb_dim: usize, form: ScoreForm, rng: &mut Rng, bound: f64) -> Self {
        let mut attn = Self::zeros(emb_dim, form);
        attn.feat_w.init_uniform(rng, bound);
        attn.interact.init_uniform(rng, bound);
        attn.embed_w.init_uniform(rng, bound);
        attn
    }

    /// All-zero weights: every token fixated with probability 0.5, decay 0.5.
    pub fn zeros(emb_dim: usize, form: ScoreForm) -> Self {
        Self {
            form,
            bias: Tensor::zeros(vec![1]),
            feat_w: Tensor::zeros(vec![FEATURE_COUNT]),
            interact: Tensor::zeros(vec![FEATURE_COUNT, emb_dim]),
            embed_w: Tensor::zeros(vec![emb_dim]),
            decay_logit: Tensor::zeros(vec![1]),
        }
    }

    pub fn decay(&self) -> f64 {
        sigmoid(self.decay_logit.data[0])
    }

    /// u + v-term + X_iᵀ A ŵ_i for one token.
    pub fn score_logit(&self, x: &[f64; FEATURE_COUNT], emb: &[f64]) -> f64 {
        let aw = self.interact.matvec(emb);
        let mut logit = self.bias.data[0] + dot(x, &aw);
        logit += match self.form {
            ScoreForm::FeatureWeights => dot(&self.feat_w.data, x),
            ScoreForm::EmbeddingWeights => dot(&self.embed_w.data, emb),
        };
        logit
    }
}

struct QaPosCache {
    x: [f64; FEATURE_COUNT],
    /// A ŵ_i — reused for the decay derivative and the interaction gradient
    aw: [f64; FEATURE_COUNT],
    word: usize,
    /// d(scaled feature e) / d(decay_logit); zero without preview
    dxe: f64,
}

/// One sequential pass of the policy over an example. Feature (e) folds in
/// only fixated predecessors, so sampling has to run left to right; the same
/// loop serves forced masks for the enumeration oracle.
pub struct QaRollout {
    pub omega: Vec<u8>,
    pub probs: Vec<f64>,
    caches: Vec<QaPosCache>,
}

pub fn qa_rollout(
    attn: &QaAttention,
    emb: &EmbeddingStore,
    stats: &FeatureStats,
    ex: &QAExample,
    condition: Condition,
    forced: Option<&[u8]>,
    rng: &mut Rng,
) -> QaRollout {
    let n = ex.text.len();
    let d = in_question_flags(ex);
    let delta = attn.decay();
    let dsig = delta * (1.0 - delta);
    let code = condition.code();
    let preview = condition == Condition::Preview;

    let mut omega = Vec::with_capacity(n);
    let mut probs = Vec::with_capacity(n);
    let mut caches = Vec::with_capacity(n);
    let mut e_raw = 0.0;
    let mut de_ddelta = 0.0;
    for i in 0..n {
        let pos = (i + 1) as f64;
        let mut x = [
            stats.scale(0, pos),
            stats.scale(1, code),
            stats.scale(2, pos * code),
            stats.scale(3, d[i]),
            stats.scale(4, e_raw),
        ];
        let mut dxe = 0.0;
        if preview {
            if stats.range[4] > 0.0 {
                dxe = de_ddelta * dsig / stats.range[4];
            }
        } else {
            // without preview the question features take the centered value
            x[3] = 0.0;
            x[4] = 0.0;
        }
        let word = ex.text[i];
        let w_emb = emb.lookup(word);
        let aw_vec = attn.interact.matvec(w_emb);
        let mut aw = [0.0; FEATURE_COUNT];
        aw.copy_from_slice(&aw_vec);
        let mut logit = attn.bias.data[0] + dot(&x, &aw);
        logit += match attn.form {
            ScoreForm::FeatureWeights => dot(&attn.feat_w.data, &x),
            ScoreForm::EmbeddingWeights => dot(&attn.embed_w.data, w_emb),
        };
        let p = sigmoid(logit);
        let w = match forced {
            Some(f) => f[i],
            None => u8::from(rng.gen::<f64>() < p),
        };
        omega.push(w);
        probs.push(p);
        caches.push(QaPosCache { x, aw, word, dxe });

        // recurrence for feature (e): skipped predecessors contribute zero
        let d_eff = d[i] * w as f64;
        de_ddelta = (e_raw - d_eff) + delta * de_ddelta;
        e_raw = delta * e_raw + (1.0 - delta) * d_eff;
    }
    QaRollout { omega, probs, caches }
}

impl QaRollout {
    /// The scaled feature vector the policy saw at position i.
    pub fn feature_vector(&self, i: usize) -> [f64; FEATURE_COUNT] {
        self.caches[i].x
    }

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

    fn add_logit_gradient(
        &self,
        attn: &QaAttention,
        emb: &EmbeddingStore,
        i: usize,
        coef: f64,
        grads: &mut QaAttention,
    ) {
        let cache = &self.caches[i];
        let w_emb = emb.lookup(cache.word);
        grads.bias.data[0] += coef;
        match attn.form {
            ScoreForm::FeatureWeights => {
                for k in 0..FEATURE_COUNT {
                    grads.feat_w.data[k] += coef * cache.x[k];
                }
            }
            ScoreForm::EmbeddingWeights => {
                for (g, &w) in grads.embed_w.data.iter_mut().zip(w_emb) {
                    *g += coef * w;
                }
            }
        }
        let scaled_x: Vec<f64> = cache.x.iter().map(|&x| coef * x).collect();
        grads.interact.add_outer(&scaled_x, w_emb);
        // the score's sensitivity to feature (e), chained through the decay
        let dlogit_dxe = cache.aw[4]
            + match attn.form {
                ScoreForm::FeatureWeights => attn.feat_w.data[4],
                ScoreForm::EmbeddingWeights => 0.0,
            };
        grads.decay_logit.data[0] += coef * dlogit_dxe * cache.dxe;
    }

    /// sum_i coef[i] * d log p(omega_i) / d theta
    pub fn add_score_gradient(
        &self,
        attn: &QaAttention,
        emb: &EmbeddingStore,
        coef: &[f64],
        grads: &mut QaAttention,
    ) {
        for i in 0..self.omega.len() {
            let dlogit = coef[i] * (self.omega[i] as f64 - self.probs[i]);
            if dlogit != 0.0 {
                self.add_logit_gradient(attn, emb, i, dlogit, grads);
            }
        }
    }

    /// weight * d/dtheta sum_i p_i along the sampled path (the pathwise part
    /// of the economy term).
    pub fn add_rate_gradient(
        &self,
        attn: &QaAttention,
        emb: &EmbeddingStore,
        weight: f64,
        grads: &mut QaAttention,
    ) {
        for i in 0..self.probs.len() {
            let p = self.probs[i];
            self.add_logit_gradient(attn, emb, i, weight * p * (1.0 - p), grads);
        }
    }

    /// weight * d/dtheta sum_i H(Bernoulli(p_i)), trajectory fixed.
    pub fn add_entropy_gradient(
        &self,
        attn: &QaAttention,
        emb: &EmbeddingStore,
        weight: f64,
        grads: &mut QaAttention,
    ) {
        for i in 0..self.probs.len() {
            let p = self.probs[i];
            let dlogit = weight * bernoulli_entropy_dp(p) * p * (1.0 - p);
            self.add_logit_gradient(attn, emb, i, dlogit, grads);
        }
    }
}

// ─── REINFORCE on the answer objective ─────────────────────────────────────

#[derive(Debug, Clone)]
pub struct QaTradeoffConfig {
    /// weight of the fixation-rate term ‖ω‖₁/N
    pub alpha: f64,
    pub entropy_weight: f64,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
}

impl Default for QaTradeoffConfig {
    fn default() -> Self {
        Self { alpha: 2.25, entropy_weight: 0.05, lr: 0.001, momentum: 0.95, batch: 8 }
    }
}

impl QaTradeoffConfig {
    pub fn validate(&self) -> crate::Result<()> {
        for (name, v, nonneg) in [
            ("alpha", self.alpha, true),
            ("entropy_weight", self.entropy_weight, true),
            ("lr", self.lr, false),
        ] {
            if !v.is_finite() || (nonneg && v < 0.0) || (!nonneg && v <= 0.0) {
                return Err(crate::Error::Config {
                    field: format!("qa_tradeoff.{name}"),
                    reason: format!("got {v}"),
                });
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(crate::Error::Config {
                field: "qa_tradeoff.momentum".into(),
                reason: format!("got {}", self.momentum),
            });
        }
        if self.batch == 0 {
            return Err(crate::Error::Config {
                field: "qa_tradeoff.batch".into(),
                reason: "got 0".into(),
            });
        }
        Ok(())
    }
}

/// The sampled estimate of d/dθ E[−log P(answer|ω) + α‖ω‖₁/N] for one
/// example and condition, accumulated into `grads`:
///
///   score part:    (nll + (α/N)·Σ_{j>i} p_j) · d log p(ω_i)
///   pathwise part: (α/N) · d p_i
///
/// The suffix-sum factor makes the economy part exact: later fixation
/// probabilities depend on earlier decisions through feature (e), and the
/// pathwise derivative alone would miss that dependence.
pub fn qa_gradient_sample(
    attn: &QaAttention,
    model: &QaModel,
    stats: &FeatureStats,
    ex: &QAExample,
    condition: Condition,
    alpha: f64,
    rng: &mut Rng,
    grads: &mut QaAttention,
) -> crate::Result<(QaRollout, f64)> {
    let roll = qa_rollout(attn, &model.emb, stats, ex, condition, None, rng);
    let enc = qa_encode(model, &ex.text, &roll.omega, &ex.question)?;
    let (nll, _) = answer_nll(model, &enc, ex.answer);
    let n = ex.text.len() as f64;

    let mut suffix = vec![0.0; roll.probs.len()];
    let mut acc = 0.0;
    for i in (0..roll.probs.len()).rev() {
        suffix[i] = acc;
        acc += roll.probs[i];
    }
    let coef: Vec<f64> = suffix.iter().map(|&s| nll + alpha / n * s).collect();
    roll.add_score_gradient(attn, &model.emb, &coef, grads);
    roll.add_rate_gradient(attn, &model.emb, alpha / n, grads);
    Ok((roll, nll))
}

#[derive(Debug, Clone, Serialize)]
pub struct QaReinforceStats {
    pub mean_nll: f64,
    pub mean_rate: f64,
    pub preview_rate: Option<f64>,
    pub no_preview_rate: Option<f64>,
    pub grad_norm: f64,
}

/// Policy training against a frozen head. Batches hold examples of similar
/// length; every example draws a fresh uniform condition each epoch.
pub fn train_qa_attention(
    attn: &mut QaAttention,
    model: &QaModel,
    examples: &[QAExample],
    keep: &[usize],
    stats: &FeatureStats,
    cfg: &QaTradeoffConfig,
    epochs: usize,
    seed: u64,
) -> crate::Result<Vec<QaReinforceStats>> {
    cfg.validate()?;
    if keep.is_empty() {
        return Err(crate::Error::EmptyCorpus("no answerable examples to train on".into()));
    }
    // similar-length batching: sort once, then shuffle whole batches
    let mut by_len: Vec<usize> = keep.to_vec();
    by_len.sort_by_key(|&k| (examples[k].text.len(), k));
    let batches: Vec<Vec<usize>> = by_len.chunks(cfg.batch).map(|c| c.to_vec()).collect();

    let mut opt = SgdMomentum::new(cfg.lr, cfg.momentum);
    let mut log = Vec::new();
    for epoch in 0..epochs {
        let mut order: Vec<usize> = (0..batches.len()).collect();
        let mut srng = crate::rng::stream(seed, "qa-attn/shuffle", epoch as u64);
        for i in (1..order.len()).rev() {
            let j = srng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut rng = crate::rng::stream(seed, "qa-attn/sample", epoch as u64);
        for &b in &order {
            let batch = &batches[b];
            let inv = 1.0 / batch.len() as f64;
            let mut grads = zeroed_like(attn);
            let mut stats_row = QaReinforceStats {
                mean_nll: 0.0,
                mean_rate: 0.0,
                preview_rate: None,
                no_preview_rate: None,
                grad_norm: 0.0,
            };
            let mut cond_sums = [0.0f64; 2];
            let mut cond_counts = [0usize; 2];
            for &k in batch {
                let condition = if rng.gen::<f64>() < 0.5 {
                    Condition::Preview
                } else {
                    Condition::NoPreview
                };
                let mut sample_grads = zeroed_like(attn);
                let (roll, nll) = qa_gradient_sample(
                    attn,
                    model,
                    stats,
                    &examples[k],
                    condition,
                    cfg.alpha,
                    &mut rng,
                    &mut sample_grads,
                )?;
                if cfg.entropy_weight > 0.0 {
                    roll.add_entropy_gradient(
                        attn,
                        &model.emb,
                        -cfg.entropy_weight,
                        &mut sample_grads,
                    );
                }
                grads.add_scaled_params(&sample_grads, inv);
                stats_row.mean_nll += nll * inv;
                stats_row.mean_rate += roll.fixation_rate() * inv;
                let slot = usize::from(condition == Condition::NoPreview);
                cond_sums[slot] += roll.fixation_rate();
                cond_counts[slot] += 1;
            }
            let norm = grads.global_norm();
            if !norm.is_finite() {
                return Err(crate::Error::NonFinite(format!(
                    "policy gradient diverged at epoch {epoch}"
                )));
            }
            stats_row.grad_norm = norm;
            if cond_counts[0] > 0 {
                stats_row.preview_rate = Some(cond_sums[0] / cond_counts[0] as f64);
            }
            if cond_counts[1] > 0 {
                stats_row.no_preview_rate = Some(cond_sums[1] / cond_counts[1] as f64);
            }
            opt.step(attn, &grads);
            log.push(stats_row);
        }
    }
    Ok(log)
}

// ─── Enumeration oracles (short texts only) ────────────────────────────────

/// Exact d/dθ E[−log P(answer|ω) + α‖ω‖₁/N] over all 2^N masks, via
/// Σ_ω P(ω) R(ω) d log P(ω).
pub fn enumerate_qa_gradient(
    attn: &QaAttention,
    model: &QaModel,
    stats: &FeatureStats,
    ex: &QAExample,
    condition: Condition,
    alpha: f64,
) -> crate::Result<QaAttention> {
    let n = ex.text.len();
    assert!(n <= 16, "enumeration over 2^{n} masks");
    let mut exact = zeroed_like(attn);
    let mut dead = crate::rng::root(0);
    for bits in 0u32..(1u32 << n) {
        let omega: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
        let roll = qa_rollout(attn, &model.emb, stats, ex, condition, Some(&omega), &mut dead);
        let enc = qa_encode(model, &ex.text, &omega, &ex.question)?;
        let (nll, _) = answer_nll(model, &enc, ex.answer);
        let ret = nll + alpha * roll.fixation_count() / n as f64;
        let coef = vec![roll.log_prob().exp() * ret; n];
        roll.add_score_gradient(attn, &model.emb, &coef, &mut exact);
    }
    Ok(exact)
}

/// Expected fixation rate under the policy, by enumeration.
pub fn enumerate_qa_rate(
    attn: &QaAttention,
    emb: &EmbeddingStore,
    stats: &FeatureStats,
    ex: &QAExample,
    condition: Condition,
) -> f64 {
    let n = ex.text.len();
    assert!(n <= 16);
    let mut dead = crate::rng::root(0);
    let mut acc = 0.0;
    for bits in 0u32..(1u32 << n) {
        let omega: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
        let roll = qa_rollout(attn, emb, stats, ex, condition, Some(&omega), &mut dead);
        acc += roll.log_prob().exp() * roll.fixation_rate();
    }
    acc
}

// ─── Policy evaluation and the α sweep ─────────────────────────────────────

/// Mean fixation rate and answer accuracy of a policy on held-out examples,
/// one sampled mask per example.
pub fn evaluate_policy(
    attn: &QaAttention,
    model: &QaModel,
    stats: &FeatureStats,
    examples: &[QAExample],
    condition: Condition,
    seed: u64,
) -> crate::Result<(f64, f64)> {
    if examples.is_empty() {
        return Err(crate::Error::EmptyCorpus("no evaluation examples".into()));
    }
    let mut rate_sum = 0.0;
    let mut right = 0usize;
    for (k, ex) in examples.iter().enumerate() {
        let mut rng = crate::rng::stream(seed, "qa-eval", k as u64);
        let roll = qa_rollout(attn, &model.emb, stats, ex, condition, None, &mut rng);
        rate_sum += roll.fixation_rate();
        let enc = qa_encode(model, &ex.text, &roll.omega, &ex.question)?;
        let dist = answer_distribution(model, &enc);
        if is_correct(&dist, ex.answer) {
            right += 1;
        }
    }
    let n = examples.len() as f64;
    Ok((rate_sum / n, right as f64 / n))
}

#[derive(Debug, Clone, Serialize)]
pub struct TradeoffPoint {
    pub alpha: f64,
    pub run: usize,
    pub condition: String,
    pub fixation_rate: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepFailure {
    pub alpha: f64,
    pub run: usize,
    pub reason: String,
}

/// 0 to 4 in steps of 0.25.
pub fn alpha_grid() -> Vec<f64> {
    (0..17).map(|k| k as f64 * 0.25).collect()
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: Vec<f64>,
    pub runs: usize,
    pub epochs: usize,
    pub threads: usize,
    pub tradeoff: QaTradeoffConfig,
    pub init_bound: f64,
    pub score_form: ScoreForm,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            grid: alpha_grid(),
            runs: 1,
            epochs: 4,
            threads: 1,
            tradeoff: QaTradeoffConfig::default(),
            init_bound: 0.1,
            score_form: ScoreForm::FeatureWeights,
        }
    }
}

/// One policy per (α, run): train on the answerable split, evaluate per
/// condition on held-out examples. Tasks are independent and run on a small
/// worker pool; results are merged back in grid order, so the output does
/// not depend on the worker count. Failed runs become `SweepFailure` entries
/// and the sweep continues.
pub fn alpha_sweep(
    model: &QaModel,
    examples: &[QAExample],
    keep: &[usize],
    eval_examples: &[QAExample],
    stats: &FeatureStats,
    cfg: &SweepConfig,
    seed: u64,
) -> (Vec<TradeoffPoint>, Vec<SweepFailure>) {
    let tasks: Vec<(usize, f64, usize)> = cfg
        .grid
        .iter()
        .enumerate()
        .flat_map(|(gi, &alpha)| (0..cfg.runs).map(move |run| (gi, alpha, run)))
        .collect();
    type TaskResult = Result<Vec<TradeoffPoint>, SweepFailure>;
    let results: Vec<Option<TaskResult>> = {
        let slots: Vec<std::sync::Mutex<Option<TaskResult>>> =
            tasks.iter().map(|_| std::sync::Mutex::new(None)).collect();
        let next = std::sync::atomic::AtomicUsize::new(0);
        let workers = cfg.threads.max(1).min(tasks.len().max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let t = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    if t >= tasks.len() {
                        break;
                    }
                    let (gi, alpha, run) = tasks[t];
                    let task_id = (gi * cfg.runs + run) as u64;
                    let mut rng = crate::rng::stream(seed, "sweep/init", task_id);
                    let mut attn =
                        QaAttention::new(model.emb.dim, cfg.score_form, &mut rng, cfg.init_bound);
                    let mut tcfg = cfg.tradeoff.clone();
                    tcfg.alpha = alpha;
                    let trained = train_qa_attention(
                        &mut attn,
                        model,
                        examples,
                        keep,
                        stats,
                        &tcfg,
                        cfg.epochs,
                        seed ^ (task_id.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
                    );
                    let out: TaskResult = match trained {
                        Err(e) => Err(SweepFailure { alpha, run, reason: e.to_string() }),
                        Ok(_) => {
                            let mut points = Vec::with_capacity(2);
                            let mut failure = None;
                            for condition in Condition::BOTH {
                                match evaluate_policy(
                                    &attn,
                                    model,
                                    stats,
                                    eval_examples,
                                    condition,
                                    seed ^ task_id.rotate_left(17),
                                ) {
                                    Ok((rate, acc)) => points.push(TradeoffPoint {
                                        alpha,
                                        run,
                                        condition: condition.as_str().to_string(),
                                        fixation_rate: rate,
                                        accuracy: acc,
                                    }),
                                    Err(e) => {
                                        failure = Some(SweepFailure {
                                            alpha,
                                            run,
                                            reason: e.to_string(),
                                        })
                                    }
                                }
                            }
                            match failure {
                                Some(f) => Err(f),
                                None => Ok(points),
                            }
                        }
                    };
                    *slots[t].lock().unwrap() = Some(out);
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().unwrap()).collect()
    };

    let mut points = Vec::new();
    let mut failures = Vec::new();
    for r in results.into_iter().flatten() {
        match r {
            Ok(p) => points.extend(p),
            Err(f) => failures.push(f),
        }
    }
    (points, failures)
}

/// The α whose overall mean fixation rate (across runs and conditions) is
/// closest to the target; ties go to the smaller α.
pub fn select_alpha(points: &[TradeoffPoint], target_rate: f64) -> crate::Result<f64> {
    if points.is_empty() {
        return Err(crate::Error::EmptyCorpus("no tradeoff points".into()));
    }
    let mut alphas: Vec<f64> = points.iter().map(|p| p.alpha).collect();
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    let mut best = (f64::INFINITY, f64::NAN);
    for &alpha in &alphas {
        let rates: Vec<f64> = points
            .iter()
            .filter(|p| p.alpha == alpha)
            .map(|p| p.fixation_rate)
            .collect();
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let gap = (mean - target_rate).abs();
        if gap < best.0 {
            best = (gap, alpha);
        }
    }
    Ok(best.1)
}

pub fn write_tradeoff_csv(path: &std::path::Path, points: &[TradeoffPoint]) -> crate::Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(crate::Error::from)?;
    wtr.write_record(["alpha", "run", "condition", "fixation_rate", "accuracy"])?;
    for p in points {
        wtr.write_record([
            format!("{}", p.alpha),
            format!("{}", p.run),
            p.condition.clone(),
            format!("{}", p.fixation_rate),
            format!("{}", p.accuracy),
        ])?;
    }
    wtr.flush().map_err(crate::Error::Io)?;
    Ok(())
}
