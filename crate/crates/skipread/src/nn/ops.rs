#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Probabilities never reach exact zero in f64 after the max shift, but the
/// log is still guarded: values are clamped at 1e-300 before taking it.
const LOG_FLOOR: f64 = 1e-300;

pub fn safe_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = out.iter().sum();
    for p in &mut out {
        *p /= s;
    }
    out
}

pub struct SoftmaxXent {
    pub probs: Vec<f64>,
    pub loss: f64,
}

/// Cross-entropy of a softmax over `logits` against `target`.
/// Gradient w.r.t. the logits is `probs - onehot(target)`.
pub fn softmax_xent(logits: &[f64], target: usize) -> SoftmaxXent {
    assert!(target < logits.len(), "target {} out of {}", target, logits.len());
    let probs = softmax(logits);
    let loss = -safe_ln(probs[target]);
    SoftmaxXent { probs, loss }
}

pub fn softmax_xent_grad(probs: &[f64], target: usize) -> Vec<f64> {
    let mut g = probs.to_vec();
    g[target] -= 1.0;
    g
}

/// Entropy of a Bernoulli(p) in nats.
pub fn bernoulli_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }
}

/// d/dp of the Bernoulli entropy: ln((1-p)/p).
pub fn bernoulli_entropy_dp(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    ((1.0 - p) / p).ln()
}
