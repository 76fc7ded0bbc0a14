// Tests of the fixate/skip policy: probability calibration, causality of the
// sequential rollout, score-function and entropy gradients against central
// differences and enumeration, and the economy pressure of the tradeoff term.

use skipread::corpus::{window_split, TokenWindow, Vocabulary};
use skipread::lm::{sequence_loss, train_phase1, LmDims, Phase1Config, ReaderLm};
use skipread::nn::{finite_diff_check, zeroed_like, Parameterized, SgdMomentum};
use skipread::policy::{
    enumerate_exact_gradient, fixation_prob, rollout, sample_fixations, train_attention,
    AttentionNet, Baseline, TradeoffConfig,
};
use skipread::synth::{echo_corpus, EchoConfig};

fn tiny_lm(vocab: usize, emb: usize, hidden: usize, seed: u64) -> ReaderLm {
    let mut rng = skipread::rng::root(seed);
    ReaderLm::new(LmDims { vocab, emb, hidden }, &mut rng, 0.4)
}

fn tiny_net(lm: &ReaderLm, net_hidden: usize, seed: u64) -> AttentionNet {
    let mut rng = skipread::rng::root(seed);
    AttentionNet::new(lm.emb.dim, lm.reader.hidden_dim, net_hidden, &mut rng, 0.4)
}

fn window(ids: Vec<usize>) -> TokenWindow {
    TokenWindow { doc: 0, start: 0, ids }
}

#[test]
fn zero_weights_fixate_half_the_time() {
    let lm = tiny_lm(12, 6, 8, 3);
    let net = AttentionNet::zeros(lm.emb.dim, lm.reader.hidden_dim, 5);
    let w = window(vec![4, 7, 5, 9, 11, 6, 8, 10]);

    let feat = vec![0.3; lm.emb.dim + lm.reader.hidden_dim + 1];
    assert_eq!(fixation_prob(&net, &feat), 0.5);

    let mut rng = skipread::rng::root(99);
    let roll = rollout(&lm, &net, &w, None, &mut rng);
    assert!(roll.probs.iter().all(|&p| p == 0.5));

    let mut fixated = 0.0;
    let draws = 10_000;
    for _ in 0..draws {
        let (omega, _) = sample_fixations(&lm, &net, &w, &mut rng);
        fixated += omega.iter().map(|&o| o as f64).sum::<f64>();
    }
    let rate = fixated / (draws as f64 * w.ids.len() as f64);
    assert!((rate - 0.5).abs() < 0.02, "empirical rate {rate}");
}

#[test]
fn decisions_depend_only_on_the_prefix() {
    let lm = tiny_lm(14, 6, 8, 5);
    let net = tiny_net(&lm, 6, 11);
    let omega = [1u8, 0, 1, 1, 0, 1, 0, 1, 1, 0];
    let w1 = window(vec![4, 7, 5, 9, 11, 6, 8, 10, 12, 13]);
    let mut mutated = w1.ids.clone();
    mutated[7] = 4; // was 10
    let w2 = window(mutated);

    let mut dead = skipread::rng::root(0);
    let r1 = rollout(&lm, &net, &w1, Some(&omega), &mut dead);
    let r2 = rollout(&lm, &net, &w2, Some(&omega), &mut dead);
    for i in 0..7 {
        assert_eq!(r1.probs[i].to_bits(), r2.probs[i].to_bits(), "position {i}");
    }
    // the decision at the mutated token sees its embedding, so it must move
    assert_ne!(r1.probs[7].to_bits(), r2.probs[7].to_bits());
}

#[test]
fn mask_log_probability_gradient_matches_finite_differences() {
    let lm = tiny_lm(10, 5, 6, 7);
    let mut net = tiny_net(&lm, 5, 13);
    let w = window(vec![4, 8, 5, 9, 6, 7]);
    let omega = [1u8, 0, 0, 1, 1, 0];
    let mut dead = skipread::rng::root(0);

    let roll = rollout(&lm, &net, &w, Some(&omega), &mut dead);
    let mut analytic = zeroed_like(&net);
    roll.add_score_gradient(&net, &vec![1.0; w.ids.len()], &mut analytic);

    let max_rel = finite_diff_check(&mut net, &analytic, 1e-5, |n| {
        rollout(&lm, n, &w, Some(&omega), &mut skipread::rng::root(0)).log_prob()
    });
    assert!(max_rel < 1e-4, "max relative error {max_rel}");
}

#[test]
fn entropy_gradient_matches_finite_differences() {
    let lm = tiny_lm(10, 5, 6, 17);
    let mut net = tiny_net(&lm, 5, 19);
    let w = window(vec![5, 9, 4, 8, 6, 7]);
    let omega = [0u8, 1, 1, 0, 1, 1];
    let mut dead = skipread::rng::root(0);

    let roll = rollout(&lm, &net, &w, Some(&omega), &mut dead);
    let mut analytic = zeroed_like(&net);
    roll.add_entropy_gradient(&net, 1.0, &mut analytic);

    let entropy_sum = |n: &AttentionNet| {
        rollout(&lm, n, &w, Some(&omega), &mut skipread::rng::root(0))
            .probs
            .iter()
            .map(|&p| skipread::nn::bernoulli_entropy(p))
            .sum::<f64>()
    };
    let max_rel = finite_diff_check(&mut net, &analytic, 1e-5, entropy_sum);
    assert!(max_rel < 1e-4, "max relative error {max_rel}");
}

#[test]
fn sampled_score_gradient_is_unbiased() {
    // Monte-Carlo mean of the per-sample score gradient vs the exact gradient
    // of E[loss + alpha * fixations] enumerated over all 2^5 masks.
    let lm = tiny_lm(9, 4, 5, 23);
    let net = tiny_net(&lm, 4, 29);
    let w = window(vec![4, 7, 5, 8, 6]);
    let alpha = 2.0;

    let exact = enumerate_exact_gradient(&lm, &net, &w, alpha);

    let mut sum = zeroed_like(&net);
    let mut sumsq = zeroed_like(&net);
    let samples = 20_000usize;
    let mut rng = skipread::rng::root(31);
    for _ in 0..samples {
        let (g, _, _) = skipread::policy::policy_gradient_sample(&lm, &net, &w, alpha, None, &mut rng);
        for name in sum.param_names() {
            let gs = &g.param(name).data;
            let s = &mut sum.param_mut(name).data;
            let q = &mut sumsq.param_mut(name).data;
            for k in 0..gs.len() {
                s[k] += gs[k];
                q[k] += gs[k] * gs[k];
            }
        }
    }

    let n = samples as f64;
    for name in exact.param_names() {
        let e = &exact.param(name).data;
        let s = &sum.param(name).data;
        let q = &sumsq.param(name).data;
        for k in 0..e.len() {
            let mean = s[k] / n;
            let var = (q[k] / n - mean * mean).max(0.0);
            let se = (var / n).sqrt();
            let slack = 4.0 * se + 1e-4;
            assert!(
                (mean - e[k]).abs() <= slack,
                "{name}[{k}]: mc {mean} vs exact {} (se {se})",
                e[k]
            );
        }
    }
}

#[test]
fn sampled_marginals_match_enumeration() {
    let lm = tiny_lm(10, 5, 6, 37);
    let net = tiny_net(&lm, 5, 41);
    let w = window(vec![6, 4, 9, 5, 8, 7]);
    let n = w.ids.len();

    // exact marginal fixation probability per position
    let mut dead = skipread::rng::root(0);
    let mut exact = vec![0.0; n];
    for bits in 0u32..(1 << n) {
        let omega: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
        let p = rollout(&lm, &net, &w, Some(&omega), &mut dead).log_prob().exp();
        for i in 0..n {
            exact[i] += p * omega[i] as f64;
        }
    }

    let mut freq = vec![0.0; n];
    let draws = 10_000;
    let mut rng = skipread::rng::root(43);
    for _ in 0..draws {
        let (omega, _) = sample_fixations(&lm, &net, &w, &mut rng);
        for i in 0..n {
            freq[i] += omega[i] as f64;
        }
    }
    for i in 0..n {
        let f = freq[i] / draws as f64;
        assert!((f - exact[i]).abs() < 0.02, "position {i}: {f} vs {}", exact[i]);
    }
}

#[test]
fn baseline_regresses_onto_the_return() {
    let lm = tiny_lm(10, 5, 6, 47);
    let mut rng = skipread::rng::root(53);
    let mut baseline = Baseline::new(lm.emb.dim, 4, &mut rng, 0.2);
    let w = window(vec![4, 8, 5, 9, 6, 7]);
    let target = 12.5;

    let mut opt = SgdMomentum::new(0.01, 0.0);
    let mut first = f64::NAN;
    let mut last = f64::NAN;
    for step in 0..200 {
        let mut grads = zeroed_like(&baseline);
        let (_, sq) = baseline.regress(&lm, &w, target, &mut grads);
        if step == 0 {
            first = sq;
        }
        last = sq;
        opt.step(&mut baseline, &grads);
    }
    assert!(
        last < first / 50.0,
        "squared error barely moved: {first} -> {last}"
    );
}

#[test]
fn config_validation_rejects_nonsense() {
    assert!(TradeoffConfig::default().validate().is_ok());
    let bad_alpha = TradeoffConfig { alpha: -1.0, ..TradeoffConfig::default() };
    assert!(bad_alpha.validate().is_err());
    let zero_lr = TradeoffConfig { lr: 0.0, ..TradeoffConfig::default() };
    assert!(zero_lr.validate().is_err());
    let nan_entropy = TradeoffConfig { entropy_weight: f64::NAN, ..TradeoffConfig::default() };
    assert!(nan_entropy.validate().is_err());
}

#[test]
fn higher_fixation_price_buys_fewer_fixations() {
    // Train the reader on the echo corpus, freeze it, then train two policies
    // that differ only in the price per fixation.
    let mut rng = skipread::rng::root(42);
    let cfg = EchoConfig { content_symbols: 6, echo_len: 2, docs: 10, doc_len: 90 };
    let docs = echo_corpus(&cfg, &mut rng);
    let stream: Vec<&str> = docs.iter().flatten().map(|s| s.as_str()).collect();
    let vocab = Vocabulary::build(stream, 50, false).unwrap();
    let mut windows = Vec::new();
    for (d, doc) in docs.iter().enumerate() {
        windows.extend(window_split(d, &vocab.encode(doc), 15));
    }

    let mut init_rng = skipread::rng::root(7);
    let mut lm = ReaderLm::new(LmDims { vocab: vocab.len(), emb: 8, hidden: 16 }, &mut init_rng, 0.2);
    let p1 = Phase1Config { epochs: 6, keep_rate: 0.8, lr: 0.2, momentum: 0.0, heldout_every: 8 };
    train_phase1(&mut lm, &windows, &p1, 1234).unwrap();

    let rate_at = |alpha: f64| {
        let mut net = tiny_net(&lm, 8, 61);
        let mut baseline = Baseline::new(lm.emb.dim, 4, &mut skipread::rng::root(67), 0.2);
        let cfg = TradeoffConfig {
            alpha,
            entropy_weight: 0.2,
            lr: 0.05,
            momentum: 0.0,
            baseline_lr: 0.02,
            clip_norm: 5.0,
            batch: 8,
        };
        let log = train_attention(&lm, &mut net, &mut baseline, &windows, &cfg, 4, 2024);
        let tail = &log[log.len() - 5..];
        tail.iter().map(|s| s.mean_fixation_rate).sum::<f64>() / tail.len() as f64
    };

    let free = rate_at(0.0);
    let pricey = rate_at(8.0);
    assert!(
        pricey < free - 0.1,
        "alpha 8 rate {pricey} not clearly below alpha 0 rate {free}"
    );
    assert!(pricey < 0.45, "alpha 8 rate {pricey} should drop below chance");
}

#[test]
fn loss_is_consistent_between_sampler_and_estimator() {
    let lm = tiny_lm(10, 5, 6, 71);
    let net = tiny_net(&lm, 5, 73);
    let w = window(vec![4, 9, 5, 8, 6, 7]);
    let mut rng = skipread::rng::root(79);
    let (_, roll, loss) =
        skipread::policy::policy_gradient_sample(&lm, &net, &w, 1.5, None, &mut rng);
    let direct = sequence_loss(&lm, &w, &roll.omega).total;
    assert_eq!(loss.to_bits(), direct.to_bits(), "{loss} vs {direct}");
}
