// Release gate: ten numbered checks over the whole system, one printed line
// each. Run with `cargo test --test acceptance -- --nocapture` to see the
// table on success; on failure the table is in the panic output.
//
//  1  gradient fidelity            finite differences on every trainable path
//  2  reinforce unbiasedness       200k-sample Monte Carlo vs enumeration
//  3  economy monotonicity         fixation rate falls as the price rises
//  4  skill over random            trained policies beat rate-matched chance
//  5  preview effect               question preview: better accuracy, fewer fixations
//  6  restricted-surprisal identity   all-fixated reader equals the full reader
//  7  masking soundness            skipped tokens are invisible, bit for bit
//  8  metric oracles               hand-computed fixtures for every metric
//  9  eye-movement toolkit         drift recovery, hand-traced measures, pooling
// 10  pipeline determinism         byte-identical artifacts on a re-run

use rand::Rng as _;
use skipread::corpus::{encode_qa, window_split, EntityVocab, QAExample, TokenWindow, Vocabulary};
use skipread::etk::{
    compute_measures, drift_correct, pool_fixations, text_regions, CalibrationGrid,
    DriftCoefficients, LineGeometry, RawFixation, Region, RegionMeasures,
};
use skipread::eval::{
    conditional_ratio, fixation_metrics, fixation_perplexity, rescale_threshold,
};
use skipread::lm::{
    full_surprisal, read_window, restricted_surprisal, sequence_loss, sequence_loss_backward,
    train_phase1, LmDims, Phase1Config, ReaderLm,
};
use skipread::nn::{bernoulli_entropy, finite_diff_check, zeroed_like, Parameterized};
use skipread::policy::{
    enumerate_exact_gradient, policy_gradient_sample, rollout, train_attention, AttentionNet,
    Baseline, TradeoffConfig,
};
use skipread::qa::{
    alpha_sweep, answer_distribution, answer_nll, answer_nll_backward, collect_feature_stats,
    enumerate_qa_gradient, filter_answerable, is_correct, qa_encode, qa_gradient_sample,
    qa_rollout, random_skip_accuracy, train_qa_attention, train_qa_head, Condition, FeatureStats,
    HeadConfig, QaAttention, QaDims, QaModel, QaTradeoffConfig, ScoreForm, SweepConfig,
};
use skipread::synth::{cloze_corpus, echo_corpus, ClozeConfig, EchoConfig};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Check = Result<String, String>;

fn fail(why: impl Into<String>) -> Check {
    Err(why.into())
}

// ─── shared trained systems ────────────────────────────────────────────────

struct S1World {
    lm: ReaderLm,
    heldout: Vec<TokenWindow>,
    /// converged mean fixation rate per alpha, for alphas {0, 2, 5, 10}
    alpha_rates: Vec<(f64, f64)>,
    /// the alpha = 2 policy
    net: AttentionNet,
}

/// Mean fixation probability over sampled rollouts: a low-variance estimate
/// of the policy's expected fixation rate.
fn s1_rate(lm: &ReaderLm, net: &AttentionNet, windows: &[TokenWindow], seed: u64) -> f64 {
    let reps = 4;
    let mut acc = 0.0;
    let mut n = 0usize;
    for (k, w) in windows.iter().enumerate() {
        for r in 0..reps {
            let mut rng = skipread::rng::stream(seed, "accept/s1-rate", (k * 64 + r) as u64);
            let roll = rollout(lm, net, w, None, &mut rng);
            acc += roll.probs.iter().sum::<f64>();
            n += w.ids.len();
        }
    }
    acc / n as f64
}

fn build_s1() -> S1World {
    let mut rng = skipread::rng::root(42);
    let cfg = EchoConfig { content_symbols: 6, echo_len: 2, docs: 22, doc_len: 90 };
    let docs = echo_corpus(&cfg, &mut rng);
    let stream: Vec<&str> = docs.iter().flatten().map(|s| s.as_str()).collect();
    let vocab = Vocabulary::build(stream, 50, false).unwrap();
    let mut windows = Vec::new();
    for (d, doc) in docs.iter().enumerate() {
        windows.extend(window_split(d, &vocab.encode(doc), 15));
    }
    let heldout = windows.split_off(80);

    let mut lm = ReaderLm::new(
        LmDims { vocab: vocab.len(), emb: 8, hidden: 16 },
        &mut skipread::rng::root(7),
        0.2,
    );
    let p1 = Phase1Config { epochs: 6, keep_rate: 0.8, lr: 0.2, momentum: 0.0, heldout_every: 8 };
    train_phase1(&mut lm, &windows, &p1, 1234).unwrap();
    lm.emb.trainable = false;

    let train_at = |alpha: f64| {
        let mut net =
            AttentionNet::new(lm.emb.dim, lm.reader.hidden_dim, 8, &mut skipread::rng::root(61), 0.4);
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
        train_attention(&lm, &mut net, &mut baseline, &windows, &cfg, 8, 2024);
        net
    };
    let mut alpha_rates = Vec::new();
    let mut net_alpha2 = None;
    for alpha in [0.0, 2.0, 5.0, 10.0] {
        let net = train_at(alpha);
        alpha_rates.push((alpha, s1_rate(&lm, &net, &windows, 5)));
        if alpha == 2.0 {
            net_alpha2 = Some(net);
        }
    }
    S1World { lm, heldout, alpha_rates, net: net_alpha2.unwrap() }
}

struct CondEval {
    rate: f64,
    acc: f64,
}

struct PolicyRun {
    preview: CondEval,
    no_preview: CondEval,
}

struct S2World {
    model: QaModel,
    train: Vec<QAExample>,
    heldout: Vec<QAExample>,
    keep: Vec<usize>,
    stats: FeatureStats,
    /// five seeded policies at alpha = 2, evaluated in both conditions
    runs: Vec<PolicyRun>,
}

/// Expected rate (mean rollout probability) and sampled answer accuracy over
/// several rollouts per held-out example.
fn s2_eval(w: &S2World, attn: &QaAttention, condition: Condition, seed: u64) -> CondEval {
    let reps = 16;
    let mut rate = 0.0;
    let mut acc = 0.0;
    for (k, ex) in w.heldout.iter().enumerate() {
        for r in 0..reps {
            let mut rng = skipread::rng::stream(seed, "accept/s2-eval", (k * 1000 + r) as u64);
            let roll = qa_rollout(attn, &w.model.emb, &w.stats, ex, condition, None, &mut rng);
            rate += roll.probs.iter().sum::<f64>() / ex.text.len() as f64;
            let enc = qa_encode(&w.model, &ex.text, &roll.omega, &ex.question).unwrap();
            if is_correct(&answer_distribution(&w.model, &enc), ex.answer) {
                acc += 1.0;
            }
        }
    }
    let n = (w.heldout.len() * reps) as f64;
    CondEval { rate: rate / n, acc: acc / n }
}

fn build_s2() -> S2World {
    let mut rng = skipread::rng::root(42);
    let triples = cloze_corpus(&ClozeConfig::default(), &mut rng);
    let stream: Vec<&str> = triples
        .iter()
        .flat_map(|t| t.text.iter().chain(t.question.iter()).map(|s| s.as_str()))
        .collect();
    let vocab = Vocabulary::build(stream, 80, false).unwrap();
    let entities = EntityVocab::build(&triples);
    let examples: Vec<QAExample> = triples
        .iter()
        .enumerate()
        .map(|(i, t)| encode_qa(t, i, &vocab, &entities, 500).unwrap())
        .collect();
    let split = examples.len() * 4 / 5;
    let (train, heldout) = examples.split_at(split);

    let dims = QaDims { vocab: vocab.len(), emb: 16, cells: 24, entities: entities.len() };
    let mut model = QaModel::new(dims, &mut skipread::rng::root(7), 0.2);
    train_qa_head(&mut model, train, &HeadConfig::default(), 99).unwrap();
    let keep = filter_answerable(&model, train).unwrap();
    let stats = collect_feature_stats(train, 0.5).unwrap();

    let mut world = S2World {
        model,
        train: train.to_vec(),
        heldout: heldout.to_vec(),
        keep,
        stats,
        runs: Vec::new(),
    };
    for seed in 1..=5u64 {
        let mut attn = QaAttention::new(
            world.model.emb.dim,
            ScoreForm::FeatureWeights,
            &mut skipread::rng::root(100 + seed),
            0.1,
        );
        let cfg = QaTradeoffConfig { alpha: 2.0, lr: 0.002, ..QaTradeoffConfig::default() };
        train_qa_attention(
            &mut attn,
            &world.model,
            &world.train,
            &world.keep,
            &world.stats,
            &cfg,
            48,
            seed,
        )
        .unwrap();
        let preview = s2_eval(&world, &attn, Condition::Preview, 500 + seed);
        let no_preview = s2_eval(&world, &attn, Condition::NoPreview, 900 + seed);
        world.runs.push(PolicyRun { preview, no_preview });
    }
    world
}

// ─── 1: gradient fidelity ──────────────────────────────────────────────────

fn c1_gradient_fidelity() -> Check {
    let mut worst: (f64, &str) = (0.0, "");
    let mut track = |err: f64, what: &'static str| {
        if err > worst.0 {
            worst = (err, what);
        }
    };

    // reader + decoder through the reconstruction loss
    {
        let mut lm =
            ReaderLm::new(LmDims { vocab: 9, emb: 3, hidden: 4 }, &mut skipread::rng::root(5), 0.4);
        let w = TokenWindow { doc: 0, start: 0, ids: vec![4, 7, 5, 8, 6] };
        let omega = [1u8, 0, 1, 1, 0];
        let mut grads = zeroed_like(&lm);
        sequence_loss_backward(&lm, &w, &omega, &mut grads);
        track(
            finite_diff_check(&mut lm, &grads, 3e-5, |m| sequence_loss(m, &w, &omega).total),
            "reader lm",
        );
    }

    // question-answering head
    {
        let mut model = QaModel::new(
            QaDims { vocab: 9, emb: 3, cells: 3, entities: 4 },
            &mut skipread::rng::root(13),
            0.8,
        );
        let ex = QAExample {
            text: vec![4, 5, 6, 7, 8],
            text_tokens: vec!["t".into(); 5],
            question: vec![5, 6, 4],
            question_tokens: vec!["q".into(); 3],
            answer: 2,
            candidates: vec![2],
            is_entity: vec![false; 5],
            is_answer: vec![false; 5],
        };
        let cases: [(Vec<u8>, usize); 3] =
            [(vec![1, 0, 1, 1, 0], 2), (vec![1, 1, 1, 1, 1], 0), (vec![0, 1, 0, 1, 1], 3)];
        let mut analytic = zeroed_like(&model);
        for (omega, answer) in &cases {
            let enc = qa_encode(&model, &ex.text, omega, &ex.question).unwrap();
            let (_, dist) = answer_nll(&model, &enc, *answer);
            answer_nll_backward(&model, &enc, &dist, *answer, &mut analytic);
        }
        track(
            finite_diff_check(&mut model, &analytic, 1e-5, |m| {
                cases
                    .iter()
                    .map(|(omega, answer)| {
                        let e = qa_encode(m, &ex.text, omega, &ex.question).unwrap();
                        answer_nll(m, &e, *answer).0
                    })
                    .sum::<f64>()
            }),
            "qa head",
        );
    }

    // windowed attention net: mask log-probability and entropy paths
    {
        let lm =
            ReaderLm::new(LmDims { vocab: 10, emb: 5, hidden: 6 }, &mut skipread::rng::root(7), 0.4);
        let mut net =
            AttentionNet::new(lm.emb.dim, lm.reader.hidden_dim, 5, &mut skipread::rng::root(13), 0.4);
        let w = TokenWindow { doc: 0, start: 0, ids: vec![4, 8, 5, 9, 6, 7] };
        let omega = [1u8, 0, 0, 1, 1, 0];
        let mut dead = skipread::rng::root(0);

        let roll = rollout(&lm, &net, &w, Some(&omega), &mut dead);
        let mut analytic = zeroed_like(&net);
        roll.add_score_gradient(&net, &vec![1.0; w.ids.len()], &mut analytic);
        track(
            finite_diff_check(&mut net, &analytic, 1e-5, |n| {
                rollout(&lm, n, &w, Some(&omega), &mut skipread::rng::root(0)).log_prob()
            }),
            "attention score",
        );

        let roll = rollout(&lm, &net, &w, Some(&omega), &mut dead);
        let mut analytic = zeroed_like(&net);
        roll.add_entropy_gradient(&net, 1.0, &mut analytic);
        track(
            finite_diff_check(&mut net, &analytic, 1e-5, |n| {
                rollout(&lm, n, &w, Some(&omega), &mut skipread::rng::root(0))
                    .probs
                    .iter()
                    .map(|&p| bernoulli_entropy(p))
                    .sum::<f64>()
            }),
            "attention entropy",
        );
    }

    // question-answering attention net, both scoring forms, all three paths
    {
        let ex = QAExample {
            text: vec![4, 5, 6, 7],
            text_tokens: vec!["a".into(), "b".into(), "c".into(), "d".into()],
            question: vec![4, 5],
            question_tokens: vec!["a".into(), "b".into()],
            answer: 0,
            candidates: vec![0, 1],
            is_entity: vec![false, false, true, false],
            is_answer: vec![false, false, true, false],
        };
        let stats = FeatureStats::identity();
        let omega = [1u8, 0, 1, 1];
        for form in [ScoreForm::FeatureWeights, ScoreForm::EmbeddingWeights] {
            let model =
                QaModel::new(QaDims { vocab: 12, emb: 4, cells: 3, entities: 5 }, &mut skipread::rng::root(19), 0.3);
            let mut attn = QaAttention::new(4, form, &mut skipread::rng::root(23), 0.3);
            let mut dead = skipread::rng::root(0);
            let fresh = |a: &QaAttention, f: &dyn Fn(&skipread::qa::QaRollout) -> f64| {
                let roll = qa_rollout(a, &model.emb, &stats, &ex, Condition::Preview, Some(&omega), &mut skipread::rng::root(0));
                f(&roll)
            };

            let roll = qa_rollout(&attn, &model.emb, &stats, &ex, Condition::Preview, Some(&omega), &mut dead);
            let mut analytic = zeroed_like(&attn);
            roll.add_score_gradient(&attn, &model.emb, &[1.0; 4], &mut analytic);
            track(
                finite_diff_check(&mut attn, &analytic, 1e-5, |a| fresh(a, &|r| r.log_prob())),
                "qa attention score",
            );

            let roll = qa_rollout(&attn, &model.emb, &stats, &ex, Condition::Preview, Some(&omega), &mut dead);
            let mut analytic = zeroed_like(&attn);
            roll.add_rate_gradient(&attn, &model.emb, 1.0, &mut analytic);
            track(
                finite_diff_check(&mut attn, &analytic, 1e-5, |a| {
                    fresh(a, &|r| r.probs.iter().sum::<f64>())
                }),
                "qa attention rate",
            );

            let roll = qa_rollout(&attn, &model.emb, &stats, &ex, Condition::Preview, Some(&omega), &mut dead);
            let mut analytic = zeroed_like(&attn);
            roll.add_entropy_gradient(&attn, &model.emb, 1.0, &mut analytic);
            track(
                finite_diff_check(&mut attn, &analytic, 1e-5, |a| {
                    fresh(a, &|r| r.probs.iter().map(|&p| bernoulli_entropy(p)).sum::<f64>())
                }),
                "qa attention entropy",
            );
        }
    }

    if worst.0 < 1e-4 {
        Ok(format!("max relative error {:.2e} ({})", worst.0, worst.1))
    } else {
        fail(format!("{} relative error {:.2e} ≥ 1e-4", worst.1, worst.0))
    }
}

// ─── 2: reinforce unbiasedness ─────────────────────────────────────────────

/// Per-coordinate: |MC mean − exact| within 3 standard errors.
fn compare_mc<P: Parameterized>(exact: &P, sum: &P, sumsq: &P, n: f64) -> Result<f64, String> {
    let mut max_z = 0.0f64;
    for name in exact.param_names() {
        let e = &exact.param(name).data;
        let s = &sum.param(name).data;
        let q = &sumsq.param(name).data;
        for k in 0..e.len() {
            let mean = s[k] / n;
            let var = (q[k] / n - mean * mean).max(0.0);
            let se = (var / n).sqrt();
            let diff = (mean - e[k]).abs();
            if diff > 3.0 * se + 1e-9 {
                return Err(format!(
                    "{name}[{k}]: monte carlo {mean:.6} vs exact {:.6}, {:.1} standard errors",
                    e[k],
                    if se > 0.0 { diff / se } else { f64::INFINITY }
                ));
            }
            if se > 0.0 {
                max_z = max_z.max(diff / se);
            }
        }
    }
    Ok(max_z)
}

fn accumulate<P: Parameterized>(g: &P, sum: &mut P, sumsq: &mut P) {
    for name in g.param_names() {
        let gs = &g.param(name).data;
        let s = &mut sum.param_mut(name).data;
        let q = &mut sumsq.param_mut(name).data;
        for k in 0..gs.len() {
            s[k] += gs[k];
            q[k] += gs[k] * gs[k];
        }
    }
}

fn c2_reinforce_unbiasedness() -> Check {
    let samples = 200_000usize;
    let n = samples as f64;

    // windowed reconstruction objective, 16 fixation sequences enumerated
    let lm = ReaderLm::new(LmDims { vocab: 9, emb: 4, hidden: 5 }, &mut skipread::rng::root(23), 0.4);
    let net = AttentionNet::new(lm.emb.dim, lm.reader.hidden_dim, 4, &mut skipread::rng::root(29), 0.4);
    let w = TokenWindow { doc: 0, start: 0, ids: vec![4, 7, 5, 8] };
    let alpha = 2.0;
    let exact = enumerate_exact_gradient(&lm, &net, &w, alpha);
    let mut sum = zeroed_like(&net);
    let mut sumsq = zeroed_like(&net);
    let mut rng = skipread::rng::root(31);
    for _ in 0..samples {
        let (g, _, _) = policy_gradient_sample(&lm, &net, &w, alpha, None, &mut rng);
        accumulate(&g, &mut sum, &mut sumsq);
    }
    let z1 = compare_mc(&exact, &sum, &sumsq, n).map_err(|e| format!("reconstruction: {e}"))?;

    // question-answering objective, both conditions
    let model = QaModel::new(QaDims { vocab: 12, emb: 4, cells: 3, entities: 5 }, &mut skipread::rng::root(29), 0.3);
    let attn = QaAttention::new(4, ScoreForm::FeatureWeights, &mut skipread::rng::root(31), 0.3);
    let ex = QAExample {
        text: vec![4, 5, 6, 7],
        text_tokens: vec!["a".into(), "b".into(), "c".into(), "d".into()],
        question: vec![4, 5],
        question_tokens: vec!["a".into(), "b".into()],
        answer: 0,
        candidates: vec![0, 1],
        is_entity: vec![false, false, true, false],
        is_answer: vec![false, false, true, false],
    };
    let stats = FeatureStats::identity();
    let mut max_z = z1;
    for condition in Condition::BOTH {
        let exact = enumerate_qa_gradient(&attn, &model, &stats, &ex, condition, 1.5)
            .map_err(|e| e.to_string())?;
        let mut sum = zeroed_like(&attn);
        let mut sumsq = zeroed_like(&attn);
        let mut rng = skipread::rng::root(37);
        for _ in 0..samples {
            let mut g = zeroed_like(&attn);
            qa_gradient_sample(&attn, &model, &stats, &ex, condition, 1.5, &mut rng, &mut g)
                .map_err(|e| e.to_string())?;
            accumulate(&g, &mut sum, &mut sumsq);
        }
        let z = compare_mc(&exact, &sum, &sumsq, n)
            .map_err(|e| format!("{}: {e}", condition.as_str()))?;
        max_z = max_z.max(z);
    }
    Ok(format!("{samples} samples, max deviation {max_z:.2} standard errors"))
}

// ─── 3: economy monotonicity ───────────────────────────────────────────────

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for k in 0..xs.len() {
        cov += (rx[k] - mx) * (ry[k] - my);
        vx += (rx[k] - mx).powi(2);
        vy += (ry[k] - my).powi(2);
    }
    cov / (vx * vy).sqrt()
}

fn c3_economy_monotonicity(s1: &Result<S1World, String>, s2: &Result<S2World, String>) -> Check {
    let s1 = s1.as_ref().map_err(|e| format!("study-1 setup: {e}"))?;
    for pair in s1.alpha_rates.windows(2) {
        let ((a0, r0), (a1, r1)) = (pair[0], pair[1]);
        if r1 >= r0 {
            return fail(format!(
                "rate not strictly decreasing: alpha {a0} → {r0:.3} but alpha {a1} → {r1:.3}"
            ));
        }
    }
    let chain: Vec<String> = s1.alpha_rates.iter().map(|(_, r)| format!("{r:.3}")).collect();

    let s2 = s2.as_ref().map_err(|e| format!("study-2 setup: {e}"))?;
    let grid: Vec<f64> = (0..9).map(|k| k as f64 * 0.5).collect();
    let sweep_cfg = SweepConfig {
        grid: grid.clone(),
        runs: 1,
        epochs: 8,
        threads: 4,
        tradeoff: QaTradeoffConfig { lr: 0.002, ..QaTradeoffConfig::default() },
        init_bound: 0.1,
        score_form: ScoreForm::FeatureWeights,
    };
    let (points, failures) =
        alpha_sweep(&s2.model, &s2.train, &s2.keep, &s2.heldout, &s2.stats, &sweep_cfg, 314);
    if !failures.is_empty() {
        return fail(format!("{} sweep points failed", failures.len()));
    }
    let mut rates = Vec::new();
    for &a in &grid {
        let of_alpha: Vec<f64> =
            points.iter().filter(|p| p.alpha == a).map(|p| p.fixation_rate).collect();
        if of_alpha.is_empty() {
            return fail(format!("no sweep points at alpha {a}"));
        }
        rates.push(of_alpha.iter().sum::<f64>() / of_alpha.len() as f64);
    }
    let rho = spearman(&grid, &rates);
    if rho >= -0.8 {
        return fail(format!("spearman rho {rho:.3} not below -0.8; rates {rates:?}"));
    }
    Ok(format!("rates {} at alphas 0/2/5/10; 9-point spearman {rho:.2}", chain.join(" > ")))
}

// ─── 4: skill over random ──────────────────────────────────────────────────

/// One-sided sign-test tail: P(X ≥ wins) for X ~ Binomial(n, 1/2).
fn sign_test_p(wins: usize, n: usize) -> f64 {
    let mut coef = 1.0f64;
    let mut total = 0.0;
    // C(n, j) climbing from j = 0; accumulate the tail
    for j in 0..=n {
        if j >= wins {
            total += coef;
        }
        coef = coef * (n - j) as f64 / (j + 1) as f64;
    }
    total * 0.5f64.powi(n as i32)
}

fn c4_skill_over_random(s1: &Result<S1World, String>, s2: &Result<S2World, String>) -> Check {
    let s1 = s1.as_ref().map_err(|e| format!("study-1 setup: {e}"))?;
    let windows = &s1.heldout[..50];
    let rate = s1_rate(&s1.lm, &s1.net, windows, 9);
    let reps = 32;
    let mut wins = 0usize;
    for (k, w) in windows.iter().enumerate() {
        let mut policy_loss = 0.0;
        let mut random_loss = 0.0;
        for r in 0..reps {
            let mut rng = skipread::rng::stream(11, "accept/s1-skill", (k * 64 + r) as u64);
            let roll = rollout(&s1.lm, &s1.net, w, None, &mut rng);
            policy_loss += sequence_loss(&s1.lm, w, &roll.omega).total;
            let mut rng = skipread::rng::stream(13, "accept/s1-chance", (k * 64 + r) as u64);
            let omega: Vec<u8> = w.ids.iter().map(|_| u8::from(rng.gen::<f64>() < rate)).collect();
            random_loss += sequence_loss(&s1.lm, w, &omega).total;
        }
        if policy_loss < random_loss {
            wins += 1;
        }
    }
    let p = sign_test_p(wins, windows.len());
    if p >= 0.01 {
        return fail(format!(
            "reconstruction: policy won {wins}/{} windows, sign test p {p:.4} ≥ 0.01",
            windows.len()
        ));
    }

    let s2 = s2.as_ref().map_err(|e| format!("study-2 setup: {e}"))?;
    let run = &s2.runs[0];
    let mut margins = Vec::new();
    for (cond, eval) in [("preview", &run.preview), ("no preview", &run.no_preview)] {
        let random = random_skip_accuracy(&s2.model, &s2.heldout, eval.rate, 123)
            .map_err(|e| e.to_string())?;
        let margin = eval.acc - random;
        if margin <= 0.05 {
            return fail(format!(
                "{cond}: policy {:.3} vs random {random:.3} at rate {:.3}, margin {margin:.3} ≤ 0.05",
                eval.acc, eval.rate
            ));
        }
        margins.push(format!("{cond} +{:.0}pt", margin * 100.0));
    }
    Ok(format!(
        "reconstruction {wins}/50 wins (p {p:.1e}); answers beat rate-matched chance: {}",
        margins.join(", ")
    ))
}

// ─── 5: preview effect ─────────────────────────────────────────────────────

fn c5_preview_effect(s2: &Result<S2World, String>) -> Check {
    let s2 = s2.as_ref().map_err(|e| format!("study-2 setup: {e}"))?;
    let runs = &s2.runs;
    let n = runs.len() as f64;
    let acc_p = runs.iter().map(|r| r.preview.acc).sum::<f64>() / n;
    let acc_n = runs.iter().map(|r| r.no_preview.acc).sum::<f64>() / n;
    let rate_p = runs.iter().map(|r| r.preview.rate).sum::<f64>() / n;
    let rate_n = runs.iter().map(|r| r.no_preview.rate).sum::<f64>() / n;
    let strict = runs
        .iter()
        .filter(|r| r.preview.acc > r.no_preview.acc && r.preview.rate < r.no_preview.rate)
        .count();
    if acc_p < acc_n {
        return fail(format!("mean accuracy: preview {acc_p:.3} < no preview {acc_n:.3}"));
    }
    if rate_p > rate_n {
        return fail(format!("mean fixation rate: preview {rate_p:.3} > no preview {rate_n:.3}"));
    }
    if strict < 4 {
        return fail(format!("both inequalities strict in only {strict}/5 runs"));
    }
    Ok(format!(
        "preview ({rate_p:.2} rate, {acc_p:.2} acc) vs no preview ({rate_n:.2}, {acc_n:.2}); strict {strict}/5"
    ))
}

// ─── 6: restricted-surprisal identity ──────────────────────────────────────

fn c6_identity(s1: &Result<S1World, String>) -> Check {
    let s1 = s1.as_ref().map_err(|e| format!("study-1 setup: {e}"))?;
    let vocab = s1.lm.emb.vocab_len();
    let mut rng = skipread::rng::root(303);
    let mut max_diff = 0.0f64;
    for _ in 0..1000 {
        let len = rng.gen_range(2..40);
        let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
        let w = TokenWindow { doc: 0, start: 0, ids };
        let omega = vec![1u8; len];
        let trace = read_window(&s1.lm, &w, &omega);
        let restricted = restricted_surprisal(&trace, &w);
        let full = full_surprisal(&s1.lm, &w);
        for (r, f) in restricted.iter().zip(&full) {
            let d = (r - f).abs();
            if d > 1e-12 {
                return fail(format!("restricted {r} vs full {f}, diff {d:.2e} > 1e-12"));
            }
            max_diff = max_diff.max(d);
        }
    }
    Ok(format!("1000 windows, max difference {max_diff:.1e}"))
}

// ─── 7: masking soundness ──────────────────────────────────────────────────

fn c7_masking(s1: &Result<S1World, String>) -> Check {
    let s1 = s1.as_ref().map_err(|e| format!("study-1 setup: {e}"))?;
    let vocab = s1.lm.emb.vocab_len();
    let mut rng = skipread::rng::root(707);

    // reading path: hidden trace and every predictive distribution
    for case in 0..500 {
        let len = rng.gen_range(4..16);
        let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
        let mut omega: Vec<u8> = (0..len).map(|_| u8::from(rng.gen::<f64>() < 0.6)).collect();
        let pos = rng.gen_range(0..len);
        omega[pos] = 0;
        let mut mutated = ids.clone();
        mutated[pos] = (ids[pos] + 1 + rng.gen_range(0..vocab - 1)) % vocab;
        let w1 = TokenWindow { doc: 0, start: 0, ids };
        let w2 = TokenWindow { doc: 0, start: 0, ids: mutated };

        let t1 = read_window(&s1.lm, &w1, &omega);
        let t2 = read_window(&s1.lm, &w2, &omega);
        for i in 0..=len {
            for (a, b) in t1.h(i).iter().zip(t2.h(i)) {
                if a.to_bits() != b.to_bits() {
                    return fail(format!("case {case}: hidden state moved at step {i}"));
                }
            }
        }
        for (a, b) in t1.probs.iter().flatten().zip(t2.probs.iter().flatten()) {
            if a.to_bits() != b.to_bits() {
                return fail(format!("case {case}: a predictive distribution moved"));
            }
        }
    }

    // answering path: the answer distribution
    let model = QaModel::new(QaDims { vocab: 30, emb: 5, cells: 4, entities: 6 }, &mut skipread::rng::root(71), 0.3);
    for case in 0..500 {
        let len = rng.gen_range(4..12);
        let text: Vec<usize> = (0..len).map(|_| rng.gen_range(0..30)).collect();
        let question: Vec<usize> = (0..3).map(|_| rng.gen_range(0..30)).collect();
        let mut omega: Vec<u8> = (0..len).map(|_| u8::from(rng.gen::<f64>() < 0.6)).collect();
        let pos = rng.gen_range(0..len);
        omega[pos] = 0;
        let mut mutated = text.clone();
        mutated[pos] = (text[pos] + 1 + rng.gen_range(0..29)) % 30;

        let e1 = qa_encode(&model, &text, &omega, &question).map_err(|e| e.to_string())?;
        let e2 = qa_encode(&model, &mutated, &omega, &question).map_err(|e| e.to_string())?;
        let d1 = answer_distribution(&model, &e1);
        let d2 = answer_distribution(&model, &e2);
        for (a, b) in d1.probs.iter().zip(&d2.probs) {
            if a.to_bits() != b.to_bits() {
                return fail(format!("case {case}: answer distribution moved"));
            }
        }
    }
    Ok("1000 randomized substitutions, bit-exact on both paths".into())
}

// ─── 8: metric oracles ─────────────────────────────────────────────────────

fn c8_metric_oracles() -> Check {
    // perplexity: exp of the mean Bernoulli negative log-likelihood
    let probs = [0.9, 0.8, 0.6];
    let bits = [1u8, 1, 0];
    let by_hand = (-(0.9f64.ln() + 0.8f64.ln() + 0.4f64.ln()) / 3.0).exp();
    let got = fixation_perplexity(&probs, &bits).map_err(|e| e.to_string())?;
    if (got - by_hand).abs() > 1e-9 {
        return fail(format!("perplexity {got} vs hand {by_hand}"));
    }

    // class F-scores and accuracy on a worked confusion table:
    // tp 2, fp 1, fn 1 → F_fix = 2/3; skip side tp 1, fp 1, fn 1 → F_skip = 1/2
    let pred = [1u8, 1, 0, 0, 1];
    let gold = [1u8, 0, 0, 1, 1];
    let m = fixation_metrics(&pred, &gold).map_err(|e| e.to_string())?;
    for (name, got, hand) in [
        ("accuracy", m.accuracy, 60.0),
        ("f_fix", m.f_fix, 100.0 * 2.0 / 3.0),
        ("f_skip", m.f_skip, 50.0),
        ("rate", m.fixation_rate, 0.6),
    ] {
        if (got - hand).abs() > 1e-9 {
            return fail(format!("{name} {got} vs hand {hand}"));
        }
    }

    // rescale-and-threshold against an independent bisection
    let raw = [0.62, 0.15, 0.48, 0.7, 0.33, 0.9, 0.05, 0.51];
    let target = 0.3;
    let out = rescale_threshold(&raw, target).map_err(|e| e.to_string())?;
    let mean: f64 = out.probs.iter().sum::<f64>() / raw.len() as f64;
    if (mean - target).abs() > 1e-9 {
        return fail(format!("rescaled mean {mean} vs target {target}"));
    }
    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let mean: f64 = raw.iter().map(|&p| sigmoid(logit(p) + mid)).sum::<f64>() / raw.len() as f64;
        if mean < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shift = 0.5 * (lo + hi);
    if (out.shift - shift).abs() > 1e-6 {
        return fail(format!("shift {} vs independent bisection {shift}", out.shift));
    }
    for (k, &p) in raw.iter().enumerate() {
        let expect = u8::from(sigmoid(logit(p) + shift) > 0.5);
        if out.preds[k] != expect {
            return fail(format!("prediction at {k}: {} vs hand {expect}", out.preds[k]));
        }
    }

    // conditional ratio against a direct bigram count
    let segments = vec![vec![1u8, 1, 0, 1], vec![0u8, 1, 1]];
    let got = conditional_ratio(&segments).map_err(|e| e.to_string())?;
    let (mut pairs, mut seconds_fix, mut first_fix, mut both_fix) = (0.0, 0.0, 0.0, 0.0);
    for s in &segments {
        for pair in s.windows(2) {
            pairs += 1.0;
            seconds_fix += f64::from(pair[1]);
            if pair[0] == 1 {
                first_fix += 1.0;
                both_fix += f64::from(pair[1]);
            }
        }
    }
    let hand = (both_fix / first_fix) / (seconds_fix / pairs);
    if (got - hand).abs() > 1e-9 {
        return fail(format!("conditional ratio {got} vs hand {hand}"));
    }

    // independence: i.i.d. sequences have no skip clustering
    let mut rng = skipread::rng::root(909);
    let iid: Vec<Vec<u8>> = (0..100)
        .map(|_| (0..1001).map(|_| u8::from(rng.gen::<f64>() < 0.35)).collect())
        .collect();
    let bigrams: usize = iid.iter().map(|s| s.len() - 1).sum();
    let ratio = conditional_ratio(&iid).map_err(|e| e.to_string())?;
    if (ratio - 1.0).abs() > 0.02 {
        return fail(format!("i.i.d. ratio {ratio} outside 1.0 ± 0.02"));
    }
    Ok(format!("fixtures exact; i.i.d. ratio {ratio:.4} over {bigrams} bigrams"))
}

// ─── 9: eye-movement toolkit ───────────────────────────────────────────────

fn etk_layout() -> (Vec<Region>, LineGeometry) {
    let regions = text_regions(&["the old king", "won the war."], 100.0, 10.0);
    let lines = LineGeometry { centers: vec![100.0, 140.0], height: 20.0 };
    (regions, lines)
}

fn etk_path(
    steps: &[(Option<usize>, f64)],
    regions: &[Region],
    lines: &LineGeometry,
) -> Vec<RawFixation> {
    steps
        .iter()
        .enumerate()
        .map(|(order, &(place, duration))| match place {
            Some(r) => RawFixation {
                trial: 0,
                x: 0.5 * (regions[r].x_start + regions[r].x_end),
                y: lines.centers[regions[r].line],
                duration,
                order,
            },
            None => RawFixation { trial: 0, x: 400.0, y: 120.0, duration, order },
        })
        .collect()
}

struct Scanpath {
    name: &'static str,
    steps: &'static [(Option<usize>, f64)],
    /// (region, first_fixation, first_pass, total_time, fixated_first_pass)
    expect: &'static [(usize, Option<f64>, Option<f64>, Option<f64>, bool)],
    off_text: usize,
}

const SCANPATHS: &[Scanpath] = &[
    Scanpath {
        name: "return to the first word",
        steps: &[(Some(0), 200.0), (Some(1), 150.0), (Some(0), 100.0)],
        expect: &[
            (0, Some(200.0), Some(200.0), Some(300.0), true),
            (1, Some(150.0), Some(150.0), Some(150.0), true),
        ],
        off_text: 0,
    },
    Scanpath {
        name: "a word first reached after material beyond it",
        steps: &[(Some(0), 100.0), (Some(2), 120.0), (Some(1), 90.0)],
        expect: &[
            (0, Some(100.0), Some(100.0), Some(100.0), true),
            (1, None, None, Some(90.0), false),
            (2, Some(120.0), Some(120.0), Some(120.0), true),
        ],
        off_text: 0,
    },
    Scanpath {
        name: "refixations extend the first pass",
        steps: &[
            (Some(1), 80.0),
            (Some(1), 70.0),
            (Some(1), 60.0),
            (Some(2), 100.0),
            (Some(1), 50.0),
        ],
        expect: &[
            (1, Some(80.0), Some(210.0), Some(260.0), true),
            (2, Some(100.0), Some(100.0), Some(100.0), true),
        ],
        off_text: 0,
    },
    Scanpath {
        name: "a whole line skipped on the way down",
        steps: &[(Some(3), 180.0), (Some(0), 90.0)],
        expect: &[
            (0, None, None, Some(90.0), false),
            (3, Some(180.0), Some(180.0), Some(180.0), true),
        ],
        off_text: 0,
    },
    Scanpath {
        name: "a regression revisits an earlier word",
        steps: &[(Some(2), 140.0), (Some(1), 110.0), (Some(2), 130.0)],
        expect: &[
            (1, None, None, Some(110.0), false),
            (2, Some(140.0), Some(140.0), Some(270.0), true),
        ],
        off_text: 0,
    },
    Scanpath {
        name: "the same pattern on the second line",
        steps: &[(Some(4), 200.0), (Some(5), 150.0), (Some(4), 100.0)],
        expect: &[
            (4, Some(200.0), Some(200.0), Some(300.0), true),
            (5, Some(150.0), Some(150.0), Some(150.0), true),
        ],
        off_text: 0,
    },
    Scanpath {
        name: "a clean sequential read",
        steps: &[
            (Some(0), 250.0),
            (Some(1), 200.0),
            (Some(2), 180.0),
            (Some(3), 220.0),
            (Some(4), 160.0),
            (Some(5), 240.0),
        ],
        expect: &[
            (0, Some(250.0), Some(250.0), Some(250.0), true),
            (1, Some(200.0), Some(200.0), Some(200.0), true),
            (2, Some(180.0), Some(180.0), Some(180.0), true),
            (3, Some(220.0), Some(220.0), Some(220.0), true),
            (4, Some(160.0), Some(160.0), Some(160.0), true),
            (5, Some(240.0), Some(240.0), Some(240.0), true),
        ],
        off_text: 0,
    },
    Scanpath {
        name: "a double fixation then a late return",
        steps: &[(Some(0), 120.0), (Some(0), 80.0), (Some(1), 140.0), (Some(0), 60.0)],
        expect: &[
            (0, Some(120.0), Some(200.0), Some(260.0), true),
            (1, Some(140.0), Some(140.0), Some(140.0), true),
        ],
        off_text: 0,
    },
    Scanpath {
        name: "an off-text fixation blocks nothing",
        steps: &[(Some(0), 100.0), (None, 50.0), (Some(1), 130.0)],
        expect: &[
            (0, Some(100.0), Some(100.0), Some(100.0), true),
            (1, Some(130.0), Some(130.0), Some(130.0), true),
        ],
        off_text: 1,
    },
    Scanpath {
        name: "a late word seen early blocks an earlier word",
        steps: &[(Some(1), 100.0), (Some(5), 80.0), (Some(2), 70.0)],
        expect: &[
            (1, Some(100.0), Some(100.0), Some(100.0), true),
            (2, None, None, Some(70.0), false),
            (5, Some(80.0), Some(80.0), Some(80.0), true),
        ],
        off_text: 0,
    },
];

fn c9_etk() -> Check {
    // ten hand-traced scanpaths, exact
    let (regions, lines) = etk_layout();
    for f in SCANPATHS {
        let scan = etk_path(f.steps, &regions, &lines);
        let out = compute_measures(&scan, &regions, &lines).map_err(|e| e.to_string())?;
        if out.off_text != f.off_text {
            return fail(format!("{}: off-text {} vs {}", f.name, out.off_text, f.off_text));
        }
        let mut expected = vec![RegionMeasures::default(); regions.len()];
        for &(r, ff, fp, tt, flag) in f.expect {
            expected[r] = RegionMeasures {
                first_fixation: ff,
                first_pass: fp,
                total_time: tt,
                fixated_first_pass: flag,
            };
        }
        if out.measures != expected {
            return fail(format!("{}: measures diverge from the hand trace", f.name));
        }
    }

    // pooling conserves kept duration exactly
    let mut rng = skipread::rng::root(31);
    for _ in 0..50 {
        let n = rng.gen_range(1..30);
        let input: Vec<RawFixation> = (0..n)
            .map(|order| RawFixation {
                trial: 0,
                x: rng.gen_range(100.0..700.0),
                y: 100.0,
                duration: rng.gen_range(40..400) as f64,
                order,
            })
            .collect();
        let total_in: f64 = input.iter().map(|f| f.duration).sum();
        let pooled = pool_fixations(&input, 12.0);
        let total_out: f64 = pooled.iter().map(|f| f.duration).sum();
        if total_in != total_out {
            return fail(format!("pooling lost duration: {total_in} vs {total_out}"));
        }
    }

    // constant vertical drift corrected back to the right lines
    let grid = CalibrationGrid { xs: [100.0, 400.0, 700.0], ys: [80.0, 140.0, 200.0] };
    let lines3 = LineGeometry { centers: vec![100.0, 140.0, 180.0], height: 20.0 };
    let coeffs = DriftCoefficients {
        calibration: 0.01,
        off_line: 1.0,
        line_change: 0.2,
        within_line: 0.05,
        outside: 0.5,
    };
    let mut rng = skipread::rng::root(43);
    let mut fixations = Vec::new();
    let mut true_lines = Vec::new();
    let mut order = 0;
    for (li, &center) in lines3.centers.iter().enumerate() {
        let mut x = 110.0;
        while x < 690.0 {
            fixations.push(RawFixation {
                trial: 0,
                x,
                y: center + rng.gen_range(-3.0..3.0) + 15.0,
                duration: rng.gen_range(120..280) as f64,
                order,
            });
            true_lines.push(li);
            order += 1;
            x += rng.gen_range(25.0..60.0);
        }
    }
    let out = drift_correct(&fixations, &grid, &lines3, &coeffs).map_err(|e| e.to_string())?;
    let correct = out
        .fixations
        .iter()
        .zip(&true_lines)
        .filter(|(f, &t)| lines3.assign(f.y) == Some(t))
        .count();
    let accuracy = correct as f64 / true_lines.len() as f64;
    if accuracy < 0.95 {
        return fail(format!("line assignment after drift correction: {accuracy:.3} < 0.95"));
    }
    Ok(format!(
        "10 scanpaths exact; pooling conserves; drift recovery {:.0}% of {} fixations",
        accuracy * 100.0,
        true_lines.len()
    ))
}

// ─── 10: pipeline determinism ──────────────────────────────────────────────

fn write_determinism_inputs(dir: &std::path::Path) {
    let mut doc0 = String::new();
    let mut doc1 = String::new();
    for i in 0..120 {
        doc0.push_str(&format!("w{} ", i % 11));
        doc1.push_str(&format!("w{} ", (i * 7 + 3) % 13));
    }
    std::fs::write(dir.join("corpus.txt"), format!("{doc0}\n\n{doc1}\n")).unwrap();

    let mut rng = skipread::rng::root(99);
    let triples = cloze_corpus(&ClozeConfig { examples: 80, ..ClozeConfig::default() }, &mut rng);
    skipread::synth::write_cloze_jsonl(&dir.join("cloze.jsonl"), &triples).unwrap();

    let mut gold = String::from(
        "reader,doc,token_index,fixated,first_fixation,first_pass,total_time,track_loss\n",
    );
    for d in 0..2usize {
        for i in 0..120usize {
            let fixated = (i * 7 + d) % 3 != 0;
            let loss = (i * 13 + d) % 41 == 0;
            if fixated {
                let ff = 120 + (i * 11 + d * 5) % 130;
                gold.push_str(&format!(
                    "r1,{d},{i},1,{ff},{},{},{}\n",
                    ff + i % 60,
                    ff + i % 60 + i % 90,
                    u8::from(loss)
                ));
            } else {
                gold.push_str(&format!("r1,{d},{i},0,,,,{}\n", u8::from(loss)));
            }
        }
    }
    std::fs::write(dir.join("gold.csv"), gold).unwrap();

    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let cfg = format!(
        r#"
[paths]
corpus = ["corpus.txt"]
cloze = "cloze.jsonl"
gold = "gold.csv"

[model]
vocab = 30
emb = 6
hidden = 10
window = 10
attn_hidden = 6
baseline_cells = 6
qa_cells = 8
qa_clip_len = 40

[phase1]
epochs = 2

[preprocess]
qa_eval_every = 5

[tradeoff]
epochs = 1
batch = 4

[qa_head]
epochs = 3

[qa_tradeoff]
epochs = 1

[sweep]
grid = [0.0, 1.0]
runs = 1
epochs = 1
threads = 2

[etk]
fixations = {fx:?}
text = {tx:?}
x0 = 100.0
char_width = 10.0
line_centers = [100.0, 140.0, 180.0]
line_height = 20.0
grid_xs = [100.0, 250.0, 400.0]
grid_ys = [80.0, 140.0, 200.0]

[run]
seed = 77
"#,
        fx = fixtures.join("etk_fixations.csv"),
        tx = fixtures.join("etk_text.txt"),
    );
    std::fs::write(dir.join("cfg.toml"), cfg).unwrap();
}

fn run_all_stages(dir: &std::path::Path) -> Result<(), String> {
    for sub in [
        "preprocess",
        "train-lm",
        "train-attn",
        "train-qa",
        "sweep-alpha",
        "simulate",
        "evaluate",
        "etk",
        "export",
    ] {
        let out = std::process::Command::new(env!("CARGO_BIN_EXE_skipread"))
            .current_dir(dir)
            .args(["--config", "cfg.toml", sub])
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{sub} failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn dir_contents(dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.insert(name, std::fs::read(&path).unwrap());
        }
    }
    out
}

fn c10_determinism() -> Check {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_determinism_inputs(a.path());
    write_determinism_inputs(b.path());
    run_all_stages(a.path())?;
    run_all_stages(b.path())?;

    let files_a = dir_contents(&a.path().join("out"));
    let files_b = dir_contents(&b.path().join("out"));
    let names_a: Vec<&String> = files_a.keys().collect();
    let names_b: Vec<&String> = files_b.keys().collect();
    if names_a != names_b {
        return fail(format!("different artifact sets: {names_a:?} vs {names_b:?}"));
    }
    for (name, bytes) in &files_a {
        if files_b[name] != *bytes {
            return fail(format!("`{name}` differs between identical runs"));
        }
    }
    Ok(format!("9 stages, {} artifacts byte-identical across runs", files_a.len()))
}

// ─── the gate ──────────────────────────────────────────────────────────────

#[test]
fn acceptance_criteria() {
    let whole = Instant::now();
    let s1 = catch_unwind(build_s1).map_err(|p| panic_text(&p));
    let s2 = catch_unwind(build_s2).map_err(|p| panic_text(&p));

    struct Row {
        number: usize,
        name: &'static str,
        seconds: f64,
        outcome: Check,
    }
    let mut rows: Vec<Row> = Vec::new();
    let mut run = |number: usize,
                   name: &'static str,
                   budget: Option<f64>,
                   f: &mut dyn FnMut() -> Check| {
        let t = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(p) => Err(format!("panicked: {}", panic_text(&p))),
        };
        let seconds = t.elapsed().as_secs_f64();
        let outcome = match (outcome, budget) {
            (Ok(d), Some(limit)) if seconds > limit => {
                Err(format!("passed but took {seconds:.0}s, budget {limit:.0}s ({d})"))
            }
            (o, _) => o,
        };
        rows.push(Row { number, name, seconds, outcome });
    };

    run(1, "gradient fidelity", Some(60.0), &mut c1_gradient_fidelity);
    run(2, "reinforce unbiasedness", Some(300.0), &mut c2_reinforce_unbiasedness);
    run(3, "economy monotonicity", Some(1200.0), &mut || c3_economy_monotonicity(&s1, &s2));
    run(4, "skill over random", None, &mut || c4_skill_over_random(&s1, &s2));
    run(5, "preview effect", None, &mut || c5_preview_effect(&s2));
    run(6, "restricted-surprisal identity", None, &mut || c6_identity(&s1));
    run(7, "masking soundness", None, &mut || c7_masking(&s1));
    run(8, "metric oracles", None, &mut c8_metric_oracles);
    run(9, "eye-movement toolkit", None, &mut c9_etk);
    run(10, "pipeline determinism", None, &mut c10_determinism);

    let mut failures = 0;
    println!();
    for r in &rows {
        let (verdict, detail) = match &r.outcome {
            Ok(d) => ("PASS", d.clone()),
            Err(d) => {
                failures += 1;
                ("FAIL", d.clone())
            }
        };
        println!(
            "criterion {:>2}  {:<32} {}  [{:>5.1}s]  {}",
            r.number, r.name, verdict, r.seconds, detail
        );
    }
    println!("total {:.0}s", whole.elapsed().as_secs_f64());
    assert_eq!(failures, 0, "{failures} of 10 criteria failed — see the table above");
}

fn panic_text(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic".into()
    }
}
