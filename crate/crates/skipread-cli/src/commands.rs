//! One function per subcommand. Each stage reads the artifacts of earlier
//! stages from the output directory, writes its own, and registers every
//! file it produced with the run context.

use serde::{Deserialize, Serialize};
use skipread::corpus::{
    encode_qa, load_plain_corpus, load_triples, window_split, EmbeddingStore, EntityVocab,
    QAExample, RawTriple, TokenWindow, Vocabulary,
};
use skipread::eval::{
    apply_exclusions, conditional_ratio, discrimination_report, emit_heatmap, exclusion_flags,
    export_analysis_table, fit_threshold_baseline, fixation_metrics, rescale_threshold,
    AnalysisDoc, GoldFixations, HeatmapStyle, MetricReport,
};
use skipread::etk::{
    by_trial, compute_measures, drift_correct, load_fixations, pool_fixations, save_fixations,
    save_measures, save_regions, text_regions, validate_regions, CalibrationGrid,
    DriftCoefficients, LineGeometry,
};
use skipread::lm::{read_window, restricted_surprisal, ReaderLm};
use skipread::policy::{rollout, simulate_fixation_probs, write_sim_jsonl, AttentionNet, Baseline};
use skipread::qa::{
    alpha_sweep, collect_feature_stats, evaluate_policy, filter_answerable,
    full_attention_accuracy, select_alpha, train_qa_attention, train_qa_head, Condition,
    FeatureStats, QaAttention, QaDims, QaModel, SweepConfig,
};
use skipread::{checkpoint, rng, Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

use crate::config::RunConfig;
use crate::manifest::RunContext;

fn stage_missing(path: &Path, produced_by: &str) -> Error {
    Error::Config {
        field: "pipeline".into(),
        reason: format!("`{}` not found — run `{produced_by}` first", path.display()),
    }
}

fn checkpoint_meta(ctx: &RunContext, stage: &str) -> BTreeMap<String, String> {
    let mut meta = BTreeMap::new();
    meta.insert("config_sha256".into(), ctx.cfg.sha256().unwrap_or_default());
    meta.insert("seed".into(), ctx.cfg.run.seed.to_string());
    meta.insert("stage".into(), stage.into());
    meta
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

// ─── Shared loaders ────────────────────────────────────────────────────────

fn load_docs(cfg: &RunConfig) -> Result<Vec<Vec<String>>> {
    if cfg.paths.corpus.is_empty() {
        return Err(Error::Config {
            field: "paths.corpus".into(),
            reason: "no corpus files configured".into(),
        });
    }
    load_plain_corpus(&cfg.paths.corpus)
}

fn load_lm_vocab(ctx: &RunContext) -> Result<Vocabulary> {
    let path = ctx.path("lm_vocab.json");
    if !path.exists() {
        return Err(stage_missing(&path, "preprocess"));
    }
    Vocabulary::load_json(&path)
}

fn doc_windows(vocab: &Vocabulary, docs: &[Vec<String>], window: usize) -> Vec<TokenWindow> {
    let mut out = Vec::new();
    for (d, doc) in docs.iter().enumerate() {
        out.extend(window_split(d, &vocab.encode(doc), window));
    }
    out
}

fn load_lm(ctx: &RunContext, vocab_len: usize) -> Result<ReaderLm> {
    let path = ctx.path("lm.ckpt.json");
    if !path.exists() {
        return Err(stage_missing(&path, "train-lm"));
    }
    let m = &ctx.cfg.model;
    let mut lm = ReaderLm::new(
        skipread::lm::LmDims { vocab: vocab_len, emb: m.emb, hidden: m.hidden },
        &mut rng::root(0),
        0.0,
    );
    checkpoint::load_into(&path, &mut lm)?;
    lm.emb.trainable = false;
    Ok(lm)
}

fn load_attn(ctx: &RunContext) -> Result<AttentionNet> {
    let path = ctx.path("attn.ckpt.json");
    if !path.exists() {
        return Err(stage_missing(&path, "train-attn"));
    }
    let m = &ctx.cfg.model;
    let mut net = AttentionNet::zeros(m.emb, m.hidden, m.attn_hidden);
    checkpoint::load_into(&path, &mut net)?;
    Ok(net)
}

/// Train triples anchor the entity vocabulary and feature statistics; every
/// stage rebuilds both from the same file so they always agree.
fn load_qa_train(ctx: &RunContext) -> Result<(Vocabulary, Vec<RawTriple>, EntityVocab)> {
    let vpath = ctx.path("qa_vocab.json");
    let tpath = ctx.path("qa_train.jsonl");
    for p in [&vpath, &tpath] {
        if !p.exists() {
            return Err(stage_missing(p, "preprocess"));
        }
    }
    let vocab = Vocabulary::load_json(&vpath)?;
    let triples = load_triples(&tpath)?;
    let entities = EntityVocab::build(&triples);
    Ok((vocab, triples, entities))
}

fn encode_all(
    triples: &[RawTriple],
    vocab: &Vocabulary,
    entities: &EntityVocab,
    clip_len: usize,
) -> Result<Vec<QAExample>> {
    triples
        .iter()
        .enumerate()
        .map(|(i, t)| encode_qa(t, i, vocab, entities, clip_len))
        .collect()
}

fn load_qa_model(ctx: &RunContext, vocab_len: usize, entities: usize) -> Result<QaModel> {
    let path = ctx.path("qa.ckpt.json");
    if !path.exists() {
        return Err(stage_missing(&path, "train-qa"));
    }
    let m = &ctx.cfg.model;
    let mut model = QaModel::new(
        QaDims { vocab: vocab_len, emb: m.emb, cells: m.qa_cells, entities },
        &mut rng::root(0),
        0.0,
    );
    checkpoint::load_into(&path, &mut model)?;
    model.emb.trainable = false;
    Ok(model)
}

// ─── preprocess ────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct PreprocessReport {
    lm_documents: usize,
    lm_tokens: usize,
    lm_windows: usize,
    qa_train: usize,
    qa_eval: usize,
    entities: usize,
}

pub fn preprocess(ctx: &mut RunContext) -> Result<()> {
    let cfg = ctx.cfg.clone();
    if cfg.paths.corpus.is_empty() && cfg.paths.cloze.is_empty() {
        return Err(Error::Config {
            field: "paths".into(),
            reason: "neither corpus nor cloze files configured".into(),
        });
    }
    let mut report = PreprocessReport {
        lm_documents: 0,
        lm_tokens: 0,
        lm_windows: 0,
        qa_train: 0,
        qa_eval: 0,
        entities: 0,
    };

    if !cfg.paths.corpus.is_empty() {
        let docs = load_docs(&cfg)?;
        let vocab =
            Vocabulary::build(docs.iter().flatten().map(String::as_str), cfg.model.vocab, false)?;
        let path = ctx.path("lm_vocab.json");
        vocab.save_json(&path)?;
        ctx.record(&path);
        report.lm_documents = docs.len();
        report.lm_tokens = docs.iter().map(Vec::len).sum();
        report.lm_windows = doc_windows(&vocab, &docs, cfg.model.window).len();
    }

    if !cfg.paths.cloze.is_empty() {
        let mut triples = load_triples(Path::new(&cfg.paths.cloze))?;
        if triples.is_empty() {
            return Err(Error::EmptyCorpus("no cloze triples".into()));
        }
        let mut order: Vec<usize> = (0..triples.len()).collect();
        let mut srng = rng::stream(cfg.run.seed, "preprocess/shuffle", 0);
        for i in (1..order.len()).rev() {
            let j = rand::Rng::gen_range(&mut srng, 0..=i);
            order.swap(i, j);
        }
        let shuffled: Vec<RawTriple> = order.into_iter().map(|i| triples[i].clone()).collect();
        triples = shuffled;

        let every = cfg.preprocess.qa_eval_every;
        let mut train = Vec::new();
        let mut eval = Vec::new();
        for (i, t) in triples.into_iter().enumerate() {
            if every > 0 && (i + 1) % every == 0 {
                eval.push(t);
            } else {
                train.push(t);
            }
        }
        let entities = EntityVocab::build(&train);
        let vocab = Vocabulary::build(
            train
                .iter()
                .flat_map(|t| t.text.iter().chain(t.question.iter()))
                .map(String::as_str),
            cfg.model.vocab,
            false,
        )?;

        let tpath = ctx.path("qa_train.jsonl");
        skipread::synth::write_cloze_jsonl(&tpath, &train)?;
        ctx.record(&tpath);
        let epath = ctx.path("qa_eval.jsonl");
        skipread::synth::write_cloze_jsonl(&epath, &eval)?;
        ctx.record(&epath);
        let vpath = ctx.path("qa_vocab.json");
        vocab.save_json(&vpath)?;
        ctx.record(&vpath);
        let names: Vec<&str> = (0..entities.len()).map(|i| entities.name_of(i)).collect();
        let npath = ctx.path("entities.json");
        write_json(&npath, &names)?;
        ctx.record(&npath);

        report.qa_train = train.len();
        report.qa_eval = eval.len();
        report.entities = entities.len();
    }

    let rpath = ctx.path("preprocess_report.json");
    write_json(&rpath, &report)?;
    ctx.record(&rpath);
    Ok(())
}

// ─── train-lm ──────────────────────────────────────────────────────────────

pub fn train_lm(ctx: &mut RunContext) -> Result<()> {
    let cfg = ctx.cfg.clone();
    let vocab = load_lm_vocab(ctx)?;
    let docs = load_docs(&cfg)?;
    let windows = doc_windows(&vocab, &docs, cfg.model.window);
    let m = &cfg.model;
    let mut lm = ReaderLm::new(
        skipread::lm::LmDims { vocab: vocab.len(), emb: m.emb, hidden: m.hidden },
        &mut rng::stream(cfg.run.seed, "lm/init", 0),
        m.init_bound,
    );
    let log = skipread::lm::train_phase1(&mut lm, &windows, &cfg.phase1_config(), cfg.run.seed)?;
    lm.emb.trainable = false;

    let ckpt = ctx.path("lm.ckpt.json");
    checkpoint::save(&ckpt, &lm, &checkpoint_meta(ctx, "train-lm"))?;
    ctx.record(&ckpt);
    let lpath = ctx.path("phase1_log.jsonl");
    skipread::lm::write_log_jsonl(&lpath, &log)?;
    ctx.record(&lpath);
    Ok(())
}

// ─── train-attn ────────────────────────────────────────────────────────────

pub fn train_attn(ctx: &mut RunContext) -> Result<()> {
    let cfg = ctx.cfg.clone();
    let vocab = load_lm_vocab(ctx)?;
    let docs = load_docs(&cfg)?;
    let windows = doc_windows(&vocab, &docs, cfg.model.window);
    let lm = load_lm(ctx, vocab.len())?;
    let m = &cfg.model;
    let mut net = AttentionNet::new(
        m.emb,
        m.hidden,
        m.attn_hidden,
        &mut rng::stream(cfg.run.seed, "attn/init", 0),
        m.init_bound,
    );
    let mut baseline = Baseline::new(
        m.emb,
        m.baseline_cells,
        &mut rng::stream(cfg.run.seed, "attn/init", 1),
        m.init_bound,
    );
    let log = skipread::policy::train_attention(
        &lm,
        &mut net,
        &mut baseline,
        &windows,
        &cfg.lm_tradeoff(),
        cfg.tradeoff.epochs,
        cfg.run.seed,
    );

    let npath = ctx.path("attn.ckpt.json");
    checkpoint::save(&npath, &net, &checkpoint_meta(ctx, "train-attn"))?;
    ctx.record(&npath);
    let bpath = ctx.path("baseline.ckpt.json");
    checkpoint::save(&bpath, &baseline, &checkpoint_meta(ctx, "train-attn"))?;
    ctx.record(&bpath);
    let lpath = ctx.path("attn_log.jsonl");
    write_jsonl(&lpath, &log)?;
    ctx.record(&lpath);
    Ok(())
}

// ─── train-qa ──────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct QaEvalReport {
    full_attention_accuracy: f64,
    answerable_train: usize,
    per_condition: BTreeMap<String, ConditionOutcome>,
}

#[derive(Serialize)]
struct ConditionOutcome {
    fixation_rate: f64,
    accuracy: f64,
}

pub fn train_qa(ctx: &mut RunContext) -> Result<()> {
    let cfg = ctx.cfg.clone();
    let (vocab, train_triples, entities) = load_qa_train(ctx)?;
    let examples = encode_all(&train_triples, &vocab, &entities, cfg.model.qa_clip_len)?;
    let m = &cfg.model;
    let mut model = QaModel::new(
        QaDims { vocab: vocab.len(), emb: m.emb, cells: m.qa_cells, entities: entities.len() },
        &mut rng::stream(cfg.run.seed, "qa/init", 0),
        m.init_bound,
    );
    if !cfg.paths.embeddings.is_empty() {
        model.emb = EmbeddingStore::load_text(
            Path::new(&cfg.paths.embeddings),
            &vocab,
            m.emb,
            &mut rng::stream(cfg.run.seed, "qa/emb-fill", 0),
            m.init_bound,
        )?;
    }

    let head_log = train_qa_head(&mut model, &examples, &cfg.qa_head_config(), cfg.run.seed)?;
    let keep = filter_answerable(&model, &examples)?;
    let stats = collect_feature_stats(&examples, cfg.qa_head.feature_decay)?;
    let mut attn = QaAttention::new(
        model.emb.dim,
        cfg.score_form(),
        &mut rng::stream(cfg.run.seed, "qa-attn/init", 0),
        cfg.qa_tradeoff.init_bound,
    );
    let attn_log = train_qa_attention(
        &mut attn,
        &model,
        &examples,
        &keep,
        &stats,
        &cfg.qa_tradeoff_config(),
        cfg.qa_tradeoff.epochs,
        cfg.run.seed,
    )?;

    // held-out behavior per condition, for quick inspection
    let eval_triples = load_triples(&ctx.path("qa_eval.jsonl"))?;
    let eval_examples = encode_all(&eval_triples, &vocab, &entities, cfg.model.qa_clip_len)?;
    let mut per_condition = BTreeMap::new();
    for condition in Condition::BOTH {
        let (rate, acc) = evaluate_policy(
            &attn,
            &model,
            &stats,
            &eval_examples,
            condition,
            cfg.run.seed,
        )?;
        per_condition.insert(
            condition.as_str().to_string(),
            ConditionOutcome { fixation_rate: rate, accuracy: acc },
        );
    }
    let report = QaEvalReport {
        full_attention_accuracy: full_attention_accuracy(&model, &eval_examples)?,
        answerable_train: keep.len(),
        per_condition,
    };

    let mpath = ctx.path("qa.ckpt.json");
    checkpoint::save(&mpath, &model, &checkpoint_meta(ctx, "train-qa"))?;
    ctx.record(&mpath);
    let apath = ctx.path("qa_attn.ckpt.json");
    checkpoint::save(&apath, &attn, &checkpoint_meta(ctx, "train-qa"))?;
    ctx.record(&apath);
    let spath = ctx.path("feature_stats.json");
    std::fs::write(&spath, stats.to_json()?)?;
    ctx.record(&spath);
    let hpath = ctx.path("head_log.jsonl");
    write_jsonl(&hpath, &head_log)?;
    ctx.record(&hpath);
    let lpath = ctx.path("qa_attn_log.jsonl");
    write_jsonl(&lpath, &attn_log)?;
    ctx.record(&lpath);
    let rpath = ctx.path("qa_report.json");
    write_json(&rpath, &report)?;
    ctx.record(&rpath);
    Ok(())
}

// ─── sweep-alpha ───────────────────────────────────────────────────────────

#[derive(Serialize)]
struct SelectedAlpha {
    target_rate: f64,
    alpha: f64,
}

pub fn sweep_alpha(ctx: &mut RunContext) -> Result<()> {
    let cfg = ctx.cfg.clone();
    let (vocab, train_triples, entities) = load_qa_train(ctx)?;
    let examples = encode_all(&train_triples, &vocab, &entities, cfg.model.qa_clip_len)?;
    let eval_triples = load_triples(&ctx.path("qa_eval.jsonl"))?;
    let eval_examples = encode_all(&eval_triples, &vocab, &entities, cfg.model.qa_clip_len)?;
    let model = load_qa_model(ctx, vocab.len(), entities.len())?;
    let keep = filter_answerable(&model, &examples)?;
    let spath = ctx.path("feature_stats.json");
    if !spath.exists() {
        return Err(stage_missing(&spath, "train-qa"));
    }
    let stats = FeatureStats::from_json(&std::fs::read_to_string(&spath)?)?;

    let sweep_cfg = SweepConfig {
        grid: cfg.sweep_grid(),
        runs: cfg.sweep.runs,
        epochs: cfg.sweep.epochs,
        threads: cfg.sweep.threads,
        tradeoff: cfg.qa_tradeoff_config(),
        init_bound: cfg.qa_tradeoff.init_bound,
        score_form: cfg.score_form(),
    };
    let (points, failures) =
        alpha_sweep(&model, &examples, &keep, &eval_examples, &stats, &sweep_cfg, cfg.run.seed);

    let cpath = ctx.path("sweep.csv");
    {
        let mut w = csv::Writer::from_path(&cpath)?;
        w.write_record(["alpha", "run", "condition", "fixation_rate", "accuracy"])?;
        for p in &points {
            w.write_record([
                p.alpha.to_string(),
                p.run.to_string(),
                p.condition.clone(),
                p.fixation_rate.to_string(),
                p.accuracy.to_string(),
            ])?;
        }
        w.flush()?;
    }
    ctx.record(&cpath);

    if !failures.is_empty() {
        let fpath = ctx.path("sweep_failures.jsonl");
        write_jsonl(&fpath, &failures)?;
        ctx.record(&fpath);
        ctx.flag_partial();
    }
    if !points.is_empty() {
        let selected = SelectedAlpha {
            target_rate: cfg.sweep.target_rate,
            alpha: select_alpha(&points, cfg.sweep.target_rate)?,
        };
        let apath = ctx.path("selected_alpha.json");
        write_json(&apath, &selected)?;
        ctx.record(&apath);
    }
    Ok(())
}

// ─── simulate ──────────────────────────────────────────────────────────────

pub fn simulate(ctx: &mut RunContext) -> Result<()> {
    let cfg = ctx.cfg.clone();
    let vocab = load_lm_vocab(ctx)?;
    let docs = load_docs(&cfg)?;
    let windows = doc_windows(&vocab, &docs, cfg.model.window);
    let lm = load_lm(ctx, vocab.len())?;
    let net = load_attn(ctx)?;

    let records = simulate_fixation_probs(&lm, &net, &windows, &vocab, cfg.run.seed);
    let spath = ctx.path("sim.jsonl");
    write_sim_jsonl(&spath, &records)?;
    ctx.record(&spath);

    // one heatmap per document over its windowed prefix
    let mut by_doc: BTreeMap<usize, (Vec<String>, Vec<f64>)> = BTreeMap::new();
    for r in &records {
        let e = by_doc.entry(r.doc).or_default();
        e.0.push(r.token.clone());
        e.1.push(r.prob);
    }
    for (doc, (tokens, probs)) in &by_doc {
        let ids: Vec<usize> = tokens.iter().map(|t| vocab.id_of(t)).collect();
        let excluded = exclusion_flags(&ids, cfg.model.window, None)?;
        let hpath = ctx.path(&format!("heatmap_doc{doc}.html"));
        emit_heatmap(
            &hpath,
            &format!("document {doc}"),
            tokens,
            probs,
            &excluded,
            HeatmapStyle::Reading,
        )?;
        ctx.record(&hpath);
    }
    Ok(())
}

// ─── evaluate ──────────────────────────────────────────────────────────────

#[derive(Deserialize)]
struct SimRow {
    doc: usize,
    position: usize,
    token: String,
    prob: f64,
    #[allow(dead_code)]
    sampled: u8,
}

#[derive(Serialize)]
struct EvalSummary {
    target_rate: f64,
    tokens_scored: usize,
    tokens_excluded: usize,
    model: MetricReport,
    baselines: BTreeMap<String, MetricReport>,
    predicted_conditional_ratio: Option<f64>,
    gold_conditional_ratio: Option<f64>,
}

fn load_sim_rows(path: &Path) -> Result<BTreeMap<usize, Vec<SimRow>>> {
    if !path.exists() {
        return Err(stage_missing(path, "simulate"));
    }
    let text = std::fs::read_to_string(path)?;
    let mut by_doc: BTreeMap<usize, Vec<SimRow>> = BTreeMap::new();
    for (index, line) in text.lines().enumerate() {
        let row: SimRow = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            index,
            reason: format!("fixation record: {e}"),
        })?;
        by_doc.entry(row.doc).or_default().push(row);
    }
    for (doc, rows) in &by_doc {
        for (i, pair) in rows.windows(2).enumerate() {
            if pair[1].position != pair[0].position + 1 {
                return Err(Error::Misaligned {
                    index: i + 1,
                    reason: format!("doc {doc}: fixation records out of order"),
                });
            }
        }
        if rows[0].position != 0 {
            return Err(Error::Misaligned {
                index: 0,
                reason: format!("doc {doc}: fixation records do not start at token 0"),
            });
        }
    }
    Ok(by_doc)
}

pub fn evaluate(ctx: &mut RunContext) -> Result<()> {
    let cfg = ctx.cfg.clone();
    if cfg.paths.gold.is_empty() {
        return Err(Error::Config {
            field: "paths.gold".into(),
            reason: "evaluate needs a gold fixations file".into(),
        });
    }
    let vocab = load_lm_vocab(ctx)?;
    let by_doc = load_sim_rows(&cfg.sim_path())?;
    let gold = GoldFixations::load_csv(Path::new(&cfg.paths.gold))?;
    if gold.is_empty() {
        return Err(Error::EmptyCorpus("gold fixation file has no records".into()));
    }

    let mut probs_all = Vec::new();
    let mut gold_all: Vec<u8> = Vec::new();
    let mut freqs = Vec::new();
    let mut lengths = Vec::new();
    let mut segments = Vec::new();
    let mut gold_segments: Vec<Vec<u8>> = Vec::new();
    let mut excluded_count = 0usize;

    for (reader, doc, gtokens) in gold.iter() {
        let rows = by_doc.get(&doc).ok_or_else(|| Error::Misaligned {
            index: 0,
            reason: format!("gold covers doc {doc} but the fixation records do not"),
        })?;
        if rows.len() != gtokens.len() {
            return Err(Error::Misaligned {
                index: rows.len().min(gtokens.len()),
                reason: format!(
                    "reader {reader} doc {doc}: {} fixation records vs {} gold tokens",
                    rows.len(),
                    gtokens.len()
                ),
            });
        }
        let ids: Vec<usize> = rows.iter().map(|r| vocab.id_of(&r.token)).collect();
        let excluded = exclusion_flags(&ids, cfg.model.window, Some(gtokens))?;
        excluded_count += excluded.iter().filter(|&&e| e).count();

        let probs: Vec<f64> = rows.iter().map(|r| r.prob).collect();
        let bits: Vec<u8> = gtokens.iter().map(|g| u8::from(g.fixated)).collect();
        let kept_probs = apply_exclusions(&probs, &excluded);
        let kept_bits = apply_exclusions(&bits, &excluded);
        let kept_ids = apply_exclusions(&ids, &excluded);
        let kept_tokens: Vec<&str> = rows
            .iter()
            .zip(&excluded)
            .filter(|(_, &e)| !e)
            .map(|(r, _)| r.token.as_str())
            .collect();

        segments.push(kept_probs.len());
        gold_segments.push(kept_bits.clone());
        freqs.extend(kept_ids.iter().map(|&id| vocab.log_frequency(id)));
        lengths.extend(kept_tokens.iter().map(|t| t.chars().count() as f64));
        probs_all.extend(kept_probs);
        gold_all.extend(kept_bits);
    }

    let model = discrimination_report(&probs_all, &gold_all, cfg.eval.target_rate)?;
    let mut baselines = BTreeMap::new();
    // infrequent words attract fixations; long words attract fixations
    let freq = fit_threshold_baseline(&freqs, cfg.eval.target_rate, false)?;
    baselines.insert(
        "log_frequency".to_string(),
        fixation_metrics(&freq.apply(&freqs), &gold_all)?,
    );
    let len = fit_threshold_baseline(&lengths, cfg.eval.target_rate, true)?;
    baselines.insert(
        "word_length".to_string(),
        fixation_metrics(&len.apply(&lengths), &gold_all)?,
    );

    // skip clustering: rescaled predictions split back into per-document runs
    let rescaled = rescale_threshold(&probs_all, cfg.eval.target_rate)?;
    let mut pred_segments = Vec::new();
    let mut offset = 0;
    for &n in &segments {
        pred_segments.push(rescaled.preds[offset..offset + n].to_vec());
        offset += n;
    }
    let summary = EvalSummary {
        target_rate: cfg.eval.target_rate,
        tokens_scored: probs_all.len(),
        tokens_excluded: excluded_count,
        model,
        baselines,
        predicted_conditional_ratio: conditional_ratio(&pred_segments).ok(),
        gold_conditional_ratio: conditional_ratio(&gold_segments).ok(),
    };
    let mpath = ctx.path("metrics.json");
    write_json(&mpath, &summary)?;
    ctx.record(&mpath);
    Ok(())
}

// ─── etk ───────────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct TrialReport {
    trial: usize,
    fixations_in: usize,
    fixations_kept: usize,
    off_text: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    drift: Option<DriftReport>,
}

#[derive(Serialize)]
struct DriftReport {
    offsets: Vec<f64>,
    objective: f64,
    converged: bool,
    rounds: usize,
}

fn etk_geometry(cfg: &RunConfig, line_count: usize) -> Result<LineGeometry> {
    if cfg.etk.line_centers.len() != line_count {
        return Err(Error::Config {
            field: "etk.line_centers".into(),
            reason: format!(
                "{} centers configured for {line_count} text lines",
                cfg.etk.line_centers.len()
            ),
        });
    }
    let g = LineGeometry { centers: cfg.etk.line_centers.clone(), height: cfg.etk.line_height };
    g.validate()?;
    Ok(g)
}

fn etk_grid(cfg: &RunConfig) -> Result<CalibrationGrid> {
    let arr = |field: &str, v: &[f64]| -> Result<[f64; 3]> {
        v.try_into().map_err(|_| Error::Config {
            field: field.into(),
            reason: format!("expected exactly 3 coordinates, got {}", v.len()),
        })
    };
    Ok(CalibrationGrid {
        xs: arr("etk.grid_xs", &cfg.etk.grid_xs)?,
        ys: arr("etk.grid_ys", &cfg.etk.grid_ys)?,
    })
}

pub fn etk(ctx: &mut RunContext) -> Result<()> {
    let cfg = ctx.cfg.clone();
    for (field, p) in [("etk.fixations", &cfg.etk.fixations), ("etk.text", &cfg.etk.text)] {
        if p.is_empty() {
            return Err(Error::Config {
                field: field.into(),
                reason: "required for the etk subcommand".into(),
            });
        }
    }
    let text = std::fs::read_to_string(&cfg.etk.text)?;
    let lines: Vec<&str> = text.lines().collect();
    let regions = text_regions(&lines, cfg.etk.x0, cfg.etk.char_width);
    validate_regions(&regions)?;
    let geometry = etk_geometry(&cfg, lines.len())?;
    let coeffs = DriftCoefficients {
        calibration: cfg.etk.coeff_calibration,
        off_line: cfg.etk.coeff_off_line,
        line_change: cfg.etk.coeff_line_change,
        within_line: cfg.etk.coeff_within_line,
        outside: cfg.etk.coeff_outside,
    };

    let rpath = ctx.path("regions.csv");
    save_regions(&rpath, &regions)?;
    ctx.record(&rpath);

    let raw = load_fixations(Path::new(&cfg.etk.fixations))?;
    let mut reports = Vec::new();
    let mut processed_all = Vec::new();
    for (trial, fixations) in by_trial(&raw) {
        let mut current = if cfg.etk.pool {
            pool_fixations(&fixations, cfg.etk.char_width)
        } else {
            fixations.clone()
        };
        let drift = if cfg.etk.drift {
            let grid = etk_grid(&cfg)?;
            let out = drift_correct(&current, &grid, &geometry, &coeffs)?;
            current = out.fixations;
            Some(DriftReport {
                offsets: out.offsets.to_vec(),
                objective: out.objective,
                converged: out.converged,
                rounds: out.rounds,
            })
        } else {
            None
        };
        let outcome = compute_measures(&current, &regions, &geometry)?;
        let mpath = ctx.path(&format!("measures_trial{trial}.csv"));
        save_measures(&mpath, &regions, &outcome.measures)?;
        ctx.record(&mpath);
        reports.push(TrialReport {
            trial,
            fixations_in: fixations.len(),
            fixations_kept: current.len(),
            off_text: outcome.off_text,
            drift,
        });
        processed_all.extend(current);
    }
    let ppath = ctx.path("processed_fixations.csv");
    save_fixations(&ppath, &processed_all)?;
    ctx.record(&ppath);
    let jpath = ctx.path("etk_report.json");
    write_json(&jpath, &reports)?;
    ctx.record(&jpath);
    Ok(())
}

// ─── export ────────────────────────────────────────────────────────────────

struct DocData {
    doc: usize,
    tokens: Vec<String>,
    ids: Vec<usize>,
    full: Vec<f64>,
    restricted: Vec<f64>,
    probs: Vec<f64>,
}

pub fn export(ctx: &mut RunContext) -> Result<()> {
    let cfg = ctx.cfg.clone();
    let vocab = load_lm_vocab(ctx)?;
    let docs = load_docs(&cfg)?;
    let lm = load_lm(ctx, vocab.len())?;
    let net = load_attn(ctx)?;
    let gold = if cfg.paths.gold.is_empty() {
        None
    } else {
        Some(GoldFixations::load_csv(Path::new(&cfg.paths.gold))?)
    };
    // a single-reader gold file aligns by document; anything else is omitted
    let gold_of = |doc: usize| -> Option<&[skipread::eval::GoldToken]> {
        let g = gold.as_ref()?;
        let readers = g.readers();
        if readers.len() == 1 {
            g.get(readers[0], doc)
        } else {
            None
        }
    };

    let mut data = Vec::new();
    for (d, doc) in docs.iter().enumerate() {
        let ids = vocab.encode(doc);
        let windows = window_split(d, &ids, cfg.model.window);
        if windows.is_empty() {
            continue;
        }
        let mut row = DocData {
            doc: d,
            tokens: Vec::new(),
            ids: Vec::new(),
            full: Vec::new(),
            restricted: Vec::new(),
            probs: Vec::new(),
        };
        for (k, w) in windows.iter().enumerate() {
            let mut wrng = rng::stream(cfg.run.seed, "export", (d * 100_000 + k) as u64);
            let roll = rollout(&lm, &net, w, None, &mut wrng);
            let trace = read_window(&lm, w, &roll.omega);
            row.full.extend(skipread::lm::full_surprisal(&lm, w));
            row.restricted.extend(restricted_surprisal(&trace, w));
            row.probs.extend(roll.probs.iter().copied());
            row.ids.extend(w.ids.iter().copied());
            row.tokens.extend(w.ids.iter().map(|&id| vocab.token_of(id).to_string()));
        }
        data.push(row);
    }
    let table: Vec<AnalysisDoc> = data
        .iter()
        .map(|d| AnalysisDoc {
            doc: d.doc,
            tokens: &d.tokens,
            ids: &d.ids,
            surprisal_full: &d.full,
            surprisal_restricted: &d.restricted,
            fixation_prob: &d.probs,
            is_named_entity: None,
            is_correct_answer: None,
            condition: None,
            gold: gold_of(d.doc),
        })
        .collect();
    let apath = ctx.path("analysis.csv");
    export_analysis_table(&apath, &vocab, cfg.model.window, &table)?;
    ctx.record(&apath);
    Ok(())
}
