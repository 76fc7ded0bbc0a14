//! Evaluation of fixation sequences against recorded eye movements:
//! Bernoulli perplexity, rescale-and-threshold discrimination with class-wise
//! F scores, score-threshold baselines, the conditional fixation ratio,
//! per-part-of-speech fixation means, token heatmaps, and the flat per-token
//! analysis table handed to downstream regression tooling.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{Vocabulary, OOV_ID};
use crate::nn::sigmoid;
use crate::qa::Condition;
use crate::{Error, Result};

// ─── Gold fixation data ────────────────────────────────────────────────────

/// One token of one reader's record.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GoldToken {
    pub fixated: bool,
    pub first_fixation: Option<f64>,
    pub first_pass: Option<f64>,
    pub total_time: Option<f64>,
    /// token lost to calibration problems; excluded from every metric
    pub track_loss: bool,
}

impl GoldToken {
    pub fn skip() -> Self {
        Self {
            fixated: false,
            first_fixation: None,
            first_pass: None,
            total_time: None,
            track_loss: false,
        }
    }

    pub fn fixation(first: f64, pass: f64, total: f64) -> Self {
        Self {
            fixated: true,
            first_fixation: Some(first),
            first_pass: Some(pass),
            total_time: Some(total),
            track_loss: false,
        }
    }
}

/// Recorded fixations keyed by (reader, document). Token vectors are dense:
/// entry `i` describes token `i` of the document as that reader saw it.
#[derive(Debug, Default, Clone)]
pub struct GoldFixations {
    records: BTreeMap<(String, usize), Vec<GoldToken>>,
}

impl GoldFixations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, reader: &str, doc: usize, tokens: Vec<GoldToken>) {
        self.records.insert((reader.to_string(), doc), tokens);
    }

    pub fn get(&self, reader: &str, doc: usize) -> Option<&[GoldToken]> {
        self.records.get(&(reader.to_string(), doc)).map(|v| v.as_slice())
    }

    pub fn readers(&self) -> Vec<&str> {
        let mut out: Vec<&str> = self.records.keys().map(|(r, _)| r.as_str()).collect();
        out.dedup();
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, usize, &[GoldToken])> {
        self.records.iter().map(|((r, d), v)| (r.as_str(), *d, v.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV with header
    /// `reader,doc,token_index,fixated,first_fixation,first_pass,total_time,track_loss`;
    /// duration cells are empty when the measure is undefined. Rows may arrive
    /// in any order but must cover each document densely from token 0.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut by_key: BTreeMap<(String, usize), Vec<(usize, GoldToken)>> = BTreeMap::new();
        let mut reader = csv::Reader::from_path(path)?;
        for (index, row) in reader.records().enumerate() {
            let row = row?;
            let bad = |reason: String| Error::MalformedRecord { index, reason };
            if row.len() != 8 {
                return Err(bad(format!("expected 8 fields, got {}", row.len())));
            }
            let field = |k: usize| row.get(k).unwrap_or("").trim();
            let doc: usize =
                field(1).parse().map_err(|e| bad(format!("doc: {e}")))?;
            let token_index: usize =
                field(2).parse().map_err(|e| bad(format!("token_index: {e}")))?;
            let flag = |k: usize, name: &str| -> Result<bool> {
                match field(k) {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(bad(format!("{name} must be 0 or 1, got `{other}`"))),
                }
            };
            let duration = |k: usize, name: &str| -> Result<Option<f64>> {
                let s = field(k);
                if s.is_empty() {
                    return Ok(None);
                }
                let v: f64 = s.parse().map_err(|e| bad(format!("{name}: {e}")))?;
                if !v.is_finite() || v < 0.0 {
                    return Err(bad(format!("{name} must be a nonnegative duration")));
                }
                Ok(Some(v))
            };
            let token = GoldToken {
                fixated: flag(3, "fixated")?,
                first_fixation: duration(4, "first_fixation")?,
                first_pass: duration(5, "first_pass")?,
                total_time: duration(6, "total_time")?,
                track_loss: flag(7, "track_loss")?,
            };
            by_key
                .entry((field(0).to_string(), doc))
                .or_default()
                .push((token_index, token));
        }

        let mut out = Self::new();
        for ((reader, doc), mut rows) in by_key {
            rows.sort_by_key(|(i, _)| *i);
            for (want, (got, _)) in rows.iter().enumerate() {
                if *got != want {
                    return Err(Error::MalformedRecord {
                        index: want,
                        reason: format!(
                            "reader `{reader}` doc {doc}: token indices not dense at {got}"
                        ),
                    });
                }
            }
            out.records.insert((reader, doc), rows.into_iter().map(|(_, t)| t).collect());
        }
        Ok(out)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "reader",
            "doc",
            "token_index",
            "fixated",
            "first_fixation",
            "first_pass",
            "total_time",
            "track_loss",
        ])?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for ((reader, doc), tokens) in &self.records {
            for (i, t) in tokens.iter().enumerate() {
                w.write_record([
                    reader.clone(),
                    doc.to_string(),
                    i.to_string(),
                    (t.fixated as u8).to_string(),
                    cell(t.first_fixation),
                    cell(t.first_pass),
                    cell(t.total_time),
                    (t.track_loss as u8).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

// ─── Exclusions ────────────────────────────────────────────────────────────

/// Tokens dropped from every metric: the first and last three positions of
/// each window (1-based positions 1–3 and 48–50 at the standard width),
/// out-of-vocabulary tokens, and tokens lost to track loss. The same flags
/// are applied to model output and gold data.
pub fn exclusion_flags(
    ids: &[usize],
    window: usize,
    gold: Option<&[GoldToken]>,
) -> Result<Vec<bool>> {
    if window < 7 {
        return Err(Error::Config {
            field: "window".into(),
            reason: format!("width {window} leaves no token unexcluded"),
        });
    }
    if let Some(g) = gold {
        if g.len() != ids.len() {
            return Err(Error::Shape(format!(
                "gold record has {} tokens, document has {}",
                g.len(),
                ids.len()
            )));
        }
    }
    Ok((0..ids.len())
        .map(|i| {
            let pos = i % window + 1;
            pos <= 3
                || pos > window - 3
                || ids[i] == OOV_ID
                || gold.map_or(false, |g| g[i].track_loss)
        })
        .collect())
}

/// Keeps the entries whose exclusion flag is false.
pub fn apply_exclusions<T: Copy>(xs: &[T], excluded: &[bool]) -> Vec<T> {
    xs.iter().zip(excluded).filter(|(_, &e)| !e).map(|(&x, _)| x).collect()
}

// ─── Bernoulli perplexity ──────────────────────────────────────────────────

fn check_prob(i: usize, p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::MalformedRecord {
            index: i,
            reason: format!("fixation probability {p} outside (0,1)"),
        });
    }
    Ok(())
}

/// exp of the mean negative log-likelihood of the gold bits under per-token
/// Bernoulli probabilities. 2.0 for a fair coin; 1.0 in the limit of a
/// perfect, confident predictor.
pub fn fixation_perplexity(probs: &[f64], gold: &[u8]) -> Result<f64> {
    if probs.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} probabilities vs {} gold bits",
            probs.len(),
            gold.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::EmptyCorpus("no tokens left for perplexity".into()));
    }
    let mut nll = 0.0;
    for (i, (&p, &g)) in probs.iter().zip(gold).enumerate() {
        check_prob(i, p)?;
        nll -= if g == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok((nll / probs.len() as f64).exp())
}

// ─── Rescale and threshold ─────────────────────────────────────────────────

/// Transformed probabilities within this distance of the 0.5 boundary count
/// as ties and predict fixation.
const TIE_BAND: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct RescaleOutcome {
    /// additive shift applied in logit space
    pub shift: f64,
    pub probs: Vec<f64>,
    pub preds: Vec<u8>,
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    (p / (1.0 - p)).ln()
}

/// Shifts all probabilities by a common amount in logit space so their mean
/// equals `target`, then predicts fixation where the shifted probability
/// exceeds 0.5. The shift is monotone, so the ranking of tokens is
/// preserved; the shift amount is solved by bisection.
pub fn rescale_threshold(probs: &[f64], target: f64) -> Result<RescaleOutcome> {
    if probs.is_empty() {
        return Err(Error::EmptyCorpus("no probabilities to rescale".into()));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Config {
            field: "target".into(),
            reason: format!("rate {target} outside (0,1)"),
        });
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::MalformedRecord {
                index: i,
                reason: format!("fixation probability {p} outside [0,1]"),
            });
        }
    }
    let logits: Vec<f64> = probs.iter().map(|&p| logit(p)).collect();
    let mean_at = |c: f64| {
        logits.iter().map(|&l| sigmoid(l + c)).sum::<f64>() / logits.len() as f64
    };
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let shift = 0.5 * (lo + hi);
    let rescaled: Vec<f64> = logits.iter().map(|&l| sigmoid(l + shift)).collect();
    let preds: Vec<u8> =
        rescaled.iter().map(|&p| (p > 0.5 - TIE_BAND) as u8).collect();
    Ok(RescaleOutcome { shift, probs: rescaled, preds })
}

// ─── Discrimination metrics ────────────────────────────────────────────────

/// Accuracy and class-wise F scores in percent; rate as a fraction.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub f_fix: f64,
    pub f_skip: f64,
    pub fixation_rate: f64,
    pub perplexity: Option<f64>,
}

fn f_score(tp: f64, fp: f64, fn_: f64) -> f64 {
    if tp == 0.0 {
        return 0.0;
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    100.0 * 2.0 * precision * recall / (precision + recall)
}

pub fn fixation_metrics(pred: &[u8], gold: &[u8]) -> Result<MetricReport> {
    if pred.len() != gold.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} gold bits",
            pred.len(),
            gold.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyCorpus("no tokens left for discrimination".into()));
    }
    let mut counts = [[0usize; 2]; 2]; // [pred][gold]
    for (&p, &g) in pred.iter().zip(gold) {
        counts[(p == 1) as usize][(g == 1) as usize] += 1;
    }
    let n = pred.len() as f64;
    let (tp, fp, fn_) = (counts[1][1] as f64, counts[1][0] as f64, counts[0][1] as f64);
    let (tn, fp_skip, fn_skip) = (counts[0][0] as f64, counts[0][1] as f64, counts[1][0] as f64);
    Ok(MetricReport {
        accuracy: 100.0 * (tp + tn) / n,
        f_fix: f_score(tp, fp, fn_),
        f_skip: f_score(tn, fp_skip, fn_skip),
        fixation_rate: (tp + fp) / n,
        perplexity: None,
    })
}

/// Full discrimination report for one prob/gold alignment: perplexity of the
/// raw probabilities, then rescale-and-threshold predictions scored against
/// the gold bits.
pub fn discrimination_report(probs: &[f64], gold: &[u8], target: f64) -> Result<MetricReport> {
    let outcome = rescale_threshold(probs, target)?;
    let mut report = fixation_metrics(&outcome.preds, gold)?;
    report.perplexity = Some(fixation_perplexity(probs, gold)?);
    Ok(report)
}

// ─── Score-threshold baselines ─────────────────────────────────────────────

/// A cut on a per-token score (word length, log frequency, …) fitted so the
/// development-split fixation rate lands closest to a target.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdPredictor {
    pub threshold: f64,
    /// true: fixate scores at or above the cut (word length);
    /// false: fixate scores at or below it (log frequency)
    pub fixate_high: bool,
}

impl ThresholdPredictor {
    pub fn fixates(&self, score: f64) -> bool {
        if self.fixate_high {
            score >= self.threshold
        } else {
            score <= self.threshold
        }
    }

    pub fn apply(&self, scores: &[f64]) -> Vec<u8> {
        scores.iter().map(|&s| self.fixates(s) as u8).collect()
    }
}

/// Tries every distinct development score (plus a cut that fixates nothing)
/// and keeps the cut whose dev rate is closest to `target`; on a tie the
/// higher rate wins, so raising the target never unfixates a token.
pub fn fit_threshold_baseline(
    dev_scores: &[f64],
    target: f64,
    fixate_high: bool,
) -> Result<ThresholdPredictor> {
    if dev_scores.is_empty() {
        return Err(Error::EmptyCorpus("no development scores".into()));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Config {
            field: "target".into(),
            reason: format!("rate {target} outside [0,1]"),
        });
    }
    let mut cuts: Vec<f64> = dev_scores.to_vec();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // one cut beyond the extreme score fixates nothing
    cuts.push(if fixate_high { cuts[cuts.len() - 1] + 1.0 } else { cuts[0] - 1.0 });

    let mut best: Option<(f64, f64, f64)> = None; // (|rate-target|, rate, cut)
    for &cut in &cuts {
        let p = ThresholdPredictor { threshold: cut, fixate_high };
        let rate = dev_scores.iter().filter(|&&s| p.fixates(s)).count() as f64
            / dev_scores.len() as f64;
        let gap = (rate - target).abs();
        let better = match best {
            None => true,
            Some((bg, br, _)) => gap < bg - 1e-15 || (gap < bg + 1e-15 && rate > br),
        };
        if better {
            best = Some((gap, rate, cut));
        }
    }
    let (_, _, threshold) = best.unwrap();
    Ok(ThresholdPredictor { threshold, fixate_high })
}

// ─── Conditional fixation ratio ────────────────────────────────────────────

/// P(fixate | previous fixated) / P(fixate), pooled over all within-sequence
/// bigrams; the marginal is taken over bigram second elements so both terms
/// condition on the same token population. Below 1.0 means fixations repel.
pub fn conditional_ratio(sequences: &[Vec<u8>]) -> Result<f64> {
    let mut after_fix = 0usize; // bigrams whose first element is fixated
    let mut fix_after_fix = 0usize;
    let mut bigrams = 0usize;
    let mut second_fixed = 0usize;
    for seq in sequences {
        for pair in seq.windows(2) {
            bigrams += 1;
            second_fixed += (pair[1] == 1) as usize;
            if pair[0] == 1 {
                after_fix += 1;
                fix_after_fix += (pair[1] == 1) as usize;
            }
        }
    }
    if bigrams == 0 || after_fix == 0 {
        return Err(Error::EmptyCorpus(
            "no bigrams with a fixated first element".into(),
        ));
    }
    if second_fixed == 0 {
        return Err(Error::EmptyCorpus("no fixated bigram second elements".into()));
    }
    let conditional = fix_after_fix as f64 / after_fix as f64;
    let marginal = second_fixed as f64 / bigrams as f64;
    Ok(conditional / marginal)
}

// ─── Fixation by part of speech ────────────────────────────────────────────

/// Universal tags in report order. Unknown tags pool under X; the
/// punctuation tag `.` is dropped entirely.
pub const POS_TAGS: [&str; 11] =
    ["ADJ", "ADP", "ADV", "CONJ", "DET", "NOUN", "NUM", "PRON", "PRT", "VERB", "X"];

#[derive(Debug, Clone, serde::Serialize)]
pub struct PosRow {
    pub tag: &'static str,
    pub count: usize,
    pub mean_prob: f64,
}

pub fn pos_fixation_table<S: AsRef<str>>(probs: &[f64], tags: &[S]) -> Result<Vec<PosRow>> {
    if probs.len() != tags.len() {
        return Err(Error::Shape(format!(
            "{} probabilities vs {} tags",
            probs.len(),
            tags.len()
        )));
    }
    let mut sums = [0.0f64; POS_TAGS.len()];
    let mut counts = [0usize; POS_TAGS.len()];
    for (&p, tag) in probs.iter().zip(tags) {
        let tag = tag.as_ref();
        if tag == "." {
            continue;
        }
        let slot = POS_TAGS.iter().position(|&t| t == tag).unwrap_or(POS_TAGS.len() - 1);
        sums[slot] += p;
        counts[slot] += 1;
    }
    Ok(POS_TAGS
        .iter()
        .enumerate()
        .filter(|&(i, _)| counts[i] > 0)
        .map(|(i, &tag)| PosRow { tag, count: counts[i], mean_prob: sums[i] / counts[i] as f64 })
        .collect())
}

// ─── Token heatmaps ────────────────────────────────────────────────────────

/// Gradient flavors. `Reading` spans the full [0,1] range; `Answering`
/// renders everything below 0.3 at the blue endpoint, matching how the
/// answering model's maps are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapStyle {
    Reading,
    Answering,
}

impl HeatmapStyle {
    fn green(self) -> u8 {
        match self {
            HeatmapStyle::Reading => (0.2f64 * 255.0).round() as u8,
            HeatmapStyle::Answering => (0.3f64 * 255.0).round() as u8,
        }
    }

    fn bucket(self, p: f64) -> usize {
        let unit = match self {
            HeatmapStyle::Reading => p,
            HeatmapStyle::Answering => (p - 0.3) / 0.7,
        };
        (unit * 20.0).round().clamp(0.0, 20.0) as usize
    }
}

/// 21-step blue→red gradient: blue rises to magenta at the middle, then blue
/// drains out toward red.
pub fn heatmap_color(p: f64, style: HeatmapStyle) -> String {
    let i = style.bucket(p);
    let g = style.green();
    if i <= 10 {
        format!("rgb({},{g},255)", (i as f64 / 10.0 * 255.0).round() as u8)
    } else {
        format!("rgb(255,{g},{})", ((20 - i) as f64 / 10.0 * 255.0).round() as u8)
    }
}

const EXCLUDED_BG: &str = "#f6f6f2";

fn escape_html(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(ch),
        }
    }
    out
}

/// Self-contained page: every token on its gradient color, excluded tokens
/// on near-white, the probability in the hover title.
pub fn render_heatmap(
    title: &str,
    tokens: &[String],
    probs: &[f64],
    excluded: &[bool],
    style: HeatmapStyle,
) -> Result<String> {
    if tokens.len() != probs.len() || tokens.len() != excluded.len() {
        return Err(Error::Shape(format!(
            "{} tokens vs {} probabilities vs {} exclusion flags",
            tokens.len(),
            probs.len(),
            excluded.len()
        )));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::MalformedRecord {
                index: i,
                reason: format!("fixation probability {p} outside [0,1]"),
            });
        }
    }
    let mut html = String::new();
    let _ = write!(
        html,
        "<!doctype html>\n<html><head><meta charset=\"utf-8\">\n<title>{}</title>\n\
         <style>\nbody{{font-family:Georgia,serif;line-height:2.1;margin:2em auto;max-width:56em;color:#111}}\n\
         span.t{{padding:2px 4px;border-radius:3px}}\nspan.x{{color:#888}}\n</style>\n\
         </head><body>\n<p>\n",
        escape_html(title)
    );
    for i in 0..tokens.len() {
        let word = escape_html(&tokens[i]);
        if excluded[i] {
            let _ = writeln!(
                html,
                "<span class=\"t x\" style=\"background:{EXCLUDED_BG}\" title=\"excluded\">{word}</span>"
            );
        } else {
            let _ = writeln!(
                html,
                "<span class=\"t\" style=\"background:{}\" title=\"{:.3}\">{word}</span>",
                heatmap_color(probs[i], style),
                probs[i]
            );
        }
    }
    html.push_str("</p>\n</body></html>\n");
    Ok(html)
}

pub fn emit_heatmap(
    path: &Path,
    title: &str,
    tokens: &[String],
    probs: &[f64],
    excluded: &[bool],
    style: HeatmapStyle,
) -> Result<()> {
    let html = render_heatmap(title, tokens, probs, excluded, style)?;
    std::fs::write(path, html)?;
    Ok(())
}

// ─── Analysis table export ─────────────────────────────────────────────────

/// Everything known about one document's tokens, aligned by position.
/// Optional slices may be absent as a whole but never partially.
pub struct AnalysisDoc<'a> {
    pub doc: usize,
    pub tokens: &'a [String],
    pub ids: &'a [usize],
    pub surprisal_full: &'a [f64],
    pub surprisal_restricted: &'a [f64],
    pub fixation_prob: &'a [f64],
    pub is_named_entity: Option<&'a [bool]>,
    pub is_correct_answer: Option<&'a [bool]>,
    pub condition: Option<Condition>,
    pub gold: Option<&'a [GoldToken]>,
}

pub const ANALYSIS_HEADER: [&str; 17] = [
    "doc",
    "token_index",
    "token",
    "log_word_freq",
    "word_length",
    "is_named_entity",
    "is_correct_answer",
    "position_text",
    "surprisal_full",
    "surprisal_restricted",
    "condition",
    "fixation_prob",
    "gold_fixated",
    "gold_first_fixation",
    "gold_first_pass",
    "gold_total_time",
    "exclude",
];

/// One row per token across all documents. Any slice whose length disagrees
/// with the token count is a hard error naming the first row that cannot be
/// formed. Durations and flags without gold data are left empty; the
/// condition column is empty outside the answering setting.
pub fn export_analysis_table(
    path: &Path,
    vocab: &Vocabulary,
    window: usize,
    docs: &[AnalysisDoc],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ANALYSIS_HEADER)?;
    let mut row_base = 0usize;
    for d in docs {
        let n = d.tokens.len();
        let check = |name: &str, len: usize| -> Result<()> {
            if len != n {
                let first_bad = len.min(n);
                return Err(Error::Misaligned {
                    index: row_base + first_bad,
                    reason: format!("doc {}: {name} has {len} values for {n} tokens", d.doc),
                });
            }
            Ok(())
        };
        check("ids", d.ids.len())?;
        check("surprisal_full", d.surprisal_full.len())?;
        check("surprisal_restricted", d.surprisal_restricted.len())?;
        check("fixation_prob", d.fixation_prob.len())?;
        if let Some(ne) = d.is_named_entity {
            check("is_named_entity", ne.len())?;
        }
        if let Some(ca) = d.is_correct_answer {
            check("is_correct_answer", ca.len())?;
        }
        if let Some(g) = d.gold {
            check("gold", g.len())?;
        }

        let excluded = exclusion_flags(d.ids, window, d.gold)?;
        let opt_flag = |v: Option<&[bool]>, i: usize| {
            v.map(|f| (f[i] as u8).to_string()).unwrap_or_default()
        };
        let opt_duration =
            |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for i in 0..n {
            let gold = d.gold.map(|g| &g[i]);
            w.write_record([
                d.doc.to_string(),
                i.to_string(),
                d.tokens[i].clone(),
                vocab.log_frequency(d.ids[i]).to_string(),
                d.tokens[i].chars().count().to_string(),
                opt_flag(d.is_named_entity, i),
                opt_flag(d.is_correct_answer, i),
                (i + 1).to_string(),
                d.surprisal_full[i].to_string(),
                d.surprisal_restricted[i].to_string(),
                d.condition.map(|c| c.code().to_string()).unwrap_or_default(),
                d.fixation_prob[i].to_string(),
                gold.map(|g| (g.fixated as u8).to_string()).unwrap_or_default(),
                opt_duration(gold.and_then(|g| g.first_fixation)),
                opt_duration(gold.and_then(|g| g.first_pass)),
                opt_duration(gold.and_then(|g| g.total_time)),
                (excluded[i] as u8).to_string(),
            ])?;
        }
        row_base += n;
    }
    w.flush()?;
    Ok(())
}
