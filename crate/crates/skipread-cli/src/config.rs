//! Run configuration: a TOML file with one section per pipeline stage,
//! overridable from the command line by dotted key. The effective config
//! (file + overrides) is what gets hashed into manifests, so two runs with
//! the same hash saw byte-identical settings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use skipread::{Error, Result};
use std::path::{Path, PathBuf};

fn err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub model: Model,
    pub preprocess: Preprocess,
    pub phase1: Phase1,
    pub tradeoff: Tradeoff,
    pub qa_head: QaHead,
    pub qa_tradeoff: QaTradeoff,
    pub sweep: Sweep,
    pub eval: Eval,
    pub etk: Etk,
    pub run: Run,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// plain-text documents for the sequence model (one file per document)
    pub corpus: Vec<String>,
    /// cloze triples (JSONL) for the question-answering model
    pub cloze: String,
    /// optional pre-trained text-format embeddings for the QA model
    pub embeddings: String,
    /// optional gold fixations CSV
    pub gold: String,
    /// fixation-probability records consumed by `evaluate`
    /// (defaults to <out_dir>/sim.jsonl)
    pub sim: String,
    pub out_dir: String,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus: Vec::new(),
            cloze: String::new(),
            embeddings: String::new(),
            gold: String::new(),
            sim: String::new(),
            out_dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Model {
    pub vocab: usize,
    pub emb: usize,
    pub hidden: usize,
    pub window: usize,
    pub init_bound: f64,
    /// policy-network hidden layer (sequence model)
    pub attn_hidden: usize,
    /// baseline biLSTM cells per direction
    pub baseline_cells: usize,
    /// QA memory cells per direction
    pub qa_cells: usize,
    /// QA texts are clipped to this many tokens
    pub qa_clip_len: usize,
}

impl Default for Model {
    fn default() -> Self {
        Self {
            vocab: 200,
            emb: 16,
            hidden: 32,
            window: 50,
            init_bound: 0.1,
            attn_hidden: 16,
            baseline_cells: 16,
            qa_cells: 24,
            qa_clip_len: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    /// every k-th cloze triple is held out for evaluation
    pub qa_eval_every: usize,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self { qa_eval_every: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase1 {
    pub epochs: usize,
    /// fixation probability of the Binomial skipping noise
    pub keep_rate: f64,
    pub lr: f64,
    pub momentum: f64,
    pub heldout_every: usize,
}

impl Default for Phase1 {
    fn default() -> Self {
        let d = skipread::lm::Phase1Config::default();
        Self {
            epochs: d.epochs,
            keep_rate: d.keep_rate,
            lr: d.lr,
            momentum: d.momentum,
            heldout_every: d.heldout_every,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tradeoff {
    pub alpha: f64,
    pub entropy_weight: f64,
    pub lr: f64,
    pub momentum: f64,
    pub baseline_lr: f64,
    pub clip_norm: f64,
    pub batch: usize,
    pub epochs: usize,
}

impl Default for Tradeoff {
    fn default() -> Self {
        let d = skipread::policy::TradeoffConfig::default();
        Self {
            alpha: d.alpha,
            entropy_weight: d.entropy_weight,
            lr: d.lr,
            momentum: d.momentum,
            baseline_lr: d.baseline_lr,
            clip_norm: d.clip_norm,
            batch: d.batch,
            epochs: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaHead {
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub start_rate: f64,
    pub end_rate: f64,
    /// decay constant used when centering the question-average feature
    pub feature_decay: f64,
}

impl Default for QaHead {
    fn default() -> Self {
        let d = skipread::qa::HeadConfig::default();
        Self {
            epochs: d.epochs,
            lr: d.lr,
            momentum: d.momentum,
            start_rate: d.start_rate,
            end_rate: d.end_rate,
            feature_decay: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaTradeoff {
    pub alpha: f64,
    pub entropy_weight: f64,
    pub lr: f64,
    pub momentum: f64,
    pub batch: usize,
    pub epochs: usize,
    pub init_bound: f64,
    /// "feature_weights" or "embedding_weights"
    pub score_form: String,
}

impl Default for QaTradeoff {
    fn default() -> Self {
        let d = skipread::qa::QaTradeoffConfig::default();
        Self {
            alpha: d.alpha,
            entropy_weight: d.entropy_weight,
            lr: d.lr,
            momentum: d.momentum,
            batch: d.batch,
            epochs: 12,
            init_bound: 0.1,
            score_form: skipread::qa::ScoreForm::FeatureWeights.as_str().into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    /// fixation prices to train at; empty means 0 to 4 in steps of 0.25
    pub grid: Vec<f64>,
    /// independently seeded policies per price
    pub runs: usize,
    pub epochs: usize,
    pub threads: usize,
    /// the sweep also reports the price whose rate lands closest to this
    pub target_rate: f64,
}

impl Default for Sweep {
    fn default() -> Self {
        Self { grid: Vec::new(), runs: 1, epochs: 4, threads: 2, target_rate: 0.4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Eval {
    /// fixation rate the probabilities are rescaled to before thresholding
    pub target_rate: f64,
}

impl Default for Eval {
    fn default() -> Self {
        Self { target_rate: 0.4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Etk {
    /// raw fixations CSV
    pub fixations: String,
    /// displayed text, one line per screen line
    pub text: String,
    pub x0: f64,
    pub char_width: f64,
    pub line_centers: Vec<f64>,
    pub line_height: f64,
    pub pool: bool,
    pub drift: bool,
    pub grid_xs: Vec<f64>,
    pub grid_ys: Vec<f64>,
    pub coeff_calibration: f64,
    pub coeff_off_line: f64,
    pub coeff_line_change: f64,
    pub coeff_within_line: f64,
    pub coeff_outside: f64,
}

impl Default for Etk {
    fn default() -> Self {
        Self {
            fixations: String::new(),
            text: String::new(),
            x0: 100.0,
            char_width: 10.0,
            line_centers: Vec::new(),
            line_height: 20.0,
            pool: true,
            drift: true,
            grid_xs: Vec::new(),
            grid_ys: Vec::new(),
            coeff_calibration: 0.01,
            coeff_off_line: 1.0,
            coeff_line_change: 0.2,
            coeff_within_line: 0.05,
            coeff_outside: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Run {
    pub seed: u64,
}

impl Default for Run {
    fn default() -> Self {
        Self { seed: 2025 }
    }
}

impl RunConfig {
    /// Parses the file, applies `key=value` overrides onto the TOML tree,
    /// applies the output-dir environment override, and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("config", format!("{}: {e}", path.display())))?;
        let mut tree: toml::Value = text
            .parse()
            .map_err(|e| err("config", format!("{}: {e}", path.display())))?;
        for spec in overrides {
            apply_override(&mut tree, spec)?;
        }
        let mut cfg: RunConfig = tree
            .try_into()
            .map_err(|e| err("config", e.to_string()))?;
        if let Ok(dir) = std::env::var("SKIPREAD_OUT_DIR") {
            if !dir.is_empty() {
                cfg.paths.out_dir = dir;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The canonical TOML text of the effective configuration.
    pub fn canonical(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| err("config", e.to_string()))
    }

    pub fn sha256(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(self.canonical()?.as_bytes());
        Ok(format!("{:x}", h.finalize()))
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.paths.out_dir)
    }

    pub fn validate(&self) -> Result<()> {
        // every referenced input must exist up front
        let mut inputs: Vec<(&str, &str)> = vec![
            ("paths.cloze", &self.paths.cloze),
            ("paths.embeddings", &self.paths.embeddings),
            ("paths.gold", &self.paths.gold),
            ("paths.sim", &self.paths.sim),
            ("etk.fixations", &self.etk.fixations),
            ("etk.text", &self.etk.text),
        ];
        let corpus_fields: Vec<String> =
            (0..self.paths.corpus.len()).map(|i| format!("paths.corpus[{i}]")).collect();
        for (f, p) in corpus_fields.iter().zip(&self.paths.corpus) {
            inputs.push((f, p));
        }
        for (field, p) in inputs {
            if !p.is_empty() && !Path::new(p).exists() {
                return Err(err(field, format!("path `{p}` does not exist")));
            }
        }

        let positive = |field: &str, v: usize| -> Result<()> {
            if v == 0 {
                return Err(err(field, "must be positive"));
            }
            Ok(())
        };
        positive("model.vocab", self.model.vocab)?;
        positive("model.emb", self.model.emb)?;
        positive("model.hidden", self.model.hidden)?;
        positive("model.attn_hidden", self.model.attn_hidden)?;
        positive("model.baseline_cells", self.model.baseline_cells)?;
        positive("model.qa_cells", self.model.qa_cells)?;
        positive("model.qa_clip_len", self.model.qa_clip_len)?;
        positive("phase1.epochs", self.phase1.epochs)?;
        positive("tradeoff.batch", self.tradeoff.batch)?;
        positive("qa_head.epochs", self.qa_head.epochs)?;
        positive("qa_tradeoff.batch", self.qa_tradeoff.batch)?;
        positive("sweep.runs", self.sweep.runs)?;
        positive("sweep.threads", self.sweep.threads)?;
        if self.model.window < 7 {
            return Err(err("model.window", "must be at least 7"));
        }
        if self.model.vocab <= skipread::corpus::RESERVED.len() {
            return Err(err("model.vocab", "too small for the reserved symbols"));
        }

        if !(self.phase1.keep_rate > 0.0 && self.phase1.keep_rate <= 1.0) {
            return Err(err(
                "phase1.keep_rate",
                format!("{} outside (0, 1]", self.phase1.keep_rate),
            ));
        }
        let momenta = [
            ("phase1.momentum", self.phase1.momentum),
            ("tradeoff.momentum", self.tradeoff.momentum),
            ("qa_head.momentum", self.qa_head.momentum),
            ("qa_tradeoff.momentum", self.qa_tradeoff.momentum),
        ];
        for (field, m) in momenta {
            if !(0.0..1.0).contains(&m) {
                return Err(err(field, format!("{m} outside [0, 1)")));
            }
        }
        let alphas = [
            ("tradeoff.alpha", self.tradeoff.alpha),
            ("qa_tradeoff.alpha", self.qa_tradeoff.alpha),
        ];
        for (field, a) in alphas {
            if !a.is_finite() || a < 0.0 {
                return Err(err(field, format!("{a} is not a nonnegative price")));
            }
        }
        for (i, &a) in self.sweep.grid.iter().enumerate() {
            if !a.is_finite() || a < 0.0 {
                return Err(err(
                    "sweep.grid",
                    format!("entry {i} ({a}) is not a nonnegative price"),
                ));
            }
        }
        let rates = [
            ("sweep.target_rate", self.sweep.target_rate),
            ("eval.target_rate", self.eval.target_rate),
        ];
        for (field, r) in rates {
            if !(r > 0.0 && r < 1.0) {
                return Err(err(field, format!("{r} outside (0, 1)")));
            }
        }
        skipread::qa::ScoreForm::parse(&self.qa_tradeoff.score_form)?;
        self.lm_tradeoff().validate()?;
        self.qa_tradeoff_config().validate()?;
        self.qa_head_config().validate()?;

        if !(0.0..1.0).contains(&self.qa_head.feature_decay) {
            return Err(err(
                "qa_head.feature_decay",
                format!("{} outside [0, 1)", self.qa_head.feature_decay),
            ));
        }
        Ok(())
    }

    // section → library config adapters

    pub fn phase1_config(&self) -> skipread::lm::Phase1Config {
        skipread::lm::Phase1Config {
            epochs: self.phase1.epochs,
            keep_rate: self.phase1.keep_rate,
            lr: self.phase1.lr,
            momentum: self.phase1.momentum,
            heldout_every: self.phase1.heldout_every,
        }
    }

    pub fn lm_tradeoff(&self) -> skipread::policy::TradeoffConfig {
        skipread::policy::TradeoffConfig {
            alpha: self.tradeoff.alpha,
            entropy_weight: self.tradeoff.entropy_weight,
            lr: self.tradeoff.lr,
            momentum: self.tradeoff.momentum,
            baseline_lr: self.tradeoff.baseline_lr,
            clip_norm: self.tradeoff.clip_norm,
            batch: self.tradeoff.batch,
        }
    }

    pub fn qa_head_config(&self) -> skipread::qa::HeadConfig {
        skipread::qa::HeadConfig {
            epochs: self.qa_head.epochs,
            lr: self.qa_head.lr,
            momentum: self.qa_head.momentum,
            start_rate: self.qa_head.start_rate,
            end_rate: self.qa_head.end_rate,
        }
    }

    pub fn qa_tradeoff_config(&self) -> skipread::qa::QaTradeoffConfig {
        skipread::qa::QaTradeoffConfig {
            alpha: self.qa_tradeoff.alpha,
            entropy_weight: self.qa_tradeoff.entropy_weight,
            lr: self.qa_tradeoff.lr,
            momentum: self.qa_tradeoff.momentum,
            batch: self.qa_tradeoff.batch,
        }
    }

    pub fn score_form(&self) -> skipread::qa::ScoreForm {
        // validated at load
        skipread::qa::ScoreForm::parse(&self.qa_tradeoff.score_form).unwrap()
    }

    pub fn sweep_grid(&self) -> Vec<f64> {
        if self.sweep.grid.is_empty() {
            skipread::qa::alpha_grid()
        } else {
            self.sweep.grid.clone()
        }
    }

    pub fn sim_path(&self) -> PathBuf {
        if self.paths.sim.is_empty() {
            self.out_dir().join("sim.jsonl")
        } else {
            PathBuf::from(&self.paths.sim)
        }
    }
}

/// `section.key=value`; the value is parsed as a TOML literal (so arrays and
/// strings work) and falls back to a bare string.
fn apply_override(tree: &mut toml::Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| err("--set", format!("`{spec}` is not key=value")))?;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(err("--set", format!("bad key `{key}`")));
    }
    let value: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = tree;
    for p in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| err("--set", format!("`{key}` crosses a non-table value")))?;
        node = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| err("--set", format!("`{key}` crosses a non-table value")))?;
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
