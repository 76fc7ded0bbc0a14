//! Published full-corpus reference numbers, reported alongside desk-scale
//! results for context. Desk-scale runs on synthetic data do not reproduce
//! them; they are constants, not targets.

/// Fixation-sequence perplexity on the eye-tracking corpus (dev).
pub const PPL_MODEL: f64 = 1.84;
pub const PPL_RANDOM: f64 = 1.96;
pub const PPL_PER_WORD_RATE: f64 = 1.68;

/// Mean per-reader fixation rate of the eye-tracking corpus dev split.
pub const DEV_FIXATION_RATE: f64 = 0.621;

/// Discretized-evaluation scores (accuracy, F_fixated, F_skipped), percent.
pub const DISC_MODEL: (f64, f64, f64) = (63.7, 70.4, 53.0);
pub const DISC_RANDOM: (f64, f64, f64) = (52.6, 62.1, 37.9);
pub const DISC_FULL_SURPRISAL: (f64, f64, f64) = (64.1, 70.7, 53.6);
pub const DISC_WORD_FREQUENCY: (f64, f64, f64) = (67.9, 74.0, 58.3);
pub const DISC_WORD_LENGTH: (f64, f64, f64) = (68.4, 77.1, 49.0);
pub const DISC_HUMAN: (f64, f64, f64) = (69.5, 76.6, 53.6);

/// Conditional fixation ratio P(fix_i | fix_{i-1}) / P(fix_i).
pub const COND_RATIO_HUMAN: f64 = 0.85;
pub const COND_RATIO_MODEL: f64 = 0.81;
pub const COND_RATIO_FREQ_BASELINE: f64 = 0.91;

/// Cloze QA at full scale: full-attention accuracy and the operating point
/// chosen on the tradeoff curve (alpha = 2.25).
pub const QA_FULL_ATTENTION_ACC: f64 = 0.618;
pub const QA_RATE_NO_PREVIEW: f64 = 0.43;
pub const QA_RATE_PREVIEW: f64 = 0.32;
pub const QA_ACC_NO_PREVIEW: f64 = 0.52;
pub const QA_ACC_PREVIEW: f64 = 0.55;
pub const QA_ACC_RANDOM_AT_043: f64 = 0.38;
pub const QA_CHOSEN_ALPHA: f64 = 2.25;

/// Human fixation rates in the cloze reading experiment.
pub const HUMAN_RATE_NO_PREVIEW: f64 = 0.50;
pub const HUMAN_RATE_PREVIEW: f64 = 0.34;
