// skipread: models of reading that trade off skipping against task performance.
//
// A hard-attention policy decides word by word whether to fixate or skip; the
// text model only sees fixated words (skipped positions are replaced by a
// placeholder embedding). Two instantiations: a language-model reader trained
// to reconstruct 50-token windows, and a question-answering reader over cloze
// passages. Both train the policy with score-function (REINFORCE) gradients
// against an economy term that prices each fixation.
//
// Module map:
//   nn       - tensors, LSTM/dense layers with hand-derived gradients, SGD,
//              finite-difference checking, checkpoint container
//   corpus   - vocabulary, fixed-length windows, cloze triples, embeddings
//   lm       - reader + reconstruction decoder (windowed language modeling)
//   policy   - fixate/skip network for the LM reader, REINFORCE training
//   qa       - cloze QA head, logistic fixate/skip policy, alpha sweeps
//   eval     - fixation metrics, rescaling, baselines, heatmaps, exports
//   etk      - eye-tracking preprocessing: pooling, reading measures, drift
//   synth    - deterministic synthetic corpora for desk-scale runs and tests

pub mod checkpoint;
pub mod corpus;
pub mod error;
pub mod etk;
pub mod eval;
pub mod lm;
pub mod nn;
pub mod policy;
pub mod qa;
pub mod reference;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
