//! Windowed language modeling with hard attention. A reader LSTM consumes a
//! fixed-length window left to right; at skipped positions it sees the
//! `<skip>` placeholder embedding instead of the word. Its state before each
//! position yields the next-word distribution P_R. After the window, a
//! decoder LSTM — conditioned on the reader's final state as both initial
//! hidden and cell state — reconstructs the window under teacher forcing.
//! The sequence loss is the sum of both negative log-likelihoods.

mod model;
mod train;

pub use model::{
    full_surprisal, read_window, restricted_surprisal, sequence_loss, sequence_loss_backward,
    LmDims, ReaderLm, ReaderTrace, SequenceLoss,
};
pub use train::{split_heldout, train_phase1, write_log_jsonl, EpochLog, Phase1Config};
