use crate::corpus::{EmbeddingStore, TokenWindow, BOS_ID, SKIP_ID};
use crate::impl_parameterized;
use crate::nn::{axpy, safe_ln, softmax, softmax_xent_grad, Dense, LstmCell, LstmRun};
use crate::rng::Rng;

/// Dimensions of the windowed LM. Desk-scale defaults; the published setup
/// (hidden 1000, embeddings 100, vocabulary 10000) is reachable via config.
#[derive(Debug, Clone, Copy)]
pub struct LmDims {
    pub vocab: usize,
    pub emb: usize,
    pub hidden: usize,
}

/// Reader + reconstruction decoder with a shared embedding table.
#[derive(Debug, Clone)]
pub struct ReaderLm {
    pub emb: EmbeddingStore,
    pub reader: LstmCell,
    pub reader_out: Dense,
    pub decoder: LstmCell,
    pub decoder_out: Dense,
}

impl_parameterized!(ReaderLm {
    "emb" => emb.table,
    "reader.w_ih" => reader.w_ih,
    "reader.w_hh" => reader.w_hh,
    "reader.bias" => reader.bias,
    "reader_out.w" => reader_out.w,
    "reader_out.b" => reader_out.b,
    "decoder.w_ih" => decoder.w_ih,
    "decoder.w_hh" => decoder.w_hh,
    "decoder.bias" => decoder.bias,
    "decoder_out.w" => decoder_out.w,
    "decoder_out.b" => decoder_out.b,
});

impl ReaderLm {
    pub fn new(dims: LmDims, rng: &mut Rng, init_bound: f64) -> Self {
        let mut emb = EmbeddingStore::random(dims.vocab, dims.emb, rng, init_bound);
        emb.trainable = true;
        let mut reader = LstmCell::zeros(dims.emb, dims.hidden);
        let mut reader_out = Dense::zeros(dims.hidden, dims.vocab);
        let mut decoder = LstmCell::zeros(dims.emb, dims.hidden);
        let mut decoder_out = Dense::zeros(dims.hidden, dims.vocab);
        reader.init_uniform(rng, init_bound);
        reader_out.init_uniform(rng, init_bound);
        decoder.init_uniform(rng, init_bound);
        decoder_out.init_uniform(rng, init_bound);
        Self { emb, reader, reader_out, decoder, decoder_out }
    }

    pub fn dims(&self) -> LmDims {
        LmDims {
            vocab: self.emb.vocab_len(),
            emb: self.emb.dim,
            hidden: self.reader.hidden_dim,
        }
    }
}

/// The reader's forward pass over one window under a fixation mask.
/// `probs[i]` is P_R(w_i | visible prefix) — computed from the state *before*
/// position i — and `hs[i]` the state after consuming (masked) position i,
/// with `hs` starting at the zero initial state.
pub struct ReaderTrace {
    pub omega: Vec<u8>,
    pub input_ids: Vec<usize>,
    pub probs: Vec<Vec<f64>>,
    run: LstmRun,
}

impl ReaderTrace {
    pub fn h(&self, i: usize) -> &[f64] {
        &self.run.hs[i]
    }

    pub fn final_h(&self) -> &[f64] {
        self.run.final_h()
    }

    pub fn len(&self) -> usize {
        self.run.len()
    }

    pub fn is_empty(&self) -> bool {
        self.run.is_empty()
    }
}

fn masked_input_ids(ids: &[usize], omega: &[u8]) -> Vec<usize> {
    ids.iter()
        .zip(omega)
        .map(|(&id, &w)| if w == 1 { id } else { SKIP_ID })
        .collect()
}

/// Runs the reader over `window` under `omega` (1 = fixate, 0 = skip).
/// Skipped positions contribute only the placeholder embedding: the word
/// identity at a skipped position cannot reach any output.
pub fn read_window(lm: &ReaderLm, window: &TokenWindow, omega: &[u8]) -> ReaderTrace {
    assert_eq!(window.ids.len(), omega.len(), "mask length != window length");
    assert!(omega.iter().all(|&w| w <= 1), "mask entries must be 0/1");
    let input_ids = masked_input_ids(&window.ids, omega);
    let xs: Vec<Vec<f64>> = input_ids.iter().map(|&id| lm.emb.lookup(id).to_vec()).collect();
    let hd = lm.reader.hidden_dim;
    let run = LstmRun::forward(&lm.reader, &xs, vec![0.0; hd], vec![0.0; hd]);
    let probs: Vec<Vec<f64>> = (0..window.ids.len())
        .map(|i| softmax(&lm.reader_out.forward(&run.hs[i])))
        .collect();
    ReaderTrace { omega: omega.to_vec(), input_ids, probs, run }
}

/// Surprisal of each window token under the restricted (mask-respecting)
/// next-word distribution: -ln P_R(w_i | visible prefix), in nats.
pub fn restricted_surprisal(trace: &ReaderTrace, window: &TokenWindow) -> Vec<f64> {
    window
        .ids
        .iter()
        .enumerate()
        .map(|(i, &w)| -safe_ln(trace.probs[i][w]))
        .collect()
}

/// Surprisal under full attention via a dedicated unmasked pass (no fixation
/// mask is consulted anywhere on this path).
pub fn full_surprisal(lm: &ReaderLm, window: &TokenWindow) -> Vec<f64> {
    let xs: Vec<Vec<f64>> = window.ids.iter().map(|&id| lm.emb.lookup(id).to_vec()).collect();
    let hd = lm.reader.hidden_dim;
    let run = LstmRun::forward(&lm.reader, &xs, vec![0.0; hd], vec![0.0; hd]);
    window
        .ids
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let probs = softmax(&lm.reader_out.forward(&run.hs[i]));
            -safe_ln(probs[w])
        })
        .collect()
}

/// Reconstruction decoder pass: teacher-forced on gold tokens (`<s>` first),
/// conditioned on the reader's final state as initial hidden and cell state.
struct DecoderPass {
    input_ids: Vec<usize>,
    probs: Vec<Vec<f64>>,
    run: LstmRun,
}

fn decode_window(lm: &ReaderLm, window: &TokenWindow, h_n: &[f64]) -> DecoderPass {
    let mut input_ids = Vec::with_capacity(window.ids.len());
    input_ids.push(BOS_ID);
    input_ids.extend_from_slice(&window.ids[..window.ids.len() - 1]);
    let xs: Vec<Vec<f64>> = input_ids.iter().map(|&id| lm.emb.lookup(id).to_vec()).collect();
    let run = LstmRun::forward(&lm.decoder, &xs, h_n.to_vec(), h_n.to_vec());
    let probs: Vec<Vec<f64>> = (0..window.ids.len())
        .map(|i| softmax(&lm.decoder_out.forward(&run.hs[i])))
        .collect();
    DecoderPass { input_ids, probs, run }
}

pub struct SequenceLoss {
    pub total: f64,
    pub reader_nll: f64,
    pub decoder_nll: f64,
    pub trace: ReaderTrace,
}

/// L(omega | w) = sum_i -ln P_R(w_i | visible prefix)
///             + sum_i -ln P_Dec(w_i | w_{<i}; h_N).
pub fn sequence_loss(lm: &ReaderLm, window: &TokenWindow, omega: &[u8]) -> SequenceLoss {
    let trace = read_window(lm, window, omega);
    let reader_nll: f64 = restricted_surprisal(&trace, window).iter().sum();
    let dec = decode_window(lm, window, trace.final_h());
    let decoder_nll: f64 = window
        .ids
        .iter()
        .enumerate()
        .map(|(i, &w)| -safe_ln(dec.probs[i][w]))
        .sum();
    SequenceLoss { total: reader_nll + decoder_nll, reader_nll, decoder_nll, trace }
}

/// Forward + full backward for one window. Gradients accumulate into `grads`
/// (a zeroed clone of the model); embedding rows only accumulate while the
/// store is marked trainable. Returns the loss breakdown.
pub fn sequence_loss_backward(
    lm: &ReaderLm,
    window: &TokenWindow,
    omega: &[u8],
    grads: &mut ReaderLm,
) -> SequenceLoss {
    let n = window.ids.len();
    let trace = read_window(lm, window, omega);
    let reader_nll: f64 = restricted_surprisal(&trace, window).iter().sum();
    let dec = decode_window(lm, window, trace.final_h());
    let decoder_nll: f64 = window
        .ids
        .iter()
        .enumerate()
        .map(|(i, &w)| -safe_ln(dec.probs[i][w]))
        .sum();

    let hd = lm.reader.hidden_dim;

    // Decoder side. The head for token i reads decoder state hs[i]; i = 0
    // reads the initial state, whose gradient joins the h_N chain directly.
    let mut dec_dhs = vec![vec![0.0; hd]; n];
    let mut dh_init = vec![0.0; hd];
    for i in 0..n {
        let dlogits = softmax_xent_grad(&dec.probs[i], window.ids[i]);
        let dh = lm.decoder_out.backward(&dec.run.hs[i], &dlogits, &mut grads.decoder_out);
        if i == 0 {
            add_into(&mut dh_init, &dh);
        } else {
            add_into(&mut dec_dhs[i - 1], &dh);
        }
    }
    let (dec_dxs, dec_dh0, dec_dc0) =
        dec.run.backward(&lm.decoder, &dec_dhs, &vec![0.0; hd], &mut grads.decoder);
    if lm.emb.trainable {
        for (i, dx) in dec_dxs.iter().enumerate() {
            axpy(grads.emb.table.row_mut(dec.input_ids[i]), 1.0, dx);
        }
    }

    // h_N receives the decoder's initial hidden and cell chains.
    let mut dh_n = dh_init;
    add_into(&mut dh_n, &dec_dh0);
    add_into(&mut dh_n, &dec_dc0);

    // Reader side. Head i reads hs[i]: i = 0 is the zero initial state (its
    // chain gradient is discarded, but the projection's bias still learns);
    // the decoder's h_N gradient lands on the last step's output.
    let mut rdr_dhs = vec![vec![0.0; hd]; n];
    for i in 0..n {
        let dlogits = softmax_xent_grad(&trace.probs[i], window.ids[i]);
        let dh = lm.reader_out.backward(trace.h(i), &dlogits, &mut grads.reader_out);
        if i > 0 {
            add_into(&mut rdr_dhs[i - 1], &dh);
        }
    }
    add_into(&mut rdr_dhs[n - 1], &dh_n);
    let (rdr_dxs, _dh0, _dc0) =
        trace.run.backward(&lm.reader, &rdr_dhs, &vec![0.0; hd], &mut grads.reader);
    if lm.emb.trainable {
        for (i, dx) in rdr_dxs.iter().enumerate() {
            axpy(grads.emb.table.row_mut(trace.input_ids[i]), 1.0, dx);
        }
    }

    SequenceLoss { total: reader_nll + decoder_nll, reader_nll, decoder_nll, trace }
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
