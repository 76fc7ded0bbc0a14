use super::vocab::Vocabulary;
use crate::nn::Tensor;
use crate::{Error, Result};
use std::path::Path;

/// One embedding row per vocabulary id (reserved symbols included — the
/// `<skip>` placeholder row is a real, learnable embedding). In LM training
/// the table is trainable and then frozen; in QA mode rows come from a
/// pre-trained text file and stay fixed.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    pub dim: usize,
    /// [V, D]
    pub table: Tensor,
    pub trainable: bool,
}

impl EmbeddingStore {
    pub fn random(vocab_len: usize, dim: usize, rng: &mut crate::rng::Rng, bound: f64) -> Self {
        let mut table = Tensor::zeros(vec![vocab_len, dim]);
        table.init_uniform(rng, bound);
        Self { dim, table, trainable: true }
    }

    pub fn lookup(&self, id: usize) -> &[f64] {
        self.table.row(id)
    }

    pub fn vocab_len(&self) -> usize {
        self.table.shape[0]
    }

    /// Text format: one row per line, `token v1 v2 ... vD`. Tokens absent
    /// from the file (reserved symbols included) get seeded random rows so a
    /// partial file still yields a complete table.
    pub fn load_text(
        path: &Path,
        vocab: &Vocabulary,
        dim: usize,
        rng: &mut crate::rng::Rng,
        fill_bound: f64,
    ) -> Result<Self> {
        let mut store = Self::random(vocab.len(), dim, rng, fill_bound);
        store.trainable = false;
        let content = std::fs::read_to_string(path)?;
        for (lineno, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().ok_or_else(|| Error::MalformedRecord {
                index: lineno,
                reason: "empty embedding row".into(),
            })?;
            let vals: Vec<f64> = parts
                .map(|v| {
                    v.parse::<f64>().map_err(|e| Error::MalformedRecord {
                        index: lineno,
                        reason: format!("bad float {v}: {e}"),
                    })
                })
                .collect::<Result<_>>()?;
            if vals.len() != dim {
                return Err(Error::MalformedRecord {
                    index: lineno,
                    reason: format!("row has {} values, expected {dim}", vals.len()),
                });
            }
            if !vals.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("embedding row {lineno}")));
            }
            if vocab.contains(token) {
                let id = vocab.id_of(token);
                store.table.row_mut(id).copy_from_slice(&vals);
            }
        }
        Ok(store)
    }

    pub fn save_text(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        use std::fmt::Write as _;
        let mut out = String::new();
        for id in 0..self.vocab_len() {
            out.push_str(vocab.token_of(id));
            for v in self.lookup(id) {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}
