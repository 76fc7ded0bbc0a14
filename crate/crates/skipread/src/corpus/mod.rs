//! Text ingestion: whitespace tokenization, frequency-ranked vocabularies,
//! fixed-length windows for the LM reader, cloze QA triples, and embedding
//! tables.

mod cloze;
mod embed;
mod vocab;
mod window;

pub use cloze::{
    encode_qa, load_triples, parse_deepmind_file, parse_jsonl, EntityVocab, QAExample, RawTriple,
};
pub use embed::EmbeddingStore;
pub use vocab::{Vocabulary, BOS, BOS_ID, EOS, EOS_ID, OOV, OOV_ID, RESERVED, SKIP, SKIP_ID};
pub use window::{window_split, TokenWindow};

use crate::Result;
use std::path::Path;

/// Whitespace tokenization of one document.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(|t| t.to_string()).collect()
}

/// Loads a plain-text corpus: each file holds one document, or several
/// separated by blank lines. Returns one token vector per document.
pub fn load_plain_corpus(paths: &[impl AsRef<Path>]) -> Result<Vec<Vec<String>>> {
    let mut docs = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p.as_ref())?;
        for chunk in split_blank_lines(&text) {
            let toks = tokenize(&chunk);
            if !toks.is_empty() {
                docs.push(toks);
            }
        }
    }
    Ok(docs)
}

fn split_blank_lines(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.trim().is_empty() {
                out.push(std::mem::take(&mut cur));
            } else {
                cur.clear();
            }
        } else {
            cur.push_str(line);
            cur.push('\n');
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur);
    }
    out
}
