//! Deterministic synthetic corpora sized for desk runs. Two languages:
//!
//! * Echo language (LM studies): content tokens drawn uniformly, each
//!   followed by a fixed number of echo tokens fully determined by it
//!   (`c7 x7a x7b c2 x2a x2b ...`). A competent reader drives the surprisal
//!   of echo positions to ~0, and a competent policy skips them.
//!
//! * Cue cloze (QA studies): texts made of filler runs and cue–entity facts
//!   (`... cue3 @entity5 ...`); the question repeats one cue with a
//!   placeholder, and the answer is the entity paired with that cue. The cue
//!   occurs in both question and text, so question-overlap features mark
//!   exactly the spans worth fixating.

use crate::corpus::RawTriple;
use crate::rng::Rng;
use rand::seq::SliceRandom;
use rand::Rng as _;

// ─── Echo language ─────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct EchoConfig {
    pub content_symbols: usize,
    pub echo_len: usize,
    pub docs: usize,
    pub doc_len: usize,
}

impl Default for EchoConfig {
    fn default() -> Self {
        Self { content_symbols: 10, echo_len: 2, docs: 12, doc_len: 120 }
    }
}

pub fn echo_corpus(cfg: &EchoConfig, rng: &mut Rng) -> Vec<Vec<String>> {
    (0..cfg.docs)
        .map(|_| {
            let mut doc = Vec::with_capacity(cfg.doc_len);
            while doc.len() < cfg.doc_len {
                let c = rng.gen_range(0..cfg.content_symbols);
                doc.push(format!("c{c}"));
                for j in 0..cfg.echo_len {
                    if doc.len() >= cfg.doc_len {
                        break;
                    }
                    doc.push(format!("x{c}{}", (b'a' + j as u8) as char));
                }
            }
            doc
        })
        .collect()
}

/// True at positions whose token is fully determined by its predecessor
/// (echo positions that directly follow their content token or an earlier
/// echo of the same group).
pub fn echo_determined_mask(doc: &[String]) -> Vec<bool> {
    doc.iter()
        .enumerate()
        .map(|(i, t)| i > 0 && t.starts_with('x'))
        .collect()
}

pub fn write_corpus(path: &std::path::Path, docs: &[Vec<String>]) -> crate::Result<()> {
    let text = docs
        .iter()
        .map(|d| d.join(" "))
        .collect::<Vec<_>>()
        .join("\n\n");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

// ─── Cue cloze ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ClozeConfig {
    pub entities: usize,
    pub cues: usize,
    pub fillers: usize,
    pub facts_per_text: usize,
    /// filler tokens before each fact and after the last (±1 jitter)
    pub filler_run: usize,
    pub examples: usize,
}

impl Default for ClozeConfig {
    fn default() -> Self {
        Self { entities: 8, cues: 8, fillers: 12, facts_per_text: 2, filler_run: 3, examples: 400 }
    }
}

pub fn cloze_corpus(cfg: &ClozeConfig, rng: &mut Rng) -> Vec<RawTriple> {
    assert!(cfg.facts_per_text >= 1);
    assert!(cfg.cues >= cfg.facts_per_text && cfg.entities >= cfg.facts_per_text);
    let mut out = Vec::with_capacity(cfg.examples);
    for _ in 0..cfg.examples {
        let mut cues: Vec<usize> = (0..cfg.cues).collect();
        cues.shuffle(rng);
        cues.truncate(cfg.facts_per_text);
        let mut ents: Vec<usize> = (0..cfg.entities).collect();
        ents.shuffle(rng);
        ents.truncate(cfg.facts_per_text);

        let mut text: Vec<String> = Vec::new();
        let push_fillers = |text: &mut Vec<String>, rng: &mut Rng| {
            let n = cfg.filler_run + rng.gen_range(0..2);
            for _ in 0..n {
                text.push(format!("f{}", rng.gen_range(0..cfg.fillers)));
            }
        };
        for k in 0..cfg.facts_per_text {
            push_fillers(&mut text, rng);
            text.push(format!("cue{}", cues[k]));
            text.push(format!("@entity{}", ents[k]));
        }
        push_fillers(&mut text, rng);

        let asked = rng.gen_range(0..cfg.facts_per_text);
        let question = vec![format!("cue{}", cues[asked]), "@placeholder".to_string()];
        let answer = format!("@entity{}", ents[asked]);
        let entities: Vec<String> = ents.iter().map(|e| format!("@entity{e}")).collect();
        out.push(RawTriple { text, question, answer, entities });
    }
    out
}

pub fn write_cloze_jsonl(path: &std::path::Path, triples: &[RawTriple]) -> crate::Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    for t in triples {
        let j = serde_json::json!({
            "text": t.text.join(" "),
            "question": t.question.join(" "),
            "answer": t.answer,
            "entities": t.entities,
        });
        writeln!(out, "{j}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}
