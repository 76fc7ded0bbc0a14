use super::tokenize;
use super::vocab::Vocabulary;
use crate::{Error, Result};
use serde::Deserialize;
use std::collections::HashMap;
use std::path::Path;

pub const ENTITY_PREFIX: &str = "@entity";
pub const PLACEHOLDER: &str = "@placeholder";

/// A cloze record as parsed from disk, before any vocabulary is applied.
#[derive(Debug, Clone)]
pub struct RawTriple {
    pub text: Vec<String>,
    pub question: Vec<String>,
    pub answer: String,
    /// anonymized entity tokens known to this record
    pub entities: Vec<String>,
}

/// Dataset-level registry of anonymized entities. The answer distribution
/// ranges over every entity here, not just the ones in a given text.
#[derive(Debug, Clone, Default)]
pub struct EntityVocab {
    ids: HashMap<String, usize>,
    names: Vec<String>,
}

impl EntityVocab {
    pub fn build(triples: &[RawTriple]) -> Self {
        let mut ev = EntityVocab::default();
        for t in triples {
            for e in &t.entities {
                ev.intern(e);
            }
            ev.intern(&t.answer);
        }
        ev
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.ids.insert(name.to_string(), id);
        self.names.push(name.to_string());
        id
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name_of(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// One encoded cloze example. Texts longer than the clip length are cut; the
/// example is retained even if clipping removed every occurrence of the
/// answer (the per-token answer flags are then all false).
#[derive(Debug, Clone)]
pub struct QAExample {
    pub text: Vec<usize>,
    pub text_tokens: Vec<String>,
    pub question: Vec<usize>,
    pub question_tokens: Vec<String>,
    /// entity-vocabulary id of the correct answer
    pub answer: usize,
    /// entity-vocabulary ids this record declared
    pub candidates: Vec<usize>,
    /// per text token: is an anonymized entity
    pub is_entity: Vec<bool>,
    /// per text token: is an occurrence of the answer
    pub is_answer: Vec<bool>,
}

/// DeepMind-style story file: url / text / question / answer separated by
/// blank lines, then one `entity:original` mapping per line.
pub fn parse_deepmind_file(path: &Path, index: usize) -> Result<RawTriple> {
    let content = std::fs::read_to_string(path)?;
    let mut sections: Vec<String> = Vec::new();
    let mut cur = String::new();
    for line in content.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                sections.push(std::mem::take(&mut cur));
            }
        } else {
            if !cur.is_empty() {
                cur.push('\n');
            }
            cur.push_str(line);
        }
    }
    if !cur.is_empty() {
        sections.push(cur);
    }
    if sections.len() < 4 {
        return Err(Error::MalformedRecord {
            index,
            reason: format!(
                "expected url/text/question/answer sections, found {}",
                sections.len()
            ),
        });
    }
    let text = tokenize(&sections[1]);
    let question = tokenize(&sections[2]);
    let answer = sections[3].trim().to_string();
    let mut entities = Vec::new();
    if let Some(map) = sections.get(4) {
        for line in map.lines() {
            if let Some((ent, _orig)) = line.split_once(':') {
                entities.push(ent.trim().to_string());
            }
        }
    }
    if entities.is_empty() {
        // no explicit map: collect marker-prefixed tokens from the text
        let mut seen = std::collections::BTreeSet::new();
        for t in text.iter().chain(&question) {
            if t.starts_with(ENTITY_PREFIX) {
                seen.insert(t.clone());
            }
        }
        entities = seen.into_iter().collect();
    }
    Ok(RawTriple { text, question, answer, entities })
}

#[derive(Deserialize)]
struct JsonTriple {
    text: String,
    question: String,
    answer: String,
    entities: Vec<String>,
}

/// Compact alternative: one JSON object per line with fields
/// {text, question, answer, entities}.
pub fn parse_jsonl(path: &Path) -> Result<Vec<RawTriple>> {
    let content = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let j: JsonTriple = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            index: i,
            reason: format!("bad json: {e}"),
        })?;
        out.push(RawTriple {
            text: tokenize(&j.text),
            question: tokenize(&j.question),
            answer: j.answer,
            entities: j.entities,
        });
    }
    Ok(out)
}

/// Loads triples from a path: a `.jsonl` file, a single story file, or a
/// directory of story files (sorted by name for determinism).
pub fn load_triples(path: &Path) -> Result<Vec<RawTriple>> {
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut out = Vec::new();
        for (i, f) in files.iter().enumerate() {
            if f.extension().is_some_and(|e| e == "jsonl") {
                out.extend(parse_jsonl(f)?);
            } else {
                out.push(parse_deepmind_file(f, i)?);
            }
        }
        Ok(out)
    } else if path.extension().is_some_and(|e| e == "jsonl") {
        parse_jsonl(path)
    } else {
        Ok(vec![parse_deepmind_file(path, 0)?])
    }
}

/// Validates and encodes one triple against the word and entity vocabularies.
pub fn encode_qa(
    raw: &RawTriple,
    index: usize,
    vocab: &Vocabulary,
    entities: &EntityVocab,
    clip_len: usize,
) -> Result<QAExample> {
    let placeholders = raw.question.iter().filter(|t| *t == PLACEHOLDER).count();
    if placeholders != 1 {
        return Err(Error::MalformedRecord {
            index,
            reason: format!("question has {placeholders} placeholders, expected exactly 1"),
        });
    }
    if !raw.entities.contains(&raw.answer) {
        return Err(Error::MalformedRecord {
            index,
            reason: format!("answer {} not among record entities", raw.answer),
        });
    }
    let answer = entities.id_of(&raw.answer).ok_or_else(|| Error::MalformedRecord {
        index,
        reason: format!("answer {} missing from entity vocabulary", raw.answer),
    })?;

    let text_tokens: Vec<String> = raw.text.iter().take(clip_len).cloned().collect();
    let is_entity: Vec<bool> = text_tokens
        .iter()
        .map(|t| t.starts_with(ENTITY_PREFIX))
        .collect();
    let is_answer: Vec<bool> = text_tokens.iter().map(|t| *t == raw.answer).collect();
    let candidates: Vec<usize> = raw
        .entities
        .iter()
        .filter_map(|e| entities.id_of(e))
        .collect();

    Ok(QAExample {
        text: vocab.encode(&text_tokens),
        text_tokens,
        question: vocab.encode(&raw.question),
        question_tokens: raw.question.clone(),
        answer,
        candidates,
        is_entity,
        is_answer,
    })
}
