use crate::{Error, Result};
use std::collections::HashMap;

/// Reserved symbols. `<oov>` absorbs out-of-vocabulary tokens, `<skip>` is
/// the placeholder embedding fed to the reader for skipped words, `<s>` and
/// `</s>` delimit sequences (the reconstruction decoder starts from `<s>`).
pub const OOV: &str = "<oov>";
pub const SKIP: &str = "<skip>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const RESERVED: [&str; 4] = [OOV, SKIP, BOS, EOS];

pub const OOV_ID: usize = 0;
pub const SKIP_ID: usize = 1;
pub const BOS_ID: usize = 2;
pub const EOS_ID: usize = 3;

/// Frequency-ranked vocabulary: the K most frequent tokens of the training
/// stream, ties broken toward the earlier first occurrence. Reserved symbols
/// sit at fixed ids; by default they are extra beyond K (configurable to
/// count against it).
#[derive(Debug, Clone)]
pub struct Vocabulary {
    ids: HashMap<String, usize>,
    tokens: Vec<String>,
    counts: Vec<u64>,
    total: u64,
}

impl Vocabulary {
    /// `k` content slots (or `k - RESERVED.len()` when `reserved_within_k`).
    pub fn build<'a>(
        stream: impl IntoIterator<Item = &'a str>,
        k: usize,
        reserved_within_k: bool,
    ) -> Result<Self> {
        let mut counts: HashMap<&str, (u64, usize)> = HashMap::new();
        let mut total = 0u64;
        for (pos, tok) in stream.into_iter().enumerate() {
            total += 1;
            let e = counts.entry(tok).or_insert((0, pos));
            e.0 += 1;
        }
        if total == 0 {
            return Err(Error::EmptyCorpus("no tokens in vocabulary stream".into()));
        }
        let slots = if reserved_within_k {
            k.saturating_sub(RESERVED.len())
        } else {
            k
        };
        let mut ranked: Vec<(&str, u64, usize)> =
            counts.iter().map(|(t, &(c, first))| (*t, c, first)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        ranked.truncate(slots);

        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut kept_counts = vec![0u64; RESERVED.len()];
        for (t, c, _) in &ranked {
            tokens.push(t.to_string());
            kept_counts.push(*c);
        }
        // out-of-vocabulary occurrences pool on the <oov> symbol
        let kept_sum: u64 = kept_counts.iter().sum();
        kept_counts[OOV_ID] = total - kept_sum;

        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Self { ids, tokens, counts: kept_counts, total })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id_of(&self, token: &str) -> usize {
        *self.ids.get(token).unwrap_or(&OOV_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    pub fn token_of(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn count_of(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn total_tokens(&self) -> u64 {
        self.total
    }

    /// ln(count / total) over the training stream; out-of-vocabulary tokens
    /// use the pooled `<oov>` count. Unseen reserved symbols give -inf.
    pub fn log_frequency(&self, id: usize) -> f64 {
        if self.counts[id] == 0 {
            f64::NEG_INFINITY
        } else {
            (self.counts[id] as f64 / self.total as f64).ln()
        }
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id_of(t)).collect()
    }

    /// JSON file: `{tokens, counts, total}` in id order, so other pipeline
    /// stages can reuse a vocabulary without re-reading the corpus.
    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let file = VocabFile {
            tokens: self.tokens.clone(),
            counts: self.counts.clone(),
            total: self.total,
        };
        std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let bad = |reason: String| Error::MalformedRecord { index: 0, reason };
        if file.tokens.len() != file.counts.len() {
            return Err(bad(format!(
                "{} tokens vs {} counts",
                file.tokens.len(),
                file.counts.len()
            )));
        }
        if file.tokens.len() < RESERVED.len()
            || RESERVED.iter().zip(&file.tokens).any(|(r, t)| r != t)
        {
            return Err(bad("reserved symbols missing from the head".into()));
        }
        if file.counts.iter().sum::<u64>() != file.total {
            return Err(bad("counts do not sum to the total".into()));
        }
        let mut ids = HashMap::new();
        for (i, t) in file.tokens.iter().enumerate() {
            if ids.insert(t.clone(), i).is_some() {
                return Err(bad(format!("duplicate token `{t}`")));
            }
        }
        Ok(Self { ids, tokens: file.tokens, counts: file.counts, total: file.total })
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    counts: Vec<u64>,
    total: u64,
}
