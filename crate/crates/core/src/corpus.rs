//! Valence-arousal labeled lyrics corpora: Russell-circumplex label algebra,
//! word-level tokenization capped at 1024 tokens, stratified splits, and a
//! synthetic separable corpus standing in for the copyrighted datasets.
//!
//! Quadrant convention: Q1 = (positive, high), Q2 = (negative, high),
//! Q3 = (negative, low), Q4 = (positive, low).

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::rng::SeedRng;

pub const MAX_TOKENS: usize = 1024;
pub const PAD_ID: usize = 0;
pub const UNKNOWN_ID: usize = 1;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error reading corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {cause}")]
    Malformed { line: usize, cause: String },
    #[error("document '{id}': label triple {quadrant:?}/{valence:?}/{arousal:?} is inconsistent")]
    InconsistentLabel {
        id: String,
        quadrant: Quadrant,
        valence: Valence,
        arousal: Arousal,
    },
    #[error("duplicate document id '{id}' at line {line}")]
    DuplicateId { id: String, line: usize },
    #[error("vocabulary is frozen; cannot insert '{token}'")]
    FrozenVocabulary { token: String },
    #[error("split ratios {0:?} must be positive and sum to 1")]
    BadRatios(Vec<f64>),
    #[error("stratified split infeasible: quadrant {quadrant:?} has {available} documents for {splits} splits")]
    InfeasibleSplit {
        quadrant: Quadrant,
        available: usize,
        splits: usize,
    },
    #[error("document '{id}' has no label")]
    Unlabeled { id: String },
}

// ── label algebra ───────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Quadrant {
    Q1,
    Q2,
    Q3,
    Q4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Valence {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arousal {
    High,
    Low,
}

pub const ALL_QUADRANTS: [Quadrant; 4] = [Quadrant::Q1, Quadrant::Q2, Quadrant::Q3, Quadrant::Q4];

impl Quadrant {
    pub fn index(self) -> usize {
        match self {
            Quadrant::Q1 => 0,
            Quadrant::Q2 => 1,
            Quadrant::Q3 => 2,
            Quadrant::Q4 => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Quadrant> {
        ALL_QUADRANTS.get(i).copied()
    }
}

impl Valence {
    pub fn index(self) -> usize {
        match self {
            Valence::Positive => 0,
            Valence::Negative => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Valence> {
        [Valence::Positive, Valence::Negative].get(i).copied()
    }
}

impl Arousal {
    pub fn index(self) -> usize {
        match self {
            Arousal::High => 0,
            Arousal::Low => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Arousal> {
        [Arousal::High, Arousal::Low].get(i).copied()
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Quadrant → hemisphere pair.
pub fn hemispheres_of(q: Quadrant) -> (Valence, Arousal) {
    match q {
        Quadrant::Q1 => (Valence::Positive, Arousal::High),
        Quadrant::Q2 => (Valence::Negative, Arousal::High),
        Quadrant::Q3 => (Valence::Negative, Arousal::Low),
        Quadrant::Q4 => (Valence::Positive, Arousal::Low),
    }
}

/// Hemisphere pair → quadrant (inverse of [`hemispheres_of`]).
pub fn quadrant_of(v: Valence, a: Arousal) -> Quadrant {
    match (v, a) {
        (Valence::Positive, Arousal::High) => Quadrant::Q1,
        (Valence::Negative, Arousal::High) => Quadrant::Q2,
        (Valence::Negative, Arousal::Low) => Quadrant::Q3,
        (Valence::Positive, Arousal::Low) => Quadrant::Q4,
    }
}

/// Consistent quadrant + hemisphere triple; inconsistent triples cannot be
/// constructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct EmotionLabel {
    quadrant: Quadrant,
    valence: Valence,
    arousal: Arousal,
}

impl EmotionLabel {
    pub fn from_quadrant(q: Quadrant) -> EmotionLabel {
        let (valence, arousal) = hemispheres_of(q);
        EmotionLabel {
            quadrant: q,
            valence,
            arousal,
        }
    }

    pub fn from_hemispheres(v: Valence, a: Arousal) -> EmotionLabel {
        EmotionLabel {
            quadrant: quadrant_of(v, a),
            valence: v,
            arousal: a,
        }
    }

    /// Validate an explicit triple; `Err` carries the offending parts.
    pub fn try_new(q: Quadrant, v: Valence, a: Arousal) -> Result<EmotionLabel, (Quadrant, Valence, Arousal)> {
        if hemispheres_of(q) == (v, a) {
            Ok(EmotionLabel::from_quadrant(q))
        } else {
            Err((q, v, a))
        }
    }

    pub fn quadrant(&self) -> Quadrant {
        self.quadrant
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn arousal(&self) -> Arousal {
        self.arousal
    }
}

// ── documents and vocabulary ────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct LyricsDocument {
    pub id: String,
    pub artist: String,
    pub title: String,
    pub lyrics: String,
    pub label: Option<EmotionLabel>,
    pub tokens: Option<Vec<usize>>,
}

#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    ids: HashMap<String, usize>,
    tokens: Vec<String>, // index = id
    frozen: bool,
}

impl Vocabulary {
    pub fn new() -> Vocabulary {
        Vocabulary {
            ids: HashMap::new(),
            tokens: vec!["<pad>".into(), "<unk>".into()],
            frozen: false,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // pad and unk are always present
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn id_of(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token_of(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(|s| s.as_str())
    }

    /// Existing id, or a fresh one in first-appearance order.
    pub fn insert_or_get(&mut self, token: &str) -> Result<usize, CorpusError> {
        if let Some(id) = self.ids.get(token) {
            return Ok(*id);
        }
        if self.frozen {
            return Err(CorpusError::FrozenVocabulary {
                token: token.to_string(),
            });
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.ids.insert(token.to_string(), id);
        Ok(id)
    }
}

/// Lowercase, split on non-alphanumeric boundaries, drop punctuation.
pub fn split_words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_string())
        .collect()
}

/// Word tokens mapped through a frozen vocabulary (unknown → 1), truncated
/// to `max_len`.
pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    split_words(text)
        .into_iter()
        .take(max_len)
        .map(|w| vocab.id_of(&w).unwrap_or(UNKNOWN_ID))
        .collect()
}

fn tokenize_building(
    text: &str,
    vocab: &mut Vocabulary,
    max_len: usize,
) -> Result<Vec<usize>, CorpusError> {
    split_words(text)
        .into_iter()
        .take(max_len)
        .map(|w| vocab.insert_or_get(&w))
        .collect()
}

// ── corpus ──────────────────────────────────────────────────────────

#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub docs: Vec<LyricsDocument>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VocabPolicy {
    /// Assemble the vocabulary from the corpus text, then freeze it.
    Build,
    /// Map through an existing frozen vocabulary; unseen words become `<unk>`.
    Frozen,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct JsonRecord {
    id: String,
    lyrics: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    artist: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quadrant: Option<Quadrant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    valence: Option<Valence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    arousal: Option<Arousal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    url: Option<String>,
}

fn label_from_record(rec: &JsonRecord, line: usize) -> Result<Option<EmotionLabel>, CorpusError> {
    match (rec.quadrant, rec.valence, rec.arousal) {
        (None, None, None) => Ok(None),
        (Some(q), None, None) => Ok(Some(EmotionLabel::from_quadrant(q))),
        (None, Some(v), Some(a)) => Ok(Some(EmotionLabel::from_hemispheres(v, a))),
        (Some(q), v, a) => {
            let (dv, da) = hemispheres_of(q);
            let v = v.unwrap_or(dv);
            let a = a.unwrap_or(da);
            EmotionLabel::try_new(q, v, a).map(Some).map_err(|(q, v, a)| {
                CorpusError::InconsistentLabel {
                    id: rec.id.clone(),
                    quadrant: q,
                    valence: v,
                    arousal: a,
                }
            })
        }
        _ => Err(CorpusError::Malformed {
            line,
            cause: "valence and arousal must be given together".into(),
        }),
    }
}

/// Parse corpus JSONL from a reader. Labels are validated, ids deduplicated,
/// and every document tokenized (build policy assembles the vocabulary in
/// first-appearance order, then freezes it).
pub fn read_corpus<R: BufRead>(
    reader: R,
    policy: VocabPolicy,
    vocab: Option<Vocabulary>,
) -> Result<(Corpus, Vocabulary), CorpusError> {
    let mut vocab = match (policy, vocab) {
        (VocabPolicy::Build, _) => Vocabulary::new(),
        (VocabPolicy::Frozen, Some(v)) => v,
        (VocabPolicy::Frozen, None) => {
            let mut v = Vocabulary::new();
            v.freeze();
            v
        }
    };
    let mut docs = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            cause: e.to_string(),
        })?;
        if let Some(first) = seen.insert(rec.id.clone(), line_no) {
            let _ = first;
            return Err(CorpusError::DuplicateId {
                id: rec.id,
                line: line_no,
            });
        }
        let label = label_from_record(&rec, line_no)?;
        let tokens = match policy {
            VocabPolicy::Build => tokenize_building(&rec.lyrics, &mut vocab, MAX_TOKENS)?,
            VocabPolicy::Frozen => tokenize(&rec.lyrics, &vocab, MAX_TOKENS),
        };
        docs.push(LyricsDocument {
            id: rec.id,
            artist: rec.artist.unwrap_or_default(),
            title: rec.title.unwrap_or_default(),
            lyrics: rec.lyrics,
            label,
            tokens: Some(tokens),
        });
    }
    if policy == VocabPolicy::Build {
        vocab.freeze();
    }
    Ok((Corpus { docs }, vocab))
}

pub fn load_corpus(
    path: &Path,
    policy: VocabPolicy,
    vocab: Option<Vocabulary>,
) -> Result<(Corpus, Vocabulary), CorpusError> {
    let file = std::fs::File::open(path)?;
    read_corpus(std::io::BufReader::new(file), policy, vocab)
}

/// Write a corpus as JSONL with stable field ordering.
pub fn write_corpus<W: Write>(mut w: W, corpus: &Corpus) -> Result<(), CorpusError> {
    for doc in &corpus.docs {
        let rec = JsonRecord {
            id: doc.id.clone(),
            lyrics: doc.lyrics.clone(),
            artist: if doc.artist.is_empty() {
                None
            } else {
                Some(doc.artist.clone())
            },
            title: if doc.title.is_empty() {
                None
            } else {
                Some(doc.title.clone())
            },
            quadrant: doc.label.map(|l| l.quadrant()),
            valence: doc.label.map(|l| l.valence()),
            arousal: doc.label.map(|l| l.arousal()),
            url: None,
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| CorpusError::Malformed {
            line: 0,
            cause: e.to_string(),
        })?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<(), CorpusError> {
    let file = std::fs::File::create(path)?;
    write_corpus(std::io::BufWriter::new(file), corpus)
}

// ── splits ──────────────────────────────────────────────────────────

/// Stratified-by-quadrant split with a seeded shuffle. Per-quadrant
/// proportions land within ±1 document of exact.
pub fn split(corpus: &Corpus, ratios: &[f64], seed: u64) -> Result<Vec<Corpus>, CorpusError> {
    if ratios.is_empty() || ratios.iter().any(|r| *r <= 0.0) {
        return Err(CorpusError::BadRatios(ratios.to_vec()));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CorpusError::BadRatios(ratios.to_vec()));
    }

    let mut by_quadrant: HashMap<Quadrant, Vec<usize>> = HashMap::new();
    for (i, doc) in corpus.docs.iter().enumerate() {
        let label = doc.label.ok_or_else(|| CorpusError::Unlabeled {
            id: doc.id.clone(),
        })?;
        by_quadrant.entry(label.quadrant()).or_default().push(i);
    }

    let mut rng = SeedRng::new(seed);
    let mut splits: Vec<Vec<usize>> = vec![Vec::new(); ratios.len()];
    for q in ALL_QUADRANTS {
        let Some(indices) = by_quadrant.get(&q) else {
            continue;
        };
        if indices.len() < ratios.len() {
            return Err(CorpusError::InfeasibleSplit {
                quadrant: q,
                available: indices.len(),
                splits: ratios.len(),
            });
        }
        let mut shuffled = indices.clone();
        rng.shuffle(&mut shuffled);
        let counts = largest_remainder_counts(shuffled.len(), ratios);
        let mut start = 0;
        for (s, &count) in counts.iter().enumerate() {
            splits[s].extend_from_slice(&shuffled[start..start + count]);
            start += count;
        }
    }

    Ok(splits
        .into_iter()
        .map(|mut idxs| {
            idxs.sort_unstable(); // stable doc order within each split
            Corpus {
                docs: idxs.iter().map(|&i| corpus.docs[i].clone()).collect(),
            }
        })
        .collect())
}

/// Integer apportionment: floors plus largest fractional remainders, with
/// every split guaranteed at least one item.
fn largest_remainder_counts(n: usize, ratios: &[f64]) -> Vec<usize> {
    let mut counts: Vec<usize> = ratios.iter().map(|r| (r * n as f64).floor() as usize).collect();
    let mut rem: Vec<(usize, f64)> = ratios
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r * n as f64 - counts[i] as f64))
        .collect();
    rem.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let assigned: usize = counts.iter().sum();
    for k in 0..n - assigned {
        counts[rem[k % rem.len()].0] += 1;
    }
    // no split may be empty
    loop {
        let Some(zero) = counts.iter().position(|c| *c == 0) else {
            break;
        };
        let donor = counts
            .iter()
            .enumerate()
            .max_by_key(|(_, c)| **c)
            .map(|(i, _)| i)
            .unwrap();
        counts[donor] -= 1;
        counts[zero] += 1;
    }
    counts
}

// ── synthetic corpus ────────────────────────────────────────────────

const QUADRANT_KEYWORDS: [&[&str]; 4] = [
    &["joy", "dance", "sunshine", "celebrate", "bright", "laughing", "alive", "golden"],
    &["rage", "scream", "fury", "burning", "storm", "fight", "broken", "thunder"],
    &["lonely", "tears", "grief", "fading", "empty", "sorrow", "cold", "goodbye"],
    &["calm", "gentle", "peaceful", "drifting", "quiet", "soft", "slow", "moonlight"],
];

const FILLER_BASE: [&str; 24] = [
    "the", "a", "and", "of", "in", "my", "your", "we", "you", "i", "to", "on", "night", "day",
    "heart", "time", "world", "way", "road", "sky", "eyes", "hand", "song", "again",
];

/// Keyword-separable labeled corpus: each document mixes quadrant-exclusive
/// keywords with shared filler, so quadrants are linearly separable by
/// construction. Uniform class balance, `4 * n_per_quadrant` documents.
pub fn generate_synthetic(n_per_quadrant: usize, vocab_size: usize, seed: u64) -> Corpus {
    assert!(n_per_quadrant >= 1);
    let mut rng = SeedRng::new(seed);
    let mut filler: Vec<String> = FILLER_BASE.iter().map(|s| s.to_string()).collect();
    while filler.len() < vocab_size.saturating_sub(QUADRANT_KEYWORDS.iter().map(|k| k.len()).sum()) {
        filler.push(format!("la{}", filler.len()));
    }

    let mut docs = Vec::new();
    for (qi, q) in ALL_QUADRANTS.into_iter().enumerate() {
        let keywords = QUADRANT_KEYWORDS[qi];
        for di in 0..n_per_quadrant {
            let mut words: Vec<String> = Vec::new();
            for _ in 0..12 {
                words.push(keywords[rng.below(keywords.len())].to_string());
            }
            for _ in 0..12 {
                words.push(filler[rng.below(filler.len())].clone());
            }
            rng.shuffle(&mut words);
            docs.push(LyricsDocument {
                id: format!("syn-{q:?}-{di:03}").to_lowercase(),
                artist: "synthetic".into(),
                title: format!("{q:?} song {di}"),
                lyrics: words.join(" "),
                label: Some(EmotionLabel::from_quadrant(q)),
                tokens: None,
            });
        }
    }
    Corpus { docs }
}

/// Tokenize an untokenized corpus in place, building (or reusing) a vocabulary.
pub fn encode_corpus(
    corpus: &mut Corpus,
    policy: VocabPolicy,
    vocab: Option<Vocabulary>,
) -> Result<Vocabulary, CorpusError> {
    let mut vocab = match (policy, vocab) {
        (VocabPolicy::Build, _) => Vocabulary::new(),
        (VocabPolicy::Frozen, Some(v)) => v,
        (VocabPolicy::Frozen, None) => {
            let mut v = Vocabulary::new();
            v.freeze();
            v
        }
    };
    for doc in &mut corpus.docs {
        let tokens = match policy {
            VocabPolicy::Build => tokenize_building(&doc.lyrics, &mut vocab, MAX_TOKENS)?,
            VocabPolicy::Frozen => tokenize(&doc.lyrics, &vocab, MAX_TOKENS),
        };
        doc.tokens = Some(tokens);
    }
    if policy == VocabPolicy::Build {
        vocab.freeze();
    }
    Ok(vocab)
}

/// Serializable vocabulary snapshot (token order carries the id assignment).
#[derive(serde::Serialize, serde::Deserialize)]
pub struct VocabularyFile {
    pub tokens: Vec<String>,
}

impl From<&Vocabulary> for VocabularyFile {
    fn from(v: &Vocabulary) -> Self {
        VocabularyFile {
            tokens: v.tokens.clone(),
        }
    }
}

impl From<VocabularyFile> for Vocabulary {
    fn from(f: VocabularyFile) -> Self {
        let ids = f
            .tokens
            .iter()
            .enumerate()
            .skip(2) // pad/unk are positional, not named entries
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            ids,
            tokens: f.tokens,
            frozen: true,
        }
    }
}
