//! From-scratch word-embedding trainers: skip-gram with negative sampling,
//! the FastText subword extension, and the few-shot nonce learner.

mod io;
mod nonce;
mod train;

pub use io::{load_embedding_text, load_subword_buckets, save_embedding_text, save_subword_buckets};
pub use nonce::{train_nonce, NonceConfig, NonceResult};
pub use train::{
    pair_gradients, sg_pair_loss, train_skipgram, train_skipgram_parallel, update_model,
    EpochStats, SgConfig,
};

use std::collections::HashMap;

use crate::error::{data_err, Error, Result};
use crate::linalg::Mat;
use crate::rng::{fnv1a64, Xoshiro256StarStar};

/// Vocabulary with deterministic ids: words sorted by count descending,
/// then alphabetically.
#[derive(Clone, Debug)]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    total_tokens: u64,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    /// Relative frequency of a word among retained tokens.
    pub fn frequency(&self, id: usize) -> f64 {
        self.counts[id] as f64 / self.total_tokens as f64
    }

    /// Append a new word (update mode, min_count 0). Returns its id.
    pub(crate) fn push(&mut self, word: String, count: u64) -> usize {
        let id = self.words.len();
        self.index.insert(word.clone(), id);
        self.words.push(word);
        self.counts.push(count);
        self.total_tokens += count;
        id
    }

    pub(crate) fn add_count(&mut self, id: usize, count: u64) {
        self.counts[id] += count;
        self.total_tokens += count;
    }
}

/// Count tokens and retain words with count ≥ min_count.
pub fn build_vocab(corpus: &[Vec<String>], min_count: u64) -> Result<Vocab> {
    if corpus.is_empty() {
        return data_err("build_vocab: empty corpus");
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for sentence in corpus {
        for tok in sentence {
            *counts.entry(tok.as_str()).or_insert(0) += 1;
        }
    }
    let mut retained: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|(_, c)| *c >= min_count)
        .collect();
    if retained.is_empty() {
        return data_err(format!("build_vocab: no word reaches min_count {min_count}"));
    }
    retained.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut vocab = Vocab {
        words: Vec::with_capacity(retained.len()),
        index: HashMap::with_capacity(retained.len()),
        counts: Vec::with_capacity(retained.len()),
        total_tokens: 0,
    };
    for (word, count) in retained {
        vocab.index.insert(word.to_string(), vocab.words.len());
        vocab.words.push(word.to_string());
        vocab.counts.push(count);
        vocab.total_tokens += count;
    }
    Ok(vocab)
}

/// Per-word negative-sampling probabilities, proportional to count^power.
pub fn sampling_probs(vocab: &Vocab, power: f64) -> Vec<f64> {
    let mut probs: Vec<f64> = (0..vocab.len())
        .map(|id| (vocab.count(id) as f64).powf(power))
        .collect();
    let z: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= z;
    }
    probs
}

/// Prefilled unigram^power draw table in the classic style.
#[derive(Clone, Debug)]
pub struct SamplingTable {
    table: Vec<u32>,
}

impl SamplingTable {
    pub fn build(vocab: &Vocab, power: f64) -> Self {
        let size = (vocab.len() * 64).clamp(1 << 16, 1 << 23);
        let probs = sampling_probs(vocab, power);
        let mut table = Vec::with_capacity(size);
        let mut cumulative = probs[0];
        let mut word = 0usize;
        for i in 0..size {
            table.push(word as u32);
            if (i + 1) as f64 / size as f64 > cumulative && word + 1 < vocab.len() {
                word += 1;
                cumulative += probs[word];
            }
        }
        SamplingTable { table }
    }

    #[inline]
    pub fn draw(&self, rng: &mut Xoshiro256StarStar) -> usize {
        self.table[rng.gen_below(self.table.len() as u64) as usize] as usize
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Fraction of table slots held by each word (for tests).
    pub fn mass(&self, vocab_len: usize) -> Vec<f64> {
        let mut counts = vec![0usize; vocab_len];
        for &w in &self.table {
            counts[w as usize] += 1;
        }
        counts
            .into_iter()
            .map(|c| c as f64 / self.table.len() as f64)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SubwordConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub bucket_count: usize,
}

impl Default for SubwordConfig {
    fn default() -> Self {
        SubwordConfig {
            n_min: 3,
            n_max: 6,
            bucket_count: 1 << 21,
        }
    }
}

/// Character n-grams of the boundary-marked word `<word>` for n in
/// [n_min, n_max]; the full bracketed word is included as one unit (it
/// already is, whenever its length falls inside the n range).
pub fn char_ngram_strings(word: &str, cfg: &SubwordConfig) -> Vec<String> {
    let bracketed: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let len = bracketed.len();
    let mut grams = Vec::new();
    for n in cfg.n_min..=cfg.n_max.min(len) {
        for start in 0..=len - n {
            grams.push(bracketed[start..start + n].iter().collect());
        }
    }
    if len < cfg.n_min || len > cfg.n_max {
        grams.push(bracketed.iter().collect());
    }
    grams
}

/// Bucket ids (multiset) of a word's character n-grams under FNV-1a hashing.
pub fn char_ngrams(word: &str, cfg: &SubwordConfig) -> Vec<u64> {
    char_ngram_strings(word, cfg)
        .iter()
        .map(|g| fnv1a64(g.as_bytes()) % cfg.bucket_count as u64)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingMode {
    Word2Vec,
    FastText,
}

impl EmbeddingMode {
    pub fn name(self) -> &'static str {
        match self {
            EmbeddingMode::Word2Vec => "word2vec",
            EmbeddingMode::FastText => "fasttext",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "word2vec" => Ok(EmbeddingMode::Word2Vec),
            "fasttext" => Ok(EmbeddingMode::FastText),
            _ => Err(Error::Config(format!("unknown embedding mode {s:?}"))),
        }
    }
}

/// Subword bucket table plus the per-vocab-word n-gram ids, precomputed so
/// training does not re-hash.
#[derive(Clone, Debug)]
pub struct SubwordTable {
    pub cfg: SubwordConfig,
    pub buckets: Mat,
    pub word_ngrams: Vec<Vec<u32>>,
}

impl SubwordTable {
    pub(crate) fn ngrams_of_word(&self, word: &str) -> Vec<u32> {
        char_ngrams(word, &self.cfg)
            .into_iter()
            .map(|b| b as u32)
            .collect()
    }
}

/// Vocabulary plus input/output vector tables, optionally with subword
/// n-gram buckets.
#[derive(Clone, Debug)]
pub struct EmbeddingModel {
    pub vocab: Vocab,
    pub dim: usize,
    pub mode: EmbeddingMode,
    pub input: Mat,
    pub output: Mat,
    pub subword: Option<SubwordTable>,
}

impl EmbeddingModel {
    pub fn input_row(&self, id: usize) -> &[f64] {
        self.input.row(id)
    }

    /// Composed vector for a word. Word2Vec: the input vector (OOV errors).
    /// FastText: the mean of the whole-word vector (when in vocabulary) and
    /// its n-gram bucket vectors.
    pub fn word_vector(&self, word: &str) -> Result<Vec<f64>> {
        match self.mode {
            EmbeddingMode::Word2Vec => match self.vocab.id_of(word) {
                Some(id) => Ok(self.input.row(id).to_vec()),
                None => data_err(format!("word {word:?} not in vocabulary")),
            },
            EmbeddingMode::FastText => {
                let sub = self
                    .subword
                    .as_ref()
                    .ok_or_else(|| Error::Data("fasttext model lacks subword table".to_string()))?;
                let mut sum = vec![0.0; self.dim];
                let mut units = 0usize;
                if let Some(id) = self.vocab.id_of(word) {
                    for (s, v) in sum.iter_mut().zip(self.input.row(id)) {
                        *s += v;
                    }
                    units += 1;
                }
                for bucket in char_ngrams(word, &sub.cfg) {
                    for (s, v) in sum.iter_mut().zip(sub.buckets.row(bucket as usize)) {
                        *s += v;
                    }
                    units += 1;
                }
                if units == 0 {
                    return data_err(format!("word {word:?} has no representable units"));
                }
                for s in sum.iter_mut() {
                    *s /= units as f64;
                }
                Ok(sum)
            }
        }
    }

    /// Training-time composed center vector by vocab id.
    pub(crate) fn compose_hidden(&self, id: usize) -> Vec<f64> {
        match (&self.mode, &self.subword) {
            (EmbeddingMode::Word2Vec, _) | (EmbeddingMode::FastText, None) => {
                self.input.row(id).to_vec()
            }
            (EmbeddingMode::FastText, Some(sub)) => {
                let ngrams = &sub.word_ngrams[id];
                let mut sum = self.input.row(id).to_vec();
                for &b in ngrams {
                    for (s, v) in sum.iter_mut().zip(sub.buckets.row(b as usize)) {
                        *s += v;
                    }
                }
                let units = (1 + ngrams.len()) as f64;
                for s in sum.iter_mut() {
                    *s /= units;
                }
                sum
            }
        }
    }

    /// Scatter a hidden-layer gradient back onto the center word's units
    /// (chain rule through the mean composition).
    pub(crate) fn apply_hidden_grad(&mut self, id: usize, grad: &[f64], lr: f64) {
        match (&self.mode, &mut self.subword) {
            (EmbeddingMode::Word2Vec, _) | (EmbeddingMode::FastText, None) => {
                let row = &mut self.input.data[id * self.dim..(id + 1) * self.dim];
                for (p, g) in row.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            (EmbeddingMode::FastText, Some(sub)) => {
                let units = (1 + sub.word_ngrams[id].len()) as f64;
                let scale = lr / units;
                let row = &mut self.input.data[id * self.dim..(id + 1) * self.dim];
                for (p, g) in row.iter_mut().zip(grad) {
                    *p -= scale * g;
                }
                for &b in &sub.word_ngrams[id] {
                    let row =
                        &mut sub.buckets.data[b as usize * self.dim..(b as usize + 1) * self.dim];
                    for (p, g) in row.iter_mut().zip(grad) {
                        *p -= scale * g;
                    }
                }
            }
        }
    }

    pub fn assert_finite(&self) -> Result<()> {
        if !self.input.is_finite() || !self.output.is_finite() {
            return crate::error::numeric_err("embedding tables contain non-finite values");
        }
        if let Some(sub) = &self.subword {
            if !sub.buckets.is_finite() {
                return crate::error::numeric_err("subword buckets contain non-finite values");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(text: &str) -> Vec<Vec<String>> {
        text.lines()
            .map(|l| l.split_whitespace().map(|t| t.to_string()).collect())
            .collect()
    }

    #[test]
    fn vocab_orders_by_count_then_word() {
        let c = corpus("b a a\nc c c b");
        let v = build_vocab(&c, 1).unwrap();
        assert_eq!(v.word(0), "c");
        assert_eq!(v.word(1), "a");
        assert_eq!(v.word(2), "b");
        assert_eq!(v.count(0), 3);
        assert_eq!(v.total_tokens(), 7);
    }

    #[test]
    fn min_count_drops_below_threshold() {
        let mut text = String::new();
        for _ in 0..50 {
            text.push_str("keep ");
        }
        for _ in 0..49 {
            text.push_str("drop ");
        }
        let v = build_vocab(&corpus(&text), 50).unwrap();
        assert!(v.id_of("keep").is_some());
        assert!(v.id_of("drop").is_none());
    }

    #[test]
    fn sampling_mass_follows_count_power() {
        let mut text = String::new();
        for _ in 0..10 {
            text.push_str("a b ");
        }
        let v = build_vocab(&corpus(&text), 1).unwrap();
        let probs = sampling_probs(&v, 0.75);
        assert!((probs[0] - probs[1]).abs() < 1e-12);

        let mut text = String::new();
        for _ in 0..16 {
            text.push_str("a ");
        }
        text.push('b');
        let v = build_vocab(&corpus(&text), 1).unwrap();
        let probs = sampling_probs(&v, 0.75);
        // 16^0.75 : 1 = 8 : 1.
        assert!((probs[v.id_of("a").unwrap()] / probs[v.id_of("b").unwrap()] - 8.0).abs() < 1e-9);
        let table = SamplingTable::build(&v, 0.75);
        let mass = table.mass(v.len());
        assert!((mass[v.id_of("a").unwrap()] - 8.0 / 9.0).abs() < 1e-3);
    }

    #[test]
    fn char_ngrams_of_cat() {
        let cfg = SubwordConfig {
            n_min: 3,
            n_max: 6,
            bucket_count: 1 << 21,
        };
        let mut grams = char_ngram_strings("cat", &cfg);
        grams.sort();
        let mut expected = vec!["<ca", "cat", "at>", "<cat", "cat>", "<cat>"];
        expected.sort();
        assert_eq!(grams, expected);

        assert_eq!(char_ngram_strings("a", &cfg), vec!["<a>"]);

        // Long words still carry the full bracketed word as one unit.
        let grams = char_ngram_strings("mischief", &cfg);
        assert!(grams.contains(&"<mischief>".to_string()));

        // Determinism of hashed ids.
        assert_eq!(char_ngrams("cat", &cfg), char_ngrams("cat", &cfg));
    }

    #[test]
    fn fasttext_mean_includes_zero_buckets() {
        // With all-zero bucket vectors, the composed vector is the whole-word
        // vector divided by (1 + G).
        let c = corpus("cat sat cat sat");
        let vocab = build_vocab(&c, 1).unwrap();
        let dim = 4;
        let cfg = SubwordConfig {
            n_min: 3,
            n_max: 6,
            bucket_count: 64,
        };
        let word_ngrams: Vec<Vec<u32>> = (0..vocab.len())
            .map(|id| {
                char_ngrams(vocab.word(id), &cfg)
                    .into_iter()
                    .map(|b| b as u32)
                    .collect()
            })
            .collect();
        let mut input = Mat::zeros(vocab.len(), dim);
        for v in input.data.iter_mut() {
            *v = 1.0;
        }
        let model = EmbeddingModel {
            output: Mat::zeros(vocab.len(), dim),
            input,
            subword: Some(SubwordTable {
                cfg,
                buckets: Mat::zeros(64, dim),
                word_ngrams,
            }),
            vocab,
            dim,
            mode: EmbeddingMode::FastText,
        };
        let g = char_ngrams("cat", &cfg).len() as f64;
        let v = model.word_vector("cat").unwrap();
        for x in v {
            assert!((x - 1.0 / (1.0 + g)).abs() < 1e-12);
        }
    }

    #[test]
    fn fasttext_composition_is_order_invariant() {
        let c = corpus("mischief maker mischief maker");
        let vocab = build_vocab(&c, 1).unwrap();
        let dim = 6;
        let cfg = SubwordConfig {
            n_min: 3,
            n_max: 6,
            bucket_count: 256,
        };
        let mut rng = crate::rng::Xoshiro256StarStar::seed_from_u64(8);
        let mut buckets = Mat::zeros(256, dim);
        for v in buckets.data.iter_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let mut input = Mat::zeros(vocab.len(), dim);
        for v in input.data.iter_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let word_ngrams: Vec<Vec<u32>> = (0..vocab.len())
            .map(|id| {
                char_ngrams(vocab.word(id), &cfg)
                    .into_iter()
                    .map(|b| b as u32)
                    .collect()
            })
            .collect();
        let model = EmbeddingModel {
            output: Mat::zeros(vocab.len(), dim),
            input,
            subword: Some(SubwordTable {
                cfg,
                buckets,
                word_ngrams,
            }),
            dim,
            mode: EmbeddingMode::FastText,
            vocab,
        };
        let composed = model.word_vector("mischief").unwrap();
        // Recompose with the n-gram ids in sorted (different) order.
        let mut ids = char_ngrams("mischief", &cfg);
        ids.sort_unstable();
        let sub = model.subword.as_ref().unwrap();
        let word_id = model.vocab.id_of("mischief").unwrap();
        let mut manual = model.input.row(word_id).to_vec();
        for &b in &ids {
            for (m, v) in manual.iter_mut().zip(sub.buckets.row(b as usize)) {
                *m += v;
            }
        }
        for m in manual.iter_mut() {
            *m /= (1 + ids.len()) as f64;
        }
        for (a, b) in composed.iter().zip(&manual) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn word2vec_oov_errors() {
        let c = corpus("a b a b");
        let vocab = build_vocab(&c, 1).unwrap();
        let model = EmbeddingModel {
            input: Mat::zeros(vocab.len(), 2),
            output: Mat::zeros(vocab.len(), 2),
            subword: None,
            vocab,
            dim: 2,
            mode: EmbeddingMode::Word2Vec,
        };
        assert!(model.word_vector("zzz").is_err());
        assert!(model.word_vector("a").is_ok());
    }
}
