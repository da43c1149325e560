//! Few-shot nonce learning against a frozen background model. The background
//! keeps the target's original vector as the gold reference (conceptually the
//! `<target>_gold` relabel); a fresh randomly initialized vector is trained
//! from the given sentences, and it is the only thing that moves.

use crate::error::{config_err, data_err, Error, Result};
use crate::rng::Xoshiro256StarStar;

use super::{EmbeddingModel, SamplingTable};

#[derive(Clone, Debug)]
pub struct NonceConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_count: u64,
    /// Subsampling threshold; at ≥ 1 every token is kept.
    pub sample: f64,
    /// Exponential learning-rate decay per processed context word.
    pub decay: f64,
}

impl Default for NonceConfig {
    fn default() -> Self {
        NonceConfig {
            learning_rate: 0.5,
            epochs: 5,
            window: 15,
            negatives: 3,
            min_count: 1,
            sample: 10_000.0,
            decay: 0.99,
        }
    }
}

impl NonceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return config_err("nonce config: bad learning rate");
        }
        if self.window == 0 || self.epochs == 0 {
            return config_err("nonce config: window and epochs must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return config_err("nonce config: decay must be in (0, 1]");
        }
        Ok(())
    }
}

/// The learned nonce vector; the gold reference is the background model's
/// own row for `word`.
#[derive(Clone, Debug)]
pub struct NonceResult {
    pub word: String,
    pub vector: Vec<f64>,
}

/// Learn a fresh vector for `target_word` from a handful of sentences.
/// Only the nonce input vector is updated; every background vector (input
/// and output) stays frozen. Pairs are skip-gram negative-sampling updates
/// centered on the target occurrences, with the learning rate decayed by
/// `cfg.decay` after each processed context word. Sentence order is
/// re-randomized per epoch from the seed.
pub fn train_nonce(
    background: &EmbeddingModel,
    target_word: &str,
    sentences: &[Vec<String>],
    cfg: &NonceConfig,
    seed: u64,
) -> Result<NonceResult> {
    cfg.validate()?;
    if background.vocab.id_of(target_word).is_none() {
        return Err(Error::Data(format!(
            "target word {target_word:?} not in background vocabulary"
        )));
    }
    let dim = background.dim;
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let limit = 0.5 / dim as f64;
    let mut nonce: Vec<f64> = (0..dim).map(|_| rng.uniform(-limit, limit)).collect();
    if sentences.is_empty() || cfg.learning_rate == 0.0 {
        return Ok(NonceResult {
            word: target_word.to_string(),
            vector: nonce,
        });
    }

    let table = SamplingTable::build(&background.vocab, 0.75);
    // Context ids per sentence with the target positions marked None.
    let id_sentences: Vec<Vec<Option<u32>>> = sentences
        .iter()
        .map(|s| {
            s.iter()
                .map(|t| {
                    if t == target_word {
                        None
                    } else {
                        background.vocab.id_of(t).map(|id| id as u32)
                    }
                })
                .collect()
        })
        .collect();
    if !sentences
        .iter()
        .all(|s| s.iter().any(|t| t == target_word))
    {
        return data_err(format!(
            "every training sentence must contain the target {target_word:?}"
        ));
    }

    let mut lr = cfg.learning_rate;
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    for _epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for &si in &order {
            let sentence = &id_sentences[si];
            // Keep known context words; subsampling at sample ≥ 1 keeps all.
            let freqs: Vec<f64> = sentence
                .iter()
                .map(|id| id.map(|i| background.vocab.frequency(i as usize)).unwrap_or(0.0))
                .collect();
            for (pos, id) in sentence.iter().enumerate() {
                if id.is_some() {
                    continue; // only target occurrences are centers
                }
                let b = 1 + rng.gen_below(cfg.window as u64) as usize;
                let lo = pos.saturating_sub(b);
                let hi = (pos + b).min(sentence.len() - 1);
                for (j, ctx) in sentence.iter().enumerate().take(hi + 1).skip(lo) {
                    let context = match ctx {
                        Some(c) if j != pos => *c as usize,
                        _ => continue,
                    };
                    if cfg.sample < 1.0 {
                        let f = freqs[j];
                        if f > cfg.sample && rng.next_f64() >= (cfg.sample / f).sqrt() {
                            continue;
                        }
                    }
                    let mut g_hidden = vec![0.0; dim];
                    let step = |t: usize, label: f64, g_hidden: &mut [f64]| {
                        let row = background.output.row(t);
                        let mut dot = 0.0;
                        for i in 0..dim {
                            dot += row[i] * nonce[i];
                        }
                        let coef = 1.0 / (1.0 + (-dot).exp()) - label;
                        for i in 0..dim {
                            g_hidden[i] += coef * row[i];
                        }
                    };
                    step(context, 1.0, &mut g_hidden);
                    for _ in 0..cfg.negatives {
                        let neg = table.draw(&mut rng);
                        if neg == context {
                            continue;
                        }
                        step(neg, 0.0, &mut g_hidden);
                    }
                    for i in 0..dim {
                        nonce[i] -= lr * g_hidden[i];
                    }
                    lr *= cfg.decay;
                }
            }
        }
    }
    if nonce.iter().any(|v| !v.is_finite()) {
        return crate::error::numeric_err("nonce training diverged");
    }
    Ok(NonceResult {
        word: target_word.to_string(),
        vector: nonce,
    })
}
