//! Skip-gram negative-sampling training and incremental model updates.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{config_err, numeric_err, Result};
use crate::linalg::Mat;
use crate::rng::Xoshiro256StarStar;

use super::{
    build_vocab, EmbeddingMode, EmbeddingModel, SamplingTable, SubwordConfig, SubwordTable, Vocab,
};

#[derive(Clone, Debug)]
pub struct SgConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub alpha: f64,
    pub subsample_t: f64,
    pub min_count: u64,
    pub epochs: usize,
    pub seed: u64,
    pub unigram_power: f64,
    pub mode: EmbeddingMode,
    pub subword: SubwordConfig,
}

impl Default for SgConfig {
    fn default() -> Self {
        SgConfig {
            dim: 400,
            window: 5,
            negatives: 5,
            alpha: 0.025,
            subsample_t: 1e-3,
            min_count: 50,
            epochs: 5,
            seed: 1,
            unigram_power: 0.75,
            mode: EmbeddingMode::Word2Vec,
            subword: SubwordConfig::default(),
        }
    }
}

impl SgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.epochs == 0 {
            return config_err("sg config: dim, window, and epochs must be positive");
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return config_err("sg config: bad alpha");
        }
        if self.subsample_t <= 0.0 {
            return config_err("sg config: subsample_t must be positive");
        }
        if self.unigram_power <= 0.0 {
            return config_err("sg config: unigram_power must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EpochStats {
    pub epoch: usize,
    pub examples: u64,
    pub mean_loss: f64,
    pub final_lr: f64,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Loss of one (center, context, negatives) example:
/// −log σ(v′_c·v_w) − Σ_i log σ(−v′_{n_i}·v_w).
pub fn sg_pair_loss(hidden: &[f64], pos_out: &[f64], neg_outs: &[&[f64]]) -> f64 {
    let mut loss = -sigmoid(crate::linalg::dot(pos_out, hidden)).ln();
    for neg in neg_outs {
        loss -= sigmoid(-crate::linalg::dot(neg, hidden)).ln();
    }
    loss
}

/// Analytic gradients of [`sg_pair_loss`] with respect to the composed
/// center vector and each output vector. Returns (loss, g_hidden, g_outputs)
/// where g_outputs[0] belongs to the positive context.
pub fn pair_gradients(
    hidden: &[f64],
    pos_out: &[f64],
    neg_outs: &[&[f64]],
) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let dim = hidden.len();
    let mut g_hidden = vec![0.0; dim];
    let mut g_outputs = Vec::with_capacity(1 + neg_outs.len());
    let mut loss = 0.0;

    let f = sigmoid(crate::linalg::dot(pos_out, hidden));
    loss -= f.ln();
    let coef = f - 1.0; // ∂loss/∂(v′·v) for the positive pair
    let mut g = vec![0.0; dim];
    for i in 0..dim {
        g_hidden[i] += coef * pos_out[i];
        g[i] = coef * hidden[i];
    }
    g_outputs.push(g);

    for neg in neg_outs {
        let f = sigmoid(crate::linalg::dot(neg, hidden));
        loss -= (1.0 - f).ln();
        let coef = f;
        let mut g = vec![0.0; dim];
        for i in 0..dim {
            g_hidden[i] += coef * neg[i];
            g[i] = coef * hidden[i];
        }
        g_outputs.push(g);
    }
    (loss, g_hidden, g_outputs)
}

/// One in-place negative-sampling step for (center, context). Returns the
/// example loss.
fn sg_update(
    model: &mut EmbeddingModel,
    table: &SamplingTable,
    center: usize,
    context: usize,
    negatives: usize,
    lr: f64,
    rng: &mut Xoshiro256StarStar,
) -> f64 {
    let dim = model.dim;
    let hidden = model.compose_hidden(center);
    let mut g_hidden = vec![0.0; dim];
    let mut loss = 0.0;

    let mut targets: Vec<(usize, f64)> = Vec::with_capacity(1 + negatives);
    targets.push((context, 1.0));
    for _ in 0..negatives {
        let neg = table.draw(rng);
        if neg == context {
            continue;
        }
        targets.push((neg, 0.0));
    }

    for (t, label) in targets {
        let row = &model.output.data[t * dim..(t + 1) * dim];
        let mut dot = 0.0;
        for i in 0..dim {
            dot += row[i] * hidden[i];
        }
        let f = sigmoid(dot);
        loss -= if label == 1.0 { f.ln() } else { (1.0 - f).ln() };
        let coef = f - label; // gradient w.r.t. the dot product
        let row = &mut model.output.data[t * dim..(t + 1) * dim];
        for i in 0..dim {
            g_hidden[i] += coef * row[i];
            row[i] -= lr * coef * hidden[i];
        }
    }
    model.apply_hidden_grad(center, &g_hidden, lr);
    loss
}

fn init_input(rows: usize, dim: usize, rng: &mut Xoshiro256StarStar) -> Mat {
    let mut m = Mat::zeros(rows, dim);
    let limit = 0.5 / dim as f64;
    for v in m.data.iter_mut() {
        *v = rng.uniform(-limit, limit);
    }
    m
}

/// Map sentences to vocab ids, dropping OOV tokens.
fn to_ids(corpus: &[Vec<String>], vocab: &Vocab) -> Vec<Vec<u32>> {
    corpus
        .iter()
        .map(|s| {
            s.iter()
                .filter_map(|t| vocab.id_of(t).map(|id| id as u32))
                .collect()
        })
        .collect()
}

/// Frequent-word subsampling: discard probability max(0, 1 − sqrt(t/f)).
/// Words with frequency ≤ t are never discarded.
#[inline]
fn keep_token(freq: f64, t: f64, rng: &mut Xoshiro256StarStar) -> bool {
    if freq <= t {
        return true;
    }
    rng.next_f64() < (t / freq).sqrt()
}

struct SgRun<'a> {
    table: &'a SamplingTable,
    window: usize,
    negatives: usize,
    alpha: f64,
    subsample_t: f64,
    total_tokens: u64,
}

/// Train over the id-mapped corpus for one epoch, decaying the learning rate
/// linearly down to alpha/10000 over the whole token budget.
fn run_epoch(
    model: &mut EmbeddingModel,
    ids: &[Vec<u32>],
    run: &SgRun<'_>,
    processed: &mut u64,
    epoch: usize,
    rng: &mut Xoshiro256StarStar,
) -> Result<EpochStats> {
    let mut examples = 0u64;
    let mut loss_sum = 0.0;
    let mut lr = run.alpha;
    let freqs: Vec<f64> = (0..model.vocab.len())
        .map(|id| model.vocab.frequency(id))
        .collect();
    for sentence in ids {
        let kept: Vec<u32> = sentence
            .iter()
            .copied()
            .filter(|&id| keep_token(freqs[id as usize], run.subsample_t, rng))
            .collect();
        *processed += sentence.len() as u64;
        lr = decayed_lr(run.alpha, *processed, run.total_tokens);
        for (i, &center) in kept.iter().enumerate() {
            let b = 1 + rng.gen_below(run.window as u64) as usize;
            let lo = i.saturating_sub(b);
            let hi = (i + b).min(kept.len() - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let loss = sg_update(
                    model,
                    run.table,
                    center as usize,
                    kept[j] as usize,
                    run.negatives,
                    lr,
                    rng,
                );
                loss_sum += loss;
                examples += 1;
            }
        }
    }
    let mean_loss = if examples > 0 {
        loss_sum / examples as f64
    } else {
        0.0
    };
    if !mean_loss.is_finite() {
        return numeric_err("skip-gram training diverged: non-finite loss");
    }
    Ok(EpochStats {
        epoch,
        examples,
        mean_loss,
        final_lr: lr,
    })
}

#[inline]
fn decayed_lr(alpha: f64, processed: u64, total: u64) -> f64 {
    let remaining = 1.0 - processed as f64 / (total + 1) as f64;
    (alpha * remaining).max(alpha * 1e-4)
}

/// Train a skip-gram model from scratch. Deterministic given the seed.
pub fn train_skipgram(corpus: &[Vec<String>], config: &SgConfig) -> Result<(EmbeddingModel, Vec<EpochStats>)> {
    config.validate()?;
    let vocab = build_vocab(corpus, config.min_count)?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(config.seed);
    let input = init_input(vocab.len(), config.dim, &mut rng);
    let subword = match config.mode {
        EmbeddingMode::Word2Vec => None,
        EmbeddingMode::FastText => {
            let buckets = init_input(config.subword.bucket_count, config.dim, &mut rng);
            let word_ngrams = (0..vocab.len())
                .map(|id| {
                    super::char_ngrams(vocab.word(id), &config.subword)
                        .into_iter()
                        .map(|b| b as u32)
                        .collect()
                })
                .collect();
            Some(SubwordTable {
                cfg: config.subword,
                buckets,
                word_ngrams,
            })
        }
    };
    let mut model = EmbeddingModel {
        output: Mat::zeros(vocab.len(), config.dim),
        input,
        dim: config.dim,
        mode: config.mode,
        subword,
        vocab,
    };
    let table = SamplingTable::build(&model.vocab, config.unigram_power);
    let ids = to_ids(corpus, &model.vocab);
    let total_tokens: u64 = ids.iter().map(|s| s.len() as u64).sum::<u64>() * config.epochs as u64;
    let run = SgRun {
        table: &table,
        window: config.window,
        negatives: config.negatives,
        alpha: config.alpha,
        subsample_t: config.subsample_t,
        total_tokens,
    };
    let mut stats = Vec::with_capacity(config.epochs);
    let mut processed = 0u64;
    for epoch in 0..config.epochs {
        stats.push(run_epoch(&mut model, &ids, &run, &mut processed, epoch, &mut rng)?);
    }
    model.assert_finite()?;
    Ok((model, stats))
}

/// Continue training an existing model on the given sentences only. New
/// words are admitted with min_count 0 semantics (any count ≥ the config
/// min_count) and random-initialized rows; FastText words additionally get
/// their n-gram buckets. The negative-sampling table is rebuilt over the
/// grown vocabulary.
pub fn update_model(
    model: &mut EmbeddingModel,
    sentences: &[Vec<String>],
    config: &SgConfig,
) -> Result<Vec<EpochStats>> {
    config.validate()?;
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(config.seed);

    // Count update-corpus words; grow the vocabulary.
    let mut new_counts: std::collections::BTreeMap<&str, u64> = std::collections::BTreeMap::new();
    for s in sentences {
        for t in s {
            *new_counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut added = 0usize;
    for (word, count) in &new_counts {
        match model.vocab.id_of(word) {
            Some(id) => model.vocab.add_count(id, *count),
            None if *count >= config.min_count.max(1) => {
                model.vocab.push(word.to_string(), *count);
                added += 1;
            }
            None => {}
        }
    }
    if added > 0 {
        let dim = model.dim;
        let old_rows = model.input.rows;
        let grown = model.vocab.len();
        let mut input = Mat::zeros(grown, dim);
        input.data[..old_rows * dim].copy_from_slice(&model.input.data);
        let limit = 0.5 / dim as f64;
        for v in input.data[old_rows * dim..].iter_mut() {
            *v = rng.uniform(-limit, limit);
        }
        let mut output = Mat::zeros(grown, dim);
        output.data[..old_rows * dim].copy_from_slice(&model.output.data);
        model.input = input;
        model.output = output;
        if let Some(sub) = &mut model.subword {
            for id in old_rows..grown {
                let ngrams = sub.ngrams_of_word(model.vocab.word(id));
                sub.word_ngrams.push(ngrams);
            }
        }
    }

    let table = SamplingTable::build(&model.vocab, config.unigram_power);
    let ids = to_ids(sentences, &model.vocab);
    let total_tokens: u64 = ids.iter().map(|s| s.len() as u64).sum::<u64>() * config.epochs as u64;
    if total_tokens == 0 {
        return Ok(Vec::new());
    }
    let run = SgRun {
        table: &table,
        window: config.window,
        negatives: config.negatives,
        alpha: config.alpha,
        subsample_t: config.subsample_t,
        total_tokens,
    };
    let mut stats = Vec::with_capacity(config.epochs);
    let mut processed = 0u64;
    for epoch in 0..config.epochs {
        stats.push(run_epoch(model, &ids, &run, &mut processed, epoch, &mut rng)?);
    }
    model.assert_finite()?;
    Ok(stats)
}

/// Hogwild-style parallel skip-gram: worker threads update shared tables
/// through relaxed atomics without locks. Races are tolerated, so parallel
/// runs are not bit-reproducible; the deterministic single-threaded trainer
/// is the default everywhere correctness matters.
pub fn train_skipgram_parallel(
    corpus: &[Vec<String>],
    config: &SgConfig,
    threads: usize,
) -> Result<EmbeddingModel> {
    if threads <= 1 {
        return train_skipgram(corpus, config).map(|(m, _)| m);
    }
    config.validate()?;
    if config.mode != EmbeddingMode::Word2Vec {
        return config_err("parallel training supports word2vec mode only");
    }
    let vocab = build_vocab(corpus, config.min_count)?;
    let mut rng = Xoshiro256StarStar::seed_from_u64(config.seed);
    let input = init_input(vocab.len(), config.dim, &mut rng);
    let dim = config.dim;
    let n = vocab.len();

    let input_atomic: Vec<AtomicU64> = input.data.iter().map(|v| AtomicU64::new(v.to_bits())).collect();
    let output_atomic: Vec<AtomicU64> = (0..n * dim).map(|_| AtomicU64::new(0f64.to_bits())).collect();

    let table = SamplingTable::build(&vocab, config.unigram_power);
    let ids = to_ids(corpus, &vocab);
    let total_tokens: u64 = ids.iter().map(|s| s.len() as u64).sum::<u64>() * config.epochs as u64;
    let processed = AtomicU64::new(0);
    let freqs: Vec<f64> = (0..vocab.len()).map(|id| vocab.frequency(id)).collect();

    let load = |cells: &[AtomicU64], row: usize| -> Vec<f64> {
        cells[row * dim..(row + 1) * dim]
            .iter()
            .map(|c| f64::from_bits(c.load(Ordering::Relaxed)))
            .collect()
    };
    let add = |cells: &[AtomicU64], row: usize, delta: &[f64]| {
        for (c, d) in cells[row * dim..(row + 1) * dim].iter().zip(delta) {
            let cur = f64::from_bits(c.load(Ordering::Relaxed));
            c.store((cur + d).to_bits(), Ordering::Relaxed);
        }
    };

    std::thread::scope(|scope| {
        for worker in 0..threads {
            let ids = &ids;
            let table = &table;
            let freqs = &freqs;
            let processed = &processed;
            let input_atomic = &input_atomic;
            let output_atomic = &output_atomic;
            let config = config.clone();
            scope.spawn(move || {
                let mut rng =
                    Xoshiro256StarStar::seed_from_u64(config.seed ^ (worker as u64).wrapping_mul(0x9e3779b97f4a7c15));
                for _epoch in 0..config.epochs {
                    for sentence in ids.iter().skip(worker).step_by(threads) {
                        let kept: Vec<u32> = sentence
                            .iter()
                            .copied()
                            .filter(|&id| keep_token(freqs[id as usize], config.subsample_t, &mut rng))
                            .collect();
                        let done = processed.fetch_add(sentence.len() as u64, Ordering::Relaxed);
                        let lr = decayed_lr(config.alpha, done, total_tokens);
                        for (i, &center) in kept.iter().enumerate() {
                            let b = 1 + rng.gen_below(config.window as u64) as usize;
                            let lo = i.saturating_sub(b);
                            let hi = (i + b).min(kept.len() - 1);
                            for j in lo..=hi {
                                if j == i {
                                    continue;
                                }
                                let context = kept[j] as usize;
                                let hidden = load(input_atomic, center as usize);
                                let mut g_hidden = vec![0.0; dim];
                                for k in 0..=config.negatives {
                                    let (t, label) = if k == 0 {
                                        (context, 1.0)
                                    } else {
                                        let neg = table.draw(&mut rng);
                                        if neg == context {
                                            continue;
                                        }
                                        (neg, 0.0)
                                    };
                                    let out = load(output_atomic, t);
                                    let mut dot = 0.0;
                                    for d in 0..dim {
                                        dot += out[d] * hidden[d];
                                    }
                                    let coef = sigmoid(dot) - label;
                                    let delta: Vec<f64> =
                                        hidden.iter().map(|h| -lr * coef * h).collect();
                                    add(output_atomic, t, &delta);
                                    for d in 0..dim {
                                        g_hidden[d] += coef * out[d];
                                    }
                                }
                                for g in g_hidden.iter_mut() {
                                    *g = -lr * *g;
                                }
                                add(input_atomic, center as usize, &g_hidden);
                            }
                        }
                    }
                }
            });
        }
    });

    let input = Mat {
        rows: n,
        cols: dim,
        data: input_atomic
            .into_iter()
            .map(|c| f64::from_bits(c.into_inner()))
            .collect(),
    };
    let output = Mat {
        rows: n,
        cols: dim,
        data: output_atomic
            .into_iter()
            .map(|c| f64::from_bits(c.into_inner()))
            .collect(),
    };
    let model = EmbeddingModel {
        vocab,
        dim,
        mode: EmbeddingMode::Word2Vec,
        input,
        output,
        subword: None,
    };
    model.assert_finite()?;
    Ok(model)
}
