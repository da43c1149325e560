//! Embedding persistence in the common text convention: a "|V| dim" header
//! line, then one "word f1 … f_dim" row per word (input vectors). FastText
//! models carry a companion file for the subword bucket table.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{data_err, Error, Result};
use crate::linalg::Mat;

use super::{EmbeddingMode, EmbeddingModel, SubwordConfig, SubwordTable, Vocab};

pub fn save_embedding_text<W: Write>(out: &mut W, model: &EmbeddingModel) -> Result<()> {
    writeln!(out, "{} {}", model.vocab.len(), model.dim)?;
    for id in 0..model.vocab.len() {
        write!(out, "{}", model.vocab.word(id))?;
        for v in model.input.row(id) {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Companion subword file: header "bucket_count dim n_min n_max", then one
/// row of dim floats per bucket.
pub fn save_subword_buckets<W: Write>(out: &mut W, table: &SubwordTable, dim: usize) -> Result<()> {
    writeln!(
        out,
        "{} {} {} {}",
        table.cfg.bucket_count, dim, table.cfg.n_min, table.cfg.n_max
    )?;
    for b in 0..table.cfg.bucket_count {
        let row = table.buckets.row(b);
        let mut first = true;
        for v in row {
            if !first {
                write!(out, " ")?;
            }
            write!(out, "{v}")?;
            first = false;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn load_subword_buckets<R: BufRead>(reader: R) -> Result<(SubwordConfig, Mat)> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty subword file".to_string()))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 {
        return data_err("subword header must be: bucket_count dim n_min n_max");
    }
    let parse = |s: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::Data(format!("bad integer {s:?}")))
    };
    let bucket_count = parse(parts[0])?;
    let dim = parse(parts[1])?;
    let cfg = SubwordConfig {
        n_min: parse(parts[2])?,
        n_max: parse(parts[3])?,
        bucket_count,
    };
    let mut buckets = Mat::zeros(bucket_count, dim);
    for b in 0..bucket_count {
        let line = lines
            .next()
            .ok_or_else(|| Error::Data("subword file truncated".to_string()))??;
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Data(format!("bad float {t:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return data_err("subword row dimension mismatch");
        }
        buckets.data[b * dim..(b + 1) * dim].copy_from_slice(&values);
    }
    Ok((cfg, buckets))
}

/// Load a text-format embedding. Counts are not stored in the text format,
/// so the vocabulary is rebuilt with uniform counts; the result supports
/// lookup and similarity evaluation (and further training, with a uniform
/// negative-sampling distribution).
pub fn load_embedding_text<R: BufRead>(
    reader: R,
    subword: Option<(SubwordConfig, Mat)>,
) -> Result<EmbeddingModel> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data("empty embedding file".to_string()))??;
    let mut parts = header.split_whitespace();
    let (n, dim): (usize, usize) = match (parts.next(), parts.next()) {
        (Some(n), Some(d)) => (
            n.parse().map_err(|_| Error::Data("bad vocab size".to_string()))?,
            d.parse().map_err(|_| Error::Data("bad dimension".to_string()))?,
        ),
        _ => return data_err("embedding header must be: vocab_size dim"),
    };
    let mut words = Vec::with_capacity(n);
    let mut index = HashMap::with_capacity(n);
    let mut input = Mat::zeros(n, dim);
    for row in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| Error::Data("embedding file truncated".to_string()))??;
        let mut fields = line.split(' ');
        let word = fields
            .next()
            .ok_or_else(|| Error::Data("empty embedding row".to_string()))?
            .to_string();
        let values: Vec<f64> = fields
            .map(|t| t.parse::<f64>().map_err(|_| Error::Data(format!("bad float {t:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return data_err(format!("row for {word:?} has {} floats, expected {dim}", values.len()));
        }
        input.data[row * dim..(row + 1) * dim].copy_from_slice(&values);
        if index.insert(word.clone(), row).is_some() {
            return data_err(format!("duplicate word {word:?}"));
        }
        words.push(word);
    }
    let vocab = Vocab {
        counts: vec![1; words.len()],
        total_tokens: words.len() as u64,
        words,
        index,
    };
    let (mode, subword) = match subword {
        Some((cfg, buckets)) => {
            if buckets.cols != dim {
                return data_err("subword bucket dimension does not match embedding");
            }
            let word_ngrams = (0..vocab.len())
                .map(|id| {
                    super::char_ngrams(vocab.word(id), &cfg)
                        .into_iter()
                        .map(|b| b as u32)
                        .collect()
                })
                .collect();
            (
                EmbeddingMode::FastText,
                Some(SubwordTable {
                    cfg,
                    buckets,
                    word_ngrams,
                }),
            )
        }
        None => (EmbeddingMode::Word2Vec, None),
    };
    Ok(EmbeddingModel {
        output: Mat::zeros(vocab.len(), dim),
        input,
        dim,
        mode,
        subword,
        vocab,
    })
}
