//! `embed`: train a word-embedding model on a plain-text corpus and save it
//! in the text format (with a bucket companion file for fasttext).

use std::io::Write;
use std::path::{Path, PathBuf};

use cicl_core::corpus::{read_corpus, SentenceRecord};
use cicl_core::embeddings::{
    save_embedding_text, save_subword_buckets, train_skipgram, train_skipgram_parallel, SgConfig,
};
use cicl_core::Result;

use super::{create_writer, finish, open_reader};

pub fn token_lists(records: &[SentenceRecord]) -> Vec<Vec<String>> {
    records.iter().map(|r| r.tokens.clone()).collect()
}

/// Returns the written files (embedding, optional buckets, training log).
pub fn run(corpus: &Path, config: &SgConfig, threads: usize, out: &Path) -> Result<Vec<PathBuf>> {
    let (records, _) = read_corpus(open_reader(corpus)?)?;
    let sentences = token_lists(&records);
    let mut outputs = Vec::new();
    if threads > 1 {
        let model = train_skipgram_parallel(&sentences, config, threads)?;
        let mut w = create_writer(out)?;
        save_embedding_text(&mut w, &model)?;
        finish(w)?;
        outputs.push(out.to_path_buf());
    } else {
        let (model, stats) = train_skipgram(&sentences, config)?;
        let mut w = create_writer(out)?;
        save_embedding_text(&mut w, &model)?;
        finish(w)?;
        outputs.push(out.to_path_buf());
        if let Some(sub) = &model.subword {
            let bucket_path = out.with_extension("buckets");
            let mut w = create_writer(&bucket_path)?;
            save_subword_buckets(&mut w, sub, model.dim)?;
            finish(w)?;
            outputs.push(bucket_path);
        }
        let log_path = out.with_extension("log.tsv");
        let mut w = create_writer(&log_path)?;
        writeln!(w, "epoch\texamples\tmean_loss\tlr")?;
        for s in &stats {
            writeln!(w, "{}\t{}\t{}\t{}", s.epoch, s.examples, s.mean_loss, s.final_lr)?;
        }
        finish(w)?;
        outputs.push(log_path);
    }
    Ok(outputs)
}
