//! `annotate`: best-worst-scaling tuple generation, judgment aggregation,
//! and the split-half replicability statistic.

use std::path::Path;

use cicl_core::annotation::{
    generate_tuples, read_judgments_tsv, read_tuples_tsv, replicability, score_table,
    write_scores_tsv, write_tuples_tsv,
};
use cicl_core::corpus::read_sentences_tsv;
use cicl_core::Result;

use super::{create_writer, finish, open_reader};

/// Generate annotation tuples over the target sentences of a sentences.tsv.
pub fn tuples(sentences: &Path, reps: usize, seed: u64, out: &Path) -> Result<usize> {
    let records = read_sentences_tsv(open_reader(sentences)?)?;
    let ids: Vec<u32> = records
        .iter()
        .filter(|r| r.target_pos.is_some())
        .map(|r| r.id)
        .collect();
    let tuples = generate_tuples(&ids, reps, seed)?;
    let mut w = create_writer(out)?;
    write_tuples_tsv(&mut w, &tuples)?;
    finish(w)?;
    Ok(tuples.len())
}

/// Aggregate judgments into normalized informativeness scores.
pub fn aggregate(tuples_path: &Path, judgments_path: &Path, out: &Path) -> Result<usize> {
    let tuples = read_tuples_tsv(open_reader(tuples_path)?)?;
    let judgments = read_judgments_tsv(open_reader(judgments_path)?)?;
    let scores = score_table(&tuples, &judgments)?;
    let mut w = create_writer(out)?;
    write_scores_tsv(&mut w, &scores)?;
    finish(w)?;
    Ok(scores.len())
}

/// Split-half replicability across trials; returns (mean, variance).
pub fn replicability_stat(
    tuples_path: &Path,
    judgments_path: &Path,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let tuples = read_tuples_tsv(open_reader(tuples_path)?)?;
    let judgments = read_judgments_tsv(open_reader(judgments_path)?)?;
    replicability(&tuples, &judgments, trials, seed)
}
