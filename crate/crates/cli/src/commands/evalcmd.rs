//! `eval`: standalone evaluation of saved models — word-pair similarity for
//! embeddings, normalized attention ranks over relation-template sentences
//! for scorers.

use std::io::Write;
use std::path::Path;

use cicl_core::embeddings::{load_embedding_text, load_subword_buckets};
use cicl_core::eval::{read_relations_tsv, read_similarity_tsv, relation_eval, similarity_eval};
use cicl_core::Result;

use super::{create_writer, finish, open_reader, score};

pub fn similarity(
    embedding: &Path,
    buckets: Option<&Path>,
    pairs_path: &Path,
) -> Result<(f64, f64)> {
    let subword = buckets
        .map(|p| load_subword_buckets(open_reader(p)?))
        .transpose()?;
    let model = load_embedding_text(open_reader(embedding)?, subword)?;
    let pairs = read_similarity_tsv(open_reader(pairs_path)?)?;
    similarity_eval(&model, &pairs)
}

/// Per-relation normalized-rank report; writes a CSV and returns row count.
pub fn relations(
    model_path: &Path,
    ingested: Option<&Path>,
    relations_path: &Path,
    seed: u64,
    out: &Path,
) -> Result<usize> {
    let params = score::load_model(model_path, ingested)?;
    let examples = read_relations_tsv(open_reader(relations_path)?)?;
    let reports = relation_eval(&params, &examples, seed)?;
    let mut w = create_writer(out)?;
    writeln!(
        w,
        "relation,n,pair_mean,pair_ci95,rcue_mean,rcue_ci95,random_pair_mean,random_rcue_mean"
    )?;
    for r in &reports {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.relation.name(),
            r.n,
            r.pair_mean,
            r.pair_ci,
            r.rcue_mean,
            r.rcue_ci,
            r.random_pair_mean,
            r.random_rcue_mean
        )?;
    }
    finish(w)?;
    Ok(reports.len())
}
