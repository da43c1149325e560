//! `curriculum`: materialize one (heuristic, k, seed) curriculum as TSV.

use std::collections::HashMap;
use std::path::Path;

use cicl_core::annotation::read_scores_tsv;
use cicl_core::corpus::{read_sentences_tsv, CorpusSplit};
use cicl_core::curriculum::{build_batch_curriculum, write_curriculum_tsv, CurriculumSpec, ScoredPool};
use cicl_core::Result;

use super::{create_writer, finish, open_reader};

/// Rebuild the target split recorded in a sentences.tsv.
pub fn split_from_sentences(path: &Path) -> Result<CorpusSplit> {
    let records = read_sentences_tsv(open_reader(path)?)?;
    let mut split = CorpusSplit::default();
    for r in &records {
        match &r.target_word {
            Some(w) => split.target_map.entry(w.clone()).or_default().push(r.id),
            None => {
                split.non_target_ids.insert(r.id);
            }
        }
    }
    Ok(split)
}

pub fn scores_map(path: &Path) -> Result<HashMap<u32, f64>> {
    Ok(read_scores_tsv(open_reader(path)?)?
        .into_iter()
        .map(|s| (s.sentence_id, s.normalized))
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    sentences_path: &Path,
    scores_path: &Path,
    spec: &CurriculumSpec,
    per_target: Option<usize>,
    pool_seed: u64,
    out: &Path,
) -> Result<usize> {
    let split = split_from_sentences(sentences_path)?;
    let scores = scores_map(scores_path)?;
    let pool = ScoredPool::build(&split, &scores, per_target, pool_seed)?;
    let curriculum = build_batch_curriculum(&pool, spec)?;
    let mut w = create_writer(out)?;
    write_curriculum_tsv(&mut w, spec, &curriculum)?;
    finish(w)?;
    Ok(curriculum.values().map(|v| v.len()).sum())
}
