//! `prepare`: tokenize a raw corpus, locate targets, filter, and split.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use cicl_core::corpus::{
    filter_and_split, index_targets, read_corpus, read_targets, write_exclusions_tsv,
    write_sentences_tsv, CorpusSplit, FilterPolicy, SentenceRecord,
};
use cicl_core::Result;

use super::{create_writer, finish, open_reader};

pub struct PrepareOutcome {
    pub sentences: Vec<SentenceRecord>,
    pub split: CorpusSplit,
    pub outputs: Vec<PathBuf>,
    pub summary: BTreeMap<&'static str, usize>,
}

/// Run the corpus stage in memory and write sentences.tsv, exclusions.tsv,
/// and summary.tsv under `out_dir`. Category counts in the summary sum to
/// the input line count.
pub fn run(corpus: &Path, targets: &Path, policy: &FilterPolicy, out_dir: &Path) -> Result<PrepareOutcome> {
    let (mut sentences, total_lines) = read_corpus(open_reader(corpus)?)?;
    let target_set = read_targets(open_reader(targets)?)?;
    let (statuses, _counts) = index_targets(&mut sentences, &target_set);
    let (split, excluded) = filter_and_split(&sentences, &statuses, policy)?;

    let mut summary: BTreeMap<&'static str, usize> = BTreeMap::new();
    summary.insert("EMPTY", total_lines - sentences.len());
    summary.insert("NON_TARGET", split.non_target_ids.len());
    summary.insert("TARGET", split.target_map.values().map(|v| v.len()).sum());
    for (_, reason) in &excluded {
        *summary.entry(reason.code()).or_insert(0) += 1;
    }
    debug_assert_eq!(summary.values().sum::<usize>(), total_lines);

    std::fs::create_dir_all(out_dir)?;
    let sentences_path = out_dir.join("sentences.tsv");
    let exclusions_path = out_dir.join("exclusions.tsv");
    let summary_path = out_dir.join("summary.tsv");

    let mut w = create_writer(&sentences_path)?;
    write_sentences_tsv(&mut w, &sentences)?;
    finish(w)?;

    let mut w = create_writer(&exclusions_path)?;
    write_exclusions_tsv(&mut w, &excluded)?;
    finish(w)?;

    let mut w = create_writer(&summary_path)?;
    writeln!(w, "category\tcount")?;
    for (category, count) in &summary {
        writeln!(w, "{category}\t{count}")?;
    }
    writeln!(w, "TOTAL_LINES\t{total_lines}")?;
    finish(w)?;

    Ok(PrepareOutcome {
        sentences,
        split,
        outputs: vec![sentences_path, exclusions_path, summary_path],
        summary,
    })
}
