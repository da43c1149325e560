//! Corpus ingestion: tokenize raw lines, locate target-word occurrences,
//! filter sentences, and split the corpus into target and non-target sets.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use crate::error::{config_err, data_err, Result};

pub type SentenceId = u32;

/// A tokenized sentence, optionally annotated with its single target word.
#[derive(Clone, Debug, PartialEq)]
pub struct SentenceRecord {
    pub id: SentenceId,
    pub tokens: Vec<String>,
    pub target_pos: Option<usize>,
    pub target_word: Option<String>,
    pub source_line: usize,
}

impl SentenceRecord {
    pub fn new(id: SentenceId, tokens: Vec<String>, source_line: usize) -> Self {
        SentenceRecord {
            id,
            tokens,
            target_pos: None,
            target_word: None,
            source_line,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Result of matching a sentence against the target-word set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetStatus {
    /// No target word occurs.
    None,
    /// Exactly one occurrence of exactly one target word.
    Single { word: String, pos: usize },
    /// Two or more distinct target words occur.
    MultiTarget,
    /// One target word occurs two or more times.
    RepeatTarget,
}

/// Why a sentence was excluded from the split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExcludeReason {
    MultiTarget,
    RepeatTarget,
    Len,
    SparseTarget,
}

impl ExcludeReason {
    pub fn code(self) -> &'static str {
        match self {
            ExcludeReason::MultiTarget => "MULTI_TARGET",
            ExcludeReason::RepeatTarget => "REPEAT_TARGET",
            ExcludeReason::Len => "LEN",
            ExcludeReason::SparseTarget => "SPARSE_TARGET",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FilterPolicy {
    pub min_len: usize,
    pub max_len: usize,
    pub min_sentences_per_target: usize,
    pub require_single_occurrence: bool,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        FilterPolicy {
            min_len: 10,
            max_len: 30,
            min_sentences_per_target: 512,
            require_single_occurrence: true,
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.min_len == 0 || self.min_len > self.max_len {
            return config_err(format!(
                "invalid length bounds: min_len={} max_len={}",
                self.min_len, self.max_len
            ));
        }
        if self.min_sentences_per_target == 0 {
            return config_err("min_sentences_per_target must be at least 1");
        }
        Ok(())
    }
}

/// Target / non-target partition of the retained sentences.
#[derive(Clone, Debug, Default)]
pub struct CorpusSplit {
    pub non_target_ids: BTreeSet<SentenceId>,
    pub target_map: BTreeMap<String, Vec<SentenceId>>,
}

impl CorpusSplit {
    pub fn target_ids(&self) -> BTreeSet<SentenceId> {
        self.target_map.values().flatten().copied().collect()
    }
}

/// Lowercase, split on whitespace, and detach punctuation: maximal runs of
/// alphanumeric characters become tokens and every other non-space character
/// becomes a single-character token.
pub fn tokenize(raw_line: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in raw_line.chars() {
        if ch.is_whitespace() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
        } else if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                current.push(lc);
            }
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            tokens.push(ch.to_string());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Tokenize every line of a reader, skipping lines that tokenize to nothing.
/// Ids are assigned in line order. Returns the records plus the total number
/// of input lines (including skipped empties).
pub fn read_corpus<R: BufRead>(reader: R) -> Result<(Vec<SentenceRecord>, usize)> {
    let mut records = Vec::new();
    let mut total_lines = 0usize;
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        total_lines += 1;
        let tokens = tokenize(&line);
        if tokens.is_empty() {
            continue;
        }
        records.push(SentenceRecord::new(records.len() as SentenceId, tokens, line_no + 1));
    }
    Ok((records, total_lines))
}

/// Classify a sentence against the target set.
pub fn match_targets(tokens: &[String], targets: &BTreeSet<String>) -> TargetStatus {
    let mut found: Vec<(&str, usize, usize)> = Vec::new(); // (word, first_pos, count)
    for (pos, tok) in tokens.iter().enumerate() {
        if targets.contains(tok.as_str()) {
            match found.iter_mut().find(|(w, _, _)| *w == tok.as_str()) {
                Some(entry) => entry.2 += 1,
                None => found.push((tok.as_str(), pos, 1)),
            }
        }
    }
    match found.len() {
        0 => TargetStatus::None,
        1 => {
            let (word, pos, count) = found[0];
            if count == 1 {
                TargetStatus::Single {
                    word: word.to_string(),
                    pos,
                }
            } else {
                TargetStatus::RepeatTarget
            }
        }
        _ => TargetStatus::MultiTarget,
    }
}

/// Annotate each sentence with its single target occurrence, when it has
/// exactly one. Returns the per-sentence statuses and the count of surviving
/// sentences per target word.
pub fn index_targets(
    sentences: &mut [SentenceRecord],
    targets: &BTreeSet<String>,
) -> (Vec<TargetStatus>, BTreeMap<String, usize>) {
    let mut statuses = Vec::with_capacity(sentences.len());
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for sentence in sentences.iter_mut() {
        let status = match_targets(&sentence.tokens, targets);
        if let TargetStatus::Single { word, pos } = &status {
            sentence.target_word = Some(word.clone());
            sentence.target_pos = Some(*pos);
            *counts.entry(word.clone()).or_insert(0) += 1;
        }
        statuses.push(status);
    }
    (statuses, counts)
}

/// Apply the filter policy and produce the target / non-target split plus
/// the per-sentence exclusion report.
pub fn filter_and_split(
    sentences: &[SentenceRecord],
    statuses: &[TargetStatus],
    policy: &FilterPolicy,
) -> Result<(CorpusSplit, Vec<(SentenceId, ExcludeReason)>)> {
    policy.validate()?;
    if statuses.len() != sentences.len() {
        return data_err("status list does not match sentence list");
    }

    let mut split = CorpusSplit::default();
    let mut excluded: Vec<(SentenceId, ExcludeReason)> = Vec::new();
    let mut candidates: BTreeMap<String, Vec<SentenceId>> = BTreeMap::new();
    let mut any_target_seen = false;

    for (sentence, status) in sentences.iter().zip(statuses) {
        match status {
            TargetStatus::None => {
                split.non_target_ids.insert(sentence.id);
            }
            TargetStatus::MultiTarget => {
                any_target_seen = true;
                excluded.push((sentence.id, ExcludeReason::MultiTarget));
            }
            TargetStatus::RepeatTarget => {
                any_target_seen = true;
                excluded.push((sentence.id, ExcludeReason::RepeatTarget));
            }
            TargetStatus::Single { word, .. } => {
                any_target_seen = true;
                let n = sentence.len();
                if n < policy.min_len || n > policy.max_len {
                    excluded.push((sentence.id, ExcludeReason::Len));
                } else {
                    candidates.entry(word.clone()).or_default().push(sentence.id);
                }
            }
        }
    }

    if !any_target_seen {
        return data_err("no sentence matched any target word");
    }

    for (word, ids) in candidates {
        if ids.len() < policy.min_sentences_per_target {
            // Sparse targets are quarantined, not recycled into non-target.
            excluded.extend(ids.into_iter().map(|id| (id, ExcludeReason::SparseTarget)));
        } else {
            split.target_map.insert(word, ids);
        }
    }

    if split.target_map.is_empty() {
        return data_err(format!(
            "every target word fell below {} usable sentences",
            policy.min_sentences_per_target
        ));
    }

    excluded.sort_unstable_by_key(|(id, _)| *id);
    Ok((split, excluded))
}

/// Read a target list: one word per line, tokenized the same way as the
/// corpus (so multi-token entries are rejected).
pub fn read_targets<R: BufRead>(reader: R) -> Result<BTreeSet<String>> {
    let mut targets = BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        let toks = tokenize(&line);
        match toks.len() {
            0 => continue,
            1 => {
                targets.insert(toks.into_iter().next().unwrap());
            }
            _ => return data_err(format!("target entry is not a single token: {line:?}")),
        }
    }
    if targets.is_empty() {
        return data_err("target list is empty");
    }
    Ok(targets)
}

/// sentences.tsv row: id, target_word or "-", target_pos or -1, space-joined tokens.
pub fn write_sentences_tsv<W: Write>(out: &mut W, sentences: &[SentenceRecord]) -> Result<()> {
    for s in sentences {
        let word = s.target_word.as_deref().unwrap_or("-");
        let pos = s.target_pos.map(|p| p as i64).unwrap_or(-1);
        writeln!(out, "{}\t{}\t{}\t{}", s.id, word, pos, s.tokens.join(" "))?;
    }
    Ok(())
}

pub fn read_sentences_tsv<R: BufRead>(reader: R) -> Result<Vec<SentenceRecord>> {
    let mut out = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(4, '\t');
        let (id, word, pos, toks) = match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
            _ => return data_err(format!("sentences.tsv line {}: expected 4 fields", line_no + 1)),
        };
        let id: SentenceId = id
            .parse()
            .map_err(|_| crate::error::Error::Data(format!("bad sentence id {id:?}")))?;
        let pos: i64 = pos
            .parse()
            .map_err(|_| crate::error::Error::Data(format!("bad target pos {pos:?}")))?;
        let tokens: Vec<String> = toks.split(' ').map(|t| t.to_string()).collect();
        if tokens.iter().any(|t| t.is_empty()) {
            return data_err(format!("sentences.tsv line {}: empty token", line_no + 1));
        }
        let mut rec = SentenceRecord::new(id, tokens, line_no + 1);
        if word != "-" {
            if pos < 0 || pos as usize >= rec.tokens.len() {
                return data_err(format!("sentences.tsv line {}: target pos out of range", line_no + 1));
            }
            if rec.tokens[pos as usize] != word {
                return data_err(format!(
                    "sentences.tsv line {}: token at target pos is not the target word",
                    line_no + 1
                ));
            }
            rec.target_word = Some(word.to_string());
            rec.target_pos = Some(pos as usize);
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_exclusions_tsv<W: Write>(
    out: &mut W,
    excluded: &[(SentenceId, ExcludeReason)],
) -> Result<()> {
    for (id, reason) in excluded {
        writeln!(out, "{}\t{}", id, reason.code())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn targets(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenize_detaches_punctuation_and_lowercases() {
        assert_eq!(tokenize("The cat sat."), vec!["the", "cat", "sat", "."]);
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("Don't stop"), vec!["don", "'", "t", "stop"]);
    }

    #[test]
    fn tokenize_handles_runs_and_unicode_space() {
        assert_eq!(tokenize("a--b"), vec!["a", "-", "-", "b"]);
        assert_eq!(tokenize("  x\t y "), vec!["x", "y"]);
    }

    #[test]
    fn match_targets_single_repeat_multi() {
        let t = targets(&["tesguino", "old", "new", "run"]);
        let toks = |s: &str| tokenize(s);
        assert_eq!(
            match_targets(&toks("i like tesguino"), &t),
            TargetStatus::Single {
                word: "tesguino".into(),
                pos: 2
            }
        );
        assert_eq!(match_targets(&toks("old meets new"), &t), TargetStatus::MultiTarget);
        assert_eq!(match_targets(&toks("run and run"), &t), TargetStatus::RepeatTarget);
        assert_eq!(match_targets(&toks("nothing here"), &t), TargetStatus::None);
    }

    fn sentence(id: u32, words: &str) -> SentenceRecord {
        SentenceRecord::new(id, tokenize(words), id as usize + 1)
    }

    #[test]
    fn split_partitions_and_filters() {
        let t = targets(&["wug"]);
        let policy = FilterPolicy {
            min_len: 3,
            max_len: 6,
            min_sentences_per_target: 2,
            require_single_occurrence: true,
        };
        let mut sentences = vec![
            sentence(0, "a plain background sentence here"),
            sentence(1, "the wug sat down"),
            sentence(2, "another wug sentence is fine"),
            sentence(3, "wug bad"),                       // too short
            sentence(4, "wug wug twice"),                 // repeat
            sentence(5, "one two three four five six seven"), // non-target
        ];
        let (statuses, counts) = index_targets(&mut sentences, &t);
        assert_eq!(counts["wug"], 3);
        let (split, excluded) = filter_and_split(&sentences, &statuses, &policy).unwrap();

        assert_eq!(split.target_map["wug"], vec![1, 2]);
        assert!(split.non_target_ids.contains(&0));
        assert!(split.non_target_ids.contains(&5));
        let reasons: Vec<_> = excluded.iter().map(|(id, r)| (*id, *r)).collect();
        assert!(reasons.contains(&(3, ExcludeReason::Len)));
        assert!(reasons.contains(&(4, ExcludeReason::RepeatTarget)));

        // Partition property: every id lands in exactly one bucket.
        let mut all: Vec<u32> = split.non_target_ids.iter().copied().collect();
        all.extend(split.target_ids());
        all.extend(excluded.iter().map(|(id, _)| *id));
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn sparse_targets_are_quarantined() {
        let t = targets(&["wug", "dax"]);
        let policy = FilterPolicy {
            min_len: 2,
            max_len: 10,
            min_sentences_per_target: 2,
            require_single_occurrence: true,
        };
        let mut sentences = vec![
            sentence(0, "the wug sat"),
            sentence(1, "a wug ran"),
            sentence(2, "the dax slept"), // only one dax sentence: dropped
        ];
        let (statuses, _) = index_targets(&mut sentences, &t);
        let (split, excluded) = filter_and_split(&sentences, &statuses, &policy).unwrap();
        assert!(!split.target_map.contains_key("dax"));
        assert!(!split.non_target_ids.contains(&2));
        assert!(excluded.contains(&(2, ExcludeReason::SparseTarget)));
    }

    #[test]
    fn threshold_is_strict() {
        // 511 valid sentences with a 512 minimum: the target is dropped.
        let t = targets(&["wug"]);
        let mut sentences: Vec<SentenceRecord> = (0..511)
            .map(|i| sentence(i, "the small wug sat on a mat with ten tokens"))
            .collect();
        let (statuses, _) = index_targets(&mut sentences, &t);
        let err = filter_and_split(&sentences, &statuses, &FilterPolicy::default());
        assert!(err.is_err());

        let mut sentences: Vec<SentenceRecord> = (0..512)
            .map(|i| sentence(i, "the small wug sat on a mat with ten tokens"))
            .collect();
        let (statuses, _) = index_targets(&mut sentences, &t);
        let (split, _) = filter_and_split(&sentences, &statuses, &FilterPolicy::default()).unwrap();
        assert_eq!(split.target_map["wug"].len(), 512);
    }

    #[test]
    fn sentences_tsv_roundtrip() {
        let t = targets(&["wug"]);
        let mut sentences = vec![sentence(0, "the wug sat"), sentence(1, "plain text line")];
        index_targets(&mut sentences, &t);
        let mut buf = Vec::new();
        write_sentences_tsv(&mut buf, &sentences).unwrap();
        let back = read_sentences_tsv(&buf[..]).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].target_word.as_deref(), Some("wug"));
        assert_eq!(back[0].target_pos, Some(1));
        assert_eq!(back[1].target_word, None);
        assert_eq!(back[1].tokens, sentences[1].tokens);
    }

    #[test]
    fn read_corpus_skips_empty_lines() {
        let text = "First line.\n\n  \nSecond line here\n";
        let (records, total) = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(total, 4);
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].id, 0);
        assert_eq!(records[1].id, 1);
        assert_eq!(records[1].source_line, 4);
    }
}
