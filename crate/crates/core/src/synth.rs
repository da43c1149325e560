//! Synthetic dataset generators. The annotated corpora this toolkit was
//! designed around are not redistributable, so constructed datasets with
//! known ground truth stand in for them: a cue-fraction regression task for
//! the scorer, a two-topic corpus for embedding sanity checks, and a full
//! curriculum testbed where per-sentence informativeness is built in.

use std::collections::HashMap;

use crate::corpus::{SentenceId, SentenceRecord};
use crate::eval::SimilarityPair;
use crate::rng::{derive_seed, Xoshiro256StarStar};

/// Dataset where the true score of a sentence is the fraction of its context
/// tokens drawn from a cue lexicon.
pub struct CueFractionDataset {
    pub train: Vec<(SentenceRecord, f64)>,
    pub test: Vec<(SentenceRecord, f64)>,
}

pub fn cue_fraction_dataset(n_train: usize, n_test: usize, seed: u64) -> CueFractionDataset {
    let cues: Vec<String> = (0..30).map(|i| format!("cue{i}")).collect();
    let fillers: Vec<String> = (0..120).map(|i| format!("filler{i}")).collect();
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut make = |id: SentenceId| -> (SentenceRecord, f64) {
        let context_len = rng.gen_range(8, 16) as usize;
        let n_cues = rng.gen_below(context_len as u64 + 1) as usize;
        let mut tokens: Vec<String> = Vec::with_capacity(context_len + 1);
        for _ in 0..n_cues {
            tokens.push(cues[rng.gen_below(cues.len() as u64) as usize].clone());
        }
        for _ in n_cues..context_len {
            tokens.push(fillers[rng.gen_below(fillers.len() as u64) as usize].clone());
        }
        rng.shuffle(&mut tokens);
        let target_pos = rng.gen_below(tokens.len() as u64 + 1) as usize;
        tokens.insert(target_pos, "wug".to_string());
        let score = n_cues as f64 / context_len as f64;
        (
            SentenceRecord {
                id,
                tokens,
                target_pos: Some(target_pos),
                target_word: Some("wug".to_string()),
                source_line: id as usize,
            },
            score,
        )
    };
    let train = (0..n_train as u32).map(&mut make).collect();
    let test = (n_train as u32..(n_train + n_test) as u32).map(&mut make).collect();
    CueFractionDataset { train, test }
}

/// Corpus of sentences drawn from two disjoint topic vocabularies.
pub struct TwoTopicCorpus {
    pub sentences: Vec<Vec<String>>,
    pub topic_a: Vec<String>,
    pub topic_b: Vec<String>,
}

pub fn two_topic_corpus(total_tokens: usize, words_per_topic: usize, seed: u64) -> TwoTopicCorpus {
    let topic_a: Vec<String> = (0..words_per_topic).map(|i| format!("alpha{i}")).collect();
    let topic_b: Vec<String> = (0..words_per_topic).map(|i| format!("beta{i}")).collect();
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut sentences = Vec::new();
    let mut produced = 0usize;
    while produced < total_tokens {
        let len = rng.gen_range(10, 20) as usize;
        let topic = if rng.next_f64() < 0.5 { &topic_a } else { &topic_b };
        let sentence: Vec<String> = (0..len)
            .map(|_| topic[rng.gen_below(topic.len() as u64) as usize].clone())
            .collect();
        produced += len;
        sentences.push(sentence);
    }
    TwoTopicCorpus {
        sentences,
        topic_a,
        topic_b,
    }
}

#[derive(Clone, Debug)]
pub struct TestbedConfig {
    pub topics: usize,
    pub targets_per_topic: usize,
    pub diagnostics_per_topic: usize,
    pub pool_per_target: usize,
    pub background_sentences: usize,
    pub seed: u64,
}

impl Default for TestbedConfig {
    fn default() -> Self {
        TestbedConfig {
            topics: 4,
            targets_per_topic: 4,
            diagnostics_per_topic: 8,
            pool_per_target: 256,
            background_sentences: 6000,
            seed: 1,
        }
    }
}

/// A full curriculum experiment testbed: a line-per-sentence corpus whose
/// target sentences are half informative (they co-occur with the target
/// topic's diagnostic words) and half uninformative (function-word frames
/// only), with the constructed informativeness score of every target
/// sentence and a similarity task whose gold scores follow topic membership.
pub struct CurriculumTestbed {
    pub corpus_lines: Vec<String>,
    /// Constructed informativeness, keyed by sentence id (= line index).
    pub scores: HashMap<SentenceId, f64>,
    pub targets: Vec<String>,
    pub pairs: Vec<SimilarityPair>,
    pub pool_per_target: usize,
}

pub fn curriculum_testbed(cfg: &TestbedConfig) -> CurriculumTestbed {
    let mut rng = Xoshiro256StarStar::seed_from_u64(cfg.seed);
    let function_words: Vec<String> = (0..24).map(|i| format!("fn{i}")).collect();
    let diagnostics: Vec<Vec<String>> = (0..cfg.topics)
        .map(|t| {
            (0..cfg.diagnostics_per_topic)
                .map(|i| format!("diag{t}x{i}"))
                .collect()
        })
        .collect();
    let targets: Vec<(String, usize)> = (0..cfg.topics)
        .flat_map(|t| {
            (0..cfg.targets_per_topic).map(move |i| (format!("target{t}x{i}"), t))
        })
        .collect();

    let mut lines: Vec<String> = Vec::new();
    let mut scores: HashMap<SentenceId, f64> = HashMap::new();

    // Background: topic sentences teach diagnostic co-occurrence, frame
    // sentences give the function words their own neighborhood. No targets.
    for _ in 0..cfg.background_sentences {
        let len = rng.gen_range(10, 14) as usize;
        let sentence: Vec<&String> = if rng.next_f64() < 0.7 {
            let topic = &diagnostics[rng.gen_below(cfg.topics as u64) as usize];
            (0..len)
                .map(|_| {
                    if rng.next_f64() < 0.85 {
                        &topic[rng.gen_below(topic.len() as u64) as usize]
                    } else {
                        &function_words[rng.gen_below(function_words.len() as u64) as usize]
                    }
                })
                .collect()
        } else {
            (0..len)
                .map(|_| &function_words[rng.gen_below(function_words.len() as u64) as usize])
                .collect()
        };
        lines.push(
            sentence
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        );
    }

    // Target sentences: per target, half high-informative, half low.
    for (target, topic_idx) in &targets {
        let mut trng = Xoshiro256StarStar::seed_from_u64(derive_seed(cfg.seed, target));
        let topic = &diagnostics[*topic_idx];
        for i in 0..cfg.pool_per_target {
            let high = i % 2 == 0;
            let context_len = trng.gen_range(10, 13) as usize;
            let mut tokens: Vec<String> = Vec::with_capacity(context_len + 1);
            let mut n_diag = 0usize;
            for _ in 0..context_len {
                if high && trng.next_f64() < 0.75 {
                    tokens.push(topic[trng.gen_below(topic.len() as u64) as usize].clone());
                    n_diag += 1;
                } else {
                    tokens
                        .push(function_words[trng.gen_below(function_words.len() as u64) as usize].clone());
                }
            }
            trng.shuffle(&mut tokens);
            let pos = trng.gen_below(tokens.len() as u64 + 1) as usize;
            tokens.insert(pos, target.clone());
            let id = lines.len() as SentenceId;
            lines.push(tokens.join(" "));
            // Diagnostic fraction plus a small jitter to break rank ties.
            let score = n_diag as f64 / context_len as f64 + 0.001 * trng.next_f64();
            scores.insert(id, score);
        }
    }

    // Similarity gold scores: same-topic target pairs are similar.
    let mut pairs = Vec::new();
    for a in 0..targets.len() {
        for b in a + 1..targets.len() {
            let (wa, ta) = &targets[a];
            let (wb, tb) = &targets[b];
            let base = if ta == tb { 8.0 } else { 2.0 };
            pairs.push(SimilarityPair {
                word_a: wa.clone(),
                word_b: wb.clone(),
                human_score: base + rng.next_f64(),
                pos: None,
                associated: None,
            });
        }
    }

    CurriculumTestbed {
        corpus_lines: lines,
        scores,
        targets: targets.into_iter().map(|(w, _)| w).collect(),
        pairs,
        pool_per_target: cfg.pool_per_target,
    }
}
