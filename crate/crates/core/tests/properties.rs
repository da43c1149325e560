//! Property tests for the library's documented invariants.

use proptest::prelude::*;

use cicl_core::annotation::{aggregate, minmax_normalize, BwsJudgment, BwsTuple};
use cicl_core::corpus::tokenize;
use cicl_core::curriculum::{build_batch_curriculum, CurriculumSpec, Heuristic};
use cicl_core::embeddings::{char_ngrams, SubwordConfig};
use cicl_core::eval::{normalized_rank, roc_auc, spearman};
use cicl_core::rng::Xoshiro256StarStar;

fn judgment_table(
    n_sentences: u32,
    n_tuples: u32,
    seed: u64,
) -> (Vec<BwsTuple>, Vec<BwsJudgment>) {
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut tuples = Vec::new();
    let mut judgments = Vec::new();
    for tid in 0..n_tuples {
        let picked = rng.sample_indices(n_sentences as usize, 4);
        let ids = [
            picked[0] as u32,
            picked[1] as u32,
            picked[2] as u32,
            picked[3] as u32,
        ];
        tuples.push(BwsTuple {
            tuple_id: tid,
            sentence_ids: ids,
        });
        for annotator in 0..3 {
            let b = rng.gen_below(4) as usize;
            let mut w = rng.gen_below(4) as usize;
            while w == b {
                w = rng.gen_below(4) as usize;
            }
            judgments.push(BwsJudgment {
                tuple_id: tid,
                annotator_id: annotator,
                best_id: ids[b],
                worst_id: ids[w],
            });
        }
    }
    (tuples, judgments)
}

proptest! {
    #[test]
    fn aggregate_is_permutation_invariant(seed in 0u64..500, rotate in 0usize..50) {
        let (tuples, mut judgments) = judgment_table(12, 10, seed);
        let base = aggregate(&tuples, &judgments).unwrap();
        let r = rotate % judgments.len().max(1);
        judgments.rotate_left(r);
        judgments.reverse();
        let permuted = aggregate(&tuples, &judgments).unwrap();
        prop_assert_eq!(base, permuted);
    }

    #[test]
    fn aggregate_is_invariant_under_duplication(seed in 0u64..500) {
        let (tuples, judgments) = judgment_table(12, 10, seed);
        let base = aggregate(&tuples, &judgments).unwrap();
        let mut doubled = judgments.clone();
        doubled.extend(judgments.iter().cloned());
        let twice = aggregate(&tuples, &doubled).unwrap();
        for (a, b) in base.iter().zip(&twice) {
            prop_assert_eq!(a.sentence_id, b.sentence_id);
            prop_assert_eq!(a.raw, b.raw);
            prop_assert_eq!(a.n_ratings * 2, b.n_ratings);
            prop_assert!((-1.0..=1.0).contains(&a.raw));
        }
    }

    #[test]
    fn minmax_is_monotone(values in proptest::collection::vec(-100.0f64..100.0, 2..40)) {
        prop_assume!(values.iter().any(|&v| v != values[0]));
        let normalized = minmax_normalize(&values).unwrap();
        for (i, a) in values.iter().enumerate() {
            for (j, b) in values.iter().enumerate() {
                if a < b {
                    prop_assert!(normalized[i] < normalized[j]);
                }
            }
        }
        prop_assert!(normalized.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn roc_auc_invariant_under_monotone_transform(
        scores in proptest::collection::vec(0.0f64..1.0, 8..40),
        flips in proptest::collection::vec(any::<bool>(), 8..40),
    ) {
        let n = scores.len().min(flips.len());
        let scores = &scores[..n];
        let mut labels = flips[..n].to_vec();
        if labels.iter().all(|&l| l) { labels[0] = false; }
        if labels.iter().all(|&l| !l) { labels[0] = true; }
        let base = roc_auc(scores, &labels).unwrap();
        // exp is strictly monotone.
        let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
        let after = roc_auc(&transformed, &labels).unwrap();
        prop_assert!((base - after).abs() < 1e-12);
    }

    #[test]
    fn spearman_invariant_under_monotone_transforms(
        x in proptest::collection::vec(-10.0f64..10.0, 5..30),
        y in proptest::collection::vec(-10.0f64..10.0, 5..30),
    ) {
        let n = x.len().min(y.len());
        let x = &x[..n];
        let y = &y[..n];
        prop_assume!(x.iter().any(|&v| v != x[0]) && y.iter().any(|&v| v != y[0]));
        let base = spearman(x, y).unwrap();
        let tx: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        let ty: Vec<f64> = y.iter().map(|v| 2.0 * v + 5.0).collect();
        let after = spearman(&tx, &ty).unwrap();
        prop_assert!((base - after).abs() < 1e-10);
    }

    #[test]
    fn normalized_rank_invariant_under_positive_rescale(
        weights in proptest::collection::vec(0.0f64..1.0, 2..20),
        scale in 0.001f64..1000.0,
        idx_seed in any::<u64>(),
    ) {
        let idx = (idx_seed % weights.len() as u64) as usize;
        let base = normalized_rank(&weights, idx).unwrap();
        let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let after = normalized_rank(&scaled, idx).unwrap();
        prop_assert!((base - after).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn tokenize_is_deterministic_and_well_formed(line in "\\PC*") {
        let a = tokenize(&line);
        let b = tokenize(&line);
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|t| !t.is_empty()));
        prop_assert!(a.iter().all(|t| !t.chars().any(char::is_whitespace)));
    }

    #[test]
    fn char_ngrams_deterministic_and_nonempty(word in "[a-z]{1,12}") {
        let cfg = SubwordConfig::default();
        let a = char_ngrams(&word, &cfg);
        let b = char_ngrams(&word, &cfg);
        prop_assert_eq!(&a, &b);
        prop_assert!(!a.is_empty());
        prop_assert!(a.iter().all(|&id| id < cfg.bucket_count as u64));
    }

    #[test]
    fn curriculum_ids_unique_and_from_pool(seed in 0u64..200, k in 1usize..16) {
        let pool = {
            // Build a ScoredPool through the public constructor.
            use cicl_core::corpus::CorpusSplit;
            use std::collections::HashMap;
            let mut split = CorpusSplit::default();
            split.target_map.insert("w".to_string(), (0..64u32).collect());
            let scores: HashMap<u32, f64> = (0..64u32).map(|i| (i, (i % 7) as f64)).collect();
            cicl_core::curriculum::ScoredPool::build(&split, &scores, None, 0).unwrap()
        };
        for heuristic in Heuristic::ALL {
            let spec = CurriculumSpec { heuristic, k, seed };
            let cur = build_batch_curriculum(&pool, &spec).unwrap();
            let ids = &cur["w"];
            prop_assert_eq!(ids.len(), k);
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), k, "duplicate ids from {:?}", heuristic);
            prop_assert!(ids.iter().all(|&id| id < 64));
            // Determinism across calls.
            let again = build_batch_curriculum(&pool, &spec).unwrap();
            prop_assert_eq!(&cur, &again);
        }
    }
}
