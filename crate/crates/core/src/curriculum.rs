//! Curriculum construction from per-sentence informativeness scores: the five
//! selection heuristics, the few-shot background/holdout split, and the
//! few-shot sampling pools.
//!
//! All sampling derives a per-target seed as `seed ^ fnv1a64(target_word)`,
//! so per-target draws are independent of target iteration order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use crate::corpus::{CorpusSplit, SentenceId};
use crate::error::{config_err, data_err, Error, Result};
use crate::rng::{derive_seed, Xoshiro256StarStar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Heuristic {
    LowInfo,
    HighInfo,
    RandSelect,
    RandNonLow,
    RandNonHigh,
}

impl Heuristic {
    pub const ALL: [Heuristic; 5] = [
        Heuristic::LowInfo,
        Heuristic::HighInfo,
        Heuristic::RandSelect,
        Heuristic::RandNonLow,
        Heuristic::RandNonHigh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::LowInfo => "low_info",
            Heuristic::HighInfo => "high_info",
            Heuristic::RandSelect => "rand_select",
            Heuristic::RandNonLow => "rand_non_low",
            Heuristic::RandNonHigh => "rand_non_high",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Heuristic::ALL
            .iter()
            .copied()
            .find(|h| h.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown heuristic {s:?}")))
    }
}

/// Per-target sentences with scores, sorted ascending by (score, id).
#[derive(Clone, Debug, Default)]
pub struct ScoredPool {
    pools: BTreeMap<String, Vec<(SentenceId, f64)>>,
}

impl ScoredPool {
    /// Attach scores to the split's target sentences. When `sample_to` is
    /// set, each target is down-sampled to exactly that many sentences
    /// (per-target seeded), mirroring the fixed per-target pool size of the
    /// batch protocol; targets with fewer sentences error out.
    pub fn build(
        split: &CorpusSplit,
        scores: &HashMap<SentenceId, f64>,
        sample_to: Option<usize>,
        seed: u64,
    ) -> Result<Self> {
        let mut pools = BTreeMap::new();
        for (target, ids) in &split.target_map {
            let mut entries = Vec::with_capacity(ids.len());
            for id in ids {
                let score = scores
                    .get(id)
                    .ok_or_else(|| Error::Data(format!("no score for sentence {id}")))?;
                if !score.is_finite() {
                    return data_err(format!("non-finite score for sentence {id}"));
                }
                entries.push((*id, *score));
            }
            if let Some(n) = sample_to {
                if entries.len() < n {
                    return data_err(format!(
                        "target {target:?} has {} scored sentences, need {n}",
                        entries.len()
                    ));
                }
                let mut rng = Xoshiro256StarStar::seed_from_u64(derive_seed(seed, target));
                let picked = rng.sample_indices(entries.len(), n);
                let mut sampled: Vec<(SentenceId, f64)> =
                    picked.into_iter().map(|i| entries[i]).collect();
                sampled.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
                pools.insert(target.clone(), sampled);
            } else {
                entries.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
                pools.insert(target.clone(), entries);
            }
        }
        if pools.is_empty() {
            return data_err("scored pool is empty");
        }
        Ok(ScoredPool { pools })
    }

    pub fn targets(&self) -> impl Iterator<Item = &String> {
        self.pools.keys()
    }

    pub fn get(&self, target: &str) -> Option<&[(SentenceId, f64)]> {
        self.pools.get(target).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.pools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pools.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct CurriculumSpec {
    pub heuristic: Heuristic,
    pub k: usize,
    pub seed: u64,
}

/// Select k sentences per target. Low/High take the k lowest/highest scored
/// (ties by sentence id); the random heuristics sample uniformly from the
/// whole pool, its top half, or its bottom half. The half split is at n/2,
/// so sampling the full half (k = n/2) returns exactly that half.
pub fn build_batch_curriculum(
    pool: &ScoredPool,
    spec: &CurriculumSpec,
) -> Result<BTreeMap<String, Vec<SentenceId>>> {
    if spec.k == 0 {
        return config_err("curriculum k must be at least 1");
    }
    let mut out = BTreeMap::new();
    for (target, entries) in &pool.pools {
        let n = entries.len();
        let half = n / 2;
        let ids: Vec<SentenceId> = match spec.heuristic {
            Heuristic::LowInfo => {
                check_k(spec.k, n, target)?;
                entries[..spec.k].iter().map(|(id, _)| *id).collect()
            }
            Heuristic::HighInfo => {
                check_k(spec.k, n, target)?;
                entries[n - spec.k..].iter().rev().map(|(id, _)| *id).collect()
            }
            Heuristic::RandSelect => {
                check_k(spec.k, n, target)?;
                sample_ids(entries, spec.seed, target, spec.k)
            }
            Heuristic::RandNonLow => {
                check_k(spec.k, n - half, target)?;
                sample_ids(&entries[half..], spec.seed, target, spec.k)
            }
            Heuristic::RandNonHigh => {
                check_k(spec.k, half, target)?;
                sample_ids(&entries[..half], spec.seed, target, spec.k)
            }
        };
        out.insert(target.clone(), ids);
    }
    Ok(out)
}

fn check_k(k: usize, available: usize, target: &str) -> Result<()> {
    if k > available {
        return config_err(format!(
            "k = {k} exceeds the {available} eligible sentences for target {target:?}"
        ));
    }
    Ok(())
}

fn sample_ids(entries: &[(SentenceId, f64)], seed: u64, target: &str, k: usize) -> Vec<SentenceId> {
    let mut rng = Xoshiro256StarStar::seed_from_u64(derive_seed(seed, target));
    rng.sample_indices(entries.len(), k)
        .into_iter()
        .map(|i| entries[i].0)
        .collect()
}

/// Few-shot experiment plan.
#[derive(Clone, Debug)]
pub struct FewShotPlan {
    pub background_fraction: f64,
    pub pool_size: usize,
    pub exclusion: usize,
    pub shots: usize,
    pub seed: u64,
}

impl Default for FewShotPlan {
    fn default() -> Self {
        FewShotPlan {
            background_fraction: 0.6,
            pool_size: 50,
            exclusion: 256,
            shots: 6,
            seed: 1,
        }
    }
}

impl FewShotPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.background_fraction > 0.0 && self.background_fraction < 1.0) {
            return config_err("few-shot background fraction must be in (0, 1)");
        }
        if self.shots == 0 || self.shots > self.pool_size {
            return config_err("few-shot shots must be in 1..=pool_size");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FewShotSplit {
    pub background: Vec<SentenceId>,
    pub holdout: Vec<SentenceId>,
}

/// Per-target uniform split: floor(background_fraction · n) sentences join
/// the background corpus, the rest form the holdout the curricula draw from.
pub fn fewshot_split(
    target_map: &BTreeMap<String, Vec<SentenceId>>,
    plan: &FewShotPlan,
    seed: u64,
) -> Result<BTreeMap<String, FewShotSplit>> {
    plan.validate()?;
    let mut out = BTreeMap::new();
    for (target, ids) in target_map {
        if ids.len() < 5 {
            return data_err(format!(
                "target {target:?} has only {} sentences; few-shot needs at least 5",
                ids.len()
            ));
        }
        let mut shuffled = ids.clone();
        let mut rng = Xoshiro256StarStar::seed_from_u64(derive_seed(seed, target));
        rng.shuffle(&mut shuffled);
        let n_bg = (plan.background_fraction * ids.len() as f64).floor() as usize;
        let mut background = shuffled[..n_bg].to_vec();
        let mut holdout = shuffled[n_bg..].to_vec();
        background.sort_unstable();
        holdout.sort_unstable();
        out.insert(target.clone(), FewShotSplit { background, holdout });
    }
    Ok(out)
}

/// Build one target's sampling pool from its holdout. Low/High take the
/// pool_size lowest/highest-scored holdout sentences; the random heuristics
/// sample after excluding the `exclusion` lowest (or highest) scored
/// sentences of the full per-target scored set.
pub fn build_fewshot_pool(
    scored: &[(SentenceId, f64)],
    holdout: &BTreeSet<SentenceId>,
    heuristic: Heuristic,
    plan: &FewShotPlan,
    seed: u64,
    target: &str,
) -> Result<Vec<SentenceId>> {
    plan.validate()?;
    let holdout_scored: Vec<(SentenceId, f64)> = scored
        .iter()
        .copied()
        .filter(|(id, _)| holdout.contains(id))
        .collect();
    let m = holdout_scored.len();
    let need = plan.pool_size;
    let pool = match heuristic {
        Heuristic::LowInfo => {
            if m < need {
                return insufficient(target, m, need);
            }
            holdout_scored[..need].iter().map(|(id, _)| *id).collect()
        }
        Heuristic::HighInfo => {
            if m < need {
                return insufficient(target, m, need);
            }
            holdout_scored[m - need..].iter().rev().map(|(id, _)| *id).collect()
        }
        Heuristic::RandSelect => {
            if m < need {
                return insufficient(target, m, need);
            }
            sample_ids(&holdout_scored, seed, target, need)
        }
        Heuristic::RandNonLow | Heuristic::RandNonHigh => {
            if plan.exclusion >= scored.len() {
                return data_err(format!(
                    "exclusion {} covers the whole scored set for target {target:?}",
                    plan.exclusion
                ));
            }
            let remainder: &[(SentenceId, f64)] = match heuristic {
                Heuristic::RandNonLow => &scored[plan.exclusion..],
                _ => &scored[..scored.len() - plan.exclusion],
            };
            let candidates: Vec<(SentenceId, f64)> = remainder
                .iter()
                .copied()
                .filter(|(id, _)| holdout.contains(id))
                .collect();
            if candidates.len() < need {
                return insufficient(target, candidates.len(), need);
            }
            sample_ids(&candidates, seed, target, need)
        }
    };
    Ok(pool)
}

fn insufficient(target: &str, have: usize, need: usize) -> Result<Vec<SentenceId>> {
    data_err(format!(
        "target {target:?}: {have} eligible sentences for a pool of {need}"
    ))
}

/// Curriculum TSV: target_word, heuristic, k, sentence_id, rank_in_curriculum.
pub fn write_curriculum_tsv<W: Write>(
    out: &mut W,
    spec: &CurriculumSpec,
    curriculum: &BTreeMap<String, Vec<SentenceId>>,
) -> Result<()> {
    for (target, ids) in curriculum {
        for (rank, id) in ids.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                target,
                spec.heuristic.name(),
                spec.k,
                id,
                rank
            )?;
        }
    }
    Ok(())
}

pub fn read_curriculum_tsv<R: BufRead>(reader: R) -> Result<BTreeMap<String, Vec<SentenceId>>> {
    let mut out: BTreeMap<String, Vec<(usize, SentenceId)>> = BTreeMap::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return data_err(format!("curriculum tsv line {}: expected 5 fields", line_no + 1));
        }
        let id: SentenceId = fields[3]
            .parse()
            .map_err(|_| Error::Data(format!("bad sentence id {:?}", fields[3])))?;
        let rank: usize = fields[4]
            .parse()
            .map_err(|_| Error::Data(format!("bad rank {:?}", fields[4])))?;
        out.entry(fields[0].to_string()).or_default().push((rank, id));
    }
    Ok(out
        .into_iter()
        .map(|(target, mut entries)| {
            entries.sort_unstable();
            (target, entries.into_iter().map(|(_, id)| id).collect())
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One target with scores 0..n ascending by id.
    fn pool_of(n: usize) -> ScoredPool {
        let mut pools = BTreeMap::new();
        pools.insert(
            "wug".to_string(),
            (0..n as u32).map(|i| (i, i as f64)).collect::<Vec<_>>(),
        );
        ScoredPool { pools }
    }

    fn spec(heuristic: Heuristic, k: usize, seed: u64) -> CurriculumSpec {
        CurriculumSpec { heuristic, k, seed }
    }

    #[test]
    fn low_info_takes_lowest() {
        let pool = pool_of(512);
        let cur = build_batch_curriculum(&pool, &spec(Heuristic::LowInfo, 4, 0)).unwrap();
        assert_eq!(cur["wug"], vec![0, 1, 2, 3]);
        let cur = build_batch_curriculum(&pool, &spec(Heuristic::HighInfo, 3, 0)).unwrap();
        assert_eq!(cur["wug"], vec![511, 510, 509]);
    }

    #[test]
    fn rand_non_low_stays_in_top_half() {
        let pool = pool_of(512);
        for seed in 0..1000 {
            let cur = build_batch_curriculum(&pool, &spec(Heuristic::RandNonLow, 8, seed)).unwrap();
            assert!(cur["wug"].iter().all(|&id| id >= 256), "seed {seed}");
        }
        for seed in 0..1000 {
            let cur = build_batch_curriculum(&pool, &spec(Heuristic::RandNonHigh, 8, seed)).unwrap();
            assert!(cur["wug"].iter().all(|&id| id < 256), "seed {seed}");
        }
    }

    #[test]
    fn rand_non_low_full_half_is_exactly_the_half() {
        let pool = pool_of(512);
        let cur = build_batch_curriculum(&pool, &spec(Heuristic::RandNonLow, 256, 1)).unwrap();
        let mut ids = cur["wug"].clone();
        ids.sort_unstable();
        assert_eq!(ids, (256..512).collect::<Vec<u32>>());
        // k = 512 with the half-pool heuristics errors.
        assert!(build_batch_curriculum(&pool, &spec(Heuristic::RandNonLow, 512, 1)).is_err());
        assert!(build_batch_curriculum(&pool, &spec(Heuristic::RandNonHigh, 512, 1)).is_err());
    }

    #[test]
    fn containment_and_disjointness() {
        let pool = pool_of(64);
        for k in [2usize, 4, 8, 16] {
            let small: BTreeSet<u32> = build_batch_curriculum(&pool, &spec(Heuristic::LowInfo, k, 0))
                .unwrap()["wug"]
                .iter()
                .copied()
                .collect();
            let big: BTreeSet<u32> = build_batch_curriculum(&pool, &spec(Heuristic::LowInfo, 2 * k, 0))
                .unwrap()["wug"]
                .iter()
                .copied()
                .collect();
            assert!(small.is_subset(&big));
            let high: BTreeSet<u32> = build_batch_curriculum(&pool, &spec(Heuristic::HighInfo, k, 0))
                .unwrap()["wug"]
                .iter()
                .copied()
                .collect();
            assert!(small.is_disjoint(&high));
        }
    }

    #[test]
    fn same_spec_same_output() {
        let pool = pool_of(100);
        let a = build_batch_curriculum(&pool, &spec(Heuristic::RandSelect, 10, 7)).unwrap();
        let b = build_batch_curriculum(&pool, &spec(Heuristic::RandSelect, 10, 7)).unwrap();
        assert_eq!(a, b);
        let c = build_batch_curriculum(&pool, &spec(Heuristic::RandSelect, 10, 8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn split_is_60_40_with_floor() {
        let mut target_map = BTreeMap::new();
        target_map.insert("wug".to_string(), (0u32..512).collect::<Vec<_>>());
        let plan = FewShotPlan::default();
        let splits = fewshot_split(&target_map, &plan, 5).unwrap();
        let s = &splits["wug"];
        assert_eq!(s.background.len(), 307);
        assert_eq!(s.holdout.len(), 205);
        let bg: BTreeSet<u32> = s.background.iter().copied().collect();
        let ho: BTreeSet<u32> = s.holdout.iter().copied().collect();
        assert!(bg.is_disjoint(&ho));
        assert_eq!(bg.len() + ho.len(), 512);

        let other = fewshot_split(&target_map, &plan, 6).unwrap();
        assert_ne!(other["wug"].background, s.background);
    }

    #[test]
    fn fewshot_pools_respect_heuristics() {
        let scored: Vec<(u32, f64)> = (0..512u32).map(|i| (i, i as f64)).collect();
        let mut target_map = BTreeMap::new();
        target_map.insert("wug".to_string(), (0u32..512).collect::<Vec<_>>());
        let plan = FewShotPlan::default();
        let splits = fewshot_split(&target_map, &plan, 5).unwrap();
        let holdout: BTreeSet<u32> = splits["wug"].holdout.iter().copied().collect();

        let low = build_fewshot_pool(&scored, &holdout, Heuristic::LowInfo, &plan, 1, "wug").unwrap();
        let nonlow =
            build_fewshot_pool(&scored, &holdout, Heuristic::RandNonLow, &plan, 1, "wug").unwrap();
        assert_eq!(low.len(), 50);
        assert_eq!(nonlow.len(), 50);
        // Scores are the ids here, so the separable construction orders pools.
        let low_max = low.iter().max().unwrap();
        let nonlow_min = nonlow.iter().min().unwrap();
        assert!(low_max < nonlow_min, "low max {low_max} nonlow min {nonlow_min}");
        assert!(nonlow.iter().all(|id| holdout.contains(id)));
        assert!(nonlow.iter().all(|&id| id >= 256));

        let rand = build_fewshot_pool(&scored, &holdout, Heuristic::RandSelect, &plan, 1, "wug").unwrap();
        let distinct: BTreeSet<u32> = rand.iter().copied().collect();
        assert_eq!(distinct.len(), 50);
        assert!(distinct.iter().all(|id| holdout.contains(id)));

        // Sampling shots from a pool stays inside the pool.
        let mut rng = Xoshiro256StarStar::seed_from_u64(2);
        let shots: Vec<u32> = rng
            .sample_indices(rand.len(), 6)
            .into_iter()
            .map(|i| rand[i])
            .collect();
        let shot_set: BTreeSet<u32> = shots.iter().copied().collect();
        assert_eq!(shot_set.len(), 6);
        assert!(shot_set.iter().all(|id| distinct.contains(id)));
    }

    #[test]
    fn fewshot_pool_insufficient_remainder_errors() {
        let scored: Vec<(u32, f64)> = (0..60u32).map(|i| (i, i as f64)).collect();
        let holdout: BTreeSet<u32> = (0..24u32).collect();
        let plan = FewShotPlan {
            pool_size: 20,
            exclusion: 50,
            ..FewShotPlan::default()
        };
        // Only 10 sentences survive the exclusion; pool of 20 is impossible.
        assert!(build_fewshot_pool(&scored, &holdout, Heuristic::RandNonLow, &plan, 0, "w").is_err());
    }

    #[test]
    fn curriculum_tsv_roundtrip() {
        let pool = pool_of(32);
        let s = spec(Heuristic::RandSelect, 5, 3);
        let cur = build_batch_curriculum(&pool, &s).unwrap();
        let mut buf = Vec::new();
        write_curriculum_tsv(&mut buf, &s, &cur).unwrap();
        let back = read_curriculum_tsv(&buf[..]).unwrap();
        assert_eq!(back, cur);
    }
}
