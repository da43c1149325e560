//! Best-worst-scaling annotation: tuple generation under the balance
//! constraints, judgment aggregation into per-sentence informativeness
//! scores, and the split-half replicability statistic.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use crate::corpus::SentenceId;
use crate::error::{data_err, numeric_err, Error, Result};
use crate::eval::spearman;
use crate::rng::Xoshiro256StarStar;

pub const TUPLE_SIZE: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BwsTuple {
    pub tuple_id: u32,
    pub sentence_ids: [SentenceId; TUPLE_SIZE],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BwsJudgment {
    pub tuple_id: u32,
    pub annotator_id: u32,
    pub best_id: SentenceId,
    pub worst_id: SentenceId,
}

/// Aggregated per-sentence score: raw in [-1, 1], normalized in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct InformativenessScore {
    pub sentence_id: SentenceId,
    pub raw: f64,
    pub normalized: f64,
    pub n_ratings: u32,
}

/// Raw aggregate before corpus-wide normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct RawScore {
    pub sentence_id: SentenceId,
    pub raw: f64,
    pub n_ratings: u32,
}

/// Generate 4-tuples by chunking seeded permutations of the sentence list,
/// so each sentence appears in `tuples_per_sentence` (± 1) tuples, no two
/// tuples share the same 4 sentences, and no tuple repeats a sentence.
/// Within-chunk repeats and duplicate tuples are repaired by swapping with
/// later slots; if the constraints cannot be satisfied (e.g. 4 sentences at
/// 2 repetitions), this errors after a bounded number of rebuilds.
pub fn generate_tuples(
    sentence_ids: &[SentenceId],
    tuples_per_sentence: usize,
    seed: u64,
) -> Result<Vec<BwsTuple>> {
    let n = sentence_ids.len();
    if n < TUPLE_SIZE {
        return data_err(format!("cannot form a 4-tuple from {n} sentences"));
    }
    if tuples_per_sentence == 0 {
        return data_err("tuples_per_sentence must be at least 1");
    }
    let mut ids = sentence_ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != n {
        return data_err("duplicate sentence ids in tuple generation input");
    }

    const MAX_REBUILDS: u64 = 32;
    for attempt in 0..MAX_REBUILDS {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed.wrapping_add(attempt));
        if let Some(tuples) = try_build_tuples(&ids, tuples_per_sentence, &mut rng) {
            return Ok(tuples);
        }
    }
    data_err(format!(
        "tuple constraints unsatisfiable for {n} sentences at {tuples_per_sentence} repetitions"
    ))
}

fn try_build_tuples(
    ids: &[SentenceId],
    reps: usize,
    rng: &mut Xoshiro256StarStar,
) -> Option<Vec<BwsTuple>> {
    let n = ids.len();
    let mut slots: Vec<SentenceId> = Vec::with_capacity(n * reps + TUPLE_SIZE);
    for _ in 0..reps {
        let mut round = ids.to_vec();
        rng.shuffle(&mut round);
        slots.extend_from_slice(&round);
    }
    // Pad to a multiple of 4 with distinct extra sentences (those appear
    // reps + 1 times).
    let remainder = slots.len() % TUPLE_SIZE;
    if remainder != 0 {
        let extra = TUPLE_SIZE - remainder;
        for &i in rng.sample_indices(n, extra).iter() {
            slots.push(ids[i]);
        }
    }
    let n_tuples = slots.len() / TUPLE_SIZE;

    let mut seen: HashSet<[SentenceId; TUPLE_SIZE]> = HashSet::with_capacity(n_tuples);
    for t in 0..n_tuples {
        let start = t * TUPLE_SIZE;
        // Repair within-chunk repeats by swapping with later slots.
        for i in start..start + TUPLE_SIZE {
            if slots[start..i].contains(&slots[i]) {
                let fix = (start + TUPLE_SIZE..slots.len())
                    .find(|&j| !slots[start..start + TUPLE_SIZE].contains(&slots[j]))?;
                slots.swap(i, fix);
            }
        }
        // Repair duplicate tuples (as sets) the same way.
        let mut key = sorted_key(&slots[start..start + TUPLE_SIZE]);
        if seen.contains(&key) {
            let mut fixed = false;
            'outer: for i in start..start + TUPLE_SIZE {
                for j in start + TUPLE_SIZE..slots.len() {
                    if slots[start..start + TUPLE_SIZE].contains(&slots[j]) {
                        continue;
                    }
                    slots.swap(i, j);
                    key = sorted_key(&slots[start..start + TUPLE_SIZE]);
                    if !seen.contains(&key) {
                        fixed = true;
                        break 'outer;
                    }
                    slots.swap(i, j);
                }
            }
            if !fixed {
                return None;
            }
        }
        seen.insert(key);
    }

    Some(
        (0..n_tuples)
            .map(|t| {
                let start = t * TUPLE_SIZE;
                BwsTuple {
                    tuple_id: t as u32,
                    sentence_ids: [
                        slots[start],
                        slots[start + 1],
                        slots[start + 2],
                        slots[start + 3],
                    ],
                }
            })
            .collect(),
    )
}

fn sorted_key(chunk: &[SentenceId]) -> [SentenceId; TUPLE_SIZE] {
    let mut key = [chunk[0], chunk[1], chunk[2], chunk[3]];
    key.sort_unstable();
    key
}

/// Per-sentence mean of {+1 best, −1 worst, 0 unmarked} over every rating
/// the sentence received. A rating is one (judgment, tuple-member) pair, so
/// a sentence in 8 tuples judged by 3 annotators each has 24 ratings.
pub fn aggregate(tuples: &[BwsTuple], judgments: &[BwsJudgment]) -> Result<Vec<RawScore>> {
    let mut by_id: HashMap<u32, &BwsTuple> = HashMap::with_capacity(tuples.len());
    for t in tuples {
        if by_id.insert(t.tuple_id, t).is_some() {
            return data_err(format!("duplicate tuple id {}", t.tuple_id));
        }
        let key = sorted_key(&t.sentence_ids);
        if key.windows(2).any(|w| w[0] == w[1]) {
            return data_err(format!("tuple {} repeats a sentence", t.tuple_id));
        }
    }
    let mut sums: BTreeMap<SentenceId, (i64, u32)> = BTreeMap::new();
    for j in judgments {
        let tuple = by_id
            .get(&j.tuple_id)
            .ok_or_else(|| Error::Data(format!("judgment references unknown tuple {}", j.tuple_id)))?;
        if j.best_id == j.worst_id {
            return data_err(format!("judgment on tuple {}: best equals worst", j.tuple_id));
        }
        if !tuple.sentence_ids.contains(&j.best_id) || !tuple.sentence_ids.contains(&j.worst_id) {
            return data_err(format!(
                "judgment on tuple {}: pick outside the tuple",
                j.tuple_id
            ));
        }
        for &sid in &tuple.sentence_ids {
            let entry = sums.entry(sid).or_insert((0, 0));
            entry.1 += 1;
            if sid == j.best_id {
                entry.0 += 1;
            } else if sid == j.worst_id {
                entry.0 -= 1;
            }
        }
    }
    Ok(sums
        .into_iter()
        .map(|(sentence_id, (sum, n))| RawScore {
            sentence_id,
            raw: sum as f64 / n as f64,
            n_ratings: n,
        })
        .collect())
}

/// Affine rescale of the observed values onto [0, 1].
pub fn minmax_normalize(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return data_err("minmax_normalize: empty input");
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(min.is_finite() && max.is_finite()) {
        return numeric_err("minmax_normalize: non-finite value");
    }
    if min == max {
        return numeric_err("minmax_normalize: all values equal");
    }
    Ok(raw.iter().map(|v| (v - min) / (max - min)).collect())
}

/// Aggregate and corpus-wide min-max normalize in one step.
pub fn score_table(tuples: &[BwsTuple], judgments: &[BwsJudgment]) -> Result<Vec<InformativenessScore>> {
    let raws = aggregate(tuples, judgments)?;
    let normalized = minmax_normalize(&raws.iter().map(|r| r.raw).collect::<Vec<_>>())?;
    Ok(raws
        .into_iter()
        .zip(normalized)
        .map(|(r, normalized)| InformativenessScore {
            sentence_id: r.sentence_id,
            raw: r.raw,
            normalized,
            n_ratings: r.n_ratings,
        })
        .collect())
}

/// Split-half replicability: per trial, each sentence's ratings are shuffled
/// and split in half, both halves aggregated, and the two score vectors
/// compared by Spearman correlation. Returns (mean, population variance)
/// across trials. Trial t uses seed + t, so trials are order-independent.
pub fn replicability(
    tuples: &[BwsTuple],
    judgments: &[BwsJudgment],
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return data_err("replicability: need at least one trial");
    }
    let mut ratings: BTreeMap<SentenceId, Vec<i8>> = BTreeMap::new();
    let mut by_id: HashMap<u32, &BwsTuple> = HashMap::with_capacity(tuples.len());
    for t in tuples {
        by_id.insert(t.tuple_id, t);
    }
    for j in judgments {
        let tuple = by_id
            .get(&j.tuple_id)
            .ok_or_else(|| Error::Data(format!("judgment references unknown tuple {}", j.tuple_id)))?;
        for &sid in &tuple.sentence_ids {
            let r = if sid == j.best_id {
                1
            } else if sid == j.worst_id {
                -1
            } else {
                0
            };
            ratings.entry(sid).or_default().push(r);
        }
    }
    if let Some((sid, _)) = ratings.iter().find(|(_, rs)| rs.len() < 2) {
        return data_err(format!("sentence {sid} has fewer than 2 ratings"));
    }
    let mut rs = Vec::with_capacity(trials);
    for trial in 0..trials {
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed.wrapping_add(trial as u64));
        let mut half_a = Vec::with_capacity(ratings.len());
        let mut half_b = Vec::with_capacity(ratings.len());
        for rs in ratings.values() {
            let mut shuffled = rs.clone();
            rng.shuffle(&mut shuffled);
            let mid = shuffled.len() / 2;
            let mean = |xs: &[i8]| xs.iter().map(|&x| x as f64).sum::<f64>() / xs.len() as f64;
            half_a.push(mean(&shuffled[..mid]));
            half_b.push(mean(&shuffled[mid..]));
        }
        rs.push(spearman(&half_a, &half_b)?);
    }
    let mean = rs.iter().sum::<f64>() / rs.len() as f64;
    let var = rs.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / rs.len() as f64;
    Ok((mean, var))
}

pub fn write_tuples_tsv<W: Write>(out: &mut W, tuples: &[BwsTuple]) -> Result<()> {
    for t in tuples {
        let [a, b, c, d] = t.sentence_ids;
        writeln!(out, "{}\t{}\t{}\t{}\t{}", t.tuple_id, a, b, c, d)?;
    }
    Ok(())
}

pub fn read_tuples_tsv<R: BufRead>(reader: R) -> Result<Vec<BwsTuple>> {
    let mut tuples = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return data_err(format!("tuples tsv line {}: expected 5 fields", line_no + 1));
        }
        let parse = |s: &str| -> Result<u32> {
            s.parse().map_err(|_| Error::Data(format!("bad id {s:?}")))
        };
        tuples.push(BwsTuple {
            tuple_id: parse(fields[0])?,
            sentence_ids: [
                parse(fields[1])?,
                parse(fields[2])?,
                parse(fields[3])?,
                parse(fields[4])?,
            ],
        });
    }
    Ok(tuples)
}

/// Judgments TSV: tuple_id, annotator_id, best_id, worst_id.
pub fn read_judgments_tsv<R: BufRead>(reader: R) -> Result<Vec<BwsJudgment>> {
    let mut judgments = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return data_err(format!("judgments tsv line {}: expected 4 fields", line_no + 1));
        }
        let parse = |s: &str| -> Result<u32> {
            s.parse().map_err(|_| Error::Data(format!("bad id {s:?}")))
        };
        judgments.push(BwsJudgment {
            tuple_id: parse(fields[0])?,
            annotator_id: parse(fields[1])?,
            best_id: parse(fields[2])?,
            worst_id: parse(fields[3])?,
        });
    }
    Ok(judgments)
}

pub fn write_judgments_tsv<W: Write>(out: &mut W, judgments: &[BwsJudgment]) -> Result<()> {
    for j in judgments {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            j.tuple_id, j.annotator_id, j.best_id, j.worst_id
        )?;
    }
    Ok(())
}

/// Scores TSV: sentence_id, raw, normalized, n_ratings.
pub fn write_scores_tsv<W: Write>(out: &mut W, scores: &[InformativenessScore]) -> Result<()> {
    for s in scores {
        writeln!(out, "{}\t{}\t{}\t{}", s.sentence_id, s.raw, s.normalized, s.n_ratings)?;
    }
    Ok(())
}

pub fn read_scores_tsv<R: BufRead>(reader: R) -> Result<Vec<InformativenessScore>> {
    let mut scores = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return data_err(format!("scores tsv line {}: expected 4 fields", line_no + 1));
        }
        scores.push(InformativenessScore {
            sentence_id: fields[0]
                .parse()
                .map_err(|_| Error::Data(format!("bad sentence id {:?}", fields[0])))?,
            raw: fields[1]
                .parse()
                .map_err(|_| Error::Data(format!("bad raw score {:?}", fields[1])))?,
            normalized: fields[2]
                .parse()
                .map_err(|_| Error::Data(format!("bad normalized score {:?}", fields[2])))?,
            n_ratings: fields[3]
                .parse()
                .map_err(|_| Error::Data(format!("bad rating count {:?}", fields[3])))?,
        });
    }
    Ok(scores)
}
