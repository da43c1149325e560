//! Metrics and experiment protocols: RMSE, thresholded ROC-AUC, grouped
//! k-fold assignment, Spearman correlation, similarity-task evaluation,
//! nonce median rank, and normalized attention-rank relation evaluation.
//!
//! Tie handling is average-rank everywhere: [`average_ranks`] is the single
//! implementation behind `spearman`, `roc_auc`, `normalized_rank`, and
//! `median_rank`.

use std::collections::BTreeMap;
use std::io::BufRead;

use crate::corpus::SentenceRecord;
use crate::embeddings::EmbeddingModel;
use crate::error::{data_err, numeric_err, Error, Result};
use crate::linalg::cosine;
use crate::rng::Xoshiro256StarStar;
use crate::scorer::{attention_weights_mode, ScorerParams};

/// 1-based ranks of `values` in ascending order, ties averaged.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        // Positions i..=j share the average of ranks i+1..=j+1.
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// 1-based ranks in descending order (rank 1 = largest), ties averaged.
pub fn average_ranks_desc(values: &[f64]) -> Vec<f64> {
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    average_ranks(&negated)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return data_err("rmse: length mismatch");
    }
    if pred.is_empty() {
        return data_err("rmse: empty input");
    }
    let mse: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(mse.sqrt())
}

/// Spearman rank correlation: Pearson correlation of average-ranked data.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return data_err("spearman: length mismatch");
    }
    if x.len() < 3 {
        return data_err("spearman: need at least 3 points");
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    pearson(&rx, &ry)
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return numeric_err("correlation undefined: zero variance");
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LabelMode {
    Bottom20,
    Median,
    Top20,
}

impl LabelMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bottom20" | "BOTTOM20" => Ok(LabelMode::Bottom20),
            "median" | "MEDIAN" => Ok(LabelMode::Median),
            "top20" | "TOP20" => Ok(LabelMode::Top20),
            _ => Err(Error::Config(format!("unknown label mode {s:?}"))),
        }
    }
}

/// Binary labels at an empirical quantile. Exactly floor(q·n) items are
/// positive; boundary ties are resolved by position so label counts are
/// deterministic (callers pass scores in sentence-id order).
pub fn binary_labels(scores: &[f64], mode: LabelMode) -> Result<Vec<bool>> {
    let n = scores.len();
    if n < 5 {
        return data_err("binary_labels: need at least 5 scores");
    }
    if scores.iter().all(|&s| s == scores[0]) {
        return numeric_err("binary_labels: all scores equal");
    }
    let count = match mode {
        LabelMode::Bottom20 | LabelMode::Top20 => n / 5,
        LabelMode::Median => n / 2,
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));
    let mut labels = vec![false; n];
    match mode {
        LabelMode::Bottom20 => {
            for &i in &idx[..count] {
                labels[i] = true;
            }
        }
        LabelMode::Top20 | LabelMode::Median => {
            for &i in &idx[n - count..] {
                labels[i] = true;
            }
        }
    }
    Ok(labels)
}

/// ROC-AUC in the Mann-Whitney form: P(score_pos > score_neg) + 0.5·P(tie),
/// computed by rank-sum with average ranks.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return data_err("roc_auc: length mismatch");
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return data_err("roc_auc: both classes must be present");
    }
    let ranks = average_ranks(scores);
    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Fold assignment stratified by target word: all sentences of one target
/// share a fold.
#[derive(Clone, Debug)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, target: &str) -> Option<usize> {
        self.folds.get(target).copied()
    }

    pub fn fold_sentence_counts(&self, sentences: &[SentenceRecord]) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for s in sentences {
            if let Some(w) = &s.target_word {
                if let Some(&f) = self.folds.get(w) {
                    counts[f] += 1;
                }
            }
        }
        counts
    }
}

/// Greedy largest-first grouped k-fold: targets are shuffled (seeded, so
/// count ties break randomly but reproducibly), sorted by sentence count
/// descending, and each assigned to the currently smallest fold.
pub fn group_kfold(sentences: &[SentenceRecord], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k == 0 {
        return data_err("group_kfold: k must be positive");
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for s in sentences {
        let w = s
            .target_word
            .as_deref()
            .ok_or_else(|| Error::Data(format!("sentence {} has no target word", s.id)))?;
        *counts.entry(w).or_insert(0) += 1;
    }
    if counts.len() < k {
        return data_err(format!(
            "group_kfold: {} targets but {} folds requested",
            counts.len(),
            k
        ));
    }
    let mut targets: Vec<(&str, usize)> = counts.into_iter().collect();
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    rng.shuffle(&mut targets);
    targets.sort_by(|a, b| b.1.cmp(&a.1)); // stable: shuffled order breaks ties
    let mut fold_sizes = vec![0usize; k];
    let mut folds = BTreeMap::new();
    for (word, count) in targets {
        let fold = fold_sizes
            .iter()
            .enumerate()
            .min_by_key(|(i, &size)| (size, *i))
            .map(|(i, _)| i)
            .unwrap();
        fold_sizes[fold] += count;
        folds.insert(word.to_string(), fold);
    }
    Ok(FoldAssignment { k, folds })
}

/// A word pair with a human similarity judgment.
#[derive(Clone, Debug)]
pub struct SimilarityPair {
    pub word_a: String,
    pub word_b: String,
    pub human_score: f64,
    pub pos: Option<String>,
    pub associated: Option<bool>,
}

/// Similarity task TSV: word_a, word_b, human_score[, pos, assoc].
pub fn read_similarity_tsv<R: BufRead>(reader: R) -> Result<Vec<SimilarityPair>> {
    let mut pairs = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return data_err(format!("similarity tsv line {}: expected 3+ fields", line_no + 1));
        }
        let human_score: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Data(format!("bad similarity score {:?}", fields[2])))?;
        if fields[0] == fields[1] {
            return data_err(format!("similarity tsv line {}: identical words", line_no + 1));
        }
        pairs.push(SimilarityPair {
            word_a: fields[0].to_string(),
            word_b: fields[1].to_string(),
            human_score,
            pos: fields.get(3).map(|s| s.to_string()).filter(|s| !s.is_empty()),
            associated: fields.get(4).and_then(|s| match *s {
                "1" | "true" => Some(true),
                "0" | "false" => Some(false),
                _ => None,
            }),
        });
    }
    Ok(pairs)
}

/// Spearman correlation of model cosine similarities against human scores.
/// Pairs with unrepresentable words are skipped and counted out of coverage.
pub fn similarity_eval(model: &EmbeddingModel, pairs: &[SimilarityPair]) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return data_err("similarity_eval: no pairs");
    }
    let mut cosines = Vec::new();
    let mut human = Vec::new();
    for pair in pairs {
        let (va, vb) = match (model.word_vector(&pair.word_a), model.word_vector(&pair.word_b)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        let c = cosine(&va, &vb);
        if !c.is_finite() {
            continue;
        }
        cosines.push(c);
        human.push(pair.human_score);
    }
    if cosines.len() < 3 {
        return data_err(format!(
            "similarity_eval: only {} of {} pairs scorable",
            cosines.len(),
            pairs.len()
        ));
    }
    let r = spearman(&cosines, &human)?;
    Ok((r, cosines.len() as f64 / pairs.len() as f64))
}

/// Mean of the two directed cosines for a pair under few-shot learning:
/// cos(nonce_a, background_b) and cos(nonce_b, background_a).
pub fn nonce_pair_score(
    background: &EmbeddingModel,
    nonces: &BTreeMap<String, Vec<f64>>,
    pair: &SimilarityPair,
) -> Result<f64> {
    let nonce_a = nonces
        .get(&pair.word_a)
        .ok_or_else(|| Error::Data(format!("no nonce vector for {:?}", pair.word_a)))?;
    let nonce_b = nonces
        .get(&pair.word_b)
        .ok_or_else(|| Error::Data(format!("no nonce vector for {:?}", pair.word_b)))?;
    let bg_a = background.word_vector(&pair.word_a)?;
    let bg_b = background.word_vector(&pair.word_b)?;
    Ok((cosine(nonce_a, &bg_b) + cosine(nonce_b, &bg_a)) / 2.0)
}

/// Rank of the gold vector among all vocabulary items by descending cosine
/// to the nonce vector (rank 1 = nearest; average ranks for ties, rounded up).
pub fn gold_rank(model: &EmbeddingModel, gold_word: &str, nonce: &[f64]) -> Result<u32> {
    let gold_id = model
        .vocab
        .id_of(gold_word)
        .ok_or_else(|| Error::Data(format!("gold word {gold_word:?} not in vocabulary")))?;
    let sims: Vec<f64> = (0..model.vocab.len())
        .map(|id| cosine(model.input_row(id), nonce))
        .collect();
    let ranks = average_ranks_desc(&sims);
    Ok(ranks[gold_id].ceil() as u32)
}

/// Median (lower-median convention) of per-target gold ranks.
pub fn median_rank(nonces: &[(String, Vec<f64>)], model: &EmbeddingModel) -> Result<u32> {
    if nonces.is_empty() {
        return data_err("median_rank: no nonce results");
    }
    let mut ranks = Vec::with_capacity(nonces.len());
    for (word, nonce) in nonces {
        ranks.push(gold_rank(model, word, nonce)?);
    }
    ranks.sort_unstable();
    Ok(ranks[(ranks.len() - 1) / 2])
}

/// Normalized rank of position `idx` within `weights`:
/// 1 − (rank − 1)/(N − 1), rank by descending weight with average ties.
pub fn normalized_rank(weights: &[f64], idx: usize) -> Result<f64> {
    let n = weights.len();
    if n < 2 {
        return data_err("normalized_rank: need at least 2 positions");
    }
    if idx >= n {
        return data_err("normalized_rank: index out of range");
    }
    let ranks = average_ranks_desc(weights);
    Ok(1.0 - (ranks[idx] - 1.0) / (n as f64 - 1.0))
}

/// The nine semantic relations of the template-generated evaluation set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Relation {
    IsA,
    Antonym,
    Synonym,
    PartOf,
    MemberOf,
    MadeOf,
    Entailment,
    HasA,
    HasProperty,
}

impl Relation {
    pub const ALL: [Relation; 9] = [
        Relation::IsA,
        Relation::Antonym,
        Relation::Synonym,
        Relation::PartOf,
        Relation::MemberOf,
        Relation::MadeOf,
        Relation::Entailment,
        Relation::HasA,
        Relation::HasProperty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Relation::IsA => "IsA",
            Relation::Antonym => "Antonym",
            Relation::Synonym => "Synonym",
            Relation::PartOf => "PartOf",
            Relation::MemberOf => "MemberOf",
            Relation::MadeOf => "MadeOf",
            Relation::Entailment => "Entailment",
            Relation::HasA => "HasA",
            Relation::HasProperty => "HasProperty",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Relation::ALL
            .iter()
            .copied()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Data(format!("unknown relation {s:?}")))
    }
}

/// A relation-template sentence with its three marked positions.
#[derive(Clone, Debug)]
pub struct RelationExample {
    pub tokens: Vec<String>,
    pub target_pos: usize,
    pub pair_pos: usize,
    pub rcue_pos: usize,
    pub relation: Relation,
}

impl RelationExample {
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        let (t, p, r) = (self.target_pos, self.pair_pos, self.rcue_pos);
        if t >= n || p >= n || r >= n {
            return data_err("relation example: position out of range");
        }
        if t == p || t == r || p == r {
            return data_err("relation example: positions must be distinct");
        }
        Ok(())
    }
}

/// Instantiate the fixed lexico-syntactic template for a relation with a
/// target word x and pair word y.
pub fn relation_template(relation: Relation, x: &str, y: &str) -> RelationExample {
    let (words, target_pos, pair_pos, rcue_pos): (Vec<&str>, usize, usize, usize) = match relation {
        Relation::IsA => (vec![x, "is", "a", "kind", "of", y], 0, 5, 3),
        Relation::Antonym => (
            vec![x, "can", "be", "used", "as", "the", "opposite", "of", y],
            0,
            8,
            6,
        ),
        Relation::Synonym => (
            vec![x, "can", "be", "used", "with", "the", "same", "meaning", "of", y],
            0,
            9,
            6,
        ),
        Relation::PartOf => (vec![x, "is", "part", "of", y], 0, 4, 2),
        Relation::MemberOf => (vec![x, "is", "member", "of", y], 0, 4, 2),
        Relation::MadeOf => (vec![x, "is", "made", "of", y], 0, 4, 2),
        Relation::Entailment => (
            vec!["if", x, "is", "true", "then", "also", y, "is", "true"],
            1,
            6,
            3,
        ),
        Relation::HasA => (vec![x, "can", "have", "or", "can", "contain", y], 0, 6, 2),
        Relation::HasProperty => (vec![y, "is", "to", "specify", x], 4, 0, 3),
    };
    RelationExample {
        tokens: words.into_iter().map(|w| w.to_string()).collect(),
        target_pos,
        pair_pos,
        rcue_pos,
        relation,
    }
}

/// Relation TSV: space-joined tokens, target_pos, pair_pos, rcue_pos, relation.
pub fn read_relations_tsv<R: BufRead>(reader: R) -> Result<Vec<RelationExample>> {
    let mut examples = Vec::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return data_err(format!("relation tsv line {}: expected 5 fields", line_no + 1));
        }
        let parse_pos = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Data(format!("bad position {s:?}")))
        };
        let ex = RelationExample {
            tokens: fields[0].split(' ').map(|t| t.to_string()).collect(),
            target_pos: parse_pos(fields[1])?,
            pair_pos: parse_pos(fields[2])?,
            rcue_pos: parse_pos(fields[3])?,
            relation: Relation::parse(fields[4])?,
        };
        ex.validate()?;
        examples.push(ex);
    }
    Ok(examples)
}

/// Per-relation normalized-rank summary for pair and relational-cue words,
/// plus a uniform-random-weight baseline over the same sentences.
#[derive(Clone, Debug)]
pub struct RelationReport {
    pub relation: Relation,
    pub n: usize,
    pub pair_mean: f64,
    pub pair_ci: f64,
    pub rcue_mean: f64,
    pub rcue_ci: f64,
    pub random_pair_mean: f64,
    pub random_rcue_mean: f64,
}

fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Run the scorer's attention over each example and summarize how highly the
/// pair and relational-cue words rank among the context words. The ranking is
/// over unmasked context positions (the masked target is excluded).
pub fn relation_eval(
    scorer: &ScorerParams,
    examples: &[RelationExample],
    seed: u64,
) -> Result<Vec<RelationReport>> {
    if examples.is_empty() {
        return data_err("relation_eval: no examples");
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut per_relation: BTreeMap<Relation, [Vec<f64>; 4]> = BTreeMap::new();
    for ex in examples {
        ex.validate()?;
        let record = SentenceRecord {
            id: 0,
            tokens: ex.tokens.clone(),
            target_pos: Some(ex.target_pos),
            target_word: Some(ex.tokens[ex.target_pos].clone()),
            source_line: 0,
        };
        let enc = scorer.encode(&record)?;
        let weights = attention_weights_mode(
            &enc.query,
            &enc.contexts,
            &enc.mask,
            &scorer.attn,
            scorer.mask_mode,
        )?;
        // Rank within real context positions only.
        let mut ctx_weights = Vec::new();
        let mut pair_slot = None;
        let mut rcue_slot = None;
        for (j, (&m, &w)) in enc.mask.iter().zip(&weights).enumerate() {
            if !m {
                continue;
            }
            if j == ex.pair_pos {
                pair_slot = Some(ctx_weights.len());
            }
            if j == ex.rcue_pos {
                rcue_slot = Some(ctx_weights.len());
            }
            ctx_weights.push(w);
        }
        let (pair_slot, rcue_slot) = match (pair_slot, rcue_slot) {
            (Some(p), Some(r)) => (p, r),
            _ => return data_err("relation_eval: pair or rcue position masked out"),
        };
        let pair_nr = normalized_rank(&ctx_weights, pair_slot)?;
        let rcue_nr = normalized_rank(&ctx_weights, rcue_slot)?;
        let random: Vec<f64> = (0..ctx_weights.len()).map(|_| rng.next_f64()).collect();
        let rnd_pair = normalized_rank(&random, pair_slot)?;
        let rnd_rcue = normalized_rank(&random, rcue_slot)?;
        let entry = per_relation
            .entry(ex.relation)
            .or_insert_with(|| [Vec::new(), Vec::new(), Vec::new(), Vec::new()]);
        entry[0].push(pair_nr);
        entry[1].push(rcue_nr);
        entry[2].push(rnd_pair);
        entry[3].push(rnd_rcue);
    }
    let mut reports = Vec::new();
    for (relation, [pair, rcue, rnd_pair, rnd_rcue]) in per_relation {
        let (pair_mean, pair_ci) = mean_ci(&pair);
        let (rcue_mean, rcue_ci) = mean_ci(&rcue);
        reports.push(RelationReport {
            relation,
            n: pair.len(),
            pair_mean,
            pair_ci,
            rcue_mean,
            rcue_ci,
            random_pair_mean: rnd_pair.iter().sum::<f64>() / rnd_pair.len() as f64,
            random_rcue_mean: rnd_rcue.iter().sum::<f64>() / rnd_rcue.len() as f64,
        });
    }
    Ok(reports)
}
