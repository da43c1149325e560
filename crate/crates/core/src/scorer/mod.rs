//! The contextual informativeness regressor: masked multiplicative attention
//! over a pluggable token-embedding backbone, average pooling, and a two-layer
//! regression head, plus the three simple baselines.
//!
//! The backbone never exposes the true target word: the target slot is always
//! represented by the UNK vector (lookup mode) or by the mask-token row the
//! external encoder wrote for that position (ingested mode).

mod baselines;
mod io;
mod train;

pub use baselines::{fit_baseline_avg, fit_baseline_bow, fit_baseline_length, AvgBaseline, BowBaseline, LengthBaseline};
pub use io::{load_scorer, read_external_features_tsv, read_ingested_tsv, save_scorer};
pub use train::{
    example_gradients, example_loss, init_scorer, train, BackboneMode, ScorerGradients,
    TrainConfig, TrainOutcome,
};

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{SentenceId, SentenceRecord};
use crate::error::{data_err, Error, Result};
use crate::linalg::{dot, Mat};

/// How masked (target and padding) positions are removed from the attention
/// distribution. The default zeroes softmax outputs without renormalizing;
/// the pre-softmax variant excludes masked logits from the softmax entirely
/// and exists for ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskMode {
    PostSoftmaxZero,
    PreSoftmaxNegInf,
}

impl MaskMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "post" => Ok(MaskMode::PostSoftmaxZero),
            "pre" => Ok(MaskMode::PreSoftmaxNegInf),
            _ => Err(Error::Config(format!("unknown mask mode {s:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MaskMode::PostSoftmaxZero => "post",
            MaskMode::PreSoftmaxNegInf => "pre",
        }
    }
}

/// Trainable static lookup table. The last row is the shared UNK vector,
/// which also stands in for the masked target slot. Padding positions use
/// an implicit all-zero vector that is not a parameter.
#[derive(Clone, Debug)]
pub struct LookupBackbone {
    pub dim: usize,
    pub vocab: BTreeMap<String, usize>,
    pub vectors: Mat,
}

impl LookupBackbone {
    pub fn unk_row(&self) -> usize {
        self.vectors.rows - 1
    }

    pub fn row_of(&self, token: &str) -> usize {
        self.vocab.get(token).copied().unwrap_or(self.vectors.rows - 1)
    }
}

/// Read-only contextual vectors ingested from file: one row per sentence
/// position, with the target position carrying the encoder's mask-token
/// vector.
#[derive(Clone, Debug, Default)]
pub struct IngestedVectors {
    pub dim: usize,
    pub by_sentence: HashMap<SentenceId, Vec<Vec<f64>>>,
}

#[derive(Clone, Debug)]
pub enum Backbone {
    Lookup(LookupBackbone),
    Ingested(IngestedVectors),
}

impl Backbone {
    pub fn dim(&self) -> usize {
        match self {
            Backbone::Lookup(b) => b.dim,
            Backbone::Ingested(b) => b.dim,
        }
    }

    pub fn is_lookup(&self) -> bool {
        matches!(self, Backbone::Lookup(_))
    }
}

/// Opaque per-sentence feature vectors concatenated at the regression head.
#[derive(Clone, Debug, Default)]
pub struct ExternalFeatures {
    pub dim: usize,
    pub by_sentence: HashMap<SentenceId, Vec<f64>>,
}

impl ExternalFeatures {
    pub fn get(&self, id: SentenceId) -> Result<&[f64]> {
        let v = self
            .by_sentence
            .get(&id)
            .ok_or_else(|| Error::Data(format!("no external features for sentence {id}")))?;
        if v.len() != self.dim {
            return data_err(format!(
                "external feature length {} != declared {}",
                v.len(),
                self.dim
            ));
        }
        Ok(v)
    }
}

/// A sentence rendered into fixed-length vector form: query for the masked
/// target slot, one context vector per position (zero rows for padding), and
/// the context mask (true = real context token).
#[derive(Clone, Debug)]
pub struct Encoding {
    pub query: Vec<f64>,
    pub contexts: Vec<Vec<f64>>,
    pub mask: Vec<bool>,
    /// Lookup-table row feeding each position, for gradient scatter.
    /// None for padding and in ingested mode.
    pub rows: Vec<Option<usize>>,
    /// Lookup row behind the query vector (UNK) in lookup mode.
    pub query_row: Option<usize>,
    pub n_context: usize,
}

/// Attention matrix plus regression head over a token-embedding backbone.
#[derive(Clone, Debug)]
pub struct ScorerParams {
    pub dim: usize,
    pub hidden: usize,
    pub ext_dim: usize,
    pub max_len: usize,
    pub mask_mode: MaskMode,
    /// Bilinear attention matrix (dim × dim).
    pub attn: Mat,
    /// Hidden layer (hidden × (dim + ext_dim)) and bias.
    pub w_hidden: Mat,
    pub b_hidden: Vec<f64>,
    /// Output layer (hidden) and bias.
    pub w_out: Vec<f64>,
    pub b_out: f64,
    pub backbone: Backbone,
}

impl ScorerParams {
    pub fn check_shapes(&self) -> Result<()> {
        let d = self.dim;
        let h = self.hidden;
        if self.attn.rows != d || self.attn.cols != d {
            return data_err("attention matrix shape mismatch");
        }
        if self.w_hidden.rows != h || self.w_hidden.cols != d + self.ext_dim {
            return data_err("hidden layer shape mismatch");
        }
        if self.b_hidden.len() != h || self.w_out.len() != h {
            return data_err("head vector shape mismatch");
        }
        if self.backbone.dim() != d {
            return data_err("backbone dimension mismatch");
        }
        Ok(())
    }

    /// Encode a sentence against this scorer's backbone, truncating from the
    /// end to max_len but never truncating the target position: when the
    /// target would fall outside, the window ends at the target instead.
    pub fn encode(&self, sentence: &SentenceRecord) -> Result<Encoding> {
        encode_with(&self.backbone, sentence, self.max_len)
    }

    /// Forward pass: masked attention, average pooling over unmasked
    /// positions, optional external features, ReLU hidden layer, linear out.
    pub fn predict(&self, sentence: &SentenceRecord, ext: Option<&ExternalFeatures>) -> Result<f64> {
        let enc = self.encode(sentence)?;
        let fwd = self.forward(&enc, self.head_input_ext(sentence, ext)?.as_deref())?;
        Ok(fwd.score)
    }

    /// Score an already-encoded sentence (external feature slice, if any,
    /// supplied directly).
    pub fn predict_encoded(&self, enc: &Encoding, ext: Option<&[f64]>) -> Result<f64> {
        Ok(self.forward(enc, ext)?.score)
    }

    pub(crate) fn head_input_ext(
        &self,
        sentence: &SentenceRecord,
        ext: Option<&ExternalFeatures>,
    ) -> Result<Option<Vec<f64>>> {
        if self.ext_dim == 0 {
            return Ok(None);
        }
        let ext = ext.ok_or_else(|| {
            Error::Data("scorer expects external features but none were supplied".to_string())
        })?;
        if ext.dim != self.ext_dim {
            return data_err(format!(
                "external feature dimension {} != scorer ext_dim {}",
                ext.dim, self.ext_dim
            ));
        }
        Ok(Some(ext.get(sentence.id)?.to_vec()))
    }

    pub(crate) fn forward(&self, enc: &Encoding, ext: Option<&[f64]>) -> Result<Forward> {
        let d = self.dim;
        let probs = attention_probs(&enc.query, &enc.contexts, &enc.mask, &self.attn, self.mask_mode)?;
        let mut weights = probs.clone();
        for (w, &m) in weights.iter_mut().zip(&enc.mask) {
            if !m {
                *w = 0.0;
            }
        }
        let m = enc.n_context as f64;
        let mut pooled = vec![0.0; d];
        for (j, ctx) in enc.contexts.iter().enumerate() {
            let w = weights[j];
            if w != 0.0 {
                for (p, c) in pooled.iter_mut().zip(ctx) {
                    *p += w * c;
                }
            }
        }
        for p in pooled.iter_mut() {
            *p /= m;
        }
        let mut head_in = pooled;
        match (self.ext_dim, ext) {
            (0, _) => {}
            (_, Some(e)) if e.len() == self.ext_dim => head_in.extend_from_slice(e),
            _ => return data_err("external feature dimension mismatch"),
        }
        let mut pre_act = self.w_hidden.matvec(&head_in);
        for (z, b) in pre_act.iter_mut().zip(&self.b_hidden) {
            *z += b;
        }
        let hidden: Vec<f64> = pre_act.iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect();
        let score = dot(&self.w_out, &hidden) + self.b_out;
        Ok(Forward {
            probs,
            weights,
            head_in,
            pre_act,
            hidden,
            score,
        })
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Forward {
    pub probs: Vec<f64>,
    pub weights: Vec<f64>,
    /// Pooled context vector, with external features appended when present.
    pub head_in: Vec<f64>,
    pub pre_act: Vec<f64>,
    pub hidden: Vec<f64>,
    pub score: f64,
}

pub(crate) fn encode_with(
    backbone: &Backbone,
    sentence: &SentenceRecord,
    max_len: usize,
) -> Result<Encoding> {
    let target_pos = sentence
        .target_pos
        .ok_or_else(|| Error::Data(format!("sentence {} has no target position", sentence.id)))?;
    let len = sentence.tokens.len();
    if target_pos >= len {
        return data_err(format!("sentence {}: target position out of range", sentence.id));
    }
    let window_start = if len <= max_len || target_pos < max_len {
        0
    } else {
        target_pos + 1 - max_len
    };
    let window_len = (len - window_start).min(max_len);
    let local_target = target_pos - window_start;

    let dim = backbone.dim();
    let mut contexts = vec![vec![0.0; dim]; max_len];
    let mut rows = vec![None; max_len];
    let mut mask = vec![false; max_len];
    let query;
    let query_row;

    match backbone {
        Backbone::Lookup(b) => {
            for j in 0..window_len {
                let row = if j == local_target {
                    b.unk_row()
                } else {
                    b.row_of(&sentence.tokens[window_start + j])
                };
                contexts[j] = b.vectors.row(row).to_vec();
                rows[j] = Some(row);
                mask[j] = j != local_target;
            }
            query = b.vectors.row(b.unk_row()).to_vec();
            query_row = Some(b.unk_row());
        }
        Backbone::Ingested(b) => {
            let sent_rows = b.by_sentence.get(&sentence.id).ok_or_else(|| {
                Error::Data(format!("no ingested vectors for sentence {}", sentence.id))
            })?;
            if sent_rows.len() != len {
                return data_err(format!(
                    "ingested vectors for sentence {}: {} rows for {} tokens",
                    sentence.id,
                    sent_rows.len(),
                    len
                ));
            }
            for j in 0..window_len {
                let row = &sent_rows[window_start + j];
                if row.len() != dim {
                    return data_err(format!("ingested vector dimension mismatch in sentence {}", sentence.id));
                }
                contexts[j] = row.clone();
                mask[j] = j != local_target;
            }
            query = sent_rows[target_pos].clone();
            query_row = None;
        }
    }

    let n_context = mask.iter().filter(|&&m| m).count();
    if n_context == 0 {
        return data_err(format!("sentence {}: no context tokens after masking", sentence.id));
    }
    Ok(Encoding {
        query,
        contexts,
        mask,
        rows,
        query_row,
        n_context,
    })
}

/// Softmax of the bilinear logits query·(W·context_j). In post-softmax mode
/// the softmax runs over every position (padding rows are zero vectors, so
/// their logits are 0); in pre-softmax mode masked logits are excluded.
/// Returned values are the softmax outputs before mask zeroing.
fn attention_probs(
    query: &[f64],
    contexts: &[Vec<f64>],
    mask: &[bool],
    attn: &Mat,
    mode: MaskMode,
) -> Result<Vec<f64>> {
    if contexts.len() != mask.len() {
        return data_err("attention: context/mask length mismatch");
    }
    if !mask.iter().any(|&m| m) {
        return data_err("attention: mask is all false");
    }
    // query·(W·x) = (Wᵀ·query)·x, so precompute one matvec.
    let qw = attn.matvec_t(query);
    let logits: Vec<f64> = contexts.iter().map(|ctx| dot(&qw, ctx)).collect();
    let included = |j: usize| mode == MaskMode::PostSoftmaxZero || mask[j];
    let mut max_logit = f64::NEG_INFINITY;
    for (j, &l) in logits.iter().enumerate() {
        if included(j) && l > max_logit {
            max_logit = l;
        }
    }
    if !max_logit.is_finite() {
        return crate::error::numeric_err("attention: non-finite logits");
    }
    let mut probs = vec![0.0; logits.len()];
    let mut denom = 0.0;
    for (j, &l) in logits.iter().enumerate() {
        if included(j) {
            let e = (l - max_logit).exp();
            probs[j] = e;
            denom += e;
        }
    }
    for p in probs.iter_mut() {
        *p /= denom;
    }
    Ok(probs)
}

/// Attention weights with masked positions zeroed and no renormalization
/// (post-softmax zeroing, the default scoring rule).
pub fn attention_weights(
    query: &[f64],
    contexts: &[Vec<f64>],
    mask: &[bool],
    attn: &Mat,
) -> Result<Vec<f64>> {
    attention_weights_mode(query, contexts, mask, attn, MaskMode::PostSoftmaxZero)
}

pub fn attention_weights_mode(
    query: &[f64],
    contexts: &[Vec<f64>],
    mask: &[bool],
    attn: &Mat,
    mode: MaskMode,
) -> Result<Vec<f64>> {
    let mut probs = attention_probs(query, contexts, mask, attn, mode)?;
    for (p, &m) in probs.iter_mut().zip(mask) {
        if !m {
            *p = 0.0;
        }
    }
    Ok(probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Xoshiro256StarStar;

    fn identity(d: usize) -> Mat {
        let mut m = Mat::zeros(d, d);
        for i in 0..d {
            *m.at_mut(i, i) = 1.0;
        }
        m
    }

    #[test]
    fn single_unmasked_position_gets_softmax_share() {
        let attn = identity(2);
        let query = vec![1.0, 0.0];
        // One real context position, one masked target slot.
        let contexts = vec![vec![2.0, 0.0], vec![0.5, 0.0]];
        let mask = vec![true, false];
        let w = attention_weights(&query, &contexts, &mask, &attn).unwrap();
        // Softmax over logits {2.0, 0.5}; masked weight is zeroed afterwards.
        let e0 = (0.0f64).exp();
        let e1 = (-1.5f64).exp();
        assert!((w[0] - e0 / (e0 + e1)).abs() < 1e-12);
        assert_eq!(w[1], 0.0);

        // With a single position in the sentence, the weight is exactly 1.
        let w = attention_weights(&query, &contexts[..1].to_vec(), &[true], &attn).unwrap();
        assert_eq!(w[0], 1.0);
    }

    #[test]
    fn equal_logits_share_weight() {
        let attn = identity(3);
        let query = vec![0.3, -0.2, 0.9];
        let ctx = vec![0.1, 0.4, -0.7];
        let contexts = vec![ctx.clone(), ctx.clone()];
        let w = attention_weights(&query, &contexts, &[true, true], &attn).unwrap();
        assert_eq!(w[0], w[1]);
    }

    #[test]
    fn masked_positions_are_exactly_zero_both_modes() {
        let d = 4;
        let mut rng = Xoshiro256StarStar::seed_from_u64(5);
        let mut attn = Mat::zeros(d, d);
        for v in attn.data.iter_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let query: Vec<f64> = (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let contexts: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let mask = vec![true, false, true, false, true];
        for mode in [MaskMode::PostSoftmaxZero, MaskMode::PreSoftmaxNegInf] {
            let w = attention_weights_mode(&query, &contexts, &mask, &attn, mode).unwrap();
            assert_eq!(w[1], 0.0);
            assert_eq!(w[3], 0.0);
            assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x) && x.is_finite()));
            // Unmasked weights carry the softmax mass of unmasked logits.
            let qw = attn.matvec_t(&query);
            let logits: Vec<f64> = contexts.iter().map(|c| dot(&qw, c)).collect();
            let exp_sum = |sel: &dyn Fn(usize) -> bool| -> f64 {
                logits
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| sel(*j))
                    .map(|(_, &l)| l.exp())
                    .sum()
            };
            let expected: f64 = match mode {
                MaskMode::PostSoftmaxZero => exp_sum(&|j| mask[j]) / exp_sum(&|_| true),
                MaskMode::PreSoftmaxNegInf => 1.0,
            };
            let total: f64 = w.iter().sum();
            assert!((total - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn all_false_mask_errors() {
        let attn = identity(2);
        let contexts = vec![vec![1.0, 0.0]];
        assert!(attention_weights(&[1.0, 0.0], &contexts, &[false], &attn).is_err());
    }
}
