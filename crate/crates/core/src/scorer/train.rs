//! Mini-batch gradient-descent training for the attention scorer. The
//! objective is batch mean squared error (same minimizer as RMSE, smoother
//! near zero); per-epoch RMSE is what gets reported.

use std::collections::BTreeMap;

use crate::corpus::SentenceRecord;
use crate::error::{data_err, numeric_err, Result};
use crate::linalg::{dot, Mat};
use crate::rng::Xoshiro256StarStar;

use super::{
    Backbone, Encoding, ExternalFeatures, Forward, IngestedVectors, LookupBackbone, MaskMode,
    ScorerParams,
};

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_len: usize,
    pub hidden: usize,
    pub mask_mode: MaskMode,
    /// Backbone dimension when training a lookup table from scratch.
    pub dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            epochs: 5,
            learning_rate: 1e-3,
            seed: 1,
            max_len: 32,
            hidden: 256,
            mask_mode: MaskMode::PostSoftmaxZero,
            dim: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0
            || self.epochs == 0
            || self.max_len < 2
            || self.hidden == 0
            || self.dim == 0
        {
            return crate::error::config_err("scorer train config: all sizes must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return crate::error::config_err("scorer train config: bad learning rate");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: ScorerParams,
    pub epoch_rmse: Vec<f64>,
}

/// Gradients of the squared-error loss with respect to every parameter.
/// Lookup-table row gradients are sparse, keyed by row index.
#[derive(Clone, Debug)]
pub struct ScorerGradients {
    pub attn: Mat,
    pub w_hidden: Mat,
    pub b_hidden: Vec<f64>,
    pub w_out: Vec<f64>,
    pub b_out: f64,
    pub rows: BTreeMap<usize, Vec<f64>>,
}

impl ScorerGradients {
    fn zeros(params: &ScorerParams) -> Self {
        ScorerGradients {
            attn: Mat::zeros(params.attn.rows, params.attn.cols),
            w_hidden: Mat::zeros(params.w_hidden.rows, params.w_hidden.cols),
            b_hidden: vec![0.0; params.hidden],
            w_out: vec![0.0; params.hidden],
            b_out: 0.0,
            rows: BTreeMap::new(),
        }
    }
}

/// Backpropagate the squared error of one example into `grads`, scaled by
/// `scale` (1/batch for batch-mean loss). Returns the squared error.
pub(crate) fn backward(
    params: &ScorerParams,
    enc: &Encoding,
    fwd: &Forward,
    truth: f64,
    scale: f64,
    grads: &mut ScorerGradients,
) -> f64 {
    let d = params.dim;
    let h = params.hidden;
    let err = fwd.score - truth;
    let g_y = 2.0 * err * scale;

    // Output layer.
    for i in 0..h {
        grads.w_out[i] += g_y * fwd.hidden[i];
    }
    grads.b_out += g_y;

    // Hidden layer through the ReLU.
    let mut g_pre = vec![0.0; h];
    for i in 0..h {
        if fwd.pre_act[i] > 0.0 {
            g_pre[i] = g_y * params.w_out[i];
        }
    }
    let d_in = params.w_hidden.cols;
    for i in 0..h {
        let gp = g_pre[i];
        if gp != 0.0 {
            let grow = &mut grads.w_hidden.data[i * d_in..(i + 1) * d_in];
            for (g, x) in grow.iter_mut().zip(&fwd.head_in) {
                *g += gp * x;
            }
        }
        grads.b_hidden[i] += gp;
    }
    let g_head_in = params.w_hidden.matvec_t(&g_pre);
    let g_pooled = &g_head_in[..d];

    // pooled = (1/m) Σ_j w_j x_j over unmasked positions.
    let m = enc.n_context as f64;
    let n_pos = enc.contexts.len();
    let mut g_prob = vec![0.0; n_pos];
    for j in 0..n_pos {
        if enc.mask[j] {
            g_prob[j] = dot(&enc.contexts[j], g_pooled) / m;
        }
    }
    // Softmax backward over the included positions.
    let included = |j: usize| params.mask_mode == MaskMode::PostSoftmaxZero || enc.mask[j];
    let mut dot_gp = 0.0;
    for j in 0..n_pos {
        if included(j) {
            dot_gp += g_prob[j] * fwd.probs[j];
        }
    }
    let mut g_logit = vec![0.0; n_pos];
    for j in 0..n_pos {
        if included(j) {
            g_logit[j] = fwd.probs[j] * (g_prob[j] - dot_gp);
        }
    }

    // logit_j = query·(W·x_j): accumulate u = Σ_j g_logit_j x_j, then
    // g_W = query ⊗ u and g_query = W·u.
    let mut u = vec![0.0; d];
    for j in 0..n_pos {
        let gl = g_logit[j];
        if gl != 0.0 {
            for (ui, x) in u.iter_mut().zip(&enc.contexts[j]) {
                *ui += gl * x;
            }
        }
    }
    for a in 0..d {
        let qa = enc.query[a];
        if qa != 0.0 {
            let grow = &mut grads.attn.data[a * d..(a + 1) * d];
            for (g, ub) in grow.iter_mut().zip(&u) {
                *g += qa * ub;
            }
        }
    }

    // Lookup-table rows, when trainable: direct pooling path plus the
    // attention path, and the query (UNK) row.
    if params.backbone.is_lookup() {
        let qw_grad = params.attn.matvec_t(&enc.query); // ∂logit_j/∂x_j = Wᵀq
        for j in 0..n_pos {
            let row = match enc.rows[j] {
                Some(r) => r,
                None => continue,
            };
            let mut g_x = vec![0.0; d];
            let w = fwd.weights[j];
            if w != 0.0 {
                for (g, p) in g_x.iter_mut().zip(g_pooled) {
                    *g += (w / m) * p;
                }
            }
            let gl = g_logit[j];
            if gl != 0.0 {
                for (g, q) in g_x.iter_mut().zip(&qw_grad) {
                    *g += gl * q;
                }
            }
            if g_x.iter().any(|&v| v != 0.0) {
                let acc = grads.rows.entry(row).or_insert_with(|| vec![0.0; d]);
                for (a, b) in acc.iter_mut().zip(&g_x) {
                    *a += b;
                }
            }
        }
        if let Some(qrow) = enc.query_row {
            let g_query = params.attn.matvec(&u);
            let acc = grads.rows.entry(qrow).or_insert_with(|| vec![0.0; d]);
            for (a, b) in acc.iter_mut().zip(&g_query) {
                *a += b;
            }
        }
    }

    err * err
}

pub(crate) fn apply_grads(params: &mut ScorerParams, grads: &ScorerGradients, lr: f64) {
    for (p, g) in params.attn.data.iter_mut().zip(&grads.attn.data) {
        *p -= lr * g;
    }
    for (p, g) in params.w_hidden.data.iter_mut().zip(&grads.w_hidden.data) {
        *p -= lr * g;
    }
    for (p, g) in params.b_hidden.iter_mut().zip(&grads.b_hidden) {
        *p -= lr * g;
    }
    for (p, g) in params.w_out.iter_mut().zip(&grads.w_out) {
        *p -= lr * g;
    }
    params.b_out -= lr * grads.b_out;
    if let Backbone::Lookup(b) = &mut params.backbone {
        for (&row, g) in &grads.rows {
            let r = &mut b.vectors.data[row * b.dim..(row + 1) * b.dim];
            for (p, gi) in r.iter_mut().zip(g) {
                *p -= lr * gi;
            }
        }
    }
}

fn xavier(mat: &mut Mat, rng: &mut Xoshiro256StarStar) {
    let limit = (6.0 / (mat.rows + mat.cols) as f64).sqrt();
    for v in mat.data.iter_mut() {
        *v = rng.uniform(-limit, limit);
    }
}

/// Fresh parameters over either a trainable lookup table built from the
/// dataset's tokens or frozen ingested vectors.
pub(crate) fn init_params(
    dataset: &[(SentenceRecord, f64)],
    config: &TrainConfig,
    backbone_mode: BackboneMode,
    ext_dim: usize,
    rng: &mut Xoshiro256StarStar,
) -> ScorerParams {
    let backbone = match backbone_mode {
        BackboneMode::Lookup => {
            let mut vocab = BTreeMap::new();
            for (sentence, _) in dataset {
                for tok in &sentence.tokens {
                    let next = vocab.len();
                    vocab.entry(tok.clone()).or_insert(next);
                }
            }
            let dim = config.dim;
            let mut vectors = Mat::zeros(vocab.len() + 1, dim);
            // Wider than the word2vec convention: the pooled vector is
            // averaged over positions, so tiny rows starve the head.
            let limit = 1.0 / (dim as f64).sqrt();
            for v in vectors.data.iter_mut() {
                *v = rng.uniform(-limit, limit);
            }
            Backbone::Lookup(LookupBackbone { dim, vocab, vectors })
        }
        BackboneMode::Ingested(vectors) => Backbone::Ingested(vectors),
    };
    let d = backbone.dim();
    let h = config.hidden;
    let mut attn = Mat::zeros(d, d);
    xavier(&mut attn, rng);
    let mut w_hidden = Mat::zeros(h, d + ext_dim);
    xavier(&mut w_hidden, rng);
    let limit = (6.0 / (h + 1) as f64).sqrt();
    let w_out: Vec<f64> = (0..h).map(|_| rng.uniform(-limit, limit)).collect();
    ScorerParams {
        dim: d,
        hidden: h,
        ext_dim,
        max_len: config.max_len,
        mask_mode: config.mask_mode,
        attn,
        w_hidden,
        b_hidden: vec![0.0; h],
        w_out,
        b_out: 0.0,
        backbone,
    }
}

#[derive(Clone, Debug)]
pub enum BackboneMode {
    /// Static lookup table trained along with the head.
    Lookup,
    /// Frozen, externally computed per-position vectors.
    Ingested(IngestedVectors),
}

/// Train the scorer by mini-batch gradient descent with a constant learning
/// rate. Deterministic given the seed. Lookup vectors receive gradients;
/// ingested backbones stay frozen. Errors with a numeric failure when the
/// loss goes non-finite.
pub fn train(
    dataset: &[(SentenceRecord, f64)],
    config: &TrainConfig,
    backbone_mode: BackboneMode,
    ext: Option<&ExternalFeatures>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return data_err("scorer train: empty dataset");
    }
    if let Some((s, y)) = dataset.iter().find(|(_, y)| !y.is_finite()) {
        let _ = y;
        return data_err(format!("scorer train: non-finite score for sentence {}", s.id));
    }
    let ext_dim = ext.map(|e| e.dim).unwrap_or(0);
    let mut rng = Xoshiro256StarStar::seed_from_u64(config.seed);
    let mut params = init_params(dataset, config, backbone_mode, ext_dim, &mut rng);
    params.check_shapes()?;

    // Encodings in ingested mode are fixed; in lookup mode the vectors move
    // between batches, so re-encode per batch from the current table.
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epoch_rmse = Vec::with_capacity(config.epochs);
    for _epoch in 0..config.epochs {
        rng.shuffle(&mut order);
        let mut sse = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = ScorerGradients::zeros(&params);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let (sentence, truth) = &dataset[i];
                let enc = params.encode(sentence)?;
                let ext_vec = params.head_input_ext(sentence, ext)?;
                let fwd = params.forward(&enc, ext_vec.as_deref())?;
                if !fwd.score.is_finite() {
                    return numeric_err("scorer train: non-finite prediction (divergent learning rate?)");
                }
                sse += backward(&params, &enc, &fwd, *truth, scale, &mut grads);
            }
            apply_grads(&mut params, &grads, config.learning_rate);
        }
        let rmse = (sse / dataset.len() as f64).sqrt();
        if !rmse.is_finite() {
            return numeric_err("scorer train: non-finite loss (divergent learning rate?)");
        }
        epoch_rmse.push(rmse);
    }
    Ok(TrainOutcome { params, epoch_rmse })
}

/// Freshly initialized parameters for a dataset, seeded from the config.
/// The lookup vocabulary is built from the dataset's tokens.
pub fn init_scorer(
    dataset: &[(SentenceRecord, f64)],
    config: &TrainConfig,
    backbone_mode: BackboneMode,
    ext_dim: usize,
) -> ScorerParams {
    let mut rng = Xoshiro256StarStar::seed_from_u64(config.seed);
    init_params(dataset, config, backbone_mode, ext_dim, &mut rng)
}

/// Squared error of one example together with its analytic gradients, for
/// gradient checking and diagnostics.
pub fn example_gradients(
    params: &ScorerParams,
    sentence: &SentenceRecord,
    truth: f64,
    ext: Option<&ExternalFeatures>,
) -> Result<(f64, ScorerGradients)> {
    let enc = params.encode(sentence)?;
    let ext_vec = params.head_input_ext(sentence, ext)?;
    let fwd = params.forward(&enc, ext_vec.as_deref())?;
    let mut grads = ScorerGradients::zeros(params);
    let loss = backward(params, &enc, &fwd, truth, 1.0, &mut grads);
    Ok((loss, grads))
}

/// Squared error of one example under the current parameters.
pub fn example_loss(
    params: &ScorerParams,
    sentence: &SentenceRecord,
    truth: f64,
    ext: Option<&ExternalFeatures>,
) -> Result<f64> {
    let enc = params.encode(sentence)?;
    let ext_vec = params.head_input_ext(sentence, ext)?;
    let fwd = params.forward(&enc, ext_vec.as_deref())?;
    let err = fwd.score - truth;
    Ok(err * err)
}
