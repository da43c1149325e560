//! `score-train` and `score`: fit the attention scorer on labeled sentences
//! and run inference, through the model-dump file format.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use cicl_core::annotation::read_scores_tsv;
use cicl_core::corpus::{read_sentences_tsv, SentenceRecord};
use cicl_core::scorer::{
    load_scorer, read_external_features_tsv, read_ingested_tsv, save_scorer, train, BackboneMode,
    ExternalFeatures, MaskMode, ScorerParams, TrainConfig,
};
use cicl_core::{Error, Result};

use super::{create_writer, finish, open_reader};

pub struct ScoreTrainArgs {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_len: usize,
    pub hidden: usize,
    pub dim: usize,
    pub mask_mode: String,
}

impl Default for ScoreTrainArgs {
    fn default() -> Self {
        let c = TrainConfig::default();
        ScoreTrainArgs {
            batch_size: c.batch_size,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            seed: c.seed,
            max_len: c.max_len,
            hidden: c.hidden,
            dim: c.dim,
            mask_mode: "post".to_string(),
        }
    }
}

fn labeled_dataset(
    sentences_path: &Path,
    scores_path: &Path,
) -> Result<Vec<(SentenceRecord, f64)>> {
    let records = read_sentences_tsv(open_reader(sentences_path)?)?;
    let scores = read_scores_tsv(open_reader(scores_path)?)?;
    let by_id: HashMap<u32, f64> = scores.iter().map(|s| (s.sentence_id, s.normalized)).collect();
    let dataset: Vec<(SentenceRecord, f64)> = records
        .into_iter()
        .filter(|r| r.target_pos.is_some())
        .filter_map(|r| by_id.get(&r.id).map(|&y| (r, y)))
        .collect();
    if dataset.is_empty() {
        return Err(Error::Data(
            "no target sentence has a score; check the id spaces".to_string(),
        ));
    }
    Ok(dataset)
}

#[allow(clippy::too_many_arguments)]
pub fn train_model(
    sentences_path: &Path,
    scores_path: &Path,
    ingested: Option<&Path>,
    features: Option<&Path>,
    args: &ScoreTrainArgs,
    model_out: &Path,
) -> Result<Vec<f64>> {
    let dataset = labeled_dataset(sentences_path, scores_path)?;
    let config = TrainConfig {
        batch_size: args.batch_size,
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed: args.seed,
        max_len: args.max_len,
        hidden: args.hidden,
        mask_mode: MaskMode::parse(&args.mask_mode)?,
        dim: args.dim,
    };
    let backbone_mode = match ingested {
        Some(path) => BackboneMode::Ingested(read_ingested_tsv(open_reader(path)?)?),
        None => BackboneMode::Lookup,
    };
    let ext = features
        .map(|p| read_external_features_tsv(open_reader(p)?))
        .transpose()?;
    let outcome = train(&dataset, &config, backbone_mode, ext.as_ref())?;
    let mut w = create_writer(model_out)?;
    save_scorer(&mut w, &outcome.params)?;
    finish(w)?;
    Ok(outcome.epoch_rmse)
}

pub fn load_model(model_path: &Path, ingested: Option<&Path>) -> Result<ScorerParams> {
    let vectors = ingested
        .map(|p| read_ingested_tsv(open_reader(p)?))
        .transpose()?;
    load_scorer(open_reader(model_path)?, vectors)
}

/// Score every target sentence of a sentences.tsv; writes
/// sentence_id, target_word, predicted score.
pub fn score_sentences(
    model_path: &Path,
    ingested: Option<&Path>,
    features: Option<&Path>,
    sentences_path: &Path,
    out: &Path,
) -> Result<usize> {
    let params = load_model(model_path, ingested)?;
    let ext = features
        .map(|p| read_external_features_tsv(open_reader(p)?))
        .transpose()?;
    let records = read_sentences_tsv(open_reader(sentences_path)?)?;
    let mut w = create_writer(out)?;
    let mut n = 0;
    for record in records.iter().filter(|r| r.target_pos.is_some()) {
        let score = params.predict(record, ext.as_ref())?;
        let word = record.target_word.as_deref().unwrap_or("-");
        writeln!(w, "{}\t{}\t{}", record.id, word, score)?;
        n += 1;
    }
    finish(w)?;
    Ok(n)
}

/// Score target sentences in memory with an already-loaded model.
pub fn predict_map(
    params: &ScorerParams,
    ext: Option<&ExternalFeatures>,
    records: &[SentenceRecord],
    ids: impl Iterator<Item = u32>,
) -> Result<HashMap<u32, f64>> {
    let by_id: HashMap<u32, &SentenceRecord> = records.iter().map(|r| (r.id, r)).collect();
    let mut out = HashMap::new();
    for id in ids {
        let record = by_id
            .get(&id)
            .ok_or_else(|| Error::Data(format!("unknown sentence id {id}")))?;
        out.insert(id, params.predict(record, ext)?);
    }
    Ok(out)
}
