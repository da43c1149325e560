//! `experiment`: the batch curriculum sweep. Trains a background model on
//! non-target sentences, scores target sentences, and for every
//! (heuristic, k, seed) cell clones the background, trains it further on the
//! cell's curriculum, and evaluates word-pair similarity.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use cicl_core::corpus::{SentenceId, SentenceRecord};
use cicl_core::curriculum::{build_batch_curriculum, CurriculumSpec, Heuristic, ScoredPool};
use cicl_core::embeddings::{train_skipgram, train_skipgram_parallel, EmbeddingModel, SgConfig};
use cicl_core::eval::{read_similarity_tsv, similarity_eval, SimilarityPair};
use cicl_core::rng::{derive_seed, Xoshiro256StarStar};
use cicl_core::{Error, Result};

use crate::chart::{mean_series, Chart};
use crate::config::{ExperimentConfig, Overrides};
use crate::manifest::Manifest;

use super::{create_writer, finish, open_reader, prepare, score};

pub const RESULTS_FILE: &str = "results.csv";

#[derive(Clone, Debug)]
pub struct ResultRow {
    pub task: String,
    pub heuristic: Heuristic,
    pub k: usize,
    pub seed: u64,
    pub spearman: f64,
    pub coverage: f64,
}

/// Everything the sweep needs once the corpus stages have run.
pub struct Stage {
    pub sentences: Vec<SentenceRecord>,
    pub split: cicl_core::corpus::CorpusSplit,
    pub scores: HashMap<SentenceId, f64>,
    pub tasks: BTreeMap<String, Vec<SimilarityPair>>,
}

pub fn run_stages(config: &ExperimentConfig, manifest: &mut Manifest) -> Result<Stage> {
    let out_dir = &config.paths.out_dir;
    let staged = stage(manifest, "prepare", || {
        prepare::run(
            &config.paths.corpus,
            &config.paths.targets,
            &config.prepare.policy(),
            &out_dir.join("prepare"),
        )
    })?;
    let outputs = staged.outputs.clone();
    manifest.stage("prepare", &outputs)?;

    let scores = stage(manifest, "scores", || {
        load_scores(config, &staged.sentences, &staged.split)
    })?;
    manifest.stage("scores", &[])?;

    let mut tasks = BTreeMap::new();
    for (name, path) in config.task_names() {
        let pairs = read_similarity_tsv(open_reader(&path)?)?;
        if pairs.is_empty() {
            return Err(Error::Data(format!("similarity task {name} is empty")));
        }
        tasks.insert(name, pairs);
    }

    Ok(Stage {
        sentences: staged.sentences,
        split: staged.split,
        scores,
        tasks,
    })
}

fn stage<T>(manifest: &mut Manifest, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    match f() {
        Ok(v) => Ok(v),
        Err(e) => {
            manifest.fail(name, &e)?;
            Err(e)
        }
    }
}

/// Informativeness scores for every retained target sentence, either read
/// from a scores TSV or predicted by a trained scorer model.
fn load_scores(
    config: &ExperimentConfig,
    sentences: &[SentenceRecord],
    split: &cicl_core::corpus::CorpusSplit,
) -> Result<HashMap<SentenceId, f64>> {
    if let Some(path) = &config.paths.scores {
        return super::curriculum::scores_map(path);
    }
    let model_path = config.paths.scorer_model.as_ref().ok_or_else(|| {
        Error::Config("one of paths.scores or paths.scorer_model is required".to_string())
    })?;
    let params = score::load_model(model_path, config.paths.ingested_vectors.as_deref())?;
    let ids = split.target_map.values().flatten().copied();
    score::predict_map(&params, None, sentences, ids)
}

pub fn train_background(
    corpus: &[Vec<String>],
    sg: &SgConfig,
    threads: usize,
    deterministic: bool,
) -> Result<EmbeddingModel> {
    if threads > 1 && !deterministic {
        train_skipgram_parallel(corpus, sg, threads)
    } else {
        train_skipgram(corpus, sg).map(|(m, _)| m)
    }
}

/// The sweep grid minus the forbidden cells: the half-pool heuristics cannot
/// ask for more than half the per-target pool.
pub fn sweep_cells(
    heuristics: &[Heuristic],
    ks: &[usize],
    seeds: &[u64],
    per_target: usize,
) -> Vec<(Heuristic, usize, u64)> {
    let half = per_target / 2;
    let mut cells = Vec::new();
    for &heuristic in heuristics {
        for &k in ks {
            let limit = match heuristic {
                Heuristic::RandNonLow | Heuristic::RandNonHigh => half,
                _ => per_target,
            };
            if k > limit {
                continue;
            }
            for &seed in seeds {
                cells.push((heuristic, k, seed));
            }
        }
    }
    cells
}

pub fn run(config: &ExperimentConfig, overrides: &Overrides) -> Result<PathBuf> {
    let out_dir = config.paths.out_dir.clone();
    let results_path = out_dir.join(RESULTS_FILE);
    let mut inputs = vec![config.paths.corpus.clone(), config.paths.targets.clone()];
    if let Some(s) = &config.paths.scores {
        inputs.push(s.clone());
    }
    if let Some(m) = &config.paths.scorer_model {
        inputs.push(m.clone());
    }
    inputs.extend(config.paths.similarity_tasks.iter().cloned());

    let mut manifest = match Manifest::start(&out_dir, "experiment", config, &inputs)? {
        Some(m) => m,
        None => {
            eprintln!("experiment already complete for this config; nothing to do");
            return Ok(results_path);
        }
    };

    let staged = run_stages(config, &mut manifest)?;
    let sg = config.embedding.sg_config()?;
    let threads = overrides.threads.unwrap_or(1);

    // Background model over non-target sentences only.
    let by_id: HashMap<SentenceId, &SentenceRecord> =
        staged.sentences.iter().map(|r| (r.id, r)).collect();
    let background_corpus: Vec<Vec<String>> = staged
        .split
        .non_target_ids
        .iter()
        .map(|id| by_id[id].tokens.clone())
        .collect();
    let background = stage(&mut manifest, "background_model", || {
        train_background(&background_corpus, &sg, threads, overrides.deterministic)
    })?;
    manifest.stage("background_model", &[])?;

    let pool = stage(&mut manifest, "scored_pool", || {
        ScoredPool::build(
            &staged.split,
            &staged.scores,
            Some(config.pool.per_target),
            config.pool.seed,
        )
    })?;
    manifest.stage("scored_pool", &[])?;

    let cells = sweep_cells(
        &config.experiment.heuristics()?,
        &config.experiment.ks,
        &config.experiment.seeds,
        config.pool.per_target,
    );

    let update_base = config.update.apply(&sg, 0);
    let rows: Result<Vec<Vec<ResultRow>>> = cells
        .par_iter()
        .map(|&(heuristic, k, seed)| {
            run_cell(
                heuristic,
                k,
                seed,
                &pool,
                &by_id,
                &background,
                &update_base,
                &staged.tasks,
            )
        })
        .collect();
    let rows: Vec<ResultRow> = match rows {
        Ok(r) => r.into_iter().flatten().collect(),
        Err(e) => {
            manifest.fail("sweep", &e)?;
            return Err(e);
        }
    };
    manifest.stage("sweep", &[])?;

    let mut sorted = rows;
    sorted.sort_by(|a, b| {
        (&a.task, a.heuristic, a.k, a.seed).cmp(&(&b.task, b.heuristic, b.k, b.seed))
    });
    write_results(&results_path, &sorted)?;
    let mut outputs = vec![results_path.clone()];
    outputs.extend(write_charts(&out_dir, &sorted)?);
    manifest.stage("report", &outputs)?;
    manifest.complete()?;
    Ok(results_path)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    heuristic: Heuristic,
    k: usize,
    seed: u64,
    pool: &ScoredPool,
    by_id: &HashMap<SentenceId, &SentenceRecord>,
    background: &EmbeddingModel,
    update_base: &SgConfig,
    tasks: &BTreeMap<String, Vec<SimilarityPair>>,
) -> Result<Vec<ResultRow>> {
    let spec = CurriculumSpec { heuristic, k, seed };
    let curriculum = build_batch_curriculum(pool, &spec)?;
    let cell_seed = derive_seed(seed, &format!("{}|{}", heuristic.name(), k));
    let mut update_corpus: Vec<Vec<String>> = Vec::new();
    for ids in curriculum.values() {
        for id in ids {
            let record = by_id
                .get(id)
                .ok_or_else(|| Error::Data(format!("curriculum references unknown sentence {id}")))?;
            update_corpus.push(record.tokens.clone());
        }
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(cell_seed);
    rng.shuffle(&mut update_corpus);

    let mut model = background.clone();
    let update_cfg = SgConfig {
        seed: cell_seed,
        ..update_base.clone()
    };
    cicl_core::embeddings::update_model(&mut model, &update_corpus, &update_cfg)?;

    let mut rows = Vec::with_capacity(tasks.len());
    for (task, pairs) in tasks {
        let (r, coverage) = similarity_eval(&model, pairs)?;
        rows.push(ResultRow {
            task: task.clone(),
            heuristic,
            k,
            seed,
            spearman: r,
            coverage,
        });
    }
    Ok(rows)
}

fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = create_writer(path)?;
    writeln!(w, "task,heuristic,k,seed,spearman,coverage")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.task,
            r.heuristic.name(),
            r.k,
            r.seed,
            r.spearman,
            r.coverage
        )?;
    }
    finish(w)
}

fn write_charts(out_dir: &Path, rows: &[ResultRow]) -> Result<Vec<PathBuf>> {
    let mut by_task: BTreeMap<&str, Vec<(String, f64, f64)>> = BTreeMap::new();
    for r in rows {
        by_task
            .entry(&r.task)
            .or_default()
            .push((r.heuristic.name().to_string(), r.k as f64, r.spearman));
    }
    let chart_dir = out_dir.join("charts");
    std::fs::create_dir_all(&chart_dir)?;
    let mut written = Vec::new();
    for (task, entries) in by_task {
        let chart = Chart {
            title: format!("{task}: similarity vs sentences per target"),
            x_label: "sentences per target word".to_string(),
            y_label: "spearman r".to_string(),
            log2_x: true,
            series: mean_series(&entries),
        };
        let path = chart_dir.join(format!("{task}.svg"));
        let mut w = create_writer(&path)?;
        chart.write_svg(&mut w)?;
        finish(w)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid_skips_forbidden_half_pool_cells() {
        let ks: Vec<usize> = (1..=9).map(|i| 1usize << i).collect();
        let seeds = vec![1, 2, 3, 4, 5];
        let cells = sweep_cells(&Heuristic::ALL, &ks, &seeds, 512);
        // Full heuristics get all nine k values; the half-pool heuristics
        // lose k = 512.
        for h in [Heuristic::LowInfo, Heuristic::HighInfo, Heuristic::RandSelect] {
            assert_eq!(cells.iter().filter(|(ch, _, _)| *ch == h).count(), 9 * 5);
        }
        for h in [Heuristic::RandNonLow, Heuristic::RandNonHigh] {
            assert_eq!(cells.iter().filter(|(ch, _, _)| *ch == h).count(), 8 * 5);
            assert!(!cells.iter().any(|&(ch, k, _)| ch == h && k == 512));
        }
    }
}
