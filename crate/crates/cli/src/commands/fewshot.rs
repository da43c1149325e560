//! `fewshot`: the few-shot sweep. The background model additionally sees
//! ~60% of each target's sentences; curricula sample small shot sets from
//! per-heuristic pools over the holdout, train a nonce vector per target,
//! and report median gold rank plus similarity correlation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use cicl_core::corpus::{SentenceId, SentenceRecord};
use cicl_core::curriculum::{build_fewshot_pool, fewshot_split, Heuristic, ScoredPool};
use cicl_core::embeddings::{train_nonce, EmbeddingModel, NonceConfig};
use cicl_core::eval::{median_rank, nonce_pair_score, spearman, SimilarityPair};
use cicl_core::rng::{derive_seed, Xoshiro256StarStar};
use cicl_core::{Error, Result};

use crate::chart::{mean_series, Chart};
use crate::config::{ExperimentConfig, Overrides};
use crate::manifest::Manifest;

use super::{create_writer, finish};

pub const RESULTS_FILE: &str = "fewshot.csv";

#[derive(Clone, Debug)]
pub struct FewshotRow {
    pub task: String,
    pub heuristic: Heuristic,
    pub shots: usize,
    pub seed: u64,
    pub median_rank: u32,
    pub spearman: f64,
    pub coverage: f64,
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

    let mut manifest = match Manifest::start(&out_dir, "fewshot", config, &inputs)? {
        Some(m) => m,
        None => {
            eprintln!("fewshot sweep already complete for this config; nothing to do");
            return Ok(results_path);
        }
    };

    let staged = super::experiment::run_stages(config, &mut manifest)?;
    let by_id: HashMap<SentenceId, &SentenceRecord> =
        staged.sentences.iter().map(|r| (r.id, r)).collect();

    // Fixed per-target pool, then the 60/40 split over it.
    let pool = ScoredPool::build(
        &staged.split,
        &staged.scores,
        Some(config.pool.per_target),
        config.pool.seed,
    )?;
    let shots_for_plan = *config.fewshot.shots.iter().min().ok_or_else(|| {
        Error::Config("fewshot.shots must not be empty".to_string())
    })?;
    let plan = config.fewshot.plan(shots_for_plan);
    let sampled_map: BTreeMap<String, Vec<SentenceId>> = pool
        .targets()
        .map(|t| (t.clone(), pool.get(t).unwrap().iter().map(|(id, _)| *id).collect()))
        .collect();
    let splits = fewshot_split(&sampled_map, &plan, config.fewshot.split_seed)?;

    // Background corpus: non-target sentences plus each target's background share.
    let mut background_corpus: Vec<Vec<String>> = staged
        .split
        .non_target_ids
        .iter()
        .map(|id| by_id[id].tokens.clone())
        .collect();
    for split in splits.values() {
        for id in &split.background {
            background_corpus.push(by_id[id].tokens.clone());
        }
    }
    let sg = config.embedding.sg_config()?;
    let threads = overrides.threads.unwrap_or(1);
    let background = match super::experiment::train_background(
        &background_corpus,
        &sg,
        threads,
        overrides.deterministic,
    ) {
        Ok(m) => m,
        Err(e) => {
            manifest.fail("background_model", &e)?;
            return Err(e);
        }
    };
    manifest.stage("background_model", &[])?;

    // Drop targets that fell below the embedding min_count in the background
    // (their gold vector would not exist).
    let targets: Vec<String> = sampled_map
        .keys()
        .filter(|t| background.vocab.id_of(t).is_some())
        .cloned()
        .collect();
    if targets.is_empty() {
        let e = Error::Data("no target word survived in the background vocabulary".to_string());
        manifest.fail("pools", &e)?;
        return Err(e);
    }

    let heuristics = config.fewshot.heuristics()?;
    let mut pools: BTreeMap<(Heuristic, String), Vec<SentenceId>> = BTreeMap::new();
    for &heuristic in &heuristics {
        for target in &targets {
            let scored = pool.get(target).unwrap();
            let holdout: BTreeSet<SentenceId> = splits[target].holdout.iter().copied().collect();
            let sampling_pool = match build_fewshot_pool(
                scored,
                &holdout,
                heuristic,
                &plan,
                config.fewshot.pool_seed,
                target,
            ) {
                Ok(p) => p,
                Err(e) => {
                    manifest.fail("pools", &e)?;
                    return Err(e);
                }
            };
            pools.insert((heuristic, target.clone()), sampling_pool);
        }
    }
    manifest.stage("pools", &[])?;

    let nonce_cfg = config.fewshot.nonce_config();
    let mut cells = Vec::new();
    for &heuristic in &heuristics {
        for &shots in &config.fewshot.shots {
            for &seed in &config.fewshot.seeds {
                cells.push((heuristic, shots, seed));
            }
        }
    }

    let rows: Result<Vec<Vec<FewshotRow>>> = cells
        .par_iter()
        .map(|&(heuristic, shots, seed)| {
            run_cell(
                heuristic,
                shots,
                seed,
                &targets,
                &pools,
                &by_id,
                &background,
                &nonce_cfg,
                &staged.tasks,
            )
        })
        .collect();
    let rows: Vec<FewshotRow> = match rows {
        Ok(r) => r.into_iter().flatten().collect(),
        Err(e) => {
            manifest.fail("sweep", &e)?;
            return Err(e);
        }
    };
    manifest.stage("sweep", &[])?;

    let mut sorted = rows;
    sorted.sort_by(|a, b| {
        (&a.task, a.heuristic, a.shots, a.seed).cmp(&(&b.task, b.heuristic, b.shots, b.seed))
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
    shots: usize,
    seed: u64,
    targets: &[String],
    pools: &BTreeMap<(Heuristic, String), Vec<SentenceId>>,
    by_id: &HashMap<SentenceId, &SentenceRecord>,
    background: &EmbeddingModel,
    nonce_cfg: &NonceConfig,
    tasks: &BTreeMap<String, Vec<SimilarityPair>>,
) -> Result<Vec<FewshotRow>> {
    let mut nonces: Vec<(String, Vec<f64>)> = Vec::with_capacity(targets.len());
    for target in targets {
        let pool = &pools[&(heuristic, target.clone())];
        let cell_seed = derive_seed(
            derive_seed(seed, target),
            &format!("{}|{}", heuristic.name(), shots),
        );
        let mut rng = Xoshiro256StarStar::seed_from_u64(cell_seed);
        let picked = rng.sample_indices(pool.len(), shots);
        let sentences: Vec<Vec<String>> = picked
            .into_iter()
            .map(|i| {
                let id = pool[i];
                by_id
                    .get(&id)
                    .map(|r| r.tokens.clone())
                    .ok_or_else(|| Error::Data(format!("pool references unknown sentence {id}")))
            })
            .collect::<Result<_>>()?;
        let result = train_nonce(background, target, &sentences, nonce_cfg, cell_seed)?;
        nonces.push((result.word, result.vector));
    }

    let rank = median_rank(&nonces, background)?;
    let nonce_map: BTreeMap<String, Vec<f64>> = nonces.into_iter().collect();

    let mut rows = Vec::with_capacity(tasks.len());
    for (task, pairs) in tasks {
        let mut cosines = Vec::new();
        let mut human = Vec::new();
        for pair in pairs {
            if !(nonce_map.contains_key(&pair.word_a) && nonce_map.contains_key(&pair.word_b)) {
                continue;
            }
            match nonce_pair_score(background, &nonce_map, pair) {
                Ok(score) => {
                    cosines.push(score);
                    human.push(pair.human_score);
                }
                Err(_) => continue,
            }
        }
        if cosines.len() < 3 {
            return Err(Error::Data(format!(
                "task {task}: only {} of {} pairs have nonce vectors on both sides",
                cosines.len(),
                pairs.len()
            )));
        }
        rows.push(FewshotRow {
            task: task.clone(),
            heuristic,
            shots,
            seed,
            median_rank: rank,
            spearman: spearman(&cosines, &human)?,
            coverage: cosines.len() as f64 / pairs.len() as f64,
        });
    }
    Ok(rows)
}

fn write_results(path: &Path, rows: &[FewshotRow]) -> Result<()> {
    let mut w = create_writer(path)?;
    writeln!(w, "task,heuristic,shots,seed,median_rank,spearman,coverage")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.task,
            r.heuristic.name(),
            r.shots,
            r.seed,
            r.median_rank,
            r.spearman,
            r.coverage
        )?;
    }
    finish(w)
}

fn write_charts(out_dir: &Path, rows: &[FewshotRow]) -> Result<Vec<PathBuf>> {
    let chart_dir = out_dir.join("charts");
    std::fs::create_dir_all(&chart_dir)?;
    let mut written = Vec::new();
    let mut by_task: BTreeMap<&str, (Vec<(String, f64, f64)>, Vec<(String, f64, f64)>)> =
        BTreeMap::new();
    for r in rows {
        let entry = by_task.entry(&r.task).or_default();
        entry
            .0
            .push((r.heuristic.name().to_string(), r.shots as f64, r.median_rank as f64));
        entry
            .1
            .push((r.heuristic.name().to_string(), r.shots as f64, r.spearman));
    }
    for (task, (ranks, correlations)) in by_task {
        let rank_chart = Chart {
            title: format!("{task}: median gold rank vs shots (lower is better)"),
            x_label: "sentences per target word".to_string(),
            y_label: "median rank".to_string(),
            log2_x: false,
            series: mean_series(&ranks),
        };
        let path = chart_dir.join(format!("{task}-rank.svg"));
        let mut w = create_writer(&path)?;
        rank_chart.write_svg(&mut w)?;
        finish(w)?;
        written.push(path);

        let corr_chart = Chart {
            title: format!("{task}: similarity vs shots"),
            x_label: "sentences per target word".to_string(),
            y_label: "spearman r".to_string(),
            log2_x: false,
            series: mean_series(&correlations),
        };
        let path = chart_dir.join(format!("{task}-spearman.svg"));
        let mut w = create_writer(&path)?;
        corr_chart.write_svg(&mut w)?;
        finish(w)?;
        written.push(path);
    }
    Ok(written)
}
