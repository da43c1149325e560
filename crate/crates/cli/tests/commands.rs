//! File-level tests of the CLI commands: artifact formats, idempotence, and
//! the binary's exit codes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use cicl::commands::{annotate, curriculum, embed, evalcmd, prepare, report, score};
use cicl_core::corpus::FilterPolicy;
use cicl_core::curriculum::{CurriculumSpec, Heuristic};
use cicl_core::embeddings::{EmbeddingMode, SgConfig, SubwordConfig};
use cicl_core::eval::{relation_template, Relation};
use cicl_core::rng::Xoshiro256StarStar;
use cicl_core::synth::{curriculum_testbed, TestbedConfig};

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cicl-cmd-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_testbed(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let tb = curriculum_testbed(&TestbedConfig {
        topics: 2,
        targets_per_topic: 2,
        diagnostics_per_topic: 6,
        pool_per_target: 24,
        background_sentences: 150,
        seed: 9,
    });
    let corpus = dir.join("corpus.txt");
    std::fs::write(&corpus, tb.corpus_lines.join("\n") + "\n").unwrap();
    let targets = dir.join("targets.txt");
    std::fs::write(&targets, tb.targets.join("\n") + "\n").unwrap();
    let scores = dir.join("scores.tsv");
    let mut rows: Vec<(u32, f64)> = tb.scores.iter().map(|(&id, &s)| (id, s)).collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    let text: String = rows
        .iter()
        .map(|(id, s)| format!("{id}\t{s}\t{s}\t1\n"))
        .collect();
    std::fs::write(&scores, text).unwrap();
    (corpus, targets, scores)
}

fn small_policy() -> FilterPolicy {
    FilterPolicy {
        min_len: 10,
        max_len: 30,
        min_sentences_per_target: 24,
        require_single_occurrence: true,
    }
}

#[test]
fn prepare_is_idempotent_and_partitions() {
    let dir = temp_dir("prepare");
    let (corpus, targets, _) = write_testbed(&dir);
    let out_a = dir.join("a");
    let out_b = dir.join("b");
    let outcome = prepare::run(&corpus, &targets, &small_policy(), &out_a).unwrap();
    prepare::run(&corpus, &targets, &small_policy(), &out_b).unwrap();
    for file in ["sentences.tsv", "exclusions.tsv", "summary.tsv"] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // Summary categories sum to the input line count.
    let total_lines = std::fs::read_to_string(&corpus).unwrap().lines().count();
    assert_eq!(outcome.summary.values().sum::<usize>(), total_lines);
    assert_eq!(outcome.split.target_map.len(), 4);
}

#[test]
fn annotate_pipeline_through_files() {
    let dir = temp_dir("annotate");
    let (corpus, targets, scores) = write_testbed(&dir);
    let out = dir.join("prep");
    prepare::run(&corpus, &targets, &small_policy(), &out).unwrap();

    let tuples_path = dir.join("tuples.tsv");
    let n = annotate::tuples(&out.join("sentences.tsv"), 4, 3, &tuples_path).unwrap();
    assert_eq!(n, 4 * 24 * 4 / 4); // n_sentences × reps / tuple size

    // Synthetic annotators that follow the constructed scores exactly.
    let score_of: BTreeMap<u32, f64> = std::fs::read_to_string(&scores)
        .unwrap()
        .lines()
        .map(|l| {
            let mut f = l.split('\t');
            let id: u32 = f.next().unwrap().parse().unwrap();
            let raw: f64 = f.next().unwrap().parse().unwrap();
            (id, raw)
        })
        .collect();
    let judgments_path = dir.join("judgments.tsv");
    let mut text = String::new();
    for line in std::fs::read_to_string(&tuples_path).unwrap().lines() {
        let ids: Vec<u32> = line.split('\t').map(|x| x.parse().unwrap()).collect();
        let (tid, members) = (ids[0], &ids[1..]);
        let best = members
            .iter()
            .max_by(|a, b| score_of[a].partial_cmp(&score_of[b]).unwrap())
            .unwrap();
        let worst = members
            .iter()
            .min_by(|a, b| score_of[a].partial_cmp(&score_of[b]).unwrap())
            .unwrap();
        for a in 0..3 {
            text.push_str(&format!("{tid}\t{a}\t{best}\t{worst}\n"));
        }
    }
    std::fs::write(&judgments_path, text).unwrap();

    let scores_out = dir.join("bws.tsv");
    let n = annotate::aggregate(&tuples_path, &judgments_path, &scores_out).unwrap();
    assert_eq!(n, 4 * 24);
    for line in std::fs::read_to_string(&scores_out).unwrap().lines() {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 4);
        let raw: f64 = f[1].parse().unwrap();
        let normalized: f64 = f[2].parse().unwrap();
        let ratings: u32 = f[3].parse().unwrap();
        assert!((-1.0..=1.0).contains(&raw));
        assert!((0.0..=1.0).contains(&normalized));
        assert_eq!(ratings, 12); // 4 tuples × 3 annotators
    }

    let (mean, _) = annotate::replicability_stat(&tuples_path, &judgments_path, 10, 1).unwrap();
    assert!(mean > 0.5, "consistent judgments should replicate well, got {mean}");
}

#[test]
fn score_train_and_score_roundtrip() {
    let dir = temp_dir("score");
    let (corpus, targets, scores) = write_testbed(&dir);
    let out = dir.join("prep");
    prepare::run(&corpus, &targets, &small_policy(), &out).unwrap();
    let sentences = out.join("sentences.tsv");

    let model_path = dir.join("scorer.model");
    let args = score::ScoreTrainArgs {
        epochs: 40,
        learning_rate: 0.05,
        dim: 16,
        hidden: 24,
        max_len: 16,
        ..Default::default()
    };
    let epoch_rmse = score::train_model(&sentences, &scores, None, None, &args, &model_path).unwrap();
    assert_eq!(epoch_rmse.len(), 40);
    assert!(epoch_rmse.last().unwrap() < &epoch_rmse[0]);

    let scored = dir.join("scored.tsv");
    let n = score::score_sentences(&model_path, None, None, &sentences, &scored).unwrap();
    assert_eq!(n, 4 * 24);
    let first = std::fs::read_to_string(&scored).unwrap();
    let fields: Vec<&str> = first.lines().next().unwrap().split('\t').collect();
    assert_eq!(fields.len(), 3);
    fields[0].parse::<u32>().unwrap();
    assert!(fields[1].starts_with("target"));
    fields[2].parse::<f64>().unwrap();
}

#[test]
fn curriculum_command_emits_ranked_rows() {
    let dir = temp_dir("curriculum");
    let (corpus, targets, scores) = write_testbed(&dir);
    let out = dir.join("prep");
    prepare::run(&corpus, &targets, &small_policy(), &out).unwrap();
    let spec = CurriculumSpec {
        heuristic: Heuristic::LowInfo,
        k: 4,
        seed: 1,
    };
    let path = dir.join("curriculum.tsv");
    let n = curriculum::run(&out.join("sentences.tsv"), &scores, &spec, None, 7, &path).unwrap();
    assert_eq!(n, 4 * 4);
    let text = std::fs::read_to_string(&path).unwrap();
    for line in text.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        assert_eq!(f.len(), 5);
        assert_eq!(f[1], "low_info");
        assert_eq!(f[2], "4");
    }
    let back = cicl_core::curriculum::read_curriculum_tsv(text.as_bytes()).unwrap();
    assert_eq!(back.len(), 4);
}

#[test]
fn embed_and_eval_similarity_through_files() {
    let dir = temp_dir("embed");
    let mut rng = Xoshiro256StarStar::seed_from_u64(2);
    let mut lines = Vec::new();
    for _ in 0..300 {
        let topic = if rng.next_f64() < 0.5 { "cat" } else { "dog" };
        let words: Vec<String> = (0..10)
            .map(|_| format!("{topic}{}", rng.gen_below(6)))
            .collect();
        lines.push(words.join(" "));
    }
    let corpus = dir.join("corpus.txt");
    std::fs::write(&corpus, lines.join("\n") + "\n").unwrap();
    let pairs = dir.join("pairs.tsv");
    std::fs::write(
        &pairs,
        "cat0\tcat1\t9.0\ncat2\tcat3\t8.5\ndog0\tdog1\t8.8\ncat0\tdog0\t1.2\ncat1\tdog2\t0.8\ncat4\tdog4\t1.5\n",
    )
    .unwrap();

    let config = SgConfig {
        dim: 12,
        window: 3,
        negatives: 5,
        alpha: 0.05,
        subsample_t: 1.0,
        min_count: 1,
        epochs: 4,
        seed: 3,
        unigram_power: 0.75,
        mode: EmbeddingMode::FastText,
        subword: SubwordConfig {
            n_min: 3,
            n_max: 5,
            bucket_count: 1 << 10,
        },
    };
    let emb = dir.join("vectors.txt");
    let outputs = embed::run(&corpus, &config, 1, &emb).unwrap();
    assert!(outputs.iter().any(|p| p.extension().unwrap() == "buckets"));
    let (r, coverage) = evalcmd::similarity(&emb, Some(&emb.with_extension("buckets")), &pairs).unwrap();
    assert_eq!(coverage, 1.0);
    assert!(r > 0.5, "within-topic pairs should correlate, got {r}");
}

#[test]
fn eval_relations_through_files() {
    let dir = temp_dir("relations");
    let (corpus, targets, scores) = write_testbed(&dir);
    let out = dir.join("prep");
    prepare::run(&corpus, &targets, &small_policy(), &out).unwrap();
    let model_path = dir.join("scorer.model");
    let args = score::ScoreTrainArgs {
        epochs: 5,
        dim: 8,
        hidden: 8,
        max_len: 16,
        ..Default::default()
    };
    score::train_model(&out.join("sentences.tsv"), &scores, None, None, &args, &model_path).unwrap();

    // Template-generated relation sentences.
    let mut text = String::new();
    for (x, y) in [("account", "record"), ("wheel", "car"), ("vinegar", "wine")] {
        for relation in [Relation::IsA, Relation::PartOf, Relation::MadeOf] {
            let ex = relation_template(relation, x, y);
            text.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                ex.tokens.join(" "),
                ex.target_pos,
                ex.pair_pos,
                ex.rcue_pos,
                ex.relation.name()
            ));
        }
    }
    let relations_path = dir.join("relations.tsv");
    std::fs::write(&relations_path, text).unwrap();
    let csv = dir.join("relations.csv");
    let n = evalcmd::relations(&model_path, None, &relations_path, 1, &csv).unwrap();
    assert_eq!(n, 3);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("relation,n,pair_mean"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn report_regenerates_charts_from_csv() {
    let dir = temp_dir("report");
    let csv = dir.join("results.csv");
    std::fs::write(
        &csv,
        "task,heuristic,k,seed,spearman,coverage\n\
         sim,low_info,2,1,0.1,1\nsim,low_info,4,1,0.2,1\n\
         sim,high_info,2,1,0.5,1\nsim,high_info,4,1,0.6,1\n",
    )
    .unwrap();
    let charts = dir.join("charts");
    let written = report::run(&csv, &charts).unwrap();
    assert_eq!(written.len(), 1);
    let svg = std::fs::read_to_string(&written[0]).unwrap();
    assert!(svg.contains("<svg"));
    assert!(svg.contains("low_info"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_cicl");
    let dir = temp_dir("exitcodes");

    // Missing corpus: data error (2) and the path in the message.
    let missing = dir.join("nope.txt");
    let out = Command::new(bin)
        .args([
            "prepare",
            "--corpus",
            missing.to_str().unwrap(),
            "--targets",
            missing.to_str().unwrap(),
            "--out",
            dir.join("out").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nope.txt"), "stderr was: {stderr}");

    // Bad config: config error (1).
    let config = dir.join("bad.toml");
    std::fs::write(&config, "this is not toml at all [[[").unwrap();
    let out = Command::new(bin)
        .args(["experiment", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Unsatisfiable tuple constraints: data error (2).
    let sentences = dir.join("sentences.tsv");
    std::fs::write(
        &sentences,
        "0\tw\t0\tw a b\n1\tw\t0\tw c d\n2\tw\t0\tw e f\n3\tw\t0\tw g h\n",
    )
    .unwrap();
    let out = Command::new(bin)
        .args([
            "annotate",
            "tuples",
            "--sentences",
            sentences.to_str().unwrap(),
            "--reps",
            "2",
            "--out",
            dir.join("tuples.tsv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Divergent learning rate: numeric failure (3).
    let scores = dir.join("scores.tsv");
    std::fs::write(
        &scores,
        "0\t100\t100\t1\n1\t-100\t-100\t1\n2\t50\t50\t1\n3\t-50\t-50\t1\n",
    )
    .unwrap();
    let out = Command::new(bin)
        .args([
            "score-train",
            "--sentences",
            sentences.to_str().unwrap(),
            "--scores",
            scores.to_str().unwrap(),
            "--learning-rate",
            "1e12",
            "--epochs",
            "50",
            "--dim",
            "4",
            "--hidden",
            "4",
            "--out",
            dir.join("scorer.model").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}
