use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cicl::commands::{annotate, curriculum, embed, evalcmd, experiment, fewshot, prepare, report, score};
use cicl::config::{ExperimentConfig, Overrides};
use cicl_core::corpus::FilterPolicy;
use cicl_core::curriculum::{CurriculumSpec, Heuristic};
use cicl_core::embeddings::{EmbeddingMode, SgConfig, SubwordConfig};
use cicl_core::Result;

#[derive(Parser)]
#[command(
    name = "cicl",
    version,
    about = "Contextual informativeness scoring and curriculum learning for word embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// Config file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Override every seed list in the config with this single seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the sweep and (non-deterministic) training
    #[arg(long)]
    threads: Option<usize>,
    /// Force bit-reproducible single-threaded training
    #[arg(long)]
    deterministic: bool,
}

impl CommonFlags {
    fn load(&self) -> Result<(ExperimentConfig, Overrides)> {
        let overrides = Overrides {
            seed: self.seed,
            out: self.out.clone(),
            threads: self.threads,
            deterministic: self.deterministic,
        };
        let config = ExperimentConfig::load(&self.config, &overrides)?;
        Ok((config, overrides))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a corpus, locate target words, filter, and split
    Prepare {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        targets: PathBuf,
        #[arg(long, default_value_t = 10)]
        min_len: usize,
        #[arg(long, default_value_t = 30)]
        max_len: usize,
        #[arg(long, default_value_t = 512)]
        min_sentences_per_target: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Best-worst-scaling annotation utilities
    Annotate {
        #[command(subcommand)]
        command: AnnotateCommand,
    },
    /// Train the attention scorer on labeled sentences
    ScoreTrain {
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        /// Ingested contextual vectors (switches to the frozen backbone)
        #[arg(long)]
        ingested: Option<PathBuf>,
        /// External per-sentence feature TSV concatenated at the head
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        max_len: usize,
        #[arg(long, default_value_t = 256)]
        hidden: usize,
        /// Lookup-backbone embedding dimension
        #[arg(long, default_value_t = 64)]
        dim: usize,
        /// Attention masking: "post" (softmax then zero) or "pre"
        #[arg(long, default_value = "post")]
        mask_mode: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score target sentences with a trained model
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        ingested: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Materialize one curriculum as TSV
    Curriculum {
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        heuristic: String,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Down-sample each target to exactly this many sentences first
        #[arg(long)]
        per_target: Option<usize>,
        #[arg(long, default_value_t = 7)]
        pool_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a word-embedding model on a plain-text corpus
    Embed {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "word2vec")]
        mode: String,
        #[arg(long, default_value_t = 400)]
        dim: usize,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        negatives: usize,
        #[arg(long, default_value_t = 0.025)]
        alpha: f64,
        #[arg(long, default_value_t = 1e-3)]
        subsample: f64,
        #[arg(long, default_value_t = 50)]
        min_count: u64,
        #[arg(long, default_value_t = 5)]
        epochs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2097152)]
        bucket_count: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full batch-curriculum sweep (background → curricula → similarity)
    Experiment {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Few-shot sweep (pools → nonce training → median rank + similarity)
    Fewshot {
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Evaluate saved models
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Regenerate charts from a results CSV
    Report {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum AnnotateCommand {
    /// Generate best-worst tuples over the target sentences
    Tuples {
        #[arg(long)]
        sentences: PathBuf,
        #[arg(long, default_value_t = 8)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate judgments into normalized informativeness scores
    Aggregate {
        #[arg(long)]
        tuples: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split-half replicability of a judgment table
    Replicability {
        #[arg(long)]
        tuples: PathBuf,
        #[arg(long)]
        judgments: PathBuf,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Spearman correlation of a saved embedding against a similarity task
    Similarity {
        #[arg(long)]
        embedding: PathBuf,
        /// Subword bucket companion file (fasttext models)
        #[arg(long)]
        buckets: Option<PathBuf>,
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Normalized attention ranks over relation-template sentences
    Relations {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        ingested: Option<PathBuf>,
        #[arg(long)]
        relations: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare {
            corpus,
            targets,
            min_len,
            max_len,
            min_sentences_per_target,
            out,
        } => {
            let policy = FilterPolicy {
                min_len,
                max_len,
                min_sentences_per_target,
                require_single_occurrence: true,
            };
            let outcome = prepare::run(&corpus, &targets, &policy, &out)?;
            for (category, count) in &outcome.summary {
                println!("{category}\t{count}");
            }
            println!("wrote {}", out.display());
        }
        Command::Annotate { command } => match command {
            AnnotateCommand::Tuples {
                sentences,
                reps,
                seed,
                out,
            } => {
                let n = annotate::tuples(&sentences, reps, seed, &out)?;
                println!("wrote {n} tuples to {}", out.display());
            }
            AnnotateCommand::Aggregate {
                tuples,
                judgments,
                out,
            } => {
                let n = annotate::aggregate(&tuples, &judgments, &out)?;
                println!("wrote {n} scores to {}", out.display());
            }
            AnnotateCommand::Replicability {
                tuples,
                judgments,
                trials,
                seed,
            } => {
                let (mean, var) = annotate::replicability_stat(&tuples, &judgments, trials, seed)?;
                println!("split-half spearman mean {mean:.4} variance {var:.4} over {trials} trials");
            }
        },
        Command::ScoreTrain {
            sentences,
            scores,
            ingested,
            features,
            batch_size,
            epochs,
            learning_rate,
            seed,
            max_len,
            hidden,
            dim,
            mask_mode,
            out,
        } => {
            let args = score::ScoreTrainArgs {
                batch_size,
                epochs,
                learning_rate,
                seed,
                max_len,
                hidden,
                dim,
                mask_mode,
            };
            let epoch_rmse = score::train_model(
                &sentences,
                &scores,
                ingested.as_deref(),
                features.as_deref(),
                &args,
                &out,
            )?;
            for (epoch, rmse) in epoch_rmse.iter().enumerate() {
                println!("epoch {epoch}\trmse {rmse:.6}");
            }
            println!("wrote {}", out.display());
        }
        Command::Score {
            model,
            ingested,
            features,
            sentences,
            out,
        } => {
            let n = score::score_sentences(
                &model,
                ingested.as_deref(),
                features.as_deref(),
                &sentences,
                &out,
            )?;
            println!("scored {n} sentences into {}", out.display());
        }
        Command::Curriculum {
            sentences,
            scores,
            heuristic,
            k,
            seed,
            per_target,
            pool_seed,
            out,
        } => {
            let spec = CurriculumSpec {
                heuristic: Heuristic::parse(&heuristic)?,
                k,
                seed,
            };
            let n = curriculum::run(&sentences, &scores, &spec, per_target, pool_seed, &out)?;
            println!("wrote {n} curriculum rows to {}", out.display());
        }
        Command::Embed {
            corpus,
            mode,
            dim,
            window,
            negatives,
            alpha,
            subsample,
            min_count,
            epochs,
            seed,
            bucket_count,
            threads,
            out,
        } => {
            let config = SgConfig {
                dim,
                window,
                negatives,
                alpha,
                subsample_t: subsample,
                min_count,
                epochs,
                seed,
                unigram_power: 0.75,
                mode: EmbeddingMode::parse(&mode)?,
                subword: SubwordConfig {
                    bucket_count,
                    ..SubwordConfig::default()
                },
            };
            let outputs = embed::run(&corpus, &config, threads, &out)?;
            for path in outputs {
                println!("wrote {}", path.display());
            }
        }
        Command::Experiment { common } => {
            let (config, overrides) = common.load()?;
            let results = experiment::run(&config, &overrides)?;
            println!("results: {}", results.display());
        }
        Command::Fewshot { common } => {
            let (config, overrides) = common.load()?;
            let results = fewshot::run(&config, &overrides)?;
            println!("results: {}", results.display());
        }
        Command::Eval { command } => match command {
            EvalCommand::Similarity {
                embedding,
                buckets,
                pairs,
            } => {
                let (r, coverage) = evalcmd::similarity(&embedding, buckets.as_deref(), &pairs)?;
                println!("spearman {r:.4} coverage {coverage:.4}");
            }
            EvalCommand::Relations {
                model,
                ingested,
                relations,
                seed,
                out,
            } => {
                let n = evalcmd::relations(&model, ingested.as_deref(), &relations, seed, &out)?;
                println!("wrote {n} relation rows to {}", out.display());
            }
        },
        Command::Report { csv, out } => {
            let written = report::run(&csv, &out)?;
            for path in written {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(cicl::exit_code(&err))
        }
    }
}
