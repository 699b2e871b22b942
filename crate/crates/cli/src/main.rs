use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lpgnn_core::datasets::{
    generate_clique, generate_subgraph_matching, load_tu_dataset, read_jsonl, write_jsonl, CliqueParams, LabeledDataset,
    SubgraphParams,
};
use lpgnn_core::harness::{
    evaluate, grid_search, run_experiment, scaling_probe, write_epochs_csv, write_sweep_csv, ExperimentConfig,
    GridSpace, ProbeConfig, TaskSpec,
};
use lpgnn_core::lp::{InferenceConfig, ModelCheckpoint};
use lpgnn_core::{Aggregation, ConstraintVariant, Execution, LpGnnModel};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lpgnn", version, about = "Lagrangian-propagation graph neural networks")]
struct Cli {
    /// Run on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic node-classification dataset as JSON lines.
    Generate {
        #[arg(value_enum)]
        task: SyntheticTask,
        #[arg(long, default_value_t = 300)]
        graphs: usize,
        #[arg(long, default_value_t = 7)]
        graph_size: usize,
        /// Pattern size (subgraph) or clique size (clique).
        #[arg(long, default_value_t = 3)]
        pattern_size: usize,
        #[arg(long, default_value_t = 0.2)]
        edge_prob: f64,
        #[arg(long, default_value_t = 10)]
        tags: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one configuration and write metrics.csv, summary.json and model.json.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid search over the declared hyperparameter space.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Run a seeded random subset of this many grid cells.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time training steps on random graphs of growing size.
    Probe {
        #[arg(long, value_delimiter = ',', default_value = "100,316,1000,3162,10000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        degree: usize,
        #[arg(long, default_value_t = 0.2)]
        min_seconds: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Infer states with a saved model and report accuracy.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// A JSON-lines dataset or a TU directory.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 1e-2)]
        lr_states: f64,
        #[arg(long, default_value_t = 1e-2)]
        lr_multipliers: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SyntheticTask {
    Subgraph,
    Clique,
}

#[derive(Args)]
struct ConfigArgs {
    /// Start from a JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// subgraph, clique, a TU directory or a .jsonl file.
    #[arg(long, default_value = "subgraph")]
    task: String,
    #[arg(long)]
    constraint: Option<ConstraintVariant>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    state_dim: Option<usize>,
    #[arg(long)]
    hidden_units: Option<usize>,
    #[arg(long, value_parser = parse_aggregation)]
    aggregation: Option<Aggregation>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    lr_theta: Option<f64>,
    #[arg(long)]
    lr_states: Option<f64>,
    #[arg(long)]
    lr_multipliers: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Allow values outside the declared grids.
    #[arg(long)]
    custom: bool,
}

fn parse_aggregation(s: &str) -> Result<Aggregation, String> {
    match s {
        "sum" => Ok(Aggregation::Sum),
        "avg" => Ok(Aggregation::Avg),
        _ => Err(format!("unknown aggregation '{s}' (expected sum or avg)")),
    }
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => match self.task.as_str() {
                "subgraph" => ExperimentConfig::artificial(TaskSpec::subgraph()),
                "clique" => ExperimentConfig::artificial(TaskSpec::clique()),
                other if other.ends_with(".jsonl") => {
                    ExperimentConfig::artificial(TaskSpec::JsonlFile { path: other.into() })
                }
                other => ExperimentConfig::classification(TaskSpec::TuDirectory { path: other.into() }),
            },
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(constraint, epsilon, state_dim, hidden_units, aggregation, dropout);
        set!(lr_theta, lr_states, lr_multipliers, epochs, patience, folds, seed);
        cfg.custom |= self.custom;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load_data(path: &Path) -> Result<LabeledDataset> {
    if path.is_dir() {
        Ok(load_tu_dataset(path)?)
    } else {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(read_jsonl(BufReader::new(file))?)
    }
}

fn run(cli: Cli) -> Result<()> {
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match cli.command {
        Command::Generate {
            task,
            graphs,
            graph_size,
            pattern_size,
            edge_prob,
            tags,
            seed,
            out,
        } => {
            let ds = match task {
                SyntheticTask::Subgraph => generate_subgraph_matching(&SubgraphParams {
                    n_graphs: graphs,
                    graph_size,
                    subgraph_size: pattern_size,
                    edge_prob,
                    num_tags: tags,
                    seed,
                })?,
                SyntheticTask::Clique => generate_clique(&CliqueParams {
                    n_graphs: graphs,
                    graph_size,
                    clique_size: pattern_size,
                    edge_prob,
                    num_tags: tags,
                    seed,
                    ..Default::default()
                })?,
            };
            let mut w = create(&out)?;
            write_jsonl(&ds, &mut w)?;
            w.flush()?;
            println!(
                "{} graphs, positive node rate {:.3} -> {}",
                ds.len(),
                ds.positive_fraction(),
                out.display()
            );
        }
        Command::Train { config, out } => {
            let cfg = config.build()?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let outcome = run_experiment(&cfg, exec)?;
            let mut w = create(&out.join("metrics.csv"))?;
            write_epochs_csv(&outcome.epochs, &mut w)?;
            w.flush()?;
            fs::write(out.join("summary.json"), serde_json::to_string_pretty(&outcome.summary)?)?;
            if let Some(model) = &outcome.model {
                fs::write(out.join("model.json"), serde_json::to_string(&model.to_checkpoint())?)?;
            }
            let s = &outcome.summary;
            if !s.status.is_ok() {
                bail!("run failed: {:?}", s.status);
            }
            println!(
                "config {} | best epoch {} | validation {:.4} | accuracy {:.4} ± {:.4} | {:.1}s",
                &s.config_hash[..12],
                s.best_epoch,
                s.best_validation_accuracy,
                s.headline_accuracy(),
                s.std_accuracy,
                s.wall_clock_seconds
            );
        }
        Command::Sweep { config, budget, out } => {
            let base = config.build()?;
            let space = if base.task.is_artificial() {
                GridSpace::artificial()
            } else {
                GridSpace::classification()
            };
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let results = grid_search(&space, &base, budget, exec)?;
            let mut w = create(&out.join("sweep.csv"))?;
            write_sweep_csv(&results, &mut w)?;
            w.flush()?;
            match results.first() {
                Some(best) if best.summary.status.is_ok() => println!(
                    "{} cells, best #{} validation {:.4} accuracy {:.4}",
                    results.len(),
                    best.index,
                    best.summary.best_validation_accuracy,
                    best.summary.headline_accuracy()
                ),
                _ => bail!("every grid cell failed"),
            }
        }
        Command::Probe {
            sizes,
            degree,
            min_seconds,
            seed,
            out,
        } => {
            let report = scaling_probe(&ProbeConfig {
                sizes,
                average_degree: degree,
                min_seconds,
                seed,
                ..Default::default()
            })?;
            println!("nodes\tarcs\tsec/step\treps");
            for r in &report.rows {
                println!(
                    "{}\t{}\t{:.3e}\t{}{}",
                    r.nodes,
                    r.arcs,
                    r.seconds_per_step,
                    r.repetitions,
                    if r.noisy { "\tnoisy" } else { "" }
                );
            }
            println!("log-log slope {:.3}", report.slope);
            if let Some(path) = out {
                fs::write(&path, serde_json::to_string_pretty(&report)?)?;
            }
        }
        Command::Eval {
            model,
            data,
            steps,
            lr_states,
            lr_multipliers,
        } => {
            let text = fs::read_to_string(&model).with_context(|| format!("reading {}", model.display()))?;
            let checkpoint: ModelCheckpoint = serde_json::from_str(&text)?;
            let model = LpGnnModel::from_checkpoint(checkpoint)?;
            let ds = load_data(&data)?;
            let inference = InferenceConfig {
                max_steps: steps,
                lr_states,
                lr_multipliers,
                ..Default::default()
            };
            let (acc, r) = evaluate(&model, &ds, &inference, exec)?;
            println!(
                "accuracy {acc:.4} | mean residual {:.2e} after {} steps{}",
                r.mean_residual,
                r.steps,
                if r.converged { "" } else { " (not converged)" }
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
