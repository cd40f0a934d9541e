use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use docseg::netgraph::{architecture_report, build_graph};
use docseg::pipelines::{
    builtin_task, run_evaluate, run_predict, run_train, NetworkSource, PageModel, PredictOptions, TaskConfig,
    TrainOptions, BUILTIN_TASKS,
};

#[derive(Parser)]
#[command(name = "docseg", version, about = "Document image segmentation: train, predict, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct TaskArg {
    /// Built-in task: page, baseline, layout, layout-large, ornament, photo.
    #[arg(long)]
    task: Option<String>,
    /// Task definition file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
}

impl TaskArg {
    fn resolve(&self) -> docseg::Result<TaskConfig> {
        match (&self.task, &self.config) {
            (Some(name), _) => builtin_task(name),
            (_, Some(path)) => TaskConfig::load(path),
            _ => unreachable!("clap requires one of --task / --config"),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train on a dataset directory with images/ and labels/.
    Train {
        #[command(flatten)]
        task: TaskArg,
        /// Dataset root.
        #[arg(long)]
        input: PathBuf,
        /// Directory for checkpoints and the training log.
        #[arg(long)]
        output: PathBuf,
        /// Initial weights (safetensors).
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the task's epoch count.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Predict masks and geometry for images or directories of images.
    Predict {
        #[command(flatten)]
        task: TaskArg,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Page model checkpoint; restricts outputs to the predicted page.
        #[arg(long)]
        page_weights: Option<PathBuf>,
    },
    /// Score a prediction directory against ground truth.
    Evaluate {
        #[command(flatten)]
        task: TaskArg,
        /// Directory written by `predict`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Directory for metrics.json and metrics.csv.
        #[arg(long)]
        output: PathBuf,
    },
    /// Print the layer table and parameter counts.
    InspectArch {
        #[arg(long)]
        task: Option<String>,
        #[arg(long, conflicts_with = "task")]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 512)]
        height: usize,
        #[arg(long, default_value_t = 512)]
        width: usize,
    },
}

fn run(cli: Cli) -> docseg::Result<()> {
    match cli.command {
        Command::Train {
            task,
            input,
            output,
            weights,
            seed,
            jobs,
            epochs,
        } => {
            let mut task = task.resolve()?;
            if let Some(e) = epochs {
                task.train.epochs = e;
            }
            let out = run_train(
                &task,
                &input,
                &output,
                &TrainOptions {
                    seed,
                    jobs,
                    init_weights: weights,
                },
            )?;
            let first = out.history.epoch_losses.first().copied().unwrap_or(f64::NAN);
            let last = out.history.epoch_losses.last().copied().unwrap_or(f64::NAN);
            println!(
                "trained {} steps; mean loss {first:.5} -> {last:.5}; weights in {}",
                out.history.steps.len(),
                out.final_weights.display()
            );
        }
        Command::Predict {
            task,
            weights,
            input,
            output,
            jobs,
            page_weights,
        } => {
            let task = task.resolve()?;
            let source = NetworkSource::from_checkpoint(&task, &weights)?;
            let page_task = builtin_task("page")?;
            let page_source = page_weights
                .map(|p| NetworkSource::from_checkpoint(&page_task, p))
                .transpose()?;
            let options = PredictOptions {
                jobs,
                page: page_source.as_ref().map(|s| PageModel {
                    task: &page_task,
                    source: s,
                }),
            };
            let done = run_predict(&task, &source, &input, &output, &options)?;
            println!("wrote predictions for {} images to {}", done.len(), output.display());
        }
        Command::Evaluate {
            task,
            input,
            ground_truth,
            output,
        } => {
            let task = task.resolve()?;
            let report = run_evaluate(&task, &input, &ground_truth)?;
            std::fs::create_dir_all(&output).map_err(|e| docseg::Error::Io {
                path: output.clone(),
                source: e,
            })?;
            report.write_json(output.join("metrics.json"))?;
            report.write_csv(output.join("metrics.csv"))?;
            for (k, v) in &report.aggregate {
                println!("{k}: {v:.4}");
            }
            for r in &report.thresholds {
                println!(
                    "IoU {:.1}: P {:.4}  R {:.4}  F {:.4}",
                    r.iou_threshold, r.precision, r.recall, r.f_measure
                );
            }
        }
        Command::InspectArch {
            task,
            config,
            height,
            width,
        } => {
            let task = match (task, config) {
                (Some(n), _) => builtin_task(&n)?,
                (_, Some(p)) => TaskConfig::load(p)?,
                _ => builtin_task("page")?,
            };
            let graph = build_graph(&task.arch_config())?;
            print!("{}", architecture_report(&graph, height, width));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, docseg::Error::Task(ref m) if m.starts_with("unknown task")) {
                eprintln!("available tasks: {}", BUILTIN_TASKS.join(", "));
            }
            ExitCode::FAILURE
        }
    }
}
