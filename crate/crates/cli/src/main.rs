use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tabml::pipeline::{
    emit_importance, evaluate_artifact, explain_artifact, load_artifact, predict_batch,
    report_from_dir, run_automl, tune_learner, write_run, PipelineConfig,
};
use tabml::select::SelectMethod;
use tabml::stages::SelectConfig;
use tabml::synthgen::{generate, GeneratorSpec, Shape};
use tabml::tabular::{load_csv, profile, save_csv, split_train_test};
use tabml::tune::SearchMethod;
use tabml::{Error, Result};

/// Environment variable holding the worker thread count.
const THREADS_ENV: &str = "TABML_THREADS";

#[derive(Parser)]
#[command(name = "tabml", version, about = "Automated ML for imbalanced binary classification on tabular data")]
struct Cli {
    /// Seed for every random choice; overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeArg {
    Fraud,
    Failure,
    Backorder,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectArg {
    Lasso,
    Pearson,
    Chi2,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Grid,
    Random,
    Bayes,
}

#[derive(clap::Args)]
struct SelectArgs {
    /// Feature selection applied inside every fold.
    #[arg(long, value_enum)]
    select: Option<SelectArg>,
    #[arg(long, requires = "select")]
    top_k: Option<usize>,
    /// Fixed LASSO penalty.
    #[arg(long, requires = "select")]
    lambda: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Column statistics and class balance as JSON.
    Profile {
        csv: PathBuf,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(long, value_enum)]
        shape: ShapeArg,
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        pos_rate: Option<f64>,
        #[arg(long)]
        signal: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate all configured learners, write the leaderboard and the best model.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's data path.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        select: SelectArgs,
    },
    /// Search hyperparameters for every configured learner on the training split.
    Tune {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        select: SelectArgs,
    },
    /// Score a saved model on labeled data.
    Evaluate {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shapley attributions for one row and global importance.
    Explain {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        row: Option<usize>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Batch prediction to CSV.
    Predict {
        #[arg(long)]
        artifact: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild plots and curve CSVs from a training run directory.
    Report {
        #[arg(long)]
        run_dir: PathBuf,
    },
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|e| io_error(p, e)),
        None => {
            out(&(text + "\n"));
            Ok(())
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn out(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Data(format!("cannot write {}: {e}", path.display()))
}

fn load_config(path: &Path, data: Option<PathBuf>, seed: Option<u64>, select: &SelectArgs) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(d) = data {
        cfg.data.path = Some(d);
    }
    if let Some(s) = seed {
        cfg.data.seed = s;
    }
    if let Some(m) = select.select {
        cfg.select = Some(SelectConfig {
            method: match m {
                SelectArg::Lasso => SelectMethod::Lasso,
                SelectArg::Pearson => SelectMethod::Pearson,
                SelectArg::Chi2 => SelectMethod::Chi2,
            },
            top_k: select.top_k,
            lambda: select.lambda,
        });
    }
    // relative data paths resolve against the config file
    if let (Some(p), Some(dir)) = (cfg.data.path.as_mut(), path.parent()) {
        if p.is_relative() && !p.exists() {
            *p = dir.join(&*p);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Profile { csv, target, out } => {
            let table = load_csv(&csv, &Default::default(), target.as_deref())?;
            write_json(&profile(&table)?, out.as_deref())
        }
        Command::Synth {
            shape,
            rows,
            pos_rate,
            signal,
            noise,
            out,
        } => {
            let mut spec = GeneratorSpec::preset(match shape {
                ShapeArg::Fraud => Shape::Fraud,
                ShapeArg::Failure => Shape::Failure,
                ShapeArg::Backorder => Shape::Backorder,
            });
            spec.n_rows = rows.unwrap_or(spec.n_rows);
            spec.positive_rate = pos_rate.unwrap_or(spec.positive_rate);
            spec.signal_strength = signal.unwrap_or(spec.signal_strength);
            spec.noise = noise.unwrap_or(spec.noise);
            spec.seed = seed.unwrap_or(0);
            let table = generate(&spec)?;
            save_csv(&table, &out)?;
            eprintln!("wrote {} rows to {}", table.n_rows(), out.display());
            Ok(())
        }
        Command::Train {
            config,
            data,
            out_dir,
            select,
        } => {
            let mut cfg = load_config(&config, data, seed, &select)?;
            if out_dir.is_some() {
                cfg.output_dir = out_dir;
            }
            let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("tabml-run"));
            let run = run_automl(&cfg)?;
            out(&run.leaderboard.to_string());
            let files = write_run(&run, &dir)?;
            out(&format!("chosen: {}\n", run.artifact.chosen.label));
            out(&format!("wrote {} files to {}\n", files.len(), dir.display()));
            Ok(())
        }
        Command::Tune {
            config,
            method,
            budget,
            data,
            out,
            select,
        } => {
            let mut cfg = load_config(&config, data, seed, &select)?;
            cfg.tune.method = match method {
                MethodArg::Grid => SearchMethod::Grid,
                MethodArg::Random => SearchMethod::Random,
                MethodArg::Bayes => SearchMethod::Bayes,
            };
            if let Some(b) = budget {
                cfg.tune.budget = b;
            }
            cfg.validate()?;
            let path = cfg
                .data
                .path
                .clone()
                .ok_or_else(|| Error::InvalidInput("config has no data.path".into()))?;
            let table = load_csv(&path, &cfg.data.schema, Some(&cfg.data.target))?;
            let (train, _) = split_train_test(&table, cfg.data.train_fraction, cfg.data.stratified, cfg.data.seed)?;
            let mut results = Vec::new();
            for spec in &cfg.learners {
                let r = tune_learner(&cfg, spec, &train, cfg.data.seed)?;
                eprintln!(
                    "{}: best loss {:.6} at {:?} ({} trials)",
                    spec.kind,
                    r.best_loss,
                    r.best_params,
                    r.trials.len()
                );
                results.push((spec.kind.name().to_string(), r));
            }
            write_json(&results, out.as_deref())
        }
        Command::Evaluate { artifact, data, out } => {
            let a = load_artifact(&artifact)?;
            let table = a.load_input(&data)?;
            write_json(&evaluate_artifact(&a, &table)?, out.as_deref())
        }
        Command::Explain {
            artifact,
            data,
            row,
            out_dir,
        } => {
            let a = load_artifact(&artifact)?;
            let table = a.load_input(&data)?;
            let e = explain_artifact(&a, &table, row, seed.unwrap_or(a.config.data.seed))?;
            fs::create_dir_all(&out_dir).map_err(|err| io_error(&out_dir, err))?;
            write_json(&e, Some(&out_dir.join("explanation.json")))?;
            if let Some(fp) = &e.force_plot {
                write_json(fp, Some(&out_dir.join("force_plot.json")))?;
            }
            emit_importance(&e.global, &out_dir)?;
            for (name, v) in e.global.ranked() {
                out(&format!("{name:<24} {v:.6}\n"));
            }
            Ok(())
        }
        Command::Predict { artifact, data, out } => {
            let a = load_artifact(&artifact)?;
            let table = a.load_input(&data)?;
            let p = predict_batch(&a, &table)?;
            let mut text = String::from("row,prediction,probability\n");
            for (i, (l, s)) in p.labels.iter().zip(&p.probabilities).enumerate() {
                let label = match &a.label_mapping {
                    Some(m) => m.decode(*l).to_string(),
                    None => l.to_string(),
                };
                text.push_str(&format!("{i},{label},{s}\n"));
            }
            fs::File::create(&out)
                .and_then(|mut f| f.write_all(text.as_bytes()))
                .map_err(|e| io_error(&out, e))?;
            eprintln!("wrote {} predictions to {}", p.labels.len(), out.display());
            Ok(())
        }
        Command::Report { run_dir } => {
            let files = report_from_dir(&run_dir)?;
            for f in files {
                out(&format!("{}\n", f.display()));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(v) = std::env::var(THREADS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got `{v}`");
                return ExitCode::from(1);
            }
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
