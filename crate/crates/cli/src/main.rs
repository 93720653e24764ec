use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use oodratio_cli::commands::{cmd_build_base, cmd_eval, cmd_oracle_check, cmd_score, cmd_train, EvalArgs, ScoreArgs};
use oodratio_cli::config::{load_config, to_json, DatasetSource, ExperimentConfig, OracleConfig};
use oodratio_cli::error::CliResult;
use oodratio_cli::Overrides;

#[derive(Parser)]
#[command(name = "oodratio", version, about = "Density-ratio OOD detection experiments")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Idx,
    Cifar10,
    Raw,
}

#[derive(Subcommand)]
enum Command {
    /// Build the base dataset and write base.rdrt and manifest.json.
    BuildBase,
    /// Train the density-ratio classifier.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Use a base file from build-base instead of building one.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Score a dataset with a trained checkpoint.
    Score {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// File to score; without it the config's evaluation sets are scored.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "idx")]
        format: InputFormat,
        #[arg(long)]
        limit: Option<usize>,
        /// Split name written to the CSV.
        #[arg(long)]
        split: Option<String>,
        /// Add one seeded Gaussian noise draw to every input.
        #[arg(long)]
        noise_at_test: bool,
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// AUROC table and histograms from scores CSV files.
    Eval {
        #[arg(long)]
        id: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        ood: Vec<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Train on a Gaussian pair and compare against the exact log ratio.
    OracleCheck {
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
    },
}

fn experiment(cli: &Cli, o: &Overrides) -> CliResult<ExperimentConfig> {
    let mut cfg: ExperimentConfig = load_config(cli.config.as_deref())?;
    o.apply_experiment(&mut cfg);
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    let mut o = Overrides {
        seed: cli.seed,
        output_dir: cli.output_dir.clone(),
        ..Overrides::default()
    };
    match &cli.command {
        Command::BuildBase => {
            let m = cmd_build_base(experiment(&cli, &o)?)?;
            print!("{}", to_json(&m));
        }
        Command::Train { epochs, sigma, base } => {
            o.epochs = *epochs;
            o.sigma = *sigma;
            let mut cfg = experiment(&cli, &o)?;
            if base.is_some() {
                cfg.base.prebuilt = base.clone();
            }
            let r = cmd_train(cfg)?;
            if let Some(last) = r.log.rows().last() {
                println!("epoch {} mean_loss {:.6}", last.epoch, last.mean_loss);
                for (k, v) in &last.auroc {
                    println!("auroc {k} {v:.6}");
                }
            }
            println!("checkpoint {}", r.checkpoint.display());
        }
        Command::Score {
            checkpoint,
            input,
            format,
            limit,
            split,
            noise_at_test,
            noise_sigma,
            out,
        } => {
            let input = input.clone().map(|path| match format {
                InputFormat::Idx => DatasetSource::Idx { path, count_limit: *limit },
                InputFormat::Cifar10 => DatasetSource::Cifar10 {
                    paths: vec![path],
                    count_limit: *limit,
                },
                InputFormat::Raw => DatasetSource::Raw { path, count_limit: *limit },
            });
            let args = ScoreArgs {
                checkpoint: checkpoint.clone(),
                input,
                split: split.clone(),
                noise_at_test: *noise_at_test,
                noise_sigma: *noise_sigma,
                out: out.clone(),
            };
            for f in cmd_score(experiment(&cli, &o)?, &args)?.files {
                println!("{}", f.display());
            }
        }
        Command::Eval { id, ood, bins } => {
            let cfg = experiment(&cli, &o)?;
            let r = cmd_eval(&EvalArgs {
                id: id.clone(),
                ood: ood.clone(),
                bins: bins.unwrap_or(cfg.eval.bins),
                output_dir: cfg.output_dir,
            })?;
            println!("ood_name\tauroc");
            for (n, a) in r.rows {
                println!("{n}\t{a:.6}");
            }
        }
        Command::OracleCheck { epochs, sigma } => {
            o.epochs = *epochs;
            o.sigma = *sigma;
            let mut cfg: OracleConfig = load_config(cli.config.as_deref())?;
            o.apply_oracle(&mut cfg);
            print!("{}", to_json(&cmd_oracle_check(cfg)?));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
