use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use planshare_cli::{
    cmd_cv, cmd_evaluate, cmd_fit, cmd_ingest, cmd_payment, cmd_preprocess, cmd_report, run_all,
    CliError, Overrides, RunConfig,
};
use planshare_core::select::SelectionRule;

/// Market-share modeling of health plans with a sparse multinomial model.
#[derive(Debug, Parser)]
#[command(name = "planshare", version)]
struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the train/test split and the CV folds
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter contracts, compute market shares, write dataset.csv
    Ingest {
        #[arg(long)]
        plans: Option<PathBuf>,
        #[arg(long)]
        totals: Option<PathBuf>,
    },
    /// Screen and encode features, split train/test
    Preprocess {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Cross-validate the lambda path and pick lambda
    Cv {
        #[arg(long)]
        rule: Option<SelectionRule>,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Fit the training rows at the chosen lambda
    Fit {
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Holdout accuracy and confusion matrix
    Evaluate,
    /// Coefficient and odds-ratio tables
    Report,
    /// Rebates and revenue for payment scenarios
    Payment {
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
    /// All stages in order
    RunAll {
        #[arg(long)]
        plans: Option<PathBuf>,
        #[arg(long)]
        totals: Option<PathBuf>,
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut o = Overrides {
        seed: cli.seed,
        out_dir: cli.out_dir,
        ..Overrides::default()
    };
    let mut lambda = None;
    match &cli.command {
        Command::Ingest { plans, totals } => {
            o.plans.clone_from(plans);
            o.totals.clone_from(totals);
        }
        Command::Preprocess { dataset } => o.dataset.clone_from(dataset),
        Command::Cv { rule, folds } => {
            o.rule = *rule;
            o.k_folds = *folds;
        }
        Command::Fit { lambda: l } => lambda = *l,
        Command::Payment { scenarios } => o.scenarios.clone_from(scenarios),
        Command::RunAll {
            plans,
            totals,
            scenarios,
        } => {
            o.plans.clone_from(plans);
            o.totals.clone_from(totals);
            o.scenarios.clone_from(scenarios);
        }
        Command::Evaluate | Command::Report => {}
    }
    let cfg = RunConfig::resolve(cli.config.as_deref(), &o)?;
    match cli.command {
        Command::Ingest { .. } => println!("{}", cmd_ingest(&cfg)?),
        Command::Preprocess { .. } => println!("{}", cmd_preprocess(&cfg)?),
        Command::Cv { .. } => println!("{}", cmd_cv(&cfg)?),
        Command::Fit { .. } => println!("{}", cmd_fit(&cfg, lambda)?),
        Command::Evaluate => println!("{}", cmd_evaluate(&cfg)?),
        Command::Report => println!("{}", cmd_report(&cfg)?),
        Command::Payment { .. } => {
            for b in cmd_payment(&cfg)? {
                println!(
                    "rebate {} premium {} revenue {}",
                    b.rebate, b.premium, b.revenue
                );
            }
        }
        Command::RunAll { .. } => run_all(&cfg, io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
