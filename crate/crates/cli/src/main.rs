use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use robustcheck::config::DatasetSource;
use robustcheck::{run_pipeline, run_stage, CliError, Overrides, RunConfig, Stage};
use robustcheck_core::data::synthetic;
use robustcheck_core::neighbourhood::Scheme;
use robustcheck_core::robustness::Explainer;

#[derive(Parser)]
#[command(name = "robustcheck", version, about = "Robustness and trust assessment of neural-network explanations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Random,
    Medoid,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated explainer tags; ensemble and mean are always added.
    #[arg(long, value_delimiter = ',')]
    explainers: Option<Vec<String>>,
    /// Restrict to one neighbourhood scheme.
    #[arg(long, value_enum)]
    neighbourhood: Option<SchemeArg>,
}

#[derive(Subcommand)]
enum Command {
    Preprocess(Common),
    Train(Common),
    Index(Common),
    RobustnessValid(Common),
    FitTrust(Common),
    AssessTest(Common),
    Validate(Common),
    /// Every stage in order.
    Pipeline(Common),
    /// Write a built-in synthetic dataset and its schema.
    Synth {
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 600)]
        rows: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory receiving `<name>.csv` and `<name>.schema.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the default configuration.
    DefaultConfig,
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&c.config)?;
    let explainers = c
        .explainers
        .as_ref()
        .map(|v| {
            v.iter()
                .map(|s| s.trim().parse::<Explainer>().map_err(|e| CliError::Config(e.to_string())))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    cfg.apply(&Overrides {
        out_dir: c.out.clone(),
        seed: c.seed,
        explainers,
        scheme: c.neighbourhood.map(|s| match s {
            SchemeArg::Random => Scheme::Random,
            SchemeArg::Medoid => Scheme::Medoid,
        }),
    });
    Ok(cfg)
}

fn synth(name: &str, rows: usize, seed: u64, out: &PathBuf) -> Result<(), CliError> {
    let cfg = RunConfig { dataset: DatasetSource::Synthetic { name: name.into(), rows, seed: Some(seed) }, ..RunConfig::default() };
    cfg.validate()?;
    let io = |e: std::io::Error| CliError::Config(format!("{}: {e}", out.display()));
    std::fs::create_dir_all(out).map_err(io)?;
    let t = synthetic::by_name(name, rows, seed).map_err(|e| CliError::Config(e.to_string()))?;
    synthetic::write_table_csv(&t, out.join(format!("{name}.csv"))).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::write(out.join(format!("{name}.schema.json")), t.schema.to_json()).map_err(io)?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let stage = |c: &Common, s: Stage| load(c).and_then(|cfg| run_stage(&cfg, s)).map(|_| ());
    match &cli.command {
        Command::Preprocess(c) => stage(c, Stage::Preprocess),
        Command::Train(c) => stage(c, Stage::Train),
        Command::Index(c) => stage(c, Stage::Index),
        Command::RobustnessValid(c) => stage(c, Stage::RobustnessValid),
        Command::FitTrust(c) => stage(c, Stage::FitTrust),
        Command::AssessTest(c) => stage(c, Stage::AssessTest),
        Command::Validate(c) => stage(c, Stage::Validate),
        Command::Pipeline(c) => {
            let cfg = load(c)?;
            run_pipeline(&cfg)?;
            println!("run complete: {}", cfg.out_dir.join(robustcheck::manifest::MANIFEST_FILE).display());
            Ok(())
        }
        Command::Synth { name, rows, seed, out } => synth(name, *rows, *seed, out),
        Command::DefaultConfig => {
            println!("{}", serde_json::to_string_pretty(&RunConfig::default()).expect("serialisable"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
