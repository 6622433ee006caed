use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pseudoprecip_cli::{stages, CliError, Field, PipelineConfig};

#[derive(Parser)]
#[command(name = "pseudoprecip", version, about = "Pseudo-precipitation experiment pipeline")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline config (JSON); the bundled default is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one config value by dotted path, e.g. `synth.nsteps=512`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Output root: data goes to DIR/data, the report to DIR/report.
    #[arg(long, value_name = "DIR", global = true)]
    out: Option<PathBuf>,
    /// Replace the config seed, which drives synthesis and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize TP and VIMD fields.
    Gen,
    /// Train the PP encoder/decoder.
    TrainPp,
    /// Encode TP and VIMD into PP.
    Encode,
    /// Band-limit and subsample a field into its low-resolution half of the pairs.
    MakePairs {
        /// Which field's pairs to use.
        #[arg(long, value_enum)]
        field: Field,
    },
    /// Fit the patch-ridge downscaler on the training steps.
    TrainDs {
        /// Which field's pairs to use.
        #[arg(long, value_enum)]
        field: Field,
    },
    /// Downscale the held-out low-resolution steps.
    Downscale {
        /// Which field's pairs to use.
        #[arg(long, value_enum)]
        field: Field,
    },
    /// Decode a PP series back to TP.
    Decode {
        /// PP series to decode [default: DATA/pp_hr.ppg]
        #[arg(long)]
        input: Option<PathBuf>,
        /// Where the decoded TP goes [default: DATA/tp_from_pp_hr.ppg]
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare the TP and PP routes and write the evaluation and report.
    Evaluate,
    /// Re-emit the report from a stored evaluation.
    Report,
    /// Every stage from gen to report.
    Run,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let c = &cli.common;
    let cfg = PipelineConfig::load(c.config.as_deref(), &c.sets, c.seed, c.out.as_deref())?;
    let line = match cli.command {
        Command::Gen => stages::gen(&cfg)?,
        Command::TrainPp => stages::train_pp(&cfg)?,
        Command::Encode => stages::encode_stage(&cfg)?,
        Command::MakePairs { field } => stages::make_pairs_stage(&cfg, field)?,
        Command::TrainDs { field } => stages::train_ds_stage(&cfg, field)?,
        Command::Downscale { field } => stages::downscale_stage(&cfg, field)?,
        Command::Decode { input, output } => {
            let (din, dout) = stages::default_decode_paths(&cfg);
            stages::decode_stage(&cfg, &input.unwrap_or(din), &output.unwrap_or(dout))?
        }
        Command::Evaluate => stages::evaluate(&cfg)?,
        Command::Report => stages::report(&cfg)?,
        Command::Run => return stages::run(&cfg, |l| println!("{l}")),
    };
    println!("{line}");
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
