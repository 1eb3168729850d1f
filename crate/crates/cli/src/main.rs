use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use embedprobe_cli::{cmd_all, cmd_assess, cmd_embed, cmd_generate, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "embedprobe", version, about = "Assess time-series model embeddings of physiological signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build or ingest the dataset and write it in canonical form.
    Generate,
    /// Embed the dataset, or check an external embedding directory.
    Embed,
    /// Run the assessment batteries and write the report.
    Assess,
    /// Generate, embed and assess in one go.
    All,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    match cli.command {
        Command::Generate => println!("{}", cmd_generate(&cfg)?.display()),
        Command::Embed => println!("{}", cmd_embed(&cfg)?.display()),
        Command::Assess | Command::All => {
            let r = if matches!(cli.command, Command::All) { cmd_all(&cfg)? } else { cmd_assess(&cfg)? };
            let v = &r.verdicts;
            println!("disentanglement: {}", v.disentanglement.as_str());
            println!("temporal_preservation: {}", v.temporal_preservation.as_str());
            println!("scenario_discrimination: {}", v.scenario_discrimination.as_str());
            println!("report: {}", cfg.report_dir().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EMBEDPROBE_LOG", "warn")).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
