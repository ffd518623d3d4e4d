use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dphase_cli::commands::{ANALYZE_DIR, FIELD_STEM, FLAGGED_FILE, SOLVE_DIR};
use dphase_cli::{cmd_analyze, cmd_measure, cmd_pipeline, cmd_probe_axioms, cmd_solve, CliError, CliResult};

#[derive(Parser)]
#[command(name = "dphase", version, about = "Minimize, analyze and measure sphere-valued double-phase maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, value_name = "K")]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long, value_name = "S")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the energy from the configured initial map.
    Solve(Common),
    /// Classify probe points of a solved field.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Field sidecar; defaults to the solve output under the output directory.
        #[arg(long, value_name = "PATH")]
        field: Option<PathBuf>,
    },
    /// Measure the singular points flagged by the analyzer.
    Measure {
        #[command(flatten)]
        common: Common,
        /// Flag list; defaults to the analyze output under the output directory.
        #[arg(long, value_name = "PATH")]
        flags: Option<PathBuf>,
    },
    /// Solve, analyze and measure in sequence.
    Pipeline(Common),
    /// Check the structural assumptions of the measure density.
    ProbeAxioms(Common),
}

fn prepare(common: &Common) -> CliResult<(dphase_cli::LoadedConfig, PathBuf)> {
    if let Some(k) = common.threads {
        if k == 0 {
            return Err(CliError::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    let mut loaded = dphase_cli::load(&common.config)?;
    if let Some(seed) = common.seed {
        loaded.config.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| loaded.resolve(&loaded.config.output_dir));
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    Ok((loaded, out))
}

fn run(cli: Cli) -> CliResult<dphase_cli::RunManifest> {
    match cli.command {
        Command::Solve(c) => {
            let (loaded, out) = prepare(&c)?;
            cmd_solve(&loaded, &out)
        }
        Command::Analyze { common, field } => {
            let (loaded, out) = prepare(&common)?;
            let field = field.unwrap_or_else(|| out.join(SOLVE_DIR).join(FIELD_STEM).with_extension("json"));
            cmd_analyze(&loaded, &field, &out)
        }
        Command::Measure { common, flags } => {
            let (loaded, out) = prepare(&common)?;
            let flags = flags.unwrap_or_else(|| out.join(ANALYZE_DIR).join(FLAGGED_FILE));
            cmd_measure(&loaded, &flags, &out)
        }
        Command::Pipeline(c) => {
            let (loaded, out) = prepare(&c)?;
            cmd_pipeline(&loaded, &out)
        }
        Command::ProbeAxioms(c) => {
            let (loaded, out) = prepare(&c)?;
            cmd_probe_axioms(&loaded, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(manifest) => {
            for stage in &manifest.stages {
                eprintln!("{}: {} outputs in {:.2} s", stage.stage, stage.outputs.len(), stage.wall_time_s);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
