use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinheat::{run, Command, RunConfig};

#[derive(Parser)]
#[command(author, version, about = "Heat traces of the deformed Dirac operator on the two-sphere")]
struct Args {
    #[command(subcommand)]
    command: Commands,
}

#[derive(clap::Args)]
struct Common {
    /// Path to the JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the configuration
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Commands {
    /// Eigenvalues per azimuthal block, one CSV per gamma
    Spectrum(Common),
    /// Heat trace and Duhamel decomposition over the sigma grid
    Heat(Common),
    /// Effective spectral dimension over the sigma grid
    Dseff(Common),
    /// Small-sigma coefficients and C_W1W1 into fit.json
    Fit(Common),
    /// Run every validation check into validate.json
    Validate(Common),
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (command, common) = match args.command {
        Commands::Spectrum(c) => (Command::Spectrum, c),
        Commands::Heat(c) => (Command::Heat, c),
        Commands::Dseff(c) => (Command::Dseff, c),
        Commands::Fit(c) => (Command::Fit, c),
        Commands::Validate(c) => (Command::Validate, c),
    };
    if let Err(e) = spinheat::engine::init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = RunConfig::load(&common.config).and_then(|cfg| {
        let out = common.output_dir.unwrap_or_else(|| cfg.output_dir.clone());
        run(command, &cfg, &out)
    });
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
