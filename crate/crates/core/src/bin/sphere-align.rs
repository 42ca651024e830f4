use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sphere_align::experiments::{execute, Command};

#[derive(Parser)]
#[command(name = "sphere-align", version, about = "Alignment dynamics on the sphere: reproducible experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate a particle system and check its long-time regime
    Particles(Common),
    /// Compute the point that flows to -Ω_∞ and check it forward
    Vback(Common),
    /// Solve the axisymmetric continuum equation and check distance rates
    Kinetic(Common),
    /// Check the slow-decay construction
    Slowdecay(Common),
    /// Evolve an empirical measure and check its two-atom limit
    Measure(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// RNG seed (overrides the config's)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Particles(a) => (Command::Particles, a),
        Cmd::Vback(a) => (Command::Vback, a),
        Cmd::Kinetic(a) => (Command::Kinetic, a),
        Cmd::Slowdecay(a) => (Command::SlowDecay, a),
        Cmd::Measure(a) => (Command::Measure, a),
    };
    let code = execute(command, &args.config, &args.out, args.seed, args.quiet);
    ExitCode::from(code as u8)
}
