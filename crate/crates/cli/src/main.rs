use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use config::ExperimentConfig;
use error::CliError;

/// Spiked-matrix experiments under quartic rotationally invariant noise.
#[derive(Parser, Debug)]
#[command(name = "quartamp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral density on a grid over the support
    Density(Common),
    /// Ranked eigenvalues of Y and J(Y) for one instance
    Spectrum(Common),
    /// Moments and free cumulants
    Cumulants(Common),
    /// Bayes-optimal replica fixed point per lambda
    Replica(Common),
    /// Fixed point of the baseline AMP state evolution
    BaselineSe(Common),
    /// BAMP state-evolution trajectories
    BampSe(Common),
    /// Mismatched Gaussian-likelihood replica fixed point
    Mismatch(Common),
    /// Per-trial simulation results
    Run(Common),
    /// Theory and simulation averaged over trials, per lambda
    Sweep(Common),
    /// Learn pre-processing coefficients by expectation maximization
    Em(Common),
}

/// Settings shared by every subcommand. Flags override the config file.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// key = value configuration file
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Extra overrides as key=value
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    mu: Option<String>,
    /// Comma list or start:stop:step
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long, short)]
    n: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Outer iterations
    #[arg(long, short)]
    t: Option<String>,
    #[arg(long)]
    mc_samples: Option<String>,
    /// monte-carlo | quadrature
    #[arg(long)]
    se_moments: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    algorithms: Option<String>,
    #[arg(long)]
    theory: Option<String>,
    /// optimal, or a comma list c1,c2,...
    #[arg(long)]
    coeffs: Option<String>,
    #[arg(long)]
    em_steps: Option<String>,
    #[arg(long)]
    zeta: Option<String>,
    #[arg(long)]
    kmax: Option<String>,
    #[arg(long)]
    points: Option<String>,
    /// Output file, `-` for stdout
    #[arg(long, short)]
    output: Option<String>,
    /// Print the resolved configuration as key = value lines and exit
    #[arg(long)]
    print_config: bool,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("mu", &self.mu),
            ("lambda", &self.lambda),
            ("n", &self.n),
            ("trials", &self.trials),
            ("prior", &self.prior),
            ("epsilon", &self.epsilon),
            ("t", &self.t),
            ("mc_samples", &self.mc_samples),
            ("se_moments", &self.se_moments),
            ("seed", &self.seed),
            ("algorithms", &self.algorithms),
            ("theory", &self.theory),
            ("coeffs", &self.coeffs),
            ("em_steps", &self.em_steps),
            ("zeta", &self.zeta),
            ("kmax", &self.kmax),
            ("points", &self.points),
            ("output", &self.output),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) =
                kv.split_once('=').ok_or_else(|| CliError::Config(format!("--set expects key=value, got '{kv}'")))?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    use commands as c;
    let common = match &cli.command {
        Command::Density(a)
        | Command::Spectrum(a)
        | Command::Cumulants(a)
        | Command::Replica(a)
        | Command::BaselineSe(a)
        | Command::BampSe(a)
        | Command::Mismatch(a)
        | Command::Run(a)
        | Command::Sweep(a)
        | Command::Em(a) => a,
    };
    if common.print_config {
        print!("{}", common.resolve()?.to_kv());
        return Ok(());
    }
    match cli.command {
        Command::Density(a) => c::density(&a.resolve()?),
        Command::Spectrum(a) => c::spectrum(&a.resolve()?),
        Command::Cumulants(a) => c::cumulants(&a.resolve()?),
        Command::Replica(a) => c::replica(&a.resolve()?),
        Command::BaselineSe(a) => c::baseline_se(&a.resolve()?),
        Command::BampSe(a) => c::bamp_se(&a.resolve()?),
        Command::Mismatch(a) => c::mismatch(&a.resolve()?),
        Command::Run(a) => c::run(&a.resolve()?),
        Command::Sweep(a) => c::sweep(&a.resolve()?),
        Command::Em(a) => c::em(&a.resolve()?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("quartamp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
