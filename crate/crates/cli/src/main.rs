use clap::{Args, Parser, Subcommand};

use favard_cli::config::{validate, CommandKind, RawConfig};
use favard_cli::{run, CliError};

#[derive(Parser)]
#[command(
    name = "favard",
    version,
    about = "Simulate random planar grid/disc fractals and compute their projection and Favard-length statistics"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Builtin model name (percolation, uniform_choice, peres_solomyak,
    /// column_degenerate, row_degenerate, four_corner, vv_discs) or a path
    /// to a model definition JSON file
    #[arg(long)]
    model: Option<String>,
    /// Subdivision level L
    #[arg(long)]
    l: Option<u32>,
    /// Depth, or inclusive range `a..b`
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    replicates: Option<u32>,
    #[arg(long)]
    chains: Option<u32>,
    /// Replicates for the internal reference table of `ratio`
    #[arg(long)]
    ref_replicates: Option<u32>,
    #[arg(long)]
    theta_nodes: Option<u32>,
    #[arg(long)]
    t_nodes: Option<u32>,
    /// Seed (required for stochastic commands)
    #[arg(long)]
    seed: Option<u64>,
    /// Neighborhood radius added to every projected interval
    #[arg(long)]
    fatten: Option<f64>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    angles_per_band: Option<u32>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    m_override: Option<u32>,
    /// Estimate the law conditioned on survival (rejection sampling)
    #[arg(long)]
    condition_on_survival: bool,
    /// Disc models: draw the child count uniformly from {0, ..., 2L}
    #[arg(long)]
    disc_random_count: bool,
    /// Output path (stdout when omitted)
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; never affects output bytes
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample one nested chain and emit it as JSON
    Sample(Flags),
    /// Favard lengths of sampled realizations
    Favard(Flags),
    /// Monte-Carlo sweep of E[Fav(S_n)] over a depth range
    Expected(Flags),
    /// Exact E[Fav(S_n)] by double quadrature of survival probabilities
    ExactExpected(Flags),
    /// Exact survival probabilities on an angle-offset grid
    Survival(Flags),
    /// The per-direction variance V(theta) by both formulas
    Vtheta(Flags),
    /// The limit constant: the angle integral of 2 / V(theta)
    Limit(Flags),
    /// Per-chain Favard-to-reference ratio traces
    Ratio(Flags),
    /// Expected projection lengths across steep slope bands
    DegScan(Flags),
    /// Per-band L2 diagnostics of one realization
    Bv(Flags),
    /// Concentration-bound battery with empirical validation
    Bounds(Flags),
    /// Run an experiment described by a JSON config file
    Run {
        #[arg(long)]
        config: String,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn to_raw(kind: CommandKind, flags: Flags) -> RawConfig {
    RawConfig {
        command: Some(kind),
        model: flags.model,
        l: flags.l,
        n: flags.n,
        replicates: flags.replicates,
        chains: flags.chains,
        ref_replicates: flags.ref_replicates,
        theta_nodes: flags.theta_nodes,
        t_nodes: flags.t_nodes,
        seed: flags.seed,
        fatten: flags.fatten,
        k_max: flags.k_max,
        angles_per_band: flags.angles_per_band,
        trials: flags.trials,
        m_override: flags.m_override,
        condition_on_survival: if flags.condition_on_survival {
            Some(true)
        } else {
            None
        },
        disc_random_count: if flags.disc_random_count {
            Some(true)
        } else {
            None
        },
        out: flags.out,
        threads: flags.threads,
    }
}

fn raw_config(cmd: Cmd) -> Result<RawConfig, CliError> {
    Ok(match cmd {
        Cmd::Sample(f) => to_raw(CommandKind::Sample, f),
        Cmd::Favard(f) => to_raw(CommandKind::Favard, f),
        Cmd::Expected(f) => to_raw(CommandKind::Expected, f),
        Cmd::ExactExpected(f) => to_raw(CommandKind::ExactExpected, f),
        Cmd::Survival(f) => to_raw(CommandKind::Survival, f),
        Cmd::Vtheta(f) => to_raw(CommandKind::Vtheta, f),
        Cmd::Limit(f) => to_raw(CommandKind::Limit, f),
        Cmd::Ratio(f) => to_raw(CommandKind::Ratio, f),
        Cmd::DegScan(f) => to_raw(CommandKind::DegScan, f),
        Cmd::Bv(f) => to_raw(CommandKind::Bv, f),
        Cmd::Bounds(f) => to_raw(CommandKind::Bounds, f),
        Cmd::Run { config, threads } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::io(format!("config file {config}: {e}")))?;
            let mut raw: RawConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::config(vec![format!("config file {config}: {e}")]))?;
            if threads.is_some() {
                raw.threads = threads;
            }
            raw
        }
    })
}

fn main() {
    let cli = Cli::parse();
    let result = raw_config(cli.cmd)
        .and_then(validate)
        .and_then(|exp| run::run(&exp));
    if let Err(e) = result {
        eprintln!("{}", e.record());
        std::process::exit(e.code);
    }
}
