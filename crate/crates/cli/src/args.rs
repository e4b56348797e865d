use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pvtcell::coupling::PoolExtent;
use pvtcell::experiments::{db_to_linear, dbm_to_watts, CapacityRule, Network, Scenario};
use pvtcell::interference::FadingModel;

#[derive(Debug, Parser)]
#[command(name = "pvtcell", version, about = "Blocking, outage, spectrum and energy efficiency of random cellular networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct OutputArgs {
    /// Write the table here and a manifest next to it, instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for sweep points (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum Format {
    Csv,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Blocking probability from the coupled solve, one row per sweep point.
    Blocking(SweepArgs),
    /// Mean sojourn time from the coupled solve.
    Sojourn(SweepArgs),
    /// Spatial spectrum efficiency.
    Sse(EfficiencyArgs),
    /// Energy efficiency.
    Ee(EfficiencyArgs),
    /// Analytical outage probability for fixed interferer counts.
    Outage(OutageArgs),
    /// Simulated outage.
    Mc(McArgs),
    /// Compare the analytical models against their oracles.
    Validate(ValidateArgs),
    /// Reproduce one of the figure sweeps (3 to 10).
    Figure(FigureArgs),
    /// Re-run the command recorded in a manifest.
    Rerun(RerunArgs),
}

/// Physical, traffic and solver settings. List-valued flags take
/// comma-separated values and sweep over their Cartesian product.
#[derive(Debug, Args, Clone, Serialize)]
pub struct ScenarioArgs {
    /// SINR threshold(s) in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_values_t = [10.0])]
    pub gamma0_db: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [4.0])]
    pub path_loss: Vec<f64>,
    /// Base stations per km².
    #[arg(long, value_delimiter = ',', default_values_t = [0.2])]
    pub bs_density: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [20])]
    pub channels: Vec<u32>,
    /// Calls per minute.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0])]
    pub arrival_rate: Vec<f64>,
    /// Call completions per minute on one channel.
    #[arg(long, default_value_t = 0.25)]
    pub holding_rate: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 30.0)]
    pub tx_power_dbm: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 31.54)]
    pub antenna_gain_db: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub noise_dbm: f64,
    #[arg(long, value_enum, default_value_t = Fading::Rayleigh)]
    pub fading: Fading,
    /// Nakagami shape, for the nakagami fading models.
    #[arg(long, default_value_t = 1.0)]
    pub nakagami_m: f64,
    /// Shadowing spread in dB, for the log-normal fading models.
    #[arg(long, default_value_t = 4.0)]
    pub shadowing_db: f64,
    /// Interferer pool seen by a channel: an unbounded Poisson field or a
    /// fixed number of neighbouring cells.
    #[arg(long, value_enum, default_value_t = Pool::Unbounded)]
    pub pool: Pool,
    #[arg(long, default_value_t = 24)]
    pub pool_size: u32,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Fading {
    None,
    Rayleigh,
    Nakagami,
    Lognormal,
    NakagamiLognormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Pool {
    Unbounded,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum NetworkKind {
    Pvt,
    GridMc,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct NetworkArgs {
    #[arg(long, value_enum, default_value_t = NetworkKind::Pvt)]
    pub network: NetworkKind,
    /// Hexagonal rings around the serving site in the grid network.
    #[arg(long, default_value_t = 5)]
    pub rings: u32,
    /// Trials per grid outage estimate.
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

impl NetworkArgs {
    pub fn network(&self) -> Network {
        match self.network {
            NetworkKind::Pvt => Network::Pvt,
            NetworkKind::GridMc => Network::GridMc { rings: self.rings, trials: self.trials, seed: self.seed },
        }
    }
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub network: NetworkArgs,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct CapacityArgs {
    /// Capacity with exactly this many interferers.
    #[arg(long, conflicts_with = "weighted_delta")]
    pub delta: Option<u32>,
    /// Capacity averaged over the number of busy interferers (the default).
    #[arg(long)]
    pub weighted_delta: bool,
}

impl CapacityArgs {
    pub fn rule(&self) -> CapacityRule {
        self.delta.map_or(CapacityRule::Weighted, CapacityRule::Fixed)
    }
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct EfficiencyArgs {
    #[command(flatten)]
    pub sweep: SweepArgs,
    #[command(flatten)]
    pub capacity: CapacityArgs,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct OutageArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Interferer counts.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 5])]
    pub delta: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum McModel {
    /// `Δ` interferers uniform on the disk holding `Δ` base stations on average.
    Disk,
    /// Typical user in a Poisson network.
    Pvt,
    /// User uniform in the central cell of a hexagonal grid.
    Grid,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct McArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = McModel::Disk)]
    pub model: McModel,
    /// Interferer counts, for the disk model.
    #[arg(long, value_delimiter = ',', default_values_t = [1])]
    pub delta: Vec<u32>,
    /// Disk radius in km, for the disk model (default: holds `Δ` base stations).
    #[arg(long)]
    pub disk_radius: Option<f64>,
    /// Probability that each interfering BS transmits.
    #[arg(long, default_value_t = 1.0)]
    pub activity: f64,
    #[arg(long, default_value_t = 5)]
    pub rings: u32,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SuiteArg {
    Markov,
    Outage,
    ChainMc,
    PvtMc,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct ValidateArgs {
    /// Suites to run (default: all).
    #[arg(long, value_enum, value_delimiter = ',')]
    pub suite: Vec<SuiteArg>,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct FigureArgs {
    #[arg(value_parser = clap::value_parser!(u32).range(3..=10))]
    pub id: u32,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub capacity: CapacityArgs,
    /// Add the simulated hexagonal grid network to figures 6 to 10.
    #[arg(long)]
    pub grid: bool,
    #[arg(long, default_value_t = 5)]
    pub rings: u32,
    #[arg(long, default_value_t = 20_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct RerunArgs {
    pub manifest: std::path::PathBuf,
}

impl ScenarioArgs {
    fn fading_model(&self) -> FadingModel {
        let sigma = self.shadowing_db * std::f64::consts::LN_10 / 10.0;
        match self.fading {
            Fading::None => FadingModel::None,
            Fading::Rayleigh => FadingModel::Rayleigh,
            Fading::Nakagami => FadingModel::Nakagami { m: self.nakagami_m },
            Fading::Lognormal => FadingModel::LogNormal { sigma },
            Fading::NakagamiLognormal => FadingModel::NakagamiLogNormal { m: self.nakagami_m, sigma },
        }
    }

    /// Scenario with every list flag at its first value.
    pub fn base(&self) -> Scenario {
        let mut sc = Scenario::default()
            .gamma0_db(self.gamma0_db[0])
            .path_loss(self.path_loss[0])
            .bs_density(self.bs_density[0])
            .channels(self.channels[0])
            .arrival_rate(self.arrival_rate[0]);
        sc.traffic.holding_rate = self.holding_rate;
        sc.link.k_prime = dbm_to_watts(self.tx_power_dbm) * db_to_linear(self.antenna_gain_db);
        sc.link.noise_power = dbm_to_watts(self.noise_dbm);
        sc.model = self.fading_model();
        sc.solver.pool = match self.pool {
            Pool::Unbounded => PoolExtent::Unbounded,
            Pool::Fixed => PoolExtent::Fixed,
        };
        sc.solver.n_max = self.pool_size;
        sc.solver.damping = self.damping;
        sc.solver.tol = self.tol;
        sc.solver.max_iters = self.max_iters;
        sc
    }

    /// Cartesian product of the list flags, threshold varying fastest.
    pub fn sweep(&self) -> Vec<Scenario> {
        let base = self.base();
        let mut out = Vec::new();
        for &c in &self.channels {
            for &b in &self.path_loss {
                for &l in &self.arrival_rate {
                    for &d in &self.bs_density {
                        for &g in &self.gamma0_db {
                            out.push(base.channels(c).path_loss(b).arrival_rate(l).bs_density(d).gamma0_db(g));
                        }
                    }
                }
            }
        }
        out
    }

    /// Names of list flags given more than one value.
    pub fn swept(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        for (name, n) in [
            ("--gamma0-db", self.gamma0_db.len()),
            ("--path-loss", self.path_loss.len()),
            ("--bs-density", self.bs_density.len()),
            ("--channels", self.channels.len()),
            ("--arrival-rate", self.arrival_rate.len()),
        ] {
            if n > 1 {
                v.push(name);
            }
        }
        v
    }
}
