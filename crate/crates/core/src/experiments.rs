//! Parameter sweeps behind the figures, shared by the command line tool and
//! the acceptance suite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{iterate_fixed_point, solve_fixed_point, FixedPointSolution, SolverConfig, TrafficParams};
use crate::efficiency::{efficiency_report, fixed_capacity, weighted_capacity, Capacity, RadioEconomics};
use crate::interference::{DiskRule, FadingModel, LinkParams};
use crate::markov::{blocking_probability, mean_sojourn_time};
use crate::montecarlo::{capacity_from_samples, grid_sinr_samples, outage_from_samples, MCConfig};
use crate::numerics::QuadratureSpec;
use crate::report::{fmt, Table};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Coupling(#[from] crate::coupling::CouplingError),
    #[error(transparent)]
    Efficiency(#[from] crate::efficiency::EfficiencyError),
    #[error(transparent)]
    MonteCarlo(#[from] crate::montecarlo::MonteCarloError),
    #[error(transparent)]
    Chain(#[from] crate::markov::ChainError),
    #[error(transparent)]
    Report(#[from] crate::report::ReportError),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Everything a single evaluation point needs, in linear units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub link: LinkParams,
    pub traffic: TrafficParams,
    pub model: FadingModel,
    pub solver: SolverConfig,
    pub quadrature: QuadratureSpec,
    pub economics: RadioEconomics,
}

impl Default for Scenario {
    /// 0.2 BS/km², 20 channels, 1 call/min held 4 min on average, 1 W
    /// transmit power with 31.54 dB antenna gain, 1 mW noise, `b = 4`,
    /// Rayleigh fading and a 10 dB threshold.
    fn default() -> Self {
        Self {
            link: LinkParams {
                bs_density: 0.2,
                path_loss_exponent: 4.0,
                k_prime: dbm_to_watts(30.0) * db_to_linear(31.54),
                noise_power: dbm_to_watts(0.0),
                gamma0: db_to_linear(10.0),
                disk: DiskRule::DensityMatched,
            },
            traffic: TrafficParams { channels: 20, arrival_rate: 1.0, holding_rate: 0.25 },
            model: FadingModel::Rayleigh,
            solver: SolverConfig::default(),
            quadrature: QuadratureSpec::default(),
            economics: RadioEconomics::default(),
        }
    }
}

impl Scenario {
    pub fn gamma0_db(mut self, db: f64) -> Self {
        self.link.gamma0 = db_to_linear(db);
        self
    }

    pub fn channels(mut self, c: u32) -> Self {
        self.traffic.channels = c;
        self
    }

    pub fn path_loss(mut self, b: f64) -> Self {
        self.link.path_loss_exponent = b;
        self
    }

    pub fn arrival_rate(mut self, lambda: f64) -> Self {
        self.traffic.arrival_rate = lambda;
        self
    }

    pub fn bs_density(mut self, density: f64) -> Self {
        self.link.bs_density = density;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate().map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        self.model.validate().map_err(|e| ExperimentError::Invalid(e.to_string()))?;
        self.economics.validate()?;
        self.solver.validate()?;
        if self.traffic.channels == 0 {
            return Err(ExperimentError::Invalid("channels must be at least 1".into()));
        }
        if !(self.traffic.arrival_rate > 0.0) {
            return Err(ExperimentError::Invalid(format!(
                "arrival rate must be positive, got {}",
                self.traffic.arrival_rate
            )));
        }
        if !(self.traffic.holding_rate > 0.0) {
            return Err(ExperimentError::Invalid("holding rate must be positive".into()));
        }
        Ok(())
    }
}

/// How the interferer count entering the capacity is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityRule {
    /// Average over the binomial number of active interferers.
    Weighted,
    /// Exactly this many interferers on the density-matched disk.
    Fixed(u32),
}

impl CapacityRule {
    pub fn label(&self) -> String {
        match self {
            CapacityRule::Weighted => "weighted".into(),
            CapacityRule::Fixed(d) => format!("fixed-{d}"),
        }
    }
}

/// Which network geometry supplies outage and capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Network {
    /// Analytical Poisson-Voronoi model.
    Pvt,
    /// Hexagonal grid by simulation: each interfering site is busy with the
    /// channel-busy probability, and the same draws are reused for every
    /// evaluation of the fixed-point map.
    GridMc { rings: u32, trials: u64, seed: u64 },
}

impl Network {
    pub fn grid_default() -> Self {
        Network::GridMc { rings: 5, trials: 20_000, seed: 1 }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Network::Pvt => "pvt",
            Network::GridMc { .. } => "grid-mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPoint {
    pub blocking: f64,
    pub sojourn: f64,
    pub solution: FixedPointSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyPoint {
    pub channel: ChannelPoint,
    pub capacity: Capacity,
    pub report: crate::efficiency::EfficiencyReport,
}

fn grid_config(sc: &Scenario, trials: u64, seed: u64, activity: f64) -> MCConfig {
    MCConfig { trials, seed, activity, ..MCConfig::for_density(sc.link.bs_density) }
}

fn solve(sc: &Scenario, network: Network) -> Result<FixedPointSolution> {
    sc.validate()?;
    Ok(match network {
        Network::Pvt => solve_fixed_point(sc.traffic, &sc.link, sc.model, &sc.solver, &sc.quadrature)?,
        Network::GridMc { rings, trials, seed } => {
            let unavailability = |p: f64| -> crate::coupling::Result<f64> {
                let samples = grid_sinr_samples(&sc.link, sc.model, &grid_config(sc, trials, seed, p), rings)
                    .map_err(|e| crate::coupling::CouplingError::InvalidConfig(e.to_string()))?;
                Ok(outage_from_samples(&samples, sc.link.gamma0).mean)
            };
            // the simulated map moves in steps of 1/trials, so it cannot
            // settle any closer than that
            let solver = SolverConfig { tol: sc.solver.tol.max(1.0 / trials as f64), ..sc.solver };
            iterate_fixed_point(sc.traffic, unavailability, &solver)?
        }
    })
}

pub fn channel_point(sc: &Scenario, network: Network) -> Result<ChannelPoint> {
    let solution = solve(sc, network)?;
    Ok(ChannelPoint {
        blocking: blocking_probability(&solution.dist),
        sojourn: mean_sojourn_time(&solution.dist, sc.traffic.arrival_rate)?,
        solution,
    })
}

pub fn efficiency_point(sc: &Scenario, rule: CapacityRule, network: Network) -> Result<EfficiencyPoint> {
    let channel = channel_point(sc, network)?;
    let p = channel.solution.p_busy;
    let capacity = match (network, rule) {
        (Network::Pvt, CapacityRule::Weighted) => {
            weighted_capacity(p, &sc.link, sc.model, &sc.solver, &sc.quadrature)?
        }
        (Network::Pvt, CapacityRule::Fixed(delta)) => {
            fixed_capacity(delta, &sc.link, sc.model, sc.solver.outage_cache_resolution, &sc.quadrature)?
        }
        (Network::GridMc { rings, trials, seed }, _) => {
            let samples = grid_sinr_samples(&sc.link, sc.model, &grid_config(sc, trials, seed, p), rings)?;
            Capacity { value: capacity_from_samples(&samples).mean, truncation: f64::INFINITY, tail_success: 0.0 }
        }
    };
    let report = efficiency_report(&channel.solution, capacity.value, sc.link.bs_density, &sc.economics)?;
    Ok(EfficiencyPoint { channel, capacity, report })
}

const PARAM_COLUMNS: [&str; 6] = ["network", "channels", "path_loss", "arrival_rate", "bs_density", "gamma0_db"];

fn param_cells(sc: &Scenario, network: Network) -> Vec<String> {
    vec![
        network.label().to_string(),
        sc.traffic.channels.to_string(),
        fmt(sc.link.path_loss_exponent),
        fmt(sc.traffic.arrival_rate),
        fmt(sc.link.bs_density),
        fmt(linear_to_db(sc.link.gamma0)),
    ]
}

fn describe(table: &mut Table, base: &Scenario) {
    table
        .meta("holding_rate_per_min", fmt(base.traffic.holding_rate))
        .meta("k_prime_w", fmt(base.link.k_prime))
        .meta("noise_w", fmt(base.link.noise_power))
        .meta("fading", base.model.name())
        .meta("interferer_pool", format!("{:?}", base.solver.pool).to_lowercase())
        .meta("pool_size", base.solver.n_max)
        .meta("solver_tol", fmt(base.solver.tol))
        .meta("damping", fmt(base.solver.damping));
}

/// Coupled solves over `points`, one row each. A failed point is reported in
/// the `status` column and the sweep carries on.
pub fn channel_table(base: &Scenario, points: &[(Scenario, Network)]) -> Result<Table> {
    let mut columns: Vec<&str> = PARAM_COLUMNS.to_vec();
    columns.extend(["blocking", "sojourn_min", "epsilon", "p_busy", "iterations", "converged", "status"]);
    let mut table = Table::new(columns);
    describe(&mut table, base);
    let results: Vec<_> = points.par_iter().map(|(sc, net)| channel_point(sc, *net)).collect();
    for ((sc, net), res) in points.iter().zip(results) {
        let mut row = param_cells(sc, *net);
        match res {
            Ok(p) => row.extend([
                fmt(p.blocking),
                fmt(p.sojourn),
                fmt(p.solution.epsilon),
                fmt(p.solution.p_busy),
                p.solution.iterations.to_string(),
                p.solution.converged.to_string(),
                "ok".into(),
            ]),
            Err(e) => {
                row.extend(std::iter::repeat("NaN".to_string()).take(4));
                row.extend(["0".into(), "false".into(), e.to_string()]);
            }
        }
        table.push(row)?;
    }
    Ok(table)
}

pub fn efficiency_table(base: &Scenario, rule: CapacityRule, points: &[(Scenario, Network)]) -> Result<Table> {
    let mut columns: Vec<&str> = PARAM_COLUMNS.to_vec();
    columns.extend([
        "capacity_rule",
        "blocking",
        "epsilon",
        "p_busy",
        "mean_occupancy",
        "capacity_bps_hz",
        "capacity_truncation",
        "throughput_bps",
        "sse_bps_km2",
        "ee_bit_per_j",
        "iterations",
        "converged",
        "status",
    ]);
    let mut table = Table::new(columns);
    describe(&mut table, base);
    table.meta("capacity_rule", rule.label());
    let results: Vec<_> = points.par_iter().map(|(sc, net)| efficiency_point(sc, rule, *net)).collect();
    for ((sc, net), res) in points.iter().zip(results) {
        let mut row = param_cells(sc, *net);
        row.push(rule.label());
        match res {
            Ok(p) => row.extend([
                fmt(p.report.blocking),
                fmt(p.channel.solution.epsilon),
                fmt(p.channel.solution.p_busy),
                fmt(p.report.mean_occupancy),
                fmt(p.capacity.value),
                fmt(p.capacity.truncation),
                fmt(p.report.throughput),
                fmt(p.report.sse),
                fmt(p.report.ee),
                p.channel.solution.iterations.to_string(),
                p.channel.solution.converged.to_string(),
                "ok".into(),
            ]),
            Err(e) => {
                row.extend(std::iter::repeat("NaN".to_string()).take(9));
                row.extend(["0".into(), "false".into(), e.to_string()]);
            }
        }
        table.push(row)?;
    }
    Ok(table)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Thresholds used for the blocking and sojourn figures (dB).
pub fn threshold_sweep_db() -> Vec<f64> {
    linspace(-10.0, 20.0, 11)
}

/// Options shared by the figure recipes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FigureOptions {
    pub base: Scenario,
    pub rule: CapacityRule,
    /// Grid network evaluated alongside the analytical one, if any.
    pub grid: Option<Network>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { base: Scenario::default(), rule: CapacityRule::Weighted, grid: Some(Network::grid_default()) }
    }
}

fn networks(opts: &FigureOptions) -> Vec<Network> {
    let mut v = vec![Network::Pvt];
    v.extend(opts.grid);
    v
}

/// Sweep points of a figure, in output order.
pub fn figure_points(id: u32, opts: &FigureOptions) -> Result<Vec<(Scenario, Network)>> {
    let base = opts.base;
    let mut points = Vec::new();
    match id {
        3 | 4 | 5 => {
            for series in 0..3 {
                for &g in &threshold_sweep_db() {
                    let sc = match id {
                        3 => base.channels([10, 15, 20][series]),
                        4 => base.path_loss([3.5, 4.0, 4.5][series]),
                        _ => base.arrival_rate([1.0, 2.0, 4.0][series]),
                    };
                    points.push((sc.gamma0_db(g), Network::Pvt));
                }
            }
        }
        6 | 10 => {
            for net in networks(opts) {
                for density in [0.2, 0.5] {
                    for b in linspace(3.0, 6.0, 10) {
                        points.push((base.bs_density(density).path_loss(b), net));
                    }
                }
            }
        }
        7 => {
            for net in networks(opts) {
                for lambda in [2.0, 3.0, 4.0] {
                    for b in linspace(3.0, 6.0, 10) {
                        points.push((base.arrival_rate(lambda).path_loss(b), net));
                    }
                }
            }
        }
        8 | 9 => {
            for net in networks(opts) {
                for g in [5.0, 10.0, 15.0] {
                    for lambda in linspace(0.2, 5.0, 25) {
                        points.push((base.gamma0_db(g).arrival_rate(lambda), net));
                    }
                }
            }
        }
        _ => return Err(ExperimentError::Invalid(format!("no figure {id}; figures 3 to 10 are available"))),
    }
    Ok(points)
}

/// Table for figure `id` (3 to 10).
pub fn figure(id: u32, opts: &FigureOptions) -> Result<Table> {
    let points = figure_points(id, opts)?;
    let mut table = if id <= 5 {
        channel_table(&opts.base, &points)?
    } else {
        efficiency_table(&opts.base, opts.rule, &points)?
    };
    table.metadata.insert(0, ("figure".into(), id.to_string()));
    Ok(table)
}

/// Rows of `table` whose `key` column equals `value`, as `(x, y)` pairs.
pub fn series(table: &Table, key: &[(&str, &str)], x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
    let keys = key
        .iter()
        .map(|(k, v)| {
            table
                .column(k)
                .map(|i| (i, *v))
                .ok_or_else(|| ExperimentError::Invalid(format!("no column {k}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let xi = table.column(x).ok_or_else(|| ExperimentError::Invalid(format!("no column {x}")))?;
    let yi = table.column(y).ok_or_else(|| ExperimentError::Invalid(format!("no column {y}")))?;
    let parse = |s: &str| s.parse::<f64>().map_err(|e| ExperimentError::Invalid(format!("{s}: {e}")));
    let mut out = Vec::new();
    for row in &table.rows {
        if keys.iter().all(|(i, v)| cell_matches(&row[*i], v)) {
            out.push((parse(&row[xi])?, parse(&row[yi])?));
        }
    }
    Ok(out)
}

fn cell_matches(cell: &str, want: &str) -> bool {
    match (cell.parse::<f64>(), want.parse::<f64>()) {
        (Ok(a), Ok(b)) => (a - b).abs() <= 1e-9 * b.abs().max(1.0),
        _ => cell == want,
    }
}

/// Outcome of a monotonicity check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrendCheck {
    pub pass: bool,
    /// Adjacent pairs moving against the trend.
    pub violations: usize,
    /// Largest move against the trend, relative to the largest magnitude in
    /// the series.
    pub worst: f64,
}

/// `values` should move in direction `sign` (+1 up, −1 down). One adjacent
/// pair may go the other way by at most `tol` times the series magnitude.
pub fn check_monotone(values: &[f64], sign: f64, tol: f64) -> TrendCheck {
    // violations are measured against the size of the whole curve
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for w in values.windows(2) {
        let step = sign * (w[1] - w[0]);
        if step < 0.0 {
            violations += 1;
            worst = worst.max(-step / scale);
        }
    }
    let pass = values.iter().all(|v| v.is_finite()) && (violations == 0 || (violations == 1 && worst <= tol));
    TrendCheck { pass, violations, worst }
}

/// `upper` should lie on or above `lower` point by point. One point may
/// cross by at most `tol` times the larger curve's magnitude.
pub fn check_ordered(upper: &[f64], lower: &[f64], tol: f64) -> TrendCheck {
    let scale = upper.iter().chain(lower).fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for (u, l) in upper.iter().zip(lower) {
        if u < l {
            violations += 1;
            worst = worst.max((l - u) / scale);
        }
    }
    let finite = upper.iter().chain(lower).all(|v| v.is_finite());
    let pass = finite && upper.len() == lower.len() && (violations == 0 || (violations == 1 && worst <= tol));
    TrendCheck { pass, violations, worst }
}

/// Number of sign changes in the first differences, ignoring flat steps.
pub fn direction_changes(values: &[f64]) -> usize {
    let signs: Vec<f64> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d != 0.0)
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|s| s[0] != s[1]).count()
}

/// A single interior maximum: differences go from positive to negative
/// exactly once.
pub fn is_unimodal(values: &[f64]) -> bool {
    let first_up = values.windows(2).find(|w| w[1] != w[0]).map_or(false, |w| w[1] > w[0]);
    values.iter().all(|v| v.is_finite()) && direction_changes(values) == 1 && first_up
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((linear_to_db(db_to_linear(-7.5)) + 7.5).abs() < 1e-12);
        let sc = Scenario::default();
        assert!((sc.link.k_prime - 10f64.powf(3.154)).abs() < 1e-9);
    }

    #[test]
    fn trend_helpers() {
        assert!(check_monotone(&[1.0, 2.0, 3.0], 1.0, 1e-3).pass);
        assert!(check_monotone(&[1.0, 2.0, 1.9999, 3.0], 1.0, 1e-3).pass);
        assert!(!check_monotone(&[1.0, 2.0, 1.5, 3.0], 1.0, 1e-3).pass);
        assert!(!check_monotone(&[1.0, 0.9999, 2.0, 1.9999], 1.0, 1e-3).pass);
        assert!(check_monotone(&[3.0, 2.0, 1.0], -1.0, 0.0).pass);
        assert!(check_ordered(&[2.0, 3.0, 1.0], &[1.0, 2.0, 1.0005], 1e-3).pass);
        assert!(!check_ordered(&[2.0, 3.0, 1.0], &[1.0, 3.1, 1.0005], 1e-3).pass);
        assert!(!check_ordered(&[2.0, 3.0], &[1.0, 2.0, 0.0], 1e-3).pass);
        assert!(is_unimodal(&[1.0, 2.0, 3.0, 2.5, 1.0]));
        assert!(!is_unimodal(&[1.0, 2.0, 3.0]));
        assert!(!is_unimodal(&[3.0, 2.0, 3.0]));
        assert!(!is_unimodal(&[1.0, 2.0, 1.0, 2.0, 1.0]));
    }

    #[test]
    fn figure_recipes_have_expected_sizes() {
        let opts = FigureOptions::default();
        assert_eq!(figure_points(3, &opts).unwrap().len(), 33);
        assert_eq!(figure_points(6, &opts).unwrap().len(), 40);
        assert_eq!(figure_points(8, &opts).unwrap().len(), 150);
        assert!(figure_points(2, &opts).is_err());
        let no_grid = FigureOptions { grid: None, ..opts };
        assert_eq!(figure_points(7, &no_grid).unwrap().len(), 30);
    }

    #[test]
    fn failed_point_keeps_the_sweep_going() {
        let base = Scenario::default();
        let bad = base.path_loss(2.0);
        let t = channel_table(&base, &[(bad, Network::Pvt), (base.gamma0_db(-5.0), Network::Pvt)]).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_ne!(t.rows[0].last().unwrap(), "ok");
        assert_eq!(t.rows[1].last().unwrap(), "ok");
    }

    #[test]
    fn series_selects_rows() {
        let mut t = Table::new(["k", "x", "y"]);
        t.push(vec!["a".into(), "1e0".into(), "2e0".into()]).unwrap();
        t.push(vec!["b".into(), "2e0".into(), "3e0".into()]).unwrap();
        assert_eq!(series(&t, &[("k", "b")], "x", "y").unwrap(), vec![(2.0, 3.0)]);
    }
}
