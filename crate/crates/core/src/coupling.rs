//! Fixed point between channel occupancy and channel availability.
//!
//! A channel is unavailable with probability `ε`, which depends on how busy
//! the interfering cells are (`p`); `ε` sets the availability ratio
//! `α/β = (1−ε)/ε` of the chain, whose stationary law sets `p` again.

use std::cell::RefCell;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interference::{
    outage_evaluation, unavailable_probability_pooled, unavailable_probability_unbounded, DiskRule, FadingModel,
    InterferenceError, Interferers, LinkParams,
};
use crate::markov::{busy_probability, stationary_distribution, ChainError, ChainParams, StateDistribution};
use crate::numerics::{binomial_pmf, MonotoneCubic, NumericsError, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CouplingError {
    #[error(transparent)]
    Interference(#[from] InterferenceError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("fixed point not reached after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Box<FixedPointSolution>,
    },
}

pub type Result<T> = std::result::Result<T, CouplingError>;

/// Call-level parameters of a cell; the channel rates follow from the solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    pub channels: u32,
    /// Call arrival rate (1/min).
    pub arrival_rate: f64,
    /// Channel holding rate (1/min).
    pub holding_rate: f64,
}

impl TrafficParams {
    pub fn chain(&self, availability_ratio: f64) -> ChainParams {
        ChainParams {
            channels: self.channels,
            arrival_rate: self.arrival_rate,
            holding_rate: self.holding_rate,
            recovery_rate: availability_ratio,
            loss_rate: 1.0,
        }
    }

    pub fn load(&self) -> f64 {
        self.arrival_rate / self.holding_rate
    }
}

/// Size of the set of potentially interfering base stations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolExtent {
    /// Exactly `n_max` candidates on the disk that holds `n_max` BSs.
    Fixed,
    /// The `n_max → ∞` limit: active interferers form a Poisson field at
    /// density `p · λ_B`.
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
    /// Number of potentially interfering base stations `N_I`.
    pub n_max: u32,
    pub pool: PoolExtent,
    /// Threshold grid points per decade in cached outage tables.
    pub outage_cache_resolution: u32,
    /// Record one trace row per iteration.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 500,
            damping: 0.5,
            n_max: 24,
            pool: PoolExtent::Unbounded,
            outage_cache_resolution: 4,
            trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CouplingError::InvalidConfig(m));
        if !(self.tol > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if self.n_max == 0 {
            return bad("n_max must be at least 1".into());
        }
        if self.outage_cache_resolution == 0 {
            return bad("outage_cache_resolution must be at least 1".into());
        }
        Ok(())
    }
}

/// Bounds applied to `ε` so that `α/β` stays finite and positive.
pub const EPSILON_FLOOR: f64 = 1e-12;
pub const EPSILON_CEIL: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub p_busy: f64,
    pub epsilon: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSolution {
    pub epsilon: f64,
    pub p_busy: f64,
    pub alpha_beta_ratio: f64,
    pub dist: StateDistribution,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// `ε` hit one of the clamps at the reported solution.
    pub epsilon_clamped: bool,
    pub trace: Vec<TraceRow>,
}

impl FixedPointSolution {
    /// Iteration trace as CSV text.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,p_busy,epsilon,residual\n");
        for r in &self.trace {
            out.push_str(&format!("{},{:e},{:e},{:e}\n", r.iteration, r.p_busy, r.epsilon, r.residual));
        }
        out
    }
}

/// One sweep of the map, with `ε(p)` supplied by the caller.
pub struct SweepMap<F> {
    traffic: TrafficParams,
    unavailability: F,
}

/// Outcome of one sweep from a given `p`.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub epsilon: f64,
    pub clamped: bool,
    pub alpha_beta_ratio: f64,
    pub dist: StateDistribution,
    pub p_next: f64,
}

impl<F> SweepMap<F>
where
    F: FnMut(f64) -> Result<f64>,
{
    pub fn new(traffic: TrafficParams, unavailability: F) -> Self {
        Self { traffic, unavailability }
    }

    pub fn sweep(&mut self, p: f64) -> Result<Sweep> {
        let raw = (self.unavailability)(p)?;
        let epsilon = raw.clamp(EPSILON_FLOOR, EPSILON_CEIL);
        let clamped = epsilon != raw;
        let ratio = (1.0 - epsilon) / epsilon;
        let dist = stationary_distribution(&self.traffic.chain(ratio))?;
        let p_next = busy_probability(&dist);
        Ok(Sweep { epsilon, clamped, alpha_beta_ratio: ratio, dist, p_next })
    }
}

/// Unavailability `ε(p)` for the configured pool, memoised on `p`.
pub fn unavailability_fn<'a>(
    link: &'a LinkParams,
    model: FadingModel,
    cfg: &'a SolverConfig,
    spec: &'a QuadratureSpec,
) -> impl FnMut(f64) -> Result<f64> + 'a {
    let cache = RefCell::new(HashMap::<u64, f64>::new());
    move |p: f64| {
        if let Some(v) = cache.borrow().get(&p.to_bits()) {
            return Ok(*v);
        }
        let v = match cfg.pool {
            PoolExtent::Unbounded => unavailable_probability_unbounded(p, link, model, spec)?,
            PoolExtent::Fixed => unavailable_probability_pooled(p, link, model, spec, cfg.n_max)?,
        };
        cache.borrow_mut().insert(p.to_bits(), v);
        Ok(v)
    }
}

/// Damped Picard iteration `p ← (1−d) p + d · p_next(p)` for an arbitrary
/// unavailability map.
pub fn iterate_fixed_point<F>(traffic: TrafficParams, unavailability: F, cfg: &SolverConfig) -> Result<FixedPointSolution>
where
    F: FnMut(f64) -> Result<f64>,
{
    cfg.validate()?;
    let mut map = SweepMap::new(traffic, unavailability);
    let mut p = (traffic.load() / traffic.channels as f64).clamp(0.01, 0.99);
    let mut trace = Vec::new();
    let mut best: Option<(f64, f64, Sweep)> = None;
    for iteration in 1..=cfg.max_iters {
        let sw = map.sweep(p)?;
        let residual = (sw.p_next - p).abs();
        if cfg.trace {
            trace.push(TraceRow { iteration, p_busy: p, epsilon: sw.epsilon, residual });
        }
        if residual < cfg.tol {
            return Ok(FixedPointSolution {
                epsilon: sw.epsilon,
                p_busy: sw.p_next,
                alpha_beta_ratio: sw.alpha_beta_ratio,
                dist: sw.dist,
                iterations: iteration,
                residual,
                converged: true,
                epsilon_clamped: sw.clamped,
                trace,
            });
        }
        let next = (1.0 - cfg.damping) * p + cfg.damping * sw.p_next;
        if best.as_ref().map_or(true, |b| residual < b.1) {
            best = Some((p, residual, sw));
        }
        p = next;
    }
    let (_, residual, sw) = best.expect("at least one iteration ran");
    let best = FixedPointSolution {
        epsilon: sw.epsilon,
        p_busy: sw.p_next,
        alpha_beta_ratio: sw.alpha_beta_ratio,
        dist: sw.dist,
        iterations: cfg.max_iters,
        residual,
        converged: false,
        epsilon_clamped: sw.clamped,
        trace,
    };
    Err(CouplingError::NotConverged { iterations: cfg.max_iters, residual, best: Box::new(best) })
}

/// Solves the coupled system at the link's threshold `γ₀`.
pub fn solve_fixed_point(
    traffic: TrafficParams,
    link: &LinkParams,
    model: FadingModel,
    cfg: &SolverConfig,
    spec: &QuadratureSpec,
) -> Result<FixedPointSolution> {
    cfg.validate()?;
    if traffic.channels == 0 || !(traffic.arrival_rate >= 0.0) || !(traffic.holding_rate > 0.0) {
        return Err(ChainError::InvalidParams(format!("invalid traffic parameters {traffic:?}")).into());
    }
    link.validate()?;
    iterate_fixed_point(traffic, unavailability_fn(link, model, cfg, spec), cfg)
}

// ---------------------------------------------------------------------------
// Outage tables
// ---------------------------------------------------------------------------

/// Log-spaced thresholds from `lo_db` to `hi_db` with `per_decade` points per
/// factor of ten, endpoints included.
pub fn gamma_grid(lo_db: f64, hi_db: f64, per_decade: u32) -> Vec<f64> {
    let steps = (((hi_db - lo_db) / 10.0) * per_decade as f64).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| 10f64.powf((lo_db + (hi_db - lo_db) * i as f64 / steps as f64) / 10.0))
        .collect()
}

/// Outage probabilities on a threshold grid for one interferer configuration,
/// interpolated monotonically in `ln γ`.
#[derive(Debug, Clone)]
pub struct OutageCurve {
    pub interferers: Interferers,
    gammas: Vec<f64>,
    values: Vec<f64>,
    interp: MonotoneCubic,
}

impl OutageCurve {
    pub fn from_values(interferers: Interferers, gammas: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if gammas.is_empty() || gammas.iter().any(|g| !(*g > 0.0)) {
            return Err(CouplingError::InvalidConfig("threshold grid must be non-empty and positive".into()));
        }
        let interp = MonotoneCubic::new(gammas.iter().map(|g| g.ln()).collect(), values.clone())?;
        Ok(Self { interferers, gammas, values, interp })
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Outage at `gamma`, holding the end values outside the grid.
    pub fn outage(&self, gamma: f64) -> f64 {
        if gamma <= 0.0 {
            return 0.0;
        }
        self.interp.eval(gamma.ln())
    }

    pub fn success(&self, gamma: f64) -> f64 {
        1.0 - self.outage(gamma)
    }
}

fn evaluate_cells(
    link: &LinkParams,
    model: FadingModel,
    cells: &[(Interferers, f64)],
    spec: &QuadratureSpec,
) -> Result<Vec<f64>> {
    cells
        .par_iter()
        .map(|&(it, g)| Ok(outage_evaluation(g, it, link, model, spec)?.probability))
        .collect()
}

pub fn outage_curve(
    link: &LinkParams,
    model: FadingModel,
    interferers: Interferers,
    gammas: &[f64],
    spec: &QuadratureSpec,
) -> Result<OutageCurve> {
    if gammas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CouplingError::InvalidConfig("threshold grid must be increasing".into()));
    }
    let cells: Vec<_> = gammas.iter().map(|&g| (interferers, g)).collect();
    let values = evaluate_cells(link, model, &cells, spec)?;
    OutageCurve::from_values(interferers, gammas.to_vec(), values)
}

/// `p_out(γ, Δ)` cached over a set of interferer counts and a threshold grid.
#[derive(Debug, Clone)]
pub struct OutageTable {
    curves: Vec<(u32, OutageCurve)>,
}

impl OutageTable {
    pub fn curve(&self, delta: u32) -> Option<&OutageCurve> {
        self.curves.iter().find(|(d, _)| *d == delta).map(|(_, c)| c)
    }

    pub fn deltas(&self) -> impl Iterator<Item = u32> + '_ {
        self.curves.iter().map(|(d, _)| *d)
    }

    /// Interpolated `p_out(γ, Δ)`; `None` when `Δ` is not tabulated.
    pub fn outage(&self, gamma: f64, delta: u32) -> Option<f64> {
        self.curve(delta).map(|c| c.outage(gamma))
    }

    /// `Σ_{Δ=1}^{N} Bin(N, p; Δ) p_out(γ, Δ)` from the cached curves, which
    /// must cover `Δ = 1..N`.
    pub fn unavailability(&self, gamma: f64, p_busy: f64, n: u32) -> Option<f64> {
        let mut total = 0.0;
        for delta in 1..=n {
            total += binomial_pmf(n as u64, delta as u64, p_busy) * self.outage(gamma, delta)?;
        }
        Some(total)
    }
}

/// Tabulates `p_out(γ, Δ)` for every `Δ` in `deltas` on `gamma_grid`. Cells
/// are evaluated in parallel.
pub fn outage_table(
    link: &LinkParams,
    model: FadingModel,
    deltas: impl IntoIterator<Item = u32>,
    gamma_grid: &[f64],
    spec: &QuadratureSpec,
) -> Result<OutageTable> {
    if gamma_grid.is_empty() || gamma_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CouplingError::InvalidConfig("threshold grid must be non-empty and increasing".into()));
    }
    let deltas: Vec<u32> = deltas.into_iter().collect();
    let cells: Vec<_> = deltas
        .iter()
        .flat_map(|&d| gamma_grid.iter().map(move |&g| (Interferers::Count(d), g)))
        .collect();
    let values = evaluate_cells(link, model, &cells, spec)?;
    let curves = deltas
        .iter()
        .zip(values.chunks(gamma_grid.len()))
        .map(|(&d, v)| Ok((d, OutageCurve::from_values(Interferers::Count(d), gamma_grid.to_vec(), v.to_vec())?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(OutageTable { curves })
}

/// Solves the coupled system with a finite pool through the cached per-`Δ`
/// table route; `table` must hold `Δ = 1..n_max` on the pool disk.
pub fn solve_with_table(
    traffic: TrafficParams,
    link: &LinkParams,
    table: &OutageTable,
    cfg: &SolverConfig,
) -> Result<FixedPointSolution> {
    let n = cfg.n_max;
    let gamma = link.gamma0;
    iterate_fixed_point(
        traffic,
        move |p| {
            table
                .unavailability(gamma, p, n)
                .ok_or_else(|| CouplingError::InvalidConfig(format!("outage table does not cover Δ = 1..{n}")))
        },
        cfg,
    )
}

/// Link parameters whose disk is the one holding the whole pool.
pub fn pooled_link(link: &LinkParams, n_max: u32) -> LinkParams {
    LinkParams { disk: DiskRule::Pool { size: n_max }, ..*link }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::blocking_probability;
    use crate::numerics::erlang_b;

    fn link() -> LinkParams {
        LinkParams {
            bs_density: 0.2,
            path_loss_exponent: 4.0,
            k_prime: 10f64.powf(3.154),
            noise_power: 1e-3,
            gamma0: 10.0,
            disk: DiskRule::DensityMatched,
        }
    }

    fn traffic() -> TrafficParams {
        TrafficParams { channels: 20, arrival_rate: 1.0, holding_rate: 0.25 }
    }

    #[test]
    fn no_unavailability_reduces_to_loss_system() {
        let cfg = SolverConfig::default();
        let sol = iterate_fixed_point(traffic(), |_| Ok(0.0), &cfg).unwrap();
        assert!(sol.epsilon_clamped);
        assert_eq!(sol.epsilon, EPSILON_FLOOR);
        let pb = blocking_probability(&sol.dist);
        assert!((pb - erlang_b(20, 4.0).unwrap()).abs() < 1e-9);
        assert!((sol.alpha_beta_ratio - (1.0 - sol.epsilon) / sol.epsilon).abs() <= 1e-12 * sol.alpha_beta_ratio);
    }

    #[test]
    fn vanishing_traffic_gives_idle_channels() {
        // a finite pool keeps nearly all binomial mass on the idle outcome
        let t = TrafficParams { arrival_rate: 1e-9, ..traffic() };
        let cfg = SolverConfig { pool: PoolExtent::Fixed, ..Default::default() };
        let sol = solve_fixed_point(t, &link(), FadingModel::Rayleigh, &cfg, &QuadratureSpec::default()).unwrap();
        assert!(sol.p_busy < 1e-9);
        assert!(sol.epsilon < 1e-6);
    }

    #[test]
    fn matches_scalar_bisection() {
        let l = link();
        let spec = QuadratureSpec::default();
        let cfg = SolverConfig::default();
        let sol = solve_fixed_point(traffic(), &l, FadingModel::Rayleigh, &cfg, &spec).unwrap();
        assert!(sol.converged);

        // the sweep is a scalar map of p; bracket its fixed point directly
        let mut map = SweepMap::new(traffic(), unavailability_fn(&l, FadingModel::Rayleigh, &cfg, &spec));
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        assert!(map.sweep(lo).unwrap().p_next >= lo);
        assert!(map.sweep(hi).unwrap().p_next <= hi);
        for _ in 0..64 {
            let mid = 0.5 * (lo + hi);
            if map.sweep(mid).unwrap().p_next > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((sol.p_busy - 0.5 * (lo + hi)).abs() < 1e-6);
    }

    #[test]
    fn reported_solution_is_self_consistent() {
        let l = link();
        let spec = QuadratureSpec::default();
        let cfg = SolverConfig { trace: true, ..Default::default() };
        let sol = solve_fixed_point(traffic(), &l, FadingModel::Rayleigh, &cfg, &spec).unwrap();
        let mut map = SweepMap::new(traffic(), unavailability_fn(&l, FadingModel::Rayleigh, &cfg, &spec));
        let again = map.sweep(sol.p_busy).unwrap();
        assert!((again.p_next - sol.p_busy).abs() < cfg.tol);
        assert_eq!(sol.trace.len(), sol.iterations);
        assert!(sol.trace_csv().lines().count() == sol.iterations + 1);
    }

    #[test]
    fn non_convergence_returns_best_iterate() {
        let cfg = SolverConfig { max_iters: 2, tol: 1e-15, ..Default::default() };
        match iterate_fixed_point(traffic(), |p| Ok(0.5 * p + 0.1), &cfg) {
            Err(CouplingError::NotConverged { best, iterations, .. }) => {
                assert_eq!(iterations, 2);
                assert!(!best.converged);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn table_hits_grid_exactly_and_interpolates_flat_segments() {
        let l = link();
        let spec = QuadratureSpec::default();
        let grid = gamma_grid(0.0, 20.0, 2);
        let table = outage_table(&l, FadingModel::Rayleigh, 1..=2, &grid, &spec).unwrap();
        for (i, &g) in grid.iter().enumerate() {
            let direct = outage_evaluation(g, Interferers::Count(2), &l, FadingModel::Rayleigh, &spec).unwrap();
            assert_eq!(table.outage(g, 2).unwrap(), direct.probability);
            assert_eq!(table.curve(2).unwrap().values()[i], direct.probability);
        }
        let flat = OutageCurve::from_values(Interferers::Count(1), vec![1.0, 2.0], vec![0.4, 0.4]).unwrap();
        assert_eq!(flat.outage(1.5), 0.4);
        assert!(table.outage(1.0, 7).is_none());
    }

    #[test]
    fn table_route_matches_pool_route() {
        let l = pooled_link(&link(), 12);
        let spec = QuadratureSpec::default();
        let cfg = SolverConfig { n_max: 12, pool: PoolExtent::Fixed, ..Default::default() };
        let table = outage_table(&l, FadingModel::Rayleigh, 1..=12, &[l.gamma0], &spec).unwrap();
        let by_table = solve_with_table(traffic(), &l, &table, &cfg).unwrap();
        let pooled = solve_fixed_point(traffic(), &l, FadingModel::Rayleigh, &cfg, &spec).unwrap();
        assert!((by_table.p_busy - pooled.p_busy).abs() < 1e-7);
    }
}
