//! Throughput, link capacity, spatial spectrum efficiency and lifetime energy
//! efficiency of a cell.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{outage_curve, CouplingError, FixedPointSolution, OutageCurve, PoolExtent, SolverConfig};
use crate::interference::{DiskRule, FadingModel, Interferers, LinkParams};
use crate::markov::blocking_probability;
use crate::numerics::{integrate_adaptive, QuadratureSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EfficiencyError {
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error("invalid economics: {0}")]
    InvalidEconomics(String),
    #[error("energy efficiency undefined: total energy is zero")]
    ZeroEnergy,
}

pub type Result<T> = std::result::Result<T, EfficiencyError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioEconomics {
    /// Channel bandwidth (Hz).
    pub bandwidth: f64,
    /// Initial plus maintenance embodied energy of a BS over its life (J).
    pub embodied_energy: f64,
    /// Transmit power per occupied channel (W).
    pub channel_power: f64,
    /// Slope of BS input power against radiated power.
    pub power_slope: f64,
    /// Load-independent BS power (W).
    pub static_power: f64,
    /// Operating lifetime (s).
    pub lifetime: f64,
}

impl Default for RadioEconomics {
    fn default() -> Self {
        Self {
            bandwidth: 1e5,
            embodied_energy: 85e9,
            channel_power: 1.0,
            power_slope: 7.84,
            static_power: 71.5,
            lifetime: 3.1536e7,
        }
    }
}

impl RadioEconomics {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("bandwidth", self.bandwidth),
            ("embodied_energy", self.embodied_energy),
            ("channel_power", self.channel_power),
            ("power_slope", self.power_slope),
            ("static_power", self.static_power),
            ("lifetime", self.lifetime),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EfficiencyError::InvalidEconomics(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub blocking: f64,
    /// bit/s
    pub throughput: f64,
    /// bit/s/Hz
    pub link_capacity: f64,
    /// bit/s/km²
    pub sse: f64,
    /// bit/J
    pub ee: f64,
    pub mean_occupancy: f64,
}

/// Ergodic capacity `∫ P(SINR > 2^t − 1) dt` with its truncation point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    /// bit/s/Hz
    pub value: f64,
    /// Upper limit `T*` of the integral (bit/s/Hz).
    pub truncation: f64,
    /// Success probability at `T*`: below [`TAIL_SUCCESS`] unless the
    /// threshold grid ran out first.
    pub tail_success: f64,
}

/// The capacity integral stops once the success probability falls below this.
pub const TAIL_SUCCESS: f64 = 1e-6;

/// Highest threshold a capacity curve is extended to (dB).
pub const MAX_THRESHOLD_DB: f64 = 300.0;
const MIN_THRESHOLD_DB: f64 = -40.0;

/// `∫₀^{T*} [1 − p_out(2^t − 1)] dt` over a tabulated curve, with `T*` the
/// first grid threshold whose success probability is below [`TAIL_SUCCESS`]
/// (or the top of the grid).
pub fn link_capacity(curve: &OutageCurve) -> Result<Capacity> {
    let gammas = curve.gammas();
    let cut = gammas
        .iter()
        .position(|&g| curve.success(g) < TAIL_SUCCESS)
        .unwrap_or(gammas.len() - 1);
    let truncation = gammas[cut].ln_1p() / std::f64::consts::LN_2;
    // integrate node to node so the interpolant's knots are never straddled
    let mut knots = vec![0.0];
    knots.extend(gammas[..=cut].iter().map(|g| g.ln_1p() / std::f64::consts::LN_2));
    let spec = QuadratureSpec::default().with_tolerances(1e-10, 1e-9);
    let mut value = 0.0;
    for w in knots.windows(2) {
        let piece = integrate_adaptive(|t: f64| curve.success(t.exp2() - 1.0), w[0], w[1], &spec)
            .map_err(CouplingError::from)?;
        value += piece.value;
    }
    Ok(Capacity { value, truncation, tail_success: curve.success(gammas[cut]) })
}

/// Outage curve on a log grid from −40 dB upward, extended a decade at a time
/// until success drops below [`TAIL_SUCCESS`] or [`MAX_THRESHOLD_DB`] is
/// reached.
pub fn capacity_curve(
    link: &LinkParams,
    model: FadingModel,
    interferers: Interferers,
    per_decade: u32,
    spec: &QuadratureSpec,
) -> Result<OutageCurve> {
    let per_decade = per_decade.max(1);
    let step = 10.0 / per_decade as f64;
    let mut gammas = Vec::new();
    let mut values = Vec::new();
    let mut next_db = MIN_THRESHOLD_DB;
    loop {
        let batch: Vec<f64> = (0..per_decade)
            .map(|i| next_db + step * i as f64)
            .take_while(|db| *db <= MAX_THRESHOLD_DB + 1e-9)
            .map(|db| 10f64.powf(db / 10.0))
            .collect();
        if batch.is_empty() {
            break;
        }
        next_db += step * per_decade as f64;
        let part = outage_curve(link, model, interferers, &batch, spec)?;
        gammas.extend_from_slice(part.gammas());
        values.extend_from_slice(part.values());
        if values.last().map_or(false, |v| 1.0 - v < TAIL_SUCCESS) {
            break;
        }
    }
    Ok(OutageCurve::from_values(interferers, gammas, values)?)
}

/// Capacity with exactly `delta` interferers on the link's disk.
pub fn fixed_capacity(
    delta: u32,
    link: &LinkParams,
    model: FadingModel,
    per_decade: u32,
    spec: &QuadratureSpec,
) -> Result<Capacity> {
    link_capacity(&capacity_curve(link, model, Interferers::Count(delta), per_decade, spec)?)
}

/// Capacity averaged over the binomial number of active interferers,
/// `Σ_Δ Bin(N_I, p; Δ) · cap(Δ)`. By linearity this is the capacity under
/// the interferer mixture, which is what gets tabulated.
pub fn weighted_capacity(
    p_busy: f64,
    link: &LinkParams,
    model: FadingModel,
    cfg: &SolverConfig,
    spec: &QuadratureSpec,
) -> Result<Capacity> {
    let (link, interferers) = match cfg.pool {
        PoolExtent::Unbounded => (*link, Interferers::Field { activity: p_busy }),
        PoolExtent::Fixed => (
            LinkParams { disk: DiskRule::Pool { size: cfg.n_max }, ..*link },
            Interferers::Pool { size: cfg.n_max, activity: p_busy },
        ),
    };
    link_capacity(&capacity_curve(&link, model, interferers, cfg.outage_cache_resolution, spec)?)
}

/// `(1 − p_b) · B · capacity · E[m]`.
pub fn cell_throughput(fp: &FixedPointSolution, capacity: f64, econ: &RadioEconomics) -> f64 {
    let pb = blocking_probability(&fp.dist);
    (1.0 - pb) * econ.bandwidth * capacity * fp.dist.mean_calls()
}

/// Throughput per unit area: `λ_B · T`.
pub fn spatial_spectrum_efficiency(throughput: f64, bs_density: f64) -> f64 {
    bs_density * throughput
}

/// Energy drawn while operating: `(h · P_chl · E[m] + k) · t_lifetime`.
pub fn operation_energy(mean_occupancy: f64, econ: &RadioEconomics) -> f64 {
    (econ.power_slope * econ.channel_power * mean_occupancy + econ.static_power) * econ.lifetime
}

/// Bits delivered over the lifetime per joule spent building, maintaining
/// and operating the BS.
pub fn energy_efficiency(throughput: f64, econ: &RadioEconomics, mean_occupancy: f64) -> Result<f64> {
    let energy = econ.embodied_energy + operation_energy(mean_occupancy, econ);
    if energy == 0.0 {
        return Err(EfficiencyError::ZeroEnergy);
    }
    Ok(econ.lifetime * throughput / energy)
}

pub fn efficiency_report(
    fp: &FixedPointSolution,
    capacity: f64,
    bs_density: f64,
    econ: &RadioEconomics,
) -> Result<EfficiencyReport> {
    econ.validate()?;
    let throughput = cell_throughput(fp, capacity, econ);
    let mean_occupancy = fp.dist.mean_calls();
    Ok(EfficiencyReport {
        blocking: blocking_probability(&fp.dist),
        throughput,
        link_capacity: capacity,
        sse: spatial_spectrum_efficiency(throughput, bs_density),
        ee: energy_efficiency(throughput, econ, mean_occupancy)?,
        mean_occupancy,
    })
}
