//! Monte Carlo estimators used as independent checks of the analytical
//! model: the conditional disk model, full Poisson network realisations with
//! nearest-BS association, a hexagonal grid, and the channel chain itself.
//!
//! Trials run in fixed-size batches. Batch `k` draws from ChaCha8 stream `k`
//! of the configured seed, so results do not depend on how batches are
//! scheduled across threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interference::{FadingModel, InterferenceError, LinkParams};
use crate::markov::ChainParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("invalid Monte Carlo configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Interference(#[from] InterferenceError),
}

pub type Result<T> = std::result::Result<T, MonteCarloError>;

/// Trials per RNG stream.
pub const BATCH: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub trials: u64,
    pub seed: u64,
    /// Radius of the interferer disk in the conditional model (km).
    pub disk_radius: f64,
    /// Half-width of the square simulation window (km).
    pub window: f64,
    /// A realisation whose serving BS lies farther than `window − guard` from
    /// the user is redrawn (km).
    pub guard: f64,
    /// Probability that an interfering BS transmits on the channel.
    pub activity: f64,
}

impl MCConfig {
    /// Defaults scaled to the mean BS spacing `1/√λ_B`.
    pub fn for_density(bs_density: f64) -> Self {
        let spacing = 1.0 / bs_density.sqrt();
        Self {
            trials: 100_000,
            seed: 0,
            disk_radius: 50.0 * spacing,
            window: 20.0 * spacing,
            guard: 2.0 * spacing,
            activity: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MonteCarloError::InvalidConfig(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !(self.disk_radius > 0.0) {
            return bad(format!("disk radius must be positive, got {}", self.disk_radius));
        }
        if !(self.guard > 0.0 && self.window > 2.0 * self.guard) {
            return bad(format!("need window > 2·guard > 0, got window {} guard {}", self.window, self.guard));
        }
        if !(0.0..=1.0).contains(&self.activity) {
            return bad(format!("activity must lie in [0, 1], got {}", self.activity));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√trials`.
    pub std_error: f64,
    pub trials: u64,
    /// Realisations redrawn because they were degenerate.
    pub resampled: u64,
}

impl MCEstimate {
    /// Estimate of a probability from `hits` successes in `trials` draws.
    pub fn from_count(hits: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = hits as f64 / n;
        let var = if trials > 1 { p * (1.0 - p) * n / (n - 1.0) } else { 0.0 };
        Self { mean: p, std_error: (var / n).sqrt(), trials, resampled: 0 }
    }

    /// Estimate from independent replicate values.
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = pairwise_sum(values) / n;
        let var = if values.len() > 1 {
            let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
            pairwise_sum(&dev) / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, std_error: (var / n).sqrt(), trials: values.len() as u64, resampled: 0 }
    }

    /// Distance from `value` in standard errors.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if self.std_error > 0.0 {
            d / self.std_error
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Sum whose rounding depends only on the order of `values`.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs `trial` `trials` times and returns the results in trial order.
fn run_trials<T, F>(trials: u64, seed: u64, trial: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let batches = trials.div_ceil(BATCH);
    let chunks: Vec<Vec<T>> = (0..batches)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, k);
            let len = BATCH.min(trials - k * BATCH);
            (0..len).map(|_| trial(&mut rng)).collect()
        })
        .collect();
    chunks.into_iter().flatten().collect()
}

/// Distance from a typical user to its nearest BS, by inverting
/// `P(r > x) = e^{−πλ_B x²}`.
pub fn sample_nearest_distance<R: Rng + ?Sized>(bs_density: f64, rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.gen::<f64>();
    (-u.ln() / (PI * bs_density)).sqrt()
}

/// Unit-mean power gain of one link.
pub fn sample_fading<R: Rng + ?Sized>(model: FadingModel, rng: &mut R) -> f64 {
    let gamma = |m: f64, rng: &mut R| Gamma::new(m, 1.0 / m).expect("validated shape").sample(rng);
    let shadow = |sigma: f64, rng: &mut R| {
        let g: f64 = StandardNormal.sample(rng);
        (2.0 * sigma * g).exp()
    };
    match model {
        FadingModel::None => 1.0,
        FadingModel::Rayleigh => Exp1.sample(rng),
        FadingModel::Nakagami { m } => gamma(m, rng),
        FadingModel::LogNormal { sigma } => shadow(sigma, rng),
        FadingModel::NakagamiLogNormal { m, sigma } => gamma(m, rng) * shadow(sigma, rng),
    }
}

/// Received power `K′ h d^{−b}` from the squared distance.
fn received(link: &LinkParams, gain: f64, dist2: f64) -> f64 {
    let b = link.path_loss_exponent;
    let path = if b == 4.0 { 1.0 / (dist2 * dist2) } else { dist2.powf(-0.5 * b) };
    link.k_prime * gain * path
}

fn sinr(link: &LinkParams, signal: f64, interference: f64) -> f64 {
    signal / (link.noise_power + interference)
}

/// SINR draws of the conditional model: nearest BS at the typical distance,
/// `delta` interferers uniform on the disk of radius `cfg.disk_radius`.
pub fn disk_sinr_samples(delta: u32, link: &LinkParams, model: FadingModel, cfg: &MCConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    link.validate()?;
    model.validate()?;
    let a2 = cfg.disk_radius * cfg.disk_radius;
    Ok(run_trials(cfg.trials, cfg.seed, |rng| {
        let r = sample_nearest_distance(link.bs_density, rng);
        let signal = received(link, sample_fading(model, rng), r * r);
        let mut interference = 0.0;
        for _ in 0..delta {
            // radius a√U has density 2r/a² on the disk
            let d2 = a2 * (1.0 - rng.gen::<f64>());
            interference += received(link, sample_fading(model, rng), d2);
        }
        sinr(link, signal, interference)
    }))
}

/// Fraction of draws below `gamma0`.
pub fn outage_from_samples(samples: &[f64], gamma0: f64) -> MCEstimate {
    let hits = samples.iter().filter(|&&s| s < gamma0).count() as u64;
    MCEstimate::from_count(hits, samples.len() as u64)
}

/// `E[log₂(1 + SINR)]` with its standard error.
pub fn capacity_from_samples(samples: &[f64]) -> MCEstimate {
    let rates: Vec<f64> = samples.iter().map(|s| s.ln_1p() / std::f64::consts::LN_2).collect();
    MCEstimate::from_samples(&rates)
}

pub fn mc_outage_disk(
    gamma0: f64,
    delta: u32,
    link: &LinkParams,
    model: FadingModel,
    cfg: &MCConfig,
) -> Result<MCEstimate> {
    Ok(outage_from_samples(&disk_sinr_samples(delta, link, model, cfg)?, gamma0))
}

/// Points of a Poisson process of intensity `density` on the square
/// `[−half_width, half_width]²`.
pub fn sample_ppp_window<R: Rng + ?Sized>(density: f64, half_width: f64, rng: &mut R) -> Vec<(f64, f64)> {
    let mean = density * 4.0 * half_width * half_width;
    let count = if mean > 0.0 { Poisson::new(mean).expect("positive mean").sample(rng) as usize } else { 0 };
    (0..count)
        .map(|_| {
            let x = (2.0 * rng.gen::<f64>() - 1.0) * half_width;
            let y = (2.0 * rng.gen::<f64>() - 1.0) * half_width;
            (x, y)
        })
        .collect()
}

/// SINR of the user at the origin served by its nearest BS, with every other
/// BS interfering (each with probability `cfg.activity`). One realisation on
/// the largest of `windows` gives one SINR per nested square window. The
/// second value counts redrawn realisations.
fn pvt_trial(
    link: &LinkParams,
    model: FadingModel,
    cfg: &MCConfig,
    windows: &[f64],
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, u64) {
    let smallest = windows.iter().copied().fold(f64::INFINITY, f64::min);
    let largest = windows.iter().copied().fold(0.0, f64::max);
    let reach2 = (smallest - cfg.guard).powi(2);
    let mut redrawn = 0;
    loop {
        let points = sample_ppp_window(link.bs_density, largest, rng);
        let nearest = points
            .iter()
            .enumerate()
            .map(|(i, (x, y))| (i, x * x + y * y))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((serving, d2)) = nearest else {
            redrawn += 1;
            continue;
        };
        if d2 > reach2 {
            redrawn += 1;
            continue;
        }
        let signal = received(link, sample_fading(model, rng), d2);
        let mut interference = vec![0.0; windows.len()];
        for (i, (x, y)) in points.iter().enumerate() {
            if i == serving || (cfg.activity < 1.0 && rng.gen::<f64>() >= cfg.activity) {
                continue;
            }
            let power = received(link, sample_fading(model, rng), x * x + y * y);
            let extent = x.abs().max(y.abs());
            for (acc, w) in interference.iter_mut().zip(windows) {
                if extent <= *w {
                    *acc += power;
                }
            }
        }
        return (interference.into_iter().map(|i| sinr(link, signal, i)).collect(), redrawn);
    }
}

pub fn pvt_sinr_samples(link: &LinkParams, model: FadingModel, cfg: &MCConfig) -> Result<(Vec<f64>, u64)> {
    cfg.validate()?;
    link.validate()?;
    model.validate()?;
    let draws = run_trials(cfg.trials, cfg.seed, |rng| pvt_trial(link, model, cfg, &[cfg.window], rng));
    let redrawn = draws.iter().map(|d| d.1).sum();
    Ok((draws.into_iter().map(|d| d.0[0]).collect(), redrawn))
}

/// Unconditioned outage of a typical user in a Poisson network.
pub fn mc_outage_pvt(gamma0: f64, link: &LinkParams, model: FadingModel, cfg: &MCConfig) -> Result<MCEstimate> {
    let (samples, redrawn) = pvt_sinr_samples(link, model, cfg)?;
    let mut est = outage_from_samples(&samples, gamma0);
    est.resampled = redrawn;
    Ok(est)
}

/// [`mc_outage_pvt`] for several window half-widths from the same
/// realisations: each network is drawn on the largest window and cropped.
pub fn mc_outage_pvt_windows(
    gamma0: f64,
    link: &LinkParams,
    model: FadingModel,
    cfg: &MCConfig,
    windows: &[f64],
) -> Result<Vec<MCEstimate>> {
    cfg.validate()?;
    link.validate()?;
    model.validate()?;
    for &w in windows {
        MCConfig { window: w, ..*cfg }.validate()?;
    }
    let draws = run_trials(cfg.trials, cfg.seed, |rng| pvt_trial(link, model, cfg, windows, rng));
    let redrawn = draws.iter().map(|d| d.1).sum();
    Ok((0..windows.len())
        .map(|k| {
            let hits = draws.iter().filter(|d| d.0[k] < gamma0).count() as u64;
            MCEstimate { resampled: redrawn, ..MCEstimate::from_count(hits, cfg.trials) }
        })
        .collect())
}

/// Spacing of a hexagonal lattice with `bs_density` sites per unit area.
pub fn hex_spacing(bs_density: f64) -> f64 {
    (2.0 / (3f64.sqrt() * bs_density)).sqrt()
}

/// Lattice sites within `rings` hexagonal rings of the origin, origin
/// excluded. Ring `k` holds `6k` sites.
pub fn hex_lattice(rings: u32, bs_density: f64) -> Vec<(f64, f64)> {
    let d = hex_spacing(bs_density);
    let r = rings as i64;
    let mut sites = Vec::new();
    for i in -r..=r {
        for j in -r..=r {
            // axial coordinates; hex distance is max(|i|, |j|, |i + j|)
            let ring = i.abs().max(j.abs()).max((i + j).abs());
            if ring == 0 || ring > r {
                continue;
            }
            sites.push((d * (i as f64 + 0.5 * j as f64), d * 3f64.sqrt() / 2.0 * j as f64));
        }
    }
    sites
}

/// Uniform point in the Voronoi cell of the origin of a lattice with
/// spacing `d` (a hexagon with inradius `d/2`).
fn sample_hex_cell<R: Rng + ?Sized>(d: f64, rng: &mut R) -> (f64, f64) {
    let half = d / 2.0;
    let outer = d / 3f64.sqrt();
    loop {
        let x = (2.0 * rng.gen::<f64>() - 1.0) * half;
        let y = (2.0 * rng.gen::<f64>() - 1.0) * outer;
        let inside = [0.0f64, PI / 3.0, 2.0 * PI / 3.0]
            .iter()
            .all(|t| (x * t.cos() + y * t.sin()).abs() <= half);
        if inside {
            return (x, y);
        }
    }
}

/// SINR at `user` served by the origin with the given interferer sites,
/// each transmitting with probability `activity`.
pub fn grid_sinr_at<R: Rng + ?Sized>(
    user: (f64, f64),
    sites: &[(f64, f64)],
    link: &LinkParams,
    model: FadingModel,
    activity: f64,
    rng: &mut R,
) -> f64 {
    let d2 = |(x, y): (f64, f64)| (x - user.0).powi(2) + (y - user.1).powi(2);
    let signal = received(link, sample_fading(model, rng), d2((0.0, 0.0)));
    let mut interference = 0.0;
    for &s in sites {
        if activity < 1.0 && rng.gen::<f64>() >= activity {
            continue;
        }
        interference += received(link, sample_fading(model, rng), d2(s));
    }
    sinr(link, signal, interference)
}

pub fn grid_sinr_samples(link: &LinkParams, model: FadingModel, cfg: &MCConfig, rings: u32) -> Result<Vec<f64>> {
    cfg.validate()?;
    link.validate()?;
    model.validate()?;
    if rings == 0 {
        return Err(MonteCarloError::InvalidConfig("grid needs at least one ring".into()));
    }
    let sites = hex_lattice(rings, link.bs_density);
    let d = hex_spacing(link.bs_density);
    Ok(run_trials(cfg.trials, cfg.seed, |rng| {
        let user = sample_hex_cell(d, rng);
        grid_sinr_at(user, &sites, link, model, cfg.activity, rng)
    }))
}

/// Outage of a user uniform in the central cell of a hexagonal network.
pub fn mc_outage_grid(
    gamma0: f64,
    link: &LinkParams,
    model: FadingModel,
    cfg: &MCConfig,
    rings: u32,
) -> Result<MCEstimate> {
    Ok(outage_from_samples(&grid_sinr_samples(link, model, cfg, rings)?, gamma0))
}

/// Number of time batches used for the blocking standard error.
pub const CHAIN_BATCHES: usize = 32;

/// Event-driven simulation of the channel chain. Returns the fraction of
/// arrivals that find every available channel occupied, after discarding the
/// first 10% of `horizon`; the error comes from batch means over
/// [`CHAIN_BATCHES`] equal time slices.
pub fn mc_chain_blocking(chain: &ChainParams, horizon: f64, cfg: &MCConfig) -> Result<MCEstimate> {
    chain.validate().map_err(|e| MonteCarloError::InvalidConfig(e.to_string()))?;
    if !(chain.arrival_rate * horizon >= 1e4) {
        return Err(MonteCarloError::InvalidConfig(format!(
            "horizon {horizon} gives {} expected arrivals; at least 1e4 are needed",
            chain.arrival_rate * horizon
        )));
    }
    let mut rng = stream_rng(cfg.seed, 0);
    let c = chain.channels;
    let warmup = 0.1 * horizon;
    let slice = (horizon - warmup) / CHAIN_BATCHES as f64;
    let mut arrivals = [0u64; CHAIN_BATCHES];
    let mut blocked = [0u64; CHAIN_BATCHES];
    let (mut m, mut n) = (0u32, c);
    let mut t = 0.0;
    loop {
        let arrive = chain.arrival_rate;
        let depart = m as f64 * chain.holding_rate;
        let recover = (c - n) as f64 * chain.recovery_rate;
        let lose = if m < n { n as f64 * chain.loss_rate } else { 0.0 };
        let total = arrive + depart + recover + lose;
        let dt: f64 = Exp1.sample(&mut rng);
        t += dt / total;
        if t >= horizon {
            break;
        }
        let pick = rng.gen::<f64>() * total;
        if pick < arrive {
            if t >= warmup {
                let k = (((t - warmup) / slice) as usize).min(CHAIN_BATCHES - 1);
                arrivals[k] += 1;
                if m == n {
                    blocked[k] += 1;
                }
            }
            if m < n {
                m += 1;
            }
        } else if pick < arrive + depart {
            m -= 1;
        } else if pick < arrive + depart + recover {
            n += 1;
        } else {
            n -= 1;
        }
    }
    let ratios: Vec<f64> = arrivals
        .iter()
        .zip(&blocked)
        .map(|(&a, &b)| if a > 0 { b as f64 / a as f64 } else { 0.0 })
        .collect();
    Ok(MCEstimate::from_samples(&ratios))
}
