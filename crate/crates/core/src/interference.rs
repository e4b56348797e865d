//! Fading, noise and interference transforms, and the conditional outage
//! probability `p_out(γ₀, Δ)` of a typical user with `Δ` co-channel interferers.
//!
//! Distances are in km, densities in 1/km², powers in watts. The received
//! power from a transmitter at distance `r` is `K′ · S · r^{−b}` with `S` the
//! unit-mean fading power.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{
    binomial_pmf, checked_div, complex_power, gamma, integrate_adaptive, integrate_semi_infinite, Complex,
    NumericsError, QuadratureSpec,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InterferenceError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("fading model {0} has no closed-form transform here; use the Monte Carlo estimators")]
    Unsupported(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("outage integral left [0, 1] by {excursion:e} (value {value})")]
    Excursion { value: f64, excursion: f64 },
}

pub type Result<T> = std::result::Result<T, InterferenceError>;

/// Largest tolerated pre-clamp excursion of an outage value outside `[0, 1]`.
pub const MAX_EXCURSION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingModel {
    /// Deterministic unit gain.
    None,
    Rayleigh,
    Nakagami { m: f64 },
    LogNormal { sigma: f64 },
    NakagamiLogNormal { m: f64, sigma: f64 },
}

impl FadingModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FadingModel::Nakagami { m } | FadingModel::NakagamiLogNormal { m, .. } if !(m >= 0.5) => {
                Err(InterferenceError::Domain(format!("Nakagami m must be at least 0.5, got {m}")))
            }
            FadingModel::LogNormal { sigma } | FadingModel::NakagamiLogNormal { sigma, .. } if !(sigma > 0.0) => {
                Err(InterferenceError::Domain(format!("log-normal sigma must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            FadingModel::None => "none".into(),
            FadingModel::Rayleigh => "rayleigh".into(),
            FadingModel::Nakagami { m } => format!("nakagami(m={m})"),
            FadingModel::LogNormal { sigma } => format!("lognormal(sigma={sigma})"),
            FadingModel::NakagamiLogNormal { m, sigma } => format!("nakagami-lognormal(m={m},sigma={sigma})"),
        }
    }

    fn unsupported(&self) -> InterferenceError {
        InterferenceError::Unsupported(self.name())
    }
}

/// Region over which the `Δ` interferers of the conditional model are spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DiskRule {
    /// Radius `√(Δ / (π λ_B))`: the disk holds `Δ` base stations on average.
    DensityMatched,
    /// The disk holding `size` base stations on average, for every `Δ`.
    Pool { size: u32 },
    /// The same radius (km) for every `Δ`.
    Fixed { radius: f64 },
}

/// Radius of the disk holding `count` base stations on average.
pub fn population_radius(count: f64, bs_density: f64) -> f64 {
    (count / (PI * bs_density)).sqrt()
}

impl DiskRule {
    pub fn radius(&self, delta: u32, bs_density: f64) -> f64 {
        match *self {
            DiskRule::DensityMatched => population_radius(delta as f64, bs_density),
            DiskRule::Pool { size } => population_radius(size as f64, bs_density),
            DiskRule::Fixed { radius } => radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Base-station density (1/km²).
    pub bs_density: f64,
    pub path_loss_exponent: f64,
    /// Antenna gain times transmit power (W).
    pub k_prime: f64,
    /// Noise power (W).
    pub noise_power: f64,
    /// SINR threshold (linear).
    pub gamma0: f64,
    pub disk: DiskRule,
}

impl LinkParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(InterferenceError::Domain(msg));
        if !(self.bs_density > 0.0) {
            return fail(format!("BS density must be positive, got {}", self.bs_density));
        }
        if !(self.path_loss_exponent > 2.0) {
            return fail(format!(
                "path-loss exponent must exceed 2 (Γ(−2/b) has a pole at b = 2 and the aggregate \
                 interference is infinite for b <= 2), got {}",
                self.path_loss_exponent
            ));
        }
        if !(self.k_prime > 0.0) {
            return fail(format!("K′ must be positive, got {}", self.k_prime));
        }
        if !(self.noise_power >= 0.0) {
            return fail(format!("noise power must be non-negative, got {}", self.noise_power));
        }
        if !(self.gamma0 > 0.0) {
            return fail(format!("SINR threshold must be positive, got {}", self.gamma0));
        }
        match self.disk {
            DiskRule::Fixed { radius } if !(radius > 0.0) => {
                return fail(format!("disk radius must be positive, got {radius}"));
            }
            DiskRule::Pool { size: 0 } => return fail("interferer pool must be non-empty".into()),
            _ => {}
        }
        Ok(())
    }

    pub fn with_gamma0(mut self, gamma0: f64) -> Self {
        self.gamma0 = gamma0;
        self
    }

    /// Nearest-BS distance whose squared-area coordinate `π λ_B r²` equals `u`.
    pub fn distance_from_area(&self, u: f64) -> f64 {
        (u / (PI * self.bs_density)).sqrt()
    }
}

/// Co-channel interferer configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interferers {
    /// Exactly `Δ` interferers uniform on the disk chosen by [`DiskRule`].
    Count(u32),
    /// `size` base stations uniform on the disk that holds `size` of them on
    /// average, each transmitting independently with probability `activity`,
    /// so `Δ ~ Bin(size, activity)`. Includes the `Δ = 0` outcome.
    Pool { size: u32, activity: f64 },
    /// Poisson field of transmitters at density `activity · λ_B`: the limit of
    /// [`Interferers::Pool`] as the pool grows with the disk.
    Field { activity: f64 },
}

pub fn laplace_noise(s: Complex, noise_power: f64) -> Complex {
    (-s * noise_power).exp()
}

pub fn laplace_fading(s: Complex, model: FadingModel) -> Result<Complex> {
    match model {
        FadingModel::None => Ok((-s).exp()),
        FadingModel::Rayleigh => Ok(checked_div(Complex::new(1.0, 0.0), s + 1.0)?),
        other => Err(other.unsupported()),
    }
}

/// `E[S^{2Δ/b}]`.
pub fn fading_fractional_moment(model: FadingModel, delta: u32, b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(InterferenceError::Domain(format!("exponent b must be positive, got {b}")));
    }
    match model {
        FadingModel::None => Ok(1.0),
        FadingModel::Rayleigh => Ok(gamma(1.0 + 2.0 * delta as f64 / b)?),
        other => Err(other.unsupported()),
    }
}

/// Limit-disk interference expression
/// `((1/b) (s K′)^{2/b} Γ(−2/b))^Δ · E[S^{2Δ/b}]`.
///
/// This is the `a → ∞` limit of the per-interferer disk average with the
/// normalising `1` and the `2/a²` area factor dropped. It is not the Laplace
/// transform of a distribution (it vanishes at `s = 0` for `Δ >= 1` and is
/// negative for odd `Δ` at real `s`); it is exposed for comparison only. The
/// outage evaluation uses [`disk_interference_transform`] and
/// [`poisson_interference_transform`].
pub fn laplace_interference(s: Complex, delta: u32, link: &LinkParams, model: FadingModel) -> Result<Complex> {
    let b = link.path_loss_exponent;
    if !(b > 2.0) {
        return Err(InterferenceError::Domain(format!("path-loss exponent must exceed 2, got {b}")));
    }
    if delta == 0 {
        return Ok(Complex::new(1.0, 0.0));
    }
    if s == Complex::new(0.0, 0.0) {
        return Err(InterferenceError::Domain("interference transform needs s != 0 when Δ > 0".into()));
    }
    let moment = fading_fractional_moment(model, delta, b)?;
    let per = complex_power(s * link.k_prime, 2.0 / b)? * (gamma(-2.0 / b)? / b);
    Ok(per.powu(delta) * moment)
}

/// `∫₀¹ v^q / (v^q + w) dv`: the transform of one Rayleigh-faded interferer
/// placed uniformly on a disk, with `w = s K′ a^{−b}` and `q = b/2`.
pub fn disk_kernel(w: Complex, q: f64) -> Result<Complex> {
    Ok(Complex::new(1.0, 0.0) - disk_kernel_complement(w, q)?)
}

/// `1 − disk_kernel(w, q) = ∫₀¹ w / (v^q + w) dv`, accurate for small `|w|`.
pub fn disk_kernel_complement(w: Complex, q: f64) -> Result<Complex> {
    let one = Complex::new(1.0, 0.0);
    let zero = Complex::new(0.0, 0.0);
    if w == zero {
        return Ok(zero);
    }
    if q == 2.0 {
        let root = w.sqrt();
        return Ok(root * (one / root).atan());
    }
    let norm = w.norm();
    if norm > 1.5 {
        // 1 − Σ_{k≥1} (−1)^{k+1} w^{−k} / (qk + 1)
        let inv = one / w;
        let mut term = -one;
        let mut sum = zero;
        for k in 1..2000 {
            term = -term * inv;
            let add = term / (q * k as f64 + 1.0);
            sum += add;
            if add.norm() < 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        return Ok(one - sum);
    }
    if norm < 0.67 {
        // w^{1/q} (π/q) / sin(π/q) − Σ_{k≥0} (−1)^k w^{k+1} / (q(k+1) − 1)
        let head = complex_power(w, 1.0 / q)? * ((PI / q) / (PI / q).sin());
        let mut term = -one;
        let mut sum = zero;
        for k in 0..2000 {
            term = -term * w;
            let add = term / (q * (k + 1) as f64 - 1.0);
            sum += add;
            if add.norm() < 1e-17 * head.norm() {
                break;
            }
        }
        return Ok(head - sum);
    }
    let spec = QuadratureSpec::default().with_tolerances(1e-15, 1e-13);
    let res = integrate_adaptive(|v: f64| w / (Complex::new(v.powf(q), 0.0) + w), 0.0, 1.0, &spec)?;
    Ok(res.value)
}

/// `ln(1 + z)` without the cancellation of forming `1 + z` for small `|z|`.
fn ln_1p(z: Complex) -> Complex {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        z - z2 / 2.0 + z2 * z / 3.0 - z2 * z2 / 4.0 + z2 * z2 * z / 5.0
    } else {
        (z + 1.0).ln()
    }
}

/// Laplace transform of the aggregate power of `Δ` Rayleigh-faded
/// interferers uniform on a disk of radius `radius`.
pub fn disk_interference_transform(s: Complex, delta: u32, radius: f64, link: &LinkParams) -> Result<Complex> {
    let w = s * link.k_prime * radius.powf(-link.path_loss_exponent);
    Ok(disk_kernel(w, link.path_loss_exponent / 2.0)?.powu(delta))
}

/// `Γ(1 − 2/b) Γ(1 + 2/b)`, the Rayleigh constant of the Poisson transform.
fn poisson_constant(b: f64) -> Result<f64> {
    Ok(gamma(1.0 - 2.0 / b)? * gamma(1.0 + 2.0 / b)?)
}

/// Laplace transform of the aggregate Rayleigh-faded interference from a
/// Poisson field of density `activity · λ_B`:
/// `exp(−π activity λ_B Γ(1−2/b) Γ(1+2/b) (s K′)^{2/b})`.
pub fn poisson_interference_transform(s: Complex, activity: f64, link: &LinkParams) -> Result<Complex> {
    let b = link.path_loss_exponent;
    let c = PI * activity * link.bs_density * poisson_constant(b)?;
    Ok((-complex_power(s * link.k_prime, 2.0 / b)? * c).exp())
}

/// Transform of a pool of `size` interferers on the disk holding `size` BSs
/// on average, each active with probability `activity`:
/// `(1 − activity · (1 − ψ))^size`.
pub fn pool_interference_transform(s: Complex, size: u32, activity: f64, link: &LinkParams) -> Result<Complex> {
    let radius = population_radius(size as f64, link.bs_density);
    let w = s * link.k_prime * radius.powf(-link.path_loss_exponent);
    let comp = disk_kernel_complement(w, link.path_loss_exponent / 2.0)?;
    Ok((ln_1p(-comp * activity) * size as f64).exp())
}

/// Result of one outage evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEvaluation {
    /// Outage probability clamped to `[0, 1]`.
    pub probability: f64,
    /// Value before clamping.
    pub raw: f64,
    /// Error bound reported by the outer quadrature.
    pub abs_error: f64,
}

fn check_closed_form(model: FadingModel, interferers: Interferers, link: &LinkParams) -> Result<()> {
    link.validate()?;
    model.validate()?;
    match interferers {
        Interferers::Pool { activity, .. } | Interferers::Field { activity } if !(0.0..=1.0).contains(&activity) => {
            return Err(InterferenceError::Domain(format!("activity must lie in [0, 1], got {activity}")));
        }
        Interferers::Pool { size: 0, .. } => {
            return Err(InterferenceError::Domain("interferer pool must be non-empty".into()));
        }
        _ => {}
    }
    match (model, interferers) {
        (FadingModel::Rayleigh, _) => Ok(()),
        (FadingModel::None, Interferers::Count(0)) => Ok(()),
        (FadingModel::None, Interferers::Pool { activity, .. } | Interferers::Field { activity }) if activity == 0.0 => {
            Ok(())
        }
        _ => Err(model.unsupported()),
    }
}

/// Area coordinate `u = π λ_B r²` of the nearest BS is unit exponential.
///
/// `scale` is the `u` below which the conditional success is still close to
/// one. When it is much smaller than 1 the mass sits in a narrow spike near
/// the origin, so `[0, 1]` is split geometrically from `scale` upward.
fn average_over_nearest<F>(mut conditional: F, scale: f64, spec: &QuadratureSpec) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let scale = if scale.is_finite() && scale > 0.0 { scale.clamp(1e-30, 1.0) } else { 1.0 };
    let mut breaks = vec![0.0, scale];
    let mut x = scale;
    while x * 100.0 < 1.0 {
        x *= 100.0;
        breaks.push(x);
    }
    if scale < 1.0 {
        breaks.push(1.0);
    }
    let pieces = breaks.len();
    let piece_spec = spec.with_tolerances(spec.abs_tol / pieces as f64, spec.rel_tol);

    let mut failure = None;
    let mut integrand = |u: f64| {
        if failure.is_some() {
            return 0.0;
        }
        match conditional(u) {
            Ok(v) => (-u).exp() * v,
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };
    let (mut value, mut abs_error) = (0.0, 0.0);
    for w in breaks.windows(2) {
        let r = integrate_adaptive(&mut integrand, w[0], w[1], &piece_spec)?;
        value += r.value;
        abs_error += r.abs_error;
    }
    let top = *breaks.last().unwrap();
    let r = integrate_semi_infinite(|x: f64| integrand(top + x), &piece_spec.with_scale(1.0))?;
    value += r.value;
    abs_error += r.abs_error;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((value, abs_error))
}

/// `P(S > x I)` for a Rayleigh-faded desired signal and interference `I > 0`,
/// by the Parseval identity.
///
/// With `φ(s) = L_I(2πj x s)`,
/// `P(S > x I) = 1/2 + 2 ∫₀^∞ [Re φ(s) + Im φ(s) / (2πs)] / (1 + 4π²s²) ds`.
/// The `1/(2πjs)` pole of the Fourier kernel is folded in analytically so the
/// integrand decays like `1/s²`; the negative half-line is the conjugate.
///
/// Noise is not passed through here: since `S` is exponential,
/// `P(S > x(σ² + I)) = e^{−xσ²} P(S > x I)`, and keeping the undamped
/// `e^{−2πj x σ² s}` out of the integrand avoids a non-decaying oscillation.
///
/// `feature` is the `s` at which the transform itself starts to vary. When it
/// is far from the kernel's own width `1/(2π)` the range is split
/// geometrically between the two so that narrow structure is not stepped over.
fn parseval_conditional_success<F>(transform_w: F, feature: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: Fn(f64) -> Result<Complex>,
{
    let kernel_width = 1.0 / (2.0 * PI);
    let feature = if feature.is_finite() {
        feature.clamp(kernel_width * 1e-24, kernel_width * 1e12)
    } else {
        kernel_width * 1e12
    };
    let lo = feature.min(kernel_width);
    let hi = feature.max(kernel_width);
    let mut breaks = vec![0.0, lo];
    let mut x = lo;
    while x * 100.0 < hi {
        x *= 100.0;
        breaks.push(x);
    }
    if hi > lo {
        breaks.push(hi);
    }
    let pieces = breaks.len();
    let piece_spec = spec.with_tolerances(spec.abs_tol / pieces as f64, spec.rel_tol);

    let mut failure = None;
    let mut integrand = |s: f64| -> f64 {
        if failure.is_some() || s == 0.0 {
            return 0.0;
        }
        match transform_w(s) {
            Ok(phi) => {
                let two_pi_s = 2.0 * PI * s;
                (phi.re + phi.im / two_pi_s) / (1.0 + two_pi_s * two_pi_s)
            }
            Err(e) => {
                failure = Some(e);
                0.0
            }
        }
    };
    // a piece that misses its share of the budget is still kept when its own
    // error bound fits inside the whole budget
    let settle = |r: crate::numerics::Result<crate::numerics::Integral<f64>>| match r {
        Ok(v) => Ok(v.value),
        Err(NumericsError::NonConvergence { estimate, error, .. }) if error <= spec.abs_tol => Ok(estimate.re),
        Err(e) => Err(e),
    };
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += settle(integrate_adaptive(&mut integrand, w[0], w[1], &piece_spec))?;
    }
    total += settle(integrate_semi_infinite(|x: f64| integrand(hi + x), &piece_spec.with_scale(hi)))?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(0.5 + 2.0 * total)
}

/// Outage probability with full diagnostics.
pub fn outage_evaluation(
    gamma0: f64,
    interferers: Interferers,
    link: &LinkParams,
    model: FadingModel,
    spec: &QuadratureSpec,
) -> Result<OutageEvaluation> {
    check_closed_form(model, interferers, link)?;
    if !(gamma0 > 0.0) {
        return Err(InterferenceError::Domain(format!("SINR threshold must be positive, got {gamma0}")));
    }
    let b = link.path_loss_exponent;
    let q = b / 2.0;
    let sigma2 = link.noise_power;
    // noise exponent γ₀ σ² r^b / K′ written in the area coordinate u
    let noise_scale = gamma0 * sigma2 / link.k_prime * (PI * link.bs_density).powf(-q);

    let noise_only = match interferers {
        Interferers::Count(0) => true,
        Interferers::Pool { activity, .. } | Interferers::Field { activity } => activity == 0.0,
        Interferers::Count(_) => false,
    };

    let (success, abs_error) = if let FadingModel::None = model {
        // deterministic gain, no interferers: success iff r < (K′/(γ₀σ²))^{1/b}
        if sigma2 == 0.0 {
            (1.0, 0.0)
        } else {
            let u_star = (1.0 / noise_scale).powf(1.0 / q);
            (-(-u_star).exp_m1(), 0.0)
        }
    } else if noise_only {
        if sigma2 == 0.0 {
            (1.0, 0.0)
        } else {
            average_over_nearest(|u| Ok((-noise_scale * u.powf(q)).exp()), noise_scale.powf(-1.0 / q), spec)?
        }
    } else {
        // In the area coordinate u = πλ_B r² the transform argument
        // z K′ = 2πj s γ₀ r^b only enters through γ₀ (u / u_a)^q, with u_a the
        // area coordinate of the disk radius; the field depends on u · γ₀^{1/q}.
        // Each arm also gives the s where the transform departs from 1, and
        // the u beyond which interference alone makes success unlikely.
        type Transform = Box<dyn Fn(f64, f64) -> Result<Complex>>;
        let spread = gamma0.powf(1.0 / q);
        let (transform, feature, reach): (Transform, Box<dyn Fn(f64) -> f64>, f64) = match interferers {
            Interferers::Count(delta) => {
                let radius = link.disk.radius(delta, link.bs_density);
                let disk_area = PI * link.bs_density * radius * radius;
                (
                    Box::new(move |u, s| {
                        let w = Complex::new(0.0, 2.0 * PI * s * gamma0 * (u / disk_area).powf(q));
                        Ok(disk_kernel(w, q)?.powu(delta))
                    }),
                    Box::new(move |u| 1.0 / (2.0 * PI * gamma0 * (u * delta as f64 / disk_area).powf(q))),
                    disk_area / (delta as f64 * spread),
                )
            }
            Interferers::Pool { size, activity } => {
                let disk_area = size as f64;
                (
                    Box::new(move |u, s| {
                        let w = Complex::new(0.0, 2.0 * PI * s * gamma0 * (u / disk_area).powf(q));
                        let comp = disk_kernel_complement(w, q)?;
                        Ok((ln_1p(-comp * activity) * size as f64).exp())
                    }),
                    Box::new(move |u| 1.0 / (2.0 * PI * gamma0 * (u * activity).powf(q))),
                    1.0 / (activity * spread),
                )
            }
            Interferers::Field { activity } => {
                let c = poisson_constant(b)? * activity;
                (
                    Box::new(move |u, s| {
                        let z = Complex::new(0.0, 2.0 * PI * s * gamma0);
                        Ok((-complex_power(z, 1.0 / q)? * (c * u)).exp())
                    }),
                    Box::new(move |u| (c * u).powf(-q) / (2.0 * PI * gamma0)),
                    1.0 / (c * spread),
                )
            }
        };
        average_over_nearest(
            |u| {
                let noise = (-noise_scale * u.powf(q)).exp();
                // the conditional success is at most the noise factor
                if noise < 1e-3 * spec.abs_tol {
                    return Ok(noise);
                }
                let interference = parseval_conditional_success(|s| transform(u, s), feature(u), spec)?;
                Ok(noise * interference)
            },
            reach.min(noise_scale.powf(-1.0 / q)),
            spec,
        )?
    };
    let raw = 1.0 - success;
    let excursion = (-raw).max(raw - 1.0);
    if excursion > MAX_EXCURSION {
        return Err(InterferenceError::Excursion { value: raw, excursion });
    }
    Ok(OutageEvaluation {
        probability: raw.clamp(0.0, 1.0),
        raw,
        abs_error,
    })
}

/// `p_out(γ₀, Δ)` for exactly `Δ` interferers.
pub fn outage_probability(
    gamma0: f64,
    delta: u32,
    link: &LinkParams,
    model: FadingModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(outage_evaluation(gamma0, Interferers::Count(delta), link, model, spec)?.probability)
}

/// Outage under a Poisson field of interferers at density `activity · λ_B`.
pub fn outage_probability_field(
    gamma0: f64,
    activity: f64,
    link: &LinkParams,
    model: FadingModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(outage_evaluation(gamma0, Interferers::Field { activity }, link, model, spec)?.probability)
}

pub fn success_probability(
    gamma0: f64,
    delta: u32,
    link: &LinkParams,
    model: FadingModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    Ok(1.0 - outage_probability(gamma0, delta, link, model, spec)?)
}

/// Outage obtained by inserting [`laplace_interference`] where the transform
/// of the interference belongs: `1 − E_r[e^{−xσ²} · L(x)]` with
/// `x = γ₀ r^b / K′`. Not clamped; it leaves `[0, 1]` for odd `Δ`. Reported
/// only to quantify how far the limit expression sits from the disk model.
pub fn limit_form_outage(
    gamma0: f64,
    delta: u32,
    link: &LinkParams,
    model: FadingModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    link.validate()?;
    let b = link.path_loss_exponent;
    let q = b / 2.0;
    let (success, _) = average_over_nearest(
        |u| {
            let r = link.distance_from_area(u);
            let x = gamma0 * r.powf(b) / link.k_prime;
            let lt = laplace_interference(Complex::new(x, 0.0), delta, link, model)?;
            Ok((-x * link.noise_power).exp() * lt.re)
        },
        PI * link.bs_density * (link.k_prime / gamma0).powf(1.0 / q),
        spec,
    )?;
    Ok(1.0 - success)
}

/// `Σ_{Δ=1}^{N} p_out(Δ) · Bin(N, p; Δ)` for an arbitrary outage table.
/// The `Δ = 0` term carries no outage.
pub fn binomial_weighted_outage<F>(p_busy: f64, n_max: u32, mut outage: F) -> Result<f64>
where
    F: FnMut(u32) -> Result<f64>,
{
    if !(0.0..=1.0).contains(&p_busy) {
        return Err(InterferenceError::Domain(format!("busy probability must lie in [0, 1], got {p_busy}")));
    }
    let n = n_max as u64;
    let mut total = 0.0;
    for delta in 1..=n_max {
        let w = binomial_pmf(n, delta as u64, p_busy);
        if w == 0.0 {
            continue;
        }
        total += w * outage(delta)?;
    }
    Ok(total)
}

/// Probability that a channel is unavailable at busy probability `p_busy`
/// with a pool of `n_max` potential interferers, at the link's threshold.
///
/// Each `p_out(γ₀, Δ)` places the `Δ` active interferers on the disk holding
/// the whole pool. The sum runs over `Δ = 1..n_max`.
pub fn unavailable_probability(
    p_busy: f64,
    link: &LinkParams,
    model: FadingModel,
    spec: &QuadratureSpec,
    n_max: u32,
) -> Result<f64> {
    let pooled = LinkParams { disk: DiskRule::Pool { size: n_max }, ..*link };
    binomial_weighted_outage(p_busy, n_max, |delta| outage_probability(link.gamma0, delta, &pooled, model, spec))
}

/// Same quantity as [`unavailable_probability`] from a single evaluation of
/// the pool mixture `E[p_out(γ₀, Δ)]`, removing the `Δ = 0` term afterwards.
pub fn unavailable_probability_pooled(
    p_busy: f64,
    link: &LinkParams,
    model: FadingModel,
    spec: &QuadratureSpec,
    n_max: u32,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_busy) {
        return Err(InterferenceError::Domain(format!("busy probability must lie in [0, 1], got {p_busy}")));
    }
    if p_busy == 0.0 {
        return Ok(0.0);
    }
    let mixed = outage_evaluation(link.gamma0, Interferers::Pool { size: n_max, activity: p_busy }, link, model, spec)?;
    let idle_weight = binomial_pmf(n_max as u64, 0, p_busy);
    let idle = if idle_weight > 0.0 {
        outage_evaluation(link.gamma0, Interferers::Count(0), link, model, spec)?.raw
    } else {
        0.0
    };
    Ok((mixed.raw - idle_weight * idle).clamp(0.0, 1.0))
}

/// Unavailability in the limit of an unbounded pool: outage under a Poisson
/// field of active interferers at density `p_busy · λ_B`. Zero at `p_busy = 0`,
/// where no interferer is ever present.
pub fn unavailable_probability_unbounded(
    p_busy: f64,
    link: &LinkParams,
    model: FadingModel,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_busy) {
        return Err(InterferenceError::Domain(format!("busy probability must lie in [0, 1], got {p_busy}")));
    }
    if p_busy == 0.0 {
        return Ok(0.0);
    }
    outage_probability_field(link.gamma0, p_busy, link, model, spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn link() -> LinkParams {
        LinkParams {
            bs_density: 0.2,
            path_loss_exponent: 4.0,
            k_prime: 10f64.powf(3.154),
            noise_power: 1e-3,
            gamma0: 10.0,
            disk: DiskRule::DensityMatched,
        }
    }

    #[test]
    fn transforms_at_origin() {
        let zero = Complex::new(0.0, 0.0);
        assert_eq!(laplace_noise(zero, 3.0), Complex::new(1.0, 0.0));
        assert_eq!(laplace_fading(zero, FadingModel::Rayleigh).unwrap(), Complex::new(1.0, 0.0));
        assert_eq!(laplace_fading(zero, FadingModel::None).unwrap(), Complex::new(1.0, 0.0));
        assert_eq!(laplace_interference(zero, 0, &link(), FadingModel::Rayleigh).unwrap(), Complex::new(1.0, 0.0));
        assert_eq!(disk_interference_transform(zero, 3, 2.0, &link()).unwrap(), Complex::new(1.0, 0.0));
        assert_eq!(poisson_interference_transform(zero, 0.4, &link()).unwrap(), Complex::new(1.0, 0.0));
        assert_eq!(pool_interference_transform(zero, 24, 0.4, &link()).unwrap(), Complex::new(1.0, 0.0));
    }

    #[test]
    fn transform_examples() {
        let e = laplace_noise(Complex::new(1.0, 0.0), 1.0);
        assert!((e.re - (-1f64).exp()).abs() < 1e-15);
        let e = laplace_noise(Complex::new(0.0, 1.0), 1.0);
        assert!((e.re - 1f64.cos()).abs() < 1e-15 && (e.im + 1f64.sin()).abs() < 1e-15);
        let r = laplace_fading(Complex::new(1.0, 0.0), FadingModel::Rayleigh).unwrap();
        assert!((r.re - 0.5).abs() < 1e-15);
        let n = laplace_fading(Complex::new(1.0, 0.0), FadingModel::None).unwrap();
        assert!((n.re - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!(laplace_fading(Complex::new(-1.0, 0.0), FadingModel::Rayleigh).is_err());
        assert!(matches!(
            laplace_fading(Complex::new(1.0, 0.0), FadingModel::Nakagami { m: 2.0 }),
            Err(InterferenceError::Unsupported(_))
        ));
    }

    #[test]
    fn fractional_moments() {
        let f = |d, b| fading_fractional_moment(FadingModel::Rayleigh, d, b).unwrap();
        assert_eq!(f(0, 4.0), 1.0);
        assert!((f(2, 4.0) - 1.0).abs() < 1e-14);
        assert!((f(1, 4.0) - 0.886_226_925_452_758).abs() < 1e-13);
        assert_eq!(fading_fractional_moment(FadingModel::None, 3, 4.0).unwrap(), 1.0);
        assert!(fading_fractional_moment(FadingModel::LogNormal { sigma: 1.0 }, 1, 4.0).is_err());
    }

    #[test]
    fn limit_expression_examples() {
        let l = LinkParams { k_prime: 1.0, ..link() };
        let one = Complex::new(1.0, 0.0);
        let v1 = laplace_interference(one, 1, &l, FadingModel::Rayleigh).unwrap();
        // (1/4) Γ(−1/2) Γ(3/2) = (1/4)(−2√π)(√π/2)
        assert!((v1.re + PI / 4.0).abs() < 1e-12 && v1.im.abs() < 1e-15);
        let v2 = laplace_interference(one, 2, &l, FadingModel::Rayleigh).unwrap();
        assert!((v2.re - PI / 4.0).abs() < 1e-12);
        assert!(laplace_interference(Complex::new(0.0, 0.0), 1, &l, FadingModel::Rayleigh).is_err());
        let flat = LinkParams { path_loss_exponent: 2.0, ..l };
        assert!(matches!(laplace_interference(one, 1, &flat, FadingModel::Rayleigh), Err(InterferenceError::Domain(_))));
    }

    fn kernel_by_quadrature(w: Complex, q: f64) -> Complex {
        let spec = QuadratureSpec::default().with_tolerances(1e-15, 1e-13);
        integrate_adaptive(
            |v: f64| {
                let vq = Complex::new(v.powf(q), 0.0);
                vq / (vq + w)
            },
            0.0,
            1.0,
            &spec,
        )
        .unwrap()
        .value
    }

    #[test]
    fn disk_kernel_branches_agree_with_quadrature() {
        for q in [1.25, 1.5, 2.0, 2.5, 3.0] {
            for mag in [1e-3, 0.1, 0.5, 0.9, 1.2, 2.0, 30.0, 1e4] {
                for angle in [0.0, PI / 4.0, PI / 2.0, -PI / 2.0] {
                    let w = Complex::from_polar(mag, angle);
                    let got = disk_kernel(w, q).unwrap();
                    let want = kernel_by_quadrature(w, q);
                    assert!((got - want).norm() < 1e-10, "q={q} w={w} got={got} want={want}");
                }
            }
        }
    }

    #[test]
    fn disk_transform_approaches_poisson_field() {
        // Δ interferers on a disk holding Δ BSs on average tend to the full field
        let l = LinkParams { k_prime: 1.0, ..link() };
        let s = Complex::new(0.0, 0.7);
        let limit = poisson_interference_transform(s, 1.0, &l).unwrap();
        let delta = 4000;
        let a = DiskRule::DensityMatched.radius(delta, l.bs_density);
        let disk = disk_interference_transform(s, delta, a, &l).unwrap();
        assert!((disk - limit).norm() < 5e-3, "disk {disk} vs field {limit}");
    }

    /// Independent route: for a Rayleigh desired signal,
    /// `P(S > xW | r) = L_W(x)` directly at a real argument.
    fn success_by_direct_transform(gamma0: f64, delta: u32, l: &LinkParams) -> f64 {
        let spec = QuadratureSpec::default().with_tolerances(1e-12, 1e-10);
        let a = l.disk.radius(delta, l.bs_density);
        integrate_semi_infinite(
            |r: f64| {
                let density = 2.0 * PI * l.bs_density * r * (-PI * l.bs_density * r * r).exp();
                let x = gamma0 * r.powf(l.path_loss_exponent) / l.k_prime;
                let s = Complex::new(x, 0.0);
                let lt = laplace_noise(s, l.noise_power) * disk_interference_transform(s, delta, a, l).unwrap();
                density * lt.re
            },
            &spec.with_scale(2.0),
        )
        .unwrap()
        .value
    }

    #[test]
    fn parseval_route_matches_direct_transform() {
        let l = link();
        let spec = QuadratureSpec::default();
        for delta in [0, 1, 2, 5] {
            for g_db in [-5.0, 5.0, 15.0] {
                let g: f64 = 10f64.powf(g_db / 10.0);
                let p = success_probability(g, delta, &l, FadingModel::Rayleigh, &spec).unwrap();
                let d = success_by_direct_transform(g, delta, &l);
                assert!((p - d).abs() < 1e-6, "Δ={delta} γ₀={g_db} dB: {p} vs {d}");
            }
        }
    }

    #[test]
    fn noiseless_no_interference_never_fails() {
        let l = LinkParams { noise_power: 0.0, ..link() };
        let p = outage_probability(1e-6, 0, &l, FadingModel::Rayleigh, &QuadratureSpec::default()).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn deterministic_gain_noise_only() {
        let l = link();
        let g = 1e4;
        let p = outage_probability(g, 0, &l, FadingModel::None, &QuadratureSpec::default()).unwrap();
        let r_star = (l.k_prime / (g * l.noise_power)).powf(0.25);
        let want = (-PI * l.bs_density * r_star * r_star).exp();
        assert!((p - want).abs() < 1e-12);
        assert!(matches!(
            outage_probability(g, 1, &l, FadingModel::None, &QuadratureSpec::default()),
            Err(InterferenceError::Unsupported(_))
        ));
    }

    #[test]
    fn poisson_field_interference_limited_closed_form() {
        // no exclusion around the user: p_suc = 1 / (1 + Γ(1−2/b) Γ(1+2/b) γ₀^{2/b})
        for b in [3.0, 4.0, 5.0] {
            let l = LinkParams { noise_power: 0.0, path_loss_exponent: b, ..link() };
            let c = gamma(1.0 - 2.0 / b).unwrap() * gamma(1.0 + 2.0 / b).unwrap();
            for g_db in [0.0, 5.0, 10.0] {
                let g: f64 = 10f64.powf(g_db / 10.0);
                let p = outage_probability_field(g, 1.0, &l, FadingModel::Rayleigh, &QuadratureSpec::default()).unwrap();
                let want = 1.0 / (1.0 + c * g.powf(2.0 / b));
                assert!((1.0 - p - want).abs() < 1e-6, "b = {b}, γ₀ = {g_db} dB: {} vs {want}", 1.0 - p);
            }
        }
    }

    #[test]
    fn binomial_weighting_identities() {
        let n = 24;
        assert_eq!(binomial_weighted_outage(0.3, n, |_| Ok(0.0)).unwrap(), 0.0);
        let all = binomial_weighted_outage(0.3, n, |_| Ok(1.0)).unwrap();
        assert!((all - (1.0 - 0.7f64.powi(24))).abs() < 1e-13);
        assert_eq!(binomial_weighted_outage(0.0, n, |_| Ok(1.0)).unwrap(), 0.0);
        assert!(binomial_weighted_outage(1.2, n, |_| Ok(1.0)).is_err());
    }

    #[test]
    fn pool_transform_tends_to_thinned_field() {
        let l = LinkParams { k_prime: 1.0, ..link() };
        let s = Complex::new(0.0, 3.0);
        let field = poisson_interference_transform(s, 0.3, &l).unwrap();
        let mut last = f64::INFINITY;
        for size in [24, 240, 2400, 24_000, 240_000] {
            let gap = (pool_interference_transform(s, size, 0.3, &l).unwrap() - field).norm();
            assert!(gap < last);
            last = gap;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn complement_is_accurate_for_tiny_arguments() {
        for q in [1.5, 2.0, 2.5] {
            let w = Complex::new(0.0, 1e-14);
            let comp = disk_kernel_complement(w, q).unwrap();
            let lead = complex_power(w, 1.0 / q).unwrap() * ((PI / q) / (PI / q).sin()) - w / (q - 1.0);
            assert!((comp - lead).norm() <= 1e-12 * lead.norm(), "q = {q}");
        }
    }

    #[test]
    fn pooled_unavailability_routes_agree() {
        // per-Δ table route against the single mixture evaluation
        let spec = QuadratureSpec::default();
        let l = link();
        for p in [0.05, 0.3, 0.8] {
            let by_delta = unavailable_probability(p, &l, FadingModel::Rayleigh, &spec, 12).unwrap();
            let mixed = unavailable_probability_pooled(p, &l, FadingModel::Rayleigh, &spec, 12).unwrap();
            assert!((by_delta - mixed).abs() < 1e-7, "p = {p}: {by_delta} vs {mixed}");
        }
        assert_eq!(unavailable_probability_unbounded(0.0, &l, FadingModel::Rayleigh, &spec).unwrap(), 0.0);
    }

    #[test]
    fn rejects_flat_path_loss() {
        let l = LinkParams { path_loss_exponent: 2.0, ..link() };
        assert!(outage_probability(1.0, 1, &l, FadingModel::Rayleigh, &QuadratureSpec::default()).is_err());
    }
}
