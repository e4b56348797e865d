//! Special functions, complex helpers, adaptive Gauss-Kronrod quadrature and
//! monotone interpolation shared by the analytical modules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

pub use num_complex::Complex64 as Complex;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("gamma function pole at x = {0}")]
    Pole(f64),
    #[error("complex power of zero with non-positive exponent {0}")]
    ZeroPower(f64),
    #[error("division by exact zero")]
    DivisionByZero,
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (best estimate {estimate}, error bound {error:e})"
    )]
    NonConvergence {
        estimate: Complex,
        error: f64,
        subdivisions: usize,
    },
    #[error("non-finite integrand value at x = {0}")]
    NonFinite(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

// ---------------------------------------------------------------------------
// Gamma function
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `sin(pi x)` with the argument reduced first so that integers give exact zeros.
fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r == 0.0 || r == 1.0 {
        return 0.0;
    }
    (PI * r).sin()
}

fn lanczos_sum(x: f64) -> f64 {
    LANCZOS_COEF
        .iter()
        .enumerate()
        .skip(1)
        .fold(LANCZOS_COEF[0], |acc, (i, c)| acc + c / (x + i as f64))
}

fn is_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Gamma function for real arguments.
///
/// Lanczos approximation (g = 7, nine terms) for `x >= 0.5`; the reflection
/// identity `Γ(x)Γ(1−x) = π / sin(πx)` below that.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(NumericsError::InvalidArgument(format!(
            "gamma of non-finite {x}"
        )));
    }
    if is_pole(x) {
        return Err(NumericsError::Pole(x));
    }
    if x < 0.5 {
        return Ok(PI / (sin_pi(x) * gamma(1.0 - x)?));
    }
    if x == x.floor() && x <= 30.0 {
        return Ok((2..x as u32).fold(1.0, |acc, k| acc * k as f64));
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok((2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z))
}

/// Natural log of |Γ(x)|.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if is_pole(x) {
        return Err(NumericsError::Pole(x));
    }
    if x < 0.5 {
        return Ok((PI / sin_pi(x).abs()).ln() - ln_gamma(1.0 - x)?);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln())
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    // arguments are positive integers, never poles
    ln_gamma(n as f64 + 1.0).unwrap()
        - ln_gamma(k as f64 + 1.0).unwrap()
        - ln_gamma((n - k) as f64 + 1.0).unwrap()
}

/// Binomial probability mass `C(n,k) p^k (1-p)^(n-k)`, evaluated in log space.
pub fn binomial_pmf(n: u64, k: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    (ln_binomial(n, k) + k as f64 * p.ln() + (n - k) as f64 * (-p).ln_1p()).exp()
}

// ---------------------------------------------------------------------------
// Complex helpers
// ---------------------------------------------------------------------------

/// Principal branch `z^a = exp(a (ln|z| + i Arg z))`, `Arg ∈ (−π, π]`.
pub fn complex_power(z: Complex, a: f64) -> Result<Complex> {
    if z.re == 0.0 && z.im == 0.0 {
        return if a > 0.0 {
            Ok(Complex::new(0.0, 0.0))
        } else {
            Err(NumericsError::ZeroPower(a))
        };
    }
    let (modulus, arg) = z.to_polar();
    Ok(Complex::from_polar(modulus.powf(a), a * arg))
}

/// Complex division that rejects an exactly-zero divisor.
pub fn checked_div(num: Complex, den: Complex) -> Result<Complex> {
    if den.re == 0.0 && den.im == 0.0 {
        return Err(NumericsError::DivisionByZero);
    }
    Ok(num / den)
}

// ---------------------------------------------------------------------------
// Erlang-B
// ---------------------------------------------------------------------------

/// Erlang-B blocking for `channels` servers at offered load `load`, via the
/// recursion `B(k) = a B(k−1) / (k + a B(k−1))`.
pub fn erlang_b(channels: u32, load: f64) -> Result<f64> {
    if !(load > 0.0) || !load.is_finite() {
        return Err(NumericsError::InvalidArgument(format!(
            "offered load must be positive, got {load}"
        )));
    }
    let mut b = 1.0;
    for k in 1..=channels {
        b = load * b / (k as f64 + load * b);
    }
    Ok(b)
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

/// Tolerances and limits for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    /// Length scale `R` of the map `x = R u / (1 − u)` used for semi-infinite
    /// ranges: half of the mapped interval lies below `R`.
    pub truncation_radius: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            max_subdivisions: 2000,
            truncation_radius: 1.0,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return Err(NumericsError::InvalidArgument(
                "quadrature tolerances must be positive".into(),
            ));
        }
        if self.max_subdivisions == 0 {
            return Err(NumericsError::InvalidArgument(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        if !(self.truncation_radius > 0.0) {
            return Err(NumericsError::InvalidArgument(
                "truncation_radius must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.truncation_radius = scale;
        self
    }
}

/// Values an integrand may return.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
    fn into_complex(self) -> Complex;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn into_complex(self) -> Complex {
        Complex::new(self, 0.0)
    }
}

impl QuadValue for Complex {
    fn zero() -> Self {
        Complex::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn into_complex(self) -> Complex {
        self
    }
}

/// Change of variable applied before integrating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Substitution {
    Identity,
    /// `x = R u / (1 − u)` on `u ∈ (0, 1)`.
    Rational,
}

#[derive(Debug, Clone, Copy)]
pub struct Integral<V> {
    pub value: V,
    pub abs_error: f64,
    pub evaluations: usize,
    pub subdivisions: usize,
    pub substitution: Substitution,
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];
/// Ten-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

struct Segment<V> {
    lo: f64,
    hi: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Segment<V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<V> Eq for Segment<V> {}
impl<V> PartialOrd for Segment<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Segment<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod21<V, F>(f: &mut F, lo: f64, hi: f64) -> Result<(V, f64)>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut values = [V::zero(); 21];
    let mut eval = |x: f64| -> Result<V> {
        let v = f(x);
        if v.magnitude().is_finite() {
            Ok(v)
        } else {
            Err(NumericsError::NonFinite(x))
        }
    };
    let fc = eval(center)?;
    values[20] = fc;
    let mut kronrod = fc * WGK[10];
    let mut gauss = V::zero();
    let mut res_abs = fc.magnitude() * WGK[10];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(10).enumerate() {
        let dx = half * x;
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        values[2 * j] = f1;
        values[2 * j + 1] = f2;
        kronrod = kronrod + (f1 + f2) * w;
        res_abs += w * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut res_asc = WGK[10] * (fc - mean).magnitude();
    for j in 0..10 {
        res_asc += WGK[j] * ((values[2 * j] - mean).magnitude() + (values[2 * j + 1] - mean).magnitude());
    }
    let abs_half = half.abs();
    res_abs *= abs_half;
    res_asc *= abs_half;
    let value = kronrod * half;
    let mut err = ((kronrod - gauss) * half).magnitude();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

/// Globally adaptive 21-point Gauss-Kronrod quadrature of `f` over `[lo, hi]`.
///
/// Converges when the summed error estimate drops below
/// `max(abs_tol, rel_tol · |result|)`.
pub fn integrate_adaptive<V, F>(mut f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<Integral<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    spec.validate()?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(NumericsError::InvalidArgument(
            "integration limits must be finite".into(),
        ));
    }
    if lo == hi {
        return Ok(Integral {
            value: V::zero(),
            abs_error: 0.0,
            evaluations: 0,
            subdivisions: 0,
            substitution: Substitution::Identity,
        });
    }
    let (value, error) = kronrod21(&mut f, lo, hi)?;
    let mut evaluations = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { lo, hi, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut subdivisions = 1;
    loop {
        let tol = spec.abs_tol.max(spec.rel_tol * total.magnitude());
        if total_err <= tol {
            break;
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(NumericsError::NonConvergence {
                estimate: total.into_complex(),
                error: total_err,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("segment heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if !(mid > worst.lo.min(worst.hi) && mid < worst.lo.max(worst.hi)) {
            // interval exhausted at machine precision; accept its estimate
            heap.push(Segment { error: 0.0, ..worst });
            total_err = heap.iter().map(|s| s.error).sum();
            continue;
        }
        let (v1, e1) = kronrod21(&mut f, worst.lo, mid)?;
        let (v2, e2) = kronrod21(&mut f, mid, worst.hi)?;
        evaluations += 42;
        subdivisions += 1;
        total = total - worst.value + v1 + v2;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment { lo: worst.lo, hi: mid, value: v1, error: e1 });
        heap.push(Segment { lo: mid, hi: worst.hi, value: v2, error: e2 });
        // re-sum periodically to stop cancellation drift in the running totals
        if subdivisions % 64 == 0 {
            total = heap.iter().fold(V::zero(), |acc, s| acc + s.value);
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value = heap.iter().fold(V::zero(), |acc, s| acc + s.value);
    Ok(Integral {
        value,
        abs_error: total_err,
        evaluations,
        subdivisions,
        substitution: Substitution::Identity,
    })
}

/// Integral of `f` over `[0, ∞)` through `x = R u / (1 − u)`, with `R` the
/// spec's `truncation_radius`.
pub fn integrate_semi_infinite<V, F>(mut f: F, spec: &QuadratureSpec) -> Result<Integral<V>>
where
    V: QuadValue,
    F: FnMut(f64) -> V,
{
    let scale = spec.truncation_radius;
    let mapped = |u: f64| -> V {
        let one_minus = 1.0 - u;
        let x = scale * u / one_minus;
        let jac = scale / (one_minus * one_minus);
        if !x.is_finite() {
            return V::zero();
        }
        let v = f(x);
        // integrands decaying faster than 1/x² vanish at u -> 1
        if v.magnitude() == 0.0 {
            V::zero()
        } else {
            v * jac
        }
    };
    let mut out = integrate_adaptive(mapped, 0.0, 1.0, spec)?;
    out.substitution = Substitution::Rational;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Monotone piecewise-cubic interpolation
// ---------------------------------------------------------------------------

/// Shape-preserving (Fritsch–Carlson) cubic Hermite interpolant.
///
/// Between two nodes the interpolant stays inside the range of the two node
/// values, so tabulated probabilities never leave `[0, 1]`. Outside the node
/// range the end values are held constant.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(NumericsError::InvalidArgument(
                "interpolation needs equally many (non-zero) abscissae and ordinates".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(NumericsError::InvalidArgument(
                "interpolation abscissae must be strictly increasing".into(),
            ));
        }
        let n = xs.len();
        let mut slopes = vec![0.0; n];
        if n > 1 {
            let secants: Vec<f64> = (0..n - 1)
                .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
                .collect();
            slopes[0] = secants[0];
            slopes[n - 1] = secants[n - 2];
            for i in 1..n - 1 {
                let (d0, d1) = (secants[i - 1], secants[i]);
                slopes[i] = if d0 * d1 <= 0.0 {
                    0.0
                } else {
                    let h0 = xs[i] - xs[i - 1];
                    let h1 = xs[i + 1] - xs[i];
                    let w1 = 2.0 * h1 + h0;
                    let w2 = h1 + 2.0 * h0;
                    (w1 + w2) / (w1 / d0 + w2 / d1)
                };
            }
            // end slopes must not overshoot
            for (i, d) in [(0usize, secants[0]), (n - 1, secants[n - 2])] {
                if slopes[i] * d <= 0.0 {
                    slopes[i] = 0.0;
                } else if slopes[i].abs() > 3.0 * d.abs() {
                    slopes[i] = 3.0 * d;
                }
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return self.ys[i],
            Err(i) => i - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let y = h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1];
        let (a, b) = (self.ys[i], self.ys[i + 1]);
        y.clamp(a.min(b), a.max(b))
    }
}
