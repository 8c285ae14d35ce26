//! Adaptive Gauss-Kronrod integration and classification of improper tails.
//!
//! [`integrate`] is a globally adaptive 7/15-point Gauss-Kronrod scheme that
//! bisects the panel with the largest error estimate until the summed
//! estimate drops below the requested relative tolerance.
//!
//! [`classify_tail`] decides whether `int_a^inf f` converges from dyadic
//! partial integrals. Convergence of an improper integral cannot be decided
//! from finitely many samples, so the classifier answers `Unknown` whenever
//! the local log-log slope of `f` sits inside the dead band around -1 or the
//! dyadic increments do not behave geometrically.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

pub const DEFAULT_REL_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SUBDIVISIONS: usize = 1_000_000;
pub const DEFAULT_DOUBLINGS: u32 = 20;
pub const DEFAULT_DEAD_BAND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub subdivisions: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
        }
    }
}

impl QuadratureOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn checked<F>(f: &F, x: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let v = f(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::domain(x, format!("integrand value {v}")))
    }
}

fn gauss_kronrod_15<F>(f: &F, a: f64, b: f64) -> Result<Panel>
where
    F: Fn(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = checked(f, center)?;
    let mut kronrod = f_center * WGK[7];
    let mut gauss = f_center * WG[3];
    let mut abs = kronrod.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = checked(f, center - x)?;
        let f2 = checked(f, center + x)?;
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (f_center - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let scale = half.abs();
    let value = kronrod * half;
    let abs = abs * scale;
    let asc = asc * scale;
    let mut error = ((kronrod - gauss) * half).abs();
    if asc != 0.0 && error != 0.0 {
        error = asc * (200.0 * error / asc).powf(1.5).min(1.0);
    }
    if abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * abs);
    }
    Ok(Panel {
        a,
        b,
        value,
        error,
        abs_value: abs,
    })
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Integrates `f` over `[a, b]` to relative tolerance `rel_tol`.
pub fn integrate<F>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<IntegralResult>
where
    F: Fn(f64) -> Result<f64>,
{
    integrate_with(f, a, b, &QuadratureOptions::with_rel_tol(rel_tol))
}

pub fn integrate_with<F>(f: F, a: f64, b: f64, options: &QuadratureOptions) -> Result<IntegralResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(a <= b) {
        return Err(Error::Precondition(format!("integration limits out of order: [{a}, {b}]")));
    }
    if a == b {
        return Ok(IntegralResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            subdivisions: 0,
        });
    }
    let rel_tol = options.rel_tol.max(1e-13);
    let first = gauss_kronrod_15(&f, a, b)?;
    let mut total = first.value;
    let mut total_error = first.error;
    let mut total_abs = first.abs_value;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut subdivisions = 1;
    loop {
        let converged = total_error <= rel_tol * total.abs() || total_error <= 100.0 * f64::EPSILON * total_abs;
        if converged {
            break;
        }
        if subdivisions >= options.max_subdivisions {
            return Err(Error::QuadratureFailure {
                value: total,
                estimate: total_error,
            });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::QuadratureFailure {
                value: total,
                estimate: total_error,
            });
        }
        let left = gauss_kronrod_15(&f, worst.a, mid)?;
        let right = gauss_kronrod_15(&f, mid, worst.b)?;
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        total_abs += left.abs_value + right.abs_value - worst.abs_value;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }
    let panels = heap.into_sorted_vec();
    Ok(IntegralResult {
        value: compensated_sum(panels.iter().map(|p| p.value)),
        abs_error_estimate: compensated_sum(panels.iter().map(|p| p.error)),
        subdivisions,
    })
}

/// Signed integral: `int_a^b f` for either ordering of the limits.
pub fn integrate_signed<F>(f: F, a: f64, b: f64, options: &QuadratureOptions) -> Result<IntegralResult>
where
    F: Fn(f64) -> Result<f64>,
{
    if a <= b {
        integrate_with(f, a, b, options)
    } else {
        let r = integrate_with(f, b, a, options)?;
        Ok(IntegralResult { value: -r.value, ..r })
    }
}

type Integrand<'a> = Box<dyn Fn(f64) -> Result<f64> + Send + Sync + 'a>;

/// Antiderivative `x -> int_origin^x f` with a precomputed table of dyadic
/// anchors, so each evaluation only integrates from the nearest anchor.
pub struct CumulativeIntegral<'a> {
    f: Integrand<'a>,
    anchors: Vec<(f64, f64)>,
    options: QuadratureOptions,
}

impl<'a> CumulativeIntegral<'a> {
    /// Builds anchors at `origin * 2^k` covering `[lo, hi]`.
    pub fn new<F>(f: F, origin: f64, lo: f64, hi: f64, options: QuadratureOptions) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Send + Sync + 'a,
    {
        if !(origin > 0.0 && lo > 0.0) {
            return Err(Error::Precondition(format!(
                "cumulative integral needs positive origin and range, got origin {origin}, lo {lo}"
            )));
        }
        let f: Integrand<'a> = Box::new(f);
        let mut upward = vec![(origin, 0.0)];
        let mut x = origin;
        let mut acc = 0.0;
        while x < hi {
            let next = 2.0 * x;
            acc += integrate_with(&f, x, next, &options)?.value;
            upward.push((next, acc));
            x = next;
        }
        let mut downward = Vec::new();
        let (mut x, mut acc) = (origin, 0.0);
        while x > lo {
            let next = 0.5 * x;
            acc -= integrate_with(&f, next, x, &options)?.value;
            downward.push((next, acc));
            x = next;
        }
        downward.reverse();
        downward.extend(upward);
        Ok(Self {
            f,
            anchors: downward,
            options,
        })
    }

    pub fn at(&self, x: f64) -> Result<f64> {
        let idx = self.anchors.partition_point(|&(ax, _)| ax <= x);
        let candidates = [idx.checked_sub(1), (idx < self.anchors.len()).then_some(idx)];
        let (ax, av) = candidates
            .into_iter()
            .flatten()
            .map(|i| self.anchors[i])
            .min_by(|p, q| (p.0 - x).abs().total_cmp(&(q.0 - x).abs()))
            .expect("at least one anchor");
        Ok(av + integrate_signed(&self.f, ax, x, &self.options)?.value)
    }
}

/// Outcome of the improper-integral classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum TailVerdict {
    Convergent { value: f64, error: f64 },
    Divergent { witness: String },
    Unknown { reason: String },
}

impl TailVerdict {
    pub fn is_convergent(&self) -> bool {
        matches!(self, TailVerdict::Convergent { .. })
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, TailVerdict::Divergent { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            TailVerdict::Convergent { .. } => "Convergent",
            TailVerdict::Divergent { .. } => "Divergent",
            TailVerdict::Unknown { .. } => "Unknown",
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            TailVerdict::Convergent { value, .. } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailOptions {
    /// Partial integrals are taken up to `a * 2^doublings`.
    pub doublings: u32,
    /// Half-width of the undecided band of log-log slopes around -1.
    pub dead_band: f64,
    pub quadrature: QuadratureOptions,
}

impl Default for TailOptions {
    fn default() -> Self {
        Self {
            doublings: DEFAULT_DOUBLINGS,
            dead_band: DEFAULT_DEAD_BAND,
            quadrature: QuadratureOptions::default(),
        }
    }
}

impl TailOptions {
    pub fn horizon(&self, a: f64) -> f64 {
        a * 2f64.powi(self.doublings as i32)
    }
}

/// Number of trailing dyadic blocks that must agree before a verdict.
const STABLE_BLOCKS: usize = 3;
/// Allowed growth of consecutive increment ratios for a geometric tail.
const RATIO_SLACK: f64 = 1e-3;
/// Dyadic increment ratios this close to 1 count as non-decaying. Quadrature
/// rounding stays well below it; `t^-s` with `s > 1` has ratio `2^(1-s)`.
const HARMONIC_SLACK: f64 = 1e-9;
/// An increment this small relative to the running total ends the scan.
const NEGLIGIBLE: f64 = 1e-16;

fn log_slope<F>(f: &F, t: f64) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let spread = std::f64::consts::SQRT_2;
    let lo = f(t / spread)?;
    let hi = f(t * spread)?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain(t, "integrand overflow"));
    }
    if lo < 0.0 || hi < 0.0 {
        return Ok(None);
    }
    if lo == 0.0 {
        return Ok(if hi == 0.0 { Some(f64::NEG_INFINITY) } else { None });
    }
    if hi == 0.0 {
        return Ok(Some(f64::NEG_INFINITY));
    }
    Ok(Some((hi / lo).ln() / std::f64::consts::LN_2))
}

fn tail<T: Copy>(v: &[T]) -> &[T] {
    &v[v.len().saturating_sub(STABLE_BLOCKS)..]
}

/// Classifies `int_a^inf f` for a positive integrand.
pub fn classify_tail<F>(f: F, a: f64, options: &TailOptions) -> TailVerdict
where
    F: Fn(f64) -> Result<f64>,
{
    if !(a > 0.0) || !a.is_finite() {
        return TailVerdict::Unknown {
            reason: format!("lower limit must be positive and finite, got {a}"),
        };
    }
    let upper_slope = -1.0 + options.dead_band;
    let lower_slope = -1.0 - options.dead_band;

    let mut increments: Vec<f64> = Vec::new();
    let mut slopes: Vec<f64> = Vec::new();
    let mut quad_error = 0.0;
    let mut lo = a;
    for k in 1..=options.doublings.max(STABLE_BLOCKS as u32 + 1) {
        let hi = a * 2f64.powi(k as i32);
        let step = integrate_with(&f, lo, hi, &options.quadrature)
            .and_then(|piece| log_slope(&f, hi).map(|s| (piece, s)));
        let (piece, slope) = match step {
            Ok((piece, Some(slope))) if piece.value >= 0.0 => (piece, slope),
            Ok(_) => {
                return TailVerdict::Unknown {
                    reason: format!("integrand is not positive near t = {hi}"),
                }
            }
            Err(e) => return failure_verdict(&increments, &slopes, upper_slope, hi, &e),
        };
        increments.push(piece.value);
        slopes.push(slope);
        quad_error += piece.abs_error_estimate;
        lo = hi;

        let total = compensated_sum(increments.iter().copied());
        if increments.len() >= STABLE_BLOCKS
            && piece.value <= NEGLIGIBLE * total
            && tail(&slopes).iter().all(|&s| s < lower_slope)
        {
            return TailVerdict::Convergent {
                value: total,
                error: quad_error + piece.value,
            };
        }
    }

    let total = compensated_sum(increments.iter().copied());
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let last_slopes = tail(&slopes);
    let last_ratios = tail(&ratios);

    let geometric = last_ratios.iter().all(|q| q.is_finite() && *q < 1.0)
        && last_ratios.windows(2).all(|w| w[1] <= w[0] + RATIO_SLACK);
    if last_slopes.iter().all(|&s| s < lower_slope) && geometric {
        let q = *last_ratios.last().expect("ratios");
        let q_prev = last_ratios[last_ratios.len() - 2];
        let d = *increments.last().expect("increments");
        let remainder = d * q / (1.0 - q);
        let alternative = d * q_prev / (1.0 - q_prev);
        return TailVerdict::Convergent {
            value: total + remainder,
            error: quad_error + (remainder - alternative).abs(),
        };
    }
    if last_slopes.iter().all(|&s| s > upper_slope) {
        return TailVerdict::Divergent {
            witness: format!(
                "log-log slope of the integrand stays at {:.4} > {:.2} up to t = {:e}",
                last_slopes.last().expect("slopes"),
                upper_slope,
                lo
            ),
        };
    }
    if last_ratios.iter().all(|&q| q >= 1.0 - HARMONIC_SLACK) {
        return TailVerdict::Divergent {
            witness: format!(
                "dyadic increments do not decay (ratio {:.6}) up to t = {:e}; partial integral {total:.6e}",
                last_ratios.last().expect("ratios"),
                lo
            ),
        };
    }
    TailVerdict::Unknown {
        reason: format!(
            "slope {:.4} inside the dead band or increments not geometric (ratio {:.4}) at t = {:e}",
            last_slopes.last().copied().unwrap_or(f64::NAN),
            last_ratios.last().copied().unwrap_or(f64::NAN),
            lo
        ),
    }
}

fn failure_verdict(increments: &[f64], slopes: &[f64], upper_slope: f64, at: f64, error: &Error) -> TailVerdict {
    let growing = increments.len() >= STABLE_BLOCKS
        && tail(slopes).iter().all(|&s| s > upper_slope.max(0.0))
        && increments.windows(2).rev().take(STABLE_BLOCKS - 1).all(|w| w[1] >= w[0]);
    if growing {
        TailVerdict::Divergent {
            witness: format!("integrand grows until it can no longer be evaluated near t = {at:e} ({error})"),
        }
    } else {
        TailVerdict::Unknown {
            reason: format!("evaluation failed near t = {at:e}: {error}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ok(g: impl Fn(f64) -> f64) -> impl Fn(f64) -> Result<f64> {
        move |t| Ok(g(t))
    }

    #[test]
    fn inverse_square_on_unit_interval() {
        let r = integrate(ok(|t| t.powi(-2)), 1.0, 2.0, 1e-10).unwrap();
        assert_relative_eq!(r.value, 0.5, max_relative = 1e-12);
        assert!(r.abs_error_estimate >= 0.0);
    }

    #[test]
    fn degenerate_interval() {
        let r = integrate(ok(|t| t.exp()), 3.0, 3.0, 1e-10).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.subdivisions, 0);
    }

    #[test]
    fn inverse_sinh_square() {
        let r = integrate(ok(|t| t.sinh().powi(-2)), 1.0, 2.0, 1e-10).unwrap();
        let exact = 1.0 / 1f64.tanh() - 1.0 / 2f64.tanh();
        assert_relative_eq!(r.value, exact, max_relative = 1e-12);
        assert_relative_eq!(exact, 0.275720, max_relative = 5e-6);
    }

    #[test]
    fn adaptive_refinement_near_singularity() {
        let r = integrate(ok(|t: f64| t.sqrt().recip()), 1e-12, 1.0, 1e-10).unwrap();
        assert_relative_eq!(r.value, 2.0 - 2.0 * 1e-6, max_relative = 1e-9);
        assert!(r.subdivisions > 1);
    }

    #[test]
    fn zero_integrand_converges() {
        let r = integrate(ok(|t: f64| (2.0 * std::f64::consts::PI * t).sin()), 0.0, 1.0, 1e-12).unwrap();
        assert!(r.value.abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let options = QuadratureOptions {
            rel_tol: 1e-12,
            max_subdivisions: 3,
        };
        let err = integrate_with(ok(|t: f64| (50.0 * t).sin().abs()), 0.0, 10.0, &options).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }

    #[test]
    fn domain_errors_propagate() {
        let err = integrate(|t: f64| if t > 1.5 { Err(Error::domain(t, "x")) } else { Ok(1.0) }, 1.0, 2.0, 1e-10);
        assert!(matches!(err, Err(Error::Domain { .. })));
    }

    #[test]
    fn reversed_limits_rejected_but_signed_helper_works() {
        assert!(integrate(ok(|_| 1.0), 2.0, 1.0, 1e-10).is_err());
        let r = integrate_signed(ok(|_| 1.0), 2.0, 1.0, &QuadratureOptions::default()).unwrap();
        assert_relative_eq!(r.value, -1.0);
    }

    #[test]
    fn cumulative_integral_matches_direct() {
        let f = |t: f64| Ok(1.0 / t);
        let c = CumulativeIntegral::new(f, 2.0, 0.5, 100.0, QuadratureOptions::default()).unwrap();
        for x in [0.5, 0.7, 1.0, 2.0, 3.3, 17.0, 100.0] {
            assert_relative_eq!(c.at(x).unwrap(), (x / 2.0f64).ln(), epsilon = 1e-13);
        }
    }

    #[test]
    fn tail_inverse_square() {
        match classify_tail(ok(|t| t.powi(-2)), 1.0, &TailOptions::default()) {
            TailVerdict::Convergent { value, error } => {
                assert!((value - 1.0).abs() <= 1e-6, "value {value}");
                assert!(error >= 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tail_harmonic_diverges() {
        assert!(classify_tail(ok(|t| 1.0 / t), 1.0, &TailOptions::default()).is_divergent());
    }

    #[test]
    fn tail_barely_convergent_power_is_not_divergent() {
        for s in [1.0003, 1.001, 1.01] {
            let v = classify_tail(ok(move |t: f64| t.powf(-s)), 0.5, &TailOptions::default());
            assert!(!v.is_divergent(), "s {s}: {v:?}");
        }
    }

    #[test]
    fn tail_log_corrected_is_not_misreported() {
        let v = classify_tail(ok(|t: f64| 1.0 / (t * t.ln().powi(2))), 2.0, &TailOptions::default());
        match v {
            TailVerdict::Unknown { .. } => {}
            TailVerdict::Convergent { value, .. } => {
                assert!((value - 1.0 / 2f64.ln()).abs() < 1e-3, "value {value}")
            }
            TailVerdict::Divergent { .. } => panic!("false divergence"),
        }
    }

    #[test]
    fn tail_power_laws_respect_the_dead_band() {
        for alpha in [-1.0, -0.9, 0.0] {
            for c in [0.1, 1.0, 10.0] {
                let v = classify_tail(ok(move |t: f64| c * t.powf(alpha)), 1.0, &TailOptions::default());
                assert!(!v.is_convergent(), "alpha {alpha}, c {c}: {v:?}");
            }
        }
        for alpha in [-1.1, -1.5, -3.0] {
            for c in [0.1, 1.0, 10.0] {
                let v = classify_tail(ok(move |t: f64| c * t.powf(alpha)), 1.0, &TailOptions::default());
                assert!(!v.is_divergent(), "alpha {alpha}, c {c}: {v:?}");
                let exact = c / (-alpha - 1.0);
                assert_relative_eq!(v.value().unwrap(), exact, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn tail_exponential_matches_truncated_integral() {
        for beta in [0.05, 0.5, 1.0, 3.0] {
            let f = move |t: f64| Ok((-beta * t).exp());
            let v = classify_tail(f, 1.0, &TailOptions::default());
            let reference = integrate(f, 1.0, 1.0 + 60.0 / beta, 1e-12).unwrap().value;
            match v {
                TailVerdict::Convergent { value, .. } => assert_relative_eq!(value, reference, max_relative = 1e-6),
                other => panic!("beta {beta}: {other:?}"),
            }
        }
    }

    #[test]
    fn tail_growth_with_overflow_is_divergent() {
        let v = classify_tail(ok(|t: f64| t.exp()), 1.0, &TailOptions::default());
        assert!(v.is_divergent(), "{v:?}");
    }

    #[test]
    fn tail_rejects_non_positive_integrand() {
        let v = classify_tail(ok(|t: f64| -1.0 / (t * t)), 1.0, &TailOptions::default());
        assert!(matches!(v, TailVerdict::Unknown { .. }));
    }
}
