//! Drifted Dirichlet potentials and capacities of model annuli.
//!
//! For a constellation with weight `Lambda`, the radial solution of the
//! drifted Dirichlet problem on the annulus `rho < r < R` is
//! `psi(r) = int_rho^r Lambda / int_rho^R Lambda`, and the drifted capacity is
//! `|S_rho| Lambda(rho) / int_rho^R Lambda`. Both are invariant under the
//! choice of the lower limit used to normalise `Lambda`.
//!
//! The exact p-capacity of a model annulus,
//! `omega_(m-1) (int_rho^R w^((1-m)/(p-1)))^(1-p)`, is cross-checked against
//! [`discrete_energy_oracle`], which minimises the discretised p-energy
//! directly.

mod oracle;

use serde::{Deserialize, Serialize};

use crate::constellation::{Annulus, BalanceCheck, Constellation, Weight, DEFAULT_BALANCE_GRID};
use crate::error::{Error, Result};
use crate::expr::RadialExpr;
use crate::model::{GrowthFamily, ModelSpace};
use crate::quadrature::{classify_tail, integrate_with, QuadratureOptions, TailOptions, TailVerdict};

pub use oracle::discrete_energy_oracle;

/// How a capacity value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CapacityMethod {
    DriftedQuadrature,
    DriftedTailLimit,
    DivergentTail,
    UnknownTail,
    ExactModel,
    EnergyOracle,
    LowerBound,
}

impl CapacityMethod {
    pub fn tag(self) -> &'static str {
        match self {
            CapacityMethod::DriftedQuadrature => "drifted-quadrature",
            CapacityMethod::DriftedTailLimit => "drifted-tail-limit",
            CapacityMethod::DivergentTail => "divergent-tail",
            CapacityMethod::UnknownTail => "unknown-tail",
            CapacityMethod::ExactModel => "exact-model",
            CapacityMethod::EnergyOracle => "energy-oracle",
            CapacityMethod::LowerBound => "lower-bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub method: CapacityMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CapacityEstimate {
    fn new(value: f64, error_estimate: f64, method: CapacityMethod) -> Self {
        Self {
            value,
            error_estimate: error_estimate.abs(),
            method,
            detail: None,
        }
    }
}

/// Tunables shared by the capacity operations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityOptions {
    /// Lower limit of the exponent integral in `Lambda`; `None` means `rho`.
    pub lower_limit: Option<f64>,
    pub quadrature: QuadratureOptions,
    pub tail: TailOptions,
    pub balance_grid: usize,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self {
            lower_limit: None,
            quadrature: QuadratureOptions::default(),
            tail: TailOptions::default(),
            balance_grid: DEFAULT_BALANCE_GRID,
        }
    }
}

impl CapacityOptions {
    pub fn with_lower_limit(lower_limit: f64) -> Self {
        Self {
            lower_limit: Some(lower_limit),
            ..Self::default()
        }
    }
}

/// Values of the drifted potential on a radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialTable {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

fn weight_for<'a>(c: &'a Constellation, a: &Annulus, hi: f64, options: &CapacityOptions) -> Result<Weight<'a>> {
    let lower = options.lower_limit.unwrap_or(a.rho());
    c.weight(lower, a.rho(), hi, options.quadrature)
}

fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    // pairwise-stable compensated summation
    let mut s = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = s + v;
        comp += if s.abs() >= v.abs() { (s - t) + v } else { (v - t) + s };
        s = t;
    }
    s + comp
}

/// `int_rho^r Lambda` at each grid radius plus the total over `[rho, R]`.
fn cumulative_weight(weight: &Weight<'_>, a: &Annulus, grid: &[f64], options: &CapacityOptions) -> Result<(Vec<f64>, f64, f64)> {
    let mut pieces = Vec::with_capacity(grid.len() + 1);
    let mut cumulative = Vec::with_capacity(grid.len());
    let mut error = 0.0;
    let mut last = a.rho();
    for &r in grid {
        if r < last || r > a.outer() {
            return Err(Error::Precondition(format!("potential grid must be increasing inside [rho, R], got {r}")));
        }
        let piece = integrate_with(|t| weight.value(t), last, r, &options.quadrature)?;
        pieces.push(piece.value);
        error += piece.abs_error_estimate;
        cumulative.push(sum(pieces.iter().copied()));
        last = r;
    }
    let rest = integrate_with(|t| weight.value(t), last, a.outer(), &options.quadrature)?;
    pieces.push(rest.value);
    error += rest.abs_error_estimate;
    Ok((cumulative, sum(pieces), error))
}

/// Drifted potential `psi_{rho,R}` on an increasing grid inside `[rho, R]`.
///
/// Values at `rho` and `R` are exactly 0 and 1 and the sequence is
/// non-decreasing.
pub fn potential_table(c: &Constellation, a: &Annulus, grid: &[f64], options: &CapacityOptions) -> Result<PotentialTable> {
    a.require_finite()?;
    let weight = weight_for(c, a, a.outer(), options)?;
    let (cumulative, total, _) = cumulative_weight(&weight, a, grid, options)?;
    if !(total > 0.0) {
        return Err(Error::Precondition("weight integral over the annulus is not positive".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    let mut prev = 0.0_f64;
    for (&r, &acc) in grid.iter().zip(&cumulative) {
        let v = if r == a.rho() {
            0.0
        } else if r == a.outer() {
            1.0
        } else {
            (acc / total).clamp(prev, 1.0)
        };
        prev = v;
        values.push(v);
    }
    Ok(PotentialTable {
        grid: grid.to_vec(),
        values,
    })
}

/// `psi_{rho,R}(r)`.
pub fn dirichlet_potential(c: &Constellation, a: &Annulus, r: f64) -> Result<f64> {
    dirichlet_potential_with(c, a, r, &CapacityOptions::default())
}

pub fn dirichlet_potential_with(c: &Constellation, a: &Annulus, r: f64, options: &CapacityOptions) -> Result<f64> {
    Ok(potential_table(c, a, &[r], options)?.values[0])
}

/// Drifted 2-capacity of the model annulus.
pub fn drifted_capacity(c: &Constellation, a: &Annulus) -> Result<CapacityEstimate> {
    drifted_capacity_with(c, a, &CapacityOptions::default())
}

pub fn drifted_capacity_with(c: &Constellation, a: &Annulus, options: &CapacityOptions) -> Result<CapacityEstimate> {
    a.require_finite()?;
    let weight = weight_for(c, a, a.outer(), options)?;
    let (_, total, error) = cumulative_weight(&weight, a, &[], options)?;
    let area = c.model().sphere_area(a.rho())?;
    let value = area * weight.value(a.rho())? / total;
    Ok(CapacityEstimate::new(value, value * error / total, CapacityMethod::DriftedQuadrature))
}

/// `lim_{R -> inf}` of the drifted capacity with inner radius `rho`.
///
/// Zero when the weight has a divergent tail. When the tail cannot be
/// classified the value is the capacity at the classifier's horizon, an upper
/// bound for the limit, tagged [`CapacityMethod::UnknownTail`].
pub fn drifted_capacity_limit(c: &Constellation, rho: f64) -> Result<CapacityEstimate> {
    drifted_capacity_limit_with(c, rho, &CapacityOptions::default())
}

pub fn drifted_capacity_limit_with(c: &Constellation, rho: f64, options: &CapacityOptions) -> Result<CapacityEstimate> {
    Ok(weight_tail(c, rho, options)?.1)
}

/// Tail verdict for `int_rho^inf Lambda` together with the capacity limit it
/// implies.
pub fn weight_tail(c: &Constellation, rho: f64, options: &CapacityOptions) -> Result<(TailVerdict, CapacityEstimate)> {
    let a = Annulus::unbounded(rho)?;
    let horizon = options.tail.horizon(rho);
    let weight = weight_for(c, &a, horizon * 2.0, options)?;
    let area = c.model().sphere_area(rho)?;
    let numerator = area * weight.value(rho)?;
    let verdict = classify_tail(|t| weight.value(t), rho, &options.tail);
    let estimate = match &verdict {
        TailVerdict::Convergent { value, error } => {
            let cap = numerator / value;
            CapacityEstimate::new(cap, cap * error / value, CapacityMethod::DriftedTailLimit)
        }
        TailVerdict::Divergent { witness } => CapacityEstimate {
            detail: Some(witness.clone()),
            ..CapacityEstimate::new(0.0, 0.0, CapacityMethod::DivergentTail)
        },
        TailVerdict::Unknown { reason } => {
            let partial = integrate_with(|t| weight.value(t), rho, horizon, &options.quadrature)
                .map(|r| numerator / r.value)
                .unwrap_or(f64::NAN);
            CapacityEstimate {
                detail: Some(reason.clone()),
                ..CapacityEstimate::new(partial, f64::NAN, CapacityMethod::UnknownTail)
            }
        }
    };
    Ok((verdict, estimate))
}

/// Classifies `int_rho^inf w^(-exponent)`.
///
/// Power-law and hyperbolic warpings are decided exactly from the exponent;
/// other warpings go through [`classify_tail`].
pub fn inverse_warping_tail(model: &ModelSpace, exponent: f64, rho: f64, options: &TailOptions) -> TailVerdict {
    match model.warping().growth_family() {
        Some(GrowthFamily::Power { coeff, exponent: k }) => {
            let decay = k * exponent;
            if decay <= 1.0 {
                TailVerdict::Divergent {
                    witness: format!("integrand decays like t^(-{decay}) with exponent at most 1"),
                }
            } else {
                TailVerdict::Convergent {
                    value: coeff.powf(-exponent) * rho.powf(1.0 - decay) / (decay - 1.0),
                    error: 0.0,
                }
            }
        }
        Some(GrowthFamily::Exponential { rate, scale }) if exponent > 0.0 => {
            // w^-q ~ (2 scale)^q e^{-q rate t}; integrate numerically until the
            // remainder is below 1e-22 of the leading term, then add it analytically.
            let decay = exponent * rate;
            let cutoff = rho + 50.0 / decay;
            let f = |t: f64| Ok((-exponent * model.warping().ln_value(t)?).exp());
            match integrate_with(f, rho, cutoff, &options.quadrature) {
                Ok(head) => {
                    let remainder = (2.0 * scale).powf(exponent) * (-decay * cutoff).exp() / decay;
                    TailVerdict::Convergent {
                        value: head.value + remainder,
                        error: head.abs_error_estimate + remainder * 1e-6,
                    }
                }
                Err(e) => TailVerdict::Unknown {
                    reason: format!("quadrature failed: {e}"),
                },
            }
        }
        Some(GrowthFamily::Compact { b }) => TailVerdict::Unknown {
            reason: format!("space form of curvature {b} > 0 is compact; no tail to classify"),
        },
        _ => classify_tail(|t| Ok((-exponent * model.warping().ln_value(t)?).exp()), rho, options),
    }
}

/// Exact p-capacity of a model annulus, valid for any `1 < p < inf`.
///
/// For an unbounded annulus the value is zero when `int^inf w^((1-m)/(p-1))`
/// diverges.
pub fn exact_model_pcapacity(model: &ModelSpace, p: f64, a: &Annulus) -> Result<CapacityEstimate> {
    exact_model_pcapacity_with(model, p, a, &CapacityOptions::default())
}

pub fn exact_model_pcapacity_with(model: &ModelSpace, p: f64, a: &Annulus, options: &CapacityOptions) -> Result<CapacityEstimate> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("exact model capacity needs 1 < p < inf, got {p}")));
    }
    let q = f64::from(model.dimension() - 1) / (p - 1.0);
    let omega = model.unit_sphere_area();
    let (integral, error) = if a.is_finite() {
        let r = integrate_with(
            |t| Ok((-q * model.warping().ln_value(t)?).exp()),
            a.rho(),
            a.outer(),
            &options.quadrature,
        )?;
        (r.value, r.abs_error_estimate)
    } else {
        match inverse_warping_tail(model, q, a.rho(), &options.tail) {
            TailVerdict::Convergent { value, error } => (value, error),
            TailVerdict::Divergent { witness } => {
                return Ok(CapacityEstimate {
                    detail: Some(witness),
                    ..CapacityEstimate::new(0.0, 0.0, CapacityMethod::DivergentTail)
                })
            }
            TailVerdict::Unknown { reason } => {
                return Ok(CapacityEstimate {
                    detail: Some(reason),
                    ..CapacityEstimate::new(f64::NAN, f64::NAN, CapacityMethod::UnknownTail)
                })
            }
        }
    };
    let value = omega * integral.powf(1.0 - p);
    Ok(CapacityEstimate::new(value, value * (p - 1.0) * error / integral, CapacityMethod::ExactModel))
}

/// Boundary flux `int_{dD_rho} |grad r|^(p-1)` of the intrinsic case, where
/// `|grad r| = 1` and the flux is the area of the inner sphere.
pub fn intrinsic_boundary_flux(c: &Constellation, rho: f64) -> Result<f64> {
    c.model().sphere_area(rho)
}

/// Lower bound `(Cap_L / |S_rho|)^(p-1) * flux` for the p-capacity of the
/// extrinsic ball of radius `rho` relative to the ball of radius `R`.
///
/// Requires the balance condition on `[rho, R]`.
pub fn pcap_lower_bound(c: &Constellation, a: &Annulus, boundary_flux: f64) -> Result<CapacityEstimate> {
    pcap_lower_bound_with(c, a, boundary_flux, &CapacityOptions::default())
}

pub fn pcap_lower_bound_with(c: &Constellation, a: &Annulus, boundary_flux: f64, options: &CapacityOptions) -> Result<CapacityEstimate> {
    a.require_finite()?;
    if !(boundary_flux > 0.0 && boundary_flux.is_finite()) {
        return Err(Error::Precondition(format!("boundary flux must be positive, got {boundary_flux}")));
    }
    if let BalanceCheck::ViolationAt { r, value } = c.check_balanced(a, options.balance_grid)? {
        return Err(Error::BalanceViolation { r, value });
    }
    let cap = drifted_capacity_with(c, a, options)?;
    let area = c.model().sphere_area(a.rho())?;
    let exponent = c.p() - 1.0;
    let value = (cap.value / area).powf(exponent) * boundary_flux;
    let rel = exponent * cap.error_estimate / cap.value;
    Ok(CapacityEstimate::new(value, value * rel, CapacityMethod::LowerBound))
}

/// Sup-norm of the centred finite-difference residual
/// `psi'' + b psi'` over interior nodes of a uniform grid.
pub fn fd_residual(values: &[f64], spacing: f64, first_order: &[f64]) -> f64 {
    let h2 = spacing * spacing;
    values
        .windows(3)
        .zip(first_order.iter().skip(1))
        .map(|(w, b)| {
            let second = (w[2] - 2.0 * w[1] + w[0]) / h2;
            let first = (w[2] - w[0]) / (2.0 * spacing);
            (second + b * first).abs()
        })
        .fold(0.0, f64::max)
}

/// Residual of the drifted potential in the radial equation
/// `psi'' + psi' (M / ((p - 1) g^2) - eta) = 0` on `n` uniform nodes.
///
/// Converges to zero at second order in the grid spacing.
pub fn ode_residual(c: &Constellation, a: &Annulus, n: usize) -> Result<f64> {
    ode_residual_with(c, a, n, &CapacityOptions::default())
}

pub fn ode_residual_with(c: &Constellation, a: &Annulus, n: usize, options: &CapacityOptions) -> Result<f64> {
    a.require_finite()?;
    if n < 64 {
        return Err(Error::Precondition(format!("residual grid needs at least 64 nodes, got {n}")));
    }
    let spacing = (a.outer() - a.rho()) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { a.outer() } else { a.rho() + spacing * i as f64 })
        .collect();
    let table = potential_table(c, a, &grid, options)?;
    let coefficients = grid
        .iter()
        .map(|&r| c.first_order_coefficient(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(fd_residual(&table.values, spacing, &coefficients))
}

/// Outcome of the pointwise comparison between the p-Laplacian of a radial
/// function and the drifted Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ComparisonCheck {
    Holds { max_gap: f64 },
    ViolationAt { r: f64, lhs: f64, rhs: f64 },
}

/// Checks `Delta_p f >= (p - 1) |f'|^(p-2) g^2 L f` on the grid for an
/// intrinsic constellation and a radial `f` with `f' >= 0` and
/// `f'' - f' eta_w <= 0`.
pub fn verify_comparison_inequality(c: &Constellation, f: &RadialExpr, grid: &[f64]) -> Result<ComparisonCheck> {
    if !c.is_intrinsic() {
        return Err(Error::Precondition(
            "the comparison check needs an intrinsic constellation (g = 1, h = 0, lambda = 0, m = n)".into(),
        ));
    }
    let df = f.differentiate();
    let d2f = df.differentiate();
    let m = f64::from(c.m());
    let p = c.p();
    let mut max_gap = 0.0_f64;
    for &r in grid {
        let f1 = df.evaluate(r)?;
        let f2 = d2f.evaluate(r)?;
        let eta = c.model().eta(r)?;
        let slack = 1e-12 * (1.0 + f2.abs() + (f1 * eta).abs());
        if f1 < -slack {
            return Err(Error::Precondition(format!("f' must be non-negative, f'({r}) = {f1}")));
        }
        if f2 - f1 * eta > slack {
            return Err(Error::Precondition(format!(
                "f'' - f' eta must be non-positive, got {} at r = {r}",
                f2 - f1 * eta
            )));
        }
        let grad_power = f1.abs().powf(p - 2.0);
        let lhs = grad_power * ((p - 1.0) * f2 + (m - 1.0) * eta * f1);
        let g = c.bounds().g.evaluate(r)?;
        let drifted = f2 + f1 * c.first_order_coefficient(r)?;
        let rhs = (p - 1.0) * grad_power * g * g * drifted;
        if lhs < rhs - 1e-9 * (1.0 + lhs.abs()) {
            return Ok(ComparisonCheck::ViolationAt { r, lhs, rhs });
        }
        max_gap = max_gap.max((rhs - lhs).max(0.0));
    }
    Ok(ComparisonCheck::Holds { max_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::model::WarpingFunction;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn model(m: u32, formula: &str) -> ModelSpace {
        ModelSpace::new(m, WarpingFunction::from_formula(formula).unwrap()).unwrap()
    }

    fn intrinsic(m: u32, formula: &str, p: f64) -> Constellation {
        Constellation::intrinsic(model(m, formula), p, 1.0).unwrap()
    }

    fn annulus(rho: f64, outer: f64) -> Annulus {
        Annulus::new(rho, outer).unwrap()
    }

    #[test]
    fn potential_boundary_values() {
        let c = Constellation::new(4, 2.5, ModelSpace::space_form(3, -1.0).unwrap(), crate::constellation::Bounds::constant(0.1, 0.2), 1.0).unwrap();
        let a = annulus(1.0, 3.0);
        assert_eq!(dirichlet_potential(&c, &a, 1.0).unwrap(), 0.0);
        assert_eq!(dirichlet_potential(&c, &a, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn potential_newtonian() {
        let c = intrinsic(3, "r", 2.0);
        let v = dirichlet_potential(&c, &annulus(1.0, 2.0), 1.5).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, max_relative = 1e-10);
    }

    #[test]
    fn potential_logarithmic_in_the_plane() {
        let c = intrinsic(2, "r", 2.0);
        let e = std::f64::consts::E;
        let v = dirichlet_potential(&c, &annulus(1.0, e), e.sqrt()).unwrap();
        assert_relative_eq!(v, 0.5, max_relative = 1e-10);
    }

    #[test]
    fn potential_table_monotone() {
        let c = intrinsic(4, "sinh(r)", 3.0);
        let a = annulus(1.0, 4.0);
        let grid: Vec<f64> = (0..=30).map(|i| 1.0 + 0.1 * i as f64).collect();
        let t = potential_table(&c, &a, &grid, &CapacityOptions::default()).unwrap();
        assert_eq!(t.values[0], 0.0);
        assert_eq!(*t.values.last().unwrap(), 1.0);
        assert!(t.values.windows(2).all(|w| w[1] >= w[0]));
        assert!(potential_table(&c, &a, &[2.0, 1.5], &CapacityOptions::default()).is_err());
    }

    #[test]
    fn newtonian_annulus_capacity() {
        let c = intrinsic(3, "r", 2.0);
        let cap = drifted_capacity(&c, &annulus(1.0, 2.0)).unwrap();
        assert_relative_eq!(cap.value, 8.0 * PI, max_relative = 1e-10);
        assert_eq!(cap.method, CapacityMethod::DriftedQuadrature);
    }

    #[test]
    fn vanishing_gap_capacity_blows_up() {
        let c = intrinsic(3, "r", 2.0);
        let cap = drifted_capacity(&c, &annulus(1.0, 1.0 + 1e-6)).unwrap();
        assert!(cap.value > 1e6);
    }

    #[test]
    fn hyperbolic_annulus_capacity() {
        let c = intrinsic(3, "sinh(r)", 2.0);
        let cap = drifted_capacity(&c, &annulus(1.0, 2.0)).unwrap();
        let coth = |x: f64| 1.0 / x.tanh();
        let expected = 4.0 * PI / (coth(1.0) - coth(2.0));
        assert_relative_eq!(cap.value, expected, max_relative = 1e-10);
    }

    #[test]
    fn capacity_limits() {
        let cap = drifted_capacity_limit(&intrinsic(3, "r", 2.0), 1.0).unwrap();
        assert_relative_eq!(cap.value, 4.0 * PI, max_relative = 1e-6);

        let cap = drifted_capacity_limit(&intrinsic(2, "r", 2.0), 1.0).unwrap();
        assert_eq!(cap.value, 0.0);
        assert_eq!(cap.method, CapacityMethod::DivergentTail);

        let cap = drifted_capacity_limit(&intrinsic(3, "sinh(r)", 2.0), 1.0).unwrap();
        let expected = 4.0 * PI / (1.0 / 1f64.tanh() - 1.0);
        assert_relative_eq!(cap.value, expected, max_relative = 1e-6);
    }

    #[test]
    fn exact_capacities() {
        let a = annulus(1.0, 2.0);
        let cap = exact_model_pcapacity(&model(3, "r"), 2.0, &a).unwrap();
        assert_relative_eq!(cap.value, 8.0 * PI, max_relative = 1e-12);
        let cap = exact_model_pcapacity(&model(3, "r"), 3.0, &a).unwrap();
        assert_relative_eq!(cap.value, 4.0 * PI / 2f64.ln().powi(2), max_relative = 1e-12);
        let cap = exact_model_pcapacity(&model(2, "r"), 2.0, &Annulus::unbounded(1.0).unwrap()).unwrap();
        assert_eq!(cap.value, 0.0);
        assert!(exact_model_pcapacity(&model(2, "r"), 1.0, &a).is_err());
        // p in (1, 2) is allowed here
        let cap = exact_model_pcapacity(&model(3, "r"), 1.5, &Annulus::unbounded(1.0).unwrap()).unwrap();
        // int_1^inf t^-4 = 1/3
        assert_relative_eq!(cap.value, 4.0 * PI * (1.0f64 / 3.0).powf(-0.5), max_relative = 1e-12);
    }

    #[test]
    fn exact_capacity_hyperbolic_tail() {
        let m = ModelSpace::space_form(3, -1.0).unwrap();
        let cap = exact_model_pcapacity(&m, 2.0, &Annulus::unbounded(1.0).unwrap()).unwrap();
        assert_relative_eq!(cap.value, 4.0 * PI / (1.0 / 1f64.tanh() - 1.0), max_relative = 1e-9);
    }

    #[test]
    fn intrinsic_p2_drifted_equals_exact() {
        for (m, w) in [(2, "r"), (3, "sinh(r)"), (4, "r + r^3")] {
            let c = intrinsic(m, w, 2.0);
            let a = annulus(1.0, 2.5);
            let drifted = drifted_capacity(&c, &a).unwrap().value;
            let exact = exact_model_pcapacity(c.model(), 2.0, &a).unwrap().value;
            assert_relative_eq!(drifted, exact, max_relative = 1e-9);
        }
    }

    #[test]
    fn lower_bound_examples() {
        let a = annulus(1.0, 2.0);
        let c = intrinsic(3, "r", 2.0);
        let flux = intrinsic_boundary_flux(&c, 1.0).unwrap();
        assert_relative_eq!(flux, 4.0 * PI, max_relative = 1e-14);
        let bound = pcap_lower_bound(&c, &a, flux).unwrap();
        assert_relative_eq!(bound.value, 8.0 * PI, max_relative = 1e-9);
        assert_relative_eq!(bound.value, drifted_capacity(&c, &a).unwrap().value, max_relative = 1e-12);

        let c = intrinsic(3, "r", 3.0);
        let bound = pcap_lower_bound(&c, &a, flux).unwrap().value;
        let exact = exact_model_pcapacity(c.model(), 3.0, &a).unwrap().value;
        assert!(bound <= exact * (1.0 + 1e-9), "{bound} > {exact}");
    }

    #[test]
    fn lower_bound_refuses_unbalanced_constellations() {
        let bounds = crate::constellation::Bounds::constant(1.0, 0.0);
        let c = Constellation::new(3, 2.0, model(3, "r"), bounds, 1.0).unwrap();
        let err = pcap_lower_bound(&c, &annulus(1.0, 3.0), 1.0).unwrap_err();
        assert!(matches!(err, Error::BalanceViolation { .. }));
    }

    #[test]
    fn residual_second_order() {
        let a = annulus(1.0, 2.0);
        // centred differences are exact for 1/r, so the m = 3 flat case only shows rounding
        let c = intrinsic(3, "r", 2.0);
        assert!(ode_residual(&c, &a, 4096).unwrap() <= 1e-6);
        for (m, w, p) in [(4, "r", 2.0), (2, "r", 2.0), (3, "sinh(r)", 2.0), (3, "r", 3.0)] {
            let c = intrinsic(m, w, p);
            let r1 = ode_residual(&c, &a, 512).unwrap();
            let r2 = ode_residual(&c, &a, 1024).unwrap();
            assert!(r1 / r2 > 3.5, "m={m} w={w} p={p}: {r1} / {r2}");
        }
        assert!(ode_residual(&c, &a, 10).is_err());
    }

    #[test]
    fn residual_of_constant_is_zero() {
        assert_eq!(fd_residual(&[0.5; 100], 0.01, &[3.0; 100]), 0.0);
    }

    #[test]
    fn comparison_inequality() {
        let c = intrinsic(3, "r", 2.0);
        let grid: Vec<f64> = (0..50).map(|i| 1.0 + 0.05 * i as f64).collect();
        for f in ["r", "r^2", "(1 - 1/r)/(1 - 1/2)"] {
            match verify_comparison_inequality(&c, &parse(f).unwrap(), &grid).unwrap() {
                ComparisonCheck::Holds { max_gap } => assert!(max_gap < 1e-12, "{f}: gap {max_gap}"),
                other => panic!("{f}: {other:?}"),
            }
        }
        let err = verify_comparison_inequality(&c, &parse("r^3").unwrap(), &grid).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        let ext = Constellation::new(4, 2.0, model(3, "r"), crate::constellation::Bounds::constant(0.1, 0.0), 1.0).unwrap();
        assert!(verify_comparison_inequality(&ext, &parse("r").unwrap(), &grid).is_err());
    }

    #[test]
    fn comparison_inequality_for_general_p() {
        for p in [2.0, 2.5, 4.0] {
            let c = Constellation::intrinsic(ModelSpace::space_form(3, -1.0).unwrap(), p, 1.0).unwrap();
            let grid: Vec<f64> = (0..50).map(|i| 1.0 + 0.1 * i as f64).collect();
            let check = verify_comparison_inequality(&c, &parse("log(r)").unwrap(), &grid).unwrap();
            assert!(matches!(check, ComparisonCheck::Holds { .. }), "p={p}: {check:?}");
        }
    }

    #[test]
    fn lower_limit_invariance() {
        let c = Constellation::new(4, 2.5, ModelSpace::space_form(3, -1.0).unwrap(), crate::constellation::Bounds::constant(0.1, 0.2), 1.0).unwrap();
        let a = annulus(1.0, 2.0);
        let base = drifted_capacity(&c, &a).unwrap().value;
        let psi = dirichlet_potential(&c, &a, 1.4).unwrap();
        for l in [1.0, 2.0, 0.5] {
            let opts = CapacityOptions::with_lower_limit(l);
            assert_relative_eq!(drifted_capacity_with(&c, &a, &opts).unwrap().value, base, max_relative = 1e-9);
            assert_relative_eq!(dirichlet_potential_with(&c, &a, 1.4, &opts).unwrap(), psi, max_relative = 1e-9);
        }
    }
}
