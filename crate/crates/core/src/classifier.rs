//! p-hyperbolicity verdicts for constellations.
//!
//! Extrinsic mode applies the sufficient criterion: a balanced constellation
//! whose weight `Lambda` has finite integral over `[rho, inf)` is
//! p-hyperbolic. It never concludes parabolicity. Intrinsic mode uses the
//! exact characterisation of model spaces: p-hyperbolic iff
//! `int^inf w^(-(m-1)/(p-1))` is finite.

use serde::{Deserialize, Serialize};

use crate::capacity::{inverse_warping_tail, weight_tail, CapacityEstimate, CapacityMethod, CapacityOptions};
use crate::constellation::{balance_grid, Annulus, BalanceCheck, Bounds, Constellation};
use crate::error::{Error, Result};
use crate::expr::RadialExpr;
use crate::model::ModelSpace;
use crate::quadrature::{classify_tail, CumulativeIntegral, TailOptions, TailVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Intrinsic,
    Extrinsic,
}

/// Which criterion produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    /// Balance on `[rho, inf)` plus a finite weight integral.
    BalancedWeightTail,
    /// Finiteness of `int^inf w^(-(m-1)/(p-1))` for a model space.
    IntrinsicVolumeGrowth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub balance: Option<BalanceCheck>,
    pub tail: TailVerdict,
    pub cap_limit: CapacityEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    PHyperbolic { criterion: Criterion, evidence: Evidence },
    PParabolic { criterion: Criterion, evidence: Evidence },
    Inconclusive {
        reason: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        evidence: Option<Evidence>,
    },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::PHyperbolic { .. } => "PHyperbolic",
            Verdict::PParabolic { .. } => "PParabolic",
            Verdict::Inconclusive { .. } => "Inconclusive",
        }
    }

    pub fn evidence(&self) -> Option<&Evidence> {
        match self {
            Verdict::PHyperbolic { evidence, .. } | Verdict::PParabolic { evidence, .. } => Some(evidence),
            Verdict::Inconclusive { evidence, .. } => evidence.as_ref(),
        }
    }

    pub fn is_hyperbolic(&self) -> bool {
        matches!(self, Verdict::PHyperbolic { .. })
    }

    pub fn is_parabolic(&self) -> bool {
        matches!(self, Verdict::PParabolic { .. })
    }
}

pub fn classify(c: &Constellation, mode: Mode) -> Result<Verdict> {
    classify_with(c, mode, &CapacityOptions::default())
}

pub fn classify_with(c: &Constellation, mode: Mode, options: &CapacityOptions) -> Result<Verdict> {
    match mode {
        Mode::Intrinsic => classify_intrinsic(c, options),
        Mode::Extrinsic => classify_extrinsic(c, options),
    }
}

fn classify_intrinsic(c: &Constellation, options: &CapacityOptions) -> Result<Verdict> {
    if c.m() != c.n() {
        return Err(Error::config("/mode", format!("intrinsic mode needs n = m, got m = {}, n = {}", c.m(), c.n())));
    }
    if !c.bounds().is_intrinsic() {
        return Err(Error::config("/mode", "intrinsic mode needs g = 1, h = 0 and lambda = 0"));
    }
    let p = c.p();
    let exponent = f64::from(c.m() - 1) / (p - 1.0);
    let tail = inverse_warping_tail(c.model(), exponent, c.rho(), &options.tail);
    let cap_limit = match &tail {
        TailVerdict::Convergent { value, error } => {
            let cap = c.model().unit_sphere_area() * value.powf(1.0 - p);
            CapacityEstimate {
                value: cap,
                error_estimate: cap * (p - 1.0) * error / value,
                method: CapacityMethod::ExactModel,
                detail: None,
            }
        }
        TailVerdict::Divergent { witness } => CapacityEstimate {
            value: 0.0,
            error_estimate: 0.0,
            method: CapacityMethod::DivergentTail,
            detail: Some(witness.clone()),
        },
        TailVerdict::Unknown { reason } => {
            return Ok(Verdict::Inconclusive {
                reason: format!("tail of w^(-{exponent}) could not be classified: {reason}"),
                evidence: None,
            })
        }
    };
    let criterion = Criterion::IntrinsicVolumeGrowth;
    let evidence = Evidence {
        balance: None,
        tail,
        cap_limit,
    };
    Ok(if evidence.tail.is_convergent() {
        Verdict::PHyperbolic { criterion, evidence }
    } else {
        Verdict::PParabolic { criterion, evidence }
    })
}

fn classify_extrinsic(c: &Constellation, options: &CapacityOptions) -> Result<Verdict> {
    let annulus = Annulus::unbounded(c.rho())?;
    let balance = c.check_balanced(&annulus, options.balance_grid)?;
    if let BalanceCheck::ViolationAt { r, value } = balance {
        return Ok(Verdict::Inconclusive {
            reason: format!("balance fails at r = {r} with M(r) = {value}"),
            evidence: None,
        });
    }
    let (tail, cap_limit) = weight_tail(c, c.rho(), options)?;
    let evidence = Evidence {
        balance: Some(balance),
        tail,
        cap_limit,
    };
    Ok(match &evidence.tail {
        TailVerdict::Convergent { .. } => Verdict::PHyperbolic {
            criterion: Criterion::BalancedWeightTail,
            evidence,
        },
        TailVerdict::Divergent { witness } => Verdict::Inconclusive {
            reason: format!("weight integral diverges ({witness})"),
            evidence: Some(evidence),
        },
        TailVerdict::Unknown { reason } => Verdict::Inconclusive {
            reason: format!("weight tail undecided ({reason})"),
            evidence: Some(evidence),
        },
    })
}

/// Outcome of the curvature-pinching test for hyperbolic space forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HadamardCheck {
    /// `m h0 + (p - 2) lambda0 < (m - 1) sqrt(-b)` for every `p` in `[2, p_max]`.
    HyperbolicForPIn { low: f64, high: f64, margin: f64 },
    Fails { margin: f64 },
}

/// Tests `m h0 + (p_max - 2) lambda0 < (m - 1) sqrt(-b)` and, on success,
/// confirms through [`classify`] that the constellation with constant bounds
/// over the space form of curvature `b` is p-hyperbolic at
/// `p = 2, (2 + p_max) / 2, p_max`.
pub fn hadamard_check(m: u32, b: f64, h0: f64, lambda0: f64, p_max: f64) -> Result<HadamardCheck> {
    if !(b < 0.0) {
        return Err(Error::Precondition(format!("curvature must be negative, got {b}")));
    }
    if !(p_max >= 2.0) {
        return Err(Error::Precondition(format!("p range needs p_max >= 2, got {p_max}")));
    }
    let margin = f64::from(m - 1) * (-b).sqrt() - (f64::from(m) * h0 + (p_max - 2.0) * lambda0);
    if !(margin > 0.0) {
        return Ok(HadamardCheck::Fails { margin });
    }
    let model = ModelSpace::space_form(m, b)?;
    for p in [2.0, 0.5 * (2.0 + p_max), p_max] {
        let c = Constellation::new(m, p, model.clone(), Bounds::constant(h0, lambda0), 1.0)?;
        let verdict = classify(&c, Mode::Extrinsic)?;
        if !verdict.is_hyperbolic() {
            return Err(Error::Verification(format!(
                "pinching holds with margin {margin} but the classifier returned {} at p = {p}",
                verdict.label()
            )));
        }
    }
    Ok(HadamardCheck::HyperbolicForPIn {
        low: 2.0,
        high: p_max,
        margin,
    })
}

/// 2-hyperbolicity test `int_rho^inf G^m / w^(m-1) < inf` with
/// `G(r) = exp(int_rho^r h)`, valid when `h <= eta_w`.
pub fn mp3_2hyperbolic_check(model: &ModelSpace, h: &RadialExpr, rho: f64) -> Result<TailVerdict> {
    mp3_2hyperbolic_check_with(model, h, rho, &TailOptions::default())
}

pub fn mp3_2hyperbolic_check_with(model: &ModelSpace, h: &RadialExpr, rho: f64, options: &TailOptions) -> Result<TailVerdict> {
    let horizon = options.horizon(rho);
    let upper = horizon.min(model.warping().max_radius() * (1.0 - 1e-9));
    for r in balance_grid(rho, upper, crate::constellation::DEFAULT_BALANCE_GRID) {
        let hv = h.evaluate(r)?;
        let eta = model.eta(r)?;
        if hv - eta > 1e-12 * (1.0 + eta.abs()) {
            return Err(Error::HypothesisViolation { r, h: hv, eta });
        }
    }
    let log_g = CumulativeIntegral::new(|t| h.evaluate(t), rho, rho, 2.0 * horizon, options.quadrature)?;
    let m = f64::from(model.dimension());
    let integrand = |t: f64| Ok((m * log_g.at(t)? - (m - 1.0) * model.warping().ln_value(t)?).exp());
    Ok(classify_tail(integrand, rho, options))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub obstruction: bool,
    pub tail: TailVerdict,
    /// `(m - 1) sqrt(-b) - (p - 2) lambda0`; positive when the curvature
    /// condition holds.
    pub curvature_margin: f64,
    pub details: String,
}

/// Obstruction to a minimal immersion with bounded second fundamental form
/// into a space of curvature `b < 0`: both
/// `int^inf Vol(dB_r)^(-1/(p-1)) = inf` and `(p - 2) lambda0 < (m - 1) sqrt(-b)`.
pub fn immersion_obstruction(m: u32, boundary_volume: &RadialExpr, p: f64, lambda0: f64, b: f64) -> Result<ObstructionReport> {
    immersion_obstruction_with(m, boundary_volume, p, lambda0, b, 1.0, &TailOptions::default())
}

pub fn immersion_obstruction_with(
    m: u32,
    boundary_volume: &RadialExpr,
    p: f64,
    lambda0: f64,
    b: f64,
    rho: f64,
    options: &TailOptions,
) -> Result<ObstructionReport> {
    if !(p >= 2.0) {
        return Err(Error::Precondition(format!("exponent must satisfy p >= 2, got {p}")));
    }
    if !(lambda0 > 0.0) {
        return Err(Error::Precondition(format!("lambda0 must be positive, got {lambda0}")));
    }
    if !(b < 0.0) {
        return Err(Error::Precondition(format!("curvature must be negative, got {b}")));
    }
    let q = 1.0 / (p - 1.0);
    let tail = classify_tail(|t| Ok(boundary_volume.evaluate(t)?.powf(-q)), rho, options);
    let curvature_margin = f64::from(m - 1) * (-b).sqrt() - (p - 2.0) * lambda0;
    let curvature_ok = curvature_margin > 0.0;
    let (obstruction, details) = match &tail {
        TailVerdict::Divergent { witness } if curvature_ok => {
            (true, format!("volume tail diverges ({witness}) and curvature margin {curvature_margin} > 0"))
        }
        TailVerdict::Divergent { .. } => (false, format!("curvature condition fails (margin {curvature_margin})")),
        TailVerdict::Convergent { value, .. } => (false, format!("volume tail converges to {value}")),
        TailVerdict::Unknown { reason } => (false, format!("volume tail undecided: {reason}")),
    };
    Ok(ObstructionReport {
        obstruction,
        tail,
        curvature_margin,
        details,
    })
}
