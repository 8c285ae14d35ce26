//! Comparison constellations and their derived radial fields.
//!
//! A constellation bundles the dimensions `m <= n`, the exponent `p >= 2`, a
//! model space and three radial bounds: `g` on the tangency of the
//! submanifold to the radial direction, `h` on its radial mean convexity and
//! `lambda` on the radial component of its second fundamental form. All
//! downstream quantities come from
//!
//! ```text
//! M(r)      = (m + p - 2) eta_w(r) - m h(r) - (p - 2) lambda(r)
//! V(r)      = M(r) / ((p - 1) g(r)^2) - m eta_w(r)
//! Lambda(r) = w(r) exp(-int_l^r M(t) / ((p - 1) g(t)^2) dt)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::RadialExpr;
use crate::model::ModelSpace;
use crate::quadrature::{integrate_signed, CumulativeIntegral, QuadratureOptions, DEFAULT_DOUBLINGS};

/// Default number of balance samples.
pub const DEFAULT_BALANCE_GRID: usize = 4096;
/// Radius beyond which balance samples are log-spaced.
const LOG_SPACING_FROM: f64 = 10.0;
/// Values of `M` above this count as non-negative.
const BALANCE_SLACK: f64 = -1e-12;

/// Radial upper bounds `g`, `h`, `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub g: RadialExpr,
    pub h: RadialExpr,
    pub lambda: RadialExpr,
}

impl Bounds {
    /// `g = 1`, `h = 0`, `lambda = 0`: a model space compared with itself.
    pub fn intrinsic() -> Self {
        Self::constant(0.0, 0.0)
    }

    /// Constant convexity and second fundamental form bounds with `g = 1`.
    pub fn constant(h0: f64, lambda0: f64) -> Self {
        Self {
            g: RadialExpr::Const(1.0),
            h: RadialExpr::Const(h0),
            lambda: RadialExpr::Const(lambda0),
        }
    }

    pub fn is_intrinsic(&self) -> bool {
        self.g.constant_value() == Some(1.0)
            && self.h.constant_value() == Some(0.0)
            && self.lambda.constant_value() == Some(0.0)
    }
}

/// Annulus between the distance spheres of radii `rho < outer`; `outer` may be
/// `f64::INFINITY`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    rho: f64,
    outer: f64,
}

impl Annulus {
    pub fn new(rho: f64, outer: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Precondition(format!("inner radius must be positive, got {rho}")));
        }
        if !(outer > rho) {
            return Err(Error::Precondition(format!("annulus needs rho < R, got rho = {rho}, R = {outer}")));
        }
        Ok(Self { rho, outer })
    }

    pub fn unbounded(rho: f64) -> Result<Self> {
        Self::new(rho, f64::INFINITY)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn is_finite(&self) -> bool {
        self.outer.is_finite()
    }

    pub(crate) fn require_finite(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::Precondition("this operation needs a finite outer radius".into()))
        }
    }
}

/// Result of sampling the balance function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BalanceCheck {
    Ok,
    ViolationAt { r: f64, value: f64 },
}

impl BalanceCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, BalanceCheck::Ok)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    m: u32,
    n: u32,
    p: f64,
    model: ModelSpace,
    bounds: Bounds,
    rho: f64,
}

impl Constellation {
    pub fn new(n: u32, p: f64, model: ModelSpace, bounds: Bounds, rho: f64) -> Result<Self> {
        let m = model.dimension();
        if !(p >= 2.0 && p.is_finite()) {
            return Err(Error::Precondition(format!("exponent p must satisfy p >= 2, got {p}")));
        }
        if m > n {
            return Err(Error::Precondition(format!("submanifold dimension {m} exceeds ambient dimension {n}")));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Precondition(format!("inner radius rho must be positive, got {rho}")));
        }
        if rho >= model.warping().max_radius() {
            return Err(Error::Precondition(format!(
                "inner radius {rho} lies beyond the model's maximal radius {}",
                model.warping().max_radius()
            )));
        }
        Ok(Self {
            m,
            n,
            p,
            model,
            bounds,
            rho,
        })
    }

    /// The model space compared with itself: `n = m`, `g = 1`, `h = lambda = 0`.
    pub fn intrinsic(model: ModelSpace, p: f64, rho: f64) -> Result<Self> {
        let m = model.dimension();
        Self::new(m, p, model, Bounds::intrinsic(), rho)
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn model(&self) -> &ModelSpace {
        &self.model
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn is_intrinsic(&self) -> bool {
        self.m == self.n && self.bounds.is_intrinsic()
    }

    /// Same data with a different exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.n, p, self.model.clone(), self.bounds.clone(), self.rho)
    }

    /// Same data with a different inner radius.
    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new(self.n, self.p, self.model.clone(), self.bounds.clone(), rho)
    }

    /// Checks `0 < g <= 1` on `AXIOM_GRID` samples of `[rho, upper]`.
    pub fn check_tangency_bound(&self, upper: f64) -> Result<()> {
        let n = crate::model::AXIOM_GRID;
        let upper = upper.min(self.model.warping().max_radius()).max(self.rho);
        for i in 0..n {
            let r = self.rho + (upper - self.rho) * i as f64 / (n - 1) as f64;
            let g = self.bounds.g.evaluate(r)?;
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::Precondition(format!("tangency bound must satisfy 0 < g <= 1, g({r}) = {g}")));
            }
        }
        Ok(())
    }

    /// Balance function `M(r)`.
    pub fn balance(&self, r: f64) -> Result<f64> {
        let m = f64::from(self.m);
        let eta = self.model.eta(r)?;
        let h = self.bounds.h.evaluate(r)?;
        let lambda = self.bounds.lambda.evaluate(r)?;
        Ok((m + self.p - 2.0) * eta - m * h - (self.p - 2.0) * lambda)
    }

    /// `M(r) / ((p - 1) g(r)^2)`, the integrand in the exponent of `Lambda`.
    pub fn exponent_integrand(&self, r: f64) -> Result<f64> {
        let g = self.bounds.g.evaluate(r)?;
        if g == 0.0 {
            return Err(Error::domain(r, format!("tangency bound {} vanishes", self.bounds.g)));
        }
        Ok(self.balance(r)? / ((self.p - 1.0) * g * g))
    }

    /// Radial drift coefficient `V(r)`.
    pub fn drift_coefficient(&self, r: f64) -> Result<f64> {
        Ok(self.exponent_integrand(r)? - f64::from(self.m) * self.model.eta(r)?)
    }

    /// Coefficient of `psi'` in the radial drifted Laplacian,
    /// `M / ((p - 1) g^2) - eta_w`.
    pub fn first_order_coefficient(&self, r: f64) -> Result<f64> {
        Ok(self.exponent_integrand(r)? - self.model.eta(r)?)
    }

    /// Samples `M` on `grid_size` points of `[rho, min(R, horizon)]`.
    ///
    /// The grid is uniform up to r = 10 and log-spaced beyond.
    pub fn check_balanced_until(&self, annulus: &Annulus, grid_size: usize, horizon: f64) -> Result<BalanceCheck> {
        let upper = annulus.outer().min(horizon);
        let max_radius = self.model.warping().max_radius();
        let upper = if upper >= max_radius { max_radius * (1.0 - 1e-9) } else { upper };
        for r in balance_grid(annulus.rho(), upper, grid_size.max(2)) {
            let value = self.balance(r)?;
            if value < BALANCE_SLACK {
                return Ok(BalanceCheck::ViolationAt { r, value });
            }
        }
        Ok(BalanceCheck::Ok)
    }

    pub fn check_balanced(&self, annulus: &Annulus, grid_size: usize) -> Result<BalanceCheck> {
        let horizon = annulus.rho() * 2f64.powi(DEFAULT_DOUBLINGS as i32);
        self.check_balanced_until(annulus, grid_size, horizon)
    }

    /// `Lambda(r)` normalised so that `Lambda(lower_limit) = w(lower_limit)`.
    pub fn lambda_weight(&self, r: f64, lower_limit: f64) -> Result<f64> {
        let exponent = integrate_signed(
            |t| self.exponent_integrand(t),
            lower_limit,
            r,
            &QuadratureOptions::default(),
        )?;
        Ok((self.model.warping().ln_value(r)? - exponent.value).exp())
    }

    /// `Lambda` with its exponent tabulated over `[lo, hi]` for repeated evaluation.
    pub fn weight(&self, lower_limit: f64, lo: f64, hi: f64, options: QuadratureOptions) -> Result<Weight<'_>> {
        let lo = lo.min(lower_limit);
        let cumulative = CumulativeIntegral::new(|t| self.exponent_integrand(t), lower_limit, lo, hi, options)?;
        Ok(Weight {
            constellation: self,
            cumulative,
            lower_limit,
        })
    }
}

/// Tabulated `Lambda` for one choice of lower limit.
pub struct Weight<'a> {
    constellation: &'a Constellation,
    cumulative: CumulativeIntegral<'a>,
    lower_limit: f64,
}

impl Weight<'_> {
    pub fn lower_limit(&self) -> f64 {
        self.lower_limit
    }

    pub fn ln_value(&self, r: f64) -> Result<f64> {
        Ok(self.constellation.model.warping().ln_value(r)? - self.cumulative.at(r)?)
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        let v = self.ln_value(r)?.exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(r, "weight overflow"))
        }
    }
}

/// Sample radii for the balance check.
pub fn balance_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= LOG_SPACING_FROM || lo >= LOG_SPACING_FROM {
        if hi / lo > 100.0 && lo >= LOG_SPACING_FROM {
            return geometric(lo, hi, n);
        }
        return uniform(lo, hi, n);
    }
    let n_uniform = (n / 2).max(2);
    let n_log = (n - n_uniform).max(2);
    let mut grid = uniform(lo, LOG_SPACING_FROM, n_uniform);
    grid.extend(geometric(LOG_SPACING_FROM, hi, n_log + 1).into_iter().skip(1));
    grid
}

fn uniform(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo * (ratio * i as f64 / (n - 1) as f64).exp() })
        .collect()
}
