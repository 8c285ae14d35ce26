//! Rotationally symmetric model spaces `[0, L) x_w S^(m-1)`.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, BinOp, Func, RadialExpr};
use crate::special::unit_sphere_area;

/// Smallest radius ever evaluated; the center itself is singular for `eta`.
pub const MIN_RADIUS: f64 = 1e-6;

/// Number of samples used when checking the axioms of a custom warping.
pub const AXIOM_GRID: usize = 1024;

/// Warping function of a model space.
#[derive(Debug, Clone, PartialEq)]
pub enum WarpingFunction {
    /// Simply connected space form of constant curvature `b`.
    SpaceForm { b: f64 },
    /// User supplied warping together with its first two derivatives.
    Custom {
        w: RadialExpr,
        dw: RadialExpr,
        d2w: RadialExpr,
        family: Option<GrowthFamily>,
    },
}

/// Large-r behaviour of a warping function that admits an exact tail analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrowthFamily {
    /// `w(r) = coeff * r^exponent`.
    Power { coeff: f64, exponent: f64 },
    /// `w(r) = sinh(rate * r) / scale`.
    Exponential { rate: f64, scale: f64 },
    /// Positive curvature space form; the model closes up at `pi / sqrt(b)`.
    Compact { b: f64 },
}

impl WarpingFunction {
    pub fn space_form(b: f64) -> Self {
        WarpingFunction::SpaceForm { b }
    }

    pub fn custom(w: RadialExpr) -> Self {
        let dw = w.differentiate();
        let d2w = dw.differentiate();
        let family = recognise(&w);
        WarpingFunction::Custom { w, dw, d2w, family }
    }

    pub fn from_formula(formula: &str) -> Result<Self> {
        Ok(Self::custom(expr::parse(formula)?))
    }

    /// Upper end of the interval where the warping is positive (finite only
    /// for positively curved space forms).
    pub fn max_radius(&self) -> f64 {
        match self {
            WarpingFunction::SpaceForm { b } if *b > 0.0 => PI / b.sqrt(),
            _ => f64::INFINITY,
        }
    }

    /// The warping as an expression (`sinh(k*r)/k`, `r`, `sin(k*r)/k` for space forms).
    pub fn expression(&self) -> RadialExpr {
        match self {
            WarpingFunction::Custom { w, .. } => w.clone(),
            WarpingFunction::SpaceForm { b } => {
                if *b == 0.0 {
                    return RadialExpr::Var;
                }
                let k = b.abs().sqrt();
                let func = if *b < 0.0 { Func::Sinh } else { Func::Sin };
                let arg = expr::binary(BinOp::Mul, RadialExpr::Const(k), RadialExpr::Var);
                expr::binary(BinOp::Div, expr::call(func, arg), RadialExpr::Const(k))
            }
        }
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r > 0.0) || r >= self.max_radius() {
            return Err(Error::domain(r, format!("warping outside its working interval (0, {})", self.max_radius())));
        }
        Ok(())
    }

    /// `(w, w', w'')` at `r`.
    pub fn jet(&self, r: f64) -> Result<(f64, f64, f64)> {
        self.check_radius(r)?;
        let jet = match self {
            WarpingFunction::SpaceForm { b } => {
                let b = *b;
                if b == 0.0 {
                    (r, 1.0, 0.0)
                } else if b < 0.0 {
                    let k = (-b).sqrt();
                    let s = (k * r).sinh();
                    (s / k, (k * r).cosh(), k * s)
                } else {
                    let k = b.sqrt();
                    let s = (k * r).sin();
                    (s / k, (k * r).cos(), -k * s)
                }
            }
            WarpingFunction::Custom { w, dw, d2w, .. } => (w.evaluate(r)?, dw.evaluate(r)?, d2w.evaluate(r)?),
        };
        if jet.0.is_finite() && jet.1.is_finite() && jet.2.is_finite() {
            Ok(jet)
        } else {
            Err(Error::domain(r, "warping overflow"))
        }
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        let v = match self {
            WarpingFunction::SpaceForm { b } => {
                let b = *b;
                if b == 0.0 {
                    r
                } else if b < 0.0 {
                    let k = (-b).sqrt();
                    (k * r).sinh() / k
                } else {
                    let k = b.sqrt();
                    (k * r).sin() / k
                }
            }
            WarpingFunction::Custom { w, .. } => w.evaluate(r)?,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::domain(r, "warping overflow"))
        }
    }

    /// `ln w(r)`, evaluated without overflow for exponentially growing warpings.
    pub fn ln_value(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        match self.exponential_rate() {
            Some((k, scale)) => Ok(ln_sinh(k * r) - scale.ln()),
            None => {
                let w = self.value(r)?;
                if w > 0.0 {
                    Ok(w.ln())
                } else {
                    Err(Error::domain(r, "log of non-positive warping"))
                }
            }
        }
    }

    /// `(rate, scale)` when `w = sinh(rate r) / scale`.
    fn exponential_rate(&self) -> Option<(f64, f64)> {
        match self {
            WarpingFunction::SpaceForm { b } if *b < 0.0 => {
                let k = (-b).sqrt();
                Some((k, k))
            }
            WarpingFunction::Custom {
                family: Some(GrowthFamily::Exponential { rate, scale }),
                ..
            } => Some((*rate, *scale)),
            _ => None,
        }
    }

    /// Mean curvature function `w'/w` of the distance spheres.
    pub fn eta(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        match self {
            WarpingFunction::SpaceForm { b } => {
                let b = *b;
                Ok(if b == 0.0 {
                    1.0 / r
                } else if b < 0.0 {
                    let k = (-b).sqrt();
                    k / (k * r).tanh()
                } else {
                    let k = b.sqrt();
                    k / (k * r).tan()
                })
            }
            WarpingFunction::Custom {
                family: Some(GrowthFamily::Exponential { rate, .. }),
                ..
            } => Ok(rate / (rate * r).tanh()),
            WarpingFunction::Custom { w, dw, .. } => {
                let wv = w.evaluate(r)?;
                if wv == 0.0 {
                    return Err(Error::domain(r, "eta where the warping vanishes"));
                }
                let eta = dw.evaluate(r)? / wv;
                if eta.is_finite() {
                    Ok(eta)
                } else {
                    Err(Error::domain(r, "eta overflow"))
                }
            }
        }
    }

    /// Exact large-r family, if the warping is recognised as one.
    pub fn growth_family(&self) -> Option<GrowthFamily> {
        match self {
            WarpingFunction::SpaceForm { b } => Some(if *b == 0.0 {
                GrowthFamily::Power { coeff: 1.0, exponent: 1.0 }
            } else if *b < 0.0 {
                let k = (-b).sqrt();
                GrowthFamily::Exponential { rate: k, scale: k }
            } else {
                GrowthFamily::Compact { b: *b }
            }),
            WarpingFunction::Custom { w, .. } => recognise(w),
        }
    }

    /// Numerical check of `w(0) = 0`, `w'(0) = 1` and `w > 0` on `[MIN_RADIUS, upper]`.
    ///
    /// Returns warnings for the derivative conditions; non-positivity on the
    /// grid is an error.
    pub fn check_axioms(&self, upper: f64) -> Result<Vec<String>> {
        let WarpingFunction::Custom { w, dw, .. } = self else {
            if upper >= self.max_radius() {
                return Err(Error::Precondition(format!(
                    "working interval reaches {upper}, beyond the space form's maximal radius {}",
                    self.max_radius()
                )));
            }
            return Ok(Vec::new());
        };
        let mut warnings = Vec::new();
        match w.evaluate(0.0) {
            Ok(v) if v.abs() <= 1e-9 => {}
            Ok(v) => warnings.push(format!("w(0) = {v}, expected 0")),
            Err(e) => warnings.push(format!("w(0) not evaluable: {e}")),
        }
        match dw.evaluate(MIN_RADIUS) {
            Ok(v) if (v - 1.0).abs() <= 1e-6 => {}
            Ok(v) => warnings.push(format!("w'(0) ~ {v}, expected 1")),
            Err(e) => warnings.push(format!("w'(0) not evaluable: {e}")),
        }
        let upper = upper.max(MIN_RADIUS);
        for r in axiom_grid(MIN_RADIUS, upper) {
            let v = w.evaluate(r).or_else(|e| match e {
                // overflow to +inf still means positive
                Error::Domain { .. } if r > 1.0 => Ok(f64::MAX),
                e => Err(e),
            })?;
            if v <= 0.0 {
                return Err(Error::Precondition(format!("warping function must be positive, w({r}) = {v}")));
            }
        }
        Ok(warnings)
    }
}

fn axiom_grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let n = AXIOM_GRID;
    let ratio = hi / lo;
    (0..n).map(move |i| {
        let t = i as f64 / (n - 1) as f64;
        if ratio > 100.0 {
            lo * ratio.powf(t)
        } else {
            lo + (hi - lo) * t
        }
    })
}

/// `ln sinh(x)` for `x > 0` without overflow.
fn ln_sinh(x: f64) -> f64 {
    // sinh(x) = e^x (1 - e^{-2x}) / 2
    x + (-(-2.0 * x).exp_m1()).ln() - LN_2
}

fn recognise(w: &RadialExpr) -> Option<GrowthFamily> {
    use RadialExpr::{Binary, Call, Const, Var};
    match w {
        Var => Some(GrowthFamily::Power { coeff: 1.0, exponent: 1.0 }),
        Binary(BinOp::Pow, base, exp) if **base == Var => match **exp {
            Const(k) if k > 0.0 => Some(GrowthFamily::Power { coeff: 1.0, exponent: k }),
            _ => None,
        },
        Call(Func::Sinh, arg) => linear_rate(arg).map(|rate| GrowthFamily::Exponential { rate, scale: 1.0 }),
        Binary(BinOp::Mul, a, b) => {
            let (c, rest) = match (a.as_ref(), b.as_ref()) {
                (Const(c), rest) | (rest, Const(c)) => (*c, rest),
                _ => return None,
            };
            scale(recognise(rest)?, c)
        }
        Binary(BinOp::Div, a, b) => match b.as_ref() {
            Const(c) if *c != 0.0 => scale(recognise(a)?, 1.0 / c),
            _ => None,
        },
        _ => None,
    }
}

fn linear_rate(arg: &RadialExpr) -> Option<f64> {
    use RadialExpr::{Binary, Const, Var};
    match arg {
        Var => Some(1.0),
        Binary(BinOp::Mul, a, b) => match (a.as_ref(), b.as_ref()) {
            (Const(k), Var) | (Var, Const(k)) if *k > 0.0 => Some(*k),
            _ => None,
        },
        _ => None,
    }
}

fn scale(family: GrowthFamily, c: f64) -> Option<GrowthFamily> {
    if !(c > 0.0) {
        return None;
    }
    match family {
        GrowthFamily::Power { coeff, exponent } => Some(GrowthFamily::Power { coeff: coeff * c, exponent }),
        GrowthFamily::Exponential { rate, scale } => Some(GrowthFamily::Exponential { rate, scale: scale / c }),
        GrowthFamily::Compact { .. } => None,
    }
}

/// A w-model space `M^m_w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    m: u32,
    warping: WarpingFunction,
}

impl ModelSpace {
    pub fn new(m: u32, warping: WarpingFunction) -> Result<Self> {
        if m < 2 {
            return Err(Error::Precondition(format!("model dimension must be at least 2, got {m}")));
        }
        Ok(Self { m, warping })
    }

    pub fn space_form(m: u32, b: f64) -> Result<Self> {
        Self::new(m, WarpingFunction::space_form(b))
    }

    pub fn dimension(&self) -> u32 {
        self.m
    }

    pub fn warping(&self) -> &WarpingFunction {
        &self.warping
    }

    pub fn warping_value(&self, r: f64) -> Result<f64> {
        self.warping.value(r)
    }

    pub fn eta(&self, r: f64) -> Result<f64> {
        self.warping.eta(r)
    }

    /// Radial sectional curvature `-w''(r)/w(r)`.
    pub fn radial_curvature(&self, r: f64) -> Result<f64> {
        let (w, _, d2w) = self.warping.jet(r)?;
        if w == 0.0 {
            return Err(Error::domain(r, "radial curvature where the warping vanishes"));
        }
        Ok(-d2w / w)
    }

    /// Area of the distance sphere of radius `r`, `omega_(m-1) w(r)^(m-1)`.
    pub fn sphere_area(&self, r: f64) -> Result<f64> {
        let w = self.warping.value(r)?;
        Ok(unit_sphere_area(self.m) * w.powi(self.m as i32 - 1))
    }

    pub fn unit_sphere_area(&self) -> f64 {
        unit_sphere_area(self.m)
    }
}

/// Config representation of a warping function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WarpingSpec {
    SpaceForm { b: f64 },
    Expression { formula: String },
}

impl WarpingSpec {
    pub fn build(&self) -> Result<WarpingFunction> {
        match self {
            WarpingSpec::SpaceForm { b } => {
                if !b.is_finite() {
                    return Err(Error::Precondition(format!("space form curvature must be finite, got {b}")));
                }
                Ok(WarpingFunction::space_form(*b))
            }
            WarpingSpec::Expression { formula } => WarpingFunction::from_formula(formula),
        }
    }
}

impl From<&WarpingFunction> for WarpingSpec {
    fn from(w: &WarpingFunction) -> Self {
        match w {
            WarpingFunction::SpaceForm { b } => WarpingSpec::SpaceForm { b: *b },
            WarpingFunction::Custom { w, .. } => WarpingSpec::Expression { formula: w.to_string() },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn sf(m: u32, b: f64) -> ModelSpace {
        ModelSpace::space_form(m, b).unwrap()
    }

    fn custom(m: u32, formula: &str) -> ModelSpace {
        ModelSpace::new(m, WarpingFunction::from_formula(formula).unwrap()).unwrap()
    }

    #[test]
    fn warping_values() {
        assert_eq!(sf(3, 0.0).warping_value(2.0).unwrap(), 2.0);
        assert_relative_eq!(sf(3, -1.0).warping_value(1.0).unwrap(), 1.1752011936438014, max_relative = 1e-15);
        assert_relative_eq!(sf(3, 1.0).warping_value(FRAC_PI_2).unwrap(), 1.0, max_relative = 1e-15);
        assert!(matches!(sf(3, 1.0).warping_value(PI), Err(Error::Domain { .. })));
        assert!(sf(3, 0.0).warping_value(0.0).is_err());
    }

    #[test]
    fn eta_values() {
        assert_eq!(sf(3, 0.0).eta(2.0).unwrap(), 0.5);
        assert_relative_eq!(sf(3, -1.0).eta(1.0).unwrap(), 1.3130352854993312, max_relative = 1e-15);
        assert!(sf(3, 1.0).eta(FRAC_PI_2).unwrap().abs() < 1e-15);
        assert!(custom(3, "r - 1").eta(1.0).is_err());
    }

    #[test]
    fn radial_curvature_values() {
        for r in [0.1, 1.0, 7.5] {
            assert_relative_eq!(sf(3, -1.0).radial_curvature(r).unwrap(), -1.0, max_relative = 1e-14);
        }
        assert_eq!(custom(3, "r").radial_curvature(1.0).unwrap(), 0.0);
        assert_relative_eq!(custom(3, "r + r^3").radial_curvature(1.0).unwrap(), -3.0, max_relative = 1e-15);
    }

    #[test]
    fn space_form_ode_on_grid() {
        for b in [-1.0, 0.0, 0.25, 1.0] {
            let m = sf(3, b);
            let upper = if b > 0.0 { 0.99 * PI / b.sqrt() } else { 10.0 };
            for i in 1..200 {
                let r = upper * i as f64 / 200.0;
                let (w, _, d2w) = m.warping().jet(r).unwrap();
                assert!((d2w + b * w).abs() <= 1e-9, "b={b} r={r}");
                assert!((m.radial_curvature(r).unwrap() - b).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn eta_is_log_derivative() {
        for model in [sf(3, -1.0), sf(3, 0.0), sf(4, 0.25), custom(3, "r + r^3"), custom(2, "sinh(r)")] {
            for i in 1..60 {
                let r = 0.1 * i as f64;
                let h = 1e-6;
                let fd = (model.warping_value(r + h).unwrap().ln() - model.warping_value(r - h).unwrap().ln()) / (2.0 * h);
                assert!((model.eta(r).unwrap() - fd).abs() <= 1e-7 * (1.0 + fd.abs()), "r={r}");
            }
        }
    }

    #[test]
    fn ln_value_survives_large_radii() {
        let w = WarpingFunction::space_form(-1.0);
        assert_relative_eq!(w.ln_value(1.0).unwrap(), 1.1752011936438014_f64.ln(), max_relative = 1e-14);
        let big = w.ln_value(2000.0).unwrap();
        assert_relative_eq!(big, 2000.0 - LN_2, max_relative = 1e-15);
        assert!(w.value(2000.0).is_err());
    }

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(custom(3, "r").sphere_area(1.0).unwrap(), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(custom(2, "r").sphere_area(2.0).unwrap(), 4.0 * PI, max_relative = 1e-14);
        for m in 2..7 {
            assert_relative_eq!(
                sf(m, 1.0).sphere_area(FRAC_PI_2).unwrap(),
                unit_sphere_area(m),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn sphere_area_increases_where_w_increases() {
        let model = sf(4, -0.5);
        let mut last = 0.0;
        for i in 1..100 {
            let a = model.sphere_area(0.05 * i as f64).unwrap();
            assert!(a > last);
            last = a;
        }
    }

    #[test]
    fn custom_axioms() {
        assert!(WarpingFunction::from_formula("sinh(r)").unwrap().check_axioms(10.0).unwrap().is_empty());
        let warn = WarpingFunction::from_formula("2*r").unwrap().check_axioms(10.0).unwrap();
        assert_eq!(warn.len(), 1);
        let warn = WarpingFunction::from_formula("r + 1").unwrap().check_axioms(10.0).unwrap();
        assert_eq!(warn.len(), 1);
        assert!(WarpingFunction::from_formula("r - r^2").unwrap().check_axioms(10.0).is_err());
        assert!(WarpingFunction::space_form(1.0).check_axioms(4.0).is_err());
    }

    #[test]
    fn growth_families() {
        let fam = |s: &str| WarpingFunction::from_formula(s).unwrap().growth_family();
        assert_eq!(fam("r"), Some(GrowthFamily::Power { coeff: 1.0, exponent: 1.0 }));
        assert_eq!(fam("2*r^3"), Some(GrowthFamily::Power { coeff: 2.0, exponent: 3.0 }));
        assert_eq!(fam("sinh(r)"), Some(GrowthFamily::Exponential { rate: 1.0, scale: 1.0 }));
        assert_eq!(fam("sinh(2*r)/2"), Some(GrowthFamily::Exponential { rate: 2.0, scale: 2.0 }));
        assert_eq!(fam("r + r^3"), None);
        assert_eq!(fam("tanh(r)"), None);
    }

    #[test]
    fn space_form_expression_matches_closed_form() {
        for b in [-4.0, -1.0, 0.0, 0.5] {
            let w = WarpingFunction::space_form(b);
            let e = w.expression();
            for r in [0.3, 1.0, 1.9] {
                assert_relative_eq!(e.evaluate(r).unwrap(), w.value(r).unwrap(), max_relative = 1e-14);
            }
        }
    }
}
