//! Self-verification suite run by the `verify` task.
//!
//! Each check pits a closed form against an independent route (direct
//! minimisation of the discretised energy, finite-difference residuals,
//! exact tail exponents) or checks a structural property (normalisation
//! invariance, monotonicity, determinism). Outcomes carry no timing so that
//! repeated runs are byte-identical.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{
    discrete_energy_oracle, dirichlet_potential_with, drifted_capacity_with, exact_model_pcapacity_with,
    intrinsic_boundary_flux, ode_residual_with, pcap_lower_bound_with, potential_table, CapacityOptions,
};
use crate::classifier::{classify_with, Mode, Verdict};
use crate::config::Numerics;
use crate::constellation::{Annulus, Bounds, Constellation};
use crate::error::Result;
use crate::model::{ModelSpace, WarpingFunction};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CriterionOutcome {
    fn new(id: u32, name: &'static str, passed: bool, measured: f64, threshold: f64, detail: String) -> Self {
        Self {
            id,
            name,
            passed,
            measured,
            threshold,
            detail,
        }
    }

    fn failed(id: u32, name: &'static str, error: impl std::fmt::Display) -> Self {
        Self::new(id, name, false, f64::NAN, f64::NAN, format!("error: {error}"))
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn model(m: u32, formula: &str) -> Result<ModelSpace> {
    ModelSpace::new(m, WarpingFunction::from_formula(formula)?)
}

fn intrinsic(m: u32, formula: &str, p: f64, rho: f64) -> Result<Constellation> {
    Constellation::intrinsic(model(m, formula)?, p, rho)
}

/// The `(m, p, w)` grid shared by the oracle and lower-bound checks.
pub fn oracle_tuples() -> Vec<(u32, f64, &'static str)> {
    let mut tuples = Vec::new();
    for m in [2, 3, 4] {
        for p in [2.0, 2.5, 3.0] {
            for w in ["r", "sinh(r)"] {
                tuples.push((m, p, w));
            }
        }
    }
    tuples
}

/// Runs every criterion; results are ordered by id.
pub fn run_suite(seed: u64, numerics: &Numerics) -> Vec<CriterionOutcome> {
    let options = numerics.capacity_options();
    let checks: Vec<Box<dyn Fn() -> CriterionOutcome + Send + Sync + '_>> = vec![
        Box::new(|| newtonian_annulus(&options)),
        Box::new(|| oracle_equivalence(&options, numerics.oracle_nodes)),
        Box::new(|| residual_order(&options)),
        Box::new(|| intrinsic_power_law(&options)),
        Box::new(|| pinching_end_to_end(&options, seed)),
        Box::new(|| lower_bound_consistency(&options)),
        Box::new(|| normalisation_invariance(&options)),
        Box::new(|| monotonicity(&options)),
        Box::new(|| determinism(&options)),
    ];
    checks.par_iter().map(|check| check()).collect()
}

fn newtonian_annulus(options: &CapacityOptions) -> CriterionOutcome {
    const NAME: &str = "newtonian-annulus";
    let run = || -> Result<CriterionOutcome> {
        let c = intrinsic(3, "r", 2.0, 1.0)?;
        let cap = drifted_capacity_with(&c, &Annulus::new(1.0, 2.0)?, options)?;
        let err = relative(cap.value, 8.0 * PI);
        Ok(CriterionOutcome::new(1, NAME, err <= 1e-8, err, 1e-8, format!("capacity {:.12}", cap.value)))
    };
    run().unwrap_or_else(|e| CriterionOutcome::failed(1, NAME, e))
}

fn oracle_equivalence(options: &CapacityOptions, nodes: usize) -> CriterionOutcome {
    const NAME: &str = "oracle-equivalence";
    let a = match Annulus::new(1.0, 2.0) {
        Ok(a) => a,
        Err(e) => return CriterionOutcome::failed(2, NAME, e),
    };
    let errors: Result<Vec<f64>> = oracle_tuples()
        .par_iter()
        .map(|&(m, p, w)| {
            let model = model(m, w)?;
            let exact = exact_model_pcapacity_with(&model, p, &a, options)?.value;
            let oracle = discrete_energy_oracle(&model, p, &a, nodes)?.value;
            Ok(relative(oracle, exact))
        })
        .collect();
    match errors {
        Ok(errors) => {
            let worst = errors.iter().copied().fold(0.0, f64::max);
            CriterionOutcome::new(2, NAME, worst <= 0.01, worst, 0.01, format!("{} tuples, {nodes} nodes", errors.len()))
        }
        Err(e) => CriterionOutcome::failed(2, NAME, e),
    }
}

/// Cases for the residual order test. The three-point scheme is exact on
/// `a + b / r`, so the flat `m = 3, p = 2` case is replaced by `m = 2` and
/// `m = 4`.
pub fn residual_cases() -> Vec<(u32, &'static str, f64)> {
    vec![(2, "r", 2.0), (4, "r", 2.0), (3, "r", 3.0), (3, "sinh(r)", 2.0), (3, "sinh(r)", 3.0)]
}

fn residual_order(options: &CapacityOptions) -> CriterionOutcome {
    const NAME: &str = "ode-residual-order";
    let run = || -> Result<CriterionOutcome> {
        let a = Annulus::new(1.0, 2.0)?;
        let mut worst = f64::INFINITY;
        for (m, w, p) in residual_cases() {
            let c = intrinsic(m, w, p, 1.0)?;
            let coarse = ode_residual_with(&c, &a, 1024, options)?;
            let fine = ode_residual_with(&c, &a, 2048, options)?;
            worst = worst.min(coarse / fine);
        }
        Ok(CriterionOutcome::new(3, NAME, worst >= 3.5, worst, 3.5, "minimum ratio at 1024 -> 2048 nodes".into()))
    };
    run().unwrap_or_else(|e| CriterionOutcome::failed(3, NAME, e))
}

fn intrinsic_power_law(options: &CapacityOptions) -> CriterionOutcome {
    const NAME: &str = "intrinsic-power-law";
    let run = || -> Result<CriterionOutcome> {
        let mut wrong = 0usize;
        let mut unknown = 0usize;
        let mut total = 0usize;
        for m in 2..=6u32 {
            for k in 0..=8 {
                let p = 2.0 + 0.5 * f64::from(k);
                let c = Constellation::intrinsic(ModelSpace::new(m, WarpingFunction::from_formula("r")?)?, p, 1.0)?;
                let verdict = classify_with(&c, Mode::Intrinsic, options)?;
                total += 1;
                match verdict {
                    Verdict::Inconclusive { .. } => unknown += 1,
                    v if v.is_parabolic() != (p >= f64::from(m)) => wrong += 1,
                    _ => {}
                }
            }
        }
        let bad = (wrong + unknown) as f64;
        Ok(CriterionOutcome::new(
            4,
            NAME,
            bad == 0.0,
            bad,
            0.0,
            format!("{total} cases, {wrong} misclassified, {unknown} inconclusive"),
        ))
    };
    run().unwrap_or_else(|e| CriterionOutcome::failed(4, NAME, e))
}

/// Random pinching data: `(m, b, h0, lambda0, p_max)`.
pub type PinchingTuple = (u32, f64, f64, f64, f64);

/// Tuples with `m h0 + (p_max - 2) lambda0 < (m - 1) sqrt(-b)`, and tuples
/// where `h0` is large enough that balance fails at large radii for every
/// `p` in `[2, p_max]`.
pub fn pinching_tuples(seed: u64, count: usize) -> (Vec<PinchingTuple>, Vec<PinchingTuple>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut good = Vec::with_capacity(count);
    let mut bad = Vec::with_capacity(count);
    for _ in 0..count {
        let m = rng.random_range(2..=6u32);
        let b = -rng.random_range(0.25..4.0);
        let p_max = rng.random_range(2.1..6.0);
        let k = f64::sqrt(-b);
        let budget = f64::from(m - 1) * k * rng.random_range(0.05..0.95);
        let split = rng.random_range(0.0..1.0);
        let h0 = split * budget / f64::from(m);
        let lambda0 = (1.0 - split) * budget / (p_max - 2.0);
        good.push((m, b, h0, lambda0, p_max));
    }
    for _ in 0..count {
        let m = rng.random_range(2..=6u32);
        let b = -rng.random_range(0.25..4.0);
        let p_max = rng.random_range(2.1..6.0);
        let k = f64::sqrt(-b);
        let h0 = (f64::from(m) + p_max - 2.0) * k / f64::from(m) * rng.random_range(1.1..2.0);
        let lambda0 = rng.random_range(0.0..1.0);
        bad.push((m, b, h0, lambda0, p_max));
    }
    (good, bad)
}

fn pinching_end_to_end(options: &CapacityOptions, seed: u64) -> CriterionOutcome {
    const NAME: &str = "pinching-end-to-end";
    let (good, bad) = pinching_tuples(seed, 20);
    let classify_at = |&(m, b, h0, lambda0, p_max): &PinchingTuple| -> Result<Vec<Verdict>> {
        let model = ModelSpace::space_form(m, b)?;
        [2.0, p_max]
            .iter()
            .map(|&p| {
                let c = Constellation::new(m, p, model.clone(), Bounds::constant(h0, lambda0), 1.0)?;
                classify_with(&c, Mode::Extrinsic, options)
            })
            .collect()
    };
    let good: Result<Vec<Vec<Verdict>>> = good.par_iter().map(classify_at).collect();
    let bad: Result<Vec<Vec<Verdict>>> = bad.par_iter().map(classify_at).collect();
    match (good, bad) {
        (Ok(good), Ok(bad)) => {
            let missed = good.iter().flatten().filter(|v| !v.is_hyperbolic()).count();
            let wrong = bad
                .iter()
                .flatten()
                .filter(|v| !matches!(v, Verdict::Inconclusive { .. }))
                .count();
            let failures = (missed + wrong) as f64;
            CriterionOutcome::new(
                5,
                NAME,
                failures == 0.0,
                failures,
                0.0,
                format!("seed {seed}: {missed} pinched cases not hyperbolic, {wrong} unbalanced cases not inconclusive"),
            )
        }
        (Err(e), _) | (_, Err(e)) => CriterionOutcome::failed(5, NAME, e),
    }
}

fn lower_bound_consistency(options: &CapacityOptions) -> CriterionOutcome {
    const NAME: &str = "lower-bound-consistency";
    let run = || -> Result<CriterionOutcome> {
        let a = Annulus::new(1.0, 2.0)?;
        let mut worst_excess = f64::NEG_INFINITY;
        let mut worst_equality = 0.0_f64;
        for (m, p, w) in oracle_tuples() {
            let c = intrinsic(m, w, p, 1.0)?;
            let flux = intrinsic_boundary_flux(&c, 1.0)?;
            let bound = pcap_lower_bound_with(&c, &a, flux, options)?.value;
            let exact = exact_model_pcapacity_with(c.model(), p, &a, options)?.value;
            worst_excess = worst_excess.max((bound - exact) / exact);
            if p == 2.0 {
                worst_equality = worst_equality.max(relative(bound, exact));
            }
        }
        let passed = worst_excess <= 1e-9 && worst_equality <= 1e-8;
        Ok(CriterionOutcome::new(
            6,
            NAME,
            passed,
            worst_excess,
            1e-9,
            format!("max relative p = 2 gap {worst_equality:.3e}"),
        ))
    };
    run().unwrap_or_else(|e| CriterionOutcome::failed(6, NAME, e))
}

/// Constellations for the invariance and monotonicity checks, with their
/// classification mode.
pub fn representative_constellations(rho: f64) -> Result<Vec<(Constellation, Mode)>> {
    let hyperbolic = |m| ModelSpace::space_form(m, -1.0);
    Ok(vec![
        (intrinsic(3, "r", 2.0, rho)?, Mode::Intrinsic),
        (intrinsic(2, "r", 3.0, rho)?, Mode::Intrinsic),
        (Constellation::intrinsic(hyperbolic(3)?, 2.5, rho)?, Mode::Intrinsic),
        (Constellation::new(4, 3.0, hyperbolic(3)?, Bounds::constant(0.1, 0.2), rho)?, Mode::Extrinsic),
        (Constellation::new(5, 2.0, ModelSpace::space_form(4, 0.0)?, Bounds::constant(0.0, 0.5), rho)?, Mode::Extrinsic),
        (intrinsic(4, "r + r^3", 2.0, rho)?, Mode::Extrinsic),
    ])
}

fn normalisation_invariance(options: &CapacityOptions) -> CriterionOutcome {
    const NAME: &str = "normalisation-invariance";
    let run = || -> Result<CriterionOutcome> {
        let rho = 1.5;
        let a = Annulus::new(rho, 3.0)?;
        let mut worst = 0.0_f64;
        let mut verdict_changes = 0usize;
        for (c, mode) in representative_constellations(rho)? {
            let base = CapacityOptions {
                lower_limit: Some(rho),
                ..*options
            };
            let psi = dirichlet_potential_with(&c, &a, 2.2, &base)?;
            let cap = drifted_capacity_with(&c, &a, &base)?.value;
            let verdict = classify_with(&c, mode, &base)?.label();
            for limit in [1.0, 2.0] {
                let alt = CapacityOptions {
                    lower_limit: Some(limit),
                    ..*options
                };
                worst = worst.max(relative(dirichlet_potential_with(&c, &a, 2.2, &alt)?, psi));
                worst = worst.max(relative(drifted_capacity_with(&c, &a, &alt)?.value, cap));
                if classify_with(&c, mode, &alt)?.label() != verdict {
                    verdict_changes += 1;
                }
            }
        }
        Ok(CriterionOutcome::new(
            7,
            NAME,
            worst <= 1e-9 && verdict_changes == 0,
            worst,
            1e-9,
            format!("{verdict_changes} verdict changes"),
        ))
    };
    run().unwrap_or_else(|e| CriterionOutcome::failed(7, NAME, e))
}

fn monotonicity(options: &CapacityOptions) -> CriterionOutcome {
    const NAME: &str = "monotonicity";
    let run = || -> Result<CriterionOutcome> {
        let rho = 1.0;
        let probe = 1.2;
        let mut violations = 0usize;
        let mut checks = 0usize;
        for (c, _) in representative_constellations(rho)? {
            let a = Annulus::new(rho, 3.0)?;
            let grid: Vec<f64> = (0..=40).map(|i| rho + 0.05 * f64::from(i)).collect();
            let table = potential_table(&c, &a, &grid, options)?;
            checks += 1;
            if table.values.windows(2).any(|w| w[1] < w[0]) {
                violations += 1;
            }
            let mut previous: Option<(f64, f64)> = None;
            for k in 0..10 {
                let outer = 1.5 + 0.25 * f64::from(k);
                let a = Annulus::new(rho, outer)?;
                let psi = dirichlet_potential_with(&c, &a, probe, options)?;
                let cap = drifted_capacity_with(&c, &a, options)?.value;
                if let Some((psi_prev, cap_prev)) = previous {
                    checks += 1;
                    if !(psi < psi_prev && cap < cap_prev) {
                        violations += 1;
                    }
                }
                previous = Some((psi, cap));
            }
        }
        Ok(CriterionOutcome::new(
            8,
            NAME,
            violations == 0,
            violations as f64,
            0.0,
            format!("{checks} checks"),
        ))
    };
    run().unwrap_or_else(|e| CriterionOutcome::failed(8, NAME, e))
}

fn determinism(options: &CapacityOptions) -> CriterionOutcome {
    const NAME: &str = "determinism";
    let run = || -> Result<CriterionOutcome> {
        let render = |parallel: bool| -> Result<String> {
            let c = representative_constellations(1.0)?;
            let a = Annulus::new(1.0, 2.0)?;
            let rows: Vec<Result<String>> = if parallel {
                c.par_iter().map(|(c, mode)| row(c, *mode, &a, options)).collect()
            } else {
                c.iter().map(|(c, mode)| row(c, *mode, &a, options)).collect()
            };
            rows.into_iter().collect::<Result<Vec<_>>>().map(|r| r.concat())
        };
        let first = render(true)?;
        let second = render(false)?;
        let same = first == second;
        Ok(CriterionOutcome::new(
            9,
            NAME,
            same,
            if same { 0.0 } else { 1.0 },
            0.0,
            "parallel and sequential renderings compared byte for byte".into(),
        ))
    };
    run().unwrap_or_else(|e| CriterionOutcome::failed(9, NAME, e))
}

fn row(c: &Constellation, mode: Mode, a: &Annulus, options: &CapacityOptions) -> Result<String> {
    let verdict = classify_with(c, mode, options)?;
    let cap = drifted_capacity_with(c, a, options)?;
    Ok(format!("{},{:.16e},{:.16e}\n", verdict.label(), cap.value, cap.error_estimate))
}
