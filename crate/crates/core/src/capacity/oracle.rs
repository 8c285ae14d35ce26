//! Capacity of a model annulus by direct minimisation of the discretised
//! p-energy `omega int_rho^R |u'|^p w^(m-1) dr` over radial `u` with
//! `u(rho) = 1`, `u(R) = 0`.

use crate::constellation::Annulus;
use crate::error::{Error, Result};
use crate::model::ModelSpace;

use super::{CapacityEstimate, CapacityMethod};

const MIN_NODES: usize = 16;
const MAX_NEWTON_STEPS: usize = 500;
const GRADIENT_TOL: f64 = 1e-12;
/// Largest relative gradient accepted once the energy has stopped decreasing.
const ACCEPT_TOL: f64 = 1e-6;
/// Consecutive steps with relative energy change below `4 eps` that count as a stall.
const STALL_STEPS: usize = 3;
const ARMIJO: f64 = 1e-4;

/// Minimises the p-energy of piecewise-linear radial functions on `nodes`
/// points by damped Newton iteration.
///
/// The error estimate is the Richardson difference against the half-size
/// grid, which assumes second-order convergence in the grid spacing.
pub fn discrete_energy_oracle(model: &ModelSpace, p: f64, a: &Annulus, nodes: usize) -> Result<CapacityEstimate> {
    a.require_finite()?;
    if nodes < MIN_NODES {
        return Err(Error::Precondition(format!("energy oracle needs at least {MIN_NODES} nodes, got {nodes}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Precondition(format!("energy oracle needs 1 < p < inf, got {p}")));
    }
    let fine = minimise(model, p, a, nodes)?;
    let coarse = minimise(model, p, a, nodes / 2)?;
    Ok(CapacityEstimate {
        detail: Some(format!("{nodes} nodes")),
        ..CapacityEstimate::new(fine, (fine - coarse) / 3.0, CapacityMethod::EnergyOracle)
    })
}

fn grid(a: &Annulus, nodes: usize) -> Vec<f64> {
    let (lo, hi) = (a.rho(), a.outer());
    let last = nodes - 1;
    let geometric = hi / lo > 10.0;
    (0..nodes)
        .map(|i| {
            if i == last {
                hi
            } else if geometric {
                lo * (hi / lo).powf(i as f64 / last as f64)
            } else {
                lo + (hi - lo) * i as f64 / last as f64
            }
        })
        .collect()
}

/// Edge weights `k_i` with energy `sum k_i |u_{i+1} - u_i|^p`.
fn edge_weights(model: &ModelSpace, p: f64, radii: &[f64]) -> Result<Vec<f64>> {
    let omega = model.unit_sphere_area();
    let m1 = f64::from(model.dimension() - 1);
    radii
        .windows(2)
        .map(|e| {
            let h = e[1] - e[0];
            let mid = 0.5 * (e[0] + e[1]);
            let ln_density = m1 * model.warping().ln_value(mid)?;
            Ok(omega * (ln_density + (1.0 - p) * h.ln()).exp())
        })
        .collect()
}

fn energy(k: &[f64], u: &[f64], p: f64) -> f64 {
    k.iter().zip(u.windows(2)).map(|(k, e)| k * (e[1] - e[0]).abs().powf(p)).sum()
}

fn minimise(model: &ModelSpace, p: f64, a: &Annulus, nodes: usize) -> Result<f64> {
    let radii = grid(a, nodes);
    let k = edge_weights(model, p, &radii)?;
    let span = a.outer() - a.rho();
    let mut u: Vec<f64> = radii.iter().map(|r| (a.outer() - r) / span).collect();
    *u.first_mut().expect("non-empty") = 1.0;
    *u.last_mut().expect("non-empty") = 0.0;

    let edges = k.len();
    let interior = nodes - 2;
    let mut flux = vec![0.0; edges];
    let mut stiffness = vec![0.0; edges];
    let mut gradient = vec![0.0; interior];
    let mut residual = f64::INFINITY;
    let mut current = energy(&k, &u, p);
    let mut stalled = 0usize;

    for _ in 0..MAX_NEWTON_STEPS {
        for i in 0..edges {
            let d = u[i + 1] - u[i];
            let mag = d.abs().powf(p - 2.0);
            flux[i] = p * k[i] * mag * d;
            stiffness[i] = p * (p - 1.0) * k[i] * mag;
        }
        let scale = flux.iter().fold(0.0_f64, |acc, s| acc.max(s.abs()));
        for j in 0..interior {
            gradient[j] = flux[j] - flux[j + 1];
        }
        residual = gradient.iter().fold(0.0_f64, |acc, g| acc.max(g.abs())) / scale;
        if residual <= GRADIENT_TOL {
            return Ok(current);
        }

        // tridiagonal Hessian over interior nodes
        let floor = 1e-14 * stiffness.iter().fold(0.0_f64, |acc, s| acc.max(*s));
        let diag: Vec<f64> = (0..interior).map(|j| stiffness[j] + stiffness[j + 1] + floor).collect();
        let off: Vec<f64> = (0..interior.saturating_sub(1)).map(|j| -stiffness[j + 1]).collect();
        let rhs: Vec<f64> = gradient.iter().map(|g| -g).collect();
        let step = solve_tridiagonal(&off, &diag, &off, &rhs)?;

        let slope: f64 = gradient.iter().zip(&step).map(|(g, s)| g * s).sum();
        let mut t = 1.0;
        let mut trial = u.clone();
        loop {
            for j in 0..interior {
                trial[j + 1] = u[j + 1] + t * step[j];
            }
            let e = energy(&k, &trial, p);
            if e <= current + ARMIJO * t * slope {
                if current - e <= 4.0 * f64::EPSILON * current {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
                current = e;
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                return if residual <= ACCEPT_TOL {
                    Ok(current)
                } else {
                    Err(Error::NonConvergence {
                        iterations: MAX_NEWTON_STEPS,
                        residual,
                    })
                };
            }
        }
        std::mem::swap(&mut u, &mut trial);
        if stalled >= STALL_STEPS && residual <= ACCEPT_TOL {
            return Ok(current);
        }
    }
    if residual <= ACCEPT_TOL {
        Ok(current)
    } else {
        Err(Error::NonConvergence {
            iterations: MAX_NEWTON_STEPS,
            residual,
        })
    }
}

/// Thomas algorithm for `lower[i-1] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let sub = if i > 0 { lower[i - 1] } else { 0.0 };
        let denom = diag[i] - if i > 0 { sub * c[i - 1] } else { 0.0 };
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::Precondition("singular energy Hessian".into()));
        }
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - if i > 0 { sub * d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}
