//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Reference values are computed here, independently of the
//! library's own quadrature and verify suite.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use caplab::capacity::{
    dirichlet_potential_with, discrete_energy_oracle, drifted_capacity_with, exact_model_pcapacity,
    intrinsic_boundary_flux, ode_residual, pcap_lower_bound, potential_table, CapacityOptions,
};
use caplab::classifier::{classify_with, Mode, Verdict};
use caplab::{Annulus, Bounds, Constellation, ModelSpace, WarpingFunction};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn model(m: u32, w: &str) -> ModelSpace {
    ModelSpace::new(m, WarpingFunction::from_formula(w).unwrap()).unwrap()
}

fn intrinsic(m: u32, w: &str, p: f64, rho: f64) -> Constellation {
    Constellation::intrinsic(model(m, w), p, rho).unwrap()
}

/// Area of the unit sphere in R^m.
fn unit_sphere_area(m: u32) -> f64 {
    match m {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        5 => 8.0 * PI * PI / 3.0,
        6 => PI.powi(3),
        _ => unreachable!("dimension {m} not tabulated"),
    }
}

/// Composite Simpson rule with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n)
        .map(|i| f(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(a) + f(b) + inner) * h / 3.0
}

/// Closed-form p-capacity of the model annulus (1, 2):
/// `omega (int_1^2 w^(-(m-1)/(p-1)))^(1-p)`.
fn reference_capacity(m: u32, p: f64, w: &str) -> f64 {
    let k = f64::from(m - 1) / (p - 1.0);
    let integral = match w {
        "r" if (k - 1.0).abs() < 1e-15 => 2f64.ln(),
        "r" => (2f64.powf(1.0 - k) - 1.0) / (1.0 - k),
        "sinh(r)" => simpson(|t| t.sinh().powf(-k), 1.0, 2.0, 20_000),
        _ => unreachable!(),
    };
    unit_sphere_area(m) * integral.powf(1.0 - p)
}

fn oracle_tuples() -> Vec<(u32, f64, &'static str)> {
    let mut out = Vec::new();
    for m in [2, 3, 4] {
        for p in [2.0, 2.5, 3.0] {
            for w in ["r", "sinh(r)"] {
                out.push((m, p, w));
            }
        }
    }
    out
}

fn timed(limit: Duration, body: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let result = body()?;
    let elapsed = start.elapsed();
    if elapsed > limit {
        return Err(format!("{result}; took {elapsed:?}, limit {limit:?}"));
    }
    Ok(format!("{result}; {:.3} s", elapsed.as_secs_f64()))
}

fn newtonian_annulus() -> Check {
    timed(Duration::from_secs(1), || {
        let (rho, outer) = (1.0, 2.0);
        let c = intrinsic(3, "r", 2.0, rho);
        let cap = drifted_capacity_with(&c, &Annulus::new(rho, outer).unwrap(), &CapacityOptions::default())
            .map_err(|e| e.to_string())?;
        let expected = 4.0 * PI * rho * outer / (outer - rho);
        let err = relative(cap.value, expected);
        let line = format!("capacity {:.12}, relative error {err:.2e}", cap.value);
        if err <= 1e-8 {
            Ok(line)
        } else {
            Err(line)
        }
    })
}

fn oracle_equivalence() -> Check {
    timed(Duration::from_secs(30), || {
        let a = Annulus::new(1.0, 2.0).unwrap();
        let mut worst_oracle = 0.0_f64;
        let mut worst_closed = 0.0_f64;
        for (m, p, w) in oracle_tuples() {
            let model = model(m, w);
            let reference = reference_capacity(m, p, w);
            let exact = exact_model_pcapacity(&model, p, &a).map_err(|e| format!("{m} {p} {w}: {e}"))?;
            let oracle = discrete_energy_oracle(&model, p, &a, 2000).map_err(|e| format!("{m} {p} {w}: {e}"))?;
            worst_closed = worst_closed.max(relative(exact.value, reference));
            worst_oracle = worst_oracle.max(relative(oracle.value, exact.value));
        }
        let line = format!("oracle vs closed form {worst_oracle:.2e}, closed form vs reference {worst_closed:.2e}");
        if worst_oracle <= 0.01 && worst_closed <= 1e-8 {
            Ok(line)
        } else {
            Err(line)
        }
    })
}

fn ode_residual_order() -> Check {
    let a = Annulus::new(1.0, 2.0).unwrap();
    // Flat m = 3, p = 2 is solved exactly by the three-point scheme, so only
    // its absolute residual is checked.
    let cases = [(2, "r", 2.0), (4, "r", 2.0), (3, "r", 3.0), (3, "sinh(r)", 2.0), (3, "sinh(r)", 3.0)];
    let mut worst = f64::INFINITY;
    for (m, w, p) in cases {
        let c = intrinsic(m, w, p, 1.0);
        let coarse = ode_residual(&c, &a, 1024).map_err(|e| e.to_string())?;
        let fine = ode_residual(&c, &a, 2048).map_err(|e| e.to_string())?;
        worst = worst.min(coarse / fine);
    }
    let flat = ode_residual(&intrinsic(3, "r", 2.0, 1.0), &a, 2048).map_err(|e| e.to_string())?;
    let line = format!("minimum ratio {worst:.3}, flat residual {flat:.2e}");
    if worst >= 3.5 && flat <= 1e-6 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn intrinsic_power_law() -> Check {
    let options = CapacityOptions::default();
    let mut failures = Vec::new();
    let mut total = 0;
    for m in 2..=6u32 {
        for k in 0..=8 {
            let p = 2.0 + 0.5 * f64::from(k);
            // int^inf r^(-(m-1)/(p-1)) dr diverges iff (m-1)/(p-1) <= 1
            let parabolic = f64::from(m - 1) / (p - 1.0) <= 1.0;
            let verdict = classify_with(&intrinsic(m, "r", p, 1.0), Mode::Intrinsic, &options).map_err(|e| e.to_string())?;
            total += 1;
            let ok = match verdict {
                Verdict::PParabolic { .. } => parabolic,
                Verdict::PHyperbolic { .. } => !parabolic,
                Verdict::Inconclusive { .. } => false,
            };
            if !ok {
                failures.push(format!("m={m} p={p} -> {}", verdict.label()));
            }
        }
    }
    if failures.is_empty() {
        Ok(format!("{total} cases"))
    } else {
        Err(failures.join("; "))
    }
}

fn pinching_end_to_end() -> Check {
    let options = CapacityOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let verdicts = |m: u32, b: f64, h0: f64, lambda0: f64, p_tilde: f64| -> Result<Vec<Verdict>, String> {
        [2.0, p_tilde]
            .iter()
            .map(|&p| {
                let model = ModelSpace::space_form(m, b).map_err(|e| e.to_string())?;
                let c = Constellation::new(m, p, model, Bounds::constant(h0, lambda0), 1.0).map_err(|e| e.to_string())?;
                classify_with(&c, Mode::Extrinsic, &options).map_err(|e| e.to_string())
            })
            .collect()
    };
    let mut failures = Vec::new();
    let mut accepted = 0;
    while accepted < 20 {
        let m = rng.random_range(2..=5u32);
        let b: f64 = -rng.random_range(0.1..5.0);
        let p_tilde = rng.random_range(2.0..7.0);
        let h0 = rng.random_range(0.0..1.5);
        let lambda0 = rng.random_range(0.0..1.5);
        let mf = f64::from(m);
        if mf * h0 + (p_tilde - 2.0) * lambda0 >= (mf - 1.0) * (-b).sqrt() {
            continue;
        }
        accepted += 1;
        for v in verdicts(m, b, h0, lambda0, p_tilde)? {
            if !v.is_hyperbolic() {
                failures.push(format!("pinched m={m} b={b:.3} h0={h0:.3} l0={lambda0:.3} p={p_tilde:.3}: {}", v.label()));
            }
        }
    }
    let mut rejected = 0;
    while rejected < 20 {
        let m = rng.random_range(2..=5u32);
        let b: f64 = -rng.random_range(0.1..5.0);
        let p_tilde = rng.random_range(2.0..7.0);
        let h0 = rng.random_range(0.0..12.0);
        let lambda0 = rng.random_range(0.0..3.0);
        let mf = f64::from(m);
        let k = (-b).sqrt();
        // limit of the balance function as r -> inf, for both exponents
        let balance_at_infinity = |p: f64| (mf + p - 2.0) * k - mf * h0 - (p - 2.0) * lambda0;
        if balance_at_infinity(2.0) >= 0.0 || balance_at_infinity(p_tilde) >= 0.0 {
            continue;
        }
        rejected += 1;
        for v in verdicts(m, b, h0, lambda0, p_tilde)? {
            if !matches!(v, Verdict::Inconclusive { .. }) {
                failures.push(format!("unbalanced m={m} b={b:.3} h0={h0:.3} p={p_tilde:.3}: {}", v.label()));
            }
        }
    }
    if failures.is_empty() {
        Ok("20 pinched tuples hyperbolic at p in {2, p~}, 20 unbalanced tuples inconclusive".into())
    } else {
        Err(failures.join("; "))
    }
}

fn lower_bound_consistency() -> Check {
    let a = Annulus::new(1.0, 2.0).unwrap();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_equality = 0.0_f64;
    for (m, p, w) in oracle_tuples() {
        let c = intrinsic(m, w, p, 1.0);
        let flux = intrinsic_boundary_flux(&c, 1.0).map_err(|e| e.to_string())?;
        let bound = pcap_lower_bound(&c, &a, flux).map_err(|e| e.to_string())?.value;
        let exact = reference_capacity(m, p, w);
        worst_excess = worst_excess.max((bound - exact) / exact);
        if p == 2.0 {
            worst_equality = worst_equality.max(relative(bound, exact));
        }
    }
    let line = format!("max relative excess {worst_excess:.2e}, max p = 2 gap {worst_equality:.2e}");
    if worst_excess <= 1e-9 && worst_equality <= 1e-8 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn representatives(rho: f64) -> Vec<(Constellation, Mode)> {
    let h3 = || ModelSpace::space_form(3, -1.0).unwrap();
    vec![
        (intrinsic(3, "r", 2.0, rho), Mode::Intrinsic),
        (intrinsic(2, "r", 3.0, rho), Mode::Intrinsic),
        (Constellation::intrinsic(h3(), 2.5, rho).unwrap(), Mode::Intrinsic),
        (Constellation::new(4, 3.0, h3(), Bounds::constant(0.1, 0.2), rho).unwrap(), Mode::Extrinsic),
        (
            Constellation::new(5, 2.0, ModelSpace::space_form(4, 0.0).unwrap(), Bounds::constant(0.0, 0.5), rho).unwrap(),
            Mode::Extrinsic,
        ),
        (intrinsic(4, "r + r^3", 2.0, rho), Mode::Extrinsic),
    ]
}

fn normalisation_invariance() -> Check {
    let rho = 1.5;
    let a = Annulus::new(rho, 3.0).unwrap();
    let with_limit = |limit: f64| CapacityOptions::with_lower_limit(limit);
    let mut worst = 0.0_f64;
    let mut changes = Vec::new();
    for (i, (c, mode)) in representatives(rho).iter().enumerate() {
        let run = |limit: f64| -> Result<(f64, f64, &'static str), String> {
            let o = with_limit(limit);
            let psi = dirichlet_potential_with(c, &a, 2.2, &o).map_err(|e| e.to_string())?;
            let cap = drifted_capacity_with(c, &a, &o).map_err(|e| e.to_string())?.value;
            let verdict = classify_with(c, *mode, &o).map_err(|e| e.to_string())?.label();
            Ok((psi, cap, verdict))
        };
        let (psi, cap, verdict) = run(rho)?;
        for limit in [1.0, 2.0] {
            let (psi2, cap2, verdict2) = run(limit)?;
            worst = worst.max(relative(psi2, psi)).max(relative(cap2, cap));
            if verdict2 != verdict {
                changes.push(format!("case {i} limit {limit}: {verdict} -> {verdict2}"));
            }
        }
    }
    let line = format!("max relative change {worst:.2e}");
    if worst <= 1e-9 && changes.is_empty() {
        Ok(line)
    } else {
        Err(format!("{line}; {}", changes.join("; ")))
    }
}

fn monotonicity() -> Check {
    let rho = 1.0;
    let options = CapacityOptions::default();
    let mut failures = Vec::new();
    for (i, (c, _)) in representatives(rho).iter().enumerate() {
        let a = Annulus::new(rho, 3.0).unwrap();
        let grid: Vec<f64> = (0..=40).map(|j| rho + 0.05 * f64::from(j)).collect();
        let table = potential_table(c, &a, &grid, &options).map_err(|e| e.to_string())?;
        if table.values.windows(2).any(|w| w[1] < w[0]) {
            failures.push(format!("case {i}: psi decreases in r"));
        }
        let mut previous: Option<(f64, f64)> = None;
        for k in 0..10 {
            let a = Annulus::new(rho, 1.5 + 0.25 * f64::from(k)).unwrap();
            let psi = dirichlet_potential_with(c, &a, 1.2, &options).map_err(|e| e.to_string())?;
            let cap = drifted_capacity_with(c, &a, &options).map_err(|e| e.to_string())?.value;
            if let Some((psi_prev, cap_prev)) = previous {
                if !(psi < psi_prev && cap < cap_prev) {
                    failures.push(format!("case {i}: not strictly decreasing at R = {}", a.outer()));
                }
            }
            previous = Some((psi, cap));
        }
    }
    if failures.is_empty() {
        Ok("6 constellations, 10-point R grid".into())
    } else {
        Err(failures.join("; "))
    }
}

fn caplab(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_caplab"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("caplab {args:?} exited with {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))
    }
}

fn run_twice(dir: &Path, name: &str, args: &[&str]) -> Result<bool, String> {
    let mut outputs = Vec::new();
    for k in 0..2 {
        let path = dir.join(format!("{name}{k}.csv"));
        let path_str = path.to_str().unwrap();
        let mut full = args.to_vec();
        full.extend(["--out", path_str]);
        caplab(&full)?;
        outputs.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    Ok(!outputs[0].is_empty() && outputs[0] == outputs[1])
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("sweep.json");
    std::fs::write(
        &config,
        r#"{"task": "sweep", "m": 3, "p": 2, "rho": 1, "R": 2,
            "warping": {"type": "space_form", "b": -1},
            "bounds": {"h": "0.1", "lambda": "0.2"},
            "sweep": {"m": [2, 3, 4], "p": [2, 3, 4.5], "h0": [0, 0.3, 1.5], "lambda0": [0, 0.2]}}"#,
    )
    .map_err(|e| e.to_string())?;
    let verify_same = run_twice(dir.path(), "verify", &["verify"])?;
    let sweep_same = run_twice(dir.path(), "sweep", &["sweep", config.to_str().unwrap()])?;
    if verify_same && sweep_same {
        Ok("verify and sweep CSV byte-identical across runs".into())
    } else {
        Err(format!("verify identical: {verify_same}, sweep identical: {sweep_same}"))
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("newtonian-annulus", newtonian_annulus),
        ("oracle-equivalence", oracle_equivalence),
        ("ode-residual-order", ode_residual_order),
        ("intrinsic-power-law", intrinsic_power_law),
        ("pinching-end-to-end", pinching_end_to_end),
        ("lower-bound-consistency", lower_bound_consistency),
        ("normalisation-invariance", normalisation_invariance),
        ("monotonicity", monotonicity),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
