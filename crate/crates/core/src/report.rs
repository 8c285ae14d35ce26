//! Task dispatch and report rendering.
//!
//! CSV numbers use 17 significant digits in scientific notation, `.` as the
//! decimal separator and `\n` line endings, so identical jobs produce
//! identical bytes.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{
    drifted_capacity_limit_with, drifted_capacity_with, exact_model_pcapacity_with, intrinsic_boundary_flux,
    pcap_lower_bound_with, potential_table, CapacityEstimate,
};
use crate::classifier::{classify_with, Mode, Verdict};
use crate::config::{JobConfig, Numerics, Problem, Task};
use crate::constellation::{BalanceCheck, Bounds, Constellation};
use crate::error::{Error, Result};
use crate::expr::RadialExpr;
use crate::model::{ModelSpace, WarpingFunction, WarpingSpec};
use crate::quadrature::TailVerdict;
use crate::verify::{run_suite, CriterionOutcome};

/// Everything a task produces; the caller decides where each part goes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOutput {
    /// Human-readable report.
    pub text: String,
    /// Tabular artifact (`table`, `sweep`, `verify`).
    pub csv: Option<String>,
    /// Machine-readable report (`analyze`, `capacity`).
    pub json: Option<String>,
    /// Set when a verification check failed.
    pub verification_failed: bool,
}

/// Formats a number for CSV output.
pub fn csv_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

fn csv_text<I, S>(header: &[&str], rows: I) -> Result<String>
where
    I: IntoIterator<Item = Vec<S>>,
    S: AsRef<[u8]>,
{
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    writer.write_record(header).map_err(io)?;
    for row in rows {
        writer.write_record(row).map_err(io)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

fn problem(job: &JobConfig) -> Result<&Problem> {
    job.problem
        .as_ref()
        .ok_or_else(|| Error::config("", format!("task {} needs a constellation", job.task.name())))
}

pub fn run(job: &JobConfig) -> Result<RunOutput> {
    match job.task {
        Task::Analyze => analyze(problem(job)?, &job.numerics),
        Task::Capacity => capacity(problem(job)?, job.boundary_flux, &job.numerics),
        Task::Table => table(problem(job)?, job.grid, &job.numerics),
        Task::Sweep => sweep(job),
        Task::Verify => verify(job.seed, &job.numerics),
    }
}

fn describe(problem: &Problem) -> String {
    let c = &problem.constellation;
    let b = c.bounds();
    let outer = if problem.annulus.is_finite() {
        problem.annulus.outer().to_string()
    } else {
        "inf".into()
    };
    format!(
        "model: m = {}, w(r) = {}\nconstellation: n = {}, p = {}, g = {}, h = {}, lambda = {}\nannulus: rho = {}, R = {}\nmode: {}\n",
        c.m(),
        c.model().warping().expression(),
        c.n(),
        c.p(),
        b.g,
        b.h,
        b.lambda,
        problem.annulus.rho(),
        outer,
        match problem.mode {
            Mode::Intrinsic => "intrinsic",
            Mode::Extrinsic => "extrinsic",
        }
    )
}

fn describe_tail(tail: &TailVerdict) -> String {
    match tail {
        TailVerdict::Convergent { value, error } => format!("Convergent, value = {value:.12}, error = {error:.1e}"),
        TailVerdict::Divergent { witness } => format!("Divergent ({witness})"),
        TailVerdict::Unknown { reason } => format!("Unknown ({reason})"),
    }
}

fn describe_estimate(e: &CapacityEstimate) -> String {
    let mut s = format!("{:.6} ± {:.1e} [{}]", e.value, e.error_estimate, e.method.tag());
    if let Some(d) = &e.detail {
        let _ = write!(s, " ({d})");
    }
    s
}

#[derive(Serialize)]
struct ProblemReport<'a> {
    m: u32,
    n: u32,
    p: f64,
    rho: f64,
    #[serde(rename = "R")]
    outer: Option<f64>,
    mode: Mode,
    warping: &'a WarpingSpec,
    bounds: &'a Bounds,
}

impl<'a> ProblemReport<'a> {
    fn new(problem: &'a Problem) -> Self {
        let c = &problem.constellation;
        Self {
            m: c.m(),
            n: c.n(),
            p: c.p(),
            rho: c.rho(),
            outer: problem.annulus.is_finite().then(|| problem.annulus.outer()),
            mode: problem.mode,
            warping: &problem.warping,
            bounds: c.bounds(),
        }
    }
}

fn to_json(value: &impl Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn analyze(problem: &Problem, numerics: &Numerics) -> Result<RunOutput> {
    let options = numerics.capacity_options();
    let verdict = classify_with(&problem.constellation, problem.mode, &options)?;
    let mut text = describe(problem);
    let _ = writeln!(text, "verdict: {}", verdict.label());
    match &verdict {
        Verdict::PHyperbolic { criterion, .. } | Verdict::PParabolic { criterion, .. } => {
            let _ = writeln!(text, "criterion: {}", serde_json::to_value(criterion).unwrap_or_default().as_str().unwrap_or(""));
        }
        Verdict::Inconclusive { reason, .. } => {
            let _ = writeln!(text, "reason: {reason}");
        }
    }
    if let Some(evidence) = verdict.evidence() {
        match &evidence.balance {
            Some(BalanceCheck::Ok) => text.push_str("balance: ok\n"),
            Some(BalanceCheck::ViolationAt { r, value }) => {
                let _ = writeln!(text, "balance: violated at r = {r}, M = {value}");
            }
            None => text.push_str("balance: not needed\n"),
        }
        let _ = writeln!(text, "tail: {}", describe_tail(&evidence.tail));
        let _ = writeln!(text, "capacity limit: {}", describe_estimate(&evidence.cap_limit));
    }

    #[derive(Serialize)]
    struct Report<'a> {
        task: &'static str,
        problem: ProblemReport<'a>,
        verdict: &'a Verdict,
    }
    let json = to_json(&Report {
        task: "analyze",
        problem: ProblemReport::new(problem),
        verdict: &verdict,
    })?;
    Ok(RunOutput {
        text,
        json: Some(json),
        ..RunOutput::default()
    })
}

#[derive(Serialize)]
#[serde(untagged)]
enum Entry {
    Value(CapacityEstimate),
    Unavailable { unavailable: String },
}

fn capacity(problem: &Problem, boundary_flux: Option<f64>, numerics: &Numerics) -> Result<RunOutput> {
    let options = numerics.capacity_options();
    let c = &problem.constellation;
    let a = &problem.annulus;
    let mut entries: Vec<(&str, Entry)> = Vec::new();
    if a.is_finite() {
        entries.push(("drifted_capacity", Entry::Value(drifted_capacity_with(c, a, &options)?)));
    } else {
        entries.push(("drifted_capacity_limit", Entry::Value(drifted_capacity_limit_with(c, a.rho(), &options)?)));
    }
    entries.push(("model_pcapacity", Entry::Value(exact_model_pcapacity_with(c.model(), c.p(), a, &options)?)));

    let flux = match boundary_flux {
        Some(f) => Some(f),
        None if c.is_intrinsic() => Some(intrinsic_boundary_flux(c, a.rho())?),
        None => None,
    };
    let bound = match flux {
        _ if !a.is_finite() => Entry::Unavailable {
            unavailable: "the lower bound needs a finite outer radius".into(),
        },
        None => Entry::Unavailable {
            unavailable: "boundary_flux is required for extrinsic constellations".into(),
        },
        Some(flux) => match pcap_lower_bound_with(c, a, flux, &options) {
            Ok(e) => Entry::Value(e),
            Err(Error::BalanceViolation { r, value }) => Entry::Unavailable {
                unavailable: format!("balance violated at r = {r} (M = {value})"),
            },
            Err(e) => return Err(e),
        },
    };
    entries.push(("pcap_lower_bound", bound));

    let mut text = describe(problem);
    for (name, entry) in &entries {
        match entry {
            Entry::Value(e) => {
                let _ = writeln!(text, "{name} = {}", describe_estimate(e));
            }
            Entry::Unavailable { unavailable } => {
                let _ = writeln!(text, "{name} = n/a ({unavailable})");
            }
        }
    }

    let map: serde_json::Map<String, serde_json::Value> = entries
        .iter()
        .map(|(k, v)| Ok(((*k).to_string(), serde_json::to_value(v).map_err(|e| Error::Io(e.to_string()))?)))
        .collect::<Result<_>>()?;
    #[derive(Serialize)]
    struct Report<'a> {
        task: &'static str,
        problem: ProblemReport<'a>,
        estimates: serde_json::Map<String, serde_json::Value>,
    }
    let json = to_json(&Report {
        task: "capacity",
        problem: ProblemReport::new(problem),
        estimates: map,
    })?;
    Ok(RunOutput {
        text,
        json: Some(json),
        ..RunOutput::default()
    })
}

/// Uniform grid of `n` points on `[lo, hi]` with exact endpoints.
fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

fn table(problem: &Problem, n: usize, numerics: &Numerics) -> Result<RunOutput> {
    let options = numerics.capacity_options();
    let c = &problem.constellation;
    let a = &problem.annulus;
    a.require_finite()?;
    let grid = uniform_grid(a.rho(), a.outer(), n);
    let psi = potential_table(c, a, &grid, &options)?;
    let lower = options.lower_limit.unwrap_or(a.rho());
    let weight = c.weight(lower, a.rho(), a.outer(), options.quadrature)?;
    let rows = grid
        .iter()
        .zip(&psi.values)
        .map(|(&r, &psi)| {
            Ok(vec![
                csv_number(r),
                csv_number(c.model().warping_value(r)?),
                csv_number(c.model().eta(r)?),
                csv_number(c.balance(r)?),
                csv_number(weight.value(r)?),
                csv_number(psi),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RunOutput {
        csv: Some(csv_text(&["r", "w", "eta", "M", "Lambda", "psi"], rows)?),
        ..RunOutput::default()
    })
}

#[derive(Debug, Clone, Copy)]
struct SweepPoint {
    m: u32,
    p: f64,
    b: Option<f64>,
    h0: Option<f64>,
    lambda0: Option<f64>,
}

fn sweep_points(job: &JobConfig, problem: &Problem) -> Vec<SweepPoint> {
    let axes = job.sweep.clone().unwrap_or_default();
    let c = &problem.constellation;
    let base_b = match problem.warping {
        WarpingSpec::SpaceForm { b } => Some(b),
        WarpingSpec::Expression { .. } => None,
    };
    let ms = axes.m.unwrap_or_else(|| vec![c.m()]);
    let ps = axes.p.unwrap_or_else(|| vec![c.p()]);
    let bs: Vec<Option<f64>> = axes.b.map(|v| v.into_iter().map(Some).collect()).unwrap_or_else(|| vec![base_b]);
    let h0s: Vec<Option<f64>> = axes
        .h0
        .map(|v| v.into_iter().map(Some).collect())
        .unwrap_or_else(|| vec![c.bounds().h.constant_value()]);
    let l0s: Vec<Option<f64>> = axes
        .lambda0
        .map(|v| v.into_iter().map(Some).collect())
        .unwrap_or_else(|| vec![c.bounds().lambda.constant_value()]);
    let mut points = Vec::new();
    for &m in &ms {
        for &p in &ps {
            for &b in &bs {
                for &h0 in &h0s {
                    for &lambda0 in &l0s {
                        points.push(SweepPoint { m, p, b, h0, lambda0 });
                    }
                }
            }
        }
    }
    points
}

fn sweep_constellation(problem: &Problem, point: &SweepPoint) -> Result<Constellation> {
    let base = &problem.constellation;
    let warping = match (point.b, &problem.warping) {
        (Some(b), _) => WarpingFunction::space_form(b),
        (None, _) => base.model().warping().clone(),
    };
    let model = ModelSpace::new(point.m, warping)?;
    let bounds = Bounds {
        g: base.bounds().g.clone(),
        h: point.h0.map(RadialExpr::Const).unwrap_or_else(|| base.bounds().h.clone()),
        lambda: point.lambda0.map(RadialExpr::Const).unwrap_or_else(|| base.bounds().lambda.clone()),
    };
    let n = point.m + (base.n() - base.m());
    Constellation::new(n, point.p, model, bounds, base.rho())
}

fn sweep_row(problem: &Problem, point: &SweepPoint, numerics: &Numerics) -> Vec<String> {
    let options = numerics.capacity_options();
    let opt = |x: Option<f64>| x.map(csv_number).unwrap_or_default();
    let mut row = vec![
        point.m.to_string(),
        csv_number(point.p),
        opt(point.b),
        opt(point.h0),
        opt(point.lambda0),
    ];
    let result = sweep_constellation(problem, point).and_then(|c| {
        let verdict = classify_with(&c, problem.mode, &options)?;
        let drifted = if problem.annulus.is_finite() {
            Some(drifted_capacity_with(&c, &problem.annulus, &options)?.value)
        } else {
            None
        };
        Ok((verdict, drifted))
    });
    match result {
        Ok((verdict, drifted)) => {
            let evidence = verdict.evidence();
            let detail = match &verdict {
                Verdict::Inconclusive { reason, .. } => reason.clone(),
                _ => match evidence.map(|e| &e.tail) {
                    Some(TailVerdict::Divergent { witness }) => witness.clone(),
                    _ => String::new(),
                },
            };
            row.extend([
                verdict.label().to_string(),
                evidence.map(|e| e.tail.label().to_string()).unwrap_or_default(),
                opt(evidence.and_then(|e| e.tail.value())),
                opt(evidence.map(|e| e.cap_limit.value)),
                opt(drifted),
                detail,
            ]);
        }
        Err(e) => row.extend([
            "Error".to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            e.to_string(),
        ]),
    }
    row
}

fn sweep(job: &JobConfig) -> Result<RunOutput> {
    let problem = problem(job)?;
    let points = sweep_points(job, problem);
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|point| sweep_row(problem, point, &job.numerics))
        .collect();
    let header = [
        "m",
        "p",
        "b",
        "h0",
        "lambda0",
        "verdict",
        "tail",
        "tail_value",
        "cap_limit",
        "drifted_capacity",
        "detail",
    ];
    Ok(RunOutput {
        text: format!("{} sweep rows\n", rows.len()),
        csv: Some(csv_text(&header, rows)?),
        ..RunOutput::default()
    })
}

fn verify(seed: u64, numerics: &Numerics) -> Result<RunOutput> {
    let outcomes = run_suite(seed, numerics);
    let mut text = String::new();
    for o in &outcomes {
        let _ = writeln!(
            text,
            "criterion {} {} {}: measured {:.6e}, threshold {:.6e} ({})",
            o.id,
            o.status(),
            o.name,
            o.measured,
            o.threshold,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    let _ = writeln!(text, "{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    let rows = outcomes.iter().map(|o: &CriterionOutcome| {
        vec![
            o.id.to_string(),
            o.name.to_string(),
            o.status().to_string(),
            csv_number(o.measured),
            csv_number(o.threshold),
            o.detail.clone(),
        ]
    });
    Ok(RunOutput {
        text,
        csv: Some(csv_text(&["criterion", "name", "status", "measured", "threshold", "detail"], rows)?),
        json: None,
        verification_failed: failed > 0,
    })
}
