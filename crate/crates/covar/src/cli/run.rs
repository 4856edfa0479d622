//! Command dispatch: parse the problem file, lower it, run the requested
//! pipeline, and map outcomes onto the exit-code contract
//! (0 certified/clean, 2 refuted, 3 inconclusive, 1 error).

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde_json::json;

use crate::error::{Error, Result};
use crate::multifunction::GraphPoint;
use crate::oracle::{empirical_lip, empirical_reg, GridSpec};
use crate::stochastic::ExpectedMapFn;
use crate::systems::{
    constraint_certify, constraint_coderivative, constraint_solution_map, mpec_check,
    stationary_map_coderivative, stationary_metric_regularity, variational_certify,
    variational_coderivative, variational_solution_map, SystemEstimate,
};
use crate::wellposedness::Property;

use super::build::{build, BuiltProblem};
use super::parse::{parse, ProblemFile};
use super::report::{
    certificate_json, empirical_json, num, set_json, vec_num, verdict_exit_code, Report,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Certify,
    Estimate,
    CheckMpec,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::Certify => "certify",
            Command::Estimate => "estimate",
            Command::CheckMpec => "check-mpec",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub command: Command,
    pub property: Option<Property>,
    pub grid: Option<usize>,
    pub radius: Option<f64>,
    pub seed: Option<u64>,
}

/// Run a command against problem-file text; returns the report and the exit
/// code per the contract.
pub fn run(text: &str, opts: &RunOptions) -> (Report, i32) {
    match run_inner(text, opts) {
        Ok(pair) => pair,
        Err(e) => {
            let mut report = Report::new(opts.command.as_str(), "unknown");
            report.verdict_summary = format!("error: {e}");
            report.assumptions_log.push(format!("{e}"));
            (report, 1)
        }
    }
}

fn effective(pf: &ProblemFile, opts: &RunOptions) -> (usize, f64, u64, BTreeMap<String, serde_json::Value>) {
    let file_opt = |name: &str, default: f64| pf.options.get(name).copied().unwrap_or(default);
    let grid = opts.grid.unwrap_or_else(|| file_opt("grid", 11.0) as usize).max(3);
    let radius = opts.radius.unwrap_or_else(|| file_opt("radius", 0.5));
    let seed = opts.seed.unwrap_or(pf.seed);
    let mut echo = BTreeMap::new();
    echo.insert("grid".into(), json!(grid));
    echo.insert("radius".into(), num(radius));
    echo.insert("seed".into(), json!(seed));
    echo.insert("eta".into(), num(file_opt("eta", 0.1)));
    echo.insert("rho".into(), num(file_opt("rho", 0.25)));
    echo.insert("gamma".into(), num(file_opt("gamma", 0.5)));
    echo.insert("tau_mem".into(), num(crate::tol::TAU_MEM));
    echo.insert("tau_kernel".into(), num(crate::tol::TAU_KERNEL));
    echo.insert("tau_opt".into(), num(crate::tol::TAU_OPT));
    (grid, radius, seed, echo)
}

fn run_inner(text: &str, opts: &RunOptions) -> Result<(Report, i32)> {
    let pf = parse(text)?;
    let built = build(&pf)?;
    let (grid, radius, seed, echo) = effective(&pf, opts);
    let mut report = Report::new(opts.command.as_str(), pf.kind.as_str());
    report.effective_options = echo;

    match opts.command {
        Command::Analyze => run_analyze(&pf, &built, &mut report),
        Command::Certify => run_certify(&pf, &built, opts, &mut report),
        Command::Estimate => run_estimate(&built, grid, radius, seed, &mut report),
        Command::CheckMpec => run_check_mpec(&built, &mut report),
    }
}

fn estimate_for(built: &super::build::Built) -> Result<SystemEstimate> {
    match &built.problem {
        BuiltProblem::Constraint(spec) => constraint_coderivative(spec, &built.x, &built.z),
        BuiltProblem::Variational(spec) => variational_coderivative(spec, &built.x, &built.z),
        BuiltProblem::Stationary(spec) => stationary_map_coderivative(spec, &built.x, &built.z),
        BuiltProblem::Mpec(spec) => variational_coderivative(&spec.s, &built.x, &built.z),
    }
}

fn dual_probes(dim: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            out.push(DVector::from_fn(dim, |j, _| if i == j { s } else { 0.0 }));
        }
    }
    if dim > 1 {
        out.push(DVector::from_element(dim, 1.0).normalize());
    }
    out.push(DVector::zeros(dim));
    out
}

fn run_analyze(
    _pf: &ProblemFile,
    built: &super::build::Built,
    report: &mut Report,
) -> Result<(Report, i32)> {
    match estimate_for(built) {
        Ok(est) => {
            report.assumptions_log = est.assumptions_log.clone();
            let dim = est.map.input_dim();
            for zstar in dual_probes(dim) {
                let value = est.value(&zstar);
                report.estimates.push(json!({
                    "dual": vec_num(zstar.as_slice()),
                    "pieces": value.pieces.iter().map(set_json).collect::<Vec<_>>(),
                    "exact": value.exact,
                }));
            }
            report.verdict_summary = "estimate emitted".into();
            Ok((std::mem::replace(report, Report::new("", "")), 0))
        }
        Err(
            e @ (Error::QualificationFailed { .. }
            | Error::AdjointNontrivial { .. }
            | Error::StandingAssumptionViolation(_)),
        ) => {
            report.assumptions_log.push(format!("{e}"));
            report.verdict_summary = "no estimate: hypothesis gate failed".into();
            Ok((std::mem::replace(report, Report::new("", "")), 3))
        }
        Err(e) => Err(e),
    }
}

fn run_certify(
    pf: &ProblemFile,
    built: &super::build::Built,
    opts: &RunOptions,
    report: &mut Report,
) -> Result<(Report, i32)> {
    let property = opts.property.ok_or_else(|| Error::SchemaError {
        line: 0,
        message: "certify needs --property lipschitz|metric-regularity".into(),
    })?;
    let cert = match &built.problem {
        BuiltProblem::Constraint(spec) => {
            let copts = crate::systems::constraint::ConstraintCertifyOptions {
                require_slater: pf.options.get("slater").copied().unwrap_or(0.0) != 0.0,
            };
            constraint_certify(spec, &built.x, &built.z, property, &copts)
        }
        BuiltProblem::Variational(spec) => {
            variational_certify(spec, &built.x, &built.z, property)?
        }
        BuiltProblem::Stationary(spec) => match property {
            Property::MetricRegularity => {
                stationary_metric_regularity(spec, &built.x, &built.z)?
            }
            Property::LipschitzLike => {
                let derived = spec.derived_system()?;
                variational_certify(&derived, &built.x, &built.z, property)?
            }
        },
        BuiltProblem::Mpec(_) => {
            return Err(Error::SchemaError {
                line: 0,
                message: "mpec problems use the check-mpec command".into(),
            })
        }
    };
    let code = verdict_exit_code(cert.verdict);
    report.verdict_summary = format!("{}", super::report::verdict_str(cert.verdict));
    report.certificates.push(certificate_json(&cert));
    Ok((std::mem::replace(report, Report::new("", "")), code))
}

fn run_estimate(
    built: &super::build::Built,
    grid: usize,
    radius: f64,
    seed: u64,
    report: &mut Report,
) -> Result<(Report, i32)> {
    // The sampled object is the solution map of the system (or the expected
    // map when the solution map is not polyhedrally evaluable).
    let (lip, reg) = match &built.problem {
        BuiltProblem::Constraint(spec) => {
            let p = GraphPoint::new(built.x.clone(), built.z.clone());
            let g = GridSpec::new(built.x.clone(), radius, grid, seed)?;
            match constraint_solution_map(spec) {
                Ok(map) => {
                    (empirical_lip(&map, &p, &g)?, empirical_reg(&map, &p, &g)?)
                }
                Err(_) => {
                    let xz = spec.joint(&built.x, &built.z);
                    let e = crate::stochastic::expected_map(&spec.phi, &spec.model, &xz)?;
                    let y = e.vertices().into_iter().next().unwrap_or_else(|| {
                        DVector::zeros(spec.phi.output_dim())
                    });
                    let map = ExpectedMapFn { phi: &spec.phi, model: &spec.model };
                    let p = GraphPoint::new(xz.clone(), y);
                    let g = GridSpec::new(xz, radius, grid, seed)?;
                    (empirical_lip(&map, &p, &g)?, empirical_reg(&map, &p, &g)?)
                }
            }
        }
        BuiltProblem::Variational(spec) => {
            let map = variational_solution_map(spec)?;
            let p = GraphPoint::new(built.x.clone(), built.z.clone());
            let g = GridSpec::new(built.x.clone(), radius, grid, seed)?;
            (empirical_lip(&map, &p, &g)?, empirical_reg(&map, &p, &g)?)
        }
        BuiltProblem::Stationary(spec) => {
            let derived = spec.derived_system()?;
            let map = variational_solution_map(&derived)?;
            let p = GraphPoint::new(built.x.clone(), built.z.clone());
            let g = GridSpec::new(built.x.clone(), radius, grid, seed)?;
            (empirical_lip(&map, &p, &g)?, empirical_reg(&map, &p, &g)?)
        }
        BuiltProblem::Mpec(spec) => {
            let map = variational_solution_map(&spec.s)?;
            let p = GraphPoint::new(built.x.clone(), built.z.clone());
            let g = GridSpec::new(built.x.clone(), radius, grid, seed)?;
            (empirical_lip(&map, &p, &g)?, empirical_reg(&map, &p, &g)?)
        }
    };
    report.empirical.push(empirical_json("lip", &lip));
    report.empirical.push(empirical_json("reg", &reg));
    report.verdict_summary = "empirical estimates emitted".into();
    Ok((std::mem::replace(report, Report::new("", "")), 0))
}

fn run_check_mpec(
    built: &super::build::Built,
    report: &mut Report,
) -> Result<(Report, i32)> {
    let BuiltProblem::Mpec(spec) = &built.problem else {
        return Err(Error::SchemaError {
            line: 0,
            message: "check-mpec needs a problem of kind mpec".into(),
        });
    };
    match mpec_check(spec, &built.x, &built.z) {
        Ok(r) => {
            report.assumptions_log = r.assumptions_log.clone();
            report.mpec = Some(json!({
                "residual": num(r.residual),
                "satisfied": r.satisfied,
                "threshold": num(crate::tol::TAU_OPT),
                "references": r.references,
            }));
            let code = if r.satisfied { 0 } else { 2 };
            report.verdict_summary = if r.satisfied {
                "stationarity conditions satisfied".into()
            } else {
                "stationarity conditions violated".into()
            };
            Ok((std::mem::replace(report, Report::new("", "")), code))
        }
        Err(e @ Error::AdjointNontrivial { .. }) => {
            report.assumptions_log.push(format!("{e}"));
            report.verdict_summary = "inconclusive: adjoint gate failed".into();
            Ok((std::mem::replace(report, Report::new("", "")), 3))
        }
        Err(e) => Err(e),
    }
}
