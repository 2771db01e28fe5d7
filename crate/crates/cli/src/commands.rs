use std::path::Path;

use anyhow::anyhow;
use cad_core::interval::{localize as run_localize, TrialMatrix};
use cad_core::procedures::{cad_run, PValueMap, RejectionDocument};
use cad_core::sim::{
    brute_force_eq2, compare_procedures, vertex_frequencies, Procedure, SimConfig, SimReport,
};
use cad_core::tree::{validate_lb as lb_violations, TreeDocument};
use cad_core::wavelet::{denoise_with, LevelThreshold, SigmaMode, ThresholdOptions};
use serde::Serialize;

use crate::io::{
    read_csv_column, read_json, read_matrix, read_series, write_csv, write_json, write_series,
};
use crate::{
    BruteForceArgs, CompareArgs, DenoiseArgs, Failure, LocalizeArgs, Outcome, SimulateArgs,
    ValidateLbArgs,
};

fn load_config(
    path: &Path,
    seed: Option<u64>,
    replications: Option<u64>,
) -> Result<SimConfig, Failure> {
    let mut config: SimConfig = read_json(path).map_err(Failure::usage)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if replications.is_some() {
        config.replications = replications;
    }
    config.validate()?;
    Ok(config)
}

fn emit_reports(
    reports: &[SimReport],
    out: Option<&Path>,
    csv: Option<&Path>,
    single: bool,
) -> Outcome {
    if single {
        write_json(out, &reports[0]).map_err(Failure::runtime)?;
    } else {
        write_json(out, &reports).map_err(Failure::runtime)?;
    }
    if let Some(p) = csv {
        write_csv(p, &vertex_frequencies(reports)?).map_err(Failure::runtime)?;
    }
    if out.is_some() {
        print!("{}", cad_core::sim::comparison_table(reports));
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs, seed: Option<u64>) -> Outcome {
    let config = load_config(&args.config, seed, args.replications)?;
    let procedure: Procedure = args.procedure.parse()?;
    let report = cad_core::sim::simulate(&config, procedure)?;
    emit_reports(&[report], args.out.as_deref(), args.csv.as_deref(), true)
}

pub fn compare(args: CompareArgs, seed: Option<u64>) -> Outcome {
    let config = load_config(&args.config, seed, args.replications)?;
    let procedures: Vec<Procedure> = if args.procedures.is_empty() {
        Procedure::ALL.to_vec()
    } else {
        args.procedures
            .iter()
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()?
    };
    let cmp = compare_procedures(&config, &procedures)?;
    emit_reports(
        &cmp.reports,
        args.out.as_deref(),
        args.csv.as_deref(),
        false,
    )
}

pub fn brute_force(args: BruteForceArgs, seed: u64) -> Outcome {
    let report = brute_force_eq2(
        args.max_depth,
        &args.branchings,
        args.alpha,
        args.random_allocations,
        seed,
    )?;
    for s in &report.shapes {
        println!(
            "branching {:?}: {} vertices, {} allocations, {} {} cases, max ratio {:.12}, {} violations",
            s.branching,
            s.vertices,
            s.allocations,
            s.cases_checked,
            if s.literal { "assignment" } else { "first-true-set" },
            s.max_ratio,
            s.violations
        );
    }
    println!(
        "cases checked: {}  max sum: {:.15e}  alpha: {}  violations: {}",
        report.cases_checked, report.max_sum, report.alpha, report.violations
    );
    if let Some(p) = &args.out {
        write_json(Some(p), &report).map_err(Failure::runtime)?;
    }
    if report.passed() {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(Failure::runtime(anyhow!(
            "{} violations of the first-true level bound",
            report.violations
        )))
    }
}

#[derive(Serialize)]
struct DenoiseMetadata {
    n: usize,
    alpha: f64,
    sigma: f64,
    sigma_estimated: bool,
    start_level: u32,
    kept: usize,
    thresholds: Vec<LevelThreshold>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mse_in: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mse_out: Option<f64>,
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

pub fn denoise(args: DenoiseArgs) -> Outcome {
    let signal = match &args.column {
        Some(c) => read_csv_column(&args.input, c),
        None => read_series(&args.input),
    }
    .map_err(Failure::usage)?;
    let (mode, estimated) = match args.sigma.trim() {
        "estimate" => (SigmaMode::Estimate, true),
        s => {
            let v: f64 = s.parse().map_err(|_| {
                Failure::usage(anyhow!("--sigma must be a number or `estimate`, got {s:?}"))
            })?;
            (SigmaMode::Known(v), false)
        }
    };
    let reference = match &args.reference {
        Some(p) => {
            let r = read_series(p).map_err(Failure::usage)?;
            if r.len() != signal.len() {
                return Err(Failure::usage(anyhow!(
                    "reference has {} values, signal has {}",
                    r.len(),
                    signal.len()
                )));
            }
            Some(r)
        }
        None => None,
    };
    let options = ThresholdOptions {
        alpha: args.alpha,
        start_level: args.start_level,
    };
    let result = denoise_with(&signal, options, mode)?;
    write_series(args.out.as_deref(), &result.signal).map_err(Failure::runtime)?;
    let meta = DenoiseMetadata {
        n: signal.len(),
        alpha: args.alpha,
        sigma: result.sigma,
        sigma_estimated: estimated,
        start_level: args.start_level,
        kept: result.kept,
        thresholds: result.thresholds,
        mse_in: reference.as_ref().map(|r| mse(&signal, r)),
        mse_out: reference.as_ref().map(|r| mse(&result.signal, r)),
    };
    if let Some(p) = &args.metadata {
        write_json(Some(p), &meta).map_err(Failure::runtime)?;
    }
    Ok(())
}

pub fn localize(args: LocalizeArgs) -> Outcome {
    let rows = read_matrix(&args.input, args.header).map_err(Failure::usage)?;
    let trials = TrialMatrix::from_rows(rows, args.sigma)?;
    let loc = run_localize(&trials, args.alpha, args.depth, args.arity)?;
    write_json(args.out.as_deref(), &loc).map_err(Failure::runtime)
}

#[derive(Serialize)]
struct LbViolation {
    vertex: usize,
    level: f64,
    children_sum: f64,
}

#[derive(Serialize)]
struct LbReport {
    vertices: usize,
    depth: usize,
    branching: Vec<usize>,
    alpha_root: f64,
    valid: bool,
    violations: Vec<LbViolation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    procedure: Option<RejectionDocument>,
}

pub fn validate_lb(args: ValidateLbArgs) -> Outcome {
    let doc: TreeDocument = read_json(&args.input).map_err(Failure::usage)?;
    let (tree, alloc) = doc.build()?;
    let violations: Vec<LbViolation> = lb_violations(&tree, &alloc)?
        .into_iter()
        .map(|v| LbViolation {
            vertex: v,
            level: alloc.levels()[v],
            children_sum: tree.children(v).iter().map(|&c| alloc.levels()[c]).sum(),
        })
        .collect();
    let valid = violations.is_empty();
    let procedure = match (&args.pvalues, valid) {
        (Some(p), true) => {
            let pv = PValueMap::from_vec(read_series(p).map_err(Failure::usage)?)?;
            Some(cad_run(&tree, &alloc, &pv)?.document(None))
        }
        _ => None,
    };
    let report = LbReport {
        vertices: tree.len(),
        depth: doc.depth,
        branching: doc.branching,
        alpha_root: doc.alpha_root,
        valid,
        violations,
        procedure,
    };
    write_json(args.out.as_deref(), &report).map_err(Failure::runtime)?;
    if valid {
        Ok(())
    } else {
        Err(Failure::runtime(anyhow!(
            "local Bonferroni condition violated at {} vertices",
            report.violations.len()
        )))
    }
}
