//! Acceptance checks. Each criterion prints one `[PASS]` or `[FAIL]` line;
//! the process exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use cad_core::interval::{build_interval_tree, localize_on, TrialMatrix};
use cad_core::procedures::{cad_extended_run, cad_run, LocalProcedure, PValueMap};
use cad_core::sim::{
    brute_force_eq2, compare_procedures, fwer_upper_limit, simulate, Dependence, Procedure,
    SimConfig, SimReport, TruthSpec,
};
use cad_core::stats::{std_normal_cdf, std_normal_quantile};
use cad_core::tree::{allocate_alpha_uniform, AlphaAllocation, TestTree};
use cad_core::wavelet::{
    blocks, cad_threshold_with, denoise, haar_forward, haar_inverse, SigmaMode, ThresholdOptions,
};
use common::{all_complete_trees, erf_series_cdf, naive_cad, skewed_pvalues};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let report = brute_force_eq2(3, &[2, 3], 0.05, 10, 1).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let assignments: u128 = report
        .shapes
        .iter()
        .map(|s| s.assignments_covered * s.allocations as u128)
        .sum();
    check(
        report.passed() && report.shapes.len() == 15 && secs < 30.0,
        format!(
            "{} shapes, {} cases ({assignments} assignment/allocation pairs), \
             max sum {:.6e}, {} violations, {secs:.1}s (limit 30s)",
            report.shapes.len(),
            report.cases_checked,
            report.max_sum,
            report.violations
        ),
    )
}

fn fwer_line(r: &SimReport, alpha: f64) -> (bool, String) {
    let limit = r.fwer_upper_limit(alpha);
    (
        r.fwer_hat <= limit,
        format!(
            "{}: fwer_hat {:.5} <= {:.5} (N={}, {:.1}s)",
            r.procedure, r.fwer_hat, limit, r.replications, r.wall_time_secs
        ),
    )
}

fn ac2(reports: &mut Vec<SimReport>) -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for dep in [Dependence::Independent, Dependence::NestedMeans] {
        let mut cfg = SimConfig::tree(vec![2; 4]);
        cfg.replications = Some(200_000);
        cfg.dependence = dep;
        let r = simulate(&cfg, Procedure::Cad).map_err(|e| e.to_string())?;
        let (pass, line) = fwer_line(&r, cfg.alpha);
        ok &= pass && r.wall_time_secs < 60.0;
        details.push(format!("{dep:?} {line}"));
        reports.push(r);
    }
    check(ok, details.join("; "))
}

fn ac3(reports: &mut Vec<SimReport>) -> Outcome {
    let mut cfg = SimConfig::tree(vec![2; 3]);
    cfg.replications = Some(100_000);
    // Leaf 7 is the leftmost depth-3 vertex; its root path is 0-1-3-7.
    cfg.truth = TruthSpec::FalsePath(7);
    cfg.effect = 3.0;
    cfg.local_procedure = LocalProcedure::Holm;
    let r = simulate(&cfg, Procedure::CadExtended).map_err(|e| e.to_string())?;
    let (pass, line) = fwer_line(&r, cfg.alpha);
    let power = r.power_hat;
    reports.push(r);
    check(pass, format!("{line}, power {power:.3}"))
}

fn ac4(reports: &mut Vec<SimReport>) -> Outcome {
    let mut cfg = SimConfig::tree(vec![3, 2, 2]);
    cfg.replications = Some(20_000);
    cfg.truth = TruthSpec::Random { density: 0.5 };
    cfg.effect = 2.5;
    let cmp = compare_procedures(&cfg, &Procedure::ALL).map_err(|e| e.to_string())?;
    reports.extend(cmp.reports);
    let mut bad = Vec::new();
    for r in reports.iter() {
        if r.domination_violations != 0 || r.fdr_hat > r.fwer_hat || r.pcer_hat > r.fwer_hat {
            bad.push(format!(
                "{} (fdr {:.4}, pcer {:.4}, fwer {:.4}, {} per-replication violations)",
                r.procedure, r.fdr_hat, r.pcer_hat, r.fwer_hat, r.domination_violations
            ));
        }
    }
    let total: u64 = reports.iter().map(|r| r.replications).sum();
    check(
        bad.is_empty(),
        format!(
            "{} reports, {total} replications checked{}",
            reports.len(),
            if bad.is_empty() {
                String::new()
            } else {
                format!("; failing: {}", bad.join(", "))
            }
        ),
    )
}

fn chain(len: usize) -> TestTree {
    let children = (0..len)
        .map(|v| if v + 1 < len { vec![v + 1] } else { vec![] })
        .collect();
    TestTree::from_children(children).unwrap()
}

fn ac5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        // Extended tree: n + 1 vertices; hypothesis i sits on vertex i + 1
        // and is tested at the level of vertex i.
        let mut levels = Vec::with_capacity(n + 1);
        let mut a: f64 = rng.random_range(0.01..0.5);
        for _ in 0..=n {
            levels.push(a);
            a *= rng.random_range(0.3..=1.0);
        }
        let ext_tree = chain(n + 1);
        let ext_alloc = AlphaAllocation::new(levels.clone()).unwrap();
        let plain_tree = chain(n);
        let plain_alloc = AlphaAllocation::new(levels[..n].to_vec()).unwrap();
        let p = skewed_pvalues(&mut rng, &levels[..n]);
        let local: BTreeMap<usize, Vec<f64>> = (0..n).map(|v| (v, vec![p[v]])).collect();
        let ext = cad_extended_run(&ext_tree, &ext_alloc, &local, LocalProcedure::Holm)
            .map_err(|e| e.to_string())?;
        let plain = cad_run(&plain_tree, &plain_alloc, &PValueMap::from_vec(p).unwrap())
            .map_err(|e| e.to_string())?;
        let shifted: std::collections::BTreeSet<usize> =
            ext.rejected.iter().map(|&v| v - 1).collect();
        let frontier: std::collections::BTreeSet<usize> =
            ext.frontier.iter().map(|&v| v - 1).collect();
        if shifted != plain.rejected || frontier != plain.frontier {
            mismatches += 1;
        }
    }
    check(
        mismatches == 0,
        format!("1000 random chains, {mismatches} mismatches"),
    )
}

fn ac6() -> Outcome {
    let shapes = all_complete_trees(15);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws = 10_000;
    let mut mismatches = 0u64;
    for shape in &shapes {
        let tree = shape.to_tree();
        let alloc = allocate_alpha_uniform(&tree, 0.2).unwrap();
        for _ in 0..draws {
            let p = skewed_pvalues(&mut rng, alloc.levels());
            let got = cad_run(&tree, &alloc, &PValueMap::from_vec(p.clone()).unwrap())
                .map_err(|e| e.to_string())?;
            if got.rejected != naive_cad(&tree, alloc.levels(), &p) {
                mismatches += 1;
            }
        }
    }
    check(
        mismatches == 0 && shapes.len() > 100,
        format!(
            "{} trees x {draws} draws, {mismatches} mismatches",
            shapes.len()
        ),
    )
}

fn ac7() -> Outcome {
    let mut max_cdf = 0.0f64;
    for i in -8000..=8000 {
        let x = i as f64 / 1000.0;
        let err = (std_normal_cdf(x).unwrap() - erf_series_cdf(x)).abs();
        max_cdf = max_cdf.max(err);
    }
    let mut max_rt = 0.0f64;
    for i in -600..=600 {
        let x = i as f64 / 100.0;
        let back = std_normal_quantile(std_normal_cdf(x).unwrap()).unwrap();
        max_rt = max_rt.max((back - x).abs());
    }
    check(
        max_cdf <= 1e-12 && max_rt <= 1e-8,
        format!(
            "cdf max error {max_cdf:.3e} (<= 1e-12) on [-8,8] step 0.001; \
             quantile round trip {max_rt:.3e} (<= 1e-8) on [-6,6] step 0.01"
        ),
    )
}

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut max_rt = 0.0f64;
    let mut max_energy = 0.0f64;
    for k in 2..=14 {
        let n = 1usize << k;
        for _ in 0..5 {
            let x: Vec<f64> = (0..n)
                .map(|_| rng.random_range(-100.0..100.0) * rng.random::<f64>())
                .collect();
            let w = haar_forward(&x).map_err(|e| e.to_string())?;
            let y = haar_inverse(&w).map_err(|e| e.to_string())?;
            let rt = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let e_in: f64 = x.iter().map(|v| v * v).sum();
            let rel = (w.energy() - e_in).abs() / e_in;
            max_rt = max_rt.max(rt);
            max_energy = max_energy.max(rel);
        }
    }
    check(
        max_rt <= 1e-10 && max_energy <= 1e-9,
        format!(
            "n = 4..2^14: round trip {max_rt:.3e} (<= 1e-10), \
             energy {max_energy:.3e} relative (<= 1e-9)"
        ),
    )
}

fn ac9() -> Outcome {
    let n = 1024;
    let reps: u64 = 20_000;
    let alpha = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut any = 0u64;
    let mut increasing = true;
    let mut thresholds = Vec::new();
    for _ in 0..reps {
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let w = haar_forward(&x).map_err(|e| e.to_string())?;
        let t =
            cad_threshold_with(&w, ThresholdOptions::new(alpha), 1.0).map_err(|e| e.to_string())?;
        any += (t.kept_count > 0) as u64;
        if thresholds.is_empty() {
            thresholds = t.thresholds.iter().map(|l| l.threshold).collect();
            increasing = thresholds.windows(2).all(|p| p[1] > p[0]);
        }
    }
    let rate = any as f64 / reps as f64;
    let limit = fwer_upper_limit(alpha, reps);
    check(
        rate <= limit && increasing && !thresholds.is_empty(),
        format!(
            "any kept in {rate:.5} of {reps} (<= {limit:.5}); thresholds {} strictly increasing: {:?}",
            if increasing { "are" } else { "NOT" },
            thresholds.iter().map(|t| (t * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        ),
    )
}

fn ac10() -> Outcome {
    let n = 1024;
    let truth = blocks(n, 8.0);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let runs = 500;
    let mut better = 0;
    let mut ratio_sum = 0.0;
    for _ in 0..runs {
        let noisy: Vec<f64> = truth
            .iter()
            .map(|&t| t + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let out = denoise(&noisy, 0.05, SigmaMode::Known(1.0)).map_err(|e| e.to_string())?;
        let mse = |v: &[f64]| -> f64 {
            v.iter()
                .zip(&truth)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / n as f64
        };
        let (m_in, m_out) = (mse(&noisy), mse(&out.signal));
        better += (m_out < m_in) as usize;
        ratio_sum += m_in / m_out;
    }
    let frac = better as f64 / runs as f64;
    check(
        frac >= 0.95,
        format!(
            "output MSE < input MSE in {better}/{runs} runs ({frac:.3} >= 0.95); \
             mean improvement factor {:.2}",
            ratio_sum / runs as f64
        ),
    )
}

fn ac11() -> Outcome {
    let (len, trials, depth, sigma, alpha) = (256, 50, 5, 1.0, 0.05);
    let itree = build_interval_tree(len, depth, 2).map_err(|e| e.to_string())?;
    let planted = (104, 112);
    let leaf = itree
        .nodes()
        .iter()
        .find(|n| n.depth == depth && (n.start, n.end) == planted)
        .ok_or("planted interval is not a leaf")?
        .vertex;
    let delta = 10.0 * sigma / (trials as f64).sqrt();
    let mut mean = vec![0.0; len];
    mean[planted.0..planted.1]
        .iter_mut()
        .for_each(|m| *m = delta);
    let zero = vec![0.0; len];

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let runs = 1000;
    let mut hit = 0;
    for _ in 0..runs {
        let data =
            TrialMatrix::synthetic(trials, &mean, sigma, &mut rng).map_err(|e| e.to_string())?;
        let loc = localize_on(&data, &itree, alpha).map_err(|e| e.to_string())?;
        hit += loc.rejected.contains(&leaf) as usize;
    }
    let null_runs: u64 = 10_000;
    let mut any = 0u64;
    for _ in 0..null_runs {
        let data =
            TrialMatrix::synthetic(trials, &zero, sigma, &mut rng).map_err(|e| e.to_string())?;
        let loc = localize_on(&data, &itree, alpha).map_err(|e| e.to_string())?;
        any += !loc.rejected.is_empty() as u64;
    }
    let hit_rate = hit as f64 / runs as f64;
    let null_rate = any as f64 / null_runs as f64;
    let limit = fwer_upper_limit(alpha, null_runs);
    check(
        hit_rate >= 0.99 && null_rate <= limit,
        format!(
            "planted leaf [{}, {}) rejected in {hit}/{runs} ({hit_rate:.3} >= 0.99); \
             pure noise rejects in {null_rate:.4} of {null_runs} (<= {limit:.4})",
            planted.0, planted.1
        ),
    )
}

fn main() {
    let mut reports = Vec::new();
    let results: Vec<(&str, &str, Outcome)> = vec![
        ("AC1", "first-true level sums never exceed alpha", ac1()),
        ("AC2", "FWER control, binary depth 4", ac2(&mut reports)),
        (
            "AC3",
            "FWER control, extended procedure with Holm",
            ac3(&mut reports),
        ),
        ("AC4", "FDR and PCER dominated by FWER", ac4(&mut reports)),
        (
            "AC5",
            "extended procedure with single children reduces to plain",
            ac5(),
        ),
        (
            "AC6",
            "agreement with naive recursion on small trees",
            ac6(),
        ),
        ("AC7", "normal kernel accuracy", ac7()),
        ("AC8", "Haar round trip and energy", ac8()),
        ("AC9", "wavelet thresholding FWER under pure noise", ac9()),
        ("AC10", "denoising reduces MSE", ac10()),
        ("AC11", "interval localization", ac11()),
    ];

    let mut failed = 0;
    for (id, name, outcome) in &results {
        match outcome {
            Ok(d) => println!("[PASS] {id} {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("[FAIL] {id} {name}: {d}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
