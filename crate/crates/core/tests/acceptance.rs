//! Acceptance gate: one pass/fail line per criterion.

use std::time::Instant;

use momentgate::conditions::{check_condition, Condition, Status};
use momentgate::indices::{gamma_index, omega_index};
use momentgate::moments::{inclusion_fit, laplace_derivative, moment, TestFunction, LAPLACE_FD_STEP};
use momentgate::quadrature::QuadPlan;
use momentgate::report::{parse_grid, sweep, Family, RunConfig, SummaryRow};
use momentgate::special::{
    default_g_grid, default_upper_grid, g_weight, verify_g_decay, verify_poisson_lower_bound,
};
use momentgate::verdicts::{classify_with, MomentMapReport};
use momentgate::verify::{run_suite, Suite, VerifyReport};
use momentgate::{dc_minorant, DeriveOp, Exec, Result, SequenceSpec, TailRule, WeightSequence};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }
}

fn holds(status: &str) -> bool {
    matches!(status, "exact_holds" | "holds_at_horizon")
}

fn gevrey_sweep() -> Result<(Vec<SummaryRow>, f64)> {
    let grid = parse_grid("0.2:3.0:0.2")?;
    let start = Instant::now();
    let rows = sweep(Family::Gevrey, &grid, &RunConfig::default(), None)?;
    Ok((rows, start.elapsed().as_secs_f64()))
}

fn criterion_1(rows: &[SummaryRow], seconds: f64) -> Outcome {
    let wrong: Vec<String> = rows
        .iter()
        .filter(|r| {
            let s = r.param.unwrap();
            !r.error.is_empty() || holds(&r.injective) != (s <= 1.0) || holds(&r.surjective) != (s > 1.0)
        })
        .map(|r| format!("{}: injective {} surjective {} {}", r.label, r.injective, r.surjective, r.error))
        .collect();
    Outcome::new(
        wrong.is_empty() && rows.len() == 15 && seconds < 5.0,
        format!("{} rows, {seconds:.2} s, mismatches {wrong:?}", rows.len()),
    )
}

fn criterion_2() -> Result<Outcome> {
    let blocks = WeightSequence::blocks();
    let omega = omega_index(&blocks, 100_000)?;
    let gamma = gamma_index(&blocks, 100_000, 64.0, 0.05)?;
    let half_spec = SequenceSpec::derived(DeriveOp::Power { s: 0.5 }, SequenceSpec::Blocks);
    let half = WeightSequence::new(&half_spec)?;
    let gamma_half = gamma_index(&half, 100_000, 64.0, 0.05)?;
    let report = classify_with(&half_spec, &RunConfig::default().analysis())?;
    let w = omega.estimate.value();
    let ok = (2.45..=2.55).contains(&w)
        && gamma.contains(2.0, 0.0)
        && gamma.width() <= 0.2
        && gamma_half.contains(1.0, 0.0)
        && !report.injective.status.holds()
        && !report.surjective.status.holds();
    Ok(Outcome::new(
        ok,
        format!(
            "omega {w:.5}, gamma [{:?}, {:?}], half-power gamma [{:?}, {:?}], half-power injective {} surjective {}",
            gamma.lower,
            gamma.upper.value(),
            gamma_half.lower,
            gamma_half.upper.value(),
            report.injective.status,
            report.surjective.status
        ),
    ))
}

/// Explicit sequence with nondecreasing log m_p continued by c·log p.
fn random_lc_spec(rng: &mut ChaCha8Rng) -> SequenceSpec {
    let c = rng.gen_range(0.2..3.0);
    let n = rng.gen_range(8..64usize);
    let top = c * (n as f64).ln();
    let mut log_m: Vec<f64> = (0..n).map(|_| rng.gen_range(top - 3.0..top)).collect();
    log_m.sort_by(f64::total_cmp);
    SequenceSpec::Explicit {
        log_m,
        tail: TailRule::Power { c },
    }
}

/// Explicit sequence with log(p+1) + log m_p nondecreasing (so p! M_p is
/// log-convex) but log m_p itself allowed to dip, continued by c·log p.
fn random_wlc_spec(rng: &mut ChaCha8Rng) -> SequenceSpec {
    let c = rng.gen_range(0.2..3.0);
    let n = rng.gen_range(8..64usize);
    let top = (n as f64).ln_1p() + c * (n as f64).ln();
    let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(top - 6.0..top)).collect();
    u.sort_by(f64::total_cmp);
    let log_m = u.iter().enumerate().map(|(p, v)| v - (p as f64).ln_1p()).collect();
    SequenceSpec::Explicit {
        log_m,
        tail: TailRule::Power { c },
    }
}

fn criterion_3(gevrey_rows: &[SummaryRow]) -> Result<Outcome> {
    let config = RunConfig::default();
    let mut rows = gevrey_rows.to_vec();
    rows.extend(sweep(Family::QGevrey, &[1.5, 2.0, 4.0], &config, None)?);
    rows.extend(sweep(Family::Example38Power, &parse_grid("0.25:2.0:0.25")?, &config, None)?);
    let mut violations: Vec<String> = rows
        .iter()
        .filter(|r| !r.error.is_empty() || (holds(&r.injective) && holds(&r.surjective)))
        .map(|r| format!("{}: {} {} {}", r.label, r.injective, r.surjective, r.error))
        .collect();
    let index_gap = |r: &SummaryRow| -> Option<String> {
        let upper: f64 = r.gamma_upper.parse().unwrap_or(f64::INFINITY);
        let omega: f64 = r.omega_estimate.parse().unwrap_or(f64::INFINITY);
        (holds(&r.lc) && upper > omega + 0.1).then(|| format!("{}: gamma {upper} > omega {omega}", r.label))
    };
    violations.extend(rows.iter().filter_map(index_gap));

    let mut rng = ChaCha8Rng::seed_from_u64(38);
    let specs: Vec<SequenceSpec> = (0..200).map(|_| random_lc_spec(&mut rng)).collect();
    let opts = config.analysis();
    let reports: Vec<Result<MomentMapReport>> = Exec::Parallel.map(&specs, |s| classify_with(s, &opts));
    let mut lc_dc = 0;
    for (spec, r) in specs.iter().zip(reports) {
        match r {
            Ok(r) => {
                let lc = r.hypotheses["lc"].status.holds();
                if lc && r.hypotheses["dc"].status.holds() {
                    lc_dc += 1;
                }
                if r.injective.status.holds() && r.surjective.status.holds() {
                    violations.push(format!("{}: bijective", spec.to_json()));
                }
                let upper = r.indices.gamma.upper.value();
                let omega = r.indices.omega.estimate.value();
                if lc && upper > omega + 0.1 {
                    violations.push(format!("{}: gamma {upper} > omega {omega}", spec.to_json()));
                }
            }
            Err(e) => violations.push(format!("{}: {e}", spec.to_json())),
        }
    }
    Ok(Outcome::new(
        violations.is_empty() && lc_dc == 200,
        format!(
            "{} sweep rows, 200 random sequences ({lc_dc} with lc+dc at horizon), violations {violations:?}",
            rows.len()
        ),
    ))
}

fn criterion_4() -> Result<Outcome> {
    const HORIZON: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let specs: Vec<SequenceSpec> = (0..50).map(|_| random_wlc_spec(&mut rng)).collect();
    let results: Vec<Result<Option<String>>> = Exec::Parallel.map(&specs, |spec| {
        let m = WeightSequence::new(spec)?;
        for cond in [Condition::Wlc, Condition::Nq] {
            let v = check_condition(&m, cond, HORIZON)?;
            if !v.status.holds() {
                return Ok(Some(format!("input {cond} {}", v.status)));
            }
        }
        let n = dc_minorant(&m)?;
        let wlc = check_condition(&n, Condition::Wlc, HORIZON)?;
        let dc = check_condition(&n, Condition::Dc, HORIZON)?;
        let nq = check_condition(&n, Condition::Nq, HORIZON)?;
        let h = dc.constant("H").unwrap_or(f64::INFINITY);
        let numeric_dc = dc.criterion.is_some_and(Status::holds);
        if !(wlc.status.holds() && dc.status.holds() && numeric_dc && h <= 2.0 + 1e-12 && nq.status.holds()) {
            return Ok(Some(format!(
                "wlc {} dc {} (numeric {:?}, H {h}) nq {}",
                wlc.status, dc.status, dc.criterion, nq.status
            )));
        }
        let fit = inclusion_fit(&n, &m, HORIZON)?;
        if !(fit.h.is_finite() && fit.c.is_finite()) {
            return Ok(Some(format!("inclusion fit C {} h {}", fit.c, fit.h)));
        }
        Ok(None)
    });
    let failures: Vec<String> = specs
        .iter()
        .zip(results)
        .filter_map(|(s, r)| match r {
            Ok(None) => None,
            Ok(Some(why)) => Some(format!("{}: {why}", s.to_json())),
            Err(e) => Some(format!("{}: {e}", s.to_json())),
        })
        .collect();
    Ok(Outcome::new(
        failures.is_empty(),
        format!("50 inputs, failures {failures:?}"),
    ))
}

fn suite_outcome(report: &VerifyReport, names: &[&str]) -> Outcome {
    let picked: Vec<_> = report
        .checks
        .iter()
        .filter(|c| names.contains(&c.name.as_str()))
        .collect();
    let passed = picked.len() == names.len() && picked.iter().all(|c| c.passed);
    let detail = picked
        .iter()
        .map(|c| format!("{} {} (measured {:.3e}, tolerance {:.1e})", c.name, if c.passed { "ok" } else { "FAILED" }, c.measured, c.tolerance))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(passed, detail)
}

fn criterion_5() -> Result<Outcome> {
    let report = run_suite(Suite::Inversion, &RunConfig::default())?;
    Ok(suite_outcome(
        &report,
        &["rational_round_trip", "phase_round_trip", "inversion_runtime_seconds"],
    ))
}

fn criterion_6() -> Result<Outcome> {
    let plan = QuadPlan::default();
    let mut parts = Vec::new();
    let mut passed = true;
    for s in [2.0, 1.0] {
        let hat = g_weight(&WeightSequence::gevrey(s)?)?;
        let grid = default_upper_grid();
        let r = verify_poisson_lower_bound(|t| hat.eval(2.0 * t), &grid, &plan, Exec::Parallel)?;
        passed &= r.passed && r.points.len() == 50 && r.tolerance <= 1e-6;
        parts.push(format!("lower bound gevrey({s}) sup excess {:.4} on {} points", r.sup_excess, r.points.len()));
    }
    let r = verify_g_decay(&WeightSequence::gevrey(2.0)?, &default_g_grid(), &plan, Exec::Parallel)?;
    passed &= r.passed && r.points.len() == 50 && r.tolerance <= 1e-4;
    parts.push(format!("g decay gevrey(2) sup excess {:.4} on {} points", r.sup_excess, r.points.len()));
    Ok(Outcome::new(passed, parts.join("; ")))
}

fn criterion_9() -> Result<Outcome> {
    let plan = QuadPlan::default();
    let phi = TestFunction::exp_power(1.0)?;
    let d2 = laplace_derivative(&phi, 2, LAPLACE_FD_STEP, &plan)?;
    let mu2 = moment(&phi, 2, &plan)?.value;
    let err = (d2.re + mu2).abs();
    Ok(Outcome::new(
        err <= 1e-4 && d2.im.abs() <= 1e-4,
        format!("L''(0) = {d2}, -mu_2 = {}, error {err:.2e}", -mu2),
    ))
}

fn criterion_10() -> Result<Outcome> {
    let mut passed = true;
    let mut parts = Vec::new();
    for q in [1.5, 2.0, 4.0] {
        let seq = WeightSequence::q_gevrey(q)?;
        let lc = check_condition(&seq, Condition::Lc, 10_000)?;
        let dc = check_condition(&seq, Condition::Dc, 10_000)?;
        let mg = check_condition(&seq, Condition::Mg, 10_000)?;
        let gamma = gamma_index(&seq, 10_000, 64.0, 0.05)?;
        let ok = lc.status.holds()
            && lc.criterion.is_some_and(Status::holds)
            && dc.status.holds()
            && dc.criterion.is_some_and(Status::holds)
            && mg.status == Status::Fails
            && mg.criterion == Some(Status::Fails)
            && mg.witness.is_some()
            && gamma.upper.is_infinite();
        passed &= ok;
        parts.push(format!(
            "q {q}: lc {} dc {} mg {} (numeric {:?}, witness {:?}) gamma upper {}",
            lc.status,
            dc.status,
            mg.status,
            mg.criterion,
            mg.witness,
            serde_json::to_string(&gamma.upper).unwrap_or_default()
        ));
    }
    Ok(Outcome::new(passed, parts.join("; ")))
}

fn settle(r: Result<Outcome>) -> Outcome {
    r.unwrap_or_else(|e| Outcome::new(false, format!("error: {e}")))
}

#[test]
fn acceptance() {
    let mut outcomes: Vec<(u32, Outcome)> = Vec::new();
    match gevrey_sweep() {
        Ok((rows, seconds)) => {
            outcomes.push((1, criterion_1(&rows, seconds)));
            outcomes.push((2, settle(criterion_2())));
            outcomes.push((3, settle(criterion_3(&rows))));
        }
        Err(e) => {
            outcomes.push((1, Outcome::new(false, format!("error: {e}"))));
            outcomes.push((2, settle(criterion_2())));
            outcomes.push((3, Outcome::new(false, "gevrey sweep failed")));
        }
    }
    outcomes.push((4, settle(criterion_4())));
    outcomes.push((5, settle(criterion_5())));
    outcomes.push((6, settle(criterion_6())));
    match run_suite(Suite::Moments, &RunConfig::default()) {
        Ok(report) => {
            outcomes.push((
                7,
                suite_outcome(
                    &report,
                    &["exp_power_moments", "lambda_fit_accepts_exp_power", "lambda_fit_rejects_cubed_factorial"],
                ),
            ));
            outcomes.push((8, suite_outcome(&report, &["origin_derivative_identity", "bump_taylor_bound"])));
        }
        Err(e) => {
            outcomes.push((7, Outcome::new(false, format!("error: {e}"))));
            outcomes.push((8, Outcome::new(false, format!("error: {e}"))));
        }
    }
    outcomes.push((9, settle(criterion_9())));
    outcomes.push((10, settle(criterion_10())));

    for (n, o) in &outcomes {
        println!("criterion {n}: {} {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<u32> = outcomes.iter().filter(|(_, o)| !o.passed).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
