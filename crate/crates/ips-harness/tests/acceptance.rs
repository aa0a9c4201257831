//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single verdict line (visible with `--nocapture`) and enforces its
//! runtime budget where one is defined. Tests serialize on a lock so the
//! budgets measure their own work even when the harness runs threaded.

use std::f64::consts::LN_2;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ips_core::geometry::hellinger_sq;
use ips_core::nets::{CandidateNet, DimensionBound};
use ips_core::selector::{eta_bar_of, mix_collections, run_selection, SelectionConfig};
use ips_core::simulate::simulate;
use ips_core::testing::TestOutcome;
use ips_core::{
    CovariateSet, EvalCtx, IntensitySurface, QuadratureRule, SqrtFunction, TimeDomain, TimeLaw,
};
use ips_harness::verify::{
    bracket_checks, concentration_checks, covering_checks, identity_checks, solver_checks,
    test_error_checks, CheckRow, Tolerances,
};
use ips_harness::{changepoint_report, presets, rate_slope, run_benchmark};

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn conclude(name: &str, t0: Instant, budget_s: Option<f64>, ok: bool, detail: &str) {
    let elapsed = t0.elapsed().as_secs_f64();
    let within = budget_s.map_or(true, |b| elapsed <= b);
    let verdict = if ok && within { "PASS" } else { "FAIL" };
    match budget_s {
        Some(b) => println!("{verdict} {name}: {detail} [{elapsed:.1}s of {b:.0}s budget]"),
        None => println!("{verdict} {name}: {detail} [{elapsed:.1}s]"),
    }
    assert!(ok, "{name}: {detail}");
    if let Some(b) = budget_s {
        assert!(within, "{name} took {elapsed:.1}s, over the {b:.0}s budget");
    }
}

fn summarize(rows: &[CheckRow]) -> (bool, String) {
    assert!(!rows.is_empty(), "a check suite produced no rows");
    let failed: Vec<&CheckRow> = rows.iter().filter(|r| !r.pass).collect();
    if failed.is_empty() {
        (true, format!("{} checks passed", rows.len()))
    } else {
        let names: Vec<&str> = failed.iter().map(|r| r.name.as_str()).collect();
        (false, format!("{}/{} checks failed: {}", failed.len(), rows.len(), names.join(", ")))
    }
}

#[test]
fn criterion_1_closed_form_identities() {
    let _guard = serial();
    let t0 = Instant::now();
    let rows = identity_checks(&Tolerances::default()).unwrap();
    let (ok, detail) = summarize(&rows);
    conclude("criterion 1 (closed-form identities)", t0, Some(10.0), ok, &detail);
}

#[test]
fn criterion_2_assumption_brackets() {
    let _guard = serial();
    let t0 = Instant::now();
    let rows = bracket_checks(&Tolerances::default()).unwrap();
    let (ok, detail) = summarize(&rows);
    conclude("criterion 2 (assumption brackets)", t0, Some(10.0), ok, &detail);
}

#[test]
fn criterion_3_concentration_bounds() {
    let _guard = serial();
    let t0 = Instant::now();
    let rows = concentration_checks(&Tolerances::default()).unwrap();
    let (ok, detail) = summarize(&rows);
    conclude("criterion 3 (concentration bounds)", t0, Some(120.0), ok, &detail);
}

#[test]
fn criterion_4_test_error_bounds() {
    let _guard = serial();
    let t0 = Instant::now();
    let rows = test_error_checks(&Tolerances::default()).unwrap();
    let (ok, detail) = summarize(&rows);
    conclude("criterion 4 (test error bounds)", t0, Some(120.0), ok, &detail);
}

#[test]
fn criterion_5_net_certification() {
    let _guard = serial();
    let t0 = Instant::now();
    let rows = covering_checks(&Tolerances::default()).unwrap();
    let (ok, detail) = summarize(&rows);
    conclude("criterion 5 (net certification)", t0, Some(60.0), ok, &detail);
}

#[test]
fn criterion_6_radius_solver() {
    let _guard = serial();
    let t0 = Instant::now();
    let rows = solver_checks(&Tolerances::default()).unwrap();
    let (ok, detail) = summarize(&rows);
    conclude("criterion 6 (radius solver)", t0, None, ok, &detail);
}

#[test]
fn criterion_7_selection_consistency() {
    let _guard = serial();
    let t0 = Instant::now();

    // Well-separated pair with the truth in the net: n H^2 = 25.
    let domain = TimeDomain::unit();
    let quad = QuadratureRule::for_domain(&domain).unwrap();
    let n = 200;
    let covariates = CovariateSet::trivial(n).unwrap();
    let ctx = EvalCtx::new(&domain, &covariates, &quad);
    let truth_member = SqrtFunction::Constant { level: 1.0 };
    let decoy = SqrtFunction::Constant { level: 1.5 };
    let hsq = hellinger_sq(&truth_member.square(), &decoy.square(), &ctx).unwrap();
    assert!(n as f64 * hsq >= 25.0 - 1e-9, "pair separation n H^2 = {}", n as f64 * hsq);
    let collection = vec![CandidateNet::new(
        "pair",
        vec![truth_member.clone(), decoy],
        0.2,
        DimensionBound::Constant(0.5),
        0.0,
    )
    .unwrap()];
    let truth = IntensitySurface::Constant { level: 1.0 };
    // Keep the radius floor below the pair separation so the verdict comes
    // from the pairwise test, not from the tie-break.
    let config = SelectionConfig { epsilon: 0.1, ..Default::default() };
    let reps = 200;
    let mut hits = 0;
    for rep in 0..reps {
        let obs = simulate(&truth, &ctx, 31_000 + rep).unwrap();
        let result = run_selection(&collection, &obs, &ctx, &config).unwrap();
        if result.chosen == truth_member {
            hits += 1;
        }
    }
    let pair_ok = hits >= 190;

    // Five candidates across two overlapping nets: recompute the selection
    // from raw pairwise tests and demand an exact match every replicate.
    let n = 120;
    let covariates = CovariateSet::trivial(n).unwrap();
    let ctx = EvalCtx::new(&domain, &covariates, &quad);
    let lvl = |level: f64| SqrtFunction::Constant { level };
    let coarse = CandidateNet::new(
        "coarse",
        vec![lvl(0.8), lvl(1.0), lvl(1.3), lvl(1.6)],
        0.3,
        DimensionBound::Constant(1.0),
        LN_2,
    )
    .unwrap();
    let fine = CandidateNet::new(
        "fine",
        vec![lvl(1.15), lvl(1.3)],
        0.18,
        DimensionBound::Constant(1.0),
        LN_2,
    )
    .unwrap();
    let collection = vec![coarse, fine];
    // Deduplicated universe in first-appearance order.
    let cands = [lvl(0.8), lvl(1.0), lvl(1.3), lvl(1.6), lvl(1.15)];
    let m = cands.len();
    let etas: Vec<f64> =
        cands.iter().map(|f| eta_bar_of(f, &collection).unwrap()).collect();
    let descriptors: Vec<String> = cands.iter().map(|f| f.descriptor()).collect();
    let surfaces: Vec<IntensitySurface> = cands.iter().map(|f| f.square()).collect();
    let mut hsq = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            hsq[i][j] = hellinger_sq(&surfaces[i], &surfaces[j], &ctx).unwrap();
        }
    }
    let truth = IntensitySurface::Constant { level: 1.21 };
    let mut exact_matches = 0;
    let reps = 100;
    for rep in 0..reps {
        let obs = simulate(&truth, &ctx, 52_000 + rep).unwrap();
        let result = run_selection(&collection, &obs, &ctx, &config).unwrap();
        assert_eq!(result.descriptors, descriptors, "universe order changed");
        let mut gamma = vec![0.0_f64; m];
        let mut rejections: Vec<Vec<usize>> = vec![Vec::new(); m];
        for i in 0..m {
            for j in i + 1..m {
                let z = etas[j] * etas[j] - etas[i] * etas[i];
                let outcome = ips_core::testing::run_test(
                    &surfaces[i],
                    &surfaces[j],
                    z,
                    &obs,
                    &config.constants,
                    config.tie_seed,
                    &ctx,
                )
                .unwrap();
                let loser = match outcome {
                    TestOutcome::AcceptFPrime => i,
                    TestOutcome::AcceptF => j,
                };
                let winner = i + j - loser;
                gamma[loser] = gamma[loser].max(hsq[i][j]);
                rejections[loser].push(winner);
            }
        }
        let score = |k: usize| gamma[k].max(config.epsilon * etas[k]);
        let mut best = 0;
        for k in 1..m {
            let (sk, sb) = (score(k), score(best));
            if sk < sb
                || (sk == sb
                    && (etas[k] < etas[best]
                        || (etas[k] == etas[best] && descriptors[k] < descriptors[best])))
            {
                best = k;
            }
        }
        let gamma_close =
            gamma.iter().zip(&result.gamma).all(|(a, b)| (a - b).abs() <= 1e-9);
        if best == result.chosen_index && rejections == result.rejection_sets && gamma_close {
            exact_matches += 1;
        }
    }
    let brute_ok = exact_matches == reps;

    let ok = pair_ok && brute_ok;
    conclude(
        "criterion 7 (selection consistency)",
        t0,
        None,
        ok,
        &format!(
            "truth picked {hits}/200 (need 190); brute-force match {exact_matches}/{reps}"
        ),
    );
}

#[test]
fn criterion_8_rate_trends() {
    let _guard = serial();
    let t0 = Instant::now();

    let cox = run_benchmark(&presets::cox_rate(vec![50, 200, 800], 64), 21).unwrap();
    let cox_slope = rate_slope(&cox.mean_risks()).unwrap();

    let lip = run_benchmark(&presets::lipschitz_product_rate(vec![50, 200, 800], 48), 22).unwrap();
    let lip_slope = rate_slope(&lip.mean_risks()).unwrap();

    let cp = changepoint_report(&presets::changepoint_recovery(vec![100, 200, 400], 48), 23).unwrap();
    let ratio = |n: usize| {
        cp.per_n.iter().find(|s| s.n == n).map(|s| s.rate_ratio).unwrap()
    };
    let (r100, r400) = (ratio(100), ratio(400));
    let ratio_spread = r100.max(r400) / r100.min(r400);
    let hit = cp.hit_rate(200, 5);

    let cox_ok = cox_slope <= -0.7;
    let lip_ok = (-2.0 / 3.0 - 0.25..=-2.0 / 3.0 + 0.25).contains(&lip_slope);
    let cp_ok = ratio_spread <= 3.0 && hit >= 0.8;
    conclude(
        "criterion 8 (rate trends)",
        t0,
        Some(900.0),
        cox_ok && lip_ok && cp_ok,
        &format!(
            "parametric slope {cox_slope:.3} (need <= -0.7); Lipschitz slope {lip_slope:.3} \
             (need -0.667 +- 0.25); change-point ratio spread {ratio_spread:.2} (need <= 3) \
             with breakpoint hit rate {hit:.2} at n=200 (need >= 0.8)"
        ),
    );
}

#[test]
fn criterion_9_mixing_coherence() {
    let _guard = serial();
    let t0 = Instant::now();
    let domain = TimeDomain::unit();
    let quad = QuadratureRule::for_domain(&domain).unwrap();
    let config = SelectionConfig::default();
    let mut identical = 0;
    let draws = 10u64;
    for draw in 0..draws {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE + draw);
        let n = rng.gen_range(40..120);
        let covariates = CovariateSet::trivial(n).unwrap();
        let ctx = EvalCtx::new(&domain, &covariates, &quad);
        let lo = rng.gen_range(0.4..0.6);
        let step = rng.gen_range(0.15..0.3);
        let consts: Vec<SqrtFunction> = (0..5)
            .map(|j| SqrtFunction::Constant { level: lo + step * j as f64 })
            .collect();
        let laws: Vec<SqrtFunction> = (0..4)
            .map(|j| {
                SqrtFunction::TimeLaw(TimeLaw::Power {
                    scale: rng.gen_range(0.7..1.4),
                    exponent: 0.2 + 0.25 * j as f64,
                })
            })
            .collect();
        let part_a = vec![CandidateNet::new(
            "flat",
            consts,
            rng.gen_range(0.15..0.4),
            DimensionBound::Constant(0.8),
            0.0,
        )
        .unwrap()];
        let part_b = vec![CandidateNet::new(
            "powers",
            laws,
            rng.gen_range(0.15..0.4),
            DimensionBound::Constant(0.8),
            0.0,
        )
        .unwrap()];
        let mixed = mix_collections(vec![(part_a.clone(), LN_2), (part_b.clone(), LN_2)]).unwrap();
        let manual: Vec<CandidateNet> = part_a
            .into_iter()
            .chain(part_b)
            .map(|net| {
                let weight = net.weight + LN_2;
                net.with_weight(weight)
            })
            .collect();
        let truth = IntensitySurface::Constant { level: rng.gen_range(0.8..1.5) };
        let obs = simulate(&truth, &ctx, 77_000 + draw).unwrap();
        let a = run_selection(&mixed, &obs, &ctx, &config).unwrap();
        let b = run_selection(&manual, &obs, &ctx, &config).unwrap();
        if serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap() {
            identical += 1;
        }
    }
    conclude(
        "criterion 9 (mixing coherence)",
        t0,
        None,
        identical == draws,
        &format!("{identical}/{draws} mixed-vs-manual selections bit-identical"),
    );
}
