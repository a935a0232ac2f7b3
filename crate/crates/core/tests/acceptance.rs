//! Acceptance checks, one PASS/FAIL line per criterion. Exits non-zero if any
//! criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use contraplan::bench::{generate_random_scene, run_benchmark, BenchReport, GeneratorParams, RunConfig};
use contraplan::cost::goal_cost;
use contraplan::executor::{
    execute_segments, run_baseline, ExecutorConfig, Method, RealWorldHarness, StepMode,
};
use contraplan::graph::{build_graph_from_steps, get_segments, min_cost_path, Segment, SegmentKind, SegmentPlan};
use contraplan::metrics::{
    compute_metrics, one_step_expected_metric, path_metric_expected, profile_from_worlds, segment_metric,
    MetricSettings, WorldRollouts,
};
use contraplan::optimizer::{robust_sto, PlannerConfig};
use contraplan::parallel::{jobs_from_env, with_jobs};
use contraplan::scenes::reaching_toy;
use contraplan::world::{
    Control, ControlLimits, NoiseSpec, ParameterBounds, SceneDescription, Simulator, SystemState,
    WorldRealization,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn scene(seed: u64) -> SceneDescription {
    generate_random_scene(&GeneratorParams::default(), &mut ChaCha8Rng::seed_from_u64(seed)).expect("scene generation")
}

fn random_controls(rng: &mut impl Rng, n: usize, bound: f64) -> Vec<Control> {
    (0..n)
        .map(|_| {
            Control::new(
                rng.random_range(-bound..bound),
                rng.random_range(-bound..bound),
                rng.random_range(-bound..bound),
            )
        })
        .collect()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// x_{t+1} = a x_t for the nominal and every sample.
fn linear_map() -> Outcome {
    let dist = |x: &f64, y: &f64| (x - y).abs();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for a in [0.5, 0.9, 1.1] {
        let nominal: Vec<f64> = (0..=5).map(|t| 0.3 * f64::powi(a, t)).collect();
        let samples: Vec<Vec<f64>> = (0..8)
            .map(|_| {
                let s0: f64 = rng.random_range(-1.0..1.0);
                (0..=5).map(|t| s0 * f64::powi(a, t)).collect()
            })
            .collect();
        let at = |t: usize| samples.iter().map(|s| s[t]).collect::<Vec<_>>();
        for t in 0..5 {
            let m = one_step_expected_metric(&at(t), &at(t + 1), &nominal[t], &nominal[t + 1], dist)
                .map_err(|e| e.to_string())?;
            worst = worst.max((m - a).abs());
        }
        let path = path_metric_expected(&at(0), &at(5), &nominal[0], &nominal[5], dist).map_err(|e| e.to_string())?;
        worst = worst.max((path - a.powi(5)).abs());
        let profile = profile_from_worlds(&[WorldRollouts { nominal, samples }], dist).map_err(|e| e.to_string())?;
        let product: f64 = profile.per_step_expected.iter().product();
        worst = worst.max((product - a.powi(5)).abs());
    }
    check(worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

fn multiplicativity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let settings = MetricSettings::default();
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let scene = scene(1000 + i);
        let sim = Simulator::new(&scene, Default::default());
        let x0 = SystemState::initial(&scene);
        let controls = random_controls(&mut rng, 5, 0.8);
        let profile = compute_metrics(&sim, &x0, &controls, &settings, 0.2, &mut rng).map_err(|e| e.to_string())?;
        for p in 0..5 {
            for q in p + 1..5 {
                for r in q + 1..=5 {
                    let pq = segment_metric(&profile, p, q).unwrap();
                    let qr = segment_metric(&profile, q, r).unwrap();
                    let pr = segment_metric(&profile, p, r).unwrap();
                    worst = worst.max((pq * qr - pr).abs() / pr.abs());
                }
            }
        }
    }
    check(worst <= 1e-9, format!("100 profiles, max relative error {worst:.2e}"))
}

fn worst_case_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let settings = MetricSettings::default();
    let mut violations = 0;
    for i in 0..100 {
        let scene = scene(2000 + i);
        let sim = Simulator::new(&scene, Default::default());
        let x0 = SystemState::initial(&scene);
        let controls = random_controls(&mut rng, 5, 0.8);
        let p = compute_metrics(&sim, &x0, &controls, &settings, 0.2, &mut rng).map_err(|e| e.to_string())?;
        if p.path_expected_real < p.path_expected_nominal || p.path_maximal_real < p.path_maximal_nominal {
            violations += 1;
        }
    }
    let degenerate = MetricSettings {
        bounds: ParameterBounds::degenerate(0.65, 0.3, 1.0),
        ..settings
    };
    let mut unequal = 0;
    for i in 0..20 {
        let scene = scene(2000 + i);
        let sim = Simulator::new(&scene, Default::default());
        let x0 = SystemState::initial(&scene);
        let controls = random_controls(&mut rng, 5, 0.8);
        let p = compute_metrics(&sim, &x0, &controls, &degenerate, 0.2, &mut rng).map_err(|e| e.to_string())?;
        if p.path_expected_real != p.path_expected_nominal || p.path_maximal_real != p.path_maximal_nominal {
            unequal += 1;
        }
    }
    check(
        violations == 0 && unequal == 0,
        format!("{violations}/100 dominance violations, {unequal}/20 unequal under degenerate bounds"),
    )
}

/// Cheapest decomposition by enumerating every set of cut points.
fn brute_force(per_step: &[f64], c_ro: f64, c_nr: f64) -> f64 {
    let n = per_step.len();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << (n - 1)) {
        let mut cuts = vec![0];
        cuts.extend((1..n).filter(|k| mask & (1 << (k - 1)) != 0));
        cuts.push(n);
        let cost: f64 = cuts
            .windows(2)
            .map(|w| {
                let len = (w[1] - w[0]) as f64;
                let m: f64 = per_step[w[0]..w[1]].iter().product();
                if m < 1.0 {
                    c_ro / len
                } else {
                    c_nr * len
                }
            })
            .sum();
        best = best.min(cost);
    }
    best
}

fn graph_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let per_step: Vec<f64> = (0..n).map(|_| rng.random_range(0.25..4.0)).collect();
        let plan = min_cost_path(&build_graph_from_steps(&per_step, 1.0, 1000.0).unwrap()).unwrap();
        let oracle = brute_force(&per_step, 1.0, 1000.0);
        if !rel_close(plan.cost, oracle, 1e-12) {
            mismatches += 1;
        }
    }
    let plan = get_segments(&[0.8, 1.5, 1.4, 0.7, 0.9], 1.0, 1000.0).unwrap();
    let expected = vec![
        (0, 1, SegmentKind::Robust),
        (1, 2, SegmentKind::NonRobust),
        (2, 5, SegmentKind::Robust),
    ];
    let worked = plan.spans() == expected && (plan.cost - 1001.333).abs() <= 1e-3 && (plan.cost - (1001.0 + 1.0 / 3.0)).abs() <= 1e-6;
    check(
        mismatches == 0 && worked,
        format!("{mismatches}/200 mismatches; worked example {:?} cost {:.6}", plan.spans(), plan.cost),
    )
}

fn shelf_planner(samples: usize, iterations: usize) -> (PlannerConfig, ExecutorConfig) {
    let mut cfg = ExecutorConfig::shelf_benchmark();
    cfg.planner.params.samples = samples;
    cfg.planner.params.max_iterations = iterations;
    (cfg.planner, cfg)
}

fn greedy_monotonicity() -> Outcome {
    let (planner, cfg) = shelf_planner(4, 10);
    let p = &planner.params;
    let mut bad = 0;
    let mut accepted = 0;
    for i in 0..50 {
        let scene = scene(3000 + i);
        let x0 = SystemState::initial(&scene);
        let init = cfg.initial_guess.controls(&scene, &x0, p.horizon, p.dt, &p.limits);
        let r = robust_sto(&x0, &init, &scene, &planner, &mut ChaCha8Rng::seed_from_u64(i)).map_err(|e| e.to_string())?;
        let non_increasing = r.cost_history.windows(2).all(|w| w[1] <= w[0]);
        let strict = r.iterations.iter().zip(&r.cost_history).all(|(it, before)| {
            if it.accepted {
                it.incumbent_cost < *before && it.best_sample_cost == it.incumbent_cost
            } else {
                it.incumbent_cost == *before && it.best_sample_cost >= *before
            }
        });
        accepted += r.iterations.iter().filter(|it| it.accepted).count();
        if !(non_increasing && strict && *r.cost_history.last().unwrap() == r.objective) {
            bad += 1;
        }
    }
    check(bad == 0 && accepted > 0, format!("{bad}/50 violations, {accepted} accepted updates"))
}

fn parallel_equivalence() -> Outcome {
    let (planner, cfg) = shelf_planner(4, 5);
    let p = &planner.params;
    let mut differing = 0;
    for i in 0..10 {
        let scene = scene(4000 + i);
        let x0 = SystemState::initial(&scene);
        let init = cfg.initial_guess.controls(&scene, &x0, p.horizon, p.dt, &p.limits);
        let run = |jobs| {
            with_jobs(Some(jobs), || robust_sto(&x0, &init, &scene, &planner, &mut ChaCha8Rng::seed_from_u64(i)))
                .unwrap()
                .unwrap()
        };
        if run(1) != run(8) {
            differing += 1;
        }
    }
    check(differing == 0, format!("{differing}/10 instances differ between 1 and 8 threads"))
}

/// One step toward a disc 0.12 m ahead with |u| <= 0.3, so the best reach
/// stops short at the control bound and the optimum is not zero.
fn toy_optimum() -> Outcome {
    let scene = reaching_toy();
    let x0 = SystemState::initial(&scene);
    let mut planner = PlannerConfig::default();
    planner.params.horizon = 1;
    planner.params.limits = ControlLimits::symmetric(0.3);
    planner.params.nu = [0.01; 3];
    planner.params.samples = 8;
    planner.params.max_iterations = 20;
    planner.weights.alpha = 1e-9;
    let sim = Simulator::new(&scene, planner.physics);
    let nominal = WorldRealization::nominal(&scene);
    let cost_of = |u: Control| {
        let next = sim.step(&x0, &u, &nominal, planner.params.dt).unwrap();
        goal_cost(&next, &scene, planner.weights.v_phi)
    };
    let grid: Vec<f64> = (-30..=30).map(|k| k as f64 * 0.01).collect();
    let mut oracle = f64::INFINITY;
    for &vx in &grid {
        for &vy in &grid {
            for &w in &grid {
                oracle = oracle.min(cost_of(Control::new(vx, vy, w)));
            }
        }
    }
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..20 {
        let r = robust_sto(&x0, &[Control::ZERO], &scene, &planner, &mut ChaCha8Rng::seed_from_u64(seed))
            .map_err(|e| e.to_string())?;
        let got = goal_cost(r.states.last().unwrap(), &scene, planner.weights.v_phi);
        worst_ratio = worst_ratio.max(got / oracle);
    }
    check(
        worst_ratio <= 1.05,
        format!("grid optimum {oracle:.6}, worst of 20 seeds is {worst_ratio:.4} x optimum"),
    )
}

fn accounting() -> Outcome {
    let (_, mut cfg) = shelf_planner(4, 10);
    cfg.cc_max_steps = 6;
    let mut problems = Vec::new();
    let mut fully_robust_seen = 0;
    for i in 0..4 {
        let scene = scene(5000 + i);
        for method in Method::ALL {
            let log = run_baseline(method, &scene, "acc", &cfg, i).map_err(|e| e.to_string())?;
            let s = &log.summary;
            let mpc = log.steps.iter().filter(|st| st.mode == StepMode::Mpc).count();
            let want = match method {
                Method::Ol | Method::Rol | Method::Cp => 1,
                Method::Cc => log.steps.len(),
                Method::Ocl => 1 + mpc,
            };
            if s.optimizer_invocations != want {
                problems.push(format!("{method} on scene {i}: {} invocations, expected {want}", s.optimizer_invocations));
            }
            if let Some(segs) = log.plan.as_ref().and_then(|p| p.segments.as_ref()) {
                let single_robust = segs.segments.len() == 1 && segs.is_fully_robust();
                fully_robust_seen += single_robust as usize;
                if single_robust != (s.percent_open_loop == 100.0) {
                    problems.push(format!("ocl on scene {i}: {:?} but {}% open loop", segs.spans(), s.percent_open_loop));
                }
            }
        }
    }

    // A fully robust segmentation and the three-segment example, executed
    // directly.
    let scene = scene(5000);
    let (planner, cfg) = shelf_planner(4, 10);
    let p = &planner.params;
    let x0 = SystemState::initial(&scene);
    let controls = cfg.initial_guess.controls(&scene, &x0, p.horizon, p.dt, &p.limits);
    let states = Simulator::new(&scene, planner.physics)
        .rollout(&x0, &controls, &WorldRealization::nominal(&scene), p.dt)
        .unwrap();
    let seg = |start, end, kind| Segment { start, end, kind, metric: 0.5 };
    let plans = [
        (vec![seg(0, 5, SegmentKind::Robust)], 0, 100.0),
        (
            vec![seg(0, 1, SegmentKind::Robust), seg(1, 3, SegmentKind::NonRobust), seg(3, 5, SegmentKind::Robust)],
            2,
            60.0,
        ),
    ];
    for (segments, invocations, percent) in plans {
        let plan = SegmentPlan { segments, cost: 0.0 };
        let mut harness =
            RealWorldHarness::new(&scene, planner.physics, &ParameterBounds::default(), NoiseSpec::observation(), 9).unwrap();
        let frag = execute_segments(&controls, &states, &plan, &scene, &cfg, &mut harness, &mut ChaCha8Rng::seed_from_u64(9))
            .map_err(|e| e.to_string())?;
        let ol = frag.steps.iter().filter(|s| s.mode == StepMode::OpenLoop).count();
        let mpc_steps: Vec<usize> = frag.steps.iter().filter(|s| s.mode == StepMode::Mpc).map(|s| s.step).collect();
        let got = 100.0 * ol as f64 / frag.steps.len() as f64;
        if frag.optimizer_invocations != invocations || got != percent || frag.steps.len() != 5 {
            problems.push(format!("{:?}: {} invocations, {got}% open loop", plan.spans(), frag.optimizer_invocations));
        }
        if invocations == 2 && mpc_steps != [1, 2] {
            problems.push(format!("three-segment plan replanned at steps {mpc_steps:?}"));
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("20 runs plus 2 fixed segmentations consistent ({fully_robust_seen} fully robust plans in the runs)")
        } else {
            problems.join("; ")
        },
    )
}

fn end_to_end(report: &BenchReport) -> Outcome {
    let mean = |m: Method, f: fn(&contraplan::bench::MethodAggregate) -> Option<contraplan::bench::Stat>| {
        report.aggregate_for(m).and_then(f).map_or(f64::NAN, |s| s.mean)
    };
    let success = |m| mean(m, |a| a.success);
    let (ol, rol, ocl, cc, cp) = (
        success(Method::Ol),
        success(Method::Rol),
        success(Method::Ocl),
        success(Method::Cc),
        success(Method::Cp),
    );
    let mut slower = Vec::new();
    let mut compared = 0;
    for row in report.rows.iter().filter(|r| r.method == Method::Ocl && r.percent_open_loop > 0.0) {
        let cc_row = report
            .rows
            .iter()
            .find(|r| r.method == Method::Cc && r.scene_id == row.scene_id && r.seed == row.seed)
            .expect("cc row");
        compared += 1;
        if !(row.execution_time_s < cc_row.execution_time_s) {
            slower.push(row.scene_id.clone());
        }
    }
    let ocl_open = mean(Method::Ocl, |a| a.percent_open_loop);
    let n_rows = report.rows.len();
    let ok = n_rows == 100
        && report.errors.is_empty()
        && ocl >= ol
        && rol >= ol
        && slower.is_empty()
        && ocl_open > 0.0
        && ocl_open < 100.0;
    check(
        ok,
        format!(
            "{n_rows} rows, {} errors; success ol {ol:.2} rol {rol:.2} cp {cp:.2} cc {cc:.2} ocl {ocl:.2}; \
             ocl faster than cc on {}/{compared} scenes with open-loop steps{}; ocl open loop {ocl_open:.1}%; \
             execution ocl {:.3}s cc {:.3}s",
            report.errors.len(),
            compared - slower.len(),
            if slower.is_empty() { String::new() } else { format!(" (slower on {slower:?})") },
            mean(Method::Ocl, |a| a.execution_time_s),
            mean(Method::Cc, |a| a.execution_time_s),
        ),
    )
}

fn information_hygiene(report: &BenchReport) -> Outcome {
    // The counter must see a read made while planning.
    let scene = scene(0);
    let harness =
        RealWorldHarness::new(&scene, Default::default(), &ParameterBounds::default(), NoiseSpec::observation(), 0).unwrap();
    let audit = harness.audit().clone();
    audit.planning(|| harness.reveal());
    let detects = audit.counts().planner_reads == 1;
    check(
        detects && report.audit.planner_reads == 0 && report.audit.harness_reads > 0,
        format!(
            "sweep: {} planner-side reads, {} harness reads; instrumented probe detected: {detects}",
            report.audit.planner_reads, report.audit.harness_reads
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut report_line = |n: usize, name: &str, started: Instant, outcome: Outcome| {
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS criterion {n} ({name}, {secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}, {secs:.1}s): {d}");
            }
        }
    };

    let t = Instant::now();
    report_line(1, "linear-map metric exactness", t, linear_map());
    let t = Instant::now();
    report_line(2, "multiplicativity", t, multiplicativity());
    let t = Instant::now();
    report_line(3, "worst-case dominance", t, worst_case_dominance());
    let t = Instant::now();
    report_line(4, "graph-search optimality", t, graph_optimality());
    let t = Instant::now();
    report_line(5, "greedy monotonicity", t, greedy_monotonicity());
    let t = Instant::now();
    report_line(6, "parallel/serial equivalence", t, parallel_equivalence());
    let t = Instant::now();
    report_line(7, "toy optimum quality", t, toy_optimum());
    let t = Instant::now();
    report_line(8, "accounting identities", t, accounting());

    let t = Instant::now();
    let cfg = RunConfig {
        jobs: jobs_from_env(None).expect("CONTRAPLAN_JOBS"),
        ..RunConfig::shelf_benchmark()
    };
    match run_benchmark(&cfg, None) {
        Ok(report) => {
            report_line(9, "end-to-end ordering", t, end_to_end(&report));
            let t = Instant::now();
            report_line(10, "information hygiene", t, information_hygiene(&report));
        }
        Err(e) => {
            report_line(9, "end-to-end ordering", t, Err(e.to_string()));
            report_line(10, "information hygiene", t, Err("benchmark did not run".into()));
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
