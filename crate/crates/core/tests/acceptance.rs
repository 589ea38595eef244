//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use radrect::bench::{bench_scene, median, run_bench, BenchKind, BenchParams};
use radrect::constraints::{
    build_des, degeneracy_flags, DegeneracyFlag, MinimalSample, SampleConfig,
};
use radrect::geometry::{change_of_scale, rectify, AffineFrame, ImagePoint, RectifyModel};
use radrect::polysolve::{oracle_solve, solve, Rejection, SearchBox, SolverConfig, Subsystem};
use radrect::robust::{
    build_system, draw_sample, feasible_models, first_sample, ransac, scene_pool, solution_census,
    solve_sample, warp_error, RansacConfig, RobustError, Scoring, Variant,
};
use radrect::synth::{add_noise, gen_scene, GroundTruthScene, Motion, Placement, SceneParams, View};

const DES222: Variant = Variant::Des(SampleConfig::C222);
const DES32: Variant = Variant::Des(SampleConfig::C32);
const DES4: Variant = Variant::Des(SampleConfig::C4);
const CS222: Variant = Variant::Cs(SampleConfig::C222);
const CS32: Variant = Variant::Cs(SampleConfig::C32);
const CS4: Variant = Variant::Cs(SampleConfig::C4);
const EPS_RES: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn scenes(seed: u64, n: usize) -> Vec<GroundTruthScene> {
    (0..n)
        .map(|k| bench_scene(seed, k, -4.0, Motion::Rigid).expect("scene generation"))
        .collect()
}

fn noiseless_recovery() -> Outcome {
    let start = Instant::now();
    let scenes = scenes(101, 200);
    let mut parts = Vec::new();
    let mut pass = true;
    for v in [DES222, DES32, DES4, CS222, CS32, CS4] {
        let ok = scenes
            .iter()
            .filter(|s| {
                let Ok(pool) = scene_pool(s, s.frames.clone()) else { return false };
                let Some(idx) = first_sample(&pool, v.config()) else { return false };
                let Ok((sys, sol)) = solve_sample(&pool, v, &idx, &SolverConfig::default()) else {
                    return false;
                };
                sol.roots.iter().any(|r| {
                    sys.residual(&r.values) < EPS_RES
                        && warp_error(&RectifyModel::from_params(r.params(None)), s).rms < 1e-4
                })
            })
            .count();
        let frac = ok as f64 / scenes.len() as f64;
        pass &= frac >= 0.99;
        parts.push(format!("{v} {ok}/{}", scenes.len()));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs <= 300.0;
    Outcome {
        pass,
        detail: format!("{} in {secs:.0}s", parts.join(", ")),
    }
}

const CENSUS_SIGMAS: [f64; 3] = [0.0, 0.5, 1.0];

struct CensusRun {
    variant: Variant,
    census: radrect::robust::Census,
}

fn censuses() -> Vec<CensusRun> {
    let scenes = scenes(202, 200);
    [DES222, DES32, DES4, Variant::DesFixed(-4.0)]
        .into_iter()
        .map(|variant| CensusRun {
            variant,
            census: solution_census(&scenes, &CENSUS_SIGMAS, variant, 7),
        })
        .collect()
}

fn solution_counts(runs: &[CensusRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for run in runs {
        let bound = match run.variant.config() {
            SampleConfig::C222 => 54,
            SampleConfig::C32 => 45,
            SampleConfig::C4 => 36,
            SampleConfig::C22Fixed => 9,
        };
        let c = &run.census;
        let over = c.trials.iter().filter(|t| t.n_real > bound).count();
        let max_finite = c.trials.iter().map(|t| t.n_finite).max().unwrap_or(0);
        pass &= over == 0 && c.trials.len() >= 200;
        parts.push(format!(
            "{} max real {} (bound {bound}, over {over}/{}, max finite {max_finite})",
            run.variant,
            c.max_real(),
            c.trials.len()
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn feasibility_census(runs: &[CensusRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for run in runs.iter().filter(|r| r.variant.fixed_lambda().is_none()) {
        let c = &run.census;
        let mut levels = Vec::new();
        for (j, sigma) in CENSUS_SIGMAS.iter().enumerate() {
            let at: Vec<_> = c.trials.iter().filter(|t| t.sigma_index == j).collect();
            let one = at.iter().filter(|t| t.n_feasible == 1).count();
            let frac = one as f64 / at.len().max(1) as f64;
            pass &= frac >= 0.9;
            levels.push(format!("s={sigma} {:.1}%", 100.0 * frac));
        }
        parts.push(format!(
            "{} [{}] pooled {:.1}%",
            run.variant,
            levels.join(" "),
            100.0 * c.exactly_one_feasible_fraction()
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn proposal_quality() -> Outcome {
    let scenes = scenes(303, 100);
    let cfg = SolverConfig::noisy();
    let (mut samples, mut models, mut good) = (0, 0, 0);
    for (k, s) in scenes.iter().enumerate() {
        let pool = scene_pool(s, add_noise(s, 1.0, 5000 + k as u64)).expect("pool");
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        for _ in 0..5 {
            let idx = draw_sample(&pool, SampleConfig::C222, &mut rng).expect("sample");
            samples += 1;
            let Ok((_, sol)) = solve_sample(&pool, DES222, &idx, &cfg) else { continue };
            for m in feasible_models(&sol, DES222) {
                models += 1;
                if warp_error(&m, s).rms < 5.0 {
                    good += 1;
                }
            }
        }
    }
    let frac = good as f64 / models.max(1) as f64;
    Outcome {
        pass: samples >= 500 && frac >= 0.25,
        detail: format!("{good}/{models} models below 5px ({:.1}%) from {samples} samples", 100.0 * frac),
    }
}

fn ransac_sensitivity() -> Outcome {
    let p = BenchParams {
        scenes: 200,
        seed: 404,
        variant: DES222,
        iterations: 25,
        sigmas: vec![2.0],
        ..BenchParams::default()
    };
    let rows = run_bench(BenchKind::Noise, &p).expect("bench");
    let below = rows.iter().filter(|r| r.rms_warp < 5.0).count();
    let frac = below as f64 / rows.len() as f64;
    let med = median(
        &mut rows
            .iter()
            .map(|r| if r.rel_lambda_err.is_nan() { f64::INFINITY } else { r.rel_lambda_err })
            .collect::<Vec<_>>(),
    );
    Outcome {
        pass: frac >= 0.6 && med < 0.5,
        detail: format!(
            "{below}/{} below 5px ({:.1}%), median relative lambda error {med:.3}",
            rows.len(),
            100.0 * frac
        ),
    }
}

fn distortion_stability() -> Outcome {
    let scenes_per_level = 40;
    let p = BenchParams {
        scenes: scenes_per_level,
        seed: 505,
        variant: DES222,
        sigma: 1.0,
        ..BenchParams::default()
    };
    let rows = run_bench(BenchKind::Distortion, &p).expect("bench");
    let medians: Vec<f64> = p
        .lambdas
        .iter()
        .map(|l| median(&mut rows.iter().filter(|r| r.lambda_gt == *l).map(|r| r.rms_warp).collect::<Vec<_>>()))
        .collect();
    let hi = medians.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = medians.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = hi / lo;

    let fixed: Vec<f64> = [-4.0, -3.0, -2.0, -1.0, 0.0]
        .iter()
        .map(|&lf| {
            let rows = run_bench(
                BenchKind::Noise,
                &BenchParams {
                    scenes: scenes_per_level,
                    seed: 506,
                    variant: Variant::DesFixed(lf),
                    sigmas: vec![1.0],
                    ..BenchParams::default()
                },
            )
            .expect("bench");
            median(&mut rows.iter().map(|r| r.rms_warp).collect::<Vec<_>>())
        })
        .collect();
    let monotone = fixed.windows(2).all(|w| w[1] > w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ");
    Outcome {
        pass: ratio < 2.0 && monotone,
        detail: format!(
            "des222 medians over lambda -5..0 [{}] ratio {ratio:.2}; des22-fixed medians for |dlambda| 0..4 [{}]",
            fmt(&medians),
            fmt(&fixed)
        ),
    }
}

fn jacobian_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (mut checked, mut worst) = (0, 0.0_f64);
    while checked < 1000 {
        let m = RectifyModel::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-8.0..0.5),
        );
        let p = ImagePoint::new(rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25));
        if m.denominator(&p).abs() < 0.05 {
            continue;
        }
        let h = 1e-6;
        let f = |dx: f64, dy: f64| rectify(&ImagePoint::new(p.x + dx, p.y + dy), &m).expect("rectify");
        let (xp, xm, yp, ym) = (f(h, 0.0), f(-h, 0.0), f(0.0, h), f(0.0, -h));
        let j = [
            [(xp.x - xm.x) / (2.0 * h), (yp.x - ym.x) / (2.0 * h)],
            [(xp.y - xm.y) / (2.0 * h), (yp.y - ym.y) / (2.0 * h)],
        ];
        let fd = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let c = change_of_scale(&p, &m).expect("change of scale");
        worst = worst.max((c - fd).abs() / c.abs());
        checked += 1;
    }
    Outcome {
        pass: worst < 1e-5,
        detail: format!("{checked} evaluations, worst relative difference {worst:.2e}"),
    }
}

fn spurious_family() -> Outcome {
    let scenes = scenes(808, 40);
    let cfg = SolverConfig {
        subsystem: Subsystem::Anchored,
        eps_denominator: -1.0,
        ..SolverConfig::default()
    };
    let (mut violating, mut kept, mut kept_bad, mut gt_found) = (0, 0, 0, 0);
    for s in &scenes {
        let pool = scene_pool(s, s.frames.clone()).expect("pool");
        let idx = first_sample(&pool, SampleConfig::C4).expect("sample");
        let sys = build_system(&pool, DES4, &idx).expect("system");
        let sol = solve(&sys, &cfg).expect("solve");
        let anchored = sys.anchored_subsystem();
        let dropped: Vec<usize> = (0..sys.polys.len()).filter(|k| !anchored.contains(k)).collect();
        for r in &sol.rejected {
            let x = sys.to_scaled(&r.values);
            let worst_dropped = dropped.iter().map(|&k| sys.polys[k].eval(&x).abs()).fold(0.0, f64::max);
            if r.reason == Rejection::Residual && r.subsystem_residual < EPS_RES && worst_dropped >= EPS_RES {
                violating += 1;
            }
        }
        for r in &sol.roots {
            kept += 1;
            if sys.residual(&r.values) >= EPS_RES {
                kept_bad += 1;
            }
        }
        if sol
            .roots
            .iter()
            .any(|r| warp_error(&RectifyModel::from_params(r.params(None)), s).rms < 1e-4)
        {
            gt_found += 1;
        }
    }
    Outcome {
        pass: violating > 0 && kept_bad == 0 && gt_found == scenes.len(),
        detail: format!(
            "{violating} anchored-subsystem roots violate the dropped equations and were filtered; \
             {kept} kept roots, {kept_bad} with full residual >= {EPS_RES:e}; ground truth kept in {gt_found}/{}",
            scenes.len()
        ),
    }
}

fn degeneracy_handling() -> Outcome {
    let (mut no_model, mut flagged, mut unconfident, mut confident_right, mut confident_wrong) = (0, 0, 0, 0, 0);
    let mut sample_flags = 0;
    let mut concentric_scenes = 0;
    for (view, placement) in [
        (View::HorizonThroughCenter, Placement::Uniform),
        (View::FrontoParallel, Placement::Concentric),
    ] {
        for seed in 0..20u64 {
            let s = gen_scene(&SceneParams {
                seed: 9000 + seed,
                view,
                placement,
                ..SceneParams::default()
            })
            .expect("scene generation");
            let pool = scene_pool(&s, s.frames.clone()).expect("pool");
            if placement == Placement::Concentric {
                concentric_scenes += 1;
                let idx = first_sample(&pool, SampleConfig::C222).expect("sample");
                let groups: Vec<Vec<AffineFrame>> =
                    idx.iter().map(|g| g.iter().map(|&(a, b)| pool.frames[a][b]).collect()).collect();
                let sample = MinimalSample::new(SampleConfig::C222, groups).expect("sample shape");
                if degeneracy_flags(&sample, None).contains(&DegeneracyFlag::ConcentricPoints)
                    && build_des(&sample).is_err()
                {
                    sample_flags += 1;
                }
            }
            for v in [DES222, DES32, DES4, CS222, CS32, CS4] {
                let cfg = RansacConfig {
                    seed,
                    ..RansacConfig::default()
                };
                match ransac(&pool, v, Scoring::EqualScale { tau: cfg.tau }, &cfg) {
                    Err(RobustError::NoFeasibleModel(_)) => no_model += 1,
                    Err(e) => panic!("unexpected error {e}"),
                    Ok(e) if !e.flags.is_empty() => flagged += 1,
                    Ok(e) if (e.consensus_size as f64) < 0.9 * pool.pair_count() as f64 => unconfident += 1,
                    Ok(e) => {
                        if warp_error(&e.model, &s).rms < 1.0 {
                            confident_right += 1;
                        } else {
                            confident_wrong += 1;
                        }
                    }
                }
            }
        }
    }
    Outcome {
        pass: confident_wrong == 0 && sample_flags == concentric_scenes,
        detail: format!(
            "concentric samples flagged {sample_flags}/{concentric_scenes}; estimates: {no_model} no feasible model, \
             {flagged} flagged, {unconfident} low consensus, {confident_right} confident and correct, \
             {confident_wrong} confident and wrong"
        ),
    }
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let bx = SearchBox::new(vec![-3.0, -3.0, -8.0], vec![3.0, 3.0, 0.5]);
    let (mut oracle_roots, mut matched) = (0, 0);
    let systems = 50;
    for (k, s) in scenes(1010, systems).iter().enumerate() {
        let pool = scene_pool(s, add_noise(s, 1.0, k as u64)).expect("pool");
        let idx = draw_sample(&pool, SampleConfig::C222, &mut rng).expect("sample");
        let sys = build_system(&pool, DES222, &idx).expect("system");
        let reference = oracle_solve(&sys, &bx, 24);
        let sol = solve(&sys, &SolverConfig::noisy()).expect("solve");
        for r in reference.roots.iter().filter(|r| bx.contains(&r.values, 0.0)) {
            oracle_roots += 1;
            if sol
                .roots
                .iter()
                .any(|q| q.values.iter().zip(&r.values).all(|(a, b)| (a - b).abs() < 1e-6))
            {
                matched += 1;
            }
        }
    }
    Outcome {
        pass: matched == oracle_roots && oracle_roots > 0,
        detail: format!("{matched}/{oracle_roots} oracle roots matched over {systems} systems"),
    }
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |id: usize, name: &str, run: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let o = run();
        all &= o.pass;
        println!(
            "criterion {id:>2} {name}: {} ({}) [{:.0}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };
    report(7, "jacobian-correctness", &jacobian_correctness);
    report(10, "oracle-equivalence", &oracle_equivalence);
    report(8, "spurious-family", &spurious_family);
    report(9, "degeneracy-handling", &degeneracy_handling);
    report(1, "noiseless-recovery", &noiseless_recovery);
    let runs = censuses();
    report(2, "solution-counts", &|| solution_counts(&runs));
    report(3, "feasibility-census", &|| feasibility_census(&runs));
    report(4, "proposal-quality", &proposal_quality);
    report(5, "ransac-sensitivity", &ransac_sensitivity);
    report(6, "distortion-stability", &distortion_stability);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
