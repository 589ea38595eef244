use radrect::constraints::{
    build_cs, build_cs_with, build_des, build_des_fixed_lambda, build_des_with, degeneracy_flags, MinimalSample,
    SampleConfig, ScalingPolicy,
};
use radrect::geometry::{AffineFrame, ImagePoint};
use radrect::polysolve::{solve, SolverConfig};
use radrect::synth::{gen_scene, SceneParams, View};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scene(seed: u64) -> radrect::synth::GroundTruthScene {
    gen_scene(&SceneParams {
        seed,
        ..SceneParams::default()
    })
    .unwrap()
}

/// The first `n` frames of consecutive groups large enough for each size.
fn take<T: Clone>(groups: &[Vec<T>], config: SampleConfig) -> MinimalSample<T> {
    let mut used = vec![false; groups.len()];
    let picked = config
        .group_sizes()
        .iter()
        .map(|&n| {
            let g = (0..groups.len()).find(|&g| !used[g] && groups[g].len() >= n).unwrap();
            used[g] = true;
            groups[g][..n].to_vec()
        })
        .collect();
    MinimalSample::new(config, picked).unwrap()
}

#[test]
fn ground_truth_solves_every_noiseless_system() {
    for seed in 0..10 {
        let s = scene(seed);
        let gt = [s.vline.l1, s.vline.l2, s.lambda];
        let scales = radrect::synth::cs_observations_linearized(&s, &s.frames).unwrap();
        for config in [SampleConfig::C222, SampleConfig::C32, SampleConfig::C4] {
            let des = build_des(&take(&s.frames, config)).unwrap();
            assert!(des.residual(&gt) < 1e-10, "des {config} seed {seed}: {}", des.residual(&gt));
            let cs = build_cs(&take(&scales, config)).unwrap();
            assert!(cs.residual(&gt) < 1e-10, "cs {config} seed {seed}: {}", cs.residual(&gt));
        }
        let fixed = build_des_fixed_lambda(&take(&s.frames, SampleConfig::C22Fixed), s.lambda).unwrap();
        assert!(fixed.residual(&gt[..2]) < 1e-10);
    }
}

#[test]
fn fronto_parallel_pinhole_has_identity_root() {
    let s = gen_scene(&SceneParams {
        seed: 4,
        lambda: 0.0,
        view: View::FrontoParallel,
        ..SceneParams::default()
    })
    .unwrap();
    let sys = build_des_fixed_lambda(&take(&s.frames, SampleConfig::C22Fixed), 0.0).unwrap();
    assert!(sys.residual(&[0.0, 0.0]) < 1e-12);
}

#[test]
fn conditioning_does_not_move_roots() {
    for seed in 0..5 {
        let s = scene(100 + seed);
        for (config, sample) in [(SampleConfig::C222, take(&s.frames, SampleConfig::C222))] {
            let auto = solve(&build_des_with(&sample, ScalingPolicy::Auto).unwrap(), &SolverConfig::default()).unwrap();
            let unit = solve(&build_des_with(&sample, ScalingPolicy::Unit).unwrap(), &SolverConfig::default()).unwrap();
            let gt = [s.vline.l1, s.vline.l2, s.lambda];
            for sol in [&auto, &unit] {
                assert!(
                    sol.roots.iter().any(|r| r.values.iter().zip(gt).all(|(a, b)| (a - b).abs() < 1e-8)),
                    "{config} seed {seed}"
                );
            }
            // every well-separated root of one is a root of the other
            for r in &auto.roots {
                if r.values.iter().any(|v| v.abs() > 50.0) {
                    continue;
                }
                assert!(
                    unit.roots.iter().any(|q| q.values.iter().zip(&r.values).all(|(a, b)| (a - b).abs() < 1e-8 * (1.0 + b.abs()))),
                    "root {:?} missing from unit-scaled solve",
                    r.values
                );
            }
        }
        let scales = radrect::synth::cs_observations_linearized(&s, &s.frames).unwrap();
        let cs = take(&scales, SampleConfig::C222);
        let a = build_cs_with(&cs, ScalingPolicy::Auto).unwrap();
        let u = build_cs_with(&cs, ScalingPolicy::Unit).unwrap();
        let gt = [s.vline.l1, s.vline.l2, s.lambda];
        assert!(a.residual(&gt) < 1e-10 && u.residual(&gt) < 1e-10);
    }
}

fn random_frame(rng: &mut ChaCha8Rng) -> AffineFrame {
    let o = ImagePoint::new(rng.random_range(-0.25..0.25), rng.random_range(-0.25..0.25));
    let s = rng.random_range(0.01..0.05);
    let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let b = a + rng.random_range(0.6..2.5);
    AffineFrame::new(
        ImagePoint::new(o.x + s * b.cos(), o.y + s * b.sin()),
        o,
        ImagePoint::new(o.x + s * a.cos(), o.y + s * a.sin()),
    )
}

#[test]
fn random_samples_are_rarely_flagged() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 2000;
    let flagged = (0..n)
        .filter(|_| {
            let groups = (0..3).map(|_| (0..2).map(|_| random_frame(&mut rng)).collect()).collect();
            !degeneracy_flags(&MinimalSample::new(SampleConfig::C222, groups).unwrap(), None).is_empty()
        })
        .count();
    assert!((flagged as f64) < 0.01 * n as f64, "{flagged} of {n} flagged");
}

#[test]
fn equation_count_is_number_of_pairs() {
    let s = scene(5);
    for config in [SampleConfig::C222, SampleConfig::C32, SampleConfig::C4] {
        let sys = build_des(&take(&s.frames, config)).unwrap();
        let pairs: usize = config.group_sizes().iter().map(|n| n * (n - 1) / 2).sum();
        assert_eq!(sys.polys.len(), pairs);
        assert_eq!(sys.tags.len(), pairs);
    }
}
