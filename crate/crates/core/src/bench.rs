//! Synthetic benchmark protocols producing one result row per trial.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::RectifyModel;
use crate::io::ResultRow;
use crate::polysolve::SolverConfig;
use crate::robust::{
    first_sample, ransac, scene_pool, solve_sample, warp_error, RansacConfig, Scoring, Variant,
};
use crate::synth::{add_noise, gen_scene, GroundTruthScene, Motion, SceneParams, SynthError};

pub const NOISE_LEVELS: [f64; 5] = [0.1, 0.5, 1.0, 2.0, 5.0];
pub const DISTORTION_LEVELS: [f64; 6] = [-5.0, -4.0, -3.0, -2.0, -1.0, 0.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchKind {
    /// Noiseless scenes; the root nearest ground truth of one minimal sample.
    Stability,
    /// RANSAC over the noise levels.
    Noise,
    /// RANSAC over the distortion levels.
    Distortion,
    /// Real and feasible root counts of one minimal sample per noise level.
    Census,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchParams {
    pub scenes: usize,
    pub seed: u64,
    pub variant: Variant,
    pub iterations: usize,
    /// Ground-truth distortion, except for the distortion sweep.
    pub lambda: f64,
    /// Noise level of the distortion sweep.
    pub sigma: f64,
    pub sigmas: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub motion: Motion,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            scenes: 20,
            seed: 0,
            variant: Variant::Des(crate::constraints::SampleConfig::C222),
            iterations: 25,
            lambda: -4.0,
            sigma: 1.0,
            sigmas: NOISE_LEVELS.to_vec(),
            lambdas: DISTORTION_LEVELS.to_vec(),
            motion: Motion::Rigid,
        }
    }
}

/// Scene `k` of a benchmark seeded with `seed`.
pub fn bench_scene(seed: u64, k: usize, lambda: f64, motion: Motion) -> Result<GroundTruthScene, SynthError> {
    gen_scene(&SceneParams {
        seed: seed.wrapping_mul(0x9e37_79b9).wrapping_add(k as u64),
        lambda,
        motion,
        ..SceneParams::default()
    })
}

fn noise_seed(seed: u64, trial: usize) -> u64 {
    seed ^ (trial as u64).wrapping_mul(0x2545_f491_4f6c_dd1d)
}

fn empty_row(trial: usize, variant: Variant, sigma: f64, lambda_gt: f64) -> ResultRow {
    ResultRow {
        trial,
        variant: variant.name().into(),
        sigma,
        lambda_gt,
        lambda_est: f64::NAN,
        l1: f64::NAN,
        l2: f64::NAN,
        rms_warp: f64::INFINITY,
        rel_lambda_err: f64::NAN,
        n_real: 0,
        n_feasible: 0,
        solve_millis: 0.0,
        residual: f64::NAN,
        lambda_err_kind: if lambda_gt == 0.0 { "abs" } else { "rel" }.into(),
    }
}

fn fill_model(row: &mut ResultRow, m: &RectifyModel, scene: &GroundTruthScene) {
    row.lambda_est = m.lambda;
    row.l1 = m.l.l1;
    row.l2 = m.l.l2;
    row.rms_warp = warp_error(m, scene).rms;
    let (e, kind) = ResultRow::lambda_error(m.lambda, scene.lambda);
    row.rel_lambda_err = e;
    row.lambda_err_kind = kind;
}

/// RANSAC with ground-truth warp scoring on one noisy scene.
pub fn ransac_trial(
    trial: usize,
    scene: &GroundTruthScene,
    sigma: f64,
    variant: Variant,
    iterations: usize,
    seed: u64,
) -> ResultRow {
    let mut row = empty_row(trial, variant, sigma, scene.lambda);
    let frames = add_noise(scene, sigma, noise_seed(seed, trial));
    let Ok(pool) = scene_pool(scene, frames) else { return row };
    let cfg = RansacConfig {
        iterations,
        seed: noise_seed(seed, trial).rotate_left(17),
        ..RansacConfig::default()
    };
    let start = Instant::now();
    let res = ransac(&pool, variant, Scoring::WarpGt(scene), &cfg);
    row.solve_millis = start.elapsed().as_secs_f64() * 1e3;
    if let Ok(r) = res {
        fill_model(&mut row, &r.model, scene);
        row.n_real = r.sample_real;
        row.n_feasible = r.sample_feasible;
    }
    row
}

/// Solves the first minimal sample and reports the root nearest ground truth
/// (feasible roots only when `feasible_only`).
pub fn single_sample_trial(
    trial: usize,
    scene: &GroundTruthScene,
    sigma: f64,
    variant: Variant,
    seed: u64,
    feasible_only: bool,
) -> ResultRow {
    let mut row = empty_row(trial, variant, sigma, scene.lambda);
    let frames = add_noise(scene, sigma, noise_seed(seed, trial));
    let Ok(pool) = scene_pool(scene, frames) else { return row };
    let Some(idx) = first_sample(&pool, variant.config()) else { return row };
    let cfg = if sigma > 0.0 {
        SolverConfig::noisy()
    } else {
        SolverConfig::default()
    };
    let start = Instant::now();
    let res = solve_sample(&pool, variant, &idx, &cfg);
    row.solve_millis = start.elapsed().as_secs_f64() * 1e3;
    let Ok((_, sol)) = res else { return row };
    row.n_real = sol.roots.len();
    row.n_feasible = sol.feasible_count();
    let gt = [scene.vline.l1, scene.vline.l2, scene.lambda];
    let dist = |p: [f64; 3]| (0..3).map(|k| ((p[k] - gt[k]) / (1.0 + gt[k].abs())).powi(2)).sum::<f64>();
    let best = sol
        .roots
        .iter()
        .filter(|r| r.feasible || !feasible_only)
        .min_by(|a, b| {
            dist(a.params(variant.fixed_lambda())).total_cmp(&dist(b.params(variant.fixed_lambda())))
        });
    if let Some(r) = best {
        fill_model(&mut row, &RectifyModel::from_params(r.params(variant.fixed_lambda())), scene);
        row.residual = r.residual;
    }
    row
}

/// Runs a benchmark. Rows are ordered by trial id; each trial is
/// deterministic in `params.seed`.
pub fn run_bench(kind: BenchKind, p: &BenchParams) -> Result<Vec<ResultRow>, SynthError> {
    // (scene index, sigma, lambda_gt)
    let jobs: Vec<(usize, f64, f64)> = match kind {
        BenchKind::Stability => (0..p.scenes).map(|k| (k, 0.0, p.lambda)).collect(),
        BenchKind::Noise | BenchKind::Census => p
            .sigmas
            .iter()
            .flat_map(|&s| (0..p.scenes).map(move |k| (k, s, p.lambda)))
            .collect(),
        BenchKind::Distortion => p
            .lambdas
            .iter()
            .flat_map(|&l| (0..p.scenes).map(move |k| (k, p.sigma, l)))
            .collect(),
    };
    jobs.par_iter()
        .enumerate()
        .map(|(trial, &(k, sigma, lambda))| {
            let scene = bench_scene(p.seed, k, lambda, p.motion)?;
            Ok(match kind {
                BenchKind::Stability => single_sample_trial(trial, &scene, 0.0, p.variant, p.seed, false),
                BenchKind::Census => single_sample_trial(trial, &scene, sigma, p.variant, p.seed, true),
                BenchKind::Noise | BenchKind::Distortion => {
                    ransac_trial(trial, &scene, sigma, p.variant, p.iterations, p.seed)
                }
            })
        })
        .collect()
}

/// Aggregate of the rows sharing a variant, noise level and distortion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub variant: String,
    pub sigma: f64,
    pub lambda_gt: f64,
    pub trials: usize,
    pub median_rms_warp: f64,
    pub frac_rms_below_5px: f64,
    pub median_lambda_err: f64,
    pub median_log10_residual: f64,
    pub frac_one_feasible: f64,
}

pub fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn summarize(rows: &[ResultRow]) -> Vec<Summary> {
    let mut groups: BTreeMap<(String, u64, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.variant.clone(), r.sigma.to_bits(), r.lambda_gt.to_bits()))
            .or_default()
            .push(r);
    }
    let mut out: Vec<Summary> = groups
        .into_values()
        .map(|g| {
            let n = g.len();
            let frac = |f: &dyn Fn(&ResultRow) -> bool| g.iter().filter(|r| f(r)).count() as f64 / n as f64;
            Summary {
                variant: g[0].variant.clone(),
                sigma: g[0].sigma,
                lambda_gt: g[0].lambda_gt,
                trials: n,
                median_rms_warp: median(&mut g.iter().map(|r| r.rms_warp).collect::<Vec<_>>()),
                frac_rms_below_5px: frac(&|r| r.rms_warp < 5.0),
                median_lambda_err: median(
                    &mut g
                        .iter()
                        .map(|r| if r.rel_lambda_err.is_nan() { f64::INFINITY } else { r.rel_lambda_err })
                        .collect::<Vec<_>>(),
                ),
                median_log10_residual: median(
                    &mut g
                        .iter()
                        .map(|r| if r.residual.is_nan() { f64::INFINITY } else { r.residual.max(1e-300).log10() })
                        .collect::<Vec<_>>(),
                ),
                frac_one_feasible: frac(&|r| r.n_feasible == 1),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.variant
            .cmp(&b.variant)
            .then(a.sigma.total_cmp(&b.sigma))
            .then(a.lambda_gt.total_cmp(&b.lambda_gt))
    });
    out
}

pub fn write_summary(summary: &[Summary], w: impl std::io::Write) -> Result<(), crate::io::IoError> {
    let mut wr = csv::Writer::from_writer(w);
    for s in summary {
        wr.serialize(s)?;
    }
    wr.flush()?;
    Ok(())
}
