//! RANSAC over the minimal solvers, equal-scale consensus, local refinement
//! and the synthetic-benchmark metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{
    build_cs, build_des, build_des_fixed_lambda, ConstraintError, DegeneracyFlag, MinimalSample,
    PolySystem, SampleConfig, EPS_VL,
};
use crate::geometry::{
    change_of_scale, distort, rectified_scale, rectify, AffineFrame, ImagePoint, RectifyModel,
    ScaleObservation,
};
use crate::polysolve::{solve, SolutionSet, SolveError, SolverConfig};
use crate::synth::GroundTruthScene;

/// Relative scale difference below which a pair of regions agrees.
pub const DEFAULT_TAU: f64 = 0.15;
/// Directions tried when testing whether a vanishing line through the
/// distortion center explains the data.
const THROUGH_CENTER_DIRECTIONS: usize = 720;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RobustError {
    #[error("no feasible model after {0} samples")]
    NoFeasibleModel(usize),
    #[error("ground-truth lambda is zero; absolute error {0}")]
    GroundTruthZero(f64),
    #[error("pool cannot supply a {0} sample")]
    InsufficientPool(Variant),
    #[error("variant {0} needs scale observations")]
    MissingScales(Variant),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    Des(SampleConfig),
    Cs(SampleConfig),
    /// Two pairs of frames with the distortion parameter held fixed.
    DesFixed(f64),
}

impl Variant {
    pub fn config(&self) -> SampleConfig {
        match *self {
            Variant::Des(c) | Variant::Cs(c) => c,
            Variant::DesFixed(_) => SampleConfig::C22Fixed,
        }
    }

    pub fn fixed_lambda(&self) -> Option<f64> {
        match *self {
            Variant::DesFixed(l) => Some(l),
            _ => None,
        }
    }

    pub fn is_cs(&self) -> bool {
        matches!(self, Variant::Cs(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Des(SampleConfig::C222) => "des222",
            Variant::Des(SampleConfig::C32) => "des32",
            Variant::Des(SampleConfig::C4) => "des4",
            Variant::Cs(SampleConfig::C222) => "cs222",
            Variant::Cs(SampleConfig::C32) => "cs32",
            Variant::Cs(SampleConfig::C4) => "cs4",
            Variant::DesFixed(_) | Variant::Des(SampleConfig::C22Fixed) | Variant::Cs(SampleConfig::C22Fixed) => {
                "des22-fixed"
            }
        }
    }

    /// Parses a variant name; `des22-fixed` takes its distortion from `lambda`.
    pub fn parse(name: &str, lambda: f64) -> Option<Self> {
        Some(match name {
            "des222" => Variant::Des(SampleConfig::C222),
            "des32" => Variant::Des(SampleConfig::C32),
            "des4" => Variant::Des(SampleConfig::C4),
            "cs222" => Variant::Cs(SampleConfig::C222),
            "cs32" => Variant::Cs(SampleConfig::C32),
            "cs4" => Variant::Cs(SampleConfig::C4),
            "des22-fixed" => Variant::DesFixed(lambda),
            _ => return None,
        })
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::parse(s, -4.0).ok_or_else(|| format!("unknown variant {s}"))
    }
}

/// Correspondence groups: frames, and optionally per-frame scale observations
/// in the same order.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondencePool {
    pub frames: Vec<Vec<AffineFrame>>,
    pub scales: Option<Vec<Vec<ScaleObservation>>>,
}

impl CorrespondencePool {
    pub fn new(frames: Vec<Vec<AffineFrame>>) -> Self {
        Self { frames, scales: None }
    }

    pub fn with_scales(mut self, scales: Vec<Vec<ScaleObservation>>) -> Self {
        self.scales = Some(scales);
        self
    }

    pub fn pair_count(&self) -> usize {
        self.frames.iter().map(|g| g.len() * g.len().saturating_sub(1) / 2).sum()
    }

    fn supports(&self, config: SampleConfig) -> bool {
        let mut sizes: Vec<usize> = self.frames.iter().map(Vec::len).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        let need = config.group_sizes();
        need.len() <= sizes.len() && need.iter().zip(&sizes).all(|(n, s)| s >= n)
    }
}

/// Indices `(group, member)` of a minimal sample, grouped like the config.
pub type SampleIndices = Vec<Vec<(usize, usize)>>;

/// Draws groups with probability proportional to their size, then members
/// uniformly, without replacement.
pub fn draw_sample(pool: &CorrespondencePool, config: SampleConfig, rng: &mut impl Rng) -> Option<SampleIndices> {
    let mut used = vec![false; pool.frames.len()];
    let mut out = Vec::new();
    for &need in config.group_sizes() {
        let eligible: Vec<usize> = (0..pool.frames.len())
            .filter(|&g| !used[g] && pool.frames[g].len() >= need)
            .collect();
        let total: usize = eligible.iter().map(|&g| pool.frames[g].len()).sum();
        if total == 0 {
            return None;
        }
        let mut pick = rng.random_range(0..total);
        let g = *eligible
            .iter()
            .find(|&&g| {
                let n = pool.frames[g].len();
                if pick < n {
                    true
                } else {
                    pick -= n;
                    false
                }
            })
            .expect("pick within total");
        used[g] = true;
        let members = rand::seq::index::sample(rng, pool.frames[g].len(), need);
        out.push(members.into_iter().map(|m| (g, m)).collect());
    }
    Some(out)
}

/// First members of the first groups large enough, in pool order.
pub fn first_sample(pool: &CorrespondencePool, config: SampleConfig) -> Option<SampleIndices> {
    let mut used = vec![false; pool.frames.len()];
    let mut out = Vec::new();
    for &need in config.group_sizes() {
        let g = (0..pool.frames.len()).find(|&g| !used[g] && pool.frames[g].len() >= need)?;
        used[g] = true;
        out.push((0..need).map(|m| (g, m)).collect());
    }
    Some(out)
}

/// Builds the variant's constraint system from the sampled regions.
pub fn build_system(
    pool: &CorrespondencePool,
    variant: Variant,
    idx: &SampleIndices,
) -> Result<PolySystem, RobustError> {
    let config = variant.config();
    let frames = || -> Vec<Vec<AffineFrame>> {
        idx.iter().map(|g| g.iter().map(|&(a, b)| pool.frames[a][b]).collect()).collect()
    };
    Ok(match variant {
        Variant::Des(_) => build_des(&MinimalSample::new(config, frames())?)?,
        Variant::DesFixed(l) => build_des_fixed_lambda(&MinimalSample::new(config, frames())?, l)?,
        Variant::Cs(_) => {
            let scales = pool.scales.as_ref().ok_or(RobustError::MissingScales(variant))?;
            let obs = idx.iter().map(|g| g.iter().map(|&(a, b)| scales[a][b]).collect()).collect();
            build_cs(&MinimalSample::new(config, obs)?)?
        }
    })
}

/// Solves one sample, returning the system alongside its roots.
pub fn solve_sample(
    pool: &CorrespondencePool,
    variant: Variant,
    idx: &SampleIndices,
    cfg: &SolverConfig,
) -> Result<(PolySystem, SolutionSet), RobustError> {
    let sys = build_system(pool, variant, idx)?;
    let sol = solve(&sys, cfg)?;
    Ok((sys, sol))
}

/// Feasible models of a solution set, in root order.
pub fn feasible_models(sol: &SolutionSet, variant: Variant) -> Vec<RectifyModel> {
    sol.feasible()
        .map(|r| RectifyModel::from_params(r.params(variant.fixed_lambda())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpErrorReport {
    /// Pixels; infinite when some grid point cannot be rectified.
    pub rms: f64,
    pub per_point: Vec<f64>,
    /// Rows of the 2 × 3 map from rectified to plane coordinates.
    pub affine: [[f64; 3]; 2],
}

impl WarpErrorReport {
    fn failed(n: usize) -> Self {
        Self {
            rms: f64::INFINITY,
            per_point: vec![f64::INFINITY; n],
            affine: [[f64::NAN; 3]; 2],
        }
    }
}

/// Round-trip warp error of `model` over the scene's plane grid.
pub fn warp_error(model: &RectifyModel, scene: &GroundTruthScene) -> WarpErrorReport {
    warp_error_with(scene, |p| rectify(p, model).ok())
}

/// Warp error for an arbitrary rectification map of distorted points.
pub fn warp_error_with(
    scene: &GroundTruthScene,
    rectify_fn: impl Fn(&ImagePoint) -> Option<ImagePoint>,
) -> WarpErrorReport {
    let grid = scene.warp_grid();
    let n = grid.len();
    let mut seen = Vec::with_capacity(n);
    let mut rect = Vec::with_capacity(n);
    for g in &grid {
        let Ok(x) = scene.image_of(*g) else { return WarpErrorReport::failed(n) };
        let Some(r) = rectify_fn(&x).filter(|r| r.x.is_finite() && r.y.is_finite()) else {
            return WarpErrorReport::failed(n);
        };
        seen.push(x);
        rect.push(r);
    }
    // Center and scale rectified points for conditioning.
    let (mx, my) = rect.iter().fold((0.0, 0.0), |a, r| (a.0 + r.x / n as f64, a.1 + r.y / n as f64));
    let spread = rect.iter().map(|r| (r.x - mx).hypot(r.y - my)).sum::<f64>() / n as f64;
    if !(spread > 0.0) {
        return WarpErrorReport::failed(n);
    }
    let design = DMatrix::from_fn(n, 3, |i, k| match k {
        0 => (rect[i].x - mx) / spread,
        1 => (rect[i].y - my) / spread,
        _ => 1.0,
    });
    let svd = design.clone().svd(true, true);
    let mut coef = [[0.0; 3]; 2];
    for (c, row) in coef.iter_mut().enumerate() {
        let rhs = DVector::from_fn(n, |i, _| grid[i][c]);
        let Ok(sol) = svd.solve(&rhs, 1e-14) else { return WarpErrorReport::failed(n) };
        // undo the conditioning
        row[0] = sol[0] / spread;
        row[1] = sol[1] / spread;
        row[2] = sol[2] - row[0] * mx - row[1] * my;
    }
    let h = scene.plane_to_image;
    let mut per_point = Vec::with_capacity(n);
    for (r, x) in rect.iter().zip(&seen) {
        let a = [
            coef[0][0] * r.x + coef[0][1] * r.y + coef[0][2],
            coef[1][0] * r.x + coef[1][1] * r.y + coef[1][2],
        ];
        let d = match reimage(&h, a, scene.lambda) {
            Some(y) => y.dist(x) / scene.normalizer.scale,
            None => f64::INFINITY,
        };
        per_point.push(d);
    }
    let rms = (per_point.iter().map(|d| d * d).sum::<f64>() / n as f64).sqrt();
    WarpErrorReport {
        rms,
        per_point,
        affine: coef,
    }
}

fn reimage(h: &Matrix3<f64>, plane: [f64; 2], lambda: f64) -> Option<ImagePoint> {
    let p = h * Vector3::new(plane[0], plane[1], 1.0);
    if p.z.abs() < 1e-300 {
        return None;
    }
    distort(&ImagePoint::new(p.x / p.z, p.y / p.z), lambda).ok()
}

/// `|λ̂ − λ| / |λ|`.
pub fn rel_lambda_error(lambda_est: f64, lambda_gt: f64) -> Result<f64, RobustError> {
    if lambda_gt == 0.0 {
        return Err(RobustError::GroundTruthZero((lambda_est - lambda_gt).abs()));
    }
    Ok((lambda_est - lambda_gt).abs() / lambda_gt.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scoring<'a> {
    /// Inlier pairs under the equal-scale test with threshold `tau`.
    EqualScale { tau: f64 },
    /// Warp error against a known scene; lower is better.
    WarpGt(&'a GroundTruthScene),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub tau: f64,
    pub refine: bool,
    pub parallel: bool,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 25,
            seed: 0,
            solver: SolverConfig::noisy(),
            tau: DEFAULT_TAU,
            refine: false,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub model: RectifyModel,
    /// Inlier pairs under the equal-scale test.
    pub consensus_size: usize,
    pub samples_tried: usize,
    /// Warp rms for ground-truth scoring, inlier pair count for equal-scale.
    pub best_score: f64,
    pub refined: bool,
    /// Iteration whose sample produced the model.
    pub iteration: usize,
    /// Real and feasible root counts of that sample.
    pub sample_real: usize,
    pub sample_feasible: usize,
    /// Degeneracies detected for the returned model; an estimate with flags
    /// should not be trusted.
    pub flags: BTreeSet<DegeneracyFlag>,
}

/// Rectified scales of every pool region under `m`; `None` where undefined.
pub fn rectified_scales(pool: &CorrespondencePool, variant: Variant, m: &RectifyModel) -> Vec<Vec<Option<f64>>> {
    match (variant.is_cs(), &pool.scales) {
        (true, Some(scales)) => scales
            .iter()
            .map(|g| g.iter().map(|o| change_of_scale(&o.center, m).ok().map(|c| o.scale * c)).collect())
            .collect(),
        _ => pool
            .frames
            .iter()
            .map(|g| g.iter().map(|f| rectified_scale(f, m).ok().map(|(s, _)| s.abs())).collect())
            .collect(),
    }
}

fn agrees(a: f64, b: f64, tau: f64) -> bool {
    (a - b).abs() / a.abs().max(b.abs()) < tau
}

/// Pairs `(group, i, j)` whose rectified scales agree to `tau`.
pub fn inlier_pairs(scales: &[Vec<Option<f64>>], tau: f64) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for (g, s) in scales.iter().enumerate() {
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                if let (Some(a), Some(b)) = (s[i], s[j]) {
                    if agrees(a, b, tau) {
                        out.push((g, i, j));
                    }
                }
            }
        }
    }
    out
}

pub fn consensus(pool: &CorrespondencePool, variant: Variant, m: &RectifyModel, tau: f64) -> usize {
    inlier_pairs(&rectified_scales(pool, variant, m), tau).len()
}

struct Candidate {
    /// Lower is better.
    key: f64,
    model: RectifyModel,
    iteration: usize,
    n_real: usize,
    n_feasible: usize,
}

fn run_iteration(
    pool: &CorrespondencePool,
    variant: Variant,
    scoring: &Scoring,
    cfg: &RansacConfig,
    iteration: usize,
) -> Option<Candidate> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(iteration as u64);
    let idx = draw_sample(pool, variant.config(), &mut rng)?;
    let (_, sol) = solve_sample(pool, variant, &idx, &cfg.solver).ok()?;
    let (n_real, n_feasible) = (sol.roots.len(), sol.feasible_count());
    feasible_models(&sol, variant)
        .into_iter()
        .map(|model| {
            let key = match scoring {
                Scoring::WarpGt(scene) => warp_error(&model, scene).rms,
                Scoring::EqualScale { tau } => -(consensus(pool, variant, &model, *tau) as f64),
            };
            Candidate {
                key,
                model,
                iteration,
                n_real,
                n_feasible,
            }
        })
        .filter(|c| !c.key.is_nan())
        .min_by(|a, b| a.key.total_cmp(&b.key))
}

/// Best feasible model over `cfg.iterations` minimal samples. Iteration `k`
/// always draws the same sample for a given seed, so more iterations never
/// give a worse score.
pub fn ransac(
    pool: &CorrespondencePool,
    variant: Variant,
    scoring: Scoring,
    cfg: &RansacConfig,
) -> Result<EstimationResult, RobustError> {
    if !pool.supports(variant.config()) {
        return Err(RobustError::InsufficientPool(variant));
    }
    if variant.is_cs() && pool.scales.is_none() {
        return Err(RobustError::MissingScales(variant));
    }
    let candidates: Vec<Option<Candidate>> = if cfg.parallel {
        (0..cfg.iterations)
            .into_par_iter()
            .map(|k| run_iteration(pool, variant, &scoring, cfg, k))
            .collect()
    } else {
        (0..cfg.iterations).map(|k| run_iteration(pool, variant, &scoring, cfg, k)).collect()
    };
    let best = candidates
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.key < a.key { b } else { a })
        .ok_or(RobustError::NoFeasibleModel(cfg.iterations))?;
    let mut model = best.model;
    let mut refined = false;
    if cfg.refine {
        let r = refine(&model, pool, variant, cfg.tau);
        refined = r != model;
        model = r;
    }
    let best_score = match scoring {
        Scoring::WarpGt(scene) => warp_error(&model, scene).rms,
        Scoring::EqualScale { tau } => consensus(pool, variant, &model, tau) as f64,
    };
    let consensus_size = consensus(pool, variant, &model, cfg.tau);
    let mut flags = BTreeSet::new();
    if model.l.distance_to_origin() < EPS_VL
        || through_center_consensus(pool, variant, model.lambda, cfg.tau) >= consensus_size
    {
        flags.insert(DegeneracyFlag::VlThroughOrigin);
    }
    Ok(EstimationResult {
        model,
        consensus_size,
        samples_tried: cfg.iterations,
        best_score,
        refined,
        iteration: best.iteration,
        sample_real: best.n_real,
        sample_feasible: best.n_feasible,
        flags,
    })
}

/// Best consensus of a model whose vanishing line passes through the
/// distortion center. The distortion parameter drops out of the rectified
/// frames there, so an estimate that does no better is not identifiable.
pub fn through_center_consensus(pool: &CorrespondencePool, variant: Variant, lambda: f64, tau: f64) -> usize {
    let r = 2.0 / EPS_VL;
    (0..THROUGH_CENTER_DIRECTIONS)
        .map(|k| {
            let t = std::f64::consts::PI * k as f64 / THROUGH_CENTER_DIRECTIONS as f64;
            consensus(pool, variant, &RectifyModel::new(r * t.cos(), r * t.sin(), lambda), tau)
        })
        .max()
        .unwrap_or(0)
}

fn pair_residuals(
    pool: &CorrespondencePool,
    variant: Variant,
    pairs: &[(usize, usize, usize)],
    m: &RectifyModel,
) -> Option<Vec<f64>> {
    let s = rectified_scales(pool, variant, m);
    pairs
        .iter()
        .map(|&(g, i, j)| {
            let (a, b) = (s[g][i]?, s[g][j]?);
            let d = a.abs() + b.abs();
            (d > 0.0).then(|| (a - b) / d)
        })
        .collect()
}

/// Equal-scale objective of `m` over the inlier pairs of `pairs`.
pub fn equal_scale_objective(
    pool: &CorrespondencePool,
    variant: Variant,
    pairs: &[(usize, usize, usize)],
    m: &RectifyModel,
) -> f64 {
    pair_residuals(pool, variant, pairs, m)
        .map(|r| r.iter().map(|v| v * v).sum())
        .unwrap_or(f64::INFINITY)
}

/// Levenberg–Marquardt on the equal-scale residuals of the pairs that are
/// inliers under `model`. The objective never increases; the input is
/// returned when fewer than three pairs agree or nothing improves.
pub fn refine(model: &RectifyModel, pool: &CorrespondencePool, variant: Variant, tau: f64) -> RectifyModel {
    let pairs = inlier_pairs(&rectified_scales(pool, variant, model), tau);
    if pairs.len() < 3 {
        return *model;
    }
    let nfree = if variant.fixed_lambda().is_some() { 2 } else { 3 };
    let to_model = |p: &[f64]| {
        RectifyModel::from_params([p[0], p[1], if nfree == 3 { p[2] } else { model.lambda }])
    };
    let resid = |p: &[f64]| pair_residuals(pool, variant, &pairs, &to_model(p));
    let mut p: Vec<f64> = model.params()[..nfree].to_vec();
    let Some(mut r) = resid(&p) else { return *model };
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut mu = 1e-3;
    for _ in 0..100 {
        if cost == 0.0 {
            break;
        }
        let mut jac = DMatrix::zeros(r.len(), nfree);
        for k in 0..nfree {
            let h = 1e-7 * (1.0 + p[k].abs());
            let mut lo = p.clone();
            let mut hi = p.clone();
            lo[k] -= h;
            hi[k] += h;
            let (Some(rl), Some(rh)) = (resid(&lo), resid(&hi)) else { return to_model(&p) };
            for i in 0..r.len() {
                jac[(i, k)] = (rh[i] - rl[i]) / (2.0 * h);
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_vec(r.clone());
        let mut accepted = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for k in 0..nfree {
                a[(k, k)] += mu * (1.0 + jtj[(k, k)]);
            }
            let Some(dx) = a.lu().solve(&(-&g)) else { break };
            let cand: Vec<f64> = p.iter().zip(dx.iter()).map(|(a, d)| a + d).collect();
            if let Some(rc) = resid(&cand) {
                let cc: f64 = rc.iter().map(|v| v * v).sum();
                if cc < cost {
                    let small = dx.norm() < 1e-14 * (1.0 + p.iter().map(|v| v * v).sum::<f64>().sqrt());
                    p = cand;
                    r = rc;
                    cost = cc;
                    mu = (mu * 0.3).max(1e-12);
                    accepted = !small;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    to_model(&p)
}

/// Real and feasible root counts for one solved sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusTrial {
    pub scene: usize,
    pub sigma_index: usize,
    pub n_real: usize,
    pub n_feasible: usize,
    pub n_finite: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub trials: Vec<CensusTrial>,
    pub real_hist: BTreeMap<usize, usize>,
    pub feasible_hist: BTreeMap<usize, usize>,
    /// Trials skipped because the sample was degenerate or the solve failed.
    pub skipped: usize,
}

impl Census {
    pub fn exactly_one_feasible_fraction(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().filter(|t| t.n_feasible == 1).count() as f64 / self.trials.len() as f64
    }

    pub fn max_real(&self) -> usize {
        self.trials.iter().map(|t| t.n_real).max().unwrap_or(0)
    }
}

/// Solves the first minimal sample of each scene at each noise level and
/// tallies the real and feasible roots. Noisy frames for scene `k` at noise
/// level `j` use seed `noise_seed + 1000 k + j`.
pub fn solution_census(
    scenes: &[GroundTruthScene],
    sigmas: &[f64],
    variant: Variant,
    noise_seed: u64,
) -> Census {
    let jobs: Vec<(usize, usize)> = (0..scenes.len())
        .flat_map(|k| (0..sigmas.len()).map(move |j| (k, j)))
        .collect();
    let results: Vec<Option<CensusTrial>> = jobs
        .par_iter()
        .map(|&(k, j)| {
            let scene = &scenes[k];
            let sigma = sigmas[j];
            let frames = crate::synth::add_noise(scene, sigma, noise_seed + 1000 * k as u64 + j as u64);
            let pool = scene_pool(scene, frames).ok()?;
            let idx = first_sample(&pool, variant.config())?;
            let cfg = if sigma > 0.0 { SolverConfig::noisy() } else { SolverConfig::default() };
            let (_, sol) = solve_sample(&pool, variant, &idx, &cfg).ok()?;
            Some(CensusTrial {
                scene: k,
                sigma_index: j,
                n_real: sol.roots.len(),
                n_feasible: sol.feasible_count(),
                n_finite: sol.stats.converged,
            })
        })
        .collect();
    let mut census = Census::default();
    for r in results {
        match r {
            Some(t) => {
                *census.real_hist.entry(t.n_real).or_default() += 1;
                *census.feasible_hist.entry(t.n_feasible).or_default() += 1;
                census.trials.push(t);
            }
            None => census.skipped += 1,
        }
    }
    census
}

/// Pool for a scene and (possibly noisy) copies of its frames, with scale
/// observations from the first-order change-of-scale model.
pub fn scene_pool(scene: &GroundTruthScene, frames: Vec<Vec<AffineFrame>>) -> Result<CorrespondencePool, crate::geometry::GeometryError> {
    let scales = crate::synth::cs_observations_linearized(scene, &frames)?;
    Ok(CorrespondencePool::new(frames).with_scales(scales))
}
