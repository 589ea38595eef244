use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use radrect::bench::{run_bench, summarize, write_summary, BenchKind, BenchParams};
use radrect::constraints::ConstraintError;
use radrect::geometry::{
    change_of_scale, dense_change_of_scale_map, distorted_vanishing_circle, mask_by_scale,
    rectified_scale, GeometryError, ImagePoint, RectifyModel, VanishingLocus,
};
use radrect::io::{write_results, IoError, ResultRow, SceneFile};
use radrect::polysolve::SolveError;
use radrect::robust::{
    ransac, rel_lambda_error, warp_error, CorrespondencePool, EstimationResult, RansacConfig,
    RobustError, Scoring, Variant, DEFAULT_TAU,
};
use radrect::synth::{add_noise, cs_observations_linearized, gen_scene, Motion, SceneParams, SynthError};

/// Thread count for parallel trials; nothing else is read from the environment.
const THREADS_ENV: &str = "RADRECT_THREADS";

#[derive(Parser)]
#[command(name = "radrect", version, about = "Radial undistortion and affine rectification from coplanar repeats")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Des222,
    Des32,
    Des4,
    #[value(name = "des22-fixed")]
    Des22Fixed,
    Cs222,
    Cs32,
    Cs4,
}

impl VariantArg {
    fn resolve(self, lambda: f64) -> Variant {
        let name = self.to_possible_value().expect("named variant");
        Variant::parse(name.get_name(), lambda).expect("variant names agree")
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MotionArg {
    Rigid,
    Translation,
}

impl From<MotionArg> for Motion {
    fn from(m: MotionArg) -> Self {
        match m {
            MotionArg::Rigid => Motion::Rigid,
            MotionArg::Translation => Motion::Translation,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScoringArg {
    WarpGt,
    EqualScale,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BenchArg {
    Stability,
    Noise,
    Distortion,
    Census,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scene documents.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, value_enum, default_value_t = MotionArg::Rigid)]
        motion: MotionArg,
        #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
        lambda: f64,
        /// Noise in pixels added to the stored frames.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// A `.json` file when `count` is 1, otherwise a directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the model of a scene document by RANSAC.
    Solve {
        scene: PathBuf,
        #[arg(long, value_enum, default_value_t = VariantArg::Des222)]
        variant: VariantArg,
        #[arg(long, value_enum, default_value_t = ScoringArg::WarpGt)]
        scoring: ScoringArg,
        #[arg(long, default_value_t = 25)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Known distortion for `des22-fixed`.
        #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
        lambda: f64,
        /// Levenberg–Marquardt polish on the equal-scale residuals.
        #[arg(long)]
        refine: bool,
        /// Directory receiving `model.json` and `result.csv`; stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark and write one CSV row per trial.
    Bench {
        #[arg(value_enum)]
        kind: BenchArg,
        #[arg(long, default_value_t = 20)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = VariantArg::Des222)]
        variant: VariantArg,
        #[arg(long, default_value_t = 25)]
        iterations: usize,
        /// Ground-truth distortion; the fixed value for `des22-fixed`.
        #[arg(long, default_value_t = -4.0, allow_negative_numbers = true)]
        lambda: f64,
        /// Noise level for the distortion sweep.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = MotionArg::Rigid)]
        motion: MotionArg,
        /// Write aggregated statistics instead of per-trial rows.
        #[arg(long)]
        summary: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the relative change-of-scale field of a model.
    ChosMap {
        /// Take the ground-truth model of this scene document.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        l1: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        l2: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long, default_value_t = 10.0)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify that a scene document is consistent with its ground truth.
    Check {
        scene: PathBuf,
        /// Largest relative spread of rectified scales within a group.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
}

/// Failure classes reported on stderr and through the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Category {
    Io,
    Format,
    Degenerate,
    NoFeasibleModel,
    Solver,
    Synth,
    CheckFailed,
    Invalid,
}

impl Category {
    fn name(self) -> &'static str {
        match self {
            Category::Io => "io",
            Category::Format => "format",
            Category::Degenerate => "degenerate",
            Category::NoFeasibleModel => "no-feasible-model",
            Category::Solver => "solver",
            Category::Synth => "synth",
            Category::CheckFailed => "check-failed",
            Category::Invalid => "invalid-argument",
        }
    }

    fn code(self) -> u8 {
        match self {
            Category::Invalid => 2,
            Category::Io => 3,
            Category::Format => 4,
            Category::Degenerate => 5,
            Category::NoFeasibleModel => 6,
            Category::Solver => 7,
            Category::Synth => 8,
            Category::CheckFailed => 9,
        }
    }

    fn of(err: &anyhow::Error) -> Self {
        for cause in err.chain() {
            if let Some(e) = cause.downcast_ref::<IoError>() {
                return match e {
                    IoError::Io(_) => Category::Io,
                    _ => Category::Format,
                };
            }
            if let Some(e) = cause.downcast_ref::<RobustError>() {
                return match e {
                    RobustError::NoFeasibleModel(_) => Category::NoFeasibleModel,
                    RobustError::Constraint(_) => Category::Degenerate,
                    RobustError::Solve(_) => Category::Solver,
                    _ => Category::Invalid,
                };
            }
            if cause.is::<ConstraintError>() || cause.is::<GeometryError>() {
                return Category::Degenerate;
            }
            if cause.is::<SolveError>() {
                return Category::Solver;
            }
            if cause.is::<SynthError>() {
                return Category::Synth;
            }
            if cause.is::<CheckFailed>() {
                return Category::CheckFailed;
            }
            if cause.is::<std::io::Error>() {
                return Category::Io;
            }
            if cause.is::<serde_json::Error>() {
                return Category::Format;
            }
        }
        Category::Invalid
    }
}

#[derive(Debug)]
struct CheckFailed(String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {v:?}"))?;
        if n == 0 {
            bail!("{THREADS_ENV} must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn load_scene(path: &Path) -> Result<SceneFile> {
    let file = fs::File::open(path).map_err(IoError::from).with_context(|| format!("opening {}", path.display()))?;
    Ok(SceneFile::read(std::io::BufReader::new(file)).with_context(|| format!("reading {}", path.display()))?)
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(IoError::from).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes()).map_err(IoError::from)?,
    }
    Ok(())
}

fn cmd_synth(seed: u64, count: usize, motion: Motion, lambda: f64, sigma: f64, out: &Path) -> Result<()> {
    if !(sigma >= 0.0) {
        bail!("sigma must be non-negative");
    }
    let single = count == 1 && out.extension().is_some_and(|e| e == "json");
    if !single {
        fs::create_dir_all(out).map_err(IoError::from)?;
    }
    for i in 0..count {
        let scene_seed = seed.wrapping_add(i as u64);
        let scene = gen_scene(&SceneParams {
            seed: scene_seed,
            motion,
            lambda,
            ..SceneParams::default()
        })?;
        let noise_seed = scene_seed ^ 0x6e6f_6973_65;
        let frames = add_noise(&scene, sigma, noise_seed);
        let scales = cs_observations_linearized(&scene, &frames)?;
        let doc = SceneFile::from_scene(&scene, &frames, &scales, sigma, noise_seed);
        let path = if single {
            out.to_path_buf()
        } else {
            out.join(format!("scene_{scene_seed:06}.json"))
        };
        write_text(Some(&path), &(doc.to_string_pretty() + "\n"))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveReport {
    variant: String,
    model: RectifyModel,
    estimation: EstimationResult,
    row: ResultRow,
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    scene_path: &Path,
    variant: Variant,
    scoring: ScoringArg,
    iterations: usize,
    seed: u64,
    refine: bool,
    out: Option<&Path>,
) -> Result<()> {
    if iterations == 0 {
        bail!("iterations must be at least 1");
    }
    let doc = load_scene(scene_path)?;
    let scene = doc.scene();
    let frames = doc.observed_frames();
    let scales = doc.observed_scales();
    let shapes_match = scales.len() == frames.len() && scales.iter().zip(&frames).all(|(s, f)| s.len() == f.len());
    let mut pool = CorrespondencePool::new(frames);
    if shapes_match {
        pool = pool.with_scales(scales);
    }
    let cfg = RansacConfig {
        iterations,
        seed,
        refine,
        parallel: true,
        ..RansacConfig::default()
    };
    let scoring = match scoring {
        ScoringArg::WarpGt => Scoring::WarpGt(&scene),
        ScoringArg::EqualScale => Scoring::EqualScale { tau: DEFAULT_TAU },
    };
    let start = std::time::Instant::now();
    let est = ransac(&pool, variant, scoring, &cfg)?;
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let m = est.model;
    let (err, kind) = match rel_lambda_error(m.lambda, scene.lambda) {
        Ok(e) => (e, "rel".to_string()),
        Err(_) => ((m.lambda - scene.lambda).abs(), "abs".to_string()),
    };
    let row = ResultRow {
        trial: 0,
        variant: variant.name().into(),
        sigma: doc.sigma,
        lambda_gt: scene.lambda,
        lambda_est: m.lambda,
        l1: m.l.l1,
        l2: m.l.l2,
        rms_warp: warp_error(&m, &scene).rms,
        rel_lambda_err: err,
        n_real: est.sample_real,
        n_feasible: est.sample_feasible,
        solve_millis: millis,
        residual: f64::NAN,
        lambda_err_kind: kind,
    };
    let report = SolveReport {
        variant: variant.name().into(),
        model: m,
        estimation: est,
        row: row.clone(),
    };
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(IoError::from)?;
            write_text(Some(&dir.join("model.json")), &json)?;
            let mut buf = Vec::new();
            write_results(&[row], &mut buf)?;
            write_text(Some(&dir.join("result.csv")), &String::from_utf8(buf)?)?;
        }
        None => write_text(None, &json)?,
    }
    Ok(())
}

fn cmd_bench(kind: BenchKind, params: &BenchParams, summary: bool, out: Option<&Path>) -> Result<()> {
    let rows = run_bench(kind, params)?;
    let mut buf = Vec::new();
    if summary {
        write_summary(&summarize(&rows), &mut buf)?;
    } else {
        write_results(&rows, &mut buf)?;
    }
    write_text(out, &String::from_utf8(buf)?)
}

#[derive(Serialize)]
struct ChosMap {
    model: RectifyModel,
    grid_n: usize,
    /// Grid spans `[-half_width, half_width] × [-half_height, half_height]`
    /// in normalized coordinates, row-major from the top-left corner.
    half_width: f64,
    half_height: f64,
    reference: ImagePoint,
    threshold: f64,
    values: Vec<Option<f64>>,
    mask: Vec<bool>,
    vanishing_locus: Option<VanishingLocus>,
}

fn cmd_chos_map(model: RectifyModel, half: (f64, f64), grid: usize, threshold: f64, out: Option<&Path>) -> Result<()> {
    if grid < 2 {
        bail!("grid must be at least 2");
    }
    if !(threshold > 0.0) {
        bail!("threshold must be positive");
    }
    let pts: Vec<ImagePoint> = (0..grid)
        .flat_map(|j| {
            (0..grid).map(move |i| {
                let u = 2.0 * i as f64 / (grid - 1) as f64 - 1.0;
                let v = 2.0 * j as f64 / (grid - 1) as f64 - 1.0;
                ImagePoint::new(u * half.0, v * half.1)
            })
        })
        .collect();
    let reference = ImagePoint::new(0.0, 0.0);
    change_of_scale(&reference, &model).context("reference point at the image center")?;
    let field = dense_change_of_scale_map(&pts, &model, &reference)?;
    let mask = mask_by_scale(&field, threshold);
    let doc = ChosMap {
        model,
        grid_n: grid,
        half_width: half.0,
        half_height: half.1,
        reference,
        threshold,
        values: field.values,
        mask,
        vanishing_locus: distorted_vanishing_circle(&model).ok(),
    };
    write_text(out, &(serde_json::to_string_pretty(&doc)? + "\n"))
}

#[derive(Serialize)]
struct CheckReport {
    groups: usize,
    frames: usize,
    max_spread_planted: f64,
    max_spread_observed: f64,
    max_planted_drift_px: f64,
}

fn spread(scales: &[f64]) -> f64 {
    let lo = scales.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = scales.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / hi.abs().max(lo.abs())
}

fn cmd_check(path: &Path, tol: f64) -> Result<()> {
    let doc = load_scene(path)?;
    let scene = doc.scene();
    let gt = scene.model();
    let group_spread = |frames: &[Vec<radrect::geometry::AffineFrame>]| -> Result<f64> {
        let mut worst: f64 = 0.0;
        for g in frames {
            let s = g
                .iter()
                .map(|f| rectified_scale(f, &gt).map(|(s, _)| s.abs()))
                .collect::<Result<Vec<_>, _>>()?;
            worst = worst.max(spread(&s));
        }
        Ok(worst)
    };
    let planted = group_spread(&scene.frames)?;
    let observed = group_spread(&doc.observed_frames())?;
    // planted frames must be the images of their stored pre-images
    let mut drift: f64 = 0.0;
    for (g, pg) in scene.frames.iter().zip(&scene.preimages) {
        for (f, pre) in g.iter().zip(pg) {
            for (p, x) in f.points().iter().zip(pre) {
                let q = scene.image_of(*x)?;
                drift = drift.max(p.dist(&q) / scene.normalizer.scale);
            }
        }
    }
    let report = CheckReport {
        groups: scene.frames.len(),
        frames: scene.frames.iter().map(Vec::len).sum(),
        max_spread_planted: planted,
        max_spread_observed: observed,
        max_planted_drift_px: drift,
    };
    write_text(None, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    if !(planted <= tol) {
        return Err(CheckFailed(format!("planted scales differ by {planted:e} > {tol:e}")).into());
    }
    if doc.sigma == 0.0 && !(observed <= tol) {
        return Err(CheckFailed(format!("noiseless observed scales differ by {observed:e}")).into());
    }
    if !(drift <= 1e-6) {
        return Err(CheckFailed(format!("planted frames drift {drift:e} px from their pre-images")).into());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Synth {
            seed,
            count,
            motion,
            lambda,
            sigma,
            out,
        } => cmd_synth(seed, count, motion.into(), lambda, sigma, &out),
        Command::Solve {
            scene,
            variant,
            scoring,
            iterations,
            seed,
            lambda,
            refine,
            out,
        } => cmd_solve(&scene, variant.resolve(lambda), scoring, iterations, seed, refine, out.as_deref()),
        Command::Bench {
            kind,
            scenes,
            seed,
            variant,
            iterations,
            lambda,
            sigma,
            motion,
            summary,
            out,
        } => {
            let kind = match kind {
                BenchArg::Stability => BenchKind::Stability,
                BenchArg::Noise => BenchKind::Noise,
                BenchArg::Distortion => BenchKind::Distortion,
                BenchArg::Census => BenchKind::Census,
            };
            let variant = variant.resolve(lambda);
            let params = BenchParams {
                scenes,
                seed,
                variant,
                iterations,
                lambda: if variant.fixed_lambda().is_some() { -4.0 } else { lambda },
                sigma,
                motion: motion.into(),
                ..BenchParams::default()
            };
            cmd_bench(kind, &params, summary, out.as_deref())
        }
        Command::ChosMap {
            scene,
            l1,
            l2,
            lambda,
            grid,
            threshold,
            out,
        } => {
            let (model, half) = match scene {
                Some(p) => {
                    let s = load_scene(&p)?.scene();
                    let half = s.half_extent();
                    (s.model(), half)
                }
                None => (RectifyModel::new(l1, l2, lambda), (0.25, 0.25)),
            };
            cmd_chos_map(model, half, grid, threshold, out.as_deref())
        }
        Command::Check { scene, tol } => cmd_check(&scene, tol),
    }
}

fn fail(cat: Category, message: String) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": cat.name(), "message": message }));
    ExitCode::from(cat.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return fail(Category::Invalid, e.to_string().trim_end().to_string()),
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => fail(Category::of(&err), format!("{err:#}")),
    }
}
