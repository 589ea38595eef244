//! Real-root finding for the small constraint systems.
//!
//! [`solve`] tracks every path of a total-degree homotopy for a square
//! subsystem, polishes the finite endpoints, keeps the real ones, and then
//! filters them against the full (possibly overdetermined) system.
//! [`oracle_solve`] is an independent brute-force grid search used to check
//! completeness.

mod homotopy;
mod oracle;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{PolySystem, SystemKind};
use crate::poly::Polynomial;

pub use homotopy::{PathEnd, PathStatus, TrackerSettings};
pub use oracle::{oracle_solve, SearchBox};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("system has no equations")]
    EmptySystem,
    #[error("{failed} of {tracked} homotopy paths failed")]
    TrackingFailure { failed: usize, tracked: usize },
}

/// Which square subsystem of an overdetermined system is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Subsystem {
    /// `s_i = s_{i+1}` within each group.
    #[default]
    Chain,
    /// `s_1 = s_k` within each group; not zero-dimensional for a quadruple.
    Anchored,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Full-system residual a root must stay below.
    pub eps_res: f64,
    /// Largest imaginary part (relative to `1 + |x|`) accepted as real.
    pub imag_tol: f64,
    /// Smallest relative value of a cleared denominator at an accepted root.
    pub eps_denominator: f64,
    pub tracker: TrackerSettings,
    pub newton_iters: usize,
    pub seed: u64,
    pub subsystem: Subsystem,
    pub parallel_paths: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda_min: -8.0,
            lambda_max: 0.5,
            eps_res: 1e-6,
            imag_tol: 1e-8,
            eps_denominator: 1e-7,
            tracker: TrackerSettings::default(),
            newton_iters: 12,
            seed: 0x5eed,
            subsystem: Subsystem::Chain,
            parallel_paths: false,
        }
    }
}

impl SolverConfig {
    /// Residual tolerance used inside robust estimation on noisy data.
    pub fn noisy() -> Self {
        Self {
            eps_res: 1e-3,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Root {
    /// Unscaled `[l1, l2, λ]`, or `[l1, l2]` for the known-distortion system.
    pub values: Vec<f64>,
    /// Largest absolute value over all equations of the full system.
    pub residual: f64,
    pub feasible: bool,
}

impl Root {
    /// `(l1, l2, λ)`, filling in a known `λ` for two-variable systems.
    pub fn params(&self, fixed_lambda: Option<f64>) -> [f64; 3] {
        [
            self.values[0],
            self.values[1],
            self.values.get(2).copied().or(fixed_lambda).unwrap_or(0.0),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    /// Violates equations outside the tracked subsystem.
    Residual,
    /// A cleared denominator vanishes: not a solution of the rational equations.
    Spurious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedRoot {
    pub values: Vec<f64>,
    pub subsystem_residual: f64,
    pub residual: f64,
    pub reason: Rejection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PathStats {
    pub tracked: usize,
    /// Paths ending at a finite, nonsingular root after polishing.
    pub converged: usize,
    pub diverged: usize,
    pub failed: usize,
    /// Distinct real roots of the square subsystem.
    pub real: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSet {
    pub roots: Vec<Root>,
    pub rejected: Vec<RejectedRoot>,
    pub stats: PathStats,
}

impl SolutionSet {
    pub fn feasible(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| r.feasible)
    }

    pub fn feasible_count(&self) -> usize {
        self.feasible().count()
    }
}

/// Largest absolute polynomial value of the full system at an unscaled root.
pub fn residual(system: &PolySystem, root: &[f64]) -> f64 {
    system.residual(root)
}

fn random_unit(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
}

pub fn solve(system: &PolySystem, cfg: &SolverConfig) -> Result<SolutionSet, SolveError> {
    if system.polys.is_empty() {
        return Err(SolveError::EmptySystem);
    }
    let n = system.nvars;
    let square: Vec<usize> = if system.polys.len() == n {
        (0..n).collect()
    } else {
        match cfg.subsystem {
            Subsystem::Chain => system.chain_subsystem(),
            Subsystem::Anchored => system.anchored_subsystem(),
        }
    };
    if square.len() != n {
        return Err(SolveError::EmptySystem);
    }
    let sq_polys: Vec<&Polynomial> = square.iter().map(|&k| &system.polys[k]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gamma = random_unit(&mut rng);
    let mut patch = [Complex64::new(0.0, 0.0); 4];
    for p in patch.iter_mut() {
        *p = random_unit(&mut rng);
    }
    let hom = homotopy::Homotopy::new(&sq_polys, n, gamma, patch);
    let starts = hom.start_points();
    let ends: Vec<PathEnd> = if cfg.parallel_paths {
        starts.par_iter().map(|s| hom.track(s, &cfg.tracker)).collect()
    } else {
        starts.iter().map(|s| hom.track(s, &cfg.tracker)).collect()
    };

    let mut stats = PathStats {
        tracked: ends.len(),
        ..PathStats::default()
    };
    let mut real_scaled: Vec<Vec<f64>> = Vec::new();
    for end in &ends {
        if end.status == PathStatus::Failed {
            stats.failed += 1;
            continue;
        }
        if end.finiteness(n) < 1e-10 {
            stats.diverged += 1;
            continue;
        }
        match polish_complex(&sq_polys, end.affine(n), cfg.newton_iters) {
            Some(x) => {
                stats.converged += 1;
                let real = x
                    .iter()
                    .all(|z| z.im.abs() <= cfg.imag_tol * (1.0 + z.norm()));
                if real {
                    let xr: Vec<f64> = x.iter().map(|z| z.re).collect();
                    real_scaled.push(polish_real(&sq_polys, xr, cfg.newton_iters));
                }
            }
            None => stats.diverged += 1,
        }
    }
    if stats.failed * 2 > stats.tracked {
        return Err(SolveError::TrackingFailure {
            failed: stats.failed,
            tracked: stats.tracked,
        });
    }

    real_scaled.sort_by(|a, b| lex_cmp(a, b));
    real_scaled.dedup_by(|a, b| close(a, b, 1e-8));
    stats.real = real_scaled.len();

    let fixed_lambda = match system.kind {
        SystemKind::DesFixedLambda(l) => Some(l),
        _ => None,
    };
    let mut roots = Vec::new();
    let mut rejected = Vec::new();
    for x in real_scaled {
        let values = system.to_unscaled(&x);
        let full = system
            .eval_scaled(&x)
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        let sub = square
            .iter()
            .map(|&k| system.polys[k].eval(&x).abs())
            .fold(0.0, f64::max);
        let reason = if system.min_relative_denominator(&x) <= cfg.eps_denominator {
            Some(Rejection::Spurious)
        } else if !(full < cfg.eps_res) {
            Some(Rejection::Residual)
        } else {
            None
        };
        match reason {
            Some(reason) => rejected.push(RejectedRoot {
                values,
                subsystem_residual: sub,
                residual: full,
                reason,
            }),
            None => {
                let lambda = values.get(2).copied().or(fixed_lambda).unwrap_or(0.0);
                let feasible = (cfg.lambda_min..=cfg.lambda_max).contains(&lambda);
                roots.push(Root {
                    values,
                    residual: full,
                    feasible,
                });
            }
        }
    }
    Ok(SolutionSet {
        roots,
        rejected,
        stats,
    })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())))
}

/// Newton on the affine square system. Rejects endpoints whose first update is
/// large, so a path is never credited with a root it did not reach.
fn polish_complex(polys: &[&Polynomial], mut x: Vec<Complex64>, iters: usize) -> Option<Vec<Complex64>> {
    let n = x.len();
    let derivs: Vec<Vec<Polynomial>> = polys
        .iter()
        .map(|p| (0..n).map(|k| p.derivative(k)).collect())
        .collect();
    for it in 0..iters {
        let mut a = [[Complex64::new(0.0, 0.0); 4]; 4];
        let mut b = [Complex64::new(0.0, 0.0); 4];
        for i in 0..n {
            b[i] = -polys[i].eval_complex(&x);
            for k in 0..n {
                a[i][k] = derivs[i][k].eval_complex(&x);
            }
        }
        let dx = homotopy::solve_linear(a, b, n)?;
        let step: f64 = dx[..n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let size: f64 = 1.0 + x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if it == 0 && step > 1e-3 * size {
            return None;
        }
        for k in 0..n {
            x[k] += dx[k];
        }
        if step <= 1e-13 * size {
            return Some(x);
        }
    }
    let fin = polys.iter().map(|p| p.eval_complex(&x).norm()).fold(0.0, f64::max);
    (fin < 1e-9).then_some(x)
}

fn polish_real(polys: &[&Polynomial], mut x: Vec<f64>, iters: usize) -> Vec<f64> {
    let n = x.len();
    let value = |x: &[f64]| polys.iter().map(|p| p.eval(x).abs()).fold(0.0, f64::max);
    for _ in 0..iters {
        let before = value(&x);
        let jac = nalgebra::DMatrix::from_fn(n, n, |i, k| polys[i].gradient(&x)[k]);
        let rhs = nalgebra::DVector::from_fn(n, |i, _| -polys[i].eval(&x));
        let Some(dx) = jac.lu().solve(&rhs) else {
            break;
        };
        let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + d).collect();
        if value(&cand) < before {
            x = cand;
        } else {
            break;
        }
    }
    x
}
