//! Grid search plus damped Gauss–Newton: slow, but shares nothing with the
//! homotopy path tracker, so it can certify that tracker on small instances.

use nalgebra::{DMatrix, DVector};

use super::{PathStats, Root, SolutionSet};
use crate::constraints::{PolySystem, SystemKind};

/// Axis-aligned box in unscaled variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(a, b)| !(a < b))
    }

    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= a - slack && *v <= b + slack)
    }
}

/// All roots of the full system in `bx` reachable from local minima of the
/// squared residual on a `grid_n`-per-axis grid. Roots are certified by a
/// residual below `1e-10`.
pub fn oracle_solve(system: &PolySystem, bx: &SearchBox, grid_n: usize) -> SolutionSet {
    let empty = SolutionSet {
        roots: vec![],
        rejected: vec![],
        stats: PathStats::default(),
    };
    let n = system.nvars;
    if bx.is_empty() || grid_n < 2 || bx.lo.len() != n || bx.hi.len() != n {
        return empty;
    }
    let lo = system.to_scaled(&bx.lo);
    let hi = system.to_scaled(&bx.hi);
    let coord = |k: usize, i: usize| lo[k] + (hi[k] - lo[k]) * i as f64 / (grid_n - 1) as f64;
    let sumsq = |x: &[f64]| system.eval_scaled(x).iter().map(|v| v * v).sum::<f64>();

    let dims: Vec<usize> = vec![grid_n; n];
    let total: usize = dims.iter().product();
    let index = |flat: usize| -> Vec<usize> {
        let mut rem = flat;
        (0..n)
            .map(|_| {
                let i = rem % grid_n;
                rem /= grid_n;
                i
            })
            .collect()
    };
    let values: Vec<f64> = (0..total)
        .map(|f| {
            let idx = index(f);
            let x: Vec<f64> = idx.iter().enumerate().map(|(k, &i)| coord(k, i)).collect();
            sumsq(&x)
        })
        .collect();
    let flat = |idx: &[usize]| idx.iter().rev().fold(0, |acc, &i| acc * grid_n + i);

    let mut found: Vec<Vec<f64>> = Vec::new();
    for f in 0..total {
        let idx = index(f);
        let v = values[f];
        let mut is_min = true;
        // all 3^n − 1 neighbours
        for code in 0..3usize.pow(n as u32) {
            let mut nb = idx.clone();
            let mut c = code;
            let mut moved = false;
            let mut inside = true;
            for slot in nb.iter_mut() {
                let d = (c % 3) as isize - 1;
                c /= 3;
                if d != 0 {
                    moved = true;
                }
                let j = *slot as isize + d;
                if j < 0 || j >= grid_n as isize {
                    inside = false;
                    break;
                }
                *slot = j as usize;
            }
            if moved && inside && values[flat(&nb)] < v {
                is_min = false;
                break;
            }
        }
        if !is_min {
            continue;
        }
        let x0: Vec<f64> = idx.iter().enumerate().map(|(k, &i)| coord(k, i)).collect();
        if let Some(x) = gauss_newton(system, x0) {
            let u = system.to_unscaled(&x);
            let step: Vec<f64> = (0..n).map(|k| (hi[k] - lo[k]).abs() / grid_n as f64).collect();
            let slack = 1e-9 * step.iter().fold(1.0_f64, |a, s| a.max(*s));
            if bx.contains(&u, slack) && !found.iter().any(|g| same(g, &x)) {
                found.push(x);
            }
        }
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let fixed_lambda = match system.kind {
        SystemKind::DesFixedLambda(l) => Some(l),
        _ => None,
    };
    let roots = found
        .into_iter()
        .map(|x| {
            let values = system.to_unscaled(&x);
            let residual = system.eval_scaled(&x).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            let lambda = values.get(2).copied().or(fixed_lambda).unwrap_or(0.0);
            Root {
                values,
                residual,
                feasible: (-8.0..=0.5).contains(&lambda),
            }
        })
        .collect();
    SolutionSet {
        roots,
        ..empty
    }
}

fn same(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-7 * (1.0 + x.abs()))
}

/// Levenberg–Marquardt on the full system in scaled variables.
fn gauss_newton(system: &PolySystem, mut x: Vec<f64>) -> Option<Vec<f64>> {
    let n = system.nvars;
    let m = system.polys.len();
    let mut mu = 1e-6;
    let cost = |x: &[f64]| system.eval_scaled(x).iter().map(|v| v * v).sum::<f64>();
    let mut c = cost(&x);
    for _ in 0..200 {
        let f = DVector::from_vec(system.eval_scaled(&x));
        let j = DMatrix::from_fn(m, n, |i, k| system.polys[i].gradient(&x)[k]);
        let jt = j.transpose();
        let g = &jt * &f;
        let mut improved = false;
        for _ in 0..30 {
            let mut a = &jt * &j;
            for k in 0..n {
                a[(k, k)] += mu * (1.0 + a[(k, k)]);
            }
            let Some(dx) = a.lu().solve(&(-&g)) else {
                mu *= 10.0;
                continue;
            };
            let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + d).collect();
            let cc = cost(&cand);
            if cc < c {
                let step = dx.norm();
                x = cand;
                c = cc;
                mu = (mu * 0.1).max(1e-15);
                improved = true;
                if step < 1e-15 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt()) {
                    return certify(system, x);
                }
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    certify(system, x)
}

fn certify(system: &PolySystem, x: Vec<f64>) -> Option<Vec<f64>> {
    let r = system.eval_scaled(&x).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    (r < 1e-10 && x.iter().all(|v| v.is_finite())).then_some(x)
}
