//! Total-degree homotopy continuation on a random affine patch of projective
//! space, with the gamma trick.
//!
//! For a square system `F` of `n ≤ 3` equations in `n` unknowns the tracked
//! homotopy is
//!
//! ```text
//! H(X, t) = (1 − t) γ G(X) + t F(X),     a·X = 1,
//! ```
//!
//! where `X = (x0, x1, …, xn)` homogenizes the unknowns, `G_i = x_i^{d_i} − x0^{d_i}`,
//! and `a` is a random complex patch. Paths heading to solutions at infinity
//! stay bounded on the patch and end with `x0 → 0`.

use num_complex::Complex64;

use crate::poly::Polynomial;

type C = Complex64;
const MAXN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerSettings {
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_steps: usize,
    /// Newton iterations allowed per corrector call.
    pub corrector_iters: usize,
    /// Relative size of the last Newton update for a corrector to succeed.
    pub corrector_tol: f64,
    /// Paths that stall beyond this `t` are classified from their last point.
    pub endgame_start: f64,
}

impl Default for TrackerSettings {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            max_step: 0.2,
            min_step: 1e-13,
            max_steps: 20_000,
            corrector_iters: 3,
            corrector_tol: 1e-9,
            endgame_start: 1.0 - 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStatus {
    /// Reached `t = 1`.
    Reached,
    /// Stalled inside the endgame region (typically a singular endpoint).
    Stalled,
    /// Gave up before the endgame region.
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEnd {
    pub status: PathStatus,
    pub t: f64,
    /// Homogeneous endpoint `(x0, x1, …, xn)`; only the first `n + 1` entries are used.
    pub point: [C; MAXN],
    pub steps: usize,
}

impl PathEnd {
    /// `|x0| / max |x_k|`: zero for a solution at infinity.
    pub fn finiteness(&self, n: usize) -> f64 {
        let m = self.point[..=n].iter().map(|z| z.norm()).fold(0.0, f64::max);
        self.point[0].norm() / m.max(f64::MIN_POSITIVE)
    }

    pub fn affine(&self, n: usize) -> Vec<C> {
        (1..=n).map(|k| self.point[k] / self.point[0]).collect()
    }
}

/// Monomials of one polynomial, homogenized to its total degree.
#[derive(Debug, Clone)]
struct HomPoly {
    terms: Vec<(f64, [u8; MAXN])>,
}

#[derive(Debug, Clone)]
pub struct Homotopy {
    n: usize,
    target: Vec<HomPoly>,
    degrees: Vec<u32>,
    gamma: C,
    patch: [C; MAXN],
}

impl Homotopy {
    pub fn new(polys: &[&Polynomial], n: usize, gamma: C, patch: [C; MAXN]) -> Self {
        assert_eq!(polys.len(), n, "homotopy needs a square system");
        let degrees: Vec<u32> = polys.iter().map(|p| p.degree().max(1)).collect();
        let target = polys
            .iter()
            .zip(&degrees)
            .map(|(p, &d)| HomPoly {
                terms: p
                    .terms()
                    .map(|(m, &c)| {
                        let s: u32 = m[..n].iter().map(|&e| e as u32).sum();
                        let mut e = [0u8; MAXN];
                        e[0] = (d - s) as u8;
                        e[1..=n].copy_from_slice(&m[..n]);
                        (c, e)
                    })
                    .collect(),
            })
            .collect();
        Self {
            n,
            target,
            degrees,
            gamma,
            patch,
        }
    }

    pub fn path_count(&self) -> usize {
        self.degrees.iter().product::<u32>() as usize
    }

    /// Start points: all combinations of roots of unity, moved onto the patch.
    pub fn start_points(&self) -> Vec<[C; MAXN]> {
        let mut out = Vec::with_capacity(self.path_count());
        let mut idx = vec![0u32; self.n];
        loop {
            let mut x = [C::new(0.0, 0.0); MAXN];
            x[0] = C::new(1.0, 0.0);
            for k in 0..self.n {
                let d = self.degrees[k] as f64;
                x[k + 1] = C::from_polar(1.0, std::f64::consts::TAU * idx[k] as f64 / d);
            }
            let s = self.patch_value(&x);
            for v in x.iter_mut().take(self.n + 1) {
                *v /= s;
            }
            out.push(x);
            // odometer
            let mut k = 0;
            loop {
                if k == self.n {
                    return out;
                }
                idx[k] += 1;
                if idx[k] < self.degrees[k] {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    fn patch_value(&self, x: &[C; MAXN]) -> C {
        (0..=self.n).map(|k| self.patch[k] * x[k]).sum()
    }

    /// Values and Jacobians of target and start systems at `x`.
    #[allow(clippy::type_complexity)]
    fn eval_parts(&self, x: &[C; MAXN]) -> ([C; MAXN], [[C; MAXN]; MAXN], [C; MAXN], [[C; MAXN]; MAXN]) {
        let n = self.n;
        let zero = C::new(0.0, 0.0);
        let mut pw = [[C::new(1.0, 0.0); 6]; MAXN];
        for k in 0..=n {
            for e in 1..6 {
                pw[k][e] = pw[k][e - 1] * x[k];
            }
        }
        let mut f = [zero; MAXN];
        let mut fj = [[zero; MAXN]; MAXN];
        // ∂(c·xᵉ)/∂x_k = e_k·(c·xᵉ)/x_k unless some coordinate is exactly zero
        let nonzero = x[..=n].iter().all(|z| z.re != 0.0 || z.im != 0.0);
        let mut inv = [zero; MAXN];
        if nonzero {
            for k in 0..=n {
                inv[k] = x[k].inv();
            }
        }
        for (i, hp) in self.target.iter().enumerate() {
            for (c, e) in &hp.terms {
                let mut v = C::new(*c, 0.0);
                for k in 0..=n {
                    v *= pw[k][e[k] as usize];
                }
                f[i] += v;
                for k in 0..=n {
                    if e[k] == 0 {
                        continue;
                    }
                    if nonzero {
                        fj[i][k] += v * inv[k] * e[k] as f64;
                        continue;
                    }
                    let mut g = C::new(*c * e[k] as f64, 0.0);
                    for j in 0..=n {
                        let ej = if j == k { e[j] - 1 } else { e[j] };
                        g *= pw[j][ej as usize];
                    }
                    fj[i][k] += g;
                }
            }
        }
        let mut g = [zero; MAXN];
        let mut gj = [[zero; MAXN]; MAXN];
        for i in 0..n {
            let d = self.degrees[i] as usize;
            g[i] = pw[i + 1][d] - pw[0][d];
            gj[i][i + 1] = pw[i + 1][d - 1] * d as f64;
            gj[i][0] = -pw[0][d - 1] * d as f64;
        }
        (f, fj, g, gj)
    }

    /// `H`, `∂H/∂X`, `∂H/∂t` at `(x, t)`, including the patch row.
    #[allow(clippy::type_complexity)]
    fn eval(&self, x: &[C; MAXN], t: f64) -> ([C; MAXN], [[C; MAXN]; MAXN], [C; MAXN]) {
        let n = self.n;
        let (f, fj, g, gj) = self.eval_parts(x);
        let zero = C::new(0.0, 0.0);
        let mut h = [zero; MAXN];
        let mut hx = [[zero; MAXN]; MAXN];
        let mut ht = [zero; MAXN];
        let a = self.gamma * (1.0 - t);
        for i in 0..n {
            h[i] = a * g[i] + f[i] * t;
            ht[i] = f[i] - self.gamma * g[i];
            for k in 0..=n {
                hx[i][k] = a * gj[i][k] + fj[i][k] * t;
            }
        }
        h[n] = self.patch_value(x) - 1.0;
        hx[n][..=n].copy_from_slice(&self.patch[..=n]);
        (h, hx, ht)
    }

    fn tangent(&self, x: &[C; MAXN], t: f64) -> Option<[C; MAXN]> {
        let (_, hx, ht) = self.eval(x, t);
        let mut rhs = [C::new(0.0, 0.0); MAXN];
        for i in 0..=self.n {
            rhs[i] = -ht[i];
        }
        solve_linear(hx, rhs, self.n + 1)
    }

    fn predict(&self, x: &[C; MAXN], t: f64, h: f64) -> Option<[C; MAXN]> {
        let n = self.n;
        let axpy = |a: &[C; MAXN], s: f64, b: &[C; MAXN]| {
            let mut o = *a;
            for k in 0..=n {
                o[k] += b[k] * s;
            }
            o
        };
        let k1 = self.tangent(x, t)?;
        let k2 = self.tangent(&axpy(x, h / 2.0, &k1), t + h / 2.0)?;
        let k3 = self.tangent(&axpy(x, h / 2.0, &k2), t + h / 2.0)?;
        let k4 = self.tangent(&axpy(x, h, &k3), t + h)?;
        let mut o = *x;
        for k in 0..=n {
            o[k] += (k1[k] + k2[k] * 2.0 + k3[k] * 2.0 + k4[k]) * (h / 6.0);
        }
        Some(o)
    }

    fn correct(&self, x: &[C; MAXN], t: f64, s: &TrackerSettings) -> Option<[C; MAXN]> {
        let n = self.n;
        let mut x = *x;
        let mut prev = f64::INFINITY;
        for _ in 0..s.corrector_iters {
            let (h, hx, _) = self.eval(&x, t);
            let mut rhs = [C::new(0.0, 0.0); MAXN];
            for i in 0..=n {
                rhs[i] = -h[i];
            }
            let dx = solve_linear(hx, rhs, n + 1)?;
            let step = norm(&dx, n);
            for k in 0..=n {
                x[k] += dx[k];
            }
            let scale = 1.0 + norm(&x, n);
            if step <= s.corrector_tol * scale {
                return Some(x);
            }
            // the corrector must contract
            if step > 0.5 * prev {
                return None;
            }
            prev = step;
        }
        None
    }

    pub fn track(&self, start: &[C; MAXN], s: &TrackerSettings) -> PathEnd {
        let mut x = *start;
        let mut t = 0.0;
        let mut h = s.initial_step;
        let mut streak = 0;
        let mut steps = 0;
        while t < 1.0 {
            if steps >= s.max_steps {
                break;
            }
            steps += 1;
            let step = h.min(1.0 - t);
            let t1 = if step >= 1.0 - t { 1.0 } else { t + step };
            let next = self
                .predict(&x, t, t1 - t)
                .and_then(|p| self.correct(&p, t1, s));
            match next {
                Some(nx) => {
                    x = nx;
                    t = t1;
                    streak += 1;
                    if streak >= 3 {
                        h = (h * 2.0).min(s.max_step);
                        streak = 0;
                    }
                }
                None => {
                    streak = 0;
                    h *= 0.5;
                    if h < s.min_step {
                        break;
                    }
                }
            }
        }
        let status = if t >= 1.0 {
            PathStatus::Reached
        } else if t >= s.endgame_start {
            PathStatus::Stalled
        } else {
            PathStatus::Failed
        };
        PathEnd {
            status,
            t,
            point: x,
            steps,
        }
    }
}

fn norm(x: &[C; MAXN], n: usize) -> f64 {
    x[..=n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Gaussian elimination with partial pivoting on the leading `n × n` block.
pub(crate) fn solve_linear(mut a: [[C; MAXN]; MAXN], mut b: [C; MAXN], n: usize) -> Option<[C; MAXN]> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() == 0.0 || !a[piv][col].norm().is_finite() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let inv = a[col][col].inv();
        for row in col + 1..n {
            let f = a[row][col] * inv;
            if f.norm() == 0.0 {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = [C::new(0.0, 0.0); MAXN];
    for row in (0..n).rev() {
        let mut s = b[row];
        for k in row + 1..n {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    if x[..n].iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(x)
    } else {
        None
    }
}
