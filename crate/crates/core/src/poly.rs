//! Sparse multivariate polynomials in at most three variables.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Exponents of `(v0, v1, v2)`; unused variables carry exponent zero.
pub type Monomial = [u8; 3];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([([0, 0, 0], c)])
    }

    /// `c0 + c[0] v0 + c[1] v1 + c[2] v2`
    pub fn linear(c0: f64, c: [f64; 3]) -> Self {
        Self::from_terms([
            ([0, 0, 0], c0),
            ([1, 0, 0], c[0]),
            ([0, 1, 0], c[1]),
            ([0, 0, 1], c[2]),
        ])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry(m).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &f64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|m| m.iter().map(|&e| e as u32).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| (*m, c * s)))
    }

    /// Substitutes `v_k ← s_k v_k`.
    pub fn rescale_vars(&self, s: [f64; 3]) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| {
            let f: f64 = (0..3).map(|k| s[k].powi(m[k] as i32)).product();
            (*m, c * f)
        }))
    }

    /// Substitutes `v_var ← value`.
    pub fn substitute(&self, var: usize, value: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, c)| {
            let mut m2 = *m;
            m2[var] = 0;
            (m2, c * value.powi(m[var] as i32))
        }))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let pw = powers(x);
        self.terms
            .iter()
            .map(|(m, c)| c * pw[0][m[0] as usize] * pw[1][m[1] as usize] * pw[2][m[2] as usize])
            .sum()
    }

    pub fn eval_complex(&self, x: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut t = Complex64::new(*c, 0.0);
                for (k, &e) in m.iter().enumerate() {
                    if e > 0 {
                        t *= x[k].powu(e as u32);
                    }
                }
                t
            })
            .sum()
    }

    pub fn derivative(&self, var: usize) -> Self {
        Self::from_terms(self.terms.iter().filter(|(m, _)| m[var] > 0).map(|(m, c)| {
            let mut m2 = *m;
            m2[var] -= 1;
            (m2, c * m[var] as f64)
        }))
    }

    pub fn gradient(&self, x: &[f64]) -> [f64; 3] {
        let mut g = [0.0; 3];
        let pw = powers(x);
        for (m, c) in &self.terms {
            for k in 0..3 {
                if m[k] == 0 {
                    continue;
                }
                let mut t = c * m[k] as f64;
                for j in 0..3 {
                    let e = if j == k { m[j] - 1 } else { m[j] };
                    t *= pw[j][e as usize];
                }
                g[k] += t;
            }
        }
        g
    }

    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Self::constant(1.0), |acc, _| &acc * self)
    }
}

fn powers(x: &[f64]) -> [[f64; 8]; 3] {
    let mut pw = [[1.0; 8]; 3];
    for k in 0..3 {
        let v = x.get(k).copied().unwrap_or(0.0);
        for e in 1..8 {
            pw[k][e] = pw[k][e - 1] * v;
        }
    }
    pw
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, *c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(*m, -c);
        }
        out
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                let m = [ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2]];
                out.add_term(m, ca * cb);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scaled(-1.0)
    }
}
