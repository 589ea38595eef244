//! Polynomial equal-scale constraint systems built from minimal samples.
//!
//! Every system is expressed in conditioned variables `(L1, L2, Λ)` with
//! `l1 = c·L1`, `l2 = c·L2`, `λ = q·Λ`, where `c` and `q` come from
//! [`VariableScaling`]. Each polynomial is divided by its largest coefficient
//! magnitude so that residuals are comparable across samples.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{frame_minors, orient, AffineFrame, ImagePoint, RectifyModel, ScaleObservation};
use crate::poly::Polynomial;

/// Tolerance on `1/√(l1² + l2²)` below which a vanishing line is treated as
/// passing through the distortion center.
pub const EPS_VL: f64 = 1e-6;
/// Radius tolerance for the concentric-points degeneracy.
pub const EPS_CIRC: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConstraintError {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error("sample shape does not match configuration {0}: {1}")]
    ConfigMismatch(SampleConfig, String),
}

/// Minimal configurations: three pairs, a triple plus a pair, a quadruple,
/// and two pairs for the known-distortion variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SampleConfig {
    C222,
    C32,
    C4,
    C22Fixed,
}

impl SampleConfig {
    pub fn group_sizes(self) -> &'static [usize] {
        match self {
            SampleConfig::C222 => &[2, 2, 2],
            SampleConfig::C32 => &[3, 2],
            SampleConfig::C4 => &[4],
            SampleConfig::C22Fixed => &[2, 2],
        }
    }

    pub fn equation_count(self) -> usize {
        self.group_sizes().iter().map(|n| n * (n - 1) / 2).sum()
    }
}

impl fmt::Display for SampleConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleConfig::C222 => "222",
            SampleConfig::C32 => "32",
            SampleConfig::C4 => "4",
            SampleConfig::C22Fixed => "22",
        })
    }
}

/// Groups of regions asserted to have equal rectified scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalSample<T> {
    pub groups: Vec<Vec<T>>,
    pub config: SampleConfig,
}

impl<T> MinimalSample<T> {
    pub fn new(config: SampleConfig, groups: Vec<Vec<T>>) -> Result<Self, ConstraintError> {
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        if sizes != config.group_sizes() {
            return Err(ConstraintError::ConfigMismatch(
                config,
                format!("group sizes {sizes:?}"),
            ));
        }
        Ok(Self { groups, config })
    }
}

/// Multipliers applied to image coordinates and squared radii before the
/// coefficients are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariableScaling {
    pub coord_scale: f64,
    pub radius_scale: f64,
}

impl VariableScaling {
    pub const UNIT: Self = Self {
        coord_scale: 1.0,
        radius_scale: 1.0,
    };

    /// Inverse average magnitudes of the coordinates and squared radii.
    pub fn from_points(points: &[ImagePoint]) -> Self {
        let n = points.len().max(1) as f64;
        let mean_abs = points.iter().map(|p| p.x.abs() + p.y.abs()).sum::<f64>() / (2.0 * n);
        let mean_r2 = points.iter().map(ImagePoint::radius_sq).sum::<f64>() / n;
        let pick = |m: f64| if m > 0.0 && m.is_finite() { 1.0 / m } else { 1.0 };
        Self {
            coord_scale: pick(mean_abs),
            radius_scale: pick(mean_r2),
        }
    }

    /// Unscaled `(l1, l2, λ)` to conditioned `(L1, L2, Λ)`.
    pub fn to_scaled(&self, p: [f64; 3]) -> [f64; 3] {
        [
            p[0] / self.coord_scale,
            p[1] / self.coord_scale,
            p[2] / self.radius_scale,
        ]
    }

    pub fn to_unscaled(&self, p: [f64; 3]) -> [f64; 3] {
        [
            p[0] * self.coord_scale,
            p[1] * self.coord_scale,
            p[2] * self.radius_scale,
        ]
    }

    fn point(&self, p: &ImagePoint) -> [f64; 3] {
        [
            p.x * self.coord_scale,
            p.y * self.coord_scale,
            p.radius_sq() * self.radius_scale,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalingPolicy {
    #[default]
    Auto,
    Unit,
}

/// Which equal-scale relation an equation encodes: `s[group][i] = s[group][j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquationTag {
    pub group: usize,
    pub i: usize,
    pub j: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SystemKind {
    Des,
    Cs,
    DesFixedLambda(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolySystem {
    pub kind: SystemKind,
    pub config: SampleConfig,
    /// Polynomials in the conditioned variables, one per tag.
    pub polys: Vec<Polynomial>,
    pub tags: Vec<EquationTag>,
    /// 3 for `(L1, L2, Λ)`, 2 for `(L1, L2)`.
    pub nvars: usize,
    pub scaling: VariableScaling,
    /// Factors cleared from the rational equations. A root where one of them
    /// vanishes solves the polynomial system but not the rational one.
    pub denominators: Vec<Polynomial>,
}

impl PolySystem {
    /// Maps an unscaled root (`[l1, l2, λ]` or `[l1, l2]`) to conditioned variables.
    pub fn to_scaled(&self, root: &[f64]) -> Vec<f64> {
        let mut full = [0.0; 3];
        full[..root.len().min(3)].copy_from_slice(&root[..root.len().min(3)]);
        let s = self.scaling.to_scaled(full);
        s[..self.nvars].to_vec()
    }

    pub fn to_unscaled(&self, scaled: &[f64]) -> Vec<f64> {
        let mut full = [0.0; 3];
        full[..scaled.len()].copy_from_slice(scaled);
        let u = self.scaling.to_unscaled(full);
        u[..self.nvars].to_vec()
    }

    pub fn eval_scaled(&self, x: &[f64]) -> Vec<f64> {
        self.polys.iter().map(|p| p.eval(x)).collect()
    }

    /// Largest absolute polynomial value at an unscaled root.
    pub fn residual(&self, root: &[f64]) -> f64 {
        let x = self.to_scaled(root);
        self.eval_scaled(&x).iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Indices of the chained square subsystem: `s_i = s_{i+1}` in each group.
    pub fn chain_subsystem(&self) -> Vec<usize> {
        self.select(|t| t.j == t.i + 1)
    }

    /// Indices of the subsystem pairing each region with the first of its group.
    pub fn anchored_subsystem(&self) -> Vec<usize> {
        self.select(|t| t.i == 0)
    }

    fn select(&self, keep: impl Fn(&EquationTag) -> bool) -> Vec<usize> {
        self.tags
            .iter()
            .enumerate()
            .filter(|(_, t)| keep(t))
            .map(|(k, _)| k)
            .collect()
    }

    /// Smallest `|denominator|` at a scaled point, relative to the size of its terms.
    pub fn min_relative_denominator(&self, x: &[f64]) -> f64 {
        self.denominators
            .iter()
            .map(|d| {
                let mag: f64 = d
                    .terms()
                    .map(|(m, c)| {
                        let mut t = c.abs();
                        for (k, &e) in m.iter().enumerate() {
                            t *= x.get(k).copied().unwrap_or(0.0).abs().powi(e as i32);
                        }
                        t
                    })
                    .sum();
                d.eval(x).abs() / mag.max(f64::MIN_POSITIVE)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-frame coefficients of the DES equations in conditioned variables.
#[derive(Debug, Clone, PartialEq)]
pub struct DesCoefficients {
    /// `(3, k)` minors of the scaled point parameterization.
    pub minors: [f64; 3],
    /// `α_k(L1, L2, Λ)`, linear in the unknowns.
    pub alphas: [Polynomial; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DegeneracyFlag {
    VlThroughOrigin,
    ConcentricPoints,
    Collinear,
}

/// Points whose positions enter a constraint system.
pub trait SamplePoints {
    fn sample_points(&self) -> Vec<ImagePoint>;
    fn is_collinear(&self) -> bool {
        false
    }
}

impl SamplePoints for AffineFrame {
    fn sample_points(&self) -> Vec<ImagePoint> {
        self.points().to_vec()
    }
    fn is_collinear(&self) -> bool {
        AffineFrame::is_collinear(self)
    }
}

impl SamplePoints for ScaleObservation {
    fn sample_points(&self) -> Vec<ImagePoint> {
        vec![self.center]
    }
}

pub fn degeneracy_flags<T: SamplePoints>(
    sample: &MinimalSample<T>,
    model: Option<&RectifyModel>,
) -> BTreeSet<DegeneracyFlag> {
    let mut flags = BTreeSet::new();
    if let Some(m) = model {
        if m.l.distance_to_origin() < EPS_VL {
            flags.insert(DegeneracyFlag::VlThroughOrigin);
        }
    }
    if sample.groups.iter().flatten().any(SamplePoints::is_collinear) {
        flags.insert(DegeneracyFlag::Collinear);
    }
    if is_concentric(sample) {
        flags.insert(DegeneracyFlag::ConcentricPoints);
    }
    flags
}

fn is_concentric<T: SamplePoints>(sample: &MinimalSample<T>) -> bool {
    let radii: Vec<Vec<Vec<f64>>> = sample
        .groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|r| r.sample_points().iter().map(|p| p.radius_sq().sqrt()).collect())
                .collect()
        })
        .collect();
    let spread = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r), hi.max(r))
        });
        hi - lo
    };
    let all = spread(&mut radii.iter().flatten().flatten().copied());
    if all < EPS_CIRC {
        return true;
    }
    // corresponding points of every group on common circles
    radii.iter().all(|group| {
        let n = group.first().map_or(0, Vec::len);
        (0..n).all(|k| spread(&mut group.iter().map(|r| r[k])) < EPS_CIRC)
    })
}

fn check_flags<T: SamplePoints>(
    sample: &MinimalSample<T>,
    check_concentric: bool,
) -> Result<(), ConstraintError> {
    let mut flags = degeneracy_flags(sample, None);
    if !check_concentric {
        flags.remove(&DegeneracyFlag::ConcentricPoints);
    }
    if flags.is_empty() {
        Ok(())
    } else {
        Err(ConstraintError::DegenerateSample(format!("{flags:?}")))
    }
}

fn pair_tags(sizes: &[usize]) -> Vec<EquationTag> {
    let mut tags = Vec::new();
    for (group, &n) in sizes.iter().enumerate() {
        for i in 0..n {
            for j in i + 1..n {
                tags.push(EquationTag { group, i, j });
            }
        }
    }
    tags
}

fn normalize(p: Polynomial) -> Result<Polynomial, ConstraintError> {
    let m = p.max_abs_coeff();
    if m == 0.0 || !m.is_finite() {
        return Err(ConstraintError::DegenerateSample(
            "equation vanishes identically".into(),
        ));
    }
    Ok(p.scaled(1.0 / m))
}

fn check_config<T>(sample: &MinimalSample<T>, allowed: &[SampleConfig]) -> Result<(), ConstraintError> {
    if !allowed.contains(&sample.config) {
        return Err(ConstraintError::ConfigMismatch(
            sample.config,
            "configuration not supported by this builder".into(),
        ));
    }
    let sizes: Vec<usize> = sample.groups.iter().map(Vec::len).collect();
    if sizes != sample.config.group_sizes() {
        return Err(ConstraintError::ConfigMismatch(
            sample.config,
            format!("group sizes {sizes:?}"),
        ));
    }
    Ok(())
}

fn oriented(sample: &MinimalSample<AffineFrame>) -> Result<Vec<Vec<AffineFrame>>, ConstraintError> {
    sample
        .groups
        .iter()
        .map(|g| {
            g.iter()
                .map(|f| orient(f).map_err(|e| ConstraintError::DegenerateSample(e.to_string())))
                .collect()
        })
        .collect()
}

fn scaling_for(points: &[ImagePoint], policy: ScalingPolicy) -> VariableScaling {
    match policy {
        ScalingPolicy::Auto => VariableScaling::from_points(points),
        ScalingPolicy::Unit => VariableScaling::UNIT,
    }
}

/// DES coefficients for one (already oriented) frame.
pub fn des_coefficients(f: &AffineFrame, scaling: &VariableScaling) -> DesCoefficients {
    let scaled = f.map(|p| ImagePoint::new(p.x * scaling.coord_scale, p.y * scaling.coord_scale));
    let alphas = f.points().map(|p| {
        let [x, y, rho] = scaling.point(&p);
        Polynomial::linear(1.0, [x, y, rho])
    });
    DesCoefficients {
        minors: frame_minors(&scaled),
        alphas,
    }
}

/// `det [x; y; α]` with the `L1`, `L2` terms cancelled exactly: only the
/// constant and `Λ` terms survive.
fn des_numerator(f: &AffineFrame, coeffs: &DesCoefficients, scaling: &VariableScaling, lambda: Option<f64>) -> Polynomial {
    let [m1, m2, m3] = coeffs.minors;
    let pts = f.points();
    let expand = |v: [f64; 3]| m1 * v[0] - m2 * v[1] + m3 * v[2];
    match lambda {
        None => {
            let rho = pts.map(|p| p.radius_sq() * scaling.radius_scale);
            Polynomial::linear(expand([1.0; 3]), [0.0, 0.0, expand(rho)])
        }
        Some(lam) => Polynomial::constant(expand(pts.map(|p| 1.0 + lam * p.radius_sq()))),
    }
}

fn des_system(
    groups: &[Vec<AffineFrame>],
    config: SampleConfig,
    scaling: VariableScaling,
    lambda: Option<f64>,
) -> Result<PolySystem, ConstraintError> {
    let mut products = Vec::new();
    let mut numerators = Vec::new();
    let mut denominators = Vec::new();
    for g in groups {
        let mut gp = Vec::new();
        let mut gn = Vec::new();
        for f in g {
            let mut c = des_coefficients(f, &scaling);
            if let Some(lam) = lambda {
                for (a, p) in c.alphas.iter_mut().zip(f.points()) {
                    *a = Polynomial::linear(
                        1.0 + lam * p.radius_sq(),
                        [p.x * scaling.coord_scale, p.y * scaling.coord_scale, 0.0],
                    );
                }
            }
            gn.push(des_numerator(f, &c, &scaling, lambda));
            gp.push(&(&c.alphas[0] * &c.alphas[1]) * &c.alphas[2]);
            denominators.extend(c.alphas.iter().cloned());
        }
        products.push(gp);
        numerators.push(gn);
    }
    let tags = pair_tags(config.group_sizes());
    let polys = tags
        .iter()
        .map(|t| {
            let (g, i, j) = (t.group, t.i, t.j);
            let lhs = &products[g][j] * &numerators[g][i];
            let rhs = &products[g][i] * &numerators[g][j];
            normalize(&lhs - &rhs)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PolySystem {
        kind: lambda.map_or(SystemKind::Des, SystemKind::DesFixedLambda),
        config,
        polys,
        tags,
        nvars: if lambda.is_some() { 2 } else { 3 },
        scaling,
        denominators,
    })
}

/// Cross-multiplied rectified-scale equalities for affine frames.
pub fn build_des(sample: &MinimalSample<AffineFrame>) -> Result<PolySystem, ConstraintError> {
    build_des_with(sample, ScalingPolicy::Auto)
}

pub fn build_des_with(
    sample: &MinimalSample<AffineFrame>,
    policy: ScalingPolicy,
) -> Result<PolySystem, ConstraintError> {
    check_config(sample, &[SampleConfig::C222, SampleConfig::C32, SampleConfig::C4])?;
    check_flags(sample, true)?;
    let groups = oriented(sample)?;
    let pts: Vec<ImagePoint> = groups.iter().flatten().flat_map(|f| f.points()).collect();
    des_system(&groups, sample.config, scaling_for(&pts, policy), None)
}

/// Known-distortion variant: two cubics in `(l1, l2)`.
pub fn build_des_fixed_lambda(
    sample: &MinimalSample<AffineFrame>,
    lambda: f64,
) -> Result<PolySystem, ConstraintError> {
    check_config(sample, &[SampleConfig::C22Fixed])?;
    check_flags(sample, false)?;
    let groups = oriented(sample)?;
    let pts: Vec<ImagePoint> = groups.iter().flatten().flat_map(|f| f.points()).collect();
    des_system(&groups, sample.config, VariableScaling::from_points(&pts), Some(lambda))
}

/// Change-of-scale equalities `s_i (1 − λr_i²) D_j³ = s_j (1 − λr_j²) D_i³`
/// with `D = λr² + l1 x + l2 y + 1`.
pub fn build_cs(sample: &MinimalSample<ScaleObservation>) -> Result<PolySystem, ConstraintError> {
    build_cs_with(sample, ScalingPolicy::Auto)
}

pub fn build_cs_with(
    sample: &MinimalSample<ScaleObservation>,
    policy: ScalingPolicy,
) -> Result<PolySystem, ConstraintError> {
    check_config(sample, &[SampleConfig::C222, SampleConfig::C32, SampleConfig::C4])?;
    if let Some(o) = sample.groups.iter().flatten().find(|o| !(o.scale > 0.0)) {
        return Err(ConstraintError::DegenerateSample(format!(
            "non-positive scale {}",
            o.scale
        )));
    }
    check_flags(sample, true)?;
    let pts: Vec<ImagePoint> = sample.groups.iter().flatten().map(|o| o.center).collect();
    let scaling = scaling_for(&pts, policy);
    let n_obs = pts.len() as f64;
    let mean_scale = sample.groups.iter().flatten().map(|o| o.scale).sum::<f64>() / n_obs;

    let mut denoms = Vec::new();
    let mut numers = Vec::new();
    for g in &sample.groups {
        let mut gd = Vec::new();
        let mut gn = Vec::new();
        for o in g {
            let [x, y, rho] = scaling.point(&o.center);
            let d = Polynomial::linear(1.0, [x, y, rho]);
            let s = o.scale / mean_scale;
            gn.push(Polynomial::linear(s, [0.0, 0.0, -s * rho]));
            gd.push(d);
        }
        denoms.push(gd);
        numers.push(gn);
    }
    let cubes: Vec<Vec<Polynomial>> = denoms.iter().map(|g| g.iter().map(|d| d.pow(3)).collect()).collect();
    let tags = pair_tags(sample.config.group_sizes());
    let polys = tags
        .iter()
        .map(|t| {
            let (g, i, j) = (t.group, t.i, t.j);
            let lhs = &numers[g][i] * &cubes[g][j];
            let rhs = &numers[g][j] * &cubes[g][i];
            normalize(&lhs - &rhs)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PolySystem {
        kind: SystemKind::Cs,
        config: sample.config,
        polys,
        tags,
        nvars: 3,
        scaling,
        denominators: denoms.into_iter().flatten().collect(),
    })
}
