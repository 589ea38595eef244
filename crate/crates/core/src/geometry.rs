//! Division-model distortion, affine rectification and the scale quantities
//! derived from them.
//!
//! Everything here works in normalized image coordinates: pixel coordinates
//! with the image center subtracted, scaled by `1 / (width + height)`. The
//! [`Normalizer`] is the only type that knows about pixels.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible magnitude of a rectification denominator `lᵀ f(x̃, λ)`.
pub const EPS_DENOM: f64 = 1e-9;
/// Smallest admissible magnitude of a point-parameterization determinant.
pub const EPS_COLLINEAR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("point maps to (or beyond) the vanishing line")]
    NearVanishingLine,
    #[error("the inverse division model has no real solution at this radius")]
    NoRealRoot,
    #[error("frame points are collinear")]
    Collinear,
    #[error("the distorted vanishing line has no real points")]
    NoRealLocus,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x: f64,
    pub y: f64,
}

impl ImagePoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn radius_sq(&self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(&self, other: &ImagePoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Projective point. Representatives are kept exactly as produced; two points
/// are the same when they agree up to a nonzero scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousPoint(pub [f64; 3]);

impl HomogeneousPoint {
    pub fn euclidean(&self) -> Option<ImagePoint> {
        let [a, b, w] = self.0;
        if w == 0.0 {
            None
        } else {
            Some(ImagePoint::new(a / w, b / w))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VanishingLine {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl VanishingLine {
    pub const fn affine(l1: f64, l2: f64) -> Self {
        Self { l1, l2, l3: 1.0 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.l1, self.l2, self.l3]
    }

    /// Rescales to the `l3 = 1` chart. `None` when the line passes through
    /// the distortion center.
    pub fn to_affine_chart(&self) -> Option<Self> {
        if self.l3 == 0.0 || !self.l3.is_finite() {
            return None;
        }
        Some(Self::affine(self.l1 / self.l3, self.l2 / self.l3))
    }

    /// Distance of the (pinhole) line from the image center.
    pub fn distance_to_origin(&self) -> f64 {
        self.l3.abs() / self.l1.hypot(self.l2)
    }

    fn dot(&self, h: &HomogeneousPoint) -> f64 {
        self.l1 * h.0[0] + self.l2 * h.0[1] + self.l3 * h.0[2]
    }
}

/// Point-parameterization of an affine-covariant region: the columns
/// `(y, o, x)` of the region's affine frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineFrame {
    pub py: ImagePoint,
    pub po: ImagePoint,
    pub px: ImagePoint,
}

impl AffineFrame {
    pub const fn new(py: ImagePoint, po: ImagePoint, px: ImagePoint) -> Self {
        Self { py, po, px }
    }

    pub fn points(&self) -> [ImagePoint; 3] {
        [self.py, self.po, self.px]
    }

    pub fn from_points(p: [ImagePoint; 3]) -> Self {
        Self::new(p[0], p[1], p[2])
    }

    /// `det [[x1 x2 x3] [y1 y2 y3] [1 1 1]]`, twice the signed triangle area.
    pub fn determinant(&self) -> f64 {
        let [a, b, c] = self.points();
        (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)
    }

    pub fn centroid(&self) -> ImagePoint {
        let [a, b, c] = self.points();
        ImagePoint::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    pub fn is_collinear(&self) -> bool {
        self.determinant().abs() <= EPS_COLLINEAR
    }

    pub fn map(&self, mut f: impl FnMut(ImagePoint) -> ImagePoint) -> Self {
        let py = f(self.py);
        let po = f(self.po);
        Self::new(py, po, f(self.px))
    }
}

/// Scale of a region as reported by a scale-covariant detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleObservation {
    pub center: ImagePoint,
    /// Area in normalized units², strictly positive.
    pub scale: f64,
}

/// Hypothesis `(l1, l2, λ)` with `l3 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectifyModel {
    pub l: VanishingLine,
    pub lambda: f64,
}

impl RectifyModel {
    pub const fn new(l1: f64, l2: f64, lambda: f64) -> Self {
        Self {
            l: VanishingLine::affine(l1, l2),
            lambda,
        }
    }

    pub const fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn params(&self) -> [f64; 3] {
        [self.l.l1, self.l.l2, self.lambda]
    }

    pub fn from_params(p: [f64; 3]) -> Self {
        Self::new(p[0], p[1], p[2])
    }

    /// `lᵀ f(x̃, λ)`, the third coordinate of the undistorted and rectified point.
    pub fn denominator(&self, p: &ImagePoint) -> f64 {
        self.l.dot(&undistort(p, self.lambda))
    }
}

/// Maps pixel coordinates to normalized, center-subtracted coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub cx: f64,
    pub cy: f64,
    pub scale: f64,
}

impl Normalizer {
    pub fn for_image(width: f64, height: f64) -> Self {
        Self {
            cx: width / 2.0,
            cy: height / 2.0,
            scale: 1.0 / (width + height),
        }
    }

    pub fn normalize(&self, px: ImagePoint) -> ImagePoint {
        ImagePoint::new((px.x - self.cx) * self.scale, (px.y - self.cy) * self.scale)
    }

    pub fn to_pixels(&self, p: ImagePoint) -> ImagePoint {
        ImagePoint::new(p.x / self.scale + self.cx, p.y / self.scale + self.cy)
    }

    /// Converts a length in pixels to normalized units.
    pub fn length(&self, pixels: f64) -> f64 {
        pixels * self.scale
    }
}

/// Rectified point-parameterization with the projective scale factors
/// `α_k = lᵀ f(x̃_k, λ)` that were divided out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifiedFrame {
    pub points: [ImagePoint; 3],
    pub alphas: [f64; 3],
}

/// One-parameter division model: `(x̃, ỹ, 1 + λ(x̃² + ỹ²))`.
pub fn undistort(p: &ImagePoint, lambda: f64) -> HomogeneousPoint {
    HomogeneousPoint([p.x, p.y, 1.0 + lambda * p.radius_sq()])
}

/// Inverse of the division model for a pinhole point.
///
/// The distorted radius solves `λ r_u r_d² − r_d + r_u = 0`; the root taken
/// is the one that tends to `r_u` as `λ → 0`.
pub fn distort(p: &ImagePoint, lambda: f64) -> Result<ImagePoint, GeometryError> {
    let disc = 1.0 - 4.0 * lambda * p.radius_sq();
    if disc < 0.0 {
        return Err(GeometryError::NoRealRoot);
    }
    // r_d / r_u, written without the cancellation of the textbook formula
    let k = 2.0 / (1.0 + disc.sqrt());
    Ok(ImagePoint::new(k * p.x, k * p.y))
}

/// Undistorts with `λ` then applies the affine-rectifying homography.
pub fn rectify(p: &ImagePoint, m: &RectifyModel) -> Result<ImagePoint, GeometryError> {
    let d = m.denominator(p);
    if d.abs() <= EPS_DENOM {
        return Err(GeometryError::NearVanishingLine);
    }
    Ok(ImagePoint::new(p.x / d, p.y / d))
}

/// Signed scale of the rectified frame, via the three-term minor expansion
/// `M₃₁/(α₂α₃) − M₃₂/(α₁α₃) + M₃₃/(α₁α₂)`.
pub fn rectified_scale(
    f: &AffineFrame,
    m: &RectifyModel,
) -> Result<(f64, RectifiedFrame), GeometryError> {
    let pts = f.points();
    let mut alphas = [0.0; 3];
    for (a, p) in alphas.iter_mut().zip(&pts) {
        *a = m.denominator(p);
        if a.abs() <= EPS_DENOM {
            return Err(GeometryError::NearVanishingLine);
        }
    }
    let [m1, m2, m3] = frame_minors(f);
    let [a1, a2, a3] = alphas;
    let scale = m1 / (a2 * a3) - m2 / (a1 * a3) + m3 / (a1 * a2);
    let points = [
        ImagePoint::new(pts[0].x / a1, pts[0].y / a1),
        ImagePoint::new(pts[1].x / a2, pts[1].y / a2),
        ImagePoint::new(pts[2].x / a3, pts[2].y / a3),
    ];
    Ok((scale, RectifiedFrame { points, alphas }))
}

/// The `(3, k)` minors of `[[x1 x2 x3] [y1 y2 y3] [·]]`.
pub fn frame_minors(f: &AffineFrame) -> [f64; 3] {
    let [p1, p2, p3] = f.points();
    [
        p2.x * p3.y - p3.x * p2.y,
        p1.x * p3.y - p3.x * p1.y,
        p1.x * p2.y - p2.x * p1.y,
    ]
}

/// Reorders a left-handed frame `(y, o, x)` as `(x, o, y)`.
pub fn orient(f: &AffineFrame) -> Result<AffineFrame, GeometryError> {
    let det = f.determinant();
    if det.abs() <= EPS_COLLINEAR {
        return Err(GeometryError::Collinear);
    }
    if det < 0.0 {
        Ok(AffineFrame::new(f.px, f.po, f.py))
    } else {
        Ok(*f)
    }
}

/// Jacobian determinant of `p ↦ rectify(p, m)`:
/// `l3 (1 − λ r²) / (lᵀ f(p, λ))³`.
pub fn change_of_scale(p: &ImagePoint, m: &RectifyModel) -> Result<f64, GeometryError> {
    let d = m.denominator(p);
    if d.abs() <= EPS_DENOM {
        return Err(GeometryError::NearVanishingLine);
    }
    Ok(m.l.l3 * (1.0 - m.lambda * p.radius_sq()) / (d * d * d))
}

/// Image of the vanishing line in the distorted image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VanishingLocus {
    Circle { center: ImagePoint, radius: f64 },
    /// `a x + b y + c = 0`
    Line { a: f64, b: f64, c: f64 },
}

impl VanishingLocus {
    /// Samples `n` points on the locus. Lines are sampled on a segment of
    /// half-length `extent` around the foot of the perpendicular from the origin.
    pub fn sample(&self, n: usize, extent: f64) -> Vec<ImagePoint> {
        match *self {
            VanishingLocus::Circle { center, radius } => (0..n)
                .map(|i| {
                    let t = std::f64::consts::TAU * i as f64 / n as f64;
                    ImagePoint::new(center.x + radius * t.cos(), center.y + radius * t.sin())
                })
                .collect(),
            VanishingLocus::Line { a, b, c } => {
                let nn = a * a + b * b;
                let foot = ImagePoint::new(-a * c / nn, -b * c / nn);
                let dir = (-b / nn.sqrt(), a / nn.sqrt());
                (0..n)
                    .map(|i| {
                        let s = if n > 1 {
                            -extent + 2.0 * extent * i as f64 / (n - 1) as f64
                        } else {
                            0.0
                        };
                        ImagePoint::new(foot.x + s * dir.0, foot.y + s * dir.1)
                    })
                    .collect()
            }
        }
    }
}

/// Locus `λ(x̃² + ỹ²) + l1 x̃ + l2 ỹ + 1 = 0` (scaled by `l3`).
pub fn distorted_vanishing_circle(m: &RectifyModel) -> Result<VanishingLocus, GeometryError> {
    let VanishingLine { l1, l2, l3 } = m.l;
    let quad = l3 * m.lambda;
    if quad == 0.0 {
        if l1 == 0.0 && l2 == 0.0 {
            return Err(GeometryError::NoRealLocus);
        }
        return Ok(VanishingLocus::Line { a: l1, b: l2, c: l3 });
    }
    let cx = -l1 / (2.0 * quad);
    let cy = -l2 / (2.0 * quad);
    let r2 = cx * cx + cy * cy - l3 / quad;
    if r2 < 0.0 {
        return Err(GeometryError::NoRealLocus);
    }
    Ok(VanishingLocus::Circle {
        center: ImagePoint::new(cx, cy),
        radius: r2.sqrt(),
    })
}

/// Relative change of scale sampled on a set of points; `None` marks points
/// too close to the vanishing line.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleField {
    pub values: Vec<Option<f64>>,
}

pub fn dense_change_of_scale_map(
    grid: &[ImagePoint],
    m: &RectifyModel,
    reference: &ImagePoint,
) -> Result<ScaleField, GeometryError> {
    let at_ref = change_of_scale(reference, m)?;
    let values = grid
        .iter()
        .map(|p| change_of_scale(p, m).ok().map(|c| c / at_ref))
        .collect();
    Ok(ScaleField { values })
}

/// True where the rectified blow-up relative to the reference stays within
/// `threshold`, i.e. where the relative change of scale is at least `1/threshold`.
///
/// Panics if `threshold` is not positive.
pub fn mask_by_scale(field: &ScaleField, threshold: f64) -> Vec<bool> {
    assert!(threshold > 0.0, "scale threshold must be positive");
    let floor = 1.0 / threshold;
    field
        .values
        .iter()
        .map(|v| matches!(v, Some(c) if *c >= floor))
        .collect()
}
