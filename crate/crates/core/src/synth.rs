//! Synthetic scenes with known plane homography, distortion and vanishing line.
//!
//! A pinhole camera looks at the plane `z = 0`. Repeated regions are planted
//! on the plane as congruent (rigid) or translated copies of a random
//! triangle, imaged through the plane-to-image homography and distorted with
//! the division model. All image quantities are in normalized coordinates.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    change_of_scale, distort, rectified_scale, undistort, AffineFrame, GeometryError, ImagePoint,
    Normalizer, RectifyModel, ScaleObservation, VanishingLine,
};

const MAX_SCENE_ATTEMPTS: usize = 100;
const MAX_PLACEMENT_TRIES: usize = 200;
/// Farthest visible plane point, in camera-to-plane-origin distances.
const MAX_DEPTH: f64 = 3.0;
pub const WARP_GRID_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("could not place all regions in view after {0} attempts")]
    RetryExhausted(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Motion {
    Rigid,
    Translation,
}

/// Camera placement relative to the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum View {
    /// Random tilt in `[min, max]` degrees, random azimuth and roll.
    Oblique { min_tilt_deg: f64, max_tilt_deg: f64 },
    FrontoParallel,
    /// Optical axis parallel to the plane: the horizon passes through the
    /// image center.
    HorizonThroughCenter,
}

/// Where the copies of a region go.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    /// Uniformly over the visible part of the plane, with rejection.
    Uniform,
    /// Rotations about the plane point imaged at the image center, so
    /// corresponding points share their distance to the center.
    Concentric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub seed: u64,
    pub motion: Motion,
    pub lambda: f64,
    pub group_sizes: Vec<usize>,
    pub image_width: f64,
    pub image_height: f64,
    /// Focal length as a multiple of the image width.
    pub focal_range: (f64, f64),
    pub view: View,
    pub placement: Placement,
    /// Triangle side as a fraction of the visible plane region's extent.
    pub frame_size: (f64, f64),
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            seed: 0,
            motion: Motion::Rigid,
            lambda: -4.0,
            group_sizes: vec![4, 4, 3, 3, 2],
            image_width: 1000.0,
            image_height: 1000.0,
            focal_range: (0.5, 2.5),
            view: View::Oblique {
                min_tilt_deg: 15.0,
                max_tilt_deg: 70.0,
            },
            placement: Placement::Uniform,
            frame_size: (0.01, 0.05),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthScene {
    pub params: SceneParams,
    pub normalizer: Normalizer,
    /// Plane `(X, Y, 1)` to homogeneous normalized pinhole image point.
    pub plane_to_image: Matrix3<f64>,
    pub lambda: f64,
    pub vline: VanishingLine,
    /// Planted frames in distorted normalized coordinates, one vec per group.
    pub frames: Vec<Vec<AffineFrame>>,
    /// Plane coordinates of the planted frames, `(y, o, x)` per frame.
    pub preimages: Vec<Vec<[[f64; 2]; 3]>>,
    /// Plane-coordinate box `[x0, y0, x1, y1]` tessellated by the warp grid.
    pub grid_box: [f64; 4],
}

impl GroundTruthScene {
    pub fn model(&self) -> RectifyModel {
        RectifyModel {
            l: self.vline,
            lambda: self.lambda,
        }
    }

    /// Images a plane point: pinhole projection, then distortion.
    pub fn image_of(&self, plane: [f64; 2]) -> Result<ImagePoint, GeometryError> {
        project_distort(&self.plane_to_image, plane, self.lambda)
    }

    /// Plane points of the 10 × 10 warp-error grid.
    pub fn warp_grid(&self) -> Vec<[f64; 2]> {
        grid_points(&self.grid_box)
    }

    pub fn half_extent(&self) -> (f64, f64) {
        half_extent(&self.params, &self.normalizer)
    }

    pub fn in_image(&self, p: &ImagePoint) -> bool {
        let (hw, hh) = self.half_extent();
        p.x.abs() <= hw && p.y.abs() <= hh
    }
}

fn half_extent(p: &SceneParams, n: &Normalizer) -> (f64, f64) {
    (n.length(p.image_width / 2.0), n.length(p.image_height / 2.0))
}

fn grid_points(b: &[f64; 4]) -> Vec<[f64; 2]> {
    let n = WARP_GRID_N;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let u = i as f64 / (n - 1) as f64;
            let v = j as f64 / (n - 1) as f64;
            out.push([b[0] + u * (b[2] - b[0]), b[1] + v * (b[3] - b[1])]);
        }
    }
    out
}

fn project_distort(h: &Matrix3<f64>, plane: [f64; 2], lambda: f64) -> Result<ImagePoint, GeometryError> {
    let p = h * Vector3::new(plane[0], plane[1], 1.0);
    if p.z <= 0.0 {
        return Err(GeometryError::NearVanishingLine);
    }
    distort(&ImagePoint::new(p.x / p.z, p.y / p.z), lambda)
}

struct Camera {
    rotation: Matrix3<f64>,
    center: Vector3<f64>,
    focal: f64,
}

impl Camera {
    fn homography(&self) -> Matrix3<f64> {
        let k = Matrix3::new(self.focal, 0.0, 0.0, 0.0, self.focal, 0.0, 0.0, 0.0, 1.0);
        let t = -(self.rotation * self.center);
        let r = &self.rotation;
        let m = Matrix3::from_columns(&[r.column(0).into_owned(), r.column(1).into_owned(), t]);
        k * m
    }

    fn depth(&self, plane: [f64; 2]) -> f64 {
        (self.rotation * (Vector3::new(plane[0], plane[1], 0.0) - self.center)).z
    }
}

/// Rows of a world-to-camera rotation with optical axis `z`, rolled by `roll`.
fn look_rotation(z: Vector3<f64>, roll: f64) -> Matrix3<f64> {
    let z = z.normalize();
    let helper = if z.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let x0 = helper.cross(&z).normalize();
    let y0 = z.cross(&x0);
    let x = x0 * roll.cos() + y0 * roll.sin();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

fn random_camera(p: &SceneParams, n: &Normalizer, rng: &mut ChaCha8Rng) -> Camera {
    let focal_px = rng.random_range(p.focal_range.0..=p.focal_range.1) * p.image_width;
    let focal = n.length(focal_px);
    let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
    let roll = rng.random_range(0.0..std::f64::consts::TAU);
    let (rotation, center) = match p.view {
        View::Oblique {
            min_tilt_deg,
            max_tilt_deg,
        } => {
            let tilt = rng.random_range(min_tilt_deg..=max_tilt_deg).to_radians();
            let c = Vector3::new(tilt.sin() * azimuth.cos(), tilt.sin() * azimuth.sin(), tilt.cos());
            (look_rotation(-c, roll), c)
        }
        View::FrontoParallel => {
            let c = Vector3::new(0.0, 0.0, 1.0);
            (look_rotation(-c, roll), c)
        }
        View::HorizonThroughCenter => {
            let c = Vector3::new(0.0, 0.0, 1.0);
            let axis = Vector3::new(azimuth.cos(), azimuth.sin(), 0.0);
            // keep image "down" towards the plane so the plane fills the lower half
            let z = axis;
            let x = z.cross(&Vector3::z()).normalize();
            let y = z.cross(&x);
            (Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]), c)
        }
    };
    Camera {
        rotation,
        center,
        focal,
    }
}

fn rotate(v: [f64; 2], a: f64) -> [f64; 2] {
    let (s, c) = a.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

struct Planter<'a> {
    params: &'a SceneParams,
    camera: &'a Camera,
    h: Matrix3<f64>,
    h_inv: Matrix3<f64>,
    bounds: (f64, f64),
}

impl Planter<'_> {
    fn in_bounds(&self, p: &ImagePoint) -> bool {
        p.x.abs() <= self.bounds.0 && p.y.abs() <= self.bounds.1
    }

    /// Plane point seen at image location `u`, if the ray hits the plane in
    /// front of the camera within `MAX_DEPTH` camera distances.
    fn plane_at(&self, u: &ImagePoint) -> Option<[f64; 2]> {
        let pin = undistort(u, self.params.lambda).euclidean()?;
        let w = self.h_inv * Vector3::new(pin.x, pin.y, 1.0);
        if w.z.abs() < 1e-12 {
            return None;
        }
        let plane = [w.x / w.z, w.y / w.z];
        let depth = self.camera.depth(plane);
        (depth > 0.0 && depth < MAX_DEPTH * self.camera.center.norm()).then_some(plane)
    }

    fn random_anchor(&self, rng: &mut ChaCha8Rng) -> Option<[f64; 2]> {
        let u = ImagePoint::new(
            rng.random_range(-0.9..0.9) * self.bounds.0,
            rng.random_range(-0.9..0.9) * self.bounds.1,
        );
        self.plane_at(&u)
    }

    /// Larger side of the bounding box of the visible plane region.
    fn visible_extent(&self) -> Option<f64> {
        let n = 21;
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for j in 0..n {
            for i in 0..n {
                let u = ImagePoint::new(
                    (2.0 * i as f64 / (n - 1) as f64 - 1.0) * self.bounds.0,
                    (2.0 * j as f64 / (n - 1) as f64 - 1.0) * self.bounds.1,
                );
                if let Some(q) = self.plane_at(&u) {
                    b = [b[0].min(q[0]), b[1].min(q[1]), b[2].max(q[0]), b[3].max(q[1])];
                }
            }
        }
        let e = (b[2] - b[0]).max(b[3] - b[1]);
        (e.is_finite() && e > 0.0).then_some(e)
    }

    fn image_frame(&self, pre: &[[f64; 2]; 3]) -> Option<AffineFrame> {
        let mut pts = [ImagePoint::default(); 3];
        for (dst, src) in pts.iter_mut().zip(pre) {
            let p = project_distort(&self.h, *src, self.params.lambda).ok()?;
            if !self.in_bounds(&p) || self.camera.depth(*src) <= 0.0 {
                return None;
            }
            *dst = p;
        }
        let f = AffineFrame::from_points(pts);
        (!f.is_collinear()).then_some(f)
    }
}

type PlantedGroups = (Vec<Vec<AffineFrame>>, Vec<Vec<[[f64; 2]; 3]>>);

fn plant_groups(pl: &Planter, rng: &mut ChaCha8Rng) -> Option<PlantedGroups> {
    let p = pl.params;
    let extent = pl.visible_extent()?;
    let mut frames = Vec::new();
    let mut pres = Vec::new();
    for &n in &p.group_sizes {
        let side = rng.random_range(p.frame_size.0..=p.frame_size.1) * extent;
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let beta = rng.random_range(45.0_f64..=135.0).to_radians();
        let ratio = rng.random_range(0.7..=1.4);
        let xv = [side * a.cos(), side * a.sin()];
        let yv = [side * ratio * (a + beta).cos(), side * ratio * (a + beta).sin()];
        let mut gf = Vec::new();
        let mut gp = Vec::new();
        match p.placement {
            Placement::Uniform => {
                for _ in 0..n {
                    let mut placed = false;
                    for _ in 0..MAX_PLACEMENT_TRIES {
                        let Some(o) = pl.random_anchor(rng) else { continue };
                        let rot = match p.motion {
                            Motion::Rigid => rng.random_range(0.0..std::f64::consts::TAU),
                            Motion::Translation => 0.0,
                        };
                        let pre = [add(o, rotate(yv, rot)), o, add(o, rotate(xv, rot))];
                        if let Some(f) = pl.image_frame(&pre) {
                            gf.push(f);
                            gp.push(pre);
                            placed = true;
                            break;
                        }
                    }
                    if !placed {
                        return None;
                    }
                }
            }
            Placement::Concentric => {
                // plane point under the image center
                let c = pl.h_inv * Vector3::new(0.0, 0.0, 1.0);
                let center = [c.x / c.z, c.y / c.z];
                let mut placed = false;
                for _ in 0..MAX_PLACEMENT_TRIES {
                    let Some(o) = pl.random_anchor(rng) else { continue };
                    let base = [
                        add(o, yv),
                        o,
                        add(o, xv),
                    ];
                    let copies: Option<Vec<_>> = (0..n)
                        .map(|k| {
                            let ang = std::f64::consts::TAU * k as f64 / n as f64 + rng.random_range(0.0..0.3);
                            let pre = base.map(|q| add(center, rotate([q[0] - center[0], q[1] - center[1]], ang)));
                            pl.image_frame(&pre).map(|f| (f, pre))
                        })
                        .collect();
                    if let Some(c) = copies {
                        for (f, pre) in c {
                            gf.push(f);
                            gp.push(pre);
                        }
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    return None;
                }
            }
        }
        frames.push(gf);
        pres.push(gp);
    }
    Some((frames, pres))
}

fn fit_grid_box(pl: &Planter, pres: &[Vec<[[f64; 2]; 3]>]) -> Option<[f64; 4]> {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for q in pres.iter().flatten().flatten() {
        b[0] = b[0].min(q[0]);
        b[1] = b[1].min(q[1]);
        b[2] = b[2].max(q[0]);
        b[3] = b[3].max(q[1]);
    }
    for _ in 0..60 {
        let ok = grid_points(&b).iter().all(|g| {
            pl.camera.depth(*g) > 0.0
                && project_distort(&pl.h, *g, pl.params.lambda).is_ok_and(|p| pl.in_bounds(&p))
        });
        if ok {
            return Some(b);
        }
        let (cx, cy) = ((b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0);
        let (hx, hy) = ((b[2] - b[0]) * 0.45, (b[3] - b[1]) * 0.45);
        b = [cx - hx, cy - hy, cx + hx, cy + hy];
    }
    None
}

/// Generates a scene. Deterministic in `params.seed`.
pub fn gen_scene(params: &SceneParams) -> Result<GroundTruthScene, SynthError> {
    let normalizer = Normalizer::for_image(params.image_width, params.image_height);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bounds = half_extent(params, &normalizer);
    for _ in 0..MAX_SCENE_ATTEMPTS {
        let camera = random_camera(params, &normalizer, &mut rng);
        let h = camera.homography();
        let Some(h_inv) = h.try_inverse() else { continue };
        let planter = Planter {
            params,
            camera: &camera,
            h,
            h_inv,
            bounds,
        };
        let Some((frames, preimages)) = plant_groups(&planter, &mut rng) else {
            continue;
        };
        let Some(grid_box) = fit_grid_box(&planter, &preimages) else {
            continue;
        };
        let l = h_inv.transpose() * Vector3::new(0.0, 0.0, 1.0);
        let raw = VanishingLine {
            l1: l.x,
            l2: l.y,
            l3: l.z,
        };
        let vline = if l.z.abs() > 1e-12 * l.norm() {
            raw.to_affine_chart().unwrap_or(raw)
        } else {
            raw
        };
        return Ok(GroundTruthScene {
            params: params.clone(),
            normalizer,
            plane_to_image: h,
            lambda: params.lambda,
            vline,
            frames,
            preimages,
            grid_box,
        });
    }
    Err(SynthError::RetryExhausted(MAX_SCENE_ATTEMPTS))
}

/// Adds isotropic Gaussian noise of `sigma_px` pixels to every frame point.
pub fn add_noise(scene: &GroundTruthScene, sigma_px: f64, seed: u64) -> Vec<Vec<AffineFrame>> {
    perturb_frames(&scene.frames, scene.normalizer.length(sigma_px), seed)
}

pub fn perturb_frames(frames: &[Vec<AffineFrame>], sigma: f64, seed: u64) -> Vec<Vec<AffineFrame>> {
    if sigma == 0.0 {
        return frames.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
    frames
        .iter()
        .map(|g| {
            g.iter()
                .map(|f| {
                    f.map(|p| ImagePoint::new(p.x + normal.sample(&mut rng), p.y + normal.sample(&mut rng)))
                })
                .collect()
        })
        .collect()
}

/// Scale observations measured directly on frames: centroid and
/// `|det|` of the point parameterization.
pub fn cs_observations(frames: &[Vec<AffineFrame>]) -> Result<Vec<Vec<ScaleObservation>>, GeometryError> {
    frames
        .iter()
        .map(|g| {
            g.iter()
                .map(|f| {
                    if f.is_collinear() {
                        return Err(GeometryError::Collinear);
                    }
                    Ok(ScaleObservation {
                        center: f.centroid(),
                        scale: f.determinant().abs(),
                    })
                })
                .collect()
        })
        .collect()
}

/// Scale observations consistent with the first-order change-of-scale model
/// at the ground truth: the planted region's rectified scale divided by the
/// Jacobian determinant at its centroid. Noise enters through the centroid of
/// `observed` and the ratio of its area to the planted area.
pub fn cs_observations_linearized(
    scene: &GroundTruthScene,
    observed: &[Vec<AffineFrame>],
) -> Result<Vec<Vec<ScaleObservation>>, GeometryError> {
    let gt = scene.model();
    scene
        .frames
        .iter()
        .zip(observed)
        .map(|(planted, seen)| {
            planted
                .iter()
                .zip(seen)
                .map(|(p, o)| {
                    if o.is_collinear() {
                        return Err(GeometryError::Collinear);
                    }
                    let (s_rect, _) = rectified_scale(p, &gt)?;
                    let chos = change_of_scale(&p.centroid(), &gt)?;
                    let ratio = o.determinant().abs() / p.determinant().abs();
                    Ok(ScaleObservation {
                        center: o.centroid(),
                        scale: (s_rect / chos).abs() * ratio,
                    })
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_under_seed() {
        let p = SceneParams {
            seed: 11,
            ..SceneParams::default()
        };
        assert_eq!(gen_scene(&p).unwrap(), gen_scene(&p).unwrap());
        let q = SceneParams { seed: 12, ..p };
        assert_ne!(gen_scene(&q).unwrap().frames, gen_scene(&SceneParams { seed: 11, ..q.clone() }).unwrap().frames);
    }

    #[test]
    fn zero_distortion_frames_are_pinhole_images() {
        let p = SceneParams {
            seed: 4,
            lambda: 0.0,
            view: View::FrontoParallel,
            ..SceneParams::default()
        };
        let s = gen_scene(&p).unwrap();
        for (g, pg) in s.frames.iter().zip(&s.preimages) {
            for (f, pre) in g.iter().zip(pg) {
                for (q, x) in f.points().iter().zip(pre) {
                    let h = s.plane_to_image * Vector3::new(x[0], x[1], 1.0);
                    assert!(q.dist(&ImagePoint::new(h.x / h.z, h.y / h.z)) < 1e-15);
                }
            }
        }
    }

    #[test]
    fn equal_rectified_scales_within_groups() {
        for seed in 0..20 {
            let s = gen_scene(&SceneParams {
                seed,
                ..SceneParams::default()
            })
            .unwrap();
            let gt = s.model();
            for g in &s.frames {
                let scales: Vec<f64> = g.iter().map(|f| rectified_scale(f, &gt).unwrap().0).collect();
                for v in &scales {
                    assert!((v - scales[0]).abs() <= 1e-9 * scales[0].abs(), "{scales:?}");
                }
            }
        }
    }

    #[test]
    fn rigid_copies_are_congruent() {
        let s = gen_scene(&SceneParams {
            seed: 9,
            ..SceneParams::default()
        })
        .unwrap();
        let d = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
        for g in &s.preimages {
            let sides = |t: &[[f64; 2]; 3]| [d(t[0], t[1]), d(t[1], t[2]), d(t[0], t[2])];
            let s0 = sides(&g[0]);
            for t in g {
                let st = sides(t);
                for k in 0..3 {
                    assert!((st[k] - s0[k]).abs() < 1e-9 * s0[k].max(1.0));
                }
            }
        }
    }

    #[test]
    fn frames_and_grid_in_view() {
        for seed in 0..20 {
            let s = gen_scene(&SceneParams {
                seed,
                ..SceneParams::default()
            })
            .unwrap();
            assert!(s.frames.iter().flatten().flat_map(|f| f.points()).all(|p| s.in_image(&p)));
            let grid = s.warp_grid();
            assert_eq!(grid.len(), 100);
            assert!(grid.iter().all(|g| s.image_of(*g).is_ok_and(|p| s.in_image(&p))));
        }
    }

    #[test]
    fn noise_statistics() {
        let s = gen_scene(&SceneParams::default()).unwrap();
        assert_eq!(add_noise(&s, 0.0, 1), s.frames);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        let mut n = 0.0;
        for seed in 0..(100_000 / 96 + 1) as u64 {
            let noisy = add_noise(&s, 1.0, seed);
            for (g, h) in s.frames.iter().zip(&noisy) {
                for (a, b) in g.iter().zip(h) {
                    for (p, q) in a.points().iter().zip(b.points()) {
                        for d in [(q.x - p.x), (q.y - p.y)] {
                            let px = d / s.normalizer.scale;
                            sum += px;
                            sum2 += px * px;
                            n += 1.0;
                        }
                    }
                }
            }
        }
        assert!(n >= 1e5);
        let mean = sum / n;
        let std = (sum2 / n - mean * mean).sqrt();
        assert!((std - 1.0).abs() < 0.05, "std {std}");
    }

    #[test]
    fn frame_scale_observations() {
        let f = AffineFrame::new(ImagePoint::new(0.0, 1.0), ImagePoint::new(0.0, 0.0), ImagePoint::new(1.0, 0.0));
        let obs = cs_observations(&[vec![f]]).unwrap();
        assert_eq!(obs[0][0].scale, 1.0);
        assert!(obs[0][0].center.dist(&ImagePoint::new(1.0 / 3.0, 1.0 / 3.0)) < 1e-15);
        let c = f.centroid();
        let k = 2.5;
        let g = f.map(|p| ImagePoint::new(c.x + k * (p.x - c.x), c.y + k * (p.y - c.y)));
        let obs2 = cs_observations(&[vec![g]]).unwrap();
        assert!((obs2[0][0].scale - k * k).abs() < 1e-12);
        let flat = AffineFrame::new(ImagePoint::new(0.0, 0.0), ImagePoint::new(1.0, 1.0), ImagePoint::new(2.0, 2.0));
        assert_eq!(cs_observations(&[vec![flat]]), Err(GeometryError::Collinear));
    }

    #[test]
    fn linearized_observations_satisfy_change_of_scale_equality() {
        let s = gen_scene(&SceneParams {
            seed: 5,
            ..SceneParams::default()
        })
        .unwrap();
        let obs = cs_observations_linearized(&s, &s.frames).unwrap();
        let gt = s.model();
        for g in &obs {
            let r: Vec<f64> = g.iter().map(|o| o.scale * change_of_scale(&o.center, &gt).unwrap()).collect();
            for v in &r {
                assert!((v - r[0]).abs() <= 1e-10 * r[0].abs());
            }
        }
    }

    #[test]
    fn frame_area_observations_approximate_linearization() {
        // Small frames: the frame-area scale agrees with the first-order model.
        let s = gen_scene(&SceneParams {
            seed: 21,
            frame_size: (0.002, 0.004),
            ..SceneParams::default()
        })
        .unwrap();
        let obs = cs_observations(&s.frames).unwrap();
        let gt = s.model();
        for g in &obs {
            let r: Vec<f64> = g.iter().map(|o| o.scale * change_of_scale(&o.center, &gt).unwrap()).collect();
            for v in &r {
                assert!((v - r[0]).abs() <= 5e-3 * r[0].abs(), "{r:?}");
            }
        }
    }

    #[test]
    fn vanishing_line_is_image_of_line_at_infinity() {
        let s = gen_scene(&SceneParams {
            seed: 8,
            ..SceneParams::default()
        })
        .unwrap();
        let l = Vector3::new(s.vline.l1, s.vline.l2, s.vline.l3);
        // far plane points project close to the vanishing line
        let h = s.plane_to_image;
        let far = h * Vector3::new(1e7, 3e6, 1.0);
        assert!((l.dot(&far) / far.norm()).abs() < 1e-6);
        assert_eq!(s.vline.l3, 1.0);
    }

    #[test]
    fn horizon_view_puts_vanishing_line_through_center() {
        let s = gen_scene(&SceneParams {
            seed: 2,
            view: View::HorizonThroughCenter,
            ..SceneParams::default()
        })
        .unwrap();
        assert!(s.vline.l3.abs() < 1e-12 * s.vline.l1.hypot(s.vline.l2));
    }
}
