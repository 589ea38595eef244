//! Scene documents (JSON, pixel coordinates) and per-trial result tables (CSV).

use std::io::{Read, Write};

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AffineFrame, ImagePoint, Normalizer, ScaleObservation, VanishingLine};
use crate::synth::{GroundTruthScene, Motion, SceneParams};

pub const SCENE_FORMAT: &str = "radrect-scene/1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scene document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed result table: {0}")]
    Csv(#[from] csv::Error),
    #[error("unsupported scene format {0:?}")]
    Format(String),
}

type PixelFrame = [[f64; 2]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelScale {
    pub center: [f64; 2],
    /// Area in squared pixels.
    pub scale: f64,
}

/// A scene as stored on disk. Image quantities are in pixels; the distortion
/// parameter and vanishing line are in normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub format: String,
    pub image_width: f64,
    pub image_height: f64,
    pub normalizer: Normalizer,
    pub lambda_gt: f64,
    pub vline_gt: [f64; 3],
    /// Row-major plane-to-normalized-pinhole-image homography.
    pub plane_to_image: [f64; 9],
    pub motion: Motion,
    pub seed: u64,
    pub sigma: f64,
    pub noise_seed: u64,
    pub params: SceneParams,
    pub grid_box: [f64; 4],
    /// Observed (possibly noisy) frames.
    pub frames: Vec<Vec<PixelFrame>>,
    /// Noiseless planted frames.
    pub planted: Vec<Vec<PixelFrame>>,
    /// Plane coordinates of the planted frames.
    pub preimages: Vec<Vec<PixelFrame>>,
    /// Scale observations matching `frames`.
    pub scales: Vec<Vec<PixelScale>>,
}

fn to_px(n: &Normalizer, f: &AffineFrame) -> PixelFrame {
    f.points().map(|p| {
        let q = n.to_pixels(p);
        [q.x, q.y]
    })
}

fn from_px(n: &Normalizer, f: &PixelFrame) -> AffineFrame {
    AffineFrame::from_points(f.map(|p| n.normalize(ImagePoint::new(p[0], p[1]))))
}

impl SceneFile {
    pub fn from_scene(
        scene: &GroundTruthScene,
        frames: &[Vec<AffineFrame>],
        scales: &[Vec<ScaleObservation>],
        sigma: f64,
        noise_seed: u64,
    ) -> Self {
        let n = &scene.normalizer;
        let px = |g: &[Vec<AffineFrame>]| g.iter().map(|v| v.iter().map(|f| to_px(n, f)).collect()).collect();
        let h = scene.plane_to_image;
        Self {
            format: SCENE_FORMAT.to_string(),
            image_width: scene.params.image_width,
            image_height: scene.params.image_height,
            normalizer: *n,
            lambda_gt: scene.lambda,
            vline_gt: scene.vline.as_array(),
            plane_to_image: [
                h[(0, 0)],
                h[(0, 1)],
                h[(0, 2)],
                h[(1, 0)],
                h[(1, 1)],
                h[(1, 2)],
                h[(2, 0)],
                h[(2, 1)],
                h[(2, 2)],
            ],
            motion: scene.params.motion,
            seed: scene.params.seed,
            sigma,
            noise_seed,
            params: scene.params.clone(),
            grid_box: scene.grid_box,
            frames: px(frames),
            planted: px(&scene.frames),
            preimages: scene.preimages.clone(),
            scales: scales
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|o| {
                            let c = n.to_pixels(o.center);
                            PixelScale {
                                center: [c.x, c.y],
                                scale: o.scale / (n.scale * n.scale),
                            }
                        })
                        .collect()
                })
                .collect(),
        }
    }

    /// Ground-truth scene in normalized coordinates.
    pub fn scene(&self) -> GroundTruthScene {
        let n = &self.normalizer;
        let p = &self.plane_to_image;
        let [l1, l2, l3] = self.vline_gt;
        GroundTruthScene {
            params: self.params.clone(),
            normalizer: *n,
            plane_to_image: Matrix3::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8]),
            lambda: self.lambda_gt,
            vline: VanishingLine { l1, l2, l3 },
            frames: self.planted.iter().map(|g| g.iter().map(|f| from_px(n, f)).collect()).collect(),
            preimages: self.preimages.clone(),
            grid_box: self.grid_box,
        }
    }

    /// Observed frames in normalized coordinates.
    pub fn observed_frames(&self) -> Vec<Vec<AffineFrame>> {
        let n = &self.normalizer;
        self.frames.iter().map(|g| g.iter().map(|f| from_px(n, f)).collect()).collect()
    }

    pub fn observed_scales(&self) -> Vec<Vec<ScaleObservation>> {
        let n = &self.normalizer;
        self.scales
            .iter()
            .map(|g| {
                g.iter()
                    .map(|s| ScaleObservation {
                        center: n.normalize(ImagePoint::new(s.center[0], s.center[1])),
                        scale: s.scale * n.scale * n.scale,
                    })
                    .collect()
            })
            .collect()
    }

    pub fn write(&self, w: impl Write) -> Result<(), IoError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn to_string_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn read(r: impl Read) -> Result<Self, IoError> {
        let f: SceneFile = serde_json::from_reader(r)?;
        if f.format != SCENE_FORMAT {
            return Err(IoError::Format(f.format));
        }
        Ok(f)
    }
}

/// One benchmark or solve trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: usize,
    pub variant: String,
    pub sigma: f64,
    pub lambda_gt: f64,
    pub lambda_est: f64,
    pub l1: f64,
    pub l2: f64,
    pub rms_warp: f64,
    /// Relative error, or absolute error when `lambda_err_kind` is `abs`.
    pub rel_lambda_err: f64,
    pub n_real: usize,
    pub n_feasible: usize,
    pub solve_millis: f64,
    /// Full-system residual of the reported root.
    pub residual: f64,
    pub lambda_err_kind: String,
}

impl ResultRow {
    /// Error fields for an estimate of `lambda_gt`.
    pub fn lambda_error(lambda_est: f64, lambda_gt: f64) -> (f64, String) {
        match crate::robust::rel_lambda_error(lambda_est, lambda_gt) {
            Ok(e) => (e, "rel".into()),
            Err(_) => ((lambda_est - lambda_gt).abs(), "abs".into()),
        }
    }
}

pub fn write_results(rows: &[ResultRow], w: impl Write) -> Result<(), IoError> {
    let mut wr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wr.write_record([
            "trial",
            "variant",
            "sigma",
            "lambda_gt",
            "lambda_est",
            "l1",
            "l2",
            "rms_warp",
            "rel_lambda_err",
            "n_real",
            "n_feasible",
            "solve_millis",
            "residual",
            "lambda_err_kind",
        ])?;
    }
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_results(r: impl Read) -> Result<Vec<ResultRow>, IoError> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(IoError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{add_noise, cs_observations_linearized, gen_scene};

    #[test]
    fn scene_document_round_trip() {
        let scene = gen_scene(&SceneParams {
            seed: 3,
            ..SceneParams::default()
        })
        .unwrap();
        let noisy = add_noise(&scene, 1.0, 9);
        let scales = cs_observations_linearized(&scene, &noisy).unwrap();
        let file = SceneFile::from_scene(&scene, &noisy, &scales, 1.0, 9);
        let text = file.to_string_pretty();
        let back = SceneFile::read(text.as_bytes()).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_string_pretty(), text);

        let s = back.scene();
        assert_eq!(s.plane_to_image, scene.plane_to_image);
        assert_eq!(s.vline, scene.vline);
        assert_eq!(s.lambda, scene.lambda);
        for (a, b) in s.frames.iter().flatten().zip(scene.frames.iter().flatten()) {
            for (p, q) in a.points().iter().zip(b.points()) {
                assert!(p.dist(&q) < 1e-15);
            }
        }
        for (a, b) in back.observed_scales().iter().flatten().zip(scales.iter().flatten()) {
            assert!((a.scale - b.scale).abs() <= 1e-14 * b.scale);
        }
    }

    #[test]
    fn wrong_format_rejected() {
        let scene = gen_scene(&SceneParams::default()).unwrap();
        let mut file = SceneFile::from_scene(&scene, &scene.frames, &[], 0.0, 0);
        file.format = "other".into();
        assert!(matches!(
            SceneFile::read(file.to_string_pretty().as_bytes()),
            Err(IoError::Format(_))
        ));
    }

    #[test]
    fn result_table_round_trip() {
        let rows = vec![
            ResultRow {
                trial: 0,
                variant: "des222".into(),
                sigma: 0.5,
                lambda_gt: -4.0,
                lambda_est: -3.9,
                l1: 0.1,
                l2: -0.2,
                rms_warp: 1.25,
                rel_lambda_err: 0.025,
                n_real: 4,
                n_feasible: 1,
                solve_millis: 12.5,
                residual: 1e-15,
                lambda_err_kind: "rel".into(),
            },
            ResultRow {
                trial: 1,
                variant: "cs4".into(),
                sigma: 0.0,
                lambda_gt: 0.0,
                lambda_est: f64::NAN,
                l1: f64::NAN,
                l2: f64::NAN,
                rms_warp: f64::INFINITY,
                rel_lambda_err: f64::NAN,
                n_real: 0,
                n_feasible: 0,
                solve_millis: 3.0,
                residual: f64::NAN,
                lambda_err_kind: "abs".into(),
            },
        ];
        let mut buf = Vec::new();
        write_results(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("trial,variant,sigma,lambda_gt,lambda_est,l1,l2,rms_warp,rel_lambda_err,n_real,n_feasible,solve_millis"));
        let back = read_results(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0], rows[0]);
        assert!(back[1].rms_warp.is_infinite() && back[1].lambda_est.is_nan());
        let mut empty = Vec::new();
        write_results(&[], &mut empty).unwrap();
        assert!(read_results(empty.as_slice()).unwrap().is_empty());
    }
}
