use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use radrect::geometry::{
    change_of_scale, distort, distorted_vanishing_circle, rectified_scale, rectify, undistort, AffineFrame,
    ImagePoint, Normalizer, RectifyModel, VanishingLocus,
};

fn point() -> impl Strategy<Value = ImagePoint> {
    (-0.25..0.25f64, -0.25..0.25f64).prop_map(|(x, y)| ImagePoint::new(x, y))
}

fn model() -> impl Strategy<Value = RectifyModel> {
    (-3.0..3.0f64, -3.0..3.0f64, -8.0..0.5f64).prop_map(|(a, b, l)| RectifyModel::new(a, b, l))
}

/// Undistort then rectify written as an explicit 3 × 3 homography.
fn pipeline(p: &ImagePoint, m: &RectifyModel) -> ImagePoint {
    let h = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, m.l.l1, m.l.l2, m.l.l3);
    let v = h * Vector3::new(p.x, p.y, 1.0 + m.lambda * (p.x * p.x + p.y * p.y));
    ImagePoint::new(v.x / v.z, v.y / v.z)
}

fn triangle_det(p: [ImagePoint; 3]) -> f64 {
    (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y)
}

proptest! {
    #[test]
    fn distortion_round_trip(p in point(), lambda in -8.0..0.5f64) {
        let u = undistort(&p, lambda).euclidean().unwrap();
        let back = distort(&u, lambda).unwrap();
        prop_assert!(back.dist(&p) < 1e-12);
    }

    #[test]
    fn rectify_matches_homography(p in point(), m in model()) {
        prop_assume!(m.denominator(&p).abs() > 1e-3);
        let a = rectify(&p, &m).unwrap();
        let b = pipeline(&p, &m);
        prop_assert!(a.dist(&b) <= 1e-10 * (1.0 + b.x.abs() + b.y.abs()));
    }

    #[test]
    fn change_of_scale_is_jacobian_determinant(p in point(), m in model()) {
        prop_assume!(m.denominator(&p).abs() > 0.05);
        let h = 1e-6;
        let f = |dx: f64, dy: f64| pipeline(&ImagePoint::new(p.x + dx, p.y + dy), &m);
        let (xp, xm, yp, ym) = (f(h, 0.0), f(-h, 0.0), f(0.0, h), f(0.0, -h));
        let det = (xp.x - xm.x) * (yp.y - ym.y) / (4.0 * h * h) - (yp.x - ym.x) * (xp.y - xm.y) / (4.0 * h * h);
        let c = change_of_scale(&p, &m).unwrap();
        prop_assert!((c - det).abs() <= 1e-5 * c.abs(), "{c} vs {det}");
    }

    #[test]
    fn rectified_scale_is_area_of_rectified_frame(a in point(), b in point(), c in point(), m in model()) {
        let f = AffineFrame::new(a, b, c);
        prop_assume!(f.determinant().abs() > 1e-4);
        prop_assume!(f.points().iter().all(|p| m.denominator(p).abs() > 1e-2));
        let (s, r) = rectified_scale(&f, &m).unwrap();
        let oracle = triangle_det(f.points().map(|p| pipeline(&p, &m)));
        prop_assert!((s - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()), "{s} vs {oracle}");
        prop_assert!((triangle_det(r.points) - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()));
    }

    #[test]
    fn normalizer_round_trip(x in 0.0..4000.0f64, y in 0.0..3000.0f64) {
        let n = Normalizer::for_image(4000.0, 3000.0);
        let q = n.to_pixels(n.normalize(ImagePoint::new(x, y)));
        prop_assert!((q.x - x).abs() < 1e-9 && (q.y - y).abs() < 1e-9);
    }

    #[test]
    fn vanishing_circle_points_have_zero_denominator(m in model()) {
        prop_assume!(m.lambda.abs() > 1e-3);
        if let Ok(VanishingLocus::Circle { .. }) = distorted_vanishing_circle(&m) {
            let locus = distorted_vanishing_circle(&m).unwrap();
            for p in locus.sample(16, 1.0) {
                let scale = 1.0 + m.l.l1.abs() * p.x.abs() + m.l.l2.abs() * p.y.abs() + m.lambda.abs() * p.radius_sq();
                prop_assert!(m.denominator(&p).abs() <= 1e-9 * scale);
            }
        }
    }
}

#[test]
fn identity_model_changes_nothing() {
    let p = ImagePoint::new(0.13, -0.07);
    let m = RectifyModel::identity();
    assert_eq!(rectify(&p, &m).unwrap(), p);
    assert_eq!(change_of_scale(&p, &m).unwrap(), 1.0);
    let f = AffineFrame::new(ImagePoint::new(0.0, 0.1), ImagePoint::new(0.0, 0.0), ImagePoint::new(0.1, 0.0));
    let (s, _) = rectified_scale(&f, &m).unwrap();
    assert!((s - f.determinant()).abs() < 1e-15);
}
