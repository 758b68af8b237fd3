//! Randomized invariants of the geometric and coding primitives.

use std::f64::consts::{PI, TAU};

use approx::assert_relative_eq;
use nalgebra::{Matrix3, Vector2, Vector3};
use proptest::prelude::*;

use slscan::decode::phase_from_triplet;
use slscan::geometry::{
    distort_normalized, estimate_homography_dlt, nearest_rotation, rodrigues, triangulate_midpoint,
    undistort_normalized, Homography, Pose, Ray,
};
use slscan::pattern::{gray_decode, gray_encode, sinusoid_value};

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    [-range..range, -range..range, -range..range].prop_map(Vector3::from)
}

proptest! {
    #[test]
    fn gray_code_round_trips_and_steps_one_bit(n in 1u32..(1 << 24)) {
        prop_assert_eq!(gray_decode(gray_encode(n)), n);
        prop_assert_eq!((gray_encode(n) ^ gray_encode(n - 1)).count_ones(), 1);
    }

    #[test]
    fn phase_triplet_inverts_sinusoids(phi in -PI..PI, dc in 50.0..200.0f64, m in 5.0..50.0f64) {
        let i = [0, 1, 2].map(|k| sinusoid_value(dc, m, k, phi));
        let got = phase_from_triplet(i[0], i[1], i[2]);
        let d = (got - phi + PI).rem_euclid(TAU) - PI;
        prop_assert!(d.abs() < 1e-9, "phi {phi} decoded as {got}");
    }

    #[test]
    fn pose_inverse_composes_to_identity(r in vec3(3.0), t in vec3(5.0), p in vec3(5.0)) {
        let pose = Pose::from_axis_angle(r, t);
        let back = pose.inverse().transform(&pose.transform(&p));
        assert_relative_eq!(back, p, epsilon = 1e-9);
        let id = pose.compose(&pose.inverse());
        assert_relative_eq!(*id.rotation(), Matrix3::identity(), epsilon = 1e-12);
    }

    #[test]
    fn nearest_rotation_fixes_rotations(r in vec3(3.0)) {
        let m = rodrigues(&r);
        assert_relative_eq!(nearest_rotation(&m).unwrap(), m, epsilon = 1e-12);
    }

    #[test]
    fn undistortion_inverts_distortion(x in -0.5..0.5f64, y in -0.5..0.5f64, k1 in -0.15..0.15f64, k2 in -0.15..0.15f64) {
        let p = Vector2::new(x, y);
        let back = undistort_normalized(k1, k2, distort_normalized(k1, k2, p)).unwrap();
        assert_relative_eq!(back, p, epsilon = 1e-9);
    }

    #[test]
    fn midpoint_is_order_symmetric(o1 in vec3(1.0), d1 in vec3(1.0), o2 in vec3(1.0), d2 in vec3(1.0)) {
        prop_assume!(d1.norm() > 0.1 && d2.norm() > 0.1);
        prop_assume!(d1.normalize().cross(&d2.normalize()).norm() > 0.05);
        let (a, b) = (Ray::new(o1, d1), Ray::new(o2, d2));
        let ab = triangulate_midpoint(&a, &b).unwrap();
        let ba = triangulate_midpoint(&b, &a).unwrap();
        prop_assert_eq!(ab.point, ba.point);
        prop_assert_eq!(ab.gap, ba.gap);
        prop_assert!(ab.gap >= 0.0);
    }

    #[test]
    fn dlt_recovers_exact_homographies(
        h in proptest::array::uniform8(-0.3..0.3f64),
    ) {
        let m = Matrix3::new(
            1.0 + h[0], h[1], 100.0 * h[2],
            h[3], 1.0 + h[4], 100.0 * h[5],
            1e-3 * h[6], 1e-3 * h[7], 1.0,
        );
        let truth = Homography::new(m).unwrap();
        let pairs: Vec<_> = (0..5)
            .flat_map(|j| (0..6).map(move |i| Vector2::new(i as f64 * 40.0, j as f64 * 30.0)))
            .map(|p| (p, truth.apply(&p)))
            .collect();
        let est = estimate_homography_dlt(&pairs).unwrap();
        for (p, q) in &pairs {
            assert_relative_eq!(est.apply(p), *q, epsilon = 1e-6);
        }
    }
}
