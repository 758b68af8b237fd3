//! Closed-loop checks of the simulator, decoder and metrology together.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use slscan::decode::{decode_stack, phase_from_triplet, DecodeOptions};
use slscan::io::{
    load_calibration, load_json, load_plan, load_scene, read_point_map, read_real_map,
    save_calibration, write_point_map, write_real_map, CalibrationDoc, LengthSpec, MeasurementPlan,
};
use slscan::metrology::{evaluate_scans, fit_plane, measure_plan, plane_residuals, waviness};
use slscan::pattern::{sinusoid_value, PatternStack};
use slscan::reconstruct::{
    point_map_from_f32, point_map_to_f32, triangulate_map, DEFAULT_MAX_GAP_M,
};
use slscan::sim::{
    reference_plan, reference_rig, reference_scene, reference_stack_specs, render_scan,
    RenderOptions, ScanOutput, SceneSpec, REFERENCE_FRINGE_V,
};

fn stack() -> PatternStack {
    PatternStack::build(reference_stack_specs()).unwrap()
}

fn scan(scene: &SceneSpec) -> (ScanOutput, slscan::decode::StackDecode) {
    let stack = stack();
    let out = render_scan(&reference_rig(), scene, &stack, &RenderOptions::default()).unwrap();
    let dec = decode_stack(&out.captures, &stack.manifest, &DecodeOptions::default()).unwrap();
    (out, dec)
}

/// Columns are held to 0.1 px; rows use wider fringes, so the same phase
/// error is scaled by `w_h / w_v`.
#[test]
fn noiseless_correspondence_matches_truth() {
    let (out, dec) = scan(&reference_scene());
    let c = &dec.correspondence;
    let tol_y = 0.1 * c.fringe_h as f64 / c.fringe_v as f64;
    let (w, h) = c.xp.dims();
    let (mut total, mut close_x, mut close_y) = (0usize, 0usize, 0usize);
    for y in 0..h {
        for x in 0..w {
            let Some((u, v)) = c.at(x, y) else { continue };
            let (tx, ty) = (*out.truth.xp.get(x, y), *out.truth.yp.get(x, y));
            total += 1;
            close_x += usize::from((u - tx).abs() <= 0.1);
            close_y += usize::from((v - ty).abs() <= tol_y);
        }
    }
    assert!(total > 100_000, "{total} valid pixels");
    let (fx, fy) = (close_x as f64 / total as f64, close_y as f64 / total as f64);
    assert!(
        fx >= 0.99,
        "{close_x} of {total} columns within 0.1 px ({fx:.4})"
    );
    assert!(
        fy >= 0.99,
        "{close_y} of {total} rows within {tol_y} px ({fy:.4})"
    );
}

#[test]
fn three_square_span_measures_eighteen_centimeters() {
    let (out, dec) = scan(&reference_scene());
    let rec = triangulate_map(&reference_rig(), &dec.correspondence, DEFAULT_MAX_GAP_M).unwrap();
    let px = |i, j| out.truth.corner(i, j).unwrap().pixel.unwrap();
    let plan = MeasurementPlan {
        points: BTreeMap::from([("P".into(), px(3, 2)), ("Q".into(), px(6, 2))]),
        lengths: vec![LengthSpec {
            name: "PQ".into(),
            from: "P".into(),
            to: "Q".into(),
            actual_m: 0.18,
        }],
    };
    let got = measure_plan(&rec.points, &plan).unwrap();
    let err = (got[0].measured_m - 0.18).abs() / 0.18;
    assert!(err < 1e-3, "measured {} m", got[0].measured_m);
}

#[test]
fn identical_scans_have_zero_precision_deviation() {
    let (_, dec) = scan(&reference_scene());
    let rec = triangulate_map(&reference_rig(), &dec.correspondence, DEFAULT_MAX_GAP_M).unwrap();
    let report = evaluate_scans(
        &[rec.points.clone(), rec.points],
        &reference_plan().unwrap(),
    )
    .unwrap();
    assert_eq!(report.precision_percent, 0.0);
    assert_eq!(report.vs_p, vec![2; 6]);
}

/// Phase error of the three-step decoder when every pattern value `p` is
/// emitted as `255 (p/255)^gamma`, computed directly from the sinusoids.
fn gamma_phase_error(phi: f64, gamma: f64) -> f64 {
    let emit = |k: usize| 255.0 * (sinusoid_value(127.5, 127.5, k, phi) / 255.0).powf(gamma);
    let (i1, i2, i3) = (emit(0), emit(1), emit(2));
    let got = (3f64.sqrt() * (i1 - i3)).atan2(2.0 * i2 - i1 - i3);
    let lib = phase_from_triplet(i1, i2, i3);
    assert!(
        (got - lib).abs() < 1e-12,
        "decoder formula disagrees at {phi}"
    );
    (got - phi + PI).rem_euclid(TAU) - PI
}

/// A gamma curve distorts each sinusoid symmetrically in the same way, so the
/// three-step error is periodic in 2π/3: only harmonics 3, 6, 9, … of the
/// fringe frequency survive and ripple appears with period w/3.
#[test]
fn gamma_error_lives_at_three_times_fringe_frequency() {
    let n = 720;
    let e: Vec<f64> = (0..n)
        .map(|k| gamma_phase_error(TAU * k as f64 / n as f64, 2.2))
        .collect();
    let amp = |h: usize| {
        let (re, im) = e.iter().enumerate().fold((0.0, 0.0), |(re, im), (k, v)| {
            let a = TAU * (h * k) as f64 / n as f64;
            (re + v * a.cos(), im - v * a.sin())
        });
        2.0 * (re * re + im * im).sqrt() / n as f64
    };
    let third = amp(3);
    assert!(third > 0.05, "harmonic 3 amplitude {third}");
    for h in 1..30 {
        if h % 3 != 0 {
            assert!(amp(h) < 1e-10, "harmonic {h} amplitude {}", amp(h));
        } else {
            assert!(amp(h) <= third, "harmonic {h} exceeds harmonic 3");
        }
    }
}

#[test]
fn simulated_gamma_ripple_has_a_third_fringe_period() {
    let mut scene = reference_scene();
    scene.projector_gamma = 2.2;
    let (_, dec) = scan(&scene);
    let rec = triangulate_map(&reference_rig(), &dec.correspondence, DEFAULT_MAX_GAP_M).unwrap();
    let plane = fit_plane(&rec.valid_points()).unwrap();
    let res = plane_residuals(&rec.points, &dec.correspondence.xp, &plane).unwrap();
    let w = REFERENCE_FRINGE_V as f64;
    let wav = waviness(&res, w).unwrap();
    assert!(
        (wav.period_px - w / 3.0).abs() < 0.05 * w / 3.0,
        "period {}",
        wav.period_px
    );
}

#[test]
fn documents_and_maps_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let rig = reference_rig();
    let calib = dir.path().join("calibration.json");
    save_calibration(&rig, &calib).unwrap();
    let back = load_calibration(&calib).unwrap();
    assert_eq!(back.camera, rig.camera);
    assert_eq!(back.projector, rig.projector);
    let dt =
        (back.projector_to_camera.translation() - rig.projector_to_camera.translation()).norm();
    assert!(dt < 1e-12);
    let doc: CalibrationDoc = load_json(&calib).unwrap();
    assert!(doc.diagnostics.is_none());

    let scene_path = dir.path().join("scene.json");
    slscan::io::save_json(&reference_scene(), &scene_path).unwrap();
    assert_eq!(load_scene(&scene_path).unwrap(), reference_scene());

    let plan_path = dir.path().join("plan.json");
    slscan::io::save_json(&reference_plan().unwrap(), &plan_path).unwrap();
    assert_eq!(load_plan(&plan_path).unwrap(), reference_plan().unwrap());

    let (out, dec) = scan(&reference_scene());
    let xp = dir.path().join("xp.pfm");
    write_real_map(&dec.correspondence.xp, &xp).unwrap();
    let xp_back = read_real_map(&xp).unwrap();
    for (a, b) in xp_back.data().iter().zip(dec.correspondence.xp.data()) {
        assert!(
            a.is_nan() && b.is_nan() || (a - b).abs() <= b.abs() * 1e-6,
            "{a} vs {b}"
        );
    }
    let rec = triangulate_map(&rig, &dec.correspondence, DEFAULT_MAX_GAP_M).unwrap();
    let map_path = dir.path().join("map.pfm");
    write_point_map(&point_map_to_f32(&rec.points), &map_path).unwrap();
    let map = point_map_from_f32(&read_point_map(&map_path).unwrap());
    let a = evaluate_scans(&[rec.points], &reference_plan().unwrap()).unwrap();
    let b = evaluate_scans(&[map], &reference_plan().unwrap()).unwrap();
    assert!((a.accuracy_percent - b.accuracy_percent).abs() < 1e-3);
    assert!(out.truth.lit.count_valid() > 0);
}
