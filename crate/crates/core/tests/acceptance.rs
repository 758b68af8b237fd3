//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints exactly one PASS/FAIL line.

use std::f64::consts::{PI, TAU};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slscan::calibration::{
    calibrate_intrinsics, projector_view_from_doc, stereo_extrinsics, PlanarView,
};
use slscan::decode::{decode_stack, modulation_and_mask, phase_from_triplet, DecodeOptions};
use slscan::geometry::{triangulate_midpoint, Ray, StereoRig};
use slscan::io::{
    decode_pfm, decode_pfm3, decode_pgm, encode_pfm, encode_pfm3, encode_pgm, read_ply, sentinel,
    write_ply, Float3Image, FloatImage, PointCloud,
};
use slscan::metrology::{
    accuracy_metric, evaluate_scans, fit_plane, plane_residuals, precision_metric, waviness,
    PlaneFit,
};
use slscan::pattern::{full_pattern_stack, gray_decode, gray_encode, sinusoid_value, PatternStack};
use slscan::reconstruct::{triangulate_map, Reconstruction, DEFAULT_MAX_GAP_M};
use slscan::sim::{
    pinhole_reference_rig, reference_board_placements, reference_calibration_board, reference_rig,
    reference_scene, reference_stack_specs, synthesize_views, GroundTruth, RenderOptions,
    ScanGeometry, SceneSpec, PLAN_CORNERS, REFERENCE_FRINGE_V,
};
use slscan::{GrayImage, RealMap};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = fn() -> Outcome;

/// Criteria that cannot hold under the stated model. They still run and
/// print FAIL; an unexpected pass is reported as an error so this list stays
/// honest.
const EXPECTED_FAILURES: [(usize, &str); 1] = [(
    7,
    "three-step decoding maps projector nonlinearity to phase error at 3x the fringe \
     frequency, so the dominant period is w/3, outside the window",
)];

fn main() -> ExitCode {
    let checks: [(&str, Check); 10] = [
        ("decode round trip", decode_round_trip),
        ("wrapped phase accuracy", wrapped_phase_accuracy),
        ("gray code properties", gray_code_properties),
        ("calibration recovery", calibration_recovery),
        ("noiseless end-to-end scan", noiseless_scan),
        ("noisy repeatability", noisy_repeatability),
        ("waviness reproduction", waviness_reproduction),
        ("triangulation oracle", triangulation_oracle),
        ("metric formulas", metric_formulas),
        ("format round trips", format_round_trips),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let expected = EXPECTED_FAILURES
            .iter()
            .find(|(n, _)| *n == i + 1)
            .map(|e| e.1);
        let status = match (o.pass, expected) {
            (true, None) => "PASS",
            (false, None) => "FAIL",
            (false, Some(_)) => "FAIL (expected)",
            (true, Some(_)) => "PASS (unexpected)",
        };
        println!(
            "criterion {:>2} {:<28} {status}  {} [{:.2}s]",
            i + 1,
            name,
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if let (false, Some(why)) = (o.pass, expected) {
            println!("             known conflict: {why}");
        }
        failed += usize::from(o.pass == expected.is_some());
    }
    if failed > 0 {
        println!("{failed} acceptance criterion(s) did not match expectations");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn within(limit: Duration, start: Instant) -> bool {
    start.elapsed() < limit
}

/// Patterns fed straight to the decoder: camera pixel (x, y) sees projector
/// pixel (x, y), so the true coordinates are the pixel indices.
fn decode_round_trip() -> Outcome {
    let start = Instant::now();
    let stack = full_pattern_stack_ref();
    let dec = decode_stack(&stack.images, &stack.manifest, &DecodeOptions::default()).unwrap();
    let c = &dec.correspondence;
    let (wv, wh) = (
        dec.vertical.spec.fringe_width as usize,
        dec.horizontal.spec.fringe_width as usize,
    );
    let boundary = |coord: usize, w: usize| coord.is_multiple_of(w) || coord % w == w - 1;
    let (mut worst, mut checked, mut bad) = (0.0f64, 0usize, 0usize);
    for y in 0..768 {
        for x in 0..1024 {
            if boundary(x, wv) || boundary(y, wh) {
                continue;
            }
            checked += 1;
            let err = match c.at(x, y) {
                Some((u, v)) => (u - x as f64).abs().max((v - y as f64).abs()),
                None => f64::INFINITY,
            };
            worst = worst.max(err);
            bad += usize::from(err.is_nan() || err > 0.15);
        }
    }
    let fast = within(Duration::from_secs(10), start);
    outcome(
        bad == 0 && fast,
        format!("max |Δ| {worst:.4} px over {checked} non-boundary pixels, {bad} over 0.15 px"),
    )
}

fn full_pattern_stack_ref() -> PatternStack {
    let specs = reference_stack_specs();
    full_pattern_stack(&specs.vertical.unwrap(), &specs.horizontal.unwrap()).unwrap()
}

fn wrapped_phase_accuracy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let phi: f64 = rng.random_range(-PI..PI);
        let i = [0, 1, 2].map(|k| {
            sinusoid_value(128.0, 100.0, k, phi)
                .round()
                .clamp(0.0, 255.0)
        });
        let got = phase_from_triplet(i[0], i[1], i[2]);
        let d = (got - phi + PI).rem_euclid(TAU) - PI;
        worst = worst.max(d.abs());
    }
    let flat = GrayImage::filled(1, 1, 128);
    let m = modulation_and_mask(&flat, &flat, &flat, 0.0).unwrap();
    let flagged = !*m.mask.get(0, 0) && phase_from_triplet(128.0, 128.0, 128.0).is_nan();
    outcome(
        worst <= 0.012 && flagged,
        format!("max |Δφ| {worst:.5} rad; zero modulation flagged invalid: {flagged}"),
    )
}

fn gray_code_properties() -> Outcome {
    let adjacent = (1..=10u32)
        .all(|k| (1..(1u32 << k)).all(|n| (gray_encode(n) ^ gray_encode(n - 1)).count_ones() == 1));
    let round_trip = (0..=65_536u32).all(|n| gray_decode(gray_encode(n)) == n);
    outcome(
        adjacent && round_trip,
        format!("adjacency k<=10: {adjacent}; round trip 0..=65536: {round_trip}"),
    )
}

fn rel(got: f64, want: f64) -> f64 {
    ((got - want) / want).abs()
}

fn calibration_recovery() -> Outcome {
    let start = Instant::now();
    let rig = pinhole_reference_rig();
    let board = reference_calibration_board();
    let docs = synthesize_views(&rig, &board, &reference_board_placements()).unwrap();
    let cam_views: Vec<_> = docs
        .views
        .iter()
        .map(|d| PlanarView::from_doc(d).unwrap())
        .collect();
    let cam = calibrate_intrinsics(&cam_views, (rig.camera.width, rig.camera.height)).unwrap();
    let c = cam.model;
    let cam_err = [
        rel(c.fx, rig.camera.fx),
        rel(c.fy, rig.camera.fy),
        rel(c.cx, rig.camera.cx),
        rel(c.cy, rig.camera.cy),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let proj_views: Vec<_> = docs
        .views
        .iter()
        .map(|d| {
            projector_view_from_doc(d, &c, Some(board.size_m()))
                .unwrap()
                .view
        })
        .collect();
    let proj =
        calibrate_intrinsics(&proj_views, (rig.projector.width, rig.projector.height)).unwrap();
    let p = proj.model;
    let proj_err = [
        rel(p.fx, rig.projector.fx),
        rel(p.fy, rig.projector.fy),
        rel(p.cx, rig.projector.cx),
        rel(p.cy, rig.projector.cy),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let extr = stereo_extrinsics(&cam_views[0], &c, &proj_views[0], &p).unwrap();
    let baseline_err = (extr.translation().norm() - rig.baseline()).abs();
    let fast = within(Duration::from_secs(5), start);
    outcome(
        cam_err < 1e-4 && proj_err < 5e-4 && baseline_err < 1e-6 && fast,
        format!(
            "camera rel err {cam_err:.2e} (<1e-4), projector {proj_err:.2e} (<5e-4), baseline err {baseline_err:.2e} m (<1e-6)"
        ),
    )
}

/// One simulated scan of `scene`, decoded and triangulated.
struct Scan {
    rec: Reconstruction,
    xp: RealMap,
}

struct Bench {
    rig: StereoRig,
    stack: PatternStack,
}

impl Bench {
    fn new() -> Self {
        Bench {
            rig: reference_rig(),
            stack: full_pattern_stack_ref(),
        }
    }

    fn geometry(&self, scene: &SceneSpec) -> ScanGeometry {
        ScanGeometry::compute(&self.rig, scene).unwrap()
    }

    fn scan(&self, geom: &ScanGeometry, scene: &SceneSpec) -> Scan {
        let captures: Vec<_> = self
            .stack
            .images
            .iter()
            .enumerate()
            .map(|(k, p)| {
                geom.render(scene, p, k as u32, &RenderOptions::default())
                    .unwrap()
            })
            .collect();
        let dec = decode_stack(&captures, &self.stack.manifest, &DecodeOptions::default()).unwrap();
        let rec = triangulate_map(&self.rig, &dec.correspondence, DEFAULT_MAX_GAP_M).unwrap();
        Scan {
            rec,
            xp: dec.correspondence.xp,
        }
    }
}

fn plane_of(scan: &Scan) -> PlaneFit {
    fit_plane(&scan.rec.valid_points()).unwrap()
}

fn noiseless_scan() -> Outcome {
    let start = Instant::now();
    let bench = Bench::new();
    let scene = reference_scene();
    let geom = bench.geometry(&scene);
    let truth = GroundTruth::compute(&geom, &bench.rig, &scene);
    let plan = truth.plan(&PLAN_CORNERS).unwrap();
    let scan = bench.scan(&geom, &scene);
    let plane = plane_of(&scan);
    let report = evaluate_scans(std::slice::from_ref(&scan.rec.points), &plan).unwrap();
    let fast = within(Duration::from_secs(120), start);
    outcome(
        plane.rms < 0.5e-3 && report.accuracy_percent < 0.1 && report.n == 6 && fast,
        format!(
            "plane RMS {:.3} mm (<0.5), accuracy {:.4}% over {} lengths (<0.1%), {} points",
            plane.rms * 1e3,
            report.accuracy_percent,
            report.n,
            scan.rec.valid.count_valid()
        ),
    )
}

fn noisy_repeatability() -> Outcome {
    let bench = Bench::new();
    let mut scene = reference_scene();
    scene.noise_sigma = 2.0;
    let geom = bench.geometry(&scene);
    let plan = GroundTruth::compute(&geom, &bench.rig, &scene)
        .plan(&PLAN_CORNERS)
        .unwrap();
    let maps: Vec<_> = (0..10)
        .map(|s| {
            scene.seed = 100 + s;
            bench.scan(&geom, &scene).rec.points
        })
        .collect();
    let report = evaluate_scans(&maps, &plan).unwrap();
    outcome(
        report.accuracy_percent < 1.0 && report.precision_percent < 1.0,
        format!(
            "accuracy {:.4}% (<1.0), precision {:.4}% (<1.0) over 10 scans at sigma 2",
            report.accuracy_percent, report.precision_percent
        ),
    )
}

fn waviness_reproduction() -> Outcome {
    let bench = Bench::new();
    let mut scene = reference_scene();
    let geom = bench.geometry(&scene);
    let measure = |scene: &SceneSpec| {
        let scan = bench.scan(&geom, scene);
        let plane = plane_of(&scan);
        let res = plane_residuals(&scan.rec.points, &scan.xp, &plane).unwrap();
        (
            waviness(&res, REFERENCE_FRINGE_V as f64).unwrap(),
            plane.rms,
        )
    };
    let (base, _) = measure(&scene);
    scene.projector_gamma = 2.2;
    let (wavy, rms) = measure(&scene);
    let w = REFERENCE_FRINGE_V as f64;
    let period_ok = (0.45 * w..=1.1 * w).contains(&wavy.period_px);
    let amp_ok = wavy.amplitude_m >= 5.0 * base.amplitude_m;
    outcome(
        period_ok && amp_ok,
        format!(
            "gamma 2.2: period {:.2} px (want [{:.1}, {:.1}]), amplitude {:.3} mm vs gamma 1 {:.4} mm ({:.1}x, want >=5x), plane RMS {:.3} mm",
            wavy.period_px,
            0.45 * w,
            1.1 * w,
            wavy.amplitude_m * 1e3,
            base.amplitude_m * 1e3,
            wavy.amplitude_m / base.amplitude_m,
            rms * 1e3
        ),
    )
}

fn triangulation_oracle() -> Outcome {
    let a = Ray::new(Vector3::zeros(), Vector3::z());
    let b = Ray::new(Vector3::new(1.0, 1.0, 0.0), Vector3::new(-1.0, 0.0, 1.0));
    let ab = triangulate_midpoint(&a, &b).unwrap();
    let ba = triangulate_midpoint(&b, &a).unwrap();
    let err = (ab.point - Vector3::new(0.0, 0.5, 1.0)).norm();
    let gap_err = (ab.gap - 1.0).abs();
    let symmetric = ab.point == ba.point && ab.gap == ba.gap;
    outcome(
        err <= 1e-12 && gap_err <= 1e-12 && symmetric,
        format!("midpoint err {err:.1e}, gap err {gap_err:.1e}, order-symmetric: {symmetric}"),
    )
}

fn metric_formulas() -> Outcome {
    let acc = accuracy_metric(&[(100.0, 101.0), (200.0, 198.0)]).unwrap();
    let prec = precision_metric(&[vec![99.0, 101.0]]).unwrap();
    let acc0 = accuracy_metric(&[(0.18, 0.18), (0.36, 0.36)]).unwrap();
    let prec0 = precision_metric(&[vec![0.3; 10], vec![0.7; 3]]).unwrap();
    outcome(
        acc == 1.0 && prec == 1.0 && acc0 == 0.0 && prec0 == 0.0,
        format!("accuracy {acc}, precision {prec}, zero cases {acc0} / {prec0}"),
    )
}

fn format_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut ok = true;
    for _ in 0..20 {
        let (w, h) = (rng.random_range(1..40usize), rng.random_range(1..40usize));
        let gray = GrayImage::from_fn(w, h, |_, _| rng.random());
        ok &= decode_pgm(&encode_pgm(&gray)).unwrap() == gray;

        let real = FloatImage::from_fn(w, h, |_, _| {
            if rng.random_bool(0.2) {
                sentinel()
            } else {
                rng.random_range(-1e6f32..1e6)
            }
        });
        let back = decode_pfm(&encode_pfm(&real).unwrap()).unwrap();
        ok &= back
            .data()
            .iter()
            .zip(real.data())
            .all(|(a, b)| a.to_bits() == b.to_bits());

        let pts = Float3Image::from_fn(w, h, |_, _| {
            if rng.random_bool(0.2) {
                [sentinel(); 3]
            } else {
                [rng.random(), rng.random(), rng.random_range(0.5f32..3.0)]
            }
        });
        let back = decode_pfm3(&encode_pfm3(&pts).unwrap()).unwrap();
        ok &= back
            .data()
            .iter()
            .zip(pts.data())
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));

        let cloud = PointCloud {
            points: (0..rng.random_range(0..50))
                .map(|_| {
                    [
                        rng.random_range(-5.0..5.0),
                        rng.random_range(-5.0..5.0),
                        rng.random_range(0.1..5.0),
                    ]
                })
                .collect(),
            pixels: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        write_ply(&cloud, &path).unwrap();
        ok &= read_ply(&path).unwrap().points == cloud.points;
    }
    outcome(
        ok,
        format!("20 randomized PGM/PFM/PF/PLY round trips bit-exact: {ok}"),
    )
}
