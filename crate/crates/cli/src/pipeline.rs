//! Pattern generation, simulation, decoding, triangulation and evaluation.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use slscan::decode::{decode_stack, CorrespondenceMap, DecodeOptions};
use slscan::io::{
    load_calibration, load_manifest, load_plan, load_scene, read_gray, read_point_map,
    read_real_map, save_json, write_gray, write_ply, write_point_map, write_real_map,
};
use slscan::metrology::{evaluate_scans, fit_plane, plane_residuals, waviness};
use slscan::pattern::{CodeKind, Orientation, PatternSpec, PatternStack, StackSpecs};
use slscan::reconstruct::{point_map_from_f32, point_map_to_f32, point_valid, triangulate_map};
use slscan::sim::{CornerTruth, GroundTruth, RenderOptions, ScanGeometry, PLAN_CORNERS};
use slscan::{Mask, RealMap};

use crate::run::{sidecar, Stage};
use crate::{
    CodeArg, DecodeArgs, EvaluateArgs, GenPatternsArgs, Metric, OrientationArg, SimulateArgs,
    TriangulateArgs, UsageError,
};

pub const MANIFEST: &str = "manifest.json";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn gen_patterns(a: &GenPatternsArgs) -> Result<()> {
    let mut stage = Stage::start("gen-patterns");
    let spec = |w: u32, o: Orientation| {
        let mut s = PatternSpec::new(a.width, a.height, w, o);
        s.i_dc = a.idc;
        s.i_mod = a.imod;
        s.code_kind = match a.code {
            CodeArg::Gray => CodeKind::Gray,
            CodeArg::Binary => CodeKind::PlainBinary,
        };
        s
    };
    let wh = a.fringe_width_h.unwrap_or(a.fringe_width);
    let specs = StackSpecs {
        vertical: (a.orientation != OrientationArg::H)
            .then(|| spec(a.fringe_width, Orientation::Vertical)),
        horizontal: (a.orientation != OrientationArg::V).then(|| spec(wh, Orientation::Horizontal)),
    };
    let stack = PatternStack::build(specs)?;
    create_dir(&a.out_dir)?;
    for (entry, img) in stack.manifest.images.iter().zip(&stack.images) {
        let p = a.out_dir.join(&entry.file);
        write_gray(img, &p)?;
        stage.output(p);
    }
    let mp = a.out_dir.join(MANIFEST);
    save_json(&stack.manifest, &mp)?;
    stage.output(&mp);
    println!(
        "wrote {} patterns to {}",
        stack.images.len(),
        a.out_dir.display()
    );
    stage.finish(a, a.out_dir.join("run.json"))
}

/// Reads `manifest` and one image per entry from `dir`.
fn load_stack(dir: &Path, manifest: &Path, stage: &mut Stage) -> Result<PatternStack> {
    let manifest = load_manifest(manifest)
        .with_context(|| format!("loading manifest {}", manifest.display()))?;
    let images = manifest
        .images
        .iter()
        .map(|e| {
            let p = dir.join(&e.file);
            stage.input(&p);
            read_gray(&p).with_context(|| format!("reading {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PatternStack { manifest, images })
}

#[derive(Serialize)]
struct GroundTruthDoc<'a> {
    corners: &'a [CornerTruth],
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let mut stage = Stage::start("simulate");
    let mut scene =
        load_scene(&a.scene).with_context(|| format!("loading scene {}", a.scene.display()))?;
    let rig = load_calibration(&a.calib)
        .with_context(|| format!("loading calibration {}", a.calib.display()))?;
    stage.input(&a.scene);
    stage.input(&a.calib);
    if let Some(s) = a.seed {
        scene.seed = s;
    }
    if let Some(s) = a.noise_sigma {
        scene.noise_sigma = s;
    }
    if let Some(g) = a.gamma {
        scene.projector_gamma = g;
    }
    scene.validate()?;
    let manifest_path = a.patterns.join(MANIFEST);
    stage.input(&manifest_path);
    let stack = load_stack(&a.patterns, &manifest_path, &mut stage)?;

    let geometry = ScanGeometry::compute(&rig, &scene)?;
    let opts = RenderOptions {
        blur_radius: a.blur_radius,
    };
    create_dir(&a.out_dir)?;
    for (k, (entry, pattern)) in stack.manifest.images.iter().zip(&stack.images).enumerate() {
        let img = geometry.render(&scene, pattern, k as u32, &opts)?;
        let p = a.out_dir.join(&entry.file);
        write_gray(&img, &p)?;
        stage.output(p);
    }
    let mp = a.out_dir.join(MANIFEST);
    save_json(&stack.manifest, &mp)?;
    stage.output(&mp);

    if a.emit_ground_truth {
        let truth = GroundTruth::compute(&geometry, &rig, &scene);
        for (name, map) in [
            ("truth_depth.pfm", &truth.depth),
            ("truth_xp.pfm", &truth.xp),
            ("truth_yp.pfm", &truth.yp),
        ] {
            let p = a.out_dir.join(name);
            write_real_map(map, &p)?;
            stage.output(p);
        }
        let p = a.out_dir.join("ground_truth.json");
        save_json(
            &GroundTruthDoc {
                corners: &truth.corners,
            },
            &p,
        )?;
        stage.output(&p);
        match truth.plan(&PLAN_CORNERS) {
            Ok(plan) => {
                let p = a.out_dir.join("plan.json");
                save_json(&plan, &p)?;
                stage.output(p);
            }
            Err(e) => log::warn!("no measurement plan for this board: {e}"),
        }
    }
    println!(
        "rendered {} captures to {}",
        stack.images.len(),
        a.out_dir.display()
    );
    stage.finish(a, a.out_dir.join("run.json"))
}

fn write_maps(dir: &Path, maps: &[(&str, &RealMap)], stage: &mut Stage) -> Result<()> {
    for (name, map) in maps {
        let p = dir.join(name);
        write_real_map(map, &p)?;
        stage.output(p);
    }
    Ok(())
}

fn code_map(codes: &slscan::decode::CodeMap) -> RealMap {
    codes.map(|c| c.map_or(f64::NAN, f64::from))
}

pub fn decode(a: &DecodeArgs) -> Result<()> {
    let mut stage = Stage::start("decode");
    let manifest = a
        .manifest
        .clone()
        .unwrap_or_else(|| a.captures.join(MANIFEST));
    stage.input(&manifest);
    let stack = load_stack(&a.captures, &manifest, &mut stage)?;
    let opts = DecodeOptions {
        m_min: a.m_min,
        median_radius: a.median_filter,
        jump_radius: a.jump_radius,
    };
    let dec = decode_stack(&stack.images, &stack.manifest, &opts)?;
    create_dir(&a.out_dir)?;
    let (v, h, c) = (&dec.vertical, &dec.horizontal, &dec.correspondence);
    write_maps(
        &a.out_dir,
        &[
            ("wrapped_v.pfm", &v.wrapped),
            ("wrapped_h.pfm", &h.wrapped),
            ("modulation_v.pfm", &v.modulation.amplitude),
            ("modulation_h.pfm", &h.modulation.amplitude),
            ("codes_v.pfm", &code_map(&v.codes)),
            ("codes_h.pfm", &code_map(&h.codes)),
            ("unwrapped_v.pfm", &v.unwrapped),
            ("unwrapped_h.pfm", &h.unwrapped),
            ("xp.pfm", &c.xp),
            ("yp.pfm", &c.yp),
        ],
        &mut stage,
    )?;
    let mask = a.out_dir.join("mask.pgm");
    write_gray(&c.valid.to_gray(), &mask)?;
    stage.output(&mask);
    println!(
        "decoded {} of {} pixels",
        c.valid.count_valid(),
        c.valid.len()
    );
    stage.finish(a, a.out_dir.join("run.json"))
}

fn load_correspondence(dir: &Path, stage: &mut Stage) -> Result<CorrespondenceMap> {
    let (xp_path, yp_path) = (dir.join("xp.pfm"), dir.join("yp.pfm"));
    let xp = read_real_map(&xp_path).with_context(|| format!("reading {}", xp_path.display()))?;
    let yp = read_real_map(&yp_path).with_context(|| format!("reading {}", yp_path.display()))?;
    stage.input(&xp_path);
    stage.input(&yp_path);
    if xp.dims() != yp.dims() {
        return Err(
            slscan::Error::DimensionMismatch("xp and yp maps differ in size".into()).into(),
        );
    }
    let (w, h) = xp.dims();
    let valid = Mask::from_fn(w, h, |x, y| {
        xp.get(x, y).is_finite() && yp.get(x, y).is_finite()
    });
    let run = load_fringe_widths(dir);
    Ok(CorrespondenceMap {
        xp,
        yp,
        valid,
        fringe_v: run.0,
        fringe_h: run.1,
    })
}

/// Fringe widths are informational here; read them from the decode run if present.
fn load_fringe_widths(dir: &Path) -> (u32, u32) {
    let run: Option<serde_json::Value> = slscan::io::load_json(dir.join("run.json")).ok();
    let manifest = run
        .as_ref()
        .and_then(|r| r["parameters"]["manifest"].as_str().map(PathBuf::from))
        .or_else(|| {
            run.as_ref()
                .and_then(|r| r["parameters"]["captures"].as_str())
                .map(|c| Path::new(c).join(MANIFEST))
        });
    manifest
        .and_then(|m| load_manifest(m).ok())
        .map(|m| {
            (
                m.spec.vertical.map_or(0, |s| s.fringe_width),
                m.spec.horizontal.map_or(0, |s| s.fringe_width),
            )
        })
        .unwrap_or((0, 0))
}

pub fn triangulate(a: &TriangulateArgs) -> Result<()> {
    if a.max_gap.is_nan() || a.max_gap < 0.0 {
        return Err(UsageError("--max-gap must be non-negative".into()).into());
    }
    let mut stage = Stage::start("triangulate");
    let rig = load_calibration(&a.calib)
        .with_context(|| format!("loading calibration {}", a.calib.display()))?;
    stage.input(&a.calib);
    let corr = load_correspondence(&a.correspondence, &mut stage)?;
    if corr.xp.dims() != (rig.camera.width as usize, rig.camera.height as usize) {
        return Err(slscan::Error::DimensionMismatch(format!(
            "correspondence is {}x{}, camera is {}x{}",
            corr.xp.width(),
            corr.xp.height(),
            rig.camera.width,
            rig.camera.height
        ))
        .into());
    }
    let rec = triangulate_map(&rig, &corr, a.max_gap)?;
    let cloud = rec.cloud();
    write_ply(&cloud, &a.out)?;
    stage.output(&a.out);
    if let Some(p) = &a.out_map {
        write_point_map(&point_map_to_f32(&rec.points), p)?;
        stage.output(p);
    }
    let points = rec.valid_points();
    match fit_plane(&points) {
        Ok(plane) => println!(
            "triangulated {} points; best-fit plane RMS {:.3} mm",
            points.len(),
            plane.rms * 1e3
        ),
        Err(_) => println!("triangulated {} points", points.len()),
    }
    stage.finish(a, sidecar(&a.out))
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut stage = Stage::start("evaluate");
    let plan = load_plan(&a.plan).with_context(|| format!("loading plan {}", a.plan.display()))?;
    stage.input(&a.plan);
    let maps = a
        .point_maps
        .iter()
        .map(|p| {
            stage.input(p);
            read_point_map(p)
                .map(|m| point_map_from_f32(&m))
                .with_context(|| format!("reading {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = evaluate_scans(&maps, &plan)?;
    let first = &maps[0];
    let points: Vec<_> = first
        .data()
        .iter()
        .filter(|p| point_valid(p))
        .map(|p| nalgebra::Vector3::from(*p))
        .collect();
    if let Ok(plane) = fit_plane(&points) {
        report.plane_rms_m = Some(plane.rms);
        if let Some(xp_path) = &a.xp {
            stage.input(xp_path);
            let xp =
                read_real_map(xp_path).with_context(|| format!("reading {}", xp_path.display()))?;
            let res = plane_residuals(first, &xp, &plane)?;
            report.waviness = Some(waviness(&res, a.fringe_width)?);
        }
    }
    save_json(&report, &a.out)?;
    stage.output(&a.out);
    if let Some(t) = &a.table {
        fs::write(t, report.length_table()).with_context(|| format!("writing {}", t.display()))?;
        stage.output(t);
    }
    if matches!(a.metric, Metric::Accuracy | Metric::All) {
        println!(
            "accuracy  {:.4} %  (N = {})",
            report.accuracy_percent, report.n
        );
    }
    if matches!(a.metric, Metric::Precision | Metric::All) {
        println!(
            "precision {:.4} %  (vp = {})",
            report.precision_percent, report.vp
        );
    }
    if let Some(rms) = report.plane_rms_m {
        println!("plane RMS {:.3} mm", rms * 1e3);
    }
    if let Some(w) = &report.waviness {
        println!(
            "waviness  period {:.2} px, amplitude {:.3} mm",
            w.period_px,
            w.amplitude_m * 1e3
        );
    }
    stage.finish(a, sidecar(&a.out))
}
