//! Calibration from planar views, view synthesis and reference fixtures.

use std::fs;

use anyhow::{Context, Result};
use nalgebra::Vector2;
use serde::Serialize;

use slscan::calibration::{
    calibrate_intrinsics, projector_view_from_doc, stereo_extrinsics, CalibrationResult, PlanarView,
};
use slscan::geometry::{Pose, SensorModel};
use slscan::io::{
    load_calibration, load_json, save_calibration, save_json, CalibrationDoc, PoseDoc, ViewsDoc,
};
use slscan::sim::{
    pinhole_reference_rig, reference_board_placements, reference_calibration_board, reference_plan,
    reference_rig, reference_scene, synthesize_views,
};

use crate::run::{sidecar, Stage};
use crate::{CalibMode, CalibrateArgs, FixturesArgs, SynthViewsArgs};

#[derive(Serialize)]
struct SensorDiagnostics {
    rms_px: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dropped_corners: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct ExtrinsicSpread {
    /// Baseline from each view's estimate, meters.
    baseline_m: Vec<f64>,
    /// Translation distance of each view's estimate from view 0, meters.
    translation_dev_m: Vec<f64>,
    /// Rotation angle between each view's estimate and view 0, degrees.
    rotation_dev_deg: Vec<f64>,
}

#[derive(Serialize, Default)]
struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    camera: Option<SensorDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    projector: Option<SensorDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extrinsics: Option<ExtrinsicSpread>,
}

fn rotation_angle_deg(a: &Pose, b: &Pose) -> f64 {
    let r = a.rotation().transpose() * b.rotation();
    ((r.trace() - 1.0) / 2.0)
        .clamp(-1.0, 1.0)
        .acos()
        .to_degrees()
}

fn camera_result(
    a: &CalibrateArgs,
    views: &[PlanarView],
) -> Result<(SensorModel, Option<CalibrationResult>)> {
    match &a.camera_calib {
        Some(p) => {
            let doc: CalibrationDoc =
                load_json(p).with_context(|| format!("loading {}", p.display()))?;
            let cam = doc
                .camera
                .ok_or_else(|| slscan::Error::MissingField("camera".into()))?;
            cam.validate()?;
            Ok((cam, None))
        }
        None => {
            let r = calibrate_intrinsics(views, a.camera_size)?;
            Ok((r.model, Some(r)))
        }
    }
}

pub fn calibrate(a: &CalibrateArgs) -> Result<()> {
    let mut stage = Stage::start("calibrate");
    let doc: ViewsDoc =
        load_json(&a.views).with_context(|| format!("loading views {}", a.views.display()))?;
    stage.input(&a.views);
    if let Some(p) = &a.camera_calib {
        stage.input(p);
    }
    let cam_views = doc
        .views
        .iter()
        .map(PlanarView::from_doc)
        .collect::<slscan::Result<Vec<_>>>()?;
    let (camera, cam_result) = camera_result(a, &cam_views)?;
    let mut diag = Diagnostics::default();
    let mut out = CalibrationDoc::default();
    if let Some(r) = &cam_result {
        diag.camera = Some(SensorDiagnostics {
            rms_px: r.rms_px.clone(),
            dropped_corners: None,
        });
    }
    if a.mode != CalibMode::Projector {
        out.camera = Some(camera);
    }

    if a.mode != CalibMode::Camera {
        let board_size = a.board_size.map(|(w, h)| Vector2::new(w, h));
        let proj = doc
            .views
            .iter()
            .map(|v| projector_view_from_doc(v, &camera, board_size))
            .collect::<slscan::Result<Vec<_>>>()?;
        let proj_views: Vec<_> = proj.iter().map(|p| p.view.clone()).collect();
        let r = calibrate_intrinsics(&proj_views, a.projector_size)?;
        diag.projector = Some(SensorDiagnostics {
            rms_px: r.rms_px.clone(),
            dropped_corners: Some(proj.iter().map(|p| p.dropped).collect()),
        });
        out.projector = Some(r.model);

        if a.mode == CalibMode::Stereo {
            let poses = cam_views
                .iter()
                .zip(&proj_views)
                .map(|(c, p)| stereo_extrinsics(c, &camera, p, &r.model))
                .collect::<slscan::Result<Vec<_>>>()?;
            let first = poses[0];
            diag.extrinsics = Some(ExtrinsicSpread {
                baseline_m: poses.iter().map(|p| p.translation().norm()).collect(),
                translation_dev_m: poses
                    .iter()
                    .map(|p| (p.translation() - first.translation()).norm())
                    .collect(),
                rotation_dev_deg: poses
                    .iter()
                    .map(|p| rotation_angle_deg(&first, p))
                    .collect(),
            });
            out.projector_to_camera = Some(PoseDoc::from_pose(&first));
        }
    }
    out.diagnostics = Some(serde_json::to_value(&diag)?);
    save_json(&out, &a.out)?;
    stage.output(&a.out);

    if let Some(m) = &out.camera {
        println!(
            "camera     fx {:.3} fy {:.3} cx {:.3} cy {:.3}",
            m.fx, m.fy, m.cx, m.cy
        );
    }
    if let Some(m) = &out.projector {
        println!(
            "projector  fx {:.3} fy {:.3} cx {:.3} cy {:.3}",
            m.fx, m.fy, m.cx, m.cy
        );
    }
    if let Some(p) = &out.projector_to_camera {
        let t = p.translation_m;
        let baseline = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
        println!(
            "baseline   {baseline:.4} m  t = [{:.4}, {:.4}, {:.4}]",
            t[0], t[1], t[2]
        );
    }
    stage.finish(a, sidecar(&a.out))
}

pub fn synth_views(a: &SynthViewsArgs) -> Result<()> {
    let mut stage = Stage::start("synth-views");
    let mut rig = load_calibration(&a.calib)
        .with_context(|| format!("loading calibration {}", a.calib.display()))?;
    stage.input(&a.calib);
    if !a.keep_distortion {
        rig.camera = rig.camera.undistorted();
    }
    let views = synthesize_views(
        &rig,
        &reference_calibration_board(),
        &reference_board_placements(),
    )?;
    save_json(&views, &a.out)?;
    stage.output(&a.out);
    println!("wrote {} views to {}", views.views.len(), a.out.display());
    stage.finish(a, sidecar(&a.out))
}

pub fn fixtures(a: &FixturesArgs) -> Result<()> {
    let mut stage = Stage::start("fixtures");
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let rig = reference_rig();
    let calib = a.out_dir.join("calibration.json");
    save_calibration(&rig, &calib)?;
    let scene = a.out_dir.join("scene.json");
    save_json(&reference_scene(), &scene)?;
    let plan = a.out_dir.join("plan.json");
    save_json(&reference_plan()?, &plan)?;
    let views = a.out_dir.join("views.json");
    save_json(
        &synthesize_views(
            &pinhole_reference_rig(),
            &reference_calibration_board(),
            &reference_board_placements(),
        )?,
        &views,
    )?;
    for p in [&calib, &scene, &plan, &views] {
        stage.output(p);
    }
    println!("wrote reference fixtures to {}", a.out_dir.display());
    stage.finish(a, a.out_dir.join("run.json"))
}
