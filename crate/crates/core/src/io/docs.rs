//! JSON configuration documents: calibration, scene, measurement plan,
//! calibration views and pattern manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose, SensorModel, StereoRig};
use crate::pattern::PatternManifest;
use crate::sim::SceneSpec;

/// Orthonormality tolerance for rotations read from documents.
pub const DOC_ROTATION_TOL: f64 = 1e-6;

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text)
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(schema_error)
}

pub fn save_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Schema(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn schema_error(e: serde_json::Error) -> Error {
    let msg = e.to_string();
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            return Error::MissingField(rest[..end].to_string());
        }
    }
    Error::Schema(msg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseDoc {
    /// Row-major 3×3 rotation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<f64>>,
    /// Axis-angle alternative to `rotation` (radians).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rvec: Option<[f64; 3]>,
    pub translation_m: [f64; 3],
}

impl PoseDoc {
    pub fn from_pose(pose: &Pose) -> Self {
        let r = pose.rotation();
        let t = pose.translation();
        PoseDoc {
            rotation: Some(
                (0..3)
                    .flat_map(|i| (0..3).map(move |j| r[(i, j)]))
                    .collect(),
            ),
            rvec: None,
            translation_m: [t.x, t.y, t.z],
        }
    }

    pub fn to_pose(&self) -> Result<Pose> {
        let t = Vector3::from(self.translation_m);
        if !t.iter().all(|v| v.is_finite()) {
            return Err(Error::OutOfRange("non-finite translation".into()));
        }
        match (&self.rotation, &self.rvec) {
            (Some(r), _) => {
                if r.len() != 9 {
                    return Err(Error::Schema(format!(
                        "rotation needs 9 values, got {}",
                        r.len()
                    )));
                }
                let m = Matrix3::from_row_slice(r);
                Pose::new_approx(m, t, DOC_ROTATION_TOL)
            }
            (None, Some(rv)) => Ok(Pose::from_axis_angle(Vector3::from(*rv), t)),
            (None, None) => Err(Error::MissingField("rotation".into())),
        }
    }
}

/// Calibration document. Partial documents (one sensor only) are written by
/// single-sensor calibration; [`load_calibration`] requires every block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<SensorModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projector: Option<SensorModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projector_to_camera: Option<PoseDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<serde_json::Value>,
}

impl CalibrationDoc {
    pub fn from_rig(rig: &StereoRig) -> Self {
        CalibrationDoc {
            camera: Some(rig.camera),
            projector: Some(rig.projector),
            projector_to_camera: Some(PoseDoc::from_pose(&rig.projector_to_camera)),
            diagnostics: None,
        }
    }

    pub fn to_rig(&self) -> Result<StereoRig> {
        let camera = self
            .camera
            .ok_or_else(|| Error::MissingField("camera".into()))?;
        let projector = self
            .projector
            .ok_or_else(|| Error::MissingField("projector".into()))?;
        let pose = self
            .projector_to_camera
            .as_ref()
            .ok_or_else(|| Error::MissingField("projector_to_camera".into()))?;
        camera.validate()?;
        projector.validate()?;
        Ok(StereoRig {
            camera,
            projector,
            projector_to_camera: pose.to_pose()?,
        })
    }
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<StereoRig> {
    load_json::<CalibrationDoc>(path)?.to_rig()
}

pub fn save_calibration(rig: &StereoRig, path: impl AsRef<Path>) -> Result<()> {
    save_json(&CalibrationDoc::from_rig(rig), path)
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneSpec> {
    let scene: SceneSpec = load_json(path)?;
    scene.validate()?;
    Ok(scene)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthSpec {
    pub name: String,
    pub from: String,
    pub to: String,
    pub actual_m: f64,
}

/// Named feature points (camera pixels) and the lengths measured between them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub points: BTreeMap<String, [f64; 2]>,
    pub lengths: Vec<LengthSpec>,
}

impl MeasurementPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in &self.points {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::OutOfRange(format!("point {name} is not finite")));
            }
        }
        for l in &self.lengths {
            for end in [&l.from, &l.to] {
                if !self.points.contains_key(end) {
                    return Err(Error::UnknownPoint(end.clone()));
                }
            }
            if !(l.actual_m > 0.0) || !l.actual_m.is_finite() {
                return Err(Error::OutOfRange(format!(
                    "length {} must be positive, got {}",
                    l.name, l.actual_m
                )));
            }
        }
        Ok(())
    }

    pub fn pixel(&self, name: &str) -> Result<Vector2<f64>> {
        self.points
            .get(name)
            .map(|p| Vector2::new(p[0], p[1]))
            .ok_or_else(|| Error::UnknownPoint(name.to_string()))
    }
}

pub fn load_plan(path: impl AsRef<Path>) -> Result<MeasurementPlan> {
    let plan: MeasurementPlan = load_json(path)?;
    plan.validate()?;
    Ok(plan)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<PatternManifest> {
    let m: PatternManifest = load_json(path)?;
    m.validate()?;
    Ok(m)
}

/// One board placement as seen by the calibration procedure.
///
/// `pixels` are the camera observations of the printed corners. For
/// projector calibration, `projected_camera_pixels` are where the camera saw
/// the corners of a projected checkerboard whose projector pixels are
/// `projector_pixels`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewDoc {
    pub board_points_m: Vec<[f64; 2]>,
    pub pixels: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub projected_camera_pixels: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub projector_pixels: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewsDoc {
    pub views: Vec<ViewDoc>,
}
