//! Project file: inputs, user edits, parameters and cached stage records.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use cranial_core::contour::SurfaceContour;
use cranial_core::fit::{ViewCamera, DEFAULT_VIEWPORT};
use cranial_core::geom::stl::DEFAULT_WELD_TOLERANCE;
use cranial_core::implant::Smoothing;
use cranial_core::mirror::LandmarkPair;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const SCHEMA_VERSION: u32 = 1;
pub const PROJECT_FILE: &str = "project.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Segment,
    Mirror,
    Clip,
    Fit,
    Initial,
    Final,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 7] = [Stage::Segment, Stage::Mirror, Stage::Clip, Stage::Fit, Stage::Initial, Stage::Final, Stage::Evaluate];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Segment => "segment",
            Stage::Mirror => "mirror",
            Stage::Clip => "clip",
            Stage::Fit => "fit",
            Stage::Initial => "initial",
            Stage::Final => "final",
            Stage::Evaluate => "evaluate",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s)
    }

    /// The stage whose output this one consumes directly.
    pub fn upstream(self) -> Option<Stage> {
        match self {
            Stage::Segment => None,
            Stage::Mirror => Some(Stage::Segment),
            Stage::Clip => Some(Stage::Mirror),
            Stage::Fit => Some(Stage::Clip),
            Stage::Initial => Some(Stage::Fit),
            Stage::Final => Some(Stage::Initial),
            Stage::Evaluate => Some(Stage::Final),
        }
    }

    pub fn downstream(self) -> impl Iterator<Item = Stage> {
        Stage::ALL.into_iter().filter(move |s| *s > self)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Shell-with-hole skull generated in memory; see `cranial_core::fixtures::ShellDefect`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticShell {
    pub outer_radius: f64,
    pub thickness: f64,
    pub semi_y: f64,
    pub semi_z: f64,
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inputs {
    /// JSON volume header, relative to the project directory.
    Volume { path: String },
    /// Binary or ASCII STL skull mesh, relative to the project directory.
    Mesh { path: String },
    SyntheticShell(SyntheticShell),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentParams {
    pub threshold_lo: f64,
    /// No upper bound when absent.
    pub threshold_hi: Option<f64>,
    pub iso: f64,
    /// Keep only the component grown from the first segmented voxel.
    pub region_grow: bool,
}

impl Default for SegmentParams {
    fn default() -> Self {
        SegmentParams { threshold_lo: 0.0, threshold_hi: None, iso: 0.0, region_grow: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClipParams {
    /// Clipped pieces farther than this from every contour point are dropped, mm.
    pub component_radius: f64,
}

impl Default for ClipParams {
    fn default() -> Self {
        ClipParams { component_radius: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitParams {
    pub cull_back_faces: bool,
    /// Viewport for the default camera when the project has none.
    pub viewport: [u32; 2],
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams { cull_back_faces: true, viewport: DEFAULT_VIEWPORT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateParams {
    /// Rim gap tolerance as a multiple of the mean crania edge length.
    pub rim_gap_factor: f64,
    /// Bound on the 95th percentile of outer-skin to mirrored-model distances, mm.
    pub outer_p95_tolerance: f64,
}

impl Default for EvaluateParams {
    fn default() -> Self {
        EvaluateParams { rim_gap_factor: 2.0, outer_p95_tolerance: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    pub segment: SegmentParams,
    pub weld_tolerance: f64,
    pub clip: ClipParams,
    pub fit: FitParams,
    /// Configuration default, not a clinical recommendation.
    pub thickness: f64,
    pub smoothing: Smoothing,
    /// Overlap voxel size; the metrics default when absent.
    pub voxel_size: Option<f64>,
    pub evaluate: EvaluateParams,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            segment: SegmentParams::default(),
            weld_tolerance: DEFAULT_WELD_TOLERANCE,
            clip: ClipParams::default(),
            fit: FitParams::default(),
            thickness: 4.0,
            smoothing: Smoothing::default(),
            voxel_size: None,
            evaluate: EvaluateParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// Content hash of everything the stage read.
    pub key: String,
    /// Output files by role, relative to the project directory.
    pub files: BTreeMap<String, String>,
    #[serde(default)]
    pub data: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub schema_version: u32,
    pub id: String,
    pub inputs: Option<Inputs>,
    #[serde(default)]
    pub landmarks: Vec<LandmarkPair>,
    #[serde(default)]
    pub contour_defect: Option<SurfaceContour>,
    #[serde(default)]
    pub contour_inner_edge: Option<SurfaceContour>,
    #[serde(default)]
    pub camera: Option<ViewCamera>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub stage_outputs: BTreeMap<Stage, StageRecord>,
}

impl Project {
    pub fn new(id: impl Into<String>) -> Project {
        Project {
            schema_version: SCHEMA_VERSION,
            id: id.into(),
            inputs: None,
            landmarks: Vec::new(),
            contour_defect: None,
            contour_inner_edge: None,
            camera: None,
            params: Params::default(),
            stage_outputs: BTreeMap::new(),
        }
    }

    /// Relative paths of every file the project refers to.
    pub fn referenced_files(&self) -> Vec<String> {
        let mut out = Vec::new();
        match &self.inputs {
            Some(Inputs::Volume { path }) | Some(Inputs::Mesh { path }) => out.push(path.clone()),
            _ => {}
        }
        for rec in self.stage_outputs.values() {
            out.extend(rec.files.values().cloned());
        }
        out
    }
}

pub fn save_project(path: &Path, project: &Project) -> Result<(), ServiceError> {
    let text = serde_json::to_string_pretty(project)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text + "\n")?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_project(path: &Path) -> Result<Project, ServiceError> {
    let text = fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let found = raw.get("schema_version").and_then(|v| v.as_u64());
    if found != Some(SCHEMA_VERSION as u64) {
        return Err(ServiceError::SchemaVersion { found, expected: SCHEMA_VERSION });
    }
    let project: Project = serde_json::from_value(raw)?;
    let dir = project_dir(path);
    for rel in project.referenced_files() {
        let p = dir.join(&rel);
        if !p.is_file() {
            return Err(ServiceError::DanglingReference(p));
        }
    }
    Ok(project)
}

pub fn project_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}
