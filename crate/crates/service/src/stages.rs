//! Stage sequencing over a project directory: gating, content-hash caching,
//! invalidation and the stage bodies themselves.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cranial_core::contour::{build_implicit, clip_mesh_by_implicit, components_near, Keep, SurfaceContour};
use cranial_core::fit::{fit_patch, FittedPatch, ViewCamera};
use cranial_core::fixtures::ShellDefect;
use cranial_core::geom::stl::{read_stl, write_stl_binary};
use cranial_core::geom::{MeshStats, TriMesh};
use cranial_core::implant::{build_final_implant, build_initial_implant, polyline_gap, ImplantModel};
use cranial_core::metrics::{distance_field, MetricsError, Summary};
use cranial_core::mirror::{fit_median_plane, mirror_model};
use cranial_core::volume::{
    extract_isosurface, first_set_voxel, read_volume, region_grow, threshold_segment, Connectivity, ScalarVolume,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::ServiceError;
use crate::project::{load_project, project_dir, save_project, EvaluateParams, Inputs, Project, Stage, StageRecord};

/// Role, file name under `stages/`, contents.
type StageFile = (&'static str, String, Vec<u8>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStatus {
    pub valid: bool,
    pub runnable: bool,
    /// Why the stage cannot run, when it cannot.
    pub blocked_by: Option<String>,
}

/// A project file together with the directory its outputs live in.
#[derive(Debug, Clone)]
pub struct Workspace {
    path: PathBuf,
    dir: PathBuf,
    pub project: Project,
}

impl Workspace {
    pub fn open(path: &Path) -> Result<Workspace, ServiceError> {
        let project = load_project(path)?;
        Ok(Workspace { path: path.to_path_buf(), dir: project_dir(path), project })
    }

    /// Writes `project` to `path` and opens it.
    pub fn create(path: &Path, project: Project) -> Result<Workspace, ServiceError> {
        save_project(path, &project)?;
        Ok(Workspace { path: path.to_path_buf(), dir: project_dir(path), project })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn save(&self) -> Result<(), ServiceError> {
        save_project(&self.path, &self.project)
    }

    fn require(&self, stage: Stage) -> Result<(), ServiceError> {
        let p = &self.project;
        let missing = |what| Err(ServiceError::MissingInput { stage, what });
        match stage {
            Stage::Segment if p.inputs.is_none() => missing("inputs"),
            Stage::Mirror if p.landmarks.is_empty() => missing("landmarks"),
            Stage::Clip | Stage::Fit if p.contour_defect.is_none() => missing("contour_defect"),
            Stage::Final | Stage::Evaluate if p.contour_inner_edge.is_none() => missing("contour_inner_edge"),
            _ => Ok(()),
        }
    }

    fn input_digest(&self, inputs: &Inputs) -> Result<String, ServiceError> {
        let mut h = Sha256::new();
        match inputs {
            Inputs::Mesh { path } => {
                let p = self.dir.join(path);
                h.update(fs::read(&p).map_err(|e| ServiceError::io(&p, e))?);
            }
            Inputs::Volume { path } => {
                let p = self.dir.join(path);
                let text = fs::read(&p).map_err(|e| ServiceError::io(&p, e))?;
                h.update(&text);
                if let Ok(header) = serde_json::from_slice::<cranial_core::volume::VolumeHeader>(&text) {
                    let raw = project_dir(&p).join(header.data_file);
                    h.update(fs::read(&raw).map_err(|e| ServiceError::io(&raw, e))?);
                }
            }
            Inputs::SyntheticShell(s) => h.update(serde_json::to_vec(s)?),
        }
        Ok(hex::encode(h.finalize()))
    }

    /// Content hash of everything `stage` would read, given the current project.
    pub fn stage_key(&self, stage: Stage) -> Result<String, ServiceError> {
        self.require(stage)?;
        let p = &self.project;
        let own = match stage {
            Stage::Segment => {
                let inputs = p.inputs.as_ref().expect("checked");
                json!({ "inputs": inputs, "digest": self.input_digest(inputs)?, "segment": p.params.segment, "weld": p.params.weld_tolerance })
            }
            Stage::Mirror => json!({ "landmarks": p.landmarks }),
            Stage::Clip => json!({ "contour": p.contour_defect, "clip": p.params.clip }),
            Stage::Fit => json!({ "contour": p.contour_defect, "camera": p.camera, "fit": p.params.fit }),
            Stage::Initial => json!({ "thickness": p.params.thickness, "smoothing": p.params.smoothing }),
            Stage::Final => json!({ "contour": p.contour_inner_edge, "thickness": p.params.thickness }),
            Stage::Evaluate => json!({ "contour": p.contour_inner_edge, "evaluate": p.params.evaluate, "voxel": p.params.voxel_size }),
        };
        let upstream = match stage.upstream() {
            Some(u) => Some(self.stage_key(u)?),
            None => None,
        };
        let mut h = Sha256::new();
        h.update(stage.name());
        h.update(serde_json::to_vec(&json!({ "own": own, "upstream": upstream }))?);
        Ok(hex::encode(h.finalize()))
    }

    /// Cached output exists, matches the current inputs and all upstream stages are valid.
    pub fn is_valid(&self, stage: Stage) -> bool {
        let Some(rec) = self.project.stage_outputs.get(&stage) else { return false };
        if rec.files.values().any(|f| !self.dir.join(f).is_file()) {
            return false;
        }
        if stage.upstream().is_some_and(|u| !self.is_valid(u)) {
            return false;
        }
        self.stage_key(stage).is_ok_and(|k| k == rec.key)
    }

    /// Own inputs first, then the upstream stage.
    pub fn check_runnable(&self, stage: Stage) -> Result<(), ServiceError> {
        self.require(stage)?;
        if let Some(u) = stage.upstream() {
            if !self.is_valid(u) {
                return Err(ServiceError::UpstreamInvalid { stage, needs: u });
            }
        }
        Ok(())
    }

    pub fn status(&self) -> BTreeMap<Stage, StageStatus> {
        Stage::ALL
            .into_iter()
            .map(|s| {
                let blocked = self.check_runnable(s).err().map(|e| e.to_string());
                (s, StageStatus { valid: self.is_valid(s), runnable: blocked.is_none(), blocked_by: blocked })
            })
            .collect()
    }

    /// Drops records (and their files) that no longer match the project.
    pub fn prune_stale(&mut self) {
        let stale: Vec<Stage> = self.project.stage_outputs.keys().copied().filter(|&s| !self.is_valid(s)).collect();
        for s in stale {
            if let Some(rec) = self.project.stage_outputs.remove(&s) {
                for f in rec.files.values() {
                    let _ = fs::remove_file(self.dir.join(f));
                }
            }
        }
    }

    /// Applies an edit, invalidates what it affects and saves.
    pub fn edit(&mut self, f: impl FnOnce(&mut Project)) -> Result<(), ServiceError> {
        f(&mut self.project);
        self.prune_stale();
        self.save()
    }

    pub fn stage_file(&self, stage: Stage, role: &str) -> Option<PathBuf> {
        self.project.stage_outputs.get(&stage)?.files.get(role).map(|f| self.dir.join(f))
    }

    pub fn stage_mesh(&self, stage: Stage) -> Result<TriMesh, ServiceError> {
        if !self.is_valid(stage) {
            return Err(ServiceError::UpstreamInvalid { stage, needs: stage });
        }
        let path = self.stage_file(stage, "mesh").ok_or(ServiceError::UpstreamInvalid { stage, needs: stage })?;
        let bytes = fs::read(&path).map_err(|e| ServiceError::io(&path, e))?;
        read_stl(&bytes, self.project.params.weld_tolerance).map_err(|e| ServiceError::stage(stage, e))
    }

    fn write_output(&self, name: &str, bytes: &[u8]) -> Result<String, ServiceError> {
        let rel = format!("stages/{name}");
        let path = self.dir.join(&rel);
        fs::create_dir_all(path.parent().expect("has parent"))?;
        fs::write(&path, bytes).map_err(|e| ServiceError::io(&path, e))?;
        Ok(rel)
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<&StageRecord, ServiceError> {
        self.check_runnable(stage)?;
        let key = self.stage_key(stage)?;
        let (files, data) = self.compute(stage)?;
        let mut map = BTreeMap::new();
        for (role, name, bytes) in files {
            map.insert(role.to_string(), self.write_output(&name, &bytes)?);
        }
        self.project.stage_outputs.insert(stage, StageRecord { key, files: map, data });
        self.prune_stale();
        self.save()?;
        Ok(&self.project.stage_outputs[&stage])
    }

    /// Runs every stage that is not already valid, in order.
    pub fn run_all(&mut self) -> Result<(), ServiceError> {
        for s in Stage::ALL {
            if !self.is_valid(s) {
                self.run_stage(s)?;
            }
        }
        Ok(())
    }

    fn compute(&self, stage: Stage) -> Result<(Vec<StageFile>, serde_json::Value), ServiceError> {
        let p = &self.project;
        let err = |e: &dyn std::fmt::Display| ServiceError::stage(stage, e);
        let mesh_out = |m: &TriMesh| ("mesh", format!("{stage}.stl"), write_stl_binary(m));
        match stage {
            Stage::Segment => {
                let crania = self.segment()?;
                let data = json!({ "stats": crania.stats(), "vertices": crania.vertices().len(), "triangles": crania.triangles().len() });
                Ok((vec![mesh_out(&crania)], data))
            }
            Stage::Mirror => {
                let crania = self.stage_mesh(Stage::Segment)?;
                let fit = fit_median_plane(&p.landmarks).map_err(|e| err(&e))?;
                let mirrored = mirror_model(&crania, &fit);
                Ok((vec![mesh_out(&mirrored)], serde_json::to_value(&fit)?))
            }
            Stage::Clip => {
                let clipped = self.clip()?;
                Ok((vec![mesh_out(&clipped)], json!({ "stats": clipped.stats(), "triangles": clipped.triangles().len() })))
            }
            Stage::Fit => {
                let patch = self.fit()?;
                let data = json!({ "camera": patch.camera, "vertices": patch.mesh.vertices().len(), "triangles": patch.mesh.triangles().len() });
                Ok((vec![mesh_out(&patch.mesh)], data))
            }
            Stage::Initial => {
                let model = self.rebuild_initial()?;
                Ok((vec![mesh_out(&model.solid)], serde_json::to_value(&model)?))
            }
            Stage::Final => {
                let model = self.rebuild_final()?;
                let sidecar = serde_json::to_vec_pretty(&model.provenance)?;
                Ok((vec![mesh_out(&model.solid), ("provenance", "final.provenance.json".into(), sidecar)], serde_json::to_value(&model)?))
            }
            Stage::Evaluate => {
                let model = self.rebuild_final()?;
                let crania = self.stage_mesh(Stage::Segment)?;
                let mirrored = self.stage_mesh(Stage::Mirror)?;
                let edge = p.contour_inner_edge.as_ref().expect("checked");
                let report = evaluate_implant(&model, &crania, &mirrored, edge, &p.params.evaluate).map_err(|e| err(&e))?;
                let bytes = serde_json::to_vec_pretty(&report)?;
                Ok((vec![("report", "evaluate.json".into(), bytes)], serde_json::to_value(&report)?))
            }
        }
    }

    fn segment(&self) -> Result<TriMesh, ServiceError> {
        let stage = Stage::Segment;
        let p = &self.project;
        let vol: ScalarVolume = match p.inputs.as_ref().expect("checked") {
            Inputs::Mesh { path } => {
                let full = self.dir.join(path);
                let bytes = fs::read(&full).map_err(|e| ServiceError::io(&full, e))?;
                return read_stl(&bytes, p.params.weld_tolerance).map_err(|e| ServiceError::stage(stage, e));
            }
            Inputs::Volume { path } => read_volume(&self.dir.join(path)).map_err(|e| ServiceError::stage(stage, e))?,
            Inputs::SyntheticShell(s) => {
                let shell = ShellDefect { outer_radius: s.outer_radius, thickness: s.thickness, semi_y: s.semi_y, semi_z: s.semi_z };
                shell.volume(s.spacing)
            }
        };
        let sp = p.params.segment;
        let mut mask = threshold_segment(&vol, sp.threshold_lo, sp.threshold_hi.unwrap_or(f64::INFINITY))
            .map_err(|e| ServiceError::stage(stage, e))?;
        if sp.region_grow {
            let seed = first_set_voxel(&mask).ok_or_else(|| ServiceError::stage(stage, "threshold selects no voxels"))?;
            mask = region_grow(&mask, seed, Connectivity::TwentySix).map_err(|e| ServiceError::stage(stage, e))?;
        }
        let mesh = extract_isosurface(&vol, sp.iso, Some(&mask)).map_err(|e| ServiceError::stage(stage, e))?;
        if mesh.is_empty() {
            return Err(ServiceError::stage(stage, "isosurface is empty"));
        }
        Ok(mesh)
    }

    fn clip(&self) -> Result<TriMesh, ServiceError> {
        let stage = Stage::Clip;
        let contour = self.project.contour_defect.as_ref().expect("checked");
        let mirrored = self.stage_mesh(Stage::Mirror)?;
        let region = build_implicit(contour).map_err(|e| ServiceError::stage(stage, e))?;
        let inside = clip_mesh_by_implicit(&mirrored, &region, Keep::Inside);
        let kept = components_near(&inside, contour, self.project.params.clip.component_radius);
        if kept.is_empty() {
            return Err(ServiceError::stage(stage, "contour_defect encloses no part of the mirrored model"));
        }
        Ok(kept)
    }

    fn camera(&self, contour: &SurfaceContour) -> Result<ViewCamera, ServiceError> {
        match self.project.camera {
            Some(c) => Ok(c),
            None => {
                let region = build_implicit(contour).map_err(|e| ServiceError::stage(Stage::Fit, e))?;
                Ok(ViewCamera::framing(&region, self.project.params.fit.viewport))
            }
        }
    }

    fn fit(&self) -> Result<FittedPatch, ServiceError> {
        let contour = self.project.contour_defect.as_ref().expect("checked");
        let clipped = self.stage_mesh(Stage::Clip)?;
        let cam = self.camera(contour)?;
        fit_patch(&clipped, contour, &cam, self.project.params.fit.cull_back_faces).map_err(|e| ServiceError::stage(Stage::Fit, e))
    }

    fn patch(&self) -> Result<FittedPatch, ServiceError> {
        let contour = self.project.contour_defect.clone().ok_or(ServiceError::MissingInput { stage: Stage::Initial, what: "contour_defect" })?;
        let mesh = self.stage_mesh(Stage::Fit)?;
        let camera = self.camera(&contour)?;
        Ok(FittedPatch { mesh, source_contour: Some(contour), camera })
    }

    /// Initial implant recomputed from the stored patch.
    pub fn rebuild_initial(&self) -> Result<ImplantModel, ServiceError> {
        let p = &self.project;
        build_initial_implant(&self.patch()?, p.params.thickness, p.params.smoothing).map_err(|e| ServiceError::stage(Stage::Initial, e))
    }

    /// Final implant recomputed from the stored patch and crania.
    pub fn rebuild_final(&self) -> Result<ImplantModel, ServiceError> {
        let p = &self.project;
        let edge = p.contour_inner_edge.as_ref().ok_or(ServiceError::MissingInput { stage: Stage::Final, what: "contour_inner_edge" })?;
        let initial = self.rebuild_initial()?;
        let crania = self.stage_mesh(Stage::Segment)?;
        build_final_implant(&crania, &initial, edge, p.params.thickness).map_err(|e| ServiceError::stage(Stage::Final, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub verdict: Verdict,
    /// Inner rim vertices to the inner-edge contour.
    pub rim_gap: Summary,
    /// Largest gap in either direction between the rim and the contour.
    pub rim_max_gap: f64,
    pub rim_gap_tolerance: f64,
    pub mean_crania_edge: f64,
    /// Rim vertices (both skins) to the crania surface.
    pub rim_to_crania: Summary,
    /// Outer skin vertices to the mirrored model.
    pub outer_to_mirrored: Summary,
    pub outer_p95_tolerance: f64,
    /// Signed distance of implant vertices to the crania solid, negative inside bone.
    pub crania_clearance: Option<Summary>,
    pub implant: MeshStats,
    pub failures: Vec<String>,
}

fn point_mesh(points: Vec<cranial_core::geom::Point3>) -> TriMesh {
    TriMesh::new(points, Vec::new()).expect("no triangles")
}

/// Compares an implant against the skull it is meant to close.
pub fn evaluate_implant(
    implant: &ImplantModel,
    crania: &TriMesh,
    mirrored: &TriMesh,
    inner_edge: &SurfaceContour,
    params: &EvaluateParams,
) -> Result<EvaluationReport, MetricsError> {
    let inner_rim = implant.inner_rim();
    let gaps: Vec<f64> = inner_rim.iter().map(|&q| inner_edge.distance_to_polyline(q)).collect();
    let rim_gap = Summary::of(&gaps);
    let rim_max_gap = polyline_gap(&inner_rim, inner_edge.points());
    let mean_edge = crania.mean_edge_length();
    let tolerance = params.rim_gap_factor * mean_edge;

    let mut rim_pts = implant.outer_rim();
    rim_pts.extend_from_slice(&inner_rim);
    let rim_to_crania = distance_field(&point_mesh(rim_pts), crania, false)?.summary;
    let outer_to_mirrored = distance_field(&implant.outer_surface(), mirrored, false)?.summary;
    let crania_clearance = if crania.is_watertight() { Some(distance_field(&implant.solid, crania, true)?.summary) } else { None };

    let mut failures = Vec::new();
    if rim_max_gap > tolerance {
        failures.push(format!("rim max gap {rim_max_gap:.3} mm exceeds {tolerance:.3} mm"));
    }
    if outer_to_mirrored.p95 >= params.outer_p95_tolerance {
        failures.push(format!("outer skin p95 distance {:.3} mm is not below {:.3} mm", outer_to_mirrored.p95, params.outer_p95_tolerance));
    }
    Ok(EvaluationReport {
        verdict: if failures.is_empty() { Verdict::Pass } else { Verdict::Fail },
        rim_gap,
        rim_max_gap,
        rim_gap_tolerance: tolerance,
        mean_crania_edge: mean_edge,
        rim_to_crania,
        outer_to_mirrored,
        outer_p95_tolerance: params.outer_p95_tolerance,
        crania_clearance,
        implant: implant.solid.stats(),
        failures,
    })
}
