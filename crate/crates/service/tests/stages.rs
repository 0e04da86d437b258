mod common;

use cranial_core::geom::Vec3;
use cranial_core::mirror::LandmarkPair;
use cranial_service::project::Stage;
use cranial_service::stages::Workspace;
use cranial_service::{evaluate_implant, ServiceError, Verdict};

fn workspace(dir: &tempfile::TempDir) -> Workspace {
    Workspace::open(&common::fresh_fixture(dir.path())).unwrap()
}

#[test]
fn stages_refuse_to_run_out_of_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut ws = workspace(&dir);
    match ws.run_stage(Stage::Fit) {
        Err(ServiceError::UpstreamInvalid { stage: Stage::Fit, needs: Stage::Clip }) => {}
        other => panic!("{other:?}"),
    }
    ws.edit(|p| p.contour_defect = None).unwrap();
    // own inputs are reported before upstream state
    let err = ws.run_stage(Stage::Clip).unwrap_err();
    assert_eq!(err.to_string(), "contour_defect absent");
    assert!(ws.project.stage_outputs.is_empty());
    let status = ws.status();
    assert!(status[&Stage::Segment].runnable);
    assert!(!status[&Stage::Mirror].runnable && !status[&Stage::Mirror].valid);
}

#[test]
fn landmark_edit_invalidates_everything_downstream_of_segment() {
    let dir = tempfile::tempdir().unwrap();
    let mut ws = workspace(&dir);
    for s in [Stage::Segment, Stage::Mirror, Stage::Clip, Stage::Fit, Stage::Initial, Stage::Final] {
        ws.run_stage(s).unwrap();
    }
    let final_stl = ws.stage_file(Stage::Final, "mesh").unwrap();
    assert!(final_stl.is_file());

    ws.edit(|p| p.landmarks.push(LandmarkPair::new("extra", Vec3::new(30.0, -70.0, 25.0), Vec3::new(-30.0, -70.0, 25.0))))
        .unwrap();
    assert!(ws.is_valid(Stage::Segment));
    for s in [Stage::Mirror, Stage::Clip, Stage::Fit, Stage::Initial, Stage::Final] {
        assert!(!ws.is_valid(s), "{s}");
        assert!(!ws.project.stage_outputs.contains_key(&s), "{s}");
    }
    assert!(!final_stl.exists());

    // the on-disk project agrees
    let reopened = Workspace::open(ws.path()).unwrap();
    assert_eq!(reopened.project.stage_outputs.keys().copied().collect::<Vec<_>>(), [Stage::Segment]);
}

#[test]
fn cache_keys_are_stable_and_specific() {
    let dir = tempfile::tempdir().unwrap();
    let mut ws = workspace(&dir);
    ws.run_all().unwrap();
    let keys: Vec<String> = Stage::ALL.iter().map(|s| ws.project.stage_outputs[s].key.clone()).collect();
    let reopened = Workspace::open(ws.path()).unwrap();
    assert!(Stage::ALL.iter().all(|&s| reopened.is_valid(s)));

    ws.edit(|p| p.params.thickness = 5.0).unwrap();
    for (i, s) in Stage::ALL.into_iter().enumerate() {
        let expect_valid = s < Stage::Initial;
        assert_eq!(ws.is_valid(s), expect_valid, "{s}");
        if expect_valid {
            assert_eq!(ws.project.stage_outputs[&s].key, keys[i]);
        }
    }
    ws.edit(|p| p.params.thickness = 6.0).unwrap();
    ws.run_all().unwrap();
    let again: Vec<String> = Stage::ALL.iter().map(|s| ws.project.stage_outputs[s].key.clone()).collect();
    assert_eq!(again, keys);
}

#[test]
fn shifted_implant_fails_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let mut ws = workspace(&dir);
    ws.run_all().unwrap();
    assert_eq!(ws.project.stage_outputs[&Stage::Evaluate].data["verdict"], "PASS");

    let mut model = ws.rebuild_final().unwrap();
    let base_gap = model.provenance.rim_max_gap.unwrap();
    let crania = ws.stage_mesh(Stage::Segment).unwrap();
    let mirrored = ws.stage_mesh(Stage::Mirror).unwrap();
    let edge = ws.project.contour_inner_edge.clone().unwrap();
    let params = ws.project.params.evaluate;
    model.solid = model.solid.translated(Vec3::new(5.0, 0.0, 0.0));
    let report = evaluate_implant(&model, &crania, &mirrored, &edge, &params).unwrap();
    assert_eq!(report.verdict, Verdict::Fail);
    assert!(report.rim_max_gap > 4.0 && report.rim_max_gap <= 5.0 + base_gap, "{}", report.rim_max_gap);
    assert!(report.failures.iter().any(|f| f.contains("rim max gap")));
}

#[test]
fn edits_to_unrelated_inputs_keep_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mut ws = workspace(&dir);
    ws.run_stage(Stage::Segment).unwrap();
    ws.run_stage(Stage::Mirror).unwrap();
    ws.edit(|p| p.params.evaluate.rim_gap_factor = 3.0).unwrap();
    assert!(ws.is_valid(Stage::Mirror));
    let before = ws.project.stage_outputs[&Stage::Mirror].key.clone();
    ws.edit(|p| p.landmarks[0].label = "renamed".into()).unwrap();
    assert!(!ws.is_valid(Stage::Mirror), "labels are part of the landmark input");
    ws.run_stage(Stage::Mirror).unwrap();
    assert_ne!(ws.project.stage_outputs[&Stage::Mirror].key, before);
}
