use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use cranial_core::geom::Vec3;
use cranial_core::mirror::LandmarkPair;
use cranial_service::api::{router, AppState};
use cranial_service::synth::default_shell;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or(Body::empty(), |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn as_json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn landmarks() -> Vec<LandmarkPair> {
    [(10.0, 60.0), (45.0, 20.0), (-45.0, -10.0)]
        .into_iter()
        .map(|(y, z): (f64, f64)| {
            let x = (80.0f64 * 80.0 - y * y - z * z).sqrt();
            LandmarkPair::new("", Vec3::new(x, y, z), Vec3::new(-x, y, z))
        })
        .collect()
}

async fn new_project(app: &Router, id: &str) {
    let (s, b) = call(app, "POST", "/projects", Some(json!({ "id": id, "inputs": { "synthetic_shell": default_shell() } }))).await;
    assert_eq!(s, StatusCode::CREATED, "{}", String::from_utf8_lossy(&b));
}

#[tokio::test(flavor = "multi_thread")]
async fn landmarks_then_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::new(dir.path()));
    new_project(&app, "p1").await;
    let (s, _) = call(&app, "PUT", "/projects/p1/landmarks", Some(serde_json::to_value(landmarks()).unwrap())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(call(&app, "POST", "/projects/p1/run/segment", None).await.0, StatusCode::OK);
    let (s, b) = call(&app, "POST", "/projects/p1/run/mirror", None).await;
    assert_eq!(s, StatusCode::OK, "{}", String::from_utf8_lossy(&b));
    let v = as_json(&b);
    assert_eq!(v["record"]["data"]["pair_count"], 3);
    assert_eq!(v["stages"]["mirror"]["valid"], true);

    let (s, stl) = call(&app, "GET", "/projects/p1/stages/mirror/mesh", None).await;
    assert_eq!(s, StatusCode::OK);
    let n = u32::from_le_bytes(stl[80..84].try_into().unwrap()) as usize;
    assert!(n > 0 && stl.len() == 84 + 50 * n);

    let (s, b) = call(&app, "GET", "/projects", None).await;
    assert_eq!((s, as_json(&b)), (StatusCode::OK, json!(["p1"])));
}

#[tokio::test(flavor = "multi_thread")]
async fn missing_contour_is_a_conflict() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::new(dir.path()));
    new_project(&app, "p2").await;
    let (s, b) = call(&app, "POST", "/projects/p2/run/fit", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let v = as_json(&b);
    assert_eq!(v["code"], "missing_input");
    assert_eq!(v["stage"], "fit");
    assert!(v["message"].as_str().unwrap().contains("contour_defect absent"));

    let (s, b) = call(&app, "POST", "/projects/p2/run/mirror", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert_eq!(as_json(&b)["message"], "landmarks absent");
    let (s, b) = call(&app, "GET", "/projects/p2/report", None).await;
    assert_eq!((s, as_json(&b)["code"].clone()), (StatusCode::CONFLICT, json!("upstream_invalid")));
}

#[tokio::test(flavor = "multi_thread")]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::new(dir.path()));
    assert_eq!(call(&app, "GET", "/projects/nope", None).await.0, StatusCode::NOT_FOUND);
    new_project(&app, "p3").await;
    let (s, b) = call(&app, "POST", "/projects", Some(json!({ "id": "p3" }))).await;
    assert_eq!((s, as_json(&b)["code"].clone()), (StatusCode::CONFLICT, json!("project_exists")));
    assert_eq!(call(&app, "POST", "/projects/p3/run/polish", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "POST", "/projects", Some(json!({ "id": "../x" }))).await.0, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "PUT", "/projects/p3/contours/defect", Some(json!({ "host": "m", "points": [[0, 0, 0]], "normals": [[0, 0, 1]] }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "PUT", "/projects/p3/camera", Some(json!({ "eye": [0, 0, 0], "look_at": [0, 0, 0], "up": [0, 1, 0], "viewport": [10, 10], "projection": { "kind": "perspective", "fov_y_deg": 30.0 } }))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread")]
async fn concurrent_runs_are_serialized() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(AppState::new(dir.path()));
    new_project(&app, "p4").await;
    call(&app, "PUT", "/projects/p4/landmarks", Some(serde_json::to_value(landmarks()).unwrap())).await;
    let runs: Vec<_> = (0..4)
        .map(|_| {
            let app = app.clone();
            tokio::spawn(async move { call(&app, "POST", "/projects/p4/run/segment", None).await })
        })
        .collect();
    let mut keys = Vec::new();
    for r in runs {
        let (s, b) = r.await.unwrap();
        assert_eq!(s, StatusCode::OK);
        keys.push(as_json(&b)["record"]["key"].clone());
    }
    assert!(keys.windows(2).all(|w| w[0] == w[1]));
    let (s, b) = call(&app, "GET", "/projects/p4", None).await;
    assert_eq!(s, StatusCode::OK);
    let v = as_json(&b);
    assert_eq!(v["project"]["landmarks"].as_array().unwrap().len(), 3);
    assert_eq!(v["stages"]["segment"]["valid"], true);
}
