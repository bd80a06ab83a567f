use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use tower::ServiceExt;

use thermnet::service::{
    load_store, router, AppState, LiveClock, PlaybackResponse, X3D_CONTENT_TYPE,
};
use thermnet_core::scenegen::{parse_x3d, ShapeClass};
use thermnet_core::sim::{load_config, run_simulation, RunOptions};
use thermnet_core::supervisor::ThermalFrame;

const CONFIG: &str = r#"{
    "building": {"id": "duplex", "levels": [
        {"index": 0, "rooms": [
            {"id": "kitchen", "min": [0, 0, 0], "max": [4, 4, 3]},
            {"id": "lounge", "min": [4, 0, 0], "max": [8, 4, 3]}
        ]},
        {"index": 1, "rooms": [
            {"id": "loft", "min": [0, 0, 3], "max": [8, 4, 6]}
        ]}
    ]},
    "scenario": {"preset": "overheated_corner"},
    "display": {"temperature": {"lo": 10, "hi": 30}}
}"#;

fn simulate(dir: &Path, cadence: f64, duration: f64) {
    let cfg = load_config(CONFIG).unwrap();
    run_simulation(
        &cfg,
        &RunOptions {
            duration,
            cadence,
            out_dir: Some(dir.to_path_buf()),
            ..Default::default()
        },
    )
    .unwrap();
}

fn app(dir: &Path, speed: f64) -> axum::Router {
    let (sup, displays) = load_store(dir).unwrap();
    router(Arc::new(AppState::new(
        sup,
        displays,
        LiveClock::new(speed),
    )))
}

async fn get(app: &axum::Router, uri: &str) -> (StatusCode, axum::http::HeaderMap, Vec<u8>) {
    let resp = app
        .clone()
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = axum::body::to_bytes(resp.into_body(), usize::MAX)
        .await
        .unwrap()
        .to_vec();
    (status, headers, body)
}

#[tokio::test]
async fn lists_buildings_and_frames() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 60.0, 600.0);
    let app = app(dir.path(), 1.0);

    let (status, _, body) = get(&app, "/buildings").await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<String> = serde_json::from_slice(&body).unwrap();
    assert_eq!(ids, ["duplex"]);

    let (status, _, body) = get(&app, "/buildings/duplex/frames?from=120&to=300").await;
    assert_eq!(status, StatusCode::OK);
    let frames: Vec<ThermalFrame> = serde_json::from_slice(&body).unwrap();
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    assert_eq!(times, [120.0, 180.0, 240.0, 300.0]);
    assert!(frames.iter().all(|f| f.samples.len() == 24));

    let (status, _, body) = get(&app, "/buildings/duplex/frames").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        serde_json::from_slice::<Vec<ThermalFrame>>(&body)
            .unwrap()
            .len(),
        10
    );
}

#[tokio::test]
async fn error_statuses() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 1.0, 3.0);
    let app = app(dir.path(), 1.0);
    assert_eq!(
        get(&app, "/buildings/nope/frames").await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        get(&app, "/buildings/duplex/frames?from=5&to=1").await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        get(&app, "/buildings/duplex/scene").await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        get(&app, "/buildings/duplex/scene?t=-1").await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        get(&app, "/buildings/duplex/scene?t=1&layer=pressure")
            .await
            .0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        get(&app, "/buildings/duplex/scene?t=1&vx=1&vy=2").await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        get(&app, "/buildings/duplex/playback?speed=0").await.0,
        StatusCode::BAD_REQUEST
    );
    assert_eq!(
        get(&app, "/buildings/duplex/playback?from=100&to=200")
            .await
            .0,
        StatusCode::NOT_FOUND
    );
}

#[tokio::test]
async fn scene_is_x3d_with_legend() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 1.0, 3.0);
    let app = app(dir.path(), 1.0);
    let (status, headers, body) = get(
        &app,
        "/buildings/duplex/scene?t=1.5&layer=temperature&walls=wireframe",
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers["content-type"], X3D_CONTENT_TYPE);
    assert_eq!(headers["x-frame-time"], "1");
    let legend: serde_json::Value = serde_json::from_slice(headers["x-legend"].as_bytes()).unwrap();
    assert_eq!(legend["lo"], 10.0);
    assert_eq!(legend["units"], "degC");
    let doc = parse_x3d(std::str::from_utf8(&body).unwrap()).unwrap();
    // 48 + 48 + 96 cells at 1 m spacing
    assert_eq!(doc.cell_count(), 192);
    assert!(doc
        .transforms_of(ShapeClass::Wall)
        .iter()
        .all(|w| w.children().len() == 12));

    let (_, headers, _) = get(&app, "/buildings/duplex/scene?t=2&layer=humidity").await;
    let legend: serde_json::Value = serde_json::from_slice(headers["x-legend"].as_bytes()).unwrap();
    assert_eq!(legend["units"], "%RH");
}

#[tokio::test]
async fn viewpoint_selects_view_dependent_scene() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 1.0, 2.0);
    let app = app(dir.path(), 1.0);
    let (_, _, body) = get(&app, "/buildings/duplex/scene?t=1&vx=500&vy=500&vz=500").await;
    let far = parse_x3d(std::str::from_utf8(&body).unwrap()).unwrap();
    assert_eq!(far.thermal_primitive_count(), 0);
    assert_eq!(far.transforms_of(ShapeClass::Envelope).len(), 1);
    let (_, _, body) = get(&app, "/buildings/duplex/scene?t=1&vx=-1&vy=-1&vz=1").await;
    let near = parse_x3d(std::str::from_utf8(&body).unwrap()).unwrap();
    assert_eq!(near.cell_count(), 192);
}

#[tokio::test]
async fn playback_plan_scales_gaps() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 60.0, 600.0);
    let app = app(dir.path(), 1.0);
    let (status, _, body) = get(&app, "/buildings/duplex/playback?from=0&to=540&speed=60").await;
    assert_eq!(status, StatusCode::OK);
    let plan: PlaybackResponse = serde_json::from_slice(&body).unwrap();
    assert_eq!(plan.frames.len(), 10);
    for (i, f) in plan.frames.iter().enumerate() {
        assert_eq!(f.presentation_time, i as f64);
        assert_eq!(f.url, format!("/buildings/duplex/scene?t={}", f.t));
    }
    // the advertised frame URL resolves to that frame
    let (status, headers, _) = get(&app, &plan.frames[3].url).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(headers["x-frame-time"], "180");
}

#[tokio::test]
async fn live_scene_follows_speed() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 1.0, 5.0);
    let (_, headers, _) = get(&app(dir.path(), 1e-9), "/buildings/duplex/live/scene").await;
    assert_eq!(headers["x-frame-time"], "0");
    let (_, headers, _) = get(&app(dir.path(), 1e12), "/buildings/duplex/live/scene").await;
    assert_eq!(headers["x-frame-time"], "4");
}

#[tokio::test]
async fn parent_directory_with_several_runs() {
    let root = tempfile::tempdir().unwrap();
    simulate(&root.path().join("run-a"), 1.0, 2.0);
    let other = CONFIG
        .replace("duplex", "annex")
        .replace("kitchen", "k2")
        .replace("lounge", "l2")
        .replace("loft", "f2");
    let cfg = load_config(&other).unwrap();
    run_simulation(
        &cfg,
        &RunOptions {
            duration: 2.0,
            out_dir: Some(root.path().join("run-b")),
            ..Default::default()
        },
    )
    .unwrap();
    let (_, _, body) = get(&app(root.path(), 1.0), "/buildings").await;
    let ids: Vec<String> = serde_json::from_slice(&body).unwrap();
    assert_eq!(ids, ["annex", "duplex"]);
}

#[tokio::test]
async fn api_is_read_only() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), 1.0, 2.0);
    let resp = app(dir.path(), 1.0)
        .oneshot(
            Request::post("/buildings/duplex/frames")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::METHOD_NOT_ALLOWED);
}
