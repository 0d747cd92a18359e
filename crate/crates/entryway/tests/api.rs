mod common;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use base64::Engine as _;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use common::{captures, trained_registry, ManualClock};
use entryway::api::{router, ApiState};
use entryway::pgm;
use entryway::station::{Station, StationConfig};
use entryway_core::LandmarkSet;

const TOKEN: &str = "s3cret";

fn app(dir: &std::path::Path) -> (Router, ApiState, ManualClock) {
    let reg = trained_registry(dir, &[("Nazrin", 0, "7816")], 12);
    let clock = ManualClock::default();
    let state = ApiState::new(
        Station::new(StationConfig::default(), reg, clock.clock()),
        Some(TOKEN.into()),
    );
    (router(state.clone()), state, clock)
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let body = resp
        .into_body()
        .collect()
        .await
        .unwrap()
        .to_bytes()
        .to_vec();
    (status, body)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (s, b) = call(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap_or(Value::Null))
}

async fn post(app: &Router, uri: &str, body: Value, token: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::post(uri).header(header::CONTENT_TYPE, "application/json");
    if let Some(t) = token {
        req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
    }
    let (s, b) = call(app, req.body(Body::from(body.to_string())).unwrap()).await;
    (s, serde_json::from_slice(&b).unwrap())
}

fn boxes(set: &LandmarkSet) -> Value {
    let r = |r: Option<entryway_core::Rect>| r.map(|r| json!([r.x, r.y, r.w, r.h]));
    json!({ "face": r(set.face), "eye1": r(set.eye1), "eye2": r(set.eye2), "nose": r(set.nose) })
}

fn frame_body(index: usize, registered: bool, seed: u64) -> Value {
    let f = &captures(index, registered, 1, seed, false)[0];
    json!({
        "image": base64::engine::general_purpose::STANDARD.encode(pgm::encode(&f.image)),
        "landmarks": boxes(&f.landmarks),
    })
}

#[tokio::test]
async fn door_flow_over_http() {
    let dir = common::tempdir();
    let (app, _, _) = app(dir.path());

    let (s, state) = get(&app, "/state").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(state["phase"], "Idle");
    assert_eq!(state["locked"], true);

    let (s, body) = post(&app, "/door/frame", frame_body(0, true, 40), None).await;
    assert_eq!(s, StatusCode::CONFLICT, "{body}");

    let (s, body) = post(&app, "/door/motion", json!({}), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(body["events"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["text"] == "EVENT motion"));

    let (s, body) = post(&app, "/door/frame", frame_body(0, true, 40), None).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let (_, state) = get(&app, "/state").await;
    assert_eq!(state["phase"], "AwaitPin");
    assert_eq!(state["user"], "Nazrin");

    for k in ["7", "8", "1", "6", "#"] {
        let (s, _) = post(&app, "/door/key", json!({ "key": k }), None).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (_, state) = get(&app, "/state").await;
    assert_eq!(state["locked"], false);
    assert_eq!(state["phase"], "Unlocked");

    let (_, all) = get(&app, "/events").await;
    let items = all["events"].as_array().unwrap();
    assert_eq!(all["last_seq"], items.len());
    let unlocked = items
        .iter()
        .find(|e| e["detail"]["notification"]["type"] == "door_unlocked")
        .expect("door_unlocked item");
    let seq = unlocked["seq"].as_u64().unwrap();
    let (_, tail) = get(&app, &format!("/events?since={seq}")).await;
    assert_eq!(
        tail["events"].as_array().unwrap().len() as u64,
        items.len() as u64 - seq
    );
    assert_eq!(tail["events"][0]["seq"], seq + 1);

    let (s, b) = call(
        &app,
        Request::get("/photos/temp.jpg")
            .body(Body::empty())
            .unwrap(),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert!(pgm::decode(&b).is_ok());
    let (s, _) = get(&app, "/photos/nope.jpg").await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let dir = common::tempdir();
    let (app, _, _) = app(dir.path());
    post(&app, "/door/motion", json!({}), None).await;
    for body in [
        json!({ "key": "A" }),
        json!({ "key": "12" }),
        json!({ "key": "" }),
        json!({ "nokey": 1 }),
    ] {
        let (s, e) = post(&app, "/door/key", body.clone(), None).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{body}");
        assert!(e["error"].is_string());
    }
    let (s, _) = post(&app, "/door/frame", json!({ "image": "!!!" }), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let junk = base64::engine::general_purpose::STANDARD.encode(b"P6\n1 1\n255\n000");
    let (s, _) = post(&app, "/door/frame", json!({ "image": junk }), None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let mut bad_box = frame_body(0, true, 1);
    bad_box["landmarks"]["face"] = json!([0, 0, 0, 10]);
    let (s, _) = post(&app, "/door/frame", bad_box, None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let mut bad_name = frame_body(0, true, 1);
    bad_name["landmarks"]["mouth"] = json!([0, 0, 5, 5]);
    let (s, _) = post(&app, "/door/frame", bad_name, None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = get(&app, "/events?since=-1").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, b) = call(
        &app,
        Request::post("/door/key")
            .body(Body::from("{not json"))
            .unwrap(),
    )
    .await;
    assert_eq!(
        s,
        StatusCode::BAD_REQUEST,
        "{}",
        String::from_utf8_lossy(&b)
    );
}

#[tokio::test]
async fn admin_commands_need_the_token() {
    let dir = common::tempdir();
    let (app, state, _) = app(dir.path());
    let before = get(&app, "/events").await.1;
    for token in [None, Some("wrong"), Some("")] {
        let (s, _) = post(&app, "/admin/command", json!({ "text": "unlock" }), token).await;
        assert_eq!(s, StatusCode::UNAUTHORIZED);
    }
    assert_eq!(get(&app, "/events").await.1, before);
    assert_eq!(get(&app, "/state").await.1["locked"], true);

    let (s, body) = post(
        &app,
        "/admin/command",
        json!({ "text": "unlock" }),
        Some(TOKEN),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["command"], "unlock");
    assert!(body["events"]
        .as_array()
        .unwrap()
        .iter()
        .any(|e| e["text"] == "LOCK unlocked"));
    assert_eq!(get(&app, "/state").await.1["locked"], false);

    let (s, body) = post(
        &app,
        "/admin/command",
        json!({ "text": "adduser_Aiman" }),
        Some(TOKEN),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{body}");
    assert!(state
        .station
        .lock()
        .unwrap()
        .registry()
        .user("Aiman")
        .is_some());

    let (s, body) = post(
        &app,
        "/admin/command",
        json!({ "text": "fly" }),
        Some(TOKEN),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(body["error"].as_str().unwrap().len() > 0);

    let (_, body) = post(
        &app,
        "/admin/command",
        json!({ "text": "showpassword" }),
        Some(TOKEN),
    )
    .await;
    assert_eq!(body["reply"], "Aiman:(unset)\nNazrin:7816");
}

#[tokio::test]
async fn no_token_configured_refuses_admin() {
    let dir = common::tempdir();
    let reg = trained_registry(dir.path(), &[], 1);
    let app = router(ApiState::new(
        Station::new(
            StationConfig::default(),
            reg,
            ManualClock::default().clock(),
        ),
        None,
    ));
    let (s, _) = post(
        &app,
        "/admin/command",
        json!({ "text": "unlock" }),
        Some("anything"),
    )
    .await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn stranger_photo_is_served() {
    let dir = common::tempdir();
    let (app, _, _) = app(dir.path());
    post(&app, "/door/motion", json!({}), None).await;
    let (s, body) = post(&app, "/door/frame", frame_body(3, false, 2), None).await;
    assert_eq!(s, StatusCode::OK);
    let save = body["events"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["detail"]["photo"] == "stranger.jpg")
        .expect("stranger photo saved");
    let archive = save["detail"]["archive"].as_str().unwrap();
    for name in ["stranger.jpg", archive] {
        let resp = app
            .clone()
            .oneshot(
                Request::get(format!("/photos/{name}"))
                    .body(Body::empty())
                    .unwrap(),
            )
            .await
            .unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        assert_eq!(
            resp.headers()[header::CONTENT_TYPE],
            "image/x-portable-graymap"
        );
    }
}
