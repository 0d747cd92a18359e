//! HTTP/JSON service for the door panel and the admin console.
//!
//! | method | path              | body                                   |
//! |--------|-------------------|----------------------------------------|
//! | GET    | `/state`          |                                        |
//! | POST   | `/door/motion`    |                                        |
//! | POST   | `/door/key`       | `{"key": "7"}`                         |
//! | POST   | `/door/frame`     | `{"image": <base64 PGM>, "landmarks": {"face": [x,y,w,h], ...}}` |
//! | POST   | `/admin/command`  | `{"text": "unlock"}`, bearer token     |
//! | GET    | `/events?since=N` |                                        |
//! | GET    | `/photos/{name}`  |                                        |
//!
//! Door endpoints answer `{"events": [...]}` with the feed items they
//! caused. Errors are `{"error": "..."}` with 400 (malformed), 401 (admin
//! token), 404 (photo) or 409 (frame while not recognizing).

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine as _;
use serde::Deserialize;
use serde_json::{json, Value};

use entryway_core::controller::Key;
use entryway_core::{Landmark, LandmarkSet, Rect};

use crate::gateway::{deliver, dispatch, ChatMessage, RetryPolicy, Transport};
use crate::pgm;
use crate::station::{FeedItem, Station, StationError};

pub const TOKEN_ENV: &str = "ENTRYWAY_ADMIN_TOKEN";

#[derive(Clone)]
pub struct ApiState {
    pub station: Arc<Mutex<Station>>,
    /// `None` disables every admin endpoint.
    pub admin_token: Option<String>,
}

impl ApiState {
    pub fn new(station: Station, admin_token: Option<String>) -> Self {
        Self {
            station: Arc::new(Mutex::new(station)),
            admin_token,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Station> {
        self.station.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn events(items: &[FeedItem]) -> Json<Value> {
    Json(json!({ "events": items }))
}

pub fn router(state: ApiState) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/door/motion", post(post_motion))
        .route("/door/key", post(post_key))
        .route("/door/frame", post(post_frame))
        .route("/admin/command", post(post_command))
        .route("/events", get(get_events))
        .route("/photos/{name}", get(get_photo))
        .with_state(state)
}

async fn get_state(State(s): State<ApiState>) -> Json<Value> {
    Json(json!(s.lock().view()))
}

async fn post_motion(State(s): State<ApiState>) -> Json<Value> {
    events(s.lock().motion())
}

/// Parses a JSON body by hand so malformed input maps to our 400 shape.
fn json_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| bad_request(format!("invalid JSON body: {e}")))
}

#[derive(Deserialize)]
struct KeyBody {
    key: String,
}

async fn post_key(
    State(s): State<ApiState>,
    body: axum::body::Bytes,
) -> Result<Json<Value>, ApiError> {
    let KeyBody { key } = json_body(&body)?;
    let mut chars = key.chars();
    let key = match (chars.next().and_then(Key::from_char), chars.next()) {
        (Some(k), None) => k,
        _ => {
            return Err(bad_request(format!(
                "key must be one of 0-9, *, #; got {key:?}"
            )))
        }
    };
    Ok(events(s.lock().key(key)))
}

#[derive(Deserialize)]
struct FrameBody {
    image: String,
    #[serde(default)]
    landmarks: Option<BTreeMap<String, Option<[i64; 4]>>>,
}

/// Boxes are `[x, y, w, h]`; a `null` box means the landmark was not found.
fn parse_landmarks(raw: &BTreeMap<String, Option<[i64; 4]>>) -> Result<LandmarkSet, ApiError> {
    let mut set = LandmarkSet::default();
    for (name, rect) in raw {
        let which: Landmark = name
            .parse()
            .map_err(|_| bad_request(format!("unknown landmark {name:?}")))?;
        let Some([x, y, w, h]) = rect else { continue };
        let fits = |v: i64| i32::try_from(v).is_ok();
        if !(fits(*x)
            && fits(*y)
            && *w > 0
            && *h > 0
            && u32::try_from(*w).is_ok()
            && u32::try_from(*h).is_ok())
        {
            return Err(bad_request(format!("{name}: box out of range")));
        }
        let rect = Rect::new(*x as i32, *y as i32, *w as u32, *h as u32)
            .map_err(|e| bad_request(format!("{name}: {e}")))?;
        set.set(which, rect);
    }
    set.order_eyes();
    Ok(set)
}

async fn post_frame(
    State(s): State<ApiState>,
    body: axum::body::Bytes,
) -> Result<Json<Value>, ApiError> {
    let body: FrameBody = json_body(&body)?;
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(body.image.trim())
        .map_err(|e| bad_request(format!("image is not base64: {e}")))?;
    let image = pgm::decode(&bytes).map_err(|e| bad_request(format!("image: {e}")))?;
    let landmarks = body.landmarks.as_ref().map(parse_landmarks).transpose()?;
    let mut station = s.lock();
    match station.submit_frame(image, landmarks) {
        Ok(items) => Ok(events(items)),
        Err(e @ StationError::NotRecognizing(_)) => {
            Err(ApiError(StatusCode::CONFLICT, e.to_string()))
        }
        Err(e) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

fn authorized(state: &ApiState, headers: &HeaderMap) -> Result<(), ApiError> {
    let unauthorized = || {
        ApiError(
            StatusCode::UNAUTHORIZED,
            "missing or wrong admin token".into(),
        )
    };
    let expected = state.admin_token.as_deref().ok_or_else(unauthorized)?;
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .ok_or_else(unauthorized)?;
    if given.as_bytes() == expected.as_bytes() {
        Ok(())
    } else {
        Err(unauthorized())
    }
}

#[derive(Deserialize)]
struct CommandBody {
    text: String,
}

async fn post_command(
    State(s): State<ApiState>,
    headers: HeaderMap,
    body: axum::body::Bytes,
) -> Result<Json<Value>, ApiError> {
    authorized(&s, &headers)?;
    let CommandBody { text } = json_body(&body)?;
    let mut station = s.lock();
    let before = station.last_seq();
    let msg = ChatMessage::text(&station.admin_chat_id().to_string(), text, station.now());
    let d = dispatch(&mut station, &msg);
    let Some(command) = d.command else {
        return Err(bad_request(d.reply.text));
    };
    Ok(Json(json!({
        "command": command.to_string(),
        "reply": d.reply.text,
        "photo": d.reply.photo.map(|p| p.name),
        "events": station.events_since(before),
    })))
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: Option<String>,
}

async fn get_events(
    State(s): State<ApiState>,
    Query(q): Query<Since>,
) -> Result<Json<Value>, ApiError> {
    let since = match q.since.as_deref() {
        None | Some("") => 0,
        Some(v) => v
            .parse::<u64>()
            .map_err(|_| bad_request(format!("since must be a sequence number, got {v:?}")))?,
    };
    let station = s.lock();
    Ok(Json(json!({
        "events": station.events_since(since),
        "last_seq": station.last_seq(),
    })))
}

async fn get_photo(
    State(s): State<ApiState>,
    Path(name): Path<String>,
) -> Result<Response, ApiError> {
    let station = s.lock();
    let img = station
        .photo(&name)
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("no photo {name:?}")))?;
    // Photos keep their device names but are stored as PGM.
    Ok((
        [(header::CONTENT_TYPE, "image/x-portable-graymap")],
        pgm::encode(img),
    )
        .into_response())
}

/// Ticks the door when deadlines pass and hands notifications to the
/// transport, outside the station lock.
pub fn spawn_background(
    state: ApiState,
    mut transport: Box<dyn Transport + Send>,
    period: Duration,
) {
    std::thread::spawn(move || loop {
        std::thread::sleep(period);
        let outgoing = {
            let mut station = state.lock();
            station.tick_if_due();
            station.take_outgoing()
        };
        if !outgoing.is_empty() {
            deliver(
                outgoing,
                transport.as_mut(),
                &RetryPolicy::default(),
                &mut std::thread::sleep,
            );
        }
    });
}

pub async fn serve(addr: SocketAddr, state: ApiState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
