use std::net::SocketAddr;
use std::time::Duration;

use axum::body::Body;
use axum::http::Request;
use futures_util::{SinkExt, StreamExt};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};
use tower::ServiceExt;

use tamer_core::mdp::GridWorld;
use tamer_core::session::{Mode, SessionConfig, Transcript};
use tamer_core::trainer::scripted_demo;
use tamer_server::{router, AppState};

type Socket = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn spawn(app: AppState) -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(app, None)).await.unwrap() });
    addr
}

async fn connect(addr: SocketAddr, id: u64) -> Socket {
    let (ws, _) = connect_async(format!("ws://{addr}/api/session/{id}/ws")).await.unwrap();
    ws
}

async fn send(ws: &mut Socket, msg: Value) {
    ws.send(Message::Text(msg.to_string().into())).await.unwrap();
}

async fn recv(ws: &mut Socket) -> Value {
    loop {
        let frame = tokio::time::timeout(Duration::from_secs(30), ws.next())
            .await
            .expect("timed out waiting for the server")
            .unwrap()
            .unwrap();
        if let Message::Text(t) = frame {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

/// Reads until a message of the given type arrives.
async fn recv_type(ws: &mut Socket, kind: &str) -> Value {
    loop {
        let m = recv(ws).await;
        if m["type"] == kind {
            return m;
        }
    }
}

async fn transcript(app: &AppState, id: u64) -> Transcript {
    let req = Request::builder().uri(format!("/api/session/{id}/transcript")).body(Body::empty()).unwrap();
    let res = router(app.clone(), None).oneshot(req).await.unwrap();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    serde_json::from_slice(&bytes).unwrap()
}

fn live(step_duration: f64) -> SessionConfig {
    let mut cfg = SessionConfig { mode: Mode::Live, step_duration, ..Default::default() };
    cfg.planner.simulations = 200;
    cfg
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn keyboard_demo_then_live_training() {
    let app = AppState::new();
    let grid = GridWorld::canonical();
    let id = app.create(grid.clone(), live(0.05)).unwrap();
    let addr = spawn(app.clone()).await;
    let mut ws = connect(addr, id).await;
    let mut watcher = connect(addr, id).await;

    let first = recv(&mut ws).await;
    assert_eq!(first["type"], "state");
    assert_eq!(first["phase"], "demonstrating");
    assert_eq!(recv(&mut watcher).await["phase"], "demonstrating");

    // feedback is refused until training starts
    send(&mut ws, json!({"type": "feedback", "value": 1})).await;
    assert_eq!(recv_type(&mut ws, "error").await["code"], "not_training");
    send(&mut ws, json!({"type": "dance"})).await;
    assert_eq!(recv_type(&mut ws, "error").await["code"], "bad_message");

    let demo = scripted_demo(&grid, 0).unwrap();
    assert_eq!(demo.len(), 19);
    let mut last = Value::Null;
    for &(_, action) in &demo.steps {
        send(&mut ws, json!({"type": "demo_key", "action": action})).await;
        last = recv_type(&mut ws, "state").await;
    }
    assert_eq!(last["phase"], "training");
    assert_eq!(last["agent_cell"], json!([4, 0]));
    assert!(last["value_heatmap"].is_object());

    // the second socket saw every move too
    let mut seen = Vec::new();
    while seen.len() < 19 {
        seen.push(recv_type(&mut watcher, "state").await);
    }
    assert_eq!(seen.last().unwrap()["phase"], "training");
    let seqs: Vec<u64> = seen.iter().map(|m| m["seq"].as_u64().unwrap()).collect();
    assert!(seqs.windows(2).all(|w| w[0] < w[1]));

    send(&mut ws, json!({"type": "demo_key", "action": "Up"})).await;
    assert_eq!(recv_type(&mut ws, "error").await["code"], "not_demonstrating");

    send(&mut ws, json!({"type": "control", "cmd": "start"})).await;
    let mut feedback = 0;
    let mut steps = 0;
    while feedback < 20 {
        let m = recv(&mut ws).await;
        if m["type"] == "state" && m["total_steps"].as_u64().unwrap() > steps {
            steps = m["total_steps"].as_u64().unwrap();
            let value = if feedback % 4 == 3 { -1 } else { 1 };
            send(&mut ws, json!({"type": "feedback", "value": value})).await;
            feedback += 1;
        }
    }
    // let the last event land
    tokio::time::sleep(Duration::from_millis(100)).await;

    let t = transcript(&app, id).await;
    assert_eq!(t.demonstration.len(), 19);
    assert_eq!(t.events.len(), 20);
    assert!(t.events.windows(2).all(|w| w[0].received_at <= w[1].received_at));
    assert!(t.steps.windows(2).all(|w| w[0].ended_at == w[1].started_at));
    assert!(t.steps.iter().all(|s| s.ended_at - s.started_at >= 0.05));
    assert!(t.irl.is_some());

    send(&mut ws, json!({"type": "control", "cmd": "reset"})).await;
    let m = loop {
        let m = recv_type(&mut ws, "state").await;
        if m["phase"] == "demonstrating" {
            break m;
        }
    };
    assert_eq!(m["total_steps"], 0);
    assert_eq!(m["running"], false);
    assert!(transcript(&app, id).await.events.is_empty());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn simulated_sessions_run_on_their_own() {
    let app = AppState::new();
    let mut cfg = SessionConfig { step_duration: 0.01, skip_demo: true, ..Default::default() };
    cfg.planner.simulations = 100;
    cfg.planner.max_depth = 25;
    let id = app.create(GridWorld::canonical(), cfg).unwrap();
    let addr = spawn(app.clone()).await;
    let mut ws = connect(addr, id).await;
    assert_eq!(recv(&mut ws).await["phase"], "training");

    send(&mut ws, json!({"type": "control", "cmd": "start"})).await;
    // simulated sessions take no clicks
    let metrics = recv_type(&mut ws, "metrics").await;
    let totals = &metrics["totals"];
    assert!(totals["positive"].as_u64().unwrap() + totals["negative"].as_u64().unwrap() >= 1);

    let end = recv_type(&mut ws, "episode_end").await;
    assert!(end["steps"].as_u64().unwrap() >= 19);
    let t = transcript(&app, id).await;
    assert!(!t.episodes.is_empty());
    assert_eq!(t.episodes[0].steps as u64, end["steps"].as_u64().unwrap());
}

#[tokio::test]
async fn unknown_sessions_refuse_the_upgrade() {
    let addr = spawn(AppState::new()).await;
    assert!(connect_async(format!("ws://{addr}/api/session/7/ws")).await.is_err());
}
