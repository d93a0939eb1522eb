use std::collections::BTreeMap;
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use castelet::control::{serve_control, Runtime};
use castelet::engine::Engine;
use castelet::show::load_show;
use serde_json::{json, Value};
use tungstenite::{Message, WebSocket};

type Client = WebSocket<tungstenite::stream::MaybeTlsStream<TcpStream>>;

struct Stage {
    port: u16,
    stop: Arc<AtomicBool>,
    loop_thread: Option<thread::JoinHandle<()>>,
    server: Option<thread::JoinHandle<()>>,
}

impl Stage {
    fn start() -> Stage {
        let show = load_show(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../shows/demo")).unwrap();
        let mut rt = Runtime::new(Engine::new(show));
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        let stop = Arc::new(AtomicBool::new(false));
        let server = serve_control(listener, rt.hub(), Arc::clone(&stop)).unwrap();
        let s = Arc::clone(&stop);
        let loop_thread = thread::spawn(move || {
            let dt = 1.0 / 60.0;
            let start = Instant::now();
            let mut k = 0u32;
            while !s.load(Ordering::Relaxed) {
                rt.step(dt).unwrap();
                k += 1;
                if let Some(wait) = (start + Duration::from_secs_f64(dt) * k).checked_duration_since(Instant::now()) {
                    thread::sleep(wait);
                }
            }
        });
        Stage {
            port,
            stop,
            loop_thread: Some(loop_thread),
            server: Some(server),
        }
    }

    fn client(&self) -> Client {
        let (ws, _) = tungstenite::connect(format!("ws://127.0.0.1:{}", self.port)).unwrap();
        match ws.get_ref() {
            tungstenite::stream::MaybeTlsStream::Plain(s) => s.set_read_timeout(Some(Duration::from_millis(20))).unwrap(),
            _ => unreachable!(),
        }
        ws
    }
}

impl Drop for Stage {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        let _ = self.loop_thread.take().unwrap().join();
        let _ = self.server.take().unwrap().join();
    }
}

fn send(ws: &mut Client, v: Value) {
    ws.send(Message::text(v.to_string())).unwrap();
}

fn next_text(ws: &mut Client, deadline: Duration) -> Option<Value> {
    let end = Instant::now() + deadline;
    while Instant::now() < end {
        match ws.read() {
            Ok(Message::Text(t)) => return Some(serde_json::from_str(t.as_str()).unwrap()),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(e) => panic!("{e}"),
        }
    }
    None
}

/// Next message that is not a subscription push.
fn reply(ws: &mut Client) -> Value {
    loop {
        let v = next_text(ws, Duration::from_secs(5)).expect("reply");
        if v["type"] != "frame" && v["type"] != "state" {
            return v;
        }
    }
}

#[test]
fn commands_and_errors() {
    let stage = Stage::start();
    let mut ws = stage.client();
    send(&mut ws, json!({"type": "ping", "id": 7}));
    let pong = reply(&mut ws);
    assert_eq!((pong["type"].as_str(), pong["id"].as_i64()), (Some("pong"), Some(7)));
    assert!(pong["clock"].is_f64() && pong["tick"].is_u64() && pong["server_time"].as_f64() > Some(0.0));

    send(&mut ws, json!({"type": "goto", "args": {"index": 99}}));
    let r = reply(&mut ws);
    assert_eq!((r["type"].as_str(), r["message"].as_str(), r["request"].as_str()), (Some("error"), Some("index out of range"), Some("goto")));

    send(&mut ws, json!({"type": "dance"}));
    assert_eq!(reply(&mut ws)["message"], "unknown message type `dance`");
    ws.send(Message::text("{not json")).unwrap();
    assert!(reply(&mut ws)["message"].as_str().unwrap().starts_with("malformed JSON"));
    send(&mut ws, json!({"type": "suspend"}));
    assert!(reply(&mut ws)["message"].as_str().unwrap().starts_with("bad arguments"));

    send(&mut ws, json!({"type": "go"}));
    let r = reply(&mut ws);
    assert_eq!(r["type"], "reply");
    assert_eq!(r["result"], "fired");
    assert_eq!(r["cursor"], 1);
    assert_eq!(r["steps"][0]["outcome"]["outcome"], "accepted");

    send(&mut ws, json!({"type": "set_live", "args": {"oav": "scholar", "on": true}}));
    assert_eq!(reply(&mut ws)["message"], "oav `scholar`: no live retarget binding configured");

    // The connection survives every error above.
    send(&mut ws, json!({"type": "ping"}));
    assert_eq!(reply(&mut ws)["type"], "pong");
}

#[test]
fn subscribers_get_their_own_cadence() {
    let stage = Stage::start();
    let mut fast = stage.client();
    let mut slow = stage.client();
    send(&mut fast, json!({"type": "subscribe_frames", "args": {"rate": 30}}));
    send(&mut slow, json!({"type": "subscribe_frames", "args": {"rate": 10}}));
    send(&mut slow, json!({"type": "subscribe_state"}));
    assert_eq!(reply(&mut fast)["rate"], 30.0);
    assert_eq!(reply(&mut slow)["rate"], 10.0);
    assert_eq!(reply(&mut slow)["stream"], "state");

    let collect = |ws: &mut Client, secs: f64| {
        let mut frames = BTreeMap::new();
        let mut states = Vec::new();
        let end = Instant::now() + Duration::from_secs_f64(secs);
        while Instant::now() < end {
            if let Some(v) = next_text(ws, Duration::from_millis(20)) {
                match v["type"].as_str() {
                    Some("frame") => {
                        frames.insert(v["frame"]["tick"].as_u64().unwrap(), v["frame"].clone());
                    }
                    Some("state") => states.push(v),
                    _ => {}
                }
            }
        }
        (frames, states)
    };
    let h = thread::spawn(move || {
        let r = collect(&mut fast, 2.0);
        (fast, r)
    });
    let (slow_frames, slow_states) = collect(&mut slow, 2.0);
    let (_fast, (fast_frames, _)) = h.join().unwrap();

    assert!((45..=70).contains(&fast_frames.len()), "fast got {}", fast_frames.len());
    assert!((15..=25).contains(&slow_frames.len()), "slow got {}", slow_frames.len());
    let mut shared = 0;
    for (tick, f) in &slow_frames {
        if let Some(g) = fast_frames.get(tick) {
            assert_eq!(f, g);
            shared += 1;
        }
    }
    assert!(shared > 0);
    assert!(!slow_states.is_empty());
    assert!(slow_states[0]["snapshot"]["oavs"].as_array().unwrap().len() == 5);
}
