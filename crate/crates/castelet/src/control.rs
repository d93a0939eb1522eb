//! WebSocket control service.
//!
//! Clients send JSON text messages `{"type": ..., "args": {...}, "id": ...}`.
//! Operator commands are forwarded to the tick loop and answered with a
//! `reply` or an `error`; `id`, when given, is echoed back. Subscribers get
//! `frame` messages at their own rate and `state` messages on change.
//!
//! Message types: `go`, `back`, `goto {index}`, `suspend {oav}`,
//! `set_live {oav, on}`, `reset`, `start_recording {oav}`,
//! `stop_recording`, `subscribe_frames {rate}`, `subscribe_state`,
//! `unsubscribe`, `ping`.

use std::io;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};
use tungstenite::{Message, WebSocket};

use crate::engine::{Command, CommandReply, Engine, EngineError, TickOutput};

pub const DEFAULT_FRAME_RATE: f64 = 30.0;
const READ_POLL: Duration = Duration::from_millis(5);
const REPLY_TIMEOUT: Duration = Duration::from_secs(5);

pub struct Request {
    pub command: Command,
    pub reply: Sender<Result<CommandReply, EngineError>>,
}

#[derive(Default)]
struct Published {
    frame: Option<(u64, Arc<String>)>,
    /// Tick and show clock of the latest frame.
    clock: (u64, f64),
    state: Option<(u64, Arc<String>)>,
}

/// Shared between the tick loop and every client connection.
pub struct ControlHub {
    requests: Mutex<Sender<Request>>,
    published: RwLock<Published>,
    max_frame_rate: f64,
}

impl ControlHub {
    /// The receiver goes to whoever runs the engine.
    pub fn new(max_frame_rate: f64) -> (Arc<ControlHub>, Receiver<Request>) {
        let (tx, rx) = mpsc::channel();
        let hub = ControlHub {
            requests: Mutex::new(tx),
            published: RwLock::new(Published::default()),
            max_frame_rate,
        };
        (Arc::new(hub), rx)
    }

    fn submit(&self, command: Command) -> Result<CommandReply, String> {
        let (tx, rx) = mpsc::channel();
        let sent = self.requests.lock().unwrap_or_else(|e| e.into_inner()).send(Request { command, reply: tx });
        if sent.is_err() {
            return Err("engine stopped".into());
        }
        match rx.recv_timeout(REPLY_TIMEOUT) {
            Ok(r) => r.map_err(|e| e.to_string()),
            Err(RecvTimeoutError::Timeout) => Err("engine did not answer".into()),
            Err(RecvTimeoutError::Disconnected) => Err("engine stopped".into()),
        }
    }

    /// Makes a tick's results visible to subscribers.
    pub fn publish(&self, out: &TickOutput, state_version: u64) {
        let frame = json!({"type": "frame", "frame": out.frame}).to_string();
        let mut p = self.published.write().unwrap_or_else(|e| e.into_inner());
        p.frame = Some((out.frame.tick, Arc::new(frame)));
        p.clock = (out.frame.tick, out.frame.time);
        if p.state.as_ref().is_none_or(|(v, _)| *v != state_version) {
            let state = json!({"type": "state", "version": state_version, "snapshot": out.snapshot}).to_string();
            p.state = Some((state_version, Arc::new(state)));
        }
    }

    fn latest_frame(&self) -> Option<(u64, Arc<String>)> {
        self.published.read().unwrap_or_else(|e| e.into_inner()).frame.clone()
    }

    fn clock(&self) -> (u64, f64) {
        self.published.read().unwrap_or_else(|e| e.into_inner()).clock
    }

    fn latest_state(&self) -> Option<(u64, Arc<String>)> {
        self.published.read().unwrap_or_else(|e| e.into_inner()).state.clone()
    }
}

/// An engine plus the request queue it serves between ticks.
pub struct Runtime {
    pub engine: Engine,
    requests: Receiver<Request>,
    hub: Arc<ControlHub>,
}

impl Runtime {
    pub fn new(engine: Engine) -> Self {
        let (hub, requests) = ControlHub::new(engine.show().tick_rate);
        Runtime { engine, requests, hub }
    }

    pub fn hub(&self) -> Arc<ControlHub> {
        Arc::clone(&self.hub)
    }

    /// Applies queued commands, then ticks once and publishes.
    pub fn step(&mut self, dt: f64) -> Result<TickOutput, EngineError> {
        self.drain();
        let out = self.engine.tick(dt)?;
        self.hub.publish(&out, self.engine.state_version());
        Ok(out)
    }

    pub fn drain(&mut self) {
        while let Ok(req) = self.requests.try_recv() {
            let _ = req.reply.send(self.engine.apply(&req.command, "control"));
        }
    }
}

struct Subscriptions {
    frame_interval: Option<Duration>,
    next_frame: Instant,
    last_frame: Option<u64>,
    state: bool,
    last_state: Option<u64>,
}

/// Accepts WebSocket clients until `stop` is set.
pub fn serve_control(listener: TcpListener, hub: Arc<ControlHub>, stop: Arc<AtomicBool>) -> io::Result<JoinHandle<()>> {
    listener.set_nonblocking(true)?;
    Ok(thread::spawn(move || {
        let mut clients: Vec<JoinHandle<()>> = Vec::new();
        while !stop.load(Ordering::Relaxed) {
            match listener.accept() {
                Ok((conn, _)) => {
                    let (hub, stop) = (Arc::clone(&hub), Arc::clone(&stop));
                    clients.push(thread::spawn(move || {
                        let _ = serve_client(conn, &hub, &stop);
                    }));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
                Err(_) => thread::sleep(Duration::from_millis(50)),
            }
            clients.retain(|c| !c.is_finished());
        }
        for c in clients {
            let _ = c.join();
        }
    }))
}

fn error_message(request: Option<&str>, id: &Value, message: &str) -> String {
    let mut v = json!({"type": "error", "message": message});
    if let Some(r) = request {
        v["request"] = json!(r);
    }
    if !id.is_null() {
        v["id"] = id.clone();
    }
    v.to_string()
}

fn with_id(mut v: Value, id: &Value) -> String {
    if !id.is_null() {
        v["id"] = id.clone();
    }
    v.to_string()
}

/// One reply message for one client text message.
fn handle_text(text: &str, hub: &ControlHub, subs: &mut Subscriptions) -> String {
    let v: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return error_message(None, &Value::Null, &format!("malformed JSON: {e}")),
    };
    let id = v.get("id").cloned().unwrap_or(Value::Null);
    let Some(kind) = v.get("type").and_then(Value::as_str) else {
        return error_message(None, &id, "message needs a string `type`");
    };
    match kind {
        "ping" => {
            let (tick, clock) = hub.clock();
            let wall = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
            with_id(json!({"type": "pong", "tick": tick, "clock": clock, "server_time": wall}), &id)
        }
        "subscribe_frames" => {
            let rate = match v.pointer("/args/rate") {
                None | Some(Value::Null) => DEFAULT_FRAME_RATE,
                Some(r) => match r.as_f64() {
                    Some(r) if r > 0.0 && r.is_finite() => r,
                    _ => return error_message(Some(kind), &id, "rate must be a positive number"),
                },
            };
            let rate = rate.min(hub.max_frame_rate);
            subs.frame_interval = Some(Duration::from_secs_f64(1.0 / rate));
            subs.next_frame = Instant::now();
            with_id(json!({"type": "subscribed", "stream": "frames", "rate": rate}), &id)
        }
        "subscribe_state" => {
            subs.state = true;
            subs.last_state = None;
            with_id(json!({"type": "subscribed", "stream": "state"}), &id)
        }
        "unsubscribe" => {
            subs.frame_interval = None;
            subs.state = false;
            with_id(json!({"type": "unsubscribed"}), &id)
        }
        _ => {
            let mut cmd = serde_json::Map::new();
            cmd.insert("type".into(), json!(kind));
            if let Some(args) = v.get("args") {
                cmd.insert("args".into(), args.clone());
            }
            let command: Command = match serde_json::from_value(Value::Object(cmd)) {
                Ok(c) => c,
                Err(e) => {
                    let msg = if e.to_string().starts_with("unknown variant") {
                        format!("unknown message type `{kind}`")
                    } else {
                        format!("bad arguments: {e}")
                    };
                    return error_message(Some(kind), &id, &msg);
                }
            };
            match hub.submit(command) {
                Ok(reply) => {
                    let mut r = serde_json::to_value(&reply).expect("replies serialize");
                    r["type"] = json!("reply");
                    with_id(r, &id)
                }
                Err(message) => error_message(Some(kind), &id, &message),
            }
        }
    }
}

fn would_block(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut))
}

fn serve_client(conn: TcpStream, hub: &ControlHub, stop: &AtomicBool) -> Result<(), tungstenite::Error> {
    conn.set_nonblocking(false)?;
    conn.set_nodelay(true)?;
    let mut ws: WebSocket<TcpStream> = tungstenite::accept(conn).map_err(|e| match e {
        tungstenite::HandshakeError::Failure(f) => f,
        tungstenite::HandshakeError::Interrupted(_) => tungstenite::Error::ConnectionClosed,
    })?;
    ws.get_mut().set_read_timeout(Some(READ_POLL))?;
    let mut subs = Subscriptions {
        frame_interval: None,
        next_frame: Instant::now(),
        last_frame: None,
        state: false,
        last_state: None,
    };
    while !stop.load(Ordering::Relaxed) {
        match ws.read() {
            Ok(Message::Text(t)) => {
                let reply = handle_text(t.as_str(), hub, &mut subs);
                ws.send(Message::text(reply))?;
            }
            Ok(Message::Binary(_)) => {
                ws.send(Message::text(error_message(None, &Value::Null, "binary messages are not part of the protocol")))?;
                let _ = ws.close(None);
                let _ = ws.flush();
                return Ok(());
            }
            Ok(Message::Close(_)) => {
                let _ = ws.flush();
                return Ok(());
            }
            Ok(_) => {}
            Err(e) if would_block(&e) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e),
        }
        if let Some(interval) = subs.frame_interval {
            let now = Instant::now();
            if now >= subs.next_frame {
                if let Some((tick, text)) = hub.latest_frame() {
                    if subs.last_frame != Some(tick) {
                        ws.send(Message::text(text.as_str()))?;
                        subs.last_frame = Some(tick);
                    }
                }
                subs.next_frame += interval;
                if subs.next_frame < now {
                    subs.next_frame = now + interval;
                }
            }
        }
        if subs.state {
            if let Some((version, text)) = hub.latest_state() {
                if subs.last_state != Some(version) {
                    ws.send(Message::text(text.as_str()))?;
                    subs.last_state = Some(version);
                }
            }
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(())
}
