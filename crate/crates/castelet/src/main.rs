use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use castelet::bvh::{parse_bvh, serialize_bvh, split_document, BvhDocument};
use castelet::control::{serve_control, Runtime};
use castelet::engine::{Engine, TickOutput};
use castelet::log::{frame_json, read_log, EventLog, LOG_DIR_ENV};
use castelet::mocap::{serve_mocap, MocapSender, MocapTarget};
use castelet::session::{render, replay, Script};
use castelet::show::{load_show, Show};
use castelet::svg::frame_to_svg;
use castelet_core::scene::Rgba;
use clap::{Parser, Subcommand};
use serde_json::json;

/// Virtual castelet: load show bundles, cut takes, render and run shows.
#[derive(Parser)]
#[command(name = "castelet", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Load a show bundle and report every problem found.
    Validate { bundle: PathBuf },
    /// Cut a take into idle, action and idle clips at t1 and t2 seconds.
    Split {
        take: PathBuf,
        #[arg(long)]
        t1: f64,
        #[arg(long)]
        t2: f64,
        /// Comma-separated ids for the three products.
        #[arg(long, value_delimiter = ',', default_value = "idle_start,action,idle_end")]
        ids: Vec<String>,
        /// Rig name written into the clip sidecars.
        #[arg(long, default_value = "rig")]
        rig: String,
        #[arg(long, default_value_t = castelet::bvh::DEFAULT_UNIT_SCALE)]
        unit_scale: f64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Render a scripted run offline into a directory: `frames.ndjson`,
    /// `events.ndjson` (the session log) and `final_hash.txt`.
    Render {
        bundle: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write one SVG per frame into `svg/`.
        #[arg(long)]
        svg: bool,
    },
    /// Run a show live with the control and mocap services.
    Play {
        bundle: PathBuf,
        #[arg(long, default_value_t = 9000)]
        control_port: u16,
        /// `PORT` or `PORT:OAV`; without an avatar the first one with a live
        /// binding is used.
        #[arg(long)]
        mocap_port: Vec<String>,
        /// Stop after this many seconds.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Rebuild every frame of a session log and check it against the logged hashes.
    Replay {
        bundle: PathBuf,
        #[arg(long)]
        log: PathBuf,
        /// Write the replayed frames here as NDJSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stream a BVH file to a mocap port.
    Send {
        take: PathBuf,
        #[arg(long)]
        to: String,
        #[arg(long)]
        repeat: bool,
        /// Send as fast as possible instead of at the file's frame rate.
        #[arg(long)]
        unpaced: bool,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("castelet: {msg}");
    ExitCode::from(code)
}

fn load(bundle: &Path) -> Result<Show, ExitCode> {
    load_show(bundle).map_err(|report| {
        eprint!("{}: {report}", bundle.display());
        ExitCode::from(1)
    })
}

fn read_bvh(path: &Path) -> Result<BvhDocument, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_bvh(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Cmd::Validate { bundle } => validate(&bundle),
        Cmd::Split {
            take,
            t1,
            t2,
            ids,
            rig,
            unit_scale,
            out,
        } => split(&take, t1, t2, &ids, &rig, unit_scale, &out),
        Cmd::Render { bundle, script, out, svg } => run_render(&bundle, &script, &out, svg),
        Cmd::Play {
            bundle,
            control_port,
            mocap_port,
            duration,
        } => play(&bundle, control_port, &mocap_port, duration),
        Cmd::Replay { bundle, log, out } => run_replay(&bundle, &log, out.as_deref()),
        Cmd::Send {
            take,
            to,
            repeat,
            unpaced,
        } => send(&take, &to, repeat, !unpaced),
    }
}

fn validate(bundle: &Path) -> ExitCode {
    let show = match load(bundle) {
        Ok(s) => s,
        Err(code) => return code,
    };
    println!(
        "{}: ok ({} oavs, {} clips, {} cues)",
        show.title,
        show.scene.oavs.len(),
        show.library.len(),
        show.cues.len()
    );
    for w in &show.warnings {
        println!("warning: {w}");
    }
    ExitCode::SUCCESS
}

fn split(take: &Path, t1: f64, t2: f64, names: &[String], rig: &str, unit_scale: f64, out_dir: &Path) -> ExitCode {
    if t2 <= t1 {
        return fail(2, format!("t2 ({t2}) must be greater than t1 ({t1})"));
    }
    if names.len() != 3 {
        return fail(2, format!("--ids needs three ids, got {}", names.len()));
    }
    let doc = match read_bvh(take) {
        Ok(d) => d,
        Err(e) => return fail(1, e),
    };
    let parts = match split_document(&doc, t1, t2) {
        Ok(p) => p,
        Err(e) => return fail(2, e),
    };
    if let Err(e) = fs::create_dir_all(out_dir) {
        return fail(1, e);
    }
    let sidecars = [
        json!({"id": names[0], "kind": "idle", "skeleton": rig, "unit_scale": unit_scale}),
        json!({"id": names[1], "kind": "action", "skeleton": rig, "unit_scale": unit_scale,
               "start_idle": names[0], "end_idle": names[2]}),
        json!({"id": names[2], "kind": "idle", "skeleton": rig, "unit_scale": unit_scale}),
    ];
    for ((part, name), sidecar) in parts.iter().zip(names).zip(&sidecars) {
        let bvh = out_dir.join(format!("{name}.bvh"));
        let meta = out_dir.join(format!("{name}.clip.json"));
        let written = fs::write(&bvh, serialize_bvh(part))
            .and_then(|_| fs::write(&meta, serde_json::to_string_pretty(sidecar).expect("json") + "\n"));
        if let Err(e) = written {
            return fail(1, e);
        }
        println!("{}: {} frames", bvh.display(), part.frames.len());
    }
    ExitCode::SUCCESS
}

struct FrameSink {
    out: BufWriter<File>,
    svg: Option<(PathBuf, [f64; 2])>,
    error: Option<std::io::Error>,
}

impl FrameSink {
    fn new(out: &Path, svg: Option<&Path>, viewport: [f64; 2]) -> std::io::Result<Self> {
        if let Some(dir) = svg {
            fs::create_dir_all(dir)?;
        }
        Ok(FrameSink {
            out: BufWriter::new(File::create(out)?),
            svg: svg.map(|d| (d.to_path_buf(), viewport)),
            error: None,
        })
    }

    fn write(&mut self, o: &TickOutput) {
        if self.error.is_some() {
            return;
        }
        let mut r = self.out.write_all(&frame_json(&o.frame)).and_then(|_| self.out.write_all(b"\n"));
        if let (Ok(()), Some((dir, viewport))) = (&r, &self.svg) {
            let doc = frame_to_svg(&o.frame, *viewport, Rgba::new(0.96, 0.91, 0.78, 1.0));
            r = fs::write(dir.join(format!("frame_{:06}.svg", o.frame.tick)), doc);
        }
        self.error = r.err();
    }

    fn finish(mut self) -> std::io::Result<()> {
        match self.error.take() {
            Some(e) => Err(e),
            None => self.out.flush(),
        }
    }
}

fn run_render(bundle: &Path, script: &Path, out: &Path, svg: bool) -> ExitCode {
    let show = match load(bundle) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let script: Script = match fs::read_to_string(script).map_err(|e| e.to_string()).and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string())) {
        Ok(s) => s,
        Err(e) => return fail(1, format!("{}: {e}", script.display())),
    };
    let viewport = show.scene.camera.viewport;
    if let Err(e) = fs::create_dir_all(out) {
        return fail(1, format!("{}: {e}", out.display()));
    }
    let log = match File::create(out.join("events.ndjson")) {
        Ok(f) => EventLog::new(BufWriter::new(f)),
        Err(e) => return fail(1, format!("{}: {e}", out.display())),
    };
    let mut engine = Engine::new(show).with_log(log);
    let svg_dir = out.join("svg");
    let mut sink = match FrameSink::new(&out.join("frames.ndjson"), svg.then_some(svg_dir.as_path()), viewport) {
        Ok(s) => s,
        Err(e) => return fail(1, e),
    };
    let summary = match render(&mut engine, &script, |o| sink.write(o)) {
        Ok(s) => s,
        Err(e) => return fail(1, e),
    };
    engine.flush_log();
    let written = sink.finish().and_then(|_| fs::write(out.join("final_hash.txt"), format!("{}\n", summary.final_hash)));
    if let Err(e) = written {
        return fail(1, e);
    }
    for (tick, msg) in &summary.refused {
        eprintln!("tick {tick}: refused {msg}");
    }
    println!("frames: {}", summary.frames);
    println!("final hash: {}", summary.final_hash);
    ExitCode::SUCCESS
}

fn run_replay(bundle: &Path, log: &Path, out: Option<&Path>) -> ExitCode {
    let records = match File::open(log).and_then(|f| read_log(BufReader::new(f))) {
        Ok(r) => r,
        Err(e) => return fail(1, format!("{}: {e}", log.display())),
    };
    let show = match load(bundle) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let viewport = show.scene.camera.viewport;
    let mut sink = match out.map(|o| FrameSink::new(o, None, viewport)).transpose() {
        Ok(s) => s,
        Err(e) => return fail(1, e),
    };
    let summary = match replay(&mut Engine::new(show), &records, |o| {
        if let Some(s) = &mut sink {
            s.write(o)
        }
    }) {
        Ok(s) => s,
        Err(e) => return fail(1, e),
    };
    if let Some(Err(e)) = sink.map(FrameSink::finish) {
        return fail(1, e);
    }
    println!("frames: {}", summary.frames);
    println!("final hash: {}", summary.final_hash);
    if summary.mismatches.is_empty() {
        println!("all frame hashes match");
        ExitCode::SUCCESS
    } else {
        for m in summary.mismatches.iter().take(10) {
            eprintln!("tick {}: logged {} replayed {}", m.tick, m.logged, m.replayed);
        }
        fail(1, format!("{} frame(s) differ from the log", summary.mismatches.len()))
    }
}

fn mocap_targets(show: &Show, specs: &[String]) -> Result<Vec<(u16, MocapTarget)>, String> {
    let mut out: Vec<(u16, MocapTarget)> = Vec::new();
    for spec in specs {
        let (port, oav) = match spec.split_once(':') {
            Some((p, o)) => (p, Some(o)),
            None => (spec.as_str(), None),
        };
        let port: u16 = port.parse().map_err(|_| format!("bad mocap port `{spec}`"))?;
        let i = match oav {
            Some(id) => show.oav_index(id).ok_or_else(|| format!("unknown oav `{id}`"))?,
            None => show
                .live_sources
                .iter()
                .enumerate()
                .position(|(i, l)| l.is_some() && !out.iter().any(|(_, t)| t.oav == i))
                .ok_or_else(|| format!("no live-capable oav left for port {port}"))?,
        };
        let live = show.live_sources[i]
            .as_ref()
            .ok_or_else(|| format!("oav `{}` has no live binding", show.scene.oavs[i].id))?;
        if out.iter().any(|(_, t)| t.oav == i) {
            return Err(format!("oav `{}` is already fed by another port", show.scene.oavs[i].id));
        }
        out.push((
            port,
            MocapTarget {
                oav: i,
                skeleton: live.file_skeleton.clone(),
                unit_scale: live.unit_scale,
            },
        ));
    }
    Ok(out)
}

fn play(bundle: &Path, control_port: u16, mocap: &[String], duration: Option<f64>) -> ExitCode {
    let show = match load(bundle) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let targets = match mocap_targets(&show, mocap) {
        Ok(t) => t,
        Err(e) => return fail(2, e),
    };
    let log_dir = std::env::var_os(LOG_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("logs"));
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let log_path = log_dir.join(format!("session-{stamp}.ndjson"));
    let log = match fs::create_dir_all(&log_dir).and_then(|_| File::create(&log_path)) {
        Ok(f) => EventLog::new(BufWriter::new(f)),
        Err(e) => return fail(1, format!("{}: {e}", log_path.display())),
    };
    let dt = show.tick_duration();
    let title = show.title.clone();
    let engine = Engine::new(show).with_log(log).with_recording_dir(log_dir.join("takes"));
    let hub = engine.hub();
    let mut rt = Runtime::new(engine);
    let stop = Arc::new(AtomicBool::new(false));

    let mut threads = Vec::new();
    let listener = match TcpListener::bind(("0.0.0.0", control_port)) {
        Ok(l) => l,
        Err(e) => return fail(1, format!("control port {control_port}: {e}")),
    };
    match serve_control(listener, rt.hub(), Arc::clone(&stop)) {
        Ok(h) => threads.push(h),
        Err(e) => return fail(1, e),
    }
    for (port, target) in targets {
        let id = rt.engine.show().scene.oavs[target.oav].id.clone();
        let listener = match TcpListener::bind(("0.0.0.0", port)) {
            Ok(l) => l,
            Err(e) => return fail(1, format!("mocap port {port}: {e}")),
        };
        match serve_mocap(listener, Arc::clone(&hub), target, Arc::clone(&stop)) {
            Ok(h) => threads.push(h),
            Err(e) => return fail(1, e),
        }
        println!("mocap for `{id}` on port {port}");
    }
    println!("{title}: control on ws://0.0.0.0:{control_port}, log {}", log_path.display());

    let start = Instant::now();
    let step = Duration::from_secs_f64(dt);
    let mut k: u32 = 0;
    let code = loop {
        if duration.is_some_and(|d| start.elapsed().as_secs_f64() >= d) {
            break ExitCode::SUCCESS;
        }
        if let Err(e) = rt.step(dt) {
            break fail(1, e);
        }
        k = k.wrapping_add(1);
        if k % 60 == 0 {
            rt.engine.flush_log();
        }
        if let Some(wait) = (start + step * k).checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
    };
    rt.engine.flush_log();
    stop.store(true, Ordering::Relaxed);
    for t in threads {
        let _ = t.join();
    }
    code
}

fn send(take: &Path, to: &str, repeat: bool, paced: bool) -> ExitCode {
    let doc = match read_bvh(take) {
        Ok(d) => d,
        Err(e) => return fail(1, e),
    };
    let mut sender = match MocapSender::connect(to, &doc) {
        Ok(s) => s,
        Err(e) => return fail(1, format!("{to}: {e}")),
    };
    match sender.send_all(&doc, paced, repeat) {
        Ok(()) => {
            println!("sent {} frames", doc.frames.len());
            ExitCode::SUCCESS
        }
        Err(e) => fail(1, e),
    }
}
