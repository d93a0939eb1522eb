//! TCP intake for live mocap streams, plus a BVH-driven sender.
//!
//! Each listening port feeds exactly one avatar and holds at most one
//! connection at a time; later connections are closed until it drops.

use std::io::{self, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use castelet_core::skeleton::Skeleton;

use crate::bvh::{hierarchy_text, row_to_pose, BvhDocument};
use crate::mailbox::StreamHub;
use crate::show::same_hierarchy;
use crate::stream::{encode_frame, encode_handshake, StreamDecoder, StreamEvent, StreamFrame, StreamHeader, PROTOCOL_VERSION};

const POLL: Duration = Duration::from_millis(50);

/// The stream one port expects.
#[derive(Clone, Debug)]
pub struct MocapTarget {
    pub oav: usize,
    /// In file units, as a handshake would carry it.
    pub skeleton: Skeleton,
    pub unit_scale: f64,
}

/// Accepts connections on `listener` until `stop` is set.
pub fn serve_mocap(listener: TcpListener, hub: Arc<StreamHub>, target: MocapTarget, stop: Arc<AtomicBool>) -> io::Result<JoinHandle<()>> {
    listener.set_nonblocking(true)?;
    let busy = Arc::new(AtomicBool::new(false));
    Ok(thread::spawn(move || {
        let mut workers: Vec<JoinHandle<()>> = Vec::new();
        while !stop.load(Ordering::Relaxed) {
            match listener.accept() {
                Ok((conn, _)) => {
                    if busy.swap(true, Ordering::AcqRel) {
                        let _ = conn.shutdown(std::net::Shutdown::Both);
                        continue;
                    }
                    let (hub, target, stop, busy) = (Arc::clone(&hub), target.clone(), Arc::clone(&stop), Arc::clone(&busy));
                    workers.push(thread::spawn(move || {
                        hub.set_connected(target.oav, true);
                        if let Err(message) = handle_connection(conn, &hub, &target, &stop) {
                            hub.note_error(target.oav, message);
                        }
                        hub.set_connected(target.oav, false);
                        busy.store(false, Ordering::Release);
                    }));
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(10)),
                Err(_) => thread::sleep(POLL),
            }
            workers.retain(|w| !w.is_finished());
        }
        for w in workers {
            let _ = w.join();
        }
    }))
}

fn handle_connection(mut conn: TcpStream, hub: &StreamHub, target: &MocapTarget, stop: &AtomicBool) -> Result<(), String> {
    conn.set_nonblocking(false).map_err(|e| e.to_string())?;
    conn.set_read_timeout(Some(POLL)).map_err(|e| e.to_string())?;
    let mut decoder = StreamDecoder::new();
    let mut skeleton: Option<Skeleton> = None;
    let mut buf = vec![0u8; 64 * 1024];
    while !stop.load(Ordering::Relaxed) {
        let n = match conn.read(&mut buf) {
            Ok(0) => return Ok(()),
            Ok(n) => n,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
            Err(e) => return Err(e.to_string()),
        };
        for event in decoder.push(&buf[..n]).map_err(|e| e.to_string())? {
            match event {
                StreamEvent::Header { skeleton: s, .. } => {
                    if !same_hierarchy(&s, &target.skeleton) {
                        return Err("handshake hierarchy does not match the avatar's live source skeleton".into());
                    }
                    skeleton = Some(s);
                }
                StreamEvent::Frame(f) => {
                    let s = skeleton.as_ref().expect("frames follow the handshake");
                    let row: Vec<f64> = f.channels.iter().map(|&c| c as f64).collect();
                    hub.submit(target.oav, f.sequence, row_to_pose(s, &row, target.unit_scale));
                }
                StreamEvent::Gap { .. } => hub.note_gap(target.oav),
                StreamEvent::OutOfOrder { .. } => hub.note_out_of_order(target.oav),
            }
        }
    }
    Ok(())
}

/// Streams a document's frames. With `paced`, frames go out at the file's
/// frame time; otherwise as fast as the socket takes them.
pub struct MocapSender {
    conn: TcpStream,
    header: StreamHeader,
    next_sequence: u32,
}

impl MocapSender {
    pub fn connect(addr: impl ToSocketAddrs, doc: &BvhDocument) -> io::Result<Self> {
        let mut conn = TcpStream::connect(addr)?;
        conn.set_nodelay(true)?;
        let header = StreamHeader {
            protocol_version: PROTOCOL_VERSION,
            hierarchy_text: hierarchy_text(&doc.skeleton),
            frame_time: doc.frame_time as f32,
            channel_count: doc.channel_count() as u32,
        };
        conn.write_all(&encode_handshake(&header))?;
        Ok(MocapSender {
            conn,
            header,
            next_sequence: 0,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    /// Sends one row and returns its sequence number.
    pub fn send_row(&mut self, row: &[f64]) -> io::Result<u32> {
        let sequence = self.next_sequence;
        let mut out = Vec::with_capacity(4 + 4 * row.len());
        encode_frame(
            &StreamFrame {
                sequence,
                channels: row.iter().map(|&v| v as f32).collect(),
            },
            &mut out,
        );
        self.conn.write_all(&out)?;
        self.next_sequence += 1;
        Ok(sequence)
    }

    pub fn send_all(&mut self, doc: &BvhDocument, paced: bool, repeat: bool) -> io::Result<()> {
        let step = Duration::from_secs_f64(doc.frame_time);
        let start = Instant::now();
        let mut sent: u32 = 0;
        loop {
            for row in &doc.frames {
                if paced {
                    let due = start + step * sent;
                    if let Some(wait) = due.checked_duration_since(Instant::now()) {
                        thread::sleep(wait);
                    }
                }
                self.send_row(row)?;
                sent += 1;
            }
            if !repeat {
                return Ok(());
            }
        }
    }
}
