//! Latest-wins pose mailboxes between mocap connections and the tick loop.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use castelet_core::skeleton::Pose;
use serde::Serialize;

const RATE_WINDOW: Duration = Duration::from_secs(1);

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StreamHealth {
    pub oav: String,
    pub connected: bool,
    pub frames_received: u64,
    pub frames_per_second: f64,
    pub sequence_gaps: u64,
    pub out_of_order: u64,
    /// Poses overwritten before a tick consumed them.
    pub discarded: u64,
    pub last_sequence: Option<u32>,
    /// Seconds since the last frame arrived.
    pub last_frame_age: Option<f64>,
    /// Why the most recent connection was refused or closed, if it was.
    pub last_error: Option<String>,
}

#[derive(Default)]
struct Slot {
    pending: Option<(u32, Pose)>,
    connected: bool,
    received: u64,
    discarded: u64,
    gaps: u64,
    out_of_order: u64,
    last_sequence: Option<u32>,
    arrivals: VecDeque<Instant>,
    last_error: Option<String>,
}

pub struct StreamHub {
    ids: Vec<String>,
    slots: Vec<Mutex<Slot>>,
}

impl StreamHub {
    pub fn new(ids: Vec<String>) -> Self {
        let slots = ids.iter().map(|_| Mutex::new(Slot::default())).collect();
        StreamHub { ids, slots }
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|i| i == id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn slot(&self, i: usize) -> std::sync::MutexGuard<'_, Slot> {
        self.slots[i].lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn submit(&self, i: usize, sequence: u32, pose: Pose) {
        let mut s = self.slot(i);
        if s.pending.replace((sequence, pose)).is_some() {
            s.discarded += 1;
        }
        s.received += 1;
        s.last_sequence = Some(sequence);
        let now = Instant::now();
        s.arrivals.push_back(now);
        while s.arrivals.front().is_some_and(|t| now.duration_since(*t) > RATE_WINDOW) {
            s.arrivals.pop_front();
        }
    }

    pub fn take(&self, i: usize) -> Option<(u32, Pose)> {
        self.slot(i).pending.take()
    }

    /// Sequence number of the pose waiting in the mailbox, if any.
    pub fn peek_sequence(&self, i: usize) -> Option<u32> {
        self.slot(i).pending.as_ref().map(|(s, _)| *s)
    }

    pub fn set_connected(&self, i: usize, connected: bool) {
        self.slot(i).connected = connected;
    }

    pub fn note_gap(&self, i: usize) {
        self.slot(i).gaps += 1;
    }

    pub fn note_out_of_order(&self, i: usize) {
        self.slot(i).out_of_order += 1;
    }

    pub fn note_error(&self, i: usize, message: impl Into<String>) {
        self.slot(i).last_error = Some(message.into());
    }

    pub fn clear_pending(&self) {
        for i in 0..self.slots.len() {
            self.slot(i).pending = None;
        }
    }

    pub fn health(&self) -> Vec<StreamHealth> {
        let now = Instant::now();
        (0..self.slots.len())
            .map(|i| {
                let s = self.slot(i);
                let recent = s.arrivals.iter().filter(|t| now.duration_since(**t) <= RATE_WINDOW).count();
                StreamHealth {
                    oav: self.ids[i].clone(),
                    connected: s.connected,
                    frames_received: s.received,
                    frames_per_second: recent as f64 / RATE_WINDOW.as_secs_f64(),
                    sequence_gaps: s.gaps,
                    out_of_order: s.out_of_order,
                    discarded: s.discarded,
                    last_sequence: s.last_sequence,
                    last_frame_age: s.arrivals.back().map(|t| now.duration_since(*t).as_secs_f64()),
                    last_error: s.last_error.clone(),
                }
            })
            .collect()
    }
}
