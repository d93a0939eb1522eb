//! Binary mocap stream: one handshake, then fixed-size frames.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! handshake: "CVOS" | u16 version | u32 hierarchy_len | hierarchy (UTF-8)
//!            | f32 frame_time | u32 channel_count
//! frame:     u32 sequence | channel_count × f32
//! ```

use castelet_core::skeleton::Skeleton;
use thiserror::Error;

use crate::bvh::{parse_hierarchy, BvhError};

pub const MAGIC: &[u8; 4] = b"CVOS";
pub const PROTOCOL_VERSION: u16 = 1;
const MAX_HIERARCHY_BYTES: u32 = 1 << 20;
const FIXED_HEADER: usize = 4 + 2 + 4;

#[derive(Clone, Debug, PartialEq)]
pub struct StreamHeader {
    pub protocol_version: u16,
    pub hierarchy_text: String,
    pub frame_time: f32,
    pub channel_count: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamFrame {
    pub sequence: u32,
    pub channels: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StreamError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    Version(u16),
    #[error("hierarchy of {0} bytes exceeds the limit")]
    HierarchyTooLarge(u32),
    #[error("hierarchy is not UTF-8")]
    NotUtf8,
    #[error("hierarchy: {0}")]
    Hierarchy(#[from] BvhError),
    #[error("header declares {declared} channels, hierarchy implies {implied}")]
    ChannelCount { declared: u32, implied: usize },
    #[error("frame time {0} is not positive")]
    FrameTime(f32),
}

pub fn encode_handshake(h: &StreamHeader) -> Vec<u8> {
    let text = h.hierarchy_text.as_bytes();
    let mut out = Vec::with_capacity(FIXED_HEADER + text.len() + 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&h.protocol_version.to_le_bytes());
    out.extend_from_slice(&(text.len() as u32).to_le_bytes());
    out.extend_from_slice(text);
    out.extend_from_slice(&h.frame_time.to_le_bytes());
    out.extend_from_slice(&h.channel_count.to_le_bytes());
    out
}

pub fn encode_frame(f: &StreamFrame, out: &mut Vec<u8>) {
    out.extend_from_slice(&f.sequence.to_le_bytes());
    for c in &f.channels {
        out.extend_from_slice(&c.to_le_bytes());
    }
}

pub fn encode_stream(h: &StreamHeader, frames: &[StreamFrame]) -> Vec<u8> {
    let mut out = encode_handshake(h);
    for f in frames {
        encode_frame(f, &mut out);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum StreamEvent {
    Header { header: StreamHeader, skeleton: Skeleton },
    Frame(StreamFrame),
    /// Sequence numbers were skipped; the frame itself is delivered.
    Gap { expected: u32, got: u32 },
    /// Not newer than the last delivered frame; dropped.
    OutOfOrder { last: u32, got: u32 },
}

#[derive(Debug)]
enum Phase {
    Handshake,
    Frames { channels: usize, last: Option<u32> },
}

/// Incremental decoder for one connection.
#[derive(Debug)]
pub struct StreamDecoder {
    buf: Vec<u8>,
    phase: Phase,
}

impl Default for StreamDecoder {
    fn default() -> Self {
        Self::new()
    }
}

fn u16_at(b: &[u8], i: usize) -> u16 {
    u16::from_le_bytes([b[i], b[i + 1]])
}

fn u32_at(b: &[u8], i: usize) -> u32 {
    u32::from_le_bytes([b[i], b[i + 1], b[i + 2], b[i + 3]])
}

impl StreamDecoder {
    pub fn new() -> Self {
        StreamDecoder {
            buf: Vec::new(),
            phase: Phase::Handshake,
        }
    }

    pub fn header_seen(&self) -> bool {
        matches!(self.phase, Phase::Frames { .. })
    }

    /// Feeds bytes and returns every event they complete. After an error the
    /// connection should be closed.
    pub fn push(&mut self, bytes: &[u8]) -> Result<Vec<StreamEvent>, StreamError> {
        self.buf.extend_from_slice(bytes);
        let mut events = Vec::new();
        let mut at = 0;
        loop {
            match &mut self.phase {
                Phase::Handshake => {
                    let b = &self.buf[at..];
                    if b.len() >= 4 && &b[..4] != MAGIC {
                        return Err(StreamError::BadMagic([b[0], b[1], b[2], b[3]]));
                    }
                    if b.len() < FIXED_HEADER {
                        break;
                    }
                    let version = u16_at(b, 4);
                    if version != PROTOCOL_VERSION {
                        return Err(StreamError::Version(version));
                    }
                    let len = u32_at(b, 6);
                    if len > MAX_HIERARCHY_BYTES {
                        return Err(StreamError::HierarchyTooLarge(len));
                    }
                    let total = FIXED_HEADER + len as usize + 8;
                    if b.len() < total {
                        break;
                    }
                    let text = std::str::from_utf8(&b[FIXED_HEADER..FIXED_HEADER + len as usize])
                        .map_err(|_| StreamError::NotUtf8)?;
                    let tail = FIXED_HEADER + len as usize;
                    let frame_time = f32::from_le_bytes(b[tail..tail + 4].try_into().expect("4 bytes"));
                    let channel_count = u32_at(b, tail + 4);
                    let skeleton = parse_hierarchy(text)?;
                    if skeleton.channel_count() != channel_count as usize {
                        return Err(StreamError::ChannelCount {
                            declared: channel_count,
                            implied: skeleton.channel_count(),
                        });
                    }
                    if !(frame_time > 0.0 && frame_time.is_finite()) {
                        return Err(StreamError::FrameTime(frame_time));
                    }
                    let header = StreamHeader {
                        protocol_version: version,
                        hierarchy_text: text.to_owned(),
                        frame_time,
                        channel_count,
                    };
                    events.push(StreamEvent::Header { header, skeleton });
                    self.phase = Phase::Frames {
                        channels: channel_count as usize,
                        last: None,
                    };
                    at += total;
                }
                Phase::Frames { channels, last } => {
                    let size = 4 + 4 * *channels;
                    let b = &self.buf[at..];
                    if b.len() < size {
                        break;
                    }
                    let sequence = u32_at(b, 0);
                    at += size;
                    match *last {
                        Some(l) if sequence <= l => {
                            events.push(StreamEvent::OutOfOrder { last: l, got: sequence });
                            continue;
                        }
                        Some(l) if sequence > l + 1 => events.push(StreamEvent::Gap {
                            expected: l + 1,
                            got: sequence,
                        }),
                        _ => {}
                    }
                    *last = Some(sequence);
                    let channels = b[4..size]
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .collect();
                    events.push(StreamEvent::Frame(StreamFrame { sequence, channels }));
                }
            }
        }
        self.buf.drain(..at);
        Ok(events)
    }

    /// Ends the stream; returns how many buffered bytes of an incomplete
    /// frame or handshake were discarded.
    pub fn finish(self) -> usize {
        self.buf.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HIER: &str = "HIERARCHY\nROOT Hips\n{\n\tOFFSET 0 0 0\n\tCHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n\tJOINT Spine\n\t{\n\t\tOFFSET 0 10 0\n\t\tCHANNELS 3 Zrotation Xrotation Yrotation\n\t}\n}\n";

    fn header() -> StreamHeader {
        StreamHeader {
            protocol_version: 1,
            hierarchy_text: HIER.into(),
            frame_time: 1.0 / 60.0,
            channel_count: 9,
        }
    }

    fn frame(sequence: u32) -> StreamFrame {
        StreamFrame {
            sequence,
            channels: (0..9).map(|i| i as f32 * 1.5 + sequence as f32).collect(),
        }
    }

    fn frames(ev: &[StreamEvent]) -> Vec<u32> {
        ev.iter()
            .filter_map(|e| match e {
                StreamEvent::Frame(f) => Some(f.sequence),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn header_only() {
        let mut d = StreamDecoder::new();
        let ev = d.push(&encode_handshake(&header())).unwrap();
        assert_eq!(ev.len(), 1);
        assert!(matches!(&ev[0], StreamEvent::Header { header: h, skeleton } if *h == header() && skeleton.len() == 2));
        assert_eq!(d.finish(), 0);
    }

    #[test]
    fn gap_is_reported_and_frame_kept() {
        let bytes = encode_stream(&header(), &[frame(1), frame(2), frame(4)]);
        let ev = StreamDecoder::new().push(&bytes).unwrap();
        assert_eq!(frames(&ev), vec![1, 2, 4]);
        let gaps: Vec<_> = ev.iter().filter(|e| matches!(e, StreamEvent::Gap { .. })).collect();
        assert_eq!(gaps, vec![&StreamEvent::Gap { expected: 3, got: 4 }]);
    }

    #[test]
    fn out_of_order_dropped() {
        let bytes = encode_stream(&header(), &[frame(5), frame(3), frame(5), frame(6)]);
        let ev = StreamDecoder::new().push(&bytes).unwrap();
        assert_eq!(frames(&ev), vec![5, 6]);
        assert!(ev.contains(&StreamEvent::OutOfOrder { last: 5, got: 3 }));
        assert!(ev.contains(&StreamEvent::OutOfOrder { last: 5, got: 5 }));
    }

    #[test]
    fn byte_at_a_time_and_partial_tail() {
        let mut bytes = encode_stream(&header(), &[frame(1), frame(2)]);
        bytes.extend_from_slice(&[1, 2, 3]);
        let mut d = StreamDecoder::new();
        let mut ev = Vec::new();
        for b in &bytes {
            ev.extend(d.push(std::slice::from_ref(b)).unwrap());
        }
        assert_eq!(frames(&ev), vec![1, 2]);
        assert_eq!(d.finish(), 3);
    }

    #[test]
    fn channels_bit_identical() {
        let fs: Vec<StreamFrame> = (0..100u32)
            .map(|s| StreamFrame {
                sequence: s,
                channels: (0..9).map(|i| f32::from_bits(0x3f80_0000 ^ (s * 7919 + i * 104_729))).collect(),
            })
            .collect();
        let ev = StreamDecoder::new().push(&encode_stream(&header(), &fs)).unwrap();
        let got: Vec<&StreamFrame> = ev
            .iter()
            .filter_map(|e| if let StreamEvent::Frame(f) = e { Some(f) } else { None })
            .collect();
        assert_eq!(got.len(), 100);
        for (a, b) in got.iter().zip(&fs) {
            assert_eq!(a.channels.iter().map(|c| c.to_bits()).collect::<Vec<_>>(), b.channels.iter().map(|c| c.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn handshake_rejections() {
        let mut bad = encode_handshake(&header());
        bad[0] = b'X';
        assert!(matches!(StreamDecoder::new().push(&bad), Err(StreamError::BadMagic(_))));
        let v2 = encode_handshake(&StreamHeader { protocol_version: 2, ..header() });
        assert_eq!(StreamDecoder::new().push(&v2), Err(StreamError::Version(2)));
        let count = encode_handshake(&StreamHeader { channel_count: 8, ..header() });
        assert_eq!(StreamDecoder::new().push(&count), Err(StreamError::ChannelCount { declared: 8, implied: 9 }));
        let hier = encode_handshake(&StreamHeader { hierarchy_text: "HIERARCHY\nROOT\n".into(), ..header() });
        assert!(matches!(StreamDecoder::new().push(&hier), Err(StreamError::Hierarchy(_))));
    }
}
