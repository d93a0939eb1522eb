//! BVH text format.

use std::fmt::Write as _;

use castelet_core::clips::{cut_indices, Take};
use castelet_core::error::{ClipError, PoseError, SkeletonError};
use castelet_core::math::{quaternion_to_euler, Quat, Vec3};
use castelet_core::skeleton::{Channel, Joint, Pose, Skeleton};
use thiserror::Error;

/// Centimeters to meters.
pub const DEFAULT_UNIT_SCALE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct BvhError {
    pub line: usize,
    pub kind: BvhErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BvhErrorKind {
    #[error("expected `{expected}`, found `{found}`")]
    Expected { expected: &'static str, found: String },
    #[error("unexpected end of input, expected `{0}`")]
    Eof(&'static str),
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("`{0}` is not a number")]
    NotNumber(String),
    #[error("unsupported channel `{0}`")]
    UnknownChannel(String),
    #[error("CHANNELS declares {declared} labels but lists {listed}")]
    ChannelCount { declared: usize, listed: usize },
    #[error("joint has more than one End Site")]
    DuplicateEndSite,
    #[error("motion row has {got} values, hierarchy declares {expected} channels")]
    RowLength { expected: usize, got: usize },
    #[error("header declares {declared} frames, found {found}")]
    FrameCount { declared: usize, found: usize },
    #[error("frame time must be positive, got {0}")]
    FrameTime(f64),
    #[error("at least one frame is required")]
    NoFrames,
    #[error("joints are not in depth-first declaration order at `{0}`")]
    NotPreorder(String),
    #[error(transparent)]
    Skeleton(#[from] SkeletonError),
}

fn err(line: usize, kind: BvhErrorKind) -> BvhError {
    BvhError { line, kind }
}

/// Channel values stay in file units: degrees and source lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct BvhDocument {
    pub skeleton: Skeleton,
    pub frame_time: f64,
    pub frames: Vec<Vec<f64>>,
}

impl BvhDocument {
    pub fn new(skeleton: Skeleton, frame_time: f64, frames: Vec<Vec<f64>>) -> Result<Self, BvhError> {
        check_preorder(&skeleton)?;
        if !(frame_time > 0.0 && frame_time.is_finite()) {
            return Err(err(0, BvhErrorKind::FrameTime(frame_time)));
        }
        if frames.is_empty() {
            return Err(err(0, BvhErrorKind::NoFrames));
        }
        let expected = skeleton.channel_count();
        if let Some(row) = frames.iter().find(|r| r.len() != expected) {
            return Err(err(0, BvhErrorKind::RowLength { expected, got: row.len() }));
        }
        Ok(BvhDocument {
            skeleton,
            frame_time,
            frames,
        })
    }

    pub fn channel_count(&self) -> usize {
        self.skeleton.channel_count()
    }
}

fn check_preorder(skeleton: &Skeleton) -> Result<(), BvhError> {
    let mut stack: Vec<usize> = vec![0];
    for (i, j) in skeleton.joints().iter().enumerate().skip(1) {
        let parent = j.parent.expect("validated skeleton has a single root");
        while stack.last().is_some_and(|&top| top != parent) {
            stack.pop();
        }
        if stack.is_empty() {
            return Err(err(0, BvhErrorKind::NotPreorder(j.name.clone())));
        }
        stack.push(i);
    }
    Ok(())
}

struct Tokens<'a> {
    toks: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Tokens<'a> {
    fn new(lines: impl Iterator<Item = (usize, &'a str)>) -> Self {
        let toks: Vec<_> = lines.flat_map(|(n, l)| l.split_whitespace().map(move |t| (n, t))).collect();
        let last_line = toks.last().map_or(1, |t| t.0);
        Tokens { toks, pos: 0, last_line }
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(|t| t.1)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).map_or(self.last_line, |t| t.0)
    }

    fn next(&mut self, what: &'static str) -> Result<(usize, &'a str), BvhError> {
        let t = self.toks.get(self.pos).copied().ok_or_else(|| err(self.last_line, BvhErrorKind::Eof(what)))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, word: &'static str) -> Result<(), BvhError> {
        let (line, t) = self.next(word)?;
        if t != word {
            return Err(err(line, BvhErrorKind::Expected { expected: word, found: t.into() }));
        }
        Ok(())
    }

    fn number(&mut self) -> Result<f64, BvhError> {
        let (line, t) = self.next("number")?;
        parse_number(t).ok_or_else(|| err(line, BvhErrorKind::NotNumber(t.into())))
    }

    fn vec3(&mut self) -> Result<Vec3, BvhError> {
        Ok(Vec3::new(self.number()?, self.number()?, self.number()?))
    }
}

fn parse_number(t: &str) -> Option<f64> {
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_joint(tok: &mut Tokens, parent: Option<usize>, joints: &mut Vec<Joint>) -> Result<(), BvhError> {
    let (_, name) = tok.next("joint name")?;
    tok.expect("{")?;
    tok.expect("OFFSET")?;
    let offset = tok.vec3()?;
    let mut joint = Joint::new(name, parent, offset);
    if tok.peek() == Some("CHANNELS") {
        tok.next("CHANNELS")?;
        let line = tok.line();
        let n = tok.number()?;
        if n < 0.0 || n.fract() != 0.0 {
            return Err(err(line, BvhErrorKind::NotNumber(n.to_string())));
        }
        let n = n as usize;
        for listed in 0..n {
            let (line, label) = tok.next("channel label")?;
            match Channel::parse(label) {
                Some(c) => joint.channels.push(c),
                None if label == "}" || label == "JOINT" || label == "End" => {
                    return Err(err(line, BvhErrorKind::ChannelCount { declared: n, listed }))
                }
                None => return Err(err(line, BvhErrorKind::UnknownChannel(label.into()))),
            }
        }
        if tok.peek().is_some_and(|t| Channel::parse(t).is_some()) {
            return Err(err(tok.line(), BvhErrorKind::ChannelCount { declared: n, listed: n + 1 }));
        }
    }
    let index = joints.len();
    joints.push(joint);
    loop {
        let (line, t) = tok.next("}")?;
        match t {
            "}" => return Ok(()),
            "JOINT" => parse_joint(tok, Some(index), joints)?,
            "End" | "EndSite" => {
                if t == "End" {
                    tok.expect("Site")?;
                }
                tok.expect("{")?;
                tok.expect("OFFSET")?;
                let site = tok.vec3()?;
                tok.expect("}")?;
                if joints[index].end_site.replace(site).is_some() {
                    return Err(err(line, BvhErrorKind::DuplicateEndSite));
                }
            }
            other => {
                return Err(err(line, BvhErrorKind::Expected { expected: "JOINT, End Site or }", found: other.into() }))
            }
        }
    }
}

fn parse_hierarchy_tokens(tok: &mut Tokens) -> Result<Skeleton, BvhError> {
    match tok.peek() {
        Some("HIERARCHY") => tok.next("HIERARCHY")?,
        _ => return Err(err(tok.line(), BvhErrorKind::MissingSection("HIERARCHY"))),
    };
    tok.expect("ROOT")?;
    let mut joints = Vec::new();
    parse_joint(tok, None, &mut joints)?;
    let line = tok.line();
    Skeleton::new(joints).map_err(|e| err(line, e.into()))
}

/// Parses a HIERARCHY block on its own, as sent in the stream handshake.
pub fn parse_hierarchy(text: &str) -> Result<Skeleton, BvhError> {
    let mut tok = Tokens::new(text.lines().enumerate().map(|(i, l)| (i + 1, l)));
    let sk = parse_hierarchy_tokens(&mut tok)?;
    if let Some(t) = tok.peek() {
        return Err(err(tok.line(), BvhErrorKind::Expected { expected: "end of hierarchy", found: t.into() }));
    }
    Ok(sk)
}

pub fn parse_bvh(text: &str) -> Result<BvhDocument, BvhError> {
    let lines: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    let motion_at = lines
        .iter()
        .position(|(_, l)| l.split_whitespace().next() == Some("MOTION"))
        .ok_or_else(|| err(lines.last().map_or(1, |l| l.0), BvhErrorKind::MissingSection("MOTION")))?;
    let mut tok = Tokens::new(lines[..motion_at].iter().copied());
    let skeleton = parse_hierarchy_tokens(&mut tok)?;
    if let Some(t) = tok.peek() {
        return Err(err(tok.line(), BvhErrorKind::Expected { expected: "MOTION", found: t.into() }));
    }

    // Header: "Frames: N" and "Frame Time: t", then one row per line.
    let (motion_line, motion) = lines[motion_at];
    let mut rest = lines[motion_at + 1..].iter().copied().filter(|(_, l)| !l.trim().is_empty());
    if let Some(t) = motion.split_whitespace().nth(1) {
        return Err(err(motion_line, BvhErrorKind::Expected { expected: "end of line", found: t.into() }));
    }
    let (frames_line, frames_text) = rest.next().ok_or_else(|| err(motion_line, BvhErrorKind::Eof("Frames:")))?;
    let mut head = Tokens::new(std::iter::once((frames_line, frames_text)));
    let declared = header_value(&mut head, &["Frames:"])?;
    if declared < 0.0 || declared.fract() != 0.0 {
        return Err(err(frames_line, BvhErrorKind::NotNumber(declared.to_string())));
    }
    let declared = declared as usize;
    let (time_line, time_text) = rest.next().ok_or_else(|| err(frames_line, BvhErrorKind::Eof("Frame Time:")))?;
    head = Tokens::new(std::iter::once((time_line, time_text)));
    let frame_time = header_value(&mut head, &["Frame", "Time:"])?;
    if !(frame_time > 0.0) {
        return Err(err(time_line, BvhErrorKind::FrameTime(frame_time)));
    }

    let expected = skeleton.channel_count();
    let mut frames = Vec::with_capacity(declared);
    let mut last_line = time_line;
    for (line, text) in rest {
        if frames.len() == declared {
            return Err(err(line, BvhErrorKind::FrameCount { declared, found: declared + 1 }));
        }
        let row = text
            .split_whitespace()
            .map(|t| parse_number(t).ok_or_else(|| err(line, BvhErrorKind::NotNumber(t.into()))))
            .collect::<Result<Vec<f64>, _>>()?;
        if row.len() != expected {
            return Err(err(line, BvhErrorKind::RowLength { expected, got: row.len() }));
        }
        frames.push(row);
        last_line = line;
    }
    if frames.len() != declared {
        return Err(err(last_line, BvhErrorKind::FrameCount { declared, found: frames.len() }));
    }
    if frames.is_empty() {
        return Err(err(frames_line, BvhErrorKind::NoFrames));
    }
    Ok(BvhDocument {
        skeleton,
        frame_time,
        frames,
    })
}

fn header_value(tok: &mut Tokens, words: &[&'static str]) -> Result<f64, BvhError> {
    for w in words {
        tok.expect(w)?;
    }
    let v = tok.number()?;
    if let Some(t) = tok.peek() {
        return Err(err(tok.line(), BvhErrorKind::Expected { expected: "end of line", found: t.into() }));
    }
    Ok(v)
}

fn children(skeleton: &Skeleton) -> Vec<Vec<usize>> {
    let mut c = vec![Vec::new(); skeleton.len()];
    for (i, j) in skeleton.joints().iter().enumerate() {
        if let Some(p) = j.parent {
            c[p].push(i);
        }
    }
    c
}

/// Rust's shortest round-trip decimal form.
fn num(v: f64) -> String {
    format!("{v}")
}

fn write_joint(out: &mut String, sk: &Skeleton, kids: &[Vec<usize>], i: usize, depth: usize) {
    let j = &sk.joints()[i];
    let pad = "\t".repeat(depth);
    let kw = if j.parent.is_none() { "ROOT" } else { "JOINT" };
    let o = j.offset;
    let _ = writeln!(out, "{pad}{kw} {}\n{pad}{{", j.name);
    let _ = writeln!(out, "{pad}\tOFFSET {} {} {}", num(o.x), num(o.y), num(o.z));
    if !j.channels.is_empty() {
        let labels: Vec<&str> = j.channels.iter().map(|c| c.label()).collect();
        let _ = writeln!(out, "{pad}\tCHANNELS {} {}", labels.len(), labels.join(" "));
    }
    for &k in &kids[i] {
        write_joint(out, sk, kids, k, depth + 1);
    }
    if let Some(e) = j.end_site {
        let _ = writeln!(out, "{pad}\tEnd Site\n{pad}\t{{\n{pad}\t\tOFFSET {} {} {}\n{pad}\t}}", num(e.x), num(e.y), num(e.z));
    }
    let _ = writeln!(out, "{pad}}}");
}

/// The HIERARCHY block, terminated by a newline.
pub fn hierarchy_text(skeleton: &Skeleton) -> String {
    let mut out = String::from("HIERARCHY\n");
    write_joint(&mut out, skeleton, &children(skeleton), 0, 0);
    out
}

pub fn serialize_bvh(doc: &BvhDocument) -> String {
    let mut out = hierarchy_text(&doc.skeleton);
    let _ = writeln!(out, "MOTION\nFrames: {}\nFrame Time: {}", doc.frames.len(), num(doc.frame_time));
    for row in &doc.frames {
        let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// Converts one channel row. Rotations compose in declared order; root
/// position channels become the root translation scaled by `unit_scale`.
/// Position channels on other joints carry no pose information here.
pub fn row_to_pose(skeleton: &Skeleton, row: &[f64], unit_scale: f64) -> Pose {
    let mut pose = Pose::identity(skeleton.len());
    let mut col = 0;
    for (ji, j) in skeleton.joints().iter().enumerate() {
        let mut q = Quat::IDENTITY;
        let mut t = [0.0; 3];
        for c in &j.channels {
            let v = row[col];
            col += 1;
            if c.is_rotation() {
                q = q * Quat::from_axis_angle(c.axis().unit(), v.to_radians());
            } else {
                t[c.axis() as usize] = v;
            }
        }
        pose.rotations[ji] = q.normalized();
        if ji == 0 {
            pose.root_translation = Vec3::from_array(t) * unit_scale;
        }
    }
    pose
}

pub fn frames_to_take(
    id: &str,
    skeleton_ref: &str,
    skeleton: &Skeleton,
    frame_time: f64,
    rows: &[Vec<f64>],
    unit_scale: f64,
) -> Result<Take, ClipError> {
    let poses = rows.iter().map(|r| row_to_pose(skeleton, r, unit_scale)).collect();
    Take::new(id, skeleton_ref, frame_time, poses)
}

/// Cuts a document into starting idle, action and ending idle, sharing the
/// snapped boundary rows exactly.
pub fn split_document(doc: &BvhDocument, t1: f64, t2: f64) -> Result<[BvhDocument; 3], ClipError> {
    let (c1, c2) = cut_indices(doc.frames.len(), doc.frame_time, t1, t2)?;
    let part = |rows: &[Vec<f64>]| BvhDocument {
        skeleton: doc.skeleton.clone(),
        frame_time: doc.frame_time,
        frames: rows.to_vec(),
    };
    Ok([part(&doc.frames[..=c1]), part(&doc.frames[c1..=c2]), part(&doc.frames[c2..])])
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExportError {
    #[error("joint `{0}` is rotated but lacks three rotation channels")]
    PartialRotation(String),
    #[error(transparent)]
    Pose(#[from] PoseError),
}

/// Inverse of [`row_to_pose`]. Non-root position channels get the joint offset.
pub fn pose_to_row(skeleton: &Skeleton, pose: &Pose, unit_scale: f64) -> Result<Vec<f64>, ExportError> {
    pose.check(skeleton.len())?;
    let mut row = Vec::with_capacity(skeleton.channel_count());
    for (ji, (j, q)) in skeleton.joints().iter().zip(&pose.rotations).enumerate() {
        let angles = match j.rotation_order() {
            Some(order) => quaternion_to_euler(*q, order),
            None if q.angle_to(Quat::IDENTITY) < 1e-9 => [0.0; 3],
            None => return Err(ExportError::PartialRotation(j.name.clone())),
        };
        let translation = if ji == 0 { pose.root_translation / unit_scale } else { j.offset };
        let mut r = 0;
        for c in &j.channels {
            if c.is_rotation() {
                row.push(angles[r]);
                r += 1;
            } else {
                row.push(translation.to_array()[c.axis() as usize]);
            }
        }
    }
    Ok(row)
}

/// Writes a take against `skeleton`, whose offsets are in file units.
pub fn take_to_bvh(skeleton: &Skeleton, take: &Take, unit_scale: f64) -> Result<BvhDocument, ExportError> {
    let frames = take
        .poses()
        .iter()
        .map(|p| pose_to_row(skeleton, p, unit_scale))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BvhDocument {
        skeleton: skeleton.clone(),
        frame_time: take.frame_time(),
        frames,
    })
}

impl BvhDocument {
    pub fn to_take(&self, id: &str, skeleton_ref: &str, unit_scale: f64) -> Result<Take, ClipError> {
        frames_to_take(id, skeleton_ref, &self.skeleton, self.frame_time, &self.frames, unit_scale)
    }
}
