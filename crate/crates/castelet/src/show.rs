//! Show bundles: a directory holding `show.json`, rigs, meshes and clips.
//!
//! Loading never stops at the first problem. Every file is read, every
//! reference resolved, and all failures come back together in a
//! [`LoadReport`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use castelet_core::clips::{AnimationClip, ClipLibrary, LibraryIssue};
use castelet_core::fsm::OavFsm;
use castelet_core::math::Vec3;
use castelet_core::retarget::{bind_map, RetargetMap};
use castelet_core::scene::{Camera, CasteletScene, OavInstance, PointLight, Rgba, SceneEffect, SceneWarning, Screen, Stage};
use castelet_core::skeleton::Skeleton;
use castelet_core::skin::{BoundMesh, SilhouetteMesh};
use serde::{Deserialize, Serialize};

use crate::bvh::{parse_bvh, row_to_pose};

pub const SHOW_FILE: &str = "show.json";
pub const CLIP_DIR: &str = "clips";

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ShowFile {
    title: String,
    tick_rate: f64,
    fade: f64,
    chain_tolerance: f64,
    #[serde(default)]
    #[allow(dead_code)]
    spaces: BTreeMap<String, String>,
    stage: Stage,
    camera: Camera,
    screens: Vec<Screen>,
    lights: Vec<PointLight>,
    rigs: BTreeMap<String, RigFile>,
    oavs: Vec<OavFile>,
    cues: Vec<Cue>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RigFile {
    skeleton: PathBuf,
    mesh: PathBuf,
    unit_scale: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OavFile {
    id: String,
    rig: String,
    initial_idle: String,
    position: Vec3,
    #[serde(default)]
    yaw: f64,
    visible: bool,
    casts_shadow: bool,
    tint: [f64; 4],
    live: Option<LiveFile>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LiveFile {
    source_skeleton: PathBuf,
    unit_scale: f64,
    map: RetargetMap,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClipFile {
    id: String,
    kind: SidecarKind,
    skeleton: String,
    unit_scale: f64,
    start_idle: Option<String>,
    end_idle: Option<String>,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SidecarKind {
    Idle,
    Action,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MeshFile {
    vertices: Vec<[f64; 2]>,
    polygons: Vec<Vec<usize>>,
    weights: Vec<Vec<(String, f64)>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cue {
    pub label: String,
    pub steps: Vec<CueStep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum CueStep {
    Trigger { oav: String, action: String },
    Suspend { oav: String },
    SetLive { oav: String, on: bool },
    Effect { effect: SceneEffect },
    /// Defers the remaining steps, rounded to whole ticks.
    Wait { seconds: f64 },
}

/// A skeleton in meters plus the file-unit original it came from.
#[derive(Clone, Debug)]
pub struct Rig {
    pub skeleton: Skeleton,
    pub file_skeleton: Skeleton,
    pub unit_scale: f64,
}

/// What a mocap stream for one avatar must look like.
#[derive(Clone, Debug)]
pub struct LiveSource {
    pub file_skeleton: Skeleton,
    pub unit_scale: f64,
}

#[derive(Clone, Debug)]
pub struct Show {
    pub dir: PathBuf,
    pub title: String,
    pub tick_rate: f64,
    pub fade: f64,
    pub chain_tolerance: f64,
    pub scene: CasteletScene,
    pub library: ClipLibrary,
    /// Parallel to `scene.oavs`.
    pub fsms: Vec<OavFsm>,
    /// Parallel to `scene.oavs`.
    pub rig_names: Vec<String>,
    /// Parallel to `scene.oavs`.
    pub live_sources: Vec<Option<LiveSource>>,
    pub rigs: BTreeMap<String, Rig>,
    pub cues: Vec<Cue>,
    pub warnings: Vec<String>,
}

impl Show {
    pub fn oav_index(&self, id: &str) -> Option<usize> {
        self.scene.oav_index(id)
    }

    pub fn tick_duration(&self) -> f64 {
        1.0 / self.tick_rate
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    pub location: String,
    pub message: String,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadReport {
    pub problems: Vec<Problem>,
}

impl LoadReport {
    fn push(&mut self, location: impl Into<String>, message: impl fmt::Display) {
        self.problems.push(Problem {
            location: location.into(),
            message: message.to_string(),
        });
    }
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} problem(s):", self.problems.len())?;
        for p in &self.problems {
            writeln!(f, "  {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for LoadReport {}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, report: &mut LoadReport) -> Option<T> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            report.push(path.display().to_string(), e);
            return None;
        }
    };
    match serde_json::from_str(&text) {
        Ok(v) => Some(v),
        Err(e) => {
            report.push(path.display().to_string(), e);
            None
        }
    }
}

fn read_skeleton(path: &Path, report: &mut LoadReport) -> Option<crate::bvh::BvhDocument> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            report.push(path.display().to_string(), e);
            return None;
        }
    };
    match parse_bvh(&text) {
        Ok(d) => Some(d),
        Err(e) => {
            report.push(path.display().to_string(), e);
            None
        }
    }
}

/// Same joints, parents and channels; offsets agree to 1e-6 file units.
pub fn same_hierarchy(a: &Skeleton, b: &Skeleton) -> bool {
    a.len() == b.len()
        && a.joints().iter().zip(b.joints()).all(|(x, y)| {
            x.name == y.name && x.parent == y.parent && x.channels == y.channels && x.offset.distance(y.offset) <= 1e-6
        })
}

fn load_mesh(path: &Path, skeleton: &Skeleton, report: &mut LoadReport) -> Option<BoundMesh> {
    let file: MeshFile = read_json(path, report)?;
    let loc = path.display().to_string();
    let mut weights = Vec::with_capacity(file.weights.len());
    let mut ok = true;
    for (v, ws) in file.weights.iter().enumerate() {
        let mut resolved = Vec::with_capacity(ws.len());
        for (name, w) in ws {
            match skeleton.index_of(name) {
                Some(j) => resolved.push((j, *w)),
                None => {
                    report.push(&loc, format!("vertex {v} weights unknown joint `{name}`"));
                    ok = false;
                }
            }
        }
        weights.push(resolved);
    }
    if !ok {
        return None;
    }
    match SilhouetteMesh::new(file.vertices, file.polygons, weights).and_then(|m| m.bind(skeleton)) {
        Ok(b) => Some(b),
        Err(e) => {
            report.push(loc, e);
            None
        }
    }
}

fn load_clips(dir: &Path, rigs: &BTreeMap<String, Rig>, report: &mut LoadReport) -> ClipLibrary {
    let mut library = ClipLibrary::new();
    let clip_dir = dir.join(CLIP_DIR);
    let entries = match fs::read_dir(&clip_dir) {
        Ok(e) => e,
        Err(e) => {
            report.push(clip_dir.display().to_string(), e);
            return library;
        }
    };
    let mut sidecars: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".clip.json"))
        .collect();
    sidecars.sort();
    for sidecar in sidecars {
        let Some(meta) = read_json::<ClipFile>(&sidecar, report) else { continue };
        let name = sidecar.file_name().unwrap_or_default().to_string_lossy();
        let bvh_path = sidecar.with_file_name(format!("{}.bvh", name.trim_end_matches(".clip.json")));
        let loc = bvh_path.display().to_string();
        let Some(doc) = read_skeleton(&bvh_path, report) else { continue };
        let Some(rig) = rigs.get(&meta.skeleton) else {
            report.push(sidecar.display().to_string(), format!("clip `{}` names unknown rig `{}`", meta.id, meta.skeleton));
            continue;
        };
        if !same_hierarchy(&doc.skeleton, &rig.file_skeleton) {
            report.push(&loc, format!("hierarchy does not match rig `{}`", meta.skeleton));
            continue;
        }
        let poses = doc.frames.iter().map(|r| row_to_pose(&doc.skeleton, r, meta.unit_scale)).collect();
        let clip = match meta.kind {
            SidecarKind::Idle => {
                if meta.start_idle.is_some() || meta.end_idle.is_some() {
                    report.push(sidecar.display().to_string(), format!("idle clip `{}` cannot name idles", meta.id));
                    continue;
                }
                AnimationClip::idle(&meta.id, &meta.skeleton, doc.frame_time, poses)
            }
            SidecarKind::Action => match (&meta.start_idle, &meta.end_idle) {
                (Some(s), Some(e)) => AnimationClip::action(&meta.id, &meta.skeleton, doc.frame_time, poses, s, e),
                _ => {
                    report.push(sidecar.display().to_string(), format!("action `{}` needs start_idle and end_idle", meta.id));
                    continue;
                }
            },
        };
        match clip.and_then(|c| library.insert(c)) {
            Ok(()) => {}
            Err(e) => report.push(loc, e),
        }
    }
    library
}

fn describe_issue(issue: &LibraryIssue) -> String {
    match issue {
        LibraryIssue::UnresolvedIdle { action, idle } => format!("action `{action}` references unknown idle `{idle}`"),
        LibraryIssue::ReferenceNotIdle { action, clip } => format!("action `{action}` references `{clip}`, which is not an idle"),
        LibraryIssue::Boundary {
            action,
            idle,
            side,
            distance,
        } => format!("action `{action}` {side:?} boundary is {distance:.4} rad from idle `{idle}`"),
        LibraryIssue::Incompatible { action, idle } => format!("action `{action}` and idle `{idle}` use different skeletons"),
    }
}

fn check_cues(cues: &[Cue], scene: &CasteletScene, rig_names: &[String], live: &[Option<LiveSource>], library: &ClipLibrary, init: &[String], report: &mut LoadReport, warnings: &mut Vec<String>) {
    // Expected idle per avatar when cues run in order; `None` once unknown.
    let mut expected: Vec<Option<String>> = init.iter().cloned().map(Some).collect();
    for (ci, cue) in cues.iter().enumerate() {
        for (si, step) in cue.steps.iter().enumerate() {
            let loc = format!("cue {ci} (`{}`) step {si}", cue.label);
            let oav = match step {
                CueStep::Trigger { oav, .. } | CueStep::Suspend { oav } | CueStep::SetLive { oav, .. } => Some(oav),
                _ => None,
            };
            let idx = match oav {
                Some(id) => match scene.oav_index(id) {
                    Some(i) => Some(i),
                    None => {
                        report.push(&loc, format!("unknown oav `{id}`"));
                        continue;
                    }
                },
                None => None,
            };
            match step {
                CueStep::Trigger { oav, action } => {
                    let i = idx.expect("resolved above");
                    let clip = match library.get(action) {
                        Ok(c) => c,
                        Err(_) => {
                            report.push(&loc, format!("unknown action `{action}`"));
                            continue;
                        }
                    };
                    let Some((start, end)) = clip.idles() else {
                        report.push(&loc, format!("`{action}` is an idle clip, not an action"));
                        continue;
                    };
                    if clip.skeleton_ref != rig_names[i] {
                        report.push(&loc, format!("action `{action}` animates rig `{}`, oav `{oav}` uses `{}`", clip.skeleton_ref, rig_names[i]));
                        continue;
                    }
                    if let Some(cur) = &expected[i] {
                        if cur != start {
                            warnings.push(format!("{loc}: `{action}` starts from `{start}` but `{oav}` will be in `{cur}`"));
                        }
                    }
                    expected[i] = Some(end.into());
                }
                CueStep::Suspend { .. } => expected[idx.expect("resolved above")] = None,
                CueStep::SetLive { oav, .. } => {
                    let i = idx.expect("resolved above");
                    if live[i].is_none() {
                        report.push(&loc, format!("oav `{oav}` has no live binding"));
                    }
                    expected[i] = None;
                }
                CueStep::Effect { effect } => {
                    let mut probe = scene.clone();
                    if let Err(e) = probe.apply(effect) {
                        report.push(&loc, e);
                    }
                }
                CueStep::Wait { seconds } => {
                    if !(seconds.is_finite() && *seconds >= 0.0) {
                        report.push(&loc, format!("wait of {seconds} s"));
                    }
                }
            }
        }
    }
}

/// Loads and cross-checks a bundle directory.
pub fn load_show(dir: impl AsRef<Path>) -> Result<Show, LoadReport> {
    let dir = dir.as_ref();
    let mut report = LoadReport::default();
    let Some(file) = read_json::<ShowFile>(&dir.join(SHOW_FILE), &mut report) else {
        return Err(report);
    };
    if !(file.tick_rate.is_finite() && file.tick_rate > 0.0) {
        report.push("tick_rate", format!("must be positive, got {}", file.tick_rate));
    }
    if !(file.fade.is_finite() && file.fade >= 0.0) {
        report.push("fade", format!("must be non-negative, got {}", file.fade));
    }
    if !(file.chain_tolerance.is_finite() && file.chain_tolerance >= 0.0) {
        report.push("chain_tolerance", format!("must be non-negative, got {}", file.chain_tolerance));
    }

    let mut rigs = BTreeMap::new();
    let mut meshes = BTreeMap::new();
    for (name, rf) in &file.rigs {
        let Some(doc) = read_skeleton(&dir.join(&rf.skeleton), &mut report) else { continue };
        let skeleton = doc.skeleton.scaled(rf.unit_scale);
        if let Some(mesh) = load_mesh(&dir.join(&rf.mesh), &skeleton, &mut report) {
            meshes.insert(name.clone(), mesh);
        }
        rigs.insert(
            name.clone(),
            Rig {
                skeleton,
                file_skeleton: doc.skeleton,
                unit_scale: rf.unit_scale,
            },
        );
    }

    let library = load_clips(dir, &rigs, &mut report);
    for issue in library.validate(file.chain_tolerance) {
        report.push(CLIP_DIR, describe_issue(&issue));
    }

    let mut oavs = Vec::new();
    let mut fsms = Vec::new();
    let mut rig_names = Vec::new();
    let mut live_sources = Vec::new();
    let mut warnings = Vec::new();
    for o in &file.oavs {
        let loc = format!("oav `{}`", o.id);
        let (Some(rig), Some(mesh)) = (rigs.get(&o.rig), meshes.get(&o.rig)) else {
            if !file.rigs.contains_key(&o.rig) {
                report.push(&loc, format!("unknown rig `{}`", o.rig));
            }
            continue;
        };
        let fsm = match OavFsm::new(&o.rig, rig.skeleton.len(), &o.initial_idle, file.fade, &library) {
            Ok(f) => f,
            Err(e) => {
                report.push(&loc, e);
                continue;
            }
        };
        let (fsm, live) = match &o.live {
            None => (fsm, None),
            Some(l) => {
                let Some(doc) = read_skeleton(&dir.join(&l.source_skeleton), &mut report) else { continue };
                let source = doc.skeleton.scaled(l.unit_scale);
                let bound = match bind_map(&l.map, &source, &rig.skeleton) {
                    Ok(b) => b,
                    Err(e) => {
                        report.push(format!("{loc} live map"), e);
                        continue;
                    }
                };
                if !bound.report().unmapped_target.is_empty() {
                    warnings.push(format!("{loc}: live map leaves {} joint(s) at rest: {}", bound.report().unmapped_target.len(), bound.report().unmapped_target.join(", ")));
                }
                match fsm.with_live_binding(bound) {
                    Ok(f) => (
                        f,
                        Some(LiveSource {
                            file_skeleton: doc.skeleton,
                            unit_scale: l.unit_scale,
                        }),
                    ),
                    Err(e) => {
                        report.push(&loc, e);
                        continue;
                    }
                }
            }
        };
        let [r, g, b, a] = o.tint;
        oavs.push(OavInstance {
            id: o.id.clone(),
            skeleton: rig.skeleton.clone(),
            mesh: mesh.clone(),
            position: o.position,
            yaw: o.yaw,
            visible: o.visible,
            casts_shadow: o.casts_shadow,
            tint: Rgba::new(r, g, b, a),
        });
        fsms.push(fsm);
        rig_names.push(o.rig.clone());
        live_sources.push(live);
    }

    let scene = CasteletScene {
        stage: file.stage,
        screens: file.screens,
        lights: file.lights,
        oavs,
        camera: file.camera,
    };
    match scene.validate() {
        Ok(ws) => warnings.extend(ws.into_iter().map(|w| match w {
            SceneWarning::NoEnabledLight => String::from("every light is disabled; no shadows will be cast"),
        })),
        Err(e) => report.push("scene", e),
    }
    if scene.oavs.len() == file.oavs.len() {
        let init: Vec<String> = file.oavs.iter().map(|o| o.initial_idle.clone()).collect();
        check_cues(&file.cues, &scene, &rig_names, &live_sources, &library, &init, &mut report, &mut warnings);
    }

    if !report.problems.is_empty() {
        return Err(report);
    }
    Ok(Show {
        dir: dir.to_path_buf(),
        title: file.title,
        tick_rate: file.tick_rate,
        fade: file.fade,
        chain_tolerance: file.chain_tolerance,
        scene,
        library,
        fsms,
        rig_names,
        live_sources,
        rigs,
        cues: file.cues,
        warnings,
    })
}
