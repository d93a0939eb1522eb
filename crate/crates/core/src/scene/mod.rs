//! The virtual castelet: screens, lights, avatar instances and per-tick
//! frame composition.

mod camera;
mod geometry;

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::SceneError;
use crate::math::{Quat, Transform, Vec3};
use crate::skeleton::{forward_kinematics, Pose, Skeleton};
use crate::skin::{skin_silhouette, BoundMesh};

pub use camera::{Camera, Projection};
pub use geometry::{clip_convex, is_convex, project_shadow_point, signed_area, PlaneFrame};

const NORMAL_TOLERANCE: f64 = 1e-9;
const BOUNDS_PLANE_TOLERANCE: f64 = 1e-9;
const MIN_LAYER_AREA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rgba {
    pub r: f64,
    pub g: f64,
    pub b: f64,
    pub a: f64,
}

impl Rgba {
    pub const fn new(r: f64, g: f64, b: f64, a: f64) -> Self {
        Rgba { r, g, b, a }
    }

    fn is_valid(&self) -> bool {
        [self.r, self.g, self.b, self.a].iter().all(|c| (0.0..=1.0).contains(c))
    }
}

/// Axis-aligned stage volume in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stage {
    pub min: Vec3,
    pub max: Vec3,
}

/// A bounded screen on the plane `normal·x = d`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Screen {
    pub name: String,
    pub normal: Vec3,
    pub d: f64,
    /// Convex, lying on the plane.
    pub bounds: Vec<Vec3>,
    pub translucency: f64,
}

impl Screen {
    pub fn frame(&self) -> PlaneFrame {
        PlaneFrame::new(self.normal, self.d)
    }

    pub fn bounds_2d(&self) -> Vec<[f64; 2]> {
        let f = self.frame();
        self.bounds.iter().map(|p| f.to_2d(*p)).collect()
    }

    pub fn centroid(&self) -> Vec3 {
        self.bounds.iter().fold(Vec3::ZERO, |a, p| a + *p) / self.bounds.len() as f64
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !self.normal.is_finite() || (self.normal.length() - 1.0).abs() > NORMAL_TOLERANCE {
            return Err(SceneError::NonUnitNormal(self.name.clone()));
        }
        if !(0.0..=1.0).contains(&self.translucency) {
            return Err(SceneError::BadTranslucency(self.translucency));
        }
        let on_plane = self
            .bounds
            .iter()
            .all(|p| p.is_finite() && (self.normal.dot(*p) - self.d).abs() <= BOUNDS_PLANE_TOLERANCE * (1.0 + self.d.abs()));
        if !on_plane || !is_convex(&self.bounds_2d()) {
            return Err(SceneError::BadBounds(self.name.clone()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointLight {
    pub name: String,
    pub position: Vec3,
    pub enabled: bool,
}

/// One avatar on stage. Its state machine is driven separately; the scene
/// only needs the pose it produced.
#[derive(Clone, Debug, PartialEq)]
pub struct OavInstance {
    pub id: String,
    pub skeleton: Skeleton,
    pub mesh: BoundMesh,
    pub position: Vec3,
    /// Radians about +Y.
    pub yaw: f64,
    pub visible: bool,
    pub casts_shadow: bool,
    pub tint: Rgba,
}

impl OavInstance {
    pub fn root_transform(&self) -> Transform {
        Transform::new(Quat::from_axis_angle(Vec3::Y, self.yaw), self.position)
    }

    /// Skinned vertex positions in stage space.
    pub fn skin(&self, pose: &Pose) -> Result<Vec<Vec3>, SceneError> {
        let world = forward_kinematics(&self.skeleton, pose)?;
        let root = self.root_transform();
        Ok(skin_silhouette(&self.mesh, &world)?
            .into_iter()
            .map(|p| root.transform_point(p))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SceneWarning {
    /// Some avatar casts a shadow but every light is off.
    NoEnabledLight,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CasteletScene {
    pub stage: Stage,
    pub screens: Vec<Screen>,
    pub lights: Vec<PointLight>,
    pub oavs: Vec<OavInstance>,
    pub camera: Camera,
}

fn check_unique<'a>(kind: &'static str, names: impl Iterator<Item = &'a str>) -> Result<(), SceneError> {
    let mut seen: Vec<&str> = Vec::new();
    for n in names {
        if seen.contains(&n) {
            return Err(SceneError::DuplicateName { kind, name: n.into() });
        }
        seen.push(n);
    }
    Ok(())
}

impl CasteletScene {
    pub fn validate(&self) -> Result<Vec<SceneWarning>, SceneError> {
        self.camera.validate()?;
        for s in &self.screens {
            s.validate()?;
        }
        check_unique("screen", self.screens.iter().map(|s| s.name.as_str()))?;
        check_unique("light", self.lights.iter().map(|l| l.name.as_str()))?;
        check_unique("oav", self.oavs.iter().map(|o| o.id.as_str()))?;
        for o in &self.oavs {
            if !o.tint.is_valid() {
                return Err(SceneError::BadColor(o.id.clone()));
            }
        }
        let mut warnings = Vec::new();
        if self.oavs.iter().any(|o| o.casts_shadow) && !self.lights.iter().any(|l| l.enabled) {
            warnings.push(SceneWarning::NoEnabledLight);
        }
        Ok(warnings)
    }

    pub fn oav_index(&self, id: &str) -> Option<usize> {
        self.oavs.iter().position(|o| o.id == id)
    }

    fn oav_mut(&mut self, id: &str) -> Result<&mut OavInstance, SceneError> {
        self.oavs.iter_mut().find(|o| o.id == id).ok_or_else(|| unknown("oav", id))
    }

    /// Applies one effect in place; on error the scene is unchanged.
    pub fn apply(&mut self, effect: &SceneEffect) -> Result<(), SceneError> {
        match effect {
            SceneEffect::SetVisible { oav, visible } => self.oav_mut(oav)?.visible = *visible,
            SceneEffect::SetCastsShadow { oav, casts_shadow } => self.oav_mut(oav)?.casts_shadow = *casts_shadow,
            SceneEffect::MoveOav { oav, position, yaw } => {
                let o = self.oav_mut(oav)?;
                o.position = *position;
                o.yaw = *yaw;
            }
            SceneEffect::MoveLight { light, position } => {
                self.lights
                    .iter_mut()
                    .find(|l| l.name == *light)
                    .ok_or_else(|| unknown("light", light))?
                    .position = *position;
            }
            SceneEffect::SetTranslucency { screen, translucency } => {
                if !(0.0..=1.0).contains(translucency) {
                    return Err(SceneError::BadTranslucency(*translucency));
                }
                self.screens
                    .iter_mut()
                    .find(|s| s.name == *screen)
                    .ok_or_else(|| unknown("screen", screen))?
                    .translucency = *translucency;
            }
        }
        Ok(())
    }
}

fn unknown(kind: &'static str, name: &str) -> SceneError {
    SceneError::UnknownTarget { kind, name: name.into() }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "effect", rename_all = "snake_case"))]
pub enum SceneEffect {
    SetVisible { oav: String, visible: bool },
    SetCastsShadow { oav: String, casts_shadow: bool },
    MoveLight { light: String, position: Vec3 },
    SetTranslucency { screen: String, translucency: f64 },
    MoveOav { oav: String, position: Vec3, yaw: f64 },
}

pub fn apply_scene_effect(scene: &CasteletScene, effect: &SceneEffect) -> Result<CasteletScene, SceneError> {
    let mut next = scene.clone();
    next.apply(effect)?;
    Ok(next)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum LayerSource {
    Silhouette { oav: String },
    Shadow { oav: String, light: String, screen: String },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Layer {
    pub source: LayerSource,
    /// Outline in viewport units.
    pub polygon: Vec<[f64; 2]>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub holes: Vec<Vec<[f64; 2]>>,
    pub color: Rgba,
    pub depth: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RenderFrame {
    pub tick: u64,
    pub time: f64,
    /// Back to front.
    pub layers: Vec<Layer>,
}

/// A shadow polygon on its screen, in stage space, before viewport projection.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowPolygon {
    pub outline: Vec<Vec3>,
    pub holes: Vec<Vec<Vec3>>,
}

/// Projects the silhouette `vertices` (outline = `polygons[0]`) from `light`
/// onto `screen` and clips to the screen bounds. `None` if any vertex fails
/// to project or nothing is left after clipping.
pub fn cast_shadow(light: Vec3, screen: &Screen, vertices: &[Vec3], polygons: &[Vec<usize>]) -> Option<ShadowPolygon> {
    let projected: Vec<Vec3> = vertices
        .iter()
        .map(|p| project_shadow_point(light, screen.normal, screen.d, *p))
        .collect::<Option<_>>()?;
    let frame = screen.frame();
    let bounds = screen.bounds_2d();
    let clip = |poly: &Vec<usize>| -> Option<Vec<Vec3>> {
        let flat: Vec<[f64; 2]> = poly.iter().map(|&i| frame.to_2d(projected[i])).collect();
        let clipped = clip_convex(&flat, &bounds);
        if clipped.len() < 3 || signed_area(&clipped).abs() < MIN_LAYER_AREA {
            return None;
        }
        Some(clipped.iter().map(|p| frame.to_3d(*p)).collect())
    };
    let (outline, holes) = polygons.split_first()?;
    Some(ShadowPolygon {
        outline: clip(outline)?,
        holes: holes.iter().filter_map(clip).collect(),
    })
}

fn project_all(camera: &Camera, pts: &[Vec3]) -> Option<Vec<[f64; 2]>> {
    pts.iter().map(|p| camera.project(*p)).collect()
}

/// Builds the painter-ordered frame for one tick. `poses[i]` drives
/// `scene.oavs[i]`.
pub fn compose_frame(scene: &CasteletScene, poses: &[Pose], tick: u64, time: f64) -> Result<RenderFrame, SceneError> {
    if poses.len() != scene.oavs.len() {
        return Err(SceneError::MissingPose {
            expected: scene.oavs.len(),
            got: poses.len(),
        });
    }
    let cam = &scene.camera;
    let mut layers = Vec::new();
    for (oav, pose) in scene.oavs.iter().zip(poses) {
        if !oav.visible && !oav.casts_shadow {
            continue;
        }
        let verts = oav.skin(pose)?;
        let polys = oav.mesh.mesh().polygons();
        if oav.visible {
            let pick = |poly: &Vec<usize>| poly.iter().map(|&i| verts[i]).collect::<Vec<_>>();
            let outline = project_all(cam, &pick(&polys[0]));
            let holes: Option<Vec<_>> = polys[1..].iter().map(|h| project_all(cam, &pick(h))).collect();
            if let (Some(polygon), Some(holes)) = (outline, holes) {
                let depth = verts.iter().map(|p| cam.depth(*p)).sum::<f64>() / verts.len() as f64;
                layers.push(Layer {
                    source: LayerSource::Silhouette { oav: oav.id.clone() },
                    polygon,
                    holes,
                    color: oav.tint,
                    depth,
                });
            }
        }
        if oav.casts_shadow {
            for light in scene.lights.iter().filter(|l| l.enabled) {
                for screen in &scene.screens {
                    let Some(shadow) = cast_shadow(light.position, screen, &verts, polys) else {
                        continue;
                    };
                    let outline = project_all(cam, &shadow.outline);
                    let holes: Option<Vec<_>> = shadow.holes.iter().map(|h| project_all(cam, h)).collect();
                    if let (Some(polygon), Some(holes)) = (outline, holes) {
                        layers.push(Layer {
                            source: LayerSource::Shadow {
                                oav: oav.id.clone(),
                                light: light.name.clone(),
                                screen: screen.name.clone(),
                            },
                            polygon,
                            holes,
                            color: Rgba::new(0.0, 0.0, 0.0, screen.translucency * oav.tint.a),
                            depth: cam.depth(screen.centroid()),
                        });
                    }
                }
            }
        }
    }
    layers.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    Ok(RenderFrame { tick, time, layers })
}

#[cfg(test)]
mod tests;
