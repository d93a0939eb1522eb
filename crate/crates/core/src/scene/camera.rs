use crate::error::SceneError;
use crate::math::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Projection {
    /// `view_height` meters map onto the viewport height.
    Orthographic { view_height: f64 },
    /// Vertical field of view in radians.
    Perspective { fov_y: f64 },
}

/// Viewport coordinates are y-down with the origin at the top-left corner.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Camera {
    pub projection: Projection,
    pub position: Vec3,
    pub look: Vec3,
    pub up: Vec3,
    pub viewport: [f64; 2],
}

impl Camera {
    pub fn validate(&self) -> Result<(), SceneError> {
        self.basis().ok_or(SceneError::DegenerateCamera)?;
        let [w, h] = self.viewport;
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(SceneError::BadViewport);
        }
        match self.projection {
            Projection::Orthographic { view_height } if !(view_height > 0.0 && view_height.is_finite()) => {
                Err(SceneError::BadViewport)
            }
            Projection::Perspective { fov_y } if !(fov_y > 0.0 && fov_y < core::f64::consts::PI) => {
                Err(SceneError::BadFov(fov_y))
            }
            _ => Ok(()),
        }
    }

    /// (right, true up, forward).
    fn basis(&self) -> Option<(Vec3, Vec3, Vec3)> {
        let f = self.look.normalized()?;
        let c = f.cross(self.up.normalized()?);
        if c.length() < 1e-9 {
            return None;
        }
        let r = c / c.length();
        Some((r, r.cross(f), f))
    }

    /// Distance along the view direction; larger is further away.
    pub fn depth(&self, p: Vec3) -> f64 {
        match self.look.normalized() {
            Some(f) => (p - self.position).dot(f),
            None => 0.0,
        }
    }

    /// Projects into viewport units. Perspective rejects points at or behind
    /// the eye plane.
    pub fn project(&self, p: Vec3) -> Option<[f64; 2]> {
        let (r, u, f) = self.basis()?;
        let rel = p - self.position;
        let (x, y, z) = (rel.dot(r), rel.dot(u), rel.dot(f));
        let [w, h] = self.viewport;
        let (sx, sy) = match self.projection {
            Projection::Orthographic { view_height } => {
                let s = h / view_height;
                (x * s, y * s)
            }
            Projection::Perspective { fov_y } => {
                if z <= 0.0 {
                    return None;
                }
                let s = h / 2.0 / libm::tan(fov_y / 2.0);
                (x / z * s, y / z * s)
            }
        };
        Some([w / 2.0 + sx, h / 2.0 - sy])
    }
}
