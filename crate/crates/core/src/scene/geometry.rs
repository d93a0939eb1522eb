//! Planar projection and convex clipping.

use alloc::vec::Vec;

use crate::math::Vec3;

const PARALLEL_EPS: f64 = 1e-12;

/// Central projection of `point` from `light` onto the plane `n·x = d`.
///
/// `None` when the ray is parallel to the plane or the plane is not beyond
/// the point as seen from the light.
pub fn project_shadow_point(light: Vec3, normal: Vec3, d: f64, point: Vec3) -> Option<Vec3> {
    let dir = point - light;
    let denom = normal.dot(dir);
    if denom.abs() < PARALLEL_EPS {
        return None;
    }
    let t = (d - normal.dot(light)) / denom;
    if t < 1.0 {
        return None;
    }
    Some(light + dir * t)
}

/// Orthonormal in-plane frame: `origin = n·d`, axes `u`, `v` with `u × v = n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneFrame {
    pub origin: Vec3,
    pub u: Vec3,
    pub v: Vec3,
    pub normal: Vec3,
}

impl PlaneFrame {
    pub fn new(normal: Vec3, d: f64) -> Self {
        let helper = if normal.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        let u = helper.cross(normal).normalized().expect("helper is never parallel to normal");
        let v = normal.cross(u);
        PlaneFrame {
            origin: normal * d,
            u,
            v,
            normal,
        }
    }

    pub fn to_2d(&self, p: Vec3) -> [f64; 2] {
        let r = p - self.origin;
        [r.dot(self.u), r.dot(self.v)]
    }

    pub fn to_3d(&self, p: [f64; 2]) -> Vec3 {
        self.origin + self.u * p[0] + self.v * p[1]
    }
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Shoelace signed area, positive when counter-clockwise.
pub fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Strictly convex with non-zero area; collinear vertices are tolerated.
pub fn is_convex(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let area = signed_area(poly);
    if !(area.abs() > 1e-12) {
        return false;
    }
    let scale = poly
        .iter()
        .fold(0.0f64, |m, p| m.max(p[0].abs()).max(p[1].abs()))
        .max(1.0);
    let tol = 1e-12 * scale * scale;
    (0..n).all(|i| cross2(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]) * area.signum() >= -tol)
}

/// Sutherland–Hodgman clip of `subject` against the convex polygon `clip`
/// (either winding). An empty result means no overlap.
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let orient = signed_area(clip).signum();
    let mut out: Vec<[f64; 2]> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % n]);
        let side = |p: [f64; 2]| cross2(a, b, p) * orient;
        let input = core::mem::take(&mut out);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    out.push(intersect(prev, cur, sp, sc));
                }
                out.push(cur);
            } else if sp >= 0.0 {
                out.push(intersect(prev, cur, sp, sc));
            }
        }
    }
    out
}

fn intersect(p: [f64; 2], q: [f64; 2], sp: f64, sq: f64) -> [f64; 2] {
    let t = sp / (sp - sq);
    [p[0] + (q[0] - p[0]) * t, p[1] + (q[1] - p[1]) * t]
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn projection_examples() {
        let s = project_shadow_point(Vec3::new(0.0, 4.0, 0.0), Vec3::Y, 0.0, Vec3::new(1.0, 2.0, 0.0));
        assert_eq!(s, Some(Vec3::new(2.0, 0.0, 0.0)));
        let on = Vec3::new(3.0, 0.0, -1.0);
        assert_eq!(project_shadow_point(Vec3::new(0.0, 4.0, 0.0), Vec3::Y, 0.0, on), Some(on));
        // Point further from the plane than the light.
        assert_eq!(project_shadow_point(Vec3::new(0.0, 4.0, 0.0), Vec3::Y, 0.0, Vec3::new(0.0, 5.0, 0.0)), None);
        // Ray parallel to the plane.
        assert_eq!(project_shadow_point(Vec3::new(0.0, 4.0, 0.0), Vec3::Y, 0.0, Vec3::new(1.0, 4.0, 0.0)), None);
    }

    #[test]
    fn frame_round_trip() {
        let n = Vec3::new(1.0, 2.0, -2.0).normalized().unwrap();
        let f = PlaneFrame::new(n, 1.5);
        assert!((f.u.cross(f.v) - n).length() < 1e-15);
        let p = f.to_3d([0.3, -0.7]);
        assert!((n.dot(p) - 1.5).abs() < 1e-12);
        let q = f.to_2d(p);
        assert!((q[0] - 0.3).abs() < 1e-12 && (q[1] + 0.7).abs() < 1e-12);
    }

    #[test]
    fn clip_square_against_square() {
        let a = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        let b = [[1.0, 1.0], [3.0, 1.0], [3.0, 3.0], [1.0, 3.0]];
        let c = clip_convex(&a, &b);
        assert!((signed_area(&c) - 1.0).abs() < 1e-12);
        let mut cw = b;
        cw.reverse();
        assert!((signed_area(&clip_convex(&a, &cw)) - 1.0).abs() < 1e-12);
        let far = [[5.0, 5.0], [6.0, 5.0], [6.0, 6.0]];
        assert!(clip_convex(&far, &a).is_empty());
        assert_eq!(clip_convex(&b[..3], &[[-9.0, -9.0], [9.0, -9.0], [9.0, 9.0], [-9.0, 9.0]]), b[..3].to_vec());
    }

    #[test]
    fn convexity() {
        assert!(is_convex(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]));
        assert!(is_convex(&[[0.0, 1.0], [1.0, 1.0], [1.0, 0.0], [0.0, 0.0]]));
        assert!(!is_convex(&[[0.0, 0.0], [2.0, 0.0], [1.0, 0.5], [2.0, 2.0], [0.0, 2.0]]));
        assert!(!is_convex(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]));
        assert!(!is_convex(&vec![[0.0, 0.0]; 2]));
    }
}
