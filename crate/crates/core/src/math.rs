//! Small f64 vector / quaternion / rigid-transform kit.
//!
//! Everything here is `Copy` and allocation free. Trigonometry goes through
//! `libm` so the crate stays `no_std`.

use core::fmt;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use core::str::FromStr;

use crate::error::ConfigError;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "[f64; 3]", into = "[f64; 3]"))]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn from_array(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn length(self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    /// Returns `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Vec3> {
        let len = self.length();
        if len < 1e-300 || !len.is_finite() {
            None
        } else {
            Some(self / len)
        }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    #[inline]
    pub fn lerp(self, o: Vec3, w: f64) -> Vec3 {
        self + (o - self) * w
    }

    #[inline]
    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).length()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::from_array(a)
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation quaternion, Hamilton convention, scalar first.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(from = "[f64; 4]", into = "[f64; 4]"))]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat::new(1.0, 0.0, 0.0, 0.0);

    #[inline]
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    /// `axis` need not be normalized; a zero axis yields identity.
    pub fn from_axis_angle(axis: Vec3, radians: f64) -> Quat {
        match axis.normalized() {
            None => Quat::IDENTITY,
            Some(a) => {
                let half = radians * 0.5;
                let s = libm::sin(half);
                Quat::new(libm::cos(half), a.x * s, a.y * s, a.z * s)
            }
        }
    }

    #[inline]
    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::sqrt(self.dot(self))
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        if n < 1e-300 || !n.is_finite() {
            Quat::IDENTITY
        } else {
            Quat::new(self.w / n, self.x / n, self.y / n, self.z / n)
        }
    }

    #[inline]
    pub fn is_unit(self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    #[inline]
    pub fn conjugate(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    #[inline]
    pub fn negated(self) -> Quat {
        Quat::new(-self.w, -self.x, -self.y, -self.z)
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        // v' = v + 2w(u×v) + 2u×(u×v)
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Geodesic angle between the rotations, in `[0, π]`. Sign-insensitive.
    pub fn angle_to(self, o: Quat) -> f64 {
        // Half-angle form on the 4-sphere: exact zero for identical inputs.
        let o = if self.dot(o) < 0.0 { o.negated() } else { o };
        let diff = Quat::new(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z).norm();
        let sum = Quat::new(self.w + o.w, self.x + o.x, self.y + o.y, self.z + o.z).norm();
        4.0 * libm::atan2(diff, sum)
    }

    /// Shortest-arc spherical interpolation, renormalized.
    pub fn slerp(self, o: Quat, w: f64) -> Quat {
        let mut b = o;
        let mut cos = self.dot(o);
        if cos < 0.0 {
            b = o.negated();
            cos = -cos;
        }
        let (ka, kb) = if cos > 1.0 - 1e-12 {
            (1.0 - w, w)
        } else {
            let theta = libm::acos(cos.min(1.0));
            let s = libm::sin(theta);
            (libm::sin((1.0 - w) * theta) / s, libm::sin(w * theta) / s)
        };
        Quat::new(
            self.w * ka + b.w * kb,
            self.x * ka + b.x * kb,
            self.y * ka + b.y * kb,
            self.z * ka + b.z * kb,
        )
        .normalized()
    }
}

/// `[w, x, y, z]`.
impl From<[f64; 4]> for Quat {
    fn from([w, x, y, z]: [f64; 4]) -> Self {
        Quat::new(w, x, y, z)
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl Mul for Quat {
    type Output = Quat;
    #[inline]
    fn mul(self, o: Quat) -> Quat {
        Quat::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Rigid transform: `p ↦ rotation·p + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Transform {
    pub rotation: Quat,
    pub translation: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Transform::IDENTITY
    }
}

impl Transform {
    pub const IDENTITY: Transform = Transform {
        rotation: Quat::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn new(rotation: Quat, translation: Vec3) -> Self {
        Transform {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Transform::new(Quat::IDENTITY, t)
    }

    #[inline]
    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// `self · o`: apply `o` first.
    #[inline]
    pub fn then(&self, o: &Transform) -> Transform {
        Transform {
            rotation: self.rotation * o.rotation,
            translation: self.rotation.rotate(o.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform {
        let r = self.rotation.conjugate();
        Transform {
            rotation: r,
            translation: -r.rotate(self.translation),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit(self) -> Vec3 {
        match self {
            Axis::X => Vec3::X,
            Axis::Y => Vec3::Y,
            Axis::Z => Vec3::Z,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

/// The six Tait–Bryan orders BVH files use for their rotation channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RotationOrder {
    Xyz,
    Xzy,
    Yxz,
    Yzx,
    Zxy,
    Zyx,
}

impl RotationOrder {
    pub const ALL: [RotationOrder; 6] = [
        RotationOrder::Xyz,
        RotationOrder::Xzy,
        RotationOrder::Yxz,
        RotationOrder::Yzx,
        RotationOrder::Zxy,
        RotationOrder::Zyx,
    ];

    pub fn axes(self) -> [Axis; 3] {
        use Axis::*;
        match self {
            RotationOrder::Xyz => [X, Y, Z],
            RotationOrder::Xzy => [X, Z, Y],
            RotationOrder::Yxz => [Y, X, Z],
            RotationOrder::Yzx => [Y, Z, X],
            RotationOrder::Zxy => [Z, X, Y],
            RotationOrder::Zyx => [Z, Y, X],
        }
    }

    pub fn from_axes(axes: [Axis; 3]) -> Option<Self> {
        RotationOrder::ALL.into_iter().find(|o| o.axes() == axes)
    }
}

impl fmt::Display for RotationOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in self.axes() {
            write!(f, "{}", a.letter())?;
        }
        Ok(())
    }
}

impl FromStr for RotationOrder {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut axes = [Axis::X; 3];
        let mut n = 0;
        for c in s.chars() {
            let a = match c.to_ascii_uppercase() {
                'X' => Axis::X,
                'Y' => Axis::Y,
                'Z' => Axis::Z,
                _ => return Err(ConfigError::UnknownRotationOrder(s.into())),
            };
            if n == 3 {
                return Err(ConfigError::UnknownRotationOrder(s.into()));
            }
            axes[n] = a;
            n += 1;
        }
        if n != 3 {
            return Err(ConfigError::UnknownRotationOrder(s.into()));
        }
        RotationOrder::from_axes(axes).ok_or_else(|| ConfigError::UnknownRotationOrder(s.into()))
    }
}

/// Non-negative remainder, `a mod b` for `b > 0`.
pub(crate) fn rem_euclid(a: f64, b: f64) -> f64 {
    let r = libm::fmod(a, b);
    if r < 0.0 {
        r + b
    } else {
        r
    }
}

/// Composes three axis rotations given in degrees.
///
/// `angles[i]` is the angle about `order.axes()[i]`, matching the layout of a
/// BVH rotation channel row. The result is `q0 · q1 · q2`, i.e. the rotation
/// matrix `R0 · R1 · R2` acting on column vectors.
pub fn euler_to_quaternion(angles_deg: [f64; 3], order: RotationOrder) -> Quat {
    let axes = order.axes();
    let mut q = Quat::IDENTITY;
    for (axis, deg) in axes.iter().zip(angles_deg) {
        q = q * Quat::from_axis_angle(axis.unit(), deg.to_radians());
    }
    q.normalized()
}

/// Parses an order label such as `"ZXY"` and converts.
pub fn euler_to_quaternion_labeled(angles_deg: [f64; 3], order: &str) -> Result<Quat, ConfigError> {
    Ok(euler_to_quaternion(angles_deg, order.parse()?))
}

/// Inverse of [`euler_to_quaternion`]: degrees about `order.axes()`.
///
/// At gimbal lock the last angle is pinned to zero.
pub fn quaternion_to_euler(q: Quat, order: RotationOrder) -> [f64; 3] {
    let q = q.normalized();
    let [i, j, k] = order.axes().map(|a| a as usize);
    let cols = [q.rotate(Vec3::X), q.rotate(Vec3::Y), q.rotate(Vec3::Z)].map(Vec3::to_array);
    let m = |r: usize, c: usize| cols[c][r];
    // +1 for cyclic orders (XYZ, YZX, ZXY).
    let s = if (j + 3 - i) % 3 == 1 { 1.0 } else { -1.0 };
    let sb = (s * m(i, k)).clamp(-1.0, 1.0);
    let b = libm::asin(sb);
    let (a, c) = if sb.abs() < 1.0 - 1e-12 {
        (libm::atan2(-s * m(j, k), m(k, k)), libm::atan2(-s * m(i, j), m(i, i)))
    } else {
        (libm::atan2(s * m(k, j), m(j, j)), 0.0)
    };
    [a.to_degrees(), b.to_degrees(), c.to_degrees()]
}
