//! Small fixed-size geometry: 3-vectors, unit quaternions, rigid poses and
//! oriented rectangles on the floor plane.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const X: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    /// Horizontal (xy) distance.
    pub fn planar_distance(self, o: Vec3) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Scales the vector down so its length does not exceed `max`.
    pub fn clamp_norm(self, max: f64) -> Vec3 {
        let n = self.norm();
        if n > max && n > 0.0 {
            self * (max / n)
        } else {
            self
        }
    }

    pub fn abs(self) -> Vec3 {
        Vec3::new(self.x.abs(), self.y.abs(), self.z.abs())
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion stored as `(w, x, y, z)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quat {
    fn from(q: [f64; 4]) -> Self {
        Quat { w: q[0], x: q[1], y: q[2], z: q[3] }
    }
}

impl From<Quat> for [f64; 4] {
    fn from(q: Quat) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };
    /// Tool frame pointing straight down (half turn about world x).
    pub const DOWN: Quat = Quat { w: 0.0, x: 1.0, y: 0.0, z: 0.0 };

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        let a = axis.normalized();
        let (s, c) = (0.5 * angle).sin_cos();
        Quat { w: c, x: a.x * s, y: a.y * s, z: a.z * s }
    }

    pub fn from_yaw(yaw: f64) -> Quat {
        Quat::from_axis_angle(Vec3::Z, yaw)
    }

    /// Exponential map of a rotation vector (axis × angle).
    pub fn from_rotation_vector(v: Vec3) -> Quat {
        let angle = v.norm();
        if angle < 1e-300 {
            return Quat::IDENTITY;
        }
        Quat::from_axis_angle(v, angle)
    }

    /// Logarithm map: the shortest rotation vector representing `self`.
    pub fn to_rotation_vector(self) -> Vec3 {
        let q = if self.w < 0.0 { -self } else { self };
        let v = Vec3::new(q.x, q.y, q.z);
        let s = v.norm();
        if s < 1e-300 {
            return Vec3::ZERO;
        }
        let angle = 2.0 * s.atan2(q.w);
        v * (angle / s)
    }

    pub fn conj(self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn dot(self, o: Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Geodesic angle between two orientations, in `[0, π]`.
    pub fn angle_to(self, o: Quat) -> f64 {
        let d = self.dot(o).abs().min(1.0);
        2.0 * d.acos()
    }

    /// Angle between the body z-axis and world up.
    pub fn tilt(self) -> f64 {
        self.rotate(Vec3::Z).z.clamp(-1.0, 1.0).acos()
    }

    /// Rotation about world z that this orientation carries.
    pub fn yaw(self) -> f64 {
        let fwd = self.rotate(Vec3::X);
        fwd.y.atan2(fwd.x)
    }

    /// Spherical linear interpolation along the shorter arc.
    ///
    /// The endpoints are returned verbatim at `t <= 0` and `t >= 1`.
    pub fn slerp(a: Quat, b: Quat, t: f64) -> Quat {
        if t <= 0.0 {
            return a;
        }
        if t >= 1.0 {
            return b;
        }
        let mut d = a.dot(b);
        let mut b2 = b;
        if d < 0.0 {
            d = -d;
            b2 = -b;
        }
        if d > 1.0 - 1e-12 {
            return Quat {
                w: a.w + (b2.w - a.w) * t,
                x: a.x + (b2.x - a.x) * t,
                y: a.y + (b2.y - a.y) * t,
                z: a.z + (b2.z - a.z) * t,
            }
            .normalized();
        }
        let theta = d.acos();
        let s = theta.sin();
        let wa = ((1.0 - t) * theta).sin() / s;
        let wb = (t * theta).sin() / s;
        Quat {
            w: wa * a.w + wb * b2.w,
            x: wa * a.x + wb * b2.x,
            y: wa * a.y + wb * b2.y,
            z: wa * a.z + wb * b2.z,
        }
        .normalized()
    }
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }
}

impl Neg for Quat {
    type Output = Quat;
    fn neg(self) -> Quat {
        Quat { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub const fn new(position: Vec3, orientation: Quat) -> Self {
        Pose { position, orientation }
    }

    pub fn from_position(position: Vec3) -> Self {
        Pose { position, orientation: Quat::IDENTITY }
    }

    /// `self ∘ other`: `other` expressed in `self`'s frame, mapped to world.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation.rotate(other.position),
            orientation: (self.orientation * other.orientation).normalized(),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.conj();
        Pose { position: -inv.rotate(self.position), orientation: inv }
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.position + self.orientation.rotate(p)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.orientation.is_finite()
    }
}

/// Oriented rectangle on the floor plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect2 {
    pub center: [f64; 2],
    pub half: [f64; 2],
    pub yaw: f64,
}

impl Rect2 {
    pub fn new(center: [f64; 2], half: [f64; 2], yaw: f64) -> Self {
        Rect2 { center, half, yaw }
    }

    pub fn axis_aligned(min: [f64; 2], max: [f64; 2]) -> Self {
        Rect2 {
            center: [(min[0] + max[0]) * 0.5, (min[1] + max[1]) * 0.5],
            half: [(max[0] - min[0]) * 0.5, (max[1] - min[1]) * 0.5],
            yaw: 0.0,
        }
    }

    fn axes(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.yaw.sin_cos();
        [[c, s], [-s, c]]
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let [u, v] = self.axes();
        let [hx, hy] = self.half;
        let [cx, cy] = self.center;
        let p = |a: f64, b: f64| [cx + u[0] * a + v[0] * b, cy + u[1] * a + v[1] * b];
        [p(hx, hy), p(-hx, hy), p(-hx, -hy), p(hx, -hy)]
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in self.corners() {
            for k in 0..2 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        (lo, hi)
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half[0] * self.half[1]
    }

    /// Separating-axis overlap test. Rectangles whose interiors are apart by
    /// less than `eps` of penetration (touching edges) do not overlap.
    pub fn overlaps(&self, other: &Rect2, eps: f64) -> bool {
        let a = self.corners();
        let b = other.corners();
        for axis in self.axes().into_iter().chain(other.axes()) {
            let (amin, amax) = project(&a, axis);
            let (bmin, bmax) = project(&b, axis);
            if amax - bmin <= eps || bmax - amin <= eps {
                return false;
            }
        }
        true
    }

    pub fn contains_point(&self, p: [f64; 2], eps: f64) -> bool {
        let [u, v] = self.axes();
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let a = d[0] * u[0] + d[1] * u[1];
        let b = d[0] * v[0] + d[1] * v[1];
        a.abs() <= self.half[0] + eps && b.abs() <= self.half[1] + eps
    }

    /// Euclidean distance between two rectangles (zero when they overlap).
    pub fn distance(&self, other: &Rect2) -> f64 {
        if self.overlaps(other, 0.0) {
            return 0.0;
        }
        let a = self.corners();
        let b = other.corners();
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let (a0, a1) = (a[i], a[(i + 1) % 4]);
            let (b0, b1) = (b[i], b[(i + 1) % 4]);
            for &p in &b {
                best = best.min(point_segment_distance(p, a0, a1));
            }
            for &p in &a {
                best = best.min(point_segment_distance(p, b0, b1));
            }
        }
        best
    }

    /// Distance from a point to the rectangle (zero inside).
    pub fn point_distance(&self, p: [f64; 2]) -> f64 {
        let [u, v] = self.axes();
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let a = (d[0] * u[0] + d[1] * u[1]).abs() - self.half[0];
        let b = (d[0] * v[0] + d[1] * v[1]).abs() - self.half[1];
        a.max(0.0).hypot(b.max(0.0))
    }
}

fn project(pts: &[[f64; 2]; 4], axis: [f64; 2]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in pts {
        let d = p[0] * axis[0] + p[1] * axis[1];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap[0] - ab[0] * t).hypot(ap[1] - ab[1] * t)
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a % TAU;
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}
