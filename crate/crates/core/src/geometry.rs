//! Pinhole camera with a centred principal point, rigid motions, and the
//! two-view relations built on them.
//!
//! Conventions used throughout the crate:
//!
//! * A [`RigidMotion`] maps source-camera coordinates to target-camera
//!   coordinates: `x' = R·x + t`.
//! * Rotations are intrinsic Z-Y-X: `R = Rz(euler[2]) · Ry(euler[1]) · Rx(euler[0])`.
//!   Pitch `euler[1] = ±π/2` is gimbal lock; it is legal, but roll and yaw
//!   become coupled there and their gradients degenerate.
//! * The epipolar residual is `n(p')ᵀ [t̂]× R n(p)` with `n(p) = K⁻¹ p̃` and
//!   `t̂ = t / ‖t‖`. Every exact rigid correspondence makes it vanish.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::Real;

/// Smallest camera-frame depth accepted as "in front of the camera".
pub const MIN_Z: f64 = 1e-6;

/// Focal lengths plus image size. The principal point is always the image
/// centre `(width/2, height/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Intrinsics { fx, fy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "focal lengths must be positive and finite, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width < 2 || self.height < 2 {
            return Err(Error::InvalidInput(format!(
                "image must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn cx(&self) -> f64 {
        self.width as f64 / 2.0
    }

    pub fn cy(&self) -> f64 {
        self.height as f64 / 2.0
    }

    pub(crate) fn camera<T: Real>(&self, fx: T, fy: T) -> Camera<T> {
        Camera {
            fx,
            fy,
            cx: self.cx(),
            cy: self.cy(),
        }
    }

    pub(crate) fn plain_camera(&self) -> Camera<f64> {
        self.camera(self.fx, self.fy)
    }
}

/// Rotation (Euler angles, radians) plus translation (meters).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidMotion {
    pub euler: [f64; 3],
    pub translation: [f64; 3],
}

impl RigidMotion {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(euler: [f64; 3], translation: [f64; 3]) -> Self {
        RigidMotion { euler, translation }
    }

    pub fn rotation(&self) -> Mat3<f64> {
        rotation_from_euler(self.euler)
    }

    pub(crate) fn motion(&self) -> Motion<f64> {
        Motion::from_params(self.euler, self.translation)
    }

    /// The inverse motion, re-expressed in Euler form.
    pub fn inverse(&self) -> Self {
        let inv = self.motion().inverse();
        RigidMotion {
            euler: euler_from_rotation(&inv.r),
            translation: [inv.t.x, inv.t.y, inv.t.z],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PixelCoord<T = f64> {
    pub u: T,
    pub v: T,
}

impl<T> PixelCoord<T> {
    pub fn new(u: T, v: T) -> Self {
        PixelCoord { u, v }
    }
}

/// Camera-frame point in meters; the homogeneous coordinate is implicit.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3<T = f64> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Point3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Point3 { x, y, z }
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }

    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> Self {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn scale(&self, s: T) -> Self {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn l1(&self) -> T {
        self.x.abs() + self.y.abs() + self.z.abs()
    }
}

impl<T: Real> Add for Point3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Point3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<T = f64>(pub [[T; 3]; 3]);

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let o = T::cst(1.0);
        let z = T::zero();
        Mat3([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn mul_vec(&self, p: &Point3<T>) -> Point3<T> {
        let m = &self.0;
        Point3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
        )
    }

    pub fn det(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j] + self.0[i][2] * o.0[2][j];
            }
        }
        Mat3(out)
    }
}

/// `R = Rz(euler[2]) · Ry(euler[1]) · Rx(euler[0])`.
pub fn rotation_from_euler<T: Real>(euler: [T; 3]) -> Mat3<T> {
    let (sx, cx) = (euler[0].sin(), euler[0].cos());
    let (sy, cy) = (euler[1].sin(), euler[1].cos());
    let (sz, cz) = (euler[2].sin(), euler[2].cos());
    Mat3([
        [cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx],
        [sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx],
        [-sy, cy * sx, cy * cx],
    ])
}

/// Inverse of [`rotation_from_euler`] (pitch restricted to [−π/2, π/2]).
pub fn euler_from_rotation(r: &Mat3<f64>) -> [f64; 3] {
    let m = &r.0;
    let pitch = (-m[2][0]).clamp(-1.0, 1.0).asin();
    if m[2][0].abs() < 1.0 - 1e-12 {
        [m[2][1].atan2(m[2][2]), pitch, m[1][0].atan2(m[0][0])]
    } else {
        // Gimbal lock: only roll ∓ yaw is determined; put it all in roll.
        [(-m[1][2]).atan2(m[1][1]), pitch, 0.0]
    }
}

/// `[t]×`, so that `[t]× · v = t × v`.
pub fn skew<T: Real>(t: &Point3<T>) -> Mat3<T> {
    let z = T::zero();
    Mat3([[z, -t.z, t.y], [t.z, z, -t.x], [-t.y, t.x, z]])
}

/// Angle of `a · bᵀ`, i.e. the geodesic distance between two rotations.
pub fn rotation_angle_between(a: &Mat3<f64>, b: &Mat3<f64>) -> f64 {
    let d = *a * b.transpose();
    let tr = d.0[0][0] + d.0[1][1] + d.0[2][2];
    ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Pinhole camera over any [`Real`] scalar; the principal point is fixed data.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Camera<T> {
    pub fx: T,
    pub fy: T,
    pub cx: f64,
    pub cy: f64,
}

impl<T: Real> Camera<T> {
    /// `K⁻¹ p̃` (the ray with unit z).
    pub fn ray(&self, u: T, v: T) -> Point3<T> {
        Point3::new(
            (u - T::cst(self.cx)) / self.fx,
            (v - T::cst(self.cy)) / self.fy,
            T::cst(1.0),
        )
    }

    pub fn backproject(&self, u: T, v: T, depth: T) -> Point3<T> {
        self.ray(u, v).scale(depth)
    }

    /// Caller guarantees `x.z > 0`.
    pub fn project(&self, x: &Point3<T>) -> PixelCoord<T> {
        PixelCoord::new(
            self.fx * x.x / x.z + T::cst(self.cx),
            self.fy * x.y / x.z + T::cst(self.cy),
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Motion<T> {
    pub r: Mat3<T>,
    pub t: Point3<T>,
}

impl<T: Real> Motion<T> {
    pub fn from_params(euler: [T; 3], t: [T; 3]) -> Self {
        Motion {
            r: rotation_from_euler(euler),
            t: Point3::from_array(t),
        }
    }

    pub fn apply(&self, x: &Point3<T>) -> Point3<T> {
        self.r.mul_vec(x) + self.t
    }

    pub fn inverse(&self) -> Self {
        let rt = self.r.transpose();
        let t = rt.mul_vec(&self.t);
        Motion {
            r: rt,
            t: Point3::new(-t.x, -t.y, -t.z),
        }
    }

    /// `[t̂]× R`, or `None` when `t = 0`.
    pub fn essential(&self) -> Option<Mat3<T>> {
        let n = self.t.norm();
        if n.value() == 0.0 {
            return None;
        }
        let unit = Point3::new(self.t.x / n, self.t.y / n, self.t.z / n);
        Some(skew(&unit) * self.r)
    }
}

/// `n(p')ᵀ E n(p)`; zero for every pixel pair when `E` is `None`.
pub(crate) fn epipolar_form<T: Real>(
    cam: &Camera<T>,
    essential: Option<&Mat3<T>>,
    p: PixelCoord<T>,
    p_prime: PixelCoord<T>,
) -> T {
    match essential {
        None => T::zero(),
        Some(e) => {
            let a = cam.ray(p.u, p.v);
            let b = cam.ray(p_prime.u, p_prime.v);
            b.dot(&e.mul_vec(&a))
        }
    }
}

/// `d · K⁻¹ (u, v, 1)ᵀ`.
pub fn backproject(p: PixelCoord, depth: f64, k: &Intrinsics) -> Result<Point3> {
    if !(depth > 0.0) {
        return Err(Error::InvalidInput(format!("depth must be positive, got {depth}")));
    }
    Ok(k.plain_camera().backproject(p.u, p.v, depth))
}

pub fn project(x: Point3, k: &Intrinsics) -> Result<PixelCoord> {
    if !(x.z > 0.0) {
        return Err(Error::BehindCamera(x.z));
    }
    Ok(k.plain_camera().project(&x))
}

/// `R·x + t`.
pub fn transform(m: &RigidMotion, x: Point3) -> Point3 {
    m.motion().apply(&x)
}

/// Source pixel → target pixel through depth and motion. A transformed point
/// at `z ≤ MIN_Z` yields [`Error::BehindCamera`], which callers mask.
pub fn rigid_reproject(p: PixelCoord, depth: f64, k: &Intrinsics, m: &RigidMotion) -> Result<PixelCoord> {
    let x = backproject(p, depth, k)?;
    let y = transform(m, x);
    if y.z <= MIN_Z {
        return Err(Error::BehindCamera(y.z));
    }
    project(y, k)
}

/// Algebraic epipolar residual of the correspondence `p → p_prime` under `m`.
/// Degenerate (identically zero) when the translation vanishes.
pub fn epipolar_residual(p: PixelCoord, p_prime: PixelCoord, k: &Intrinsics, m: &RigidMotion) -> f64 {
    let motion = m.motion();
    epipolar_form(&k.plain_camera(), motion.essential().as_ref(), p, p_prime)
}
