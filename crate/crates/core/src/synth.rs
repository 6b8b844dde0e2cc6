//! Analytic textured scenes with exact depth, flow and motion.
//!
//! All geometry is expressed in the center camera's frame at the center time.
//! The next camera sees a static point `X` at `m(X)` and the previous one at
//! `m⁻¹(X)` (constant velocity). Boxes additionally move by their own motion
//! about their center, again with constant velocity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rigid_reproject, Intrinsics, Mat3, Motion, PixelCoord, Point3, RigidMotion, MIN_Z};
use crate::image::{DepthMap, FlowField, Image};
use crate::losses::Snippet;
use crate::refine::OutputState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineTerm {
    pub amplitude: f64,
    /// Angular frequency along the two surface axes, radians per meter.
    pub frequency: [f64; 2],
    pub phase: f64,
}

/// `base + Σ amplitude · sin(frequency · (s, t) + phase)` over surface coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Texture {
    pub base: f64,
    #[serde(default)]
    pub terms: Vec<SineTerm>,
}

impl Texture {
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        let mut v = self.base;
        for k in &self.terms {
            v += k.amplitude * (k.frequency[0] * s + k.frequency[1] * t + k.phase).sin();
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let swing: f64 = self.terms.iter().map(|k| k.amplitude.abs()).sum();
        let finite = self.base.is_finite()
            && self
                .terms
                .iter()
                .all(|k| k.amplitude.is_finite() && k.phase.is_finite() && k.frequency.iter().all(|f| f.is_finite()));
        if !finite || self.base - swing < 0.0 || self.base + swing > 1.0 {
            return Err(Error::InvalidInput(format!(
                "texture range [{}, {}] is not inside [0, 1]",
                self.base - swing,
                self.base + swing
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub point: [f64; 3],
    pub normal: [f64; 3],
    /// Half extents along the in-plane axes; unbounded when absent.
    #[serde(default)]
    pub extent: Option<[f64; 2]>,
    pub texture: Texture,
}

/// Axis-aligned box (at the center time) with its own per-frame motion about
/// `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub center: [f64; 3],
    pub half_size: [f64; 3],
    #[serde(default)]
    pub motion: RigidMotion,
    pub texture: Texture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub ego_motion: RigidMotion,
    #[serde(default)]
    pub planes: Vec<PlaneSpec>,
    #[serde(default)]
    pub boxes: Vec<BoxSpec>,
}

const DEG: f64 = std::f64::consts::PI / 180.0;

impl SceneSpec {
    pub fn intrinsics(&self) -> Result<Intrinsics> {
        Intrinsics::new(self.fx, self.fy, self.width, self.height)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics()?;
        if self.planes.is_empty() && self.boxes.is_empty() {
            return Err(Error::InvalidInput("scene has no geometry".into()));
        }
        let finite = |a: &[f64]| a.iter().all(|v| v.is_finite());
        for m in std::iter::once(&self.ego_motion).chain(self.boxes.iter().map(|b| &b.motion)) {
            if !finite(&m.euler) || !finite(&m.translation) {
                return Err(Error::InvalidInput("motion has non-finite entries".into()));
            }
        }
        for p in &self.planes {
            p.texture.validate()?;
            let n = Point3::from_array(p.normal).norm();
            if !finite(&p.point) || !(n > 0.0 && n.is_finite()) {
                return Err(Error::InvalidInput("plane needs a finite point and a non-zero normal".into()));
            }
            if let Some(e) = p.extent {
                if !(e[0] > 0.0 && e[1] > 0.0) {
                    return Err(Error::InvalidInput("plane extent must be positive".into()));
                }
            }
        }
        for b in &self.boxes {
            b.texture.validate()?;
            if !finite(&b.center) || !b.half_size.iter().all(|h| *h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidInput("box needs a finite center and positive half sizes".into()));
            }
        }
        Ok(())
    }

    /// The 64×208 reference scene: a fronto-parallel plane with a smooth,
    /// low-frequency texture under a sideways camera translation. The flow is
    /// constant, so warped 3×3 windows stay undistorted.
    pub fn default_scene() -> Self {
        SceneSpec {
            width: 208,
            height: 64,
            fx: 120.0,
            fy: 120.0,
            ego_motion: RigidMotion::new([0.0; 3], [0.05, -0.02, 0.0]),
            planes: vec![PlaneSpec {
                point: [0.0, 0.0, 6.0],
                normal: [0.0, 0.0, -1.0],
                extent: None,
                texture: Texture {
                    base: 0.5,
                    terms: vec![
                        SineTerm { amplitude: 0.2, frequency: [0.2, 0.07], phase: 0.3 },
                        SineTerm { amplitude: 0.15, frequency: [-0.05, 0.28], phase: 1.1 },
                    ],
                },
            }],
            boxes: Vec::new(),
        }
    }

    /// A seeded 64×208 scene of a sloping floor, a back wall and a floating
    /// panel, each with a random sum-of-sinusoids texture, under a random
    /// forward-dominant motion. Texture frequencies are set per surface to
    /// roughly a quarter radian per pixel at its typical distance.
    pub fn random_textured(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fx = 120.0;
        let texture = |rng: &mut ChaCha8Rng, distance: f64| {
            let n = 3;
            let amp = 0.4 / n as f64;
            let scale = 0.25 * fx / distance;
            let terms = (0..n)
                .map(|_| {
                    let f = scale * rng.random_range(0.6..1.4);
                    let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    SineTerm {
                        amplitude: amp * rng.random_range(0.6..1.0),
                        frequency: [f * a.cos(), f * a.sin()],
                        phase: rng.random_range(0.0..std::f64::consts::TAU),
                    }
                })
                .collect();
            Texture { base: 0.5, terms }
        };
        let wall_z = rng.random_range(9.0..12.0);
        let floor = PlaneSpec {
            point: [0.0, 1.5, 0.0],
            normal: [0.0, -1.0, -0.4],
            extent: None,
            texture: texture(&mut rng, wall_z),
        };
        let wall = PlaneSpec {
            point: [0.0, 0.0, wall_z],
            normal: [rng.random_range(-0.3..0.3), 0.0, -1.0],
            extent: None,
            texture: texture(&mut rng, wall_z),
        };
        let panel_z = rng.random_range(5.0..7.0);
        let panel = PlaneSpec {
            point: [rng.random_range(-2.0..2.0), rng.random_range(-0.3..0.3), panel_z],
            normal: [rng.random_range(-0.4..0.4), rng.random_range(-0.2..0.2), -1.0],
            extent: Some([rng.random_range(1.0..1.6), rng.random_range(0.4..0.8)]),
            texture: texture(&mut rng, panel_z),
        };
        let mut signed = |lo: f64, hi: f64| {
            let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            s * rng.random_range(lo..hi) * DEG
        };
        let euler = [signed(1.5, 2.5), signed(2.5, 4.0), signed(0.0, 0.5)];
        let translation = [rng.random_range(-0.08..0.08), rng.random_range(-0.03..0.03), -rng.random_range(0.2..0.4)];
        SceneSpec {
            width: 208,
            height: 64,
            fx,
            fy: fx,
            ego_motion: RigidMotion::new(euler, translation),
            planes: vec![floor, wall, panel],
            boxes: Vec::new(),
        }
    }
}

/// Ground truth for a center frame, its next and previous frames.
#[derive(Debug, Clone)]
pub struct RenderedPair {
    pub intrinsics: Intrinsics,
    pub ego_motion: RigidMotion,
    pub source: Image,
    pub target: Image,
    /// Frame preceding the source under constant velocity.
    pub previous: Image,
    pub depth_source: DepthMap,
    pub depth_target: DepthMap,
    pub depth_previous: DepthMap,
    pub flow_fwd: FlowField,
    pub flow_bwd: FlowField,
    /// Source pixels owned by a moving box.
    pub object_mask: Vec<bool>,
    /// Source pixels whose surface point is visible in the target.
    pub valid_mask: Vec<bool>,
    /// Target pixels whose surface point is visible in the source.
    pub valid_mask_bwd: Vec<bool>,
}

impl RenderedPair {
    /// The ground-truth variables.
    pub fn ground_truth(&self) -> OutputState {
        OutputState {
            depth: self.depth_source.clone(),
            motion: self.ego_motion,
            intrinsics: self.intrinsics,
            flow_fwd: self.flow_fwd.clone(),
            flow_bwd: self.flow_bwd.clone(),
        }
    }

    /// Three-frame snippet with both neighbour depths attached.
    pub fn snippet(&self) -> Snippet {
        Snippet {
            prev: Some(self.previous.clone()),
            center: self.source.clone(),
            next: self.target.clone(),
            prev_depth: Some(self.depth_previous.clone()),
            next_depth: Some(self.depth_target.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Frame {
    Prev,
    Center,
    Next,
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    /// Camera-frame depth of the hit.
    z: f64,
    surface: usize,
    /// Hit point in the surface's center-time coordinates.
    local: Point3,
    value: f64,
}

fn compose(a: &Motion<f64>, b: &Motion<f64>) -> Motion<f64> {
    Motion {
        r: a.r * b.r,
        t: a.r.mul_vec(&b.t) + a.t,
    }
}

fn identity() -> Motion<f64> {
    Motion {
        r: Mat3::identity(),
        t: Point3::new(0.0, 0.0, 0.0),
    }
}

fn normalized(p: Point3) -> Point3 {
    p.scale(1.0 / p.norm())
}

/// In-plane orthonormal axes for a unit normal.
fn plane_basis(n: Point3) -> (Point3, Point3) {
    let a = if n.x.abs() < 0.9 { Point3::new(1.0, 0.0, 0.0) } else { Point3::new(0.0, 1.0, 0.0) };
    let b1 = normalized(a.cross(&n));
    (b1, n.cross(&b1))
}

enum Surface {
    Plane {
        point: Point3,
        normal: Point3,
        basis: (Point3, Point3),
        extent: Option<[f64; 2]>,
        texture: Texture,
    },
    Cuboid {
        center: Point3,
        half: [f64; 3],
        texture: Texture,
        /// Own motion: center time → next time.
        motion: Motion<f64>,
    },
}

impl Surface {
    /// Center-time surface coordinates → coordinates at `frame`.
    fn own_motion(&self, frame: Frame) -> Motion<f64> {
        match self {
            Surface::Plane { .. } => identity(),
            Surface::Cuboid { center, motion, .. } => {
                // about the box center: c + R (x − c) + t
                let about = Motion {
                    r: motion.r,
                    t: *center - motion.r.mul_vec(center) + motion.t,
                };
                match frame {
                    Frame::Prev => about.inverse(),
                    Frame::Center => identity(),
                    Frame::Next => about,
                }
            }
        }
    }

    /// Ray parameter and local point of the first hit of `o + λ d` (local coordinates).
    fn intersect(&self, o: Point3, d: Point3) -> Option<(f64, Point3, f64)> {
        match self {
            Surface::Plane { point, normal, basis, extent, texture } => {
                let den = normal.dot(&d);
                if den == 0.0 {
                    return None;
                }
                let lambda = normal.dot(&(*point - o)) / den;
                if !(lambda > 0.0) {
                    return None;
                }
                let x = o + d.scale(lambda);
                let rel = x - *point;
                let (s, t) = (rel.dot(&basis.0), rel.dot(&basis.1));
                if let Some(e) = extent {
                    if s.abs() > e[0] || t.abs() > e[1] {
                        return None;
                    }
                }
                Some((lambda, x, texture.eval(s, t)))
            }
            Surface::Cuboid { center, half, texture, .. } => {
                let o_rel = [o.x - center.x, o.y - center.y, o.z - center.z];
                let dv = [d.x, d.y, d.z];
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                let mut axis = 0;
                for i in 0..3 {
                    if dv[i] == 0.0 {
                        if o_rel[i].abs() > half[i] {
                            return None;
                        }
                        continue;
                    }
                    let a = (-half[i] - o_rel[i]) / dv[i];
                    let b = (half[i] - o_rel[i]) / dv[i];
                    let (a, b) = if a < b { (a, b) } else { (b, a) };
                    if a > lo {
                        lo = a;
                        axis = i;
                    }
                    hi = hi.min(b);
                }
                if !(lo <= hi && lo > 0.0) {
                    return None;
                }
                let x = o + d.scale(lo);
                let rel = [x.x - center.x, x.y - center.y, x.z - center.z];
                let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
                let face = 2 * axis + usize::from(rel[axis] > 0.0);
                let value = texture.eval(rel[i] + 3.7 * face as f64, rel[j]);
                Some((lo, x, value))
            }
        }
    }
}

struct Scene {
    k: Intrinsics,
    ego: Motion<f64>,
    surfaces: Vec<Surface>,
    n_planes: usize,
}

impl Scene {
    fn new(spec: &SceneSpec) -> Result<Self> {
        spec.validate()?;
        let mut surfaces = Vec::new();
        for p in &spec.planes {
            let normal = normalized(Point3::from_array(p.normal));
            surfaces.push(Surface::Plane {
                point: Point3::from_array(p.point),
                normal,
                basis: plane_basis(normal),
                extent: p.extent,
                texture: p.texture.clone(),
            });
        }
        for b in &spec.boxes {
            surfaces.push(Surface::Cuboid {
                center: Point3::from_array(b.center),
                half: b.half_size,
                texture: b.texture.clone(),
                motion: b.motion.motion(),
            });
        }
        Ok(Scene {
            k: spec.intrinsics()?,
            ego: spec.ego_motion.motion(),
            surfaces,
            n_planes: spec.planes.len(),
        })
    }

    fn camera(&self, frame: Frame) -> Motion<f64> {
        match frame {
            Frame::Prev => self.ego.inverse(),
            Frame::Center => identity(),
            Frame::Next => self.ego,
        }
    }

    /// Center-time local coordinates of `surface` → camera coordinates at `frame`.
    fn placement(&self, surface: usize, frame: Frame) -> Motion<f64> {
        compose(&self.camera(frame), &self.surfaces[surface].own_motion(frame))
    }

    /// Nearest surface seen through pixel `(u, v)` of `frame`.
    fn cast(&self, frame: Frame, u: f64, v: f64) -> Option<Hit> {
        let ray = self.k.plain_camera().ray(u, v);
        let mut best: Option<Hit> = None;
        for (i, s) in self.surfaces.iter().enumerate() {
            let inv = self.placement(i, frame).inverse();
            let o = inv.t;
            let d = inv.r.mul_vec(&ray);
            if let Some((lambda, local, value)) = s.intersect(o, d) {
                // ray has unit z, so λ is the camera depth
                if lambda > MIN_Z && best.is_none_or(|b| lambda < b.z) {
                    best = Some(Hit { z: lambda, surface: i, local, value });
                }
            }
        }
        best
    }

    fn in_bounds(&self, p: PixelCoord) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u <= (self.k.width - 1) as f64 && p.v <= (self.k.height - 1) as f64
    }

    /// Where `hit` (seen from `from`) lands in `to`, and whether it is visible there.
    fn correspond(&self, hit: &Hit, to: Frame) -> (PixelCoord, bool) {
        let x = self.placement(hit.surface, to).apply(&hit.local);
        if x.z <= MIN_Z {
            return (PixelCoord::new(f64::NAN, f64::NAN), false);
        }
        let p = self.k.plain_camera().project(&x);
        let visible = self.in_bounds(p)
            && self
                .cast(to, p.u, p.v)
                .is_some_and(|h| h.surface == hit.surface && (h.z - x.z).abs() <= 1e-6 * x.z);
        (p, visible)
    }

    fn render_frame(&self, frame: Frame) -> Vec<Option<Hit>> {
        let w = self.k.width;
        (0..w * self.k.height)
            .into_par_iter()
            .map(|i| self.cast(frame, (i % w) as f64, (i / w) as f64))
            .collect()
    }

    fn is_static(&self, surface: usize) -> bool {
        surface < self.n_planes
    }
}

/// Depth map from hits; pixels that see nothing get the farthest hit depth.
fn depth_of(hits: &[Option<Hit>], w: usize, h: usize) -> Result<DepthMap> {
    let far = hits
        .iter()
        .flatten()
        .map(|h| h.z)
        .fold(f64::NAN, f64::max);
    if far.is_nan() {
        return Err(Error::InvalidInput("no surface is visible".into()));
    }
    DepthMap::new(w, h, hits.iter().map(|h| h.map_or(far, |h| h.z)).collect())
}

fn image_of(hits: &[Option<Hit>], w: usize, h: usize) -> Result<Image> {
    Image::new(w, h, 1, hits.iter().map(|h| h.map_or(0.0, |h| h.value)).collect())
}

/// Renders the center, next and previous frames with exact depth and flow.
///
/// Static forward flow is computed with [`rigid_reproject`] on the rendered
/// depth; moving-box flow follows the surface point through both motions.
/// Pixels that see no surface are invalid and carry zero flow.
pub fn render(spec: &SceneSpec) -> Result<RenderedPair> {
    let scene = Scene::new(spec)?;
    let k = scene.k;
    let (w, h) = (k.width, k.height);
    let center = scene.render_frame(Frame::Center);
    let next = scene.render_frame(Frame::Next);
    let prev = scene.render_frame(Frame::Prev);

    let fwd: Vec<([f64; 2], bool)> = center
        .par_iter()
        .enumerate()
        .map(|(i, hit)| {
            let Some(hit) = hit else { return ([0.0, 0.0], false) };
            let p = PixelCoord::new((i % w) as f64, (i / w) as f64);
            let (q, visible) = scene.correspond(hit, Frame::Next);
            let q = if scene.is_static(hit.surface) {
                rigid_reproject(p, hit.z, &k, &spec.ego_motion).unwrap_or(q)
            } else {
                q
            };
            if q.u.is_finite() {
                ([q.u - p.u, q.v - p.v], visible)
            } else {
                ([0.0, 0.0], false)
            }
        })
        .collect();
    let bwd: Vec<([f64; 2], bool)> = next
        .par_iter()
        .enumerate()
        .map(|(i, hit)| {
            let Some(hit) = hit else { return ([0.0, 0.0], false) };
            let p = PixelCoord::new((i % w) as f64, (i / w) as f64);
            let (q, visible) = scene.correspond(hit, Frame::Center);
            if q.u.is_finite() {
                ([q.u - p.u, q.v - p.v], visible)
            } else {
                ([0.0, 0.0], false)
            }
        })
        .collect();

    let flow = |v: &[([f64; 2], bool)]| FlowField::new(w, h, v.iter().flat_map(|(f, _)| *f).collect());
    Ok(RenderedPair {
        intrinsics: k,
        ego_motion: spec.ego_motion,
        source: image_of(&center, w, h)?,
        target: image_of(&next, w, h)?,
        previous: image_of(&prev, w, h)?,
        depth_source: depth_of(&center, w, h)?,
        depth_target: depth_of(&next, w, h)?,
        depth_previous: depth_of(&prev, w, h)?,
        flow_fwd: flow(&fwd)?,
        flow_bwd: flow(&bwd)?,
        object_mask: center.iter().map(|h| h.is_some_and(|h| !scene.is_static(h.surface))).collect(),
        valid_mask: fwd.iter().map(|(_, v)| *v).collect(),
        valid_mask_bwd: bwd.iter().map(|(_, v)| *v).collect(),
    })
}

/// Continuous rendering of `frame` at a sub-pixel position: the analytic value
/// that bilinear sampling of the rendered image approximates.
pub fn shade(spec: &SceneSpec, next_frame: bool, p: PixelCoord) -> Result<Option<f64>> {
    let scene = Scene::new(spec)?;
    let frame = if next_frame { Frame::Next } else { Frame::Center };
    Ok(scene.cast(frame, p.u, p.v).map(|h| h.value))
}

/// Seeded perturbation applied to ground truth to manufacture a prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Standard deviation of the multiplicative log-normal depth noise.
    pub depth_log_sigma: f64,
    /// Standard deviation of additive Gaussian noise per flow component, pixels.
    pub flow_sigma: f64,
    pub euler_sigma: f64,
    pub translation_sigma: f64,
    /// Additive Gaussian focal noise, pixels.
    pub focal_sigma: f64,
    /// Deterministic offset added to the Euler angles, radians.
    pub euler_offset: [f64; 3],
    /// Deterministic factor applied to the translation.
    pub translation_scale: f64,
    /// Deterministic factors applied to `fx`, `fy`.
    pub focal_scale: [f64; 2],
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            depth_log_sigma: 0.0,
            flow_sigma: 0.0,
            euler_sigma: 0.0,
            translation_sigma: 0.0,
            focal_sigma: 0.0,
            euler_offset: [0.0; 3],
            translation_scale: 1.0,
            focal_scale: [1.0, 1.0],
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            self.depth_log_sigma,
            self.flow_sigma,
            self.euler_sigma,
            self.translation_sigma,
            self.focal_sigma,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput(format!("noise magnitudes must be finite and >= 0, got {sigmas:?}")));
        }
        if !(self.focal_scale.iter().all(|s| *s > 0.0 && s.is_finite()) && self.translation_scale.is_finite()) {
            return Err(Error::InvalidInput("focal scales must be positive".into()));
        }
        Ok(())
    }
}

/// Independent generator for element `index` of noise stream `stream`, so the
/// draw does not depend on evaluation order.
fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

/// A prior state drawn around the ground truth of `pair`.
pub fn perturb(pair: &RenderedPair, noise: &NoiseSpec) -> Result<OutputState> {
    noise.validate()?;
    let gt = pair.ground_truth();
    let s = noise.seed;
    let (w, h) = (gt.depth.width(), gt.depth.height());

    let depth: Vec<f64> = gt
        .depth
        .data()
        .par_iter()
        .enumerate()
        .map(|(i, d)| d * gauss(&mut rng_for(s, 1, i as u64), noise.depth_log_sigma).exp())
        .collect();
    let jitter = |f: &FlowField, stream: u64| -> Vec<f64> {
        f.data()
            .par_iter()
            .enumerate()
            .map(|(i, v)| v + gauss(&mut rng_for(s, stream, i as u64), noise.flow_sigma))
            .collect()
    };

    let mut g = rng_for(s, 0, 0);
    let m = gt.motion;
    let euler = [0, 1, 2].map(|i| m.euler[i] + noise.euler_offset[i] + gauss(&mut g, noise.euler_sigma));
    let translation = [0, 1, 2].map(|i| m.translation[i] * noise.translation_scale + gauss(&mut g, noise.translation_sigma));
    let focal = |f: f64, scale: f64, g: &mut ChaCha8Rng| {
        let v = f * scale + gauss(g, noise.focal_sigma);
        v.max(1e-3 * f)
    };
    let mut k = gt.intrinsics;
    k.fx = focal(k.fx, noise.focal_scale[0], &mut g);
    k.fy = focal(k.fy, noise.focal_scale[1], &mut g);

    Ok(OutputState {
        depth: DepthMap::new(w, h, depth)?,
        motion: RigidMotion::new(euler, translation),
        intrinsics: k,
        flow_fwd: FlowField::new(w, h, jitter(&gt.flow_fwd, 2))?,
        flow_bwd: FlowField::new(w, h, jitter(&gt.flow_bwd, 3))?,
    })
}
