//! Dense per-pixel grids and the differentiable bilinear sampler.

use crate::error::{Error, Result};
use crate::geometry::PixelCoord;

/// Intensity image, row-major with interleaved channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!("images have 1 or 3 channels, got {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "{}x{}x{} image needs {} values, got {}",
                width,
                height,
                channels,
                width * height * channels,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Validation {
                index: i,
                message: format!("intensity {} outside [0, 1]", data[i]),
            });
        }
        Ok(Image { width, height, channels, data })
    }

    /// Grayscale image from `f(x, y)`; values are clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Image { width, height, channels: 1, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// 3×3 neighbourhood of channel `c` around `(x, y)`, replicate-padded,
    /// row-major.
    pub fn window3(&self, x: usize, y: usize, c: usize) -> [f64; 9] {
        let mut out = [0.0; 9];
        let mut k = 0;
        for dy in -1i64..=1 {
            let yy = (y as i64 + dy).clamp(0, self.height as i64 - 1) as usize;
            for dx in -1i64..=1 {
                let xx = (x as i64 + dx).clamp(0, self.width as i64 - 1) as usize;
                out[k] = self.get(xx, yy, c);
                k += 1;
            }
        }
        out
    }

    pub fn sample(&self, p: PixelCoord) -> SampleResult {
        sample_raw(&self.data, self.width, self.height, self.channels, p.u, p.v)
    }
}

/// Per-pixel depth in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "{}x{} depth map needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "depth map", index: i });
        }
        Ok(DepthMap { width, height, data })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        DepthMap { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        DepthMap { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Errors unless every value is strictly positive.
    pub fn require_positive(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|&d| !(d > 0.0)) {
            Some(i) => Err(Error::Validation {
                index: i,
                message: format!("{what}: depth {} is not positive", self.data[i]),
            }),
            None => Ok(()),
        }
    }
}

/// Per-pixel displacement `(du, dv)` in pixels, interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl FlowField {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 2 * width * height {
            return Err(Error::InvalidInput(format!(
                "{}x{} flow field needs {} values, got {}",
                width,
                height,
                2 * width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "flow field", index: i });
        }
        Ok(FlowField { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField { width, height, data: vec![0.0; 2 * width * height] }
    }

    pub fn constant(width: usize, height: usize, d: [f64; 2]) -> Self {
        FlowField {
            width,
            height,
            data: d.iter().copied().cycle().take(2 * width * height).collect(),
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f64; 2]) -> Self {
        let mut data = Vec::with_capacity(2 * width * height);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        FlowField { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        let i = 2 * (y * self.width + x);
        [self.data[i], self.data[i + 1]]
    }

    pub fn sample(&self, p: PixelCoord) -> SampleResult {
        sample_raw(&self.data, self.width, self.height, 2, p.u, p.v)
    }
}

/// Bilinear sample with its analytic coordinate derivatives. Channels beyond
/// `channels` are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleResult {
    pub value: [f64; 3],
    pub d_du: [f64; 3],
    pub d_dv: [f64; 3],
    pub channels: usize,
    pub valid: bool,
}

/// The four taps of a bilinear interpolation and their weights.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    /// Pixel indices of (x0,y0), (x1,y0), (x0,y1), (x1,y1).
    pub idx: [usize; 4],
    pub w: [f64; 4],
    pub dw_du: [f64; 4],
    pub dw_dv: [f64; 4],
}

/// `None` outside `[0, width−1] × [0, height−1]`.
pub(crate) fn stencil(width: usize, height: usize, u: f64, v: f64) -> Option<Stencil> {
    let (wm, hm) = ((width - 1) as f64, (height - 1) as f64);
    if !(u >= 0.0 && u <= wm && v >= 0.0 && v <= hm) {
        return None;
    }
    let x0 = (u.floor() as usize).min(width - 2);
    let y0 = (v.floor() as usize).min(height - 2);
    let a = u - x0 as f64;
    let b = v - y0 as f64;
    let i00 = y0 * width + x0;
    Some(Stencil {
        idx: [i00, i00 + 1, i00 + width, i00 + width + 1],
        w: [(1.0 - a) * (1.0 - b), a * (1.0 - b), (1.0 - a) * b, a * b],
        dw_du: [-(1.0 - b), 1.0 - b, -b, b],
        dw_dv: [-(1.0 - a), -a, 1.0 - a, a],
    })
}

pub(crate) fn sample_raw(data: &[f64], width: usize, height: usize, channels: usize, u: f64, v: f64) -> SampleResult {
    let mut out = SampleResult { channels, ..Default::default() };
    let Some(s) = stencil(width, height, u, v) else {
        return out;
    };
    out.valid = true;
    for c in 0..channels {
        for k in 0..4 {
            let px = data[s.idx[k] * channels + c];
            out.value[c] += s.w[k] * px;
            out.d_du[c] += s.dw_du[k] * px;
            out.d_dv[c] += s.dw_dv[k] * px;
        }
    }
    out
}

/// Per-pixel image derivatives, laid out like the image data.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGradient {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
}

/// Central differences in the interior, one-sided differences at the borders.
pub fn image_gradient(img: &Image) -> ImageGradient {
    let (w, h, c) = (img.width, img.height, img.channels);
    let mut du = vec![0.0; w * h * c];
    let mut dv = vec![0.0; w * h * c];
    let diff = |lo: usize, hi: usize, at: usize, n: usize| -> (usize, usize, f64) {
        if at == 0 {
            (lo, 1, 1.0)
        } else if at == n - 1 {
            (hi - 1, hi, 1.0)
        } else {
            (at - 1, at + 1, 0.5)
        }
    };
    for y in 0..h {
        for x in 0..w {
            let (xa, xb, sx) = diff(0, w - 1, x, w);
            let (ya, yb, sy) = diff(0, h - 1, y, h);
            for ch in 0..c {
                let i = (y * w + x) * c + ch;
                du[i] = sx * (img.get(xb, y, ch) - img.get(xa, y, ch));
                dv[i] = sy * (img.get(x, yb, ch) - img.get(x, ya, ch));
            }
        }
    }
    ImageGradient { width: w, height: h, channels: c, du, dv }
}
