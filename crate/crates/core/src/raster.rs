//! Raster containers: equirectangular color, depth, and binary hole masks.

use image::RgbImage;

use crate::error::{Error, Result};

pub(crate) fn check_dims(
    what: &'static str,
    got: (usize, usize),
    want: (usize, usize),
) -> Result<()> {
    if got != want {
        return Err(Error::DimensionMismatch {
            what,
            got_w: got.0,
            got_h: got.1,
            want_w: want.0,
            want_h: want.1,
        });
    }
    Ok(())
}

/// 8-bit RGB panorama with width == 2 * height.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquirectImage(RgbImage);

impl EquirectImage {
    pub fn new(image: RgbImage) -> Result<Self> {
        let (w, h) = image.dimensions();
        if h == 0 || w != 2 * h {
            return Err(Error::ContractViolation(format!(
                "equirectangular image must be 2:1 and non-empty, got {w}x{h}"
            )));
        }
        Ok(EquirectImage(image))
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(u32, u32) -> image::Rgb<u8>) -> Result<Self> {
        EquirectImage::new(RgbImage::from_fn(width as u32, height as u32, f))
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        EquirectImage::from_fn(width, height, |_, _| image::Rgb(rgb))
    }

    pub fn width(&self) -> usize {
        self.0.width() as usize
    }

    pub fn height(&self) -> usize {
        self.0.height() as usize
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    pub fn as_rgb(&self) -> &RgbImage {
        &self.0
    }

    pub fn into_rgb(self) -> RgbImage {
        self.0
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width() + x) * 3;
        let raw = self.0.as_raw();
        [raw[i], raw[i + 1], raw[i + 2]]
    }

    pub fn flip_vertical(&self) -> EquirectImage {
        EquirectImage(image::imageops::flip_vertical(&self.0))
    }
}

/// Per-pixel metric depth in meters; 0.0 marks invalid or unfilled.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::ContractViolation(format!(
                "depth buffer of {} values does not fill {width}x{height}",
                data.len()
            )));
        }
        Ok(DepthMap {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        DepthMap::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        DepthMap::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Errors on the first non-positive or non-finite value.
    pub fn validate_positive(&self) -> Result<()> {
        match self.data.iter().position(|d| !(*d > 0.0) || !d.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::InvalidDepth {
                x: i % self.width,
                y: i / self.width,
                value: self.data[i],
            }),
        }
    }

    pub fn flip_vertical(&self) -> DepthMap {
        let data = self
            .data
            .chunks_exact(self.width)
            .rev()
            .flatten()
            .copied()
            .collect();
        DepthMap {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Binary raster: 1 = hole / unseen, 0 = observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoleMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl HoleMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ContractViolation(format!(
                "mask buffer of {} values does not fill {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| *v > 1) {
            return Err(Error::ContractViolation("mask values must be 0 or 1".into()));
        }
        Ok(HoleMask {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        HoleMask {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn ones(width: usize, height: usize) -> Self {
        HoleMask {
            width,
            height,
            data: vec![1; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let data = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y) as u8)
            .collect();
        HoleMask {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn is_hole(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] != 0
    }

    pub fn hole_count(&self) -> usize {
        self.data.iter().filter(|v| **v != 0).count()
    }

    pub fn flip_vertical(&self) -> HoleMask {
        let data = self
            .data
            .chunks_exact(self.width.max(1))
            .rev()
            .flatten()
            .copied()
            .collect();
        HoleMask {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Bilinear RGB sample of a panorama at continuous pixel coordinates; x wraps, y clamps.
#[inline]
pub(crate) fn sample_equirect_bilinear(img: &RgbImage, x: f64, y: f64) -> [u8; 3] {
    let w = img.width() as usize;
    let h = img.height() as usize;
    let raw = img.as_raw();
    let xf = x.floor();
    let fx = x - xf;
    let x0 = (xf as i64).rem_euclid(w as i64) as usize;
    let x1 = (x0 + 1) % w;
    let yc = y.clamp(0.0, (h - 1) as f64);
    let yf = yc.floor();
    let fy = yc - yf;
    let y0 = yf as usize;
    let y1 = (y0 + 1).min(h - 1);
    bilerp(raw, w, (x0, x1), (y0, y1), fx, fy)
}

/// Bilinear RGB sample of a square face at continuous pixel coordinates; both axes clamp.
#[inline]
pub(crate) fn sample_clamped_bilinear(img: &RgbImage, x: f64, y: f64) -> [u8; 3] {
    let w = img.width() as usize;
    let h = img.height() as usize;
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let (xf, yf) = (xc.floor(), yc.floor());
    let (x0, y0) = (xf as usize, yf as usize);
    bilerp(
        img.as_raw(),
        w,
        (x0, (x0 + 1).min(w - 1)),
        (y0, (y0 + 1).min(h - 1)),
        xc - xf,
        yc - yf,
    )
}

#[inline]
fn bilerp(
    raw: &[u8],
    w: usize,
    (x0, x1): (usize, usize),
    (y0, y1): (usize, usize),
    fx: f64,
    fy: f64,
) -> [u8; 3] {
    let i00 = (y0 * w + x0) * 3;
    let i01 = (y0 * w + x1) * 3;
    let i10 = (y1 * w + x0) * 3;
    let i11 = (y1 * w + x1) * 3;
    let mut out = [0u8; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let top = raw[i00 + c] as f64 * (1.0 - fx) + raw[i01 + c] as f64 * fx;
        let bot = raw[i10 + c] as f64 * (1.0 - fx) + raw[i11 + c] as f64 * fx;
        *o = to_u8(top * (1.0 - fy) + bot * fy);
    }
    out
}

#[inline]
pub(crate) fn to_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}
