//! Hole filling for cubemap faces and panoramas.
//!
//! [`inpaint`] is the single entry point: it validates the request, skips work when there
//! is nothing to fill, calls an [`Inpainter`], and copies every known pixel back from the
//! request so no backend can alter observed content.

mod external;
pub mod pullpush;

use std::str::FromStr;
use std::time::Duration;

use image::RgbImage;

pub use external::{ExternalCommand, DEFAULT_MAX_CONCURRENT, DEFAULT_TIMEOUT};

use crate::cubemap::CubeFace;
use crate::error::{Error, Result};
use crate::raster::{check_dims, to_u8, DepthMap, HoleMask};
use crate::sphere::CameraPose;

/// Fill value for the constant backend when nothing is known.
const NEUTRAL_GRAY: u8 = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct InpaintRequest {
    pub image: RgbImage,
    pub mask: HoleMask,
}

/// What a request covers; lets backends that know the scene render the right view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InpaintTarget {
    Face { face: CubeFace },
    Panorama,
    /// A standalone raster with no known geometry.
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InpaintContext {
    /// Viewpoint of the panorama being completed.
    pub pose: CameraPose,
    pub target: InpaintTarget,
}

impl InpaintContext {
    pub fn panorama(pose: CameraPose) -> Self {
        InpaintContext {
            pose,
            target: InpaintTarget::Panorama,
        }
    }
}

pub trait Inpainter: Send + Sync {
    /// Returns a raster the size of `req.image`; values at known pixels are ignored.
    fn fill(&self, req: &InpaintRequest, ctx: &InpaintContext) -> Result<RgbImage>;

    /// Whether a request with no known pixel is an error.
    fn needs_known_pixels(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    /// Mean of the known pixels.
    Constant,
    PullPush,
    External(ExternalCommand),
}

impl Backend {
    pub fn with_timeout(self, timeout: Duration) -> Self {
        match self {
            Backend::External(cmd) => Backend::External(cmd.with_timeout(timeout)),
            other => other,
        }
    }

    pub fn with_max_concurrent(self, n: usize) -> Self {
        match self {
            Backend::External(cmd) => Backend::External(cmd.with_max_concurrent(n)),
            other => other,
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    /// `constant`, `pullpush` or `external:<cmd>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Backend::Constant),
            "pullpush" => Ok(Backend::PullPush),
            _ => match s.strip_prefix("external:") {
                Some(cmd) => Ok(Backend::External(ExternalCommand::new(cmd)?)),
                None => Err(Error::ContractViolation(format!(
                    "unknown backend {s:?} (expected constant, pullpush or external:<cmd>)"
                ))),
            },
        }
    }
}

impl Inpainter for Backend {
    fn fill(&self, req: &InpaintRequest, ctx: &InpaintContext) -> Result<RgbImage> {
        match self {
            Backend::Constant => Ok(constant_fill(req)),
            Backend::PullPush => Ok(pullpush_fill(req, matches!(ctx.target, InpaintTarget::Panorama))),
            Backend::External(cmd) => cmd.run(&req.image, &req.mask),
        }
    }

    fn needs_known_pixels(&self) -> bool {
        !matches!(self, Backend::Constant)
    }
}

fn constant_fill(req: &InpaintRequest) -> RgbImage {
    let mask = req.mask.data();
    let mut sum = [0u64; 3];
    let mut count = 0u64;
    for (i, px) in req.image.pixels().enumerate() {
        if mask[i] == 0 {
            for c in 0..3 {
                sum[c] += px.0[c] as u64;
            }
            count += 1;
        }
    }
    let mean = if count == 0 {
        [NEUTRAL_GRAY; 3]
    } else {
        sum.map(|s| to_u8(s as f64 / count as f64))
    };
    RgbImage::from_pixel(req.image.width(), req.image.height(), image::Rgb(mean))
}

fn pullpush_fill(req: &InpaintRequest, wrap_x: bool) -> RgbImage {
    let (w, h) = (req.image.width() as usize, req.image.height() as usize);
    let values: Vec<f32> = req.image.as_raw().iter().map(|v| *v as f32).collect();
    let known: Vec<bool> = req.mask.data().iter().map(|m| *m == 0).collect();
    let filled = pullpush::fill(&values, &known, w, h, 3, wrap_x);
    let raw = filled.into_iter().map(|v| to_u8(v as f64)).collect();
    RgbImage::from_raw(w as u32, h as u32, raw).expect("sized by construction")
}

/// Fills the holes of `req` with `backend`; known pixels pass through bit-exactly.
pub fn inpaint(req: &InpaintRequest, backend: &dyn Inpainter, ctx: &InpaintContext) -> Result<RgbImage> {
    let dims = (req.image.width() as usize, req.image.height() as usize);
    check_dims("inpaint mask", req.mask.dims(), dims)?;
    let holes = req.mask.hole_count();
    if holes == 0 {
        return Ok(req.image.clone());
    }
    if holes == req.mask.data().len() && backend.needs_known_pixels() {
        return Err(Error::DegenerateInput(
            "nothing to propagate from: every pixel is a hole".into(),
        ));
    }
    let filled = backend.fill(req, ctx)?;
    if filled.dimensions() != req.image.dimensions() {
        return Err(Error::BackendFailure {
            message: format!(
                "backend returned {}x{} for a {}x{} request",
                filled.width(),
                filled.height(),
                dims.0,
                dims.1
            ),
            diagnostics: String::new(),
        });
    }
    let mut out = req.image.clone();
    let mask = req.mask.data();
    for (i, (dst, src)) in out.pixels_mut().zip(filled.pixels()).enumerate() {
        if mask[i] != 0 {
            *dst = *src;
        }
    }
    Ok(out)
}

/// Diffuses valid depths into the holes of `mask`; filled values stay within the valid range.
pub fn inpaint_depth(depth: &DepthMap, mask: &HoleMask) -> Result<DepthMap> {
    check_dims("depth hole mask", mask.dims(), depth.dims())?;
    let (w, h) = depth.dims();
    let known: Vec<bool> = mask.data().iter().map(|m| *m == 0).collect();
    for (i, k) in known.iter().enumerate() {
        let d = depth.data()[i];
        if *k && !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidDepth {
                x: i % w,
                y: i / w,
                value: d,
            });
        }
    }
    if !known.iter().any(|k| *k) {
        return Err(Error::DegenerateInput("depth map has no valid pixel".into()));
    }
    let filled = pullpush::fill(depth.data(), &known, w, h, 1, true);
    DepthMap::new(w, h, filled)
}
