//! Progressive novel-view inpainting.
//!
//! A camera move is split into short equal steps. Each step warps the current clean
//! panorama to the next pose, fills the holes face by face on a cubemap, projects the fill
//! back, keeps every warped pixel as observed, and completes the depth so the next step
//! can warp again.

use std::str::FromStr;
use std::time::{Duration, Instant};

use image::RgbImage;
use rayon::prelude::*;

use crate::cubemap::{c2e, e2c, e2c_mask_footprint, CubeFace, CubemapSet, DEFAULT_FACE_SIZE};
use crate::error::{Error, Result};
use crate::inpaint::{inpaint, inpaint_depth, ExternalCommand, InpaintContext, InpaintRequest, InpaintTarget, Inpainter};
use crate::raster::{check_dims, DepthMap, EquirectImage};
use crate::sphere::CameraPose;
use crate::warp::{composite_replace, cvs_warp, WarpResult};

pub const DEFAULT_STEP_LENGTH: f64 = 0.02;
pub const DEFAULT_MAX_HOLE_RATIO: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    /// Small steps, cubemap inpainting.
    #[default]
    Progressive,
    /// Small steps, inpainting directly on the equirectangular panorama.
    DirectPanorama,
    /// One step straight to the target, cubemap inpainting.
    LargeStep,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "progressive" | "progressive-cubemap" => Ok(Strategy::Progressive),
            "direct" | "direct-panorama" => Ok(Strategy::DirectPanorama),
            "large-step" => Ok(Strategy::LargeStep),
            other => Err(Error::ContractViolation(format!(
                "unknown strategy {other:?} (expected progressive, direct-panorama or large-step)"
            ))),
        }
    }
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Progressive => "progressive",
            Strategy::DirectPanorama => "direct-panorama",
            Strategy::LargeStep => "large-step",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnviPlan {
    pub start_pose: CameraPose,
    pub target_pose: CameraPose,
    pub step_length: f64,
    pub steps: Vec<CameraPose>,
    pub strategy: Strategy,
}

/// `ceil(distance / step_length)` equal collinear steps; the last one is exactly `target`.
pub fn plan_path(start: CameraPose, target: CameraPose, step_length: f64) -> Result<PnviPlan> {
    plan_with_strategy(start, target, step_length, Strategy::Progressive)
}

pub fn plan_with_strategy(
    start: CameraPose,
    target: CameraPose,
    step_length: f64,
    strategy: Strategy,
) -> Result<PnviPlan> {
    if !(step_length > 0.0) || !step_length.is_finite() {
        return Err(Error::ContractViolation(format!(
            "step length must be positive, got {step_length}"
        )));
    }
    if !start.as_vec().is_finite() || !target.as_vec().is_finite() {
        return Err(Error::ContractViolation("poses must be finite".into()));
    }
    let distance = start.distance(target);
    let count = match strategy {
        _ if distance == 0.0 => 0,
        Strategy::LargeStep => 1,
        _ => (distance / step_length).ceil() as usize,
    };
    let (a, b) = (start.as_vec(), target.as_vec());
    let steps = (1..=count)
        .map(|k| {
            if k == count {
                target
            } else {
                let t = k as f64 / count as f64;
                CameraPose::from_vec(a + (b - a).scale(t))
            }
        })
        .collect();
    Ok(PnviPlan {
        start_pose: start,
        target_pose: target,
        step_length,
        steps,
        strategy,
    })
}

/// A clean panorama: no holes, strictly positive depth.
#[derive(Debug, Clone, PartialEq)]
pub struct PnviState {
    pub pose: CameraPose,
    pub image: EquirectImage,
    pub depth: DepthMap,
}

impl PnviState {
    pub fn new(pose: CameraPose, image: EquirectImage, depth: DepthMap) -> Result<Self> {
        check_dims("depth map", depth.dims(), image.dims())?;
        depth.validate_positive()?;
        Ok(PnviState { pose, image, depth })
    }
}

/// How the depth at each new pose is obtained.
#[derive(Debug, Clone, Default)]
pub enum DepthUpdate {
    /// Warp the previous depth and diffuse it into the holes.
    #[default]
    WarpAndFill,
    /// Re-estimate depth from the completed panorama with an external command.
    External(ExternalCommand),
}

#[derive(Debug, Clone)]
pub struct PnviOptions {
    pub face_size: usize,
    pub max_hole_ratio: f64,
    pub depth: DepthUpdate,
}

impl Default for PnviOptions {
    fn default() -> Self {
        PnviOptions {
            face_size: DEFAULT_FACE_SIZE,
            max_hole_ratio: DEFAULT_MAX_HOLE_RATIO,
            depth: DepthUpdate::WarpAndFill,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepTimings {
    pub warp: Duration,
    pub inpaint: Duration,
    pub depth: Duration,
}

/// Everything produced by one step, handed to observers of [`pnvi_run_with`].
#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// 1-based step number.
    pub index: usize,
    pub warped: WarpResult,
    pub state: PnviState,
    pub hole_ratio: f64,
    pub timings: StepTimings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FillMode {
    Cubemap,
    Panorama,
}

pub fn pnvi_step(
    state: &PnviState,
    next_pose: CameraPose,
    backend: &dyn Inpainter,
    opts: &PnviOptions,
) -> Result<PnviState> {
    step(state, next_pose, backend, opts, FillMode::Cubemap, 1).map(|o| o.state)
}

fn step(
    state: &PnviState,
    next_pose: CameraPose,
    backend: &dyn Inpainter,
    opts: &PnviOptions,
    mode: FillMode,
    index: usize,
) -> Result<StepOutcome> {
    let t0 = Instant::now();
    let offset = CameraPose::from_vec(next_pose.as_vec() - state.pose.as_vec());
    let warped = cvs_warp(&state.image, &state.depth, offset)?;
    let hole_ratio = warped.hole_ratio();
    let warp_time = t0.elapsed();
    if hole_ratio > opts.max_hole_ratio {
        return Err(Error::StepTooLarge {
            ratio: hole_ratio,
            max: opts.max_hole_ratio,
        });
    }

    let t1 = Instant::now();
    let image = if warped.mask.hole_count() == 0 {
        warped.image.clone()
    } else {
        let filled = match mode {
            FillMode::Cubemap => fill_on_cubemap(&warped, next_pose, backend, opts.face_size)?,
            FillMode::Panorama => fill_on_panorama(&warped, next_pose, backend)?,
        };
        composite_replace(&filled, &warped)?
    };
    let inpaint_time = t1.elapsed();

    let t2 = Instant::now();
    let depth = match &opts.depth {
        DepthUpdate::WarpAndFill => inpaint_depth(&warped.depth, &warped.mask)?,
        DepthUpdate::External(cmd) => cmd.estimate_depth(&image)?,
    };
    let depth_time = t2.elapsed();
    let state = PnviState::new(next_pose, image, depth)?;
    Ok(StepOutcome {
        index,
        warped,
        state,
        hole_ratio,
        timings: StepTimings {
            warp: warp_time,
            inpaint: inpaint_time,
            depth: depth_time,
        },
    })
}

fn fill_on_cubemap(
    warped: &WarpResult,
    pose: CameraPose,
    backend: &dyn Inpainter,
    face_size: usize,
) -> Result<EquirectImage> {
    let faces = e2c(&warped.image, face_size)?;
    let masks = e2c_mask_footprint(&warped.mask, face_size)?;
    let filled: Vec<RgbImage> = CubeFace::ALL
        .par_iter()
        .map(|&face| {
            let req = InpaintRequest {
                image: faces.face(face).clone(),
                mask: masks.face(face).clone(),
            };
            let ctx = InpaintContext {
                pose,
                target: InpaintTarget::Face { face },
            };
            inpaint(&req, backend, &ctx)
        })
        .collect::<Result<_>>()?;
    let cube = CubemapSet::new(filled.try_into().expect("six faces"))?;
    let (w, h) = warped.image.dims();
    c2e(&cube, w, h)
}

fn fill_on_panorama(warped: &WarpResult, pose: CameraPose, backend: &dyn Inpainter) -> Result<EquirectImage> {
    let req = InpaintRequest {
        image: warped.image.as_rgb().clone(),
        mask: warped.mask.clone(),
    };
    EquirectImage::new(inpaint(&req, backend, &InpaintContext::panorama(pose))?)
}

pub fn pnvi_run(
    initial: &PnviState,
    plan: &PnviPlan,
    backend: &dyn Inpainter,
    opts: &PnviOptions,
) -> Result<PnviState> {
    pnvi_run_with(initial, plan, backend, opts, |_| Ok(()))
}

/// Like [`pnvi_run`], calling `observer` after every step. Errors carry the step number.
pub fn pnvi_run_with(
    initial: &PnviState,
    plan: &PnviPlan,
    backend: &dyn Inpainter,
    opts: &PnviOptions,
    mut observer: impl FnMut(&StepOutcome) -> Result<()>,
) -> Result<PnviState> {
    if plan.start_pose != initial.pose {
        return Err(Error::ContractViolation(format!(
            "plan starts at {} but the state is at {}",
            plan.start_pose, initial.pose
        )));
    }
    let mode = match plan.strategy {
        Strategy::DirectPanorama => FillMode::Panorama,
        Strategy::Progressive | Strategy::LargeStep => FillMode::Cubemap,
    };
    let mut state = initial.clone();
    for (i, &pose) in plan.steps.iter().enumerate() {
        let index = i + 1;
        let outcome = step(&state, pose, backend, opts, mode, index).map_err(|e| e.at_step(index))?;
        observer(&outcome).map_err(|e| e.at_step(index))?;
        state = outcome.state;
    }
    Ok(state)
}
