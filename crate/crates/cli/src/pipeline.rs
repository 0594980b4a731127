//! One-shot run from a panorama and its depth to a reconstruction-ready export:
//! progressive inpainting along every pose of a pose set, then multi-view projection.
//!
//! Output tree: `views/` (panoramas, depths, `manifest.json`), `sparse/` (perspective
//! images and model files) and `timing.json`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use panowarp_core::inpaint::Backend;
use panowarp_core::io::{self, DepthFormat};
use panowarp_core::mvp::{self, ExportOptions, Layout, PanoramaViews, PoseConvention, SparseExporter, SparseModel};
use panowarp_core::pnvi::{self, DepthUpdate, PnviOptions, PnviPlan, PnviState, Strategy};
use panowarp_core::{CameraPose, Error, Result};

use crate::manifest::{Role, ViewEntry, ViewManifest, MANIFEST_NAME};
use crate::{load_panorama, save_panorama};

pub const DEFAULT_PRESET: &str = "axes6+diag4";
pub const DEFAULT_POSE_DISTANCE: f64 = 0.15;

/// `axes6` (±X, ±Y, ±Z), `diag4` (horizontal diagonals) or `axes6+diag4`, scaled to `distance`.
pub fn pose_preset(name: &str, distance: f64) -> Result<Vec<CameraPose>> {
    let d = distance;
    let axes = [
        [d, 0.0, 0.0],
        [-d, 0.0, 0.0],
        [0.0, d, 0.0],
        [0.0, -d, 0.0],
        [0.0, 0.0, d],
        [0.0, 0.0, -d],
    ];
    let g = d * std::f64::consts::FRAC_1_SQRT_2;
    let diag = [[g, 0.0, g], [g, 0.0, -g], [-g, 0.0, g], [-g, 0.0, -g]];
    let list: Vec<[f64; 3]> = match name {
        "axes6" => axes.to_vec(),
        "diag4" => diag.to_vec(),
        "axes6+diag4" => axes.iter().chain(&diag).copied().collect(),
        other => {
            return Err(Error::ContractViolation(format!(
                "unknown pose preset {other:?} (expected axes6, diag4 or axes6+diag4)"
            )))
        }
    };
    list.into_iter().map(|[x, y, z]| CameraPose::new(x, y, z)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InpaintConfig {
    pub backend: String,
    pub timeout_sec: f64,
    pub max_concurrent: usize,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        InpaintConfig {
            backend: "pullpush".into(),
            timeout_sec: 120.0,
            max_concurrent: panowarp_core::inpaint::DEFAULT_MAX_CONCURRENT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MvpConfig {
    pub layout: String,
    pub fov: f64,
    pub size: usize,
    pub stride: usize,
    pub pose_convention: String,
    /// `false` exports cameras and poses only.
    pub points: bool,
}

impl Default for MvpConfig {
    fn default() -> Self {
        MvpConfig {
            layout: Layout::default().name().into(),
            fov: mvp::DEFAULT_FOV,
            size: mvp::DEFAULT_VIEW_SIZE,
            stride: mvp::DEFAULT_STRIDE,
            pose_convention: "world-to-camera".into(),
            points: true,
        }
    }
}

/// The JSON config file. Relative paths are resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub image: PathBuf,
    pub depth: PathBuf,
    pub depth_format: String,
    pub flip_v: bool,
    pub out_dir: PathBuf,
    pub pose_preset: String,
    pub pose_distance: f64,
    /// Overrides the preset when present.
    pub poses: Option<Vec<[f64; 3]>>,
    pub step_length: f64,
    pub strategy: String,
    pub max_hole_ratio: f64,
    pub face_size: usize,
    pub keep_intermediate: bool,
    /// External depth estimator; depth is warped and diffused when absent.
    pub depth_hook: Option<String>,
    pub inpaint: InpaintConfig,
    pub mvp: MvpConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            image: PathBuf::new(),
            depth: PathBuf::new(),
            depth_format: DepthFormat::default().name().into(),
            flip_v: false,
            out_dir: PathBuf::from("out"),
            pose_preset: DEFAULT_PRESET.into(),
            pose_distance: DEFAULT_POSE_DISTANCE,
            poses: None,
            step_length: pnvi::DEFAULT_STEP_LENGTH,
            strategy: Strategy::default().name().into(),
            max_hole_ratio: pnvi::DEFAULT_MAX_HOLE_RATIO,
            face_size: panowarp_core::cubemap::DEFAULT_FACE_SIZE,
            keep_intermediate: false,
            depth_hook: None,
            inpaint: InpaintConfig::default(),
            mvp: MvpConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.image, &mut cfg.depth, &mut cfg.out_dir] {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if self.image.as_os_str().is_empty() || self.depth.as_os_str().is_empty() {
            return Err(Error::ContractViolation("config must name both `image` and `depth`".into()));
        }
        let poses = match &self.poses {
            Some(list) => list
                .iter()
                .map(|[x, y, z]| CameraPose::new(*x, *y, *z))
                .collect::<Result<Vec<_>>>()?,
            None => pose_preset(&self.pose_preset, self.pose_distance)?,
        };
        if poses.is_empty() {
            return Err(Error::ContractViolation("the pose set is empty".into()));
        }
        let strategy: Strategy = self.strategy.parse()?;
        let plans = poses
            .iter()
            .map(|p| pnvi::plan_with_strategy(CameraPose::ORIGIN, *p, self.step_length, strategy))
            .collect::<Result<Vec<_>>>()?;
        if !(self.max_hole_ratio > 0.0 && self.max_hole_ratio <= 1.0) {
            return Err(Error::ContractViolation(format!(
                "max_hole_ratio {} outside (0, 1]",
                self.max_hole_ratio
            )));
        }
        if self.face_size == 0 {
            return Err(Error::ContractViolation("face_size must be positive".into()));
        }
        if !(self.inpaint.timeout_sec > 0.0 && self.inpaint.timeout_sec.is_finite()) {
            return Err(Error::ContractViolation("inpaint.timeout_sec must be positive".into()));
        }
        let backend: Backend = self.inpaint.backend.parse()?;
        let backend = backend
            .with_timeout(Duration::from_secs_f64(self.inpaint.timeout_sec))
            .with_max_concurrent(self.inpaint.max_concurrent);
        let depth = match &self.depth_hook {
            Some(cmd) => DepthUpdate::External(
                panowarp_core::inpaint::ExternalCommand::new(cmd)?
                    .with_timeout(Duration::from_secs_f64(self.inpaint.timeout_sec)),
            ),
            None => DepthUpdate::WarpAndFill,
        };
        Ok(Resolved {
            image: self.image.clone(),
            depth: self.depth.clone(),
            depth_format: self.depth_format.parse()?,
            flip_v: self.flip_v,
            out_dir: self.out_dir.clone(),
            plans,
            backend,
            pnvi: PnviOptions {
                face_size: self.face_size,
                max_hole_ratio: self.max_hole_ratio,
                depth,
            },
            keep_intermediate: self.keep_intermediate,
            mvp: MvpSettings::from_config(&self.mvp)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvpSettings {
    pub layout: Layout,
    pub fov: f64,
    pub size: usize,
    pub stride: usize,
    pub export: ExportOptions,
}

impl MvpSettings {
    pub fn from_config(cfg: &MvpConfig) -> Result<Self> {
        if cfg.stride == 0 {
            return Err(Error::ContractViolation("mvp.stride must be positive".into()));
        }
        if cfg.size == 0 || !(cfg.fov > 0.0 && cfg.fov <= 120.0) {
            return Err(Error::ContractViolation(format!(
                "mvp view {}px at {}° is invalid (size > 0, fov in (0, 120])",
                cfg.size, cfg.fov
            )));
        }
        let convention: PoseConvention = cfg.pose_convention.parse()?;
        Ok(MvpSettings {
            layout: cfg.layout.parse()?,
            fov: cfg.fov,
            size: cfg.size,
            stride: cfg.stride,
            export: ExportOptions {
                convention,
                points: cfg.points,
            },
        })
    }
}

/// A validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub image: PathBuf,
    pub depth: PathBuf,
    pub depth_format: DepthFormat,
    pub flip_v: bool,
    pub out_dir: PathBuf,
    pub plans: Vec<PnviPlan>,
    pub backend: Backend,
    pub pnvi: PnviOptions,
    pub keep_intermediate: bool,
    pub mvp: MvpSettings,
}

impl Resolved {
    /// Human-readable plan: one line per pose branch plus totals.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let mut total = 0;
        for (i, p) in self.plans.iter().enumerate() {
            let d = p.start_pose.distance(p.target_pose);
            out.push_str(&format!(
                "pose {i:02}: target {} ({d:.3} m), {} steps of at most {} m, {}\n",
                p.target_pose,
                p.steps.len(),
                p.step_length,
                p.strategy.name()
            ));
            total += p.steps.len();
        }
        let kept = if self.keep_intermediate {
            total
        } else {
            self.plans.len()
        };
        out.push_str(&format!(
            "{} poses, {total} steps, {} panoramas to export ({} views each, {}px, fov {}°)\n",
            self.plans.len(),
            kept + 1,
            self.mvp.layout.directions().len(),
            self.mvp.size,
            self.mvp.fov
        ));
        out.push_str(&format!("output: {}\n", self.out_dir.display()));
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MvpTimings {
    pub extract: Duration,
    pub export: Duration,
}

/// Slices every view of a manifest into perspective views and exports the sparse model.
pub fn mvp_from_manifest(manifest_path: &Path, settings: &MvpSettings, out_dir: &Path) -> Result<(SparseModel, MvpTimings)> {
    let manifest = ViewManifest::read(manifest_path)?;
    if manifest.views.is_empty() {
        return Err(Error::ContractViolation(format!("{} lists no views", manifest_path.display())));
    }
    let format = manifest.depth_format()?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    // read everything up front so nothing is written for a broken manifest
    for entry in &manifest.views {
        entry.camera_pose()?;
        let (img, depth) = ViewManifest::resolve(base, entry);
        for p in [&img, &depth] {
            if !p.is_file() {
                return Err(Error::ContractViolation(format!("manifest entry {} is missing", p.display())));
            }
        }
    }

    let mut timings = MvpTimings::default();
    let mut exporter = SparseExporter::new(out_dir, settings.export)?;
    for (i, entry) in manifest.views.iter().enumerate() {
        let (img_path, depth_path) = ViewManifest::resolve(base, entry);
        let state = load_panorama(&img_path, &depth_path, format, manifest.flip_v, entry.camera_pose()?)?;
        let t = Instant::now();
        let views = mvp::extract_views(&state.image, state.pose, settings.layout, settings.fov, settings.size)?;
        let cloud = if settings.export.points {
            mvp::lift_point_cloud(&state.image, &state.depth, state.pose, settings.stride)?
        } else {
            Vec::new()
        };
        timings.extract += t.elapsed();
        let t = Instant::now();
        exporter.add(PanoramaViews {
            prefix: format!("v{i:03}"),
            views,
            cloud,
        })?;
        timings.export += t.elapsed();
    }
    let t = Instant::now();
    let model = exporter.finish()?;
    timings.export += t.elapsed();
    Ok((model, timings))
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub manifest: PathBuf,
    pub sparse_dir: PathBuf,
    pub timing: PathBuf,
    pub views: usize,
    pub model: SparseModel,
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn prepare_out_dir(out: &Path, overwrite: bool) -> Result<()> {
    let occupied = out.read_dir().map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied && !overwrite {
        return Err(Error::ContractViolation(format!(
            "{} is not empty; pass --overwrite to replace its pipeline artifacts",
            out.display()
        )));
    }
    for sub in ["views", "sparse"] {
        let p = out.join(sub);
        if p.exists() {
            std::fs::remove_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
    }
    let timing = out.join("timing.json");
    if timing.exists() {
        std::fs::remove_file(&timing).map_err(|e| Error::io(&timing, e))?;
    }
    io::create_dir_all(&out.join("views"))
}

/// Runs the whole pipeline. `progress` receives one short line per finished stage or branch.
pub fn run_pipeline(cfg: &Resolved, overwrite: bool, progress: &mut dyn FnMut(&str)) -> Result<PipelineReport> {
    let started = Instant::now();
    let t = Instant::now();
    let source = load_panorama(&cfg.image, &cfg.depth, cfg.depth_format, cfg.flip_v, CameraPose::ORIGIN)
        .map_err(|e| e.in_stage("load"))?;
    prepare_out_dir(&cfg.out_dir, overwrite).map_err(|e| e.in_stage("load"))?;
    let views_dir = cfg.out_dir.join("views");
    let manifest_path = views_dir.join(MANIFEST_NAME);
    let mut manifest = ViewManifest::new(cfg.depth_format);
    manifest.flip_v = cfg.flip_v;
    let (image, depth) = save_panorama(&source, &views_dir, "source", cfg.depth_format, cfg.flip_v)?;
    manifest.views.push(ViewEntry {
        pose: source.pose.as_vec().to_array(),
        image,
        depth,
        role: Role::Source,
        branch: None,
        step: None,
    });
    let load_time = t.elapsed();

    let t = Instant::now();
    let mut stage = pnvi::StepTimings::default();
    let mut branches = Vec::new();
    let mut total_steps = 0;
    for (b, plan) in cfg.plans.iter().enumerate() {
        let bt = Instant::now();
        let last = plan.steps.len();
        let write_step = |state: &PnviState, k: usize, manifest: &mut ViewManifest| -> Result<()> {
            let (image, depth) = save_panorama(state, &views_dir, &format!("pose{b:02}_s{k:03}"), cfg.depth_format, cfg.flip_v)?;
            manifest.views.push(ViewEntry {
                pose: state.pose.as_vec().to_array(),
                image,
                depth,
                role: if k == last { Role::Target } else { Role::Intermediate },
                branch: Some(b),
                step: Some(k),
            });
            Ok(())
        };
        let result = if plan.steps.is_empty() {
            write_step(&source, 0, &mut manifest)
        } else {
            pnvi::pnvi_run_with(&source, plan, &cfg.backend, &cfg.pnvi, |o| {
                stage.warp += o.timings.warp;
                stage.inpaint += o.timings.inpaint;
                stage.depth += o.timings.depth;
                if cfg.keep_intermediate || o.index == last {
                    write_step(&o.state, o.index, &mut manifest)?;
                }
                Ok(())
            })
            .map(|_| ())
        };
        if let Err(e) = result {
            manifest.incomplete = Some(e.to_string());
            let _ = manifest.write(&manifest_path);
            return Err(e.in_stage(format!(
                "pnvi, pose {b:02} ({}); partial manifest at {}",
                plan.target_pose,
                manifest_path.display()
            )));
        }
        total_steps += plan.steps.len();
        branches.push(json!({
            "pose": plan.target_pose.as_vec().to_array(),
            "steps": plan.steps.len(),
            "seconds": secs(bt.elapsed()),
        }));
        progress(&format!("pose {b:02} {}: {} steps", plan.target_pose, plan.steps.len()));
    }
    manifest.write(&manifest_path).map_err(|e| e.in_stage("pnvi"))?;
    let pnvi_time = t.elapsed();

    let sparse_dir = cfg.out_dir.join("sparse");
    let (model, mvp_times) = mvp_from_manifest(&manifest_path, &cfg.mvp, &sparse_dir).map_err(|e| e.in_stage("mvp"))?;
    progress(&format!(
        "mvp: {} images, {} points",
        model.images.len(),
        model.points.len()
    ));

    let timing_path = cfg.out_dir.join("timing.json");
    let report = json!({
        "threads": rayon::current_num_threads(),
        "total_seconds": secs(started.elapsed()),
        "stages": [
            {"name": "load", "seconds": secs(load_time)},
            {
                "name": "pnvi",
                "seconds": secs(pnvi_time),
                "steps": total_steps,
                "warp_seconds": secs(stage.warp),
                "inpaint_seconds": secs(stage.inpaint),
                "depth_seconds": secs(stage.depth),
            },
            {"name": "mvp_extract", "seconds": secs(mvp_times.extract)},
            {"name": "mvp_export", "seconds": secs(mvp_times.export)},
        ],
        "branches": branches,
    });
    let text = serde_json::to_string_pretty(&report)? + "\n";
    std::fs::write(&timing_path, text).map_err(|e| Error::io(&timing_path, e))?;

    Ok(PipelineReport {
        manifest: manifest_path,
        sparse_dir,
        timing: timing_path,
        views: manifest.views.len(),
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_has_ten_poses_at_distance() {
        let poses = pose_preset(DEFAULT_PRESET, 0.15).unwrap();
        assert_eq!(poses.len(), 10);
        for p in &poses {
            assert!((p.distance(CameraPose::ORIGIN) - 0.15).abs() < 1e-12);
        }
        assert!(pose_preset("ring", 0.1).is_err());
    }

    #[test]
    fn config_defaults_and_unknown_keys() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"image": "a.png", "depth": "a.pfm"}"#).unwrap();
        assert_eq!(cfg.step_length, 0.02);
        assert_eq!(cfg.inpaint.backend, "pullpush");
        let r = cfg.resolve().unwrap();
        assert_eq!(r.plans.len(), 10);
        assert!(r.plans.iter().all(|p| p.steps.len() == 8));
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"imgae": "a.png"}"#).is_err());
    }

    #[test]
    fn resolve_rejects_bad_values() {
        let base = PipelineConfig {
            image: "a.png".into(),
            depth: "a.pfm".into(),
            ..PipelineConfig::default()
        };
        let bad = [
            PipelineConfig { step_length: 0.0, ..base.clone() },
            PipelineConfig { strategy: "zigzag".into(), ..base.clone() },
            PipelineConfig { poses: Some(vec![]), ..base.clone() },
            PipelineConfig { image: PathBuf::new(), ..base.clone() },
            PipelineConfig {
                inpaint: InpaintConfig {
                    backend: "magic".into(),
                    ..InpaintConfig::default()
                },
                ..base.clone()
            },
            PipelineConfig {
                mvp: MvpConfig {
                    stride: 0,
                    ..MvpConfig::default()
                },
                ..base.clone()
            },
        ];
        for cfg in bad {
            assert_eq!(cfg.resolve().unwrap_err().exit_code(), 2, "{cfg:?}");
        }
    }

    #[test]
    fn describe_lists_every_pose() {
        let cfg = PipelineConfig {
            image: "a.png".into(),
            depth: "a.pfm".into(),
            poses: Some(vec![[0.33, 0.0, 0.0], [0.0, 0.0, 0.0]]),
            ..PipelineConfig::default()
        };
        let text = cfg.resolve().unwrap().describe();
        assert!(text.contains("pose 00: target 0.33,0,0 (0.330 m), 17 steps"), "{text}");
        assert!(text.contains("pose 01: target 0,0,0 (0.000 m), 0 steps"), "{text}");
    }
}
