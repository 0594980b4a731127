//! Multi-view projection: posed pinhole views sliced out of panoramas, a depth-lifted
//! point cloud, and a sparse-model export tying the two together.
//!
//! The export frame is the scene frame re-expressed in the first panorama's front camera
//! axes (x right, y down, z forward), so that camera has the identity rotation.

pub mod colmap;

use std::collections::HashMap;
use std::path::Path;

use image::RgbImage;
use rayon::prelude::*;

use crate::cubemap::CubeFace;
use crate::error::{Error, Result};
use crate::geom::{Mat3, Quat, Vec3};
use crate::io;
use crate::pinhole::{focal_from_fov, render};
use crate::raster::{check_dims, DepthMap, EquirectImage};
use crate::sphere::{lift_to_3d, pixel_to_spherical, CameraPose};

pub use colmap::{PoseConvention, SparseModel};

pub const DEFAULT_FOV: f64 = 90.0;
pub const DEFAULT_VIEW_SIZE: usize = 512;
pub const DEFAULT_STRIDE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    Cube6,
    Ring8,
    #[default]
    Cube6Ring8,
}

impl std::str::FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube6" | "cubemap6" => Ok(Layout::Cube6),
            "ring8" => Ok(Layout::Ring8),
            "cube6+ring8" => Ok(Layout::Cube6Ring8),
            other => Err(Error::ContractViolation(format!(
                "unknown layout {other:?} (expected cube6, ring8 or cube6+ring8)"
            ))),
        }
    }
}

impl Layout {
    pub fn name(self) -> &'static str {
        match self {
            Layout::Cube6 => "cube6",
            Layout::Ring8 => "ring8",
            Layout::Cube6Ring8 => "cube6+ring8",
        }
    }

    /// Named camera-to-scene rotations, cube faces first.
    pub fn directions(self) -> Vec<(String, Mat3)> {
        let cube = CubeFace::ALL.map(|f| (f.name().to_owned(), f.rotation()));
        // yaw turns the front view toward the right face
        let ring = (0..8).map(|k| {
            let yaw = (k * 45) as f64;
            let r = Mat3::rotation_y(yaw.to_radians()) * CubeFace::Front.rotation();
            (format!("yaw{:03}", k * 45), r)
        });
        match self {
            Layout::Cube6 => cube.to_vec(),
            Layout::Ring8 => ring.collect(),
            Layout::Cube6Ring8 => cube.into_iter().chain(ring).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveCamera {
    pub name: String,
    pub size: usize,
    pub fov: f64,
    /// Camera-to-scene rotation; columns are the right, down and forward axes.
    pub rotation: Mat3,
    pub center: CameraPose,
}

impl PerspectiveCamera {
    pub fn new(name: impl Into<String>, size: usize, fov: f64, rotation: Mat3, center: CameraPose) -> Result<Self> {
        check_view(size, fov)?;
        let ortho = rotation.orthonormality_error();
        if ortho > 1e-9 || (rotation.det() - 1.0).abs() > 1e-9 {
            return Err(Error::ContractViolation(format!(
                "camera rotation is not a proper rotation (orthonormality error {ortho:e}, det {})",
                rotation.det()
            )));
        }
        Ok(PerspectiveCamera {
            name: name.into(),
            size,
            fov,
            rotation,
            center,
        })
    }

    pub fn focal(&self) -> f64 {
        focal_from_fov(self.size, self.fov)
    }

    pub fn principal_point(&self) -> (f64, f64) {
        let c = self.size as f64 / 2.0;
        (c, c)
    }

    /// Continuous image coordinates of a scene point (pixel centers at `j + 0.5`), if it
    /// lies in front of the camera and inside the image.
    pub fn project(&self, p: Vec3) -> Option<[f64; 2]> {
        let cam = self.rotation.transpose() * (p - self.center.as_vec());
        if cam.z <= 0.0 {
            return None;
        }
        let f = self.focal();
        let (cx, cy) = self.principal_point();
        let u = f * cam.x / cam.z + cx;
        let v = f * cam.y / cam.z + cy;
        let r = self.size as f64;
        (u >= 0.0 && u < r && v >= 0.0 && v < r).then_some([u, v])
    }
}

fn check_view(size: usize, fov: f64) -> Result<()> {
    if size == 0 {
        return Err(Error::ContractViolation("view size must be positive".into()));
    }
    if !(fov > 0.0 && fov <= 120.0) {
        return Err(Error::ContractViolation(format!("fov {fov} outside (0, 120] degrees")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedView {
    pub camera: PerspectiveCamera,
    pub image: RgbImage,
}

pub fn extract_views(
    pano: &EquirectImage,
    pose: CameraPose,
    layout: Layout,
    fov: f64,
    size: usize,
) -> Result<Vec<ExtractedView>> {
    check_view(size, fov)?;
    let focal = focal_from_fov(size, fov);
    layout
        .directions()
        .into_par_iter()
        .map(|(name, rotation)| {
            let camera = PerspectiveCamera::new(name, size, fov, rotation, pose)?;
            let image = render(pano, &camera.rotation, focal, size);
            Ok(ExtractedView { camera, image })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredPoint {
    pub position: Vec3,
    pub color: [u8; 3],
}

/// Lifts every `stride`-th pixel in both directions, starting at (0, 0).
pub fn lift_point_cloud(
    pano: &EquirectImage,
    depth: &DepthMap,
    pose: CameraPose,
    stride: usize,
) -> Result<Vec<ColoredPoint>> {
    if stride == 0 {
        return Err(Error::ContractViolation("stride must be positive".into()));
    }
    let (w, h) = pano.dims();
    check_dims("depth", depth.dims(), (w, h))?;
    depth.validate_positive()?;
    let origin = pose.as_vec();
    let mut points = Vec::with_capacity(w.div_ceil(stride) * h.div_ceil(stride));
    for y in (0..h).step_by(stride) {
        for x in (0..w).step_by(stride) {
            let s = pixel_to_spherical(x, y, w, h)?;
            let p = lift_to_3d(s, depth.get(x, y) as f64)?;
            points.push(ColoredPoint {
                position: p + origin,
                color: pano.pixel(x, y),
            });
        }
    }
    Ok(points)
}

/// Views and lifted points of one panorama. Points are only matched against the views of
/// the panorama they were lifted from.
#[derive(Debug, Clone)]
pub struct PanoramaViews {
    pub prefix: String,
    pub views: Vec<ExtractedView>,
    pub cloud: Vec<ColoredPoint>,
}

/// [`PanoramaViews`] without the rendered images.
#[derive(Debug, Clone)]
pub struct PanoramaCameras {
    pub prefix: String,
    pub cameras: Vec<PerspectiveCamera>,
    pub cloud: Vec<ColoredPoint>,
}

impl PanoramaViews {
    pub fn cameras(&self) -> PanoramaCameras {
        PanoramaCameras {
            prefix: self.prefix.clone(),
            cameras: self.views.iter().map(|v| v.camera.clone()).collect(),
            cloud: self.cloud.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExportOptions {
    pub convention: PoseConvention,
    /// Without points the model only carries cameras and poses.
    pub points: bool,
}

impl Default for ExportOptions {
    fn default() -> Self {
        ExportOptions {
            convention: PoseConvention::WorldToCamera,
            points: true,
        }
    }
}

/// Scene-to-export change of basis: the first front-facing camera's axes.
pub fn export_basis(panos: &[PanoramaCameras]) -> Mat3 {
    let front = panos
        .iter()
        .flat_map(|p| &p.cameras)
        .find(|c| c.name == CubeFace::Front.name())
        .map(|c| c.rotation)
        .unwrap_or_else(|| CubeFace::Front.rotation());
    front.transpose()
}

pub fn image_name(prefix: &str, view: &str) -> String {
    format!("{prefix}_{view}.png")
}

/// Builds the model in memory; [`export_sparse_model`] also writes it with the images.
pub fn build_sparse_model(panos: &[PanoramaCameras], opts: &ExportOptions) -> Result<SparseModel> {
    if panos.iter().all(|p| p.cameras.is_empty()) {
        return Err(Error::ContractViolation("sparse-model export needs at least one view".into()));
    }
    let basis = export_basis(panos);
    let mut model = SparseModel::default();
    let mut camera_ids: HashMap<(usize, u64), u32> = HashMap::new();

    for pano in panos {
        let first_image = model.images.len();
        for cam in &pano.cameras {
            let next_id = camera_ids.len() as u32 + 1;
            let camera_id = *camera_ids.entry((cam.size, cam.focal().to_bits())).or_insert_with(|| {
                let f = cam.focal();
                let (cx, cy) = cam.principal_point();
                model.cameras.push(colmap::Camera {
                    id: next_id,
                    model: "PINHOLE".into(),
                    width: cam.size,
                    height: cam.size,
                    params: vec![f, f, cx, cy],
                });
                next_id
            });
            let c2w = basis * cam.rotation;
            let center = basis * cam.center.as_vec();
            let (rot, t) = match opts.convention {
                PoseConvention::WorldToCamera => {
                    let w2c = c2w.transpose();
                    (w2c, -(w2c * center))
                }
                PoseConvention::CameraToWorld => (c2w, center),
            };
            model.images.push(colmap::ImageEntry {
                id: model.images.len() as u32 + 1,
                qvec: Quat::from_rotation(&rot).to_array(),
                tvec: t.to_array(),
                camera_id,
                name: image_name(&pano.prefix, &cam.name),
                points2d: Vec::new(),
            });
        }
        if !opts.points {
            continue;
        }

        let projections: Vec<Vec<(usize, [f64; 2])>> = pano
            .cloud
            .par_iter()
            .map(|p| {
                pano.cameras
                    .iter()
                    .enumerate()
                    .filter_map(|(i, c)| c.project(p.position).map(|uv| (i, uv)))
                    .collect()
            })
            .collect();
        for (p, obs) in pano.cloud.iter().zip(projections) {
            if obs.is_empty() {
                continue;
            }
            let id = model.points.len() as u64 + 1;
            let mut track = Vec::with_capacity(obs.len());
            for (i, uv) in obs {
                let img = &mut model.images[first_image + i];
                track.push((img.id, img.points2d.len() as u32));
                img.points2d.push(colmap::Observation2D {
                    xy: uv,
                    point3d_id: id as i64,
                });
            }
            model.points.push(colmap::Point3D {
                id,
                xyz: (basis * p.position).to_array(),
                rgb: p.color,
                error: 0.0,
                track,
            });
        }
    }
    Ok(model)
}

/// Writes view images as panoramas are added and the model files at the end, so only
/// cameras and points stay in memory.
///
/// Layout: `images/<prefix>_<view>.png`, `cameras.txt`, `images.txt`, `points3D.txt`.
pub struct SparseExporter {
    out_dir: std::path::PathBuf,
    opts: ExportOptions,
    panos: Vec<PanoramaCameras>,
}

impl SparseExporter {
    pub fn new(out_dir: &Path, opts: ExportOptions) -> Result<Self> {
        io::create_dir_all(&out_dir.join("images"))?;
        Ok(SparseExporter {
            out_dir: out_dir.to_owned(),
            opts,
            panos: Vec::new(),
        })
    }

    pub fn add(&mut self, pano: PanoramaViews) -> Result<()> {
        let images_dir = self.out_dir.join("images");
        pano.views
            .par_iter()
            .map(|v| io::write_rgb(&v.image, &images_dir.join(image_name(&pano.prefix, &v.camera.name))))
            .collect::<Result<()>>()?;
        let PanoramaViews { prefix, views, cloud } = pano;
        self.panos.push(PanoramaCameras {
            prefix,
            cameras: views.into_iter().map(|v| v.camera).collect(),
            cloud,
        });
        Ok(())
    }

    pub fn finish(self) -> Result<SparseModel> {
        let model = build_sparse_model(&self.panos, &self.opts)?;
        colmap::write_text(&model, &self.out_dir)?;
        Ok(model)
    }
}

pub fn export_sparse_model(panos: Vec<PanoramaViews>, out_dir: &Path, opts: &ExportOptions) -> Result<SparseModel> {
    if panos.iter().all(|p| p.views.is_empty()) {
        return Err(Error::ContractViolation("sparse-model export needs at least one view".into()));
    }
    let mut exporter = SparseExporter::new(out_dir, *opts)?;
    for p in panos {
        exporter.add(p)?;
    }
    exporter.finish()
}
