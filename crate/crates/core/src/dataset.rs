//! Inpainting training data: pose-conditioned warp masks per panorama, exported as cubemap
//! faces next to the RGB faces, with a JSON-lines manifest (one record per file).
//!
//! Layout under the output directory:
//! `rgb/<pano>/<face>.png` and `mask/<pano>/d<direction>_u<unit>/<face>.png`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubemap::{e2c, CubeFace, MaskResampler, DEFAULT_FACE_SIZE};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::io;
use crate::raster::{check_dims, DepthMap, EquirectImage, HoleMask};
use crate::sphere::CameraPose;
use crate::warp::cvs_warp;

pub const DEFAULT_UNITS: [f64; 2] = [0.02, 0.04];
pub const MANIFEST_NAME: &str = "manifest.jsonl";

/// ±X, ±Z and the four horizontal diagonals.
pub fn default_directions() -> Vec<Vec3> {
    let d = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(-1.0, 0.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.0, 0.0, -1.0),
        Vec3::new(d, 0.0, d),
        Vec3::new(d, 0.0, -d),
        Vec3::new(-d, 0.0, d),
        Vec3::new(-d, 0.0, -d),
    ]
}

/// `default8`, or `;`-separated `x,y,z` triples (normalized here).
pub fn parse_directions(s: &str) -> Result<Vec<Vec3>> {
    if s.trim() == "default8" {
        return Ok(default_directions());
    }
    s.split(';')
        .map(|t| {
            let v: CameraPose = t.parse()?;
            let v = v.as_vec();
            if v.norm() == 0.0 {
                return Err(Error::ContractViolation(format!("direction {t:?} is the zero vector")));
            }
            Ok(v.normalized())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedMask {
    pub direction_index: usize,
    pub direction: Vec3,
    pub unit: f64,
    pub pose: CameraPose,
    pub mask: HoleMask,
}

fn check_params(units: &[f64], directions: &[Vec3]) -> Result<()> {
    if units.is_empty() || directions.is_empty() {
        return Err(Error::ContractViolation("need at least one unit and one direction".into()));
    }
    if let Some(u) = units.iter().find(|u| !(u.is_finite() && **u >= 0.0)) {
        return Err(Error::ContractViolation(format!("movement unit {u} must be finite and non-negative")));
    }
    if let Some(d) = directions.iter().find(|d| (d.norm() - 1.0).abs() > 1e-6) {
        return Err(Error::ContractViolation(format!("direction {:?} is not unit length", d.to_array())));
    }
    Ok(())
}

/// One mask per (direction, unit), directions outermost.
pub fn gen_masks(depth: &DepthMap, units: &[f64], directions: &[Vec3]) -> Result<Vec<GeneratedMask>> {
    check_params(units, directions)?;
    depth.validate_positive()?;
    let (w, h) = depth.dims();
    // the mask does not depend on color
    let blank = EquirectImage::filled(w, h, [0, 0, 0])?;
    let mut out = Vec::with_capacity(units.len() * directions.len());
    for (direction_index, dir) in directions.iter().enumerate() {
        for &unit in units {
            let pose = CameraPose::from_vec(dir.scale(unit));
            let mask = cvs_warp(&blank, depth, pose)?.mask;
            out.push(GeneratedMask {
                direction_index,
                direction: *dir,
                unit,
                pose,
                mask,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub units: Vec<f64>,
    pub directions: Vec<Vec3>,
    pub face_size: usize,
    /// 0 uses the global thread pool.
    pub workers: usize,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            units: DEFAULT_UNITS.to_vec(),
            directions: default_directions(),
            face_size: DEFAULT_FACE_SIZE,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Rgb {
        file: String,
        pano: usize,
        face: String,
    },
    Mask {
        file: String,
        pano: usize,
        direction_index: usize,
        direction: [f64; 3],
        unit: f64,
        face: String,
        hole_ratio: f64,
    },
}

impl Record {
    pub fn file(&self) -> &str {
        match self {
            Record::Rgb { file, .. } | Record::Mask { file, .. } => file,
        }
    }
}

pub fn pano_id(index: usize) -> String {
    format!("p{index:06}")
}

fn mask_dir(direction_index: usize, unit: f64) -> String {
    format!("d{direction_index}_u{unit:.3}")
}

/// Exports a list of in-memory panoramas. See [`export_dataset_with`].
pub fn export_dataset(panos: &[(EquirectImage, DepthMap)], out_dir: &Path, opts: &DatasetOptions) -> Result<Vec<Record>> {
    if panos.is_empty() {
        return Err(Error::ContractViolation("dataset export needs at least one panorama".into()));
    }
    for (img, depth) in panos {
        check_dims("depth", depth.dims(), img.dims())?;
        depth.validate_positive()?;
    }
    export_dataset_with(panos.len(), |i| Ok(panos[i].clone()), out_dir, opts)
}

/// Exports `count` panoramas produced on demand by `load`, in parallel, and writes the
/// manifest once every panorama is done. Records are ordered by panorama index.
pub fn export_dataset_with<L>(count: usize, load: L, out_dir: &Path, opts: &DatasetOptions) -> Result<Vec<Record>>
where
    L: Fn(usize) -> Result<(EquirectImage, DepthMap)> + Sync,
{
    if count == 0 {
        return Err(Error::ContractViolation("dataset export needs at least one panorama".into()));
    }
    check_params(&opts.units, &opts.directions)?;
    if opts.face_size == 0 {
        return Err(Error::ContractViolation("face size must be positive".into()));
    }
    io::create_dir_all(out_dir)?;

    // panoramas usually share one size, so the mask tables are built once per size
    let resamplers: Mutex<HashMap<(usize, usize), Arc<MaskResampler>>> = Mutex::default();
    let resampler = |dims: (usize, usize)| -> Result<Arc<MaskResampler>> {
        if let Some(r) = resamplers.lock().expect("not poisoned").get(&dims) {
            return Ok(r.clone());
        }
        let r = Arc::new(MaskResampler::new(dims.0, dims.1, opts.face_size)?);
        resamplers.lock().expect("not poisoned").insert(dims, r.clone());
        Ok(r)
    };
    let job = || -> Result<Vec<Vec<Record>>> {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let (img, depth) = load(i)?;
                export_one(i, &img, &depth, &*resampler(img.dims())?, out_dir, opts)
            })
            .collect()
    };
    let per_pano = if opts.workers == 0 {
        job()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::ContractViolation(format!("worker pool: {e}")))?
            .install(job)?
    };

    let records: Vec<Record> = per_pano.into_iter().flatten().collect();
    write_manifest(&records, &out_dir.join(MANIFEST_NAME))?;
    Ok(records)
}

fn write_png(out_dir: &Path, rel: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let path = out_dir.join(rel);
    if let Some(parent) = path.parent() {
        io::create_dir_all(parent)?;
    }
    write(&path)
}

fn export_one(
    index: usize,
    img: &EquirectImage,
    depth: &DepthMap,
    resampler: &MaskResampler,
    out_dir: &Path,
    opts: &DatasetOptions,
) -> Result<Vec<Record>> {
    check_dims("depth", depth.dims(), img.dims())?;
    let id = pano_id(index);
    let masks = gen_masks(depth, &opts.units, &opts.directions)?;
    let mut records = Vec::with_capacity(6 * (1 + masks.len()));

    let faces = e2c(img, opts.face_size)?;
    for (face, rgb) in faces.iter() {
        let file = format!("rgb/{id}/{}.png", face.name());
        write_png(out_dir, &file, |p| io::write_rgb(rgb, p))?;
        records.push(Record::Rgb {
            file,
            pano: index,
            face: face.name().into(),
        });
    }
    for m in &masks {
        let cube = resampler.e2c(&m.mask)?;
        for (face, mask) in cube.iter() {
            let file = format!("mask/{id}/{}/{}.png", mask_dir(m.direction_index, m.unit), face.name());
            write_png(out_dir, &file, |p| io::write_mask(mask, p))?;
            records.push(Record::Mask {
                file,
                pano: index,
                direction_index: m.direction_index,
                direction: m.direction.to_array(),
                unit: m.unit,
                face: face.name().into(),
                hole_ratio: crate::warp::hole_ratio(mask),
            });
        }
    }
    Ok(records)
}

pub fn write_manifest(records: &[Record], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<Record>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

/// All regular files below `dir`, relative and `/`-separated, sorted.
pub fn list_files(dir: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path: PathBuf = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("below root");
                out.push(rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort();
    Ok(out)
}

/// Number of face files a panorama contributes: six RGB faces plus six per mask.
pub fn faces_per_panorama(opts: &DatasetOptions) -> (usize, usize) {
    let faces = CubeFace::ALL.len();
    (faces, faces * opts.units.len() * opts.directions.len())
}
