//! Sparse reconstruction model in the COLMAP text layout
//! (`cameras.txt`, `images.txt`, `points3D.txt`).
//!
//! Floats are written with 17 significant digits so a write/read cycle is lossless.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{Mat3, Quat, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    pub id: u32,
    pub model: String,
    pub width: usize,
    pub height: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation2D {
    pub xy: [f64; 2],
    /// −1 when the keypoint has no 3D point.
    pub point3d_id: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageEntry {
    pub id: u32,
    /// (w, x, y, z)
    pub qvec: [f64; 4],
    pub tvec: [f64; 3],
    pub camera_id: u32,
    pub name: String,
    pub points2d: Vec<Observation2D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoseConvention {
    /// `x_cam = R·x_world + t`, as structure-from-motion tools expect.
    #[default]
    WorldToCamera,
    /// Quaternion is the camera-to-world rotation and the translation is the camera center.
    CameraToWorld,
}

impl std::str::FromStr for PoseConvention {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "world-to-camera" | "w2c" => Ok(PoseConvention::WorldToCamera),
            "camera-to-world" | "c2w" => Ok(PoseConvention::CameraToWorld),
            other => Err(Error::ContractViolation(format!(
                "unknown pose convention {other:?} (expected world-to-camera or camera-to-world)"
            ))),
        }
    }
}

impl ImageEntry {
    /// World-to-camera rotation and translation, whatever convention the entry was written in.
    pub fn world_to_camera(&self, convention: PoseConvention) -> (Mat3, Vec3) {
        let [w, x, y, z] = self.qvec;
        let r = Quat { w, x, y, z }.to_rotation();
        let t = Vec3::from(self.tvec);
        match convention {
            PoseConvention::WorldToCamera => (r, t),
            PoseConvention::CameraToWorld => {
                let rt = r.transpose();
                (rt, -(rt * t))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point3D {
    pub id: u64,
    pub xyz: [f64; 3],
    pub rgb: [u8; 3],
    pub error: f64,
    /// (image id, index into that image's `points2d`)
    pub track: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseModel {
    pub cameras: Vec<Camera>,
    pub images: Vec<ImageEntry>,
    pub points: Vec<Point3D>,
}

impl SparseModel {
    /// Checks cross references: image → camera, track → image keypoint.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ContractViolation(m));
        for img in &self.images {
            if !self.cameras.iter().any(|c| c.id == img.camera_id) {
                return bad(format!("image {} references missing camera {}", img.id, img.camera_id));
            }
        }
        for p in &self.points {
            if p.track.is_empty() {
                return bad(format!("point {} has no observation", p.id));
            }
            for (image_id, idx) in &p.track {
                let Some(img) = self.images.iter().find(|i| i.id == *image_id) else {
                    return bad(format!("point {} observed by missing image {image_id}", p.id));
                };
                if *idx as usize >= img.points2d.len() {
                    return bad(format!("point {} track index {idx} out of range", p.id));
                }
            }
        }
        Ok(())
    }
}

fn num(out: &mut String, v: f64) {
    let _ = write!(out, " {v:.16e}");
}

pub fn write_text(model: &SparseModel, dir: &Path) -> Result<()> {
    model.validate()?;
    let mut cams = String::from(
        "# Camera list with one line of data per camera:\n\
         #   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n",
    );
    let _ = writeln!(cams, "# Number of cameras: {}", model.cameras.len());
    for c in &model.cameras {
        let _ = write!(cams, "{} {} {} {}", c.id, c.model, c.width, c.height);
        for p in &c.params {
            num(&mut cams, *p);
        }
        cams.push('\n');
    }

    let mut imgs = String::from(
        "# Image list with two lines of data per image:\n\
         #   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n\
         #   POINTS2D[] as (X, Y, POINT3D_ID)\n",
    );
    let _ = writeln!(imgs, "# Number of images: {}", model.images.len());
    for img in &model.images {
        let _ = write!(imgs, "{}", img.id);
        for v in img.qvec.iter().chain(&img.tvec) {
            num(&mut imgs, *v);
        }
        let _ = writeln!(imgs, " {} {}", img.camera_id, img.name);
        let mut first = true;
        for o in &img.points2d {
            if !first {
                imgs.push(' ');
            }
            first = false;
            let _ = write!(imgs, "{:.16e} {:.16e} {}", o.xy[0], o.xy[1], o.point3d_id);
        }
        imgs.push('\n');
    }

    let mut pts = String::from(
        "# 3D point list with one line of data per point:\n\
         #   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)\n",
    );
    let _ = writeln!(pts, "# Number of points: {}", model.points.len());
    for p in &model.points {
        let _ = write!(pts, "{}", p.id);
        for v in p.xyz {
            num(&mut pts, v);
        }
        let _ = write!(pts, " {} {} {}", p.rgb[0], p.rgb[1], p.rgb[2]);
        num(&mut pts, p.error);
        for (image_id, idx) in &p.track {
            let _ = write!(pts, " {image_id} {idx}");
        }
        pts.push('\n');
    }

    for (name, text) in [("cameras.txt", cams), ("images.txt", imgs), ("points3D.txt", pts)] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

struct Tokens<'a> {
    path: &'a Path,
    line: usize,
    it: std::str::SplitWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    fn next<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let tok = self
            .it
            .next()
            .ok_or_else(|| Error::format(self.path, format!("line {}: missing {what}", self.line)))?;
        tok.parse()
            .map_err(|_| Error::format(self.path, format!("line {}: bad {what} {tok:?}", self.line)))
    }

    fn rest(&mut self) -> Vec<&'a str> {
        self.it.by_ref().collect()
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-comment lines with their 1-based line numbers; blank lines are kept.
fn data_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#'))
        .map(|(i, l)| (i + 1, l))
        .collect()
}

pub fn read_text(dir: &Path) -> Result<SparseModel> {
    let mut model = SparseModel::default();

    let path = dir.join("cameras.txt");
    let text = read(&path)?;
    for (line, l) in data_lines(&text) {
        if l.trim().is_empty() {
            continue;
        }
        let mut t = Tokens {
            path: &path,
            line,
            it: l.split_whitespace(),
        };
        let id = t.next("camera id")?;
        let model_name = t.next("camera model")?;
        let width = t.next("width")?;
        let height = t.next("height")?;
        let params = t
            .rest()
            .into_iter()
            .map(|p| p.parse().map_err(|_| Error::format(&path, format!("line {line}: bad parameter {p:?}"))))
            .collect::<Result<_>>()?;
        model.cameras.push(Camera {
            id,
            model: model_name,
            width,
            height,
            params,
        });
    }

    let path = dir.join("images.txt");
    let text = read(&path)?;
    let lines = data_lines(&text);
    let mut i = 0;
    while i < lines.len() {
        let (line, l) = lines[i];
        if l.trim().is_empty() {
            i += 1;
            continue;
        }
        let mut t = Tokens {
            path: &path,
            line,
            it: l.split_whitespace(),
        };
        let id = t.next("image id")?;
        let mut qvec = [0.0; 4];
        for q in &mut qvec {
            *q = t.next("quaternion")?;
        }
        let mut tvec = [0.0; 3];
        for v in &mut tvec {
            *v = t.next("translation")?;
        }
        let camera_id = t.next("camera id")?;
        let name: String = t.next("image name")?;
        let (pline, pl) = lines.get(i + 1).copied().unwrap_or((line + 1, ""));
        let toks: Vec<&str> = pl.split_whitespace().collect();
        if toks.len() % 3 != 0 {
            return Err(Error::format(&path, format!("line {pline}: keypoints must come in triples")));
        }
        let mut points2d = Vec::with_capacity(toks.len() / 3);
        for c in toks.chunks_exact(3) {
            let bad = || Error::format(&path, format!("line {pline}: bad keypoint {c:?}"));
            points2d.push(Observation2D {
                xy: [c[0].parse().map_err(|_| bad())?, c[1].parse().map_err(|_| bad())?],
                point3d_id: c[2].parse().map_err(|_| bad())?,
            });
        }
        model.images.push(ImageEntry {
            id,
            qvec,
            tvec,
            camera_id,
            name,
            points2d,
        });
        i += 2;
    }

    let path = dir.join("points3D.txt");
    let text = read(&path)?;
    for (line, l) in data_lines(&text) {
        if l.trim().is_empty() {
            continue;
        }
        let mut t = Tokens {
            path: &path,
            line,
            it: l.split_whitespace(),
        };
        let id = t.next("point id")?;
        let xyz = [t.next("x")?, t.next("y")?, t.next("z")?];
        let rgb = [t.next("red")?, t.next("green")?, t.next("blue")?];
        let error = t.next("error")?;
        let rest = t.rest();
        if rest.len() % 2 != 0 {
            return Err(Error::format(&path, format!("line {line}: track must come in pairs")));
        }
        let track = rest
            .chunks_exact(2)
            .map(|c| {
                let bad = || Error::format(&path, format!("line {line}: bad track entry {c:?}"));
                Ok((c[0].parse().map_err(|_| bad())?, c[1].parse().map_err(|_| bad())?))
            })
            .collect::<Result<_>>()?;
        model.points.push(Point3D {
            id,
            xyz,
            rgb,
            error,
            track,
        });
    }
    Ok(model)
}
