//! File formats: 8-bit RGB PNG, binary mask PNG (0/255), PFM depth, 16-bit millimeter PNG depth.
//!
//! Every PNG is written with the same pinned encoder settings so repeated runs are byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::codecs::png::{CompressionType, FilterType, PngEncoder};
use image::{DynamicImage, GrayImage, ImageBuffer, Luma, RgbImage};

use crate::error::{Error, Result};
use crate::raster::{DepthMap, EquirectImage, HoleMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DepthFormat {
    /// Little-endian 32-bit float PFM, meters.
    #[default]
    Pfm,
    /// 16-bit grayscale PNG, millimeters; 0 = invalid.
    Png16Mm,
}

impl std::str::FromStr for DepthFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pfm" => Ok(DepthFormat::Pfm),
            "png16mm" => Ok(DepthFormat::Png16Mm),
            other => Err(Error::ContractViolation(format!(
                "unknown depth format {other:?} (expected pfm or png16mm)"
            ))),
        }
    }
}

impl DepthFormat {
    pub fn name(self) -> &'static str {
        match self {
            DepthFormat::Pfm => "pfm",
            DepthFormat::Png16Mm => "png16mm",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            DepthFormat::Pfm => "pfm",
            DepthFormat::Png16Mm => "png",
        }
    }

    /// `<stem>.pfm`, or `<stem>.depth.png` so it never collides with the color image.
    pub fn file_name(self, stem: &str) -> String {
        match self {
            DepthFormat::Pfm => format!("{stem}.pfm"),
            DepthFormat::Png16Mm => format!("{stem}.depth.png"),
        }
    }
}

fn encode_png(img: DynamicImage, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let encoder =
        PngEncoder::new_with_quality(&mut writer, CompressionType::Fast, FilterType::Adaptive);
    img.write_with_encoder(encoder).map_err(|source| Error::Image {
        path: path.into(),
        source,
    })?;
    writer.flush().map_err(|e| Error::io(path, e))
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let image_err = |source| Error::Image {
        path: path.into(),
        source,
    };
    image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(image_err)
}

pub fn read_rgb(path: &Path) -> Result<RgbImage> {
    Ok(decode(path)?.to_rgb8())
}

pub fn write_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    encode_png(DynamicImage::ImageRgb8(img.clone()), path)
}

pub fn read_equirect(path: &Path) -> Result<EquirectImage> {
    EquirectImage::new(read_rgb(path)?)
}

pub fn write_equirect(img: &EquirectImage, path: &Path) -> Result<()> {
    write_rgb(img.as_rgb(), path)
}

/// Grayscale PNG; any value >= 128 reads as a hole.
pub fn read_mask(path: &Path) -> Result<HoleMask> {
    let gray = decode(path)?.to_luma8();
    let (w, h) = gray.dimensions();
    let data = gray.into_raw().into_iter().map(|v| (v >= 128) as u8).collect();
    HoleMask::new(w as usize, h as usize, data)
}

/// Writes holes as 255 and observed pixels as 0.
pub fn write_mask(mask: &HoleMask, path: &Path) -> Result<()> {
    let data = mask.data().iter().map(|v| v * 255).collect();
    let gray = GrayImage::from_raw(mask.width() as u32, mask.height() as u32, data)
        .expect("mask buffer sized by construction");
    encode_png(DynamicImage::ImageLuma8(gray), path)
}

pub fn read_depth(path: &Path, format: DepthFormat) -> Result<DepthMap> {
    match format {
        DepthFormat::Pfm => read_pfm(path),
        DepthFormat::Png16Mm => read_png16mm(path),
    }
}

pub fn write_depth(depth: &DepthMap, path: &Path, format: DepthFormat) -> Result<()> {
    match format {
        DepthFormat::Pfm => write_pfm(depth, path),
        DepthFormat::Png16Mm => write_png16mm(depth, path),
    }
}

/// Single-channel PFM. Scanlines are stored bottom-to-top as the format requires.
pub fn write_pfm(depth: &DepthMap, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut bytes = format!("Pf\n{} {}\n-1.0\n", depth.width(), depth.height()).into_bytes();
    bytes.reserve(depth.data().len() * 4);
    for row in depth.data().chunks_exact(depth.width()).rev() {
        for v in row {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&bytes)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    parse_pfm(&bytes).map_err(|m| Error::format(path, m))
}

fn parse_pfm(bytes: &[u8]) -> std::result::Result<DepthMap, String> {
    // header: three whitespace-separated tokens, then exactly one whitespace byte
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if tokens[0] != "Pf" {
        return Err(format!("expected single-channel 'Pf' magic, found {:?}", tokens[0]));
    }
    let parse_dim = |t: &str| t.parse::<usize>().map_err(|_| format!("bad dimension {t:?}"));
    let (w, h) = (parse_dim(&tokens[1])?, parse_dim(&tokens[2])?);
    let scale: f64 = tokens[3]
        .parse()
        .map_err(|_| format!("bad scale {:?}", tokens[3]))?;
    if scale == 0.0 {
        return Err("scale must be non-zero".into());
    }
    let little = scale < 0.0;
    let need = w * h * 4;
    let payload = bytes.get(pos..pos + need).ok_or("truncated pixel data")?;
    let mut data = vec![0f32; w * h];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (row, col) = (i / w, i % w);
        data[(h - 1 - row) * w + col] = v;
    }
    DepthMap::new(w, h, data).map_err(|e| e.to_string())
}

pub fn read_png16mm(path: &Path) -> Result<DepthMap> {
    let gray = decode(path)?.to_luma16();
    let (w, h) = gray.dimensions();
    let data = gray
        .into_raw()
        .into_iter()
        .map(|mm| mm as f32 / 1000.0)
        .collect();
    DepthMap::new(w as usize, h as usize, data)
}

/// Depths are rounded to whole millimeters and saturate at 65.535 m.
pub fn write_png16mm(depth: &DepthMap, path: &Path) -> Result<()> {
    let data: Vec<u16> = depth
        .data()
        .iter()
        .map(|d| (d * 1000.0).round().clamp(0.0, u16::MAX as f32) as u16)
        .collect();
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width() as u32, depth.height() as u32, data)
            .expect("depth buffer sized by construction");
    encode_png(DynamicImage::ImageLuma16(buf), path)
}

pub fn create_dir_all(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}
