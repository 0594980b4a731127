//! Command-line frontend for the panowarp engine.

pub mod commands;
pub mod manifest;
pub mod pipeline;

use std::path::Path;

use panowarp_core::io::{self, DepthFormat};
use panowarp_core::pnvi::PnviState;
use panowarp_core::{CameraPose, Error, Result};

pub use commands::{run, Cli};

/// Missing inputs are validation errors, reported before anything is written.
pub fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::ContractViolation(format!("{} does not exist", path.display())));
    }
    Ok(())
}

/// Reads a panorama and its depth, optionally flipping both vertically.
pub fn load_panorama(image: &Path, depth: &Path, format: DepthFormat, flip_v: bool, pose: CameraPose) -> Result<PnviState> {
    require_file(image)?;
    require_file(depth)?;
    let mut img = io::read_equirect(image)?;
    let mut d = io::read_depth(depth, format)?;
    if flip_v {
        img = img.flip_vertical();
        d = d.flip_vertical();
    }
    PnviState::new(pose, img, d)
}

/// Writes `<stem>.png` and the depth next to it; returns both file names.
pub fn save_panorama(state: &PnviState, dir: &Path, stem: &str, format: DepthFormat, flip_v: bool) -> Result<(String, String)> {
    let image = format!("{stem}.png");
    let depth = format.file_name(stem);
    if flip_v {
        io::write_equirect(&state.image.flip_vertical(), &dir.join(&image))?;
        io::write_depth(&state.depth.flip_vertical(), &dir.join(&depth), format)?;
    } else {
        io::write_equirect(&state.image, &dir.join(&image))?;
        io::write_depth(&state.depth, &dir.join(&depth), format)?;
    }
    Ok((image, depth))
}
