//! Out-of-process inpainting through a file contract:
//! `<cmd> --image <in.png> --mask <mask.png> --out <out.png>`.
//!
//! The mask is written as 0 (keep) / 255 (fill). The command must write an RGB PNG of the
//! same size to `--out` and exit 0. The same mechanism drives optional depth re-estimation
//! with `<cmd> --image <in.png> --out <out.pfm>`.

use std::fs::File;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use image::RgbImage;

use crate::error::{Error, Result};
use crate::io;
use crate::raster::{DepthMap, EquirectImage, HoleMask};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);
pub const DEFAULT_MAX_CONCURRENT: usize = 2;

/// Counting semaphore capping concurrently running backend processes.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct ExternalCommand {
    program: String,
    args: Vec<String>,
    timeout: Duration,
    slots: Arc<Slots>,
}

impl PartialEq for ExternalCommand {
    fn eq(&self, other: &Self) -> bool {
        self.program == other.program && self.args == other.args && self.timeout == other.timeout
    }
}

impl ExternalCommand {
    /// `command` is split on whitespace into a program and leading arguments.
    pub fn new(command: &str) -> Result<Self> {
        let mut words = command.split_whitespace().map(str::to_owned);
        let program = words
            .next()
            .ok_or_else(|| Error::ContractViolation("external backend needs a command".into()))?;
        Ok(ExternalCommand {
            program,
            args: words.collect(),
            timeout: DEFAULT_TIMEOUT,
            slots: Arc::new(Slots {
                free: Mutex::new(DEFAULT_MAX_CONCURRENT),
                cv: Condvar::new(),
            }),
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_max_concurrent(mut self, n: usize) -> Self {
        self.slots = Arc::new(Slots {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        });
        self
    }

    pub fn program(&self) -> &str {
        &self.program
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub(crate) fn run(&self, image: &RgbImage, mask: &HoleMask) -> Result<RgbImage> {
        let _slot = self.slots.acquire();
        let dir = tempdir()?;
        let image_path = dir.path().join("image.png");
        let mask_path = dir.path().join("mask.png");
        let out_path = dir.path().join("out.png");
        io::write_rgb(image, &image_path)?;
        io::write_mask(mask, &mask_path)?;
        let diagnostics = self.execute(
            dir.path(),
            &[("--image", &image_path), ("--mask", &mask_path), ("--out", &out_path)],
        )?;
        let out = io::read_rgb(&out_path).map_err(|e| Error::BackendFailure {
            message: format!("{:?} produced no readable output image: {e}", self.program),
            diagnostics: diagnostics.clone(),
        })?;
        if out.dimensions() != image.dimensions() {
            return Err(Error::BackendFailure {
                message: format!(
                    "{:?} returned a {}x{} image for a {}x{} request",
                    self.program,
                    out.width(),
                    out.height(),
                    image.width(),
                    image.height()
                ),
                diagnostics,
            });
        }
        Ok(out)
    }

    /// Depth contract: `<cmd> --image <in.png> --out <out.pfm>`.
    pub fn estimate_depth(&self, image: &EquirectImage) -> Result<DepthMap> {
        let _slot = self.slots.acquire();
        let dir = tempdir()?;
        let image_path = dir.path().join("image.png");
        let out_path = dir.path().join("depth.pfm");
        io::write_equirect(image, &image_path)?;
        let diagnostics = self.execute(dir.path(), &[("--image", &image_path), ("--out", &out_path)])?;
        let depth = io::read_pfm(&out_path).map_err(|e| Error::BackendFailure {
            message: format!("{:?} produced no readable depth map: {e}", self.program),
            diagnostics: diagnostics.clone(),
        })?;
        if depth.dims() != image.dims() {
            return Err(Error::BackendFailure {
                message: format!(
                    "{:?} returned a {}x{} depth map for a {}x{} panorama",
                    self.program,
                    depth.width(),
                    depth.height(),
                    image.width(),
                    image.height()
                ),
                diagnostics,
            });
        }
        Ok(depth)
    }

    /// Runs the command with `args` appended and returns its captured output.
    fn execute(&self, dir: &Path, args: &[(&str, &Path)]) -> Result<String> {
        let failure = |message: String, diagnostics: String| Error::BackendFailure {
            message,
            diagnostics,
        };
        let stdout_path = dir.join("stdout.txt");
        let stderr_path = dir.join("stderr.txt");
        let stdout = File::create(&stdout_path).map_err(|e| Error::io(&stdout_path, e))?;
        let stderr = File::create(&stderr_path).map_err(|e| Error::io(&stderr_path, e))?;
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args);
        for (flag, path) in args {
            cmd.arg(flag).arg(path);
        }
        let mut child = cmd
            .stdin(Stdio::null())
            .stdout(stdout)
            .stderr(stderr)
            .spawn()
            .map_err(|e| failure(format!("could not start {:?}: {e}", self.program), String::new()))?;

        let started = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if started.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(failure(
                        format!("{:?} timed out after {:?}", self.program, self.timeout),
                        read_diagnostics(&stdout_path, &stderr_path),
                    ));
                }
                Ok(None) => std::thread::sleep(Duration::from_millis(5)),
                Err(e) => {
                    return Err(failure(
                        format!("waiting for {:?}: {e}", self.program),
                        String::new(),
                    ))
                }
            }
        };
        let diagnostics = read_diagnostics(&stdout_path, &stderr_path);
        if !status.success() {
            return Err(failure(format!("{:?} exited with {status}", self.program), diagnostics));
        }
        Ok(diagnostics)
    }
}

fn tempdir() -> Result<tempfile::TempDir> {
    tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))
}

fn read_diagnostics(stdout: &Path, stderr: &Path) -> String {
    let read = |p: &Path| std::fs::read_to_string(p).unwrap_or_default();
    format!("stdout:\n{}\nstderr:\n{}", read(stdout).trim_end(), read(stderr).trim_end())
}
