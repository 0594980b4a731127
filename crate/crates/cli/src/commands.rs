use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use panowarp_core::cubemap::{self, CubeFace, CubemapSet, DEFAULT_FACE_SIZE};
use panowarp_core::dataset::{self, DatasetOptions};
use panowarp_core::inpaint::{self, Backend, InpaintContext, InpaintRequest, InpaintTarget};
use panowarp_core::io::{self, DepthFormat};
use panowarp_core::pnvi::{self, DepthUpdate, PnviOptions, Strategy};
use panowarp_core::warp::{self, cvs_warp};
use panowarp_core::{CameraPose, Error, HoleMask, Result};

use crate::manifest::{Role, ViewEntry, ViewManifest, MANIFEST_NAME};
use crate::pipeline::{self, MvpConfig, MvpSettings, PipelineConfig};
use crate::{load_panorama, require_file, save_panorama};

#[derive(Debug, Parser)]
#[command(name = "panowarp", version, about = "Depth-based panorama warping, progressive inpainting and reconstruction export")]
pub struct Cli {
    /// Worker threads [default: all cores]
    #[arg(long, global = true, env = "PANOWARP_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward-warp a panorama and its depth to a new position
    Warp(WarpArgs),
    /// Print the hole ratio of masks as a percentage
    Stats(StatsArgs),
    /// Equirectangular panorama to six cube faces
    E2c(E2cArgs),
    /// Six cube faces to an equirectangular panorama
    C2e(C2eArgs),
    /// Fill the holes of an image
    Inpaint(InpaintArgs),
    /// Move progressively to a target position, inpainting at every step
    Pnvi(PnviArgs),
    /// Slice panoramas into posed perspective views and export a sparse model
    Mvp(MvpArgs),
    /// Build a cubemap mask dataset for inpainting training
    Dataset(DatasetArgs),
    /// Run progressive inpainting over a pose set, then the multi-view export
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DepthArgs {
    /// Depth file format: pfm (meters) or png16mm (16-bit millimeters)
    #[arg(long, default_value = "pfm")]
    pub depth_format: String,
    /// Flip inputs vertically on read and outputs back on write
    #[arg(long)]
    pub flip_v: bool,
}

impl DepthArgs {
    fn format(&self) -> Result<DepthFormat> {
        self.depth_format.parse()
    }
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    /// constant, pullpush or external:<cmd>
    #[arg(long, default_value = "pullpush")]
    pub backend: String,
    /// Kill an external backend after this many seconds
    #[arg(long, default_value_t = 120.0)]
    pub backend_timeout_sec: f64,
    /// Maximum concurrently running external backend processes
    #[arg(long, default_value_t = inpaint::DEFAULT_MAX_CONCURRENT)]
    pub max_concurrent: usize,
}

impl BackendArgs {
    fn timeout(&self) -> Result<Duration> {
        if !(self.backend_timeout_sec > 0.0 && self.backend_timeout_sec.is_finite()) {
            return Err(Error::ContractViolation("--backend-timeout-sec must be positive".into()));
        }
        Ok(Duration::from_secs_f64(self.backend_timeout_sec))
    }

    fn backend(&self) -> Result<Backend> {
        let b: Backend = self.backend.parse()?;
        Ok(b.with_timeout(self.timeout()?).with_max_concurrent(self.max_concurrent))
    }
}

#[derive(Debug, Args)]
pub struct WarpArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub depth: PathBuf,
    /// Target position tx,ty,tz in meters
    #[arg(long, allow_hyphen_values = true)]
    pub pose: String,
    /// Writes <prefix>.png, the warped depth and <prefix>.mask.png
    #[arg(long)]
    pub out_prefix: PathBuf,
    #[command(flatten)]
    pub depth_args: DepthArgs,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub mask: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct E2cArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FACE_SIZE)]
    pub face_size: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Treat the input as a hole mask (nearest sampling, holes win)
    #[arg(long)]
    pub mask: bool,
}

#[derive(Debug, Args)]
pub struct C2eArgs {
    #[arg(long)]
    pub in_dir: PathBuf,
    /// Panorama width; the height is half of it
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Treat the faces as hole masks
    #[arg(long)]
    pub mask: bool,
}

#[derive(Debug, Args)]
pub struct InpaintArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Nonzero pixels are filled
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct PnviArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub depth: PathBuf,
    /// Position of the input panorama
    #[arg(long, default_value = "0,0,0", allow_hyphen_values = true)]
    pub start: String,
    #[arg(long, allow_hyphen_values = true)]
    pub target: String,
    /// Step length in meters
    #[arg(long, default_value_t = pnvi::DEFAULT_STEP_LENGTH)]
    pub step: f64,
    /// progressive, direct-panorama or large-step
    #[arg(long, default_value = "progressive")]
    pub strategy: String,
    #[arg(long, default_value_t = DEFAULT_FACE_SIZE)]
    pub face_size: usize,
    /// Abort a step whose hole ratio exceeds this fraction
    #[arg(long, default_value_t = pnvi::DEFAULT_MAX_HOLE_RATIO)]
    pub max_hole_ratio: f64,
    /// External depth estimator `<cmd> --image in.png --out depth.pfm`; default warps and diffuses depth
    #[arg(long)]
    pub depth_hook: Option<String>,
    /// Also write every intermediate panorama
    #[arg(long)]
    pub keep_intermediate: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub depth_args: DepthArgs,
}

#[derive(Debug, Args)]
pub struct MvpArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// cube6, ring8 or cube6+ring8
    #[arg(long, default_value = "cube6+ring8")]
    pub layout: String,
    #[arg(long, default_value_t = panowarp_core::mvp::DEFAULT_FOV)]
    pub fov: f64,
    #[arg(long, default_value_t = panowarp_core::mvp::DEFAULT_VIEW_SIZE)]
    pub size: usize,
    /// Lift every n-th panorama pixel into the point cloud
    #[arg(long, default_value_t = panowarp_core::mvp::DEFAULT_STRIDE)]
    pub stride: usize,
    /// world-to-camera or camera-to-world
    #[arg(long, default_value = "world-to-camera")]
    pub pose_convention: String,
    /// Export cameras and poses without points
    #[arg(long)]
    pub images_only: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Text file with one `<image> <depth>` pair per line, relative to the file
    #[arg(long)]
    pub list: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Movement units in meters
    #[arg(long, default_value = "0.02,0.04", value_delimiter = ',')]
    pub units: Vec<f64>,
    /// default8 or `x,y,z;x,y,z;...`
    #[arg(long, default_value = "default8", allow_hyphen_values = true)]
    pub directions: String,
    /// Parallel panoramas [default: --threads]
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, default_value_t = DEFAULT_FACE_SIZE)]
    pub face_size: usize,
    #[command(flatten)]
    pub depth_args: DepthArgs,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// JSON config; see the README for keys and defaults
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub keep_intermediate: bool,
    /// Print the plan without writing anything
    #[arg(long)]
    pub dry_run: bool,
    /// Replace the artifacts of a previous run in the output directory
    #[arg(long)]
    pub overwrite: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Warp(a) => warp_cmd(a),
        Command::Stats(a) => stats_cmd(a),
        Command::E2c(a) => e2c_cmd(a),
        Command::C2e(a) => c2e_cmd(a),
        Command::Inpaint(a) => inpaint_cmd(a),
        Command::Pnvi(a) => pnvi_cmd(a),
        Command::Mvp(a) => mvp_cmd(a),
        Command::Dataset(a) => dataset_cmd(a),
        Command::Pipeline(a) => pipeline_cmd(a),
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => io::create_dir_all(p),
        _ => Ok(()),
    }
}

fn warp_cmd(a: WarpArgs) -> Result<()> {
    let format = a.depth_args.format()?;
    let pose: CameraPose = a.pose.parse()?;
    let state = load_panorama(&a.image, &a.depth, format, a.depth_args.flip_v, CameraPose::ORIGIN)?;
    let mut out = cvs_warp(&state.image, &state.depth, pose)?;
    if a.depth_args.flip_v {
        out.image = out.image.flip_vertical();
        out.depth = out.depth.flip_vertical();
        out.mask = out.mask.flip_vertical();
    }
    create_parent(&a.out_prefix)?;
    io::write_equirect(&out.image, &with_suffix(&a.out_prefix, ".png"))?;
    let stem = a.out_prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    io::write_depth(&out.depth, &a.out_prefix.with_file_name(format.file_name(&stem)), format)?;
    io::write_mask(&out.mask, &with_suffix(&a.out_prefix, ".mask.png"))?;
    println!("hole ratio: {:.1}%", out.hole_ratio() * 100.0);
    Ok(())
}

fn stats_cmd(a: StatsArgs) -> Result<()> {
    let masks = a
        .mask
        .iter()
        .map(|p| require_file(p).and_then(|_| io::read_mask(p)))
        .collect::<Result<Vec<_>>>()?;
    for (path, m) in a.mask.iter().zip(&masks) {
        let pct = warp::hole_ratio(m) * 100.0;
        if masks.len() == 1 {
            println!("{pct:.1}%");
        } else {
            println!("{}\t{pct:.1}%", path.display());
        }
    }
    Ok(())
}

fn e2c_cmd(a: E2cArgs) -> Result<()> {
    require_file(&a.input)?;
    if a.mask {
        let cube = cubemap::e2c_mask(&read_pano_mask(&a.input)?, a.face_size)?;
        io::create_dir_all(&a.out_dir)?;
        for (face, m) in cube.iter() {
            io::write_mask(m, &a.out_dir.join(format!("{}.png", face.name())))?;
        }
    } else {
        let cube = cubemap::e2c(&io::read_equirect(&a.input)?, a.face_size)?;
        io::create_dir_all(&a.out_dir)?;
        for (face, img) in cube.iter() {
            io::write_rgb(img, &a.out_dir.join(format!("{}.png", face.name())))?;
        }
    }
    Ok(())
}

fn read_pano_mask(path: &Path) -> Result<HoleMask> {
    let m = io::read_mask(path)?;
    if m.width() != 2 * m.height() {
        return Err(Error::ContractViolation(format!(
            "{} is {}x{}, not a 2:1 panorama",
            path.display(),
            m.width(),
            m.height()
        )));
    }
    Ok(m)
}

fn check_width(width: usize) -> Result<()> {
    if width == 0 || width % 2 != 0 {
        return Err(Error::ContractViolation(format!("--width {width} must be positive and even")));
    }
    Ok(())
}

fn c2e_cmd(a: C2eArgs) -> Result<()> {
    check_width(a.width)?;
    let paths = CubeFace::ALL.map(|f| a.in_dir.join(format!("{}.png", f.name())));
    for p in &paths {
        require_file(p)?;
    }
    if a.mask {
        let faces: Vec<HoleMask> = paths.iter().map(|p| io::read_mask(p)).collect::<Result<_>>()?;
        let cube = CubemapSet::new_masks(faces.try_into().expect("six faces"))?;
        let pano = cubemap::c2e_mask(&cube, a.width, a.width / 2)?;
        create_parent(&a.out)?;
        io::write_mask(&pano, &a.out)
    } else {
        let faces: Vec<_> = paths.iter().map(|p| io::read_rgb(p)).collect::<Result<_>>()?;
        let cube = CubemapSet::new(faces.try_into().expect("six faces"))?;
        let pano = cubemap::c2e(&cube, a.width, a.width / 2)?;
        create_parent(&a.out)?;
        io::write_equirect(&pano, &a.out)
    }
}

fn inpaint_cmd(a: InpaintArgs) -> Result<()> {
    let backend = a.backend.backend()?;
    require_file(&a.image)?;
    require_file(&a.mask)?;
    let image = io::read_rgb(&a.image)?;
    let mask = io::read_mask(&a.mask)?;
    let target = if image.width() == 2 * image.height() {
        InpaintTarget::Panorama
    } else {
        InpaintTarget::Image
    };
    let ctx = InpaintContext {
        pose: CameraPose::ORIGIN,
        target,
    };
    let out = inpaint::inpaint(&InpaintRequest { image, mask }, &backend, &ctx)?;
    create_parent(&a.out)?;
    io::write_rgb(&out, &a.out)
}

fn pnvi_cmd(a: PnviArgs) -> Result<()> {
    let format = a.depth_args.format()?;
    let backend = a.backend.backend()?;
    let start: CameraPose = a.start.parse()?;
    let target: CameraPose = a.target.parse()?;
    let strategy: Strategy = a.strategy.parse()?;
    let plan = pnvi::plan_with_strategy(start, target, a.step, strategy)?;
    if !(a.max_hole_ratio > 0.0 && a.max_hole_ratio <= 1.0) {
        return Err(Error::ContractViolation("--max-hole-ratio must be in (0, 1]".into()));
    }
    let depth = match &a.depth_hook {
        Some(cmd) => DepthUpdate::External(inpaint::ExternalCommand::new(cmd)?.with_timeout(a.backend.timeout()?)),
        None => DepthUpdate::WarpAndFill,
    };
    let opts = PnviOptions {
        face_size: a.face_size,
        max_hole_ratio: a.max_hole_ratio,
        depth,
    };
    let flip = a.depth_args.flip_v;
    let initial = load_panorama(&a.image, &a.depth, format, flip, start)?;

    io::create_dir_all(&a.out_dir)?;
    let manifest_path = a.out_dir.join(MANIFEST_NAME);
    let mut manifest = ViewManifest::new(format);
    manifest.flip_v = flip;
    let last = plan.steps.len();
    let push = |state: &pnvi::PnviState, k: usize, manifest: &mut ViewManifest| -> Result<()> {
        let (image, depth) = save_panorama(state, &a.out_dir, &format!("view_s{k:03}"), format, flip)?;
        manifest.views.push(ViewEntry {
            pose: state.pose.as_vec().to_array(),
            image,
            depth,
            role: if k == last { Role::Target } else { Role::Intermediate },
            branch: None,
            step: Some(k),
        });
        Ok(())
    };
    let result = if last == 0 {
        push(&initial, 0, &mut manifest)
    } else {
        pnvi::pnvi_run_with(&initial, &plan, &backend, &opts, |o| {
            eprintln!("step {}/{last}: pose {}, hole ratio {:.1}%", o.index, o.state.pose, o.hole_ratio * 100.0);
            if a.keep_intermediate || o.index == last {
                push(&o.state, o.index, &mut manifest)?;
            }
            Ok(())
        })
        .map(|_| ())
    };
    if let Err(e) = &result {
        manifest.incomplete = Some(e.to_string());
    }
    manifest.write(&manifest_path)?;
    result
}

fn mvp_cmd(a: MvpArgs) -> Result<()> {
    let settings = MvpSettings::from_config(&MvpConfig {
        layout: a.layout,
        fov: a.fov,
        size: a.size,
        stride: a.stride,
        pose_convention: a.pose_convention,
        points: !a.images_only,
    })?;
    let (model, _) = pipeline::mvp_from_manifest(&a.manifest, &settings, &a.out_dir)?;
    println!(
        "{} cameras, {} images, {} points",
        model.cameras.len(),
        model.images.len(),
        model.points.len()
    );
    Ok(())
}

fn read_list(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [img, depth] = parts[..] else {
            return Err(Error::format(path, format!("line {}: expected `<image> <depth>`", i + 1)));
        };
        let (img, depth) = (base.join(img), base.join(depth));
        for p in [&img, &depth] {
            require_file(p).map_err(|e| Error::ContractViolation(format!("line {}: {e}", i + 1)))?;
        }
        out.push((img, depth));
    }
    if out.is_empty() {
        return Err(Error::ContractViolation(format!("{} lists no panoramas", path.display())));
    }
    Ok(out)
}

fn dataset_cmd(a: DatasetArgs) -> Result<()> {
    let format = a.depth_args.format()?;
    let list = read_list(&a.list)?;
    let opts = DatasetOptions {
        units: a.units,
        directions: dataset::parse_directions(&a.directions)?,
        face_size: a.face_size,
        workers: a.workers,
    };
    let flip = a.depth_args.flip_v;
    let records = dataset::export_dataset_with(
        list.len(),
        |i| {
            let s = load_panorama(&list[i].0, &list[i].1, format, flip, CameraPose::ORIGIN)?;
            Ok((s.image, s.depth))
        },
        &a.out_dir,
        &opts,
    )?;
    let rgb = records.iter().filter(|r| matches!(r, dataset::Record::Rgb { .. })).count();
    println!(
        "{} panoramas: {rgb} RGB faces, {} mask faces",
        list.len(),
        records.len() - rgb
    );
    Ok(())
}

fn pipeline_cmd(a: PipelineArgs) -> Result<()> {
    let mut cfg = PipelineConfig::from_file(&a.config)?;
    if let Some(dir) = a.out_dir {
        cfg.out_dir = dir;
    }
    if let Some(b) = a.backend {
        cfg.inpaint.backend = b;
    }
    if let Some(s) = a.step {
        cfg.step_length = s;
    }
    cfg.keep_intermediate |= a.keep_intermediate;
    let resolved = cfg.resolve()?;
    if a.dry_run {
        print!("{}", resolved.describe());
        return Ok(());
    }
    // fail on unreadable inputs before anything is written
    for p in [&resolved.image, &resolved.depth] {
        require_file(p)?;
    }
    let report = pipeline::run_pipeline(&resolved, a.overwrite, &mut |line| eprintln!("{line}"))?;
    println!(
        "{} panoramas, {} images, {} points; manifest {}, model {}, timing {}",
        report.views,
        report.model.images.len(),
        report.model.points.len(),
        report.manifest.display(),
        report.sparse_dir.display(),
        report.timing.display()
    );
    Ok(())
}
