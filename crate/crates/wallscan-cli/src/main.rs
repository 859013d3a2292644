//! Command-line pipeline for wall deformation measurement: registration,
//! deformation maps, level-of-detection sweeps, synthetic scenes, and
//! reference-instrument utilities.
//!
//! Every command is deterministic given its config and seed; CSV
//! artifacts are byte-identical across reruns. Outputs are written
//! atomically (temp file + rename). Exit status is 0 iff no fatal error
//! occurred, and fatal errors name the offending input.

mod support;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;
use support::{
    atomic_write, pick, pick_required, read_targets, read_transform, summarize_map,
    write_transform, KeyValues, RunReport,
};
use wallscan::cloud::FrameTag;
use wallscan::deform::{self, Method, DEFAULT_CELL_SIZE_M};
use wallscan::geom::WallFrame;
use wallscan::io::{read_cloud, write_cloud, Format};
use wallscan::registration::{
    estimate_normals, icp_point_to_plane, register_targets, registration_qc, IcpParams,
};
use wallscan::synth::{
    add_y_noise, deform_wall, gen_facade, gen_wall, DeformationField, FacadeSpec, WallSpec,
};
use wallscan::uncertainty::lod_sweep;
use wallscan::{
    instrument, DeformationMap, DepthProfile, InclinometerTrace, Point3, PointCloud,
    PointwiseDeformation,
};

#[derive(Parser)]
#[command(
    name = "wallscan",
    version,
    about = "Deformation measurement between multi-temporal point clouds of retaining walls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Align a query cloud to a reference: target pairs or facade ICP.
    Register(RegisterArgs),
    /// Compute deformation maps between two registered clouds.
    Deform(DeformArgs),
    /// Run the split-half level-of-detection sweep on one cloud.
    Lod(LodArgs),
    /// Generate synthetic scenes with exact ground truth.
    Synth(SynthArgs),
    /// Convert a total-station angle change into a deformation.
    Smallangle(SmallAngleArgs),
    /// Accumulate an inclinometer trace into a depth profile.
    Inclinometer(InclinometerArgs),
    /// Difference a deformation map against a depth profile.
    Compare(CompareArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// key = value file mirroring the flags; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct RegisterArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Corresponding-points file (rx ry rz qx qy qz per line)
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Reference cloud (xyz or ply)
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Query cloud to align
    #[arg(long)]
    query: Option<PathBuf>,
    /// ICP iteration cap
    #[arg(long)]
    icp_max_iter: Option<usize>,
    /// ICP residual rejection factor (times the median)
    #[arg(long, allow_negative_numbers = true)]
    icp_rejection: Option<f64>,
}

#[derive(Args)]
struct DeformArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    reference: Option<PathBuf>,
    #[arg(long)]
    query: Option<PathBuf>,
    /// Transform file applied to the query before measuring
    #[arg(long)]
    transform: Option<PathBuf>,
    /// c2m, m2m, m3c2, icp, or all
    #[arg(long)]
    method: Option<String>,
    /// Raster cell size in millimetres
    #[arg(long, allow_negative_numbers = true)]
    cell_size_mm: Option<f64>,
    /// Lower deformation filter bound in millimetres
    #[arg(long, allow_negative_numbers = true)]
    filter_lo_mm: Option<f64>,
    /// Upper deformation filter bound in millimetres
    #[arg(long, allow_negative_numbers = true)]
    filter_hi_mm: Option<f64>,
    /// Cloud frame handling: as-is, or fit a wall frame from the
    /// reference and express both clouds in it
    #[arg(long)]
    frame: Option<String>,
    /// M3C2 normal and projection cylinder diameter in metres
    #[arg(long)]
    m3c2_diameter_m: Option<f64>,
    /// M3C2 projection cylinder full height in metres
    #[arg(long)]
    m3c2_height_m: Option<f64>,
    /// M3C2 core point minimum spacing in metres (0 uses every point)
    #[arg(long)]
    m3c2_core_res_m: Option<f64>,
    #[arg(long)]
    icp_max_iter: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    icp_rejection: Option<f64>,
}

#[derive(Args)]
struct LodArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Cloud to sweep
    #[arg(long)]
    reference: Option<PathBuf>,
    /// c2m, m2m, m3c2, icp, or all
    #[arg(long)]
    method: Option<String>,
    /// Number of subsampling levels
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Scene spec file (key = value)
    #[arg(long)]
    scene: Option<PathBuf>,
}

#[derive(Args)]
struct SmallAngleArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Angle change in arcseconds
    #[arg(long, allow_negative_numbers = true)]
    delta_arcsec: Option<f64>,
    /// Sight length in metres
    #[arg(long)]
    length_m: Option<f64>,
}

#[derive(Args)]
struct InclinometerArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trace CSV (depth_m,theta_deg)
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Deformation map CSV
    #[arg(long)]
    map: Option<PathBuf>,
    /// Method tag the map was produced with
    #[arg(long)]
    method: Option<String>,
    /// Depth profile CSV
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Wall x coordinate of the instrumented column (metres)
    #[arg(long, allow_negative_numbers = true)]
    x: Option<f64>,
    /// Map z coordinate of ground level (metres)
    #[arg(long, allow_negative_numbers = true)]
    ground_z: Option<f64>,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Register(args) => cmd_register(args),
        Command::Deform(args) => cmd_deform(args),
        Command::Lod(args) => cmd_lod(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Smallangle(args) => cmd_smallangle(args),
        Command::Inclinometer(args) => cmd_inclinometer(args),
        Command::Compare(args) => cmd_compare(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn load_config(common: &CommonArgs) -> Result<Option<KeyValues>> {
    common.config.as_deref().map(KeyValues::read).transpose()
}

fn out_dir(common: &CommonArgs, config: &Option<KeyValues>) -> Result<PathBuf> {
    let dir = pick_required(
        &common.out_dir,
        config,
        "out-dir",
        "an output directory",
    )?;
    fs::create_dir_all(&dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    Ok(dir)
}

fn read_input_cloud(path: &Path, frame: FrameTag) -> Result<PointCloud> {
    read_cloud(path, Format::from_path(path), frame)
        .with_context(|| format!("cannot load cloud {}", path.display()))
}

fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    if spec == "all" {
        return Ok(vec![Method::C2M, Method::M2M, Method::M3C2, Method::Icp]);
    }
    spec.split(',')
        .map(|tok| Method::parse(tok.trim()).map_err(anyhow::Error::from))
        .collect()
}

fn echo_config(report: &mut RunReport, entries: &[(&str, String)]) {
    for (key, value) in entries {
        report.push(&format!("config.{key}"), value);
    }
}

fn cmd_register(args: RegisterArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let dir = out_dir(&args.common, &config)?;
    let targets = opt_path(&args.targets, &config, "targets");
    let reference = opt_path(&args.reference, &config, "reference");
    let query = opt_path(&args.query, &config, "query");
    let max_iter = pick(&args.icp_max_iter, &config, "icp-max-iter", 50)?;
    let rejection = pick(&args.icp_rejection, &config, "icp-rejection", 3.0)?;

    let started = Instant::now();
    let mut report = RunReport::new("register");
    let clouds = match (&reference, &query) {
        (Some(r), Some(q)) => Some((
            read_input_cloud(r, FrameTag::Site)?,
            read_input_cloud(q, FrameTag::Site)?,
        )),
        _ => None,
    };

    let result = if let Some(targets_path) = &targets {
        report.push("config.targets", targets_path.display());
        let pairs = read_targets(targets_path)?;
        report.push("stage.register.mode", "targets");
        report.push("stage.register.pairs", pairs.len());
        register_targets(&pairs)
            .with_context(|| format!("target registration from {}", targets_path.display()))?
    } else {
        let (reference_cloud, query_cloud) = clouds
            .as_ref()
            .ok_or_else(|| anyhow!("ICP registration needs --reference and --query clouds"))?;
        report.push("config.reference", reference.as_ref().unwrap().display());
        report.push("config.query", query.as_ref().unwrap().display());
        report.push("stage.register.mode", "icp");
        let params = IcpParams {
            max_iterations: max_iter,
            rejection_factor: rejection,
            ..IcpParams::default()
        };
        let spacing = reference_cloud.data_spacing()?;
        let bbox = reference_cloud.bounding_box()?;
        let centre = bbox.center();
        let sensor = Point3::new(
            centre.x,
            bbox.max.y + bbox.diagonal().max(1.0),
            centre.z,
        );
        let normals = estimate_normals(reference_cloud, 2.0 * spacing, sensor)?;
        let result = icp_point_to_plane(query_cloud, reference_cloud, &normals, &params)?;
        if !result.converged {
            bail!(
                "registration failed: ICP did not converge within {} iterations on {}",
                params.max_iterations,
                query.as_ref().unwrap().display()
            );
        }
        result
    };

    let transform_path = dir.join("transform.txt");
    write_transform(&transform_path, &result.transform)?;
    report.push("stage.register.rmse_mm", result.rmse * 1000.0);
    report.push("stage.register.iterations", result.iterations);
    report.push("stage.register.inlier_fraction", result.inlier_fraction);
    report.push("stage.register.converged", result.converged);
    report.push("stage.register.transform", transform_path.display());

    if let Some((reference_cloud, query_cloud)) = &clouds {
        let registered = query_cloud.apply_transform(&result.transform);
        let qc = registration_qc(reference_cloud, &registered)?;
        report.push("stage.qc.mean_mm", qc.mean * 1000.0);
        report.push("stage.qc.max_abs_mm", qc.max_abs * 1000.0);
        report.push("stage.qc.points", qc.distances.len());
    } else {
        report.push("stage.qc.skipped", "no clouds provided");
    }
    report.push("timing.total_s", started.elapsed().as_secs_f64());
    report.write(&dir.join("report-register.txt"))?;
    println!("transform written to {}", transform_path.display());
    Ok(())
}

fn opt_path(
    flag: &Option<PathBuf>,
    config: &Option<KeyValues>,
    key: &str,
) -> Option<PathBuf> {
    flag.clone().or_else(|| {
        config
            .as_ref()
            .and_then(|cfg| cfg.get(key))
            .map(PathBuf::from)
    })
}

fn cmd_deform(args: DeformArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let dir = out_dir(&args.common, &config)?;
    let reference_path: PathBuf =
        pick_required(&args.reference, &config, "reference", "a reference cloud")?;
    let query_path: PathBuf = pick_required(&args.query, &config, "query", "a query cloud")?;
    let transform_path = opt_path(&args.transform, &config, "transform");
    let method_spec = pick(&args.method, &config, "method", "all".to_string())?;
    let methods = parse_methods(&method_spec)?;
    let cell_mm = pick(&args.cell_size_mm, &config, "cell-size-mm", DEFAULT_CELL_SIZE_M * 1000.0)?;
    let lo_mm = pick(
        &args.filter_lo_mm,
        &config,
        "filter-lo-mm",
        deform::DEFAULT_FILTER_LO_M * 1000.0,
    )?;
    let hi_mm = pick(
        &args.filter_hi_mm,
        &config,
        "filter-hi-mm",
        deform::DEFAULT_FILTER_HI_M * 1000.0,
    )?;
    let frame_mode = pick(&args.frame, &config, "frame", "as-is".to_string())?;
    let m3c2_d = pick(&args.m3c2_diameter_m, &config, "m3c2-diameter-m", 0.03)?;
    let m3c2_h = pick(&args.m3c2_height_m, &config, "m3c2-height-m", 4.0)?;
    let m3c2_core = pick(&args.m3c2_core_res_m, &config, "m3c2-core-res-m", 0.0)?;
    let icp_max_iter = pick(&args.icp_max_iter, &config, "icp-max-iter", 50)?;
    let icp_rejection = pick(&args.icp_rejection, &config, "icp-rejection", 3.0)?;
    if cell_mm <= 0.0 {
        bail!("--cell-size-mm must be positive, got {cell_mm}");
    }
    let cell_m = cell_mm / 1000.0;
    let (lo_m, hi_m) = (lo_mm / 1000.0, hi_mm / 1000.0);

    let started = Instant::now();
    let mut report = RunReport::new("deform");
    echo_config(
        &mut report,
        &[
            ("reference", reference_path.display().to_string()),
            ("query", query_path.display().to_string()),
            ("method", method_spec.clone()),
            ("cell_size_mm", cell_mm.to_string()),
            ("filter_lo_mm", lo_mm.to_string()),
            ("filter_hi_mm", hi_mm.to_string()),
            ("frame", frame_mode.clone()),
        ],
    );

    let mut reference = read_input_cloud(&reference_path, FrameTag::Site)?;
    let mut query = read_input_cloud(&query_path, FrameTag::Site)?;
    if let Some(tp) = &transform_path {
        let transform = read_transform(tp)?;
        query = query.apply_transform(&transform);
        report.push("stage.transform.applied", tp.display());
    }
    match frame_mode.as_str() {
        "as-is" => {}
        "fit" => {
            let plane = reference.fit_plane()?;
            let bbox = reference.bounding_box()?;
            let mut outward = plane.normal();
            // deterministic orientation: positive global y, ties broken
            // toward positive x
            if outward.y < 0.0 || (outward.y == 0.0 && outward.x < 0.0) {
                outward = -outward;
            }
            let frame = WallFrame::new(plane.project(bbox.center()), outward)
                .context("cannot fit a wall frame to the reference cloud")?;
            reference = reference.to_wall_frame(&frame);
            query = query.to_wall_frame(&frame);
            report.push("stage.frame.fit", "wall-local");
        }
        other => bail!("unknown --frame mode '{other}' (expected as-is or fit)"),
    }

    for method in methods {
        let stage = Instant::now();
        let map = (|| -> Result<DeformationMap> {
            match method {
                Method::C2M => raster_of(deform::c2m(&reference, &query)?, lo_m, hi_m, cell_m),
                Method::M2M => {
                    Ok(deform::m2m(&reference, &query, cell_m)?.filter_range(lo_m, hi_m)?)
                }
                Method::M3C2 => {
                    let params = deform::M3C2Params {
                        normal_diameter: m3c2_d,
                        projection_diameter: m3c2_d,
                        cylinder_height: m3c2_h,
                        core_resolution: m3c2_core,
                    };
                    raster_of(deform::m3c2(&reference, &query, &params)?, lo_m, hi_m, cell_m)
                }
                Method::Icp => {
                    let params = IcpParams {
                        max_iterations: icp_max_iter,
                        rejection_factor: icp_rejection,
                        ..IcpParams::default()
                    };
                    raster_of(deform::icp_deform(&reference, &query, &params)?, lo_m, hi_m, cell_m)
                }
            }
        })()
        .with_context(|| {
            format!(
                "{method} between {} and {}",
                reference_path.display(),
                query_path.display()
            )
        })?;
        let map_path = dir.join(format!("map-{method}.csv"));
        atomic_write(&map_path, |tmp| {
            map.write_csv(tmp).map_err(anyhow::Error::from)
        })?;
        let prefix = format!("stage.{method}");
        match summarize_map(&map) {
            Some(s) => {
                report.push(&format!("{prefix}.valid_cells"), s.valid_cells);
                report.push(
                    &format!("{prefix}.valid_cell_fraction"),
                    s.valid_cells as f64 / s.total_cells as f64,
                );
                report.push(&format!("{prefix}.mean_mm"), s.mean_mm);
                report.push(&format!("{prefix}.min_mm"), s.min_mm);
                report.push(&format!("{prefix}.max_mm"), s.max_mm);
            }
            None => report.push(&format!("{prefix}.valid_cells"), 0),
        }
        report.push(&format!("{prefix}.map"), map_path.display());
        report.push(
            &format!("timing.{method}_s"),
            stage.elapsed().as_secs_f64(),
        );
        println!("{method}: {}", map_path.display());
    }
    report.push("timing.total_s", started.elapsed().as_secs_f64());
    report.write(&dir.join("report-deform.txt"))?;
    Ok(())
}

fn raster_of(
    pointwise: PointwiseDeformation,
    lo_m: f64,
    hi_m: f64,
    cell_m: f64,
) -> Result<DeformationMap> {
    let filtered = pointwise.filter_range(lo_m, hi_m)?;
    deform::rasterize(&filtered, cell_m).map_err(anyhow::Error::from)
}

fn cmd_lod(args: LodArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let dir = out_dir(&args.common, &config)?;
    let cloud_path: PathBuf =
        pick_required(&args.reference, &config, "reference", "a cloud to sweep")?;
    let method_spec = pick(&args.method, &config, "method", "all".to_string())?;
    let methods = parse_methods(&method_spec)?;
    let levels = pick(&args.levels, &config, "levels", 6)?;
    let seed = pick(&args.seed, &config, "seed", 0)?;

    let started = Instant::now();
    let mut report = RunReport::new("lod");
    echo_config(
        &mut report,
        &[
            ("reference", cloud_path.display().to_string()),
            ("method", method_spec.clone()),
            ("levels", levels.to_string()),
            ("seed", seed.to_string()),
        ],
    );
    let cloud = read_input_cloud(&cloud_path, FrameTag::WallLocal)?;
    let sweep = lod_sweep(&cloud, &methods, levels, seed)
        .with_context(|| format!("level-of-detection sweep on {}", cloud_path.display()))?;
    let csv_path = dir.join("lod.csv");
    atomic_write(&csv_path, |tmp| {
        sweep.write_csv(tmp).map_err(anyhow::Error::from)
    })?;
    let invalid = sweep.rows().iter().filter(|r| !r.is_valid()).count();
    report.push("stage.lod.initial_spacing_m", sweep.initial_spacing());
    report.push("stage.lod.rows", sweep.rows().len());
    report.push("stage.lod.invalid_rows", invalid);
    report.push("stage.lod.csv", csv_path.display());
    report.push("timing.total_s", started.elapsed().as_secs_f64());
    report.write(&dir.join("report-lod.txt"))?;
    println!("sweep written to {}", csv_path.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let dir = out_dir(&args.common, &config)?;
    let scene_path: PathBuf = pick_required(&args.scene, &config, "scene", "a scene spec file")?;
    let scene = KeyValues::read(&scene_path)?;
    let kind = scene
        .get("kind")
        .ok_or_else(|| anyhow!("{}: missing key 'kind'", scene_path.display()))?;

    let started = Instant::now();
    let mut report = RunReport::new("synth");
    report.push("config.scene", scene_path.display());
    report.push("config.kind", kind);
    match kind {
        "wall" => synth_wall(&scene, &scene_path, &dir, &mut report)?,
        "facade" => synth_facade(&scene, &dir, &mut report)?,
        other => bail!(
            "{}: unknown scene kind '{other}' (expected wall or facade)",
            scene_path.display()
        ),
    }
    report.push("timing.total_s", started.elapsed().as_secs_f64());
    report.write(&dir.join("report-synth.txt"))?;
    Ok(())
}

fn synth_wall(
    scene: &KeyValues,
    scene_path: &Path,
    dir: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let defaults: WallSpec<f64> = WallSpec::default();
    let spec = WallSpec {
        extent: scene.parse("extent")?.unwrap_or(defaults.extent),
        height: scene.parse("height")?.unwrap_or(defaults.height),
        spacing: scene.parse("spacing")?.unwrap_or(defaults.spacing),
        amplitude: scene.parse("amplitude")?.unwrap_or(defaults.amplitude),
        wavelength: scene.parse("wavelength")?.unwrap_or(defaults.wavelength),
        sigma: scene.parse("sigma")?.unwrap_or(0.0),
        seed: scene.parse("seed")?.unwrap_or(0),
    };
    let query_sigma: f64 = scene.parse("query_sigma")?.unwrap_or(spec.sigma);
    let query_seed: u64 = scene.parse("query_seed")?.unwrap_or(spec.seed.wrapping_add(1));

    let reference = gen_wall(&spec)?;
    let noise_free = gen_wall(&WallSpec { sigma: 0.0, ..spec.clone() })?;

    let field = match scene.get("field").unwrap_or("none") {
        "none" => None,
        kind @ ("constant" | "bump") => {
            let mm: f64 = scene
                .parse("field_mm")?
                .ok_or_else(|| anyhow!("{}: field '{kind}' needs field_mm", scene_path.display()))?;
            let value = mm / 1000.0;
            let margin = spec.spacing;
            let min = [-margin, -margin];
            let max = [spec.extent + margin, spec.height + margin];
            let field = if kind == "constant" {
                DeformationField::constant(min, max, value)?
            } else {
                let (ex, hz) = (spec.extent, spec.height);
                DeformationField::from_fn(min, max, 17, 17, |x, z| {
                    let sx = (std::f64::consts::PI * x / ex).sin();
                    let sz = (std::f64::consts::PI * z / hz).sin();
                    value * (sx * sx) * (sz * sz)
                })?
            };
            Some(field)
        }
        other => bail!(
            "{}: unknown field kind '{other}' (expected none, constant or bump)",
            scene_path.display()
        ),
    };

    let query = match &field {
        Some(f) => deform_wall(&noise_free, f)?,
        None => noise_free,
    };
    let query = add_y_noise(&query, query_sigma, query_seed)?;

    let reference_path = dir.join("reference.xyz");
    let query_path = dir.join("query.xyz");
    atomic_write(&reference_path, |tmp| {
        write_cloud(&reference, tmp, Format::XyzAscii).map_err(anyhow::Error::from)
    })?;
    atomic_write(&query_path, |tmp| {
        write_cloud(&query, tmp, Format::XyzAscii).map_err(anyhow::Error::from)
    })?;
    report.push("stage.synth.reference", reference_path.display());
    report.push("stage.synth.reference_points", reference.len());
    report.push("stage.synth.query", query_path.display());
    report.push("stage.synth.query_points", query.len());
    if let Some(f) = &field {
        let field_path = dir.join("field.txt");
        atomic_write(&field_path, |tmp| f.write(tmp).map_err(anyhow::Error::from))?;
        report.push("stage.synth.field", field_path.display());
    }
    println!(
        "wall scene written to {} ({} reference points)",
        dir.display(),
        reference.len()
    );
    Ok(())
}

fn synth_facade(scene: &KeyValues, dir: &Path, report: &mut RunReport) -> Result<()> {
    let defaults: FacadeSpec<f64> = FacadeSpec::default();
    let spec = FacadeSpec {
        width: scene.parse("width")?.unwrap_or(defaults.width),
        height: scene.parse("height")?.unwrap_or(defaults.height),
        spacing: scene.parse("spacing")?.unwrap_or(defaults.spacing),
        window_rows: scene.parse("rows")?.unwrap_or(defaults.window_rows),
        window_cols: scene.parse("cols")?.unwrap_or(defaults.window_cols),
        window_width: scene.parse("window_width")?.unwrap_or(defaults.window_width),
        window_height: scene.parse("window_height")?.unwrap_or(defaults.window_height),
        recess_depth: scene.parse("depth")?.unwrap_or(defaults.recess_depth),
        sigma: 0.0,
        seed: 0,
    };
    let sigma: f64 = scene.parse("sigma")?.unwrap_or(0.0);
    let seed: u64 = scene.parse("seed")?.unwrap_or(0);
    let rot_deg: f64 = scene.parse("rot_deg")?.unwrap_or(0.0);
    let axis = Vector3::new(
        scene.parse("axis_x")?.unwrap_or(1.0),
        scene.parse("axis_y")?.unwrap_or(1.0),
        scene.parse("axis_z")?.unwrap_or(1.0),
    );
    let translation = Vector3::new(
        scene.parse("tx")?.unwrap_or(0.0),
        scene.parse("ty")?.unwrap_or(0.0),
        scene.parse("tz")?.unwrap_or(0.0),
    );

    let reference = gen_facade(&spec)?;
    let truth = wallscan::geom::RigidTransform::rotation_about(
        axis,
        rot_deg.to_radians(),
        translation,
    )
    .context("scene displacement axis is degenerate")?;
    let query = add_y_noise(&reference.apply_transform(&truth), sigma, seed)?;

    let reference_path = dir.join("reference.xyz");
    let query_path = dir.join("query.xyz");
    let truth_path = dir.join("truth-transform.txt");
    atomic_write(&reference_path, |tmp| {
        write_cloud(&reference, tmp, Format::XyzAscii).map_err(anyhow::Error::from)
    })?;
    atomic_write(&query_path, |tmp| {
        write_cloud(&query, tmp, Format::XyzAscii).map_err(anyhow::Error::from)
    })?;
    write_transform(&truth_path, &truth)?;
    report.push("stage.synth.reference", reference_path.display());
    report.push("stage.synth.reference_points", reference.len());
    report.push("stage.synth.query", query_path.display());
    report.push("stage.synth.query_points", query.len());
    report.push("stage.synth.truth_transform", truth_path.display());
    println!(
        "facade scene written to {} ({} reference points)",
        dir.display(),
        reference.len()
    );
    Ok(())
}

fn cmd_smallangle(args: SmallAngleArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let delta = pick_required(
        &args.delta_arcsec,
        &config,
        "delta-arcsec",
        "an angle change",
    )?;
    let length = pick_required(&args.length_m, &config, "length-m", "a sight length")?;
    let deformation = instrument::small_angle_deformation(delta, length)?;
    println!("delta_arcsec = {delta}");
    println!("length_m = {length}");
    println!("deformation_m = {deformation}");
    println!("deformation_mm = {}", deformation * 1000.0);
    Ok(())
}

fn cmd_inclinometer(args: InclinometerArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let dir = out_dir(&args.common, &config)?;
    let trace_path: PathBuf = pick_required(&args.trace, &config, "trace", "a trace CSV")?;

    let started = Instant::now();
    let trace = InclinometerTrace::read_csv(&trace_path)?;
    let profile = instrument::inclinometer_profile(&trace);
    let profile_path = dir.join("profile.csv");
    atomic_write(&profile_path, |tmp| {
        profile.write_csv(tmp).map_err(anyhow::Error::from)
    })?;

    let mut report = RunReport::new("inclinometer");
    report.push("config.trace", trace_path.display());
    report.push("stage.profile.readings", trace.readings_deg().len());
    report.push("stage.profile.tube_depth_m", trace.tube_depth());
    report.push(
        "stage.profile.surface_deformation_mm",
        profile.surface_deformation() * 1000.0,
    );
    report.push("stage.profile.csv", profile_path.display());
    report.push("timing.total_s", started.elapsed().as_secs_f64());
    report.write(&dir.join("report-inclinometer.txt"))?;
    println!("profile written to {}", profile_path.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let dir = out_dir(&args.common, &config)?;
    let map_path: PathBuf = pick_required(&args.map, &config, "map", "a deformation map CSV")?;
    let profile_path: PathBuf =
        pick_required(&args.profile, &config, "profile", "a depth profile CSV")?;
    let x = pick_required(&args.x, &config, "x", "the instrumented column's x")?;
    let ground_z = pick_required(&args.ground_z, &config, "ground-z", "the ground level z")?;
    let method_spec = pick(&args.method, &config, "method", "c2m".to_string())?;
    let method = Method::parse(&method_spec)?;

    let started = Instant::now();
    let map = DeformationMap::read_csv(&map_path, method)?;
    let profile = DepthProfile::read_csv(&profile_path)?;
    let comparison = instrument::compare_profile(&map, x, &profile, ground_z);

    let csv_path = dir.join("compare.csv");
    atomic_write(&csv_path, |tmp| {
        let mut text = String::from("depth_m,profile_mm,map_mm,difference_mm\n");
        for row in &comparison.rows {
            let fmt = |v: Option<f64>| match v {
                Some(v) => format!("{v:.4}"),
                None => "nan".to_string(),
            };
            text.push_str(&format!(
                "{},{:.4},{},{}\n",
                row.depth,
                row.profile_mm,
                fmt(row.map_mm),
                fmt(row.difference_mm)
            ));
        }
        fs::write(tmp, text).with_context(|| format!("cannot write {}", tmp.display()))
    })?;

    let matched = comparison.rows.iter().filter(|r| r.map_mm.is_some()).count();
    let mut report = RunReport::new("compare");
    echo_config(
        &mut report,
        &[
            ("map", map_path.display().to_string()),
            ("profile", profile_path.display().to_string()),
            ("x", x.to_string()),
            ("ground_z", ground_z.to_string()),
            ("method", method_spec.clone()),
        ],
    );
    report.push("stage.compare.rows", comparison.rows.len());
    report.push("stage.compare.matched", matched);
    if let Some(notice) = &comparison.notice {
        report.push("stage.compare.notice", notice);
        println!("note: {notice}");
    }
    report.push("stage.compare.csv", csv_path.display());
    report.push("timing.total_s", started.elapsed().as_secs_f64());
    report.write(&dir.join("report-compare.txt"))?;
    println!("comparison written to {}", csv_path.display());
    Ok(())
}
