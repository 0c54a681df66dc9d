//! Command-line surface tying the library together.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use polarseg::codec::{
    decode, encode_raycast, encode_traversal, AngleGrid, CodecConfig, PolarInstance,
};
use polarseg::experiments::{
    fit_rays, report, synth_corpus, upper_bound_sweep, CenterKind, Corpus, FitConfig, LossKind,
    ShapeKind,
};
use polarseg::geometry::BitMask;
use polarseg::io::{
    load_candidates, load_instances, save_candidates, save_instances, write_atomic, InstanceRecord,
};
use polarseg::losses::SmoothL1Config;
use polarseg::postprocess::{assemble, Candidate, NmsConfig};

#[derive(Parser)]
#[command(
    name = "polarseg",
    about = "Encode instance masks as center-plus-rays, decode them back, \
             and run the upper-bound and loss-comparison experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CenterArg {
    Mass,
    Box,
}

#[derive(Clone, Copy, ValueEnum)]
enum CenterSweepArg {
    Mass,
    Box,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    PolarIou,
    SmoothL1,
}

#[derive(Clone, Copy, ValueEnum)]
enum IouModeArg {
    PolarSimplified,
    PolarPower,
    Pixel,
}

#[derive(Subcommand)]
enum Command {
    /// Convert polygon instances to polar candidates (distance labels).
    Encode(EncodeArgs),
    /// Convert polar candidates back to polygon instances.
    Decode(DecodeArgs),
    /// Reconstruction-IoU sweep over ray counts and center modes.
    Upperbound(UpperboundArgs),
    /// Fit rays to each instance by gradient descent and compare losses.
    Fit(FitArgs),
    /// Select, suppress and rasterize candidates.
    Nms(NmsArgs),
    /// IoU between two files of shapes.
    Iou(IouArgs),
}

#[derive(Args)]
struct EncodeArgs {
    /// Instance file (JSON polygons).
    #[arg(long)]
    input: PathBuf,
    /// Number of rays.
    #[arg(long, default_value_t = 36)]
    rays: usize,
    /// Polar origin for each instance.
    #[arg(long, value_enum, default_value_t = CenterArg::Mass)]
    center: CenterArg,
    /// Minimum ray length.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Use the exact ray-casting encoder instead of contour traversal.
    #[arg(long)]
    exact: bool,
    /// Output candidate file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// Candidate file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Raster size as HxW, e.g. 512x512.
    #[arg(long, value_parser = parse_raster)]
    raster: (usize, usize),
    /// Output instance file.
    #[arg(long)]
    out: PathBuf,
    /// Directory for optional mask dumps (PBM, one per instance).
    #[arg(long)]
    masks_out: Option<PathBuf>,
}

#[derive(Args)]
struct UpperboundArgs {
    /// Instance file with ground-truth polygons.
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Synthetic corpus spec as kind,count,seed (kind: ellipse|convex|star).
    #[arg(long)]
    synthetic: Option<String>,
    /// Comma-separated ray counts.
    #[arg(long, default_value = "18,24,36,72,90,120")]
    rays: String,
    /// Center mode(s) to evaluate.
    #[arg(long, value_enum, default_value_t = CenterSweepArg::Both)]
    center: CenterSweepArg,
    /// Raster size as HxW.
    #[arg(long, value_parser = parse_raster, default_value = "512x512")]
    raster: (usize, usize),
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Instance file with target polygons.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = LossArg::PolarIou)]
    loss: LossArg,
    /// Smooth-l1 balance factor.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    /// Step size on the log-length parameters.
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of rays to fit.
    #[arg(long, default_value_t = 36)]
    rays: usize,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NmsArgs {
    /// Candidate file (JSON).
    #[arg(long)]
    candidates: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    score_thr: f64,
    #[arg(long, default_value_t = 1000)]
    topk: usize,
    #[arg(long, default_value_t = 0.5)]
    iou_thr: f64,
    /// Raster size as HxW for mask assembly.
    #[arg(long, value_parser = parse_raster, default_value = "512x512")]
    raster: (usize, usize),
    /// Output candidate file with the survivors.
    #[arg(long)]
    out: PathBuf,
    /// Directory for optional assembled-mask dumps (PBM).
    #[arg(long)]
    masks_out: Option<PathBuf>,
}

#[derive(Args)]
struct IouArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    /// polar-* modes read candidate files; pixel mode reads instance files.
    #[arg(long, value_enum)]
    mode: IouModeArg,
}

/// Raster sizes are given height-first to match image_size in the files.
fn parse_raster(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got '{s}'"))?;
    let height: usize = h.trim().parse().map_err(|_| format!("bad height '{h}'"))?;
    let width: usize = w.trim().parse().map_err(|_| format!("bad width '{w}'"))?;
    if height == 0 || width == 0 {
        return Err("raster dimensions must be at least 1".into());
    }
    Ok((width, height))
}

#[derive(Debug)]
struct DataError(String);

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn data_err(context: &str, err: impl fmt::Display) -> DataError {
    DataError(format!("{context}: {err}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), DataError> {
    match cli.command {
        Command::Encode(args) => cmd_encode(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Upperbound(args) => cmd_upperbound(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Nms(args) => cmd_nms(args),
        Command::Iou(args) => cmd_iou(args),
    }
}

fn cmd_encode(args: EncodeArgs) -> Result<(), DataError> {
    let corpus = load_instances(&args.input).map_err(|e| data_err("encode", e))?;
    let grid = AngleGrid::new(args.rays).map_err(|e| data_err("encode", e))?;
    let cfg = CodecConfig {
        epsilon: args.eps,
        ..CodecConfig::default()
    };
    let mut candidates = Vec::with_capacity(corpus.instances.len());
    for inst in &corpus.instances {
        let center = match args.center {
            CenterArg::Mass => inst.contour.mass_center(),
            CenterArg::Box => inst.contour.box_center(),
        };
        let encoded = if args.exact {
            encode_raycast(&inst.contour, center, grid, &cfg)
        } else {
            encode_traversal(&inst.contour, center, grid, &cfg)
        }
        .map_err(|e| data_err(&format!("encode '{}'", inst.id), e))?;
        let rays = encoded.rays();
        let centerness = {
            let lo = rays.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = rays.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (lo / hi).sqrt()
        };
        let cand = Candidate::new(encoded, 1.0, centerness, 0, inst.category)
            .map_err(|e| data_err(&format!("encode '{}'", inst.id), e))?;
        candidates.push(cand);
    }
    save_candidates(&candidates, &args.out).map_err(|e| data_err("encode", e))?;
    eprintln!(
        "encoded {} instances -> {}",
        candidates.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<(), DataError> {
    let candidates = load_candidates(&args.input).map_err(|e| data_err("decode", e))?;
    let (width, height) = args.raster;
    let mut records = Vec::with_capacity(candidates.len());
    for (i, cand) in candidates.iter().enumerate() {
        let contour = decode(&cand.instance).map_err(|e| data_err(&format!("decode #{i}"), e))?;
        let mut polygon = Vec::with_capacity(contour.len() * 2);
        for p in contour.points() {
            polygon.push(p.x);
            polygon.push(p.y);
        }
        records.push(InstanceRecord {
            id: format!("{i}"),
            image_size: [height, width],
            polygon,
            category: cand.category,
        });
        if let Some(dir) = &args.masks_out {
            let mask = contour
                .rasterize(width, height)
                .map_err(|e| data_err(&format!("decode #{i}"), e))?;
            dump_mask(dir, &format!("{i}"), &mask)?;
        }
    }
    save_instances(&records, &args.out).map_err(|e| data_err("decode", e))?;
    eprintln!(
        "decoded {} candidates -> {}",
        records.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_upperbound(args: UpperboundArgs) -> Result<(), DataError> {
    let corpus = corpus_from_args(args.input.as_deref(), args.synthetic.as_deref())?;
    let ray_counts = parse_ray_list(&args.rays)?;
    let modes: &[CenterKind] = match args.center {
        CenterSweepArg::Mass => &[CenterKind::Mass],
        CenterSweepArg::Box => &[CenterKind::Box],
        CenterSweepArg::Both => &[CenterKind::Mass, CenterKind::Box],
    };
    let records = upper_bound_sweep(&corpus, &ray_counts, modes, args.raster)
        .map_err(|e| data_err("upperbound", e))?;
    report(&records, &args.out).map_err(|e| data_err("upperbound", e))?;
    eprintln!(
        "swept {} instances x {:?} rays -> {}",
        corpus.instances.len(),
        ray_counts,
        args.out.display()
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<(), DataError> {
    let corpus = load_instances(&args.input).map_err(|e| data_err("fit", e))?;
    let grid = AngleGrid::new(args.rays).map_err(|e| data_err("fit", e))?;
    let mut csv =
        String::from("id,loss,alpha,rays,steps,final_loss,polar_iou,pixel_iou,wall_time_ms\n");
    for (i, inst) in corpus.instances.iter().enumerate() {
        let cfg = FitConfig {
            loss_kind: match args.loss {
                LossArg::PolarIou => LossKind::PolarIou,
                LossArg::SmoothL1 => LossKind::SmoothL1,
            },
            steps: args.steps,
            step_size: args.lr,
            seed: args.seed.wrapping_add(i as u64),
            smooth_l1: SmoothL1Config {
                alpha: args.alpha,
                beta: 1.0,
            },
        };
        let start = Instant::now();
        let (fitted, trace) = fit_rays(&inst.contour, grid, &cfg)
            .map_err(|e| data_err(&format!("fit '{}'", inst.id), e))?;
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;

        let truth = encode_raycast(
            &inst.contour,
            inst.contour.mass_center(),
            grid,
            &CodecConfig::default(),
        )
        .map_err(|e| data_err(&format!("fit '{}'", inst.id), e))?;
        let pair = polarseg::RayPair::new(truth.rays().to_vec(), fitted.rays().to_vec())
            .map_err(|e| data_err(&format!("fit '{}'", inst.id), e))?;
        let polar_iou = polarseg::losses::polar_iou_simplified(&pair);
        let pixel_iou = fit_pixel_iou(inst.image_size, &inst.contour, &fitted)
            .map_err(|e| data_err(&format!("fit '{}'", inst.id), e))?;
        let loss_label = match args.loss {
            LossArg::PolarIou => "polar-iou",
            LossArg::SmoothL1 => "smooth-l1",
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.3}\n",
            inst.id,
            loss_label,
            args.alpha,
            args.rays,
            args.steps,
            trace.last().copied().unwrap_or(f64::NAN),
            polar_iou,
            pixel_iou,
            wall_ms
        ));
    }
    write_atomic(&args.out, csv.as_bytes()).map_err(|e| data_err("fit", e))?;
    eprintln!(
        "fitted {} instances -> {}",
        corpus.instances.len(),
        args.out.display()
    );
    Ok(())
}

fn fit_pixel_iou(
    image_size: (usize, usize),
    target: &polarseg::Contour,
    fitted: &PolarInstance,
) -> Result<f64, Box<dyn std::error::Error>> {
    let (w, h) = image_size;
    let truth = target.rasterize(w, h)?;
    let mask = decode(fitted)?.rasterize(w, h)?;
    Ok(truth.iou(&mask)?)
}

fn cmd_nms(args: NmsArgs) -> Result<(), DataError> {
    let candidates = load_candidates(&args.candidates).map_err(|e| data_err("nms", e))?;
    let cfg = NmsConfig {
        score_threshold: args.score_thr,
        top_k_per_level: args.topk,
        iou_threshold: args.iou_thr,
    };
    cfg.validate().map_err(|e| data_err("nms", e))?;
    let assembled = assemble(&candidates, &cfg, args.raster).map_err(|e| data_err("nms", e))?;
    let survivors: Vec<Candidate> = assembled.iter().map(|(c, _)| c.clone()).collect();
    save_candidates(&survivors, &args.out).map_err(|e| data_err("nms", e))?;
    if let Some(dir) = &args.masks_out {
        for (i, (_, mask)) in assembled.iter().enumerate() {
            dump_mask(dir, &format!("{i}"), mask)?;
        }
    }
    eprintln!(
        "kept {} of {} candidates -> {}",
        survivors.len(),
        candidates.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_iou(args: IouArgs) -> Result<(), DataError> {
    match args.mode {
        IouModeArg::Pixel => {
            let a = load_instances(&args.a).map_err(|e| data_err("iou", e))?;
            let b = load_instances(&args.b).map_err(|e| data_err("iou", e))?;
            if a.instances.len() != b.instances.len() {
                return Err(DataError(format!(
                    "iou: file lengths differ ({} vs {})",
                    a.instances.len(),
                    b.instances.len()
                )));
            }
            for (x, y) in a.instances.iter().zip(&b.instances) {
                if x.image_size != y.image_size {
                    return Err(DataError(format!(
                        "iou: image sizes differ for '{}' and '{}'",
                        x.id, y.id
                    )));
                }
                let (w, h) = x.image_size;
                let ma = x.contour.rasterize(w, h).map_err(|e| data_err("iou", e))?;
                let mb = y.contour.rasterize(w, h).map_err(|e| data_err("iou", e))?;
                let v = ma.iou(&mb).map_err(|e| data_err("iou", e))?;
                println!("{} {} {:.6}", x.id, y.id, v);
            }
        }
        IouModeArg::PolarSimplified | IouModeArg::PolarPower => {
            let a = load_candidates(&args.a).map_err(|e| data_err("iou", e))?;
            let b = load_candidates(&args.b).map_err(|e| data_err("iou", e))?;
            if a.len() != b.len() {
                return Err(DataError(format!(
                    "iou: file lengths differ ({} vs {})",
                    a.len(),
                    b.len()
                )));
            }
            for (i, (x, y)) in a.iter().zip(&b).enumerate() {
                let pair =
                    polarseg::RayPair::new(x.instance.rays().to_vec(), y.instance.rays().to_vec())
                        .map_err(|e| data_err(&format!("iou pair #{i}"), e))?;
                let v = match args.mode {
                    IouModeArg::PolarSimplified => polarseg::losses::polar_iou_simplified(&pair),
                    _ => polarseg::losses::polar_iou_power(&pair),
                };
                println!("{} {:.6}", i, v);
            }
        }
    }
    Ok(())
}

fn corpus_from_args(input: Option<&Path>, synthetic: Option<&str>) -> Result<Corpus, DataError> {
    match (input, synthetic) {
        (Some(path), None) => load_instances(path).map_err(|e| data_err("upperbound", e)),
        (None, Some(spec)) => {
            let parts: Vec<&str> = spec.split(',').collect();
            if parts.len() != 3 {
                return Err(DataError(format!(
                    "upperbound: --synthetic expects kind,count,seed, got '{spec}'"
                )));
            }
            let kind = match parts[0].trim() {
                "ellipse" => ShapeKind::Ellipse,
                "convex" | "convex_poly" => ShapeKind::ConvexPoly,
                "star" => ShapeKind::Star,
                other => {
                    return Err(DataError(format!(
                        "upperbound: unknown shape kind '{other}'"
                    )))
                }
            };
            let count: usize = parts[1]
                .trim()
                .parse()
                .map_err(|_| DataError(format!("upperbound: bad count '{}'", parts[1])))?;
            let seed: u64 = parts[2]
                .trim()
                .parse()
                .map_err(|_| DataError(format!("upperbound: bad seed '{}'", parts[2])))?;
            if count == 0 {
                return Err(DataError("upperbound: count must be at least 1".into()));
            }
            Ok(synth_corpus(seed, count, kind))
        }
        _ => Err(DataError(
            "upperbound: provide exactly one of --input or --synthetic".into(),
        )),
    }
}

fn parse_ray_list(s: &str) -> Result<Vec<usize>, DataError> {
    let list: Result<Vec<usize>, _> = s.split(',').map(|t| t.trim().parse::<usize>()).collect();
    let list = list.map_err(|_| DataError(format!("bad ray list '{s}'")))?;
    if list.is_empty() || list.iter().any(|&n| n < 3) {
        return Err(DataError("ray counts must be >= 3".into()));
    }
    Ok(list)
}

/// Plain-text PBM, one file per mask.
fn dump_mask(dir: &Path, name: &str, mask: &BitMask) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|e| data_err("mask dump", e))?;
    let mut text = format!("P1\n{} {}\n", mask.width(), mask.height());
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            text.push(if mask.get(x, y) { '1' } else { '0' });
            text.push(if x + 1 == mask.width() { '\n' } else { ' ' });
        }
    }
    write_atomic(&dir.join(format!("{name}.pbm")), text.as_bytes())
        .map_err(|e| data_err("mask dump", e))?;
    Ok(())
}
