use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use evbench::bench::{self, ExperimentConfig};
use evbench::est::{build_est, crop_resize, pool_features, reconstruct_frames, FrameMode, KernelSpec, MlpKernel, PoolGrid, MLP_KERNEL_LAYERS};
use evbench::io::{read_event_file, write_event_file};
use evbench::noise::{self, NoiseKind, NoiseSpec, OobPolicy, ShiftScope};
use evbench::{Error, ErrorClass, Result, SensorGeometry};

/// Event-camera robustness benchmark.
#[derive(Parser)]
#[command(name = "evbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (EVS1 files and manifest.json).
    Synth(Common),
    /// Apply one noise model to an event file.
    Noise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Sensor size as WIDTHxHEIGHT; required for CSV input.
        #[arg(long)]
        geometry: Option<String>,
        /// clean, shift_x, shift_y, shift_xy, loss or polarity.
        #[arg(long)]
        kind: String,
        #[arg(long)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// per_event or per_stream.
        #[arg(long, default_value = "per_event")]
        scope: String,
        /// drop or clamp.
        #[arg(long, default_value = "drop")]
        oob: String,
    },
    /// Build the event spike tensor, pooled features and optional frames.
    Repr {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Sensor size as WIDTHxHEIGHT; required for CSV input.
        #[arg(long)]
        geometry: Option<String>,
        #[arg(long, default_value_t = 9)]
        bins: usize,
        /// trilinear or mlp_triangle.
        #[arg(long, default_value = "trilinear")]
        kernel: String,
        /// Pool grid as ROWSxCOLS.
        #[arg(long, default_value = "4x4")]
        pool: String,
        /// Resample to HEIGHTxWIDTH before pooling.
        #[arg(long)]
        crop: Option<String>,
        /// Also accumulate frames with this window in microseconds.
        #[arg(long)]
        window: Option<i64>,
        /// Add polarity instead of 1 per event in frames.
        #[arg(long)]
        signed: bool,
    },
    /// Train on the clean training split and evaluate on the test split.
    Train(Common),
    /// Stratified k-fold cross-validation.
    Crossval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Evaluate a checkpoint on the (optionally noised) test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        noise_kind: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        level: f64,
    },
    /// Evaluate over the noise grid and write sweep.csv.
    Sweep(Common),
    /// Summarize a results directory and write per-kind series.
    Report {
        dir: PathBuf,
        #[arg(long)]
        svg: bool,
    },
}

fn parse_pair(text: &str, what: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("{what} must look like 4x4, got {text:?}"));
    let (a, b) = text.split_once('x').ok_or_else(bad)?;
    Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
}

fn parse_geometry(text: Option<&str>) -> Result<Option<SensorGeometry>> {
    let Some(t) = text else { return Ok(None) };
    let (w, h) = parse_pair(t, "geometry")?;
    let g = u16::try_from(w)
        .ok()
        .zip(u16::try_from(h).ok())
        .and_then(|(w, h)| SensorGeometry::new(w, h));
    g.map(Some).ok_or_else(|| Error::Config(format!("bad geometry {t:?}")))
}

fn parse_scope(s: &str) -> Result<ShiftScope> {
    match s {
        "per_event" => Ok(ShiftScope::PerEvent),
        "per_stream" => Ok(ShiftScope::PerStream),
        _ => Err(Error::Config(format!("unknown shift scope {s:?}"))),
    }
}

fn parse_oob(s: &str) -> Result<OobPolicy> {
    match s {
        "drop" => Ok(OobPolicy::Drop),
        "clamp" => Ok(OobPolicy::Clamp),
        _ => Err(Error::Config(format!("unknown out-of-bounds policy {s:?}"))),
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_repr(
    input: &Path,
    out: &Path,
    geometry: Option<&str>,
    bins: usize,
    kernel: &str,
    pool: &str,
    crop: Option<&str>,
    window: Option<i64>,
    signed: bool,
) -> Result<String> {
    if bins == 0 {
        return Err(Error::Config("bins must be at least 1".into()));
    }
    let stream = read_event_file(input, parse_geometry(geometry)?)?;
    let spec = match kernel {
        "trilinear" => KernelSpec::Trilinear,
        "mlp_triangle" => KernelSpec::Mlp(MlpKernel::triangle(&MLP_KERNEL_LAYERS)?),
        other => return Err(Error::Config(format!("unknown kernel {other:?}"))),
    };
    let mut tensor = build_est(&stream, bins, &spec);
    if let Some(c) = crop {
        let (h, w) = parse_pair(c, "crop")?;
        if h == 0 || w == 0 {
            return Err(Error::Config("crop dimensions must be positive".into()));
        }
        tensor = crop_resize(&tensor, h, w);
    }
    let (rows, cols) = parse_pair(pool, "pool")?;
    if rows == 0 || cols == 0 || rows > tensor.height() || cols > tensor.width() {
        return Err(Error::Config(format!("pool grid {pool} does not fit the tensor")));
    }
    let mut dump = Vec::new();
    tensor.write_dump(&mut dump)?;
    write(&out.join("est.bin"), dump)?;
    let features = pool_features(&tensor, PoolGrid::new(rows, cols));
    let mut csv = String::from("index,value\n");
    for (i, v) in features.iter().enumerate() {
        let _ = writeln!(csv, "{i},{v}");
    }
    write(&out.join("features.csv"), csv)?;
    let mut msg = format!(
        "tensor {}x{}x{}, mass {}, {} features",
        tensor.channels(),
        tensor.height(),
        tensor.width(),
        tensor.total(),
        features.len()
    );
    if let Some(w) = window {
        if w < 1 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        let mode = if signed { FrameMode::Signed } else { FrameMode::Count };
        let video = reconstruct_frames(&stream, w, mode);
        let mut csv = String::from("frame,y,x,value\n");
        for (k, f) in video.frames.iter().enumerate() {
            for (i, &v) in f.iter().enumerate() {
                if v != 0 {
                    let _ = writeln!(csv, "{k},{},{},{v}", i / video.width, i % video.width);
                }
            }
        }
        write(&out.join("frames.csv"), csv)?;
        let _ = write!(msg, ", {} frames", video.len());
    }
    Ok(msg)
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Synth(c) => {
            let cfg = c.load()?;
            let m = bench::run_synth(&cfg)?;
            Ok(format!("wrote {} samples to {}", m.samples.len(), cfg.out.display()))
        }
        Command::Noise {
            input,
            output,
            geometry,
            kind,
            level,
            seed,
            scope,
            oob,
        } => {
            let mut spec = NoiseSpec::new(kind.parse::<NoiseKind>()?, level, seed);
            spec.shift_scope = parse_scope(&scope)?;
            spec.oob_policy = parse_oob(&oob)?;
            let stream = read_event_file(&input, parse_geometry(geometry.as_deref())?)?;
            let (noised, removed) = noise::apply(&stream, &spec)?;
            if let Some(dir) = output.parent() {
                std::fs::create_dir_all(dir)?;
            }
            write_event_file(&output, &noised)?;
            Ok(format!("{} events in, {} out, {removed} removed", stream.len(), noised.len()))
        }
        Command::Repr {
            input,
            out,
            geometry,
            bins,
            kernel,
            pool,
            crop,
            window,
            signed,
        } => cmd_repr(&input, &out, geometry.as_deref(), bins, &kernel, &pool, crop.as_deref(), window, signed),
        Command::Train(c) => {
            let cfg = c.load()?;
            let t = bench::run_train(&cfg)?;
            Ok(format!(
                "best epoch {} of {}, test accuracy {:.4}\n{}",
                t.record.best_epoch,
                t.record.stopped_epoch + 1,
                t.test.accuracy,
                t.test.to_table()
            ))
        }
        Command::Crossval { common, folds } => {
            let mut cfg = common.load()?;
            if let Some(k) = folds {
                cfg.folds = k;
            }
            let cv = bench::run_crossval(&cfg)?;
            let mut s = String::new();
            for f in &cv.folds {
                let _ = writeln!(s, "fold {}: val accuracy {:.4}, test accuracy {:.4}", f.fold, f.val_accuracy, f.test.accuracy);
            }
            let _ = write!(s, "best fold: {}", cv.best_fold);
            Ok(s)
        }
        Command::Eval {
            common,
            checkpoint,
            noise_kind,
            level,
        } => {
            let cfg = common.load()?;
            let noise = match noise_kind {
                Some(k) => {
                    let mut spec = NoiseSpec::new(k.parse()?, level, cfg.noise_base_seed());
                    spec.shift_scope = cfg.noise.shift_scope;
                    spec.oob_policy = cfg.noise.oob_policy;
                    Some(spec)
                }
                None => None,
            };
            let r = bench::run_eval(&cfg, &checkpoint, noise)?;
            Ok(r.to_table())
        }
        Command::Sweep(c) => {
            let cfg = c.load()?;
            let s = bench::run_sweep(&cfg)?;
            let mut out = String::new();
            for r in &s.rows {
                let _ = writeln!(out, "{:<9} {:>5} accuracy {:.4}", r.noise_kind, r.level, r.accuracy);
            }
            let _ = write!(out, "wrote {}", cfg.out.join("sweep.csv").display());
            Ok(out)
        }
        Command::Report { dir, svg } => {
            let r = bench::run_report(&dir, svg)?;
            Ok(r.summary)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(msg) => {
            println!("{}", msg.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Io => 3,
                ErrorClass::Numeric => 4,
            })
        }
    }
}
