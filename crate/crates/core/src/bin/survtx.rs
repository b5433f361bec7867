use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use survtx::bundle;
use survtx::config::{ExperimentConfig, ReconstructorKind};
use survtx::endcloud::{self, CloudConfig};
use survtx::eval::{evaluate, EvalFlags, QualityReport};
use survtx::io::{read_sequence, write_sequence, SequenceFormat};
use survtx::keyframe::{self, KeyFrameIndex, SelectionConfig, SelectionMode};
use survtx::metrics::{interframe_psnr_curve, PsnrCurve};
use survtx::reconstruct::{write_exchange_dir, ClassicalReconstructor, ReconstructionInput, Reconstructor};
use survtx::redundancy::{detect_redundant, surviving_positions, RedundancyConfig, RedundancyIndex};
use survtx::report::{self, DEFAULT_SWEEP};
use survtx::resample::{downsample_sequence, upsample_sequence};
use survtx::synth::{synth_surveillance, SynthConfig};
use survtx::{Error, FrameRate, Layout};

#[derive(Parser)]
#[command(name = "survtx", version, about = "End-cloud surveillance video transmission")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic surveillance-like clip.
    Synth(SynthArgs),
    /// Bicubic 4x downsampling.
    Downsample(ConvertArgs),
    /// Bicubic 4x upsampling.
    Upsample(ConvertArgs),
    /// Print redundant frame indices of a sequence.
    DetectRedundant(DetectArgs),
    /// Print key frame indices.
    SelectKeyframes(SelectArgs),
    /// Run the end-node pipeline and write a bundle.
    Pack(PackArgs),
    /// Decode a bundle into an exchange directory, optionally reconstructing.
    Unpack(UnpackArgs),
    /// Run the end node and send the bundle to a cloud node.
    Send(SendArgs),
    /// Run a cloud node.
    Serve(ServeArgs),
    /// Compare a reconstruction with ground truth.
    Evaluate(EvaluateArgs),
    /// Run one experiment from a config into its output directory.
    Run(ConfigArgs),
    /// Run a key-interval sweep, or summarize existing run directories.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Input format (raw | image-dir); detected when omitted.
    #[arg(long)]
    format: Option<SequenceFormat>,
    /// Output format; defaults to raw.
    #[arg(long, default_value = "raw")]
    output_format: SequenceFormat,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long, default_value = "raw")]
    output_format: SequenceFormat,
    #[arg(long, default_value_t = 320)]
    width: usize,
    #[arg(long, default_value_t = 180)]
    height: usize,
    #[arg(long, default_value_t = 60)]
    frames: usize,
    #[arg(long, default_value_t = 10)]
    fps: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write RGB frames instead of luma.
    #[arg(long)]
    rgb: bool,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long)]
    format: Option<SequenceFormat>,
    #[arg(long, default_value_t = 0.5)]
    tau_int: f64,
    #[arg(long, default_value_t = 15.0)]
    tau_mot: f64,
    #[arg(long, default_value_t = 2)]
    m: u8,
    /// Downsample before detecting, as the end node does.
    #[arg(long)]
    downsample: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long, default_value = "fixed")]
    mode: SelectionMode,
    #[arg(long, default_value_t = 15)]
    k: usize,
    /// Frame count; taken from the input when omitted.
    #[arg(long = "T", visible_alias = "frames")]
    frames: Option<usize>,
    /// Force the first and last frame to be key frames.
    #[arg(long)]
    endpoints: bool,
    #[arg(long, default_value_t = keyframe::DEFAULT_WINDOW)]
    w: usize,
    #[arg(long)]
    d_min: Option<usize>,
    #[arg(long)]
    max_interior: Option<usize>,
    /// Sequence whose inter-frame PSNR curve drives adaptive selection.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// File with the inter-frame PSNR curve (comma, space or newline separated).
    #[arg(long, conflicts_with = "input")]
    curve: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML experiment config.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Config override `dotted.key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Source sequence; overrides source.path.
    #[arg(long, short)]
    input: Option<PathBuf>,
    /// Key interval; overrides end.selection.k.
    #[arg(long)]
    k: Option<usize>,
    /// Selection mode; overrides end.selection.mode.
    #[arg(long)]
    mode: Option<SelectionMode>,
    /// Output directory; overrides output_dir.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct PackArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Bundle file to write.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct UnpackArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, short)]
    bundle: PathBuf,
    /// Directory for lr.raw, key images and indices.txt.
    #[arg(long, short)]
    output: PathBuf,
    /// Also reconstruct the full-length HR sequence into hr.raw.
    #[arg(long)]
    reconstruct: bool,
}

#[derive(Args)]
struct SendArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Cloud node address, host:port.
    #[arg(long)]
    addr: String,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    /// Ground-truth HR sequence for evaluation.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Exit after serving this many connections.
    #[arg(long)]
    max_connections: Option<usize>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Reconstructed HR sequence.
    #[arg(long)]
    recon: PathBuf,
    /// Ground-truth HR sequence.
    #[arg(long)]
    truth: PathBuf,
    /// indices.txt with key indices and redundant indices.
    #[arg(long)]
    indices: Option<PathBuf>,
    /// Comma-separated key indices.
    #[arg(long, conflicts_with = "indices")]
    keys: Option<String>,
    /// Comma-separated redundant indices.
    #[arg(long, conflicts_with = "indices")]
    redundant: Option<String>,
    /// Per-frame CSV to write.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also exclude redundant frames from the second aggregate.
    #[arg(long)]
    exclude_redundant: bool,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Summarize existing run directories under this path instead of running.
    #[arg(long)]
    from: Option<PathBuf>,
    /// Key intervals to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP)]
    ks: Vec<usize>,
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn parse_indices(s: &str) -> anyhow::Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().with_context(|| format!("bad index `{t}`")))
        .collect()
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidArgument(msg.into()).into()
}

impl ConfigArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(k) = self.k {
            overrides.push(format!("end.selection.k={k}"));
        }
        if let Some(m) = self.mode {
            let m = match m {
                SelectionMode::Fixed => "fixed",
                SelectionMode::Adaptive => "adaptive",
            };
            overrides.push(format!("end.selection.mode={m}"));
        }
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p, &overrides)?,
            None => ExperimentConfig::from_toml_with("", &overrides)?,
        };
        if let Some(i) = &self.input {
            cfg.source.path = i.clone();
        }
        if let Some(o) = &self.out_dir {
            cfg.output_dir = o.clone();
        }
        Ok(cfg)
    }

    fn load_with_source(&self) -> anyhow::Result<(ExperimentConfig, survtx::VideoSequence)> {
        let cfg = self.load()?;
        if cfg.source.path.as_os_str().is_empty() {
            return Err(usage("no source sequence; pass --input or set source.path"));
        }
        cfg.check_paths()?;
        let seq = read_sequence(&cfg.source.path, cfg.source.format)?;
        Ok((cfg, seq))
    }
}

fn read_curve(path: &Path) -> anyhow::Result<PsnrCurve> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Malformed(format!("bad curve value `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PsnrCurve::from_values(values))
}

fn cmd_select(a: SelectArgs) -> anyhow::Result<()> {
    let cfg = SelectionConfig {
        mode: a.mode,
        k: a.k,
        w: a.w,
        d_min: a.d_min,
        include_endpoints: a.endpoints,
        max_interior: a.max_interior,
    };
    let curve = match (&a.input, &a.curve) {
        (Some(p), _) => Some(interframe_psnr_curve(&read_sequence(p, None)?)?),
        (_, Some(p)) => Some(read_curve(p)?),
        _ => None,
    };
    let total = match (a.frames, &curve) {
        (Some(t), _) => t,
        (None, Some(c)) => c.len() + 1,
        (None, None) => return Err(usage("--T is required without --input or --curve")),
    };
    if cfg.mode == SelectionMode::Adaptive && curve.is_none() {
        return Err(usage("adaptive mode needs --input or --curve"));
    }
    let keys = keyframe::select(&cfg, total, curve.as_ref())?;
    println!("{}", join(keys.as_slice()));
    Ok(())
}

fn reconstructor_for(cfg: &ExperimentConfig) -> anyhow::Result<Arc<dyn Reconstructor>> {
    Ok(match cfg.reconstructor.kind {
        ReconstructorKind::Classical => Arc::new(ClassicalReconstructor),
        ReconstructorKind::External => cfg.reconstructor.build()?,
    })
}

fn cmd_pack(a: PackArgs) -> anyhow::Result<()> {
    let (cfg, hr) = a.config.load_with_source()?;
    let codec = cfg.codec.adapter()?;
    let out = endcloud::run_end_pipeline(&hr, &cfg.end, &codec)?;
    fs::write(&a.output, &out.packed.bytes).map_err(|e| Error::Io { path: a.output.clone(), source: e })?;
    let bpp = report::bundle_bpp(&out.packed.sizes, hr.width(), hr.height(), hr.len(), codec.encode_video(&hr)?.len())?;
    println!("keys={}", join(out.key_index.as_slice()));
    println!("redundant={}", join(out.redundant_index.as_slice()));
    println!(
        "bytes total={} lr={} key={} overhead={}",
        out.packed.sizes.total_bytes(),
        out.packed.sizes.lr_bytes,
        out.packed.sizes.key_bytes,
        out.packed.sizes.overhead_bytes
    );
    println!("system_bpp={:.6} hr_bpp={:.6} saving={:.4}", bpp.system.bpp, bpp.baseline.bpp, bpp.saving);
    Ok(())
}

fn cmd_unpack(a: UnpackArgs) -> anyhow::Result<()> {
    let cfg = a.config.load()?;
    let codec = cfg.codec.adapter()?;
    let bytes = fs::read(&a.bundle).map_err(|e| Error::Io { path: a.bundle.clone(), source: e })?;
    let decoded = bundle::unpack(&bytes, &codec)?;
    let key_positions = surviving_positions(decoded.key_index.as_slice(), &decoded.redundant_index)?;
    let input = ReconstructionInput {
        lr: &decoded.lr,
        keyframes: &decoded.keyframes,
        key_positions: &key_positions,
        key_index: &decoded.key_index,
        redundant_index: &decoded.redundant_index,
    };
    write_exchange_dir(&a.output, &input)?;
    if a.reconstruct {
        let rec = reconstructor_for(&cfg)?;
        let out = endcloud::process_bundle(&bytes, &codec, rec.as_ref())?;
        write_sequence(&a.output.join("hr.raw"), &out.hr, SequenceFormat::Raw)?;
    }
    println!("frames={} transmitted={}", decoded.meta.frame_count, decoded.lr.len());
    println!("keys={}", join(decoded.key_index.as_slice()));
    println!("redundant={}", join(decoded.redundant_index.as_slice()));
    Ok(())
}

fn cmd_send(a: SendArgs) -> anyhow::Result<()> {
    let (cfg, hr) = a.config.load_with_source()?;
    let codec = cfg.codec.adapter()?;
    let session = endcloud::run_end_node(a.addr.as_str(), &hr, &cfg.end, &codec)?;
    print!("{}", session.report);
    Ok(())
}

fn cmd_serve(a: ServeArgs) -> anyhow::Result<()> {
    let cfg = a.config.load()?;
    let ground_truth = a.ground_truth.as_deref().map(|p| read_sequence(p, None)).transpose()?;
    let listener = TcpListener::bind(&a.listen).with_context(|| format!("binding {}", a.listen))?;
    log::info!("listening on {}", listener.local_addr()?);
    cfg.capture(&cfg.output_dir)?;
    let cloud = CloudConfig {
        codec: cfg.codec.adapter()?,
        output_dir: Some(cfg.output_dir.clone()),
        ground_truth,
        eval: cfg.eval,
    };
    let results = endcloud::serve(listener, reconstructor_for(&cfg)?, Arc::new(cloud), a.max_connections)?;
    let failed: Vec<_> = results.into_iter().filter_map(Result::err).collect();
    match failed.into_iter().next() {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn cmd_evaluate(a: EvaluateArgs) -> anyhow::Result<()> {
    let recon = read_sequence(&a.recon, None)?;
    let truth = read_sequence(&a.truth, None)?;
    let (keys, red) = match &a.indices {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            let mut lines = text.lines();
            (
                parse_indices(lines.next().unwrap_or(""))?,
                parse_indices(lines.next().unwrap_or(""))?,
            )
        }
        None => (
            parse_indices(a.keys.as_deref().unwrap_or(""))?,
            parse_indices(a.redundant.as_deref().unwrap_or(""))?,
        ),
    };
    let t = truth.len();
    let keys = if keys.is_empty() { None } else { Some(KeyFrameIndex::new(keys, t)?) };
    let red = RedundancyIndex::new(red, t)?;
    let flags = EvalFlags {
        exclude_keys: true,
        exclude_redundant: a.exclude_redundant,
    };
    let report: QualityReport = match keys {
        Some(k) => evaluate(&recon, &truth, &k, &red, &flags)?,
        None => {
            let r = evaluate(&recon, &truth, &KeyFrameIndex::new(vec![1], t)?, &red, &flags)?;
            let frames = r
                .frames
                .into_iter()
                .map(|mut f| {
                    f.is_keyframe = false;
                    f
                })
                .collect();
            QualityReport::from_frames(frames, &flags)?
        }
    };
    if let Some(o) = &a.output {
        report.write_csv(o)?;
    }
    println!(
        "all: frames={} psnr={:.4} ssim={:.6}",
        report.all_frames.frames, report.all_frames.mean_psnr, report.all_frames.mean_ssim
    );
    if let Some(x) = report.excluding_keys {
        println!("excluding_keys: frames={} psnr={:.4} ssim={:.6}", x.frames, x.mean_psnr, x.mean_ssim);
    }
    if let Some(x) = report.excluding_keys_and_redundant {
        println!(
            "excluding_keys_and_redundant: frames={} psnr={:.4} ssim={:.6}",
            x.frames, x.mean_psnr, x.mean_ssim
        );
    }
    Ok(())
}

fn cmd_run(a: ConfigArgs) -> anyhow::Result<()> {
    let (cfg, hr) = a.load_with_source()?;
    let out = report::run_experiment(&hr, &cfg, &cfg.output_dir)?;
    println!("keys={}", join(out.key_index.as_slice()));
    println!("redundant={}", join(out.redundant_index.as_slice()));
    if let Some(x) = out.quality.excluding_keys {
        println!("mean_psnr_excluding_keys={:.4} mean_ssim_excluding_keys={:.6}", x.mean_psnr, x.mean_ssim);
    }
    println!("system_bpp={:.6} saving={:.4}", out.bpp.system.bpp, out.bpp.saving);
    Ok(())
}

fn cmd_report(a: ReportArgs) -> anyhow::Result<()> {
    let rows = match &a.from {
        Some(root) => report::summarize_sweep(root)?,
        None => {
            if a.ks.is_empty() {
                bail!(usage("--ks must name at least one interval"));
            }
            let (cfg, hr) = a.config.load_with_source()?;
            report::run_sweep(&hr, &cfg, &a.ks, &cfg.output_dir)?
        }
    };
    println!("k,mean_psnr_excluding_keys,mean_ssim_excluding_keys,system_bpp");
    for r in rows {
        let f = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
        println!(
            "{},{},{},{:.6}",
            r.k,
            f(r.mean_psnr_excluding_keys),
            f(r.mean_ssim_excluding_keys),
            r.system_bpp
        );
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let cfg = SynthConfig {
                width: a.width,
                height: a.height,
                frames: a.frames,
                fps: FrameRate::new(a.fps, 1)?,
                seed: a.seed,
                layout: if a.rgb { Layout::Rgb } else { Layout::Luma },
                object_size: (a.width.min(a.height) / 8).max(1),
                ..Default::default()
            };
            write_sequence(&a.output, &synth_surveillance(&cfg)?, a.output_format)?;
        }
        Command::Downsample(a) => {
            let s = read_sequence(&a.input, a.format)?;
            write_sequence(&a.output, &downsample_sequence(&s)?, a.output_format)?;
        }
        Command::Upsample(a) => {
            let s = read_sequence(&a.input, a.format)?;
            write_sequence(&a.output, &upsample_sequence(&s), a.output_format)?;
        }
        Command::DetectRedundant(a) => {
            let cfg = RedundancyConfig {
                tau_int: a.tau_int,
                tau_mot: a.tau_mot,
                m: a.m,
            };
            let mut s = read_sequence(&a.input, a.format)?;
            if a.downsample {
                s = downsample_sequence(&s)?;
            }
            println!("{}", join(detect_redundant(&s, &cfg)?.as_slice()));
        }
        Command::SelectKeyframes(a) => cmd_select(a)?,
        Command::Pack(a) => cmd_pack(a)?,
        Command::Unpack(a) => cmd_unpack(a)?,
        Command::Send(a) => cmd_send(a)?,
        Command::Serve(a) => cmd_serve(a)?,
        Command::Evaluate(a) => cmd_evaluate(a)?,
        Command::Run(a) => cmd_run(a)?,
        Command::Report(a) => cmd_report(a)?,
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let Some(e) = err.chain().find_map(|c| c.downcast_ref::<Error>()) else {
        return 2;
    };
    match e.root() {
        Error::External(_) | Error::Contract(_) => 3,
        Error::InvalidArgument(_) => 1,
        _ => 2,
    }
}

/// Error chain joined with `: `, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
