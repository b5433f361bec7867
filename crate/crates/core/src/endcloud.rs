//! End node and cloud node.
//!
//! End node: downsample, select key frames, drop redundant LR frames, pack,
//! send. Cloud node: receive, unpack, reconstruct the surviving frames, copy
//! back redundant positions, optionally evaluate against ground truth.
//!
//! Session protocol over [`transport`](crate::transport):
//!
//! ```text
//! end   -> HELLO  "survtx/1"
//! cloud -> HELLO  "survtx/1"
//! end   -> BUNDLE <stream bundle>
//! cloud -> REPORT key=value lines       (on failure: "error=<reason>", then close)
//! cloud -> ACK
//! end   -> BYE
//! ```

use std::fmt::Write as _;
use std::fs;
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::bundle::{self, BundleMeta, DecodedBundle, PackedBundle};
use crate::codec::CodecAdapter;
use crate::error::{Error, Result, Stage, StageExt};
use crate::eval::{evaluate, EvalFlags, QualityReport};
use crate::frame::{Frame, VideoSequence};
use crate::keyframe::{self, KeyFrameIndex, SelectionConfig, SelectionMode};
use crate::metrics::interframe_psnr_curve;
use crate::reconstruct::{ReconstructionInput, Reconstructor};
use crate::redundancy::{
    detect_redundant, detect_redundant_with_exempt, drop_redundant, restore_redundant,
    surviving_positions, RedundancyConfig, RedundancyIndex,
};
use crate::resample::{downsample_sequence, SCALE};
use crate::transport::{expect_message, read_message, write_message, Message, MessageType};

pub const PROTOCOL_HELLO: &str = "survtx/1";

/// Order of key-frame selection and redundancy elimination on the end node.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineOrder {
    /// Select key frames on the full LR sequence, then drop redundant frames
    /// with key positions exempt.
    #[default]
    KeyFramesFirst,
    /// Drop redundant frames first, then select key frames among the survivors.
    RedundancyFirst,
}

impl std::str::FromStr for PipelineOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "key-frames-first" | "keys-first" => Ok(PipelineOrder::KeyFramesFirst),
            "redundancy-first" => Ok(PipelineOrder::RedundancyFirst),
            other => Err(Error::InvalidArgument(format!("unknown pipeline order `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EndConfig {
    pub selection: SelectionConfig,
    pub redundancy: RedundancyConfig,
    pub order: PipelineOrder,
    /// Disable to transmit every LR frame.
    pub eliminate_redundant: bool,
}

impl Default for EndConfig {
    fn default() -> Self {
        EndConfig {
            selection: SelectionConfig::default(),
            redundancy: RedundancyConfig::default(),
            order: PipelineOrder::default(),
            eliminate_redundant: true,
        }
    }
}

/// Everything the end node computed for one stream.
#[derive(Clone, Debug)]
pub struct EndOutput {
    pub lr_full: VideoSequence,
    pub lr_transmitted: VideoSequence,
    pub keyframes: Vec<Frame>,
    pub key_index: KeyFrameIndex,
    pub redundant_index: RedundancyIndex,
    pub meta: BundleMeta,
    pub packed: PackedBundle,
}

fn select_keys(lr: &VideoSequence, cfg: &SelectionConfig) -> Result<KeyFrameIndex> {
    let curve = if cfg.mode == SelectionMode::Adaptive && lr.len() >= 2 {
        Some(interframe_psnr_curve(lr)?)
    } else {
        None
    };
    keyframe::select(cfg, lr.len(), curve.as_ref())
}

/// Run the end-node pipeline locally and produce the bundle.
pub fn run_end_pipeline(hr: &VideoSequence, cfg: &EndConfig, codec: &CodecAdapter) -> Result<EndOutput> {
    let lr = downsample_sequence(hr).stage(Stage::Downsample)?;

    let (key_index, redundant_index) = match cfg.order {
        PipelineOrder::KeyFramesFirst => {
            let keys = select_keys(&lr, &cfg.selection).stage(Stage::KeyFrameSelection)?;
            let red = if cfg.eliminate_redundant {
                detect_redundant_with_exempt(&lr, &cfg.redundancy, keys.as_slice())
                    .stage(Stage::RedundancyDetection)?
            } else {
                RedundancyIndex::empty()
            };
            (keys, red)
        }
        PipelineOrder::RedundancyFirst => {
            let red = if cfg.eliminate_redundant {
                detect_redundant(&lr, &cfg.redundancy).stage(Stage::RedundancyDetection)?
            } else {
                RedundancyIndex::empty()
            };
            let survivors = drop_redundant(&lr, &red).stage(Stage::RedundancyDetection)?;
            let local = select_keys(&survivors, &cfg.selection).stage(Stage::KeyFrameSelection)?;
            let original: Vec<usize> = (1..=lr.len()).filter(|i| !red.contains(*i)).collect();
            let keys = KeyFrameIndex::new(
                local.as_slice().iter().map(|&p| original[p - 1]).collect(),
                lr.len(),
            )
            .stage(Stage::KeyFrameSelection)?;
            (keys, red)
        }
    };

    let keyframes: Vec<Frame> = key_index
        .as_slice()
        .iter()
        .map(|&i| hr.frames()[i - 1].clone())
        .collect();
    let lr_transmitted = drop_redundant(&lr, &redundant_index).stage(Stage::RedundancyDetection)?;
    let meta = BundleMeta {
        hr_width: hr.width(),
        hr_height: hr.height(),
        fps: hr.fps(),
        frame_count: hr.len(),
        layout: hr.layout(),
    };
    let packed = bundle::pack(
        &lr_transmitted,
        &keyframes,
        &key_index,
        &redundant_index,
        codec,
        &meta,
    )
    .stage(Stage::Pack)?;
    Ok(EndOutput {
        lr_full: lr,
        lr_transmitted,
        keyframes,
        key_index,
        redundant_index,
        meta,
        packed,
    })
}

/// Cloud-side result for one bundle.
#[derive(Clone, Debug)]
pub struct CloudOutput {
    pub decoded: DecodedBundle,
    /// Reconstruction of the transmitted frames only.
    pub hr_transmitted: VideoSequence,
    /// Full-length reconstruction after copy-back.
    pub hr: VideoSequence,
    pub bundle_bytes: usize,
    pub report: Option<QualityReport>,
}

/// Decode a bundle and rebuild the full-length HR sequence.
pub fn process_bundle(bytes: &[u8], codec: &CodecAdapter, reconstructor: &dyn Reconstructor) -> Result<CloudOutput> {
    let decoded = bundle::unpack(bytes, codec).stage(Stage::Unpack)?;
    let key_positions = surviving_positions(decoded.key_index.as_slice(), &decoded.redundant_index)
        .stage(Stage::Unpack)?;
    let input = ReconstructionInput {
        lr: &decoded.lr,
        keyframes: &decoded.keyframes,
        key_positions: &key_positions,
        key_index: &decoded.key_index,
        redundant_index: &decoded.redundant_index,
    };
    let hr_transmitted = reconstructor.reconstruct(&input).stage(Stage::Reconstruct)?;
    let (w, h) = (decoded.lr.width() * SCALE, decoded.lr.height() * SCALE);
    if hr_transmitted.len() != decoded.lr.len() || hr_transmitted.width() != w || hr_transmitted.height() != h {
        return Err(Error::Contract(format!(
            "{} returned {} frames of {}x{}, expected {} frames of {w}x{h}",
            reconstructor.name(),
            hr_transmitted.len(),
            hr_transmitted.width(),
            hr_transmitted.height(),
            decoded.lr.len()
        ))
        .in_stage(Stage::Reconstruct));
    }
    let hr = restore_redundant(&hr_transmitted, &decoded.redundant_index).stage(Stage::Restore)?;
    Ok(CloudOutput {
        decoded,
        hr_transmitted,
        hr,
        bundle_bytes: bytes.len(),
        report: None,
    })
}

/// Result of an end-node session.
#[derive(Clone, Debug)]
pub struct EndSession {
    pub output: EndOutput,
    /// REPORT body received from the cloud.
    pub report: String,
}

/// Connect to a cloud node, send one bundle, and wait for its report and ACK.
pub fn send_bundle(addr: impl ToSocketAddrs, bundle: &[u8]) -> Result<String> {
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true).ok();
    write_message(&mut stream, &Message::new(MessageType::Hello, PROTOCOL_HELLO))?;
    let hello = expect_message(&mut stream, MessageType::Hello)?;
    if hello.body != PROTOCOL_HELLO.as_bytes() {
        return Err(Error::Protocol(format!("unexpected HELLO `{}`", hello.text())));
    }
    write_message(&mut stream, &Message::new(MessageType::Bundle, bundle))?;
    let report = expect_message(&mut stream, MessageType::Report)?.text();
    if let Some(reason) = report.lines().find_map(|l| l.strip_prefix("error=")) {
        return Err(Error::Protocol(format!("cloud rejected the bundle: {reason}")));
    }
    expect_message(&mut stream, MessageType::Ack)?;
    write_message(&mut stream, &Message::empty(MessageType::Bye))?;
    Ok(report)
}

pub fn run_end_node(
    addr: impl ToSocketAddrs,
    hr: &VideoSequence,
    cfg: &EndConfig,
    codec: &CodecAdapter,
) -> Result<EndSession> {
    let output = run_end_pipeline(hr, cfg, codec)?;
    let report = send_bundle(addr, &output.packed.bytes).stage(Stage::Transport)?;
    Ok(EndSession { output, report })
}

#[derive(Clone, Debug, Default)]
pub struct CloudConfig {
    pub codec: CodecAdapter,
    /// Per-connection outputs go to `<output_dir>/conn-<n>/`.
    pub output_dir: Option<PathBuf>,
    pub ground_truth: Option<VideoSequence>,
    pub eval: EvalFlags,
}

fn render_report(out: &CloudOutput) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "frames={}", out.hr.len());
    let _ = writeln!(s, "transmitted_frames={}", out.decoded.lr.len());
    let _ = writeln!(s, "key_frames={}", out.decoded.key_index.len());
    let _ = writeln!(s, "redundant_frames={}", out.decoded.redundant_index.len());
    let _ = writeln!(s, "bundle_bytes={}", out.bundle_bytes);
    if let Some(r) = &out.report {
        if let Some(a) = &r.excluding_keys {
            let _ = writeln!(s, "mean_psnr_excluding_keys={:.6}", a.mean_psnr);
            let _ = writeln!(s, "mean_ssim_excluding_keys={:.6}", a.mean_ssim);
        }
        let _ = writeln!(s, "mean_psnr_all={:.6}", r.all_frames.mean_psnr);
        let _ = writeln!(s, "mean_ssim_all={:.6}", r.all_frames.mean_ssim);
    }
    s
}

fn cloud_work(bytes: &[u8], reconstructor: &dyn Reconstructor, cfg: &CloudConfig) -> Result<CloudOutput> {
    let mut out = process_bundle(bytes, &cfg.codec, reconstructor)?;
    if let Some(gt) = &cfg.ground_truth {
        out.report = Some(
            evaluate(
                &out.hr,
                gt,
                &out.decoded.key_index,
                &out.decoded.redundant_index,
                &cfg.eval,
            )
            .stage(Stage::Evaluate)?,
        );
    }
    Ok(out)
}

fn write_outputs(dir: &std::path::Path, out: &CloudOutput) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    crate::io::write_raw(&dir.join("hr.raw"), &out.hr)?;
    if let Some(r) = &out.report {
        r.write_csv(&dir.join("quality.csv"))?;
    }
    let report = dir.join("report.txt");
    fs::write(&report, render_report(out)).map_err(|e| Error::io(&report, e))
}

/// Serve one end-node connection to completion.
///
/// Nothing is written to disk unless the bundle decodes and reconstructs
/// successfully.
pub fn handle_connection(
    mut stream: TcpStream,
    reconstructor: &dyn Reconstructor,
    cfg: &CloudConfig,
    connection_id: usize,
) -> Result<CloudOutput> {
    let hello = expect_message(&mut stream, MessageType::Hello).stage(Stage::Transport)?;
    if hello.body != PROTOCOL_HELLO.as_bytes() {
        return Err(Error::Protocol(format!("unexpected HELLO `{}`", hello.text())).in_stage(Stage::Transport));
    }
    write_message(&mut stream, &Message::new(MessageType::Hello, PROTOCOL_HELLO))?;
    let bundle = match expect_message(&mut stream, MessageType::Bundle) {
        Ok(m) => m,
        Err(e) => {
            let _ = write_message(&mut stream, &Message::new(MessageType::Report, format!("error={e}\n")));
            return Err(e.in_stage(Stage::Transport));
        }
    };
    let out = match cloud_work(&bundle.body, reconstructor, cfg) {
        Ok(out) => out,
        Err(e) => {
            let _ = write_message(&mut stream, &Message::new(MessageType::Report, format!("error={e}\n")));
            return Err(e);
        }
    };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(&dir.join(format!("conn-{connection_id}")), &out)?;
    }
    write_message(&mut stream, &Message::new(MessageType::Report, render_report(&out)))?;
    write_message(&mut stream, &Message::empty(MessageType::Ack))?;
    // The end node says BYE; a closed stream is accepted as well.
    match read_message(&mut stream) {
        Ok(Some(m)) if m.kind == MessageType::Bye => {}
        Ok(None) => {}
        Ok(Some(m)) => log::warn!("connection {connection_id}: expected BYE, got {:?}", m.kind),
        Err(e) => log::warn!("connection {connection_id}: {e}"),
    }
    Ok(out)
}

/// Accept connections and serve each on its own thread. Stops after
/// `max_connections` connections when given; returns per-connection results in
/// accept order.
pub fn serve(
    listener: TcpListener,
    reconstructor: Arc<dyn Reconstructor>,
    cfg: Arc<CloudConfig>,
    max_connections: Option<usize>,
) -> Result<Vec<Result<CloudOutput>>> {
    let mut handles = Vec::new();
    for (id, stream) in listener.incoming().enumerate() {
        let stream = stream?;
        let (rec, cfg) = (Arc::clone(&reconstructor), Arc::clone(&cfg));
        let peer = stream.peer_addr().ok();
        handles.push(thread::spawn(move || {
            let res = handle_connection(stream, rec.as_ref(), &cfg, id + 1);
            match &res {
                Ok(out) => log::info!(
                    "connection {} from {peer:?}: {} frames reconstructed",
                    id + 1,
                    out.hr.len()
                ),
                Err(e) => log::error!("connection {} from {peer:?} aborted: {e}", id + 1),
            }
            res
        }));
        if max_connections.is_some_and(|m| id + 1 >= m) {
            break;
        }
    }
    Ok(handles
        .into_iter()
        .map(|h| {
            h.join()
                .unwrap_or_else(|_| Err(Error::Protocol("connection handler panicked".into())))
        })
        .collect())
}
