//! Cloud-side super-resolution reconstructors.
//!
//! A reconstructor maps the surviving LR frames plus the decoded key frames to
//! an HR sequence of the same length. Redundant positions are filled in later
//! by copy-back, so reconstructors never see them.
//!
//! The external reconstructor exchanges files through a working directory:
//!
//! * `lr.raw` + `lr.raw.hdr`: surviving LR frames (raw planar 4:2:0)
//! * `key_NNNNNN.png`: key frames, named by their original 1-based index
//! * `indices.txt`: line 1 the key indices, line 2 the redundant indices, both
//!   comma-separated original 1-based positions. The LR position of original
//!   frame `i` is `i` minus the number of redundant indices below `i`.
//! * `hr.raw` (written by the command): the HR frames, raw planar 4:2:0 at
//!   4x the LR size, one per surviving LR frame.

use std::fs;
use std::path::{Path, PathBuf};

use crate::codec::run_shell;
use crate::error::{Error, Result};
use crate::frame::{Frame, Layout, VideoSequence};
use crate::io;
use crate::keyframe::KeyFrameIndex;
use crate::redundancy::RedundancyIndex;
use crate::resample::{upsample_sequence, SCALE};

pub struct ReconstructionInput<'a> {
    /// Surviving LR frames.
    pub lr: &'a VideoSequence,
    /// Decoded HR key frames, in key-index order.
    pub keyframes: &'a [Frame],
    /// Key positions in the surviving sequence (1-based).
    pub key_positions: &'a [usize],
    /// Key positions in the original sequence.
    pub key_index: &'a KeyFrameIndex,
    pub redundant_index: &'a RedundancyIndex,
}

impl ReconstructionInput<'_> {
    fn validate(&self) -> Result<()> {
        if self.keyframes.len() != self.key_positions.len() {
            return Err(Error::InvalidArgument(format!(
                "{} key frames for {} key positions",
                self.keyframes.len(),
                self.key_positions.len()
            )));
        }
        if let Some(&p) = self
            .key_positions
            .iter()
            .find(|&&p| p == 0 || p > self.lr.len())
        {
            return Err(Error::InvalidArgument(format!(
                "key position {p} outside the {} surviving frames",
                self.lr.len()
            )));
        }
        let (w, h) = (self.lr.width() * SCALE, self.lr.height() * SCALE);
        if let Some(k) = self
            .keyframes
            .iter()
            .find(|k| k.width() != w || k.height() != h || k.layout() != self.lr.layout())
        {
            return Err(Error::DimensionMismatch(format!(
                "key frame is {}x{}, expected {w}x{h}",
                k.width(),
                k.height()
            )));
        }
        Ok(())
    }
}

pub trait Reconstructor: Send + Sync {
    fn name(&self) -> &str;

    fn reconstruct(&self, input: &ReconstructionInput<'_>) -> Result<VideoSequence>;
}

/// Bicubic upsampling with key frames substituted verbatim.
#[derive(Clone, Copy, Debug, Default)]
pub struct ClassicalReconstructor;

impl Reconstructor for ClassicalReconstructor {
    fn name(&self) -> &str {
        "classical"
    }

    fn reconstruct(&self, input: &ReconstructionInput<'_>) -> Result<VideoSequence> {
        classical_reconstruct(input.lr, input.keyframes, input.key_positions)
    }
}

pub fn classical_reconstruct(
    lr: &VideoSequence,
    keyframes: &[Frame],
    key_positions: &[usize],
) -> Result<VideoSequence> {
    let ki = KeyFrameIndex::new(vec![1], 1)?;
    let ri = RedundancyIndex::empty();
    ReconstructionInput {
        lr,
        keyframes,
        key_positions,
        key_index: &ki,
        redundant_index: &ri,
    }
    .validate()?;
    let mut frames = upsample_sequence(lr).into_frames();
    for (&p, k) in key_positions.iter().zip(keyframes) {
        frames[p - 1] = k.clone();
    }
    VideoSequence::new(frames, lr.fps())
}

/// Runs a command template against the working-directory contract above.
///
/// Placeholders: `{workdir}`, `{lr}`, `{hr}`, `{indices}`, `{scale}`.
#[derive(Clone, Debug)]
pub struct ExternalReconstructor {
    pub command: String,
    /// Keep working directories under this path instead of a temporary one.
    pub keep_dir: Option<PathBuf>,
}

impl ExternalReconstructor {
    pub fn new(command: impl Into<String>) -> Self {
        ExternalReconstructor {
            command: command.into(),
            keep_dir: None,
        }
    }
}

fn join_indices(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

/// Write the exchange files for an external reconstructor into `dir`.
pub fn write_exchange_dir(dir: &Path, input: &ReconstructionInput<'_>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    io::write_raw(&dir.join("lr.raw"), input.lr)?;
    for (k, &orig) in input.keyframes.iter().zip(input.key_index.as_slice()) {
        io::write_png(&dir.join(format!("key_{orig:06}.png")), k)?;
    }
    let indices = dir.join("indices.txt");
    fs::write(
        &indices,
        format!(
            "{}\n{}\n",
            join_indices(input.key_index.as_slice()),
            join_indices(input.redundant_index.as_slice())
        ),
    )
    .map_err(|e| Error::io(&indices, e))
}

pub fn external_reconstruct(input: &ReconstructionInput<'_>, command: &str, workdir: &Path) -> Result<VideoSequence> {
    input.validate()?;
    if input.key_index.len() != input.keyframes.len() {
        return Err(Error::InvalidArgument("key index and key frames disagree".into()));
    }
    if input.lr.layout() != Layout::Luma {
        return Err(Error::InvalidArgument(
            "the external reconstructor exchange carries luma only".into(),
        ));
    }
    write_exchange_dir(workdir, input)?;
    let hr_path = workdir.join("hr.raw");
    let rendered = command
        .replace("{workdir}", &quote(workdir))
        .replace("{lr}", &quote(&workdir.join("lr.raw")))
        .replace("{hr}", &quote(&hr_path))
        .replace("{indices}", &quote(&workdir.join("indices.txt")))
        .replace("{scale}", &SCALE.to_string());
    run_shell(&rendered)?;

    let (w, h) = (input.lr.width() * SCALE, input.lr.height() * SCALE);
    let bytes = fs::read(&hr_path)
        .map_err(|e| Error::Contract(format!("no hr.raw produced: {e}")))?;
    let frame_bytes = io::raw_frame_bytes(w, h);
    if bytes.len() != frame_bytes * input.lr.len() {
        return Err(Error::Contract(format!(
            "hr.raw holds {} bytes, expected {} frames of {w}x{h} ({} bytes)",
            bytes.len(),
            input.lr.len(),
            frame_bytes * input.lr.len()
        )));
    }
    let hdr = io::sidecar_path(&hr_path);
    if hdr.exists() {
        let header = io::read_raw_header(&hr_path)?;
        if header.width != w || header.height != h || header.frames != input.lr.len() {
            return Err(Error::Contract(format!(
                "hr.raw.hdr declares {}x{}x{}, expected {w}x{h}x{}",
                header.width,
                header.height,
                header.frames,
                input.lr.len()
            )));
        }
    }
    io::decode_raw(&bytes, w, h, input.lr.fps())
}

impl Reconstructor for ExternalReconstructor {
    fn name(&self) -> &str {
        "external"
    }

    fn reconstruct(&self, input: &ReconstructionInput<'_>) -> Result<VideoSequence> {
        match &self.keep_dir {
            Some(dir) => external_reconstruct(input, &self.command, dir),
            None => {
                let tmp = tempfile::tempdir()?;
                external_reconstruct(input, &self.command, tmp.path())
            }
        }
    }
}
