//! Sequence persistence.
//!
//! Two formats are supported:
//!
//! * Raw planar 8-bit 4:2:0 (`*.raw` / `*.yuv`) with a sidecar text header at
//!   `<file>.hdr` holding `width=`, `height=`, `fps=`, `frames=` lines. Frames
//!   are stored frame-major, Y plane then Cb then Cr. Chroma planes are
//!   `ceil(w/2) x ceil(h/2)`. The reader returns luma frames; the writer stores
//!   the luma of each frame and neutral (128) chroma.
//! * A directory of lossless PNG images named `000001.png`, `000002.png`, ...
//!   (1-based, zero-padded to 6 digits), with an optional `sequence.hdr`
//!   carrying `fps=`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameRate, Layout, VideoSequence};

const NEUTRAL_CHROMA: u8 = 128;
const DIR_HEADER: &str = "sequence.hdr";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceFormat {
    /// Raw planar 4:2:0 with sidecar header.
    Raw,
    /// Directory of PNG images.
    ImageDir,
}

impl SequenceFormat {
    /// Directories are image sequences, everything else is raw.
    pub fn detect(path: &Path) -> Self {
        if path.is_dir() {
            SequenceFormat::ImageDir
        } else {
            SequenceFormat::Raw
        }
    }
}

impl std::str::FromStr for SequenceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" | "yuv" => Ok(SequenceFormat::Raw),
            "dir" | "png" | "image-dir" => Ok(SequenceFormat::ImageDir),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

/// Contents of the raw sidecar header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawHeader {
    pub width: usize,
    pub height: usize,
    pub fps: FrameRate,
    pub frames: usize,
}

impl RawHeader {
    pub fn frame_bytes(&self) -> usize {
        raw_frame_bytes(self.width, self.height)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut width, mut height, mut fps, mut frames) = (None, None, None, None);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Malformed(format!("header line `{line}`")))?;
            let value = value.trim();
            let num = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| Error::Malformed(format!("header value `{line}`")))
            };
            match key.trim() {
                "width" => width = Some(num(value)?),
                "height" => height = Some(num(value)?),
                "frames" => frames = Some(num(value)?),
                "fps" => fps = Some(value.parse::<FrameRate>()?),
                _ => {}
            }
        }
        let missing = |k: &str| Error::Malformed(format!("header is missing `{k}=`"));
        Ok(RawHeader {
            width: width.ok_or_else(|| missing("width"))?,
            height: height.ok_or_else(|| missing("height"))?,
            fps: fps.unwrap_or_default(),
            frames: frames.ok_or_else(|| missing("frames"))?,
        })
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width={}", self.width);
        let _ = writeln!(s, "height={}", self.height);
        let _ = writeln!(s, "fps={}", self.fps);
        let _ = writeln!(s, "frames={}", self.frames);
        s
    }
}

pub fn raw_frame_bytes(width: usize, height: usize) -> usize {
    let (cw, ch) = (width.div_ceil(2), height.div_ceil(2));
    width * height + 2 * cw * ch
}

/// Sidecar header path for a raw file: `<file>.hdr`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

pub fn read_raw_header(path: &Path) -> Result<RawHeader> {
    let hdr = sidecar_path(path);
    let text = fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    RawHeader::parse(&text)
}

/// Decode raw 4:2:0 bytes into luma frames.
pub fn decode_raw(bytes: &[u8], width: usize, height: usize, fps: FrameRate) -> Result<VideoSequence> {
    let frame_bytes = raw_frame_bytes(width, height);
    if bytes.is_empty() || !bytes.len().is_multiple_of(frame_bytes) {
        return Err(Error::Truncated(format!(
            "{} bytes is not a whole number of {width}x{height} frames ({frame_bytes} bytes each)",
            bytes.len()
        )));
    }
    let frames = bytes
        .chunks_exact(frame_bytes)
        .map(|chunk| Frame::luma(width, height, chunk[..width * height].to_vec()))
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(frames, fps)
}

/// Encode a sequence as raw 4:2:0 bytes.
pub fn encode_raw(seq: &VideoSequence) -> Vec<u8> {
    let (w, h) = (seq.width(), seq.height());
    let chroma = 2 * w.div_ceil(2) * h.div_ceil(2);
    let mut out = Vec::with_capacity(seq.len() * raw_frame_bytes(w, h));
    for f in seq.frames() {
        out.extend_from_slice(&f.luma_plane());
        out.resize(out.len() + chroma, NEUTRAL_CHROMA);
    }
    out
}

pub fn read_raw(path: &Path) -> Result<VideoSequence> {
    let header = read_raw_header(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != header.frames * header.frame_bytes() {
        if bytes.len() % header.frame_bytes() != 0 {
            return Err(Error::Truncated(format!(
                "{}: {} bytes is not a multiple of the {}-byte frame size",
                path.display(),
                bytes.len(),
                header.frame_bytes()
            )));
        }
        return Err(Error::Malformed(format!(
            "{}: header declares {} frames, file holds {}",
            path.display(),
            header.frames,
            bytes.len() / header.frame_bytes()
        )));
    }
    decode_raw(&bytes, header.width, header.height, header.fps)
}

pub fn write_raw(path: &Path, seq: &VideoSequence) -> Result<()> {
    let header = RawHeader {
        width: seq.width(),
        height: seq.height(),
        fps: seq.fps(),
        frames: seq.len(),
    };
    fs::write(path, encode_raw(seq)).map_err(|e| Error::io(path, e))?;
    let hdr = sidecar_path(path);
    fs::write(&hdr, header.render()).map_err(|e| Error::io(&hdr, e))
}

pub fn image_name(index: usize) -> String {
    format!("{index:06}.png")
}

pub fn frame_to_image(frame: &Frame) -> DynamicImage {
    let (w, h) = (frame.width() as u32, frame.height() as u32);
    match frame.layout() {
        Layout::Luma => DynamicImage::ImageLuma8(
            GrayImage::from_raw(w, h, frame.data().to_vec()).expect("frame size is validated"),
        ),
        Layout::Rgb => DynamicImage::ImageRgb8(
            RgbImage::from_raw(w, h, frame.data().to_vec()).expect("frame size is validated"),
        ),
    }
}

pub fn image_to_frame(img: DynamicImage) -> Result<Frame> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(g) => Frame::luma(w, h, g.into_raw()),
        DynamicImage::ImageRgb8(rgb) => Frame::new(w, h, Layout::Rgb, rgb.into_raw()),
        DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
            Frame::luma(w, h, img.to_luma8().into_raw())
        }
        other => Frame::new(w, h, Layout::Rgb, other.to_rgb8().into_raw()),
    }
}

pub fn write_png(path: &Path, frame: &Frame) -> Result<()> {
    frame_to_image(frame)
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(Error::from)
}

pub fn read_image(path: &Path) -> Result<Frame> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image(other),
    })?;
    image_to_frame(img)
}

pub fn read_image_dir(dir: &Path) -> Result<VideoSequence> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indexed = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".png")) else {
            continue;
        };
        if stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()) {
            indexed.push((stem.parse::<usize>().expect("six digits"), entry.path()));
        }
    }
    indexed.sort();
    if indexed.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{}: no numbered PNG frames",
            dir.display()
        )));
    }
    for (expected, (index, path)) in (1..).zip(&indexed) {
        if *index != expected {
            return Err(Error::Malformed(format!(
                "{}: expected frame {expected}, found {}",
                dir.display(),
                path.display()
            )));
        }
    }
    let frames = indexed
        .iter()
        .map(|(_, p)| read_image(p))
        .collect::<Result<Vec<_>>>()?;
    let hdr = dir.join(DIR_HEADER);
    let fps = if hdr.exists() {
        let text = fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
        text.lines()
            .filter_map(|l| l.trim().strip_prefix("fps="))
            .next_back()
            .map(str::parse::<FrameRate>)
            .transpose()?
            .unwrap_or_default()
    } else {
        FrameRate::default()
    };
    VideoSequence::new(frames, fps)
}

pub fn write_image_dir(dir: &Path, seq: &VideoSequence) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in seq.frames().iter().enumerate() {
        write_png(&dir.join(image_name(i + 1)), f)?;
    }
    let hdr = dir.join(DIR_HEADER);
    fs::write(&hdr, format!("fps={}\n", seq.fps())).map_err(|e| Error::io(&hdr, e))
}

pub fn read_sequence(path: &Path, format: Option<SequenceFormat>) -> Result<VideoSequence> {
    match format.unwrap_or_else(|| SequenceFormat::detect(path)) {
        SequenceFormat::Raw => read_raw(path),
        SequenceFormat::ImageDir => read_image_dir(path),
    }
}

pub fn write_sequence(path: &Path, seq: &VideoSequence, format: SequenceFormat) -> Result<()> {
    match format {
        SequenceFormat::Raw => write_raw(path, seq),
        SequenceFormat::ImageDir => write_image_dir(path, seq),
    }
}
