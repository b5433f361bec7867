//! Payload codecs for the stream bundle.
//!
//! `Raw` stores samples verbatim. `External` shells out to configured command
//! templates over temporary files. Templates are run with `sh -c` after
//! placeholder substitution:
//!
//! | placeholder  | value                                           |
//! |--------------|-------------------------------------------------|
//! | `{input}`    | input file (quoted)                             |
//! | `{output}`   | file the command must write (quoted)            |
//! | `{width}`    | frame width                                     |
//! | `{height}`   | frame height                                    |
//! | `{fps}`      | frame rate as `num/den` or integer              |
//! | `{frames}`   | frame count (video commands)                    |
//! | `{pix_fmt}`  | `gray` or `rgb24`                               |
//! | `{channels}` | 1 or 3                                          |
//!
//! Video encoders read interleaved `rawvideo` (`pix_fmt`, frames
//! concatenated); video decoders must write the same. Image encoders read a
//! PNG; image decoders must write a PNG.

use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, FrameRate, Layout, VideoSequence};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum CodecId {
    Raw = 0,
    External = 1,
}

impl CodecId {
    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(CodecId::Raw),
            1 => Ok(CodecId::External),
            other => Err(Error::Malformed(format!("unknown codec id {other}"))),
        }
    }
}

/// Command templates for an external codec.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCodec {
    pub video_encode: String,
    pub video_decode: String,
    pub image_encode: String,
    pub image_decode: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum CodecAdapter {
    #[default]
    Raw,
    External(ExternalCodec),
}

struct Shape {
    width: usize,
    height: usize,
    layout: Layout,
    fps: FrameRate,
    frames: usize,
}

fn pix_fmt(layout: Layout) -> &'static str {
    match layout {
        Layout::Luma => "gray",
        Layout::Rgb => "rgb24",
    }
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

fn render(template: &str, input: &Path, output: &Path, shape: &Shape) -> String {
    template
        .replace("{input}", &shell_quote(input))
        .replace("{output}", &shell_quote(output))
        .replace("{width}", &shape.width.to_string())
        .replace("{height}", &shape.height.to_string())
        .replace("{fps}", &shape.fps.to_string())
        .replace("{frames}", &shape.frames.to_string())
        .replace("{pix_fmt}", pix_fmt(shape.layout))
        .replace("{channels}", &shape.layout.channels().to_string())
}

/// Run a rendered command with `sh -c`, failing on nonzero exit.
pub(crate) fn run_shell(command: &str) -> Result<()> {
    log::debug!("running `{command}`");
    let out = Command::new("sh")
        .arg("-c")
        .arg(command)
        .output()
        .map_err(|e| Error::External(format!("cannot spawn `{command}`: {e}")))?;
    if !out.status.success() {
        return Err(Error::External(format!(
            "`{command}` exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    Ok(())
}

fn run_template(template: &str, name: &str, input_bytes: &[u8], input_ext: &str, output_ext: &str, shape: &Shape) -> Result<Vec<u8>> {
    if template.trim().is_empty() {
        return Err(Error::InvalidArgument(format!("codec.{name} is not configured")));
    }
    let dir = tempfile::tempdir()?;
    let input = dir.path().join(format!("input.{input_ext}"));
    let output = dir.path().join(format!("output.{output_ext}"));
    std::fs::write(&input, input_bytes).map_err(|e| Error::io(&input, e))?;
    run_shell(&render(template, &input, &output, shape))?;
    std::fs::read(&output)
        .map_err(|e| Error::External(format!("codec.{name} produced no output: {e}")))
}

impl CodecAdapter {
    pub fn video_id(&self) -> CodecId {
        match self {
            CodecAdapter::Raw => CodecId::Raw,
            CodecAdapter::External(_) => CodecId::External,
        }
    }

    pub fn image_id(&self) -> CodecId {
        self.video_id()
    }

    fn external(&self, id: CodecId) -> Result<&ExternalCodec> {
        match self {
            CodecAdapter::External(ext) => Ok(ext),
            CodecAdapter::Raw => Err(Error::InvalidArgument(format!(
                "payload uses codec {id:?} but no external codec is configured"
            ))),
        }
    }

    pub fn encode_video(&self, seq: &VideoSequence) -> Result<Vec<u8>> {
        let raw: Vec<u8> = seq.frames().iter().flat_map(|f| f.data().iter().copied()).collect();
        match self {
            CodecAdapter::Raw => Ok(raw),
            CodecAdapter::External(ext) => run_template(
                &ext.video_encode,
                "video.encode",
                &raw,
                "rgb",
                "bin",
                &Shape {
                    width: seq.width(),
                    height: seq.height(),
                    layout: seq.layout(),
                    fps: seq.fps(),
                    frames: seq.len(),
                },
            ),
        }
    }

    /// Decode a video payload produced with codec `id`.
    pub fn decode_video(
        &self,
        id: CodecId,
        payload: &[u8],
        width: usize,
        height: usize,
        layout: Layout,
        fps: FrameRate,
        frames: usize,
    ) -> Result<VideoSequence> {
        let raw = match id {
            CodecId::Raw => payload.to_vec(),
            CodecId::External => run_template(
                &self.external(id)?.video_decode,
                "video.decode",
                payload,
                "bin",
                "rgb",
                &Shape {
                    width,
                    height,
                    layout,
                    fps,
                    frames,
                },
            )?,
        };
        let frame_bytes = width * height * layout.channels();
        if raw.len() != frame_bytes * frames {
            return Err(Error::Malformed(format!(
                "video payload decodes to {} bytes, expected {frames} frames of {frame_bytes}",
                raw.len()
            )));
        }
        let out = raw
            .chunks_exact(frame_bytes)
            .map(|c| Frame::new(width, height, layout, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        VideoSequence::new(out, fps)
    }

    pub fn encode_image(&self, frame: &Frame) -> Result<Vec<u8>> {
        match self {
            CodecAdapter::Raw => Ok(frame.data().to_vec()),
            CodecAdapter::External(ext) => {
                let mut png = Vec::new();
                io::frame_to_image(frame)
                    .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)?;
                run_template(
                    &ext.image_encode,
                    "image.encode",
                    &png,
                    "png",
                    "bin",
                    &Shape {
                        width: frame.width(),
                        height: frame.height(),
                        layout: frame.layout(),
                        fps: FrameRate::default(),
                        frames: 1,
                    },
                )
            }
        }
    }

    pub fn decode_image(&self, id: CodecId, payload: &[u8], width: usize, height: usize, layout: Layout) -> Result<Frame> {
        let frame = match id {
            CodecId::Raw => Frame::new(width, height, layout, payload.to_vec())
                .map_err(|e| Error::Malformed(format!("raw key frame: {e}")))?,
            CodecId::External => {
                let png = run_template(
                    &self.external(id)?.image_decode,
                    "image.decode",
                    payload,
                    "bin",
                    "png",
                    &Shape {
                        width,
                        height,
                        layout,
                        fps: FrameRate::default(),
                        frames: 1,
                    },
                )?;
                let img = image::load_from_memory_with_format(&png, image::ImageFormat::Png)?;
                let f = io::image_to_frame(img)?;
                match (layout, f.layout()) {
                    (Layout::Luma, Layout::Rgb) => f.to_luma(),
                    _ => f,
                }
            }
        };
        if frame.width() != width || frame.height() != height || frame.layout() != layout {
            return Err(Error::Malformed(format!(
                "key frame decodes to {}x{}x{}, expected {width}x{height}x{}",
                frame.width(),
                frame.height(),
                frame.channels(),
                layout.channels()
            )));
        }
        Ok(frame)
    }
}
