//! Frame and sequence data model.
//!
//! Frames store 8-bit samples, interleaved for color. Every external artifact
//! addresses frames with 1-based indices; the in-memory `Vec` is 0-based.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted width/height.
pub const MIN_DIM: usize = 4;

/// BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    Luma,
    Rgb,
}

impl Layout {
    pub fn channels(self) -> usize {
        match self {
            Layout::Luma => 1,
            Layout::Rgb => 3,
        }
    }

    pub fn from_channels(channels: usize) -> Result<Self> {
        match channels {
            1 => Ok(Layout::Luma),
            3 => Ok(Layout::Rgb),
            n => Err(Error::InvalidFrame(format!(
                "unsupported channel count {n}"
            ))),
        }
    }
}

/// Quantize a real-valued sample to 8 bits: clamp to [0, 255], round half away from zero.
#[inline]
pub fn quantize(v: f64) -> u8 {
    // f64::round rounds half away from zero.
    v.clamp(0.0, 255.0).round() as u8
}

#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    layout: Layout,
    data: Vec<u8>,
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("layout", &self.layout)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub fn new(width: usize, height: usize, layout: Layout, data: Vec<u8>) -> Result<Self> {
        if width < MIN_DIM || height < MIN_DIM {
            return Err(Error::InvalidFrame(format!(
                "{width}x{height} is below the {MIN_DIM}x{MIN_DIM} minimum"
            )));
        }
        let expected = width * height * layout.channels();
        if data.len() != expected {
            return Err(Error::InvalidFrame(format!(
                "expected {expected} samples for {width}x{height}x{}, got {}",
                layout.channels(),
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            layout,
            data,
        })
    }

    pub fn luma(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        Frame::new(width, height, Layout::Luma, data)
    }

    pub fn filled(width: usize, height: usize, layout: Layout, value: u8) -> Result<Self> {
        Frame::new(
            width,
            height,
            layout,
            vec![value; width * height * layout.channels()],
        )
    }

    /// Build a single-channel frame from a per-pixel function.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Frame::luma(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn channels(&self) -> usize {
        self.layout.channels()
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels() + c]
    }

    pub fn same_shape(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height && self.layout == other.layout
    }

    pub(crate) fn check_same_dims(&self, other: &Frame) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    /// Single-channel luma version of this frame; luma input is returned unchanged.
    pub fn to_luma(&self) -> Frame {
        match self.layout {
            Layout::Luma => self.clone(),
            Layout::Rgb => Frame {
                width: self.width,
                height: self.height,
                layout: Layout::Luma,
                data: rgb_to_luma(&self.data),
            },
        }
    }

    /// Luma samples without copying when the frame is already single-channel.
    pub fn luma_plane(&self) -> Cow<'_, [u8]> {
        match self.layout {
            Layout::Luma => Cow::Borrowed(&self.data),
            Layout::Rgb => Cow::Owned(rgb_to_luma(&self.data)),
        }
    }

    /// Extract one channel as a plane of `width * height` samples.
    pub fn channel_plane(&self, c: usize) -> Vec<u8> {
        let ch = self.channels();
        self.data.iter().skip(c).step_by(ch).copied().collect()
    }

    /// Reassemble a frame from per-channel planes.
    pub fn from_planes(width: usize, height: usize, planes: &[Vec<u8>]) -> Result<Self> {
        let layout = Layout::from_channels(planes.len())?;
        if layout == Layout::Luma {
            return Frame::luma(width, height, planes[0].clone());
        }
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(Error::InvalidFrame("plane size mismatch".into()));
        }
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..n {
            data.extend(planes.iter().map(|p| p[i]));
        }
        Frame::new(width, height, layout, data)
    }
}

fn rgb_to_luma(data: &[u8]) -> Vec<u8> {
    data.chunks_exact(3)
        .map(|px| {
            quantize(
                LUMA_WEIGHTS[0] * px[0] as f64
                    + LUMA_WEIGHTS[1] * px[1] as f64
                    + LUMA_WEIGHTS[2] * px[2] as f64,
            )
        })
        .collect()
}

/// Rational frame rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidArgument(format!(
                "frame rate {num}/{den} must be positive"
            )));
        }
        Ok(FrameRate { num, den })
    }

    pub const fn integer(fps: u32) -> Self {
        FrameRate { num: fps, den: 1 }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for FrameRate {
    fn default() -> Self {
        FrameRate::integer(25)
    }
}

impl fmt::Display for FrameRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl std::str::FromStr for FrameRate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("invalid frame rate `{s}`"));
        if let Some((n, d)) = s.split_once('/') {
            let num = n.trim().parse().map_err(|_| bad())?;
            let den = d.trim().parse().map_err(|_| bad())?;
            return FrameRate::new(num, den);
        }
        if let Ok(n) = s.parse::<u32>() {
            return FrameRate::new(n, 1);
        }
        let v: f64 = s.parse().map_err(|_| bad())?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(bad());
        }
        // Decimal rates are kept to millisecond precision.
        FrameRate::new((v * 1000.0).round() as u32, 1000)
    }
}

/// Ordered frames sharing one shape, plus the frame rate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VideoSequence {
    frames: Vec<Frame>,
    fps: FrameRate,
}

impl VideoSequence {
    pub fn new(frames: Vec<Frame>, fps: FrameRate) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("a sequence needs at least one frame".into()))?;
        if let Some((i, f)) = frames
            .iter()
            .enumerate()
            .find(|(_, f)| !f.same_shape(first))
        {
            return Err(Error::DimensionMismatch(format!(
                "frame {} is {}x{}x{}, frame 1 is {}x{}x{}",
                i + 1,
                f.width(),
                f.height(),
                f.channels(),
                first.width(),
                first.height(),
                first.channels()
            )));
        }
        Ok(VideoSequence { frames, fps })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> FrameRate {
        self.fps
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn layout(&self) -> Layout {
        self.frames[0].layout()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    /// Frame at 1-based position `index`.
    pub fn frame(&self, index: usize) -> Option<&Frame> {
        index.checked_sub(1).and_then(|i| self.frames.get(i))
    }

    pub fn to_luma(&self) -> VideoSequence {
        VideoSequence {
            frames: self.frames.iter().map(Frame::to_luma).collect(),
            fps: self.fps,
        }
    }
}
