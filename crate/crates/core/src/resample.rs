//! Bicubic 4x resampling.
//!
//! The kernel is the Keys cubic with `a = -0.5`. Grid alignment uses sample
//! centers: LR sample `x` sits at HR coordinate `4x + 1.5`, so downsampling
//! draws on the HR samples `4x .. 4x+3` with weights `W(1.5), W(0.5), W(0.5),
//! W(1.5)`. Out-of-range taps are clamped to the edge. Both directions are
//! evaluated separably in `f64` and quantized only at the 8-bit boundary.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frame::{quantize, Frame, VideoSequence};

pub const SCALE: usize = 4;

/// Keys sharpness parameter.
pub const KERNEL_A: f64 = -0.5;

/// Kernel support radius in samples.
pub const KERNEL_RADIUS: f64 = 2.0;

pub fn kernel_weight(t: f64) -> f64 {
    let a = KERNEL_A;
    let t = t.abs();
    if t <= 1.0 {
        ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
    } else {
        0.0
    }
}

/// Real-valued frame used between resampling and quantization.
#[derive(Clone, Debug, PartialEq)]
pub struct RealFrame {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Interleaved samples, same order as [`Frame::data`].
    pub data: Vec<f64>,
}

impl RealFrame {
    pub fn sample(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn quantize(&self, layout: crate::frame::Layout) -> Result<Frame> {
        Frame::new(
            self.width,
            self.height,
            layout,
            self.data.iter().map(|&v| quantize(v)).collect(),
        )
    }
}

/// Four source taps for one output coordinate.
#[derive(Clone, Copy, Debug)]
struct Taps {
    index: [usize; 4],
    weight: [f64; 4],
}

fn clamp_index(n: isize, len: usize) -> usize {
    n.clamp(0, len as isize - 1) as usize
}

fn taps_for(center: f64, src_len: usize) -> Taps {
    let base = center.floor() as isize - 1;
    let mut index = [0; 4];
    let mut weight = [0.0; 4];
    for k in 0..4 {
        let n = base + k as isize;
        index[k] = clamp_index(n, src_len);
        weight[k] = kernel_weight(center - n as f64);
    }
    Taps { index, weight }
}

/// HR coordinate of the center of LR sample `i`.
pub fn lr_to_hr_coord(i: usize) -> f64 {
    SCALE as f64 * i as f64 + (SCALE as f64 - 1.0) / 2.0
}

/// LR coordinate of the center of HR sample `i`.
pub fn hr_to_lr_coord(i: usize) -> f64 {
    (i as f64 + 0.5) / SCALE as f64 - 0.5
}

fn separable(
    src: &Frame,
    out_w: usize,
    out_h: usize,
    x_taps: &[Taps],
    y_taps: &[Taps],
) -> RealFrame {
    let ch = src.channels();
    let (w, h) = (src.width(), src.height());
    let data = src.data();

    // Horizontal pass: out_w x h.
    let mut tmp = vec![0.0; out_w * h * ch];
    for y in 0..h {
        let row = &data[y * w * ch..(y + 1) * w * ch];
        let out_row = &mut tmp[y * out_w * ch..(y + 1) * out_w * ch];
        for (x, t) in x_taps.iter().enumerate() {
            for c in 0..ch {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += row[t.index[k] * ch + c] as f64 * t.weight[k];
                }
                out_row[x * ch + c] = acc;
            }
        }
    }

    // Vertical pass: out_w x out_h.
    let stride = out_w * ch;
    let mut out = vec![0.0; out_w * out_h * ch];
    for (y, t) in y_taps.iter().enumerate() {
        let out_row = &mut out[y * stride..(y + 1) * stride];
        for k in 0..4 {
            let src_row = &tmp[t.index[k] * stride..(t.index[k] + 1) * stride];
            let wk = t.weight[k];
            for (o, s) in out_row.iter_mut().zip(src_row) {
                *o += s * wk;
            }
        }
    }

    RealFrame {
        width: out_w,
        height: out_h,
        channels: ch,
        data: out,
    }
}

/// Real-valued 4x downsample.
pub fn downsample_4x_real(frame: &Frame) -> Result<RealFrame> {
    let (w, h) = (frame.width(), frame.height());
    if w % SCALE != 0 || h % SCALE != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{w}x{h} is not divisible by {SCALE}"
        )));
    }
    let (ow, oh) = (w / SCALE, h / SCALE);
    let x_taps: Vec<_> = (0..ow).map(|x| taps_for(lr_to_hr_coord(x), w)).collect();
    let y_taps: Vec<_> = (0..oh).map(|y| taps_for(lr_to_hr_coord(y), h)).collect();
    Ok(separable(frame, ow, oh, &x_taps, &y_taps))
}

pub fn downsample_4x(frame: &Frame) -> Result<Frame> {
    downsample_4x_real(frame)?.quantize(frame.layout())
}

/// Real-valued 4x upsample.
pub fn upsample_4x_real(frame: &Frame) -> RealFrame {
    let (w, h) = (frame.width(), frame.height());
    let (ow, oh) = (w * SCALE, h * SCALE);
    let x_taps: Vec<_> = (0..ow).map(|x| taps_for(hr_to_lr_coord(x), w)).collect();
    let y_taps: Vec<_> = (0..oh).map(|y| taps_for(hr_to_lr_coord(y), h)).collect();
    separable(frame, ow, oh, &x_taps, &y_taps)
}

pub fn upsample_4x(frame: &Frame) -> Frame {
    upsample_4x_real(frame)
        .quantize(frame.layout())
        .expect("upsampled shape is valid")
}

pub fn downsample_sequence(seq: &VideoSequence) -> Result<VideoSequence> {
    let frames = seq
        .frames()
        .par_iter()
        .map(downsample_4x)
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(frames, seq.fps())
}

pub fn upsample_sequence(seq: &VideoSequence) -> VideoSequence {
    let frames = seq.frames().par_iter().map(upsample_4x).collect();
    VideoSequence::new(frames, seq.fps()).expect("uniform shapes")
}
