//! Redundant-frame detection, elimination, and copy-back restoration.
//!
//! A frame is redundant when, compared with the most recent non-redundant
//! frame, both its global luma MSE is at most `tau_int` and the MSE over its
//! motion mask (pixels whose absolute luma difference exceeds `m`) is at most
//! `tau_mot`. An empty mask has motion MSE 0. Frame 1 is never redundant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, VideoSequence};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RedundancyConfig {
    pub tau_int: f64,
    pub tau_mot: f64,
    pub m: u8,
}

impl Default for RedundancyConfig {
    fn default() -> Self {
        RedundancyConfig {
            tau_int: 0.5,
            tau_mot: 15.0,
            m: 2,
        }
    }
}

impl RedundancyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_int >= 0.0) || !(self.tau_mot >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "redundancy thresholds must be non-negative (tau_int={}, tau_mot={})",
                self.tau_int, self.tau_mot
            )));
        }
        Ok(())
    }
}

/// Sorted, unique 1-based positions of redundant frames in a `T`-frame sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedundancyIndex(Vec<usize>);

impl RedundancyIndex {
    pub fn empty() -> Self {
        RedundancyIndex(Vec::new())
    }

    /// Validate and wrap indices for a sequence of `total` frames.
    pub fn new(indices: Vec<usize>, total: usize) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i < 2 || i > total) {
            return Err(Error::InvalidArgument(format!(
                "redundant index {bad} outside [2, {total}]"
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "redundant indices must be strictly increasing".into(),
            ));
        }
        Ok(RedundancyIndex(indices))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    /// Redundancy flag per 0-based frame position for a `total`-frame sequence.
    pub fn mask(&self, total: usize) -> Vec<bool> {
        let mut m = vec![false; total];
        for &i in &self.0 {
            m[i - 1] = true;
        }
        m
    }
}

/// Pixels whose luma difference exceeds the threshold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotionMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
    count: usize,
}

impl MotionMask {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

fn mask_from_luma(cur: &[u8], last: &[u8], width: usize, height: usize, m: u8) -> MotionMask {
    let bits: Vec<bool> = cur
        .iter()
        .zip(last)
        .map(|(&a, &b)| a.abs_diff(b) > m)
        .collect();
    let count = bits.iter().filter(|&&b| b).count();
    MotionMask {
        width,
        height,
        bits,
        count,
    }
}

pub fn motion_mask(cur: &Frame, last: &Frame, m: u8) -> Result<MotionMask> {
    cur.check_same_dims(last)?;
    Ok(mask_from_luma(
        &cur.luma_plane(),
        &last.luma_plane(),
        cur.width(),
        cur.height(),
        m,
    ))
}

fn masked_mse(cur: &[u8], last: &[u8], mask: &[bool], count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    let sse: u64 = cur
        .iter()
        .zip(last)
        .zip(mask)
        .filter(|(_, &on)| on)
        .map(|((&a, &b), _)| {
            let d = a.abs_diff(b) as u64;
            d * d
        })
        .sum();
    sse as f64 / count as f64
}

/// Luma MSE restricted to the mask; 0 for an empty mask.
pub fn motion_region_mse(cur: &Frame, last: &Frame, mask: &MotionMask) -> Result<f64> {
    cur.check_same_dims(last)?;
    if mask.width != cur.width() || mask.height != cur.height() {
        return Err(Error::DimensionMismatch(format!(
            "mask is {}x{}, frames are {}x{}",
            mask.width,
            mask.height,
            cur.width(),
            cur.height()
        )));
    }
    Ok(masked_mse(
        &cur.luma_plane(),
        &last.luma_plane(),
        &mask.bits,
        mask.count,
    ))
}

/// Outcome of comparing a candidate frame against its reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RedundancyTest {
    pub global_mse: f64,
    pub motion_mse: f64,
    pub mask_count: usize,
    pub redundant: bool,
}

fn test_luma(cur: &[u8], last: &[u8], width: usize, height: usize, cfg: &RedundancyConfig) -> RedundancyTest {
    let sse: u64 = cur
        .iter()
        .zip(last)
        .map(|(&a, &b)| {
            let d = a.abs_diff(b) as u64;
            d * d
        })
        .sum();
    let global_mse = sse as f64 / (width * height) as f64;
    let mask = mask_from_luma(cur, last, width, height, cfg.m);
    let motion_mse = masked_mse(cur, last, &mask.bits, mask.count);
    RedundancyTest {
        global_mse,
        motion_mse,
        mask_count: mask.count,
        redundant: global_mse <= cfg.tau_int && motion_mse <= cfg.tau_mot,
    }
}

/// Evaluate both criteria for `cur` against `reference`.
pub fn redundancy_test(cur: &Frame, reference: &Frame, cfg: &RedundancyConfig) -> Result<RedundancyTest> {
    cur.check_same_dims(reference)?;
    Ok(test_luma(
        &cur.luma_plane(),
        &reference.luma_plane(),
        cur.width(),
        cur.height(),
        cfg,
    ))
}

pub fn detect_redundant(seq: &VideoSequence, cfg: &RedundancyConfig) -> Result<RedundancyIndex> {
    detect_redundant_with_exempt(seq, cfg, &[])
}

/// Sequential scan where the 1-based positions in `exempt` are never marked
/// redundant; exempt frames become the new reference like any other
/// non-redundant frame.
pub fn detect_redundant_with_exempt(
    seq: &VideoSequence,
    cfg: &RedundancyConfig,
    exempt: &[usize],
) -> Result<RedundancyIndex> {
    cfg.validate()?;
    let (w, h) = (seq.width(), seq.height());
    let luma: Vec<_> = seq.frames().iter().map(Frame::luma_plane).collect();
    let mut reference = 0usize;
    let mut out = Vec::new();
    for t in 1..seq.len() {
        if exempt.contains(&(t + 1)) {
            reference = t;
            continue;
        }
        if test_luma(&luma[t], &luma[reference], w, h, cfg).redundant {
            out.push(t + 1);
        } else {
            reference = t;
        }
    }
    RedundancyIndex::new(out, seq.len())
}

/// Remove the frames at the given positions, preserving order.
pub fn drop_redundant(seq: &VideoSequence, idx: &RedundancyIndex) -> Result<VideoSequence> {
    let total = seq.len();
    if let Some(&bad) = idx.as_slice().iter().find(|&&i| i > total) {
        return Err(Error::InvalidArgument(format!(
            "redundant index {bad} exceeds sequence length {total}"
        )));
    }
    let redundant = idx.mask(total);
    let kept = seq
        .frames()
        .iter()
        .zip(redundant)
        .filter(|(_, r)| !r)
        .map(|(f, _)| f.clone())
        .collect();
    VideoSequence::new(kept, seq.fps())
}

/// Refill redundant positions by copying the nearest preceding non-redundant frame.
pub fn restore_redundant(seq: &VideoSequence, idx: &RedundancyIndex) -> Result<VideoSequence> {
    if idx.contains(1) {
        return Err(Error::InvalidArgument(
            "frame 1 cannot be redundant".into(),
        ));
    }
    let total = seq.len() + idx.len();
    if idx.as_slice().last().is_some_and(|&i| i > total) {
        return Err(Error::InvalidArgument(format!(
            "{} surviving frames plus {} redundant positions cannot cover index {}",
            seq.len(),
            idx.len(),
            idx.as_slice().last().unwrap()
        )));
    }
    let redundant = idx.mask(total);
    let mut survivors = seq.frames().iter();
    let mut out: Vec<Frame> = Vec::with_capacity(total);
    for r in redundant {
        let f = if r {
            out.last().expect("position 1 is never redundant").clone()
        } else {
            survivors.next().expect("counts match").clone()
        };
        out.push(f);
    }
    VideoSequence::new(out, seq.fps())
}

/// Map original 1-based positions onto 1-based positions in the sequence with
/// redundant frames removed. Fails if a position is itself redundant.
pub fn surviving_positions(positions: &[usize], idx: &RedundancyIndex) -> Result<Vec<usize>> {
    positions
        .iter()
        .map(|&p| {
            let dropped_before = idx.as_slice().partition_point(|&r| r < p);
            if idx.contains(p) {
                Err(Error::InvalidArgument(format!(
                    "position {p} is redundant and was not transmitted"
                )))
            } else {
                Ok(p - dropped_before)
            }
        })
        .collect()
}
