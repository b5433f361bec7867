//! Key-frame selection: fixed interval and content-adaptive placement.
//!
//! The adaptive selector smooths the inter-frame PSNR curve with a unit-sum
//! Hann window, finds its interior local maxima, maps curve entry `t` (PSNR
//! between frames `t` and `t+1`) to frame `t+1`, and keeps candidates greedily
//! in descending smoothed value subject to a minimum spacing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PsnrCurve;

pub const DEFAULT_WINDOW: usize = 13;

/// Sorted, unique 1-based key-frame positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyFrameIndex(Vec<usize>);

impl KeyFrameIndex {
    pub fn new(indices: Vec<usize>, total: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("at least one key frame is required".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i < 1 || i > total) {
            return Err(Error::InvalidArgument(format!(
                "key index {bad} outside [1, {total}]"
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "key indices must be strictly increasing".into(),
            ));
        }
        Ok(KeyFrameIndex(indices))
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
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    #[default]
    Fixed,
    Adaptive,
}

impl std::str::FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(SelectionMode::Fixed),
            "adaptive" => Ok(SelectionMode::Adaptive),
            other => Err(Error::InvalidArgument(format!("unknown selection mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub mode: SelectionMode,
    /// Fixed interval in frames.
    pub k: usize,
    /// Smoothing window length (odd).
    pub w: usize,
    /// Minimum spacing between adaptive key frames; `None` means `k`.
    pub d_min: Option<usize>,
    /// Force the first and last frame into the result.
    pub include_endpoints: bool,
    /// Upper bound on adaptive interior (non-endpoint) key frames.
    pub max_interior: Option<usize>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            mode: SelectionMode::Fixed,
            k: 15,
            w: DEFAULT_WINDOW,
            d_min: None,
            include_endpoints: false,
            max_interior: None,
        }
    }
}

impl SelectionConfig {
    pub fn fixed(k: usize) -> Self {
        SelectionConfig {
            k,
            ..Default::default()
        }
    }

    pub fn adaptive(k: usize) -> Self {
        SelectionConfig {
            mode: SelectionMode::Adaptive,
            k,
            ..Default::default()
        }
    }

    pub fn min_spacing(&self) -> usize {
        self.d_min.unwrap_or(self.k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidArgument(format!("k must be >= 2, got {}", self.k)));
        }
        if self.w == 0 || self.w.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "window length must be odd and >= 1, got {}",
                self.w
            )));
        }
        if self.min_spacing() < 2 {
            return Err(Error::InvalidArgument(format!(
                "d_min must be >= 2, got {}",
                self.min_spacing()
            )));
        }
        Ok(())
    }
}

/// `{1, k+1, 2k+1, ...}` truncated at `total`; with `include_endpoints` the
/// last frame is added as well.
pub fn fixed_interval(total: usize, k: usize, include_endpoints: bool) -> Result<KeyFrameIndex> {
    if total == 0 {
        return Err(Error::InvalidArgument("sequence is empty".into()));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    let mut idx: Vec<usize> = (1..=total).step_by(k).collect();
    if include_endpoints && idx.last() != Some(&total) {
        idx.push(total);
    }
    KeyFrameIndex::new(idx, total)
}

/// Symmetric Hann window of length `w`, normalized to unit sum.
pub fn hann_window(w: usize) -> Vec<f64> {
    if w == 1 {
        return vec![1.0];
    }
    let raw: Vec<f64> = (0..w)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / (w - 1) as f64).cos())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Mirror an out-of-range index into `[0, len)` without repeating the edge sample.
fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - j;
    }
    j as usize
}

/// Convolve with a unit-sum Hann window of odd length `w`, reflect-padded so
/// the output has the input's length.
pub fn smooth_curve(values: &[f64], w: usize) -> Result<Vec<f64>> {
    if w == 0 || w.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("window length {w} must be odd")));
    }
    if w > values.len() {
        return Err(Error::InvalidArgument(format!(
            "window length {w} exceeds curve length {}",
            values.len()
        )));
    }
    let win = hann_window(w);
    let half = (w / 2) as isize;
    let n = values.len();
    Ok((0..n as isize)
        .map(|i| {
            win.iter()
                .enumerate()
                .map(|(k, wk)| wk * values[reflect(i + k as isize - half, n)])
                .sum()
        })
        .collect())
}

/// Interior local maxima (0-based). A run of equal values counts when both
/// neighbours of the run are strictly lower; the run reports its center,
/// left-center for even lengths.
pub fn local_maxima(curve: &[f64]) -> Vec<usize> {
    let n = curve.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let mut i = 1;
    while i < n - 1 {
        let mut j = i;
        while j + 1 < n && curve[j + 1] == curve[i] {
            j += 1;
        }
        if curve[i - 1] < curve[i] && j + 1 < n && curve[j + 1] < curve[i] {
            out.push(i + (j - i) / 2);
        }
        i = j + 1;
    }
    out
}

/// Content-adaptive key-frame selection over a `total`-frame sequence whose
/// inter-frame PSNR curve is `p_int` (length `total - 1`).
///
/// If the curve has no interior maximum the result is the fixed-interval
/// selection with the same `k` and endpoint setting. When `w` exceeds the
/// curve length the largest odd window that fits is used.
pub fn select_adaptive(p_int: &PsnrCurve, cfg: &SelectionConfig, total: usize) -> Result<KeyFrameIndex> {
    cfg.validate()?;
    if total < 2 || p_int.len() != total - 1 {
        return Err(Error::InvalidArgument(format!(
            "curve length {} does not match {total} frames",
            p_int.len()
        )));
    }
    let fallback = || fixed_interval(total, cfg.k, cfg.include_endpoints);
    if p_int.len() < 3 {
        return fallback();
    }
    let mut w = cfg.w.min(p_int.len());
    if w.is_multiple_of(2) {
        w -= 1;
    }
    let smoothed = smooth_curve(p_int.values(), w)?;
    let maxima = local_maxima(&smoothed);
    if maxima.is_empty() {
        return fallback();
    }

    // Curve entry at 0-based position i compares frames i+1 and i+2 (1-based);
    // the peak selects frame i+2.
    let mut candidates: Vec<(f64, usize)> = maxima.iter().map(|&i| (smoothed[i], i + 2)).collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let d_min = cfg.min_spacing();
    let limit = cfg.max_interior.unwrap_or(usize::MAX);
    let mut kept: Vec<usize> = Vec::new();
    for (_, frame) in candidates {
        if kept.len() >= limit {
            break;
        }
        if cfg.include_endpoints && (frame == 1 || frame == total) {
            continue;
        }
        if kept.iter().all(|&k| k.abs_diff(frame) >= d_min) {
            kept.push(frame);
        }
    }
    if cfg.include_endpoints {
        kept.push(1);
        kept.push(total);
    }
    kept.sort_unstable();
    kept.dedup();
    KeyFrameIndex::new(kept, total)
}

/// Select key frames according to `cfg.mode`. `p_int` is only needed in
/// adaptive mode.
pub fn select(cfg: &SelectionConfig, total: usize, p_int: Option<&PsnrCurve>) -> Result<KeyFrameIndex> {
    cfg.validate()?;
    match cfg.mode {
        SelectionMode::Fixed => fixed_interval(total, cfg.k, cfg.include_endpoints),
        SelectionMode::Adaptive => match p_int {
            Some(curve) => select_adaptive(curve, cfg, total),
            None if total < 2 => fixed_interval(total, cfg.k, cfg.include_endpoints),
            None => Err(Error::InvalidArgument(
                "adaptive selection needs an inter-frame PSNR curve".into(),
            )),
        },
    }
}
