//! Quality metrics and bits-per-pixel accounting.
//!
//! All pixel metrics run on luma. PSNR is capped at [`PSNR_CAP_DB`] so that
//! identical frames produce a finite value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{Frame, VideoSequence};

pub const PEAK: f64 = 255.0;
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn luma_pair<'a>(a: &'a Frame, b: &'a Frame) -> Result<(std::borrow::Cow<'a, [u8]>, std::borrow::Cow<'a, [u8]>)> {
    a.check_same_dims(b)?;
    Ok((a.luma_plane(), b.luma_plane()))
}

/// Sum of squared luma differences.
pub fn sse(a: &Frame, b: &Frame) -> Result<u64> {
    let (la, lb) = luma_pair(a, b)?;
    Ok(la
        .iter()
        .zip(lb.iter())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum())
}

pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    Ok(sse(a, b)? as f64 / a.pixel_count() as f64)
}

/// `10 log10(255^2 / mse)`, capped at 100 dB (and exactly 100 dB for mse = 0).
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP_DB)
}

pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// Normalized 1-D Gaussian taps for the SSIM window.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// "Valid" separable filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = k.iter().zip(&row[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (i, kv) in k.iter().enumerate() {
            let src_row = &tmp[(y + i) * ow..(y + i + 1) * ow];
            for (o, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src_row) {
                *o += kv * s;
            }
        }
    }
    out
}

/// Mean SSIM over all fully contained 11x11 Gaussian windows (sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 255).
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    let (la, lb) = luma_pair(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::DimensionMismatch(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let x: Vec<f64> = la.iter().map(|&v| v as f64).collect();
    let y: Vec<f64> = lb.iter().map(|&v| v as f64).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let k = gaussian_window();
    let mu_x = filter_valid(&x, w, h, &k);
    let mu_y = filter_valid(&y, w, h, &k);
    let e_xx = filter_valid(&xx, w, h, &k);
    let e_yy = filter_valid(&yy, w, h, &k);
    let e_xy = filter_valid(&xy, w, h, &k);

    let c1 = (SSIM_K1 * PEAK).powi(2);
    let c2 = (SSIM_K2 * PEAK).powi(2);
    let n = mu_x.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (mx, my) = (mu_x[i], mu_y[i]);
            let vx = e_xx[i] - mx * mx;
            let vy = e_yy[i] - my * my;
            let cov = e_xy[i] - mx * my;
            ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                / ((mx * mx + my * my + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

/// Inter-frame PSNR curve: entry `t` (1-based) is `PSNR(L_t, L_{t+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsnrCurve {
    values: Vec<f64>,
}

impl PsnrCurve {
    pub fn from_values(values: Vec<f64>) -> Self {
        PsnrCurve { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn interframe_psnr_curve(seq: &VideoSequence) -> Result<PsnrCurve> {
    if seq.len() < 2 {
        return Err(Error::InvalidArgument(
            "an inter-frame PSNR curve needs at least 2 frames".into(),
        ));
    }
    let luma: Vec<Frame> = seq.frames().iter().map(Frame::to_luma).collect();
    let values = luma
        .windows(2)
        .map(|p| psnr(&p[0], &p[1]))
        .collect::<Result<Vec<_>>>()?;
    Ok(PsnrCurve { values })
}

/// One bits-per-pixel accounting row. The denominator is always the HR pixel
/// count times the original frame count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BppRow {
    pub label: String,
    pub total_bits: f64,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub bpp: f64,
}

impl BppRow {
    pub fn from_bits(
        label: impl Into<String>,
        total_bits: u64,
        width: usize,
        height: usize,
        frame_count: usize,
    ) -> Result<Self> {
        Self::build(label.into(), total_bits as f64, width, height, frame_count)
    }

    /// Row from a reported bpp value (bits are back-computed).
    pub fn from_bpp(
        label: impl Into<String>,
        bpp: f64,
        width: usize,
        height: usize,
        frame_count: usize,
    ) -> Result<Self> {
        let denom = (width * height * frame_count) as f64;
        Self::build(label.into(), bpp * denom, width, height, frame_count)
    }

    fn build(label: String, total_bits: f64, width: usize, height: usize, frame_count: usize) -> Result<Self> {
        if width == 0 || height == 0 || frame_count == 0 {
            return Err(Error::InvalidArgument(format!(
                "bpp row `{label}` has an empty denominator"
            )));
        }
        if !(total_bits >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bpp row `{label}` has negative bits"
            )));
        }
        let bpp = total_bits / (width * height * frame_count) as f64;
        Ok(BppRow {
            label,
            total_bits,
            width,
            height,
            frame_count,
            bpp,
        })
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height * self.frame_count
    }

    fn same_denominator(&self, other: &BppRow) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.frame_count == other.frame_count
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BppSummary {
    pub components: Vec<BppRow>,
    pub system: BppRow,
    pub baseline: BppRow,
    /// `(baseline - system) / baseline`.
    pub saving: f64,
}

pub fn saving_fraction(baseline_bpp: f64, system_bpp: f64) -> f64 {
    (baseline_bpp - system_bpp) / baseline_bpp
}

/// Sum component rows into the system row and compare against a baseline.
pub fn bpp_accounting(components: &[BppRow], baseline: &BppRow) -> Result<BppSummary> {
    if components.is_empty() {
        return Err(Error::InvalidArgument("no bpp components".into()));
    }
    if let Some(bad) = components.iter().find(|c| !c.same_denominator(baseline)) {
        return Err(Error::DimensionMismatch(format!(
            "bpp row `{}` uses {}x{}x{} but the baseline uses {}x{}x{}",
            bad.label,
            bad.width,
            bad.height,
            bad.frame_count,
            baseline.width,
            baseline.height,
            baseline.frame_count
        )));
    }
    if baseline.bpp <= 0.0 {
        return Err(Error::InvalidArgument("baseline bpp must be positive".into()));
    }
    let system_bpp: f64 = components.iter().map(|c| c.bpp).sum();
    let system_bits: f64 = components.iter().map(|c| c.total_bits).sum();
    let system = BppRow {
        label: "system".into(),
        total_bits: system_bits,
        width: baseline.width,
        height: baseline.height,
        frame_count: baseline.frame_count,
        bpp: system_bpp,
    };
    Ok(BppSummary {
        components: components.to_vec(),
        saving: saving_fraction(baseline.bpp, system_bpp),
        system,
        baseline: baseline.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{FrameRate, Layout};

    fn flat(v: u8) -> Frame {
        Frame::filled(16, 16, Layout::Luma, v).unwrap()
    }

    #[test]
    fn mse_basics() {
        assert_eq!(mse(&flat(7), &flat(7)).unwrap(), 0.0);
        assert_eq!(mse(&flat(0), &flat(255)).unwrap(), 65025.0);
        assert!(mse(&flat(0), &Frame::filled(8, 8, Layout::Luma, 0).unwrap()).is_err());
    }

    #[test]
    fn psnr_basics() {
        assert_eq!(psnr(&flat(3), &flat(3)).unwrap(), 100.0);
        assert_eq!(psnr(&flat(0), &flat(255)).unwrap(), 0.0);
        assert!((psnr(&flat(10), &flat(11)).unwrap() - 48.130_803_608_679_1).abs() < 1e-9);
        assert_eq!(psnr_from_mse(1e-12), PSNR_CAP_DB);
    }

    #[test]
    fn ssim_identity_and_small() {
        let f = Frame::from_fn(20, 17, |x, y| ((x * 11) ^ (y * 7)) as u8).unwrap();
        assert!((ssim(&f, &f).unwrap() - 1.0).abs() < 1e-12);
        let tiny = Frame::filled(10, 10, Layout::Luma, 0).unwrap();
        assert!(ssim(&tiny, &tiny).is_err());
    }

    #[test]
    fn gaussian_window_sums_to_one() {
        let s: f64 = gaussian_window().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn curve_static_and_alternating() {
        let s = VideoSequence::new(vec![flat(5); 5], FrameRate::default()).unwrap();
        assert_eq!(interframe_psnr_curve(&s).unwrap().values(), &[100.0; 4]);
        let alt: Vec<_> = (0..6).map(|i| flat(if i % 2 == 0 { 0 } else { 255 })).collect();
        let s = VideoSequence::new(alt, FrameRate::default()).unwrap();
        assert_eq!(interframe_psnr_curve(&s).unwrap().values(), &[0.0; 5]);
        let one = VideoSequence::new(vec![flat(0)], FrameRate::default()).unwrap();
        assert!(interframe_psnr_curve(&one).is_err());
    }

    #[test]
    fn bpp_system_sum() {
        let lr = BppRow::from_bpp("lr", 0.011, 1280, 720, 100).unwrap();
        let key = BppRow::from_bpp("key", 0.064, 1280, 720, 100).unwrap();
        let base = BppRow::from_bpp("hr", 0.105, 1280, 720, 100).unwrap();
        let s = bpp_accounting(&[lr, key], &base).unwrap();
        assert!((s.system.bpp - 0.075).abs() < 1e-12);
        assert!((s.saving - 0.285_714_285_714).abs() < 1e-9);
    }

    #[test]
    fn bpp_rejects_mixed_denominators() {
        let lr = BppRow::from_bpp("lr", 0.011, 1280, 720, 100).unwrap();
        let base = BppRow::from_bpp("hr", 0.105, 1280, 720, 50).unwrap();
        assert!(bpp_accounting(&[lr], &base).is_err());
    }

    #[test]
    fn raw_luma_lr_is_half_bit_per_hr_pixel() {
        // 8 bits per LR sample, 16 HR pixels per LR sample.
        let row = BppRow::from_bits("lr", 320 * 180 * 8 * 10, 1280, 720, 10).unwrap();
        assert_eq!(row.bpp, 0.5);
    }
}
