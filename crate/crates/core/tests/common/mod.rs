#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use survtx::{Frame, FrameRate, Layout, VideoSequence};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_frame(r: &mut impl Rng, w: usize, h: usize, layout: Layout) -> Frame {
    let data = (0..w * h * layout.channels()).map(|_| r.random()).collect();
    Frame::new(w, h, layout, data).unwrap()
}

pub fn seq(frames: Vec<Frame>) -> VideoSequence {
    VideoSequence::new(frames, FrameRate::integer(10)).unwrap()
}

/// Sequence with random static stretches, small perturbations, localized
/// motion and scene changes, so every redundancy branch is exercised.
pub fn redundancy_sequence(r: &mut impl Rng, w: usize, h: usize, t: usize) -> VideoSequence {
    let mut cur = random_frame(r, w, h, Layout::Luma).into_data();
    let mut frames = vec![Frame::luma(w, h, cur.clone()).unwrap()];
    for _ in 1..t {
        match r.random_range(0..6) {
            0 => {}
            1 => {
                let n = r.random_range(1..=3);
                for _ in 0..n {
                    let i = r.random_range(0..cur.len());
                    cur[i] = cur[i].wrapping_add(r.random_range(1..=3));
                }
            }
            2 => {
                let n = r.random_range(1..=8);
                let d: u8 = r.random_range(3..=60);
                for _ in 0..n {
                    let i = r.random_range(0..cur.len());
                    cur[i] = cur[i].wrapping_add(d);
                }
            }
            3 => {
                let (x0, y0) = (r.random_range(0..w - 3), r.random_range(0..h - 3));
                let v = r.random();
                for y in y0..y0 + 3 {
                    for x in x0..x0 + 3 {
                        cur[y * w + x] = v;
                    }
                }
            }
            4 => {
                for v in cur.iter_mut() {
                    if r.random_bool(0.1) {
                        *v = v.saturating_add(1);
                    }
                }
            }
            _ => cur = random_frame(r, w, h, Layout::Luma).into_data(),
        }
        frames.push(Frame::luma(w, h, cur.clone()).unwrap());
    }
    seq(frames)
}

/// Keys cubic kernel with a = -0.5, written out from its piecewise definition.
pub fn keys_kernel(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t < 1.0 {
        (a + 2.0) * t.powi(3) - (a + 3.0) * t.powi(2) + 1.0
    } else if t < 2.0 {
        a * t.powi(3) - 5.0 * a * t.powi(2) + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Weighted sum over every HR pixel for each LR pixel; the kernel support
/// selects the 16 nearest neighbours around (4x + 1.5, 4y + 1.5).
pub fn downsample_oracle(f: &Frame, c: usize) -> Vec<f64> {
    let (w, h) = (f.width(), f.height());
    let (lw, lh) = (w / 4, h / 4);
    let mut out = vec![0.0; lw * lh];
    for ly in 0..lh {
        for lx in 0..lw {
            let (cx, cy) = (4.0 * lx as f64 + 1.5, 4.0 * ly as f64 + 1.5);
            let mut acc = 0.0;
            let mut taps = 0;
            for j in 0..h {
                for i in 0..w {
                    let wt = keys_kernel(cx - i as f64) * keys_kernel(cy - j as f64);
                    if (cx - i as f64).abs() < 2.0 && (cy - j as f64).abs() < 2.0 {
                        taps += 1;
                    }
                    acc += wt * f.sample(i, j, c) as f64;
                }
            }
            assert_eq!(taps, 16);
            out[ly * lw + lx] = acc;
        }
    }
    out
}

/// 2-D bicubic interpolation at HR sample centers with clamp-to-edge.
pub fn upsample_oracle(f: &Frame, c: usize) -> Vec<f64> {
    let (w, h) = (f.width() as isize, f.height() as isize);
    let (hw, hh) = (w * 4, h * 4);
    let mut out = Vec::with_capacity((hw * hh) as usize);
    for y in 0..hh {
        for x in 0..hw {
            let u = (x as f64 + 0.5) / 4.0 - 0.5;
            let v = (y as f64 + 0.5) / 4.0 - 0.5;
            let mut acc = 0.0;
            for n in -4..w + 4 {
                for m in -4..h + 4 {
                    let wt = keys_kernel(u - n as f64) * keys_kernel(v - m as f64);
                    if wt != 0.0 {
                        let (sx, sy) = (n.clamp(0, w - 1) as usize, m.clamp(0, h - 1) as usize);
                        acc += wt * f.sample(sx, sy, c) as f64;
                    }
                }
            }
            out.push(acc);
        }
    }
    out
}

pub fn luma_f64(f: &Frame) -> Vec<f64> {
    f.to_luma().data().iter().map(|&v| v as f64).collect()
}

/// Mean SSIM computed window by window with a full 2-D Gaussian.
pub fn ssim_oracle(a: &Frame, b: &Frame) -> f64 {
    let (x, y) = (luma_f64(a), luma_f64(b));
    let w = a.width();
    let h = a.height();
    let sigma: f64 = 1.5;
    let mut g = [[0.0f64; 11]; 11];
    let mut gs = 0.0;
    for (i, row) in g.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
            *v = (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp();
            gs += *v;
        }
    }
    let c1 = (0.01f64 * 255.0).powi(2);
    let c2 = (0.03f64 * 255.0).powi(2);
    let mut total = 0.0;
    let mut count = 0;
    for oy in 0..=h - 11 {
        for ox in 0..=w - 11 {
            let (mut mx, mut my) = (0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let p = (oy + i) * w + ox + j;
                    mx += g[i][j] / gs * x[p];
                    my += g[i][j] / gs * y[p];
                }
            }
            let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let p = (oy + i) * w + ox + j;
                    let wt = g[i][j] / gs;
                    vx += wt * (x[p] - mx).powi(2);
                    vy += wt * (y[p] - my).powi(2);
                    cov += wt * (x[p] - mx) * (y[p] - my);
                }
            }
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    total / count as f64
}

pub fn mse_oracle(a: &Frame, b: &Frame) -> f64 {
    let (x, y) = (luma_f64(a), luma_f64(b));
    x.iter().zip(&y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / x.len() as f64
}

/// Sequential scan: compare each frame with the last kept frame.
pub fn redundancy_oracle(s: &VideoSequence, tau_int: f64, tau_mot: f64, m: u8, exempt: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut reference = luma_f64(&s.frames()[0]);
    for t in 2..=s.len() {
        let cur = luma_f64(&s.frames()[t - 1]);
        let n = cur.len() as f64;
        let global: f64 = cur.iter().zip(&reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
        let moving: Vec<f64> = cur
            .iter()
            .zip(&reference)
            .filter(|(a, b)| (*a - *b).abs() > m as f64)
            .map(|(a, b)| (a - b).powi(2))
            .collect();
        let motion = if moving.is_empty() {
            0.0
        } else {
            moving.iter().sum::<f64>() / moving.len() as f64
        };
        if !exempt.contains(&t) && global <= tau_int && motion <= tau_mot {
            out.push(t);
        } else {
            reference = cur;
        }
    }
    out
}

/// numpy-style Hann window normalized to unit sum.
pub fn hann_oracle(w: usize) -> Vec<f64> {
    if w == 1 {
        return vec![1.0];
    }
    let v: Vec<f64> = (0..w)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (w as f64 - 1.0)).cos())
        .collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

pub fn smooth_oracle(v: &[f64], w: usize) -> Vec<f64> {
    let half = w / 2;
    let n = v.len();
    let mut padded: Vec<f64> = (1..=half).rev().map(|i| v[i]).collect();
    padded.extend_from_slice(v);
    padded.extend((0..half).map(|i| v[n - 2 - i]));
    let win = hann_oracle(w);
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (k, wk) in win.iter().enumerate() {
                acc += wk * padded[i + k];
            }
            acc
        })
        .collect()
}

/// Exhaustive plateau scan: position p is reported when it is the
/// (left-)center of a run of equal values bounded by strictly lower neighbours.
pub fn maxima_oracle(c: &[f64]) -> Vec<usize> {
    let n = c.len();
    let mut out = Vec::new();
    for p in 1..n.saturating_sub(1) {
        let mut l = p;
        while l > 0 && c[l - 1] == c[p] {
            l -= 1;
        }
        let mut r = p;
        while r + 1 < n && c[r + 1] == c[p] {
            r += 1;
        }
        if l > 0 && r + 1 < n && c[l - 1] < c[p] && c[r + 1] < c[p] && p == l + (r - l) / 2 {
            out.push(p);
        }
    }
    out
}

pub struct KeyOracleConfig {
    pub k: usize,
    pub w: usize,
    pub d_min: usize,
    pub endpoints: bool,
    pub max_interior: Option<usize>,
}

pub fn fixed_oracle(t: usize, k: usize, endpoints: bool) -> Vec<usize> {
    let mut v = Vec::new();
    let mut i = 1;
    while i <= t {
        v.push(i);
        i += k;
    }
    if endpoints && !v.contains(&t) {
        v.push(t);
    }
    v
}

/// Steps 1-6 of adaptive key-frame selection.
pub fn key_oracle(curve: &[f64], t: usize, cfg: &KeyOracleConfig) -> Vec<usize> {
    if curve.len() < 3 {
        return fixed_oracle(t, cfg.k, cfg.endpoints);
    }
    let mut w = cfg.w.min(curve.len());
    if w.is_multiple_of(2) {
        w -= 1;
    }
    let s = smooth_oracle(curve, w);
    let mut cands: Vec<(f64, usize)> = maxima_oracle(&s).into_iter().map(|p| (s[p], p + 2)).collect();
    if cands.is_empty() {
        return fixed_oracle(t, cfg.k, cfg.endpoints);
    }
    let mut kept: Vec<usize> = Vec::new();
    while !cands.is_empty() {
        if cfg.max_interior.is_some_and(|m| kept.len() >= m) {
            break;
        }
        let mut best = 0;
        for i in 1..cands.len() {
            let (v, f) = cands[i];
            let (bv, bf) = cands[best];
            if v > bv || (v == bv && f < bf) {
                best = i;
            }
        }
        let (_, f) = cands.remove(best);
        if cfg.endpoints && (f == 1 || f == t) {
            continue;
        }
        if kept.iter().all(|&k| (k as isize - f as isize).unsigned_abs() >= cfg.d_min) {
            kept.push(f);
        }
    }
    if cfg.endpoints {
        kept.push(1);
        kept.push(t);
    }
    kept.sort();
    kept.dedup();
    kept
}

/// Random curve with capped static stretches, plateaus and noise.
pub fn random_curve(r: &mut impl Rng, len: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(len);
    while v.len() < len {
        let run = r.random_range(1..=12).min(len - v.len());
        match r.random_range(0..4) {
            0 => v.extend(std::iter::repeat_n(100.0, run)),
            1 => {
                let c = r.random_range(20..45) as f64;
                v.extend(std::iter::repeat_n(c, run));
            }
            _ => v.extend((0..run).map(|_| r.random_range(15.0..60.0))),
        }
    }
    v
}
