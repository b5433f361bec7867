mod common;

use common::*;
use rand::Rng;
use survtx::keyframe::{self, local_maxima, select_adaptive, smooth_curve, SelectionConfig, SelectionMode};
use survtx::metrics::{interframe_psnr_curve, mse, psnr, psnr_from_mse, ssim, sse, PsnrCurve};
use survtx::redundancy::{detect_redundant, detect_redundant_with_exempt, motion_mask, RedundancyConfig};
use survtx::resample::{downsample_4x_real, kernel_weight, upsample_4x_real};
use survtx::{Frame, Layout};

#[test]
fn kernel_matches_piecewise_definition() {
    let mut r = rng(1);
    for _ in 0..10_000 {
        let t: f64 = r.random_range(-3.0..3.0);
        assert!((kernel_weight(t) - keys_kernel(t)).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn kernel_partition_of_unity_random_phases() {
    let mut r = rng(2);
    for _ in 0..10_000 {
        let x: f64 = r.random_range(-50.0..50.0);
        let s: f64 = (x.floor() as i64 - 3..=x.floor() as i64 + 3)
            .map(|n| kernel_weight(x - n as f64))
            .sum();
        assert!((s - 1.0).abs() < 1e-9);
    }
}

#[test]
fn downsample_matches_eq1_double_loop_rgb() {
    let mut r = rng(3);
    for _ in 0..5 {
        let f = random_frame(&mut r, 16, 12, Layout::Rgb);
        let got = downsample_4x_real(&f).unwrap();
        for c in 0..3 {
            let want = downsample_oracle(&f, c);
            for (i, w) in want.iter().enumerate() {
                let g = got.data[i * 3 + c];
                assert!((g - w).abs() < 1e-6, "c={c} i={i} {g} vs {w}");
            }
        }
    }
}

#[test]
fn upsample_matches_bicubic_oracle() {
    let mut r = rng(4);
    for (w, h) in [(4, 4), (8, 5), (6, 9)] {
        let f = random_frame(&mut r, w, h, Layout::Luma);
        let got = upsample_4x_real(&f);
        let want = upsample_oracle(&f, 0);
        assert_eq!(got.data.len(), want.len());
        for (g, w) in got.data.iter().zip(&want) {
            assert!((g - w).abs() < 1e-6);
        }
    }
}

#[test]
fn ramp_frames_match_oracles() {
    let ramp = Frame::from_fn(32, 16, |x, _| (x * 8) as u8).unwrap();
    let got = downsample_4x_real(&ramp).unwrap();
    for (g, w) in got.data.iter().zip(downsample_oracle(&ramp, 0)) {
        assert!((g - w).abs() < 1e-6);
    }
    let small = Frame::from_fn(8, 8, |x, y| (x * 30 + y) as u8).unwrap();
    for (g, w) in upsample_4x_real(&small).data.iter().zip(upsample_oracle(&small, 0)) {
        assert!((g - w).abs() < 1e-6);
    }
}

#[test]
fn mse_psnr_ssim_match_oracles() {
    let mut r = rng(5);
    for i in 0..20 {
        let a = random_frame(&mut r, 24, 20, if i % 2 == 0 { Layout::Luma } else { Layout::Rgb });
        let mut b = a.clone().into_data();
        for v in b.iter_mut() {
            if r.random_bool(0.3) {
                *v = v.saturating_add(r.random_range(0..40));
            }
        }
        let b = Frame::new(24, 20, a.layout(), b).unwrap();
        let m = mse_oracle(&a, &b);
        assert_eq!(mse(&a, &b).unwrap(), m);
        assert_eq!(sse(&a, &b).unwrap() as f64, m * 480.0);
        let closed = (10.0 * (255.0f64 * 255.0 / m).log10()).min(100.0);
        assert!((psnr(&a, &b).unwrap() - closed).abs() < 1e-9);
        assert!((ssim(&a, &b).unwrap() - ssim_oracle(&a, &b)).abs() < 1e-6);
    }
}

#[test]
fn psnr_reference_value() {
    // 10 pixels off by 50 in a 320x180 frame: MSE 0.434027..., PSNR 51.756 dB.
    let a = Frame::filled(320, 180, Layout::Luma, 100).unwrap();
    let mut d = a.clone().into_data();
    for v in d.iter_mut().take(10) {
        *v = 150;
    }
    let b = Frame::luma(320, 180, d).unwrap();
    let m = mse(&a, &b).unwrap();
    assert!((m - 25000.0 / 57600.0).abs() < 1e-15);
    assert!((psnr(&a, &b).unwrap() - 10.0 * (65025.0 / m).log10()).abs() < 1e-12);
    assert_eq!(psnr_from_mse(0.0), 100.0);
    assert_eq!(psnr_from_mse(1e-20), 100.0);
}

fn deterministic_pair(w: usize, h: usize, s: usize, second: bool) -> (Frame, Frame) {
    let a = Frame::from_fn(w, h, |x, y| ((x * 37 + y * 91 + (x * y * s) % 13 + s * 17) % 256) as u8).unwrap();
    let b = if second {
        Frame::from_fn(w, h, |x, y| ((x * x + 3 * y * s + 50) % 256) as u8).unwrap()
    } else {
        Frame::from_fn(w, h, |x, y| {
            let v = a.sample(x, y, 0) as i64 + ((x * 7 + y * 3 + s) % 61) as i64 - 30;
            v.clamp(0, 255) as u8
        })
        .unwrap()
    };
    (a, b)
}

#[test]
fn ssim_matches_frozen_scikit_image_values() {
    // skimage.metrics.structural_similarity(a, b, gaussian_weights=True,
    // sigma=1.5, use_sample_covariance=False, data_range=255)
    let cases = [
        (32, 24, 1, false, 0.9763511130491906),
        (11, 11, 2, false, 0.9664512891744226),
        (40, 17, 3, false, 0.9757549426516814),
        (32, 24, 1, true, -0.017842852908491327),
        (11, 11, 2, true, 0.020178579299360545),
        (40, 17, 3, true, -0.009194990346718553),
    ];
    for (w, h, s, second, want) in cases {
        let (a, b) = deterministic_pair(w, h, s, second);
        let got = ssim(&a, &b).unwrap();
        assert!((got - want).abs() < 1e-6, "{w}x{h} s={s}: {got} vs {want}");
    }
}

#[test]
fn ssim_luminance_term_only_for_constant_offset() {
    let mut r = rng(6);
    let base: Vec<u8> = (0..24 * 24).map(|_| r.random_range(0..=245)).collect();
    let a = Frame::luma(24, 24, base.clone()).unwrap();
    let b = Frame::luma(24, 24, base.iter().map(|v| v + 10).collect()).unwrap();
    // Shifting by a constant leaves variances and covariance unchanged, so
    // only the luminance term remains in each window.
    let c1 = (0.01f64 * 255.0).powi(2);
    let x: Vec<f64> = base.iter().map(|&v| v as f64).collect();
    let mut g = [[0.0f64; 11]; 11];
    let mut gs = 0.0;
    for i in 0..11 {
        for j in 0..11 {
            let d2 = ((i as f64 - 5.0).powi(2) + (j as f64 - 5.0).powi(2)) / 4.5;
            g[i][j] = (-d2).exp();
            gs += g[i][j];
        }
    }
    let mut total = 0.0;
    for oy in 0..14 {
        for ox in 0..14 {
            let mut mu = 0.0;
            for i in 0..11 {
                for j in 0..11 {
                    mu += g[i][j] / gs * x[(oy + i) * 24 + ox + j];
                }
            }
            total += (2.0 * mu * (mu + 10.0) + c1) / (mu * mu + (mu + 10.0).powi(2) + c1);
        }
    }
    let want = total / 196.0;
    assert!((ssim(&a, &b).unwrap() - want).abs() < 1e-6);
}

#[test]
fn psnr_curve_matches_pairwise_loop() {
    let mut r = rng(7);
    let s = redundancy_sequence(&mut r, 16, 16, 12);
    let curve = interframe_psnr_curve(&s).unwrap();
    assert_eq!(curve.len(), 11);
    for t in 0..11 {
        assert_eq!(curve.values()[t], psnr(&s.frames()[t], &s.frames()[t + 1]).unwrap());
    }
}

#[test]
fn motion_mask_matches_per_pixel_oracle() {
    let mut r = rng(8);
    for _ in 0..20 {
        let a = random_frame(&mut r, 20, 12, Layout::Rgb);
        let mut d = a.clone().into_data();
        for v in d.iter_mut() {
            if r.random_bool(0.2) {
                *v = v.wrapping_add(r.random_range(0..8));
            }
        }
        let b = Frame::new(20, 12, Layout::Rgb, d).unwrap();
        let m = r.random_range(0..5u8);
        let mask = motion_mask(&b, &a, m).unwrap();
        let (la, lb) = (luma_f64(&a), luma_f64(&b));
        for y in 0..12 {
            for x in 0..20 {
                let i = y * 20 + x;
                assert_eq!(mask.get(x, y), (lb[i] - la[i]).abs() > m as f64);
            }
        }
    }
}

#[test]
fn redundancy_matches_scan_oracle() {
    let mut r = rng(9);
    for case in 0..60 {
        let t = r.random_range(1..40);
        let s = redundancy_sequence(&mut r, 16, 12, t);
        let cfg = RedundancyConfig {
            tau_int: [0.5, 0.1, 2.0][case % 3],
            tau_mot: [15.0, 5.0, 400.0][case % 3],
            m: [2, 0, 5][case % 3],
        };
        let want = redundancy_oracle(&s, cfg.tau_int, cfg.tau_mot, cfg.m, &[]);
        assert_eq!(detect_redundant(&s, &cfg).unwrap().as_slice(), want.as_slice(), "case {case}");

        let exempt: Vec<usize> = (1..=t).filter(|_| r.random_bool(0.2)).collect();
        let want = redundancy_oracle(&s, cfg.tau_int, cfg.tau_mot, cfg.m, &exempt);
        assert_eq!(
            detect_redundant_with_exempt(&s, &cfg, &exempt).unwrap().as_slice(),
            want.as_slice()
        );
    }
}

#[test]
fn smoothing_matches_direct_convolution() {
    let mut r = rng(10);
    for _ in 0..100 {
        let n = r.random_range(1..60);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(0.0..100.0)).collect();
        let w = 2 * r.random_range(0..=(n - 1) / 2) + 1;
        let got = smooth_curve(&v, w).unwrap();
        for (g, o) in got.iter().zip(smooth_oracle(&v, w)) {
            assert!((g - o).abs() < 1e-9);
        }
    }
    let mut impulse = vec![0.0; 25];
    impulse[12] = 1.0;
    let got = smooth_curve(&impulse, 13).unwrap();
    let h = hann_oracle(13);
    for i in 0..13 {
        assert!((got[6 + i] - h[i]).abs() < 1e-9);
    }
}

#[test]
fn local_maxima_match_exhaustive_scan() {
    let mut r = rng(11);
    for _ in 0..300 {
        let n = r.random_range(0..30);
        let v: Vec<f64> = (0..n).map(|_| r.random_range(0..4) as f64).collect();
        assert_eq!(local_maxima(&v), maxima_oracle(&v), "{v:?}");
    }
    assert!(local_maxima(&[1.0, 2.0, 3.0, 4.0]).is_empty());
    assert_eq!(local_maxima(&[1.0, 3.0, 2.0]), vec![1]);
}

#[test]
fn adaptive_selection_matches_step_oracle() {
    let mut r = rng(12);
    for case in 0..150 {
        let t = r.random_range(2..120);
        let curve = random_curve(&mut r, t - 1);
        let cfg = SelectionConfig {
            mode: SelectionMode::Adaptive,
            k: r.random_range(2..40),
            w: [13, 1, 5, 31][case % 4],
            d_min: if case % 3 == 0 { Some(r.random_range(2..30)) } else { None },
            include_endpoints: case % 2 == 0,
            max_interior: if case % 5 == 0 { Some(r.random_range(1..4)) } else { None },
        };
        let want = key_oracle(
            &curve,
            t,
            &KeyOracleConfig {
                k: cfg.k,
                w: cfg.w,
                d_min: cfg.min_spacing(),
                endpoints: cfg.include_endpoints,
                max_interior: cfg.max_interior,
            },
        );
        let got = select_adaptive(&PsnrCurve::from_values(curve.clone()), &cfg, t).unwrap();
        assert_eq!(got.as_slice(), want.as_slice(), "case {case} t={t}");
    }
}

#[test]
fn adaptive_selection_is_shift_invariant_and_deterministic() {
    let mut r = rng(13);
    for _ in 0..50 {
        let t = r.random_range(10..90);
        // Dyadic offsets keep the smoothed values exactly comparable.
        let curve: Vec<f64> = (0..t - 1).map(|_| r.random_range(0..64) as f64).collect();
        let cfg = SelectionConfig {
            include_endpoints: true,
            ..SelectionConfig::adaptive(10)
        };
        let a = select_adaptive(&PsnrCurve::from_values(curve.clone()), &cfg, t).unwrap();
        let shifted: Vec<f64> = curve.iter().map(|v| v + 16.0).collect();
        let b = select_adaptive(&PsnrCurve::from_values(shifted), &cfg, t).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, select_adaptive(&PsnrCurve::from_values(curve), &cfg, t).unwrap());
        let interior: Vec<usize> = a.as_slice().iter().copied().filter(|&i| i != 1 && i != t).collect();
        for p in interior.windows(2) {
            assert!(p[1] - p[0] >= 10);
        }
    }
}

#[test]
fn flat_curve_falls_back_to_fixed_interval() {
    for (t, k, ep) in [(67, 33, true), (100, 15, false), (5, 2, true)] {
        let cfg = SelectionConfig {
            include_endpoints: ep,
            ..SelectionConfig::adaptive(k)
        };
        let flat = PsnrCurve::from_values(vec![100.0; t - 1]);
        assert_eq!(
            select_adaptive(&flat, &cfg, t).unwrap(),
            keyframe::fixed_interval(t, k, ep).unwrap()
        );
    }
}
