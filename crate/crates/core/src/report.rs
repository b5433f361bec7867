//! Experiment runs, key-interval sweeps and CSV reports.
//!
//! Each run writes into its own directory:
//!
//! * `config.toml`: effective configuration
//! * `quality.csv`: per-frame quality (see [`eval`](crate::eval))
//! * `bpp.csv`: one bpp row, columns as in [`BppTableRow`]
//! * `indices.txt`: key indices, then redundant indices
//!
//! A sweep runs one point per key interval in `k-<k>/` and writes
//! `summary.csv` (one [`SweepRow`] per point) and `bpp_table.csv` at the root.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bundle::SectionSizes;
use crate::config::{ExperimentConfig, CAPTURED_CONFIG};
use crate::endcloud::{process_bundle, run_end_pipeline};
use crate::error::{Error, Result};
use crate::eval::{csv_error, evaluate, read_quality_csv, Aggregate, EvalFlags, QualityReport};
use crate::frame::VideoSequence;
use crate::keyframe::KeyFrameIndex;
use crate::metrics::{bpp_accounting, BppRow, BppSummary};
use crate::redundancy::RedundancyIndex;

/// Key intervals of the default sweep.
pub const DEFAULT_SWEEP: [usize; 5] = [15, 25, 33, 41, 50];

/// One bpp comparison row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BppTableRow {
    pub hr_resolution: String,
    pub fps: String,
    pub hr_bpp: f64,
    pub lr_bpp: f64,
    pub key_interval: usize,
    pub key_bpp: f64,
    pub overhead_bpp: f64,
    pub system_bpp: f64,
    pub bpp_saving: f64,
}

impl BppTableRow {
    pub fn from_summary(summary: &BppSummary, fps: String, key_interval: usize) -> Self {
        let component = |label: &str| {
            summary
                .components
                .iter()
                .filter(|c| c.label == label)
                .map(|c| c.bpp)
                .sum::<f64>()
        };
        BppTableRow {
            hr_resolution: format!("{}x{}", summary.baseline.width, summary.baseline.height),
            fps,
            hr_bpp: summary.baseline.bpp,
            lr_bpp: component("lr_video"),
            key_interval,
            key_bpp: component("key_frames"),
            overhead_bpp: component("overhead"),
            system_bpp: summary.system.bpp,
            bpp_saving: summary.saving,
        }
    }
}

/// Bpp accounting for one packed bundle against the encoded full HR video.
pub fn bundle_bpp(sizes: &SectionSizes, width: usize, height: usize, frames: usize, hr_baseline_bytes: usize) -> Result<BppSummary> {
    let rows = [
        ("lr_video", sizes.lr_bytes),
        ("key_frames", sizes.key_bytes),
        ("overhead", sizes.overhead_bytes),
    ]
    .into_iter()
    .map(|(l, b)| BppRow::from_bits(l, b as u64 * 8, width, height, frames))
    .collect::<Result<Vec<_>>>()?;
    let baseline = BppRow::from_bits("hr_video", hr_baseline_bytes as u64 * 8, width, height, frames)?;
    bpp_accounting(&rows, &baseline)
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub key_interval: usize,
    pub key_index: KeyFrameIndex,
    pub redundant_index: RedundancyIndex,
    pub sizes: SectionSizes,
    pub bpp: BppSummary,
    pub quality: QualityReport,
    pub reconstruction: VideoSequence,
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Run end node, cloud node and evaluation on `hr`, writing artifacts to `dir`.
pub fn run_experiment(hr: &VideoSequence, cfg: &ExperimentConfig, dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    cfg.capture(dir)?;
    let codec = cfg.codec.adapter()?;
    let reconstructor = cfg.reconstructor.build()?;

    let end = run_end_pipeline(hr, &cfg.end, &codec)?;
    let cloud = process_bundle(&end.packed.bytes, &codec, reconstructor.as_ref())?;
    let quality = evaluate(&cloud.hr, hr, &end.key_index, &end.redundant_index, &cfg.eval)?;

    let baseline_bytes = codec.encode_video(hr)?.len();
    let bpp = bundle_bpp(&end.packed.sizes, hr.width(), hr.height(), hr.len(), baseline_bytes)?;
    let row = BppTableRow::from_summary(&bpp, hr.fps().to_string(), cfg.end.selection.k);

    quality.write_csv(&dir.join("quality.csv"))?;
    write_csv_rows(&dir.join("bpp.csv"), &[row])?;
    let indices = dir.join("indices.txt");
    fs::write(
        &indices,
        format!("{}\n{}\n", join(end.key_index.as_slice()), join(end.redundant_index.as_slice())),
    )
    .map_err(|e| Error::io(&indices, e))?;

    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        key_interval: cfg.end.selection.k,
        key_index: end.key_index,
        redundant_index: end.redundant_index,
        sizes: end.packed.sizes,
        bpp,
        quality,
        reconstruction: cloud.hr,
    })
}

pub fn sweep_dir(root: &Path, k: usize) -> PathBuf {
    root.join(format!("k-{k}"))
}

/// Run one experiment per key interval concurrently, then write the summaries.
pub fn run_sweep(hr: &VideoSequence, base: &ExperimentConfig, ks: &[usize], root: &Path) -> Result<Vec<SweepRow>> {
    ks.par_iter()
        .map(|&k| {
            let mut cfg = base.clone();
            cfg.end.selection.k = k;
            cfg.output_dir = sweep_dir(root, k);
            run_experiment(hr, &cfg, &cfg.output_dir).map(|_| ())
        })
        .collect::<Result<Vec<_>>>()?;
    summarize_sweep(root)
}

/// One row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub frames: usize,
    pub key_frames: usize,
    pub redundant_frames: usize,
    pub mean_psnr_excluding_keys: Option<f64>,
    pub mean_ssim_excluding_keys: Option<f64>,
    pub mean_psnr_all: f64,
    pub mean_ssim_all: f64,
    pub system_bpp: f64,
    pub bpp_saving: f64,
}

/// Summarize one run directory from its CSVs and captured config.
pub fn summarize_run(dir: &Path) -> Result<(SweepRow, BppTableRow)> {
    let cfg_path = dir.join(CAPTURED_CONFIG);
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let cfg = ExperimentConfig::from_toml(&text)?;
    let frames = read_quality_csv(&dir.join("quality.csv"))?;
    let flags = EvalFlags {
        exclude_keys: true,
        exclude_redundant: false,
    };
    let q = QualityReport::from_frames(frames, &flags)?;
    let bpp: Vec<BppTableRow> = read_csv_rows(&dir.join("bpp.csv"))?;
    let bpp = bpp
        .into_iter()
        .next()
        .ok_or_else(|| Error::Malformed(format!("{}: empty bpp.csv", dir.display())))?;
    let ex: Option<Aggregate> = q.excluding_keys;
    Ok((
        SweepRow {
            k: cfg.end.selection.k,
            frames: q.frames.len(),
            key_frames: q.frames.iter().filter(|f| f.is_keyframe).count(),
            redundant_frames: q.frames.iter().filter(|f| f.is_redundant).count(),
            mean_psnr_excluding_keys: ex.map(|a| a.mean_psnr),
            mean_ssim_excluding_keys: ex.map(|a| a.mean_ssim),
            mean_psnr_all: q.all_frames.mean_psnr,
            mean_ssim_all: q.all_frames.mean_ssim,
            system_bpp: bpp.system_bpp,
            bpp_saving: bpp.bpp_saving,
        },
        bpp,
    ))
}

/// Aggregate every run directory under `root` (those holding a captured
/// config) into `summary.csv` and `bpp_table.csv`, ordered by k.
pub fn summarize_sweep(root: &Path) -> Result<Vec<SweepRow>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(CAPTURED_CONFIG).is_file() && p.join("quality.csv").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::InvalidArgument(format!("no run directories under {}", root.display())));
    }
    let mut rows = dirs.iter().map(|d| summarize_run(d)).collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|(s, _)| s.k);
    let (summary, bpp): (Vec<SweepRow>, Vec<BppTableRow>) = rows.into_iter().unzip();
    write_csv_rows(&root.join("summary.csv"), &summary)?;
    write_csv_rows(&root.join("bpp_table.csv"), &bpp)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bpp_row_from_components() {
        let mk = |l: &str, bpp: f64| BppRow::from_bpp(l, bpp, 1280, 720, 100).unwrap();
        let s = bpp_accounting(&[mk("lr_video", 0.011), mk("key_frames", 0.064)], &mk("hr_video", 0.105)).unwrap();
        let r = BppTableRow::from_summary(&s, "10".into(), 33);
        assert_eq!(r.hr_resolution, "1280x720");
        assert!((r.system_bpp - 0.075).abs() < 1e-12);
        assert!((r.bpp_saving - 0.2857142857).abs() < 1e-9);
        assert_eq!(r.overhead_bpp, 0.0);
    }
}
