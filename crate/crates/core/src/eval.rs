//! Per-frame quality evaluation against ground truth.
//!
//! CSV schema (`quality.csv`): `frame_index,psnr_db,ssim,is_keyframe,is_redundant`
//! with 1-based frame indices and `0`/`1` flags.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::VideoSequence;
use crate::keyframe::KeyFrameIndex;
use crate::metrics::{psnr, ssim};
use crate::redundancy::RedundancyIndex;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameQuality {
    pub frame_index: usize,
    pub psnr_db: f64,
    pub ssim: f64,
    #[serde(with = "flag")]
    pub is_keyframe: bool,
    #[serde(with = "flag")]
    pub is_redundant: bool,
}

mod flag {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(serde::de::Error::custom(format!("flag must be 0 or 1, got {v}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub frames: usize,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

impl Aggregate {
    /// Mean over the frames accepted by `keep`; `None` when none are.
    pub fn over<'a>(frames: impl IntoIterator<Item = &'a FrameQuality>, keep: impl Fn(&FrameQuality) -> bool) -> Option<Self> {
        let (mut n, mut p, mut s) = (0usize, 0.0, 0.0);
        for f in frames.into_iter().filter(|f| keep(f)) {
            n += 1;
            p += f.psnr_db;
            s += f.ssim;
        }
        (n > 0).then(|| Aggregate {
            frames: n,
            mean_psnr: p / n as f64,
            mean_ssim: s / n as f64,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalFlags {
    /// Compute the aggregate that leaves out key positions.
    pub exclude_keys: bool,
    /// Also compute the aggregate that leaves out key and restored redundant positions.
    pub exclude_redundant: bool,
}

impl Default for EvalFlags {
    fn default() -> Self {
        EvalFlags {
            exclude_keys: true,
            exclude_redundant: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub frames: Vec<FrameQuality>,
    pub all_frames: Aggregate,
    /// `None` when disabled or when every frame is a key frame.
    pub excluding_keys: Option<Aggregate>,
    pub excluding_keys_and_redundant: Option<Aggregate>,
}

impl QualityReport {
    pub fn from_frames(frames: Vec<FrameQuality>, flags: &EvalFlags) -> Result<Self> {
        let all_frames = Aggregate::over(&frames, |_| true)
            .ok_or_else(|| Error::InvalidArgument("quality report has no frames".into()))?;
        let excluding_keys = if flags.exclude_keys {
            Aggregate::over(&frames, |f| !f.is_keyframe)
        } else {
            None
        };
        let excluding_keys_and_redundant = if flags.exclude_redundant {
            Aggregate::over(&frames, |f| !f.is_keyframe && !f.is_redundant)
        } else {
            None
        };
        Ok(QualityReport {
            frames,
            all_frames,
            excluding_keys,
            excluding_keys_and_redundant,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for f in &self.frames {
            w.serialize(f).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, flags: &EvalFlags) -> Result<Self> {
        Self::from_frames(read_quality_csv(path)?, flags)
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Malformed(format!("{}: {e}", path.display()))
    }
}

pub fn read_quality_csv(path: &Path) -> Result<Vec<FrameQuality>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(|e| csv_error(path, e)))
        .collect()
}

/// Per-frame PSNR/SSIM of `recon` against `truth` plus aggregates.
pub fn evaluate(
    recon: &VideoSequence,
    truth: &VideoSequence,
    key_index: &KeyFrameIndex,
    redundant_index: &RedundancyIndex,
    flags: &EvalFlags,
) -> Result<QualityReport> {
    if recon.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "reconstruction has {} frames, ground truth {}",
            recon.len(),
            truth.len()
        )));
    }
    if recon.width() != truth.width() || recon.height() != truth.height() {
        return Err(Error::DimensionMismatch(format!(
            "reconstruction is {}x{}, ground truth {}x{}",
            recon.width(),
            recon.height(),
            truth.width(),
            truth.height()
        )));
    }
    let (recon, truth) = (recon.to_luma(), truth.to_luma());
    let frames = recon
        .frames()
        .par_iter()
        .zip(truth.frames().par_iter())
        .enumerate()
        .map(|(i, (r, t))| {
            Ok(FrameQuality {
                frame_index: i + 1,
                psnr_db: psnr(r, t)?,
                ssim: ssim(r, t)?,
                is_keyframe: key_index.contains(i + 1),
                is_redundant: redundant_index.contains(i + 1),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    QualityReport::from_frames(frames, flags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{Frame, FrameRate};

    fn seq(offset: u8) -> VideoSequence {
        VideoSequence::new(
            (0..4)
                .map(|i| Frame::from_fn(16, 16, |x, y| (x * 7 + y * 3 + i * 11) as u8 + offset).unwrap())
                .collect(),
            FrameRate::integer(10),
        )
        .unwrap()
    }

    #[test]
    fn identical_is_capped() {
        let s = seq(0);
        let r = evaluate(
            &s,
            &s,
            &KeyFrameIndex::new(vec![1], 4).unwrap(),
            &RedundancyIndex::empty(),
            &EvalFlags::default(),
        )
        .unwrap();
        assert!(r.frames.iter().all(|f| f.psnr_db == 100.0 && (f.ssim - 1.0).abs() < 1e-12));
        assert_eq!(r.excluding_keys.unwrap().frames, 3);
    }

    #[test]
    fn length_mismatch() {
        let a = seq(0);
        let b = VideoSequence::new(a.frames()[..3].to_vec(), a.fps()).unwrap();
        let err = evaluate(&a, &b, &KeyFrameIndex::new(vec![1], 4).unwrap(), &RedundancyIndex::empty(), &EvalFlags::default());
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = evaluate(
            &seq(0),
            &seq(3),
            &KeyFrameIndex::new(vec![2], 4).unwrap(),
            &RedundancyIndex::new(vec![3], 4).unwrap(),
            &EvalFlags {
                exclude_keys: true,
                exclude_redundant: true,
            },
        )
        .unwrap();
        let p = dir.path().join("q.csv");
        r.write_csv(&p).unwrap();
        let header = std::fs::read_to_string(&p).unwrap();
        assert!(header.starts_with("frame_index,psnr_db,ssim,is_keyframe,is_redundant\n1,"));
        let back = QualityReport::read_csv(&p, &EvalFlags { exclude_keys: true, exclude_redundant: true }).unwrap();
        assert_eq!(back, r);
    }
}
