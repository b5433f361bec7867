//! The transmitted code stream.
//!
//! Byte layout, all integers little-endian:
//!
//! ```text
//! header
//!   magic            4   "SVB1"
//!   version          u16 1
//!   hr_width         u32
//!   hr_height        u32
//!   fps_num          u32
//!   fps_den          u32
//!   frame_count      u32 original T, including redundant frames
//!   channels         u8  1 or 3
//!   lr_codec         u8  0 raw, 1 external
//!   key_codec        u8  0 raw, 1 external
//!   key_count        u32 N
//!   key_indices      N x u32, 1-based, strictly increasing
//!   redundant_count  u32 R
//!   redundant_idx    R x u32, 1-based, strictly increasing
//!   lr_len           u32 byte length of the LR payload
//!   key_lens         N x u32 byte length of each key payload
//!   header_crc       u32 CRC-32 of every preceding header byte
//! sections
//!   lr_payload       lr_len bytes, then u32 CRC-32 of the payload
//!   key_payload[i]   key_lens[i] bytes, then u32 CRC-32, for i in 0..N
//! ```
//!
//! Nothing may follow the last section. The LR payload holds the `T - R`
//! surviving frames at `hr / 4` resolution; key payloads hold full-resolution
//! frames in index order.

use crc32fast::hash as crc32;
use serde::{Deserialize, Serialize};

use crate::codec::{CodecAdapter, CodecId};
use crate::error::{Error, Result};
use crate::frame::{Frame, FrameRate, Layout, VideoSequence};
use crate::keyframe::KeyFrameIndex;
use crate::metrics::BppRow;
use crate::redundancy::RedundancyIndex;
use crate::resample::SCALE;

pub const MAGIC: [u8; 4] = *b"SVB1";
pub const VERSION: u16 = 1;

/// Fixed-size part of the header before the key index list.
const FIXED_HEADER: usize = 4 + 2 + 4 * 5 + 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub hr_width: usize,
    pub hr_height: usize,
    pub fps: FrameRate,
    /// Original frame count T.
    pub frame_count: usize,
    pub layout: Layout,
}

impl BundleMeta {
    pub fn lr_width(&self) -> usize {
        self.hr_width / SCALE
    }

    pub fn lr_height(&self) -> usize {
        self.hr_height / SCALE
    }
}

/// Byte counts per section of a serialized bundle.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionSizes {
    /// Header, index lists, section checksums.
    pub overhead_bytes: usize,
    pub lr_bytes: usize,
    pub key_bytes: usize,
}

impl SectionSizes {
    pub fn total_bytes(&self) -> usize {
        self.overhead_bytes + self.lr_bytes + self.key_bytes
    }

    /// Bpp rows against the HR pixel count times the original frame count.
    pub fn bpp_rows(&self, meta: &BundleMeta) -> Result<[BppRow; 3]> {
        let row = |label: &str, bytes: usize| {
            BppRow::from_bits(label, bytes as u64 * 8, meta.hr_width, meta.hr_height, meta.frame_count)
        };
        Ok([
            row("lr_video", self.lr_bytes)?,
            row("key_frames", self.key_bytes)?,
            row("overhead", self.overhead_bytes)?,
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedBundle {
    pub bytes: Vec<u8>,
    pub sizes: SectionSizes,
}

/// Decoded contents of a bundle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedBundle {
    pub meta: BundleMeta,
    pub lr: VideoSequence,
    pub keyframes: Vec<Frame>,
    pub key_index: KeyFrameIndex,
    pub redundant_index: RedundancyIndex,
    pub lr_codec: CodecId,
    pub key_codec: CodecId,
}

fn check_meta(meta: &BundleMeta) -> Result<()> {
    if !meta.hr_width.is_multiple_of(SCALE) || !meta.hr_height.is_multiple_of(SCALE) {
        return Err(Error::DimensionMismatch(format!(
            "HR size {}x{} is not divisible by {SCALE}",
            meta.hr_width, meta.hr_height
        )));
    }
    if meta.frame_count == 0 {
        return Err(Error::InvalidArgument("frame count is zero".into()));
    }
    for (name, v) in [
        ("width", meta.hr_width),
        ("height", meta.hr_height),
        ("frame count", meta.frame_count),
    ] {
        if u32::try_from(v).is_err() {
            return Err(Error::InvalidArgument(format!("{name} {v} does not fit in u32")));
        }
    }
    Ok(())
}

fn check_disjoint(keys: &KeyFrameIndex, red: &RedundancyIndex) -> Result<()> {
    if let Some(&both) = keys.as_slice().iter().find(|&&k| red.contains(k)) {
        return Err(Error::InvalidArgument(format!(
            "frame {both} is both a key frame and redundant"
        )));
    }
    Ok(())
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v)
        .map_err(|_| Error::InvalidArgument(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

/// Serialize the stream bundle.
pub fn pack(
    lr_nonredundant: &VideoSequence,
    keyframes: &[Frame],
    key_index: &KeyFrameIndex,
    redundant_index: &RedundancyIndex,
    codec: &CodecAdapter,
    meta: &BundleMeta,
) -> Result<PackedBundle> {
    check_meta(meta)?;
    KeyFrameIndex::new(key_index.as_slice().to_vec(), meta.frame_count)?;
    RedundancyIndex::new(redundant_index.as_slice().to_vec(), meta.frame_count)?;
    check_disjoint(key_index, redundant_index)?;
    if keyframes.len() != key_index.len() {
        return Err(Error::InvalidArgument(format!(
            "{} key frames for {} key indices",
            keyframes.len(),
            key_index.len()
        )));
    }
    if lr_nonredundant.len() + redundant_index.len() != meta.frame_count {
        return Err(Error::InvalidArgument(format!(
            "{} LR frames plus {} redundant positions != {} frames",
            lr_nonredundant.len(),
            redundant_index.len(),
            meta.frame_count
        )));
    }
    if lr_nonredundant.width() != meta.lr_width()
        || lr_nonredundant.height() != meta.lr_height()
        || lr_nonredundant.layout() != meta.layout
    {
        return Err(Error::DimensionMismatch(format!(
            "LR frames are {}x{}, expected {}x{}",
            lr_nonredundant.width(),
            lr_nonredundant.height(),
            meta.lr_width(),
            meta.lr_height()
        )));
    }
    if let Some(bad) = keyframes.iter().find(|f| {
        f.width() != meta.hr_width || f.height() != meta.hr_height || f.layout() != meta.layout
    }) {
        return Err(Error::DimensionMismatch(format!(
            "key frame is {}x{}, expected {}x{}",
            bad.width(),
            bad.height(),
            meta.hr_width,
            meta.hr_height
        )));
    }

    let lr_payload = codec.encode_video(lr_nonredundant)?;
    let key_payloads = keyframes
        .iter()
        .map(|f| codec.encode_image(f))
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(
        64 + lr_payload.len() + key_payloads.iter().map(|p| p.len() + 8).sum::<usize>(),
    );
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u32(&mut out, meta.hr_width)?;
    put_u32(&mut out, meta.hr_height)?;
    put_u32(&mut out, meta.fps.num as usize)?;
    put_u32(&mut out, meta.fps.den as usize)?;
    put_u32(&mut out, meta.frame_count)?;
    out.push(meta.layout.channels() as u8);
    out.push(codec.video_id() as u8);
    out.push(codec.image_id() as u8);
    put_u32(&mut out, key_index.len())?;
    for &k in key_index.as_slice() {
        put_u32(&mut out, k)?;
    }
    put_u32(&mut out, redundant_index.len())?;
    for &r in redundant_index.as_slice() {
        put_u32(&mut out, r)?;
    }
    put_u32(&mut out, lr_payload.len())?;
    for p in &key_payloads {
        put_u32(&mut out, p.len())?;
    }
    let header_crc = crc32(&out);
    out.extend_from_slice(&header_crc.to_le_bytes());
    let header_len = out.len();

    for p in std::iter::once(&lr_payload).chain(&key_payloads) {
        out.extend_from_slice(p);
        out.extend_from_slice(&crc32(p).to_le_bytes());
    }

    let key_bytes: usize = key_payloads.iter().map(Vec::len).sum();
    let sizes = SectionSizes {
        overhead_bytes: header_len + 4 * (1 + key_payloads.len()),
        lr_bytes: lr_payload.len(),
        key_bytes,
    };
    debug_assert_eq!(sizes.total_bytes(), out.len());
    Ok(PackedBundle { bytes: out, sizes })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::Truncated(format!(
                    "{what}: need {n} bytes at offset {}, stream has {}",
                    self.pos,
                    self.buf.len()
                ))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u32_list(&mut self, n: usize, what: &str) -> Result<Vec<usize>> {
        // Bound the allocation by what the stream can actually hold.
        if n > (self.buf.len() - self.pos) / 4 {
            return Err(Error::Truncated(format!("{what}: {n} entries exceed the stream")));
        }
        (0..n).map(|_| self.u32(what).map(|v| v as usize)).collect()
    }
}

/// Parsed header plus payload slices, with every checksum verified.
struct Parsed<'a> {
    meta: BundleMeta,
    lr_codec: CodecId,
    key_codec: CodecId,
    key_index: KeyFrameIndex,
    redundant_index: RedundancyIndex,
    header_len: usize,
    lr_payload: &'a [u8],
    key_payloads: Vec<&'a [u8]>,
}

fn parse(bytes: &[u8]) -> Result<Parsed<'_>> {
    if bytes.len() >= 4 && bytes[..4] == MAGIC && bytes.len() < FIXED_HEADER {
        return Err(Error::Truncated(format!("{} bytes is shorter than the fixed header", bytes.len())));
    }
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Malformed("bad magic, not a stream bundle".into()));
    }
    let version = c.u16("version")?;
    if version != VERSION {
        return Err(Error::Malformed(format!("unsupported bundle version {version}")));
    }
    let hr_width = c.u32("width")? as usize;
    let hr_height = c.u32("height")? as usize;
    let fps_num = c.u32("fps")?;
    let fps_den = c.u32("fps")?;
    let frame_count = c.u32("frame count")? as usize;
    let channels = c.u8("channels")?;
    let lr_codec = c.u8("codec")?;
    let key_codec = c.u8("codec")?;
    let key_count = c.u32("key count")? as usize;
    let keys = c.u32_list(key_count, "key indices")?;
    let red_count = c.u32("redundant count")? as usize;
    let reds = c.u32_list(red_count, "redundant indices")?;
    let lr_len = c.u32("LR length")? as usize;
    let key_lens = c.u32_list(key_count, "key lengths")?;
    let header_len = c.pos;
    let stored_crc = c.u32("header checksum")?;
    if crc32(&bytes[..header_len]) != stored_crc {
        return Err(Error::Checksum("header".into()));
    }

    // The header checksum passed; remaining validation guards against
    // well-formed but inconsistent writers.
    let meta = BundleMeta {
        hr_width,
        hr_height,
        fps: FrameRate::new(fps_num, fps_den).map_err(|e| Error::Malformed(e.to_string()))?,
        frame_count,
        layout: Layout::from_channels(channels as usize)
            .map_err(|e| Error::Malformed(e.to_string()))?,
    };
    check_meta(&meta).map_err(|e| Error::Malformed(e.to_string()))?;
    let lr_codec = CodecId::from_u8(lr_codec)?;
    let key_codec = CodecId::from_u8(key_codec)?;
    let key_index =
        KeyFrameIndex::new(keys, frame_count).map_err(|e| Error::Malformed(e.to_string()))?;
    let redundant_index =
        RedundancyIndex::new(reds, frame_count).map_err(|e| Error::Malformed(e.to_string()))?;
    check_disjoint(&key_index, &redundant_index).map_err(|e| Error::Malformed(e.to_string()))?;

    let mut section = |len: usize, name: String| -> Result<&[u8]> {
        let payload = c.take(len, &name)?;
        let crc = c.u32(&name)?;
        if crc32(payload) != crc {
            return Err(Error::Checksum(name));
        }
        Ok(payload)
    };
    let lr_payload = section(lr_len, "LR section".into())?;
    let key_payloads = key_lens
        .iter()
        .zip(key_index.as_slice())
        .map(|(&len, &k)| section(len, format!("key frame {k} section")))
        .collect::<Result<Vec<_>>>()?;
    if c.pos != bytes.len() {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after the last section",
            bytes.len() - c.pos
        )));
    }
    Ok(Parsed {
        meta,
        lr_codec,
        key_codec,
        key_index,
        redundant_index,
        header_len: header_len + 4,
        lr_payload,
        key_payloads,
    })
}

/// Parse, verify, and decode a bundle.
pub fn unpack(bytes: &[u8], codec: &CodecAdapter) -> Result<DecodedBundle> {
    let p = parse(bytes)?;
    let meta = p.meta;
    let surviving = meta.frame_count - p.redundant_index.len();
    let lr = codec.decode_video(
        p.lr_codec,
        p.lr_payload,
        meta.lr_width(),
        meta.lr_height(),
        meta.layout,
        meta.fps,
        surviving,
    )?;
    let keyframes = p
        .key_payloads
        .iter()
        .map(|payload| codec.decode_image(p.key_codec, payload, meta.hr_width, meta.hr_height, meta.layout))
        .collect::<Result<Vec<_>>>()?;
    Ok(DecodedBundle {
        meta,
        lr,
        keyframes,
        key_index: p.key_index,
        redundant_index: p.redundant_index,
        lr_codec: p.lr_codec,
        key_codec: p.key_codec,
    })
}

/// Section sizes of a serialized bundle (checksums are verified first).
pub fn measure_bits(bytes: &[u8]) -> Result<(BundleMeta, SectionSizes)> {
    let p = parse(bytes)?;
    let sizes = SectionSizes {
        overhead_bytes: p.header_len + 4 * (1 + p.key_payloads.len()),
        lr_bytes: p.lr_payload.len(),
        key_bytes: p.key_payloads.iter().map(|s| s.len()).sum(),
    };
    Ok((p.meta, sizes))
}
