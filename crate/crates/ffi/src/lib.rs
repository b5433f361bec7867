//! C ABI for survtx.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`SvtStatus`]. On failure a
//!   thread-local message is available through [`svt_last_error_message`].
//! * Objects are opaque handles created by `*_new`/producer functions and
//!   released with the matching `*_free`. Freeing `NULL` is a no-op.
//! * Frame indices are 1-based.
//! * Functions that return index lists take a caller buffer and its
//!   capacity. The number of indices is always written to `out_count`; when
//!   the buffer is too small `SVT_STATUS_BUFFER_TOO_SMALL` is returned and
//!   nothing else is written.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use survtx::endcloud::{process_bundle, run_end_pipeline, EndConfig, PipelineOrder};
use survtx::io::{read_sequence, write_sequence, SequenceFormat};
use survtx::keyframe::{select, SelectionConfig, SelectionMode};
use survtx::metrics::{interframe_psnr_curve, psnr, ssim};
use survtx::reconstruct::{ClassicalReconstructor, ExternalReconstructor, Reconstructor};
use survtx::redundancy::{detect_redundant, RedundancyConfig};
use survtx::resample::{downsample_sequence, upsample_sequence};
use survtx::{CodecAdapter, Error, Frame, FrameRate, Layout, VideoSequence};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SvtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidFrame = 3,
    DimensionMismatch = 4,
    Truncated = 5,
    Malformed = 6,
    Checksum = 7,
    Protocol = 8,
    External = 9,
    Contract = 10,
    Io = 11,
    BufferTooSmall = 12,
    IndexOutOfRange = 13,
    Panic = 14,
}

impl From<&Error> for SvtStatus {
    fn from(e: &Error) -> Self {
        match e.root() {
            Error::InvalidFrame(_) => SvtStatus::InvalidFrame,
            Error::DimensionMismatch(_) => SvtStatus::DimensionMismatch,
            Error::InvalidArgument(_) => SvtStatus::InvalidArgument,
            Error::Truncated(_) => SvtStatus::Truncated,
            Error::Malformed(_) | Error::Image(_) => SvtStatus::Malformed,
            Error::Checksum(_) => SvtStatus::Checksum,
            Error::Protocol(_) => SvtStatus::Protocol,
            Error::External(_) => SvtStatus::External,
            Error::Contract(_) => SvtStatus::Contract,
            Error::Io { .. } | Error::Stream(_) => SvtStatus::Io,
            Error::Stage { .. } => SvtStatus::InvalidArgument,
        }
    }
}

/// Ordered frames with a frame rate. Frames pushed into a sequence must all
/// share one shape.
pub struct SvtSequence {
    frames: Vec<Frame>,
    fps: FrameRate,
}

impl SvtSequence {
    fn from_video(v: VideoSequence) -> Self {
        let fps = v.fps();
        SvtSequence { frames: v.into_frames(), fps }
    }

    fn to_video(&self) -> Result<VideoSequence, Failure> {
        Ok(VideoSequence::new(self.frames.clone(), self.fps)?)
    }
}

/// Owned byte buffer returned by the library.
pub struct SvtBuffer {
    bytes: Vec<u8>,
}

/// Key-frame selection settings. `d_min` and `max_interior` use 0 for
/// "unset".
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SvtSelectionConfig {
    /// 0 = fixed interval, 1 = adaptive.
    pub mode: u32,
    pub k: usize,
    pub w: usize,
    pub d_min: usize,
    pub include_endpoints: bool,
    pub max_interior: usize,
}

/// End-node pipeline settings.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SvtEndConfig {
    pub selection: SvtSelectionConfig,
    pub tau_int: f64,
    pub tau_mot: f64,
    pub m: u8,
    /// 0 = key frames first, 1 = redundancy first.
    pub order: u32,
    pub eliminate_redundant: bool,
}

struct Failure(SvtStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(SvtStatus::from(&e), e.to_string())
    }
}

impl Failure {
    fn null(what: &str) -> Self {
        Failure(SvtStatus::NullPointer, format!("{what} is null"))
    }

    fn arg(msg: impl Into<String>) -> Self {
        Failure(SvtStatus::InvalidArgument, msg.into())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SvtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SvtStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SvtStatus::Panic
        }
    }
}

unsafe fn seq_ref<'a>(p: *const SvtSequence, what: &str) -> Result<&'a SvtSequence, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Failure::arg("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_indices(v: &[usize], out: *mut usize, cap: usize, out_count: *mut usize) -> Result<(), Failure> {
    *out_ptr(out_count, "out_count")? = v.len();
    if v.len() > cap {
        return Err(Failure(
            SvtStatus::BufferTooSmall,
            format!("{} indices do not fit in a buffer of {cap}", v.len()),
        ));
    }
    if !v.is_empty() {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
    }
    Ok(())
}

fn give<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

impl SvtSelectionConfig {
    fn to_core(self) -> Result<SelectionConfig, Failure> {
        let mode = match self.mode {
            0 => SelectionMode::Fixed,
            1 => SelectionMode::Adaptive,
            m => return Err(Failure::arg(format!("unknown selection mode {m}"))),
        };
        let cfg = SelectionConfig {
            mode,
            k: self.k,
            w: self.w,
            d_min: (self.d_min > 0).then_some(self.d_min),
            include_endpoints: self.include_endpoints,
            max_interior: (self.max_interior > 0).then_some(self.max_interior),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SvtEndConfig {
    fn to_core(self) -> Result<EndConfig, Failure> {
        let order = match self.order {
            0 => PipelineOrder::KeyFramesFirst,
            1 => PipelineOrder::RedundancyFirst,
            o => return Err(Failure::arg(format!("unknown pipeline order {o}"))),
        };
        let redundancy = RedundancyConfig { tau_int: self.tau_int, tau_mot: self.tau_mot, m: self.m };
        redundancy.validate()?;
        Ok(EndConfig {
            selection: self.selection.to_core()?,
            redundancy,
            order,
            eliminate_redundant: self.eliminate_redundant,
        })
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn svt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// or 0 when the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn svt_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Default selection settings (fixed interval, k = 15).
#[no_mangle]
pub extern "C" fn svt_selection_config_default() -> SvtSelectionConfig {
    let d = SelectionConfig::default();
    SvtSelectionConfig {
        mode: 0,
        k: d.k,
        w: d.w,
        d_min: 0,
        include_endpoints: d.include_endpoints,
        max_interior: 0,
    }
}

/// Default end-node settings.
#[no_mangle]
pub extern "C" fn svt_end_config_default() -> SvtEndConfig {
    let d = EndConfig::default();
    SvtEndConfig {
        selection: svt_selection_config_default(),
        tau_int: d.redundancy.tau_int,
        tau_mot: d.redundancy.tau_mot,
        m: d.redundancy.m,
        order: 0,
        eliminate_redundant: d.eliminate_redundant,
    }
}

/// Create an empty sequence with frame rate `fps_num / fps_den`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn svt_sequence_new(fps_num: u32, fps_den: u32, out: *mut *mut SvtSequence) -> SvtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let fps = FrameRate::new(fps_num, fps_den)?;
        *out = give(SvtSequence { frames: Vec::new(), fps });
        Ok(())
    })
}

/// # Safety
/// `seq` must be null or a handle from this library that is not used again.
#[no_mangle]
pub unsafe extern "C" fn svt_sequence_free(seq: *mut SvtSequence) {
    if !seq.is_null() {
        drop(Box::from_raw(seq));
    }
}

/// Append a copy of an interleaved 8-bit frame with 1 (luma) or 3 (RGB)
/// channels. `len` must equal `width * height * channels`.
///
/// # Safety
/// `seq` must be a valid handle and `data` must point to `len` readable bytes.
#[no_mangle]
pub unsafe extern "C" fn svt_sequence_push_frame(
    seq: *mut SvtSequence,
    width: usize,
    height: usize,
    channels: usize,
    data: *const u8,
    len: usize,
) -> SvtStatus {
    guard(|| {
        let seq = out_ptr(seq, "seq")?;
        if data.is_null() {
            return Err(Failure::null("data"));
        }
        let layout = Layout::from_channels(channels)?;
        let expected = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(channels))
            .ok_or_else(|| Failure::arg("frame size overflows"))?;
        if len != expected {
            return Err(Failure::arg(format!("{len} bytes for a {width}x{height}x{channels} frame")));
        }
        let frame = Frame::new(width, height, layout, std::slice::from_raw_parts(data, len).to_vec())?;
        if let Some(first) = seq.frames.first() {
            if !frame.same_shape(first) {
                return Err(Failure(
                    SvtStatus::DimensionMismatch,
                    format!(
                        "frame is {width}x{height}x{channels}, sequence is {}x{}x{}",
                        first.width(),
                        first.height(),
                        first.channels()
                    ),
                ));
            }
        }
        seq.frames.push(frame);
        Ok(())
    })
}

/// Number of frames, or 0 for a null handle.
///
/// # Safety
/// `seq` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn svt_sequence_len(seq: *const SvtSequence) -> usize {
    seq.as_ref().map_or(0, |s| s.frames.len())
}

/// Frame shape and rate of a non-empty sequence. Any output pointer may be
/// null.
///
/// # Safety
/// `seq` must be a valid handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn svt_sequence_info(
    seq: *const SvtSequence,
    width: *mut usize,
    height: *mut usize,
    channels: *mut usize,
    fps_num: *mut u32,
    fps_den: *mut u32,
) -> SvtStatus {
    guard(|| {
        let seq = seq_ref(seq, "seq")?;
        let first = seq.frames.first().ok_or_else(|| Failure::arg("sequence is empty"))?;
        for (p, v) in [(width, first.width()), (height, first.height()), (channels, first.channels())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        if let Some(p) = fps_num.as_mut() {
            *p = seq.fps.num;
        }
        if let Some(p) = fps_den.as_mut() {
            *p = seq.fps.den;
        }
        Ok(())
    })
}

/// Borrow the samples of frame `index` (1-based). The pointer stays valid
/// until the sequence is modified or freed.
///
/// # Safety
/// `seq` must be a valid handle; `data` and `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn svt_sequence_frame(
    seq: *const SvtSequence,
    index: usize,
    data: *mut *const u8,
    len: *mut usize,
) -> SvtStatus {
    guard(|| {
        let seq = seq_ref(seq, "seq")?;
        let (data, len) = (out_ptr(data, "data")?, out_ptr(len, "len")?);
        let f = index
            .checked_sub(1)
            .and_then(|i| seq.frames.get(i))
            .ok_or_else(|| Failure(SvtStatus::IndexOutOfRange, format!("frame {index} of {}", seq.frames.len())))?;
        *data = f.data().as_ptr();
        *len = f.data().len();
        Ok(())
    })
}

/// Read a raw file (with `.hdr` sidecar) or a PNG directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svt_sequence_read(path: *const c_char, out: *mut *mut SvtSequence) -> SvtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let v = read_sequence(&path_arg(path)?, None)?;
        *out = give(SvtSequence::from_video(v));
        Ok(())
    })
}

/// Write a sequence as raw planar 4:2:0 (`as_image_dir == false`) or as a
/// PNG directory.
///
/// # Safety
/// `seq` must be a valid handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn svt_sequence_write(
    seq: *const SvtSequence,
    path: *const c_char,
    as_image_dir: bool,
) -> SvtStatus {
    guard(|| {
        let v = seq_ref(seq, "seq")?.to_video()?;
        let format = if as_image_dir { SequenceFormat::ImageDir } else { SequenceFormat::Raw };
        write_sequence(&path_arg(path)?, &v, format)?;
        Ok(())
    })
}

/// 4x bicubic downsampling into a new sequence.
///
/// # Safety
/// `seq` must be a valid handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svt_downsample(seq: *const SvtSequence, out: *mut *mut SvtSequence) -> SvtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let v = downsample_sequence(&seq_ref(seq, "seq")?.to_video()?)?;
        *out = give(SvtSequence::from_video(v));
        Ok(())
    })
}

/// 4x bicubic upsampling into a new sequence.
///
/// # Safety
/// `seq` must be a valid handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svt_upsample(seq: *const SvtSequence, out: *mut *mut SvtSequence) -> SvtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let v = upsample_sequence(&seq_ref(seq, "seq")?.to_video()?);
        *out = give(SvtSequence::from_video(v));
        Ok(())
    })
}

unsafe fn frame_pair<'a>(
    a: *const SvtSequence,
    b: *const SvtSequence,
    index: usize,
) -> Result<(&'a Frame, &'a Frame), Failure> {
    let get = |s: &'a SvtSequence| {
        index
            .checked_sub(1)
            .and_then(|i| s.frames.get(i))
            .ok_or_else(|| Failure(SvtStatus::IndexOutOfRange, format!("frame {index} of {}", s.frames.len())))
    };
    Ok((get(seq_ref(a, "a")?)?, get(seq_ref(b, "b")?)?))
}

/// Luma PSNR in dB (capped at 100) between frame `index` of `a` and `b`.
///
/// # Safety
/// `a` and `b` must be valid handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svt_psnr(
    a: *const SvtSequence,
    b: *const SvtSequence,
    index: usize,
    out: *mut f64,
) -> SvtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (x, y) = frame_pair(a, b, index)?;
        *out = psnr(x, y)?;
        Ok(())
    })
}

/// Luma SSIM between frame `index` of `a` and `b`.
///
/// # Safety
/// `a` and `b` must be valid handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svt_ssim(
    a: *const SvtSequence,
    b: *const SvtSequence,
    index: usize,
    out: *mut f64,
) -> SvtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let (x, y) = frame_pair(a, b, index)?;
        *out = ssim(x, y)?;
        Ok(())
    })
}

/// Redundant frame indices of `seq` under the given thresholds.
///
/// # Safety
/// `seq` must be a valid handle, `out` must hold `cap` entries (or be null
/// when `cap` is 0) and `out_count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn svt_detect_redundant(
    seq: *const SvtSequence,
    tau_int: f64,
    tau_mot: f64,
    m: u8,
    out: *mut usize,
    cap: usize,
    out_count: *mut usize,
) -> SvtStatus {
    guard(|| {
        let cfg = RedundancyConfig { tau_int, tau_mot, m };
        cfg.validate()?;
        let idx = detect_redundant(&seq_ref(seq, "seq")?.to_video()?, &cfg)?;
        write_indices(idx.as_slice(), out, cap, out_count)
    })
}

/// Key-frame indices for `seq` (an LR sequence). Fixed-interval selection
/// only uses the frame count; adaptive selection uses the inter-frame PSNR
/// curve of the frames.
///
/// # Safety
/// `seq` and `cfg` must be valid; `out`/`cap`/`out_count` as for
/// [`svt_detect_redundant`].
#[no_mangle]
pub unsafe extern "C" fn svt_select_keyframes(
    seq: *const SvtSequence,
    cfg: *const SvtSelectionConfig,
    out: *mut usize,
    cap: usize,
    out_count: *mut usize,
) -> SvtStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| Failure::null("cfg"))?.to_core()?;
        let v = seq_ref(seq, "seq")?.to_video()?;
        let curve = if cfg.mode == SelectionMode::Adaptive && v.len() >= 2 {
            Some(interframe_psnr_curve(&v)?)
        } else {
            None
        };
        let idx = select(&cfg, v.len(), curve.as_ref())?;
        write_indices(idx.as_slice(), out, cap, out_count)
    })
}

/// Run the end-node pipeline on an HR sequence with the raw codec and return
/// the serialized bundle.
///
/// # Safety
/// `hr` and `cfg` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svt_end_pipeline(
    hr: *const SvtSequence,
    cfg: *const SvtEndConfig,
    out: *mut *mut SvtBuffer,
) -> SvtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let cfg = cfg.as_ref().ok_or_else(|| Failure::null("cfg"))?.to_core()?;
        let end = run_end_pipeline(&seq_ref(hr, "hr")?.to_video()?, &cfg, &CodecAdapter::Raw)?;
        *out = give(SvtBuffer { bytes: end.packed.bytes });
        Ok(())
    })
}

/// Borrow the contents of a buffer. The pointer stays valid until the buffer
/// is freed.
///
/// # Safety
/// `buf` must be a valid handle; `data` and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn svt_buffer_data(buf: *const SvtBuffer, data: *mut *const u8, len: *mut usize) -> SvtStatus {
    guard(|| {
        let buf = buf.as_ref().ok_or_else(|| Failure::null("buf"))?;
        *out_ptr(data, "data")? = buf.bytes.as_ptr();
        *out_ptr(len, "len")? = buf.bytes.len();
        Ok(())
    })
}

/// # Safety
/// `buf` must be null or a handle from this library that is not used again.
#[no_mangle]
pub unsafe extern "C" fn svt_buffer_free(buf: *mut SvtBuffer) {
    if !buf.is_null() {
        drop(Box::from_raw(buf));
    }
}

/// Decode a raw-codec bundle and rebuild the full-length HR sequence.
/// `command` selects the external reconstructor (command template as in the
/// CLI); null uses bicubic upsampling with key-frame substitution.
///
/// # Safety
/// `bytes` must point to `len` readable bytes, `command` must be null or
/// NUL-terminated, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn svt_cloud_reconstruct(
    bytes: *const u8,
    len: usize,
    command: *const c_char,
    out: *mut *mut SvtSequence,
) -> SvtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if bytes.is_null() {
            return Err(Failure::null("bytes"));
        }
        let bytes = std::slice::from_raw_parts(bytes, len);
        let rec: Box<dyn Reconstructor> = if command.is_null() {
            Box::new(ClassicalReconstructor)
        } else {
            let cmd = CStr::from_ptr(command).to_str().map_err(|_| Failure::arg("command is not valid UTF-8"))?;
            Box::new(ExternalReconstructor::new(cmd))
        };
        let cloud = process_bundle(bytes, &CodecAdapter::Raw, rec.as_ref())?;
        *out = give(SvtSequence::from_video(cloud.hr));
        Ok(())
    })
}
