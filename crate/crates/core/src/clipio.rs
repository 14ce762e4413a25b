//! The PBVC clip container: timestamped RGB frames plus timestamped BVP
//! ground truth in a single little-endian file.
//!
//! Layout: magic `PBVC`, version `u16 = 1`, width `u16`, height `u16`,
//! frame_count `u32`, nominal_fps `f32`, bvp_count `u32`, meta_len `u32`,
//! meta bytes (UTF-8 JSON), frame_ts `f64 x frame_count`, frames
//! `u8 x frame_count*h*w*3`, bvp_ts `f64 x bvp_count`, bvp_vals
//! `f32 x bvp_count`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::linear_interp;

pub const CLIP_MAGIC: &[u8; 4] = b"PBVC";
pub const CLIP_VERSION: u16 = 1;

/// Offsets are snapped to this grid (2^-20 s) so that shifting epoch-scale
/// timestamps forth and back is exact.
const OFFSET_QUANTUM: f64 = 1.0 / 1_048_576.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ClipContainer {
    pub width: u16,
    pub height: u16,
    /// Advisory only; timestamps are authoritative.
    pub nominal_fps: f32,
    /// `frame_count x height x width x 3`, RGB order.
    pub frames: Vec<u8>,
    pub frame_ts: Vec<f64>,
    pub bvp_vals: Vec<f32>,
    pub bvp_ts: Vec<f64>,
    pub meta: String,
}

/// Header fields as printed by `inspect`.
#[derive(Debug, Clone, Serialize)]
pub struct ClipHeader {
    pub version: u16,
    pub width: u16,
    pub height: u16,
    pub frame_count: usize,
    pub nominal_fps: f32,
    pub bvp_count: usize,
    pub meta: serde_json::Value,
    pub duration_s: f64,
    pub effective_fps: f64,
}

impl ClipContainer {
    pub fn validate(&self) -> Result<()> {
        let frame_len = self.frame_len();
        if self.frames.len() != self.frame_ts.len() * frame_len {
            return Err(Error::Format(format!(
                "{} frame bytes for {} timestamps of {}x{} frames",
                self.frames.len(),
                self.frame_ts.len(),
                self.width,
                self.height
            )));
        }
        if self.bvp_ts.len() != self.bvp_vals.len() {
            return Err(Error::Format(format!(
                "{} BVP timestamps for {} BVP values",
                self.bvp_ts.len(),
                self.bvp_vals.len()
            )));
        }
        for (name, ts) in [("frame_ts", &self.frame_ts), ("bvp_ts", &self.bvp_ts)] {
            if ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Ordering(name.to_string()));
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.frame_ts.len()
    }

    /// Bytes per frame (`h * w * 3`).
    pub fn frame_len(&self) -> usize {
        self.height as usize * self.width as usize * 3
    }

    pub fn frame(&self, i: usize) -> &[u8] {
        let n = self.frame_len();
        &self.frames[i * n..(i + 1) * n]
    }

    pub fn duration(&self) -> f64 {
        match (self.frame_ts.first(), self.frame_ts.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    /// Frame rate implied by the timestamps, falling back to the nominal rate
    /// for single-frame clips.
    pub fn effective_fps(&self) -> f64 {
        let n = self.frame_count();
        if n < 2 || self.duration() <= 0.0 {
            return self.nominal_fps as f64;
        }
        (n - 1) as f64 / self.duration()
    }

    pub fn header(&self) -> ClipHeader {
        ClipHeader {
            version: CLIP_VERSION,
            width: self.width,
            height: self.height,
            frame_count: self.frame_count(),
            nominal_fps: self.nominal_fps,
            bvp_count: self.bvp_vals.len(),
            meta: serde_json::from_str(&self.meta)
                .unwrap_or_else(|_| serde_json::Value::String(self.meta.clone())),
            duration_s: self.duration(),
            effective_fps: self.effective_fps(),
        }
    }

    pub fn to_writer<W: Write>(&self, mut w: W) -> Result<()> {
        self.validate()?;
        let dim = |v: usize, what: &str| {
            u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} exceeds u32")))
        };
        w.write_all(CLIP_MAGIC)?;
        w.write_all(&CLIP_VERSION.to_le_bytes())?;
        w.write_all(&self.width.to_le_bytes())?;
        w.write_all(&self.height.to_le_bytes())?;
        w.write_all(&dim(self.frame_count(), "frame count")?.to_le_bytes())?;
        w.write_all(&self.nominal_fps.to_le_bytes())?;
        w.write_all(&dim(self.bvp_vals.len(), "bvp count")?.to_le_bytes())?;
        w.write_all(&dim(self.meta.len(), "meta length")?.to_le_bytes())?;
        w.write_all(self.meta.as_bytes())?;
        for t in &self.frame_ts {
            w.write_all(&t.to_le_bytes())?;
        }
        w.write_all(&self.frames)?;
        for t in &self.bvp_ts {
            w.write_all(&t.to_le_bytes())?;
        }
        for v in &self.bvp_vals {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_reader<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CLIP_MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}, expected PBVC")));
        }
        let version = read_u16(&mut r)?;
        if version != CLIP_VERSION {
            return Err(Error::Format(format!(
                "unsupported container version {version}"
            )));
        }
        let width = read_u16(&mut r)?;
        let height = read_u16(&mut r)?;
        let frame_count = read_u32(&mut r)? as usize;
        let nominal_fps = f32::from_le_bytes(read_array(&mut r)?);
        let bvp_count = read_u32(&mut r)? as usize;
        let meta_len = read_u32(&mut r)? as usize;

        let meta = String::from_utf8(read_vec(&mut r, meta_len)?)
            .map_err(|e| Error::Format(format!("meta is not UTF-8: {e}")))?;
        let frame_ts = read_vec(&mut r, frame_count * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let frames = read_vec(&mut r, frame_count * height as usize * width as usize * 3)?;
        let bvp_ts = read_vec(&mut r, bvp_count * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let bvp_vals = read_vec(&mut r, bvp_count * 4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();

        let clip = Self {
            width,
            height,
            nominal_fps,
            frames,
            frame_ts,
            bvp_vals,
            bvp_ts,
            meta,
        };
        clip.validate().map_err(|e| match e {
            Error::Ordering(what) => Error::Format(format!("{what} not strictly increasing")),
            other => other,
        })?;
        Ok(clip)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::with_capacity(32 + self.meta.len() + self.frames.len());
        self.to_writer(&mut buf)?;
        Ok(buf)
    }
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    Ok(u16::from_le_bytes(read_array(r)?))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

fn read_vec<R: Read>(r: &mut R, len: usize) -> Result<Vec<u8>> {
    // Read through `take` so a corrupt length field cannot force a huge
    // up-front allocation.
    let mut buf = Vec::new();
    let got = r.by_ref().take(len as u64).read_to_end(&mut buf)?;
    if got != len {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("container truncated: wanted {len} bytes, got {got}"),
        )));
    }
    Ok(buf)
}

pub fn write_clip(clip: &ClipContainer, path: impl AsRef<Path>) -> Result<()> {
    let f = File::create(path)?;
    clip.to_writer(BufWriter::new(f))
}

pub fn read_clip(path: impl AsRef<Path>) -> Result<ClipContainer> {
    let f = File::open(path)?;
    ClipContainer::from_reader(BufReader::new(f))
}

/// BVP resampled onto the frame timestamps, one label per frame.
pub fn align_bvp_to_frames(clip: &ClipContainer) -> Result<Vec<f64>> {
    if clip.bvp_vals.is_empty() {
        return Err(Error::Empty("clip carries no BVP samples".into()));
    }
    let vals: Vec<f64> = clip.bvp_vals.iter().map(|&v| v as f64).collect();
    linear_interp(&clip.bvp_ts, &vals, &clip.frame_ts)
}

/// Copy of `clip` whose BVP timestamps are shifted by `dt` seconds.
///
/// `dt` is snapped to a 2^-20 s grid.
pub fn inject_offset(clip: &ClipContainer, dt: f64) -> ClipContainer {
    let dt = (dt / OFFSET_QUANTUM).round() * OFFSET_QUANTUM;
    let mut out = clip.clone();
    for t in &mut out.bvp_ts {
        *t += dt;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_clip() -> ClipContainer {
        ClipContainer {
            width: 2,
            height: 2,
            nominal_fps: 30.0,
            frames: (0..24).collect(),
            frame_ts: vec![1_700_000_000.0, 1_700_000_000.0 + 1.0 / 30.0],
            bvp_vals: vec![0.5, -0.25, 1.0],
            bvp_ts: vec![1_700_000_000.0, 1_700_000_000.02, 1_700_000_000.04],
            meta: r#"{"subject":"s0"}"#.into(),
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let clip = tiny_clip();
        let bytes = clip.to_bytes().unwrap();
        let back = ClipContainer::from_reader(bytes.as_slice()).unwrap();
        assert_eq!(back, clip);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn header_layout() {
        let bytes = tiny_clip().to_bytes().unwrap();
        assert_eq!(&bytes[0..4], b"PBVC");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u16::from_le_bytes([bytes[6], bytes[7]]), 2);
        assert_eq!(u32::from_le_bytes(bytes[10..14].try_into().unwrap()), 2);
        assert_eq!(f32::from_le_bytes(bytes[14..18].try_into().unwrap()), 30.0);
        assert_eq!(u32::from_le_bytes(bytes[18..22].try_into().unwrap()), 3);
        let meta_len = u32::from_le_bytes(bytes[22..26].try_into().unwrap()) as usize;
        let expected = 26 + meta_len + 2 * 8 + 24 + 3 * 8 + 3 * 4;
        assert_eq!(bytes.len(), expected);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let mut bytes = tiny_clip().to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            ClipContainer::from_reader(bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn bad_version_is_format_error() {
        let mut bytes = tiny_clip().to_bytes().unwrap();
        bytes[4] = 2;
        assert!(matches!(
            ClipContainer::from_reader(bytes.as_slice()),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncated_file_is_io_error() {
        let bytes = tiny_clip().to_bytes().unwrap();
        for cut in [3, 20, bytes.len() - 1] {
            assert!(matches!(
                ClipContainer::from_reader(&bytes[..cut]),
                Err(Error::Io(_))
            ));
        }
    }

    #[test]
    fn constant_bvp_aligns_to_constant_labels() {
        let mut clip = tiny_clip();
        clip.bvp_vals = vec![5.0; 3];
        assert_eq!(align_bvp_to_frames(&clip).unwrap(), vec![5.0, 5.0]);
    }

    #[test]
    fn ramp_aligns_linearly() {
        let mut clip = tiny_clip();
        clip.frame_ts = vec![10.0, 10.5, 11.0];
        clip.frames = vec![0; 36];
        clip.bvp_ts = vec![10.0, 11.0];
        clip.bvp_vals = vec![0.0, 10.0];
        assert_eq!(align_bvp_to_frames(&clip).unwrap(), vec![0.0, 5.0, 10.0]);
    }

    #[test]
    fn empty_bvp_is_rejected() {
        let mut clip = tiny_clip();
        clip.bvp_vals.clear();
        clip.bvp_ts.clear();
        assert!(matches!(align_bvp_to_frames(&clip), Err(Error::Empty(_))));
    }

    #[test]
    fn offset_zero_and_inverse() {
        let clip = tiny_clip();
        assert_eq!(inject_offset(&clip, 0.0), clip);
        let back = inject_offset(&inject_offset(&clip, 0.2), -0.2);
        assert_eq!(back.bvp_ts, clip.bvp_ts);
        assert_eq!(back.frames, clip.frames);
    }
}
