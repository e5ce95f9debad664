use std::io::Read;
use std::path::Path;

use crate::error::{Result, SkidError};
use crate::framekit::{Frame, Raster};
use crate::io_util::write_atomic;
use crate::plane::Plane;

pub const SKIDVOL_MAGIC: &[u8; 8] = b"SKIDVOL1";
pub const SKIDVOL_HEADER_LEN: usize = 8 + 4 * 3 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    U8 = 0,
    U16 = 1,
    F32 = 2,
}

impl DType {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(DType::U8),
            1 => Some(DType::U16),
            2 => Some(DType::F32),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::U8 => 1,
            DType::U16 => 2,
            DType::F32 => 4,
        }
    }
}

/// Stored intensities, kept in their on-disk type until a frame is requested.
#[derive(Debug, Clone, PartialEq)]
pub enum VolumeData {
    U8(Vec<u8>),
    U16(Vec<u16>),
    F32(Vec<f32>),
}

impl VolumeData {
    pub fn dtype(&self) -> DType {
        match self {
            VolumeData::U8(_) => DType::U8,
            VolumeData::U16(_) => DType::U16,
            VolumeData::F32(_) => DType::F32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            VolumeData::U8(v) => v.len(),
            VolumeData::U16(v) => v.len(),
            VolumeData::F32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value at `i` scaled by the type's full range (f32 is taken as already
    /// in [0, 1] and clamped).
    pub fn normalized(&self, i: usize) -> f64 {
        match self {
            VolumeData::U8(v) => v[i] as f64 / u8::MAX as f64,
            VolumeData::U16(v) => v[i] as f64 / u16::MAX as f64,
            VolumeData::F32(v) => {
                let x = v[i] as f64;
                if x.is_nan() {
                    0.0
                } else {
                    x.clamp(0.0, 1.0)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VolumeHeader {
    pub n_frames: usize,
    pub height: usize,
    pub width: usize,
    pub dtype: DType,
}

impl VolumeHeader {
    pub fn payload_len(&self) -> Option<usize> {
        self.n_frames
            .checked_mul(self.height)?
            .checked_mul(self.width)?
            .checked_mul(self.dtype.size())
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let fmt = |offset: usize, msg: String| SkidError::Format {
            offset: offset as u64,
            msg,
        };
        if bytes.len() < 8 {
            return Err(fmt(bytes.len(), "truncated magic".into()));
        }
        if &bytes[..8] != SKIDVOL_MAGIC {
            return Err(fmt(0, "bad SKIDVOL magic".into()));
        }
        if bytes.len() < SKIDVOL_HEADER_LEN {
            return Err(fmt(bytes.len(), "truncated SKIDVOL header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let (n_frames, height, width) = (u32_at(8), u32_at(12), u32_at(16));
        let dtype = DType::from_code(bytes[20]).ok_or_else(|| fmt(20, format!("unknown dtype code {}", bytes[20])))?;
        if n_frames == 0 {
            return Err(fmt(8, "clip has zero frames".into()));
        }
        if height == 0 || width == 0 {
            return Err(fmt(12, format!("empty frame size {height}x{width}")));
        }
        let h = VolumeHeader {
            n_frames,
            height,
            width,
            dtype,
        };
        if h.payload_len().is_none_or(|n| n > isize::MAX as usize) {
            return Err(fmt(8, format!("dimensions {n_frames}x{height}x{width} overflow")));
        }
        Ok(h)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SKIDVOL_HEADER_LEN);
        out.extend_from_slice(SKIDVOL_MAGIC);
        for v in [self.n_frames, self.height, self.width] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.push(self.dtype.code());
        out
    }
}

/// An F×H×W intensity stack for one clip and plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipVolume {
    pub clip_id: String,
    pub plane: Plane,
    n_frames: usize,
    height: usize,
    width: usize,
    data: VolumeData,
    /// Filled from the manifest; empty when loaded standalone.
    pub labels: Vec<u8>,
}

impl ClipVolume {
    pub fn new(
        clip_id: impl Into<String>,
        plane: Plane,
        n_frames: usize,
        height: usize,
        width: usize,
        data: VolumeData,
    ) -> Result<Self> {
        if n_frames == 0 || height == 0 || width == 0 {
            return Err(SkidError::Data(format!("clip dimensions {n_frames}x{height}x{width} must be positive")));
        }
        if data.len() != n_frames * height * width {
            return Err(SkidError::Data(format!(
                "{} values for {n_frames}x{height}x{width}",
                data.len()
            )));
        }
        Ok(ClipVolume {
            clip_id: clip_id.into(),
            plane,
            n_frames,
            height,
            width,
            data,
            labels: Vec::new(),
        })
    }

    /// Quantizes [0, 1] rasters to 8 bits.
    pub fn from_rasters_u8(clip_id: impl Into<String>, plane: Plane, frames: &[Raster]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| SkidError::Data("clip with zero frames".into()))?;
        let (h, w) = (first.height(), first.width());
        let mut data = Vec::with_capacity(frames.len() * h * w);
        for f in frames {
            if f.height() != h || f.width() != w {
                return Err(SkidError::Data("frames differ in size".into()));
            }
            data.extend(f.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        }
        Self::new(clip_id, plane, frames.len(), h, w, VolumeData::U8(data))
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &VolumeData {
        &self.data
    }

    pub fn header(&self) -> VolumeHeader {
        VolumeHeader {
            n_frames: self.n_frames,
            height: self.height,
            width: self.width,
            dtype: self.data.dtype(),
        }
    }

    pub fn raster(&self, index: usize) -> Result<Raster> {
        if index >= self.n_frames {
            return Err(SkidError::InvalidArgument(format!(
                "frame {index} out of range for clip {} with {} frames",
                self.clip_id, self.n_frames
            )));
        }
        let area = self.height * self.width;
        let base = index * area;
        let values = (0..area).map(|i| self.data.normalized(base + i)).collect();
        Raster::from_vec(self.height, self.width, values)
    }

    pub fn frame(&self, index: usize) -> Result<Frame> {
        Frame::new(self.raster(index)?, self.plane)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header().to_bytes();
        match &self.data {
            VolumeData::U8(v) => out.extend_from_slice(v),
            VolumeData::U16(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            VolumeData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }

    pub fn from_bytes(clip_id: impl Into<String>, plane: Plane, bytes: &[u8]) -> Result<Self> {
        let h = VolumeHeader::parse(bytes)?;
        let need = h.payload_len().expect("checked by parse");
        let payload = &bytes[SKIDVOL_HEADER_LEN..];
        if payload.len() < need {
            let frame_bytes = h.height * h.width * h.dtype.size();
            return Err(SkidError::Format {
                offset: bytes.len() as u64,
                msg: format!(
                    "truncated payload: header declares {} frames, file holds {} complete",
                    h.n_frames,
                    payload.len() / frame_bytes
                ),
            });
        }
        if payload.len() > need {
            return Err(SkidError::Format {
                offset: (SKIDVOL_HEADER_LEN + need) as u64,
                msg: "trailing bytes after payload".into(),
            });
        }
        let data = match h.dtype {
            DType::U8 => VolumeData::U8(payload.to_vec()),
            DType::U16 => VolumeData::U16(
                payload
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            ),
            DType::F32 => VolumeData::F32(
                payload
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ),
        };
        Self::new(clip_id, plane, h.n_frames, h.height, h.width, data)
    }
}

pub fn save_clip(clip: &ClipVolume, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &clip.to_bytes())
}

/// Reads a SKIDVOL file. The clip id is the file stem; the plane is taken
/// from the parent directory name when it names one, else sagittal.
pub fn load_clip(path: impl AsRef<Path>) -> Result<ClipVolume> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let plane = path
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|n| n.to_str())
        .and_then(|n| n.parse().ok())
        .unwrap_or(Plane::Sagittal);
    ClipVolume::from_bytes(id, plane, &bytes)
}

/// Header check without reading the payload: magic, dimensions and that
/// the file length matches them.
pub fn check_clip_file(path: impl AsRef<Path>) -> Result<VolumeHeader> {
    let mut f = std::fs::File::open(path.as_ref())?;
    let len = f.metadata()?.len();
    let mut head = Vec::with_capacity(SKIDVOL_HEADER_LEN);
    f.by_ref().take(SKIDVOL_HEADER_LEN as u64).read_to_end(&mut head)?;
    let h = VolumeHeader::parse(&head)?;
    let expected = (SKIDVOL_HEADER_LEN + h.payload_len().expect("checked by parse")) as u64;
    if len != expected {
        return Err(SkidError::Format {
            offset: len.min(expected),
            msg: format!("file is {len} bytes, header implies {expected}"),
        });
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_each_dtype() {
        let datas = [
            VolumeData::U8((0..24).map(|i| i as u8 * 10).collect()),
            VolumeData::U16((0..24).map(|i| i as u16 * 2000).collect()),
            VolumeData::F32((0..24).map(|i| i as f32 / 23.0).collect()),
        ];
        for d in datas {
            let c = ClipVolume::new("c", Plane::Coronal, 2, 3, 4, d).unwrap();
            let back = ClipVolume::from_bytes("c", Plane::Coronal, &c.to_bytes()).unwrap();
            assert_eq!(back, c);
            let f = back.raster(1).unwrap();
            assert!(f.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let c = ClipVolume::new("c", Plane::Axial, 30, 4, 4, VolumeData::U8(vec![7; 480])).unwrap();
        let bytes = c.to_bytes();
        let cut = &bytes[..bytes.len() - 16];
        match ClipVolume::from_bytes("c", Plane::Axial, cut) {
            Err(SkidError::Format { offset, msg }) => {
                assert_eq!(offset as usize, cut.len());
                assert!(msg.contains("29"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_overflow() {
        assert!(matches!(
            ClipVolume::from_bytes("x", Plane::Axial, b"NOTAVOL1\0\0\0\0\0\0\0\0\0\0\0\0\0"),
            Err(SkidError::Format { offset: 0, .. })
        ));
        let mut h = SKIDVOL_MAGIC.to_vec();
        for _ in 0..3 {
            h.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        h.push(2);
        assert!(matches!(VolumeHeader::parse(&h), Err(SkidError::Format { offset: 8, .. })));
    }
}
