//! `UVP1` binary container: magic, `u32` width, height and channel count,
//! six `f32` cube bounds (min xyz, max xyz), a `u8` mask flag, interleaved
//! row-major `f32` data, then one byte per pixel of mask if flagged. All
//! little-endian. Values are stored as `f32`, so a map survives
//! write/read bit-exactly once its values are `f32`-representable.

use std::path::Path;

use crate::error::{Error, Result};

use super::{Mask, NormalizationCube, UvPositionMap};

pub const UVP_MAGIC: &[u8; 4] = b"UVP1";

pub fn uvp_to_bytes(map: &UvPositionMap) -> Vec<u8> {
    let plane = map.plane();
    let mut out = Vec::with_capacity(41 + 13 * plane);
    out.extend_from_slice(UVP_MAGIC);
    for v in [map.width as u32, map.height as u32, 3] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in map.cube.min.iter().chain(&map.cube.max) {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out.push(map.mask.is_some() as u8);
    for p in 0..plane {
        for c in 0..3 {
            out.extend_from_slice(&(map.data[c * plane + p] as f32).to_le_bytes());
        }
    }
    if let Some(m) = &map.mask {
        out.extend(m.bits.iter().map(|&b| b as u8));
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).ok_or(Error::UnexpectedEof)?;
        let s = self.buf.get(self.pos..end).ok_or(Error::UnexpectedEof)?;
        self.pos = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn uvp_from_bytes(buf: &[u8]) -> Result<UvPositionMap> {
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(4).map_err(|_| Error::NotUvp)?;
    if &magic[..3] != b"UVP" {
        return Err(Error::NotUvp);
    }
    if magic[3] != UVP_MAGIC[3] {
        let v = (magic[3] as char).to_digit(10).unwrap_or(magic[3] as u32);
        return Err(Error::Version(v));
    }
    let width = r.u32()? as usize;
    let height = r.u32()? as usize;
    let channels = r.u32()?;
    if channels != 3 {
        return Err(Error::Shape(format!("UVP has {channels} channels, expected 3")));
    }
    let mut b = [0.0f64; 6];
    for v in &mut b {
        *v = r.f32()? as f64;
    }
    let cube = NormalizationCube::from_bounds([b[0], b[1], b[2]], [b[3], b[4], b[5]])?;
    let has_mask = r.take(1)?[0];
    let plane = width.checked_mul(height).ok_or(Error::UnexpectedEof)?;
    let expected = 41 + plane * 12 + if has_mask != 0 { plane } else { 0 };
    if buf.len() < expected {
        return Err(Error::UnexpectedEof);
    }
    if buf.len() > expected {
        return Err(Error::Shape(format!(
            "UVP is {} bytes, header implies {expected}",
            buf.len()
        )));
    }
    let mut data = vec![0.0; 3 * plane];
    for p in 0..plane {
        for c in 0..3 {
            data[c * plane + p] = r.f32()? as f64;
        }
    }
    let mask = if has_mask != 0 {
        Some(Mask::new(width, height, r.take(plane)?.iter().map(|&b| b != 0).collect()))
    } else {
        None
    };
    Ok(UvPositionMap {
        width,
        height,
        data,
        cube,
        mask,
    })
}

pub fn write_uvp(map: &UvPositionMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, uvp_to_bytes(map)).map_err(|e| Error::io(path, e))
}

pub fn read_uvp(path: impl AsRef<Path>) -> Result<UvPositionMap> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    uvp_from_bytes(&buf)
}

/// 16-bit RGB preview; values are quantized to `round(v * 65535)`.
pub fn export_png(map: &UvPositionMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let plane = map.plane();
    let img = image::ImageBuffer::<image::Rgb<u16>, _>::from_fn(map.width as u32, map.height as u32, |x, y| {
        let p = y as usize * map.width + x as usize;
        image::Rgb([0, 1, 2].map(|c| (map.data[c * plane + p].clamp(0.0, 1.0) * 65535.0).round() as u16))
    });
    img.save(path)
        .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> UvPositionMap {
        let cube = NormalizationCube::new([0.0, 0.0, 0.5], 0.2).unwrap();
        let mut m = UvPositionMap::zeros(5, 4, cube, Some(Mask::new(5, 4, (0..20).map(|i| i % 3 != 0).collect())));
        for (i, v) in m.data.iter_mut().enumerate() {
            *v = (i as f32 / 60.0) as f64;
        }
        m.apply_mask();
        m
    }

    #[test]
    fn bytes_round_trip() {
        let m = sample();
        let back = uvp_from_bytes(&uvp_to_bytes(&m)).unwrap();
        assert_eq!(back.data, m.data);
        assert_eq!(back.mask, m.mask);
        assert_eq!(uvp_to_bytes(&back), uvp_to_bytes(&m));
    }

    #[test]
    fn truncation_and_magic() {
        let bytes = uvp_to_bytes(&sample());
        for cut in [5, 20, 40, bytes.len() - 1] {
            let e = uvp_from_bytes(&bytes[..cut]).unwrap_err();
            assert_eq!(e.to_string(), "unexpected EOF");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(uvp_from_bytes(&bad).unwrap_err().to_string(), "not a UVP file");
        bad = bytes.clone();
        bad[3] = b'2';
        assert!(matches!(uvp_from_bytes(&bad), Err(Error::Version(2))));
        bad = bytes;
        bad.push(0);
        assert!(matches!(uvp_from_bytes(&bad), Err(Error::Shape(_))));
    }
}
