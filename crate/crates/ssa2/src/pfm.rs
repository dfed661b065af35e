//! Single-channel PFM float maps (the common disparity interchange format).
//!
//! Header: `Pf\n{width} {height}\n{scale}\n`, negative scale meaning
//! little-endian payload. Rows are stored bottom-up as 32-bit floats. We
//! always write `-1.0`.

use std::io::Read;
use std::path::Path;

use crate::{IoError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, top-down (converted from the on-disk bottom-up order).
    pub data: Vec<f32>,
}

impl PfmImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(IoError::Format(format!(
                "PFM data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(format!("Pf\n{} {}\n-1.0\n", self.width, self.height).as_bytes());
        for row in (0..self.height).rev() {
            for col in 0..self.width {
                out.extend_from_slice(&self.data[row * self.width + col].to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut token = || -> Result<String> {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(IoError::Format("malformed PFM header".into()));
            }
            // consume exactly one whitespace byte after the token
            let s = std::str::from_utf8(&bytes[start..pos])
                .map_err(|_| IoError::Format("malformed PFM header".into()))?;
            pos += 1;
            Ok(s.to_string())
        };
        let kind = token()?;
        if kind != "Pf" {
            return Err(IoError::Format(format!(
                "unsupported PFM type {kind:?} (only 1-channel Pf)"
            )));
        }
        let width: usize = token()?
            .parse()
            .map_err(|_| IoError::Format("bad PFM width".into()))?;
        let height: usize = token()?
            .parse()
            .map_err(|_| IoError::Format("bad PFM height".into()))?;
        let scale: f64 = token()?
            .parse()
            .map_err(|_| IoError::Format("bad PFM scale".into()))?;
        drop(token);
        if width == 0 || height == 0 {
            return Err(IoError::Format("PFM dimensions must be positive".into()));
        }
        let little_endian = scale < 0.0;
        let payload = &bytes[pos..];
        if payload.len() != 4 * width * height {
            return Err(IoError::Format(format!(
                "PFM payload is {} bytes, expected {}",
                payload.len(),
                4 * width * height
            )));
        }
        let mut data = vec![0.0f32; width * height];
        for (i, chunk) in payload.chunks_exact(4).enumerate() {
            let raw: [u8; 4] = chunk.try_into().unwrap();
            let v = if little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
            let row = height - 1 - i / width; // bottom-up on disk
            let col = i % width;
            data[row * width + col] = v;
        }
        Self::new(width, height, data)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes())
            .map_err(|e| IoError::file(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| IoError::file(path.display().to_string(), e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_disparity(d: &ssa2_core::DisparityMap) -> Self {
        Self {
            width: d.width,
            height: d.height,
            data: d.d.iter().map(|v| *v as f32).collect(),
        }
    }

    pub fn to_disparity(&self) -> ssa2_core::DisparityMap {
        let mut out = ssa2_core::DisparityMap::zeros(self.height, self.width);
        for (i, v) in self.data.iter().enumerate() {
            out.d[i] = *v as f64;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_by_one_golden_bytes() {
        let img = PfmImage::new(1, 1, vec![2.5]).unwrap();
        let mut want = b"Pf\n1 1\n-1.0\n".to_vec();
        want.extend_from_slice(&[0x00, 0x00, 0x20, 0x40]);
        assert_eq!(img.to_bytes(), want);
        assert_eq!(PfmImage::from_bytes(&want).unwrap(), img);
    }

    #[test]
    fn bottom_up_row_order() {
        // 1 wide x 2 tall, top = 1, bottom = 2: bottom row stored first
        let img = PfmImage::new(1, 2, vec![1.0, 2.0]).unwrap();
        let bytes = img.to_bytes();
        let payload = &bytes[bytes.len() - 8..];
        assert_eq!(&payload[..4], &2.0f32.to_le_bytes());
        assert_eq!(&payload[4..], &1.0f32.to_le_bytes());
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(PfmImage::from_bytes(b"PF\n1 1\n-1.0\n____").is_err());
        assert!(PfmImage::from_bytes(b"Pf\n1 1\n-1.0\n__").is_err()); // short payload
        assert!(PfmImage::from_bytes(b"Pf\nx 1\n-1.0\n____").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_bitwise(w in 1usize..40, h in 1usize..40, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f32> = (0..w * h).map(|_| rng.gen_range(-1e6f32..1e6)).collect();
            let img = PfmImage::new(w, h, data).unwrap();
            let back = PfmImage::from_bytes(&img.to_bytes()).unwrap();
            prop_assert_eq!(img, back);
        }
    }
}
