//! Binary PPM (P6, 8-bit) images.

use std::io::Read;
use std::path::Path;

use ssa2_core::FeatureMap2D;

use crate::{IoError, Result};

/// Writes an RGB image with values in [0, 1] as 8-bit P6.
pub fn write_bytes(img: &FeatureMap2D) -> Result<Vec<u8>> {
    if img.channels != 3 {
        return Err(IoError::Format("PPM output requires 3 channels".into()));
    }
    let mut out = Vec::with_capacity(20 + img.data.len());
    out.extend_from_slice(format!("P6\n{} {}\n255\n", img.width, img.height).as_bytes());
    for v in &img.data {
        out.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    Ok(out)
}

pub fn read_bytes(bytes: &[u8]) -> Result<FeatureMap2D> {
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        // comments allowed in the header
        while pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(IoError::Format("malformed PPM header".into()));
        }
        let s = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| IoError::Format("malformed PPM header".into()))?;
        pos += 1; // single whitespace after the token
        Ok(s.to_string())
    };
    if token(bytes)? != "P6" {
        return Err(IoError::Format("only binary P6 PPM is supported".into()));
    }
    let width: usize = token(bytes)?
        .parse()
        .map_err(|_| IoError::Format("bad PPM width".into()))?;
    let height: usize = token(bytes)?
        .parse()
        .map_err(|_| IoError::Format("bad PPM height".into()))?;
    let maxval: usize = token(bytes)?
        .parse()
        .map_err(|_| IoError::Format("bad PPM maxval".into()))?;
    if maxval != 255 {
        return Err(IoError::Format("only 8-bit PPM is supported".into()));
    }
    let payload = &bytes[pos..];
    if payload.len() != 3 * width * height {
        return Err(IoError::Format(format!(
            "PPM payload is {} bytes, expected {}",
            payload.len(),
            3 * width * height
        )));
    }
    let data = payload.iter().map(|b| *b as f64 / 255.0).collect();
    Ok(FeatureMap2D::from_data(height, width, 3, data)?)
}

pub fn save(img: &FeatureMap2D, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_bytes(img)?)
        .map_err(|e| IoError::file(path.display().to_string(), e))
}

pub fn load(path: impl AsRef<Path>) -> Result<FeatureMap2D> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| IoError::file(path.display().to_string(), e))?;
    read_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_quantized() {
        let mut img = FeatureMap2D::zeros(2, 3, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = (i as f64 * 17.0 % 256.0) / 255.0;
        }
        let bytes = write_bytes(&img).unwrap();
        let back = read_bytes(&bytes).unwrap();
        assert_eq!((back.height, back.width, back.channels), (2, 3, 3));
        for (a, b) in img.data.iter().zip(&back.data) {
            assert!((a - b).abs() < 0.5 / 255.0 + 1e-12);
        }
        // a second write is bitwise identical
        assert_eq!(bytes, write_bytes(&back).unwrap());
    }

    #[test]
    fn header_and_errors() {
        let img = FeatureMap2D::zeros(1, 2, 3);
        let bytes = write_bytes(&img).unwrap();
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        assert!(read_bytes(b"P5\n1 1\n255\n___").is_err());
        assert!(read_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
