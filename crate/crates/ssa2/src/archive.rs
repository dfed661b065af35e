//! Named-tensor archive, bit-exact on disk.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   "SSA2"           4 bytes
//! version u32 = 1
//! count   u32
//! index:  per tensor
//!     name_len u16, name bytes (UTF-8)
//!     dtype    u8  (0 = f32 little-endian)
//!     rank     u8
//!     dims     rank x u32
//!     offset   u64  (absolute file offset of the payload)
//! data:   contiguous row-major f32 payloads
//! ```
//!
//! An empty archive is exactly the 12-byte header. Iteration order is
//! insertion order.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::{IoError, Result};

pub const MAGIC: [u8; 4] = *b"SSA2";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let expect: usize = dims.iter().map(|d| *d as usize).product();
        if expect != data.len() {
            return Err(IoError::Format(format!(
                "tensor dims {dims:?} expect {expect} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    /// Lossy f64 -> f32 conversion for storage.
    pub fn from_f64(dims: Vec<u32>, data: &[f64]) -> Result<Self> {
        Self::new(dims, data.iter().map(|v| *v as f32).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|v| *v as f64).collect()
    }
}

/// Insertion-ordered named tensor container.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TensorArchive {
    names: Vec<String>,
    tensors: HashMap<String, Tensor>,
}

impl TensorArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        if self.tensors.contains_key(name) {
            return Err(IoError::Format(format!("duplicate tensor name: {name}")));
        }
        self.names.push(name.to_string());
        self.tensors.insert(name.to_string(), tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| IoError::Format(format!("missing tensor: {name}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        // index size first so payload offsets are absolute
        let mut index_len = 0usize;
        for name in &self.names {
            let t = &self.tensors[name];
            index_len += 2 + name.len() + 1 + 1 + 4 * t.dims.len() + 8;
        }
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.names.len() as u32).to_le_bytes());
        let mut offset = (12 + index_len) as u64;
        for name in &self.names {
            let t = &self.tensors[name];
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(DTYPE_F32);
            out.push(t.dims.len() as u8);
            for d in &t.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            out.extend_from_slice(&offset.to_le_bytes());
            offset += 4 * t.data.len() as u64;
        }
        for name in &self.names {
            for v in &self.tensors[name].data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAGIC {
            return Err(IoError::Format("bad magic".into()));
        }
        let version = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        if version != VERSION {
            return Err(IoError::Format(format!("unsupported version {version}")));
        }
        let count = u32::from_le_bytes(cur.take(4)?.try_into().unwrap());
        let mut entries = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let name_len = u16::from_le_bytes(cur.take(2)?.try_into().unwrap()) as usize;
            let name = String::from_utf8(cur.take(name_len)?.to_vec())
                .map_err(|_| IoError::Format("tensor name is not UTF-8".into()))?;
            let dtype = cur.take(1)?[0];
            if dtype != DTYPE_F32 {
                return Err(IoError::Format(format!("unknown dtype {dtype}")));
            }
            let rank = cur.take(1)?[0] as usize;
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(u32::from_le_bytes(cur.take(4)?.try_into().unwrap()));
            }
            let offset = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
            entries.push((name, dims, offset));
        }
        let mut archive = Self::new();
        for (name, dims, offset) in entries {
            let count: usize = dims.iter().map(|d| *d as usize).product();
            let start = offset as usize;
            let end = start
                .checked_add(4 * count)
                .ok_or_else(|| IoError::Format("offset overflow".into()))?;
            if end > bytes.len() {
                return Err(IoError::Format(format!(
                    "truncated file: tensor {name} payload ends at {end}, file is {}",
                    bytes.len()
                )));
            }
            let data = bytes[start..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            archive.insert(&name, Tensor { dims, data })?;
        }
        Ok(archive)
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
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(IoError::Format("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_archive_is_fixed_header() {
        let a = TensorArchive::new();
        let bytes = a.to_bytes();
        assert_eq!(bytes.len(), 12);
        assert_eq!(&bytes[..4], b"SSA2");
        let b = TensorArchive::from_bytes(&bytes).unwrap();
        assert!(b.is_empty());
    }

    #[test]
    fn single_scalar_payload_bytes() {
        let mut a = TensorArchive::new();
        a.insert("w", Tensor::new(vec![1, 1], vec![1.0]).unwrap())
            .unwrap();
        let bytes = a.to_bytes();
        // payload is the last 4 bytes: f32 1.0 = 00 00 80 3F
        assert_eq!(&bytes[bytes.len() - 4..], &[0x00, 0x00, 0x80, 0x3F]);
    }

    #[test]
    fn duplicate_name_rejected() {
        let mut a = TensorArchive::new();
        a.insert("w", Tensor::new(vec![1], vec![1.0]).unwrap())
            .unwrap();
        assert!(a
            .insert("w", Tensor::new(vec![1], vec![2.0]).unwrap())
            .is_err());
    }

    #[test]
    fn bad_magic_and_truncation_distinct() {
        let mut a = TensorArchive::new();
        a.insert("w", Tensor::new(vec![2], vec![1.0, 2.0]).unwrap())
            .unwrap();
        let bytes = a.to_bytes();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        let err = TensorArchive::from_bytes(&bad).unwrap_err();
        assert!(err.to_string().contains("magic"));

        let err = TensorArchive::from_bytes(&bytes[..bytes.len() - 2]).unwrap_err();
        assert!(err.to_string().contains("truncated"));

        let mut unk = bytes.clone();
        // dtype byte sits right after the 2-byte name length and 1-byte name
        unk[12 + 2 + 1] = 9;
        let err = TensorArchive::from_bytes(&unk).unwrap_err();
        assert!(err.to_string().contains("dtype"));
    }

    #[test]
    fn insertion_order_stable() {
        let mut a = TensorArchive::new();
        for name in ["zeta", "alpha", "mid"] {
            a.insert(name, Tensor::new(vec![1], vec![0.0]).unwrap())
                .unwrap();
        }
        let b = TensorArchive::from_bytes(&a.to_bytes()).unwrap();
        let names: Vec<&str> = b.names().collect();
        assert_eq!(names, vec!["zeta", "alpha", "mid"]);
    }
}
