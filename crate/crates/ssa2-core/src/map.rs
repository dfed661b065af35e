//! Dense 2D containers shared across the crate.
//!
//! Addressing convention for [`FeatureMap2D`] is row-major with the channel
//! axis innermost: element `(row i, col j, chan c)` lives at
//! `(i * width + j) * channels + c`.

use alloc::{format, vec, vec::Vec};

use crate::error::{CoreError, Result};

/// An `H x W x C` feature map (also used for RGB images with `channels = 3`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap2D {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap2D {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(CoreError::Shape(format!(
                "feature map data length {} does not match {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, c: usize) -> usize {
        (i * self.width + j) * self.channels + c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, c: usize) -> f64 {
        self.data[self.idx(i, j, c)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, c: usize, v: f64) {
        let k = self.idx(i, j, c);
        self.data[k] = v;
    }

    /// The channel vector at pixel `(i, j)`.
    #[inline]
    pub fn pixel(&self, i: usize, j: usize) -> &[f64] {
        let base = (i * self.width + j) * self.channels;
        &self.data[base..base + self.channels]
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Transposes rows and columns, keeping channels.
    pub fn transposed(&self) -> Self {
        let mut out = Self::zeros(self.width, self.height, self.channels);
        for i in 0..self.height {
            for j in 0..self.width {
                for c in 0..self.channels {
                    out.set(j, i, c, self.get(i, j, c));
                }
            }
        }
        out
    }
}

/// A disparity map in pixels at its own resolution, with a validity mask.
///
/// Valid entries satisfy `0 <= d <= width - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub height: usize,
    pub width: usize,
    pub d: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DisparityMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            d: vec![0.0; height * width],
            valid: vec![true; height * width],
        }
    }

    pub fn from_values(height: usize, width: usize, d: Vec<f64>) -> Result<Self> {
        if d.len() != height * width {
            return Err(CoreError::Shape(format!(
                "disparity data length {} does not match {height}x{width}",
                d.len()
            )));
        }
        Ok(Self {
            height,
            width,
            d,
            valid: vec![true; height * width],
        })
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.idx(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.d[k] = v;
    }

    /// Clamps every valid entry into `[0, width - 1]`.
    pub fn clamp_to_range(&mut self) {
        let max = (self.width - 1) as f64;
        for v in &mut self.d {
            *v = v.clamp(0.0, max);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_addressing() {
        let mut f = FeatureMap2D::zeros(2, 3, 2);
        f.set(1, 2, 1, 7.0);
        assert_eq!(f.data[(1 * 3 + 2) * 2 + 1], 7.0);
    }

    #[test]
    fn transpose_round_trip() {
        let f = FeatureMap2D::from_data(2, 3, 1, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(f.transposed().transposed(), f);
        assert_eq!(f.transposed().get(2, 1, 0), 6.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(FeatureMap2D::from_data(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(DisparityMap::from_values(2, 2, vec![0.0; 3]).is_err());
    }
}
