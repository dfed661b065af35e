//! Quarter-resolution feature extraction for the correlation volume.
//!
//! Two modes: `patch` (grayscale, 4x area downsample, flattened local
//! window) and `learned` (two seeded stride-2 convolutions with ReLU).
//! Patch mode is exactly shift-equivariant over whole quarter-resolution
//! columns, which is what makes winner-take-all recovery exact on integer
//! disparity scenes.

use alloc::{format, vec, vec::Vec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::map::FeatureMap2D;

pub const GRAY_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExtractorMode {
    #[default]
    Patch,
    Learned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorConfig {
    pub mode: ExtractorMode,
    /// Odd window side for patch mode; the feature dimension is `window^2`.
    pub patch_window: usize,
    /// Output channels in learned mode.
    pub channels: usize,
    pub seed: u64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            mode: ExtractorMode::Patch,
            patch_window: 9,
            channels: 64,
            seed: 0,
        }
    }
}

impl ExtractorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_window % 2 == 0 || self.patch_window == 0 {
            return Err(CoreError::Config(format!(
                "patch_window must be odd and positive, got {}",
                self.patch_window
            )));
        }
        if self.channels == 0 {
            return Err(CoreError::Config("channels must be >= 1".into()));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        match self.mode {
            ExtractorMode::Patch => self.patch_window * self.patch_window,
            ExtractorMode::Learned => self.channels,
        }
    }
}

/// Weights of the learned extractor: two stride-2 3x3 convolutions.
/// `conv1` maps 3 -> C, `conv2` maps C -> C; layout `[out][in][3][3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedWeights {
    pub channels: usize,
    pub conv1: Vec<f64>,
    pub bias1: Vec<f64>,
    pub conv2: Vec<f64>,
    pub bias2: Vec<f64>,
}

impl LearnedWeights {
    pub fn seeded(channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s1 = 1.0 / libm::sqrt(27.0);
        let s2 = 1.0 / libm::sqrt((channels * 9) as f64);
        Self {
            channels,
            conv1: (0..channels * 3 * 9)
                .map(|_| rng.gen_range(-1.0..1.0) * s1)
                .collect(),
            bias1: vec![0.0; channels],
            conv2: (0..channels * channels * 9)
                .map(|_| rng.gen_range(-1.0..1.0) * s2)
                .collect(),
            bias2: vec![0.0; channels],
        }
    }
}

/// Grayscale conversion followed by 4x4 area downsampling.
pub fn gray_quarter(image: &FeatureMap2D) -> Result<FeatureMap2D> {
    if image.channels != 3 {
        return Err(CoreError::Shape(format!(
            "expected a 3-channel image, got {} channels",
            image.channels
        )));
    }
    if image.height % 4 != 0 || image.width % 4 != 0 {
        return Err(CoreError::Shape(format!(
            "image {}x{} not divisible by 4",
            image.height, image.width
        )));
    }
    let (qh, qw) = (image.height / 4, image.width / 4);
    let mut out = FeatureMap2D::zeros(qh, qw, 1);
    for i in 0..qh {
        for j in 0..qw {
            let mut acc = 0.0;
            for di in 0..4 {
                for dj in 0..4 {
                    let px = image.pixel(i * 4 + di, j * 4 + dj);
                    acc += GRAY_WEIGHTS[0] * px[0] + GRAY_WEIGHTS[1] * px[1]
                        + GRAY_WEIGHTS[2] * px[2];
                }
            }
            out.set(i, j, 0, acc / 16.0);
        }
    }
    Ok(out)
}

fn extract_patch(image: &FeatureMap2D, window: usize) -> Result<FeatureMap2D> {
    let gray = gray_quarter(image)?;
    let (qh, qw) = (gray.height, gray.width);
    let r = (window / 2) as isize;
    let dim = window * window;
    let mut out = FeatureMap2D::zeros(qh, qw, dim);
    let mut valid = vec![false; dim];
    for i in 0..qh {
        for j in 0..qw {
            let mut c = 0;
            let mut sum = 0.0;
            let mut count = 0usize;
            for di in -r..=r {
                for dj in -r..=r {
                    let ii = i as isize + di;
                    let jj = j as isize + dj;
                    let inside = ii >= 0 && jj >= 0 && ii < qh as isize && jj < qw as isize;
                    valid[c] = inside;
                    let v = if inside {
                        gray.get(ii as usize, jj as usize, 0)
                    } else {
                        0.0
                    };
                    out.set(i, j, c, v);
                    if inside {
                        sum += v;
                        count += 1;
                    }
                    c += 1;
                }
            }
            // remove the DC component and normalize, so the correlation
            // volume measures local structure (NCC) instead of brightness
            // or patch energy; out-of-bounds samples stay exactly zero so
            // they drop out of every inner product
            let mean = sum / count as f64;
            let mut sq = 0.0;
            for c in 0..dim {
                if valid[c] {
                    let v = out.get(i, j, c) - mean;
                    out.set(i, j, c, v);
                    sq += v * v;
                }
            }
            if sq > 1e-24 {
                let inv = 1.0 / libm::sqrt(sq);
                for c in 0..dim {
                    let v = out.get(i, j, c);
                    out.set(i, j, c, v * inv);
                }
            }
        }
    }
    Ok(out)
}

fn conv_stride2(
    input: &FeatureMap2D,
    weight: &[f64],
    bias: &[f64],
    out_ch: usize,
) -> FeatureMap2D {
    let (h, w, cin) = (input.height, input.width, input.channels);
    let (oh, ow) = (h / 2, w / 2);
    let mut out = FeatureMap2D::zeros(oh, ow, out_ch);
    for i in 0..oh {
        for j in 0..ow {
            for oc in 0..out_ch {
                let mut acc = bias[oc];
                for ic in 0..cin {
                    for di in 0..3usize {
                        for dj in 0..3usize {
                            let ii = (2 * i + di) as isize - 1;
                            let jj = (2 * j + dj) as isize - 1;
                            if ii < 0 || jj < 0 || ii >= h as isize || jj >= w as isize {
                                continue;
                            }
                            acc += weight[((oc * cin + ic) * 3 + di) * 3 + dj]
                                * input.get(ii as usize, jj as usize, ic);
                        }
                    }
                }
                out.set(i, j, oc, acc.max(0.0)); // ReLU
            }
        }
    }
    out
}

fn extract_learned(
    image: &FeatureMap2D,
    cfg: &ExtractorConfig,
    weights: Option<&LearnedWeights>,
) -> Result<FeatureMap2D> {
    if image.height % 4 != 0 || image.width % 4 != 0 {
        return Err(CoreError::Shape(format!(
            "image {}x{} not divisible by 4",
            image.height, image.width
        )));
    }
    let seeded;
    let w = match weights {
        Some(w) => {
            if w.channels != cfg.channels {
                return Err(CoreError::Shape(
                    "learned weights channel count disagrees with config".into(),
                ));
            }
            w
        }
        None => {
            seeded = LearnedWeights::seeded(cfg.channels, cfg.seed);
            &seeded
        }
    };
    let mid = conv_stride2(image, &w.conv1, &w.bias1, cfg.channels);
    Ok(conv_stride2(&mid, &w.conv2, &w.bias2, cfg.channels))
}

/// Extracts quarter-resolution features from an `H x W x 3` image.
pub fn extract(
    image: &FeatureMap2D,
    cfg: &ExtractorConfig,
    weights: Option<&LearnedWeights>,
) -> Result<FeatureMap2D> {
    cfg.validate()?;
    match cfg.mode {
        ExtractorMode::Patch => extract_patch(image, cfg.patch_window),
        ExtractorMode::Learned => extract_learned(image, cfg, weights),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, h: usize, w: usize) -> FeatureMap2D {
        let data = (0..h * w * 3).map(|_| rng.gen_range(0.0..1.0)).collect();
        FeatureMap2D::from_data(h, w, 3, data).unwrap()
    }

    #[test]
    fn constant_image_constant_features() {
        let img = FeatureMap2D::from_data(40, 40, 3, vec![0.5; 40 * 40 * 3]).unwrap();
        let feats = extract(&img, &ExtractorConfig::default(), None).unwrap();
        // interior pixels (away from the zero-padded border) all equal
        let reference = feats.pixel(4, 4).to_vec();
        assert_eq!(feats.pixel(4, 5), &reference[..]);
        assert_eq!(feats.pixel(5, 4), &reference[..]);
    }

    #[test]
    fn shape_contract_8x8() {
        let img = FeatureMap2D::zeros(8, 8, 3);
        let cfg = ExtractorConfig {
            patch_window: 5,
            ..Default::default()
        };
        let feats = extract(&img, &cfg, None).unwrap();
        assert_eq!((feats.height, feats.width), (2, 2));
        assert_eq!(feats.channels, 25);
    }

    #[test]
    fn indivisible_dimensions_rejected() {
        let img = FeatureMap2D::zeros(9, 8, 3);
        assert!(extract(&img, &ExtractorConfig::default(), None).is_err());
    }

    #[test]
    fn even_window_rejected() {
        let img = FeatureMap2D::zeros(8, 8, 3);
        let cfg = ExtractorConfig {
            patch_window: 4,
            ..Default::default()
        };
        assert!(matches!(extract(&img, &cfg, None), Err(CoreError::Config(_))));
    }

    #[test]
    fn learned_deterministic_under_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let img = random_image(&mut rng, 16, 16);
        let cfg = ExtractorConfig {
            mode: ExtractorMode::Learned,
            channels: 8,
            seed: 7,
            ..Default::default()
        };
        let a = extract(&img, &cfg, None).unwrap();
        let b = extract(&img, &cfg, None).unwrap();
        assert_eq!(a.data, b.data); // bitwise
        assert_eq!((a.height, a.width, a.channels), (4, 4, 8));
    }

    #[test]
    fn patch_shift_equivariance() {
        // shifting the input by 4s pixels shifts features by s columns
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (h, w, s) = (16, 32, 2);
        let img = random_image(&mut rng, h, w);
        let mut shifted = FeatureMap2D::zeros(h, w, 3);
        for i in 0..h {
            for j in 4 * s..w {
                for c in 0..3 {
                    shifted.set(i, j, c, img.get(i, j - 4 * s, c));
                }
            }
        }
        let cfg = ExtractorConfig::default();
        let fa = extract(&img, &cfg, None).unwrap();
        let fb = extract(&shifted, &cfg, None).unwrap();
        let r = cfg.patch_window / 2;
        // interior columns of the shifted result match the unshifted ones
        for i in 0..fa.height {
            for j in s + r..fa.width - r {
                for c in 0..fa.channels {
                    assert!(
                        (fb.get(i, j, c) - fa.get(i, j - s, c)).abs() < 1e-12,
                        "pixel ({i},{j},{c})"
                    );
                }
            }
        }
    }
}
