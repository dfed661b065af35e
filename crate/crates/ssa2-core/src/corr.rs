//! Epipolar correlation volume, 4-level pyramid, interpolated lookup and the
//! winner-take-all sub-pixel oracle.
//!
//! Disparity sign convention: `d >= 0`, with the right-image match for left
//! pixel `(i, j)` at right column `k = j - d`.

use alloc::{format, vec, vec::Vec};

use crate::config::PYRAMID_LEVELS;
use crate::error::{CoreError, Result};
use crate::map::{DisparityMap, FeatureMap2D};

/// `H x W x W` volume of inner products: `c[i][j][k] = <f_l[i,j,:], f_r[i,k,:]>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationVolume {
    pub height: usize,
    pub width: usize,
    pub feature_dim: usize,
    pub c: Vec<f64>,
}

impl CorrelationVolume {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.width + j) * self.width + k]
    }
}

/// One pooled pyramid level; the last axis shrinks by half per level.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrLevel {
    pub width_k: usize,
    pub data: Vec<f64>,
}

/// Correlation pyramid: level 1 is the raw volume, each further level pools
/// adjacent pairs along the last axis with a mean. Levels whose last axis
/// would drop below 2 entries are omitted and `truncated` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrPyramid {
    pub height: usize,
    pub width: usize,
    pub levels: Vec<CorrLevel>,
    pub truncated: bool,
}

impl CorrPyramid {
    #[inline]
    pub fn get(&self, level: usize, i: usize, j: usize, k: usize) -> f64 {
        let l = &self.levels[level];
        l.data[(i * self.width + j) * l.width_k + k]
    }
}

/// Builds the raw correlation volume from equal-shaped feature maps.
pub fn build_correlation(f_l: &FeatureMap2D, f_r: &FeatureMap2D) -> Result<CorrelationVolume> {
    if !f_l.same_shape(f_r) {
        return Err(CoreError::Shape(format!(
            "left {}x{}x{} vs right {}x{}x{}",
            f_l.height, f_l.width, f_l.channels, f_r.height, f_r.width, f_r.channels
        )));
    }
    if f_l.channels == 0 {
        return Err(CoreError::Shape("feature dimension must be >= 1".into()));
    }
    let (h, w, d) = (f_l.height, f_l.width, f_l.channels);
    let mut c = vec![0.0; h * w * w];
    for i in 0..h {
        for j in 0..w {
            let left = f_l.pixel(i, j);
            for k in 0..w {
                let right = f_r.pixel(i, k);
                let mut acc = 0.0;
                for di in 0..d {
                    acc += left[di] * right[di];
                }
                c[(i * w + j) * w + k] = acc;
            }
        }
    }
    Ok(CorrelationVolume {
        height: h,
        width: w,
        feature_dim: d,
        c,
    })
}

/// Mean-pools the last axis with kernel 2, stride 2, four levels total.
/// Odd lengths are floor-divided (the trailing element is dropped).
pub fn build_pyramid(vol: &CorrelationVolume) -> CorrPyramid {
    let (h, w) = (vol.height, vol.width);
    let mut levels = Vec::with_capacity(PYRAMID_LEVELS);
    levels.push(CorrLevel {
        width_k: w,
        data: vol.c.clone(),
    });
    let mut truncated = false;
    for _ in 1..PYRAMID_LEVELS {
        let prev = levels.last().unwrap();
        if prev.width_k < 2 {
            truncated = true;
            break;
        }
        let wk = prev.width_k / 2;
        let mut data = vec![0.0; h * w * wk];
        for p in 0..h * w {
            let src = &prev.data[p * prev.width_k..(p + 1) * prev.width_k];
            let dst = &mut data[p * wk..(p + 1) * wk];
            for (k, d) in dst.iter_mut().enumerate() {
                *d = 0.5 * (src[2 * k] + src[2 * k + 1]);
            }
        }
        levels.push(CorrLevel { width_k: wk, data });
    }
    CorrPyramid {
        height: h,
        width: w,
        levels,
        truncated,
    }
}

/// Linear interpolation along the last axis with zero contribution outside
/// `[0, width_k - 1]`.
fn sample_level(level: &CorrLevel, pixel: usize, pos: f64) -> f64 {
    let wk = level.width_k as isize;
    let base = libm::floor(pos);
    let frac = pos - base;
    let k0 = base as isize;
    let k1 = k0 + 1;
    let mut v = 0.0;
    if k0 >= 0 && k0 < wk {
        v += (1.0 - frac) * level.data[pixel * level.width_k + k0 as usize];
    }
    if k1 >= 0 && k1 < wk && frac != 0.0 {
        v += frac * level.data[pixel * level.width_k + k1 as usize];
    }
    v
}

/// Retrieves correlation values at integer offsets `-r..=r` around the
/// current disparity from every pyramid level.
///
/// For level `l` (0-based here) and offset `o`, the sample position is
/// `(j - d) / 2^l + o`, linearly interpolated. Output channels are ordered
/// level-major, offset-minor: channel `l * (2r + 1) + (o + r)`.
pub fn lookup(pyr: &CorrPyramid, d_map: &DisparityMap, radius: usize) -> Result<FeatureMap2D> {
    if d_map.height != pyr.height || d_map.width != pyr.width {
        return Err(CoreError::Shape(format!(
            "disparity {}x{} does not match pyramid {}x{}",
            d_map.height, d_map.width, pyr.height, pyr.width
        )));
    }
    let window = 2 * radius + 1;
    let channels = pyr.levels.len() * window;
    let mut out = FeatureMap2D::zeros(pyr.height, pyr.width, channels);
    for i in 0..pyr.height {
        for j in 0..pyr.width {
            let pixel = i * pyr.width + j;
            let d = d_map.get(i, j);
            for (l, level) in pyr.levels.iter().enumerate() {
                let center = (j as f64 - d) / (1u64 << l) as f64;
                for o in 0..window {
                    let pos = center + o as f64 - radius as f64;
                    out.set(i, j, l * window + o, sample_level(level, pixel, pos));
                }
            }
        }
    }
    Ok(out)
}

/// Winner-take-all disparity with parabolic sub-pixel refinement.
///
/// `d[i][j] = j - k*` where `k*` maximizes `c[i][j][k]` over `k <= j`, ties
/// broken toward larger `k` (smaller disparity). When `k*` is interior and
/// the parabola through the three neighbors is concave, the vertex offset
/// `0.5 (c[k*-1] - c[k*+1]) / (c[k*-1] - 2 c[k*] + c[k*+1])` is applied.
pub fn wta_disparity(vol: &CorrelationVolume) -> DisparityMap {
    let (h, w) = (vol.height, vol.width);
    let mut out = DisparityMap::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            let mut best_k = 0usize;
            let mut best = f64::NEG_INFINITY;
            for k in 0..=j {
                let v = vol.get(i, j, k);
                if v >= best {
                    best = v;
                    best_k = k;
                }
            }
            let mut k_star = best_k as f64;
            if best_k > 0 && best_k < w - 1 {
                let cm = vol.get(i, j, best_k - 1);
                let c0 = vol.get(i, j, best_k);
                let cp = vol.get(i, j, best_k + 1);
                k_star += parabola_offset(cm, c0, cp);
            }
            out.set(i, j, j as f64 - k_star);
        }
    }
    out
}

/// Parabolic sub-pixel offset through three samples around a peak, clamped
/// to half a sample so a near-flat curve cannot throw the vertex far away;
/// exposed for direct closed-form testing.
pub fn parabola_offset(cm: f64, c0: f64, cp: f64) -> f64 {
    let denom = cm - 2.0 * c0 + cp;
    if denom < 0.0 {
        (0.5 * (cm - cp) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> FeatureMap2D {
        let data = (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        FeatureMap2D::from_data(h, w, c, data).unwrap()
    }

    #[test]
    fn all_ones_features_give_d() {
        let f = FeatureMap2D::from_data(1, 3, 4, vec![1.0; 12]).unwrap();
        let vol = build_correlation(&f, &f).unwrap();
        assert!(vol.c.iter().all(|v| *v == 4.0));
    }

    #[test]
    fn orthonormal_columns_give_identity() {
        let w = 3;
        let mut f = FeatureMap2D::zeros(1, w, w);
        for j in 0..w {
            f.set(0, j, j, 1.0);
        }
        let vol = build_correlation(&f, &f).unwrap();
        for j in 0..w {
            for k in 0..w {
                assert_eq!(vol.get(0, j, k), if j == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn matches_triple_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let (h, w, d) = (2, 3, 2);
        let f_l = random_map(&mut rng, h, w, d);
        let f_r = random_map(&mut rng, h, w, d);
        let vol = build_correlation(&f_l, &f_r).unwrap();
        for i in 0..h {
            for j in 0..w {
                for k in 0..w {
                    let mut want = 0.0;
                    for di in 0..d {
                        want += f_l.get(i, j, di) * f_r.get(i, k, di);
                    }
                    assert_eq!(vol.get(i, j, k), want);
                }
            }
        }
    }

    #[test]
    fn correlation_shape_mismatch() {
        let a = FeatureMap2D::zeros(2, 3, 2);
        let b = FeatureMap2D::zeros(2, 4, 2);
        assert!(build_correlation(&a, &b).is_err());
    }

    #[test]
    fn correlation_bilinear_in_left() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f_l = random_map(&mut rng, 2, 4, 3);
        let f_r = random_map(&mut rng, 2, 4, 3);
        let base = build_correlation(&f_l, &f_r).unwrap();
        let mut scaled = f_l.clone();
        for v in scaled.data.iter_mut() {
            *v *= 2.5;
        }
        let vol = build_correlation(&scaled, &f_r).unwrap();
        for (a, b) in vol.c.iter().zip(&base.c) {
            assert!((a - 2.5 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn pyramid_mean_pooling() {
        let vol = CorrelationVolume {
            height: 1,
            width: 2,
            feature_dim: 1,
            c: vec![1.0, 3.0, 5.0, 7.0],
        };
        let pyr = build_pyramid(&vol);
        assert_eq!(pyr.levels[1].data, vec![2.0, 6.0]);
        assert!(pyr.truncated); // width 1 level dropped
    }

    #[test]
    fn pyramid_constant_volume() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let f = FeatureMap2D::from_data(
            1,
            16,
            1,
            (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let mut vol = build_correlation(&f, &f).unwrap();
        for v in vol.c.iter_mut() {
            *v = 4.25;
        }
        let pyr = build_pyramid(&vol);
        assert_eq!(pyr.levels.len(), 4);
        for l in &pyr.levels {
            assert!(l.data.iter().all(|v| *v == 4.25));
        }
    }

    #[test]
    fn pyramid_level_widths_for_16() {
        let f = FeatureMap2D::zeros(2, 16, 1);
        let vol = build_correlation(&f, &f).unwrap();
        let pyr = build_pyramid(&vol);
        let widths: Vec<usize> = pyr.levels.iter().map(|l| l.width_k).collect();
        assert_eq!(widths, vec![16, 8, 4, 2]);
        assert!(!pyr.truncated);
    }

    #[test]
    fn pyramid_mean_preserved_for_pow2_widths() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let f = random_map(&mut rng, 2, 16, 3);
        let vol = build_correlation(&f, &f).unwrap();
        let pyr = build_pyramid(&vol);
        for p in 0..2 * 16 {
            let means: Vec<f64> = pyr
                .levels
                .iter()
                .map(|l| {
                    l.data[p * l.width_k..(p + 1) * l.width_k]
                        .iter()
                        .sum::<f64>()
                        / l.width_k as f64
                })
                .collect();
            for m in &means[1..] {
                assert!((m - means[0]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn lookup_integer_disparity_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let f_l = random_map(&mut rng, 2, 16, 3);
        let f_r = random_map(&mut rng, 2, 16, 3);
        let vol = build_correlation(&f_l, &f_r).unwrap();
        let pyr = build_pyramid(&vol);
        let mut d = DisparityMap::zeros(2, 16);
        for i in 0..2 {
            for j in 0..16 {
                d.set(i, j, (j % 4) as f64);
            }
        }
        let feats = lookup(&pyr, &d, 0).unwrap();
        for i in 0..2 {
            for j in 0..16 {
                let dj = j as isize - (j % 4) as isize;
                assert!(dj >= 0);
                assert_eq!(feats.get(i, j, 0), vol.get(i, j, dj as usize));
            }
        }
    }

    #[test]
    fn lookup_linear_midpoint() {
        // two samples along k: 0 at k, 1 at k+1; position k + 0.5 -> 0.5
        let vol = CorrelationVolume {
            height: 1,
            width: 2,
            feature_dim: 1,
            c: vec![0.0, 1.0, 0.0, 1.0],
        };
        let pyr = build_pyramid(&vol);
        let mut d = DisparityMap::zeros(1, 2);
        d.set(0, 1, 0.5); // sample position at level 1: j - d = 0.5
        let feats = lookup(&pyr, &d, 0).unwrap();
        assert_eq!(feats.get(0, 1, 0), 0.5);
    }

    #[test]
    fn lookup_half_weight_at_edge() {
        let vol = CorrelationVolume {
            height: 1,
            width: 2,
            feature_dim: 1,
            c: vec![3.0, 1.0, 3.0, 1.0],
        };
        let pyr = build_pyramid(&vol);
        let mut d = DisparityMap::zeros(1, 2);
        d.set(0, 0, 0.5); // sample position -0.5: half weight on c[..][0]
        let feats = lookup(&pyr, &d, 0).unwrap();
        assert_eq!(feats.get(0, 0, 0), 0.5 * 3.0);
    }

    #[test]
    fn lookup_channel_layout() {
        let f = FeatureMap2D::zeros(1, 16, 1);
        let vol = build_correlation(&f, &f).unwrap();
        let pyr = build_pyramid(&vol);
        let d = DisparityMap::zeros(1, 16);
        let feats = lookup(&pyr, &d, 4).unwrap();
        assert_eq!(feats.channels, 4 * 9);
    }

    #[test]
    fn parabola_closed_forms() {
        assert_eq!(parabola_offset(0.5, 1.0, 0.5), 0.0);
        let d = parabola_offset(0.0, 1.0, 0.8);
        assert!((d - 1.0 / 3.0).abs() < 1e-12);
        // convex triple: no refinement
        assert_eq!(parabola_offset(1.0, 0.5, 1.0), 0.0);
    }

    #[test]
    fn wta_no_subpixel_at_borders() {
        // peak at k = 0 for j = 0 and at k = W-1 for j = W-1
        let w = 3;
        let mut vol = CorrelationVolume {
            height: 1,
            width: w,
            feature_dim: 1,
            c: vec![0.0; w * w],
        };
        vol.c[0 * w + 0] = 1.0; // j = 0
        vol.c[2 * w + 2] = 1.0; // j = 2, peak at k = 2 = W-1
        let d = wta_disparity(&vol);
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.get(0, 2), 0.0);
    }

    #[test]
    fn wta_ties_break_toward_larger_k() {
        let w = 4;
        let mut vol = CorrelationVolume {
            height: 1,
            width: w,
            feature_dim: 1,
            c: vec![0.0; w * w],
        };
        // j = 3: equal peaks at k = 1, 2, 3 -> pick k = 3 (smaller d)
        vol.c[3 * w + 1] = 1.0;
        vol.c[3 * w + 2] = 1.0;
        vol.c[3 * w + 3] = 1.0;
        let d = wta_disparity(&vol);
        assert_eq!(d.get(0, 3), 0.0);
    }

    #[test]
    fn wta_recovers_integer_shift() {
        // the scene content shifts by s columns between the views, so the
        // left column j matches the right column j - s
        let (h, w, dim, s) = (2, 8, 8, 2);
        let mut f_l = FeatureMap2D::zeros(h, w, dim);
        for i in 0..h {
            for j in 0..w {
                f_l.set(i, j, j, 1.0); // orthonormal per column
            }
        }
        let mut f_r = FeatureMap2D::zeros(h, w, dim);
        for i in 0..h {
            for k in 0..w - s {
                for c in 0..dim {
                    f_r.set(i, k, c, f_l.get(i, k + s, c));
                }
            }
        }
        let vol = build_correlation(&f_l, &f_r).unwrap();
        let d = wta_disparity(&vol);
        for i in 0..h {
            for j in s..w {
                assert_eq!(d.get(i, j), s as f64, "pixel ({i},{j})");
            }
        }
    }
}
