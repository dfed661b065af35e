//! Depth evaluation metrics over masked pixels.

use alloc::{vec, vec::Vec};

use crate::error::{CoreError, Result};
use crate::map::DisparityMap;
use crate::synth::CameraRig;

/// Disparities below this are treated as invalid for depth conversion.
pub const MIN_DISPARITY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub absrel: f64,
    pub sqrel: f64,
    pub rmse: f64,
    pub logrmse: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub valid_pixel_count: usize,
}

/// A depth map in meters with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub height: usize,
    pub width: usize,
    pub z: Vec<f64>,
    pub valid: Vec<bool>,
}

/// Converts disparity to depth: `z = focal * baseline / d` where
/// `d > MIN_DISPARITY`, invalid otherwise.
pub fn disparity_to_depth(d: &DisparityMap, rig: &CameraRig) -> DepthMap {
    let n = d.height * d.width;
    let mut z = vec![0.0; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        if d.valid[i] && d.d[i] > MIN_DISPARITY {
            z[i] = rig.focal_px * rig.baseline_m / d.d[i];
            valid[i] = true;
        }
    }
    DepthMap {
        height: d.height,
        width: d.width,
        z,
        valid,
    }
}

pub fn depth_to_disparity(z: &DepthMap, rig: &CameraRig) -> DisparityMap {
    let n = z.height * z.width;
    let mut d = DisparityMap::zeros(z.height, z.width);
    for i in 0..n {
        if z.valid[i] && z.z[i] > 0.0 {
            d.d[i] = rig.focal_px * rig.baseline_m / z.z[i];
        } else {
            d.valid[i] = false;
        }
    }
    d
}

/// Standard depth error and threshold-accuracy metrics over `mask`.
///
/// `absrel = mean(|p - g| / g)`, `sqrel = mean((p - g)^2 / g)`,
/// `rmse = sqrt(mean((p - g)^2))`, `logrmse = sqrt(mean((ln p - ln g)^2))`,
/// `delta_k = fraction with max(p/g, g/p) < 1.25^k`.
pub fn compute_metrics(pred: &[f64], gt: &[f64], mask: &[bool]) -> Result<MetricReport> {
    if pred.len() != gt.len() || pred.len() != mask.len() {
        return Err(CoreError::Shape(
            "pred, gt and mask must have equal length".into(),
        ));
    }
    let mut count = 0usize;
    let (mut absrel, mut sqrel, mut sq, mut logsq) = (0.0, 0.0, 0.0, 0.0);
    let (mut d1, mut d2, mut d3) = (0usize, 0usize, 0usize);
    let (t1, t2, t3) = (1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25);
    for i in 0..pred.len() {
        if !mask[i] {
            continue;
        }
        let (p, g) = (pred[i], gt[i]);
        if !(p > 0.0 && g > 0.0) {
            return Err(CoreError::Numeric(
                "metrics require strictly positive depths on the mask".into(),
            ));
        }
        count += 1;
        let e = p - g;
        absrel += e.abs() / g;
        sqrel += e * e / g;
        sq += e * e;
        let le = libm::log(p) - libm::log(g);
        logsq += le * le;
        let ratio = if p > g { p / g } else { g / p };
        if ratio < t1 {
            d1 += 1;
        }
        if ratio < t2 {
            d2 += 1;
        }
        if ratio < t3 {
            d3 += 1;
        }
    }
    if count == 0 {
        return Err(CoreError::EmptyMask);
    }
    let n = count as f64;
    Ok(MetricReport {
        absrel: absrel / n,
        sqrel: sqrel / n,
        rmse: libm::sqrt(sq / n),
        logrmse: libm::sqrt(logsq / n),
        delta1: d1 as f64 / n,
        delta2: d2 as f64 / n,
        delta3: d3 as f64 / n,
        valid_pixel_count: count,
    })
}

/// Pixel-weighted aggregation of per-image reports. RMSE-style metrics are
/// combined through their squared means.
pub fn aggregate(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(CoreError::Config("aggregate needs at least one report".into()));
    }
    let total: usize = reports.iter().map(|r| r.valid_pixel_count).sum();
    if total == 0 {
        return Err(CoreError::EmptyMask);
    }
    let tf = total as f64;
    let mut out = MetricReport {
        absrel: 0.0,
        sqrel: 0.0,
        rmse: 0.0,
        logrmse: 0.0,
        delta1: 0.0,
        delta2: 0.0,
        delta3: 0.0,
        valid_pixel_count: total,
    };
    for r in reports {
        let w = r.valid_pixel_count as f64 / tf;
        out.absrel += w * r.absrel;
        out.sqrel += w * r.sqrel;
        out.rmse += w * r.rmse * r.rmse;
        out.logrmse += w * r.logrmse * r.logrmse;
        out.delta1 += w * r.delta1;
        out.delta2 += w * r.delta2;
        out.delta3 += w * r.delta3;
    }
    out.rmse = libm::sqrt(out.rmse);
    out.logrmse = libm::sqrt(out.logrmse);
    Ok(out)
}

/// Mean absolute disparity error in pixels over a mask.
pub fn end_point_error(pred: &DisparityMap, gt: &DisparityMap, mask: &[bool]) -> Result<f64> {
    if pred.d.len() != gt.d.len() || pred.d.len() != mask.len() {
        return Err(CoreError::Shape("EPE shape mismatch".into()));
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..pred.d.len() {
        if mask[i] {
            acc += (pred.d[i] - gt.d[i]).abs();
            count += 1;
        }
    }
    if count == 0 {
        return Err(CoreError::EmptyMask);
    }
    Ok(acc / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn depth_conversion_closed_form() {
        let rig = CameraRig::new(400.0, 0.3).unwrap();
        let mut d = DisparityMap::zeros(1, 2);
        d.set(0, 0, 40.0);
        d.set(0, 1, 0.0);
        let z = disparity_to_depth(&d, &rig);
        assert!((z.z[0] - 3.0).abs() < 1e-12);
        assert!(z.valid[0]);
        assert!(!z.valid[1]); // d = 0 -> invalid

        let back = depth_to_disparity(&z, &rig);
        assert!((back.d[0] - 40.0).abs() < 1e-9);
    }

    #[test]
    fn identity_prediction_is_perfect() {
        let gt = vec![1.0, 2.5, 7.0];
        let mask = vec![true; 3];
        let r = compute_metrics(&gt, &gt, &mask).unwrap();
        assert_eq!(r.absrel, 0.0);
        assert_eq!(r.rmse, 0.0);
        assert_eq!((r.delta1, r.delta2, r.delta3), (1.0, 1.0, 1.0));
        assert_eq!(r.valid_pixel_count, 3);
    }

    #[test]
    fn scaled_prediction_closed_forms() {
        // pred = 1.3 * gt with gt = 2 everywhere
        let gt = vec![2.0; 10];
        let pred: Vec<f64> = gt.iter().map(|g| 1.3 * g).collect();
        let mask = vec![true; 10];
        let r = compute_metrics(&pred, &gt, &mask).unwrap();
        assert!((r.absrel - 0.3).abs() < 1e-6);
        assert!((r.rmse - 0.6).abs() < 1e-6);
        assert!((r.sqrel - 0.18).abs() < 1e-6);
        assert!((r.logrmse - 0.262364).abs() < 1e-6);
        assert_eq!(r.delta1, 0.0); // 1.3 > 1.25
        assert_eq!(r.delta2, 1.0); // 1.3 < 1.5625
        assert_eq!(r.delta3, 1.0);
    }

    #[test]
    fn matches_scalar_oracle_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let n = 500;
        let gt: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..10.0)).collect();
        let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..10.0)).collect();
        let mask: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.8)).collect();
        let r = compute_metrics(&pred, &gt, &mask).unwrap();

        // naive per-pixel oracle
        let mut vals: Vec<(f64, f64)> = Vec::new();
        for i in 0..n {
            if mask[i] {
                vals.push((pred[i], gt[i]));
            }
        }
        let m = vals.len() as f64;
        let absrel: f64 = vals.iter().map(|(p, g)| (p - g).abs() / g).sum::<f64>() / m;
        let rmse =
            (vals.iter().map(|(p, g)| (p - g) * (p - g)).sum::<f64>() / m).sqrt();
        let d2 = vals
            .iter()
            .filter(|(p, g)| (p / g).max(g / p) < 1.5625)
            .count() as f64
            / m;
        assert!((r.absrel - absrel).abs() < 1e-10);
        assert!((r.rmse - rmse).abs() < 1e-10);
        assert!((r.delta2 - d2).abs() < 1e-10);
    }

    #[test]
    fn delta_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let n = 100;
            let gt: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..10.0)).collect();
            let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..10.0)).collect();
            let r = compute_metrics(&pred, &gt, &vec![true; n]).unwrap();
            assert!(r.delta1 <= r.delta2 && r.delta2 <= r.delta3);
        }
    }

    #[test]
    fn delta_ratio_symmetry() {
        // delta_k is invariant under swapping s <-> 1/s prediction scaling
        let gt = vec![2.0; 50];
        let s = 1.4;
        let up: Vec<f64> = gt.iter().map(|g| s * g).collect();
        let down: Vec<f64> = gt.iter().map(|g| g / s).collect();
        let mask = vec![true; 50];
        let a = compute_metrics(&up, &gt, &mask).unwrap();
        let b = compute_metrics(&down, &gt, &mask).unwrap();
        assert_eq!(a.delta1, b.delta1);
        assert_eq!(a.delta2, b.delta2);
        assert_eq!(a.delta3, b.delta3);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let r = compute_metrics(&[1.0], &[1.0], &[false]);
        assert!(matches!(r, Err(CoreError::EmptyMask)));
    }

    #[test]
    fn aggregate_single_and_identical() {
        let gt = vec![2.0; 4];
        let pred = vec![2.6; 4];
        let r = compute_metrics(&pred, &gt, &vec![true; 4]).unwrap();
        let one = aggregate(&[r]).unwrap();
        assert!((one.absrel - r.absrel).abs() < 1e-12);
        let two = aggregate(&[r, r]).unwrap();
        assert!((two.absrel - r.absrel).abs() < 1e-12);
        assert!((two.rmse - r.rmse).abs() < 1e-12);
        assert_eq!(two.valid_pixel_count, 8);
    }

    #[test]
    fn aggregate_weighted_mean() {
        // two reports with known counts: hand-computed pixel weighting
        let mut a = compute_metrics(&[2.6; 3], &[2.0; 3], &[true; 3]).unwrap();
        let b = compute_metrics(&[2.0; 1], &[2.0; 1], &[true; 1]).unwrap();
        a.valid_pixel_count = 3;
        let agg = aggregate(&[a, b]).unwrap();
        assert!((agg.absrel - (3.0 * 0.3 + 1.0 * 0.0) / 4.0).abs() < 1e-12);
        assert!((agg.delta1 - (3.0 * 0.0 + 1.0 * 1.0) / 4.0).abs() < 1e-12);
    }
}
