//! Synthetic stereo dataset emission: PPM images, PFM ground truth, and a
//! JSON manifest, all deterministic under the master seed.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use ssa2_core::synth::{
    apply_underwater, render_stereo, single_plane_scene, two_plane_scene, CameraRig, StereoScene,
    UnderwaterParams, DEFAULT_BASELINES,
};

use crate::pfm::PfmImage;
use crate::{ppm, IoError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetOptions {
    pub width: usize,
    pub height: usize,
    pub focal_px: f64,
    /// Candidate rig baselines in meters, sampled per scene.
    pub baselines: Vec<f64>,
    pub underwater: bool,
    pub integer_disp: bool,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            focal_px: 400.0,
            baselines: DEFAULT_BASELINES.to_vec(),
            underwater: false,
            integer_disp: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ManifestScene {
    pub index: usize,
    pub left: String,
    pub right: String,
    pub disp: String,
    pub mask: String,
    pub focal_px: f64,
    pub baseline_m: f64,
    pub seed: u64,
    pub kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub width: usize,
    pub height: usize,
    pub master_seed: u64,
    pub underwater: Option<[[f64; 3]; 2]>,
    pub scenes: Vec<ManifestScene>,
}

/// Renders one dataset scene. Even indices are single planes, odd indices
/// two planes; disparities stay within the quarter-resolution lookup range.
pub fn make_scene(
    opts: &DatasetOptions,
    master_seed: u64,
    index: usize,
) -> Result<(StereoScene, CameraRig, String, u64)> {
    let seed = master_seed
        .wrapping_add(0x5851_f42d_4c95_7f2d_u64.wrapping_mul(index as u64 + 1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if opts.width < 80 {
        return Err(IoError::Core(ssa2_core::CoreError::Config(format!(
            "scene width {} is too small for the disparity sampler (need >= 80)",
            opts.width
        ))));
    }
    let baseline = opts.baselines[rng.gen_range(0..opts.baselines.len())];
    let rig = CameraRig::new(opts.focal_px, baseline)?;
    let d_max = (opts.width as f64 / 8.0).min(72.0);
    let d_far = rng.gen_range(4.0..d_max * 0.5);
    let mut spec = if index % 2 == 0 {
        single_plane_scene(opts.width, opts.height, &rig, d_far, seed)
    } else {
        let d_near = rng.gen_range(d_far + 4.0..d_max);
        two_plane_scene(opts.width, opts.height, &rig, d_far, d_near, seed)
    };
    spec.integer_disp = opts.integer_disp;
    let mut scene = render_stereo(&spec, &rig, seed)?;
    if opts.underwater {
        let p = UnderwaterParams::murky();
        scene.img_l = apply_underwater(&scene.img_l, &scene.depth_l, &p)?;
        scene.img_r = apply_underwater(&scene.img_r, &scene.depth_r, &p)?;
    }
    let kind = if index % 2 == 0 { "single_plane" } else { "two_plane" };
    Ok((scene, rig, kind.to_string(), seed))
}

/// Writes `n` scene quadruplets plus `manifest.json` into `out_dir`.
pub fn dataset_emit(
    n: usize,
    out_dir: impl AsRef<Path>,
    opts: &DatasetOptions,
    master_seed: u64,
) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)
        .map_err(|e| IoError::file(out_dir.display().to_string(), e))?;
    let mut scenes = Vec::with_capacity(n);
    for i in 0..n {
        let (scene, rig, kind, seed) = make_scene(opts, master_seed, i)?;
        let left = format!("scene{i:04}_left.ppm");
        let right = format!("scene{i:04}_right.ppm");
        let disp = format!("scene{i:04}_disp.pfm");
        let mask = format!("scene{i:04}_mask.pfm");
        ppm::save(&scene.img_l, out_dir.join(&left))?;
        ppm::save(&scene.img_r, out_dir.join(&right))?;
        PfmImage::from_disparity(&scene.gt_disp).save(out_dir.join(&disp))?;
        // non-occluded mask: 1.0 where the pixel counts for evaluation
        let mask_data: Vec<f32> = scene
            .occluded
            .iter()
            .map(|o| if *o { 0.0 } else { 1.0 })
            .collect();
        PfmImage::new(scene.gt_disp.width, scene.gt_disp.height, mask_data)?
            .save(out_dir.join(&mask))?;
        scenes.push(ManifestScene {
            index: i,
            left,
            right,
            disp,
            mask,
            focal_px: rig.focal_px,
            baseline_m: rig.baseline_m,
            seed,
            kind,
        });
    }
    let manifest = Manifest {
        width: opts.width,
        height: opts.height,
        master_seed,
        underwater: if opts.underwater {
            let p = UnderwaterParams::murky();
            Some([p.beta, p.veil])
        } else {
            None
        },
        scenes,
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, json).map_err(|e| IoError::file(path.display().to_string(), e))?;
    Ok(manifest)
}
