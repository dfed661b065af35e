//! Deterministic synthetic rectified-stereo scenes with exact ground-truth
//! disparity and optional underwater degradation.
//!
//! Scenes are stacks of fronto-parallel textured rectangles over a
//! background plane. Textures are seeded band-limited wave mixtures, so the
//! right view can be rendered by sampling the same continuous texture at the
//! horizontally shifted position; in integer-disparity mode the two views
//! are bit-exact copies on non-occluded pixels.

use alloc::{format, vec, vec::Vec};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::map::{DisparityMap, FeatureMap2D};

/// Baselines sampled by default, in meters.
pub const DEFAULT_BASELINES: [f64; 4] = [0.20, 0.30, 0.40, 0.50];

/// Rectified camera rig; `disparity = focal_px * baseline_m / depth_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRig {
    pub focal_px: f64,
    pub baseline_m: f64,
}

impl CameraRig {
    pub fn new(focal_px: f64, baseline_m: f64) -> Result<Self> {
        if !(focal_px > 0.0) || !(baseline_m > 0.0) {
            return Err(CoreError::Config(format!(
                "focal ({focal_px}) and baseline ({baseline_m}) must be positive"
            )));
        }
        Ok(Self {
            focal_px,
            baseline_m,
        })
    }

    pub fn disparity_for_depth(&self, depth_m: f64) -> f64 {
        self.focal_px * self.baseline_m / depth_m
    }

    pub fn depth_for_disparity(&self, d_px: f64) -> f64 {
        self.focal_px * self.baseline_m / d_px
    }
}

/// One fronto-parallel textured rectangle; bounds are half-open pixel ranges
/// in the left view.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub depth_m: f64,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
    pub texture_seed: u64,
}

impl Layer {
    #[inline]
    fn covers(&self, x: f64, y: f64) -> bool {
        x >= self.x0 as f64 && x < self.x1 as f64 && y >= self.y0 as f64 && y < self.y1 as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background_depth_m: f64,
    pub background_seed: u64,
    pub layers: Vec<Layer>,
    /// Snap every layer disparity to the nearest integer pixel.
    pub integer_disp: bool,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width % 8 != 0 || self.height % 8 != 0 {
            return Err(CoreError::Config(format!(
                "scene size {}x{} must be divisible by 8",
                self.width, self.height
            )));
        }
        if !(self.background_depth_m > 0.0) {
            return Err(CoreError::Config("background depth must be positive".into()));
        }
        for l in &self.layers {
            if !(l.depth_m > 0.0) {
                return Err(CoreError::Config("layer depth must be positive".into()));
            }
            if l.x1 <= l.x0 || l.y1 <= l.y0 || l.x1 > self.width || l.y1 > self.height {
                return Err(CoreError::Config("layer bounds out of range".into()));
            }
        }
        Ok(())
    }
}

/// Per-channel attenuation plus additive veiling light.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnderwaterParams {
    pub beta: [f64; 3],
    pub veil: [f64; 3],
}

impl UnderwaterParams {
    pub fn validate(&self) -> Result<()> {
        for c in 0..3 {
            if self.beta[c] < 0.0 {
                return Err(CoreError::Config("attenuation must be non-negative".into()));
            }
            if !(0.0..=1.0).contains(&self.veil[c]) {
                return Err(CoreError::Config("veil color must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// A bluish-green water column, the common default.
    pub fn murky() -> Self {
        Self {
            beta: [0.45, 0.12, 0.08],
            veil: [0.10, 0.35, 0.45],
        }
    }
}

const WAVE_COMPONENTS: usize = 12;

/// Band-limited texture: a seeded mixture of 2D cosine waves per channel,
/// with wavelengths between 8 and 16 pixels, mapped into [0, 1]. The short
/// wavelengths keep the correlation peak sharp at quarter resolution, which
/// is what makes sub-pixel parabola fits reliable.
struct WaveTexture {
    // (amp, kx, ky, phase) per channel per component
    waves: [[(f64, f64, f64, f64); WAVE_COMPONENTS]; 3],
    norm: [f64; 3],
}

impl WaveTexture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut waves = [[(0.0, 0.0, 0.0, 0.0); WAVE_COMPONENTS]; 3];
        let mut norm = [0.0; 3];
        for ch in 0..3 {
            for w in 0..WAVE_COMPONENTS {
                let wavelength = rng.gen_range(8.0..16.0);
                let angle = rng.gen_range(0.0..core::f64::consts::TAU);
                let k = core::f64::consts::TAU / wavelength;
                let amp = rng.gen_range(0.5..1.0);
                waves[ch][w] = (
                    amp,
                    k * libm::cos(angle),
                    k * libm::sin(angle),
                    rng.gen_range(0.0..core::f64::consts::TAU),
                );
                norm[ch] += amp;
            }
        }
        Self { waves, norm }
    }

    fn sample(&self, ch: usize, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        for (amp, kx, ky, phase) in self.waves[ch] {
            acc += amp * libm::cos(kx * x + ky * y + phase);
        }
        0.5 + 0.45 * acc / self.norm[ch]
    }
}

/// A rendered stereo pair with exact ground truth.
///
/// `occluded[p]` is true for left pixels hidden in the right view or whose
/// correspondence falls off the left border of the right image; those pixels
/// are excluded from photometric-consistency and accuracy checks.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoScene {
    pub img_l: FeatureMap2D,
    pub img_r: FeatureMap2D,
    pub gt_disp: DisparityMap,
    pub depth_l: Vec<f64>,
    pub depth_r: Vec<f64>,
    pub occluded: Vec<bool>,
}

struct Prepared {
    depth_m: f64,
    disp: f64,
    // None marks the background plane
    layer: Option<usize>,
    texture: WaveTexture,
}

/// Renders the left/right pair, ground-truth disparity, per-pixel depth, and
/// the occlusion mask.
pub fn render_stereo(spec: &SceneSpec, rig: &CameraRig, seed: u64) -> Result<StereoScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let quarter_max = (w / 4 - 1) as f64;

    let snap = |d: f64| if spec.integer_disp { libm::round(d) } else { d };
    let mut planes: Vec<Prepared> = Vec::with_capacity(spec.layers.len() + 1);
    planes.push(Prepared {
        depth_m: spec.background_depth_m,
        disp: snap(rig.disparity_for_depth(spec.background_depth_m)),
        layer: None,
        texture: WaveTexture::new(seed ^ spec.background_seed),
    });
    for (idx, l) in spec.layers.iter().enumerate() {
        planes.push(Prepared {
            depth_m: l.depth_m,
            disp: snap(rig.disparity_for_depth(l.depth_m)),
            layer: Some(idx),
            texture: WaveTexture::new(seed ^ l.texture_seed),
        });
    }
    for p in &planes {
        if p.disp / 4.0 > quarter_max {
            return Err(CoreError::Config(format!(
                "disparity {:.2} px exceeds the representable range {} at volume resolution",
                p.disp,
                quarter_max * 4.0
            )));
        }
        if p.disp < 0.0 {
            return Err(CoreError::Config("negative disparity".into()));
        }
    }

    // nearest plane covering a left-view position (texture coordinates are
    // left-view pixel coordinates for every plane)
    let visible = |x: f64, y: f64| -> &Prepared {
        let mut best = &planes[0];
        for p in &planes[1..] {
            let l = &spec.layers[p.layer.unwrap()];
            if l.covers(x, y) && p.depth_m < best.depth_m {
                best = p;
            }
        }
        best
    };

    let mut img_l = FeatureMap2D::zeros(h, w, 3);
    let mut img_r = FeatureMap2D::zeros(h, w, 3);
    let mut gt_disp = DisparityMap::zeros(h, w);
    let mut depth_l = vec![0.0; h * w];
    let mut depth_r = vec![0.0; h * w];

    for y in 0..h {
        for x in 0..w {
            let xf = x as f64;
            let yf = y as f64;
            // left view
            let p = visible(xf, yf);
            for ch in 0..3 {
                img_l.set(y, x, ch, p.texture.sample(ch, xf, yf));
            }
            gt_disp.set(y, x, p.disp);
            depth_l[y * w + x] = p.depth_m;

            // right view: a plane with disparity d covers right column x if
            // its left-view footprint covers x + d
            let mut best: Option<&Prepared> = None;
            for p in &planes {
                let xl = xf + p.disp;
                let covered = match p.layer {
                    None => true,
                    Some(idx) => spec.layers[idx].covers(xl, yf),
                };
                if covered && best.map_or(true, |b| p.depth_m < b.depth_m) {
                    best = Some(p);
                }
            }
            let p = best.unwrap(); // background always covers
            for ch in 0..3 {
                img_r.set(y, x, ch, p.texture.sample(ch, xf + p.disp, yf));
            }
            depth_r[y * w + x] = p.depth_m;
        }
    }

    const DEPTH_EPS: f64 = 1e-9;
    let mut occluded = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let d = gt_disp.get(y, x);
            let xr = x as f64 - d;
            let occ = if xr < -0.5 {
                true // falls off the left border of the right image
            } else {
                let xi = libm::round(xr).clamp(0.0, (w - 1) as f64) as usize;
                depth_r[y * w + xi] < depth_l[y * w + x] - DEPTH_EPS
            };
            occluded[y * w + x] = occ;
        }
    }

    Ok(StereoScene {
        img_l,
        img_r,
        gt_disp,
        depth_l,
        depth_r,
        occluded,
    })
}

/// Underwater image formation: per channel
/// `img' = img * exp(-beta z) + veil * (1 - exp(-beta z))`.
pub fn apply_underwater(
    img: &FeatureMap2D,
    depth_m: &[f64],
    p: &UnderwaterParams,
) -> Result<FeatureMap2D> {
    p.validate()?;
    if img.channels != 3 || depth_m.len() != img.height * img.width {
        return Err(CoreError::Shape(
            "underwater degradation expects an RGB image with a matching depth map".into(),
        ));
    }
    let mut out = img.clone();
    for px in 0..depth_m.len() {
        let z = depth_m[px];
        for ch in 0..3 {
            let t = libm::exp(-p.beta[ch] * z);
            let v = img.data[px * 3 + ch];
            out.data[px * 3 + ch] = v * t + p.veil[ch] * (1.0 - t);
        }
    }
    Ok(out)
}

/// A single fronto-parallel plane filling the frame.
pub fn single_plane_scene(
    width: usize,
    height: usize,
    rig: &CameraRig,
    disparity_px: f64,
    seed: u64,
) -> SceneSpec {
    SceneSpec {
        width,
        height,
        background_depth_m: rig.depth_for_disparity(disparity_px),
        background_seed: seed.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        layers: Vec::new(),
        integer_disp: true,
    }
}

/// A nearer rectangle over a farther background; bounds snapped to the
/// quarter-resolution grid.
pub fn two_plane_scene(
    width: usize,
    height: usize,
    rig: &CameraRig,
    disp_far_px: f64,
    disp_near_px: f64,
    seed: u64,
) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rw = ((width / 10).max(32).min(width / 2) / 4) * 4;
    let rh = ((height / 10).max(16).min(height / 2) / 4) * 4;
    let x0 = (rng.gen_range(width / 4..width / 2) / 4) * 4;
    let y0 = (rng.gen_range(height / 8..height / 2) / 4) * 4;
    SceneSpec {
        width,
        height,
        background_depth_m: rig.depth_for_disparity(disp_far_px),
        background_seed: seed.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        layers: vec![Layer {
            depth_m: rig.depth_for_disparity(disp_near_px),
            x0,
            y0,
            x1: x0 + rw,
            y1: y0 + rh,
            texture_seed: seed.wrapping_add(1).wrapping_mul(0xbf58_476d_1ce4_e5b9),
        }],
        integer_disp: true,
    }
}
