//! Iterative disparity refinement driven by the ConvSS2D operator.
//!
//! The hidden state is initialized by projecting left features (there is no
//! separate context encoder anywhere in the pipeline); each step looks up
//! correlation features around the current estimate, encodes them together
//! with the disparity, runs the cross-scan block, and predicts a residual
//! disparity update. The oracle mode replaces the learned update with the
//! winner-take-all solution of the raw correlation volume, which converges
//! in a single step and anchors the end-to-end tests.

use alloc::{format, vec, vec::Vec};

use rand::Rng;

use crate::config::{DEFAULT_INFER_ITERS, DEFAULT_LOOKUP_RADIUS, PYRAMID_LEVELS};
use crate::corr::{build_correlation, build_pyramid, lookup, wta_disparity, CorrPyramid, CorrelationVolume};
use crate::error::{CoreError, Result};
use crate::features::{extract, ExtractorConfig, LearnedWeights};
use crate::map::{DisparityMap, FeatureMap2D};
use crate::scan2d::{convss2d_forward, ConvSS2DWeights};

/// Quarter-resolution refinement state.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineState {
    pub d: DisparityMap,
    pub hidden: FeatureMap2D,
}

/// All learned tensors of the update operator.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateWeights {
    pub c_feat: usize,
    pub c_hidden: usize,
    pub c_motion: usize,
    pub radius: usize,
    pub levels: usize,
    /// `[C_h x C_feat]` projection of left features into the initial hidden
    /// state (through tanh).
    pub state_init_proj: Vec<f64>,
    pub state_init_bias: Vec<f64>,
    /// Motion encoder: two 3x3 convolutions over (correlation ++ disparity).
    pub motion_conv1: Vec<f64>,
    pub motion_bias1: Vec<f64>,
    pub motion_conv2: Vec<f64>,
    pub motion_bias2: Vec<f64>,
    /// `[C_h x (C_m + C_h)]` projection of (motion ++ hidden) into the block
    /// input.
    pub concat_proj: Vec<f64>,
    pub concat_bias: Vec<f64>,
    pub convss2d: ConvSS2DWeights,
    pub hidden_head: Vec<f64>,
    pub hidden_head_bias: Vec<f64>,
    pub delta_head: Vec<f64>,
    pub delta_bias: f64,
}

impl UpdateWeights {
    pub fn corr_channels(&self) -> usize {
        self.levels * (2 * self.radius + 1)
    }

    pub fn new(c_feat: usize, c_hidden: usize, c_motion: usize, d_state: usize) -> Self {
        let radius = DEFAULT_LOOKUP_RADIUS;
        let levels = PYRAMID_LEVELS;
        let corr_in = levels * (2 * radius + 1) + 1;
        Self {
            c_feat,
            c_hidden,
            c_motion,
            radius,
            levels,
            state_init_proj: vec![0.0; c_hidden * c_feat],
            state_init_bias: vec![0.0; c_hidden],
            motion_conv1: vec![0.0; c_motion * corr_in * 9],
            motion_bias1: vec![0.0; c_motion],
            motion_conv2: vec![0.0; c_motion * c_motion * 9],
            motion_bias2: vec![0.0; c_motion],
            concat_proj: vec![0.0; c_hidden * (c_motion + c_hidden)],
            concat_bias: vec![0.0; c_hidden],
            convss2d: ConvSS2DWeights::new(c_hidden, d_state),
            hidden_head: vec![0.0; c_hidden * c_hidden],
            hidden_head_bias: vec![0.0; c_hidden],
            delta_head: vec![0.0; c_hidden],
            delta_bias: 0.0,
        }
    }

    pub fn seeded<R: Rng>(
        c_feat: usize,
        c_hidden: usize,
        c_motion: usize,
        d_state: usize,
        rng: &mut R,
    ) -> Self {
        let mut w = Self::new(c_feat, c_hidden, c_motion, d_state);
        fn fill<R: Rng>(v: &mut [f64], scale: f64, rng: &mut R) {
            for x in v.iter_mut() {
                *x = rng.gen_range(-1.0..1.0) * scale;
            }
        }
        let corr_in = w.corr_channels() + 1;
        fill(&mut w.state_init_proj, 1.0 / libm::sqrt(c_feat as f64), rng);
        fill(&mut w.motion_conv1, 1.0 / libm::sqrt((corr_in * 9) as f64), rng);
        fill(&mut w.motion_conv2, 1.0 / libm::sqrt((c_motion * 9) as f64), rng);
        fill(
            &mut w.concat_proj,
            1.0 / libm::sqrt((c_motion + c_hidden) as f64),
            rng,
        );
        w.convss2d = ConvSS2DWeights::seeded(c_hidden, d_state, rng);
        fill(&mut w.hidden_head, 0.1 / libm::sqrt(c_hidden as f64), rng);
        fill(&mut w.delta_head, 0.1 / libm::sqrt(c_hidden as f64), rng);
        w
    }
}

fn dense(input: &[f64], weight: &[f64], bias: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows];
    for r in 0..rows {
        let mut acc = bias[r];
        for (j, x) in input.iter().enumerate().take(cols) {
            acc += weight[r * cols + j] * x;
        }
        out[r] = acc;
    }
    out
}

/// Stride-1 zero-padded 3x3 convolution with ReLU.
fn conv3x3_relu(input: &FeatureMap2D, weight: &[f64], bias: &[f64], out_ch: usize) -> FeatureMap2D {
    let (h, w, cin) = (input.height, input.width, input.channels);
    let mut out = FeatureMap2D::zeros(h, w, out_ch);
    for i in 0..h {
        for j in 0..w {
            for oc in 0..out_ch {
                let mut acc = bias[oc];
                for ic in 0..cin {
                    for di in 0..3usize {
                        for dj in 0..3usize {
                            let ii = i as isize + di as isize - 1;
                            let jj = j as isize + dj as isize - 1;
                            if ii < 0 || jj < 0 || ii >= h as isize || jj >= w as isize {
                                continue;
                            }
                            acc += weight[((oc * cin + ic) * 3 + di) * 3 + dj]
                                * input.get(ii as usize, jj as usize, ic);
                        }
                    }
                }
                out.set(i, j, oc, acc.max(0.0));
            }
        }
    }
    out
}

/// Initializes the refinement state: `hidden = tanh(proj . feat + bias)` per
/// pixel; disparity from the monocular initializer (clamped) or zero.
pub fn init_state(
    feat_l: &FeatureMap2D,
    mono_disp: Option<&DisparityMap>,
    w: &UpdateWeights,
) -> Result<RefineState> {
    if feat_l.channels != w.c_feat {
        return Err(CoreError::Shape(format!(
            "features have {} channels, update weights expect {}",
            feat_l.channels, w.c_feat
        )));
    }
    let (h, wd) = (feat_l.height, feat_l.width);
    let mut hidden = FeatureMap2D::zeros(h, wd, w.c_hidden);
    for i in 0..h {
        for j in 0..wd {
            let v = dense(
                feat_l.pixel(i, j),
                &w.state_init_proj,
                &w.state_init_bias,
                w.c_hidden,
                w.c_feat,
            );
            for (c, x) in v.iter().enumerate() {
                hidden.set(i, j, c, libm::tanh(*x));
            }
        }
    }
    let d = match mono_disp {
        Some(m) => {
            if m.height != h || m.width != wd {
                return Err(CoreError::Shape(format!(
                    "monocular initializer {}x{} does not match features {h}x{wd}",
                    m.height, m.width
                )));
            }
            let mut d = m.clone();
            d.clamp_to_range();
            d
        }
        None => DisparityMap::zeros(h, wd),
    };
    Ok(RefineState { d, hidden })
}

/// One learned update step.
pub fn update_step(
    state: &RefineState,
    pyr: &CorrPyramid,
    w: &UpdateWeights,
) -> Result<RefineState> {
    let (h, wd) = (state.d.height, state.d.width);
    if state.hidden.height != h || state.hidden.width != wd {
        return Err(CoreError::Shape("state disparity/hidden shape mismatch".into()));
    }
    if pyr.levels.len() != w.levels {
        return Err(CoreError::Shape(format!(
            "pyramid has {} levels, weights expect {}",
            pyr.levels.len(),
            w.levels
        )));
    }
    let corr = lookup(pyr, &state.d, w.radius)?;

    // motion encoder input: correlation features ++ current disparity
    let mut motion_in = FeatureMap2D::zeros(h, wd, corr.channels + 1);
    for i in 0..h {
        for j in 0..wd {
            for c in 0..corr.channels {
                motion_in.set(i, j, c, corr.get(i, j, c));
            }
            motion_in.set(i, j, corr.channels, state.d.get(i, j));
        }
    }
    let m1 = conv3x3_relu(&motion_in, &w.motion_conv1, &w.motion_bias1, w.c_motion);
    let motion = conv3x3_relu(&m1, &w.motion_conv2, &w.motion_bias2, w.c_motion);

    // (motion ++ hidden) projected to the block input width
    let mut block_in = FeatureMap2D::zeros(h, wd, w.c_hidden);
    let mut concat = vec![0.0; w.c_motion + w.c_hidden];
    for i in 0..h {
        for j in 0..wd {
            concat[..w.c_motion].copy_from_slice(motion.pixel(i, j));
            concat[w.c_motion..].copy_from_slice(state.hidden.pixel(i, j));
            let v = dense(
                &concat,
                &w.concat_proj,
                &w.concat_bias,
                w.c_hidden,
                w.c_motion + w.c_hidden,
            );
            for (c, x) in v.iter().enumerate() {
                block_in.set(i, j, c, *x);
            }
        }
    }

    let scanned = convss2d_forward(&block_in, &w.convss2d)?;

    let mut hidden = state.hidden.clone();
    let mut d = state.d.clone();
    let max_d = (wd - 1) as f64;
    for i in 0..h {
        for j in 0..wd {
            let upd = dense(
                scanned.pixel(i, j),
                &w.hidden_head,
                &w.hidden_head_bias,
                w.c_hidden,
                w.c_hidden,
            );
            let mut delta = w.delta_bias;
            for c in 0..w.c_hidden {
                let hv = state.hidden.get(i, j, c) + upd[c];
                hidden.set(i, j, c, hv);
                delta += w.delta_head[c] * hv;
            }
            if !delta.is_finite() {
                return Err(CoreError::Numeric(format!(
                    "non-finite disparity update at pixel ({i}, {j})"
                )));
            }
            d.set(i, j, (state.d.get(i, j) + delta).clamp(0.0, max_d));
        }
    }
    Ok(RefineState { d, hidden })
}

/// Oracle update: jumps straight to the winner-take-all disparity of the raw
/// volume (`delta = wta - d` applied in full).
pub fn oracle_step(state: &RefineState, vol: &CorrelationVolume) -> RefineState {
    let mut d = wta_disparity(vol);
    d.clamp_to_range();
    RefineState {
        d,
        hidden: state.hidden.clone(),
    }
}

/// Bilinear 4x spatial upsampling with 4x value scaling.
pub fn upsample_x4(d: &DisparityMap) -> DisparityMap {
    let (h, w) = (d.height, d.width);
    let (oh, ow) = (4 * h, 4 * w);
    let mut out = DisparityMap::zeros(oh, ow);
    for i in 0..oh {
        for j in 0..ow {
            let sy = ((i as f64 + 0.5) / 4.0 - 0.5).clamp(0.0, (h - 1) as f64);
            let sx = ((j as f64 + 0.5) / 4.0 - 0.5).clamp(0.0, (w - 1) as f64);
            let y0 = libm::floor(sy) as usize;
            let x0 = libm::floor(sx) as usize;
            let y1 = (y0 + 1).min(h - 1);
            let x1 = (x0 + 1).min(w - 1);
            let fy = sy - y0 as f64;
            let fx = sx - x0 as f64;
            let v = (1.0 - fy) * ((1.0 - fx) * d.get(y0, x0) + fx * d.get(y0, x1))
                + fy * ((1.0 - fx) * d.get(y1, x0) + fx * d.get(y1, x1));
            out.set(i, j, 4.0 * v);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RefineMode {
    #[default]
    Learned,
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    pub iters: usize,
    pub mode: RefineMode,
    /// Keep the quarter-resolution disparity of every iteration.
    pub snapshots: bool,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            iters: DEFAULT_INFER_ITERS,
            mode: RefineMode::Learned,
            snapshots: false,
        }
    }
}

/// Feature extraction settings plus update weights: everything a refinement
/// run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RefineWeights {
    pub extractor: ExtractorConfig,
    pub learned_feat: Option<LearnedWeights>,
    pub update: UpdateWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineResult {
    /// Full-resolution disparity.
    pub disparity: DisparityMap,
    /// Quarter-resolution iterates, when requested (`snapshots`).
    pub snapshots: Vec<DisparityMap>,
}

/// The full pipeline: extract features, build the correlation pyramid,
/// initialize, iterate, upsample.
pub fn run_refinement(
    img_l: &FeatureMap2D,
    img_r: &FeatureMap2D,
    weights: &RefineWeights,
    mono_disp: Option<&DisparityMap>,
    opts: &RefineOptions,
) -> Result<RefineResult> {
    if !img_l.same_shape(img_r) {
        return Err(CoreError::Shape("stereo pair shapes differ".into()));
    }
    let feat_l = extract(img_l, &weights.extractor, weights.learned_feat.as_ref())?;
    let feat_r = extract(img_r, &weights.extractor, weights.learned_feat.as_ref())?;
    let vol = build_correlation(&feat_l, &feat_r)?;
    let pyr = build_pyramid(&vol);

    let mut state = init_state(&feat_l, mono_disp, &weights.update)?;
    let mut snapshots = Vec::new();
    if opts.snapshots {
        snapshots.push(state.d.clone());
    }
    for it in 0..opts.iters {
        state = match opts.mode {
            RefineMode::Learned => update_step(&state, &pyr, &weights.update)
                .map_err(|e| annotate_iteration(e, it))?,
            RefineMode::Oracle => oracle_step(&state, &vol),
        };
        if opts.snapshots {
            snapshots.push(state.d.clone());
        }
    }
    Ok(RefineResult {
        disparity: upsample_x4(&state.d),
        snapshots,
    })
}

fn annotate_iteration(e: CoreError, it: usize) -> CoreError {
    match e {
        CoreError::Numeric(m) => CoreError::Numeric(format!("iteration {it}: {m}")),
        other => other,
    }
}

/// Exponentially weighted per-iteration L1 loss:
/// `sum_t gamma^(T - t) mean(|d_t - gt|)` over valid pixels, for iterates
/// `d_1 .. d_T`. Defined for gradient-free evaluation only.
pub fn sequence_loss(
    iterates: &[DisparityMap],
    gt: &DisparityMap,
    valid: &[bool],
    gamma: f64,
) -> Result<f64> {
    if iterates.is_empty() {
        return Err(CoreError::Config("sequence loss needs at least one iterate".into()));
    }
    let t_total = iterates.len();
    let mut loss = 0.0;
    for (t, it) in iterates.iter().enumerate() {
        if it.d.len() != gt.d.len() || valid.len() != gt.d.len() {
            return Err(CoreError::Shape("sequence loss shape mismatch".into()));
        }
        let mut acc = 0.0;
        let mut count = 0usize;
        for i in 0..gt.d.len() {
            if valid[i] {
                acc += (it.d[i] - gt.d[i]).abs();
                count += 1;
            }
        }
        if count == 0 {
            return Err(CoreError::EmptyMask);
        }
        let weight = libm::pow(gamma, (t_total - 1 - t) as f64);
        loss += weight * acc / count as f64;
    }
    Ok(loss)
}
