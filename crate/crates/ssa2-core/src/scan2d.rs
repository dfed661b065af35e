//! Four-directional cross-scan over 2D feature maps and the ConvSS2D block.
//!
//! A feature map is unrolled into four 1D sequences (row-forward,
//! row-backward, column-forward, column-backward), each a bijective
//! reordering of the `H * W` positions. The backward orders are the full
//! flattened forward sequences reversed end to end. After per-direction
//! selective scans the outputs are un-permuted and summed.

use alloc::{format, vec, vec::Vec};

use crate::error::{CoreError, Result};
use crate::map::FeatureMap2D;
use crate::ssm::{scan_sequential, ScanSequence, SelectiveParams};

pub const NUM_DIRECTIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanDirection {
    RowLr = 0,
    RowRl = 1,
    ColTb = 2,
    ColBt = 3,
}

pub const ALL_DIRECTIONS: [ScanDirection; NUM_DIRECTIONS] = [
    ScanDirection::RowLr,
    ScanDirection::RowRl,
    ScanDirection::ColTb,
    ScanDirection::ColBt,
];

/// Whether the recurrence resets at each row/column boundary or runs over the
/// whole flattened sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanMode {
    #[default]
    ResetPerLine,
    FullSequence,
}

/// The four directional unrollings of an `H x W x C` map.
///
/// `perms[d][s]` is the flat pixel index (`i * W + j`) visited at sequence
/// position `s`; `inv[d]` is the inverse permutation.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossScanBundle {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub seqs: [Vec<f64>; NUM_DIRECTIONS],
    pub perms: [Vec<usize>; NUM_DIRECTIONS],
    pub inv: [Vec<usize>; NUM_DIRECTIONS],
}

impl CrossScanBundle {
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of one uninterrupted recurrence segment for a direction under
    /// [`ScanMode::ResetPerLine`].
    pub fn segment_len(&self, dir: ScanDirection) -> usize {
        match dir {
            ScanDirection::RowLr | ScanDirection::RowRl => self.width,
            ScanDirection::ColTb | ScanDirection::ColBt => self.height,
        }
    }
}

fn direction_perm(h: usize, w: usize, dir: ScanDirection) -> Vec<usize> {
    let mut p = Vec::with_capacity(h * w);
    match dir {
        ScanDirection::RowLr => {
            for i in 0..h {
                for j in 0..w {
                    p.push(i * w + j);
                }
            }
        }
        ScanDirection::ColTb => {
            for j in 0..w {
                for i in 0..h {
                    p.push(i * w + j);
                }
            }
        }
        ScanDirection::RowRl => {
            let mut fwd = direction_perm(h, w, ScanDirection::RowLr);
            fwd.reverse();
            p = fwd;
        }
        ScanDirection::ColBt => {
            let mut fwd = direction_perm(h, w, ScanDirection::ColTb);
            fwd.reverse();
            p = fwd;
        }
    }
    p
}

/// Unrolls `f` into the four directional sequences with inverse permutations.
pub fn cross_expand(f: &FeatureMap2D) -> CrossScanBundle {
    let (h, w, c) = (f.height, f.width, f.channels);
    let l = h * w;
    let mut seqs: [Vec<f64>; NUM_DIRECTIONS] = Default::default();
    let mut perms: [Vec<usize>; NUM_DIRECTIONS] = Default::default();
    let mut inv: [Vec<usize>; NUM_DIRECTIONS] = Default::default();
    for (d, dir) in ALL_DIRECTIONS.iter().enumerate() {
        let perm = direction_perm(h, w, *dir);
        let mut seq = vec![0.0; l * c];
        let mut ip = vec![0usize; l];
        for (s, &flat) in perm.iter().enumerate() {
            ip[flat] = s;
            seq[s * c..(s + 1) * c].copy_from_slice(&f.data[flat * c..(flat + 1) * c]);
        }
        seqs[d] = seq;
        perms[d] = perm;
        inv[d] = ip;
    }
    CrossScanBundle {
        height: h,
        width: w,
        channels: c,
        seqs,
        perms,
        inv,
    }
}

/// Un-permutes four directional outputs back to `H x W x C` and sums them.
pub fn cross_merge(
    outputs: &[Vec<f64>; NUM_DIRECTIONS],
    bundle: &CrossScanBundle,
) -> Result<FeatureMap2D> {
    let (h, w, c) = (bundle.height, bundle.width, bundle.channels);
    let l = h * w;
    for (d, out) in outputs.iter().enumerate() {
        if out.len() != l * c {
            return Err(CoreError::Shape(format!(
                "direction {d} output length {} does not match {l}x{c}",
                out.len()
            )));
        }
    }
    let mut merged = FeatureMap2D::zeros(h, w, c);
    for d in 0..NUM_DIRECTIONS {
        let out = &outputs[d];
        for (s, &flat) in bundle.perms[d].iter().enumerate() {
            for ch in 0..c {
                merged.data[flat * c + ch] += out[s * c + ch];
            }
        }
    }
    Ok(merged)
}

/// Runs one direction's selective scan over its sequence, resetting the state
/// at segment boundaries in [`ScanMode::ResetPerLine`].
pub fn scan_direction(
    bundle: &CrossScanBundle,
    dir: ScanDirection,
    p: &SelectiveParams,
    mode: ScanMode,
) -> Result<Vec<f64>> {
    let c = bundle.channels;
    let l = bundle.len();
    let seq_data = &bundle.seqs[dir as usize];
    let segment = match mode {
        ScanMode::ResetPerLine => bundle.segment_len(dir),
        ScanMode::FullSequence => l,
    };
    let mut out = vec![0.0; l * c];
    let mut start = 0;
    while start < l {
        let end = (start + segment).min(l);
        let seq = ScanSequence::new(end - start, c, seq_data[start * c..end * c].to_vec())?;
        let res = scan_sequential(&seq, p, None)?;
        out[start * c..end * c].copy_from_slice(&res.y);
        start = end;
    }
    Ok(out)
}

/// Weights of one ConvSS2D block over `C` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSS2DWeights {
    pub channels: usize,
    /// Depthwise 3x3 kernel, `[C x 3 x 3]` row-major per channel.
    pub dw_conv: Vec<f64>,
    pub dw_bias: Vec<f64>,
    pub gate_proj: Vec<f64>,
    pub gate_bias: Vec<f64>,
    pub out_proj: Vec<f64>,
    pub out_bias: Vec<f64>,
    pub norm_scale: Vec<f64>,
    pub norm_shift: Vec<f64>,
    pub dirs: [SelectiveParams; NUM_DIRECTIONS],
    pub mode: ScanMode,
}

impl ConvSS2DWeights {
    /// Identity-leaning zero initialization: identity out/gate projections
    /// would still gate everything to zero, so projections start at identity
    /// and the scan parameters at their defaults.
    pub fn new(channels: usize, d_state: usize) -> Self {
        let mut gate_proj = vec![0.0; channels * channels];
        let mut out_proj = vec![0.0; channels * channels];
        for i in 0..channels {
            gate_proj[i * channels + i] = 1.0;
            out_proj[i * channels + i] = 1.0;
        }
        Self {
            channels,
            dw_conv: vec![0.0; channels * 9],
            dw_bias: vec![0.0; channels],
            gate_proj,
            gate_bias: vec![0.0; channels],
            out_proj,
            out_bias: vec![0.0; channels],
            norm_scale: vec![1.0; channels],
            norm_shift: vec![0.0; channels],
            dirs: [
                SelectiveParams::new(channels, d_state),
                SelectiveParams::new(channels, d_state),
                SelectiveParams::new(channels, d_state),
                SelectiveParams::new(channels, d_state),
            ],
            mode: ScanMode::default(),
        }
    }

    pub fn seeded<R: rand::Rng>(channels: usize, d_state: usize, rng: &mut R) -> Self {
        let mut w = Self::new(channels, d_state);
        let scale = 1.0 / libm::sqrt(channels as f64);
        for v in w.dw_conv.iter_mut() {
            *v = rng.gen_range(-1.0..1.0) / 3.0;
        }
        for v in w.gate_proj.iter_mut().chain(w.out_proj.iter_mut()) {
            *v = rng.gen_range(-1.0..1.0) * scale;
        }
        for v in w.gate_bias.iter_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        for d in w.dirs.iter_mut() {
            *d = SelectiveParams::seeded(channels, d_state, rng);
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.channels;
        let shapes = [
            (self.dw_conv.len(), c * 9, "dw_conv"),
            (self.dw_bias.len(), c, "dw_bias"),
            (self.gate_proj.len(), c * c, "gate_proj"),
            (self.gate_bias.len(), c, "gate_bias"),
            (self.out_proj.len(), c * c, "out_proj"),
            (self.out_bias.len(), c, "out_bias"),
            (self.norm_scale.len(), c, "norm_scale"),
            (self.norm_shift.len(), c, "norm_shift"),
        ];
        for (got, want, name) in shapes {
            if got != want {
                return Err(CoreError::Shape(format!(
                    "{name}: expected {want} entries, got {got}"
                )));
            }
        }
        for d in &self.dirs {
            d.validate()?;
            if d.channels != c {
                return Err(CoreError::Shape(
                    "direction parameters disagree with block channel count".into(),
                ));
            }
        }
        Ok(())
    }
}

fn silu(x: f64) -> f64 {
    x / (1.0 + libm::exp(-x))
}

/// Depthwise 3x3 convolution with zero padding.
pub fn depthwise_conv3x3(f: &FeatureMap2D, kernel: &[f64], bias: &[f64]) -> Result<FeatureMap2D> {
    let (h, w, c) = (f.height, f.width, f.channels);
    if kernel.len() != c * 9 || bias.len() != c {
        return Err(CoreError::Shape("depthwise kernel/bias shape mismatch".into()));
    }
    let mut out = FeatureMap2D::zeros(h, w, c);
    for i in 0..h {
        for j in 0..w {
            for ch in 0..c {
                let mut acc = bias[ch];
                for di in 0..3usize {
                    for dj in 0..3usize {
                        let ii = i as isize + di as isize - 1;
                        let jj = j as isize + dj as isize - 1;
                        if ii < 0 || jj < 0 || ii >= h as isize || jj >= w as isize {
                            continue;
                        }
                        acc += kernel[ch * 9 + di * 3 + dj]
                            * f.get(ii as usize, jj as usize, ch);
                    }
                }
                out.set(i, j, ch, acc);
            }
        }
    }
    Ok(out)
}

const LAYER_NORM_EPS: f64 = 1e-6;

fn layer_norm_channels(f: &mut FeatureMap2D, scale: &[f64], shift: &[f64]) {
    let c = f.channels;
    for px in f.data.chunks_mut(c) {
        let mean: f64 = px.iter().sum::<f64>() / c as f64;
        let var: f64 = px.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let inv = 1.0 / libm::sqrt(var + LAYER_NORM_EPS);
        for (ch, v) in px.iter_mut().enumerate() {
            *v = (*v - mean) * inv * scale[ch] + shift[ch];
        }
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

/// The full ConvSS2D pipeline:
/// depthwise 3x3 conv -> SiLU -> cross-scan (four directional selective
/// scans) -> merge -> channel layer norm -> gate with `SiLU(gate_proj input)`
/// -> output projection.
pub fn convss2d_forward(f: &FeatureMap2D, w: &ConvSS2DWeights) -> Result<FeatureMap2D> {
    w.validate()?;
    if f.channels != w.channels {
        return Err(CoreError::Shape(format!(
            "input has {} channels, block expects {}",
            f.channels, w.channels
        )));
    }
    let c = f.channels;

    let conv = depthwise_conv3x3(f, &w.dw_conv, &w.dw_bias)?;
    let mut activated = conv;
    for v in activated.data.iter_mut() {
        *v = silu(*v);
    }

    let bundle = cross_expand(&activated);
    let mut outputs: [Vec<f64>; NUM_DIRECTIONS] = Default::default();
    for (d, dir) in ALL_DIRECTIONS.iter().enumerate() {
        outputs[d] = scan_direction(&bundle, *dir, &w.dirs[d], w.mode)?;
    }
    let mut merged = cross_merge(&outputs, &bundle)?;
    layer_norm_channels(&mut merged, &w.norm_scale, &w.norm_shift);

    let mut out = FeatureMap2D::zeros(f.height, f.width, c);
    for i in 0..f.height {
        for j in 0..f.width {
            let gate = dense(f.pixel(i, j), &w.gate_proj, &w.gate_bias, c, c);
            let base = merged.idx(i, j, 0);
            let gated: Vec<f64> = (0..c)
                .map(|ch| merged.data[base + ch] * silu(gate[ch]))
                .collect();
            let projected = dense(&gated, &w.out_proj, &w.out_bias, c, c);
            for (ch, v) in projected.iter().enumerate() {
                if !v.is_finite() {
                    return Err(CoreError::Numeric(format!(
                        "non-finite output at pixel ({i}, {j}), channel {ch}"
                    )));
                }
                out.set(i, j, ch, *v);
            }
        }
    }
    Ok(out)
}
