//! Tensor-archive layout for model weights.
//!
//! Naming scheme:
//! - selective scan parameters under a prefix: `{p}a_diag`, `{p}w_delta`,
//!   `{p}b_delta`, `{p}w_b`, `{p}w_c`, `{p}b_bias`, `{p}c_bias`, `{p}d_skip`
//!   (the biases are optional on read and default to zero);
//! - a ConvSS2D block under a prefix: `{p}dir{0..3}.*` (selective parameters
//!   per direction), `{p}dwconv`, `{p}dwconv_bias`, `{p}gate`, `{p}gate_bias`,
//!   `{p}out`, `{p}out_bias`, `{p}norm`, `{p}norm_shift`, `{p}mode`;
//! - learned feature extractor: `feat.conv1`, `feat.bias1`, `feat.conv2`,
//!   `feat.bias2`;
//! - refinement operator: `refine.*` with its block under `refine.ss2d.`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ssa2_core::features::{ExtractorConfig, ExtractorMode, LearnedWeights};
use ssa2_core::refine::{RefineWeights, UpdateWeights};
use ssa2_core::scan2d::{ConvSS2DWeights, ScanMode};
use ssa2_core::ssm::SelectiveParams;

use crate::archive::{Tensor, TensorArchive};
use crate::{IoError, Result};

fn put(a: &mut TensorArchive, name: &str, dims: Vec<u32>, data: &[f64]) -> Result<()> {
    a.insert(name, Tensor::from_f64(dims, data)?)
}

fn get(a: &TensorArchive, name: &str, expect: usize) -> Result<Vec<f64>> {
    let t = a.require(name)?;
    if t.data.len() != expect {
        return Err(IoError::Format(format!(
            "tensor {name} holds {} values, expected {expect}",
            t.data.len()
        )));
    }
    Ok(t.to_f64())
}

pub fn put_selective(a: &mut TensorArchive, prefix: &str, p: &SelectiveParams) -> Result<()> {
    let (c, n) = (p.channels as u32, p.d_state as u32);
    put(a, &format!("{prefix}a_diag"), vec![c, n], &p.a_diag)?;
    put(a, &format!("{prefix}w_delta"), vec![c, c], &p.w_delta)?;
    put(a, &format!("{prefix}b_delta"), vec![c], &p.b_delta)?;
    put(a, &format!("{prefix}w_b"), vec![n, c], &p.w_b)?;
    put(a, &format!("{prefix}w_c"), vec![n, c], &p.w_c)?;
    put(a, &format!("{prefix}b_bias"), vec![n], &p.b_bias)?;
    put(a, &format!("{prefix}c_bias"), vec![n], &p.c_bias)?;
    put(a, &format!("{prefix}d_skip"), vec![c], &p.d_skip)
}

pub fn get_selective(a: &TensorArchive, prefix: &str) -> Result<SelectiveParams> {
    let t = a.require(&format!("{prefix}a_diag"))?;
    if t.dims.len() != 2 {
        return Err(IoError::Format(format!(
            "{prefix}a_diag must be rank 2, got rank {}",
            t.dims.len()
        )));
    }
    let (c, n) = (t.dims[0] as usize, t.dims[1] as usize);
    let mut p = SelectiveParams::new(c, n);
    p.a_diag = t.to_f64();
    p.w_delta = get(a, &format!("{prefix}w_delta"), c * c)?;
    p.b_delta = get(a, &format!("{prefix}b_delta"), c)?;
    p.w_b = get(a, &format!("{prefix}w_b"), n * c)?;
    p.w_c = get(a, &format!("{prefix}w_c"), n * c)?;
    if a.get(&format!("{prefix}b_bias")).is_some() {
        p.b_bias = get(a, &format!("{prefix}b_bias"), n)?;
    }
    if a.get(&format!("{prefix}c_bias")).is_some() {
        p.c_bias = get(a, &format!("{prefix}c_bias"), n)?;
    }
    p.d_skip = get(a, &format!("{prefix}d_skip"), c)?;
    p.validate()?;
    Ok(p)
}

pub fn put_convss2d(a: &mut TensorArchive, prefix: &str, w: &ConvSS2DWeights) -> Result<()> {
    let c = w.channels as u32;
    for (i, dir) in w.dirs.iter().enumerate() {
        put_selective(a, &format!("{prefix}dir{i}."), dir)?;
    }
    put(a, &format!("{prefix}dwconv"), vec![c, 3, 3], &w.dw_conv)?;
    put(a, &format!("{prefix}dwconv_bias"), vec![c], &w.dw_bias)?;
    put(a, &format!("{prefix}gate"), vec![c, c], &w.gate_proj)?;
    put(a, &format!("{prefix}gate_bias"), vec![c], &w.gate_bias)?;
    put(a, &format!("{prefix}out"), vec![c, c], &w.out_proj)?;
    put(a, &format!("{prefix}out_bias"), vec![c], &w.out_bias)?;
    put(a, &format!("{prefix}norm"), vec![c], &w.norm_scale)?;
    put(a, &format!("{prefix}norm_shift"), vec![c], &w.norm_shift)?;
    let mode = match w.mode {
        ScanMode::ResetPerLine => 0.0,
        ScanMode::FullSequence => 1.0,
    };
    put(a, &format!("{prefix}mode"), vec![1], &[mode])
}

pub fn get_convss2d(a: &TensorArchive, prefix: &str) -> Result<ConvSS2DWeights> {
    let dir0 = get_selective(a, &format!("{prefix}dir0."))?;
    let (c, n) = (dir0.channels, dir0.d_state);
    let mut w = ConvSS2DWeights::new(c, n);
    w.dirs = [
        dir0,
        get_selective(a, &format!("{prefix}dir1."))?,
        get_selective(a, &format!("{prefix}dir2."))?,
        get_selective(a, &format!("{prefix}dir3."))?,
    ];
    w.dw_conv = get(a, &format!("{prefix}dwconv"), c * 9)?;
    w.dw_bias = get(a, &format!("{prefix}dwconv_bias"), c)?;
    w.gate_proj = get(a, &format!("{prefix}gate"), c * c)?;
    w.gate_bias = get(a, &format!("{prefix}gate_bias"), c)?;
    w.out_proj = get(a, &format!("{prefix}out"), c * c)?;
    w.out_bias = get(a, &format!("{prefix}out_bias"), c)?;
    w.norm_scale = get(a, &format!("{prefix}norm"), c)?;
    w.norm_shift = get(a, &format!("{prefix}norm_shift"), c)?;
    w.mode = match get(a, &format!("{prefix}mode"), 1)?[0] {
        x if x == 0.0 => ScanMode::ResetPerLine,
        x if x == 1.0 => ScanMode::FullSequence,
        x => return Err(IoError::Format(format!("unknown scan mode tag {x}"))),
    };
    w.validate()?;
    Ok(w)
}

/// Seeds are stored as four u16 chunks so they survive the f32 payload
/// without rounding.
fn seed_to_f64(seed: u64) -> [f64; 4] {
    [
        (seed & 0xffff) as f64,
        ((seed >> 16) & 0xffff) as f64,
        ((seed >> 32) & 0xffff) as f64,
        ((seed >> 48) & 0xffff) as f64,
    ]
}

fn seed_from_f64(v: &[f64]) -> u64 {
    (v[0] as u64) | ((v[1] as u64) << 16) | ((v[2] as u64) << 32) | ((v[3] as u64) << 48)
}

pub fn put_refine(a: &mut TensorArchive, w: &RefineWeights) -> Result<()> {
    let mode = match w.extractor.mode {
        ExtractorMode::Patch => 0.0,
        ExtractorMode::Learned => 1.0,
    };
    put(
        a,
        "refine.extractor",
        vec![3],
        &[
            mode,
            w.extractor.patch_window as f64,
            w.extractor.channels as f64,
        ],
    )?;
    put(a, "refine.extractor_seed", vec![4], &seed_to_f64(w.extractor.seed))?;
    if let Some(f) = &w.learned_feat {
        let c = f.channels as u32;
        put(a, "feat.conv1", vec![c, 3, 3, 3], &f.conv1)?;
        put(a, "feat.bias1", vec![c], &f.bias1)?;
        put(a, "feat.conv2", vec![c, c, 3, 3], &f.conv2)?;
        put(a, "feat.bias2", vec![c], &f.bias2)?;
    }
    let u = &w.update;
    let (cf, ch, cm) = (u.c_feat as u32, u.c_hidden as u32, u.c_motion as u32);
    let corr_in = (u.corr_channels() + 1) as u32;
    put(
        a,
        "refine.meta",
        vec![2],
        &[u.radius as f64, u.levels as f64],
    )?;
    put(a, "refine.init_proj", vec![ch, cf], &u.state_init_proj)?;
    put(a, "refine.init_bias", vec![ch], &u.state_init_bias)?;
    put(a, "refine.motion_conv1", vec![cm, corr_in, 3, 3], &u.motion_conv1)?;
    put(a, "refine.motion_bias1", vec![cm], &u.motion_bias1)?;
    put(a, "refine.motion_conv2", vec![cm, cm, 3, 3], &u.motion_conv2)?;
    put(a, "refine.motion_bias2", vec![cm], &u.motion_bias2)?;
    put(a, "refine.concat_proj", vec![ch, cm + ch], &u.concat_proj)?;
    put(a, "refine.concat_bias", vec![ch], &u.concat_bias)?;
    put_convss2d(a, "refine.ss2d.", &u.convss2d)?;
    put(a, "refine.hidden_head", vec![ch, ch], &u.hidden_head)?;
    put(a, "refine.hidden_head_bias", vec![ch], &u.hidden_head_bias)?;
    put(a, "refine.delta_head", vec![ch], &u.delta_head)?;
    put(a, "refine.delta_bias", vec![1], &[u.delta_bias])
}

pub fn get_refine(a: &TensorArchive) -> Result<RefineWeights> {
    let cfg = get(a, "refine.extractor", 3)?;
    let extractor = ExtractorConfig {
        mode: match cfg[0] {
            x if x == 0.0 => ExtractorMode::Patch,
            x if x == 1.0 => ExtractorMode::Learned,
            x => return Err(IoError::Format(format!("unknown extractor mode tag {x}"))),
        },
        patch_window: cfg[1] as usize,
        channels: cfg[2] as usize,
        seed: seed_from_f64(&get(a, "refine.extractor_seed", 4)?),
    };
    extractor.validate()?;
    let learned_feat = if extractor.mode == ExtractorMode::Learned {
        let c = extractor.channels;
        let mut f = LearnedWeights::seeded(c, 0);
        f.conv1 = get(a, "feat.conv1", c * 27)?;
        f.bias1 = get(a, "feat.bias1", c)?;
        f.conv2 = get(a, "feat.conv2", c * c * 9)?;
        f.bias2 = get(a, "feat.bias2", c)?;
        Some(f)
    } else {
        None
    };

    let ip = a.require("refine.init_proj")?;
    if ip.dims.len() != 2 {
        return Err(IoError::Format("refine.init_proj must be rank 2".into()));
    }
    let (ch, cf) = (ip.dims[0] as usize, ip.dims[1] as usize);
    let mc = a.require("refine.motion_conv1")?;
    if mc.dims.len() != 4 {
        return Err(IoError::Format("refine.motion_conv1 must be rank 4".into()));
    }
    let cm = mc.dims[0] as usize;
    let ss2d = get_convss2d(a, "refine.ss2d.")?;
    let mut u = UpdateWeights::new(cf, ch, cm, ss2d.dirs[0].d_state);
    let meta = get(a, "refine.meta", 2)?;
    u.radius = meta[0] as usize;
    u.levels = meta[1] as usize;
    let corr_in = u.corr_channels() + 1;
    u.state_init_proj = ip.to_f64();
    u.state_init_bias = get(a, "refine.init_bias", ch)?;
    u.motion_conv1 = get(a, "refine.motion_conv1", cm * corr_in * 9)?;
    u.motion_bias1 = get(a, "refine.motion_bias1", cm)?;
    u.motion_conv2 = get(a, "refine.motion_conv2", cm * cm * 9)?;
    u.motion_bias2 = get(a, "refine.motion_bias2", cm)?;
    u.concat_proj = get(a, "refine.concat_proj", ch * (cm + ch))?;
    u.concat_bias = get(a, "refine.concat_bias", ch)?;
    u.convss2d = ss2d;
    u.hidden_head = get(a, "refine.hidden_head", ch * ch)?;
    u.hidden_head_bias = get(a, "refine.hidden_head_bias", ch)?;
    u.delta_head = get(a, "refine.delta_head", ch)?;
    u.delta_bias = get(a, "refine.delta_bias", 1)?[0];
    Ok(RefineWeights {
        extractor,
        learned_feat,
        update: u,
    })
}

/// Default-sized seeded weights for inference without a checkpoint.
pub fn seeded_refine_weights(extractor: ExtractorConfig, seed: u64) -> Result<RefineWeights> {
    extractor.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c_feat = extractor.feature_dim();
    let learned_feat = match extractor.mode {
        ExtractorMode::Learned => Some(LearnedWeights::seeded(extractor.channels, extractor.seed)),
        ExtractorMode::Patch => None,
    };
    let update = UpdateWeights::seeded(
        c_feat,
        16,
        16,
        ssa2_core::config::DEFAULT_D_STATE,
        &mut rng,
    );
    Ok(RefineWeights {
        extractor,
        learned_feat,
        update,
    })
}
