//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 assertion or tolerance failure, 2 usage or
//! configuration error, 3 I/O error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssa2::archive::{Tensor, TensorArchive};
use ssa2::dataset::{dataset_emit, DatasetOptions};
use ssa2::pfm::PfmImage;
use ssa2::report::{to_json, to_table, NamedReport};
use ssa2::weights::{get_refine, put_refine, seeded_refine_weights};
use ssa2::{ppm, IoError};

use ssa2_core::config::Defaults;
use ssa2_core::corr::{build_correlation, build_pyramid, wta_disparity};
use ssa2_core::features::ExtractorConfig;
use ssa2_core::metrics::{aggregate, compute_metrics, disparity_to_depth};
use ssa2_core::refine::{
    run_refinement, upsample_x4, RefineMode, RefineOptions, RefineWeights,
};
use ssa2_core::ssm::gradcheck::{format_report, gradcheck};
use ssa2_core::ssm::{
    causal_convolve, discretize, lti_kernel, scan_parallel, scan_sequential, ScanSequence,
    SelectiveParams,
};
use ssa2_core::synth::{render_stereo, single_plane_scene, CameraRig};
use ssa2_core::{CoreError, DisparityMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Learned,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScanImpl {
    Seq,
    Par,
    Kernel,
}

#[derive(Parser, Debug)]
#[command(name = "ssa2", about = "Selective state-space stereo toolkit")]
struct Cli {
    /// Master seed for every pseudo-random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Storage precision; accumulation is always double.
    #[arg(long, global = true, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    /// Worker threads, 0 = auto (env fallback SSA2_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Emit a synthetic stereo dataset.
    Synth {
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 240)]
        height: usize,
        #[arg(long, default_value_t = 400.0)]
        focal: f64,
        /// Rig baselines in meters; repeat to give a candidate set.
        #[arg(long)]
        baseline: Vec<f64>,
        #[arg(long, action = ArgAction::SetTrue)]
        underwater: bool,
        /// Snap layer disparities to integers.
        #[arg(long, default_value_t = true, action = ArgAction::Set)]
        integer_disp: bool,
    },
    /// Refine a disparity map for one stereo pair.
    Infer {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Weight archive; a seeded initialization is used when absent.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long, default_value_t = ssa2_core::config::DEFAULT_INFER_ITERS)]
        iters: usize,
        /// Full-resolution PFM used to initialize the disparity state.
        #[arg(long)]
        mono_init: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Mode::Learned)]
        mode: Mode,
        /// Directory receiving quarter-resolution iterates as {t}.pfm.
        #[arg(long)]
        dump_iters: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate predicted disparities against ground truth in depth space.
    Eval {
        #[arg(long)]
        pred_dir: PathBuf,
        #[arg(long)]
        gt_dir: PathBuf,
        #[arg(long, default_value_t = 400.0)]
        focal: f64,
        #[arg(long, default_value_t = 0.3)]
        baseline: f64,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Verify the analytic scan gradient against central differences.
    Gradcheck {
        /// Number of random configurations.
        #[arg(long, default_value_t = 50)]
        shapes: usize,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Time the scan implementations over a range of sequence lengths.
    BenchScan {
        /// Sequence lengths; default 2^10 .. 2^20.
        #[arg(long, value_delimiter = ',')]
        lengths: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        #[arg(long = "impl", value_enum, default_value_t = ScanImpl::Par)]
        implementation: ScanImpl,
    },
    /// Run the built-in invariant suite.
    Selftest,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap prints its own help/version output with code 0
            let code = if e.exit_code() == 0 { 0 } else { 2 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let threads = cli.threads.unwrap_or_else(|| {
        std::env::var("SSA2_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(0)
    });
    let _ = threads; // single worker in this build; kept for interface stability
    std::process::exit(run(cli));
}

fn code_for(e: &IoError) -> i32 {
    match e {
        IoError::File { .. } => 3,
        IoError::Format(_) => 3,
        IoError::Json(_) => 3,
        IoError::Core(CoreError::Config(_)) => 2,
        IoError::Core(_) => 1,
    }
}

fn run(cli: Cli) -> i32 {
    let result = match cli.cmd {
        Cmd::Synth {
            n,
            out,
            width,
            height,
            focal,
            baseline,
            underwater,
            integer_disp,
        } => cmd_synth(
            n,
            &out,
            width,
            height,
            focal,
            baseline,
            underwater,
            integer_disp,
            cli.seed,
        ),
        Cmd::Infer {
            left,
            right,
            weights,
            iters,
            mono_init,
            mode,
            dump_iters,
            out,
        } => cmd_infer(
            &left,
            &right,
            weights.as_deref(),
            iters,
            mono_init.as_deref(),
            mode,
            dump_iters.as_deref(),
            &out,
            cli.seed,
            cli.precision,
        ),
        Cmd::Eval {
            pred_dir,
            gt_dir,
            focal,
            baseline,
            format,
        } => cmd_eval(&pred_dir, &gt_dir, focal, baseline, format),
        Cmd::Gradcheck { shapes, eps, tol } => return cmd_gradcheck(shapes, eps, tol, cli.seed),
        Cmd::BenchScan {
            lengths,
            repeat,
            implementation,
        } => return cmd_bench_scan(&lengths, repeat, implementation, cli.seed),
        Cmd::Selftest => return cmd_selftest(),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            code_for(&e)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    n: usize,
    out: &Path,
    width: usize,
    height: usize,
    focal: f64,
    baselines: Vec<f64>,
    underwater: bool,
    integer_disp: bool,
    seed: u64,
) -> ssa2::Result<()> {
    let opts = DatasetOptions {
        width,
        height,
        focal_px: focal,
        baselines: if baselines.is_empty() {
            DatasetOptions::default().baselines
        } else {
            baselines
        },
        underwater,
        integer_disp,
    };
    for b in &opts.baselines {
        if !(*b > 0.0) {
            return Err(IoError::Core(CoreError::Config(format!(
                "baseline must be positive, got {b}"
            ))));
        }
    }
    let manifest = dataset_emit(n, out, &opts, seed)?;
    println!(
        "wrote {} scenes to {} (manifest.json included)",
        manifest.scenes.len(),
        out.display()
    );
    Ok(())
}

/// 4x4 mean pooling of a full-resolution disparity, divided by 4 to move it
/// into quarter-resolution units.
fn quarter_disparity(full: &DisparityMap) -> ssa2::Result<DisparityMap> {
    if full.height % 4 != 0 || full.width % 4 != 0 {
        return Err(IoError::Core(CoreError::Shape(format!(
            "monocular init {}x{} must be divisible by 4",
            full.height, full.width
        ))));
    }
    let (qh, qw) = (full.height / 4, full.width / 4);
    let mut out = DisparityMap::zeros(qh, qw);
    for i in 0..qh {
        for j in 0..qw {
            let mut acc = 0.0;
            for di in 0..4 {
                for dj in 0..4 {
                    acc += full.get(4 * i + di, 4 * j + dj);
                }
            }
            out.set(i, j, acc / 64.0); // mean of 16, then / 4
        }
    }
    Ok(out)
}

fn quantize_f32(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = *x as f32 as f64;
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_infer(
    left: &Path,
    right: &Path,
    weights: Option<&Path>,
    iters: usize,
    mono_init: Option<&Path>,
    mode: Mode,
    dump_iters: Option<&Path>,
    out: &Path,
    seed: u64,
    precision: Precision,
) -> ssa2::Result<()> {
    let mut img_l = ppm::load(left)?;
    let mut img_r = ppm::load(right)?;
    if precision == Precision::F32 {
        quantize_f32(&mut img_l.data);
        quantize_f32(&mut img_r.data);
    }
    let w: RefineWeights = match weights {
        Some(p) => get_refine(&TensorArchive::load(p)?)?,
        None => seeded_refine_weights(ExtractorConfig::default(), seed)?,
    };
    let mono = match mono_init {
        Some(p) => Some(quarter_disparity(&PfmImage::load(p)?.to_disparity())?),
        None => None,
    };
    let opts = RefineOptions {
        iters,
        mode: match mode {
            Mode::Learned => RefineMode::Learned,
            Mode::Oracle => RefineMode::Oracle,
        },
        snapshots: dump_iters.is_some(),
    };
    let mut result = run_refinement(&img_l, &img_r, &w, mono.as_ref(), &opts)?;
    if precision == Precision::F32 {
        quantize_f32(&mut result.disparity.d);
    }
    if let Some(dir) = dump_iters {
        std::fs::create_dir_all(dir).map_err(|e| IoError::file(dir.display().to_string(), e))?;
        for (t, snap) in result.snapshots.iter().enumerate() {
            PfmImage::from_disparity(snap).save(dir.join(format!("{t}.pfm")))?;
        }
    }
    PfmImage::from_disparity(&result.disparity).save(out)?;
    println!(
        "wrote {} ({}x{}, {} iterations)",
        out.display(),
        result.disparity.width,
        result.disparity.height,
        iters
    );
    Ok(())
}

fn cmd_eval(
    pred_dir: &Path,
    gt_dir: &Path,
    focal: f64,
    baseline: f64,
    format: Format,
) -> ssa2::Result<()> {
    let rig = CameraRig::new(focal, baseline)?;
    let mut names: Vec<String> = std::fs::read_dir(pred_dir)
        .map_err(|e| IoError::file(pred_dir.display().to_string(), e))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().into_string().unwrap_or_default())
        .filter(|n| n.ends_with(".pfm") && !n.ends_with("_mask.pfm"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(IoError::Format(format!(
            "no .pfm predictions in {}",
            pred_dir.display()
        )));
    }
    let mut named = Vec::new();
    let mut plain = Vec::new();
    for name in &names {
        let pred = PfmImage::load(pred_dir.join(name))?.to_disparity();
        let gt = PfmImage::load(gt_dir.join(name))?.to_disparity();
        let mask_name = name.replace("_disp.pfm", "_mask.pfm");
        let mask_path = gt_dir.join(&mask_name);
        let ext_mask: Option<Vec<bool>> = if mask_name != *name && mask_path.exists() {
            Some(
                PfmImage::load(&mask_path)?
                    .data
                    .iter()
                    .map(|v| *v > 0.5)
                    .collect(),
            )
        } else {
            None
        };
        let zp = disparity_to_depth(&pred, &rig);
        let zg = disparity_to_depth(&gt, &rig);
        let mask: Vec<bool> = (0..zg.z.len())
            .map(|i| zp.valid[i] && zg.valid[i] && ext_mask.as_ref().map_or(true, |m| m[i]))
            .collect();
        let r = compute_metrics(&zp.z, &zg.z, &mask).map_err(IoError::Core)?;
        named.push(NamedReport::new(name.clone(), &r));
        plain.push(r);
    }
    if plain.len() > 1 {
        let all = aggregate(&plain).map_err(IoError::Core)?;
        named.push(NamedReport::new("all", &all));
    }
    match format {
        Format::Json => println!("{}", to_json(&named)?),
        Format::Table => print!("{}", to_table(&named)),
    }
    Ok(())
}

fn cmd_gradcheck(shapes: usize, eps: f64, tol: f64, seed: u64) -> i32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    for trial in 0..shapes {
        let c = rng.gen_range(1..4usize);
        let n = rng.gen_range(1..5usize);
        let l = rng.gen_range(1..9usize);
        let mut p = SelectiveParams::seeded(c, n, &mut rng);
        for v in p
            .d_skip
            .iter_mut()
            .chain(p.b_bias.iter_mut())
            .chain(p.c_bias.iter_mut())
        {
            *v = rng.gen_range(-0.5..0.5);
        }
        let x: Vec<f64> = (0..l * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let seq = ScanSequence::new(l, c, x).expect("valid shape");
        let h0: Vec<f64> = (0..c * n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let gy: Vec<f64> = (0..l * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        match gradcheck(&seq, &p, &h0, &gy, eps) {
            Ok(report) => {
                worst = worst.max(report.max_rel_err);
                let ok = report.passes(tol);
                if !ok {
                    failures += 1;
                    println!("config {trial} (L={l} C={c} N={n}): FAIL");
                    print!("{}", format_report(&report));
                }
            }
            Err(e) => {
                failures += 1;
                println!("config {trial}: error: {e}");
            }
        }
    }
    println!(
        "gradcheck: {}/{} configs within tol {tol:.1e} (worst rel err {worst:.3e})",
        shapes - failures,
        shapes
    );
    if failures == 0 {
        0
    } else {
        1
    }
}

fn bench_once(implementation: ScanImpl, seq: &ScanSequence, p: &SelectiveParams) -> f64 {
    let start = Instant::now();
    match implementation {
        ScanImpl::Seq => {
            scan_sequential(seq, p, None).expect("scan");
        }
        ScanImpl::Par => {
            scan_parallel(seq, p, None).expect("scan");
        }
        ScanImpl::Kernel => {
            // LTI route: fixed-length kernel per channel, causal convolution
            let (c, n) = (p.channels, p.d_state);
            for ch in 0..c {
                let delta = ssa2_core::ssm::softplus(p.b_delta[ch]);
                let mut a_bar = vec![0.0; n];
                let mut b_bar = vec![0.0; n];
                for s in 0..n {
                    let (ab, bb) =
                        discretize(delta, p.a_diag[ch * n + s], 1.0).expect("discretize");
                    a_bar[s] = ab;
                    b_bar[s] = bb;
                }
                let k = lti_kernel(&a_bar, &b_bar, &vec![1.0; n], 64).expect("kernel");
                let x: Vec<f64> = (0..seq.len).map(|t| seq.x[t * c + ch]).collect();
                let _ = causal_convolve(&x, &k);
            }
        }
    }
    start.elapsed().as_secs_f64()
}

fn cmd_bench_scan(lengths: &[usize], repeat: usize, implementation: ScanImpl, seed: u64) -> i32 {
    let lengths: Vec<usize> = if lengths.is_empty() {
        (10..=20).map(|e| 1usize << e).collect()
    } else {
        lengths.to_vec()
    };
    if repeat == 0 || lengths.iter().any(|l| *l < 2) {
        eprintln!("error: repeat must be >= 1 and lengths >= 2");
        return 2;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, n) = (4usize, 4usize);
    let p = SelectiveParams::seeded(c, n, &mut rng);
    let mut medians = Vec::new();
    for &l in &lengths {
        let x: Vec<f64> = (0..l * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let seq = ScanSequence::new(l, c, x).expect("valid shape");
        let mut times: Vec<f64> = (0..repeat)
            .map(|_| bench_once(implementation, &seq, &p))
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = times[times.len() / 2];
        println!("L = {l:>8}  median {:.6} s", median);
        medians.push(median);
    }
    if lengths.len() >= 2 {
        // least-squares slope of ln(time) against ln(L)
        let xs: Vec<f64> = lengths.iter().map(|l| (*l as f64).ln()).collect();
        let ys: Vec<f64> = medians.iter().map(|t| t.max(1e-9).ln()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        println!("log-log slope: {:.3}", num / den);
    }
    0
}

const GOLDEN_PFM: &[u8] = include_bytes!("../golden/scalar_2p5.pfm");
const GOLDEN_ARCHIVE: &[u8] = include_bytes!("../golden/one.ssa2");

fn cmd_selftest() -> i32 {
    let mut all_ok = true;
    let mut check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        all_ok &= ok;
    };

    // scan equivalence over a handful of random configs
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut scan_ok = true;
    for _ in 0..20 {
        let c = rng.gen_range(1..5usize);
        let n = rng.gen_range(1..5usize);
        let l = rng.gen_range(1..200usize);
        let p = SelectiveParams::seeded(c, n, &mut rng);
        let x: Vec<f64> = (0..l * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let seq = ScanSequence::new(l, c, x).unwrap();
        let a = scan_sequential(&seq, &p, None).unwrap();
        let b = scan_parallel(&seq, &p, None).unwrap();
        let dev = a
            .y
            .iter()
            .zip(&b.y)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        scan_ok &= dev <= 1e-12;
    }
    check("scan parallel = sequential (1e-12)", scan_ok);

    // ZOH closed form
    let (a_bar, b_bar) = discretize(std::f64::consts::LN_2, -1.0, 1.0).unwrap();
    check(
        "zoh closed form a=-1, delta=ln 2",
        (a_bar - 0.5).abs() < 1e-15 && (b_bar - 0.5).abs() < 1e-15,
    );

    // LTI equivalence: constant parameters via biases only
    let mut lti_ok = true;
    for _ in 0..10 {
        let n = rng.gen_range(1..5usize);
        let l = rng.gen_range(2..100usize);
        let mut p = SelectiveParams::new(1, n);
        for s in 0..n {
            p.a_diag[s] = -rng.gen_range(0.1..2.0);
            p.b_bias[s] = rng.gen_range(-1.0..1.0);
            p.c_bias[s] = rng.gen_range(-1.0..1.0);
        }
        p.b_delta[0] = rng.gen_range(-1.0..1.0);
        p.d_skip[0] = rng.gen_range(-0.5..0.5);
        let x: Vec<f64> = (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let seq = ScanSequence::new(l, 1, x.clone()).unwrap();
        let y = scan_sequential(&seq, &p, None).unwrap().y;
        let delta = ssa2_core::ssm::softplus(p.b_delta[0]);
        let mut ab = vec![0.0; n];
        let mut bb = vec![0.0; n];
        for s in 0..n {
            let (u, v) = discretize(delta, p.a_diag[s], p.b_bias[s]).unwrap();
            ab[s] = u;
            bb[s] = v;
        }
        let k = lti_kernel(&ab, &bb, &p.c_bias, l).unwrap();
        let conv = causal_convolve(&x, &k);
        let dev = y
            .iter()
            .zip(conv.iter().zip(&x))
            .map(|(yv, (cv, xv))| (yv - (cv + p.d_skip[0] * xv)).abs())
            .fold(0.0f64, f64::max);
        lti_ok &= dev <= 1e-12;
    }
    check("lti kernel = recurrence (1e-12)", lti_ok);

    // correlation + WTA on a tiny synthetic plane
    let rig = CameraRig::new(400.0, 0.3).unwrap();
    let spec = single_plane_scene(320, 240, &rig, 16.0, 7);
    let scene = render_stereo(&spec, &rig, 7).unwrap();
    let cfg = ExtractorConfig::default();
    let fl = ssa2_core::features::extract(&scene.img_l, &cfg, None).unwrap();
    let fr = ssa2_core::features::extract(&scene.img_r, &cfg, None).unwrap();
    let vol = build_correlation(&fl, &fr).unwrap();
    let _ = build_pyramid(&vol);
    let wta = upsample_x4(&wta_disparity(&vol));
    let mut err_count = 0usize;
    let mut total = 0usize;
    for i in 0..scene.gt_disp.d.len() {
        if !scene.occluded[i] {
            total += 1;
            if (wta.d[i] - scene.gt_disp.d[i]).abs() > 0.5 {
                err_count += 1;
            }
        }
    }
    check(
        "wta on synthetic plane (99% within 0.5 px)",
        total > 0 && (err_count as f64) < 0.01 * total as f64,
    );

    // golden files
    let pfm_ok = match PfmImage::from_bytes(GOLDEN_PFM) {
        Ok(img) => {
            img.width == 1 && img.height == 1 && img.data == vec![2.5]
                && img.to_bytes() == GOLDEN_PFM
        }
        Err(_) => false,
    };
    check("golden pfm parses and re-encodes bitwise", pfm_ok);
    let arch_ok = match TensorArchive::from_bytes(GOLDEN_ARCHIVE) {
        Ok(a) => {
            a.get("one").map(|t| t.data == vec![1.0f32]).unwrap_or(false)
                && a.to_bytes() == GOLDEN_ARCHIVE
        }
        Err(_) => false,
    };
    check("golden archive parses and re-encodes bitwise", arch_ok);

    // weight archive round trip
    let w = seeded_refine_weights(ExtractorConfig::default(), 5).unwrap();
    let mut a = TensorArchive::new();
    put_refine(&mut a, &w).unwrap();
    let rt = TensorArchive::from_bytes(&a.to_bytes())
        .ok()
        .and_then(|b| get_refine(&b).ok())
        .map(|back| {
            let mut a2 = TensorArchive::new();
            put_refine(&mut a2, &back).unwrap();
            a2.to_bytes() == a.to_bytes()
        })
        .unwrap_or(false);
    check("weight archive round trip", rt);

    // random tensor archive round trip
    let mut arch = TensorArchive::new();
    for i in 0..10 {
        let len = rng.gen_range(1..64usize);
        let data: Vec<f32> = (0..len).map(|_| rng.gen_range(-1e3f32..1e3)).collect();
        arch.insert(&format!("t{i}"), Tensor::new(vec![len as u32], data).unwrap())
            .unwrap();
    }
    check(
        "tensor archive random round trip",
        TensorArchive::from_bytes(&arch.to_bytes())
            .map(|b| b == arch)
            .unwrap_or(false),
    );

    // default configuration echo
    let d = Defaults::default();
    check(
        "defaults: d_state 4, ssm_ratio 1.0, iters 32, directions 4",
        d.d_state == 4 && d.ssm_ratio == 1.0 && d.infer_iters == 32 && d.scan_directions == 4,
    );

    if all_ok {
        0
    } else {
        1
    }
}
