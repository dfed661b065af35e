//! Central finite-difference verification of [`scan_backward`].
//!
//! The scalar objective is `L = sum_t sum_c grad_y[t,c] * y[t,c]`, whose
//! exact gradient is what `scan_backward` returns. The oracle here only ever
//! calls the sequential forward scan.

use alloc::{string::String, vec::Vec};

use super::{scan_backward, scan_sequential, ScanSequence, SelectiveParams};
use crate::error::Result;

/// Worst observed deviation for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: &'static str,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub per_tensor: Vec<TensorCheck>,
    pub max_rel_err: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

fn objective(
    seq: &ScanSequence,
    p: &SelectiveParams,
    h_init: &[f64],
    grad_y: &[f64],
) -> Result<f64> {
    let out = scan_sequential(seq, p, Some(h_init))?;
    Ok(out.y.iter().zip(grad_y).map(|(y, g)| y * g).sum())
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1.0);
    (analytic - numeric).abs() / denom
}

/// Compares `scan_backward` against central differences with step `eps` on
/// every parameter tensor, the input, and the initial state.
pub fn gradcheck(
    seq: &ScanSequence,
    p: &SelectiveParams,
    h_init: &[f64],
    grad_y: &[f64],
    eps: f64,
) -> Result<GradCheckReport> {
    let analytic = scan_backward(seq, p, Some(h_init), grad_y)?;

    let mut seq = seq.clone();
    let mut p = p.clone();
    let mut h0 = h_init.to_vec();

    let mut per_tensor: Vec<TensorCheck> = Vec::new();
    let mut record = |name: &'static str, worst: f64| {
        per_tensor.push(TensorCheck {
            name,
            max_rel_err: worst,
        });
    };

    macro_rules! check_tensor {
        ($name:literal, $field:expr, $grad:expr) => {{
            let mut worst: f64 = 0.0;
            for k in 0..$grad.len() {
                let orig = $field[k];
                $field[k] = orig + eps;
                let up = objective(&seq, &p, &h0, grad_y)?;
                $field[k] = orig - eps;
                let down = objective(&seq, &p, &h0, grad_y)?;
                $field[k] = orig;
                let numeric = (up - down) / (2.0 * eps);
                worst = worst.max(rel_err($grad[k], numeric));
            }
            record($name, worst);
        }};
    }

    check_tensor!("x", seq.x, analytic.x);
    check_tensor!("a_diag", p.a_diag, analytic.a_diag);
    check_tensor!("w_delta", p.w_delta, analytic.w_delta);
    check_tensor!("b_delta", p.b_delta, analytic.b_delta);
    check_tensor!("w_b", p.w_b, analytic.w_b);
    check_tensor!("w_c", p.w_c, analytic.w_c);
    check_tensor!("b_bias", p.b_bias, analytic.b_bias);
    check_tensor!("c_bias", p.c_bias, analytic.c_bias);
    check_tensor!("d_skip", p.d_skip, analytic.d_skip);
    check_tensor!("h_init", h0, analytic.h_init);

    let max_rel_err = per_tensor
        .iter()
        .map(|t| t.max_rel_err)
        .fold(0.0f64, f64::max);
    Ok(GradCheckReport {
        per_tensor,
        max_rel_err,
    })
}

/// Formats a report as one line per tensor, for CLI output.
pub fn format_report(r: &GradCheckReport) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    for t in &r.per_tensor {
        let _ = writeln!(s, "  {:<8} max_rel_err = {:.3e}", t.name, t.max_rel_err);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..10 {
            let c = rng.gen_range(1..4usize);
            let n = rng.gen_range(1..5usize);
            let l = rng.gen_range(1..9usize);
            let mut p = SelectiveParams::seeded(c, n, &mut rng);
            for d in p.d_skip.iter_mut() {
                *d = rng.gen_range(-0.5..0.5);
            }
            for v in p.b_bias.iter_mut().chain(p.c_bias.iter_mut()) {
                *v = rng.gen_range(-0.5..0.5);
            }
            let x: Vec<f64> = (0..l * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let seq = ScanSequence::new(l, c, x).unwrap();
            let h0: Vec<f64> = (0..c * n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let gy: Vec<f64> = (0..l * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let report = gradcheck(&seq, &p, &h0, &gy, 1e-5).unwrap();
            assert!(
                report.passes(1e-5),
                "trial {trial}: max rel err {}\n{}",
                report.max_rel_err,
                format_report(&report)
            );
        }
    }
}
