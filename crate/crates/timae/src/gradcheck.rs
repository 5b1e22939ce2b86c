//! Central finite-difference verification of autodiff gradients.
//!
//! Every differentiable op is checked by perturbing each input coordinate
//! by `±h` and comparing `(f(x+h) - f(x-h)) / 2h` against the gradient the
//! backward sweep produced. The numeric side only ever runs the forward
//! path, so it stays independent of the backward rules it verifies.
//! Checks run in `f64`; central differences are unreliable in `f32`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::Tensor;

/// Default step for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Outcome of one finite-difference comparison.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub tolerance: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Compares autodiff gradients of `f` (a scalar-valued function of a
/// single input tensor) against central finite differences.
///
/// The relative error is `|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)`, so
/// near-zero gradients are compared absolutely.
pub fn check_scalar_fn<F>(
    name: &str,
    x0: &[f64],
    shape: &[usize],
    tolerance: f64,
    f: F,
) -> Result<GradCheck>
where
    F: Fn(&Tensor<f64>) -> Result<Tensor<f64>>,
{
    let x = Tensor::param(x0.to_vec(), shape)?;
    let loss = f(&x)?;
    loss.backward()?;
    let g_ad = x.grad().expect("gradient populated after backward");

    let mut max_rel = 0.0f64;
    let mut probe = x0.to_vec();
    for i in 0..probe.len() {
        let orig = probe[i];
        probe[i] = orig + FD_STEP;
        let f_plus = f(&Tensor::constant(probe.clone(), shape)?)?.item();
        probe[i] = orig - FD_STEP;
        let f_minus = f(&Tensor::constant(probe.clone(), shape)?)?.item();
        probe[i] = orig;
        let g_fd = (f_plus - f_minus) / (2.0 * FD_STEP);
        let denom = 1.0f64.max(g_ad[i].abs()).max(g_fd.abs());
        let rel = (g_ad[i] - g_fd).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
        }
    }
    Ok(GradCheck {
        name: name.to_string(),
        max_rel_err: max_rel,
        tolerance,
    })
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Runs the op-level finite-difference suite: `trials` random small
/// inputs per differentiable op, each checked to `tolerance`.
pub fn op_suite(seed: u64, trials: usize, tolerance: f64) -> Result<Vec<GradCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();

    for trial in 0..trials {
        let r = &mut rng;

        // matmul: loss = sum(A.B), checking dA with B fixed (and vice versa)
        let b_fix = Tensor::constant(uniform(r, 6, -1.0, 1.0), &[3, 2])?;
        results.push(check_scalar_fn(
            &format!("matmul.lhs[{trial}]"),
            &uniform(r, 6, -1.0, 1.0),
            &[2, 3],
            tolerance,
            |x| Ok(x.matmul(&b_fix)?.reduce_sum()),
        )?);
        let a_fix = Tensor::constant(uniform(r, 6, -1.0, 1.0), &[2, 3])?;
        results.push(check_scalar_fn(
            &format!("matmul.rhs[{trial}]"),
            &uniform(r, 6, -1.0, 1.0),
            &[3, 2],
            tolerance,
            |x| Ok(a_fix.matmul(x)?.reduce_sum()),
        )?);

        // batched matmul with a batched rhs
        let b3 = Tensor::constant(uniform(r, 12, -1.0, 1.0), &[2, 3, 2])?;
        results.push(check_scalar_fn(
            &format!("matmul.batched[{trial}]"),
            &uniform(r, 12, -1.0, 1.0),
            &[2, 2, 3],
            tolerance,
            |x| Ok(x.matmul(&b3)?.mul(&x.matmul(&b3)?)?.reduce_mean()),
        )?);

        // matmul_nt
        let bt = Tensor::constant(uniform(r, 8, -1.0, 1.0), &[1, 4, 2])?;
        results.push(check_scalar_fn(
            &format!("matmul_nt[{trial}]"),
            &uniform(r, 6, -1.0, 1.0),
            &[1, 3, 2],
            tolerance,
            |x| Ok(x.matmul_nt(&bt)?.reduce_sum()),
        )?);

        // softmax composed with a weighting so every coordinate matters
        let w = Tensor::constant(uniform(r, 5, -1.0, 1.0), &[5])?;
        results.push(check_scalar_fn(
            &format!("softmax[{trial}]"),
            &uniform(r, 5, -2.0, 2.0),
            &[5],
            tolerance,
            |x| Ok(x.softmax(0)?.mul(&w)?.reduce_sum()),
        )?);

        // layer_norm wrt input, gamma and beta
        let gamma = Tensor::constant(uniform(r, 4, 0.5, 1.5), &[4])?;
        let beta = Tensor::constant(uniform(r, 4, -0.5, 0.5), &[4])?;
        let wln = Tensor::constant(uniform(r, 8, -1.0, 1.0), &[2, 4])?;
        results.push(check_scalar_fn(
            &format!("layer_norm.x[{trial}]"),
            &uniform(r, 8, -1.0, 1.0),
            &[2, 4],
            tolerance,
            |x| Ok(x.layer_norm(&gamma, &beta, 1e-5)?.mul(&wln)?.reduce_sum()),
        )?);
        let xln = Tensor::constant(uniform(r, 8, -1.0, 1.0), &[2, 4])?;
        results.push(check_scalar_fn(
            &format!("layer_norm.gamma[{trial}]"),
            &uniform(r, 4, 0.5, 1.5),
            &[4],
            tolerance,
            |g| Ok(xln.layer_norm(g, &beta, 1e-5)?.mul(&wln)?.reduce_sum()),
        )?);
        results.push(check_scalar_fn(
            &format!("layer_norm.beta[{trial}]"),
            &uniform(r, 4, -0.5, 0.5),
            &[4],
            tolerance,
            |b| Ok(xln.layer_norm(&gamma, b, 1e-5)?.mul(&wln)?.reduce_sum()),
        )?);

        // conv1d wrt input, kernel and bias
        let kern = Tensor::constant(uniform(r, 3 * 2 * 2, -1.0, 1.0), &[3, 2, 2])?;
        let bias = Tensor::constant(uniform(r, 2, -0.5, 0.5), &[2])?;
        results.push(check_scalar_fn(
            &format!("conv1d.x[{trial}]"),
            &uniform(r, 5 * 2, -1.0, 1.0),
            &[1, 5, 2],
            tolerance,
            |x| Ok(x.conv1d(&kern, &bias, 1, 1)?.mul(&x.conv1d(&kern, &bias, 1, 1)?)?.reduce_mean()),
        )?);
        let xc = Tensor::constant(uniform(r, 5 * 2, -1.0, 1.0), &[1, 5, 2])?;
        results.push(check_scalar_fn(
            &format!("conv1d.kernel[{trial}]"),
            &uniform(r, 3 * 2 * 2, -1.0, 1.0),
            &[3, 2, 2],
            tolerance,
            |k| Ok(xc.conv1d(k, &bias, 1, 1)?.reduce_sum()),
        )?);
        results.push(check_scalar_fn(
            &format!("conv1d.bias[{trial}]"),
            &uniform(r, 2, -0.5, 0.5),
            &[2],
            tolerance,
            |b| Ok(xc.conv1d(&kern, b, 1, 1)?.mul(&xc.conv1d(&kern, b, 1, 1)?)?.reduce_sum()),
        )?);

        // elementwise and shape ops
        let other = Tensor::constant(uniform(r, 6, -1.0, 1.0), &[2, 3])?;
        results.push(check_scalar_fn(
            &format!("add.mul.sub[{trial}]"),
            &uniform(r, 6, -1.0, 1.0),
            &[2, 3],
            tolerance,
            |x| Ok(x.add(&other)?.mul(x)?.sub(&other)?.reduce_mean()),
        )?);
        let bias_b = Tensor::constant(uniform(r, 3, -1.0, 1.0), &[3])?;
        results.push(check_scalar_fn(
            &format!("broadcast_add[{trial}]"),
            &uniform(r, 3, -1.0, 1.0),
            &[3],
            tolerance,
            |b| {
                let x = Tensor::constant(vec![0.5; 6], &[2, 3])?;
                Ok(x.add(b)?.mul(&x.add(&bias_b)?)?.reduce_sum())
            },
        )?);
        results.push(check_scalar_fn(
            &format!("gelu[{trial}]"),
            &uniform(r, 6, -2.0, 2.0),
            &[6],
            tolerance,
            |x| Ok(x.gelu().mul(&x.gelu())?.reduce_mean()),
        )?);
        // relu has a kink at zero; keep probes away from it
        results.push(check_scalar_fn(
            &format!("relu[{trial}]"),
            &uniform(r, 6, 0.1, 2.0),
            &[6],
            tolerance,
            |x| Ok(x.relu().reduce_sum()),
        )?);
        results.push(check_scalar_fn(
            &format!("scale.reshape.transpose[{trial}]"),
            &uniform(r, 6, -1.0, 1.0),
            &[2, 3],
            tolerance,
            |x| {
                Ok(x.scale(1.7)
                    .transpose(0, 1)?
                    .reshape(&[6])?
                    .mul(&x.reshape(&[6])?)?
                    .reduce_sum())
            },
        )?);
        results.push(check_scalar_fn(
            &format!("gather_scatter[{trial}]"),
            &uniform(r, 8, -1.0, 1.0),
            &[4, 2],
            tolerance,
            |x| {
                let picked = x.gather_rows(0, &[1, 3])?;
                let spread = picked.scatter_rows(0, &[0, 2], 5)?;
                Ok(spread.mul(&spread)?.reduce_mean())
            },
        )?);
        results.push(check_scalar_fn(
            &format!("concat[{trial}]"),
            &uniform(r, 4, -1.0, 1.0),
            &[2, 2],
            tolerance,
            |x| {
                let y = Tensor::concat(&[x.clone(), x.scale(2.0)], 0)?;
                Ok(y.mul(&y)?.reduce_sum())
            },
        )?);
        results.push(check_scalar_fn(
            &format!("broadcast_suffix[{trial}]"),
            &uniform(r, 3, -1.0, 1.0),
            &[3],
            tolerance,
            |x| {
                let y = x.broadcast_suffix(&[4]);
                Ok(y.mul(&y)?.reduce_sum())
            },
        )?);
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_suite_passes_at_spec_tolerance() {
        let results = op_suite(42, 20, 1e-4).unwrap();
        for r in &results {
            assert!(
                r.passed(),
                "{} failed: rel err {} >= {}",
                r.name,
                r.max_rel_err,
                r.tolerance
            );
        }
        // 20 trials of every differentiable op
        assert!(results.len() >= 20 * 18);
    }

    #[test]
    fn analytic_square_gradient() {
        let check = check_scalar_fn("square", &[1.0, 2.0], &[2], 1e-6, |x| {
            Ok(x.mul(x)?.reduce_sum())
        })
        .unwrap();
        assert!(check.passed());
    }
}
