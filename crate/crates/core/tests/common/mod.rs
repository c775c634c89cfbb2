//! Independent oracles shared by the integration tests. Nothing here calls
//! the code path it is used to check.

#![allow(dead_code)]

use mimic_core::motion::{KeyframeMovement, KeyframeStep};
use mimic_core::network::{mse_loss, Activation, MimicNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for (offset, row) in lower.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Natural cubic spline coefficients `[a, b, c, d]` per segment, from the
/// full 4(n−1) unknown system: interpolation at both segment ends, C¹ and C²
/// at interior knots, zero second derivative at both ends.
pub fn dense_natural_spline(knots: &[(f64, f64)]) -> Vec<[f64; 4]> {
    let segs = knots.len() - 1;
    let size = 4 * segs;
    let mut a = vec![vec![0.0; size]; size];
    let mut b = vec![0.0; size];
    let mut row = 0;
    let h = |i: usize| knots[i + 1].0 - knots[i].0;
    for i in 0..segs {
        let c = 4 * i;
        a[row][c] = 1.0;
        b[row] = knots[i].1;
        row += 1;
        let hi = h(i);
        a[row][c] = 1.0;
        a[row][c + 1] = hi;
        a[row][c + 2] = hi * hi;
        a[row][c + 3] = hi * hi * hi;
        b[row] = knots[i + 1].1;
        row += 1;
    }
    for i in 0..segs - 1 {
        let (c, n) = (4 * i, 4 * (i + 1));
        let hi = h(i);
        // velocity continuity
        a[row][c + 1] = 1.0;
        a[row][c + 2] = 2.0 * hi;
        a[row][c + 3] = 3.0 * hi * hi;
        a[row][n + 1] = -1.0;
        row += 1;
        // acceleration continuity
        a[row][c + 2] = 2.0;
        a[row][c + 3] = 6.0 * hi;
        a[row][n + 2] = -2.0;
        row += 1;
    }
    a[row][2] = 2.0;
    row += 1;
    let last = 4 * (segs - 1);
    a[row][last + 2] = 2.0;
    a[row][last + 3] = 6.0 * h(segs - 1);
    let x = solve_dense(a, b);
    x.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect()
}

/// Straightforward re-implementation of the forward pass from raw weights.
pub fn naive_forward(net: &MimicNetwork, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for layer in net.layers() {
        let mut next = Vec::with_capacity(layer.outputs());
        for o in 0..layer.outputs() {
            let row = &layer.weights()[o * layer.inputs()..(o + 1) * layer.inputs()];
            let mut z = layer.biases()[o];
            for (w, x) in row.iter().zip(&a) {
                z += w * x;
            }
            next.push(match layer.activation() {
                Activation::LeakyRelu if z < 0.0 => net.alpha() * z,
                _ => z,
            });
        }
        a = next;
    }
    a
}

/// Central finite differences of the batch loss over every parameter.
pub fn finite_difference_gradient(
    net: &MimicNetwork,
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    eps: f64,
) -> Vec<f64> {
    let base = net.param_vector();
    let mut probe = net.clone();
    let loss = |p: &mut MimicNetwork, params: &[f64]| {
        p.set_param_vector(params).unwrap();
        mse_loss(&p.forward_batch(xs).unwrap(), ys).unwrap()
    };
    let mut params = base.clone();
    (0..base.len())
        .map(|i| {
            params[i] = base[i] + eps;
            let plus = loss(&mut probe, &params);
            params[i] = base[i] - eps;
            let minus = loss(&mut probe, &params);
            params[i] = base[i];
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// Smallest |pre-activation| over every hidden unit and sample.
pub fn min_hidden_preactivation(net: &MimicNetwork, xs: &[Vec<f64>]) -> f64 {
    let mut smallest = f64::INFINITY;
    for x in xs {
        let mut a = x.clone();
        for layer in net.layers() {
            let mut next = Vec::new();
            for o in 0..layer.outputs() {
                let z = layer.biases()[o]
                    + (0..layer.inputs())
                        .map(|i| layer.weights()[o * layer.inputs() + i] * a[i])
                        .sum::<f64>();
                if layer.activation() == Activation::LeakyRelu {
                    smallest = smallest.min(z.abs());
                }
                next.push(if layer.activation() == Activation::LeakyRelu && z < 0.0 {
                    net.alpha() * z
                } else {
                    z
                });
            }
            a = next;
        }
    }
    smallest
}

/// |a − n| / max(|a|, |n|, floor). The floor keeps near-zero entries from
/// turning finite-difference round-off into huge ratios.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    const FLOOR: f64 = 1e-4;
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Keyframes evenly spaced over `duration`, angles uniform in ±`amplitude`.
pub fn synthetic_movement(
    seed: u64,
    frames: usize,
    dof: usize,
    duration: f64,
    amplitude: f64,
) -> KeyframeMovement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = (0..frames)
        .map(|i| {
            let t = duration * i as f64 / (frames - 1) as f64;
            let joints = (0..dof)
                .map(|_| rng.random_range(-amplitude..amplitude))
                .collect();
            KeyframeStep::new(t, joints)
        })
        .collect();
    KeyframeMovement::new(dof, steps, 1.0).unwrap()
}
