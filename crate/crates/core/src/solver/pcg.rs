//! Preconditioned conjugate gradients on the free-DOF partition.

use nalgebra::Matrix3;
use rayon::prelude::*;

use super::sparse::{dot, norm, CsrMatrix};
use crate::error::{HfeError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcgStats {
    pub iterations: usize,
    /// Final ‖r‖ / ‖b‖.
    pub relative_residual: f64,
}

/// Inverted 3×3 nodal diagonal blocks; constrained components act as identity.
pub struct BlockJacobi {
    inv: Vec<[[f64; 3]; 3]>,
}

impl BlockJacobi {
    pub fn new(k: &CsrMatrix, free: &[bool]) -> Self {
        let nn = k.dim() / 3;
        let inv = (0..nn)
            .into_par_iter()
            .map(|a| {
                let blk = k.diagonal_block(a);
                let mut b = Matrix3::from_fn(|i, j| blk[i][j]);
                for c in 0..3 {
                    if !free[3 * a + c] {
                        for t in 0..3 {
                            b[(c, t)] = 0.0;
                            b[(t, c)] = 0.0;
                        }
                        b[(c, c)] = 1.0;
                    }
                }
                let m = b.try_inverse().unwrap_or_else(|| {
                    Matrix3::from_diagonal(
                        &b.diagonal().map(|d| if d != 0.0 { 1.0 / d } else { 1.0 }),
                    )
                });
                [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
            })
            .collect();
        BlockJacobi { inv }
    }

    fn apply(&self, r: &[f64], z: &mut [f64], free: &[bool]) {
        z.par_chunks_mut(3).enumerate().for_each(|(a, out)| {
            let m = &self.inv[a];
            for i in 0..3 {
                out[i] = if free[3 * a + i] {
                    (0..3).map(|j| m[i][j] * r[3 * a + j]).sum()
                } else {
                    0.0
                };
            }
        });
    }
}

fn masked_matvec(k: &CsrMatrix, x: &[f64], y: &mut [f64], free: &[bool]) {
    k.matvec(x, y);
    y.par_iter_mut().zip(free.par_iter()).for_each(|(v, &f)| {
        if !f {
            *v = 0.0;
        }
    });
}

/// Solves `K_ff x_f = b_f` starting from `x` (constrained entries of `x` and
/// `b` must be zero). Stops at `‖r‖ ≤ tol ‖b‖`.
pub fn solve(
    k: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    free: &[bool],
    tol: f64,
    max_iterations: usize,
) -> Result<PcgStats> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(PcgStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let pre = BlockJacobi::new(k, free);
    let mut r = vec![0.0; n];
    masked_matvec(k, x, &mut r, free);
    r.par_iter_mut()
        .zip(b.par_iter())
        .for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z, free);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    let mut rel = norm(&r) / bnorm;
    for it in 0..max_iterations {
        if rel <= tol {
            return Ok(PcgStats {
                iterations: it,
                relative_residual: rel,
            });
        }
        masked_matvec(k, &p, &mut q, free);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(HfeError::Constraint(format!(
                "stiffness is singular or indefinite on the free DOFs (pᵀKp = {pq:.3e} at iteration {it})"
            )));
        }
        let alpha = rz / pq;
        x.par_iter_mut()
            .zip(p.par_iter())
            .for_each(|(xi, pi)| *xi += alpha * pi);
        r.par_iter_mut()
            .zip(q.par_iter())
            .for_each(|(ri, qi)| *ri -= alpha * qi);
        pre.apply(&r, &mut z, free);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.par_iter_mut()
            .zip(z.par_iter())
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
        rel = norm(&r) / bnorm;
    }
    if rel <= tol {
        return Ok(PcgStats {
            iterations: max_iterations,
            relative_residual: rel,
        });
    }
    Err(HfeError::Convergence {
        step: None,
        iterations: max_iterations,
        residual: rel,
    })
}
