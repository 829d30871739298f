//! One-sided Jacobi (Hestenes) singular value decomposition.
//!
//! Used for the PCA of centered shape matrices (tall, rank-deficient by one)
//! and for the 3×3 cross-covariance in Kabsch alignment.

use nalgebra::DMatrix;

/// Thin SVD `A = U·diag(σ)·Vᵀ` of an `m × n` matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m × n`; columns belonging to zero singular values are zero.
    pub u: DMatrix<f64>,
    /// Non-negative, sorted descending.
    pub singular_values: Vec<f64>,
    /// `n × n` orthogonal.
    pub v: DMatrix<f64>,
}

const MAX_SWEEPS: usize = 60;

pub fn jacobi_svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));

    let top = norms.iter().copied().fold(0.0, f64::max);
    let cutoff = top * f64::EPSILON * (m.max(n) as f64);
    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        if s > cutoff {
            u.set_column(dst, &(w.column(src) / s));
        }
        vs.set_column(dst, &v.column(src));
        singular_values.push(s);
    }
    Svd {
        u,
        singular_values,
        v: vs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_one_tall_matrix() {
        let d = [0.5, -1.0, 2.0];
        let a = DMatrix::from_fn(126, 2, |r, c| if c == 0 { -d[r % 3] / 2.0 } else { d[r % 3] / 2.0 });
        let svd = jacobi_svd(&a);
        assert!((svd.singular_values[0] - 10.5).abs() < 1e-12);
        assert!(svd.singular_values[1] < 1e-12);
        let norm = (5.25f64 * 42.0).sqrt();
        let cos: f64 = (0..126).map(|r| svd.u[(r, 0)] * d[r % 3]).sum::<f64>() / norm;
        assert!((cos.abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reconstructs_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (m, n) in [(3, 3), (10, 4), (50, 7)] {
            let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let svd = jacobi_svd(&a);
            let sigma = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(svd.singular_values.clone()));
            let back = &svd.u * sigma * svd.v.transpose();
            assert!((back - &a).abs().max() < 1e-12);
            let utu = svd.u.transpose() * &svd.u;
            assert!((utu - DMatrix::identity(n, n)).abs().max() < 1e-12);
            assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
