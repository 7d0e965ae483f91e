//! Thin SVD of a short, wide matrix by one-sided Jacobi rotations.
//!
//! The rows of a `T × D` matrix (`T ≤ D` in practice) are rotated pairwise
//! until they are mutually orthogonal. The final rows are `σ_l v_lᵀ`, where
//! `v_l` are the right singular vectors, so the `D × D` Gram matrix is never
//! formed. Cost per sweep is `O(T² D)`.

/// Right singular pairs in decreasing order of singular value, restricted to
/// the numerical rank.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub singular_values: Vec<f64>,
    /// One `D`-vector per singular value.
    pub right_vectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 80;

/// Singular values below `RANK_TOL · σ_max` are treated as zero.
const RANK_TOL: f64 = 1e-10;

/// Inner product with four independent accumulators so the loop vectorizes.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Computes the thin SVD of the matrix whose rows are `rows`.
pub fn thin_svd(mut rows: Vec<Vec<f64>>) -> ThinSvd {
    let n = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    let tol = (f64::EPSILON * (dim.max(1) as f64).sqrt()).max(1e-15);

    let mut norms: Vec<f64> = rows.iter().map(|r| dot(r, r)).collect();
    for _ in 0..MAX_SWEEPS {
        let scale = norms.iter().cloned().fold(0.0, f64::max);
        if scale == 0.0 {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (a, b) = (norms[p], norms[q]);
                // Rows this small carry no information at the working precision.
                if a <= scale * 1e-300 || b <= scale * 1e-300 {
                    continue;
                }
                let (head, tail) = rows.split_at_mut(q);
                let (xp, xq) = (&mut head[p], &mut tail[0]);
                let g = dot(xp, xq);
                if g.abs() <= tol * (a * b).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (b - a) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for (u, v) in xp.iter_mut().zip(xq.iter_mut()) {
                    let (x, y) = (*u, *v);
                    *u = c * x - s * y;
                    *v = s * x + c * y;
                }
                norms[p] = a - t * g;
                norms[q] = b + t * g;
            }
        }
        // Refresh to stop drift in the incremental updates.
        for (nrm, r) in norms.iter_mut().zip(&rows) {
            *nrm = dot(r, r);
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps equal singular values in row order.
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let sigma_max = norms.get(order.first().copied().unwrap_or(0)).map_or(0.0, |v| v.sqrt());

    let mut singular_values = Vec::new();
    let mut right_vectors = Vec::new();
    for i in order {
        let s = norms[i].sqrt();
        if s == 0.0 || s <= RANK_TOL * sigma_max {
            break;
        }
        let inv = 1.0 / s;
        singular_values.push(s);
        right_vectors.push(rows[i].iter().map(|v| v * inv).collect());
    }
    ThinSvd {
        singular_values,
        right_vectors,
    }
}
