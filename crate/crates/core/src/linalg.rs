//! Small dense linear algebra used by the chain analysis.
//!
//! Everything here works on row-major `Vec<f64>` buffers of order `n`; the
//! state spaces this crate handles are tiny (|Θ| ≤ 64), so clarity wins over
//! blocking or SIMD.

/// Row-major square matrix product `a * b`.
pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n * n);
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &b[k * n..(k + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
    out
}

/// Row vector times matrix: `x^T A`.
pub fn vecmat(x: &[f64], a: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (o, &aij) in out.iter_mut().zip(&a[i * n..(i + 1) * n]) {
            *o += xi * aij;
        }
    }
    out
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `pivot_tol` (numerically singular).
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize, pivot_tol: f64) -> Option<Vec<f64>> {
    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs < pivot_tol {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] -= f * a[col * n + j];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|j| a[r * n + j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    Some(x)
}

/// Eigenvalues of a real symmetric matrix by the cyclic Jacobi method.
///
/// Sweeps rotate away every off-diagonal entry in row order until the
/// off-diagonal Frobenius norm drops below `tol` times the matrix norm (or
/// below `tol` absolutely for a zero matrix). The input is symmetrized
/// first, so tiny asymmetries from upstream arithmetic are harmless.
/// Eigenvalues come back sorted in decreasing order.
pub fn symmetric_eigenvalues(a: &[f64], n: usize, tol: f64) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
        }
    }
    let frob: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = tol * frob.max(1.0);
    const MAX_SWEEPS: usize = 100;

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_two_by_two_closed_form() {
        // [[a, b], [b, c]] has eigenvalues (a+c)/2 ± sqrt(((a-c)/2)^2 + b^2)
        let (a, b, c) = (2.0, 0.7, -1.0);
        let eig = symmetric_eigenvalues(&[a, b, b, c], 2, 1e-14);
        let mid = 0.5 * (a + c);
        let rad = ((0.5 * (a - c)).powi(2) + b * b).sqrt();
        assert!((eig[0] - (mid + rad)).abs() < 1e-13);
        assert!((eig[1] - (mid - rad)).abs() < 1e-13);
    }

    #[test]
    fn jacobi_matches_nalgebra_on_random_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in 1..9 {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
            let ours = symmetric_eigenvalues(&a, n, 1e-14);
            let dm = nalgebra::DMatrix::from_row_slice(n, n, &a);
            let mut theirs: Vec<f64> = dm.symmetric_eigenvalues().iter().copied().collect();
            theirs.sort_by(|x, y| y.total_cmp(x));
            for (x, y) in ours.iter().zip(&theirs) {
                assert!((x - y).abs() < 1e-10, "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn solve_small_system() {
        let a = vec![2.0, 1.0, 1.0, 3.0];
        let x = solve(a, vec![3.0, 5.0], 2, 1e-14).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-14);
        assert!((x[1] - 1.4).abs() < 1e-14);
        assert!(solve(vec![1.0, 2.0, 2.0, 4.0], vec![1.0, 2.0], 2, 1e-12).is_none());
    }
}
