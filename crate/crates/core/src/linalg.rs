//! Dense helpers: a cyclic Jacobi eigensolver for small complex Hermitian
//! matrices (Rayleigh-Ritz subproblems, tiny model Hamiltonians) and a pivoted
//! Gaussian solve for small real systems.

use num_complex::Complex64;

/// Eigendecomposition of a Hermitian matrix stored row-major (n×n).
/// Returns ascending eigenvalues and the matching eigenvectors as columns
/// (column j of `vectors` is `vectors[i * n + j]` over rows i).
pub fn hermitian_eigen(mut a: Vec<Complex64>, n: usize) -> (Vec<f64>, Vec<Complex64>) {
    assert_eq!(a.len(), n * n);
    // accumulated rotations: v starts as identity
    let mut v = vec![Complex64::default(); n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
    }
    if n == 0 {
        return (vec![], v);
    }

    let idx = |r: usize, c: usize| r * n + c;
    let scale: f64 = (0..n)
        .map(|i| a[idx(i, i)].re.abs())
        .fold(1e-300, f64::max)
        .max(
            (0..n * n)
                .map(|i| a[i].norm())
                .fold(0.0, f64::max),
        );

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[idx(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                let app = a[idx(p, p)].re;
                let aqq = a[idx(q, q)].re;
                // unitary 2x2: [c, -conj(s); s, c] with s aligned to apq's phase
                let phase = apq / apq.norm();
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = phase * (t * c);

                for k in 0..n {
                    let akp = a[idx(k, p)];
                    let akq = a[idx(k, q)];
                    a[idx(k, p)] = akp * c - akq * s.conj();
                    a[idx(k, q)] = akp * s + akq * c;
                }
                for k in 0..n {
                    let apk = a[idx(p, k)];
                    let aqk = a[idx(q, k)];
                    a[idx(p, k)] = apk * c - aqk * s;
                    a[idx(q, k)] = apk * s.conj() + aqk * c;
                }
                for k in 0..n {
                    let vkp = v[idx(k, p)];
                    let vkq = v[idx(k, q)];
                    v[idx(k, p)] = vkp * c - vkq * s.conj();
                    v[idx(k, q)] = vkp * s + vkq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let values: Vec<f64> = (0..n).map(|i| a[idx(i, i)].re).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut sorted_vectors = vec![Complex64::default(); n * n];
    for (newj, &oldj) in order.iter().enumerate() {
        for i in 0..n {
            sorted_vectors[idx(i, newj)] = v[idx(i, oldj)];
        }
    }
    (sorted_values, sorted_vectors)
}

/// Row-major complex matrix product: (ar×ac)·(ac×bc).
pub fn matmul(a: &[Complex64], ar: usize, ac: usize, b: &[Complex64], bc: usize) -> Vec<Complex64> {
    assert_eq!(a.len(), ar * ac);
    assert_eq!(b.len(), ac * bc);
    let mut out = vec![Complex64::default(); ar * bc];
    for i in 0..ar {
        for k in 0..ac {
            let av = a[i * ac + k];
            if av.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..bc {
                out[i * bc + j] += av * b[k * bc + j];
            }
        }
    }
    out
}

/// Conjugate transpose of a row-major r×c matrix.
pub fn adjoint(a: &[Complex64], r: usize, c: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = a[i * c + j].conj();
        }
    }
    out
}

/// Solve a small real linear system A x = b by Gaussian elimination with
/// partial pivoting. `a` is row-major n×n and is consumed.
pub fn solve_real(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for col in 0..n {
        let (pivot_row, pivot_val) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if pivot_val < 1e-300 {
            return None;
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(pivot_row * n + c, col * n + c);
            }
            b.swap(pivot_row, col);
        }
        let inv = 1.0 / a[col * n + col];
        for r in (col + 1)..n {
            let f = a[r * n + col] * inv;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in (col + 1)..n {
            acc -= a[col * n + c] * x[c];
        }
        x[col] = acc / a[col * n + col];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![Complex64::default(); n * n];
        for i in 0..n {
            a[i * n + i] = Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, 0.0);
            for j in (i + 1)..n {
                let z = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                a[i * n + j] = z;
                a[j * n + i] = z.conj();
            }
        }
        a
    }

    #[test]
    fn reconstructs_matrix() {
        for &n in &[2usize, 5, 17] {
            let a = random_hermitian(n, 100 + n as u64);
            let (vals, vecs) = hermitian_eigen(a.clone(), n);
            // A V = V diag(vals)
            for j in 0..n {
                for i in 0..n {
                    let mut av = Complex64::default();
                    for k in 0..n {
                        av += a[i * n + k] * vecs[k * n + j];
                    }
                    let dv = vecs[i * n + j] * vals[j];
                    assert!((av - dv).norm() <= 1e-11, "n={n} entry ({i},{j})");
                }
            }
            // orthonormal columns
            for j in 0..n {
                for l in 0..n {
                    let mut ip = Complex64::default();
                    for k in 0..n {
                        ip += vecs[k * n + j].conj() * vecs[k * n + l];
                    }
                    let expect = if j == l { 1.0 } else { 0.0 };
                    assert!((ip - expect).norm() <= 1e-12);
                }
            }
            // ascending
            for w in vals.windows(2) {
                assert!(w[0] <= w[1] + 1e-14);
            }
        }
    }

    #[test]
    fn known_two_by_two() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let a = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(2.0, 0.0),
        ];
        let (vals, _) = hermitian_eigen(a, 2);
        assert!((vals[0] - 1.0).abs() < 1e-14);
        assert!((vals[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_solve() {
        let a = vec![2.0, 1.0, -1.0, -3.0, -1.0, 2.0, -2.0, 1.0, 2.0];
        let b = vec![8.0, -11.0, -3.0];
        let x = solve_real(a, b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
        assert!((x[2] - (-1.0)).abs() < 1e-12);
    }
}
