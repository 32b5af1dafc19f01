//! Nonnegative least squares by the Lawson–Hanson active-set method.
//!
//! Solves `min ‖A x − b‖₂` subject to `x ≥ 0`. The passive-set least-squares
//! problems are kept in upper-triangular form with Householder reflections
//! when a variable enters and Givens rotations when one leaves, so each
//! active-set change costs `O(m n)` rather than a fresh factorization.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stopping rules for [`nnls`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnlsOptions {
    /// Iteration cap as a multiple of the number of unknowns.
    pub max_iter_factor: usize,
    /// A variable may enter the passive set only if its dual
    /// `a_jᵀ r / (‖a_j‖ ‖b‖)` exceeds this value (floored at ten machine epsilons).
    pub dual_tol: f64,
}

impl Default for NnlsOptions {
    fn default() -> Self {
        Self {
            max_iter_factor: 10,
            dual_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution<T> {
    pub x: Vec<T>,
    /// `‖A x − b‖₂` at the solution.
    pub residual_norm: T,
    pub iterations: usize,
}

/// Householder reflector for `u[p..]` that zeroes `u[p+1..]`. Returns `up`.
fn householder_construct<T: Scalar>(p: usize, u: &mut [T]) -> T {
    let cl = u[p..].iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if cl <= T::zero() {
        return T::zero();
    }
    let sm: T = u[p..].iter().map(|&v| (v / cl) * (v / cl)).sum();
    let mut norm = cl * sm.sqrt();
    if u[p] > T::zero() {
        norm = -norm;
    }
    let up = u[p] - norm;
    u[p] = norm;
    up
}

/// Applies the reflector stored in `(u, up)` at pivot `p` to `c`.
fn householder_apply<T: Scalar>(p: usize, u: &[T], up: T, c: &mut [T]) {
    let beta = up * u[p];
    if beta >= T::zero() {
        return;
    }
    let mut sm = c[p] * up;
    for l in p + 1..c.len() {
        sm = sm + c[l] * u[l];
    }
    if sm != T::zero() {
        sm = sm / beta;
        c[p] = c[p] + sm * up;
        for l in p + 1..c.len() {
            c[l] = c[l] + sm * u[l];
        }
    }
}

/// Givens rotation `(c, s, r)` with `[c s; -s c] [a; b] = [r; 0]`.
fn givens<T: Scalar>(a: T, b: T) -> (T, T, T) {
    if a.abs() > b.abs() {
        let xr = b / a;
        let yr = (T::one() + xr * xr).sqrt();
        let c = a.signum() / yr;
        (c, c * xr, a.abs() * yr)
    } else if b != T::zero() {
        let xr = a / b;
        let yr = (T::one() + xr * xr).sqrt();
        let s = b.signum() / yr;
        (s * xr, s, b.abs() * yr)
    } else {
        (T::zero(), T::one(), T::zero())
    }
}

/// Nonnegative least squares for a row-major `m × n` matrix.
pub fn nnls<T: Scalar>(
    a_rows: &[T],
    m: usize,
    n: usize,
    b: &[T],
    options: NnlsOptions,
) -> Result<NnlsSolution<T>> {
    if m == 0 || n == 0 {
        return Err(Error::Structure(format!("nnls needs a non-empty matrix, got {m}x{n}")));
    }
    if a_rows.len() != m * n || b.len() != m {
        return Err(Error::Structure(format!(
            "nnls dimension mismatch: matrix has {} entries for {m}x{n}, rhs has {}",
            a_rows.len(),
            b.len()
        )));
    }
    if a_rows.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Structure("nnls input contains non-finite values".into()));
    }

    // Column-major working copy.
    let mut a: Vec<Vec<T>> = (0..n)
        .map(|j| (0..m).map(|i| a_rows[i * n + j]).collect())
        .collect();
    let mut b = b.to_vec();
    let col_norm: Vec<T> = a.iter().map(|c| c.iter().map(|&v| v * v).sum::<T>().sqrt()).collect();
    let b_norm = b.iter().map(|&v| v * v).sum::<T>().sqrt();
    let dual_tol = T::of(options.dual_tol).max(T::epsilon() * T::of(10.0));
    let factor = T::of(0.01);
    let max_iter = options.max_iter_factor.max(1) * n;

    let mut x = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];
    let mut zz = vec![T::zero(); m];
    let mut index: Vec<usize> = (0..n).collect();
    let mut nsetp = 0usize;
    let mut iterations = 0usize;

    let solve_triangular = |a: &[Vec<T>], index: &[usize], nsetp: usize, zz: &mut [T]| {
        for ip in (0..nsetp).rev() {
            let mut acc = zz[ip];
            for k in ip + 1..nsetp {
                acc = acc - a[index[k]][ip] * zz[k];
            }
            zz[ip] = acc / a[index[ip]][ip];
        }
    };

    'main: while nsetp < n && nsetp < m {
        for &j in &index[nsetp..] {
            let col = &a[j];
            w[j] = (nsetp..m).map(|l| col[l] * b[l]).sum();
        }

        // Pick the most promising variable that keeps the factor well-conditioned.
        let (izmax, up) = loop {
            let candidate = (nsetp..n)
                .map(|iz| (iz, w[index[iz]]))
                .filter(|&(iz, wj)| {
                    let scale = col_norm[index[iz]] * b_norm;
                    scale > T::zero() && wj > dual_tol * scale
                })
                .max_by(|p, q| p.1.partial_cmp(&q.1).expect("finite duals"));
            let Some((iz, _)) = candidate else {
                break 'main;
            };
            let j = index[iz];
            let asave = a[j][nsetp];
            let up = householder_construct(nsetp, &mut a[j]);
            let unorm = a[j][..nsetp].iter().map(|&v| v * v).sum::<T>().sqrt();
            if (unorm + a[j][nsetp].abs() * factor) - unorm > T::zero() {
                zz.copy_from_slice(&b);
                householder_apply(nsetp, &a[j], up, &mut zz);
                let ztest = zz[nsetp] / a[j][nsetp];
                if ztest > T::zero() {
                    break (iz, up);
                }
            }
            a[j][nsetp] = asave;
            w[j] = T::zero();
        };

        let j = index[izmax];
        b.copy_from_slice(&zz);
        index.swap(izmax, nsetp);
        let pivot = nsetp;
        nsetp += 1;
        if nsetp < n {
            let reflector = a[j].clone();
            for &jj in &index[nsetp..n] {
                householder_apply(pivot, &reflector, up, &mut a[jj]);
            }
        }
        a[j][nsetp..m].fill(T::zero());
        w[j] = T::zero();
        zz.copy_from_slice(&b);
        solve_triangular(&a, &index, nsetp, &mut zz);

        loop {
            iterations += 1;
            if iterations > max_iter {
                let residual = b[nsetp..].iter().map(|&v| v * v).sum::<T>().sqrt();
                return Err(Error::Solver {
                    iterations: iterations - 1,
                    residual: residual.f64(),
                    message: "nnls iteration cap reached".into(),
                });
            }
            let mut alpha = T::of(2.0);
            let mut jj = 0usize;
            for ip in 0..nsetp {
                let l = index[ip];
                if zz[ip] <= T::zero() {
                    let t = -x[l] / (zz[ip] - x[l]);
                    if alpha > t {
                        alpha = t;
                        jj = ip;
                    }
                }
            }
            if alpha == T::of(2.0) {
                break;
            }
            for ip in 0..nsetp {
                let l = index[ip];
                x[l] = x[l] + alpha * (zz[ip] - x[l]);
            }

            // Move every passive variable that hit zero back to the active set.
            let mut leaving = Some(jj);
            while let Some(jj) = leaving {
                let i = index[jj];
                x[i] = T::zero();
                for ip in jj + 1..nsetp {
                    let ii = index[ip];
                    index[ip - 1] = ii;
                    let (c, s, r) = givens(a[ii][ip - 1], a[ii][ip]);
                    a[ii][ip - 1] = r;
                    a[ii][ip] = T::zero();
                    for (l, col) in a.iter_mut().enumerate() {
                        if l != ii {
                            let (u, v) = (col[ip - 1], col[ip]);
                            col[ip - 1] = c * u + s * v;
                            col[ip] = -s * u + c * v;
                        }
                    }
                    let (u, v) = (b[ip - 1], b[ip]);
                    b[ip - 1] = c * u + s * v;
                    b[ip] = -s * u + c * v;
                }
                nsetp -= 1;
                index[nsetp] = i;
                leaving = (0..nsetp).find(|&ip| x[index[ip]] <= T::zero());
            }
            zz.copy_from_slice(&b);
            solve_triangular(&a, &index, nsetp, &mut zz);
        }
        for ip in 0..nsetp {
            x[index[ip]] = zz[ip];
        }
    }

    let residual_norm = b[nsetp.min(m)..].iter().map(|&v| v * v).sum::<T>().sqrt();
    Ok(NnlsSolution {
        x,
        residual_norm,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &[f64], m: usize, n: usize, b: &[f64], x: &[f64]) -> f64 {
        (0..m)
            .map(|i| {
                let ax: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
                (ax - b[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn unconstrained_optimum_is_returned() {
        let a = [1.0f64, 0.0, 0.0, 1.0, 1.0, 1.0];
        let b = [1.0, 2.0, 3.0];
        let sol = nnls(&a, 3, 2, &b, NnlsOptions::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.x[1] - 2.0).abs() < 1e-12);
        assert!(sol.residual_norm < 1e-12);
    }

    #[test]
    fn negative_component_is_clamped() {
        // Unconstrained solution is (2, -1); the constrained one sets x1 = 0.
        let a = [1.0f64, 1.0, 0.0, 1.0];
        let b = [1.0, -1.0];
        let sol = nnls(&a, 2, 2, &b, NnlsOptions::default()).unwrap();
        assert_eq!(sol.x[1], 0.0);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
        assert!((sol.residual_norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_entry() {
        let sol = nnls(&[4.0f64], 1, 1, &[2.0], NnlsOptions::default()).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-15);
        let neg = nnls(&[4.0f64], 1, 1, &[-2.0], NnlsOptions::default()).unwrap();
        assert_eq!(neg.x[0], 0.0);
    }

    #[test]
    fn kkt_conditions_hold() {
        // Deterministic pseudo-random problem.
        let (m, n) = (30, 12);
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let a: Vec<f64> = (0..m * n).map(|_| next()).collect();
        let b: Vec<f64> = (0..m).map(|_| next()).collect();
        let sol = nnls(&a, m, n, &b, NnlsOptions::default()).unwrap();
        let r: Vec<f64> = (0..m)
            .map(|i| b[i] - (0..n).map(|j| a[i * n + j] * sol.x[j]).sum::<f64>())
            .collect();
        for j in 0..n {
            let g: f64 = (0..m).map(|i| a[i * n + j] * r[i]).sum();
            assert!(sol.x[j] >= 0.0);
            if sol.x[j] > 0.0 {
                assert!(g.abs() < 1e-9, "grad {j} = {g}");
            } else {
                assert!(g < 1e-9, "dual {j} = {g}");
            }
        }
        assert!((residual(&a, m, n, &b, &sol.x) - sol.residual_norm).abs() < 1e-10);
    }

    #[test]
    fn dimension_errors() {
        assert!(nnls::<f64>(&[], 0, 0, &[], NnlsOptions::default()).is_err());
        assert!(nnls(&[1.0, 2.0], 1, 1, &[1.0], NnlsOptions::default()).is_err());
    }
}
