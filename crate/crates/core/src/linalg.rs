//! Dense complex linear algebra used by the exact oracles.
//!
//! Everything here is deliberately simple: the oracle spaces are small
//! (dimension ≤ a few hundred), so clarity wins over sparse or blocked
//! machinery.

use ndarray::Array2;
use num_complex::Complex64 as C64;

/// Conjugate transpose.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Commutator [a, b] = ab − ba.
pub fn commutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) - b.dot(a)
}

/// Anticommutator {a, b} = ab + ba.
pub fn anticommutator(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    a.dot(b) + b.dot(a)
}

/// Largest elementwise modulus.
pub fn max_abs(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn fro_norm(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum (induced 1-norm), used to pick the scaling
/// power in [`expm`].
fn norm_1(m: &Array2<C64>) -> f64 {
    let mut best = 0.0_f64;
    for col in m.columns() {
        let s: f64 = col.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Matrix exponential by scaling and squaring with a Taylor series core.
///
/// The argument is scaled so its 1-norm is at most 1/2, expanded until the
/// term norm falls below machine precision relative to the partial sum, and
/// squared back up. Adequate for the anti-Hermitian generators used here.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    let norm = norm_1(a);
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = C64::new(0.5_f64.powi(s), 0.0);
    let a_scaled = a.mapv(|z| z * scale);

    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..=40 {
        term = term.dot(&a_scaled) / C64::new(k as f64, 0.0);
        result += &term;
        if fro_norm(&term) < 1.0e-18 * fro_norm(&result).max(1.0) {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// Eigenvalues of a Hermitian matrix via the cyclic complex Jacobi method.
///
/// Returns eigenvalues sorted in ascending order. Used for positivity checks
/// of density matrices; accuracy of order `n · ε · ‖m‖` is plenty for that.
pub fn hermitian_eigenvalues(m: &Array2<C64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    let mut a = m.clone();
    // symmetrize defensively against rounding in the input
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[[i, j]] + a[[j, i]].conj());
            a[[i, j]] = avg;
            a[[j, i]] = avg.conj();
        }
        a[[i, i]] = C64::new(a[[i, i]].re, 0.0);
    }
    let scale = max_abs(&a).max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[[i, j]].norm());
            }
        }
        if off < 1.0e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.norm() < 1.0e-300 {
                    continue;
                }
                // Unitary 2×2 rotation annihilating a[p][q].
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                let abs_apq = apq.norm();
                let phase = apq / C64::new(abs_apq, 0.0);
                let tau = (app - aqq) / (2.0 * abs_apq);
                let t = -tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // columns/rows update: rows p,q and columns p,q
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = akp * c - akq * phase.conj() * s;
                    a[[k, q]] = akp * phase * s + akq * c;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = apk * c - aqk * phase * s;
                    a[[q, k]] = apk * phase.conj() * s + aqk * c;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[[i, i]].re).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}

/// Minimum eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &Array2<C64>) -> f64 {
    hermitian_eigenvalues(m)[0]
}
