//! Eigen-decomposition and characteristic polynomials of small dense real
//! matrices.

use super::NumError;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Tolerance on |Re λ| below which an eigenvalue counts as having zero real
/// part.
pub const ZERO_REAL_TOL: f64 = 1e-7;

/// Eigenvalues of a real matrix together with their classification by sign
/// of the real part.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub n_neg: usize,
    pub n_zero: usize,
    pub n_pos: usize,
}

impl Spectrum {
    pub fn classify(eigenvalues: Vec<Complex64>, zero_tol: f64) -> Self {
        let mut n_neg = 0;
        let mut n_zero = 0;
        let mut n_pos = 0;
        for ev in &eigenvalues {
            if ev.re.abs() <= zero_tol {
                n_zero += 1;
            } else if ev.re < 0.0 {
                n_neg += 1;
            } else {
                n_pos += 1;
            }
        }
        Self { eigenvalues, n_neg, n_zero, n_pos }
    }

    pub fn classification(&self) -> (usize, usize, usize) {
        (self.n_neg, self.n_zero, self.n_pos)
    }
}

/// Eigenvalues of a small (n <= 16) dense real matrix via the real Schur
/// form. Complex eigenvalues come in conjugate pairs.
pub fn eig_dense(a: &DMatrix<f64>) -> Result<Spectrum, NumError> {
    assert!(a.is_square(), "eig_dense expects a square matrix");
    assert!(a.nrows() <= 16, "eig_dense is sized for small matrices");
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), 1e-14, 10_000)
        .ok_or(NumError::NoConvergence)?;
    let ev = schur.complex_eigenvalues();
    let mut eigenvalues: Vec<Complex64> =
        ev.iter().map(|c| Complex64::new(c.re, c.im)).collect();
    eigenvalues.sort_by(|x, y| {
        x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap())
    });
    Ok(Spectrum::classify(eigenvalues, ZERO_REAL_TOL))
}

/// Monic characteristic polynomial coefficients in descending degree,
/// `[1, c_{n-1}, ..., c_0]`, built from the eigenvalues with compensated
/// accumulation so coefficients spanning several orders of magnitude keep
/// full relative accuracy.
pub fn char_poly(a: &DMatrix<f64>) -> Result<Vec<f64>, NumError> {
    let spec = eig_dense(a)?;
    let n = a.nrows();
    // expand prod (x - lambda_i) with Kahan compensation per coefficient
    let mut coef = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut comp = vec![Complex64::new(0.0, 0.0); n + 1];
    coef[0] = Complex64::new(1.0, 0.0);
    let mut deg = 0usize;
    for lam in &spec.eigenvalues {
        deg += 1;
        // new_coef[k] = coef[k] - lam * coef[k-1], from high k downward
        for k in (1..=deg).rev() {
            let term = -lam * coef[k - 1];
            // Kahan step on the complex pair
            let yv = term - comp[k];
            let t = coef[k] + yv;
            comp[k] = (t - coef[k]) - yv;
            coef[k] = t;
        }
    }
    Ok(coef.into_iter().map(|c| c.re).collect())
}

/// Roots of a monic real polynomial (descending coefficients) via the
/// companion matrix, polished by a few Newton steps on the polynomial itself;
/// the companion eigenvalues alone lose about two digits.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>, NumError> {
    let n = coeffs.len() - 1;
    assert!(n >= 1 && (coeffs[0] - 1.0).abs() < 1e-12, "expected a monic polynomial");
    let mut comp = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -coeffs[n - i];
    }
    let spec = eig_dense(&comp)?;
    let horner = |x: Complex64| -> (Complex64, Complex64) {
        let mut p = Complex64::new(coeffs[0], 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in &coeffs[1..] {
            dp = dp * x + p;
            p = p * x + c;
        }
        (p, dp)
    };
    let roots = spec
        .eigenvalues
        .into_iter()
        .map(|mut x| {
            for _ in 0..5 {
                let (p, dp) = horner(x);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                x -= step;
                if step.norm() <= 1e-16 * x.norm().max(1.0) {
                    break;
                }
            }
            x
        })
        .collect();
    Ok(roots)
}

/// Unit eigenvector of a real matrix for a (numerically) real eigenvalue,
/// computed as the null direction of `A - lambda I` from an SVD.
pub fn real_eigenvector(a: &DMatrix<f64>, lambda: f64) -> Result<DVector<f64>, NumError> {
    let n = a.nrows();
    let shifted = a - DMatrix::<f64>::identity(n, n) * lambda;
    let svd = nalgebra::linalg::SVD::new(shifted, false, true);
    let v_t = svd.v_t.ok_or(NumError::NoConvergence)?;
    // right singular vector for the smallest singular value = last row of V^T
    let row = v_t.row(n - 1);
    let mut v = DVector::from_iterator(n, row.iter().cloned());
    // orient deterministically
    if let Some(m) = v.iter().cloned().reduce(|a, b| if a.abs() >= b.abs() { a } else { b }) {
        if m < 0.0 {
            v = -v;
        }
    }
    Ok(v)
}

/// Minimal over pairings of the maximal distance |a_i - b_{sigma(i)}|.
/// Depth-first search with pruning; the spectra here have at most nine
/// entries.
pub fn pairing_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let dist: Vec<Vec<f64>> =
        a.iter().map(|x| b.iter().map(|y| (x - y).norm()).collect()).collect();
    let mut used = vec![false; n];
    let mut best = f64::INFINITY;
    fn dfs(
        i: usize,
        cur_max: f64,
        dist: &[Vec<f64>],
        used: &mut [bool],
        best: &mut f64,
    ) {
        let n = dist.len();
        if cur_max >= *best {
            return;
        }
        if i == n {
            *best = cur_max;
            return;
        }
        // try candidates in increasing distance for better pruning
        let mut order: Vec<usize> = (0..n).filter(|&j| !used[j]).collect();
        order.sort_by(|&x, &y| dist[i][x].partial_cmp(&dist[i][y]).unwrap());
        for j in order {
            used[j] = true;
            dfs(i + 1, cur_max.max(dist[i][j]), dist, used, best);
            used[j] = false;
        }
    }
    dfs(0, 0.0, &dist, &mut used, &mut best);
    best
}
