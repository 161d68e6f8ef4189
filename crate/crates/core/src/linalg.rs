//! Dense linear-algebra helpers shared across the crate: matrix exponential,
//! Lyapunov solves, definiteness tests and complex eigenvector computation.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex<f64>>;
pub type CVector = DVector<Complex<f64>>;

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant (Higham's method).
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    // Numerator coefficients of the [13/13] Padé approximant to exp.
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    // 1-norm threshold below which the degree-13 approximant is accurate.
    const THETA_13: f64 = 5.371920351148152;

    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm expects a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }

    let norm = one_norm(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(squarings);

    let eye = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let w1 = &a6 * B[13] + &a4 * B[11] + &a2 * B[9];
    let w = &a6 * &w1 + &a6 * B[7] + &a4 * B[5] + &a2 * B[3] + &eye * B[1];
    let u = &a * &w;
    let z1 = &a6 * B[12] + &a4 * B[10] + &a2 * B[8];
    let v = &a6 * &z1 + &a6 * B[6] + &a4 * B[4] + &a2 * B[2] + &eye * B[0];

    let num = &v + &u;
    let den = &v - &u;
    let mut r = den
        .lu()
        .solve(&num)
        .expect("Padé denominator of a scaled matrix is nonsingular");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn inf_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Induced 2-norm (largest singular value).
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    a.singular_values().iter().fold(0.0, |m, &s| m.max(s))
}

/// Condition number in the 2-norm.
pub fn cond_2(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let max = sv.iter().fold(0.0f64, |m, &s| m.max(s));
    let min = sv.iter().fold(f64::INFINITY, |m, &s| m.min(s));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves the continuous Lyapunov equation `A X + X Aᵀ + Q = 0` through the
/// Kronecker form; intended for the small matrices used here.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::Config(
            "Lyapunov solve needs square matrices of equal size".into(),
        ));
    }
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Lyapunov operator".into()))?;
    Ok(DMatrix::from_iterator(n, n, x.iter().copied()))
}

/// Tests `M − shift·I ≻ 0` by attempting a Cholesky factorization of the
/// symmetrized matrix.
pub fn is_positive_definite(m: &DMatrix<f64>, shift: f64) -> bool {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5 - DMatrix::<f64>::identity(n, n) * shift;
    sym.cholesky().is_some()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eig(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Largest real part over the spectrum of `a`.
pub fn max_eig_real(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |m, e| m.max(e.re))
}

/// One eigenvector of `a` for the eigenvalue `lambda`, computed by inverse
/// iteration with a slightly shifted complex LU factorization.
pub fn eigenvector(a: &DMatrix<f64>, lambda: Complex<f64>) -> Result<CVector> {
    let n = a.nrows();
    let scale = inf_norm(a).max(f64::MIN_POSITIVE);
    let shift = lambda + Complex::new(1.0, 1.0) * (1e-11 * scale);
    let mut m = CMatrix::from_iterator(n, n, a.iter().map(|&v| Complex::new(v, 0.0)));
    for i in 0..n {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();

    let mut v = CVector::from_iterator(
        n,
        (0..n).map(|j| Complex::new(1.0 + 0.05 * j as f64, 0.25 - 0.01 * j as f64)),
    );
    v /= Complex::new(v.norm(), 0.0);
    for _ in 0..4 {
        v = lu.solve(&v).ok_or_else(|| {
            Error::Numerical("singular shifted matrix in inverse iteration".into())
        })?;
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::Numerical(
                "inverse iteration produced a degenerate vector".into(),
            ));
        }
        v /= Complex::new(norm, 0.0);
    }

    let ac = CMatrix::from_iterator(n, n, a.iter().map(|&v| Complex::new(v, 0.0)));
    let residual = (&ac * &v - &v * lambda).norm();
    if residual > 1e-6 * scale {
        return Err(Error::Numerical(format!(
            "eigenvector residual {residual:e} too large for eigenvalue {lambda}"
        )));
    }
    Ok(v)
}
