//! Sector stability certificates for the reduced closed loop.
//!
//! The reduced dynamics split as `ż = A* z + h*(z)`. When the remainder obeys
//! a sector bound `‖h*(z)‖ ≤ r̃ ‖H z‖`, quadratic stability follows from
//! feasibility of a linear matrix inequality in `(Y, α)` with `r̃ = 1/√α`.
//! [`solve_sector_lmi`] maximizes the admissible sector gain by minimizing α
//! with a log-det barrier method, [`modal_transform`] moves the problem into
//! eigenvector coordinates, and [`sector_back_map`] converts the modal gain
//! into a bound on the dominant remainder component. An independent check of
//! the optimum is available through [`min_r_tilde_bisection`].

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::equiv::ReducedModel;
use crate::linalg::{self, CVector};
use crate::{Error, Result};

/// Positive-definiteness slack required of a returned certificate, applied to
/// the internally rescaled blocks.
pub const CERTIFICATE_MARGIN: f64 = 1e-10;

/// Relative amount by which the minimized α is inflated before the
/// certificate is recentered and returned. The optimum itself hugs the
/// constraint boundary at the duality-gap tolerance, so a certificate taken
/// there has no eigenvalue slack to spare; backing off costs a factor
/// `(1 + ALPHA_BACKOFF)^(1/2)` in `r_tilde` and buys strict interiority.
const ALPHA_BACKOFF: f64 = 5e-7;

/// Data for the sector LMI: a Hurwitz `A` and the sector weight `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub a: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl LmiProblem {
    pub fn new(a: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Config("dynamics matrix must be square".into()));
        }
        if h.ncols() != a.nrows() {
            return Err(Error::Config(format!(
                "sector weight has {} columns but the state dimension is {}",
                h.ncols(),
                a.nrows()
            )));
        }
        if a.iter().chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Config("matrix entries must be finite".into()));
        }
        if linalg::spectral_norm(&h) == 0.0 {
            return Err(Error::Config("sector weight must be nonzero".into()));
        }
        Ok(Self { a, h })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Assembles the symmetric block matrix
///
/// ```text
/// [ A Y + Y Aᵀ   I     Y Hᵀ ]
/// [ I           −I     0    ]
/// [ H Y          0    −α I  ]
/// ```
///
/// which must be negative definite for `(Y ≻ 0, α)` to certify the sector
/// gain `r̃ = 1/√α`.
pub fn lmi_block(a: &DMatrix<f64>, h: &DMatrix<f64>, y: &DMatrix<f64>, alpha: f64) -> DMatrix<f64> {
    let d = a.nrows();
    let p = h.nrows();
    let n = 2 * d + p;
    let mut m = DMatrix::zeros(n, n);
    let ay = a * y;
    let id = DMatrix::identity(d, d);
    m.view_mut((0, 0), (d, d))
        .copy_from(&(&ay + ay.transpose()));
    m.view_mut((0, d), (d, d)).copy_from(&id);
    m.view_mut((d, 0), (d, d)).copy_from(&id);
    m.view_mut((d, d), (d, d)).copy_from(&(-&id));
    let yh = y * h.transpose();
    m.view_mut((0, 2 * d), (d, p)).copy_from(&yh);
    m.view_mut((2 * d, 0), (p, d)).copy_from(&yh.transpose());
    m.view_mut((2 * d, 2 * d), (p, p))
        .copy_from(&(DMatrix::identity(p, p) * -alpha));
    m
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Relative duality-gap target on α.
    pub tol: f64,
    /// Minimum eigenvalue slack required of the rescaled certificate blocks.
    pub margin: f64,
    /// Newton iteration cap per centering step.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            margin: CERTIFICATE_MARGIN,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub y: DMatrix<f64>,
    pub alpha: f64,
    pub r_tilde: f64,
}

/// Minimizes α subject to `Y ≻ 0` and `lmi_block(A, H, Y, α) ≺ 0`, returning
/// the largest certifiable sector gain `r̃ = 1/√α`.
///
/// The problem is rescaled internally by the spectral norms of `A` and `H`,
/// so the tolerances in [`SolverOptions`] apply to a normalized problem.
pub fn solve_sector_lmi(problem: &LmiProblem, opts: &SolverOptions) -> Result<LmiSolution> {
    let max_re = linalg::max_eig_real(&problem.a);
    if max_re >= 0.0 {
        return Err(Error::Infeasible {
            max_eig_real: max_re,
        });
    }
    let s = linalg::spectral_norm(&problem.a);
    let h0 = linalg::spectral_norm(&problem.h);
    let a_hat = &problem.a / s;
    let h_hat = &problem.h / h0;

    let (y_raw, alpha_raw, rho) = barrier_minimize(&a_hat, &h_hat, opts)?;
    let alpha_hat = alpha_raw * (1.0 + ALPHA_BACKOFF);
    let y_hat = recenter_y(&a_hat, &h_hat, &y_raw, alpha_hat, rho, opts.max_iter)?;

    let slack = -lmi_block(&a_hat, &h_hat, &y_hat, alpha_hat);
    let slack_eig = linalg::min_symmetric_eig(&slack);
    let y_eig = linalg::min_symmetric_eig(&y_hat);
    if slack_eig < opts.margin || y_eig < opts.margin {
        return Err(Error::Numerical(format!(
            "certificate slack fell below the required margin: slack {slack_eig:e}, y {y_eig:e}"
        )));
    }

    let alpha = alpha_hat * h0 * h0 / (s * s);
    Ok(LmiSolution {
        y: &y_hat / s,
        alpha,
        r_tilde: 1.0 / alpha.sqrt(),
    })
}

fn vech_basis(d: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            let mut e = DMatrix::zeros(d, d);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            out.push(e);
        }
    }
    out
}

fn trace_prod(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

fn chol_logdet(c: &Cholesky<f64, Dyn>) -> f64 {
    let l = c.l_dirty();
    let mut s = 0.0;
    for i in 0..l.nrows() {
        s += l[(i, i)].ln();
    }
    2.0 * s
}

/// Constant pieces of the affine map `θ ↦ (S₁, S₂)` with `S₁ = −LMI` and
/// `S₂ = Y`: the symmetric basis of `Y`, the per-coordinate blocks `K₁`, the
/// α block, and the θ-independent block `C₀`.
#[allow(clippy::type_complexity)]
fn sector_bases(
    a: &DMatrix<f64>,
    h: &DMatrix<f64>,
) -> (
    Vec<DMatrix<f64>>,
    Vec<DMatrix<f64>>,
    DMatrix<f64>,
    DMatrix<f64>,
) {
    let d = a.nrows();
    let p = h.nrows();
    let n1 = 2 * d + p;
    let basis = vech_basis(d);
    let k1: Vec<DMatrix<f64>> = basis
        .iter()
        .map(|e| {
            let mut k = DMatrix::zeros(n1, n1);
            let ae = a * e;
            k.view_mut((0, 0), (d, d))
                .copy_from(&(-(&ae + ae.transpose())));
            let eh = e * h.transpose();
            k.view_mut((0, 2 * d), (d, p)).copy_from(&(-&eh));
            k.view_mut((2 * d, 0), (p, d)).copy_from(&(-eh.transpose()));
            k
        })
        .collect();
    let mut k1_alpha = DMatrix::zeros(n1, n1);
    k1_alpha
        .view_mut((2 * d, 2 * d), (p, p))
        .copy_from(&DMatrix::identity(p, p));
    let c0 = {
        let mut c = DMatrix::zeros(n1, n1);
        let id = DMatrix::identity(d, d);
        c.view_mut((0, d), (d, d)).copy_from(&(-&id));
        c.view_mut((d, 0), (d, d)).copy_from(&(-&id));
        c.view_mut((d, d), (d, d)).copy_from(&id);
        c
    };
    (basis, k1, k1_alpha, c0)
}

/// Indicator for the vech coordinates that sit on the diagonal of `Y`, so
/// that `tr Y = Σ θ_m` over the flagged coordinates.
fn diag_coords(d: usize) -> Vec<bool> {
    let mut flags = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            flags.push(i == j);
        }
    }
    flags
}

/// Barrier minimization of `t·α − log det(−LMI) − log det(Y) − log(ρ − tr Y)`
/// over `θ = (vech(Y), α)` with Newton centering steps.
///
/// The trace cap matters: directions of `Y` that are invisible to `H` and
/// leave `A Y + Y Aᵀ` negative can grow without ever touching the LMI, so the
/// bare barrier has no analytic center and Newton drifts along the ray until
/// the floats overflow. `ρ` is set four decades above the starting trace,
/// far from any optimum the gap tolerance can distinguish.
fn barrier_minimize(
    a: &DMatrix<f64>,
    h: &DMatrix<f64>,
    opts: &SolverOptions,
) -> Result<(DMatrix<f64>, f64, f64)> {
    let d = a.nrows();
    let p = h.nrows();
    let n1 = 2 * d + p;
    let nv = d * (d + 1) / 2 + 1;
    let nu = (n1 + d + 1) as f64;

    let (basis, k1, k1_alpha, c0) = sector_bases(a, h);
    let diag = diag_coords(d);

    let assemble = |theta: &DVector<f64>| {
        let mut s1 = c0.clone();
        let mut s2 = DMatrix::zeros(d, d);
        for m in 0..nv - 1 {
            s1 += &k1[m] * theta[m];
            s2 += &basis[m] * theta[m];
        }
        s1 += &k1_alpha * theta[nv - 1];
        (s1, s2)
    };
    let trace_y = |theta: &DVector<f64>| -> f64 {
        diag.iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(|(m, _)| theta[m])
            .sum()
    };

    // Strictly feasible start: A Y₀ + Y₀ Aᵀ = −2I leaves a unit of slack in
    // the Schur complement once α exceeds ‖H Y₀‖².
    let y0 = linalg::solve_lyapunov(a, &(DMatrix::identity(d, d) * 2.0))?;
    let y0 = (&y0 + y0.transpose()) * 0.5;
    let alpha0 = 2.0 * linalg::spectral_norm(&(h * &y0)).powi(2) + 1.0;
    let rho = 1e4 * y0.trace().max(1.0);
    let mut theta = DVector::zeros(nv);
    let mut m = 0;
    for i in 0..d {
        for j in i..d {
            theta[m] = y0[(i, j)];
            m += 1;
        }
    }
    theta[nv - 1] = alpha0;
    {
        let (s1, s2) = assemble(&theta);
        if s1.cholesky().is_none() || s2.cholesky().is_none() || trace_y(&theta) >= rho {
            return Err(Error::Numerical(
                "barrier initialization is infeasible".into(),
            ));
        }
    }

    let mut t = 1.0 / alpha0.max(1.0);
    for _outer in 0..200 {
        for _ in 0..opts.max_iter {
            let (s1, s2) = assemble(&theta);
            let (Some(c1), Some(c2)) = (s1.cholesky(), s2.cholesky()) else {
                return Err(Error::Numerical(
                    "barrier iterate left the feasible cone".into(),
                ));
            };
            let s1_inv = c1.inverse();
            let s2_inv = c2.inverse();
            let s3 = rho - trace_y(&theta);

            let mut w1: Vec<DMatrix<f64>> = Vec::with_capacity(nv);
            let mut w2: Vec<Option<DMatrix<f64>>> = Vec::with_capacity(nv);
            let mut grad = DVector::zeros(nv);
            for m in 0..nv - 1 {
                let wa = &s1_inv * &k1[m];
                let wb = &s2_inv * &basis[m];
                grad[m] = -wa.trace() - wb.trace();
                w1.push(wa);
                w2.push(Some(wb));
            }
            let wa = &s1_inv * &k1_alpha;
            grad[nv - 1] = t - wa.trace();
            w1.push(wa);
            w2.push(None);

            let mut g3 = DVector::zeros(nv);
            for m in 0..nv - 1 {
                if diag[m] {
                    g3[m] = 1.0 / s3;
                }
            }
            grad += &g3;

            let mut hess = DMatrix::zeros(nv, nv);
            for i in 0..nv {
                for j in i..nv {
                    let mut v = trace_prod(&w1[i], &w1[j]);
                    if let (Some(wi), Some(wj)) = (&w2[i], &w2[j]) {
                        v += trace_prod(wi, wj);
                    }
                    v += g3[i] * g3[j];
                    hess[(i, j)] = v;
                    hess[(j, i)] = v;
                }
            }

            let neg_grad = -&grad;
            let delta = match hess.clone().cholesky() {
                Some(c) => c.solve(&neg_grad),
                None => hess.lu().solve(&neg_grad).ok_or_else(|| {
                    Error::Numerical("singular Newton system in the barrier solver".into())
                })?,
            };
            let lambda2 = -grad.dot(&delta);
            if lambda2 < 1e-10 {
                break;
            }

            let f0 = t * theta[nv - 1] - chol_logdet(&c1) - chol_logdet(&c2) - s3.ln();
            let slope = grad.dot(&delta);
            let mut step = 1.0;
            let mut accepted = false;
            while step > 1e-20 {
                let trial = &theta + &delta * step;
                let s3_t = rho - trace_y(&trial);
                if trial[nv - 1] > 0.0 && s3_t > 0.0 {
                    let (ts1, ts2) = assemble(&trial);
                    if let (Some(tc1), Some(tc2)) = (ts1.cholesky(), ts2.cholesky()) {
                        let ft =
                            t * trial[nv - 1] - chol_logdet(&tc1) - chol_logdet(&tc2) - s3_t.ln();
                        if ft <= f0 + 0.25 * step * slope {
                            theta = trial;
                            accepted = true;
                            break;
                        }
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                if lambda2 > 1e-6 {
                    return Err(Error::Numerical("barrier line search stalled".into()));
                }
                break;
            }
        }
        let alpha = theta[nv - 1];
        if nu / t < opts.tol * alpha.max(1e-3) {
            let mut y = DMatrix::zeros(d, d);
            let mut m = 0;
            for i in 0..d {
                for j in i..d {
                    y[(i, j)] = theta[m];
                    y[(j, i)] = theta[m];
                    m += 1;
                }
            }
            return Ok((y, alpha, rho));
        }
        t *= 10.0;
    }
    Err(Error::Numerical(
        "barrier homotopy failed to converge".into(),
    ))
}

/// Newton centering of `Y` alone at a fixed `α`: minimizes
/// `−log det(−LMI) − log det(Y) − log(ρ − tr Y)` starting from a feasible
/// `y_start`. Called with α inflated by [`ALPHA_BACKOFF`], this moves the
/// certificate strictly inside the cone before the margin check.
fn recenter_y(
    a: &DMatrix<f64>,
    h: &DMatrix<f64>,
    y_start: &DMatrix<f64>,
    alpha: f64,
    rho: f64,
    max_iter: usize,
) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    let nv = d * (d + 1) / 2;
    let (basis, k1, k1_alpha, c0) = sector_bases(a, h);
    let diag = diag_coords(d);
    let c_fixed = &c0 + &k1_alpha * alpha;

    let mut theta = DVector::zeros(nv);
    let mut m = 0;
    for i in 0..d {
        for j in i..d {
            theta[m] = y_start[(i, j)];
            m += 1;
        }
    }

    let assemble = |theta: &DVector<f64>| {
        let mut s1 = c_fixed.clone();
        let mut s2 = DMatrix::zeros(d, d);
        for m in 0..nv {
            s1 += &k1[m] * theta[m];
            s2 += &basis[m] * theta[m];
        }
        (s1, s2)
    };
    let trace_y = |theta: &DVector<f64>| -> f64 {
        diag.iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(|(m, _)| theta[m])
            .sum()
    };

    for _ in 0..max_iter {
        let (s1, s2) = assemble(&theta);
        let (Some(c1), Some(c2)) = (s1.cholesky(), s2.cholesky()) else {
            return Err(Error::Numerical(
                "recentering left the feasible cone".into(),
            ));
        };
        let s1_inv = c1.inverse();
        let s2_inv = c2.inverse();
        let s3 = rho - trace_y(&theta);
        if s3 <= 0.0 {
            return Err(Error::Numerical(
                "recentering left the feasible cone".into(),
            ));
        }

        let mut w1: Vec<DMatrix<f64>> = Vec::with_capacity(nv);
        let mut w2: Vec<DMatrix<f64>> = Vec::with_capacity(nv);
        let mut grad = DVector::zeros(nv);
        let mut g3 = DVector::zeros(nv);
        for m in 0..nv {
            let wa = &s1_inv * &k1[m];
            let wb = &s2_inv * &basis[m];
            grad[m] = -wa.trace() - wb.trace();
            if diag[m] {
                g3[m] = 1.0 / s3;
            }
            w1.push(wa);
            w2.push(wb);
        }
        grad += &g3;

        let mut hess = DMatrix::zeros(nv, nv);
        for i in 0..nv {
            for j in i..nv {
                let v = trace_prod(&w1[i], &w1[j]) + trace_prod(&w2[i], &w2[j]) + g3[i] * g3[j];
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }

        let neg_grad = -&grad;
        let delta = match hess.clone().cholesky() {
            Some(c) => c.solve(&neg_grad),
            None => hess.lu().solve(&neg_grad).ok_or_else(|| {
                Error::Numerical("singular Newton system in the recentering solver".into())
            })?,
        };
        let lambda2 = -grad.dot(&delta);
        if lambda2 < 1e-11 {
            break;
        }

        let f0 = -chol_logdet(&c1) - chol_logdet(&c2) - s3.ln();
        let slope = grad.dot(&delta);
        let mut step = 1.0;
        let mut accepted = false;
        while step > 1e-20 {
            let trial = &theta + &delta * step;
            let s3_t = rho - trace_y(&trial);
            if s3_t > 0.0 {
                let (ts1, ts2) = assemble(&trial);
                if let (Some(tc1), Some(tc2)) = (ts1.cholesky(), ts2.cholesky()) {
                    let ft = -chol_logdet(&tc1) - chol_logdet(&tc2) - s3_t.ln();
                    if ft <= f0 + 0.25 * step * slope {
                        theta = trial;
                        accepted = true;
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        if !accepted {
            if lambda2 > 1e-6 {
                return Err(Error::Numerical("recentering line search stalled".into()));
            }
            break;
        }
    }

    let mut y = DMatrix::zeros(d, d);
    let mut m = 0;
    for i in 0..d {
        for j in i..d {
            y[(i, j)] = theta[m];
            y[(j, i)] = theta[m];
            m += 1;
        }
    }
    Ok(y)
}

/// Real similarity transform built from the eigenvectors of `a`.
///
/// Eigenvalues are sorted by ascending real part (conjugate pairs kept
/// adjacent, positive imaginary part first). Real eigenvalues contribute
/// their eigenvector; a conjugate pair contributes the real and imaginary
/// parts of its eigenvector, rotated so the two columns are orthogonal with
/// the real part no shorter than the imaginary part. All columns are
/// normalized and signed so their largest entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTransform {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    pub cond: f64,
}

pub fn modal_transform(a: &DMatrix<f64>) -> Result<ModalTransform> {
    let d = a.nrows();
    let eig_list = a.complex_eigenvalues();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        let (u, v) = (eig_list[i], eig_list[j]);
        u.re.partial_cmp(&v.re)
            .unwrap()
            .then(u.im.abs().partial_cmp(&v.im.abs()).unwrap())
            .then(v.im.partial_cmp(&u.im).unwrap())
    });
    let sorted: Vec<Complex<f64>> = order.iter().map(|&i| eig_list[i]).collect();

    let mut t = DMatrix::zeros(d, d);
    let mut eigenvalues = Vec::with_capacity(d);
    let mut col = 0;
    while col < d {
        let lam = sorted[col];
        if lam.im == 0.0 {
            let v = linalg::eigenvector(a, lam)?;
            let k = dominant_index(&v);
            let phase = v[k] / v[k].norm();
            let mut real = DVector::from_fn(d, |i, _| (v[i] * phase.conj()).re);
            normalize_column(&mut real);
            t.column_mut(col).copy_from(&real);
            eigenvalues.push(lam);
            col += 1;
        } else {
            if col + 1 >= d {
                return Err(Error::Numerical("unpaired complex eigenvalue".into()));
            }
            let lam_pos = if lam.im > 0.0 { lam } else { lam.conj() };
            let v = linalg::eigenvector(a, lam_pos)?;
            let pr0 = DVector::from_fn(d, |i, _| v[i].re);
            let qi0 = DVector::from_fn(d, |i, _| v[i].im);
            // rotate the phase so Re(v) ⊥ Im(v)
            let phi = 0.5 * (2.0 * pr0.dot(&qi0)).atan2(qi0.dot(&qi0) - pr0.dot(&pr0));
            let (sn, cs) = phi.sin_cos();
            let mut pr = &pr0 * cs - &qi0 * sn;
            let mut qi = &pr0 * sn + &qi0 * cs;
            if pr.norm() < qi.norm() {
                let tmp = pr;
                pr = -qi;
                qi = tmp;
            }
            normalize_column(&mut pr);
            normalize_column(&mut qi);
            t.column_mut(col).copy_from(&pr);
            t.column_mut(col + 1).copy_from(&qi);
            eigenvalues.push(lam_pos);
            eigenvalues.push(lam_pos.conj());
            col += 2;
        }
    }

    let cond = linalg::cond_2(&t);
    if !cond.is_finite() || cond > 1e12 {
        return Err(Error::IllConditionedTransform { cond });
    }
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditionedTransform { cond })?;
    Ok(ModalTransform {
        t,
        t_inv,
        eigenvalues,
        cond,
    })
}

fn dominant_index(v: &CVector) -> usize {
    let mut k = 0;
    for i in 1..v.len() {
        if v[i].norm() > v[k].norm() {
            k = i;
        }
    }
    k
}

fn normalize_column(v: &mut DVector<f64>) {
    let n = v.norm();
    *v /= n;
    let mut k = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < 0.0 {
        v.neg_mut();
    }
}

/// How a modal-coordinate sector gain is pulled back to a bound on the
/// dominant remainder component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackMap {
    /// `r = r̃ / ‖T⁻¹‖₂`, valid for a remainder of arbitrary direction.
    Full,
    /// `r = r̃ / ‖T⁻¹ e_k‖`, exact when the remainder lives on coordinate `k`.
    Column(usize),
}

pub fn sector_back_map(r_tilde: f64, t_inv: &DMatrix<f64>, map: BackMap) -> f64 {
    match map {
        BackMap::Full => r_tilde / linalg::spectral_norm(t_inv),
        BackMap::Column(k) => r_tilde / t_inv.column(k).norm(),
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub solver: SolverOptions,
    /// Solve the LMI in eigenvector coordinates of `A*`.
    pub use_modal: bool,
    /// Coordinate of the reduced state entering the sector weight.
    pub h_coord: usize,
    pub back_map: BackMap,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            use_modal: true,
            h_coord: 1,
            back_map: BackMap::Column(1),
        }
    }
}

/// A solved sector certificate. `a` and `h` are the matrices the LMI was
/// solved with (modal coordinates when a transform is present), `r_tilde` the
/// certified gain there, and `r` its pull-back through the transform.
#[derive(Debug, Clone)]
pub struct SectorCertificate {
    pub a: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub alpha: f64,
    pub r_tilde: f64,
    pub r: f64,
    pub back_map: BackMap,
    pub transform: Option<ModalTransform>,
}

/// Full certification pipeline for a reduced model: modal transform, LMI
/// solve and back-mapping of the certified gain.
pub fn certify_sector(model: &ReducedModel, opts: &CertifyOptions) -> Result<SectorCertificate> {
    let d = model.dim();
    if opts.h_coord >= d {
        return Err(Error::Config(format!(
            "sector coordinate {} out of range for reduced dimension {d}",
            opts.h_coord
        )));
    }
    if let BackMap::Column(k) = opts.back_map {
        if k >= d {
            return Err(Error::Config(format!(
                "back-map column {k} out of range for reduced dimension {d}"
            )));
        }
    }
    let mut h_sel = DMatrix::zeros(d, d);
    h_sel[(opts.h_coord, opts.h_coord)] = 1.0;

    let (a_lmi, h_lmi, transform) = if opts.use_modal {
        let mt = modal_transform(&model.a_star)?;
        let a_lmi = &mt.t_inv * &model.a_star * &mt.t;
        let h_lmi = &h_sel * &mt.t;
        (a_lmi, h_lmi, Some(mt))
    } else {
        (model.a_star.clone(), h_sel, None)
    };

    let problem = LmiProblem::new(a_lmi, h_lmi)?;
    let sol = solve_sector_lmi(&problem, &opts.solver)?;
    let r = match &transform {
        Some(mt) => sector_back_map(sol.r_tilde, &mt.t_inv, opts.back_map),
        None => sol.r_tilde,
    };
    let p = sol
        .y
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("certificate Y is singular".into()))?;
    Ok(SectorCertificate {
        a: problem.a,
        h: problem.h,
        y: sol.y,
        p,
        alpha: sol.alpha,
        r_tilde: sol.r_tilde,
        r,
        back_map: opts.back_map,
        transform,
    })
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    /// Smallest eigenvalue of the rescaled `Y`.
    pub y_min_eig: f64,
    /// Smallest eigenvalue of the rescaled `−lmi_block`.
    pub slack_min_eig: f64,
    /// Smallest eigenvalue of `Q = −(AᵀP + PA)`.
    pub q_min_eig: f64,
    pub samples: usize,
    pub failures: usize,
    /// Worst sample margin, relative to the quadratic term.
    pub min_relative_margin: f64,
    pub passed: bool,
}

/// Re-derives the certificate conditions from scratch: positive definiteness
/// of the rescaled blocks and, on random directions `z`, strict negativity of
/// `−zᵀQz + 2‖Pz‖ r̃ ‖Hz‖`, the Lyapunov derivative bound the sector gain
/// promises.
pub fn verify_certificate(cert: &SectorCertificate, samples: usize, seed: u64) -> VerifyReport {
    let s = linalg::spectral_norm(&cert.a);
    let h0 = linalg::spectral_norm(&cert.h);
    let y_hat = &cert.y * s;
    let alpha_hat = cert.alpha * s * s / (h0 * h0);
    let slack = -lmi_block(&(&cert.a / s), &(&cert.h / h0), &y_hat, alpha_hat);
    let y_min_eig = linalg::min_symmetric_eig(&y_hat);
    let slack_min_eig = linalg::min_symmetric_eig(&slack);
    let q = -(cert.a.transpose() * &cert.p + &cert.p * &cert.a);
    let q_min_eig = linalg::min_symmetric_eig(&q);

    let d = cert.a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0usize;
    let mut min_relative_margin = f64::INFINITY;
    for _ in 0..samples {
        let z = random_direction(&mut rng, d);
        let quad = (&q * &z).dot(&z);
        let cross = 2.0 * (&cert.p * &z).norm() * cert.r_tilde * (&cert.h * &z).norm();
        if quad <= 0.0 {
            failures += 1;
            min_relative_margin = f64::NEG_INFINITY;
            continue;
        }
        let rel = (quad - cross) / quad;
        if rel <= 0.0 {
            failures += 1;
        }
        min_relative_margin = min_relative_margin.min(rel);
    }

    let passed = y_min_eig >= CERTIFICATE_MARGIN
        && slack_min_eig >= CERTIFICATE_MARGIN
        && q_min_eig > 0.0
        && failures == 0;
    VerifyReport {
        y_min_eig,
        slack_min_eig,
        q_min_eig,
        samples,
        failures,
        min_relative_margin,
        passed,
    }
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let z = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
        let n = z.norm();
        if n > 1e-3 {
            return z / n;
        }
    }
}

/// Feasibility of the sector LMI at a given α, tested through the associated
/// Hamiltonian: the LMI is feasible exactly when
/// `[[A, I/α], [−HᵀH, −Aᵀ]]` has no eigenvalue on the imaginary axis.
pub fn lmi_feasible(a: &DMatrix<f64>, h: &DMatrix<f64>, alpha: f64) -> bool {
    let d = a.nrows();
    let mut ham = DMatrix::zeros(2 * d, 2 * d);
    ham.view_mut((0, 0), (d, d)).copy_from(a);
    ham.view_mut((0, d), (d, d))
        .copy_from(&(DMatrix::identity(d, d) / alpha));
    ham.view_mut((d, 0), (d, d))
        .copy_from(&(-(h.transpose() * h)));
    ham.view_mut((d, d), (d, d)).copy_from(&(-a.transpose()));
    let eigs = ham.complex_eigenvalues();
    let max_mod = eigs.iter().map(|e| e.norm()).fold(0.0, f64::max);
    eigs.iter().all(|e| e.re.abs() > 1e-9 * max_mod)
}

/// Independent computation of the optimal sector gain by geometric bisection
/// on α with the Hamiltonian feasibility test.
pub fn min_r_tilde_bisection(a: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<f64> {
    let max_re = linalg::max_eig_real(a);
    if max_re >= 0.0 {
        return Err(Error::Infeasible {
            max_eig_real: max_re,
        });
    }
    let s = linalg::spectral_norm(a);
    let h0 = linalg::spectral_norm(h);
    if h0 == 0.0 {
        return Err(Error::Config("sector weight must be nonzero".into()));
    }
    let a_hat = a / s;
    let h_hat = h / h0;

    let (mut lo, mut hi);
    if lmi_feasible(&a_hat, &h_hat, 1.0) {
        hi = 1.0;
        lo = 0.25;
        while lmi_feasible(&a_hat, &h_hat, lo) {
            hi = lo;
            lo /= 4.0;
            if lo < 1e-30 {
                return Err(Error::Numerical("sector gain appears unbounded".into()));
            }
        }
    } else {
        lo = 1.0;
        hi = 4.0;
        while !lmi_feasible(&a_hat, &h_hat, hi) {
            lo = hi;
            hi *= 4.0;
            if hi > 1e30 {
                return Err(Error::Numerical(
                    "no feasible sector gain found by bisection".into(),
                ));
            }
        }
    }
    for _ in 0..120 {
        let mid = (lo * hi).sqrt();
        if lmi_feasible(&a_hat, &h_hat, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((s / h0) / hi.sqrt())
}
