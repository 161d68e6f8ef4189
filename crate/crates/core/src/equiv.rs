//! Equivalent control on the sliding surface: the continuous closed-loop
//! field, its equilibria, the linearization, the exact nonlinear remainder
//! and the order reduction onto the surface.

use nalgebra::{DMatrix, DVector};

use crate::model::{surface_value, SlidingSurface, SwitchedAffineSystem};
use crate::{Error, Result};

/// `u_eq = −(m·(Cx + D))⁻¹ · m·(Ax + B)`, the control that keeps the state on
/// the surface.
pub fn equivalent_control(
    sys: &SwitchedAffineSystem,
    surface: &SlidingSurface,
    x: &DVector<f64>,
) -> Result<f64> {
    let den = surface.m.dot(&(&sys.c * x + &sys.d));
    if den == 0.0 || !den.is_finite() {
        return Err(Error::EquivalentControlSingular { denominator: den });
    }
    let num = surface.m.dot(&(&sys.a * x + &sys.b));
    Ok(-num / den)
}

/// Closed-loop field `A x + B + (C x + D) u_eq(x)`.
pub fn closed_loop_field(
    sys: &SwitchedAffineSystem,
    surface: &SlidingSurface,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let u = equivalent_control(sys, surface, x)?;
    Ok(sys.field(x, u))
}

/// Which physical branch an equilibrium belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchTag {
    /// `u_eq* ∈ [0, 1]`: reachable by the switching realization.
    Feasible,
    /// Mathematically valid solution whose equivalent control leaves [0, 1].
    InfeasibleControl,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub x_star: DVector<f64>,
    pub u_eq_star: f64,
    /// Max-norm of the closed-loop field at `x_star`.
    pub residual: f64,
    pub branch_tag: BranchTag,
}

pub fn branch_tag_for(u_eq: f64) -> BranchTag {
    if (-1e-9..=1.0 + 1e-9).contains(&u_eq) {
        BranchTag::Feasible
    } else {
        BranchTag::InfeasibleControl
    }
}

const MAX_NEWTON_ITERATIONS: usize = 100;

/// Finds a sliding equilibrium by a damped Newton iteration on the stacked
/// system `[closed_loop_field(x); S(x)] = 0` (n+1 equations, n unknowns; the
/// field has rank n−1 on the surface, so the surface equation pins the free
/// parameter).
pub fn find_equilibrium(
    sys: &SwitchedAffineSystem,
    surface: &SlidingSurface,
    guess: &DVector<f64>,
) -> Result<EquilibriumResult> {
    let n = sys.dim();
    // The field rows carry the circuit scale (easily 1e6) while the surface
    // row is O(1); weigh both blocks to comparable size so the least-squares
    // step is not dominated by the field block alone.
    let field_scale = crate::linalg::inf_norm(&sys.a)
        + crate::linalg::inf_norm(&sys.c)
        + sys.b.amax()
        + sys.d.amax();
    let weights = |x: &DVector<f64>| -> (f64, f64) {
        let span = 1.0 + x.amax();
        (
            1.0 / (1.0 + field_scale * span),
            1.0 / (1.0 + surface.m.amax() * span + surface.m5.abs()),
        )
    };
    let residual_vec = |x: &DVector<f64>, wf: f64, ws: f64| -> Result<DVector<f64>> {
        let f = closed_loop_field(sys, surface, x)?;
        let s = surface_value(surface, x)?;
        let mut r = DVector::zeros(n + 1);
        r.rows_mut(0, n).copy_from(&(f * wf));
        r[n] = s * ws;
        Ok(r)
    };

    let mut x = guess.clone();
    let (mut wf, mut ws) = weights(&x);
    let mut f = residual_vec(&x, wf, ws)?;
    let mut lambda = 1e-3;

    for iter in 0..MAX_NEWTON_ITERATIONS {
        // central finite-difference Jacobian of the weighted residual
        let mut jac = DMatrix::zeros(n + 1, n);
        for j in 0..n {
            let h = (1e-6f64).max(1e-6 * x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (residual_vec(&xp, wf, ws)?, residual_vec(&xm, wf, ws)?);
            jac.column_mut(j).copy_from(&((fp - fm) / (2.0 * h)));
        }

        let jtj = jac.transpose() * &jac;
        let jtf = jac.transpose() * &f;
        let mut step = None;
        for _ in 0..25 {
            let damped = &jtj + DMatrix::<f64>::identity(n, n) * (lambda * jtj.trace() / n as f64);
            let Some(delta) = damped.lu().solve(&(-&jtf)) else {
                lambda *= 4.0;
                continue;
            };
            let trial = &x + &delta;
            match residual_vec(&trial, wf, ws) {
                Ok(ft) if ft.norm() <= f.norm() => {
                    step = Some((trial, delta));
                    break;
                }
                _ => lambda *= 4.0,
            }
        }
        let Some((trial, delta)) = step else {
            return Err(Error::NoEquilibrium {
                iterations: iter,
                residual: f.amax() / wf.min(ws),
            });
        };
        lambda = (lambda * 0.3).max(1e-14);
        x = trial;
        let done = delta.amax() <= 1e-13 * (1.0 + x.amax());
        (wf, ws) = weights(&x);
        f = residual_vec(&x, wf, ws)?;
        if done {
            break;
        }
    }

    let gate = 1.0 + crate::linalg::inf_norm(&sys.a) * (1.0 + x.amax());
    let field = closed_loop_field(sys, surface, &x)?;
    let residual = field.amax().max(surface_value(surface, &x)?.abs());
    if residual > 1e-10 * gate {
        return Err(Error::NoEquilibrium {
            iterations: MAX_NEWTON_ITERATIONS,
            residual,
        });
    }
    let u_eq_star = equivalent_control(sys, surface, &x)?;
    Ok(EquilibriumResult {
        x_star: x,
        u_eq_star,
        residual,
        branch_tag: branch_tag_for(u_eq_star),
    })
}

/// Jacobian `A₁` of the closed-loop field at `x_star`.
///
/// With `num = m·(Ax + B)` and `den = m·(Cx + D)` the equivalent control has
/// gradient `∇u_eq = −(den·Aᵀm − num·Cᵀm)/den²`, giving
/// `A₁ = A + u_eq C + (Cx + D) ∇u_eqᵀ`.
pub fn linearize(
    sys: &SwitchedAffineSystem,
    surface: &SlidingSurface,
    x_star: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let den = surface.m.dot(&(&sys.c * x_star + &sys.d));
    if den == 0.0 || !den.is_finite() {
        return Err(Error::EquivalentControlSingular { denominator: den });
    }
    let num = surface.m.dot(&(&sys.a * x_star + &sys.b));
    let u_eq = -num / den;
    let at_m = sys.a.transpose() * &surface.m;
    let ct_m = sys.c.transpose() * &surface.m;
    let grad_u = -(at_m * den - ct_m * num) / (den * den);
    let cx_d = &sys.c * x_star + &sys.d;
    Ok(&sys.a + &sys.c * u_eq + cx_d * grad_u.transpose())
}

/// Exact remainder `h(x) = closed_loop_field(x) − A₁ (x − x*)`.
pub fn remainder(
    sys: &SwitchedAffineSystem,
    surface: &SlidingSurface,
    x_star: &DVector<f64>,
    a1: &DMatrix<f64>,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    let f = closed_loop_field(sys, surface, x)?;
    Ok(f - a1 * (x - x_star))
}

/// The closed loop restricted to the surface, with one state variable
/// eliminated through `m·y = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub a_star: DMatrix<f64>,
    /// Index of the eliminated deviation variable `y_k`.
    pub eliminated_index: usize,
    /// Coefficients expressing `y_k` from the remaining deviations:
    /// `y_k = substitution · z`.
    pub substitution: DVector<f64>,
    pub x_star: DVector<f64>,
    sys: SwitchedAffineSystem,
    surface: SlidingSurface,
}

/// Default elimination choice: the variable with the largest `|m_k|`, ties
/// broken towards the largest index.
pub fn default_elimination_index(surface: &SlidingSurface) -> usize {
    let mut k = 0;
    for i in 1..surface.m.len() {
        if surface.m[i].abs() >= surface.m[k].abs() {
            k = i;
        }
    }
    k
}

pub fn reduce(
    sys: &SwitchedAffineSystem,
    surface: &SlidingSurface,
    x_star: &DVector<f64>,
    a1: &DMatrix<f64>,
) -> Result<ReducedModel> {
    reduce_with_index(sys, surface, x_star, a1, default_elimination_index(surface))
}

pub fn reduce_with_index(
    sys: &SwitchedAffineSystem,
    surface: &SlidingSurface,
    x_star: &DVector<f64>,
    a1: &DMatrix<f64>,
    k: usize,
) -> Result<ReducedModel> {
    let n = sys.dim();
    if k >= n {
        return Err(Error::Config(format!(
            "elimination index {k} out of range for n = {n}"
        )));
    }
    if surface.m[k] == 0.0 {
        return Err(Error::Config(format!(
            "cannot eliminate variable {k}: its surface coefficient is zero"
        )));
    }
    let mut substitution = DVector::zeros(n - 1);
    for (col, j) in (0..n).filter(|&j| j != k).enumerate() {
        substitution[col] = -surface.m[j] / surface.m[k];
    }

    // A* = (A₁ J) with row k dropped, where J lifts z back to y.
    let lift = lift_matrix(n, k, &substitution);
    let full = a1 * &lift;
    let a_star = drop_row(&full, k);

    Ok(ReducedModel {
        a_star,
        eliminated_index: k,
        substitution,
        x_star: x_star.clone(),
        sys: sys.clone(),
        surface: surface.clone(),
    })
}

fn lift_matrix(n: usize, k: usize, substitution: &DVector<f64>) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(n, n - 1);
    for (col, i) in (0..n).filter(|&i| i != k).enumerate() {
        j[(i, col)] = 1.0;
    }
    for col in 0..n - 1 {
        j[(k, col)] = substitution[col];
    }
    j
}

fn drop_row(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let rows: Vec<usize> = (0..m.nrows()).filter(|&i| i != k).collect();
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

impl ReducedModel {
    pub fn dim(&self) -> usize {
        self.a_star.nrows()
    }

    /// Full state for a reduced deviation: `x = x* + J z`.
    pub fn lift(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.x_star.len();
        let mut x = self.x_star.clone();
        for (col, i) in (0..n).filter(|&i| i != self.eliminated_index).enumerate() {
            x[i] += z[col];
        }
        x[self.eliminated_index] += self.substitution.dot(z);
        x
    }

    /// Drops the eliminated component of a deviation vector `y = x − x*`.
    pub fn project(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.x_star.len();
        DVector::from_iterator(
            n - 1,
            (0..n).filter(|&i| i != self.eliminated_index).map(|i| y[i]),
        )
    }

    /// Closed-loop field expressed in the reduced coordinates.
    pub fn reduced_field(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let x = self.lift(z);
        let f = closed_loop_field(&self.sys, &self.surface, &x).map_err(lift_domain)?;
        Ok(self.project(&f))
    }

    /// Exact reduced remainder `h*(z) = reduced_field(z) − A* z`.
    pub fn remainder_reduced(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.reduced_field(z)? - &self.a_star * z)
    }
}

fn lift_domain(e: Error) -> Error {
    match e {
        Error::EquivalentControlSingular { denominator } => Error::DomainError(format!(
            "equivalent control singular at the lifted state (denominator {denominator:e})"
        )),
        other => other,
    }
}
