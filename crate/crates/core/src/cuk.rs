//! Ćuk converter: system matrices for all conduction modes, the hybrid
//! automaton realizing the hysteresis switching law, and closed-form
//! equilibria and remainders for the two supported surface families.
//!
//! State order is `[i_l1, i_l2, v_c1, v_c2]`. With the sign conventions used
//! here the transfer capacitor voltage `v_c1` is positive and the output
//! voltage `v_c2` is negative at every feasible operating point.

use nalgebra::{Complex, DMatrix, DVector};

use crate::equiv::{branch_tag_for, EquilibriumResult};
use crate::model::{ModeDynamics, ModeId, SlidingSurface, SwitchedAffineSystem};
use crate::sim::{HybridAutomaton, LinearGuard, Transition};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CukParams {
    pub v_in: f64,
    pub l1: f64,
    pub l2: f64,
    pub c1: f64,
    pub c2: f64,
    pub r_load: f64,
}

impl CukParams {
    /// Reference design: 10 V input, 1 mH inductors, 1 µF transfer and 20 µF
    /// output capacitors, 5 Ω load.
    pub fn preset() -> Self {
        Self {
            v_in: 10.0,
            l1: 1e-3,
            l2: 1e-3,
            c1: 1e-6,
            c2: 20e-6,
            r_load: 5.0,
        }
    }

    /// Variant of the reference design with nanofarad capacitors.
    pub fn preset_literal_nanofarad() -> Self {
        Self {
            c1: 1e-9,
            c2: 20e-9,
            ..Self::preset()
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [self.v_in, self.l1, self.l2, self.c1, self.c2, self.r_load];
        if all.iter().any(|v| !v.is_finite()) || all[1..].iter().any(|v| *v <= 0.0) {
            return Err(Error::Config(
                "converter parameters must be finite and positive".into(),
            ));
        }
        Ok(())
    }
}

pub const STATE_LABELS: [&str; 4] = ["i_l1 [A]", "i_l2 [A]", "v_c1 [V]", "v_c2 [V]"];

/// Switched affine form of the converter in continuous conduction.
pub fn build_system(params: &CukParams) -> Result<SwitchedAffineSystem> {
    params.validate()?;
    let CukParams {
        v_in,
        l1,
        l2,
        c1,
        c2,
        r_load,
    } = *params;
    let mut a = DMatrix::zeros(4, 4);
    a[(0, 2)] = -1.0 / l1;
    a[(1, 3)] = 1.0 / l2;
    a[(2, 0)] = 1.0 / c1;
    a[(3, 1)] = -1.0 / c2;
    a[(3, 3)] = -1.0 / (r_load * c2);
    let b = DVector::from_row_slice(&[v_in / l1, 0.0, 0.0, 0.0]);
    let mut c = DMatrix::zeros(4, 4);
    c[(0, 2)] = 1.0 / l1;
    c[(1, 2)] = 1.0 / l2;
    c[(2, 0)] = -(1.0 / c1);
    c[(2, 1)] = -(1.0 / c1);
    let d = DVector::zeros(4);
    SwitchedAffineSystem::new(
        a,
        b,
        c,
        d,
        STATE_LABELS.iter().map(|s| s.to_string()).collect(),
    )
}

/// Discontinuous inductor current mode: both inductors share one loop, so
/// `i_l1 + i_l2` is constant (held at zero by the entry clamp).
pub fn build_dicm(params: &CukParams) -> Result<ModeDynamics> {
    params.validate()?;
    let ls = params.l1 + params.l2;
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 2)] = -1.0 / ls;
    m[(0, 3)] = -1.0 / ls;
    for j in 0..4 {
        m[(1, j)] = -m[(0, j)];
    }
    m[(2, 1)] = -1.0 / params.c1;
    m[(3, 1)] = -1.0 / params.c2;
    m[(3, 3)] = -1.0 / (params.r_load * params.c2);
    let mut b = DVector::zeros(4);
    b[0] = params.v_in / ls;
    b[1] = -b[0];
    Ok(ModeDynamics {
        id: ModeId::Dicm,
        m,
        b,
    })
}

/// Discontinuous capacitor voltage mode: the transfer capacitor is pinned at
/// zero while both semiconductor paths conduct.
pub fn build_dcvm(params: &CukParams) -> Result<ModeDynamics> {
    params.validate()?;
    let mut m = DMatrix::zeros(4, 4);
    m[(1, 3)] = 1.0 / params.l2;
    m[(3, 1)] = -1.0 / params.c2;
    m[(3, 3)] = -1.0 / (params.r_load * params.c2);
    let mut b = DVector::zeros(4);
    b[0] = params.v_in / params.l1;
    Ok(ModeDynamics {
        id: ModeId::Dcvm,
        m,
        b,
    })
}

/// Semiconductor realization of the switching cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Realization {
    /// Diode-based cell: inductor current and capacitor voltage can be
    /// pinned, adding the discontinuous modes.
    Unidirectional,
    /// Fully bidirectional cell; only the two CCM modes exist.
    Bidirectional,
}

/// Builds the hybrid automaton for the converter under hysteresis control of
/// the given surface. The switch turns on when `S < −Δ` and off when
/// `S > Δ`; diode guards come after the surface guard in priority.
pub fn build_automaton(
    params: &CukParams,
    surface: &SlidingSurface,
    realization: Realization,
) -> Result<HybridAutomaton> {
    let sys = build_system(params)?;
    if surface.m.len() != sys.dim() {
        return Err(Error::Config(format!(
            "surface has {} coefficients but the converter has {} states",
            surface.m.len(),
            sys.dim()
        )));
    }
    let mut automaton = HybridAutomaton::new();
    automaton.add_mode(sys.ccm_mode(ModeId::CcmOn));
    automaton.add_mode(sys.ccm_mode(ModeId::CcmOff));

    // S > Δ ⟺ Δ − S falls through zero
    let turn_off = || LinearGuard::new(-&surface.m, surface.delta + surface.m5);
    // S < −Δ ⟺ S + Δ falls through zero
    let turn_on = || LinearGuard::new(surface.m.clone(), surface.delta - surface.m5);

    automaton.add_transition(
        ModeId::CcmOn,
        Transition {
            guard: turn_off(),
            target: ModeId::CcmOff,
            clamp: false,
        },
    );
    automaton.add_transition(
        ModeId::CcmOff,
        Transition {
            guard: turn_on(),
            target: ModeId::CcmOn,
            clamp: false,
        },
    );

    if realization == Realization::Unidirectional {
        automaton.add_mode(build_dicm(params)?);
        automaton.add_mode(build_dcvm(params)?);
        // freewheeling diode blocks when the total inductor current reaches 0
        automaton.add_transition(
            ModeId::CcmOff,
            Transition {
                guard: LinearGuard::new(DVector::from_row_slice(&[1.0, 1.0, 0.0, 0.0]), 0.0),
                target: ModeId::Dicm,
                clamp: true,
            },
        );
        automaton.add_transition(
            ModeId::Dicm,
            Transition {
                guard: turn_on(),
                target: ModeId::CcmOn,
                clamp: false,
            },
        );
        // switch-path diode blocks when the transfer capacitor empties
        automaton.add_transition(
            ModeId::CcmOn,
            Transition {
                guard: LinearGuard::new(DVector::from_row_slice(&[0.0, 0.0, 1.0, 0.0]), 0.0),
                target: ModeId::Dcvm,
                clamp: true,
            },
        );
        automaton.add_transition(
            ModeId::Dcvm,
            Transition {
                guard: turn_off(),
                target: ModeId::CcmOff,
                clamp: false,
            },
        );
    }
    Ok(automaton)
}

fn equilibrium_from_x4(params: &CukParams, x1: f64, x4: f64) -> EquilibriumResult {
    let x2 = -x4 / params.r_load;
    let x3 = params.v_in - x4;
    let u_eq = -x4 / x3;
    EquilibriumResult {
        x_star: DVector::from_row_slice(&[x1, x2, x3, x4]),
        u_eq_star: u_eq,
        residual: 0.0,
        branch_tag: branch_tag_for(u_eq),
    }
}

/// Closed-form sliding equilibria for the surface `S = m1·i_l1 − m5`.
/// Both solution branches are returned, feasible first.
pub fn input_current_equilibria(
    params: &CukParams,
    m1: f64,
    m5: f64,
) -> Result<Vec<EquilibriumResult>> {
    params.validate()?;
    if m1 == 0.0 {
        return Err(Error::Config("m1 must be nonzero".into()));
    }
    let x1 = m5 / m1;
    let squared = x1 * params.v_in * params.r_load;
    if squared < 0.0 {
        return Err(Error::NoEquilibrium {
            iterations: 0,
            residual: squared.abs().sqrt(),
        });
    }
    let root = squared.sqrt();
    let mut out: Vec<EquilibriumResult> = [-root, root]
        .iter()
        .map(|&x4| equilibrium_from_x4(params, x1, x4))
        .collect();
    out.sort_by_key(|e| e.branch_tag != crate::equiv::BranchTag::Feasible);
    out.dedup_by(|a, b| a.x_star == b.x_star);
    Ok(out)
}

/// Closed-form sliding equilibria for `S = m1·i_l1 + m2·i_l2 − m5`: the
/// output voltage solves `m1·x4² − m2·v_in·x4 − m5·R·v_in = 0`.
pub fn weighted_sum_equilibria(
    params: &CukParams,
    m1: f64,
    m2: f64,
    m5: f64,
) -> Result<Vec<EquilibriumResult>> {
    params.validate()?;
    let roots: Vec<f64> = if m1 == 0.0 {
        if m2 == 0.0 {
            return Err(Error::Config("m1 and m2 must not both be zero".into()));
        }
        vec![-m5 * params.r_load / m2]
    } else {
        let disc =
            m2 * m2 * params.v_in * params.v_in + 4.0 * m1 * m5 * params.r_load * params.v_in;
        if disc < 0.0 {
            return Err(Error::NoEquilibrium {
                iterations: 0,
                residual: disc.abs().sqrt(),
            });
        }
        let sq = disc.sqrt();
        vec![
            (m2 * params.v_in - sq) / (2.0 * m1),
            (m2 * params.v_in + sq) / (2.0 * m1),
        ]
    };
    let mut out: Vec<EquilibriumResult> = roots
        .iter()
        .map(|&x4| {
            let x1 = x4 * x4 / (params.r_load * params.v_in);
            equilibrium_from_x4(params, x1, x4)
        })
        .collect();
    out.sort_by_key(|e| e.branch_tag != crate::equiv::BranchTag::Feasible);
    out.dedup_by(|a, b| a.x_star == b.x_star);
    Ok(out)
}

/// Closed-form reduced remainder component on the `v_c1` coordinate for the
/// input-current surface. The reduced deviations are `(y2, y3, y4)`; only
/// `y2` and `y3` enter.
pub fn input_current_remainder(
    params: &CukParams,
    x_star: &DVector<f64>,
    y2: f64,
    y3: f64,
) -> Result<f64> {
    let x3s = x_star[2];
    let den = (y3 + x3s) * x3s * params.c1;
    if den == 0.0 {
        return Err(Error::DomainError(format!(
            "remainder undefined at v_c1 deviation {y3} (pole of the equivalent control)"
        )));
    }
    Ok((-params.v_in * y2 * y3 + x_star[1] * y3 * y3) / den)
}

/// Closed-form reduced remainder component on the `v_c1` coordinate for the
/// weighted-current-sum surface. The reduced deviations are `(y1, y3, y4)`.
pub fn weighted_sum_remainder(
    params: &CukParams,
    m1: f64,
    m2: f64,
    x_star: &DVector<f64>,
    y1: f64,
    y3: f64,
    y4: f64,
) -> Result<f64> {
    let x3s = x_star[2];
    let x4s = x_star[3];
    let x3 = y3 + x3s;
    let weights = m1 * params.l2 + m2 * params.l1;
    let den = m2 * params.c1 * params.r_load * params.v_in * x3s * x3 * weights;
    if den == 0.0 {
        return Err(Error::DomainError(format!(
            "remainder undefined at v_c1 deviation {y3} (pole of the equivalent control)"
        )));
    }
    let first = m2 * x4s * y3 - params.r_load * params.v_in * (m1 - m2) * y1;
    let second =
        y3 * (m2 * params.l1 * x4s + m1 * params.l2 * params.v_in) - y4 * m2 * params.l1 * x3s;
    Ok(-(first / den) * second)
}

/// Eigenvalues of the switch-off dynamics, sorted by real part then
/// imaginary part.
pub fn off_mode_eigenvalues(params: &CukParams) -> Result<Vec<Complex<f64>>> {
    let sys = build_system(params)?;
    let mut eigs: Vec<Complex<f64>> = sys.a.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
    Ok(eigs)
}

/// Largest `v_c1` deviation at which the remainder, restricted to the
/// `(0, y3, 0)` axis, still satisfies `|h| ≤ r·|y3|`. Both families reduce
/// to `h(y3) = κ·y3²/(y3 + v_c1*)` on that axis, giving the crossing in
/// closed form. Returns the symmetric peak-to-peak bound `2·min|y3|`.
pub fn axis_crossing_ripple_bound(
    params: &CukParams,
    surface_m: (f64, f64),
    x_star: &DVector<f64>,
    r: f64,
) -> Result<f64> {
    let (m1, m2) = surface_m;
    let x3s = x_star[2];
    if x3s == 0.0 || r <= 0.0 {
        return Err(Error::DomainError(
            "axis crossing needs a positive sector slope and nonzero v_c1*".into(),
        ));
    }
    let kappa = if m2 == 0.0 {
        x_star[1] / (x3s * params.c1)
    } else {
        let weights = m1 * params.l2 + m2 * params.l1;
        -(m2 * x_star[3]) * (m2 * params.l1 * x_star[3] + m1 * params.l2 * params.v_in)
            / (m2 * params.c1 * params.r_load * params.v_in * x3s * weights)
    };
    // |κ|·y² = r·|y|·|y + x3*| has its nearest root at r·x3*/(|κ| + r)
    Ok(2.0 * r * x3s.abs() / (kappa.abs() + r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equiv::{self, BranchTag};
    use crate::lmi::{self, BackMap, CertifyOptions};
    use crate::model::mode_field;
    use crate::sim::{measure_cycle, simulate, SimOptions};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn input_current_surface(m5: f64, delta: f64) -> SlidingSurface {
        SlidingSurface::new(DVector::from_row_slice(&[1.0, 0.0, 0.0, 0.0]), m5, delta).unwrap()
    }

    fn weighted_sum_surface(m5: f64, delta: f64) -> SlidingSurface {
        SlidingSurface::new(DVector::from_row_slice(&[1.0, 1.0, 0.0, 0.0]), m5, delta).unwrap()
    }

    fn reduced_input_current() -> equiv::ReducedModel {
        let params = CukParams::preset();
        let sys = build_system(&params).unwrap();
        let surface = input_current_surface(0.5, 0.01);
        let eq = &input_current_equilibria(&params, 1.0, 0.5).unwrap()[0];
        let a1 = equiv::linearize(&sys, &surface, &eq.x_star).unwrap();
        equiv::reduce(&sys, &surface, &eq.x_star, &a1).unwrap()
    }

    fn reduced_weighted_sum() -> equiv::ReducedModel {
        let params = CukParams::preset();
        let sys = build_system(&params).unwrap();
        let surface = weighted_sum_surface(2.0, 0.01);
        let eq = &weighted_sum_equilibria(&params, 1.0, 1.0, 2.0).unwrap()[0];
        let a1 = equiv::linearize(&sys, &surface, &eq.x_star).unwrap();
        equiv::reduce(&sys, &surface, &eq.x_star, &a1).unwrap()
    }

    #[test]
    fn switch_on_field_at_the_reference_point() {
        let sys = build_system(&CukParams::preset()).unwrap();
        let x = DVector::from_row_slice(&[0.5, 1.0, 15.0, -5.0]);
        let f = mode_field(&sys.ccm_mode(ModeId::CcmOn), &x);
        let expected = [1e4, 1e4, -1e6, 0.0];
        for i in 0..4 {
            assert_relative_eq!(f[i], expected[i], max_relative = 1e-12, epsilon = 1e-9);
        }
    }

    #[test]
    fn switch_on_matrix_ignores_the_input_current_exactly() {
        let sys = build_system(&CukParams::preset()).unwrap();
        let on = sys.ccm_mode(ModeId::CcmOn);
        for i in 0..4 {
            assert_eq!(on.m[(i, 0)], 0.0);
        }
    }

    #[test]
    fn discontinuous_current_mode_conserves_the_current_sum_exactly() {
        let dicm = build_dicm(&CukParams::preset()).unwrap();
        for j in 0..4 {
            assert_eq!(dicm.m[(0, j)], -dicm.m[(1, j)]);
        }
        assert_eq!(dicm.b[0], -dicm.b[1]);
    }

    #[test]
    fn input_current_equilibria_match_the_reference_values() {
        let params = CukParams::preset();
        let eqs = input_current_equilibria(&params, 1.0, 0.5).unwrap();
        assert_eq!(eqs.len(), 2);
        let feasible = &eqs[0];
        assert_eq!(feasible.branch_tag, BranchTag::Feasible);
        let expected = [0.5, 1.0, 15.0, -5.0];
        for i in 0..4 {
            assert_relative_eq!(feasible.x_star[i], expected[i], max_relative = 1e-12);
        }
        assert_relative_eq!(feasible.u_eq_star, 1.0 / 3.0, max_relative = 1e-12);
        let other = &eqs[1];
        assert_eq!(other.branch_tag, BranchTag::InfeasibleControl);
        let expected = [0.5, -1.0, 5.0, 5.0];
        for i in 0..4 {
            assert_relative_eq!(other.x_star[i], expected[i], max_relative = 1e-12);
        }
        assert_relative_eq!(other.u_eq_star, -1.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_reference_collapses_to_the_idle_point() {
        let params = CukParams::preset();
        let eqs = input_current_equilibria(&params, 1.0, 0.0).unwrap();
        assert_eq!(eqs.len(), 1);
        let expected = [0.0, 0.0, 10.0, 0.0];
        for i in 0..4 {
            assert_eq!(eqs[0].x_star[i], expected[i]);
        }
    }

    #[test]
    fn weighted_sum_equilibria_match_the_reference_values() {
        let params = CukParams::preset();
        let s5 = 5f64.sqrt();
        let eqs = weighted_sum_equilibria(&params, 1.0, 1.0, 2.0).unwrap();
        let feasible = &eqs[0];
        assert_eq!(feasible.branch_tag, BranchTag::Feasible);
        let expected = [3.0 - s5, s5 - 1.0, 5.0 * (s5 + 1.0), 5.0 * (1.0 - s5)];
        for i in 0..4 {
            assert_relative_eq!(feasible.x_star[i], expected[i], max_relative = 1e-12);
        }
        assert_relative_eq!(feasible.u_eq_star, (3.0 - s5) / 2.0, max_relative = 1e-12);
        assert_eq!(eqs[1].branch_tag, BranchTag::InfeasibleControl);

        let eqs = weighted_sum_equilibria(&params, 1.0, 1.0, 4.0).unwrap();
        let expected = [2.0, 2.0, 20.0, -10.0];
        for i in 0..4 {
            assert_relative_eq!(eqs[0].x_star[i], expected[i], max_relative = 1e-12);
        }
        assert_relative_eq!(eqs[0].u_eq_star, 0.5, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_equilibria_agree_with_the_newton_solver() {
        let params = CukParams::preset();
        let sys = build_system(&params).unwrap();
        for (surface, eq) in [
            (
                input_current_surface(0.5, 0.01),
                input_current_equilibria(&params, 1.0, 0.5).unwrap()[0].clone(),
            ),
            (
                weighted_sum_surface(2.0, 0.01),
                weighted_sum_equilibria(&params, 1.0, 1.0, 2.0).unwrap()[0].clone(),
            ),
        ] {
            let guess = &eq.x_star * 1.3;
            let found = equiv::find_equilibrium(&sys, &surface, &guess).unwrap();
            assert!((found.x_star - &eq.x_star).amax() < 1e-9 * (1.0 + eq.x_star.amax()));
        }
    }

    #[test]
    fn reduced_matrix_for_the_input_current_surface() {
        let red = reduced_input_current();
        assert_eq!(red.eliminated_index, 0);
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                0.0, 1000.0, 1000.0, -333333.33, -66666.67, 0.0, -50000.0, 0.0, -10000.0,
            ],
        );
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    red.a_star[(i, j)],
                    expected[(i, j)],
                    max_relative = 1e-4,
                    epsilon = 1e-6
                );
            }
        }
        let mut eigs: Vec<Complex<f64>> =
            red.a_star.complex_eigenvalues().iter().copied().collect();
        eigs.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        assert_relative_eq!(eigs[0].re, -61315.3, max_relative = 1e-4);
        assert_relative_eq!(eigs[0].im, 0.0, epsilon = 1e-6);
        assert_relative_eq!(eigs[1].re, -7675.67, max_relative = 1e-4);
        assert_relative_eq!(eigs[1].im, -7057.74, max_relative = 1e-4);
    }

    #[test]
    fn reduced_matrix_for_the_weighted_sum_surface() {
        let red = reduced_weighted_sum();
        assert_eq!(red.eliminated_index, 1);
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                0.0, -500.0, -500.0, 1e6, -14589.80, 61803.40, 5e4, 0.0, -1e4,
            ],
        );
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    red.a_star[(i, j)],
                    expected[(i, j)],
                    max_relative = 1e-4,
                    epsilon = 1e-6
                );
            }
        }
        let mut eigs: Vec<Complex<f64>> =
            red.a_star.complex_eigenvalues().iter().copied().collect();
        eigs.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        assert_relative_eq!(eigs[2].re, -5659.58, max_relative = 1e-4);
        assert_relative_eq!(eigs[2].im, 22105.53, max_relative = 1e-4);
        assert_relative_eq!(eigs[0].re, -13270.64, max_relative = 1e-4);
    }

    #[test]
    fn certified_sector_gains_for_the_input_current_surface() {
        let cert =
            lmi::certify_sector(&reduced_input_current(), &CertifyOptions::default()).unwrap();
        assert_relative_eq!(cert.r_tilde, 8337.2, max_relative = 1e-4);
        assert_relative_eq!(cert.r, 7603.7, max_relative = 1e-4);
        let full = lmi::certify_sector(
            &reduced_input_current(),
            &CertifyOptions {
                back_map: BackMap::Full,
                ..CertifyOptions::default()
            },
        )
        .unwrap();
        assert_relative_eq!(full.r, 994.75, max_relative = 1e-4);
    }

    #[test]
    fn certified_sector_gains_for_the_weighted_sum_surface() {
        let cert =
            lmi::certify_sector(&reduced_weighted_sum(), &CertifyOptions::default()).unwrap();
        assert_relative_eq!(cert.r_tilde, 254.62, max_relative = 1e-4);
        assert_relative_eq!(cert.r, 287.34, max_relative = 1e-4);
        let full = lmi::certify_sector(
            &reduced_weighted_sum(),
            &CertifyOptions {
                back_map: BackMap::Full,
                ..CertifyOptions::default()
            },
        )
        .unwrap();
        assert_relative_eq!(full.r, 70.63, max_relative = 1e-4);
    }

    #[test]
    fn input_current_remainder_matches_the_reference_value() {
        let params = CukParams::preset();
        let eq = &input_current_equilibria(&params, 1.0, 0.5).unwrap()[0];
        let h = input_current_remainder(&params, &eq.x_star, 0.0, 1.0).unwrap();
        assert_relative_eq!(h, 4166.7, max_relative = 1e-4);
    }

    #[test]
    fn closed_form_remainders_match_the_reduction_pipeline() {
        let params = CukParams::preset();
        let mut rng = ChaCha8Rng::seed_from_u64(11);

        let red = reduced_input_current();
        let eq = &input_current_equilibria(&params, 1.0, 0.5).unwrap()[0];
        for _ in 0..50 {
            let z = DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0));
            let via_pipeline = red.remainder_reduced(&z).unwrap()[1];
            let closed = input_current_remainder(&params, &eq.x_star, z[0], z[1]).unwrap();
            assert_relative_eq!(via_pipeline, closed, max_relative = 1e-9, epsilon = 1e-9);
        }

        let red = reduced_weighted_sum();
        let eq = &weighted_sum_equilibria(&params, 1.0, 1.0, 2.0).unwrap()[0];
        for _ in 0..50 {
            let z = DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0));
            let via_pipeline = red.remainder_reduced(&z).unwrap()[1];
            let closed =
                weighted_sum_remainder(&params, 1.0, 1.0, &eq.x_star, z[0], z[1], z[2]).unwrap();
            assert_relative_eq!(via_pipeline, closed, max_relative = 1e-9, epsilon = 1e-9);
        }
    }

    #[test]
    fn remainder_rejects_the_equivalent_control_pole() {
        let params = CukParams::preset();
        let eq = &input_current_equilibria(&params, 1.0, 0.5).unwrap()[0];
        assert!(matches!(
            input_current_remainder(&params, &eq.x_star, 0.0, -eq.x_star[2]),
            Err(Error::DomainError(_))
        ));
    }

    #[test]
    fn off_mode_spectrum_of_the_preset() {
        let eigs = off_mode_eigenvalues(&CukParams::preset()).unwrap();
        let dominant: Vec<_> = eigs
            .iter()
            .filter(|e| (e.re + 5000.0).abs() < 1.0)
            .collect();
        assert_eq!(dominant.len(), 2);
        assert_relative_eq!(dominant[0].im.abs(), 5000.0, max_relative = 1e-6);

        let mut open = CukParams::preset();
        open.r_load = 1e12;
        let eigs = off_mode_eigenvalues(&open).unwrap();
        assert!(eigs
            .iter()
            .any(|e| e.re.abs() < 1e-3 && (e.im.abs() - 7071.067).abs() < 0.01));
    }

    #[test]
    fn startup_keeps_the_downstream_states_at_exactly_zero() {
        let params = CukParams::preset();
        let surface = input_current_surface(0.5, 0.01);
        let automaton = build_automaton(&params, &surface, Realization::Unidirectional).unwrap();
        let trace = simulate(&automaton, &SimOptions::new(100e-6, 1e-7)).unwrap();
        let first_event = trace.events.first().expect("switching must start").t;
        assert!(first_event > 0.0);
        for s in trace.samples.iter().filter(|s| s.t < first_event) {
            assert_eq!(s.x[1], 0.0);
            assert_eq!(s.x[2], 0.0);
            assert_eq!(s.x[3], 0.0);
        }
        // the first event is the surface guard, not a spurious diode guard
        assert_eq!(trace.events[0].from, ModeId::CcmOn);
        assert_eq!(trace.events[0].to, ModeId::CcmOff);
    }

    #[test]
    fn simulated_periods_match_the_reference_runs() {
        let params = CukParams::preset();
        for (delta, expected) in [(0.01, 5.99733564e-6), (0.1, 5.754837762e-5)] {
            let surface = input_current_surface(0.5, delta);
            let automaton =
                build_automaton(&params, &surface, Realization::Unidirectional).unwrap();
            let mut opts = SimOptions::new(2e-3, 1e-6);
            opts.record_from = 2e-3;
            let trace = simulate(&automaton, &opts).unwrap();
            let metrics = measure_cycle(&trace);
            assert!(metrics.converged, "delta {delta} did not converge");
            assert_relative_eq!(metrics.period.unwrap(), expected, max_relative = 1e-3);
        }
    }

    #[test]
    fn band_contains_the_surface_value_in_steady_state() {
        let params = CukParams::preset();
        let delta = 0.01;
        let surface = input_current_surface(0.5, delta);
        let automaton = build_automaton(&params, &surface, Realization::Unidirectional).unwrap();
        let mut opts = SimOptions::new(1e-3, 1e-7);
        opts.record_from = 5e-4;
        let trace = simulate(&automaton, &opts).unwrap();
        for s in &trace.samples {
            let sv = s.x[0] - 0.5;
            assert!(sv.abs() <= delta * (1.0 + 1e-9), "S = {sv} at t = {}", s.t);
        }
    }

    #[test]
    fn automaton_mode_sets_follow_the_realization() {
        let params = CukParams::preset();
        let surface = weighted_sum_surface(4.0, 0.1);
        let uni = build_automaton(&params, &surface, Realization::Unidirectional).unwrap();
        assert_eq!(uni.transitions(ModeId::CcmOn).len(), 2);
        assert_eq!(uni.transitions(ModeId::CcmOff).len(), 2);
        assert_eq!(uni.transitions(ModeId::Dicm).len(), 1);
        assert_eq!(uni.transitions(ModeId::Dcvm).len(), 1);
        let bi = build_automaton(&params, &surface, Realization::Bidirectional).unwrap();
        assert_eq!(bi.transitions(ModeId::CcmOn).len(), 1);
        assert!(bi.dynamics(ModeId::Dicm).is_err());
    }

    #[test]
    fn axis_crossing_bound_for_the_input_current_surface() {
        let params = CukParams::preset();
        let eq = &input_current_equilibria(&params, 1.0, 0.5).unwrap()[0];
        // kappa = x2*/(x3*·C1); spot value with r = 7603.7
        let bound = axis_crossing_ripple_bound(&params, (1.0, 0.0), &eq.x_star, 7603.7).unwrap();
        let kappa: f64 = 1.0 / (15.0 * 1e-6);
        let expected = 2.0 * 7603.7 * 15.0 / (kappa + 7603.7);
        assert_relative_eq!(bound, expected, max_relative = 1e-12);
    }
}
