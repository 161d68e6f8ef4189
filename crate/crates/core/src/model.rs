//! Switched affine converter model: system matrices, the linear sliding
//! surface and the hysteresis switching law.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Switched affine dynamics `dx/dt = A x + B + (C x + D) u` with `u ∈ {0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedAffineSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    /// State names with units, e.g. `"i_l1 [A]"`. Metadata only; all
    /// arithmetic is in SI base units.
    pub state_labels: Vec<String>,
}

impl SwitchedAffineSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DMatrix<f64>,
        d: DVector<f64>,
        state_labels: Vec<String>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || c.nrows() != n || c.ncols() != n || b.len() != n || d.len() != n {
            return Err(Error::Config(format!(
                "system matrices disagree on the state dimension {n}"
            )));
        }
        if state_labels.len() != n {
            return Err(Error::Config(format!("expected {n} state labels")));
        }
        let finite = a.iter().chain(c.iter()).chain(b.iter()).chain(d.iter());
        if !finite.clone().all(|v| v.is_finite()) {
            return Err(Error::Config("system matrices must be finite".into()));
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            state_labels,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Field with the switch held at a fixed value of `u`.
    pub fn field(&self, x: &DVector<f64>, u: f64) -> DVector<f64> {
        &self.a * x + &self.b + (&self.c * x + &self.d) * u
    }

    /// Affine dynamics of one continuous conduction mode.
    pub fn ccm_mode(&self, id: ModeId) -> ModeDynamics {
        match id {
            ModeId::CcmOn => ModeDynamics {
                id,
                m: &self.a + &self.c,
                b: &self.b + &self.d,
            },
            ModeId::CcmOff => ModeDynamics {
                id,
                m: self.a.clone(),
                b: self.b.clone(),
            },
            _ => panic!("ccm_mode covers only the CCM modes"),
        }
    }
}

/// Operating-mode label used in traces and automaton definitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeId {
    CcmOn,
    CcmOff,
    Dicm,
    Dcvm,
}

impl ModeId {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeId::CcmOn => "CCM_ON",
            ModeId::CcmOff => "CCM_OFF",
            ModeId::Dicm => "DICM",
            ModeId::Dcvm => "DCVM",
        }
    }

    /// Switch signal associated with the mode.
    pub fn u(&self) -> f64 {
        match self {
            ModeId::CcmOn | ModeId::Dcvm => 1.0,
            ModeId::CcmOff | ModeId::Dicm => 0.0,
        }
    }
}

impl std::fmt::Display for ModeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Affine dynamics `dx/dt = M x + b` of a single operating mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDynamics {
    pub id: ModeId,
    pub m: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Evaluates the mode field `M x + b`.
pub fn mode_field(mode: &ModeDynamics, x: &DVector<f64>) -> DVector<f64> {
    &mode.m * x + &mode.b
}

/// Linear sliding surface `S(x) = m·x − m5` with hysteresis half-width Δ.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingSurface {
    pub m: DVector<f64>,
    pub m5: f64,
    pub delta: f64,
}

impl SlidingSurface {
    pub fn new(m: DVector<f64>, m5: f64, delta: f64) -> Result<Self> {
        if m.iter().all(|v| *v == 0.0) {
            return Err(Error::Config(
                "surface coefficients must not all be zero".into(),
            ));
        }
        if !(delta > 0.0) {
            return Err(Error::Config(
                "hysteresis half-width must be positive".into(),
            ));
        }
        Ok(Self { m, m5, delta })
    }
}

/// Evaluates `S(x) = m·x − m5`.
pub fn surface_value(surface: &SlidingSurface, x: &DVector<f64>) -> Result<f64> {
    if surface.m.len() != x.len() {
        return Err(Error::Config(format!(
            "surface has {} coefficients but the state has {} entries",
            surface.m.len(),
            x.len()
        )));
    }
    Ok(surface.m.dot(x) - surface.m5)
}

/// Inverting hysteresis law: switch on below the band, off above it, hold
/// inside. Values exactly at ±Δ count as inside the band.
pub fn hysteresis_control(s_value: f64, delta: f64, prev_u: u8) -> u8 {
    debug_assert!(delta > 0.0);
    if s_value < -delta {
        1
    } else if s_value > delta {
        0
    } else {
        prev_u
    }
}
