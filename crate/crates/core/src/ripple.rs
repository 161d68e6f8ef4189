//! Closed-form switching period and ripple amplitudes under the linear
//! ripple approximation, their inversion into hysteresis band limits, and the
//! empirical validity limit extracted from a recorded remainder series.

use nalgebra::DVector;

use crate::cuk::CukParams;
use crate::model::SlidingSurface;
use crate::sim::SectorSeries;
use crate::{Error, Result};

/// Surface families with closed-form ripple rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceFamily {
    /// `S = m1·i_l1 − m5`
    InputCurrent { m1: f64 },
    /// `S = m1·i_l1 + m2·i_l2 − m5`
    WeightedCurrentSum { m1: f64, m2: f64 },
}

/// Matches a sliding surface against the supported families.
pub fn classify(surface: &SlidingSurface) -> Result<SurfaceFamily> {
    let m = &surface.m;
    if m.len() != 4 || m[2] != 0.0 || m[3] != 0.0 || m[0] <= 0.0 {
        return Err(Error::UnsupportedSurface);
    }
    if m[1] == 0.0 {
        Ok(SurfaceFamily::InputCurrent { m1: m[0] })
    } else if m[1] > 0.0 {
        Ok(SurfaceFamily::WeightedCurrentSum { m1: m[0], m2: m[1] })
    } else {
        Err(Error::UnsupportedSurface)
    }
}

fn check_duty(u_eq: f64) -> Result<()> {
    if !(u_eq > 0.0 && u_eq < 1.0) {
        return Err(Error::DomainError(format!(
            "ripple rules need an equivalent control strictly inside (0, 1), got {u_eq}"
        )));
    }
    Ok(())
}

/// Switching period of the hysteresis-controlled converter in continuous
/// conduction, under the linear ripple approximation.
pub fn switching_period(
    params: &CukParams,
    family: &SurfaceFamily,
    u_eq: f64,
    delta: f64,
) -> Result<f64> {
    check_duty(u_eq)?;
    if !(delta >= 0.0) {
        return Err(Error::Config("delta must be nonnegative".into()));
    }
    let t_s = match *family {
        SurfaceFamily::InputCurrent { m1 } => 2.0 * delta * params.l1 / (m1 * params.v_in * u_eq),
        SurfaceFamily::WeightedCurrentSum { m1, m2 } => {
            2.0 * delta / ((m1 / params.l1 + m2 / params.l2) * params.v_in * u_eq)
        }
    };
    Ok(t_s)
}

/// Peak-to-peak ripple amplitudes over one switching cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RipplePrediction {
    pub t_s: f64,
    pub di_l1: f64,
    pub di_l2: f64,
    pub dv_c1: f64,
    pub dv_c2: f64,
}

/// Linear-ripple predictions at the operating point `x_star`.
pub fn predict_ripples(
    params: &CukParams,
    family: &SurfaceFamily,
    x_star: &DVector<f64>,
    u_eq: f64,
    delta: f64,
) -> Result<RipplePrediction> {
    let t_s = switching_period(params, family, u_eq, delta)?;
    let di_l1 = params.v_in / params.l1 * u_eq * t_s;
    let di_l2 = params.v_in / params.l2 * u_eq * t_s;
    let dv_c1 = x_star[1] * u_eq * t_s / params.c1;
    let dv_c2 = di_l2 * t_s / (8.0 * params.c2);
    Ok(RipplePrediction {
        t_s,
        di_l1,
        di_l2,
        dv_c1,
        dv_c2,
    })
}

/// Largest hysteresis half-width whose predicted transfer-capacitor ripple
/// stays below `dv_c1_max`; the exact inverse of [`predict_ripples`] in that
/// component.
pub fn hysteresis_limit(
    params: &CukParams,
    family: &SurfaceFamily,
    x_star: &DVector<f64>,
    u_eq: f64,
    dv_c1_max: f64,
) -> Result<f64> {
    check_duty(u_eq)?;
    if !(dv_c1_max >= 0.0) {
        return Err(Error::Config("dv_c1_max must be nonnegative".into()));
    }
    let x2s = x_star[1];
    if x2s == 0.0 {
        return Err(Error::DomainError(
            "hysteresis limit undefined at zero transfer-capacitor current".into(),
        ));
    }
    let delta = match *family {
        SurfaceFamily::InputCurrent { m1 } => {
            m1 * params.v_in * params.c1 * dv_c1_max / (2.0 * params.l1 * x2s)
        }
        SurfaceFamily::WeightedCurrentSum { m1, m2 } => {
            dv_c1_max * (m1 / params.l1 + m2 / params.l2) * params.v_in * params.c1 / (2.0 * x2s)
        }
    };
    Ok(delta)
}

/// Peak-to-peak `v_c1` excursion at which a recorded remainder series leaves
/// the sector `|h| ≤ r·|y|`: points are ordered by deviation magnitude and
/// the first sign change of `|h| − r·|y|` is interpolated. A series lying
/// entirely inside the sector yields [`Error::NoCrossing`]; one starting
/// outside has no linear regime to report and yields a domain error.
pub fn estimate_linear_ripple_limit(series: &SectorSeries, r: f64) -> Result<f64> {
    if series.points.is_empty() {
        return Err(Error::DomainError("empty remainder series".into()));
    }
    if !(r > 0.0) {
        return Err(Error::Config("sector slope must be positive".into()));
    }
    let mut pts: Vec<(f64, f64)> = series
        .points
        .iter()
        .map(|p| (p.y.abs(), p.h.abs() - r * p.y.abs()))
        .collect();
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if pts[0].1 > 0.0 {
        return Err(Error::DomainError(
            "remainder exceeds the sector bound already at the smallest deviation".into(),
        ));
    }
    for pair in pts.windows(2) {
        let (y0, g0) = pair[0];
        let (y1, g1) = pair[1];
        if g0 <= 0.0 && g1 > 0.0 {
            let y_cross = y0 + (y1 - y0) * (-g0) / (g1 - g0);
            return Ok(2.0 * y_cross);
        }
    }
    Err(Error::NoCrossing)
}
