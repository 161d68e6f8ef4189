//! Hybrid simulation of the switching realization.
//!
//! Inside a mode the flow is affine, so states are propagated through the
//! matrix exponential of the augmented system. Every requested state is
//! computed in one exact step from the segment anchor rather than by
//! accumulated stepping, which keeps conserved quantities conserved to
//! roundoff over arbitrarily long segments. Guard crossings are bracketed by
//! short probe windows and then bisected down to floating-point resolution.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use crate::equiv::ReducedModel;
use crate::linalg;
use crate::model::{ModeDynamics, ModeId};
use crate::{Error, Result};

/// Affine guard `w·x + offset`; a transition fires when the value falls
/// through zero along the flow.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGuard {
    pub weights: DVector<f64>,
    pub offset: f64,
}

impl LinearGuard {
    pub fn new(weights: DVector<f64>, offset: f64) -> Self {
        Self { weights, offset }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.weights.dot(x) + self.offset
    }

    /// Least-norm projection of `x` onto the guard surface.
    pub fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        let ww = self.weights.dot(&self.weights);
        if ww == 0.0 {
            return x.clone();
        }
        x - &self.weights * (self.value(x) / ww)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub guard: LinearGuard,
    pub target: ModeId,
    /// Project the state onto the guard surface when the transition fires.
    pub clamp: bool,
}

/// Mode dynamics plus guarded transitions between them.
#[derive(Debug, Clone, Default)]
pub struct HybridAutomaton {
    modes: BTreeMap<ModeId, ModeDynamics>,
    transitions: BTreeMap<ModeId, Vec<Transition>>,
}

impl HybridAutomaton {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_mode(&mut self, dynamics: ModeDynamics) {
        self.modes.insert(dynamics.id, dynamics);
    }

    pub fn add_transition(&mut self, from: ModeId, transition: Transition) {
        self.transitions.entry(from).or_default().push(transition);
    }

    pub fn dynamics(&self, mode: ModeId) -> Result<&ModeDynamics> {
        self.modes
            .get(&mode)
            .ok_or_else(|| Error::Config(format!("mode {mode} has no dynamics")))
    }

    pub fn transitions(&self, mode: ModeId) -> &[Transition] {
        self.transitions
            .get(&mode)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub t_end: f64,
    /// Spacing of the regular sample grid `t = k·sample_dt`.
    pub sample_dt: f64,
    /// Samples earlier than this are not stored.
    pub record_from: f64,
    /// Probe window for guard monitoring; defaults to `0.25/‖M‖∞` per mode.
    pub probe_dt: Option<f64>,
    /// Initial state; defaults to the origin.
    pub x0: Option<DVector<f64>>,
    pub start_mode: ModeId,
    pub max_events: usize,
    /// Max-norm beyond which the run is reported divergent.
    pub divergence_limit: f64,
}

impl SimOptions {
    pub fn new(t_end: f64, sample_dt: f64) -> Self {
        Self {
            t_end,
            sample_dt,
            record_from: 0.0,
            probe_dt: None,
            x0: None,
            start_mode: ModeId::CcmOn,
            max_events: 1_000_000,
            divergence_limit: 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: DVector<f64>,
    pub mode: ModeId,
}

/// A fired transition; `x` is the state after any clamp was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub t: f64,
    pub from: ModeId,
    pub to: ModeId,
    pub x: DVector<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct SimTrace {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
}

struct Propagator {
    m_aug: DMatrix<f64>,
    n: usize,
}

impl Propagator {
    fn new(mode: &ModeDynamics) -> Self {
        let n = mode.m.nrows();
        let mut m_aug = DMatrix::zeros(n + 1, n + 1);
        m_aug.view_mut((0, 0), (n, n)).copy_from(&mode.m);
        m_aug.view_mut((0, n), (n, 1)).copy_from(&mode.b);
        Self { m_aug, n }
    }

    fn inf_norm(&self) -> f64 {
        linalg::inf_norm(&self.m_aug)
    }

    /// State after `dt`, one exact exponential step from the anchor.
    fn at(&self, x: &DVector<f64>, dt: f64) -> DVector<f64> {
        let e = linalg::expm(&(&self.m_aug * dt));
        let mut out = DVector::zeros(self.n);
        for i in 0..self.n {
            let mut s = e[(i, self.n)];
            for j in 0..self.n {
                s += e[(i, j)] * x[j];
            }
            out[i] = s;
        }
        out
    }
}

/// Propagates `ẋ = M x + b` exactly over `dt` through the matrix exponential
/// of the augmented system.
pub fn step_affine(mode: &ModeDynamics, x: &DVector<f64>, dt: f64) -> DVector<f64> {
    Propagator::new(mode).at(x, dt)
}

fn bisect_crossing(
    prop: &Propagator,
    x_anchor: &DVector<f64>,
    guard: &LinearGuard,
    mut lo: f64,
    mut hi: f64,
) -> (f64, DVector<f64>) {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let xm = prop.at(x_anchor, mid);
        if guard.value(&xm) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let x_hit = prop.at(x_anchor, hi);
    (hi, x_hit)
}

const MAX_LOCATE_STEPS: usize = 1_000_000;

/// First time in `[0, dt_max]` at which the guard value falls below zero
/// along the mode flow from `x`. A state already at or past the guard
/// returns time zero; `None` means the guard is not reached.
pub fn locate_event(
    mode: &ModeDynamics,
    x: &DVector<f64>,
    guard: &LinearGuard,
    dt_max: f64,
) -> Result<Option<(f64, DVector<f64>)>> {
    if !(dt_max > 0.0) {
        return Err(Error::Config("dt_max must be positive".into()));
    }
    if guard.value(x) <= 0.0 {
        return Ok(Some((0.0, x.clone())));
    }
    let prop = Propagator::new(mode);
    let norm = prop.inf_norm();
    let probe = if norm > 0.0 {
        (0.25 / norm).min(dt_max)
    } else {
        dt_max
    };
    let mut lo = 0.0f64;
    let mut steps = 0usize;
    loop {
        let hi = (lo + probe).min(dt_max);
        let x_hi = prop.at(x, hi);
        if guard.value(&x_hi) < 0.0 {
            return Ok(Some(bisect_crossing(&prop, x, guard, lo, hi)));
        }
        if hi >= dt_max {
            return Ok(None);
        }
        lo = hi;
        steps += 1;
        if steps > MAX_LOCATE_STEPS {
            return Err(Error::EventLocalizationFailure { t: lo });
        }
    }
}

fn emit_grid(
    samples: &mut Vec<Sample>,
    prop: &Propagator,
    x_anchor: &DVector<f64>,
    anchor_t: f64,
    mode: ModeId,
    opts: &SimOptions,
    next_k: &mut u64,
    until: f64,
) {
    loop {
        let tau = (*next_k as f64) * opts.sample_dt;
        if tau >= until {
            return;
        }
        if tau > anchor_t && tau >= opts.record_from {
            let xs = prop.at(x_anchor, tau - anchor_t);
            samples.push(Sample {
                t: tau,
                x: xs,
                mode,
            });
        }
        *next_k += 1;
    }
}

/// Runs the hybrid automaton from `t = 0` to `t_end`.
///
/// Grid samples are taken at exact multiples of `sample_dt`; every fired
/// transition additionally contributes a sample at the event time holding the
/// post-transition state and mode. The sample grid has no influence on event
/// locations.
pub fn simulate(automaton: &HybridAutomaton, opts: &SimOptions) -> Result<SimTrace> {
    if !(opts.t_end > 0.0) || !(opts.sample_dt > 0.0) {
        return Err(Error::Config("t_end and sample_dt must be positive".into()));
    }
    let n = automaton.dynamics(opts.start_mode)?.m.nrows();
    let mut x = match &opts.x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(Error::Config(format!(
                    "x0 has dimension {} but the dynamics expect {n}",
                    x0.len()
                )));
            }
            x0.clone()
        }
        None => DVector::zeros(n),
    };
    let mut mode = opts.start_mode;
    let mut t = 0.0f64;
    let mut samples = Vec::new();
    let mut events = Vec::new();
    if 0.0 >= opts.record_from {
        samples.push(Sample {
            t: 0.0,
            x: x.clone(),
            mode,
        });
    }
    let mut next_k: u64 = 1;
    let mut event_count = 0usize;

    'segments: while t < opts.t_end {
        let dynamics = automaton.dynamics(mode)?;
        let transitions = automaton.transitions(mode);

        // a guard already strictly violated at segment entry fires at once;
        // a value of exactly zero lies inside the closed mode domain
        if let Some(tr) = transitions.iter().find(|tr| tr.guard.value(&x) < 0.0) {
            let x_post = if tr.clamp {
                tr.guard.clamp(&x)
            } else {
                x.clone()
            };
            event_count += 1;
            if event_count > opts.max_events {
                return Err(Error::ZenoError {
                    t,
                    events: event_count,
                });
            }
            events.push(Event {
                t,
                from: mode,
                to: tr.target,
                x: x_post.clone(),
            });
            mode = tr.target;
            x = x_post;
            if t >= opts.record_from {
                samples.push(Sample {
                    t,
                    x: x.clone(),
                    mode,
                });
            }
            continue 'segments;
        }

        let prop = Propagator::new(dynamics);
        let norm = prop.inf_norm();
        let probe = opts
            .probe_dt
            .unwrap_or(if norm > 0.0 { 0.25 / norm } else { opts.t_end });
        let anchor_t = t;
        let remaining = opts.t_end - anchor_t;
        let mut lo = 0.0f64;
        let mut v_lo: Vec<f64> = transitions.iter().map(|tr| tr.guard.value(&x)).collect();

        loop {
            let hi = (lo + probe).min(remaining);
            let x_hi = prop.at(&x, hi);
            if x_hi.amax() > opts.divergence_limit {
                return Err(Error::DivergenceError {
                    t: anchor_t + hi,
                    norm: x_hi.amax(),
                });
            }
            let v_hi: Vec<f64> = transitions.iter().map(|tr| tr.guard.value(&x_hi)).collect();

            let mut best: Option<(usize, f64, DVector<f64>)> = None;
            for (i, tr) in transitions.iter().enumerate() {
                if v_lo[i] >= 0.0 && v_hi[i] < 0.0 {
                    let (t_hit, x_hit) = bisect_crossing(&prop, &x, &tr.guard, lo, hi);
                    if best.as_ref().map_or(true, |(_, tb, _)| t_hit < *tb) {
                        best = Some((i, t_hit, x_hit));
                    }
                }
            }

            if let Some((idx, t_hit, x_hit)) = best {
                let t_event = anchor_t + t_hit;
                emit_grid(
                    &mut samples,
                    &prop,
                    &x,
                    anchor_t,
                    mode,
                    opts,
                    &mut next_k,
                    t_event,
                );
                let tr = &transitions[idx];
                let x_post = if tr.clamp {
                    tr.guard.clamp(&x_hit)
                } else {
                    x_hit
                };
                event_count += 1;
                if event_count > opts.max_events {
                    return Err(Error::ZenoError {
                        t: t_event,
                        events: event_count,
                    });
                }
                events.push(Event {
                    t: t_event,
                    from: mode,
                    to: tr.target,
                    x: x_post.clone(),
                });
                mode = tr.target;
                x = x_post;
                t = t_event;
                if t >= opts.record_from {
                    samples.push(Sample {
                        t,
                        x: x.clone(),
                        mode,
                    });
                }
                continue 'segments;
            }

            if hi >= remaining {
                emit_grid(
                    &mut samples,
                    &prop,
                    &x,
                    anchor_t,
                    mode,
                    opts,
                    &mut next_k,
                    opts.t_end,
                );
                let x_end = prop.at(&x, remaining);
                if opts.t_end >= opts.record_from
                    && samples.last().map_or(true, |s| s.t != opts.t_end)
                {
                    samples.push(Sample {
                        t: opts.t_end,
                        x: x_end,
                        mode,
                    });
                }
                break 'segments;
            }
            lo = hi;
            v_lo = v_hi;
        }
    }

    Ok(SimTrace { samples, events })
}

#[derive(Debug, Clone)]
pub struct CycleMetrics {
    pub converged: bool,
    /// Duration of the last completed switching cycle.
    pub period: Option<f64>,
    /// Per-variable max−min over the final full cycle.
    pub ripple: Option<DVector<f64>>,
    /// Per-variable trapezoid average over the final full cycle.
    pub average: Option<DVector<f64>>,
    pub modes_visited: BTreeSet<ModeId>,
    pub cycles_observed: usize,
}

/// Extracts steady-state switching metrics from a trace. Cycle boundaries are
/// the transitions into CCM_ON; convergence requires the last three periods
/// to agree pairwise within 0.1%. Missing data yields `None` fields rather
/// than an error.
pub fn measure_cycle(trace: &SimTrace) -> CycleMetrics {
    let mut modes_visited: BTreeSet<ModeId> = trace.samples.iter().map(|s| s.mode).collect();
    for e in &trace.events {
        modes_visited.insert(e.from);
        modes_visited.insert(e.to);
    }

    let edges: Vec<f64> = trace
        .events
        .iter()
        .filter(|e| e.to == ModeId::CcmOn)
        .map(|e| e.t)
        .collect();
    let cycles_observed = edges.len().saturating_sub(1);
    if edges.len() < 2 {
        return CycleMetrics {
            converged: false,
            period: None,
            ripple: None,
            average: None,
            modes_visited,
            cycles_observed,
        };
    }
    let periods: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    let period = *periods.last().unwrap();
    let converged = periods.len() >= 3 && {
        let tail = &periods[periods.len() - 3..];
        tail.iter()
            .all(|&a| tail.iter().all(|&b| (a - b).abs() <= 1e-3 * period))
    };

    let (t0, t1) = (edges[edges.len() - 2], edges[edges.len() - 1]);
    let window: Vec<&Sample> = trace
        .samples
        .iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .collect();
    let (ripple, average) = if window.len() >= 2 {
        let nv = window[0].x.len();
        let mut mins = DVector::from_element(nv, f64::INFINITY);
        let mut maxs = DVector::from_element(nv, f64::NEG_INFINITY);
        for s in &window {
            for i in 0..nv {
                mins[i] = mins[i].min(s.x[i]);
                maxs[i] = maxs[i].max(s.x[i]);
            }
        }
        let mut avg = DVector::zeros(nv);
        let mut span = 0.0;
        for pair in window.windows(2) {
            let dt = pair[1].t - pair[0].t;
            span += dt;
            for i in 0..nv {
                avg[i] += 0.5 * (pair[0].x[i] + pair[1].x[i]) * dt;
            }
        }
        if span > 0.0 {
            avg /= span;
        }
        (Some(maxs - mins), Some(avg))
    } else {
        (None, None)
    };

    CycleMetrics {
        converged,
        period: Some(period),
        ripple,
        average,
        modes_visited,
        cycles_observed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorPoint {
    /// Reduced deviation coordinate.
    pub y: f64,
    /// Matching remainder component at the projected deviation.
    pub h: f64,
}

#[derive(Debug, Clone)]
pub struct SectorSeries {
    pub points: Vec<SectorPoint>,
    /// Samples dropped because the remainder was undefined there.
    pub skipped: usize,
}

/// Projects every stored sample onto the reduced coordinates and pairs the
/// chosen deviation coordinate with the matching remainder component.
pub fn record_remainder(
    trace: &SimTrace,
    model: &ReducedModel,
    coord: usize,
) -> Result<SectorSeries> {
    if coord >= model.dim() {
        return Err(Error::Config(format!(
            "coordinate {coord} out of range for reduced dimension {}",
            model.dim()
        )));
    }
    let mut points = Vec::with_capacity(trace.samples.len());
    let mut skipped = 0usize;
    for s in &trace.samples {
        let z = model.project(&(&s.x - &model.x_star));
        match model.remainder_reduced(&z) {
            Ok(h) => points.push(SectorPoint {
                y: z[coord],
                h: h[coord],
            }),
            Err(Error::DomainError(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(SectorSeries { points, skipped })
}

/// Single classic fourth-order step of `ẋ = M x + b`.
pub fn rk_step(mode: &ModeDynamics, x: &DVector<f64>, dt: f64) -> DVector<f64> {
    let f = |x: &DVector<f64>| &mode.m * x + &mode.b;
    let k1 = f(x);
    let k2 = f(&(x + &k1 * (dt / 2.0)));
    let k3 = f(&(x + &k2 * (dt / 2.0)));
    let k4 = f(&(x + &k3 * dt));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// Adaptive integration by step doubling with Richardson extrapolation.
/// Entirely independent of the matrix-exponential path, so it serves as a
/// cross-check oracle for [`step_affine`].
pub fn rk_integrate(
    mode: &ModeDynamics,
    x: &DVector<f64>,
    dt: f64,
    tol: f64,
) -> Result<DVector<f64>> {
    let mut t = 0.0;
    let mut state = x.clone();
    let mut h = dt;
    let mut steps = 0usize;
    while t < dt {
        h = h.min(dt - t);
        let full = rk_step(mode, &state, h);
        let half = rk_step(mode, &state, h / 2.0);
        let double = rk_step(mode, &half, h / 2.0);
        let err = (&double - &full).amax() / 15.0;
        let scale = tol * (1.0 + state.amax());
        if err <= scale {
            state = &double + (&double - &full) / 15.0;
            t += h;
            if err < scale / 32.0 {
                h *= 2.0;
            }
        } else {
            h /= 2.0;
        }
        steps += 1;
        if steps > 10_000_000 {
            return Err(Error::Numerical("step-doubling integration stalled".into()));
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_mode(id: ModeId, m: f64, b: f64) -> ModeDynamics {
        ModeDynamics {
            id,
            m: DMatrix::from_row_slice(1, 1, &[m]),
            b: DVector::from_row_slice(&[b]),
        }
    }

    /// Integrator relay: ẋ = ±1 with hysteresis at ±delta, period 4·delta.
    fn relay(delta: f64, clamp: bool) -> HybridAutomaton {
        let mut a = HybridAutomaton::new();
        a.add_mode(scalar_mode(ModeId::CcmOn, 0.0, 1.0));
        a.add_mode(scalar_mode(ModeId::CcmOff, 0.0, -1.0));
        a.add_transition(
            ModeId::CcmOn,
            Transition {
                guard: LinearGuard::new(DVector::from_row_slice(&[-1.0]), delta),
                target: ModeId::CcmOff,
                clamp,
            },
        );
        a.add_transition(
            ModeId::CcmOff,
            Transition {
                guard: LinearGuard::new(DVector::from_row_slice(&[1.0]), delta),
                target: ModeId::CcmOn,
                clamp,
            },
        );
        a
    }

    #[test]
    fn step_affine_matches_the_scalar_solution() {
        let mode = scalar_mode(ModeId::CcmOff, -1.0, 1.0);
        let x = DVector::from_row_slice(&[0.0]);
        let out = step_affine(&mode, &x, 0.7);
        assert_relative_eq!(out[0], 1.0 - (-0.7f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn step_affine_is_a_semigroup() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let mode = ModeDynamics {
                id: ModeId::CcmOn,
                m: DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-2.0..2.0)),
                b: DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0)),
            };
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let direct = step_affine(&mode, &x, 0.7);
            let stepped = step_affine(&mode, &step_affine(&mode, &x, 0.3), 0.4);
            assert!((direct - &stepped).amax() < 1e-12 * (1.0 + stepped.amax()));
        }
    }

    #[test]
    fn locate_event_finds_the_crossing_time() {
        let mode = scalar_mode(ModeId::CcmOff, -1.0, 0.0);
        let x = DVector::from_row_slice(&[1.0]);
        let guard = LinearGuard::new(DVector::from_row_slice(&[1.0]), -0.5);
        let (t, x_hit) = locate_event(&mode, &x, &guard, 5.0).unwrap().unwrap();
        assert_relative_eq!(t, 2f64.ln(), max_relative = 1e-9);
        assert_relative_eq!(x_hit[0], 0.5, max_relative = 1e-9);
    }

    #[test]
    fn locate_event_reports_an_already_crossed_guard_at_time_zero() {
        let mode = scalar_mode(ModeId::CcmOff, -1.0, 0.0);
        let x = DVector::from_row_slice(&[0.4]);
        let guard = LinearGuard::new(DVector::from_row_slice(&[1.0]), -0.5);
        let (t, x_hit) = locate_event(&mode, &x, &guard, 5.0).unwrap().unwrap();
        assert_eq!(t, 0.0);
        assert_eq!(x_hit[0], 0.4);
    }

    #[test]
    fn locate_event_returns_none_without_a_crossing() {
        let mode = scalar_mode(ModeId::CcmOff, -1.0, 0.0);
        let x = DVector::from_row_slice(&[1.0]);
        let guard = LinearGuard::new(DVector::from_row_slice(&[1.0]), 1.0);
        assert!(locate_event(&mode, &x, &guard, 5.0).unwrap().is_none());
    }

    #[test]
    fn relay_oscillation_period_and_band() {
        let delta = 0.1;
        let automaton = relay(delta, false);
        let trace = simulate(&automaton, &SimOptions::new(2.0, 0.01)).unwrap();
        let metrics = measure_cycle(&trace);
        assert!(metrics.converged);
        assert_relative_eq!(metrics.period.unwrap(), 4.0 * delta, max_relative = 1e-12);
        assert_relative_eq!(
            metrics.ripple.unwrap()[0],
            2.0 * delta,
            max_relative = 1e-12
        );
        assert!(metrics.average.unwrap()[0].abs() < 1e-9 * delta);
        assert_eq!(
            metrics.modes_visited.into_iter().collect::<Vec<_>>(),
            vec![ModeId::CcmOn, ModeId::CcmOff]
        );
        for s in &trace.samples {
            assert!(s.x[0].abs() <= delta * (1.0 + 1e-9));
        }
        // events sit just past the band edge, on the post-crossing side
        for e in &trace.events {
            let over = e.x[0].abs() - delta;
            assert!(over > 0.0 && over < 1e-12, "overshoot {over:e}");
        }
    }

    #[test]
    fn events_are_unaffected_by_the_sample_grid() {
        let automaton = relay(0.1, false);
        let coarse = simulate(&automaton, &SimOptions::new(2.0, 0.01)).unwrap();
        let fine = simulate(&automaton, &SimOptions::new(2.0, 0.005)).unwrap();
        assert_eq!(coarse.events.len(), fine.events.len());
        for (a, b) in coarse.events.iter().zip(&fine.events) {
            assert_eq!(a.t.to_bits(), b.t.to_bits());
            assert_eq!(a.x, b.x);
            assert_eq!((a.from, a.to), (b.from, b.to));
        }
    }

    #[test]
    fn grid_samples_land_on_exact_multiples() {
        let automaton = relay(0.1, false);
        let dt = 0.0625;
        let trace = simulate(&automaton, &SimOptions::new(1.0, dt)).unwrap();
        for k in 0..=16u32 {
            let tau = f64::from(k) * dt;
            assert!(
                trace.samples.iter().any(|s| s.t == tau),
                "missing grid sample at {tau}"
            );
        }
    }

    #[test]
    fn clamped_transitions_land_exactly_on_the_guard() {
        let delta = 0.1;
        let automaton = relay(delta, true);
        let trace = simulate(&automaton, &SimOptions::new(2.0, 0.01)).unwrap();
        assert!(trace.events.len() > 3);
        for e in &trace.events {
            assert_eq!(e.x[0].abs(), delta);
        }
    }

    #[test]
    fn record_from_suppresses_early_samples() {
        let automaton = relay(0.1, false);
        let mut opts = SimOptions::new(2.0, 0.01);
        opts.record_from = 1.0;
        let trace = simulate(&automaton, &opts).unwrap();
        assert!(trace.samples.iter().all(|s| s.t >= 1.0));
        // events are always recorded
        assert!(trace.events.iter().any(|e| e.t < 1.0));
    }

    #[test]
    fn ping_pong_guards_hit_the_event_limit() {
        let mut automaton = HybridAutomaton::new();
        automaton.add_mode(scalar_mode(ModeId::CcmOn, 0.0, 1.0));
        automaton.add_mode(scalar_mode(ModeId::CcmOff, 0.0, -1.0));
        let always = || LinearGuard::new(DVector::from_row_slice(&[0.0]), -1.0);
        automaton.add_transition(
            ModeId::CcmOn,
            Transition {
                guard: always(),
                target: ModeId::CcmOff,
                clamp: false,
            },
        );
        automaton.add_transition(
            ModeId::CcmOff,
            Transition {
                guard: always(),
                target: ModeId::CcmOn,
                clamp: false,
            },
        );
        let mut opts = SimOptions::new(1.0, 0.1);
        opts.max_events = 50;
        assert!(matches!(
            simulate(&automaton, &opts),
            Err(Error::ZenoError { .. })
        ));
    }

    #[test]
    fn unbounded_growth_is_reported_as_divergence() {
        let mut automaton = HybridAutomaton::new();
        automaton.add_mode(scalar_mode(ModeId::CcmOff, 1.0, 0.0));
        let mut opts = SimOptions::new(25.0, 0.5);
        opts.x0 = Some(DVector::from_row_slice(&[1.0]));
        opts.start_mode = ModeId::CcmOff;
        opts.divergence_limit = 1e3;
        match simulate(&automaton, &opts) {
            Err(Error::DivergenceError { t, norm }) => {
                assert!(t < 8.0);
                assert!(norm > 1e3);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn states_come_fresh_from_the_segment_anchor() {
        let mut automaton = HybridAutomaton::new();
        let mode = ModeDynamics {
            id: ModeId::CcmOff,
            m: DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -2.0, -1.0]),
            b: DVector::from_row_slice(&[0.3, -0.1]),
        };
        automaton.add_mode(mode.clone());
        let mut opts = SimOptions::new(3.0, 0.25);
        opts.x0 = Some(DVector::from_row_slice(&[1.0, -1.0]));
        opts.start_mode = ModeId::CcmOff;
        let trace = simulate(&automaton, &opts).unwrap();
        let last = trace.samples.last().unwrap();
        assert_eq!(last.t, 3.0);
        let direct = step_affine(&mode, opts.x0.as_ref().unwrap(), 3.0);
        assert_eq!(last.x, direct);
    }

    #[test]
    fn short_traces_report_unconverged_metrics() {
        let automaton = relay(0.1, false);
        let trace = simulate(&automaton, &SimOptions::new(0.2, 0.01)).unwrap();
        let metrics = measure_cycle(&trace);
        assert!(!metrics.converged);
        assert!(metrics.period.is_none());
    }

    #[test]
    fn rk_integrate_matches_the_exponential_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mode = ModeDynamics {
                id: ModeId::CcmOn,
                m: DMatrix::from_fn(3, 3, |_, _| rng.gen_range(-3.0..3.0)),
                b: DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0)),
            };
            let x = DVector::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let dt = rng.gen_range(0.01..1.0);
            let exact = step_affine(&mode, &x, dt);
            let rk = rk_integrate(&mode, &x, dt, 1e-12).unwrap();
            assert!((exact - &rk).amax() <= 1e-9 * (1.0 + rk.amax()));
        }
    }
}
