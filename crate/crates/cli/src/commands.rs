//! The four subcommands: analyze, simulate, sector-check and sweep.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use smconv_core::cuk::{self, CukParams, STATE_LABELS};
use smconv_core::equiv::{self, BranchTag, EquilibriumResult, ReducedModel};
use smconv_core::lmi::{self, BackMap, CertifyOptions, SectorCertificate, SolverOptions};
use smconv_core::model::{SlidingSurface, SwitchedAffineSystem};
use smconv_core::ripple::{self, RipplePrediction, SurfaceFamily};
use smconv_core::sim::{self, CycleMetrics, SimOptions, SimTrace};
use smconv_core::Error as CoreError;

use crate::config::{Circuit, RunConfig};
use crate::report::Report;

/// Command failure with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2: the configuration or command line is invalid.
    Config(String),
    /// Exit 1: the analysis is infeasible or inconclusive.
    Analysis(String),
    /// Exit 3: a numerical or I/O failure at run time.
    Runtime(String),
    /// An error bubbled up from the analysis library, mapped by kind.
    Core(CoreError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Analysis(m) | CliError::Runtime(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

/// Exit code contract: 0 success, 1 infeasible or inconclusive analysis,
/// 2 configuration error, 3 numerical failure.
pub fn exit_code_for_core(e: &CoreError) -> u8 {
    match e {
        CoreError::Config(_) | CoreError::UnsupportedSurface => 2,
        CoreError::Infeasible { .. }
        | CoreError::NoEquilibrium { .. }
        | CoreError::NoCrossing
        | CoreError::DomainError(_)
        | CoreError::EquivalentControlSingular { .. } => 1,
        CoreError::IllConditionedTransform { .. }
        | CoreError::EventLocalizationFailure { .. }
        | CoreError::ZenoError { .. }
        | CoreError::DivergenceError { .. }
        | CoreError::Numerical(_) => 3,
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Analysis(_) => 1,
            CliError::Runtime(_) => 3,
            CliError::Core(e) => exit_code_for_core(e),
        }
    }

    fn coded(code: u8, message: String) -> Self {
        match code {
            2 => CliError::Config(message),
            3 => CliError::Runtime(message),
            _ => CliError::Analysis(message),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn mat_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn sorted_eigs(a: &DMatrix<f64>) -> Vec<(f64, f64)> {
    let mut eigs: Vec<(f64, f64)> = a
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eigs
}

fn surface_for(cfg: &RunConfig, delta: f64) -> CliResult<SlidingSurface> {
    Ok(SlidingSurface::new(cfg.m.clone(), cfg.m5, delta)?)
}

fn sim_options(cfg: &RunConfig) -> SimOptions {
    let mut opts = SimOptions::new(cfg.t_end, cfg.sample_dt);
    opts.record_from = cfg.record_from;
    opts.max_events = cfg.max_events;
    opts.divergence_limit = cfg.divergence_limit;
    opts
}

fn certify_options(cfg: &RunConfig) -> CertifyOptions {
    CertifyOptions {
        solver: SolverOptions {
            tol: cfg.lmi_tol,
            margin: cfg.lmi_margin,
            ..SolverOptions::default()
        },
        use_modal: cfg.use_modal,
        h_coord: cfg.h_coord,
        back_map: cfg.back_map,
    }
}

fn converter_params(cfg: &RunConfig) -> CliResult<CukParams> {
    match &cfg.circuit {
        Circuit::Converter(p) => Ok(*p),
        Circuit::Generic { .. } => Err(CliError::Config(
            "this command needs converter parameters (v_in, l1, l2, c1, c2, r_load) in [circuit]"
                .into(),
        )),
    }
}

fn family_coeffs(family: &SurfaceFamily) -> (f64, f64) {
    match *family {
        SurfaceFamily::InputCurrent { m1 } => (m1, 0.0),
        SurfaceFamily::WeightedCurrentSum { m1, m2 } => (m1, m2),
    }
}

fn branch_label(tag: &BranchTag) -> &'static str {
    match tag {
        BranchTag::Feasible => "feasible",
        BranchTag::InfeasibleControl => "infeasible control",
    }
}

/// Closed-form analysis shared by every converter command: surface family,
/// sliding equilibria (feasible branch first) and the reduced model at the
/// primary equilibrium.
struct ConverterAnalysis {
    family: SurfaceFamily,
    equilibria: Vec<EquilibriumResult>,
    a1: DMatrix<f64>,
    reduced: ReducedModel,
}

fn analyze_converter(cfg: &RunConfig, params: &CukParams) -> CliResult<ConverterAnalysis> {
    let surface = surface_for(cfg, cfg.delta)?;
    let family = ripple::classify(&surface)?;
    let equilibria = match family {
        SurfaceFamily::InputCurrent { m1 } => cuk::input_current_equilibria(params, m1, cfg.m5)?,
        SurfaceFamily::WeightedCurrentSum { m1, m2 } => {
            cuk::weighted_sum_equilibria(params, m1, m2, cfg.m5)?
        }
    };
    let sys = cuk::build_system(params)?;
    let star = &equilibria[0];
    let a1 = equiv::linearize(&sys, &surface, &star.x_star)?;
    let reduced = equiv::reduce(&sys, &surface, &star.x_star, &a1)?;
    Ok(ConverterAnalysis {
        family,
        equilibria,
        a1,
        reduced,
    })
}

fn run_section(report: &mut Report, cfg: &RunConfig) {
    report.open("run");
    match &cfg.circuit {
        Circuit::Converter(p) => {
            report.text("circuit", "converter");
            report.num("v_in [V]", p.v_in);
            report.num("l1 [H]", p.l1);
            report.num("l2 [H]", p.l2);
            report.num("c1 [F]", p.c1);
            report.num("c2 [F]", p.c2);
            report.num("r_load [Ohm]", p.r_load);
        }
        Circuit::Generic { b, .. } => {
            report.text("circuit", "generic matrices");
            report.int("dim", b.len());
        }
    }
    report.list("m", cfg.m.iter().copied().collect());
    report.num("m5", cfg.m5);
    report.num("delta", cfg.delta);
    let realization = match cfg.realization {
        cuk::Realization::Unidirectional => "uni",
        cuk::Realization::Bidirectional => "bi",
    };
    report.text("realization", realization);
    report.num("t_end [s]", cfg.t_end);
    report.num("sample_dt [s]", cfg.sample_dt);
    report.num("record_from [s]", cfg.record_from);
    report.num("lmi_tol", cfg.lmi_tol);
    report.num("lmi_margin", cfg.lmi_margin);
    report.flag("use_modal", cfg.use_modal);
    report.int("h_coord", cfg.h_coord);
    let back_map = match cfg.back_map {
        BackMap::Full => "full".to_string(),
        BackMap::Column(k) => format!("column {k}"),
    };
    report.text("back_map", back_map);
}

fn equilibrium_section(
    report: &mut Report,
    name: &str,
    eq: &EquilibriumResult,
    labels: Option<&[&str]>,
) {
    report.open(name);
    report.text("branch", branch_label(&eq.branch_tag));
    report.num("u_eq", eq.u_eq_star);
    match labels {
        Some(labels) => {
            for (label, value) in labels.iter().zip(eq.x_star.iter()) {
                report.num(*label, *value);
            }
        }
        None => report.list("x_star", eq.x_star.iter().copied().collect()),
    }
    report.num("residual [state/s]", eq.residual);
}

fn linearization_section(
    report: &mut Report,
    a1: &DMatrix<f64>,
    reduced: &ReducedModel,
    off_eigs: Option<Vec<(f64, f64)>>,
) {
    report.open("linearization");
    report.rows("a1 [1/s]", mat_rows(a1));
    report.int("eliminated_index", reduced.eliminated_index);
    report.rows("a_star [1/s]", mat_rows(&reduced.a_star));
    report.complexes("a_star_eigenvalues [1/s]", sorted_eigs(&reduced.a_star));
    if let Some(eigs) = off_eigs {
        report.complexes("off_mode_eigenvalues [1/s]", eigs);
    }
}

fn certificate_section(report: &mut Report, cert: &SectorCertificate) {
    report.open("certificate");
    report.num("alpha", cert.alpha);
    report.num("r_tilde [1/s]", cert.r_tilde);
    report.num("r [1/s]", cert.r);
    let map = match cert.back_map {
        BackMap::Full => "full".to_string(),
        BackMap::Column(k) => format!("column {k}"),
    };
    report.text("back_map", map);
    match &cert.transform {
        Some(mt) => {
            let k = match cert.back_map {
                BackMap::Column(k) => k,
                BackMap::Full => 1,
            };
            report.num(
                "r_column [1/s]",
                lmi::sector_back_map(cert.r_tilde, &mt.t_inv, BackMap::Column(k)),
            );
            report.num(
                "r_full [1/s]",
                lmi::sector_back_map(cert.r_tilde, &mt.t_inv, BackMap::Full),
            );
            report.num("transform_cond", mt.cond);
        }
        None => {
            report.num("r_column [1/s]", cert.r_tilde);
            report.num("r_full [1/s]", cert.r_tilde);
        }
    }
    let verify = lmi::verify_certificate(cert, 500, 7);
    report.open("certificate.verification");
    report.int("samples", verify.samples);
    report.int("failures", verify.failures);
    report.num("y_min_eig", verify.y_min_eig);
    report.num("slack_min_eig", verify.slack_min_eig);
    report.num("q_min_eig", verify.q_min_eig);
    report.num("min_relative_margin", verify.min_relative_margin);
    report.flag("passed", verify.passed);
}

pub fn cmd_analyze(cfg: &RunConfig, out_dir: &Path) -> CliResult<()> {
    let mut report = Report::new();
    run_section(&mut report, cfg);
    match &cfg.circuit {
        Circuit::Converter(params) => {
            let an = analyze_converter(cfg, params)?;
            for (i, eq) in an.equilibria.iter().enumerate() {
                equilibrium_section(
                    &mut report,
                    &format!("equilibrium.branch{i}"),
                    eq,
                    Some(&STATE_LABELS),
                );
            }
            let star = &an.equilibria[0];
            let off = cuk::off_mode_eigenvalues(params)?
                .iter()
                .map(|c| (c.re, c.im))
                .collect();
            linearization_section(&mut report, &an.a1, &an.reduced, Some(off));
            let cert = lmi::certify_sector(&an.reduced, &certify_options(cfg))?;
            certificate_section(&mut report, &cert);

            let prediction = ripple::predict_ripples(
                params,
                &an.family,
                &star.x_star,
                star.u_eq_star,
                cfg.delta,
            )?;
            report.open("ripple");
            ripple_entries(&mut report, &prediction);

            let crossing = cuk::axis_crossing_ripple_bound(
                params,
                family_coeffs(&an.family),
                &star.x_star,
                cert.r,
            )?;
            let delta_max = ripple::hysteresis_limit(
                params,
                &an.family,
                &star.x_star,
                star.u_eq_star,
                crossing,
            )?;
            report.open("limits");
            report.num("dv_c1_crossing [V]", crossing);
            report.num("delta_max [A]", delta_max);
        }
        Circuit::Generic { a, b, c, d, guess } => {
            let labels = (0..b.len()).map(|i| format!("x{i}")).collect();
            let sys =
                SwitchedAffineSystem::new(a.clone(), b.clone(), c.clone(), d.clone(), labels)?;
            let surface = surface_for(cfg, cfg.delta)?;
            let eq = equiv::find_equilibrium(&sys, &surface, guess)?;
            equilibrium_section(&mut report, "equilibrium", &eq, None);
            let a1 = equiv::linearize(&sys, &surface, &eq.x_star)?;
            let reduced = equiv::reduce(&sys, &surface, &eq.x_star, &a1)?;
            linearization_section(&mut report, &a1, &reduced, None);
            let cert = lmi::certify_sector(&reduced, &certify_options(cfg))?;
            certificate_section(&mut report, &cert);
        }
    }
    let text = report.write(out_dir, "report").map_err(CliError::Runtime)?;
    print!("{text}");
    Ok(())
}

fn ripple_entries(report: &mut Report, p: &RipplePrediction) {
    report.num("t_s [s]", p.t_s);
    report.num("di_l1 [A]", p.di_l1);
    report.num("di_l2 [A]", p.di_l2);
    report.num("dv_c1 [V]", p.dv_c1);
    report.num("dv_c2 [V]", p.dv_c2);
}

fn write_waveform(path: &Path, trace: &SimTrace) -> CliResult<()> {
    let mut out = String::with_capacity(64 * trace.samples.len() + 64);
    out.push_str("t,i_l1,i_l2,v_c1,v_c2,u,mode\n");
    for s in &trace.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.t,
            s.x[0],
            s.x[1],
            s.x[2],
            s.x[3],
            s.mode.u(),
            s.mode.as_str()
        );
    }
    write_file(path, &out)
}

fn write_phase(path: &Path, trace: &SimTrace) -> CliResult<()> {
    let mut out = String::with_capacity(32 * trace.samples.len() + 16);
    out.push_str("i_l1,i_l2\n");
    for s in &trace.samples {
        let _ = writeln!(out, "{},{}", s.x[0], s.x[1]);
    }
    write_file(path, &out)
}

fn metrics_section(report: &mut Report, trace: &SimTrace, metrics: &CycleMetrics) {
    report.open("metrics");
    report.int("samples", trace.samples.len());
    report.int("events", trace.events.len());
    report.flag("converged", metrics.converged);
    report.int("cycles_observed", metrics.cycles_observed);
    match metrics.period {
        Some(t_s) => report.num("T_S [s]", t_s),
        None => report.text("T_S [s]", "not measured"),
    }
    let modes: Vec<&str> = metrics.modes_visited.iter().map(|m| m.as_str()).collect();
    report.text("modes", modes.join(", "));
    if let Some(ripple) = &metrics.ripple {
        for (label, value) in STATE_LABELS.iter().zip(ripple.iter()) {
            report.num(format!("ripple {label}"), *value);
        }
    }
    if let Some(average) = &metrics.average {
        for (label, value) in STATE_LABELS.iter().zip(average.iter()) {
            report.num(format!("average {label}"), *value);
        }
    }
}

pub fn cmd_simulate(cfg: &RunConfig, out_dir: &Path) -> CliResult<()> {
    let params = converter_params(cfg)?;
    let surface = surface_for(cfg, cfg.delta)?;
    let automaton = cuk::build_automaton(&params, &surface, cfg.realization)?;
    let trace = sim::simulate(&automaton, &sim_options(cfg))?;
    write_waveform(&out_dir.join("waveform.csv"), &trace)?;
    write_phase(&out_dir.join("phase.csv"), &trace)?;

    let metrics = sim::measure_cycle(&trace);
    let mut report = Report::new();
    run_section(&mut report, cfg);
    metrics_section(&mut report, &trace, &metrics);

    report.open("prediction");
    match prediction_for(cfg, &params) {
        Ok(prediction) => ripple_entries(&mut report, &prediction),
        Err(reason) => report.text("unavailable", reason),
    }

    let text = report.write(out_dir, "report").map_err(CliError::Runtime)?;
    print!("{text}");
    Ok(())
}

fn prediction_for(cfg: &RunConfig, params: &CukParams) -> Result<RipplePrediction, String> {
    let inner = || -> Result<RipplePrediction, CoreError> {
        let surface = SlidingSurface::new(cfg.m.clone(), cfg.m5, cfg.delta)?;
        let family = ripple::classify(&surface)?;
        let equilibria = match family {
            SurfaceFamily::InputCurrent { m1 } => {
                cuk::input_current_equilibria(params, m1, cfg.m5)?
            }
            SurfaceFamily::WeightedCurrentSum { m1, m2 } => {
                cuk::weighted_sum_equilibria(params, m1, m2, cfg.m5)?
            }
        };
        let star = &equilibria[0];
        ripple::predict_ripples(params, &family, &star.x_star, star.u_eq_star, cfg.delta)
    };
    inner().map_err(|e| e.to_string())
}

pub fn cmd_sector_check(cfg: &RunConfig, deltas: &[f64], out_dir: &Path) -> CliResult<()> {
    let params = converter_params(cfg)?;
    let an = analyze_converter(cfg, &params)?;
    let cert = lmi::certify_sector(&an.reduced, &certify_options(cfg))?;
    let star = &an.equilibria[0];

    let mut report = Report::new();
    run_section(&mut report, cfg);
    certificate_section(&mut report, &cert);

    let mut inconclusive = 0usize;
    for &delta in deltas {
        let surface = surface_for(cfg, delta)?;
        let automaton = cuk::build_automaton(&params, &surface, cfg.realization)?;
        let trace = sim::simulate(&automaton, &sim_options(cfg))?;
        let series = sim::record_remainder(&trace, &an.reduced, cfg.h_coord)?;

        let csv_path = out_dir.join(format!("sector_{delta}.csv"));
        let mut csv = String::with_capacity(64 * series.points.len() + 64);
        csv.push_str("y3,h3_star,r_tilde_bound,r_bound\n");
        for p in &series.points {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                p.y,
                p.h,
                cert.r_tilde * p.y.abs(),
                cert.r * p.y.abs()
            );
        }
        write_file(&csv_path, &csv)?;

        report.open(format!("sector {delta}"));
        report.num("delta [A]", delta);
        report.int("points", series.points.len());
        report.int("skipped", series.skipped);
        if series.points.is_empty() {
            report.text("verdict", "inconclusive");
            report.text(
                "note",
                "no steady-state samples recorded; extend t_end or lower record_from",
            );
            inconclusive += 1;
            println!("delta = {delta}: inconclusive (no steady-state samples)");
            continue;
        }
        let worst = series
            .points
            .iter()
            .map(|p| p.h.abs() - cert.r * p.y.abs())
            .fold(f64::NEG_INFINITY, f64::max);
        let verdict = if worst <= 0.0 { "inside" } else { "violated" };
        report.text("verdict", verdict);
        report.num("worst_excess [V/s]", worst);
        match ripple::estimate_linear_ripple_limit(&series, cert.r) {
            Ok(crossing) => {
                report.num("crossing_dv_c1 [V]", crossing);
                match ripple::hysteresis_limit(
                    &params,
                    &an.family,
                    &star.x_star,
                    star.u_eq_star,
                    crossing,
                ) {
                    Ok(limit) => report.num("implied_delta_max [A]", limit),
                    Err(e) => report.text("implied_delta_max", format!("unavailable: {e}")),
                }
            }
            Err(CoreError::NoCrossing) => report.text(
                "crossing_dv_c1",
                "no sector crossing within the recorded excursion",
            ),
            Err(CoreError::DomainError(msg)) => {
                report.text("crossing_dv_c1", format!("unavailable: {msg}"))
            }
            Err(e) => return Err(e.into()),
        }
        println!(
            "delta = {delta}: {verdict} ({} points, worst excess {worst:e})",
            series.points.len()
        );
    }

    report.write(out_dir, "report").map_err(CliError::Runtime)?;
    if inconclusive > 0 {
        return Err(CliError::Analysis(format!(
            "{inconclusive} of {} sector checks inconclusive",
            deltas.len()
        )));
    }
    Ok(())
}

struct SweepRow {
    delta: f64,
    predicted: RipplePrediction,
    t_s_measured: Option<f64>,
    ripple_measured: Option<DVector<f64>>,
    sector_ok: bool,
}

fn sweep_row(
    cfg: &RunConfig,
    params: &CukParams,
    an: &ConverterAnalysis,
    cert: &SectorCertificate,
    star: &EquilibriumResult,
    delta: f64,
) -> Result<SweepRow, (u8, String)> {
    let core = |e: CoreError| (exit_code_for_core(&e), e.to_string());
    let predicted =
        ripple::predict_ripples(params, &an.family, &star.x_star, star.u_eq_star, delta)
            .map_err(core)?;
    let surface = SlidingSurface::new(cfg.m.clone(), cfg.m5, delta).map_err(core)?;
    let automaton = cuk::build_automaton(params, &surface, cfg.realization).map_err(core)?;
    let trace = sim::simulate(&automaton, &sim_options(cfg)).map_err(core)?;
    let metrics = sim::measure_cycle(&trace);
    let series = sim::record_remainder(&trace, &an.reduced, cfg.h_coord).map_err(core)?;
    if series.points.is_empty() {
        return Err((1, "no steady-state samples recorded".into()));
    }
    if !metrics.converged {
        return Err((
            1,
            format!("switching cycle not converged within t_end = {}", cfg.t_end),
        ));
    }
    let worst = series
        .points
        .iter()
        .map(|p| p.h.abs() - cert.r * p.y.abs())
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepRow {
        delta,
        predicted,
        t_s_measured: metrics.period,
        ripple_measured: metrics.ripple,
        sector_ok: worst <= 0.0,
    })
}

const SWEEP_HEADER: &str = "delta,T_S_predicted,T_S_measured,\
ripple_di_l1_predicted,ripple_di_l1_measured,\
ripple_di_l2_predicted,ripple_di_l2_measured,\
ripple_dv_c1_predicted,ripple_dv_c1_measured,\
ripple_dv_c2_predicted,ripple_dv_c2_measured,\
sector_ok,status";

pub fn cmd_sweep(cfg: &RunConfig, deltas: &[f64], out_dir: &Path) -> CliResult<()> {
    let params = converter_params(cfg)?;
    let an = analyze_converter(cfg, &params)?;
    let cert = lmi::certify_sector(&an.reduced, &certify_options(cfg))?;
    let star = an.equilibria[0].clone();

    let results: Vec<Result<SweepRow, (u8, String)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = deltas
            .iter()
            .map(|&delta| {
                let an = &an;
                let cert = &cert;
                let star = &star;
                let params = &params;
                scope.spawn(move || sweep_row(cfg, params, an, cert, star, delta))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut csv = String::new();
    csv.push_str(SWEEP_HEADER);
    csv.push('\n');
    for (delta, result) in deltas.iter().zip(&results) {
        match result {
            Ok(row) => {
                let m = |i: usize| opt(row.ripple_measured.as_ref().map(|r| r[i]));
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{},{},{},{},ok",
                    row.delta,
                    row.predicted.t_s,
                    opt(row.t_s_measured),
                    row.predicted.di_l1,
                    m(0),
                    row.predicted.di_l2,
                    m(1),
                    row.predicted.dv_c1,
                    m(2),
                    row.predicted.dv_c2,
                    m(3),
                    row.sector_ok
                );
                println!(
                    "delta = {}: T_S predicted {} s, measured {} s, sector_ok = {}",
                    row.delta,
                    row.predicted.t_s,
                    opt(row.t_s_measured),
                    row.sector_ok
                );
            }
            Err((_, message)) => {
                let _ = writeln!(csv, "{delta},,,,,,,,,,,,{}", message.replace(',', ";"));
                println!("delta = {delta}: failed: {message}");
            }
        }
    }
    write_file(&out_dir.join("sweep.csv"), &csv)?;

    if results.iter().any(|r| r.is_ok()) {
        Ok(())
    } else {
        let (code, message) = results
            .first()
            .and_then(|r| r.as_ref().err())
            .cloned()
            .unwrap_or((1, "empty delta list".into()));
        Err(CliError::coded(code, message))
    }
}
