//! Run configuration: flat sections of `key = value` pairs with engineering
//! suffixes on numbers.
//!
//! Sections are `[circuit]`, `[surface]`, `[sim]`, `[lmi]` and `[output]`.
//! The circuit is given either as converter parameters (`v_in`, `l1`, `l2`,
//! `c1`, `c2`, `r_load`, each defaulting to the reference design) or as
//! explicit row-major matrices `a`, `b`, `c`, `d` with an optional
//! equilibrium `guess`.

use std::fmt;
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use smconv_core::cuk::{CukParams, Realization};
use smconv_core::lmi::{BackMap, CERTIFICATE_MARGIN};

/// Parse or validation failure, carrying the offending line when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn field(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Either the converter parameter set or an explicit switched affine system.
#[derive(Debug, Clone, PartialEq)]
pub enum Circuit {
    Converter(CukParams),
    Generic {
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: DMatrix<f64>,
        d: DVector<f64>,
        guess: DVector<f64>,
    },
}

impl Circuit {
    pub fn dim(&self) -> usize {
        match self {
            Circuit::Converter(_) => 4,
            Circuit::Generic { b, .. } => b.len(),
        }
    }
}

/// A fully resolved run configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub circuit: Circuit,
    pub m: DVector<f64>,
    pub m5: f64,
    pub delta: f64,
    pub t_end: f64,
    pub sample_dt: f64,
    pub record_from: f64,
    pub realization: Realization,
    pub max_events: usize,
    pub divergence_limit: f64,
    pub lmi_tol: f64,
    pub lmi_margin: f64,
    pub use_modal: bool,
    pub h_coord: usize,
    pub back_map: BackMap,
    pub out_dir: Option<PathBuf>,
}

/// Parses a decimal number with an optional engineering suffix
/// (`n`, `u`, `m`, `k`).
pub fn parse_number(token: &str) -> Result<f64, String> {
    let t = token.trim();
    if t.is_empty() {
        return Err("empty number".into());
    }
    let parsed = match t.parse::<f64>() {
        Ok(v) => v,
        Err(_) => {
            let suffix = t.chars().last().unwrap();
            let exponent = match suffix {
                'n' => -9,
                'u' => -6,
                'm' => -3,
                'k' => 3,
                _ => return Err(format!("cannot parse `{t}` as a number")),
            };
            let head = &t[..t.len() - 1];
            // splice the suffix in as a decimal exponent so the value parses
            // exactly; a head that already carries an exponent is scaled
            head.parse::<f64>()
                .map_err(|_| format!("cannot parse `{t}` as a number"))
                .map(|base| {
                    format!("{head}e{exponent}")
                        .parse::<f64>()
                        .unwrap_or(base * 10f64.powi(exponent))
                })?
        }
    };
    if !parsed.is_finite() {
        return Err(format!("`{t}` is not a finite number"));
    }
    Ok(parsed)
}

fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    value.split(',').map(parse_number).collect()
}

const SECTIONS: [&str; 5] = ["circuit", "surface", "sim", "lmi", "output"];

struct RawEntry {
    section: String,
    key: String,
    value: String,
    line: usize,
    used: bool,
}

struct Fields {
    entries: Vec<RawEntry>,
}

impl Fields {
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        let e = self
            .entries
            .iter_mut()
            .find(|e| !e.used && e.section == section && e.key == key)?;
        e.used = true;
        Some((e.value.clone(), e.line))
    }

    fn has(&self, section: &str, key: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.section == section && e.key == key)
    }

    fn num(&mut self, section: &str, key: &str) -> Result<Option<(f64, usize)>, ConfigError> {
        match self.take(section, key) {
            None => Ok(None),
            Some((value, line)) => {
                let v = parse_number(&value).map_err(|e| ConfigError::at(line, e))?;
                Ok(Some((v, line)))
            }
        }
    }

    fn num_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.num(section, key)?.map_or(default, |(v, _)| v))
    }

    fn pos_or(&mut self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.num(section, key)? {
            None => Ok(default),
            Some((v, _)) if v > 0.0 => Ok(v),
            Some((_, line)) => Err(ConfigError::at(line, format!("`{key}` must be positive"))),
        }
    }

    fn require_num(&mut self, section: &str, key: &str) -> Result<f64, ConfigError> {
        self.num(section, key)?
            .map(|(v, _)| v)
            .ok_or_else(|| ConfigError::field(format!("missing `{key}` in [{section}]")))
    }

    fn list(&mut self, section: &str, key: &str) -> Result<Option<(Vec<f64>, usize)>, ConfigError> {
        match self.take(section, key) {
            None => Ok(None),
            Some((value, line)) => {
                let v = parse_list(&value).map_err(|e| ConfigError::at(line, e))?;
                Ok(Some((v, line)))
            }
        }
    }

    fn require_list(&mut self, section: &str, key: &str) -> Result<(Vec<f64>, usize), ConfigError> {
        self.list(section, key)?
            .ok_or_else(|| ConfigError::field(format!("missing `{key}` in [{section}]")))
    }

    fn word_or(
        &mut self,
        section: &str,
        key: &str,
        default: &str,
        allowed: &[&str],
    ) -> Result<String, ConfigError> {
        match self.take(section, key) {
            None => Ok(default.to_string()),
            Some((value, line)) => {
                if allowed.contains(&value.as_str()) {
                    Ok(value)
                } else {
                    Err(ConfigError::at(
                        line,
                        format!(
                            "`{key}` must be one of {}, got `{value}`",
                            allowed.join(", ")
                        ),
                    ))
                }
            }
        }
    }

    fn usize_or(&mut self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(section, key) {
            None => Ok(default),
            Some((value, line)) => value.parse::<usize>().map_err(|_| {
                ConfigError::at(line, format!("`{key}` must be a nonnegative integer"))
            }),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(e) = self.entries.iter().find(|e| !e.used) {
            return Err(ConfigError::at(
                e.line,
                format!("unknown key `{}` in [{}]", e.key, e.section),
            ));
        }
        Ok(())
    }
}

fn tokenize(text: &str) -> Result<Fields, ConfigError> {
    let mut section = String::new();
    let mut entries: Vec<RawEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with(';') {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::at(line, format!("unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(ConfigError::at(line, "expected `key = value`"));
        };
        let key = key.trim();
        let value = value.trim();
        if section.is_empty() {
            return Err(ConfigError::at(line, "key before any section header"));
        }
        if key.is_empty() {
            return Err(ConfigError::at(line, "empty key"));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, format!("empty value for `{key}`")));
        }
        if let Some(prev) = entries
            .iter()
            .find(|e| e.section == section && e.key == key)
        {
            return Err(ConfigError::at(
                line,
                format!(
                    "duplicate key `{key}` in [{section}] (first set on line {})",
                    prev.line
                ),
            ));
        }
        entries.push(RawEntry {
            section: section.clone(),
            key: key.to_string(),
            value: value.to_string(),
            line,
            used: false,
        });
    }
    Ok(Fields { entries })
}

const CONVERTER_KEYS: [&str; 6] = ["v_in", "l1", "l2", "c1", "c2", "r_load"];

fn parse_circuit(f: &mut Fields) -> Result<Circuit, ConfigError> {
    if !f.has("circuit", "a") {
        let p = CukParams::preset();
        return Ok(Circuit::Converter(CukParams {
            v_in: f.pos_or("circuit", "v_in", p.v_in)?,
            l1: f.pos_or("circuit", "l1", p.l1)?,
            l2: f.pos_or("circuit", "l2", p.l2)?,
            c1: f.pos_or("circuit", "c1", p.c1)?,
            c2: f.pos_or("circuit", "c2", p.c2)?,
            r_load: f.pos_or("circuit", "r_load", p.r_load)?,
        }));
    }
    for key in CONVERTER_KEYS {
        if f.has("circuit", key) {
            return Err(ConfigError::field(format!(
                "[circuit] mixes converter parameters (`{key}`) with explicit matrices"
            )));
        }
    }
    let (b, _) = f.require_list("circuit", "b")?;
    let n = b.len();
    let (a, a_line) = f.require_list("circuit", "a")?;
    if a.len() != n * n {
        return Err(ConfigError::at(
            a_line,
            format!("`a` needs {n}×{n} = {} entries to match `b`", n * n),
        ));
    }
    let (c, c_line) = f.require_list("circuit", "c")?;
    if c.len() != n * n {
        return Err(ConfigError::at(
            c_line,
            format!("`c` needs {n}×{n} = {} entries to match `b`", n * n),
        ));
    }
    let (d, d_line) = f.require_list("circuit", "d")?;
    if d.len() != n {
        return Err(ConfigError::at(
            d_line,
            format!("`d` needs {n} entries to match `b`"),
        ));
    }
    let guess = match f.list("circuit", "guess")? {
        None => DVector::zeros(n),
        Some((g, g_line)) => {
            if g.len() != n {
                return Err(ConfigError::at(
                    g_line,
                    format!("`guess` needs {n} entries to match `b`"),
                ));
            }
            DVector::from_vec(g)
        }
    };
    Ok(Circuit::Generic {
        a: DMatrix::from_row_slice(n, n, &a),
        b: DVector::from_vec(b),
        c: DMatrix::from_row_slice(n, n, &c),
        d: DVector::from_vec(d),
        guess,
    })
}

fn parse_surface(f: &mut Fields, dim: usize) -> Result<DVector<f64>, ConfigError> {
    let m = match f.list("surface", "m")? {
        Some((list, line)) => {
            for key in ["m1", "m2", "m3", "m4"] {
                if f.has("surface", key) {
                    return Err(ConfigError::at(
                        line,
                        "give either `m` or the indexed coefficients m1..m4, not both",
                    ));
                }
            }
            DVector::from_vec(list)
        }
        None => DVector::from_vec(vec![
            f.num_or("surface", "m1", 0.0)?,
            f.num_or("surface", "m2", 0.0)?,
            f.num_or("surface", "m3", 0.0)?,
            f.num_or("surface", "m4", 0.0)?,
        ]),
    };
    if m.len() != dim {
        return Err(ConfigError::field(format!(
            "surface has {} coefficients but the circuit has {dim} states",
            m.len()
        )));
    }
    if m.iter().all(|v| *v == 0.0) {
        return Err(ConfigError::field(
            "surface coefficients must not all be zero",
        ));
    }
    Ok(m)
}

/// Parses a configuration file, applying defaults for every omitted key.
pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let mut f = tokenize(text)?;

    let circuit = parse_circuit(&mut f)?;
    let dim = circuit.dim();
    let m = parse_surface(&mut f, dim)?;
    let m5 = f.require_num("surface", "m5")?;
    let delta = match f.num("surface", "delta")? {
        Some((v, _)) if v > 0.0 => v,
        Some((_, line)) => return Err(ConfigError::at(line, "`delta` must be positive")),
        None => return Err(ConfigError::field("missing `delta` in [surface]")),
    };

    let t_end = f.pos_or("sim", "t_end", 2e-3)?;
    let sample_dt = f.pos_or("sim", "sample_dt", 1e-6)?;
    let record_from = match f.num("sim", "record_from")? {
        None => 0.0,
        Some((v, _)) if v >= 0.0 => v,
        Some((_, line)) => return Err(ConfigError::at(line, "`record_from` must be nonnegative")),
    };
    let realization = match f
        .word_or("sim", "realization", "uni", &["uni", "bi"])?
        .as_str()
    {
        "bi" => Realization::Bidirectional,
        _ => Realization::Unidirectional,
    };
    let max_events = f.usize_or("sim", "max_events", 1_000_000)?;
    let divergence_limit = f.pos_or("sim", "divergence_limit", 1e9)?;

    let lmi_tol = f.pos_or("lmi", "tol", 1e-8)?;
    let lmi_margin = f.pos_or("lmi", "margin", CERTIFICATE_MARGIN)?;
    let use_modal = f.word_or("lmi", "use_modal", "true", &["true", "false"])? == "true";
    let h_coord = f.usize_or("lmi", "h_coord", 1)?;
    if h_coord + 1 >= dim {
        return Err(ConfigError::field(format!(
            "`h_coord` = {h_coord} out of range for the {}-dimensional reduced model",
            dim - 1
        )));
    }
    let back_map = match f
        .word_or("lmi", "back_map", "column", &["column", "full"])?
        .as_str()
    {
        "full" => BackMap::Full,
        _ => BackMap::Column(h_coord),
    };

    let out_dir = f.take("output", "dir").map(|(v, _)| PathBuf::from(v));

    f.finish()?;
    Ok(RunConfig {
        circuit,
        m,
        m5,
        delta,
        t_end,
        sample_dt,
        record_from,
        realization,
        max_events,
        divergence_limit,
        lmi_tol,
        lmi_margin,
        use_modal,
        h_coord,
        back_map,
        out_dir,
    })
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values
        .into_iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Serializes a configuration so that [`parse`] reproduces it exactly.
pub fn to_text(cfg: &RunConfig) -> String {
    let mut out = String::new();
    out.push_str("[circuit]\n");
    match &cfg.circuit {
        Circuit::Converter(p) => {
            out.push_str(&format!("v_in = {}\n", p.v_in));
            out.push_str(&format!("l1 = {}\n", p.l1));
            out.push_str(&format!("l2 = {}\n", p.l2));
            out.push_str(&format!("c1 = {}\n", p.c1));
            out.push_str(&format!("c2 = {}\n", p.c2));
            out.push_str(&format!("r_load = {}\n", p.r_load));
        }
        Circuit::Generic { a, b, c, d, guess } => {
            out.push_str(&format!(
                "a = {}\n",
                join(
                    a.row_iter()
                        .flat_map(|r| r.iter().copied().collect::<Vec<_>>())
                )
            ));
            out.push_str(&format!("b = {}\n", join(b.iter().copied())));
            out.push_str(&format!(
                "c = {}\n",
                join(
                    c.row_iter()
                        .flat_map(|r| r.iter().copied().collect::<Vec<_>>())
                )
            ));
            out.push_str(&format!("d = {}\n", join(d.iter().copied())));
            out.push_str(&format!("guess = {}\n", join(guess.iter().copied())));
        }
    }
    out.push_str("\n[surface]\n");
    out.push_str(&format!("m = {}\n", join(cfg.m.iter().copied())));
    out.push_str(&format!("m5 = {}\n", cfg.m5));
    out.push_str(&format!("delta = {}\n", cfg.delta));
    out.push_str("\n[sim]\n");
    out.push_str(&format!("t_end = {}\n", cfg.t_end));
    out.push_str(&format!("sample_dt = {}\n", cfg.sample_dt));
    out.push_str(&format!("record_from = {}\n", cfg.record_from));
    let realization = match cfg.realization {
        Realization::Unidirectional => "uni",
        Realization::Bidirectional => "bi",
    };
    out.push_str(&format!("realization = {realization}\n"));
    out.push_str(&format!("max_events = {}\n", cfg.max_events));
    out.push_str(&format!("divergence_limit = {}\n", cfg.divergence_limit));
    out.push_str("\n[lmi]\n");
    out.push_str(&format!("tol = {}\n", cfg.lmi_tol));
    out.push_str(&format!("margin = {}\n", cfg.lmi_margin));
    out.push_str(&format!("use_modal = {}\n", cfg.use_modal));
    out.push_str(&format!("h_coord = {}\n", cfg.h_coord));
    let back_map = match cfg.back_map {
        BackMap::Full => "full",
        BackMap::Column(_) => "column",
    };
    out.push_str(&format!("back_map = {back_map}\n"));
    if let Some(dir) = &cfg.out_dir {
        out.push_str("\n[output]\n");
        out.push_str(&format!("dir = {}\n", dir.display()));
    }
    out
}
