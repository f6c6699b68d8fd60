//! Experiment configuration: a line-oriented `key = value` format with
//! `[section]` headers and `#` comments.
//!
//! Parsing is strict. Unknown sections or keys, malformed values and
//! violated constraints are all collected with their line numbers, so one
//! pass reports every problem in a file.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use elax_core::lax::Pair3D;
use elax_core::spectral::{GridSpec, MAX_POINTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Simulate2d,
    Simulate3d,
    Laxcheck2d,
    Laxcheck3d,
    Spectrum,
    Pseudospec,
    Lyapunov,
    Expand,
}

impl Kind {
    pub const ALL: [Kind; 8] = [
        Kind::Simulate2d,
        Kind::Simulate3d,
        Kind::Laxcheck2d,
        Kind::Laxcheck3d,
        Kind::Spectrum,
        Kind::Pseudospec,
        Kind::Lyapunov,
        Kind::Expand,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate2d => "simulate2d",
            Kind::Simulate3d => "simulate3d",
            Kind::Laxcheck2d => "laxcheck2d",
            Kind::Laxcheck3d => "laxcheck3d",
            Kind::Spectrum => "spectrum",
            Kind::Pseudospec => "pseudospec",
            Kind::Lyapunov => "lyapunov",
            Kind::Expand => "expand",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Kind::Simulate3d | Kind::Laxcheck3d => 3,
            _ => 2,
        }
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown experiment kind `{s}` (expected one of {})", names.join(", "))
        })
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One problem found in a config file; line 0 means "not tied to a line".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config line {}: {}", self.line, self.message)
        }
    }
}

/// Pointwise maps available to the pushforward check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointMap {
    Identity,
    Square,
    Cube,
    Constant,
}

impl PointMap {
    pub fn name(self) -> &'static str {
        match self {
            PointMap::Identity => "identity",
            PointMap::Square => "square",
            PointMap::Cube => "cube",
            PointMap::Constant => "constant",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExpansionTargetSpec {
    /// Ω projected on the expansion sector.
    Vorticity,
    /// Sum of unit plane waves, transported with the basis.
    PlaneWaves(Vec<[i64; 3]>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub seed: u64,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub output_interval: Option<f64>,
    pub snapshot_interval: Option<f64>,
    pub initial: String,
    pub amplitude: f64,
    pub kappa: f64,
    pub out_dir: PathBuf,
    pub sobolev: Vec<f64>,
    pub phi0: Vec<[i64; 3]>,
    pub polarization: [f64; 3],
    pub pair: Pair3D,
    pub pushforward: Vec<PointMap>,
    pub expand_sector: i64,
    pub expand_truncation: Option<i64>,
    pub expand_target: ExpansionTargetSpec,
    pub spectrum_sector: Option<i64>,
    pub truncation: Option<i64>,
    pub s: f64,
    pub band: (f64, f64),
    pub dense_cap: usize,
    pub eps: Vec<f64>,
    pub re_range: (f64, f64),
    pub im_range: (f64, f64),
    pub resolution: (usize, usize),
    pub candidates: usize,
    pub horizon: f64,
    pub lyap_dt: f64,
    pub renorm_interval: f64,
    pub warmup: Option<f64>,
    pub points: Vec<[f64; 2]>,
}

impl ExperimentConfig {
    /// Defaults for everything except the grid size.
    fn with_n(n: usize) -> Self {
        Self {
            kind: None,
            seed: 0,
            n,
            dt: 1e-3,
            t_end: 1.0,
            output_interval: None,
            snapshot_interval: None,
            initial: "shear".into(),
            amplitude: 1.0,
            kappa: 3.0,
            out_dir: PathBuf::from("out"),
            sobolev: vec![0.0, 1.0, 2.0],
            phi0: vec![[1, 0, 0]],
            polarization: [1.0, 0.0, 0.0],
            pair: Pair3D::MontgomerySmith,
            pushforward: Vec::new(),
            expand_sector: 1,
            expand_truncation: None,
            expand_target: ExpansionTargetSpec::Vorticity,
            spectrum_sector: None,
            truncation: None,
            s: 0.0,
            band: (-0.9, 0.9),
            dense_cap: elax_core::spectrum::DEFAULT_DENSE_CAP,
            eps: vec![1e-6],
            re_range: (-0.5, 0.5),
            im_range: (-1.5, 1.5),
            resolution: (32, 32),
            candidates: elax_core::spectrum::DEFAULT_CANDIDATES,
            horizon: 50.0,
            lyap_dt: 1e-3,
            renorm_interval: 0.5,
            warmup: None,
            points: Vec::new(),
        }
    }

    /// Truncation K (modes |k_i| ≤ K) used when none is configured: the
    /// dealiased range of the grid.
    pub fn default_truncation(&self) -> i64 {
        (self.n / 3) as i64
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("", &["kind", "seed"]),
    ("grid", &["n"]),
    ("time", &["dt", "t_end", "output_interval", "snapshot_interval"]),
    ("initial", &["name", "amplitude", "kappa"]),
    ("output", &["dir"]),
    ("lax", &["sobolev", "phi0", "polarization", "pair", "pushforward"]),
    ("expand", &["sector", "truncation", "target"]),
    (
        "spectrum",
        &["sector", "truncation", "s", "band", "dense_cap", "eps", "re_range", "im_range", "resolution", "candidates"],
    ),
    ("lyapunov", &["horizon", "dt", "renorm_interval", "warmup", "points"]),
];

struct Entry {
    line: usize,
    value: String,
}

fn split_list(v: &str, sep: char) -> Vec<&str> {
    v.split(sep).map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_f64(v: &str) -> Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{v}` is not finite"));
    }
    Ok(x)
}

/// A number, optionally suffixed by `pi` as a multiplier (`0.5pi`, `pi`).
fn parse_angle(v: &str) -> Result<f64, String> {
    match v.strip_suffix("pi") {
        Some("") => Ok(std::f64::consts::PI),
        Some("-") => Ok(-std::f64::consts::PI),
        Some(head) => Ok(parse_f64(head)? * std::f64::consts::PI),
        None => parse_f64(v),
    }
}

fn parse_f64_list(v: &str) -> Result<Vec<f64>, String> {
    split_list(v, ',').into_iter().map(parse_f64).collect()
}

fn parse_pair_f64(v: &str) -> Result<(f64, f64), String> {
    match parse_f64_list(v)?.as_slice() {
        &[a, b] if a <= b => Ok((a, b)),
        &[_, _] => Err(format!("`{v}`: lower bound exceeds upper bound")),
        _ => Err(format!("`{v}`: expected two numbers `lo, hi`")),
    }
}

fn parse_wavevectors(v: &str, dim: usize) -> Result<Vec<[i64; 3]>, String> {
    let mut out = Vec::new();
    for item in split_list(v, ';') {
        let parts: Vec<i64> = split_list(item, ',')
            .into_iter()
            .map(|p| p.parse::<i64>().map_err(|_| format!("`{p}` is not an integer")))
            .collect::<Result<_, _>>()?;
        if parts.len() != dim {
            return Err(format!("wavevector `{item}` needs {dim} integers"));
        }
        let mut k = [0i64; 3];
        k[..dim].copy_from_slice(&parts);
        out.push(k);
    }
    if out.is_empty() {
        return Err("expected at least one wavevector".into());
    }
    Ok(out)
}

fn parse_points(v: &str) -> Result<Vec<[f64; 2]>, String> {
    split_list(v, ';')
        .into_iter()
        .map(|item| {
            let parts: Vec<f64> = split_list(item, ',').into_iter().map(parse_angle).collect::<Result<_, _>>()?;
            match parts.as_slice() {
                &[x, y] => Ok([x, y]),
                _ => Err(format!("point `{item}` needs two coordinates")),
            }
        })
        .collect()
}

struct Collector {
    entries: HashMap<(String, String), Entry>,
    errors: Vec<ConfigError>,
}

impl Collector {
    fn err(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(ConfigError { line, message: message.into() });
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        self.entries.remove(&(section.to_string(), key.to_string()))
    }

    /// Parses `[section] key` if present and stores it through `set`.
    fn get<T>(&mut self, section: &str, key: &str, parse: impl Fn(&str) -> Result<T, String>, mut set: impl FnMut(T)) -> usize {
        if let Some(e) = self.take(section, key) {
            match parse(&e.value) {
                Ok(v) => set(v),
                Err(m) => self.err(e.line, format!("{}: {m}", qualified(section, key))),
            }
            e.line
        } else {
            0
        }
    }
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        format!("`{key}`")
    } else {
        format!("`{key}` in [{section}]")
    }
}

fn positive(v: &str) -> Result<f64, String> {
    let x = parse_f64(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be positive, got {x}"))
    }
}

fn nonnegative(v: &str) -> Result<f64, String> {
    let x = parse_f64(v)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("must be nonnegative, got {x}"))
    }
}

fn count(v: &str) -> Result<usize, String> {
    let x: usize = v.parse().map_err(|_| format!("`{v}` is not a nonnegative integer"))?;
    if x == 0 {
        return Err("must be at least 1".into());
    }
    Ok(x)
}

fn integer(v: &str) -> Result<i64, String> {
    v.parse().map_err(|_| format!("`{v}` is not an integer"))
}

/// Parses a config file. `kind` (from the command line) decides the grid
/// dimension used for validation when the file does not name one.
pub fn parse_config(text: &str, kind: Option<Kind>) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mut c = Collector { entries: HashMap::new(), errors: Vec::new() };
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            match name.strip_suffix(']').map(str::trim) {
                Some(name) if SECTIONS.iter().any(|(s, _)| *s == name && !name.is_empty()) => section = name.to_string(),
                Some(name) => {
                    c.err(line, format!("unknown section [{name}]"));
                    section = format!("?{name}");
                }
                None => c.err(line, format!("malformed section header `{body}`")),
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            c.err(line, format!("expected `key = value`, got `{body}`"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if section.starts_with('?') {
            continue;
        }
        let allowed = SECTIONS.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            let hint = if key == "viscosity" || key == "nu" { " (the solver is inviscid)" } else { "" };
            c.err(line, format!("unknown key {}{hint}", qualified(&section, key)));
            continue;
        }
        let slot = (section.clone(), key.to_string());
        if let Some(prev) = c.entries.get(&slot) {
            let msg = format!("duplicate key {} (first set on line {})", qualified(&section, key), prev.line);
            c.err(line, msg);
            continue;
        }
        c.entries.insert(slot, Entry { line, value: value.to_string() });
    }

    let mut file_kind = None;
    let kind_line = c.get("", "kind", |v| v.parse::<Kind>(), |k| file_kind = Some(k));
    if let (Some(a), Some(b)) = (kind, file_kind) {
        if a != b {
            c.err(kind_line, format!("config is for `{b}` but `{a}` was requested"));
        }
    }
    let kind = kind.or(file_kind);
    let dim = kind.map(Kind::dim).unwrap_or(2);

    let mut n = None;
    let n_line = c.get("grid", "n", |v| v.parse::<usize>().map_err(|_| format!("`{v}` is not a nonnegative integer")), |v| n = Some(v));
    let mut cfg = ExperimentConfig::with_n(n.unwrap_or(0));
    cfg.kind = kind;
    match n {
        None if n_line == 0 => c.err(0, "missing required key `n` in [grid]"),
        None => {}
        Some(v) if v % 2 == 1 => c.err(n_line, format!("`n` in [grid] must be even, got {v}")),
        Some(v) => {
            if let Err(e) = GridSpec::new(dim, v) {
                c.err(n_line, format!("`n` in [grid]: {e} (at most {MAX_POINTS} points)"));
            }
        }
    }

    c.get("", "seed", |v| v.parse::<u64>().map_err(|_| format!("`{v}` is not a u64")), |v| cfg.seed = v);
    c.get("time", "dt", positive, |v| cfg.dt = v);
    c.get("time", "t_end", nonnegative, |v| cfg.t_end = v);
    c.get("time", "output_interval", positive, |v| cfg.output_interval = Some(v));
    c.get("time", "snapshot_interval", positive, |v| cfg.snapshot_interval = Some(v));

    let names2 = ["shear", "cellular", "random_smooth"];
    let names3 = ["taylor_green", "shear3d"];
    let known = if dim == 3 { &names3[..] } else { &names2[..] };
    c.get(
        "initial",
        "name",
        |v| {
            if known.contains(&v) {
                Ok(v.to_string())
            } else {
                Err(format!("unknown initial condition `{v}` for a {dim}D experiment (expected {})", known.join(", ")))
            }
        },
        |v| cfg.initial = v,
    );
    if dim == 3 {
        cfg.initial = if cfg.initial == "shear" { "shear3d".into() } else { cfg.initial.clone() };
    }
    c.get("initial", "amplitude", parse_f64, |v| cfg.amplitude = v);
    c.get("initial", "kappa", positive, |v| cfg.kappa = v);
    c.get("output", "dir", |v| if v.is_empty() { Err("empty path".to_string()) } else { Ok(PathBuf::from(v)) }, |v| cfg.out_dir = v);

    c.get(
        "lax",
        "sobolev",
        |v| {
            let s = parse_f64_list(v)?;
            if s.is_empty() || s.iter().any(|&x| x < 0.0) {
                return Err("expected a nonempty list of nonnegative indices".into());
            }
            Ok(s)
        },
        |v| cfg.sobolev = v,
    );
    c.get("lax", "phi0", |v| parse_wavevectors(v, dim), |v| cfg.phi0 = v);
    c.get(
        "lax",
        "polarization",
        |v| match parse_f64_list(v)?.as_slice() {
            &[a, b, d] if a != 0.0 || b != 0.0 || d != 0.0 => Ok([a, b, d]),
            &[_, _, _] => Err("polarization must be nonzero".into()),
            _ => Err("expected three numbers".into()),
        },
        |v| cfg.polarization = v,
    );
    c.get(
        "lax",
        "pair",
        |v| match v {
            "montgomery_smith" => Ok(Pair3D::MontgomerySmith),
            "childress" => Ok(Pair3D::Childress),
            _ => Err(format!("unknown pair `{v}` (expected montgomery_smith or childress)")),
        },
        |v| cfg.pair = v,
    );
    c.get(
        "lax",
        "pushforward",
        |v| {
            split_list(v, ',')
                .into_iter()
                .map(|m| match m {
                    "identity" => Ok(PointMap::Identity),
                    "square" => Ok(PointMap::Square),
                    "cube" => Ok(PointMap::Cube),
                    "constant" => Ok(PointMap::Constant),
                    _ => Err(format!("unknown map `{m}` (expected identity, square, cube or constant)")),
                })
                .collect::<Result<Vec<_>, _>>()
                .and_then(|maps| {
                    match maps.iter().enumerate().find(|(i, m)| maps[..*i].contains(m)) {
                        Some((_, m)) => Err(format!("map `{}` listed twice", m.name())),
                        None => Ok(maps),
                    }
                })
        },
        |v| cfg.pushforward = v,
    );

    c.get("expand", "sector", integer, |v| cfg.expand_sector = v);
    c.get("expand", "truncation", integer, |v| cfg.expand_truncation = Some(v));
    c.get(
        "expand",
        "target",
        |v| {
            if v == "vorticity" {
                Ok(ExpansionTargetSpec::Vorticity)
            } else {
                parse_wavevectors(v, 2).map(ExpansionTargetSpec::PlaneWaves)
            }
        },
        |v| cfg.expand_target = v,
    );

    c.get("spectrum", "sector", integer, |v| cfg.spectrum_sector = Some(v));
    c.get("spectrum", "truncation", integer, |v| cfg.truncation = Some(v));
    c.get("spectrum", "s", nonnegative, |v| cfg.s = v);
    c.get("spectrum", "band", parse_pair_f64, |v| cfg.band = v);
    c.get("spectrum", "dense_cap", count, |v| cfg.dense_cap = v);
    c.get(
        "spectrum",
        "eps",
        |v| {
            let e = parse_f64_list(v)?;
            if e.is_empty() || e.iter().any(|&x| x <= 0.0) {
                return Err("expected a nonempty list of positive levels".into());
            }
            Ok(e)
        },
        |v| cfg.eps = v,
    );
    c.get("spectrum", "re_range", parse_pair_f64, |v| cfg.re_range = v);
    c.get("spectrum", "im_range", parse_pair_f64, |v| cfg.im_range = v);
    c.get(
        "spectrum",
        "resolution",
        |v| {
            let parts: Vec<usize> = split_list(v, ',').into_iter().map(count).collect::<Result<_, _>>()?;
            match parts.as_slice() {
                &[a, b] if a <= 256 && b <= 256 => Ok((a, b)),
                &[_, _] => Err("at most 256 points per axis".into()),
                _ => Err("expected `nx, ny`".into()),
            }
        },
        |v| cfg.resolution = v,
    );
    c.get("spectrum", "candidates", count, |v| cfg.candidates = v);

    c.get("lyapunov", "horizon", positive, |v| cfg.horizon = v);
    c.get("lyapunov", "dt", positive, |v| cfg.lyap_dt = v);
    c.get("lyapunov", "renorm_interval", positive, |v| cfg.renorm_interval = v);
    c.get("lyapunov", "warmup", nonnegative, |v| cfg.warmup = Some(v));
    c.get("lyapunov", "points", parse_points, |v| cfg.points = v);

    for t in [cfg.truncation, cfg.expand_truncation].into_iter().flatten() {
        if t < 0 {
            c.err(0, format!("truncation must be nonnegative, got {t}"));
        }
    }
    if let Some(w) = cfg.warmup {
        if w >= cfg.horizon {
            c.err(0, "`warmup` in [lyapunov] must be shorter than the horizon");
        }
    }
    if cfg.renorm_interval < cfg.lyap_dt {
        c.err(0, "`renorm_interval` in [lyapunov] must be at least its `dt`");
    }

    if c.errors.is_empty() {
        Ok(cfg)
    } else {
        c.errors.sort_by_key(|e| e.line);
        Err(c.errors)
    }
}
