//! Run manifests: `key = value` text with `#` comments, overridable from the
//! command line, resolved against documented defaults.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;
use ymblow_core::evolve::{EvolutionConfig, SnapshotRule};
use ymblow_core::model::Dimension;
use ymblow_core::selfsimilar::SearchSettings;

/// Where a setting came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(n) => write!(f, "line {n}"),
            Origin::Flag => write!(f, "command-line override"),
            Origin::Default => write!(f, "default"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifestError {
    #[error("{at}: expected `key = value`, got `{text}`")]
    Syntax { at: Origin, text: String },
    #[error("{at}: unknown key `{key}`")]
    UnknownKey { at: Origin, key: String },
    #[error("{at}: `{key}` is set more than once")]
    Duplicate { at: Origin, key: String },
    #[error("{at}: `{key}` expects {expected}, got `{value}`")]
    TypeMismatch { at: Origin, key: String, expected: &'static str, value: String },
    #[error("{at}: `{key}` {constraint}")]
    Constraint { at: Origin, key: String, constraint: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Evolve,
    Bisect,
    SweepSubcritical,
    DepartureScaling,
    FitLambda,
    Shoot,
    ConeEnergy,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Evolve,
        Command::Bisect,
        Command::SweepSubcritical,
        Command::DepartureScaling,
        Command::FitLambda,
        Command::Shoot,
        Command::ConeEnergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Bisect => "bisect",
            Command::SweepSubcritical => "sweep-subcritical",
            Command::DepartureScaling => "departure-scaling",
            Command::FitLambda => "fit-lambda",
            Command::Shoot => "shoot",
            Command::ConeEnergy => "cone-energy",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Triggers for rescaled snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSchedule {
    pub every_dt: Option<f64>,
    /// Snapshots per decade of shrinking `lambda`.
    pub lambda_per_decade: Option<u32>,
    /// `tau = -ln(T - t)` values, used with `tau_horizon = T`.
    pub tau: Vec<f64>,
    pub tau_horizon: Option<f64>,
}

impl SnapshotSchedule {
    pub fn rules(&self) -> Vec<SnapshotRule> {
        let mut rules = Vec::new();
        if let Some(dt) = self.every_dt {
            rules.push(SnapshotRule::EveryDt(dt));
        }
        if let Some(n) = self.lambda_per_decade {
            rules.push(SnapshotRule::LambdaDecades(n));
        }
        if let (Some(t), false) = (self.tau_horizon, self.tau.is_empty()) {
            rules.push(SnapshotRule::Tau { blowup_time: t, values: self.tau.clone() });
        }
        rules
    }
}

/// Parameters of the threshold experiments.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdParams {
    pub a_lo: f64,
    pub a_hi: f64,
    /// Relative bracket width of the bisection.
    pub tolerance: f64,
    /// Width the sweeps refine the bracket to before using its midpoint.
    pub refine_tolerance: f64,
    /// Skip the bisection and use this threshold.
    pub a_star: Option<f64>,
    pub eps_lo: f64,
    pub eps_hi: f64,
    pub eps_count: usize,
    pub departure_factor: f64,
    /// Horizon of the intermediate phase; estimated from the critical run when absent.
    pub horizon: Option<f64>,
    /// Distance below which the critical run counts as having entered the intermediate phase.
    pub horizon_threshold: f64,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams {
            a_lo: 0.05,
            a_hi: 0.2,
            tolerance: 1e-6,
            refine_tolerance: 1e-15,
            a_star: None,
            eps_lo: 1e-14,
            eps_hi: 1e-10,
            eps_count: 5,
            departure_factor: 2.0,
            horizon: None,
            horizon_threshold: 0.05,
        }
    }
}

/// Parameters of the rate and light-cone fits.
#[derive(Clone, Debug, PartialEq)]
pub struct FitParams {
    /// Decades of `lambda` over which `lambda / (T - t)` must be monotone.
    pub trend_decades: f64,
    pub trend_per_decade: usize,
}

impl Default for FitParams {
    fn default() -> Self {
        FitParams { trend_decades: 2.0, trend_per_decade: 10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub command: Command,
    pub evolution: EvolutionConfig,
    pub snapshots: SnapshotSchedule,
    pub threshold: ThresholdParams,
    pub fit: FitParams,
    pub search: SearchSettings,
    /// Also track the excited self-similar profile in `d = 5` runs.
    pub track_excited: bool,
    pub output_dir: PathBuf,
}

pub const DEFAULT_OUTPUT_DIR: &str = "ymblow-out";

impl Manifest {
    pub fn defaults(command: Command, dimension: Dimension) -> Self {
        let amplitude = if dimension == Dimension::CRITICAL { 0.5 } else { 0.2 };
        Manifest {
            command,
            evolution: EvolutionConfig::new(dimension, amplitude),
            snapshots: SnapshotSchedule { every_dt: None, lambda_per_decade: Some(1), tau: Vec::new(), tau_horizon: None },
            threshold: ThresholdParams::default(),
            fit: FitParams::default(),
            search: SearchSettings::default(),
            track_excited: false,
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
        }
    }

    /// Parses manifest text, then applies `overrides` (`key = value` pairs
    /// from the command line). `command` overrides any `command` key.
    pub fn parse(text: &str, command: Option<Command>, overrides: &[(String, String)]) -> Result<Self, ManifestError> {
        let mut entries: Vec<(String, String, Origin)> = Vec::new();
        let mut seen: HashMap<String, Origin> = HashMap::new();
        for (n, raw) in text.lines().enumerate() {
            let at = Origin::Line(n + 1);
            let line = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ManifestError::Syntax { at, text: line.to_string() });
            };
            let key = canonical(k.trim()).ok_or_else(|| ManifestError::UnknownKey { at, key: k.trim().to_string() })?;
            if seen.insert(key.to_string(), at).is_some() {
                return Err(ManifestError::Duplicate { at, key: key.to_string() });
            }
            entries.push((key.to_string(), v.trim().to_string(), at));
        }
        for (k, v) in overrides {
            let at = Origin::Flag;
            let key = canonical(k.trim()).ok_or_else(|| ManifestError::UnknownKey { at, key: k.trim().to_string() })?;
            entries.retain(|e| e.0 != key);
            seen.insert(key.to_string(), at);
            entries.push((key.to_string(), v.trim().to_string(), at));
        }

        let value_of = |key: &str| entries.iter().find(|e| e.0 == key);
        let command = match (command, value_of("command")) {
            (Some(c), _) => c,
            (None, Some((_, v, at))) => v.parse().map_err(|_| mismatch(*at, "command", "a command name", v))?,
            (None, None) => {
                return Err(ManifestError::Constraint {
                    at: Origin::Default,
                    key: "command".into(),
                    constraint: "must be given".into(),
                })
            }
        };
        let dimension = match value_of("d") {
            Some((_, v, at)) => {
                let d: u32 = parse_value(*at, "d", v)?;
                Dimension::new(d).map_err(|e| constraint(*at, "d", e.to_string()))?
            }
            None => Dimension::SUPERCRITICAL,
        };
        let mut m = Manifest::defaults(command, dimension);
        for (key, value, at) in &entries {
            if key != "command" && key != "d" {
                m.set(key, value, *at)?;
            }
        }
        m.check_consistency(&seen)?;
        Ok(m)
    }

    fn set(&mut self, key: &str, v: &str, at: Origin) -> Result<(), ManifestError> {
        let e = &mut self.evolution;
        let s = &mut self.search;
        let th = &mut self.threshold;
        match key {
            "amplitude" => e.amplitude = non_negative(at, key, v)?,
            "sigma" => e.sigma = positive(at, key, v)?,
            "center" => e.center = positive(at, key, v)?,
            "r_max" => e.r_max = positive(at, key, v)?,
            "dr0" => e.dr0 = positive(at, key, v)?,
            "cfl" => {
                let c: f64 = parse_value(at, key, v)?;
                if !(c > 0.0 && c < 1.0) {
                    return Err(constraint(at, key, "must satisfy 0 < cfl < 1"));
                }
                e.cfl = c;
            }
            "dissipation" => {
                let x: f64 = parse_value(at, key, v)?;
                if !(0.0..1.0).contains(&x) {
                    return Err(constraint(at, key, "must lie in [0, 1)"));
                }
                e.dissipation = x;
            }
            "max_depth" => {
                let x: usize = parse_value(at, key, v)?;
                if x > 40 {
                    return Err(constraint(at, key, "must be at most 40"));
                }
                e.mesh.max_depth = x;
            }
            "refine_threshold" => e.mesh.refine_threshold = positive(at, key, v)?,
            "points_per_scale" => {
                let x: f64 = parse_value(at, key, v)?;
                if !(x >= 4.0) {
                    return Err(constraint(at, key, "must be at least 4"));
                }
                e.mesh.points_per_scale = x;
            }
            "buffer_width" => {
                let x: usize = parse_value(at, key, v)?;
                if x < 4 {
                    return Err(constraint(at, key, "must be at least 4"));
                }
                e.mesh.buffer_width = x;
            }
            "regrid_interval" => {
                let x: u64 = parse_value(at, key, v)?;
                if x == 0 {
                    return Err(constraint(at, key, "must be positive"));
                }
                e.mesh.regrid_interval = x;
            }
            "scale_extent" => {
                let x: f64 = parse_value(at, key, v)?;
                if !(x >= 1.0) {
                    return Err(constraint(at, key, "must be at least 1"));
                }
                e.mesh.scale_extent = x;
            }
            "blowup_growth" => {
                let x: f64 = parse_value(at, key, v)?;
                if !(x > 1.0) {
                    return Err(constraint(at, key, "must exceed 1"));
                }
                e.stop.blowup_growth = x;
            }
            "dispersion_amplitude" => e.stop.dispersion_amplitude = positive(at, key, v)?,
            "dispersion_energy_fraction" => e.stop.dispersion_energy_fraction = positive(at, key, v)?,
            "dispersion_window" => e.stop.dispersion_window = non_negative(at, key, v)?,
            "dispersion_radius" => e.stop.dispersion_radius = positive(at, key, v)?,
            "max_time" => e.stop.max_time = positive(at, key, v)?,
            "max_level_steps" => e.stop.max_level_steps = parse_value(at, key, v)?,
            "record_cone" => e.record_cone = parse_bool(at, key, v)?,
            "snapshot_every_dt" => self.snapshots.every_dt = optional(at, key, v, positive)?,
            "snapshot_lambda_per_decade" => {
                self.snapshots.lambda_per_decade = optional(at, key, v, |at, key, v| {
                    let n: u32 = parse_value(at, key, v)?;
                    if n == 0 {
                        return Err(constraint(at, key, "must be positive"));
                    }
                    Ok(n)
                })?
            }
            "snapshot_tau" => self.snapshots.tau = parse_list(at, key, v)?,
            "snapshot_tau_horizon" => self.snapshots.tau_horizon = optional(at, key, v, positive)?,
            "track_excited" => self.track_excited = parse_bool(at, key, v)?,
            "a_lo" => th.a_lo = non_negative(at, key, v)?,
            "a_hi" => th.a_hi = positive(at, key, v)?,
            "tolerance" => th.tolerance = fraction(at, key, v)?,
            "refine_tolerance" => th.refine_tolerance = fraction(at, key, v)?,
            "a_star" => th.a_star = optional(at, key, v, positive)?,
            "eps_lo" => th.eps_lo = positive(at, key, v)?,
            "eps_hi" => th.eps_hi = positive(at, key, v)?,
            "eps_count" => {
                let n: usize = parse_value(at, key, v)?;
                if n < 3 {
                    return Err(constraint(at, key, "must be at least 3"));
                }
                th.eps_count = n;
            }
            "departure_factor" => {
                let x: f64 = parse_value(at, key, v)?;
                if !(x > 1.0) {
                    return Err(constraint(at, key, "must exceed 1"));
                }
                th.departure_factor = x;
            }
            "horizon" => th.horizon = optional(at, key, v, positive)?,
            "horizon_threshold" => th.horizon_threshold = positive(at, key, v)?,
            "trend_decades" => self.fit.trend_decades = positive(at, key, v)?,
            "trend_per_decade" => {
                let n: usize = parse_value(at, key, v)?;
                if n == 0 {
                    return Err(constraint(at, key, "must be positive"));
                }
                self.fit.trend_per_decade = n;
            }
            "b_lo" => s.b_lo = parse_value(at, key, v)?,
            "b_hi" => s.b_hi = parse_value(at, key, v)?,
            "b_samples" => s.b_samples = parse_value(at, key, v)?,
            "inner_lo" => s.inner_lo = parse_value(at, key, v)?,
            "inner_hi" => s.inner_hi = parse_value(at, key, v)?,
            "inner_samples" => s.inner_samples = parse_value(at, key, v)?,
            "certify" => s.certify = positive(at, key, v)?,
            "eta0" => s.shoot.eta0 = offset(at, key, v)?,
            "eta1" => s.shoot.eta1 = offset(at, key, v)?,
            "shoot_tolerance" => s.shoot.tolerance = positive(at, key, v)?,
            "matching_point" => {
                let x: f64 = parse_value(at, key, v)?;
                if !(x > 0.0 && x < 1.0) {
                    return Err(constraint(at, key, "must lie in (0, 1)"));
                }
                s.shoot.matching_point = x;
            }
            "blowoff" => s.shoot.blowoff = positive(at, key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(ManifestError::UnknownKey { at, key: key.to_string() }),
        }
        Ok(())
    }

    fn check_consistency(&self, seen: &HashMap<String, Origin>) -> Result<(), ManifestError> {
        let at = |keys: &[&str]| keys.iter().filter_map(|k| seen.get(*k).copied()).max_by_key(origin_rank).unwrap_or(Origin::Default);
        let e = &self.evolution;
        if !(e.center < e.r_max) {
            return Err(constraint(at(&["center", "r_max"]), "center", "must be smaller than r_max"));
        }
        let cells = e.r_max / e.dr0;
        if cells < 32.0 || (cells - cells.round()).abs() > 1e-6 {
            return Err(constraint(at(&["dr0", "r_max"]), "dr0", "must divide r_max into at least 32 cells"));
        }
        let th = &self.threshold;
        if !(th.a_lo < th.a_hi) {
            return Err(constraint(at(&["a_lo", "a_hi"]), "a_lo", "must be smaller than a_hi"));
        }
        if !(th.eps_lo < th.eps_hi) {
            return Err(constraint(at(&["eps_lo", "eps_hi"]), "eps_lo", "must be smaller than eps_hi"));
        }
        let s = &self.search;
        if !(s.b_lo < s.b_hi && s.b_hi < 0.0) {
            return Err(constraint(at(&["b_lo", "b_hi"]), "b_lo", "must satisfy b_lo < b_hi < 0"));
        }
        if !(s.inner_lo < s.inner_hi) {
            return Err(constraint(at(&["inner_lo", "inner_hi"]), "inner_lo", "must be smaller than inner_hi"));
        }
        if s.b_samples < 4 || s.inner_samples < 4 {
            return Err(constraint(at(&["b_samples", "inner_samples"]), "b_samples", "sample counts must be at least 4"));
        }
        if !self.snapshots.tau.is_empty() && self.snapshots.tau_horizon.is_none() {
            return Err(constraint(at(&["snapshot_tau"]), "snapshot_tau", "needs snapshot_tau_horizon"));
        }
        if self.track_excited && e.dimension != Dimension::SUPERCRITICAL {
            return Err(constraint(at(&["track_excited"]), "track_excited", "is only available in d = 5"));
        }
        Ok(())
    }

    /// The fully resolved manifest as text that parses back to itself
    /// (the output directory is a property of the run, not of the manifest).
    pub fn render(&self) -> String {
        let e = &self.evolution;
        let s = &self.search;
        let th = &self.threshold;
        let opt = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:?}"));
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("command", self.command.to_string());
        put("d", e.dimension.get().to_string());
        put("amplitude", format!("{:?}", e.amplitude));
        put("sigma", format!("{:?}", e.sigma));
        put("center", format!("{:?}", e.center));
        put("r_max", format!("{:?}", e.r_max));
        put("dr0", format!("{:?}", e.dr0));
        put("cfl", format!("{:?}", e.cfl));
        put("dissipation", format!("{:?}", e.dissipation));
        put("max_depth", e.mesh.max_depth.to_string());
        put("refine_threshold", format!("{:?}", e.mesh.refine_threshold));
        put("points_per_scale", format!("{:?}", e.mesh.points_per_scale));
        put("buffer_width", e.mesh.buffer_width.to_string());
        put("regrid_interval", e.mesh.regrid_interval.to_string());
        put("scale_extent", format!("{:?}", e.mesh.scale_extent));
        put("blowup_growth", format!("{:?}", e.stop.blowup_growth));
        put("dispersion_amplitude", format!("{:?}", e.stop.dispersion_amplitude));
        put("dispersion_energy_fraction", format!("{:?}", e.stop.dispersion_energy_fraction));
        put("dispersion_window", format!("{:?}", e.stop.dispersion_window));
        put("dispersion_radius", format!("{:?}", e.stop.dispersion_radius));
        put("max_time", format!("{:?}", e.stop.max_time));
        put("max_level_steps", e.stop.max_level_steps.to_string());
        put("record_cone", e.record_cone.to_string());
        put("snapshot_every_dt", opt(self.snapshots.every_dt));
        put("snapshot_lambda_per_decade", self.snapshots.lambda_per_decade.map_or("none".into(), |n| n.to_string()));
        put("snapshot_tau", self.snapshots.tau.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", "));
        put("snapshot_tau_horizon", opt(self.snapshots.tau_horizon));
        put("track_excited", self.track_excited.to_string());
        put("a_lo", format!("{:?}", th.a_lo));
        put("a_hi", format!("{:?}", th.a_hi));
        put("tolerance", format!("{:?}", th.tolerance));
        put("refine_tolerance", format!("{:?}", th.refine_tolerance));
        put("a_star", opt(th.a_star));
        put("eps_lo", format!("{:?}", th.eps_lo));
        put("eps_hi", format!("{:?}", th.eps_hi));
        put("eps_count", th.eps_count.to_string());
        put("departure_factor", format!("{:?}", th.departure_factor));
        put("horizon", opt(th.horizon));
        put("horizon_threshold", format!("{:?}", th.horizon_threshold));
        put("trend_decades", format!("{:?}", self.fit.trend_decades));
        put("trend_per_decade", self.fit.trend_per_decade.to_string());
        put("b_lo", format!("{:?}", s.b_lo));
        put("b_hi", format!("{:?}", s.b_hi));
        put("b_samples", s.b_samples.to_string());
        put("inner_lo", format!("{:?}", s.inner_lo));
        put("inner_hi", format!("{:?}", s.inner_hi));
        put("inner_samples", s.inner_samples.to_string());
        put("certify", format!("{:?}", s.certify));
        put("eta0", format!("{:?}", s.shoot.eta0));
        put("eta1", format!("{:?}", s.shoot.eta1));
        put("shoot_tolerance", format!("{:?}", s.shoot.tolerance));
        put("matching_point", format!("{:?}", s.shoot.matching_point));
        put("blowoff", format!("{:?}", s.shoot.blowoff));
        out
    }
}

const KEYS: &[&str] = &[
    "command", "d", "amplitude", "sigma", "center", "r_max", "dr0", "cfl", "dissipation", "max_depth",
    "refine_threshold", "points_per_scale", "buffer_width", "regrid_interval", "scale_extent", "blowup_growth",
    "dispersion_amplitude", "dispersion_energy_fraction", "dispersion_window", "dispersion_radius", "max_time",
    "max_level_steps", "record_cone", "snapshot_every_dt", "snapshot_lambda_per_decade", "snapshot_tau",
    "snapshot_tau_horizon", "track_excited", "a_lo", "a_hi", "tolerance", "refine_tolerance", "a_star", "eps_lo",
    "eps_hi", "eps_count", "departure_factor", "horizon", "horizon_threshold", "trend_decades", "trend_per_decade",
    "b_lo", "b_hi", "b_samples", "inner_lo", "inner_hi", "inner_samples", "certify", "eta0", "eta1",
    "shoot_tolerance", "matching_point", "blowoff", "output_dir",
];

/// Canonical key name; `A`, `R` and `dimension` are accepted as aliases.
fn canonical(key: &str) -> Option<&'static str> {
    match key {
        "A" => Some("amplitude"),
        "R" => Some("center"),
        "dimension" => Some("d"),
        k => KEYS.iter().copied().find(|&c| c == k),
    }
}

fn origin_rank(o: &Origin) -> (u8, usize) {
    match o {
        Origin::Default => (0, 0),
        Origin::Line(n) => (1, *n),
        Origin::Flag => (2, 0),
    }
}

fn mismatch(at: Origin, key: &str, expected: &'static str, value: &str) -> ManifestError {
    ManifestError::TypeMismatch { at, key: key.to_string(), expected, value: value.to_string() }
}

fn constraint(at: Origin, key: &str, c: impl Into<String>) -> ManifestError {
    ManifestError::Constraint { at, key: key.to_string(), constraint: c.into() }
}

trait Expected {
    const NAME: &'static str;
}

impl Expected for f64 {
    const NAME: &'static str = "a number";
}
impl Expected for usize {
    const NAME: &'static str = "a non-negative integer";
}
impl Expected for u64 {
    const NAME: &'static str = "a non-negative integer";
}
impl Expected for u32 {
    const NAME: &'static str = "a non-negative integer";
}

fn parse_value<T: FromStr + Expected>(at: Origin, key: &str, v: &str) -> Result<T, ManifestError> {
    v.parse().map_err(|_| mismatch(at, key, T::NAME, v))
}

fn finite(at: Origin, key: &str, v: &str) -> Result<f64, ManifestError> {
    let x: f64 = parse_value(at, key, v)?;
    if !x.is_finite() {
        return Err(mismatch(at, key, "a finite number", v));
    }
    Ok(x)
}

fn positive(at: Origin, key: &str, v: &str) -> Result<f64, ManifestError> {
    let x = finite(at, key, v)?;
    if !(x > 0.0) {
        return Err(constraint(at, key, "must be positive"));
    }
    Ok(x)
}

fn non_negative(at: Origin, key: &str, v: &str) -> Result<f64, ManifestError> {
    let x = finite(at, key, v)?;
    if !(x >= 0.0) {
        return Err(constraint(at, key, "must be non-negative"));
    }
    Ok(x)
}

fn fraction(at: Origin, key: &str, v: &str) -> Result<f64, ManifestError> {
    let x = finite(at, key, v)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(constraint(at, key, "must lie in (0, 1)"));
    }
    Ok(x)
}

fn offset(at: Origin, key: &str, v: &str) -> Result<f64, ManifestError> {
    let x = finite(at, key, v)?;
    if !(x > 0.0 && x <= 1e-2) {
        return Err(constraint(at, key, "must lie in (0, 0.01]"));
    }
    Ok(x)
}

fn parse_bool(at: Origin, key: &str, v: &str) -> Result<bool, ManifestError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(mismatch(at, key, "`true` or `false`", v)),
    }
}

fn optional<T>(
    at: Origin,
    key: &str,
    v: &str,
    f: impl Fn(Origin, &str, &str) -> Result<T, ManifestError>,
) -> Result<Option<T>, ManifestError> {
    if v == "none" {
        Ok(None)
    } else {
        f(at, key, v).map(Some)
    }
}

fn parse_list(at: Origin, key: &str, v: &str) -> Result<Vec<f64>, ManifestError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| finite(at, key, x.trim()).map_err(|_| mismatch(at, key, "a comma-separated list of numbers", v))).collect()
}

/// Splits a `key=value` override.
pub fn split_override(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}
