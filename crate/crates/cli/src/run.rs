//! Executes a manifest and writes its artifacts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;
use ymblow_core::evolve::{DiagnosticsSeries, EvolveError, Evolution, LevelSnapshot, OutcomeKind, RunRecord};
use ymblow_core::experiments::{
    anomalous_rate_fit, attractor_comparison, attractor_horizon, bisect_critical, cone_energy_limit,
    departure_scaling, log_spaced, max_center_density, rate_ratio_trend, refine_bracket, subcritical_sweep,
    AmplitudeFamily, Bracket, ExperimentError, ScalingFit, SweepPoint, RELIABLE_RMS,
};
use ymblow_core::model::{Dimension, ModelError, Profile};
use ymblow_core::selfsimilar::{excited_profile, find_profiles, SelfSimilarError, SimilarityOde};

use crate::manifest::{Command, Manifest};
use crate::table::{self, float, opt_float, TableWriter};

pub const SUMMARY_SCHEMA: &str = "ymblow-summary v1";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const SUMMARY_FILE: &str = "summary.json";
/// Points per decade of the rescaled snapshot grid in `eta`.
const RESCALED_PER_DECADE: usize = 40;
/// Amplification of `|w_rr(t, 0)|` after which distances count as late.
const LATE_GROWTH: f64 = 1e8;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    SelfSimilar(#[from] SelfSimilarError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Unsupported(String),
}

impl RunError {
    /// Machine-readable failure class for the summary.
    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Io(_) => "io",
            RunError::Evolve(EvolveError::Breakdown { .. }) => "numerical_breakdown",
            RunError::Evolve(EvolveError::Config(_)) => "config",
            RunError::Evolve(EvolveError::Underresolved { .. }) => "underresolved",
            RunError::Evolve(_) => "evolution",
            RunError::Experiment(ExperimentError::Evolve(EvolveError::Breakdown { .. })) => "numerical_breakdown",
            RunError::Experiment(ExperimentError::InvalidBracket { .. }) => "invalid_bracket",
            RunError::Experiment(ExperimentError::Contaminated { .. }) => "contaminated_sweep",
            RunError::Experiment(_) => "experiment",
            RunError::SelfSimilar(_) => "shooting",
            RunError::Model(_) => "model",
            RunError::Unsupported(_) => "unsupported",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub schema: String,
    pub command: String,
    pub status: String,
    pub error: Option<ErrorReport>,
    pub results: Value,
    pub files: Vec<String>,
    pub notices: Vec<String>,
}

impl Summary {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Output directory with a record of what was written, in order.
struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
    notices: Vec<String>,
}

impl Artifacts {
    fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn notice(&mut self, text: String) {
        eprintln!("notice: {text}");
        self.notices.push(text);
    }
}

/// Runs `manifest`, writing everything into `dir`. The summary is written
/// last and returned; failures are recorded in it rather than returned.
pub fn run(manifest: &Manifest, dir: &Path) -> io::Result<Summary> {
    fs::create_dir_all(dir)?;
    let mut art = Artifacts { dir: dir.to_path_buf(), files: Vec::new(), notices: Vec::new() };
    art.write(MANIFEST_FILE, &manifest.render())?;
    let result = match manifest.command {
        Command::Evolve => evolve(manifest, &mut art),
        Command::Bisect => bisect(manifest, &mut art),
        Command::SweepSubcritical => sweep(manifest, &mut art),
        Command::DepartureScaling => departure(manifest, &mut art),
        Command::FitLambda => fit_lambda(manifest, &mut art),
        Command::Shoot => shoot(manifest, &mut art),
        Command::ConeEnergy => cone_energy(manifest, &mut art),
    };
    let (status, error, results) = match result {
        Ok(v) => ("ok", None, v),
        Err(e) => ("error", Some(ErrorReport { kind: e.kind().to_string(), message: e.to_string() }), Value::Null),
    };
    art.files.push(SUMMARY_FILE.to_string());
    let summary = Summary {
        schema: SUMMARY_SCHEMA.to_string(),
        command: manifest.command.to_string(),
        status: status.to_string(),
        error,
        results,
        files: art.files.clone(),
        notices: art.notices.clone(),
    };
    let text = serde_json::to_string_pretty(&summary).map_err(io::Error::other)? + "\n";
    fs::write(dir.join(SUMMARY_FILE), text)?;
    Ok(summary)
}

fn tracked_profiles(m: &Manifest) -> Result<Vec<(String, Profile)>, RunError> {
    let d = m.evolution.dimension;
    let main = d.blowup_profile();
    let mut tracked = vec![(main.name().to_string(), main)];
    if m.track_excited {
        tracked.push(("W1".to_string(), excited_profile(&m.search.shoot)?.profile()));
    }
    Ok(tracked)
}

fn family(m: &Manifest) -> AmplitudeFamily {
    AmplitudeFamily::new(m.evolution.clone())
}

fn series_table(series: &DiagnosticsSeries) -> String {
    let extra: Vec<String> = series.profiles.iter().map(|p| format!("distance_{p}")).collect();
    let mut w = TableWriter::new(&table::SERIES, &extra);
    for r in &series.rows {
        let mut cells = vec![
            float(r.t),
            opt_float(r.tau),
            float(r.w_rr0),
            opt_float(r.lambda),
            float(r.e_total),
            float(r.flux_out),
            opt_float(r.e_cone),
            opt_float(r.e_cone_kinetic),
            r.depth.to_string(),
            r.synced.to_string(),
        ];
        cells.extend(r.distances.iter().map(|d| opt_float(*d)));
        w.row(&cells);
    }
    w.finish()
}

fn levels_table(levels: &[LevelSnapshot]) -> String {
    let mut w = TableWriter::new(&table::LEVELS, &[]);
    for l in levels {
        for &(r, wv, wt) in &l.rows {
            w.row(&[l.depth.to_string(), float(l.dr), float(l.time), float(r), float(wv), float(wt)]);
        }
    }
    w.finish()
}

/// One file per captured snapshot, as `(eta, w(t, lambda eta))`.
fn write_rescaled(art: &mut Artifacts, rec: &RunRecord) -> Result<usize, RunError> {
    let mut written = 0;
    for (k, snap) in rec.snapshots.iter().enumerate() {
        let Some(lambda) = snap.lambda else {
            art.notice(format!("snapshot {k} at t = {} skipped: scale undefined", snap.t));
            continue;
        };
        if snap.r.last().is_none_or(|&r| lambda >= r) {
            art.notice(format!("snapshot {k} at t = {} skipped: scale {lambda:e} exceeds the domain", snap.t));
            continue;
        }
        let mut w = TableWriter::new(&table::RESCALED, &[]).meta("t", float(snap.t)).meta("lambda", float(lambda));
        if let Some(t) = rec.outcome.blowup_time {
            w = w.meta("remaining", float(t - snap.t));
        }
        for (eta, v) in snap.rescaled(lambda, RESCALED_PER_DECADE) {
            w.row(&[float(eta), float(v)]);
        }
        art.write(&format!("rescaled_{k:04}.csv"), &w.finish())?;
        written += 1;
    }
    Ok(written)
}

/// Distance diagnostics of one tracked profile.
fn distance_summary(series: &DiagnosticsSeries, idx: usize) -> Value {
    let start = series.rows.first().map_or(1.0, |r| r.w_rr0.abs().max(1.0));
    let resolved: Vec<(f64, f64, f64)> =
        series.rows.iter().filter_map(|r| r.distances[idx].map(|d| (r.t, r.w_rr0.abs() / start, d))).collect();
    let min = resolved.iter().map(|r| r.2).fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))));
    let late: Vec<f64> = resolved.iter().filter(|r| r.1 >= LATE_GROWTH).map(|r| r.2).collect();
    json!({
        "profile": series.profiles[idx],
        "min": min,
        "final": resolved.last().map(|r| r.2),
        "late_max": late.iter().cloned().reduce(f64::max),
        "late_rows": late.len(),
    })
}

fn run_summary(rec: &RunRecord) -> Value {
    let e0 = rec.initial_energy;
    let drift = rec.series.rows.iter().map(|r| ((r.e_total + r.flux_out - e0) / e0).abs()).fold(0.0, f64::max);
    let start = rec.series.rows.first().map_or(1.0, |r| r.w_rr0.abs().max(1.0));
    let growth = rec.series.rows.iter().map(|r| r.w_rr0.abs()).fold(0.0, f64::max) / start;
    json!({
        "outcome": rec.outcome,
        "rows": rec.series.rows.len(),
        "max_depth": rec.series.rows.iter().map(|r| r.depth).max(),
        "initial_energy": e0,
        "max_energy_drift": if e0 > 0.0 { Some(drift) } else { None },
        "curvature_growth": growth,
        "distances": (0..rec.series.profiles.len()).map(|i| distance_summary(&rec.series, i)).collect::<Vec<_>>(),
    })
}

fn evolve(m: &Manifest, art: &mut Artifacts) -> Result<Value, RunError> {
    let rec = Evolution::with_tracking(m.evolution.clone(), tracked_profiles(m)?, m.snapshots.rules())?.run()?;
    art.write("series.csv", &series_table(&rec.series))?;
    art.write("levels.csv", &levels_table(&rec.levels))?;
    let snapshots = write_rescaled(art, &rec)?;
    let mut v = run_summary(&rec);
    v["max_center_density"] = json!(max_center_density(&rec.series, m.evolution.dimension));
    v["rescaled_snapshots"] = json!(snapshots);
    Ok(v)
}

fn bracket_table(b: &Bracket) -> String {
    let mut w = TableWriter::new(&table::BRACKET, &[]);
    let (mut lo, mut hi) = (None, None);
    for (i, p) in b.history.iter().enumerate() {
        match p.outcome {
            OutcomeKind::Dispersion => lo = Some(p.amplitude),
            OutcomeKind::Blowup => hi = Some(p.amplitude),
            OutcomeKind::Undetermined => {}
        }
        w.row(&[i.to_string(), float(p.amplitude), format!("{:?}", p.outcome), opt_float(lo), opt_float(hi)]);
    }
    w.finish()
}

fn bracket_json(b: &Bracket, critical: f64, limited: bool) -> Value {
    json!({
        "a_star": critical,
        "a_lo": b.a_lo,
        "a_hi": b.a_hi,
        "width": b.width(),
        "relative_width": b.width() / b.a_hi,
        "probes": b.history.len(),
        "limited": limited,
        "invariant_holds": b.invariant_holds(),
    })
}

fn classify_with(fam: &AmplitudeFamily) -> impl FnMut(f64) -> Result<OutcomeKind, ExperimentError> + '_ {
    move |a| Ok(fam.classify(a)?)
}

fn bisect(m: &Manifest, art: &mut Artifacts) -> Result<Value, RunError> {
    let fam = family(m);
    let th = &m.threshold;
    let b = bisect_critical(classify_with(&fam), th.a_lo, th.a_hi, th.tolerance)?;
    art.write("bracket.csv", &bracket_table(&b.bracket))?;
    if b.limited {
        art.notice("bisection stopped on an undetermined outcome".into());
    }
    Ok(bracket_json(&b.bracket, b.critical, b.limited))
}

/// Threshold used by the sweeps: the manifest value, or a bisection refined
/// to `refine_tolerance`. Returns the threshold and the bracket, if any.
fn threshold(m: &Manifest, art: &mut Artifacts) -> Result<(f64, Option<Bracket>, Value), RunError> {
    let th = &m.threshold;
    if let Some(a) = th.a_star {
        return Ok((a, None, json!({ "a_star": a, "source": "manifest" })));
    }
    let fam = family(m);
    let coarse = bisect_critical(classify_with(&fam), th.a_lo, th.a_hi, th.tolerance)?;
    let b = if coarse.limited {
        coarse
    } else {
        refine_bracket(classify_with(&fam), coarse.bracket, th.refine_tolerance)?
    };
    if b.limited {
        art.notice("bisection stopped on an undetermined outcome".into());
    }
    art.write("bracket.csv", &bracket_table(&b.bracket))?;
    let v = bracket_json(&b.bracket, b.critical, b.limited);
    Ok((b.critical, Some(b.bracket), v))
}

fn fit_json(f: &ScalingFit) -> Value {
    json!({
        "exponent": f.exponent,
        "prefactor": f.prefactor,
        "rms": f.rms,
        "window": [f.window.0, f.window.1],
        "reliable": f.reliable,
        "excluded": f.excluded,
    })
}

fn point_cells(p: &SweepPoint) -> Vec<String> {
    vec![float(p.epsilon), float(p.amplitude), format!("{:?}", p.outcome), opt_float(p.value)]
}

fn sweep(m: &Manifest, art: &mut Artifacts) -> Result<Value, RunError> {
    let (a_star, _, threshold) = threshold(m, art)?;
    let th = &m.threshold;
    let eps = log_spaced(th.eps_lo, th.eps_hi, th.eps_count);
    let s = subcritical_sweep(&family(m), a_star, &eps)?;
    let mut w = TableWriter::new(&table::SWEEP, &[])
        .meta("a_star", float(a_star))
        .meta("exponent", float(s.fit.exponent))
        .meta("rms", float(s.fit.rms));
    for p in &s.points {
        w.row(&point_cells(p));
    }
    art.write("sweep.csv", &w.finish())?;
    if !s.fit.excluded.is_empty() {
        art.notice(format!("{} undetermined sweep points excluded from the fit", s.fit.excluded.len()));
    }
    Ok(json!({ "threshold": threshold, "fit": fit_json(&s.fit) }))
}

fn departure(m: &Manifest, art: &mut Artifacts) -> Result<Value, RunError> {
    if m.evolution.dimension != Dimension::SUPERCRITICAL {
        return Err(RunError::Unsupported("departure scaling needs the excited profile, available in d = 5 only".into()));
    }
    let (a_star, bracket, threshold) = threshold(m, art)?;
    let w1 = excited_profile(&m.search.shoot)?.profile();
    let tracked = vec![("W1".to_string(), w1.clone())];
    let th = &m.threshold;
    let near = bracket.as_ref().map_or(a_star, |b| b.a_hi);
    let rec = family(m).run(near, &tracked)?;
    art.write("critical_series.csv", &series_table(&rec.series))?;
    let cmp = attractor_comparison(&rec.series, "W1")?;
    let horizon = match th.horizon {
        Some(h) => h,
        None => attractor_horizon(&rec.series, "W1", w1.curvature_at_origin()?, th.horizon_threshold)?,
    };
    let eps = log_spaced(th.eps_lo, th.eps_hi, th.eps_count);
    let ds = departure_scaling(&family(m), a_star, &eps, ("W1", &w1), horizon, th.departure_factor)?;
    let mut w = TableWriter::new(&table::DEPARTURE, &[]).meta("a_star", float(a_star)).meta("horizon", float(horizon));
    for side in &ds.sides {
        for p in &side.points {
            let mut cells = vec![side.sign.to_string()];
            cells.extend(point_cells(p));
            w.row(&cells);
        }
    }
    art.write("departure.csv", &w.finish())?;
    let sides: Vec<Value> = ds
        .sides
        .iter()
        .map(|s| {
            json!({
                "sign": s.sign,
                "fit": fit_json(&s.fit),
                "sensitivity": s.sensitivity.iter().map(|(f, k)| json!({ "factor": f, "exponent": k })).collect::<Vec<_>>(),
            })
        })
        .collect();
    Ok(json!({
        "threshold": threshold,
        "critical_run": {
            "amplitude": near,
            "outcome": rec.outcome,
            "min_distance": cmp.min_distance,
            "t_min": cmp.t_min,
            "approach": cmp.approach,
            "departure": cmp.departure,
        },
        "horizon": horizon,
        "sides": sides,
    }))
}

fn blowup_run(m: &Manifest, art: &mut Artifacts) -> Result<Option<RunRecord>, RunError> {
    let rec = Evolution::with_tracking(m.evolution.clone(), tracked_profiles(m)?, m.snapshots.rules())?.run()?;
    art.write("series.csv", &series_table(&rec.series))?;
    if rec.outcome.kind != OutcomeKind::Blowup {
        art.notice(format!("run ended in {:?}; nothing to fit", rec.outcome.kind));
        return Ok(None);
    }
    Ok(Some(rec))
}

fn fit_lambda(m: &Manifest, art: &mut Artifacts) -> Result<Value, RunError> {
    let Some(rec) = blowup_run(m, art)? else {
        return Ok(json!({ "fit": null }));
    };
    let a = anomalous_rate_fit(&rec.series)?;
    let (samples, monotone) = rate_ratio_trend(&rec.series, a.fit.blowup_time, m.fit.trend_decades, m.fit.trend_per_decade)?;
    let mut w = TableWriter::new(&table::RATE_RATIO, &[]).meta("blowup_time", float(a.fit.blowup_time));
    for (t, ratio) in &samples {
        w.row(&[float(*t), float(*ratio)]);
    }
    art.write("rate_ratio.csv", &w.finish())?;
    Ok(json!({
        "run": run_summary(&rec),
        "fit": {
            "alpha": a.alpha,
            "exponent": a.fit.exponent,
            "blowup_time": a.fit.blowup_time,
            "prefactor": a.fit.prefactor,
            "rms": a.fit.rms,
            "samples": a.fit.samples,
            "window": [a.fit.window.0, a.fit.window.1],
            "reliable": a.reliable,
            "caveat": a.caveat,
        },
        "trend": { "decades": m.fit.trend_decades, "samples": samples.len(), "monotone_decreasing": monotone },
    }))
}

fn cone_energy(m: &Manifest, art: &mut Artifacts) -> Result<Value, RunError> {
    if !m.evolution.record_cone {
        return Err(RunError::Unsupported("cone-energy needs record_cone = true".into()));
    }
    let Some(rec) = blowup_run(m, art)? else {
        return Ok(json!({ "cone": null }));
    };
    let t = rec.outcome.blowup_time.expect("blowup runs carry a blowup time");
    let low_confidence = rec.fit.as_ref().is_none_or(|f| f.rms > RELIABLE_RMS);
    if low_confidence {
        art.notice("blowup time is poorly determined; light-cone energies are low confidence".into());
    }
    let lim = cone_energy_limit(&rec.series, t, low_confidence)?;
    let mut w = TableWriter::new(&table::CONE, &[]).meta("blowup_time", float(t));
    for r in rec.series.rows.iter().filter(|r| r.t < t) {
        if let (Some(e), Some(k)) = (r.e_cone, r.e_cone_kinetic) {
            w.row(&[float(r.t), float(t - r.t), float(e), float(k)]);
        }
    }
    art.write("cone.csv", &w.finish())?;
    Ok(json!({ "run": run_summary(&rec), "blowup_time": t, "cone": lim }))
}

fn shoot(m: &Manifest, art: &mut Artifacts) -> Result<Value, RunError> {
    let found = find_profiles(&SimilarityOde::new(m.evolution.dimension), &m.search)?;
    if found.is_empty() {
        art.notice(format!("no regular self-similar profiles in d = {}", m.evolution.dimension.get()));
    }
    let mut out = Vec::new();
    for (i, p) in found.iter().enumerate() {
        let name = format!("W{i}");
        let mut w = TableWriter::new(&table::PROFILE, &[])
            .meta("name", &name)
            .meta("b", float(p.b))
            .meta("c", float(p.c))
            .meta("w1", float(p.w1))
            .meta("residual", float(p.residual));
        let t = &p.samples;
        for j in 0..t.len() {
            w.row(&[float(t.eta[j]), float(t.w[j]), float(t.wp[j])]);
        }
        art.write(&format!("profile_{name}.csv"), &w.finish())?;
        out.push(json!({ "name": name, "b": p.b, "c": p.c, "w1": p.w1, "residual": p.residual }));
    }
    Ok(json!({ "profiles": out }))
}
