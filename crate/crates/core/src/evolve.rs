//! Time evolution of the reduced Yang-Mills equation on the refinement
//! hierarchy, with outcome classification and scale extraction.
//!
//! Internally the field is carried as `v = (1 - w) / r^2` and `pi = v_t`.
//! With `u = 1 - w = r^2 v` the equation becomes
//!
//! ```text
//! v_tt = v_rr + (d+1)/r v_r + (d-2) v^2 (3 - r^2 v)
//! ```
//!
//! which is a regular radial wave equation in `d + 2` dimensions: no `1/r^2`
//! terms survive and `v` is even in `r`. The center uses the L'Hôpital limit
//! `(d+2) v_rr(0)`. Note `w_rr(t, 0) = -2 v(t, 0)`.
//!
//! At the outer edge, for odd `d` the outgoing solutions of the linearized
//! equation are `r^m v = sum_k c_k r^-k f^(l-k)(t - r)` with `m = (d+1)/2`,
//! `l = (d-1)/2` and `c_k = (l+k)! / (k! (l-k)! 2^k)`. The boundary carries
//! `f, ..., f^(l-1)` as extra ODEs and imposes this form exactly, so outgoing
//! radiation leaves without reflection at linear order. For even `d` the edge
//! uses the first-order condition `v_t + v_r + (d+1)/(2r) v = 0`.
//!
//! Space is discretized with second-order centered differences, time with the
//! classical fourth-order Runge–Kutta method, plus fourth-difference
//! Kreiss–Oliger dissipation of adjustable strength.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{fit_blowup_law, BlowupFit, FitError};
use crate::mesh::{Clock, Fields, Flow, Hierarchy, Interval, Level, LevelSolver, LevelView, MeshError, MeshParams};
use crate::model::{cumulative_energy, Dimension, EnergyParts, FieldState, ModelError, Profile, RadialPoint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("numerical breakdown at t = {time} on level {depth}")]
    Breakdown { time: f64, depth: usize },
    #[error("blowup-time estimation failed: {0}")]
    Estimation(String),
    #[error("scale {lambda:e} is resolved by {cells} cells, need {need}")]
    Underresolved { lambda: f64, cells: usize, need: usize },
}

impl From<FitError> for EvolveError {
    fn from(e: FitError) -> Self {
        EvolveError::Estimation(e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    /// Blowup once `|w_rr(t,0)|` exceeds this multiple of `max(|w_rr(0,0)|, 1)`.
    pub blowup_growth: f64,
    /// Dispersion requires `sup_{r <= dispersion_radius} |w - 1|` below this ...
    pub dispersion_amplitude: f64,
    /// ... and the energy inside `dispersion_radius` below this fraction of the initial energy ...
    pub dispersion_energy_fraction: f64,
    /// ... continuously for this long.
    pub dispersion_window: f64,
    pub dispersion_radius: f64,
    pub max_time: f64,
    /// Budget on the total number of level steps.
    pub max_level_steps: u64,
}

impl Default for StopCriteria {
    fn default() -> Self {
        StopCriteria {
            blowup_growth: 1e12,
            dispersion_amplitude: 1e-3,
            dispersion_energy_fraction: 1e-6,
            dispersion_window: 2.0,
            dispersion_radius: 1.0,
            max_time: 40.0,
            max_level_steps: 50_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub dimension: Dimension,
    /// Amplitude `A` of `w(0,r) = 1 - A r^2 exp(-sigma (r - R)^2)`.
    pub amplitude: f64,
    pub sigma: f64,
    /// Gaussian center `R`.
    pub center: f64,
    pub r_max: f64,
    pub dr0: f64,
    pub cfl: f64,
    /// Kreiss–Oliger coefficient; zero disables dissipation.
    pub dissipation: f64,
    pub mesh: MeshParams,
    pub stop: StopCriteria,
    /// Keep per-row cumulative energy profiles for light-cone energies.
    pub record_cone: bool,
}

impl EvolutionConfig {
    pub fn new(dimension: Dimension, amplitude: f64) -> Self {
        EvolutionConfig {
            dimension,
            amplitude,
            sigma: 10.0,
            center: 2.0,
            r_max: 8.0,
            dr0: 0.01,
            cfl: 0.4,
            dissipation: 0.1,
            mesh: MeshParams::default(),
            stop: StopCriteria::default(),
            record_cone: true,
        }
    }

    /// Same data on a single uniform grid.
    pub fn unigrid(mut self) -> Self {
        self.mesh.max_depth = 0;
        self
    }

    pub fn validate(&self) -> Result<(), EvolveError> {
        let bad = |m: &str| Err(EvolveError::Config(m.to_string()));
        if !(self.amplitude >= 0.0) {
            return bad("amplitude must be non-negative");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.center > 0.0 && self.center < self.r_max) {
            return bad("gaussian center must lie in (0, r_max)");
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return bad("cfl must lie in (0, 1)");
        }
        if !(self.dr0 > 0.0) || self.r_max / self.dr0 < 32.0 {
            return bad("dr0 must be positive and resolve r_max by at least 32 cells");
        }
        if ((self.r_max / self.dr0) - (self.r_max / self.dr0).round()).abs() > 1e-6 {
            return bad("r_max must be an integer multiple of dr0");
        }
        if !(self.dissipation >= 0.0 && self.dissipation < 1.0) {
            return bad("dissipation must lie in [0, 1)");
        }
        if !(self.stop.blowup_growth > 1.0) {
            return bad("blowup_growth must exceed 1");
        }
        if !(self.stop.max_time > 0.0) {
            return bad("max_time must be positive");
        }
        self.mesh.validate()?;
        Ok(())
    }

    pub fn base_points(&self) -> usize {
        (self.r_max / self.dr0).round() as usize + 1
    }

    pub fn dt0(&self) -> f64 {
        self.cfl * self.dr0
    }
}

/// The gaussian initial data, sampled on the base grid.
pub fn make_initial_data(config: &EvolutionConfig) -> FieldState {
    let n = config.base_points();
    let points = (0..n)
        .map(|i| {
            let r = i as f64 * config.dr0;
            let (v, vr) = initial_v(config, r);
            RadialPoint { r, w: 1.0 - r * r * v, wt: 0.0, wr: -(2.0 * r * v + r * r * vr) }
        })
        .collect();
    FieldState { time: 0.0, points }
}

fn initial_v(config: &EvolutionConfig, r: f64) -> (f64, f64) {
    let x = r - config.center;
    let v = config.amplitude * (-config.sigma * x * x).exp();
    (v, -2.0 * config.sigma * x * v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeKind {
    Blowup,
    Dispersion,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CurvatureThreshold,
    ResolutionExhausted,
    Dispersed,
    TimeBudget,
    StepBudget,
    NumericalBreakdown,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub blowup_time: Option<f64>,
    /// Fitted exponent `p` of `lambda ~ (T - t)^p`.
    pub rate_exponent: Option<f64>,
    pub final_time: f64,
    pub reason: StopReason,
}

/// One diagnostics sample, taken after every step of the finest level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    /// `-ln(T - t)` once a blowup time is known.
    pub tau: Option<f64>,
    pub w_rr0: f64,
    pub lambda: Option<f64>,
    pub e_cone: Option<f64>,
    pub e_cone_kinetic: Option<f64>,
    pub e_total: f64,
    pub flux_out: f64,
    pub depth: usize,
    /// Every level sits at exactly `t`.
    pub synced: bool,
    /// `sup |w - 1|` inside the dispersion radius.
    pub inner_deviation: f64,
    /// Energy inside the dispersion radius.
    pub inner_energy: f64,
    /// Distance to each tracked profile (same order as `DiagnosticsSeries::profiles`).
    pub distances: Vec<Option<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub rows: Vec<DiagnosticsRow>,
    pub profiles: Vec<String>,
    /// Radii of the stored cumulative energy profiles (log-spaced).
    pub cone_radii: Vec<f64>,
    /// Per row: cumulative total and kinetic energy at `cone_radii`.
    pub cone_total: Vec<Vec<f64>>,
    pub cone_kinetic: Vec<Vec<f64>>,
}

impl DiagnosticsSeries {
    /// Rows with a defined scale, as `(t, lambda)`.
    pub fn scale_samples(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| r.lambda.map(|l| (r.t, l))).collect()
    }

    /// Light-cone energy (total, kinetic) of row `i` for blowup time `blowup_time`.
    pub fn cone_energy(&self, i: usize, blowup_time: f64) -> Option<(f64, f64)> {
        let radius = blowup_time - self.rows.get(i)?.t;
        let total = self.cone_total.get(i)?;
        let kin = self.cone_kinetic.get(i)?;
        Some((interp_log(&self.cone_radii, total, radius)?, interp_log(&self.cone_radii, kin, radius)?))
    }

    /// Fills `tau`, `e_cone` and `e_cone_kinetic` for a given blowup time.
    pub fn apply_blowup_time(&mut self, blowup_time: f64) {
        for i in 0..self.rows.len() {
            let cone = self.cone_energy(i, blowup_time);
            let row = &mut self.rows[i];
            row.tau = (blowup_time > row.t).then(|| -(blowup_time - row.t).ln());
            row.e_cone = cone.map(|c| c.0);
            row.e_cone_kinetic = cone.map(|c| c.1);
        }
    }

    pub fn profile_index(&self, name: &str) -> Option<usize> {
        self.profiles.iter().position(|p| p == name)
    }
}

/// Four-point Lagrange interpolation of `y(x)` in `ln x`.
fn interp_log(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    if x.len() < 4 || !(at >= x[0]) || at > x[x.len() - 1] {
        return None;
    }
    let k = x.partition_point(|&v| v <= at).clamp(2, x.len() - 2) - 2;
    let lx = at.ln();
    let mut sum = 0.0;
    for i in k..k + 4 {
        let mut l = 1.0;
        for j in k..k + 4 {
            if i != j {
                l *= (lx - x[j].ln()) / (x[i].ln() - x[j].ln());
            }
        }
        sum += l * y[i];
    }
    Some(sum)
}

/// When to capture rescaled profile snapshots.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SnapshotRule {
    /// Every `dt` time units.
    EveryDt(f64),
    /// Each time `lambda` shrinks by `10^(1/n)`.
    LambdaDecades(u32),
    /// At `tau = -ln(T - t)` for a known `T`.
    Tau { blowup_time: f64, values: Vec<f64> },
}

/// `w` sampled on a log-spaced radial grid at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawSnapshot {
    pub t: f64,
    pub lambda: Option<f64>,
    pub r: Vec<f64>,
    pub w: Vec<f64>,
}

impl RawSnapshot {
    /// `(eta, w(t, scale * eta))` on `eta = 10^(k/per_decade)` within the sampled range.
    pub fn rescaled(&self, scale: f64, per_decade: usize) -> Vec<(f64, f64)> {
        let (Some(&first), Some(&last)) = (self.r.first(), self.r.last()) else {
            return Vec::new();
        };
        let lo = (first / scale).log10();
        let hi = (last / scale).log10();
        let k0 = (lo * per_decade as f64).ceil() as i64;
        let k1 = (hi * per_decade as f64).floor() as i64;
        (k0..=k1)
            .filter_map(|k| {
                let eta = 10f64.powf(k as f64 / per_decade as f64);
                interp_log(&self.r, &self.w, scale * eta).map(|w| (eta, w))
            })
            .collect()
    }
}

/// Per-level dump of `(r, w, w_t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSnapshot {
    pub depth: usize,
    pub dr: f64,
    pub time: f64,
    pub rows: Vec<(f64, f64, f64)>,
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub outcome: Outcome,
    pub fit: Option<BlowupFit>,
    pub series: DiagnosticsSeries,
    pub snapshots: Vec<RawSnapshot>,
    pub levels: Vec<LevelSnapshot>,
    pub initial_energy: f64,
    pub final_state: FieldState,
}

const CONE_PER_DECADE: usize = 24;
const CONE_MIN_EXP: i32 = -14;

struct TrackedProfile {
    name: String,
    profile: Profile,
    curvature: f64,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Origin,
    Parent,
    Outgoing,
}

struct Geometry {
    lo: usize,
    dr: f64,
    n: usize,
    left: Side,
    right: Side,
    frozen: Option<Interval>,
}

impl Geometry {
    fn evolved(&self, i: usize) -> bool {
        if self.left == Side::Parent && i < 2 {
            return false;
        }
        if self.right == Side::Parent && i + 2 >= self.n {
            return false;
        }
        !self.frozen.is_some_and(|f| f.contains(i))
    }

    fn r(&self, i: usize) -> f64 {
        (self.lo + i) as f64 * self.dr
    }
}

/// Outgoing-wave condition at `r_max`.
///
/// `v` obeys the radial wave equation in `d + 2` dimensions far out. For odd
/// `d` its outgoing solutions are finite sums
/// `r^m v = sum_k c_k r^-k f^(l-k)(t - r)` with `m = (d+1)/2`, `l = (d-1)/2`,
/// so carrying `f, ..., f^(l-1)` at the boundary as extra ODEs makes the
/// condition exact for linear waves. Even `d` uses `v_t + v_r + m v / r = 0`.
#[derive(Clone, Debug)]
struct OuterBoundary {
    m: f64,
    /// `c_1, ..., c_l`.
    coeffs: Vec<f64>,
}

impl OuterBoundary {
    fn new(d: Dimension) -> Self {
        let m = 0.5 * (d.as_f64() + 1.0);
        let coeffs = if d.get() % 2 == 1 {
            let l = (d.get() - 1) / 2;
            (1..=l)
                .map(|k| (l - k + 1..=l + k).map(f64::from).product::<f64>() / ((1..=k).map(f64::from).product::<f64>() * 2f64.powi(k as i32)))
                .collect()
        } else {
            Vec::new()
        };
        OuterBoundary { m, coeffs }
    }

    fn len(&self) -> usize {
        self.coeffs.len()
    }

    /// `f^(l)` at the boundary, from `r^m v` there.
    fn top(&self, y: &[f64], v: f64, r: f64) -> f64 {
        let l = self.len();
        let mut f = r.powf(self.m) * v;
        for (k, c) in (1..=l).zip(&self.coeffs) {
            f -= c * r.powi(-(k as i32)) * y[l - k];
        }
        f
    }

    /// Right-hand side of `u_t + u_r + m u / r = s` for `u = v` given
    /// `f^(j)`, or for `u = v_t` given their time derivatives.
    fn source(&self, f: &[f64], r: f64) -> f64 {
        let l = self.len();
        let mut s = 0.0;
        for (k, c) in (1..=l).zip(&self.coeffs) {
            s -= k as f64 * c * r.powi(-(k as i32) - 1) * f[l - k];
        }
        s * r.powf(-self.m)
    }
}

/// Physics and bookkeeping plugged into the hierarchy.
struct Driver {
    config: EvolutionConfig,
    d: Dimension,
    outer: OuterBoundary,
    /// `f, ..., f^(l-1)` at `r_max`.
    outer_state: Vec<f64>,
    scale_curvature: f64,
    flux: f64,
    flux_prev: f64,
    tracked: Vec<TrackedProfile>,
    schedule: Vec<SnapshotRule>,
    next_dt: f64,
    next_decade: i64,
    tau_index: Vec<usize>,
    series: DiagnosticsSeries,
    snapshots: Vec<RawSnapshot>,
    initial_energy: f64,
    curvature_limit: f64,
    dispersed_since: Option<f64>,
    level_steps: u64,
    stop: Option<StopReason>,
    recording: bool,
}

impl Driver {
    /// Fills `k` and returns the time derivative of the boundary state `aux`.
    fn rhs(&self, g: &Geometry, f: &Fields, aux: &[f64], k: &mut Fields) -> Vec<f64> {
        let (v, p) = (&f[0], &f[1]);
        let mut daux = vec![0.0; aux.len()];
        let n = g.n;
        let dr = g.dr;
        let inv_dr2 = 1.0 / (dr * dr);
        let df = self.d.as_f64();
        let friction = df + 1.0;
        let coupling = self.d.coupling();
        let ko = self.config.dissipation / (16.0 * dr);
        let at = |a: &[f64], j: i64| -> f64 {
            if j < 0 {
                a[(-j) as usize]
            } else {
                a[j as usize]
            }
        };
        for i in 0..n {
            if !g.evolved(i) {
                k[0][i] = 0.0;
                k[1][i] = 0.0;
                continue;
            }
            let r = g.r(i);
            if g.right == Side::Outgoing && i == n - 1 {
                let ob = &self.outer;
                let c = ob.m / r;
                let dv = (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * dr);
                let dp = (3.0 * p[i] - 4.0 * p[i - 1] + p[i - 2]) / (2.0 * dr);
                let (mut sv, mut sp) = (0.0, 0.0);
                if ob.len() > 0 {
                    let mut shifted = aux[1..].to_vec();
                    shifted.push(ob.top(aux, v[i], r));
                    sv = ob.source(aux, r);
                    sp = ob.source(&shifted, r);
                    daux = shifted;
                }
                k[0][i] = -dv - c * v[i] + sv;
                k[1][i] = -dp - c * p[i] + sp;
                continue;
            }
            let ii = i as i64;
            let (vm, vp) = if i == 0 { (v[1], v[1]) } else { (v[i - 1], v[i + 1]) };
            let vi = v[i];
            let accel = if r == 0.0 {
                (df + 2.0) * 2.0 * (vp - vi) * inv_dr2 + 3.0 * coupling * vi * vi
            } else {
                let (cp, cm) = evans_weights(g.lo + i, friction);
                (cp * (vp - vi) - cm * (vi - vm)) * inv_dr2 + coupling * vi * vi * (3.0 - r * r * vi)
            };
            let mut kv = p[i];
            let mut kp = accel;
            let ko_ok = ko > 0.0
                && i + 2 < n
                && (i >= 2 || g.left == Side::Origin)
                && !(g.right == Side::Outgoing && i + 2 >= n);
            if ko_ok {
                let d4 = |a: &[f64]| {
                    at(a, ii - 2) - 4.0 * at(a, ii - 1) + 6.0 * a[i] - 4.0 * a[i + 1] + a[i + 2]
                };
                kv -= ko * d4(v);
                kp -= ko * d4(p);
            }
            k[0][i] = kv;
            k[1][i] = kp;
        }
        daux
    }

    /// Energy flux through the outer edge, `-2 c(d) r^{d-3} w_t w_r`.
    fn boundary_flux(&self, g: &Geometry, f: &Fields) -> f64 {
        let n = g.n;
        let r = g.r(n - 1);
        let (v, p) = (&f[0], &f[1]);
        let vr = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * g.dr);
        let wt = -r * r * p[n - 1];
        let wr = -(2.0 * r * v[n - 1] + r * r * vr);
        -2.0 * self.d.energy_prefactor() * r.powi(self.d.get() as i32 - 3) * wt * wr
    }

    fn fill_from_parent(g: &Geometry, f: &mut Fields, parent: &Level, tick: f64) {
        let theta = parent.time_weight(tick);
        let mut set = |i: usize| {
            if let Some(vals) = parent.sample_for_child(g.lo + i, theta) {
                for (field, x) in f.iter_mut().zip(vals) {
                    field[i] = x;
                }
            }
        };
        if g.left == Side::Parent {
            set(0);
            set(1);
        }
        if g.right == Side::Parent {
            set(g.n - 2);
            set(g.n - 1);
        }
    }

    fn center_curvature(hierarchy: &Hierarchy, tick: u64) -> f64 {
        let level = hierarchy.center_level();
        let theta = if level.tick <= tick { 1.0 } else { level.time_weight(tick as f64) };
        -2.0 * level.value_at(0, 0, theta)
    }

    fn scale_from(&self, w_rr0: f64) -> Option<f64> {
        scale_from_curvature(w_rr0, self.scale_curvature)
    }

    fn record(&mut self, hierarchy: &Hierarchy) -> Result<Flow, EvolveError> {
        let tick = hierarchy.finest().tick;
        let t = hierarchy.clock.time(tick as f64);
        let views = hierarchy.views_at(tick);
        let state = composite_state(&views, t);
        let w_rr0 = Self::center_curvature(hierarchy, tick);
        if !w_rr0.is_finite() {
            self.stop = Some(StopReason::NumericalBreakdown);
            return Ok(Flow::Stop);
        }
        let lambda = self.scale_from(w_rr0);
        let cumulative = cumulative_energy(&state, self.d);
        let e_total = cumulative.last().map_or(0.0, EnergyParts::total);

        let level0 = &hierarchy.levels[0];
        let theta0 = if level0.tick <= tick { 1.0 } else { level0.time_weight(tick as f64) };
        let flux_out = self.flux_prev + theta0 * (self.flux - self.flux_prev);

        let radius = self.config.stop.dispersion_radius;
        let inner_deviation = state
            .points
            .iter()
            .take_while(|p| p.r <= radius)
            .map(|p| (p.w - 1.0).abs())
            .fold(0.0, f64::max);
        let inner_energy = cumulative_at(&state, &cumulative, radius).total();

        let finest_dr = hierarchy.finest().dr;
        let pps = self.config.mesh.points_per_scale as usize;
        let distances = self
            .tracked
            .iter()
            .map(|tp| {
                let lam = scale_from_curvature(w_rr0, tp.curvature)?;
                profile_distance(&state, &tp.profile, lam, pps).ok()
            })
            .collect();

        if self.recording && self.config.record_cone {
            let (tot, kin) = self
                .series
                .cone_radii
                .iter()
                .map(|&rc| {
                    let e = cumulative_at(&state, &cumulative, rc);
                    (e.total(), e.kinetic)
                })
                .unzip();
            self.series.cone_total.push(tot);
            self.series.cone_kinetic.push(kin);
        }

        let synced = hierarchy.levels.iter().all(|l| l.tick == tick);
        self.series.rows.push(DiagnosticsRow {
            t,
            tau: None,
            w_rr0,
            lambda,
            e_cone: None,
            e_cone_kinetic: None,
            e_total,
            flux_out,
            depth: hierarchy.depth(),
            synced,
            inner_deviation,
            inner_energy,
            distances,
        });

        self.capture_snapshots(&state, t, lambda, finest_dr);

        // Stop criteria.
        if w_rr0.abs() > self.curvature_limit {
            self.stop = Some(StopReason::CurvatureThreshold);
            return Ok(Flow::Stop);
        }
        if let Some(lam) = lambda {
            let exhausted = hierarchy.depth() >= self.config.mesh.max_depth
                && lam < self.config.mesh.points_per_scale * finest_dr;
            if exhausted && self.scale_shrinking() {
                self.stop = Some(StopReason::ResolutionExhausted);
                return Ok(Flow::Stop);
            }
        }
        let quiet = inner_deviation < self.config.stop.dispersion_amplitude
            && inner_energy <= self.config.stop.dispersion_energy_fraction * self.initial_energy;
        if quiet {
            let since = *self.dispersed_since.get_or_insert(t);
            if t - since >= self.config.stop.dispersion_window {
                self.stop = Some(StopReason::Dispersed);
                return Ok(Flow::Stop);
            }
        } else {
            self.dispersed_since = None;
        }
        if t >= self.config.stop.max_time {
            self.stop = Some(StopReason::TimeBudget);
            return Ok(Flow::Stop);
        }
        if self.level_steps >= self.config.stop.max_level_steps {
            self.stop = Some(StopReason::StepBudget);
            return Ok(Flow::Stop);
        }
        Ok(Flow::Continue)
    }

    fn scale_shrinking(&self) -> bool {
        let rows = &self.series.rows;
        if rows.len() < 8 {
            return false;
        }
        let now = rows[rows.len() - 1].lambda;
        let before = rows[rows.len() - 8].lambda;
        matches!((now, before), (Some(a), Some(b)) if a < b)
    }

    fn capture_snapshots(&mut self, state: &FieldState, t: f64, lambda: Option<f64>, finest_dr: f64) {
        let mut take = false;
        for (idx, rule) in self.schedule.iter().enumerate() {
            match rule {
                SnapshotRule::EveryDt(dt) => {
                    if t >= self.next_dt {
                        take = true;
                        while self.next_dt <= t {
                            self.next_dt += dt;
                        }
                    }
                }
                SnapshotRule::LambdaDecades(per) => {
                    if let Some(lam) = lambda {
                        let level = (-(lam.log10()) * *per as f64).floor() as i64;
                        if level >= self.next_decade {
                            take = true;
                            self.next_decade = level + 1;
                        }
                    }
                }
                SnapshotRule::Tau { blowup_time, values } => {
                    let k = &mut self.tau_index[idx];
                    if *k < values.len() && *blowup_time > t && -(blowup_time - t).ln() >= values[*k] {
                        take = true;
                        while *k < values.len() && -(blowup_time - t).ln() >= values[*k] {
                            *k += 1;
                        }
                    }
                }
            }
        }
        if !take {
            return;
        }
        let lo = lambda.map_or(finest_dr, |l| (l * 1e-2).max(finest_dr * 0.5));
        let hi = state.outer_radius();
        let per_decade = 40.0;
        let count = ((hi / lo).log10() * per_decade).floor() as usize + 1;
        let (r, w): (Vec<f64>, Vec<f64>) = (0..count)
            .filter_map(|k| {
                let r = lo * 10f64.powf(k as f64 / per_decade);
                state.w_at(r).map(|w| (r, w))
            })
            .unzip();
        self.snapshots.push(RawSnapshot { t, lambda, r, w });
    }
}

impl LevelSolver for Driver {
    type Error = EvolveError;

    fn step(&mut self, level: &mut Level, parent: Option<&Level>, frozen: Option<Interval>, clock: &Clock) -> Result<(), EvolveError> {
        let n = level.len();
        let dt = clock.dt(level.depth);
        let tps = clock.ticks_per_step(level.depth) as f64;
        let tick0 = level.tick as f64;
        let g = Geometry {
            lo: level.lo,
            dr: level.dr,
            n,
            left: if level.touches_origin() { Side::Origin } else { Side::Parent },
            right: if parent.is_some() { Side::Parent } else { Side::Outgoing },
            frozen,
        };
        const C: [f64; 4] = [0.0, 0.5, 0.5, 1.0];
        const B: [f64; 4] = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
        let base = std::mem::take(&mut level.fields);
        let mut stage = base.clone();
        let mut k: Fields = std::array::from_fn(|_| vec![0.0; n]);
        let mut acc: Fields = std::array::from_fn(|_| vec![0.0; n]);
        let mut flux_rate = 0.0;
        let aux_base = if parent.is_none() { self.outer_state.clone() } else { Vec::new() };
        let mut aux = aux_base.clone();
        let mut aux_k = Vec::new();
        let mut aux_acc = vec![0.0; aux_base.len()];
        for s in 0..4 {
            if s > 0 {
                for f in 0..2 {
                    for i in 0..n {
                        stage[f][i] = base[f][i] + C[s] * dt * k[f][i];
                    }
                }
                for (j, a) in aux.iter_mut().enumerate() {
                    *a = aux_base[j] + C[s] * dt * aux_k[j];
                }
                if let Some(p) = parent {
                    Self::fill_from_parent(&g, &mut stage, p, tick0 + C[s] * tps);
                }
            }
            aux_k = self.rhs(&g, &stage, &aux, &mut k);
            for f in 0..2 {
                for i in 0..n {
                    acc[f][i] += B[s] * k[f][i];
                }
            }
            for (a, dk) in aux_acc.iter_mut().zip(&aux_k) {
                *a += B[s] * dk;
            }
            if parent.is_none() {
                flux_rate += B[s] * self.boundary_flux(&g, &stage);
            }
        }
        for f in 0..2 {
            for i in 0..n {
                stage[f][i] = base[f][i] + dt * acc[f][i];
            }
        }
        if let Some(p) = parent {
            Self::fill_from_parent(&g, &mut stage, p, tick0 + tps);
        }
        level.fields = stage;
        if parent.is_none() {
            for (y, (y0, a)) in self.outer_state.iter_mut().zip(aux_base.iter().zip(&aux_acc)) {
                *y = y0 + dt * a;
            }
            self.flux_prev = self.flux;
            self.flux += dt * flux_rate;
        }
        self.level_steps += 1;
        if level.fields.iter().any(|f| f.iter().any(|x| !x.is_finite())) {
            return Err(EvolveError::Breakdown { time: clock.time(tick0 + tps), depth: level.depth });
        }
        Ok(())
    }

    fn refinement_indicator(&self, level: &Level) -> Vec<f64> {
        let n = level.len();
        let v = &level.fields[0];
        let dr = level.dr;
        (0..n)
            .map(|i| {
                let r = level.r(i);
                let vr = if i == 0 {
                    if level.touches_origin() {
                        0.0
                    } else {
                        (v[1] - v[0]) / dr
                    }
                } else if i == n - 1 {
                    (v[i] - v[i - 1]) / dr
                } else {
                    (v[i + 1] - v[i - 1]) / (2.0 * dr)
                };
                (dr * (2.0 * r * v[i] + r * r * vr)).abs()
            })
            .collect()
    }

    fn scale_estimate(&self, hierarchy: &Hierarchy) -> Option<f64> {
        let level = hierarchy.center_level();
        self.scale_from(-2.0 * level.fields[0][0])
    }

    fn after_step(&mut self, hierarchy: &Hierarchy, depth: usize) -> Result<Flow, EvolveError> {
        if depth + 1 != hierarchy.levels.len() {
            return Ok(Flow::Continue);
        }
        self.record(hierarchy)
    }
}

/// Weights of `v_rr + (k/r) v_r` at `r = g dr` in the volume-weighted form
/// `(k+1) d(r^k v_r) / d(r^{k+1})` over the cell `[r - dr/2, r + dr/2]`.
/// Returns the coefficients of `v_{g+1} - v_g` and `v_g - v_{g-1}` (times `1/dr^2`).
fn evans_weights(g: usize, k: f64) -> (f64, f64) {
    let x = g as f64;
    let q = (x - 0.5) / (x + 0.5);
    let order = k.round() as usize;
    let mut sum = 0.0;
    let mut qm = 1.0;
    for _ in 0..=order {
        sum += qm;
        qm *= q;
    }
    let qk = qm / q;
    ((k + 1.0) / sum, (k + 1.0) * qk / sum)
}

/// `lambda = sqrt(W''(0) / w_rr(t,0))` when the signs agree.
pub fn scale_from_curvature(w_rr0: f64, profile_curvature: f64) -> Option<f64> {
    let q = profile_curvature / w_rr0;
    (w_rr0 != 0.0 && q > 0.0 && q.is_finite()).then(|| q.sqrt())
}

/// Blowup scale of `state` from its center curvature, measured against the
/// blowup profile of dimension `d`. `None` in the early phase (`w_rr(t,0) >= 0`).
pub fn extract_scale(state: &FieldState, d: Dimension) -> Result<Option<f64>, EvolveError> {
    let w_rr0 = state.center_curvature()?;
    let k = d.blowup_profile().curvature_at_origin()?;
    Ok(scale_from_curvature(w_rr0, k))
}

/// `sup_{eta in [0,1]} |w(t, lambda eta) - W(eta)|` on 201 equispaced samples.
pub fn profile_distance(state: &FieldState, profile: &Profile, lambda: f64, points_per_scale: usize) -> Result<f64, EvolveError> {
    let inside = state.points.iter().take_while(|p| p.r <= lambda).count();
    let cells = inside.saturating_sub(1);
    if cells < points_per_scale || lambda > state.outer_radius() {
        return Err(EvolveError::Underresolved { lambda, cells, need: points_per_scale });
    }
    let mut worst: f64 = 0.0;
    for j in 0..=200 {
        let eta = j as f64 / 200.0;
        let w = state
            .w_at(lambda * eta)
            .ok_or(EvolveError::Underresolved { lambda, cells, need: points_per_scale })?;
        worst = worst.max((w - profile.value(eta)).abs());
    }
    Ok(worst)
}

/// Fits `lambda = C (T - t)^p` over the last decade of `lambda`.
pub fn estimate_blowup_time(series: &DiagnosticsSeries) -> Result<BlowupFit, EvolveError> {
    let samples = series.scale_samples();
    if samples.len() < 20 {
        return Err(EvolveError::Estimation(format!(
            "{} rows with a defined scale, need at least 20",
            samples.len()
        )));
    }
    let lmin = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let lmax = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    let decades = (lmax / lmin).log10();
    if decades < 2.0 {
        return Err(FitError::InsufficientRange { decades, need: 2.0 }.into());
    }
    let start = samples.iter().rposition(|s| s.1 > 10.0 * lmin).map_or(0, |i| i + 1);
    let (t, l): (Vec<f64>, Vec<f64>) = samples[start..].iter().cloned().unzip();
    Ok(fit_blowup_law(&t, &l)?)
}

fn cumulative_at(state: &FieldState, cumulative: &[EnergyParts], radius: f64) -> EnergyParts {
    let p = &state.points;
    let k = p.partition_point(|q| q.r <= radius);
    if k == 0 {
        return EnergyParts::default();
    }
    if k >= p.len() {
        return cumulative[p.len() - 1];
    }
    let (a, b) = (&p[k - 1], &p[k]);
    let s = (radius - a.r) / (b.r - a.r);
    let (ca, cb) = (cumulative[k - 1], cumulative[k]);
    EnergyParts {
        kinetic: ca.kinetic + s * (cb.kinetic - ca.kinetic),
        potential: ca.potential + s * (cb.potential - ca.potential),
    }
}

/// `w`-form composite of all levels (each point from the finest level covering it).
pub fn composite_state(views: &[LevelView], t: f64) -> FieldState {
    let mut points: Vec<RadialPoint> = Vec::new();
    for view in views {
        let (v, p) = (&view.fields[0], &view.fields[1]);
        let n = v.len();
        let dr = view.dr;
        for iv in &view.owned {
            for i in iv.lo..=iv.hi {
                let r = view.r(i);
                let vr = if i == 0 {
                    if view.lo == 0 {
                        0.0
                    } else {
                        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dr)
                    }
                } else if i == n - 1 {
                    (3.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / (2.0 * dr)
                } else {
                    (v[i + 1] - v[i - 1]) / (2.0 * dr)
                };
                points.push(RadialPoint {
                    r,
                    w: 1.0 - r * r * v[i],
                    wt: -r * r * p[i],
                    wr: -(2.0 * r * v[i] + r * r * vr),
                });
            }
        }
    }
    points.sort_by(|a, b| a.r.total_cmp(&b.r));
    FieldState { time: t, points }
}

/// Per-level `(r, w, w_t)` of the hierarchy at each level's own time.
pub fn level_snapshots(hierarchy: &Hierarchy) -> Vec<LevelSnapshot> {
    hierarchy
        .levels
        .iter()
        .map(|l| LevelSnapshot {
            depth: l.depth,
            dr: l.dr,
            time: hierarchy.clock.time(l.tick as f64),
            rows: (0..l.len())
                .map(|i| {
                    let r = l.r(i);
                    (r, 1.0 - r * r * l.fields[0][i], -r * r * l.fields[1][i])
                })
                .collect(),
        })
        .collect()
}

/// An evolution in progress: owns its hierarchy and diagnostics.
pub struct Evolution {
    hierarchy: Hierarchy,
    driver: Driver,
    finished: Option<Outcome>,
}

impl Evolution {
    pub fn new(config: EvolutionConfig) -> Result<Self, EvolveError> {
        Self::with_tracking(config, Vec::new(), Vec::new())
    }

    /// Evolution that records distances to `tracked` profiles and captures
    /// rescaled snapshots according to `schedule`.
    pub fn with_tracking(
        config: EvolutionConfig,
        tracked: Vec<(String, Profile)>,
        schedule: Vec<SnapshotRule>,
    ) -> Result<Self, EvolveError> {
        config.validate()?;
        let n = config.base_points();
        let (v, p): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (initial_v(&config, i as f64 * config.dr0).0, 0.0)).unzip();
        let mut hierarchy = Hierarchy::new([v, p], config.dr0, config.dt0(), config.mesh.clone())?;
        let d = config.dimension;
        let tracked = tracked
            .into_iter()
            .map(|(name, profile)| {
                let curvature = profile.curvature_at_origin()?;
                Ok(TrackedProfile { name, profile, curvature })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let cone_radii = if config.record_cone {
            let top = (config.r_max.log10() * CONE_PER_DECADE as f64).floor() as i32;
            (CONE_MIN_EXP * CONE_PER_DECADE as i32..=top)
                .map(|k| 10f64.powf(k as f64 / CONE_PER_DECADE as f64))
                .collect()
        } else {
            Vec::new()
        };
        let series = DiagnosticsSeries {
            profiles: tracked.iter().map(|t| t.name.clone()).collect(),
            cone_radii,
            ..Default::default()
        };
        let tau_index = vec![0; schedule.len()];
        let mut driver = Driver {
            scale_curvature: d.blowup_profile().curvature_at_origin()?,
            outer: OuterBoundary::new(d),
            outer_state: vec![0.0; OuterBoundary::new(d).len()],
            d,
            flux: 0.0,
            flux_prev: 0.0,
            tracked,
            schedule,
            next_dt: 0.0,
            next_decade: i64::MIN,
            tau_index,
            series,
            snapshots: Vec::new(),
            initial_energy: 0.0,
            curvature_limit: f64::INFINITY,
            dispersed_since: None,
            level_steps: 0,
            stop: None,
            recording: false,
            config,
        };
        hierarchy.initial_regrid(&mut driver)?;
        let w_rr0 = Driver::center_curvature(&hierarchy, 0);
        driver.curvature_limit = driver.config.stop.blowup_growth * w_rr0.abs().max(1.0);
        let state = composite_state(&hierarchy.views_at(0), 0.0);
        driver.initial_energy = crate::model::total_energy(&state, d);
        driver.recording = true;
        let mut evo = Evolution { hierarchy, driver, finished: None };
        evo.driver.record(&evo.hierarchy)?;
        Ok(evo)
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.driver.config
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn series(&self) -> &DiagnosticsSeries {
        &self.driver.series
    }

    pub fn time(&self) -> f64 {
        self.hierarchy.time()
    }

    pub fn initial_energy(&self) -> f64 {
        self.driver.initial_energy
    }

    /// Cumulative energy radiated through the outer boundary (at level-0 time).
    pub fn flux_out(&self) -> f64 {
        self.driver.flux
    }

    /// Composite state at the time of the finest level.
    pub fn state(&self) -> FieldState {
        let tick = self.hierarchy.finest().tick;
        composite_state(&self.hierarchy.views_at(tick), self.hierarchy.time())
    }

    /// Advances one coarse step; returns the outcome once a stop criterion fires.
    pub fn step(&mut self) -> Result<Option<Outcome>, EvolveError> {
        if let Some(o) = self.finished {
            return Ok(Some(o));
        }
        let flow = match self.hierarchy.advance(&mut self.driver) {
            Ok(f) => f,
            Err(EvolveError::Breakdown { .. }) => {
                self.driver.stop = Some(StopReason::NumericalBreakdown);
                Flow::Stop
            }
            Err(e) => return Err(e),
        };
        if flow == Flow::Continue && self.driver.stop.is_none() {
            return Ok(None);
        }
        let reason = self.driver.stop.unwrap_or(StopReason::NumericalBreakdown);
        let kind = match reason {
            StopReason::CurvatureThreshold | StopReason::ResolutionExhausted => OutcomeKind::Blowup,
            StopReason::Dispersed => OutcomeKind::Dispersion,
            _ => OutcomeKind::Undetermined,
        };
        let outcome = Outcome { kind, blowup_time: None, rate_exponent: None, final_time: self.time(), reason };
        self.finished = Some(outcome);
        Ok(Some(outcome))
    }

    /// Evolves each coarse step for at most `t_end` time units (ignoring stop criteria outcome).
    pub fn advance_to(&mut self, t_end: f64) -> Result<Option<Outcome>, EvolveError> {
        while self.time() < t_end - 1e-12 {
            if let Some(o) = self.step()? {
                return Ok(Some(o));
            }
        }
        Ok(None)
    }

    /// Runs until a stop criterion fires and finalizes diagnostics.
    pub fn run(mut self) -> Result<RunRecord, EvolveError> {
        let mut outcome = loop {
            if let Some(o) = self.step()? {
                break o;
            }
        };
        let mut fit = None;
        if outcome.kind == OutcomeKind::Blowup {
            let series = &self.driver.series;
            let horizon = match estimate_blowup_time(series) {
                Ok(f) => {
                    fit = Some(f);
                    outcome.rate_exponent = Some(f.exponent);
                    f.blowup_time
                }
                Err(_) => {
                    let last = series.rows.last().expect("at least one row");
                    last.t + last.lambda.unwrap_or(0.0)
                }
            };
            outcome.blowup_time = Some(horizon);
            self.driver.series.apply_blowup_time(horizon);
        }
        let final_state = self.state();
        Ok(RunRecord {
            outcome,
            fit,
            levels: level_snapshots(&self.hierarchy),
            series: self.driver.series,
            snapshots: self.driver.snapshots,
            initial_energy: self.driver.initial_energy,
            final_state,
        })
    }
}

/// Runs `config` to completion.
pub fn classify_outcome(config: &EvolutionConfig) -> Result<RunRecord, EvolveError> {
    Evolution::new(config.clone())?.run()
}
