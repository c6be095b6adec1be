//! Drivers for the scaling experiments: critical-amplitude bisection,
//! comparisons against intermediate attractors, sweeps around the threshold
//! and fits of blowup rates and light-cone energies.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolve::{
    estimate_blowup_time, DiagnosticsSeries, EvolutionConfig, Evolution, EvolveError, OutcomeKind, RunRecord,
    SnapshotRule,
};
use crate::fit::{linear_fit, power_law_fit, BlowupFit, FitError};
use crate::model::Profile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error("invalid bracket: A = {a_lo} gives {lo:?} and A = {a_hi} gives {hi:?}")]
    InvalidBracket { a_lo: f64, a_hi: f64, lo: OutcomeKind, hi: OutcomeKind },
    #[error("sweep contaminated: A* - {epsilon:e} blew up")]
    Contaminated { epsilon: f64 },
    #[error("no tracked profile named {0}")]
    MissingProfile(String),
    #[error("{0}")]
    Insufficient(String),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Residual above which a log-log fit is reported as unreliable.
pub const RELIABLE_RMS: f64 = 0.05;

/// Initial data family `A -> config` with everything but the amplitude fixed.
#[derive(Clone, Debug)]
pub struct AmplitudeFamily {
    pub base: EvolutionConfig,
}

impl AmplitudeFamily {
    pub fn new(base: EvolutionConfig) -> Self {
        AmplitudeFamily { base }
    }

    pub fn at(&self, amplitude: f64) -> EvolutionConfig {
        EvolutionConfig { amplitude, ..self.base.clone() }
    }

    pub fn classify(&self, amplitude: f64) -> Result<OutcomeKind, EvolveError> {
        Ok(Evolution::new(self.at(amplitude))?.run()?.outcome.kind)
    }

    pub fn run(&self, amplitude: f64, tracked: &[(String, Profile)]) -> Result<RunRecord, EvolveError> {
        self.run_with(amplitude, tracked, Vec::new())
    }

    pub fn run_with(&self, amplitude: f64, tracked: &[(String, Profile)], schedule: Vec<SnapshotRule>) -> Result<RunRecord, EvolveError> {
        Evolution::with_tracking(self.at(amplitude), tracked.to_vec(), schedule)?.run()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub amplitude: f64,
    pub outcome: OutcomeKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    /// Largest amplitude known to disperse.
    pub a_lo: f64,
    /// Smallest amplitude known to blow up.
    pub a_hi: f64,
    pub history: Vec<Probe>,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.a_hi - self.a_lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.a_lo + self.a_hi)
    }

    /// Replays the history and checks that every bracket along the way was
    /// ordered, correctly labelled and no wider than its predecessor.
    pub fn invariant_holds(&self) -> bool {
        let mut lo: Option<f64> = None;
        let mut hi: Option<f64> = None;
        let mut width = f64::INFINITY;
        for p in &self.history {
            match p.outcome {
                OutcomeKind::Dispersion => {
                    if lo.is_some_and(|l| p.amplitude < l) {
                        return false;
                    }
                    lo = Some(p.amplitude);
                }
                OutcomeKind::Blowup => {
                    if hi.is_some_and(|h| p.amplitude > h) {
                        return false;
                    }
                    hi = Some(p.amplitude);
                }
                OutcomeKind::Undetermined => continue,
            }
            if let (Some(l), Some(h)) = (lo, hi) {
                if l >= h || h - l > width {
                    return false;
                }
                width = h - l;
            }
        }
        lo == Some(self.a_lo) && hi == Some(self.a_hi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bisection {
    pub bracket: Bracket,
    pub critical: f64,
    /// Stopped on an undetermined probe before reaching the tolerance.
    pub limited: bool,
}

/// Bisection on the outcome until `(a_hi - a_lo) <= tolerance * a_hi`.
pub fn bisect_critical<F>(mut classify: F, a_lo: f64, a_hi: f64, tolerance: f64) -> Result<Bisection, ExperimentError>
where
    F: FnMut(f64) -> Result<OutcomeKind, ExperimentError>,
{
    if !(a_lo < a_hi) {
        return Err(ExperimentError::Insufficient("need a_lo < a_hi".into()));
    }
    let lo = classify(a_lo)?;
    let hi = classify(a_hi)?;
    if lo != OutcomeKind::Dispersion || hi != OutcomeKind::Blowup {
        return Err(ExperimentError::InvalidBracket { a_lo, a_hi, lo, hi });
    }
    let bracket = Bracket {
        a_lo,
        a_hi,
        history: vec![Probe { amplitude: a_lo, outcome: lo }, Probe { amplitude: a_hi, outcome: hi }],
    };
    refine_bracket(classify, bracket, tolerance)
}

/// Continues bisecting an existing bracket down to a tighter tolerance.
pub fn refine_bracket<F>(mut classify: F, mut bracket: Bracket, tolerance: f64) -> Result<Bisection, ExperimentError>
where
    F: FnMut(f64) -> Result<OutcomeKind, ExperimentError>,
{
    if !(tolerance > 0.0) {
        return Err(ExperimentError::Insufficient("tolerance must be positive".into()));
    }
    let mut limited = false;
    while bracket.width() > tolerance * bracket.a_hi.abs() {
        let mid = bracket.midpoint();
        if mid <= bracket.a_lo || mid >= bracket.a_hi {
            break;
        }
        let outcome = classify(mid)?;
        bracket.history.push(Probe { amplitude: mid, outcome });
        match outcome {
            OutcomeKind::Dispersion => bracket.a_lo = mid,
            OutcomeKind::Blowup => bracket.a_hi = mid,
            OutcomeKind::Undetermined => {
                limited = true;
                break;
            }
        }
    }
    let critical = bracket.midpoint();
    Ok(Bisection { bracket, critical, limited })
}

/// Power law `y = C x^k` fitted in log-log coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub abscissae: Vec<f64>,
    pub ordinates: Vec<f64>,
    pub exponent: f64,
    pub prefactor: f64,
    pub rms: f64,
    /// Range of abscissae used.
    pub window: (f64, f64),
    pub reliable: bool,
    /// Abscissae left out of the fit.
    pub excluded: Vec<f64>,
}

pub fn scaling_fit(x: &[f64], y: &[f64]) -> Result<ScalingFit, ExperimentError> {
    let f = power_law_fit(x, y)?;
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ScalingFit {
        abscissae: x.to_vec(),
        ordinates: y.to_vec(),
        exponent: f.slope,
        prefactor: f.intercept.exp(),
        rms: f.rms,
        window: (lo, hi),
        reliable: f.rms <= RELIABLE_RMS,
        excluded: Vec::new(),
    })
}

/// `n` log-spaced values from `lo` to `hi`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Distance below which a run counts as close to a tracked profile.
pub const NEAR_PROFILE: f64 = 0.1;

/// Distances to one tracked profile along a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorComparison {
    pub profile: String,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub min_distance: f64,
    pub t_min: f64,
    /// The distance fell from at least twice its minimum before reaching it.
    pub approach: bool,
    /// Last local minimum before the final rise of the distance, as `(t, distance)`.
    pub last_minimum: (f64, f64),
    /// First time after `last_minimum` at which the distance exceeds twice that minimum.
    pub departure: Option<f64>,
}

impl AttractorComparison {
    /// Convergence followed by departure, with a minimum below `threshold`.
    pub fn intermediate_phase(&self, threshold: f64) -> bool {
        self.approach && self.departure.is_some() && self.min_distance < threshold
    }

    /// First time after the last minimum where the distance exceeds `factor` times that minimum.
    pub fn departure_time(&self, factor: f64) -> Option<f64> {
        let (t0, m) = self.last_minimum;
        let k = self.times.iter().position(|&t| t == t0)?;
        (k..self.times.len()).find(|&i| self.distances[i] > factor * m).map(|i| self.times[i])
    }
}

pub fn attractor_comparison(series: &DiagnosticsSeries, profile: &str) -> Result<AttractorComparison, ExperimentError> {
    let idx = series.profile_index(profile).ok_or_else(|| ExperimentError::MissingProfile(profile.to_string()))?;
    let resolved: Vec<(usize, f64, f64)> = series
        .rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.distances.get(idx).copied().flatten().map(|d| (i, r.t, d)))
        .collect();
    let times: Vec<f64> = resolved.iter().map(|r| r.1).collect();
    let distances: Vec<f64> = resolved.iter().map(|r| r.2).collect();
    if times.is_empty() {
        return Err(ExperimentError::Insufficient(format!("no resolved distances to {profile}")));
    }
    let k = (0..distances.len()).min_by(|&a, &b| distances[a].total_cmp(&distances[b])).unwrap_or(0);
    let min_distance = distances[k];
    let approach = distances[..k].iter().any(|&d| d >= 2.0 * min_distance);
    // Walk back from the last point near the profile to the bottom of the final rise.
    let mut end = k + 1;
    while end < resolved.len() && resolved[end].0 == resolved[end - 1].0 + 1 {
        end += 1;
    }
    let mut m = (k..end).rev().find(|&i| distances[i] <= NEAR_PROFILE).unwrap_or(k);
    while m > k && distances[m - 1] < distances[m] {
        m -= 1;
    }
    let mut cmp = AttractorComparison {
        profile: profile.to_string(),
        t_min: times[k],
        last_minimum: (times[m], distances[m]),
        times,
        distances,
        min_distance,
        approach,
        departure: None,
    };
    cmp.departure = cmp.departure_time(2.0);
    Ok(cmp)
}

/// Time horizon `T` of an intermediate self-similar phase: the root of a
/// linear fit of the profile scale `lambda(t)` over the approach, i.e. from
/// the first time the distance drops below `threshold` up to its minimum.
pub fn attractor_horizon(series: &DiagnosticsSeries, profile: &str, profile_curvature: f64, threshold: f64) -> Result<f64, ExperimentError> {
    let cmp = attractor_comparison(series, profile)?;
    let idx = series.profile_index(profile).ok_or_else(|| ExperimentError::MissingProfile(profile.to_string()))?;
    let mut entered = false;
    let (t, l): (Vec<f64>, Vec<f64>) = series
        .rows
        .iter()
        .filter(|r| r.t <= cmp.t_min)
        .filter(|r| {
            entered |= r.distances[idx].is_some_and(|d| d < threshold);
            entered
        })
        .filter_map(|r| crate::evolve::scale_from_curvature(r.w_rr0, profile_curvature).map(|l| (r.t, l)))
        .unzip();
    let f = linear_fit(&t, &l)?;
    if !(f.slope < 0.0) {
        return Err(ExperimentError::Insufficient("scale does not shrink during the intermediate phase".into()));
    }
    Ok(-f.intercept / f.slope)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub amplitude: f64,
    pub outcome: OutcomeKind,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub fit: ScalingFit,
}

/// `max_t (d/2) w_rr(t,0)^2`, the largest center energy density of a run.
pub fn max_center_density(series: &DiagnosticsSeries, d: crate::model::Dimension) -> f64 {
    let half_d = 0.5 * d.as_f64();
    series.rows.iter().map(|r| half_d * r.w_rr0 * r.w_rr0).fold(0.0, f64::max)
}

/// Runs `A* - epsilon` for every epsilon and fits the peak center energy
/// density against epsilon.
pub fn subcritical_sweep(family: &AmplitudeFamily, a_star: f64, epsilons: &[f64]) -> Result<SweepResult, ExperimentError> {
    let mut points = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let amplitude = a_star - eps;
        let rec = family.run(amplitude, &[])?;
        let outcome = rec.outcome.kind;
        if outcome == OutcomeKind::Blowup {
            return Err(ExperimentError::Contaminated { epsilon: eps });
        }
        let value = (outcome == OutcomeKind::Dispersion).then(|| max_center_density(&rec.series, family.base.dimension));
        points.push(SweepPoint { epsilon: eps, amplitude, outcome, value });
    }
    let fit = fit_points(&points)?;
    Ok(SweepResult { points, fit })
}

fn fit_points(points: &[SweepPoint]) -> Result<ScalingFit, ExperimentError> {
    let (x, y): (Vec<f64>, Vec<f64>) = points.iter().filter_map(|p| p.value.map(|v| (p.epsilon, v))).unzip();
    let mut fit = scaling_fit(&x, &y)?;
    fit.excluded = points.iter().filter(|p| p.value.is_none()).map(|p| p.epsilon).collect();
    Ok(fit)
}

/// Departure times for one side of the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepartureSide {
    /// `+1` for `A* + epsilon`, `-1` for `A* - epsilon`.
    pub sign: i8,
    pub points: Vec<SweepPoint>,
    pub fit: ScalingFit,
    /// Exponents obtained with other departure factors, as `(factor, exponent)`.
    pub sensitivity: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepartureScaling {
    pub horizon: f64,
    pub sides: Vec<DepartureSide>,
}

/// Fits `T - t*` against `epsilon` on both sides of the threshold, where `t*`
/// is the first time the distance to `profile` exceeds `factor` times its
/// minimum and `T = horizon` is the time horizon of the critical run.
pub fn departure_scaling(
    family: &AmplitudeFamily,
    a_star: f64,
    epsilons: &[f64],
    profile: (&str, &Profile),
    horizon: f64,
    factor: f64,
) -> Result<DepartureScaling, ExperimentError> {
    let tracked = vec![(profile.0.to_string(), profile.1.clone())];
    let factors = [1.5, 2.0, 3.0];
    let mut sides = Vec::new();
    for sign in [-1i8, 1] {
        let mut comparisons = Vec::new();
        for &eps in epsilons {
            let amplitude = a_star + f64::from(sign) * eps;
            let rec = family.run(amplitude, &tracked)?;
            comparisons.push((eps, amplitude, rec.outcome.kind, attractor_comparison(&rec.series, profile.0).ok()));
        }
        let points_for = |fac: f64| -> Vec<SweepPoint> {
            comparisons
                .iter()
                .map(|(eps, amplitude, outcome, cmp)| {
                    let value = cmp
                        .as_ref()
                        .filter(|c| c.approach)
                        .and_then(|c| c.departure_time(fac))
                        .map(|t| horizon - t)
                        .filter(|&v| v > 0.0);
                    SweepPoint { epsilon: *eps, amplitude: *amplitude, outcome: *outcome, value }
                })
                .collect()
        };
        let points = points_for(factor);
        let fit = fit_points(&points)?;
        let sensitivity = factors
            .iter()
            .filter_map(|&f| fit_points(&points_for(f)).ok().map(|s| (f, s.exponent)))
            .collect();
        sides.push(DepartureSide { sign, points, fit, sensitivity });
    }
    Ok(DepartureScaling { horizon, sides })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalousRate {
    /// `p - 1` for `lambda ~ (T - t)^p`.
    pub alpha: f64,
    pub fit: BlowupFit,
    pub reliable: bool,
    pub caveat: String,
}

/// Exponent of `lambda ~ (T - t)^(1 + alpha)` over the last decade of the scale.
pub fn anomalous_rate_fit(series: &DiagnosticsSeries) -> Result<AnomalousRate, ExperimentError> {
    let fit = estimate_blowup_time(series)?;
    Ok(AnomalousRate {
        alpha: fit.exponent - 1.0,
        reliable: fit.rms <= RELIABLE_RMS,
        fit,
        caveat: "single power law over one decade of the scale; logarithmic corrections are not excluded".into(),
    })
}

/// `lambda / (T - t)` sampled at `per_decade` points per decade of `lambda`
/// over the last `decades` decades, and whether it decreases monotonically.
pub fn rate_ratio_trend(series: &DiagnosticsSeries, blowup_time: f64, decades: f64, per_decade: usize) -> Result<(Vec<(f64, f64)>, bool), ExperimentError> {
    let samples: Vec<(f64, f64)> = series
        .scale_samples()
        .into_iter()
        .filter(|&(t, _)| t < blowup_time)
        .collect();
    let lmin = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    if samples.is_empty() {
        return Err(ExperimentError::Insufficient("no scale samples".into()));
    }
    let start = samples.iter().rposition(|s| s.1 > lmin * 10f64.powf(decades)).ok_or_else(|| {
        ExperimentError::Insufficient(format!("scale spans fewer than {decades} decades"))
    })?;
    let tail = &samples[start..];
    let mut picked = Vec::new();
    let top = tail[0].1.log10();
    let mut k = 0usize;
    for &(t, l) in tail {
        let level = top - k as f64 / per_decade as f64;
        if l.log10() <= level {
            picked.push((t, l / (blowup_time - t)));
            while top - (k as f64) / per_decade as f64 >= l.log10() {
                k += 1;
            }
        }
    }
    let monotone = picked.windows(2).all(|w| w[1].1 < w[0].1);
    Ok((picked, monotone))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeTrend {
    Vanishing,
    Concentrating,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeEnergyLimit {
    pub trend: ConeTrend,
    /// Limit of the light-cone energy (zero for a vanishing trend).
    pub limit: f64,
    /// Value at the last reliable time.
    pub final_value: f64,
    /// Kinetic share of the light-cone energy at the last reliable time.
    pub kinetic_fraction: f64,
    /// Final value over the value one decade of `T - t` earlier.
    pub decade_ratio: f64,
    /// Exponent `k` of `E ~ (T - t)^k` over the last decade; `None` if the energy vanishes there.
    pub decay_exponent: Option<f64>,
    /// The energy decreases monotonically over the last decade.
    pub decreasing: bool,
    /// `T - t` at the last reliable time.
    pub final_radius: f64,
    pub low_confidence: bool,
}

/// Extrapolates the light-cone energy over the last decade of `T - t`.
///
/// The trend is vanishing when `E ~ (T - t)^k` with `k > 1/2` over that
/// decade (or the energy is zero). Otherwise the limit is the intercept of a
/// linear fit of the energy against its kinetic part, i.e. the energy
/// extrapolated to zero kinetic energy.
pub fn cone_energy_limit(series: &DiagnosticsSeries, blowup_time: f64, low_confidence: bool) -> Result<ConeEnergyLimit, ExperimentError> {
    let rows: Vec<(f64, f64, f64)> = (0..series.rows.len())
        .filter_map(|i| {
            let x = blowup_time - series.rows[i].t;
            series.cone_energy(i, blowup_time).map(|(e, k)| (x, e, k))
        })
        .filter(|r| r.0 > 0.0)
        .collect();
    let Some(&(x_last, e_last, k_last)) = rows.last() else {
        return Err(ExperimentError::Insufficient("no light-cone energies".into()));
    };
    let Some(first) = rows.iter().rposition(|r| r.0 >= 10.0 * x_last) else {
        return Err(ExperimentError::Insufficient("light-cone energy spans less than a decade".into()));
    };
    let window = &rows[first..];
    let e_before = window[0].1;
    let decade_ratio = if e_before > 0.0 { e_last / e_before } else { 0.0 };
    let decreasing = window.windows(2).all(|w| w[1].1 <= w[0].1);
    let kinetic_fraction = if e_last > 0.0 { k_last / e_last } else { 0.0 };
    let decay_exponent = if window.iter().all(|r| r.1 > 0.0) {
        let x: Vec<f64> = window.iter().map(|r| r.0).collect();
        let e: Vec<f64> = window.iter().map(|r| r.1).collect();
        Some(power_law_fit(&x, &e)?.slope)
    } else {
        None
    };
    let (trend, limit) = match decay_exponent {
        Some(k) if k <= 0.5 => {
            let k: Vec<f64> = window.iter().map(|r| r.2).collect();
            let e: Vec<f64> = window.iter().map(|r| r.1).collect();
            (ConeTrend::Concentrating, linear_fit(&k, &e)?.intercept)
        }
        _ => (ConeTrend::Vanishing, 0.0),
    };
    Ok(ConeEnergyLimit {
        trend,
        limit,
        final_value: e_last,
        kinetic_fraction,
        decade_ratio,
        decay_exponent,
        decreasing,
        final_radius: x_last,
        low_confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_on_a_step() {
        let r = bisect_critical(
            |a| Ok(if a > 1.0 / 3.0 { OutcomeKind::Blowup } else { OutcomeKind::Dispersion }),
            0.0,
            1.0,
            1e-9,
        )
        .unwrap();
        assert!((r.critical - 1.0 / 3.0).abs() < 1e-9);
        assert!(!r.limited);
        assert!(r.bracket.invariant_holds());
        let fine = refine_bracket(
            |a| Ok(if a > 1.0 / 3.0 { OutcomeKind::Blowup } else { OutcomeKind::Dispersion }),
            r.bracket,
            1e-15,
        )
        .unwrap();
        assert!((fine.critical - 1.0 / 3.0).abs() < 1e-15);
        assert!(fine.bracket.invariant_holds());
    }

    #[test]
    fn bisection_rejects_bad_bracket() {
        let e = bisect_critical(|_| Ok(OutcomeKind::Blowup), 0.0, 1.0, 1e-3).unwrap_err();
        assert!(matches!(e, ExperimentError::InvalidBracket { .. }));
    }

    #[test]
    fn bisection_stops_when_undetermined() {
        let r = bisect_critical(
            |a| {
                Ok(if (a - 0.5).abs() < 0.1 {
                    OutcomeKind::Undetermined
                } else if a > 0.5 {
                    OutcomeKind::Blowup
                } else {
                    OutcomeKind::Dispersion
                })
            },
            0.0,
            1.0,
            1e-9,
        )
        .unwrap();
        assert!(r.limited);
        assert_eq!((r.bracket.a_lo, r.bracket.a_hi), (0.0, 1.0));
    }

    #[test]
    fn tampered_history_breaks_invariant() {
        let mut b = Bracket {
            a_lo: 0.2,
            a_hi: 0.6,
            history: vec![
                Probe { amplitude: 0.2, outcome: OutcomeKind::Dispersion },
                Probe { amplitude: 0.6, outcome: OutcomeKind::Blowup },
            ],
        };
        assert!(b.invariant_holds());
        b.history.push(Probe { amplitude: 0.7, outcome: OutcomeKind::Dispersion });
        b.a_lo = 0.7;
        assert!(!b.invariant_holds());
    }

    #[test]
    fn synthetic_scaling_laws() {
        let eps = log_spaced(1e-7, 1e-3, 5);
        let rho: Vec<f64> = eps.iter().map(|e| e.powf(-0.8)).collect();
        let f = scaling_fit(&eps, &rho).unwrap();
        assert!((f.exponent + 0.8).abs() < 1e-3 && f.reliable);
        let tstar: Vec<f64> = eps.iter().map(|e| 0.3 * e.powf(0.2)).collect();
        assert!((scaling_fit(&eps, &tstar).unwrap().exponent - 0.2).abs() < 1e-3);
    }

    #[test]
    fn log_spacing() {
        let v = log_spaced(1e-7, 1e-3, 5);
        assert_eq!(v.len(), 5);
        assert!((v[2] / 1e-5 - 1.0).abs() < 1e-12);
    }
}
