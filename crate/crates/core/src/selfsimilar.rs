//! Self-similar profiles `w(t, r) = W(r / (T - t))` inside the past light
//! cone `eta in [0, 1]`.
//!
//! `W` solves
//!
//! ```text
//! (1 - eta^2) W'' + ((d-3)/eta - 2 eta) W' + (d-2)/eta^2 W (1 - W^2) = 0
//! ```
//!
//! which is singular at `eta = 0` and at the light cone `eta = 1`. Regular
//! solutions are built by two-sided shooting: power series start the
//! integration just off both endpoints and the two branches are matched at an
//! interior point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dimension, ModelError, Profile, ProfileTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelfSimilarError {
    #[error("light-cone value W(1) = {0} violates W(1)(1 - W(1)^2) = 0")]
    ConstraintViolation(f64),
    #[error("the light-cone series is resonant at order {order} in d = {d}")]
    Resonance { d: u32, order: usize },
    #[error("offset {0} outside (0, 0.01]")]
    Offset(f64),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("invalid search settings: {0}")]
    Settings(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Origin parameter of the closed-form ground state `W_0`.
pub const B0: f64 = -1.6;
/// Light-cone slope of `W_0`.
pub const C0: f64 = -1.25;
/// Origin parameter of the first excited profile `W_1` in `d = 5`.
pub const B1: f64 = -72.392_015_913;
/// Light-cone slope of `W_1` (with `W_1(1) = 0`).
pub const C1: f64 = 0.481_315_800;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimilarityOde {
    pub d: Dimension,
}

impl SimilarityOde {
    pub fn new(d: Dimension) -> Self {
        SimilarityOde { d }
    }

    /// `W''` from the equation, for `0 < eta < 1`.
    pub fn second_derivative(&self, eta: f64, w: f64, wp: f64) -> f64 {
        let df = self.d.as_f64();
        let drag = (df - 3.0) / eta - 2.0 * eta;
        -(drag * wp + (df - 2.0) / (eta * eta) * w * (1.0 - w * w)) / (1.0 - eta * eta)
    }

    /// Pointwise residual of the equation.
    pub fn residual(&self, eta: f64, w: f64, wp: f64, wpp: f64) -> f64 {
        let df = self.d.as_f64();
        (1.0 - eta * eta) * wpp + ((df - 3.0) / eta - 2.0 * eta) * wp + (df - 2.0) / (eta * eta) * w * (1.0 - w * w)
    }
}

/// Series value with the magnitude of its last retained term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesPoint {
    pub w: f64,
    pub wp: f64,
    pub truncation: f64,
}

const ORIGIN_ORDER: usize = 16;
const LIGHTCONE_ORDER: usize = 14;

/// Coefficient `n` of `a^3` given the full coefficient list.
fn cube_coefficient(a: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for i in 0..=n {
        for j in 0..=(n - i) {
            sum += a[i] * a[j] * a[n - i - j];
        }
    }
    sum
}

/// Taylor coefficients of the regular solution with `W = 1 + b eta^2 + ...`.
pub fn origin_coefficients(ode: &SimilarityOde, b: f64, order: usize) -> Vec<f64> {
    let df = ode.d.as_f64();
    let mut a = vec![0.0; order + 1];
    a[0] = 1.0;
    if order >= 2 {
        a[2] = b;
    }
    for n in (4..=order).step_by(2) {
        // a[n] is still zero, so the cube coefficient excludes it.
        let rest = cube_coefficient(&a, n);
        let nf = n as f64;
        a[n] = ((nf - 2.0) * (nf - 1.0) * a[n - 2] + (df - 2.0) * rest) / ((nf - 2.0) * (nf + df - 2.0));
    }
    a
}

/// `(W, W')` at `eta0` from the origin series.
pub fn series_origin(ode: &SimilarityOde, b: f64, eta0: f64) -> Result<SeriesPoint, SelfSimilarError> {
    if !(eta0 > 0.0 && eta0 <= 1e-2) {
        return Err(SelfSimilarError::Offset(eta0));
    }
    let a = origin_coefficients(ode, b, ORIGIN_ORDER);
    let w = a.iter().rev().fold(0.0, |acc, &an| acc * eta0 + an);
    let wp = wp_from_coefficients(&a, eta0);
    let truncation = (a[ORIGIN_ORDER] * eta0.powi(ORIGIN_ORDER as i32)).abs();
    Ok(SeriesPoint { w, wp, truncation })
}

fn wp_from_coefficients(a: &[f64], x: f64) -> f64 {
    let mut wp = 0.0;
    for n in (1..a.len()).rev() {
        wp = wp * x + n as f64 * a[n];
    }
    wp
}

/// Coefficients `c_m` of `W = sum c_m (eta - 1)^m` about the light cone.
///
/// In `d = 5` the slope `c` is free and `W(1)` must be a zero of
/// `W (1 - W^2)`; otherwise the slope is fixed by `W(1)` and `c` is ignored.
pub fn lightcone_coefficients(ode: &SimilarityOde, w1: f64, c: f64, order: usize) -> Result<Vec<f64>, SelfSimilarError> {
    let d = ode.d.get();
    let df = ode.d.as_f64();
    let mut k = vec![0.0; order + 1];
    k[0] = w1;
    if d == 5 {
        let f = w1 * (1.0 - w1 * w1);
        if f.abs() > 1e-12 {
            return Err(SelfSimilarError::ConstraintViolation(w1));
        }
        if order >= 1 {
            k[1] = c;
        }
    } else if order >= 1 {
        k[1] = -(df - 2.0) * w1 * (1.0 - w1 * w1) / (df - 5.0);
    }
    // eta^2 (1 - eta^2) = sum p_j x^j, (d-3) eta - 2 eta^3 = sum q_j x^j with x = eta - 1
    let p = [0.0, -2.0, -5.0, -4.0, -1.0];
    let q = [df - 5.0, df - 9.0, -6.0, -2.0];
    for m in 1..order {
        let lead = (m as f64 + 1.0) * (df - 5.0 - 2.0 * m as f64);
        if lead == 0.0 {
            return Err(SelfSimilarError::Resonance { d, order: m + 1 });
        }
        let mut rest = 0.0;
        for (j, &pj) in p.iter().enumerate().skip(1) {
            let idx = m as i64 - j as i64 + 2;
            if j == 1 || idx < 2 {
                continue;
            }
            let i = idx as usize;
            rest += pj * (i * (i - 1)) as f64 * k[i];
        }
        for (j, &qj) in q.iter().enumerate() {
            let idx = m as i64 - j as i64 + 1;
            if j == 0 || idx < 1 {
                continue;
            }
            let i = idx as usize;
            rest += qj * i as f64 * k[i];
        }
        rest += (df - 2.0) * (k[m] - cube_coefficient(&k[..=m], m));
        k[m + 1] = -rest / lead;
    }
    Ok(k)
}

/// `(W, W')` at `1 - eta1` from the light-cone series.
pub fn series_lightcone(ode: &SimilarityOde, w1: f64, c: f64, eta1: f64) -> Result<SeriesPoint, SelfSimilarError> {
    if !(eta1 > 0.0 && eta1 <= 1e-2) {
        return Err(SelfSimilarError::Offset(eta1));
    }
    let k = lightcone_coefficients(ode, w1, c, LIGHTCONE_ORDER)?;
    let x = -eta1;
    let mut w = 0.0;
    for &km in k.iter().rev() {
        w = w * x + km;
    }
    let wp = wp_from_coefficients(&k, x);
    let truncation = (k[LIGHTCONE_ORDER] * x.powi(LIGHTCONE_ORDER as i32)).abs();
    Ok(SeriesPoint { w, wp, truncation })
}

/// Integration stopped because `|W|` exceeded the blow-off bound.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Divergence {
    pub eta: f64,
}

// Dormand–Prince 5(4) tableau.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const D1: f64 = 35.0 / 384.0;
const D3: f64 = 500.0 / 1113.0;
const D4: f64 = 125.0 / 192.0;
const D5: f64 = -2187.0 / 6784.0;
const D6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Adaptive Dormand–Prince integration of `y' = f(x, y)` from `x0` to `x1`
/// (either direction). Returns `Ok(y(x1))` or the divergence point.
pub fn integrate<F>(f: F, x0: f64, y0: [f64; 2], x1: f64, tol: f64, blowoff: f64) -> Result<Result<[f64; 2], Divergence>, SelfSimilarError>
where
    F: Fn(f64, [f64; 2]) -> [f64; 2],
{
    let span = x1 - x0;
    if span == 0.0 {
        return Ok(Ok(y0));
    }
    let dir = span.signum();
    let mut h = dir * span.abs().min(1e-3);
    let mut x = x0;
    let mut y = y0;
    let mut k1 = f(x, y);
    let axpy = |y: [f64; 2], terms: &[(f64, [f64; 2])], h: f64| {
        let mut out = y;
        for (c, k) in terms {
            out[0] += h * c * k[0];
            out[1] += h * c * k[1];
        }
        out
    };
    for _ in 0..2_000_000 {
        if (x1 - x) * dir <= 0.0 {
            return Ok(Ok(y));
        }
        if (x + h - x1) * dir > 0.0 {
            h = x1 - x;
        }
        let k2 = f(x + h / 5.0, axpy(y, &[(A21, k1)], h));
        let k3 = f(x + 0.3 * h, axpy(y, &[(A31, k1), (A32, k2)], h));
        let k4 = f(x + 0.8 * h, axpy(y, &[(A41, k1), (A42, k2), (A43, k3)], h));
        let k5 = f(x + 8.0 / 9.0 * h, axpy(y, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)], h));
        let k6 = f(x + h, axpy(y, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)], h));
        let yn = axpy(y, &[(D1, k1), (D3, k3), (D4, k4), (D5, k5), (D6, k6)], h);
        let k7 = f(x + h, yn);
        let mut err: f64 = 0.0;
        for i in 0..2 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = tol * (1e-3 + y[i].abs().max(yn[i].abs()));
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() {
            h *= 0.2;
            if h.abs() < 1e-15 {
                return Err(SelfSimilarError::Integration(format!("step size underflow at {x}")));
            }
            continue;
        }
        if err <= 1.0 {
            x += h;
            y = yn;
            k1 = k7;
            if y[0].abs() > blowoff {
                return Ok(Err(Divergence { eta: x }));
            }
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-15 {
            return Err(SelfSimilarError::Integration(format!("step size underflow at {x}")));
        }
    }
    Err(SelfSimilarError::Integration("step budget exceeded".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootSettings {
    pub eta0: f64,
    pub eta1: f64,
    pub tolerance: f64,
    pub matching_point: f64,
    pub blowoff: f64,
}

impl Default for ShootSettings {
    fn default() -> Self {
        ShootSettings { eta0: 1e-4, eta1: 1e-4, tolerance: 1e-12, matching_point: 0.5, blowoff: 1e3 }
    }
}

/// Outcome of one two-sided shot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shot {
    /// `(W_out - W_in, W'_out - W'_in)` at the matching point.
    Matched([f64; 2]),
    /// One branch blew off before reaching the matching point.
    Divergent { eta: f64, from_origin: bool },
}

impl Shot {
    pub fn defect_norm(&self) -> Option<f64> {
        match self {
            Shot::Matched(d) => Some(d[0].hypot(d[1])),
            Shot::Divergent { .. } => None,
        }
    }
}

/// The equation as a first-order system in `u = 1 - W`, which keeps full
/// relative precision near the origin where `W` is close to one.
fn field(ode: SimilarityOde) -> impl Fn(f64, [f64; 2]) -> [f64; 2] {
    let df = ode.d.as_f64();
    move |eta, y| {
        let [u, up] = y;
        let drag = (df - 3.0) / eta - 2.0 * eta;
        let upp = (-drag * up + (df - 2.0) / (eta * eta) * (1.0 - u) * u * (2.0 - u)) / (1.0 - eta * eta);
        [up, upp]
    }
}

/// `(1 - W, -W')` from the origin series without forming `W` first.
fn origin_state(a: &[f64], x: f64) -> [f64; 2] {
    let mut tail = a.to_vec();
    tail[0] = 0.0;
    let w = tail.iter().rev().fold(0.0, |acc, &v| acc * x + v);
    [-w, -wp_from_coefficients(a, x)]
}

fn lightcone_state(k: &[f64], x: f64) -> [f64; 2] {
    let w = k.iter().rev().fold(0.0, |acc, &v| acc * x + v);
    [1.0 - w, -wp_from_coefficients(k, x)]
}

fn to_w(y: [f64; 2]) -> [f64; 2] {
    [1.0 - y[0], -y[1]]
}

fn run_branch(ode: &SimilarityOde, x0: f64, y0: [f64; 2], x1: f64, s: &ShootSettings) -> Result<Result<[f64; 2], Divergence>, SelfSimilarError> {
    // |1 - u| > blowoff is implied by |u| > blowoff + 1
    Ok(integrate(field(*ode), x0, y0, x1, s.tolerance, s.blowoff + 1.0)?.map(to_w))
}

/// Branch from the origin evaluated at `eta`, as `(W, W')`.
pub fn shoot_out(ode: &SimilarityOde, b: f64, eta: f64, s: &ShootSettings) -> Result<Result<[f64; 2], Divergence>, SelfSimilarError> {
    if !(s.eta0 > 0.0 && s.eta0 <= 1e-2) {
        return Err(SelfSimilarError::Offset(s.eta0));
    }
    let a = origin_coefficients(ode, b, ORIGIN_ORDER);
    run_branch(ode, s.eta0, origin_state(&a, s.eta0), eta, s)
}

/// Branch from the light cone evaluated at `eta`, as `(W, W')`.
pub fn shoot_in(ode: &SimilarityOde, w1: f64, c: f64, eta: f64, s: &ShootSettings) -> Result<Result<[f64; 2], Divergence>, SelfSimilarError> {
    if !(s.eta1 > 0.0 && s.eta1 <= 1e-2) {
        return Err(SelfSimilarError::Offset(s.eta1));
    }
    let k = lightcone_coefficients(ode, w1, c, LIGHTCONE_ORDER)?;
    run_branch(ode, 1.0 - s.eta1, lightcone_state(&k, -s.eta1), eta, s)
}

/// Matching defect at `settings.matching_point` for parameters `(b, c, W(1))`.
pub fn shoot(ode: &SimilarityOde, b: f64, c: f64, w1: f64, settings: &ShootSettings) -> Result<Shot, SelfSimilarError> {
    let m = settings.matching_point;
    let outer = match shoot_out(ode, b, m, settings)? {
        Ok(y) => y,
        Err(div) => return Ok(Shot::Divergent { eta: div.eta, from_origin: true }),
    };
    let inner = match shoot_in(ode, w1, c, m, settings)? {
        Ok(y) => y,
        Err(div) => return Ok(Shot::Divergent { eta: div.eta, from_origin: false }),
    };
    Ok(Shot::Matched([outer[0] - inner[0], outer[1] - inner[1]]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    /// Search interval `[b_lo, b_hi)` for the origin parameter.
    pub b_lo: f64,
    pub b_hi: f64,
    /// Number of log-spaced outward shots.
    pub b_samples: usize,
    /// Inward-shot parameter range (slope `c` in `d = 5`, `W(1)` otherwise).
    pub inner_lo: f64,
    pub inner_hi: f64,
    pub inner_samples: usize,
    pub shoot: ShootSettings,
    /// Certification bound on the matching defect.
    pub certify: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings {
            b_lo: -200.0,
            b_hi: -0.05,
            b_samples: 600,
            inner_lo: -40.0,
            inner_hi: 40.0,
            inner_samples: 600,
            shoot: ShootSettings::default(),
            certify: 1e-9,
        }
    }
}

impl SearchSettings {
    pub fn with_range(b_lo: f64, b_hi: f64) -> Self {
        SearchSettings { b_lo, b_hi, ..Default::default() }
    }

    fn validate(&self) -> Result<(), SelfSimilarError> {
        if !(self.b_lo < self.b_hi && self.b_hi < 0.0) {
            return Err(SelfSimilarError::Settings("need b_lo < b_hi < 0".into()));
        }
        if self.b_samples < 4 || self.inner_samples < 4 || !(self.inner_lo < self.inner_hi) {
            return Err(SelfSimilarError::Settings("grids too small or empty".into()));
        }
        let m = self.shoot.matching_point;
        if !(m > self.shoot.eta0 && m < 1.0 - self.shoot.eta1) {
            return Err(SelfSimilarError::Settings("matching point outside the shooting interval".into()));
        }
        Ok(())
    }
}

/// A certified regular solution on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelfSimilarProfile {
    pub b: f64,
    pub c: f64,
    pub w1: f64,
    /// Dense table `(eta, W, W')` on `[0, 1]`.
    pub samples: ProfileTable,
    /// Largest matching defect over the working and tightened tolerances.
    pub residual: f64,
}

impl SelfSimilarProfile {
    pub fn profile(&self) -> Profile {
        Profile::Numeric(self.samples.clone())
    }

    /// Builds the profile for known parameters without searching.
    pub fn from_parameters(ode: &SimilarityOde, b: f64, c: f64, w1: f64, settings: &ShootSettings) -> Result<Self, SelfSimilarError> {
        let samples = dense_table(ode, b, c, w1, settings, 2000)?;
        let residual = certification_defect(ode, b, c, w1, settings)?;
        Ok(SelfSimilarProfile { b, c, w1, samples, residual })
    }
}

fn certification_defect(ode: &SimilarityOde, b: f64, c: f64, w1: f64, s: &ShootSettings) -> Result<f64, SelfSimilarError> {
    let tight = ShootSettings { tolerance: s.tolerance * 0.1, ..s.clone() };
    let mut worst: f64 = 0.0;
    for set in [s, &tight] {
        match shoot(ode, b, c, w1, set)?.defect_norm() {
            Some(n) => worst = worst.max(n),
            None => return Ok(f64::INFINITY),
        }
    }
    Ok(worst)
}

/// `(eta, W, W')` on `eta = k / n`, series near the endpoints and integration in between.
fn dense_table(ode: &SimilarityOde, b: f64, c: f64, w1: f64, s: &ShootSettings, n: usize) -> Result<ProfileTable, SelfSimilarError> {
    let a = origin_coefficients(ode, b, ORIGIN_ORDER);
    let k = lightcone_coefficients(ode, w1, c, LIGHTCONE_ORDER)?;
    let m = s.matching_point;
    let (mut eta, mut w, mut wp) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
    let series_reach = 1e-3;
    let f = field(*ode);
    let mut x0 = series_reach;
    let mut y0 = origin_state(&a, series_reach);
    for i in 0..=n {
        let e = i as f64 / n as f64;
        if e > m {
            break;
        }
        let y = if e <= series_reach {
            origin_state(&a, e)
        } else {
            let y = integrate(&f, x0, y0, e, s.tolerance, f64::INFINITY)?
                .map_err(|d| SelfSimilarError::Integration(format!("outward branch diverged at {}", d.eta)))?;
            x0 = e;
            y0 = y;
            y
        };
        let [a0, a1] = to_w(y);
        eta.push(e);
        w.push(a0);
        wp.push(a1);
    }
    let mut upper: Vec<(f64, [f64; 2])> = Vec::new();
    let mut x0 = 1.0 - series_reach;
    let mut y0 = lightcone_state(&k, -series_reach);
    for i in (0..=n).rev() {
        let e = i as f64 / n as f64;
        if e <= m {
            break;
        }
        let y = if e >= 1.0 - series_reach {
            lightcone_state(&k, e - 1.0)
        } else {
            let y = integrate(&f, x0, y0, e, s.tolerance, f64::INFINITY)?
                .map_err(|d| SelfSimilarError::Integration(format!("inward branch diverged at {}", d.eta)))?;
            x0 = e;
            y0 = y;
            y
        };
        upper.push((e, to_w(y)));
    }
    upper.reverse();
    for (e, y) in upper {
        eta.push(e);
        w.push(y[0]);
        wp.push(y[1]);
    }
    Ok(ProfileTable::new(eta, w, wp)?)
}

/// Segment intersection of `p0 p1` and `q0 q1`; returns the parameters along each.
fn segment_intersection(p0: [f64; 2], p1: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> Option<(f64, f64)> {
    let r = [p1[0] - p0[0], p1[1] - p0[1]];
    let s = [q1[0] - q0[0], q1[1] - q0[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den == 0.0 {
        return None;
    }
    let qp = [q0[0] - p0[0], q0[1] - p0[1]];
    let t = (qp[0] * s[1] - qp[1] * s[0]) / den;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some((t, u))
}

/// Light-cone data `(W(1), slope parameter)` for the inner parameter `s`.
fn inner_data(d: Dimension, branch: f64, s: f64) -> (f64, f64) {
    if d.get() == 5 {
        (branch, s)
    } else {
        (s, 0.0)
    }
}

/// Two-dimensional Newton iteration on the matching defect.
fn newton(ode: &SimilarityOde, d: Dimension, branch: f64, start: (f64, f64), s: &ShootSettings) -> Result<Option<(f64, f64)>, SelfSimilarError> {
    let defect = |b: f64, p: f64| -> Result<Option<[f64; 2]>, SelfSimilarError> {
        let (w1, c) = inner_data(d, branch, p);
        Ok(match shoot(ode, b, c, w1, s)? {
            Shot::Matched(v) => Some(v),
            Shot::Divergent { .. } => None,
        })
    };
    let (mut b, mut p) = start;
    let Some(mut f) = defect(b, p)? else { return Ok(None) };
    for _ in 0..60 {
        let norm = f[0].hypot(f[1]);
        if norm < 1e-12 {
            return Ok(Some((b, p)));
        }
        let hb = 1e-7 * b.abs().max(1.0);
        let hp = 1e-7 * p.abs().max(1.0);
        let (Some(fb), Some(fp)) = (defect(b + hb, p)?, defect(b, p + hp)?) else { return Ok(None) };
        let j = [[(fb[0] - f[0]) / hb, (fp[0] - f[0]) / hp], [(fb[1] - f[1]) / hb, (fp[1] - f[1]) / hp]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        if det == 0.0 || !det.is_finite() {
            return Ok(None);
        }
        let db = -(j[1][1] * f[0] - j[0][1] * f[1]) / det;
        let dp = -(-j[1][0] * f[0] + j[0][0] * f[1]) / det;
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (nb, np) = (b + lambda * db, p + lambda * dp);
            if nb < 0.0 {
                if let Some(nf) = defect(nb, np)? {
                    if nf[0].hypot(nf[1]) < norm {
                        b = nb;
                        p = np;
                        f = nf;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            let fine = f[0].hypot(f[1]) < 1e-10;
            return Ok(fine.then_some((b, p)));
        }
    }
    Ok((f[0].hypot(f[1]) < 1e-10).then_some((b, p)))
}

/// Regular solutions with `b` in `[b_lo, b_hi)`, ordered by `|b|`.
///
/// Outward shots over a log-spaced `b` grid and inward shots over the light-cone
/// parameter trace two curves in the `(W, W')` plane at the matching point;
/// their crossings seed a Newton iteration on the defect. Roots are certified
/// by re-shooting at a ten times tighter tolerance.
pub fn find_profiles(ode: &SimilarityOde, settings: &SearchSettings) -> Result<Vec<SelfSimilarProfile>, SelfSimilarError> {
    settings.validate()?;
    let d = ode.d;
    let s = &settings.shoot;
    let m = s.matching_point;
    let (lo, hi) = ((-settings.b_hi).ln(), (-settings.b_lo).ln());
    let outward: Vec<(f64, Option<[f64; 2]>)> = (0..settings.b_samples)
        .map(|i| {
            let b = -(lo + (hi - lo) * i as f64 / (settings.b_samples - 1) as f64).exp();
            shoot_out(ode, b, m, s).map(|r| (b, r.ok()))
        })
        .collect::<Result<_, _>>()?;
    let branches: Vec<f64> = if d.get() == 5 { vec![0.0, 1.0, -1.0] } else { vec![f64::NAN] };
    let mut found: Vec<SelfSimilarProfile> = Vec::new();
    for &branch in &branches {
        // sinh spacing concentrates samples near zero slope
        let (ulo, uhi) = (settings.inner_lo.asinh(), settings.inner_hi.asinh());
        let inward: Vec<(f64, Option<[f64; 2]>)> = (0..settings.inner_samples)
            .map(|i| {
                let p = (ulo + (uhi - ulo) * i as f64 / (settings.inner_samples - 1) as f64).sinh();
                let (w1, c) = inner_data(d, branch, p);
                shoot_in(ode, w1, c, m, s).map(|r| (p, r.ok()))
            })
            .collect::<Result<_, _>>()?;
        let mut seeds = Vec::new();
        for po in outward.windows(2) {
            let (Some(a0), Some(a1)) = (po[0].1, po[1].1) else { continue };
            for pi in inward.windows(2) {
                let (Some(q0), Some(q1)) = (pi[0].1, pi[1].1) else { continue };
                if let Some((t, u)) = segment_intersection(a0, a1, q0, q1) {
                    let b = po[0].0 + t * (po[1].0 - po[0].0);
                    let p = pi[0].0 + u * (pi[1].0 - pi[0].0);
                    seeds.push((b, p));
                }
            }
        }
        for seed in seeds {
            let Some((b, p)) = newton(ode, d, branch, seed, s)? else { continue };
            if !(b >= settings.b_lo && b < settings.b_hi) {
                continue;
            }
            let (w1, c) = inner_data(d, branch, p);
            let duplicate = found
                .iter()
                .any(|f| (f.b - b).abs() <= 1e-6 * b.abs().max(1.0) && (f.w1 - w1).abs() < 1e-9);
            if duplicate {
                continue;
            }
            let residual = certification_defect(ode, b, c, w1, s)?;
            if residual >= settings.certify {
                continue;
            }
            let c_eff = if d.get() == 5 { c } else { lightcone_coefficients(ode, w1, c, 1)?[1] };
            let samples = dense_table(ode, b, c_eff, w1, s, 2000)?;
            found.push(SelfSimilarProfile { b, c: c_eff, w1, samples, residual });
        }
    }
    found.sort_by(|x, y| x.b.abs().total_cmp(&y.b.abs()));
    Ok(found)
}

/// The first excited profile `W_1` in `d = 5`, refined from the stored parameters.
pub fn excited_profile(settings: &ShootSettings) -> Result<SelfSimilarProfile, SelfSimilarError> {
    let ode = SimilarityOde::new(Dimension::SUPERCRITICAL);
    let (b, c) = newton(&ode, ode.d, 0.0, (B1, C1), settings)?
        .ok_or_else(|| SelfSimilarError::Integration("Newton iteration for W_1 did not converge".into()))?;
    SelfSimilarProfile::from_parameters(&ode, b, c, 0.0, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{profile_w0, profile_w0_prime};

    fn d5() -> SimilarityOde {
        SimilarityOde::new(Dimension::SUPERCRITICAL)
    }

    #[test]
    fn origin_series_of_ground_state() {
        let a = origin_coefficients(&d5(), B0, 6);
        assert!((a[4] - 0.96).abs() < 1e-14);
        let p = series_origin(&d5(), B0, 1e-3).unwrap();
        assert!((p.w - profile_w0(1e-3)).abs() < 1e-14);
        assert!((p.wp - profile_w0_prime(1e-3)).abs() < 1e-13);
    }

    #[test]
    fn origin_series_vacuum() {
        let a = origin_coefficients(&d5(), 0.0, 12);
        assert_eq!(a[0], 1.0);
        assert!(a[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn origin_slope_ratio() {
        let b = -3.0;
        let p = series_origin(&d5(), b, 1e-5).unwrap();
        assert!((p.wp / 1e-5 - 2.0 * b).abs() < 1e-8);
    }

    #[test]
    fn lightcone_series_of_ground_state() {
        let p = series_lightcone(&d5(), 0.0, C0, 1e-3).unwrap();
        let eta = 1.0 - 1e-3;
        assert!((p.w - profile_w0(eta)).abs() < 1e-14);
        assert!((p.wp - profile_w0_prime(eta)).abs() < 1e-13);
    }

    #[test]
    fn lightcone_series_trivial_branches() {
        let one = series_lightcone(&d5(), 1.0, 0.0, 1e-2).unwrap();
        assert_eq!((one.w, one.wp), (1.0, 0.0));
        let zero = series_lightcone(&d5(), 0.0, 0.0, 1e-2).unwrap();
        assert_eq!((zero.w, zero.wp), (0.0, 0.0));
        assert_eq!(
            series_lightcone(&d5(), 0.5, 0.0, 1e-3),
            Err(SelfSimilarError::ConstraintViolation(0.5))
        );
    }

    #[test]
    fn resonant_dimension_is_rejected() {
        let ode = SimilarityOde::new(Dimension::new(7).unwrap());
        assert!(matches!(
            lightcone_coefficients(&ode, 0.3, 0.0, 6),
            Err(SelfSimilarError::Resonance { order: 2, .. })
        ));
    }

    #[test]
    fn offsets_are_checked() {
        assert!(series_origin(&d5(), B0, 0.1).is_err());
        assert!(series_lightcone(&d5(), 0.0, C0, 0.0).is_err());
    }

    #[test]
    fn integrator_solves_harmonic_oscillator() {
        let y = integrate(|_, y| [y[1], -y[0]], 0.0, [0.0, 1.0], 3.0, 1e-12, 1e3).unwrap().unwrap();
        assert!((y[0] - 3f64.sin()).abs() < 1e-10);
        let back = integrate(|_, y| [y[1], -y[0]], 3.0, y, 0.0, 1e-12, 1e3).unwrap().unwrap();
        assert!(back[0].abs() < 1e-10 && (back[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn integrator_reports_blowoff() {
        let r = integrate(|_, y| [y[0] * y[0], 0.0], 0.0, [1.0, 0.0], 2.0, 1e-10, 1e3).unwrap();
        let div = r.unwrap_err();
        assert!(div.eta < 1.0 && div.eta > 0.99);
    }

    #[test]
    fn ground_state_shot_matches() {
        let shot = shoot(&d5(), B0, C0, 0.0, &ShootSettings::default()).unwrap();
        assert!(shot.defect_norm().unwrap() < 1e-9, "{shot:?}");
        let vac = shoot(&d5(), 0.0, 0.0, 1.0, &ShootSettings::default()).unwrap();
        assert_eq!(vac.defect_norm(), Some(0.0));
    }

    #[test]
    fn segments() {
        let hit = segment_intersection([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]).unwrap();
        assert!((hit.0 - 0.5).abs() < 1e-15 && (hit.1 - 0.5).abs() < 1e-15);
        assert!(segment_intersection([0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]).is_none());
    }
}
