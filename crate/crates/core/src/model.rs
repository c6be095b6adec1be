//! Pure-math core: the reduced radial Yang-Mills equation, its closed-form
//! blowup profiles and the energy functionals used by the diagnostics.
//!
//! Everything is dimensionless with the gauge coupling set to one. The
//! spatial dimension enters only through [`Dimension`], from which every
//! coefficient is derived on demand.
//!
//! The energy density for general `d` carries a `(d-2)/2` factor on the
//! quartic term. For `d = 5` this is the familiar `3/2`; for other
//! dimensions it is inferred from the integrand of the light-cone energy
//! and is not an independently quoted formula.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension {0} is not supported (need d >= 4)")]
    InvalidDimension(u32),
    #[error("expression is singular at r = 0; use the regular center limit")]
    OriginSingular,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Number of spatial dimensions of the underlying Minkowski space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Dimension(u32);

impl Dimension {
    /// The energy-critical dimension.
    pub const CRITICAL: Dimension = Dimension(4);
    /// The lowest supercritical dimension.
    pub const SUPERCRITICAL: Dimension = Dimension(5);

    pub fn new(d: u32) -> Result<Self, ModelError> {
        if d < 4 {
            return Err(ModelError::InvalidDimension(d));
        }
        Ok(Dimension(d))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// Coefficient of `w_r / r` in the radial Laplacian, `d - 3`.
    pub fn friction(self) -> f64 {
        self.as_f64() - 3.0
    }

    /// Coefficient of `w (1 - w^2) / r^2`, `d - 2`.
    pub fn coupling(self) -> f64 {
        self.as_f64() - 2.0
    }

    /// Angular prefactor `c(d) = (d - 1) vol(S^{d-1})` of the reduced energy.
    pub fn energy_prefactor(self) -> f64 {
        (self.as_f64() - 1.0) * sphere_volume(self.0 - 1)
    }

    /// Second derivative at the origin of the blowup profile associated with
    /// this dimension: the self-similar `W_0` for `d = 5` and the instanton
    /// `W_S` otherwise.
    pub fn blowup_profile(self) -> Profile {
        if self.0 == 5 {
            Profile::W0
        } else {
            Profile::Instanton
        }
    }
}

impl TryFrom<u32> for Dimension {
    type Error = ModelError;
    fn try_from(d: u32) -> Result<Self, Self::Error> {
        Dimension::new(d)
    }
}

impl From<Dimension> for u32 {
    fn from(d: Dimension) -> u32 {
        d.0
    }
}

impl std::fmt::Display for Dimension {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Surface volume of the unit sphere `S^n` embedded in `R^{n+1}`.
pub fn sphere_volume(n: u32) -> f64 {
    // vol(S^n) = 2 pi / (n - 1) * vol(S^{n-2})
    let (mut vol, mut k) = if n % 2 == 0 { (2.0, 0) } else { (2.0 * PI, 1) };
    while k < n {
        k += 2;
        vol *= 2.0 * PI / (k as f64 - 1.0);
    }
    vol
}

/// `c(d)` as a free function.
pub fn cd_coefficient(d: Dimension) -> f64 {
    d.energy_prefactor()
}

/// Right-hand side of `w_tt = w_rr + (d-3)/r w_r + (d-2)/r^2 w (1 - w^2)`.
pub fn pde_rhs(w_rr: f64, w_r: f64, w: f64, r: f64, d: Dimension) -> Result<f64, ModelError> {
    if r <= 0.0 {
        return Err(ModelError::OriginSingular);
    }
    Ok(w_rr + d.friction() / r * w_r + d.coupling() / (r * r) * w * (1.0 - w * w))
}

/// `W_0(eta) = (1 - eta^2) / (1 + 3/5 eta^2)`, the stable self-similar profile in d = 5.
pub fn profile_w0(eta: f64) -> f64 {
    let e2 = eta * eta;
    (1.0 - e2) / (1.0 + 0.6 * e2)
}

pub fn profile_w0_prime(eta: f64) -> f64 {
    let q = 1.0 + 0.6 * eta * eta;
    -3.2 * eta / (q * q)
}

pub fn profile_w0_second(eta: f64) -> f64 {
    let e2 = eta * eta;
    let q = 1.0 + 0.6 * e2;
    -3.2 * (1.0 - 1.8 * e2) / (q * q * q)
}

/// `W_S(eta) = (1 - eta^2) / (1 + eta^2)`, the static instanton profile in d = 4.
pub fn profile_ws(eta: f64) -> f64 {
    let e2 = eta * eta;
    (1.0 - e2) / (1.0 + e2)
}

pub fn profile_ws_prime(eta: f64) -> f64 {
    let q = 1.0 + eta * eta;
    -4.0 * eta / (q * q)
}

pub fn profile_ws_second(eta: f64) -> f64 {
    let e2 = eta * eta;
    let q = 1.0 + e2;
    -4.0 * (1.0 - 3.0 * e2) / (q * q * q)
}

/// Tabulated profile `(eta, W, W')` evaluated by cubic Hermite interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub eta: Vec<f64>,
    pub w: Vec<f64>,
    pub wp: Vec<f64>,
}

impl ProfileTable {
    pub fn new(eta: Vec<f64>, w: Vec<f64>, wp: Vec<f64>) -> Result<Self, ModelError> {
        if eta.len() != w.len() || eta.len() != wp.len() {
            return Err(ModelError::InvalidArgument("table columns differ in length".into()));
        }
        if eta.len() < 2 {
            return Err(ModelError::InsufficientData("a table needs at least two samples".into()));
        }
        if eta.windows(2).any(|p| p[1] <= p[0]) {
            return Err(ModelError::InvalidArgument("table abscissae must increase strictly".into()));
        }
        Ok(ProfileTable { eta, w, wp })
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.eta[0], self.eta[self.eta.len() - 1])
    }

    /// Value and first derivative; abscissae outside the table are clamped.
    pub fn eval(&self, eta: f64) -> (f64, f64) {
        let n = self.eta.len();
        let i = match self.eta.partition_point(|&e| e <= eta) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let (x0, x1) = (self.eta[i], self.eta[i + 1]);
        let h = x1 - x0;
        let s = ((eta - x0) / h).clamp(0.0, 1.0);
        let (y0, y1) = (self.w[i], self.w[i + 1]);
        let (m0, m1) = (self.wp[i] * h, self.wp[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        let slope = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        (value, slope)
    }
}

/// A blowup profile `W(eta)`; closed forms evaluate pointwise, numeric ones
/// interpolate a table.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// Stable self-similar solution in d = 5.
    W0,
    /// Static instanton in d = 4.
    Instanton,
    Numeric(ProfileTable),
}

impl Profile {
    pub fn value(&self, eta: f64) -> f64 {
        match self {
            Profile::W0 => profile_w0(eta),
            Profile::Instanton => profile_ws(eta),
            Profile::Numeric(t) => t.eval(eta).0,
        }
    }

    pub fn derivative(&self, eta: f64) -> f64 {
        match self {
            Profile::W0 => profile_w0_prime(eta),
            Profile::Instanton => profile_ws_prime(eta),
            Profile::Numeric(t) => t.eval(eta).1,
        }
    }

    /// `W''(0)`; for tables, from the even interpolant through the first four samples.
    pub fn curvature_at_origin(&self) -> Result<f64, ModelError> {
        match self {
            Profile::W0 => Ok(-16.0 / 5.0),
            Profile::Instanton => Ok(-4.0),
            Profile::Numeric(t) => table_curvature_at_origin(t),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::W0 => "W0",
            Profile::Instanton => "WS",
            Profile::Numeric(_) => "numeric",
        }
    }
}

pub fn profile_curvature_at_origin(kind: &Profile) -> Result<f64, ModelError> {
    kind.curvature_at_origin()
}

fn table_curvature_at_origin(t: &ProfileTable) -> Result<f64, ModelError> {
    if t.len() < 4 {
        return Err(ModelError::InsufficientData(format!(
            "{} samples near the origin, need 4",
            t.len()
        )));
    }
    // Interpolate W as a cubic polynomial in s = eta^2; W''(0) = 2 dW/ds at s = 0.
    let s: Vec<f64> = t.eta[..4].iter().map(|e| e * e).collect();
    let y = &t.w[..4];
    // Newton divided differences, then differentiate at s = 0.
    let mut coef = y.to_vec();
    for j in 1..4 {
        for i in (j..4).rev() {
            coef[i] = (coef[i] - coef[i - 1]) / (s[i] - s[i - j]);
        }
    }
    // p(s) = c0 + c1 (s-s0) + c2 (s-s0)(s-s1) + c3 (s-s0)(s-s1)(s-s2)
    let d1 = coef[1] + coef[2] * (-s[0] - s[1])
        + coef[3] * (s[0] * s[1] + s[0] * s[2] + s[1] * s[2]);
    Ok(2.0 * d1)
}

/// One radial sample of the field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialPoint {
    pub r: f64,
    pub w: f64,
    pub wt: f64,
    pub wr: f64,
}

impl RadialPoint {
    pub fn vacuum(r: f64) -> Self {
        RadialPoint { r, w: 1.0, wt: 0.0, wr: 0.0 }
    }
}

/// The pair `(w, w_t)` (with `w_r`) sampled on a sorted radial grid at one time.
///
/// Grids are piecewise uniform in practice (a composite of refinement
/// levels), but nothing here assumes uniform spacing beyond the first three
/// samples used for the center curvature.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub time: f64,
    pub points: Vec<RadialPoint>,
}

impl FieldState {
    pub fn new(time: f64, points: Vec<RadialPoint>) -> Result<Self, ModelError> {
        if points.windows(2).any(|p| p[1].r <= p[0].r) {
            return Err(ModelError::InvalidArgument("radii must increase strictly".into()));
        }
        if points.first().is_some_and(|p| p.r < 0.0) {
            return Err(ModelError::InvalidArgument("negative radius".into()));
        }
        Ok(FieldState { time, points })
    }

    /// Samples `f(r) -> (w, w_t, w_r)` on the given radii.
    pub fn from_fn(time: f64, radii: &[f64], f: impl Fn(f64) -> (f64, f64, f64)) -> Result<Self, ModelError> {
        let points = radii
            .iter()
            .map(|&r| {
                let (w, wt, wr) = f(r);
                RadialPoint { r, w, wt, wr }
            })
            .collect();
        FieldState::new(time, points)
    }

    pub fn outer_radius(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.r)
    }

    /// `w_rr(t, 0)` from the fourth-order even-parity stencil on the first
    /// three (uniformly spaced) samples.
    pub fn center_curvature(&self) -> Result<f64, ModelError> {
        let p = &self.points;
        if p.len() < 3 || p[0].r != 0.0 {
            return Err(ModelError::InsufficientData("need samples at r = 0, h, 2h".into()));
        }
        let h = p[1].r;
        if ((p[2].r - 2.0 * h) / h).abs() > 1e-9 {
            return Err(ModelError::InsufficientData("first samples are not uniformly spaced".into()));
        }
        // w(-r) = w(r): (-w2 + 16 w1 - 30 w0 + 16 w1 - w2) / (12 h^2)
        Ok((-2.0 * p[2].w + 32.0 * p[1].w - 30.0 * p[0].w) / (12.0 * h * h))
    }

    /// Interpolated `w` at radius `r` (four-point Lagrange on the local nodes,
    /// mirrored through the origin).
    pub fn w_at(&self, r: f64) -> Option<f64> {
        let p = &self.points;
        if p.len() < 4 || r < 0.0 || r > self.outer_radius() {
            return None;
        }
        let k = p.partition_point(|q| q.r <= r).clamp(1, p.len() - 1) - 1;
        let mut nodes = [(0.0, 0.0); 4];
        for (slot, off) in nodes.iter_mut().zip(-1i64..=2) {
            let j = k as i64 + off;
            *slot = if j < 0 {
                let q = p[(-j) as usize];
                if p[0].r == 0.0 {
                    (-q.r, q.w)
                } else {
                    (p[(j + 4) as usize].r, p[(j + 4) as usize].w)
                }
            } else if j as usize >= p.len() {
                let q = p[(j - 4) as usize];
                (q.r, q.w)
            } else {
                let q = p[j as usize];
                (q.r, q.w)
            };
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        Some(lagrange(&nodes, r))
    }
}

fn lagrange(nodes: &[(f64, f64)], x: f64) -> f64 {
    let mut sum = 0.0;
    for (i, &(xi, yi)) in nodes.iter().enumerate() {
        let mut l = 1.0;
        for (j, &(xj, _)) in nodes.iter().enumerate() {
            if i != j {
                l *= (x - xj) / (xi - xj);
            }
        }
        sum += l * yi;
    }
    sum
}

/// Energy density `w_t^2/r^2 + w_r^2/r^2 + (d-2)/2 (1-w^2)^2/r^4`.
pub fn energy_density(w: f64, wt: f64, wr: f64, r: f64, d: Dimension) -> Result<f64, ModelError> {
    if r <= 0.0 {
        return Err(ModelError::OriginSingular);
    }
    let r2 = r * r;
    let q = 1.0 - w * w;
    Ok((wt * wt + wr * wr) / r2 + 0.5 * d.coupling() * q * q / (r2 * r2))
}

/// Regular limit of the energy density at the center, `(d/2) w_rr(0)^2`.
pub fn energy_density_at_origin(w_rr0: f64, d: Dimension) -> f64 {
    0.5 * d.as_f64() * w_rr0 * w_rr0
}

/// Radial energy integrand split into kinetic and static parts, without `c(d)`.
fn integrand(p: &RadialPoint, d: Dimension) -> (f64, f64) {
    if p.r == 0.0 {
        return (0.0, 0.0);
    }
    let weight = p.r.powi(d.get() as i32 - 3);
    let q = 1.0 - p.w * p.w;
    let kinetic = p.wt * p.wt * weight;
    let static_part = (p.wr * p.wr + 0.5 * d.coupling() * q * q / (p.r * p.r)) * weight;
    (kinetic, static_part)
}

/// Kinetic and static contributions to an energy integral.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub kinetic: f64,
    pub potential: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.kinetic + self.potential
    }
}

/// Trapezoidal energy inside `[0, radius]` (linearly interpolating the
/// integrand over the last partial cell).
fn energy_within(state: &FieldState, radius: f64, d: Dimension) -> EnergyParts {
    let c = d.energy_prefactor();
    let mut acc = EnergyParts::default();
    let p = &state.points;
    for pair in p.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.r >= radius {
            break;
        }
        let (ka, sa) = integrand(a, d);
        let (kb, sb) = integrand(b, d);
        if b.r <= radius {
            let h = b.r - a.r;
            acc.kinetic += 0.5 * h * (ka + kb);
            acc.potential += 0.5 * h * (sa + sb);
        } else {
            let h = radius - a.r;
            let s = h / (b.r - a.r);
            let kr = ka + s * (kb - ka);
            let sr = sa + s * (sb - sa);
            acc.kinetic += 0.5 * h * (ka + kr);
            acc.potential += 0.5 * h * (sa + sr);
        }
    }
    EnergyParts { kinetic: c * acc.kinetic, potential: c * acc.potential }
}

/// Energy inside the past light cone `r <= T - t` of a singularity at time `T`.
pub fn lightcone_energy_parts(state: &FieldState, blowup_time: f64, d: Dimension) -> Result<EnergyParts, ModelError> {
    let radius = blowup_time - state.time;
    if radius <= 0.0 {
        return Err(ModelError::InvalidArgument(format!(
            "blowup time {blowup_time} is not after the state time {}",
            state.time
        )));
    }
    if radius > state.outer_radius() {
        return Err(ModelError::InvalidArgument(format!(
            "light-cone radius {radius} exceeds the grid ({})",
            state.outer_radius()
        )));
    }
    Ok(energy_within(state, radius, d))
}

pub fn lightcone_energy(state: &FieldState, blowup_time: f64, d: Dimension) -> Result<f64, ModelError> {
    lightcone_energy_parts(state, blowup_time, d).map(|e| e.total())
}

/// Energy on the whole grid.
pub fn total_energy(state: &FieldState, d: Dimension) -> f64 {
    energy_within(state, f64::INFINITY, d).total()
}

/// Cumulative energy `E(r_i)` at every sample of `state`.
pub fn cumulative_energy(state: &FieldState, d: Dimension) -> Vec<EnergyParts> {
    let c = d.energy_prefactor();
    let mut out = Vec::with_capacity(state.points.len());
    let mut acc = EnergyParts::default();
    out.push(acc);
    for pair in state.points.windows(2) {
        let (ka, sa) = integrand(&pair[0], d);
        let (kb, sb) = integrand(&pair[1], d);
        let h = pair[1].r - pair[0].r;
        acc.kinetic += 0.5 * c * h * (ka + kb);
        acc.potential += 0.5 * c * h * (sa + sb);
        out.push(acc);
    }
    out.truncate(state.points.len());
    out
}
