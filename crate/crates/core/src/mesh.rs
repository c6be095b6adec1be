//! One-dimensional Berger–Oliger mesh refinement on `[0, r_max]`.
//!
//! A hierarchy is a stack of single-patch levels; level `k` has spacing
//! `dr0 / 2^k` and advances with `dt0 / 2^k`. Level 0 always spans the whole
//! domain. Each finer level is one contiguous interval aligned with points of
//! its parent and nested inside it with a margin of `buffer_width` parent
//! cells, except that it may touch the origin.
//!
//! All evolved fields are assumed to be even in `r`, which is what the
//! interpolation stencils use next to the origin.
//!
//! Time is kept as an integer tick count (one tick is the step of the deepest
//! admissible level), so levels that should coincide in time do so exactly.

use thiserror::Error;

/// Number of evolved fields per grid point.
pub const NFIELDS: usize = 2;

pub type Fields = [Vec<f64>; NFIELDS];

/// Parent cells left inside a child's extent that the parent still evolves.
/// Covered parent points deeper than this are not updated (the child owns
/// them and restriction overwrites them after every parent step).
pub const FREEZE_MARGIN: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("child extent [{lo}, {hi}] is not contained in its parent")]
    NotContained { lo: usize, hi: usize },
    #[error("levels are not synchronized (child tick {child}, parent tick {parent})")]
    Unsynchronized { child: u64, parent: u64 },
    #[error("invalid mesh parameters: {0}")]
    InvalidParams(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeshParams {
    pub max_depth: usize,
    /// Flag a point when `|dr * d_r w|` exceeds this.
    pub refine_threshold: f64,
    /// Minimum number of cells across the blowup scale before refining.
    pub points_per_scale: f64,
    /// Padding around flagged cells and nesting margin, in parent cells.
    pub buffer_width: usize,
    /// A level regrids its child every this many of its own steps.
    pub regrid_interval: u64,
    /// The scale criterion flags `[0, scale_extent * lambda]`.
    pub scale_extent: f64,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams {
            max_depth: 26,
            refine_threshold: 0.02,
            points_per_scale: 64.0,
            buffer_width: 8,
            regrid_interval: 4,
            scale_extent: 8.0,
        }
    }
}

impl MeshParams {
    pub fn validate(&self) -> Result<(), MeshError> {
        if self.max_depth > 40 {
            return Err(MeshError::InvalidParams("max_depth must be at most 40".into()));
        }
        if !(self.refine_threshold > 0.0) {
            return Err(MeshError::InvalidParams("refine_threshold must be positive".into()));
        }
        if !(self.points_per_scale >= 4.0) {
            return Err(MeshError::InvalidParams("points_per_scale must be at least 4".into()));
        }
        if self.buffer_width < 4 {
            return Err(MeshError::InvalidParams("buffer_width must be at least 4".into()));
        }
        if self.regrid_interval == 0 {
            return Err(MeshError::InvalidParams("regrid_interval must be positive".into()));
        }
        if !(self.scale_extent >= 1.0) {
            return Err(MeshError::InvalidParams("scale_extent must be at least 1".into()));
        }
        Ok(())
    }
}

/// Inclusive range of point indices local to one level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
}

impl Interval {
    pub fn contains(&self, i: usize) -> bool {
        self.lo <= i && i <= self.hi
    }
}

#[derive(Clone, Debug)]
pub struct Level {
    pub depth: usize,
    pub dr: f64,
    /// Global index of the first point in units of this level's spacing.
    pub lo: usize,
    pub fields: Fields,
    /// Fields at the start of the most recent step.
    pub prev: Fields,
    pub tick: u64,
    pub prev_tick: u64,
    pub steps: u64,
}

impl Level {
    pub fn new(depth: usize, dr: f64, lo: usize, fields: Fields, tick: u64) -> Self {
        let prev = fields.clone();
        Level { depth, dr, lo, fields, prev, tick, prev_tick: tick, steps: 0 }
    }

    pub fn len(&self) -> usize {
        self.fields[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global index of the last point.
    pub fn hi(&self) -> usize {
        self.lo + self.len() - 1
    }

    pub fn r(&self, i: usize) -> f64 {
        (self.lo + i) as f64 * self.dr
    }

    pub fn r_lo(&self) -> f64 {
        self.r(0)
    }

    pub fn r_hi(&self) -> f64 {
        self.r(self.len() - 1)
    }

    pub fn touches_origin(&self) -> bool {
        self.lo == 0
    }

    pub fn save_prev(&mut self) {
        for (p, f) in self.prev.iter_mut().zip(&self.fields) {
            p.clone_from(f);
        }
        self.prev_tick = self.tick;
    }

    /// Linear time-interpolation weight of `tick` between `prev` and `fields`.
    pub fn time_weight(&self, tick: f64) -> f64 {
        if self.tick == self.prev_tick {
            1.0
        } else {
            (tick - self.prev_tick as f64) / (self.tick - self.prev_tick) as f64
        }
    }

    /// Value of `field` at local point `i`, interpolated to `tick`.
    pub fn value_at(&self, field: usize, i: usize, theta: f64) -> f64 {
        if theta == 1.0 {
            self.fields[field][i]
        } else {
            let a = self.prev[field][i];
            a + theta * (self.fields[field][i] - a)
        }
    }

    /// Value at global point `g`, reflecting through the origin.
    fn mirrored(&self, field: usize, g: i64, theta: f64) -> Option<f64> {
        let g = if g < 0 && self.lo == 0 { -g } else { g };
        if g < self.lo as i64 || g > self.hi() as i64 {
            return None;
        }
        Some(self.value_at(field, (g - self.lo as i64) as usize, theta))
    }

    /// Interpolates this level at global index `g` of the next finer level:
    /// exact copy at coincident points, 4-point (cubic) midpoint rule otherwise.
    pub fn sample_for_child(&self, g: usize, theta: f64) -> Option<[f64; NFIELDS]> {
        let mut out = [0.0; NFIELDS];
        if g % 2 == 0 {
            for (f, slot) in out.iter_mut().enumerate() {
                *slot = self.mirrored(f, (g / 2) as i64, theta)?;
            }
            return Some(out);
        }
        let left = (g / 2) as i64;
        for (f, slot) in out.iter_mut().enumerate() {
            let a = self.mirrored(f, left, theta)?;
            let b = self.mirrored(f, left + 1, theta)?;
            *slot = match (self.mirrored(f, left - 1, theta), self.mirrored(f, left + 2, theta)) {
                (Some(am), Some(bp)) => (9.0 * (a + b) - (am + bp)) / 16.0,
                (Some(am), None) => (-am + 6.0 * a + 3.0 * b) / 8.0,
                (None, Some(bp)) => (3.0 * a + 6.0 * b - bp) / 8.0,
                (None, None) => 0.5 * (a + b),
            };
        }
        Some(out)
    }
}

/// Points of `level` flagged for refinement, clustered into padded intervals.
///
/// A point is flagged when `indicator[i] > params.refine_threshold`, or when a
/// blowup scale `lambda` is resolved by fewer than `points_per_scale` cells of
/// this level and the point lies within `scale_extent * lambda` of the origin.
pub fn flag_cells(level: &Level, indicator: &[f64], scale: Option<f64>, params: &MeshParams) -> Vec<Interval> {
    let n = level.len();
    let mut flagged: Vec<bool> = indicator.iter().map(|&x| x > params.refine_threshold).collect();
    flagged.resize(n, false);
    if let Some(lambda) = scale {
        if lambda.is_finite() && lambda > 0.0 && lambda < params.points_per_scale * level.dr {
            let reach = params.scale_extent * lambda;
            for (i, f) in flagged.iter_mut().enumerate() {
                if level.r(i) <= reach {
                    *f = true;
                }
            }
        }
    }

    let pad = params.buffer_width;
    let mut out: Vec<Interval> = Vec::new();
    let mut i = 0;
    while i < n {
        if !flagged[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && flagged[i] {
            i += 1;
        }
        let iv = Interval { lo: start.saturating_sub(pad), hi: (i - 1 + pad).min(n - 1) };
        match out.last_mut() {
            Some(last) if iv.lo <= last.hi + 1 => last.hi = iv.hi,
            _ => out.push(iv),
        }
    }
    out
}

/// Child samples on global child indices `lo ..= lo + n - 1`, interpolated from `parent`.
pub fn prolong(parent: &Level, lo: usize, n: usize) -> Result<Fields, MeshError> {
    let hi = lo + n - 1;
    if lo / 2 < parent.lo || (hi + 1) / 2 > parent.hi() || n == 0 {
        return Err(MeshError::NotContained { lo, hi });
    }
    let mut out: Fields = std::array::from_fn(|_| Vec::with_capacity(n));
    for g in lo..=hi {
        let v = parent.sample_for_child(g, 1.0).ok_or(MeshError::NotContained { lo, hi })?;
        for (f, x) in out.iter_mut().zip(v) {
            f.push(x);
        }
    }
    Ok(out)
}

/// Injects child values into the coincident parent points.
pub fn restrict(child: &Level, parent: &mut Level) -> Result<(), MeshError> {
    if child.tick != parent.tick {
        return Err(MeshError::Unsynchronized { child: child.tick, parent: parent.tick });
    }
    let first = child.lo + child.lo % 2;
    for g in (first..=child.hi()).step_by(2) {
        let pg = g / 2;
        if pg < parent.lo || pg > parent.hi() {
            continue;
        }
        let (ci, pi) = (g - child.lo, pg - parent.lo);
        for f in 0..NFIELDS {
            parent.fields[f][pi] = child.fields[f][ci];
        }
    }
    Ok(())
}

/// Outcome of a driver callback.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Per-level physics plugged into the hierarchy.
pub trait LevelSolver {
    type Error: From<MeshError>;

    /// Advances `level` by one of its own steps. `parent` (absent on level 0)
    /// has already been advanced past the end of this step; its `prev`/`fields`
    /// bracket the step in time. Points in `frozen` must be left untouched.
    fn step(
        &mut self,
        level: &mut Level,
        parent: Option<&Level>,
        frozen: Option<Interval>,
        clock: &Clock,
    ) -> Result<(), Self::Error>;

    /// `|dr * d_r w|` (or any comparable indicator) at every point of `level`.
    fn refinement_indicator(&self, level: &Level) -> Vec<f64>;

    /// Current blowup scale estimate, if defined.
    fn scale_estimate(&self, hierarchy: &Hierarchy) -> Option<f64>;

    /// Called after every completed step of level `depth`, once all finer
    /// levels have caught up and been restricted.
    fn after_step(&mut self, hierarchy: &Hierarchy, depth: usize) -> Result<Flow, Self::Error>;
}

/// Tick arithmetic shared by all levels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Clock {
    pub dt0: f64,
    pub max_depth: usize,
}

impl Clock {
    pub fn ticks_per_step(&self, depth: usize) -> u64 {
        1u64 << (self.max_depth - depth)
    }

    pub fn tick_dt(&self) -> f64 {
        self.dt0 / (1u64 << self.max_depth) as f64
    }

    pub fn time(&self, tick: f64) -> f64 {
        tick * self.tick_dt()
    }

    pub fn dt(&self, depth: usize) -> f64 {
        self.dt0 / (1u64 << depth) as f64
    }
}

/// A composite view of one level at a common time.
#[derive(Clone, Debug)]
pub struct LevelView {
    pub depth: usize,
    pub dr: f64,
    pub lo: usize,
    pub fields: Fields,
    /// Local index ranges not covered by a finer level.
    pub owned: Vec<Interval>,
}

impl LevelView {
    pub fn r(&self, i: usize) -> f64 {
        (self.lo + i) as f64 * self.dr
    }
}

#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    pub params: MeshParams,
    pub clock: Clock,
}

impl Hierarchy {
    /// Single-level hierarchy on `[0, (n-1) dr0]`.
    pub fn new(base: Fields, dr0: f64, dt0: f64, params: MeshParams) -> Result<Self, MeshError> {
        params.validate()?;
        if base[0].len() < 2 * params.buffer_width + 8 || base.iter().any(|f| f.len() != base[0].len()) {
            return Err(MeshError::InvalidParams("base level too small or ragged".into()));
        }
        let clock = Clock { dt0, max_depth: params.max_depth };
        Ok(Hierarchy { levels: vec![Level::new(0, dr0, 0, base, 0)], params, clock })
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn finest(&self) -> &Level {
        self.levels.last().expect("hierarchy always has a base level")
    }

    /// Deepest level containing the origin.
    pub fn center_level(&self) -> &Level {
        self.levels.iter().rev().find(|l| l.touches_origin()).unwrap_or(&self.levels[0])
    }

    /// Time of the finest level, the most recent fully-advanced time.
    pub fn time(&self) -> f64 {
        self.clock.time(self.finest().tick as f64)
    }

    /// Local index range of `level` covered by `child`.
    pub fn covered(level: &Level, child: &Level) -> Interval {
        Interval { lo: child.lo / 2 - level.lo, hi: child.hi() / 2 - level.lo }
    }

    fn frozen_range(&self, depth: usize) -> Option<Interval> {
        let child = self.levels.get(depth + 1)?;
        let level = &self.levels[depth];
        let cov = Self::covered(level, child);
        let lo = if cov.lo == 0 && level.touches_origin() { 0 } else { cov.lo + FREEZE_MARGIN };
        let hi = cov.hi.checked_sub(FREEZE_MARGIN)?;
        (lo <= hi).then_some(Interval { lo, hi })
    }

    /// Builds the initial refinement by regridding every level once, coarse to fine.
    pub fn initial_regrid<S: LevelSolver>(&mut self, solver: &mut S) -> Result<(), S::Error> {
        let mut k = 0;
        while k < self.levels.len() && k < self.params.max_depth {
            self.regrid(k, solver)?;
            k += 1;
        }
        Ok(())
    }

    /// Advances the whole hierarchy by one coarse step.
    pub fn advance<S: LevelSolver>(&mut self, solver: &mut S) -> Result<Flow, S::Error> {
        self.advance_level(0, solver)
    }

    fn advance_level<S: LevelSolver>(&mut self, depth: usize, solver: &mut S) -> Result<Flow, S::Error> {
        let frozen = self.frozen_range(depth);
        {
            let (coarser, rest) = self.levels.split_at_mut(depth);
            let level = &mut rest[0];
            level.save_prev();
            solver.step(level, coarser.last(), frozen, &self.clock)?;
            level.tick += self.clock.ticks_per_step(depth);
            level.steps += 1;
        }
        if depth + 1 < self.levels.len() {
            for _ in 0..2 {
                if self.advance_level(depth + 1, solver)? == Flow::Stop {
                    return Ok(Flow::Stop);
                }
            }
            let (coarser, rest) = self.levels.split_at_mut(depth + 1);
            restrict(&rest[0], &mut coarser[depth])?;
        }
        if solver.after_step(self, depth)? == Flow::Stop {
            return Ok(Flow::Stop);
        }
        if self.levels[depth].steps % self.params.regrid_interval == 0 {
            self.regrid(depth, solver)?;
        }
        Ok(Flow::Continue)
    }

    /// Recomputes the extent of level `depth + 1` from flags on level `depth`.
    pub fn regrid<S: LevelSolver>(&mut self, depth: usize, solver: &mut S) -> Result<(), S::Error> {
        if depth >= self.params.max_depth {
            return Ok(());
        }
        let level = &self.levels[depth];
        let n = level.len();
        let pad = self.params.buffer_width;
        let indicator = solver.refinement_indicator(level);
        let scale = solver.scale_estimate(self);
        let flags = flag_cells(level, &indicator, scale, &self.params);

        let mut hull: Option<(usize, usize)> = flags.first().map(|f| (f.lo, flags.last().unwrap().hi));
        if let Some(grandchild) = self.levels.get(depth + 2) {
            let a = (grandchild.lo / 4).saturating_sub(level.lo).saturating_sub(pad);
            let b = (grandchild.hi() + 3) / 4 - level.lo + pad;
            hull = Some(match hull {
                Some((x, y)) => (x.min(a), y.max(b)),
                None => (a, b),
            });
        }
        let Some((mut a, mut b)) = hull else {
            self.levels.truncate(depth + 1);
            return Ok(());
        };

        let lower = if level.touches_origin() { 0 } else { pad };
        if level.touches_origin() && a <= pad {
            a = 0;
        }
        a = a.max(lower);
        b = b.min(n - 1 - pad);
        if b < a + 4 {
            // No room for a properly nested child.
            self.levels.truncate(depth + 1);
            return Ok(());
        }

        let child_lo = 2 * (level.lo + a);
        let child_n = 2 * (b - a) + 1;
        if let Some(old) = self.levels.get(depth + 1) {
            if old.lo == child_lo && old.len() == child_n {
                return Ok(());
            }
        }
        let mut fields = prolong(level, child_lo, child_n)?;
        if let Some(old) = self.levels.get(depth + 1) {
            let from = old.lo.max(child_lo);
            let to = old.hi().min(child_lo + child_n - 1);
            if from <= to {
                for (dst, src) in fields.iter_mut().zip(&old.fields) {
                    dst[from - child_lo..=to - child_lo].copy_from_slice(&src[from - old.lo..=to - old.lo]);
                }
            }
        }
        let tick = level.tick;
        let child = Level::new(depth + 1, level.dr * 0.5, child_lo, fields, tick);
        let mut old_steps = 0;
        if depth + 1 < self.levels.len() {
            old_steps = self.levels[depth + 1].steps;
            self.levels[depth + 1] = child;
        } else {
            self.levels.push(child);
        }
        self.levels[depth + 1].steps = old_steps;
        Ok(())
    }

    /// Every level interpolated in time to `tick`, with the ranges it owns in
    /// the composite grid. Levels at or behind `tick` are used as they are.
    pub fn views_at(&self, tick: u64) -> Vec<LevelView> {
        let mut views: Vec<LevelView> = Vec::with_capacity(self.levels.len());
        for (k, level) in self.levels.iter().enumerate() {
            let theta = if level.tick <= tick { 1.0 } else { level.time_weight(tick as f64) };
            let fields: Fields = std::array::from_fn(|f| {
                if theta == 1.0 {
                    level.fields[f].clone()
                } else {
                    level.prev[f]
                        .iter()
                        .zip(&level.fields[f])
                        .map(|(a, b)| a + theta * (b - a))
                        .collect()
                }
            });
            let n = level.len();
            let owned = match self.levels.get(k + 1) {
                None => vec![Interval { lo: 0, hi: n - 1 }],
                Some(child) => {
                    let cov = Self::covered(level, child);
                    let mut v = Vec::new();
                    if cov.lo > 0 {
                        v.push(Interval { lo: 0, hi: cov.lo - 1 });
                    }
                    if cov.hi < n - 1 {
                        v.push(Interval { lo: cov.hi + 1, hi: n - 1 });
                    }
                    v
                }
            };
            views.push(LevelView { depth: k, dr: level.dr, lo: level.lo, fields, owned });
        }
        views
    }

    /// Checks the nesting invariant; returns a description of the first violation.
    pub fn check_nesting(&self) -> Result<(), String> {
        for pair in self.levels.windows(2) {
            let (parent, child) = (&pair[0], &pair[1]);
            if child.dr != parent.dr * 0.5 {
                return Err(format!("level {} spacing is not half its parent's", child.depth));
            }
            if child.lo % 2 != 0 || child.hi() % 2 != 0 {
                return Err(format!("level {} is not aligned with its parent", child.depth));
            }
            let cov = Self::covered(parent, child);
            let pad = self.params.buffer_width;
            let low_ok = if child.touches_origin() { parent.touches_origin() } else { cov.lo >= pad };
            if !low_ok || cov.hi + pad > parent.len() - 1 {
                return Err(format!(
                    "level {} [{}, {}] violates the {}-cell margin in its parent [{}, {}]",
                    child.depth,
                    child.r_lo(),
                    child.r_hi(),
                    pad,
                    parent.r_lo(),
                    parent.r_hi()
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level_from(depth: usize, dr: f64, lo: usize, n: usize, f: impl Fn(f64) -> f64) -> Level {
        let v: Vec<f64> = (0..n).map(|i| f((lo + i) as f64 * dr)).collect();
        Level::new(depth, dr, lo, [v.clone(), v], 0)
    }

    #[test]
    fn prolong_is_exact_on_even_cubics() {
        let parent = level_from(0, 0.1, 0, 60, |r| 2.0 + r * r - 0.5 * r.powi(4));
        // Even quartic is not reproduced by cubics; use an even quadratic first.
        let quad = level_from(0, 0.1, 0, 60, |r| r * r);
        let child = prolong(&quad, 0, 61).unwrap();
        for (j, v) in child[0].iter().enumerate() {
            let r = j as f64 * 0.05;
            assert!((v - r * r).abs() < 1e-14, "{j}: {v}");
        }
        let c = prolong(&parent, 20, 41).unwrap();
        assert_eq!(c[0][0], parent.fields[0][10]);
    }

    #[test]
    fn prolong_constant() {
        let parent = level_from(0, 0.25, 0, 40, |_| 3.5);
        let child = prolong(&parent, 10, 30).unwrap();
        assert!(child[1].iter().all(|&x| x == 3.5));
    }

    #[test]
    fn prolong_fourth_order_on_quintic() {
        // Interpolation error on r^5 away from the origin shrinks like dr^4.
        let err = |dr: f64| {
            let n = (2.0 / dr) as usize + 1;
            let parent = level_from(0, dr, 0, n, |r| r.powi(5));
            let lo = 2 * (n / 4);
            let m = n / 2;
            let c = prolong(&parent, lo, m).unwrap();
            c[0].iter()
                .enumerate()
                .map(|(j, v)| (v - ((lo + j) as f64 * dr * 0.5).powi(5)).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!(order > 3.8, "order {order}");
    }

    #[test]
    fn prolong_rejects_uncontained_extent() {
        let parent = level_from(0, 0.1, 10, 20, |r| r);
        assert!(matches!(prolong(&parent, 4, 10), Err(MeshError::NotContained { .. })));
        assert!(matches!(prolong(&parent, 50, 20), Err(MeshError::NotContained { .. })));
    }

    #[test]
    fn restrict_after_prolong_is_identity() {
        let parent0 = level_from(0, 0.1, 0, 80, |r| (3.0 * r).sin() * (-r).exp());
        let mut parent = parent0.clone();
        let fields = prolong(&parent, 20, 61).unwrap();
        let child = Level::new(1, 0.05, 20, fields, 0);
        restrict(&child, &mut parent).unwrap();
        assert_eq!(parent.fields, parent0.fields);
    }

    #[test]
    fn restrict_injects_child_values() {
        let mut parent = level_from(0, 0.1, 0, 40, |_| 0.0);
        let child = level_from(1, 0.05, 10, 21, |r| r);
        restrict(&child, &mut parent).unwrap();
        for i in 5..=15 {
            assert_eq!(parent.fields[0][i], child.fields[0][2 * i - 10]);
        }
        assert_eq!(parent.fields[0][4], 0.0);
        assert_eq!(parent.fields[0][16], 0.0);
    }

    #[test]
    fn restrict_requires_synchronized_levels() {
        let mut parent = level_from(0, 0.1, 0, 40, |_| 0.0);
        let mut child = level_from(1, 0.05, 10, 21, |r| r);
        child.tick = 3;
        assert!(matches!(restrict(&child, &mut parent), Err(MeshError::Unsynchronized { .. })));
    }

    #[test]
    fn restrict_disjoint_is_noop() {
        let mut parent = level_from(0, 0.1, 0, 10, |_| 1.0);
        let before = parent.fields.clone();
        let child = level_from(1, 0.05, 40, 11, |_| 9.0);
        restrict(&child, &mut parent).unwrap();
        assert_eq!(parent.fields, before);
    }

    #[test]
    fn flags_empty_for_quiet_level() {
        let level = level_from(0, 0.01, 0, 200, |_| 0.0);
        let ind = vec![0.0; 200];
        assert!(flag_cells(&level, &ind, None, &MeshParams::default()).is_empty());
        assert!(flag_cells(&level, &ind, Some(100.0), &MeshParams::default()).is_empty());
    }

    #[test]
    fn flags_steep_region_once() {
        let level = level_from(0, 0.01, 0, 300, |_| 0.0);
        let mut ind = vec![0.0; 300];
        for x in ind.iter_mut().take(14).skip(6) {
            *x = 1.0;
        }
        let p = MeshParams::default();
        let iv = flag_cells(&level, &ind, None, &p);
        assert_eq!(iv, vec![Interval { lo: 0, hi: 13 + p.buffer_width }]);
    }

    #[test]
    fn scale_criterion_flags_center() {
        let p = MeshParams::default();
        let dr = 0.01;
        let level = level_from(0, dr, 0, 1000, |_| 0.0);
        let lambda = 40.0 * dr / 2.0;
        let iv = flag_cells(&level, &vec![0.0; 1000], Some(lambda), &p);
        assert_eq!(iv.len(), 1);
        assert_eq!(iv[0].lo, 0);
        let reach = (p.scale_extent * lambda / dr).floor() as usize;
        assert_eq!(iv[0].hi, reach + p.buffer_width);
    }
}
