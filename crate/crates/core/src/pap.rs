//! Time grids, trajectories and the almost periodic / ergodic classification
//! toolkit.
//!
//! Almost periods are searched on the time grid itself: a shift `T` is always
//! a multiple of `dt`, so no interpolation enters a translation defect. The
//! search covers the symmetric scan range `[-S, S]` with `S = floor(steps/2) dt`,
//! which is a finite window standing in for the whole line.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{lorentz_norm_sorted, rearrange, Field, GridSpec, LorentzExponents};
use crate::fit::loglog_fit;

/// Default tail threshold of [`pap0_test`].
pub const DEFAULT_PAP0_TOL: f64 = 1e-3;

/// Uniform time grid `t_i = t_min + i dt`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_min: f64,
    t_max: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, steps: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite() && t_min < t_max) {
            return invalid(format!(
                "time grid needs t_min < t_max, got [{t_min}, {t_max}]"
            ));
        }
        if steps < 8 {
            return invalid(format!("time grid needs at least 8 steps, got {steps}"));
        }
        Ok(Self {
            t_min,
            t_max,
            steps,
        })
    }

    /// Grid starting at `t_min` with step `dt`.
    pub fn with_step(t_min: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return invalid(format!("time step must be positive, got {dt}"));
        }
        Self::new(t_min, t_min + dt * steps as f64, steps)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        (self.t_max - self.t_min) / self.steps as f64
    }

    /// Number of nodes, `steps + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.t_max
        } else {
            self.t_min + i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Index of the node at `t`, if `t` is a node up to `1e-9 dt`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t_min) / self.dt();
        let k = x.round();
        if (x - k).abs() <= 1e-9 && k >= 0.0 && k <= self.steps as f64 {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Offset of `other`'s first node in this grid, when both grids share `dt`
    /// and `other`'s nodes are nodes of this grid.
    pub fn aligned_offset(&self, other: &TimeGrid) -> Result<isize> {
        let dt = self.dt();
        if (other.dt() - dt).abs() > 1e-12 * dt {
            return Err(Error::GridMismatch(format!(
                "time steps differ: {} vs {}",
                dt,
                other.dt()
            )));
        }
        let x = (other.t_min - self.t_min) / dt;
        let k = x.round();
        if (x - k).abs() > 1e-9 {
            return Err(Error::GridMismatch(format!(
                "time grids are not aligned: offset {x} steps"
            )));
        }
        Ok(k as isize)
    }

    /// Sub-grid of nodes `i0..=i1`.
    pub fn sub_grid(&self, i0: usize, i1: usize) -> Result<TimeGrid> {
        if i1 > self.steps || i0 >= i1 {
            return invalid(format!("bad sub-grid range {i0}..={i1}"));
        }
        TimeGrid::new(self.time(i0), self.time(i1), i1 - i0)
    }
}

/// Which spatial norm a trajectory is measured in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceNorm {
    /// Largest modulus; the absolute value for scalar signals.
    Modulus,
    Lorentz(LorentzExponents),
}

impl SpaceNorm {
    /// Norm of one snapshot. Lorentz norms need the grid's cell volume.
    pub fn eval(&self, values: &[Complex64], grid: Option<&GridSpec>) -> f64 {
        match self {
            SpaceNorm::Modulus => values.iter().fold(0.0, |m, v| m.max(v.norm())),
            SpaceNorm::Lorentz(e) => {
                let cell = grid.map_or(1.0, |g| g.cell_volume());
                lorentz_norm_sorted(&rearrange(values), cell, *e)
            }
        }
    }
}

/// Time-indexed snapshots on a [`TimeGrid`], all on one spatial grid (or
/// scalar, with one value per time).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    time: TimeGrid,
    space: Option<GridSpec>,
    data: Vec<Complex64>,
    norm: SpaceNorm,
}

impl Trajectory {
    /// Scalar signal with the modulus norm.
    pub fn scalar(time: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != time.len() {
            return invalid(format!(
                "scalar signal has {} samples but the grid has {} nodes",
                values.len(),
                time.len()
            ));
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return invalid("signal values must be finite");
        }
        Ok(Self {
            time,
            space: None,
            data: values,
            norm: SpaceNorm::Modulus,
        })
    }

    /// Samples a scalar function of time.
    pub fn scalar_fn(time: TimeGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::scalar(time, time.times().into_iter().map(f).collect())
    }

    pub fn from_fields(time: TimeGrid, fields: Vec<Field>, norm: SpaceNorm) -> Result<Self> {
        if fields.len() != time.len() {
            return invalid(format!(
                "trajectory has {} snapshots but the grid has {} nodes",
                fields.len(),
                time.len()
            ));
        }
        let grid = *fields[0].grid();
        if fields.iter().any(|f| *f.grid() != grid) {
            return Err(Error::GridMismatch(
                "snapshots live on different grids".into(),
            ));
        }
        let data = fields.into_iter().flat_map(|f| f.into_values()).collect();
        Ok(Self {
            time,
            space: Some(grid),
            data,
            norm,
        })
    }

    /// Raw constructor from concatenated snapshots.
    pub fn from_raw(
        time: TimeGrid,
        space: Option<GridSpec>,
        data: Vec<Complex64>,
        norm: SpaceNorm,
    ) -> Result<Self> {
        let pts = space.map_or(1, |g| g.len());
        if data.len() != pts * time.len() {
            return invalid(format!(
                "trajectory data has {} values, expected {}",
                data.len(),
                pts * time.len()
            ));
        }
        if data.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return invalid("trajectory values must be finite");
        }
        if space.is_none() && norm != SpaceNorm::Modulus {
            return invalid("scalar signals use the modulus norm");
        }
        Ok(Self {
            time,
            space,
            data,
            norm,
        })
    }

    /// `a(t) g(x)`.
    pub fn separable(
        time: TimeGrid,
        a: impl Fn(f64) -> Complex64,
        g: &Field,
        norm: SpaceNorm,
    ) -> Self {
        let mut data = Vec::with_capacity(time.len() * g.values().len());
        for t in time.times() {
            let at = a(t);
            data.extend(g.values().iter().map(|v| v * at));
        }
        Self {
            time,
            space: Some(*g.grid()),
            data,
            norm,
        }
    }

    /// Zero trajectory with the same shape.
    pub fn zeros_like(&self) -> Self {
        Self {
            data: vec![Complex64::new(0.0, 0.0); self.data.len()],
            ..self.clone()
        }
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn space(&self) -> Option<&GridSpec> {
        self.space.as_ref()
    }

    pub fn norm(&self) -> SpaceNorm {
        self.norm
    }

    pub fn with_norm(mut self, norm: SpaceNorm) -> Result<Self> {
        if self.space.is_none() && norm != SpaceNorm::Modulus {
            return invalid("scalar signals use the modulus norm");
        }
        self.norm = norm;
        Ok(self)
    }

    /// Values per snapshot.
    pub fn points(&self) -> usize {
        self.space.map_or(1, |g| g.len())
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn snapshot(&self, i: usize) -> &[Complex64] {
        let p = self.points();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn snapshot_mut(&mut self, i: usize) -> &mut [Complex64] {
        let p = self.points();
        &mut self.data[i * p..(i + 1) * p]
    }

    /// Snapshot `i` as a [`Field`]; fails for scalar signals.
    pub fn snapshot_field(&self, i: usize) -> Result<Field> {
        let grid = self
            .space
            .ok_or_else(|| Error::InvalidInput("scalar signal has no field".into()))?;
        Field::from_values(grid, self.snapshot(i).to_vec())
    }

    pub fn snapshot_norm(&self, i: usize) -> f64 {
        self.norm.eval(self.snapshot(i), self.space.as_ref())
    }

    /// Norm of every snapshot, in time order.
    pub fn snapshot_norms(&self) -> Vec<f64> {
        (0..self.time.len())
            .into_par_iter()
            .map(|i| self.snapshot_norm(i))
            .collect()
    }

    /// `sup_t ||f(t)||`.
    pub fn sup_norm(&self) -> f64 {
        self.snapshot_norms().into_iter().fold(0.0, f64::max)
    }

    /// Snapshots `i0..=i1` on the corresponding sub-grid.
    pub fn slice(&self, i0: usize, i1: usize) -> Result<Trajectory> {
        let time = self.time.sub_grid(i0, i1)?;
        let p = self.points();
        Ok(Self {
            time,
            space: self.space,
            data: self.data[i0 * p..(i1 + 1) * p].to_vec(),
            norm: self.norm,
        })
    }

    fn check_same_shape(&self, other: &Trajectory) -> Result<()> {
        if self.time != other.time || self.space != other.space {
            return Err(Error::GridMismatch(
                "trajectories live on different grids".into(),
            ));
        }
        Ok(())
    }

    pub fn add(&self, other: &Trajectory) -> Result<Trajectory> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            data,
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        self.check_same_shape(other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            data,
            ..self.clone()
        })
    }

    pub fn scaled(&self, c: Complex64) -> Trajectory {
        Self {
            data: self.data.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// `sup_t ||f(t) - g(t)||` in this trajectory's norm.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        self.check_same_shape(other)?;
        let d: Vec<f64> = (0..self.time.len())
            .into_par_iter()
            .map(|i| {
                let diff: Vec<Complex64> = self
                    .snapshot(i)
                    .iter()
                    .zip(other.snapshot(i))
                    .map(|(a, b)| a - b)
                    .collect();
                self.norm.eval(&diff, self.space.as_ref())
            })
            .collect();
        Ok(d.into_iter().fold(0.0, f64::max))
    }
}

fn shift_of(f: &Trajectory, t: f64) -> Result<usize> {
    let dt = f.time.dt();
    let m = (t / dt).round().abs() as usize;
    if m > f.time.steps {
        return invalid(format!("shift {t} leaves no overlap on the time grid"));
    }
    Ok(m)
}

fn pair_norm(f: &Trajectory, i: usize, m: usize, buf: &mut Vec<Complex64>) -> f64 {
    buf.clear();
    buf.extend(
        f.snapshot(i + m)
            .iter()
            .zip(f.snapshot(i))
            .map(|(a, b)| a - b),
    );
    f.norm.eval(buf, f.space.as_ref())
}

/// `sup_t ||f(t + T) - f(t)||` over the overlap, with `T` snapped to the
/// nearest multiple of `dt`. The defect is symmetric in `T`.
pub fn translation_defect(f: &Trajectory, t: f64) -> Result<f64> {
    let m = shift_of(f, t)?;
    Ok(defect_full(f, m))
}

fn defect_full(f: &Trajectory, m: usize) -> f64 {
    let count = f.time.len() - m;
    (0..count)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| pair_norm(f, i, m, buf))
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Strided visiting order: coarse samples first so that large defects are
/// found early.
fn strided_order(count: usize) -> impl Iterator<Item = usize> {
    const STRIDES: [usize; 4] = [64, 16, 4, 1];
    STRIDES.iter().enumerate().flat_map(move |(k, &s)| {
        (0..count)
            .step_by(s)
            .filter(move |i| k == 0 || i % STRIDES[k - 1] != 0)
    })
}

/// Full defect if it stays below `eps`, `None` as soon as one pair reaches it.
fn defect_below(f: &Trajectory, m: usize, eps: f64) -> Option<f64> {
    let count = f.time.len() - m;
    let mut buf = Vec::with_capacity(f.points());
    let mut sup: f64 = 0.0;
    for i in strided_order(count) {
        sup = sup.max(pair_norm(f, i, m, &mut buf));
        if sup >= eps {
            return None;
        }
    }
    Some(sup)
}

/// Outcome of an almost-period search.
#[derive(Debug, Clone, PartialEq)]
pub struct APReport {
    pub epsilon: f64,
    /// Smallest window length such that every window of that length inside
    /// the scan range contains an almost period; `None` when it exceeds `l_max`.
    pub inclusion_length: Option<f64>,
    /// Grid shifts with defect below `epsilon`, sorted.
    pub almost_periods: Vec<f64>,
    /// Defect at each almost period.
    pub defects: Vec<f64>,
    /// Largest gap between consecutive almost periods.
    pub max_gap: f64,
    /// Half-width `S` of the scanned shift range `[-S, S]`.
    pub scan_half_width: f64,
}

impl APReport {
    pub fn passed(&self) -> bool {
        self.inclusion_length.is_some()
    }
}

/// Searches the grid shifts in the symmetric scan range for `epsilon`
/// almost periods and computes the inclusion length.
pub fn ap_test(f: &Trajectory, epsilon: f64, l_max: f64) -> Result<APReport> {
    if !(epsilon > 0.0) {
        return invalid(format!("epsilon must be positive, got {epsilon}"));
    }
    let dt = f.time.dt();
    let half = f.time.steps / 2;
    let hits: Vec<Option<f64>> = (0..=half)
        .into_par_iter()
        .map(|m| defect_below(f, m, epsilon))
        .collect();
    // shifts in units of dt, symmetric about zero
    let mut shifts: Vec<isize> = Vec::new();
    let mut defects = Vec::new();
    for (m, d) in hits.iter().enumerate().rev() {
        if let (Some(d), true) = (d, m > 0) {
            shifts.push(-(m as isize));
            defects.push(*d);
        }
    }
    for (m, d) in hits.iter().enumerate() {
        if let Some(d) = d {
            shifts.push(m as isize);
            defects.push(*d);
        }
    }
    let half = half as isize;
    let gap = shifts.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    // the zero shift is always present, so shifts is never empty
    let edge = (shifts[0] + half).max(half - shifts[shifts.len() - 1]);
    let l = gap.max(edge).max(1) as f64 * dt;
    let s = half as f64 * dt;
    let max_gap = gap as f64 * dt;
    let periods = shifts.iter().map(|&m| m as f64 * dt).collect();
    Ok(APReport {
        epsilon,
        inclusion_length: (l <= l_max).then_some(l),
        almost_periods: periods,
        defects,
        max_gap,
        scan_half_width: s,
    })
}

/// Mean values `M(L) = (1/2L) int_{-L}^{L} ||f(t)|| dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanValueCurve {
    pub window_lengths: Vec<f64>,
    pub values: Vec<f64>,
}

/// Integral of the piecewise linear interpolant of `y` over `[a, b]`.
fn integrate_linear(grid: &TimeGrid, y: &[f64], a: f64, b: f64) -> f64 {
    let dt = grid.dt();
    let at = |t: f64| {
        let x = ((t - grid.t_min()) / dt).clamp(0.0, grid.steps() as f64);
        let i = (x.floor() as usize).min(grid.steps() - 1);
        let w = x - i as f64;
        y[i] * (1.0 - w) + y[i + 1] * w
    };
    let mut knots = vec![a];
    for i in 0..grid.len() {
        let t = grid.time(i);
        if t > a && t < b {
            knots.push(t);
        }
    }
    knots.push(b);
    knots
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (at(w[0]) + at(w[1])))
        .sum()
}

pub fn mean_value_curve(f: &Trajectory, window_lengths: &[f64]) -> Result<MeanValueCurve> {
    if window_lengths.is_empty() {
        return invalid("mean value curve needs at least one window");
    }
    if window_lengths.windows(2).any(|w| w[1] <= w[0]) || window_lengths[0] <= 0.0 {
        return invalid("window lengths must be positive and strictly increasing");
    }
    let slack = 1e-9 * f.time.dt();
    let lmax = window_lengths[window_lengths.len() - 1];
    if -lmax < f.time.t_min() - slack || lmax > f.time.t_max() + slack {
        return invalid(format!(
            "window [-{lmax}, {lmax}] exceeds the trajectory support [{}, {}]",
            f.time.t_min(),
            f.time.t_max()
        ));
    }
    let norms = f.snapshot_norms();
    let values = window_lengths
        .iter()
        .map(|&l| integrate_linear(&f.time, &norms, -l, l) / (2.0 * l))
        .collect();
    Ok(MeanValueCurve {
        window_lengths: window_lengths.to_vec(),
        values,
    })
}

/// Outcome of the vanishing-mean test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pap0Report {
    /// Fitted slope of `log M` against `log L`; `None` if some `M(L)` is zero.
    pub slope: Option<f64>,
    /// `M(L_max)`.
    pub tail: f64,
    pub passed: bool,
}

/// Vanishing mean: passes when the fitted slope is at most `-0.5` or the
/// last mean value is below `tol`.
pub fn pap0_test(curve: &MeanValueCurve, tol: f64) -> Result<Pap0Report> {
    let l = &curve.window_lengths;
    if l.len() < 4 || l.len() != curve.values.len() {
        return invalid("vanishing-mean test needs at least 4 windows");
    }
    if l[l.len() - 1] < 8.0 * l[0] {
        return invalid("windows must span a factor of at least 8");
    }
    let tail = curve.values[curve.values.len() - 1];
    let slope = if curve.values.iter().all(|v| *v > 0.0) {
        Some(loglog_fit(l, &curve.values)?.slope)
    } else {
        None
    };
    let passed = slope.is_some_and(|s| s <= -0.5) || tail < tol;
    Ok(Pap0Report {
        slope,
        tail,
        passed,
    })
}

/// A pseudo almost periodic signal together with its two components.
#[derive(Debug, Clone, PartialEq)]
pub struct PapSignal {
    pub total: Trajectory,
    pub ap_part: Trajectory,
    pub ergodic_part: Trajectory,
}

pub fn pap_synthesize(ap_part: &Trajectory, ergodic_part: &Trajectory) -> Result<PapSignal> {
    let total = ap_part.add(ergodic_part)?;
    Ok(PapSignal {
        total,
        ap_part: ap_part.clone(),
        ergodic_part: ergodic_part.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn re(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn signal(t0: f64, t1: f64, steps: usize, f: impl Fn(f64) -> f64) -> Trajectory {
        Trajectory::scalar_fn(TimeGrid::new(t0, t1, steps).unwrap(), |t| re(f(t))).unwrap()
    }

    #[test]
    fn time_grid_basics() {
        assert!(TimeGrid::new(0.0, 1.0, 7).is_err());
        assert!(TimeGrid::new(1.0, 1.0, 8).is_err());
        let g = TimeGrid::new(-1.0, 1.0, 8).unwrap();
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.index_of(0.5), Some(6));
        assert_eq!(g.index_of(0.3), None);
        let h = TimeGrid::with_step(-0.5, 0.25, 10).unwrap();
        assert_eq!(g.aligned_offset(&h).unwrap(), 2);
        let k = TimeGrid::with_step(-0.4, 0.25, 10).unwrap();
        assert!(g.aligned_offset(&k).is_err());
    }

    #[test]
    fn sine_defects() {
        let f = signal(-4.0 * PI, 4.0 * PI, 800, f64::sin);
        assert!(translation_defect(&f, 2.0 * PI).unwrap() < 1e-10);
        assert!((translation_defect(&f, PI).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(translation_defect(&f, 0.0).unwrap(), 0.0);
        assert!(translation_defect(&f, 9.0 * PI).is_err());
    }

    #[test]
    fn quasi_periodic_signal_is_almost_periodic() {
        let f = signal(-200.0, 200.0, 8000, |t| t.sin() + (2f64.sqrt() * t).sin());
        let r = ap_test(&f, 0.2, 200.0).unwrap();
        assert!(r.passed(), "{:?}", r.inclusion_length);
        assert!(r.almost_periods.len() > 1);
        assert!(r.defects.iter().all(|d| *d < 0.2));
    }

    #[test]
    fn drift_is_not_almost_periodic() {
        let f = signal(-50.0, 50.0, 1000, |t| t);
        let r = ap_test(&f, 0.5, 20.0).unwrap();
        assert!(!r.passed());
        assert!(r.almost_periods.iter().all(|t| t.abs() < 0.5));
    }

    #[test]
    fn constant_has_every_shift() {
        let f = signal(-1.0, 1.0, 20, |_| 3.0);
        let r = ap_test(&f, 1e-3, 1.0).unwrap();
        assert_eq!(r.inclusion_length, Some(f.time().dt()));
        assert_eq!(r.almost_periods.len(), 21);
    }

    #[test]
    fn mean_values() {
        let f = signal(-20.0, 20.0, 40000, |t| 1.0 / (1.0 + t * t));
        let c = mean_value_curve(&f, &[10.0]).unwrap();
        assert!((c.values[0] - 10f64.atan() / 10.0).abs() < 1e-6);
        let one = signal(-8.0, 8.0, 64, |_| 1.0);
        let c = mean_value_curve(&one, &[1.0, 2.5, 8.0]).unwrap();
        assert!(c.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(mean_value_curve(&one, &[9.0]).is_err());
        let s = signal(-400.0, 400.0, 80000, f64::sin);
        let c = mean_value_curve(&s, &[400.0]).unwrap();
        assert!((c.values[0] - 2.0 / PI).abs() < 2e-3);
    }

    #[test]
    fn vanishing_mean_decisions() {
        let lens = [12.5, 25.0, 50.0, 100.0];
        let f = signal(-100.0, 100.0, 20000, |t| 1.0 / (1.0 + t * t));
        let r = pap0_test(&mean_value_curve(&f, &lens).unwrap(), DEFAULT_PAP0_TOL).unwrap();
        assert!(r.passed && (r.slope.unwrap() + 1.0).abs() < 0.05);
        let one = signal(-100.0, 100.0, 200, |_| 1.0);
        let r = pap0_test(&mean_value_curve(&one, &lens).unwrap(), DEFAULT_PAP0_TOL).unwrap();
        assert!(!r.passed);
        let e = signal(-100.0, 100.0, 20000, |t| (-t.abs()).exp());
        let r = pap0_test(&mean_value_curve(&e, &lens).unwrap(), DEFAULT_PAP0_TOL).unwrap();
        assert!(r.passed);
        let short = mean_value_curve(&one, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(pap0_test(&short, DEFAULT_PAP0_TOL).is_err());
    }

    #[test]
    fn synthesis_is_a_sum() {
        let time = TimeGrid::new(-10.0, 10.0, 100).unwrap();
        let g = Trajectory::scalar_fn(time, |t| re(t.sin() + (2f64.sqrt() * t).sin())).unwrap();
        let phi = Trajectory::scalar_fn(time, |t| re(1.0 / (1.0 + t * t))).unwrap();
        let zero = g.zeros_like();
        assert_eq!(pap_synthesize(&g, &zero).unwrap().total, g);
        assert_eq!(pap_synthesize(&zero, &phi).unwrap().total, phi);
        let s = pap_synthesize(&g, &phi).unwrap();
        assert_eq!(
            s.total.snapshot(3)[0],
            g.snapshot(3)[0] + phi.snapshot(3)[0]
        );
        let other =
            Trajectory::scalar_fn(TimeGrid::new(-10.0, 10.0, 50).unwrap(), |_| re(0.0)).unwrap();
        assert!(pap_synthesize(&g, &other).is_err());
    }

    #[test]
    fn strided_order_visits_each_index_once() {
        for count in [0, 1, 5, 64, 65, 300] {
            let mut seen: Vec<usize> = strided_order(count).collect();
            seen.sort();
            assert_eq!(seen, (0..count).collect::<Vec<_>>());
        }
    }
}
