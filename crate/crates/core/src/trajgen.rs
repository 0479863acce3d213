//! From cell sequences to time-stamped waypoints and a smooth reference path.
//!
//! The lateral profile is a clamped cubic spline `y(x)` over the road's
//! longitudinal coordinate with zero slope at both ends; heading and curvature
//! come from its derivatives. The time profile interpolates the waypoints'
//! longitudinal positions linearly in time.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{CellIndex, GridError, MovingGrid};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("empty plan")]
    EmptyPlan,
    #[error("behavior step must be positive")]
    NonPositiveStep,
    #[error("need at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoints {0} and {1} share a time stamp")]
    DuplicateTime(usize, usize),
    #[error("waypoint {0} does not advance along the road")]
    NotAdvancing(usize),
    #[error("sample spacing must be positive")]
    BadSpacing,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint<T> {
    pub t: T,
    pub s: T,
    pub y: T,
}

/// One waypoint per planned step; step `k` sits `k - 1` behavior steps after
/// the grid epoch.
pub fn generate_waypoints<T: Real>(
    cells: &[CellIndex],
    grid: &MovingGrid<T>,
    dt_b: T,
) -> Result<Vec<Waypoint<T>>, TrajError> {
    if cells.is_empty() {
        return Err(TrajError::EmptyPlan);
    }
    if !(dt_b > T::zero()) {
        return Err(TrajError::NonPositiveStep);
    }
    cells
        .iter()
        .enumerate()
        .map(|(k0, &c)| {
            let (t, s, y) = grid.cell_to_world(k0, c, dt_b)?;
            Ok(Waypoint { t, s, y })
        })
        .collect()
}

/// Clamped cubic spline through `(x_i, y_i)` with prescribed end slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline<T> {
    x: Vec<T>,
    y: Vec<T>,
    /// Second derivatives at the knots.
    m: Vec<T>,
}

impl<T: Real> CubicSpline<T> {
    /// `x` must be strictly increasing with at least two knots.
    pub fn clamped(x: Vec<T>, y: Vec<T>, slope0: T, slope1: T) -> Self {
        let n = x.len();
        assert!(n >= 2 && y.len() == n);
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<T> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        // Tridiagonal system for the knot second derivatives.
        let mut sub = vec![T::zero(); n];
        let mut diag = vec![T::zero(); n];
        let mut sup = vec![T::zero(); n];
        let mut rhs = vec![T::zero(); n];
        diag[0] = two * h[0];
        sup[0] = h[0];
        rhs[0] = six * (d[0] - slope0);
        for i in 1..n - 1 {
            sub[i] = h[i - 1];
            diag[i] = two * (h[i - 1] + h[i]);
            sup[i] = h[i];
            rhs[i] = six * (d[i] - d[i - 1]);
        }
        sub[n - 1] = h[n - 2];
        diag[n - 1] = two * h[n - 2];
        rhs[n - 1] = six * (slope1 - d[n - 2]);
        for i in 1..n {
            let w = sub[i] / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            let prev = rhs[i - 1];
            rhs[i] -= w * prev;
        }
        let mut m = vec![T::zero(); n];
        m[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
        }
        Self { x, y, m }
    }

    fn segment(&self, x: T) -> usize {
        let n = self.x.len();
        match self.x.iter().position(|&k| k > x) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => n - 2,
        }
    }

    /// Value, first and second derivative at `x`. Outside the knot range the
    /// path continues straight with the end value.
    pub fn eval(&self, x: T) -> (T, T, T) {
        let n = self.x.len();
        if x < self.x[0] {
            return (self.y[0], T::zero(), T::zero());
        }
        if x > self.x[n - 1] {
            return (self.y[n - 1], T::zero(), T::zero());
        }
        let i = self.segment(x);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - x) / h;
        let b = (x - self.x[i]) / h;
        let six = T::lit(6.0);
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let y = a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / six;
        let dy = (self.y[i + 1] - self.y[i]) / h
            - (T::lit(3.0) * a * a - T::one()) * h * m0 / six
            + (T::lit(3.0) * b * b - T::one()) * h * m1 / six;
        let ddy = a * m0 + b * m1;
        (y, dy, ddy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample<T> {
    pub sigma: T,
    pub x: T,
    pub y: T,
    pub heading: T,
    pub kappa: T,
}

/// Pose of the path at a longitudinal station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint<T> {
    pub y: T,
    pub heading: T,
    pub kappa: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePath<T> {
    pub samples: Vec<PathSample<T>>,
    spline: CubicSpline<T>,
    times: Vec<T>,
    stations: Vec<T>,
}

impl<T: Real> ReferencePath<T> {
    pub fn at(&self, x: T) -> PathPoint<T> {
        let (y, dy, ddy) = self.spline.eval(x);
        let g = T::one() + dy * dy;
        PathPoint {
            y,
            heading: dy.atan(),
            kappa: ddy / (g * g.sqrt()),
        }
    }

    /// Desired longitudinal position and speed at time `t`. Before the first
    /// waypoint the vehicle is asked to hold the first station; past the last
    /// one the final segment's speed continues.
    pub fn desired(&self, t: T) -> (T, T) {
        let n = self.times.len();
        if t <= self.times[0] {
            let v = (self.stations[1] - self.stations[0]) / (self.times[1] - self.times[0]);
            return (self.stations[0] + v * (t - self.times[0]), v);
        }
        let i = match self.times.iter().position(|&k| k > t) {
            Some(i) => i - 1,
            None => n - 2,
        };
        let v = (self.stations[i + 1] - self.stations[i]) / (self.times[i + 1] - self.times[i]);
        (self.stations[i] + v * (t - self.times[i]), v)
    }

    pub fn length(&self) -> T {
        self.samples.last().map_or(T::zero(), |s| s.sigma)
    }

    pub fn start(&self) -> T {
        self.stations[0]
    }

    pub fn end(&self) -> T {
        self.stations[self.stations.len() - 1]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TrajError>
    where
        T: Serialize,
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        for s in &self.samples {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Fits the lateral spline through the waypoints and samples it every `ds`
/// metres of road, accumulating arc length with Simpson's rule per interval.
pub fn build_reference_path<T: Real>(waypoints: &[Waypoint<T>], ds: T) -> Result<ReferencePath<T>, TrajError> {
    if waypoints.len() < 2 {
        return Err(TrajError::TooFewWaypoints(waypoints.len()));
    }
    if !(ds > T::zero()) {
        return Err(TrajError::BadSpacing);
    }
    for (i, w) in waypoints.windows(2).enumerate() {
        if w[1].t == w[0].t {
            return Err(TrajError::DuplicateTime(i, i + 1));
        }
        if !(w[1].s > w[0].s) {
            return Err(TrajError::NotAdvancing(i + 1));
        }
    }
    let stations: Vec<T> = waypoints.iter().map(|w| w.s).collect();
    let spline = CubicSpline::clamped(
        stations.clone(),
        waypoints.iter().map(|w| w.y).collect(),
        T::zero(),
        T::zero(),
    );
    let (x0, x1) = (stations[0], stations[stations.len() - 1]);
    let count = ((x1 - x0) / ds).ceil().to_usize().unwrap_or(0).max(1);
    let speed = |x: T| {
        let (_, dy, _) = spline.eval(x);
        (T::one() + dy * dy).sqrt()
    };
    let mut samples = Vec::with_capacity(count + 1);
    let mut sigma = T::zero();
    let mut prev = x0;
    for i in 0..=count {
        let x = (x0 + T::from_usize_lossy(i) * ds).min(x1);
        if i > 0 {
            let mid = (prev + x) / T::lit(2.0);
            sigma += (x - prev) / T::lit(6.0) * (speed(prev) + T::lit(4.0) * speed(mid) + speed(x));
        }
        let (y, dy, ddy) = spline.eval(x);
        let g = T::one() + dy * dy;
        samples.push(PathSample {
            sigma,
            x,
            y,
            heading: dy.atan(),
            kappa: ddy / (g * g.sqrt()),
        });
        prev = x;
    }
    Ok(ReferencePath {
        samples,
        spline,
        times: waypoints.iter().map(|w| w.t).collect(),
        stations,
    })
}

#[derive(Serialize, Deserialize)]
struct WaypointRow<T> {
    cav_id: usize,
    t: T,
    s: T,
    y: T,
}

/// Writes `(cav_id, t, s, y)` rows, one block per CAV.
pub fn write_waypoints_csv<T: Real + Serialize, W: Write>(
    per_cav: &[(usize, Vec<Waypoint<T>>)],
    out: W,
) -> Result<(), TrajError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    for (cav_id, wps) in per_cav {
        for p in wps {
            w.serialize(WaypointRow { cav_id: *cav_id, t: p.t, s: p.s, y: p.y })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::centered_lanes;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn grid() -> MovingGrid<f64> {
        MovingGrid::new(0.0, 0.0, 17.5, 6, 10.0, 3.0, centered_lanes(3, 3.0)).unwrap()
    }

    fn wp(t: f64, s: f64, y: f64) -> Waypoint<f64> {
        Waypoint { t, s, y }
    }

    #[test]
    fn waypoints_follow_cells() {
        let g = grid();
        let still = generate_waypoints(&[CellIndex::new(2, 2); 3], &g, 3.0).unwrap();
        for w in still.windows(2) {
            assert_abs_diff_eq!(w[1].s - w[0].s, 52.5);
            assert_eq!(w[1].y, w[0].y);
        }
        let change = generate_waypoints(&[CellIndex::new(1, 2), CellIndex::new(1, 1)], &g, 3.0).unwrap();
        assert_eq!((change[0].y, change[1].y), (0.0, -3.0));
        let fwd = generate_waypoints(&[CellIndex::new(1, 2), CellIndex::new(2, 2)], &g, 3.0).unwrap();
        assert_abs_diff_eq!(fwd[1].s - fwd[0].s, 62.5);
        assert_eq!(fwd.iter().map(|w| w.t).collect::<Vec<_>>(), vec![0.0, 3.0]);
        assert!(matches!(generate_waypoints(&[], &g, 3.0), Err(TrajError::EmptyPlan)));
    }

    #[test]
    fn straight_path_has_no_curvature() {
        let p = build_reference_path(&[wp(0.0, 0.0, 0.0), wp(3.0, 52.5, 0.0), wp(6.0, 105.0, 0.0)], 0.5).unwrap();
        assert!(p.samples.iter().all(|s| s.kappa == 0.0 && s.heading == 0.0 && s.y == 0.0));
        assert_abs_diff_eq!(p.length(), 105.0, epsilon = 1e-9);
    }

    fn lane_change(dy: f64) -> ReferencePath<f64> {
        build_reference_path(&[wp(0.0, 0.0, 0.0), wp(3.0, 62.5, dy)], 0.5).unwrap()
    }

    #[test]
    fn lane_change_turns_and_straightens() {
        let p = lane_change(3.0);
        let peak = p.samples.iter().map(|s| s.kappa.abs()).fold(0.0, f64::max);
        assert!(peak > 0.0);
        // Trapezoidal integral of curvature over arc length.
        let net: f64 = p
            .samples
            .windows(2)
            .map(|w| 0.5 * (w[0].kappa + w[1].kappa) * (w[1].sigma - w[0].sigma))
            .sum();
        assert_abs_diff_eq!(net, 0.0, epsilon = 1e-4);
        assert_abs_diff_eq!(p.samples[0].heading, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.samples.last().unwrap().heading, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn mirrored_lane_change_mirrors_curvature() {
        let (a, b) = (lane_change(3.0), lane_change(-3.0));
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert_abs_diff_eq!(x.kappa, -y.kappa, epsilon = 1e-15);
            assert_abs_diff_eq!(x.sigma, y.sigma, epsilon = 1e-12);
        }
    }

    #[test]
    fn duplicate_times_rejected() {
        let e = build_reference_path(&[wp(0.0, 0.0, 0.0), wp(0.0, 10.0, 0.0)], 0.5).unwrap_err();
        assert!(matches!(e, TrajError::DuplicateTime(0, 1)));
        assert!(matches!(build_reference_path(&[wp(0.0, 0.0, 0.0)], 0.5), Err(TrajError::TooFewWaypoints(1))));
    }

    #[test]
    fn time_profile_is_piecewise_linear() {
        let p = build_reference_path(&[wp(0.0, 0.0, 0.0), wp(3.0, 52.5, 0.0), wp(6.0, 115.0, 3.0)], 0.5).unwrap();
        assert_eq!(p.desired(1.5), (26.25, 17.5));
        let (s, v) = p.desired(4.5);
        assert_abs_diff_eq!(s, 83.75);
        assert_abs_diff_eq!(v, 62.5 / 3.0);
        assert_abs_diff_eq!(p.desired(7.0).0, 115.0 + 62.5 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn spline_matches_a_cubic_it_can_represent() {
        // y = x^2 (3 - 2x) on [0, 1] has zero slope at both ends.
        let xs: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        let f = |x: f64| x * x * (3.0 - 2.0 * x);
        let s = CubicSpline::clamped(xs.clone(), xs.iter().map(|&x| f(x)).collect(), 0.0, 0.0);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert_abs_diff_eq!(s.eval(x).0, f(x), epsilon = 1e-12);
            assert_abs_diff_eq!(s.eval(x).2, 6.0 - 12.0 * x, epsilon = 1e-9);
        }
    }

    #[test]
    fn csv_shapes() {
        let p = lane_change(3.0);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sigma,x,y,heading,kappa\n"));
        assert_eq!(text.lines().count(), p.samples.len() + 1);
        let mut buf = Vec::new();
        write_waypoints_csv(&[(0, vec![wp(0.0, 1.0, 0.0)])], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "cav_id,t,s,y\n0,0.0,1.0,0.0\n");
    }

    fn waypoint_strategy() -> impl Strategy<Value = Vec<Waypoint<f64>>> {
        prop::collection::vec((40.0f64..70.0, prop::sample::select(vec![-3.0, 0.0, 3.0])), 2..8).prop_map(|steps| {
            let mut s = 0.0;
            steps
                .iter()
                .enumerate()
                .map(|(k, &(ds, y))| {
                    if k > 0 {
                        s += ds;
                    }
                    wp(3.0 * k as f64, s, y)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn passes_through_waypoints(wps in waypoint_strategy()) {
            let p = build_reference_path(&wps, 0.5).unwrap();
            for w in &wps {
                prop_assert!((p.at(w.s).y - w.y).abs() < 1e-9);
            }
            prop_assert!(p.samples.windows(2).all(|w| w[1].sigma > w[0].sigma));
            prop_assert!(p.samples.iter().all(|s| s.kappa.is_finite()));
            prop_assert!(p.samples.first().unwrap().heading.abs() < 1e-12);
            prop_assert!(p.samples.last().unwrap().heading.abs() < 1e-12);
        }

        #[test]
        fn refinement_converges(wps in waypoint_strategy()) {
            let coarse = build_reference_path(&wps, 0.5).unwrap().length();
            let fine = build_reference_path(&wps, 0.25).unwrap().length();
            prop_assert!((coarse - fine).abs() / fine < 1e-3);
        }
    }
}
