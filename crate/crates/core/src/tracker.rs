//! Trajectory tracking by finite-horizon LQR.
//!
//! Both tracking problems are two-state, single-input affine systems
//! `X' = A X + B u + C_k` with stage cost
//! `1/2 (X - Xd_k)' Q (X - Xd_k) + 1/2 r u^2` for `k in 0..K` plus the
//! terminal state term at `K`. [`lqr_solve`] runs the backward recursion on the
//! value function `V_k(X) = 1/2 X' Qt_k X + Dt_k' X + Et_k`, folding the affine
//! term and the moving target into `Dt`, then rolls the feedback law forward.
//!
//! Longitudinal tracking runs on the time grid (`dt`), lateral tracking on
//! spatial stations (`ds`) along the reference path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;
use crate::trajgen::ReferencePath;

pub type Vec2<T> = [T; 2];
pub type Mat2<T> = [[T; 2]; 2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackerError {
    #[error("horizon must be at least one step")]
    EmptyHorizon,
    #[error("step size must be positive")]
    NonPositiveStep,
    #[error("{what} has {got} entries, expected {need}")]
    Length { what: &'static str, got: usize, need: usize },
    #[error("control weight must be positive")]
    NonPositiveControlWeight,
    #[error("singular stage system at step {0}")]
    Singular(usize),
}

fn mv<T: Real>(m: &Mat2<T>, x: &Vec2<T>) -> Vec2<T> {
    [m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1]]
}

fn dot<T: Real>(a: &Vec2<T>, b: &Vec2<T>) -> T {
    a[0] * b[0] + a[1] * b[1]
}

fn add<T: Real>(a: &Vec2<T>, b: &Vec2<T>) -> Vec2<T> {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub<T: Real>(a: &Vec2<T>, b: &Vec2<T>) -> Vec2<T> {
    [a[0] - b[0], a[1] - b[1]]
}

fn scale<T: Real>(a: &Vec2<T>, s: T) -> Vec2<T> {
    [a[0] * s, a[1] * s]
}

fn transpose<T: Real>(m: &Mat2<T>) -> Mat2<T> {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

fn mm<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    let mut out = [[T::zero(); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn outer<T: Real>(a: &Vec2<T>, b: &Vec2<T>) -> Mat2<T> {
    [[a[0] * b[0], a[0] * b[1]], [a[1] * b[0], a[1] * b[1]]]
}

fn madd<T: Real>(a: &Mat2<T>, b: &Mat2<T>) -> Mat2<T> {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

/// `1/2 x' m x`.
fn half_quad<T: Real>(m: &Mat2<T>, x: &Vec2<T>) -> T {
    dot(x, &mv(m, x)) / T::lit(2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrProblem<T> {
    pub a: Mat2<T>,
    pub b: Vec2<T>,
    /// Affine term per step, `K` entries.
    pub c: Vec<Vec2<T>>,
    pub q: Mat2<T>,
    pub r: T,
    pub x0: Vec2<T>,
    /// Target per step, `K + 1` entries.
    pub x_des: Vec<Vec2<T>>,
    pub u_min: T,
    pub u_max: T,
    /// Bounds on the second state component, enforced when clamping.
    pub x1_bounds: Option<(T, T)>,
}

impl<T: Real> LqrProblem<T> {
    pub fn horizon(&self) -> usize {
        self.c.len()
    }

    pub fn check(&self) -> Result<(), TrackerError> {
        let k = self.horizon();
        if k == 0 {
            return Err(TrackerError::EmptyHorizon);
        }
        if self.x_des.len() != k + 1 {
            return Err(TrackerError::Length { what: "x_des", got: self.x_des.len(), need: k + 1 });
        }
        if !(self.r > T::zero()) {
            return Err(TrackerError::NonPositiveControlWeight);
        }
        Ok(())
    }

    pub fn step(&self, k: usize, x: &Vec2<T>, u: T) -> Vec2<T> {
        add(&add(&mv(&self.a, x), &scale(&self.b, u)), &self.c[k])
    }

    /// Objective of control sequence `u` under the exact dynamics.
    pub fn cost(&self, u: &[T]) -> T {
        let mut x = self.x0;
        let mut j = T::zero();
        for (k, &uk) in u.iter().enumerate() {
            j += half_quad(&self.q, &sub(&x, &self.x_des[k])) + self.r * uk * uk / T::lit(2.0);
            x = self.step(k, &x, uk);
        }
        j + half_quad(&self.q, &sub(&x, &self.x_des[u.len()]))
    }

    /// States visited under `u` from `x0`.
    pub fn rollout(&self, u: &[T]) -> Vec<Vec2<T>> {
        let mut xs = Vec::with_capacity(u.len() + 1);
        xs.push(self.x0);
        for (k, &uk) in u.iter().enumerate() {
            let next = self.step(k, &xs[k], uk);
            xs.push(next);
        }
        xs
    }
}

/// Feedback law `u_k = G_k X + H_k` and closed-loop map `X' = S_k X + T_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageGain<T> {
    pub g: Vec2<T>,
    pub h: T,
    pub s: Mat2<T>,
    pub t: Vec2<T>,
}

impl<T: Real> StageGain<T> {
    pub fn control(&self, x: &Vec2<T>) -> T {
        dot(&self.g, x) + self.h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrSolution<T> {
    pub u: Vec<T>,
    pub x: Vec<Vec2<T>>,
    pub cost: T,
    pub gains: Vec<StageGain<T>>,
    /// Optimal cost-to-go at the initial state as predicted by the recursion.
    pub value: T,
}

pub fn lqr_solve<T: Real>(p: &LqrProblem<T>) -> Result<LqrSolution<T>, TrackerError> {
    p.check()?;
    let k_len = p.horizon();
    let half = T::lit(0.5);
    let xd = &p.x_des[k_len];
    let mut qt = p.q;
    let mut dt = scale(&mv(&p.q, xd), -T::one());
    let mut et = half_quad(&p.q, xd);
    let mut gains = vec![
        StageGain { g: [T::zero(); 2], h: T::zero(), s: [[T::zero(); 2]; 2], t: [T::zero(); 2] };
        k_len
    ];
    let at = transpose(&p.a);
    for k in (0..k_len).rev() {
        let qb = mv(&qt, &p.b);
        let denom = p.r + dot(&p.b, &qb);
        if !(denom > T::zero()) || !denom.is_finite() {
            return Err(TrackerError::Singular(k));
        }
        let pk = T::one() / denom;
        // B' Qt A as a row vector.
        let bqa = mv(&at, &qb);
        let g = scale(&bqa, -pk);
        let h = -pk * dot(&p.b, &add(&mv(&qt, &p.c[k]), &dt));
        let s = madd(&p.a, &outer(&p.b, &g));
        let t = add(&scale(&p.b, h), &p.c[k]);
        let st = transpose(&s);
        let xd = &p.x_des[k];
        let qxd = mv(&p.q, xd);
        let new_qt = madd(&madd(&p.q, &outer(&g, &scale(&g, p.r))), &mm(&st, &mm(&qt, &s)));
        let new_dt = add(
            &sub(&scale(&g, p.r * h), &qxd),
            &add(&mv(&st, &mv(&qt, &t)), &mv(&st, &dt)),
        );
        let new_et = half_quad(&p.q, xd) + half * p.r * h * h + half_quad(&qt, &t) + dot(&dt, &t) + et;
        qt = new_qt;
        dt = new_dt;
        et = new_et;
        gains[k] = StageGain { g, h, s, t };
    }
    let value = half_quad(&qt, &p.x0) + dot(&dt, &p.x0) + et;
    let mut x = Vec::with_capacity(k_len + 1);
    let mut u = Vec::with_capacity(k_len);
    x.push(p.x0);
    for (k, gk) in gains.iter().enumerate() {
        let uk = gk.control(&x[k]);
        u.push(uk);
        let next = add(&mv(&gk.s, &x[k]), &gk.t);
        x.push(next);
    }
    let cost = p.cost(&u);
    Ok(LqrSolution { u, x, cost, gains, value })
}

/// Saturates a single control for state `x` at step `k`: first to the
/// control range, then shaped so the bounded state component stays inside
/// its range where the control range allows it.
pub fn clamp_control<T: Real>(p: &LqrProblem<T>, k: usize, x: &Vec2<T>, u: T) -> T {
    let mut u = u.max(p.u_min).min(p.u_max);
    if let Some((lo, hi)) = p.x1_bounds {
        if p.b[1] != T::zero() {
            let free = mv(&p.a, x)[1] + p.c[k][1];
            let next = free + p.b[1] * u;
            if next > hi {
                u = (hi - free) / p.b[1];
            } else if next < lo {
                u = (lo - free) / p.b[1];
            }
            u = u.max(p.u_min).min(p.u_max);
        }
    }
    u
}

/// Clips every control to its bounds and re-propagates the states through the
/// true dynamics. Solutions already within bounds come back unchanged.
pub fn clamp_controls<T: Real>(sol: &LqrSolution<T>, p: &LqrProblem<T>) -> LqrSolution<T> {
    let mut x = vec![p.x0];
    let mut u = Vec::with_capacity(sol.u.len());
    let mut changed = false;
    for (k, &uk) in sol.u.iter().enumerate() {
        let c = clamp_control(p, k, &x[k], uk);
        changed |= c != uk;
        u.push(c);
        let next = p.step(k, &x[k], c);
        x.push(next);
    }
    if !changed {
        return sol.clone();
    }
    LqrSolution {
        cost: p.cost(&u),
        u,
        x,
        gains: sol.gains.clone(),
        value: sol.value,
    }
}

/// Weights, steps and bounds of both tracking problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerParams<T> {
    /// Control tick in seconds.
    pub dt: T,
    /// Spatial station spacing in metres.
    pub ds: T,
    pub wheelbase: T,
    pub q_s: T,
    pub q_v: T,
    pub r_lon: T,
    pub q_l: T,
    pub q_phi: T,
    pub r_lat: T,
    pub a_min: T,
    pub a_max: T,
    pub v_min: T,
    pub v_max: T,
    /// Front wheel angle range in radians.
    pub steer_min: T,
    pub steer_max: T,
    /// Longitudinal horizon in ticks.
    pub lon_horizon: usize,
    /// Lateral horizon in stations.
    pub lat_horizon: usize,
}

impl<T: Real> Default for TrackerParams<T> {
    fn default() -> Self {
        let steer = T::lit(30.0).to_radians();
        Self {
            dt: T::lit(0.03),
            ds: T::lit(0.5),
            wheelbase: T::lit(2.8),
            q_s: T::lit(4.0),
            q_v: T::lit(4.0),
            r_lon: T::one(),
            q_l: T::one(),
            q_phi: T::lit(10.0),
            r_lat: T::lit(1000.0),
            a_min: T::lit(-4.0),
            a_max: T::lit(3.0),
            v_min: T::zero(),
            v_max: T::lit(30.0),
            steer_min: -steer,
            steer_max: steer,
            lon_horizon: 200,
            lat_horizon: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonState<T> {
    pub s: T,
    pub v: T,
}

/// Lateral offset from the reference and heading relative to its tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatState<T> {
    pub l: T,
    pub phi: T,
}

/// Longitudinal problem on ticks `t0, t0 + dt, ...` against the path's time
/// profile.
pub fn build_lon_problem<T: Real>(
    state: LonState<T>,
    path: &ReferencePath<T>,
    t0: T,
    params: &TrackerParams<T>,
    k: usize,
) -> Result<LqrProblem<T>, TrackerError> {
    if k == 0 {
        return Err(TrackerError::EmptyHorizon);
    }
    let dt = params.dt;
    if !(dt > T::zero()) {
        return Err(TrackerError::NonPositiveStep);
    }
    let x_des = (0..=k)
        .map(|i| {
            let (s, v) = path.desired(t0 + T::from_usize_lossy(i) * dt);
            [s, v]
        })
        .collect();
    Ok(LqrProblem {
        a: [[T::one(), dt], [T::zero(), T::one()]],
        b: [T::zero(), dt],
        c: vec![[T::zero(); 2]; k],
        q: [[params.q_s, T::zero()], [T::zero(), params.q_v]],
        r: params.r_lon,
        x0: [state.s, state.v],
        x_des,
        u_min: params.a_min,
        u_max: params.a_max,
        x1_bounds: Some((params.v_min, params.v_max)),
    })
}

/// Lateral problem over `kappa.len()` stations spaced `ds` apart.
pub fn build_lat_problem_from_curvature<T: Real>(
    state: LatState<T>,
    kappa: &[T],
    params: &TrackerParams<T>,
) -> Result<LqrProblem<T>, TrackerError> {
    if kappa.is_empty() {
        return Err(TrackerError::EmptyHorizon);
    }
    let ds = params.ds;
    if !(ds > T::zero()) {
        return Err(TrackerError::NonPositiveStep);
    }
    Ok(LqrProblem {
        a: [[T::one(), ds], [T::zero(), T::one()]],
        b: [T::zero(), ds / params.wheelbase],
        c: kappa.iter().map(|&kp| [T::zero(), -ds * kp]).collect(),
        q: [[params.q_l, T::zero()], [T::zero(), params.q_phi]],
        r: params.r_lat,
        x0: [state.l, state.phi],
        x_des: vec![[T::zero(); 2]; kappa.len() + 1],
        u_min: params.steer_min,
        u_max: params.steer_max,
        x1_bounds: None,
    })
}

/// Lateral problem over `k` stations starting at road position `x0`.
pub fn build_lat_problem<T: Real>(
    state: LatState<T>,
    path: &ReferencePath<T>,
    x0: T,
    params: &TrackerParams<T>,
    k: usize,
) -> Result<LqrProblem<T>, TrackerError> {
    let kappa: Vec<T> = (0..k)
        .map(|i| path.at(x0 + T::from_usize_lossy(i) * params.ds).kappa)
        .collect();
    build_lat_problem_from_curvature(state, &kappa, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajgen::{build_reference_path, Waypoint};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense oracle: write every state as an affine function of the stacked
    /// controls and solve the normal equations of the resulting quadratic.
    fn dense_qp(p: &LqrProblem<f64>) -> (Vec<f64>, f64) {
        let k = p.horizon();
        let a = DMatrix::from_row_slice(2, 2, &[p.a[0][0], p.a[0][1], p.a[1][0], p.a[1][1]]);
        let b = DVector::from_row_slice(&p.b);
        // x_i = m_i u + f_i
        let mut m = vec![DMatrix::<f64>::zeros(2, k)];
        let mut f = vec![DVector::from_row_slice(&p.x0)];
        for i in 0..k {
            let mut mi = &a * &m[i];
            mi.set_column(i, &(mi.column(i) + &b));
            let fi = &a * &f[i] + DVector::from_row_slice(&p.c[i]);
            m.push(mi);
            f.push(fi);
        }
        let q = DMatrix::from_row_slice(2, 2, &[p.q[0][0], p.q[0][1], p.q[1][0], p.q[1][1]]);
        let mut hess = DMatrix::<f64>::identity(k, k) * p.r;
        let mut grad = DVector::<f64>::zeros(k);
        for i in 0..=k {
            let e = &f[i] - DVector::from_row_slice(&p.x_des[i]);
            hess += m[i].transpose() * &q * &m[i];
            grad += m[i].transpose() * &q * e;
        }
        let u = hess.cholesky().expect("positive definite").solve(&(-grad));
        let u: Vec<f64> = u.iter().copied().collect();
        let cost = p.cost(&u);
        (u, cost)
    }

    fn random_problem(rng: &mut ChaCha8Rng) -> LqrProblem<f64> {
        let k = rng.gen_range(1..=20);
        let mut g = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let l = [[g(-1.0, 1.0), g(-1.0, 1.0)], [g(-1.0, 1.0), g(-1.0, 1.0)]];
        // Q = L L' is symmetric positive semidefinite.
        let q = mm(&l, &transpose(&l));
        LqrProblem {
            a: [[g(0.5, 1.2), g(-0.5, 0.5)], [g(-0.5, 0.5), g(0.5, 1.2)]],
            b: [g(-1.0, 1.0), g(0.2, 1.5)],
            c: (0..k).map(|_| [g(-0.5, 0.5), g(-0.5, 0.5)]).collect(),
            q,
            r: g(0.05, 3.0),
            x0: [g(-3.0, 3.0), g(-3.0, 3.0)],
            x_des: (0..=k).map(|_| [g(-3.0, 3.0), g(-3.0, 3.0)]).collect(),
            u_min: -1e9,
            u_max: 1e9,
            x1_bounds: None,
        }
    }

    #[test]
    fn recursion_matches_dense_qp() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..150 {
            let p = random_problem(&mut rng);
            let sol = lqr_solve(&p).unwrap();
            let (u, cost) = dense_qp(&p);
            assert!((sol.cost - cost).abs() <= 1e-8 * cost.abs().max(1.0));
            assert!((sol.value - cost).abs() <= 1e-8 * cost.abs().max(1.0));
            for (a, b) in sol.u.iter().zip(&u) {
                assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0));
            }
            // The closed-loop map reproduces the open dynamics.
            for k in 0..p.horizon() {
                let x = p.step(k, &sol.x[k], sol.u[k]);
                assert!((x[0] - sol.x[k + 1][0]).abs() < 1e-12 * x[0].abs().max(1.0));
                assert!((x[1] - sol.x[k + 1][1]).abs() < 1e-12 * x[1].abs().max(1.0));
            }
        }
    }

    #[test]
    fn perturbing_any_control_never_helps() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let p = random_problem(&mut rng);
            let sol = lqr_solve(&p).unwrap();
            for k in 0..sol.u.len() {
                for d in [1e-3, -1e-3] {
                    let mut u = sol.u.clone();
                    u[k] += d;
                    assert!(p.cost(&u) >= sol.cost - 1e-12 * sol.cost.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn scalar_like_toy() {
        // Second state decoupled and unweighted: reduces to A=1, B=1, Q=1, R=1, K=2.
        let p = LqrProblem {
            a: [[1.0, 0.0], [0.0, 1.0]],
            b: [1.0, 0.0],
            c: vec![[0.0; 2]; 2],
            q: [[1.0, 0.0], [0.0, 0.0]],
            r: 1.0,
            x0: [1.0, 0.0],
            x_des: vec![[0.0; 2]; 3],
            u_min: -10.0,
            u_max: 10.0,
            x1_bounds: None,
        };
        let sol = lqr_solve(&p).unwrap();
        let (u, cost) = dense_qp(&p);
        assert_abs_diff_eq!(sol.u[0], u[0], epsilon = 1e-9);
        assert_abs_diff_eq!(sol.u[1], u[1], epsilon = 1e-9);
        assert_abs_diff_eq!(sol.cost, cost, epsilon = 1e-9);
        // By hand: u = (-3/5, -1/5), cost 4/5.
        assert_abs_diff_eq!(sol.u[0], -0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.u[1], -0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.cost, 0.8, epsilon = 1e-12);
    }

    fn straight(v: f64) -> ReferencePath<f64> {
        build_reference_path(
            &[Waypoint { t: 0.0, s: 0.0, y: 0.0 }, Waypoint { t: 3.0, s: 3.0 * v, y: 0.0 }],
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn longitudinal_on_reference_needs_no_control() {
        let params = TrackerParams::default();
        let p = build_lon_problem(LonState { s: 0.0, v: 17.5 }, &straight(17.5), 0.0, &params, 100).unwrap();
        assert_eq!(p.a, [[1.0, 0.03], [0.0, 1.0]]);
        assert_eq!(p.b, [0.0, 0.03]);
        assert_eq!((p.u_min, p.u_max), (-4.0, 3.0));
        let sol = lqr_solve(&p).unwrap();
        assert!(sol.u.iter().all(|u| u.abs() < 1e-9));
        assert!(sol.cost.abs() < 1e-12);
    }

    #[test]
    fn lateral_zero_case_steers_nothing() {
        let params = TrackerParams::default();
        let p = build_lat_problem(LatState { l: 0.0, phi: 0.0 }, &straight(20.0), 0.0, &params, 120).unwrap();
        assert_abs_diff_eq!(p.b[1], 0.5 / 2.8);
        assert!(p.c.iter().all(|c| *c == [0.0, 0.0]));
        let sol = lqr_solve(&p).unwrap();
        assert!(sol.u.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn lateral_lane_change_is_tracked() {
        // Reference path shifted 3 m over 62.5 m, vehicle starts on it.
        let path = build_reference_path(
            &[
                Waypoint { t: 0.0, s: 0.0, y: 0.0 },
                Waypoint { t: 3.0, s: 62.5, y: 3.0 },
                Waypoint { t: 6.0, s: 125.0, y: 3.0 },
            ],
            0.5,
        )
        .unwrap();
        let params = TrackerParams::default();
        let p = build_lat_problem(LatState { l: 0.0, phi: 0.0 }, &path, 0.0, &params, 250).unwrap();
        let sol = lqr_solve(&p).unwrap();
        let (u, _) = dense_qp(&p);
        for (a, b) in sol.u.iter().zip(&u) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert!(sol.x.last().unwrap()[0].abs() < 0.05);
        assert!(sol.x.iter().all(|x| x[0].abs() < 0.05));
    }

    #[test]
    fn clamping() {
        let params = TrackerParams::default();
        // Far behind the reference: the unconstrained solution wants more than 3 m/s^2.
        let p = build_lon_problem(LonState { s: -40.0, v: 17.5 }, &straight(17.5), 0.0, &params, 100).unwrap();
        let sol = lqr_solve(&p).unwrap();
        assert!(sol.u.iter().any(|&u| u > 3.0));
        let c = clamp_controls(&sol, &p);
        assert!(c.u.iter().all(|&u| (-4.0..=3.0).contains(&u)));
        assert_eq!(c.x, p.rollout(&c.u));

        // Within bounds: unchanged.
        let p = build_lon_problem(LonState { s: -0.5, v: 17.5 }, &straight(17.5), 0.0, &params, 100).unwrap();
        let sol = lqr_solve(&p).unwrap();
        assert_eq!(clamp_controls(&sol, &p), sol);

        // Hard braking demand is cut to the lower bound.
        assert_eq!(clamp_control(&p, 0, &[0.0, 17.5], -6.0), -4.0);
        // At top speed a positive demand is reduced to hold it.
        let top = [0.0, params.v_max];
        assert_abs_diff_eq!(clamp_control(&p, 0, &top, 2.0), 0.0);
    }

    #[test]
    fn generic_over_f32() {
        let p = LqrProblem::<f32> {
            a: [[1.0, 0.1], [0.0, 1.0]],
            b: [0.0, 0.1],
            c: vec![[0.0; 2]; 10],
            q: [[1.0, 0.0], [0.0, 1.0]],
            r: 1.0,
            x0: [1.0, 0.0],
            x_des: vec![[0.0; 2]; 11],
            u_min: -1.0,
            u_max: 1.0,
            x1_bounds: None,
        };
        let sol = lqr_solve(&p).unwrap();
        assert!(sol.u[0] < 0.0);
        assert!((sol.cost - sol.value).abs() < 1e-4);
    }

    #[test]
    fn malformed_problems() {
        let mut p = random_problem(&mut ChaCha8Rng::seed_from_u64(1));
        p.x_des.pop();
        assert!(matches!(lqr_solve(&p), Err(TrackerError::Length { .. })));
        let mut p = random_problem(&mut ChaCha8Rng::seed_from_u64(1));
        p.r = 0.0;
        assert_eq!(lqr_solve(&p).unwrap_err(), TrackerError::NonPositiveControlWeight);
        assert!(build_lat_problem_from_curvature(LatState { l: 0.0, phi: 0.0 }, &[], &TrackerParams::default()).is_err());
    }
}
