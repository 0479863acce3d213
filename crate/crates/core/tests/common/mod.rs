//! Random tiny planning instances and a brute-force reference solver.

#![allow(dead_code)]

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vswarm::grid::{centered_lanes, CellIndex, MovingGrid};
use vswarm::planner::{validate_plan, HvForecast, HvTrack, PlannerWeights};
use vswarm::traffic::{forecast_cells, DetectionRule, VehicleKind, VehicleState};

pub type Q = Ratio<i64>;

pub struct Instance {
    pub grid: MovingGrid<f64>,
    pub init: Vec<CellIndex>,
    pub forecast: HvForecast,
    pub weights: PlannerWeights<Q>,
    pub delta: Vec<bool>,
    pub n_steps: usize,
}

fn ratio(rng: &mut ChaCha8Rng, max: i64) -> Q {
    Q::new(rng.gen_range(0..=max), rng.gen_range(1..=4))
}

/// At most 2 CAVs, 4 rows, 3 lanes and 4 steps. Half the forecasts come
/// from constant-velocity HVs with lane-event detection, half are arbitrary
/// cell tracks.
pub fn tiny_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_rows = rng.gen_range(2..=4);
    let n_cols = rng.gen_range(1..=3);
    let n_cav = rng.gen_range(1..=2);
    let n_steps = rng.gen_range(2..=4);
    let lanes = centered_lanes(n_cols, 3.0);
    let grid = MovingGrid::new(0.0, 0.0, 17.5, n_rows, 10.0, 3.0, lanes.clone()).unwrap();

    let mut init: Vec<CellIndex> = Vec::new();
    while init.len() < n_cav {
        let c = CellIndex::new(rng.gen_range(1..=n_rows), rng.gen_range(1..=n_cols));
        if !init.contains(&c) {
            init.push(c);
        }
    }

    let n_hv = rng.gen_range(0..=2);
    let forecast = if rng.gen_bool(0.5) {
        let hvs: Vec<VehicleState<f64>> = (0..n_hv)
            .map(|j| {
                let lane = rng.gen_range(1..=n_cols);
                VehicleState {
                    id: 100 + j,
                    kind: VehicleKind::Hv,
                    s: rng.gen_range(0.5..n_rows as f64 * 10.0 - 0.5),
                    y: lanes[lane - 1],
                    v: rng.gen_range(10.0..25.0),
                    a: 0.0,
                    lane,
                }
            })
            .collect();
        let platoon_col = init[0].col;
        let front = hvs.iter().filter(|h| h.lane == platoon_col).map(|h| h.id).next();
        let rule = DetectionRule { platoon_col, front_hv_id: front, enabled: rng.gen_bool(0.7) };
        forecast_cells(&hvs, &grid, n_steps, 3.0, rule).unwrap()
    } else {
        let hvs = (0..n_hv)
            .map(|j| HvTrack {
                id: 100 + j,
                cells: (0..n_steps)
                    .map(|_| {
                        rng.gen_bool(0.7)
                            .then(|| CellIndex::new(rng.gen_range(1..=n_rows), rng.gen_range(1..=n_cols)))
                    })
                    .collect(),
            })
            .collect();
        HvForecast { steps: n_steps, hvs, detected_lane_events: vec![], front_hv: None }
    };

    let weights = PlannerWeights {
        w_tar: ratio(&mut rng, 20),
        w_lon: ratio(&mut rng, 5),
        w_lat: ratio(&mut rng, 10),
        l_index: rng.gen_range(1..=n_cols),
        delta: rng.gen_bool(0.5),
    };
    let delta = (0..n_steps).map(|_| rng.gen_bool(0.5)).collect();
    Instance { grid, init, forecast, weights, delta, n_steps }
}

/// The cost written directly over the occupancy indicators: forward target,
/// squared row and column changes, and the squared distance of the column
/// number from the regrouping lane.
pub fn reference_cost(inst: &Instance, cells: &[Vec<CellIndex>]) -> Q {
    let w = &inst.weights;
    let rows = inst.grid.n_rows;
    let cols = inst.grid.n_cols;
    let target = rows.saturating_sub(cells.len());
    let one_hot = |n: usize, at: usize| -> Vec<i64> { (1..=n).map(|p| i64::from(p == at)).collect() };
    let sq_diff = |a: &[i64], b: &[i64]| -> i64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
    let mut total = Q::from(0);
    for seq in cells {
        for (k0, c) in seq.iter().enumerate() {
            let r = one_hot(rows, c.row);
            let hits: i64 = r[..target].iter().map(|x| x * x).sum();
            total += w.w_tar * Q::from(hits);
            if !inst.delta[k0] {
                let d = w.l_index as i64 - c.col as i64;
                total += w.w_lat * Q::from(d * d);
            }
            if let Some(next) = seq.get(k0 + 1) {
                total += w.w_lon * Q::from(sq_diff(&r, &one_hot(rows, next.row)));
                if inst.delta[k0] {
                    total += w.w_lat * Q::from(sq_diff(&one_hot(cols, c.col), &one_hot(cols, next.col)));
                }
            }
        }
    }
    total
}

/// Every cell path starting at `start` that moves at most one row or one
/// lane per step, never both.
fn paths(start: CellIndex, n_steps: usize, rows: usize, cols: usize) -> Vec<Vec<CellIndex>> {
    let mut out = vec![vec![start]];
    for _ in 1..n_steps {
        let mut next = Vec::new();
        for p in &out {
            let c = *p.last().unwrap();
            let moves = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)];
            for (dr, dc) in moves {
                let (r, q) = (c.row as i64 + dr, c.col as i64 + dc);
                if r >= 1 && r <= rows as i64 && q >= 1 && q <= cols as i64 {
                    let mut p = p.clone();
                    p.push(CellIndex::new(r as usize, q as usize));
                    next.push(p);
                }
            }
        }
        out = next;
    }
    out
}

/// Minimum reference cost over all feasible plans, with the plans that
/// attain it; `None` when nothing is feasible.
pub fn brute_force(inst: &Instance) -> Option<(Q, Vec<Vec<Vec<CellIndex>>>)> {
    let per_cav: Vec<Vec<Vec<CellIndex>>> = inst
        .init
        .iter()
        .map(|&c| paths(c, inst.n_steps, inst.grid.n_rows, inst.grid.n_cols))
        .collect();
    let mut best: Option<(Q, Vec<Vec<Vec<CellIndex>>>)> = None;
    let mut idx = vec![0usize; per_cav.len()];
    loop {
        let plan: Vec<Vec<CellIndex>> = idx.iter().zip(&per_cav).map(|(&i, p)| p[i].clone()).collect();
        if validate_plan(&plan, &inst.grid, &inst.forecast, &inst.init).is_empty() {
            let cost = reference_cost(inst, &plan);
            match &mut best {
                Some((b, plans)) if cost == *b => plans.push(plan),
                Some((b, _)) if cost > *b => {}
                _ => best = Some((cost, vec![plan])),
            }
        }
        // Odometer over the per-CAV path lists.
        let mut i = 0;
        loop {
            if i == idx.len() {
                return best;
            }
            idx[i] += 1;
            if idx[i] < per_cav[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Minimizer and cost of an affine LQR problem solved as one dense least
/// squares problem: every state is an affine map of the stacked controls,
/// the weighted residuals are stacked and solved by SVD.
pub fn dense_qp(p: &vswarm::tracker::LqrProblem<f64>) -> (Vec<f64>, f64) {
    use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
    let k = p.horizon();
    let a = DMatrix::from_row_slice(2, 2, &[p.a[0][0], p.a[0][1], p.a[1][0], p.a[1][1]]);
    let b = DVector::from_row_slice(&p.b);
    let mut m = vec![DMatrix::<f64>::zeros(2, k)];
    let mut f = vec![DVector::from_row_slice(&p.x0)];
    for i in 0..k {
        let mut mi = &a * &m[i];
        mi.set_column(i, &(mi.column(i) + &b));
        f.push(&a * &f[i] + DVector::from_row_slice(&p.c[i]));
        m.push(mi);
    }
    // Symmetric square root of Q, which may be singular.
    let eig = SymmetricEigen::new(Matrix2::new(p.q[0][0], p.q[0][1], p.q[1][0], p.q[1][1]));
    let root = eig.eigenvectors
        * Matrix2::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    let root = DMatrix::from_iterator(2, 2, root.iter().copied());
    // Half of |J u + e|^2 is the cost.
    let rows = 2 * (k + 1) + k;
    let mut jac = DMatrix::<f64>::zeros(rows, k);
    let mut res = DVector::<f64>::zeros(rows);
    for i in 0..=k {
        jac.view_mut((2 * i, 0), (2, k)).copy_from(&(&root * &m[i]));
        res.rows_mut(2 * i, 2).copy_from(&(&root * (&f[i] - DVector::from_row_slice(&p.x_des[i]))));
    }
    for i in 0..k {
        jac[(2 * (k + 1) + i, i)] = p.r.sqrt();
    }
    let u = jac.clone().svd(true, true).solve(&(-&res), 1e-14).expect("least squares");
    let cost = 0.5 * (&jac * &u + &res).norm_squared();
    (u.iter().copied().collect(), cost)
}
