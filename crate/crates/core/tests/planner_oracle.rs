mod common;

use common::{brute_force, reference_cost, tiny_instance, Q};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vswarm::grid::{centered_lanes, CellIndex, MovingGrid};
use vswarm::planner::{build_program, build_program_with_delta, solve, validate_plan, HvForecast, PlannerError, PlannerWeights, SolveLimits};

#[test]
fn branch_and_bound_matches_enumeration() {
    let (mut feasible, mut infeasible, mut seed) = (0, 0, 0u64);
    while feasible < 250 {
        seed += 1;
        let inst = tiny_instance(seed);
        let Ok(program) = build_program_with_delta(&inst.grid, &inst.init, &inst.forecast, &inst.weights, &inst.delta, inst.n_steps)
        else {
            continue;
        };
        let oracle = brute_force(&inst);
        match solve(&program, SolveLimits::default()) {
            Ok((plan, _)) => {
                let (best, argmins) = oracle.unwrap_or_else(|| panic!("seed {seed}: solver found a plan, enumeration none"));
                assert_eq!(plan.objective, best, "seed {seed}");
                assert_eq!(reference_cost(&inst, &plan.cells), best, "seed {seed}");
                // Ties go to the lexicographically smallest variable vector.
                let lex_first = argmins.iter().min_by_key(|c| program.assignment_for(c)).unwrap();
                assert_eq!(&plan.cells, lex_first, "seed {seed}");
                assert!(validate_plan(&plan.cells, &inst.grid, &inst.forecast, &inst.init).is_empty());
                feasible += 1;
            }
            Err(PlannerError::Infeasible { .. }) => {
                assert!(oracle.is_none(), "seed {seed}: enumeration found {:?}", oracle.map(|o| o.0));
                infeasible += 1;
            }
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    println!("{feasible} feasible, {infeasible} infeasible instances");
}

#[test]
fn linearized_objective_equals_quadratic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for seed in 1..400 {
        let inst = tiny_instance(seed);
        let Ok(program) = build_program_with_delta(&inst.grid, &inst.init, &inst.forecast, &inst.weights, &inst.delta, inst.n_steps)
        else {
            continue;
        };
        // Arbitrary cells, feasible or not.
        for _ in 0..20 {
            let cells: Vec<Vec<CellIndex>> = inst
                .init
                .iter()
                .map(|_| {
                    (0..inst.n_steps)
                        .map(|_| CellIndex::new(rng.gen_range(1..=inst.grid.n_rows), rng.gen_range(1..=inst.grid.n_cols)))
                        .collect()
                })
                .collect();
            let x = program.assignment_for(&cells);
            assert_eq!(program.evaluate(&x), reference_cost(&inst, &cells), "seed {seed}");
            checked += 1;
        }
    }
    assert!(checked > 1000);
}

#[test]
fn solving_twice_gives_the_same_plan() {
    for seed in 1..60 {
        let inst = tiny_instance(seed);
        let Ok(program) = build_program_with_delta(&inst.grid, &inst.init, &inst.forecast, &inst.weights, &inst.delta, inst.n_steps)
        else {
            continue;
        };
        let a = solve(&program, SolveLimits::default()).map(|(p, _)| p.cells);
        let b = solve(&program, SolveLimits::default()).map(|(p, _)| p.cells);
        assert_eq!(a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lone_cav_never_drops_back(rows in 2usize..6, cols in 1usize..4, start in 1usize..6, col in 1usize..4, n in 2usize..5,
                                 w_tar in 1i64..20, w_lon in 0i64..5, w_lat in 0i64..10, delta: bool) {
        let start = start.min(rows);
        let col = col.min(cols);
        let grid = MovingGrid::new(0.0, 0.0, 17.5, rows, 10.0, 3.0, centered_lanes(cols, 3.0)).unwrap();
        let w = PlannerWeights { w_tar: Q::from(w_tar), w_lon: Q::from(w_lon), w_lat: Q::from(w_lat), l_index: 1, delta };
        let init = [CellIndex::new(start, col)];
        let p = build_program(&grid, &init, &HvForecast::empty(n), &w, n).unwrap();
        let (plan, _) = solve(&p, SolveLimits::default()).unwrap();
        prop_assert!(plan.cells[0].windows(2).all(|s| s[1].row >= s[0].row), "{:?}", plan.cells[0]);
    }
}
