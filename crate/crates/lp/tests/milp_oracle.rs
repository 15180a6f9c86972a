#[allow(dead_code)]
mod common {
    pub mod vertex;
}

use common::vertex::{brute_force, Oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storage_risk_lp::{solve_lp, solve_milp, LinearExpr, LpModel, Relation, Sense, Status, VarId};

/// Fix every binary in turn and take the best continuous optimum.
fn enumerate(model: &LpModel, bins: &[VarId]) -> Oracle {
    let mut best: Option<f64> = None;
    let sign = if model.sense() == Sense::Maximize { -1.0 } else { 1.0 };
    for mask in 0..(1u32 << bins.len()) {
        let mut fixed = model.relaxed();
        for (k, &b) in bins.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            fixed.set_bounds(b, v, v);
        }
        match brute_force(&fixed) {
            Oracle::Unbounded => return Oracle::Unbounded,
            Oracle::Infeasible => {}
            Oracle::Optimal(o) => {
                if best.is_none_or(|b| sign * o < sign * b) {
                    best = Some(o);
                }
            }
        }
    }
    best.map_or(Oracle::Infeasible, Oracle::Optimal)
}

#[test]
fn random_mixed_binary_programs_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..120 {
        let mut m = LpModel::new();
        let nb = rng.random_range(1..=3);
        let nc = rng.random_range(0..=2);
        let bins: Vec<VarId> = (0..nb).map(|k| m.add_binary(format!("b{k}"))).collect();
        let conts: Vec<VarId> = (0..nc)
            .map(|k| m.add_var(format!("c{k}"), 0.0, rng.random_range(1..=8) as f64))
            .collect();
        let all: Vec<VarId> = bins.iter().chain(&conts).copied().collect();
        for i in 0..rng.random_range(1..=4) {
            let e = LinearExpr::from_terms(all.iter().map(|&v| (v, rng.random_range(-4..=4) as f64)));
            let rel = if rng.random_bool(0.7) { Relation::Le } else { Relation::Ge };
            m.add_constraint(format!("r{i}"), e, rel, rng.random_range(-3..=6) as f64 + 0.5);
        }
        let obj = LinearExpr::from_terms(all.iter().map(|&v| (v, rng.random_range(-5..=5) as f64)));
        m.set_objective(obj, if rng.random_bool(0.5) { Sense::Minimize } else { Sense::Maximize });

        let sol = solve_milp(&m, 1e-7, 1e-9).unwrap();
        match enumerate(&m, &bins) {
            Oracle::Infeasible => assert_eq!(sol.status, Status::Infeasible, "case {case}"),
            Oracle::Unbounded => unreachable!("all variables are boxed"),
            Oracle::Optimal(o) => {
                assert_eq!(sol.status, Status::Optimal, "case {case}");
                assert!((sol.objective - o).abs() <= 1e-7 * (1.0 + o.abs()), "case {case}");
                for &b in &bins {
                    let v = sol.values[b.0];
                    assert!(v == 0.0 || v == 1.0 || (v - v.round()).abs() < 1e-7);
                }
                // the relaxation bounds the integer optimum
                let relax = solve_lp(&m.relaxed(), 1e-7).unwrap();
                let better = match m.sense() {
                    Sense::Minimize => relax.objective <= sol.objective + 1e-7,
                    Sense::Maximize => relax.objective >= sol.objective - 1e-7,
                };
                assert!(better, "case {case}");
            }
        }
    }
}

#[test]
fn two_binary_knapsack() {
    let mut m = LpModel::new();
    let x = m.add_binary("x");
    let y = m.add_binary("y");
    m.add_constraint("one", x + y, Relation::Le, 1.0);
    m.set_objective(x * 3.0 + y * 2.0, Sense::Maximize);
    let s = solve_milp(&m, 1e-7, 1e-6).unwrap();
    assert_eq!(s.values, vec![1.0, 0.0]);
    assert_eq!(s.objective, 3.0);
}

#[test]
fn binaries_fixed_by_bounds_reduce_to_lp() {
    let mut m = LpModel::new();
    let on = m.add_binary("on");
    m.set_bounds(on, 1.0, 1.0);
    let p = m.add_var("p", 0.0, 20.0);
    m.add_constraint("cap", LinearExpr::from(p) - on * 12.0, Relation::Le, 0.0);
    m.set_objective(LinearExpr::from(p) * -1.0, Sense::Minimize);
    let mixed = solve_milp(&m, 1e-7, 1e-6).unwrap();
    let lp = solve_lp(&m.relaxed(), 1e-7).unwrap();
    assert_eq!(mixed.objective, lp.objective);
    assert_eq!(mixed.values, lp.values);
}

#[test]
fn equality_unreachable_with_binaries() {
    let mut m = LpModel::new();
    let x = m.add_binary("x");
    let y = m.add_binary("y");
    m.add_constraint("half", x + y, Relation::Eq, 1.5);
    m.set_objective(x + y, Sense::Minimize);
    assert_eq!(solve_milp(&m, 1e-7, 1e-6).unwrap().status, Status::Infeasible);
}
