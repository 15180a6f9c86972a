//! A tiny production plan solved as an LP, then again with an on/off
//! decision as a binary.

use storage_risk_lp::{solve_lp, solve_milp, LinearExpr, LpModel, Relation, Sense, Status};

fn main() {
    let mut m = LpModel::new();
    let a = m.add_var("a", 0.0, 40.0);
    let b = m.add_var("b", 0.0, f64::INFINITY);
    m.add_constraint("demand", LinearExpr::from(a) + b, Relation::Ge, 60.0);
    m.add_constraint("blend", LinearExpr::term(a, 1.0) + LinearExpr::term(b, -2.0), Relation::Le, 10.0);
    m.set_objective(LinearExpr::term(a, 3.0) + LinearExpr::term(b, 5.0), Sense::Minimize);

    let sol = solve_lp(&m, 1e-9).expect("well-formed model");
    assert_eq!(sol.status, Status::Optimal);
    println!("lp: cost {:.3}, a {:.3}, b {:.3}", sol.objective, sol.values[0], sol.values[1]);
    println!("    demand dual {:.3}, {} iterations", sol.duals[0], sol.iterations);

    // unit a only runs if switched on, which costs a fixed 30
    let on = m.add_binary("on");
    m.add_constraint("link", LinearExpr::term(a, 1.0) + LinearExpr::term(on, -40.0), Relation::Le, 0.0);
    m.set_objective(
        LinearExpr::term(a, 3.0) + LinearExpr::term(b, 5.0) + LinearExpr::term(on, 30.0),
        Sense::Minimize,
    );
    let sol = solve_milp(&m, 1e-9, 1e-9).expect("well-formed model");
    println!(
        "milp: cost {:.3}, a {:.3}, b {:.3}, on {}, {} nodes",
        sol.objective, sol.values[0], sol.values[1], sol.values[2], sol.nodes
    );
}
