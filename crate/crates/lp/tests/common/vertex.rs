// Brute-force LP oracle: enumerate every basic point of a small model.
//
// Infinite bounds are replaced by an artificial box of half-width `big`.
// A bounded LP has all its vertices well inside the box, so solving at two
// box sizes and comparing tells bounded from unbounded.

use rand::Rng;
use storage_risk_lp::{LinearExpr, LpModel, Relation, Sense, VarId};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oracle {
    Infeasible,
    Unbounded,
    Optimal(f64),
}

/// One inequality `a.x <= b` (equalities become two of these).
struct Half {
    a: Vec<f64>,
    b: f64,
}

fn halfspaces(model: &LpModel, big: f64) -> (Vec<Half>, Vec<usize>) {
    let n = model.num_vars();
    let mut hs = Vec::new();
    let mut eqs = Vec::new();
    for c in model.constraints() {
        let mut a = vec![0.0; n];
        for &(v, k) in c.expr.terms() {
            a[v.0] += k;
        }
        match c.relation {
            Relation::Le => hs.push(Half { a, b: c.rhs }),
            Relation::Ge => hs.push(Half {
                a: a.iter().map(|x| -x).collect(),
                b: -c.rhs,
            }),
            Relation::Eq => {
                eqs.push(hs.len());
                hs.push(Half {
                    a: a.iter().map(|x| -x).collect(),
                    b: -c.rhs,
                });
                hs.push(Half { a, b: c.rhs });
            }
        }
    }
    for (j, v) in model.vars().iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let up = if v.upper.is_finite() { v.upper } else { big };
        let lo = if v.lower.is_finite() { v.lower } else { -big };
        hs.push(Half { a: e.clone(), b: up });
        hs.push(Half {
            a: e.iter().map(|x| -x).collect(),
            b: -lo,
        });
    }
    (hs, eqs)
}

fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let p = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[p][col].abs() < 1e-9 {
            return None;
        }
        m.swap(col, p);
        rhs.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for k in col..n {
                        m[r][k] -= f * m[col][k];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

fn best_vertex(model: &LpModel, big: f64) -> Option<f64> {
    let n = model.num_vars();
    let (hs, _) = halfspaces(model, big);
    let sign = if model.sense() == Sense::Maximize { -1.0 } else { 1.0 };
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    if n == 0 {
        let feasible = hs.iter().all(|h| h.b >= -1e-9);
        return feasible.then(|| model.objective().constant_term());
    }
    loop {
        let m: Vec<Vec<f64>> = subset.iter().map(|&i| hs[i].a.clone()).collect();
        let r: Vec<f64> = subset.iter().map(|&i| hs[i].b).collect();
        if let Some(x) = solve_square(m, r) {
            let ok = hs.iter().all(|h| {
                let act: f64 = h.a.iter().zip(&x).map(|(a, b)| a * b).sum();
                let scale: f64 = 1.0 + h.a.iter().zip(&x).map(|(a, b)| (a * b).abs()).sum::<f64>();
                act <= h.b + 1e-9 * scale
            });
            if ok {
                let obj = sign * model.objective_value(&x);
                if best.is_none_or(|b| obj < b) {
                    best = Some(obj);
                }
            }
        }
        // next n-combination of hs.len()
        let k = hs.len();
        let mut i = n;
        loop {
            if i == 0 {
                return best.map(|b| sign * b);
            }
            i -= 1;
            if subset[i] < k - n + i {
                subset[i] += 1;
                for t in i + 1..n {
                    subset[t] = subset[t - 1] + 1;
                }
                break;
            }
        }
    }
}

pub fn brute_force(model: &LpModel) -> Oracle {
    let near = best_vertex(model, 1e7);
    let far = best_vertex(model, 1e8);
    match (near, far) {
        (None, _) | (_, None) => Oracle::Infeasible,
        (Some(a), Some(b)) => {
            if (a - b).abs() > 1e-6 * (1.0 + a.abs()) {
                Oracle::Unbounded
            } else {
                Oracle::Optimal(a)
            }
        }
    }
}

/// Small integer-data LP with up to 4 variables and 6 rows.
pub fn random_lp<R: Rng>(rng: &mut R) -> LpModel {
    let n = rng.random_range(1..=4);
    let rows = rng.random_range(0..=6);
    let mut m = LpModel::new();
    let vars: Vec<VarId> = (0..n)
        .map(|j| {
            let (lo, up) = match rng.random_range(0..10) {
                0 => (f64::NEG_INFINITY, f64::INFINITY),
                1 => (f64::NEG_INFINITY, rng.random_range(-3..=8) as f64),
                2..=4 => (0.0, f64::INFINITY),
                _ => {
                    let lo = rng.random_range(-5..=3) as f64;
                    (lo, lo + rng.random_range(0..=10) as f64)
                }
            };
            m.add_var(format!("x{j}"), lo, up)
        })
        .collect();
    for i in 0..rows {
        let mut e = LinearExpr::new();
        for &v in &vars {
            if rng.random_bool(0.7) {
                e.add_term(v, rng.random_range(-5..=5) as f64);
            }
        }
        let rel = match rng.random_range(0..7) {
            0 => Relation::Eq,
            1 | 2 => Relation::Ge,
            _ => Relation::Le,
        };
        m.add_constraint(format!("r{i}"), e, rel, rng.random_range(-10..=10) as f64);
    }
    let obj = LinearExpr::from_terms(vars.iter().map(|&v| (v, rng.random_range(-6..=6) as f64)));
    let sense = if rng.random_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
    m.set_objective(obj, sense);
    m
}
