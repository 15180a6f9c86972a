use proptest::prelude::*;
use storage_risk_lp::{canonical_dump, parse_model, LinearExpr, LpModel, Relation, Sense, VarId, VarKind, Variable};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        (-1e6f64..1e6),
        (-1e-6f64..1e-6),
        any::<i32>().prop_map(|v| v as f64),
        Just(0.1),
        Just(1.0 / 3.0),
    ]
}

fn model() -> impl Strategy<Value = LpModel> {
    let var = (
        "[a-z][a-z0-9_\\[\\],@]{0,8}",
        prop_oneof![Just(f64::NEG_INFINITY), finite()],
        prop_oneof![Just(f64::INFINITY), finite()],
        any::<bool>(),
    );
    (prop::collection::vec(var, 0..8), any::<bool>()).prop_flat_map(|(vars, max)| {
        let n = vars.len();
        let term = (0..n.max(1), finite());
        let row = (
            "[A-Za-z][A-Za-z0-9_.]{0,6}",
            prop::collection::vec((0..n.max(1), finite()), 0..5),
            0..3u8,
            finite(),
        );
        (
            Just(vars),
            Just(max),
            prop::collection::vec(row, 0..6),
            prop::collection::vec(term, 0..5),
            finite(),
        )
            .prop_map(move |(vars, max, rows, obj, k)| {
                let mut m = LpModel::new();
                for (name, a, b, bin) in vars {
                    let (lower, upper) = if a <= b { (a, b) } else { (b, a) };
                    m.push_var(Variable {
                        name,
                        lower,
                        upper,
                        kind: if bin { VarKind::Binary } else { VarKind::Continuous },
                    });
                }
                if n > 0 {
                    for (name, terms, rel, rhs) in rows {
                        let e = LinearExpr::from_terms(terms.into_iter().map(|(j, c)| (VarId(j), c)));
                        let rel = [Relation::Le, Relation::Eq, Relation::Ge][rel as usize];
                        m.add_constraint(name, e, rel, rhs);
                    }
                    let mut o = LinearExpr::from_terms(obj.into_iter().map(|(j, c)| (VarId(j), c)));
                    o.add_constant(k);
                    m.set_objective(o, if max { Sense::Maximize } else { Sense::Minimize });
                }
                m
            })
    })
}

proptest! {
    #[test]
    fn parse_inverts_dump(m in model()) {
        let text = canonical_dump(&m);
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(canonical_dump(&back), text);
    }
}
