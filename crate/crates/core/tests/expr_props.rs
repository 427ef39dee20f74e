//! Property suite for the expression algebra: parse/print round-trips,
//! value preservation under canonicalization and expansion, and the
//! sign-normalization laws.

use autosindy::expr::{parse, Expr, UnaryOp};
use nalgebra::DMatrix;
use proptest::prelude::*;

const DIM: usize = 3;

fn leaf() -> BoxedStrategy<Expr> {
    prop_oneof![
        (-3.0f64..3.0).prop_map(Expr::constant),
        (0..DIM).prop_map(Expr::variable),
    ]
    .boxed()
}

fn arb_expr() -> BoxedStrategy<Expr> {
    leaf().prop_recursive(4, 48, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::div(a, b)),
            (inner.clone(), 2u32..4).prop_map(|(a, k)| Expr::pow(a, k)),
            inner.clone().prop_map(Expr::sin),
            inner.clone().prop_map(Expr::cos),
            inner.prop_map(Expr::exp),
        ]
    })
    .boxed()
}

fn arb_states() -> BoxedStrategy<DMatrix<f64>> {
    proptest::collection::vec(-2.0f64..2.0, 4 * DIM)
        .prop_map(|v| DMatrix::from_row_slice(4, DIM, &v))
        .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_roundtrips_canonical_form(e in arb_expr()) {
        let text = e.to_string();
        let back = parse(&text, DIM).unwrap_or_else(|err| panic!("{err} in `{text}`"));
        prop_assert_eq!(back, e);
    }

    #[test]
    fn canonicalization_is_idempotent(e in arb_expr()) {
        prop_assert_eq!(e.simplified(), e);
    }

    #[test]
    fn simplify_preserves_values(e in arb_expr(), states in arb_states()) {
        let a = e.evaluate(&states).unwrap();
        let b = e.simplified().evaluate(&states).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            if x.is_finite() && y.is_finite() {
                let scale = x.abs().max(1.0);
                prop_assert!((x - y).abs() <= 1e-10 * scale, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn expansion_preserves_values(e in arb_expr(), states in arb_states()) {
        let a = e.evaluate(&states).unwrap();
        let b = e.expand_full().evaluate(&states).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            if x.is_finite() && y.is_finite() && x.abs() < 1e12 {
                let scale = x.abs().max(1.0);
                prop_assert!((x - y).abs() <= 1e-8 * scale, "{x} vs {y} for {e}");
            }
        }
    }

    #[test]
    fn sign_normalize_is_idempotent(e in arb_expr()) {
        let once = e.sign_normalize();
        prop_assert_eq!(once.sign_normalize(), once);
    }

    #[test]
    fn count_ops_ignores_global_sign(e in arb_expr()) {
        prop_assert_eq!(
            e.sign_normalize().count_ops(),
            Expr::neg(e).sign_normalize().count_ops()
        );
    }

    #[test]
    fn decomposition_strips_prefactors(e in arb_expr()) {
        for atom in e.decompose_additive() {
            let (c, _) = atom.split_coefficient();
            prop_assert_eq!(c, 1.0, "atom {} kept prefactor", atom);
        }
    }

    #[test]
    fn nesting_check_matches_definition(e in arb_expr()) {
        let vocab = autosindy::expr::OperatorVocabulary::standard();
        let flagged = autosindy::symreg::check_constraints(&e, &vocab);
        prop_assert_eq!(flagged, !has_nested_trig(&e, false));
    }
}

fn has_nested_trig(e: &Expr, inside_trig: bool) -> bool {
    use autosindy::ExprKind;
    match e.kind() {
        ExprKind::Constant(_) | ExprKind::Variable(_) => false,
        ExprKind::Unary(op, c) => {
            let trig = matches!(op, UnaryOp::Sin | UnaryOp::Cos);
            (trig && inside_trig) || has_nested_trig(c, inside_trig || trig)
        }
        ExprKind::Pow(b, _) => has_nested_trig(b, inside_trig),
        ExprKind::Div(n, d) => has_nested_trig(n, inside_trig) || has_nested_trig(d, inside_trig),
        ExprKind::Mul(v) | ExprKind::Add(v) => v.iter().any(|x| has_nested_trig(x, inside_trig)),
    }
}
