//! Algebraic expansion, additive decomposition and operator counting.

use super::{Expr, ExprKind, UnaryOp};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// How aggressively an atom is expanded before entering library curation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionStrategy {
    /// Full polynomial and trigonometric expansion.
    Severe,
    /// Constant-factor stripping only; grouped forms stay intact.
    #[default]
    Gentle,
    /// Union of the gentle and severe outputs.
    Hybrid,
}

impl Expr {
    /// Fully distributes products over sums, expands integer powers of sums
    /// and rewrites `sin`/`cos` of sums with the angle-sum identities.
    /// Quotients are opaque: numerator and denominator expand internally
    /// but nothing crosses the division.
    pub fn expand_full(&self) -> Expr {
        self.expand_with(true)
    }

    /// Algebraic expansion only: products and powers distribute over sums
    /// but trig calls keep their arguments grouped. This is the canonical
    /// form the complexity metric counts.
    pub fn expand_algebraic(&self) -> Expr {
        self.expand_with(false)
    }

    fn expand_with(&self, trig: bool) -> Expr {
        match self.kind() {
            ExprKind::Constant(_) | ExprKind::Variable(_) => self.clone(),
            ExprKind::Add(ts) => Expr::sum(ts.iter().map(|t| t.expand_with(trig))),
            ExprKind::Unary(op, child) => {
                let child = child.expand_with(trig);
                if trig && op.is_trig() {
                    if let ExprKind::Add(_) = child.kind() {
                        return expand_trig_of_sum(*op, &child.additive_terms());
                    }
                }
                Expr::unary(*op, child)
            }
            ExprKind::Pow(base, k) => {
                let base = base.expand_with(trig);
                match base.kind() {
                    ExprKind::Add(_) => {
                        let mut acc = base.clone();
                        for _ in 1..*k {
                            acc = distribute(&acc, &base);
                        }
                        acc
                    }
                    _ => Expr::pow(base, *k),
                }
            }
            ExprKind::Div(n, d) => Expr::div(n.expand_with(trig), d.expand_with(trig)),
            ExprKind::Mul(fs) => {
                let mut acc = Expr::one();
                for f in fs {
                    acc = distribute(&acc, &f.expand_with(trig));
                }
                acc
            }
        }
    }

    /// The additive atoms of the expression with numeric prefactors
    /// stripped; a pure constant term contributes the literal `1`.
    pub fn decompose_additive(&self) -> BTreeSet<Expr> {
        self.additive_terms()
            .into_iter()
            .map(|t| match t.kind() {
                ExprKind::Constant(_) => Expr::one(),
                _ => t.split_coefficient().1,
            })
            .collect()
    }

    /// Expansion of one atom under the given strategy, decomposed into
    /// constant-stripped atoms.
    pub fn expand(&self, strategy: ExpansionStrategy) -> BTreeSet<Expr> {
        match strategy {
            ExpansionStrategy::Gentle => {
                let core = match self.kind() {
                    ExprKind::Constant(_) => Expr::one(),
                    _ => self.split_coefficient().1,
                };
                BTreeSet::from([core])
            }
            ExpansionStrategy::Severe => self.expand_full().decompose_additive(),
            ExpansionStrategy::Hybrid => {
                let mut set = self.expand(ExpansionStrategy::Gentle);
                set.extend(self.expand(ExpansionStrategy::Severe));
                set
            }
        }
    }

    /// Operator count of the algebraically expanded, sign-normalized form.
    ///
    /// A k-term sum costs `k - 1` additions, a k-factor product costs
    /// `k - 1` multiplications with a `±1` coefficient free of charge, an
    /// integer power costs one operation regardless of exponent, and each
    /// quotient or transcendental call costs one. Trig arguments stay
    /// grouped: `sin(x0 + x2)` is one call plus one addition.
    pub fn count_ops(&self) -> usize {
        raw_ops(&self.expand_algebraic().sign_normalize())
    }

    /// Operator count of the tree as written, without expansion. Used as
    /// the structural complexity measure during evolutionary search. Unlike
    /// [`count_ops`](Self::count_ops), an integer power here costs its full
    /// `k - 1` multiplications, so high exponents cannot masquerade as
    /// cheap expressions.
    pub fn tree_ops(&self) -> usize {
        match self.kind() {
            ExprKind::Constant(_) | ExprKind::Variable(_) => 0,
            ExprKind::Unary(_, c) => 1 + c.tree_ops(),
            ExprKind::Pow(b, k) => (*k as usize).saturating_sub(1) + b.tree_ops(),
            ExprKind::Div(n, d) => 1 + n.tree_ops() + d.tree_ops(),
            ExprKind::Add(ts) => ts.len() - 1 + ts.iter().map(|t| t.tree_ops()).sum::<usize>(),
            ExprKind::Mul(fs) => {
                let unit_coeff =
                    matches!(fs[0].kind(), ExprKind::Constant(c) if c.abs() == 1.0);
                let effective = if unit_coeff { fs.len() - 1 } else { fs.len() };
                effective.saturating_sub(1) + fs.iter().map(|f| f.tree_ops()).sum::<usize>()
            }
        }
    }
}

fn raw_ops(e: &Expr) -> usize {
    match e.kind() {
        ExprKind::Constant(_) | ExprKind::Variable(_) => 0,
        ExprKind::Unary(_, c) => 1 + raw_ops(c),
        ExprKind::Pow(b, _) => 1 + raw_ops(b),
        ExprKind::Div(n, d) => 1 + raw_ops(n) + raw_ops(d),
        ExprKind::Add(ts) => ts.len() - 1 + ts.iter().map(raw_ops).sum::<usize>(),
        ExprKind::Mul(fs) => {
            let unit_coeff = matches!(fs[0].kind(), ExprKind::Constant(c) if c.abs() == 1.0);
            let effective = if unit_coeff { fs.len() - 1 } else { fs.len() };
            effective.saturating_sub(1) + fs.iter().map(raw_ops).sum::<usize>()
        }
    }
}

/// Product of two expanded expressions, distributing over any sums.
fn distribute(a: &Expr, b: &Expr) -> Expr {
    let left = a.additive_terms();
    let right = b.additive_terms();
    let mut terms = Vec::with_capacity(left.len() * right.len());
    for ta in &left {
        for tb in &right {
            terms.push(Expr::mul(ta.clone(), tb.clone()));
        }
    }
    Expr::sum(terms)
}

/// Angle-sum expansion of `sin`/`cos` over the terms of a sum.
fn expand_trig_of_sum(op: UnaryOp, terms: &[Expr]) -> Expr {
    debug_assert!(!terms.is_empty());
    if terms.len() == 1 {
        return Expr::unary(op, terms[0].clone());
    }
    let head = terms[0].clone();
    let rest = &terms[1..];
    let sin_rest = expand_trig_of_sum(UnaryOp::Sin, rest);
    let cos_rest = expand_trig_of_sum(UnaryOp::Cos, rest);
    let sin_head = Expr::sin(head.clone());
    let cos_head = Expr::cos(head);
    match op {
        UnaryOp::Sin => Expr::add(
            distribute(&sin_head, &cos_rest),
            distribute(&cos_head, &sin_rest),
        ),
        UnaryOp::Cos => Expr::sub(
            distribute(&cos_head, &cos_rest),
            distribute(&sin_head, &sin_rest),
        ),
        UnaryOp::Exp => unreachable!("only trig functions expand over sums"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::variable(i)
    }

    fn c(v: f64) -> Expr {
        Expr::constant(v)
    }

    #[test]
    fn decompose_strips_prefactors() {
        // 3*x0^2 + 2*sin(x1) -> {x0^2, sin(x1)}
        let e = Expr::add(
            Expr::mul(c(3.0), Expr::pow(x(0), 2)),
            Expr::mul(c(2.0), Expr::sin(x(1))),
        );
        let atoms = e.decompose_additive();
        assert_eq!(
            atoms,
            BTreeSet::from([Expr::pow(x(0), 2), Expr::sin(x(1))])
        );
    }

    #[test]
    fn decompose_single_variable() {
        assert_eq!(x(0).decompose_additive(), BTreeSet::from([x(0)]));
    }

    #[test]
    fn decompose_merged_like_terms() {
        // 2*x0 + 3*x0 merges during construction, prefactor stripped
        let e = Expr::add(Expr::mul(c(2.0), x(0)), Expr::mul(c(3.0), x(0)));
        assert_eq!(e.decompose_additive(), BTreeSet::from([x(0)]));
    }

    #[test]
    fn severe_expands_square_of_sum() {
        let e = Expr::pow(Expr::add(x(0), x(1)), 2);
        let atoms = e.expand(ExpansionStrategy::Severe);
        let expected = BTreeSet::from([
            Expr::pow(x(0), 2),
            Expr::mul(x(0), x(1)),
            Expr::pow(x(1), 2),
        ]);
        assert_eq!(atoms, expected);
    }

    #[test]
    fn gentle_preserves_grouped_forms() {
        let e = Expr::pow(Expr::add(x(0), x(1)), 2);
        let atoms = e.expand(ExpansionStrategy::Gentle);
        assert_eq!(atoms, BTreeSet::from([e]));
    }

    #[test]
    fn severe_applies_angle_sum() {
        let e = Expr::sin(Expr::add(x(0), x(1)));
        let atoms = e.expand(ExpansionStrategy::Severe);
        let expected = BTreeSet::from([
            Expr::mul(Expr::sin(x(0)), Expr::cos(x(1))),
            Expr::mul(Expr::cos(x(0)), Expr::sin(x(1))),
        ]);
        assert_eq!(atoms, expected);
    }

    #[test]
    fn hybrid_is_union() {
        let e = Expr::pow(Expr::add(x(0), x(1)), 2);
        let atoms = e.expand(ExpansionStrategy::Hybrid);
        assert_eq!(atoms.len(), 4);
        assert!(atoms.contains(&e));
        assert!(atoms.contains(&Expr::mul(x(0), x(1))));
    }

    #[test]
    fn count_ops_examples() {
        // -2*x0 - 3*x1 sign-normalizes to 2*x0 + 3*x1: two muls + one add
        let e = Expr::sub(Expr::mul(c(-2.0), x(0)), Expr::mul(c(3.0), x(1)));
        assert_eq!(e.count_ops(), 3);
        assert_eq!(x(0).count_ops(), 0);
    }

    #[test]
    fn count_ops_van_der_pol_form() {
        // mu*(1 - x0^2)*x1 - x0 with mu = 2 expands to 6 operations
        let mu = 2.0;
        let e = Expr::sub(
            Expr::product([
                c(mu),
                Expr::sub(c(1.0), Expr::pow(x(0), 2)),
                x(1),
            ]),
            x(0),
        );
        assert_eq!(e.count_ops(), 6);
        // the pre-expanded form counts identically
        let expanded = Expr::sum([
            Expr::mul(c(mu), x(1)),
            Expr::neg(Expr::product([c(mu), Expr::pow(x(0), 2), x(1)])),
            Expr::neg(x(0)),
        ]);
        assert_eq!(expanded.count_ops(), 6);
    }

    #[test]
    fn unit_coefficients_are_free() {
        // -x0 costs nothing; -2*x0 costs one multiplication
        assert_eq!(Expr::neg(x(0)).tree_ops(), 0);
        assert_eq!(Expr::mul(c(-2.0), x(0)).tree_ops(), 1);
        // the search measure prices a power at its multiplication cost;
        // the canonical metric prices it at one operation
        assert_eq!(Expr::pow(x(0), 5).tree_ops(), 4);
        assert_eq!(Expr::pow(x(0), 5).count_ops(), 1);
    }

    #[test]
    fn expand_value_preserved() {
        use nalgebra::DMatrix;
        let e = Expr::product([
            Expr::add(x(0), Expr::mul(c(2.0), x(1))),
            Expr::sub(x(0), x(1)),
            Expr::sin(Expr::add(x(0), x(1))),
        ]);
        let expanded = e.expand_full();
        let states = DMatrix::from_row_slice(3, 2, &[0.3, -1.2, 1.7, 0.4, -0.8, 2.2]);
        let a = e.evaluate(&states).unwrap();
        let b = expanded.evaluate(&states).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).abs() <= 1e-10 * u.abs().max(1.0));
        }
    }
}
