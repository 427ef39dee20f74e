//! Canonical infix rendering. `parse(to_string(e))` reconstructs `e`
//! exactly: constants print with Rust's shortest round-trip formatting.

use super::{Expr, ExprKind};
use std::fmt;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(self, f)
    }
}

fn write_expr(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.kind() {
        ExprKind::Add(terms) => {
            write_term(&terms[0], f)?;
            for t in &terms[1..] {
                let (c, core) = match t.kind() {
                    ExprKind::Constant(c) => (*c, None),
                    _ => {
                        let (c, core) = t.split_coefficient();
                        (c, Some(core))
                    }
                };
                if c < 0.0 {
                    write!(f, " - ")?;
                    let flipped = match core {
                        None => Expr::constant(-c),
                        Some(core) => Expr::mul(Expr::constant(-c), core),
                    };
                    write_term(&flipped, f)?;
                } else {
                    write!(f, " + ")?;
                    write_term(t, f)?;
                }
            }
            Ok(())
        }
        _ => write_term(e, f),
    }
}

/// A term: anything that binds at least as tightly as multiplication.
fn write_term(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.kind() {
        ExprKind::Constant(c) => write!(f, "{c}"),
        ExprKind::Variable(i) => write!(f, "x{i}"),
        ExprKind::Unary(op, child) => write!(f, "{}({child})", op.name()),
        ExprKind::Pow(base, k) => {
            write_atom(base, f)?;
            write!(f, "^{k}")
        }
        ExprKind::Div(n, d) => {
            write_atom(n, f)?;
            write!(f, " / ")?;
            write_atom(d, f)
        }
        ExprKind::Mul(factors) => {
            let mut first = true;
            let mut iter = factors.iter();
            if let ExprKind::Constant(c) = factors[0].kind() {
                iter.next();
                if *c == -1.0 {
                    write!(f, "-")?;
                } else {
                    write!(f, "{c}")?;
                    first = false;
                }
            }
            for fac in iter {
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                write_atom(fac, f)?;
            }
            Ok(())
        }
        ExprKind::Add(_) => {
            write!(f, "(")?;
            write_expr(e, f)?;
            write!(f, ")")
        }
    }
}

/// An atom: operands of `^`, `/` and `*` that need parentheses when they
/// are themselves sums, products or quotients.
fn write_atom(e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match e.kind() {
        ExprKind::Add(_) | ExprKind::Mul(_) | ExprKind::Div(..) => {
            write!(f, "(")?;
            write_expr(e, f)?;
            write!(f, ")")
        }
        ExprKind::Constant(c) if *c < 0.0 => write!(f, "({c})"),
        _ => write_term(e, f),
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
    fn renders_sums_and_signs() {
        let e = Expr::sub(Expr::mul(c(2.0), x(0)), Expr::mul(c(0.4), x(1)));
        assert_eq!(e.to_string(), "2*x0 - 0.4*x1");
    }

    #[test]
    fn renders_grouped_power() {
        let e = Expr::pow(Expr::add(x(0), x(1)), 2);
        assert_eq!(e.to_string(), "(x0 + x1)^2");
    }

    #[test]
    fn renders_functions_and_quotients() {
        let e = Expr::mul(Expr::sin(x(0)), Expr::div(x(1), Expr::add(x(0), c(1.0))));
        assert_eq!(e.to_string(), "sin(x0)*(x1 / (x0 + 1))");
    }

    #[test]
    fn renders_negated_product() {
        let e = Expr::neg(Expr::mul(x(0), x(1)));
        assert_eq!(e.to_string(), "-x0*x1");
    }
}
