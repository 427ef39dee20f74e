//! Structural access used by the evolutionary search: preorder subtree
//! indexing and constant collection/replacement.
//!
//! Replacement rebuilds through the canonical constructors, so the result
//! may be structurally smaller than a naive splice (like terms merge,
//! constants fold).

use super::{Expr, ExprKind};

impl Expr {
    /// Number of nodes in the canonical tree (leaves included).
    pub fn node_count(&self) -> usize {
        1 + match self.kind() {
            ExprKind::Constant(_) | ExprKind::Variable(_) => 0,
            ExprKind::Unary(_, c) => c.node_count(),
            ExprKind::Pow(b, _) => b.node_count(),
            ExprKind::Div(n, d) => n.node_count() + d.node_count(),
            ExprKind::Mul(v) | ExprKind::Add(v) => v.iter().map(|e| e.node_count()).sum(),
        }
    }

    /// The subtree rooted at preorder index `idx` (0 is the whole tree).
    pub fn subtree(&self, idx: usize) -> Option<Expr> {
        if idx == 0 {
            return Some(self.clone());
        }
        let mut offset = idx - 1;
        let children: Vec<&Expr> = self.children();
        for child in children {
            let sz = child.node_count();
            if offset < sz {
                return child.subtree(offset);
            }
            offset -= sz;
        }
        None
    }

    /// Replaces the subtree at preorder index `idx`, rebuilding canonically.
    pub fn replace_subtree(&self, idx: usize, replacement: Expr) -> Expr {
        if idx == 0 {
            return replacement;
        }
        let mut offset = idx - 1;
        match self.kind() {
            ExprKind::Constant(_) | ExprKind::Variable(_) => self.clone(),
            ExprKind::Unary(op, c) => Expr::unary(*op, c.replace_subtree(offset, replacement)),
            ExprKind::Pow(b, k) => Expr::pow(b.replace_subtree(offset, replacement), *k),
            ExprKind::Div(n, d) => {
                let n_sz = n.node_count();
                if offset < n_sz {
                    Expr::div(n.replace_subtree(offset, replacement), d.clone())
                } else {
                    Expr::div(n.clone(), d.replace_subtree(offset - n_sz, replacement))
                }
            }
            ExprKind::Mul(v) | ExprKind::Add(v) => {
                let is_mul = matches!(self.kind(), ExprKind::Mul(_));
                let mut parts = Vec::with_capacity(v.len());
                let mut done = false;
                for child in v {
                    let sz = child.node_count();
                    if !done && offset < sz {
                        parts.push(child.replace_subtree(offset, replacement.clone()));
                        done = true;
                    } else {
                        parts.push(child.clone());
                        if !done {
                            offset -= sz;
                        }
                    }
                }
                if is_mul {
                    Expr::product(parts)
                } else {
                    Expr::sum(parts)
                }
            }
        }
    }

    fn children(&self) -> Vec<&Expr> {
        match self.kind() {
            ExprKind::Constant(_) | ExprKind::Variable(_) => vec![],
            ExprKind::Unary(_, c) => vec![c],
            ExprKind::Pow(b, _) => vec![b],
            ExprKind::Div(n, d) => vec![n, d],
            ExprKind::Mul(v) | ExprKind::Add(v) => v.iter().collect(),
        }
    }

    /// All constants in preorder. Paired with [`Expr::with_constants`].
    pub fn constants(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_constants(&mut out);
        out
    }

    fn collect_constants(&self, out: &mut Vec<f64>) {
        match self.kind() {
            ExprKind::Constant(c) => out.push(*c),
            ExprKind::Variable(_) => {}
            ExprKind::Unary(_, c) => c.collect_constants(out),
            ExprKind::Pow(b, _) => b.collect_constants(out),
            ExprKind::Div(n, d) => {
                n.collect_constants(out);
                d.collect_constants(out);
            }
            ExprKind::Mul(v) | ExprKind::Add(v) => {
                for e in v {
                    e.collect_constants(out);
                }
            }
        }
    }

    /// Rebuilds the tree with constants replaced in preorder. `values`
    /// must have the length of [`Expr::constants`].
    pub fn with_constants(&self, values: &[f64]) -> Expr {
        let mut iter = values.iter().copied();
        let out = self.substitute_constants(&mut iter);
        debug_assert!(iter.next().is_none(), "constant count mismatch");
        out
    }

    fn substitute_constants(&self, values: &mut impl Iterator<Item = f64>) -> Expr {
        match self.kind() {
            ExprKind::Constant(_) => Expr::constant(values.next().expect("constant count mismatch")),
            ExprKind::Variable(i) => Expr::variable(*i),
            ExprKind::Unary(op, c) => Expr::unary(*op, c.substitute_constants(values)),
            ExprKind::Pow(b, k) => Expr::pow(b.substitute_constants(values), *k),
            ExprKind::Div(n, d) => {
                let n = n.substitute_constants(values);
                let d = d.substitute_constants(values);
                Expr::div(n, d)
            }
            ExprKind::Mul(v) => {
                let parts: Vec<Expr> = v.iter().map(|e| e.substitute_constants(values)).collect();
                Expr::product(parts)
            }
            ExprKind::Add(v) => {
                let parts: Vec<Expr> = v.iter().map(|e| e.substitute_constants(values)).collect();
                Expr::sum(parts)
            }
        }
    }
}
