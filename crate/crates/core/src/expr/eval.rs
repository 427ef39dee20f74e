//! Pointwise and columnwise expression evaluation.

use super::{Expr, ExprKind};
use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("expression references x{index} but the data has {dim} dimensions")]
    DimensionMismatch { index: usize, dim: usize },
}

impl Expr {
    /// Evaluates the expression over every row of an `m x n` state matrix.
    ///
    /// Division by zero and overflow produce non-finite entries; detecting
    /// them is the caller's responsibility.
    pub fn evaluate(&self, states: &DMatrix<f64>) -> Result<Vec<f64>, ExprError> {
        if let Some(max) = self.max_variable() {
            if max >= states.ncols() {
                return Err(ExprError::DimensionMismatch {
                    index: max,
                    dim: states.ncols(),
                });
            }
        }
        Ok(self.eval_columns(states))
    }

    fn eval_columns(&self, states: &DMatrix<f64>) -> Vec<f64> {
        let m = states.nrows();
        match self.kind() {
            ExprKind::Constant(c) => vec![*c; m],
            ExprKind::Variable(j) => states.column(*j).iter().copied().collect(),
            ExprKind::Unary(op, child) => {
                let mut v = child.eval_columns(states);
                for x in &mut v {
                    *x = op.apply(*x);
                }
                v
            }
            ExprKind::Pow(base, k) => {
                let mut v = base.eval_columns(states);
                let k = (*k).min(i32::MAX as u32) as i32;
                for x in &mut v {
                    *x = x.powi(k);
                }
                v
            }
            ExprKind::Div(n, d) => {
                let mut v = n.eval_columns(states);
                let den = d.eval_columns(states);
                for (x, y) in v.iter_mut().zip(den) {
                    *x /= y;
                }
                v
            }
            ExprKind::Mul(fs) => {
                let mut v = fs[0].eval_columns(states);
                for f in &fs[1..] {
                    let w = f.eval_columns(states);
                    for (x, y) in v.iter_mut().zip(w) {
                        *x *= y;
                    }
                }
                v
            }
            ExprKind::Add(ts) => {
                let mut v = ts[0].eval_columns(states);
                for t in &ts[1..] {
                    let w = t.eval_columns(states);
                    for (x, y) in v.iter_mut().zip(w) {
                        *x += y;
                    }
                }
                v
            }
        }
    }

    /// Evaluates at a single state vector. The caller must ensure every
    /// variable index is in range (checked in debug builds only); this is
    /// the hot path of model integration.
    pub fn evaluate_at(&self, x: &[f64]) -> f64 {
        match self.kind() {
            ExprKind::Constant(c) => *c,
            ExprKind::Variable(j) => {
                debug_assert!(*j < x.len());
                x[*j]
            }
            ExprKind::Unary(op, child) => op.apply(child.evaluate_at(x)),
            ExprKind::Pow(base, k) => base.evaluate_at(x).powi((*k).min(i32::MAX as u32) as i32),
            ExprKind::Div(n, d) => n.evaluate_at(x) / d.evaluate_at(x),
            ExprKind::Mul(fs) => fs.iter().map(|f| f.evaluate_at(x)).product(),
            ExprKind::Add(ts) => ts.iter().map(|t| t.evaluate_at(x)).sum(),
        }
    }
}
