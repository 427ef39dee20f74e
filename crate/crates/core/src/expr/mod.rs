//! Symbolic expression trees: parsing, evaluation, algebraic expansion,
//! additive decomposition, and operator counting.
//!
//! Expressions are immutable and always held in a canonical form that is
//! established by the constructors: sums are flattened with like terms
//! merged, products are flattened with repeated factors collected into
//! integer powers, numeric coefficients sit at the front of a product, and
//! commutative operands are sorted under a fixed total order. Structural
//! equality (`==`) is therefore equality of canonical forms.
//!
//! The canonical form never distributes a product over a sum and never
//! rationalizes a quotient; grouped factors such as `(x0 + x1)^2` survive
//! until an explicit call to [`Expr::expand`].

mod algebra;
mod display;
mod eval;
mod node;
mod parse;

pub use algebra::ExpansionStrategy;
pub use eval::ExprError;
pub use parse::{parse, ParseError, ParseErrorKind};

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

/// Unary operators available to expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UnaryOp {
    Sin,
    Cos,
    Exp,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 3] = [UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Exp];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
        }
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Exp => x.exp(),
        }
    }

    pub fn is_trig(self) -> bool {
        matches!(self, UnaryOp::Sin | UnaryOp::Cos)
    }
}

/// Binary operators of the surface grammar.
///
/// Internally sums and products are n-ary; this enum names the operator
/// vocabulary exposed to the search engine and the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 4] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div];

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
        }
    }
}

/// The operator set an expression search is allowed to use, together with
/// the nesting constraints enforced on generated trees.
///
/// `add` and `mul` are always members. The forbidden-nesting set is kept
/// symmetric: if `(sin, cos)` is listed so is `(cos, sin)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorVocabulary {
    binary: BTreeSet<BinaryOp>,
    unary: BTreeSet<UnaryOp>,
    forbidden_nesting: BTreeSet<(UnaryOp, UnaryOp)>,
}

impl OperatorVocabulary {
    pub fn new(
        binary: impl IntoIterator<Item = BinaryOp>,
        unary: impl IntoIterator<Item = UnaryOp>,
        forbidden_nesting: impl IntoIterator<Item = (UnaryOp, UnaryOp)>,
    ) -> Self {
        let mut binary: BTreeSet<BinaryOp> = binary.into_iter().collect();
        binary.insert(BinaryOp::Add);
        binary.insert(BinaryOp::Mul);
        let unary: BTreeSet<UnaryOp> = unary.into_iter().collect();
        let mut forbidden: BTreeSet<(UnaryOp, UnaryOp)> = BTreeSet::new();
        for (a, b) in forbidden_nesting {
            forbidden.insert((a, b));
            forbidden.insert((b, a));
        }
        Self {
            binary,
            unary,
            forbidden_nesting: forbidden,
        }
    }

    /// Full arithmetic plus `sin`, `cos`, `exp`, with trig-inside-trig
    /// compositions forbidden.
    pub fn standard() -> Self {
        let trig = [UnaryOp::Sin, UnaryOp::Cos];
        let forbidden = trig
            .iter()
            .flat_map(|&a| trig.iter().map(move |&b| (a, b)));
        Self::new(BinaryOp::ALL, UnaryOp::ALL, forbidden)
    }

    /// The default search vocabulary: arithmetic without division plus
    /// `sin`/`cos`. Quotient atoms can hide in-domain singularities that
    /// crash forward integration, and exponentials with fitted affine
    /// arguments explode on wide-range state spaces; both stay available
    /// through explicit configuration.
    pub fn smooth() -> Self {
        let trig = [UnaryOp::Sin, UnaryOp::Cos];
        let forbidden = trig
            .iter()
            .flat_map(|&a| trig.iter().map(move |&b| (a, b)));
        Self::new(
            [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul],
            trig,
            forbidden,
        )
    }

    /// Arithmetic-only vocabulary (`+`, `-`, `*`), no transcendentals.
    pub fn polynomial() -> Self {
        Self::new([BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul], [], [])
    }

    pub fn binary_ops(&self) -> impl Iterator<Item = BinaryOp> + '_ {
        self.binary.iter().copied()
    }

    pub fn unary_ops(&self) -> impl Iterator<Item = UnaryOp> + '_ {
        self.unary.iter().copied()
    }

    pub fn has_unary(&self) -> bool {
        !self.unary.is_empty()
    }

    pub fn forbids_nesting(&self, outer: UnaryOp, inner: UnaryOp) -> bool {
        self.forbidden_nesting.contains(&(outer, inner))
    }
}

impl Default for OperatorVocabulary {
    fn default() -> Self {
        Self::standard()
    }
}

/// An immutable symbolic expression in canonical form.
#[derive(Debug, Clone)]
pub struct Expr(Arc<ExprKind>);

/// The node alternatives of an expression tree.
///
/// `Mul` and `Add` are flattened n-ary nodes; a `Mul` holds at most one
/// `Constant` factor and it is always first. `Pow` exponents are integers
/// `>= 2`. Quotients are opaque: no canonicalization moves terms across a
/// `Div` boundary.
#[derive(Debug)]
pub enum ExprKind {
    Constant(f64),
    Variable(usize),
    Unary(UnaryOp, Expr),
    Pow(Expr, u32),
    Div(Expr, Expr),
    Mul(Vec<Expr>),
    Add(Vec<Expr>),
}

impl Expr {
    fn raw(kind: ExprKind) -> Self {
        Expr(Arc::new(kind))
    }

    pub fn kind(&self) -> &ExprKind {
        &self.0
    }

    pub fn constant(value: f64) -> Self {
        // normalize -0.0 so equal-valued constants share one canonical form
        let value = if value == 0.0 { 0.0 } else { value };
        Expr::raw(ExprKind::Constant(value))
    }

    pub fn variable(index: usize) -> Self {
        Expr::raw(ExprKind::Variable(index))
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.kind() {
            ExprKind::Constant(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_constant() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_constant() == Some(1.0)
    }

    /// Builds a canonical sum: flattens nested sums, merges like terms by
    /// adding their numeric coefficients, folds constants, drops zero terms
    /// and orders the result.
    pub fn sum(terms: impl IntoIterator<Item = Expr>) -> Self {
        let mut coeffs: BTreeMap<Expr, f64> = BTreeMap::new();
        let mut constant = 0.0;
        let mut stack: Vec<Expr> = terms.into_iter().collect();
        stack.reverse();
        while let Some(t) = stack.pop() {
            match t.kind() {
                ExprKind::Add(parts) => stack.extend(parts.iter().rev().cloned()),
                ExprKind::Constant(c) => constant += c,
                _ => {
                    let (c, core) = t.split_coefficient();
                    *coeffs.entry(core).or_insert(0.0) += c;
                }
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(coeffs.len() + 1);
        for (core, c) in coeffs {
            if c != 0.0 {
                out.push(Self::scale(core, c));
            }
        }
        if constant != 0.0 {
            out.push(Expr::constant(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::raw(ExprKind::Add(out)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Self {
        Expr::sum([a, b])
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::sum([a, Expr::neg(b)])
    }

    pub fn neg(e: Expr) -> Self {
        e.negated()
    }

    /// Sign flip implemented by negating term coefficients directly, so it
    /// never re-enters product canonicalization.
    fn negated(&self) -> Expr {
        fn flip_term(t: &Expr) -> Expr {
            match t.kind() {
                ExprKind::Constant(c) => Expr::constant(-c),
                _ => {
                    let (c, core) = t.split_coefficient();
                    Expr::scale(core, -c)
                }
            }
        }
        match self.kind() {
            // cores are unchanged, so ordering and dedup are preserved
            ExprKind::Add(ts) => Expr::raw(ExprKind::Add(ts.iter().map(flip_term).collect())),
            _ => flip_term(self),
        }
    }

    /// Builds a canonical product: flattens nested products, folds the
    /// numeric coefficient, collects repeated factors into powers and
    /// orders the factors. A bare `coefficient * sum` distributes the
    /// coefficient into the sum; all other groupings are preserved.
    pub fn product(factors: impl IntoIterator<Item = Expr>) -> Self {
        let mut coeff = 1.0;
        let mut pows: BTreeMap<Expr, u32> = BTreeMap::new();
        let mut stack: Vec<Expr> = factors.into_iter().collect();
        stack.reverse();
        while let Some(f) = stack.pop() {
            match f.kind() {
                ExprKind::Mul(parts) => stack.extend(parts.iter().rev().cloned()),
                ExprKind::Constant(c) => coeff *= c,
                ExprKind::Pow(base, k) => {
                    let base = Self::normalize_sign_of_factor(base.clone(), *k, &mut coeff);
                    *pows.entry(base).or_insert(0) += k;
                }
                _ => {
                    let base = Self::normalize_sign_of_factor(f.clone(), 1, &mut coeff);
                    *pows.entry(base).or_insert(0) += 1;
                }
            }
        }
        if coeff == 0.0 {
            return Expr::zero();
        }
        let mut fs: Vec<Expr> = Vec::with_capacity(pows.len() + 1);
        for (base, k) in pows {
            match k {
                0 => {}
                1 => fs.push(base),
                _ => fs.push(Expr::raw(ExprKind::Pow(base, k))),
            }
        }
        match fs.len() {
            0 => Expr::constant(coeff),
            1 if coeff == 1.0 => fs.pop().unwrap(),
            1 if matches!(fs[0].kind(), ExprKind::Add(_)) => {
                // constant * sum: distribute the constant
                let terms = match fs[0].kind() {
                    ExprKind::Add(ts) => ts.clone(),
                    _ => unreachable!(),
                };
                Expr::sum(terms.into_iter().map(|t| Expr::mul(Expr::constant(coeff), t)))
            }
            _ => {
                if coeff != 1.0 {
                    fs.insert(0, Expr::constant(coeff));
                }
                Expr::raw(ExprKind::Mul(fs))
            }
        }
    }

    /// A sum factor inside a product is stored with a non-negative leading
    /// term; the sign moves into the product coefficient so that e.g.
    /// `x*(1 - y)` and `-x*(y - 1)` share one canonical form.
    fn normalize_sign_of_factor(base: Expr, exponent: u32, coeff: &mut f64) -> Expr {
        if let ExprKind::Add(_) = base.kind() {
            if base.leading_term_is_negative() {
                if exponent % 2 == 1 {
                    *coeff = -*coeff;
                }
                return base.negated();
            }
        }
        base
    }

    pub fn mul(a: Expr, b: Expr) -> Self {
        Expr::product([a, b])
    }

    /// Integer power with exponent folding: `e^0 = 1`, `e^1 = e`, powers of
    /// products distribute over the factors, and nested powers multiply.
    pub fn pow(base: Expr, exponent: u32) -> Self {
        match exponent {
            0 => return Expr::one(),
            1 => return base,
            _ => {}
        }
        match base.kind() {
            ExprKind::Constant(c) => {
                let v = c.powi(exponent.min(i32::MAX as u32) as i32);
                if v.is_finite() {
                    Expr::constant(v)
                } else {
                    Expr::raw(ExprKind::Pow(base, exponent))
                }
            }
            ExprKind::Mul(fs) => {
                let fs = fs.clone();
                Expr::product(fs.into_iter().map(|f| Expr::pow(f, exponent)))
            }
            ExprKind::Pow(b, k) => {
                let inner = b.clone();
                let k = *k;
                Expr::pow(inner, k.saturating_mul(exponent))
            }
            ExprKind::Add(_) if base.leading_term_is_negative() => {
                let flipped = Expr::neg(base);
                let p = Expr::raw(ExprKind::Pow(flipped, exponent));
                if exponent % 2 == 1 {
                    Expr::neg(p)
                } else {
                    p
                }
            }
            _ => Expr::raw(ExprKind::Pow(base, exponent)),
        }
    }

    /// Quotient. Numeric coefficients are pulled out of both sides and a
    /// division by a constant becomes a multiplication, but the quotient of
    /// two non-constant expressions stays a single opaque node.
    pub fn div(num: Expr, den: Expr) -> Self {
        if num.is_zero() {
            return Expr::zero();
        }
        if let Some(d) = den.as_constant() {
            let inv = 1.0 / d;
            if inv.is_finite() {
                return Expr::mul(Expr::constant(inv), num);
            }
            return Expr::raw(ExprKind::Div(num, den));
        }
        let (mut cn, mut ncore) = num.split_or_constant();
        let (cd, mut dcore) = den.split_or_constant();
        if let ExprKind::Add(_) = ncore.kind() {
            if ncore.leading_term_is_negative() {
                cn = -cn;
                ncore = Expr::neg(ncore);
            }
        }
        if let ExprKind::Add(_) = dcore.kind() {
            if dcore.leading_term_is_negative() {
                cn = -cn;
                dcore = Expr::neg(dcore);
            }
        }
        let ratio = cn / cd;
        let q = Expr::raw(ExprKind::Div(ncore, dcore));
        if ratio.is_finite() {
            Expr::mul(Expr::constant(ratio), q)
        } else {
            Expr::raw(ExprKind::Div(num, den))
        }
    }

    /// Unary application with constant folding and odd/even argument-sign
    /// extraction for `sin`/`cos`.
    pub fn unary(op: UnaryOp, child: Expr) -> Self {
        if let Some(c) = child.as_constant() {
            let v = op.apply(c);
            if v.is_finite() {
                return Expr::constant(v);
            }
            return Expr::raw(ExprKind::Unary(op, child));
        }
        if op.is_trig() && child.leading_term_is_negative() {
            let flipped = Expr::neg(child);
            let node = Expr::raw(ExprKind::Unary(op, flipped));
            return match op {
                UnaryOp::Sin => Expr::neg(node),
                UnaryOp::Cos => node,
                UnaryOp::Exp => unreachable!(),
            };
        }
        Expr::raw(ExprKind::Unary(op, child))
    }

    pub fn sin(e: Expr) -> Self {
        Expr::unary(UnaryOp::Sin, e)
    }

    pub fn cos(e: Expr) -> Self {
        Expr::unary(UnaryOp::Cos, e)
    }

    pub fn exp(e: Expr) -> Self {
        Expr::unary(UnaryOp::Exp, e)
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Self {
        match op {
            BinaryOp::Add => Expr::add(a, b),
            BinaryOp::Sub => Expr::sub(a, b),
            BinaryOp::Mul => Expr::mul(a, b),
            BinaryOp::Div => Expr::div(a, b),
        }
    }

    /// Splits a non-constant expression into `(coefficient, core)` where the
    /// core carries no numeric prefactor.
    pub fn split_coefficient(&self) -> (f64, Expr) {
        if let ExprKind::Mul(fs) = self.kind() {
            if let ExprKind::Constant(c) = fs[0].kind() {
                let rest = &fs[1..];
                let core = if rest.len() == 1 {
                    rest[0].clone()
                } else {
                    Expr::raw(ExprKind::Mul(rest.to_vec()))
                };
                return (*c, core);
            }
        }
        (1.0, self.clone())
    }

    /// Like [`split_coefficient`], but maps a bare constant to `(c, 1)`.
    fn split_or_constant(&self) -> (f64, Expr) {
        match self.kind() {
            ExprKind::Constant(c) => (*c, Expr::one()),
            _ => self.split_coefficient(),
        }
    }

    /// Multiplies a coefficient onto a canonical non-constant core.
    fn scale(core: Expr, c: f64) -> Expr {
        if c == 1.0 {
            return core;
        }
        match core.kind() {
            ExprKind::Mul(fs) => {
                debug_assert!(!matches!(fs[0].kind(), ExprKind::Constant(_)));
                let mut v = Vec::with_capacity(fs.len() + 1);
                v.push(Expr::constant(c));
                v.extend(fs.iter().cloned());
                Expr::raw(ExprKind::Mul(v))
            }
            _ => Expr::raw(ExprKind::Mul(vec![Expr::constant(c), core])),
        }
    }

    /// The additive terms of this expression (itself, when not a sum).
    pub fn additive_terms(&self) -> Vec<Expr> {
        match self.kind() {
            ExprKind::Add(ts) => ts.clone(),
            _ => vec![self.clone()],
        }
    }

    fn leading_term_is_negative(&self) -> bool {
        let lead = match self.kind() {
            ExprKind::Add(ts) => &ts[0],
            _ => self,
        };
        let c = match lead.kind() {
            ExprKind::Constant(c) => *c,
            _ => lead.split_coefficient().0,
        };
        c < 0.0
    }

    /// Flips the sign of the whole expression when its leading additive
    /// term is negative. Idempotent.
    pub fn sign_normalize(&self) -> Expr {
        if self.leading_term_is_negative() {
            Expr::neg(self.clone())
        } else {
            self.clone()
        }
    }

    /// Largest variable index mentioned, if any.
    pub fn max_variable(&self) -> Option<usize> {
        match self.kind() {
            ExprKind::Constant(_) => None,
            ExprKind::Variable(i) => Some(*i),
            ExprKind::Unary(_, c) => c.max_variable(),
            ExprKind::Pow(b, _) => b.max_variable(),
            ExprKind::Div(n, d) => n.max_variable().into_iter().chain(d.max_variable()).max(),
            ExprKind::Mul(v) | ExprKind::Add(v) => v.iter().filter_map(|e| e.max_variable()).max(),
        }
    }

    /// True when every constant in the tree is finite.
    pub fn constants_finite(&self) -> bool {
        match self.kind() {
            ExprKind::Constant(c) => c.is_finite(),
            ExprKind::Variable(_) => true,
            ExprKind::Unary(_, c) => c.constants_finite(),
            ExprKind::Pow(b, _) => b.constants_finite(),
            ExprKind::Div(n, d) => n.constants_finite() && d.constants_finite(),
            ExprKind::Mul(v) | ExprKind::Add(v) => v.iter().all(|e| e.constants_finite()),
        }
    }

    /// Re-runs canonicalization over the whole tree. Expressions built via
    /// the public constructors are already canonical, so this is the
    /// identity on them.
    pub fn simplified(&self) -> Expr {
        match self.kind() {
            ExprKind::Constant(c) => Expr::constant(*c),
            ExprKind::Variable(i) => Expr::variable(*i),
            ExprKind::Unary(op, c) => Expr::unary(*op, c.simplified()),
            ExprKind::Pow(b, k) => Expr::pow(b.simplified(), *k),
            ExprKind::Div(n, d) => Expr::div(n.simplified(), d.simplified()),
            ExprKind::Mul(v) => Expr::product(v.iter().map(|e| e.simplified())),
            ExprKind::Add(v) => Expr::sum(v.iter().map(|e| e.simplified())),
        }
    }
}

fn kind_rank(k: &ExprKind) -> u8 {
    match k {
        ExprKind::Constant(_) => 0,
        ExprKind::Variable(_) => 1,
        ExprKind::Unary(..) => 2,
        ExprKind::Pow(..) => 3,
        ExprKind::Div(..) => 4,
        ExprKind::Mul(_) => 5,
        ExprKind::Add(_) => 6,
    }
}

impl Ord for Expr {
    fn cmp(&self, other: &Self) -> Ordering {
        use ExprKind::*;
        match (self.kind(), other.kind()) {
            (Constant(a), Constant(b)) => a.total_cmp(b),
            (Variable(a), Variable(b)) => a.cmp(b),
            (Unary(op_a, ca), Unary(op_b, cb)) => op_a.cmp(op_b).then_with(|| ca.cmp(cb)),
            (Pow(ba, ka), Pow(bb, kb)) => ba.cmp(bb).then_with(|| ka.cmp(kb)),
            (Div(na, da), Div(nb, db)) => na.cmp(nb).then_with(|| da.cmp(db)),
            (Mul(a), Mul(b)) | (Add(a), Add(b)) => {
                for (x, y) in a.iter().zip(b.iter()) {
                    match x.cmp(y) {
                        Ordering::Equal => {}
                        ord => return ord,
                    }
                }
                a.len().cmp(&b.len())
            }
            (a, b) => kind_rank(a).cmp(&kind_rank(b)),
        }
    }
}

impl PartialOrd for Expr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        kind_rank(self.kind()).hash(state);
        match self.kind() {
            ExprKind::Constant(c) => c.to_bits().hash(state),
            ExprKind::Variable(i) => i.hash(state),
            ExprKind::Unary(op, c) => {
                op.hash(state);
                c.hash(state);
            }
            ExprKind::Pow(b, k) => {
                b.hash(state);
                k.hash(state);
            }
            ExprKind::Div(n, d) => {
                n.hash(state);
                d.hash(state);
            }
            ExprKind::Mul(v) | ExprKind::Add(v) => {
                v.len().hash(state);
                for e in v {
                    e.hash(state);
                }
            }
        }
    }
}
