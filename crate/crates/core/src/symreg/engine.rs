//! Population mechanics for the evolutionary search: tree generation,
//! mutation, crossover, tournament selection and the per-generation step.

use crate::expr::{BinaryOp, Expr, ExprKind, OperatorVocabulary, UnaryOp};
use crate::symreg::{check_constraints, fit_constants_with_budget, GPConfig};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub(crate) struct Individual {
    pub expr: Expr,
    pub loss: f64,
    pub complexity: usize,
    pub fitness: f64,
}

/// Mean squared error of an expression against the chunk target; `None`
/// when any prediction is non-finite.
pub(crate) fn chunk_loss(expr: &Expr, states: &DMatrix<f64>, target: &[f64]) -> Option<f64> {
    let pred = expr.evaluate(states).ok()?;
    let mut acc = 0.0;
    for (p, t) in pred.iter().zip(target) {
        let d = p - t;
        acc += d * d;
    }
    let mse = acc / target.len() as f64;
    mse.is_finite().then_some(mse)
}

pub(crate) struct Population {
    pub members: Vec<Individual>,
    /// Best (expression, loss) seen at each tree complexity.
    pub archive: BTreeMap<usize, (Expr, f64)>,
}

pub(crate) struct EvalContext<'a> {
    pub states: &'a DMatrix<f64>,
    pub target: &'a [f64],
    pub dim: usize,
    pub cfg: &'a GPConfig,
}

impl<'a> EvalContext<'a> {
    fn admit(&self, expr: Expr) -> Option<Individual> {
        let complexity = expr.tree_ops();
        if complexity > self.cfg.max_complexity
            || !expr.constants_finite()
            || !check_constraints(&expr, &self.cfg.vocabulary)
        {
            return None;
        }
        if expr.max_variable().is_some_and(|v| v >= self.dim) {
            return None;
        }
        let loss = chunk_loss(&expr, self.states, self.target)?;
        let fitness = loss * (1.0 + self.cfg.parsimony * complexity as f64);
        Some(Individual {
            expr,
            loss,
            complexity,
            fitness,
        })
    }
}

impl Population {
    /// Seeds the population with the constant model, the bare variables,
    /// pairwise products, unary atoms of each variable, and random trees of
    /// ramped depth. The structured seeds give crossover immediate access
    /// to the low-order building blocks of polynomial-plus-trig dynamics.
    pub fn initialize(rng: &mut ChaCha8Rng, ctx: &EvalContext) -> Self {
        let mean = ctx.target.iter().sum::<f64>() / ctx.target.len() as f64;
        let mut exprs: Vec<Expr> = vec![Expr::constant(mean)];
        for j in 0..ctx.dim {
            exprs.push(Expr::variable(j));
        }
        for a in 0..ctx.dim {
            for b in a..ctx.dim {
                exprs.push(Expr::mul(Expr::variable(a), Expr::variable(b)));
            }
        }
        for op in ctx.cfg.vocabulary.unary_ops() {
            for j in 0..ctx.dim {
                exprs.push(Expr::unary(op, Expr::variable(j)));
            }
        }
        while exprs.len() < ctx.cfg.population_size {
            let depth = rng.gen_range(2..=4);
            exprs.push(random_tree(rng, &ctx.cfg.vocabulary, ctx.dim, depth, &mut Vec::new()));
        }
        exprs.truncate(ctx.cfg.population_size);
        let fallback = ctx
            .admit(Expr::constant(mean))
            .expect("constant model is always admissible");
        let members: Vec<Individual> = exprs
            .into_iter()
            .map(|e| ctx.admit(e).unwrap_or_else(|| fallback.clone()))
            .collect();
        let mut pop = Population {
            members,
            archive: BTreeMap::new(),
        };
        pop.archive_members();
        pop
    }

    fn archive_members(&mut self) {
        for ind in &self.members {
            let entry = self.archive.entry(ind.complexity);
            match entry {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert((ind.expr.clone(), ind.loss));
                }
                std::collections::btree_map::Entry::Occupied(mut o) => {
                    if ind.loss < o.get().1 {
                        o.insert((ind.expr.clone(), ind.loss));
                    }
                }
            }
        }
    }

    fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, ind) in self.members.iter().enumerate() {
            if ind.fitness < self.members[best].fitness {
                best = i;
            }
        }
        best
    }

    fn worst_index(&self) -> usize {
        let mut worst = 0;
        for (i, ind) in self.members.iter().enumerate() {
            if ind.fitness > self.members[worst].fitness {
                worst = i;
            }
        }
        worst
    }

    pub fn best(&self) -> &Individual {
        &self.members[self.best_index()]
    }

    pub fn replace_worst(&mut self, migrant: Individual) {
        let w = self.worst_index();
        self.members[w] = migrant;
        self.archive_members();
    }

    fn tournament<'b>(&'b self, rng: &mut ChaCha8Rng, size: usize) -> &'b Individual {
        let mut best: Option<&Individual> = None;
        for _ in 0..size {
            let i = rng.gen_range(0..self.members.len());
            let cand = &self.members[i];
            if best.is_none_or(|b| cand.fitness < b.fitness) {
                best = Some(cand);
            }
        }
        best.expect("tournament size is positive")
    }

    /// One generation: elitist offspring production followed by constant
    /// refinement of the generation's best individual.
    pub fn step(&mut self, rng: &mut ChaCha8Rng, ctx: &EvalContext) {
        let cfg = ctx.cfg;
        let elite = self.best().clone();
        let mut next: Vec<Individual> = Vec::with_capacity(cfg.population_size);
        next.push(elite);
        while next.len() < cfg.population_size {
            let roll: f64 = rng.gen();
            let parent = self.tournament(rng, cfg.tournament_size).clone();
            let child = if roll < cfg.crossover_probability {
                let donor = self.tournament(rng, cfg.tournament_size);
                crossover(rng, &parent.expr, &donor.expr)
            } else if roll < cfg.crossover_probability + cfg.mutation_probability {
                mutate(rng, &parent.expr, &cfg.vocabulary, ctx.dim)
            } else {
                parent.expr.clone()
            };
            // outer coefficients are a linear subproblem; solve them exactly
            let child = crate::symreg::linear_refit(&child, ctx.states, ctx.target);
            next.push(ctx.admit(child).unwrap_or(parent));
        }
        self.members = next;

        let best_idx = self.best_index();
        let polished = fit_constants_with_budget(
            &self.members[best_idx].expr,
            ctx.states,
            ctx.target,
            cfg.constant_opt_iters,
        );
        if let Some(ind) = ctx.admit(polished) {
            if ind.fitness < self.members[best_idx].fitness {
                self.members[best_idx] = ind;
            }
        }
        self.archive_members();
    }
}

/// Random expression tree of bounded depth honoring nesting constraints.
/// `ancestors` carries the unary operators on the path from the root.
pub(crate) fn random_tree(
    rng: &mut ChaCha8Rng,
    vocab: &OperatorVocabulary,
    dim: usize,
    depth: usize,
    ancestors: &mut Vec<UnaryOp>,
) -> Expr {
    if depth == 0 {
        return random_leaf(rng, dim);
    }
    let allowed_unary: Vec<UnaryOp> = vocab
        .unary_ops()
        .filter(|u| !ancestors.iter().any(|a| vocab.forbids_nesting(*a, *u)))
        .collect();
    let roll: f64 = rng.gen();
    if roll < 0.25 {
        random_leaf(rng, dim)
    } else if roll < 0.45 && !allowed_unary.is_empty() {
        let op = *allowed_unary.choose(rng).expect("non-empty");
        ancestors.push(op);
        let child = random_tree(rng, vocab, dim, depth - 1, ancestors);
        ancestors.pop();
        Expr::unary(op, child)
    } else {
        let ops: Vec<BinaryOp> = vocab.binary_ops().collect();
        let op = *ops.choose(rng).expect("binary vocabulary is never empty");
        let a = random_tree(rng, vocab, dim, depth - 1, ancestors);
        let b = random_tree(rng, vocab, dim, depth - 1, ancestors);
        Expr::binary(op, a, b)
    }
}

fn random_leaf(rng: &mut ChaCha8Rng, dim: usize) -> Expr {
    if rng.gen_bool(0.7) {
        Expr::variable(rng.gen_range(0..dim))
    } else {
        Expr::constant(quantize(rng.gen_range(-3.0..3.0)))
    }
}

/// Constants enter with short decimal expansions; refinement sharpens them
/// later when it pays off.
fn quantize(c: f64) -> f64 {
    (c * 100.0).round() / 100.0
}

/// Subtree exchange: a random donor subtree replaces a random node of the
/// recipient.
fn crossover(rng: &mut ChaCha8Rng, recipient: &Expr, donor: &Expr) -> Expr {
    let take = rng.gen_range(0..donor.node_count());
    let graft = donor.subtree(take).expect("index in range");
    let at = rng.gen_range(0..recipient.node_count());
    recipient.replace_subtree(at, graft)
}

/// One of: operator point mutation, constant jitter, subtree replacement,
/// hoist.
fn mutate(rng: &mut ChaCha8Rng, expr: &Expr, vocab: &OperatorVocabulary, dim: usize) -> Expr {
    match rng.gen_range(0..4u8) {
        0 => point_mutation(rng, expr, vocab, dim),
        1 => constant_jitter(rng, expr),
        2 => {
            let at = rng.gen_range(0..expr.node_count());
            let depth = rng.gen_range(1..=2);
            let replacement = random_tree(rng, vocab, dim, depth, &mut Vec::new());
            expr.replace_subtree(at, replacement)
        }
        _ => {
            // hoist: promote a random subtree to the root
            let at = rng.gen_range(0..expr.node_count());
            expr.subtree(at).expect("index in range")
        }
    }
}

fn constant_jitter(rng: &mut ChaCha8Rng, expr: &Expr) -> Expr {
    let consts = expr.constants();
    if consts.is_empty() {
        // nothing to jitter: scale the whole tree instead
        return Expr::mul(Expr::constant(quantize(rng.gen_range(-2.0..2.0))), expr.clone());
    }
    let mut vals = consts;
    let i = rng.gen_range(0..vals.len());
    let factor = 1.0 + 0.4 * standard_normalish(rng);
    vals[i] = vals[i] * factor + 0.1 * standard_normalish(rng);
    expr.with_constants(&vals)
}

/// Cheap symmetric noise; the exact law does not matter for search.
fn standard_normalish(rng: &mut ChaCha8Rng) -> f64 {
    let a: f64 = rng.gen_range(-1.0..1.0);
    let b: f64 = rng.gen_range(-1.0..1.0);
    let c: f64 = rng.gen_range(-1.0..1.0);
    a + b + c
}

fn point_mutation(rng: &mut ChaCha8Rng, expr: &Expr, vocab: &OperatorVocabulary, dim: usize) -> Expr {
    let at = rng.gen_range(0..expr.node_count());
    let node = expr.subtree(at).expect("index in range");
    let new_node = match node.kind() {
        ExprKind::Constant(_) => random_leaf(rng, dim),
        ExprKind::Variable(_) => Expr::variable(rng.gen_range(0..dim)),
        ExprKind::Unary(op, child) => {
            let others: Vec<UnaryOp> = vocab.unary_ops().filter(|u| u != op).collect();
            match others.choose(rng) {
                Some(&other) => Expr::unary(other, child.clone()),
                None => child.clone(),
            }
        }
        ExprKind::Pow(base, k) => {
            let k = *k;
            let new_k = if rng.gen_bool(0.5) { k + 1 } else { k.saturating_sub(1).max(1) };
            Expr::pow(base.clone(), new_k)
        }
        ExprKind::Div(n, d) => {
            if rng.gen_bool(0.5) {
                Expr::mul(n.clone(), d.clone())
            } else {
                Expr::div(d.clone(), n.clone())
            }
        }
        ExprKind::Mul(fs) => Expr::sum(fs.iter().filter(|f| f.as_constant().is_none()).cloned()),
        ExprKind::Add(ts) => Expr::product(ts.iter().cloned()),
    };
    expr.replace_subtree(at, new_node)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    fn ctx_fixture<'a>(
        states: &'a DMatrix<f64>,
        target: &'a [f64],
        cfg: &'a GPConfig,
    ) -> EvalContext<'a> {
        EvalContext {
            states,
            target,
            dim: states.ncols(),
            cfg,
        }
    }

    #[test]
    fn generated_trees_respect_constraints() {
        let vocab = OperatorVocabulary::standard();
        let mut rng = seeds::rng(1, "test-trees", &[]);
        for _ in 0..300 {
            let t = random_tree(&mut rng, &vocab, 2, 4, &mut Vec::new());
            assert!(check_constraints(&t, &vocab), "violates nesting: {t}");
            assert!(t.max_variable().is_none_or(|v| v < 2));
        }
    }

    #[test]
    fn population_members_stay_admissible() {
        let states = DMatrix::from_fn(32, 2, |i, j| (i as f64 * 0.37 + j as f64).sin());
        let target: Vec<f64> = (0..32).map(|i| states[(i, 0)] * 2.0).collect();
        let cfg = GPConfig {
            seed: 3,
            ..GPConfig::default()
        };
        let ctx = ctx_fixture(&states, &target, &cfg);
        let mut rng = seeds::rng(3, "test-pop", &[]);
        let mut pop = Population::initialize(&mut rng, &ctx);
        for g in 0..5 {
            let mut grng = seeds::rng(3, "test-gen", &[g]);
            pop.step(&mut grng, &ctx);
        }
        for ind in &pop.members {
            assert!(ind.loss.is_finite());
            assert!(ind.complexity <= cfg.max_complexity);
            assert!(check_constraints(&ind.expr, &cfg.vocabulary));
        }
    }
}
