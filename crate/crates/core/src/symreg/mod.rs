//! Multi-population evolutionary symbolic regression with full
//! Pareto-front harvesting.
//!
//! Populations evolve independently inside an epoch and exchange their best
//! individual at epoch barriers, each (population, generation) pair drawing
//! from its own derived random stream. The returned front is therefore
//! bit-identical for a fixed seed regardless of worker count, and extending
//! the generation budget can only improve the archive.

mod engine;
mod nelder_mead;

use crate::expr::{Expr, ExprKind, OperatorVocabulary, UnaryOp};
use crate::seeds;
use engine::{chunk_loss, EvalContext, Population};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Generations evolved between migration barriers.
const EPOCH_LEN: usize = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GPConfig {
    pub vocabulary: OperatorVocabulary,
    /// Number of independently evolving populations.
    pub population_count: usize,
    pub population_size: usize,
    pub generations: usize,
    /// Hard cap on tree operator count.
    pub max_complexity: usize,
    /// Fitness is `mse * (1 + parsimony * complexity)`.
    pub parsimony: f64,
    pub tournament_size: usize,
    pub crossover_probability: f64,
    pub mutation_probability: f64,
    /// Evaluation budget for each constant-refinement call.
    pub constant_opt_iters: usize,
    pub seed: u64,
}

impl Default for GPConfig {
    fn default() -> Self {
        GPConfig {
            vocabulary: OperatorVocabulary::smooth(),
            population_count: 8,
            population_size: 33,
            generations: 60,
            max_complexity: 10,
            parsimony: 0.001,
            tournament_size: 5,
            crossover_probability: 0.65,
            mutation_probability: 0.30,
            constant_opt_iters: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymRegError {
    #[error("chunk has {rows} rows; at least {min} required")]
    TooFewRows { rows: usize, min: usize },
    #[error("target contains non-finite values")]
    NonFiniteTarget,
    #[error("target length {target} does not match {rows} state rows")]
    ShapeMismatch { rows: usize, target: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl GPConfig {
    pub fn validate(&self) -> Result<(), SymRegError> {
        let positive = [
            ("population_count", self.population_count),
            ("population_size", self.population_size),
            ("generations", self.generations),
            ("tournament_size", self.tournament_size),
            ("constant_opt_iters", self.constant_opt_iters),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(SymRegError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.max_complexity < 3 {
            return Err(SymRegError::InvalidConfig(
                "max_complexity must be at least 3".into(),
            ));
        }
        if !(0.0..=1.0).contains(&(self.crossover_probability + self.mutation_probability)) {
            return Err(SymRegError::InvalidConfig(
                "crossover + mutation probability must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Complexity-indexed archive of the best expressions from one search run.
/// Stored entries are mutually non-dominated: loss strictly decreases as
/// complexity increases.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParetoFront {
    entries: BTreeMap<usize, (Expr, f64)>,
}

impl ParetoFront {
    /// Dominance-filters a best-per-complexity archive.
    fn from_archive(archive: BTreeMap<usize, (Expr, f64)>) -> Self {
        let mut entries = BTreeMap::new();
        let mut best = f64::INFINITY;
        for (c, (expr, loss)) in archive {
            if loss < best {
                best = loss;
                entries.insert(c, (expr, loss));
            }
        }
        ParetoFront { entries }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Expr, f64)> {
        self.entries.iter().map(|(c, (e, l))| (*c, e, *l))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry with the lowest loss (the highest stored complexity).
    pub fn best(&self) -> Option<(usize, &Expr, f64)> {
        self.iter().last()
    }

    /// Front entry minimizing `loss * (1 + parsimony * complexity)`.
    pub fn select_parsimonious(&self, parsimony: f64) -> Option<(usize, &Expr, f64)> {
        self.iter().min_by(|a, b| {
            let fa = a.2 * (1.0 + parsimony * a.0 as f64);
            let fb = b.2 * (1.0 + parsimony * b.0 as f64);
            fa.total_cmp(&fb)
        })
    }

    /// Serialization records: `(complexity, loss, canonical string)`.
    pub fn records(&self) -> Vec<(usize, f64, String)> {
        self.iter().map(|(c, e, l)| (c, l, e.to_string())).collect()
    }
}

fn insert_if_better(archive: &mut BTreeMap<usize, (Expr, f64)>, c: usize, expr: Expr, loss: f64) {
    match archive.get(&c) {
        Some((_, existing)) if *existing <= loss => {}
        _ => {
            archive.insert(c, (expr, loss));
        }
    }
}

/// True when no unary node encloses a descendant unary node the vocabulary
/// forbids inside it (nested trig under the standard vocabulary).
pub fn check_constraints(e: &Expr, vocab: &OperatorVocabulary) -> bool {
    fn walk(e: &Expr, vocab: &OperatorVocabulary, ancestors: &mut Vec<UnaryOp>) -> bool {
        match e.kind() {
            ExprKind::Constant(_) | ExprKind::Variable(_) => true,
            ExprKind::Unary(op, child) => {
                if ancestors.iter().any(|a| vocab.forbids_nesting(*a, *op)) {
                    return false;
                }
                ancestors.push(*op);
                let ok = walk(child, vocab, ancestors);
                ancestors.pop();
                ok
            }
            ExprKind::Pow(b, _) => walk(b, vocab, ancestors),
            ExprKind::Div(n, d) => walk(n, vocab, ancestors) && walk(d, vocab, ancestors),
            ExprKind::Mul(v) | ExprKind::Add(v) => v.iter().all(|x| walk(x, vocab, ancestors)),
        }
    }
    walk(e, vocab, &mut Vec::new())
}

/// Refines the numeric constants of `e` against `(states, target)` with a
/// bounded derivative-free search. Never increases the training MSE; a
/// candidate that evaluates non-finite anywhere is rejected.
pub fn fit_constants(e: &Expr, states: &DMatrix<f64>, target: &[f64]) -> Expr {
    fit_constants_with_budget(e, states, target, GPConfig::default().constant_opt_iters)
}

/// Closed-form least-squares refit of the outer coefficients of an
/// additive expression (plus intercept). The structure is untouched; only
/// prefactors and the constant term change. Returns the original when the
/// refit does not help.
pub(crate) fn linear_refit(e: &Expr, states: &DMatrix<f64>, target: &[f64]) -> Expr {
    let terms = e.additive_terms();
    if terms.len() > 12 {
        return e.clone();
    }
    let mut cores: Vec<Expr> = Vec::with_capacity(terms.len());
    for t in &terms {
        if t.as_constant().is_some() {
            continue; // folded into the intercept column
        }
        let (_, core) = t.split_coefficient();
        if !cores.contains(&core) {
            cores.push(core);
        }
    }
    if cores.is_empty() {
        return e.clone();
    }
    let m = states.nrows();
    let mut design = DMatrix::zeros(m, cores.len() + 1);
    for i in 0..m {
        design[(i, 0)] = 1.0;
    }
    for (k, core) in cores.iter().enumerate() {
        let Ok(col) = core.evaluate(states) else {
            return e.clone();
        };
        for (i, v) in col.iter().enumerate() {
            if !v.is_finite() {
                return e.clone();
            }
            design[(i, k + 1)] = *v;
        }
    }
    let y = nalgebra::DVector::from_column_slice(target);
    let Some(beta) = crate::numeric::ridge_solve(&design, &y, 1e-10) else {
        return e.clone();
    };
    let mut parts: Vec<Expr> = vec![Expr::constant(beta[0])];
    for (k, core) in cores.iter().enumerate() {
        parts.push(Expr::mul(Expr::constant(beta[k + 1]), core.clone()));
    }
    let refit = Expr::sum(parts);
    match (
        chunk_loss(&refit, states, target),
        chunk_loss(e, states, target),
    ) {
        (Some(new), Some(old)) if new <= old => refit,
        _ => e.clone(),
    }
}

pub(crate) fn fit_constants_with_budget(
    e: &Expr,
    states: &DMatrix<f64>,
    target: &[f64],
    max_evals: usize,
) -> Expr {
    let consts = e.constants();
    if consts.is_empty() {
        return e.clone();
    }
    let objective = |vals: &[f64]| {
        if vals.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        chunk_loss(&e.with_constants(vals), states, target).unwrap_or(f64::INFINITY)
    };
    let original = objective(&consts);
    // the loss surface over constants is multimodal (frequencies, phases);
    // restart the simplex from a few deterministic rescalings
    let starts: [Vec<f64>; 5] = [
        consts.clone(),
        consts.iter().map(|c| c * 2.0).collect(),
        consts.iter().map(|c| c * 4.0).collect(),
        consts.iter().map(|c| c * 0.5).collect(),
        consts.iter().map(|c| -c).collect(),
    ];
    let per_start = (max_evals / starts.len()).max(20);
    let mut best = consts.clone();
    let mut best_loss = original;
    for start in &starts {
        let cand = nelder_mead::minimize(&objective, start, per_start, 1e-12);
        let loss = objective(&cand);
        if loss < best_loss {
            best_loss = loss;
            best = cand;
        }
    }
    if best_loss.is_finite() && best_loss <= original {
        e.with_constants(&best)
    } else {
        e.clone()
    }
}

/// Evolves expression populations against one data chunk and harvests the
/// full Pareto front over (tree complexity, training MSE).
pub fn evolve(
    states: &DMatrix<f64>,
    target: &[f64],
    config: &GPConfig,
) -> Result<ParetoFront, SymRegError> {
    config.validate()?;
    let rows = states.nrows();
    if rows < 10 {
        return Err(SymRegError::TooFewRows { rows, min: 10 });
    }
    if target.len() != rows {
        return Err(SymRegError::ShapeMismatch {
            rows,
            target: target.len(),
        });
    }
    if target.iter().any(|t| !t.is_finite()) {
        return Err(SymRegError::NonFiniteTarget);
    }

    let mean = target.iter().sum::<f64>() / rows as f64;
    let variance = target.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / rows as f64;
    if variance < 1e-24 {
        let mut archive = BTreeMap::new();
        archive.insert(0, (Expr::constant(mean), variance));
        return Ok(ParetoFront::from_archive(archive));
    }

    let ctx = EvalContext {
        states,
        target,
        dim: states.ncols(),
        cfg: config,
    };

    let mut populations: Vec<Population> = (0..config.population_count)
        .map(|p| {
            let mut rng = seeds::rng(config.seed, "gp-init", &[p as u64]);
            Population::initialize(&mut rng, &ctx)
        })
        .collect();

    // Cumulative archive merged at every epoch barrier. Barrier work is a
    // pure function of the population states, so two runs whose generation
    // budgets share an epoch prefix agree exactly on that prefix and a
    // larger budget can only improve the archive.
    let mut global: BTreeMap<usize, (Expr, f64)> = BTreeMap::new();
    let mut polish_memo: std::collections::BTreeSet<Expr> = std::collections::BTreeSet::new();

    let epochs = config.generations.div_ceil(EPOCH_LEN);
    for epoch in 0..epochs {
        let first = epoch * EPOCH_LEN;
        let last = (first + EPOCH_LEN).min(config.generations);
        populations.par_iter_mut().enumerate().for_each(|(p, pop)| {
            for g in first..last {
                let mut rng = seeds::rng(config.seed, "gp-gen", &[p as u64, g as u64]);
                pop.step(&mut rng, &ctx);
            }
        });

        for pop in &populations {
            for (c, (expr, loss)) in &pop.archive {
                insert_if_better(&mut global, *c, expr.clone(), *loss);
            }
        }

        // refine constants of entries not polished before and archive the
        // refinements alongside the originals
        let pending: Vec<(Expr, f64)> = global
            .values()
            .filter(|(e, _)| !polish_memo.contains(e))
            .cloned()
            .collect();
        for (expr, loss) in pending {
            polish_memo.insert(expr.clone());
            let refined =
                fit_constants_with_budget(&expr, states, target, 4 * config.constant_opt_iters);
            if refined == expr {
                continue;
            }
            if let Some(l) = chunk_loss(&refined, states, target) {
                if l <= loss {
                    let c = refined.tree_ops();
                    if c <= config.max_complexity && check_constraints(&refined, &config.vocabulary)
                    {
                        polish_memo.insert(refined.clone());
                        insert_if_better(&mut global, c, refined, l);
                    }
                }
            }
        }

        // ring migration at the epoch barrier
        if epoch + 1 < epochs && populations.len() > 1 {
            let bests: Vec<_> = populations.iter().map(|p| p.best().clone()).collect();
            let n = populations.len();
            for (p, pop) in populations.iter_mut().enumerate() {
                pop.replace_worst(bests[(p + n - 1) % n].clone());
            }
        }
    }

    Ok(ParetoFront::from_archive(global))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::BinaryOp;

    fn x(i: usize) -> Expr {
        Expr::variable(i)
    }

    fn grid_states(n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, 1, |i, _| lo + (hi - lo) * i as f64 / (n - 1) as f64)
    }

    #[test]
    fn nested_trig_rejected() {
        let vocab = OperatorVocabulary::standard();
        assert!(!check_constraints(&Expr::sin(Expr::sin(x(0))), &vocab));
        assert!(check_constraints(
            &Expr::add(Expr::sin(x(0)), Expr::cos(x(1))),
            &vocab
        ));
        assert!(!check_constraints(
            &Expr::sin(Expr::mul(x(0), Expr::cos(x(1)))),
            &vocab
        ));
        // exp may wrap trig under the standard constraint set
        assert!(check_constraints(&Expr::exp(Expr::sin(x(0))), &vocab));
    }

    #[test]
    fn fit_constants_linear_coefficient() {
        // oracle: least squares of 3*x0 on x0 gives exactly 3
        let states = grid_states(50, -2.0, 2.0);
        let target: Vec<f64> = states.column(0).iter().map(|v| 3.0 * v).collect();
        let e = Expr::mul(Expr::constant(0.5), x(0));
        let fitted = fit_constants(&e, &states, &target);
        let c = fitted.constants()[0];
        assert!((c - 3.0).abs() < 1e-6, "fitted {c}");
    }

    #[test]
    fn fit_constants_never_worsens() {
        let states = grid_states(20, -1.0, 1.0);
        let target: Vec<f64> = states.column(0).iter().map(|v| v * v).collect();
        let e = Expr::pow(x(0), 2);
        assert_eq!(fit_constants(&e, &states, &target), e);
    }

    #[test]
    fn fit_constants_frequency_recovery() {
        // oracle: grid search over c in [0, 5] puts the optimum at 2
        let states = grid_states(400, -3.0, 3.0);
        let target: Vec<f64> = states.column(0).iter().map(|v| (2.0 * v).sin()).collect();
        let e = Expr::sin(Expr::mul(Expr::constant(0.5), x(0)));
        let fitted = fit_constants_with_budget(&e, &states, &target, 400);
        let c = fitted.constants()[0];
        assert!((c - 2.0).abs() < 1e-3, "fitted {c}");
    }

    #[test]
    fn evolve_recovers_linear_target() {
        let states = grid_states(64, -2.0, 2.0);
        let target: Vec<f64> = states.column(0).iter().map(|v| 2.0 * v).collect();
        let cfg = GPConfig {
            vocabulary: OperatorVocabulary::new(
                [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul],
                [],
                [],
            ),
            seed: 11,
            ..GPConfig::default()
        };
        let front = evolve(&states, &target, &cfg).unwrap();
        let hit = front
            .iter()
            .find(|(c, _, loss)| *c <= 2 && *loss < 1e-12)
            .unwrap_or_else(|| panic!("no exact linear entry in {:?}", front.records()));
        assert_eq!(hit.1, &Expr::mul(Expr::constant(2.0), x(0)));
    }

    #[test]
    fn evolve_constant_target_degenerates() {
        let states = grid_states(32, -1.0, 1.0);
        let target = vec![5.0; 32];
        let front = evolve(&states, &target, &GPConfig::default()).unwrap();
        assert_eq!(front.len(), 1);
        let (c, e, _) = front.iter().next().unwrap();
        assert_eq!(c, 0);
        assert!((e.as_constant().unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn evolve_finds_sine() {
        let states = grid_states(128, -3.0, 3.0);
        let target: Vec<f64> = states.column(0).iter().map(|v| v.sin()).collect();
        let cfg = GPConfig {
            seed: 5,
            ..GPConfig::default()
        };
        let front = evolve(&states, &target, &cfg).unwrap();
        // validate against the analytic sine on held-out points
        let holdout = grid_states(77, -2.9, 2.9);
        let ok = front.iter().any(|(_, e, loss)| {
            if loss >= 1e-8 {
                return false;
            }
            let pred = e.evaluate(&holdout).unwrap();
            pred.iter()
                .zip(holdout.column(0).iter())
                .all(|(p, v)| (p - v.sin()).abs() < 1e-4)
        });
        assert!(ok, "front lacks sine: {:?}", front.records());
    }

    #[test]
    fn front_is_strictly_dominating() {
        let states = grid_states(64, -2.0, 2.0);
        let target: Vec<f64> = states
            .column(0)
            .iter()
            .map(|v| 1.3 * v.sin() + 0.5 * v * v)
            .collect();
        let front = evolve(
            &states,
            &target,
            &GPConfig {
                seed: 9,
                ..GPConfig::default()
            },
        )
        .unwrap();
        let entries: Vec<_> = front.iter().collect();
        for w in entries.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[0].2 > w[1].2);
        }
        for (_, e, _) in &entries {
            assert!(check_constraints(e, &OperatorVocabulary::standard()));
        }
    }

    #[test]
    fn evolve_is_deterministic() {
        let states = grid_states(48, -2.0, 2.0);
        let target: Vec<f64> = states.column(0).iter().map(|v| v * v - 0.4 * v).collect();
        let cfg = GPConfig {
            seed: 21,
            ..GPConfig::default()
        };
        let a = evolve(&states, &target, &cfg).unwrap();
        let b = evolve(&states, &target, &cfg).unwrap();
        assert_eq!(a.records(), b.records());
    }

    #[test]
    fn longer_budget_never_hurts() {
        let states = grid_states(48, -2.0, 2.0);
        let target: Vec<f64> = states
            .column(0)
            .iter()
            .map(|v| (1.7 * v).sin() - 0.3 * v)
            .collect();
        let short = evolve(
            &states,
            &target,
            &GPConfig {
                seed: 2,
                generations: 20,
                ..GPConfig::default()
            },
        )
        .unwrap();
        let long = evolve(
            &states,
            &target,
            &GPConfig {
                seed: 2,
                generations: 60,
                ..GPConfig::default()
            },
        )
        .unwrap();
        for (c, _, loss) in short.iter() {
            let matched = long.iter().any(|(c2, _, l2)| c2 <= c && l2 <= loss);
            assert!(matched, "budget regression at complexity {c}");
        }
    }
}
