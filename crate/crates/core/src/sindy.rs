//! Sparse coefficient identification: library-matrix construction, the
//! STLSQ and SR3 optimizers, bootstrap ensembling with an
//! inclusion-probability cutoff, and the fixed enriched basis used by the
//! fixed-library baseline.

use crate::expr::Expr;
use crate::numeric::ridge_solve;
use crate::seeds;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SindyError {
    #[error("feature {term} evaluates non-finite at row {row}")]
    NonFiniteFeature { term: usize, row: usize },
    #[error("derivative matrix has {xdot} rows but the library matrix has {theta}")]
    ShapeMismatch { theta: usize, xdot: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Expr(#[from] crate::expr::ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Stlsq,
    Sr3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LibraryStrategy {
    /// One library and one fit per state variable.
    #[default]
    Separate,
    /// A single shared library fitted across all state variables.
    Unified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SindyConfig {
    /// Hard coefficient threshold.
    #[serde(alias = "lambda")]
    pub threshold: f64,
    /// Ridge penalty inside each least-squares solve.
    #[serde(alias = "alpha")]
    pub ridge: f64,
    pub optimizer: Optimizer,
    /// SR3 relaxation strength.
    #[serde(alias = "nu")]
    pub relaxation: f64,
    pub max_iterations: usize,
    /// Bootstrap replicates.
    #[serde(alias = "B")]
    pub replicates: usize,
    /// Inclusion-probability cutoff.
    #[serde(alias = "kappa")]
    pub inclusion_cutoff: f64,
    pub library_strategy: LibraryStrategy,
}

impl Default for SindyConfig {
    fn default() -> Self {
        SindyConfig {
            threshold: 0.21,
            ridge: 0.05,
            optimizer: Optimizer::Stlsq,
            relaxation: 1.0,
            max_iterations: 25,
            replicates: 20,
            inclusion_cutoff: 0.80,
            library_strategy: LibraryStrategy::Separate,
        }
    }
}

impl SindyConfig {
    pub fn validate(&self) -> Result<(), SindyError> {
        if self.threshold <= 0.0 {
            return Err(SindyError::InvalidConfig("threshold must be positive".into()));
        }
        if self.ridge < 0.0 {
            return Err(SindyError::InvalidConfig("ridge must be non-negative".into()));
        }
        if self.relaxation <= 0.0 {
            return Err(SindyError::InvalidConfig("relaxation must be positive".into()));
        }
        if self.replicates == 0 {
            return Err(SindyError::InvalidConfig("replicates must be at least 1".into()));
        }
        if !(self.inclusion_cutoff > 0.0 && self.inclusion_cutoff <= 1.0) {
            return Err(SindyError::InvalidConfig(
                "inclusion cutoff must lie in (0, 1]".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(SindyError::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Library matrix: an all-ones bias column followed by one column per basis
/// expression evaluated over the states. Any non-finite entry is an error.
pub fn build_theta(basis: &[Expr], states: &DMatrix<f64>) -> Result<DMatrix<f64>, SindyError> {
    let m = states.nrows();
    let mut theta = DMatrix::zeros(m, basis.len() + 1);
    for i in 0..m {
        theta[(i, 0)] = 1.0;
    }
    for (j, expr) in basis.iter().enumerate() {
        let col = expr.evaluate(states)?;
        for (i, v) in col.iter().enumerate() {
            if !v.is_finite() {
                return Err(SindyError::NonFiniteFeature { term: j + 1, row: i });
            }
            theta[(i, j + 1)] = *v;
        }
    }
    Ok(theta)
}

/// Result of one sparse fit: the `p x n` coefficient matrix with inactive
/// entries exactly zero, and a per-variable flag marking columns where
/// every term was thresholded away.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFit {
    pub xi: DMatrix<f64>,
    pub zeroed_columns: Vec<bool>,
}

fn solve_on_support(
    theta: &DMatrix<f64>,
    y: &DVector<f64>,
    support: &[usize],
    ridge: f64,
) -> Option<DVector<f64>> {
    let sub = theta.select_columns(support.iter());
    ridge_solve(&sub, y, ridge)
}

fn stlsq_column(
    theta: &DMatrix<f64>,
    y: &DVector<f64>,
    threshold: f64,
    ridge: f64,
    max_iter: usize,
    initial_support: Option<&[usize]>,
) -> (DVector<f64>, bool) {
    let p = theta.ncols();
    let mut support: Vec<usize> = match initial_support {
        Some(s) => s.to_vec(),
        None => (0..p).collect(),
    };
    let mut xi = DVector::zeros(p);
    if support.is_empty() {
        return (xi, true);
    }
    for _ in 0..max_iter {
        let Some(coeffs) = solve_on_support(theta, y, &support, ridge) else {
            return (DVector::zeros(p), true);
        };
        let kept: Vec<usize> = support
            .iter()
            .enumerate()
            .filter(|(k, _)| coeffs[*k].abs() >= threshold)
            .map(|(_, &j)| j)
            .collect();
        if kept == support {
            xi.fill(0.0);
            for (k, &j) in support.iter().enumerate() {
                xi[j] = coeffs[k];
            }
            return (xi, false);
        }
        support = kept;
        if support.is_empty() {
            return (DVector::zeros(p), true);
        }
    }
    // iteration cap: report the last support's refit
    let Some(coeffs) = solve_on_support(theta, y, &support, ridge) else {
        return (DVector::zeros(p), true);
    };
    xi.fill(0.0);
    for (k, &j) in support.iter().enumerate() {
        xi[j] = coeffs[k];
    }
    (xi, false)
}

/// Sequentially thresholded least squares: alternate a ridge solve on the
/// active set with hard thresholding at `threshold` until the active set is
/// stable. A column whose terms all threshold away comes back as zeros with
/// its warning flag set, not as an error.
pub fn stlsq(
    theta: &DMatrix<f64>,
    xdot: &DMatrix<f64>,
    threshold: f64,
    ridge: f64,
    max_iter: usize,
) -> Result<SparseFit, SindyError> {
    stlsq_with_support(theta, xdot, threshold, ridge, max_iter, None)
}

/// STLSQ started from a given per-variable support instead of the full
/// library.
pub fn stlsq_with_support(
    theta: &DMatrix<f64>,
    xdot: &DMatrix<f64>,
    threshold: f64,
    ridge: f64,
    max_iter: usize,
    initial_support: Option<&[Vec<usize>]>,
) -> Result<SparseFit, SindyError> {
    if theta.nrows() != xdot.nrows() {
        return Err(SindyError::ShapeMismatch {
            theta: theta.nrows(),
            xdot: xdot.nrows(),
        });
    }
    let n = xdot.ncols();
    let p = theta.ncols();
    let mut xi = DMatrix::zeros(p, n);
    let mut zeroed = vec![false; n];
    for j in 0..n {
        let y = DVector::from_column_slice(xdot.column(j).as_slice());
        let init = initial_support.map(|s| s[j].as_slice());
        let (col, empty) = stlsq_column(theta, &y, threshold, ridge, max_iter, init);
        zeroed[j] = empty;
        xi.set_column(j, &col);
    }
    Ok(SparseFit { xi, zeroed_columns: zeroed })
}

/// Sparse relaxed regression: couples the least-squares variable to an
/// auxiliary thresholded variable through a quadratic penalty of strength
/// `1 / relaxation`, runs a fixed number of alternations, and returns the
/// coupled solve masked to the auxiliary support.
pub fn sr3(
    theta: &DMatrix<f64>,
    xdot: &DMatrix<f64>,
    threshold: f64,
    relaxation: f64,
    max_iter: usize,
) -> Result<SparseFit, SindyError> {
    if theta.nrows() != xdot.nrows() {
        return Err(SindyError::ShapeMismatch {
            theta: theta.nrows(),
            xdot: xdot.nrows(),
        });
    }
    let n = xdot.ncols();
    let p = theta.ncols();
    let mut lhs = theta.transpose() * theta;
    for i in 0..p {
        lhs[(i, i)] += 1.0 / relaxation;
    }
    let factorization = lhs.clone().cholesky();
    let mut xi = DMatrix::zeros(p, n);
    let mut zeroed = vec![false; n];
    for j in 0..n {
        let y = DVector::from_column_slice(xdot.column(j).as_slice());
        let xty = theta.transpose() * &y;
        let mut w: DVector<f64> = DVector::zeros(p);
        let mut coeffs = DVector::zeros(p);
        for _ in 0..max_iter {
            let rhs = &xty + &w / relaxation;
            coeffs = match &factorization {
                Some(c) => c.solve(&rhs),
                None => lhs
                    .clone()
                    .svd(true, true)
                    .solve(&rhs, 1e-12)
                    .expect("SVD solve of a square system"),
            };
            let new_w = coeffs.map(|v| if v.abs() >= threshold { v } else { 0.0 });
            if new_w == w {
                break;
            }
            w = new_w;
        }
        let mut col = DVector::zeros(p);
        let mut any = false;
        for i in 0..p {
            if w[i] != 0.0 {
                col[i] = coeffs[i];
                any = true;
            }
        }
        zeroed[j] = !any;
        xi.set_column(j, &col);
    }
    Ok(SparseFit { xi, zeroed_columns: zeroed })
}

/// Sparse coefficients with per-entry bootstrap inclusion probabilities.
/// Masked entries are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    pub values: DMatrix<f64>,
    pub inclusion: DMatrix<f64>,
    /// Replicates whose fit failed and were counted as all-zero.
    pub replicate_failures: usize,
    /// Per-variable flag: no term survived the cutoff.
    pub zeroed_columns: Vec<bool>,
}

impl CoefficientMatrix {
    /// Re-applies the hard cutoff; idempotent by construction.
    pub fn apply_cutoff(&self, kappa: f64) -> CoefficientMatrix {
        let mut values = self.values.clone();
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if self.inclusion[(i, j)] < kappa {
                    values[(i, j)] = 0.0;
                }
            }
        }
        let zeroed = (0..values.ncols())
            .map(|j| values.column(j).iter().all(|v| *v == 0.0))
            .collect();
        CoefficientMatrix {
            values,
            inclusion: self.inclusion.clone(),
            replicate_failures: self.replicate_failures,
            zeroed_columns: zeroed,
        }
    }
}

fn run_optimizer(
    theta: &DMatrix<f64>,
    xdot: &DMatrix<f64>,
    cfg: &SindyConfig,
) -> Result<SparseFit, SindyError> {
    match cfg.optimizer {
        Optimizer::Stlsq => stlsq(theta, xdot, cfg.threshold, cfg.ridge, cfg.max_iterations),
        Optimizer::Sr3 => sr3(theta, xdot, cfg.threshold, cfg.relaxation, cfg.max_iterations),
    }
}

/// Bagged sparse identification: `replicates` bootstrap row-resamples are
/// fitted independently; a term is kept when its inclusion probability
/// reaches the cutoff, with its value the mean over the replicates in which
/// it was active. Failed replicates count as all-zero fits.
pub fn ensemble_fit(
    theta: &DMatrix<f64>,
    xdot: &DMatrix<f64>,
    cfg: &SindyConfig,
    seed: u64,
) -> Result<CoefficientMatrix, SindyError> {
    cfg.validate()?;
    if theta.nrows() != xdot.nrows() {
        return Err(SindyError::ShapeMismatch {
            theta: theta.nrows(),
            xdot: xdot.nrows(),
        });
    }
    let m = theta.nrows();
    let p = theta.ncols();
    let n = xdot.ncols();

    let fits: Vec<Option<SparseFit>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeds::rng(seed, "bootstrap", &[b as u64]);
            let rows: Vec<usize> = (0..m).map(|_| rng.gen_range(0..m)).collect();
            let theta_b = theta.select_rows(rows.iter());
            let xdot_b = xdot.select_rows(rows.iter());
            run_optimizer(&theta_b, &xdot_b, cfg).ok()
        })
        .collect();

    let mut inclusion: DMatrix<f64> = DMatrix::zeros(p, n);
    let mut sums: DMatrix<f64> = DMatrix::zeros(p, n);
    let mut counts: DMatrix<f64> = DMatrix::zeros(p, n);
    let mut failures = 0usize;
    for fit in &fits {
        match fit {
            Some(f) => {
                for j in 0..n {
                    for i in 0..p {
                        let v = f.xi[(i, j)];
                        if v != 0.0 {
                            inclusion[(i, j)] += 1.0;
                            sums[(i, j)] += v;
                            counts[(i, j)] += 1.0;
                        }
                    }
                }
            }
            None => failures += 1,
        }
    }
    inclusion /= cfg.replicates as f64;

    let mut values = DMatrix::zeros(p, n);
    for j in 0..n {
        for i in 0..p {
            if inclusion[(i, j)] >= cfg.inclusion_cutoff && counts[(i, j)] > 0.0 {
                values[(i, j)] = sums[(i, j)] / counts[(i, j)];
            }
        }
    }
    let zeroed = (0..n)
        .map(|j| values.column(j).iter().all(|v| *v == 0.0))
        .collect();
    Ok(CoefficientMatrix {
        values,
        inclusion,
        replicate_failures: failures,
        zeroed_columns: zeroed,
    })
}

/// The fixed enriched basis: monomials of total degree 1..=`poly_degree`,
/// sines and cosines of each scaled variable up to `fourier_freq`, and all
/// monomial-times-trig products. The bias term is not included here (the
/// library matrix adds it).
pub fn enriched_library(n: usize, poly_degree: u32, fourier_freq: u32) -> Vec<Expr> {
    let mut out: Vec<Expr> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut push = |e: Expr, out: &mut Vec<Expr>| {
        if seen.insert(e.clone()) {
            out.push(e);
        }
    };

    let monomial = |exps: &[u32]| {
        Expr::product(
            exps.iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(j, &k)| Expr::pow(Expr::variable(j), k)),
        )
    };
    let mut monomials: Vec<Vec<u32>> = Vec::new();
    enumerate_monomials(n, poly_degree, &mut vec![0; n], 0, &mut monomials);

    for exps in &monomials {
        push(monomial(exps), &mut out);
    }
    let mut trig: Vec<Expr> = Vec::new();
    for f in 1..=fourier_freq {
        for j in 0..n {
            let arg = Expr::mul(Expr::constant(f as f64), Expr::variable(j));
            trig.push(Expr::sin(arg.clone()));
            trig.push(Expr::cos(arg));
        }
    }
    for t in &trig {
        push(t.clone(), &mut out);
    }
    for exps in &monomials {
        for t in &trig {
            push(Expr::mul(monomial(exps), t.clone()), &mut out);
        }
    }
    out
}

/// All exponent vectors with `1 <= total degree <= max_deg`, graded
/// lexicographic order.
fn enumerate_monomials(
    n: usize,
    max_deg: u32,
    current: &mut Vec<u32>,
    pos: usize,
    out: &mut Vec<Vec<u32>>,
) {
    if pos == n {
        if current.iter().sum::<u32>() >= 1 {
            out.push(current.clone());
        }
        return;
    }
    let used: u32 = current[..pos].iter().sum();
    for k in 0..=(max_deg - used) {
        current[pos] = k;
        enumerate_monomials(n, max_deg, current, pos + 1, out);
    }
    current[pos] = 0;
}

/// Assembles per-variable governing equations from a coefficient matrix
/// over `basis` (bias first, matching [`build_theta`] column order).
pub fn model_to_equations(values: &DMatrix<f64>, basis: &[Expr]) -> Vec<Expr> {
    let n = values.ncols();
    (0..n)
        .map(|j| {
            let mut terms = Vec::new();
            for i in 0..values.nrows() {
                let c = values[(i, j)];
                if c == 0.0 {
                    continue;
                }
                if i == 0 {
                    terms.push(Expr::constant(c));
                } else {
                    terms.push(Expr::mul(Expr::constant(c), basis[i - 1].clone()));
                }
            }
            Expr::sum(terms)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::variable(i)
    }

    fn oracle_problem(seed: u64, m: usize, p: usize) -> (DMatrix<f64>, DMatrix<f64>, Vec<usize>) {
        // noiseless y = Theta * xi with a small known support
        let mut rng = seeds::rng(seed, "sindy-test", &[]);
        let theta = DMatrix::from_fn(m, p, |_, _| rng.gen_range(-1.0..1.0f64));
        let support = vec![1, 3, 4];
        let coeffs = [1.7, -0.9, 2.4];
        let mut y = DVector::zeros(m);
        for (k, &j) in support.iter().enumerate() {
            y += theta.column(j) * coeffs[k];
        }
        let xdot = DMatrix::from_column_slice(m, 1, y.as_slice());
        (theta, xdot, support)
    }

    #[test]
    fn build_theta_shapes_and_bias() {
        let states = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 3.0, 0.0]);
        let theta = build_theta(&[x(0)], &states).unwrap();
        assert_eq!(theta, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 3.0]));
        let empty = build_theta(&[], &states).unwrap();
        assert_eq!(empty.ncols(), 1);
        assert!(empty.iter().all(|v| *v == 1.0));
        // a quotient hitting a zero denominator is an error
        let states = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let err = build_theta(&[Expr::div(x(0), x(1))], &states);
        assert!(matches!(err, Err(SindyError::NonFiniteFeature { .. })));
    }

    #[test]
    fn stlsq_recovers_exact_support() {
        let (theta, xdot, support) = oracle_problem(1, 200, 7);
        let fit = stlsq(&theta, &xdot, 0.2, 1e-8, 25).unwrap();
        for j in 0..7 {
            let active = fit.xi[(j, 0)] != 0.0;
            assert_eq!(active, support.contains(&j), "column {j}");
        }
        assert!((fit.xi[(1, 0)] - 1.7).abs() < 1e-8);
        assert!((fit.xi[(3, 0)] + 0.9).abs() < 1e-8);
        assert!((fit.xi[(4, 0)] - 2.4).abs() < 1e-8);
    }

    #[test]
    fn stlsq_thresholds_everything_with_huge_lambda() {
        let (theta, xdot, _) = oracle_problem(2, 100, 6);
        let fit = stlsq(&theta, &xdot, 1e6, 1e-8, 25).unwrap();
        assert!(fit.zeroed_columns[0]);
        assert!(fit.xi.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stlsq_bias_only_returns_mean() {
        let theta = DMatrix::from_element(50, 1, 1.0);
        let xdot = DMatrix::from_element(50, 1, 3.5);
        let fit = stlsq(&theta, &xdot, 0.2, 0.0, 10).unwrap();
        assert!((fit.xi[(0, 0)] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn stlsq_is_a_fixed_point_of_its_support() {
        let (theta, xdot, _) = oracle_problem(3, 150, 8);
        let fit = stlsq(&theta, &xdot, 0.2, 1e-8, 25).unwrap();
        let support: Vec<Vec<usize>> = vec![(0..8).filter(|&j| fit.xi[(j, 0)] != 0.0).collect()];
        let again =
            stlsq_with_support(&theta, &xdot, 0.2, 1e-8, 25, Some(&support)).unwrap();
        for j in 0..8 {
            assert_eq!(fit.xi[(j, 0)] != 0.0, again.xi[(j, 0)] != 0.0);
        }
    }

    #[test]
    fn sr3_matches_stlsq_on_oracle() {
        let (theta, xdot, support) = oracle_problem(4, 200, 7);
        let fit = sr3(&theta, &xdot, 0.2, 1e6, 40).unwrap();
        for j in 0..7 {
            assert_eq!(fit.xi[(j, 0)] != 0.0, support.contains(&j), "column {j}");
        }
        let stlsq_fit = stlsq(&theta, &xdot, 0.2, 1e-5, 25).unwrap();
        for j in 0..7 {
            assert!(
                (fit.xi[(j, 0)] - stlsq_fit.xi[(j, 0)]).abs() < 1e-4,
                "column {j}: {} vs {}",
                fit.xi[(j, 0)],
                stlsq_fit.xi[(j, 0)]
            );
        }
    }

    #[test]
    fn sr3_all_zero_with_huge_lambda() {
        let (theta, xdot, _) = oracle_problem(5, 100, 6);
        let fit = sr3(&theta, &xdot, 1e9, 1.0, 30).unwrap();
        assert!(fit.xi.iter().all(|v| *v == 0.0));
        assert!(fit.zeroed_columns[0]);
    }

    #[test]
    fn ensemble_keeps_true_support_with_full_inclusion() {
        let (theta, xdot, support) = oracle_problem(6, 250, 7);
        let cfg = SindyConfig {
            threshold: 0.2,
            ridge: 1e-8,
            ..SindyConfig::default()
        };
        let fit = ensemble_fit(&theta, &xdot, &cfg, 99).unwrap();
        for &j in &support {
            assert!((fit.inclusion[(j, 0)] - 1.0).abs() < 1e-12, "p at {j}");
        }
        assert!((fit.values[(1, 0)] - 1.7).abs() < 1e-6);
        assert_eq!(fit.replicate_failures, 0);
    }

    #[test]
    fn ensemble_single_replicate_reduces_to_single_fit() {
        let (theta, xdot, _) = oracle_problem(7, 120, 6);
        let cfg = SindyConfig {
            threshold: 0.2,
            ridge: 1e-8,
            replicates: 1,
            inclusion_cutoff: 1.0,
            ..SindyConfig::default()
        };
        let fit = ensemble_fit(&theta, &xdot, &cfg, 5).unwrap();
        assert!(fit
            .inclusion
            .iter()
            .all(|p| *p == 0.0 || *p == 1.0));
    }

    #[test]
    fn ensemble_is_deterministic() {
        let (theta, xdot, _) = oracle_problem(8, 150, 7);
        let cfg = SindyConfig::default();
        let a = ensemble_fit(&theta, &xdot, &cfg, 1234).unwrap();
        let b = ensemble_fit(&theta, &xdot, &cfg, 1234).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.inclusion, b.inclusion);
    }

    #[test]
    fn cutoff_mask_is_idempotent() {
        let (theta, xdot, _) = oracle_problem(9, 150, 7);
        let fit = ensemble_fit(&theta, &xdot, &SindyConfig::default(), 77).unwrap();
        let once = fit.apply_cutoff(0.8);
        let twice = once.apply_cutoff(0.8);
        assert_eq!(once, twice);
    }

    #[test]
    fn residual_never_worse_than_zero_model() {
        let (theta, xdot, _) = oracle_problem(10, 150, 7);
        let fit = stlsq(&theta, &xdot, 0.2, 1e-8, 25).unwrap();
        let residual = (&theta * &fit.xi - &xdot).norm();
        let zero_residual = xdot.norm();
        assert!(residual <= zero_residual + 1e-12);
    }

    #[test]
    fn enriched_library_counts() {
        // one variable: 3 monomials + 2 trig + 6 products = 11 (12 with bias)
        let lib1 = enriched_library(1, 3, 1);
        assert_eq!(lib1.len(), 11);
        // two variables: degree<=3 monomials are C(5,2) - 1 = 9
        let lib2 = enriched_library(2, 3, 1);
        let monos = lib2
            .iter()
            .filter(|e| e.max_variable().is_some() && e.count_ops() <= 5 && !e.to_string().contains("sin") && !e.to_string().contains("cos"))
            .count();
        assert_eq!(monos, 9);
        assert_eq!(lib2.len(), 9 + 4 + 36);
        // dedup: 1 * sin(x0) equals sin(x0)
        let strings: Vec<String> = lib1.iter().map(|e| e.to_string()).collect();
        let unique: std::collections::BTreeSet<&String> = strings.iter().collect();
        assert_eq!(unique.len(), strings.len());
    }

    #[test]
    fn equations_match_theta_product() {
        let basis = vec![x(0), Expr::sin(x(1)), Expr::mul(x(0), x(1))];
        let mut values = DMatrix::zeros(4, 2);
        values[(0, 0)] = 0.5;
        values[(1, 0)] = -1.0;
        values[(3, 1)] = 2.0;
        let eqs = model_to_equations(&values, &basis);
        assert_eq!(eqs.len(), 2);
        let states = DMatrix::from_row_slice(3, 2, &[0.3, -0.7, 1.1, 0.2, -0.9, 0.8]);
        let theta = build_theta(&basis, &states).unwrap();
        let predicted = theta * &values;
        for j in 0..2 {
            let direct = eqs[j].evaluate(&states).unwrap();
            for i in 0..3 {
                assert!((direct[i] - predicted[(i, j)]).abs() < 1e-10);
            }
        }
        // all-zero column assembles to the zero constant
        let zeros = model_to_equations(&DMatrix::zeros(4, 1), &basis);
        assert!(zeros[0].is_zero());
    }
}
