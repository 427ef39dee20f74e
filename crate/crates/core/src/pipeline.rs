//! End-to-end orchestration: chunked symbolic discovery, library curation
//! and ensemble sparse identification, plus the two reference baselines
//! (fixed enriched library, and symbolic regression alone).

use crate::curation::{build_pool, curate, CurationConfig, CurationError, CuratedLibrary};
use crate::deriv::SmootherConfig;
use crate::dynamics::{IntegratorConfig, Trajectory};
use crate::expr::Expr;
use crate::seeds;
use crate::sindy::{
    build_theta, ensemble_fit, enriched_library, model_to_equations, CoefficientMatrix,
    LibraryStrategy, SindyConfig, SindyError,
};
use crate::symreg::{evolve, GPConfig, ParetoFront, SymRegError};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("chunk size {c} below the minimum of 10 (m_train={m_train}, divisor={divisor})")]
    ChunkTooSmall {
        c: usize,
        m_train: usize,
        divisor: usize,
    },
    #[error("derivative matrix has {derivs} rows but the trajectory has {rows}")]
    ShapeMismatch { rows: usize, derivs: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    SymReg(#[from] SymRegError),
    #[error(transparent)]
    Sindy(#[from] SindyError),
    #[error(transparent)]
    Curation(#[from] CurationError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Discovery rounds (number of random chunks).
    #[serde(alias = "K")]
    pub rounds: usize,
    /// Chunk-size divisor: each chunk holds `m_train / chunk_divisor`
    /// samples.
    #[serde(alias = "d")]
    pub chunk_divisor: usize,
    pub gp: GPConfig,
    pub curation: CurationConfig,
    pub sindy: SindyConfig,
    pub smoother: SmootherConfig,
    pub integrator: IntegratorConfig,
    pub master_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rounds: 8,
            chunk_divisor: 40,
            gp: GPConfig::default(),
            curation: CurationConfig::default(),
            sindy: SindyConfig::default(),
            smoother: SmootherConfig::default(),
            integrator: IntegratorConfig::default(),
            master_seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.rounds == 0 {
            return Err(PipelineError::InvalidConfig("rounds must be positive".into()));
        }
        if self.chunk_divisor == 0 {
            return Err(PipelineError::InvalidConfig(
                "chunk_divisor must be positive".into(),
            ));
        }
        self.gp.validate()?;
        self.curation.validate()?;
        self.sindy.validate()?;
        self.smoother
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    /// Derives the per-trial seed. Every stage stream descends from this.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }
}

/// Wall-clock seconds per stage; `total_s` wraps all three.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub discovery_s: f64,
    pub curation_s: f64,
    pub fit_s: f64,
    pub total_s: f64,
}

/// One fitted basis: the curated library when curation produced it (the
/// enriched baseline has only a bare basis).
#[derive(Debug, Clone)]
pub struct LibraryInfo {
    pub curated: Option<CuratedLibrary>,
    pub basis: Vec<Expr>,
}

/// A discovered model: assembled equations plus everything needed to audit
/// how they were produced.
#[derive(Debug, Clone)]
pub struct DiscoveredModel {
    pub equations: Vec<Expr>,
    pub strategy: LibraryStrategy,
    /// One entry per state variable under the separate strategy; a single
    /// shared entry under the unified strategy and for the fixed-library
    /// baseline; empty for the symbolic-regression baseline.
    pub libraries: Vec<LibraryInfo>,
    /// Parallel to `libraries`.
    pub coefficients: Vec<CoefficientMatrix>,
    pub bias_only_variables: Vec<usize>,
    pub timings: StageTimings,
}

/// `rounds` index sets of size `m_train / divisor`, each drawn without
/// replacement, independently per round. Deterministic per seed.
pub fn sample_chunks(
    m_train: usize,
    rounds: usize,
    divisor: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, PipelineError> {
    let c = m_train / divisor;
    if c < 10 {
        return Err(PipelineError::ChunkTooSmall {
            c,
            m_train,
            divisor,
        });
    }
    let chunks = (0..rounds)
        .map(|k| {
            let mut rng = seeds::rng(seed, "chunk", &[k as u64]);
            let mut indices: Vec<usize> = (0..m_train).collect();
            indices.shuffle(&mut rng);
            indices.truncate(c);
            indices
        })
        .collect();
    Ok(chunks)
}

fn select_rows(states: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    states.select_rows(rows.iter())
}

fn check_shapes(train: &Trajectory, derivatives: &DMatrix<f64>) -> Result<(), PipelineError> {
    if train.len() != derivatives.nrows() || train.dim() != derivatives.ncols() {
        return Err(PipelineError::ShapeMismatch {
            rows: train.len(),
            derivs: derivatives.nrows(),
        });
    }
    Ok(())
}

/// The full three-stage pipeline on a training window with precomputed
/// derivative estimates.
pub fn autosindy(
    train: &Trajectory,
    derivatives: &DMatrix<f64>,
    cfg: &PipelineConfig,
) -> Result<DiscoveredModel, PipelineError> {
    cfg.validate()?;
    check_shapes(train, derivatives)?;
    let n = train.dim();
    let m_train = train.len();
    let total_start = Instant::now();

    // Stage 1: evolve once per (chunk, variable) and harvest full fronts
    let stage1_start = Instant::now();
    let chunks = sample_chunks(
        m_train,
        cfg.rounds,
        cfg.chunk_divisor,
        seeds::derive(cfg.master_seed, "chunks", &[]),
    )?;
    let jobs: Vec<(usize, usize)> = (0..chunks.len())
        .flat_map(|k| (0..n).map(move |j| (k, j)))
        .collect();
    let fronts: Vec<((usize, usize), Result<ParetoFront, SymRegError>)> = jobs
        .par_iter()
        .map(|&(k, j)| {
            let states = select_rows(&train.states, &chunks[k]);
            let target: Vec<f64> = chunks[k].iter().map(|&i| derivatives[(i, j)]).collect();
            // z-score the chunk target: the discovery stage mines functional
            // forms whose prefactors are stripped at decomposition, so the
            // harvested atoms are scale-invariant, while the search itself
            // sees O(1) constants
            let mean = target.iter().sum::<f64>() / target.len() as f64;
            let std = (target.iter().map(|t| (t - mean).powi(2)).sum::<f64>()
                / target.len() as f64)
                .sqrt();
            let target: Vec<f64> = if std > 0.0 {
                target.iter().map(|t| (t - mean) / std).collect()
            } else {
                target
            };
            let gp = GPConfig {
                seed: seeds::derive(cfg.master_seed, "gp", &[k as u64, j as u64]),
                ..cfg.gp.clone()
            };
            ((k, j), evolve(&states, &target, &gp))
        })
        .collect();
    let mut per_variable_fronts: Vec<Vec<ParetoFront>> = vec![Vec::new(); n];
    for ((_, j), front) in fronts {
        per_variable_fronts[j].push(front?);
    }
    let discovery_s = stage1_start.elapsed().as_secs_f64();

    // Stage 2: curate per variable (separate) or once over the union
    let stage2_start = Instant::now();
    let strategy = cfg.sindy.library_strategy;
    let mut libraries: Vec<Option<CuratedLibrary>> = Vec::new();
    match strategy {
        LibraryStrategy::Separate => {
            for fronts_j in &per_variable_fronts {
                let pool = build_pool(fronts_j);
                libraries.push(curate_or_empty(&pool, &train.states, &cfg.curation)?);
            }
        }
        LibraryStrategy::Unified => {
            let all: Vec<ParetoFront> = per_variable_fronts.into_iter().flatten().collect();
            let pool = build_pool(&all);
            libraries.push(curate_or_empty(&pool, &train.states, &cfg.curation)?);
        }
    }
    let curation_s = stage2_start.elapsed().as_secs_f64();

    // Stage 3: ensemble sparse fit
    let stage3_start = Instant::now();
    let mut infos: Vec<LibraryInfo> = Vec::new();
    let mut coefficients: Vec<CoefficientMatrix> = Vec::new();
    let mut equations: Vec<Expr> = Vec::new();
    let mut bias_only: Vec<usize> = Vec::new();
    match strategy {
        LibraryStrategy::Separate => {
            for (j, lib) in libraries.into_iter().enumerate() {
                let basis: Vec<Expr> = lib
                    .as_ref()
                    .map(|l| l.expressions().to_vec())
                    .unwrap_or_default();
                if basis.is_empty() {
                    bias_only.push(j);
                }
                let theta = build_theta(&basis, &train.states)?;
                let xdot = derivatives.columns(j, 1).into_owned();
                let fit = ensemble_fit(
                    &theta,
                    &xdot,
                    &cfg.sindy,
                    seeds::derive(cfg.master_seed, "ensemble", &[j as u64]),
                )?;
                equations.push(model_to_equations(&fit.values, &basis).remove(0));
                infos.push(LibraryInfo {
                    curated: lib,
                    basis,
                });
                coefficients.push(fit);
            }
        }
        LibraryStrategy::Unified => {
            let lib = libraries.remove(0);
            let basis: Vec<Expr> = lib
                .as_ref()
                .map(|l| l.expressions().to_vec())
                .unwrap_or_default();
            if basis.is_empty() {
                bias_only.extend(0..n);
            }
            let theta = build_theta(&basis, &train.states)?;
            let fit = ensemble_fit(
                &theta,
                derivatives,
                &cfg.sindy,
                seeds::derive(cfg.master_seed, "ensemble", &[0]),
            )?;
            equations = model_to_equations(&fit.values, &basis);
            infos.push(LibraryInfo {
                curated: lib,
                basis,
            });
            coefficients.push(fit);
        }
    }
    let fit_s = stage3_start.elapsed().as_secs_f64();

    Ok(DiscoveredModel {
        equations,
        strategy,
        libraries: infos,
        coefficients,
        bias_only_variables: bias_only,
        timings: StageTimings {
            discovery_s,
            curation_s,
            fit_s,
            total_s: total_start.elapsed().as_secs_f64(),
        },
    })
}

/// An empty curated library is a per-variable condition the pipeline
/// records, not a failure of the run.
fn curate_or_empty(
    pool: &std::collections::BTreeSet<Expr>,
    states: &DMatrix<f64>,
    cfg: &CurationConfig,
) -> Result<Option<CuratedLibrary>, PipelineError> {
    match curate(pool, states, cfg) {
        Ok(lib) => Ok(Some(lib)),
        Err(CurationError::AllCandidatesFiltered) | Err(CurationError::EmptyPool) => Ok(None),
        Err(other) => Err(other.into()),
    }
}

/// Fixed-library baseline: the enriched polynomial/Fourier basis fitted
/// jointly across all variables with the same ensemble optimizer.
pub fn standard_sindy(
    train: &Trajectory,
    derivatives: &DMatrix<f64>,
    cfg: &PipelineConfig,
) -> Result<DiscoveredModel, PipelineError> {
    cfg.validate()?;
    check_shapes(train, derivatives)?;
    let total_start = Instant::now();
    let basis = enriched_library(train.dim(), 3, 1);
    let stage3_start = Instant::now();
    let theta = build_theta(&basis, &train.states)?;
    let fit = ensemble_fit(
        &theta,
        derivatives,
        &cfg.sindy,
        seeds::derive(cfg.master_seed, "ensemble", &[0]),
    )?;
    let equations = model_to_equations(&fit.values, &basis);
    let fit_s = stage3_start.elapsed().as_secs_f64();
    let bias_only = fit
        .zeroed_columns
        .iter()
        .enumerate()
        .filter(|(_, z)| **z)
        .map(|(j, _)| j)
        .collect();
    Ok(DiscoveredModel {
        equations,
        strategy: LibraryStrategy::Unified,
        libraries: vec![LibraryInfo {
            curated: None,
            basis,
        }],
        coefficients: vec![fit],
        bias_only_variables: bias_only,
        timings: StageTimings {
            discovery_s: 0.0,
            curation_s: 0.0,
            fit_s,
            total_s: total_start.elapsed().as_secs_f64(),
        },
    })
}

/// Symbolic-regression baseline: one evolutionary run per variable on the
/// full training window; the front entry with the best
/// parsimony-weighted loss becomes that variable's equation. No curation,
/// no sparse fit.
pub fn standard_pysr(
    train: &Trajectory,
    derivatives: &DMatrix<f64>,
    cfg: &PipelineConfig,
) -> Result<DiscoveredModel, PipelineError> {
    cfg.validate()?;
    check_shapes(train, derivatives)?;
    let n = train.dim();
    let total_start = Instant::now();
    let results: Vec<Result<Expr, SymRegError>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let target: Vec<f64> = (0..train.len()).map(|i| derivatives[(i, j)]).collect();
            let gp = GPConfig {
                seed: seeds::derive(cfg.master_seed, "pysr", &[j as u64]),
                ..cfg.gp.clone()
            };
            let front = evolve(&train.states, &target, &gp)?;
            Ok(front
                .select_parsimonious(cfg.gp.parsimony)
                .map(|(_, e, _)| e.clone())
                .unwrap_or_else(Expr::zero))
        })
        .collect();
    let mut equations = Vec::with_capacity(n);
    for r in results {
        equations.push(r?);
    }
    let discovery_s = total_start.elapsed().as_secs_f64();
    Ok(DiscoveredModel {
        equations,
        strategy: LibraryStrategy::Separate,
        libraries: Vec::new(),
        coefficients: Vec::new(),
        bias_only_variables: Vec::new(),
        timings: StageTimings {
            discovery_s,
            curation_s: 0.0,
            fit_s: 0.0,
            total_s: total_start.elapsed().as_secs_f64(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sindy::Optimizer;

    #[test]
    fn chunk_sampling_contract() {
        let chunks = sample_chunks(4000, 8, 40, 7).unwrap();
        assert_eq!(chunks.len(), 8);
        for ch in &chunks {
            assert_eq!(ch.len(), 100);
            let unique: std::collections::BTreeSet<_> = ch.iter().collect();
            assert_eq!(unique.len(), 100, "duplicates within a chunk");
        }
        // divisor 1 yields a permutation of all indices
        let full = sample_chunks(50, 1, 1, 3).unwrap();
        let mut sorted = full[0].clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        // deterministic
        assert_eq!(sample_chunks(500, 4, 10, 11).unwrap(), sample_chunks(500, 4, 10, 11).unwrap());
        assert!(matches!(
            sample_chunks(90, 2, 10, 1),
            Err(PipelineError::ChunkTooSmall { c: 9, .. })
        ));
    }

    /// Small synthetic linear system data for fast pipeline smoke tests.
    fn tiny_linear_problem() -> (Trajectory, DMatrix<f64>) {
        use crate::dynamics::Provenance;
        let m = 600;
        let times: Vec<f64> = (0..m).map(|i| i as f64 * 0.01).collect();
        let states = DMatrix::from_fn(m, 2, |i, j| {
            let t = times[i];
            if j == 0 {
                (1.4 * t).sin()
            } else {
                1.4 * (1.4 * t).cos()
            }
        });
        // exact derivatives of the synthetic signal
        let derivs = DMatrix::from_fn(m, 2, |i, j| {
            let t = times[i];
            if j == 0 {
                1.4 * (1.4 * t).cos()
            } else {
                -1.96 * (1.4 * t).sin()
            }
        });
        (
            Trajectory {
                times,
                states,
                provenance: Provenance::Clean,
            },
            derivs,
        )
    }

    fn fast_config(seed: u64) -> PipelineConfig {
        PipelineConfig {
            rounds: 3,
            chunk_divisor: 10,
            gp: GPConfig {
                population_count: 4,
                population_size: 24,
                generations: 12,
                constant_opt_iters: 120,
                ..GPConfig::default()
            },
            master_seed: seed,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn autosindy_recovers_linear_oscillator() {
        let (train, derivs) = tiny_linear_problem();
        let cfg = fast_config(5);
        let model = autosindy(&train, &derivs, &cfg).unwrap();
        assert_eq!(model.equations.len(), 2);
        assert!(model.bias_only_variables.is_empty());
        // xdot0 = x1, xdot1 = -1.96 x0
        let states = DMatrix::from_row_slice(3, 2, &[0.4, -0.2, -0.8, 0.9, 0.1, 1.1]);
        let e0 = model.equations[0].evaluate(&states).unwrap();
        let e1 = model.equations[1].evaluate(&states).unwrap();
        for i in 0..3 {
            assert!((e0[i] - states[(i, 1)]).abs() < 5e-2, "eq0: {}", model.equations[0]);
            assert!(
                (e1[i] + 1.96 * states[(i, 0)]).abs() < 5e-2,
                "eq1: {}",
                model.equations[1]
            );
        }
        // stage timings sum to the recorded total within resolution
        let t = model.timings;
        let sum = t.discovery_s + t.curation_s + t.fit_s;
        assert!((t.total_s - sum).abs() <= 0.05 * t.total_s + 0.02);
    }

    #[test]
    fn autosindy_is_deterministic() {
        let (train, derivs) = tiny_linear_problem();
        let cfg = fast_config(9);
        let a = autosindy(&train, &derivs, &cfg).unwrap();
        let b = autosindy(&train, &derivs, &cfg).unwrap();
        let strings = |m: &DiscoveredModel| {
            m.equations.iter().map(|e| e.to_string()).collect::<Vec<_>>()
        };
        assert_eq!(strings(&a), strings(&b));
    }

    #[test]
    fn curated_library_is_independent_of_stage3_optimizer() {
        let (train, derivs) = tiny_linear_problem();
        let mut cfg = fast_config(13);
        let with_stlsq = autosindy(&train, &derivs, &cfg).unwrap();
        cfg.sindy.optimizer = Optimizer::Sr3;
        let with_sr3 = autosindy(&train, &derivs, &cfg).unwrap();
        let libs = |m: &DiscoveredModel| -> Vec<Vec<String>> {
            m.libraries
                .iter()
                .map(|l| l.basis.iter().map(|e| e.to_string()).collect())
                .collect()
        };
        assert_eq!(libs(&with_stlsq), libs(&with_sr3));
    }

    #[test]
    fn unified_strategy_shares_one_library() {
        let (train, derivs) = tiny_linear_problem();
        let mut cfg = fast_config(17);
        cfg.sindy.library_strategy = LibraryStrategy::Unified;
        let model = autosindy(&train, &derivs, &cfg).unwrap();
        assert_eq!(model.libraries.len(), 1);
        assert_eq!(model.coefficients.len(), 1);
        assert_eq!(model.coefficients[0].values.ncols(), 2);
        assert_eq!(model.equations.len(), 2);
    }

    #[test]
    fn equations_equal_theta_times_xi() {
        let (train, derivs) = tiny_linear_problem();
        let model = autosindy(&train, &derivs, &fast_config(21)).unwrap();
        let probe = DMatrix::from_row_slice(4, 2, &[0.3, 0.1, -0.5, 0.8, 1.0, -0.2, 0.05, 0.4]);
        for (j, info) in model.libraries.iter().enumerate() {
            let theta = build_theta(&info.basis, &probe).unwrap();
            let xi = &model.coefficients[j].values;
            let predicted = theta * xi;
            let eq = &model.equations[j];
            let direct = eq.evaluate(&probe).unwrap();
            for i in 0..4 {
                assert!((direct[i] - predicted[(i, 0)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn standard_sindy_uses_enriched_basis() {
        let (train, derivs) = tiny_linear_problem();
        let model = standard_sindy(&train, &derivs, &fast_config(3)).unwrap();
        assert_eq!(model.libraries.len(), 1);
        // n=2 enriched basis: 9 monomials + 4 trig + 36 products
        assert_eq!(model.libraries[0].basis.len(), 49);
        assert_eq!(model.equations.len(), 2);
        let again = standard_sindy(&train, &derivs, &fast_config(3)).unwrap();
        assert_eq!(
            model.equations.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
            again.equations.iter().map(|e| e.to_string()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn standard_pysr_selects_parsimonious_front_entries() {
        let (train, derivs) = tiny_linear_problem();
        let cfg = fast_config(31);
        let model = standard_pysr(&train, &derivs, &cfg).unwrap();
        assert_eq!(model.equations.len(), 2);
        assert!(model.libraries.is_empty());
        // equation 0 should fit xdot0 = x1 nearly exactly
        let probe = DMatrix::from_row_slice(2, 2, &[0.2, 0.6, -0.4, -0.1]);
        let e0 = model.equations[0].evaluate(&probe).unwrap();
        for i in 0..2 {
            assert!((e0[i] - probe[(i, 1)]).abs() < 0.05, "{}", model.equations[0]);
        }
        let again = standard_pysr(&train, &derivs, &cfg).unwrap();
        assert_eq!(
            model.equations.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
            again.equations.iter().map(|e| e.to_string()).collect::<Vec<_>>()
        );
    }
}
