//! Evaluation metrics: pooled derivative R^2/MSE, long-horizon simulation
//! scoring behind the divergence brake, recovery flags, canonical
//! complexity, and accuracy tiers.

use crate::dynamics::{integrate, IntegratorConfig, Termination, Trajectory};
use crate::expr::Expr;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: truth {truth_rows}x{truth_cols}, prediction {pred_rows}x{pred_cols}")]
    ShapeMismatch {
        truth_rows: usize,
        truth_cols: usize,
        pred_rows: usize,
        pred_cols: usize,
    },
    #[error("truth matrix is constant; R^2 is undefined")]
    ConstantTruth,
}

/// The three discovery methods compared by the benchmark harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AutoSindy,
    StandardSindy,
    StandardPysr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::AutoSindy, Method::StandardSindy, Method::StandardPysr];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::AutoSindy => "autosindy",
            Method::StandardSindy => "standard_sindy",
            Method::StandardPysr => "standard_pysr",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "autosindy" => Some(Method::AutoSindy),
            "standard_sindy" => Some(Method::StandardSindy),
            "standard_pysr" => Some(Method::StandardPysr),
            _ => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Pooled coefficient of determination and mean squared error over all
/// variables and samples. The R^2 baseline is the columnwise mean of the
/// truth; MSE is normalized by `samples * variables`.
pub fn r2_mse(truth: &DMatrix<f64>, pred: &DMatrix<f64>) -> Result<(f64, f64), MetricsError> {
    if truth.shape() != pred.shape() {
        return Err(MetricsError::ShapeMismatch {
            truth_rows: truth.nrows(),
            truth_cols: truth.ncols(),
            pred_rows: pred.nrows(),
            pred_cols: pred.ncols(),
        });
    }
    let m = truth.nrows();
    let n = truth.ncols();
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for j in 0..n {
        let col = truth.column(j);
        let mean = col.iter().sum::<f64>() / m as f64;
        for i in 0..m {
            ss_res += (truth[(i, j)] - pred[(i, j)]).powi(2);
            ss_tot += (truth[(i, j)] - mean).powi(2);
        }
    }
    if ss_tot <= 0.0 {
        return Err(MetricsError::ConstantTruth);
    }
    let r2 = 1.0 - ss_res / ss_tot;
    let mse = ss_res / (m * n) as f64;
    Ok((r2, mse))
}

/// Total operator count of the fully expanded, sign-normalized equations.
pub fn canonical_complexity(equations: &[Expr]) -> usize {
    equations.iter().map(|e| e.count_ops()).sum()
}

/// Accuracy tiers over validation R^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tier {
    Excellent,
    Good,
    Poor,
    Failed,
}

impl Tier {
    pub const ALL: [Tier; 4] = [Tier::Excellent, Tier::Good, Tier::Poor, Tier::Failed];

    pub fn as_str(&self) -> &'static str {
        match self {
            Tier::Excellent => "excellent",
            Tier::Good => "good",
            Tier::Poor => "poor",
            Tier::Failed => "failed",
        }
    }
}

/// Tier of a finite score; hard failures (`None`) are Failed.
pub fn classify_tier(r2: Option<f64>) -> Tier {
    match r2 {
        None => Tier::Failed,
        Some(v) if v >= 0.99 => Tier::Excellent,
        Some(v) if v >= 0.90 => Tier::Good,
        Some(v) if v >= 0.0 => Tier::Poor,
        Some(_) => Tier::Failed,
    }
}

/// Why a simulation is recorded as a hard failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Diverged,
    NonFinite,
    BudgetExhausted,
}

/// Outcome of integrating a discovered model over the validation window.
/// Hard failures carry no scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SimulationOutcome {
    Scored { r2: f64, mse: f64 },
    HardFailure { kind: FailureKind },
}

impl SimulationOutcome {
    pub fn r2(&self) -> Option<f64> {
        match self {
            SimulationOutcome::Scored { r2, .. } => Some(*r2),
            SimulationOutcome::HardFailure { .. } => None,
        }
    }

    pub fn is_hard_failure(&self) -> bool {
        matches!(self, SimulationOutcome::HardFailure { .. })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimulationScore {
    pub outcome: SimulationOutcome,
    pub wall_time_s: f64,
}

/// Integrates the model equations from the validation trajectory's initial
/// condition with the divergence brake armed at 100x the ground-truth
/// amplitude, then scores the states against the clean truth. Brake hits,
/// non-finite states and budget exhaustion are hard failures, not errors.
pub fn score_simulation(
    equations: &[Expr],
    validation: &Trajectory,
    integrator: &IntegratorConfig,
) -> SimulationScore {
    let start = Instant::now();
    let amplitude = validation.amplitude();
    let x0: Vec<f64> = (0..validation.dim())
        .map(|j| validation.states[(0, j)])
        .collect();
    let horizon = validation.times.last().unwrap() - validation.times[0];
    let eqs = equations.to_vec();
    let rhs = move |x: &[f64], out: &mut [f64]| {
        for (j, eq) in eqs.iter().enumerate() {
            out[j] = eq.evaluate_at(x);
        }
    };
    let run = integrate(
        &rhs,
        &x0,
        validation.times[0],
        horizon,
        validation.len(),
        Some(&amplitude),
        integrator,
    );
    let wall_time_s = start.elapsed().as_secs_f64();
    let outcome = match run {
        Err(_) => SimulationOutcome::HardFailure {
            kind: FailureKind::NonFinite,
        },
        Ok(run) => match run.termination {
            Termination::Completed => match r2_mse(&validation.states, &run.trajectory.states) {
                Ok((r2, mse)) => SimulationOutcome::Scored { r2, mse },
                Err(_) => SimulationOutcome::HardFailure {
                    kind: FailureKind::NonFinite,
                },
            },
            Termination::Diverged { .. } => SimulationOutcome::HardFailure {
                kind: FailureKind::Diverged,
            },
            Termination::NonFinite { .. } => SimulationOutcome::HardFailure {
                kind: FailureKind::NonFinite,
            },
            Termination::BudgetExhausted { .. } => SimulationOutcome::HardFailure {
                kind: FailureKind::BudgetExhausted,
            },
        },
    };
    SimulationScore {
        outcome,
        wall_time_s,
    }
}

/// Paired R^2/MSE of one derivative comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivScore {
    pub r2: f64,
    pub mse: f64,
}

/// Wall-clock accounting of one trial, persisted separately from the
/// deterministic result record.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrialTiming {
    pub discovery_s: f64,
    pub curation_s: f64,
    pub fit_s: f64,
    /// Wall clock around all three stages.
    pub total_discovery_s: f64,
    pub simulation_s: f64,
}

/// One (system, method, noise, seed) run record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub system: String,
    pub method: Method,
    pub sigma: f64,
    pub seed: u64,
    /// Seed actually used (differs from `seed` after crash-recovery
    /// fallback).
    pub effective_seed: u64,
    /// Model fit against smoothed derivative estimates on the held-out
    /// test flanks of the noisy training trajectory.
    pub test_derivative: DerivScore,
    /// Model fit against the exact derivatives of the clean validation
    /// trajectory.
    pub validation_derivative: DerivScore,
    pub simulation: SimulationOutcome,
    pub canonical_complexity: usize,
    /// Validation derivative R^2 strictly above 0.99.
    pub recovery: bool,
    /// Canonical strings, one per state variable.
    pub equations: Vec<String>,
    pub library_sizes: Vec<usize>,
    /// Variables whose curated library came back empty.
    pub bias_only_variables: Vec<usize>,
    /// Echo of the configuration the trial ran under.
    pub config: serde_json::Value,
    /// Present when the trial aborted; such trials count as hard failures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrialResult {
    pub fn recovery_from(validation_r2: f64) -> bool {
        validation_r2 > 0.99
    }
}
