//! Sweep harness: trial execution over (system, method, noise, seed)
//! grids, crash-tolerant persistence with resume, aggregate summaries and
//! plot-ready data emission.

mod store;

pub use store::{load_results, load_timings, BenchError};

use crate::deriv::estimate_derivatives;
use crate::dynamics::{add_noise, middle_split_indices, SystemSpec, Trajectory};
use crate::metrics::{
    canonical_complexity, classify_tier, r2_mse, score_simulation, DerivScore, Method,
    SimulationOutcome, Tier, TrialResult, TrialTiming,
};
use crate::pipeline::{autosindy, standard_pysr, standard_sindy, DiscoveredModel, PipelineConfig};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Finite sentinel for scores whose prediction evaluated non-finite; keeps
/// records JSON-round-trippable while still classifying as Failed.
const FAILED_SCORE: f64 = -1e15;

/// The full benchmark protocol of one sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub systems: Vec<String>,
    pub noise_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub snapshots: usize,
    pub output_dir: PathBuf,
    pub pipeline: PipelineConfig,
}

impl SweepSpec {
    pub fn protocol_defaults(output_dir: PathBuf) -> Self {
        SweepSpec {
            systems: crate::dynamics::SYSTEM_NAMES.iter().map(|s| s.to_string()).collect(),
            noise_levels: vec![0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
            seeds: vec![32, 33, 34, 35, 36],
            methods: Method::ALL.to_vec(),
            snapshots: 5000,
            output_dir,
            pipeline: PipelineConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.systems.is_empty()
            || self.noise_levels.is_empty()
            || self.seeds.is_empty()
            || self.methods.is_empty()
        {
            return Err(BenchError::InvalidSpec(
                "systems, noise levels, seeds and methods must be non-empty".into(),
            ));
        }
        if self.noise_levels.iter().any(|s| *s < 0.0) {
            return Err(BenchError::InvalidSpec("noise levels must be non-negative".into()));
        }
        for name in &self.systems {
            SystemSpec::preset(name).map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
        }
        Ok(())
    }

    /// Trial descriptors in deterministic execution order.
    pub fn trials(&self) -> Vec<TrialKey> {
        let mut out = Vec::new();
        for system in &self.systems {
            for method in &self.methods {
                for &sigma in &self.noise_levels {
                    for &seed in &self.seeds {
                        out.push(TrialKey {
                            system: system.clone(),
                            method: *method,
                            sigma,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

/// Identity of one trial within a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialKey {
    pub system: String,
    pub method: Method,
    pub sigma: f64,
    pub seed: u64,
}

impl TrialKey {
    pub fn id(&self) -> String {
        format!(
            "{}__{}__n{:.3}__s{}",
            self.system,
            self.method.as_str(),
            self.sigma,
            self.seed
        )
    }
}

/// Crash-recovery fallback: attempt 0 is the original seed.
pub fn effective_seed(seed: u64, attempt: u64) -> u64 {
    seed + 1000 * attempt
}

/// Everything a single trial produces, including the model for auditing.
pub struct TrialRun {
    pub result: TrialResult,
    pub timing: TrialTiming,
    pub model: Option<DiscoveredModel>,
}

fn sanitize_score(r2: f64, mse: f64) -> DerivScore {
    // non-finite predictions poison the score; record a finite failed value
    let r2 = if r2.is_finite() {
        r2.max(FAILED_SCORE)
    } else {
        FAILED_SCORE
    };
    let mse = if mse.is_finite() { mse.min(-FAILED_SCORE) } else { -FAILED_SCORE };
    DerivScore { r2, mse }
}

fn derivative_score(equations: &[crate::expr::Expr], states: &DMatrix<f64>, truth: &DMatrix<f64>) -> DerivScore {
    let m = states.nrows();
    let n = truth.ncols();
    let mut pred = DMatrix::zeros(m, n);
    for (j, eq) in equations.iter().enumerate() {
        match eq.evaluate(states) {
            Ok(col) => {
                for (i, v) in col.iter().enumerate() {
                    pred[(i, j)] = *v;
                }
            }
            Err(_) => return DerivScore { r2: FAILED_SCORE, mse: -FAILED_SCORE },
        }
    }
    if pred.iter().any(|v| !v.is_finite()) {
        return DerivScore { r2: FAILED_SCORE, mse: -FAILED_SCORE };
    }
    match r2_mse(truth, &pred) {
        Ok((r2, mse)) => sanitize_score(r2, mse),
        Err(_) => DerivScore { r2: FAILED_SCORE, mse: -FAILED_SCORE },
    }
}

/// Runs one complete trial: simulate, corrupt, split, estimate
/// derivatives, discover, and score. Exceptions inside the stages become
/// an error here; the sweep records them as hard failures and moves on.
pub fn run_trial(key: &TrialKey, snapshots: usize, base: &PipelineConfig, attempt: u64) -> Result<TrialRun, BenchError> {
    let eff = effective_seed(key.seed, attempt);
    let cfg = base.clone().with_seed(eff);
    let mut sys = SystemSpec::preset(&key.system).map_err(|e| BenchError::Trial(e.to_string()))?;
    sys.snapshots = snapshots;

    let clean = sys
        .simulate(&cfg.integrator)
        .map_err(|e| BenchError::Trial(e.to_string()))?;
    let validation = sys
        .simulate_validation(&cfg.integrator)
        .map_err(|e| BenchError::Trial(e.to_string()))?;
    let noisy = add_noise(&clean, key.sigma, crate::seeds::derive(eff, "noise", &[]))
        .map_err(|e| BenchError::Trial(e.to_string()))?;
    let derivs = estimate_derivatives(&noisy, &cfg.smoother)
        .map_err(|e| BenchError::Trial(e.to_string()))?;

    let (train_idx, test_idx) =
        middle_split_indices(noisy.len()).map_err(|e| BenchError::Trial(e.to_string()))?;
    let train = Trajectory {
        times: train_idx.iter().map(|&i| noisy.times[i]).collect(),
        states: noisy.states.select_rows(train_idx.iter()),
        provenance: noisy.provenance,
    };
    let train_derivs = derivs.select_rows(train_idx.iter());
    let test_states = noisy.states.select_rows(test_idx.iter());
    let test_derivs = derivs.select_rows(test_idx.iter());

    let model = match key.method {
        Method::AutoSindy => autosindy(&train, &train_derivs, &cfg),
        Method::StandardSindy => standard_sindy(&train, &train_derivs, &cfg),
        Method::StandardPysr => standard_pysr(&train, &train_derivs, &cfg),
    }
    .map_err(|e| BenchError::Trial(e.to_string()))?;

    let test_derivative = derivative_score(&model.equations, &test_states, &test_derivs);
    let truth_valid = DMatrix::from_fn(validation.len(), sys.dim(), |i, j| {
        let row: Vec<f64> = (0..sys.dim()).map(|k| validation.states[(i, k)]).collect();
        sys.kind.rhs(&row)[j]
    });
    let validation_derivative =
        derivative_score(&model.equations, &validation.states, &truth_valid);
    let sim = score_simulation(&model.equations, &validation, &cfg.integrator);
    let complexity = canonical_complexity(&model.equations);

    let library_sizes = model.libraries.iter().map(|l| l.basis.len()).collect();
    let result = TrialResult {
        system: key.system.clone(),
        method: key.method,
        sigma: key.sigma,
        seed: key.seed,
        effective_seed: eff,
        test_derivative,
        validation_derivative,
        simulation: sim.outcome,
        canonical_complexity: complexity,
        recovery: TrialResult::recovery_from(validation_derivative.r2),
        equations: model.equations.iter().map(|e| e.to_string()).collect(),
        library_sizes,
        bias_only_variables: model.bias_only_variables.clone(),
        config: serde_json::to_value(&cfg).map_err(BenchError::Serde)?,
        error: None,
    };
    let timing = TrialTiming {
        discovery_s: model.timings.discovery_s,
        curation_s: model.timings.curation_s,
        fit_s: model.timings.fit_s,
        total_discovery_s: model.timings.total_s,
        simulation_s: sim.wall_time_s,
    };
    Ok(TrialRun {
        result,
        timing,
        model: Some(model),
    })
}

/// A placeholder record for a trial whose execution failed outright.
fn failure_result(key: &TrialKey, attempt: u64, base: &PipelineConfig, message: String) -> TrialRun {
    let eff = effective_seed(key.seed, attempt);
    let cfg = base.clone().with_seed(eff);
    let result = TrialResult {
        system: key.system.clone(),
        method: key.method,
        sigma: key.sigma,
        seed: key.seed,
        effective_seed: eff,
        test_derivative: DerivScore { r2: FAILED_SCORE, mse: -FAILED_SCORE },
        validation_derivative: DerivScore { r2: FAILED_SCORE, mse: -FAILED_SCORE },
        simulation: SimulationOutcome::HardFailure {
            kind: crate::metrics::FailureKind::NonFinite,
        },
        canonical_complexity: 0,
        recovery: false,
        equations: Vec::new(),
        library_sizes: Vec::new(),
        bias_only_variables: Vec::new(),
        config: serde_json::to_value(&cfg).unwrap_or(serde_json::Value::Null),
        error: Some(message),
    };
    TrialRun {
        result,
        timing: TrialTiming::default(),
        model: None,
    }
}

/// Executes the sweep, persisting each trial atomically as it completes.
/// Completed trials found in the output directory are not re-run; a trial
/// whose in-progress marker survives from an earlier run re-executes with
/// the next fallback seed.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<TrialResult>, BenchError> {
    spec.validate()?;
    let store = store::Store::open(&spec.output_dir)?;
    let keys = spec.trials();

    #[derive(Clone)]
    enum Planned {
        Done(Box<TrialResult>),
        Run { key: TrialKey, attempt: u64 },
    }

    let mut plan = Vec::with_capacity(keys.len());
    for key in keys {
        match store.load_trial(&key.id())? {
            Some(result) => plan.push(Planned::Done(Box::new(result))),
            None => {
                let attempt = store.begin_trial(&key.id())?;
                plan.push(Planned::Run { key, attempt });
            }
        }
    }

    let outcomes: Vec<Result<TrialResult, BenchError>> = plan
        .into_par_iter()
        .map(|p| match p {
            Planned::Done(result) => Ok(*result),
            Planned::Run { key, attempt } => {
                let run = match run_trial(&key, spec.snapshots, &spec.pipeline, attempt) {
                    Ok(run) => run,
                    Err(BenchError::Trial(message)) => {
                        failure_result(&key, attempt, &spec.pipeline, message)
                    }
                    Err(other) => return Err(other),
                };
                store.finish_trial(&key.id(), &run.result, &run.timing)?;
                Ok(run.result)
            }
        })
        .collect();

    let mut results = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        results.push(o?);
    }
    Ok(results)
}

fn median(values: &mut Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}

/// Per-(system, method) aggregate line.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub system: String,
    pub method: Method,
    pub trials: usize,
    pub median_deriv_r2: f64,
    pub median_deriv_mse: f64,
    /// Median over completed simulations only; absent when every trial
    /// hard-failed.
    pub median_sim_r2: Option<f64>,
    pub median_sim_mse: Option<f64>,
    pub median_complexity: f64,
    pub mean_recovery_pct: f64,
    pub hard_failures: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TierRow {
    pub method: Method,
    pub tier: Tier,
    pub derivative_share: f64,
    pub simulation_share: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrendPoint {
    pub method: Method,
    pub sigma: f64,
    pub failure_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub tiers: Vec<TierRow>,
    pub failure_trend: Vec<TrendPoint>,
    pub total_trials: usize,
}

/// Aggregates trial records into the reporting tables: per-system medians
/// (mean for recovery), accuracy-tier proportions, failure counts and the
/// failure-rate-versus-noise trend.
pub fn summarize(results: &[TrialResult]) -> Summary {
    let mut by_pair: BTreeMap<(String, Method), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        by_pair.entry((r.system.clone(), r.method)).or_default().push(r);
    }
    let rows = by_pair
        .iter()
        .map(|((system, method), trials)| {
            let mut deriv_r2: Vec<f64> = trials.iter().map(|t| t.validation_derivative.r2).collect();
            let mut deriv_mse: Vec<f64> =
                trials.iter().map(|t| t.validation_derivative.mse).collect();
            let mut sim_r2: Vec<f64> = trials
                .iter()
                .filter_map(|t| t.simulation.r2())
                .collect();
            let mut sim_mse: Vec<f64> = trials
                .iter()
                .filter_map(|t| match t.simulation {
                    SimulationOutcome::Scored { mse, .. } => Some(mse),
                    SimulationOutcome::HardFailure { .. } => None,
                })
                .collect();
            let mut complexity: Vec<f64> =
                trials.iter().map(|t| t.canonical_complexity as f64).collect();
            let recoveries = trials.iter().filter(|t| t.recovery).count();
            let hard_failures = trials.iter().filter(|t| t.simulation.is_hard_failure()).count();
            SummaryRow {
                system: system.clone(),
                method: *method,
                trials: trials.len(),
                median_deriv_r2: median(&mut deriv_r2).unwrap_or(f64::NAN),
                median_deriv_mse: median(&mut deriv_mse).unwrap_or(f64::NAN),
                median_sim_r2: median(&mut sim_r2),
                median_sim_mse: median(&mut sim_mse),
                median_complexity: median(&mut complexity).unwrap_or(f64::NAN),
                mean_recovery_pct: 100.0 * recoveries as f64 / trials.len() as f64,
                hard_failures,
            }
        })
        .collect();

    let mut tiers = Vec::new();
    let mut methods: Vec<Method> = results.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    for method in methods.iter().copied() {
        let trials: Vec<&TrialResult> = results.iter().filter(|r| r.method == method).collect();
        for tier in Tier::ALL {
            let deriv = trials
                .iter()
                .filter(|t| classify_tier(Some(t.validation_derivative.r2)) == tier)
                .count();
            let sim = trials
                .iter()
                .filter(|t| classify_tier(t.simulation.r2()) == tier)
                .count();
            tiers.push(TierRow {
                method,
                tier,
                derivative_share: deriv as f64 / trials.len() as f64,
                simulation_share: sim as f64 / trials.len() as f64,
            });
        }
    }

    let mut sigmas: Vec<f64> = results.iter().map(|r| r.sigma).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let mut failure_trend = Vec::new();
    for method in methods {
        for &sigma in &sigmas {
            let trials: Vec<&TrialResult> = results
                .iter()
                .filter(|r| r.method == method && r.sigma == sigma)
                .collect();
            if trials.is_empty() {
                continue;
            }
            let failures = trials.iter().filter(|t| t.simulation.is_hard_failure()).count();
            failure_trend.push(TrendPoint {
                method,
                sigma,
                failure_rate: failures as f64 / trials.len() as f64,
            });
        }
    }

    Summary {
        rows,
        tiers,
        failure_trend,
        total_trials: results.len(),
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:<15} {:>6} {:>10} {:>10} {:>10} {:>8} {:>8} {:>6}",
            "system", "method", "trials", "deriv_r2", "sim_r2", "complexity", "recov%", "fails", ""
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<10} {:<15} {:>6} {:>10.4} {:>10} {:>10.1} {:>8.1} {:>8} {:>6}",
                r.system,
                r.method.as_str(),
                r.trials,
                r.median_deriv_r2,
                r.median_sim_r2
                    .map_or("-".to_string(), |v| format!("{v:.4}")),
                r.median_complexity,
                r.mean_recovery_pct,
                r.hard_failures,
                ""
            )?;
        }
        writeln!(f, "total trials: {}", self.total_trials)
    }
}

/// Plot-data families the harness can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    Tiers,
    NoiseRobustness,
    Complexity,
    FailureHeatmap,
    FailureTrend,
    Timing,
    AppendixTrajectories,
}

impl PlotKind {
    pub const ALL: [PlotKind; 7] = [
        PlotKind::Tiers,
        PlotKind::NoiseRobustness,
        PlotKind::Complexity,
        PlotKind::FailureHeatmap,
        PlotKind::FailureTrend,
        PlotKind::Timing,
        PlotKind::AppendixTrajectories,
    ];

    pub fn parse(s: &str) -> Option<PlotKind> {
        match s {
            "tiers" => Some(PlotKind::Tiers),
            "noise_robustness" => Some(PlotKind::NoiseRobustness),
            "complexity" => Some(PlotKind::Complexity),
            "failure_heatmap" => Some(PlotKind::FailureHeatmap),
            "failure_trend" => Some(PlotKind::FailureTrend),
            "timing" => Some(PlotKind::Timing),
            "appendix_trajectories" => Some(PlotKind::AppendixTrajectories),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PlotKind::Tiers => "tiers",
            PlotKind::NoiseRobustness => "noise_robustness",
            PlotKind::Complexity => "complexity",
            PlotKind::FailureHeatmap => "failure_heatmap",
            PlotKind::FailureTrend => "failure_trend",
            PlotKind::Timing => "timing",
            PlotKind::AppendixTrajectories => "appendix_trajectories",
        }
    }
}

/// Writes one tidy columnar file for the requested plot family and returns
/// its path. `results_dir` is a directory previously populated by
/// [`run_sweep`]; the appendix kind re-simulates the persisted models of
/// one `(system, sigma, seed)` trial against the clean truth.
pub fn emit_plot_data(
    results_dir: &Path,
    kind: PlotKind,
    out_dir: &Path,
    appendix_pick: Option<(&str, f64, u64)>,
) -> Result<PathBuf, BenchError> {
    let results = load_results(results_dir)?;
    if results.is_empty() {
        return Err(BenchError::InvalidSpec(format!(
            "no trial records under {}",
            results_dir.display()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(BenchError::Io)?;
    let path = out_dir.join(format!("{}.tsv", kind.as_str()));
    let mut body = String::new();
    match kind {
        PlotKind::Tiers => {
            body.push_str("method\ttarget\ttier\tproportion\n");
            for row in summarize(&results).tiers {
                body.push_str(&format!(
                    "{}\tderivative\t{}\t{}\n",
                    row.method, row.tier.as_str(), row.derivative_share
                ));
                body.push_str(&format!(
                    "{}\tsimulation\t{}\t{}\n",
                    row.method, row.tier.as_str(), row.simulation_share
                ));
            }
        }
        PlotKind::NoiseRobustness => {
            body.push_str("system\tmethod\tsigma\tseed\tderiv_r2\tsim_r2\thard_failure\n");
            for r in &results {
                body.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                    r.system,
                    r.method,
                    r.sigma,
                    r.seed,
                    r.validation_derivative.r2,
                    r.simulation.r2().map_or("nan".into(), |v| v.to_string()),
                    r.simulation.is_hard_failure()
                ));
            }
        }
        PlotKind::Complexity => {
            body.push_str("system\tmethod\tsigma\tseed\tcomplexity\tground_truth\n");
            for r in &results {
                let truth = SystemSpec::preset(&r.system)
                    .map(|s| canonical_complexity(&s.kind.ground_truth()))
                    .unwrap_or(0);
                body.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\t{}\n",
                    r.system, r.method, r.sigma, r.seed, r.canonical_complexity, truth
                ));
            }
        }
        PlotKind::FailureHeatmap => {
            body.push_str("system\tmethod\tfailures\ttrials\n");
            let mut cells: BTreeMap<(String, Method), (usize, usize)> = BTreeMap::new();
            for r in &results {
                let cell = cells.entry((r.system.clone(), r.method)).or_insert((0, 0));
                cell.1 += 1;
                if r.simulation.is_hard_failure() {
                    cell.0 += 1;
                }
            }
            for ((system, method), (failures, trials)) in cells {
                body.push_str(&format!("{system}\t{method}\t{failures}\t{trials}\n"));
            }
        }
        PlotKind::FailureTrend => {
            body.push_str("method\tsigma\tfailure_rate\n");
            for p in summarize(&results).failure_trend {
                body.push_str(&format!("{}\t{}\t{}\n", p.method, p.sigma, p.failure_rate));
            }
        }
        PlotKind::Timing => {
            body.push_str("system\tmethod\tsigma\tseed\tdiscovery_s\tsimulation_s\n");
            let timings = load_timings(results_dir)?;
            for r in &results {
                let key = TrialKey {
                    system: r.system.clone(),
                    method: r.method,
                    sigma: r.sigma,
                    seed: r.seed,
                };
                if let Some(t) = timings.get(&key.id()) {
                    body.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\t{}\n",
                        r.system, r.method, r.sigma, r.seed, t.total_discovery_s, t.simulation_s
                    ));
                }
            }
        }
        PlotKind::AppendixTrajectories => {
            let (system, sigma, seed) = appendix_pick.ok_or_else(|| {
                BenchError::InvalidSpec(
                    "appendix_trajectories needs a (system, sigma, seed) selector".into(),
                )
            })?;
            body = appendix_trajectories(&results, system, sigma, seed)?;
        }
    }
    std::fs::write(&path, body).map_err(BenchError::Io)?;
    Ok(path)
}

/// Time-resolved comparison dump: the clean validation trajectory next to
/// each method's forward simulation for one chosen trial.
fn appendix_trajectories(
    results: &[TrialResult],
    system: &str,
    sigma: f64,
    seed: u64,
) -> Result<String, BenchError> {
    let spec = SystemSpec::preset(system).map_err(|e| BenchError::InvalidSpec(e.to_string()))?;
    let integrator = crate::dynamics::IntegratorConfig::default();
    let validation = spec
        .simulate_validation(&integrator)
        .map_err(|e| BenchError::Trial(e.to_string()))?;
    let n = spec.dim();

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for j in 0..n {
        let vals = (0..validation.len()).map(|i| validation.states[(i, j)]).collect();
        columns.push((format!("truth_x{j}"), vals));
    }
    for r in results {
        if r.system != system || r.sigma != sigma || r.seed != seed || r.equations.is_empty() {
            continue;
        }
        let eqs: Result<Vec<crate::expr::Expr>, _> = r
            .equations
            .iter()
            .map(|s| crate::expr::parse(s, n))
            .collect();
        let Ok(eqs) = eqs else { continue };
        let amplitude = validation.amplitude();
        let x0: Vec<f64> = (0..n).map(|j| validation.states[(0, j)]).collect();
        let horizon = validation.times.last().unwrap() - validation.times[0];
        let rhs = move |x: &[f64], out: &mut [f64]| {
            for (j, eq) in eqs.iter().enumerate() {
                out[j] = eq.evaluate_at(x);
            }
        };
        let run = crate::dynamics::integrate(
            &rhs,
            &x0,
            validation.times[0],
            horizon,
            validation.len(),
            Some(&amplitude),
            &integrator,
        )
        .map_err(|e| BenchError::Trial(e.to_string()))?;
        for j in 0..n {
            let mut vals: Vec<f64> = (0..run.trajectory.len())
                .map(|i| run.trajectory.states[(i, j)])
                .collect();
            vals.resize(validation.len(), f64::NAN);
            columns.push((format!("{}_x{j}", r.method), vals));
        }
    }

    let mut body = String::from("t");
    for (name, _) in &columns {
        body.push('\t');
        body.push_str(name);
    }
    body.push('\n');
    for i in 0..validation.len() {
        body.push_str(&validation.times[i].to_string());
        for (_, vals) in &columns {
            body.push('\t');
            if vals[i].is_nan() {
                body.push_str("nan");
            } else {
                body.push_str(&vals[i].to_string());
            }
        }
        body.push('\n');
    }
    Ok(body)
}
