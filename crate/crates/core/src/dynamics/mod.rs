//! Benchmark dynamical systems, trajectory simulation with a divergence
//! brake, relative Gaussian noise injection, and the middle train/test
//! split.

mod integrate;

pub use integrate::{integrate, Integration, IntegratorConfig, Termination};

use crate::expr::Expr;
use crate::seeds;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("initial condition contains non-finite values")]
    NonFiniteInitialCondition,
    #[error("noise fraction must be non-negative, got {0}")]
    NegativeNoise(f64),
    #[error("noise can only be injected into a clean trajectory")]
    NoiseRequiresClean,
    #[error("trajectory has {m} samples; at least {min} required")]
    TooFewSamples { m: usize, min: usize },
    #[error("unknown system '{0}'")]
    UnknownSystem(String),
}

/// Whether a trajectory is pristine or carries injected measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Clean,
    Noisy { sigma: f64, seed: u64 },
}

/// Uniformly sampled states of one simulation (or a slice of one).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `m x n` state matrix, one row per snapshot.
    pub states: DMatrix<f64>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.ncols()
    }

    /// Sample spacing of the leading segment.
    pub fn dt(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Per-dimension max absolute value; the ground-truth amplitude used by
    /// the divergence brake.
    pub fn amplitude(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.states.column(j).iter().fold(0.0f64, |a, v| a.max(v.abs())))
            .collect()
    }

    fn take_rows(&self, indices: impl Iterator<Item = usize> + Clone) -> Trajectory {
        let count = indices.clone().count();
        let mut states = DMatrix::zeros(count, self.dim());
        let mut times = Vec::with_capacity(count);
        for (row, idx) in indices.enumerate() {
            times.push(self.times[idx]);
            for j in 0..self.dim() {
                states[(row, j)] = self.states[(idx, j)];
            }
        }
        Trajectory {
            times,
            states,
            provenance: self.provenance,
        }
    }

    /// Columnar text form: a `#` header line, then `t x0 .. x{n-1}` rows.
    pub fn to_columnar(&self, system: &str) -> String {
        let (sigma, seed) = match self.provenance {
            Provenance::Clean => (0.0, None),
            Provenance::Noisy { sigma, seed } => (sigma, Some(seed)),
        };
        let mut out = format!(
            "# system={system} sigma={sigma} seed={} dt={}\n",
            seed.map_or("none".to_string(), |s| s.to_string()),
            self.dt()
        );
        for i in 0..self.len() {
            out.push_str(&format!("{}", self.times[i]));
            for j in 0..self.dim() {
                out.push_str(&format!(" {}", self.states[(i, j)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Adds zero-mean Gaussian noise with per-dimension standard deviation
/// `sigma * std(X_j)`. Deterministic per seed.
pub fn add_noise(traj: &Trajectory, sigma: f64, seed: u64) -> Result<Trajectory, DynamicsError> {
    if sigma < 0.0 {
        return Err(DynamicsError::NegativeNoise(sigma));
    }
    if traj.provenance != Provenance::Clean {
        return Err(DynamicsError::NoiseRequiresClean);
    }
    let mut states = traj.states.clone();
    if sigma > 0.0 {
        let mut rng = seeds::rng(seed, "noise", &[]);
        let m = traj.len() as f64;
        for j in 0..traj.dim() {
            let col = traj.states.column(j);
            let mean = col.iter().sum::<f64>() / m;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            let scale = sigma * var.sqrt();
            for i in 0..traj.len() {
                let z: f64 = rng.sample(StandardNormal);
                states[(i, j)] += scale * z;
            }
        }
    }
    Ok(Trajectory {
        times: traj.times.clone(),
        states,
        provenance: Provenance::Noisy { sigma, seed },
    })
}

/// Row indices of the middle split: the central 80% for training and the
/// two flanking segments, in original order, for testing.
pub fn middle_split_indices(m: usize) -> Result<(Vec<usize>, Vec<usize>), DynamicsError> {
    if m < 10 {
        return Err(DynamicsError::TooFewSamples { m, min: 10 });
    }
    let lo = m / 10;
    let hi = (9 * m) / 10;
    Ok(((lo..hi).collect(), (0..lo).chain(hi..m).collect()))
}

/// Central 80% of the samples for training; the two flanking 10% segments,
/// concatenated with their original time stamps, for testing.
pub fn middle_split(traj: &Trajectory) -> Result<(Trajectory, Trajectory), DynamicsError> {
    let (train_idx, test_idx) = middle_split_indices(traj.len())?;
    let train = traj.take_rows(train_idx.iter().copied());
    let test = traj.take_rows(test_idx.iter().copied());
    Ok((train, test))
}

/// One benchmark system with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum SystemKind {
    Harmonic { k1: f64, k2: f64 },
    Pendulum { b: f64, c: f64 },
    Modulated { b: f64, k: f64 },
    VanDerPol { mu: f64 },
    Duffing { delta: f64, alpha: f64, beta: f64 },
    ComplexLorenz { sigma: f64, rho: f64, beta: f64, gamma: f64 },
}

/// A system plus the simulation protocol used for its trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub initial_condition: Vec<f64>,
    pub validation_initial_condition: Vec<f64>,
    pub horizon: f64,
    pub snapshots: usize,
}

pub const SYSTEM_NAMES: [&str; 6] = [
    "harmonic",
    "pendulum",
    "modulated",
    "vanderpol",
    "duffing",
    "lorenz",
];

impl SystemKind {
    pub fn dim(&self) -> usize {
        match self {
            SystemKind::ComplexLorenz { .. } => 3,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::Harmonic { .. } => "harmonic",
            SystemKind::Pendulum { .. } => "pendulum",
            SystemKind::Modulated { .. } => "modulated",
            SystemKind::VanDerPol { .. } => "vanderpol",
            SystemKind::Duffing { .. } => "duffing",
            SystemKind::ComplexLorenz { .. } => "lorenz",
        }
    }

    /// Exact evaluation of the governing equations.
    pub fn rhs_into(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            SystemKind::Harmonic { k1, k2 } => {
                out[0] = x[1];
                out[1] = -k1 * x[0] - k2 * x[1];
            }
            SystemKind::Pendulum { b, c } => {
                out[0] = x[1];
                out[1] = -b * x[1] - c * x[0].sin();
            }
            SystemKind::Modulated { b, k } => {
                out[0] = x[1];
                out[1] = -b * x[1] * x[0].cos() - k * x[0];
            }
            SystemKind::VanDerPol { mu } => {
                out[0] = x[1];
                out[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
            }
            SystemKind::Duffing { delta, alpha, beta } => {
                out[0] = x[1];
                out[1] = -delta * x[1] - alpha * x[0] - beta * x[0].powi(3);
            }
            SystemKind::ComplexLorenz {
                sigma,
                rho,
                beta,
                gamma,
            } => {
                out[0] = sigma * (x[1] - x[0]);
                out[1] = x[0] * (rho - x[2]) - x[1];
                out[2] = x[0] * x[1] - beta * x[2] + gamma * x[1] * (x[0] + x[2]).sin();
            }
        }
    }

    pub fn rhs(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.rhs_into(x, &mut out);
        out
    }

    /// Governing equations as symbolic expressions, one per state variable.
    pub fn ground_truth(&self) -> Vec<Expr> {
        let x = Expr::variable;
        let c = Expr::constant;
        match *self {
            SystemKind::Harmonic { k1, k2 } => vec![
                x(1),
                Expr::sub(Expr::neg(Expr::mul(c(k1), x(0))), Expr::mul(c(k2), x(1))),
            ],
            SystemKind::Pendulum { b, c: cc } => vec![
                x(1),
                Expr::sub(
                    Expr::neg(Expr::mul(c(b), x(1))),
                    Expr::mul(c(cc), Expr::sin(x(0))),
                ),
            ],
            SystemKind::Modulated { b, k } => vec![
                x(1),
                Expr::sub(
                    Expr::neg(Expr::product([c(b), x(1), Expr::cos(x(0))])),
                    Expr::mul(c(k), x(0)),
                ),
            ],
            SystemKind::VanDerPol { mu } => vec![
                x(1),
                Expr::sub(
                    Expr::product([c(mu), Expr::sub(c(1.0), Expr::pow(x(0), 2)), x(1)]),
                    x(0),
                ),
            ],
            SystemKind::Duffing { delta, alpha, beta } => vec![
                x(1),
                Expr::sum([
                    Expr::neg(Expr::mul(c(delta), x(1))),
                    Expr::neg(Expr::mul(c(alpha), x(0))),
                    Expr::neg(Expr::mul(c(beta), Expr::pow(x(0), 3))),
                ]),
            ],
            SystemKind::ComplexLorenz {
                sigma,
                rho,
                beta,
                gamma,
            } => vec![
                Expr::mul(c(sigma), Expr::sub(x(1), x(0))),
                Expr::sub(
                    Expr::mul(x(0), Expr::sub(c(rho), x(2))),
                    x(1),
                ),
                Expr::sum([
                    Expr::mul(x(0), x(1)),
                    Expr::neg(Expr::mul(c(beta), x(2))),
                    Expr::product([c(gamma), x(1), Expr::sin(Expr::add(x(0), x(2)))]),
                ]),
            ],
        }
    }

    pub fn parameters(&self) -> Vec<(&'static str, f64)> {
        match *self {
            SystemKind::Harmonic { k1, k2 } => vec![("k1", k1), ("k2", k2)],
            SystemKind::Pendulum { b, c } => vec![("b", b), ("c", c)],
            SystemKind::Modulated { b, k } => vec![("b", b), ("k", k)],
            SystemKind::VanDerPol { mu } => vec![("mu", mu)],
            SystemKind::Duffing { delta, alpha, beta } => {
                vec![("delta", delta), ("alpha", alpha), ("beta", beta)]
            }
            SystemKind::ComplexLorenz {
                sigma,
                rho,
                beta,
                gamma,
            } => vec![("sigma", sigma), ("rho", rho), ("beta", beta), ("gamma", gamma)],
        }
    }
}

impl SystemSpec {
    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Named preset with parameters and horizons that keep each system in
    /// its characteristic regime (limit cycle, bistable wells, chaotic
    /// attractor) over the simulated window.
    pub fn preset(name: &str) -> Result<SystemSpec, DynamicsError> {
        let spec = match name {
            "harmonic" => SystemSpec {
                kind: SystemKind::Harmonic { k1: 2.0, k2: 0.4 },
                initial_condition: vec![2.0, 0.0],
                validation_initial_condition: vec![1.2, -0.6],
                horizon: 15.0,
                snapshots: 5000,
            },
            "pendulum" => SystemSpec {
                kind: SystemKind::Pendulum { b: 0.3, c: 5.0 },
                initial_condition: vec![3.1, 0.0],
                validation_initial_condition: vec![2.0, 1.0],
                horizon: 8.0,
                snapshots: 5000,
            },
            "modulated" => SystemSpec {
                kind: SystemKind::Modulated { b: 0.4, k: 2.0 },
                initial_condition: vec![2.9, 0.0],
                validation_initial_condition: vec![2.2, -1.0],
                horizon: 12.0,
                snapshots: 5000,
            },
            "vanderpol" => SystemSpec {
                kind: SystemKind::VanDerPol { mu: 2.0 },
                initial_condition: vec![0.5, 0.0],
                validation_initial_condition: vec![-1.5, 1.0],
                horizon: 20.0,
                snapshots: 5000,
            },
            "duffing" => SystemSpec {
                kind: SystemKind::Duffing {
                    delta: 0.3,
                    alpha: -1.2,
                    beta: 1.5,
                },
                initial_condition: vec![1.6, 0.0],
                validation_initial_condition: vec![-1.3, 0.6],
                horizon: 15.0,
                snapshots: 5000,
            },
            "lorenz" => SystemSpec {
                kind: SystemKind::ComplexLorenz {
                    sigma: 10.0,
                    rho: 28.0,
                    beta: 8.0 / 3.0,
                    gamma: 0.35,
                },
                initial_condition: vec![-6.0, 8.0, 25.0],
                validation_initial_condition: vec![2.0, -4.0, 30.0],
                horizon: 25.0,
                snapshots: 5000,
            },
            other => return Err(DynamicsError::UnknownSystem(other.to_string())),
        };
        Ok(spec)
    }

    pub fn all_presets() -> Vec<SystemSpec> {
        SYSTEM_NAMES
            .iter()
            .map(|n| SystemSpec::preset(n).expect("preset names are valid"))
            .collect()
    }

    /// Clean trajectory from the training initial condition.
    pub fn simulate(&self, cfg: &IntegratorConfig) -> Result<Trajectory, DynamicsError> {
        let kind = self.kind;
        let run = integrate(
            &move |x: &[f64], out: &mut [f64]| kind.rhs_into(x, out),
            &self.initial_condition,
            0.0,
            self.horizon,
            self.snapshots,
            None,
            cfg,
        )?;
        debug_assert_eq!(run.termination, Termination::Completed);
        Ok(run.trajectory)
    }

    /// Clean trajectory from the held-out validation initial condition.
    pub fn simulate_validation(&self, cfg: &IntegratorConfig) -> Result<Trajectory, DynamicsError> {
        let kind = self.kind;
        let run = integrate(
            &move |x: &[f64], out: &mut [f64]| kind.rhs_into(x, out),
            &self.validation_initial_condition,
            0.0,
            self.horizon,
            self.snapshots,
            None,
            cfg,
        )?;
        debug_assert_eq!(run.termination, Termination::Completed);
        Ok(run.trajectory)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhs_hand_checks() {
        let harmonic = SystemKind::Harmonic { k1: 1.0, k2: 0.0 };
        assert_eq!(harmonic.rhs(&[1.0, 0.0]), vec![0.0, -1.0]);
        let pendulum = SystemKind::Pendulum { b: 0.3, c: 5.0 };
        assert_eq!(pendulum.rhs(&[0.0, 0.0]), vec![0.0, 0.0]);
        let vdp = SystemKind::VanDerPol { mu: 2.0 };
        let y = 1.7;
        assert_eq!(vdp.rhs(&[0.0, y]), vec![y, 2.0 * y]);
    }

    #[test]
    fn rhs_matches_ground_truth_expressions() {
        for spec in SystemSpec::all_presets() {
            let eqs = spec.kind.ground_truth();
            let x: Vec<f64> = (0..spec.dim()).map(|j| 0.37 + 0.21 * j as f64).collect();
            let direct = spec.kind.rhs(&x);
            for (j, eq) in eqs.iter().enumerate() {
                let v = eq.evaluate_at(&x);
                assert!(
                    (v - direct[j]).abs() <= 1e-12 * direct[j].abs().max(1.0),
                    "{} eq {j}: {v} vs {}",
                    spec.name(),
                    direct[j]
                );
            }
        }
    }

    #[test]
    fn noise_is_deterministic_and_scaled() {
        let spec = SystemSpec::preset("harmonic").unwrap();
        let traj = spec.simulate(&IntegratorConfig::default()).unwrap();
        let a = add_noise(&traj, 0.05, 7).unwrap();
        let b = add_noise(&traj, 0.05, 7).unwrap();
        assert_eq!(a.states, b.states);
        let zero = add_noise(&traj, 0.0, 7).unwrap();
        assert_eq!(zero.states, traj.states);

        // sample std of the injected noise within 5% of the target
        let m = traj.len() as f64;
        for j in 0..traj.dim() {
            let col = traj.states.column(j);
            let mean = col.iter().sum::<f64>() / m;
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m).sqrt();
            let target = 0.05 * std;
            let noise: Vec<f64> = (0..traj.len())
                .map(|i| a.states[(i, j)] - traj.states[(i, j)])
                .collect();
            let nstd = (noise.iter().map(|v| v * v).sum::<f64>() / m).sqrt();
            assert!(
                (nstd - target).abs() < 0.05 * target,
                "dim {j}: {nstd} vs {target}"
            );
            // empirical mean within 3 standard errors of zero
            let nmean = noise.iter().sum::<f64>() / m;
            assert!(nmean.abs() < 3.0 * target / m.sqrt(), "dim {j} mean {nmean}");
        }
    }

    #[test]
    fn rejects_bad_noise_requests() {
        let spec = SystemSpec::preset("harmonic").unwrap();
        let traj = spec.simulate(&IntegratorConfig::default()).unwrap();
        assert!(matches!(
            add_noise(&traj, -0.1, 1),
            Err(DynamicsError::NegativeNoise(_))
        ));
        let noisy = add_noise(&traj, 0.01, 1).unwrap();
        assert_eq!(
            add_noise(&noisy, 0.01, 1),
            Err(DynamicsError::NoiseRequiresClean)
        );
    }

    #[test]
    fn middle_split_partitions() {
        let spec = SystemSpec::preset("harmonic").unwrap();
        let traj = spec.simulate(&IntegratorConfig::default()).unwrap();
        let (train, test) = middle_split(&traj).unwrap();
        assert_eq!(train.len(), 4000);
        assert_eq!(test.len(), 1000);
        assert_eq!(train.times[0], traj.times[500]);
        assert_eq!(*train.times.last().unwrap(), traj.times[4499]);
        assert_eq!(test.times[499], traj.times[499]);
        assert_eq!(test.times[500], traj.times[4500]);

        // ten-sample edge case: train 1..8, test {0, 9}
        let tiny = Trajectory {
            times: (0..10).map(|i| i as f64).collect(),
            states: DMatrix::from_fn(10, 1, |i, _| i as f64),
            provenance: Provenance::Clean,
        };
        let (tr, te) = middle_split(&tiny).unwrap();
        assert_eq!(tr.times, (1..9).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(te.times, vec![0.0, 9.0]);

        let too_small = tiny.take_rows(0..9);
        assert!(middle_split(&too_small).is_err());
    }

    #[test]
    fn columnar_dump_shape() {
        let spec = SystemSpec::preset("harmonic").unwrap();
        let mut traj = spec.simulate(&IntegratorConfig::default()).unwrap();
        traj = add_noise(&traj, 0.01, 3).unwrap();
        let text = traj.to_columnar("harmonic");
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("# system=harmonic sigma=0.01 seed=3"));
        assert_eq!(lines.count(), traj.len());
    }
}
