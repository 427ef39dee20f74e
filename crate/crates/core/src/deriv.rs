//! Noise-robust time-derivative estimation: local least-squares polynomial
//! smoothing over a sliding window, then centered finite differences with
//! one-sided stencils at the boundaries.

use crate::dynamics::Trajectory;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DerivError {
    #[error("window must be odd and at least 5, got {0}")]
    BadWindow(usize),
    #[error("polynomial order {order} must be below window length {window}")]
    BadOrder { order: usize, window: usize },
    #[error("signal has {m} samples; window of {window} needs more")]
    TooShort { m: usize, window: usize },
    #[error("derivative estimation needs uniformly spaced samples")]
    NonUniformTimes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceScheme {
    /// Second-order centered differences, one-sided at the edges.
    #[default]
    Centered2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    /// Sliding-window length; odd, at least 5.
    pub window: usize,
    /// Fitted polynomial order; below the window length.
    pub poly_order: usize,
    pub scheme: DifferenceScheme,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            window: 15,
            poly_order: 3,
            scheme: DifferenceScheme::Centered2,
        }
    }
}

impl SmootherConfig {
    pub fn validate(&self) -> Result<(), DerivError> {
        if self.window < 5 || self.window % 2 == 0 {
            return Err(DerivError::BadWindow(self.window));
        }
        if self.poly_order >= self.window {
            return Err(DerivError::BadOrder {
                order: self.poly_order,
                window: self.window,
            });
        }
        Ok(())
    }
}

/// Smoothing weights for every evaluation offset inside the window.
/// Row `p` holds the weights of the least-squares polynomial fit over the
/// window evaluated at position `p`; interior points use `p = window / 2`.
fn smoothing_weights(window: usize, order: usize) -> DMatrix<f64> {
    let mut weights = DMatrix::zeros(window, window);
    for p in 0..window {
        // design matrix in offsets relative to the evaluation position
        let a = DMatrix::from_fn(window, order + 1, |j, k| {
            (j as f64 - p as f64).powi(k as i32)
        });
        let ata = a.transpose() * &a;
        let mut e0 = DVector::zeros(order + 1);
        e0[0] = 1.0;
        let z = ata
            .lu()
            .solve(&e0)
            .expect("normal equations of a Vandermonde basis are invertible");
        let row = &a * z;
        for j in 0..window {
            weights[(p, j)] = row[j];
        }
    }
    weights
}

fn check_uniform(times: &[f64]) -> Result<f64, DerivError> {
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(DerivError::NonUniformTimes);
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-8 * dt.max(1.0) {
            return Err(DerivError::NonUniformTimes);
        }
    }
    Ok(dt)
}

fn smooth_column(signal: &[f64], weights: &DMatrix<f64>, window: usize) -> Vec<f64> {
    let m = signal.len();
    let half = window / 2;
    let mut out = vec![0.0; m];
    for i in 0..m {
        let start = i.saturating_sub(half).min(m - window);
        let p = i - start;
        let mut acc = 0.0;
        for j in 0..window {
            acc += weights[(p, j)] * signal[start + j];
        }
        out[i] = acc;
    }
    out
}

fn differentiate(signal: &[f64], dt: f64) -> Vec<f64> {
    let m = signal.len();
    let mut out = vec![0.0; m];
    out[0] = (-3.0 * signal[0] + 4.0 * signal[1] - signal[2]) / (2.0 * dt);
    for i in 1..m - 1 {
        out[i] = (signal[i + 1] - signal[i - 1]) / (2.0 * dt);
    }
    out[m - 1] = (3.0 * signal[m - 1] - 4.0 * signal[m - 2] + signal[m - 3]) / (2.0 * dt);
    out
}

/// Per-dimension smoothed finite-difference derivative estimates; one row
/// per snapshot, one column per state variable.
pub fn estimate_derivatives(
    traj: &Trajectory,
    cfg: &SmootherConfig,
) -> Result<DMatrix<f64>, DerivError> {
    cfg.validate()?;
    let m = traj.len();
    if m <= cfg.window {
        return Err(DerivError::TooShort {
            m,
            window: cfg.window,
        });
    }
    let dt = check_uniform(&traj.times)?;
    let weights = smoothing_weights(cfg.window, cfg.poly_order);
    let mut out = DMatrix::zeros(m, traj.dim());
    for j in 0..traj.dim() {
        let signal: Vec<f64> = traj.states.column(j).iter().copied().collect();
        let smooth = smooth_column(&signal, &weights, cfg.window);
        let deriv = differentiate(&smooth, dt);
        for i in 0..m {
            out[(i, j)] = deriv[i];
        }
    }
    Ok(out)
}

/// Plain centered differences without smoothing; the reference the smoothed
/// estimator is compared against on noisy data.
pub fn raw_derivatives(traj: &Trajectory) -> Result<DMatrix<f64>, DerivError> {
    let m = traj.len();
    if m < 3 {
        return Err(DerivError::TooShort { m, window: 3 });
    }
    let dt = check_uniform(&traj.times)?;
    let mut out = DMatrix::zeros(m, traj.dim());
    for j in 0..traj.dim() {
        let signal: Vec<f64> = traj.states.column(j).iter().copied().collect();
        let deriv = differentiate(&signal, dt);
        for i in 0..m {
            out[(i, j)] = deriv[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{add_noise, middle_split, Provenance, SystemSpec};
    use crate::dynamics::IntegratorConfig;

    fn signal_traj(times: Vec<f64>, f: impl Fn(f64) -> f64) -> Trajectory {
        let states = DMatrix::from_fn(times.len(), 1, |i, _| f(times[i]));
        Trajectory {
            times,
            states,
            provenance: Provenance::Clean,
        }
    }

    #[test]
    fn sine_derivative_interior_accuracy() {
        let dt = 0.01;
        let m = 1000;
        let times: Vec<f64> = (0..m).map(|i| i as f64 * dt).collect();
        let traj = signal_traj(times.clone(), f64::sin);
        let cfg = SmootherConfig {
            window: 11,
            poly_order: 3,
            scheme: DifferenceScheme::Centered2,
        };
        let d = estimate_derivatives(&traj, &cfg).unwrap();
        let mut max_err = 0.0f64;
        for i in cfg.window..m - cfg.window {
            max_err = max_err.max((d[(i, 0)] - times[i].cos()).abs());
        }
        assert!(max_err < 1e-4, "interior max error {max_err}");
    }

    #[test]
    fn constant_signal_zero_derivative() {
        let times: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let traj = signal_traj(times, |_| 4.2);
        let d = estimate_derivatives(&traj, &SmootherConfig::default()).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn linear_signal_exact_everywhere() {
        let (a, b) = (0.7, -1.3);
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        let traj = signal_traj(times, |t| a + b * t);
        let d = estimate_derivatives(&traj, &SmootherConfig::default()).unwrap();
        for i in 0..traj.len() {
            assert!((d[(i, 0)] - b).abs() < 1e-10, "row {i}: {}", d[(i, 0)]);
        }
    }

    #[test]
    fn polynomial_reproduction_to_roundoff() {
        // cubic signal with order-3 smoothing: derivative exact on interior
        let times: Vec<f64> = (0..300).map(|i| i as f64 * 0.02).collect();
        let traj = signal_traj(times.clone(), |t| 0.3 * t * t * t - t * t + 0.5);
        let cfg = SmootherConfig::default();
        let d = estimate_derivatives(&traj, &cfg).unwrap();
        for i in 1..traj.len() - 1 {
            let truth = 0.9 * times[i] * times[i] - 2.0 * times[i];
            // centered differencing of an exactly-reproduced cubic has only
            // its own truncation error
            assert!(
                (d[(i, 0)] - truth).abs() < 1e-3,
                "row {i}: {} vs {truth}",
                d[(i, 0)]
            );
        }
    }

    #[test]
    fn estimator_is_linear() {
        let times: Vec<f64> = (0..150).map(|i| i as f64 * 0.03).collect();
        let f = |t: f64| (1.7 * t).sin();
        let g = |t: f64| (0.6 * t).cos() * t;
        let (alpha, beta) = (2.5, -0.75);
        let cfg = SmootherConfig::default();
        let df = estimate_derivatives(&signal_traj(times.clone(), f), &cfg).unwrap();
        let dg = estimate_derivatives(&signal_traj(times.clone(), g), &cfg).unwrap();
        let dfg = estimate_derivatives(
            &signal_traj(times.clone(), |t| alpha * f(t) + beta * g(t)),
            &cfg,
        )
        .unwrap();
        for i in 0..times.len() {
            let lhs = dfg[(i, 0)];
            let rhs = alpha * df[(i, 0)] + beta * dg[(i, 0)];
            assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn smoothing_attenuates_noise_versus_raw_differences() {
        // damped pendulum at the highest benchmark noise level
        let spec = SystemSpec::preset("pendulum").unwrap();
        let clean = spec.simulate(&IntegratorConfig::default()).unwrap();
        let noisy = add_noise(&clean, 0.05, 42).unwrap();
        let (clean_train, _) = middle_split(&clean).unwrap();
        let (noisy_train, _) = middle_split(&noisy).unwrap();

        let cfg = SmootherConfig::default();
        let smooth_noisy = estimate_derivatives(&noisy_train, &cfg).unwrap();
        let smooth_clean = estimate_derivatives(&clean_train, &cfg).unwrap();
        let raw_noisy = raw_derivatives(&noisy_train).unwrap();
        let raw_clean = raw_derivatives(&clean_train).unwrap();

        for j in 0..clean.dim() {
            let var = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> f64 {
                let m = a.nrows() as f64;
                (0..a.nrows())
                    .map(|i| (a[(i, j)] - b[(i, j)]).powi(2))
                    .sum::<f64>()
                    / m
            };
            let smoothed_err = var(&smooth_noisy, &smooth_clean);
            let raw_err = var(&raw_noisy, &raw_clean);
            assert!(
                smoothed_err < raw_err,
                "dim {j}: smoothed {smoothed_err} !< raw {raw_err}"
            );
        }
    }

    #[test]
    fn config_validation() {
        let bad = SmootherConfig {
            window: 4,
            poly_order: 2,
            scheme: DifferenceScheme::Centered2,
        };
        assert!(matches!(bad.validate(), Err(DerivError::BadWindow(4))));
        let bad = SmootherConfig {
            window: 5,
            poly_order: 5,
            scheme: DifferenceScheme::Centered2,
        };
        assert!(matches!(bad.validate(), Err(DerivError::BadOrder { .. })));
        let times: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let traj = signal_traj(times, |t| t);
        assert!(matches!(
            estimate_derivatives(&traj, &SmootherConfig::default()),
            Err(DerivError::TooShort { .. })
        ));
    }
}
