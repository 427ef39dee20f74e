//! Adaptive Dormand-Prince 5(4) integration with dense output, an implicit
//! trapezoidal fallback for stiff right-hand sides, and a divergence brake.

use super::{DynamicsError, Provenance, Trajectory};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 2_000_000,
        }
    }
}

/// How a simulation ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    /// The divergence brake fired: some state exceeded 100x the reference
    /// amplitude.
    Diverged { t: f64 },
    /// A state or derivative became NaN or infinite.
    NonFinite { t: f64 },
    /// The step budget ran out (relentless step rejection).
    BudgetExhausted { t: f64 },
}

#[derive(Debug, Clone)]
pub struct Integration {
    pub trajectory: Trajectory,
    pub termination: Termination,
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// Error coefficients: fifth-order weights minus the embedded fourth-order.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output coefficients.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Consecutive rejected steps that trigger the implicit fallback.
const STIFFNESS_REJECTS: usize = 30;

struct Sampler {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    next: usize,
    brake: Option<Vec<f64>>,
}

enum SampleOutcome {
    Ok,
    Braked { t: f64 },
    NonFinite { t: f64 },
}

impl Sampler {
    fn check(&self, y: &DVector<f64>, t: f64) -> SampleOutcome {
        if y.iter().any(|v| !v.is_finite()) {
            return SampleOutcome::NonFinite { t };
        }
        if let Some(brake) = &self.brake {
            for (v, amp) in y.iter().zip(brake) {
                if v.abs() > 100.0 * amp {
                    return SampleOutcome::Braked { t };
                }
            }
        }
        SampleOutcome::Ok
    }

    /// Records every sample time inside `(t0, t1]` via `interp`.
    fn drain(
        &mut self,
        t0: f64,
        t1: f64,
        mut interp: impl FnMut(f64) -> DVector<f64>,
    ) -> SampleOutcome {
        while self.next < self.times.len() && self.times[self.next] <= t1 + 1e-14 * t1.abs().max(1.0)
        {
            let ts = self.times[self.next].clamp(t0.min(t1), t1);
            let y = interp(ts);
            match self.check(&y, ts) {
                SampleOutcome::Ok => {}
                bad => return bad,
            }
            self.states.push(y);
            self.next += 1;
        }
        SampleOutcome::Ok
    }

    fn into_trajectory(self) -> Trajectory {
        let n = self.states.first().map_or(0, |y| y.len());
        let m = self.states.len();
        let mut states = DMatrix::zeros(m, n);
        for (i, y) in self.states.iter().enumerate() {
            for j in 0..n {
                states[(i, j)] = y[j];
            }
        }
        Trajectory {
            times: self.times[..m].to_vec(),
            states,
            provenance: Provenance::Clean,
        }
    }
}

/// Integrates `dy/dt = f(y)` over `[t0, t0 + horizon]`, sampling `m`
/// uniformly spaced snapshots (endpoints included) from the dense output.
///
/// With `brake_amplitude` set, integration stops the first time any
/// `|y_j|` exceeds `100 * brake_amplitude[j]`; non-finite states stop it
/// unconditionally. The returned trajectory holds the samples produced up
/// to the stopping point.
pub fn integrate(
    f: &(impl Fn(&[f64], &mut [f64]) + ?Sized),
    x0: &[f64],
    t0: f64,
    horizon: f64,
    m: usize,
    brake_amplitude: Option<&[f64]>,
    cfg: &IntegratorConfig,
) -> Result<Integration, DynamicsError> {
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(DynamicsError::NonFiniteInitialCondition);
    }
    if m < 2 {
        return Err(DynamicsError::TooFewSamples { m, min: 2 });
    }
    let n = x0.len();
    let t_end = t0 + horizon;
    let sample_times: Vec<f64> = (0..m)
        .map(|i| t0 + horizon * i as f64 / (m - 1) as f64)
        .collect();

    let eval = |y: &DVector<f64>| {
        let mut out = vec![0.0; n];
        f(y.as_slice(), &mut out);
        DVector::from_vec(out)
    };

    let mut sampler = Sampler {
        times: sample_times,
        states: Vec::with_capacity(m),
        next: 0,
        brake: brake_amplitude.map(|b| b.to_vec()),
    };

    let mut t = t0;
    let mut y = DVector::from_column_slice(x0);
    match sampler.check(&y, t) {
        SampleOutcome::Ok => {}
        SampleOutcome::Braked { t } => {
            return Ok(finishing(sampler, Termination::Diverged { t }))
        }
        SampleOutcome::NonFinite { t } => {
            return Ok(finishing(sampler, Termination::NonFinite { t }))
        }
    }
    // the initial condition is the first sample
    sampler.states.push(y.clone());
    sampler.next = 1;

    let mut k1 = eval(&y);
    if k1.iter().any(|v| !v.is_finite()) {
        return Ok(finishing(sampler, Termination::NonFinite { t }));
    }

    let scale = |a: &DVector<f64>, b: &DVector<f64>, e: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            let sc = cfg.atol + cfg.rtol * a[i].abs().max(b[i].abs());
            let q = e[i] / sc;
            acc += q * q;
        }
        (acc / n as f64).sqrt()
    };

    let mut h = initial_step(&y, &k1, horizon, cfg);
    let mut steps = 0usize;
    let mut consecutive_rejects = 0usize;
    let mut stiff_mode = false;

    let mut ks: Vec<DVector<f64>> = vec![DVector::zeros(n); 7];

    while t < t_end && sampler.next < sampler.times.len() {
        steps += 1;
        if steps > cfg.max_steps {
            return Ok(finishing(sampler, Termination::BudgetExhausted { t }));
        }
        let h_min = 1e-14 * t.abs().max(1.0);
        // stiffness heuristics: relentless rejection, step-size collapse, or
        // thousands of tiny steps making negligible progress
        let crawling = steps > 10_000 && h < 1e-5 * horizon;
        if !stiff_mode && (consecutive_rejects >= STIFFNESS_REJECTS || h.abs() < h_min || crawling)
        {
            stiff_mode = true;
            consecutive_rejects = 0;
            h = (h.abs().max(16.0 * h_min)).min(t_end - t);
        }
        h = h.min(t_end - t);

        if stiff_mode {
            match trapezoid_step(&eval, &mut t, &mut y, &mut k1, &mut h, t_end, cfg, &mut sampler) {
                StepResult::Advanced => {}
                StepResult::Finished(term) => return Ok(finishing(sampler, term)),
            }
            continue;
        }

        // Dormand-Prince stages (FSAL: ks[0] carried over)
        ks[0] = k1.clone();
        let mut failed = false;
        for s in 0..6 {
            let mut ys = y.clone();
            for (j, a) in A[s].iter().enumerate().take(s + 1) {
                if *a != 0.0 {
                    ys.axpy(h * a, &ks[j], 1.0);
                }
            }
            let _ = C[s];
            ks[s + 1] = eval(&ys);
            if ks[s + 1].iter().any(|v| !v.is_finite()) {
                failed = true;
                break;
            }
        }
        if failed {
            // a stage blew up: halve the step as a rejection
            consecutive_rejects += 1;
            h *= 0.25;
            if h.abs() < h_min && consecutive_rejects > STIFFNESS_REJECTS {
                return Ok(finishing(sampler, Termination::NonFinite { t }));
            }
            continue;
        }

        // y1 uses the row-7 weights (equal to A[5] plus k7 coefficient 0)
        let mut y1 = y.clone();
        for (j, a) in A[5].iter().enumerate() {
            if *a != 0.0 {
                y1.axpy(h * a, &ks[j], 1.0);
            }
        }
        // ks[6] is f(t+h, y1), reused as next k1 (FSAL)
        let k_new = eval(&y1);
        let mut err_vec = DVector::zeros(n);
        for (j, e) in E.iter().enumerate().take(6) {
            if *e != 0.0 {
                err_vec.axpy(h * e, &ks[j], 1.0);
            }
        }
        err_vec.axpy(h * E[6], &k_new, 1.0);
        let err = if y1.iter().chain(k_new.iter()).all(|v| v.is_finite()) {
            scale(&y, &y1, &err_vec)
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            consecutive_rejects = 0;
            // dense output over (t, t+h]
            let delta = &y1 - &y;
            let bspl = &ks[0] * h - &delta;
            let r4 = &delta - &k_new * h - &bspl;
            let mut r5 = DVector::zeros(n);
            for (j, d) in D.iter().enumerate().take(6) {
                if *d != 0.0 {
                    r5.axpy(h * d, &ks[j], 1.0);
                }
            }
            r5.axpy(h * D[6], &k_new, 1.0);
            let y0snap = y.clone();
            let t_next = t + h;
            let outcome = sampler.drain(t, t_next, |ts| {
                let theta = (ts - t) / h;
                let omt = 1.0 - theta;
                let inner2 = &bspl + (&r4 + &r5 * omt) * theta;
                &y0snap + (&delta + inner2 * omt) * theta
            });
            match outcome {
                SampleOutcome::Ok => {}
                SampleOutcome::Braked { t } => {
                    return Ok(finishing(sampler, Termination::Diverged { t }))
                }
                SampleOutcome::NonFinite { t } => {
                    return Ok(finishing(sampler, Termination::NonFinite { t }))
                }
            }
            t = t_next;
            y = y1;
            k1 = k_new;
            match sampler.check(&y, t) {
                SampleOutcome::Ok => {}
                SampleOutcome::Braked { t } => {
                    return Ok(finishing(sampler, Termination::Diverged { t }))
                }
                SampleOutcome::NonFinite { t } => {
                    return Ok(finishing(sampler, Termination::NonFinite { t }))
                }
            }
            let fac = (0.9 * err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
            h *= fac;
        } else {
            consecutive_rejects += 1;
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            h *= fac.min(0.9);
        }
    }

    Ok(finishing(sampler, Termination::Completed))
}

fn finishing(sampler: Sampler, termination: Termination) -> Integration {
    Integration {
        trajectory: sampler.into_trajectory(),
        termination,
    }
}

enum StepResult {
    Advanced,
    Finished(Termination),
}

/// One adaptive implicit-trapezoid step with step-doubling error control.
#[allow(clippy::too_many_arguments)]
fn trapezoid_step(
    eval: &impl Fn(&DVector<f64>) -> DVector<f64>,
    t: &mut f64,
    y: &mut DVector<f64>,
    f0: &mut DVector<f64>,
    h: &mut f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    sampler: &mut Sampler,
) -> StepResult {
    let n = y.len();
    loop {
        let hh = (*h).min(t_end - *t);
        if hh <= 1e-14 * t.abs().max(1.0) {
            return StepResult::Finished(Termination::BudgetExhausted { t: *t });
        }
        let full = solve_trapezoid(eval, y, f0, hh);
        let half = solve_trapezoid(eval, y, f0, hh / 2.0).and_then(|mid| {
            let fmid = eval(&mid);
            if fmid.iter().any(|v| !v.is_finite()) {
                return None;
            }
            solve_trapezoid(eval, &mid, &fmid, hh / 2.0)
        });
        match (full, half) {
            (Some(y_full), Some(y_half)) => {
                let mut acc = 0.0;
                for i in 0..n {
                    let sc = cfg.atol + cfg.rtol * y_half[i].abs().max(y[i].abs());
                    let q = (y_half[i] - y_full[i]) / (3.0 * sc);
                    acc += q * q;
                }
                let err = (acc / n as f64).sqrt();
                if err <= 1.0 {
                    let y0 = y.clone();
                    let f0c = f0.clone();
                    let f1 = eval(&y_half);
                    if f1.iter().any(|v| !v.is_finite()) {
                        return StepResult::Finished(Termination::NonFinite { t: *t + hh });
                    }
                    let t0 = *t;
                    let outcome = sampler.drain(t0, t0 + hh, |ts| {
                        // cubic Hermite over the accepted step
                        let theta = (ts - t0) / hh;
                        let h00 = (1.0 + 2.0 * theta) * (1.0 - theta) * (1.0 - theta);
                        let h10 = theta * (1.0 - theta) * (1.0 - theta);
                        let h01 = theta * theta * (3.0 - 2.0 * theta);
                        let h11 = theta * theta * (theta - 1.0);
                        &y0 * h00 + &f0c * (h10 * hh) + &y_half * h01 + &f1 * (h11 * hh)
                    });
                    match outcome {
                        SampleOutcome::Ok => {}
                        SampleOutcome::Braked { t } => {
                            return StepResult::Finished(Termination::Diverged { t })
                        }
                        SampleOutcome::NonFinite { t } => {
                            return StepResult::Finished(Termination::NonFinite { t })
                        }
                    }
                    *t += hh;
                    *y = y_half;
                    *f0 = f1;
                    match sampler.check(y, *t) {
                        SampleOutcome::Ok => {}
                        SampleOutcome::Braked { t } => {
                            return StepResult::Finished(Termination::Diverged { t })
                        }
                        SampleOutcome::NonFinite { t } => {
                            return StepResult::Finished(Termination::NonFinite { t })
                        }
                    }
                    *h = hh * (0.9 * err.max(1e-10).powf(-1.0 / 3.0)).clamp(0.3, 4.0);
                    return StepResult::Advanced;
                }
                *h = hh * (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 0.9);
            }
            _ => {
                *h = hh * 0.25;
            }
        }
    }
}

/// Newton solve of `y1 = y0 + h/2 (f0 + f(y1))` with a finite-difference
/// Jacobian; falls back to `None` when Newton stalls.
fn solve_trapezoid(
    eval: &impl Fn(&DVector<f64>) -> DVector<f64>,
    y0: &DVector<f64>,
    f0: &DVector<f64>,
    h: f64,
) -> Option<DVector<f64>> {
    let n = y0.len();
    let mut y1 = y0 + f0 * h; // explicit Euler predictor
    for _ in 0..12 {
        let f1 = eval(&y1);
        if f1.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let mut g = &y1 - y0 - (f0 + &f1) * (h / 2.0);
        let gnorm = g.amax();
        let ynorm = y1.amax().max(1.0);
        if gnorm <= 1e-12 * ynorm {
            return Some(y1);
        }
        // finite-difference Jacobian of g
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let delta = 1e-8 * (1.0 + y1[j].abs());
            let mut yp = y1.clone();
            yp[j] += delta;
            let fp = eval(&yp);
            if fp.iter().any(|v| !v.is_finite()) {
                return None;
            }
            for i in 0..n {
                let dfij = (fp[i] - f1[i]) / delta;
                jac[(i, j)] = if i == j { 1.0 } else { 0.0 } - (h / 2.0) * dfij;
            }
        }
        let lu = jac.lu();
        if !lu.solve_mut(&mut g) {
            return None;
        }
        y1 -= &g;
        if g.amax() <= 1e-13 * ynorm {
            let check = eval(&y1);
            if check.iter().any(|v| !v.is_finite()) {
                return None;
            }
            return Some(y1);
        }
    }
    None
}

/// Hairer-style automatic initial step size.
fn initial_step(y0: &DVector<f64>, f0: &DVector<f64>, horizon: f64, cfg: &IntegratorConfig) -> f64 {
    let n = y0.len() as f64;
    let norm = |v: &DVector<f64>, r: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        for (x, y) in v.iter().zip(r.iter()) {
            let sc = cfg.atol + cfg.rtol * y.abs();
            acc += (x / sc) * (x / sc);
        }
        (acc / n).sqrt()
    };
    let d0 = norm(y0, y0);
    let d1 = norm(f0, y0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h0.min(horizon / 10.0).max(1e-10 * horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(x: &[f64], out: &mut [f64]) {
        out[0] = x[1];
        out[1] = -x[0];
    }

    #[test]
    fn harmonic_one_period_accuracy() {
        let cfg = IntegratorConfig::default();
        let run = integrate(
            &harmonic,
            &[1.0, 0.0],
            0.0,
            2.0 * std::f64::consts::PI,
            500,
            None,
            &cfg,
        )
        .unwrap();
        assert_eq!(run.termination, Termination::Completed);
        let mut max_err = 0.0f64;
        for (i, t) in run.trajectory.times.iter().enumerate() {
            let e0 = (run.trajectory.states[(i, 0)] - t.cos()).abs();
            let e1 = (run.trajectory.states[(i, 1)] + t.sin()).abs();
            max_err = max_err.max(e0).max(e1);
        }
        assert!(max_err < 1e-6, "max error {max_err}");
        let last = run.trajectory.len() - 1;
        assert!((run.trajectory.states[(last, 0)] - 1.0).abs() < 1e-6);
        assert!(run.trajectory.states[(last, 1)].abs() < 1e-6);
    }

    #[test]
    fn tightening_tolerance_reduces_error() {
        let err_at = |rtol: f64| -> f64 {
            let cfg = IntegratorConfig {
                rtol,
                atol: rtol * 1e-3,
                max_steps: 1_000_000,
            };
            let run = integrate(
                &harmonic,
                &[1.0, 0.0],
                0.0,
                2.0 * std::f64::consts::PI,
                200,
                None,
                &cfg,
            )
            .unwrap();
            run.trajectory
                .times
                .iter()
                .enumerate()
                .map(|(i, t)| (run.trajectory.states[(i, 0)] - t.cos()).abs())
                .fold(0.0f64, f64::max)
        };
        let loose = err_at(2e-5);
        let halved = err_at(1e-5);
        let tight = err_at(1e-9);
        assert!(halved < loose, "halving: {halved} !< {loose}");
        assert!(tight < loose, "tight: {tight} !< {loose}");
    }

    #[test]
    fn brake_fires_on_exponential_growth() {
        let growth = |x: &[f64], out: &mut [f64]| out[0] = x[0];
        let run = integrate(&growth, &[1.0], 0.0, 20.0, 100, Some(&[1.0]), &IntegratorConfig::default())
            .unwrap();
        match run.termination {
            Termination::Diverged { t } => {
                // |x| crosses 100 * amplitude at t = ln(100) ~ 4.605
                assert!(t > 4.4 && t < 4.9, "fired at {t}");
            }
            other => panic!("expected divergence, got {other:?}"),
        }
        assert!(run.trajectory.len() < 100);
    }

    #[test]
    fn brake_never_fires_on_ground_truth() {
        use crate::dynamics::SystemSpec;
        for spec in SystemSpec::all_presets() {
            let cfg = IntegratorConfig::default();
            let clean = spec.simulate_validation(&cfg).unwrap();
            let amp = clean.amplitude();
            let kind = spec.kind;
            let run = integrate(
                &move |x: &[f64], out: &mut [f64]| kind.rhs_into(x, out),
                &spec.validation_initial_condition,
                0.0,
                spec.horizon,
                200,
                Some(&amp),
                &cfg,
            )
            .unwrap();
            assert_eq!(run.termination, Termination::Completed, "{}", spec.name());
        }
    }

    #[test]
    fn pendulum_energy_dissipates() {
        let b = 0.3;
        let c = 5.0;
        let f = move |x: &[f64], out: &mut [f64]| {
            out[0] = x[1];
            out[1] = -b * x[1] - c * x[0].sin();
        };
        let run = integrate(&f, &[2.0, 0.0], 0.0, 10.0, 400, None, &IntegratorConfig::default())
            .unwrap();
        let energy = |x0: f64, x1: f64| 0.5 * x1 * x1 - c * x0.cos();
        let mut prev = f64::INFINITY;
        for i in 0..run.trajectory.len() {
            let e = energy(run.trajectory.states[(i, 0)], run.trajectory.states[(i, 1)]);
            assert!(e <= prev + 1e-6, "energy rose at sample {i}");
            prev = e;
        }
    }

    #[test]
    fn stiff_fallback_handles_rapid_decay() {
        // lambda = -1e7 over a unit horizon: the explicit pair would need
        // more steps than the budget allows, so this only completes if the
        // implicit fallback engages
        let f = |x: &[f64], out: &mut [f64]| out[0] = -1e7 * (x[0] - 1.0);
        let run = integrate(&f, &[0.0], 0.0, 1.0, 50, None, &IntegratorConfig::default()).unwrap();
        assert_eq!(run.termination, Termination::Completed);
        let last = run.trajectory.len() - 1;
        assert!(
            (run.trajectory.states[(last, 0)] - 1.0).abs() < 1e-6,
            "settled at {}",
            run.trajectory.states[(last, 0)]
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let err = integrate(
            &harmonic,
            &[f64::NAN, 0.0],
            0.0,
            1.0,
            10,
            None,
            &IntegratorConfig::default(),
        );
        assert!(matches!(err, Err(DynamicsError::NonFiniteInitialCondition)));
        let err = integrate(&harmonic, &[1.0, 0.0], 0.0, 1.0, 1, None, &IntegratorConfig::default());
        assert!(matches!(err, Err(DynamicsError::TooFewSamples { .. })));
    }
}
