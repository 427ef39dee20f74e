//! Derivative-free simplex minimizer used to refine numeric constants.

/// Minimizes `f` from `x0` with a bounded evaluation budget. Returns the
/// best point seen. `f` may return non-finite values; they lose every
/// comparison.
pub fn minimize(f: impl Fn(&[f64]) -> f64, x0: &[f64], max_evals: usize, tol: f64) -> Vec<f64> {
    let n = x0.len();
    if n == 0 {
        return Vec::new();
    }
    let score = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut evals = 0usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let fx0 = score(x0);
    evals += 1;
    simplex.push((x0.to_vec(), fx0));
    for i in 0..n {
        let mut p = x0.to_vec();
        let step = 0.1 * p[i].abs() + 0.1;
        p[i] += step;
        let fp = score(&p);
        evals += 1;
        simplex.push((p, fp));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if worst.is_finite() && (worst - best).abs() <= tol * (1.0 + best.abs()) {
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; n];
        for (p, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(p) {
                *c += x / n as f64;
            }
        }
        let worst_point = simplex[n].0.clone();
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&worst_point)
            .map(|(c, w)| c + (c - w))
            .collect();
        let fr = score(&reflect);
        evals += 1;

        if fr < simplex[0].1 {
            // try expanding further along the reflection direction
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&worst_point)
                .map(|(c, w)| c + 2.0 * (c - w))
                .collect();
            let fe = score(&expand);
            evals += 1;
            simplex[n] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflect, fr);
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&worst_point)
                .map(|(c, w)| c + 0.5 * (w - c))
                .collect();
            let fc = score(&contract);
            evals += 1;
            if fc < simplex[n].1 {
                simplex[n] = (contract, fc);
            } else {
                // shrink towards the best vertex
                let best_point = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (x, b) in entry.0.iter_mut().zip(&best_point) {
                        *x = b + 0.5 * (*x - b);
                    }
                    entry.1 = score(&entry.0);
                    evals += 1;
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0).0
}
