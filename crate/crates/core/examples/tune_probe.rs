//! Dev probe: candidate preset parameters vs decorrelation and regime targets.
use autosindy::dynamics::{add_noise, integrate, middle_split, IntegratorConfig, SystemKind, SystemSpec, Termination};
use autosindy::expr::parse;

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut c, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        c += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    c / (va * vb).sqrt()
}

fn check(kind: SystemKind, ic: Vec<f64>, horizon: f64, pairs: &[(&str, &str)]) {
    let spec = SystemSpec { kind, initial_condition: ic.clone(), validation_initial_condition: ic.clone(), horizon, snapshots: 5000 };
    let clean = match spec.simulate(&IntegratorConfig::default()) {
        Ok(t) => t,
        Err(e) => { println!("  !! integrate failed: {e}"); return; }
    };
    let noisy = add_noise(&clean, 0.01, 32).unwrap();
    let (train, _) = middle_split(&noisy).unwrap();
    print!("  {:?} ic={:?} T={}: x0 in {:.2}..{:.2}", kind, ic, horizon,
        train.states.column(0).min(), train.states.column(0).max());
    if spec.dim() == 3 {
        print!(" x1 in {:.1}..{:.1} x2 in {:.1}..{:.1}",
            train.states.column(1).min(), train.states.column(1).max(),
            train.states.column(2).min(), train.states.column(2).max());
    }
    for (a, b) in pairs {
        let va = parse(a, spec.dim()).unwrap().evaluate(&train.states).unwrap();
        let vb = parse(b, spec.dim()).unwrap().evaluate(&train.states).unwrap();
        print!("  corr({a},{b})={:.3}", corr(&va, &vb));
    }
    println!();
    let _ = integrate(&|x: &[f64], out: &mut [f64]| kind.rhs_into(x, out), &ic, 0.0, 1.0, 10, None, &IntegratorConfig::default()).map(|r| assert_eq!(r.termination, Termination::Completed));
}

fn main() {
    println!("pendulum candidates:");
    for (b, ic0, t) in [(0.3, 3.0, 8.0), (0.25, 3.05, 8.0), (0.25, 3.1, 10.0), (0.3, 3.1, 8.0), (0.35, 3.12, 10.0)] {
        check(SystemKind::Pendulum { b, c: 5.0 }, vec![ic0, 0.0], t, &[("x0", "sin(x0)"), ("x1", "x1")]);
    }
    println!("modulated candidates:");
    for (b, k, ic0, t) in [(0.5, 2.0, 2.8, 15.0), (0.4, 2.0, 2.9, 12.0), (0.5, 1.5, 2.8, 12.0), (0.6, 2.0, 3.0, 10.0)] {
        check(SystemKind::Modulated { b, k }, vec![ic0, 0.0], t, &[("x1", "x1*cos(x0)"), ("x0", "sin(x0)")]);
    }
    println!("lorenz gamma/horizon candidates:");
    for (gamma, t, ic) in [
        (0.35, 20.0, vec![1.0, 1.0, 1.0]),
        (0.35, 25.0, vec![1.0, 1.0, 1.0]),
        (0.35, 25.0, vec![-6.0, 8.0, 25.0]),
        (0.1, 25.0, vec![1.0, 1.0, 1.0]),
        (-0.35, 25.0, vec![1.0, 1.0, 1.0]),
        (0.35, 40.0, vec![1.0, 1.0, 1.0]),
        (0.35, 25.0, vec![2.0, -4.0, 30.0]),
        (0.35, 25.0, vec![10.0, -5.0, 20.0]),
        (0.35, 25.0, vec![-2.0, -9.0, 18.0]),
    ] {
        check(SystemKind::ComplexLorenz { sigma: 10.0, rho: 28.0, beta: 8.0/3.0, gamma }, ic, t, &[("x0","x1")]);
    }
}
