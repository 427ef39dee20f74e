//! Dev probe: feature correlations on each preset's training window.
use autosindy::dynamics::{add_noise, middle_split, IntegratorConfig, SystemSpec};
use autosindy::expr::{parse, Expr};

fn main() {
    for name in ["harmonic", "pendulum", "modulated", "vanderpol", "duffing", "lorenz"] {
        let spec = SystemSpec::preset(name).unwrap();
        let clean = spec.simulate(&IntegratorConfig::default()).unwrap();
        let noisy = add_noise(&clean, 0.01, 32).unwrap();
        let (train, _) = middle_split(&noisy).unwrap();
        let pairs: Vec<(&str, &str)> = match name {
            "pendulum" => vec![("x0", "sin(x0)"), ("x0", "sin(1.3*x0)"), ("sin(x0)", "sin(1.3*x0)"), ("x0", "x0^3"), ("sin(x0)", "x0^3")],
            "modulated" => vec![("x1", "x1*cos(x0)"), ("x0", "sin(x0)")],
            "vanderpol" => vec![
                ("x1", "x0^2*x1"),
                ("x1*cos(x0)", "x1"),
                ("x1*cos(x0)", "x0^2*x1"),
                ("x1*cos(1.67*x0)", "x1*cos(x0)"),
                ("x1*cos(1.67*x0)", "x1"),
                ("x1*cos(1.67*x0)", "x0^2*x1"),
                ("x0^4*x1", "x0^2*x1"),
                ("x1*sin(0.01*x0)*sin(2.8*x0)", "x0^2*x1"),
                ("x1*sin(0.01*x0)*sin(2.8*x0)", "x1"),
                ("sin(x0+x1)", "x1"),
                ("x0*(x0*x1+0.99)", "x0^2*x1"),
            ],
            "duffing" => vec![("x0", "x0^3"), ("x0", "sin(x0)")],
            "lorenz" => vec![("x0", "x1"), ("x2", "x0*x1"), ("x1*sin(x0+x2)", "x1")],
            _ => vec![("x0", "sin(x0)"), ("x0", "x1")],
        };
        println!("== {name} (x0 range: {:.2}..{:.2})", 
            train.states.column(0).min(), train.states.column(0).max());
        for (a, b) in pairs {
            let ea = parse(a, spec.dim()).unwrap();
            let eb = parse(b, spec.dim()).unwrap();
            let va = ea.evaluate(&train.states).unwrap();
            let vb = eb.evaluate(&train.states).unwrap();
            println!("   corr({a}, {b}) = {:.4}", corr(&va, &vb));
        }
        let _ = Expr::zero();
    }
}

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
