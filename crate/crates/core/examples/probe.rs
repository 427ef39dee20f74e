//! Dev probe: run single trials end to end and print the key metrics.
use autosindy::bench::{run_trial, TrialKey};
use autosindy::metrics::Method;
use autosindy::pipeline::PipelineConfig;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let system = args.get(1).map(|s| s.as_str()).unwrap_or("harmonic");
    let sigma: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(32);
    let method = match args.get(4).map(|s| s.as_str()) {
        Some("sindy") => Method::StandardSindy,
        Some("pysr") => Method::StandardPysr,
        _ => Method::AutoSindy,
    };
    let key = TrialKey { system: system.into(), method, sigma, seed };
    let start = Instant::now();
    match run_trial(&key, 5000, &PipelineConfig::default(), 0) {
        Ok(run) => {
            let r = &run.result;
            println!("== {} {} sigma={} seed={} ({:.1}s wall)", r.system, r.method, r.sigma, r.seed, start.elapsed().as_secs_f64());
            for (j, eq) in r.equations.iter().enumerate() {
                println!("  eq{}: {}", j, eq);
            }
            println!("  deriv r2 (val): {:.6}  (test): {:.6}", r.validation_derivative.r2, r.test_derivative.r2);
            println!("  sim: {:?}", r.simulation);
            println!("  complexity: {}  recovery: {}  lib sizes: {:?}  bias-only: {:?}",
                r.canonical_complexity, r.recovery, r.library_sizes, r.bias_only_variables);
            println!("  timings: discovery {:.2}s curation {:.2}s fit {:.2}s sim {:.2}s",
                run.timing.discovery_s, run.timing.curation_s, run.timing.fit_s, run.timing.simulation_s);
        }
        Err(e) => println!("TRIAL ERROR: {e}"),
    }
}
