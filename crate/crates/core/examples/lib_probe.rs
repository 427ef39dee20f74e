//! Dev probe: curated library content and inclusion probabilities.
use autosindy::bench::{run_trial, TrialKey};
use autosindy::metrics::Method;
use autosindy::pipeline::PipelineConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let system = args.get(1).map(|s| s.as_str()).unwrap_or("vanderpol");
    let sigma: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(33);
    let ridge: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.005);
    let divisor: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(40);
    let mut cfg = PipelineConfig::default();
    cfg.sindy.ridge = ridge;
    cfg.chunk_divisor = divisor;
    if args.get(6).map(|s| s.as_str()) == Some("vif") {
        cfg.curation.mode = autosindy::curation::PruningMode::Vif;
    }
    let key = TrialKey { system: system.into(), method: Method::AutoSindy, sigma, seed };
    let run = run_trial(&key, 5000, &cfg, 0).unwrap();
    let model = run.model.unwrap();
    println!("ridge={ridge} divisor={divisor} deriv_r2={:.5} sim={:?} complexity={}",
        run.result.validation_derivative.r2, run.result.simulation, run.result.canonical_complexity);
    for (j, (info, coef)) in model.libraries.iter().zip(&model.coefficients).enumerate() {
        println!("-- variable {j} library ({} terms):", info.basis.len());
        println!("   [bias] xi={:+.4} p={:.2}", coef.values[(0,0)], coef.inclusion[(0,0)]);
        for (i, b) in info.basis.iter().enumerate() {
            println!("   {b}  xi={:+.4} p={:.2}", coef.values[(i+1,0)], coef.inclusion[(i+1,0)]);
        }
    }
    for eq in &model.equations { println!("eq: {eq}"); }
}
