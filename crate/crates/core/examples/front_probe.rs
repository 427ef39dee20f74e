//! Dev probe: raw Pareto fronts of chunk runs on one system/variable.
use autosindy::deriv::estimate_derivatives;
use autosindy::dynamics::{add_noise, middle_split_indices, IntegratorConfig, SystemSpec, Trajectory};
use autosindy::pipeline::sample_chunks;
use autosindy::symreg::{evolve, GPConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let system = args.get(1).map(|s| s.as_str()).unwrap_or("lorenz");
    let var: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spec = SystemSpec::preset(system).unwrap();
    let clean = spec.simulate(&IntegratorConfig::default()).unwrap();
    let noisy = add_noise(&clean, 0.01, 32).unwrap();
    let derivs = estimate_derivatives(&noisy, &Default::default()).unwrap();
    let (train_idx, _) = middle_split_indices(noisy.len()).unwrap();
    let train_states = noisy.states.select_rows(train_idx.iter());
    let train_derivs = derivs.select_rows(train_idx.iter());
    let chunks = sample_chunks(train_states.nrows(), 3, 40, 1234).unwrap();
    for (k, chunk) in chunks.iter().enumerate() {
        let states = train_states.select_rows(chunk.iter());
        let target: Vec<f64> = chunk.iter().map(|&i| train_derivs[(i, var)]).collect();
        let mean = target.iter().sum::<f64>() / target.len() as f64;
        let std = (target.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / target.len() as f64).sqrt();
        let target: Vec<f64> = target.iter().map(|t| (t - mean) / std).collect();
        let cfg = GPConfig { seed: 100 + k as u64, ..GPConfig::default() };
        let front = evolve(&states, &target, &cfg).unwrap();
        println!("chunk {k} front:");
        for (c, e, loss) in front.iter() {
            println!("  c={c:<3} loss={loss:<12.6e} {e}");
        }
    }
}
