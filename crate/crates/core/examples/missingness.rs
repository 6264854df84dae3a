//! The missingness mechanism: per-outcome and per-row frequencies against their targets.
//!
//! `cargo run --example missingness`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use structcorr::sim::{apply_missingness, generate_dataset, Distribution, MissingnessSpec, Stage, TruthSpec};

fn main() -> structcorr::Result<()> {
    let truth = TruthSpec::preset(Stage::Early, Distribution::Normal, 2000, 4)?;
    let spec = MissingnessSpec::default_four();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data = apply_missingness(&generate_dataset(&truth, &mut rng)?, &spec, &mut rng)?;

    let mut by_count = [0usize; 4];
    let mut by_outcome = [0usize; 4];
    let mut rows = 0;
    for s in &data.subjects {
        for j in 0..s.n_times() {
            let missing: Vec<usize> = (0..4).filter(|&o| s.get(j, o).is_none()).collect();
            by_count[missing.len()] += 1;
            missing.iter().for_each(|&o| by_outcome[o] += 1);
            rows += 1;
        }
    }
    let target = spec.count_probs();
    println!("missing per row   observed  target");
    for k in 0..4 {
        println!("{k:>15}   {:>8.3}  {:>6.3}", by_count[k] as f64 / rows as f64, target[k]);
    }
    println!("\nshare of missing cells by outcome");
    let total: usize = by_outcome.iter().sum();
    for (name, c) in truth.outcome_names.iter().zip(by_outcome) {
        println!("{name:>15}   {:>8.3}", c as f64 / total as f64);
    }
    Ok(())
}
