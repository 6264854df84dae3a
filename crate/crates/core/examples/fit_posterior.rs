//! Simulate an incomplete longitudinal dataset and sample its posterior.
//!
//! `cargo run --release --example fit_posterior`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use structcorr::sampler::{posterior_medians, run_chains, SamplerConfig};
use structcorr::sim::{apply_missingness, generate_dataset, Distribution, MissingnessSpec, Stage, TruthSpec};

fn main() -> structcorr::Result<()> {
    let truth = TruthSpec::preset(Stage::Late, Distribution::Normal, 80, 3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let data = generate_dataset(&truth, &mut rng)?;
    let data = apply_missingness(&data, &MissingnessSpec::default_four(), &mut rng)?;

    let config = SamplerConfig { iterations: 4000, burn_in: 1000, ..SamplerConfig::default() };
    let chains = run_chains(&data, &config)?;
    let medians = posterior_medians(&chains)?;

    let spec = truth.spec()?;
    let mut true_row: Vec<f64> = truth.moments.mu.clone();
    true_row.extend(&truth.moments.sd);
    true_row.extend(truth.correlations.to_vec(&spec));

    println!("{:<9} {:>8} {:>8}", "param", "truth", "median");
    for ((name, t), m) in chains[0].names.iter().zip(&true_row).zip(&medians) {
        println!("{name:<9} {t:>8.3} {m:>8.3}");
    }
    let acc = chains.iter().map(|c| c.corr_acceptance.iter().sum::<f64>()).sum::<f64>()
        / (chains.len() * spec.n_params()) as f64;
    println!("\nmean correlation acceptance {acc:.3} over {} chains", chains.len());
    Ok(())
}
