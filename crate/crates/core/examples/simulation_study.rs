//! Coverage, bias and RMSE of the weight intervals over simulated replicates.
//!
//! `cargo run --release --example simulation_study -- [replicates]`

use structcorr::sampler::SamplerConfig;
use structcorr::sim::{run_study, Distribution, Stage, TruthSpec};

fn main() -> structcorr::Result<()> {
    let replicates: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let config = SamplerConfig { iterations: 3000, burn_in: 500, chains: 2, ..SamplerConfig::default() };
    for dist in [Distribution::Normal, Distribution::SKEW_NORMAL] {
        let truth = TruthSpec::preset(Stage::Late, dist, 50, 3)?;
        let study = run_study(&truth, None, replicates, &config, 11)?;
        println!("{dist}, {replicates} replicates");
        println!("  {:<8} {:>7} {:>9} {:>8} {:>7}", "quantity", "truth", "coverage", "bias", "rmse");
        for r in &study.report.rows {
            println!(
                "  {:<8} {:>7.3} {:>9.2} {:>8.3} {:>7.3}",
                r.quantity, r.truth, r.coverage, r.bias, r.rmse
            );
        }
        let pd: Vec<String> = study
            .rates
            .iter()
            .filter_map(|r| r.pd_rate.map(|p| format!("{}={p:.2}", r.parameter)))
            .collect();
        println!("  PD rates: {}\n", pd.join(" "));
    }
    Ok(())
}
