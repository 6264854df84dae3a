//! Posterior weight draws as points in the unit tetrahedron, written to CSV.
//!
//! `cargo run --release --example barycentric -- [out.csv]`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use structcorr::construct::{export_barycentric, posterior_weights};
use structcorr::io::{write_barycentric, write_to};
use structcorr::sampler::{run_chains, SamplerConfig};
use structcorr::sim::{generate_dataset, Distribution, Stage, TruthSpec};

fn main() -> structcorr::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "barycentric.csv".into());
    let truth = TruthSpec::preset(Stage::Non, Distribution::Normal, 60, 3)?;
    let data = generate_dataset(&truth, &mut ChaCha8Rng::seed_from_u64(8))?;
    let config = SamplerConfig { iterations: 3000, burn_in: 500, chains: 2, ..SamplerConfig::default() };
    let summary = posterior_weights(&run_chains(&data, &config)?)?;

    let points = export_barycentric(&summary.draw_weights)?;
    write_to(std::path::Path::new(&out), |f| write_barycentric(&points, f))?;

    let centroid = points.iter().fold([0.0; 3], |mut acc, p| {
        for k in 0..3 {
            acc[k] += p[k] / points.len() as f64;
        }
        acc
    });
    println!("{} points written to {out}", points.len());
    println!("centroid ({:.3}, {:.3}, {:.3})", centroid[0], centroid[1], centroid[2]);
    Ok(())
}
