//! Positive-definite supports of every parameter in a structured matrix.
//!
//! `cargo run --example pd_interval`

use structcorr::pd_bounds::{barnard_interval, plans_for, pd_support};
use structcorr::sim::{stage_values, Stage};
use structcorr::structure::{assemble_correlation, CorrelationParams, StructureSpec};

fn main() -> structcorr::Result<()> {
    let spec = StructureSpec::new(4, 3)?;
    let (_, _, eta, rho, gamma) = stage_values(Stage::Early);
    let params = CorrelationParams::new(&spec, eta.to_vec(), rho.to_vec(), gamma)?;

    println!("{:<8} {:>7} {:>9} {:>9} {:>6} {:>4}", "param", "value", "lo", "hi", "plans", "dim");
    for p in spec.params() {
        let iv = pd_support(&spec, &params, p)?;
        let plans = plans_for(&spec, p)?;
        println!(
            "{:<8} {:>7.3} {:>9.4} {:>9.4} {:>6} {:>4}",
            p.to_string(),
            params.get(&spec, p),
            iv.lo,
            iv.hi,
            plans.len(),
            plans[0].dim()
        );
    }

    // A single cell of the full matrix, ignoring the ties.
    let corr = assemble_correlation(&spec, &params, spec.times())?;
    let iv = barnard_interval(&corr, 0, 1)?;
    println!("\nuntied cell (1,2) alone: ({:.4}, {:.4})", iv.lo, iv.hi);
    Ok(())
}
