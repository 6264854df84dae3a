//! SRM-optimal nonnegative weights for each disease stage, with all four outcomes
//! and with the first two only.
//!
//! `cargo run --example optimal_weights`

use structcorr::construct::{individual_srms, optimal_weights, srm, CrossSectionMoments, WeightVector};
use structcorr::sim::{stage_values, Stage, STAGE_OUTCOMES};

fn report(label: &str, m: &CrossSectionMoments) -> structcorr::Result<()> {
    let (w, best) = optimal_weights(m)?;
    let equal = srm(&WeightVector::equal(m.outcomes()), m)?;
    let weights: Vec<String> = w.as_slice().iter().map(|x| format!("{x:.3}")).collect();
    println!("{label:<14} w = ({})  SRM opt {best:.3}  equal {equal:.3}", weights.join(", "));
    Ok(())
}

fn main() -> structcorr::Result<()> {
    println!("outcomes: {}", STAGE_OUTCOMES.join(", "));
    for stage in [Stage::Early, Stage::Late, Stage::Non] {
        let (mu, sd, eta, _, _) = stage_values(stage);
        let m = CrossSectionMoments::from_parts(&mu, &sd, &eta)?;
        let ind: Vec<String> = individual_srms(&m).iter().map(|x| format!("{x:.3}")).collect();
        println!("\n{stage:?}: individual SRMs ({})", ind.join(", "));
        report("  all four", &m)?;
        report("  first two", &m.select(&[0, 1])?)?;
    }
    Ok(())
}
