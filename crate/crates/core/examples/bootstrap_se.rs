//! Weighted likelihood bootstrap standard errors for gating coefficients.
//!
//! ```text
//! cargo run --release --example bootstrap_se
//! ```

use medseq::ecm::{fit, ModelSpec};
use medseq::edm::ModelType;
use medseq::gating::{GatingConfig, NoiseGating};
use medseq::sim::{separated_thetas, simulate_gated};
use medseq::wlbs::wlbs_se;
use ndarray::array;

fn main() -> medseq::error::Result<()> {
    let beta = array![[0.0, -0.5], [0.0, 2.0]];
    let thetas = separated_thetas(2, 12, 3, 8);
    let sim = simulate_gated(250, &thetas, 1.0, &beta, 0, 3, 8)?;
    let spec = ModelSpec::new(ModelType::CU, 2)
        .with_gating(GatingConfig::covariates(["x1"], NoiseGating::NGN))
        .with_seed(8);
    let fitted = fit(&sim.data, &spec)?;

    let boot = wlbs_se(&fitted, &sim.data, 50, 8)?;
    println!("{} replicates, {} failed", boot.replicates, boot.failed.len());
    for (j, name) in fitted.design_names.iter().enumerate() {
        println!(
            "{name:<12} estimate {:>8.3}  se {:>6.3}  (true {:>5.2})",
            boot.estimate[[j, 1]],
            boot.se[[j, 1]],
            beta[[j, 1]]
        );
    }
    Ok(())
}
