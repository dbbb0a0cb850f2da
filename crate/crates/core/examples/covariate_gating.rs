//! Let covariates drive cluster membership, compare with the two-step
//! approach, and run a stepwise search over a covariate pool.
//!
//! ```text
//! cargo run --release --example covariate_gating
//! ```

use medseq::ecm::{fit, ModelSpec};
use medseq::edm::ModelType;
use medseq::gating::{two_step_regress, GatingConfig, NoiseGating, TwoStepKind};
use medseq::selection::stepwise;
use medseq::sim::{separated_thetas, simulate_gated};
use ndarray::array;

fn main() -> medseq::error::Result<()> {
    // Column 0 is the reference component; x1 drives membership and z1 is noise.
    let beta = array![[0.0, 0.3, -0.2], [0.0, 1.5, -1.5]];
    let thetas = separated_thetas(3, 15, 4, 3);
    let sim = simulate_gated(400, &thetas, 1.5, &beta, 1, 4, 3)?;
    let ds = &sim.data;

    let spec = ModelSpec::new(ModelType::CC, 3)
        .with_gating(GatingConfig::covariates(["x1"], NoiseGating::NGN))
        .with_seed(3);
    let joint = fit(ds, &spec)?;
    println!("{}: BIC {:.2}", spec.label(), joint.bic);
    println!("gating coefficients (rows {:?}):\n{:.3}", joint.design_names, joint.gating.beta().unwrap());

    // Regressing the finished partition on x1 instead of estimating jointly.
    let (x, _) = ds.design(&["x1".to_string()])?;
    let plain = fit(ds, &ModelSpec::new(ModelType::CC, 3).with_seed(3))?;
    let two_step = two_step_regress(plain.z.view(), false, ds.weights(), x.view(), TwoStepKind::Soft, 0.0)?;
    println!("two-step coefficients:\n{two_step:.3}");

    // Start from a model without covariates and let BIC decide.
    let start = ModelSpec::new(ModelType::CC, 3).with_seed(3);
    let pool = vec!["x1".to_string(), "z1".to_string()];
    let trace = stepwise(ds, &pool, &start)?;
    for s in &trace.steps {
        println!(
            "{:>2} {:<18} {} G={} {:?} BIC {:.2}{}",
            s.step,
            s.action,
            s.model,
            s.g,
            s.covariates,
            s.bic,
            if s.accepted { "" } else { " (rejected)" }
        );
    }
    Ok(())
}
