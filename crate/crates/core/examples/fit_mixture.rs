//! Fit a three-component mixture to simulated sequences and inspect the
//! estimates.
//!
//! ```text
//! cargo run --release --example fit_mixture
//! ```

use medseq::ecm::{fit, ModelSpec};
use medseq::edm::ModelType;
use medseq::seqdata::sps_encode;
use medseq::sim::{separated_thetas, simulate_cc};
use medseq::util::adjusted_rand_index;

fn main() -> medseq::error::Result<()> {
    let thetas = separated_thetas(3, 20, 4, 11);
    let sim = simulate_cc(300, &thetas, 2.0, &[0.5, 0.3, 0.2], 4, 11)?;
    let ds = &sim.data;

    let spec = ModelSpec::new(ModelType::CC, 3).with_seed(1);
    let fitted = fit(ds, &spec)?;

    println!("{}", spec.label());
    println!(
        "loglik {:.3}, {} parameters, BIC {:.3}, {} iterations (converged: {})",
        fitted.loglik, fitted.n_params, fitted.bic, fitted.iterations, fitted.converged
    );
    println!("precision {:?}", fitted.components.precision.values());
    println!("mixing proportions {:?}", fitted.tau(ds)?.row(0).to_vec());
    for (g, theta) in fitted.components.theta.iter().enumerate() {
        println!("theta[{}] {}", g + 1, sps_encode(theta, ds.alphabet()));
    }
    for (g, theta) in sim.thetas.iter().enumerate() {
        println!("truth[{}] {}", g + 1, sps_encode(theta, ds.alphabet()));
    }
    println!("ARI against the generating labels: {:.4}", adjusted_rand_index(&fitted.map, &sim.labels));
    if let Some(s) = fitted.wdbs {
        println!("weighted density-based silhouette {s:.4}");
    }

    // The pseudo log-likelihood never decreases across iterations.
    let trace = &fitted.loglik_trace;
    assert!(trace.windows(2).all(|w| w[1] >= w[0] - 1e-8));
    Ok(())
}
