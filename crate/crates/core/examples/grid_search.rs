//! Choose the number of components and the precision structure by BIC.
//!
//! ```text
//! cargo run --release --example grid_search
//! ```

use medseq::ecm::Control;
use medseq::edm::ModelType;
use medseq::gating::GatingConfig;
use medseq::selection::grid_search;
use medseq::sim::{separated_thetas, simulate_cc};

fn main() -> medseq::error::Result<()> {
    let thetas = separated_thetas(3, 20, 4, 5);
    let sim = simulate_cc(300, &thetas, 2.0, &[1.0 / 3.0; 3], 4, 5)?;
    let control = Control {
        seed: 5,
        ..Control::default()
    };
    let g_values: Vec<usize> = (1..=6).collect();
    let result = grid_search(&sim.data, &ModelType::ALL, &g_values, &GatingConfig::free(), &control);

    println!("{:>2} {:>5} {:>12} {:>7}", "G", "model", "BIC", "params");
    for e in &result.entries {
        match (e.bic, e.n_params) {
            (Some(b), Some(k)) => println!("{:>2} {:>5} {:>12.2} {:>7}", e.g, e.model, b, k),
            _ => println!("{:>2} {:>5} failed: {}", e.g, e.model, e.error.as_deref().unwrap_or("")),
        }
    }
    let best = result.best.expect("at least one fit");
    println!("\nbest: {} with BIC {:.2}", best.spec.label(), best.bic);
    Ok(())
}
