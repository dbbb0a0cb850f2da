//! Ward clustering refined by weighted PAM, as used to start every fit, and
//! the classification-EM special case that reproduces PAM.
//!
//! ```text
//! cargo run --example medoid_initialisation
//! ```

use medseq::distance::pairwise_matrix;
use medseq::ecm::{init_partition, medoid_cem, weighted_pam, WardTree};
use medseq::sim::{separated_thetas, simulate_cc};

fn main() -> medseq::error::Result<()> {
    let thetas = separated_thetas(3, 10, 3, 2);
    let sim = simulate_cc(40, &thetas, 1.2, &[0.4, 0.4, 0.2], 3, 2)?;
    let ds = sim.data.with_weights((0..40).map(|i| 0.5 + (i % 4) as f64 * 0.5).collect())?;
    let d = pairwise_matrix(&ds);

    let ward = WardTree::build(&d, ds.weights())?.cut(3)?;
    println!("Ward cut      {ward:?}");
    let pam = weighted_pam(&d, ds.weights(), &ward, 3);
    println!("weighted PAM  {:?} (cost {:.2}, medoids {:?})", pam.labels, pam.cost, pam.medoids);
    assert_eq!(pam.labels, init_partition(&d, ds.weights(), 3)?);

    // Precisions fixed at one, equal proportions and medoid centres:
    // the hard-assignment EM lands on the PAM partition.
    let cem = medoid_cem(&d, ds.weights(), &pam.labels, 3, 100);
    println!("medoid CEM    {cem:?}");
    assert_eq!(cem, pam.labels);
    Ok(())
}
