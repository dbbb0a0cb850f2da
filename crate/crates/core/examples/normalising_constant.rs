//! The closed-form normalising constant against brute-force enumeration,
//! and the density it normalises.
//!
//! ```text
//! cargo run --example normalising_constant
//! ```

use medseq::distance::{enumerate_log_psi, log_psi_hamming, log_psi_weighted, weighted_hamming};
use medseq::edm::edm_log_density;

fn main() -> medseq::error::Result<()> {
    let (t, v) = (4, 3);
    for lambda in [0.0, 0.5, 2.0, 10.0] {
        let closed = log_psi_hamming(lambda, t, v)?;
        let brute = enumerate_log_psi(&vec![lambda; t], v, &[0, 1, 2, 0])?;
        println!("lambda {lambda:>4}: closed {closed:.12}  enumerated {brute:.12}");
    }

    let lambda = [0.3, 1.0, 2.5, 0.0];
    println!(
        "per-time precisions: closed {:.12}  enumerated {:.12}",
        log_psi_weighted(&lambda, v)?,
        enumerate_log_psi(&lambda, v, &[2, 2, 1, 0])?
    );

    let theta = [0u8, 1, 2, 0];
    let s = [0u8, 2, 2, 1];
    println!(
        "weighted distance {:.2}, log density {:.6}",
        weighted_hamming(&s, &theta, &lambda)?,
        edm_log_density(&s, &theta, &lambda, v)?
    );
    Ok(())
}
