//! School-to-work transitions of 712 Northern Irish school leavers: the
//! covariate model UUN, G=11 with GCSE5eq driving the non-noise clusters.
//!
//! ```text
//! cargo run --release --example mvad
//! ```

use medseq::distance::pairwise_matrix;
use medseq::ecm::{fit, ModelSpec};
use medseq::edm::ModelType;
use medseq::gating::{GatingConfig, NoiseGating};
use medseq::selection::wasw;
use medseq::seqdata::{parse_csv, CsvSchema, SequenceColumns};

fn main() -> medseq::error::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/mvad.csv");
    let mut schema = CsvSchema::new(SequenceColumns::Range {
        first: "Jul.93".into(),
        last: "Jun.99".into(),
    });
    schema.id = Some("id".into());
    schema.weight = Some("weight".into());
    schema.covariates = vec!["GCSE5eq".into()];
    // The first two months are dropped, leaving T = 70.
    let raw = parse_csv(path, &schema)?.trim_time_range(2, 71)?;
    let (ds, map) = raw.aggregate_duplicates(true);
    println!("{} leavers, {} distinct (sequence, GCSE5eq) rows, T = {}", raw.n(), ds.n(), ds.t());

    let spec = ModelSpec::new(ModelType::UUN, 11)
        .with_gating(GatingConfig::covariates(["GCSE5eq"], NoiseGating::NGN))
        .with_seed(1);
    let fitted = fit(&ds, &spec)?;
    let labels = map.expand(&fitted.map);
    let silhouette = wasw(&pairwise_matrix(&raw), &labels, raw.weights())?;

    println!("{}", spec.label());
    println!("BIC {:.2} with {} parameters", fitted.bic, fitted.n_params);
    println!("wDBS {:.3}, wASW {:.3}", fitted.wdbs.unwrap_or(f64::NAN), silhouette);
    for (g, theta) in fitted.components.theta.iter().enumerate() {
        println!("cluster {:>2}: {}", g + 1, medseq::seqdata::sps_encode(theta, ds.alphabet()));
    }
    Ok(())
}
