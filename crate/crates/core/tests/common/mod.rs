//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use medseq::seqdata::{Alphabet, CovariateValues, Covariates, SequenceDataset};
use medseq::sim::sample_edm;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn alphabet(v: usize) -> Alphabet {
    Alphabet::new((0..v).map(|i| format!("s{i}"))).unwrap()
}

/// Every sequence in `{0..v}^t`, in lexicographic order.
pub fn all_sequences(t: usize, v: usize) -> Vec<Vec<u8>> {
    let total = v.pow(t as u32);
    (0..total)
        .map(|mut code| {
            let mut s = vec![0u8; t];
            for slot in s.iter_mut().rev() {
                *slot = (code % v) as u8;
                code /= v;
            }
            s
        })
        .collect()
}

pub fn random_weights(n: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| r.random_range(0.2..3.0)).collect()
}

/// Rows drawn around `k` random centres; returns rows and generating labels.
pub fn clustered_rows(n: usize, t: usize, v: usize, k: usize, lambda: f64, r: &mut ChaCha8Rng) -> (Vec<Vec<u8>>, Vec<usize>) {
    let centres: Vec<Vec<u8>> = (0..k)
        .map(|_| (0..t).map(|_| r.random_range(0..v) as u8).collect())
        .collect();
    let lambdas = vec![lambda; t];
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        rows.push(sample_edm(&centres[c], &lambdas, v, r));
        labels.push(c);
    }
    (rows, labels)
}

/// Clustered data with one continuous covariate `x` and one binary `b`.
pub fn battery_dataset(n: usize, t: usize, v: usize, weighted: bool, seed: u64) -> SequenceDataset {
    let mut r = rng(seed);
    let (rows, labels) = clustered_rows(n, t, v, 3, 1.5, &mut r);
    let x: Vec<f64> = labels
        .iter()
        .map(|&l| l as f64 - 1.0 + r.random_range(-1.5..1.5))
        .collect();
    let b: Vec<f64> = (0..n).map(|_| f64::from(r.random_bool(0.5) as u8)).collect();
    let covariates = Covariates::encode(
        n,
        vec![
            ("x".into(), CovariateValues::Numeric(x)),
            ("b".into(), CovariateValues::Numeric(b)),
        ],
    )
    .unwrap();
    let weights = weighted.then(|| random_weights(n, &mut r));
    SequenceDataset::new(alphabet(v), rows, weights, Some(covariates)).unwrap()
}

/// Short sequences with many exact duplicates and a binary covariate drawn
/// once per distinct sequence, so duplicates share it but it carries no
/// cluster information (separable gating would leave coefficients
/// unidentified).
pub fn duplicated_dataset(n: usize, seed: u64) -> SequenceDataset {
    let mut r = rng(seed);
    let (rows, _) = clustered_rows(n, 5, 3, 3, 1.5, &mut r);
    let mut level = std::collections::HashMap::new();
    let b: Vec<f64> = rows
        .iter()
        .map(|s| *level.entry(s.clone()).or_insert_with(|| f64::from(r.random_bool(0.5) as u8)))
        .collect();
    let covariates = Covariates::encode(n, vec![("b".into(), CovariateValues::Numeric(b))]).unwrap();
    let weights = random_weights(n, &mut r);
    SequenceDataset::new(alphabet(3), rows, Some(weights), Some(covariates)).unwrap()
}

/// Writes `ds` as CSV with columns id, w, covariate names, t1..tT.
pub fn write_csv(path: &std::path::Path, ds: &SequenceDataset, raw_covariates: &[(&str, Vec<String>)]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    let mut header = vec!["id".to_string(), "w".to_string()];
    header.extend(raw_covariates.iter().map(|(n, _)| n.to_string()));
    header.extend((1..=ds.t()).map(|t| format!("t{t}")));
    w.write_record(&header).unwrap();
    for i in 0..ds.n() {
        let mut rec = vec![ds.ids()[i].clone(), ds.raw_weights()[i].to_string()];
        rec.extend(raw_covariates.iter().map(|(_, v)| v[i].clone()));
        rec.extend(ds.alphabet().decode(ds.seq(i)));
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
}
