//! Hamming kernels and the closed-form normalising constants of the
//! exponential-distance model.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{MedseqError, Result};
use crate::seqdata::SequenceDataset;

/// Number of positions at which `a` and `b` differ.
pub fn hamming(a: &[u8], b: &[u8]) -> Result<u32> {
    if a.len() != b.len() {
        return Err(MedseqError::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(hamming_unchecked(a, b))
}

#[inline]
pub(crate) fn hamming_unchecked(a: &[u8], b: &[u8]) -> u32 {
    a.iter().zip(b).filter(|(x, y)| x != y).count() as u32
}

/// Sum of `lambda[t]` over the positions where `s` and `theta` differ.
pub fn weighted_hamming(s: &[u8], theta: &[u8], lambda: &[f64]) -> Result<f64> {
    if s.len() != theta.len() {
        return Err(MedseqError::LengthMismatch {
            expected: s.len(),
            found: theta.len(),
        });
    }
    if lambda.len() != s.len() {
        return Err(MedseqError::LengthMismatch {
            expected: s.len(),
            found: lambda.len(),
        });
    }
    check_lambdas(lambda)?;
    Ok(s.iter()
        .zip(theta)
        .zip(lambda)
        .filter(|((a, b), _)| a != b)
        .map(|(_, l)| l)
        .sum())
}

fn check_lambdas(lambda: &[f64]) -> Result<()> {
    match lambda.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        Some(l) => Err(MedseqError::InvalidInput(format!(
            "precision {l} must be finite and nonnegative"
        ))),
        None => Ok(()),
    }
}

/// Dense symmetric matrix of pairwise Hamming distances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<u32>,
}

impl DistanceMatrix {
    pub fn from_dataset(ds: &SequenceDataset) -> Self {
        pairwise_matrix(ds)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Number of rows not at distance zero from an earlier row.
    pub fn distinct_rows(&self) -> usize {
        (0..self.n)
            .filter(|&i| (0..i).all(|j| self.get(i, j) != 0))
            .count()
    }

    /// Writes the matrix as CSV with the given row/column labels.
    pub fn write_csv(&self, path: impl AsRef<Path>, labels: &[String]) -> Result<()> {
        let path = path.as_ref();
        let mut f = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| MedseqError::io(path, e))?,
        );
        let io = |e| MedseqError::io(path, e);
        writeln!(f, ",{}", labels.join(",")).map_err(io)?;
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(u32::to_string).collect();
            writeln!(f, "{},{}", labels[i], row.join(",")).map_err(io)?;
        }
        f.flush().map_err(io)
    }
}

/// All pairwise Hamming distances between the rows of `ds`.
pub fn pairwise_matrix(ds: &SequenceDataset) -> DistanceMatrix {
    let n = ds.n();
    let data: Vec<u32> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let a = ds.seq(i);
            (0..n).map(move |j| hamming_unchecked(a, ds.seq(j)))
        })
        .collect();
    DistanceMatrix { n, data }
}

/// `log((v - 1) e^{-lambda} + 1)`, the per-position log normaliser.
#[inline]
pub fn log_psi_term(lambda: f64, v: usize) -> f64 {
    ((v - 1) as f64 * (-lambda).exp()).ln_1p()
}

fn check_tv(t: usize, v: usize) -> Result<()> {
    if t < 1 {
        return Err(MedseqError::InvalidInput("T must be at least 1".into()));
    }
    if v < 2 {
        return Err(MedseqError::InvalidInput("v must be at least 2".into()));
    }
    Ok(())
}

/// Log normalising constant under the Hamming distance:
/// `T log((v - 1) e^{-lambda} + 1)`.
pub fn log_psi_hamming(lambda: f64, t: usize, v: usize) -> Result<f64> {
    check_tv(t, v)?;
    check_lambdas(&[lambda])?;
    Ok(t as f64 * log_psi_term(lambda, v))
}

/// Log normalising constant under the weighted Hamming distance.
pub fn log_psi_weighted(lambda: &[f64], v: usize) -> Result<f64> {
    check_tv(lambda.len(), v)?;
    check_lambdas(lambda)?;
    Ok(lambda.iter().map(|&l| log_psi_term(l, v)).sum())
}

/// Upper bound on `v^T` accepted by [`enumerate_log_psi`].
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Brute-force log normalising constant: log-sum-exp of `-d_WH(sigma, theta)`
/// over every sequence `sigma` of length `T` on `v` states.
pub fn enumerate_log_psi(lambda: &[f64], v: usize, theta: &[u8]) -> Result<f64> {
    let t = lambda.len();
    check_tv(t, v)?;
    check_lambdas(lambda)?;
    if theta.len() != t {
        return Err(MedseqError::LengthMismatch {
            expected: t,
            found: theta.len(),
        });
    }
    let total = (v as u64)
        .checked_pow(t as u32)
        .filter(|&c| c <= ENUMERATION_LIMIT)
        .ok_or_else(|| {
            MedseqError::TooLarge(format!("{v}^{t} sequences exceed the enumeration limit"))
        })?;
    let mut sigma = vec![0u8; t];
    let mut exponents = Vec::with_capacity(total as usize);
    for _ in 0..total {
        let d: f64 = sigma
            .iter()
            .zip(theta)
            .zip(lambda)
            .filter(|((a, b), _)| a != b)
            .map(|(_, l)| l)
            .sum();
        exponents.push(-d);
        // odometer increment
        for s in sigma.iter_mut() {
            *s += 1;
            if (*s as usize) < v {
                break;
            }
            *s = 0;
        }
    }
    Ok(crate::util::log_sum_exp(&exponents))
}
