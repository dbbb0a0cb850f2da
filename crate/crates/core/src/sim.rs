//! Synthetic data from known mixtures, for tests, examples and simulation
//! studies.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{MedseqError, Result};
use crate::gating::log_softmax;
use crate::seqdata::{Alphabet, CovariateValues, Covariates, SequenceDataset};
use crate::util::log_sum_exp;

/// Draws one sequence from an exponential-distance model: position `t`
/// equals `theta[t]` with probability `1 / (1 + (v-1) e^{-lambda_t})` and is
/// otherwise uniform over the remaining states.
pub fn sample_edm<R: Rng>(theta: &[u8], lambda: &[f64], v: usize, rng: &mut R) -> Vec<u8> {
    theta
        .iter()
        .zip(lambda)
        .map(|(&c, &l)| {
            let keep = 1.0 / (1.0 + (v - 1) as f64 * (-l).exp());
            if rng.random::<f64>() < keep {
                c
            } else {
                let other = rng.random_range(0..v - 1) as u8;
                if other >= c {
                    other + 1
                } else {
                    other
                }
            }
        })
        .collect()
}

/// `g` central sequences of length `t`, each two constant runs; when
/// `g <= v` every pair differs at every position.
pub fn separated_thetas(g: usize, t: usize, v: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shift: Vec<usize> = (0..v).collect();
    shift.shuffle(&mut rng);
    (0..g)
        .map(|gi| {
            (0..t)
                .map(|tt| ((shift[gi % v] + tt * 2 / t.max(1)) % v) as u8)
                .collect()
        })
        .collect()
}

fn alphabet(v: usize) -> Result<Alphabet> {
    if !(2..=26).contains(&v) {
        return Err(MedseqError::InvalidInput("simulation supports 2..=26 states".into()));
    }
    Alphabet::new((0..v).map(|i| ((b'A' + i as u8) as char).to_string()))
}

/// Simulated data with the generating labels.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: SequenceDataset,
    pub labels: Vec<usize>,
    pub thetas: Vec<Vec<u8>>,
}

/// `n` sequences from a CC mixture with proportions `tau` and common
/// precision `lambda`.
pub fn simulate_cc(
    n: usize,
    thetas: &[Vec<u8>],
    lambda: f64,
    tau: &[f64],
    v: usize,
    seed: u64,
) -> Result<Simulated> {
    if thetas.len() != tau.len() {
        return Err(MedseqError::LengthMismatch {
            expected: thetas.len(),
            found: tau.len(),
        });
    }
    let t = thetas[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambdas = vec![lambda; t];
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let g = pick(&mut rng, tau);
        rows.push(sample_edm(&thetas[g], &lambdas, v, &mut rng));
        labels.push(g);
    }
    Ok(Simulated {
        data: SequenceDataset::new(alphabet(v)?, rows, None, None)?,
        labels,
        thetas: thetas.to_vec(),
    })
}

/// CC mixture whose memberships follow a softmax in covariates. Covariates
/// named `x1..xr` are standard normal except `noise_covariates` extra
/// columns `z1..` that do not affect membership. `beta` is `(r+1) × G` with
/// column 0 zero.
pub fn simulate_gated(
    n: usize,
    thetas: &[Vec<u8>],
    lambda: f64,
    beta: &Array2<f64>,
    noise_covariates: usize,
    v: usize,
    seed: u64,
) -> Result<Simulated> {
    let g = thetas.len();
    if beta.ncols() != g {
        return Err(MedseqError::LengthMismatch {
            expected: g,
            found: beta.ncols(),
        });
    }
    let r = beta.nrows() - 1;
    let t = thetas[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::ones((n, r + 1));
    for i in 0..n {
        for j in 1..=r {
            x[[i, j]] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let lp = log_softmax(x.view(), beta.view());
    let lambdas = vec![lambda; t];
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let probs: Vec<f64> = lp.row(i).iter().map(|l| l.exp()).collect();
        let comp = pick(&mut rng, &probs);
        rows.push(sample_edm(&thetas[comp], &lambdas, v, &mut rng));
        labels.push(comp);
    }
    let mut raw: Vec<(String, CovariateValues)> = (1..=r)
        .map(|j| (format!("x{j}"), CovariateValues::Numeric(x.column(j).to_vec())))
        .collect();
    for j in 1..=noise_covariates {
        let vals = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        raw.push((format!("z{j}"), CovariateValues::Numeric(vals)));
    }
    let covariates = Covariates::encode(n, raw)?;
    Ok(Simulated {
        data: SequenceDataset::new(alphabet(v)?, rows, None, Some(covariates))?,
        labels,
        thetas: thetas.to_vec(),
    })
}

fn pick<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (g, &p) in probs.iter().enumerate() {
        if u < p {
            return g;
        }
        u -= p;
    }
    probs.len() - 1
}

/// Exact log-probability of `s` under the generating model; used to check
/// [`sample_edm`] against the density.
pub fn mixture_log_density(s: &[u8], thetas: &[Vec<u8>], lambda: f64, tau: &[f64], v: usize) -> f64 {
    let t = s.len();
    let terms: Vec<f64> = thetas
        .iter()
        .zip(tau)
        .map(|(theta, &p)| {
            let d = s.iter().zip(theta).filter(|(a, b)| a != b).count() as f64;
            p.ln() - lambda * d - t as f64 * ((v - 1) as f64 * (-lambda).exp()).ln_1p()
        })
        .collect();
    log_sum_exp(&terms)
}
