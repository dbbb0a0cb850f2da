//! Weighted likelihood bootstrap standard errors for gating parameters.
//!
//! Each replicate multiplies the sampling weights by `n u` with `u` drawn
//! from a flat Dirichlet (normalised standard exponentials) and refits the
//! same model started from the original responsibilities. Under stratified
//! designs the resulting standard errors are approximate.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::ecm::{fit_with_init, FittedModel};
use crate::error::{MedseqError, Result};
use crate::gating::GatingParams;
use crate::seqdata::{AggregationMap, SequenceDataset};

/// Gating parameters as a table: `beta` (`p × K`) under covariate gating,
/// otherwise the mixing proportions as a single row.
pub fn gating_table(gating: &GatingParams) -> Array2<f64> {
    match gating {
        GatingParams::Logistic { beta, .. } => beta.clone(),
        GatingParams::Fixed { tau } => Array2::from_shape_vec((1, tau.len()), tau.clone())
            .expect("one row of tau"),
    }
}

/// `n u` for `u ~ Dirichlet(1, ..., 1)`; replicate `b` has its own
/// generator stream so draws do not depend on execution order.
pub fn dirichlet_scale(n: usize, seed: u64, b: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b);
    let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = e.iter().sum();
    e.iter().map(|x| n as f64 * x / total).collect()
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BootstrapResult {
    pub replicates: usize,
    /// Point estimates from the original fit.
    pub estimate: Array2<f64>,
    /// Gating tables from successful replicates, in replicate order.
    pub draws: Vec<Array2<f64>>,
    /// Element-wise sample standard deviations over `draws`.
    pub se: Array2<f64>,
    pub failed: Vec<usize>,
}

/// WLBS over the rows of `ds` (the dataset `fit` was estimated on).
pub fn wlbs_se(fit: &FittedModel, ds: &SequenceDataset, replicates: usize, seed: u64) -> Result<BootstrapResult> {
    let n = ds.n();
    run(fit, ds, replicates, |b| {
        let scale = dirichlet_scale(n, seed, b as u64);
        ds.weights().iter().zip(&scale).map(|(w, s)| w * s).collect()
    })
}

/// WLBS when `fit` was estimated on aggregated rows: the Dirichlet draw is
/// over the original units (with normalised weights `unit_weights`), and
/// perturbed unit weights are summed into their unique rows.
pub fn wlbs_se_aggregated(
    fit: &FittedModel,
    aggregated: &SequenceDataset,
    unit_weights: &[f64],
    map: &AggregationMap,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    let units = unit_weights.len();
    if map.unique_index_of.len() != units {
        return Err(MedseqError::LengthMismatch {
            expected: map.unique_index_of.len(),
            found: units,
        });
    }
    let m = aggregated.n();
    run(fit, aggregated, replicates, |b| {
        let scale = dirichlet_scale(units, seed, b as u64);
        let mut w = vec![0.0; m];
        for (i, &u) in map.unique_index_of.iter().enumerate() {
            w[u] += unit_weights[i] * scale[i];
        }
        w
    })
}

fn run<F>(fit: &FittedModel, ds: &SequenceDataset, replicates: usize, weights_for: F) -> Result<BootstrapResult>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    if replicates < 2 {
        return Err(MedseqError::InvalidInput("at least two replicates are required".into()));
    }
    if fit.z.nrows() != ds.n() {
        return Err(MedseqError::LengthMismatch {
            expected: ds.n(),
            found: fit.z.nrows(),
        });
    }
    let outcomes: Vec<Option<Array2<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let data = ds.with_weights(weights_for(b)).ok()?;
            let refit = fit_with_init(&data, &fit.spec, fit.z.clone()).ok()?;
            refit.converged.then(|| gating_table(&refit.gating))
        })
        .collect();
    let mut draws = Vec::new();
    let mut failed = Vec::new();
    for (b, o) in outcomes.into_iter().enumerate() {
        match o {
            Some(d) => draws.push(d),
            None => failed.push(b),
        }
    }
    if draws.len() < 2 {
        return Err(MedseqError::InvalidInput(format!(
            "only {} of {replicates} bootstrap replicates succeeded",
            draws.len()
        )));
    }
    let estimate = gating_table(&fit.gating);
    let m = draws.len() as f64;
    let mean = draws
        .iter()
        .fold(Array2::<f64>::zeros(estimate.dim()), |acc, d| acc + d)
        / m;
    let var = draws
        .iter()
        .fold(Array2::<f64>::zeros(estimate.dim()), |acc, d| acc + (d - &mean).mapv(|x| x * x))
        / (m - 1.0);
    Ok(BootstrapResult {
        replicates,
        estimate,
        draws,
        se: var.mapv(f64::sqrt),
        failed,
    })
}
