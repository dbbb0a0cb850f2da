//! Parameter counting, BIC, grid and stepwise model search, and silhouette
//! diagnostics.

use std::cmp::Ordering;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::DistanceMatrix;
use crate::ecm::{fit_from, Control, FittedModel, Initializer, ModelSpec};
use crate::edm::{ModelType, PrecisionKind};
use crate::error::{MedseqError, Result};
use crate::gating::{GatingConfig, GatingMode, NoiseGating};
use crate::seqdata::SequenceDataset;

/// Free parameters of `spec` on `ds`: central sequences, precisions and
/// gating.
pub fn count_params(spec: &ModelSpec, ds: &SequenceDataset) -> Result<usize> {
    let k = spec.k();
    let t = ds.t();
    let per_sequence: usize = ds.observed_counts().iter().map(|&c| c - 1).sum();
    let central = k * per_sequence;
    let precision = if k == 0 {
        0
    } else {
        match spec.model.precision_kind() {
            PrecisionKind::Scalar => 1,
            PrecisionKind::PerCluster => k,
            PrecisionKind::PerTime => t,
            PrecisionKind::PerClusterPerTime => k * t,
        }
    };
    let r = match spec.gating.mode {
        GatingMode::Covariate => ds.design_width(&spec.gating.covariates)?,
        _ => 0,
    };
    Ok(central + precision + gating_params(spec, r))
}

/// Gating parameter count given `r` non-intercept design columns.
pub fn gating_params(spec: &ModelSpec, r: usize) -> usize {
    let g = spec.g;
    match spec.gating.mode {
        GatingMode::Covariate => match spec.gating.effective_noise_gating(spec.model) {
            Some(NoiseGating::NGN) => (r + 1) * g.saturating_sub(2) + 1,
            _ => (r + 1) * (g - 1),
        },
        GatingMode::Free => g - 1,
        GatingMode::Equal => usize::from(spec.model.has_noise() && g > 1),
    }
}

/// `2 loglik - k log n`; larger is better.
pub fn bic(loglik: f64, k: usize, n: usize) -> f64 {
    2.0 * loglik - k as f64 * (n as f64).ln()
}

/// Default tolerance below which a runner-up probability counts as zero.
pub const DBS_EPS: f64 = 1e-100;

/// Density-based silhouette of every row of `z`. Rows whose runner-up
/// probability is below `eps` get 1 and are excluded from the normaliser.
pub fn dbs(z: &Array2<f64>, eps: f64) -> Result<Vec<f64>> {
    if z.ncols() < 2 {
        return Err(MedseqError::InvalidInput(
            "density-based silhouettes are undefined for G=1".into(),
        ));
    }
    let ratios: Vec<Option<f64>> = z
        .rows()
        .into_iter()
        .map(|row| {
            let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &p in row {
                if p > first {
                    second = first;
                    first = p;
                } else if p > second {
                    second = p;
                }
            }
            (second >= eps).then(|| (first / second).ln())
        })
        .collect();
    let max = ratios.iter().flatten().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(ratios
        .iter()
        .map(|r| match r {
            None => 1.0,
            Some(_) if max == 0.0 => 0.0,
            Some(r) => r / max,
        })
        .collect())
}

/// Weighted mean density-based silhouette.
pub fn wdbs(z: &Array2<f64>, w: &[f64]) -> Result<f64> {
    let d = dbs(z, DBS_EPS)?;
    let total: f64 = w.iter().sum();
    Ok(d.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total)
}

/// Weighted average silhouette width on a Hamming matrix. `a_i` is the
/// weighted mean distance to the rest of the own cluster, `b_i` the smallest
/// weighted mean distance to another cluster; members of singleton clusters
/// score 0.
pub fn wasw(d: &DistanceMatrix, labels: &[usize], w: &[f64]) -> Result<f64> {
    let n = d.n();
    if labels.len() != n || w.len() != n {
        return Err(MedseqError::LengthMismatch {
            expected: n,
            found: labels.len().min(w.len()),
        });
    }
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut cluster_mass = vec![0.0; k];
    for (i, &l) in labels.iter().enumerate() {
        cluster_mass[l] += w[i];
    }
    if cluster_mass.iter().filter(|&&m| m > 0.0).count() < 2 {
        return Err(MedseqError::InvalidInput(
            "silhouette widths need at least two nonempty clusters".into(),
        ));
    }
    let widths: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = labels[i];
            let mut sums = vec![0.0; k];
            let mut own_mass = 0.0;
            let mut own_count = 0usize;
            for j in 0..n {
                if j == i {
                    continue;
                }
                sums[labels[j]] += w[j] * d.get(i, j) as f64;
                if labels[j] == own {
                    own_mass += w[j];
                    own_count += 1;
                }
            }
            if own_count == 0 || own_mass <= 0.0 {
                return 0.0;
            }
            let a = sums[own] / own_mass;
            let b = (0..k)
                .filter(|&c| c != own && cluster_mass[c] > 0.0)
                .map(|c| sums[c] / cluster_mass[c])
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    Ok(widths.iter().zip(w).map(|(s, x)| s * x).sum::<f64>() / total)
}

/// One row of a grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridEntry {
    pub model: ModelType,
    pub g: usize,
    pub gating: GatingMode,
    pub noise_gating: Option<NoiseGating>,
    pub covariates: Vec<String>,
    pub loglik: Option<f64>,
    pub n_params: Option<usize>,
    pub bic: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub error: Option<String>,
}

/// All grid rows in (G, model type) order plus the best fit by BIC.
#[derive(Debug, Clone)]
pub struct GridResult {
    pub entries: Vec<GridEntry>,
    pub best: Option<FittedModel>,
}

/// Gating actually used for `(model, g)`: covariate gating that is not
/// admissible falls back to free mixing proportions.
pub fn admissible_gating(gating: &GatingConfig, model: ModelType, g: usize) -> GatingConfig {
    if gating.mode == GatingMode::Covariate && gating.check(model, g).is_err() {
        GatingConfig {
            mode: GatingMode::Free,
            covariates: Vec::new(),
            ..gating.clone()
        }
    } else {
        gating.clone()
    }
}

/// Better model first: higher BIC, then fewer parameters.
fn rank_fits(a: &FittedModel, b: &FittedModel) -> Ordering {
    b.bic
        .partial_cmp(&a.bic)
        .unwrap_or(Ordering::Equal)
        .then(a.n_params.cmp(&b.n_params))
}

/// Fits every admissible (model type, G) pair and keeps the best by BIC.
/// Failed fits are recorded in the table and otherwise ignored.
pub fn grid_search(
    ds: &SequenceDataset,
    types: &[ModelType],
    g_values: &[usize],
    gating: &GatingConfig,
    control: &Control,
) -> GridResult {
    let init = Initializer::new(ds);
    let specs: Vec<ModelSpec> = g_values
        .iter()
        .flat_map(|&g| types.iter().map(move |&m| (m, g)))
        .filter(|&(m, g)| m.check_components(g).is_ok())
        .map(|(m, g)| {
            ModelSpec::new(m, g)
                .with_gating(admissible_gating(gating, m, g))
                .with_control(control.clone())
        })
        .collect();
    let results: Vec<(GridEntry, Option<FittedModel>)> = specs
        .par_iter()
        .map(|spec| {
            let outcome = fit_from(ds, spec, &init);
            let mut entry = GridEntry {
                model: spec.model,
                g: spec.g,
                gating: spec.gating.mode,
                noise_gating: spec.gating.effective_noise_gating(spec.model),
                covariates: spec.gating.covariates.clone(),
                loglik: None,
                n_params: None,
                bic: None,
                iterations: None,
                converged: None,
                error: None,
            };
            match outcome {
                Ok(fit) => {
                    entry.loglik = Some(fit.loglik);
                    entry.n_params = Some(fit.n_params);
                    entry.bic = Some(fit.bic);
                    entry.iterations = Some(fit.iterations);
                    entry.converged = Some(fit.converged);
                    (entry, Some(fit))
                }
                Err(e) => {
                    entry.error = Some(e.to_string());
                    (entry, None)
                }
            }
        })
        .collect();
    let mut entries = Vec::with_capacity(results.len());
    let mut best: Option<FittedModel> = None;
    for (entry, fit) in results {
        entries.push(entry);
        if let Some(fit) = fit {
            if best.as_ref().is_none_or(|b| rank_fits(&fit, b) == Ordering::Less) {
                best = Some(fit);
            }
        }
    }
    GridResult { entries, best }
}

/// One evaluated or accepted step of a stepwise search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub step: usize,
    pub action: String,
    pub model: ModelType,
    pub g: usize,
    pub covariates: Vec<String>,
    pub noise_gating: Option<NoiseGating>,
    pub n_params: usize,
    pub bic: f64,
    /// Candidate fits evaluated for this step.
    pub candidates: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct StepwiseTrace {
    /// Starting model, each accepted step, and finally the best rejected
    /// candidate (if any candidate could be fitted).
    pub steps: Vec<StepRecord>,
    pub final_model: FittedModel,
}

impl StepwiseTrace {
    pub fn final_bic(&self) -> f64 {
        self.final_model.bic
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    action: String,
    spec: ModelSpec,
}

/// Specs reachable from `current` by one action, each over every model
/// type and, when noise and covariates coexist, both noise settings.
fn candidates(current: &ModelSpec, pool: &[String]) -> Vec<Candidate> {
    let k = current.k();
    let covs = match current.gating.mode {
        GatingMode::Covariate => current.gating.covariates.clone(),
        _ => Vec::new(),
    };
    let mut moves: Vec<(String, usize, Vec<String>)> = Vec::new();
    for c in pool {
        if !covs.contains(c) {
            let mut next = covs.clone();
            next.push(c.clone());
            moves.push((format!("Add '{c}'"), k, next));
        }
    }
    for c in &covs {
        let next: Vec<String> = covs.iter().filter(|x| *x != c).cloned().collect();
        moves.push((format!("Remove '{c}'"), k, next));
    }
    moves.push(("Add Component".into(), k + 1, covs.clone()));
    if k >= 1 {
        moves.push(("Remove Component".into(), k - 1, covs.clone()));
    }
    let mut out = Vec::new();
    for (action, k_next, covs_next) in moves {
        for model in ModelType::ALL {
            let g = k_next + usize::from(model.has_noise());
            if model.check_components(g).is_err() {
                continue;
            }
            let settings: Vec<GatingConfig> = if covs_next.is_empty() {
                vec![GatingConfig {
                    mode: GatingMode::Free,
                    covariates: Vec::new(),
                    ..current.gating.clone()
                }]
            } else {
                let noise_settings: &[NoiseGating] = if model.has_noise() {
                    &[NoiseGating::GN, NoiseGating::NGN]
                } else {
                    &[NoiseGating::NGN]
                };
                noise_settings
                    .iter()
                    .map(|&ng| GatingConfig {
                        mode: GatingMode::Covariate,
                        covariates: covs_next.clone(),
                        noise_gating: ng,
                        ..current.gating.clone()
                    })
                    .filter(|cfg| cfg.check(model, g).is_ok())
                    .collect()
            };
            for gating in settings {
                out.push(Candidate {
                    action: action.clone(),
                    spec: ModelSpec {
                        model,
                        g,
                        gating,
                        control: current.control.clone(),
                    },
                });
            }
        }
    }
    out
}

fn record(step: usize, action: &str, fit: &FittedModel, candidates: usize, accepted: bool) -> StepRecord {
    let spec = &fit.spec;
    StepRecord {
        step,
        action: action.to_string(),
        model: spec.model,
        g: spec.g,
        covariates: match spec.gating.mode {
            GatingMode::Covariate => spec.gating.covariates.clone(),
            _ => Vec::new(),
        },
        noise_gating: spec.gating.effective_noise_gating(spec.model),
        n_params: fit.n_params,
        bic: fit.bic,
        candidates,
        accepted,
    }
}

/// Greedy bi-directional search from `start`: at every step all additions
/// and removals of a covariate (from `pool`) or a non-noise component are
/// fitted across all model types, and the best action by BIC is accepted
/// while it improves on the current model. Ties go to fewer parameters, then
/// the lexicographically smaller action name.
///
/// `ds` must carry every covariate in `pool`.
pub fn stepwise(ds: &SequenceDataset, pool: &[String], start: &ModelSpec) -> Result<StepwiseTrace> {
    let init = Initializer::new(ds);
    let mut current = fit_from(ds, start, &init)?;
    let mut steps = vec![record(0, "Initial Model", &current, 1, true)];
    loop {
        let cands = candidates(&current.spec, pool);
        let fits: Vec<(String, FittedModel)> = cands
            .par_iter()
            .filter_map(|c| fit_from(ds, &c.spec, &init).ok().map(|f| (c.action.clone(), f)))
            .collect();
        let best = fits.iter().min_by(|a, b| {
            rank_fits(&a.1, &b.1).then_with(|| a.0.cmp(&b.0))
        });
        let step = steps.len();
        match best {
            Some((action, fit)) if fit.bic > current.bic => {
                steps.push(record(step, action, fit, cands.len(), true));
                current = fit.clone();
            }
            Some((action, fit)) => {
                steps.push(record(step, action, fit, cands.len(), false));
                break;
            }
            None => break,
        }
    }
    Ok(StepwiseTrace {
        steps,
        final_model: current,
    })
}
