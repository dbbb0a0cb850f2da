//! Expectation conditional-maximisation: initialisation, E-step, CM-step
//! orchestration and Aitken-based convergence.

mod init;

use std::sync::OnceLock;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

pub use init::{
    assign_to_medoids, cluster_medoids, first_appearance, hard_z, init_noise, init_partition,
    medoid_cem, medoid_cost, weighted_pam, PamResult, WardTree,
};

use crate::distance::{pairwise_matrix, DistanceMatrix};
use crate::edm::{
    component_loglik_matrix, estimate_precision, estimate_theta, ComponentParams, ModelType,
    DEFAULT_LAMBDA_MAX,
};
use crate::error::{MedseqError, Result};
use crate::gating::{gating_step, GatingConfig, GatingMode, GatingParams};
use crate::selection::{bic, count_params, wdbs};
use crate::seqdata::SequenceDataset;
use crate::util::{argmax, log_sum_exp, tie_ranks};

/// Numerical settings for a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Control {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub tau0_init: f64,
    pub lambda_max: f64,
    /// When set, convergence also requires every precision and gating
    /// coefficient to be within this of its extrapolated limit. The
    /// log-likelihood alone flattens out at rounding level while parameters
    /// are still about its square root away from the fixed point.
    #[serde(default)]
    pub param_tol: Option<f64>,
}

impl Default for Control {
    fn default() -> Self {
        Control {
            tol: 1e-8,
            max_iter: 1000,
            seed: 0,
            tau0_init: 0.05,
            lambda_max: DEFAULT_LAMBDA_MAX,
            param_tol: None,
        }
    }
}

/// Model type, number of components (noise included), gating and control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelSpec {
    pub model: ModelType,
    pub g: usize,
    pub gating: GatingConfig,
    pub control: Control,
}

impl ModelSpec {
    /// Free mixing proportions and default control.
    pub fn new(model: ModelType, g: usize) -> Self {
        ModelSpec {
            model,
            g,
            gating: GatingConfig::default(),
            control: Control::default(),
        }
    }

    pub fn with_gating(mut self, gating: GatingConfig) -> Self {
        self.gating = gating;
        self
    }

    pub fn with_control(mut self, control: Control) -> Self {
        self.control = control;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.control.seed = seed;
        self
    }

    /// Number of exponential-distance components.
    pub fn k(&self) -> usize {
        self.model.edm_components(self.g)
    }

    /// Validates admissibility and control values.
    pub fn check(&self) -> Result<()> {
        self.model.check_components(self.g)?;
        self.gating.check(self.model, self.g)?;
        let c = &self.control;
        if !(c.tol > 0.0) || c.max_iter == 0 || c.param_tol.is_some_and(|p| !(p > 0.0)) {
            return Err(MedseqError::InvalidInput(
                "tolerances must be positive and maxIter at least 1".into(),
            ));
        }
        if !(c.lambda_max > 0.0 && c.lambda_max.is_finite()) {
            return Err(MedseqError::InvalidInput("lambdaMax must be positive and finite".into()));
        }
        if self.model.has_noise() && !(c.tau0_init > 0.0 && c.tau0_init < 1.0) {
            return Err(MedseqError::InvalidInput("tau0Init must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Short label such as `UUN G=11 NGN [GCSE5eq]`.
    pub fn label(&self) -> String {
        let mut s = format!("{} G={}", self.model, self.g);
        match self.gating.mode {
            GatingMode::Equal => s.push_str(" equal"),
            GatingMode::Free => {}
            GatingMode::Covariate => {
                if let Some(ng) = self.gating.effective_noise_gating(self.model) {
                    s.push_str(&format!(" {ng}"));
                }
                s.push_str(&format!(" [{}]", self.gating.covariates.join(",")));
            }
        }
        s
    }
}

/// A fitted model at the highest pseudo log-likelihood reached.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub spec: ModelSpec,
    pub components: ComponentParams,
    pub gating: GatingParams,
    /// Design column names when gating uses covariates (intercept first).
    pub design_names: Vec<String>,
    /// `n × G` responsibilities; the noise column, if any, is last.
    pub z: Array2<f64>,
    pub map: Vec<usize>,
    pub loglik_trace: Vec<f64>,
    pub loglik: f64,
    pub n_params: usize,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Weighted density-based silhouette; `None` when `G = 1`.
    pub wdbs: Option<f64>,
}

impl FittedModel {
    /// Mixing proportions for every observation.
    pub fn tau(&self, ds: &SequenceDataset) -> Result<Array2<f64>> {
        let design = self.design(ds)?;
        self.gating.predict_tau(design.as_ref().map(|d| d.view()), ds.n())
    }

    fn design(&self, ds: &SequenceDataset) -> Result<Option<Array2<f64>>> {
        gating_design(ds, &self.spec.gating)
    }
}

fn gating_design(ds: &SequenceDataset, gating: &GatingConfig) -> Result<Option<Array2<f64>>> {
    Ok(match gating.mode {
        GatingMode::Covariate => Some(ds.design(&gating.covariates)?.0),
        _ => None,
    })
}

/// Shares the pairwise matrix and Ward tree across fits on one dataset.
#[derive(Debug)]
pub struct Initializer {
    distances: DistanceMatrix,
    weights: Vec<f64>,
    tree: OnceLock<Result<WardTree>>,
}

impl Initializer {
    pub fn new(ds: &SequenceDataset) -> Self {
        Initializer {
            distances: pairwise_matrix(ds),
            weights: ds.weights().to_vec(),
            tree: OnceLock::new(),
        }
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    /// Ward cut at `k` refined by weighted PAM.
    pub fn partition(&self, k: usize) -> Result<Vec<usize>> {
        init::check_k(&self.distances, k)?;
        let tree = self
            .tree
            .get_or_init(|| WardTree::build(&self.distances, &self.weights));
        let ward = match tree {
            Ok(t) => t.cut(k)?,
            Err(e) => return Err(MedseqError::InvalidInput(e.to_string())),
        };
        Ok(weighted_pam(&self.distances, &self.weights, &ward, k).labels)
    }

    /// Starting responsibilities for `spec`.
    pub fn initial_z(&self, spec: &ModelSpec) -> Result<Array2<f64>> {
        let n = self.distances.n();
        let k = spec.k();
        if k == 0 {
            return Ok(Array2::ones((n, 1)));
        }
        let z = hard_z(&self.partition(k)?, k);
        if spec.model.has_noise() {
            init_noise(&z, spec.control.tau0_init)
        } else {
            Ok(z)
        }
    }
}

/// Responsibilities and weighted pseudo log-likelihood
/// `sum_i w_i log sum_g tau_g(x_i) f_g(s_i)`. Weights do not enter `Z`.
pub fn e_step(
    ds: &SequenceDataset,
    components: &ComponentParams,
    gating: &GatingParams,
    design: Option<ArrayView2<'_, f64>>,
) -> Result<(Array2<f64>, f64)> {
    let mut lp = component_loglik_matrix(ds, components);
    lp += &gating.log_tau(design, ds.n())?;
    let mut loglik = 0.0;
    for (i, mut row) in lp.rows_mut().into_iter().enumerate() {
        let lse = log_sum_exp(row.as_slice().expect("row-major"));
        if !lse.is_finite() {
            return Err(MedseqError::NonFinite(format!(
                "log-density of observation {i} is {lse}"
            )));
        }
        row.mapv_inplace(|x| (x - lse).exp());
        loglik += ds.weights()[i] * lse;
    }
    Ok((lp, loglik))
}

/// Aitken convergence check on three successive log-likelihoods. Returns
/// the convergence flag and the extrapolated limit.
pub fn aitken_check(l0: f64, l1: f64, l2: f64, tol: f64) -> (bool, f64) {
    let slack = 8.0 * f64::EPSILON * (1.0 + l2.abs());
    let settled = (l2 - l1).abs() <= slack;
    let denom = l1 - l0;
    if denom == 0.0 {
        return (settled, l2);
    }
    let a = (l2 - l1) / denom;
    if a >= 1.0 {
        return (settled, f64::INFINITY);
    }
    let l_inf = l1 + (l2 - l1) / (1.0 - a);
    ((l_inf - l2).abs() < tol || settled, l_inf)
}

/// Largest absolute change in precisions or gating coefficients; infinite
/// when a central sequence moved.
fn parameter_change(c0: &ComponentParams, g0: &GatingParams, c1: &ComponentParams, g1: &GatingParams) -> f64 {
    if c0.theta != c1.theta {
        return f64::INFINITY;
    }
    let lambda = c0.precision.values().iter().zip(c1.precision.values()).map(|(a, b)| (a - b).abs());
    let gating: Vec<f64> = match (g0, g1) {
        (GatingParams::Fixed { tau: a }, GatingParams::Fixed { tau: b }) => {
            a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect()
        }
        (GatingParams::Logistic { beta: a, tau0: s }, GatingParams::Logistic { beta: b, tau0: t }) => a
            .iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .chain(s.zip(*t).map(|(x, y)| (x - y).abs()))
            .collect(),
        _ => return f64::INFINITY,
    };
    lambda.chain(gating).fold(0.0, f64::max)
}

/// Fits `spec` from the Ward + weighted PAM start.
pub fn fit(ds: &SequenceDataset, spec: &ModelSpec) -> Result<FittedModel> {
    spec.check()?;
    let init = Initializer::new(ds);
    fit_from(ds, spec, &init)
}

/// Fits `spec` using a shared [`Initializer`] built on the same dataset.
pub fn fit_from(ds: &SequenceDataset, spec: &ModelSpec, init: &Initializer) -> Result<FittedModel> {
    spec.check()?;
    let z0 = init.initial_z(spec)?;
    fit_with_init(ds, spec, z0)
}

/// Runs ECM from the given starting responsibilities (`n × G`).
pub fn fit_with_init(ds: &SequenceDataset, spec: &ModelSpec, z0: Array2<f64>) -> Result<FittedModel> {
    spec.check()?;
    let (n, g) = (ds.n(), spec.g);
    if z0.dim() != (n, g) {
        return Err(MedseqError::InvalidInput(format!(
            "starting responsibilities are {}x{}, expected {n}x{g}",
            z0.nrows(),
            z0.ncols()
        )));
    }
    let k = spec.k();
    let model = spec.model;
    let control = &spec.control;
    let (design, design_names) = match spec.gating.mode {
        GatingMode::Covariate => {
            let (x, names) = ds.design(&spec.gating.covariates)?;
            (Some(x), names)
        }
        _ => (None, Vec::new()),
    };
    let design_view = design.as_ref().map(|d| d.view());
    let ranks = tie_ranks(ds.v(), control.seed);
    let w = ds.weights();
    let floor = 1e-10 * w.iter().sum::<f64>();

    let mut z = z0;
    let mut prev_gating: Option<GatingParams> = None;
    let mut trace = Vec::new();
    let mut prev: Option<(ComponentParams, GatingParams)> = None;
    let mut top = f64::NEG_INFINITY;
    let (mut before_last, mut last_step) = (f64::INFINITY, f64::INFINITY);
    let mut best: Option<(f64, ComponentParams, GatingParams, Array2<f64>)> = None;
    let mut converged = false;
    for iteration in 1..=control.max_iter {
        for comp in 0..k {
            let mass: f64 = z.column(comp).iter().zip(w).map(|(a, b)| a * b).sum();
            if !(mass >= floor) {
                return Err(MedseqError::EmptyComponent {
                    component: comp,
                    iteration,
                });
            }
        }
        let gating = gating_step(&spec.gating, model, z.view(), w, design_view, prev_gating.as_ref())?;
        let theta = (0..k)
            .map(|comp| estimate_theta(ds, z.column(comp), &ranks))
            .collect::<Result<Vec<_>>>()?;
        let precision = estimate_precision(model, ds, &z, &theta, control.lambda_max)?;
        let components = ComponentParams { theta, precision };
        let (z_new, ll) = e_step(ds, &components, &gating, design_view)?;
        trace.push(ll);
        let step = prev.as_ref().map_or(f64::INFINITY, |(c, g)| parameter_change(c, g, &components, &gating));
        // Ties within rounding go to the later, more converged iterate.
        top = top.max(ll);
        if best.is_none() || ll >= top - 8.0 * f64::EPSILON * (1.0 + top.abs()) {
            best = Some((ll, components.clone(), gating.clone(), z_new.clone()));
        }
        prev = Some((components, gating.clone()));
        prev_gating = Some(gating);
        z = z_new;
        let m = trace.len();
        converged = match m {
            1 => false,
            2 => (trace[1] - trace[0]).abs() <= 8.0 * f64::EPSILON * (1.0 + trace[1].abs()),
            _ => aitken_check(trace[m - 3], trace[m - 2], trace[m - 1], control.tol).0,
        } && control.param_tol.is_none_or(|p| {
            // Linear convergence at rate r leaves step r / (1 - r) still to
            // travel; the larger of two ratios guards against a lucky step.
            let r = (step / last_step).max(last_step / before_last);
            step == 0.0 || step < p && r < 1.0 && step * r / (1.0 - r) < p
        });
        before_last = last_step;
        last_step = step;
        if converged {
            break;
        }
    }
    let (loglik, components, gating, z) = best.expect("at least one iteration runs");
    let map = (0..n)
        .map(|i| argmax(z.row(i).as_slice().expect("row-major")))
        .collect();
    let n_params = count_params(spec, ds)?;
    let wdbs = (g >= 2).then(|| wdbs(&z, w)).transpose()?;
    Ok(FittedModel {
        spec: spec.clone(),
        components,
        gating,
        design_names,
        iterations: trace.len(),
        loglik_trace: trace,
        loglik,
        n_params,
        bic: bic(loglik, n_params, ds.sample_size()),
        z,
        map,
        converged,
        wdbs,
    })
}
