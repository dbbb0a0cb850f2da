//! Mixing proportions: equal or free `tau`, covariate-dependent gating by
//! weighted multinomial logistic regression, noise handling under the GN and
//! NGN settings, and post-hoc two-step regressions.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::edm::ModelType;
use crate::error::{MedseqError, Result};
use crate::util::log_sum_exp;

/// Default ridge added to the non-intercept diagonal of the MLR Hessian.
pub const DEFAULT_RIDGE: f64 = 1e-8;
/// Default cap on Newton iterations per MLR fit.
pub const DEFAULT_MLR_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatingMode {
    /// `tau_g = 1/G` (noise proportion still estimated when present).
    Equal,
    /// Observation-independent `tau`, estimated.
    Free,
    /// Multinomial logistic regression on covariates.
    Covariate,
}

/// Whether covariates also drive the noise component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseGating {
    /// The noise component is an ordinary softmax component.
    GN,
    /// The noise proportion is a constant `tau0`.
    NGN,
}

impl fmt::Display for GatingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            GatingMode::Equal => "equal",
            GatingMode::Free => "free",
            GatingMode::Covariate => "covariate",
        })
    }
}

impl FromStr for GatingMode {
    type Err = MedseqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equal" => Ok(GatingMode::Equal),
            "free" => Ok(GatingMode::Free),
            "covariate" | "covariates" => Ok(GatingMode::Covariate),
            _ => Err(MedseqError::InvalidInput(format!("unknown gating mode '{s}'"))),
        }
    }
}

impl fmt::Display for NoiseGating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            NoiseGating::GN => "GN",
            NoiseGating::NGN => "NGN",
        })
    }
}

impl FromStr for NoiseGating {
    type Err = MedseqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "GN" => Ok(NoiseGating::GN),
            "NGN" => Ok(NoiseGating::NGN),
            _ => Err(MedseqError::InvalidInput(format!(
                "unknown noise gating '{s}' (expected GN or NGN)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatingConfig {
    pub mode: GatingMode,
    /// Source covariate names; categorical covariates expand to indicators.
    pub covariates: Vec<String>,
    pub noise_gating: NoiseGating,
    pub ridge: f64,
    pub max_iter: usize,
}

impl Default for GatingConfig {
    fn default() -> Self {
        GatingConfig {
            mode: GatingMode::Free,
            covariates: Vec::new(),
            noise_gating: NoiseGating::NGN,
            ridge: DEFAULT_RIDGE,
            max_iter: DEFAULT_MLR_ITER,
        }
    }
}

impl GatingConfig {
    pub fn equal() -> Self {
        GatingConfig {
            mode: GatingMode::Equal,
            ..Default::default()
        }
    }

    pub fn free() -> Self {
        Self::default()
    }

    pub fn covariates<S: Into<String>>(names: impl IntoIterator<Item = S>, noise: NoiseGating) -> Self {
        GatingConfig {
            mode: GatingMode::Covariate,
            covariates: names.into_iter().map(Into::into).collect(),
            noise_gating: noise,
            ..Default::default()
        }
    }

    /// The noise setting in force for `model`; `None` unless the model has a
    /// noise component and gating uses covariates.
    pub fn effective_noise_gating(&self, model: ModelType) -> Option<NoiseGating> {
        (self.mode == GatingMode::Covariate && model.has_noise()).then_some(self.noise_gating)
    }

    /// Covariate gating needs at least two softmax components.
    pub fn check(&self, model: ModelType, g: usize) -> Result<()> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(MedseqError::InvalidInput("ridge must be finite and nonnegative".into()));
        }
        if self.mode != GatingMode::Covariate {
            return Ok(());
        }
        let softmax = softmax_components(model, g, self.noise_gating);
        if softmax < 2 {
            let what = match self.effective_noise_gating(model) {
                Some(NoiseGating::NGN) => "at least two non-noise components under NGN",
                _ => "G >= 2",
            };
            return Err(MedseqError::Inadmissible(format!(
                "gating covariates require {what} ({model}, G={g})"
            )));
        }
        Ok(())
    }
}

/// Number of components whose probabilities come from the softmax.
pub fn softmax_components(model: ModelType, g: usize, noise: NoiseGating) -> usize {
    if model.has_noise() && noise == NoiseGating::NGN {
        g.saturating_sub(1)
    } else {
        g
    }
}

/// Fitted mixing-proportion parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GatingParams {
    /// Observation-independent proportions over all `G` components.
    Fixed { tau: Vec<f64> },
    /// Softmax coefficients `p × K` with column 0 fixed at zero; under NGN
    /// the noise component has constant proportion `tau0` and the softmax
    /// covers the non-noise components only.
    Logistic {
        beta: Array2<f64>,
        tau0: Option<f64>,
    },
}

impl GatingParams {
    /// `n × G` row-stochastic matrix of log mixing proportions.
    pub fn log_tau(&self, design: Option<ArrayView2<'_, f64>>, n: usize) -> Result<Array2<f64>> {
        match self {
            GatingParams::Fixed { tau } => {
                let logs: Vec<f64> = tau.iter().map(|t| t.ln()).collect();
                Ok(Array2::from_shape_fn((n, tau.len()), |(_, g)| logs[g]))
            }
            GatingParams::Logistic { beta, tau0 } => {
                let x = design.ok_or_else(|| {
                    MedseqError::InvalidInput("covariate gating needs a design matrix".into())
                })?;
                if x.nrows() != n {
                    return Err(MedseqError::LengthMismatch {
                        expected: n,
                        found: x.nrows(),
                    });
                }
                if x.ncols() != beta.nrows() {
                    return Err(MedseqError::LengthMismatch {
                        expected: beta.nrows(),
                        found: x.ncols(),
                    });
                }
                let mut out = log_softmax(x, beta.view());
                if let Some(t0) = tau0 {
                    out.mapv_inplace(|l| l + (1.0 - t0).ln());
                    let noise = Array2::from_elem((n, 1), t0.ln());
                    out = ndarray::concatenate![Axis(1), out, noise];
                }
                Ok(out)
            }
        }
    }

    /// `n × G` row-stochastic matrix of mixing proportions.
    pub fn predict_tau(&self, design: Option<ArrayView2<'_, f64>>, n: usize) -> Result<Array2<f64>> {
        Ok(self.log_tau(design, n)?.mapv(f64::exp))
    }

    pub fn beta(&self) -> Option<&Array2<f64>> {
        match self {
            GatingParams::Logistic { beta, .. } => Some(beta),
            GatingParams::Fixed { .. } => None,
        }
    }
}

/// Row-wise log-softmax of `x β`.
pub fn log_softmax(x: ArrayView2<'_, f64>, beta: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut eta = x.dot(&beta);
    for mut row in eta.rows_mut() {
        let lse = log_sum_exp(row.as_slice().expect("row-major"));
        row.mapv_inplace(|e| e - lse);
    }
    eta
}

/// Weighted column means `tau_g = sum_i z_ig w_i / sum_i w_i`.
pub fn estimate_tau_free(z: ArrayView2<'_, f64>, w: &[f64]) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    (0..z.ncols())
        .map(|g| z.column(g).iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total)
        .collect()
}

/// Gating CM-step. `z` is `n × G` with the noise column last when
/// `noise` is set; `prev` warm-starts the logistic fit.
pub fn gating_step(
    config: &GatingConfig,
    model: ModelType,
    z: ArrayView2<'_, f64>,
    w: &[f64],
    design: Option<ArrayView2<'_, f64>>,
    prev: Option<&GatingParams>,
) -> Result<GatingParams> {
    let g = z.ncols();
    let noise = model.has_noise();
    let total: f64 = w.iter().sum();
    let noise_share = |z: ArrayView2<'_, f64>| -> f64 {
        z.column(g - 1).iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total
    };
    match config.mode {
        GatingMode::Equal => {
            let tau = if noise && g > 1 {
                let t0 = noise_share(z);
                let mut tau = vec![(1.0 - t0) / (g - 1) as f64; g - 1];
                tau.push(t0);
                tau
            } else {
                vec![1.0 / g as f64; g]
            };
            Ok(GatingParams::Fixed { tau })
        }
        GatingMode::Free => Ok(GatingParams::Fixed {
            tau: estimate_tau_free(z, w),
        }),
        GatingMode::Covariate => {
            config.check(model, g)?;
            let x = design.ok_or_else(|| {
                MedseqError::InvalidInput("covariate gating needs a design matrix".into())
            })?;
            let start = match prev {
                Some(GatingParams::Logistic { beta, .. }) => Some(beta.view()),
                _ => None,
            };
            if noise && config.noise_gating == NoiseGating::NGN {
                let t0 = noise_share(z);
                let (resp, weights) = renormalize_without_noise(z, w);
                let beta = fit_mlr(x, resp.view(), &weights, start, config.ridge, config.max_iter)?;
                Ok(GatingParams::Logistic {
                    beta,
                    tau0: Some(t0),
                })
            } else {
                let beta = fit_mlr(x, z, w, start, config.ridge, config.max_iter)?;
                Ok(GatingParams::Logistic { beta, tau0: None })
            }
        }
    }
}

/// Drops the last (noise) column, renormalising each row within the
/// non-noise mass, and scales weights by that mass. Rows with no non-noise
/// mass get uniform responses and zero weight.
fn renormalize_without_noise(z: ArrayView2<'_, f64>, w: &[f64]) -> (Array2<f64>, Vec<f64>) {
    let (n, g) = z.dim();
    let k = g - 1;
    let mut resp = Array2::zeros((n, k));
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mass: f64 = (0..k).map(|h| z[[i, h]]).sum();
        if mass > 0.0 {
            for h in 0..k {
                resp[[i, h]] = z[[i, h]] / mass;
            }
        } else {
            resp.row_mut(i).fill(1.0 / k as f64);
        }
        weights.push(w[i] * mass);
    }
    (resp, weights)
}

/// Weighted gating objective `sum_i w_i sum_g r_ig log pi_g(x_i)`.
pub fn mlr_objective(
    x: ArrayView2<'_, f64>,
    r: ArrayView2<'_, f64>,
    w: &[f64],
    beta: ArrayView2<'_, f64>,
) -> f64 {
    let lp = log_softmax(x, beta);
    let mut total = 0.0;
    for i in 0..x.nrows() {
        if w[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for g in 0..r.ncols() {
            let rg = r[[i, g]];
            if rg > 0.0 {
                row += rg * lp[[i, g]];
            }
        }
        total += w[i] * row;
    }
    total
}

/// Rejects designs whose weighted cross-product is numerically singular.
pub fn check_design_rank(x: ArrayView2<'_, f64>, w: &[f64]) -> Result<()> {
    let p = x.ncols();
    let mut m = DMatrix::<f64>::zeros(p, p);
    for (i, row) in x.rows().into_iter().enumerate() {
        if w[i] <= 0.0 {
            continue;
        }
        for a in 0..p {
            for b in a..p {
                m[(a, b)] += w[i] * row[a] * row[b];
            }
        }
    }
    let scale: Vec<f64> = (0..p).map(|a| m[(a, a)].sqrt()).collect();
    if let Some(a) = scale.iter().position(|&s| s == 0.0) {
        return Err(MedseqError::RankDeficient(format!(
            "design column {a} is identically zero on the weighted sample"
        )));
    }
    for a in 0..p {
        for b in a..p {
            let c = m[(a, b)] / (scale[a] * scale[b]);
            m[(a, b)] = c;
            m[(b, a)] = c;
        }
    }
    let eig = SymmetricEigen::new(m);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 1e-10 {
        return Err(MedseqError::RankDeficient(format!(
            "weighted cross-product has smallest scaled eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// Weighted multinomial logistic regression of soft responses `r` (`n × K`)
/// on `x` (`n × p`, intercept first), with component 0 as baseline.
///
/// Newton iterations with step-halving: every accepted step does not
/// decrease [`mlr_objective`], so the result is never worse than `start`
/// (zeros when absent). `ridge` damps the non-intercept diagonal of the
/// Hessian only; the objective itself is unpenalised.
pub fn fit_mlr(
    x: ArrayView2<'_, f64>,
    r: ArrayView2<'_, f64>,
    w: &[f64],
    start: Option<ArrayView2<'_, f64>>,
    ridge: f64,
    max_iter: usize,
) -> Result<Array2<f64>> {
    let (n, p) = x.dim();
    let k = r.ncols();
    if r.nrows() != n || w.len() != n {
        return Err(MedseqError::LengthMismatch {
            expected: n,
            found: if r.nrows() != n { r.nrows() } else { w.len() },
        });
    }
    if k < 2 {
        return Err(MedseqError::InvalidInput(
            "multinomial regression needs at least two response columns".into(),
        ));
    }
    check_design_rank(x, w)?;
    let mut beta = match start {
        Some(b) if b.dim() == (p, k) => {
            let mut b = b.to_owned();
            b.column_mut(0).fill(0.0);
            b
        }
        _ => Array2::zeros((p, k)),
    };
    let row_mass: Array1<f64> = r.sum_axis(Axis(1));
    let d = p * (k - 1);
    let mut obj = mlr_objective(x, r, w, beta.view());
    for _ in 0..max_iter {
        let lp = log_softmax(x, beta.view());
        let mut grad = DVector::<f64>::zeros(d);
        let mut hess = DMatrix::<f64>::zeros(d, d);
        for i in 0..n {
            let a = w[i];
            if a == 0.0 {
                continue;
            }
            let xi = x.row(i);
            let s = row_mass[i];
            let pi: Vec<f64> = (0..k).map(|g| lp[[i, g]].exp()).collect();
            for g in 1..k {
                let resid = a * (r[[i, g]] - s * pi[g]);
                for j in 0..p {
                    grad[(g - 1) * p + j] += resid * xi[j];
                }
                for h in g..k {
                    let delta = if g == h { 1.0 } else { 0.0 };
                    let c = a * s * pi[g] * (delta - pi[h]);
                    if c == 0.0 {
                        continue;
                    }
                    for j in 0..p {
                        let cj = c * xi[j];
                        for l in 0..p {
                            hess[((g - 1) * p + j, (h - 1) * p + l)] += cj * xi[l];
                        }
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        if grad.amax() < 1e-12 * (1.0 + obj.abs()) {
            break;
        }
        let step = match newton_direction(&hess, &grad, p, ridge) {
            Some(s) => s,
            None => break,
        };
        // Below this decrement the objective cannot resolve the gain, so a
        // line search would reject good steps on rounding noise.
        let decrement = grad.dot(&step);
        if decrement <= 64.0 * f64::EPSILON * (1.0 + obj.abs()) {
            for g in 1..k {
                for j in 0..p {
                    beta[[j, g]] += step[(g - 1) * p + j];
                }
            }
            if step.amax() < 1e-15 * (1.0 + beta.iter().fold(0.0f64, |m, b| m.max(b.abs()))) {
                break;
            }
            obj = mlr_objective(x, r, w, beta.view());
            continue;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let mut trial = beta.clone();
            for g in 1..k {
                for j in 0..p {
                    trial[[j, g]] += alpha * step[(g - 1) * p + j];
                }
            }
            let t_obj = mlr_objective(x, r, w, trial.view());
            if t_obj.is_finite() && t_obj >= obj {
                accepted = Some((trial, t_obj));
                break;
            }
            alpha *= 0.5;
        }
        let Some((next, next_obj)) = accepted else {
            break;
        };
        let gain = next_obj - obj;
        let moved = step.amax() * alpha;
        beta = next;
        obj = next_obj;
        if moved < 1e-15 && gain <= 0.0 {
            break;
        }
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(MedseqError::NonFinite("gating coefficients".into()));
    }
    Ok(beta)
}

/// Solves `(H + ridge D) step = grad` by Cholesky, adding diagonal damping
/// until the factorisation succeeds.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>, p: usize, ridge: f64) -> Option<DVector<f64>> {
    let d = grad.len();
    let mut damping = 0.0;
    let scale = (0..d).map(|a| hess[(a, a)].abs()).fold(0.0, f64::max).max(1e-300);
    for _ in 0..60 {
        let mut m = hess.clone();
        for a in 0..d {
            let intercept = a % p == 0;
            m[(a, a)] += damping + if intercept { 0.0 } else { ridge };
        }
        if let Some(ch) = m.cholesky() {
            let s = ch.solve(grad);
            if s.iter().all(|v| v.is_finite()) {
                return Some(s);
            }
        }
        damping = if damping == 0.0 { 1e-12 * scale } else { damping * 10.0 };
    }
    None
}

/// Response type for post-hoc two-step regressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TwoStepKind {
    /// Responsibilities as soft responses.
    Soft,
    /// MAP indicators.
    Map,
}

impl FromStr for TwoStepKind {
    type Err = MedseqError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "soft" => Ok(TwoStepKind::Soft),
            "map" => Ok(TwoStepKind::Map),
            _ => Err(MedseqError::InvalidInput(format!("unknown two-step kind '{s}'"))),
        }
    }
}

/// Post-hoc MLR of a fitted partition on covariates. With a noise
/// component, `z` is renormalised over the non-noise columns first and the
/// noise component is excluded from the regression. Returns `p × K`
/// coefficients with the first non-noise component as baseline.
pub fn two_step_regress(
    z: ArrayView2<'_, f64>,
    has_noise: bool,
    w: &[f64],
    x: ArrayView2<'_, f64>,
    kind: TwoStepKind,
    ridge: f64,
) -> Result<Array2<f64>> {
    let resp = if has_noise {
        renormalize_without_noise(z, w).0
    } else {
        z.to_owned()
    };
    let k = resp.ncols();
    let resp = match kind {
        TwoStepKind::Soft => resp,
        TwoStepKind::Map => {
            let mut hard = Array2::zeros(resp.dim());
            for (i, row) in resp.rows().into_iter().enumerate() {
                hard[[i, argmax_view(row)]] = 1.0;
            }
            if let Some(g) = (0..k).find(|&g| hard.column(g).sum() == 0.0) {
                return Err(MedseqError::InvalidInput(format!(
                    "component {g} is empty under the MAP partition"
                )));
            }
            hard
        }
    };
    fit_mlr(x, resp.view(), w, None, ridge, 500)
}

fn argmax_view(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (g, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = g;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intercept(n: usize) -> Array2<f64> {
        Array2::ones((n, 1))
    }

    #[test]
    fn zero_coefficients_are_uniform() {
        let p = GatingParams::Logistic {
            beta: Array2::zeros((1, 4)),
            tau0: None,
        };
        let t = p.predict_tau(Some(intercept(3).view()), 3).unwrap();
        assert!(t.iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn softmax_arithmetic() {
        let p = GatingParams::Logistic {
            beta: array![[0.0, 3f64.ln()]],
            tau0: None,
        };
        let t = p.predict_tau(Some(intercept(1).view()), 1).unwrap();
        assert_abs_diff_eq!(t[[0, 0]], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(t[[0, 1]], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn constant_noise_share() {
        let p = GatingParams::Logistic {
            beta: Array2::zeros((2, 10)),
            tau0: Some(0.025),
        };
        let x = array![[1.0, 0.0], [1.0, 5.0]];
        let t = p.predict_tau(Some(x.view()), 2).unwrap();
        assert_eq!(t.ncols(), 11);
        for i in 0..2 {
            assert_abs_diff_eq!(t[[i, 10]], 0.025, epsilon = 1e-15);
            assert_abs_diff_eq!(t[[i, 0]], 0.0975, epsilon = 1e-15);
            assert_abs_diff_eq!(t.row(i).sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn shift_invariance() {
        let x = array![[1.0, 0.3], [1.0, -1.2], [1.0, 2.0]];
        let beta = array![[0.0, 0.4, -1.0], [0.0, 1.5, 0.2]];
        let shifted = &beta + &array![[0.7], [-0.3]];
        let a = log_softmax(x.view(), beta.view());
        let b = log_softmax(x.view(), shifted.view());
        for (u, v) in a.iter().zip(b.iter()) {
            assert_abs_diff_eq!(u, v, epsilon = 1e-12);
        }
    }

    #[test]
    fn free_tau_is_weighted_column_mean() {
        let z = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let t = estimate_tau_free(z.view(), &[1.0, 1.0, 1.0]);
        assert_abs_diff_eq!(t[0], 2.0 / 3.0, epsilon = 1e-15);
        let u = Array2::from_elem((4, 3), 1.0 / 3.0);
        let t = estimate_tau_free(u.view(), &[0.5, 1.5, 1.0, 1.0]);
        assert!(t.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn intercept_only_reproduces_column_means() {
        let r = array![[0.2, 0.5, 0.3], [0.2, 0.5, 0.3], [0.2, 0.5, 0.3]];
        let w = [1.0, 1.0, 1.0];
        let beta = fit_mlr(intercept(3).view(), r.view(), &w, None, 1e-8, 100).unwrap();
        let t = GatingParams::Logistic { beta, tau0: None }
            .predict_tau(Some(intercept(3).view()), 3)
            .unwrap();
        for g in 0..3 {
            assert_abs_diff_eq!(t[[0, g]], r[[0, g]], epsilon = 1e-9);
        }
    }

    #[test]
    fn separation_is_handled() {
        let n = 40;
        let mut x = Array2::ones((n, 2));
        let mut r = Array2::zeros((n, 2));
        for i in 0..n {
            let b = (i % 2) as f64;
            x[[i, 1]] = b;
            r[[i, i % 2]] = 1.0;
        }
        let w = vec![1.0; n];
        let beta = fit_mlr(x.view(), r.view(), &w, None, 1e-6, 100).unwrap();
        let t = GatingParams::Logistic { beta, tau0: None }
            .predict_tau(Some(x.view()), n)
            .unwrap();
        for i in 0..n {
            assert!(t[[i, i % 2]] >= 0.99, "row {i}: {}", t[[i, i % 2]]);
        }
    }

    #[test]
    fn fit_never_lowers_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = 30;
            let k = rng.random_range(2..5);
            let p = rng.random_range(1..4);
            let x = Array2::from_shape_fn((n, p), |(_, j)| {
                if j == 0 {
                    1.0
                } else {
                    rng.random_range(-2.0..2.0)
                }
            });
            let mut r = Array2::from_shape_fn((n, k), |_| rng.random_range(0.01..1.0));
            for mut row in r.rows_mut() {
                let s = row.sum();
                row /= s;
            }
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
            let start = Array2::from_shape_fn((p, k), |(_, g)| {
                if g == 0 {
                    0.0
                } else {
                    rng.random_range(-1.0..1.0)
                }
            });
            let zero = Array2::zeros((p, k));
            for init in [zero.view(), start.view()] {
                let before = mlr_objective(x.view(), r.view(), &w, init);
                let beta = fit_mlr(x.view(), r.view(), &w, Some(init), 1e-8, 100).unwrap();
                assert!(mlr_objective(x.view(), r.view(), &w, beta.view()) >= before);
                assert!(beta.column(0).iter().all(|&b| b == 0.0));
            }
        }
    }

    #[test]
    fn rank_deficiency_reported() {
        let x = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let r = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]];
        let err = fit_mlr(x.view(), r.view(), &[1.0; 3], None, 1e-8, 10).unwrap_err();
        assert!(matches!(err, MedseqError::RankDeficient(_)));
    }

    #[test]
    fn admissibility_of_covariate_gating() {
        let cfg = GatingConfig::covariates(["x"], NoiseGating::NGN);
        assert!(cfg.check(ModelType::UUN, 2).is_err());
        assert!(cfg.check(ModelType::CCN, 3).is_ok());
        assert!(cfg.check(ModelType::CC, 1).is_err());
        let gn = GatingConfig::covariates(["x"], NoiseGating::GN);
        assert!(gn.check(ModelType::CCN, 2).is_ok());
    }

    #[test]
    fn equal_mode_with_noise() {
        let z = array![[0.9, 0.0, 0.1], [0.0, 0.7, 0.3]];
        let p = gating_step(&GatingConfig::equal(), ModelType::CCN, z.view(), &[1.0, 1.0], None, None)
            .unwrap();
        let GatingParams::Fixed { tau } = p else { panic!() };
        assert_abs_diff_eq!(tau[2], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(tau[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn ngn_step_keeps_noise_constant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20;
        let x = Array2::from_shape_fn((n, 2), |(_, j)| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let mut z = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.05..1.0));
        for mut row in z.rows_mut() {
            let s = row.sum();
            row /= s;
        }
        let cfg = GatingConfig::covariates(["x"], NoiseGating::NGN);
        let p = gating_step(&cfg, ModelType::CCN, z.view(), &vec![1.0; n], Some(x.view()), None).unwrap();
        let t = p.predict_tau(Some(x.view()), n).unwrap();
        let t0 = z.column(2).sum() / n as f64;
        for i in 0..n {
            assert_abs_diff_eq!(t[[i, 2]], t0, epsilon = 1e-14);
            assert_abs_diff_eq!(t.row(i).sum(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_step_on_identical_clusters_has_flat_slopes() {
        let n = 50;
        let x = Array2::from_shape_fn((n, 2), |(i, j)| if j == 0 { 1.0 } else { (i as f64 / 7.0).sin() });
        let z = Array2::from_elem((n, 2), 0.5);
        let beta = two_step_regress(z.view(), false, &vec![1.0; n], x.view(), TwoStepKind::Soft, 1e-8).unwrap();
        assert!(beta.iter().all(|b| b.abs() < 1e-8));
        assert!(two_step_regress(z.view(), false, &vec![1.0; n], x.view(), TwoStepKind::Map, 1e-8).is_err());
    }
}
