//! Exponential-distance component densities and the closed-form CM-steps for
//! central sequences and precision parameters.
//!
//! Components `0..k` are the exponential-distance components; when the model
//! carries a noise component it is always stored last, with every precision
//! fixed at zero and no central sequence.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::distance::{log_psi_term, log_psi_weighted, weighted_hamming};
use crate::error::{MedseqError, Result};
use crate::seqdata::SequenceDataset;

/// Default ceiling for precision estimates whose closed form diverges.
pub const DEFAULT_LAMBDA_MAX: f64 = 1e3;

/// The eight precision constraints of the model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelType {
    CC,
    UC,
    CU,
    UU,
    CCN,
    UCN,
    CUN,
    UUN,
}

impl ModelType {
    pub const ALL: [ModelType; 8] = [
        ModelType::CC,
        ModelType::UC,
        ModelType::CU,
        ModelType::UU,
        ModelType::CCN,
        ModelType::UCN,
        ModelType::CUN,
        ModelType::UUN,
    ];

    pub fn has_noise(self) -> bool {
        matches!(
            self,
            ModelType::CCN | ModelType::UCN | ModelType::CUN | ModelType::UUN
        )
    }

    /// Precisions differ across clusters.
    pub fn varies_by_cluster(self) -> bool {
        matches!(
            self,
            ModelType::UC | ModelType::UU | ModelType::UCN | ModelType::UUN
        )
    }

    /// Precisions differ across time points.
    pub fn varies_by_time(self) -> bool {
        matches!(
            self,
            ModelType::CU | ModelType::UU | ModelType::CUN | ModelType::UUN
        )
    }

    pub fn precision_kind(self) -> PrecisionKind {
        match (self.varies_by_cluster(), self.varies_by_time()) {
            (false, false) => PrecisionKind::Scalar,
            (true, false) => PrecisionKind::PerCluster,
            (false, true) => PrecisionKind::PerTime,
            (true, true) => PrecisionKind::PerClusterPerTime,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelType::CC => "CC",
            ModelType::UC => "UC",
            ModelType::CU => "CU",
            ModelType::UU => "UU",
            ModelType::CCN => "CCN",
            ModelType::UCN => "UCN",
            ModelType::CUN => "CUN",
            ModelType::UUN => "UUN",
        }
    }

    /// Checks that this type can be fitted with `g` components (noise
    /// included in `g`).
    pub fn check_components(self, g: usize) -> Result<()> {
        if g == 0 {
            return Err(MedseqError::Inadmissible("G must be at least 1".into()));
        }
        if g == 1 && !matches!(self, ModelType::CC | ModelType::CU | ModelType::CCN) {
            return Err(MedseqError::Inadmissible(format!(
                "{self} cannot be fitted with G=1; only CC, CU and CCN can"
            )));
        }
        if g == 2 && matches!(self, ModelType::UCN | ModelType::UUN) {
            let alias = if self == ModelType::UCN { "CCN" } else { "CUN" };
            return Err(MedseqError::Inadmissible(format!(
                "{self} with G=2 has a single non-noise component and is equivalent to {alias}"
            )));
        }
        Ok(())
    }

    /// Number of exponential-distance (non-noise) components.
    pub fn edm_components(self, g: usize) -> usize {
        if self.has_noise() {
            g - 1
        } else {
            g
        }
    }
}

impl fmt::Display for ModelType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for ModelType {
    type Err = MedseqError;

    fn from_str(s: &str) -> Result<Self> {
        ModelType::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| MedseqError::InvalidInput(format!("unknown model type '{s}'")))
    }
}

/// Shape of the precision parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PrecisionKind {
    Scalar,
    PerCluster,
    PerTime,
    PerClusterPerTime,
}

/// Precision parameters of the exponential-distance components. The noise
/// component, when present, has all precisions fixed at zero and is not
/// stored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionStructure {
    kind: PrecisionKind,
    components: usize,
    t: usize,
    values: Vec<f64>,
    noise: bool,
}

impl PrecisionStructure {
    /// `values` layout: scalar `[1]`, per cluster `[k]`, per time `[T]`,
    /// per cluster and time `[k * T]` row-major by cluster. With `k == 0`
    /// (pure noise) `values` must be empty.
    pub fn new(
        kind: PrecisionKind,
        components: usize,
        t: usize,
        values: Vec<f64>,
        noise: bool,
    ) -> Result<Self> {
        let expected = if components == 0 {
            0
        } else {
            match kind {
                PrecisionKind::Scalar => 1,
                PrecisionKind::PerCluster => components,
                PrecisionKind::PerTime => t,
                PrecisionKind::PerClusterPerTime => components * t,
            }
        };
        if values.len() != expected {
            return Err(MedseqError::LengthMismatch {
                expected,
                found: values.len(),
            });
        }
        if values.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(MedseqError::InvalidInput(
                "precisions must be finite and nonnegative".into(),
            ));
        }
        Ok(PrecisionStructure {
            kind,
            components,
            t,
            values,
            noise,
        })
    }

    /// Every precision set to `lambda`.
    pub fn constant(kind: PrecisionKind, components: usize, t: usize, lambda: f64, noise: bool) -> Result<Self> {
        let len = if components == 0 {
            0
        } else {
            match kind {
                PrecisionKind::Scalar => 1,
                PrecisionKind::PerCluster => components,
                PrecisionKind::PerTime => t,
                PrecisionKind::PerClusterPerTime => components * t,
            }
        };
        Self::new(kind, components, t, vec![lambda; len], noise)
    }

    pub fn kind(&self) -> PrecisionKind {
        self.kind
    }

    /// Number of exponential-distance components.
    pub fn components(&self) -> usize {
        self.components
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn has_noise(&self) -> bool {
        self.noise
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Precision of component `g` at time `t`.
    #[inline]
    pub fn lambda(&self, g: usize, t: usize) -> f64 {
        match self.kind {
            PrecisionKind::Scalar => self.values[0],
            PrecisionKind::PerCluster => self.values[g],
            PrecisionKind::PerTime => self.values[t],
            PrecisionKind::PerClusterPerTime => self.values[g * self.t + t],
        }
    }

    /// Per-time precisions of component `g`.
    pub fn component_lambdas(&self, g: usize) -> Vec<f64> {
        (0..self.t).map(|t| self.lambda(g, t)).collect()
    }
}

/// Central sequences and precisions of the exponential-distance components.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentParams {
    pub theta: Vec<Vec<u8>>,
    pub precision: PrecisionStructure,
}

impl ComponentParams {
    /// Total number of components including the noise component.
    pub fn g(&self) -> usize {
        self.theta.len() + usize::from(self.precision.has_noise())
    }
}

/// Log-density of `s` under an exponential-distance model with central
/// sequence `theta` and per-time precisions `lambda`.
pub fn edm_log_density(s: &[u8], theta: &[u8], lambda: &[f64], v: usize) -> Result<f64> {
    Ok(-weighted_hamming(s, theta, lambda)? - log_psi_weighted(lambda, v)?)
}

/// Log-density of every sequence under the uniform noise component.
pub fn noise_log_density(t: usize, v: usize) -> f64 {
    -(t as f64) * (v as f64).ln()
}

/// `n × G` matrix of component log-densities; the noise column, if any, is
/// last.
pub fn component_loglik_matrix(ds: &SequenceDataset, params: &ComponentParams) -> Array2<f64> {
    let (n, t, v) = (ds.n(), ds.t(), ds.v());
    let k = params.theta.len();
    let g_total = params.g();
    let mut out = Array2::zeros((n, g_total));
    for (g, theta) in params.theta.iter().enumerate() {
        let lambdas = params.precision.component_lambdas(g);
        let norm: f64 = lambdas.iter().map(|&l| log_psi_term(l, v)).sum();
        for i in 0..n {
            let s = ds.seq(i);
            let mut d = 0.0;
            for tt in 0..t {
                if s[tt] != theta[tt] {
                    d += lambdas[tt];
                }
            }
            out[[i, g]] = -d - norm;
        }
    }
    if params.precision.has_noise() {
        out.column_mut(k).fill(noise_log_density(t, v));
    }
    out
}

/// Weighted per-time state tallies `sum_i z_i w_i 1{s_it = j}` for one
/// component, laid out `[t * v + j]`.
fn weighted_tallies(ds: &SequenceDataset, resp: ArrayView1<'_, f64>) -> Vec<f64> {
    let (t, v) = (ds.t(), ds.v());
    let mut tally = vec![0.0; t * v];
    for (i, (&z, &w)) in resp.iter().zip(ds.weights()).enumerate() {
        let zw = z * w;
        if zw == 0.0 {
            continue;
        }
        for (tt, &s) in ds.seq(i).iter().enumerate() {
            tally[tt * v + s as usize] += zw;
        }
    }
    tally
}

/// Weighted modal sequence for one component: at each time point the
/// observed state with the largest `sum_i z_i w_i`. Near-ties (within
/// `1e-12` of the component mass) go to the state with the lowest
/// `tie_rank`.
pub fn estimate_theta(
    ds: &SequenceDataset,
    resp: ArrayView1<'_, f64>,
    tie_rank: &[usize],
) -> Result<Vec<u8>> {
    if resp.len() != ds.n() {
        return Err(MedseqError::LengthMismatch {
            expected: ds.n(),
            found: resp.len(),
        });
    }
    let mass: f64 = resp.iter().zip(ds.weights()).map(|(z, w)| z * w).sum();
    if mass <= 0.0 {
        return Err(MedseqError::InvalidInput(
            "component has zero responsibility mass".into(),
        ));
    }
    let v = ds.v();
    let tally = weighted_tallies(ds, resp);
    let tol = 1e-12 * mass;
    let theta = ds
        .observed_states()
        .iter()
        .enumerate()
        .map(|(tt, states)| {
            let row = &tally[tt * v..(tt + 1) * v];
            let best = states
                .iter()
                .map(|&s| row[s as usize])
                .fold(f64::NEG_INFINITY, f64::max);
            *states
                .iter()
                .filter(|&&s| row[s as usize] >= best - tol)
                .min_by_key(|&&s| tie_rank[s as usize])
                .expect("observed state set is nonempty")
        })
        .collect();
    Ok(theta)
}

/// Closed-form precision update `max(0, log(v-1) + log(num/den - 1))`,
/// evaluated as `log(v-1) + log(num-den) - log(den)` and capped at
/// `lambda_max`. A zero denominator maps to `lambda_max`.
pub fn precision_update(num: f64, den: f64, v: usize, lambda_max: f64) -> f64 {
    if den <= 0.0 {
        return lambda_max;
    }
    if num <= den {
        return 0.0;
    }
    let lambda = ((v - 1) as f64).ln() + (num - den).ln() - den.ln();
    lambda.clamp(0.0, lambda_max)
}

/// Sufficient statistics for the precision CM-steps: component masses
/// `sum_i z_ig w_i` and mismatch masses `sum_i z_ig w_i 1{s_it != theta_gt}`.
#[derive(Debug, Clone)]
pub struct PrecisionStats {
    pub mass: Vec<f64>,
    /// `[g * T + t]`.
    pub mismatch: Vec<f64>,
    pub t: usize,
}

impl PrecisionStats {
    pub fn compute(ds: &SequenceDataset, z: &Array2<f64>, thetas: &[Vec<u8>]) -> Self {
        let t = ds.t();
        let k = thetas.len();
        let mut mass = vec![0.0; k];
        let mut mismatch = vec![0.0; k * t];
        for i in 0..ds.n() {
            let s = ds.seq(i);
            let w = ds.weights()[i];
            for (g, theta) in thetas.iter().enumerate() {
                let zw = z[[i, g]] * w;
                if zw == 0.0 {
                    continue;
                }
                mass[g] += zw;
                let row = &mut mismatch[g * t..(g + 1) * t];
                for tt in 0..t {
                    if s[tt] != theta[tt] {
                        row[tt] += zw;
                    }
                }
            }
        }
        PrecisionStats { mass, mismatch, t }
    }

    fn mismatch_of(&self, g: usize) -> f64 {
        self.mismatch[g * self.t..(g + 1) * self.t].iter().sum()
    }
}

/// Precision CM-step for the given model type.
pub fn estimate_precision(
    model: ModelType,
    ds: &SequenceDataset,
    z: &Array2<f64>,
    thetas: &[Vec<u8>],
    lambda_max: f64,
) -> Result<PrecisionStructure> {
    let stats = PrecisionStats::compute(ds, z, thetas);
    precision_from_stats(model, &stats, ds.v(), lambda_max)
}

/// Precision CM-step from precomputed sufficient statistics.
pub fn precision_from_stats(
    model: ModelType,
    stats: &PrecisionStats,
    v: usize,
    lambda_max: f64,
) -> Result<PrecisionStructure> {
    let k = stats.mass.len();
    let t = stats.t;
    let tf = t as f64;
    let kind = model.precision_kind();
    let upd = |num: f64, den: f64| precision_update(num, den, v, lambda_max);
    let values = if k == 0 {
        Vec::new()
    } else {
        match kind {
            PrecisionKind::Scalar => {
                let num = tf * stats.mass.iter().sum::<f64>();
                let den: f64 = (0..k).map(|g| stats.mismatch_of(g)).sum();
                vec![upd(num, den)]
            }
            PrecisionKind::PerCluster => (0..k)
                .map(|g| upd(tf * stats.mass[g], stats.mismatch_of(g)))
                .collect(),
            PrecisionKind::PerTime => {
                let num: f64 = stats.mass.iter().sum();
                (0..t)
                    .map(|tt| {
                        let den: f64 = (0..k).map(|g| stats.mismatch[g * t + tt]).sum();
                        upd(num, den)
                    })
                    .collect()
            }
            PrecisionKind::PerClusterPerTime => (0..k)
                .flat_map(|g| {
                    let mass = stats.mass[g];
                    (0..t).map(move |tt| (mass, g * t + tt))
                })
                .map(|(mass, idx)| upd(mass, stats.mismatch[idx]))
                .collect(),
        }
    };
    PrecisionStructure::new(kind, k, t, values, model.has_noise())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::enumerate_log_psi;
    use crate::seqdata::Alphabet;
    use approx::assert_abs_diff_eq;
    use ndarray::Array1;

    fn ds(rows: Vec<Vec<u8>>, v: usize, w: Option<Vec<f64>>) -> SequenceDataset {
        let labels: Vec<String> = (0..v).map(|i| format!("S{i}")).collect();
        SequenceDataset::new(Alphabet::new(labels).unwrap(), rows, w, None).unwrap()
    }

    #[test]
    fn admissibility() {
        assert!(ModelType::CC.check_components(1).is_ok());
        assert!(ModelType::CU.check_components(1).is_ok());
        assert!(ModelType::CCN.check_components(1).is_ok());
        assert!(ModelType::UU.check_components(1).is_err());
        let err = ModelType::UCN.check_components(2).unwrap_err().to_string();
        assert!(err.contains("equivalent to CCN"), "{err}");
        assert!(ModelType::UUN.check_components(2).is_err());
        assert!(ModelType::UUN.check_components(3).is_ok());
        assert_eq!("uun".parse::<ModelType>().unwrap(), ModelType::UUN);
    }

    #[test]
    fn uniform_density_when_precision_zero() {
        let d = edm_log_density(&[0, 1, 2], &[2, 2, 2], &[0.0; 3], 3).unwrap();
        assert_abs_diff_eq!(d, -3.0 * 3f64.ln(), epsilon = 1e-14);
        let at_mode = edm_log_density(&[1, 1], &[1, 1], &[0.8, 0.8], 4).unwrap();
        assert_abs_diff_eq!(
            at_mode,
            -2.0 * (3.0 * (-0.8f64).exp() + 1.0).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn density_sums_to_one_by_enumeration() {
        let lambda = [0.3, 1.7, 0.0];
        let theta = [2u8, 0, 1];
        let mut total = 0.0;
        for a in 0..3u8 {
            for b in 0..3u8 {
                for c in 0..3u8 {
                    total += edm_log_density(&[a, b, c], &theta, &lambda, 3).unwrap().exp();
                }
            }
        }
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            enumerate_log_psi(&lambda, 3, &theta).unwrap(),
            log_psi_weighted(&lambda, 3).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn modal_sequence_for_single_component() {
        let d = ds(
            vec![vec![0, 1, 2], vec![0, 1, 1], vec![1, 2, 1], vec![0, 2, 1]],
            3,
            None,
        );
        let ones = Array1::ones(4);
        let theta = estimate_theta(&d, ones.view(), &[0, 1, 2]).unwrap();
        // t=1 is a tie between states 1 and 2; rank favours 1
        assert_eq!(theta, vec![0, 1, 1]);
        let only = Array1::from(vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(estimate_theta(&d, only.view(), &[0, 1, 2]).unwrap(), d.seq(2));
        let zero = Array1::zeros(4);
        assert!(estimate_theta(&d, zero.view(), &[0, 1, 2]).is_err());
    }

    #[test]
    fn weighted_mode_argmax() {
        // A carries z*w = 2.0, B carries 1.5
        let d = ds(vec![vec![0], vec![1]], 2, Some(vec![2.0, 1.5]));
        let z = Array1::from(vec![1.0, 1.0]);
        assert_eq!(estimate_theta(&d, z.view(), &[1, 0]).unwrap(), vec![0]);
    }

    #[test]
    fn ties_follow_rank() {
        let d = ds(vec![vec![0], vec![1]], 2, None);
        let z = Array1::from(vec![1.0, 1.0]);
        assert_eq!(estimate_theta(&d, z.view(), &[0, 1]).unwrap(), vec![0]);
        assert_eq!(estimate_theta(&d, z.view(), &[1, 0]).unwrap(), vec![1]);
    }

    #[test]
    fn precision_boundary_cases() {
        // mean distance T(v-1)/v gives zero: T=3, v=3, n=6
        assert_abs_diff_eq!(precision_update(18.0, 12.0, 3, 1e3), 0.0, epsilon = 1e-14);
        assert_eq!(precision_update(18.0, 20.0, 3, 1e3), 0.0);
        // T=70, v=6, weighted mean distance 35: log(5 * (70/35 - 1))
        let lambda = precision_update(70.0 * 100.0, 35.0 * 100.0, 6, 1e3);
        assert_abs_diff_eq!(lambda, 5f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(lambda, 1.609_437_912_434_100_3, epsilon = 1e-12);
        assert_eq!(precision_update(10.0, 0.0, 4, 1e3), 1e3);
        let tiny = precision_update(10.0, 1e-300, 4, 1e3);
        assert_abs_diff_eq!(tiny, 3f64.ln() + 10f64.ln() + 300.0 * 10f64.ln(), epsilon = 1e-9);
        assert_eq!(precision_update(10.0, 1e-300, 4, 100.0), 100.0);
    }

    #[test]
    fn mean_distance_at_uniform_gives_zero() {
        // G=1, T=2, v=2: theta (0,0); rows disagree half the time on average
        let d = ds(vec![vec![0, 0], vec![1, 1], vec![0, 1], vec![1, 0]], 2, None);
        let z = Array2::ones((4, 1));
        let p = estimate_precision(ModelType::CC, &d, &z, &[vec![0, 0]], 1e3).unwrap();
        assert_eq!(p.values(), &[0.0]);
    }

    #[test]
    fn point_mass_hits_ceiling() {
        let d = ds(vec![vec![0, 1]; 3], 2, None);
        let z = Array2::ones((3, 1));
        for m in [ModelType::CC, ModelType::CU] {
            let p = estimate_precision(m, &d, &z, &[vec![0, 1]], 1e3).unwrap();
            assert!(p.values().iter().all(|&l| l == 1e3));
        }
    }

    #[test]
    fn loglik_matrix_orders_by_distance() {
        let d = ds(vec![vec![0, 0, 0], vec![1, 1, 0]], 2, None);
        let precision =
            PrecisionStructure::constant(PrecisionKind::Scalar, 2, 3, 1.2, true).unwrap();
        let params = ComponentParams {
            theta: vec![vec![0, 0, 0], vec![0, 0, 0]],
            precision,
        };
        let m = component_loglik_matrix(&d, &params);
        assert_eq!(m.ncols(), 3);
        assert_eq!(m.column(0), m.column(1));
        assert!(m[[0, 0]] > m[[1, 0]]);
        assert_abs_diff_eq!(m[[1, 2]], -3.0 * 2f64.ln());
    }
}
