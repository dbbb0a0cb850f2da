mod common;

use common::*;
use medseq::distance::hamming;
use medseq::ecm::{e_step, fit, fit_with_init, ModelSpec};
use medseq::edm::{edm_log_density, ComponentParams, ModelType, PrecisionKind, PrecisionStructure};
use medseq::gating::{GatingConfig, GatingParams, NoiseGating};
use medseq::selection::{bic, count_params, dbs, stepwise, DBS_EPS};
use medseq::seqdata::{CovariateValues, Covariates, SequenceDataset};
use medseq::sim::{separated_thetas, simulate_cc};
use medseq::util::adjusted_rand_index;
use medseq::wlbs::dirichlet_scale;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn dataset_strategy() -> impl Strategy<Value = SequenceDataset> {
    (2usize..5, 1usize..6, 2usize..40, any::<u64>()).prop_map(|(v, t, n, seed)| {
        let mut r = rng(seed);
        let rows = (0..n).map(|_| (0..t).map(|_| r.random_range(0..v) as u8).collect()).collect();
        let weights = random_weights(n, &mut r);
        SequenceDataset::new(alphabet(v), rows, Some(weights), None).unwrap()
    })
}

/// Random valid parameters for `model` with `g` components on `ds`.
fn random_params(model: ModelType, g: usize, ds: &SequenceDataset, seed: u64) -> ComponentParams {
    let mut r = rng(seed);
    let k = model.edm_components(g);
    let theta = (0..k)
        .map(|_| (0..ds.t()).map(|_| r.random_range(0..ds.v()) as u8).collect())
        .collect();
    let len = match model.precision_kind() {
        _ if k == 0 => 0,
        PrecisionKind::Scalar => 1,
        PrecisionKind::PerCluster => k,
        PrecisionKind::PerTime => ds.t(),
        PrecisionKind::PerClusterPerTime => k * ds.t(),
    };
    let values = (0..len).map(|_| r.random_range(0.0..3.0)).collect();
    let precision = PrecisionStructure::new(model.precision_kind(), k, ds.t(), values, model.has_noise()).unwrap();
    ComponentParams { theta, precision }
}

fn random_tau(g: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let raw: Vec<f64> = (0..g).map(|_| r.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Parameter count written out per model type: central sequences contribute
/// `sum_t (v_t - 1)` each, then the precision block, then the gating.
fn count_by_table(model: ModelType, g: usize, t: usize, observed: &[usize], gating_free: usize) -> usize {
    let s: usize = observed.iter().map(|v| v - 1).sum();
    let table = match model {
        ModelType::CC => g * s + 1,
        ModelType::UC => g * s + g,
        ModelType::CU => g * s + t,
        ModelType::UU => g * s + g * t,
        ModelType::CCN if g == 1 => 0,
        ModelType::CCN => (g - 1) * s + 1,
        ModelType::UCN => (g - 1) * s + (g - 1),
        ModelType::CUN if g == 1 => 0,
        ModelType::CUN => (g - 1) * s + t,
        ModelType::UUN => (g - 1) * s + (g - 1) * t,
    };
    table + gating_free
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn weights_normalise_to_n_and_ignore_scale(ds in dataset_strategy(), power in -20i32..20, c in 0.01f64..100.0) {
        let n = ds.n() as f64;
        prop_assert!((ds.weights().iter().sum::<f64>() - n).abs() < 1e-9);
        // Powers of two scale exactly, so normalisation must too.
        let exact = ds.with_weights(ds.raw_weights().iter().map(|w| w * 2f64.powi(power)).collect()).unwrap();
        prop_assert_eq!(exact.weights(), ds.weights());
        let scaled = ds.with_weights(ds.raw_weights().iter().map(|w| w * c).collect()).unwrap();
        for (a, b) in scaled.weights().iter().zip(ds.weights()) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn aggregation_preserves_pseudo_loglik(
        ds in dataset_strategy(),
        model_index in 0usize..8,
        g in 1usize..5,
        seed in any::<u64>(),
    ) {
        let model = ModelType::ALL[model_index];
        prop_assume!(model.check_components(g).is_ok());
        let params = random_params(model, g, &ds, seed);
        let gating = GatingParams::Fixed { tau: random_tau(g, seed ^ 1) };
        let (agg, map) = ds.aggregate_duplicates(false);
        prop_assert!((agg.weights().iter().sum::<f64>() - ds.n() as f64).abs() < 1e-9);
        for (i, &u) in map.unique_index_of.iter().enumerate() {
            prop_assert_eq!(ds.seq(i), agg.seq(u));
        }
        let (_, raw) = e_step(&ds, &params, &gating, None).unwrap();
        let (_, merged) = e_step(&agg, &params, &gating, None).unwrap();
        prop_assert!((raw - merged).abs() < 1e-8, "raw {} merged {}", raw, merged);
    }

    #[test]
    fn state_distribution_rows_sum_to_one(ds in dataset_strategy()) {
        let dist = ds.state_distribution();
        for row in dist.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&p| p >= 0.0));
        }
        let max = (ds.v() as f64).ln();
        for h in ds.transversal_entropy() {
            prop_assert!((-1e-12..=max + 1e-12).contains(&h));
        }
    }

    #[test]
    fn common_cost_is_absorbed_by_precision(
        lambda in prop::collection::vec(0.0f64..4.0, 1..=4),
        v in 2usize..=3,
        c in 0.1f64..10.0,
        seed in any::<u64>(),
    ) {
        let t = lambda.len();
        let mut r = rng(seed);
        let theta: Vec<u8> = (0..t).map(|_| r.random_range(0..v) as u8).collect();
        let s: Vec<u8> = (0..t).map(|_| r.random_range(0..v) as u8).collect();
        // Density with every mismatch costing `c` and precisions `lambda / c`.
        let energy = |x: &[u8]| -> f64 {
            x.iter().zip(&theta).zip(&lambda).map(|((a, b), l)| if a == b { 0.0 } else { (l / c) * c }).sum()
        };
        let log_norm = all_sequences(t, v).iter().map(|x| (-energy(x)).exp()).sum::<f64>().ln();
        let scaled = -energy(&s) - log_norm;
        let direct = edm_log_density(&s, &theta, &lambda, v).unwrap();
        prop_assert!((scaled - direct).abs() < 1e-10);
    }

    #[test]
    fn predicted_proportions_are_stochastic_and_shift_free(
        n in 1usize..30,
        p in 1usize..4,
        g in 2usize..5,
        noise in proptest::option::of(0.01f64..0.5),
        seed in any::<u64>(),
    ) {
        let mut r = rng(seed);
        let x = Array2::from_shape_fn((n, p), |(_, j)| if j == 0 { 1.0 } else { r.random_range(-2.0..2.0) });
        let mut beta = Array2::from_shape_fn((p, g), |(_, k)| if k == 0 { 0.0 } else { r.random_range(-3.0..3.0) });
        let gating = GatingParams::Logistic { beta: beta.clone(), tau0: noise };
        let tau = gating.predict_tau(Some(x.view()), n).unwrap();
        let columns = g + usize::from(noise.is_some());
        prop_assert_eq!(tau.ncols(), columns);
        for row in tau.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
        if let Some(t0) = noise {
            for i in 0..n {
                prop_assert!((tau[[i, columns - 1]] - t0).abs() < 1e-12);
            }
        }
        let shift: Vec<f64> = (0..p).map(|_| r.random_range(-5.0..5.0)).collect();
        for k in 0..g {
            for j in 0..p {
                beta[[j, k]] += shift[j];
            }
        }
        let shifted = GatingParams::Logistic { beta, tau0: noise }.predict_tau(Some(x.view()), n).unwrap();
        for (a, b) in tau.iter().zip(shifted.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
        let free = GatingParams::Fixed { tau: random_tau(g, seed) }.predict_tau(None, n).unwrap();
        for row in free.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn count_params_follows_the_table(
        model_index in 0usize..8,
        g in 1usize..=5,
        observed in prop::collection::vec(1usize..=3, 1..=4),
        r in 0usize..3,
        ngn in any::<bool>(),
    ) {
        let model = ModelType::ALL[model_index];
        prop_assume!(model.check_components(g).is_ok());
        let t = observed.len();
        let n = 6;
        // Row i shows state i mod v_t at time t, so exactly v_t states appear.
        let rows: Vec<Vec<u8>> = (0..n).map(|i| observed.iter().map(|&vt| (i % vt) as u8).collect()).collect();
        let covs = Covariates::encode(
            n,
            (0..r).map(|j| (format!("x{j}"), CovariateValues::Numeric((0..n).map(|i| ((i * (j + 2)) % 5) as f64).collect()))).collect(),
        ).unwrap();
        let ds = SequenceDataset::new(alphabet(3), rows, None, Some(covs)).unwrap();
        prop_assert_eq!(ds.observed_counts(), observed.clone());

        let free = ModelSpec::new(model, g);
        prop_assert_eq!(count_params(&free, &ds).unwrap(), count_by_table(model, g, t, &observed, g - 1));

        let noise_gating = if ngn { NoiseGating::NGN } else { NoiseGating::GN };
        let names: Vec<String> = (0..r).map(|j| format!("x{j}")).collect();
        let gated = ModelSpec::new(model, g).with_gating(GatingConfig::covariates(names, noise_gating));
        if gated.check().is_ok() {
            let gating = if model.has_noise() && ngn { (r + 1) * (g - 2) + 1 } else { (r + 1) * (g - 1) };
            prop_assert_eq!(count_params(&gated, &ds).unwrap(), count_by_table(model, g, t, &observed, gating));
        }
    }

    #[test]
    fn extra_parameter_without_gain_lowers_bic(loglik in -1e5f64..0.0, k in 0usize..5000, n in 2usize..100_000) {
        prop_assert!(bic(loglik, k + 1, n) < bic(loglik, k, n));
    }

    #[test]
    fn density_silhouettes_lie_in_unit_interval(
        rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 2..30),
    ) {
        let z = Array2::from_shape_fn((rows.len(), 3), |(i, g)| rows[i][g] / rows[i].iter().sum::<f64>());
        let d = dbs(&z, DBS_EPS).unwrap();
        prop_assert!(d.iter().all(|x| (0.0..=1.0).contains(x)));
        let ratio = |i: usize| {
            let mut p: Vec<f64> = z.row(i).to_vec();
            p.sort_by(|a, b| b.total_cmp(a));
            (p[0] / p[1]).ln()
        };
        let top = (0..z.nrows()).map(ratio).fold(0.0f64, f64::max);
        let at_top = (0..z.nrows()).filter(|&i| ratio(i) == top).count();
        let ones = d.iter().filter(|&&x| x == 1.0).count();
        if top > 0.0 {
            prop_assert_eq!(ones, at_top);
        }
    }

    #[test]
    fn replicate_weights_sum_to_n(n in 1usize..500, seed in any::<u64>(), b in 0u64..1000) {
        let s = dirichlet_scale(n, seed, b);
        prop_assert!((s.iter().sum::<f64>() - n as f64).abs() < 1e-9 * n as f64);
        prop_assert!(s.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn hamming_counts_mismatches(a in prop::collection::vec(0u8..5, 0..20), flips in prop::collection::vec(any::<bool>(), 20)) {
        let b: Vec<u8> = a.iter().zip(&flips).map(|(&x, &f)| if f { (x + 1) % 5 } else { x }).collect();
        let expected = flips.iter().take(a.len()).filter(|&&f| f).count() as u32;
        prop_assert_eq!(hamming(&a, &b).unwrap(), expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn e_step_ignores_sampling_weights(
        model_index in 0usize..8,
        g in 1usize..4,
        seed in any::<u64>(),
    ) {
        let model = ModelType::ALL[model_index];
        prop_assume!(model.check_components(g).is_ok());
        let ds = battery_dataset(40, 4, 3, true, seed);
        let params = random_params(model, g, &ds, seed);
        let gating = GatingParams::Fixed { tau: random_tau(g, seed) };
        let other = ds.with_weights(random_weights(ds.n(), &mut rng(seed ^ 7))).unwrap();
        let (z1, _) = e_step(&ds, &params, &gating, None).unwrap();
        let (z2, _) = e_step(&other, &params, &gating, None).unwrap();
        prop_assert_eq!(z1, z2);
    }

    #[test]
    fn seeded_fits_are_reproducible(model_index in 0usize..8, g in 1usize..4, seed in 0u64..1000) {
        let model = ModelType::ALL[model_index];
        prop_assume!(model.check_components(g).is_ok());
        let ds = battery_dataset(45, 5, 3, true, seed);
        let spec = ModelSpec::new(model, g).with_seed(seed);
        match (fit(&ds, &spec), fit(&ds, &spec)) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.loglik.to_bits(), b.loglik.to_bits());
                prop_assert_eq!(&a.loglik_trace, &b.loglik_trace);
                prop_assert_eq!(&a.components, &b.components);
                prop_assert_eq!(&a.gating, &b.gating);
                prop_assert_eq!(&a.z, &b.z);
                prop_assert_eq!(&a.map, &b.map);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "one run failed and the other did not"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn stepwise_accepts_only_improvements(seed in 0u64..1000) {
        let ds = battery_dataset(60, 5, 3, true, seed);
        let pool = vec!["x".to_string(), "b".to_string()];
        let trace = stepwise(&ds, &pool, &ModelSpec::new(ModelType::CC, 2).with_seed(seed)).unwrap();
        let accepted: Vec<f64> = trace.steps.iter().filter(|s| s.accepted).map(|s| s.bic).collect();
        prop_assert!(accepted.windows(2).all(|w| w[1] > w[0]), "{:?}", accepted);
        prop_assert!(trace.final_bic() >= accepted[0]);
        prop_assert_eq!(trace.final_bic(), *accepted.last().unwrap());
    }

    #[test]
    fn replicate_fits_keep_component_labels(seed in 0u64..1000) {
        let thetas = separated_thetas(3, 12, 4, seed);
        let sim = simulate_cc(150, &thetas, 2.5, &[0.3, 0.3, 0.4], 4, seed).unwrap();
        let original = fit(&sim.data, &ModelSpec::new(ModelType::CC, 3).with_seed(seed)).unwrap();
        for b in 0..5 {
            let scale = dirichlet_scale(sim.data.n(), seed, b);
            let w = sim.data.weights().iter().zip(&scale).map(|(w, s)| w * s).collect();
            let data = sim.data.with_weights(w).unwrap();
            let refit = fit_with_init(&data, &original.spec, original.z.clone()).unwrap();
            prop_assert!(adjusted_rand_index(&refit.map, &original.map) > 0.8);
            // Same labels, not merely the same partition.
            let agree = refit.map.iter().zip(&original.map).filter(|(a, b)| a == b).count();
            prop_assert!(agree as f64 > 0.9 * sim.data.n() as f64);
        }
    }
}
