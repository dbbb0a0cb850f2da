//! JSON and CSV artifacts for fitted models, searches and summaries.
//!
//! Reals use the shortest representation that parses back to the same
//! `f64`, so documents round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::ecm::{FittedModel, ModelSpec};
use crate::edm::{ComponentParams, PrecisionStructure};
use crate::error::{MedseqError, Result};
use crate::gating::GatingParams;
use crate::selection::{wdbs, GridEntry, StepRecord};
use crate::seqdata::{sps_encode, SequenceDataset};
use crate::wlbs::BootstrapResult;

/// Serialisable form of a [`FittedModel`]. Responsibilities are stored
/// separately (see [`write_z_csv`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelDocument {
    pub spec: ModelSpec,
    pub alphabet: Vec<String>,
    /// Central sequences as state labels, one per non-noise component.
    pub theta: Vec<Vec<String>>,
    pub theta_sps: Vec<String>,
    pub precision: PrecisionStructure,
    pub gating: GatingParams,
    pub design_names: Vec<String>,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
    pub n_params: usize,
    pub bic: f64,
    pub sample_size: usize,
    pub iterations: usize,
    pub converged: bool,
    pub wdbs: Option<f64>,
    pub wasw: Option<f64>,
    /// Row identifiers matching `map`.
    pub ids: Vec<String>,
    pub map: Vec<usize>,
}

impl ModelDocument {
    /// `ids` and `map` may describe the raw rows when `fit` was estimated on
    /// aggregated data.
    pub fn new(fit: &FittedModel, ds: &SequenceDataset, ids: Vec<String>, map: Vec<usize>, wasw: Option<f64>) -> Self {
        let alphabet = ds.alphabet();
        ModelDocument {
            spec: fit.spec.clone(),
            alphabet: alphabet.labels().to_vec(),
            theta: fit.components.theta.iter().map(|t| alphabet.decode(t)).collect(),
            theta_sps: fit.components.theta.iter().map(|t| sps_encode(t, alphabet)).collect(),
            precision: fit.components.precision.clone(),
            gating: fit.gating.clone(),
            design_names: fit.design_names.clone(),
            loglik: fit.loglik,
            loglik_trace: fit.loglik_trace.clone(),
            n_params: fit.n_params,
            bic: fit.bic,
            sample_size: ds.sample_size(),
            iterations: fit.iterations,
            converged: fit.converged,
            wdbs: fit.wdbs,
            wasw,
            ids,
            map,
        }
    }

    /// Rebuilds the fitted model from this document and responsibilities
    /// `z` for the rows of `ds`.
    pub fn to_fitted(&self, ds: &SequenceDataset, z: Array2<f64>) -> Result<FittedModel> {
        if self.alphabet != ds.alphabet().labels() {
            return Err(MedseqError::Schema(
                "model alphabet does not match the data".into(),
            ));
        }
        if z.nrows() != ds.n() || z.ncols() != self.spec.g {
            return Err(MedseqError::InvalidInput(format!(
                "responsibilities are {}x{}, expected {}x{}",
                z.nrows(),
                z.ncols(),
                ds.n(),
                self.spec.g
            )));
        }
        let theta = self
            .theta
            .iter()
            .map(|t| {
                let labels: Vec<&str> = t.iter().map(String::as_str).collect();
                ds.alphabet().encode(&labels)
            })
            .collect::<Result<Vec<_>>>()?;
        let map = (0..z.nrows())
            .map(|i| crate::util::argmax(z.row(i).as_slice().expect("row-major")))
            .collect();
        let wdbs = (self.spec.g >= 2).then(|| wdbs(&z, ds.weights())).transpose()?;
        Ok(FittedModel {
            spec: self.spec.clone(),
            components: ComponentParams {
                theta,
                precision: self.precision.clone(),
            },
            gating: self.gating.clone(),
            design_names: self.design_names.clone(),
            z,
            map,
            loglik_trace: self.loglik_trace.clone(),
            loglik: self.loglik,
            n_params: self.n_params,
            bic: self.bic,
            iterations: self.iterations,
            converged: self.converged,
            wdbs,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| MedseqError::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| MedseqError::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| MedseqError::io(path, e))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let f = File::create(path).map_err(|e| MedseqError::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn flush(mut w: csv::Writer<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| MedseqError::io(path, e))
}

/// Shortest round-trip text for `x`, in exponent form when tiny or huge.
pub fn real(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn opt_real(x: &Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(T::to_string).unwrap_or_default()
}

/// Component column names; the noise component is called `Noise`.
pub fn component_names(g: usize, has_noise: bool) -> Vec<String> {
    (0..g)
        .map(|c| {
            if has_noise && c == g - 1 {
                "Noise".to_string()
            } else {
                format!("Cluster{}", c + 1)
            }
        })
        .collect()
}

/// Writes `z` with one row per id.
pub fn write_z_csv(path: impl AsRef<Path>, ids: &[String], z: &Array2<f64>, has_noise: bool) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["id".to_string()];
    header.extend(component_names(z.ncols(), has_noise));
    w.write_record(&header)?;
    for (id, row) in ids.iter().zip(z.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|&x| real(x)));
        w.write_record(&rec)?;
    }
    flush(w, path)
}

/// Reads a responsibility matrix written by [`write_z_csv`].
pub fn read_z_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Array2<f64>)> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| MedseqError::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let header = r.headers()?.clone();
    let g = header.len() - 1;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        for c in 1..=g {
            values.push(rec[c].parse::<f64>().map_err(|e| MedseqError::Cell {
                row: row + 2,
                column: header[c].to_string(),
                message: e.to_string(),
            })?);
        }
    }
    let z = Array2::from_shape_vec((ids.len(), g), values)
        .map_err(|e| MedseqError::InvalidInput(e.to_string()))?;
    Ok((ids, z))
}

/// `T × v` state distribution with a time column.
pub fn write_state_distribution(path: impl AsRef<Path>, ds: &SequenceDataset, times: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let mut header = vec!["time".to_string()];
    header.extend(ds.alphabet().labels().iter().cloned());
    w.write_record(&header)?;
    for (t, row) in ds.state_distribution().rows().into_iter().enumerate() {
        let mut rec = vec![times[t].clone()];
        rec.extend(row.iter().map(|&x| real(x)));
        w.write_record(&rec)?;
    }
    flush(w, path)
}

pub fn write_entropy(path: impl AsRef<Path>, ds: &SequenceDataset, times: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["time", "entropy"])?;
    for (t, e) in ds.transversal_entropy().iter().enumerate() {
        w.write_record([times[t].clone(), real(*e)])?;
    }
    flush(w, path)
}

/// Groups of identical sequences (size at least 2), largest first.
pub fn write_duplicates(path: impl AsRef<Path>, ds: &SequenceDataset) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["sequence", "size", "weight"])?;
    let mut groups: Vec<_> = ds.duplicate_groups().into_iter().filter(|g| g.size >= 2).collect();
    groups.sort_by_key(|g| std::cmp::Reverse(g.size));
    for g in groups {
        w.write_record([sps_encode(&g.sequence, ds.alphabet()), g.size.to_string(), real(g.weight)])?;
    }
    flush(w, path)
}

pub fn write_weight_summary(path: impl AsRef<Path>, ds: &SequenceDataset) -> Result<()> {
    let path = path.as_ref();
    let raw = ds.raw_weights();
    let w = ds.weights();
    let stat = |x: &[f64]| {
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (x.iter().sum::<f64>(), min, max)
    };
    let (rs, rmin, rmax) = stat(raw);
    let (ns, nmin, nmax) = stat(w);
    let mut out = csv_writer(path)?;
    out.write_record(["quantity", "raw", "normalised"])?;
    out.write_record(["n", &ds.n().to_string(), &ds.n().to_string()])?;
    out.write_record(["sum", &real(rs), &real(ns)])?;
    out.write_record(["min", &real(rmin), &real(nmin)])?;
    out.write_record(["max", &real(rmax), &real(nmax)])?;
    flush(out, path)
}

pub fn write_grid(path: impl AsRef<Path>, entries: &[GridEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record([
        "G", "model", "covariates", "gating", "noise_gating", "loglik", "n_params", "BIC", "iterations", "converged", "error",
    ])?;
    for e in entries {
        w.write_record([
            e.g.to_string(),
            e.model.to_string(),
            e.covariates.join(";"),
            e.gating.to_string(),
            opt(&e.noise_gating),
            opt_real(&e.loglik),
            opt(&e.n_params),
            opt_real(&e.bic),
            opt(&e.iterations),
            opt(&e.converged),
            e.error.clone().unwrap_or_default(),
        ])?;
    }
    flush(w, path)
}

pub fn write_stepwise(path: impl AsRef<Path>, steps: &[StepRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record([
        "step", "action", "G", "model", "covariates", "noise_gating", "n_params", "BIC", "candidates", "accepted",
    ])?;
    for s in steps {
        w.write_record([
            s.step.to_string(),
            s.action.clone(),
            s.g.to_string(),
            s.model.to_string(),
            s.covariates.join(";"),
            opt(&s.noise_gating),
            s.n_params.to_string(),
            real(s.bic),
            s.candidates.to_string(),
            s.accepted.to_string(),
        ])?;
    }
    flush(w, path)
}

/// Row and column labels for a gating table (see
/// [`crate::wlbs::gating_table`]).
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientLayout {
    pub terms: Vec<String>,
    pub components: Vec<String>,
    /// Central sequence of each component as an SPS string; "Noise" for
    /// the noise component.
    pub labels: Vec<String>,
    /// Columns before this index are reference columns and are not reported.
    pub first_column: usize,
}

impl CoefficientLayout {
    pub fn new(spec: &ModelSpec, gating: &GatingParams, design_names: &[String], theta_sps: &[String]) -> Self {
        let names = component_names(spec.g, spec.model.has_noise());
        let mut labels = theta_sps.to_vec();
        labels.resize(spec.g, "Noise".into());
        match gating {
            GatingParams::Fixed { .. } => CoefficientLayout {
                terms: vec!["tau".into()],
                components: names,
                labels,
                first_column: 0,
            },
            GatingParams::Logistic { beta, .. } => CoefficientLayout {
                terms: design_names.to_vec(),
                components: names[..beta.ncols()].to_vec(),
                labels: labels[..beta.ncols()].to_vec(),
                first_column: 1,
            },
        }
    }
}

/// Coefficient table in long form, one row per (component, term).
pub fn write_coefficients(
    path: impl AsRef<Path>,
    estimate: &Array2<f64>,
    se: Option<&Array2<f64>>,
    layout: &CoefficientLayout,
) -> Result<()> {
    let path = path.as_ref();
    if estimate.nrows() != layout.terms.len() || estimate.ncols() != layout.components.len() {
        return Err(MedseqError::LengthMismatch {
            expected: layout.terms.len() * layout.components.len(),
            found: estimate.len(),
        });
    }
    let mut w = csv_writer(path)?;
    w.write_record(["component", "sps", "term", "estimate", "se"])?;
    for c in layout.first_column..estimate.ncols() {
        for (j, term) in layout.terms.iter().enumerate() {
            w.write_record([
                layout.components[c].clone(),
                layout.labels[c].clone(),
                term.clone(),
                real(estimate[[j, c]]),
                se.map(|s| real(s[[j, c]])).unwrap_or_default(),
            ])?;
        }
    }
    flush(w, path)
}

/// WLBS standard errors (approximate under stratified designs).
pub fn write_bootstrap(path: impl AsRef<Path>, result: &BootstrapResult, layout: &CoefficientLayout) -> Result<()> {
    write_coefficients(path, &result.estimate, Some(&result.se), layout)
}

/// Every successful replicate in long form.
pub fn write_draws(path: impl AsRef<Path>, result: &BootstrapResult, layout: &CoefficientLayout) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(["draw", "component", "sps", "term", "value"])?;
    for (b, d) in result.draws.iter().enumerate() {
        for c in layout.first_column..d.ncols() {
            for (j, term) in layout.terms.iter().enumerate() {
                w.write_record([
                    (b + 1).to_string(),
                    layout.components[c].clone(),
                    layout.labels[c].clone(),
                    term.clone(),
                    real(d[[j, c]]),
                ])?;
            }
        }
    }
    flush(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecm::fit;
    use crate::edm::ModelType;
    use crate::seqdata::Alphabet;

    #[test]
    fn document_round_trip() {
        let alphabet = Alphabet::new(["A", "B", "C"]).unwrap();
        let rows = vec![
            vec![0, 0, 1, 2],
            vec![0, 0, 1, 1],
            vec![2, 2, 2, 1],
            vec![2, 1, 2, 2],
            vec![0, 0, 0, 2],
            vec![2, 2, 1, 1],
        ];
        let ds = SequenceDataset::new(alphabet, rows, Some(vec![1.0, 0.3, 2.0, 1.1, 0.7, 1.4]), None).unwrap();
        let f = fit(&ds, &crate::ecm::ModelSpec::new(ModelType::UCN, 3)).unwrap();
        let doc = ModelDocument::new(&f, &ds, ds.ids().to_vec(), f.map.clone(), None);
        let dir = tempfile::tempdir().unwrap();
        doc.write(dir.path().join("model.json")).unwrap();
        write_z_csv(dir.path().join("z.csv"), ds.ids(), &f.z, true).unwrap();
        let back = ModelDocument::read(dir.path().join("model.json")).unwrap();
        assert_eq!(back, doc);
        let (ids, z) = read_z_csv(dir.path().join("z.csv")).unwrap();
        assert_eq!(ids, ds.ids());
        assert_eq!(z, f.z);
        let refit = back.to_fitted(&ds, z).unwrap();
        assert_eq!(refit.wdbs, f.wdbs);
        assert_eq!(refit.map, f.map);
        assert_eq!(refit.components, f.components);
    }
}
