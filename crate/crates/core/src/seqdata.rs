//! Ingestion, encoding and summaries of equal-length categorical sequences.
//!
//! A [`SequenceDataset`] stores the encoded states row-major (`n × T`), the
//! sampling weights normalised so that they sum to the sample size, and an
//! optional block of numeric covariates. Categorical covariates are expanded
//! into treatment-coded indicator columns at load time, with the
//! lexicographically first level as the baseline.

use std::collections::{BTreeSet, HashMap};
use std::ops::Range;
use std::path::Path;

use ndarray::Array2;

use crate::error::{MedseqError, Result};

/// Ordered set of state labels; index `j` encodes `labels[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<String>,
}

impl Alphabet {
    /// Builds an alphabet from labels. Labels are sorted lexicographically.
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        let labels: Vec<String> = set.into_iter().collect();
        if labels.len() < 2 {
            return Err(MedseqError::InvalidInput(format!(
                "alphabet needs at least 2 states, found {}",
                labels.len()
            )));
        }
        if labels.len() > u8::MAX as usize {
            return Err(MedseqError::TooLarge(format!(
                "alphabet of {} states exceeds {}",
                labels.len(),
                u8::MAX
            )));
        }
        Ok(Alphabet { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: u8) -> &str {
        &self.labels[index as usize]
    }

    pub fn index_of(&self, label: &str) -> Option<u8> {
        self.labels
            .binary_search_by(|l| l.as_str().cmp(label))
            .ok()
            .map(|i| i as u8)
    }

    pub fn encode(&self, labels: &[&str]) -> Result<Vec<u8>> {
        labels
            .iter()
            .map(|l| {
                self.index_of(l)
                    .ok_or_else(|| MedseqError::InvalidInput(format!("unknown state '{l}'")))
            })
            .collect()
    }

    pub fn decode(&self, seq: &[u8]) -> Vec<String> {
        seq.iter().map(|&s| self.label(s).to_string()).collect()
    }
}

/// Numeric covariate block. Each source covariate owns a contiguous range of
/// design columns (one column for numeric covariates, `levels - 1` indicator
/// columns for categorical ones).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Covariates {
    names: Vec<String>,
    groups: Vec<Range<usize>>,
    columns: Vec<String>,
    values: Array2<f64>,
}

/// Raw values for one covariate before encoding.
#[derive(Debug, Clone)]
pub enum CovariateValues {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Covariates {
    pub fn empty(n: usize) -> Self {
        Covariates {
            names: Vec::new(),
            groups: Vec::new(),
            columns: Vec::new(),
            values: Array2::zeros((n, 0)),
        }
    }

    /// Encodes raw covariates; categorical columns are treatment coded.
    pub fn encode(n: usize, raw: Vec<(String, CovariateValues)>) -> Result<Self> {
        let mut names = Vec::new();
        let mut groups = Vec::new();
        let mut columns = Vec::new();
        let mut data: Vec<Vec<f64>> = Vec::new();
        for (name, values) in raw {
            if names.contains(&name) {
                return Err(MedseqError::Schema(format!("duplicate covariate '{name}'")));
            }
            let start = columns.len();
            match values {
                CovariateValues::Numeric(v) => {
                    if v.len() != n {
                        return Err(MedseqError::LengthMismatch {
                            expected: n,
                            found: v.len(),
                        });
                    }
                    columns.push(name.clone());
                    data.push(v);
                }
                CovariateValues::Categorical(v) => {
                    if v.len() != n {
                        return Err(MedseqError::LengthMismatch {
                            expected: n,
                            found: v.len(),
                        });
                    }
                    let levels: BTreeSet<&str> = v.iter().map(String::as_str).collect();
                    for level in levels.iter().skip(1) {
                        columns.push(format!("{name}{level}"));
                        data.push(
                            v.iter()
                                .map(|x| if x == level { 1.0 } else { 0.0 })
                                .collect(),
                        );
                    }
                }
            }
            groups.push(start..columns.len());
            names.push(name);
        }
        let mut values = Array2::zeros((n, columns.len()));
        for (j, col) in data.iter().enumerate() {
            for (i, &x) in col.iter().enumerate() {
                values[[i, j]] = x;
            }
        }
        Ok(Covariates {
            names,
            groups,
            columns,
            values,
        })
    }

    /// Source covariate names (before indicator expansion).
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Design column names (after indicator expansion).
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    fn group(&self, name: &str) -> Option<Range<usize>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.groups[k].clone())
    }

    fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Array2::zeros((rows.len(), self.columns.len()));
        for (new, &old) in rows.iter().enumerate() {
            values.row_mut(new).assign(&self.values.row(old));
        }
        Covariates {
            names: self.names.clone(),
            groups: self.groups.clone(),
            columns: self.columns.clone(),
            values,
        }
    }
}

/// Encoded sequences plus weights and covariates.
#[derive(Debug, Clone)]
pub struct SequenceDataset {
    alphabet: Alphabet,
    t: usize,
    states: Vec<u8>,
    ids: Vec<String>,
    weights: Vec<f64>,
    raw_weights: Vec<f64>,
    covariates: Covariates,
    observed: Vec<Vec<u8>>,
    sample_size: usize,
}

impl SequenceDataset {
    /// Builds a dataset from encoded rows. Missing weights default to 1;
    /// weights are normalised to sum to the number of rows.
    pub fn new(
        alphabet: Alphabet,
        rows: Vec<Vec<u8>>,
        raw_weights: Option<Vec<f64>>,
        covariates: Option<Covariates>,
    ) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(MedseqError::InvalidInput("dataset has no rows".into()));
        }
        let t = rows[0].len();
        if t == 0 {
            return Err(MedseqError::InvalidInput("sequences have length 0".into()));
        }
        let v = alphabet.len();
        let mut states = Vec::with_capacity(n * t);
        for row in &rows {
            if row.len() != t {
                return Err(MedseqError::LengthMismatch {
                    expected: t,
                    found: row.len(),
                });
            }
            if let Some(&bad) = row.iter().find(|&&s| s as usize >= v) {
                return Err(MedseqError::InvalidInput(format!(
                    "state index {bad} outside alphabet of size {v}"
                )));
            }
            states.extend_from_slice(row);
        }
        let raw_weights = raw_weights.unwrap_or_else(|| vec![1.0; n]);
        let covariates = covariates.unwrap_or_else(|| Covariates::empty(n));
        if covariates.values.nrows() != n {
            return Err(MedseqError::LengthMismatch {
                expected: n,
                found: covariates.values.nrows(),
            });
        }
        let ids = (1..=n).map(|i| i.to_string()).collect();
        Self::assemble(alphabet, t, states, ids, raw_weights, covariates, n)
    }

    fn assemble(
        alphabet: Alphabet,
        t: usize,
        states: Vec<u8>,
        ids: Vec<String>,
        raw_weights: Vec<f64>,
        covariates: Covariates,
        sample_size: usize,
    ) -> Result<Self> {
        let n = ids.len();
        if raw_weights.len() != n {
            return Err(MedseqError::LengthMismatch {
                expected: n,
                found: raw_weights.len(),
            });
        }
        if raw_weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MedseqError::InvalidInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = raw_weights.iter().sum();
        if total <= 0.0 {
            return Err(MedseqError::InvalidInput("weights sum to zero".into()));
        }
        let scale = sample_size as f64 / total;
        let weights = raw_weights.iter().map(|w| w * scale).collect();
        let observed = observed_states(&states, n, t);
        Ok(SequenceDataset {
            alphabet,
            t,
            states,
            ids,
            weights,
            raw_weights,
            covariates,
            observed,
            sample_size,
        })
    }

    /// Number of rows (unique patterns after aggregation).
    pub fn n(&self) -> usize {
        self.ids.len()
    }

    /// Sequence length.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Alphabet size.
    pub fn v(&self) -> usize {
        self.alphabet.len()
    }

    /// Number of original observations; normalised weights sum to this.
    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn seq(&self, i: usize) -> &[u8] {
        &self.states[i * self.t..(i + 1) * self.t]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.states.chunks_exact(self.t)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn raw_weights(&self) -> &[f64] {
        &self.raw_weights
    }

    pub fn covariates(&self) -> &Covariates {
        &self.covariates
    }

    /// States observed at each time point, sorted.
    pub fn observed_states(&self) -> &[Vec<u8>] {
        &self.observed
    }

    /// `v_t`, the number of distinct states observed at each time point.
    pub fn observed_counts(&self) -> Vec<usize> {
        self.observed.iter().map(Vec::len).collect()
    }

    /// Replaces the sampling weights (renormalised to the sample size).
    pub fn with_weights(&self, raw_weights: Vec<f64>) -> Result<Self> {
        Self::assemble(
            self.alphabet.clone(),
            self.t,
            self.states.clone(),
            self.ids.clone(),
            raw_weights,
            self.covariates.clone(),
            self.sample_size,
        )
    }

    /// Design matrix `(1, x_i)` for the named source covariates, with the
    /// matching column names (first is `(Intercept)`).
    pub fn design(&self, covariates: &[String]) -> Result<(Array2<f64>, Vec<String>)> {
        let mut cols = Vec::new();
        for name in covariates {
            let group = self
                .covariates
                .group(name)
                .ok_or_else(|| MedseqError::Schema(format!("unknown covariate '{name}'")))?;
            cols.extend(group);
        }
        let n = self.n();
        let mut x = Array2::zeros((n, cols.len() + 1));
        x.column_mut(0).fill(1.0);
        let mut names = vec!["(Intercept)".to_string()];
        for (k, &c) in cols.iter().enumerate() {
            x.column_mut(k + 1).assign(&self.covariates.values.column(c));
            names.push(self.covariates.columns[c].clone());
        }
        Ok((x, names))
    }

    /// Number of non-intercept design columns for the named covariates.
    pub fn design_width(&self, covariates: &[String]) -> Result<usize> {
        covariates.iter().try_fold(0, |acc, name| {
            self.covariates
                .group(name)
                .map(|g| acc + g.len())
                .ok_or_else(|| MedseqError::Schema(format!("unknown covariate '{name}'")))
        })
    }

    /// Keeps only the named covariates.
    pub fn select_covariates(&self, names: &[String]) -> Result<Self> {
        let mut raw = Vec::new();
        for name in names {
            let group = self
                .covariates
                .group(name)
                .ok_or_else(|| MedseqError::Schema(format!("unknown covariate '{name}'")))?;
            raw.push((name.clone(), group));
        }
        let mut out = self.clone();
        let mut columns = Vec::new();
        let mut groups = Vec::new();
        let mut idx = Vec::new();
        for (_, g) in &raw {
            let start = columns.len();
            for c in g.clone() {
                columns.push(self.covariates.columns[c].clone());
                idx.push(c);
            }
            groups.push(start..columns.len());
        }
        let mut values = Array2::zeros((self.n(), idx.len()));
        for (k, &c) in idx.iter().enumerate() {
            values.column_mut(k).assign(&self.covariates.values.column(c));
        }
        out.covariates = Covariates {
            names: raw.into_iter().map(|(n, _)| n).collect(),
            groups,
            columns,
            values,
        };
        Ok(out)
    }

    /// Restricts every sequence to the inclusive time range `[first, last]`.
    pub fn trim_time_range(&self, first: usize, last: usize) -> Result<Self> {
        if first > last || last >= self.t {
            return Err(MedseqError::InvalidInput(format!(
                "time range [{first}, {last}] invalid for T={}",
                self.t
            )));
        }
        let t = last - first + 1;
        let mut states = Vec::with_capacity(self.n() * t);
        for row in self.rows() {
            states.extend_from_slice(&row[first..=last]);
        }
        let observed = observed_states(&states, self.n(), t);
        Ok(SequenceDataset {
            t,
            states,
            observed,
            ..self.clone()
        })
    }

    /// Merges rows that are identical in sequence (and covariate pattern when
    /// `include_covariates`). Unique rows keep first-occurrence order and carry
    /// the summed sampling weights. Covariates are dropped when they are not
    /// part of the key.
    pub fn aggregate_duplicates(&self, include_covariates: bool) -> (Self, AggregationMap) {
        let n = self.n();
        let mut seen: HashMap<(Vec<u8>, Vec<u64>), usize> = HashMap::new();
        let mut unique_index_of = Vec::with_capacity(n);
        let mut firsts = Vec::new();
        let mut mass: Vec<f64> = Vec::new();
        let mut raw_mass: Vec<f64> = Vec::new();
        for i in 0..n {
            let cov_key = if include_covariates {
                self.covariates
                    .values
                    .row(i)
                    .iter()
                    .map(|x| x.to_bits())
                    .collect()
            } else {
                Vec::new()
            };
            let key = (self.seq(i).to_vec(), cov_key);
            let u = *seen.entry(key).or_insert_with(|| {
                firsts.push(i);
                mass.push(0.0);
                raw_mass.push(0.0);
                firsts.len() - 1
            });
            mass[u] += self.weights[i];
            raw_mass[u] += self.raw_weights[i];
            unique_index_of.push(u);
        }
        let mut states = Vec::with_capacity(firsts.len() * self.t);
        for &i in &firsts {
            states.extend_from_slice(self.seq(i));
        }
        let covariates = if include_covariates {
            self.covariates.select_rows(&firsts)
        } else {
            Covariates::empty(firsts.len())
        };
        let ids = firsts.iter().map(|&i| self.ids[i].clone()).collect();
        let observed = observed_states(&states, firsts.len(), self.t);
        let ds = SequenceDataset {
            alphabet: self.alphabet.clone(),
            t: self.t,
            states,
            ids,
            weights: mass.clone(),
            raw_weights: raw_mass,
            covariates,
            observed,
            sample_size: self.sample_size,
        };
        (
            ds,
            AggregationMap {
                unique_index_of,
                multiplicity: mass,
            },
        )
    }

    /// Weighted state frequencies, `T × v`; each row sums to one.
    pub fn state_distribution(&self) -> Array2<f64> {
        let mut dist = Array2::zeros((self.t, self.v()));
        let total: f64 = self.weights.iter().sum();
        for (row, &w) in self.rows().zip(&self.weights) {
            for (t, &s) in row.iter().enumerate() {
                dist[[t, s as usize]] += w;
            }
        }
        dist /= total;
        dist
    }

    /// Shannon entropy (natural log) of the state distribution at each time.
    pub fn transversal_entropy(&self) -> Vec<f64> {
        self.state_distribution()
            .rows()
            .into_iter()
            .map(|p| p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum())
            .collect()
    }

    /// Groups of identical sequences with size and summed weight, ordered by
    /// first occurrence.
    pub fn duplicate_groups(&self) -> Vec<DuplicateGroup> {
        let (agg, map) = self.aggregate_duplicates(false);
        let mut sizes = vec![0usize; agg.n()];
        for &u in &map.unique_index_of {
            sizes[u] += 1;
        }
        (0..agg.n())
            .map(|u| DuplicateGroup {
                sequence: agg.seq(u).to_vec(),
                size: sizes[u],
                weight: map.multiplicity[u],
            })
            .collect()
    }

    /// Label-string view of row `i` in run-length form.
    pub fn sps(&self, i: usize) -> String {
        sps_encode(self.seq(i), &self.alphabet)
    }
}

/// A set of identical sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct DuplicateGroup {
    pub sequence: Vec<u8>,
    pub size: usize,
    pub weight: f64,
}

/// Maps original rows to unique rows after duplicate aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationMap {
    /// For each original row, the index of its unique row.
    pub unique_index_of: Vec<usize>,
    /// Summed normalised sampling weight of each unique row.
    pub multiplicity: Vec<f64>,
}

impl AggregationMap {
    /// Copies per-unique-row values back onto the original rows.
    pub fn expand_rows(&self, unique: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.unique_index_of.len(), unique.ncols()));
        for (i, &u) in self.unique_index_of.iter().enumerate() {
            out.row_mut(i).assign(&unique.row(u));
        }
        out
    }

    pub fn expand<T: Clone>(&self, unique: &[T]) -> Vec<T> {
        self.unique_index_of
            .iter()
            .map(|&u| unique[u].clone())
            .collect()
    }
}

fn observed_states(states: &[u8], n: usize, t: usize) -> Vec<Vec<u8>> {
    let mut seen = vec![BTreeSet::new(); t];
    for i in 0..n {
        for (k, set) in seen.iter_mut().enumerate() {
            set.insert(states[i * t + k]);
        }
    }
    seen.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// State-permanence run-length label, e.g. `(SC,25)-(HE,45)`.
pub fn sps_encode(seq: &[u8], alphabet: &Alphabet) -> String {
    let mut parts = Vec::new();
    let mut iter = seq.iter().peekable();
    while let Some(&s) = iter.next() {
        let mut len = 1;
        while iter.peek() == Some(&&s) {
            iter.next();
            len += 1;
        }
        parts.push(format!("({},{})", alphabet.label(s), len));
    }
    parts.join("-")
}

/// Which CSV columns hold the sequence states.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceColumns {
    /// Every column whose name starts with the prefix.
    Prefix(String),
    /// Explicit list, in order.
    Names(Vec<String>),
    /// Inclusive range between two header names.
    Range { first: String, last: String },
}

/// Column roles for [`parse_csv`].
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub id: Option<String>,
    pub sequence: SequenceColumns,
    pub weight: Option<String>,
    pub covariates: Vec<String>,
    pub delimiter: u8,
}

impl CsvSchema {
    pub fn new(sequence: SequenceColumns) -> Self {
        CsvSchema {
            id: None,
            sequence,
            weight: None,
            covariates: Vec::new(),
            delimiter: b',',
        }
    }
}

/// Reads a dataset from a delimited file with a header row.
pub fn parse_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<SequenceDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| MedseqError::io(path, e))?;
    parse_reader(file, schema)
}

/// As [`parse_csv`], from any reader.
pub fn parse_reader<R: std::io::Read>(reader: R, schema: &CsvSchema) -> Result<SequenceDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MedseqError::Schema(format!("unknown column '{name}'")))
    };
    let seq_cols: Vec<usize> = match &schema.sequence {
        SequenceColumns::Prefix(p) => header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with(p.as_str()))
            .map(|(i, _)| i)
            .collect(),
        SequenceColumns::Names(names) => names.iter().map(|n| col(n)).collect::<Result<_>>()?,
        SequenceColumns::Range { first, last } => {
            let (a, b) = (col(first)?, col(last)?);
            if a > b {
                return Err(MedseqError::Schema(format!(
                    "column '{first}' comes after '{last}'"
                )));
            }
            (a..=b).collect()
        }
    };
    if seq_cols.is_empty() {
        return Err(MedseqError::Schema("no sequence columns selected".into()));
    }
    let id_col = schema.id.as_deref().map(col).transpose()?;
    let weight_col = schema.weight.as_deref().map(col).transpose()?;
    let cov_cols: Vec<usize> = schema
        .covariates
        .iter()
        .map(|n| col(n))
        .collect::<Result<_>>()?;

    let mut cells: Vec<Vec<String>> = Vec::new();
    let mut ids = Vec::new();
    let mut weights = Vec::new();
    let mut cov_cells: Vec<Vec<String>> = vec![Vec::new(); cov_cols.len()];
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => MedseqError::Cell {
                row: r + 1,
                column: String::new(),
                message: "ragged row".into(),
            },
            _ => MedseqError::Csv(e),
        })?;
        let row = r + 1;
        let mut seq = Vec::with_capacity(seq_cols.len());
        for &c in &seq_cols {
            let cell = record[c].trim();
            if cell.is_empty() {
                return Err(MedseqError::Cell {
                    row,
                    column: header[c].clone(),
                    message: "empty sequence cell".into(),
                });
            }
            seq.push(cell.to_string());
        }
        cells.push(seq);
        ids.push(match id_col {
            Some(c) => record[c].trim().to_string(),
            None => row.to_string(),
        });
        if let Some(c) = weight_col {
            let raw = record[c].trim();
            let w: f64 = raw.parse().map_err(|_| MedseqError::Cell {
                row,
                column: header[c].clone(),
                message: format!("weight '{raw}' is not numeric"),
            })?;
            if !w.is_finite() || w < 0.0 {
                return Err(MedseqError::Cell {
                    row,
                    column: header[c].clone(),
                    message: format!("weight {w} is negative or non-finite"),
                });
            }
            weights.push(w);
        }
        for (k, &c) in cov_cols.iter().enumerate() {
            cov_cells[k].push(record[c].trim().to_string());
        }
    }
    if cells.is_empty() {
        return Err(MedseqError::InvalidInput("file has no data rows".into()));
    }
    let alphabet = Alphabet::new(cells.iter().flatten().cloned())?;
    let n = cells.len();
    let t = seq_cols.len();
    let mut states = Vec::with_capacity(n * t);
    for row in &cells {
        for cell in row {
            states.push(alphabet.index_of(cell).expect("label in alphabet"));
        }
    }
    let raw_cov = schema
        .covariates
        .iter()
        .zip(cov_cells)
        .map(|(name, values)| {
            let numeric: Option<Vec<f64>> = values.iter().map(|s| s.parse().ok()).collect();
            let values = match numeric {
                Some(v) => CovariateValues::Numeric(v),
                None => CovariateValues::Categorical(values),
            };
            (name.clone(), values)
        })
        .collect();
    let covariates = Covariates::encode(n, raw_cov)?;
    let raw_weights = if weight_col.is_some() {
        weights
    } else {
        vec![1.0; n]
    };
    SequenceDataset::assemble(alphabet, t, states, ids, raw_weights, covariates, n)
}
