//! Starting partitions: weighted Ward agglomeration on the Hamming matrix
//! followed by a weighted PAM swap phase.

use ndarray::Array2;

use crate::distance::DistanceMatrix;
use crate::error::{MedseqError, Result};

const TIE_TOL: f64 = 1e-12;

/// `candidate` beats `best` by more than the relative tie tolerance.
fn improves(candidate: f64, best: f64) -> bool {
    candidate < best && (best.is_infinite() || best - candidate > TIE_TOL * best.abs())
}

/// Full weighted Ward merge history, cut at any number of clusters.
///
/// Merge costs start at `m_a m_b / (m_a + m_b) d^2` with masses given by the
/// sampling weights and follow the Lance-Williams update
/// `((m_a + m_k) D_ka + (m_b + m_k) D_kb - m_k D_ab) / (m_a + m_b + m_k)`.
/// Exact duplicates merge first at zero cost, so a dataset and its
/// aggregated version produce the same tree.
#[derive(Debug, Clone)]
pub struct WardTree {
    n: usize,
    /// `(kept, absorbed)` cluster ids in merge order; ids are the smallest
    /// member index.
    merges: Vec<(usize, usize)>,
}

impl WardTree {
    pub fn build(d: &DistanceMatrix, w: &[f64]) -> Result<Self> {
        let n = d.n();
        if w.len() != n {
            return Err(MedseqError::LengthMismatch {
                expected: n,
                found: w.len(),
            });
        }
        if w.iter().any(|&x| !(x > 0.0)) {
            return Err(MedseqError::InvalidInput(
                "hierarchical initialisation needs positive weights".into(),
            ));
        }
        let mut mass = w.to_vec();
        let mut cost = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let dij = d.get(i, j) as f64;
                    cost[i * n + j] = mass[i] * mass[j] / (mass[i] + mass[j]) * dij * dij;
                }
            }
        }
        let mut active: Vec<usize> = (0..n).collect();
        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        while active.len() > 1 {
            let mut best = (f64::INFINITY, 0, 0);
            for (x, &a) in active.iter().enumerate() {
                for &b in &active[x + 1..] {
                    let c = cost[a * n + b];
                    if improves(c, best.0) {
                        best = (c, a, b);
                    }
                }
            }
            let (_, a, b) = best;
            let (ma, mb) = (mass[a], mass[b]);
            let dab = cost[a * n + b];
            for &k in &active {
                if k == a || k == b {
                    continue;
                }
                let mk = mass[k];
                let updated =
                    ((ma + mk) * cost[k * n + a] + (mb + mk) * cost[k * n + b] - mk * dab) / (ma + mb + mk);
                cost[k * n + a] = updated;
                cost[a * n + k] = updated;
            }
            mass[a] = ma + mb;
            active.retain(|&x| x != b);
            merges.push((a, b));
        }
        Ok(WardTree { n, merges })
    }

    /// Labels for `k` clusters, numbered by first appearance.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.n {
            return Err(MedseqError::InvalidInput(format!(
                "cannot cut {} observations into {k} clusters",
                self.n
            )));
        }
        let mut parent: Vec<usize> = (0..self.n).collect();
        for &(a, b) in &self.merges[..self.n - k] {
            parent[b] = a;
        }
        let root = |mut i: usize| {
            while parent[i] != i {
                i = parent[i];
            }
            i
        };
        let roots: Vec<usize> = (0..self.n).map(root).collect();
        Ok(first_appearance(&roots))
    }
}

/// Relabels so that labels appear in increasing order of first occurrence.
pub fn first_appearance(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Weighted cost `sum_i w_i d(i, medoid(label_i))`.
pub fn medoid_cost(d: &DistanceMatrix, w: &[f64], medoids: &[usize], labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| w[i] * d.get(i, medoids[l]) as f64)
        .sum()
}

/// Within-cluster weighted medoid of each cluster; ties go to the lowest
/// index.
pub fn cluster_medoids(d: &DistanceMatrix, w: &[f64], labels: &[usize], k: usize) -> Vec<usize> {
    let mut members = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    members
        .iter()
        .map(|m| {
            let mut best = (f64::INFINITY, usize::MAX);
            for &c in m {
                let cost: f64 = m.iter().map(|&i| w[i] * d.get(i, c) as f64).sum();
                if improves(cost, best.0) {
                    best = (cost, c);
                }
            }
            best.1
        })
        .collect()
}

/// Nearest-medoid assignment (slot indices). Ties go to the medoid with the
/// lowest row index, so the result does not depend on slot order.
pub fn assign_to_medoids(d: &DistanceMatrix, medoids: &[usize]) -> Vec<usize> {
    (0..d.n())
        .map(|i| {
            let mut best = 0;
            for (s, &m) in medoids.iter().enumerate().skip(1) {
                let (dm, db) = (d.get(i, m), d.get(i, medoids[best]));
                if dm < db || (dm == db && m < medoids[best]) {
                    best = s;
                }
            }
            best
        })
        .collect()
}

/// Result of the weighted PAM swap phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PamResult {
    /// Labels numbered by first appearance.
    pub labels: Vec<usize>,
    /// Medoid row of each label.
    pub medoids: Vec<usize>,
    pub cost: f64,
}

/// Weighted PAM swap phase started from the per-cluster medoids of
/// `labels`. Applies the best improving (medoid, non-medoid) swap until no
/// swap lowers `sum_i w_i d(i, nearest medoid)`.
pub fn weighted_pam(d: &DistanceMatrix, w: &[f64], labels: &[usize], k: usize) -> PamResult {
    let n = d.n();
    let mut medoids = cluster_medoids(d, w, labels, k);
    loop {
        // nearest and second-nearest medoid distances
        let mut near = vec![(u32::MAX, usize::MAX); n];
        let mut second = vec![u32::MAX; n];
        for i in 0..n {
            for (s, &m) in medoids.iter().enumerate() {
                let dist = d.get(i, m);
                if dist < near[i].0 {
                    second[i] = near[i].0;
                    near[i] = (dist, s);
                } else if dist < second[i] {
                    second[i] = dist;
                }
            }
        }
        let total: f64 = (0..n).map(|i| w[i] * near[i].0 as f64).sum();
        let mut best = (0.0, usize::MAX, usize::MAX);
        for (s, _) in medoids.iter().enumerate() {
            for h in 0..n {
                if medoids.contains(&h) {
                    continue;
                }
                let mut delta = 0.0;
                for i in 0..n {
                    let dih = d.get(i, h);
                    let current = near[i].0;
                    let after = if near[i].1 == s {
                        dih.min(second[i])
                    } else {
                        dih.min(current)
                    };
                    delta += w[i] * (after as f64 - current as f64);
                }
                if delta < best.0 - TIE_TOL * total.max(1.0) {
                    best = (delta, s, h);
                }
            }
        }
        if best.1 == usize::MAX || best.0 >= -1e-10 * total.max(1.0) {
            break;
        }
        medoids[best.1] = best.2;
    }
    let slots = assign_to_medoids(d, &medoids);
    let labels = first_appearance(&slots);
    let mut ordered = vec![0; k];
    for (i, &l) in labels.iter().enumerate() {
        ordered[l] = medoids[slots[i]];
    }
    let cost = medoid_cost(d, w, &ordered, &labels);
    PamResult {
        labels,
        medoids: ordered,
        cost,
    }
}

/// Ward cut at `k` refined by weighted PAM.
pub fn init_partition(d: &DistanceMatrix, w: &[f64], k: usize) -> Result<Vec<usize>> {
    check_k(d, k)?;
    let tree = WardTree::build(d, w)?;
    let ward = tree.cut(k)?;
    Ok(weighted_pam(d, w, &ward, k).labels)
}

pub(crate) fn check_k(d: &DistanceMatrix, k: usize) -> Result<()> {
    let distinct = d.distinct_rows();
    if k == 0 || k > distinct {
        return Err(MedseqError::InvalidInput(format!(
            "{k} clusters requested but only {distinct} distinct sequences are available"
        )));
    }
    Ok(())
}

/// Hard `n × k` indicator matrix.
pub fn hard_z(labels: &[usize], k: usize) -> Array2<f64> {
    let mut z = Array2::zeros((labels.len(), k));
    for (i, &l) in labels.iter().enumerate() {
        z[[i, l]] = 1.0;
    }
    z
}

/// Scales a `(G-1)`-column start by `1 - tau0` and appends a noise column
/// of `tau0`.
pub fn init_noise(z0: &Array2<f64>, tau0: f64) -> Result<Array2<f64>> {
    if !(tau0 > 0.0 && tau0 < 1.0) {
        return Err(MedseqError::InvalidInput(format!(
            "initial noise proportion must lie in (0, 1), got {tau0}"
        )));
    }
    let (n, k) = z0.dim();
    let mut z = Array2::from_elem((n, k + 1), tau0);
    z.slice_mut(ndarray::s![.., ..k]).assign(&(z0 * (1.0 - tau0)));
    Ok(z)
}

/// Classification EM with every precision fixed at one, equal mixing
/// proportions and central sequences restricted to observed rows (the
/// weighted medoid of each class). Iterates medoid and nearest-medoid
/// steps from `labels` until the partition is stable.
pub fn medoid_cem(d: &DistanceMatrix, w: &[f64], labels: &[usize], k: usize, max_iter: usize) -> Vec<usize> {
    let mut labels = labels.to_vec();
    for _ in 0..max_iter {
        let medoids = cluster_medoids(d, w, &labels, k);
        let next = first_appearance(&assign_to_medoids(d, &medoids));
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}
