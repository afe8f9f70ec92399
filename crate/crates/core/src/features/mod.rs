//! Sample assembly: distance-weighted satellite features, the tabular
//! dataset, three-way splitting, synthetic data and CSV ingestion.

mod csv_io;
mod synthetic;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub const N_PREDICTORS: usize = 9;
pub const TARGET_NAME: &str = "target";
pub const PREDICTOR_NAMES: [&str; N_PREDICTORS] = [
    "pr_p1", "pr_p2", "pr_p3", "pr_p4", "pr_i1", "pr_i2", "pr_i3", "pr_i4", "elevation",
];

/// Raw precipitation at the four closest grid points and the station's
/// distance (km) to each of them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborObservation {
    pub values: [f64; 4],
    pub distances: [f64; 4],
}

/// Inverse-squared-distance weighted features:
/// `out_i = (PR_i / d_i²) / Σ_j d_j⁻²`.
///
/// Exact co-location (`d = 0`) is refused; callers perturb it first.
pub fn idw_features(obs: &NeighborObservation) -> Result<[f64; 4]> {
    for (i, &d) in obs.distances.iter().enumerate() {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Domain(format!("distance {i} must be positive and finite, got {d}")));
        }
    }
    for (i, &v) in obs.values.iter().enumerate() {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("grid value {i} must be non-negative, got {v}")));
        }
    }
    let inv_sq = obs.distances.map(|d| 1.0 / (d * d));
    let total: f64 = inv_sq.iter().sum();
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = obs.values[i] * inv_sq[i] / total;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub target: f64,
    pub predictors: [f64; N_PREDICTORS],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_id: Option<String>,
}

impl Sample {
    pub fn new(target: f64, predictors: [f64; N_PREDICTORS]) -> Self {
        Self { target, predictors, site_id: None, time_id: None }
    }
}

/// Column-oriented collection of samples. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    targets: Vec<f64>,
    columns: Vec<Vec<f64>>,
    tags: Option<Vec<(String, String)>>,
}

impl Dataset {
    pub fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        let n = samples.len();
        let tagged = samples.first().map(|s| s.site_id.is_some() || s.time_id.is_some()).unwrap_or(false);
        let mut targets = Vec::with_capacity(n);
        let mut columns: Vec<Vec<f64>> = (0..N_PREDICTORS).map(|_| Vec::with_capacity(n)).collect();
        let mut tags = tagged.then(|| Vec::with_capacity(n));
        for (i, s) in samples.into_iter().enumerate() {
            if !(s.target >= 0.0 && s.target.is_finite()) {
                return Err(Error::Data(format!("sample {i}: target must be finite and non-negative, got {}", s.target)));
            }
            if let Some(j) = s.predictors.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("sample {i}: predictor {} is not finite", PREDICTOR_NAMES[j])));
            }
            targets.push(s.target);
            for (col, v) in columns.iter_mut().zip(s.predictors) {
                col.push(v);
            }
            if let Some(tags) = tags.as_mut() {
                tags.push((s.site_id.unwrap_or_default(), s.time_id.unwrap_or_default()));
            }
        }
        Ok(Self { targets, columns, tags })
    }

    /// Builds a dataset straight from columns (no tags).
    pub fn from_columns(targets: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != N_PREDICTORS {
            return Err(Error::Shape(format!("expected {N_PREDICTORS} predictor columns, got {}", columns.len())));
        }
        if let Some(c) = columns.iter().position(|c| c.len() != targets.len()) {
            return Err(Error::Shape(format!(
                "column {} has {} rows, targets have {}",
                PREDICTOR_NAMES[c],
                columns[c].len(),
                targets.len()
            )));
        }
        let samples = (0..targets.len())
            .map(|i| Sample::new(targets[i], std::array::from_fn(|j| columns[j][i])))
            .collect();
        Self::from_samples(samples)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn predictor_names(&self) -> [&'static str; N_PREDICTORS] {
        PREDICTOR_NAMES
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn row(&self, i: usize) -> [f64; N_PREDICTORS] {
        std::array::from_fn(|j| self.columns[j][i])
    }

    pub fn rows(&self) -> impl Iterator<Item = [f64; N_PREDICTORS]> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    pub fn has_tags(&self) -> bool {
        self.tags.is_some()
    }

    pub fn sample(&self, i: usize) -> Sample {
        let (site_id, time_id) = match &self.tags {
            Some(t) => (Some(t[i].0.clone()), Some(t[i].1.clone())),
            None => (None, None),
        };
        Sample { target: self.targets[i], predictors: self.row(i), site_id, time_id }
    }

    pub fn samples(&self) -> impl Iterator<Item = Sample> + '_ {
        (0..self.len()).map(|i| self.sample(i))
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            columns: self.columns.iter().map(|c| indices.iter().map(|&i| c[i]).collect()).collect(),
            tags: self.tags.as_ref().map(|t| indices.iter().map(|&i| t[i].clone()).collect()),
        }
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut out = self.clone();
        out.targets.extend_from_slice(&other.targets);
        for (c, o) in out.columns.iter_mut().zip(&other.columns) {
            c.extend_from_slice(o);
        }
        out.tags = match (&self.tags, &other.tags) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        out
    }

    pub fn zero_fraction(&self) -> f64 {
        self.targets.iter().filter(|&&y| y == 0.0).count() as f64 / self.len().max(1) as f64
    }
}

/// Random partition into three near-equal parts.
#[derive(Debug, Clone)]
pub struct ThreeWaySplit {
    pub set1: Dataset,
    pub set2: Dataset,
    pub set3: Dataset,
    /// Source row indices of each part.
    pub indices: [Vec<usize>; 3],
    pub seed: u64,
}

impl ThreeWaySplit {
    /// Union of sets 1 and 2, in that order.
    pub fn train_union(&self) -> Dataset {
        self.set1.concat(&self.set2)
    }
}

/// Shuffles row indices with a seeded permutation and cuts them into three
/// parts whose sizes differ by at most one.
pub fn split_three_way(d: &Dataset, seed: u64) -> Result<ThreeWaySplit> {
    let n = d.len();
    if n < 3 {
        return Err(Error::Size(format!("three-way split needs at least 3 samples, got {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::substream(seed, "split", 0));
    let base = n / 3;
    let extra = n % 3;
    let sizes = [base + usize::from(extra > 0), base + usize::from(extra > 1), base];
    let (a, rest) = perm.split_at(sizes[0]);
    let (b, c) = rest.split_at(sizes[1]);
    let indices = [a.to_vec(), b.to_vec(), c.to_vec()];
    Ok(ThreeWaySplit {
        set1: d.subset(&indices[0]),
        set2: d.subset(&indices[1]),
        set3: d.subset(&indices[2]),
        indices,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> Dataset {
        let samples = (0..n).map(|i| Sample::new(i as f64, [i as f64; N_PREDICTORS])).collect();
        Dataset::from_samples(samples).unwrap()
    }

    #[test]
    fn idw_examples() {
        let out = idw_features(&NeighborObservation { values: [4.0; 4], distances: [1.0; 4] }).unwrap();
        assert_eq!(out, [1.0; 4]);
        let out = idw_features(&NeighborObservation {
            values: [8.0, 0.0, 0.0, 0.0],
            distances: [1.0, 2.0, 2.0, 2.0],
        })
        .unwrap();
        assert!((out[0] - 8.0 / 1.75).abs() < 1e-15);
        assert_eq!(&out[1..], &[0.0, 0.0, 0.0]);
        let out = idw_features(&NeighborObservation {
            values: [3.0; 4],
            distances: [0.7, 5.0, 12.0, 31.0],
        })
        .unwrap();
        assert!((out.iter().sum::<f64>() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn idw_rejects_colocation() {
        let obs = NeighborObservation { values: [1.0; 4], distances: [0.0, 1.0, 1.0, 1.0] };
        assert!(matches!(idw_features(&obs), Err(Error::Domain(_))));
        let obs = NeighborObservation { values: [1.0; 4], distances: [-1.0, 1.0, 1.0, 1.0] };
        assert!(idw_features(&obs).is_err());
    }

    #[test]
    fn split_sizes() {
        let s = split_three_way(&toy(9), 1).unwrap();
        assert_eq!((s.set1.len(), s.set2.len(), s.set3.len()), (3, 3, 3));
        let s = split_three_way(&toy(91_623), 1).unwrap();
        assert_eq!((s.set1.len(), s.set2.len(), s.set3.len()), (30_541, 30_541, 30_541));
        assert!(matches!(split_three_way(&toy(2), 1), Err(Error::Size(_))));
    }

    #[test]
    fn split_is_deterministic() {
        let d = toy(50);
        let a = split_three_way(&d, 42).unwrap();
        let b = split_three_way(&d, 42).unwrap();
        assert_eq!(a.indices, b.indices);
        assert_eq!(a.set3, b.set3);
        let c = split_three_way(&d, 43).unwrap();
        assert_ne!(a.indices, c.indices);
    }

    #[test]
    fn dataset_rejects_bad_samples() {
        let mut bad = toy(3).samples().collect::<Vec<_>>();
        bad[1].target = -1.0;
        assert!(matches!(Dataset::from_samples(bad), Err(Error::Data(_))));
        let mut bad = toy(3).samples().collect::<Vec<_>>();
        bad[2].predictors[4] = f64::INFINITY;
        assert!(Dataset::from_samples(bad).is_err());
    }

    #[test]
    fn subset_and_concat() {
        let d = toy(6);
        let a = d.subset(&[0, 2]);
        let b = d.subset(&[5]);
        let c = a.concat(&b);
        assert_eq!(c.targets(), &[0.0, 2.0, 5.0]);
        assert_eq!(c.row(2), [5.0; N_PREDICTORS]);
    }
}
