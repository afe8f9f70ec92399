//! Quantile scores, skill against an unconditional reference, ranks and
//! empirical coverage.

use serde::{Deserialize, Serialize};

use crate::ensemble::{median, QuantileMatrix, TauGrid};
use crate::error::{Error, Result};

/// Pinball loss of the `tau`-quantile prediction `z` for outcome `y`.
pub fn quantile_loss(z: f64, y: f64, tau: f64) -> f64 {
    (z - y) * (if z >= y { 1.0 } else { 0.0 } - tau)
}

fn check_pairs(z: &[f64], y: &[f64]) -> Result<()> {
    if z.len() != y.len() {
        return Err(Error::Shape(format!("{} predictions for {} outcomes", z.len(), y.len())));
    }
    if y.is_empty() {
        return Err(Error::Size("no samples to score".into()));
    }
    Ok(())
}

/// Median of the per-sample quantile losses.
pub fn median_quantile_score(z: &[f64], y: &[f64], tau: f64) -> Result<f64> {
    check_pairs(z, y)?;
    let mut losses: Vec<f64> = z.iter().zip(y).map(|(&z, &y)| quantile_loss(z, y, tau)).collect();
    Ok(median(&mut losses))
}

/// `1 - score / reference`; NaN when the reference score is zero.
pub fn skill(score: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        f64::NAN
    } else {
        1.0 - score / reference
    }
}

/// Unconditional quantiles of the training targets: the smallest order
/// statistic whose empirical CDF reaches each level.
pub fn reference_quantiles(train_targets: &[f64], grid: &TauGrid) -> Result<Vec<f64>> {
    if train_targets.is_empty() {
        return Err(Error::Size("reference quantiles need training targets".into()));
    }
    let mut sorted = train_targets.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(grid
        .levels()
        .iter()
        .map(|&t| {
            // smallest k with k / n >= t, guarding against rounding in t * n
            let mut k = (t * n as f64).ceil() as usize;
            while k > 1 && (k - 1) as f64 / n as f64 >= t {
                k -= 1;
            }
            sorted[k.clamp(1, n) - 1]
        })
        .collect())
}

/// Sum over levels of the quantile losses of one predicted row.
pub fn scoring_rule(row: &[f64], y: f64, grid: &TauGrid) -> Result<f64> {
    if row.len() != grid.len() {
        return Err(Error::Shape(format!("row has {} quantiles for {} levels", row.len(), grid.len())));
    }
    Ok(row.iter().zip(grid.levels()).map(|(&z, &t)| quantile_loss(z, y, t)).sum())
}

fn mean_scoring_rule(q: &QuantileMatrix, y: &[f64], grid: &TauGrid) -> Result<f64> {
    if q.n_rows() != y.len() {
        return Err(Error::Shape(format!("{} quantile rows for {} outcomes", q.n_rows(), y.len())));
    }
    let mut total = 0.0;
    for (row, &v) in q.rows().zip(y) {
        total += scoring_rule(row, v, grid)?;
    }
    Ok(total / y.len() as f64)
}

/// Skill of the mean scoring rule against the constant reference row.
pub fn scoring_rule_skill(q: &QuantileMatrix, reference: &[f64], y: &[f64], grid: &TauGrid) -> Result<f64> {
    check_pairs(&vec![0.0; q.n_rows()], y)?;
    let s = mean_scoring_rule(q, y, grid)?;
    let mut r = 0.0;
    for &v in y {
        r += scoring_rule(reference, v, grid)?;
    }
    Ok(skill(s, r / y.len() as f64))
}

/// Fraction of outcomes at or below the predicted quantile.
pub fn coverage(z: &[f64], y: &[f64]) -> Result<f64> {
    check_pairs(z, y)?;
    Ok(z.iter().zip(y).filter(|(z, y)| y <= z).count() as f64 / y.len() as f64)
}

/// Ranks of `values` (rank 1 = largest), averaging ties. Non-finite entries
/// are excluded and get a NaN rank.
pub fn rank_descending(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_finite()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![f64::NAN; values.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// `skills[a][j]` for algorithm `a` and level `j`; ranks are taken per level.
pub fn rank_table(skills: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n_levels = skills.first().map_or(0, Vec::len);
    let mut out = vec![vec![f64::NAN; n_levels]; skills.len()];
    for j in 0..n_levels {
        let col: Vec<f64> = skills.iter().map(|s| s[j]).collect();
        for (a, r) in rank_descending(&col).into_iter().enumerate() {
            out[a][j] = r;
        }
    }
    out
}

/// Metrics of one algorithm on the test set. NaN entries are written as
/// `null` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmEvaluation {
    pub id: String,
    pub mean_scoring_rule: f64,
    #[serde(with = "nan_as_null")]
    pub scoring_rule_skill: f64,
    pub median_quantile_score: Vec<f64>,
    #[serde(with = "nan_as_null_vec")]
    pub quantile_skill: Vec<f64>,
    #[serde(with = "nan_as_null_vec")]
    pub quantile_rank: Vec<f64>,
    pub coverage: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub levels: Vec<f64>,
    pub reference_quantiles: Vec<f64>,
    pub reference_median_score: Vec<f64>,
    pub reference_mean_scoring_rule: f64,
    pub n_test: usize,
    pub algorithms: Vec<AlgorithmEvaluation>,
}

impl EvaluationReport {
    pub fn get(&self, id: &str) -> Option<&AlgorithmEvaluation> {
        self.algorithms.iter().find(|a| a.id == id)
    }
}

/// Scores every `(id, quantiles)` pair on the test outcomes `y` against the
/// unconditional quantiles of `train_targets`.
pub fn evaluate(
    predictions: &[(&str, &QuantileMatrix)],
    y: &[f64],
    train_targets: &[f64],
    grid: &TauGrid,
) -> Result<EvaluationReport> {
    if y.is_empty() {
        return Err(Error::Size("no test samples".into()));
    }
    let reference = reference_quantiles(train_targets, grid)?;
    let reference_median_score = grid
        .levels()
        .iter()
        .zip(&reference)
        .map(|(&t, &q)| median_quantile_score(&vec![q; y.len()], y, t))
        .collect::<Result<Vec<_>>>()?;
    let mut ref_total = 0.0;
    for &v in y {
        ref_total += scoring_rule(&reference, v, grid)?;
    }
    let reference_mean_scoring_rule = ref_total / y.len() as f64;

    let mut algorithms = Vec::with_capacity(predictions.len());
    for (id, q) in predictions {
        if q.n_cols() != grid.len() || q.n_rows() != y.len() {
            return Err(Error::Shape(format!(
                "{id}: quantile matrix is {} x {}, expected {} x {}",
                q.n_rows(),
                q.n_cols(),
                y.len(),
                grid.len()
            )));
        }
        let mut scores = Vec::with_capacity(grid.len());
        let mut skills = Vec::with_capacity(grid.len());
        let mut cover = Vec::with_capacity(grid.len());
        for (j, &t) in grid.levels().iter().enumerate() {
            let z = q.column(j);
            let s = median_quantile_score(&z, y, t)?;
            scores.push(s);
            skills.push(skill(s, reference_median_score[j]));
            cover.push(coverage(&z, y)?);
        }
        let mean = mean_scoring_rule(q, y, grid)?;
        algorithms.push(AlgorithmEvaluation {
            id: id.to_string(),
            mean_scoring_rule: mean,
            scoring_rule_skill: skill(mean, reference_mean_scoring_rule),
            median_quantile_score: scores,
            quantile_skill: skills,
            quantile_rank: Vec::new(),
            coverage: cover,
        });
    }
    let skills: Vec<Vec<f64>> = algorithms.iter().map(|a| a.quantile_skill.clone()).collect();
    for (a, r) in algorithms.iter_mut().zip(rank_table(&skills)) {
        a.quantile_rank = r;
    }
    Ok(EvaluationReport {
        levels: grid.levels().to_vec(),
        reference_quantiles: reference,
        reference_median_score,
        reference_mean_scoring_rule,
        n_test: y.len(),
        algorithms,
    })
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

mod nan_as_null_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opts: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opts.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opts = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opts.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}
