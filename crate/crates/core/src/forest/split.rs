//! Node maximum likelihood from sufficient statistics and the split search.

use std::f64::consts::PI;

use crate::dist::{Family, ZeroAdjustedParams, NU_MAX};
use crate::special;

/// Split gains at or below this fraction of the node log-likelihood are
/// treated as rounding noise.
const GAIN_EPS: f64 = 1e-10;

/// (Weighted) sufficient statistics of a set of targets.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub total: f64,
    pub zeros: f64,
    pub pos: f64,
    pub sum_y: f64,
    pub sum_ln: f64,
    pub sum_inv: f64,
}

impl Stats {
    pub fn push(&mut self, y: f64, ln_y: f64, w: f64) {
        self.total += w;
        if y == 0.0 {
            self.zeros += w;
        } else {
            self.pos += w;
            self.sum_y += w * y;
            self.sum_ln += w * ln_y;
            self.sum_inv += w / y;
        }
    }

    pub fn from_targets(y: &[f64]) -> Self {
        let mut s = Self::default();
        for &v in y {
            s.push(v, if v > 0.0 { v.ln() } else { 0.0 }, 1.0);
        }
        s
    }

    fn minus(&self, o: &Stats) -> Stats {
        Stats {
            total: self.total - o.total,
            zeros: self.zeros - o.zeros,
            pos: self.pos - o.pos,
            sum_y: self.sum_y - o.sum_y,
            sum_ln: self.sum_ln - o.sum_ln,
            sum_inv: self.sum_inv - o.sum_inv,
        }
    }
}

/// Outcome of the weighted maximum likelihood from [`Stats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeFit {
    pub params: ZeroAdjustedParams,
    /// The positive part was degenerate (fewer than two positives or no
    /// spread) or the shape equation failed; `sigma` is a fallback value.
    pub fallback: bool,
}

/// Solves `ln a − ψ(a) = s` for the gamma shape by Newton on `ln a`.
pub fn gamma_shape_mle(s: f64) -> Option<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return None;
    }
    let mut a = (3.0 - s + ((s - 3.0).powi(2) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..100 {
        let f = special::ln_minus_digamma(a) - s;
        let df = -a * special::trigamma_minus_recip(a);
        let step = f / df;
        let next = a * (-step).exp();
        if !next.is_finite() || next <= 0.0 {
            return None;
        }
        let done = step.abs() < 1e-13;
        a = next;
        if done {
            return Some(a);
        }
    }
    None
}

/// Maximum-likelihood `(mu, sigma, nu)` from sufficient statistics, with
/// the parameter safeguards applied. Degenerate positive parts get
/// `sigma = 1`; an all-zero set gets `mu = sigma = 1`.
pub fn fit_stats(family: Family, s: &Stats) -> NodeFit {
    let nu = if s.total > 0.0 { s.zeros / s.total } else { 0.5 };
    if s.pos <= 0.0 {
        return NodeFit { params: ZeroAdjustedParams::safeguarded(1.0, 1.0, NU_MAX), fallback: false };
    }
    let mu = s.sum_y / s.pos;
    let sigma = match family {
        Family::Zaga => {
            let spread = mu.ln() - s.sum_ln / s.pos;
            if spread > 1e-12 {
                gamma_shape_mle(spread).map(|a| 1.0 / a.sqrt())
            } else {
                None
            }
        }
        Family::Zaig => {
            let q = s.sum_inv / s.pos - 1.0 / mu;
            if q > 1e-12 * (s.sum_inv / s.pos) {
                Some(q.sqrt())
            } else {
                None
            }
        }
    };
    let fallback = sigma.is_none();
    NodeFit { params: ZeroAdjustedParams::safeguarded(mu, sigma.unwrap_or(1.0), nu), fallback }
}

/// Log-likelihood of the set summarized by `s` at parameters `p`, using the
/// closed forms for the sums over positives.
pub fn stats_log_likelihood(family: Family, s: &Stats, p: &ZeroAdjustedParams) -> f64 {
    let mut ll = 0.0;
    if s.zeros > 0.0 {
        ll += s.zeros * p.nu().ln();
    }
    if s.pos <= 0.0 {
        return ll;
    }
    ll += s.pos * (-p.nu()).ln_1p();
    let (mu, sigma) = (p.mu(), p.sigma());
    ll += match family {
        Family::Zaga => {
            let a = 1.0 / (sigma * sigma);
            s.pos * special::gamma_shape_term(a) + a * (s.sum_ln - s.pos * mu.ln() + s.pos - s.sum_y / mu) - s.sum_ln
        }
        Family::Zaig => {
            let s2 = sigma * sigma;
            let q = s.sum_y / (mu * mu) - 2.0 * s.pos / mu + s.sum_inv;
            -0.5 * s.pos * (2.0 * PI * s2).ln() - 1.5 * s.sum_ln - q / (2.0 * s2)
        }
    };
    ll
}

/// Log-likelihood at the node's own maximum-likelihood parameters.
pub fn max_log_likelihood(family: Family, s: &Stats) -> f64 {
    stats_log_likelihood(family, s, &fit_stats(family, s).params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    pub left_size: f64,
}

/// Candidate thresholds for sorted values: midpoints between consecutive
/// distinct values, thinned to at most `max_candidates` picked at evenly
/// spaced row quantiles.
pub fn candidate_thresholds(sorted: &[f64], max_candidates: usize) -> Vec<f64> {
    let boundaries: Vec<usize> = (1..sorted.len()).filter(|&i| sorted[i] > sorted[i - 1]).collect();
    let chosen: Vec<usize> = if boundaries.len() <= max_candidates {
        boundaries
    } else {
        let n = sorted.len();
        let mut picks = Vec::with_capacity(max_candidates);
        for k in 1..=max_candidates {
            let target = k * n / (max_candidates + 1);
            let pos = boundaries.partition_point(|&b| b < target).min(boundaries.len() - 1);
            if picks.last() != Some(&boundaries[pos]) {
                picks.push(boundaries[pos]);
            }
        }
        picks
    };
    chosen.into_iter().map(|b| 0.5 * (sorted[b - 1] + sorted[b])).collect()
}

/// Training data view used while growing trees.
pub struct NodeData<'a> {
    pub columns: Vec<&'a [f64]>,
    pub y: &'a [f64],
    pub ln_y: Vec<f64>,
}

impl<'a> NodeData<'a> {
    pub fn new(columns: Vec<&'a [f64]>, y: &'a [f64]) -> Self {
        let ln_y = y.iter().map(|&v| if v > 0.0 { v.ln() } else { 0.0 }).collect();
        Self { columns, y, ln_y }
    }

    pub fn stats(&self, rows: &[usize]) -> Stats {
        let mut s = Stats::default();
        for &r in rows {
            s.push(self.y[r], self.ln_y[r], 1.0);
        }
        s
    }
}

/// Best split of `rows` (a multiset of row indices) on one predictor, given
/// the node statistics and its maximized log-likelihood.
pub fn best_split_on(
    data: &NodeData,
    family: Family,
    rows: &[usize],
    feature: usize,
    node: (&Stats, f64),
    min_leaf: usize,
    max_candidates: usize,
) -> Option<SplitChoice> {
    let col = data.columns[feature];
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
    let xs: Vec<f64> = order.iter().map(|&r| col[r]).collect();
    let (node_stats, node_ll) = node;
    let tol = GAIN_EPS * node_ll.abs().max(1.0);

    let mut best: Option<SplitChoice> = None;
    let mut left = Stats::default();
    let mut taken = 0;
    for t in candidate_thresholds(&xs, max_candidates) {
        while taken < xs.len() && xs[taken] <= t {
            let r = order[taken];
            left.push(data.y[r], data.ln_y[r], 1.0);
            taken += 1;
        }
        if taken < min_leaf || xs.len() - taken < min_leaf {
            continue;
        }
        let right = node_stats.minus(&left);
        let gain = max_log_likelihood(family, &left) + max_log_likelihood(family, &right) - node_ll;
        if gain > tol && best.is_none_or(|b| gain > b.gain) {
            best = Some(SplitChoice { feature, threshold: t, gain, left_size: taken as f64 });
        }
    }
    best
}

/// Best split over the given predictors, first predictor winning ties.
pub fn best_split(
    data: &NodeData,
    family: Family,
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
    max_candidates: usize,
) -> Option<SplitChoice> {
    let stats = data.stats(rows);
    let node_ll = max_log_likelihood(family, &stats);
    let mut best: Option<SplitChoice> = None;
    for &f in features {
        if let Some(c) = best_split_on(data, family, rows, f, (&stats, node_ll), min_leaf, max_candidates) {
            if best.is_none_or(|b| c.gain > b.gain) {
                best = Some(c);
            }
        }
    }
    best
}
