//! Distributional regression forests: likelihood-gain trees on bootstrap
//! samples, predicting through forest weights and a weighted MLE.

pub mod split;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{Family, ZeroAdjustedParams};
use crate::error::{Error, Result};
use crate::features::{Dataset, N_PREDICTORS};
use crate::rng;
use split::{best_split, fit_stats, NodeData, Stats};

pub const MAX_CANDIDATES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
    /// Disabling the bootstrap grows every tree on the full training set.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 100, mtry: 3, min_leaf: 20, max_depth: 30, bootstrap: true }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("n_trees must be at least 1".into()));
        }
        if self.mtry == 0 || self.mtry > N_PREDICTORS {
            return Err(Error::Config(format!("mtry must lie in 1..={N_PREDICTORS}, got {}", self.mtry)));
        }
        if self.min_leaf == 0 {
            return Err(Error::Config("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { members: Vec<(u32, u32)>, size: u32, params: ZeroAdjustedParams },
}

/// One tree; node 0 is the root. Leaves list `(training row, multiplicity)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistTree {
    pub seed: u64,
    pub nodes: Vec<Node>,
}

impl DistTree {
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict_params(&self, x: &[f64]) -> Result<ZeroAdjustedParams> {
        check_row(x)?;
        match &self.nodes[self.leaf_index(x)] {
            Node::Leaf { params, .. } => Ok(*params),
            Node::Split { .. } => unreachable!("leaf_index stops at leaves"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistForest {
    pub family: Family,
    pub config: ForestConfig,
    pub seed: u64,
    pub trees: Vec<DistTree>,
    /// Training targets, needed for the weighted likelihood at prediction.
    pub targets: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestPrediction {
    pub params: ZeroAdjustedParams,
    /// Moment or default values replaced the weighted MLE for `sigma`.
    pub fallback: bool,
}

fn check_row(x: &[f64]) -> Result<()> {
    if x.len() != N_PREDICTORS {
        return Err(Error::Shape(format!("expected {N_PREDICTORS} predictors, got {}", x.len())));
    }
    Ok(())
}

struct Grower<'a> {
    data: NodeData<'a>,
    family: Family,
    config: &'a ForestConfig,
    nodes: Vec<Node>,
}

impl Grower<'_> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let stats = self.data.stats(rows);
        let mut counts: Vec<(u32, u32)> = Vec::new();
        let mut sorted = rows.to_vec();
        sorted.sort_unstable();
        for r in sorted {
            match counts.last_mut() {
                Some((last, c)) if *last as usize == r => *c += 1,
                _ => counts.push((r as u32, 1)),
            }
        }
        Node::Leaf { members: counts, size: rows.len() as u32, params: fit_stats(self.family, &stats).params }
    }

    /// Draws `mtry` predictors; if none of them can split the node, keeps
    /// drawing the remaining predictors one at a time.
    fn choose_split(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<split::SplitChoice> {
        let mut features: Vec<usize> = (0..N_PREDICTORS).collect();
        features.shuffle(rng);
        let (first, rest) = features.split_at(self.config.mtry);
        let found = best_split(&self.data, self.family, rows, first, self.config.min_leaf, MAX_CANDIDATES);
        if found.is_some() {
            return found;
        }
        rest.iter().find_map(|&f| best_split(&self.data, self.family, rows, &[f], self.config.min_leaf, MAX_CANDIDATES))
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let splittable = depth < self.config.max_depth && rows.len() >= 2 * self.config.min_leaf;
        let choice = if splittable { self.choose_split(&rows, rng) } else { None };
        let Some(c) = choice else {
            let leaf = self.leaf(&rows);
            self.nodes.push(leaf);
            return id;
        };
        self.nodes.push(Node::Split { feature: c.feature, threshold: c.threshold, left: 0, right: 0 });
        let col = self.data.columns[c.feature];
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| col[i] <= c.threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split { feature: c.feature, threshold: c.threshold, left, right };
        id
    }
}

fn grow_tree(d: &Dataset, family: Family, config: &ForestConfig, seed: u64) -> DistTree {
    let mut rng = rng::substream(seed, "tree-growth", 0);
    let n = d.len();
    let rows: Vec<usize> = if config.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
    let columns = (0..N_PREDICTORS).map(|j| d.column(j)).collect();
    let mut g = Grower { data: NodeData::new(columns, d.targets()), family, config, nodes: Vec::new() };
    g.grow(rows, 0, &mut rng);
    DistTree { seed, nodes: g.nodes }
}

/// Grows `n_trees` trees in parallel. Each tree draws from its own seed
/// derived from `seed`, so the result does not depend on scheduling.
pub fn fit_forest(d: &Dataset, family: Family, config: &ForestConfig, seed: u64) -> Result<DistForest> {
    config.validate()?;
    if d.len() < 2 * config.min_leaf {
        return Err(Error::Size(format!(
            "forest needs at least {} rows (2 x min_leaf), got {}",
            2 * config.min_leaf,
            d.len()
        )));
    }
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| grow_tree(d, family, config, rng::derive_seed(seed, "tree", t as u64)))
        .collect();
    Ok(DistForest { family, config: config.clone(), seed, trees, targets: d.targets().to_vec() })
}

impl DistForest {
    /// Weight of every training row at `x`: per tree, the row's multiplicity
    /// in the leaf reached by `x` over the leaf's size, averaged over trees.
    pub fn weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_row(x)?;
        let mut w = vec![0.0; self.targets.len()];
        let t = self.trees.len() as f64;
        for tree in &self.trees {
            if let Node::Leaf { members, size, .. } = &tree.nodes[tree.leaf_index(x)] {
                let scale = 1.0 / (t * *size as f64);
                for &(row, count) in members {
                    w[row as usize] += count as f64 * scale;
                }
            }
        }
        Ok(w)
    }

    pub fn predict(&self, x: &[f64]) -> Result<ForestPrediction> {
        let w = self.weights(x)?;
        let mut s = Stats::default();
        for (&y, &wi) in self.targets.iter().zip(&w) {
            if wi > 0.0 {
                s.push(y, if y > 0.0 { y.ln() } else { 0.0 }, wi);
            }
        }
        let fit = fit_stats(self.family, &s);
        if !fit.fallback {
            return Ok(ForestPrediction { params: fit.params, fallback: false });
        }
        // moment estimate of sigma from the weighted positives
        let mu = fit.params.mu();
        let var = self
            .targets
            .iter()
            .zip(&w)
            .filter(|(&y, _)| y > 0.0)
            .map(|(&y, &wi)| wi * (y - mu).powi(2))
            .sum::<f64>()
            / s.pos;
        let sigma = match self.family {
            Family::Zaga => var.sqrt() / mu,
            Family::Zaig => (var / mu.powi(3)).sqrt(),
        };
        let sigma = if sigma > 0.0 && sigma.is_finite() { sigma } else { 1.0 };
        Ok(ForestPrediction {
            params: ZeroAdjustedParams::safeguarded(mu, sigma, fit.params.nu()),
            fallback: true,
        })
    }

    pub fn predict_params(&self, x: &[f64]) -> Result<ZeroAdjustedParams> {
        self.predict(x).map(|p| p.params)
    }
}

/// Free-function form of [`DistForest::weights`].
pub fn forest_weights(f: &DistForest, x: &[f64]) -> Result<Vec<f64>> {
    f.weights(x)
}

/// Free-function form of [`DistForest::predict_params`].
pub fn forest_predict_params(f: &DistForest, x: &[f64]) -> Result<ZeroAdjustedParams> {
    f.predict_params(x)
}
