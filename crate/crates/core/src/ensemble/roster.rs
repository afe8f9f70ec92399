use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BaseLearner;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Individual,
    Mean,
    Median,
    Stacking,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub id: String,
    pub kind: AlgorithmKind,
    /// Empty for individual learners.
    pub bases: Vec<BaseLearner>,
    /// The learner itself, for individual algorithms.
    pub learner: Option<BaseLearner>,
}

impl AlgorithmSpec {
    fn individual(b: BaseLearner) -> Self {
        Self { id: b.id().to_string(), kind: AlgorithmKind::Individual, bases: Vec::new(), learner: Some(b) }
    }

    fn ensemble(kind: AlgorithmKind, bases: &[BaseLearner]) -> Self {
        let prefix = match kind {
            AlgorithmKind::Mean => "Mean",
            AlgorithmKind::Median => "Median",
            AlgorithmKind::Stacking => "Stacking",
            AlgorithmKind::Individual => unreachable!("individual learners have no bases"),
        };
        let mut id = prefix.to_string();
        for b in bases {
            id.push('_');
            id.push_str(b.id());
        }
        Self { id, kind, bases: bases.to_vec(), learner: None }
    }

    /// Learners whose predictions this algorithm consumes.
    pub fn inputs(&self) -> Vec<BaseLearner> {
        match self.learner {
            Some(b) => vec![b],
            None => self.bases.clone(),
        }
    }
}

/// The 17 algorithms: six individual learners, five mean combiners, one
/// median combiner and five stacked combinations.
pub fn roster() -> Vec<AlgorithmSpec> {
    use AlgorithmKind::*;
    use BaseLearner::*;
    let pairs: [&[BaseLearner]; 5] = [
        &[GamlssZaigSplines, GamlssZagaSplines],
        &[DrfZaig, DrfZaga],
        &[GamlssZaigSplines, DrfZaig],
        &[GamlssZagaSplines, DrfZaga],
        &[GamlssZaigSplines, GamlssZagaSplines, DrfZaig, DrfZaga],
    ];
    let mut out: Vec<AlgorithmSpec> = BaseLearner::ALL.into_iter().map(AlgorithmSpec::individual).collect();
    out.extend(pairs.iter().map(|b| AlgorithmSpec::ensemble(Mean, b)));
    out.push(AlgorithmSpec::ensemble(Median, pairs[4]));
    out.extend(pairs.iter().map(|b| AlgorithmSpec::ensemble(Stacking, b)));
    out
}

/// Roster entries named in `ids`, in roster order. Unknown ids are an error.
pub fn select(ids: &[String]) -> Result<Vec<AlgorithmSpec>> {
    let all = roster();
    if let Some(bad) = ids.iter().find(|id| !all.iter().any(|a| &a.id == *id)) {
        return Err(Error::Config(format!("unknown algorithm id `{bad}`")));
    }
    Ok(all.into_iter().filter(|a| ids.contains(&a.id)).collect())
}
