use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use serde::Serialize;

use super::IntelError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Prf {
    /// Scores from counts; an empty denominator scores 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Prf {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        // 2PR/(P+R) simplifies to 2tp/(2tp+fp+fn)
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
        Prf {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }

    /// (P, R, F1) as percentages.
    pub fn percent(&self) -> (f64, f64, f64) {
        (self.precision * 100.0, self.recall * 100.0, self.f1 * 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrfReport<L: Ord> {
    pub per_class: BTreeMap<L, Prf>,
    pub micro: Prf,
}

/// Per-class and micro-averaged precision/recall/F1. Items are matched by
/// identity; both sides must hold the same identities, each exactly once.
pub fn score_prf<K, L>(predicted: &[(K, L)], gold: &[(K, L)]) -> Result<PrfReport<L>, IntelError>
where
    K: Ord + Clone + Debug,
    L: Ord + Clone,
{
    score_prf_excluding(predicted, gold, &[])
}

/// As [`score_prf`], with `excluded` classes left out of the micro average
/// (e.g. a background "none" label).
pub fn score_prf_excluding<K, L>(
    predicted: &[(K, L)],
    gold: &[(K, L)],
    excluded: &[L],
) -> Result<PrfReport<L>, IntelError>
where
    K: Ord + Clone + Debug,
    L: Ord + Clone,
{
    let index = |items: &[(K, L)], side: &str| -> Result<BTreeMap<K, L>, IntelError> {
        let mut map = BTreeMap::new();
        for (k, l) in items {
            if map.insert(k.clone(), l.clone()).is_some() {
                return Err(IntelError::AlignmentError(format!("{side} repeats item {k:?}")));
            }
        }
        Ok(map)
    };
    let pred = index(predicted, "predicted")?;
    let gold = index(gold, "gold")?;
    if let Some(k) = pred.keys().find(|k| !gold.contains_key(*k)) {
        return Err(IntelError::AlignmentError(format!("{k:?} has no gold label")));
    }
    if let Some(k) = gold.keys().find(|k| !pred.contains_key(*k)) {
        return Err(IntelError::AlignmentError(format!("{k:?} has no prediction")));
    }

    let classes: BTreeSet<L> = pred.values().chain(gold.values()).cloned().collect();
    let mut counts: BTreeMap<L, (usize, usize, usize)> = classes.into_iter().map(|c| (c, (0, 0, 0))).collect();
    for (k, g) in &gold {
        let p = &pred[k];
        if p == g {
            counts.get_mut(g).expect("class present").0 += 1;
        } else {
            counts.get_mut(p).expect("class present").1 += 1;
            counts.get_mut(g).expect("class present").2 += 1;
        }
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (c, (t, f, n)) in &counts {
        if !excluded.contains(c) {
            tp += t;
            fp += f;
            fn_ += n;
        }
    }
    Ok(PrfReport {
        per_class: counts
            .into_iter()
            .map(|(c, (t, f, n))| (c, Prf::from_counts(t, f, n)))
            .collect(),
        micro: Prf::from_counts(tp, fp, fn_),
    })
}
