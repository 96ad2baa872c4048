use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::AssemblyError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCensus {
    /// Dataset name to the number of papers mentioning it.
    pub counts: BTreeMap<String, usize>,
    pub k: usize,
    /// The top `k`, most frequent first, ties by name.
    pub selected: Vec<String>,
}

/// Counts `(paper_id, dataset)` mentions. A paper counts once per dataset;
/// names match case-insensitively and keep their first spelling.
pub fn census_datasets<P, D>(mentions: &[(P, D)], k: usize) -> Result<DatasetCensus, AssemblyError>
where
    P: AsRef<str>,
    D: AsRef<str>,
{
    if k == 0 {
        return Err(AssemblyError::EmptyInput);
    }
    let mut spelling: HashMap<String, String> = HashMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (paper, dataset) in mentions {
        let name = dataset.as_ref().split_whitespace().collect::<Vec<_>>().join(" ");
        if name.is_empty() {
            continue;
        }
        let key = name.to_lowercase();
        if !seen.insert((paper.as_ref().to_string(), key.clone())) {
            continue;
        }
        let display = spelling.entry(key).or_insert(name).clone();
        *counts.entry(display).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(AssemblyError::EmptyInput);
    }
    let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let selected = ranked.into_iter().take(k).map(|(n, _)| n.clone()).collect();
    Ok(DatasetCensus { counts, k, selected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_dataset() {
        let c = census_datasets(&[("p1", "LA"), ("p2", "LA"), ("p3", "la")], 1).unwrap();
        assert_eq!(c.counts, BTreeMap::from([("LA".to_string(), 3)]));
        assert_eq!(c.selected, ["LA"]);
    }

    #[test]
    fn ties_go_to_the_earlier_name() {
        let mut m = Vec::new();
        for i in 0..5 {
            m.push((format!("b{i}"), "B"));
            m.push((format!("a{i}"), "A"));
        }
        m.push(("c0".into(), "C"));
        m.push(("c1".into(), "C"));
        let c = census_datasets(&m, 1).unwrap();
        assert_eq!(c.selected, ["A"]);
    }

    #[test]
    fn a_paper_counts_once() {
        let c = census_datasets(&[("p", "LA"), ("p", "LA"), ("q", "Pancreas")], 5).unwrap();
        assert_eq!(c.counts["LA"], 1);
        assert_eq!(c.selected, ["LA", "Pancreas"]);
    }

    #[test]
    fn empty_is_an_error() {
        let none: [(&str, &str); 0] = [];
        assert!(matches!(census_datasets(&none, 5), Err(AssemblyError::EmptyInput)));
    }

    proptest! {
        #[test]
        fn matches_brute_force(pairs in proptest::collection::vec((0u8..12, 0u8..6), 40), k in 1usize..7) {
            let names = ["LA", "BraTS", "ACDC", "KiTS", "Synapse", "ISIC"];
            let mentions: Vec<(String, &str)> =
                pairs.iter().map(|(p, d)| (format!("p{p}"), names[*d as usize])).collect();
            let c = census_datasets(&mentions, k).unwrap();
            // every distinct paper mentioning each name, then a full sort
            let mut oracle: Vec<(String, usize)> = names
                .iter()
                .map(|n| {
                    let mut papers: Vec<&String> = mentions.iter().filter(|m| m.1 == *n).map(|m| &m.0).collect();
                    papers.sort();
                    papers.dedup();
                    (n.to_string(), papers.len())
                })
                .filter(|x| x.1 > 0)
                .collect();
            oracle.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let want: Vec<String> = oracle.iter().take(k).map(|x| x.0.clone()).collect();
            prop_assert_eq!(c.selected, want);
        }
    }
}
