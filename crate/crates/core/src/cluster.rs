//! Confusability clustering of languages.
//!
//! Languages that the LangID model mixes up are grouped so that first-pass
//! filtering works at the cluster level and does not throw away recall
//! between close dialects. Clustering is average-linkage agglomeration over
//! `1 - max(pairwise FNR)` distances.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::langid::ConfusionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Square labelled distance matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Checks squareness, symmetry and a zero diagonal.
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidDistanceMatrix);
        }
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::InvalidDistanceMatrix);
            }
            for j in 0..i {
                if rows[i][j] != rows[j][i] || !rows[i][j].is_finite() {
                    return Err(Error::InvalidDistanceMatrix);
                }
            }
        }
        Ok(DistanceMatrix {
            labels,
            values: rows.into_iter().flatten().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.values
            .chunks(self.len().max(1))
            .map(<[f64]>::to_vec)
            .collect()
    }

    /// Restriction to `indices`, keeping their order.
    pub fn submatrix(&self, indices: &[usize]) -> DistanceMatrix {
        DistanceMatrix {
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            values: indices
                .iter()
                .flat_map(|&i| indices.iter().map(move |&j| (i, j)))
                .map(|(i, j)| self.get(i, j))
                .collect(),
        }
    }
}

/// `d(a, b) = 1 - max(counts[a][b] / row(a), counts[b][a] / row(b))`.
pub fn fnr_distance_matrix(cm: &ConfusionMatrix) -> DistanceMatrix {
    let n = cm.len();
    let mut rows = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let confusion = cm
                .pairwise_fnr_at(a, b)
                .value
                .max(cm.pairwise_fnr_at(b, a).value);
            rows[a][b] = 1.0 - confusion;
            rows[b][a] = rows[a][b];
        }
    }
    DistanceMatrix {
        labels: cm.languages.clone(),
        values: rows.into_iter().flatten().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    Average,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cut {
    NClusters(usize),
    /// Merges at a linkage distance at or above this value are not applied.
    DistanceThreshold(f64),
}

/// One agglomeration step. Nodes `0..n` are leaves, node `n + k` is the
/// result of merge `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

/// Average-linkage agglomeration. At each step the pair with the smallest
/// average distance merges; ties go to the lexicographically smallest pair
/// of cluster keys, where a cluster's key is its smallest leaf index.
pub fn average_linkage(dist: &DistanceMatrix) -> Dendrogram {
    let n = dist.len();
    // Slot i holds the cluster whose smallest leaf is i; `sum` holds the
    // total leaf-to-leaf distance between two slots, so every linkage value
    // is a single division.
    let mut sum: Vec<f64> = dist.values.clone();
    let mut size = vec![1usize; n];
    let mut node = (0..n).collect::<Vec<_>>();
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            for j in ((i + 1)..n).filter(|&j| active[j]) {
                let v = sum[i * n + j] / (size[i] * size[j]) as f64;
                if best.map_or(true, |(b, _, _)| v < b) {
                    best = Some((v, i, j));
                }
            }
        }
        let (distance, i, j) = best.expect("at least two active clusters");
        for k in (0..n).filter(|&k| active[k] && k != i && k != j) {
            let v = sum[i * n + k] + sum[j * n + k];
            sum[i * n + k] = v;
            sum[k * n + i] = v;
        }
        active[j] = false;
        size[i] += size[j];
        merges.push(Merge {
            left: node[i],
            right: node[j],
            distance,
            size: size[i],
        });
        node[i] = n + step;
    }
    Dendrogram {
        n_leaves: n,
        merges,
    }
}

impl Dendrogram {
    /// Flat partition of the leaves as a label per leaf; labels are numbered
    /// by first appearance in leaf order.
    pub fn cut(&self, cut: Cut) -> Result<Vec<usize>> {
        let n = self.n_leaves;
        let applied = match cut {
            Cut::NClusters(k) => {
                if k < 1 || k > n {
                    return Err(Error::InvalidCut(format!(
                        "n_clusters {k} outside [1, {n}]"
                    )));
                }
                n - k
            }
            Cut::DistanceThreshold(t) => {
                if t.is_nan() {
                    return Err(Error::InvalidCut("distance threshold is NaN".into()));
                }
                self.merges.iter().take_while(|m| m.distance < t).count()
            }
        };
        let mut parent: Vec<usize> = (0..n + applied).collect();
        for (k, m) in self.merges.iter().take(applied).enumerate() {
            parent[m.left] = n + k;
            parent[m.right] = n + k;
        }
        let root = |mut x: usize| {
            while parent[x] != x {
                x = parent[x];
            }
            x
        };
        let mut numbering = BTreeMap::new();
        Ok((0..n)
            .map(|leaf| {
                let r = root(leaf);
                let next = numbering.len();
                *numbering.entry(r).or_insert(next)
            })
            .collect())
    }

    /// Leaves under `node`, ascending.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n_leaves {
                out.push(x);
            } else {
                let m = &self.merges[x - self.n_leaves];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn root(&self) -> Option<usize> {
        match self.n_leaves {
            0 => None,
            n => Some(n + self.merges.len() - 1),
        }
    }
}

/// A partition of languages into clusters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterMap {
    pub assignment: BTreeMap<String, ClusterId>,
    pub members: BTreeMap<ClusterId, Vec<String>>,
    /// Languages placed alone by policy (see [`add_singletons`]).
    pub singletons: BTreeSet<String>,
}

impl ClusterMap {
    /// Builds a map from `lang -> cluster` pairs. Member lists follow the
    /// iteration order of `pairs`.
    pub fn from_assignment<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, ClusterId)>,
        S: Into<String>,
    {
        let mut map = ClusterMap::default();
        for (lang, id) in pairs {
            let lang = lang.into();
            if let Some(old) = map.assignment.insert(lang.clone(), id) {
                map.remove_member(old, &lang);
            }
            map.members.entry(id).or_default().push(lang);
        }
        map
    }

    pub fn cluster_of(&self, lang: &str) -> Option<ClusterId> {
        self.assignment.get(lang).copied()
    }

    pub fn languages_in(&self, id: ClusterId) -> &[String] {
        self.members.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn max_cluster_size(&self) -> usize {
        self.members.values().map(Vec::len).max().unwrap_or(0)
    }

    fn next_id(&self) -> ClusterId {
        ClusterId(self.members.keys().next_back().map_or(0, |c| c.0 + 1))
    }

    fn remove_member(&mut self, id: ClusterId, lang: &str) {
        if let Some(list) = self.members.get_mut(&id) {
            list.retain(|l| l != lang);
            if list.is_empty() {
                self.members.remove(&id);
            }
        }
    }

    /// Every language appears in exactly one member list and the two views agree.
    pub fn is_consistent(&self) -> bool {
        let listed: usize = self.members.values().map(Vec::len).sum();
        listed == self.assignment.len()
            && self.members.iter().all(|(id, langs)| {
                !langs.is_empty() && langs.iter().all(|l| self.assignment.get(l) == Some(id))
            })
    }
}

/// Clusters the labels of `dist`; cluster ids follow the order of each
/// cluster's first label.
pub fn agglomerative_cluster(
    dist: &DistanceMatrix,
    linkage: Linkage,
    cut: Cut,
) -> Result<ClusterMap> {
    match linkage {
        Linkage::Average => {}
    }
    if dist.is_empty() {
        return match cut {
            Cut::NClusters(k) => Err(Error::InvalidCut(format!("n_clusters {k} outside [1, 0]"))),
            Cut::DistanceThreshold(_) => Ok(ClusterMap::default()),
        };
    }
    let labels = average_linkage(dist).cut(cut)?;
    Ok(ClusterMap::from_assignment(
        dist.labels
            .iter()
            .zip(labels)
            .map(|(l, c)| (l.clone(), ClusterId(c as u32))),
    ))
}

/// Splits every cluster larger than `max_size` top-down along its own
/// average-linkage dendrogram until all parts fit. The part holding the
/// cluster's first language keeps the old id; other parts get fresh ids.
pub fn resplit(map: &ClusterMap, dist: &DistanceMatrix, max_size: usize) -> Result<ClusterMap> {
    if max_size == 0 {
        return Err(Error::InvalidParameter(
            "max cluster size must be at least 1",
        ));
    }
    let mut out = map.clone();
    let oversized: Vec<ClusterId> = map
        .members
        .iter()
        .filter(|(_, m)| m.len() > max_size)
        .map(|(&id, _)| id)
        .collect();
    for id in oversized {
        let mut indices = Vec::new();
        for lang in &map.members[&id] {
            indices.push(
                dist.index_of(lang)
                    .ok_or_else(|| Error::UnknownLanguage(lang.clone()))?,
            );
        }
        indices.sort_unstable();
        let sub = dist.submatrix(&indices);
        let tree = average_linkage(&sub);
        let mut parts: Vec<Vec<usize>> = Vec::new();
        let mut stack = vec![tree.root().expect("non-empty cluster")];
        while let Some(node) = stack.pop() {
            let leaves = tree.leaves(node);
            if leaves.len() <= max_size {
                parts.push(leaves);
            } else {
                let m = tree.merges[node - tree.n_leaves];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
        parts.sort_unstable_by_key(|p| p[0]);
        out.members.remove(&id);
        for (k, part) in parts.into_iter().enumerate() {
            let part_id = if k == 0 { id } else { out.next_id() };
            let langs: Vec<String> = part.iter().map(|&i| sub.labels[i].clone()).collect();
            for l in &langs {
                out.assignment.insert(l.clone(), part_id);
            }
            out.members.insert(part_id, langs);
        }
    }
    Ok(out)
}

/// Moves each language into a fresh cluster of its own (idempotent for
/// languages that are already alone).
pub fn add_singletons<'a>(
    map: &ClusterMap,
    langs: impl IntoIterator<Item = &'a str>,
) -> ClusterMap {
    let mut out = map.clone();
    let langs: BTreeSet<&str> = langs.into_iter().collect();
    for lang in langs {
        match out.cluster_of(lang) {
            Some(id) if out.languages_in(id).len() == 1 => {}
            current => {
                if let Some(old) = current {
                    out.remove_member(old, lang);
                }
                let id = out.next_id();
                out.assignment.insert(lang.into(), id);
                out.members.insert(id, vec![String::from(lang)]);
            }
        }
        out.singletons.insert(lang.into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("l{i}")).collect()
    }

    fn three_points() -> DistanceMatrix {
        DistanceMatrix::new(
            labels(3),
            vec![
                vec![0.0, 0.1, 0.9],
                vec![0.1, 0.0, 0.9],
                vec![0.9, 0.9, 0.0],
            ],
        )
        .unwrap()
    }

    #[test]
    fn distance_examples() {
        let cm = ConfusionMatrix::from_counts(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![4, 6, 0], vec![2, 8, 0], vec![0, 0, 10]],
        )
        .unwrap();
        let d = fnr_distance_matrix(&cm);
        assert!((d.get(0, 1) - 0.4).abs() < 1e-12);
        assert_eq!(d.get(0, 1), d.get(1, 0));
        assert_eq!(d.get(0, 2), 1.0);
        for i in 0..3 {
            assert_eq!(d.get(i, i), 0.0);
        }
    }

    #[test]
    fn nearest_pair_merges_first() {
        let m =
            agglomerative_cluster(&three_points(), Linkage::Average, Cut::NClusters(2)).unwrap();
        assert_eq!(m.cluster_of("l0"), m.cluster_of("l1"));
        assert_ne!(m.cluster_of("l0"), m.cluster_of("l2"));
        let m =
            agglomerative_cluster(&three_points(), Linkage::Average, Cut::NClusters(3)).unwrap();
        assert_eq!(m.n_clusters(), 3);
        let m = agglomerative_cluster(
            &three_points(),
            Linkage::Average,
            Cut::DistanceThreshold(0.5),
        )
        .unwrap();
        assert_eq!(m.n_clusters(), 2);
    }

    #[test]
    fn invalid_cuts() {
        for k in [0, 4] {
            assert!(matches!(
                agglomerative_cluster(&three_points(), Linkage::Average, Cut::NClusters(k)),
                Err(Error::InvalidCut(_))
            ));
        }
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        assert_eq!(
            DistanceMatrix::new(labels(2), vec![vec![0.0, 0.1], vec![0.2, 0.0]]).unwrap_err(),
            Error::InvalidDistanceMatrix
        );
    }

    #[test]
    fn resplit_is_noop_when_small() {
        let d = three_points();
        let m = agglomerative_cluster(&d, Linkage::Average, Cut::NClusters(1)).unwrap();
        assert_eq!(resplit(&m, &d, 20).unwrap(), m);
    }

    #[test]
    fn resplit_bounds_size() {
        let n = 25;
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            0.0
                        } else {
                            0.1 + 0.01 * (i as f64 - j as f64).abs()
                        }
                    })
                    .collect()
            })
            .collect();
        let d = DistanceMatrix::new(labels(n), rows).unwrap();
        let m = agglomerative_cluster(&d, Linkage::Average, Cut::NClusters(1)).unwrap();
        let r = resplit(&m, &d, 20).unwrap();
        assert!(r.n_clusters() >= 2);
        assert!(r.max_cluster_size() <= 20);
        assert_eq!(r.assignment.len(), n);
        assert!(r.is_consistent());
    }

    #[test]
    fn singletons() {
        let m = ClusterMap::from_assignment(
            ["en", "a", "b", "c", "d"]
                .into_iter()
                .map(|l| (l, ClusterId(0))),
        );
        let s = add_singletons(&m, ["en", "fr"]);
        assert_eq!(s.languages_in(ClusterId(0)).len(), 4);
        let en = s.cluster_of("en").unwrap();
        assert_eq!(s.languages_in(en), ["en".to_string()]);
        assert_eq!(
            s.languages_in(s.cluster_of("fr").unwrap()),
            ["fr".to_string()]
        );
        assert!(s.is_consistent());
        assert_eq!(add_singletons(&s, ["en"]), s);
    }
}
