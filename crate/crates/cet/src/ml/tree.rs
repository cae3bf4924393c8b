//! Binary CART decision tree: Gini impurity, midpoint thresholds, and a
//! lowest-feature-then-lowest-threshold tie-break so fits are fully
//! deterministic.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Hyperparams, TrainSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split { feature: u32, threshold: f64, left: u32, right: u32 },
    Leaf { prob: f64, n: u32 },
}

/// Fitted tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub n_features: usize,
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Positive-class fraction of the leaf the row lands in.
    pub fn score(&self, row: &[f64]) -> f64 {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Leaf { prob, .. } => return *prob,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

/// Per-feature sample orderings (ties broken by sample index). Sorted once
/// and partitioned down the tree so node fits never re-sort.
pub(crate) struct Presort {
    pub lists: Vec<Vec<u32>>,
}

pub(crate) fn presort(ts: &TrainSet) -> Presort {
    let n = ts.len();
    let mut lists = Vec::with_capacity(ts.d);
    for f in 0..ts.d {
        let mut idx: Vec<u32> = (0..n as u32).collect();
        idx.sort_by(|&a, &b| {
            ts.x[a as usize * ts.d + f]
                .total_cmp(&ts.x[b as usize * ts.d + f])
                .then(a.cmp(&b))
        });
        lists.push(idx);
    }
    Presort { lists }
}

/// Expands a presorted ordering to a bag with per-sample multiplicities
/// (bootstrap duplicates become adjacent repeated entries).
pub(crate) fn expand_bag(presort: &Presort, multiplicity: &[u32]) -> Vec<Vec<u32>> {
    presort
        .lists
        .iter()
        .map(|list| {
            let mut out = Vec::new();
            for &i in list {
                for _ in 0..multiplicity[i as usize] {
                    out.push(i);
                }
            }
            out
        })
        .collect()
}

struct Builder<'a, 'b> {
    ts: &'a TrainSet<'a>,
    hp: &'a Hyperparams,
    nodes: Vec<Node>,
    /// Number of features examined per split; None means all, in order.
    m_features: Option<usize>,
    rng: Option<&'b mut ChaCha8Rng>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl<'a, 'b> Builder<'a, 'b> {
    #[inline]
    fn value(&self, sample: u32, feature: usize) -> f64 {
        self.ts.x[sample as usize * self.ts.d + feature]
    }

    /// Scans one feature's sorted node list for the best boundary.
    /// `impurity` is the size-weighted child Gini sum (not divided by n).
    fn scan_feature(&self, feature: usize, list: &[u32], pos_total: usize) -> Option<BestSplit> {
        let n = list.len();
        let mut best: Option<BestSplit> = None;
        let mut pos_left = 0usize;
        for i in 1..n {
            if self.ts.y[list[i - 1] as usize] {
                pos_left += 1;
            }
            let prev = self.value(list[i - 1], feature);
            let cur = self.value(list[i], feature);
            if prev == cur {
                continue;
            }
            let nl = i as f64;
            let nr = (n - i) as f64;
            let pl = pos_left as f64;
            let pr = (pos_total - pos_left) as f64;
            // n_child * gini_child from exact counts; symmetric in the
            // two classes so mirrored splits tie exactly.
            let il = nl - (pl * pl + (nl - pl) * (nl - pl)) / nl;
            let ir = nr - (pr * pr + (nr - pr) * (nr - pr)) / nr;
            let impurity = il + ir;
            // Strict improvement keeps the lowest threshold on ties.
            if best.as_ref().map_or(true, |b| impurity < b.impurity) {
                best = Some(BestSplit { feature, threshold: (prev + cur) / 2.0, impurity });
            }
        }
        best
    }

    fn pick_features(&mut self) -> Option<Vec<usize>> {
        let m = self.m_features?;
        let mut all: Vec<usize> = (0..self.ts.d).collect();
        if m >= all.len() {
            return Some(all);
        }
        let rng = self.rng.as_deref_mut().expect("feature subsampling needs an rng");
        let (chosen, _) = all.partial_shuffle(rng, m);
        let mut chosen = chosen.to_vec();
        // Ascending order keeps the lowest-feature tie-break meaningful.
        chosen.sort_unstable();
        Some(chosen)
    }

    fn build(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> u32 {
        let n = lists[0].len();
        let pos = lists[0].iter().filter(|&&i| self.ts.y[i as usize]).count();
        let leaf = |nodes: &mut Vec<Node>| {
            let id = nodes.len() as u32;
            nodes.push(Node::Leaf { prob: pos as f64 / n as f64, n: n as u32 });
            id
        };
        if pos == 0 || pos == n || depth >= self.hp.max_depth || n < self.hp.min_samples_split {
            return leaf(&mut self.nodes);
        }
        let candidates = self.pick_features();
        let mut best: Option<BestSplit> = None;
        match &candidates {
            None => {
                for f in 0..self.ts.d {
                    if let Some(s) = self.scan_feature(f, &lists[f], pos) {
                        // Strict improvement keeps the lowest feature on ties.
                        if best.as_ref().map_or(true, |b| s.impurity < b.impurity) {
                            best = Some(s);
                        }
                    }
                }
            }
            Some(feats) => {
                for &f in feats {
                    if let Some(s) = self.scan_feature(f, &lists[f], pos) {
                        if best.as_ref().map_or(true, |b| s.impurity < b.impurity) {
                            best = Some(s);
                        }
                    }
                }
            }
        }
        let Some(split) = best else {
            return leaf(&mut self.nodes);
        };
        // Stable partition of every feature ordering by the chosen split.
        let goes_left: Vec<bool> = {
            let mut gl = vec![false; self.ts.len()];
            for &i in &lists[split.feature] {
                gl[i as usize] = self.value(i, split.feature) <= split.threshold;
            }
            gl
        };
        let mut left_lists = Vec::with_capacity(self.ts.d);
        let mut right_lists = Vec::with_capacity(self.ts.d);
        for list in lists {
            let mut l = Vec::new();
            let mut r = Vec::new();
            for i in list {
                if goes_left[i as usize] {
                    l.push(i);
                } else {
                    r.push(i);
                }
            }
            left_lists.push(l);
            right_lists.push(r);
        }
        let id = self.nodes.len() as u32;
        // Placeholder; patched once the children exist.
        self.nodes.push(Node::Leaf { prob: 0.0, n: 0 });
        let left = self.build(left_lists, depth + 1);
        let right = self.build(right_lists, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature: split.feature as u32,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

pub(crate) fn fit_tree_from_lists(
    ts: &TrainSet,
    hp: &Hyperparams,
    lists: Vec<Vec<u32>>,
    m_features: Option<usize>,
    rng: Option<&mut ChaCha8Rng>,
) -> DecisionTree {
    let mut b = Builder { ts, hp, nodes: Vec::new(), m_features, rng };
    let root = b.build(lists, 0);
    debug_assert_eq!(root, 0);
    DecisionTree { n_features: ts.d, nodes: b.nodes }
}

/// Fits a deterministic tree on the full training set with all features.
pub fn fit_tree(ts: &TrainSet, hp: &Hyperparams) -> DecisionTree {
    let sorted = presort(ts);
    fit_tree_from_lists(ts, hp, sorted.lists, None, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts<'a>(x: &'a [f64], d: usize, y: &'a [bool]) -> TrainSet<'a> {
        TrainSet::new(x, d, y).unwrap()
    }

    #[test]
    fn single_feature_split_at_midpoint() {
        let x = [1.0, 2.0, 10.0, 11.0];
        let y = [false, false, true, true];
        let t = fit_tree(&ts(&x, 1, &y), &Hyperparams::default());
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 6.0);
            }
            other => panic!("expected split at root, got {other:?}"),
        }
        assert_eq!(t.score(&[0.0]), 0.0);
        assert_eq!(t.score(&[100.0]), 1.0);
        assert_eq!(t.score(&[6.0]), 0.0); // boundary value goes left
    }

    #[test]
    fn tie_break_prefers_lowest_feature() {
        // Feature 1 is a copy of feature 0: identical gain everywhere.
        let x = [1.0, 1.0, 2.0, 2.0, 10.0, 10.0, 11.0, 11.0];
        let y = [false, false, true, true];
        let t = fit_tree(&ts(&x, 2, &y), &Hyperparams::default());
        match &t.nodes[0] {
            Node::Split { feature, .. } => assert_eq!(*feature, 0),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn tie_break_prefers_lowest_threshold() {
        // Both boundaries of the middle point give equal impurity; the
        // scan must keep the lower midpoint.
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [false, true, false, true];
        let t = fit_tree(&ts(&x, 1, &y), &Hyperparams { max_depth: 1, ..Default::default() });
        match &t.nodes[0] {
            Node::Split { threshold, .. } => assert_eq!(*threshold, 0.5),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn pure_node_becomes_leaf() {
        let x = [1.0, 2.0, 3.0];
        let y = [true, true, true];
        let t = fit_tree(&ts(&x, 1, &y), &Hyperparams::default());
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.score(&[2.0]), 1.0);
    }

    #[test]
    fn max_depth_limits_tree() {
        // Alternating labels force deep splits when unconstrained.
        let x: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let y: Vec<bool> = (0..32).map(|i| i % 2 == 0).collect();
        let deep = fit_tree(&ts(&x, 1, &y), &Hyperparams::default());
        assert!(deep.depth() > 2);
        let hp = Hyperparams { max_depth: 2, ..Default::default() };
        let shallow = fit_tree(&ts(&x, 1, &y), &hp);
        assert!(shallow.depth() <= 2);
    }

    #[test]
    fn min_samples_split_stops_early() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [false, true, false, true];
        let hp = Hyperparams { min_samples_split: 5, ..Default::default() };
        let t = fit_tree(&ts(&x, 1, &y), &hp);
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.score(&[0.0]), 0.5);
    }

    #[test]
    fn constant_features_yield_leaf() {
        let x = [5.0, 5.0, 5.0, 5.0];
        let y = [false, true, false, true];
        let t = fit_tree(&ts(&x, 1, &y), &Hyperparams::default());
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn separates_two_informative_features() {
        // Positive iff f0 > 5 and f1 > 5; needs two levels.
        let mut x = Vec::new();
        let mut y = Vec::new();
        for a in [1.0, 9.0] {
            for b in [1.0, 9.0] {
                for j in 0..5 {
                    x.push(a + j as f64 * 0.1);
                    x.push(b + j as f64 * 0.1);
                    y.push(a > 5.0 && b > 5.0);
                }
            }
        }
        let t = fit_tree(&ts(&x, 2, &y), &Hyperparams::default());
        for (i, row) in x.chunks(2).enumerate() {
            assert_eq!(t.score(row) >= 0.5, y[i]);
        }
    }
}
