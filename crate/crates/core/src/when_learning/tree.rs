//! Greedy top-down decision tree over sparse categorical features.
//!
//! Splits are multiway on a single feature (one child per observed value,
//! plus an `ABSENT` child for examples lacking the feature) and are chosen
//! by information gain or gain ratio. Ties between equally good features
//! go to the lexicographically smallest feature name. The fitted tree
//! depends only on the multiset of examples, never on their insertion
//! order.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub const ABSENT: &str = "ABSENT";

/// Feature name to categorical value. Missing keys read as [`ABSENT`].
pub type FeatureMap = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SplitCriterion {
    /// Plain information gain.
    InfoGain,
    /// Gain divided by split information, among features whose gain is at
    /// least the average; penalizes splits into many small partitions.
    #[default]
    GainRatio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub criterion: SplitCriterion,
    /// Nodes with fewer examples become leaves.
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            criterion: SplitCriterion::default(),
            min_samples_split: 2,
            max_depth: None,
        }
    }
}

/// A growing training set with interned (feature, value) pairs so that
/// repeated refits do not re-hash strings.
#[derive(Debug, Clone)]
pub struct Dataset<C> {
    feat_ids: HashMap<String, u32>,
    feat_names: Vec<String>,
    pair_ids: HashMap<(u32, String), u32>,
    /// Per pair: (feature id, value).
    pairs: Vec<(u32, String)>,
    /// Each row: (feature id, pair id), sorted by feature id.
    rows: Vec<Vec<(u32, u32)>>,
    labels: Vec<C>,
}

impl<C> Default for Dataset<C> {
    fn default() -> Self {
        Dataset {
            feat_ids: HashMap::new(),
            feat_names: Vec::new(),
            pair_ids: HashMap::new(),
            pairs: Vec::new(),
            rows: Vec::new(),
            labels: Vec::new(),
        }
    }
}

impl<C: Ord + Clone> Dataset<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, features: &FeatureMap, label: C) {
        let mut row = Vec::with_capacity(features.len());
        for (name, value) in features {
            if value == ABSENT {
                continue;
            }
            let f = match self.feat_ids.get(name) {
                Some(&f) => f,
                None => {
                    let f = self.feat_names.len() as u32;
                    self.feat_names.push(name.clone());
                    self.feat_ids.insert(name.clone(), f);
                    f
                }
            };
            let key = (f, value.clone());
            let p = match self.pair_ids.get(&key) {
                Some(&p) => p,
                None => {
                    let p = self.pairs.len() as u32;
                    self.pairs.push(key.clone());
                    self.pair_ids.insert(key, p);
                    p
                }
            };
            row.push((f, p));
        }
        row.sort_unstable();
        self.rows.push(row);
        self.labels.push(label);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> &[C] {
        &self.labels
    }

    /// The features of row `i` as a map.
    pub fn row(&self, i: usize) -> FeatureMap {
        self.rows[i]
            .iter()
            .map(|&(f, p)| (self.feat_names[f as usize].clone(), self.pairs[p as usize].1.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Node<C> {
    Leaf {
        label: C,
        counts: Vec<(C, usize)>,
    },
    Split {
        feature: String,
        children: Vec<(String, Node<C>)>,
        /// Index of the child with the most training examples; unseen
        /// values are routed there.
        majority: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecisionTree<C> {
    root: Node<C>,
}

/// `n ln n` for `n` in `0..=len`.
fn g_table(len: usize) -> Vec<f64> {
    (0..=len)
        .map(|n| if n == 0 { 0.0 } else { n as f64 * (n as f64).ln() })
        .collect()
}

struct Fitter<'d, C> {
    data: &'d Dataset<C>,
    classes: Vec<C>,
    class_of: Vec<u32>,
    /// Rank of each feature id in name order, for tie-breaking.
    rank: Vec<u32>,
    g: Vec<f64>,
    cfg: &'d TreeConfig,
}

impl<'d, C: Ord + Clone> Fitter<'d, C> {
    fn counts(&self, idx: &[u32]) -> Vec<(u32, u32)> {
        let mut cs: Vec<u32> = idx.iter().map(|&i| self.class_of[i as usize]).collect();
        cs.sort_unstable();
        let mut out: Vec<(u32, u32)> = Vec::new();
        for c in cs {
            match out.last_mut() {
                Some((lc, n)) if *lc == c => *n += 1,
                _ => out.push((c, 1)),
            }
        }
        out
    }

    fn leaf(&self, counts: &[(u32, u32)]) -> Node<C> {
        // Most frequent class; ties go to the smallest class.
        let best = counts
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|&(c, _)| c)
            .unwrap_or(0);
        Node::Leaf {
            label: self.classes[best as usize].clone(),
            counts: counts
                .iter()
                .map(|&(c, n)| (self.classes[c as usize].clone(), n as usize))
                .collect(),
        }
    }

    /// Best split feature for the examples in `idx`, or `None` when no
    /// feature has positive gain.
    fn best_feature(&self, idx: &[u32], counts: &[(u32, u32)]) -> Option<u32> {
        let g = |k: u32| self.g[k as usize];
        let n = idx.len() as u32;
        let gc: f64 = counts.iter().map(|&(_, k)| g(k)).sum();
        let parent = g(n) - gc;

        // (feature, class, pair) packed so that numeric order is tuple order.
        const C_BITS: u32 = 20;
        const P_BITS: u32 = 22;
        let key = |f: u32, c: u32, p: u32| ((f as u64) << (C_BITS + P_BITS)) | ((c as u64) << P_BITS) | p as u64;
        let unpack = |k: u64| {
            (
                (k >> (C_BITS + P_BITS)) as u32,
                ((k >> P_BITS) & ((1 << C_BITS) - 1)) as u32,
                (k & ((1 << P_BITS) - 1)) as u32,
            )
        };
        let mut entries: Vec<u64> = Vec::new();
        for &i in idx {
            let c = self.class_of[i as usize];
            for &(f, p) in &self.data.rows[i as usize] {
                entries.push(key(f, c, p));
            }
        }
        entries.sort_unstable();
        let entries: Vec<(u32, u32, u32)> = entries.into_iter().map(unpack).collect();

        // (feature, gain, split information), both scaled by n.
        let mut scored: Vec<(u32, f64, f64)> = Vec::new();
        let mut values: Vec<(u32, u32, f64)> = Vec::new();
        let mut k = 0;
        while k < entries.len() {
            let f = entries[k].0;
            // Per value: (pair, count, sum of g over classes).
            values.clear();
            let mut listed = 0u32;
            let mut absent_adjust = 0.0;
            while k < entries.len() && entries[k].0 == f {
                let c = entries[k].1;
                let mut in_class = 0u32;
                while k < entries.len() && entries[k].0 == f && entries[k].1 == c {
                    let p = entries[k].2;
                    let mut m = 0u32;
                    while k < entries.len() && entries[k].0 == f && entries[k].1 == c && entries[k].2 == p {
                        m += 1;
                        k += 1;
                    }
                    match values.iter_mut().find(|v| v.0 == p) {
                        Some(v) => {
                            v.1 += m;
                            v.2 += g(m);
                        }
                        None => values.push((p, m, g(m))),
                    }
                    in_class += m;
                }
                listed += in_class;
                let pos = counts.binary_search_by_key(&c, |&(cc, _)| cc).expect("class in node");
                let total = counts[pos].1;
                absent_adjust += g(total) - g(total - in_class);
            }
            let absent_n = n - listed;
            let partitions = values.len() + usize::from(absent_n > 0);
            if partitions < 2 {
                continue;
            }
            let mut weighted: f64 = values.iter().map(|&(_, m, s)| g(m) - s).sum();
            weighted += g(absent_n) - (gc - absent_adjust);
            let gain = parent - weighted;
            if gain <= 1e-9 {
                continue;
            }
            let split = g(n) - values.iter().map(|&(_, m, _)| g(m)).sum::<f64>() - g(absent_n);
            scored.push((f, gain, split));
        }
        let floor = match self.cfg.criterion {
            SplitCriterion::InfoGain => 0.0,
            SplitCriterion::GainRatio if scored.is_empty() => 0.0,
            SplitCriterion::GainRatio => scored.iter().map(|s| s.1).sum::<f64>() / scored.len() as f64 - 1e-9,
        };
        let mut best: Option<(f64, u32)> = None;
        for (f, gain, split) in scored {
            if gain < floor {
                continue;
            }
            let score = match self.cfg.criterion {
                SplitCriterion::InfoGain => gain,
                SplitCriterion::GainRatio => gain / split.max(1e-12),
            };
            let better = match best {
                None => true,
                Some((bs, bf)) => {
                    score > bs + 1e-9 || ((score - bs).abs() <= 1e-9 && self.rank[f as usize] < self.rank[bf as usize])
                }
            };
            if better {
                best = Some((score, f));
            }
        }
        best.map(|(_, f)| f)
    }

    fn build(&self, idx: Vec<u32>, depth: usize) -> Node<C> {
        let counts = self.counts(&idx);
        if counts.len() <= 1
            || idx.len() < self.cfg.min_samples_split
            || self.cfg.max_depth.is_some_and(|d| depth >= d)
        {
            return self.leaf(&counts);
        }
        let Some(f) = self.best_feature(&idx, &counts) else {
            return self.leaf(&counts);
        };
        let mut parts: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
        for i in idx {
            let row = &self.data.rows[i as usize];
            let value = match row.binary_search_by_key(&f, |&(rf, _)| rf) {
                Ok(pos) => self.data.pairs[row[pos].1 as usize].1.as_str(),
                Err(_) => ABSENT,
            };
            parts.entry(value).or_default().push(i);
        }
        let mut majority = 0;
        let mut majority_n = 0;
        let children: Vec<(String, Node<C>)> = parts
            .into_iter()
            .enumerate()
            .map(|(ci, (v, sub))| {
                if sub.len() > majority_n {
                    majority = ci;
                    majority_n = sub.len();
                }
                (v.to_string(), self.build(sub, depth + 1))
            })
            .collect();
        Node::Split {
            feature: self.data.feat_names[f as usize].clone(),
            children,
            majority,
        }
    }
}

impl<C: Ord + Clone> DecisionTree<C> {
    /// Fits a tree; `None` for an empty dataset.
    pub fn fit(data: &Dataset<C>, cfg: &TreeConfig) -> Option<DecisionTree<C>> {
        if data.is_empty() {
            return None;
        }
        let mut classes: Vec<C> = data.labels.clone();
        classes.sort();
        classes.dedup();
        assert!(
            classes.len() < 1 << 20 && data.pairs.len() < 1 << 22 && data.feat_names.len() < 1 << 22,
            "dataset too large for packed split keys"
        );
        let class_of = data
            .labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label present") as u32)
            .collect();
        let mut order: Vec<u32> = (0..data.feat_names.len() as u32).collect();
        order.sort_by(|&a, &b| data.feat_names[a as usize].cmp(&data.feat_names[b as usize]));
        let mut rank = vec![0u32; order.len()];
        for (r, &f) in order.iter().enumerate() {
            rank[f as usize] = r as u32;
        }
        let fitter = Fitter {
            data,
            classes,
            class_of,
            rank,
            g: g_table(data.len()),
            cfg,
        };
        let root = fitter.build((0..data.len() as u32).collect(), 0);
        Some(DecisionTree { root })
    }

    pub fn root(&self) -> &Node<C> {
        &self.root
    }

    pub fn predict(&self, features: &FeatureMap) -> &C {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { label, .. } => return label,
                Node::Split {
                    feature,
                    children,
                    majority,
                } => {
                    let v = features.get(feature).map_or(ABSENT, String::as_str);
                    node = match children.iter().find(|(cv, _)| cv == v) {
                        Some((_, child)) => child,
                        None => &children[*majority].1,
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn d<C>(n: &Node<C>) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { children, .. } => 1 + children.iter().map(|(_, c)| d(c)).max().unwrap_or(0),
            }
        }
        d(&self.root)
    }

    pub fn n_leaves(&self) -> usize {
        fn l<C>(n: &Node<C>) -> usize {
            match n {
                Node::Leaf { .. } => 1,
                Node::Split { children, .. } => children.iter().map(|(_, c)| l(c)).sum(),
            }
        }
        l(&self.root)
    }

    /// Root-to-leaf condition paths ending in a leaf labeled `target`.
    /// Their disjunction is the rule form of the tree for that class.
    pub fn rules_for(&self, target: &C) -> Vec<Vec<(String, String)>> {
        fn walk<C: PartialEq>(
            n: &Node<C>,
            target: &C,
            path: &mut Vec<(String, String)>,
            out: &mut Vec<Vec<(String, String)>>,
        ) {
            match n {
                Node::Leaf { label, .. } => {
                    if label == target {
                        out.push(path.clone());
                    }
                }
                Node::Split { feature, children, .. } => {
                    for (v, c) in children {
                        path.push((feature.clone(), v.clone()));
                        walk(c, target, path, out);
                        path.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, target, &mut Vec::new(), &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fm(pairs: &[(&str, &str)]) -> FeatureMap {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn all_positive_is_single_leaf() {
        let mut d = Dataset::new();
        d.push(&fm(&[("f", "a")]), true);
        d.push(&fm(&[("f", "b")]), true);
        let t = DecisionTree::fit(&d, &TreeConfig::default()).unwrap();
        assert_eq!(t.n_leaves(), 1);
        assert!(*t.predict(&fm(&[])));
    }

    #[test]
    fn single_relevant_feature_gives_one_split() {
        let mut d = Dataset::new();
        d.push(&fm(&[("f", "a"), ("g", "x")]), true);
        d.push(&fm(&[("f", "b"), ("g", "x")]), false);
        let t = DecisionTree::fit(&d, &TreeConfig::default()).unwrap();
        assert_eq!(t.depth(), 1);
        match t.root() {
            Node::Split { feature, .. } => assert_eq!(feature, "f"),
            _ => panic!("expected split"),
        }
        assert!(*t.predict(&fm(&[("f", "a")])));
        assert!(!*t.predict(&fm(&[("f", "b")])));
    }

    #[test]
    fn ties_go_to_smallest_feature_name() {
        let mut d = Dataset::new();
        d.push(&fm(&[("z", "1"), ("m", "1")]), true);
        d.push(&fm(&[("z", "2"), ("m", "2")]), false);
        let t = DecisionTree::fit(&d, &TreeConfig::default()).unwrap();
        match t.root() {
            Node::Split { feature, .. } => assert_eq!(feature, "m"),
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn absent_is_its_own_branch() {
        let mut d = Dataset::new();
        d.push(&fm(&[("f", "a")]), true);
        d.push(&fm(&[]), false);
        d.push(&fm(&[("f", ABSENT)]), false);
        let t = DecisionTree::fit(&d, &TreeConfig::default()).unwrap();
        assert!(*t.predict(&fm(&[("f", "a")])));
        assert!(!*t.predict(&fm(&[])));
    }

    #[test]
    fn unseen_value_routes_to_majority_child() {
        // Oracle: the "a" branch holds 9 of 10 examples.
        let mut d = Dataset::new();
        for i in 0..9 {
            d.push(&fm(&[("f", "a"), ("i", &i.to_string())]), true);
        }
        d.push(&fm(&[("f", "b")]), false);
        let t = DecisionTree::fit(&d, &TreeConfig::default()).unwrap();
        assert!(*t.predict(&fm(&[("f", "zzz")])));
    }

    #[test]
    fn multiclass_memorization() {
        let mut d = Dataset::new();
        for a in 0..5 {
            for b in 0..5 {
                d.push(&fm(&[("a", &a.to_string()), ("b", &b.to_string())]), a * 5 + b);
            }
        }
        let t = DecisionTree::fit(&d, &TreeConfig::default()).unwrap();
        for i in 0..d.len() {
            assert_eq!(t.predict(&d.row(i)), &d.labels()[i]);
        }
    }

    #[test]
    fn rules_cover_positive_leaves() {
        let mut d = Dataset::new();
        d.push(&fm(&[("f", "a")]), true);
        d.push(&fm(&[("f", "b")]), false);
        d.push(&fm(&[("f", "c")]), true);
        let t = DecisionTree::fit(&d, &TreeConfig::default()).unwrap();
        let rules = t.rules_for(&true);
        assert_eq!(
            rules,
            vec![vec![("f".to_string(), "a".to_string())], vec![("f".to_string(), "c".to_string())]]
        );
    }

    fn root_feature(t: &DecisionTree<bool>) -> &str {
        match t.root() {
            Node::Split { feature, .. } => feature,
            Node::Leaf { .. } => panic!("expected split"),
        }
    }

    #[test]
    fn gain_ratio_avoids_identifier_features() {
        // "a" is unique per row and "b" is a binary cue; both separate the
        // labels perfectly, so plain gain ties and takes the smaller name.
        let mut d = Dataset::new();
        for i in 0..8 {
            let label = i % 2 == 0;
            d.push(&fm(&[("a", &i.to_string()), ("b", if label { "y" } else { "n" })]), label);
        }
        let gain = TreeConfig {
            criterion: SplitCriterion::InfoGain,
            ..TreeConfig::default()
        };
        assert_eq!(root_feature(&DecisionTree::fit(&d, &gain).unwrap()), "a");
        let ratio = DecisionTree::fit(&d, &TreeConfig::default()).unwrap();
        assert_eq!(root_feature(&ratio), "b");
        assert!(*ratio.predict(&fm(&[("a", "99"), ("b", "y")])));
    }
}
