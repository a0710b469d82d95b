//! Gain-ratio decision tree over numeric attributes with missing values.
//!
//! Splits are binary thresholds chosen by gain ratio. Gain is computed on the
//! records whose split attribute is observed and scaled by their share of the
//! node weight; split information counts the unobserved weight as a third
//! branch. A record missing the split attribute descends into both children,
//! its weight divided in proportion to the observed weight routed each way.
//! Prediction blends children by the same proportions.
//!
//! Trees are unpruned. Nodes are stored in a flat vector with the root at
//! index 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Two candidates whose gain ratios differ by less than this are tied; the
/// earlier one (lower attribute, then lower threshold) is kept.
pub const TIE_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Minimum observed weight on each side of a split.
    pub min_leaf_weight: f64,
    /// `None` grows until another rule stops.
    pub max_depth: Option<usize>,
    /// A split is taken only if its gain ratio exceeds this.
    pub min_split_gain: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            min_leaf_weight: 2.0,
            max_depth: None,
            min_split_gain: 1e-9,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_leaf_weight >= 1.0) {
            return Err(Error::Invalid(format!(
                "min_leaf_weight must be >= 1, got {}",
                self.min_leaf_weight
            )));
        }
        if !(self.min_split_gain >= 0.0) {
            return Err(Error::Invalid(format!(
                "min_split_gain must be >= 0, got {}",
                self.min_split_gain
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    /// Weighted class counts of the training records reaching the leaf.
    Leaf { distribution: Vec<f64> },
    /// Observed values `<= threshold` go left. `branch_weights` are the
    /// fractions of observed training weight sent left and right.
    Split {
        attr: usize,
        threshold: f64,
        left: usize,
        right: usize,
        branch_weights: [f64; 2],
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedRecord {
    pub index: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    n_classes: usize,
    n_features: usize,
}

/// Shannon entropy in bits of a weight vector.
pub fn entropy(weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum()
}

fn split_info(parts: &[f64], total: f64) -> f64 {
    parts
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| {
            let p = w / total;
            -p * p.log2()
        })
        .sum()
}

/// Gain ratio from class weights of the left, right and observed parts and
/// the unobserved weight at the node.
fn ratio_from_parts(left: &[f64], right: &[f64], known: &[f64], missing_weight: f64) -> f64 {
    let wl: f64 = left.iter().sum();
    let wr: f64 = right.iter().sum();
    let wk = wl + wr;
    if wk <= 0.0 {
        return 0.0;
    }
    let total = wk + missing_weight;
    let gain = (wk / total) * (entropy(known) - (wl / wk) * entropy(left) - (wr / wk) * entropy(right));
    let si = split_info(&[wl, wr, missing_weight], total);
    if si <= 0.0 {
        0.0
    } else {
        gain / si
    }
}

/// Gain ratio of splitting `records` on `attr` at `threshold`. Degenerate
/// inputs give 0.
pub fn gain_ratio(data: &Dataset, records: &[WeightedRecord], attr: usize, threshold: f64) -> f64 {
    let c = data.n_classes();
    let mut left = vec![0.0; c];
    let mut right = vec![0.0; c];
    let mut missing = 0.0;
    for rec in records {
        match data.get(rec.index, attr) {
            Some(v) if v <= threshold => left[data.label(rec.index)] += rec.weight,
            Some(_) => right[data.label(rec.index)] += rec.weight,
            None => missing += rec.weight,
        }
    }
    let known: Vec<f64> = left.iter().zip(&right).map(|(a, b)| a + b).collect();
    ratio_from_parts(&left, &right, &known, missing)
}

struct Candidate {
    attr: usize,
    threshold: f64,
    ratio: f64,
    branch_weights: [f64; 2],
}

struct Builder<'a> {
    data: &'a Dataset,
    config: &'a TreeConfig,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn class_weights(&self, records: &[WeightedRecord]) -> Vec<f64> {
        let mut w = vec![0.0; self.data.n_classes()];
        for r in records {
            w[self.data.label(r.index)] += r.weight;
        }
        w
    }

    fn best_split(&self, records: &[WeightedRecord], total: f64) -> Option<Candidate> {
        let c = self.data.n_classes();
        let min_leaf = self.config.min_leaf_weight;
        let mut best: Option<Candidate> = None;
        let mut known: Vec<(f64, usize, f64)> = Vec::with_capacity(records.len());
        for attr in 0..self.data.n_features() {
            known.clear();
            known.extend(
                records
                    .iter()
                    .filter_map(|r| self.data.get(r.index, attr).map(|v| (v, self.data.label(r.index), r.weight))),
            );
            if known.len() < 2 {
                continue;
            }
            known.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut known_dist = vec![0.0; c];
            for &(_, y, w) in &known {
                known_dist[y] += w;
            }
            let wk: f64 = known_dist.iter().sum();
            if wk < 2.0 * min_leaf {
                continue;
            }
            let missing_weight = (total - wk).max(0.0);
            let mut left = vec![0.0; c];
            let mut right = known_dist.clone();
            let mut wl = 0.0;
            for i in 0..known.len() - 1 {
                let (v, y, w) = known[i];
                left[y] += w;
                right[y] -= w;
                wl += w;
                let next = known[i + 1].0;
                if next == v {
                    continue;
                }
                let wr = wk - wl;
                if wl < min_leaf || wr < min_leaf {
                    continue;
                }
                let mid = 0.5 * (v + next);
                // adjacent floats: the midpoint may round onto `next`
                let threshold = if mid < next { mid } else { v };
                let ratio = ratio_from_parts(&left, &right, &known_dist, missing_weight);
                if best.as_ref().is_none_or(|b| ratio > b.ratio + TIE_EPSILON) {
                    best = Some(Candidate {
                        attr,
                        threshold,
                        ratio,
                        branch_weights: [wl / wk, wr / wk],
                    });
                }
            }
        }
        best
    }

    fn leaf(&mut self, distribution: Vec<f64>) -> usize {
        self.nodes.push(TreeNode::Leaf { distribution });
        self.nodes.len() - 1
    }

    fn grow(&mut self, records: Vec<WeightedRecord>, depth: usize) -> usize {
        let dist = self.class_weights(&records);
        let total: f64 = dist.iter().sum();
        let pure = dist.iter().filter(|&&w| w > 0.0).count() <= 1;
        let depth_capped = self.config.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || total < 2.0 * self.config.min_leaf_weight {
            return self.leaf(dist);
        }
        let Some(best) = self.best_split(&records, total) else {
            return self.leaf(dist);
        };
        if best.ratio <= self.config.min_split_gain {
            return self.leaf(dist);
        }
        let [bl, br] = best.branch_weights;
        let mut left = Vec::new();
        let mut right = Vec::new();
        for r in records {
            match self.data.get(r.index, best.attr) {
                Some(v) if v <= best.threshold => left.push(r),
                Some(_) => right.push(r),
                None => {
                    if bl > 0.0 {
                        left.push(WeightedRecord { index: r.index, weight: r.weight * bl });
                    }
                    if br > 0.0 {
                        right.push(WeightedRecord { index: r.index, weight: r.weight * br });
                    }
                }
            }
        }
        // reserve the slot so the parent precedes its children
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { distribution: Vec::new() });
        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id] = TreeNode::Split {
            attr: best.attr,
            threshold: best.threshold,
            left: l,
            right: r,
            branch_weights: best.branch_weights,
        };
        id
    }
}

impl DecisionTree {
    /// Grows a tree on `data`. `weights` gives per-record instance weights
    /// (all 1 when `None`).
    pub fn train(data: &Dataset, config: &TreeConfig, weights: Option<&[f64]>) -> Result<Self> {
        config.validate()?;
        let records: Vec<WeightedRecord> = match weights {
            None => (0..data.n_records())
                .map(|index| WeightedRecord { index, weight: 1.0 })
                .collect(),
            Some(w) => {
                if w.len() != data.n_records() {
                    return Err(Error::Dimension(format!(
                        "{} weights for {} records",
                        w.len(),
                        data.n_records()
                    )));
                }
                if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                    return Err(Error::Invalid("instance weights must be finite and >= 0".into()));
                }
                w.iter()
                    .enumerate()
                    .filter(|(_, &x)| x > 0.0)
                    .map(|(index, &weight)| WeightedRecord { index, weight })
                    .collect()
            }
        };
        if records.is_empty() {
            return Err(Error::Invalid("empty training set".into()));
        }
        let mut b = Builder {
            data,
            config,
            nodes: Vec::new(),
        };
        b.grow(records, 0);
        Ok(DecisionTree {
            nodes: b.nodes,
            n_classes: data.n_classes(),
            n_features: data.n_features(),
        })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Class probabilities for a record; unobserved split attributes blend
    /// both children by their branch weights.
    pub fn predict_dist(&self, row: &[f64], mask: &[bool]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes];
        self.accumulate(0, row, mask, 1.0, &mut out);
        let total: f64 = out.iter().sum();
        if total > 0.0 {
            for p in &mut out {
                *p /= total;
            }
        }
        out
    }

    fn accumulate(&self, i: usize, row: &[f64], mask: &[bool], weight: f64, out: &mut [f64]) {
        match &self.nodes[i] {
            TreeNode::Leaf { distribution } => {
                let total: f64 = distribution.iter().sum();
                if total > 0.0 {
                    for (o, d) in out.iter_mut().zip(distribution) {
                        *o += weight * d / total;
                    }
                }
            }
            TreeNode::Split {
                attr,
                threshold,
                left,
                right,
                branch_weights,
            } => {
                if mask[*attr] {
                    let next = if row[*attr] <= *threshold { *left } else { *right };
                    self.accumulate(next, row, mask, weight, out);
                } else {
                    for (child, bw) in [(*left, branch_weights[0]), (*right, branch_weights[1])] {
                        if bw > 0.0 {
                            self.accumulate(child, row, mask, weight * bw, out);
                        }
                    }
                }
            }
        }
    }

    /// Most probable class, ties to the lowest index.
    pub fn predict(&self, row: &[f64], mask: &[bool]) -> usize {
        argmax(&self.predict_dist(row, mask))
    }

    /// Indented text rendering, one node per line.
    pub fn dump(&self, feature_names: Option<&[String]>) -> String {
        let mut s = String::new();
        self.dump_node(0, 0, feature_names, &mut s);
        s
    }

    fn dump_node(&self, i: usize, depth: usize, names: Option<&[String]>, s: &mut String) {
        let pad = "  ".repeat(depth);
        match &self.nodes[i] {
            TreeNode::Leaf { distribution } => {
                let d: Vec<String> = distribution.iter().map(|w| format!("{w:.3}")).collect();
                let _ = writeln!(s, "{pad}leaf class={} [{}]", argmax(distribution), d.join(", "));
            }
            TreeNode::Split {
                attr,
                threshold,
                left,
                right,
                branch_weights,
            } => {
                let name = names
                    .and_then(|n| n.get(*attr))
                    .cloned()
                    .unwrap_or_else(|| format!("x{attr}"));
                let _ = writeln!(s, "{pad}{name} <= {threshold} (w={:.3})", branch_weights[0]);
                self.dump_node(*left, depth + 1, names, s);
                let _ = writeln!(s, "{pad}{name} > {threshold} (w={:.3})", branch_weights[1]);
                self.dump_node(*right, depth + 1, names, s);
            }
        }
    }
}

/// Index of the largest entry, ties to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one_d(xs: &[Option<f64>], labels: &[usize]) -> Dataset {
        // constant second attribute: never split on, keeps every record non-empty
        let rows: Vec<Vec<Option<f64>>> = xs.iter().map(|x| vec![*x, Some(0.0)]).collect();
        Dataset::from_rows("t", vec!["x".into(), "z".into()], &rows, labels.to_vec(), vec!["A".into(), "B".into()]).unwrap()
    }

    fn all(n: usize) -> Vec<WeightedRecord> {
        (0..n).map(|index| WeightedRecord { index, weight: 1.0 }).collect()
    }

    #[test]
    fn gain_ratio_examples() {
        let pure = one_d(&[Some(1.0), Some(2.0), Some(3.0)], &[0, 0, 0]);
        assert_eq!(gain_ratio(&pure, &all(3), 0, 1.5), 0.0);

        let sep = one_d(&[Some(1.0), Some(2.0), Some(8.0), Some(9.0)], &[0, 0, 1, 1]);
        assert_abs_diff_eq!(gain_ratio(&sep, &all(4), 0, 5.0), 1.0, epsilon = 1e-12);

        let xs = [Some(1.0), Some(2.0), Some(3.0), Some(7.0), Some(8.0), Some(9.0), None, None];
        let d = one_d(&xs, &[0, 0, 0, 1, 1, 1, 0, 1]);
        let si = -(2.0 * 0.375 * 0.375f64.log2() + 0.25 * 0.25f64.log2());
        let expect = 0.75 / si;
        assert_abs_diff_eq!(gain_ratio(&d, &all(8), 0, 5.0), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(expect, 0.4804, epsilon = 1e-4);
    }

    #[test]
    fn single_class_gives_single_leaf() {
        let d = Dataset::complete("s", &[vec![1.0], vec![2.0], vec![3.0]], vec![1, 1, 1], 2).unwrap();
        let t = DecisionTree::train(&d, &TreeConfig::default(), None).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict(&[0.0], &[true]), 1);
    }

    #[test]
    fn separable_one_dimensional() {
        let d = one_d(&[Some(1.0), Some(2.0), Some(8.0), Some(9.0)], &[0, 0, 1, 1]);
        let t = DecisionTree::train(&d, &TreeConfig::default(), None).unwrap();
        let TreeNode::Split { threshold, .. } = t.root() else { panic!("no split") };
        assert!(*threshold > 2.0 && *threshold < 8.0);
        assert_eq!(t.predict_dist(&[1.5, 0.0], &[true, true]), vec![1.0, 0.0]);
        assert_eq!(t.predict_dist(&[8.5, 0.0], &[true, true]), vec![0.0, 1.0]);
        assert_eq!(t.predict_dist(&[0.0, 0.0], &[false, true]), vec![0.5, 0.5]);
    }

    #[test]
    fn fractional_descent_of_missing_record() {
        let d = one_d(&[Some(1.0), Some(2.0), Some(8.0), Some(9.0), None], &[0, 0, 1, 1, 0]);
        let t = DecisionTree::train(&d, &TreeConfig::default(), None).unwrap();
        let TreeNode::Split { left, right, branch_weights, .. } = t.root() else { panic!("no split") };
        assert_eq!(*branch_weights, [0.5, 0.5]);
        let TreeNode::Leaf { distribution: l } = &t.nodes()[*left] else { panic!() };
        let TreeNode::Leaf { distribution: r } = &t.nodes()[*right] else { panic!() };
        assert_eq!(l, &vec![2.5, 0.0]);
        assert_eq!(r, &vec![0.5, 2.0]);
        assert_abs_diff_eq!(l[0] - 2.0 + r[0], 1.0);
    }

    #[test]
    fn leaf_distribution_is_normalized() {
        let t = DecisionTree {
            nodes: vec![TreeNode::Leaf { distribution: vec![3.0, 1.0] }],
            n_classes: 2,
            n_features: 1,
        };
        assert_eq!(t.predict_dist(&[0.0], &[true]), vec![0.75, 0.25]);
    }

    #[test]
    fn instance_weights_and_errors() {
        let d = one_d(&[Some(1.0), Some(2.0), Some(8.0), Some(9.0)], &[0, 0, 1, 1]);
        let cfg = TreeConfig::default();
        assert!(DecisionTree::train(&d, &cfg, Some(&[0.0; 4])).is_err());
        assert!(DecisionTree::train(&d, &cfg, Some(&[1.0; 3])).is_err());
        assert!(DecisionTree::train(&d, &cfg, Some(&[1.0, -1.0, 1.0, 1.0])).is_err());
        let t = DecisionTree::train(&d, &cfg, Some(&[2.0, 2.0, 2.0, 2.0])).unwrap();
        assert_eq!(t.n_leaves(), 2);
        let bad = TreeConfig { min_leaf_weight: 0.5, ..cfg };
        assert!(DecisionTree::train(&d, &bad, None).is_err());
    }

    #[test]
    fn max_depth_caps_growth() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let labels: Vec<usize> = (0..40).map(|i| (i / 5) % 2).collect();
        let d = Dataset::complete("z", &rows, labels, 2).unwrap();
        let cfg = TreeConfig { max_depth: Some(2), ..TreeConfig::default() };
        let t = DecisionTree::train(&d, &cfg, None).unwrap();
        assert!(t.depth() <= 2);
        let unlimited = DecisionTree::train(&d, &TreeConfig::default(), None).unwrap();
        assert!(unlimited.depth() > 2);
    }

    #[test]
    fn serde_round_trip_and_dump() {
        let d = one_d(&[Some(1.0), Some(2.0), Some(8.0), Some(9.0), None], &[0, 0, 1, 1, 0]);
        let t = DecisionTree::train(&d, &TreeConfig::default(), None).unwrap();
        let back: DecisionTree = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        let text = t.dump(Some(&["x".to_string(), "z".to_string()]));
        assert!(text.starts_with("x <= 5 (w=0.500)"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn argmax_ties_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3, 0.3]), 1);
    }
}
