use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{FeatureMatrix, FeatureRow};
use crate::corpus::Polarity;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub min_impurity_decrease: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            min_impurity_decrease: 0.0,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::InvalidArgument("max_depth must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidArgument("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidArgument("min_samples_leaf must be at least 1".into()));
        }
        if !(self.min_impurity_decrease >= 0.0 && self.min_impurity_decrease.is_finite()) {
            return Err(Error::InvalidArgument(
                "min_impurity_decrease must be a finite value >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Gini impurity `1 - sum (c_i / n)^2`.
pub fn gini<T: Scalar>(counts: &[usize; 3]) -> Result<T> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::Empty("gini of all-zero class counts"));
    }
    let n = T::from_count(n);
    let s: T = counts.iter().map(|&c| (T::from_count(c) / n).powi(2)).sum();
    Ok(T::one() - s)
}

/// Winning split of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature: usize,
    pub threshold: T,
    /// Exact weighted impurity decrease.
    pub decrease: Ratio<u128>,
}

impl<T: Scalar> SplitCandidate<T> {
    pub fn decrease_f64(&self) -> f64 {
        *self.decrease.numer() as f64 / *self.decrease.denom() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
#[serde(bound = "T: Scalar")]
pub enum Node<T> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [usize; 3],
        label: Polarity,
    },
}

/// Fitted CART tree. Nodes are stored in preorder; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DecisionTree<T> {
    params: TreeParams,
    n_features: usize,
    nodes: Vec<Node<T>>,
}

fn class_counts(y: &[Polarity], samples: &[usize]) -> [usize; 3] {
    let mut c = [0usize; 3];
    for &i in samples {
        c[y[i].index()] += 1;
    }
    c
}

fn sum_sq(c: &[usize; 3]) -> u128 {
    c.iter().map(|&v| (v as u128) * (v as u128)).sum()
}

/// Majority label; ties go to the lowest encoding.
pub(crate) fn majority(counts: &[usize; 3]) -> Polarity {
    let mut best = 0;
    for k in 1..3 {
        if counts[k] > counts[best] {
            best = k;
        }
    }
    Polarity::ALL[best]
}

fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let two = T::one() + T::one();
    let mut t = (lo + hi) / two;
    if !t.is_finite() {
        t = lo / two + hi / two;
    }
    if t >= hi || t < lo {
        t = lo;
    }
    t
}

/// Score of a partition: `Sl/nl + Sr/nr` as a fraction (numerator, denominator).
/// Maximizing it maximizes the weighted Gini decrease for a fixed parent.
#[derive(Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn of(left: &[usize; 3], nl: usize, right: &[usize; 3], nr: usize) -> Score {
        let (nl, nr) = (nl as u128, nr as u128);
        Score {
            num: sum_sq(left) * nr + sum_sq(right) * nl,
            den: nl * nr,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

/// Per-feature best threshold over the sorted value groups of one node.
fn scan_feature<T: Scalar>(
    mut values: Vec<(T, usize)>,
    node_counts: &[usize; 3],
    n: usize,
    min_leaf: usize,
) -> Option<(T, Score)> {
    let mut zero = *node_counts;
    for &(_, k) in &values {
        zero[k] -= 1;
    }
    let n_zero = n - values.len();
    if n_zero > 0 {
        // Placed so the stable sort below keeps it among the other zeros.
        values.push((T::zero(), usize::MAX));
    }
    values.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));

    let mut groups: Vec<(T, [usize; 3])> = Vec::new();
    for (v, k) in values {
        if groups.last().is_none_or(|g| g.0 != v) {
            groups.push((v, [0; 3]));
        }
        let g = &mut groups.last_mut().expect("just pushed").1;
        if k == usize::MAX {
            for c in 0..3 {
                g[c] += zero[c];
            }
        } else {
            g[k] += 1;
        }
    }

    let mut best: Option<(T, Score)> = None;
    let mut left = [0usize; 3];
    let mut nl = 0usize;
    for w in groups.windows(2) {
        for c in 0..3 {
            left[c] += w[0].1[c];
        }
        nl += w[0].1.iter().sum::<usize>();
        let nr = n - nl;
        if nl < min_leaf || nr < min_leaf {
            continue;
        }
        let right = [node_counts[0] - left[0], node_counts[1] - left[1], node_counts[2] - left[2]];
        let score = Score::of(&left, nl, &right, nr);
        if best.as_ref().is_none_or(|(_, b)| score.cmp(b) == Ordering::Greater) {
            best = Some((midpoint(w[0].0, w[1].0), score));
        }
    }
    best
}

fn best_split_in<T: Scalar>(
    x: &FeatureMatrix<T>,
    y: &[Polarity],
    samples: &[usize],
    allowed: Option<&[bool]>,
    params: &TreeParams,
) -> Option<SplitCandidate<T>> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let counts = class_counts(y, samples);
    let mut columns: BTreeMap<usize, Vec<(T, usize)>> = BTreeMap::new();
    for &i in samples {
        for (j, v) in x.row(i).nonzeros() {
            if allowed.is_none_or(|a| a[j]) {
                columns.entry(j).or_default().push((v, y[i].index()));
            }
        }
    }
    let min_leaf = params.min_samples_leaf.max(1);
    let columns: Vec<(usize, Vec<(T, usize)>)> = columns.into_iter().collect();
    let scored: Vec<(usize, T, Score)> = columns
        .into_par_iter()
        .filter_map(|(j, vals)| scan_feature(vals, &counts, n, min_leaf).map(|(t, s)| (j, t, s)))
        .collect();

    // Sequential reduce in feature order; only a strictly better score wins.
    let mut best: Option<(usize, T, Score)> = None;
    for cand in scored {
        if best.as_ref().is_none_or(|b| cand.2.cmp(&b.2) == Ordering::Greater) {
            best = Some(cand);
        }
    }
    let (feature, threshold, score) = best?;

    // decrease = (score - Sp/n) / n
    let nn = n as u128;
    let sp = sum_sq(&counts);
    let lhs = score.num * nn;
    let rhs = sp * score.den;
    if lhs <= rhs {
        return None;
    }
    let decrease = Ratio::new(lhs - rhs, score.den * nn * nn);
    let cand = SplitCandidate {
        feature,
        threshold,
        decrease,
    };
    if cand.decrease_f64() > params.min_impurity_decrease {
        Some(cand)
    } else {
        None
    }
}

/// Best split of the node holding `samples`, searching `features` (all when `None`).
pub fn best_split<T: Scalar>(
    x: &FeatureMatrix<T>,
    y: &[Polarity],
    samples: &[usize],
    features: Option<&[usize]>,
    params: &TreeParams,
) -> Option<SplitCandidate<T>> {
    let mask = features.map(|fs| {
        let mut m = vec![false; x.n_cols()];
        for &f in fs {
            if f < m.len() {
                m[f] = true;
            }
        }
        m
    });
    best_split_in(x, y, samples, mask.as_deref(), params)
}

enum Side {
    Left,
    Right,
}

struct Task {
    samples: Vec<usize>,
    depth: usize,
    parent: Option<(usize, Side)>,
}

/// Greedy CART induction with Gini impurity.
pub fn fit_tree<T: Scalar>(x: &FeatureMatrix<T>, y: &[Polarity], params: &TreeParams) -> Result<DecisionTree<T>> {
    params.validate()?;
    if y.is_empty() {
        return Err(Error::Empty("no training samples"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::Dimension {
            expected: y.len(),
            found: x.n_rows(),
        });
    }
    let mut nodes: Vec<Node<T>> = Vec::new();
    let mut stack = vec![Task {
        samples: (0..y.len()).collect(),
        depth: 0,
        parent: None,
    }];
    while let Some(task) = stack.pop() {
        let id = nodes.len();
        if let Some((p, side)) = &task.parent {
            if let Node::Split { left, right, .. } = &mut nodes[*p] {
                match side {
                    Side::Left => *left = id,
                    Side::Right => *right = id,
                }
            }
        }
        let counts = class_counts(y, &task.samples);
        let n = task.samples.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_ok = params.max_depth.is_none_or(|d| task.depth < d);
        let split = if pure || !depth_ok || n < params.min_samples_split {
            None
        } else {
            best_split_in(x, y, &task.samples, None, params)
        };
        match split {
            None => nodes.push(Node::Leaf {
                counts,
                label: majority(&counts),
            }),
            Some(s) => {
                let (l, r): (Vec<usize>, Vec<usize>) = task
                    .samples
                    .iter()
                    .partition(|&&i| x.row(i).value(s.feature) <= s.threshold);
                nodes.push(Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: usize::MAX,
                    right: usize::MAX,
                });
                stack.push(Task {
                    samples: r,
                    depth: task.depth + 1,
                    parent: Some((id, Side::Right)),
                });
                stack.push(Task {
                    samples: l,
                    depth: task.depth + 1,
                    parent: Some((id, Side::Left)),
                });
            }
        }
    }
    Ok(DecisionTree {
        params: params.clone(),
        n_features: x.n_cols(),
        nodes,
    })
}

impl<T: Scalar> DecisionTree<T> {
    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Structural checks for trees read from disk: children come after their
    /// parent in preorder, indices are in range and leaves are non-empty.
    pub(crate) fn check(&self) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= self.n_features {
                        return Err(format!("node {i}: feature {feature} out of range"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    for c in [left, right] {
                        if *c <= i || *c >= self.nodes.len() {
                            return Err(format!("node {i}: child index {c} invalid"));
                        }
                    }
                }
                Node::Leaf { counts, .. } => {
                    if counts.iter().all(|&c| c == 0) {
                        return Err(format!("leaf {i}: all-zero class counts"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn predict<R: FeatureRow<T> + ?Sized>(&self, x: &R) -> Result<Polarity> {
        if x.dim() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                found: x.dim(),
            });
        }
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { label, .. } => return Ok(*label),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x.value(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict_batch<R: FeatureRow<T> + Sync>(&self, rows: &[R]) -> Result<Vec<Polarity>> {
        rows.par_iter().map(|r| self.predict(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Polarity::*;

    fn stump_data() -> (FeatureMatrix<f64>, Vec<Polarity>) {
        let x = FeatureMatrix::from_dense(&[vec![1.0], vec![2.0], vec![10.0], vec![11.0]]).unwrap();
        (x, vec![Positive, Positive, Negative, Negative])
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini::<f64>(&[5, 5, 0]).unwrap(), 0.5);
        assert_eq!(gini::<f64>(&[10, 0, 0]).unwrap(), 0.0);
        assert!(gini::<f64>(&[0, 0, 0]).is_err());
        // Independent script over the published class counts.
        let g = gini::<f64>(&[5114, 1827, 3061]).unwrap();
        assert!((g - 0.6115489359636571).abs() < 1e-12);
    }

    #[test]
    fn stump_threshold() {
        let (x, y) = stump_data();
        let s = best_split(&x, &y, &[0, 1, 2, 3], None, &TreeParams::default()).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 6.0);
        assert_eq!(s.decrease, Ratio::new(1, 2));

        let params = TreeParams {
            max_depth: Some(1),
            ..TreeParams::default()
        };
        let t = fit_tree(&x, &y, &params).unwrap();
        assert!(matches!(t.nodes()[0], Node::Split { threshold, .. } if threshold == 6.0));
        assert_eq!(t.predict(&vec![3.0]).unwrap(), Positive);
        assert_eq!(t.predict(&vec![7.0]).unwrap(), Negative);
        assert!(t.predict(&vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn no_split_cases() {
        let x = FeatureMatrix::from_dense(&[vec![4.0, 1.0], vec![4.0, 2.0]]).unwrap();
        let p = TreeParams::default();
        assert!(best_split(&x, &[Positive, Negative], &[0, 1], Some(&[0]), &p).is_none());
        assert!(best_split(&x, &[Neutral, Neutral], &[0, 1], None, &p).is_none());
        assert_eq!(best_split(&x, &[Positive, Negative], &[0, 1], None, &p).unwrap().feature, 1);
    }

    #[test]
    fn min_impurity_decrease_blocks() {
        let (x, y) = stump_data();
        let p = TreeParams {
            min_impurity_decrease: 0.5,
            ..TreeParams::default()
        };
        assert!(best_split(&x, &y, &[0, 1, 2, 3], None, &p).is_none());
    }

    #[test]
    fn single_sample_leaf() {
        let x = FeatureMatrix::from_dense(&[vec![0.3, 0.1]]).unwrap();
        let t = fit_tree(&x, &[Neutral], &TreeParams::default()).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict(&vec![9.0, 9.0]).unwrap(), Neutral);
    }

    #[test]
    fn leaf_tie_goes_to_lowest_encoding() {
        assert_eq!(majority(&[0, 2, 2]), Neutral);
        assert_eq!(majority(&[1, 1, 1]), Positive);
    }

    #[test]
    fn fit_errors() {
        let x = FeatureMatrix::from_dense(&[vec![1.0]]).unwrap();
        assert!(fit_tree::<f64>(&x, &[], &TreeParams::default()).is_err());
        assert!(fit_tree(&x, &[Positive, Negative], &TreeParams::default()).is_err());
        let bad = TreeParams {
            min_samples_split: 1,
            ..TreeParams::default()
        };
        assert!(fit_tree(&x, &[Positive], &bad).is_err());
    }

    #[test]
    fn negative_values_and_zero_group() {
        let x = FeatureMatrix::from_dense(&[vec![-1.0], vec![0.0], vec![0.0], vec![2.0]]).unwrap();
        let y = [Negative, Positive, Positive, Positive];
        let s = best_split(&x, &y, &[0, 1, 2, 3], None, &TreeParams::default()).unwrap();
        assert_eq!(s.threshold, -0.5);
    }

    #[test]
    fn midpoint_never_reaches_upper() {
        let lo = 1.0f32;
        let hi = f32::from_bits(lo.to_bits() + 1);
        assert_eq!(midpoint(lo, hi), lo);
        let t = midpoint(f64::MAX * 0.75, f64::MAX);
        assert!(t.is_finite() && (f64::MAX * 0.75..f64::MAX).contains(&t));
    }

    #[test]
    fn min_samples_leaf_respected() {
        let (x, y) = stump_data();
        let p = TreeParams {
            min_samples_leaf: 3,
            ..TreeParams::default()
        };
        assert!(best_split(&x, &y, &[0, 1, 2, 3], None, &p).is_none());
    }
}
