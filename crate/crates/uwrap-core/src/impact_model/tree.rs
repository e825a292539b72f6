//! Binary decision tree partitioning factor space into regions of similar
//! classifier error probability.

use serde::{Deserialize, Serialize};

use super::binomial::clopper_pearson_upper;
use crate::error::{Result, UwError};

pub const DEFAULT_MAX_DEPTH: usize = 8;
pub const DEFAULT_MIN_SAMPLES_LEAF: usize = 200;

/// A split must beat the parent impurity by more than this to be taken.
const MIN_GINI_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> TreeParams {
        TreeParams {
            max_depth: DEFAULT_MAX_DEPTH,
            min_samples_leaf: DEFAULT_MIN_SAMPLES_LEAF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub id: usize,
    pub n_train: usize,
    pub errors_train: usize,
    pub n_calib: usize,
    pub k_errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with factor value <= threshold go left, the rest (NaN included,
    /// since NaN fails <=) go right.
    Split {
        factor: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Leaf),
}

/// Arena-allocated tree; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub arity: usize,
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// Index of the leaf node this row lands in. Total: every row reaches
    /// exactly one leaf.
    pub fn route(&self, row: &[f64]) -> Result<usize> {
        if row.len() != self.arity {
            return Err(UwError::Input(format!(
                "factor vector has {} components, tree expects {}",
                row.len(),
                self.arity
            )));
        }
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    factor,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*factor] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                TreeNode::Leaf(_) => return Ok(at),
            }
        }
    }

    pub fn leaf_for(&self, row: &[f64]) -> Result<&Leaf> {
        let at = self.route(row)?;
        match &self.nodes[at] {
            TreeNode::Leaf(leaf) => Ok(leaf),
            TreeNode::Split { .. } => unreachable!("route stops at leaves"),
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Leaf> {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf(l) => Some(l),
            TreeNode::Split { .. } => None,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    pub fn depth(&self) -> usize {
        fn depth_at(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf(_) => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + depth_at(nodes, *left).max(depth_at(nodes, *right))
                }
            }
        }
        depth_at(&self.nodes, 0)
    }

    /// Reassigns leaf ids 0.. in left-to-right order.
    fn renumber_leaves(&mut self) {
        fn walk(nodes: &mut [TreeNode], at: usize, next: &mut usize) {
            match &mut nodes[at] {
                TreeNode::Leaf(leaf) => {
                    leaf.id = *next;
                    *next += 1;
                }
                TreeNode::Split { left, right, .. } => {
                    let (l, r) = (*left, *right);
                    walk(nodes, l, next);
                    walk(nodes, r, next);
                }
            }
        }
        let mut next = 0;
        walk(&mut self.nodes, 0, &mut next);
    }
}

fn gini(errors: f64, total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    let p = errors / total;
    2.0 * p * (1.0 - p)
}

struct BestSplit {
    factor: usize,
    threshold: f64,
    gain: f64,
}

/// Scans one factor's sorted values for the weighted-Gini-optimal midpoint
/// threshold honoring the leaf size floor. Candidates are visited in
/// ascending threshold order so the first strict improvement wins ties.
fn best_split_on_factor(
    sorted: &[(f64, bool)],
    min_leaf: usize,
    parent_gini: f64,
) -> Option<(f64, f64)> {
    let n = sorted.len();
    let total_errors = sorted.iter().filter(|(_, w)| *w).count() as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut left_n = 0usize;
    let mut left_errors = 0usize;
    for i in 0..n - 1 {
        left_n += 1;
        left_errors += sorted[i].1 as usize;
        if sorted[i + 1].0 <= sorted[i].0 {
            continue;
        }
        if left_n < min_leaf || n - left_n < min_leaf {
            continue;
        }
        let threshold = 0.5 * (sorted[i].0 + sorted[i + 1].0);
        let right_n = (n - left_n) as f64;
        let weighted = (left_n as f64 * gini(left_errors as f64, left_n as f64)
            + right_n * gini(total_errors - left_errors as f64, right_n))
            / n as f64;
        let gain = parent_gini - weighted;
        if best.map_or(true, |(_, g)| gain > g) {
            best = Some((threshold, gain));
        }
    }
    best
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    wrong: &'a [bool],
    params: TreeParams,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn build(&mut self, indexes: &mut Vec<usize>, depth: usize) -> usize {
        let n = indexes.len();
        let errors = indexes.iter().filter(|&&i| self.wrong[i]).count();
        let pure = errors == 0 || errors == n;
        let can_split =
            depth < self.params.max_depth && n >= 2 * self.params.min_samples_leaf && !pure;

        let split = if can_split {
            let parent_gini = gini(errors as f64, n as f64);
            let mut best: Option<BestSplit> = None;
            let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
            for factor in 0..self.rows[indexes[0]].len() {
                sorted.clear();
                sorted.extend(
                    indexes
                        .iter()
                        .map(|&i| (self.rows[i][factor], self.wrong[i])),
                );
                sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("factors are finite"));
                if let Some((threshold, gain)) =
                    best_split_on_factor(&sorted, self.params.min_samples_leaf, parent_gini)
                {
                    if best.as_ref().map_or(true, |b| gain > b.gain) {
                        best = Some(BestSplit {
                            factor,
                            threshold,
                            gain,
                        });
                    }
                }
            }
            best.filter(|b| b.gain > MIN_GINI_GAIN)
        } else {
            None
        };

        match split {
            None => {
                self.nodes.push(TreeNode::Leaf(Leaf {
                    id: 0,
                    n_train: n,
                    errors_train: errors,
                    n_calib: 0,
                    k_errors: 0,
                    uncertainty: None,
                    confidence: None,
                }));
                self.nodes.len() - 1
            }
            Some(best) => {
                let mut left_idx: Vec<usize> = Vec::new();
                let mut right_idx: Vec<usize> = Vec::new();
                for &i in indexes.iter() {
                    if self.rows[i][best.factor] <= best.threshold {
                        left_idx.push(i);
                    } else {
                        right_idx.push(i);
                    }
                }
                let me = self.nodes.len();
                self.nodes.push(TreeNode::Leaf(Leaf {
                    id: 0,
                    n_train: 0,
                    errors_train: 0,
                    n_calib: 0,
                    k_errors: 0,
                    uncertainty: None,
                    confidence: None,
                }));
                let left = self.build(&mut left_idx, depth + 1);
                let right = self.build(&mut right_idx, depth + 1);
                self.nodes[me] = TreeNode::Split {
                    factor: best.factor,
                    threshold: best.threshold,
                    left,
                    right,
                };
                me
            }
        }
    }
}

/// Greedy binary CART over axis-aligned midpoint thresholds minimizing
/// weighted Gini impurity of the wrongness indicator. Ties break toward the
/// lower factor index, then the lower threshold. Deterministic and
/// order-independent.
pub fn fit_tree(rows: &[Vec<f64>], wrong: &[bool], params: &TreeParams) -> Result<DecisionTree> {
    if rows.is_empty() {
        return Err(UwError::Training("no training vectors".into()));
    }
    if rows.len() != wrong.len() {
        return Err(UwError::Input(format!(
            "{} factor vectors but {} wrongness labels",
            rows.len(),
            wrong.len()
        )));
    }
    if params.min_samples_leaf == 0 {
        return Err(UwError::Config("min_samples_leaf must be at least 1".into()));
    }
    if rows.len() < params.min_samples_leaf {
        return Err(UwError::Training(format!(
            "{} training vectors is below the leaf floor {}",
            rows.len(),
            params.min_samples_leaf
        )));
    }
    let arity = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != arity {
            return Err(UwError::Input(format!(
                "factor vector {i} has {} components, expected {arity}",
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(UwError::Input(format!(
                "non-finite factor value {v} in training vector {i}"
            )));
        }
    }

    let mut builder = Builder {
        rows,
        wrong,
        params: *params,
        nodes: Vec::new(),
    };
    let mut all: Vec<usize> = (0..rows.len()).collect();
    builder.build(&mut all, 0);
    let mut tree = DecisionTree {
        arity,
        nodes: builder.nodes,
    };
    tree.renumber_leaves();
    Ok(tree)
}

/// Routes held-out data through the tree and sets each leaf's error count
/// and its one-sided upper bound at the given confidence. Leaves that
/// receive no calibration data keep uncertainty None; pruning removes them.
pub fn calibrate_tree(
    tree: &DecisionTree,
    rows: &[Vec<f64>],
    wrong: &[bool],
    confidence: f64,
) -> Result<DecisionTree> {
    if rows.is_empty() {
        return Err(UwError::Input("empty calibration set".into()));
    }
    if rows.len() != wrong.len() {
        return Err(UwError::Input(format!(
            "{} calibration vectors but {} wrongness labels",
            rows.len(),
            wrong.len()
        )));
    }
    let mut out = tree.clone();
    for node in &mut out.nodes {
        if let TreeNode::Leaf(leaf) = node {
            leaf.n_calib = 0;
            leaf.k_errors = 0;
            leaf.uncertainty = None;
            leaf.confidence = None;
        }
    }
    for (row, &w) in rows.iter().zip(wrong) {
        let at = out.route(row)?;
        if let TreeNode::Leaf(leaf) = &mut out.nodes[at] {
            leaf.n_calib += 1;
            leaf.k_errors += w as usize;
        }
    }
    for node in &mut out.nodes {
        if let TreeNode::Leaf(leaf) = node {
            if leaf.n_calib > 0 {
                leaf.uncertainty = Some(clopper_pearson_upper(
                    leaf.k_errors as u64,
                    leaf.n_calib as u64,
                    confidence,
                )?);
                leaf.confidence = Some(confidence);
            }
        }
    }
    Ok(out)
}

/// Owned subtree used while rebuilding during pruning.
enum Built {
    Leaf(Leaf),
    Split {
        factor: usize,
        threshold: f64,
        left: Box<Built>,
        right: Box<Built>,
    },
}

impl Built {
    fn small_leaf(&self, min: usize) -> bool {
        matches!(self, Built::Leaf(l) if l.n_calib < min)
    }

    fn accumulate(&self, into: &mut Leaf) {
        match self {
            Built::Leaf(l) => {
                into.n_train += l.n_train;
                into.errors_train += l.errors_train;
                into.n_calib += l.n_calib;
                into.k_errors += l.k_errors;
            }
            Built::Split { left, right, .. } => {
                left.accumulate(into);
                right.accumulate(into);
            }
        }
    }

    fn flatten(self, nodes: &mut Vec<TreeNode>) -> usize {
        match self {
            Built::Leaf(leaf) => {
                nodes.push(TreeNode::Leaf(leaf));
                nodes.len() - 1
            }
            Built::Split {
                factor,
                threshold,
                left,
                right,
            } => {
                let me = nodes.len();
                nodes.push(TreeNode::Leaf(Leaf {
                    id: 0,
                    n_train: 0,
                    errors_train: 0,
                    n_calib: 0,
                    k_errors: 0,
                    uncertainty: None,
                    confidence: None,
                }));
                let l = left.flatten(nodes);
                let r = right.flatten(nodes);
                nodes[me] = TreeNode::Split {
                    factor,
                    threshold,
                    left: l,
                    right: r,
                };
                me
            }
        }
    }
}

/// Bottom-up merge: wherever a leaf holds fewer than `min_leaf_calib`
/// calibration events, its parent's whole subtree is replaced by one leaf
/// with summed counts and a recomputed bound. Merging propagates upward and
/// stops at a single root leaf at worst.
pub fn prune_tree(tree: &DecisionTree, min_leaf_calib: usize) -> Result<DecisionTree> {
    let confidence = tree
        .leaves()
        .find_map(|l| l.confidence)
        .ok_or_else(|| UwError::Domain("pruning requires a calibrated tree".into()))?;

    fn rebuild(
        nodes: &[TreeNode],
        at: usize,
        min: usize,
        confidence: f64,
    ) -> Result<Built> {
        match &nodes[at] {
            TreeNode::Leaf(leaf) => Ok(Built::Leaf(leaf.clone())),
            TreeNode::Split {
                factor,
                threshold,
                left,
                right,
            } => {
                let l = rebuild(nodes, *left, min, confidence)?;
                let r = rebuild(nodes, *right, min, confidence)?;
                if l.small_leaf(min) || r.small_leaf(min) {
                    let mut merged = Leaf {
                        id: 0,
                        n_train: 0,
                        errors_train: 0,
                        n_calib: 0,
                        k_errors: 0,
                        uncertainty: None,
                        confidence: None,
                    };
                    l.accumulate(&mut merged);
                    r.accumulate(&mut merged);
                    if merged.n_calib > 0 {
                        merged.uncertainty = Some(clopper_pearson_upper(
                            merged.k_errors as u64,
                            merged.n_calib as u64,
                            confidence,
                        )?);
                        merged.confidence = Some(confidence);
                    }
                    Ok(Built::Leaf(merged))
                } else {
                    Ok(Built::Split {
                        factor: *factor,
                        threshold: *threshold,
                        left: Box::new(l),
                        right: Box::new(r),
                    })
                }
            }
        }
    }

    let built = rebuild(&tree.nodes, 0, min_leaf_calib, confidence)?;
    let mut nodes = Vec::new();
    built.flatten(&mut nodes);
    let mut out = DecisionTree {
        arity: tree.arity,
        nodes,
    };
    out.renumber_leaves();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(n_calib: usize, k_errors: usize, uncertainty: Option<f64>) -> Leaf {
        Leaf {
            id: 0,
            n_train: n_calib,
            errors_train: k_errors,
            n_calib,
            k_errors,
            uncertainty,
            confidence: uncertainty.map(|_| 0.99),
        }
    }

    fn step_data() -> (Vec<Vec<f64>>, Vec<bool>) {
        // 100 copies of each value 1..=10; wrong iff value > 5.
        let mut rows = Vec::new();
        let mut wrong = Vec::new();
        for v in 1..=10 {
            for _ in 0..100 {
                rows.push(vec![v as f64]);
                wrong.push(v > 5);
            }
        }
        (rows, wrong)
    }

    #[test]
    fn splits_step_function_at_midpoint() {
        let (rows, wrong) = step_data();
        let tree = fit_tree(&rows, &wrong, &TreeParams::default()).unwrap();
        match &tree.nodes[0] {
            TreeNode::Split {
                factor, threshold, ..
            } => {
                assert_eq!(*factor, 0);
                assert!((threshold - 5.5).abs() < 1e-12);
            }
            TreeNode::Leaf(_) => panic!("expected a root split"),
        }
        // Children are pure, so two leaves suffice.
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn row_order_does_not_matter() {
        let (rows, wrong) = step_data();
        let tree_a = fit_tree(&rows, &wrong, &TreeParams::default()).unwrap();
        let mut rev_rows = rows.clone();
        let mut rev_wrong = wrong.clone();
        rev_rows.reverse();
        rev_wrong.reverse();
        let tree_b = fit_tree(&rev_rows, &rev_wrong, &TreeParams::default()).unwrap();
        assert_eq!(tree_a, tree_b);
    }

    #[test]
    fn pure_labels_give_single_leaf() {
        let rows: Vec<Vec<f64>> = (0..300).map(|i| vec![i as f64]).collect();
        let wrong = vec![false; 300];
        let tree = fit_tree(&rows, &wrong, &TreeParams::default()).unwrap();
        assert_eq!(tree.leaf_count(), 1);
        assert_eq!(tree.depth(), 0);
    }

    #[test]
    fn constant_factors_give_single_leaf() {
        let rows = vec![vec![3.0]; 400];
        let wrong: Vec<bool> = (0..400).map(|i| i % 2 == 0).collect();
        let tree = fit_tree(&rows, &wrong, &TreeParams::default()).unwrap();
        assert_eq!(tree.leaf_count(), 1);
    }

    #[test]
    fn ties_prefer_lower_factor_and_threshold() {
        // Both factors separate the classes perfectly; factor 0 must win.
        let rows = vec![
            vec![1.0, 5.0],
            vec![1.0, 5.0],
            vec![2.0, 6.0],
            vec![2.0, 6.0],
        ];
        let wrong = vec![false, false, true, true];
        let params = TreeParams {
            max_depth: 1,
            min_samples_leaf: 1,
        };
        let tree = fit_tree(&rows, &wrong, &params).unwrap();
        match &tree.nodes[0] {
            TreeNode::Split { factor, .. } => assert_eq!(*factor, 0),
            TreeNode::Leaf(_) => panic!("expected a split"),
        }
        // Equal-gain thresholds on one factor: the lower one wins.
        let rows: Vec<Vec<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| vec![v]).collect();
        let wrong = vec![false, true, false, true];
        let tree = fit_tree(&rows, &wrong, &params).unwrap();
        match &tree.nodes[0] {
            TreeNode::Split { threshold, .. } => assert!((threshold - 1.5).abs() < 1e-12),
            TreeNode::Leaf(_) => panic!("expected a split"),
        }
    }

    #[test]
    fn respects_depth_and_leaf_floor() {
        let (rows, wrong) = step_data();
        let flat = fit_tree(
            &rows,
            &wrong,
            &TreeParams {
                max_depth: 0,
                min_samples_leaf: 200,
            },
        )
        .unwrap();
        assert_eq!(flat.leaf_count(), 1);

        // Leaf floor of 600 forbids the 500/500 split.
        let coarse = fit_tree(
            &rows,
            &wrong,
            &TreeParams {
                max_depth: 8,
                min_samples_leaf: 600,
            },
        )
        .unwrap();
        assert_eq!(coarse.leaf_count(), 1);

        let deep = fit_tree(
            &rows,
            &wrong,
            &TreeParams {
                max_depth: 8,
                min_samples_leaf: 100,
            },
        )
        .unwrap();
        for l in deep.leaves() {
            assert!(l.n_train >= 100);
        }
    }

    #[test]
    fn rejects_bad_training_input() {
        assert!(matches!(
            fit_tree(&[], &[], &TreeParams::default()),
            Err(UwError::Training(_))
        ));
        let rows = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            fit_tree(&rows, &[true], &TreeParams::default()),
            Err(UwError::Input(_))
        ));
        let ragged = vec![vec![1.0], vec![2.0, 3.0]];
        assert!(matches!(
            fit_tree(
                &ragged,
                &[true, false],
                &TreeParams {
                    max_depth: 2,
                    min_samples_leaf: 1
                }
            ),
            Err(UwError::Input(_))
        ));
        let nan = vec![vec![1.0], vec![f64::NAN]];
        assert!(matches!(
            fit_tree(
                &nan,
                &[true, false],
                &TreeParams {
                    max_depth: 2,
                    min_samples_leaf: 1
                }
            ),
            Err(UwError::Input(_))
        ));
    }

    #[test]
    fn routing_is_total_and_sends_nan_right() {
        let tree = DecisionTree {
            arity: 1,
            nodes: vec![
                TreeNode::Split {
                    factor: 0,
                    threshold: 2.0,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf(leaf(10, 0, Some(0.02))),
                TreeNode::Leaf(leaf(10, 5, Some(0.8))),
            ],
        };
        assert_eq!(tree.route(&[2.0]).unwrap(), 1); // threshold hit goes left
        assert_eq!(tree.route(&[2.0 + 1e-12]).unwrap(), 2);
        assert_eq!(tree.route(&[f64::NAN]).unwrap(), 2);
        assert_eq!(tree.route(&[f64::MAX]).unwrap(), 2);
        assert_eq!(tree.route(&[f64::MIN]).unwrap(), 1);
        assert!(matches!(tree.route(&[1.0, 2.0]), Err(UwError::Input(_))));
    }

    #[test]
    fn calibration_counts_and_bounds() {
        let (rows, wrong) = step_data();
        let tree = fit_tree(&rows, &wrong, &TreeParams::default()).unwrap();
        // Calibration: 400 events below 5.5 with 0 errors, 100 above with 40.
        let mut crows = Vec::new();
        let mut cwrong = Vec::new();
        for i in 0..400 {
            crows.push(vec![1.0 + (i % 5) as f64]);
            cwrong.push(false);
        }
        for i in 0..100 {
            crows.push(vec![6.0 + (i % 5) as f64]);
            cwrong.push(i % 10 < 4);
        }
        let calibrated = calibrate_tree(&tree, &crows, &cwrong, 0.99).unwrap();
        let leaves: Vec<&Leaf> = calibrated.leaves().collect();
        assert_eq!(leaves.len(), 2);
        assert_eq!(leaves[0].n_calib, 400);
        assert_eq!(leaves[0].k_errors, 0);
        let expected = 1.0 - 0.01f64.powf(1.0 / 400.0);
        assert!((leaves[0].uncertainty.unwrap() - expected).abs() < 1e-12);
        assert_eq!(leaves[1].n_calib, 100);
        assert_eq!(leaves[1].k_errors, 40);
        assert!(leaves[1].uncertainty.unwrap() > 0.4);
        // Recalibrating with the same data reproduces the same tree.
        let again = calibrate_tree(&tree, &crows, &cwrong, 0.99).unwrap();
        assert_eq!(calibrated, again);
    }

    #[test]
    fn unhit_leaves_stay_uncalibrated() {
        let (rows, wrong) = step_data();
        let tree = fit_tree(&rows, &wrong, &TreeParams::default()).unwrap();
        let crows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let cwrong = vec![false, false, true];
        let calibrated = calibrate_tree(&tree, &crows, &cwrong, 0.99).unwrap();
        let leaves: Vec<&Leaf> = calibrated.leaves().collect();
        assert_eq!(leaves[0].n_calib, 3);
        assert!(leaves[0].uncertainty.is_some());
        assert_eq!(leaves[1].n_calib, 0);
        assert!(leaves[1].uncertainty.is_none());
    }

    #[test]
    fn pruning_merges_small_siblings() {
        let tree = DecisionTree {
            arity: 1,
            nodes: vec![
                TreeNode::Split {
                    factor: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf(leaf(30, 1, Some(0.2))),
                TreeNode::Leaf(leaf(40, 2, Some(0.25))),
            ],
        };
        let pruned = prune_tree(&tree, 50).unwrap();
        assert_eq!(pruned.leaf_count(), 1);
        let merged = pruned.leaves().next().unwrap();
        assert_eq!(merged.n_calib, 70);
        assert_eq!(merged.k_errors, 3);
        assert!((merged.uncertainty.unwrap() - 0.136449462595).abs() < 1e-11);
    }

    #[test]
    fn pruning_leaves_large_trees_alone() {
        let tree = DecisionTree {
            arity: 1,
            nodes: vec![
                TreeNode::Split {
                    factor: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf(leaf(300, 1, Some(0.02))),
                TreeNode::Leaf(leaf(400, 2, Some(0.02))),
            ],
        };
        let pruned = prune_tree(&tree, 50).unwrap();
        assert_eq!(pruned.leaf_count(), 2);
        assert_eq!(&pruned, &prune_tree(&pruned, 50).unwrap());
    }

    #[test]
    fn pruning_propagates_to_root() {
        // Deep chain where every merge still undershoots the floor.
        let tree = DecisionTree {
            arity: 1,
            nodes: vec![
                TreeNode::Split {
                    factor: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf(leaf(10, 0, Some(0.3))),
                TreeNode::Split {
                    factor: 0,
                    threshold: 1.0,
                    left: 3,
                    right: 4,
                },
                TreeNode::Leaf(leaf(5, 1, Some(0.7))),
                TreeNode::Leaf(leaf(8, 0, Some(0.4))),
            ],
        };
        let pruned = prune_tree(&tree, 1_000).unwrap();
        assert_eq!(pruned.leaf_count(), 1);
        let root = pruned.leaves().next().unwrap();
        assert_eq!(root.n_calib, 23);
        assert_eq!(root.k_errors, 1);
        assert_eq!(root.id, 0);
    }

    #[test]
    fn pruning_floor_holds_or_single_root() {
        let (rows, wrong) = step_data();
        let tree = fit_tree(
            &rows,
            &wrong,
            &TreeParams {
                max_depth: 8,
                min_samples_leaf: 50,
            },
        )
        .unwrap();
        let crows: Vec<Vec<f64>> = (0..150).map(|i| vec![1.0 + (i % 10) as f64]).collect();
        let cwrong: Vec<bool> = (0..150).map(|i| i % 10 >= 5).collect();
        let calibrated = calibrate_tree(&tree, &crows, &cwrong, 0.99).unwrap();
        for min in [1usize, 10, 60, 1_000] {
            let pruned = prune_tree(&calibrated, min).unwrap();
            let ok = pruned.leaf_count() == 1
                || pruned.leaves().all(|l| l.n_calib >= min);
            assert!(ok, "floor {min} violated");
        }
    }

    #[test]
    fn pruning_requires_calibration() {
        let (rows, wrong) = step_data();
        let tree = fit_tree(&rows, &wrong, &TreeParams::default()).unwrap();
        assert!(matches!(prune_tree(&tree, 50), Err(UwError::Domain(_))));
    }

    #[test]
    fn leaf_ids_run_left_to_right() {
        let (rows, wrong) = step_data();
        let tree = fit_tree(
            &rows,
            &wrong,
            &TreeParams {
                max_depth: 8,
                min_samples_leaf: 100,
            },
        )
        .unwrap();
        let ids: Vec<usize> = tree.leaves().map(|l| l.id).collect();
        let expected: Vec<usize> = (0..ids.len()).collect();
        // Leaves appear in preorder left-first, so ids ascend in node order.
        assert_eq!(ids, expected);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let (rows, wrong) = step_data();
        let tree = fit_tree(&rows, &wrong, &TreeParams::default()).unwrap();
        let crows: Vec<Vec<f64>> = (0..100).map(|i| vec![1.0 + (i % 10) as f64]).collect();
        let cwrong: Vec<bool> = (0..100).map(|i| i % 10 >= 5).collect();
        let calibrated = calibrate_tree(&tree, &crows, &cwrong, 0.99).unwrap();
        let json = serde_json::to_string(&calibrated).unwrap();
        let back: DecisionTree = serde_json::from_str(&json).unwrap();
        assert_eq!(calibrated, back);
    }
}
