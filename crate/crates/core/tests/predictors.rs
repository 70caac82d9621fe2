mod common;

use proptest::prelude::*;
use schedsel_core::predictors::{check_tree_constraints, LinearThreshold, TreeNode, TreeParams};
use schedsel_core::dataset::Sample;
use schedsel_core::{Dataset, DecisionTree, LinearPredictor};

fn one_feature(values: &[f64], labels: &[bool]) -> Dataset {
    let samples = values
        .iter()
        .zip(labels)
        .map(|(&v, &l)| Sample {
            features: vec![v],
            error: if l { 1.0 } else { 0.0 },
            label: false,
        })
        .collect();
    let mut d = Dataset {
        descriptors: common::descriptors(&[1]),
        samples,
        labeling: None,
    };
    d.apply_threshold(0.5, 0.1);
    d
}

fn gini(n: usize, pos: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// Scans every midpoint between distinct values; returns the impurity and the
/// left-partition of the best admissible split, the lowest threshold on ties.
fn best_midpoint(values: &[f64], labels: &[bool], min_leaf: usize) -> Option<(f64, Vec<bool>)> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let n = values.len();
    let pos = labels.iter().filter(|&&l| l).count();
    let parent = n as f64 * gini(n, pos);
    let mut best: Option<(f64, Vec<bool>)> = None;
    for w in distinct.windows(2) {
        let t = (w[0] + w[1]) / 2.0;
        let left: Vec<bool> = values.iter().map(|&v| v <= t).collect();
        let nl = left.iter().filter(|&&l| l).count();
        let pl = left.iter().zip(labels).filter(|(&l, &y)| l && y).count();
        if nl < min_leaf || n - nl < min_leaf {
            continue;
        }
        let imp = nl as f64 * gini(nl, pl) + (n - nl) as f64 * gini(n - nl, pos - pl);
        if imp < parent - 1e-12 && best.as_ref().is_none_or(|(b, _)| imp < b - 1e-12) {
            best = Some((imp, left));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn root_split_matches_midpoint_scan(
        data in prop::collection::vec((0i32..12, any::<bool>()), 4..60),
        min_leaf in 1usize..4,
    ) {
        let values: Vec<f64> = data.iter().map(|(v, _)| *v as f64 / 2.0).collect();
        let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
        let d = one_feature(&values, &labels);
        let params = TreeParams { max_depth: 1, min_samples_leaf: min_leaf };
        let tree = DecisionTree::fit(&d, &[0], params, &[0]).unwrap();
        let oracle = best_midpoint(&values, &labels, min_leaf);
        match (&tree.root, oracle) {
            (TreeNode::Leaf { .. }, None) => {}
            (TreeNode::Split { threshold, .. }, Some((_, left))) => {
                let got: Vec<bool> = values.iter().map(|&v| v <= *threshold).collect();
                prop_assert_eq!(got, left);
            }
            (root, oracle) => prop_assert!(false, "tree {:?} vs oracle {:?}", root, oracle),
        }
    }

    #[test]
    fn trained_trees_respect_availability(
        afl in prop::collection::vec(0u32..4, 6),
        depth in 1u32..5,
        seed in 0u64..1000,
    ) {
        prop_assume!(afl.contains(&0));
        let availability: Vec<u32> = afl.iter().map(|&a| a + 1).collect();
        let d = common::synthetic(&availability, 300, seed, 0.3, |x, _| x[0] * x[3] + x[5]);
        let candidates: Vec<usize> = (0..6).collect();
        let tree = DecisionTree::fit(&d, &candidates, TreeParams::new(depth), &afl).unwrap();
        prop_assert!(tree.depth() <= depth);
        prop_assert!(check_tree_constraints(&tree, &afl, depth).is_ok());
        for (f, position) in tree.splits() {
            prop_assert!(afl[f] <= position);
        }
    }

    #[test]
    fn ols_matches_normal_equations(seed in 0u64..500, p in 1usize..5) {
        let d = common::synthetic(&[1; 6], 80, seed, 0.0, |x, rng| {
            use rand::Rng;
            0.5 + x[0] - 2.0 * x[1] + 0.25 * x[4] + rng.random_range(-0.1..0.1)
        });
        let selected: Vec<usize> = (0..p).collect();
        let lp = LinearPredictor::fit(&d, &selected).unwrap();
        prop_assert!(!lp.rank_deficient);
        let (bias, weights) = solve_normal_equations(&d, &selected);
        prop_assert!((lp.bias - bias).abs() < 1e-8);
        for (a, b) in lp.weights.iter().zip(&weights) {
            prop_assert!((a - b).abs() < 1e-8, "{} vs {}", a, b);
        }
    }
}

/// Gauss-Jordan elimination with partial pivoting on [1 x]ᵀ[1 x] β = [1 x]ᵀ e.
fn solve_normal_equations(d: &Dataset, selected: &[usize]) -> (f64, Vec<f64>) {
    let p = selected.len() + 1;
    let row = |s: &Sample| {
        let mut r = vec![1.0];
        r.extend(selected.iter().map(|&f| s.features[f]));
        r
    };
    let mut a = vec![vec![0.0; p + 1]; p];
    for s in &d.samples {
        let r = row(s);
        for i in 0..p {
            for j in 0..p {
                a[i][j] += r[i] * r[j];
            }
            a[i][p] += r[i] * s.error;
        }
    }
    for c in 0..p {
        let piv = (c..p).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, piv);
        let pivot = a[c].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != c {
                let f = row[c] / pivot[c];
                for (x, y) in row[c..].iter_mut().zip(&pivot[c..]) {
                    *x -= f * y;
                }
            }
        }
    }
    let beta: Vec<f64> = (0..p).map(|i| a[i][p] / a[i][i]).collect();
    (beta[0], beta[1..].to_vec())
}

#[test]
fn tree_training_is_deterministic() {
    let d = common::synthetic(&[1, 1, 2, 3, 3], 400, 5, 0.2, |x, _| x[0] * x[2] - x[4]);
    let afl = [0, 0, 1, 1, 2];
    let fit = || DecisionTree::fit(&d, &[0, 1, 2, 3, 4], TreeParams::new(3), &afl).unwrap();
    assert_eq!(fit(), fit());
}

#[test]
fn tree_separates_a_threshold_rule() {
    let d = common::synthetic(&[1, 1], 500, 6, 0.5, |x, _| if x[1] > 0.2 { 1.0 } else { 0.0 });
    let tree = DecisionTree::fit(&d, &[0, 1], TreeParams::new(2), &[0, 0]).unwrap();
    let m = schedsel_core::Predictor::Tree(tree).evaluate(&d).unwrap();
    assert_eq!(m.f1, 1.0);
}

#[test]
fn recalibrated_threshold_hits_the_training_positive_count() {
    let d = common::synthetic(&[1, 1, 1], 1000, 7, 0.6, |x, rng| {
        use rand::Rng;
        x[0] + 0.5 * x[1] + rng.random_range(-0.3..0.3)
    });
    let view = schedsel_core::predictors::TrainView::new(&d).unwrap();
    let lp = LinearPredictor::fit_view(&view, &[0, 1], LinearThreshold::Recalibrate).unwrap();
    let predicted = d.samples.iter().filter(|s| lp.predict(&s.features)).count();
    let positives = d.samples.iter().filter(|s| s.label).count();
    assert!((predicted as i64 - positives as i64).abs() <= 2, "{predicted} vs {positives}");
}
