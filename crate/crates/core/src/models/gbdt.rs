//! Second-order gradient boosting of regression trees on the logistic loss.
//!
//! Each round fits one tree to the gradient `p - y` and hessian `p (1 - p)`
//! of the binary cross-entropy at the current margin. Splits are found by
//! exact greedy search over every distinct feature value, growing the tree
//! level by level from presorted feature orders. A leaf's weight is
//! `-G / (H + λ)` scaled by the learning rate.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sigmoid, Dataset, GbdtParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] < *threshold { *left } else { *right },
            }
        }
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Schema("tree without nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(Error::Schema("non-finite leaf value".into()))
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    // Children always follow their parent, which rules out cycles.
                    let ok = *feature < n_features
                        && !threshold.is_nan()
                        && *left > i
                        && *right > i
                        && *left < self.nodes.len()
                        && *right < self.nodes.len();
                    if !ok {
                        return Err(Error::Schema(format!("malformed split node {i}")));
                    }
                }
                Node::Leaf { .. } => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    /// Initial margin: log-odds of the training base rate.
    pub base_score: f64,
    pub trees: Vec<Tree>,
}

impl GbdtModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<()> {
        if !self.base_score.is_finite() {
            return Err(Error::Schema("non-finite base score".into()));
        }
        self.trees.iter().try_for_each(|t| t.validate(n_features))
    }
}

#[derive(Clone, Copy)]
struct SplitCandidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct ScanState {
    gl: f64,
    hl: f64,
    last: f64,
    seen: bool,
    best: Option<SplitCandidate>,
}

const NO_NODE: u32 = u32::MAX;

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

fn grow_tree(
    ds: &Dataset,
    order: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    in_sample: &[bool],
    hp: &GbdtParams,
) -> (Tree, Vec<u32>) {
    let n = ds.n_rows();
    let lambda = hp.l2_lambda;
    let mut node_of: Vec<u32> = in_sample.iter().map(|&s| if s { 0 } else { NO_NODE }).collect();
    let (g0, h0) = (0..n)
        .filter(|&i| in_sample[i])
        .fold((0.0, 0.0), |(g, h), i| (g + grad[i], h + hess[i]));
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    // (node index, G, H) of the nodes still open for splitting.
    let mut frontier: Vec<(usize, f64, f64)> = vec![(0, g0, h0)];
    let leaf = |g: f64, h: f64| Node::Leaf {
        value: -g / (h + lambda) * hp.learning_rate,
    };

    for _depth in 0..hp.max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut slot_of = vec![usize::MAX; nodes.len()];
        for (s, f) in frontier.iter().enumerate() {
            slot_of[f.0] = s;
        }
        let mut best: Vec<Option<SplitCandidate>> = vec![None; frontier.len()];
        for (f, ord) in order.iter().enumerate() {
            let mut st: Vec<ScanState> = frontier
                .iter()
                .map(|_| ScanState {
                    gl: 0.0,
                    hl: 0.0,
                    last: 0.0,
                    seen: false,
                    best: None,
                })
                .collect();
            for &r in ord {
                let r = r as usize;
                let node = node_of[r];
                if node == NO_NODE {
                    continue;
                }
                let s = slot_of[node as usize];
                if s == usize::MAX {
                    continue;
                }
                let x = ds.value(r, f);
                let state = &mut st[s];
                if state.seen && x != state.last {
                    let (_, g, h) = frontier[s];
                    let (gl, hl) = (state.gl, state.hl);
                    let (gr, hr) = (g - gl, h - hl);
                    if hl >= hp.min_child_weight && hr >= hp.min_child_weight {
                        let gain = 0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(g, h, lambda));
                        if gain > 0.0 && state.best.is_none_or(|b| gain > b.gain) {
                            let mut thr = state.last + (x - state.last) / 2.0;
                            if !(state.last < thr && thr <= x) {
                                thr = x;
                            }
                            state.best = Some(SplitCandidate {
                                gain,
                                feature: f,
                                threshold: thr,
                            });
                        }
                    }
                }
                state.gl += grad[r];
                state.hl += hess[r];
                state.last = x;
                state.seen = true;
            }
            for (s, state) in st.into_iter().enumerate() {
                if let Some(c) = state.best {
                    if best[s].is_none_or(|b| c.gain > b.gain) {
                        best[s] = Some(c);
                    }
                }
            }
        }

        // Materialize splits; remember children for the next level.
        let mut child_of: Vec<Option<(usize, usize, usize, f64)>> = vec![None; nodes.len()];
        let mut next = Vec::new();
        let mut child_sums: Vec<(f64, f64, f64, f64)> = Vec::new();
        for (s, &(idx, _, _)) in frontier.iter().enumerate() {
            if let Some(c) = best[s] {
                let left = nodes.len();
                let right = left + 1;
                nodes.push(Node::Leaf { value: 0.0 });
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[idx] = Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left,
                    right,
                };
                child_of[idx] = Some((c.feature, left, right, c.threshold));
                child_sums.push((0.0, 0.0, 0.0, 0.0));
                next.push((left, right, child_sums.len() - 1));
            }
        }
        if next.is_empty() {
            break;
        }
        let mut sum_slot = vec![usize::MAX; nodes.len()];
        for &(left, _, k) in &next {
            sum_slot[left] = k;
        }
        for r in 0..n {
            let node = node_of[r];
            if node == NO_NODE {
                continue;
            }
            if let Some(Some((feature, left, right, thr))) = child_of.get(node as usize) {
                let k = sum_slot[*left];
                if ds.value(r, *feature) < *thr {
                    node_of[r] = *left as u32;
                    child_sums[k].0 += grad[r];
                    child_sums[k].1 += hess[r];
                } else {
                    node_of[r] = *right as u32;
                    child_sums[k].2 += grad[r];
                    child_sums[k].3 += hess[r];
                }
            }
        }
        // Unsplit frontier nodes become leaves now.
        for &(idx, g, h) in &frontier {
            if child_of[idx].is_none() {
                nodes[idx] = leaf(g, h);
            }
        }
        frontier = next
            .iter()
            .flat_map(|&(left, right, k)| {
                let (gl, hl, gr, hr) = child_sums[k];
                [(left, gl, hl), (right, gr, hr)]
            })
            .collect();
    }
    for &(idx, g, h) in &frontier {
        nodes[idx] = leaf(g, h);
    }
    (Tree { nodes }, node_of)
}

/// Fits a boosted ensemble. Deterministic given the seed and row order;
/// the seed only matters when `subsample < 1`.
pub fn train_gbdt(ds: &Dataset, hp: &GbdtParams, seed: u64) -> Result<GbdtModel> {
    hp.validate()?;
    ds.require_both_classes()?;
    let n = ds.n_rows();
    let base_rate = ds.n_positive() as f64 / n as f64;
    let base_score = (base_rate / (1.0 - base_rate)).ln();
    let order: Vec<Vec<u32>> = (0..ds.n_features())
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| ds.value(a as usize, f).total_cmp(&ds.value(b as usize, f)));
            idx
        })
        .collect();
    let y: Vec<f64> = ds.labels().iter().map(|&l| f64::from(l)).collect();
    let mut margin = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_sample = vec![true; n];
    let mut trees = Vec::with_capacity(hp.n_trees);
    for _ in 0..hp.n_trees {
        for i in 0..n {
            let p = sigmoid(margin[i]);
            grad[i] = p - y[i];
            hess[i] = (p * (1.0 - p)).max(1e-16);
        }
        if hp.subsample < 1.0 {
            for s in in_sample.iter_mut() {
                *s = rng.random::<f64>() < hp.subsample;
            }
        }
        let (tree, node_of) = grow_tree(ds, &order, &grad, &hess, &in_sample, hp);
        for i in 0..n {
            margin[i] += match node_of[i] {
                NO_NODE => tree.predict(ds.row(i)),
                leaf => match tree.nodes[leaf as usize] {
                    Node::Leaf { value } => value,
                    Node::Split { .. } => unreachable!("rows end in leaves"),
                },
            };
        }
        trees.push(tree);
    }
    Ok(GbdtModel { base_score, trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::roc_auc;

    fn params(n_trees: usize, max_depth: usize) -> GbdtParams {
        GbdtParams {
            n_trees,
            max_depth,
            ..GbdtParams::default()
        }
    }

    fn separable() -> Dataset {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let labels = xs.iter().map(|&x| u8::from(x >= 0.5)).collect();
        Dataset::from_columns(vec!["x".into()], &[xs], labels).unwrap()
    }

    fn predict(m: &GbdtModel, ds: &Dataset) -> Vec<f64> {
        ds.rows().map(|r| m.predict_row(r)).collect()
    }

    #[test]
    fn separates_one_dimensional_data() {
        let ds = separable();
        let m = train_gbdt(&ds, &params(10, 2), 0).unwrap();
        assert_eq!(roc_auc(&predict(&m, &ds), ds.labels()).unwrap(), 1.0);
    }

    #[test]
    fn deterministic() {
        let ds = separable();
        let hp = GbdtParams {
            subsample: 0.7,
            ..params(20, 3)
        };
        let a = predict(&train_gbdt(&ds, &hp, 9).unwrap(), &ds);
        let b = predict(&train_gbdt(&ds, &hp, 9).unwrap(), &ds);
        assert_eq!(
            a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn constant_features_predict_base_rate() {
        let ds = Dataset::from_columns(
            vec!["a".into(), "b".into()],
            &[vec![1.0; 10], vec![0.3; 10]],
            vec![1, 0, 0, 1, 0, 0, 0, 1, 0, 0],
        )
        .unwrap();
        let m = train_gbdt(&ds, &params(5, 3), 0).unwrap();
        for p in predict(&m, &ds) {
            assert!((p - 0.3).abs() < 1e-12);
        }
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn zero_trees_is_base_score() {
        let ds = separable();
        let m = train_gbdt(&ds, &params(0, 3), 0).unwrap();
        assert!(m.trees.is_empty());
        assert_eq!(m.predict_row(&[0.2]), sigmoid(m.base_score));
    }

    #[test]
    fn single_class_rejected() {
        let ds = Dataset::from_columns(vec!["x".into()], &[vec![0.0, 1.0]], vec![1, 1]).unwrap();
        assert!(matches!(train_gbdt(&ds, &params(3, 2), 0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn threshold_between_adjacent_floats() {
        let lo = 0.5f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let ds = Dataset::from_columns(vec!["x".into()], &[vec![lo, lo, hi, hi]], vec![0, 0, 1, 1]).unwrap();
        let m = train_gbdt(
            &ds,
            &GbdtParams {
                min_child_weight: 0.0,
                ..params(5, 1)
            },
            0,
        )
        .unwrap();
        assert_eq!(roc_auc(&predict(&m, &ds), ds.labels()).unwrap(), 1.0);
    }
}
