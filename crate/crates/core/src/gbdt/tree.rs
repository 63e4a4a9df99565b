use serde::{Deserialize, Serialize};

use super::{BinnedFeatures, TrainConfig};
use crate::{Error, Result};

/// Relative slack below which a split gain counts as rounding noise.
const GAIN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// `row[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

/// Binary regression tree; nodes are stored parents-before-children with
/// the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut index = 0;
        loop {
            match self.nodes[index] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => index = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

#[derive(Debug, Clone, Copy)]
struct SplitCandidate {
    feature: usize,
    bin: usize,
    gain: f64,
}

struct OpenLeaf {
    node: usize,
    docs: Vec<u32>,
    best: Option<SplitCandidate>,
}

#[derive(Clone, Copy, Default)]
struct HistBin {
    grad: f64,
    hess: f64,
    count: u32,
}

fn score(grad: f64, hess: f64, l2: f64) -> f64 {
    let denom = hess + l2;
    if denom > 0.0 {
        grad * grad / denom
    } else {
        0.0
    }
}

fn leaf_value(grad: f64, hess: f64, l2: f64) -> f64 {
    let denom = hess + l2;
    if denom > 0.0 {
        -grad / denom
    } else {
        0.0
    }
}

fn sums(docs: &[u32], gradients: &[f64], hessians: &[f64]) -> (f64, f64) {
    docs.iter().fold((0.0, 0.0), |(g, h), &d| {
        (g + gradients[d as usize], h + hessians[d as usize])
    })
}

/// Best-first growth: repeatedly split the open leaf with the largest gain
/// `G_L²/(H_L+λ) + G_R²/(H_R+λ) - G²/(H+λ)` until `max_leaves` is reached
/// or no split has positive gain with both children holding at least
/// `min_docs_per_leaf` documents. Leaves take the Newton value `-G/(H+λ)`.
pub fn fit_tree(
    data: &BinnedFeatures,
    gradients: &[f64],
    hessians: &[f64],
    config: &TrainConfig,
) -> Result<Tree> {
    for (what, actual) in [("gradients", gradients.len()), ("hessians", hessians.len())] {
        if actual != data.rows() {
            return Err(Error::LengthMismatch {
                what,
                expected: data.rows(),
                actual,
            });
        }
    }
    let l2 = config.l2_reg;
    let min_docs = config.min_docs_per_leaf.max(1);
    let exec = config.execution;

    let all: Vec<u32> = (0..data.rows() as u32).collect();
    let (g, h) = sums(&all, gradients, hessians);
    if h == 0.0 {
        return Ok(Tree::leaf(0.0));
    }

    let best_split = |docs: &[u32], grad_sum: f64, hess_sum: f64| -> Option<SplitCandidate> {
        if docs.len() < 2 * min_docs {
            return None;
        }
        let parent = score(grad_sum, hess_sum, l2);
        let per_feature = exec.map_range(data.feature_count(), |f| {
            let bins = data.bins.bin_count(f);
            if bins < 2 {
                return None;
            }
            let column = data.column(f);
            let mut hist = vec![HistBin::default(); bins];
            for &d in docs {
                let b = &mut hist[column[d as usize] as usize];
                b.grad += gradients[d as usize];
                b.hess += hessians[d as usize];
                b.count += 1;
            }
            let mut best: Option<SplitCandidate> = None;
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
            for (bin, hb) in hist[..bins - 1].iter().enumerate() {
                gl += hb.grad;
                hl += hb.hess;
                nl += hb.count as usize;
                let nr = docs.len() - nl;
                if nl < min_docs {
                    continue;
                }
                if nr < min_docs {
                    break;
                }
                let left = score(gl, hl, l2);
                let right = score(grad_sum - gl, hess_sum - hl, l2);
                let gain = left + right - parent;
                if gain > GAIN_TOLERANCE * (left + right + parent)
                    && best.is_none_or(|b| gain > b.gain)
                {
                    best = Some(SplitCandidate { feature: f, bin, gain });
                }
            }
            best
        });
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<SplitCandidate>, c| match acc {
                Some(a) if a.gain >= c.gain => Some(a),
                _ => Some(c),
            })
    };

    let mut nodes = vec![Node::Leaf {
        value: leaf_value(g, h, l2),
    }];
    let mut open = vec![OpenLeaf {
        node: 0,
        best: best_split(&all, g, h),
        docs: all,
    }];
    let mut leaves = 1;

    while leaves < config.max_leaves {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.best.map(|b| (i, b.gain)))
            .fold(None, |acc: Option<(usize, f64)>, (i, gain)| match acc {
                Some((_, g)) if g >= gain => acc,
                _ => Some((i, gain)),
            });
        let Some((index, _)) = pick else { break };
        let leaf = open.remove(index);
        let split = leaf.best.expect("picked leaves have a split");

        let column = data.column(split.feature);
        let (left_docs, right_docs): (Vec<u32>, Vec<u32>) = leaf
            .docs
            .iter()
            .partition(|&&d| column[d as usize] as usize <= split.bin);

        let (gl, hl) = sums(&left_docs, gradients, hessians);
        let (gr, hr) = sums(&right_docs, gradients, hessians);
        let left = nodes.len();
        nodes.push(Node::Leaf {
            value: leaf_value(gl, hl, l2),
        });
        nodes.push(Node::Leaf {
            value: leaf_value(gr, hr, l2),
        });
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            threshold: data.bins.thresholds(split.feature)[split.bin],
            left,
            right: left + 1,
        };
        leaves += 1;

        // Children carry the largest node ids, so `open` stays in node order
        // and gain ties resolve to the earliest node.
        open.push(OpenLeaf {
            node: left,
            best: best_split(&left_docs, gl, hl),
            docs: left_docs,
        });
        open.push(OpenLeaf {
            node: left + 1,
            best: best_split(&right_docs, gr, hr),
            docs: right_docs,
        });
    }

    Ok(Tree { nodes })
}
