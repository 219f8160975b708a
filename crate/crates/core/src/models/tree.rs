//! Histogram-binned regression trees grown on per-row gradient statistics.
//!
//! A split's score is `G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)`. With `g = y`,
//! `h = 1` and `λ = 0` this is the weighted variance reduction, which for 0/1
//! targets is proportional to the Gini decrease; with logistic gradients and
//! hessians it is the second-order boosting gain.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

const MIN_GAIN: f64 = 1e-12;

/// Column-major bin codes with the real-valued cut points behind them. A row
/// falls in bin `b` when it exceeds exactly `b` cut points, so a split after
/// bin `b` sends `x <= cuts[b]` left.
#[derive(Debug, Clone)]
pub(crate) struct BinnedMatrix {
    codes: Vec<u8>,
    n_rows: usize,
    cuts: Vec<Vec<f64>>,
}

impl BinnedMatrix {
    pub(crate) fn new(x: ArrayView2<f64>, max_bins: usize) -> Self {
        assert!(
            (2..=256).contains(&max_bins),
            "max_bins must lie in [2, 256]"
        );
        let n = x.nrows();
        let mut codes = Vec::with_capacity(x.len());
        let mut cuts = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mut sorted: Vec<f64> = col.to_vec();
            sorted.sort_by(f64::total_cmp);
            let mut distinct = sorted.clone();
            distinct.dedup();
            let c: Vec<f64> = if distinct.len() <= max_bins {
                distinct
                    .windows(2)
                    .map(|w| w[0] + (w[1] - w[0]) / 2.0)
                    .collect()
            } else {
                let mut c: Vec<f64> = (1..max_bins).map(|i| sorted[i * n / max_bins]).collect();
                c.dedup();
                let top = *distinct.last().expect("non-empty column");
                c.retain(|v| *v < top);
                c
            };
            codes.extend(col.iter().map(|v| c.partition_point(|t| t < v) as u8));
            cuts.push(c);
        }
        Self {
            codes,
            n_rows: n,
            cuts,
        }
    }

    pub(crate) fn n_features(&self) -> usize {
        self.cuts.len()
    }

    fn n_bins(&self, f: usize) -> usize {
        self.cuts[f].len() + 1
    }

    #[inline]
    fn code(&self, row: usize, f: usize) -> usize {
        usize::from(self.codes[f * self.n_rows + row])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        bin: u8,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub(crate) fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if row[feature] <= threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    /// Leaf node index reached by a training row.
    pub(crate) fn leaf_of(&self, bm: &BinnedMatrix, row: usize) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    bin,
                    left,
                    right,
                    ..
                } => {
                    i = if bm.code(row, feature) <= usize::from(bin) {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub(crate) fn leaf_value(&self, node: usize) -> f64 {
        match self.nodes[node] {
            Node::Leaf { value } => value,
            Node::Split { .. } => panic!("node {node} is not a leaf"),
        }
    }

    pub(crate) fn set_leaf_value(&mut self, node: usize, v: f64) {
        match &mut self.nodes[node] {
            Node::Leaf { value } => *value = v,
            Node::Split { .. } => panic!("node {node} is not a leaf"),
        }
    }

    pub(crate) fn map_leaves(&mut self, f: impl Fn(f64) -> f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value = f(*value);
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
}

pub(crate) struct Grower<'a> {
    pub bm: &'a BinnedMatrix,
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub params: &'a GrowParams,
    /// Candidate features for one node, ascending.
    pub features: &'a mut dyn FnMut() -> Vec<usize>,
    pub leaf: &'a dyn Fn(&[usize]) -> f64,
    /// Total split gain per feature.
    pub importance: &'a mut [f64],
}

struct Best {
    gain: f64,
    feature: usize,
    bin: usize,
}

impl Grower<'_> {
    pub(crate) fn grow(mut self, rows: Vec<usize>) -> Tree {
        let mut nodes = Vec::new();
        self.node(rows, 0, &mut nodes);
        Tree { nodes }
    }

    fn node(&mut self, rows: Vec<usize>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        nodes.push(Node::Leaf { value: 0.0 });
        let best = if depth < self.params.max_depth
            && rows.len()
                >= self
                    .params
                    .min_samples_split
                    .max(2 * self.params.min_samples_leaf)
        {
            self.best_split(&rows)
        } else {
            None
        };
        let Some(best) = best else {
            nodes[id] = Node::Leaf {
                value: (self.leaf)(&rows),
            };
            return id;
        };
        self.importance[best.feature] += best.gain;
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.bm.code(i, best.feature) <= best.bin);
        let left = self.node(l, depth + 1, nodes);
        let right = self.node(r, depth + 1, nodes);
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: self.bm.cuts[best.feature][best.bin],
            bin: best.bin as u8,
            left,
            right,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Best> {
        let p = self.params;
        let (mut g_tot, mut h_tot) = (0.0, 0.0);
        for &i in rows {
            g_tot += self.grad[i];
            h_tot += self.hess[i];
        }
        let n_tot = rows.len();
        let parent = score(g_tot, h_tot, p.lambda);
        let mut best: Option<Best> = None;
        let mut g = Vec::new();
        let mut h = Vec::new();
        let mut c = Vec::new();
        for f in (self.features)() {
            let nb = self.bm.n_bins(f);
            if nb < 2 {
                continue;
            }
            g.clear();
            g.resize(nb, 0.0);
            h.clear();
            h.resize(nb, 0.0);
            c.clear();
            c.resize(nb, 0usize);
            for &i in rows {
                let b = self.bm.code(i, f);
                g[b] += self.grad[i];
                h[b] += self.hess[i];
                c[b] += 1;
            }
            let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
            for b in 0..nb - 1 {
                gl += g[b];
                hl += h[b];
                cl += c[b];
                let cr = n_tot - cl;
                if cl < p.min_samples_leaf || cr < p.min_samples_leaf || cl == 0 || cr == 0 {
                    continue;
                }
                let hr = h_tot - hl;
                if hl < p.min_child_weight || hr < p.min_child_weight {
                    continue;
                }
                let gain = score(gl, hl, p.lambda) + score(g_tot - gl, hr, p.lambda) - parent;
                if gain > MIN_GAIN && best.as_ref().is_none_or(|bst| gain > bst.gain) {
                    best = Some(Best {
                        gain,
                        feature: f,
                        bin: b,
                    });
                }
            }
        }
        best
    }
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}
