//! CART decision tree with Gini impurity.
//!
//! Splits are axis-aligned at midpoints between consecutive distinct
//! feature values; the best split maximises `Σ_child (n0² + n1²) / n`,
//! which is equivalent to minimising weighted Gini impurity. Candidate
//! splits are compared exactly in integer arithmetic, so ties resolve to
//! the lower feature index and then the lower threshold.
//!
//! Greedy growth at a node depends only on the rows reaching it, so a tree
//! grown to depth `D` and cut at depth `d < D` is the tree a depth-`d`
//! limit would have produced. [`DecisionTree::score_at_depth`] uses this
//! to evaluate a whole depth grid from one fit.

use crate::dataset::Dataset;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Leaf {
        minor: usize,
        total: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        minor: usize,
        total: usize,
    },
}

impl Node {
    fn counts(&self) -> (usize, usize) {
        match *self {
            Node::Leaf { minor, total } | Node::Split { minor, total, .. } => (minor, total),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    max_depth: usize,
}

/// Laplace-smoothed leaf score `(minor + 1) / (total + 2)`.
pub fn leaf_score(minor: usize, total: usize) -> f64 {
    (minor as f64 + 1.0) / (total as f64 + 2.0)
}

struct Builder<'a> {
    data: &'a Dataset,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
    buf: Vec<(f64, u8)>,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    // score = num / den
    num: u128,
    den: u128,
}

impl Builder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let total = rows.len();
        let minor = rows.iter().filter(|&&i| self.data.labels()[i] == 1).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { minor, total });
        if minor == 0 || minor == total || depth >= self.max_depth || total < 2 * self.min_leaf {
            return id;
        }
        let Some(best) = self.best_split(rows) else {
            return id;
        };
        let mut cut = 0;
        for pos in 0..rows.len() {
            if self.data.row(rows[pos])[best.feature] <= best.threshold {
                rows.swap(pos, cut);
                cut += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(cut);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            minor,
            total,
        };
        id
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Candidate> {
        let n = rows.len();
        let minor_total = rows.iter().filter(|&&i| self.data.labels()[i] == 1).count();
        let mut best: Option<Candidate> = None;
        for feature in 0..self.data.n_features() {
            self.buf.clear();
            self.buf.extend(
                rows.iter()
                    .map(|&i| (self.data.row(i)[feature], self.data.labels()[i])),
            );
            self.buf.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_minor = 0usize;
            for pos in 0..n - 1 {
                left_minor += usize::from(self.buf[pos].1 == 1);
                let n_left = pos + 1;
                let n_right = n - n_left;
                if n_left < self.min_leaf {
                    continue;
                }
                if n_right < self.min_leaf {
                    break;
                }
                let (lo, hi) = (self.buf[pos].0, self.buf[pos + 1].0);
                if lo == hi {
                    continue;
                }
                let right_minor = minor_total - left_minor;
                let sq = |a: usize, b: usize| (a * a + b * b) as u128;
                let s_left = sq(left_minor, n_left - left_minor);
                let s_right = sq(right_minor, n_right - right_minor);
                let num = s_left * n_right as u128 + s_right * n_left as u128;
                let den = (n_left * n_right) as u128;
                let better = match best {
                    None => true,
                    Some(b) => num * b.den > b.num * den,
                };
                if better {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some(Candidate {
                        feature,
                        threshold,
                        num,
                        den,
                    });
                }
            }
        }
        best
    }
}

impl DecisionTree {
    pub fn fit(data: &Dataset, max_depth: usize, min_leaf: usize) -> Self {
        let mut builder = Builder {
            data,
            max_depth,
            min_leaf: min_leaf.max(1),
            nodes: Vec::new(),
            buf: Vec::with_capacity(data.len()),
        };
        let mut rows: Vec<usize> = (0..data.len()).collect();
        builder.grow(&mut rows, 0);
        Self {
            nodes: builder.nodes,
            n_features: data.n_features(),
            max_depth,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Depth of the deepest leaf.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// True if some split node holds rows of only one class.
    pub fn has_pure_split(&self) -> bool {
        self.nodes.iter().any(|node| match *node {
            Node::Split { minor, total, .. } => minor == 0 || minor == total,
            Node::Leaf { .. } => false,
        })
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.score_at_depth(x, usize::MAX)
    }

    /// Score as if the tree had been grown with `max_depth = depth`.
    pub fn score_at_depth(&self, x: &[f64], depth: usize) -> f64 {
        let mut id = 0;
        let mut level = 0;
        loop {
            match self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } if level < depth => {
                    id = if x[feature] <= threshold { left } else { right };
                    level += 1;
                }
                ref node => {
                    let (minor, total) = node.counts();
                    return leaf_score(minor, total);
                }
            }
        }
    }
}
