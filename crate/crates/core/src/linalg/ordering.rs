//! Fill-reducing column orders for the direct solver.

use std::collections::VecDeque;

use super::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    /// Identity permutation.
    Natural,
    /// Recursive level-set bisection of the graph of `A + A^T`.
    #[default]
    NestedDissection,
}

impl Ordering {
    /// `perm[k]` is the original index eliminated at step `k`.
    pub fn permutation(&self, a: &CsrMatrix) -> Vec<usize> {
        match self {
            Ordering::Natural => (0..a.nrows()).collect(),
            Ordering::NestedDissection => nested_dissection(a),
        }
    }
}

/// Subgraphs at or below this size are ordered as they come.
const LEAF_SIZE: usize = 48;

pub fn nested_dissection(a: &CsrMatrix) -> Vec<usize> {
    let adj = symmetric_adjacency(a);
    let n = adj.len();
    let mut nd = Dissector {
        adj: &adj,
        label: vec![0; n],
        next_label: 1,
        level: vec![usize::MAX; n],
        order: Vec::with_capacity(n),
    };
    let all: Vec<usize> = (0..n).collect();
    nd.dissect(all);
    debug_assert_eq!(nd.order.len(), n);
    nd.order
}

fn symmetric_adjacency(a: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = a.nrows();
    let mut adj = vec![Vec::new(); n];
    for r in 0..n {
        for (c, _) in a.row(r) {
            if c != r {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

struct Dissector<'a> {
    adj: &'a [Vec<usize>],
    /// Nodes carrying the current subgraph's label are "inside".
    label: Vec<u32>,
    next_label: u32,
    level: Vec<usize>,
    order: Vec<usize>,
}

impl Dissector<'_> {
    fn dissect(&mut self, nodes: Vec<usize>) {
        if nodes.len() <= LEAF_SIZE {
            self.order.extend(nodes);
            return;
        }
        let tag = self.next_label;
        self.next_label += 1;
        for &v in &nodes {
            self.label[v] = tag;
        }

        let components = self.components(&nodes, tag);
        if components.len() > 1 {
            for c in components {
                self.dissect(c);
            }
            return;
        }
        let levels = self.pseudo_peripheral(nodes[0], tag);
        if levels.len() < 3 {
            self.order.extend(levels.into_iter().flatten());
            return;
        }

        // Split at the level that best balances the two halves.
        let total = nodes.len();
        let mut before = 0;
        let mut mid = 1;
        for (i, lvl) in levels.iter().enumerate().skip(1) {
            if before + lvl.len() / 2 >= total / 2 || i == levels.len() - 2 {
                mid = i;
                break;
            }
            before += lvl.len();
        }
        let mid = mid.clamp(1, levels.len() - 2);
        let mut levels = levels;
        let upper: Vec<usize> = levels.drain(mid + 1..).flatten().collect();
        let separator = levels.pop().unwrap();
        let lower: Vec<usize> = levels.into_iter().flatten().collect();
        self.dissect(lower);
        self.dissect(upper);
        self.order.extend(separator);
    }

    fn bfs(&mut self, root: usize, tag: u32) -> Vec<Vec<usize>> {
        let mut levels: Vec<Vec<usize>> = Vec::new();
        let mut queue = VecDeque::new();
        let mut seen = Vec::new();
        self.level[root] = 0;
        seen.push(root);
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            let lv = self.level[v];
            if levels.len() <= lv {
                levels.push(Vec::new());
            }
            levels[lv].push(v);
            for &w in &self.adj[v] {
                if self.label[w] == tag && self.level[w] == usize::MAX {
                    self.level[w] = lv + 1;
                    seen.push(w);
                    queue.push_back(w);
                }
            }
        }
        for v in seen {
            self.level[v] = usize::MAX;
        }
        levels
    }

    /// Connected components of the nodes labelled `tag`; each gets a fresh label.
    fn components(&mut self, nodes: &[usize], tag: u32) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for &v in nodes {
            if self.label[v] != tag {
                continue;
            }
            let comp_tag = self.next_label;
            self.next_label += 1;
            let mut comp = vec![v];
            self.label[v] = comp_tag;
            let mut head = 0;
            while head < comp.len() {
                let u = comp[head];
                head += 1;
                for &w in &self.adj[u] {
                    if self.label[w] == tag {
                        self.label[w] = comp_tag;
                        comp.push(w);
                    }
                }
            }
            out.push(comp);
        }
        if out.len() == 1 {
            for &v in &out[0] {
                self.label[v] = tag;
            }
        }
        out
    }

    /// Repeated BFS from the farthest minimum-degree node until the depth stops growing.
    fn pseudo_peripheral(&mut self, start: usize, tag: u32) -> Vec<Vec<usize>> {
        let mut levels = self.bfs(start, tag);
        for _ in 0..8 {
            let last = levels.last().unwrap();
            let candidate = *last
                .iter()
                .min_by_key(|&&v| {
                    self.adj[v]
                        .iter()
                        .filter(|&&w| self.label[w] == tag)
                        .count()
                })
                .unwrap();
            let trial = self.bfs(candidate, tag);
            if trial.len() <= levels.len() {
                break;
            }
            levels = trial;
        }
        levels
    }
}
