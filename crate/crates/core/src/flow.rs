//! Minimum-cost flow by successive shortest paths (Dijkstra with potentials).
//! Costs are non-negative integers; ties are broken by node index so results
//! are deterministic.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
struct Arc {
    to: usize,
    cap: i64,
    cost: i64,
}

#[derive(Debug, Clone)]
pub struct MinCostFlow {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl MinCostFlow {
    pub fn new(nodes: usize) -> Self {
        Self { arcs: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    /// Adds an arc and returns its id.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: i64) -> usize {
        assert!(cost >= 0, "negative arc cost");
        let id = self.arcs.len();
        self.arcs.push(Arc { to, cap, cost });
        self.arcs.push(Arc { to: from, cap: 0, cost: -cost });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Flow currently carried by arc `id`.
    pub fn flow(&self, id: usize) -> i64 {
        self.arcs[id + 1].cap
    }

    /// Sends up to `amount` units from `s` to `t`; returns (sent, cost).
    pub fn run(&mut self, s: usize, t: usize, amount: i64) -> (i64, i64) {
        let n = self.adj.len();
        let mut potential = vec![0i64; n];
        let (mut sent, mut total) = (0i64, 0i64);
        while sent < amount {
            let mut dist = vec![i64::MAX; n];
            let mut prev = vec![usize::MAX; n];
            dist[s] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0i64, s)));
            while let Some(Reverse((d, v))) = heap.pop() {
                if d > dist[v] {
                    continue;
                }
                for &id in &self.adj[v] {
                    let a = &self.arcs[id];
                    if a.cap <= 0 {
                        continue;
                    }
                    let nd = d + a.cost + potential[v] - potential[a.to];
                    if nd < dist[a.to] {
                        dist[a.to] = nd;
                        prev[a.to] = id;
                        heap.push(Reverse((nd, a.to)));
                    }
                }
            }
            if dist[t] == i64::MAX {
                break;
            }
            for v in 0..n {
                if dist[v] != i64::MAX {
                    potential[v] += dist[v];
                }
            }
            let mut push = amount - sent;
            let mut v = t;
            while v != s {
                let id = prev[v];
                push = push.min(self.arcs[id].cap);
                v = self.arcs[id ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let id = prev[v];
                self.arcs[id].cap -= push;
                self.arcs[id ^ 1].cap += push;
                total += push * self.arcs[id].cost;
                v = self.arcs[id ^ 1].to;
            }
            sent += push;
        }
        (sent, total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_cheaper_route() {
        let mut f = MinCostFlow::new(4);
        let a = f.add_arc(0, 1, 1, 1);
        f.add_arc(1, 3, 1, 1);
        let b = f.add_arc(0, 2, 2, 2);
        f.add_arc(2, 3, 2, 2);
        assert_eq!(f.run(0, 3, 2), (2, 2 + 4));
        assert_eq!((f.flow(a), f.flow(b)), (1, 1));
    }

    #[test]
    fn uses_reverse_arcs() {
        // classic instance where the greedy first path must be undone
        let mut f = MinCostFlow::new(4);
        f.add_arc(0, 1, 1, 1);
        f.add_arc(0, 2, 1, 5);
        f.add_arc(1, 2, 1, 1);
        f.add_arc(1, 3, 1, 5);
        f.add_arc(2, 3, 1, 1);
        assert_eq!(f.run(0, 3, 2), (2, 12));
    }
}
