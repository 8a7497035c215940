//! Balanced assignment: maximize the sum of chosen scores when every one of
//! the K columns must receive exactly n/K items.
//!
//! Solved as a min-cost flow by successive shortest paths with node
//! potentials. Because the only interior nodes are the K columns, each
//! augmentation runs Dijkstra on the K-node "column graph", where the arc
//! from column a to column b means "reassign the cheapest movable item from a
//! to b". The cheapest movable item per ordered column pair is read off a
//! lazy min-heap whose keys (score[i][a] - score[i][b]) never change, so one
//! augmentation costs O(K^2 log n) and the whole solve stays near-linear in n.
//!
//! Determinism: items enter in index order, equal Dijkstra distances resolve
//! to the lower column index, and equal heap keys resolve to the lower item
//! index, so equal inputs give identical labelings.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Heap entry ordered by (key, item) with total order on the float.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MoveKey {
    key: f64,
    item: u32,
}

impl Eq for MoveKey {}

impl Ord for MoveKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.total_cmp(&other.key).then(self.item.cmp(&other.item))
    }
}

impl PartialOrd for MoveKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Assignment {
    pub labels: Vec<u32>,
    pub objective: f64,
    /// Another labeling plausibly attains the same objective (a zero reduced
    /// cost off the chosen assignment). Reported, never acted on.
    pub tie: bool,
}

/// `scores` is n x k row-major; n must be a positive multiple of k and every
/// value finite. Both are the caller's responsibility.
pub(crate) fn solve_balanced_assignment(scores: &[f64], n: usize, k: usize) -> Assignment {
    assert!(k >= 1 && n >= 1 && n % k == 0, "n={n} must be a positive multiple of k={k}");
    assert_eq!(scores.len(), n * k);
    debug_assert!(scores.iter().all(|v| v.is_finite()));
    let cap = n / k;

    if k == 1 {
        let objective = scores.iter().sum();
        return Assignment { labels: vec![0; n], objective, tie: false };
    }

    let mut assign: Vec<u32> = vec![u32::MAX; n];
    let mut load = vec![0usize; k];
    let mut pot = vec![0.0f64; k];
    // heaps[a * k + b]: movable items currently in column a, keyed by the
    // exact cost of sending them to column b.
    let mut heaps: Vec<BinaryHeap<Reverse<MoveKey>>> = vec![BinaryHeap::new(); k * k];

    let push_item = |heaps: &mut Vec<BinaryHeap<Reverse<MoveKey>>>, scores: &[f64], item: usize, col: usize| {
        for b in 0..k {
            if b == col {
                continue;
            }
            let key = scores[item * k + col] - scores[item * k + b];
            heaps[col * k + b].push(Reverse(MoveKey { key, item: item as u32 }));
        }
    };

    let mut dist = vec![0.0f64; k];
    let mut visited = vec![false; k];
    let mut parent: Vec<Option<usize>> = vec![None; k];

    for it in 0..n {
        for b in 0..k {
            dist[b] = -scores[it * k + b] - pot[b];
            visited[b] = false;
            parent[b] = None;
        }

        let target;
        loop {
            let mut best: Option<usize> = None;
            for b in 0..k {
                if !visited[b] && best.map_or(true, |cur| dist[b] < dist[cur]) {
                    best = Some(b);
                }
            }
            let b = best.expect("every column is reachable through a direct arc");
            visited[b] = true;
            if load[b] < cap {
                target = b;
                break;
            }
            for b2 in 0..k {
                if visited[b2] || b2 == b {
                    continue;
                }
                let heap = &mut heaps[b * k + b2];
                let key = loop {
                    match heap.peek() {
                        Some(Reverse(mk)) if assign[mk.item as usize] as usize != b => {
                            heap.pop();
                        }
                        Some(Reverse(mk)) => break Some(mk.key),
                        None => break None,
                    }
                };
                if let Some(key) = key {
                    let cand = dist[b] + key + pot[b] - pot[b2];
                    if cand < dist[b2] {
                        dist[b2] = cand;
                        parent[b2] = Some(b);
                    }
                }
            }
        }

        // Rebuild the chosen move items along the path (the parent link only
        // records the source column; the item is the heap top at walk time,
        // which is still valid because nothing moved since the search).
        let mut chain = Vec::new();
        let mut cur = target;
        while let Some(prev) = parent[cur] {
            let heap = &mut heaps[prev * k + cur];
            let item = loop {
                let Reverse(mk) = *heap.peek().expect("relaxed arc has a movable item");
                if assign[mk.item as usize] as usize != prev {
                    heap.pop();
                    continue;
                }
                break mk.item;
            };
            chain.push((item, cur));
            cur = prev;
        }
        for &(item, dest) in chain.iter().rev() {
            assign[item as usize] = dest as u32;
            push_item(&mut heaps, scores, item as usize, dest);
        }
        assign[it] = cur as u32;
        push_item(&mut heaps, scores, it, cur);
        load[target] += 1;

        let dt = dist[target];
        for b in 0..k {
            pot[b] += dist[b].min(dt);
        }
    }

    let scale = scores.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let slack = 1e-9 * scale;
    let mut objective = 0.0;
    // Cheapest dual-adjusted loss for moving one item between each column
    // pair. Every loss is nonnegative at an optimum; that is the certificate.
    let mut move_loss = vec![f64::INFINITY; k * k];
    for i in 0..n {
        let a = assign[i] as usize;
        objective += scores[i * k + a];
        let own = scores[i * k + a] + pot[a];
        for b in 0..k {
            if b == a {
                continue;
            }
            let other = scores[i * k + b] + pot[b];
            debug_assert!(
                own >= other - slack,
                "optimality certificate violated at item {i}: {own} < {other}"
            );
            let loss = own - other;
            if loss < move_loss[a * k + b] {
                move_loss[a * k + b] = loss;
            }
        }
    }

    // A zero-loss edge alone does not create an alternate optimum; the duals
    // are usually degenerate at a vertex. Another balanced labeling with the
    // same objective exists exactly when items can trade columns around a
    // directed cycle of free moves.
    let mut free = vec![false; k * k];
    for a in 0..k {
        for b in 0..k {
            free[a * k + b] = a != b && move_loss[a * k + b] <= slack;
        }
    }
    let tie = has_cycle(&free, k);

    Assignment { labels: assign, objective, tie }
}

/// Directed-cycle test by trimming: peel nodes without outgoing arcs until
/// nothing changes; survivors form (or feed) a cycle.
fn has_cycle(arcs: &[bool], k: usize) -> bool {
    let mut alive = vec![true; k];
    loop {
        let mut removed = false;
        for a in 0..k {
            if alive[a] && !(0..k).any(|b| alive[b] && arcs[a * k + b]) {
                alive[a] = false;
                removed = true;
            }
        }
        if !removed {
            break;
        }
    }
    alive.iter().any(|&x| x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive search over every balanced labeling.
    fn brute_force(scores: &[f64], n: usize, k: usize) -> f64 {
        let cap = n / k;
        fn rec(
            scores: &[f64],
            n: usize,
            k: usize,
            cap: usize,
            item: usize,
            counts: &mut [usize],
            acc: f64,
            best: &mut f64,
        ) {
            if item == n {
                if acc > *best {
                    *best = acc;
                }
                return;
            }
            for c in 0..k {
                if counts[c] < cap {
                    counts[c] += 1;
                    rec(scores, n, k, cap, item + 1, counts, acc + scores[item * k + c], best);
                    counts[c] -= 1;
                }
            }
        }
        let mut best = f64::NEG_INFINITY;
        rec(scores, n, k, cap, 0, &mut vec![0; k], 0.0, &mut best);
        best
    }

    /// Independent exact route: dynamic programming over items with the
    /// per-column occupancy vector as state, encoded in mixed radix (cap+1).
    fn dp_exact(scores: &[f64], n: usize, k: usize) -> f64 {
        let cap = n / k;
        let radix = cap + 1;
        let total = radix.pow(k as u32);
        let mut dp = vec![f64::NEG_INFINITY; total];
        dp[0] = 0.0;
        let mut strides = vec![1usize; k];
        for c in 1..k {
            strides[c] = strides[c - 1] * radix;
        }
        for item in 0..n {
            let mut next = vec![f64::NEG_INFINITY; total];
            for (state, &value) in dp.iter().enumerate() {
                if value == f64::NEG_INFINITY {
                    continue;
                }
                for c in 0..k {
                    let count = (state / strides[c]) % radix;
                    if count < cap {
                        let ns = state + strides[c];
                        let cand = value + scores[item * k + c];
                        if cand > next[ns] {
                            next[ns] = cand;
                        }
                    }
                }
            }
            dp = next;
        }
        let full: usize = (0..k).map(|c| cap * strides[c]).sum();
        dp[full]
    }

    #[test]
    fn matches_exhaustive_search_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for trial in 0..300 {
            let k = *[1usize, 2, 2, 4].choose(&mut rng).unwrap();
            let mult = rng.gen_range(1..=(8 / k));
            let n = k * mult;
            let scores: Vec<f64> = (0..n * k).map(|_| rng.gen_range(0.0..10.0)).collect();
            let got = solve_balanced_assignment(&scores, n, k);
            let best = brute_force(&scores, n, k);
            assert!(
                (got.objective - best).abs() <= 1e-9,
                "trial {trial}: objective {} vs exhaustive {best}",
                got.objective
            );
            let mut counts = vec![0usize; k];
            for &l in &got.labels {
                counts[l as usize] += 1;
            }
            assert!(counts.iter().all(|&c| c == n / k));
        }
    }

    #[test]
    fn matches_occupancy_dp_on_larger_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..40 {
            let k = *[2usize, 3, 5].choose(&mut rng).unwrap();
            let cap_hi = if k == 5 { 7 } else { 12 };
            let n = k * rng.gen_range(4..=cap_hi);
            let scores: Vec<f64> = (0..n * k).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let got = solve_balanced_assignment(&scores, n, k);
            let expect = dp_exact(&scores, n, k);
            assert!(
                (got.objective - expect).abs() <= 1e-9,
                "objective {} vs occupancy dp {expect}",
                got.objective
            );
        }
    }

    #[test]
    fn documented_small_example() {
        let scores = [3.0, 0.0, 3.0, 0.0, 0.0, 3.0, 2.0, 0.0];
        let got = solve_balanced_assignment(&scores, 4, 2);
        assert_eq!(got.labels, vec![0, 0, 1, 1]);
        assert!((got.objective - 9.0).abs() < 1e-12);
        assert!(!got.tie);
    }

    #[test]
    fn single_column_and_determinism() {
        let scores = [1.0, 7.0, 3.0];
        let got = solve_balanced_assignment(&scores, 3, 1);
        assert_eq!(got.labels, vec![0, 0, 0]);
        assert!((got.objective - 11.0).abs() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let scores: Vec<f64> = (0..60 * 3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let a = solve_balanced_assignment(&scores, 60, 3);
        let b = solve_balanced_assignment(&scores, 60, 3);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.objective, b.objective);
    }

    #[test]
    fn tie_detection() {
        // Identical columns: any swap is an alternate optimum.
        let scores = [1.0, 1.0, 1.0, 1.0];
        assert!(solve_balanced_assignment(&scores, 2, 2).tie);
        // Clearly unique optimum.
        let scores = [5.0, 0.0, 0.0, 5.0];
        let got = solve_balanced_assignment(&scores, 2, 2);
        assert!(!got.tie);
        assert_eq!(got.labels, vec![0, 1]);
    }
}
