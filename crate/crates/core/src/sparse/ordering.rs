use std::collections::VecDeque;

use super::SparseMatrix;

/// Symmetrized adjacency (no self loops) of the leading `n` rows/columns.
fn adjacency(a: &SparseMatrix, n: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if j < n && j != i {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    adj
}

/// BFS level structure from `root` inside the unvisited set; returns the
/// nodes of the last level and the number of levels.
fn levels(
    adj: &[Vec<usize>],
    root: usize,
    visited: &[bool],
    mark: &mut [usize],
    stamp: usize,
) -> (Vec<usize>, usize) {
    let mut frontier = vec![root];
    mark[root] = stamp;
    let mut depth = 1;
    loop {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in &adj[u] {
                if !visited[v] && mark[v] != stamp {
                    mark[v] = stamp;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            return (frontier, depth);
        }
        frontier = next;
        depth += 1;
    }
}

/// George–Liu pseudo-peripheral node search.
fn pseudo_peripheral(
    adj: &[Vec<usize>],
    start: usize,
    visited: &[bool],
    mark: &mut [usize],
    stamp: &mut usize,
) -> usize {
    let mut root = start;
    *stamp += 1;
    let (mut last, mut ecc) = levels(adj, root, visited, mark, *stamp);
    loop {
        let cand = *last
            .iter()
            .min_by_key(|&&v| (adj[v].len(), v))
            .expect("non-empty level");
        *stamp += 1;
        let (l, e) = levels(adj, cand, visited, mark, *stamp);
        if e <= ecc {
            return root;
        }
        root = cand;
        last = l;
        ecc = e;
    }
}

fn rcm_adj(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut mark = vec![0usize; n];
    let mut stamp = 0;
    let mut order = Vec::with_capacity(n);
    for s in 0..n {
        if visited[s] {
            continue;
        }
        let root = pseudo_peripheral(adj, s, &visited, &mut mark, &mut stamp);
        let mut queue = VecDeque::from([root]);
        visited[root] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nb: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nb.sort_unstable_by_key(|&v| (adj[v].len(), v));
            for v in nb {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Reverse Cuthill–McKee ordering of the pattern of `A + A^T`.
pub fn rcm(a: &SparseMatrix) -> Vec<usize> {
    rcm_adj(&adjacency(a, a.nrows()))
}

/// Ordering for saddle-point matrices whose trailing rows (index
/// `>= n_primary`) have zero diagonal: RCM on the primary block, with each
/// constraint row placed right after the last of its primary neighbours.
/// Constraints without primary neighbours go last, in index order.
pub fn constrained_rcm(a: &SparseMatrix, n_primary: usize) -> Vec<usize> {
    let n = a.nrows();
    let primary = rcm_adj(&adjacency(a, n_primary));
    let mut rank = vec![usize::MAX; n];
    for (k, &v) in primary.iter().enumerate() {
        rank[v] = k;
    }
    // attach each constraint to the position of its latest primary neighbour
    let mut attached: Vec<Vec<usize>> = vec![Vec::new(); n_primary];
    let mut orphans = Vec::new();
    let at = a.transpose();
    for c in n_primary..n {
        let latest = a
            .row(c)
            .0
            .iter()
            .chain(at.row(c).0)
            .filter(|&&j| j < n_primary)
            .map(|&j| rank[j])
            .max();
        match latest {
            Some(k) => attached[k].push(c),
            None => orphans.push(c),
        }
    }
    let mut order = Vec::with_capacity(n);
    for (k, &v) in primary.iter().enumerate() {
        order.push(v);
        order.extend_from_slice(&attached[k]);
    }
    order.extend(orphans);
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_permutation(p: &[usize], n: usize) -> bool {
        let mut seen = vec![false; n];
        p.len() == n
            && p.iter()
                .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
    }

    fn bandwidth(a: &SparseMatrix, p: &[usize]) -> usize {
        let mut inv = vec![0; p.len()];
        for (k, &i) in p.iter().enumerate() {
            inv[i] = k;
        }
        (0..a.nrows())
            .flat_map(|i| a.row(i).0.iter().map(move |&j| (i, j)))
            .map(|(i, j)| inv[i].abs_diff(inv[j]))
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn rcm_recovers_band_of_shuffled_path() {
        // path graph 0-1-...-19 under a scrambled labelling
        let n = 20;
        let label: Vec<usize> = (0..n).map(|i| (i * 7) % n).collect();
        let mut t = Vec::new();
        for i in 0..n {
            t.push((label[i], label[i], 2.0));
            if i + 1 < n {
                t.push((label[i], label[i + 1], -1.0));
                t.push((label[i + 1], label[i], -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &t).unwrap();
        let p = rcm(&a);
        assert!(is_permutation(&p, n));
        assert_eq!(bandwidth(&a, &p), 1);
    }

    #[test]
    fn constraints_follow_their_neighbours() {
        // primary 0..4, constraint 4 couples to 1 and 2, constraint 5 isolated
        let mut t: Vec<(usize, usize, f64)> = (0..4).map(|i| (i, i, 1.0)).collect();
        t.extend([(4, 1, 1.0), (1, 4, 1.0), (4, 2, 1.0), (2, 4, 1.0)]);
        t.push((5, 4, 1.0));
        t.push((4, 5, 1.0));
        let a = SparseMatrix::from_triplets(6, 6, &t).unwrap();
        let p = constrained_rcm(&a, 4);
        assert!(is_permutation(&p, 6));
        let pos = |v: usize| p.iter().position(|&x| x == v).unwrap();
        assert!(pos(4) > pos(1) && pos(4) > pos(2));
        assert_eq!(pos(5), 5);
    }
}
