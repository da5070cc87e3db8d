//! Maximum-cardinality bipartite matching via Hopcroft-Karp.

use std::collections::VecDeque;

const UNMATCHED: u32 = u32::MAX;
const INF: u32 = u32::MAX;

/// Returns a maximum matching of the bipartite graph as `(left, right)`
/// index pairs. `edges` holds 0-based indices into the two vertex classes;
/// duplicates are harmless.
pub fn maximum_bipartite_matching(
    n_left: usize,
    n_right: usize,
    edges: &[(u32, u32)],
) -> Vec<(u32, u32)> {
    let mut adj = vec![Vec::new(); n_left];
    for &(l, r) in edges {
        adj[l as usize].push(r);
    }
    let mut match_left = vec![UNMATCHED; n_left];
    let mut match_right = vec![UNMATCHED; n_right];
    let mut dist = vec![INF; n_left];
    let mut queue = VecDeque::new();

    loop {
        // BFS layering from free left vertices.
        queue.clear();
        for l in 0..n_left {
            if match_left[l] == UNMATCHED {
                dist[l] = 0;
                queue.push_back(l as u32);
            } else {
                dist[l] = INF;
            }
        }
        let mut found_augmenting = false;
        while let Some(l) = queue.pop_front() {
            for &r in &adj[l as usize] {
                let l2 = match_right[r as usize];
                if l2 == UNMATCHED {
                    found_augmenting = true;
                } else if dist[l2 as usize] == INF {
                    dist[l2 as usize] = dist[l as usize] + 1;
                    queue.push_back(l2);
                }
            }
        }
        if !found_augmenting {
            break;
        }
        // DFS along layered shortest augmenting paths.
        for l in 0..n_left {
            if match_left[l] == UNMATCHED {
                augment(l as u32, &adj, &mut match_left, &mut match_right, &mut dist);
            }
        }
    }

    match_left
        .iter()
        .enumerate()
        .filter(|(_, &r)| r != UNMATCHED)
        .map(|(l, &r)| (l as u32, r))
        .collect()
}

fn augment(
    l: u32,
    adj: &[Vec<u32>],
    match_left: &mut [u32],
    match_right: &mut [u32],
    dist: &mut [u32],
) -> bool {
    let d = std::mem::replace(&mut dist[l as usize], INF);
    for &r in &adj[l as usize] {
        let l2 = match_right[r as usize];
        let extends = if l2 == UNMATCHED {
            true
        } else {
            dist[l2 as usize] == d + 1 && augment(l2, adj, match_left, match_right, dist)
        };
        if extends {
            match_left[l as usize] = r;
            match_right[r as usize] = l;
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn size(n_left: usize, n_right: usize, edges: &[(u32, u32)]) -> usize {
        maximum_bipartite_matching(n_left, n_right, edges).len()
    }

    #[test]
    fn small_graphs() {
        assert_eq!(size(0, 0, &[]), 0);
        assert_eq!(size(1, 1, &[(0, 0)]), 1);
        assert_eq!(size(2, 2, &[(0, 0), (1, 0)]), 1);
        // Perfect matching requires alternating-path augmentation.
        assert_eq!(size(2, 2, &[(0, 0), (0, 1), (1, 0)]), 2);
        assert_eq!(size(3, 3, &[(0, 0), (0, 1), (1, 0), (2, 1), (2, 2)]), 3);
    }

    #[test]
    fn matches_greedy_augmentation_on_random_graphs() {
        // Brute-force oracle: repeated single augmenting-path search.
        fn oracle(n_left: usize, n_right: usize, edges: &[(u32, u32)]) -> usize {
            let mut adj = vec![Vec::new(); n_left];
            for &(l, r) in edges {
                adj[l as usize].push(r as usize);
            }
            let mut match_right = vec![usize::MAX; n_right];
            fn try_kuhn(
                l: usize,
                adj: &[Vec<usize>],
                seen: &mut [bool],
                match_right: &mut [usize],
            ) -> bool {
                for &r in &adj[l] {
                    if !seen[r] {
                        seen[r] = true;
                        if match_right[r] == usize::MAX
                            || try_kuhn(match_right[r], adj, seen, match_right)
                        {
                            match_right[r] = l;
                            return true;
                        }
                    }
                }
                false
            }
            let mut total = 0;
            for l in 0..n_left {
                let mut seen = vec![false; n_right];
                if try_kuhn(l, &adj, &mut seen, &mut match_right) {
                    total += 1;
                }
            }
            total
        }

        let mut x = 12345u64;
        for case in 0..50 {
            let n_left = 1 + (case % 13);
            let n_right = 1 + (case % 11);
            let mut edges = Vec::new();
            for l in 0..n_left {
                for r in 0..n_right {
                    x = x
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    if x >> 62 == 0 {
                        edges.push((l as u32, r as u32));
                    }
                }
            }
            assert_eq!(
                size(n_left, n_right, &edges),
                oracle(n_left, n_right, &edges)
            );
        }
    }
}
