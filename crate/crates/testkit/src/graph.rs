use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Textbook Dijkstra over a 4-connected `rows x cols` grid with unit edge
/// costs. `blocked(r, c)` marks cells that cannot be entered or left.
///
/// Returns the number of moves from `start` to `goal`, or `None` when the
/// goal cannot be reached (including a blocked endpoint).
pub fn dijkstra_grid(
    rows: usize,
    cols: usize,
    blocked: impl Fn(usize, usize) -> bool,
    start: (usize, usize),
    goal: (usize, usize),
) -> Option<u32> {
    if blocked(start.0, start.1) || blocked(goal.0, goal.1) {
        return None;
    }
    let idx = |r: usize, c: usize| r * cols + c;
    let mut dist = vec![u32::MAX; rows * cols];
    let mut heap = BinaryHeap::new();
    dist[idx(start.0, start.1)] = 0;
    heap.push(Reverse((0u32, start.0, start.1)));
    while let Some(Reverse((d, r, c))) = heap.pop() {
        if (r, c) == goal {
            return Some(d);
        }
        if d > dist[idx(r, c)] {
            continue;
        }
        let mut next = Vec::with_capacity(4);
        if r > 0 {
            next.push((r - 1, c));
        }
        if c + 1 < cols {
            next.push((r, c + 1));
        }
        if r + 1 < rows {
            next.push((r + 1, c));
        }
        if c > 0 {
            next.push((r, c - 1));
        }
        for (nr, nc) in next {
            if blocked(nr, nc) {
                continue;
            }
            let nd = d + 1;
            if nd < dist[idx(nr, nc)] {
                dist[idx(nr, nc)] = nd;
                heap.push(Reverse((nd, nr, nc)));
            }
        }
    }
    None
}
