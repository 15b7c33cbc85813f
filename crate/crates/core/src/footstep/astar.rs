use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::grid::{Cell, GridMap};
use crate::error::{Error, Result};

/// Exact path length as `straight + diagonal * sqrt(2)` cell sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct GridCost {
    pub straight: u64,
    pub diagonal: u64,
}

impl GridCost {
    pub fn step(diagonal: bool) -> Self {
        if diagonal {
            Self {
                straight: 0,
                diagonal: 1,
            }
        } else {
            Self {
                straight: 1,
                diagonal: 0,
            }
        }
    }

    pub fn add(self, other: Self) -> Self {
        Self {
            straight: self.straight + other.straight,
            diagonal: self.diagonal + other.diagonal,
        }
    }

    /// Length in cells.
    pub fn cells(&self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    pub fn meters(&self, cell_size: f64) -> f64 {
        self.cells() * cell_size
    }
}

impl Ord for GridCost {
    /// Exact comparison of `a1 + b1 sqrt 2` against `a2 + b2 sqrt 2`.
    fn cmp(&self, other: &Self) -> Ordering {
        let da = self.straight as i128 - other.straight as i128;
        let db = other.diagonal as i128 - self.diagonal as i128;
        // Compare da with db * sqrt(2).
        match (da.signum(), db.signum()) {
            (0, 0) => Ordering::Equal,
            (s, t) if s >= 0 && t <= 0 => Ordering::Greater,
            (s, t) if s <= 0 && t >= 0 => Ordering::Less,
            (1, 1) => (da * da).cmp(&(2 * db * db)),
            _ => (2 * db * db).cmp(&(da * da)),
        }
    }
}

impl PartialOrd for GridCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Cost of a cell path (consecutive cells must be 8-neighbors).
pub fn path_cost(path: &[Cell]) -> GridCost {
    path.windows(2).fold(GridCost::default(), |acc, w| {
        let diag = w[0].0 != w[1].0 && w[0].1 != w[1].1;
        acc.add(GridCost::step(diag))
    })
}

/// A diagonal move is allowed only if both cells it cuts past are free.
pub fn move_allowed(map: &GridMap, from: Cell, to: Cell, diagonal: bool) -> bool {
    if !map.is_free(to) {
        return false;
    }
    !diagonal || (map.is_free((from.0, to.1)) && map.is_free((to.0, from.1)))
}

#[derive(Debug, Clone, Copy)]
struct OpenEntry {
    f: f64,
    h: f64,
    index: usize,
    g: GridCost,
}

impl PartialEq for OpenEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // Reversed so the max-heap pops the smallest (f, h, index).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.h.total_cmp(&self.h))
            .then(other.index.cmp(&self.index))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn heuristic(a: Cell, b: Cell) -> f64 {
    let dr = a.0 as f64 - b.0 as f64;
    let dc = a.1 as f64 - b.1 as f64;
    dr.hypot(dc)
}

/// Minimal-cost 8-connected path from `start` to `goal` over free cells.
///
/// A* with the Euclidean heuristic; ties in `f` are broken by `h`, then by
/// row-major index. Costs are tracked exactly, and the search continues past
/// the first goal pop until no open node could still improve it, so the
/// returned cost is exactly optimal.
pub fn plan_path(map: &GridMap, start: Cell, goal: Cell) -> Result<Vec<Cell>> {
    map.validate()?;
    for (name, cell) in [("start", start), ("goal", goal)] {
        if !map.contains(cell) {
            return Err(Error::Planning(format!(
                "{name} {cell:?} is outside the map"
            )));
        }
        if map.is_occupied(cell) {
            return Err(Error::Planning(format!("{name} {cell:?} is occupied")));
        }
    }
    let n = map.width * map.height;
    let mut best: Vec<Option<GridCost>> = vec![None; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let s = map.index(start);
    let gi = map.index(goal);
    best[s] = Some(GridCost::default());
    let h0 = heuristic(start, goal);
    open.push(OpenEntry {
        f: h0,
        h: h0,
        index: s,
        g: GridCost::default(),
    });
    while let Some(e) = open.pop() {
        if best[e.index] != Some(e.g) {
            continue;
        }
        if let Some(goal_cost) = best[gi] {
            if e.f > goal_cost.cells() * (1.0 + 1e-12) + 1e-9 {
                break;
            }
        }
        closed[e.index] = true;
        if e.index == gi {
            continue;
        }
        let cell = map.cell_of_index(e.index);
        for (next, diag) in map.neighbors(cell) {
            if !move_allowed(map, cell, next, diag) {
                continue;
            }
            let ni = map.index(next);
            let g = e.g.add(GridCost::step(diag));
            if best[ni].is_some_and(|old| old <= g) {
                continue;
            }
            best[ni] = Some(g);
            parent[ni] = e.index;
            closed[ni] = false;
            let h = heuristic(next, goal);
            open.push(OpenEntry {
                f: g.cells() + h,
                h,
                index: ni,
                g,
            });
        }
    }
    if best[gi].is_none() {
        let reachable: Vec<usize> = (0..n).filter(|&i| best[i].is_some()).collect();
        let nearest = reachable
            .iter()
            .map(|&i| map.cell_of_index(i))
            .min_by(|a, b| heuristic(*a, goal).total_cmp(&heuristic(*b, goal)))
            .unwrap_or(start);
        return Err(Error::Planning(format!(
            "no path from {start:?} to {goal:?}: {} cells reachable, nearest to goal is {nearest:?} ({:.2} cells away)",
            reachable.len(),
            heuristic(nearest, goal)
        )));
    }
    let mut path = vec![goal];
    let mut i = gi;
    while i != s {
        i = parent[i];
        path.push(map.cell_of_index(i));
    }
    path.reverse();
    Ok(path)
}
