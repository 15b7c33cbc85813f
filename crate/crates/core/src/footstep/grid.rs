use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::geometry::Vec2;

/// Grid cell as (row, column). Row grows along +y, column along +x.
pub type Cell = (usize, usize);

/// Occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    /// Side length of a cell (m).
    pub cell_size: f64,
    /// Row-major occupancy.
    pub occupied: Vec<bool>,
    pub inflation_scale: f64,
}

impl GridMap {
    pub fn empty(width: usize, height: usize, cell_size: f64) -> Result<Self> {
        let map = Self {
            width,
            height,
            cell_size,
            occupied: vec![false; width * height],
            inflation_scale: 1.1,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return param("map must have at least one cell");
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return param(format!(
                "cell size must be positive, got {}",
                self.cell_size
            ));
        }
        if !(self.inflation_scale.is_finite() && self.inflation_scale >= 1.0) {
            return param(format!(
                "inflation scale must be >= 1, got {}",
                self.inflation_scale
            ));
        }
        if self.occupied.len() != self.width * self.height {
            return Err(Error::Structural(
                "occupancy length differs from width * height".into(),
            ));
        }
        Ok(())
    }

    pub fn index(&self, (r, c): Cell) -> usize {
        r * self.width + c
    }

    pub fn cell_of_index(&self, i: usize) -> Cell {
        (i / self.width, i % self.width)
    }

    pub fn contains(&self, (r, c): Cell) -> bool {
        r < self.height && c < self.width
    }

    pub fn is_occupied(&self, cell: Cell) -> bool {
        self.occupied[self.index(cell)]
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.contains(cell) && !self.is_occupied(cell)
    }

    pub fn set_occupied(&mut self, cell: Cell, value: bool) {
        let i = self.index(cell);
        self.occupied[i] = value;
    }

    /// Marks the rectangle of rows `r0..r1` and columns `c0..c1` occupied.
    pub fn fill_block(&mut self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) {
        for r in rows {
            for c in cols.clone() {
                if self.contains((r, c)) {
                    self.set_occupied((r, c), true);
                }
            }
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn cell_center(&self, (r, c): Cell) -> Vec2 {
        Vec2::new(
            (c as f64 + 0.5) * self.cell_size,
            (r as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing a point, if it lies on the map.
    pub fn cell_at(&self, p: Vec2) -> Option<Cell> {
        let c = (p.x / self.cell_size).floor();
        let r = (p.y / self.cell_size).floor();
        if c < 0.0 || r < 0.0 {
            return None;
        }
        let cell = (r as usize, c as usize);
        self.contains(cell).then_some(cell)
    }

    /// Whether a point lies in a free cell.
    pub fn point_is_free(&self, p: Vec2) -> bool {
        self.cell_at(p).is_some_and(|c| !self.is_occupied(c))
    }

    /// Neighbors in the 8-connected sense, in fixed order.
    pub fn neighbors(&self, (r, c): Cell) -> impl Iterator<Item = (Cell, bool)> + '_ {
        const DIRS: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        DIRS.iter().filter_map(move |&(dr, dc)| {
            let nr = r as isize + dr;
            let nc = c as isize + dc;
            if nr < 0 || nc < 0 {
                return None;
            }
            let cell = (nr as usize, nc as usize);
            self.contains(cell).then_some((cell, dr != 0 && dc != 0))
        })
    }

    /// Occupied 8-connected components, each as a list of cells.
    pub fn components(&self) -> Vec<Vec<Cell>> {
        let mut seen = vec![false; self.occupied.len()];
        let mut out = Vec::new();
        for start in 0..self.occupied.len() {
            if !self.occupied[start] || seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![self.cell_of_index(start)];
            let mut comp = Vec::new();
            while let Some(cell) = stack.pop() {
                comp.push(cell);
                for (n, _) in self.neighbors(cell) {
                    let i = self.index(n);
                    if self.occupied[i] && !seen[i] {
                        seen[i] = true;
                        stack.push(n);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Marks every cell within `radius` cells (Chebyshev) of an occupied
    /// cell as occupied.
    pub fn dilate(&self, radius: usize) -> GridMap {
        let mut out = self.clone();
        for i in 0..self.occupied.len() {
            if !self.occupied[i] {
                continue;
            }
            let (r, c) = self.cell_of_index(i);
            let r0 = r.saturating_sub(radius);
            let c0 = c.saturating_sub(radius);
            out.fill_block(r0..r + radius + 1, c0..c + radius + 1);
        }
        out
    }
}

/// Grows every occupied component so that its bounding box grows by the
/// inflation scale (rounded to whole cells), split evenly about the
/// component with any odd cell added on the high side.
pub fn inflate(map: &GridMap) -> GridMap {
    let mut out = map.clone();
    for comp in map.components() {
        let (mut r0, mut r1, mut c0, mut c1) = (usize::MAX, 0, usize::MAX, 0);
        for &(r, c) in &comp {
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
        }
        let grow = |n: usize| -> (usize, usize) {
            let target = (n as f64 * map.inflation_scale).round() as usize;
            let extra = target.saturating_sub(n);
            (extra / 2, extra - extra / 2)
        };
        let (lo_r, hi_r) = grow(r1 - r0 + 1);
        let (lo_c, hi_c) = grow(c1 - c0 + 1);
        for &(r, c) in &comp {
            out.fill_block(
                r.saturating_sub(lo_r)..r + hi_r + 1,
                c.saturating_sub(lo_c)..c + hi_c + 1,
            );
        }
    }
    out
}

/// JSON map file: `{width, height, cell_size, occupied: [[r, c], ...],
/// start: [r, c], goal: [r, c]}` with an optional `inflation_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFile {
    pub width: usize,
    pub height: usize,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
    pub occupied: Vec<Cell>,
    pub start: Cell,
    pub goal: Cell,
    #[serde(default = "default_inflation")]
    pub inflation_scale: f64,
}

fn default_cell_size() -> f64 {
    0.1
}

fn default_inflation() -> f64 {
    1.1
}

impl MapFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<GridMap> {
        let mut map = GridMap::empty(self.width, self.height, self.cell_size)?;
        map.inflation_scale = self.inflation_scale;
        map.validate()?;
        for &cell in &self.occupied {
            if !map.contains(cell) {
                return param(format!("occupied cell {cell:?} is outside the map"));
            }
            map.set_occupied(cell, true);
        }
        for (name, cell) in [("start", self.start), ("goal", self.goal)] {
            if !map.contains(cell) {
                return param(format!("{name} cell {cell:?} is outside the map"));
            }
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_map_stays_empty() {
        let m = GridMap::empty(10, 10, 0.1).unwrap();
        assert_eq!(inflate(&m).occupied_count(), 0);
    }

    #[test]
    fn single_cell_is_not_grown() {
        let mut m = GridMap::empty(10, 10, 0.1).unwrap();
        m.set_occupied((5, 5), true);
        assert_eq!(inflate(&m).occupied_count(), 1);
    }

    #[test]
    fn ten_by_ten_block_becomes_eleven() {
        let mut m = GridMap::empty(30, 30, 0.1).unwrap();
        m.fill_block(10..20, 10..20);
        let inflated = inflate(&m);
        assert_eq!(inflated.occupied_count(), 121);
        assert!(m
            .occupied
            .iter()
            .zip(&inflated.occupied)
            .all(|(a, b)| !a || *b));
    }

    #[test]
    fn cell_geometry() {
        let m = GridMap::empty(4, 3, 0.1).unwrap();
        let p = m.cell_center((2, 1));
        assert!((p.x - 0.15).abs() < 1e-15 && (p.y - 0.25).abs() < 1e-15);
        assert_eq!(m.cell_at(p), Some((2, 1)));
        assert_eq!(m.cell_at(Vec2::new(-0.01, 0.0)), None);
    }
}
