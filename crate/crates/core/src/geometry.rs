//! Planar positions and the rectangular candidate grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Position in the surveyed plane, meters. `x` grows with the column index,
/// `y` with the row index.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Point at fraction `t` of the way from `self` to `other`.
    pub fn lerp(&self, other: &Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Rectangular grid of candidate measurement locations with a building /
/// no-fly mask. Flat index of grid point `(row, col)` is `row * cols + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGeometry {
    rows: usize,
    cols: usize,
    spacing_m: f64,
    origin: Point2,
    building: Vec<bool>,
}

impl GridGeometry {
    pub fn new(rows: usize, cols: usize, spacing_m: f64, origin: Point2) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid must be at least 2x2, got {rows}x{cols}"
            )));
        }
        if !(spacing_m > 0.0 && spacing_m.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing must be positive, got {spacing_m}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            spacing_m,
            origin,
            building: vec![false; rows * cols],
        })
    }

    pub fn with_buildings<I>(mut self, buildings: I) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        for k in buildings {
            if k >= self.len() {
                return Err(Error::InvalidParameter(format!(
                    "building index {k} outside grid of {} points",
                    self.len()
                )));
            }
            self.building[k] = true;
        }
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn spacing_m(&self) -> f64 {
        self.spacing_m
    }

    pub fn origin(&self) -> Point2 {
        self.origin
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k / self.cols, k % self.cols)
    }

    pub fn point(&self, k: usize) -> Point2 {
        let (i, j) = self.coords(k);
        Point2::new(
            self.origin.x + j as f64 * self.spacing_m,
            self.origin.y + i as f64 * self.spacing_m,
        )
    }

    pub fn points(&self) -> Vec<Point2> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    pub fn is_building(&self, k: usize) -> bool {
        self.building[k]
    }

    pub fn building_mask(&self) -> &[bool] {
        &self.building
    }

    pub fn buildings(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.building[k])
    }

    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| !self.building[k])
    }

    pub fn free_count(&self) -> usize {
        self.building.iter().filter(|b| !**b).count()
    }

    /// Extent of the bounding box along x and y.
    pub fn extent(&self) -> (f64, f64) {
        (
            (self.cols - 1) as f64 * self.spacing_m,
            (self.rows - 1) as f64 * self.spacing_m,
        )
    }

    pub fn contains(&self, p: &Point2) -> bool {
        const SLACK: f64 = 1e-9;
        let (w, h) = self.extent();
        let (dx, dy) = (p.x - self.origin.x, p.y - self.origin.y);
        dx >= -SLACK && dy >= -SLACK && dx <= w + SLACK && dy <= h + SLACK
    }

    /// Fractional (row, col) coordinates of `p`.
    pub fn fractional(&self, p: &Point2) -> (f64, f64) {
        (
            (p.y - self.origin.y) / self.spacing_m,
            (p.x - self.origin.x) / self.spacing_m,
        )
    }

    /// Nearest grid point; exact ties go to the lower flat index.
    pub fn nearest_index(&self, p: &Point2) -> usize {
        let (v, u) = self.fractional(p);
        let snap = |t: f64, n: usize| ((t - 0.5).ceil().max(0.0) as usize).min(n - 1);
        self.index(snap(v, self.rows), snap(u, self.cols))
    }

    /// Nearest grid point outside buildings, ties to the lower flat index.
    pub fn nearest_free_index(&self, p: &Point2) -> Option<usize> {
        let k = self.nearest_index(p);
        if !self.building[k] {
            return Some(k);
        }
        let mut best: Option<(f64, usize)> = None;
        for k in self.free_indices() {
            let d = self.point(k).distance(p);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, k));
            }
        }
        best.map(|(_, k)| k)
    }

    /// Grid point `k` coincides with `p` up to `1e-9` of the spacing.
    pub fn grid_point_at(&self, p: &Point2) -> Option<usize> {
        let k = self.nearest_index(p);
        (self.point(k).distance(p) <= 1e-9 * self.spacing_m).then_some(k)
    }

    /// `p` falls in the footprint (Voronoi cell) of a building grid point.
    pub fn is_indoor(&self, p: &Point2) -> bool {
        self.building[self.nearest_index(p)]
    }

    /// 8-neighbours of `k` reachable in one step: both endpoints outside
    /// buildings, and diagonal steps may not cut a building corner.
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.coords(k);
        let (i, j) = (i as isize, j as isize);
        const STEPS: [(isize, isize); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        STEPS.iter().filter_map(move |&(di, dj)| {
            let (ni, nj) = (i + di, j + dj);
            if ni < 0 || nj < 0 || ni >= self.rows as isize || nj >= self.cols as isize {
                return None;
            }
            let n = ni as usize * self.cols + nj as usize;
            if self.building[k] || self.building[n] {
                return None;
            }
            if di != 0 && dj != 0 {
                let a = i as usize * self.cols + nj as usize;
                let b = ni as usize * self.cols + j as usize;
                if self.building[a] || self.building[b] {
                    return None;
                }
            }
            Some(n)
        })
    }

    pub fn is_step(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).any(|n| n == b)
    }

    /// Euclidean length of a grid step between 8-adjacent points.
    pub fn step_length(&self, a: usize, b: usize) -> f64 {
        let (ai, aj) = self.coords(a);
        let (bi, bj) = self.coords(b);
        if ai != bi && aj != bj {
            self.spacing_m * std::f64::consts::SQRT_2
        } else {
            self.spacing_m
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(rows: usize, cols: usize) -> GridGeometry {
        GridGeometry::new(rows, cols, 3.0, Point2::default()).unwrap()
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(GridGeometry::new(1, 5, 1.0, Point2::default()).is_err());
        assert!(GridGeometry::new(5, 5, 0.0, Point2::default()).is_err());
        assert!(grid(2, 2).with_buildings([4]).is_err());
    }

    #[test]
    fn nearest_index_ties_go_low() {
        let g = grid(3, 3);
        // halfway between columns 0 and 1 on row 0
        assert_eq!(g.nearest_index(&Point2::new(1.5, 0.0)), 0);
        // centre of the cell spanned by 0, 1, 3, 4
        assert_eq!(g.nearest_index(&Point2::new(1.5, 1.5)), 0);
        assert_eq!(g.nearest_index(&Point2::new(1.6, 0.0)), 1);
        assert_eq!(g.nearest_index(&Point2::new(-5.0, 100.0)), 6);
    }

    #[test]
    fn diagonal_steps_do_not_cut_corners() {
        let g = grid(3, 3).with_buildings([1]).unwrap();
        let n: Vec<_> = g.neighbors(0).collect();
        assert_eq!(n, vec![3]);
        let n: Vec<_> = g.neighbors(4).collect();
        // 0 and 2 are reached only through the building's corner
        assert_eq!(n, vec![3, 5, 6, 7, 8]);
        assert!(g.neighbors(1).next().is_none());
    }

    proptest! {
        #[test]
        fn flat_index_round_trips(rows in 2usize..40, cols in 2usize..40, seed in 0usize..10_000) {
            let g = grid(rows, cols);
            let k = seed % g.len();
            let (i, j) = g.coords(k);
            prop_assert_eq!(g.index(i, j), k);
            prop_assert_eq!(g.nearest_index(&g.point(k)), k);
            prop_assert_eq!(g.grid_point_at(&g.point(k)), Some(k));
        }
    }
}
