//! Non-adaptive reference planners. Each yields a stream of target grid
//! points; the survey connects consecutive targets with obstacle-avoiding
//! routes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::GridGeometry;
use crate::rng::{self, Purpose};

fn rotate_to(mut order: Vec<usize>, current: usize) -> Vec<usize> {
    if let Some(pos) = order.iter().position(|&k| k == current) {
        order.rotate_left(pos);
    }
    order
}

/// Column-by-column sweep: even columns top to bottom, odd columns bottom to
/// top. Buildings are skipped. Starts at `current` if it is on the sweep.
pub fn grid_order(grid: &GridGeometry, current: usize) -> Vec<usize> {
    let mut order = Vec::with_capacity(grid.len());
    for j in 0..grid.cols() {
        let rows: Box<dyn Iterator<Item = usize>> = if j % 2 == 0 {
            Box::new(0..grid.rows())
        } else {
            Box::new((0..grid.rows()).rev())
        };
        order.extend(rows.map(|i| grid.index(i, j)).filter(|&k| !grid.is_building(k)));
    }
    rotate_to(order, current)
}

/// Inward rectangular spiral from the top-left corner, clockwise.
pub fn spiral_order(grid: &GridGeometry, current: usize) -> Vec<usize> {
    let (mut top, mut left) = (0isize, 0isize);
    let (mut bottom, mut right) = (grid.rows() as isize - 1, grid.cols() as isize - 1);
    let mut order = Vec::with_capacity(grid.len());
    let mut push = |i: isize, j: isize| order.push(grid.index(i as usize, j as usize));
    while top <= bottom && left <= right {
        for j in left..=right {
            push(top, j);
        }
        for i in top + 1..=bottom {
            push(i, right);
        }
        if top < bottom {
            for j in (left..right).rev() {
                push(bottom, j);
            }
        }
        if left < right {
            for i in (top + 1..bottom).rev() {
                push(i, left);
            }
        }
        top += 1;
        left += 1;
        bottom -= 1;
        right -= 1;
    }
    order.retain(|&k| !grid.is_building(k));
    rotate_to(order, current)
}

/// Endless stream of i.i.d. uniform targets outside buildings, never equal
/// to the previous target.
#[derive(Debug, Clone)]
pub struct UniformTargets {
    free: Vec<usize>,
    rng: ChaCha8Rng,
    last: usize,
}

pub fn uniform_targets(grid: &GridGeometry, current: usize, seed: u64) -> UniformTargets {
    UniformTargets {
        free: grid.free_indices().collect(),
        rng: rng::stream(seed, Purpose::Planner, 0),
        last: current,
    }
}

impl Iterator for UniformTargets {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.free.len() < 2 {
            return None;
        }
        loop {
            let k = self.free[self.rng.gen_range(0..self.free.len())];
            if k != self.last {
                self.last = k;
                return Some(k);
            }
        }
    }
}

/// 8-connected digital line from `a` to `b`, or `None` if it touches a
/// building or cuts a building corner.
pub fn straight_line(grid: &GridGeometry, a: usize, b: usize) -> Option<Vec<usize>> {
    let (ai, aj) = grid.coords(a);
    let (bi, bj) = grid.coords(b);
    let (ai, aj, bi, bj) = (ai as isize, aj as isize, bi as isize, bj as isize);
    let steps = (bi - ai).abs().max((bj - aj).abs());
    let mut line = Vec::with_capacity(steps as usize + 1);
    line.push(a);
    for s in 1..=steps {
        let t = s as f64 / steps as f64;
        let i = (ai as f64 + (bi - ai) as f64 * t).round() as usize;
        let j = (aj as f64 + (bj - aj) as f64 * t).round() as usize;
        let k = grid.index(i, j);
        if !grid.is_step(*line.last().unwrap(), k) {
            return None;
        }
        line.push(k);
    }
    Some(line)
}
