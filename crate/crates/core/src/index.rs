//! Uniform-grid spatial index over a ball union.
//!
//! Walks need, at every step, a lower bound on the distance to the nearest
//! stop ball and the exact distance once a ball is close. Ball centres are
//! bucketed by grid cell (cell edge `h >= 2.2 * r_max`), so a ball within
//! `h - r_max` of a query point always has its centre in the 3^d block of
//! cells around the query. A Chebyshev distance transform over occupied
//! cells gives a cheap lower bound far away from every ball.

use std::collections::VecDeque;

use crate::point::{Point, MAX_DIM};

/// Unions with at most this many balls are scanned linearly.
const LINEAR_LIMIT: usize = 24;
const MAX_CELLS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestBall {
    /// Lower bound on the distance to every non-degenerate ball (negative
    /// when the query lies inside a ball).
    pub lower_bound: f64,
    /// Nearest ball among those inspected, with its exact signed distance.
    pub nearest: Option<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct BallIndex {
    dim: usize,
    centers: Vec<Point>,
    r_max: f64,
    lo: Point,
    hi: Point,
    grid: Option<Grid>,
}

#[derive(Debug, Clone)]
struct Grid {
    h: f64,
    origin: Point,
    shape: [usize; MAX_DIM],
    strides: [usize; MAX_DIM],
    starts: Vec<u32>,
    items: Vec<u32>,
    /// Chebyshev distance (in cells) to the nearest occupied cell.
    gap: Vec<u16>,
}

impl BallIndex {
    /// Builds the index from ball centres and their (outer) radii. Queries
    /// may later use any radii not exceeding these.
    pub fn new(centers: Vec<Point>, radii: &[f64]) -> Self {
        assert_eq!(centers.len(), radii.len());
        let dim = centers.first().map(|c| c.dim()).unwrap_or(1);
        let r_max = radii.iter().copied().fold(0.0, f64::max);
        let mut lo = Point::zero(dim);
        let mut hi = Point::zero(dim);
        for a in 0..dim {
            lo[a] = f64::INFINITY;
            hi[a] = f64::NEG_INFINITY;
        }
        for (c, r) in centers.iter().zip(radii) {
            for a in 0..dim {
                lo[a] = lo[a].min(c[a] - r);
                hi[a] = hi[a].max(c[a] + r);
            }
        }
        let grid = if centers.len() > LINEAR_LIMIT {
            Some(Grid::build(&centers, r_max, lo, hi))
        } else {
            None
        };
        BallIndex {
            dim,
            centers,
            r_max,
            lo,
            hi,
            grid,
        }
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    fn dist_to_box(&self, x: &Point) -> f64 {
        let mut s = 0.0;
        for a in 0..self.dim {
            let t = if x[a] < self.lo[a] {
                self.lo[a] - x[a]
            } else if x[a] > self.hi[a] {
                x[a] - self.hi[a]
            } else {
                0.0
            };
            s += t * t;
        }
        s.sqrt()
    }

    /// Nearest non-degenerate ball for the given current radii.
    pub fn nearest(&self, x: &Point, radii: &[f64]) -> NearestBall {
        if self.centers.is_empty() {
            return NearestBall {
                lower_bound: f64::INFINITY,
                nearest: None,
            };
        }
        let box_dist = self.dist_to_box(x);
        let mut best: Option<(usize, f64)> = None;
        let mut consider = |i: usize| {
            let r = radii[i];
            if r <= 0.0 {
                return;
            }
            let d = x.dist(&self.centers[i]) - r;
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        };
        let unseen = match &self.grid {
            None => {
                for i in 0..self.centers.len() {
                    consider(i);
                }
                f64::INFINITY
            }
            Some(g) => {
                if box_dist > g.h {
                    // Every ball is at least box_dist away; no scan needed.
                    box_dist
                } else {
                    let cell = g.cell_of(x);
                    let gap = g.gap_at(&cell);
                    if gap <= 1 {
                        g.for_block(&cell, 1, |i| consider(i as usize));
                    }
                    let rings = f64::from(gap.max(2)) - 1.0;
                    (rings * g.h - self.r_max).max(box_dist)
                }
            }
        };
        let lower_bound = match best {
            Some((_, d)) => d.min(unseen),
            None => unseen,
        };
        NearestBall {
            lower_bound,
            nearest: best,
        }
    }

    /// Index of a closed ball (with the current radii) containing `x`.
    pub fn containing(&self, x: &Point, radii: &[f64]) -> Option<usize> {
        if self.centers.is_empty() || self.dist_to_box(x) > 0.0 {
            return None;
        }
        let hit = |i: usize| {
            let r = radii[i];
            r > 0.0 && x.dist_sq(&self.centers[i]) <= r * r
        };
        match &self.grid {
            None => (0..self.centers.len()).find(|&i| hit(i)),
            Some(g) => {
                let cell = g.cell_of(x);
                let mut found = None;
                g.for_block(&cell, 1, |i| {
                    if found.is_none() && hit(i as usize) {
                        found = Some(i as usize);
                    }
                });
                found
            }
        }
    }

    /// Distance from the centre of ball `i` to the nearest other ball
    /// (surface distance, using the outer radii passed in).
    pub fn nearest_other(&self, i: usize, radii: &[f64]) -> f64 {
        let x = self.centers[i];
        let mut best = f64::INFINITY;
        let consider = |j: usize, best: &mut f64| {
            if j != i {
                *best = best.min(x.dist(&self.centers[j]) - radii[j]);
            }
        };
        match &self.grid {
            None => {
                for j in 0..self.centers.len() {
                    consider(j, &mut best);
                }
            }
            Some(g) => {
                let cell = g.cell_of(&x);
                let max_ring = g.shape[..self.dim].iter().copied().max().unwrap_or(1);
                let mut ring = 1;
                loop {
                    g.for_ring(&cell, ring, |j| consider(j as usize, &mut best));
                    // Balls beyond this ring have centres at least ring*h away.
                    if (ring as f64) * g.h - self.r_max >= best || ring > max_ring {
                        break;
                    }
                    ring += 1;
                }
            }
        }
        best
    }
}

impl Grid {
    fn build(centers: &[Point], r_max: f64, lo: Point, hi: Point) -> Grid {
        let dim = lo.dim();
        let mut volume = 1.0;
        for a in 0..dim {
            volume *= (hi[a] - lo[a]).max(1e-12);
        }
        let spacing = (volume / centers.len() as f64).powf(1.0 / dim as f64);
        let mut h = spacing.max(2.2 * r_max).max(1e-12);
        let mut shape = [1usize; MAX_DIM];
        loop {
            let mut cells = 1usize;
            for a in 0..dim {
                shape[a] = (((hi[a] - lo[a]) / h).floor() as usize) + 3;
                cells = cells.saturating_mul(shape[a]);
            }
            if cells <= MAX_CELLS {
                break;
            }
            h *= 1.25;
        }
        let mut origin = lo;
        for a in 0..dim {
            origin[a] -= h;
        }
        let mut strides = [0usize; MAX_DIM];
        let mut s = 1;
        for a in (0..dim).rev() {
            strides[a] = s;
            s *= shape[a];
        }
        let ncell = s;
        let mut grid = Grid {
            h,
            origin,
            shape,
            strides,
            starts: Vec::new(),
            items: Vec::new(),
            gap: Vec::new(),
        };
        let cell_ids: Vec<usize> = centers
            .iter()
            .map(|c| grid.linear(&grid.cell_of(c)))
            .collect();
        let mut counts = vec![0u32; ncell + 1];
        for &c in &cell_ids {
            counts[c + 1] += 1;
        }
        for k in 0..ncell {
            counts[k + 1] += counts[k];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; centers.len()];
        for (i, &c) in cell_ids.iter().enumerate() {
            items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid.starts = counts;
        grid.items = items;
        grid.gap = grid.distance_transform(dim);
        grid
    }

    fn distance_transform(&self, dim: usize) -> Vec<u16> {
        let ncell = self.starts.len() - 1;
        let mut gap = vec![u16::MAX; ncell];
        let mut queue = VecDeque::new();
        for (k, g) in gap.iter_mut().enumerate() {
            if self.starts[k + 1] > self.starts[k] {
                *g = 0;
                queue.push_back(k);
            }
        }
        while let Some(k) = queue.pop_front() {
            let next = gap[k].saturating_add(1);
            let cell = self.unlinear(k, dim);
            self.for_neighbor_cells(&cell, 1, dim, |nb| {
                if gap[nb] > next {
                    gap[nb] = next;
                    queue.push_back(nb);
                }
            });
        }
        gap
    }

    fn cell_of(&self, x: &Point) -> [i64; MAX_DIM] {
        let mut c = [0i64; MAX_DIM];
        for a in 0..x.dim() {
            let t = ((x[a] - self.origin[a]) / self.h).floor();
            c[a] = t.clamp(-1.0, self.shape[a] as f64) as i64;
        }
        c
    }

    fn in_range(&self, c: &[i64; MAX_DIM], dim: usize) -> bool {
        (0..dim).all(|a| c[a] >= 0 && (c[a] as usize) < self.shape[a])
    }

    fn linear(&self, c: &[i64; MAX_DIM]) -> usize {
        let mut k = 0;
        for a in 0..MAX_DIM {
            k += c[a].max(0) as usize * self.strides[a];
        }
        k
    }

    fn unlinear(&self, mut k: usize, dim: usize) -> [i64; MAX_DIM] {
        let mut c = [0i64; MAX_DIM];
        for a in 0..dim {
            c[a] = (k / self.strides[a]) as i64;
            k %= self.strides[a];
        }
        c
    }

    fn gap_at(&self, c: &[i64; MAX_DIM]) -> u16 {
        let dim = self.dim();
        if self.in_range(c, dim) {
            self.gap[self.linear(c)]
        } else {
            1
        }
    }

    fn dim(&self) -> usize {
        self.strides.iter().filter(|&&s| s > 0).count()
    }

    fn for_neighbor_cells<F: FnMut(usize)>(
        &self,
        c: &[i64; MAX_DIM],
        reach: i64,
        dim: usize,
        mut f: F,
    ) {
        let mut off = [-reach; MAX_DIM];
        loop {
            let mut nb = [0i64; MAX_DIM];
            for a in 0..dim {
                nb[a] = c[a] + off[a];
            }
            if self.in_range(&nb, dim) {
                f(self.linear(&nb));
            }
            let mut a = 0;
            loop {
                if a == dim {
                    return;
                }
                off[a] += 1;
                if off[a] <= reach {
                    break;
                }
                off[a] = -reach;
                a += 1;
            }
        }
    }

    fn for_block<F: FnMut(u32)>(&self, c: &[i64; MAX_DIM], reach: i64, mut f: F) {
        let dim = self.dim();
        self.for_neighbor_cells(c, reach, dim, |k| {
            for &i in &self.items[self.starts[k] as usize..self.starts[k + 1] as usize] {
                f(i);
            }
        });
    }

    fn for_ring<F: FnMut(u32)>(&self, c: &[i64; MAX_DIM], ring: usize, mut f: F) {
        let dim = self.dim();
        let r = ring as i64;
        self.for_neighbor_cells(c, r, dim, |k| {
            let cell = self.unlinear(k, dim);
            let cheb = (0..dim).map(|a| (cell[a] - c[a]).abs()).max().unwrap_or(0);
            if cheb == r || (ring == 1 && cheb == 0) {
                for &i in &self.items[self.starts[k] as usize..self.starts[k + 1] as usize] {
                    f(i);
                }
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lattice(n: i32) -> (Vec<Point>, Vec<f64>) {
        let mut c = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    c.push(Point::new(&[i as f64 * 0.1, j as f64 * 0.1, k as f64 * 0.1]));
                }
            }
        }
        let r = vec![0.02; c.len()];
        (c, r)
    }

    #[test]
    fn grid_queries_agree_with_brute_force() {
        let (centers, radii) = lattice(8);
        let index = BallIndex::new(centers.clone(), &radii);
        assert!(index.grid.is_some());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let x = Point::new(&[
                rng.random_range(-1.0..2.0),
                rng.random_range(-1.0..2.0),
                rng.random_range(-1.0..2.0),
            ]);
            let brute = centers
                .iter()
                .zip(&radii)
                .map(|(c, r)| x.dist(c) - r)
                .fold(f64::INFINITY, f64::min);
            let q = index.nearest(&x, &radii);
            assert!(q.lower_bound <= brute + 1e-12, "{q:?} vs {brute}");
            if brute < 0.05 {
                let (_, d) = q.nearest.expect("near ball must be found");
                assert!((d - brute).abs() < 1e-12);
            }
            let inside = centers.iter().zip(&radii).any(|(c, r)| x.dist(c) <= *r);
            assert_eq!(index.containing(&x, &radii).is_some(), inside);
        }
    }

    #[test]
    fn far_field_bound_is_informative() {
        let (centers, radii) = lattice(6);
        let index = BallIndex::new(centers, &radii);
        let far = Point::new(&[5.0, 0.25, 0.25]);
        let q = index.nearest(&far, &radii);
        assert!(q.lower_bound > 4.0);
    }

    #[test]
    fn nearest_other_matches_lattice_spacing() {
        let (centers, radii) = lattice(5);
        let index = BallIndex::new(centers, &radii);
        for i in [0, 31, 124] {
            assert!((index.nearest_other(i, &radii) - 0.08).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_balls_are_ignored() {
        let centers = vec![Point::new(&[0.0, 0.0]), Point::new(&[3.0, 0.0])];
        let index = BallIndex::new(centers, &[1.0, 1.0]);
        let q = index.nearest(&Point::new(&[0.5, 0.0]), &[0.0, 1.0]);
        assert_eq!(q.nearest.unwrap().0, 1);
        assert!(index.containing(&Point::new(&[0.0, 0.0]), &[0.0, 1.0]).is_none());
    }
}
