//! Fixed-radius neighbour queries on a uniform cell grid.

use glam::DVec2;

use crate::geometry::{Arena, Boundary};
use crate::particle::ParticleState;

/// Uniform cell grid over the arena, rebuilt every step.
///
/// Cells are stored in compressed form: `items[starts[c]..starts[c + 1]]`
/// holds the particle indices of cell `c` in ascending order.
#[derive(Debug, Clone)]
pub struct CellGrid {
    arena: Arena,
    radius: f64,
    nx: usize,
    ny: usize,
    cell_w: f64,
    cell_h: f64,
    starts: Vec<usize>,
    items: Vec<usize>,
    positions: Vec<DVec2>,
    all_pairs: bool,
}

impl CellGrid {
    pub fn build(particles: &[ParticleState], arena: &Arena, radius: f64) -> CellGrid {
        let positions: Vec<DVec2> = particles.iter().map(|p| p.position).collect();
        Self::from_positions(positions, arena, radius)
    }

    pub fn from_positions(positions: Vec<DVec2>, arena: &Arena, radius: f64) -> CellGrid {
        assert!(radius > 0.0, "query radius must be positive");
        let too_short = |len: f64, bc: Boundary| bc == Boundary::Periodic && len < 2.0 * radius;
        let all_pairs = too_short(arena.lx, arena.bc_x) || too_short(arena.ly, arena.bc_y);
        let (nx, ny) = if all_pairs {
            (1, 1)
        } else {
            (
                ((arena.lx / radius).floor() as usize).max(1),
                ((arena.ly / radius).floor() as usize).max(1),
            )
        };
        let cell_w = arena.lx / nx as f64;
        let cell_h = arena.ly / ny as f64;

        let mut grid = CellGrid {
            arena: *arena,
            radius,
            nx,
            ny,
            cell_w,
            cell_h,
            starts: vec![0; nx * ny + 1],
            items: vec![0; positions.len()],
            positions,
            all_pairs,
        };
        let cells: Vec<usize> = grid.positions.iter().map(|&p| grid.cell_of(p)).collect();
        for &c in &cells {
            grid.starts[c + 1] += 1;
        }
        for c in 0..nx * ny {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        for (i, &c) in cells.iter().enumerate() {
            grid.items[fill[c]] = i;
            fill[c] += 1;
        }
        grid
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Occupancy of every cell, in cell order.
    pub fn occupancies(&self) -> Vec<usize> {
        self.starts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    fn cell_coords(&self, p: DVec2) -> (usize, usize) {
        let cx = ((p.x / self.cell_w).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = ((p.y / self.cell_h).floor().max(0.0) as usize).min(self.ny - 1);
        (cx, cy)
    }

    fn cell_of(&self, p: DVec2) -> usize {
        let (cx, cy) = self.cell_coords(p);
        cy * self.nx + cx
    }

    /// Distinct cells of the 3x3 block around the cell holding `p`.
    fn stencil(&self, p: DVec2) -> ([usize; 9], usize) {
        let (cx, cy) = self.cell_coords(p);
        self.stencil_at(cx, cy)
    }

    /// Distinct cells of the 3x3 block around cell `(cx, cy)`, wrapped on periodic axes.
    fn stencil_at(&self, cx: usize, cy: usize) -> ([usize; 9], usize) {
        let axis = |c: usize, n: usize, bc: Boundary| -> ([usize; 3], usize) {
            let mut out = [0; 3];
            let mut len = 0;
            for off in [-1isize, 0, 1] {
                let v = c as isize + off;
                let v = match bc {
                    Boundary::Periodic => v.rem_euclid(n as isize) as usize,
                    Boundary::BounceBack => {
                        if v < 0 || v >= n as isize {
                            continue;
                        }
                        v as usize
                    }
                };
                if !out[..len].contains(&v) {
                    out[len] = v;
                    len += 1;
                }
            }
            (out, len)
        };
        let (xs, nxs) = axis(cx, self.nx, self.arena.bc_x);
        let (ys, nys) = axis(cy, self.ny, self.arena.bc_y);
        let mut cells = [0; 9];
        let mut len = 0;
        for &y in &ys[..nys] {
            for &x in &xs[..nxs] {
                cells[len] = y * self.nx + x;
                len += 1;
            }
        }
        (cells, len)
    }

    /// Calls `f(j, r_i - r_j)` for every `j` within `radius` of particle `i`,
    /// including `i` itself. Visit order is deterministic but not sorted.
    #[inline]
    pub fn for_each_within<F: FnMut(usize, DVec2)>(&self, i: usize, radius: f64, mut f: F) {
        debug_assert!(radius <= self.radius * (1.0 + 1e-12));
        let pi = self.positions[i];
        let r2 = radius * radius;
        let (cells, len) = self.stencil(pi);
        for &c in &cells[..len] {
            for &j in &self.items[self.starts[c]..self.starts[c + 1]] {
                let sep = self.arena.separation(pi, self.positions[j]);
                if sep.length_squared() <= r2 {
                    f(j, sep);
                }
            }
        }
    }

    /// Calls `f(i, j, r_i - r_j)` for every ordered pair within `radius`,
    /// self pairs included. Particles are visited cell by cell.
    pub fn for_each_pair_within<F: FnMut(usize, usize, DVec2)>(&self, radius: f64, mut f: F) {
        debug_assert!(radius <= self.radius * (1.0 + 1e-12));
        let r2 = radius * radius;
        for cy in 0..self.ny {
            for cx in 0..self.nx {
                let c = cy * self.nx + cx;
                let home = &self.items[self.starts[c]..self.starts[c + 1]];
                if home.is_empty() {
                    continue;
                }
                let (cells, len) = self.stencil_at(cx, cy);
                for &i in home {
                    let pi = self.positions[i];
                    for &d in &cells[..len] {
                        for &j in &self.items[self.starts[d]..self.starts[d + 1]] {
                            let sep = self.arena.separation(pi, self.positions[j]);
                            if sep.length_squared() <= r2 {
                                f(i, j, sep);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Indices within `radius` of particle `i` (minimum-image distance, `i` included), ascending.
    pub fn neighbors_within(&self, i: usize, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(i, radius, |j, _| out.push(j));
        out.sort_unstable();
        out
    }

    pub fn is_all_pairs(&self) -> bool {
        self.all_pairs
    }
}

/// O(N^2) reference used to check the grid.
pub fn brute_force_neighbors(positions: &[DVec2], arena: &Arena, i: usize, radius: f64) -> Vec<usize> {
    let r2 = radius * radius;
    (0..positions.len())
        .filter(|&j| arena.separation(positions[i], positions[j]).length_squared() <= r2)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn positions_in(arena: &Arena, n: usize, rng: &mut ChaCha8Rng) -> Vec<DVec2> {
        (0..n)
            .map(|_| DVec2::new(rng.gen_range(0.0..arena.lx), rng.gen_range(0.0..arena.ly)))
            .collect()
    }

    #[test]
    fn empty_grid() {
        let grid = CellGrid::from_positions(vec![], &Arena::corridor(600.0, 4.5), 1.0);
        assert!(grid.is_empty());
        assert_eq!(grid.occupancies().iter().sum::<usize>(), 0);
    }

    #[test]
    fn single_particle_single_cell() {
        let grid = CellGrid::from_positions(vec![DVec2::new(0.1, 0.1)], &Arena::corridor(600.0, 4.5), 1.0);
        let occupied: Vec<_> = grid.occupancies().into_iter().filter(|&c| c > 0).collect();
        assert_eq!(occupied, vec![1]);
        assert_eq!(grid.neighbors_within(0, 1.0), vec![0]);
    }

    #[test]
    fn occupancy_is_conserved() {
        let arena = Arena::corridor(600.0, 4.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = CellGrid::from_positions(positions_in(&arena, 300, &mut rng), &arena, 1.0);
        assert_eq!(grid.occupancies().iter().sum::<usize>(), 300);
    }

    #[test]
    fn close_pair_is_mutual() {
        let arena = Arena::corridor(600.0, 4.5);
        let grid = CellGrid::from_positions(vec![DVec2::new(10.0, 2.0), DVec2::new(10.99, 2.0)], &arena, 1.0);
        assert_eq!(grid.neighbors_within(0, 1.0), vec![0, 1]);
        assert_eq!(grid.neighbors_within(1, 1.0), vec![0, 1]);
    }

    #[test]
    fn pair_across_periodic_seam() {
        let arena = Arena::corridor(600.0, 4.5);
        let grid = CellGrid::from_positions(vec![DVec2::new(0.2, 2.0), DVec2::new(599.9, 2.0)], &arena, 1.0);
        assert_eq!(grid.neighbors_within(0, 1.0), vec![0, 1]);
        assert_eq!(grid.neighbors_within(1, 1.0), vec![0, 1]);
    }

    #[test]
    fn walls_do_not_wrap() {
        let arena = Arena::corridor(600.0, 4.5);
        let grid = CellGrid::from_positions(vec![DVec2::new(5.0, 0.1), DVec2::new(5.0, 4.4)], &arena, 1.0);
        assert_eq!(grid.neighbors_within(0, 1.0), vec![0]);
        let periodic = Arena::new(600.0, 4.5, Boundary::Periodic, Boundary::Periodic).unwrap();
        let grid = CellGrid::from_positions(vec![DVec2::new(5.0, 0.1), DVec2::new(5.0, 4.4)], &periodic, 1.0);
        assert_eq!(grid.neighbors_within(0, 1.0), vec![0, 1]);
    }

    #[test]
    fn narrow_corridor_collapses_to_one_row() {
        let arena = Arena::corridor(600.0, 2.5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pos = positions_in(&arena, 300, &mut rng);
        let grid = CellGrid::from_positions(pos.clone(), &arena, 3.5);
        assert_eq!(grid.ny, 1);
        for i in 0..pos.len() {
            assert_eq!(grid.neighbors_within(i, 3.5), brute_force_neighbors(&pos, &arena, i, 3.5));
        }
    }

    #[test]
    fn tiny_periodic_box_falls_back_to_all_pairs() {
        let arena = Arena::new(1.5, 1.5, Boundary::Periodic, Boundary::Periodic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pos = positions_in(&arena, 20, &mut rng);
        let grid = CellGrid::from_positions(pos.clone(), &arena, 1.0);
        assert!(grid.is_all_pairs());
        for i in 0..pos.len() {
            assert_eq!(grid.neighbors_within(i, 1.0), brute_force_neighbors(&pos, &arena, i, 1.0));
        }
    }
}
