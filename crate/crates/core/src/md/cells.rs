//! Cell lists and pair-force evaluation.
//!
//! Forces are gathered per particle (each pair is visited from both sides)
//! over the nine neighbouring cells in a fixed order, so the result for each
//! particle does not depend on how the particle loop is split across threads.

use rayon::prelude::*;

use super::potential::{energy_r2, force_over_r};
use crate::{Error, Result};

const MAX_CELLS_PER_AXIS: usize = 512;

/// Particle indices bucketed by cell (CSR layout, index order within a cell).
#[derive(Debug, Clone)]
pub struct CellList {
    pub ncx: usize,
    pub ncy: usize,
    pub cell_size: [f64; 2],
    /// `indices[starts[c]..starts[c + 1]]` are the particles in cell `c = cy * ncx + cx`.
    pub starts: Vec<usize>,
    pub indices: Vec<usize>,
    pub cell_of: Vec<usize>,
}

impl CellList {
    /// Cells of side at least `cutoff`; fewer than three per axis means the
    /// list is degenerate and force routines fall back to all pairs.
    pub fn build(positions: &[[f64; 2]], box_size: [f64; 2], cutoff: f64) -> Result<Self> {
        check_geometry(box_size, cutoff)?;
        // larger cells stay correct, so very short cutoffs need not explode the table
        let ncx = ((box_size[0] / cutoff).floor() as usize).clamp(1, MAX_CELLS_PER_AXIS);
        let ncy = ((box_size[1] / cutoff).floor() as usize).clamp(1, MAX_CELLS_PER_AXIS);
        let cell_size = [box_size[0] / ncx as f64, box_size[1] / ncy as f64];
        let cell_of: Vec<usize> = positions
            .iter()
            .map(|p| {
                let cx = ((p[0] / cell_size[0]) as usize).min(ncx - 1);
                let cy = ((p[1] / cell_size[1]) as usize).min(ncy - 1);
                cy * ncx + cx
            })
            .collect();
        let mut starts = vec![0usize; ncx * ncy + 1];
        for &c in &cell_of {
            starts[c + 1] += 1;
        }
        for c in 0..ncx * ncy {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut indices = vec![0usize; positions.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            indices[fill[c]] = i;
            fill[c] += 1;
        }
        Ok(Self {
            ncx,
            ncy,
            cell_size,
            starts,
            indices,
            cell_of,
        })
    }

    pub fn uses_cells(&self) -> bool {
        self.ncx >= 3 && self.ncy >= 3
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        &self.indices[self.starts[c]..self.starts[c + 1]]
    }

    /// Calls `f(j, shift)` for every particle `j` in the nine cells around
    /// cell `c`, where `shift` is the periodic image offset to add to `x_j`.
    #[inline]
    pub(crate) fn for_neighbors(&self, c: usize, box_size: [f64; 2], mut f: impl FnMut(usize, [f64; 2])) {
        let (cx, cy) = ((c % self.ncx) as isize, (c / self.ncx) as isize);
        let (nx, ny) = (self.ncx as isize, self.ncy as isize);
        for dy in -1..=1 {
            let mut yy = cy + dy;
            let mut sy = 0.0;
            if yy < 0 {
                yy += ny;
                sy = -box_size[1];
            } else if yy >= ny {
                yy -= ny;
                sy = box_size[1];
            }
            for dx in -1..=1 {
                let mut xx = cx + dx;
                let mut sx = 0.0;
                if xx < 0 {
                    xx += nx;
                    sx = -box_size[0];
                } else if xx >= nx {
                    xx -= nx;
                    sx = box_size[0];
                }
                for &j in self.cell((yy * nx + xx) as usize) {
                    f(j, [sx, sy]);
                }
            }
        }
    }
}

pub fn check_geometry(box_size: [f64; 2], cutoff: f64) -> Result<()> {
    // cutoff 0 is the force-free gas
    if !(cutoff >= 0.0) || !box_size.iter().all(|l| l.is_finite() && *l > 2.0 * cutoff) {
        return Err(Error::Geometry(format!(
            "box {}x{} must exceed twice the cutoff {cutoff}",
            box_size[0], box_size[1]
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn min_image(d: f64, l: f64) -> f64 {
    // callers pass differences of wrapped coordinates, so |d| < l
    if d > 0.5 * l {
        d - l
    } else if d < -0.5 * l {
        d + l
    } else {
        d
    }
}

/// Pair forces on every particle, optionally capping the magnitude of each
/// particle's total force at `cap`.
pub fn pair_forces(
    positions: &[[f64; 2]],
    box_size: [f64; 2],
    cutoff: f64,
    cells: &CellList,
    cap: Option<f64>,
) -> Result<Vec<[f64; 2]>> {
    check_geometry(box_size, cutoff)?;
    if cells.cell_of.len() != positions.len() {
        return Err(Error::InvalidParameter("cell list is stale".into()));
    }
    let rc2 = cutoff * cutoff;
    let mut forces: Vec<[f64; 2]> = if cells.uses_cells() {
        sorted_gather(positions, box_size, rc2, cells)
    } else {
        all_pairs_forces(positions, box_size, cutoff)?
    };
    if let Some(cap) = cap {
        for f in forces.iter_mut() {
            let m = (f[0] * f[0] + f[1] * f[1]).sqrt();
            if m > cap {
                f[0] *= cap / m;
                f[1] *= cap / m;
            }
        }
    }
    Ok(forces)
}

/// Per-particle gather over cell-sorted coordinate arrays. Each particle sums
/// its neighbours in the same order as a direct walk of the cell list
/// (neighbour cells in fixed order, index order within a cell).
fn sorted_gather(positions: &[[f64; 2]], box_size: [f64; 2], rc2: f64, cells: &CellList) -> Vec<[f64; 2]> {
    let xs: Vec<f64> = cells.indices.iter().map(|&i| positions[i][0]).collect();
    let ys: Vec<f64> = cells.indices.iter().map(|&i| positions[i][1]).collect();
    let (nx, ny) = (cells.ncx as isize, cells.ncy as isize);
    let per_cell: Vec<Vec<[f64; 2]>> = (0..cells.ncx * cells.ncy)
        .into_par_iter()
        .map(|c| {
            let (cx, cy) = ((c as isize) % nx, (c as isize) / nx);
            let mut neigh = [(0usize, 0usize, 0.0f64, 0.0f64); 9];
            let mut m = 0;
            for dy in -1..=1 {
                let (yy, sy) = wrap_cell(cy + dy, ny, box_size[1]);
                for dx in -1..=1 {
                    let (xx, sx) = wrap_cell(cx + dx, nx, box_size[0]);
                    let cc = (yy * nx + xx) as usize;
                    neigh[m] = (cells.starts[cc], cells.starts[cc + 1], sx, sy);
                    m += 1;
                }
            }
            (cells.starts[c]..cells.starts[c + 1])
                .map(|a| {
                    let (xi, yi) = (xs[a], ys[a]);
                    let mut f = [0.0, 0.0];
                    for &(lo, hi, sx, sy) in &neigh {
                        for b in lo..hi {
                            if b == a {
                                continue;
                            }
                            let d0 = xs[b] + sx - xi;
                            let d1 = ys[b] + sy - yi;
                            let r2 = d0 * d0 + d1 * d1;
                            if r2 < rc2 {
                                let g = force_over_r(r2);
                                f[0] -= g * d0;
                                f[1] -= g * d1;
                            }
                        }
                    }
                    f
                })
                .collect()
        })
        .collect();
    let mut out = vec![[0.0, 0.0]; positions.len()];
    for (&i, f) in cells.indices.iter().zip(per_cell.into_iter().flatten()) {
        out[i] = f;
    }
    out
}

#[inline]
fn wrap_cell(c: isize, n: isize, l: f64) -> (isize, f64) {
    if c < 0 {
        (c + n, -l)
    } else if c >= n {
        (c - n, l)
    } else {
        (c, 0.0)
    }
}

/// O(n^2) minimum-image reference.
pub fn all_pairs_forces(positions: &[[f64; 2]], box_size: [f64; 2], cutoff: f64) -> Result<Vec<[f64; 2]>> {
    check_geometry(box_size, cutoff)?;
    let rc2 = cutoff * cutoff;
    Ok((0..positions.len())
        .into_par_iter()
        .map(|i| {
            let xi = positions[i];
            let mut f = [0.0, 0.0];
            for (j, xj) in positions.iter().enumerate() {
                if j == i {
                    continue;
                }
                let d = [
                    min_image(xj[0] - xi[0], box_size[0]),
                    min_image(xj[1] - xi[1], box_size[1]),
                ];
                let r2 = d[0] * d[0] + d[1] * d[1];
                if r2 < rc2 {
                    let g = force_over_r(r2);
                    f[0] -= g * d[0];
                    f[1] -= g * d[1];
                }
            }
            f
        })
        .collect())
}

/// Total pair potential energy and the smallest pair distance within the cutoff.
pub fn potential_energy(positions: &[[f64; 2]], box_size: [f64; 2], cutoff: f64) -> Result<(f64, f64)> {
    let cells = CellList::build(positions, box_size, cutoff)?;
    let rc2 = cutoff * cutoff;
    let per_particle: Vec<(f64, f64)> = (0..positions.len())
        .into_par_iter()
        .map(|i| {
            let xi = positions[i];
            let mut e = 0.0;
            let mut rmin2 = f64::INFINITY;
            let mut visit = |xj: [f64; 2], s: [f64; 2], min_img: bool| {
                let mut d = [xj[0] + s[0] - xi[0], xj[1] + s[1] - xi[1]];
                if min_img {
                    d = [min_image(d[0], box_size[0]), min_image(d[1], box_size[1])];
                }
                let r2 = d[0] * d[0] + d[1] * d[1];
                if r2 < rc2 {
                    e += 0.5 * energy_r2(r2);
                    rmin2 = rmin2.min(r2);
                }
            };
            if cells.uses_cells() {
                cells.for_neighbors(cells.cell_of[i], box_size, |j, s| {
                    if j != i {
                        visit(positions[j], s, false);
                    }
                });
            } else {
                for (j, &xj) in positions.iter().enumerate() {
                    if j != i {
                        visit(xj, [0.0, 0.0], true);
                    }
                }
            }
            (e, rmin2)
        })
        .collect();
    let energy = per_particle.iter().map(|p| p.0).sum();
    let rmin = per_particle.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).sqrt();
    Ok((energy, rmin))
}
