//! Verlet neighbour lists with a skin.
//!
//! Each particle's list is sorted by index and forces sum over it in that
//! order, skipping pairs beyond the cutoff. The force on a particle is then a
//! fixed function of the positions, independent of when the list was built,
//! which the reversible integrator relies on.

use rayon::prelude::*;

use super::cells::{check_geometry, min_image, CellList};
use super::potential::force_over_r;
use crate::Result;

/// Extra radius beyond the cutoff kept in the lists.
pub const SKIN: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct NeighborList {
    pub cutoff: f64,
    pub skin: f64,
    pub box_size: [f64; 2],
    reference: Vec<[f64; 2]>,
    starts: Vec<usize>,
    neighbors: Vec<u32>,
    /// For the entry `(i, j)`, the index of the entry `(j, i)`.
    mirror: Vec<u32>,
}

impl NeighborList {
    pub fn build(positions: &[[f64; 2]], box_size: [f64; 2], cutoff: f64, skin: f64) -> Result<Self> {
        check_geometry(box_size, cutoff)?;
        // a skin the box cannot hold is shrunk rather than rejected
        let skin = skin.min(0.5 * (box_size[0].min(box_size[1]) - 2.0 * cutoff)).max(0.0);
        let reach = cutoff + skin;
        let reach2 = reach * reach;
        let close = |i: usize, j: usize| {
            let d0 = min_image(positions[j][0] - positions[i][0], box_size[0]);
            let d1 = min_image(positions[j][1] - positions[i][1], box_size[1]);
            d0 * d0 + d1 * d1 < reach2
        };
        let cells = if box_size.iter().all(|&l| l > 2.0 * reach) {
            Some(CellList::build(positions, box_size, reach)?).filter(|c| c.uses_cells())
        } else {
            None
        };
        let lists: Vec<Vec<u32>> = (0..positions.len())
            .into_par_iter()
            .map(|i| {
                let mut near: Vec<u32> = match &cells {
                    Some(c) => {
                        let mut v = Vec::new();
                        c.for_neighbors(c.cell_of[i], box_size, |j, _| {
                            if j != i && close(i, j) {
                                v.push(j as u32);
                            }
                        });
                        v
                    }
                    None => (0..positions.len())
                        .filter(|&j| j != i && close(i, j))
                        .map(|j| j as u32)
                        .collect(),
                };
                near.sort_unstable();
                near
            })
            .collect();
        let mut starts = Vec::with_capacity(positions.len() + 1);
        starts.push(0);
        for l in &lists {
            starts.push(starts.last().unwrap() + l.len());
        }
        let neighbors = lists.concat();
        let mirror = (0..positions.len())
            .into_par_iter()
            .flat_map_iter(|i| {
                let (starts, neighbors) = (&starts, &neighbors);
                neighbors[starts[i]..starts[i + 1]].iter().map(move |&j| {
                    let j = j as usize;
                    let k = neighbors[starts[j]..starts[j + 1]].partition_point(|&m| (m as usize) < i);
                    (starts[j] + k) as u32
                })
            })
            .collect();
        Ok(Self {
            cutoff,
            skin,
            box_size,
            reference: positions.to_vec(),
            starts,
            neighbors,
            mirror,
        })
    }

    /// Whether the list still covers every pair within the cutoff.
    pub fn is_valid_for(&self, positions: &[[f64; 2]], box_size: [f64; 2], cutoff: f64) -> bool {
        if positions.len() != self.reference.len() || box_size != self.box_size || cutoff != self.cutoff {
            return false;
        }
        let lim2 = 0.25 * self.skin * self.skin;
        positions.par_iter().zip(self.reference.par_iter()).all(|(p, r)| {
            let d0 = min_image(p[0] - r[0], box_size[0]);
            let d1 = min_image(p[1] - r[1], box_size[1]);
            d0 * d0 + d1 * d1 < lim2
        })
    }

    pub fn of(&self, i: usize) -> &[u32] {
        &self.neighbors[self.starts[i]..self.starts[i + 1]]
    }

    /// Pair forces, optionally capping each particle's total at `cap`.
    ///
    /// Each pair is evaluated once, for its lower index; the partner adds the
    /// exact negative, so every particle still sums in ascending index order.
    pub fn forces(&self, positions: &[[f64; 2]], cap: Option<f64>) -> Vec<[f64; 2]> {
        let rc2 = self.cutoff * self.cutoff;
        let [lx, ly] = self.box_size;
        let mut pair = vec![[0.0f64; 2]; self.neighbors.len()];
        let mut chunks = Vec::with_capacity(positions.len());
        let mut rest = pair.as_mut_slice();
        for i in 0..positions.len() {
            let (head, tail) = rest.split_at_mut(self.starts[i + 1] - self.starts[i]);
            chunks.push(head);
            rest = tail;
        }
        chunks.into_par_iter().enumerate().for_each(|(i, out)| {
            let xi = positions[i];
            let list = self.of(i);
            let upper = list.partition_point(|&j| (j as usize) < i);
            for (slot, &j) in out[upper..].iter_mut().zip(&list[upper..]) {
                let xj = positions[j as usize];
                let d0 = min_image(xj[0] - xi[0], lx);
                let d1 = min_image(xj[1] - xi[1], ly);
                let r2 = d0 * d0 + d1 * d1;
                if r2 < rc2 {
                    let g = force_over_r(r2);
                    *slot = [-g * d0, -g * d1];
                }
            }
        });
        (0..positions.len())
            .into_par_iter()
            .map(|i| {
                let mut f = [0.0, 0.0];
                for e in self.starts[i]..self.starts[i + 1] {
                    let p = if (self.neighbors[e] as usize) > i {
                        pair[e]
                    } else {
                        let q = pair[self.mirror[e] as usize];
                        [-q[0], -q[1]]
                    };
                    f[0] += p[0];
                    f[1] += p[1];
                }
                if let Some(cap) = cap {
                    let m = (f[0] * f[0] + f[1] * f[1]).sqrt();
                    if m > cap {
                        f = [f[0] * cap / m, f[1] * cap / m];
                    }
                }
                f
            })
            .collect()
    }
}
