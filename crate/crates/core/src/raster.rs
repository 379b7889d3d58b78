//! Deposit blob ensembles onto regular grids and take discrete curls.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernel::{wrap_angle, Vec2};
use crate::state::FlowState;

/// Cell-centred grid; node `(i, j)` sits at
/// `(x1_min + (i + 1/2) dx1, x2_min + (j + 1/2) dx2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x1_min: f64,
    pub x2_min: f64,
    pub n1: usize,
    pub n2: usize,
    pub dx1: f64,
    pub dx2: f64,
}

impl GridSpec {
    /// Grid with `n1 x n2` cells covering `[x1_min, x1_max] x [x2_min, x2_max]`.
    pub fn covering(x1_min: f64, x1_max: f64, x2_min: f64, x2_max: f64, n1: usize, n2: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 || !(x1_max > x1_min) || !(x2_max > x2_min) {
            return Err(domain("grid needs positive extent and cell counts"));
        }
        if x2_max - x2_min > TAU * (1.0 + 1e-12) {
            return Err(domain("grid cannot extend beyond one period in x2"));
        }
        Ok(Self {
            x1_min,
            x2_min,
            n1,
            n2,
            dx1: (x1_max - x1_min) / n1 as f64,
            dx2: (x2_max - x2_min) / n2 as f64,
        })
    }

    pub fn cell_area(&self) -> f64 {
        self.dx1 * self.dx2
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Whether the grid wraps around the full circumference.
    pub fn is_periodic(&self) -> bool {
        ((self.n2 as f64) * self.dx2 - TAU).abs() <= 1e-12 * TAU
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x1_min + (i as f64 + 0.5) * self.dx1,
            self.x2_min + (j as f64 + 0.5) * self.dx2,
        )
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let mut v = Vec::with_capacity(self.len());
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                v.push(self.node(i, j));
            }
        }
        v
    }

    /// Offset of `x2` from the grid origin, taken in `[0, 2 pi)`.
    fn x2_offset(&self, x2: f64) -> f64 {
        wrap_angle(x2 - self.x2_min)
    }
}

/// Values at the nodes of a [`GridSpec`], row-major in `x1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }
}

#[inline]
fn bump(r2_over_c2: f64) -> f64 {
    let s = 1.0 - r2_over_c2;
    if s > 0.0 {
        s * s * s
    } else {
        0.0
    }
}

/// Deposit every blob with a compact radial bump `(1 - r^2/c^2)^3` of its
/// own core radius `c`, normalised on the grid so that each blob
/// contributes exactly its circulation to the discrete integral. A bump
/// that covers no node falls back to the nearest node.
pub fn rasterize(state: &FlowState, grid: &GridSpec) -> Result<ScalarField> {
    let mut field = ScalarField::zeros(*grid);
    let periodic = grid.is_periodic();
    let area = grid.cell_area();
    let x1_max = grid.x1_min + grid.n1 as f64 * grid.dx1;
    let x2_span = grid.n2 as f64 * grid.dx2;
    let mut stencil: Vec<(usize, f64)> = Vec::new();

    for (idx, b) in state.blobs.iter().enumerate() {
        let x1 = b.pos.x1();
        let off2 = grid.x2_offset(b.pos.x2());
        if !(x1 >= grid.x1_min && x1 <= x1_max) || (!periodic && off2 > x2_span) {
            return Err(Error::OutOfGrid { index: idx });
        }
        let c = b.core;
        let c2 = c * c;
        // node index coordinates of the blob center
        let fi = (x1 - grid.x1_min) / grid.dx1 - 0.5;
        let fj = off2 / grid.dx2 - 0.5;
        let ri = (c / grid.dx1).ceil() as i64 + 1;
        let rj = (c / grid.dx2).ceil() as i64 + 1;
        let (ci, cj) = (fi.round() as i64, fj.round() as i64);

        stencil.clear();
        let mut wsum = 0.0;
        for i in (ci - ri)..=(ci + ri) {
            if i < 0 || i >= grid.n1 as i64 {
                continue;
            }
            let dxa = (i as f64 - fi) * grid.dx1;
            for j in (cj - rj)..=(cj + rj) {
                let jj = if periodic {
                    j.rem_euclid(grid.n2 as i64)
                } else if j < 0 || j >= grid.n2 as i64 {
                    continue;
                } else {
                    j
                };
                let dxb = (j as f64 - fj) * grid.dx2;
                let w = bump((dxa * dxa + dxb * dxb) / c2);
                if w > 0.0 {
                    stencil.push((grid.index(i as usize, jj as usize), w));
                    wsum += w;
                }
            }
        }
        if wsum > 0.0 {
            let scale = b.gamma / (wsum * area);
            for &(k, w) in &stencil {
                field.values[k] += w * scale;
            }
        } else {
            let i = (ci.clamp(0, grid.n1 as i64 - 1)) as usize;
            let j = if periodic {
                cj.rem_euclid(grid.n2 as i64) as usize
            } else {
                cj.clamp(0, grid.n2 as i64 - 1) as usize
            };
            field.values[grid.index(i, j)] += b.gamma / area;
        }
    }
    Ok(field)
}

/// Central-difference curl `du2/dx1 - du1/dx2` of node velocities.
/// Nodes without both neighbours in a direction are left at zero and
/// flagged false in the returned mask.
pub fn discrete_curl(grid: &GridSpec, velocity: &[Vec2]) -> Result<(ScalarField, Vec<bool>)> {
    if velocity.len() != grid.len() {
        return Err(domain("velocity sample count does not match the grid"));
    }
    let periodic = grid.is_periodic();
    let mut field = ScalarField::zeros(*grid);
    let mut interior = vec![false; grid.len()];
    for i in 1..grid.n1.saturating_sub(1) {
        for j in 0..grid.n2 {
            let (jm, jp) = if periodic {
                ((j + grid.n2 - 1) % grid.n2, (j + 1) % grid.n2)
            } else if j == 0 || j + 1 == grid.n2 {
                continue;
            } else {
                (j - 1, j + 1)
            };
            let du2 = velocity[grid.index(i + 1, j)][1] - velocity[grid.index(i - 1, j)][1];
            let du1 = velocity[grid.index(i, jp)][0] - velocity[grid.index(i, jm)][0];
            let k = grid.index(i, j);
            field.values[k] = du2 / (2.0 * grid.dx1) - du1 / (2.0 * grid.dx2);
            interior[k] = true;
        }
    }
    Ok((field, interior))
}
