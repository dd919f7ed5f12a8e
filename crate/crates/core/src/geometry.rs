//! Periodic spatial grid and the discrete velocity set.
//!
//! Fields on the grid are stored row-major with axis 0 outermost, so a 2D
//! cell `(i0, i1)` lives at `i0 * cells[1] + i1`. Velocity nodes carry two
//! components; only the first `dim` are meaningful.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// A velocity vector. In one dimension the second component is zero.
pub type Velocity = [f64; 2];

/// Euclidean dot product restricted to the first `dim` components.
#[inline]
pub fn dot(dim: usize, a: &[f64; 2], b: &[f64; 2]) -> f64 {
    if dim == 1 {
        a[0] * b[0]
    } else {
        a[0] * b[0] + a[1] * b[1]
    }
}

/// Uniform cell-centred grid on the torus `[0, L_0) x [0, L_1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    extent: Vec<f64>,
    cells: Vec<usize>,
}

impl SpatialGrid {
    pub fn new(dim: usize, extent: &[f64], cells: &[usize]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid("dim", format!("must be 1 or 2, got {dim}")));
        }
        if extent.len() != dim || cells.len() != dim {
            return Err(invalid(
                "extent/cells",
                format!("expected {dim} entries per axis"),
            ));
        }
        if let Some(l) = extent.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(invalid("extent", format!("must be positive, got {l}")));
        }
        if let Some(n) = cells.iter().find(|n| **n < 4) {
            return Err(invalid("cells", format!("need at least 4 per axis, got {n}")));
        }
        Ok(Self {
            dim,
            extent: extent.to_vec(),
            cells: cells.to_vec(),
        })
    }

    /// One-dimensional torus of length `extent` with `cells` cells.
    pub fn line(extent: f64, cells: usize) -> Result<Self> {
        Self::new(1, &[extent], &[cells])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.extent[axis] / self.cells[axis] as f64
    }

    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Per-axis indices of a flat cell index.
    pub fn unravel(&self, index: usize) -> [usize; 2] {
        if self.dim == 1 {
            [index, 0]
        } else {
            [index / self.cells[1], index % self.cells[1]]
        }
    }

    pub fn ravel(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.cells[1] + idx[1]
        }
    }

    /// Periodic wrap of a signed per-axis index.
    #[inline]
    pub fn wrap(&self, axis: usize, i: isize) -> usize {
        i.rem_euclid(self.cells[axis] as isize) as usize
    }

    /// Flat index of the neighbour `offset` cells away along `axis`.
    pub fn neighbor(&self, index: usize, axis: usize, offset: isize) -> usize {
        let mut idx = self.unravel(index);
        idx[axis] = self.wrap(axis, idx[axis] as isize + offset);
        self.ravel(idx)
    }

    /// Cell centre `x_j = (j + 1/2) h` per axis.
    pub fn center(&self, index: usize) -> [f64; 2] {
        let idx = self.unravel(index);
        let mut x = [0.0; 2];
        for a in 0..self.dim {
            x[a] = (idx[a] as f64 + 0.5) * self.spacing(a);
        }
        x
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        (0..self.num_cells()).map(|j| self.center(j)).collect()
    }

    /// `sum_j h^d u_j`, summed in index order.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().sum::<f64>() * self.cell_volume()
    }
}

/// Midpoint quadrature of the velocity cube `[-vmax, vmax]^dim`.
///
/// Node `k` and node `N - 1 - k` are exact mirrors (`v' = -v`) with equal
/// weights, which makes every odd moment vanish when summed pairwise.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySet {
    dim: usize,
    nodes: Vec<Velocity>,
    weights: Vec<f64>,
    measure: f64,
    vmax: f64,
}

fn axis_nodes(vmax: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * vmax / n as f64;
    let mut c = vec![0.0; n];
    for i in 0..n / 2 {
        c[i] = -vmax + (i as f64 + 0.5) * h;
        c[n - 1 - i] = -c[i];
    }
    c
}

impl VelocitySet {
    pub fn build(dim: usize, vmax: f64, nodes_per_axis: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(invalid("dim", format!("must be 1 or 2, got {dim}")));
        }
        if !(vmax.is_finite() && vmax > 0.0) {
            return Err(invalid("vmax", format!("must be positive, got {vmax}")));
        }
        if nodes_per_axis < 2 || nodes_per_axis % 2 != 0 {
            return Err(invalid(
                "nodes_per_axis",
                format!("must be even and >= 2, got {nodes_per_axis}"),
            ));
        }
        let c = axis_nodes(vmax, nodes_per_axis);
        let measure = (2.0 * vmax).powi(dim as i32);
        let nodes: Vec<Velocity> = if dim == 1 {
            c.iter().map(|&x| [x, 0.0]).collect()
        } else {
            c.iter()
                .flat_map(|&a| c.iter().map(move |&b| [a, b]))
                .collect()
        };
        let w = measure / nodes.len() as f64;
        Ok(Self {
            dim,
            weights: vec![w; nodes.len()],
            nodes,
            measure,
            vmax,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Velocity] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &Velocity {
        &self.nodes[k]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `|V|`.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    /// Index of the mirrored node `-v_k`.
    pub fn mirror(&self, k: usize) -> usize {
        self.nodes.len() - 1 - k
    }

    /// Value of the uniform equilibrium `F = 1/|V|`.
    pub fn equilibrium(&self) -> f64 {
        1.0 / self.measure
    }

    /// `sum_k w_k v_k g_k` accumulated over mirrored pairs.
    pub fn odd_moment(&self, g: &[f64]) -> [f64; 2] {
        let n = self.nodes.len();
        let mut acc = [0.0; 2];
        for k in 0..n / 2 {
            let m = n - 1 - k;
            for a in 0..self.dim {
                acc[a] += self.weights[k] * self.nodes[k][a] * g[k]
                    + self.weights[m] * self.nodes[m][a] * g[m];
            }
        }
        acc
    }

    /// `sum_k w_k v_k F`; zero in exact arithmetic and in floating point.
    pub fn first_moment(&self) -> [f64; 2] {
        let f = vec![self.equilibrium(); self.len()];
        self.odd_moment(&f)
    }

    /// `sum_k w_k v_k (x) v_k`.
    pub fn second_moment_tensor(&self) -> DMatrix<f64> {
        let d = self.dim;
        let mut m = DMatrix::zeros(d, d);
        for (v, w) in self.nodes.iter().zip(&self.weights) {
            for a in 0..d {
                for b in 0..d {
                    m[(a, b)] += w * v[a] * v[b];
                }
            }
        }
        m
    }

    /// Velocity average `sum_k w_k g_k`.
    pub fn integrate(&self, g: &[f64]) -> f64 {
        g.iter().zip(&self.weights).map(|(x, w)| w * x).sum()
    }
}
