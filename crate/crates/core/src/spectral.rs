//! Discrete Fourier machinery on the periodic grid.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::geometry::SpatialGrid;

/// Forward/inverse transforms and torus wavenumbers `k = 2π m / L`.
#[derive(Clone)]
pub struct Spectral {
    grid: SpatialGrid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    wavenumbers: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

fn wavenumbers(n: usize, extent: f64) -> Vec<f64> {
    (0..n)
        .map(|m| {
            let m = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            2.0 * PI * m / extent
        })
        .collect()
}

impl Spectral {
    pub fn new(grid: &SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        let dim = grid.dim();
        let forward = (0..dim).map(|a| planner.plan_fft_forward(grid.cells()[a])).collect();
        let inverse = (0..dim).map(|a| planner.plan_fft_inverse(grid.cells()[a])).collect();
        let wavenumbers = (0..dim)
            .map(|a| wavenumbers(grid.cells()[a], grid.extent()[a]))
            .collect();
        Self {
            grid: grid.clone(),
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        if self.grid.dim() == 1 {
            plans[0].process(data);
            return;
        }
        let (n0, n1) = (self.grid.cells()[0], self.grid.cells()[1]);
        for row in data.chunks_exact_mut(n1) {
            plans[1].process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); n0];
        for j in 0..n1 {
            for i in 0..n0 {
                column[i] = data[i * n1 + j];
            }
            plans[0].process(&mut column);
            for i in 0..n0 {
                data[i * n1 + j] = column[i];
            }
        }
    }

    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform, normalised, keeping the real part.
    pub fn inverse(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spectrum, &self.inverse);
        let scale = 1.0 / self.grid.num_cells() as f64;
        spectrum.iter().map(|z| z.re * scale).collect()
    }

    /// Per-axis wavenumbers of a flat mode index.
    pub fn mode(&self, index: usize) -> [f64; 2] {
        let idx = self.grid.unravel(index);
        let mut k = [0.0; 2];
        for a in 0..self.grid.dim() {
            k[a] = self.wavenumbers[a][idx[a]];
        }
        k
    }

    /// Wavenumber used for first derivatives; zero on the Nyquist mode.
    fn derivative_wavenumber(&self, index: usize, axis: usize) -> f64 {
        let idx = self.grid.unravel(index);
        let n = self.grid.cells()[axis];
        if n % 2 == 0 && idx[axis] == n / 2 {
            0.0
        } else {
            self.wavenumbers[axis][idx[axis]]
        }
    }

    pub fn k_squared(&self, index: usize) -> f64 {
        let k = self.mode(index);
        k[0] * k[0] + k[1] * k[1]
    }

    /// Applies the Fourier multiplier `m(index)` to `field`.
    pub fn apply<M: Fn(usize) -> Complex64>(&self, field: &[f64], multiplier: M) -> Vec<f64> {
        let mut hat = self.forward(field);
        for (i, z) in hat.iter_mut().enumerate() {
            *z *= multiplier(i);
        }
        self.inverse(hat)
    }

    /// `(a + b|k|²)^{-1} u`.
    pub fn helmholtz_inverse(&self, field: &[f64], a: f64, b: f64) -> Vec<f64> {
        self.apply(field, |i| Complex64::new(1.0 / (a + b * self.k_squared(i)), 0.0))
    }

    pub fn gradient(&self, field: &[f64]) -> Vec<Vec<f64>> {
        let hat = self.forward(field);
        (0..self.grid.dim())
            .map(|axis| {
                let d: Vec<Complex64> = hat
                    .iter()
                    .enumerate()
                    .map(|(i, z)| z * Complex64::new(0.0, self.derivative_wavenumber(i, axis)))
                    .collect();
                self.inverse(d)
            })
            .collect()
    }

    pub fn laplacian(&self, field: &[f64]) -> Vec<f64> {
        self.apply(field, |i| Complex64::new(-self.k_squared(i), 0.0))
    }

    /// `(1 - Δ)^{-1} (-∇·J)`.
    pub fn helmholtz_of_negative_divergence(&self, flux: &[Vec<f64>]) -> Vec<f64> {
        let n = self.grid.num_cells();
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (axis, component) in flux.iter().enumerate() {
            let hat = self.forward(component);
            for (i, z) in hat.iter().enumerate() {
                acc[i] -= z * Complex64::new(0.0, self.derivative_wavenumber(i, axis));
            }
        }
        for (i, z) in acc.iter_mut().enumerate() {
            *z /= 1.0 + self.k_squared(i);
        }
        self.inverse(acc)
    }
}
