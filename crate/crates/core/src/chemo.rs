//! Chemoattractant `S` on the torus.
//!
//! `δ ∂t S - ΔS + S = ρ1 + ρ2` is diagonal in the discrete Fourier basis, so
//! the elliptic solve is exact on every resolved mode and the parabolic case
//! is advanced by a backward-Euler step per mode.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{dot, SpatialGrid, Velocity};
use crate::spectral::Spectral;

/// Elliptic (`δ = 0`) or parabolic (`δ = 1`) chemoattractant equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Delta {
    Elliptic,
    Parabolic,
}

impl TryFrom<u8> for Delta {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            0 => Ok(Delta::Elliptic),
            1 => Ok(Delta::Parabolic),
            _ => Err(format!("delta must be 0 or 1, got {v}")),
        }
    }
}

impl From<Delta> for u8 {
    fn from(d: Delta) -> u8 {
        match d {
            Delta::Elliptic => 0,
            Delta::Parabolic => 1,
        }
    }
}

/// Snapshot of `S`, `∇S` and `∂t S` at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemField {
    pub s: Vec<f64>,
    /// One component per spatial axis.
    pub grad_s: Vec<Vec<f64>>,
    pub dt_s: Vec<f64>,
    pub delta: Delta,
}

impl ChemField {
    pub fn zeros(grid: &SpatialGrid, delta: Delta) -> Self {
        let n = grid.num_cells();
        Self {
            s: vec![0.0; n],
            grad_s: vec![vec![0.0; n]; grid.dim()],
            dt_s: vec![0.0; n],
            delta,
        }
    }

    pub fn grad_at(&self, cell: usize) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (a, comp) in self.grad_s.iter().enumerate() {
            g[a] = comp[cell];
        }
        g
    }
}

/// Spectral solver for `S` on a fixed grid.
#[derive(Debug, Clone)]
pub struct ChemSolver {
    spectral: Spectral,
}

impl ChemSolver {
    pub fn new(grid: &SpatialGrid) -> Self {
        Self {
            spectral: Spectral::new(grid),
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    /// `Ŝ(k) = ρ̂(k) / (1 + |k|²)`. `∂t S` is left at zero; see
    /// [`ChemSolver::set_elliptic_time_derivative`].
    pub fn solve_elliptic(&self, rho_total: &[f64]) -> ChemField {
        let s = self.spectral.helmholtz_inverse(rho_total, 1.0, 1.0);
        let grad_s = self.spectral.gradient(&s);
        ChemField {
            dt_s: vec![0.0; s.len()],
            s,
            grad_s,
            delta: Delta::Elliptic,
        }
    }

    /// `∂t S = (1 - Δ)^{-1}(-∇·(J1 + J2))`, from `∂t ρ + ∇·J = 0`.
    pub fn set_elliptic_time_derivative(&self, field: &mut ChemField, flux_total: &[Vec<f64>]) {
        field.dt_s = self.spectral.helmholtz_of_negative_divergence(flux_total);
    }

    /// Backward-Euler step `Ŝ_new = (Ŝ_prev + dt ρ̂) / (1 + dt(1 + |k|²))`,
    /// with `∂t S = ΔS - S + ρ` evaluated from the new state.
    pub fn step_parabolic(&self, prev: &ChemField, rho_total: &[f64], dt: f64) -> Result<ChemField> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let rhs: Vec<f64> = prev.s.iter().zip(rho_total).map(|(s, r)| s + dt * r).collect();
        let s = self.spectral.helmholtz_inverse(&rhs, 1.0 + dt, dt);
        let grad_s = self.spectral.gradient(&s);
        let lap = self.spectral.laplacian(&s);
        let dt_s = lap
            .iter()
            .zip(&s)
            .zip(rho_total)
            .map(|((l, s), r)| l - s + r)
            .collect();
        Ok(ChemField {
            s,
            grad_s,
            dt_s,
            delta: Delta::Parabolic,
        })
    }
}

/// `ε ∂t S + v·∇S` at every cell.
pub fn tumble_argument(field: &ChemField, v: &Velocity, eps: f64) -> Vec<f64> {
    let dim = field.grad_s.len();
    (0..field.s.len())
        .map(|j| eps * field.dt_s[j] + dot(dim, v, &field.grad_at(j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn line(n: usize) -> (SpatialGrid, ChemSolver) {
        let g = SpatialGrid::line(2.0 * PI, n).unwrap();
        let c = ChemSolver::new(&g);
        (g, c)
    }

    #[test]
    fn constant_source_gives_constant_field() {
        let (_, c) = line(32);
        let f = c.solve_elliptic(&vec![1.7; 32]);
        for s in &f.s {
            assert!((s - 1.7).abs() < 1e-14);
        }
        for g in &f.grad_s[0] {
            assert!(g.abs() < 1e-14);
        }
    }

    #[test]
    fn single_mode_is_exact() {
        let (g, c) = line(64);
        let rho: Vec<f64> = g.centers().iter().map(|x| x[0].cos()).collect();
        let f = c.solve_elliptic(&rho);
        for (j, x) in g.centers().iter().enumerate() {
            assert!((f.s[j] - 0.5 * x[0].cos()).abs() < 1e-14);
            assert!((f.grad_s[0][j] + 0.5 * x[0].sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn elliptic_mean_matches_source_mean() {
        let (g, c) = line(16);
        let rho: Vec<f64> = (0..16).map(|j| ((j * 7) % 5) as f64).collect();
        let f = c.solve_elliptic(&rho);
        let ms = g.integrate(&f.s);
        let mr = g.integrate(&rho);
        assert!((ms - mr).abs() < 1e-12);
    }

    #[test]
    fn parabolic_constant_source_follows_scalar_recursion() {
        let (g, c) = line(16);
        let dt = 0.1;
        let mut f = ChemField::zeros(&g, Delta::Parabolic);
        for n in 1..=20 {
            f = c.step_parabolic(&f, &vec![2.0; 16], dt).unwrap();
            let exact = 2.0 * (1.0 - (1.0 + dt).powi(-n));
            assert!((f.s[3] - exact).abs() < 1e-13);
            // ∂t S = c - S at the new level
            assert!((f.dt_s[3] - (2.0 - exact)).abs() < 1e-13);
        }
        assert!(c.step_parabolic(&f, &vec![0.0; 16], 0.0).is_err());
    }

    #[test]
    fn parabolic_decay_without_source() {
        let (g, c) = line(32);
        let mut f = ChemField::zeros(&g, Delta::Parabolic);
        f.s = g.centers().iter().map(|x| 1.0 + (2.0 * x[0]).sin()).collect();
        let dt = 0.05;
        let l2 = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut prev = l2(&f.s);
        for _ in 0..10 {
            f = c.step_parabolic(&f, &vec![0.0; 32], dt).unwrap();
            let now = l2(&f.s);
            assert!(now <= prev / (1.0 + dt) + 1e-13);
            prev = now;
        }
    }

    #[test]
    fn tumble_argument_cases() {
        let (g, c) = line(32);
        let f = c.solve_elliptic(&vec![1.0; 32]);
        assert!(tumble_argument(&f, &[0.7, 0.0], 1.0).iter().all(|a| a.abs() < 1e-14));

        let mut f = ChemField::zeros(&g, Delta::Elliptic);
        f.s = g.centers().iter().map(|x| x[0].cos()).collect();
        f.grad_s = c.spectral().gradient(&f.s);
        let arg = tumble_argument(&f, &[1.0, 0.0], 0.0);
        for (j, x) in g.centers().iter().enumerate() {
            assert!((arg[j] + x[0].sin()).abs() < 1e-13);
        }
    }

    #[test]
    fn parabolic_equilibrium_has_zero_time_derivative() {
        let (g, c) = line(16);
        let mut f = ChemField::zeros(&g, Delta::Parabolic);
        f.s = vec![3.0; 16];
        let f = c.step_parabolic(&f, &vec![3.0; 16], 0.01).unwrap();
        assert!(tumble_argument(&f, &[0.5, 0.0], 1.0).iter().all(|a| a.abs() < 1e-14));
    }
}
