//! Two-species Keller–Segel system reached in the diffusive limit:
//!
//! ```text
//! ∂t ρ_i = ∇·(D_i ∇ρ_i - χ_i[S] ρ_i),   δ ∂t S = ΔS - S + ρ1 + ρ2
//! D_i = ∫ v⊗v dv / (|V|² ψ_i),   χ_i[S] = -∫ v θ_i(v·∇S) dv / |V|
//! ```
//!
//! A step is implicit diffusion, explicit first-order upwinding of the drift
//! with `χ` evaluated on faces, then the chemoattractant update. The
//! diffusion solve is done in Fourier space with the symbol of the
//! three-point Laplacian, `k̃ = (2/h) sin(k h / 2)`: that operator is an
//! M-matrix, so the step keeps densities nonnegative, which the exact `|k|²`
//! symbol does not.

use nalgebra::DMatrix;

use crate::chemo::{ChemField, ChemSolver, Delta};
use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, SpatialGrid, VelocitySet};
use crate::kinetic::{max_abs, step_count};
use crate::tumbling::SpeciesParams;

/// Advective Courant number allowed by [`MacroSystem::step`].
pub const MACRO_CFL: f64 = 0.9;

/// `D = Σ w v⊗v / (|V|² ψ)`.
pub fn diffusion_coefficient(sp: &SpeciesParams, vs: &VelocitySet) -> DMatrix<f64> {
    vs.second_moment_tensor() / (vs.measure() * vs.measure() * sp.psi())
}

/// `χ = -Σ_k w_k v_k θ(v_k·∇S) / |V|`.
pub fn chemotactic_velocity(sp: &SpeciesParams, vs: &VelocitySet, grad_s: [f64; 2]) -> [f64; 2] {
    let dim = vs.dim();
    let theta: Vec<f64> = vs
        .nodes()
        .iter()
        .map(|v| sp.theta().eval(dot(dim, v, &grad_s)))
        .collect();
    let m = vs.odd_moment(&theta);
    [-m[0] / vs.measure(), -m[1] / vs.measure()]
}

/// Densities and chemoattractant of the limit system.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub rho: [Vec<f64>; 2],
    pub chem: ChemField,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct MacroSystem {
    grid: SpatialGrid,
    velocities: VelocitySet,
    species: [SpeciesParams; 2],
    delta: Delta,
    chem: ChemSolver,
    diffusion: [DMatrix<f64>; 2],
}

impl MacroSystem {
    pub fn new(grid: SpatialGrid, velocities: VelocitySet, species: [SpeciesParams; 2], delta: Delta) -> Result<Self> {
        if grid.dim() != velocities.dim() {
            return Err(invalid(
                "velocity.dim",
                format!("velocity set is {}D but the grid is {}D", velocities.dim(), grid.dim()),
            ));
        }
        let chem = ChemSolver::new(&grid);
        let diffusion = [
            diffusion_coefficient(&species[0], &velocities),
            diffusion_coefficient(&species[1], &velocities),
        ];
        Ok(Self {
            grid,
            velocities,
            species,
            delta,
            chem,
            diffusion,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn velocities(&self) -> &VelocitySet {
        &self.velocities
    }

    pub fn species(&self) -> &[SpeciesParams; 2] {
        &self.species
    }

    pub fn delta(&self) -> Delta {
        self.delta
    }

    pub fn diffusion(&self, species: usize) -> &DMatrix<f64> {
        &self.diffusion[species]
    }

    /// Smallest eigenvalue of `D_i`; the tensor is diagonal here.
    pub fn diffusion_min(&self, species: usize) -> f64 {
        let d = &self.diffusion[species];
        (0..d.nrows()).map(|a| d[(a, a)]).fold(f64::INFINITY, f64::min)
    }

    /// `S` starts from the Helmholtz solution for the initial densities.
    pub fn initial_state(&self, rho1: Vec<f64>, rho2: Vec<f64>) -> Result<MacroState> {
        let n = self.grid.num_cells();
        for (name, r) in [("rho1", &rho1), ("rho2", &rho2)] {
            if r.len() != n {
                return Err(Error::GridMismatch(format!("{name} has {} values, expected {n}", r.len())));
            }
            if r.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(invalid("init", format!("{name} must be finite and nonnegative")));
            }
        }
        let total: Vec<f64> = rho1.iter().zip(&rho2).map(|(a, b)| a + b).collect();
        let mut chem = self.chem.solve_elliptic(&total);
        chem.delta = self.delta;
        Ok(MacroState {
            rho: [rho1, rho2],
            chem,
            time: 0.0,
        })
    }

    /// Face values of `χ_i · e_axis` between cell `j` and its `+axis`
    /// neighbour, laid out `[axis][j]`.
    pub fn face_velocities(&self, species: usize, chem: &ChemField) -> Vec<Vec<f64>> {
        let dim = self.grid.dim();
        let sp = &self.species[species];
        (0..dim)
            .map(|axis| {
                (0..self.grid.num_cells())
                    .map(|j| {
                        let jn = self.grid.neighbor(j, axis, 1);
                        let a = chem.grad_at(j);
                        let b = chem.grad_at(jn);
                        let g = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                        chemotactic_velocity(sp, &self.velocities, g)[axis]
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest `dt` allowed by the advective CFL for the given face velocities.
    pub fn admissible_dt(&self, faces: &[Vec<f64>]) -> f64 {
        let rate: f64 = faces
            .iter()
            .enumerate()
            .map(|(a, c)| max_abs(c) / self.grid.spacing(a))
            .sum();
        if rate == 0.0 {
            f64::INFINITY
        } else {
            MACRO_CFL / rate
        }
    }

    /// Per-axis symbol `(2/h) sin(k h / 2)` of the centred difference.
    pub fn discrete_wavenumber(&self, index: usize) -> [f64; 2] {
        let k = self.chem.spectral().mode(index);
        let mut out = [0.0; 2];
        for a in 0..self.grid.dim() {
            let h = self.grid.spacing(a);
            out[a] = 2.0 / h * (0.5 * k[a] * h).sin();
        }
        out
    }

    fn diffuse(&self, rho: &[f64], species: usize, dt: f64) -> Vec<f64> {
        let d = &self.diffusion[species];
        let spectral = self.chem.spectral();
        let dim = self.grid.dim();
        spectral.apply(rho, |i| {
            let k = self.discrete_wavenumber(i);
            let mut kdk = 0.0;
            for a in 0..dim {
                for b in 0..dim {
                    kdk += k[a] * d[(a, b)] * k[b];
                }
            }
            (1.0 / (1.0 + dt * kdk)).into()
        })
    }

    fn drift(&self, rho: &mut [f64], faces: &[Vec<f64>], dt: f64) {
        for (axis, chi) in faces.iter().enumerate() {
            let h = self.grid.spacing(axis);
            let flux: Vec<f64> = (0..rho.len())
                .map(|j| {
                    let jn = self.grid.neighbor(j, axis, 1);
                    chi[j].max(0.0) * rho[j] + chi[j].min(0.0) * rho[jn]
                })
                .collect();
            let old = rho.to_vec();
            for j in 0..rho.len() {
                let jp = self.grid.neighbor(j, axis, -1);
                rho[j] = old[j] - dt / h * (flux[j] - flux[jp]);
            }
        }
    }

    pub fn step(&self, state: &MacroState, dt: f64) -> Result<MacroState> {
        self.step_with_faces(state, dt).map(|(s, _)| s)
    }

    fn step_with_faces(&self, state: &MacroState, dt: f64) -> Result<(MacroState, [f64; 2])> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let faces = [self.face_velocities(0, &state.chem), self.face_velocities(1, &state.chem)];
        let admissible = self.admissible_dt(&faces[0]).min(self.admissible_dt(&faces[1]));
        if dt > admissible {
            return Err(Error::Cfl { dt, admissible });
        }
        let mut rho = [Vec::new(), Vec::new()];
        for i in 0..2 {
            let mut r = self.diffuse(&state.rho[i], i, dt);
            self.drift(&mut r, &faces[i], dt);
            let floor = -1e-14 * max_abs(&r);
            if let Some(j) = r.iter().position(|x| !(*x >= floor)) {
                return Err(Error::Range(format!("density {} became negative at cell {j}: {}", i + 1, r[j])));
            }
            rho[i] = r;
        }
        let total: Vec<f64> = rho[0].iter().zip(&rho[1]).map(|(a, b)| a + b).collect();
        let chem = match self.delta {
            Delta::Elliptic => self.chem.solve_elliptic(&total),
            Delta::Parabolic => self.chem.step_parabolic(&state.chem, &total, dt)?,
        };
        let chi_max = [
            faces[0].iter().map(|c| max_abs(c)).fold(0.0, f64::max),
            faces[1].iter().map(|c| max_abs(c)).fold(0.0, f64::max),
        ];
        Ok((
            MacroState {
                rho,
                chem,
                time: state.time + dt,
            },
            chi_max,
        ))
    }

    fn sample(&self, state: &MacroState, chi_max: [f64; 2]) -> MacroSample {
        let h = self.grid.cell_volume();
        let sum = |r: &[f64], q: i32| -> f64 { r.iter().map(|x| x.powi(q)).sum::<f64>() * h };
        MacroSample {
            time: state.time,
            mass: [sum(&state.rho[0], 1), sum(&state.rho[1], 1)],
            linf: [max_abs(&state.rho[0]), max_abs(&state.rho[1])],
            lq_sum2: [sum(&state.rho[0], 2), sum(&state.rho[1], 2)],
            lq_sum4: [sum(&state.rho[0], 4), sum(&state.rho[1], 4)],
            chi_max,
            min_rho: state.rho.iter().flat_map(|r| r.iter()).copied().fold(f64::INFINITY, f64::min),
        }
    }

    /// Steps to `t_end` sampling every `stride` steps and at the end. The
    /// `chi_max` of a sample is the largest face `|χ|` used since the
    /// previous sample.
    pub fn run_with<C>(&self, initial: &MacroState, dt: f64, t_end: f64, stride: usize, mut on_sample: C) -> Result<MacroTrajectory>
    where
        C: FnMut(&MacroState, &MacroSample) -> Result<()>,
    {
        if !(t_end > initial.time) {
            return Err(invalid("t_end", format!("must exceed the initial time {}", initial.time)));
        }
        if !(dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let stride = stride.max(1);
        let steps = step_count(t_end - initial.time, dt);
        let mut state = initial.clone();
        let mut samples = Vec::new();
        let first = self.sample(&state, [0.0; 2]);
        on_sample(&state, &first)?;
        samples.push(first);
        let mut chi_window = [0.0f64; 2];
        for n in 1..=steps {
            let h = if n == steps { t_end - state.time } else { dt };
            let (next, chi) = self.step_with_faces(&state, h)?;
            state = next;
            if n == steps {
                state.time = t_end;
            }
            chi_window = [chi_window[0].max(chi[0]), chi_window[1].max(chi[1])];
            if n % stride == 0 || n == steps {
                let s = self.sample(&state, chi_window);
                on_sample(&state, &s)?;
                samples.push(s);
                chi_window = [0.0; 2];
            }
        }
        Ok(MacroTrajectory { samples, final_state: state })
    }

    pub fn run(&self, initial: &MacroState, dt: f64, t_end: f64, stride: usize) -> Result<MacroTrajectory> {
        self.run_with(initial, dt, t_end, stride, |_, _| Ok(()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroSample {
    pub time: f64,
    pub mass: [f64; 2],
    pub linf: [f64; 2],
    pub lq_sum2: [f64; 2],
    pub lq_sum4: [f64; 2],
    pub chi_max: [f64; 2],
    pub min_rho: f64,
}

impl MacroSample {
    pub const CSV_HEADER: &'static str = "time,mass1,mass2,linf1,linf2,l2_1,l2_2,l4_1,l4_2,chi_max1,chi_max2,min_rho";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.time,
            self.mass[0],
            self.mass[1],
            self.linf[0],
            self.linf[1],
            self.lq_sum2[0].sqrt(),
            self.lq_sum2[1].sqrt(),
            self.lq_sum4[0].powf(0.25),
            self.lq_sum4[1].powf(0.25),
            self.chi_max[0],
            self.chi_max[1],
            self.min_rho
        )
    }
}

#[derive(Debug, Clone)]
pub struct MacroTrajectory {
    pub samples: Vec<MacroSample>,
    pub final_state: MacroState,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tumbling::ResponseFunction;
    use std::f64::consts::PI;

    fn species(psi: f64, amp: f64) -> SpeciesParams {
        SpeciesParams::new(psi, ResponseFunction::tanh(amp, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn diffusion_coefficients() {
        let vs = VelocitySet::build(1, 1.0, 2).unwrap();
        let d = diffusion_coefficient(&species(1.0, 0.0), &vs);
        assert!((d[(0, 0)] - 0.125).abs() < 1e-15);
        let fine = VelocitySet::build(1, 1.0, 512).unwrap();
        let d = diffusion_coefficient(&species(1.0, 0.0), &fine);
        assert!((d[(0, 0)] - 1.0 / 6.0).abs() < 1e-5);
        let d2 = diffusion_coefficient(&species(2.0, 0.0), &fine);
        assert!((d2[(0, 0)] - 0.5 * d[(0, 0)]).abs() < 1e-15);
        let vs2 = VelocitySet::build(2, 1.0, 4).unwrap();
        let d = diffusion_coefficient(&species(1.0, 0.0), &vs2);
        assert_eq!(d[(0, 1)], 0.0);
        assert!(d[(0, 0)] > 0.0 && (d[(0, 0)] - d[(1, 1)]).abs() < 1e-15);
    }

    #[test]
    fn chemotactic_velocity_linear_regime() {
        let vs = VelocitySet::build(1, 1.0, 512).unwrap();
        let sp = SpeciesParams::new(1.0, ResponseFunction::clamped_linear(0.5, 1.0).unwrap()).unwrap();
        assert_eq!(chemotactic_velocity(&sp, &vs, [0.0, 0.0]), [0.0, 0.0]);
        let g = 0.1;
        let chi = chemotactic_velocity(&sp, &vs, [g, 0.0])[0];
        assert!((chi - g / 3.0).abs() < 1e-5, "{chi}");
    }

    #[test]
    fn single_mode_decays_by_implicit_factor() {
        let grid = SpatialGrid::line(2.0 * PI, 64).unwrap();
        let vs = VelocitySet::build(1, 1.0, 16).unwrap();
        let sp = species(1.0, 0.0);
        let sys = MacroSystem::new(grid.clone(), vs, [sp, sp], Delta::Elliptic).unwrap();
        let d = sys.diffusion(0)[(0, 0)];
        let (k, a, dt) = (3.0, 0.4, 0.01);
        let rho: Vec<f64> = grid.centers().iter().map(|x| 1.0 + a * (k * x[0]).cos()).collect();
        let mut st = sys.initial_state(rho.clone(), rho).unwrap();
        let h = grid.spacing(0);
        let kt = 2.0 / h * (0.5 * k * h).sin();
        let factor = 1.0 / (1.0 + d * kt * kt * dt);
        for n in 1..=10 {
            st = sys.step(&st, dt).unwrap();
            for (j, x) in grid.centers().iter().enumerate() {
                let exact = 1.0 + a * factor.powi(n) * (k * x[0]).cos();
                assert!((st.rho[0][j] - exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cfl_violation_reports_admissible_dt() {
        let grid = SpatialGrid::line(2.0 * PI, 32).unwrap();
        let vs = VelocitySet::build(1, 1.0, 16).unwrap();
        let sp = species(1.0, 0.9);
        let sys = MacroSystem::new(grid.clone(), vs, [sp, sp], Delta::Elliptic).unwrap();
        let rho: Vec<f64> = grid.centers().iter().map(|x| 1.0 + 50.0 * (-(x[0] - PI).powi(2) * 4.0).exp()).collect();
        let st = sys.initial_state(rho.clone(), rho).unwrap();
        match sys.step(&st, 1.0) {
            Err(Error::Cfl { dt, admissible }) => {
                assert_eq!(dt, 1.0);
                assert!(admissible < 1.0 && admissible > 0.0);
                assert!(sys.step(&st, admissible).is_ok());
            }
            other => panic!("expected a CFL error, got {other:?}"),
        }
    }

    #[test]
    fn mirror_symmetry_is_kept() {
        let grid = SpatialGrid::line(4.0, 64).unwrap();
        let vs = VelocitySet::build(1, 1.0, 16).unwrap();
        let sp = species(0.5, 0.5);
        let sys = MacroSystem::new(grid.clone(), vs, [sp, sp], Delta::Parabolic).unwrap();
        let rho: Vec<f64> = grid.centers().iter().map(|x| (-(x[0] - 2.0).powi(2) * 8.0).exp()).collect();
        let traj = sys.run(&sys.initial_state(rho.clone(), rho).unwrap(), 1e-3, 0.2, 50).unwrap();
        let r = &traj.final_state.rho[0];
        for j in 0..64 {
            assert!((r[j] - r[63 - j]).abs() < 1e-12);
        }
        let m0 = traj.samples[0].mass[0];
        assert!(traj.samples.iter().all(|s| (s.mass[0] - m0).abs() < 1e-12 * m0));
    }
}
