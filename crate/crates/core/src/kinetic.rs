//! Asymptotic-preserving integrator for the scaled two-species kinetic system
//!
//! ```text
//! ε² ∂t f_i + ε v·∇f_i = -T_i^ε[S](f_i),   δ ∂t S - ΔS + S = ρ1 + ρ2
//! ```
//!
//! One step is a Lie splitting: semi-Lagrangian transport by `v dt / ε`,
//! chemoattractant update, then a fully implicit collision solve with
//! `λ = dt/ε²`. Each stage maps nonnegative data to nonnegative data and
//! conserves the mass of each species.
//!
//! Distributions are stored space-major, velocity-minor: `f[j * N_v + k]`.

use rayon::prelude::*;

use crate::chemo::{ChemField, ChemSolver, Delta};
use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, SpatialGrid, VelocitySet};
use crate::tumbling::{check_eps, node_rates, solve_implicit, SpeciesParams};

/// Velocity dependence of initial data `f = ρ(x) g(v)`, normalised so that
/// `Σ_k w_k g_k = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum VelocityProfile {
    /// Well-prepared data, `g = F = 1/|V|`.
    #[default]
    Equilibrium,
    /// `g = (1 - β) F + β q` with `q ∝ |v|²`: even in `v` and off
    /// equilibrium for `β > 0`, so runs start with an initial layer.
    Quadratic { fraction: f64 },
}

impl VelocityProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            VelocityProfile::Quadratic { fraction } if !(0.0..=1.0).contains(fraction) => {
                Err(invalid("fraction", format!("must lie in [0, 1], got {fraction}")))
            }
            _ => Ok(()),
        }
    }

    pub fn values(&self, vs: &VelocitySet) -> Vec<f64> {
        let eq = vs.equilibrium();
        match self {
            VelocityProfile::Equilibrium => vec![eq; vs.len()],
            VelocityProfile::Quadratic { fraction } => {
                let dim = vs.dim();
                let q: Vec<f64> = vs.nodes().iter().map(|v| dot(dim, v, v)).collect();
                let total = vs.integrate(&q);
                q.iter().map(|x| (1.0 - fraction) * eq + fraction * x / total).collect()
            }
        }
    }
}

/// Fixed part of a kinetic simulation: grid, velocities, species and `ε`.
#[derive(Debug, Clone)]
pub struct KineticSystem {
    grid: SpatialGrid,
    velocities: VelocitySet,
    species: [SpeciesParams; 2],
    delta: Delta,
    eps: f64,
    chem: ChemSolver,
    transport: bool,
}

impl KineticSystem {
    pub fn new(
        grid: SpatialGrid,
        velocities: VelocitySet,
        species: [SpeciesParams; 2],
        delta: Delta,
        eps: f64,
    ) -> Result<Self> {
        check_eps(eps)?;
        if grid.dim() != velocities.dim() {
            return Err(invalid(
                "velocity.dim",
                format!("velocity set is {}D but the grid is {}D", velocities.dim(), grid.dim()),
            ));
        }
        let chem = ChemSolver::new(&grid);
        Ok(Self {
            grid,
            velocities,
            species,
            delta,
            eps,
            chem,
            transport: true,
        })
    }

    /// Disables the transport stage (space-homogeneous relaxation studies).
    pub fn without_transport(mut self) -> Self {
        self.transport = false;
        self
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

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn chem_solver(&self) -> &ChemSolver {
        &self.chem
    }

    fn field_len(&self) -> usize {
        self.grid.num_cells() * self.velocities.len()
    }

    /// `f = ρ(x) g(v)` for a velocity profile `g` with `Σ w g = 1`.
    pub fn tensor_distribution(&self, rho: &[f64], profile: &[f64]) -> Vec<f64> {
        let nv = self.velocities.len();
        let mut f = vec![0.0; self.field_len()];
        for (j, r) in rho.iter().enumerate() {
            for k in 0..nv {
                f[j * nv + k] = r * profile[k];
            }
        }
        f
    }

    /// Well-prepared data `f = ρ F`.
    pub fn equilibrium_distribution(&self, rho: &[f64]) -> Vec<f64> {
        let profile = vec![self.velocities.equilibrium(); self.velocities.len()];
        self.tensor_distribution(rho, &profile)
    }

    /// Builds the initial state. `S` starts from the Helmholtz solution for
    /// the initial densities; with `δ = 0`, `∂t S` comes from the initial
    /// flux, with `δ = 1` it starts at zero (the stationary profile).
    pub fn initial_state(&self, f1: Vec<f64>, f2: Vec<f64>) -> Result<KineticState> {
        for (name, f) in [("f1", &f1), ("f2", &f2)] {
            if f.len() != self.field_len() {
                return Err(Error::GridMismatch(format!(
                    "{name} has {} values, expected {}",
                    f.len(),
                    self.field_len()
                )));
            }
            if f.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(invalid("init", format!("{name} must be finite and nonnegative")));
            }
        }
        let mut state = KineticState {
            f: [f1, f2],
            chem: ChemField::zeros(&self.grid, self.delta),
            eps: self.eps,
            time: 0.0,
        };
        state.chem = self.elliptic_chem(&state.f);
        if self.delta == Delta::Parabolic {
            state.chem.delta = Delta::Parabolic;
            state.chem.dt_s.iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(state)
    }

    fn densities(&self, f: &[Vec<f64>; 2]) -> [Vec<f64>; 2] {
        let nv = self.velocities.len();
        let w = self.velocities.weights();
        let rho = |g: &Vec<f64>| -> Vec<f64> {
            g.chunks_exact(nv)
                .map(|c| c.iter().zip(w).map(|(x, w)| w * x).sum())
                .collect()
        };
        [rho(&f[0]), rho(&f[1])]
    }

    /// `J = (1/ε) Σ_k w_k v_k f_k`, per axis.
    fn flux(&self, f: &[f64]) -> Vec<Vec<f64>> {
        let nv = self.velocities.len();
        let dim = self.grid.dim();
        let mut flux = vec![vec![0.0; self.grid.num_cells()]; dim];
        for (j, cell) in f.chunks_exact(nv).enumerate() {
            let m = self.velocities.odd_moment(cell);
            for a in 0..dim {
                flux[a][j] = m[a] / self.eps;
            }
        }
        flux
    }

    fn elliptic_chem(&self, f: &[Vec<f64>; 2]) -> ChemField {
        let rho = self.densities(f);
        let total: Vec<f64> = rho[0].iter().zip(&rho[1]).map(|(a, b)| a + b).collect();
        let mut chem = self.chem.solve_elliptic(&total);
        let j1 = self.flux(&f[0]);
        let j2 = self.flux(&f[1]);
        let jt: Vec<Vec<f64>> = j1
            .iter()
            .zip(&j2)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        self.chem.set_elliptic_time_derivative(&mut chem, &jt);
        chem
    }

    // Conservative semi-Lagrangian shift of one velocity column along `axis`.
    fn shift_axis(&self, column: &[f64], out: &mut [f64], axis: usize, displacement: f64) {
        let s = displacement / self.grid.spacing(axis);
        let m = s.floor();
        let alpha = s - m;
        let m = m as isize;
        for (j, o) in out.iter_mut().enumerate() {
            let a = self.grid.neighbor(j, axis, -m);
            let b = self.grid.neighbor(j, axis, -m - 1);
            *o = (1.0 - alpha) * column[a] + alpha * column[b];
        }
    }

    fn transport(&self, f: &mut [f64], dt: f64) {
        let nv = self.velocities.len();
        let n = self.grid.num_cells();
        let dim = self.grid.dim();
        let columns: Vec<Vec<f64>> = (0..nv)
            .into_par_iter()
            .map(|k| {
                let v = self.velocities.node(k);
                let mut col: Vec<f64> = (0..n).map(|j| f[j * nv + k]).collect();
                let mut tmp = vec![0.0; n];
                for a in 0..dim {
                    if v[a] != 0.0 {
                        self.shift_axis(&col, &mut tmp, a, v[a] * dt / self.eps);
                        std::mem::swap(&mut col, &mut tmp);
                    }
                }
                col
            })
            .collect();
        for (k, col) in columns.iter().enumerate() {
            for (j, x) in col.iter().enumerate() {
                f[j * nv + k] = *x;
            }
        }
    }

    fn collide(&self, f: &mut [f64], sp: &SpeciesParams, chem: &ChemField, dt: f64) -> Result<()> {
        let nv = self.velocities.len();
        let dim = self.grid.dim();
        let lambda = dt / (self.eps * self.eps);
        f.par_chunks_mut(nv)
            .enumerate()
            .try_for_each(|(j, cell)| {
                let grad = chem.grad_at(j);
                let args: Vec<f64> = self
                    .velocities
                    .nodes()
                    .iter()
                    .map(|v| self.eps * chem.dt_s[j] + dot(dim, v, &grad))
                    .collect();
                let rates = node_rates(sp, self.eps, &args);
                let old = cell.to_vec();
                solve_implicit(&self.velocities, &rates, lambda, &old, cell)
                    .map_err(|reason| Error::LinearSolve { cell: j, reason })
            })
    }

    /// Advances `state` by `dt`: transport, chemoattractant, collision.
    pub fn step(&self, state: &KineticState, dt: f64) -> Result<KineticState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let mut f = state.f.clone();
        if self.transport {
            for g in f.iter_mut() {
                self.transport(g, dt);
            }
        }
        let chem = match self.delta {
            Delta::Elliptic => self.elliptic_chem(&f),
            Delta::Parabolic => {
                let rho = self.densities(&f);
                let total: Vec<f64> = rho[0].iter().zip(&rho[1]).map(|(a, b)| a + b).collect();
                self.chem.step_parabolic(&state.chem, &total, dt)?
            }
        };
        for (g, sp) in f.iter_mut().zip(&self.species) {
            self.collide(g, sp, &chem, dt)?;
            let floor = -1e-14 * max_abs(g);
            if let Some(j) = g.iter().position(|x| !(*x >= floor)) {
                return Err(Error::Range(format!(
                    "distribution became negative or non-finite at entry {j}: {}",
                    g[j]
                )));
            }
        }
        Ok(KineticState {
            f,
            chem,
            eps: self.eps,
            time: state.time + dt,
        })
    }

    /// `ρ_i`, `J_i` and `r_i = (f_i - ρ_i F)/ε`.
    pub fn moments(&self, state: &KineticState) -> Moments {
        let rho = self.densities(&state.f);
        let flux = [self.flux(&state.f[0]), self.flux(&state.f[1])];
        let nv = self.velocities.len();
        let big_f = self.velocities.equilibrium();
        let fluct = |i: usize| -> Vec<f64> {
            state.f[i]
                .iter()
                .enumerate()
                .map(|(idx, x)| (x - rho[i][idx / nv] * big_f) / self.eps)
                .collect()
        };
        let r = [fluct(0), fluct(1)];
        Moments { rho, flux, r }
    }

    /// `Σ_{j,k} h^d w_k g^q`, summed in storage order.
    pub fn phase_sum(&self, g: &[f64], q: i32) -> f64 {
        let nv = self.velocities.len();
        let w = self.velocities.weights();
        let s: f64 = g.iter().enumerate().map(|(i, x)| w[i % nv] * x.powi(q)).sum();
        s * self.grid.cell_volume()
    }

    fn sample(&self, state: &KineticState, r_l2_integral: [f64; 2]) -> KineticSample {
        let linf = [max_abs(&state.f[0]), max_abs(&state.f[1])];
        let min_f = state.f.iter().flat_map(|g| g.iter()).copied().fold(f64::INFINITY, f64::min);
        KineticSample {
            time: state.time,
            mass: [self.phase_sum(&state.f[0], 1), self.phase_sum(&state.f[1], 1)],
            linf,
            lq_sum2: [self.phase_sum(&state.f[0], 2), self.phase_sum(&state.f[1], 2)],
            lq_sum4: [self.phase_sum(&state.f[0], 4), self.phase_sum(&state.f[1], 4)],
            r_l2_integral,
            min_f,
        }
    }

    /// Steps from `initial` to `t_end`, sampling every `stride` steps and at
    /// the end. `on_sample` sees each sampled state.
    pub fn run_with<C>(&self, initial: &KineticState, dt: f64, t_end: f64, stride: usize, mut on_sample: C) -> Result<KineticTrajectory>
    where
        C: FnMut(&KineticState, &KineticSample) -> Result<()>,
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
        let mut r_acc = [0.0; 2];
        let mut samples = Vec::new();
        let first = self.sample(&state, r_acc);
        on_sample(&state, &first)?;
        samples.push(first);
        let nv = self.velocities.len();
        let big_f = self.velocities.equilibrium();
        let w = self.velocities.weights();
        let cellvol = self.grid.cell_volume();
        for n in 1..=steps {
            let h = if n == steps { t_end - state.time } else { dt };
            state = self.step(&state, h)?;
            if n == steps {
                state.time = t_end;
            }
            let rho = self.densities(&state.f);
            for i in 0..2 {
                let mut acc = 0.0;
                for (idx, x) in state.f[i].iter().enumerate() {
                    let r = (x - rho[i][idx / nv] * big_f) / self.eps;
                    acc += w[idx % nv] * r * r;
                }
                r_acc[i] += h * acc * cellvol;
            }
            if n % stride == 0 || n == steps {
                let s = self.sample(&state, r_acc);
                on_sample(&state, &s)?;
                samples.push(s);
            }
        }
        Ok(KineticTrajectory { samples, final_state: state })
    }

    pub fn run(&self, initial: &KineticState, dt: f64, t_end: f64, stride: usize) -> Result<KineticTrajectory> {
        self.run_with(initial, dt, t_end, stride, |_, _| Ok(()))
    }
}

/// Number of steps of size `dt` (the last one possibly shorter) covering `span`.
pub fn step_count(span: f64, dt: f64) -> usize {
    let n = span / dt;
    let rounded = n.round();
    if (n - rounded).abs() <= 1e-9 * n.max(1.0) {
        (rounded as usize).max(1)
    } else {
        n.ceil() as usize
    }
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Distributions of both species plus the chemoattractant at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub f: [Vec<f64>; 2],
    pub chem: ChemField,
    pub eps: f64,
    pub time: f64,
}

/// Velocity moments of a [`KineticState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub rho: [Vec<f64>; 2],
    /// `flux[i][axis][cell]`
    pub flux: [Vec<Vec<f64>>; 2],
    pub r: [Vec<f64>; 2],
}

/// Scalar observables recorded along a kinetic run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticSample {
    pub time: f64,
    pub mass: [f64; 2],
    pub linf: [f64; 2],
    /// `Σ h^d w f^2`
    pub lq_sum2: [f64; 2],
    /// `Σ h^d w f^4`
    pub lq_sum4: [f64; 2],
    /// `∫_0^t Σ h^d w r^2 ds` so far
    pub r_l2_integral: [f64; 2],
    pub min_f: f64,
}

impl KineticSample {
    pub const CSV_HEADER: &'static str =
        "time,mass1,mass2,linf1,linf2,l2_1,l2_2,l4_1,l4_2,r_l2_int1,r_l2_int2,min_f";

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
            self.r_l2_integral[0],
            self.r_l2_integral[1],
            self.min_f
        )
    }
}

#[derive(Debug, Clone)]
pub struct KineticTrajectory {
    pub samples: Vec<KineticSample>,
    pub final_state: KineticState,
}
