//! Norms, corrector comparison, ε-sweeps and a-priori bound checks.

use rayon::prelude::*;
use serde::Serialize;

use crate::chemo::Delta;
use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, SpatialGrid, VelocitySet};
use crate::kinetic::{KineticState, KineticSystem, KineticTrajectory, VelocityProfile};
use crate::macroscopic::{MacroSystem, MacroTrajectory};
use crate::tumbling::{ResponseKind, SpeciesParams};

/// Relative mass drift tolerated by the conservation checks.
pub const MASS_TOL: f64 = 1e-12;
/// Multiplicative slack on the `L^∞` envelope.
pub const LINF_SLACK: f64 = 1.05;
/// Multiplicative slack on the macroscopic `L^q` growth bound.
pub const MACRO_SLOPE_SLACK: f64 = 1.1;
/// Absolute slack on growth slopes, absorbing round-off in flat runs.
pub const SLOPE_FLOOR: f64 = 1e-9;

/// `(Σ measure |field|^q)^{1/q}`, or `max |field|` for `q = ∞`.
pub fn lq_norm(field: &[f64], q: f64, measure: f64) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(invalid("q", format!("must be at least 1, got {q}")));
    }
    if q.is_infinite() {
        return Ok(field.iter().fold(0.0, |m, x| m.max(x.abs())));
    }
    let s: f64 = field.iter().map(|x| x.abs().powf(q)).sum();
    Ok((measure * s).powf(1.0 / q))
}

/// `L¹` and `L²` distances between two densities on the same grid.
pub fn density_errors(grid_a: &SpatialGrid, a: &[f64], grid_b: &SpatialGrid, b: &[f64]) -> Result<(f64, f64)> {
    if grid_a != grid_b {
        return Err(Error::GridMismatch(format!("{grid_a:?} vs {grid_b:?}")));
    }
    if a.len() != grid_a.num_cells() || b.len() != grid_a.num_cells() {
        return Err(Error::GridMismatch("field length does not match the grid".into()));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let h = grid_a.cell_volume();
    Ok((lq_norm(&diff, 1.0, h)?, lq_norm(&diff, 2.0, h)?))
}

/// Relative `L²` distance between the measured fluctuation and the
/// first-order corrector.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorResidual {
    pub value: f64,
    pub warning: Option<String>,
}

/// The corrector `r⁰(v) = -v·∇ρ/(ψ|V|²) + (ρ/|V|)(Σ w θ(v'·∇S)/|V| - θ(v·∇S))`
/// laid out like a distribution.
pub fn corrector(system: &KineticSystem, state: &KineticState, species: usize) -> Vec<f64> {
    let vs = system.velocities();
    let sp = &system.species()[species];
    let dim = system.grid().dim();
    let nv = vs.len();
    let measure = vs.measure();
    let rho = &system.moments(state).rho[species];
    let grad_rho = system.chem_solver().spectral().gradient(rho);
    let mut out = vec![0.0; rho.len() * nv];
    let mut theta = vec![0.0; nv];
    for j in 0..rho.len() {
        let gs = state.chem.grad_at(j);
        let mut gr = [0.0; 2];
        for a in 0..dim {
            gr[a] = grad_rho[a][j];
        }
        for (k, v) in vs.nodes().iter().enumerate() {
            theta[k] = sp.theta().eval(dot(dim, v, &gs));
        }
        let mean_theta = vs.integrate(&theta) / measure;
        for (k, v) in vs.nodes().iter().enumerate() {
            out[j * nv + k] =
                -dot(dim, v, &gr) / (sp.psi() * measure * measure) + rho[j] / measure * (mean_theta - theta[k]);
        }
    }
    out
}

/// `‖r^ε - r⁰‖ / ‖r⁰‖` in the discrete `L²(Ω × V)` norm; `‖r^ε‖` when the
/// corrector vanishes. Non-smooth responses are computed with a warning.
pub fn corrector_residual(system: &KineticSystem, state: &KineticState, species: usize) -> CorrectorResidual {
    let r0 = corrector(system, state, species);
    let r = &system.moments(state).r[species];
    let diff: Vec<f64> = r.iter().zip(&r0).map(|(a, b)| a - b).collect();
    let num = system.phase_sum(&diff, 2).sqrt();
    let den = system.phase_sum(&r0, 2).sqrt();
    let value = if den > 0.0 { num / den } else { num };
    let warning = match system.species()[species].theta().kind() {
        ResponseKind::ClampedLinear => Some(
            "clamped-linear response is not smooth; the corrector expansion is formal here".to_string(),
        ),
        ResponseKind::Tanh => None,
    };
    CorrectorResidual { value, warning }
}

/// Least-squares slope of `log error` against `log ε`.
pub fn fit_order(eps: &[f64], errors: &[f64]) -> f64 {
    let n = eps.len() as f64;
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Everything shared by the kinetic runs of a sweep and the macro reference.
#[derive(Debug, Clone)]
pub struct SweepScenario {
    pub grid: SpatialGrid,
    pub velocities: VelocitySet,
    pub species: [SpeciesParams; 2],
    pub delta: Delta,
    pub dt: f64,
    pub t_end: f64,
    pub rho_init: [Vec<f64>; 2],
    pub profile: VelocityProfile,
}

/// Outcome of a sweep; per-ε entries follow `eps_values`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub eps_values: Vec<f64>,
    pub err_l1: Vec<[f64; 2]>,
    pub err_l2: Vec<[f64; 2]>,
    /// `(∫_0^T Σ h^d w r² dt)^{1/2}`
    pub r_l2: Vec<[f64; 2]>,
    pub corrector: Vec<[f64; 2]>,
    /// Per-species order of the `L¹` error over the three smallest ε.
    pub order: [f64; 2],
    /// Smaller of the two per-species orders.
    pub fitted_order: f64,
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    fitted_order: f64,
    fitted_order_rho1: f64,
    fitted_order_rho2: f64,
    eps_values: &'a [f64],
    r_l2_ratio: [f64; 2],
    corrector_residual_1: Vec<f64>,
    corrector_residual_2: Vec<f64>,
}

impl SweepReport {
    pub const CSV_HEADER: &'static str = "eps,err_l1_rho1,err_l1_rho2,err_l2_rho1,err_l2_rho2,r_l2_1,r_l2_2";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for (i, eps) in self.eps_values.iter().enumerate() {
            out.push_str(&format!(
                "{eps:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                self.err_l1[i][0], self.err_l1[i][1], self.err_l2[i][0], self.err_l2[i][1], self.r_l2[i][0], self.r_l2[i][1]
            ));
        }
        out
    }

    /// One-line JSON summary.
    pub fn summary_json(&self) -> String {
        let summary = SweepSummary {
            fitted_order: self.fitted_order,
            fitted_order_rho1: self.order[0],
            fitted_order_rho2: self.order[1],
            eps_values: &self.eps_values,
            r_l2_ratio: [self.r_l2_ratio(0), self.r_l2_ratio(1)],
            corrector_residual_1: self.corrector.iter().map(|c| c[0]).collect(),
            corrector_residual_2: self.corrector.iter().map(|c| c[1]).collect(),
        };
        serde_json::to_string(&summary).expect("summary serialises")
    }

    /// `max / min` of `r_l2` for one species across the sweep.
    pub fn r_l2_ratio(&self, species: usize) -> f64 {
        let v = self.r_l2.iter().map(|r| r[species]);
        let max = v.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = v.fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn errors_strictly_decreasing(&self, species: usize) -> bool {
        self.err_l1.windows(2).all(|w| w[1][species] < w[0][species])
    }

    pub fn corrector_decreasing(&self, species: usize) -> bool {
        self.corrector.windows(2).all(|w| w[1][species] < w[0][species])
    }
}

fn check_eps_list(eps_values: &[f64]) -> Result<()> {
    if eps_values.len() < 2 {
        return Err(invalid("eps", "a sweep needs at least two values".to_string()));
    }
    if eps_values.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return Err(invalid("eps", "every value must lie in (0, 1]".to_string()));
    }
    if eps_values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(invalid("eps", "values must be strictly decreasing".to_string()));
    }
    Ok(())
}

/// Runs the macro reference once and one kinetic run per ε, all to
/// `scenario.t_end`, and compares densities at the final time.
pub fn eps_sweep(scenario: &SweepScenario, eps_values: &[f64]) -> Result<SweepReport> {
    check_eps_list(eps_values)?;
    let n = scenario.grid.num_cells();
    if scenario.rho_init.iter().any(|r| r.len() != n) {
        return Err(Error::GridMismatch(format!("initial densities must have {n} cells")));
    }
    if scenario.velocities.dim() != scenario.grid.dim() {
        return Err(Error::GridMismatch("velocity set and grid dimensions differ".into()));
    }
    let macro_sys = MacroSystem::new(
        scenario.grid.clone(),
        scenario.velocities.clone(),
        scenario.species,
        scenario.delta,
    )?;
    let m0 = macro_sys.initial_state(scenario.rho_init[0].clone(), scenario.rho_init[1].clone())?;
    let reference = macro_sys.run(&m0, scenario.dt, scenario.t_end, usize::MAX)?.final_state;

    let profile = scenario.profile.values(&scenario.velocities);
    let runs: Vec<Result<([f64; 2], [f64; 2], [f64; 2], [f64; 2])>> = eps_values
        .par_iter()
        .map(|&eps| {
            let sys = KineticSystem::new(
                scenario.grid.clone(),
                scenario.velocities.clone(),
                scenario.species,
                scenario.delta,
                eps,
            )?;
            let f1 = sys.tensor_distribution(&scenario.rho_init[0], &profile);
            let f2 = sys.tensor_distribution(&scenario.rho_init[1], &profile);
            let init = sys.initial_state(f1, f2)?;
            let traj = sys.run(&init, scenario.dt, scenario.t_end, usize::MAX)?;
            let last = traj.samples.last().expect("run records a final sample");
            let rho = sys.moments(&traj.final_state).rho;
            let mut l1 = [0.0; 2];
            let mut l2 = [0.0; 2];
            let mut corr = [0.0; 2];
            for i in 0..2 {
                let (a, b) = density_errors(sys.grid(), &rho[i], macro_sys.grid(), &reference.rho[i])?;
                l1[i] = a;
                l2[i] = b;
                corr[i] = corrector_residual(&sys, &traj.final_state, i).value;
            }
            let r = [last.r_l2_integral[0].sqrt(), last.r_l2_integral[1].sqrt()];
            Ok((l1, l2, r, corr))
        })
        .collect();

    let mut report = SweepReport {
        eps_values: eps_values.to_vec(),
        err_l1: Vec::new(),
        err_l2: Vec::new(),
        r_l2: Vec::new(),
        corrector: Vec::new(),
        order: [f64::NAN; 2],
        fitted_order: f64::NAN,
    };
    for run in runs {
        let (l1, l2, r, c) = run?;
        report.err_l1.push(l1);
        report.err_l2.push(l2);
        report.r_l2.push(r);
        report.corrector.push(c);
    }
    let tail = eps_values.len().saturating_sub(3);
    for i in 0..2 {
        let errs: Vec<f64> = report.err_l1[tail..].iter().map(|e| e[i]).collect();
        report.order[i] = fit_order(&eps_values[tail..], &errs);
    }
    report.fitted_order = report.order[0].min(report.order[1]);
    Ok(report)
}

/// One row of a [`BoundReport`]: passes when `value ≤ limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn upper(name: String, value: f64, limit: f64) -> Self {
        let pass = value <= limit;
        Self { name, value, limit, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub const CSV_HEADER: &'static str = "check,value,limit,pass";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for c in &self.checks {
            out.push_str(&format!("{},{:.17e},{:.17e},{}\n", c.name, c.value, c.limit, c.pass));
        }
        out
    }
}

/// Smallest `c` with `(f + g)² (f^{q-1} - g^{q-1}) / (f - g) ≤ c (f^q + g^q)`
/// for all `f, g > 0`; by homogeneity a maximum over `t = g/f ∈ [0, 1]`.
pub fn lq_gronwall_constant(q: f64) -> f64 {
    let ratio = |t: f64| -> f64 {
        let quotient = if (1.0 - t).abs() < 1e-6 {
            (q - 1.0) * (1.0 + 0.5 * (q - 2.0) * (t - 1.0))
        } else {
            (1.0 - t.powf(q - 1.0)) / (1.0 - t)
        };
        (1.0 + t).powi(2) * quotient / (1.0 + t.powf(q))
    };
    let n = 2000;
    let (mut best_t, mut best) = (0.0, ratio(0.0));
    for i in 1..=n {
        let t = i as f64 / n as f64;
        let r = ratio(t);
        if r > best {
            best = r;
            best_t = t;
        }
    }
    let (mut a, mut b) = ((best_t - 1.0 / n as f64).max(0.0), (best_t + 1.0 / n as f64).min(1.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if ratio(c) > ratio(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(ratio(0.5 * (a + b)))
}

fn max_slope(times: &[f64], values: &[f64]) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for i in 1..times.len() {
        let dt = times[i] - times[i - 1];
        if dt > 0.0 {
            m = m.max((values[i] - values[i - 1]) / dt);
        }
    }
    m
}

fn mass_drift(masses: impl Iterator<Item = f64> + Clone) -> f64 {
    let m0 = masses.clone().next().unwrap_or(0.0);
    masses.map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0.abs().max(f64::MIN_POSITIVE)
}

/// Conservation, `L^∞` envelope, `L^q` growth and fluctuation checks on a
/// kinetic trajectory.
pub fn kinetic_bound_checks(system: &KineticSystem, traj: &KineticTrajectory) -> BoundReport {
    let s = &traj.samples;
    let times: Vec<f64> = s.iter().map(|x| x.time).collect();
    let measure = system.velocities().measure();
    let eps = system.eps();
    let mut checks = Vec::new();
    for i in 0..2 {
        let sp = &system.species()[i];
        let tag = i + 1;
        checks.push(BoundCheck::upper(
            format!("l1_drift_{tag}"),
            mass_drift(s.iter().map(|x| x.mass[i])),
            MASS_TOL,
        ));
        let rate = measure * sp.psi() * (1.0 + eps * sp.theta().amp());
        let linf0 = s[0].linf[i];
        let envelope = s
            .iter()
            .map(|x| x.linf[i] / (linf0 * (rate * (x.time - s[0].time)).exp()))
            .fold(0.0, f64::max);
        checks.push(BoundCheck::upper(format!("linf_envelope_{tag}"), envelope, LINF_SLACK));
        let amp = sp.theta().amp();
        for (q, sums) in [(2.0, s.iter().map(|x| x.lq_sum2[i]).collect::<Vec<_>>()), (4.0, s.iter().map(|x| x.lq_sum4[i]).collect())] {
            let logs: Vec<f64> = sums.iter().map(|x| x.ln()).collect();
            let limit = lq_gronwall_constant(q) * q / 2.0 * sp.psi() * measure * amp * amp;
            checks.push(BoundCheck::upper(
                format!("lq_slope_q{q}_{tag}"),
                max_slope(&times, &logs),
                limit + SLOPE_FLOOR,
            ));
        }
        let r = s.last().map(|x| x.r_l2_integral[i]).unwrap_or(0.0);
        let finite = if r.is_finite() { 0.0 } else { 1.0 };
        checks.push(BoundCheck::upper(format!("r_l2_finite_{tag}"), finite, 0.0));
    }
    BoundReport { checks }
}

/// Conservation and `L^q` growth checks on a macroscopic trajectory, with
/// `χ∞` the largest face velocity seen during the run.
pub fn macro_bound_checks(system: &MacroSystem, traj: &MacroTrajectory) -> BoundReport {
    let s = &traj.samples;
    let times: Vec<f64> = s.iter().map(|x| x.time).collect();
    let mut checks = Vec::new();
    for i in 0..2 {
        let tag = i + 1;
        checks.push(BoundCheck::upper(
            format!("l1_drift_{tag}"),
            mass_drift(s.iter().map(|x| x.mass[i])),
            MASS_TOL,
        ));
        let chi = s.iter().map(|x| x.chi_max[i]).fold(0.0, f64::max);
        let d_min = system.diffusion_min(i);
        for (q, sums) in [(2.0, s.iter().map(|x| x.lq_sum2[i]).collect::<Vec<_>>()), (4.0, s.iter().map(|x| x.lq_sum4[i]).collect())] {
            let logs: Vec<f64> = sums.iter().map(|x| x.ln() / q).collect();
            let limit = MACRO_SLOPE_SLACK * (q - 1.0) * chi * chi / (2.0 * d_min);
            checks.push(BoundCheck::upper(
                format!("lq_slope_q{q}_{tag}"),
                max_slope(&times, &logs),
                limit + SLOPE_FLOOR,
            ));
        }
    }
    BoundReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lq_norm_cases() {
        assert!((lq_norm(&[2.0; 8], 3.0, 1.0 / 8.0).unwrap() - 2.0).abs() < 1e-14);
        let half = [1.0, 1.0, 0.0, 0.0];
        assert!((lq_norm(&half, 1.0, 0.25).unwrap() - 0.5).abs() < 1e-15);
        assert!((lq_norm(&half, 2.0, 0.25).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(lq_norm(&[1.0, -3.0], f64::INFINITY, 1.0).unwrap(), 3.0);
        assert!(lq_norm(&half, 0.5, 1.0).is_err());
        assert!(lq_norm(&half, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn gronwall_constants() {
        assert!((lq_gronwall_constant(2.0) - 2.0).abs() < 1e-9);
        assert!((lq_gronwall_constant(4.0) - 6.0).abs() < 1e-9);
    }

    #[test]
    fn order_fit_recovers_power_law() {
        let eps = [0.4, 0.2, 0.1];
        let err: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(1.7)).collect();
        assert!((fit_order(&eps, &err) - 1.7).abs() < 1e-12);
    }

    #[test]
    fn eps_list_validation() {
        assert!(check_eps_list(&[0.5, 0.25]).is_ok());
        assert!(check_eps_list(&[0.25, 0.5]).is_err());
        assert!(check_eps_list(&[0.5, 0.5]).is_err());
        assert!(check_eps_list(&[1.5, 0.5]).is_err());
        assert!(check_eps_list(&[0.5]).is_err());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = SpatialGrid::line(1.0, 8).unwrap();
        let b = SpatialGrid::line(2.0, 8).unwrap();
        assert!(matches!(density_errors(&a, &[0.0; 8], &b, &[0.0; 8]), Err(Error::GridMismatch(_))));
        let (l1, l2) = density_errors(&a, &[1.0; 8], &a, &[0.5; 8]).unwrap();
        assert!((l1 - 0.5).abs() < 1e-15 && (l2 - 0.5).abs() < 1e-15);
    }
}
