use chemokin::chemo::Delta;
use chemokin::config::{parse_config, InitialData, RunConfig};
use chemokin::diagnostics::{corrector_residual, kinetic_bound_checks, macro_bound_checks};
use chemokin::geometry::{SpatialGrid, VelocitySet};
use chemokin::kinetic::{KineticState, KineticSystem};
use chemokin::macroscopic::MacroSystem;
use chemokin::tumbling::{ResponseFunction, SpeciesParams};

const KINETIC: &str = include_str!("../../../configs/standard_kinetic.json");
const SWEEP: &str = include_str!("../../../configs/standard_sweep.json");
const PARABOLIC: &str = include_str!("../../../configs/parabolic_2d.json");

fn start(cfg: &RunConfig, eps: f64) -> (KineticSystem, KineticState) {
    let sys = KineticSystem::new(cfg.grid.clone(), cfg.velocities.clone(), cfg.species, cfg.delta, eps).unwrap();
    let InitialData::Densities { rho, profile } = cfg.initial_data().unwrap() else {
        panic!("density initial data expected")
    };
    let g = profile.values(&cfg.velocities);
    let init = sys
        .initial_state(sys.tensor_distribution(&rho[0], &g), sys.tensor_distribution(&rho[1], &g))
        .unwrap();
    (sys, init)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

// One collision step contracts the deviation from ρF by 1/(1 + ψ|V|dt/ε²);
// with unit ψ that is about 1/2000 here, whatever transport did first.
#[test]
fn small_eps_step_projects_onto_equilibrium() {
    let cfg = parse_config(KINETIC).unwrap();
    let sp = SpeciesParams::new(1.0, ResponseFunction::tanh(0.5, 1.0).unwrap()).unwrap();
    let sys = KineticSystem::new(cfg.grid.clone(), cfg.velocities.clone(), [sp, sp], cfg.delta, 1e-3).unwrap();
    let InitialData::Densities { rho, .. } = cfg.initial_data().unwrap() else {
        unreachable!()
    };
    let init = sys
        .initial_state(sys.equilibrium_distribution(&rho[0]), sys.equilibrium_distribution(&rho[1]))
        .unwrap();
    let next = sys.step(&init, cfg.dt).unwrap();
    let m = sys.moments(&next);
    let big_f = cfg.velocities.equilibrium();
    let nv = cfg.velocities.len();
    for i in 0..2 {
        let dev: Vec<f64> = next.f[i].iter().enumerate().map(|(idx, x)| x - m.rho[i][idx / nv] * big_f).collect();
        let ratio = max_abs(&dev) / max_abs(&next.f[i]);
        assert!(ratio <= 1e-3, "species {i}: {ratio:e}");
        assert!(next.f[i].iter().all(|x| x.is_finite() && *x >= 0.0));
    }
}

#[test]
fn standard_kinetic_run_passes_every_bound() {
    let cfg = parse_config(KINETIC).unwrap();
    let (sys, init) = start(&cfg, 0.25);
    let traj = sys.run(&init, cfg.dt, cfg.t_end, cfg.output.snapshot_stride).unwrap();
    let report = kinetic_bound_checks(&sys, &traj);
    for c in &report.checks {
        assert!(c.pass, "{} = {} exceeds {}", c.name, c.value, c.limit);
    }
    assert_eq!(traj.samples.len(), 11);
    assert!((traj.final_state.time - 1.0).abs() < 1e-15);
}

#[test]
fn equilibrium_run_consumes_no_slack() {
    let grid = SpatialGrid::line(2.0, 32).unwrap();
    let vs = VelocitySet::build(1, 1.0, 8).unwrap();
    let sp = SpeciesParams::new(0.5, ResponseFunction::tanh(0.5, 1.0).unwrap()).unwrap();
    let sys = KineticSystem::new(grid, vs, [sp, sp], Delta::Elliptic, 0.5).unwrap();
    let f = sys.equilibrium_distribution(&[2.0; 32]);
    let init = sys.initial_state(f.clone(), f).unwrap();
    let traj = sys.run(&init, 1e-2, 0.5, 5).unwrap();
    let report = kinetic_bound_checks(&sys, &traj);
    assert!(report.all_pass());
    assert_eq!(report.get("l1_drift_1").unwrap().value, 0.0);
    assert_eq!(report.get("linf_envelope_1").unwrap().value, 1.0);
    assert!(report.get("lq_slope_q2_1").unwrap().value.abs() < 1e-12);
}

// Value frozen from the reference configuration with the response switched
// off. The expansion parameter ε k vmax / (ψ|V|) is about 0.65 on this grid,
// so the corrector agrees only to O(1) here.
#[test]
fn zero_response_corrector_regression() {
    let mut cfg = parse_config(SWEEP).unwrap();
    cfg.species = cfg.species.map(|s| SpeciesParams::new(s.psi(), ResponseFunction::zero()).unwrap());
    let (sys, init) = start(&cfg, 0.125);
    let traj = sys.run(&init, cfg.dt, cfg.t_end, usize::MAX).unwrap();
    let res = corrector_residual(&sys, &traj.final_state, 0);
    assert!(res.warning.is_none());
    assert!((res.value - 1.4061).abs() < 1e-3, "residual {}", res.value);
}

#[test]
fn well_prepared_uniform_state_has_zero_residual() {
    let grid = SpatialGrid::line(1.0, 16).unwrap();
    let vs = VelocitySet::build(1, 1.0, 8).unwrap();
    let sp = SpeciesParams::new(1.0, ResponseFunction::tanh(0.3, 1.0).unwrap()).unwrap();
    let sys = KineticSystem::new(grid, vs, [sp, sp], Delta::Elliptic, 0.5).unwrap();
    let f = sys.equilibrium_distribution(&[1.0; 16]);
    let st = sys.initial_state(f.clone(), f).unwrap();
    assert_eq!(corrector_residual(&sys, &st, 0).value, 0.0);
}

#[test]
fn parabolic_2d_configuration_runs_clean() {
    let cfg = parse_config(PARABOLIC).unwrap();
    assert_eq!(cfg.delta, Delta::Parabolic);
    let (sys, init) = start(&cfg, 0.2);
    let traj = sys.run(&init, cfg.dt, cfg.t_end, cfg.output.snapshot_stride).unwrap();
    let report = kinetic_bound_checks(&sys, &traj);
    assert!(report.get("l1_drift_1").unwrap().pass);
    assert!(report.get("l1_drift_2").unwrap().pass);
    assert!(traj.samples.iter().all(|s| s.min_f >= 0.0));
    assert!(corrector_residual(&sys, &traj.final_state, 1).warning.is_some());
}

fn macro_system(species: [SpeciesParams; 2]) -> MacroSystem {
    let grid = SpatialGrid::line(8.0, 128).unwrap();
    let vs = VelocitySet::build(1, 1.0, 16).unwrap();
    MacroSystem::new(grid, vs, species, Delta::Elliptic).unwrap()
}

fn bump(n: usize, h: f64) -> Vec<f64> {
    (0..n).map(|j| 0.2 + 3.0 * (-((j as f64 + 0.5) * h - 4.0).powi(2)).exp()).collect()
}

#[test]
fn identical_macro_species_stay_identical() {
    let sp = SpeciesParams::new(1.0, ResponseFunction::tanh(0.5, 0.2).unwrap()).unwrap();
    let sys = macro_system([sp, sp]);
    let rho = bump(128, 8.0 / 128.0);
    let init = sys.initial_state(rho.clone(), rho).unwrap();
    let traj = sys.run(&init, 1e-2, 1.0, 10).unwrap();
    let s = &traj.final_state;
    let d = s.rho[0].iter().zip(&s.rho[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(d <= 1e-14);
}

#[test]
fn macro_mass_is_conserved_over_a_thousand_steps() {
    let sp = [
        SpeciesParams::new(1.0, ResponseFunction::tanh(0.7, 0.1).unwrap()).unwrap(),
        SpeciesParams::new(0.5, ResponseFunction::clamped_linear(0.4, 0.3).unwrap()).unwrap(),
    ];
    let sys = macro_system(sp);
    let h = 8.0 / 128.0;
    let rho = bump(128, h);
    let init = sys.initial_state(rho.clone(), rho.iter().rev().copied().collect()).unwrap();
    let traj = sys.run(&init, 2e-3, 2.0, 100).unwrap();
    let report = macro_bound_checks(&sys, &traj);
    assert!(report.get("l1_drift_1").unwrap().pass);
    assert!(report.get("l1_drift_2").unwrap().pass);
    assert!(traj.samples.iter().all(|s| s.min_rho >= 0.0));
}

#[test]
fn uniform_macro_state_is_stationary() {
    let sp = SpeciesParams::new(1.0, ResponseFunction::tanh(0.5, 0.2).unwrap()).unwrap();
    let sys = macro_system([sp, sp]);
    let init = sys.initial_state(vec![1.5; 128], vec![0.5; 128]).unwrap();
    let traj = sys.run(&init, 1e-2, 1.0, 100).unwrap();
    for i in 0..2 {
        let d = traj.final_state.rho[i].iter().zip(&init.rho[i]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d <= 1e-13);
    }
}
