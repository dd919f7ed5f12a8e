//! JSON run configuration with a strict schema.
//!
//! ```json
//! {
//!   "solver": "kinetic",
//!   "grid": { "extent": [2.0], "cells": [256] },
//!   "velocity": { "vmax": 1.0, "nodes_per_axis": 16 },
//!   "species": [
//!     { "psi": 0.15, "theta": { "kind": "tanh", "amp": 0.5, "sigma": 1.0 } },
//!     { "psi": 0.17, "theta": { "kind": "tanh", "amp": 0.5, "sigma": 1.0 } }
//!   ],
//!   "delta": 0,
//!   "eps": 0.25,
//!   "dt": 5e-4,
//!   "t_end": 0.5,
//!   "init": { "kind": "gaussian-bump", "center": [1.0], "width": 0.3, "mass": [1.0, 0.5] },
//!   "output": { "directory": "out", "snapshot_stride": 10 }
//! }
//! ```
//!
//! Only `solver`, `grid`, `dt` and `t_end` are always required; `eps` is
//! required by the kinetic and sweep solvers. Errors carry a JSON pointer to
//! the offending key.

use std::path::PathBuf;

use serde::Deserialize;

use crate::chemo::Delta;
use crate::error::{Error, Result};
use crate::geometry::{SpatialGrid, VelocitySet};
use crate::io::read_snapshot;
use crate::kinetic::VelocityProfile;
use crate::tumbling::{ResponseFunction, ResponseKind, SpeciesParams};

pub const DEFAULT_NODES_PER_AXIS: usize = 16;
pub const DEFAULT_SNAPSHOT_STRIDE: usize = 10;
pub const DEFAULT_OUTPUT_DIR: &str = "chemokin-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Kinetic,
    Macro,
    Sweep,
    Kernels,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(default)]
    dim: Option<usize>,
    extent: Vec<f64>,
    cells: Vec<usize>,
}

fn default_vmax() -> f64 {
    1.0
}

fn default_nodes() -> usize {
    DEFAULT_NODES_PER_AXIS
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVelocity {
    #[serde(default = "default_vmax")]
    vmax: f64,
    #[serde(default = "default_nodes")]
    nodes_per_axis: usize,
}

impl Default for RawVelocity {
    fn default() -> Self {
        Self {
            vmax: default_vmax(),
            nodes_per_axis: default_nodes(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTheta {
    kind: ResponseKind,
    amp: f64,
    sigma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpecies {
    psi: f64,
    #[serde(default)]
    theta: Option<RawTheta>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawEps {
    Single(f64),
    List(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PerSpecies {
    Same(f64),
    Each([f64; 2]),
}

impl PerSpecies {
    fn get(&self) -> [f64; 2] {
        match self {
            PerSpecies::Same(x) => [*x, *x],
            PerSpecies::Each(x) => *x,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum RawInit {
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        mass: PerSpecies,
        #[serde(default)]
        profile: VelocityProfile,
    },
    Uniform {
        level: PerSpecies,
        #[serde(default)]
        profile: VelocityProfile,
    },
    File {
        path: PathBuf,
    },
}

fn default_stride() -> usize {
    DEFAULT_SNAPSHOT_STRIDE
}

fn default_dir() -> PathBuf {
    PathBuf::from(DEFAULT_OUTPUT_DIR)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    #[serde(default = "default_dir")]
    directory: PathBuf,
    #[serde(default = "default_stride")]
    snapshot_stride: usize,
}

impl Default for RawOutput {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            snapshot_stride: default_stride(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    solver: Solver,
    grid: RawGrid,
    #[serde(default)]
    velocity: RawVelocity,
    #[serde(default)]
    species: Option<Vec<RawSpecies>>,
    #[serde(default = "default_delta")]
    delta: Delta,
    #[serde(default)]
    eps: Option<RawEps>,
    dt: f64,
    t_end: f64,
    #[serde(default)]
    init: Option<RawInit>,
    #[serde(default)]
    output: RawOutput,
}

fn default_delta() -> Delta {
    Delta::Elliptic
}

/// `ε` as configured: one value for a run, a list for a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum EpsSpec {
    Single(f64),
    List(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    GaussianBump {
        center: [f64; 2],
        width: f64,
        mass: [f64; 2],
        profile: VelocityProfile,
    },
    Uniform {
        level: [f64; 2],
        profile: VelocityProfile,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub directory: PathBuf,
    pub snapshot_stride: usize,
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub solver: Solver,
    pub grid: SpatialGrid,
    pub velocities: VelocitySet,
    pub species: [SpeciesParams; 2],
    pub delta: Delta,
    pub eps: Option<EpsSpec>,
    pub dt: f64,
    pub t_end: f64,
    pub init: InitSpec,
    pub output: OutputSpec,
}

fn cfg(pointer: &str, message: impl Into<String>) -> Error {
    Error::Config {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

fn to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => {}
        }
    }
    out
}

fn positive(pointer: &str, x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(cfg(pointer, format!("must be a positive finite number, got {x}")))
    }
}

fn build_species(pointer: &str, raw: &RawSpecies) -> Result<SpeciesParams> {
    let theta = match &raw.theta {
        None => ResponseFunction::zero(),
        Some(t) => {
            if !(t.amp < 1.0) {
                return Err(cfg(
                    &format!("{pointer}/theta/amp"),
                    format!(
                        "(H1) violated: the response must satisfy ‖θ‖_∞ < 1, got amp = {}",
                        t.amp
                    ),
                ));
            }
            ResponseFunction::new(t.kind, t.amp, t.sigma).map_err(|e| cfg(&format!("{pointer}/theta"), e.to_string()))?
        }
    };
    SpeciesParams::new(raw.psi, theta).map_err(|e| cfg(&format!("{pointer}/psi"), e.to_string()))
}

fn check_eps_value(pointer: &str, eps: f64, solver: Solver) -> Result<()> {
    if eps == 0.0 && solver == Solver::Kinetic {
        return Err(cfg(
            pointer,
            "eps = 0 is the diffusive limit itself; use solver = \"macro\" for it",
        ));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(cfg(pointer, format!("must lie in (0, 1], got {eps}")));
    }
    Ok(())
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = to_pointer(e.path());
        cfg(&pointer, e.inner().to_string())
    })?;

    let dim = raw.grid.dim.unwrap_or(raw.grid.extent.len());
    let grid = SpatialGrid::new(dim, &raw.grid.extent, &raw.grid.cells).map_err(|e| cfg("/grid", e.to_string()))?;
    let velocities = VelocitySet::build(dim, raw.velocity.vmax, raw.velocity.nodes_per_axis)
        .map_err(|e| cfg("/velocity", e.to_string()))?;

    let species = match &raw.species {
        None => {
            let sp = SpeciesParams::new(1.0, ResponseFunction::zero())?;
            [sp, sp]
        }
        Some(list) => {
            if list.len() != 2 {
                return Err(cfg("/species", format!("expected exactly 2 species, got {}", list.len())));
            }
            [build_species("/species/0", &list[0])?, build_species("/species/1", &list[1])?]
        }
    };

    let eps = match raw.eps {
        None => {
            if matches!(raw.solver, Solver::Kinetic | Solver::Sweep) {
                return Err(cfg("/eps", "required by this solver"));
            }
            None
        }
        Some(RawEps::Single(e)) => {
            check_eps_value("/eps", e, raw.solver)?;
            Some(EpsSpec::Single(e))
        }
        Some(RawEps::List(list)) => {
            if raw.solver == Solver::Kinetic {
                return Err(cfg("/eps", "the kinetic solver takes a single value; use solver = \"sweep\" for a list"));
            }
            for (i, e) in list.iter().enumerate() {
                check_eps_value(&format!("/eps/{i}"), *e, raw.solver)?;
            }
            if list.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(cfg("/eps", "values must be strictly decreasing"));
            }
            Some(EpsSpec::List(list))
        }
    };
    if raw.solver == Solver::Sweep {
        match &eps {
            Some(EpsSpec::List(l)) if l.len() >= 2 => {}
            _ => return Err(cfg("/eps", "a sweep needs a list of at least two values")),
        }
    }

    let dt = positive("/dt", raw.dt)?;
    let t_end = positive("/t_end", raw.t_end)?;

    let init = match raw.init {
        None => InitSpec::Uniform {
            level: [1.0, 1.0],
            profile: VelocityProfile::Equilibrium,
        },
        Some(RawInit::GaussianBump {
            center,
            width,
            mass,
            profile,
        }) => {
            if center.len() != dim {
                return Err(cfg("/init/center", format!("expected {dim} coordinates")));
            }
            let mut c = [0.0; 2];
            c[..dim].copy_from_slice(&center);
            let mass = mass.get();
            for (i, m) in mass.iter().enumerate() {
                if !(*m >= 0.0 && m.is_finite()) {
                    return Err(cfg(&format!("/init/mass/{i}"), "must be finite and nonnegative"));
                }
            }
            profile.validate().map_err(|e| cfg("/init/profile", e.to_string()))?;
            InitSpec::GaussianBump {
                center: c,
                width: positive("/init/width", width)?,
                mass,
                profile,
            }
        }
        Some(RawInit::Uniform { level, profile }) => {
            let level = level.get();
            if level.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                return Err(cfg("/init/level", "must be finite and nonnegative"));
            }
            profile.validate().map_err(|e| cfg("/init/profile", e.to_string()))?;
            InitSpec::Uniform { level, profile }
        }
        Some(RawInit::File { path }) => InitSpec::File { path },
    };

    if raw.output.snapshot_stride == 0 {
        return Err(cfg("/output/snapshot_stride", "must be at least 1"));
    }

    Ok(RunConfig {
        solver: raw.solver,
        grid,
        velocities,
        species,
        delta: raw.delta,
        eps,
        dt,
        t_end,
        init,
        output: OutputSpec {
            directory: raw.output.directory,
            snapshot_stride: raw.output.snapshot_stride,
        },
    })
}

/// Gaussian of width `w` centred at `c`, using the nearest periodic image,
/// rescaled so that its grid integral is `mass`.
pub fn gaussian_bump(grid: &SpatialGrid, center: [f64; 2], width: f64, mass: f64) -> Vec<f64> {
    let raw: Vec<f64> = grid
        .centers()
        .iter()
        .map(|x| {
            let mut r2 = 0.0;
            for a in 0..grid.dim() {
                let l = grid.extent()[a];
                let mut d = (x[a] - center[a]).rem_euclid(l);
                if d > 0.5 * l {
                    d -= l;
                }
                r2 += d * d;
            }
            (-r2 / (2.0 * width * width)).exp()
        })
        .collect();
    let total = grid.integrate(&raw);
    raw.iter().map(|x| mass * x / total).collect()
}

/// Initial data resolved against the grid.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Densities { rho: [Vec<f64>; 2], profile: VelocityProfile },
    Distributions { f: [Vec<f64>; 2] },
}

impl RunConfig {
    pub fn initial_data(&self) -> Result<InitialData> {
        let n = self.grid.num_cells();
        match &self.init {
            InitSpec::GaussianBump {
                center,
                width,
                mass,
                profile,
            } => Ok(InitialData::Densities {
                rho: [
                    gaussian_bump(&self.grid, *center, *width, mass[0]),
                    gaussian_bump(&self.grid, *center, *width, mass[1]),
                ],
                profile: *profile,
            }),
            InitSpec::Uniform { level, profile } => Ok(InitialData::Densities {
                rho: [vec![level[0]; n], vec![level[1]; n]],
                profile: *profile,
            }),
            InitSpec::File { path } => {
                let snap = read_snapshot(path).map_err(|e| cfg("/init/path", e.to_string()))?;
                if snap.cells.iter().map(|c| *c as usize).collect::<Vec<_>>() != self.grid.cells()
                    || snap.extent != self.grid.extent()
                {
                    return Err(cfg("/init/path", "snapshot grid differs from the configured grid"));
                }
                let nv = snap.velocity_nodes as usize;
                if nv == 0 {
                    if snap.payload.len() < 2 * n {
                        return Err(cfg("/init/path", "density snapshot holds fewer than two fields"));
                    }
                    Ok(InitialData::Densities {
                        rho: [snap.payload[..n].to_vec(), snap.payload[n..2 * n].to_vec()],
                        profile: VelocityProfile::Equilibrium,
                    })
                } else {
                    if nv != self.velocities.len() || snap.payload.len() != 2 * n * nv {
                        return Err(cfg("/init/path", "kinetic snapshot does not match the velocity set"));
                    }
                    Ok(InitialData::Distributions {
                        f: [snap.payload[..n * nv].to_vec(), snap.payload[n * nv..].to_vec()],
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"solver":"kinetic","grid":{"extent":[2.0],"cells":[32]},"eps":0.5,"dt":0.01,"t_end":0.1}"#;

    fn pointer_of(text: &str) -> String {
        match parse_config(text) {
            Err(Error::Config { pointer, .. }) => pointer,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.velocities.len(), DEFAULT_NODES_PER_AXIS);
        assert_eq!(c.delta, Delta::Elliptic);
        assert_eq!(c.output.snapshot_stride, 10);
        assert_eq!(c.eps, Some(EpsSpec::Single(0.5)));
    }

    #[test]
    fn unknown_keys_are_rejected_with_pointer() {
        let t = MINIMAL.replace("\"dt\"", "\"colour\":1,\"dt\"");
        assert_eq!(pointer_of(&t), "/colour");
        let t = MINIMAL.replace("\"cells\":[32]", "\"cells\":[32],\"spacing\":1");
        assert_eq!(pointer_of(&t), "/grid/spacing");
    }

    #[test]
    fn h1_violation_is_named() {
        let t = MINIMAL.replace(
            "\"eps\"",
            r#""species":[{"psi":1,"theta":{"kind":"tanh","amp":1.0,"sigma":1}},{"psi":1}],"eps""#,
        );
        match parse_config(&t) {
            Err(Error::Config { pointer, message }) => {
                assert_eq!(pointer, "/species/0/theta/amp");
                assert!(message.contains("(H1)") && message.contains("‖θ‖_∞ < 1"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_eps_points_to_macro() {
        let t = MINIMAL.replace("\"eps\":0.5", "\"eps\":0");
        match parse_config(&t) {
            Err(Error::Config { pointer, message }) => {
                assert_eq!(pointer, "/eps");
                assert!(message.contains("macro"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nested_type_errors_carry_pointer() {
        let t = MINIMAL.replace("\"cells\":[32]", "\"cells\":[\"many\"]");
        assert_eq!(pointer_of(&t), "/grid/cells/0");
        let t = MINIMAL.replace("\"dt\":0.01", "\"dt\":-1");
        assert_eq!(pointer_of(&t), "/dt");
    }

    #[test]
    fn bump_has_requested_mass() {
        let g = SpatialGrid::line(2.0, 64).unwrap();
        let b = gaussian_bump(&g, [1.0, 0.0], 0.3, 0.7);
        assert!((g.integrate(&b) - 0.7).abs() < 1e-14);
    }
}
