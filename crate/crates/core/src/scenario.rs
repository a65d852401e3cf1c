//! Built-in benchmark problems.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bgk::FrequencyMode;
use crate::error::{Error, Result};
use crate::phase_space::{Boundary, DistributionField, SpatialGrid, VelocityGrid};

/// Initial `(rho, u, T)` at a point.
pub type InitialData = fn([f64; 2]) -> (f64, [f64; 2], f64);

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Reduced resolution for laptop-scale runs.
    #[default]
    Desk,
    Paper,
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Error::Config(format!("unknown preset '{s}' (expected desk or paper)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorKind {
    Fe,
    Rk4,
    /// Projective forward Euler.
    Pfe,
    /// Projective RK4.
    Prk4,
    /// Telescopic projective forward Euler.
    Tpfe,
    /// Telescopic projective RK4.
    Tprk4,
}

impl IntegratorKind {
    pub fn is_projective(self) -> bool {
        !matches!(self, IntegratorKind::Fe | IntegratorKind::Rk4)
    }

    pub fn is_telescopic(self) -> bool {
        matches!(self, IntegratorKind::Tpfe | IntegratorKind::Tprk4)
    }

    pub fn uses_rk4(self) -> bool {
        matches!(self, IntegratorKind::Rk4 | IntegratorKind::Prk4 | IntegratorKind::Tprk4)
    }

    pub fn name(self) -> &'static str {
        match self {
            IntegratorKind::Fe => "fe",
            IntegratorKind::Rk4 => "rk4",
            IntegratorKind::Pfe => "pfe",
            IntegratorKind::Prk4 => "prk4",
            IntegratorKind::Tpfe => "tpfe",
            IntegratorKind::Tprk4 => "tprk4",
        }
    }
}

impl FromStr for IntegratorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "fe" => IntegratorKind::Fe,
            "rk4" => IntegratorKind::Rk4,
            "pfe" => IntegratorKind::Pfe,
            "prk4" => IntegratorKind::Prk4,
            "tpfe" => IntegratorKind::Tpfe,
            "tprk4" => IntegratorKind::Tprk4,
            _ => {
                return Err(Error::Config(format!(
                    "unknown integrator '{s}' (expected fe, rk4, pfe, prk4, tpfe or tprk4)"
                )))
            }
        })
    }
}

impl fmt::Display for IntegratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionKind {
    None,
    Bgk,
    Boltzmann,
}

impl FromStr for CollisionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CollisionKind::None),
            "bgk" => Ok(CollisionKind::Bgk),
            "boltzmann" => Ok(CollisionKind::Boltzmann),
            _ => Err(Error::Config(format!("unknown collision model '{s}' (expected none, bgk or boltzmann)"))),
        }
    }
}

/// Parses `rho` or a positive constant.
pub fn parse_frequency(s: &str) -> Result<FrequencyMode<f64>> {
    if s == "rho" {
        return Ok(FrequencyMode::Density);
    }
    match s.parse::<f64>() {
        Ok(nu) if nu > 0.0 && nu.is_finite() => Ok(FrequencyMode::Constant(nu)),
        _ => Err(Error::Config(format!("collision frequency '{s}' must be 'rho' or a positive number"))),
    }
}

/// Default time stepping of a scenario.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanDefaults {
    pub integrator: IntegratorKind,
    /// Inner steps per level.
    pub k: usize,
    /// Outer step `cfl * dx` for projective plans.
    pub cfl: f64,
    /// Step `dt_factor * dx` for plain explicit plans.
    pub dt_factor: f64,
    pub levels: usize,
    /// Explicit extrapolation factors; derived from `cfl` when absent.
    pub m: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Scenario {
    pub name: &'static str,
    pub preset: Preset,
    pub space_dims: usize,
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    pub cells: [usize; 2],
    pub boundary: [Boundary; 2],
    pub velocity_dims: usize,
    pub velocity_extent: f64,
    /// Velocity nodes per axis.
    pub velocity_count: usize,
    pub collision: CollisionKind,
    pub frequency: FrequencyMode<f64>,
    pub n_theta: usize,
    pub epsilon: f64,
    pub end_time: f64,
    pub weno_k: usize,
    pub plan: PlanDefaults,
    pub snapshots: usize,
    #[serde(skip)]
    pub initial: InitialData,
}

impl Scenario {
    pub fn sgrid(&self) -> Result<SpatialGrid<f64>> {
        SpatialGrid::new(self.space_dims, self.lower, self.upper, self.cells, self.boundary)
    }

    pub fn vgrid(&self) -> Result<VelocityGrid<f64>> {
        let n = self.velocity_count;
        VelocityGrid::new(self.velocity_dims, self.velocity_extent, [n, if self.velocity_dims == 2 { n } else { 1 }])
    }

    /// Cell-wise Maxwellian of the initial macroscopic fields.
    pub fn initial_field(&self) -> Result<DistributionField<f64>> {
        DistributionField::from_macroscopic(self.sgrid()?, self.vgrid()?, self.epsilon, self.initial)
    }

    /// Largest collision rate in the initial data, in units of `1 / epsilon`.
    pub fn fastest_rate(&self) -> Result<f64> {
        let rho_max = || -> Result<f64> {
            let g = self.sgrid()?;
            Ok((0..g.len()).map(|i| (self.initial)(g.center(i)).0).fold(0.0, f64::max))
        };
        match (self.collision, self.frequency) {
            (CollisionKind::None, _) => Ok(1.0),
            (CollisionKind::Bgk, FrequencyMode::Constant(nu)) => Ok(nu),
            (CollisionKind::Bgk, FrequencyMode::Density) | (CollisionKind::Boltzmann, _) => rho_max(),
        }
    }

    pub fn space_len(&self) -> usize {
        self.cells[..self.space_dims].iter().product()
    }
}

pub const NAMES: [&str; 5] = ["sod_1d1d", "sod_1d2v", "shock_bubble", "kelvin_helmholtz", "double_sod_2d"];

fn sod(x: [f64; 2]) -> (f64, [f64; 2], f64) {
    if x[0] < 0.5 {
        (1.0, [0.0, 0.0], 1.0)
    } else {
        (0.125, [0.0, 0.0], 0.25)
    }
}

fn shock_bubble(x: [f64; 2]) -> (f64, [f64; 2], f64) {
    if x[0] <= -1.0 {
        (16.0 / 7.0, [(5.0f64 / 3.0).sqrt() * 7.0 / 16.0, 0.0], 133.0 / 64.0)
    } else {
        let r2 = (x[0] - 0.5).powi(2) + x[1].powi(2);
        (1.0 + 1.5 * (-16.0 * r2).exp(), [0.0, 0.0], 1.0)
    }
}

fn kelvin_helmholtz(x: [f64; 2]) -> (f64, [f64; 2], f64) {
    let uy = 0.01 * (4.0 * std::f64::consts::PI * x[0]).sin();
    if x[1] >= 0.0 {
        (1.0, [0.5, uy], 1.0)
    } else {
        (2.0, [-0.5, uy], 1.0)
    }
}

fn double_sod(x: [f64; 2]) -> (f64, [f64; 2], f64) {
    if x[0] * x[1] <= 0.0 {
        (0.1, [0.0, 0.0], 1.0)
    } else {
        (1.0, [0.0, 0.0], 1.0)
    }
}

fn projective(k: usize, cfl: f64) -> PlanDefaults {
    PlanDefaults {
        integrator: IntegratorKind::Prk4,
        k,
        cfl,
        dt_factor: 0.1,
        levels: 1,
        m: None,
    }
}

/// Looks up a scenario by name.
pub fn scenario(name: &str, preset: Preset) -> Result<Scenario> {
    let desk = preset == Preset::Desk;
    let s = match name {
        "sod_1d1d" => Scenario {
            name: "sod_1d1d",
            preset,
            space_dims: 1,
            lower: [0.0, 0.0],
            upper: [1.0, 1.0],
            cells: [100, 1],
            boundary: [Boundary::Outflow; 2],
            velocity_dims: 1,
            velocity_extent: 8.0,
            velocity_count: 80,
            collision: CollisionKind::Bgk,
            frequency: FrequencyMode::Constant(1.0),
            n_theta: 4,
            epsilon: 1e-5,
            end_time: 0.15,
            weno_k: 3,
            plan: projective(2, 0.4),
            snapshots: 5,
            initial: sod,
        },
        "sod_1d2v" => Scenario {
            name: "sod_1d2v",
            preset,
            space_dims: 1,
            lower: [0.0, 0.0],
            upper: [1.0, 1.0],
            cells: [100, 1],
            boundary: [Boundary::Outflow; 2],
            velocity_dims: 2,
            velocity_extent: 8.0,
            velocity_count: if desk { 16 } else { 32 },
            collision: CollisionKind::Bgk,
            frequency: FrequencyMode::Constant(1.0),
            n_theta: 4,
            epsilon: 1e-5,
            end_time: 0.15,
            weno_k: 2,
            plan: projective(2, 0.4),
            snapshots: 5,
            initial: sod,
        },
        "shock_bubble" => Scenario {
            name: "shock_bubble",
            preset,
            space_dims: 2,
            lower: [-2.0, -1.0],
            upper: [3.0, 1.0],
            cells: if desk { [100, 13] } else { [200, 25] },
            boundary: [Boundary::Outflow, Boundary::Periodic],
            velocity_dims: 2,
            velocity_extent: 10.0,
            velocity_count: if desk { 16 } else { 30 },
            collision: CollisionKind::Bgk,
            frequency: FrequencyMode::Constant(1.0),
            n_theta: 4,
            epsilon: 1e-5,
            end_time: 0.8,
            weno_k: 2,
            plan: projective(2, 0.4),
            snapshots: 5,
            initial: shock_bubble,
        },
        "kelvin_helmholtz" => Scenario {
            name: "kelvin_helmholtz",
            preset,
            space_dims: 2,
            lower: [-0.5, -0.5],
            upper: [0.5, 0.5],
            cells: if desk { [50, 50] } else { [100, 100] },
            boundary: [Boundary::Periodic, Boundary::Outflow],
            velocity_dims: 2,
            velocity_extent: 8.0,
            velocity_count: if desk { 16 } else { 30 },
            collision: CollisionKind::Bgk,
            frequency: FrequencyMode::Constant(1.0),
            n_theta: 4,
            epsilon: 5e-5,
            end_time: 1.6,
            weno_k: 2,
            plan: projective(3, 0.45),
            snapshots: 5,
            initial: kelvin_helmholtz,
        },
        "double_sod_2d" => Scenario {
            name: "double_sod_2d",
            preset,
            space_dims: 2,
            lower: [-0.5, -0.5],
            upper: [0.5, 0.5],
            cells: if desk { [32, 32] } else { [64, 64] },
            boundary: [Boundary::Outflow; 2],
            velocity_dims: 2,
            // At 16 nodes a box of half-width 8 leaves the rarefied, cooled
            // gas under-resolved and the discrete collision loses energy.
            velocity_extent: if desk { 6.0 } else { 8.0 },
            velocity_count: if desk { 16 } else { 32 },
            collision: CollisionKind::Boltzmann,
            frequency: FrequencyMode::Density,
            n_theta: 4,
            epsilon: 5e-5,
            end_time: 0.16,
            weno_k: 2,
            plan: PlanDefaults {
                integrator: IntegratorKind::Tprk4,
                k: 3,
                cfl: 0.3,
                dt_factor: 0.1,
                levels: 2,
                m: Some(vec![6.66, 4.80]),
            },
            snapshots: 5,
            initial: double_sod,
        },
        _ => {
            return Err(Error::Config(format!(
                "unknown scenario '{name}' (expected one of {})",
                NAMES.join(", ")
            )))
        }
    };
    Ok(s)
}

/// Every built-in scenario at the given resolution.
pub fn catalogue(preset: Preset) -> Vec<Scenario> {
    NAMES.iter().map(|n| scenario(n, preset).expect("built-in scenario")).collect()
}
