//! The semidiscrete kinetic system `f' = -v . grad_x f + Q(f) / eps`.

use std::sync::Arc;

use crate::bgk::{bgk_accumulate, FrequencyMode};
use crate::boltzmann::SpectralPlan;
use crate::error::{Error, Result};
use crate::integrators::Rhs;
use crate::phase_space::{DistributionField, SpatialGrid, VelocityGrid};
use crate::real::Real;
use crate::weno::{transport_rhs_into, WenoConfig};

#[derive(Clone, Debug)]
pub enum CollisionModel<R: Real> {
    /// Free transport only.
    None,
    Bgk(FrequencyMode<R>),
    Boltzmann(Arc<SpectralPlan<R>>),
}

impl<R: Real> CollisionModel<R> {
    pub fn label(&self) -> String {
        match self {
            CollisionModel::None => "none".into(),
            CollisionModel::Bgk(FrequencyMode::Constant(nu)) => format!("bgk(nu={nu})"),
            CollisionModel::Bgk(FrequencyMode::Density) => "bgk(nu=rho)".into(),
            CollisionModel::Boltzmann(p) => format!("boltzmann(n_theta={}, b0={})", p.n_theta(), p.b0()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KineticSystem<R: Real> {
    pub sgrid: SpatialGrid<R>,
    pub vgrid: VelocityGrid<R>,
    pub weno: WenoConfig<R>,
    pub collision: CollisionModel<R>,
    /// Knudsen number; `+inf` disables the collision term.
    pub epsilon: R,
}

impl<R: Real> KineticSystem<R> {
    pub fn new(
        sgrid: SpatialGrid<R>,
        vgrid: VelocityGrid<R>,
        weno: WenoConfig<R>,
        collision: CollisionModel<R>,
        epsilon: R,
    ) -> Result<Self> {
        if !(epsilon > R::zero()) {
            return Err(Error::Config(format!("Knudsen number {epsilon} must be positive")));
        }
        if let CollisionModel::Boltzmann(plan) = &collision {
            let c = vgrid.counts();
            if vgrid.dims() != 2 || c != [plan.modes_per_axis(); 2] || vgrid.extent() != plan.extent() {
                return Err(Error::Config("spectral plan does not match the velocity grid".into()));
            }
        }
        Ok(Self {
            sgrid,
            vgrid,
            weno,
            collision,
            epsilon,
        })
    }

    pub fn for_field(field: &DistributionField<R>, weno: WenoConfig<R>, collision: CollisionModel<R>) -> Result<Self> {
        Self::new(field.sgrid.clone(), field.vgrid.clone(), weno, collision, field.epsilon)
    }

    pub fn state_len(&self) -> usize {
        self.sgrid.len() * self.vgrid.len()
    }

    /// Adds `Q(f) / eps` to `out`.
    pub fn add_collision(&self, values: &[R], out: &mut [R]) -> Result<()> {
        if self.epsilon.is_infinite() {
            return Ok(());
        }
        let scale = R::one() / self.epsilon;
        match &self.collision {
            CollisionModel::None => Ok(()),
            CollisionModel::Bgk(mode) => bgk_accumulate(&self.vgrid, mode, scale, values, out).map(|_| ()),
            CollisionModel::Boltzmann(plan) => plan.accumulate(&self.vgrid, scale, values, out),
        }
    }
}

impl<R: Real> Rhs<R> for KineticSystem<R> {
    fn eval(&self, state: &[R], out: &mut [R]) -> Result<()> {
        transport_rhs_into(&self.sgrid, &self.vgrid, &self.weno, state, out)?;
        self.add_collision(state, out)
    }
}

/// Total right-hand side of a field.
pub fn rhs_total<R: Real>(
    field: &DistributionField<R>,
    weno: &WenoConfig<R>,
    collision: &CollisionModel<R>,
) -> Result<Vec<R>> {
    let sys = KineticSystem::for_field(field, *weno, collision.clone())?;
    let mut out = vec![R::zero(); field.values.len()];
    sys.eval(&field.values, &mut out)?;
    Ok(out)
}
