//! Nonlinear BGK relaxation `nu / eps * (M[f] - f)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{
    core_moments_unchecked, maxwellian_into, CoreMoments, DistributionField, VelocityGrid,
    DEFAULT_RHO_FLOOR,
};
use crate::real::Real;

/// Collision frequency law.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum FrequencyMode<R> {
    Constant(R),
    /// `nu = rho(x)`.
    Density,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BgkConfig<R> {
    pub frequency: FrequencyMode<R>,
    pub epsilon: R,
}

impl<R: Real> BgkConfig<R> {
    pub fn new(frequency: FrequencyMode<R>, epsilon: R) -> Result<Self> {
        if let FrequencyMode::Constant(nu) = frequency {
            if !(nu > R::zero()) || !nu.is_finite() {
                return Err(Error::Config(format!("collision frequency {nu} must be positive")));
            }
        }
        if !(epsilon > R::zero()) {
            return Err(Error::Config(format!("Knudsen number {epsilon} must be positive")));
        }
        Ok(Self { frequency, epsilon })
    }
}

pub fn collision_frequency<R: Real>(mode: &FrequencyMode<R>, core: &CoreMoments<R>) -> R {
    match *mode {
        FrequencyMode::Constant(nu) => nu,
        FrequencyMode::Density => core.rho,
    }
}

/// Writes `nu * (M[f] - f)` for one slice, without the `1/eps` factor.
///
/// Returns `false` and writes zeros when the cell is degenerate.
pub fn relax_slice<R: Real>(
    vgrid: &VelocityGrid<R>,
    mode: &FrequencyMode<R>,
    slice: &[R],
    out: &mut [R],
) -> Result<bool> {
    let core = core_moments_unchecked(vgrid, slice, R::lit(DEFAULT_RHO_FLOOR));
    if core.degenerate {
        out.iter_mut().for_each(|o| *o = R::zero());
        return Ok(false);
    }
    maxwellian_into(vgrid, core.rho, core.ubar, core.temperature, out)?;
    let nu = collision_frequency(mode, &core);
    for (o, &f) in out.iter_mut().zip(slice) {
        *o = nu * (*o - f);
    }
    Ok(true)
}

/// Adds `scale * nu * (M[f] - f)` for every cell of `values` into `out`.
///
/// Returns the indices of degenerate cells, which receive no contribution.
pub fn bgk_accumulate<R: Real>(
    vgrid: &VelocityGrid<R>,
    mode: &FrequencyMode<R>,
    scale: R,
    values: &[R],
    out: &mut [R],
) -> Result<Vec<usize>> {
    let nv = vgrid.len();
    if values.len() % nv != 0 || out.len() != values.len() {
        return Err(Error::Config("state length is not a multiple of the velocity grid".into()));
    }
    let mut buf = vec![R::zero(); nv];
    let mut degenerate = Vec::new();
    for (cell, (src, dst)) in values.chunks_exact(nv).zip(out.chunks_exact_mut(nv)).enumerate() {
        if !relax_slice(vgrid, mode, src, &mut buf)? {
            degenerate.push(cell);
            continue;
        }
        for (o, &b) in dst.iter_mut().zip(&buf) {
            *o += scale * b;
        }
    }
    Ok(degenerate)
}

/// Collision contribution `nu / eps * (M[f] - f)` of a whole field.
pub fn bgk_rhs<R: Real>(field: &DistributionField<R>, cfg: &BgkConfig<R>) -> Result<Vec<R>> {
    let mut out = vec![R::zero(); field.values.len()];
    bgk_accumulate(
        &field.vgrid,
        &cfg.frequency,
        R::one() / cfg.epsilon,
        &field.values,
        &mut out,
    )?;
    Ok(out)
}
