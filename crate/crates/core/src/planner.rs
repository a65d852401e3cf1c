//! Parameter selection for projective and telescopic projective integration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{IntegratorPlan, RkTableau};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerMode {
    /// One projective level bridging a fast and a slow eigenvalue cluster.
    TwoCluster,
    /// Several levels, each stable on the whole interval between clusters.
    ZeroOneStable,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerInput<R> {
    pub epsilon: R,
    /// Largest dimensionless collision frequency, e.g. `max rho(x, 0)` for
    /// `nu = rho`. The innermost step is `epsilon / fastest_rate`.
    pub fastest_rate: R,
    pub dx: R,
    pub cfl: R,
    pub k: usize,
    pub mode: PlannerMode,
}

impl<R: Real> PlannerInput<R> {
    fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("epsilon", self.epsilon),
            ("fastest rate", self.fastest_rate),
            ("dx", self.dx),
            ("CFL constant", self.cfl),
        ] {
            if !(x > R::zero()) || !x.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite, got {x}")));
            }
        }
        if self.mode == PlannerMode::TwoCluster && self.k < 2 {
            return Err(Error::Config(format!("two-cluster plans need K >= 2, got {}", self.k)));
        }
        Ok(())
    }

    /// Innermost step resolving the fastest decay.
    pub fn inner_step(&self) -> R {
        self.epsilon / self.fastest_rate
    }

    /// Outer step `C dx`.
    pub fn outer_step(&self) -> R {
        self.cfl * self.dx
    }
}

/// Single-level plan with `dt = eps / rate`, `Dt = C dx`, `M = Dt/dt - (K+1)`.
pub fn plan_two_cluster<R: Real>(input: &PlannerInput<R>, tableau: RkTableau<R>) -> Result<IntegratorPlan<R>> {
    if input.mode != PlannerMode::TwoCluster {
        return Err(Error::Config("plan_two_cluster needs the two-cluster mode".into()));
    }
    input.validate()?;
    let dt = input.inner_step();
    let big = input.outer_step();
    let damping = R::from_usize_lossy(input.k + 1) * dt;
    if big <= damping {
        return Err(Error::Infeasible(format!(
            "outer step {big} does not exceed the {} damping steps of {dt}",
            input.k + 1
        )));
    }
    IntegratorPlan::projective(dt, input.k, big, tableau)
}

/// Number of levels needed to bridge `h0` to `hl` with a per-level factor
/// `factor = M + K + 1`, rounded half up and at least one.
pub fn plan_levels<R: Real>(h0: R, hl: R, factor: R) -> Result<usize> {
    if !(h0 > R::zero()) || !(hl > R::zero()) {
        return Err(Error::Config("step sizes must be positive".into()));
    }
    if !(factor > R::one()) {
        return Err(Error::Config(format!("level factor {factor} must exceed 1")));
    }
    if hl <= h0 {
        return Ok(0);
    }
    let l = ((hl.ln() + (R::one() / h0).ln()) / factor.ln()).as_f64();
    Ok(((l + 0.5).floor() as usize).max(1))
}

/// Extrapolation factors with `prod (M_l + K + 1) h0 = hl`.
///
/// All levels share the geometric factor `(hl/h0)^(1/L)`; the coarsest level
/// absorbs the rounding so the product identity holds.
pub fn adapt_m<R: Real>(h0: R, hl: R, k: usize, levels: usize) -> Result<Vec<R>> {
    if levels == 0 {
        return Err(Error::Config("adapt_m needs at least one level".into()));
    }
    if !(h0 > R::zero()) || !(hl >= h0) {
        return Err(Error::Config(format!("need 0 < h0 <= hl, got h0={h0}, hl={hl}")));
    }
    let ratio = hl / h0;
    let k1 = R::from_usize_lossy(k + 1);
    let g = ratio.powf(R::one() / R::from_usize_lossy(levels));
    if g < k1 * (R::one() - R::lit(1e-12)) {
        return Err(Error::Infeasible(format!(
            "per-level factor {g} is below K + 1 = {k1}"
        )));
    }
    let mut m = vec![(g - k1).max(R::zero()); levels];
    let inner: R = m[..levels - 1].iter().fold(R::one(), |p, &x| p * (x + k1));
    m[levels - 1] = (ratio / inner - k1).max(R::zero());
    Ok(m)
}

/// `prod_l (M_l + K_l + 1) / (K_l + 1)`.
pub fn speedup<R: Real>(plan: &IntegratorPlan<R>) -> R {
    plan.speedup()
}

/// Multi-level plan from `h0 = eps / rate` to `hl = C dx`. The level count is
/// either given or derived from `factor`.
pub fn plan_telescopic<R: Real>(
    input: &PlannerInput<R>,
    levels: Option<usize>,
    factor: Option<R>,
    tableau: RkTableau<R>,
) -> Result<IntegratorPlan<R>> {
    input.validate()?;
    let h0 = input.inner_step();
    let hl = input.outer_step();
    let l = match (levels, factor) {
        (Some(l), _) => l,
        (None, Some(f)) => plan_levels(h0, hl, f)?,
        (None, None) => return Err(Error::Config("need a level count or a level factor".into())),
    };
    if l == 0 {
        return IntegratorPlan::plain(h0, tableau);
    }
    let m = adapt_m(h0, hl, input.k, l)?;
    IntegratorPlan::new(h0, vec![input.k; l], m, tableau)
}
