//! Discrete phase space: spatial and velocity grids, distribution fields,
//! Maxwellians and macroscopic moments.
//!
//! Velocity integrals use the midpoint rule on uniform cell-centered nodes.
//! The discrete Maxwellian is evaluated pointwise, so its discrete moments
//! reproduce `(rho, u, T)` only up to quadrature error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Default density below which a cell is treated as vacuum.
pub const DEFAULT_RHO_FLOOR: f64 = 1e-14;

/// Boundary treatment along one spatial axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    /// Zeroth-order extrapolation ghost cells.
    Outflow,
}

/// Uniform cell-centered velocity grid on the box `[-V, V]^dims`.
///
/// Nodes are flattened row-major: `j = jx * counts[1] + jy`. In one velocity
/// dimension the second axis is a single node at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid<R> {
    dims: usize,
    extent: R,
    counts: [usize; 2],
    axes: [Vec<R>; 2],
    weight: R,
}

impl<R: Real> VelocityGrid<R> {
    pub fn new(dims: usize, extent: R, counts: [usize; 2]) -> Result<Self> {
        if !(1..=2).contains(&dims) {
            return Err(Error::Config(format!("velocity dimension {dims} not in {{1,2}}")));
        }
        if !(extent > R::zero()) || !extent.is_finite() {
            return Err(Error::Config(format!("velocity half-width {extent} must be positive")));
        }
        let counts = if dims == 1 { [counts[0], 1] } else { counts };
        if counts[..dims].iter().any(|&c| c < 2) {
            return Err(Error::Config(format!("velocity counts {counts:?} too small")));
        }
        let axis = |n: usize| -> Vec<R> {
            let h = (extent + extent) / R::from_usize_lossy(n);
            (0..n)
                .map(|j| -extent + (R::from_usize_lossy(j) + R::lit(0.5)) * h)
                .collect()
        };
        let axes = if dims == 1 {
            [axis(counts[0]), vec![R::zero()]]
        } else {
            [axis(counts[0]), axis(counts[1])]
        };
        let weight = (0..dims).fold(R::one(), |w, d| {
            w * (extent + extent) / R::from_usize_lossy(counts[d])
        });
        Ok(Self {
            dims,
            extent,
            counts,
            axes,
            weight,
        })
    }

    /// One-dimensional grid with `count` nodes.
    pub fn line(extent: R, count: usize) -> Result<Self> {
        Self::new(1, extent, [count, 1])
    }

    /// Two-dimensional grid with `count x count` nodes.
    pub fn square(extent: R, count: usize) -> Result<Self> {
        Self::new(2, extent, [count, count])
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn extent(&self) -> R {
        self.extent
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    /// Total number of velocity nodes.
    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node coordinates along one axis.
    pub fn axis(&self, d: usize) -> &[R] {
        &self.axes[d]
    }

    /// Quadrature weight shared by every node.
    pub fn weight(&self) -> R {
        self.weight
    }

    /// Coordinates of flattened node `j`; the second component is zero in 1D.
    #[inline]
    pub fn node(&self, j: usize) -> [R; 2] {
        let jx = j / self.counts[1];
        let jy = j % self.counts[1];
        [self.axes[0][jx], self.axes[1][jy]]
    }

    pub fn nodes(&self) -> impl Iterator<Item = [R; 2]> + '_ {
        (0..self.len()).map(move |j| self.node(j))
    }
}

/// Uniform cell-centered spatial grid with per-axis boundary tags.
///
/// Cells are flattened row-major: `i = ix * counts[1] + iy`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGrid<R> {
    dims: usize,
    lower: [R; 2],
    upper: [R; 2],
    counts: [usize; 2],
    spacing: [R; 2],
    boundary: [Boundary; 2],
}

/// Smallest axis length accepted: the widest WENO window plus ghosts.
pub const MIN_SPATIAL_CELLS: usize = 5;

impl<R: Real> SpatialGrid<R> {
    pub fn new(
        dims: usize,
        lower: [R; 2],
        upper: [R; 2],
        counts: [usize; 2],
        boundary: [Boundary; 2],
    ) -> Result<Self> {
        if !(1..=2).contains(&dims) {
            return Err(Error::Config(format!("spatial dimension {dims} not in {{1,2}}")));
        }
        let mut counts = counts;
        let mut lower = lower;
        let mut upper = upper;
        if dims == 1 {
            counts[1] = 1;
            lower[1] = R::zero();
            upper[1] = R::one();
        }
        let mut spacing = [R::one(); 2];
        for d in 0..dims {
            if counts[d] < MIN_SPATIAL_CELLS {
                return Err(Error::Config(format!(
                    "spatial axis {d} has {} cells, need at least {MIN_SPATIAL_CELLS}",
                    counts[d]
                )));
            }
            spacing[d] = (upper[d] - lower[d]) / R::from_usize_lossy(counts[d]);
            if !(spacing[d] > R::zero()) {
                return Err(Error::Config(format!("axis {d} has non-positive extent")));
            }
        }
        if dims == 1 {
            spacing[1] = R::one();
        }
        Ok(Self {
            dims,
            lower,
            upper,
            counts,
            spacing,
            boundary,
        })
    }

    pub fn line(lower: R, upper: R, count: usize, boundary: Boundary) -> Result<Self> {
        Self::new(
            1,
            [lower, R::zero()],
            [upper, R::one()],
            [count, 1],
            [boundary, Boundary::Periodic],
        )
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn lower(&self) -> [R; 2] {
        self.lower
    }

    pub fn upper(&self) -> [R; 2] {
        self.upper
    }

    pub fn spacing(&self) -> [R; 2] {
        self.spacing
    }

    /// Smallest spacing over the active axes.
    pub fn min_spacing(&self) -> R {
        (0..self.dims).map(|d| self.spacing[d]).fold(R::infinity(), R::min)
    }

    pub fn boundary(&self) -> [Boundary; 2] {
        self.boundary
    }

    pub fn with_boundary(mut self, boundary: [Boundary; 2]) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Product of the active spacings.
    pub fn cell_volume(&self) -> R {
        (0..self.dims).fold(R::one(), |v, d| v * self.spacing[d])
    }

    pub fn center(&self, i: usize) -> [R; 2] {
        let ix = i / self.counts[1];
        let iy = i % self.counts[1];
        let c = |d: usize, k: usize| {
            self.lower[d] + (R::from_usize_lossy(k) + R::lit(0.5)) * self.spacing[d]
        };
        if self.dims == 1 {
            [c(0, ix), R::zero()]
        } else {
            [c(0, ix), c(1, iy)]
        }
    }
}

/// Density, bulk velocity and temperature of one velocity slice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoreMoments<R> {
    pub rho: R,
    pub ubar: [R; 2],
    pub temperature: R,
    /// Set when the density fell under the floor or the temperature was not
    /// positive; `ubar` and `temperature` then hold the fallback (0, 1).
    pub degenerate: bool,
}

/// Full set of per-cell observables.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MomentSet<R> {
    pub rho: R,
    pub ubar: [R; 2],
    pub temperature: R,
    pub heat_flux: [R; 2],
    pub pressure: R,
    pub energy: R,
    pub mach: R,
    pub degenerate: bool,
}

fn check_finite<R: Real>(name: &str, x: R) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} is not finite ({x})")))
    }
}

/// Evaluates `rho / (2 pi T)^(d/2) * exp(-|v - u|^2 / (2T))` at every node.
pub fn maxwellian<R: Real>(
    vgrid: &VelocityGrid<R>,
    rho: R,
    ubar: [R; 2],
    temperature: R,
) -> Result<Vec<R>> {
    let mut out = vec![R::zero(); vgrid.len()];
    maxwellian_into(vgrid, rho, ubar, temperature, &mut out)?;
    Ok(out)
}

/// In-place variant of [`maxwellian`]; `out` must have one entry per node.
pub fn maxwellian_into<R: Real>(
    vgrid: &VelocityGrid<R>,
    rho: R,
    ubar: [R; 2],
    temperature: R,
    out: &mut [R],
) -> Result<()> {
    check_finite("density", rho)?;
    check_finite("temperature", temperature)?;
    check_finite("bulk velocity", ubar[0])?;
    check_finite("bulk velocity", ubar[1])?;
    if rho < R::zero() {
        return Err(Error::Domain(format!("negative density {rho}")));
    }
    if !(temperature > R::zero()) {
        return Err(Error::Domain(format!("non-positive temperature {temperature}")));
    }
    debug_assert_eq!(out.len(), vgrid.len());
    let two_t = temperature + temperature;
    let dims = vgrid.dims();
    let norm = rho / (R::TAU() * temperature).powf(R::from_usize_lossy(dims) / R::lit(2.0));
    // The Gaussian factorizes over axes.
    let gauss = |d: usize| -> Vec<R> {
        vgrid
            .axis(d)
            .iter()
            .map(|&v| {
                let c = v - ubar[d];
                (-(c * c) / two_t).exp()
            })
            .collect()
    };
    let gx = gauss(0);
    if dims == 1 {
        for (o, g) in out.iter_mut().zip(&gx) {
            *o = norm * *g;
        }
    } else {
        let gy = gauss(1);
        let ny = gy.len();
        for (jx, ex) in gx.iter().enumerate() {
            let row = &mut out[jx * ny..(jx + 1) * ny];
            for (o, ey) in row.iter_mut().zip(&gy) {
                *o = norm * (*ex * *ey);
            }
        }
    }
    Ok(())
}

/// Density, bulk velocity and temperature by midpoint quadrature.
pub fn moments<R: Real>(vgrid: &VelocityGrid<R>, slice: &[R]) -> Result<CoreMoments<R>> {
    moments_with_floor(vgrid, slice, R::lit(DEFAULT_RHO_FLOOR))
}

/// [`moments`] with an explicit vacuum floor.
pub fn moments_with_floor<R: Real>(
    vgrid: &VelocityGrid<R>,
    slice: &[R],
    rho_floor: R,
) -> Result<CoreMoments<R>> {
    if slice.len() != vgrid.len() {
        return Err(Error::Config(format!(
            "slice has {} entries, velocity grid has {}",
            slice.len(),
            vgrid.len()
        )));
    }
    Ok(core_moments_unchecked(vgrid, slice, rho_floor))
}

pub(crate) fn core_moments_unchecked<R: Real>(
    vgrid: &VelocityGrid<R>,
    slice: &[R],
    rho_floor: R,
) -> CoreMoments<R> {
    let w = vgrid.weight();
    let ny = vgrid.counts()[1];
    let (vx, vy) = (vgrid.axis(0), vgrid.axis(1));
    let mut mass = R::zero();
    let mut mx = R::zero();
    let mut my = R::zero();
    for (j, &f) in slice.iter().enumerate() {
        mass += f;
        mx += vx[j / ny] * f;
        my += vy[j % ny] * f;
    }
    let rho = w * mass;
    let fallback = CoreMoments {
        rho,
        ubar: [R::zero(); 2],
        temperature: R::one(),
        degenerate: true,
    };
    if !(rho > rho_floor) {
        return fallback;
    }
    let ubar = [w * mx / rho, w * my / rho];
    let mut second = R::zero();
    for (j, &f) in slice.iter().enumerate() {
        let cx = vx[j / ny] - ubar[0];
        let cy = vy[j % ny] - ubar[1];
        second += (cx * cx + cy * cy) * f;
    }
    let temperature = w * second / (R::from_usize_lossy(vgrid.dims()) * rho);
    if !(temperature > R::zero()) || !temperature.is_finite() {
        return CoreMoments { rho, ..fallback };
    }
    CoreMoments {
        rho,
        ubar,
        temperature,
        degenerate: false,
    }
}

/// Heat flux `q = 1/2 sum w |c|^2 c f` with peculiar velocity `c = v - u`.
pub fn heat_flux<R: Real>(vgrid: &VelocityGrid<R>, slice: &[R], core: &CoreMoments<R>) -> [R; 2] {
    let w = vgrid.weight();
    let ny = vgrid.counts()[1];
    let (vx, vy) = (vgrid.axis(0), vgrid.axis(1));
    let mut q = [R::zero(); 2];
    for (j, &f) in slice.iter().enumerate() {
        let cx = vx[j / ny] - core.ubar[0];
        let cy = if vgrid.dims() == 2 {
            vy[j % ny] - core.ubar[1]
        } else {
            R::zero()
        };
        let c2f = (cx * cx + cy * cy) * f;
        q[0] += c2f * cx;
        q[1] += c2f * cy;
    }
    let half_w = w / R::lit(2.0);
    [half_w * q[0], half_w * q[1]]
}

/// Pressure `rho T`, energy `1/2 rho |u|^2 + P` and Mach number `|u| / sqrt(T)`.
pub fn derived<R: Real>(core: &CoreMoments<R>) -> Result<(R, R, R)> {
    if !(core.temperature > R::zero()) {
        return Err(Error::Domain(format!(
            "non-positive temperature {}",
            core.temperature
        )));
    }
    if core.rho < R::zero() {
        return Err(Error::Domain(format!("negative density {}", core.rho)));
    }
    let u2 = core.ubar[0] * core.ubar[0] + core.ubar[1] * core.ubar[1];
    let pressure = core.rho * core.temperature;
    let energy = core.rho * u2 / R::lit(2.0) + pressure;
    let mach = u2.sqrt() / core.temperature.sqrt();
    Ok((pressure, energy, mach))
}

/// Every observable of one slice.
pub fn moment_set<R: Real>(vgrid: &VelocityGrid<R>, slice: &[R]) -> Result<MomentSet<R>> {
    let core = moments(vgrid, slice)?;
    let heat_flux = heat_flux(vgrid, slice, &core);
    let (pressure, energy, mach) = derived(&core)?;
    Ok(MomentSet {
        rho: core.rho,
        ubar: core.ubar,
        temperature: core.temperature,
        heat_flux,
        pressure,
        energy,
        mach,
        degenerate: core.degenerate,
    })
}

/// Discrete `f(x_i, v_j)` stored cell-major: the velocity slice of cell `i`
/// is `values[i * nv .. (i + 1) * nv]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField<R> {
    pub sgrid: SpatialGrid<R>,
    pub vgrid: VelocityGrid<R>,
    /// Knudsen number; `+inf` marks a collisionless run.
    pub epsilon: R,
    pub values: Vec<R>,
}

impl<R: Real> DistributionField<R> {
    pub fn zeros(sgrid: SpatialGrid<R>, vgrid: VelocityGrid<R>, epsilon: R) -> Self {
        let values = vec![R::zero(); sgrid.len() * vgrid.len()];
        Self {
            sgrid,
            vgrid,
            epsilon,
            values,
        }
    }

    /// Field whose slices are the Maxwellians of `state(x) = (rho, u, T)`.
    pub fn from_macroscopic<F>(
        sgrid: SpatialGrid<R>,
        vgrid: VelocityGrid<R>,
        epsilon: R,
        mut state: F,
    ) -> Result<Self>
    where
        F: FnMut([R; 2]) -> (R, [R; 2], R),
    {
        let mut field = Self::zeros(sgrid, vgrid, epsilon);
        let nv = field.vgrid.len();
        for i in 0..field.sgrid.len() {
            let (rho, u, t) = state(field.sgrid.center(i));
            maxwellian_into(
                &field.vgrid,
                rho,
                u,
                t,
                &mut field.values[i * nv..(i + 1) * nv],
            )?;
        }
        Ok(field)
    }

    pub fn n_cells(&self) -> usize {
        self.sgrid.len()
    }

    pub fn n_velocities(&self) -> usize {
        self.vgrid.len()
    }

    pub fn slice(&self, i: usize) -> &[R] {
        let nv = self.vgrid.len();
        &self.values[i * nv..(i + 1) * nv]
    }

    pub fn slice_mut(&mut self, i: usize) -> &mut [R] {
        let nv = self.vgrid.len();
        &mut self.values[i * nv..(i + 1) * nv]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn core_moments(&self) -> Vec<CoreMoments<R>> {
        let floor = R::lit(DEFAULT_RHO_FLOOR);
        (0..self.n_cells())
            .map(|i| core_moments_unchecked(&self.vgrid, self.slice(i), floor))
            .collect()
    }

    /// Observables of every cell. Degenerate cells report their fallback moments.
    pub fn moment_fields(&self) -> Vec<MomentSet<R>> {
        self.core_moments()
            .into_iter()
            .enumerate()
            .map(|(i, core)| {
                let heat_flux = heat_flux(&self.vgrid, self.slice(i), &core);
                let u2 = core.ubar[0] * core.ubar[0] + core.ubar[1] * core.ubar[1];
                let pressure = core.rho * core.temperature;
                let energy = core.rho * u2 / R::lit(2.0) + pressure;
                let mach = u2.sqrt() / core.temperature.sqrt();
                MomentSet {
                    rho: core.rho,
                    ubar: core.ubar,
                    temperature: core.temperature,
                    heat_flux,
                    pressure,
                    energy,
                    mach,
                    degenerate: core.degenerate,
                }
            })
            .collect()
    }

    /// Total mass `sum_i dx sum_j w f_ij`.
    pub fn total_mass(&self) -> R {
        let s: R = self.values.iter().fold(R::zero(), |a, &b| a + b);
        s * self.vgrid.weight() * self.sgrid.cell_volume()
    }
}
