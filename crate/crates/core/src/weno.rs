//! Upwind finite-difference WENO discretization of `v . grad_x f`.
//!
//! Each velocity node is a constant-speed advection, so the interface flux is
//! simply `v` times the left-biased reconstruction when `v > 0` and the
//! right-biased one when `v < 0`.

use crate::error::{Error, Result};
use crate::phase_space::{Boundary, DistributionField, SpatialGrid, VelocityGrid};
use crate::real::Real;

pub const DEFAULT_DELTA: f64 = 1e-6;

/// Which side of the interface `x_{i+1/2}` is reconstructed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Value approached from cell `i`; the window is centered on `i`.
    Left,
    /// Value approached from cell `i+1`; the window is centered on `i+1`.
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WenoConfig<R> {
    pub k: usize,
    pub delta: R,
}

impl<R: Real> WenoConfig<R> {
    pub fn new(k: usize, delta: R) -> Result<Self> {
        if !(1..=3).contains(&k) {
            return Err(Error::Config(format!("WENO order parameter k={k} not in 1..=3")));
        }
        if !(delta >= R::lit(1e-7) && delta <= R::lit(1e-5)) {
            return Err(Error::Config(format!("WENO delta {delta} outside [1e-7, 1e-5]")));
        }
        Ok(Self { k, delta })
    }

    pub fn with_order(k: usize) -> Result<Self> {
        Self::new(k, R::lit(DEFAULT_DELTA))
    }

    /// Number of cells in a reconstruction window.
    pub fn window(&self) -> usize {
        2 * self.k - 1
    }
}

/// Linear weights of the substencils, ordered from the most downwind one.
pub fn ideal_weights<R: Real>(k: usize) -> Result<Vec<R>> {
    let w: &[f64] = match k {
        1 => &[1.0],
        2 => &[2.0 / 3.0, 1.0 / 3.0],
        3 => &[0.3, 0.6, 0.1],
        _ => return Err(Error::Config(format!("no ideal weights for k={k}"))),
    };
    Ok(w.iter().map(|&x| R::lit(x)).collect())
}

/// Precomputed constants for one order; keeps `lit` conversions off the hot path.
#[derive(Clone, Copy, Debug)]
struct Kernel<R> {
    k: usize,
    delta: R,
    d: [R; 3],
    half: R,
    three_half: R,
    quarter: R,
    c13_12: R,
    third: R,
    five_sixth: R,
    sixth: R,
    seven_sixth: R,
    eleven_sixth: R,
}

impl<R: Real> Kernel<R> {
    fn new(cfg: &WenoConfig<R>) -> Self {
        let d = match cfg.k {
            1 => [R::one(), R::zero(), R::zero()],
            2 => [R::lit(2.0 / 3.0), R::lit(1.0 / 3.0), R::zero()],
            _ => [R::lit(0.3), R::lit(0.6), R::lit(0.1)],
        };
        Self {
            k: cfg.k,
            delta: cfg.delta,
            d,
            half: R::lit(0.5),
            three_half: R::lit(1.5),
            quarter: R::lit(0.25),
            c13_12: R::lit(13.0 / 12.0),
            third: R::lit(1.0 / 3.0),
            five_sixth: R::lit(5.0 / 6.0),
            sixth: R::lit(1.0 / 6.0),
            seven_sixth: R::lit(7.0 / 6.0),
            eleven_sixth: R::lit(11.0 / 6.0),
        }
    }

    #[inline]
    fn beta2(&self, w: &[R]) -> [R; 2] {
        let b0 = w[1] - w[2];
        let b1 = w[0] - w[1];
        [b0 * b0, b1 * b1]
    }

    #[inline]
    fn beta3(&self, w: &[R]) -> [R; 3] {
        let two = R::lit(2.0);
        let three = R::lit(3.0);
        let four = R::lit(4.0);
        let (um2, um1, u0, up1, up2) = (w[0], w[1], w[2], w[3], w[4]);
        let a0 = three * u0 - four * up1 + up2;
        let s0 = u0 - two * up1 + up2;
        let a1 = um1 - up1;
        let s1 = um1 - two * u0 + up1;
        let a2 = um2 - four * um1 + three * u0;
        let s2 = um2 - two * um1 + u0;
        [
            self.quarter * a0 * a0 + self.c13_12 * s0 * s0,
            self.quarter * a1 * a1 + self.c13_12 * s1 * s1,
            self.quarter * a2 * a2 + self.c13_12 * s2 * s2,
        ]
    }

    fn alpha(&self, d: R, beta: R) -> R {
        let s = self.delta + beta;
        d / (s * s)
    }

    /// Left-side value at `x_{i+1/2}` from a window centered on `i`.
    #[inline]
    fn left(&self, w: &[R]) -> R {
        match self.k {
            1 => w[0],
            2 => self.left2(w[0], w[1], w[2]),
            _ => self.left3(w[0], w[1], w[2], w[3], w[4]),
        }
    }

    // Weights scaled by the product of all (delta + beta)^2 so that only one
    // division remains.
    #[inline]
    fn left2(&self, um1: R, u0: R, up1: R) -> R {
        let b = self.beta2(&[um1, u0, up1]);
        let s0 = self.delta + b[0];
        let s1 = self.delta + b[1];
        let a0 = self.d[0] * s1 * s1;
        let a1 = self.d[1] * s0 * s0;
        let r0 = self.half * u0 + self.half * up1;
        let r1 = -self.half * um1 + self.three_half * u0;
        r1 + a0 * (r0 - r1) / (a0 + a1)
    }

    #[inline]
    fn left3(&self, um2: R, um1: R, u0: R, up1: R, up2: R) -> R {
        let b = self.beta3(&[um2, um1, u0, up1, up2]);
        let (s0, s1, s2) = (self.delta + b[0], self.delta + b[1], self.delta + b[2]);
        let (q0, q1, q2) = (s0 * s0, s1 * s1, s2 * s2);
        let a0 = self.d[0] * q1 * q2;
        let a1 = self.d[1] * q0 * q2;
        let a2 = self.d[2] * q0 * q1;
        let r0 = self.third * u0 + self.five_sixth * up1 - self.sixth * up2;
        let r1 = -self.sixth * um1 + self.five_sixth * u0 + self.third * up1;
        let r2 = self.third * um2 - self.seven_sixth * um1 + self.eleven_sixth * u0;
        (a0 * r0 + a1 * r1 + a2 * r2) / (a0 + a1 + a2)
    }

    fn weights(&self, w: &[R]) -> Vec<R> {
        let beta: Vec<R> = match self.k {
            1 => vec![R::zero()],
            2 => self.beta2(w).to_vec(),
            _ => self.beta3(w).to_vec(),
        };
        let alpha: Vec<R> = beta
            .iter()
            .zip(&self.d)
            .map(|(&b, &d)| self.alpha(d, b))
            .collect();
        let total = alpha.iter().fold(R::zero(), |a, &b| a + b);
        alpha.into_iter().map(|a| a / total).collect()
    }
}

fn check_window<R>(k: usize, window: &[R]) -> Result<()> {
    if window.len() != 2 * k - 1 {
        return Err(Error::Config(format!(
            "WENO window has {} cells, k={k} needs {}",
            window.len(),
            2 * k - 1
        )));
    }
    Ok(())
}

/// Smoothness indicators of the substencils of a `2k-1` window centered on `i`.
pub fn smoothness_indicators<R: Real>(k: usize, window: &[R]) -> Result<Vec<R>> {
    let cfg = WenoConfig::with_order(k)?;
    check_window(k, window)?;
    let kern = Kernel::new(&cfg);
    Ok(match k {
        1 => vec![R::zero()],
        2 => kern.beta2(window).to_vec(),
        _ => kern.beta3(window).to_vec(),
    })
}

/// Normalized nonlinear weights for a left-side reconstruction.
pub fn nonlinear_weights<R: Real>(cfg: &WenoConfig<R>, window: &[R]) -> Result<Vec<R>> {
    check_window(cfg.k, window)?;
    Ok(Kernel::new(cfg).weights(window))
}

/// Reconstructs the point value at the interface `x_{i+1/2}`.
///
/// `window` lists `2k-1` consecutive values in increasing `x`. For
/// [`Side::Left`] it is centered on `i`, for [`Side::Right`] on `i+1`.
pub fn weno_reconstruct<R: Real>(cfg: &WenoConfig<R>, window: &[R], side: Side) -> Result<R> {
    check_window(cfg.k, window)?;
    let kern = Kernel::new(cfg);
    Ok(match side {
        Side::Left => kern.left(window),
        Side::Right => {
            let rev: Vec<R> = window.iter().rev().copied().collect();
            kern.left(&rev)
        }
    })
}

fn ghost_index(g: isize, n: usize, boundary: Boundary) -> usize {
    let n = n as isize;
    match boundary {
        Boundary::Periodic => g.rem_euclid(n) as usize,
        Boundary::Outflow => g.clamp(0, n - 1) as usize,
    }
}

/// Writes `-v . grad_x f` for every cell and velocity node into `out`.
///
/// `values` and `out` use the cell-major layout of [`DistributionField`].
pub fn transport_rhs_into<R: Real>(
    sgrid: &SpatialGrid<R>,
    vgrid: &VelocityGrid<R>,
    cfg: &WenoConfig<R>,
    values: &[R],
    out: &mut [R],
) -> Result<()> {
    let nv = vgrid.len();
    let ncell = sgrid.len();
    if values.len() != ncell * nv || out.len() != values.len() {
        return Err(Error::Config(format!(
            "state length {} does not match {ncell} cells x {nv} velocities",
            values.len()
        )));
    }
    let counts = sgrid.counts();
    for d in 0..sgrid.dims() {
        if counts[d] < cfg.window() {
            return Err(Error::Config(format!(
                "axis {d} has {} cells, WENO k={} needs {}",
                counts[d],
                cfg.k,
                cfg.window()
            )));
        }
    }
    out.iter_mut().for_each(|o| *o = R::zero());
    let kern = Kernel::new(cfg);
    let mut scratch = LineScratch::new(cfg.k, nv);
    for d in 0..sgrid.dims() {
        let speeds: Vec<R> = (0..nv).map(|j| vgrid.node(j)[d]).collect();
        let inv_dx = R::one() / sgrid.spacing()[d];
        let n = counts[d];
        let (lines, stride, line_start): (usize, usize, Box<dyn Fn(usize) -> usize>) = if d == 0 {
            (counts[1], counts[1], Box::new(|l| l))
        } else {
            let ny = counts[1];
            (counts[0], 1, Box::new(move |l| l * ny))
        };
        let mut cells = Vec::with_capacity(n + 2 * cfg.k);
        for line in 0..lines {
            let first = line_start(line);
            cells.clear();
            cells.extend(
                (-(cfg.k as isize)..(n + cfg.k) as isize).map(|g| first + ghost_index(g, n, sgrid.boundary()[d]) * stride),
            );
            scratch.line(&kern, &speeds, inv_dx, n, &cells, values, out);
        }
    }
    Ok(())
}

/// Per-line interface fluxes.
struct LineScratch<R> {
    k: usize,
    nv: usize,
    flux: Vec<R>,
}

impl<R: Real> LineScratch<R> {
    fn new(k: usize, nv: usize) -> Self {
        Self {
            k,
            nv,
            flux: Vec::new(),
        }
    }

    /// `cells[g + k]` is the flat index of line position `g` in `-k..n+k`.
    #[allow(clippy::too_many_arguments)]
    fn line(
        &mut self,
        kern: &Kernel<R>,
        speeds: &[R],
        inv_dx: R,
        n: usize,
        cells: &[usize],
        values: &[R],
        out: &mut [R],
    ) {
        let (k, nv) = (self.k, self.nv);
        self.flux.clear();
        self.flux.resize((n + 1) * nv, R::zero());
        let row = |g: usize| &values[cells[g] * nv..(cells[g] + 1) * nv];
        let zero = R::zero();
        // Interface p sits between line positions p-1 and p; rows p..p+2k-1
        // cover both upwind windows.
        for p in 0..=n {
            let flux = &mut self.flux[p * nv..(p + 1) * nv];
            match k {
                1 => {
                    let (l, r) = (row(p), row(p + 1));
                    for j in 0..nv {
                        let v = speeds[j];
                        flux[j] = if v > zero { v * l[j] } else { v * r[j] };
                    }
                }
                2 => {
                    let r = [row(p), row(p + 1), row(p + 2), row(p + 3)];
                    for j in 0..nv {
                        let v = speeds[j];
                        flux[j] = if v > zero {
                            v * kern.left2(r[0][j], r[1][j], r[2][j])
                        } else if v < zero {
                            v * kern.left2(r[3][j], r[2][j], r[1][j])
                        } else {
                            zero
                        };
                    }
                }
                _ => {
                    let r = [row(p), row(p + 1), row(p + 2), row(p + 3), row(p + 4), row(p + 5)];
                    for j in 0..nv {
                        let v = speeds[j];
                        flux[j] = if v > zero {
                            v * kern.left3(r[0][j], r[1][j], r[2][j], r[3][j], r[4][j])
                        } else if v < zero {
                            v * kern.left3(r[5][j], r[4][j], r[3][j], r[2][j], r[1][j])
                        } else {
                            zero
                        };
                    }
                }
            }
        }
        for i in 0..n {
            let cell = cells[i + k];
            let dst = &mut out[cell * nv..(cell + 1) * nv];
            let (lo, hi) = (&self.flux[i * nv..(i + 1) * nv], &self.flux[(i + 1) * nv..(i + 2) * nv]);
            for ((o, &a), &b) in dst.iter_mut().zip(lo).zip(hi) {
                *o -= (b - a) * inv_dx;
            }
        }
    }
}

/// Allocating variant of [`transport_rhs_into`].
pub fn transport_rhs<R: Real>(field: &DistributionField<R>, cfg: &WenoConfig<R>) -> Result<Vec<R>> {
    let mut out = vec![R::zero(); field.values.len()];
    transport_rhs_into(&field.sgrid, &field.vgrid, cfg, &field.values, &mut out)?;
    Ok(out)
}
