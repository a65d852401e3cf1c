//! Fast spectral Boltzmann operator for two-dimensional pseudo-Maxwellian
//! particles.
//!
//! The velocity box `[-V, V]^2` is mapped onto `[-pi, pi]^2`. The collision
//! integral is truncated to a ball of radius `R = lambda * pi` and written in
//! Carleman form, where the kernel of each Fourier mode pair splits into a sum
//! over `n_theta` directions of products `alpha_p(l) * alpha'_p(m)`. Each term
//! is then a product of two functions in physical space, so the whole
//! quadratic sum costs a handful of FFTs.
//!
//! The mode set is symmetric: `|k_d| <= N/2`, with the Nyquist coefficients
//! split evenly between `+N/2` and `-N/2`. Products are formed on a padded
//! grid of size `2N` so that the convolution is free of aliasing.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::phase_space::{DistributionField, VelocityGrid};
use crate::real::Real;

pub const DEFAULT_N_THETA: usize = 4;

/// Kernel constant making the loss term equal `rho * f`.
pub fn default_b0() -> f64 {
    1.0 / (2.0 * std::f64::consts::PI)
}

/// Truncation ratio `lambda = 2 / (3 + sqrt 2)`.
pub fn truncation_ratio() -> f64 {
    2.0 / (3.0 + std::f64::consts::SQRT_2)
}

/// `phi_R^2(s) = 2R sinc(Rs)` with `sinc(0) = 1`.
pub fn phi_r2<R: Real>(radius: R, s: R) -> R {
    let x = radius * s;
    let two_r = radius + radius;
    if x.abs() < R::lit(1e-8) {
        // Second-order Taylor term keeps full precision near the removable point.
        two_r * (R::one() - x * x / R::lit(6.0))
    } else {
        two_r * x.sin() / x
    }
}

#[derive(Clone, Copy, Debug)]
struct Mode {
    /// Position in the `N x N` DFT array.
    small: usize,
    /// Position in the padded `P x P` array.
    padded: usize,
    /// `c_l * exp(-i l . v0) / N^2`: DFT value to Fourier coefficient.
    to_coeff_phase: (f64, f64),
}

/// Immutable tables and FFT plans for one velocity grid.
#[derive(Clone)]
pub struct SpectralPlan<R: Real> {
    n: usize,
    padded: usize,
    extent: R,
    n_theta: usize,
    b0: R,
    lambda: R,
    radius: R,
    scale: R,
    modes: Vec<Mode>,
    /// One table per direction `theta_d = pi d / n_theta`, d = 1..=n_theta,
    /// plus the perpendicular ones when `n_theta` is odd.
    directions: Vec<Vec<R>>,
    /// Direction indices of `alpha_p` and `alpha'_p`.
    pairs: Vec<(usize, usize)>,
    /// `B(m, m)` on the padded layout.
    loss_diag: Vec<R>,
    fwd_n: Arc<dyn Fft<R>>,
    inv_n: Arc<dyn Fft<R>>,
    fwd_p: Arc<dyn Fft<R>>,
    inv_p: Arc<dyn Fft<R>>,
}

impl<R: Real> fmt::Debug for SpectralPlan<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralPlan")
            .field("n", &self.n)
            .field("padded", &self.padded)
            .field("extent", &self.extent)
            .field("n_theta", &self.n_theta)
            .field("b0", &self.b0)
            .field("lambda", &self.lambda)
            .field("radius", &self.radius)
            .finish()
    }
}

fn wrap(i: i64, n: usize) -> usize {
    i.rem_euclid(n as i64) as usize
}

/// Builds the plan for a `J x J` grid on `[-V, V]^2`.
pub fn plan_spectral<R: Real>(j: usize, extent: R, n_theta: usize, b0: R) -> Result<SpectralPlan<R>> {
    if j % 2 != 0 || j < 8 {
        return Err(Error::Config(format!("spectral grid needs even J >= 8, got {j}")));
    }
    if n_theta == 0 {
        return Err(Error::Config("n_theta must be at least 1".into()));
    }
    if !(extent > R::zero()) || !(b0 > R::zero()) {
        return Err(Error::Config("velocity extent and b0 must be positive".into()));
    }
    let n = j;
    let padded = 2 * n;
    let half = (n / 2) as i64;
    let lambda = truncation_ratio();
    let radius = lambda * std::f64::consts::PI;
    let v0 = -std::f64::consts::PI + std::f64::consts::PI / n as f64;

    let mut modes = Vec::with_capacity((n + 1) * (n + 1));
    let mut wavenumbers = Vec::with_capacity(modes.capacity());
    for l1 in -half..=half {
        for l2 in -half..=half {
            let c = if l1.abs() == half { 0.5 } else { 1.0 } * if l2.abs() == half { 0.5 } else { 1.0 };
            let ang = -((l1 + l2) as f64) * v0;
            let w = c / (n * n) as f64;
            modes.push(Mode {
                small: wrap(l1, n) * n + wrap(l2, n),
                padded: wrap(l1, padded) * padded + wrap(l2, padded),
                to_coeff_phase: (w * ang.cos(), w * ang.sin()),
            });
            wavenumbers.push((l1 as f64, l2 as f64));
        }
    }

    // Direction d has angle pi * d / n_theta (d = 1..=n_theta); perpendicular
    // angles coincide with existing ones when n_theta is even.
    let mut angles: Vec<f64> = (1..=n_theta)
        .map(|p| std::f64::consts::PI * p as f64 / n_theta as f64)
        .collect();
    let mut pairs = Vec::with_capacity(n_theta);
    for p in 0..n_theta {
        let perp = if n_theta % 2 == 0 {
            (p + n_theta / 2) % n_theta
        } else {
            angles.push(angles[p] + std::f64::consts::FRAC_PI_2);
            angles.len() - 1
        };
        pairs.push((p, perp));
    }
    let directions: Vec<Vec<R>> = angles
        .iter()
        .map(|&th| {
            let (s, c) = th.sin_cos();
            let mut table = vec![R::zero(); padded * padded];
            for (m, &(l1, l2)) in modes.iter().zip(&wavenumbers) {
                table[m.padded] = R::lit(phi_r2(radius, l1 * c + l2 * s));
            }
            table
        })
        .collect();
    let weight = std::f64::consts::PI / n_theta as f64;
    let mut loss_diag = vec![R::zero(); padded * padded];
    for m in &modes {
        let s = pairs.iter().fold(0.0, |acc, &(a, b)| {
            acc + directions[a][m.padded].as_f64() * directions[b][m.padded].as_f64()
        });
        loss_diag[m.padded] = R::lit(weight * s);
    }

    let mut planner = FftPlanner::<R>::new();
    let s = extent.as_f64() / std::f64::consts::PI;
    Ok(SpectralPlan {
        n,
        padded,
        extent,
        n_theta,
        b0,
        lambda: R::lit(lambda),
        radius: R::lit(radius),
        scale: R::lit(2.0 * b0.as_f64() * s * s),
        modes,
        directions,
        pairs,
        loss_diag,
        fwd_n: planner.plan_fft_forward(n),
        inv_n: planner.plan_fft_inverse(n),
        fwd_p: planner.plan_fft_forward(padded),
        inv_p: planner.plan_fft_inverse(padded),
    })
}

/// Per-worker buffers for [`SpectralPlan::evaluate`].
pub struct Workspace<R> {
    small: Vec<Complex<R>>,
    small_tmp: Vec<Complex<R>>,
    spectrum: Vec<Complex<R>>,
    buf: Vec<Complex<R>>,
    tmp: Vec<Complex<R>>,
    scratch: Vec<Complex<R>>,
    dirs: Vec<Vec<R>>,
    func: Vec<R>,
    loss: Vec<R>,
}

/// Fourier coefficients `f_k`, `k in [-N/2, N/2)^2`, stored row-major by
/// `(k1 + N/2, k2 + N/2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSlice<R> {
    pub n: usize,
    pub coeffs: Vec<Complex<R>>,
}

fn transpose<T: Copy>(src: &[T], dst: &mut [T], n: usize) {
    for r in 0..n {
        for c in 0..n {
            dst[c * n + r] = src[r * n + c];
        }
    }
}

fn fft2<R: Real>(
    fft: &dyn Fft<R>,
    data: &mut [Complex<R>],
    n: usize,
    tmp: &mut [Complex<R>],
    scratch: &mut [Complex<R>],
) {
    fft.process_with_scratch(data, scratch);
    transpose(data, tmp, n);
    fft.process_with_scratch(tmp, scratch);
    transpose(tmp, data, n);
}

impl<R: Real> SpectralPlan<R> {
    pub fn modes_per_axis(&self) -> usize {
        self.n
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn lambda(&self) -> R {
        self.lambda
    }

    /// Truncation radius in rescaled velocity units.
    pub fn radius(&self) -> R {
        self.radius
    }

    pub fn b0(&self) -> R {
        self.b0
    }

    pub fn extent(&self) -> R {
        self.extent
    }

    /// `2 b0 s^2` with `s = V / pi`: rescaled-unit operator to physical one.
    pub fn output_scale(&self) -> R {
        self.scale
    }

    fn angle(&self, p: usize) -> R {
        R::PI() * R::from_usize_lossy(p) / R::from_usize_lossy(self.n_theta)
    }

    /// `alpha_p(l) = phi_R^2(l . e_theta_p)` for `p = 1..=n_theta`.
    pub fn alpha(&self, p: usize, l: [i64; 2]) -> R {
        let th = self.angle(p);
        let s = R::lit(l[0] as f64) * th.cos() + R::lit(l[1] as f64) * th.sin();
        phi_r2(self.radius, s)
    }

    /// `alpha'_p(m) = phi_R^2(m . e_(theta_p + pi/2))`.
    pub fn alpha_prime(&self, p: usize, m: [i64; 2]) -> R {
        let th = self.angle(p) + R::FRAC_PI_2();
        let s = R::lit(m[0] as f64) * th.cos() + R::lit(m[1] as f64) * th.sin();
        phi_r2(self.radius, s)
    }

    /// Kernel mode `B(l, m) = pi / n_theta * sum_p alpha_p(l) alpha'_p(m)`.
    pub fn kernel_mode(&self, l: [i64; 2], m: [i64; 2]) -> R {
        let s = (1..=self.n_theta).fold(R::zero(), |acc, p| {
            acc + self.alpha(p, l) * self.alpha_prime(p, m)
        });
        R::PI() / R::from_usize_lossy(self.n_theta) * s
    }

    pub fn workspace(&self) -> Workspace<R> {
        let (n2, p2) = (self.n * self.n, self.padded * self.padded);
        let z = Complex::new(R::zero(), R::zero());
        let scratch_len = [&self.fwd_n, &self.inv_n, &self.fwd_p, &self.inv_p]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Workspace {
            small: vec![z; n2],
            small_tmp: vec![z; n2],
            spectrum: vec![z; p2],
            buf: vec![z; p2],
            tmp: vec![z; p2],
            scratch: vec![z; scratch_len],
            dirs: vec![vec![R::zero(); p2]; self.directions.len()],
            func: vec![R::zero(); p2],
            loss: vec![R::zero(); p2],
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n * self.n {
            return Err(Error::Config(format!(
                "slice has {len} entries, spectral plan expects {}",
                self.n * self.n
            )));
        }
        Ok(())
    }

    /// Fourier coefficients of a grid slice.
    pub fn fourier_slice(&self, slice: &[R]) -> Result<FourierSlice<R>> {
        self.check_len(slice.len())?;
        let n = self.n;
        let mut ws = self.workspace();
        for (d, &s) in ws.small.iter_mut().zip(slice) {
            *d = Complex::new(s, R::zero());
        }
        fft2(&*self.fwd_n, &mut ws.small, n, &mut ws.small_tmp, &mut ws.scratch);
        let half = (n / 2) as i64;
        let v0 = -std::f64::consts::PI + std::f64::consts::PI / n as f64;
        let mut coeffs = Vec::with_capacity(n * n);
        for k1 in -half..half {
            for k2 in -half..half {
                let ang = -((k1 + k2) as f64) * v0;
                let ph = Complex::new(R::lit(ang.cos()), R::lit(ang.sin()));
                let norm = R::from_usize_lossy(n * n);
                coeffs.push(ws.small[wrap(k1, n) * n + wrap(k2, n)] * ph / norm);
            }
        }
        Ok(FourierSlice { n, coeffs })
    }

    /// Grid values of a set of Fourier coefficients (real part).
    pub fn grid_values(&self, fs: &FourierSlice<R>) -> Result<Vec<R>> {
        if fs.n != self.n || fs.coeffs.len() != self.n * self.n {
            return Err(Error::Config("Fourier slice does not match the plan".into()));
        }
        let n = self.n;
        let mut ws = self.workspace();
        let half = (n / 2) as i64;
        let v0 = -std::f64::consts::PI + std::f64::consts::PI / n as f64;
        let mut idx = 0;
        for k1 in -half..half {
            for k2 in -half..half {
                let ang = ((k1 + k2) as f64) * v0;
                let ph = Complex::new(R::lit(ang.cos()), R::lit(ang.sin()));
                ws.small[wrap(k1, n) * n + wrap(k2, n)] = fs.coeffs[idx] * ph;
                idx += 1;
            }
        }
        fft2(&*self.inv_n, &mut ws.small, n, &mut ws.small_tmp, &mut ws.scratch);
        Ok(ws.small.iter().map(|c| c.re).collect())
    }

    /// Fills the padded spectrum, the direction functions, the function
    /// itself and the loss frequency in physical (padded-grid) space.
    fn prepare(&self, ws: &mut Workspace<R>, slice: &[R]) {
        let (n, p) = (self.n, self.padded);
        let zero = Complex::new(R::zero(), R::zero());
        for (d, &s) in ws.small.iter_mut().zip(slice) {
            *d = Complex::new(s, R::zero());
        }
        fft2(&*self.fwd_n, &mut ws.small, n, &mut ws.small_tmp, &mut ws.scratch);
        ws.spectrum.iter_mut().for_each(|c| *c = zero);
        for m in &self.modes {
            let ph = Complex::new(R::lit(m.to_coeff_phase.0), R::lit(m.to_coeff_phase.1));
            ws.spectrum[m.padded] = ws.small[m.small] * ph;
        }
        // Each inverse transform of a real even multiplier times the spectrum is
        // real, so two of them share one complex transform.
        let nd = self.directions.len();
        let mut d = 0;
        while d < nd {
            let second = if d + 1 < nd { Some(d + 1) } else { None };
            for (i, b) in ws.buf.iter_mut().enumerate() {
                let h = ws.spectrum[i];
                let a = self.directions[d][i];
                let c = second.map_or(R::zero(), |e| self.directions[e][i]);
                // a*h + i*c*h
                *b = Complex::new(a * h.re - c * h.im, a * h.im + c * h.re);
            }
            fft2(&*self.inv_p, &mut ws.buf, p, &mut ws.tmp, &mut ws.scratch);
            for (i, b) in ws.buf.iter().enumerate() {
                ws.dirs[d][i] = b.re;
                if let Some(e) = second {
                    ws.dirs[e][i] = b.im;
                }
            }
            d += 2;
        }
        for (i, b) in ws.buf.iter_mut().enumerate() {
            let h = ws.spectrum[i];
            let c = self.loss_diag[i];
            *b = Complex::new(h.re - c * h.im, h.im + c * h.re);
        }
        fft2(&*self.inv_p, &mut ws.buf, p, &mut ws.tmp, &mut ws.scratch);
        for (i, b) in ws.buf.iter().enumerate() {
            ws.func[i] = b.re;
            ws.loss[i] = b.im;
        }
    }

    /// Projects a padded-grid function back onto the velocity grid, scaled
    /// to physical units. Returns the largest imaginary residue.
    fn finish(&self, ws: &mut Workspace<R>, product: impl Fn(&Workspace<R>, usize) -> R, out: &mut [R]) -> R {
        let (n, p) = (self.n, self.padded);
        for i in 0..p * p {
            ws.buf[i] = Complex::new(product(ws, i), R::zero());
        }
        fft2(&*self.fwd_p, &mut ws.buf, p, &mut ws.tmp, &mut ws.scratch);
        let zero = Complex::new(R::zero(), R::zero());
        ws.small.iter_mut().for_each(|c| *c = zero);
        // Output mode weight c_k * exp(i k . v0) / P^2. The forward phase
        // stored in the table is c_k * exp(-i k . v0) / N^2, so conjugate it
        // and rescale the magnitude.
        let ratio = R::from_usize_lossy(n * n) / R::from_usize_lossy(p * p);
        for m in &self.modes {
            let ph = Complex::new(R::lit(m.to_coeff_phase.0), -R::lit(m.to_coeff_phase.1)) * ratio;
            ws.small[m.small] += ws.buf[m.padded] * ph;
        }
        fft2(&*self.inv_n, &mut ws.small, n, &mut ws.small_tmp, &mut ws.scratch);
        let mut im = R::zero();
        for (o, c) in out.iter_mut().zip(&ws.small) {
            *o = self.scale * c.re;
            im = im.max(c.im.abs());
        }
        self.scale * im
    }

    fn gain_at(&self, ws: &Workspace<R>, i: usize) -> R {
        let w = R::PI() / R::from_usize_lossy(self.n_theta);
        w * self
            .pairs
            .iter()
            .fold(R::zero(), |acc, &(a, b)| acc + ws.dirs[a][i] * ws.dirs[b][i])
    }

    /// Evaluates `Q(f, f)` on the grid. Returns the largest magnitude of the
    /// discarded imaginary part.
    pub fn evaluate(&self, ws: &mut Workspace<R>, slice: &[R], out: &mut [R]) -> Result<R> {
        self.check_len(slice.len())?;
        self.check_len(out.len())?;
        self.prepare(ws, slice);
        Ok(self.finish(ws, |ws, i| self.gain_at(ws, i) - ws.func[i] * ws.loss[i], out))
    }

    /// Gain and loss parts separately, `Q = gain - loss`.
    pub fn evaluate_parts(&self, ws: &mut Workspace<R>, slice: &[R], gain: &mut [R], loss: &mut [R]) -> Result<()> {
        self.check_len(slice.len())?;
        self.check_len(gain.len())?;
        self.check_len(loss.len())?;
        self.prepare(ws, slice);
        self.finish(ws, |ws, i| self.gain_at(ws, i), gain);
        self.finish(ws, |ws, i| ws.func[i] * ws.loss[i], loss);
        Ok(())
    }

    fn check_grid(&self, vgrid: &VelocityGrid<R>) -> Result<()> {
        let c = vgrid.counts();
        if vgrid.dims() != 2 || c != [self.n, self.n] || vgrid.extent() != self.extent {
            return Err(Error::Config(format!(
                "spectral plan for {0}x{0} on [-{1}, {1}]^2 does not match velocity grid {c:?}",
                self.n, self.extent
            )));
        }
        Ok(())
    }

    /// Adds `scale * Q(f_i)` for every cell into `out`.
    pub fn accumulate(&self, vgrid: &VelocityGrid<R>, scale: R, values: &[R], out: &mut [R]) -> Result<()> {
        self.check_grid(vgrid)?;
        let nv = vgrid.len();
        if values.len() % nv != 0 || out.len() != values.len() {
            return Err(Error::Config("state length is not a multiple of the velocity grid".into()));
        }
        let mut ws = self.workspace();
        let mut q = vec![R::zero(); nv];
        for (src, dst) in values.chunks_exact(nv).zip(out.chunks_exact_mut(nv)) {
            if src.iter().all(|&x| x == R::zero()) {
                continue;
            }
            self.evaluate(&mut ws, src, &mut q)?;
            for (o, &x) in dst.iter_mut().zip(&q) {
                *o += scale * x;
            }
        }
        Ok(())
    }
}

/// Single-slice convenience wrapper allocating its own workspace.
pub fn boltzmann_q<R: Real>(plan: &SpectralPlan<R>, slice: &[R]) -> Result<Vec<R>> {
    let mut out = vec![R::zero(); slice.len()];
    plan.evaluate(&mut plan.workspace(), slice, &mut out)?;
    Ok(out)
}

/// Collision contribution `Q(f) / eps` of a whole field.
pub fn boltzmann_rhs<R: Real>(field: &DistributionField<R>, plan: &SpectralPlan<R>, epsilon: R) -> Result<Vec<R>> {
    let mut out = vec![R::zero(); field.values.len()];
    plan.accumulate(&field.vgrid, R::one() / epsilon, &field.values, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{maxwellian, moments};
    use proptest::prelude::*;

    fn plan(j: usize, v: f64) -> SpectralPlan<f64> {
        plan_spectral(j, v, DEFAULT_N_THETA, default_b0()).unwrap()
    }

    #[test]
    fn constants() {
        assert!((truncation_ratio() - 0.45308).abs() < 1e-5);
        let p = plan(16, 8.0);
        let two_r = 4.0 * std::f64::consts::PI / (3.0 + 2f64.sqrt());
        assert!((phi_r2(p.radius(), 0.0) - two_r).abs() < 1e-14);
        assert!((two_r - 2.8468).abs() < 1e-4);
        for th in 1..=4 {
            assert_eq!(p.alpha_prime(th, [0, 0]), 2.0 * p.radius());
        }
        assert!(plan_spectral::<f64>(15, 8.0, 4, 0.1).is_err());
        assert!(plan_spectral::<f64>(6, 8.0, 4, 0.1).is_err());
        assert!(plan_spectral::<f64>(16, 8.0, 0, 0.1).is_err());
    }

    #[test]
    fn sinc_is_smooth_at_zero() {
        let r = 1.4;
        for s in [1e-10, 1e-9, 2e-8, 1e-7] {
            let direct = 2.0 * r * (r * s as f64).sin() / (r * s);
            assert!((phi_r2(r, s) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn alpha_tables_are_even() {
        let p = plan(16, 8.0);
        for th in 1..=4 {
            for l in [[1, 3], [-4, 2], [8, -8], [5, 0]] {
                assert_eq!(p.alpha(th, l), p.alpha(th, [-l[0], -l[1]]));
            }
        }
    }

    #[test]
    fn fourier_round_trip() {
        let p = plan(16, 8.0);
        let slice: Vec<f64> = (0..256).map(|i| ((i * 31) % 17) as f64 * 0.25 + 1.0).collect();
        let fs = p.fourier_slice(&slice).unwrap();
        let back = p.grid_values(&fs).unwrap();
        for (a, b) in slice.iter().zip(&back) {
            assert!((a - b).abs() <= 1e-12 * a.abs());
        }
    }

    #[test]
    fn zero_slice_maps_to_zero() {
        let p = plan(16, 8.0);
        let q = boltzmann_q(&p, &[0.0; 256]).unwrap();
        assert!(q.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_mismatched_slice() {
        let p = plan(16, 8.0);
        assert!(matches!(boltzmann_q(&p, &[1.0; 100]), Err(Error::Config(_))));
    }

    #[test]
    fn maxwellian_is_nearly_annihilated() {
        let p = plan(32, 8.0);
        let g = VelocityGrid::square(8.0, 32).unwrap();
        let m = maxwellian(&g, 1.0, [0.0, 0.0], 1.0).unwrap();
        let q = boltzmann_q(&p, &m).unwrap();
        let worst = q.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(worst <= 1e-5, "{worst}");
    }

    #[test]
    fn loss_matches_density_times_f() {
        // The truncated loss integral covers a disk of radius lambda * V
        // around each node, so it equals rho f where that disk holds the mass.
        let p = plan(64, 12.0);
        let g = VelocityGrid::square(12.0, 64).unwrap();
        let u = [0.3, -0.2];
        let m = maxwellian(&g, 0.7, u, 1.0).unwrap();
        let rho = moments(&g, &m).unwrap().rho;
        let mut ws = p.workspace();
        let (mut gain, mut loss) = (vec![0.0; m.len()], vec![0.0; m.len()]);
        p.evaluate_parts(&mut ws, &m, &mut gain, &mut loss).unwrap();
        let mut worst_core: f64 = 0.0;
        let mut worst: f64 = 0.0;
        let peak = m.iter().fold(0.0f64, |a, &b| a.max(b));
        for ((v, l), f) in g.nodes().zip(&loss).zip(&m) {
            let r = ((v[0] - u[0]).powi(2) + (v[1] - u[1]).powi(2)).sqrt();
            if r <= 1.5 {
                worst_core = worst_core.max((l - rho * f).abs() / (rho * f));
            }
            worst = worst.max((l - rho * f).abs() / (rho * peak));
        }
        assert!(worst_core <= 1e-3, "{worst_core}");
        assert!(worst <= 1e-3, "{worst}");
    }

    #[test]
    fn real_output_for_real_input() {
        let p = plan(16, 8.0);
        let slice: Vec<f64> = (0..256).map(|i| 1.0 + ((i * 13) % 7) as f64).collect();
        let mut out = vec![0.0; 256];
        let im = p.evaluate(&mut p.workspace(), &slice, &mut out).unwrap();
        let re = out.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(im <= 1e-10 * re, "{im} vs {re}");
    }

    proptest! {
        #[test]
        fn quadratic_homogeneity(a in 0.1f64..5.0, seed in 0u64..1000) {
            let p = plan(8, 6.0);
            let slice: Vec<f64> = (0..64).map(|i| 0.5 + (((i as u64 * 2654435761 + seed) % 997) as f64) / 997.0).collect();
            let scaled: Vec<f64> = slice.iter().map(|x| a * x).collect();
            let q = boltzmann_q(&p, &slice).unwrap();
            let qa = boltzmann_q(&p, &scaled).unwrap();
            let norm = q.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
            for (x, y) in q.iter().zip(&qa) {
                prop_assert!((a * a * x - y).abs() <= 1e-12 * a * a * norm);
            }
        }
    }
}
