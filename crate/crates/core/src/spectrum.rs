//! Eigenvalue diagnostics for linearized collision and semidiscrete operators.
//!
//! Operators are matrix-free closures on small phase-space vectors. They are
//! assembled column by column into a dense matrix and handed to a real Schur
//! decomposition; the resulting eigenvalues are split into a slow and a fast
//! cluster, which is the geometry projective integration relies on.

use std::fmt;
use std::io::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrators::Rhs;
use crate::bgk::{bgk_accumulate, FrequencyMode};
use crate::phase_space::{Boundary, DistributionField, SpatialGrid, VelocityGrid};
use crate::system::{CollisionModel, KineticSystem};
use crate::weno::WenoConfig;
use crate::real::Real;

/// Largest dimension accepted by the dense eigensolver.
pub const MAX_DENSE_DIM: usize = 4096;

/// Largest tolerated deviation of the discrete Gram matrix from the identity.
pub const GRAM_TOLERANCE: f64 = 1e-2;

/// Default probe increment relative to the norm of the linearization state.
pub const DEFAULT_PROBE_SCALE: f64 = 1e-7;

/// Relative threshold below which an eigenvalue counts as part of the kernel.
pub const KERNEL_THRESHOLD: f64 = 1e-9;

/// Smallest consecutive magnitude ratio accepted as a cluster boundary.
pub const MIN_SPLIT_RATIO: f64 = 2.0;

type Action<R> = Box<dyn Fn(&[R], &mut [R]) -> Result<()> + Send + Sync>;

/// A linear map on vectors of length `n`.
pub struct LinearizedOperator<R> {
    dim: usize,
    description: String,
    action: Action<R>,
}

impl<R: Real> LinearizedOperator<R> {
    pub fn new<F>(dim: usize, description: impl Into<String>, action: F) -> Self
    where
        F: Fn(&[R], &mut [R]) -> Result<()> + Send + Sync + 'static,
    {
        Self {
            dim,
            description: description.into(),
            action: Box::new(action),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn apply_into(&self, x: &[R], out: &mut [R]) -> Result<()> {
        if x.len() != self.dim || out.len() != self.dim {
            return Err(Error::Config(format!(
                "operator of dimension {} applied to vectors of length {} and {}",
                self.dim,
                x.len(),
                out.len()
            )));
        }
        (self.action)(x, out)
    }

    pub fn apply(&self, x: &[R]) -> Result<Vec<R>> {
        let mut out = vec![R::zero(); self.dim];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    /// Dense matrix with entry `(i, j)` equal to `(A e_j)_i`.
    pub fn assemble(&self) -> Result<DMatrix<f64>> {
        if self.dim > MAX_DENSE_DIM {
            return Err(Error::Config(format!(
                "operator dimension {} exceeds the dense limit {MAX_DENSE_DIM}",
                self.dim
            )));
        }
        let n = self.dim;
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![R::zero(); n];
        let mut col = vec![R::zero(); n];
        for j in 0..n {
            e[j] = R::one();
            self.apply_into(&e, &mut col)?;
            e[j] = R::zero();
            for (i, c) in col.iter().enumerate() {
                m[(i, j)] = c.as_f64();
            }
        }
        Ok(m)
    }
}

impl<R> fmt::Debug for LinearizedOperator<R> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearizedOperator")
            .field("dim", &self.dim)
            .field("description", &self.description)
            .finish()
    }
}

/// Standard Gaussian weight `(2 pi)^(-D/2) exp(-|v|^2 / 2)`.
pub fn gaussian_weight<R: Real>(dims: usize, v: [R; 2]) -> R {
    let two_pi = R::TAU();
    let norm = if dims == 1 { two_pi.sqrt() } else { two_pi };
    let v2 = (0..dims).fold(R::zero(), |a, d| a + v[d] * v[d]);
    (-v2 / R::lit(2.0)).exp() / norm
}

/// Orthonormal collision invariants `1, v_1, ..., v_D, (|v|^2 - D) / sqrt(2D)`
/// at a velocity. The returned vector has `D + 2` entries.
pub fn psi<R: Real>(dims: usize, v: [R; 2]) -> Vec<R> {
    let d = R::from_usize_lossy(dims);
    let v2 = (0..dims).fold(R::zero(), |a, k| a + v[k] * v[k]);
    let mut out = Vec::with_capacity(dims + 2);
    out.push(R::one());
    out.extend_from_slice(&v[..dims]);
    out.push((v2 - d) / (R::lit(2.0) * d).sqrt());
    out
}

/// Basis values and quadrature-times-weight factors on every node.
struct Basis<R> {
    rank: usize,
    /// `psi[j * rank + k] = Psi_k(v_j)`.
    psi: Vec<R>,
    /// Quadrature weight times Gaussian weight at each node.
    mass: Vec<R>,
}

impl<R: Real> Basis<R> {
    fn new(vgrid: &VelocityGrid<R>) -> Self {
        let dims = vgrid.dims();
        let rank = dims + 2;
        let mut psi_all = Vec::with_capacity(vgrid.len() * rank);
        let mut mass = Vec::with_capacity(vgrid.len());
        for v in vgrid.nodes() {
            psi_all.extend(psi(dims, v));
            mass.push(vgrid.weight() * gaussian_weight(dims, v));
        }
        Self {
            rank,
            psi: psi_all,
            mass,
        }
    }

    /// Modified Gram-Schmidt in the discrete weighted inner product, so that
    /// the projection is exactly idempotent on the grid.
    fn orthonormalized(mut self) -> Self {
        let (r, n) = (self.rank, self.mass.len());
        for a in 0..r {
            for b in 0..a {
                let dot = (0..n).fold(R::zero(), |acc, j| acc + self.mass[j] * self.psi[j * r + a] * self.psi[j * r + b]);
                for j in 0..n {
                    let pb = self.psi[j * r + b];
                    self.psi[j * r + a] -= dot * pb;
                }
            }
            let norm = (0..n)
                .fold(R::zero(), |acc, j| acc + self.mass[j] * self.psi[j * r + a] * self.psi[j * r + a])
                .sqrt();
            for j in 0..n {
                self.psi[j * r + a] /= norm;
            }
        }
        self
    }

    fn gram(&self) -> Vec<R> {
        let r = self.rank;
        let mut g = vec![R::zero(); r * r];
        for (j, &w) in self.mass.iter().enumerate() {
            let p = &self.psi[j * r..(j + 1) * r];
            for a in 0..r {
                for b in 0..r {
                    g[a * r + b] += w * p[a] * p[b];
                }
            }
        }
        g
    }

    /// `out = g - Pi g`.
    fn complement(&self, g: &[R], out: &mut [R]) {
        let r = self.rank;
        let mut coef = [R::zero(); 4];
        for (j, (&w, &gj)) in self.mass.iter().zip(g).enumerate() {
            for (k, c) in coef[..r].iter_mut().enumerate() {
                *c += w * self.psi[j * r + k] * gj;
            }
        }
        for (j, (o, &gj)) in out.iter_mut().zip(g).enumerate() {
            let proj = (0..r).fold(R::zero(), |a, k| a + coef[k] * self.psi[j * r + k]);
            *o = gj - proj;
        }
    }
}

/// Discrete Gram matrix `<Psi_a, Psi_b>` in row-major order.
pub fn gram_matrix<R: Real>(vgrid: &VelocityGrid<R>) -> Vec<R> {
    Basis::new(vgrid).gram()
}

/// Largest entry of `|G - I|`.
pub fn gram_deviation<R: Real>(vgrid: &VelocityGrid<R>) -> R {
    let basis = Basis::new(vgrid);
    let r = basis.rank;
    basis
        .gram()
        .iter()
        .enumerate()
        .map(|(idx, &x)| {
            let id = if idx / r == idx % r { R::one() } else { R::zero() };
            (x - id).abs()
        })
        .fold(R::zero(), R::max)
}

/// `g -> -(nu / eps) (I - Pi) g` on a single velocity slice.
pub fn build_linearized_bgk<R: Real>(vgrid: &VelocityGrid<R>, nu: R, epsilon: R) -> Result<LinearizedOperator<R>> {
    if !(nu > R::zero()) || !(epsilon > R::zero()) || !nu.is_finite() || !epsilon.is_finite() {
        return Err(Error::Config(format!("need positive finite nu and epsilon, got {nu} and {epsilon}")));
    }
    if vgrid.len() > MAX_DENSE_DIM {
        return Err(Error::Config(format!(
            "velocity grid of {} nodes exceeds the limit {MAX_DENSE_DIM}",
            vgrid.len()
        )));
    }
    let dev = gram_deviation(vgrid).as_f64();
    if dev > GRAM_TOLERANCE {
        return Err(Error::Diagnostic(format!(
            "velocity grid too coarse: Gram matrix deviates from the identity by {dev:.3e}"
        )));
    }
    let basis = Basis::new(vgrid).orthonormalized();
    let rate = -nu / epsilon;
    let desc = format!("linearized BGK, nu={nu}, eps={epsilon}, J={}", vgrid.len());
    Ok(LinearizedOperator::new(vgrid.len(), desc, move |g: &[R], out: &mut [R]| {
        basis.complement(g, out);
        out.iter_mut().for_each(|o| *o *= rate);
        Ok(())
    }))
}

/// Central-difference Jacobian of `rhs` at `state`.
///
/// The increment is `scale * |state|_2`, with `scale` defaulting to
/// [`DEFAULT_PROBE_SCALE`].
pub fn jacobian_probe<R, S>(rhs: S, state: Vec<R>, scale: Option<R>, description: impl Into<String>) -> Result<LinearizedOperator<R>>
where
    R: Real,
    S: Rhs<R> + Send + Sync + 'static,
{
    if let Some(i) = crate::real::first_non_finite(&state) {
        return Err(Error::Domain(format!("linearization state is not finite at index {i}")));
    }
    let norm = state.iter().fold(R::zero(), |a, &x| a + x * x).sqrt();
    let scale = scale.unwrap_or_else(|| R::lit(DEFAULT_PROBE_SCALE));
    let eta = scale * norm;
    if !(eta > R::zero()) || !eta.is_finite() {
        return Err(Error::Domain(format!("probe increment {eta} is not positive and finite")));
    }
    let n = state.len();
    let action = move |u: &[R], out: &mut [R]| -> Result<()> {
        let plus: Vec<R> = state.iter().zip(u).map(|(&s, &x)| s + eta * x).collect();
        let minus: Vec<R> = state.iter().zip(u).map(|(&s, &x)| s - eta * x).collect();
        let mut lo = vec![R::zero(); n];
        rhs.eval(&plus, out)?;
        rhs.eval(&minus, &mut lo)?;
        let inv = R::one() / (R::lit(2.0) * eta);
        for (o, l) in out.iter_mut().zip(&lo) {
            *o = (*o - *l) * inv;
        }
        if let Some(i) = crate::real::first_non_finite(out) {
            return Err(Error::Domain(format!("probe produced a non-finite value at index {i}")));
        }
        Ok(())
    };
    Ok(LinearizedOperator::new(n, description, action))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cluster {
    Slow,
    Fast,
}

#[derive(Clone, Debug)]
pub struct SpectrumReport {
    /// Sorted by increasing magnitude.
    pub eigenvalues: Vec<Complex64>,
    pub clusters: Vec<Cluster>,
    /// `min |fast| / max |slow|`; 1 when no split was found.
    pub gap_ratio: f64,
    /// Eigenvalues treated as zero.
    pub kernel_dim: usize,
}

impl SpectrumReport {
    pub fn of_cluster(&self, c: Cluster) -> impl Iterator<Item = Complex64> + '_ {
        self.eigenvalues
            .iter()
            .zip(&self.clusters)
            .filter(move |(_, &k)| k == c)
            .map(|(&z, _)| z)
    }

    pub fn fast_count(&self) -> usize {
        self.clusters.iter().filter(|&&c| c == Cluster::Fast).count()
    }

    pub fn slow_count(&self) -> usize {
        self.eigenvalues.len() - self.fast_count()
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Writes `re,im` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("re,im\n");
        for z in &self.eigenvalues {
            out.push_str(&format!("{:.16e},{:.16e}\n", z.re, z.im));
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Eigenvalues of a dense matrix.
pub fn dense_eigenvalues(m: DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Config("eigenvalues need a square matrix".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    if m.iter().all(|&x| x == 0.0) {
        return Ok(vec![Complex64::new(0.0, 0.0); n]);
    }
    // Deflation tolerances relative to the largest entry; machine epsilon
    // stalls on tightly clustered eigenvalues.
    for eps in [1e-14, 1e-12, 1e-10] {
        if let Some(schur) = Schur::try_new(m.clone(), eps, 200 * n) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    Err(Error::NonConvergent {
        residual: f64::INFINITY,
    })
}

/// Splits eigenvalues into slow and fast clusters.
///
/// Magnitudes are sorted; entries below [`KERNEL_THRESHOLD`] times the largest
/// form the kernel. The split is placed at the largest ratio between
/// consecutive nonzero magnitudes when it reaches [`MIN_SPLIT_RATIO`], and
/// otherwise between the kernel and the rest.
pub fn cluster(mut eigenvalues: Vec<Complex64>) -> SpectrumReport {
    eigenvalues.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let n = eigenvalues.len();
    let mags: Vec<f64> = eigenvalues.iter().map(|z| z.norm()).collect();
    let top = mags.last().copied().unwrap_or(0.0);
    let kernel_dim = mags.iter().take_while(|&&m| m <= KERNEL_THRESHOLD * top).count();
    if top == 0.0 || kernel_dim == n {
        return SpectrumReport {
            clusters: vec![Cluster::Slow; n],
            eigenvalues,
            gap_ratio: 1.0,
            kernel_dim: n,
        };
    }
    let mut split = None;
    let mut best = MIN_SPLIT_RATIO;
    for i in kernel_dim..n.saturating_sub(1) {
        let r = mags[i + 1] / mags[i];
        if r >= best {
            best = r;
            split = Some(i + 1);
        }
    }
    let split = match split {
        Some(s) => s,
        None if kernel_dim > 0 => kernel_dim,
        None => {
            return SpectrumReport {
                clusters: vec![Cluster::Slow; n],
                eigenvalues,
                gap_ratio: 1.0,
                kernel_dim,
            }
        }
    };
    let slow_max = mags[split - 1];
    let gap_ratio = if slow_max > 0.0 { mags[split] / slow_max } else { f64::INFINITY };
    let clusters = (0..n).map(|i| if i < split { Cluster::Slow } else { Cluster::Fast }).collect();
    SpectrumReport {
        eigenvalues,
        clusters,
        gap_ratio,
        kernel_dim,
    }
}

/// Dense spectrum of an operator with a two-cluster split.
///
/// `count = 0` keeps every eigenvalue. Otherwise only the `count` eigenvalues
/// with the largest real part, the slowest decaying modes, are kept and
/// clustered.
pub fn spectrum<R: Real>(op: &LinearizedOperator<R>, count: usize) -> Result<SpectrumReport> {
    let mut eig = dense_eigenvalues(op.assemble()?)?;
    if count > 0 && count < eig.len() {
        eig.sort_by(|a, b| b.re.total_cmp(&a.re));
        eig.truncate(count);
    }
    Ok(cluster(eig))
}

/// Linearization of a BGK model about a smooth periodic Maxwellian state with
/// `rho(x) = 1 + 0.5 sin(2 pi x)` on `cells` cells of `[0, 1]`.
///
/// With a constant frequency and no transport the exact collision-only
/// linearization on one velocity slice is returned instead.
pub fn bgk_model_operator(
    vgrid: &VelocityGrid<f64>,
    frequency: FrequencyMode<f64>,
    epsilon: f64,
    cells: usize,
    transport: bool,
) -> Result<LinearizedOperator<f64>> {
    if let (FrequencyMode::Constant(nu), false) = (frequency, transport) {
        return build_linearized_bgk(vgrid, nu, epsilon);
    }
    let sgrid = SpatialGrid::line(0.0, 1.0, cells, Boundary::Periodic)?;
    let n = sgrid.len() * vgrid.len();
    if n > MAX_DENSE_DIM {
        return Err(Error::Config(format!(
            "{cells} cells times {} velocities exceeds the dense limit {MAX_DENSE_DIM}",
            vgrid.len()
        )));
    }
    let field = DistributionField::from_macroscopic(sgrid, vgrid.clone(), epsilon, |x| {
        (1.0 + 0.5 * (std::f64::consts::TAU * x[0]).sin(), [0.0, 0.0], 1.0)
    })?;
    let desc = format!(
        "BGK nu={}, eps={epsilon}, {cells} cells, J={}{}",
        match frequency {
            FrequencyMode::Constant(nu) => nu.to_string(),
            FrequencyMode::Density => "rho".into(),
        },
        vgrid.len(),
        if transport { ", with transport" } else { "" }
    );
    if transport {
        let sys = KineticSystem::for_field(&field, WenoConfig::with_order(2)?, CollisionModel::Bgk(frequency))?;
        jacobian_probe(sys, field.values, None, desc)
    } else {
        let vg = vgrid.clone();
        let scale = 1.0 / epsilon;
        let rhs = move |x: &[f64], out: &mut [f64]| -> Result<()> {
            out.fill(0.0);
            bgk_accumulate(&vg, &frequency, scale, x, out).map(|_| ())
        };
        jacobian_probe(rhs, field.values, None, desc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::maxwellian;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn vgrid16() -> VelocityGrid<f64> {
        VelocityGrid::square(8.0, 16).unwrap()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |a, &b| a.max(b.abs()))
    }

    #[test]
    fn basis_is_orthonormal() {
        let g = VelocityGrid::<f64>::square(8.0, 32).unwrap();
        assert!(gram_deviation(&g) < 1e-3);
        let g1 = VelocityGrid::<f64>::line(8.0, 40).unwrap();
        assert!(gram_deviation(&g1) < 1e-3);
        assert_eq!(gram_matrix(&g).len(), 16);
    }

    #[test]
    fn coarse_grid_is_diagnosed() {
        let g = VelocityGrid::<f64>::square(2.0, 4).unwrap();
        assert!(matches!(build_linearized_bgk(&g, 1.0, 1.0), Err(Error::Diagnostic(_))));
    }

    #[test]
    fn invariants_are_in_the_kernel() {
        let g = vgrid16();
        let op = build_linearized_bgk(&g, 1.0, 1e-3).unwrap();
        for k in 0..4 {
            let v: Vec<f64> = g.nodes().map(|v| psi(2, v)[k]).collect();
            let bound = 4.0 / 1e-3 * gram_deviation(&g) * max_abs(&v);
            assert!(max_abs(&op.apply(&v).unwrap()) <= bound, "Psi_{k}");
        }
    }

    #[test]
    fn orthogonal_cubic_is_scaled() {
        let g = vgrid16();
        let nu = 2.0;
        let eps = 1e-2;
        let op = build_linearized_bgk(&g, nu, eps).unwrap();
        // Explicit Gram-Schmidt of v_x^3 against the four invariants.
        let w: Vec<f64> = g.nodes().map(|v| g.weight() * gaussian_weight(2, v)).collect();
        let basis: Vec<Vec<f64>> = (0..4).map(|k| g.nodes().map(|v| psi(2, v)[k]).collect()).collect();
        let mut p: Vec<f64> = g.nodes().map(|v| v[0].powi(3)).collect();
        for b in &basis {
            let num: f64 = (0..p.len()).map(|j| w[j] * b[j] * p[j]).sum();
            let den: f64 = (0..p.len()).map(|j| w[j] * b[j] * b[j]).sum();
            for j in 0..p.len() {
                p[j] -= num / den * b[j];
            }
        }
        let out = op.apply(&p).unwrap();
        let err: Vec<f64> = out.iter().zip(&p).map(|(o, x)| o + nu / eps * x).collect();
        assert!(max_abs(&err) <= 1e-6 * nu / eps * max_abs(&p));
    }

    #[test]
    fn complement_is_idempotent() {
        let g = VelocityGrid::<f64>::square(8.0, 32).unwrap();
        let op = build_linearized_bgk(&g, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let once: Vec<f64> = op.apply(&x).unwrap().iter().map(|y| -y).collect();
        let twice: Vec<f64> = op.apply(&once).unwrap().iter().map(|y| -y).collect();
        let diff: Vec<f64> = once.iter().zip(&twice).map(|(a, b)| a - b).collect();
        assert!(max_abs(&diff) <= 1e-8 * max_abs(&once));
    }

    #[test]
    fn collision_spectrum_has_two_points() {
        let eps = 1e-3;
        let op = build_linearized_bgk(&vgrid16(), 1.0, eps).unwrap();
        let rep = spectrum(&op, 0).unwrap();
        assert_eq!(rep.eigenvalues.len(), 256);
        let tol = 1e-3 / eps;
        let near_zero = rep.eigenvalues.iter().filter(|z| z.norm() < tol).count();
        let near_fast = rep.eigenvalues.iter().filter(|z| (*z + 1.0 / eps).norm() < tol).count();
        assert_eq!(near_zero, 4);
        assert_eq!(near_fast, 252);
        assert_eq!(rep.slow_count(), 4);
        assert!(rep.gap_ratio >= 100.0);
    }

    #[test]
    fn zero_operator_reports_unit_gap() {
        let op = LinearizedOperator::<f64>::new(5, "zero", |_: &[f64], out: &mut [f64]| {
            out.fill(0.0);
            Ok(())
        });
        let rep = spectrum(&op, 0).unwrap();
        assert_eq!(rep.gap_ratio, 1.0);
        assert_eq!(rep.fast_count(), 0);
        assert_eq!(rep.kernel_dim, 5);
    }

    #[test]
    fn probe_of_linear_map_is_exact() {
        let a = [[2.0, -1.0, 0.5], [0.0, 3.0, 1.0], [-4.0, 0.25, 1.0]];
        let rhs = move |x: &[f64], out: &mut [f64]| -> Result<()> {
            for i in 0..3 {
                out[i] = (0..3).map(|j| a[i][j] * x[j]).sum();
            }
            Ok(())
        };
        let op = jacobian_probe(rhs, vec![1.0, -2.0, 0.5], None, "linear").unwrap();
        let m = op.assemble().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[(i, j)] - a[i][j]).abs() <= 1e-9 * 4.0, "{i},{j}");
            }
        }
    }

    #[test]
    fn probe_rejects_non_finite_state() {
        let rhs = |_: &[f64], out: &mut [f64]| -> Result<()> {
            out.fill(0.0);
            Ok(())
        };
        assert!(jacobian_probe(rhs, vec![1.0, f64::NAN], None, "bad").is_err());
    }

    #[test]
    fn probe_matches_linearized_bgk() {
        let g = vgrid16();
        let eps = 1.0;
        let m0 = maxwellian(&g, 1.0, [0.0, 0.0], 1.0).unwrap();
        let vg = g.clone();
        let rhs = move |x: &[f64], out: &mut [f64]| -> Result<()> {
            out.fill(0.0);
            bgk_accumulate(&vg, &FrequencyMode::Constant(1.0), 1.0 / eps, x, out).map(|_| ())
        };
        let probe = jacobian_probe(rhs, m0.clone(), None, "bgk probe").unwrap();
        let lin = build_linearized_bgk(&g, 1.0, eps).unwrap();
        // The probe acts on h = M g; compare after removing the Maxwellian factor.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let gv: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h: Vec<f64> = gv.iter().zip(&m0).map(|(a, m)| a * m).collect();
            let ph = probe.apply(&h).unwrap();
            let lg = lin.apply(&gv).unwrap();
            let lh: Vec<f64> = lg.iter().zip(&m0).map(|(a, m)| a * m).collect();
            let diff: Vec<f64> = ph.iter().zip(&lh).map(|(a, b)| a - b).collect();
            assert!(max_abs(&diff) <= 1e-4 * max_abs(&lh), "{}", max_abs(&diff) / max_abs(&lh));
        }
    }

    fn tiny_system(eps: f64, with_collision: bool) -> (KineticSystem<f64>, Vec<f64>) {
        let s = SpatialGrid::line(0.0, 1.0, 8, Boundary::Periodic).unwrap();
        let v = VelocityGrid::line(6.0, 12).unwrap();
        let f = DistributionField::from_macroscopic(s, v, eps, |x| {
            (1.0 + 0.2 * (std::f64::consts::TAU * x[0]).sin(), [0.0, 0.0], 1.0)
        })
        .unwrap();
        let coll = if with_collision {
            CollisionModel::Bgk(FrequencyMode::Constant(1.0))
        } else {
            CollisionModel::None
        };
        let sys = KineticSystem::for_field(&f, WenoConfig::with_order(2).unwrap(), coll).unwrap();
        (sys, f.values)
    }

    #[test]
    fn transport_spectrum_is_nearly_imaginary() {
        let (sys, state) = tiny_system(1.0, false);
        let dx = 1.0 / 8.0;
        let op = jacobian_probe(sys, state, None, "transport").unwrap();
        let rep = spectrum(&op, 0).unwrap();
        assert!(rep.max_real_part() <= 1e-6 / dx, "{}", rep.max_real_part());
    }

    #[test]
    fn transport_and_collision_separate() {
        let (sys, state) = tiny_system(1e-3, true);
        let op = jacobian_probe(sys, state, None, "bgk + transport").unwrap();
        let rep = spectrum(&op, 0).unwrap();
        assert!(rep.gap_ratio >= 10.0, "gap {}", rep.gap_ratio);
    }

    #[test]
    fn density_frequency_spreads_fast_cluster() {
        let eps = 1e-2;
        let s = SpatialGrid::line(0.0, 1.0, 5, Boundary::Outflow).unwrap();
        let v = VelocityGrid::square(6.0, 10).unwrap();
        let f = DistributionField::from_macroscopic(s, v, eps, |x| (0.5 + x[0], [0.0, 0.0], 1.0)).unwrap();
        let rhos: Vec<f64> = f.core_moments().iter().map(|c| c.rho).collect();
        let vg = f.vgrid.clone();
        let rhs = move |x: &[f64], out: &mut [f64]| -> Result<()> {
            out.fill(0.0);
            bgk_accumulate(&vg, &FrequencyMode::Density, 1.0 / eps, x, out).map(|_| ())
        };
        let op = jacobian_probe(rhs, f.values.clone(), None, "bgk nu=rho").unwrap();
        let rep = spectrum(&op, 0).unwrap();
        let fast: Vec<f64> = rep.of_cluster(Cluster::Fast).map(|z| z.re).collect();
        let lo = fast.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = fast.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let rmax = rhos.iter().copied().fold(0.0, f64::max);
        let rmin = rhos.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((lo + rmax / eps).abs() <= 1e-3 * rmax / eps);
        assert!((hi + rmin / eps).abs() <= 1e-3 * rmax / eps);
    }

    #[test]
    fn count_keeps_slowest_modes() {
        let op = build_linearized_bgk(&vgrid16(), 1.0, 1e-3).unwrap();
        let rep = spectrum(&op, 6).unwrap();
        assert_eq!(rep.eigenvalues.len(), 6);
        assert_eq!(rep.slow_count(), 4);
    }

    #[test]
    fn csv_dump_round_trips() {
        let rep = cluster(vec![Complex64::new(-1.0, 0.5), Complex64::new(0.0, 0.0)]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eig.csv");
        rep.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "re,im");
        assert_eq!(lines.len(), 3);
        let parts: Vec<f64> = lines[2].split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(parts, vec![-1.0, 0.5]);
    }

    #[test]
    fn model_operator_shapes() {
        let v = VelocityGrid::<f64>::square(5.0, 8).unwrap();
        assert_eq!(bgk_model_operator(&v, FrequencyMode::Constant(1.0), 1e-3, 6, false).unwrap().dim(), 64);
        assert_eq!(bgk_model_operator(&v, FrequencyMode::Density, 1e-3, 6, false).unwrap().dim(), 384);
        assert!(bgk_model_operator(&v, FrequencyMode::Density, 1e-3, 100, true).is_err());
    }

    proptest! {
        #[test]
        fn operators_are_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let g = VelocityGrid::<f64>::square(6.0, 10).unwrap();
            let op = build_linearized_bgk(&g, 1.5, 0.1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let comb: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let lhs = op.apply(&comb).unwrap();
            let ax = op.apply(&x).unwrap();
            let ay = op.apply(&y).unwrap();
            let rhs: Vec<f64> = ax.iter().zip(&ay).map(|(p, q)| a * p + b * q).collect();
            let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(p, q)| p - q).collect();
            prop_assert!(max_abs(&diff) <= 1e-8 * max_abs(&lhs).max(1e-300));
        }
    }
}
