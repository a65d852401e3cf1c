//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use kinetic_core::config::RunConfig;
use kinetic_core::driver::Simulation;
use kinetic_core::{DistributionField, Result, VelocityGrid};
use rand::Rng;

/// `phi(s) = 2R sin(Rs) / (Rs)`.
fn phi(r: f64, s: f64) -> f64 {
    if s == 0.0 {
        2.0 * r
    } else {
        2.0 * (r * s).sin() / s
    }
}

/// Collision operator by brute-force summation over all mode pairs.
///
/// The grid `[-V, V]^2` is mapped onto `[-pi, pi]^2` and `f` is represented
/// by its trigonometric interpolant on the symmetric mode set
/// `|k_d| <= N/2`, the Nyquist modes carrying half weight. Each output mode
/// `k` collects `f_l f_m (B(l, m) - B(m, m))` over every pair with
/// `l + m = k`, where `B` integrates the truncated kernel over
/// `n_theta` equally spaced directions. The sum is then evaluated back on
/// the grid point by point.
pub fn direct_collision(grid: &VelocityGrid, n_theta: usize, b0: f64, f: &[f64]) -> Vec<f64> {
    let n = grid.counts()[0];
    let v = grid.extent();
    let half = (n / 2) as i64;
    let radius = 2.0 / (3.0 + 2f64.sqrt()) * PI;
    let xi: Vec<[f64; 2]> = grid.nodes().map(|p| [p[0] * PI / v, p[1] * PI / v]).collect();

    let modes: Vec<[i64; 2]> = (-half..=half)
        .flat_map(|a| (-half..=half).map(move |b| [a, b]))
        .collect();
    let weight = |k: [i64; 2]| {
        let w = |c: i64| if c.abs() == half { 0.5 } else { 1.0 };
        w(k[0]) * w(k[1])
    };
    let coeff: Vec<(f64, f64)> = modes
        .iter()
        .map(|&k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (x, &fx) in xi.iter().zip(f) {
                let a = -(k[0] as f64 * x[0] + k[1] as f64 * x[1]);
                re += fx * a.cos();
                im += fx * a.sin();
            }
            let c = weight(k) / (n * n) as f64;
            (c * re, c * im)
        })
        .collect();

    let kernel = |l: [i64; 2], m: [i64; 2]| -> f64 {
        let mut s = 0.0;
        for p in 1..=n_theta {
            let th = PI * p as f64 / n_theta as f64;
            let (sn, cs) = th.sin_cos();
            s += phi(radius, l[0] as f64 * cs + l[1] as f64 * sn) * phi(radius, -(m[0] as f64) * sn + m[1] as f64 * cs);
        }
        PI / n_theta as f64 * s
    };

    let side = 2 * half as usize + 1;
    let index = |k: [i64; 2]| ((k[0] + half) as usize) * side + (k[1] + half) as usize;
    let mut q = vec![(0.0, 0.0); modes.len()];
    for (il, &l) in modes.iter().enumerate() {
        for (im, &m) in modes.iter().enumerate() {
            let k = [l[0] + m[0], l[1] + m[1]];
            if k[0].abs() > half || k[1].abs() > half {
                continue;
            }
            let b = kernel(l, m) - kernel(m, m);
            let (a, c) = (coeff[il], coeff[im]);
            let prod = (a.0 * c.0 - a.1 * c.1, a.0 * c.1 + a.1 * c.0);
            let e = &mut q[index(k)];
            e.0 += b * prod.0;
            e.1 += b * prod.1;
        }
    }

    let s = v / PI;
    let scale = 2.0 * b0 * s * s;
    xi.iter()
        .map(|x| {
            let mut acc = 0.0;
            for (&k, &(re, im)) in modes.iter().zip(&q) {
                let a = k[0] as f64 * x[0] + k[1] as f64 * x[1];
                acc += weight(k) * (re * a.cos() - im * a.sin());
            }
            scale * acc
        })
        .collect()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

/// `sum |a - b| / sum |b|`.
pub fn rel_l1(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
    let den: f64 = b.iter().map(|y| y.abs()).sum();
    num / den
}

pub fn random_slice(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(0.01..1.0)).collect()
}

/// Integrates a configured scenario to its end time without writing output.
pub fn run_to_end(cfg: &RunConfig) -> Result<DistributionField> {
    let sim = Simulation::from_config(cfg)?;
    let mut it = sim.new_integrator();
    let mut field = sim.field.clone();
    it.advance(&sim.system, &mut field.values, sim.scenario.end_time)?;
    Ok(field)
}

pub fn config(scenario: &str, settings: &[&str]) -> RunConfig {
    let mut cfg = RunConfig::new(scenario);
    for s in settings {
        cfg.apply_override(s).unwrap();
    }
    cfg
}

/// One macroscopic quantity per cell.
pub fn field_of(f: &DistributionField, pick: impl Fn(&kinetic_core::MomentSet) -> f64) -> Vec<f64> {
    f.moment_fields().iter().map(pick).collect()
}
