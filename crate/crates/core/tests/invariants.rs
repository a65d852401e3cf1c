mod common;

use common::{config, direct_collision, max_abs, random_slice};
use kinetic_core::boltzmann::{boltzmann_q, default_b0, plan_spectral};
use kinetic_core::driver::{run, Simulation};
use kinetic_core::integrators::forward_euler_step;
use kinetic_core::phase_space::Boundary;
use kinetic_core::planner::speedup;
use kinetic_core::scenario::{scenario, Preset};
use kinetic_core::system::CollisionModel;
use kinetic_core::{KineticSystem, VelocityGrid, WenoConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn identical_configs_give_identical_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for tag in ["a", "b"] {
        let mut cfg = config("sod_1d1d", &["end_time=0.02", "snapshots=3"]);
        cfg.out = dir.path().join(tag);
        let r = run(&cfg).unwrap();
        assert!(r.error.is_none());
        outs.push(cfg.out);
    }
    for n in 0..3 {
        let name = format!("snapshot_{n:02}.csv");
        let a = std::fs::read(outs[0].join(&name)).unwrap();
        let b = std::fs::read(outs[1].join(&name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn periodic_kelvin_helmholtz_conserves_mass() {
    // Both axes periodic. The finer velocity grid keeps the quadrature error
    // of the discrete Maxwellian far below the tolerance.
    let mut sc = scenario("kelvin_helmholtz", Preset::Desk).unwrap();
    sc.boundary = [Boundary::Periodic; 2];
    sc.velocity_count = 24;
    let mut field = sc.initial_field().unwrap();
    let system = KineticSystem::new(
        field.sgrid.clone(),
        field.vgrid.clone(),
        WenoConfig::with_order(sc.weno_k).unwrap(),
        CollisionModel::Bgk(sc.frequency),
        sc.epsilon,
    )
    .unwrap();
    let m0 = field.total_mass();
    for _ in 0..100 {
        forward_euler_step(&system, &mut field.values, sc.epsilon).unwrap();
    }
    let drift = ((field.total_mass() - m0) / m0).abs();
    assert!(drift < 1e-10, "relative mass drift {drift:e}");
}

#[test]
fn double_sod_initial_data_is_diagonally_symmetric() {
    let sim = Simulation::from_config(&config("double_sod_2d", &[])).unwrap();
    let [nx, ny] = sim.field.sgrid.counts();
    assert_eq!(nx, ny);
    let m = sim.field.moment_fields();
    for ix in 0..nx {
        for iy in 0..ny {
            let (a, b) = (&m[ix * ny + iy], &m[iy * ny + ix]);
            assert!((a.rho - b.rho).abs() <= 1e-10);
            assert!((a.ubar[0] - b.ubar[1]).abs() <= 1e-10);
            assert!((a.temperature - b.temperature).abs() <= 1e-10);
        }
    }
}

#[test]
fn manifest_speedup_matches_plan() {
    let dir = tempfile::tempdir().unwrap();
    for (name, extra) in [
        ("sod_1d1d", vec!["end_time=0.004"]),
        ("sod_1d1d", vec!["end_time=0.004", "integrator=tprk4", "nu=rho", "k=6", "m=14.24,11.83"]),
    ] {
        let mut cfg = config(name, &extra);
        cfg.out = dir.path().join("run");
        let sim = Simulation::from_config(&cfg).unwrap();
        let expected = speedup(&sim.plan);
        let r = run(&cfg).unwrap();
        assert_eq!(r.manifest.plan.speedup, expected);
        let text = std::fs::read_to_string(cfg.out.join("manifest.json")).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(json["plan"]["speedup"].as_f64().unwrap(), expected);
    }
}

#[test]
fn fast_operator_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid = VelocityGrid::square(5.0, 8).unwrap();
    let plan = plan_spectral(8, 5.0, 3, default_b0()).unwrap();
    for _ in 0..5 {
        let f = random_slice(&mut rng, 64);
        let fast = boltzmann_q(&plan, &f).unwrap();
        let slow = direct_collision(&grid, 3, default_b0(), &f);
        let diff: Vec<f64> = fast.iter().zip(&slow).map(|(a, b)| a - b).collect();
        assert!(max_abs(&diff) <= 1e-11 * max_abs(&slow));
    }
}
