use std::f64::consts::PI;

use hangsim::config::{SimConfig, TimeStep};
use hangsim::diagnostics;
use hangsim::dynamics::{self, RunStatus};
use hangsim::initial::{self, InitialSpec};
use hangsim::{Mesh, Vec3};

fn config(initial: InitialSpec, g: Vec3, t_end: f64) -> SimConfig {
    SimConfig {
        g,
        t_end,
        initial,
        ..SimConfig::default()
    }
}

#[test]
fn rotating_string_returns_after_one_period() {
    let cfg = SimConfig {
        n: 100,
        dt: TimeStep::Fixed(2e-3),
        sample_every: PI / 4.0,
        ..config(
            InitialSpec::Rotating { omega: 1.0 },
            Vec3::zeros(),
            2.0 * PI,
        )
    };
    let mesh = cfg.mesh().unwrap();
    let data = cfg.initial.build(&mesh, cfg.g).unwrap();
    let traj = dynamics::run(&cfg, &data, false).unwrap();
    assert_eq!(traj.status, RunStatus::Completed);
    assert_eq!(traj.samples.len(), 9);
    let half = &traj.samples[4].state;
    let flipped = data.x0.values().iter().map(|p| -*p);
    let err = half
        .x
        .values()
        .iter()
        .zip(flipped)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    assert!(err < 1e-8, "half-period error {err}");
    assert!(traj.samples[8].state.x.max_distance(&data.x0) < 1e-8);
}

#[test]
fn kinetic_energy_conserved_without_gravity() {
    let cfg = config(InitialSpec::Rotating { omega: 2.0 }, Vec3::zeros(), 0.5);
    let mesh = cfg.mesh().unwrap();
    let data = cfg.initial.build(&mesh, cfg.g).unwrap();
    let traj = dynamics::run(&cfg, &data, false).unwrap();
    let k0 = traj.samples[0].kinetic;
    for s in &traj.samples {
        assert!(((s.kinetic - k0) / k0).abs() < 1e-8);
    }
}

#[test]
fn hanging_pendulum_keeps_margin() {
    let probe = config(
        InitialSpec::Pendulum {
            amplitude: 0.05,
            mode: 1,
        },
        Vec3::new(0.0, 0.0, -1.0),
        1.0,
    );
    let mesh = probe.mesh().unwrap();
    let data = probe.initial.build(&mesh, probe.g).unwrap();
    let c0 = 0.5
        * dynamics::SimState::new(0.0, data.x0.clone(), data.x1.clone(), probe.g)
            .map(|st| diagnostics::stability_margin(&st, 0.0).min_ratio)
            .unwrap();
    let cfg = SimConfig { c0, ..probe };
    let traj = dynamics::run(&cfg, &data, false).unwrap();
    assert_eq!(traj.status, RunStatus::Completed);
    for s in &traj.samples {
        assert!(s.stability.satisfied);
        assert!(s.stability.min_ratio >= s.stability.sc1_explicit * (1.0 - 1e-6));
    }
}

#[test]
fn drift_shrinks_under_refinement() {
    let drift = |n: usize| {
        let cfg = SimConfig {
            n,
            ..config(
                InitialSpec::Pendulum {
                    amplitude: 0.05,
                    mode: 1,
                },
                Vec3::new(0.0, 0.0, -1.0),
                0.5,
            )
        };
        let mesh = cfg.mesh().unwrap();
        let data = cfg.initial.build(&mesh, cfg.g).unwrap();
        let traj = dynamics::run(&cfg, &data, false).unwrap();
        traj.samples
            .iter()
            .map(|s| s.drift.drift_max)
            .fold(0.0, f64::max)
    };
    let (d1, d2) = (drift(100), drift(200));
    assert!(d2 < d1 / 2.5, "{d1} {d2}");
}

#[test]
fn drift_energy_starts_at_zero_for_exact_data() {
    let mesh = Mesh::build(100, 2.0, 2).unwrap();
    let data = initial::rotating(&mesh, 1.0);
    let st = dynamics::SimState::new(0.0, data.x0, data.x1, Vec3::zeros()).unwrap();
    let lambda = diagnostics::drift_lambda(&st.tension);
    let d = diagnostics::drift_energy(&st, lambda).unwrap();
    assert!(d.drift_max < 1e-10 && d.drift_energy < 1e-12, "{d:?}");
    assert!(lambda >= 8.0);
}

#[test]
fn second_mode_oscillates_faster() {
    let crossings = |mode: usize| {
        let cfg = SimConfig {
            n: 100,
            sample_every: 0.02,
            ..config(
                InitialSpec::Pendulum {
                    amplitude: 1e-3,
                    mode,
                },
                Vec3::new(0.0, 0.0, -1.0),
                6.0,
            )
        };
        let mesh = cfg.mesh().unwrap();
        let data = cfg.initial.build(&mesh, cfg.g).unwrap();
        let traj = dynamics::run(&cfg, &data, false).unwrap();
        traj.samples
            .windows(2)
            .filter(|w| w[0].state.x.values()[0].x.signum() != w[1].state.x.values()[0].x.signum())
            .count()
    };
    assert!(crossings(2) > 2 * crossings(1));
}
