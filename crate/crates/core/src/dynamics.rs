//! Time integration of `ẍ = (τx′)′ + g` with the tension re-solved from
//! the current state at every stage.

use serde::Serialize;

use crate::config::{SimConfig, TimeStep};
use crate::diagnostics::{self, DriftReport, StabilityReport};
use crate::error::{Error, Result};
use crate::initial::{InitialData, DISCRETE_CONSTRAINT_TOL};
use crate::mesh::{Mesh, ScalarField, Vec3, VecField};
use crate::tension::{self, TensionSolve};

pub const CFL_SAFETY: f64 = 0.5;
/// Step cap when the wave speed vanishes.
pub const DT_MAX: f64 = 0.01;
/// Samples recorded after stability loss before the run stops.
pub const STABILITY_GRACE: usize = 10;

#[derive(Clone, Debug)]
pub struct SimState {
    pub t: f64,
    pub x: VecField,
    pub xdot: VecField,
    pub tension: TensionSolve,
}

impl SimState {
    pub fn new(t: f64, x: VecField, xdot: VecField, g: Vec3) -> Result<Self> {
        let tension = tension::tension_from_state(&x, &xdot, g)?;
        Ok(Self {
            t,
            x,
            xdot,
            tension,
        })
    }
}

/// Interior rows near `s = 0` where `τ′x′` uses the three-point
/// difference `(x_{i+1} - x_{i-1}) / (s_{i+1} - s_{i-1})` for order-4 meshes.
pub const COMPACT_ROWS_ORDER4: usize = 10;

/// `x′` for the transport term `τ′x′`.
///
/// The three-point difference pairs with the three-point `x″` into the
/// flux form `[τ_{i+½}(x_{i+1} - x_i)/h₊ - τ_{i-½}(x_i - x_{i-1})/h₋] / h̄`
/// with linearly interpolated `τ_{i±½}`. Standard stencils there give a
/// non-dissipative operator with complex spectrum on graded meshes.
fn transport_tangent(x: &VecField) -> Result<VecField> {
    let mesh = x.mesh();
    let mut x1 = x.derivative(1)?;
    let n = mesh.intervals();
    let rows = if mesh.stencil_order() == 2 {
        n - 1
    } else {
        COMPACT_ROWS_ORDER4.min(n - 1)
    };
    let s = mesh.nodes();
    for i in 1..=rows {
        let d = (x.values()[i + 1] - x.values()[i - 1]) / (s[i + 1] - s[i - 1]);
        x1.values_mut()[i] = d;
    }
    Ok(x1)
}

/// `τx″ + τ′x′ + g` from a solved tension, zero at the fixed end.
pub fn acceleration_from(x: &VecField, tension: &TensionSolve, g: Vec3) -> Result<VecField> {
    let x1 = transport_tangent(x)?;
    let x2 = x.derivative(2)?;
    let tau = tension.tau.values();
    let dtau = tension.tau_prime.values();
    let mut values: Vec<Vec3> = (0..x.values().len())
        .map(|i| x2.values()[i] * tau[i] + x1.values()[i] * dtau[i] + g)
        .collect();
    *values.last_mut().unwrap() = Vec3::zeros();
    VecField::new(x.mesh_arc().clone(), values)
}

pub fn acceleration(x: &VecField, xdot: &VecField, g: Vec3) -> Result<VecField> {
    let t = tension::tension_from_state_with(x, xdot, g, false)?;
    acceleration_from(x, &t, g)
}

/// `CFL_SAFETY · min_i Δs_i / √max(τ_i, τ(s₁))`, capped at `dt_max`.
pub fn cfl_dt_tau(tau: &ScalarField, dt_max: f64) -> f64 {
    let mesh = tau.mesh();
    let s = mesh.nodes();
    let t = tau.values();
    let floor = t[1];
    let n = mesh.intervals();
    let mut dt = dt_max;
    for i in 0..=n {
        let ds = if i < n {
            s[i + 1] - s[i]
        } else {
            s[n] - s[n - 1]
        };
        let speed2 = t[i].max(floor);
        if speed2 > 0.0 {
            dt = dt.min(CFL_SAFETY * ds / speed2.sqrt());
        }
    }
    dt
}

pub fn cfl_dt(state: &SimState) -> f64 {
    cfl_dt_tau(&state.tension.tau, DT_MAX)
}

fn axpy(y: &VecField, a: f64, x: &VecField) -> VecField {
    let values = y
        .values()
        .iter()
        .zip(x.values())
        .map(|(y, x)| y + x * a)
        .collect();
    VecField::new(y.mesh_arc().clone(), values).expect("same mesh")
}

fn pin(f: &mut VecField) {
    *f.values_mut().last_mut().unwrap() = Vec3::zeros();
}

fn find_non_finite(f: &VecField) -> Option<usize> {
    f.values()
        .iter()
        .position(|v| !v.iter().all(|c| c.is_finite()))
}

/// Rescale `x′` to unit length and rebuild `x` from the fixed end.
pub fn renormalize(x: &VecField) -> Result<VecField> {
    let mesh = x.mesh();
    let tangent: Vec<Vec3> = x
        .derivative(1)?
        .values()
        .iter()
        .map(|v| if v.norm() > 0.0 { v.normalize() } else { *v })
        .collect();
    let mut values = vec![Vec3::zeros(); mesh.len()];
    for c in 0..3 {
        let comp: Vec<f64> = tangent.iter().map(|v| v[c]).collect();
        for (i, r) in mesh.cumulative_from_right(&comp).into_iter().enumerate() {
            values[i][c] = -r;
        }
    }
    VecField::new(x.mesh_arc().clone(), values)
}

/// One classical RK4 step; the returned state carries an uncertified tension.
pub fn step(state: &SimState, dt: f64, g: Vec3, renorm: bool) -> Result<SimState> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let (x, v) = (&state.x, &state.xdot);
    let stage = |x: &VecField, v: &VecField| -> Result<VecField> {
        let t = tension::tension_from_state_with(x, v, g, false)?;
        acceleration_from(x, &t, g)
    };
    let a1 = acceleration_from(x, &state.tension, g)?;
    let mut x2 = axpy(x, 0.5 * dt, v);
    let mut v2 = axpy(v, 0.5 * dt, &a1);
    pin(&mut x2);
    pin(&mut v2);
    let a2 = stage(&x2, &v2)?;
    let mut x3 = axpy(x, 0.5 * dt, &v2);
    let mut v3 = axpy(v, 0.5 * dt, &a2);
    pin(&mut x3);
    pin(&mut v3);
    let a3 = stage(&x3, &v3)?;
    let mut x4 = axpy(x, dt, &v3);
    let mut v4 = axpy(v, dt, &a3);
    pin(&mut x4);
    pin(&mut v4);
    let a4 = stage(&x4, &v4)?;
    let w = dt / 6.0;
    let mut xn = x.clone();
    let mut vn = v.clone();
    for i in 0..xn.values().len() {
        xn.values_mut()[i] +=
            (v.values()[i] + (v2.values()[i] + v3.values()[i]) * 2.0 + v4.values()[i]) * w;
        vn.values_mut()[i] +=
            (a1.values()[i] + (a2.values()[i] + a3.values()[i]) * 2.0 + a4.values()[i]) * w;
    }
    pin(&mut xn);
    pin(&mut vn);
    if renorm {
        xn = renormalize(&xn)?;
    }
    let t = state.t + dt;
    if let Some(i) = find_non_finite(&xn).or_else(|| find_non_finite(&vn)) {
        return Err(Error::NanAbort {
            t,
            detail: format!(
                "non-finite state at node {i} (s = {})",
                xn.mesh().nodes()[i]
            ),
        });
    }
    let tension = tension::tension_from_state_with(&xn, &vn, g, false)?;
    if let Some(i) = tension.tau.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NanAbort {
            t,
            detail: format!("non-finite tension at node {i}"),
        });
    }
    Ok(SimState {
        t,
        x: xn,
        xdot: vn,
        tension,
    })
}

/// `∂_t²x(0)` and `∂_t³x(0)` from the equation of motion and the
/// differentiated tension problem.
pub fn initial_jets(data: &InitialData, g: Vec3) -> Result<[VecField; 2]> {
    data.validate(DISCRETE_CONSTRAINT_TOL)?;
    let (x, v) = (&data.x0, &data.x1);
    let t0 = tension::tension_from_state_with(x, v, g, false)?;
    let acc = acceleration_from(x, &t0, g)?;
    let x1 = x.derivative(1)?;
    let x2 = x.derivative(2)?;
    let v1 = v.derivative(1)?;
    let v2 = v.derivative(2)?;
    let a1 = acc.derivative(1)?;
    let tau = t0.tau.values();
    let n = x.values().len();
    let h1: Vec<f64> = (0..n)
        .map(|i| {
            2.0 * v1.values()[i].dot(&a1.values()[i])
                - 2.0 * x2.values()[i].dot(&v2.values()[i]) * tau[i]
        })
        .collect();
    let a_dot = -g.dot(&v1.values()[n - 1]);
    let h1 = ScalarField::new(x.mesh_arc().clone(), h1)?;
    let tdot = tension::solve_bvp_with(&t0.q, &h1, a_dot, false)?;
    let dtau = t0.tau_prime.values();
    let td = tdot.tau.values();
    let tdp = tdot.tau_prime.values();
    let mut third: Vec<Vec3> = (0..n)
        .map(|i| {
            x1.values()[i] * tdp[i]
                + x2.values()[i] * td[i]
                + v1.values()[i] * dtau[i]
                + v2.values()[i] * tau[i]
        })
        .collect();
    third[n - 1] = Vec3::zeros();
    Ok([acc, VecField::new(x.mesh_arc().clone(), third)?])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    StabilityLost,
    NanAbort,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::StabilityLost => "stability_lost",
            RunStatus::NanAbort => "nan_abort",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sample {
    pub state: SimState,
    pub drift: DriftReport,
    pub stability: StabilityReport,
    pub kinetic: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub status: RunStatus,
    pub lambda: f64,
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub abort_detail: Option<String>,
}

fn kinetic(v: &VecField) -> f64 {
    v.mesh().integrate_values(&v.norm_squared().into_values())
}

fn sample(state: SimState, lambda: f64, g: Vec3, c0: f64) -> Result<Sample> {
    let tension = tension::tension_from_state(&state.x, &state.xdot, g)?;
    let state = SimState { tension, ..state };
    let drift = diagnostics::drift_energy(&state, lambda)?;
    let stability = diagnostics::stability_margin(&state, c0);
    let kinetic = kinetic(&state.xdot);
    Ok(Sample {
        state,
        drift,
        stability,
        kinetic,
    })
}

/// Integrates to `T_end`, recording a sample every `sample_every` and at
/// the end.
pub fn run(config: &SimConfig, data: &InitialData, force_dt: bool) -> Result<Trajectory> {
    let mesh: &Mesh = data.x0.mesh();
    if mesh.intervals() != config.n || mesh.stencil_order() != config.order {
        return Err(Error::MeshMismatch);
    }
    data.validate(DISCRETE_CONSTRAINT_TOL)?;
    let g = config.g;
    let state = SimState::new(0.0, data.x0.clone(), data.x1.clone(), g)?;
    let lambda = diagnostics::drift_lambda(&state.tension);
    let first = sample(state, lambda, g, config.c0)?;
    let mut state = first.state.clone();
    let mut samples = vec![first];
    let mut steps = 0;
    let (mut dt_min, mut dt_max) = (f64::INFINITY, 0.0f64);
    let mut next_index = 1usize;
    let mut lost = 0usize;
    let mut status = RunStatus::Completed;
    let mut abort_detail = None;
    let eps = 1e-12 * config.t_end.max(1.0);
    while state.t < config.t_end - eps {
        let cfl = cfl_dt(&state);
        let mut dt = match config.dt {
            TimeStep::Auto => cfl,
            TimeStep::Fixed(d) => {
                if d > cfl * (1.0 + 1e-12) && !force_dt {
                    return Err(Error::Cfl { dt: d, bound: cfl });
                }
                d
            }
        };
        let next_sample = (next_index as f64 * config.sample_every).min(config.t_end);
        let mut hit = false;
        if state.t + dt >= next_sample - eps {
            dt = next_sample - state.t;
            hit = true;
        }
        match step(&state, dt, g, config.renormalize) {
            Ok(mut s) => {
                if hit {
                    s.t = next_sample;
                }
                state = s;
            }
            Err(Error::NanAbort { t, detail }) => {
                status = RunStatus::NanAbort;
                abort_detail = Some(format!("t = {t}: {detail}"));
                break;
            }
            Err(e) => return Err(e),
        }
        steps += 1;
        dt_min = dt_min.min(dt);
        dt_max = dt_max.max(dt);
        if hit {
            next_index += 1;
            let smp = sample(state.clone(), lambda, g, config.c0)?;
            let negative = smp.stability.min_ratio < 0.0;
            samples.push(smp);
            if negative {
                lost += 1;
                if lost > STABILITY_GRACE {
                    status = RunStatus::StabilityLost;
                    break;
                }
            } else {
                lost = 0;
            }
        }
    }
    if status == RunStatus::Completed && lost > 0 {
        status = RunStatus::StabilityLost;
    }
    Ok(Trajectory {
        samples,
        status,
        lambda,
        steps,
        dt_min,
        dt_max,
        abort_detail,
    })
}
