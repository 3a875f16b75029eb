//! Runtime monitors: constraint drift, stability margin, the operator
//! `𝓐_τ u = -(τu')'` and triple-bar norm tracking.

use serde::Serialize;

use crate::certificate::Certificate;
use crate::dynamics::{self, Sample, SimState};
use crate::error::{Error, Result};
use crate::mesh::{fornberg, ScalarField, Vec3, VecField};
use crate::tension::TensionSolve;
use crate::wnorms::{self, TripleBarReport};

/// Nodes with `s` below this are skipped by the `𝓜ẍ = μx' + g` residual.
pub const EXPX_MIN_S: f64 = 0.05;
pub const IDENTITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct DriftReport {
    pub t: f64,
    pub drift_max: f64,
    pub drift_energy: f64,
    pub lambda: f64,
}

/// `8 (1 + |τ(1) τ'(1)|)`, large enough to absorb the boundary term.
pub fn drift_lambda(tension: &TensionSolve) -> f64 {
    let tau = tension.tau.values();
    let dtau = tension.tau_prime.values();
    let n = tau.len() - 1;
    8.0 * (1.0 + (tau[n] * dtau[n]).abs())
}

/// `∫(λ s h² + τ ḣ² + τ² h'²) + 2 τ τ' h²|_{s=1}` with `h = |x'|² - 1`.
pub fn drift_energy(state: &SimState, lambda: f64) -> Result<DriftReport> {
    let mesh = state.x.mesh();
    let x1 = state.x.derivative(1)?;
    let v1 = state.xdot.derivative(1)?;
    let h: Vec<f64> = x1.values().iter().map(|v| v.norm_squared() - 1.0).collect();
    let hdot: Vec<f64> = x1
        .values()
        .iter()
        .zip(v1.values())
        .map(|(a, b)| 2.0 * a.dot(b))
        .collect();
    let dh = mesh.derivative_values(&h, 1)?;
    let tau = state.tension.tau.values();
    let integrand: Vec<f64> = (0..h.len())
        .map(|i| {
            let s = mesh.nodes()[i];
            lambda * s * h[i] * h[i] + tau[i] * hdot[i] * hdot[i] + tau[i] * tau[i] * dh[i] * dh[i]
        })
        .collect();
    let n = h.len() - 1;
    let boundary = 2.0 * tau[n] * state.tension.tau_prime.values()[n] * h[n] * h[n];
    let drift_max = h
        .iter()
        .map(|&v| ((1.0 + v).max(0.0).sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(DriftReport {
        t: state.t,
        drift_max,
        drift_energy: mesh.integrate_values(&integrand) + boundary,
        lambda,
    })
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct StabilityReport {
    pub t: f64,
    pub min_ratio: f64,
    /// `-g·x'(1) + ∫ s|ẋ'|² · exp(-∫ s|x''|²)`.
    pub sc1_lower: f64,
    /// `sc1_lower · exp(-∫ s|x''|²)`, the bound the solution formula yields.
    pub sc1_explicit: f64,
    pub c0: f64,
    pub satisfied: bool,
}

impl StabilityReport {
    /// `min_ratio >= sc1_lower (1 - 1e-6)` whenever `sc1_lower >= 0`.
    pub fn sc1_holds(&self) -> bool {
        self.sc1_lower < 0.0 || self.min_ratio >= self.sc1_lower * (1.0 - 1e-6)
    }
}

fn min_ratio(tau: &ScalarField) -> f64 {
    tau.mesh()
        .nodes()
        .iter()
        .zip(tau.values())
        .skip(1)
        .map(|(&s, &t)| t / s)
        .fold(f64::INFINITY, f64::min)
}

pub fn stability_margin(state: &SimState, c0: f64) -> StabilityReport {
    let tension = &state.tension;
    let ratio = min_ratio(&tension.tau);
    let (sc1_lower, sc1_explicit) = match &tension.state {
        Some(sc) => (sc.sc1_rhs, sc.sc1_explicit),
        None => {
            let mesh = tension.q.mesh();
            let sw = |f: &ScalarField| -> f64 {
                let v: Vec<f64> = mesh
                    .nodes()
                    .iter()
                    .zip(f.values())
                    .map(|(s, v)| s * v)
                    .collect();
                mesh.integrate_values(&v)
            };
            let k = sw(&tension.q);
            let rhs = tension.a + sw(&tension.h) * (-k).exp();
            (rhs, rhs * (-k).exp())
        }
    };
    StabilityReport {
        t: state.t,
        min_ratio: ratio,
        sc1_lower,
        sc1_explicit,
        c0,
        satisfied: ratio >= c0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AtauReport {
    #[serde(skip)]
    pub value: VecField,
    pub identity: Certificate,
    /// `‖𝓐_τ u‖ / (‖s u''‖ + ‖u'‖)` in `L²`.
    pub ratio: f64,
}

fn vec_l2(f: &VecField) -> f64 {
    f.mesh()
        .integrate_values(f.norm_squared().values())
        .max(0.0)
        .sqrt()
}

fn scale(f: &VecField, w: &[f64]) -> VecField {
    let values = f.values().iter().zip(w).map(|(v, &c)| v * c).collect();
    VecField::new(f.mesh_arc().clone(), values).expect("same mesh")
}

/// `𝓐_τ u = -(τu')'` with the nodal check of
/// `𝓐_τ u = μ A₂u + (μ - τ')u'`, `μ = 𝓜τ'`, `A₂u = -(su')'`.
pub fn operator_atau(tau: &ScalarField, dtau: &ScalarField, u: &VecField) -> Result<AtauReport> {
    let mesh = u.mesh();
    mesh.check(tau.mesh())?;
    mesh.check(dtau.mesh())?;
    if tau.values()[0].abs() > 1e-12 {
        return Err(Error::TensionNotPinned(tau.values()[0]));
    }
    let du = u.derivative(1)?;
    let value = scale(
        &scale(&du, tau.values()).derivative(1)?,
        &vec![-1.0; mesh.len()],
    );
    let a2 = scale(&du, mesh.nodes()).derivative(1)?;
    let mu = wnorms::averaging(dtau);
    let n = mesh.intervals();
    let mut worst: Option<Certificate> = None;
    for i in 1..n {
        let m = mu.values()[i];
        let rhs = a2.values()[i] * -m + du.values()[i] * (m - dtau.values()[i]);
        for c in 0..3 {
            let cert = Certificate::close(
                "IdAtau",
                format!("s={:.6}, component {}", mesh.nodes()[i], c + 1),
                value.values()[i][c],
                rhs[c],
                IDENTITY_TOL,
            );
            if worst.as_ref().is_none_or(|w| cert.slack < w.slack) {
                worst = Some(cert);
            }
        }
    }
    let su2 = scale(&u.derivative(2)?, mesh.nodes());
    let denom = vec_l2(&su2) + vec_l2(&du);
    let ratio = if denom > 0.0 {
        vec_l2(&value) / denom
    } else {
        0.0
    };
    Ok(AtauReport {
        value,
        identity: worst.expect("mesh has interior nodes"),
        ratio,
    })
}

/// `max |𝓜ẍ - μx' - g|` over nodes with `EXPX_MIN_S <= s < 1`, `μ = τ/s`.
pub fn expx_residual(state: &SimState, g: Vec3) -> Result<f64> {
    let acc = dynamics::acceleration_from(&state.x, &state.tension, g)?;
    let mesh = state.x.mesh();
    let avg = mesh.cumulative_vec(acc.values());
    let x1 = state.x.derivative(1)?;
    let nodes = mesh.nodes();
    let tau = state.tension.tau.values();
    let mut worst = 0.0f64;
    for i in 1..mesh.intervals() {
        let s = nodes[i];
        if s < EXPX_MIN_S {
            continue;
        }
        let r = avg[i] / s - x1.values()[i] * (tau[i] / s) - g;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct ApeReport {
    pub t: f64,
    pub triple: TripleBarReport,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_s |∂_t τ| / s`.
    pub max_dtau_ratio: f64,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct ApeSummary {
    pub min: f64,
    pub max: f64,
    pub last: f64,
    /// Smallest `C` with `C⁻¹ ≤ τ/s ≤ C` over all samples.
    pub tau_envelope: f64,
}

fn time_weights(times: &[f64], i: usize) -> (usize, Vec<Vec<f64>>) {
    let start = i.saturating_sub(1).min(times.len() - 3);
    (start, fornberg(times[i], &times[start..start + 3], 2))
}

fn combine(samples: &[Sample], start: usize, w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = samples[0].state.tension.tau.values().len();
    let mut v = vec![0.0; n];
    for (k, &c) in w.iter().enumerate() {
        for (vi, t) in v
            .iter_mut()
            .zip(samples[start + k].state.tension.tau.values())
        {
            *vi += c * t;
        }
    }
    let mesh = samples[0].state.x.mesh();
    let d = mesh.derivative_values(&v, 1).expect("first derivative");
    (v, d)
}

/// Triple-bar norm `⫼x⫼₄` per sample, with `∂_t τ`, `∂_t² τ` from
/// three-point differences over sample times.
pub fn ape_track(samples: &[Sample], g: Vec3, eps: f64) -> Result<Vec<ApeReport>> {
    if samples.len() < 3 {
        return Err(Error::InsufficientSamples {
            need: 3,
            have: samples.len(),
        });
    }
    let times: Vec<f64> = samples.iter().map(|s| s.state.t).collect();
    let mut out = Vec::with_capacity(samples.len());
    for (i, smp) in samples.iter().enumerate() {
        let st = &smp.state;
        let mesh = st.x.mesh_arc().clone();
        let nodes = mesh.nodes();
        let (start, w) = time_weights(&times, i);
        let (td, tdp) = combine(samples, start, &w[1]);
        let (tdd, tddp) = combine(samples, start, &w[2]);
        let tau = st.tension.tau.values();
        let dtau = st.tension.tau_prime.values();
        let x1 = st.x.derivative(1)?;
        let x2 = st.x.derivative(2)?;
        let v1 = st.xdot.derivative(1)?;
        let v2 = st.xdot.derivative(2)?;
        let acc = dynamics::acceleration_from(&st.x, &st.tension, g)?;
        let a1 = acc.derivative(1)?;
        let a2 = acc.derivative(2)?;
        let n = nodes.len();
        let (x1, x2, v1, v2, a1, a2) = (
            x1.values(),
            x2.values(),
            v1.values(),
            v2.values(),
            a1.values(),
            a2.values(),
        );
        let mut third = Vec::with_capacity(n);
        let mut fourth = Vec::with_capacity(n);
        for k in 0..n {
            third.push(x1[k] * tdp[k] + x2[k] * td[k] + v1[k] * dtau[k] + v2[k] * tau[k]);
            fourth.push(
                x1[k] * tddp[k]
                    + x2[k] * tdd[k]
                    + (v1[k] * tdp[k] + v2[k] * td[k]) * 2.0
                    + a1[k] * dtau[k]
                    + a2[k] * tau[k],
            );
        }
        third[n - 1] = Vec3::zeros();
        fourth[n - 1] = Vec3::zeros();
        let jets = [
            st.x.clone(),
            st.xdot.clone(),
            acc,
            VecField::new(mesh.clone(), third)?,
            VecField::new(mesh.clone(), fourth)?,
        ];
        let triple = wnorms::triple_bar(&jets, 4, eps)?;
        let ratios = nodes.iter().zip(tau).skip(1).map(|(&s, &t)| t / s);
        let (lo, hi) = ratios.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| {
            (a.min(r), b.max(r))
        });
        let max_dtau_ratio = nodes
            .iter()
            .zip(&td)
            .skip(1)
            .map(|(&s, &t)| t.abs() / s)
            .fold(0.0, f64::max);
        out.push(ApeReport {
            t: st.t,
            triple,
            min_ratio: lo,
            max_ratio: hi,
            max_dtau_ratio,
        });
    }
    Ok(out)
}

pub fn summarize(reports: &[ApeReport]) -> Option<ApeSummary> {
    let last = reports.last()?;
    let vals = reports.iter().map(|r| r.triple.full);
    let (min, max) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let tau_envelope = reports
        .iter()
        .map(|r| r.max_ratio.max(1.0 / r.min_ratio))
        .fold(1.0, f64::max);
    Some(ApeSummary {
        min,
        max,
        last: last.triple.full,
        tau_envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial;
    use crate::mesh::Mesh;

    const DOWN: Vec3 = Vec3::new(0.0, 0.0, -1.0);

    #[test]
    fn stationary_monitors() {
        let m = Mesh::build(200, 2.0, 2).unwrap();
        let d = initial::stationary(&m, DOWN);
        let st = SimState::new(0.0, d.x0, d.x1, DOWN).unwrap();
        let r = drift_energy(&st, 8.0).unwrap();
        assert!(r.drift_max < 1e-10 && r.drift_energy.abs() < 1e-12, "{r:?}");
        let s = stability_margin(&st, 1.0);
        assert!((s.min_ratio - 1.0).abs() < 1e-6);
        assert!((s.sc1_lower - 1.0).abs() < 1e-12);
        assert!(s.satisfied || s.min_ratio > 1.0 - 1e-6);
        assert!(expx_residual(&st, DOWN).unwrap() < 1e-6);
    }

    #[test]
    fn stretched_drift_energy_is_linear_in_lambda() {
        let m = Mesh::build(200, 1.0, 4).unwrap();
        let x0 = VecField::from_fn(&m, |s| DOWN * (1.01 * (1.0 - s)));
        let st = SimState::new(0.0, x0, VecField::zeros(&m), DOWN).unwrap();
        let h: f64 = 1.01f64 * 1.01 - 1.0;
        let e1 = drift_energy(&st, 1.0).unwrap();
        let e2 = drift_energy(&st, 2.0).unwrap();
        let tau = st.tension.tau.values();
        let tp = st.tension.tau_prime.values();
        let b = 2.0 * tau[200] * tp[200] * h * h;
        assert!((e1.drift_energy - (0.5 * h * h + b)).abs() < 1e-12);
        assert!((e2.drift_energy - e1.drift_energy - 0.5 * h * h).abs() < 1e-12);
        assert!(e1.drift_energy > 0.0);
        assert!((e1.drift_max - 0.01).abs() < 1e-12);
    }

    #[test]
    fn special_case_and_rotating_margins() {
        let m = Mesh::build(200, 2.0, 2).unwrap();
        let d = initial::stationary(&m, Vec3::zeros());
        let st = SimState::new(0.0, d.x0, d.x1, Vec3::zeros()).unwrap();
        let s = stability_margin(&st, 0.0);
        assert_eq!((s.min_ratio, s.sc1_lower), (0.0, 0.0));
        let d = initial::rotating(&m, 1.0);
        let st = SimState::new(0.0, d.x0, d.x1, Vec3::zeros()).unwrap();
        let s = stability_margin(&st, 0.5);
        assert!((s.sc1_lower - 0.5).abs() < 1e-6);
        assert!((s.min_ratio - 0.5).abs() < 1e-6);
        assert!(s.sc1_holds());
    }

    #[test]
    fn atau_examples() {
        let m = Mesh::build(200, 1.0, 4).unwrap();
        let tau = ScalarField::from_fn(&m, |s| s);
        let one = ScalarField::constant(&m, 1.0);
        let u = VecField::from_fn(&m, |s| Vec3::new(s - 1.0, 0.0, 0.0));
        let r = operator_atau(&tau, &one, &u).unwrap();
        for v in r.value.values() {
            assert!((v - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-10);
        }
        let c = VecField::from_fn(&m, |_| Vec3::new(1.0, 2.0, 3.0));
        assert!(operator_atau(&tau, &one, &c).unwrap().value.max_norm() < 1e-9);
        let tau = ScalarField::from_fn(&m, |s| s - s * s / 2.0);
        let dtau = ScalarField::from_fn(&m, |s| 1.0 - s);
        let u = VecField::from_fn(&m, |s| Vec3::new(s * s, 0.0, 0.0));
        let r = operator_atau(&tau, &dtau, &u).unwrap();
        assert!(r.identity.satisfied, "{:?}", r.identity);
        let shifted = ScalarField::from_fn(&m, |s| s + 0.1);
        assert!(matches!(
            operator_atau(&shifted, &one, &u),
            Err(Error::TensionNotPinned(_))
        ));
    }

    #[test]
    fn ape_needs_three_samples() {
        assert!(matches!(
            ape_track(&[], DOWN, 0.25),
            Err(Error::InsufficientSamples { need: 3, have: 0 })
        ));
    }
}
