//! The tension boundary value problem
//!
//! ```text
//! -τ'' + q τ = h  on (0, 1),   τ(0) = 0,   τ'(1) = a,
//! ```
//!
//! solved through the fundamental pair `φ'' = qφ` (`φ(0) = 0, φ'(0) = 1`)
//! and `ψ'' = qψ` (`ψ(1) = 1, ψ'(1) = 0`). With `A(s) = ∫_0^s φh` and
//! `B(s) = ∫_s^1 ψh`,
//!
//! ```text
//! τ  = (a φ  + ψ  A + φ  B) / φ'(1),
//! τ' = (a φ' + ψ' A + φ' B) / φ'(1).
//! ```
//!
//! Every solve can also emit bound certificates for the fundamental pair
//! and the solution, with all constants explicit. `K = ∫ σ q` and
//! `E = e^K` below.

use std::sync::Arc;

use serde::Serialize;

use crate::certificate::{worst_of, Certificate};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, ScalarField, Vec3, VecField};

/// Relative tolerance on constancy of the Wronskian.
pub const WRONSKIAN_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct FundamentalPair {
    pub phi: ScalarField,
    pub dphi: ScalarField,
    pub psi: ScalarField,
    pub dpsi: ScalarField,
    /// `-φ'(1)`.
    pub wronskian: f64,
    /// `max_i |W(s_i) - W| / |W|` for the nodal `W = φψ' - φ'ψ`.
    pub wronskian_dev: f64,
}

impl FundamentalPair {
    pub fn dphi_one(&self) -> f64 {
        -self.wronskian
    }
}

/// Quantities evaluated from a string state alongside the tension.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct StateCheck {
    /// Right side of the stability lower bound, `a + ‖σh‖₁ e^{-K}`.
    pub sc1_rhs: f64,
    /// The bound actually implied by the solution formula, `sc1_rhs · e^{-K}`.
    pub sc1_explicit: f64,
    /// `min τ(s)/s` over nodes with `s > 0`.
    pub min_ratio: f64,
    /// `max_s ||x'| - 1|`.
    pub drift_max: f64,
}

#[derive(Clone, Debug)]
pub struct TensionSolve {
    pub tau: ScalarField,
    pub tau_prime: ScalarField,
    pub a: f64,
    pub h: ScalarField,
    pub q: ScalarField,
    /// Absent for the finite-difference oracle.
    pub pair: Option<FundamentalPair>,
    pub certificates: Vec<Certificate>,
    /// Number of nodes where a negative `q` was clipped to zero.
    pub q_clipped: usize,
    pub state: Option<StateCheck>,
}

impl TensionSolve {
    pub fn all_satisfied(&self) -> bool {
        self.certificates.iter().all(|c| c.satisfied)
    }
}

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what} at node {i}"))),
        None => Ok(()),
    }
}

fn clip(q: &ScalarField) -> (ScalarField, usize) {
    let mut n = 0;
    let values = q
        .values()
        .iter()
        .map(|&v| {
            if v < 0.0 {
                n += 1;
                0.0
            } else {
                v
            }
        })
        .collect();
    (ScalarField::new(q.mesh_arc().clone(), values).unwrap(), n)
}

/// One classical RK4 step of `(u, u')' = (u', q u)` over `[s, s + h]`.
fn rk4(u: f64, du: f64, h: f64, q0: f64, qm: f64, q1: f64) -> (f64, f64) {
    let (k1u, k1d) = (du, q0 * u);
    let (k2u, k2d) = (du + 0.5 * h * k1d, qm * (u + 0.5 * h * k1u));
    let (k3u, k3d) = (du + 0.5 * h * k2d, qm * (u + 0.5 * h * k2u));
    let (k4u, k4d) = (du + h * k3d, q1 * (u + h * k3u));
    (
        u + h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        du + h / 6.0 * (k1d + 2.0 * k2d + 2.0 * k3d + k4d),
    )
}

/// Fundamental pair for the potential `q`, clipping negative values to 0.
pub fn solve_fundamental(q: &ScalarField) -> Result<FundamentalPair> {
    check_finite("q", q.values())?;
    let (q, _) = clip(q);
    fundamental_clipped(&q)
}

fn fundamental_clipped(q: &ScalarField) -> Result<FundamentalPair> {
    let mesh = q.mesh();
    let n = mesh.intervals();
    let qv = q.values();
    let qm: Vec<f64> = (0..n)
        .map(|j| mesh.midpoint_value(qv, j).max(0.0))
        .collect();

    let mut phi = vec![0.0; n + 1];
    let mut dphi = vec![0.0; n + 1];
    dphi[0] = 1.0;
    for j in 0..n {
        let (u, d) = rk4(phi[j], dphi[j], mesh.spacing(j), qv[j], qm[j], qv[j + 1]);
        phi[j + 1] = u;
        dphi[j + 1] = d;
    }
    let mut psi = vec![0.0; n + 1];
    let mut dpsi = vec![0.0; n + 1];
    psi[n] = 1.0;
    for j in (0..n).rev() {
        let (u, d) = rk4(
            psi[j + 1],
            dpsi[j + 1],
            -mesh.spacing(j),
            qv[j + 1],
            qm[j],
            qv[j],
        );
        psi[j] = u;
        dpsi[j] = d;
    }
    check_finite("phi", &phi)?;
    check_finite("psi", &psi)?;
    let w = -dphi[n];
    if w.abs() < 1e-14 {
        return Err(Error::DegenerateWronskian(dphi[n]));
    }
    let wronskian_dev = (0..=n)
        .map(|i| ((phi[i] * dpsi[i] - dphi[i] * psi[i]) - w).abs() / w.abs())
        .fold(0.0, f64::max);
    let arc = q.mesh_arc();
    let field = |v: Vec<f64>| ScalarField::new(arc.clone(), v).unwrap();
    Ok(FundamentalPair {
        phi: field(phi),
        dphi: field(dphi),
        psi: field(psi),
        dpsi: field(dpsi),
        wronskian: w,
        wronskian_dev,
    })
}

/// `G(s, r) = φ(min)ψ(max)/φ'(1)`, interpolating the pair between nodes.
pub fn greens_function(pair: &FundamentalPair, s: f64, r: f64) -> f64 {
    let (lo, hi) = if s <= r { (s, r) } else { (r, s) };
    let mesh = pair.phi.mesh();
    let phi = mesh.interpolate(pair.phi.values(), lo);
    let psi = mesh.interpolate(pair.psi.values(), hi);
    phi * psi / pair.dphi_one()
}

/// `∫_0^1 s^p f` by mesh quadrature.
fn moment(f: &ScalarField, p: f64) -> f64 {
    let mesh = f.mesh();
    mesh.nodes()
        .iter()
        .zip(mesh.weights())
        .zip(f.values())
        .map(|((&s, &w), &v)| w * s.powf(p) * v)
        .sum()
}

fn abs_moment(f: &ScalarField, p: f64) -> f64 {
    let mesh = f.mesh();
    mesh.nodes()
        .iter()
        .zip(mesh.weights())
        .zip(f.values())
        .map(|((&s, &w), &v)| w * s.powf(p) * v.abs())
        .sum()
}

pub fn solve_bvp(q: &ScalarField, h: &ScalarField, a: f64) -> Result<TensionSolve> {
    solve_bvp_with(q, h, a, true)
}

/// As [`solve_bvp`]; `certify = false` skips the bound certificates.
pub fn solve_bvp_with(
    q: &ScalarField,
    h: &ScalarField,
    a: f64,
    certify: bool,
) -> Result<TensionSolve> {
    q.mesh().check(h.mesh())?;
    check_finite("q", q.values())?;
    check_finite("h", h.values())?;
    if !a.is_finite() {
        return Err(Error::NonFinite(format!("a = {a}")));
    }
    let (q, q_clipped) = clip(q);
    let pair = fundamental_clipped(&q)?;
    let mesh = q.mesh();
    let d1 = pair.dphi_one();
    let (phi, dphi, psi, dpsi) = (
        pair.phi.values(),
        pair.dphi.values(),
        pair.psi.values(),
        pair.dpsi.values(),
    );
    let hv = h.values();
    let ph: Vec<f64> = phi.iter().zip(hv).map(|(p, h)| p * h).collect();
    let sh: Vec<f64> = psi.iter().zip(hv).map(|(p, h)| p * h).collect();
    let big_a = mesh.cumulative_values(&ph);
    let big_b = mesh.cumulative_from_right(&sh);
    let n = mesh.intervals();
    let mut tau: Vec<f64> = (0..=n)
        .map(|i| (a * phi[i] + psi[i] * big_a[i] + phi[i] * big_b[i]) / d1)
        .collect();
    let mut dtau: Vec<f64> = (0..=n)
        .map(|i| (a * dphi[i] + dpsi[i] * big_a[i] + dphi[i] * big_b[i]) / d1)
        .collect();
    tau[0] = 0.0;
    dtau[n] = a;
    let arc = q.mesh_arc().clone();
    let mut out = TensionSolve {
        tau: ScalarField::new(arc.clone(), tau)?,
        tau_prime: ScalarField::new(arc, dtau)?,
        a,
        h: h.clone(),
        q,
        pair: Some(pair),
        certificates: Vec::new(),
        q_clipped,
        state: None,
    };
    if certify {
        out.certificates = solve_certificates(&out);
    }
    Ok(out)
}

/// Bounds on the fundamental pair: EstPhi, EstPsi and Wronskian constancy.
pub fn pair_certificates(pair: &FundamentalPair, q: &ScalarField) -> Vec<Certificate> {
    let mesh = q.mesh();
    let k = moment(q, 1.0);
    let e = k.exp();
    let q0 = moment(q, 0.0);
    let s = mesh.nodes();
    let n = s.len();
    let phi = pair.phi.values();
    let dphi = pair.dphi.values();
    let psi = pair.psi.values();
    let dpsi = pair.dpsi.values();
    let at = |name: &'static str| move |i: usize| format!("{name} s={:.6}", s[i]);
    let mut out: Vec<Certificate> = [
        worst_of("EstPhi", n, |i| (1.0, dphi[i]), at("1<=phi'")),
        worst_of("EstPhi", n, |i| (dphi[i], e), at("phi'<=E")),
        worst_of("EstPhi", n, |i| (s[i], phi[i]), at("s<=phi")),
        worst_of("EstPhi", n, |i| (phi[i], s[i] * e), at("phi<=sE")),
        worst_of("EstPsi", n, |i| (1.0, psi[i]), at("1<=psi")),
        worst_of("EstPsi", n, |i| (psi[i], e), at("psi<=E")),
        worst_of("EstPsi", n, |i| (dpsi[i], 0.0), at("psi'<=0")),
        worst_of(
            "EstPsi",
            n,
            |i| (dpsi[i].abs(), q0 * e),
            at("|psi'|<=int(q)E"),
        ),
        worst_of(
            "EstPsi",
            n,
            |i| (s[i] * dpsi[i].abs(), k * e),
            at("s|psi'|<=KE"),
        ),
    ]
    .into_iter()
    .flatten()
    .collect();
    out.push(Certificate::le(
        "Wronskian",
        "max relative deviation",
        pair.wronskian_dev,
        WRONSKIAN_TOL,
    ));
    out
}

fn solve_certificates(sol: &TensionSolve) -> Vec<Certificate> {
    let pair = sol.pair.as_ref().expect("shooting solve carries its pair");
    let mut out = pair_certificates(pair, &sol.q);
    let mesh = sol.q.mesh();
    let k = moment(&sol.q, 1.0);
    let e = k.exp();
    let a = sol.a;
    let s = mesh.nodes();
    let n = s.len();
    let tau = sol.tau.values();
    let dtau = sol.tau_prime.values();

    let h_nonneg = sol.h.values().iter().all(|&v| v >= 0.0);
    let lower = a + moment(&sol.h, 1.0) * (-k).exp();
    if h_nonneg && lower >= 0.0 {
        let h1 = moment(&sol.h, 0.0);
        let at = |name: &'static str| move |i: usize| format!("{name} s={:.6}", s[i]);
        out.extend(
            [
                worst_of(
                    "EstSolBVP1",
                    n,
                    |i| (s[i] * lower * (-k).exp(), tau[i]),
                    at("tau lower"),
                ),
                worst_of(
                    "EstSolBVP1",
                    n,
                    |i| (tau[i], s[i] * (a + h1)),
                    at("tau upper"),
                ),
                worst_of(
                    "EstSolBVP1",
                    n,
                    |i| (a - (a + h1) * k, dtau[i]),
                    at("tau' lower"),
                ),
                worst_of("EstSolBVP1", n, |i| (dtau[i], a + h1), at("tau' upper")),
            ]
            .into_iter()
            .flatten(),
        );
    }

    let c2 = (1.0 + k) * e * e;
    for &alpha in &[0.0, 0.5, 1.0] {
        let ha = abs_moment(&sol.h, alpha);
        let at = |name: &'static str| move |i: usize| format!("{name} alpha={alpha} s={:.6}", s[i]);
        out.extend(
            [
                worst_of(
                    "EstSolBVP2",
                    n,
                    |i| {
                        (
                            tau[i].abs(),
                            c2 * (a.abs() * s[i] + ha * s[i].powf(1.0 - alpha)),
                        )
                    },
                    at("|tau|"),
                ),
                worst_of(
                    "EstSolBVP2",
                    n,
                    |i| {
                        let sa = s[i].powf(alpha);
                        (sa * dtau[i].abs(), c2 * (a.abs() * sa + ha))
                    },
                    at("s^a|tau'|"),
                ),
            ]
            .into_iter()
            .flatten(),
        );
    }

    for &(p, alpha) in &[
        (1.0, 0.0),
        (2.0, 0.0),
        (2.0, 0.5),
        (f64::INFINITY, 0.0),
        (f64::INFINITY, 0.5),
        (f64::INFINITY, 1.0),
    ] {
        let ip = 1.0 / p;
        let hm = abs_moment(&sol.h, alpha + ip);
        let (lhs, rhs, label) = if p.is_infinite() {
            let lhs = s
                .iter()
                .zip(dtau)
                .fold(0.0f64, |m, (&s, &d)| m.max(s.powf(alpha) * d.abs()));
            (lhs, c2 * (a.abs() + hm), format!("alpha={alpha} p=inf"))
        } else {
            let integrand: Vec<f64> = s
                .iter()
                .zip(dtau)
                .map(|(&s, &d)| (s.powf(alpha) * d.abs()).powf(p))
                .collect();
            let lhs = mesh.integrate_values(&integrand).powf(ip);
            let c = (alpha + ip).powf(-ip);
            (
                lhs,
                e * a.abs() + e * e * (k + c) * hm,
                format!("alpha={alpha} p={p}"),
            )
        };
        out.push(Certificate::le("EstSolBVP3", label, lhs, rhs));
    }
    out
}

/// Second-order finite-difference solve of the same problem.
///
/// Interior rows use the three-point second difference on the actual
/// nodes; the `s = 1` row is the one-sided second-order derivative,
/// reduced to tridiagonal form by eliminating `τ_{N-2}` with row `N - 1`.
pub fn solve_bvp_oracle(q: &ScalarField, h: &ScalarField, a: f64) -> Result<TensionSolve> {
    q.mesh().check(h.mesh())?;
    check_finite("q", q.values())?;
    check_finite("h", h.values())?;
    if !a.is_finite() {
        return Err(Error::NonFinite(format!("a = {a}")));
    }
    let (q, q_clipped) = clip(q);
    let mesh = q.mesh();
    let s = mesh.nodes();
    let n = mesh.intervals();
    let mut lo = vec![0.0; n + 1];
    let mut di = vec![0.0; n + 1];
    let mut up = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n + 1];
    di[0] = 1.0;
    for i in 1..n {
        let hm = s[i] - s[i - 1];
        let hp = s[i + 1] - s[i];
        let c = 2.0 / (hm + hp);
        lo[i] = -c / hm;
        up[i] = -c / hp;
        di[i] = c / hm + c / hp + q.values()[i];
        rhs[i] = h.values()[i];
    }
    let w = crate::mesh::fornberg(s[n], &s[n - 2..=n], 1);
    let (c2, c1, c0) = (w[1][0], w[1][1], w[1][2]);
    let f = c2 / lo[n - 1];
    lo[n] = c1 - f * di[n - 1];
    di[n] = c0 - f * up[n - 1];
    rhs[n] = a - f * rhs[n - 1];
    let tau = thomas(&lo, &di, &up, &rhs)?;
    let dtau = mesh.derivative_values(&tau, 1)?;
    let arc = q.mesh_arc().clone();
    Ok(TensionSolve {
        tau: ScalarField::new(arc.clone(), tau)?,
        tau_prime: ScalarField::new(arc, dtau)?,
        a,
        h: h.clone(),
        q,
        pair: None,
        certificates: Vec::new(),
        q_clipped,
        state: None,
    })
}

fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = di[0];
    if piv.abs() < 1e-300 || !piv.is_finite() {
        return Err(Error::SingularSystem(0));
    }
    c[0] = up[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = di[i] - lo[i] * c[i - 1];
        if piv.abs() < 1e-300 || !piv.is_finite() {
            return Err(Error::SingularSystem(i));
        }
        c[i] = up[i] / piv;
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / piv;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// BVP data `(q, h, a) = (|x''|², |ẋ'|², -g·x'(1))` of a string state.
pub fn state_data(
    x: &VecField,
    xdot: &VecField,
    g: Vec3,
) -> Result<(ScalarField, ScalarField, f64)> {
    x.mesh().check(xdot.mesh())?;
    let q = x.derivative(2)?.norm_squared();
    let h = xdot.derivative(1)?.norm_squared();
    let dx = x.derivative(1)?;
    let a = -g.dot(dx.values().last().unwrap());
    Ok((q, h, a))
}

pub fn tension_from_state(x: &VecField, xdot: &VecField, g: Vec3) -> Result<TensionSolve> {
    tension_from_state_with(x, xdot, g, true)
}

pub fn tension_from_state_with(
    x: &VecField,
    xdot: &VecField,
    g: Vec3,
    certify: bool,
) -> Result<TensionSolve> {
    let (q, h, a) = state_data(x, xdot, g)?;
    let mut sol = solve_bvp_with(&q, &h, a, certify)?;
    if certify {
        sol.state = Some(state_check(&sol, x)?);
    }
    Ok(sol)
}

fn state_check(sol: &TensionSolve, x: &VecField) -> Result<StateCheck> {
    let k = moment(&sol.q, 1.0);
    let sc1_rhs = sol.a + moment(&sol.h, 1.0) * (-k).exp();
    let nodes = sol.tau.mesh().nodes();
    let min_ratio = nodes
        .iter()
        .zip(sol.tau.values())
        .skip(1)
        .map(|(&s, &t)| t / s)
        .fold(f64::INFINITY, f64::min);
    let drift_max = x
        .derivative(1)?
        .values()
        .iter()
        .map(|v| (v.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(StateCheck {
        sc1_rhs,
        sc1_explicit: sc1_rhs * (-k).exp(),
        min_ratio,
        drift_max,
    })
}

/// Bounds on `φ̇` from a centered time difference of the pair.
///
/// `minus` and `plus` are the pairs at `t - δ` and `t + δ`; `x`, `xdot`
/// are the state at `t`. Two bound variants are recorded: the constant as
/// stated (`EstDtPhi`) and with the factor 2 carried by
/// `q̇ = 2 ẋ''·x''` (`EstDtPhi[proof]`).
pub fn dphi_dt_certificates(
    minus: &FundamentalPair,
    plus: &FundamentalPair,
    delta: f64,
    x: &VecField,
    xdot: &VecField,
) -> Result<Vec<Certificate>> {
    if !(delta > 0.0) {
        return Err(Error::InsufficientSamples { need: 2, have: 1 });
    }
    let mesh = x.mesh();
    mesh.check(minus.phi.mesh())?;
    mesh.check(plus.phi.mesh())?;
    let x2 = x.derivative(2)?;
    let v2 = xdot.derivative(2)?;
    let q = x2.norm_squared();
    let k = moment(&q, 1.0);
    let nx = k.sqrt();
    let nv = moment(&v2.norm_squared(), 1.0).sqrt();
    let stated = nv * nx * (2.0 * k).exp();
    Ok(dphi_dt_with_bound(minus, plus, delta, mesh, stated))
}

fn dphi_dt_with_bound(
    minus: &FundamentalPair,
    plus: &FundamentalPair,
    delta: f64,
    mesh: &Mesh,
    stated: f64,
) -> Vec<Certificate> {
    let s = mesh.nodes();
    let n = s.len();
    let rate = |f: fn(&FundamentalPair) -> &ScalarField, i: usize| {
        ((f(plus).values()[i] - f(minus).values()[i]) / (2.0 * delta)).abs()
    };
    let mut out = Vec::new();
    for (lemma, bound) in [("EstDtPhi", stated), ("EstDtPhi[proof]", 2.0 * stated)] {
        out.extend(worst_of(
            lemma,
            n,
            |i| (rate(|p| &p.dphi, i), bound),
            |i| format!("|phi_t'| s={:.6}", s[i]),
        ));
        out.extend(worst_of(
            lemma,
            n - 1,
            |i| (rate(|p| &p.phi, i + 1) / s[i + 1], bound),
            |i| format!("|phi_t|/s s={:.6}", s[i + 1]),
        ));
    }
    out
}

/// EstDtPhi for a state and a direction: `x'' ± δ ẋ''` give the pairs.
pub fn dphi_dt_from_curvature(
    x2: &VecField,
    v2: &VecField,
    delta: f64,
) -> Result<Vec<Certificate>> {
    let mesh: &Arc<Mesh> = x2.mesh_arc();
    let shifted = |sign: f64| -> Result<FundamentalPair> {
        let values = x2
            .values()
            .iter()
            .zip(v2.values())
            .map(|(a, b)| (a + b * (sign * delta)).norm_squared())
            .collect();
        solve_fundamental(&ScalarField::new(mesh.clone(), values)?)
    };
    let minus = shifted(-1.0)?;
    let plus = shifted(1.0)?;
    let q = x2.norm_squared();
    let k = moment(&q, 1.0);
    let nv = moment(&v2.norm_squared(), 1.0).sqrt();
    let stated = nv * k.sqrt() * (2.0 * k).exp();
    Ok(dphi_dt_with_bound(&minus, &plus, delta, mesh, stated))
}
