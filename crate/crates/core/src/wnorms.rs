//! Weighted Sobolev norms on `(0, 1)` and the averaging operator.
//!
//! All norms are computed from nodal derivative jets with the mesh
//! quadrature. The calculus-inequality certificates (`cal_ineq`, `est_m`)
//! instead treat nodal data as a piecewise-linear function and evaluate
//! both sides of the inequality for that function, so an inequality that
//! holds with equality for the continuous problem also holds to rounding
//! on the mesh.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Serialize;

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::gauss::GaussLegendre;
use crate::mesh::{Mesh, ScalarField, VecField};

pub const DEFAULT_EPS: f64 = 0.25;
pub const MAX_X: usize = 4;
pub const MAX_Y: usize = 3;

/// `(weight power, derivative order)` pairs; the squared norm is the sum
/// of `‖s^w ∂^d u‖²` over the list.
type Terms = &'static [(f64, usize)];

fn x_terms(m: usize) -> Option<Terms> {
    Some(match m {
        0 => &[(0.0, 0)],
        1 => &[(0.0, 0), (0.5, 1)],
        2 => &[(0.0, 0), (0.0, 1), (1.0, 2)],
        3 => &[(0.0, 0), (0.0, 1), (0.5, 2), (1.5, 3)],
        4 => &[(0.0, 0), (0.0, 1), (0.0, 2), (1.0, 3), (2.0, 4)],
        _ => return None,
    })
}

fn y_terms(m: usize) -> Option<Terms> {
    Some(match m {
        0 => &[(0.5, 0)],
        1 => &[(0.0, 0), (1.0, 1)],
        2 => &[(0.0, 0), (0.5, 1), (1.5, 2)],
        3 => &[(0.0, 0), (0.0, 1), (1.0, 2), (2.0, 3)],
        _ => return None,
    })
}

/// Nodal derivatives `∂^0 u, …, ∂^4 u`.
pub struct Jets<'a> {
    mesh: &'a Mesh,
    d: Vec<Vec<f64>>,
}

impl<'a> Jets<'a> {
    pub fn new(u: &'a ScalarField) -> Result<Self> {
        let mesh = u.mesh();
        let d = (0..=MAX_X)
            .map(|k| mesh.derivative_values(u.values(), k))
            .collect::<Result<_>>()?;
        Ok(Self { mesh, d })
    }

    fn weighted_sq(&self, w: f64, k: usize) -> f64 {
        weighted_l2_sq(self.mesh, &self.d[k], w)
    }

    fn sum_terms(&self, terms: Terms, shift: usize) -> f64 {
        terms
            .iter()
            .map(|&(w, k)| self.weighted_sq(w, k + shift))
            .sum()
    }

    fn sup(&self, w: f64, k: usize) -> f64 {
        self.mesh
            .nodes()
            .iter()
            .zip(&self.d[k])
            .fold(0.0, |m, (&s, v)| m.max(spow(s, w) * v.abs()))
    }
}

fn spow(s: f64, w: f64) -> f64 {
    if w == 0.0 {
        1.0
    } else {
        s.powf(w)
    }
}

/// `∫ s^{2w} v² ds` by mesh quadrature.
pub fn weighted_l2_sq(mesh: &Mesh, v: &[f64], w: f64) -> f64 {
    mesh.nodes()
        .iter()
        .zip(mesh.weights())
        .zip(v)
        .map(|((&s, &q), &x)| q * spow(s, 2.0 * w) * x * x)
        .sum()
}

pub fn norm_l2(u: &ScalarField) -> f64 {
    weighted_l2_sq(u.mesh(), u.values(), 0.0).sqrt()
}

/// Discrete `L^∞`: maximum over nodes.
pub fn norm_linf(u: &ScalarField) -> f64 {
    u.max_abs()
}

pub fn norm_x(u: &ScalarField, m: usize) -> Result<f64> {
    let terms = x_terms(m).ok_or(Error::NormIndex(m, "X"))?;
    Ok(Jets::new(u)?.sum_terms(terms, 0).sqrt())
}

pub fn norm_y(u: &ScalarField, m: usize) -> Result<f64> {
    let terms = y_terms(m).ok_or(Error::NormIndex(m, "Y"))?;
    Ok(Jets::new(u)?.sum_terms(terms, 0).sqrt())
}

pub fn norm_xeps(u: &ScalarField, k: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::BadEpsilon(eps));
    }
    let j = Jets::new(u)?;
    xeps_from_jets(&j, k, eps).map(f64::sqrt)
}

fn xeps_from_jets(j: &Jets, k: usize, eps: f64) -> Result<f64> {
    Ok(match k {
        1 => j.sup(eps, 0).powi(2) + j.weighted_sq(0.5 + eps, 1),
        2 => j.sup(0.0, 0).powi(2) + j.weighted_sq(eps, 1) + j.weighted_sq(1.0 + eps, 2),
        3 => {
            j.sup(0.0, 0).powi(2)
                + j.sup(eps, 1).powi(2)
                + j.weighted_sq(0.5 + eps, 2)
                + j.weighted_sq(1.5 + eps, 3)
        }
        _ => return Err(Error::NormIndex(k, "Xeps")),
    })
}

/// Both sides of `‖u‖²_{X^{m+1}} = ‖u‖²_{L²} + ‖u′‖²_{Y^m}`, with `u′` taken
/// from the same derivative jets as the left side.
pub fn ym1_sides(u: &ScalarField, m: usize) -> Result<(f64, f64)> {
    let xt = x_terms(m + 1).ok_or(Error::NormIndex(m + 1, "X"))?;
    let yt = y_terms(m).ok_or(Error::NormIndex(m, "Y"))?;
    let j = Jets::new(u)?;
    let lhs = j.sum_terms(xt, 0);
    let rhs = j.weighted_sq(0.0, 0) + j.sum_terms(yt, 1);
    Ok((lhs, rhs))
}

/// Componentwise access so vector fields can be normed as sums of squares.
pub trait Components {
    fn components(&self) -> Vec<ScalarField>;
}

impl Components for ScalarField {
    fn components(&self) -> Vec<ScalarField> {
        vec![self.clone()]
    }
}

impl Components for VecField {
    fn components(&self) -> Vec<ScalarField> {
        (0..3).map(|c| self.component(c)).collect()
    }
}

fn sq_sum<T: Components>(u: &T, f: impl Fn(&ScalarField) -> Result<f64>) -> Result<f64> {
    u.components().iter().map(|c| f(c).map(|v| v * v)).sum()
}

pub fn norm_x_of<T: Components>(u: &T, m: usize) -> Result<f64> {
    sq_sum(u, |c| norm_x(c, m)).map(f64::sqrt)
}

pub fn norm_xeps_of<T: Components>(u: &T, k: usize, eps: f64) -> Result<f64> {
    sq_sum(u, |c| norm_xeps(c, k, eps)).map(f64::sqrt)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct NormReport {
    pub field: String,
    pub t: f64,
    pub values: BTreeMap<String, f64>,
}

impl NormReport {
    /// Every supported norm of `u`; keys `X0..X4`, `Y0..Y3`, `Xeps1..Xeps3`,
    /// `eps`, `L2`, `Linf`.
    pub fn compute(field: &str, u: &ScalarField, t: f64, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::BadEpsilon(eps));
        }
        let j = Jets::new(u)?;
        let mut values = BTreeMap::new();
        for m in 0..=MAX_X {
            values.insert(format!("X{m}"), j.sum_terms(x_terms(m).unwrap(), 0).sqrt());
        }
        for m in 0..=MAX_Y {
            values.insert(format!("Y{m}"), j.sum_terms(y_terms(m).unwrap(), 0).sqrt());
        }
        for k in 1..=3 {
            values.insert(format!("Xeps{k}"), xeps_from_jets(&j, k, eps)?.sqrt());
        }
        values.insert("eps".into(), eps);
        values.insert("L2".into(), j.weighted_sq(0.0, 0).sqrt());
        values.insert("Linf".into(), j.sup(0.0, 0));
        Ok(Self {
            field: field.to_string(),
            t,
            values,
        })
    }

    /// Flat `{"X1": v, ...}` object.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.values).expect("finite map serializes")
    }
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct TripleBarReport {
    pub m: usize,
    pub full: f64,
    pub star: f64,
    pub eps_star: Option<f64>,
}

/// `⫼u⫼_m`, `⫼u⫼_{m,*}` and, when three jets are present, `⫼u⫼_{3,*,ε}`.
///
/// `jets[j]` is `∂_t^j u`; at least `m + 1` entries are required.
pub fn triple_bar<T: Components>(jets: &[T], m: usize, eps: f64) -> Result<TripleBarReport> {
    if m > MAX_X {
        return Err(Error::NormIndex(m, "triple-bar"));
    }
    if jets.len() < m + 1 {
        return Err(Error::InsufficientSamples {
            need: m + 1,
            have: jets.len(),
        });
    }
    let mut full = 0.0;
    let mut star = 0.0;
    for (j, u) in jets.iter().take(m + 1).enumerate() {
        let v = norm_x_of(u, m - j)?.powi(2);
        full += v;
        if j < m {
            star += v;
        }
    }
    let eps_star = if jets.len() >= 3 {
        let mut e = 0.0;
        for (j, u) in jets.iter().take(3).enumerate() {
            e += norm_xeps_of(u, 3 - j, eps)?.powi(2);
        }
        Some(e.sqrt())
    } else {
        None
    };
    Ok(TripleBarReport {
        m,
        full: full.sqrt(),
        star: star.sqrt(),
        eps_star,
    })
}

/// `(𝓜u)(s) = (1/s)∫_0^s u`, with the limit `u(0)` at `s = 0`.
pub fn averaging(u: &ScalarField) -> ScalarField {
    let mesh = u.mesh();
    let c = mesh.cumulative_values(u.values());
    let values = mesh
        .nodes()
        .iter()
        .zip(&c)
        .enumerate()
        .map(|(i, (&s, &ci))| if i == 0 { u.values()[0] } else { ci / s })
        .collect();
    ScalarField::new(u.mesh_arc().clone(), values).expect("same mesh")
}

fn gl() -> &'static GaussLegendre {
    static GL: OnceLock<GaussLegendre> = OnceLock::new();
    GL.get_or_init(|| GaussLegendre::new(16))
}

/// Piecewise-linear view of nodal data.
struct Linear<'a> {
    nodes: &'a [f64],
    vals: &'a [f64],
}

impl Linear<'_> {
    fn at(&self, j: usize, s: f64) -> f64 {
        let (a, b) = (self.nodes[j], self.nodes[j + 1]);
        let t = (s - a) / (b - a);
        self.vals[j] * (1.0 - t) + self.vals[j + 1] * t
    }

    /// Subintervals of panel `j` on which the interpolant keeps one sign.
    fn pieces(&self, j: usize) -> Vec<(f64, f64)> {
        let (a, b) = (self.nodes[j], self.nodes[j + 1]);
        let (ua, ub) = (self.vals[j], self.vals[j + 1]);
        if ua * ub < 0.0 {
            let c = a + (b - a) * ua / (ua - ub);
            vec![(a, c), (c, b)]
        } else {
            vec![(a, b)]
        }
    }
}

/// `∫_0^1 f` where `f(j, s)` is smooth on each piece of panel `j`.
///
/// Each piece `[a, b]` is mapped by `s = a + (b - a)t²`, which absorbs
/// half-integer powers of `s` on the first panel.
fn pl_integral(lin: &Linear, f: impl Fn(usize, f64) -> f64) -> f64 {
    let g = gl();
    let mut total = 0.0;
    for j in 0..lin.nodes.len() - 1 {
        for (a, b) in lin.pieces(j) {
            let w = b - a;
            total += g.integrate(0.0, 1.0, |t| 2.0 * w * t * f(j, a + w * t * t));
        }
    }
    total
}

fn pl_sup(lin: &Linear, f: impl Fn(usize, f64) -> f64) -> f64 {
    const SAMPLES: usize = 64;
    let mut m: f64 = 0.0;
    for j in 0..lin.nodes.len() - 1 {
        for (a, b) in lin.pieces(j) {
            for k in 0..=SAMPLES {
                let s = a + (b - a) * k as f64 / SAMPLES as f64;
                m = m.max(f(j, s).abs());
            }
        }
    }
    m
}

/// `‖f‖_{L^p}` with `f` given panelwise.
fn pl_norm(lin: &Linear, p: f64, f: impl Fn(usize, f64) -> f64) -> f64 {
    if p.is_infinite() {
        pl_sup(lin, f)
    } else {
        pl_integral(lin, |j, s| f(j, s).abs().powf(p)).powf(1.0 / p)
    }
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::Hypothesis {
            lemma: "Lp",
            detail: format!("exponent p = {p} must lie in [1, inf]"),
        })
    }
}

fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

/// `‖s^α H‖_p ≤ (α + 1/p)^{-1/p} ‖s^{α+1/p} h‖_{L¹}` with `H(s) = ∫_s^1 h`.
pub fn cal_ineq(h: &ScalarField, alpha: f64, p: f64) -> Result<Certificate> {
    check_p(p)?;
    let ip = 1.0 / p;
    if !(alpha + ip > 0.0) {
        return Err(Error::Hypothesis {
            lemma: "CalIneq",
            detail: format!("alpha + 1/p = {} must be positive", alpha + ip),
        });
    }
    let lin = Linear {
        nodes: h.mesh().nodes(),
        vals: h.values(),
    };
    let n = lin.nodes.len() - 1;
    // Exact tail integrals of the interpolant at the nodes.
    let mut tail = vec![0.0; n + 1];
    for j in (0..n).rev() {
        tail[j] =
            tail[j + 1] + 0.5 * (lin.nodes[j + 1] - lin.nodes[j]) * (lin.vals[j] + lin.vals[j + 1]);
    }
    let big_h = |j: usize, s: f64| {
        let b = lin.nodes[j + 1];
        tail[j + 1] + 0.5 * (b - s) * (lin.at(j, s) + lin.vals[j + 1])
    };
    let lhs = pl_norm(&lin, p, |j, s| spow(s, alpha) * big_h(j, s));
    let l1 = pl_integral(&lin, |j, s| spow(s, alpha + ip) * lin.at(j, s).abs());
    let rhs = (alpha + ip).powf(-ip) * l1;
    Ok(Certificate::le(
        "CalIneq",
        format!("alpha={alpha} p={}", p_label(p)),
        lhs,
        rhs,
    ))
}

/// `‖s^β U_α‖_p ≤ (α − β + 1 − 1/p)^{-1} ‖s^β u‖_p` with
/// `U_α(s) = s^{-α-1} ∫_0^s σ^α u`.
pub fn est_m(u: &ScalarField, alpha: f64, beta: f64, p: f64) -> Result<Certificate> {
    check_p(p)?;
    let ip = 1.0 / p;
    if !(alpha + 1.0 > beta + ip) {
        return Err(Error::Hypothesis {
            lemma: "EstM",
            detail: format!(
                "need alpha + 1 > beta + 1/p, got alpha={alpha} beta={beta} p={}",
                p_label(p)
            ),
        });
    }
    let lin = Linear {
        nodes: u.mesh().nodes(),
        vals: u.values(),
    };
    let n = lin.nodes.len() - 1;
    // ∫_a^s σ^α (c0 + c1 σ) dσ in closed form on panel j.
    let moment = |j: usize, s: f64| {
        let (a, b) = (lin.nodes[j], lin.nodes[j + 1]);
        let c1 = (lin.vals[j + 1] - lin.vals[j]) / (b - a);
        let c0 = lin.vals[j] - c1 * a;
        c0 * (s.powf(alpha + 1.0) - a.powf(alpha + 1.0)) / (alpha + 1.0)
            + c1 * (s.powf(alpha + 2.0) - a.powf(alpha + 2.0)) / (alpha + 2.0)
    };
    let mut head = vec![0.0; n + 1];
    for j in 0..n {
        head[j + 1] = head[j] + moment(j, lin.nodes[j + 1]);
    }
    let u_alpha = |j: usize, s: f64| {
        if j == 0 {
            // Divide analytically on the first panel, where a = 0.
            let b = lin.nodes[1];
            let c1 = (lin.vals[1] - lin.vals[0]) / b;
            lin.vals[0] / (alpha + 1.0) + c1 * s / (alpha + 2.0)
        } else {
            (head[j] + moment(j, s)) / s.powf(alpha + 1.0)
        }
    };
    let lhs = pl_norm(&lin, p, |j, s| spow(s, beta) * u_alpha(j, s));
    let base = pl_norm(&lin, p, |j, s| spow(s, beta) * lin.at(j, s));
    let rhs = base / (alpha - beta + 1.0 - ip);
    Ok(Certificate::le(
        "EstM",
        format!("alpha={alpha} beta={beta} p={}", p_label(p)),
        lhs,
        rhs,
    ))
}

/// `‖𝓜u‖_{X^m} ≤ 2‖u‖_{X^m}`.
pub fn wem1(u: &ScalarField, m: usize) -> Result<Certificate> {
    let lhs = norm_x(&averaging(u), m)?;
    let rhs = 2.0 * norm_x(u, m)?;
    Ok(Certificate::le("WEM1", format!("m={m}"), lhs, rhs))
}

/// CalIneq (with `h = u`), EstM and WEM1 for `m = 0..=4`.
pub fn check_inequalities(
    u: &ScalarField,
    p: f64,
    alpha: f64,
    beta: f64,
) -> Result<Vec<Certificate>> {
    let mut out = vec![cal_ineq(u, alpha, p)?, est_m(u, alpha, beta, p)?];
    for m in 0..=MAX_X {
        out.push(wem1(u, m)?);
    }
    Ok(out)
}
