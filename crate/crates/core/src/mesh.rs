//! Discretization of the arc-length interval `[0, 1]`.
//!
//! Nodes follow `s_i = (i/N)^gamma`, clustering toward the free end `s = 0`
//! where the tension degenerates. Derivative operators are finite-difference
//! stencils computed with Fornberg's algorithm on the actual (possibly
//! nonuniform) nodes: centered windows in the interior and one-sided windows
//! at both ends. Quadrature is the trapezoid rule for order 2 and a
//! panelwise cubic rule for order 4; cumulative integrals use the same panel
//! rules, so `cumulative(f)[N] == integrate(f)` up to summation order.

use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Highest derivative order with assembled stencils.
pub const MAX_DERIVATIVE: usize = 4;

#[derive(Clone, Debug)]
struct Stencil {
    start: usize,
    coeffs: Vec<f64>,
}

impl Stencil {
    fn apply(&self, values: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(&values[self.start..])
            .map(|(c, v)| c * v)
            .sum()
    }

    fn apply_vec(&self, values: &[Vec3]) -> Vec3 {
        self.coeffs
            .iter()
            .zip(&values[self.start..])
            .fold(Vec3::zeros(), |acc, (c, v)| acc + v * *c)
    }
}

#[derive(Debug)]
pub struct Mesh {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    grading: f64,
    order: usize,
    /// `derivs[k - 1][i]` is the stencil for the k-th derivative at node i.
    derivs: Vec<Vec<Stencil>>,
    /// Quadrature rule for each panel `[s_j, s_{j+1}]`.
    panels: Vec<Stencil>,
    /// Cubic interpolation coefficients at each panel midpoint.
    midpoints: Vec<Stencil>,
}

impl PartialEq for Mesh {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order && self.nodes == other.nodes
    }
}

impl Mesh {
    /// Graded mesh with `n` intervals (`n + 1` nodes).
    pub fn build(n: usize, grading: f64, order: usize) -> Result<Arc<Mesh>> {
        if !grading.is_finite() || grading < 1.0 {
            return Err(Error::BadGrading(grading));
        }
        if n < 16 {
            return Err(Error::TooFewNodes(n));
        }
        let mut nodes: Vec<f64> = (0..=n)
            .map(|i| (i as f64 / n as f64).powf(grading))
            .collect();
        nodes[0] = 0.0;
        nodes[n] = 1.0;
        Self::assemble(nodes, grading, order)
    }

    /// Mesh on caller-supplied nodes (e.g. read from a CSV file).
    pub fn from_nodes(nodes: Vec<f64>, order: usize) -> Result<Arc<Mesh>> {
        if nodes.len() < 17 {
            return Err(Error::TooFewNodes(nodes.len().saturating_sub(1)));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(Error::BadNodes(
                "first node must be 0 and last node 1".into(),
            ));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::BadNodes("nodes must be strictly increasing".into()));
        }
        Self::assemble(nodes, f64::NAN, order)
    }

    fn assemble(nodes: Vec<f64>, grading: f64, order: usize) -> Result<Arc<Mesh>> {
        if order != 2 && order != 4 {
            return Err(Error::BadStencilOrder(order));
        }
        let n = nodes.len() - 1;
        let derivs = (1..=MAX_DERIVATIVE)
            .map(|k| {
                (0..=n)
                    .map(|i| derivative_stencil(&nodes, i, k, order))
                    .collect()
            })
            .collect();
        let mut panels: Vec<Stencil> = (0..n).map(|j| panel_rule(&nodes, j, order)).collect();
        let mut weights = node_weights(&panels, n);
        // Strong grading can make the cubic rule weight s = 0 negatively;
        // the panels next to the free end then fall back to the trapezoid.
        let mut k = 0;
        while k < n && weights.iter().any(|&w| w <= 0.0) {
            panels[k] = panel_rule(&nodes, k, 2);
            weights = node_weights(&panels, n);
            k += 1;
        }
        let midpoints = (0..n).map(|j| midpoint_rule(&nodes, j)).collect();
        Ok(Arc::new(Mesh {
            nodes,
            weights,
            grading,
            order,
            derivs,
            panels,
            midpoints,
        }))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of intervals `N`; there are `N + 1` nodes.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Grading exponent, `NaN` for meshes built from explicit nodes.
    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn stencil_order(&self) -> usize {
        self.order
    }

    pub fn spacing(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    /// Quadrature of nodal samples over `[0, 1]`.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        self.check(f.mesh())?;
        Ok(self.integrate_values(&f.values))
    }

    /// `out[i] = ∫_0^{s_i} f`.
    pub fn cumulative_values(&self, values: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        out.push(0.0);
        for p in &self.panels {
            acc += p.apply(values);
            out.push(acc);
        }
        out
    }

    /// `out[i] = ∫_{s_i}^1 f`, accumulated from the right end.
    pub fn cumulative_from_right(&self, values: &[f64]) -> Vec<f64> {
        let n = self.intervals();
        let mut out = vec![0.0; n + 1];
        let mut acc = 0.0;
        for j in (0..n).rev() {
            acc += self.panels[j].apply(values);
            out[j] = acc;
        }
        out
    }

    pub fn cumulative_vec(&self, values: &[Vec3]) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.len());
        let mut acc = Vec3::zeros();
        out.push(acc);
        for p in &self.panels {
            acc += p.apply_vec(values);
            out.push(acc);
        }
        out
    }

    /// Cubic interpolant of nodal values at the midpoint of panel `j`.
    pub fn midpoint_value(&self, values: &[f64], j: usize) -> f64 {
        self.midpoints[j].apply(values)
    }

    /// Local cubic Lagrange interpolation of nodal samples at arbitrary `s`.
    pub fn interpolate(&self, values: &[f64], s: f64) -> f64 {
        let n = self.intervals();
        let s = s.clamp(0.0, 1.0);
        let j = match self.nodes.binary_search_by(|x| x.partial_cmp(&s).unwrap()) {
            Ok(i) => return values[i],
            Err(i) => (i - 1).min(n - 1),
        };
        let start = cubic_window(j, n);
        let xs = &self.nodes[start..start + 4];
        (0..4)
            .map(|m| {
                let mut l = 1.0;
                for q in 0..4 {
                    if q != m {
                        l *= (s - xs[q]) / (xs[m] - xs[q]);
                    }
                }
                l * values[start + m]
            })
            .sum()
    }

    pub fn derivative_values(&self, values: &[f64], k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return Ok(values.to_vec());
        }
        if k > MAX_DERIVATIVE {
            return Err(Error::DerivativeOrder(k));
        }
        Ok(self.derivs[k - 1]
            .iter()
            .map(|st| st.apply(values))
            .collect())
    }

    pub fn derivative_vec(&self, values: &[Vec3], k: usize) -> Result<Vec<Vec3>> {
        if k == 0 {
            return Ok(values.to_vec());
        }
        if k > MAX_DERIVATIVE {
            return Err(Error::DerivativeOrder(k));
        }
        Ok(self.derivs[k - 1]
            .iter()
            .map(|st| st.apply_vec(values))
            .collect())
    }

    pub fn derivative(&self, f: &ScalarField, k: usize) -> Result<ScalarField> {
        self.check(f.mesh())?;
        let values = self.derivative_values(&f.values, k)?;
        Ok(ScalarField {
            mesh: f.mesh.clone(),
            values,
        })
    }

    pub(crate) fn check(&self, other: &Mesh) -> Result<()> {
        if std::ptr::eq(self, other) || self == other {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }
}

fn node_weights(panels: &[Stencil], n: usize) -> Vec<f64> {
    let mut weights = vec![0.0; n + 1];
    for p in panels {
        for (m, c) in p.coeffs.iter().enumerate() {
            weights[p.start + m] += c;
        }
    }
    weights
}

fn cubic_window(j: usize, n: usize) -> usize {
    j.saturating_sub(1).min(n - 3)
}

fn derivative_stencil(nodes: &[f64], i: usize, k: usize, order: usize) -> Stencil {
    let n_nodes = nodes.len();
    // Odd, symmetric window in the interior; k + order points one-sided.
    let centered = if (k + order - 1) % 2 == 1 {
        k + order - 1
    } else {
        k + order
    };
    let half = centered / 2;
    let (start, size) = if i >= half && i + half < n_nodes {
        (i - half, centered)
    } else {
        let size = k + order;
        let start = if i < half { 0 } else { n_nodes - size };
        (start, size)
    };
    let c = fornberg(nodes[i], &nodes[start..start + size], k);
    Stencil {
        start,
        coeffs: c[k].clone(),
    }
}

fn panel_rule(nodes: &[f64], j: usize, order: usize) -> Stencil {
    let a = nodes[j];
    let b = nodes[j + 1];
    if order == 2 {
        let h = b - a;
        return Stencil {
            start: j,
            coeffs: vec![0.5 * h, 0.5 * h],
        };
    }
    let n = nodes.len() - 1;
    let start = cubic_window(j, n);
    let xs = &nodes[start..start + 4];
    // Two-point Gauss integrates the cubic Lagrange basis exactly.
    let mid = 0.5 * (a + b);
    let h = b - a;
    let off = 0.5 * h / 3f64.sqrt();
    let pts = [mid - off, mid + off];
    let coeffs = (0..4)
        .map(|m| {
            pts.iter()
                .map(|&x| {
                    let mut l = 1.0;
                    for q in 0..4 {
                        if q != m {
                            l *= (x - xs[q]) / (xs[m] - xs[q]);
                        }
                    }
                    0.5 * h * l
                })
                .sum()
        })
        .collect();
    Stencil { start, coeffs }
}

fn midpoint_rule(nodes: &[f64], j: usize) -> Stencil {
    let n = nodes.len() - 1;
    let start = cubic_window(j, n);
    let xs = &nodes[start..start + 4];
    let x = 0.5 * (nodes[j] + nodes[j + 1]);
    let coeffs = (0..4)
        .map(|m| {
            let mut l = 1.0;
            for q in 0..4 {
                if q != m {
                    l *= (x - xs[q]) / (xs[m] - xs[q]);
                }
            }
            l
        })
        .collect();
    Stencil { start, coeffs }
}

/// Fornberg's finite-difference weights at `z` for derivative orders `0..=m`.
///
/// Returns `c[d][j]`: weight of sample `x[j]` in the d-th derivative.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Nodal samples of a real function.
#[derive(Clone, Debug)]
pub struct ScalarField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::MeshMismatch);
        }
        Ok(Self { mesh, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(mesh: &Arc<Mesh>, f: F) -> Self {
        let values = mesh.nodes().iter().map(|&s| f(s)).collect();
        Self {
            mesh: mesh.clone(),
            values,
        }
    }

    pub fn constant(mesh: &Arc<Mesh>, c: f64) -> Self {
        Self::from_fn(mesh, |_| c)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map<F: Fn(f64, f64) -> f64>(&self, f: F) -> Self {
        let values = self
            .mesh
            .nodes()
            .iter()
            .zip(&self.values)
            .map(|(&s, &v)| f(s, v))
            .collect();
        Self {
            mesh: self.mesh.clone(),
            values,
        }
    }

    pub fn derivative(&self, k: usize) -> Result<Self> {
        self.mesh.derivative(self, k)
    }

    pub fn integrate(&self) -> f64 {
        self.mesh.integrate_values(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Nodal samples of an R^3-valued function.
#[derive(Clone, Debug)]
pub struct VecField {
    mesh: Arc<Mesh>,
    values: Vec<Vec3>,
}

impl VecField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<Vec3>) -> Result<Self> {
        if values.len() != mesh.len() {
            return Err(Error::MeshMismatch);
        }
        Ok(Self { mesh, values })
    }

    pub fn from_fn<F: Fn(f64) -> Vec3>(mesh: &Arc<Mesh>, f: F) -> Self {
        let values = mesh.nodes().iter().map(|&s| f(s)).collect();
        Self {
            mesh: mesh.clone(),
            values,
        }
    }

    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        Self::from_fn(mesh, |_| Vec3::zeros())
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec3] {
        &mut self.values
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| v[c]).collect(),
        }
    }

    pub fn derivative(&self, k: usize) -> Result<Self> {
        let values = self.mesh.derivative_vec(&self.values, k)?;
        Ok(Self {
            mesh: self.mesh.clone(),
            values,
        })
    }

    /// Pointwise dot product with another field on the same mesh.
    pub fn dot(&self, other: &VecField) -> Result<ScalarField> {
        self.mesh.check(other.mesh())?;
        Ok(ScalarField {
            mesh: self.mesh.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a.dot(b))
                .collect(),
        })
    }

    pub fn norm_squared(&self) -> ScalarField {
        ScalarField {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| v.norm_squared()).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// `max_i |self_i - other_i|`.
    pub fn max_distance(&self, other: &VecField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            Mesh::build(15, 1.0, 2),
            Err(Error::TooFewNodes(15))
        ));
        assert!(matches!(
            Mesh::build(64, f64::NAN, 2),
            Err(Error::BadGrading(_))
        ));
        assert!(matches!(
            Mesh::build(64, f64::INFINITY, 2),
            Err(Error::BadGrading(_))
        ));
        assert!(matches!(Mesh::build(64, 0.5, 2), Err(Error::BadGrading(_))));
        assert!(matches!(
            Mesh::build(64, 1.0, 3),
            Err(Error::BadStencilOrder(3))
        ));
    }

    #[test]
    fn node_placement() {
        let m = Mesh::build(100, 1.0, 2).unwrap();
        assert_eq!(m.nodes()[50], 0.5);
        let m = Mesh::build(100, 2.0, 2).unwrap();
        assert!((m.nodes()[50] - 0.25).abs() < 1e-15);
        assert_eq!(m.nodes()[0], 0.0);
        assert_eq!(m.nodes()[100], 1.0);
    }

    #[test]
    fn weights_positive_and_normalized() {
        for &(n, g, o) in &[
            (16, 1.0, 2),
            (100, 2.0, 2),
            (64, 1.0, 4),
            (200, 2.0, 4),
            (37, 3.0, 4),
        ] {
            let m = Mesh::build(n, g, o).unwrap();
            assert!(m.weights().iter().all(|&w| w > 0.0));
            let total: f64 = m.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "{total}");
            assert!(m.nodes().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn first_derivative_exact_on_polynomials() {
        for &(g, o) in &[(1.0, 2), (2.0, 2), (1.0, 4), (2.0, 4)] {
            let m = Mesh::build(64, g, o).unwrap();
            for k in 0..=o as i32 {
                let f = ScalarField::from_fn(&m, |s| s.powi(k));
                let d = f.derivative(1).unwrap();
                for (i, &s) in m.nodes().iter().enumerate() {
                    let exact = if k == 0 {
                        0.0
                    } else {
                        k as f64 * s.powi(k - 1)
                    };
                    assert!((d.values()[i] - exact).abs() < 1e-10, "k={k} i={i}");
                }
            }
        }
    }

    #[test]
    fn spec_derivative_examples() {
        let m = Mesh::build(64, 1.0, 2).unwrap();
        let d = ScalarField::from_fn(&m, |s| s * s).derivative(1).unwrap();
        for (i, &s) in m.nodes().iter().enumerate() {
            assert!((d.values()[i] - 2.0 * s).abs() < 1e-10);
        }
        let d = ScalarField::from_fn(&m, |s| s).derivative(1).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-12));

        let m4 = Mesh::build(64, 2.0, 4).unwrap();
        let d2 = ScalarField::from_fn(&m4, |s| s.powi(3))
            .derivative(2)
            .unwrap();
        for (i, &s) in m4.nodes().iter().enumerate() {
            assert!((d2.values()[i] - 6.0 * s).abs() < 1e-8);
        }
        assert!(matches!(
            m.derivative(&d, 5),
            Err(Error::DerivativeOrder(5))
        ));
    }

    #[test]
    fn integrate_examples() {
        let m = Mesh::build(100, 1.0, 2).unwrap();
        assert!((ScalarField::constant(&m, 1.0).integrate() - 1.0).abs() < 1e-14);
        assert!((ScalarField::from_fn(&m, |s| s).integrate() - 0.5).abs() < 1e-12);
        let m = Mesh::build(200, 1.0, 2).unwrap();
        assert!((ScalarField::from_fn(&m, |s| s * s).integrate() - 1.0 / 3.0).abs() < 1e-5);
        let m = Mesh::build(64, 1.0, 4).unwrap();
        assert!((ScalarField::from_fn(&m, |s| s.powi(3)).integrate() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn cumulative_matches_total() {
        let m = Mesh::build(50, 2.0, 4).unwrap();
        let f = ScalarField::from_fn(&m, |s| s.exp());
        let c = m.cumulative_values(f.values());
        assert!((c[50] - f.integrate()).abs() < 1e-14);
        let r = m.cumulative_from_right(f.values());
        assert!((r[0] - f.integrate()).abs() < 1e-14);
        assert!((c[20] + r[20] - f.integrate()).abs() < 1e-14);
    }

    #[test]
    fn mismatch_detected() {
        let a = Mesh::build(32, 1.0, 2).unwrap();
        let b = Mesh::build(33, 1.0, 2).unwrap();
        let f = ScalarField::constant(&b, 1.0);
        assert!(matches!(a.integrate(&f), Err(Error::MeshMismatch)));
        assert!(ScalarField::new(a.clone(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let m = Mesh::build(40, 2.0, 2).unwrap();
        let f = ScalarField::from_fn(&m, |s| 1.0 - 2.0 * s + s.powi(3));
        for &s in &[0.0f64, 0.013, 0.31, 0.5, 0.999, 1.0] {
            let exact = 1.0 - 2.0 * s + s.powi(3);
            assert!((m.interpolate(f.values(), s) - exact).abs() < 1e-13);
        }
    }
}
