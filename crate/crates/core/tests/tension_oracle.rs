use approx::assert_abs_diff_eq;
use hangsim::gauss::GaussLegendre;
use hangsim::tension::{self, greens_function, solve_bvp, solve_bvp_oracle, solve_fundamental};
use hangsim::{Mesh, ScalarField};

fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn zero_potential_closed_form() {
    // q = 0, h = 1, a = 1: tau = 2s - s^2/2.
    let mesh = Mesh::build(200, 2.0, 2).unwrap();
    let q = ScalarField::constant(&mesh, 0.0);
    let h = ScalarField::constant(&mesh, 1.0);
    let t = solve_bvp(&q, &h, 1.0).unwrap();
    let exact = ScalarField::from_fn(&mesh, |s| 2.0 * s - 0.5 * s * s);
    assert!(max_diff(&t.tau, &exact) < 1e-10);
    assert_abs_diff_eq!(t.tau_prime.values()[mesh.len() - 1], 1.0, epsilon = 1e-8);
    assert!(t.all_satisfied());
}

#[test]
fn constant_potential_closed_form() {
    // q = k^2, h = 0: tau = a sinh(ks) / (k cosh k).
    let k: f64 = 1.5;
    let a = 0.7;
    let mesh = Mesh::build(400, 2.0, 4).unwrap();
    let q = ScalarField::constant(&mesh, k * k);
    let h = ScalarField::constant(&mesh, 0.0);
    let t = solve_bvp(&q, &h, a).unwrap();
    let exact = ScalarField::from_fn(&mesh, |s| a * (k * s).sinh() / (k * k.cosh()));
    assert!(max_diff(&t.tau, &exact) < 1e-9);

    let pair = solve_fundamental(&q).unwrap();
    let phi = ScalarField::from_fn(&mesh, |s| (k * s).sinh() / k);
    assert!(max_diff(&pair.phi, &phi) < 1e-9);
    assert_abs_diff_eq!(pair.wronskian, -k.cosh(), epsilon = 1e-9);
}

#[test]
fn greens_function_reproduces_solution() {
    let k: f64 = 1.0;
    let mesh = Mesh::build(400, 2.0, 4).unwrap();
    let q = ScalarField::constant(&mesh, k * k);
    let h = ScalarField::from_fn(&mesh, |s| 1.0 + s);
    let t = solve_bvp(&q, &h, 0.0).unwrap();
    let pair = t.pair.as_ref().unwrap();
    let gl = GaussLegendre::new(16);
    for i in [100, 250, 380] {
        let s = mesh.nodes()[i];
        let f = |r: f64| greens_function(pair, s, r) * (1.0 + r);
        let via_green = gl.integrate(0.0, s, f) + gl.integrate(s, 1.0, f);
        assert_abs_diff_eq!(via_green, t.tau.values()[i], epsilon = 1e-8);
    }
}

#[test]
fn shooting_agrees_with_finite_differences() {
    let mut errs = Vec::new();
    for n in [100, 200, 400] {
        let mesh = Mesh::build(n, 2.0, 2).unwrap();
        let q = ScalarField::from_fn(&mesh, |s| 4.0 * (3.0 * s).cos().powi(2));
        let h = ScalarField::from_fn(&mesh, |s| 1.0 + (2.0 * s).sin());
        let shoot = solve_bvp(&q, &h, 0.3).unwrap();
        let fd = solve_bvp_oracle(&q, &h, 0.3).unwrap();
        errs.push(max_diff(&shoot.tau, &fd.tau));
    }
    assert!(errs[2] < 1e-3);
    for w in errs.windows(2) {
        let r = w[0] / w[1];
        assert!((2.8..=5.2).contains(&r), "ratio {r}, errors {errs:?}");
    }
}

#[test]
fn negative_potential_is_clipped() {
    let mesh = Mesh::build(50, 2.0, 2).unwrap();
    let q = ScalarField::from_fn(&mesh, |s| if s < 0.1 { -1.0 } else { 0.0 });
    let h = ScalarField::constant(&mesh, 0.0);
    let t = solve_bvp(&q, &h, 1.0).unwrap();
    assert!(t.q_clipped > 0);
    let exact = ScalarField::from_fn(&mesh, |s| s);
    assert!(max_diff(&t.tau, &exact) < 1e-12);
}

#[test]
fn tension_of_rotating_string() {
    let mesh = Mesh::build(200, 2.0, 2).unwrap();
    let data = hangsim::initial::rotating(&mesh, 1.0);
    let t = tension::tension_from_state(&data.x0, &data.x1, hangsim::Vec3::zeros()).unwrap();
    let exact = ScalarField::from_fn(&mesh, |s| s - 0.5 * s * s);
    assert!(max_diff(&t.tau, &exact) < 1e-10);
}
