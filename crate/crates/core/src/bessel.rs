//! Power series for `J0` and `J1(z)/z`, accurate to about 1e-13 for `|z| ≲ 10`.

pub fn j0(z: f64) -> f64 {
    let x = -0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        term *= x / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// `J1(z)/z`, finite at `z = 0` where it equals 1/2.
pub fn j1_over_z(z: f64) -> f64 {
    let x = -0.25 * z * z;
    let mut term = 0.5;
    let mut sum = 0.5;
    for k in 1..80 {
        term *= x / (k * (k + 1)) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

pub fn j1(z: f64) -> f64 {
    z * j1_over_z(z)
}

/// The `n`-th positive zero of `J0` (`n >= 1`), by Newton from McMahon's
/// asymptotic guess.
pub fn j0_zero(n: usize) -> f64 {
    assert!(n >= 1);
    let beta = (n as f64 - 0.25) * std::f64::consts::PI;
    let mut x = beta + 1.0 / (8.0 * beta);
    for _ in 0..50 {
        let dx = j0(x) / -j1(x);
        x -= dx;
        if dx.abs() < 1e-15 * x {
            break;
        }
    }
    x
}
