//! Initial data: built-in families and CSV input.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::bessel;
use crate::error::{Error, Result};
use crate::gauss::GaussLegendre;
use crate::mesh::{Mesh, Vec3, VecField};

/// Tolerance for the analytic constraint check of built-in families.
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// Tolerance for constraints measured with mesh derivatives.
pub const DISCRETE_CONSTRAINT_TOL: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSpec {
    Stationary,
    Rotating { omega: f64 },
    Pendulum { amplitude: f64, mode: usize },
    Csv(PathBuf),
}

impl fmt::Display for InitialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSpec::Stationary => write!(f, "stationary"),
            InitialSpec::Rotating { omega } => write!(f, "rotating({omega})"),
            InitialSpec::Pendulum { amplitude, mode } => write!(f, "pendulum({amplitude},{mode})"),
            InitialSpec::Csv(p) => write!(f, "csv:{}", p.display()),
        }
    }
}

impl InitialSpec {
    /// Parses `stationary`, `rotating`, `rotating(ω)`, `pendulum(A,n)`
    /// (alias `pendulum-perturbation`), or `csv:PATH`.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let t = text.trim();
        if let Some(path) = t.strip_prefix("csv:") {
            if path.is_empty() {
                return Err("csv: needs a path".into());
            }
            return Ok(InitialSpec::Csv(PathBuf::from(path)));
        }
        let (name, args) = match t.find('(') {
            Some(i) => {
                let inner = t[i + 1..]
                    .strip_suffix(')')
                    .ok_or_else(|| format!("unbalanced parentheses in {t:?}"))?;
                let args = inner
                    .split(',')
                    .map(|a| a.trim().parse::<f64>().map_err(|e| format!("{a:?}: {e}")))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                (t[..i].trim(), args)
            }
            None => (t, Vec::new()),
        };
        match (name, args.as_slice()) {
            ("stationary", []) => Ok(InitialSpec::Stationary),
            ("rotating", []) => Ok(InitialSpec::Rotating { omega: 1.0 }),
            ("rotating", &[omega]) if omega.is_finite() => Ok(InitialSpec::Rotating { omega }),
            ("pendulum" | "pendulum-perturbation", &[amplitude, mode])
                if amplitude.is_finite() && mode >= 1.0 && mode.fract() == 0.0 && mode <= 3.0 =>
            {
                Ok(InitialSpec::Pendulum {
                    amplitude,
                    mode: mode as usize,
                })
            }
            _ => Err(format!("unknown initial data {t:?}")),
        }
    }

    pub fn build(&self, mesh: &Arc<Mesh>, g: Vec3) -> Result<InitialData> {
        match self {
            InitialSpec::Stationary => Ok(stationary(mesh, g)),
            InitialSpec::Rotating { omega } => Ok(rotating(mesh, *omega)),
            InitialSpec::Pendulum { amplitude, mode } => pendulum(mesh, g, *amplitude, *mode),
            InitialSpec::Csv(path) => read_csv(mesh, path),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InitialData {
    pub x0: VecField,
    pub x1: VecField,
}

/// Worst constraint residuals of a data set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintResidual {
    pub unit_tangent: f64,
    pub orthogonality: f64,
    pub pinned: f64,
}

impl ConstraintResidual {
    pub fn max(&self) -> f64 {
        self.unit_tangent.max(self.orthogonality).max(self.pinned)
    }
}

impl InitialData {
    /// Residuals of `|x0'| = 1`, `x0'·x1' = 0`, `x0(1) = x1(1) = 0` with mesh
    /// derivatives.
    pub fn residual(&self) -> Result<ConstraintResidual> {
        let d0 = self.x0.derivative(1)?;
        let d1 = self.x1.derivative(1)?;
        let unit_tangent = d0
            .values()
            .iter()
            .map(|v| (v.norm() - 1.0).abs())
            .fold(0.0, f64::max);
        let orthogonality = d0
            .values()
            .iter()
            .zip(d1.values())
            .map(|(a, b)| a.dot(b).abs())
            .fold(0.0, f64::max);
        let pinned = self
            .x0
            .values()
            .last()
            .unwrap()
            .norm()
            .max(self.x1.values().last().unwrap().norm());
        Ok(ConstraintResidual {
            unit_tangent,
            orthogonality,
            pinned,
        })
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let r = self.residual()?;
        if r.pinned > 0.0 {
            return Err(Error::Constraint(format!(
                "x(1) must vanish, |x(1)| = {:e}",
                r.pinned
            )));
        }
        if r.unit_tangent > tol {
            return Err(Error::Constraint(format!(
                "||x0'| - 1| = {:e} exceeds {tol:e}",
                r.unit_tangent
            )));
        }
        if r.orthogonality > tol {
            return Err(Error::Constraint(format!(
                "|x0'.x1'| = {:e} exceeds {tol:e}",
                r.orthogonality
            )));
        }
        Ok(())
    }
}

fn down(g: Vec3) -> Vec3 {
    if g.norm() > 0.0 {
        g.normalize()
    } else {
        Vec3::new(0.0, 0.0, -1.0)
    }
}

/// `x0 = (1 - s)ĝ` (straight down; `-e3` when `g = 0`), `x1 = 0`.
pub fn stationary(mesh: &Arc<Mesh>, g: Vec3) -> InitialData {
    let d = down(g);
    InitialData {
        x0: VecField::from_fn(mesh, |s| d * (1.0 - s)),
        x1: VecField::zeros(mesh),
    }
}

/// Rigid rotation snapshot `x0 = (1 - s)e1`, `x1 = ω(1 - s)e2`.
pub fn rotating(mesh: &Arc<Mesh>, omega: f64) -> InitialData {
    InitialData {
        x0: VecField::from_fn(mesh, |s| Vec3::new(1.0 - s, 0.0, 0.0)),
        x1: VecField::from_fn(mesh, |s| Vec3::new(0.0, omega * (1.0 - s), 0.0)),
    }
}

/// Stationary string bent into the `n`-th small-oscillation mode.
///
/// The lateral displacement is `A J0(j√s)` with `j` the `n`-th zero of `J0`,
/// so the free end is displaced by `A`. The tangent is exactly unit length;
/// positions are integrated from the fixed end.
pub fn pendulum(mesh: &Arc<Mesh>, g: Vec3, amplitude: f64, mode: usize) -> Result<InitialData> {
    let j = bessel::j0_zero(mode);
    if amplitude.abs() * j * j / 4.0 >= 1.0 {
        return Err(Error::Constraint(format!(
            "amplitude {amplitude} too large for mode {mode}: tangent cannot stay unit"
        )));
    }
    let d = down(g);
    let trial = if d.x.abs() > 0.9 {
        Vec3::y()
    } else {
        Vec3::x()
    };
    let lateral = (trial - d * trial.dot(&d)).normalize();
    let tangent = |s: f64| {
        let sin = -amplitude * 0.5 * j * j * bessel::j1_over_z(j * s.sqrt());
        let cos = (1.0 - sin * sin).sqrt();
        -d * cos + lateral * sin
    };
    for &s in mesh.nodes() {
        let t = tangent(s);
        if (t.norm() - 1.0).abs() > CONSTRAINT_TOL {
            return Err(Error::Constraint(format!("tangent not unit at s = {s}")));
        }
    }
    let gl = GaussLegendre::new(8);
    let nodes = mesh.nodes();
    let n = mesh.intervals();
    let mut x0 = vec![Vec3::zeros(); n + 1];
    for k in (0..n).rev() {
        let mut seg = Vec3::zeros();
        for c in 0..3 {
            seg[c] = gl.integrate(nodes[k], nodes[k + 1], |s| tangent(s)[c]);
        }
        x0[k] = x0[k + 1] - seg;
    }
    Ok(InitialData {
        x0: VecField::new(mesh.clone(), x0)?,
        x1: VecField::zeros(mesh),
    })
}

/// Reads columns `s,x1,x2,x3,v1,v2,v3`; nodes must coincide with `mesh`.
pub fn read_csv(mesh: &Arc<Mesh>, path: &Path) -> Result<InitialData> {
    let text = std::fs::read_to_string(path)?;
    let rows = parse_rows(&text, 7)?;
    if rows.len() != mesh.len() {
        return Err(Error::Input(format!(
            "{} rows, mesh has {} nodes",
            rows.len(),
            mesh.len()
        )));
    }
    let mut x0 = Vec::with_capacity(rows.len());
    let mut x1 = Vec::with_capacity(rows.len());
    for (i, (r, &s)) in rows.iter().zip(mesh.nodes()).enumerate() {
        if (r[0] - s).abs() > 1e-12 {
            return Err(Error::Input(format!(
                "row {}: s = {} but mesh node is {s}",
                i + 1,
                r[0]
            )));
        }
        x0.push(Vec3::new(r[1], r[2], r[3]));
        x1.push(Vec3::new(r[4], r[5], r[6]));
    }
    Ok(InitialData {
        x0: VecField::new(mesh.clone(), x0)?,
        x1: VecField::new(mesh.clone(), x1)?,
    })
}

/// Numeric rows of a CSV with one header line and `cols` columns.
pub fn parse_rows(text: &str, cols: usize) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Input("empty file".into()))?;
    if header.split(',').count() != cols {
        return Err(Error::Input(format!(
            "header {header:?} does not have {cols} columns"
        )));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let row = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Input(format!("line {}: {e}", i + 2)))?;
            if row.len() != cols {
                return Err(Error::Input(format!(
                    "line {}: expected {cols} fields",
                    i + 2
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("line {}: non-finite value", i + 2)));
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!(
            InitialSpec::parse("stationary"),
            Ok(InitialSpec::Stationary)
        );
        assert_eq!(
            InitialSpec::parse("rotating"),
            Ok(InitialSpec::Rotating { omega: 1.0 })
        );
        assert_eq!(
            InitialSpec::parse("rotating(2.5)"),
            Ok(InitialSpec::Rotating { omega: 2.5 })
        );
        assert_eq!(
            InitialSpec::parse("pendulum-perturbation(0.001, 1)"),
            Ok(InitialSpec::Pendulum {
                amplitude: 0.001,
                mode: 1
            })
        );
        assert_eq!(
            InitialSpec::parse("csv:a/b.csv"),
            Ok(InitialSpec::Csv("a/b.csv".into()))
        );
        for bad in [
            "",
            "rotating(",
            "pendulum(1)",
            "pendulum(0.1,1.5)",
            "pendulum(0.1,4)",
            "spiral",
            "csv:",
        ] {
            assert!(InitialSpec::parse(bad).is_err(), "{bad}");
        }
        let p = InitialSpec::Pendulum {
            amplitude: 0.05,
            mode: 2,
        };
        assert_eq!(InitialSpec::parse(&p.to_string()), Ok(p));
    }

    #[test]
    fn builtins_satisfy_constraints() {
        let m = Mesh::build(200, 2.0, 2).unwrap();
        let g = Vec3::new(0.0, 0.0, -1.0);
        stationary(&m, g).validate(CONSTRAINT_TOL).unwrap();
        stationary(&m, Vec3::zeros())
            .validate(CONSTRAINT_TOL)
            .unwrap();
        rotating(&m, 1.0).validate(CONSTRAINT_TOL).unwrap();
        let p = pendulum(&m, g, 0.05, 1).unwrap();
        p.validate(DISCRETE_CONSTRAINT_TOL).unwrap();
        assert_eq!(*p.x0.values().last().unwrap(), Vec3::zeros());
        // Free end displaced laterally by the amplitude.
        assert!((p.x0.values()[0].x - 0.05).abs() < 1e-12);
        assert!(pendulum(&m, g, 0.8, 1).is_err());
    }

    #[test]
    fn stretched_data_rejected() {
        let m = Mesh::build(64, 1.0, 2).unwrap();
        let d = InitialData {
            x0: VecField::from_fn(&m, |s| Vec3::new(2.0 * (1.0 - s), 0.0, 0.0)),
            x1: VecField::zeros(&m),
        };
        assert!(matches!(
            d.validate(DISCRETE_CONSTRAINT_TOL),
            Err(Error::Constraint(_))
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let m = Mesh::build(16, 1.0, 2).unwrap();
        let mut text = String::from("s,x1,x2,x3,v1,v2,v3\n");
        for &s in m.nodes() {
            text.push_str(&format!("{s:.17e},{},0,0,0,{},0\n", 1.0 - s, 1.0 - s));
        }
        let dir = std::env::temp_dir().join(format!("hangsim-init-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.csv");
        std::fs::write(&path, &text).unwrap();
        let d = read_csv(&m, &path).unwrap();
        d.validate(CONSTRAINT_TOL).unwrap();
        let other = Mesh::build(17, 1.0, 2).unwrap();
        assert!(matches!(read_csv(&other, &path), Err(Error::Input(_))));
        std::fs::write(&path, "s,x1\n0,1\n").unwrap();
        assert!(matches!(read_csv(&m, &path), Err(Error::Input(_))));
        std::fs::remove_dir_all(&dir).ok();
    }
}
