//! `key=value` run configuration.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::initial::InitialSpec;
use crate::mesh::{Mesh, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TimeStep {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub gamma: f64,
    pub order: usize,
    pub g: Vec3,
    pub dt: TimeStep,
    pub t_end: f64,
    pub c0: f64,
    pub renormalize: bool,
    /// Time between recorded samples.
    pub sample_every: f64,
    pub initial: InitialSpec,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 200,
            gamma: 2.0,
            order: 2,
            g: Vec3::new(0.0, 0.0, -1.0),
            dt: TimeStep::Auto,
            t_end: 1.0,
            c0: 0.0,
            renormalize: false,
            sample_every: 0.1,
            initial: InitialSpec::Stationary,
        }
    }
}

pub const KEYS: [&str; 10] = [
    "N",
    "gamma",
    "order",
    "g",
    "dt",
    "T_end",
    "c0",
    "renormalize",
    "sample_every",
    "initial",
];

fn real(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("{v:?} is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{v:?} is not finite"))
    }
}

fn positive(v: &str) -> std::result::Result<f64, String> {
    let x = real(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be positive, got {x}"))
    }
}

/// `|g|` must be 0 or 1 (gravity is nondimensionalized).
pub fn parse_gravity(v: &str) -> std::result::Result<Vec3, String> {
    let parts = v
        .split(',')
        .map(|p| real(p.trim()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if parts.len() != 3 {
        return Err(format!("g needs three components, got {}", parts.len()));
    }
    let g = Vec3::new(parts[0], parts[1], parts[2]);
    let n = g.norm();
    if n != 0.0 && (n - 1.0).abs() > 1e-12 {
        return Err(format!("|g| = {n} must be 0 or 1"));
    }
    Ok(g)
}

pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut cfg = SimConfig::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Config { line, msg };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(format!("expected key=value, got {content:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key {key:?}")));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key {key:?}")));
        }
        let r: std::result::Result<(), String> = (|| {
            match key {
                "N" => {
                    let n: usize = value
                        .parse()
                        .map_err(|_| format!("{value:?} is not a node count"))?;
                    if n < 16 {
                        return Err(format!("N must be at least 16, got {n}"));
                    }
                    cfg.n = n;
                }
                "gamma" => {
                    let g = real(value)?;
                    if g < 1.0 {
                        return Err(format!("gamma must be >= 1, got {g}"));
                    }
                    cfg.gamma = g;
                }
                "order" => {
                    cfg.order = match value {
                        "2" => 2,
                        "4" => 4,
                        _ => return Err(format!("order must be 2 or 4, got {value:?}")),
                    }
                }
                "g" => cfg.g = parse_gravity(value)?,
                "dt" => {
                    cfg.dt = if value == "auto" {
                        TimeStep::Auto
                    } else {
                        TimeStep::Fixed(positive(value)?)
                    }
                }
                "T_end" => cfg.t_end = positive(value)?,
                "c0" => {
                    let c = real(value)?;
                    if c < 0.0 {
                        return Err(format!("c0 must be >= 0, got {c}"));
                    }
                    cfg.c0 = c;
                }
                "renormalize" => {
                    cfg.renormalize = match value {
                        "true" => true,
                        "false" => false,
                        _ => {
                            return Err(format!("renormalize must be true or false, got {value:?}"))
                        }
                    }
                }
                "sample_every" => cfg.sample_every = positive(value)?,
                "initial" => cfg.initial = InitialSpec::parse(value)?,
                _ => unreachable!(),
            }
            Ok(())
        })();
        r.map_err(err)?;
    }
    Ok(cfg)
}

impl SimConfig {
    pub fn mesh(&self) -> Result<Arc<Mesh>> {
        Mesh::build(self.n, self.gamma, self.order)
    }

    /// Canonical `key=value` text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let dt = match self.dt {
            TimeStep::Auto => "auto".to_string(),
            TimeStep::Fixed(d) => format!("{d:e}"),
        };
        writeln!(s, "N={}", self.n).unwrap();
        writeln!(s, "gamma={:e}", self.gamma).unwrap();
        writeln!(s, "order={}", self.order).unwrap();
        writeln!(s, "g={:e},{:e},{:e}", self.g.x, self.g.y, self.g.z).unwrap();
        writeln!(s, "dt={dt}").unwrap();
        writeln!(s, "T_end={:e}", self.t_end).unwrap();
        writeln!(s, "c0={:e}", self.c0).unwrap();
        writeln!(s, "renormalize={}", self.renormalize).unwrap();
        writeln!(s, "sample_every={:e}", self.sample_every).unwrap();
        writeln!(s, "initial={}", self.initial).unwrap();
        s
    }
}
