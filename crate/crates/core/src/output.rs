//! CSV and JSON emission for runs. Numbers are written with 17
//! significant digits so reruns are byte-identical.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::SimConfig;
use crate::diagnostics::{ApeReport, ApeSummary};
use crate::dynamics::Trajectory;
use crate::initial::InitialSpec;
use crate::mesh::Mesh;

pub const TRAJECTORY_HEADER: &str = "t,node,s,x1,x2,x3,v1,v2,v3,tau,tau_prime";
pub const MONITORS_HEADER: &str =
    "t,drift_max,drift_energy,min_tau_over_s,sc1_lower,kinetic,triplebar4";

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}").to_lowercase()
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|&v| num(v)).collect::<Vec<_>>().join(",")
}

pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for smp in &traj.samples {
        let st = &smp.state;
        let nodes = st.x.mesh().nodes();
        for (i, &s) in nodes.iter().enumerate() {
            let x = st.x.values()[i];
            let v = st.xdot.values()[i];
            let row = [
                x.x,
                x.y,
                x.z,
                v.x,
                v.y,
                v.z,
                st.tension.tau.values()[i],
                st.tension.tau_prime.values()[i],
            ];
            writeln!(w, "{},{i},{},{}", num(st.t), num(s), join(&row))?;
        }
    }
    Ok(())
}

/// One row per sample; `triplebar4` is `nan` when the track is unavailable.
pub fn write_monitors<W: Write>(
    mut w: W,
    traj: &Trajectory,
    ape: Option<&[ApeReport]>,
) -> io::Result<()> {
    writeln!(w, "{MONITORS_HEADER}")?;
    for (k, smp) in traj.samples.iter().enumerate() {
        let tb = ape
            .and_then(|a| a.get(k))
            .map_or(f64::NAN, |r| r.triple.full);
        let row = [
            smp.state.t,
            smp.drift.drift_max,
            smp.drift.drift_energy,
            smp.stability.min_ratio,
            smp.stability.sc1_lower,
            smp.kinetic,
            tb,
        ];
        writeln!(w, "{}", join(&row))?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshSummary {
    pub intervals: usize,
    pub grading: f64,
    pub order: usize,
    pub h_min: f64,
    pub h_max: f64,
}

impl MeshSummary {
    pub fn of(mesh: &Mesh) -> Self {
        let (h_min, h_max) = (0..mesh.intervals())
            .map(|j| mesh.spacing(j))
            .fold((f64::INFINITY, 0.0f64), |(a, b), h| (a.min(h), b.max(h)));
        Self {
            intervals: mesh.intervals(),
            grading: mesh.grading(),
            order: mesh.stencil_order(),
            h_min,
            h_max,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Builtin { name: String },
    File { path: String, sha256: String },
}

impl Provenance {
    pub fn for_spec(spec: &InitialSpec, resolved: Option<&Path>) -> io::Result<Self> {
        match (spec, resolved) {
            (InitialSpec::Csv(p), resolved) => {
                let path = resolved.unwrap_or(p);
                Ok(Provenance::File {
                    path: path.display().to_string(),
                    sha256: sha256_file(path)?,
                })
            }
            (other, _) => Ok(Provenance::Builtin {
                name: other.to_string(),
            }),
        }
    }
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: String,
    pub code_version: String,
    pub mesh: MeshSummary,
    pub initial: Provenance,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    pub files: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub status: String,
    pub manifest: String,
    pub t_final: f64,
    pub samples: usize,
    pub steps: usize,
    pub dt_min: f64,
    pub dt_max: f64,
    pub lambda: f64,
    pub max_drift: f64,
    pub min_tau_over_s: f64,
    pub sc1_violations: usize,
    pub below_c0: usize,
    pub triplebar4: Option<ApeSummary>,
    pub abort_detail: Option<String>,
}

impl RunSummary {
    pub fn new(traj: &Trajectory, ape: Option<ApeSummary>) -> Self {
        let s = &traj.samples;
        Self {
            status: traj.status.as_str().to_string(),
            manifest: "manifest.json".into(),
            t_final: s.last().map_or(0.0, |x| x.state.t),
            samples: s.len(),
            steps: traj.steps,
            dt_min: if traj.steps > 0 { traj.dt_min } else { 0.0 },
            dt_max: traj.dt_max,
            lambda: traj.lambda,
            max_drift: s.iter().map(|x| x.drift.drift_max).fold(0.0, f64::max),
            min_tau_over_s: s
                .iter()
                .map(|x| x.stability.min_ratio)
                .fold(f64::INFINITY, f64::min),
            sc1_violations: s.iter().filter(|x| !x.stability.sc1_holds()).count(),
            below_c0: s.iter().filter(|x| !x.stability.satisfied).count(),
            triplebar4: ape,
            abort_detail: traj.abort_detail.clone(),
        }
    }
}

pub fn config_echo(cfg: &SimConfig) -> String {
    cfg.to_text()
}
