//! Command-line front end.
//!
//! | code | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | success                                   |
//! | 1    | `verify-lemmas` reported a FAIL           |
//! | 2    | usage error (unknown flag, bad argument)  |
//! | 3    | malformed configuration or CFL violation  |
//! | 4    | input file missing or unreadable          |
//! | 5    | invalid input data                        |
//! | 6    | numerical failure (NaN, degenerate solve) |
//! | 7    | output could not be written               |

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};

use crate::config::{parse_config, parse_gravity};
use crate::corpus;
use crate::diagnostics;
use crate::dynamics::{self, RunStatus};
use crate::error::Error;
use crate::initial::{self, InitialData, InitialSpec};
use crate::mesh::{Mesh, ScalarField, Vec3, VecField};
use crate::output::{self, MeshSummary, Provenance, RunManifest, RunSummary};
use crate::tension;
use crate::wnorms::{self, NormReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_MISSING: i32 = 4;
pub const EXIT_INPUT: i32 = 5;
pub const EXIT_NUMERICAL: i32 = 6;
pub const EXIT_OUTPUT: i32 = 7;

#[derive(Parser, Debug)]
#[command(
    name = "hangsim",
    version,
    about = "Hanging inextensible string simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a simulation from a key=value config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Accept a fixed dt above the CFL bound.
        #[arg(long)]
        force_dt: bool,
    },
    /// Solve the tension problem for CSV columns s,q,h.
    BvpSolve {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// Weighted norms of CSV columns s,u as JSON.
    Norms {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Every supported norm instead of X^m only.
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = wnorms::DEFAULT_EPS)]
        eps: f64,
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
    /// Randomized bound certificates, one line per lemma.
    VerifyLemmas {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Second and third time derivatives at t = 0 for CSV columns s,x1,x2,x3,v1,v2,v3.
    Jets {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "0,0,-1", allow_hyphen_values = true)]
        g: String,
        #[arg(long, default_value_t = 2)]
        order: usize,
    },
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

fn classify(e: Error) -> Failure {
    let code = match &e {
        Error::Config { .. } | Error::Cfl { .. } => EXIT_CONFIG,
        Error::Io(_) => EXIT_MISSING,
        Error::NanAbort { .. }
        | Error::DegenerateWronskian(_)
        | Error::SingularSystem(_)
        | Error::NonFinite(_) => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    };
    Failure::new(code, e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_MISSING, format!("{}: {e}", path.display())))
}

fn write_err(path: &Path, e: io::Error) -> Failure {
    Failure::new(EXIT_OUTPUT, format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| write_err(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(io::Error::from)
        .and_then(|_| writeln!(w))
        .and_then(|_| w.flush())
        .map_err(|e| write_err(path, e))
}

/// Mesh on the `s` column of a CSV plus the remaining columns.
fn mesh_from_rows(
    text: &str,
    cols: usize,
    order: usize,
) -> Result<(std::sync::Arc<Mesh>, Vec<Vec<f64>>), Failure> {
    let rows = initial::parse_rows(text, cols).map_err(classify)?;
    let nodes = rows.iter().map(|r| r[0]).collect();
    let mesh = Mesh::from_nodes(nodes, order).map_err(classify)?;
    Ok((mesh, rows))
}

fn simulate(config: &Path, out: &Path, force_dt: bool) -> Result<i32, Failure> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let cfg = parse_config(&read(config)?).map_err(classify)?;
    let mesh = cfg.mesh().map_err(classify)?;
    let resolved = match &cfg.initial {
        InitialSpec::Csv(p) if p.is_relative() => {
            Some(config.parent().unwrap_or(Path::new(".")).join(p))
        }
        InitialSpec::Csv(p) => Some(p.clone()),
        _ => None,
    };
    let data = match &resolved {
        Some(p) => initial::read_csv(&mesh, p),
        None => cfg.initial.build(&mesh, cfg.g),
    }
    .map_err(classify)?;
    let traj = dynamics::run(&cfg, &data, force_dt).map_err(classify)?;
    let ape = diagnostics::ape_track(&traj.samples, cfg.g, wnorms::DEFAULT_EPS).ok();
    let ape_summary = ape.as_deref().and_then(diagnostics::summarize);

    fs::create_dir_all(out).map_err(|e| write_err(out, e))?;
    let path = out.join("trajectory.csv");
    let mut w = create(&path)?;
    output::write_trajectory(&mut w, &traj)
        .and_then(|_| w.flush())
        .map_err(|e| write_err(&path, e))?;
    let path = out.join("monitors.csv");
    let mut w = create(&path)?;
    output::write_monitors(&mut w, &traj, ape.as_deref())
        .and_then(|_| w.flush())
        .map_err(|e| write_err(&path, e))?;
    let summary = RunSummary::new(&traj, ape_summary);
    write_json(&out.join("summary.json"), &summary)?;
    let manifest = RunManifest {
        config: output::config_echo(&cfg),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        mesh: MeshSummary::of(&mesh),
        initial: Provenance::for_spec(&cfg.initial, resolved.as_deref())
            .map_err(|e| Failure::new(EXIT_MISSING, e.to_string()))?,
        started_unix,
        elapsed_seconds: started.elapsed().as_secs_f64(),
        files: ["trajectory.csv", "monitors.csv", "summary.json"]
            .map(String::from)
            .to_vec(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    println!(
        "status={} t={} samples={} steps={} max_drift={:e}",
        summary.status, summary.t_final, summary.samples, summary.steps, summary.max_drift
    );
    match traj.status {
        RunStatus::NanAbort => Err(Failure::new(
            EXIT_NUMERICAL,
            traj.abort_detail.unwrap_or_else(|| "NaN detected".into()),
        )),
        _ => Ok(EXIT_OK),
    }
}

fn bvp_solve(input: &Path, a: f64, out: &Path, order: usize) -> Result<i32, Failure> {
    let (mesh, rows) = mesh_from_rows(&read(input)?, 3, order)?;
    let col = |c: usize| ScalarField::new(mesh.clone(), rows.iter().map(|r| r[c]).collect());
    let q = col(1).map_err(classify)?;
    let h = col(2).map_err(classify)?;
    let sol = tension::solve_bvp(&q, &h, a).map_err(classify)?;
    let pair = sol.pair.as_ref().expect("shooting solve");
    fs::create_dir_all(out).map_err(|e| write_err(out, e))?;
    let path = out.join("solution.csv");
    let mut w = create(&path)?;
    let body = (|| -> io::Result<()> {
        writeln!(w, "s,tau,tau_prime,phi,psi")?;
        for (i, &s) in mesh.nodes().iter().enumerate() {
            let row = [
                s,
                sol.tau.values()[i],
                sol.tau_prime.values()[i],
                pair.phi.values()[i],
                pair.psi.values()[i],
            ];
            writeln!(w, "{}", row.map(output::num).join(","))?;
        }
        w.flush()
    })();
    body.map_err(|e| write_err(&path, e))?;
    let json = serde_json::json!({
        "a": a,
        "wronskian": pair.wronskian,
        "q_clipped": sol.q_clipped,
        "all_satisfied": sol.all_satisfied(),
        "certificates": sol.certificates,
    });
    write_json(&out.join("certificates.json"), &json)?;
    for c in &sol.certificates {
        println!(
            "{} {} {} slack={:.6e}",
            if c.satisfied { "PASS" } else { "FAIL" },
            c.lemma,
            c.label,
            c.slack
        );
    }
    Ok(EXIT_OK)
}

fn norms(input: &Path, m: usize, all: bool, eps: f64, order: usize) -> Result<i32, Failure> {
    let (mesh, rows) = mesh_from_rows(&read(input)?, 2, order)?;
    let u = ScalarField::new(mesh, rows.iter().map(|r| r[1]).collect()).map_err(classify)?;
    let value = if all {
        let name = input
            .file_stem()
            .map_or("u".into(), |s| s.to_string_lossy().into_owned());
        NormReport::compute(&name, &u, 0.0, eps)
            .map_err(classify)?
            .to_json()
    } else {
        let x = wnorms::norm_x(&u, m).map_err(classify)?;
        serde_json::json!({ format!("X{m}"): x })
    };
    println!("{value}");
    Ok(EXIT_OK)
}

fn verify_lemmas(seed: u64, trials: usize, json: Option<&Path>) -> Result<i32, Failure> {
    if trials == 0 {
        return Err(Failure::new(EXIT_USAGE, "--trials must be positive"));
    }
    let report = corpus::verify(seed, trials).map_err(classify)?;
    for l in &report.lemmas {
        println!("{}", l.line());
    }
    println!(
        "INFO NormEq ratio range [{:.6e}, {:.6e}]",
        report.atau_ratio.0, report.atau_ratio.1
    );
    if let Some(p) = json {
        write_json(p, &report)?;
    }
    Ok(if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAIL
    })
}

fn jets(data: &Path, g: &str, order: usize) -> Result<i32, Failure> {
    let g: Vec3 = parse_gravity(g).map_err(|m| Failure::new(EXIT_USAGE, m))?;
    let (mesh, rows) = mesh_from_rows(&read(data)?, 7, order)?;
    let field = |c: usize| {
        VecField::new(
            mesh.clone(),
            rows.iter()
                .map(|r| Vec3::new(r[c], r[c + 1], r[c + 2]))
                .collect(),
        )
    };
    let data = InitialData {
        x0: field(1).map_err(classify)?,
        x1: field(4).map_err(classify)?,
    };
    let [j2, j3] = dynamics::initial_jets(&data, g).map_err(classify)?;
    let stdout = io::stdout();
    let mut w = BufWriter::new(stdout.lock());
    let body = (|| -> io::Result<()> {
        writeln!(w, "s,xtt1,xtt2,xtt3,xttt1,xttt2,xttt3")?;
        for (i, &s) in mesh.nodes().iter().enumerate() {
            let (a, b) = (j2.values()[i], j3.values()[i]);
            let row = [s, a.x, a.y, a.z, b.x, b.y, b.z];
            writeln!(w, "{}", row.map(output::num).join(","))?;
        }
        w.flush()
    })();
    body.map_err(|e| Failure::new(EXIT_OUTPUT, e.to_string()))?;
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            force_dt,
        } => simulate(&config, &out, force_dt),
        Command::BvpSolve {
            input,
            a,
            out,
            order,
        } => bvp_solve(&input, a, &out, order),
        Command::Norms {
            input,
            m,
            all,
            eps,
            order,
        } => norms(&input, m, all, eps, order),
        Command::VerifyLemmas { seed, trials, json } => {
            verify_lemmas(seed, trials, json.as_deref())
        }
        Command::Jets { data, g, order } => jets(&data, &g, order),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
