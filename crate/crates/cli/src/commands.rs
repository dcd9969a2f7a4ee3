use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use varlap_core::config::{ProblemConfig, RouteName, Setup};
use varlap_core::lemmas::{sweep, SweepOptions};
use varlap_core::linalg::first_eigenpair;
use varlap_core::solver::{find_endpoint, verify_geometry, GeometryReport, SolveResult};
use varlap_core::Error;

use crate::manifest::{now_ms, RunManifest};
use crate::{CheckArgs, Common, GeometryArgs, LemmaArgs, RouteArg, SolveArgs};

pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad config, flags or output location.
    Input(String),
    /// The library gave up on a well-formed problem.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Run(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => CliError::Input(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

type Outcome = Result<Status, CliError>;

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Input(format!("cannot write {}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Run(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io(path))
}

fn load(common: &Common) -> Result<(ProblemConfig, PathBuf), CliError> {
    let mut cfg = ProblemConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    Ok((cfg, out))
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

fn setup(cfg: &ProblemConfig) -> Result<Setup, CliError> {
    let s = cfg.setup()?;
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    Ok(s)
}

#[derive(Serialize)]
struct Failure<'a> {
    error: &'a str,
}

pub fn solve(a: SolveArgs) -> Outcome {
    let started = now_ms();
    let (mut cfg, out) = load(&a.common)?;
    if let Some(r) = a.route {
        cfg.solver.route = match r {
            RouteArg::Mp => RouteName::Mp,
            RouteArg::Min => RouteName::Min,
        };
    }
    let o = &mut cfg.solver.options;
    if let Some(v) = a.tol {
        o.tol = v;
    }
    if let Some(v) = a.max_iterations {
        o.max_iterations = v;
    }
    if let Some(v) = a.path_points {
        o.path_points = v;
    }
    if let Some(v) = a.multistart {
        o.multistart = v;
    }
    if let Some(v) = a.probes {
        o.probes = v;
    }
    if let Some(v) = a.lambda {
        cfg.lambda = v;
    }
    if a.history {
        cfg.output.history = true;
    }
    let s = setup(&cfg)?;
    prepare(&out)?;
    let mut manifest = RunManifest::new("solve", cfg.seed, &cfg, started);
    let res = match s.solve() {
        Ok(r) => r,
        Err(e @ Error::Config { .. }) => return Err(e.into()),
        Err(e) => {
            let msg = e.to_string();
            let path = out.join("failure.json");
            write_json(&path, &Failure { error: &msg })?;
            manifest.outputs.push(path);
            manifest.finish(&out).map_err(io(&out))?;
            return Err(CliError::Run(msg));
        }
    };
    let result_path = out.join("result.json");
    write_json(&result_path, &res)?;
    manifest.outputs.push(result_path);
    let csv = out.join("solution.csv");
    let file = File::create(&csv).map_err(io(&csv))?;
    res.u.write_csv(s.problem.mesh(), BufWriter::new(file)).map_err(io(&csv))?;
    manifest.outputs.push(csv);
    if cfg.output.history {
        let path = out.join("history.csv");
        let mut text = String::from(varlap_core::functional::HISTORY_CSV_HEADER);
        text.push('\n');
        for h in &res.history {
            text.push_str(&h.csv_row());
            text.push('\n');
        }
        std::fs::write(&path, text).map_err(io(&path))?;
        manifest.outputs.push(path);
    }
    manifest.finish(&out).map_err(io(&out))?;
    print_summary(&res);
    Ok(if solve_succeeded(&res) { Status::Ok } else { Status::Failed })
}

fn solve_succeeded(r: &SolveResult) -> bool {
    r.converged
        && r.inclusion.passed
        && r.probe_certificate.as_ref().is_none_or(|c| c.passed)
        && r.geometry.as_ref().is_none_or(|g| g.separated)
}

fn print_summary(r: &SolveResult) {
    println!(
        "route={:?} converged={} R={:e} m={:e} cerami={:e} iterations={} inclusion_slack={:e}",
        r.route, r.converged, r.critical_value, r.m_final, r.cerami_final, r.iterations, r.inclusion.max_slack
    );
    for f in &r.flags {
        println!("flag: {f}");
    }
}

#[derive(Serialize)]
struct GeometryOutput {
    endpoint_s: Option<f64>,
    endpoint_error: Option<String>,
    reports: Vec<GeometryReport>,
}

pub fn geometry(a: GeometryArgs) -> Outcome {
    let started = now_ms();
    let (cfg, out) = load(&a.common)?;
    let s = setup(&cfg)?;
    let radii = if a.rho.is_empty() { vec![s.options.rho] } else { a.rho.clone() };
    let samples = a.samples.unwrap_or(s.options.sphere_samples);
    let u0 = first_eigenpair(s.problem.mesh(), s.options.power_iterations)?.vector;
    let min_norm = radii.iter().copied().fold(0.0, f64::max);
    let (endpoint, endpoint_error) = match find_endpoint(&s.problem, &u0, s.options.max_doublings, min_norm) {
        Ok(e) => (Some(e), None),
        Err(e @ Error::Anticoercivity { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let reports = radii
        .iter()
        .map(|&rho| verify_geometry(&s.problem, rho, samples, cfg.seed, endpoint.as_ref().map(|e| &e.y)))
        .collect::<varlap_core::Result<Vec<_>>>()?;
    prepare(&out)?;
    let mut manifest = RunManifest::new("geometry", cfg.seed, &cfg, started);
    let path = out.join("geometry.json");
    let ok = endpoint.is_some() && reports.iter().all(|r| r.separated);
    for r in &reports {
        println!("rho={} eta_hat={:e} base_level={:e} separated={}", r.rho, r.eta_hat, r.base_level, r.separated);
    }
    if let Some(e) = &endpoint_error {
        println!("endpoint: {e}");
    }
    write_json(
        &path,
        &GeometryOutput {
            endpoint_s: endpoint.as_ref().map(|e| e.s),
            endpoint_error,
            reports,
        },
    )?;
    manifest.outputs.push(path);
    manifest.finish(&out).map_err(io(&out))?;
    Ok(if ok { Status::Ok } else { Status::Failed })
}

pub fn check_potential(a: CheckArgs) -> Outcome {
    let started = now_ms();
    let (cfg, out) = load(&a.common)?;
    let s = setup(&cfg)?;
    let reports = s.hypothesis_reports()?;
    if reports.is_empty() {
        eprintln!("warning: no hypothesis parameters declared; nothing to check");
    }
    for r in &reports {
        println!(
            "{:?}: passed={} statistic={:e} threshold={:e} worst_t={:e}",
            r.hypothesis, r.passed, r.statistic, r.threshold, r.worst_t
        );
    }
    prepare(&out)?;
    let mut manifest = RunManifest::new("check-potential", cfg.seed, &cfg, started);
    let path = out.join("hypotheses.json");
    write_json(&path, &reports)?;
    manifest.outputs.push(path);
    manifest.finish(&out).map_err(io(&out))?;
    Ok(if reports.iter().all(|r| r.passed) { Status::Ok } else { Status::Failed })
}

pub fn verify_lemmas(a: LemmaArgs) -> Outcome {
    let started = now_ms();
    let opts = SweepOptions {
        seed: a.seed,
        samples: a.samples,
        cells: a.cells,
        exponent: a.exponent.clone(),
        ..Default::default()
    };
    let report = sweep(&opts)?;
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Run(e.to_string()))?;
    println!("{text}");
    if let Some(out) = &a.out {
        prepare(out)?;
        let mut manifest = RunManifest::new("verify-lemmas", a.seed, &opts, started);
        let path = out.join("lemmas.json");
        std::fs::write(&path, text + "\n").map_err(io(&path))?;
        manifest.outputs.push(path);
        manifest.finish(out).map_err(io(out))?;
    }
    Ok(if report.passed { Status::Ok } else { Status::Failed })
}
