//! Critical points of `R`: a discretized mountain-pass path deformation and
//! a multistart descent to the global minimum, plus the certificates that
//! go with them.
//!
//! Descent directions are subgradients preconditioned by the interior
//! stiffness matrix `K`, so step lengths are mesh independent. Line searches
//! compare energy differences assembled locally rather than differences of
//! rounded totals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{cerami_diagnostic, CeramiDiagnostic, Energy, Functional, HistoryEntry, Problem};
use crate::linalg::{first_eigenpair, interior_stiffness, BandedCholesky, BandedSym};
use crate::mesh::GridFunction;
use crate::potential::CheckReport;
use crate::sampling::{derive_seed, random_function, rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Stopping tolerance on `(1 + ‖u‖) m(u)`.
    pub tol: f64,
    pub max_iterations: usize,
    /// Number of path segments `K`.
    pub path_points: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_halvings: usize,
    pub max_step: f64,
    pub max_doublings: u32,
    pub power_iterations: usize,
    pub multistart: usize,
    pub probes: usize,
    pub probe_tol: f64,
    pub unbounded_guard: f64,
    pub certify_tol: f64,
    pub rho: f64,
    pub sphere_samples: usize,
    pub stagnation_window: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iterations: 5000,
            path_points: 32,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_halvings: 40,
            max_step: 1e6,
            max_doublings: 60,
            power_iterations: 50,
            multistart: 8,
            probes: 10_000,
            probe_tol: 1e-6,
            unbounded_guard: 1e12,
            certify_tol: 1e-6,
            rho: 0.1,
            sphere_samples: 256,
            stagnation_window: 50,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("solver.tol", self.tol),
            ("solver.armijo_c", self.armijo_c),
            ("solver.max_step", self.max_step),
            ("solver.unbounded_guard", self.unbounded_guard),
            ("solver.certify_tol", self.certify_tol),
            ("solver.probe_tol", self.probe_tol),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(k, format!("must be positive, got {v}")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::config("solver.backtrack", "must lie in (0, 1)"));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config("solver.rho", "ρ must lie in (0, 1)"));
        }
        if self.path_points < 2 {
            return Err(Error::config("solver.path_points", "need at least 2 segments"));
        }
        if self.multistart == 0 {
            return Err(Error::config("solver.multistart", "need at least one start"));
        }
        if self.sphere_samples == 0 {
            return Err(Error::config("solver.sphere_samples", "need at least one sample"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    MountainPass,
    GlobalMin,
}

/// `"λ ≥ ν p⁻"` warning when the declared `ν` puts `λ` outside the range
/// where the mountain-pass geometry is guaranteed.
pub fn lambda_range_warning(problem: &Problem) -> Option<String> {
    let nu = problem.potential().meta().nu?;
    let bound = nu * problem.exponent().min();
    (problem.lambda() >= bound).then(|| {
        format!(
            "λ = {} is outside the open interval (-∞, ν p⁻) = (-∞, {bound}); the mountain-pass geometry is not guaranteed",
            problem.lambda()
        )
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryReport {
    pub rho: f64,
    pub sphere_samples: usize,
    /// Minimum of `R` over the sampled sphere `‖u‖ = ρ`.
    pub eta_hat: f64,
    pub r_endpoint: Option<f64>,
    pub endpoint_norm: Option<f64>,
    /// `max{R(0), R(y)}`
    pub base_level: f64,
    /// `η̂ > max{R(0), R(y)}`
    pub separated: bool,
    pub warnings: Vec<String>,
}

/// Samples `R` on the sphere of radius `rho` in the sum norm.
pub fn verify_geometry(
    problem: &Problem,
    rho: f64,
    samples: usize,
    seed: u64,
    endpoint: Option<&GridFunction>,
) -> Result<GeometryReport> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::config("solver.rho", format!("ρ must lie in (0, 1), got {rho}")));
    }
    let f = problem.functional();
    let mesh = problem.mesh();
    let mut r = rng(derive_seed(seed, 0x6e6f));
    let mut eta_hat = f64::INFINITY;
    for _ in 0..samples {
        let u = random_function(mesh, &mut r, true);
        let n = f.space().sobolev_norm(&u)?;
        eta_hat = eta_hat.min(f.value(&u.scaled(rho / n)));
    }
    let (r_endpoint, endpoint_norm) = match endpoint {
        Some(y) => (Some(f.value(y)), Some(f.space().sobolev_norm(y)?)),
        None => (None, None),
    };
    let base_level = r_endpoint.unwrap_or(0.0).max(0.0);
    let mut warnings: Vec<String> = lambda_range_warning(problem).into_iter().collect();
    if let Some(n) = endpoint_norm {
        if n <= rho {
            warnings.push(format!("endpoint norm {n} does not exceed ρ = {rho}"));
        }
    }
    Ok(GeometryReport {
        rho,
        sphere_samples: samples,
        eta_hat,
        r_endpoint,
        endpoint_norm,
        base_level,
        separated: eta_hat > base_level,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub s: f64,
    pub doublings: u32,
    pub r_value: f64,
    pub norm: f64,
    /// `(s, R(s u0))` for every trial.
    pub trace: Vec<(f64, f64)>,
    #[serde(skip)]
    pub y: GridFunction,
}

/// Doubles `s` from 1 until `R(s u0) < 0` and `‖s u0‖ > min_norm`.
pub fn find_endpoint(problem: &Problem, u0: &GridFunction, max_doublings: u32, min_norm: f64) -> Result<Endpoint> {
    if u0.is_zero() {
        return Err(Error::config("direction", "u0 must be nonzero"));
    }
    let f = problem.functional();
    let mut s = 1.0;
    let mut trace = Vec::new();
    let mut last = f64::NAN;
    for k in 0..=max_doublings {
        let y = u0.scaled(s);
        last = f.value(&y);
        trace.push((s, last));
        if last < 0.0 {
            let norm = f.space().sobolev_norm(&y)?;
            if norm > min_norm {
                return Ok(Endpoint {
                    s,
                    doublings: k,
                    r_value: last,
                    norm,
                    trace,
                    y,
                });
            }
        }
        s *= 2.0;
    }
    Err(Error::Anticoercivity {
        potential: problem.potential().name().to_string(),
        doublings: max_doublings,
        last_value: last,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    /// Per interior node: distance of the lumped residual of
    /// `Au - λ|u|^{p-2}u` to `w_i ∂j(x_i, u_i)`.
    pub slacks: Vec<f64>,
    pub max_slack: f64,
    pub worst_node: Option<usize>,
    pub tol: f64,
    pub passed: bool,
}

pub fn certify_inclusion(problem: &Problem, u: &GridFunction, tol: f64) -> InclusionReport {
    let f = problem.functional();
    let g = f.fixed_part(u);
    let intervals = f.clarke_intervals(u);
    let slacks: Vec<f64> = g
        .iter()
        .zip(&intervals)
        .zip(f.weights())
        .map(|((&g, iv), &w)| (w * iv.lower - g).max(g - w * iv.upper).max(0.0))
        .collect();
    let (worst, max_slack) = slacks
        .iter()
        .enumerate()
        .fold((None, 0.0f64), |(wi, m), (i, &s)| if s > m || s.is_nan() { (Some(i), s) } else { (wi, m) });
    let worst_node = worst.map(|i| problem.mesh().interior_nodes()[i]);
    InclusionReport {
        passed: max_slack <= tol,
        slacks,
        max_slack,
        worst_node,
        tol,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeCertificate {
    pub probes: usize,
    pub min_probe_value: f64,
    pub tol: f64,
    /// Every probe satisfied `R >= critical_value - tol`.
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub start: usize,
    pub r_value: f64,
    pub m_value: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub route: Route,
    pub converged: bool,
    pub critical_value: f64,
    pub energy: Energy,
    pub m_final: f64,
    pub cerami_final: f64,
    pub norm: f64,
    pub iterations: usize,
    pub seed: u64,
    pub flags: Vec<String>,
    pub geometry: Option<GeometryReport>,
    pub endpoint: Option<Endpoint>,
    /// `R` along the final path, mountain-pass route only.
    pub path_values: Vec<f64>,
    pub starts: Vec<StartSummary>,
    pub probe_certificate: Option<ProbeCertificate>,
    pub inclusion: InclusionReport,
    pub cerami: CeramiDiagnostic,
    pub hypothesis_stamps: Vec<CheckReport>,
    pub history: Vec<HistoryEntry>,
    pub u: GridFunction,
}

/// Discretized path `γ(k/K)`, `k = 0..=K`, with pinned endpoints.
#[derive(Clone, Debug)]
pub struct PathState {
    points: Vec<GridFunction>,
}

impl PathState {
    pub fn segment(start: &GridFunction, end: &GridFunction, segments: usize) -> Self {
        let k = segments as f64;
        let mut points: Vec<GridFunction> = (0..=segments).map(|i| start.lerp(end, i as f64 / k)).collect();
        points[0] = start.clone();
        points[segments] = end.clone();
        PathState { points }
    }

    pub fn points(&self) -> &[GridFunction] {
        &self.points
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    /// Redistributes the interior points of `lo..=hi` at equal arc length
    /// along the current polyline; `lo` and `hi` stay fixed.
    fn equalize(&mut self, lo: usize, hi: usize, f: &Functional) -> Result<Vec<usize>> {
        if hi <= lo + 1 {
            return Ok(vec![]);
        }
        let mut cum = vec![0.0];
        for i in lo..hi {
            let d = f.space().sobolev_norm(&self.points[i + 1].sub(&self.points[i]))?;
            cum.push(cum.last().unwrap() + d);
        }
        let total = *cum.last().unwrap();
        if !(total > 0.0) {
            return Ok(vec![]);
        }
        let old: Vec<GridFunction> = self.points[lo..=hi].to_vec();
        let n = hi - lo;
        let mut moved = Vec::new();
        let mut seg = 0;
        for j in 1..n {
            let target = total * j as f64 / n as f64;
            while seg + 1 < n && cum[seg + 1] < target {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let theta = if len > 0.0 { ((target - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
            self.points[lo + j] = old[seg].lerp(&old[seg + 1], theta);
            moved.push(lo + j);
        }
        Ok(moved)
    }
}

struct Descender<'a> {
    f: Functional<'a>,
    k: BandedSym,
    chol: BandedCholesky,
    opts: &'a SolverOptions,
}

struct Step {
    u: GridFunction,
    alpha: f64,
    decrease: f64,
}

impl<'a> Descender<'a> {
    fn new(problem: &'a Problem, opts: &'a SolverOptions) -> Result<Self> {
        let k = interior_stiffness(problem.mesh());
        let chol = k.cholesky()?;
        Ok(Descender {
            f: problem.functional(),
            k,
            chol,
            opts,
        })
    }

    /// `-K⁻¹ r`, optionally projected K-orthogonally to `tangent`.
    fn direction(&self, residual: &[f64], tangent: Option<&[f64]>) -> Vec<f64> {
        let mut d: Vec<f64> = self.chol.solve(residual).iter().map(|v| -v).collect();
        if let Some(t) = tangent {
            let kt = self.k.matvec(t);
            let tkt: f64 = kt.iter().zip(t).map(|(a, b)| a * b).sum();
            if tkt > 0.0 {
                let coef = -kt.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / tkt;
                for (di, ti) in d.iter_mut().zip(t) {
                    *di += coef * ti;
                }
            }
        }
        d
    }

    /// Minimizer of the quadratic through `φ(0) = 0`, `φ'(0) = slope` and
    /// `φ(α) = decrease`, kept when it beats the Armijo step. Without it a
    /// step of 2 on modes with unit preconditioned curvature passes Armijo
    /// but never contracts them.
    fn interpolate(
        &self,
        u: &GridFunction,
        dir: &GridFunction,
        slope: f64,
        (alpha, decrease): (f64, f64),
        cap: f64,
    ) -> (f64, f64) {
        let curv = decrease - slope * alpha;
        if !(curv > 0.0) {
            return (alpha, decrease);
        }
        let aq = (-slope * alpha * alpha / (2.0 * curv)).min(cap);
        if !(aq.is_finite() && aq > 0.0) || (aq - alpha).abs() <= 1e-3 * alpha {
            return (alpha, decrease);
        }
        let dq = self.f.difference(u, &dir.scaled(aq));
        if dq < decrease {
            (aq, dq)
        } else {
            (alpha, decrease)
        }
    }

    /// Armijo backtracking on `R` with `⟨r, d⟩` as slope, starting from
    /// `alpha0` and never exceeding `cap`.
    fn line_search(&self, u: &GridFunction, d: &[f64], slope: f64, alpha0: f64, cap: f64) -> Option<Step> {
        let mesh = self.f.mesh();
        let dir = GridFunction::from_interior(mesh, d);
        let mut alpha = alpha0.min(cap);
        for _ in 0..=self.opts.max_halvings {
            let du = dir.scaled(alpha);
            let decrease = self.f.difference(u, &du);
            if decrease <= self.opts.armijo_c * alpha * slope && decrease <= 0.0 {
                let (alpha, decrease) = self.interpolate(u, &dir, slope, (alpha, decrease), cap);
                return Some(Step {
                    u: u.axpy(alpha, &dir),
                    alpha,
                    decrease,
                });
            }
            alpha *= self.opts.backtrack;
        }
        None
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Moves `path[k]` to the maximum of `R` on the polyline through its
/// neighbours and returns the direction of the segment it ends up on.
fn refine_max(f: &Functional, path: &mut PathState, k: usize, values: &mut [f64]) -> Vec<f64> {
    let mesh = f.mesh();
    let u = path.points[k].clone();
    let to_right: Vec<f64> = path.points[k + 1].sub(&u).interior(mesh);
    let to_left: Vec<f64> = path.points[k - 1].sub(&u).interior(mesh);
    let dr = f.directional_derivative(&u, &to_right);
    let dl = f.directional_derivative(&u, &to_left);
    let dir = if dr > 0.0 && dr >= dl {
        to_right
    } else if dl > 0.0 {
        to_left
    } else {
        return path.points[k + 1].sub(&path.points[k - 1]).interior(mesh);
    };
    let step = GridFunction::from_interior(mesh, &dir);
    let slope_at = |theta: f64| f.directional_derivative(&u.axpy(theta, &step), &dir);
    if slope_at(1.0) >= 0.0 {
        // R keeps rising up to the neighbour, which then is at least as high
        return dir;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope_at(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let du = step.scaled(lo);
    let gain = f.difference(&u, &du);
    if gain > 0.0 {
        path.points[k] = u.axpy(1.0, &du);
        values[k] = f.value(&path.points[k]);
    }
    dir
}

fn history_entry(iteration: usize, r: f64, stat: &crate::functional::StationarityReport, step: f64, decrease: f64) -> HistoryEntry {
    HistoryEntry {
        iteration,
        r_value: r,
        m_value: stat.m_value,
        cerami_value: stat.cerami_value,
        norm: stat.norm,
        step,
        decrease,
    }
}

/// Mountain-pass critical point between `0` and an endpoint `y` found
/// along the first eigenvector.
pub fn mountain_pass(problem: &Problem, opts: &SolverOptions, seed: u64) -> Result<SolveResult> {
    opts.validate()?;
    let mesh = problem.mesh();
    let eig = first_eigenpair(mesh, opts.power_iterations)?;
    let endpoint = find_endpoint(problem, &eig.vector, opts.max_doublings, opts.rho)?;
    let geometry = verify_geometry(problem, opts.rho, opts.sphere_samples, seed, Some(&endpoint.y))?;
    let mut flags = Vec::new();
    if !geometry.separated {
        flags.push(format!(
            "geometry not certified: sampled η̂ = {} does not exceed max(R(0), R(y)) = {}",
            geometry.eta_hat, geometry.base_level
        ));
    }
    flags.extend(geometry.warnings.iter().cloned());

    let desc = Descender::new(problem, opts)?;
    let f = &desc.f;
    let segs = opts.path_points;
    let mut path = PathState::segment(&GridFunction::zeros(mesh), &endpoint.y, segs);
    let mut values: Vec<f64> = path.points.iter().map(|u| f.value(u)).collect();
    let mut history = Vec::new();
    let mut alpha: f64 = 1.0;
    let (mut last_step, mut last_decrease) = (0.0, 0.0);
    let mut converged = false;
    let mut collapsed = false;
    let mut k_star;
    let mut iterations = 0;
    let mut stat;
    loop {
        k_star = (1..segs).fold(1, |b, i| if values[i] > values[b] { i } else { b });
        let tangent = refine_max(f, &mut path, k_star, &mut values);
        let u = path.points[k_star].clone();
        stat = f.stationarity(&u)?;
        history.push(history_entry(iterations, values[k_star], &stat, last_step, last_decrease));
        if values[k_star] < geometry.eta_hat - opts.tol && !collapsed {
            collapsed = true;
            flags.push(format!(
                "path maximum {} fell below the sampled sphere level η̂ = {}",
                values[k_star], geometry.eta_hat
            ));
        }
        if stat.cerami_value <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iterations {
            flags.push(format!("iteration cap {} reached", opts.max_iterations));
            break;
        }
        let d = desc.direction(&stat.residual, Some(&tangent));
        let slope = dot(&stat.residual, &d);
        if !(slope < 0.0) {
            flags.push("no descent direction transverse to the path".into());
            break;
        }
        // a deformation step stays within the local path spacing
        let spacing = f
            .space()
            .sobolev_norm(&u.sub(&path.points[k_star - 1]))?
            .max(f.space().sobolev_norm(&path.points[k_star + 1].sub(&u))?);
        let d_norm = f.space().sobolev_norm(&GridFunction::from_interior(mesh, &d))?;
        let cap = opts.max_step.min(spacing / d_norm);
        let Some(step) = desc.line_search(&u, &d, slope, 2.0 * alpha, cap) else {
            flags.push("line search failed".into());
            break;
        };
        alpha = step.alpha;
        last_step = step.alpha;
        last_decrease = step.decrease;
        path.points[k_star] = step.u;
        values[k_star] = f.value(&path.points[k_star]);
        for i in path.equalize(0, k_star, f)?.into_iter().chain(path.equalize(k_star, segs, f)?) {
            values[i] = f.value(&path.points[i]);
        }
        iterations += 1;
    }
    let u = path.points[k_star].clone();
    let energy = f.energy(&u);
    let cerami = cerami_diagnostic(&history, opts.tol, opts.stagnation_window)?;
    Ok(SolveResult {
        route: Route::MountainPass,
        converged,
        critical_value: energy.total,
        energy,
        m_final: stat.m_value,
        cerami_final: stat.cerami_value,
        norm: stat.norm,
        iterations,
        seed,
        flags,
        geometry: Some(geometry),
        endpoint: Some(endpoint),
        path_values: values,
        starts: vec![],
        probe_certificate: None,
        inclusion: certify_inclusion(problem, &u, opts.certify_tol),
        cerami,
        hypothesis_stamps: vec![],
        history,
        u,
    })
}

struct Descent {
    u: GridFunction,
    r: f64,
    m: f64,
    cerami: f64,
    norm: f64,
    iterations: usize,
    converged: bool,
    history: Vec<HistoryEntry>,
}

fn descend(desc: &Descender, mut u: GridFunction) -> Result<Descent> {
    let f = &desc.f;
    let opts = desc.opts;
    let mut r = f.value(&u);
    let mut history = Vec::new();
    let mut alpha: f64 = 1.0;
    let (mut last_step, mut last_decrease) = (0.0, 0.0);
    let mut iterations = 0;
    loop {
        let stat = f.stationarity(&u)?;
        history.push(history_entry(iterations, r, &stat, last_step, last_decrease));
        let done = stat.cerami_value <= opts.tol;
        let stop = |converged| Descent {
            u: u.clone(),
            r,
            m: stat.m_value,
            cerami: stat.cerami_value,
            norm: stat.norm,
            iterations,
            converged,
            history: history.clone(),
        };
        if done || iterations >= opts.max_iterations {
            return Ok(stop(done));
        }
        let d = desc.direction(&stat.residual, None);
        let slope = dot(&stat.residual, &d);
        let step = if slope < 0.0 {
            desc.line_search(&u, &d, slope, 2.0 * alpha, opts.max_step)
        } else {
            None
        };
        let Some(step) = step else {
            return Ok(stop(false));
        };
        alpha = step.alpha;
        last_step = step.alpha;
        last_decrease = step.decrease;
        u = step.u;
        r = f.value(&u);
        if r < -opts.unbounded_guard {
            return Err(Error::UnboundedBelow {
                value: r,
                guard: -opts.unbounded_guard,
            });
        }
        iterations += 1;
    }
}

/// Multistart descent to the global minimum of `R` with a random-probe
/// bounded-below certificate. Start 0 is the zero function.
pub fn global_minimize(problem: &Problem, opts: &SolverOptions, seed: u64) -> Result<SolveResult> {
    opts.validate()?;
    let mesh = problem.mesh();
    let desc = Descender::new(problem, opts)?;
    let starts: Vec<GridFunction> = (0..opts.multistart)
        .map(|s| {
            if s == 0 {
                GridFunction::zeros(mesh)
            } else {
                random_function(mesh, &mut rng(derive_seed(seed, s as u64)), true)
            }
        })
        .collect();
    let runs: Vec<Result<Descent>> = starts.into_par_iter().map(|u| descend(&desc, u)).collect();
    let runs: Vec<Descent> = runs.into_iter().collect::<Result<_>>()?;
    let summaries: Vec<StartSummary> = runs
        .iter()
        .enumerate()
        .map(|(i, d)| StartSummary {
            start: i,
            r_value: d.r,
            m_value: d.m,
            iterations: d.iterations,
            converged: d.converged,
        })
        .collect();
    let best = (0..runs.len())
        .min_by(|&a, &b| {
            let (x, y) = (&runs[a], &runs[b]);
            x.r.total_cmp(&y.r).then(x.m.total_cmp(&y.m))
        })
        .expect("at least one start");
    let best = &runs[best];
    let probe_seed = derive_seed(seed, 0x7072_6f62);
    let f = &desc.f;
    let probe_values: Vec<f64> = (0..opts.probes)
        .into_par_iter()
        .map(|i| {
            let u = random_function(mesh, &mut rng(derive_seed(probe_seed, i as u64)), true);
            f.value(&u)
        })
        .collect();
    let min_probe_value = probe_values.iter().copied().fold(f64::INFINITY, f64::min);
    let certificate = ProbeCertificate {
        probes: opts.probes,
        min_probe_value,
        tol: opts.probe_tol,
        passed: probe_values.iter().all(|&v| v >= best.r - opts.probe_tol),
    };
    let mut flags = Vec::new();
    if !best.converged {
        flags.push("best start did not reach the stopping tolerance".into());
    }
    if !certificate.passed {
        flags.push(format!(
            "probe below the returned value: min probe R = {min_probe_value}, R = {}",
            best.r
        ));
    }
    let energy = f.energy(&best.u);
    Ok(SolveResult {
        route: Route::GlobalMin,
        converged: best.converged,
        critical_value: energy.total,
        energy,
        m_final: best.m,
        cerami_final: best.cerami,
        norm: best.norm,
        iterations: best.iterations,
        seed,
        flags,
        geometry: None,
        endpoint: None,
        path_values: vec![],
        starts: summaries,
        probe_certificate: Some(certificate),
        inclusion: certify_inclusion(problem, &best.u, opts.certify_tol),
        cerami: cerami_diagnostic(&best.history, opts.tol, opts.stagnation_window)?,
        hypothesis_stamps: vec![],
        history: best.history.clone(),
        u: best.u.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ExponentField;
    use crate::expr::Expr;
    use crate::mesh::Mesh;
    use crate::potential::{builtin_j1, PotentialSpec};

    fn problem(cells: usize, p: f64, lambda: f64, j: PotentialSpec) -> Problem {
        let m = Mesh::unit_interval(cells);
        let e = ExponentField::constant(&m, p);
        Problem::new(m, e, lambda, j).unwrap()
    }

    fn quartic() -> PotentialSpec {
        PotentialSpec::smooth("quartic", Expr::parse("abs(t)^4/4").unwrap())
    }

    #[test]
    fn zero_potential_has_no_endpoint() {
        let pr = problem(16, 2.0, 0.0, PotentialSpec::zero());
        let u0 = first_eigenpair(pr.mesh(), 50).unwrap().vector;
        let e = find_endpoint(&pr, &u0, 60, 0.1);
        assert!(matches!(e, Err(Error::Anticoercivity { doublings: 60, .. })));
        let mp = mountain_pass(&pr, &SolverOptions::default(), 1);
        assert!(matches!(mp, Err(Error::Anticoercivity { .. })));
    }

    #[test]
    fn endpoint_for_quartic() {
        let pr = problem(32, 2.0, 0.0, quartic());
        let u0 = first_eigenpair(pr.mesh(), 50).unwrap().vector;
        let e = find_endpoint(&pr, &u0, 60, 0.1).unwrap();
        assert!(e.r_value < 0.0);
        assert_eq!(e.s, 8.0);
        assert_eq!(e.trace.len(), 4);
    }

    #[test]
    fn geometry_of_dirichlet_energy() {
        let pr = problem(16, 2.0, 0.0, PotentialSpec::zero());
        let g = verify_geometry(&pr, 0.1, 64, 3, None).unwrap();
        assert!(g.eta_hat > 0.0 && g.separated);
        assert!(verify_geometry(&pr, 1.5, 4, 3, None).is_err());
    }

    #[test]
    fn lambda_warning_at_the_interval_end() {
        let m = Mesh::unit_interval(8);
        let p = ExponentField::constant(&m, 3.0);
        let j = builtin_j1(1.0, &Expr::constant(2.0), 5.0, &p.validate(), m.coords()).unwrap();
        let pr = Problem::new(m.clone(), p.clone(), 3.0, j.clone()).unwrap();
        assert!(lambda_range_warning(&pr).is_some());
        let pr = Problem::new(m, p, 2.0, j).unwrap();
        assert!(lambda_range_warning(&pr).is_none());
    }

    #[test]
    fn inclusion_of_zero_and_random_states() {
        let pr = problem(16, 2.0, 0.0, quartic());
        let z = certify_inclusion(&pr, &GridFunction::zeros(pr.mesh()), 1e-6);
        assert!(z.passed && z.max_slack == 0.0);
        let u = GridFunction::dirichlet_from_fn(pr.mesh(), |c| (3.0 * c[0]).sin());
        let r = certify_inclusion(&pr, &u, 1e-6);
        assert!(!r.passed && r.max_slack > 0.0);
    }

    #[test]
    fn small_mountain_pass_converges_with_pinned_endpoints() {
        let pr = problem(16, 2.0, 0.0, quartic());
        let opts = SolverOptions {
            sphere_samples: 16,
            ..Default::default()
        };
        let res = mountain_pass(&pr, &opts, 4).unwrap();
        assert!(res.converged, "{:?}", res.flags);
        assert!(res.cerami_final <= 1e-6);
        assert!(res.critical_value >= res.geometry.as_ref().unwrap().eta_hat - 1e-6);
        assert_eq!(res.path_values[0], 0.0);
        assert_eq!(res.path_values[32], res.endpoint.as_ref().unwrap().r_value);
        assert!(res.history.iter().all(|h| h.decrease <= 0.0));
        assert!(res.inclusion.passed);
        assert!(res.u.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn global_minimum_from_zero_start() {
        let j = PotentialSpec::smooth("t5", Expr::parse("-5*abs(t)^5").unwrap());
        let pr = problem(16, 3.0, 2.0, j);
        let opts = SolverOptions {
            multistart: 3,
            probes: 200,
            max_iterations: 300,
            ..Default::default()
        };
        let res = global_minimize(&pr, &opts, 9).unwrap();
        assert!(res.converged);
        assert!(res.critical_value <= 0.0);
        assert_eq!(res.m_final, 0.0);
        assert!(res.probe_certificate.as_ref().unwrap().passed);
        assert_eq!(res.starts.len(), 3);
    }

    #[test]
    fn unbounded_below_is_reported() {
        // λ above the first eigenvalue: every nonzero start runs off
        let j = PotentialSpec::smooth("up", Expr::parse("abs(t)^4").unwrap());
        let pr = problem(8, 2.0, 20.0, j);
        let opts = SolverOptions {
            multistart: 4,
            probes: 10,
            ..Default::default()
        };
        let res = global_minimize(&pr, &opts, 2);
        assert!(matches!(res, Err(Error::UnboundedBelow { .. })), "{:?}", res.as_ref().map(|r| (&r.starts, &r.flags)));
    }

    #[test]
    fn path_equalization_keeps_pins() {
        let m = Mesh::unit_interval(8);
        let p = ExponentField::constant(&m, 2.0);
        let pr = Problem::new(m.clone(), p, 0.0, PotentialSpec::zero()).unwrap();
        let f = pr.functional();
        let y = GridFunction::dirichlet_from_fn(&m, |c| (std::f64::consts::PI * c[0]).sin());
        let mut path = PathState::segment(&GridFunction::zeros(&m), &y, 8);
        path.points[3] = path.points[3].scaled(1.2);
        let pinned = path.points[3].clone();
        path.equalize(0, 3, &f).unwrap();
        path.equalize(3, 8, &f).unwrap();
        assert!(path.points()[0].is_zero());
        assert_eq!(path.points()[8], y);
        assert_eq!(path.points()[3], pinned);
        let d: Vec<f64> = (3..8)
            .map(|i| f.space().sobolev_norm(&path.points()[i + 1].sub(&path.points()[i])).unwrap())
            .collect();
        for w in d.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-9 * w[0]);
        }
    }
}
