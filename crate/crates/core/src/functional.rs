//! The energy `R(u) = J(u) - ∫ λ|u|^{p(x)}/p(x) - ∫ j(x, u)`, its min-norm
//! Clarke subgradient and the Cerami diagnostic.
//!
//! The two zeroth-order terms use lumped nodal quadrature. With that choice
//! the discrete Clarke subdifferential of `R` is a box, and the min-norm
//! element is found exactly by clipping per node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::mesh::{GridFunction, Mesh, Point};
use crate::modular::VariableSpace;
use crate::operator::{self, euclidean_norm, power_difference};
use crate::potential::{ClarkeInterval, PotentialSpec};

/// A fully specified inclusion problem on a mesh.
#[derive(Clone, Debug)]
pub struct Problem {
    mesh: Mesh,
    p: ExponentField,
    lambda: f64,
    potential: PotentialSpec,
}

impl Problem {
    pub fn new(mesh: Mesh, p: ExponentField, lambda: f64, potential: PotentialSpec) -> Result<Self> {
        if p.values().len() != mesh.n_nodes() {
            return Err(Error::config("exponent.p", "exponent field does not match the mesh"));
        }
        p.validated()?;
        if !lambda.is_finite() {
            return Err(Error::config("lambda", "λ must be finite"));
        }
        if mesh.n_interior() == 0 {
            return Err(Error::config("domain.resolution", "mesh has no interior nodes"));
        }
        potential.validate_on(mesh.coords())?;
        Ok(Problem {
            mesh,
            p,
            lambda,
            potential,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn exponent(&self) -> &ExponentField {
        &self.p
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn functional(&self) -> Functional<'_> {
        Functional::new(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Energy {
    pub total: f64,
    /// `∫ |∇u|^p / p`
    pub gradient_term: f64,
    /// `-λ ∫ |u|^p / p`
    pub lambda_term: f64,
    /// `-∫ j(x, u)`
    pub potential_term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// Euclidean norm of the min-norm residual.
    pub m_value: f64,
    /// `(1 + ‖u‖) m`
    pub cerami_value: f64,
    /// `‖u‖_{p(x)} + ‖∇u‖_{p(x)}`
    pub norm: f64,
    /// Chosen `v*` per interior node.
    pub selection: Vec<f64>,
    /// `Au - λ|u|^{p-2}u - v*` paired with interior basis functions.
    pub residual: Vec<f64>,
}

/// `R` and its derivatives on one problem, with per-node data cached.
#[derive(Clone, Debug)]
pub struct Functional<'a> {
    problem: &'a Problem,
    space: VariableSpace<'a>,
    nodes: Vec<usize>,
    weights: Vec<f64>,
    points: Vec<Point>,
    p_nodes: Vec<f64>,
}

impl<'a> Functional<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        let mesh = &problem.mesh;
        let nodes = mesh.interior_nodes().to_vec();
        Functional {
            problem,
            space: VariableSpace::new(mesh, &problem.p),
            weights: nodes.iter().map(|&n| mesh.lumped_weights()[n]).collect(),
            points: nodes.iter().map(|&n| mesh.coords()[n]).collect(),
            p_nodes: nodes.iter().map(|&n| problem.p.values()[n]).collect(),
            nodes,
        }
    }

    pub fn problem(&self) -> &'a Problem {
        self.problem
    }

    pub fn space(&self) -> &VariableSpace<'a> {
        &self.space
    }

    pub fn mesh(&self) -> &'a Mesh {
        &self.problem.mesh
    }

    /// Lumped weight of each interior node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn interior_value(&self, u: &GridFunction, i: usize) -> f64 {
        u.values()[self.nodes[i]]
    }

    pub fn energy(&self, u: &GridFunction) -> Energy {
        let lambda = self.problem.lambda;
        let j = &self.problem.potential;
        let gradient_term = operator::energy_j(&self.space, u);
        let mut lam = 0.0;
        let mut pot = 0.0;
        for i in 0..self.nodes.len() {
            let t = self.interior_value(u, i);
            let p = self.p_nodes[i];
            lam += self.weights[i] * t.abs().powf(p) / p;
            pot += self.weights[i] * j.eval(self.points[i], t);
        }
        let lambda_term = -lambda * lam;
        let potential_term = -pot;
        Energy {
            total: gradient_term + lambda_term + potential_term,
            gradient_term,
            lambda_term,
            potential_term,
        }
    }

    pub fn value(&self, u: &GridFunction) -> f64 {
        self.energy(u).total
    }

    /// `R(u + du) - R(u)` assembled from local differences.
    pub fn difference(&self, u: &GridFunction, du: &GridFunction) -> f64 {
        let lambda = self.problem.lambda;
        let j = &self.problem.potential;
        let mut d = operator::energy_j_difference(&self.space, u, du);
        let mut lam = 0.0;
        let mut pot = 0.0;
        for i in 0..self.nodes.len() {
            let t = self.interior_value(u, i);
            let dt = du.values()[self.nodes[i]];
            if dt == 0.0 {
                continue;
            }
            let p = self.p_nodes[i];
            let s = t + dt;
            let delta = if t * s > 0.0 { dt * t.signum() } else { s.abs() - t.abs() };
            lam += self.weights[i] * power_difference(t.abs(), s.abs(), delta, p) / p;
            pot += self.weights[i] * j.difference(self.points[i], t, dt);
        }
        d -= lambda * lam;
        d -= pot;
        d
    }

    /// `⟨Au, e_i⟩ - λ w_i |u_i|^{p_i-2} u_i` per interior node.
    pub fn fixed_part(&self, u: &GridFunction) -> Vec<f64> {
        let a = operator::a_vector(&self.space, u);
        let l = operator::lambda_vector(&self.space, u, self.problem.lambda);
        a.iter().zip(&l).map(|(a, l)| a - l).collect()
    }

    pub fn clarke_intervals(&self, u: &GridFunction) -> Vec<ClarkeInterval> {
        (0..self.nodes.len())
            .map(|i| self.problem.potential.clarke_interval(self.points[i], self.interior_value(u, i)))
            .collect()
    }

    /// Min-norm element of the discrete subdifferential: per node, the
    /// unconstrained minimiser `g_i / w_i` clipped to the Clarke interval.
    pub fn stationarity(&self, u: &GridFunction) -> Result<StationarityReport> {
        let g = self.fixed_part(u);
        let intervals = self.clarke_intervals(u);
        let mut selection = Vec::with_capacity(g.len());
        let mut residual = Vec::with_capacity(g.len());
        for i in 0..g.len() {
            let v = intervals[i].clamp(g[i] / self.weights[i]);
            selection.push(v);
            residual.push(g[i] - self.weights[i] * v);
        }
        if residual.iter().any(|r| !r.is_finite()) {
            return Err(Error::Numeric("non-finite subgradient".into()));
        }
        let m_value = euclidean_norm(&residual);
        let norm = self.space.sobolev_norm(u)?;
        Ok(StationarityReport {
            m_value,
            cerami_value: (1.0 + norm) * m_value,
            norm,
            selection,
            residual,
        })
    }

    /// One-sided derivative of `R` at `u` along the interior vector `d`.
    pub fn directional_derivative(&self, u: &GridFunction, d: &[f64]) -> f64 {
        let g = self.fixed_part(u);
        let j = &self.problem.potential;
        (0..g.len())
            .map(|i| g[i] * d[i] - self.weights[i] * j.directional_derivative(self.points[i], self.interior_value(u, i), d[i]))
            .sum()
    }
}

/// Free-function forms on a [`Problem`].
pub fn r_value(problem: &Problem, u: &GridFunction) -> Energy {
    problem.functional().energy(u)
}

pub fn min_norm_subgradient(problem: &Problem, u: &GridFunction) -> Result<StationarityReport> {
    problem.functional().stationarity(u)
}

/// One row of an iteration history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    pub r_value: f64,
    pub m_value: f64,
    pub cerami_value: f64,
    pub norm: f64,
    /// Accepted step length, 0 before the first step.
    pub step: f64,
    /// `R` after the step minus `R` before it.
    pub decrease: f64,
}

pub const HISTORY_CSV_HEADER: &str = "iteration,r_value,m_value,cerami_value,norm,step,decrease";

impl HistoryEntry {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
            self.iteration, self.r_value, self.m_value, self.cerami_value, self.norm, self.step, self.decrease
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CeramiDiagnostic {
    pub bounded: bool,
    pub r_min: f64,
    pub r_max: f64,
    pub first_cerami: f64,
    pub final_cerami: f64,
    pub converged: bool,
    /// No decrease of the Cerami value over the last window.
    pub stagnant: bool,
    /// Norm grew over the last window while `m` stayed above tolerance.
    pub diverging: bool,
    pub flagged: bool,
}

/// Bound above which `R` values are treated as unbounded.
const R_BOUND: f64 = 1e12;

pub fn cerami_diagnostic(history: &[HistoryEntry], tol: f64, window: usize) -> Result<CeramiDiagnostic> {
    let (first, last) = match (history.first(), history.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Invariant("empty history".into())),
    };
    let r_min = history.iter().map(|h| h.r_value).fold(f64::INFINITY, f64::min);
    let r_max = history.iter().map(|h| h.r_value).fold(f64::NEG_INFINITY, f64::max);
    let bounded = r_min.is_finite() && r_max.is_finite() && r_min.abs().max(r_max.abs()) <= R_BOUND;
    let converged = last.cerami_value <= tol;
    let w = window.min(history.len() - 1);
    let (stagnant, diverging) = if w == 0 {
        (false, false)
    } else {
        let tail = &history[history.len() - 1 - w..];
        let start = tail[0].cerami_value;
        let stagnant = tail[1..].iter().all(|h| h.cerami_value >= start);
        let growing = tail.windows(2).all(|p| p[1].norm > p[0].norm) && tail[w].norm > 2.0 * tail[0].norm;
        let m_floor = tail.iter().map(|h| h.m_value).fold(f64::INFINITY, f64::min);
        (stagnant, growing && m_floor > tol)
    };
    Ok(CeramiDiagnostic {
        bounded,
        r_min,
        r_max,
        first_cerami: first.cerami_value,
        final_cerami: last.cerami_value,
        converged,
        stagnant,
        diverging,
        flagged: !bounded || (!converged && (stagnant || diverging)),
    })
}
