//! The energy `J(u) = ∫ |∇u|^{p(x)} / p(x)` and its derivative, the weak
//! `p(x)`-Laplacian `⟨Au, v⟩ = ∫ |∇u|^{p(x)-2} ∇u · ∇v`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::GridFunction;
use crate::modular::VariableSpace;

/// `|g|^{p-2} g`, continuously extended by 0 at `g = 0`.
#[inline]
pub fn flux(g: [f64; 2], p: f64) -> [f64; 2] {
    let n = g[0].hypot(g[1]);
    if n == 0.0 {
        return [0.0, 0.0];
    }
    let s = n.powf(p - 2.0);
    [s * g[0], s * g[1]]
}

/// `a^p - b^p` for `a, b >= 0`, accurate relative to the difference when
/// `delta = a - b` is supplied exactly.
#[inline]
pub fn power_difference(b: f64, a: f64, delta: f64, p: f64) -> f64 {
    if b == 0.0 {
        return a.powf(p);
    }
    if a == 0.0 {
        return -b.powf(p);
    }
    b.powf(p) * (p * (delta / b).ln_1p()).exp_m1()
}

pub fn energy_j(space: &VariableSpace, u: &GridFunction) -> f64 {
    let mesh = space.mesh();
    mesh.quadrature()
        .iter()
        .zip(space.exponent_at_quadrature())
        .map(|(q, &p)| {
            let g = q.gradient(u.values());
            q.weight * g[0].hypot(g[1]).powf(p) / p
        })
        .sum()
}

/// `J(u + du) - J(u)` without cancellation between the two totals.
pub fn energy_j_difference(space: &VariableSpace, u: &GridFunction, du: &GridFunction) -> f64 {
    let mesh = space.mesh();
    mesh.quadrature()
        .iter()
        .zip(space.exponent_at_quadrature())
        .map(|(q, &p)| {
            let g = q.gradient(u.values());
            let dg = q.gradient(du.values());
            let b = g[0].hypot(g[1]);
            let a = (g[0] + dg[0]).hypot(g[1] + dg[1]);
            if a + b == 0.0 {
                return 0.0;
            }
            let delta = (dg[0] * (2.0 * g[0] + dg[0]) + dg[1] * (2.0 * g[1] + dg[1])) / (a + b);
            q.weight * power_difference(b, a, delta, p) / p
        })
        .sum()
}

pub fn apply_a(space: &VariableSpace, u: &GridFunction, v: &GridFunction) -> f64 {
    let mesh = space.mesh();
    mesh.quadrature()
        .iter()
        .zip(space.exponent_at_quadrature())
        .map(|(q, &p)| {
            let f = flux(q.gradient(u.values()), p);
            let gv = q.gradient(v.values());
            q.weight * (f[0] * gv[0] + f[1] * gv[1])
        })
        .sum()
}

/// `⟨Au, e_i⟩` for every interior basis function, indexed by interior number.
pub fn a_vector(space: &VariableSpace, u: &GridFunction) -> Vec<f64> {
    let mesh = space.mesh();
    let mut out = vec![0.0; mesh.n_interior()];
    for (q, &p) in mesh.quadrature().iter().zip(space.exponent_at_quadrature()) {
        let f = flux(q.gradient(u.values()), p);
        for k in 0..q.n_local {
            if let Some(i) = mesh.interior_index(q.nodes[k]) {
                let s = q.shape_grad[k];
                out[i] += q.weight * (f[0] * s[0] + f[1] * s[1]);
            }
        }
    }
    out
}

/// Dual pairing of `Au - λ|u|^{p-2}u - v*` against interior basis functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssembledResidual {
    pub entries: Vec<f64>,
    /// Euclidean norm of `entries`.
    pub norm_dual: f64,
}

impl AssembledResidual {
    pub fn from_entries(entries: Vec<f64>) -> Self {
        let norm_dual = euclidean_norm(&entries);
        AssembledResidual { entries, norm_dual }
    }
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>().sqrt()
}

/// `λ w_i |u_i|^{p_i - 2} u_i` with lumped weights, per interior node.
pub fn lambda_vector(space: &VariableSpace, u: &GridFunction, lambda: f64) -> Vec<f64> {
    let mesh = space.mesh();
    let p = space.exponent_at_nodes();
    mesh.interior_nodes()
        .iter()
        .map(|&n| {
            let t = u.values()[n];
            if t == 0.0 {
                0.0
            } else {
                lambda * mesh.lumped_weights()[n] * t.abs().powf(p[n] - 2.0) * t
            }
        })
        .collect()
}

/// `⟨Au, e_i⟩ - λ∫|u|^{p-2}u e_i - ∫v* e_i` with the zeroth-order terms
/// lumped; `selection` is indexed by interior node.
pub fn assemble_residual(
    space: &VariableSpace,
    u: &GridFunction,
    lambda: f64,
    selection: &[f64],
) -> Result<AssembledResidual> {
    let mesh = space.mesh();
    if selection.len() != mesh.n_interior() {
        return Err(Error::Invariant(format!(
            "selection has {} entries for {} interior nodes",
            selection.len(),
            mesh.n_interior()
        )));
    }
    let a = a_vector(space, u);
    let l = lambda_vector(space, u, lambda);
    let entries: Vec<f64> = mesh
        .interior_nodes()
        .iter()
        .enumerate()
        .map(|(i, &n)| a[i] - l[i] - mesh.lumped_weights()[n] * selection[i])
        .collect();
    if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite residual at interior node {i}")));
    }
    Ok(AssembledResidual::from_entries(entries))
}

/// `⟨Au1 - Au2, u1 - u2⟩`
pub fn monotonicity_gap(space: &VariableSpace, u1: &GridFunction, u2: &GridFunction) -> f64 {
    let mesh = space.mesh();
    mesh.quadrature()
        .iter()
        .zip(space.exponent_at_quadrature())
        .map(|(q, &p)| {
            let g1 = q.gradient(u1.values());
            let g2 = q.gradient(u2.values());
            let f1 = flux(g1, p);
            let f2 = flux(g2, p);
            q.weight * ((f1[0] - f2[0]) * (g1[0] - g2[0]) + (f1[1] - f2[1]) * (g1[1] - g2[1]))
        })
        .sum()
}
