//! The variable exponent `p(x)` sampled at mesh nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mesh::Mesh;

/// An exponent that may be infinite. Infinity is a branch of the critical
/// exponent's case split, never a large float.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Critical {
    Finite(f64),
    Infinite,
}

impl Critical {
    pub fn is_infinite(self) -> bool {
        matches!(self, Critical::Infinite)
    }

    /// `value < self`
    pub fn exceeds(self, value: f64) -> bool {
        match self {
            Critical::Finite(c) => value < c,
            Critical::Infinite => value.is_finite(),
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Critical::Finite(c) => Some(c),
            Critical::Infinite => None,
        }
    }
}

/// `N q / (N - q)` for `q < N`, infinite otherwise.
pub fn critical_exponent(dim: usize, q: f64) -> Critical {
    let n = dim as f64;
    if q < n {
        Critical::Finite(n * q / (n - q))
    } else {
        Critical::Infinite
    }
}

/// Nodal samples of an exponent over a domain of dimension `dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentField {
    values: Vec<f64>,
    dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentSummary {
    pub p_minus: f64,
    pub p_plus: f64,
    pub p_hat_star: Critical,
    pub valid: bool,
    pub violations: Vec<String>,
}

impl ExponentField {
    pub fn new(values: Vec<f64>, dim: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::config("exponent", "empty exponent field"));
        }
        if dim == 0 {
            return Err(Error::config("exponent", "dimension must be positive"));
        }
        Ok(ExponentField { values, dim })
    }

    pub fn constant(mesh: &Mesh, p: f64) -> Self {
        ExponentField {
            values: vec![p; mesh.n_nodes()],
            dim: mesh.dim(),
        }
    }

    pub fn from_expr(mesh: &Mesh, expr: &Expr) -> Self {
        ExponentField {
            values: mesh.coords().iter().map(|&c| expr.eval_at(c)).collect(),
            dim: mesh.dim(),
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        ExponentField {
            values: mesh.coords().iter().map(|&c| f(c)).collect(),
            dim: mesh.dim(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Min/max over nodes and the admissibility chain `1 < p- <= p+ < p̂*`.
    pub fn validate(&self) -> ExponentSummary {
        let mut violations = Vec::new();
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            violations.push(format!("p(x) finite (node {i} is {})", self.values[i]));
        }
        let p_minus = self.min();
        let p_plus = self.max();
        if p_minus.is_finite() && p_minus <= 1.0 {
            violations.push(format!("p⁻>1 (p⁻ = {p_minus})"));
        }
        let p_hat_star = critical_exponent(self.dim, p_minus);
        if p_plus.is_finite() && !p_hat_star.exceeds(p_plus) {
            violations.push(format!("p⁺<p̂* (p⁺ = {p_plus}, p̂* = {p_hat_star:?})"));
        }
        ExponentSummary {
            p_minus,
            p_plus,
            p_hat_star,
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn validated(&self) -> Result<ExponentSummary> {
        let s = self.validate();
        if s.valid {
            Ok(s)
        } else {
            Err(Error::config("exponent", s.violations.join("; ")))
        }
    }

    /// Nodewise conjugate exponent `p / (p - 1)`.
    pub fn conjugate(&self) -> Result<ExponentField> {
        self.validated()?;
        Ok(ExponentField {
            values: self.values.iter().map(|&p| p / (p - 1.0)).collect(),
            dim: self.dim,
        })
    }

    /// Nodewise Sobolev critical exponent.
    pub fn sobolev_critical(&self) -> Result<Vec<Critical>> {
        self.validated()?;
        Ok(self.values.iter().map(|&p| critical_exponent(self.dim, p)).collect())
    }
}

/// How an exponent-like coefficient is given in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Constant(f64),
    Expression(Expr),
    Nodal(Vec<f64>),
}

impl FieldSpec {
    pub fn sample(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        match self {
            FieldSpec::Constant(c) => Ok(vec![*c; mesh.n_nodes()]),
            FieldSpec::Expression(e) => {
                if e.depends_on(crate::expr::Var::T) {
                    return Err(Error::config("exponent", format!("`{e}` must not depend on t")));
                }
                Ok(mesh.coords().iter().map(|&c| e.eval_at(c)).collect())
            }
            FieldSpec::Nodal(v) => {
                if v.len() != mesh.n_nodes() {
                    return Err(Error::config(
                        "exponent",
                        format!("nodal array has {} entries, mesh has {} nodes", v.len(), mesh.n_nodes()),
                    ));
                }
                Ok(v.clone())
            }
        }
    }

    pub fn field(&self, mesh: &Mesh) -> Result<ExponentField> {
        ExponentField::new(self.sample(mesh)?, mesh.dim())
    }

    /// Coefficient as an expression of the coordinates, for potentials.
    /// Nodal arrays have no closed form and are rejected.
    pub fn as_expr(&self, key: &str) -> Result<Expr> {
        match self {
            FieldSpec::Constant(c) => Ok(Expr::constant(*c)),
            FieldSpec::Expression(e) => Ok(e.clone()),
            FieldSpec::Nodal(_) => Err(Error::config(key, "potential coefficients must be constants or expressions")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(values: Vec<f64>, dim: usize) -> ExponentField {
        ExponentField::new(values, dim).unwrap()
    }

    #[test]
    fn constant_two_in_three_dimensions() {
        let s = field(vec![2.0; 5], 3).validate();
        assert_eq!((s.p_minus, s.p_plus), (2.0, 2.0));
        assert_eq!(s.p_hat_star, Critical::Finite(6.0));
        assert!(s.valid);
    }

    #[test]
    fn exponent_one_is_inadmissible() {
        let s = field(vec![2.0, 1.0, 2.0], 1).validate();
        assert!(!s.valid);
        assert!(s.violations.iter().any(|v| v.starts_with("p⁻>1")));
        assert!(field(vec![2.0, 1.0], 1).conjugate().is_err());
    }

    #[test]
    fn linear_exponent_in_one_dimension() {
        let m = Mesh::unit_interval(10);
        let p = ExponentField::from_fn(&m, |c| 1.5 + 4.4 * c[0]);
        let s = p.validate();
        assert_eq!(s.p_hat_star, Critical::Infinite);
        assert!(s.valid);
        assert!((s.p_plus - 5.9).abs() < 1e-12);
    }

    #[test]
    fn supercritical_exponent_rejected() {
        // N = 2, p- = 1.5 -> p̂* = 6
        let s = field(vec![1.5, 6.5], 2).validate();
        assert!(!s.valid);
        assert!(field(vec![1.5, 5.9], 2).validate().valid);
    }

    #[test]
    fn empty_field_is_error() {
        assert!(ExponentField::new(vec![], 1).is_err());
    }

    #[test]
    fn conjugates() {
        assert_eq!(field(vec![2.0; 3], 1).conjugate().unwrap().values(), &[2.0; 3]);
        assert_eq!(field(vec![3.0; 2], 1).conjugate().unwrap().values(), &[1.5; 2]);
        let c = field(vec![2.0, 4.0, 2.5], 1).conjugate().unwrap();
        assert!((c.values()[1] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sobolev_critical_branches() {
        assert_eq!(field(vec![2.0], 2).sobolev_critical().unwrap(), vec![Critical::Infinite]);
        assert_eq!(field(vec![2.0], 3).sobolev_critical().unwrap(), vec![Critical::Finite(6.0)]);
        assert_eq!(field(vec![1.5], 2).sobolev_critical().unwrap(), vec![Critical::Finite(6.0)]);
    }

    #[test]
    fn field_specs() {
        let m = Mesh::unit_interval(4);
        let e: FieldSpec = serde_json::from_str("\"2 + x\"").unwrap();
        assert_eq!(e.sample(&m).unwrap()[2], 2.5);
        let c: FieldSpec = serde_json::from_str("3.0").unwrap();
        assert_eq!(c, FieldSpec::Constant(3.0));
        let n: FieldSpec = serde_json::from_str("[2,2,2]").unwrap();
        assert!(n.sample(&m).is_err());
        assert!(FieldSpec::Expression(Expr::parse("t").unwrap()).sample(&m).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn conjugate_is_an_involution(vals in proptest::collection::vec(1.05f64..20.0, 1..40)) {
                let p = ExponentField::new(vals.clone(), 1).unwrap();
                let back = p.conjugate().unwrap().conjugate().unwrap();
                for (a, b) in vals.iter().zip(back.values()) {
                    prop_assert!((a - b).abs() <= 1e-12 * a);
                }
            }

            #[test]
            fn validate_is_pure(vals in proptest::collection::vec(0.5f64..8.0, 1..20), dim in 1usize..4) {
                let p = ExponentField::new(vals, dim).unwrap();
                prop_assert_eq!(p.validate(), p.validate());
            }

            #[test]
            fn constant_field_hat_matches_pointwise(q in 1.01f64..5.0, dim in 1usize..4) {
                let p = ExponentField::new(vec![q; 3], dim).unwrap();
                let s = p.validate();
                let pointwise = critical_exponent(dim, q);
                prop_assert_eq!(s.p_hat_star, pointwise);
            }
        }
    }
}
