//! Modulars and Luxemburg norms of variable-exponent Lebesgue and Sobolev
//! spaces, plus numerical checks of their standard inequalities.
//!
//! Every integral is the mesh quadrature with `p` interpolated to the
//! quadrature points, so all relations are statements about one fixed
//! discrete measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::mesh::{GridFunction, Mesh};

/// Relative tolerance of the Luxemburg bisection.
pub const NORM_RTOL: f64 = 1e-12;
/// Bisection iteration cap once a bracket is found.
pub const BISECTION_CAP: usize = 200;
/// Cap on bracket doublings/halvings (covers the whole f64 exponent range).
const BRACKET_CAP: usize = 2200;
/// Slack for modular/norm inequalities, scaled by `max(1, |rhs|)`.
pub const LEMMA_SLACK: f64 = 1e-8;
/// Slack for the Hölder pairing, scaled by `max(1, rhs)`.
pub const HOLDER_SLACK: f64 = 1e-10;
/// Tolerance for classifying a norm as equal to one.
pub const SIDE_TOL: f64 = 1e-10;

/// Weighted samples `(w, |f|, p)` of a scalar field at quadrature points.
/// Zero samples are dropped since they contribute nothing to any modular.
#[derive(Clone, Debug, Default)]
pub struct ModularSamples {
    weight: Vec<f64>,
    ln_abs: Vec<f64>,
    exponent: Vec<f64>,
}

impl ModularSamples {
    pub fn push(&mut self, weight: f64, value: f64, exponent: f64) {
        let a = value.abs();
        if a > 0.0 {
            self.weight.push(weight);
            self.ln_abs.push(a.ln());
            self.exponent.push(exponent);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.weight.is_empty()
    }

    /// `Σ w |f / scale|^p`
    pub fn modular_scaled(&self, scale: f64) -> f64 {
        let ln_s = scale.ln();
        self.weight
            .iter()
            .zip(&self.ln_abs)
            .zip(&self.exponent)
            .map(|((w, l), p)| w * (p * (l - ln_s)).exp())
            .sum()
    }

    pub fn modular(&self) -> f64 {
        self.modular_scaled(1.0)
    }

    /// The unique `λ` with `Σ w |f/λ|^p = 1`, or 0 for the zero field.
    ///
    /// Geometric bracketing from `λ = 1` followed by bisection.
    pub fn luxemburg_norm(&self) -> Result<f64> {
        if self.is_zero() {
            return Ok(0.0);
        }
        let excess = |lambda: f64| self.modular_scaled(lambda) - 1.0;
        let (mut lo, mut hi);
        if excess(1.0) > 0.0 {
            lo = 1.0;
            hi = 2.0;
            let mut n = 0;
            while excess(hi) > 0.0 {
                lo = hi;
                hi *= 2.0;
                n += 1;
                if n > BRACKET_CAP || !hi.is_finite() {
                    return Err(Error::Numeric("luxemburg bracket overflow".into()));
                }
            }
        } else {
            hi = 1.0;
            lo = 0.5;
            let mut n = 0;
            while excess(lo) <= 0.0 {
                hi = lo;
                lo *= 0.5;
                n += 1;
                if n > BRACKET_CAP || lo == 0.0 {
                    return Err(Error::Numeric("luxemburg bracket underflow".into()));
                }
            }
        }
        for _ in 0..BISECTION_CAP {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= NORM_RTOL * hi || mid <= lo || mid >= hi {
                return Ok(mid);
            }
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(Error::Numeric("luxemburg bisection did not converge".into()))
    }

    pub fn extend(&mut self, other: &ModularSamples) {
        self.weight.extend_from_slice(&other.weight);
        self.ln_abs.extend_from_slice(&other.ln_abs);
        self.exponent.extend_from_slice(&other.exponent);
    }
}

/// `L^{p(x)}` / `W^{1,p(x)}` machinery on a mesh with a fixed exponent.
#[derive(Clone, Debug)]
pub struct VariableSpace<'a> {
    mesh: &'a Mesh,
    p_nodes: Vec<f64>,
    p_q: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
}

impl<'a> VariableSpace<'a> {
    pub fn new(mesh: &'a Mesh, p: &ExponentField) -> Self {
        assert_eq!(p.values().len(), mesh.n_nodes(), "exponent must live on the mesh");
        VariableSpace {
            mesh,
            p_nodes: p.values().to_vec(),
            p_q: mesh.at_quadrature(p.values()),
            p_minus: p.min(),
            p_plus: p.max(),
        }
    }

    pub fn mesh(&self) -> &'a Mesh {
        self.mesh
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn exponent_at_nodes(&self) -> &[f64] {
        &self.p_nodes
    }

    /// Exponent interpolated at each quadrature point.
    pub fn exponent_at_quadrature(&self) -> &[f64] {
        &self.p_q
    }

    pub fn samples_of_u(&self, u: &GridFunction) -> ModularSamples {
        let mut s = ModularSamples::default();
        for (q, &p) in self.mesh.quadrature().iter().zip(&self.p_q) {
            s.push(q.weight, q.interpolate(u.values()), p);
        }
        s
    }

    pub fn samples_of_gradient(&self, u: &GridFunction) -> ModularSamples {
        let mut s = ModularSamples::default();
        for (q, &p) in self.mesh.quadrature().iter().zip(&self.p_q) {
            let g = q.gradient(u.values());
            s.push(q.weight, g[0].hypot(g[1]), p);
        }
        s
    }

    /// `φ(u) = ∫ |u|^{p(x)}`
    pub fn modular(&self, u: &GridFunction) -> f64 {
        self.samples_of_u(u).modular()
    }

    pub fn norm(&self, u: &GridFunction) -> Result<f64> {
        self.samples_of_u(u).luxemburg_norm()
    }

    /// `∫ |∇u|^{p(x)}`
    pub fn gradient_modular(&self, u: &GridFunction) -> f64 {
        self.samples_of_gradient(u).modular()
    }

    pub fn gradient_norm(&self, u: &GridFunction) -> Result<f64> {
        self.samples_of_gradient(u).luxemburg_norm()
    }

    /// `Φ(u) = ∫ |∇u|^{p(x)} + |u|^{p(x)}`
    pub fn sobolev_modular(&self, u: &GridFunction) -> f64 {
        self.gradient_modular(u) + self.modular(u)
    }

    /// `‖u‖ = ‖u‖_{p(x)} + ‖∇u‖_{p(x)}`
    pub fn sobolev_norm(&self, u: &GridFunction) -> Result<f64> {
        Ok(self.norm(u)? + self.gradient_norm(u)?)
    }

    /// The Luxemburg norm of the modular `Φ`, `inf{λ > 0 : Φ(u/λ) <= 1}`,
    /// equivalent to [`sobolev_norm`](Self::sobolev_norm) within a factor 2.
    pub fn sobolev_luxemburg_norm(&self, u: &GridFunction) -> Result<f64> {
        let mut s = self.samples_of_u(u);
        s.extend(&self.samples_of_gradient(u));
        s.luxemburg_norm()
    }

    /// Evaluates the modular/norm relations at `u`.
    pub fn check_norm_modular(&self, u: &GridFunction) -> Result<ModularReport> {
        let s = self.samples_of_u(u);
        let norm = s.luxemburg_norm()?;
        Ok(modular_report(&s, norm, self.p_minus, self.p_plus))
    }

    /// The same relations for `Φ` and its Luxemburg norm, plus the
    /// equivalence `‖u‖_Φ <= ‖u‖ <= 2 ‖u‖_Φ` with the sum norm.
    pub fn check_sobolev(&self, u: &GridFunction) -> Result<SobolevReport> {
        let mut s = self.samples_of_u(u);
        let gs = self.samples_of_gradient(u);
        let sum_norm = s.luxemburg_norm()? + gs.luxemburg_norm()?;
        s.extend(&gs);
        let lux = s.luxemburg_norm()?;
        let base = modular_report(&s, lux, self.p_minus, self.p_plus);
        let mut checks = base.bounds_checked;
        checks.push(InequalityCheck::le("equivalence_lower", lux, sum_norm));
        checks.push(InequalityCheck::le("equivalence_upper", sum_norm, 2.0 * lux));
        Ok(SobolevReport {
            sobolev_modular: base.modular_value,
            sobolev_norm: sum_norm,
            modular_norm: lux,
            side: base.side,
            bounds_checked: checks,
        })
    }

    /// `∫|uv| <= (1/p- + 1/p'-) ‖u‖_{p(x)} ‖v‖_{p'(x)}`
    pub fn holder_pairing(&self, u: &GridFunction, v: &GridFunction) -> Result<HolderReport> {
        let mut su = ModularSamples::default();
        let mut sv = ModularSamples::default();
        let mut pair = Vec::with_capacity(self.p_q.len());
        for (q, &p) in self.mesh.quadrature().iter().zip(&self.p_q) {
            let a = q.interpolate(u.values());
            let b = q.interpolate(v.values());
            su.push(q.weight, a, p);
            sv.push(q.weight, b, p / (p - 1.0));
            pair.push(q.weight * (a * b).abs());
        }
        let lhs = crate::mesh::pairwise_sum(&pair);
        let p_conj_minus = self.p_plus / (self.p_plus - 1.0);
        let factor = 1.0 / self.p_minus + 1.0 / p_conj_minus;
        let rhs = factor * su.luxemburg_norm()? * sv.luxemburg_norm()?;
        Ok(HolderReport {
            lhs,
            rhs,
            holds: lhs <= rhs + HOLDER_SLACK * rhs.max(1.0),
        })
    }

    /// `‖u‖_{p(x)} / ‖∇u‖_{p(x)}` for a nonzero `u` with zero boundary values.
    pub fn poincare_ratio(&self, u: &GridFunction) -> Result<f64> {
        let num = self.norm(u)?;
        let den = self.gradient_norm(u)?;
        if den == 0.0 {
            if num == 0.0 {
                return Err(Error::config("u", "poincare ratio of the zero function"));
            }
            return Err(Error::Invariant(
                "zero gradient for a nonzero function with zero boundary values".into(),
            ));
        }
        Ok(num / den)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    BelowOne,
    EqualsOne,
    AboveOne,
}

impl Side {
    pub fn classify(norm: f64) -> Side {
        if (norm - 1.0).abs() <= SIDE_TOL {
            Side::EqualsOne
        } else if norm < 1.0 {
            Side::BelowOne
        } else {
            Side::AboveOne
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    /// `lhs <= rhs` up to [`LEMMA_SLACK`] scaled by `max(1, |rhs|)`.
    pub fn le(id: &str, lhs: f64, rhs: f64) -> Self {
        InequalityCheck {
            id: id.to_string(),
            lhs,
            rhs,
            holds: lhs <= rhs + LEMMA_SLACK * rhs.abs().max(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModularReport {
    pub modular_value: f64,
    pub norm: f64,
    pub side: Side,
    pub bounds_checked: Vec<InequalityCheck>,
}

impl ModularReport {
    pub fn all_hold(&self) -> bool {
        self.bounds_checked.iter().all(|c| c.holds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    pub sobolev_modular: f64,
    /// `‖u‖_{p(x)} + ‖∇u‖_{p(x)}`
    pub sobolev_norm: f64,
    /// Luxemburg norm of `Φ`; the norm the unit-ball relations refer to.
    pub modular_norm: f64,
    pub side: Side,
    pub bounds_checked: Vec<InequalityCheck>,
}

impl SobolevReport {
    pub fn all_hold(&self) -> bool {
        self.bounds_checked.iter().all(|c| c.holds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

fn modular_report(s: &ModularSamples, norm: f64, p_minus: f64, p_plus: f64) -> ModularReport {
    let phi = s.modular();
    let mut checks = Vec::new();
    if norm > 0.0 {
        let at_unit = s.modular_scaled(norm);
        checks.push(InequalityCheck {
            id: "norm_is_unit_level".into(),
            lhs: (at_unit - 1.0).abs(),
            rhs: LEMMA_SLACK,
            holds: (at_unit - 1.0).abs() <= LEMMA_SLACK,
        });
        let dn = norm - 1.0;
        let dm = phi - 1.0;
        let same_side = (dn > 0.0 && dm > 0.0)
            || (dn < 0.0 && dm < 0.0)
            || (dn.abs() <= LEMMA_SLACK && dm.abs() <= LEMMA_SLACK);
        checks.push(InequalityCheck {
            id: "unit_ball_sides_agree".into(),
            lhs: dn,
            rhs: dm,
            holds: same_side,
        });
        if norm > 1.0 {
            checks.push(InequalityCheck::le("above_one_lower", norm.powf(p_minus), phi));
            checks.push(InequalityCheck::le("above_one_upper", phi, norm.powf(p_plus)));
        } else if norm < 1.0 {
            checks.push(InequalityCheck::le("below_one_lower", norm.powf(p_plus), phi));
            checks.push(InequalityCheck::le("below_one_upper", phi, norm.powf(p_minus)));
        }
    }
    ModularReport {
        modular_value: phi,
        norm,
        side: Side::classify(norm),
        bounds_checked: checks,
    }
}

// Free-function forms of the space operations.

pub fn modular_lp(mesh: &Mesh, u: &GridFunction, p: &ExponentField) -> f64 {
    VariableSpace::new(mesh, p).modular(u)
}

pub fn luxemburg_norm(mesh: &Mesh, u: &GridFunction, p: &ExponentField) -> Result<f64> {
    VariableSpace::new(mesh, p).norm(u)
}

pub fn sobolev_modular(mesh: &Mesh, u: &GridFunction, p: &ExponentField) -> f64 {
    VariableSpace::new(mesh, p).sobolev_modular(u)
}

pub fn sobolev_norm(mesh: &Mesh, u: &GridFunction, p: &ExponentField) -> Result<f64> {
    VariableSpace::new(mesh, p).sobolev_norm(u)
}

pub fn check_norm_modular(mesh: &Mesh, u: &GridFunction, p: &ExponentField) -> Result<ModularReport> {
    VariableSpace::new(mesh, p).check_norm_modular(u)
}

pub fn holder_pairing(mesh: &Mesh, u: &GridFunction, v: &GridFunction, p: &ExponentField) -> Result<HolderReport> {
    VariableSpace::new(mesh, p).holder_pairing(u, v)
}

pub fn poincare_ratio(mesh: &Mesh, u: &GridFunction, p: &ExponentField) -> Result<f64> {
    VariableSpace::new(mesh, p).poincare_ratio(u)
}
