//! Randomized sweeps of the modular-space and operator inequalities over
//! seeded grid functions. Each suite is usable on its own; `sweep` runs
//! them all and produces one serializable report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentField;
use crate::mesh::{GridFunction, Mesh};
use crate::modular::{InequalityCheck, ModularSamples, VariableSpace, LEMMA_SLACK};
use crate::operator::{apply_a, energy_j_difference, flux, monotonicity_gap};
use crate::sampling::{derive_seed, random_function, rng};

/// Number of halvings / doublings in the scaled sequences.
pub const SEQUENCE_STEPS: u32 = 12;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub evaluated: usize,
    pub violations: usize,
    /// Largest `lhs - rhs` seen.
    pub worst_excess: f64,
}

impl Tally {
    fn record(&mut self, c: &InequalityCheck) {
        let excess = c.lhs - c.rhs;
        if self.evaluated == 0 || excess > self.worst_excess {
            self.worst_excess = excess;
        }
        self.evaluated += 1;
        if !c.holds {
            self.violations += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReport {
    pub sequences: usize,
    /// `u / 2^n`: norm and modular both strictly decrease toward zero.
    pub decay_failures: usize,
    /// `2^n u`: norm and modular both strictly increase without bound.
    pub growth_failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModularSuite {
    pub samples: usize,
    pub checks: BTreeMap<String, Tally>,
    pub sequences: SequenceReport,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderSuite {
    pub pairs: usize,
    pub violations: usize,
    /// Largest `lhs / rhs`.
    pub max_ratio: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareSuite {
    pub samples: usize,
    pub max_ratio: f64,
    /// `½ (1/p⁻ + 1/p'⁻) ‖1‖_{p'} ‖1‖_p`, valid on an interval.
    pub bound: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientSuite {
    pub pairs: usize,
    pub max_relative_error: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicitySuite {
    pub pairs: usize,
    pub min_gap: f64,
    pub nonpositive: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub samples: usize,
    pub cells: usize,
    pub exponent: String,
    pub norm_modular: ModularSuite,
    pub sobolev: ModularSuite,
    pub holder: HolderSuite,
    pub poincare: PoincareSuite,
    pub gradient: GradientSuite,
    pub monotonicity: MonotonicitySuite,
    pub passed: bool,
}

fn strictly(values: &[f64], increasing: bool) -> bool {
    values
        .windows(2)
        .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] })
}

/// Norms and modulars along `u·2^{±n}`, `n = 0..=SEQUENCE_STEPS`.
fn scaled_sequence(s: &ModularSamples, sign: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let norm = s.luxemburg_norm()?;
    let mut norms = Vec::new();
    let mut mods = Vec::new();
    for n in 0..=SEQUENCE_STEPS {
        // scaling u by k divides every ratio |u|/λ by 1/k
        let k = 2f64.powi(sign as i32 * n as i32);
        norms.push(norm * k);
        mods.push(s.modular_scaled(1.0 / k));
    }
    Ok((norms, mods))
}

fn sequence_ok(s: &ModularSamples, p_minus: f64, p_plus: f64) -> Result<(bool, bool)> {
    let (n_dec, m_dec) = scaled_sequence(s, -1.0)?;
    let last = SEQUENCE_STEPS as usize;
    let decay = strictly(&n_dec, false)
        && strictly(&m_dec, false)
        && n_dec[last] < 1.0
        && m_dec[last] <= n_dec[last].powf(p_minus) * (1.0 + LEMMA_SLACK);
    let (n_inc, m_inc) = scaled_sequence(s, 1.0)?;
    let growth = strictly(&n_inc, true)
        && strictly(&m_inc, true)
        && n_inc[last] > 1.0
        && m_inc[last] >= n_inc[last].powf(p_minus) * (1.0 - LEMMA_SLACK)
        && m_inc[last] <= n_inc[last].powf(p_plus) * (1.0 + LEMMA_SLACK);
    Ok((decay, growth))
}

fn modular_suite(
    space: &VariableSpace,
    samples: usize,
    seed: u64,
    zero_boundary: bool,
    sobolev: bool,
) -> Result<ModularSuite> {
    let mesh = space.mesh();
    let mut checks: BTreeMap<String, Tally> = BTreeMap::new();
    let mut decay_failures = 0;
    let mut growth_failures = 0;
    for i in 0..samples {
        let u = random_function(mesh, &mut rng(derive_seed(seed, i as u64)), zero_boundary);
        let (bounds, s) = if sobolev {
            let mut s = space.samples_of_u(&u);
            s.extend(&space.samples_of_gradient(&u));
            (space.check_sobolev(&u)?.bounds_checked, s)
        } else {
            (space.check_norm_modular(&u)?.bounds_checked, space.samples_of_u(&u))
        };
        for c in &bounds {
            checks.entry(c.id.clone()).or_default().record(c);
        }
        let (decay, growth) = sequence_ok(&s, space.p_minus(), space.p_plus())?;
        decay_failures += usize::from(!decay);
        growth_failures += usize::from(!growth);
    }
    let passed = checks.values().all(|t| t.violations == 0) && decay_failures == 0 && growth_failures == 0;
    Ok(ModularSuite {
        samples,
        checks,
        sequences: SequenceReport {
            sequences: samples,
            decay_failures,
            growth_failures,
        },
        passed,
    })
}

/// Unit-ball, above/below-one and scaled-sequence relations between the
/// modular `∫|u|^p` and the Luxemburg norm.
pub fn norm_modular_suite(mesh: &Mesh, p: &ExponentField, samples: usize, seed: u64) -> Result<ModularSuite> {
    modular_suite(&VariableSpace::new(mesh, p), samples, seed, false, false)
}

/// The same relations for `Φ(u) = ∫ |∇u|^p + |u|^p` on zero-boundary
/// functions, plus its equivalence with the sum norm.
pub fn sobolev_suite(mesh: &Mesh, p: &ExponentField, samples: usize, seed: u64) -> Result<ModularSuite> {
    modular_suite(&VariableSpace::new(mesh, p), samples, seed, true, true)
}

pub fn holder_suite(mesh: &Mesh, p: &ExponentField, pairs: usize, seed: u64) -> Result<HolderSuite> {
    let space = VariableSpace::new(mesh, p);
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for i in 0..pairs {
        let mut r = rng(derive_seed(seed, i as u64));
        let u = random_function(mesh, &mut r, false);
        let v = random_function(mesh, &mut r, false);
        let h = space.holder_pairing(&u, &v)?;
        violations += usize::from(!h.holds);
        max_ratio = max_ratio.max(h.lhs / h.rhs);
    }
    Ok(HolderSuite {
        pairs,
        violations,
        max_ratio,
        passed: violations == 0,
    })
}

/// Bound on `‖u‖_p / ‖∇u‖_p` for zero-boundary `u` on an interval:
/// `|u| <= ½ ∫|u'|`, then Hölder for `∫|u'|` and `‖u‖_p <= ‖u‖_∞ ‖1‖_p`.
pub fn interval_poincare_bound(mesh: &Mesh, p: &ExponentField) -> Result<f64> {
    if mesh.dim() != 1 {
        return Err(Error::config("domain", "the Poincaré bound is derived for intervals only"));
    }
    let space = VariableSpace::new(mesh, p);
    let (pm, pp) = (space.p_minus(), space.p_plus());
    let factor = 1.0 / pm + 1.0 / (pp / (pp - 1.0));
    let mut one_p = ModularSamples::default();
    let mut one_q = ModularSamples::default();
    for (q, &e) in mesh.quadrature().iter().zip(space.exponent_at_quadrature()) {
        one_p.push(q.weight, 1.0, e);
        one_q.push(q.weight, 1.0, e / (e - 1.0));
    }
    Ok(0.5 * factor * one_q.luxemburg_norm()? * one_p.luxemburg_norm()?)
}

pub fn poincare_suite(mesh: &Mesh, p: &ExponentField, samples: usize, seed: u64) -> Result<PoincareSuite> {
    let space = VariableSpace::new(mesh, p);
    let bound = interval_poincare_bound(mesh, p)?;
    let mut max_ratio = 0.0f64;
    for i in 0..samples {
        let u = random_function(mesh, &mut rng(derive_seed(seed, i as u64)), true);
        max_ratio = max_ratio.max(space.poincare_ratio(&u)?);
    }
    Ok(PoincareSuite {
        samples,
        max_ratio,
        bound,
        passed: max_ratio.is_finite() && max_ratio <= bound,
    })
}

/// `∫ |a(∇u) · ∇v|`, the size of `⟨Au, v⟩` before cancellation.
pub fn pairing_scale(space: &VariableSpace, u: &GridFunction, v: &GridFunction) -> f64 {
    space
        .mesh()
        .quadrature()
        .iter()
        .zip(space.exponent_at_quadrature())
        .map(|(q, &p)| {
            let f = flux(q.gradient(u.values()), p);
            let gv = q.gradient(v.values());
            q.weight * (f[0] * gv[0] + f[1] * gv[1]).abs()
        })
        .sum()
}

/// Error between `⟨A u, v⟩` and the central difference of `J` along `v`,
/// relative to [`pairing_scale`]. The difference is assembled locally, so
/// `ε` can be small.
pub fn gradient_error(space: &VariableSpace, u: &GridFunction, v: &GridFunction) -> f64 {
    let eps = 1e-7 * (1.0 + u.max_abs()) / v.max_abs();
    let start = u.axpy(-eps, v);
    let fd = energy_j_difference(space, &start, &v.scaled(2.0 * eps)) / (2.0 * eps);
    let exact = apply_a(space, u, v);
    (fd - exact).abs() / pairing_scale(space, u, v).max(f64::MIN_POSITIVE)
}

pub fn gradient_suite(mesh: &Mesh, p: &ExponentField, pairs: usize, seed: u64, tol: f64) -> Result<GradientSuite> {
    let space = VariableSpace::new(mesh, p);
    let mut worst = 0.0f64;
    for i in 0..pairs {
        let mut r = rng(derive_seed(seed, i as u64));
        let u = random_function(mesh, &mut r, true);
        let v = random_function(mesh, &mut r, true);
        let e = gradient_error(&space, &u, &v);
        worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
    }
    Ok(GradientSuite {
        pairs,
        max_relative_error: worst,
        tol,
        passed: worst <= tol,
    })
}

pub fn monotonicity_suite(mesh: &Mesh, p: &ExponentField, pairs: usize, seed: u64) -> Result<MonotonicitySuite> {
    let space = VariableSpace::new(mesh, p);
    let mut min_gap = f64::INFINITY;
    let mut nonpositive = 0;
    let mut counted = 0;
    for i in 0..pairs {
        let mut r = rng(derive_seed(seed, i as u64));
        let u1 = random_function(mesh, &mut r, true);
        let u2 = random_function(mesh, &mut r, true);
        if u1 == u2 {
            continue;
        }
        counted += 1;
        let g = monotonicity_gap(&space, &u1, &u2);
        min_gap = min_gap.min(g);
        nonpositive += usize::from(!(g > 0.0));
    }
    Ok(MonotonicitySuite {
        pairs: counted,
        min_gap,
        nonpositive,
        passed: nonpositive == 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub seed: u64,
    pub samples: usize,
    pub cells: usize,
    /// Exponent on `(0, 1)` as an expression of `x`.
    pub exponent: String,
    pub gradient_tol: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            seed: 0,
            samples: 1000,
            cells: 64,
            exponent: "2 + x".into(),
            gradient_tol: 1e-5,
        }
    }
}

pub fn sweep(opts: &SweepOptions) -> Result<LemmaReport> {
    if opts.samples == 0 {
        return Err(Error::config("samples", "need at least one sample"));
    }
    let mesh = Mesh::interval(0.0, 1.0, opts.cells)?;
    let expr = crate::expr::Expr::parse(&opts.exponent).map_err(|e| match e {
        Error::Config { message, .. } => Error::config("exponent", message),
        other => other,
    })?;
    let p = ExponentField::from_expr(&mesh, &expr);
    p.validated()?;
    let seed = |k: u64| derive_seed(opts.seed, k);
    let n = opts.samples;
    let norm_modular = norm_modular_suite(&mesh, &p, n, seed(1))?;
    let sobolev = sobolev_suite(&mesh, &p, n, seed(2))?;
    let holder = holder_suite(&mesh, &p, n, seed(3))?;
    let poincare = poincare_suite(&mesh, &p, n, seed(4))?;
    let gradient = gradient_suite(&mesh, &p, n.min(100), seed(5), opts.gradient_tol)?;
    let monotonicity = monotonicity_suite(&mesh, &p, n, seed(6))?;
    let passed = norm_modular.passed
        && sobolev.passed
        && holder.passed
        && poincare.passed
        && gradient.passed
        && monotonicity.passed;
    Ok(LemmaReport {
        seed: opts.seed,
        samples: n,
        cells: opts.cells,
        exponent: opts.exponent.clone(),
        norm_modular,
        sobolev,
        holder,
        poincare,
        gradient,
        monotonicity,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poincare_bound_on_the_unit_interval() {
        let m = Mesh::unit_interval(64);
        let p = ExponentField::from_fn(&m, |c| 2.0 + c[0]);
        let b = interval_poincare_bound(&m, &p).unwrap();
        assert!((b - 7.0 / 12.0).abs() < 1e-10, "{b}");
    }

    #[test]
    fn small_sweep_passes() {
        let r = sweep(&SweepOptions {
            seed: 7,
            samples: 40,
            cells: 32,
            ..Default::default()
        })
        .unwrap();
        assert!(r.passed, "{r:#?}");
        assert_eq!(r.sobolev.sequences.sequences, 40);
        assert!(r.norm_modular.checks.contains_key("norm_is_unit_level"));
        assert!(r.sobolev.checks.contains_key("equivalence_upper"));
    }

    #[test]
    fn sweep_is_deterministic() {
        let o = SweepOptions {
            seed: 3,
            samples: 10,
            cells: 16,
            ..Default::default()
        };
        let a = serde_json::to_string(&sweep(&o).unwrap()).unwrap();
        let b = serde_json::to_string(&sweep(&o).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_exponent_sequences_are_exact_powers() {
        let m = Mesh::unit_interval(16);
        let p = ExponentField::constant(&m, 3.0);
        let u = GridFunction::from_fn(&m, |c| 1.0 + c[0]);
        let s = VariableSpace::new(&m, &p).samples_of_u(&u);
        let (norms, mods) = scaled_sequence(&s, 1.0).unwrap();
        for (n, m) in norms.iter().zip(&mods) {
            assert!((m / n.powi(3) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cancelling_pairing_is_judged_against_its_scale() {
        // p symmetric about ½, u even and v odd: ⟨Au, v⟩ vanishes
        let m = Mesh::unit_interval(64);
        let p = ExponentField::from_fn(&m, |c| 2.0 + 0.5 * (std::f64::consts::PI * c[0]).sin());
        let space = VariableSpace::new(&m, &p);
        let u = GridFunction::dirichlet_from_fn(&m, |c| (std::f64::consts::PI * c[0]).sin());
        let v = GridFunction::dirichlet_from_fn(&m, |c| (2.0 * std::f64::consts::PI * c[0]).sin());
        assert!(apply_a(&space, &u, &v).abs() < 1e-12 * pairing_scale(&space, &u, &v));
        assert!(gradient_error(&space, &u, &v) < 1e-8);
    }

    #[test]
    fn bad_exponent_is_a_config_error() {
        let o = SweepOptions {
            exponent: "1 + x".into(),
            samples: 2,
            ..Default::default()
        };
        assert!(matches!(sweep(&o), Err(Error::Config { .. })));
    }
}
