//! Nonsmooth potentials `j(x, t)`: piecewise-C¹ in `t` with finitely many
//! breakpoints, coefficients given as expressions in the coordinates.
//!
//! For this class the Clarke subdifferential in `t` is the closed interval
//! spanned by the one-sided slopes, so everything here is exact interval
//! arithmetic on symbolic derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::ExponentSummary;
use crate::expr::{format_number, Expr, Var, Vars};
use crate::mesh::Point;

/// Tolerance for `j(x, 0) = 0`.
pub const ZERO_TOL: f64 = 1e-12;
/// Tolerance for continuity across breakpoints, scaled by `max(1, |j|)`.
pub const CONTINUITY_TOL: f64 = 1e-10;
/// Absolute slack on sampled limsup ratios.
pub const RATIO_SLACK: f64 = 1e-3;

/// Slack for a `<= -margin` ratio test: never more than half the margin,
/// so a ratio of exactly 0 fails for every positive margin.
fn ratio_slack(margin: f64) -> f64 {
    RATIO_SLACK.min(0.5 * margin.abs())
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

/// Declared hypothesis data carried alongside a potential.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PotentialMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Expr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<Expr>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PotentialSpec {
    name: String,
    /// Strictly increasing. Piece `k` covers `(b[k-1], b[k]]`.
    breakpoints: Vec<f64>,
    formulas: Vec<Expr>,
    #[serde(skip)]
    slopes: Vec<Expr>,
    meta: PotentialMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClarkeInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ClarkeInterval {
    pub fn point(v: f64) -> Self {
        ClarkeInterval { lower: v, upper: v }
    }

    pub fn hull(a: f64, b: f64) -> Self {
        ClarkeInterval {
            lower: a.min(b),
            upper: a.max(b),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }

    /// Largest absolute value in the interval.
    pub fn magnitude(&self) -> f64 {
        self.lower.abs().max(self.upper.abs())
    }
}

impl PotentialSpec {
    /// A potential given by `formulas[k]` on the `k`-th interval cut out by
    /// `breakpoints`.
    pub fn piecewise(name: impl Into<String>, breakpoints: Vec<f64>, formulas: Vec<Expr>) -> Result<Self> {
        let name = name.into();
        if formulas.len() != breakpoints.len() + 1 {
            return Err(Error::config(
                "potential.pieces",
                format!("{} breakpoints need {} pieces, got {}", breakpoints.len(), breakpoints.len() + 1, formulas.len()),
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(Error::config("potential.breakpoints", "breakpoints must be finite"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("potential.breakpoints", "breakpoints must be strictly increasing"));
        }
        let slopes = formulas.iter().map(Expr::derivative_t).collect();
        Ok(PotentialSpec {
            name,
            breakpoints,
            formulas,
            slopes,
            meta: PotentialMeta::default(),
        })
    }

    pub fn smooth(name: impl Into<String>, formula: Expr) -> Self {
        Self::piecewise(name, vec![], vec![formula]).expect("single piece is well formed")
    }

    pub fn zero() -> Self {
        Self::smooth("zero", Expr::constant(0.0))
    }

    pub fn with_meta(mut self, meta: PotentialMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn formulas(&self) -> &[Expr] {
        &self.formulas
    }

    pub fn meta(&self) -> &PotentialMeta {
        &self.meta
    }

    pub fn is_zero(&self) -> bool {
        self.formulas.iter().all(|f| f.as_constant() == Some(0.0))
    }

    /// Checks `j(x, 0) = 0`, continuity across breakpoints and finiteness
    /// at the given sample points.
    pub fn validate_on(&self, xs: &[Point]) -> Result<()> {
        for &x in xs {
            let z = self.eval(x, 0.0);
            if !(z.abs() <= ZERO_TOL) {
                return Err(Error::config(
                    "potential",
                    format!("j(x, 0) = {z} at x = {x:?}, must vanish"),
                ));
            }
            for (k, &b) in self.breakpoints.iter().enumerate() {
                let left = self.formulas[k].eval(Vars::at(x, b));
                let right = self.formulas[k + 1].eval(Vars::at(x, b));
                if !left.is_finite() || !right.is_finite() {
                    return Err(Error::config("potential", format!("non-finite value at breakpoint {b}")));
                }
                if (left - right).abs() > CONTINUITY_TOL * left.abs().max(1.0) {
                    return Err(Error::config(
                        "potential",
                        format!("discontinuous at t = {b}, x = {x:?}: {left} vs {right}"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn piece(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&b| b < t)
    }

    pub fn eval(&self, x: Point, t: f64) -> f64 {
        self.formulas[self.piece(t)].eval(Vars::at(x, t))
    }

    /// `(left, right)` derivatives in `t`; equal away from breakpoints.
    pub fn one_sided_slopes(&self, x: Point, t: f64) -> (f64, f64) {
        let k = self.piece(t);
        let vars = Vars::at(x, t);
        let left = self.slopes[k].eval(vars);
        if k < self.breakpoints.len() && self.breakpoints[k] == t {
            (left, self.slopes[k + 1].eval(vars))
        } else {
            (left, left)
        }
    }

    pub fn clarke_interval(&self, x: Point, t: f64) -> ClarkeInterval {
        let (l, r) = self.one_sided_slopes(x, t);
        ClarkeInterval::hull(l, r)
    }

    /// `j⁰(x, t; h)`
    pub fn generalized_dd(&self, x: Point, t: f64, h: f64) -> f64 {
        let c = self.clarke_interval(x, t);
        (c.lower * h).max(c.upper * h)
    }

    /// One-sided derivative of `j(x, ·)` at `t` in direction `h`.
    pub fn directional_derivative(&self, x: Point, t: f64, h: f64) -> f64 {
        let (l, r) = self.one_sided_slopes(x, t);
        if h > 0.0 {
            r * h
        } else if h < 0.0 {
            l * h
        } else {
            0.0
        }
    }

    /// `j(x, t + dt) - j(x, t)`. Short steps integrate the slope with
    /// Gauss-Legendre between breakpoints to avoid cancellation.
    pub fn difference(&self, x: Point, t: f64, dt: f64) -> f64 {
        if dt == 0.0 {
            return 0.0;
        }
        if dt.abs() > 1e-3 * t.abs().max(1.0) {
            return self.eval(x, t + dt) - self.eval(x, t);
        }
        let (a, b) = if dt > 0.0 { (t, t + dt) } else { (t + dt, t) };
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints.iter().copied().filter(|&c| a < c && c < b));
        cuts.push(b);
        let mut sum = 0.0;
        let single = cuts.len() == 2;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let k = self.piece(0.5 * (lo + hi));
            // `t + dt` is rounded, so use the exact width when nothing is cut
            let half = if single { 0.5 * dt.abs() } else { 0.5 * (hi - lo) };
            let mid = 0.5 * (hi + lo);
            for (node, weight) in GAUSS5 {
                sum += half * weight * self.slopes[k].eval(Vars::at(x, mid + half * node));
            }
        }
        if dt > 0.0 {
            sum
        } else {
            -sum
        }
    }
}

const GAUSS5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// The two-regime potential `-ν|t|^{h(x)}` for `|t| <= 1` and
/// `-|t|^{r+} - ν + 1` beyond, with its exponent ordering checked against `p`.
pub fn builtin_j1(nu: f64, h: &Expr, r_plus: f64, p: &ExponentSummary, xs: &[Point]) -> Result<PotentialSpec> {
    if !(nu > 0.0) {
        return Err(Error::config("potential.nu", format!("ν must be positive, got {nu}")));
    }
    if h.depends_on(Var::T) {
        return Err(Error::config("potential.h", "h must not depend on t"));
    }
    let (h_minus, h_plus) = range_on(h, xs);
    if !(h_minus > 1.0) {
        return Err(Error::config("potential.h", format!("ordering requires 1 < h(x), got h⁻ = {h_minus}")));
    }
    if !(h_plus < p.p_minus) {
        return Err(Error::config(
            "potential.h",
            format!("ordering requires h⁺ < p⁻, got h⁺ = {h_plus}, p⁻ = {}", p.p_minus),
        ));
    }
    if !(p.p_plus < r_plus) {
        return Err(Error::config(
            "potential.r_plus",
            format!("ordering requires p⁺ < r⁻, got r = {r_plus}, p⁺ = {}", p.p_plus),
        ));
    }
    if !p.p_hat_star.exceeds(r_plus) {
        return Err(Error::config(
            "potential.r_plus",
            format!("ordering requires r⁺ < p̂*, got r⁺ = {r_plus}, p̂* = {:?}", p.p_hat_star),
        ));
    }
    let inner = Expr::parse(&format!("-{}*abs(t)^({})", format_number(nu), h.source()))?;
    let outer = Expr::parse(&format!("-abs(t)^{} - {} + 1", format_number(r_plus), format_number(nu)))?;
    let spec = PotentialSpec::piecewise("j1", vec![-1.0, 1.0], vec![outer.clone(), inner, outer])?.with_meta(PotentialMeta {
        r: Some(Expr::constant(r_plus)),
        h: Some(h.clone()),
        nu: Some(nu),
        ..Default::default()
    });
    spec.validate_on(xs)?;
    Ok(spec)
}

fn range_on(e: &Expr, xs: &[Point]) -> (f64, f64) {
    xs.iter().map(|&x| e.eval_at(x)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// `n` points geometrically spaced from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Default `|t|` grid for the growth check.
pub fn default_growth_grid() -> Vec<f64> {
    geometric_grid(1e-6, 10.0, 141)
}

const TAIL_POINTS: usize = 121;
const NEAR_ZERO_POINTS: usize = 71;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// `|v| <= c1 |t|^{r(x)-1}` for `v ∈ ∂j(x, t)`.
    Growth,
    /// `limsup (v t - j) / |t|^{r(x)} <= -c` as `|t| → ∞`.
    Asymptotic,
    /// `limsup j / |t|^{h(x)} <= -ν` as `t → 0`.
    NearZero,
    /// `limsup j / |t|^{r(x)} <= -μ` as `|t| → ∞`.
    Tail,
}

/// Sampled evidence for one hypothesis. Checkers report; they never gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub hypothesis: Hypothesis,
    pub passed: bool,
    /// The statistic must not exceed this value (plus slack where stated).
    pub threshold: f64,
    /// Worst value over the judged part of the grid.
    pub statistic: f64,
    pub worst_x: Point,
    pub worst_t: f64,
    /// Extremes of the sampled ratio over the whole grid.
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub samples: usize,
}

struct Scan {
    judged_max: f64,
    worst: (Point, f64),
    min: f64,
    max: f64,
    samples: usize,
}

/// Evaluates `ratio(x, t)` at `±t` for every `t` in `grid` and `x` in `xs`;
/// `judged(i)` selects the grid indices that count toward the statistic.
fn scan(grid: &[f64], xs: &[Point], judged: impl Fn(usize) -> bool, ratio: impl Fn(Point, f64) -> f64) -> Scan {
    let mut s = Scan {
        judged_max: f64::NEG_INFINITY,
        worst: ([0.0, 0.0], f64::NAN),
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        samples: 0,
    };
    for &x in xs {
        for (i, &m) in grid.iter().enumerate() {
            for t in [m, -m] {
                let r = ratio(x, t);
                let r = if r.is_nan() { f64::INFINITY } else { r };
                s.samples += 1;
                s.min = s.min.min(r);
                s.max = s.max.max(r);
                if judged(i) && r > s.judged_max {
                    s.judged_max = r;
                    s.worst = (x, t);
                }
            }
        }
    }
    s
}

fn report(h: Hypothesis, threshold: f64, slack: f64, s: Scan) -> CheckReport {
    CheckReport {
        hypothesis: h,
        passed: s.judged_max <= threshold + slack,
        threshold,
        statistic: s.judged_max,
        worst_x: s.worst.0,
        worst_t: s.worst.1,
        min_ratio: s.min,
        max_ratio: s.max,
        samples: s.samples,
    }
}

fn check_r_ordering(r: &Expr, p: &ExponentSummary, xs: &[Point]) -> Result<()> {
    let (r_minus, r_plus) = range_on(r, xs);
    if !(p.p_plus < r_minus) {
        return Err(Error::config(
            "potential.r",
            format!("growth exponent ordering requires p⁺ < r⁻, got p⁺ = {}, r⁻ = {r_minus}", p.p_plus),
        ));
    }
    if !p.p_hat_star.exceeds(r_plus) {
        return Err(Error::config(
            "potential.r",
            format!("growth exponent ordering requires r⁺ < p̂*, got r⁺ = {r_plus}, p̂* = {:?}", p.p_hat_star),
        ));
    }
    Ok(())
}

/// Ratio `max |∂j(x,t)| / (c1 |t|^{r(x)-1})` over the grid; passes when it
/// never exceeds 1.
pub fn check_growth(
    spec: &PotentialSpec,
    c1: f64,
    r: &Expr,
    p: &ExponentSummary,
    t_grid: &[f64],
    xs: &[Point],
) -> Result<CheckReport> {
    check_r_ordering(r, p, xs)?;
    if !(c1 > 0.0) {
        return Err(Error::config("hypotheses.c1", "c1 must be positive"));
    }
    let s = scan(t_grid, xs, |_| true, |x, t| {
        spec.clarke_interval(x, t).magnitude() / (c1 * t.abs().powf(r.eval_at(x) - 1.0))
    });
    Ok(report(Hypothesis::Growth, 1.0, 1e-12, s))
}

fn tail_grid(t_max: f64) -> Result<Vec<f64>> {
    if !(t_max > 1.0) || !t_max.is_finite() {
        return Err(Error::config("hypotheses.t_max", format!("T_max must exceed 1, got {t_max}")));
    }
    Ok(geometric_grid(1.0, t_max, TAIL_POINTS))
}

/// `max_{v ∈ ∂j} (v t - j(x,t)) / |t|^{r(x)}` judged on the upper half of
/// a geometric grid up to `t_max`.
pub fn check_asymptotic(spec: &PotentialSpec, c: f64, r: &Expr, t_max: f64, xs: &[Point]) -> Result<CheckReport> {
    positive("hypotheses.c", c)?;
    let grid = tail_grid(t_max)?;
    let half = grid.len() / 2;
    let s = scan(&grid, xs, |i| i >= half, |x, t| {
        let iv = spec.clarke_interval(x, t);
        let vt = (iv.lower * t).max(iv.upper * t);
        (vt - spec.eval(x, t)) / t.abs().powf(r.eval_at(x))
    });
    Ok(report(Hypothesis::Asymptotic, -c, ratio_slack(c), s))
}

/// `j(x,t) / |t|^{h(x)}` on `|t| ∈ [1e-8, 1e-1]`, judged on the half of the
/// grid nearest zero.
pub fn check_near_zero(
    spec: &PotentialSpec,
    nu: f64,
    h: &Expr,
    p: &ExponentSummary,
    xs: &[Point],
) -> Result<CheckReport> {
    positive("hypotheses.nu", nu)?;
    let (h_minus, h_plus) = range_on(h, xs);
    if !(h_minus > 1.0 && h_plus < p.p_minus) {
        return Err(Error::config(
            "potential.h",
            format!("ordering requires 1 < h(x) <= h⁺ < p⁻, got h in [{h_minus}, {h_plus}], p⁻ = {}", p.p_minus),
        ));
    }
    let grid = geometric_grid(1e-8, 1e-1, NEAR_ZERO_POINTS);
    let half = grid.len() / 2;
    let s = scan(&grid, xs, |i| i <= half, |x, t| spec.eval(x, t) / t.abs().powf(h.eval_at(x)));
    Ok(report(Hypothesis::NearZero, -nu, ratio_slack(nu), s))
}

/// `j(x,t) / |t|^{r(x)}` judged on the upper half of the tail grid.
pub fn check_tail(spec: &PotentialSpec, mu: f64, r: &Expr, t_max: f64, xs: &[Point]) -> Result<CheckReport> {
    positive("hypotheses.mu", mu)?;
    let grid = tail_grid(t_max)?;
    let half = grid.len() / 2;
    let s = scan(&grid, xs, |i| i >= half, |x, t| spec.eval(x, t) / t.abs().powf(r.eval_at(x)));
    Ok(report(Hypothesis::Tail, -mu, ratio_slack(mu), s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{Critical, ExponentField};
    use crate::mesh::Mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn p3() -> ExponentSummary {
        let m = Mesh::unit_interval(4);
        ExponentField::constant(&m, 3.0).validate()
    }

    fn xs() -> Vec<Point> {
        Mesh::unit_interval(4).coords().to_vec()
    }

    fn j1() -> PotentialSpec {
        builtin_j1(1.0, &e("2"), 4.0, &p3(), &xs()).unwrap()
    }

    #[test]
    fn j1_values() {
        let j = j1();
        let x = [0.3, 0.0];
        assert_eq!(j.eval(x, 0.0), 0.0);
        assert!((j.eval(x, 0.5) + 0.25).abs() < 1e-15);
        assert!((j.eval(x, 1.0) + 1.0).abs() < 1e-15);
        assert!((j.eval(x, 1.0 + 1e-12) + 1.0).abs() < 1e-10);
        assert!((j.eval(x, -2.0) - (-16.0)).abs() < 1e-12);
    }

    #[test]
    fn j1_clarke_intervals() {
        let j = j1();
        let x = [0.5, 0.0];
        assert_eq!(j.clarke_interval(x, 0.5), ClarkeInterval::point(-1.0));
        let b = j.clarke_interval(x, 1.0);
        assert!((b.lower + 4.0).abs() < 1e-14 && (b.upper + 2.0).abs() < 1e-14);
        assert!((j.generalized_dd(x, 1.0, 1.0) + 2.0).abs() < 1e-14);
        assert!((j.generalized_dd(x, 1.0, -1.0) - 4.0).abs() < 1e-14);
        let m = j.clarke_interval(x, -1.0);
        assert!((m.lower - 2.0).abs() < 1e-14 && (m.upper - 4.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_quadratic_interval_is_a_point() {
        let j = PotentialSpec::smooth("quad", e("t^2/2"));
        for t in [-3.0, 0.0, 0.7] {
            let c = j.clarke_interval([0.0, 0.0], t);
            assert!((c.lower - t).abs() < 1e-15 && (c.upper - t).abs() < 1e-15);
        }
    }

    #[test]
    fn j1_ordering_is_enforced() {
        let p = p3();
        let x = xs();
        assert!(builtin_j1(1.0, &e("3"), 4.0, &p, &x).is_err());
        assert!(builtin_j1(1.0, &e("2"), 3.0, &p, &x).is_err());
        assert!(builtin_j1(1.0, &e("1"), 4.0, &p, &x).is_err());
        assert!(builtin_j1(-1.0, &e("2"), 4.0, &p, &x).is_err());
        // p̂* = 6 when N = 2, p⁻ = 1.5
        let q = ExponentSummary {
            p_minus: 1.5,
            p_plus: 1.5,
            p_hat_star: Critical::Finite(6.0),
            valid: true,
            violations: vec![],
        };
        assert!(builtin_j1(1.0, &e("1.2"), 6.5, &q, &x).is_err());
        assert!(builtin_j1(1.0, &e("1.2"), 5.5, &q, &x).is_ok());
    }

    #[test]
    fn construction_errors() {
        assert!(PotentialSpec::piecewise("a", vec![1.0], vec![e("t")]).is_err());
        assert!(PotentialSpec::piecewise("a", vec![1.0, 0.0], vec![e("t"), e("t"), e("t")]).is_err());
        let nonzero = PotentialSpec::smooth("a", e("1 + t"));
        assert!(nonzero.validate_on(&xs()).is_err());
        let jump = PotentialSpec::piecewise("a", vec![1.0], vec![e("t"), e("2*t")]).unwrap();
        assert!(jump.validate_on(&xs()).is_err());
    }

    #[test]
    fn slopes_match_central_differences() {
        let j = PotentialSpec::smooth("s", e("-(2 + x)*abs(t)^(2.5 + x) + sin(t)*x"));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let x = [rng.gen_range(0.0..1.0), 0.0];
            let t: f64 = rng.gen_range(-3.0..3.0);
            if t.abs() < 1e-3 {
                continue;
            }
            let h = 1e-6;
            let fd = (j.eval(x, t + h) - j.eval(x, t - h)) / (2.0 * h);
            let c = j.clarke_interval(x, t);
            assert!((c.lower - fd).abs() <= 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn generalized_dd_matches_sampled_limsup() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (nu, h, r) in [(1.0, 2.0, 4.0), (0.5, 1.5, 5.0), (2.0, 2.5, 3.5)] {
            let p = ExponentSummary {
                p_minus: h + 0.1,
                p_plus: r - 0.1,
                p_hat_star: Critical::Infinite,
                valid: true,
                violations: vec![],
            };
            let j = builtin_j1(nu, &Expr::constant(h), r, &p, &xs()).unwrap();
            for b in [-1.0, 1.0] {
                for dir in [1.0, -1.0] {
                    let exact = j.generalized_dd([0.5, 0.0], b, dir);
                    // limsup over y → b, λ ↘ 0 of (j(y + λ dir) - j(y)) / λ
                    let mut best = f64::NEG_INFINITY;
                    for decade in 0..6 {
                        let lam = 10f64.powi(-(3 + decade));
                        for _ in 0..50 {
                            let y = b + rng.gen_range(-lam..lam);
                            let q = (j.eval([0.5, 0.0], y + lam * dir) - j.eval([0.5, 0.0], y)) / lam;
                            best = best.max(q);
                        }
                    }
                    assert!((best - exact).abs() <= 0.05 * exact.abs(), "{best} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn lebourg_bound_and_continuity() {
        let j = j1();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let x = [rng.gen_range(0.0..1.0), 0.0];
            let t: f64 = rng.gen_range(-3.0..3.0);
            let seg_max = (0..=200)
                .map(|k| j.clarke_interval(x, t * k as f64 / 200.0).magnitude())
                .fold(0.0, f64::max);
            assert!(j.eval(x, t).abs() <= seg_max * t.abs() * (1.0 + 1e-12));
        }
        for &b in j.breakpoints() {
            let x = [0.2, 0.0];
            let l = j.formulas()[j.piece(b)].eval(Vars::at(x, b));
            let r = j.formulas()[j.piece(b) + 1].eval(Vars::at(x, b));
            assert!((l - r).abs() <= 1e-10);
        }
    }

    #[test]
    fn accurate_difference() {
        let j = j1();
        let x = [0.4, 0.0];
        for (t, dt) in [(0.5, 1e-9), (0.999_999_999_9, 2e-10), (3.0, -1e-8), (0.2, 0.5)] {
            let d = j.difference(x, t, dt);
            let direct = j.eval(x, t + dt) - j.eval(x, t);
            assert!((d - direct).abs() <= 1e-14 * j.eval(x, t).abs().max(1.0), "{d} vs {direct}");
        }
        let d = j.difference(x, 0.5, 1e-14);
        assert!((d / 1e-14 + 1.0).abs() < 1e-9);
    }

    #[test]
    fn growth_check_reports() {
        let p = p3();
        let grid = default_growth_grid();
        let r = j1();
        // j1 slope behaves like |t|^{h-1} near zero: the literal bound fails there
        let rep = check_growth(&r, 4.0, &e("4"), &p, &grid, &xs()).unwrap();
        assert!(!rep.passed);
        assert!(rep.worst_t.abs() < 1e-3);
        let z = check_growth(&PotentialSpec::zero(), 0.1, &e("4"), &p, &grid, &xs()).unwrap();
        assert!(z.passed);
        let bad = check_growth(&r, 4.0, &e("2.5"), &p, &grid, &xs());
        assert!(matches!(bad, Err(Error::Config { .. })));
    }

    #[test]
    fn growth_check_is_monotone_in_c1() {
        let p = p3();
        let grid = default_growth_grid();
        let j = PotentialSpec::smooth("q", e("-abs(t)^4"));
        let mut was_passing = false;
        for c1 in [0.5, 1.0, 2.0, 3.9, 4.0, 8.0, 100.0] {
            let rep = check_growth(&j, c1, &e("4"), &p, &grid, &xs()).unwrap();
            assert!(rep.passed || !was_passing);
            was_passing = rep.passed;
        }
        assert!(was_passing);
    }

    #[test]
    fn asymptotic_check() {
        let j = j1();
        let pass = check_asymptotic(&j, 4.0 - 1.0 - 0.1, &e("4"), 1e4, &xs()).unwrap();
        assert!(pass.passed, "{pass:?}");
        assert!((pass.statistic + 3.0).abs() < 1e-6);
        let zero = check_asymptotic(&PotentialSpec::zero(), 1e-3 + 1e-9, &e("4"), 1e4, &xs()).unwrap();
        assert!(!zero.passed);
        let quartic = PotentialSpec::smooth("q", e("-abs(t)^4"));
        assert!(check_asymptotic(&quartic, 3.0, &e("4"), 1e4, &xs()).unwrap().passed);
        assert!(!check_asymptotic(&quartic, 3.1, &e("4"), 1e4, &xs()).unwrap().passed);
    }

    #[test]
    fn near_zero_check() {
        let p = p3();
        let rep = check_near_zero(&j1(), 1.0, &e("2"), &p, &xs()).unwrap();
        assert!(rep.passed);
        assert!((rep.min_ratio + 1.0).abs() <= 1e-12 && (rep.max_ratio + 1.0).abs() <= 1e-12);
        let up = PotentialSpec::smooth("up", e("t^2"));
        assert!(!check_near_zero(&up, 1.0, &e("2"), &p, &xs()).unwrap().passed);
        let down = PotentialSpec::smooth("down", e("-2*abs(t)^2"));
        assert!(check_near_zero(&down, 2.0, &e("2"), &p, &xs()).unwrap().passed);
        assert!(check_near_zero(&down, 1.0, &e("3.5"), &p, &xs()).is_err());
    }

    #[test]
    fn tail_check() {
        let j = PotentialSpec::smooth("t5", e("-5*abs(t)^5"));
        assert!(check_tail(&j, 4.9, &e("5"), 1e4, &xs()).unwrap().passed);
        assert!(!check_tail(&j, 5.1, &e("5"), 1e4, &xs()).unwrap().passed);
        assert!(!check_tail(&PotentialSpec::zero(), 0.01, &e("5"), 1e4, &xs()).unwrap().passed);
        let r = check_tail(&j1(), 1.0, &e("4"), 1e4, &xs()).unwrap();
        assert!(r.passed && (r.statistic + 1.0).abs() < 1e-6);
    }
}
