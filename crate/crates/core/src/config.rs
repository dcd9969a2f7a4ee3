//! TOML problem configuration: parsing with key paths and line numbers,
//! validation of every exponent ordering, and assembly of a runnable setup.
//!
//! ```toml
//! seed = 7
//! lambda = 0.0
//!
//! [domain]
//! extents = [[0.0, 1.0]]
//! resolution = [64]
//!
//! [exponent]
//! p = "2 + x"
//!
//! [potential]
//! kind = "j1"
//! nu = 1.0
//! h = 2.0
//! r_plus = 5.0
//!
//! [solver]
//! route = "mp"
//! tol = 1e-6
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{ExponentSummary, FieldSpec};
use crate::expr::{Expr, Var};
use crate::functional::Problem;
use crate::mesh::{Mesh, Point};
use crate::potential::{
    builtin_j1, check_asymptotic, check_growth, check_near_zero, check_tail, default_growth_grid, CheckReport,
    PotentialMeta, PotentialSpec,
};
use crate::solver::{global_minimize, lambda_range_warning, mountain_pass, Route, SolveResult, SolverOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub seed: u64,
    pub lambda: f64,
    pub domain: DomainConfig,
    pub exponent: ExponentConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub hypotheses: HypothesesConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// One `[lo, hi]` pair per axis; one or two axes.
    pub extents: Vec<(f64, f64)>,
    pub resolution: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentConfig {
    pub p: FieldSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialConfig {
    J1 { nu: f64, h: FieldSpec, r_plus: f64 },
    Zero,
    Expression { formula: Expr },
    Piecewise { breakpoints: Vec<f64>, formulas: Vec<Expr> },
}

/// Declared hypothesis parameters. Any subset may be given; each checker
/// runs when its parameters are present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesesConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<FieldSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<FieldSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Upper end of the tail grids.
    pub t_max: f64,
}

impl Default for HypothesesConfig {
    fn default() -> Self {
        HypothesesConfig {
            r: None,
            h: None,
            c1: None,
            c: None,
            nu: None,
            mu: None,
            t_max: 1e6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RouteName {
    Mp,
    Min,
}

impl From<RouteName> for Route {
    fn from(r: RouteName) -> Route {
        match r {
            RouteName::Mp => Route::MountainPass,
            RouteName::Min => Route::GlobalMin,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_route")]
    pub route: RouteName,
    #[serde(flatten)]
    pub options: SolverOptions,
}

fn default_route() -> RouteName {
    RouteName::Mp
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            route: RouteName::Mp,
            options: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub history: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            history: false,
        }
    }
}

/// 1-based line of `key_path` (`section.key`) in `text`, or of its section
/// header when the key is absent.
pub fn locate(text: &str, key_path: &str) -> Option<usize> {
    let (section, key) = key_path.rsplit_once('.').unwrap_or(("", key_path));
    let mut current = String::new();
    let mut header = (section.is_empty()).then_some(1);
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = l.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

fn with_line(err: Error, text: &str) -> Error {
    match err {
        Error::Config { key, message } => {
            let message = match locate(text, &key) {
                Some(line) => format!("{message} (line {line})"),
                None => message,
            };
            Error::Config { key, message }
        }
        other => other,
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ProblemConfig {
    /// Parses and fully validates a config; errors carry the key path and,
    /// where it can be found, the line.
    pub fn parse(text: &str) -> Result<ProblemConfig> {
        let de = toml::Deserializer::parse(text).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(1);
            Error::config("config", format!("{} (line {line})", e.message()))
        })?;
        let cfg: ProblemConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let line = inner
                .span()
                .map(|s| line_of_offset(text, s.start))
                .or_else(|| locate(text, &path))
                .unwrap_or(1);
            Error::config(path, format!("{} (line {line})", inner.message()))
        })?;
        cfg.setup().map_err(|e| with_line(e, text))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ProblemConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        ProblemConfig::parse(&text)
    }

    pub fn emit(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", format!("cannot serialize: {e}")))
    }

    pub fn mesh(&self) -> Result<Mesh> {
        let d = &self.domain;
        if d.extents.len() != d.resolution.len() {
            return Err(Error::config(
                "domain.resolution",
                format!("{} extents but {} resolutions", d.extents.len(), d.resolution.len()),
            ));
        }
        Mesh::build(d.extents.len(), &d.extents, &d.resolution)
    }

    /// Builds the problem and checks every declared ordering.
    pub fn setup(&self) -> Result<Setup> {
        let mesh = self.mesh()?;
        let p = self.exponent.p.field(&mesh).map_err(|e| rekey(e, "exponent.p"))?;
        let summary = p.validated().map_err(|e| rekey(e, "exponent.p"))?;
        if !self.lambda.is_finite() {
            return Err(Error::config("lambda", "λ must be finite"));
        }
        let xs = mesh.coords().to_vec();
        let mut spec = self.potential_spec(&summary, &xs)?;
        let meta = self.merged_meta(spec.meta().clone(), &summary, &xs)?;
        spec = spec.with_meta(meta);
        self.solver.options.validate()?;
        let route: Route = self.solver.route.into();
        let problem = Problem::new(mesh, p, self.lambda, spec)?;
        let mut warnings = Vec::new();
        if route == Route::MountainPass {
            warnings.extend(lambda_range_warning(&problem));
        }
        Ok(Setup {
            problem,
            summary,
            route,
            options: self.solver.options.clone(),
            seed: self.seed,
            t_max: self.hypotheses.t_max,
            warnings,
        })
    }

    fn potential_spec(&self, p: &ExponentSummary, xs: &[Point]) -> Result<PotentialSpec> {
        match &self.potential {
            PotentialConfig::J1 { nu, h, r_plus } => builtin_j1(*nu, &h.as_expr("potential.h")?, *r_plus, p, xs),
            PotentialConfig::Zero => Ok(PotentialSpec::zero()),
            PotentialConfig::Expression { formula } => {
                let spec = PotentialSpec::smooth("expression", formula.clone());
                spec.validate_on(xs).map_err(|e| rekey(e, "potential.formula"))?;
                Ok(spec)
            }
            PotentialConfig::Piecewise { breakpoints, formulas } => {
                let spec = PotentialSpec::piecewise("piecewise", breakpoints.clone(), formulas.clone())
                    .map_err(|e| rekey(e, "potential.formulas"))?;
                spec.validate_on(xs).map_err(|e| rekey(e, "potential.formulas"))?;
                Ok(spec)
            }
        }
    }

    /// Declared hypothesis parameters take precedence over those implied by
    /// a built-in potential.
    fn merged_meta(&self, mut meta: PotentialMeta, p: &ExponentSummary, xs: &[Point]) -> Result<PotentialMeta> {
        let hy = &self.hypotheses;
        if let Some(r) = &hy.r {
            meta.r = Some(r.as_expr("hypotheses.r")?);
        }
        if let Some(h) = &hy.h {
            meta.h = Some(h.as_expr("hypotheses.h")?);
        }
        for (v, slot) in [(hy.c1, &mut meta.c1), (hy.c, &mut meta.c), (hy.nu, &mut meta.nu), (hy.mu, &mut meta.mu)] {
            if v.is_some() {
                *slot = v;
            }
        }
        for (key, v) in [
            ("hypotheses.c1", meta.c1),
            ("hypotheses.c", meta.c),
            ("hypotheses.nu", meta.nu),
            ("hypotheses.mu", meta.mu),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(key, format!("must be positive, got {v}")));
                }
            }
        }
        if let (Some(c), Some(c1)) = (meta.c, meta.c1) {
            if !(c > 2.0 * c1) {
                return Err(Error::config("hypotheses.c", format!("requires c > 2 c1, got c = {c}, c1 = {c1}")));
            }
        }
        if let (Some(mu), Some(c1)) = (meta.mu, meta.c1) {
            if !(mu > 2.0 * c1) {
                return Err(Error::config("hypotheses.mu", format!("requires μ > 2 c1, got μ = {mu}, c1 = {c1}")));
            }
        }
        if let Some(r) = &meta.r {
            if r.depends_on(Var::T) {
                return Err(Error::config("hypotheses.r", "r must not depend on t"));
            }
            let (lo, hi) = range(r, xs);
            if !(p.p_plus < lo) {
                return Err(Error::config(
                    "hypotheses.r",
                    format!("ordering requires p⁺ < r⁻, got r⁻ = {lo}, p⁺ = {}", p.p_plus),
                ));
            }
            if !p.p_hat_star.exceeds(hi) {
                return Err(Error::config(
                    "hypotheses.r",
                    format!("ordering requires r⁺ < p̂*, got r⁺ = {hi}, p̂* = {:?}", p.p_hat_star),
                ));
            }
        }
        if let Some(h) = &meta.h {
            if h.depends_on(Var::T) {
                return Err(Error::config("hypotheses.h", "h must not depend on t"));
            }
            let (lo, hi) = range(h, xs);
            if !(lo > 1.0 && hi < p.p_minus) {
                return Err(Error::config(
                    "hypotheses.h",
                    format!("ordering requires 1 < h(x) <= h⁺ < p⁻, got h in [{lo}, {hi}], p⁻ = {}", p.p_minus),
                ));
            }
        }
        if !(hy.t_max > 1.0 && hy.t_max.is_finite()) {
            return Err(Error::config("hypotheses.t_max", format!("T_max must exceed 1, got {}", hy.t_max)));
        }
        Ok(meta)
    }
}

fn range(e: &Expr, xs: &[Point]) -> (f64, f64) {
    xs.iter()
        .map(|&x| e.eval_at(x))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

fn rekey(err: Error, key: &str) -> Error {
    match err {
        Error::Config { message, .. } => Error::config(key, message),
        other => other,
    }
}

/// A validated, runnable problem.
#[derive(Clone, Debug)]
pub struct Setup {
    pub problem: Problem,
    pub summary: ExponentSummary,
    pub route: Route,
    pub options: SolverOptions,
    pub seed: u64,
    pub t_max: f64,
    pub warnings: Vec<String>,
}

impl Setup {
    /// Runs every checker whose parameters are declared.
    pub fn hypothesis_reports(&self) -> Result<Vec<CheckReport>> {
        let spec = self.problem.potential();
        let meta = spec.meta();
        let xs = self.problem.mesh().coords();
        let mut out = Vec::new();
        if let (Some(c1), Some(r)) = (meta.c1, &meta.r) {
            out.push(check_growth(spec, c1, r, &self.summary, &default_growth_grid(), xs)?);
        }
        if let (Some(c), Some(r)) = (meta.c, &meta.r) {
            out.push(check_asymptotic(spec, c, r, self.t_max, xs)?);
        }
        if let (Some(nu), Some(h)) = (meta.nu, &meta.h) {
            out.push(check_near_zero(spec, nu, h, &self.summary, xs)?);
        }
        if let (Some(mu), Some(r)) = (meta.mu, &meta.r) {
            out.push(check_tail(spec, mu, r, self.t_max, xs)?);
        }
        Ok(out)
    }

    pub fn solve(&self) -> Result<SolveResult> {
        let stamps = self.hypothesis_reports()?;
        let mut res = match self.route {
            Route::MountainPass => mountain_pass(&self.problem, &self.options, self.seed)?,
            Route::GlobalMin => global_minimize(&self.problem, &self.options, self.seed)?,
        };
        for w in &self.warnings {
            if !res.flags.contains(w) {
                res.flags.push(w.clone());
            }
        }
        res.hypothesis_stamps = stamps;
        Ok(res)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
lambda = 0.0

[domain]
extents = [[0.0, 1.0]]
resolution = [16]

[exponent]
p = 3.0

[potential]
kind = "j1"
nu = 1.0
h = 2.0
r_plus = 5.0
"#;

    #[test]
    fn minimal_j1_config_parses() {
        let cfg = ProblemConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.solver.route, RouteName::Mp);
        assert_eq!(cfg.seed, 0);
        let s = cfg.setup().unwrap();
        assert!(s.warnings.is_empty());
        assert_eq!(s.problem.potential().meta().nu, Some(1.0));
    }

    #[test]
    fn two_dimensional_expression_exponent() {
        let text = MINIMAL
            .replace("[[0.0, 1.0]]", "[[0.0, 1.0], [0.0, 1.0]]")
            .replace("[16]", "[8, 8]")
            .replace("p = 3.0", "p = \"3 + 0.1*x*y\"")
            .replace("r_plus = 5.0", "r_plus = 5.5");
        let cfg = ProblemConfig::parse(&text).unwrap();
        assert_eq!(cfg.mesh().unwrap().dim(), 2);
    }

    #[test]
    fn round_trip_through_emit() {
        let mut cfg = ProblemConfig::parse(MINIMAL).unwrap();
        cfg.seed = 12345;
        cfg.lambda = 0.1 + 0.2;
        cfg.hypotheses.c = Some(3.9);
        cfg.solver.options.tol = 1e-7;
        cfg.output.history = true;
        let text = cfg.emit().unwrap();
        assert_eq!(ProblemConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn r_not_above_p_plus_names_the_ordering() {
        let text = MINIMAL.replace("r_plus = 5.0", "r_plus = 3.0");
        let Err(Error::Config { key, message }) = ProblemConfig::parse(&text) else {
            panic!("expected a config error");
        };
        assert_eq!(key, "potential.r_plus");
        assert!(message.contains("p⁺ < r⁻"), "{message}");
        assert!(message.contains("(line 15)"), "{message}");
    }

    #[test]
    fn h_not_below_p_minus_is_rejected() {
        let text = MINIMAL.replace("h = 2.0", "h = 3.0");
        let Err(Error::Config { key, message }) = ProblemConfig::parse(&text) else {
            panic!();
        };
        assert_eq!(key, "potential.h");
        assert!(message.contains("h⁺ < p⁻") && message.contains("(line 14)"), "{message}");
    }

    #[test]
    fn lambda_at_interval_end_warns() {
        let text = MINIMAL.replace("lambda = 0.0", "lambda = 3.0");
        let s = ProblemConfig::parse(&text).unwrap().setup().unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains("(-∞, ν p⁻)"));
        let text = format!("{text}\n[solver]\nroute = \"min\"\n");
        assert!(ProblemConfig::parse(&text).unwrap().setup().unwrap().warnings.is_empty());
    }

    #[test]
    fn missing_and_unknown_keys_carry_paths() {
        let text = MINIMAL.replace("nu = 1.0\n", "");
        let Err(Error::Config { key, message }) = ProblemConfig::parse(&text) else {
            panic!();
        };
        assert_eq!(key, "potential");
        assert!(message.contains("nu"), "{message}");
        let text = format!("{MINIMAL}\n[solver]\ntoll = 1e-6\n");
        let Err(Error::Config { key, message }) = ProblemConfig::parse(&text) else {
            panic!();
        };
        assert!(key.starts_with("solver") && message.contains("toll"), "{key}: {message}");
        let Err(Error::Config { message, .. }) = ProblemConfig::parse("lambda = = 1") else {
            panic!();
        };
        assert!(message.contains("line 1"));
    }

    #[test]
    fn declared_constants_are_ordered() {
        let text = format!("{MINIMAL}\n[hypotheses]\nc1 = 2.0\nc = 3.0\n");
        let Err(Error::Config { key, .. }) = ProblemConfig::parse(&text) else {
            panic!();
        };
        assert_eq!(key, "hypotheses.c");
        let text = format!("{MINIMAL}\n[hypotheses]\nc1 = 2.0\nmu = 3.9\n");
        assert!(ProblemConfig::parse(&text).is_err());
        let text = format!("{MINIMAL}\n[hypotheses]\nr = 2.5\n");
        let Err(Error::Config { key, message }) = ProblemConfig::parse(&text) else {
            panic!();
        };
        assert_eq!(key, "hypotheses.r");
        assert!(message.contains("p⁺ < r⁻"));
    }

    #[test]
    fn stamps_follow_declared_parameters() {
        let text = format!("{MINIMAL}\n[hypotheses]\nc = 3.9\n");
        let s = ProblemConfig::parse(&text).unwrap().setup().unwrap();
        let reports = s.hypothesis_reports().unwrap();
        // c with r from j1, and ν, h from j1
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.passed));
    }

    #[test]
    fn piecewise_potential_config() {
        let text = MINIMAL.replace(
            "kind = \"j1\"\nnu = 1.0\nh = 2.0\nr_plus = 5.0",
            "kind = \"piecewise\"\nbreakpoints = [0.0]\nformulas = [\"0\", \"t^4/4\"]",
        );
        let s = ProblemConfig::parse(&text).unwrap().setup().unwrap();
        assert_eq!(s.problem.potential().breakpoints(), &[0.0]);
        let bad = text.replace("\"t^4/4\"", "\"t^4/4 + 1\"");
        assert!(ProblemConfig::parse(&bad).is_err());
    }

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("../../../docs/config.md");
        let start = doc.find("```toml").unwrap() + "```toml".len();
        let end = start + doc[start..].find("```").unwrap();
        let cfg = ProblemConfig::parse(&doc[start..end]).unwrap();
        assert_eq!(cfg.solver.options, SolverOptions::default());
        assert_eq!(cfg.seed, 7);
    }
}
