//! Named verification suites: configuration, per-case records and reports.

mod run;

use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Error, Result};
use crate::seqnorm::EstimatorConfig;
use crate::spaces::Exponent;

pub use run::run_suite;

pub const SUITES: [&str; 10] = [
    "seqnorm-axioms",
    "linear-stability",
    "weak1-stability",
    "rad-stability",
    "cohen-stability",
    "growth",
    "decoupling",
    "holder-identity",
    "ideal-axioms",
    "limit-stability",
];

pub fn list_suites() -> &'static [&'static str] {
    &SUITES
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Comparisons between exactly computed quantities.
    pub exact: f64,
    /// Comparisons involving at least one estimated bracket.
    pub estimated: f64,
    /// Residual of the decoupling identity.
    pub decoupling: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { exact: 1e-9, estimated: 1e-6, decoupling: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: String,
    pub seed: u64,
    /// Dimensions random spaces are drawn from.
    pub dims: Vec<usize>,
    /// Operator arities.
    pub arities: Vec<usize>,
    /// Exponents `q` of random `ℓ_q` spaces.
    pub exponents: Vec<Exponent>,
    /// Parameters `p` of the strong, weak and Cohen classes.
    pub class_exponents: Vec<f64>,
    pub trials: usize,
    pub k_max: usize,
    /// Random candidates per length in k-sweep searches.
    pub restarts: usize,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    pub estimator: EstimatorConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            suite: String::new(),
            seed: 0,
            dims: vec![1, 2, 3, 4],
            arities: vec![2],
            exponents: crate::idealnorm::default_exponents(),
            class_exponents: vec![1.0, 4.0 / 3.0, 1.5, 2.0, 3.0],
            trials: 100,
            k_max: 6,
            restarts: 3,
            tolerances: Tolerances::default(),
            output_path: None,
            estimator: EstimatorConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Defaults of a named suite.
    pub fn for_suite(name: &str) -> Result<ExperimentConfig> {
        let base = ExperimentConfig { suite: name.to_string(), ..Default::default() };
        let cfg = match name {
            "seqnorm-axioms" => ExperimentConfig { trials: 200, k_max: 8, arities: vec![1], ..base },
            "linear-stability" => ExperimentConfig { trials: 100, arities: vec![1], ..base },
            "weak1-stability" => ExperimentConfig { trials: 500, k_max: 8, arities: vec![2, 3], ..base },
            "rad-stability" => ExperimentConfig { trials: 200, ..base },
            "cohen-stability" => {
                ExperimentConfig { trials: 100, k_max: 4, dims: vec![1, 2, 3], class_exponents: vec![2.0, 1.5], ..base }
            }
            "growth" => ExperimentConfig { trials: 1, k_max: 16, class_exponents: vec![2.0], ..base },
            "decoupling" => ExperimentConfig { trials: 500, arities: vec![2, 3], ..base },
            "holder-identity" => {
                ExperimentConfig { trials: 100, k_max: 4, arities: vec![2, 3], dims: vec![1, 2, 3], ..base }
            }
            "ideal-axioms" => ExperimentConfig { trials: 200, k_max: 4, dims: vec![1, 2, 3], ..base },
            "limit-stability" => ExperimentConfig {
                trials: 50,
                k_max: 3,
                restarts: 2,
                dims: vec![1, 2, 3],
                class_exponents: vec![2.0],
                ..base
            },
            other => return Err(Error::Parse(format!("unknown suite `{other}`; known: {}", SUITES.join(", ")))),
        };
        Ok(cfg)
    }

    /// Reads a JSON config; fields it leaves out take the suite's defaults.
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let user: Value = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        let Value::Object(fields) = user else {
            return Err(Error::Parse("config must be a JSON object".into()));
        };
        let name = fields
            .get("suite")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Parse("config needs a string field `suite`".into()))?;
        let mut merged = serde_json::to_value(ExperimentConfig::for_suite(name)?).expect("serializable");
        let target = merged.as_object_mut().expect("object");
        for (k, v) in fields {
            if k == "tolerances" || k == "estimator" {
                if let (Some(Value::Object(base)), Value::Object(over)) = (target.get_mut(&k), &v) {
                    for (kk, vv) in over {
                        base.insert(kk.clone(), vv.clone());
                    }
                    continue;
                }
            }
            target.insert(k, v);
        }
        let cfg: ExperimentConfig = serde_json::from_value(merged).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !SUITES.contains(&self.suite.as_str()) {
            return Err(Error::Parse(format!("unknown suite `{}`", self.suite)));
        }
        let counts = [("trials", self.trials), ("k_max", self.k_max), ("restarts", self.restarts)];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(invalid(format!("`{name}` must be at least 1")));
        }
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(invalid("`dims` must be a non-empty list of positive dimensions"));
        }
        if self.arities.is_empty() || self.arities.contains(&0) {
            return Err(invalid("`arities` must be a non-empty list of positive arities"));
        }
        if self.exponents.is_empty() {
            return Err(invalid("`exponents` must not be empty"));
        }
        if self.class_exponents.is_empty() || self.class_exponents.iter().any(|p| !(*p >= 1.0) || !p.is_finite()) {
            return Err(invalid("`class_exponents` must be a non-empty list of finite values ≥ 1"));
        }
        let t = &self.tolerances;
        if [t.exact, t.estimated, t.decoupling].iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("tolerances must be non-negative"));
        }
        Ok(())
    }
}

/// How a case compares `lhs` with `rhs`. The slack is `tol · max(1, |rhs|)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        let slack = tol * rhs.abs().max(1.0);
        match self {
            Relation::Le => lhs <= rhs + slack,
            Relation::Ge => lhs >= rhs - slack,
            Relation::Eq => (lhs - rhs).abs() <= slack,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "==",
        }
    }
}

/// One checked inequality or identity, with the data needed to recheck it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub name: String,
    pub trial: usize,
    pub relation: Relation,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub detail: Value,
}

impl CaseRecord {
    pub fn check(
        name: impl Into<String>,
        trial: usize,
        relation: Relation,
        lhs: f64,
        rhs: f64,
        tol: f64,
        detail: Value,
    ) -> Self {
        let pass = relation.holds(lhs, rhs, tol);
        CaseRecord { name: name.into(), trial, relation, lhs, rhs, tol, pass, error: None, detail }
    }

    pub fn failed(name: impl Into<String>, trial: usize, err: &Error) -> Self {
        CaseRecord {
            name: name.into(),
            trial,
            relation: Relation::Eq,
            lhs: f64::NAN,
            rhs: f64::NAN,
            tol: 0.0,
            pass: false,
            error: Some(err.to_string()),
            detail: Value::Null,
        }
    }
}

/// A `(k, ratio)` curve exported as CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub label: String,
    pub points: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub violations: usize,
    /// Largest `lhs / rhs` over `≤` cases with positive `rhs`.
    pub max_ratio: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub summary: Summary,
    pub cases: Vec<CaseRecord>,
    pub curves: Vec<Curve>,
}

impl SuiteReport {
    pub(crate) fn new(config: &ExperimentConfig, cases: Vec<CaseRecord>, curves: Vec<Curve>, wall_time_s: f64) -> Self {
        let violations = cases.iter().filter(|c| !c.pass).count();
        let max_ratio = cases
            .iter()
            .filter(|c| c.relation == Relation::Le && c.rhs > 0.0 && c.lhs.is_finite())
            .map(|c| c.lhs / c.rhs)
            .fold(0.0, f64::max);
        SuiteReport {
            suite: config.suite.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            summary: Summary { cases: cases.len(), violations, max_ratio, wall_time_s },
            cases,
            curves,
        }
    }

    pub fn passed(&self) -> bool {
        self.summary.violations == 0
    }

    /// Recomputes every verdict from the recorded numbers.
    pub fn verdicts_consistent(&self) -> bool {
        self.cases.iter().all(|c| c.pass == (c.error.is_none() && c.relation.holds(c.lhs, c.rhs, c.tol)))
    }

    /// Aligned table: one row per case name with counts and the worst margin.
    pub fn text_table(&self) -> String {
        let mut groups: Vec<(String, usize, usize, f64, Relation)> = Vec::new();
        for c in &self.cases {
            let margin = margin(c);
            match groups.iter_mut().find(|g| g.0 == c.name) {
                Some(g) => {
                    g.1 += 1;
                    g.2 += usize::from(!c.pass);
                    g.3 = g.3.max(margin);
                }
                None => groups.push((c.name.clone(), 1, usize::from(!c.pass), margin, c.relation)),
            }
        }
        let width = groups.iter().map(|g| g.0.len()).max().unwrap_or(4).max(4);
        let mut out = String::new();
        let _ = writeln!(out, "suite {}  seed {}  cases {}", self.suite, self.config.seed, self.summary.cases);
        let _ = writeln!(out, "{:<width$}  {:>3}  {:>6}  {:>6}  {:>12}", "case", "rel", "count", "fail", "worst");
        for (name, count, fails, worst, rel) in &groups {
            let _ =
                writeln!(out, "{:<width$}  {:>3}  {:>6}  {:>6}  {:>12.3e}", name, rel.symbol(), count, fails, worst);
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            out,
            "{verdict}: {} violation(s), max lhs/rhs {:.9}, {:.2} s",
            self.summary.violations, self.summary.max_ratio, self.summary.wall_time_s
        );
        out
    }

    /// `label,k,ratio` rows for every curve.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("label,k,ratio\n");
        for c in &self.curves {
            for (k, r) in &c.points {
                let _ = writeln!(out, "{},{},{}", c.label, k, r);
            }
        }
        out
    }

    /// JSON with the wall time zeroed, for byte comparisons between runs.
    pub fn canonical_json(&self) -> String {
        let mut copy = self.clone();
        copy.summary.wall_time_s = 0.0;
        serde_json::to_string_pretty(&copy).expect("serializable")
    }
}

/// How far a case is from failing, in units of `max(1, |rhs|)`; positive
/// values mean the relation is violated before tolerance.
fn margin(c: &CaseRecord) -> f64 {
    if c.error.is_some() {
        return f64::INFINITY;
    }
    let scale = c.rhs.abs().max(1.0);
    match c.relation {
        Relation::Le => (c.lhs - c.rhs) / scale,
        Relation::Ge => (c.rhs - c.lhs) / scale,
        Relation::Eq => (c.lhs - c.rhs).abs() / scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_has_defaults() {
        for name in SUITES {
            let cfg = ExperimentConfig::for_suite(name).unwrap();
            cfg.validate().unwrap();
        }
        assert!(ExperimentConfig::for_suite("nope").is_err());
    }

    #[test]
    fn partial_config_merges_with_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"suite":"decoupling","trials":7,"tolerances":{"decoupling":1e-9}}"#)
            .unwrap();
        assert_eq!(cfg.trials, 7);
        assert_eq!(cfg.arities, vec![2, 3]);
        assert_eq!(cfg.tolerances.decoupling, 1e-9);
        assert_eq!(cfg.tolerances.exact, 1e-9);
        assert!(ExperimentConfig::from_json(r#"{"suite":"decoupling","trials":0}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"suite":"decoupling","bogus":1}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"trials":3}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"suite":"growth","exponents":[0.5]}"#).is_err());
    }

    #[test]
    fn relation_slack() {
        assert!(Relation::Le.holds(1.0 + 5e-7, 1.0, 1e-6));
        assert!(!Relation::Le.holds(1.0 + 5e-6, 1.0, 1e-6));
        assert!(Relation::Eq.holds(100.0 + 5e-5, 100.0, 1e-6));
        assert!(Relation::Ge.holds(0.9, 1.0, 0.1));
    }
}
