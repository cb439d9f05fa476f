use std::fmt;
use std::path::{Path, PathBuf};

use brenier_lab::measures::{Family, Potential};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Contraction,
    Rigidity,
    StabilityCurve,
    Poincare,
    Certificate,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Scenario::Contraction => "contraction",
            Scenario::Rigidity => "rigidity",
            Scenario::StabilityCurve => "stability-curve",
            Scenario::Poincare => "poincare",
            Scenario::Certificate => "certificate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind {
    Exact,
    Entropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub map: MapKind,
    /// Entropic regularization.
    pub reg: f64,
    /// Entropic grid nodes per axis.
    pub grid_nodes: Option<usize>,
    /// Gauss–Hermite nodes per axis of the eigenvalue profile.
    pub quadrature_order: Option<usize>,
    /// Hermite degree of the Galerkin basis.
    pub degree: usize,
    /// Gaussian factor count; detected when absent.
    pub k: Option<usize>,
    /// Contraction defect tolerance; the map tolerance when absent.
    pub tolerance: Option<f64>,
    pub detect_tol: Option<f64>,
    /// Largest accepted split gap.
    pub gap_tol: f64,
    pub c_cert: f64,
    pub max_epsilon: f64,
    /// Also solve at `reg / 2` and require the defect not to grow.
    pub reg_halving: bool,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            map: MapKind::Exact,
            reg: 5e-3,
            grid_nodes: None,
            quadrature_order: None,
            degree: 8,
            k: None,
            tolerance: None,
            detect_tol: None,
            gap_tol: 5e-2,
            c_cert: 10.0,
            max_epsilon: 0.5,
            reg_halving: false,
        }
    }
}

/// A family member is the base measure with `field = base + t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub field: String,
    #[serde(default)]
    pub base: f64,
    pub values: Vec<f64>,
}

/// Optional invariants asserted on top of the scenario defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    pub expect_k: Option<usize>,
    /// Expected Poincaré constant.
    pub expect_gap: Option<f64>,
    pub gap_match_tol: Option<f64>,
    /// Expected constant `gap / ε` along a curve.
    pub expect_ratio: Option<f64>,
    pub ratio_tol: Option<f64>,
    /// Upper bound on `gap / ε` along a curve.
    pub max_ratio: Option<f64>,
    /// Require the curve gap to be nondecreasing in `t`.
    pub monotone_gap: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub measure: Family,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub curve: Option<CurveSpec>,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub output: Output,
}

/// Why a configuration could not be loaded.
#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Invalid(Vec<String>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "{m}"),
            ConfigError::Invalid(d) => write!(f, "{}", d.join("\n")),
        }
    }
}

/// Sets `path = value` (dot separated) in `table`; the value is parsed as
/// TOML and falls back to a string.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), String> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("override '{spec}' is not of the form key=value"))?;
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(format!("override '{spec}' has an empty key"));
    }
    let mut node = table;
    for key in &keys[..keys.len() - 1] {
        let entry = node
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| format!("override '{spec}': '{key}' is not a table"))?;
    }
    node.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// Keys of `given` that do not survive a round trip through the typed
/// value, reported with their dotted path.
fn unknown_keys(given: &Value, typed: &Value, path: &str, out: &mut Vec<String>) {
    match (given, typed) {
        (Value::Table(g), Value::Table(t)) => {
            for (k, v) in g {
                let child = format!("{path}.{k}");
                match t.get(k) {
                    Some(tv) => unknown_keys(v, tv, &child, out),
                    None => out.push(format!("unknown key '{child}'")),
                }
            }
        }
        (Value::Array(g), Value::Array(t)) => {
            for (i, (gv, tv)) in g.iter().zip(t).enumerate() {
                unknown_keys(gv, tv, &format!("{path}[{i}]"), out);
            }
        }
        _ => {}
    }
}

fn family_dimension(f: &Family) -> usize {
    match f {
        Family::GaussianScaled { dimension, .. }
        | Family::Quartic { dimension, .. }
        | Family::RidgePerturbation { dimension, .. } => *dimension,
        Family::GaussianShifted { shift } => shift.len(),
        Family::Product { factors } | Family::RotatedProduct { factors, .. } => factors.len(),
    }
}

impl ScenarioConfig {
    /// Parses TOML text, applies overrides and validates the schema.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| {
            ConfigError::Invalid(vec![e.to_string().trim().to_string()])
        })?;
        let mut diags = Vec::new();
        for o in overrides {
            if let Err(e) = apply_override(&mut table, o) {
                diags.push(e);
            }
        }
        if !diags.is_empty() {
            return Err(ConfigError::Invalid(diags));
        }
        // straight from the text when possible so schema errors keep positions
        let typed = if overrides.is_empty() {
            toml::from_str(text)
        } else {
            Value::Table(table.clone()).try_into()
        };
        let config: ScenarioConfig = typed.map_err(|e: toml::de::Error| {
            ConfigError::Invalid(vec![e.to_string().trim().to_string()])
        })?;
        if let (Some(given), Ok(typed)) = (table.get("measure"), Value::try_from(&config.measure)) {
            unknown_keys(given, &typed, "measure", &mut diags);
        }
        diags.extend(config.diagnostics());
        if diags.is_empty() {
            Ok(config)
        } else {
            Err(ConfigError::Invalid(diags))
        }
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn dimension(&self) -> usize {
        family_dimension(&self.measure)
    }

    /// Semantic checks beyond the schema; empty means valid.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n = self.dimension();
        if !(1..=4).contains(&n) {
            out.push("dimension out of range [1,4]".to_string());
        } else if let Err(e) = Potential::new(self.measure.clone()) {
            out.push(format!("measure: {e}"));
        }
        let nu = &self.numerics;
        let positive = [
            ("numerics.reg", Some(nu.reg)),
            ("numerics.tolerance", nu.tolerance),
            ("numerics.detect_tol", nu.detect_tol),
            ("numerics.gap_tol", Some(nu.gap_tol)),
            ("numerics.c_cert", Some(nu.c_cert)),
            ("numerics.max_epsilon", Some(nu.max_epsilon)),
            ("checks.gap_match_tol", self.checks.gap_match_tol),
            ("checks.ratio_tol", self.checks.ratio_tol),
            ("checks.max_ratio", self.checks.max_ratio),
        ];
        for (name, v) in positive {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    out.push(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if nu.degree == 0 {
            out.push("numerics.degree must be at least 1".to_string());
        }
        if let Some(k) = nu.k {
            if k == 0 || k > n {
                out.push(format!("numerics.k must lie in 1..={n}, got {k}"));
            }
        }
        match (&self.curve, self.scenario) {
            (None, Scenario::StabilityCurve) => {
                out.push("stability-curve needs a [curve] table".to_string())
            }
            (Some(c), _) => {
                if c.values.is_empty() {
                    out.push("curve.values must not be empty".to_string());
                }
                if c.values.iter().any(|v| !v.is_finite()) {
                    out.push("curve.values must be finite".to_string());
                }
                if let Err(e) = self.member(c.values.first().copied().unwrap_or(0.0)) {
                    out.push(format!("curve.field: {e}"));
                }
            }
            _ => {}
        }
        out
    }

    /// The curve member at parameter `t`.
    pub fn member(&self, t: f64) -> Result<Family, String> {
        let Some(c) = &self.curve else {
            return Ok(self.measure.clone());
        };
        let mut table = match Value::try_from(&self.measure) {
            Ok(Value::Table(t)) => t,
            _ => return Err("measure does not serialize to a table".into()),
        };
        match table.get(&c.field) {
            Some(Value::Float(_)) | Some(Value::Integer(_)) => {}
            _ => return Err(format!("'{}' is not a numeric measure field", c.field)),
        }
        table.insert(c.field.clone(), Value::Float(c.base + t));
        Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
scenario = "poincare"

[measure]
family = "quartic"
dimension = 1
a = 1.0
b = 0.0

[numerics]
degree = 10
"#;

    #[test]
    fn sample_is_valid() {
        let c = ScenarioConfig::parse(SAMPLE, &[]).unwrap();
        assert_eq!(c.scenario, Scenario::Poincare);
        assert_eq!(c.numerics.degree, 10);
        assert_eq!(c.numerics.reg, 5e-3);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = SAMPLE.replace("degree = 10", "degree = 10\nfoo = 1");
        assert!(matches!(
            ScenarioConfig::parse(&text, &[]),
            Err(ConfigError::Invalid(_))
        ));
        let text = SAMPLE.replace("b = 0.0", "b = 0.0\nc = 2.0");
        let Err(ConfigError::Invalid(d)) = ScenarioConfig::parse(&text, &[]) else {
            panic!("accepted an unknown measure key");
        };
        assert_eq!(d, vec!["unknown key 'measure.c'".to_string()]);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = ScenarioConfig::parse(
            SAMPLE,
            &["numerics.reg=1e-3".into(), "measure.a=0.5".into()],
        )
        .unwrap();
        assert_eq!(c.numerics.reg, 1e-3);
        assert_eq!(
            c.measure,
            Family::Quartic {
                dimension: 1,
                a: 0.5,
                b: 0.0
            }
        );
        assert!(ScenarioConfig::parse(SAMPLE, &["novalue".into()]).is_err());
    }

    #[test]
    fn dimension_and_sign_diagnostics() {
        let text = SAMPLE.replace("dimension = 1", "dimension = 7");
        let Err(ConfigError::Invalid(d)) = ScenarioConfig::parse(&text, &[]) else {
            panic!()
        };
        assert_eq!(d, vec!["dimension out of range [1,4]".to_string()]);
        let Err(ConfigError::Invalid(d)) =
            ScenarioConfig::parse(SAMPLE, &["numerics.reg=-1".into()])
        else {
            panic!()
        };
        assert_eq!(d.len(), 1);
        assert!(d[0].contains("numerics.reg"));
    }

    #[test]
    fn parse_errors_carry_positions() {
        let Err(ConfigError::Invalid(d)) = ScenarioConfig::parse("scenario = \n", &[]) else {
            panic!()
        };
        assert!(d[0].contains("line 1"), "{d:?}");
    }

    #[test]
    fn curve_members_substitute_the_field() {
        let text = r#"
scenario = "stability-curve"
[measure]
family = "gaussian-scaled"
dimension = 1
sigma = 1.0
[curve]
field = "sigma"
base = 1.0
values = [0.1]
"#;
        let c = ScenarioConfig::parse(text, &[]).unwrap();
        assert_eq!(
            c.member(0.1).unwrap(),
            Family::GaussianScaled {
                dimension: 1,
                sigma: 1.1
            }
        );
        assert!(
            ScenarioConfig::parse(&text.replace("\"sigma\"\nbase", "\"nope\"\nbase"), &[]).is_err()
        );
    }
}
