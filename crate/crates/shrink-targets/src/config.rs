//! TOML experiment configuration for the command-line runner.
//!
//! A config file names one map, an optional potential, an optional radius
//! schedule, one operation, and a `[params]` table of operation knobs.
//! Everything here fails before any heavy computation starts: every error
//! this module produces is a configuration mistake (exit code 2), never a
//! numerical failure.
//!
//! ```toml
//! [run]
//! operation = "dimension"
//! seed = 7
//!
//! [map]
//! builtin = "doubling"
//!
//! [radius]
//! kind = "power"
//! alpha = 2.0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::map::{BranchSpec, MapError, PartitionedMap};
use crate::target::radius::{RadiusError, RadiusSchedule};
use crate::thermo::{Potential, ThermoError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config error: {0}")]
    Invalid(String),
    #[error("config error: {0}")]
    Map(#[from] MapError),
    #[error("config error: {0}")]
    Radius(#[from] RadiusError),
    #[error("config error: {0}")]
    Thermo(#[from] ThermoError),
}

/// The operations the runner can dispatch. Kebab-case names match the
/// `operation` key in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operation {
    Density,
    Pressure,
    Correlations,
    ReturnTimes,
    Dimension,
    EnergyScan,
    BoxCount,
    S0,
    Intersect,
    Acceptance,
}

impl Operation {
    pub const ALL: [Operation; 10] = [
        Operation::Density,
        Operation::Pressure,
        Operation::Correlations,
        Operation::ReturnTimes,
        Operation::Dimension,
        Operation::EnergyScan,
        Operation::BoxCount,
        Operation::S0,
        Operation::Intersect,
        Operation::Acceptance,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Operation::Density => "density",
            Operation::Pressure => "pressure",
            Operation::Correlations => "correlations",
            Operation::ReturnTimes => "return-times",
            Operation::Dimension => "dimension",
            Operation::EnergyScan => "energy-scan",
            Operation::BoxCount => "box-count",
            Operation::S0 => "s0",
            Operation::Intersect => "intersect",
            Operation::Acceptance => "acceptance",
        }
    }

    pub fn parse(name: &str) -> Result<Operation, ConfigError> {
        Operation::ALL
            .iter()
            .copied()
            .find(|op| op.as_str() == name)
            .ok_or_else(|| {
                let known: Vec<&str> =
                    Operation::ALL.iter().map(|op| op.as_str()).collect();
                ConfigError::Invalid(format!(
                    "unknown operation {name:?}; expected one of {}",
                    known.join(", ")
                ))
            })
    }

    /// Operations that cannot run without a radius schedule.
    pub fn needs_radius(&self) -> bool {
        matches!(
            self,
            Operation::Dimension
                | Operation::EnergyScan
                | Operation::BoxCount
                | Operation::Intersect
        )
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Operation-specific knobs. Everything is optional; the runner fills in
/// defaults and records each one it applies in the run report. Unknown
/// keys are rejected at parse time so a typo cannot silently fall back
/// to a default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Ulam partition size (density, pressure, s0, correlations on a
    /// Gibbs measure).
    pub bins: Option<usize>,
    /// Depth cap for pressure refinement.
    pub n_max: Option<u64>,
    /// Largest correlation lag.
    pub max_lag: Option<u64>,
    /// Correlation estimator: "exact", "quadrature", or "monte_carlo".
    pub estimator: Option<String>,
    /// Monte Carlo sample count.
    pub samples: Option<u64>,
    /// Observable formulas for correlations.
    pub f: Option<String>,
    pub g: Option<String>,
    /// Return-time experiment length and per-excursion step cap.
    pub n_returns: Option<usize>,
    pub max_steps: Option<u64>,
    /// Draw a fresh start when an excursion exceeds the cap.
    pub restarts: Option<bool>,
    /// Orbit start: a decimal in (0,1), "hex:<mantissa>", or "random".
    pub x: Option<String>,
    /// Second orbit start for the intersection experiment.
    pub x2: Option<String>,
    /// Riesz exponents to scan.
    pub s_grid: Option<Vec<f64>>,
    /// Stage sizes for the energy scan.
    pub n_schedule: Option<Vec<u64>>,
    /// Stage window rule: "sqrt" or "fixed:<m>".
    pub m_rule: Option<String>,
    /// Ball-count cap for energy stages.
    pub max_balls: Option<usize>,
    /// Orbit length for box-counting stages.
    pub n_balls: Option<u64>,
    /// First dyadic level of the box-count fit window.
    pub k_start: Option<u64>,
    /// Explicit dyadic levels to count (overrides the default window).
    pub levels: Option<Vec<u32>>,
    /// Cylinder depths for the critical-exponent fit.
    pub m_schedule: Option<Vec<u64>>,
    /// Single Riesz exponent (ball-scaling checks).
    pub s: Option<f64>,
    /// Table length for checking a tabulated radius schedule.
    pub n_check: Option<u64>,
    /// Horizon cap for tabulated schedules.
    pub horizon_cap: Option<u64>,
    /// Reduced budgets for the acceptance suite.
    pub quick: Option<bool>,
}

/// A parsed, validated experiment: ready for the runner.
#[derive(Debug)]
pub struct ExperimentConfig {
    pub operation: Operation,
    pub seed: u64,
    pub precision_bits: u32,
    pub out_dir: Option<PathBuf>,
    pub map: PartitionedMap,
    pub map_label: String,
    pub potential: Option<Potential>,
    pub potential_label: Option<String>,
    pub radius: Option<RadiusSchedule>,
    pub radius_label: Option<String>,
    pub params: Params,
    /// Defaults applied during parsing, as "key = value" strings. The
    /// runner appends its own and echoes the full list in the report.
    pub defaults: Vec<String>,
}

pub const DEFAULT_PRECISION_BITS: u32 = 256;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    run: RawRun,
    map: RawMap,
    radius: Option<RawRadius>,
    potential: Option<RawPotential>,
    #[serde(default)]
    params: Params,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    operation: String,
    seed: Option<u64>,
    precision_bits: Option<u32>,
    out: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMap {
    builtin: Option<String>,
    branches: Option<Vec<RawBranch>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBranch {
    domain: [f64; 2],
    formula: String,
    derivative: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRadius {
    kind: String,
    alpha: Option<f64>,
    c: Option<f64>,
    rho: Option<f64>,
    values: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    kind: String,
    scale: Option<f64>,
    p: Option<f64>,
    weights: Option<Vec<f64>>,
    pieces: Option<Vec<RawPiece>>,
    offset: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiece {
    lo: f64,
    hi: f64,
    formula: String,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|err| {
            ConfigError::Invalid(format!(
                "cannot read {}: {err}",
                path.display()
            ))
        })?;
        ExperimentConfig::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let mut defaults = Vec::new();

        let operation = Operation::parse(&raw.run.operation)?;
        let seed = match raw.run.seed {
            Some(s) => s,
            None => {
                defaults.push("seed = 0".into());
                0
            }
        };
        let precision_bits = match raw.run.precision_bits {
            Some(b) => {
                if !(64..=16384).contains(&b) {
                    return Err(ConfigError::Invalid(format!(
                        "precision_bits must lie in 64..=16384, got {b}"
                    )));
                }
                b
            }
            None => {
                defaults.push(format!(
                    "precision_bits = {DEFAULT_PRECISION_BITS}"
                ));
                DEFAULT_PRECISION_BITS
            }
        };
        let out_dir = raw.run.out.map(PathBuf::from);

        let (map, map_label) = build_map(&raw.map)?;
        let radius = raw.radius.as_ref().map(build_radius).transpose()?;
        let radius_label =
            radius.as_ref().map(|schedule| schedule.describe());
        if operation.needs_radius() && radius.is_none() {
            return Err(ConfigError::Invalid(format!(
                "operation {operation} needs a [radius] section"
            )));
        }

        let potential = raw
            .potential
            .as_ref()
            .map(|spec| build_potential(spec, &map))
            .transpose()?;
        let potential_label = potential.as_ref().map(describe_potential);

        Ok(ExperimentConfig {
            operation,
            seed,
            precision_bits,
            out_dir,
            map,
            map_label,
            potential,
            potential_label,
            radius,
            radius_label,
            params: raw.params,
            defaults,
        })
    }
}

fn build_map(raw: &RawMap) -> Result<(PartitionedMap, String), ConfigError> {
    match (&raw.builtin, &raw.branches) {
        (Some(_), Some(_)) => Err(ConfigError::Invalid(
            "give either map.builtin or map.branches, not both".into(),
        )),
        (None, None) => Err(ConfigError::Invalid(
            "the [map] section needs builtin or branches".into(),
        )),
        (Some(spec), None) => {
            let map = parse_builtin_map(spec)?;
            Ok((map, spec.clone()))
        }
        (None, Some(branches)) => {
            let specs: Vec<BranchSpec> = branches
                .iter()
                .map(|b| BranchSpec {
                    domain: (b.domain[0], b.domain[1]),
                    formula: b.formula.clone(),
                    derivative: b.derivative.clone(),
                })
                .collect();
            let map = PartitionedMap::from_branches(&specs)?;
            Ok((map, format!("custom({} branches)", specs.len())))
        }
    }
}

/// Parses "name" or "name(arg, ...)" builtin map specs.
fn parse_builtin_map(spec: &str) -> Result<PartitionedMap, ConfigError> {
    let (name, args) = split_call(spec)?;
    let unexpected = |name: &str| {
        ConfigError::Invalid(format!("{name} takes no arguments"))
    };
    match name {
        "doubling" => match args {
            None => Ok(PartitionedMap::doubling()),
            Some(_) => Err(unexpected("doubling")),
        },
        "golden" => match args {
            None => {
                Ok(PartitionedMap::beta_map((1.0 + 5f64.sqrt()) / 2.0)?)
            }
            Some(_) => Err(unexpected("golden")),
        },
        "beta" => {
            let beta = one_number(name, args)?;
            Ok(PartitionedMap::beta_map(beta)?)
        }
        "bernoulli" => {
            let k = one_number(name, args)?;
            if k.fract() != 0.0 || !(2.0..=64.0).contains(&k) {
                return Err(ConfigError::Invalid(format!(
                    "bernoulli branch count must be an integer in 2..=64, \
                     got {k}"
                )));
            }
            Ok(PartitionedMap::bernoulli_markov(k as u32)?)
        }
        "manneville_pomeau" => {
            let beta = one_number(name, args)?;
            // The CLI contract promises this exact phrase for the most
            // common mistake.
            if !(beta > 1.0) {
                return Err(ConfigError::Invalid(format!(
                    "manneville_pomeau: beta must exceed 1 (got {beta})"
                )));
            }
            Ok(PartitionedMap::manneville_pomeau(beta)?)
        }
        other => Err(ConfigError::Invalid(format!(
            "unknown builtin map {other:?}; run the list command to see \
             what is available"
        ))),
    }
}

fn build_radius(raw: &RawRadius) -> Result<RadiusSchedule, ConfigError> {
    let need = |field: &str, kind: &str| {
        ConfigError::Invalid(format!("radius kind {kind:?} needs {field}"))
    };
    match raw.kind.as_str() {
        "power" => {
            let alpha = raw.alpha.ok_or_else(|| need("alpha", "power"))?;
            Ok(RadiusSchedule::power(alpha)?)
        }
        "scaled_power" => {
            let c = raw.c.ok_or_else(|| need("c", "scaled_power"))?;
            let alpha =
                raw.alpha.ok_or_else(|| need("alpha", "scaled_power"))?;
            Ok(RadiusSchedule::scaled_power(c, alpha)?)
        }
        "exponential" => {
            let rho = raw.rho.ok_or_else(|| need("rho", "exponential"))?;
            Ok(RadiusSchedule::exponential(rho)?)
        }
        "table" => {
            let values =
                raw.values.clone().ok_or_else(|| need("values", "table"))?;
            Ok(RadiusSchedule::table(values)?)
        }
        other => Err(ConfigError::Invalid(format!(
            "unknown radius kind {other:?}; expected power, scaled_power, \
             exponential, or table"
        ))),
    }
}

fn build_potential(
    raw: &RawPotential,
    map: &PartitionedMap,
) -> Result<Potential, ConfigError> {
    let base = match raw.kind.as_str() {
        "zero" => Potential::Zero,
        "neg_log_deriv" => {
            let scale = raw.scale.unwrap_or(1.0);
            Potential::NegLogDeriv { scale }
        }
        "bernoulli" => {
            let weights = match (&raw.p, &raw.weights) {
                (Some(_), Some(_)) => {
                    return Err(ConfigError::Invalid(
                        "give either potential.p or potential.weights, \
                         not both"
                            .into(),
                    ));
                }
                (Some(p), None) => vec![*p, 1.0 - *p],
                (None, Some(w)) => w.clone(),
                (None, None) => {
                    return Err(ConfigError::Invalid(
                        "bernoulli potential needs p or weights".into(),
                    ));
                }
            };
            Potential::Bernoulli { weights }
        }
        "piecewise" => {
            let pieces = raw.pieces.as_ref().ok_or_else(|| {
                ConfigError::Invalid(
                    "piecewise potential needs pieces".into(),
                )
            })?;
            let specs: Vec<(f64, f64, &str)> = pieces
                .iter()
                .map(|p| (p.lo, p.hi, p.formula.as_str()))
                .collect();
            Potential::piecewise(&specs)?
        }
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown potential kind {other:?}; expected zero, \
                 neg_log_deriv, bernoulli, or piecewise"
            )));
        }
    };
    let built = match raw.offset {
        Some(offset) => base.shifted(offset),
        None => base,
    };
    built.validate(map)?;
    Ok(built)
}

pub fn describe_potential(phi: &Potential) -> String {
    match phi {
        Potential::Zero => "zero".into(),
        Potential::NegLogDeriv { scale } => {
            format!("neg_log_deriv(scale = {scale})")
        }
        Potential::Bernoulli { weights } => {
            let parts: Vec<String> =
                weights.iter().map(|w| format!("{w}")).collect();
            format!("bernoulli[{}]", parts.join(", "))
        }
        Potential::Piecewise(pieces) => {
            format!("piecewise({} pieces)", pieces.len())
        }
        Potential::Shifted { base, offset } => {
            format!("{} + {offset}", describe_potential(base))
        }
    }
}

fn split_call(spec: &str) -> Result<(&str, Option<&str>), ConfigError> {
    let spec = spec.trim();
    match spec.find('(') {
        None => Ok((spec, None)),
        Some(open) => {
            let Some(inner) = spec[open + 1..].strip_suffix(')') else {
                return Err(ConfigError::Invalid(format!(
                    "malformed builtin spec {spec:?}: missing closing \
                     parenthesis"
                )));
            };
            Ok((&spec[..open], Some(inner.trim())))
        }
    }
}

fn one_number(name: &str, args: Option<&str>) -> Result<f64, ConfigError> {
    let arg = args.filter(|a| !a.is_empty()).ok_or_else(|| {
        ConfigError::Invalid(format!("{name} needs one numeric argument"))
    })?;
    arg.parse::<f64>().map_err(|_| {
        ConfigError::Invalid(format!(
            "{name} argument must be a number, got {arg:?}"
        ))
    })
}

/// The stable listing behind the `list` subcommand. Sections and entries
/// are sorted so scripted diffs of the output stay quiet.
pub fn list_builtins() -> String {
    let mut out = String::new();
    out.push_str("maps:\n");
    for (name, blurb) in [
        ("bernoulli(k)", "full k-branch linear Markov map kx mod 1"),
        ("beta(beta)", "beta-transformation beta*x mod 1"),
        ("doubling", "2x mod 1"),
        ("golden", "beta-transformation at the golden ratio"),
        (
            "manneville_pomeau(beta)",
            "neutral fixed point at 0, x + 2^(beta-1) x^beta",
        ),
    ] {
        out.push_str(&format!("  {name:<26} {blurb}\n"));
    }
    out.push_str("radius schedules:\n");
    for (name, blurb) in [
        ("exponential(rho)", "r_n = rho^n, 0 < rho < 1"),
        ("power(alpha)", "r_n = n^-alpha"),
        ("scaled_power(c, alpha)", "r_n = c * n^-alpha"),
        ("table(values)", "explicit finite schedule"),
    ] {
        out.push_str(&format!("  {name:<26} {blurb}\n"));
    }
    out.push_str("potentials:\n");
    for (name, blurb) in [
        ("bernoulli(p)", "log-weight potential, weights p and 1-p"),
        ("neg_log_deriv(scale)", "-scale * log|T'|"),
        ("piecewise", "formula per interval"),
        ("zero", "constant 0, equilibrium is measure of maximal entropy"),
    ] {
        out.push_str(&format!("  {name:<26} {blurb}\n"));
    }
    out.push_str("operations:\n");
    let mut ops: Vec<&str> =
        Operation::ALL.iter().map(|op| op.as_str()).collect();
    ops.sort_unstable();
    for op in ops {
        out.push_str(&format!("  {op}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_toml_str(text)
    }

    const DIMENSION_MINIMAL: &str = r#"
        [run]
        operation = "dimension"

        [map]
        builtin = "doubling"

        [radius]
        kind = "power"
        alpha = 2.0
    "#;

    #[test]
    fn minimal_dimension_config_fills_defaults() {
        let cfg = parse(DIMENSION_MINIMAL).unwrap();
        assert_eq!(cfg.operation, Operation::Dimension);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.precision_bits, DEFAULT_PRECISION_BITS);
        assert_eq!(cfg.map.name(), "doubling");
        assert_eq!(cfg.radius_label.as_deref(), Some("n^-2"));
        assert!(cfg.defaults.iter().any(|d| d == "seed = 0"));
        assert!(cfg
            .defaults
            .iter()
            .any(|d| d.starts_with("precision_bits")));
    }

    #[test]
    fn explicit_seed_is_not_recorded_as_a_default() {
        let text = DIMENSION_MINIMAL.replace(
            "operation = \"dimension\"",
            "operation = \"dimension\"\n        seed = 7",
        );
        let cfg = parse(&text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert!(!cfg.defaults.iter().any(|d| d.starts_with("seed")));
    }

    #[test]
    fn manneville_pomeau_below_one_is_rejected_with_the_cli_phrase() {
        let text = r#"
            [run]
            operation = "return-times"

            [map]
            builtin = "manneville_pomeau(0.8)"
        "#;
        let err = parse(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("must exceed 1"), "message was {msg:?}");
        assert!(msg.contains("0.8"), "message was {msg:?}");
    }

    #[test]
    fn unknown_operation_lists_the_valid_names() {
        let text = DIMENSION_MINIMAL
            .replace("\"dimension\"", "\"dimensions\"");
        let msg = parse(&text).unwrap_err().to_string();
        assert!(msg.contains("unknown operation"), "message was {msg:?}");
        assert!(msg.contains("energy-scan"), "message was {msg:?}");
    }

    #[test]
    fn radius_operations_demand_a_radius_section() {
        let text = r#"
            [run]
            operation = "energy-scan"

            [map]
            builtin = "doubling"
        "#;
        let msg = parse(text).unwrap_err().to_string();
        assert!(msg.contains("needs a [radius]"), "message was {msg:?}");
    }

    #[test]
    fn param_typos_are_rejected() {
        let text = format!("{DIMENSION_MINIMAL}\n[params]\nbinz = 12\n");
        let msg = parse(&text).unwrap_err().to_string();
        assert!(msg.contains("binz"), "message was {msg:?}");
    }

    #[test]
    fn custom_branch_maps_build() {
        let text = r#"
            [run]
            operation = "density"

            [map]
            [[map.branches]]
            domain = [0.0, 0.33333333333333331]
            formula = "3*x"
            derivative = "3"
            [[map.branches]]
            domain = [0.33333333333333331, 0.66666666666666663]
            formula = "3*x - 1"
            derivative = "3"
            [[map.branches]]
            domain = [0.66666666666666663, 1.0]
            formula = "3*x - 2"
            derivative = "3"
        "#;
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.map.branch_count(), 3);
        assert_eq!(cfg.map_label, "custom(3 branches)");
    }

    #[test]
    fn bernoulli_potential_accepts_the_single_weight_shorthand() {
        let text = r#"
            [run]
            operation = "s0"

            [map]
            builtin = "doubling"

            [potential]
            kind = "bernoulli"
            p = 0.25
        "#;
        let cfg = parse(text).unwrap();
        match cfg.potential.unwrap() {
            Potential::Bernoulli { weights } => {
                assert_eq!(weights, vec![0.25, 0.75]);
            }
            other => panic!("expected a Bernoulli potential, got {other:?}"),
        }
    }

    #[test]
    fn potentials_are_validated_against_the_map() {
        // Three weights on a two-branch map.
        let text = r#"
            [run]
            operation = "pressure"

            [map]
            builtin = "doubling"

            [potential]
            kind = "bernoulli"
            weights = [0.2, 0.3, 0.5]
        "#;
        assert!(parse(text).is_err());
    }

    #[test]
    fn shifted_potentials_parse() {
        let text = r#"
            [run]
            operation = "pressure"

            [map]
            builtin = "doubling"

            [potential]
            kind = "neg_log_deriv"
            offset = 0.37
        "#;
        let cfg = parse(text).unwrap();
        assert_eq!(
            cfg.potential_label.as_deref(),
            Some("neg_log_deriv(scale = 1) + 0.37")
        );
    }

    #[test]
    fn every_radius_kind_parses() {
        for (section, expect) in [
            ("kind = \"power\"\nalpha = 1.5", "n^-1.5"),
            ("kind = \"scaled_power\"\nc = 0.5\nalpha = 2.0", "0.5 * n^-2"),
            ("kind = \"exponential\"\nrho = 0.5", "0.5^n"),
            ("kind = \"table\"\nvalues = [0.5, 0.25]", "table[2 entries]"),
        ] {
            let text = format!(
                "[run]\noperation = \"dimension\"\n\n[map]\nbuiltin = \
                 \"doubling\"\n\n[radius]\n{section}\n"
            );
            let cfg = parse(&text).unwrap();
            let label = cfg.radius_label.unwrap();
            assert!(
                label.contains(expect) || label == expect,
                "schedule {section:?} described as {label:?}"
            );
        }
    }

    #[test]
    fn golden_is_the_golden_ratio_beta_map() {
        let text = r#"
            [run]
            operation = "density"

            [map]
            builtin = "golden"
        "#;
        let cfg = parse(text).unwrap();
        assert_eq!(cfg.map.branch_count(), 2);
        let sup = cfg.map.expansion_sup();
        assert!((sup - 1.618033988749895).abs() < 1e-12);
    }

    #[test]
    fn the_builtin_listing_is_sorted_and_complete() {
        let listing = list_builtins();
        assert!(listing.contains("manneville_pomeau(beta)"));
        assert!(listing.contains("scaled_power(c, alpha)"));
        assert!(listing.contains("bernoulli(p)"));
        for section in ["maps:", "radius schedules:", "potentials:"] {
            assert!(listing.contains(section), "missing {section}");
        }
        // Entries inside each section stay sorted.
        let mut sections: Vec<Vec<&str>> = Vec::new();
        for line in listing.lines() {
            if line.ends_with(':') {
                sections.push(Vec::new());
            } else if let Some(current) = sections.last_mut() {
                current.push(line.trim_start());
            }
        }
        for entries in &sections {
            let mut sorted = entries.clone();
            sorted.sort_unstable();
            assert_eq!(entries, &sorted);
        }
    }
}
