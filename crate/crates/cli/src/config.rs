//! Run configuration: one JSON record shared by every subcommand.

use std::path::{Path, PathBuf};

use loopsplit_core::connection_maps::{Grid, PipelineOptions, TauMergeOptions};
use loopsplit_core::factorization::IwasawaOptions;
use loopsplit_core::symmetries::{Reality, SymmetrySpec};
use loopsplit_core::{GroupSpec, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::lambda::parse_lambda;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Sphere,
    Hyperbolic,
}

/// Which flat convention type A connections use: `A₀ + A₁λ` or `A₀ + iA₁λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    A1,
    A2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub trim: f64,
    pub factorization: f64,
    pub iwasawa: f64,
    pub round_trip: f64,
    pub order: f64,
    pub mc: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { trim: 1e-14, factorization: 1e-9, iwasawa: 1e-8, round_trip: 1e-7, order: 1e-6, mc: 1e-6 }
    }
}

impl Tolerances {
    fn fields(&self) -> [(&'static str, f64); 6] {
        [
            ("trim", self.trim),
            ("factorization", self.factorization),
            ("iwasawa", self.iwasawa),
            ("round_trip", self.round_trip),
            ("order", self.order),
            ("mc", self.mc),
        ]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            trim: self.trim * s,
            factorization: self.factorization * s,
            iwasawa: self.iwasawa * s,
            round_trip: self.round_trip * s,
            order: self.order * s,
            mc: self.mc * s,
        }
    }

    /// `name=value` pairs for file headers.
    pub fn describe(&self) -> String {
        self.fields().iter().map(|(k, v)| format!("{k}={v:e}")).collect::<Vec<_>>().join(" ")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Inputs {
    pub frame: Option<PathBuf>,
    #[serde(rename = "loop")]
    pub loop_: Option<PathBuf>,
    pub g_minus: Option<PathBuf>,
    pub f_plus: Option<PathBuf>,
    pub g_plus: Option<PathBuf>,
    pub potential: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Outputs {
    pub frame: Option<PathBuf>,
    pub g_minus: Option<PathBuf>,
    pub f_plus: Option<PathBuf>,
    pub factors: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: Grid,
    pub symmetry: SymmetrySpec,
    pub target: Target,
    /// Birkhoff window radius `N`; absent means the automatic policy.
    pub window: Option<i32>,
    /// Truncation radius used when integrating potentials.
    pub integration_window: i32,
    pub tolerances: Tolerances,
    pub lambdas: Vec<String>,
    pub convention: Convention,
    pub seed: u64,
    pub inputs: Inputs,
    pub outputs: Outputs,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: Grid::centered(17, 1.0 / 16.0),
            symmetry: SymmetrySpec::new(2, 1, Reality::Rm1),
            target: Target::Sphere,
            window: None,
            integration_window: 14,
            tolerances: Tolerances::default(),
            lambdas: vec!["exp(i*0.3)".into()],
            convention: Convention::A2,
            seed: 42,
            inputs: Inputs::default(),
            outputs: Outputs::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        self.grid.validate().map_err(|e| CliError::Validation(format!("grid.{}", strip_invalid(&e.to_string()))))?;
        self.symmetry
            .validate()
            .map_err(|e| CliError::Validation(format!("symmetry: {}", strip_invalid(&e.to_string()))))?;
        if let Some(n) = self.window {
            if n < 1 {
                return Err(CliError::Validation("window: must be at least 1".into()));
            }
        }
        if self.integration_window < 1 {
            return Err(CliError::Validation("integration_window: must be at least 1".into()));
        }
        for (name, v) in self.tolerances.fields() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Validation(format!("tolerances.{name}: must be positive and finite")));
            }
        }
        for (i, l) in self.lambdas.iter().enumerate() {
            parse_lambda(l).map_err(|e| CliError::Validation(format!("lambdas[{i}]: {e}")))?;
        }
        Ok(())
    }

    pub fn group(&self) -> GroupSpec {
        let (n, k) = (self.symmetry.n, self.symmetry.k);
        match self.target {
            Target::Sphere => GroupSpec::sphere(n, k),
            Target::Hyperbolic => GroupSpec::hyperbolic(n, k),
        }
    }

    pub fn parsed_lambdas(&self) -> CliResult<Vec<C64>> {
        self.lambdas.iter().map(|l| parse_lambda(l)).collect()
    }

    pub fn pipeline(&self) -> PipelineOptions {
        PipelineOptions { window: self.window, tol: self.tolerances.factorization, tol_order: self.tolerances.order, ..Default::default() }
    }

    pub fn tau_merge(&self) -> TauMergeOptions {
        TauMergeOptions { pipeline: self.pipeline(), iwasawa_tol: self.tolerances.iwasawa, ..Default::default() }
    }

    pub fn iwasawa(&self) -> IwasawaOptions {
        IwasawaOptions { window: self.window, tol: self.tolerances.iwasawa, group: Some(self.group()), ..Default::default() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }
}

fn strip_invalid(msg: &str) -> &str {
    msg.strip_prefix("invalid input: ").unwrap_or(msg)
}

/// Parses and validates a config from JSON text.
pub fn parse_config_str(text: &str) -> CliResult<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Parse { path, message: e.into_inner().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.window, None);
        assert_eq!(cfg.tolerances.factorization, 1e-9);
        assert_eq!(cfg.convention, Convention::A2);
    }

    #[test]
    fn negative_spacing_names_the_key() {
        let text = r#"{"grid": {"nu": 5, "nv": 5, "u0": 0, "v0": 0, "h_u": -0.1, "h_v": 0.1}}"#;
        let err = parse_config_str(text).unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
        assert!(err.to_string().contains("grid.h_u"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let err = parse_config_str(r#"{"tolerances": {"order": 1e-6, "bogus": 1}}"#).unwrap_err();
        match err {
            CliError::Parse { path, message } => {
                assert_eq!(path, "tolerances.bogus");
                assert!(message.contains("bogus"));
            }
            other => panic!("{other}"),
        }
        let err = parse_config_str(r#"{"grid": {"nu": "five"}}"#).unwrap_err();
        assert!(matches!(err, CliError::Parse { ref path, .. } if path == "grid.nu"), "{err}");
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(parse_config_str(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn bad_values_are_validation_errors() {
        for text in [r#"{"window": 0}"#, r#"{"tolerances": {"mc": -1}}"#, r#"{"lambdas": ["0"]}"#] {
            assert!(matches!(parse_config_str(text), Err(CliError::Validation(_))), "{text}");
        }
    }
}
