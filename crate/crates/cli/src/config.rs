//! Run configuration: JSON with an explicit schema version.
//!
//! The experiment-specific part lives under `params` and is decoded by the
//! experiment itself, so each one can reject unknown keys on its own terms.

use std::path::{Path, PathBuf};

use balayage::engine::McParams;
use balayage::geometry::DomainSpec;
use balayage::kernels::KernelSpec;
use balayage::measure::WeightedMeasure;
use balayage::potential::{standard_dictionary, Dictionary, PotentialSpec};
use balayage::{Error, Point, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Registered experiment name; may be left out when the subcommand
    /// names the experiment.
    #[serde(default)]
    pub experiment: Option<String>,
    pub kernel: KernelSpec,
    pub domain: DomainSpec,
    /// Atoms (point, weight) of the starting measure ν.
    #[serde(default)]
    pub nu: Vec<AtomSpec>,
    #[serde(default)]
    pub dictionary: Option<DictionarySpec>,
    #[serde(default)]
    pub mc: McParams,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub point: Point,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictionarySpec {
    /// Capped kernels at `poles`, bumps, and p anchored at `center`.
    Standard {
        center: Point,
        #[serde(default)]
        poles: Vec<Point>,
        #[serde(default)]
        bumps: Vec<BumpSpec>,
        cap_radius: f64,
    },
    Explicit {
        members: Vec<PotentialSpec>,
        reference: PotentialSpec,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// File stem for the report files (default: the experiment name).
    #[serde(default)]
    pub name: Option<String>,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    /// Checks the kernel/domain pair and the atoms of ν.
    pub fn check_common(&self) -> Result<()> {
        self.domain.validate(&self.kernel)?;
        self.mc.validate()?;
        for (i, a) in self.nu.iter().enumerate() {
            if a.point.dim() != self.kernel.dim() {
                return Err(Error::parameter(format!("atom {i} has dimension {}", a.point.dim())));
            }
            if !self.domain.contains(&a.point) {
                return Err(Error::precondition(format!("atom {i} of ν lies outside X")));
            }
        }
        Ok(())
    }

    pub fn measure(&self) -> Result<WeightedMeasure> {
        if self.nu.is_empty() {
            return Err(Error::Config("ν needs at least one atom".into()));
        }
        let atoms: Vec<(Point, f64)> = self.nu.iter().map(|a| (a.point, a.weight)).collect();
        WeightedMeasure::from_atoms(&atoms)
    }

    /// The configured dictionary, or `fallback` when none is configured.
    pub fn dictionary_or(&self, fallback: impl FnOnce() -> Result<Dictionary>) -> Result<Dictionary> {
        match &self.dictionary {
            None => fallback(),
            Some(DictionarySpec::Standard { center, poles, bumps, cap_radius }) => {
                let bumps: Vec<(Point, f64)> = bumps.iter().map(|b| (b.center, b.radius)).collect();
                standard_dictionary(&self.kernel, &self.domain, center, poles, &bumps, *cap_radius)
            }
            Some(DictionarySpec::Explicit { members, reference }) => {
                Dictionary::new(members.clone(), reference.clone(), &self.kernel)
            }
        }
    }

    /// Decodes `params` into the experiment's own parameter type.
    pub fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        let v = if self.params.is_null() { Value::Object(Default::default()) } else { self.params.clone() };
        serde_json::from_value(v).map_err(|e| Error::Config(format!("params: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "experiment": "balayage",
        "kernel": {"dim": 3, "alpha": 2.0},
        "domain": {"kind": "full_space", "dim": 3},
        "nu": [{"point": [0, 0, 0], "weight": 1.0}]
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = RunConfig::from_str(MINIMAL).unwrap();
        assert_eq!(c.mc, McParams::default());
        assert_eq!(c.output.format, Format::Both);
        c.check_common().unwrap();
        assert_eq!(c.measure().unwrap().total_mass(), 1.0);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let text = MINIMAL.replace("\"nu\"", "\"nuu\"");
        match RunConfig::from_str(&text) {
            Err(Error::Config(m)) => assert!(m.starts_with("line 6"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_schema_version() {
        let text = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(RunConfig::from_str(&text), Err(Error::Config(_))));
    }
}
