use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::adversary::AdversarySpec;
use super::bounds::BoundsSpec;
use super::emit::OutputFormat;
use super::rates::RateSpec;
use super::verify::{VerifyReductionSpec, VerifySplineSpec};
use crate::error::{Error, Result};

/// Deliberate corruptions used as negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Chebyshev knots shrunk by 10%, which breaks orthogonality.
    SignPattern,
    /// `c_0` perturbed by `1e-3 * sum |c_j|`.
    Weights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToleranceProfile {
    #[default]
    Default,
    Strict,
}

/// Thresholds used by the suites. Relative ones say so in the name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Absolute bound on `int t^p sgn U_{r+1}(t) dt`, `p <= r`.
    pub orthogonality: f64,
    /// Bound on bump endpoint derivatives, each scaled by `max(1, D_j)`.
    pub endpoint: f64,
    pub constants_rel: f64,
    pub family_integrals_rel: f64,
    /// Weight identity residuals relative to `sum |c_j|`.
    pub weights_rel: f64,
    /// Mean recovery from exact integrals relative to `max(|mean|, mean |lambda|)`.
    pub roundtrip_rel: f64,
    /// Half-width of the accepted band around the theoretical exponent.
    pub rate_band: f64,
    /// Largest accepted observed-to-predicted ratio in the adversary pipeline.
    pub adversary_ratio: f64,
    /// Largest accepted mean error in oracle mode.
    pub oracle_abs: f64,
}

impl ToleranceProfile {
    pub fn tolerances(self) -> Tolerances {
        match self {
            ToleranceProfile::Default => Tolerances {
                orthogonality: 1e-10,
                endpoint: 1e-9,
                constants_rel: 1e-7,
                family_integrals_rel: 1e-6,
                weights_rel: 1e-8,
                roundtrip_rel: 1e-8,
                rate_band: 0.3,
                adversary_ratio: 10.0,
                oracle_abs: 1e-8,
            },
            ToleranceProfile::Strict => Tolerances {
                orthogonality: 1e-12,
                endpoint: 1e-11,
                constants_rel: 1e-9,
                family_integrals_rel: 1e-8,
                weights_rel: 1e-10,
                roundtrip_rel: 1e-10,
                rate_band: 0.2,
                adversary_ratio: 2.0,
                oracle_abs: 1e-10,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    VerifySpline(VerifySplineSpec),
    VerifyReduction(VerifyReductionSpec),
    Rates(RateSpec),
    Adversary(AdversarySpec),
    BoundsCalc(BoundsSpec),
}

/// A complete, serializable description of one run. The output path is a
/// property of the invocation and is not serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub tolerance_profile: ToleranceProfile,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            format: OutputFormat::default(),
            tolerance_profile: ToleranceProfile::default(),
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.experiment {
            Experiment::VerifySpline(s) => s.validate(),
            Experiment::VerifyReduction(s) => s.validate(),
            Experiment::Rates(s) => s.validate(),
            Experiment::Adversary(s) => s.validate(),
            Experiment::BoundsCalc(s) => s.validate(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Reads a spec from a file holding either a bare spec or a JSON report
/// written by [`super::emit`] (whose `spec` field is used).
pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let spec_value = match value.get("spec") {
        Some(inner) if value.get("schema_version").is_some() => inner.clone(),
        _ => value,
    };
    let spec: ExperimentSpec = serde_json::from_value(spec_value)?;
    spec.validate()?;
    Ok(spec)
}
