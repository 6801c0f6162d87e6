//! Run configuration and the TOML scenario format.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use idsm_core::expr::Expr;
use idsm_core::fem::{InhomogeneityKind, InhomogeneityOp};
use idsm_core::idsm::{EtaHatVariant, KernelConfig, UpdateScheme};
use idsm_core::scenario::{Bounds, Inclusion, Scenario, SourceSet};
use idsm_core::synth::ReferenceConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::read_string;

/// Every knob of a generate/reconstruct run. Field names double as CLI
/// flag names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Builtin scenario name or path to a scenario file.
    pub scenario: String,
    pub noise: f64,
    pub seed: u64,
    pub segment_length: f64,
    pub dt: f64,
    pub reference_cells: usize,
    pub reference_dt: f64,
    pub fine_cells: usize,
    pub coarse_cells: usize,
    pub nu: f64,
    pub cutoff: f64,
    pub damping: f64,
    /// Scenario default when absent.
    pub tolerance: Option<f64>,
    /// `dfp` or `bfg`; scenario default when absent.
    pub scheme: Option<String>,
    pub rank_cap: usize,
    pub max_inner: usize,
    /// `dual` or `resolved`.
    pub eta_hat: String,
    /// Scenario horizon when absent.
    pub horizon: Option<f64>,
    pub picard: bool,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let k = KernelConfig::default();
        Self {
            scenario: "ex1".into(),
            noise: 0.05,
            seed: 1,
            segment_length: 0.1,
            dt: 0.0125,
            reference_cells: 13870,
            reference_dt: 0.01,
            fine_cells: 7002,
            coarse_cells: 1120,
            nu: k.nu,
            cutoff: k.cutoff,
            damping: k.damping,
            tolerance: None,
            scheme: None,
            rank_cap: k.rank_cap,
            max_inner: 8,
            eta_hat: "dual".into(),
            horizon: None,
            picard: false,
            output: PathBuf::from("run"),
        }
    }
}

pub fn parse_eta_hat(name: &str) -> Result<EtaHatVariant> {
    match name {
        "dual" => Ok(EtaHatVariant::Dual),
        "resolved" => Ok(EtaHatVariant::Resolved),
        other => Err(Error::Config(format!(
            "unknown eta-hat variant `{other}` (dual|resolved)"
        ))),
    }
}

pub fn eta_hat_name(v: EtaHatVariant) -> &'static str {
    match v {
        EtaHatVariant::Dual => "dual",
        EtaHatVariant::Resolved => "resolved",
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise.is_nan() || self.noise < 0.0 || !self.noise.is_finite() {
            return Err(Error::Config(format!(
                "noise level {} must be non-negative",
                self.noise
            )));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::Config(format!("damping {} must lie in (0, 1)", self.damping)));
        }
        if !(self.dt > 0.0 && self.segment_length > 0.0) {
            return Err(Error::Config("time steps must be positive".into()));
        }
        let ratio = self.segment_length / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!(
                "segment length {} is not a multiple of dt {}",
                self.segment_length, self.dt
            )));
        }
        if let Some(s) = &self.scheme {
            UpdateScheme::parse(s)?;
        }
        parse_eta_hat(&self.eta_hat)?;
        idsm_core::synth::guard_inverse_crime(&self.reference(), self.fine_cells, self.dt)?;
        Ok(())
    }

    /// Builtin scenario or scenario file, with horizon override applied.
    pub fn load_scenario(&self) -> Result<Scenario> {
        let mut s = if Scenario::BUILTIN.contains(&self.scenario.as_str()) {
            Scenario::builtin(&self.scenario)?
        } else if Path::new(&self.scenario).exists() {
            ScenarioFile::load(Path::new(&self.scenario))?.build()?
        } else {
            return Err(idsm_core::Error::UnknownScenario(self.scenario.clone()).into());
        };
        if let Some(h) = self.horizon {
            if h > s.horizon + 1e-12 {
                return Err(Error::Config(format!(
                    "horizon {h} exceeds the scenario horizon {}",
                    s.horizon
                )));
            }
        }
        if let Some(t) = self.tolerance {
            s.tolerance = t;
        }
        if let Some(name) = &self.scheme {
            s.scheme = UpdateScheme::parse(name)?;
        }
        Ok(s)
    }

    pub fn reference(&self) -> ReferenceConfig {
        ReferenceConfig {
            cells: self.reference_cells,
            dt: self.reference_dt,
            sample_spacing: self.reference_dt,
            horizon: self.horizon,
        }
    }

    pub fn kernel(&self) -> KernelConfig {
        KernelConfig {
            nu: self.nu,
            cutoff: self.cutoff,
            rank_cap: self.rank_cap,
            damping: self.damping,
        }
    }

    /// Reconstruction settings for `scenario`.
    pub fn solver(&self, scenario: &Scenario) -> Result<idsm_core::idsm::RunConfig> {
        let cfg = idsm_core::idsm::RunConfig {
            scheme: scenario.scheme,
            tolerance: scenario.tolerance,
            segment_length: self.segment_length,
            dt: self.dt,
            max_inner: self.max_inner,
            eta_hat: parse_eta_hat(&self.eta_hat)?,
            kernel: self.kernel(),
            horizon: self.horizon,
            picard: self.picard,
            rescale: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Number or expression text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprValue {
    Number(f64),
    Text(String),
}

impl ExprValue {
    fn text(&self) -> String {
        match self {
            Self::Number(v) => format!("{v}"),
            Self::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: String,
    /// Start from this builtin and override what the file provides.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// `conductivity`, `potential` or `power:<p>`, one per component.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operators: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionSection {
    #[serde(default = "disk")]
    pub shape: String,
    pub radius: ExprValue,
    pub center: [ExprValue; 2],
    pub contrast: ExprValue,
    #[serde(default)]
    pub component: usize,
}

fn disk() -> String {
    "disk".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourcesSection {
    pub set: String,
}

/// Scenario file: `[scenario]`, `[inclusion.N]`, `[bounds]`, `[sources]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scenario: ScenarioSection,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inclusion: BTreeMap<String, InclusionSection>,
    /// Component index → `[lo, hi]`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bounds: BTreeMap<String, [f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<SourcesSection>,
}

pub fn parse_operator(text: &str, component: usize) -> Result<InhomogeneityOp> {
    let t = text.trim();
    match t {
        "conductivity" => Ok(InhomogeneityOp::conductivity(component)),
        "potential" => Ok(InhomogeneityOp::potential(component)),
        _ => match t.strip_prefix("power:") {
            Some(p) => {
                let p: f64 = p
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad exponent in `{t}`")))?;
                Ok(InhomogeneityOp::power_potential(component, p)?)
            }
            None => Err(Error::Config(format!(
                "unknown operator `{t}` (conductivity|potential|power:<p>)"
            ))),
        },
    }
}

pub fn operator_name(op: &InhomogeneityOp) -> String {
    match op.kind {
        InhomogeneityKind::Conductivity => "conductivity".into(),
        InhomogeneityKind::Potential => "potential".into(),
        InhomogeneityKind::PowerPotential { p } => format!("power:{p}"),
    }
}

fn index_key(key: &str, what: &str) -> Result<usize> {
    key.parse()
        .map_err(|_| Error::Config(format!("{what} key `{key}` is not a non-negative integer")))
}

impl ScenarioFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario file serializes")
    }

    /// Full description of `scenario`.
    pub fn from_scenario(s: &Scenario) -> Self {
        let text = |e: &Expr| ExprValue::Text(e.source().to_string());
        let inclusion = s
            .inclusions
            .iter()
            .enumerate()
            .map(|(i, inc)| {
                (
                    (i + 1).to_string(),
                    InclusionSection {
                        shape: disk(),
                        radius: text(&inc.radius),
                        center: [text(&inc.center[0]), text(&inc.center[1])],
                        contrast: text(&inc.contrast),
                        component: inc.component,
                    },
                )
            })
            .collect();
        let bounds = s
            .bounds
            .iter()
            .enumerate()
            .map(|(l, b)| (l.to_string(), [b.lo, b.hi]))
            .collect();
        Self {
            scenario: ScenarioSection {
                name: s.name.clone(),
                builtin: None,
                horizon: Some(s.horizon),
                operators: Some(s.ops.iter().map(operator_name).collect()),
                scheme: Some(s.scheme.name().into()),
                tolerance: Some(s.tolerance),
            },
            inclusion,
            bounds,
            sources: Some(SourcesSection {
                set: s.sources.name().into(),
            }),
        }
    }

    pub fn build(&self) -> Result<Scenario> {
        let sec = &self.scenario;
        let base = sec.builtin.as_deref().map(Scenario::builtin).transpose()?;
        let ops = match (&sec.operators, &base) {
            (Some(list), _) => list
                .iter()
                .enumerate()
                .map(|(l, t)| parse_operator(t, l))
                .collect::<Result<Vec<_>>>()?,
            (None, Some(b)) => b.ops.clone(),
            (None, None) => return Err(Error::Config("[scenario] needs `operators` or `builtin`".into())),
        };
        let inclusions = if self.inclusion.is_empty() {
            match &base {
                Some(b) => b.inclusions.clone(),
                None => Vec::new(),
            }
        } else {
            let mut keyed = self
                .inclusion
                .iter()
                .map(|(k, v)| Ok((index_key(k, "inclusion")?, v)))
                .collect::<Result<Vec<_>>>()?;
            keyed.sort_by_key(|(k, _)| *k);
            keyed
                .into_iter()
                .map(|(k, inc)| {
                    if inc.shape != "disk" {
                        return Err(Error::Config(format!("inclusion {k}: only disk shapes are supported")));
                    }
                    let center = [inc.center[0].text(), inc.center[1].text()];
                    Ok(Inclusion::new(
                        &inc.radius.text(),
                        [&center[0], &center[1]],
                        &inc.contrast.text(),
                        inc.component,
                    )?)
                })
                .collect::<Result<Vec<_>>>()?
        };
        let bounds = if self.bounds.is_empty() {
            match &base {
                Some(b) if b.bounds.len() == ops.len() => b.bounds.clone(),
                _ => return Err(Error::Config("[bounds] must list every component".into())),
            }
        } else {
            let mut out = vec![None; ops.len()];
            for (k, [lo, hi]) in &self.bounds {
                let l = index_key(k, "bounds")?;
                let slot = out
                    .get_mut(l)
                    .ok_or_else(|| Error::Config(format!("bounds for component {l} without an operator")))?;
                *slot = Some(Bounds::new(*lo, *hi)?);
            }
            out.into_iter()
                .enumerate()
                .map(|(l, b)| b.ok_or_else(|| Error::Config(format!("missing bounds for component {l}"))))
                .collect::<Result<Vec<_>>>()?
        };
        let sources = match (&self.sources, &base) {
            (Some(s), _) => SourceSet::parse(&s.set)?,
            (None, Some(b)) => b.sources,
            (None, None) => SourceSet::Standard,
        };
        let horizon = sec.horizon.or(base.as_ref().map(|b| b.horizon)).unwrap_or(10.0);
        let scheme = match (&sec.scheme, &base) {
            (Some(s), _) => UpdateScheme::parse(s)?,
            (None, Some(b)) => b.scheme,
            (None, None) => UpdateScheme::Bfg,
        };
        let tolerance = sec.tolerance.or(base.as_ref().map(|b| b.tolerance)).unwrap_or(0.08);
        Ok(Scenario::new(
            &sec.name, inclusions, ops, bounds, horizon, sources, scheme, tolerance,
        )?)
    }
}
