//! Experiment configuration schema.

use anyhow::{bail, Context};
use qmod_core::measures::ScalarField;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// On-disk experiment configuration. Unknown keys are schema violations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: String,
    #[serde(default = "default_n")]
    pub n: usize,
    /// Path to a group definition file; absent means the trivial group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fields: Option<Vec<FieldSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_list: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    /// Cells per axis of the solver grid on the chart box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<EtaSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_n() -> usize {
    2
}

pub const COMMANDS: &[&str] = &[
    "verify-fubini",
    "ring-modulus",
    "ring-inequality",
    "lower-bound",
    "divergence",
    "fmo",
    "example7-distortion",
    "example7-equicontinuity",
    "calderon",
    "group-audit",
];

impl ExperimentConfig {
    pub fn parse(json: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(json).context("config does not match the schema")?;
        if !COMMANDS.contains(&cfg.command.as_str()) {
            bail!(
                "unknown command {:?}; expected one of {}",
                cfg.command,
                COMMANDS.join(", ")
            );
        }
        if cfg.n < 2 {
            bail!("dimension n must be at least 2");
        }
        Ok(cfg)
    }
}

/// Density field selector, by name plus parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// `Q ≡ c`.
    Const {
        #[serde(default = "one")]
        c: f64,
    },
    /// `Q(p) = log(C / h̃(p, p₀))`, clamped at zero.
    LogFmo {
        #[serde(rename = "C", default = "one")]
        c: f64,
    },
    /// `Q(p) = log^{n-1}(C / h̃(p, p₀))`, clamped at zero.
    LogPow {
        #[serde(rename = "C", default = "one")]
        c: f64,
    },
    /// `Q(p) = 1 / h̃(p, p₀)`.
    InvDist,
    /// Indicator of the radial shell `lo ≤ h̃(p, p₀) ≤ hi`.
    RadialIndicator { lo: f64, hi: f64 },
    /// `Q(p) = exp((n-1)/h̃(p, p₀))` — the convergent counterexample of
    /// the divergence criterion.
    ExpConv,
}

fn one() -> f64 {
    1.0
}

impl FieldSpec {
    pub fn name(&self) -> String {
        match self {
            FieldSpec::Const { c } => format!("const({c})"),
            FieldSpec::LogFmo { c } => format!("log_fmo(C={c})"),
            FieldSpec::LogPow { c } => format!("log_pow(C={c})"),
            FieldSpec::InvDist => "inv_dist".into(),
            FieldSpec::RadialIndicator { lo, hi } => format!("indicator[{lo},{hi}]"),
            FieldSpec::ExpConv => "exp_conv".into(),
        }
    }

    pub fn build(&self, n: usize) -> anyhow::Result<ScalarField> {
        let pw = n as f64 - 1.0;
        Ok(match self {
            FieldSpec::Const { c } => ScalarField::constant(*c),
            FieldSpec::LogFmo { c } => {
                let c = *c;
                ScalarField::radial(self.name(), move |t| {
                    if t <= 0.0 {
                        f64::INFINITY
                    } else {
                        (c / t).ln().max(0.0)
                    }
                })
            }
            FieldSpec::LogPow { c } => {
                let c = *c;
                ScalarField::radial(self.name(), move |t| {
                    if t <= 0.0 {
                        f64::INFINITY
                    } else {
                        (c / t).ln().max(0.0).powf(pw)
                    }
                })
            }
            FieldSpec::InvDist => ScalarField::radial(self.name(), |t| {
                if t <= 0.0 {
                    f64::INFINITY
                } else {
                    1.0 / t
                }
            }),
            FieldSpec::RadialIndicator { lo, hi } => {
                if !(*lo >= 0.0 && hi > lo) {
                    anyhow::bail!("indicator shell needs 0 <= lo < hi");
                }
                let (lo, hi) = (*lo, *hi);
                ScalarField::radial(self.name(), move |t| {
                    if t >= lo && t <= hi {
                        1.0
                    } else {
                        0.0
                    }
                })
            }
            FieldSpec::ExpConv => ScalarField::radial(self.name(), move |t| {
                if t <= 0.0 {
                    f64::INFINITY
                } else {
                    (pw / t).exp()
                }
            }),
        })
    }
}

/// Gauge selector for the growth-condition test.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiSpec {
    /// `φ(t) = t^p`.
    Power { p: f64 },
    /// `φ(t) = t`.
    Linear,
    /// `φ(t) = t^p log²(e + t)`.
    PowerLog2 { p: f64 },
}

impl PhiSpec {
    pub fn name(&self) -> String {
        match self {
            PhiSpec::Power { p } => format!("t^{p}"),
            PhiSpec::Linear => "t".into(),
            PhiSpec::PowerLog2 { p } => format!("t^{p}·log²(e+t)"),
        }
    }

    pub fn build(&self) -> Box<dyn Fn(f64) -> f64 + Send + Sync> {
        match self {
            PhiSpec::Power { p } => {
                let p = *p;
                Box::new(move |t: f64| t.powf(p))
            }
            PhiSpec::Linear => Box::new(|t: f64| t),
            PhiSpec::PowerLog2 { p } => {
                let p = *p;
                Box::new(move |t: f64| t.powf(p) * (std::f64::consts::E + t).ln().powi(2))
            }
        }
    }
}

/// Radial weight selector for the ring inequality battery.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaSpec {
    /// The extremal weight built from the spherical-mean profile.
    Eta0,
    /// `η ≡ 1/(r2 - r1)`.
    Uniform,
    /// Symmetric triangle with unit integral.
    Triangular,
    /// Uniform weight scaled by `factor` (an inadmissible weight when
    /// `factor < 1`; used to exercise the validation path).
    Scaled { factor: f64 },
}

impl EtaSpec {
    pub fn name(&self) -> String {
        match self {
            EtaSpec::Eta0 => "eta0".into(),
            EtaSpec::Uniform => "uniform".into(),
            EtaSpec::Triangular => "triangular".into(),
            EtaSpec::Scaled { factor } => format!("scaled({factor})"),
        }
    }
}
