//! Declarative experiment configuration: one flat JSON document per run,
//! with CLI flag overrides.

use serde::{Deserialize, Serialize};
use spt_qcnn::decoder::Architecture;
use spt_qcnn::model::{HamiltonianParams, SopKind};
use spt_qcnn::noise::ChannelSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ClusterNoise,
    Sweep,
    Threshold,
    Backprop,
    Truthtable,
    Gs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Zxz,
    Zxxxz,
}

impl Phase {
    pub fn kind(self) -> SopKind {
        match self {
            Phase::Zxz => SopKind::Zxz,
            Phase::Zxxxz => SopKind::Zxxxz,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchKind {
    XOnly,
    AltXz,
    AltCz,
}

impl ArchKind {
    pub fn build(self, phase: Phase, depth: u32) -> Architecture {
        match self {
            ArchKind::XOnly => Architecture::x_only(phase.kind(), depth),
            ArchKind::AltXz => Architecture::alternating(phase.kind(), depth),
            ArchKind::AltCz => Architecture::alternating_c(depth),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Pure-Z error probability of the channel (cluster-noise runs).
    Pz,
    J1,
    J2,
    H1,
    H2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub j1: f64,
    pub j2: f64,
    pub h1: f64,
    pub h2: f64,
}

impl HamiltonianSpec {
    pub fn params(&self, n: u32) -> Result<HamiltonianParams, spt_qcnn::Error> {
        HamiltonianParams::new(self.j1, self.j2, self.h1, self.h2, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Analytic,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub mode: ThresholdMode,
    #[serde(default = "default_threshold_tol")]
    pub tol: f64,
    /// Bisection bracket; defaults depend on the phase.
    #[serde(default)]
    pub bracket: Option<(f64, f64)>,
}

fn default_threshold_tol() -> f64 {
    0.002
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        ThresholdSpec {
            mode: ThresholdMode::Analytic,
            tol: default_threshold_tol(),
            bracket: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
#[derive(Default)]
pub enum TruncationSpec {
    #[default]
    None,
    Coeff(f64),
    MaxTerms(usize),
}


#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackpropSpec {
    #[serde(default)]
    pub truncation: TruncationSpec,
    /// Also emit the string-order-parameter factored form.
    #[serde(default)]
    pub conjugate: bool,
}

impl Default for BackpropSpec {
    fn default() -> Self {
        BackpropSpec {
            truncation: TruncationSpec::None,
            conjugate: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerName {
    Xcorr,
    Zcorr,
    Ccorr,
}

impl LayerName {
    pub fn layer(self) -> spt_qcnn::circuits::QecLayer {
        match self {
            LayerName::Xcorr => spt_qcnn::circuits::QecLayer::XCorr,
            LayerName::Zcorr => spt_qcnn::circuits::QecLayer::ZCorr,
            LayerName::Ccorr => spt_qcnn::circuits::QecLayer::CCorr,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GsSpec {
    #[serde(default = "default_gs_tol")]
    pub tol: f64,
    #[serde(default)]
    pub edge_pinning: bool,
    #[serde(default)]
    pub max_krylov: Option<usize>,
    /// Amplitude dump path.
    #[serde(default)]
    pub dump: Option<String>,
}

fn default_gs_tol() -> f64 {
    1e-10
}

impl Default for GsSpec {
    fn default() -> Self {
        GsSpec {
            tol: default_gs_tol(),
            edge_pinning: false,
            max_krylov: None,
            dump: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// One experiment, fully resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_phase")]
    pub phase: Phase,
    #[serde(default = "default_arch")]
    pub arch: ArchKind,
    #[serde(default = "default_depths")]
    pub depths: Vec<u32>,
    #[serde(default = "default_n")]
    pub n: u32,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_channel")]
    pub channel: String,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub hamiltonian: Option<HamiltonianSpec>,
    /// Ground-state solve tolerance for sweep experiments.
    #[serde(default = "default_sweep_tol")]
    pub tol: f64,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default = "default_format")]
    pub format: OutputFormat,
    #[serde(default)]
    pub threshold: Option<ThresholdSpec>,
    #[serde(default)]
    pub backprop: Option<BackpropSpec>,
    #[serde(default)]
    pub truthtable: Option<LayerName>,
    #[serde(default)]
    pub gs: Option<GsSpec>,
}

fn default_phase() -> Phase {
    Phase::Zxz
}
fn default_arch() -> ArchKind {
    ArchKind::AltXz
}
fn default_depths() -> Vec<u32> {
    vec![1, 2]
}
fn default_n() -> u32 {
    1215
}
fn default_shots() -> usize {
    10_000
}
fn default_channel() -> String {
    "depol:0.015".to_string()
}
fn default_sweep_tol() -> f64 {
    1e-8
}
fn default_format() -> OutputFormat {
    OutputFormat::Csv
}

impl ExperimentConfig {
    pub fn parse_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }

    pub fn channel_spec(&self) -> Result<ChannelSpec, spt_qcnn::Error> {
        self.channel.parse()
    }

    /// Structural validation shared by every experiment kind.
    pub fn validate(&self) -> Result<(), String> {
        if self.shots == 0 {
            return Err("shots must be at least 1".into());
        }
        if self.depths.is_empty() {
            return Err("need at least one depth".into());
        }
        let mut sorted = self.depths.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.depths.len() {
            return Err("duplicate depths".into());
        }
        self.channel_spec().map_err(|e| e.to_string())?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err("sweep grid is empty".into());
            }
            let increasing = sweep.values.windows(2).all(|w| w[1] > w[0]);
            let decreasing = sweep.values.windows(2).all(|w| w[1] < w[0]);
            if !(increasing || decreasing) {
                return Err("sweep grid must be strictly monotone".into());
            }
        }
        for &d in &self.depths {
            let arch = self.arch.build(self.phase, d);
            arch.validate(self.n).map_err(|e| e.to_string())?;
        }
        if self.arch == ArchKind::AltCz && self.phase != Phase::Zxxxz {
            return Err("the C-error correcting architecture runs on the zxxxz pipeline".into());
        }
        match self.experiment {
            ExperimentKind::Sweep => {
                if self.hamiltonian.is_none() {
                    return Err("sweep needs a hamiltonian block".into());
                }
                let sweep = self.sweep.as_ref().ok_or("sweep needs a sweep block")?;
                if sweep.axis == SweepAxis::Pz {
                    return Err("sweep axis must be a Hamiltonian coupling".into());
                }
                if self.n > 20 {
                    return Err("sweep experiments need n <= 20 (exact states)".into());
                }
            }
            ExperimentKind::ClusterNoise => {
                if let Some(sweep) = &self.sweep {
                    if sweep.axis != SweepAxis::Pz {
                        return Err("cluster-noise sweeps the error probability".into());
                    }
                }
            }
            ExperimentKind::Gs => {
                if self.hamiltonian.is_none() {
                    return Err("gs needs a hamiltonian block".into());
                }
                if self.n > 20 {
                    return Err("gs needs n <= 20".into());
                }
            }
            _ => {}
        }
        Ok(())
    }
}
