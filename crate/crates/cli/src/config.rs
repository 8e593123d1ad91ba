use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nvdress::analysis::{ReadoutParams, DEFAULT_FLOOR};
use nvdress::dressed::NvConstants;
use nvdress::ensemble::{FieldConfig, PositionSampling};
use nvdress::manybody::{MagnetometrySpec, ProtocolSpec};
use nvdress::sequence::{builtin_sequence, parse_sequence_file, Builtin, PulseSequence};

use crate::CliError;

/// Everything a run needs, read from one JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub constants: NvConstants,
    #[serde(default = "default_field")]
    pub field: FieldConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub protocol: Option<ProtocolSpec>,
    /// Replaces `protocol.sequence` when set.
    #[serde(default)]
    pub sequence: Option<SequenceRef>,
    #[serde(default)]
    pub rabi: Option<RabiConfig>,
    #[serde(default)]
    pub magnetometry: Option<MagnetometrySpec>,
    #[serde(default)]
    pub sensitivity: SensitivityConfig,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    /// Master seed for positions, disorder and typicality streams.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_field() -> FieldConfig {
    FieldConfig::PerpTwoGroup { b_gauss: 362.4, groups: [0, 1] }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            constants: NvConstants::default(),
            field: default_field(),
            geometry: GeometryConfig::default(),
            protocol: None,
            sequence: None,
            rabi: None,
            magnetometry: None,
            sensitivity: SensitivityConfig::default(),
            analysis: AnalysisOptions::default(),
            seed: 0,
            output_dir: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(default)]
    pub sampling: PositionSampling,
    /// Read positions, groups and fields from a geometry CSV instead of
    /// sampling; relative paths resolve against the config file.
    #[serde(default)]
    pub positions_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceRef {
    Builtin { name: Builtin, tau_us: f64 },
    File(PathBuf),
}

impl SequenceRef {
    pub fn load(&self, base: &Path) -> Result<PulseSequence, CliError> {
        Ok(match self {
            SequenceRef::Builtin { name, tau_us } => builtin_sequence(*name, *tau_us)?,
            SequenceRef::File(p) => parse_sequence_file(&base.join(p))?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabiConfig {
    pub drive_mhz: f64,
    pub drive_direction: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    #[serde(default)]
    pub readout: ReadoutParams,
    /// Two-group over one-group contrast factor.
    #[serde(default = "one")]
    pub contrast_ratio: f64,
    #[serde(default = "one")]
    pub overhead_ratio: f64,
    /// AC amplitudes per encoding; zero selects one oscillation period.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn one() -> f64 {
    1.0
}

fn default_grid_points() -> usize {
    400
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig {
            readout: ReadoutParams::default(),
            contrast_ratio: 1.0,
            overhead_ratio: 1.0,
            grid_points: default_grid_points(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Fit a stretched exponential to simulated decays.
    #[serde(default)]
    pub fit: bool,
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// Reference decay for extrinsic normalization, `t_us,value[,stderr]`.
    #[serde(default)]
    pub reference_csv: Option<PathBuf>,
}

fn default_floor() -> f64 {
    DEFAULT_FLOOR
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { fit: false, floor: DEFAULT_FLOOR, reference_csv: None }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Checks that need no computation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.constants.validate()?;
        self.field.validate()?;
        // With a top-level sequence the protocol is checked after merging.
        if let (Some(p), None) = (&self.protocol, &self.sequence) {
            p.validate()?;
        }
        if let Some(r) = &self.rabi {
            if !(r.drive_mhz.is_finite() && r.drive_mhz > 0.0) {
                return Err(CliError::Validation("rabi.drive_mhz must be positive".into()));
            }
        }
        self.sensitivity.readout.validate()?;
        if !(self.analysis.floor > 0.0 && self.analysis.floor < 1.0) {
            return Err(CliError::Validation("analysis.floor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}
