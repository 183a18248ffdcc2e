//! Declarative run configuration.
//!
//! A run is described by one TOML file with a `scenario` selector, the
//! physical parameters, a mode profile, and exactly one scenario section.
//! Parsing is strict: unknown keys are rejected, physics parameters have no
//! defaults, and the fully resolved configuration (numerical knobs included)
//! is echoed into every output file so a run can be reproduced from its own
//! header.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::coupling::{GaussianProfileSpec, ModeProfile};
use crate::error::{Result, SimError};
use crate::params::{ParamsInput, PhysicalParams};
use crate::units::hz;

/// Scenario selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Hop,
    SignSweep,
    SpinMixing,
    OracleCompare,
    ResponseCurve,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Hop => "hop",
            Scenario::SignSweep => "sign_sweep",
            Scenario::SpinMixing => "spin_mixing",
            Scenario::OracleCompare => "oracle_compare",
            Scenario::ResponseCurve => "response_curve",
        }
    }
}

/// Physical parameters in laboratory units (ordinary frequencies in Hz,
/// field in gauss). Converted to angular frequencies on validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub kappa_hz: f64,
    pub g_hz: f64,
    pub gamma_atom_hz: f64,
    pub delta_atom_hz: f64,
    pub b_field_gauss: f64,
    /// Optional explicit Zeeman splitting; must agree with the field.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_z_hz: Option<f64>,
    pub delta_c_hz: f64,
    pub n_bar: f64,
    pub q_over_b2_hz_per_g2: f64,
    pub n_atoms: f64,
}

impl ParamsConfig {
    pub fn build(&self) -> Result<PhysicalParams> {
        PhysicalParams::new(ParamsInput {
            kappa: hz(self.kappa_hz),
            g: hz(self.g_hz),
            gamma_atom: hz(self.gamma_atom_hz),
            delta_atom: hz(self.delta_atom_hz),
            omega_z: self.omega_z_hz.map(hz),
            b_field: self.b_field_gauss,
            delta_c: hz(self.delta_c_hz),
            n_bar: self.n_bar,
            q_over_b2: hz(self.q_over_b2_hz_per_g2),
            n_atoms: self.n_atoms,
        })
    }
}

/// Mode profile source: an inline Gaussian parameterization or a tabulated
/// file of (x, Ω, density) rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Gaussian(GaussianProfileSpec),
    Tabulated { path: String },
}

impl ProfileConfig {
    /// Materialize the profile; `seed` feeds the transverse-dispersion
    /// sampling when configured.
    pub fn build(&self, seed: u64) -> Result<ModeProfile> {
        match self {
            ProfileConfig::Gaussian(spec) => {
                let profile = ModeProfile::gaussian(spec)?;
                match spec.transverse_rms_um {
                    Some(rms) => profile.with_transverse_dispersion(spec.waist_um, rms, seed),
                    None => Ok(profile),
                }
            }
            ProfileConfig::Tabulated { path } => ModeProfile::read_table_path(Path::new(path)),
        }
    }
}

fn default_n_samples() -> usize {
    200
}
fn default_rtol() -> f64 {
    1.0e-8
}
fn default_atol() -> f64 {
    1.0e-10
}

/// Excitation-hopping quench (local pulse, watch the excitation travel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopConfig {
    /// Sites at x ≥ boundary receive the seeding pulse (region A).
    pub boundary_um: f64,
    /// Position window [lo, hi] reported as cut A.
    pub cut_a_um: [f64; 2],
    /// Position window reported as cut B.
    pub cut_b_um: [f64; 2],
    pub t_final_s: f64,
    /// Spatial width (μm) of the seeding pulse edge; 0 is a sharp boundary.
    #[serde(default)]
    pub pulse_smoothing_um: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

fn default_sweep_points() -> usize {
    25
}
fn default_window_fraction() -> f64 {
    0.1
}
fn default_samples_per_point() -> usize {
    48
}

/// Bipartite-texture quench repeated over a drive-detuning grid; slopes are
/// converted to couplings and relaxation rates per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignSweepConfig {
    pub delta_c_min_hz: f64,
    pub delta_c_max_hz: f64,
    #[serde(default = "default_sweep_points")]
    pub n_points: usize,
    /// Region split: A is x < boundary, B is x ≥ boundary.
    pub boundary_um: f64,
    /// Fraction of the predicted oscillation period to simulate and fit.
    #[serde(default = "default_window_fraction")]
    pub window_fraction: f64,
    #[serde(default = "default_samples_per_point")]
    pub samples_per_point: usize,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

fn default_n_traj() -> usize {
    2000
}
fn default_mixing_samples() -> usize {
    120
}
fn default_scale() -> f64 {
    1.0
}

/// Pair-creation run: semiclassical ensemble, analytic growth curve, and an
/// optional exact small-N cross-check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinMixingConfig {
    pub t_final_s: f64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    #[serde(default = "default_mixing_samples")]
    pub n_samples: usize,
    /// Initial side-mode population from imperfect state preparation.
    #[serde(default)]
    pub ns0: f64,
    /// Direct uniform coupling χ (Hz). Overrides the drive-derived mapping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_hz: Option<f64>,
    /// Multiplies the drive-derived coupling χ = n̄⟨Ω²⟩𝒜(δ₋)/κ.
    #[serde(default = "default_scale")]
    pub effective_coupling_scale: f64,
    /// Choose the coupling so the pair-creation time constant 1/λ equals
    /// this many microseconds (overrides the drive mapping and chi_hz).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate_inverse_lambda_us: Option<f64>,
    /// Additive detection-noise floor (atoms) applied to the fluctuation
    /// outputs; never enters the dynamics.
    #[serde(default)]
    pub detection_noise_atoms: f64,
    /// Dump per-trajectory amplitudes alongside the moments.
    #[serde(default)]
    pub dump_trajectories: bool,
    /// Also evolve an exact Fock oracle with this pump size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_n0: Option<u32>,
    /// Side-mode cutoff for the exact oracle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_cutoff: Option<u32>,
}

fn default_compare_sites() -> Vec<usize> {
    vec![2, 3, 4]
}
fn default_mf_tol() -> f64 {
    0.05
}
fn default_wigner_tol() -> f64 {
    0.10
}
fn default_compare_n0() -> u32 {
    20
}
fn default_compare_traj() -> usize {
    4000
}
fn default_compare_cutoff() -> u32 {
    24
}

/// Cross-engine comparison suite; fails the run when any tolerance is
/// exceeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCompareConfig {
    #[serde(default = "default_compare_sites")]
    pub n_sites: Vec<usize>,
    /// Absolute tolerance on region ⟨f^z⟩ between mean-field and exact.
    #[serde(default = "default_mf_tol")]
    pub meanfield_tolerance: f64,
    /// Relative tolerance on N_s between semiclassical and exact.
    #[serde(default = "default_wigner_tol")]
    pub wigner_tolerance: f64,
    #[serde(default = "default_compare_n0")]
    pub pump_n0: u32,
    #[serde(default = "default_compare_cutoff")]
    pub fock_cutoff: u32,
    #[serde(default = "default_compare_traj")]
    pub n_traj: usize,
}

fn default_resp_range() -> f64 {
    5.0
}
fn default_resp_points() -> usize {
    1001
}

/// Tabulate the dispersive and absorptive response functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseCurveConfig {
    /// Detuning range in units of κ (symmetric when only max is given).
    #[serde(default = "default_resp_range")]
    pub delta_max_over_kappa: f64,
    #[serde(default = "default_resp_points")]
    pub n_points: usize,
}

/// Full declarative description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub params: ParamsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hop: Option<HopConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_sweep: Option<SignSweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin_mixing: Option<SpinMixingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_compare: Option<OracleCompareConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_curve: Option<ResponseCurveConfig>,
}

impl ExperimentConfig {
    /// Parse and validate a config document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            SimError::Config(format!("cannot read {}: {}", path.display(), e))
        })?;
        Self::from_toml(&text)
    }

    /// Scenario sections must match the selector exactly: the selected one
    /// present, all others absent.
    pub fn validate(&self) -> Result<()> {
        self.params.build()?;
        let sections: [(&str, bool); 5] = [
            ("hop", self.hop.is_some()),
            ("sign_sweep", self.sign_sweep.is_some()),
            ("spin_mixing", self.spin_mixing.is_some()),
            ("oracle_compare", self.oracle_compare.is_some()),
            ("response_curve", self.response_curve.is_some()),
        ];
        for (name, present) in sections {
            let selected = name == self.scenario.name();
            if selected && !present {
                return Err(SimError::Config(format!(
                    "scenario {:?} requires a [{}] section",
                    self.scenario.name(),
                    name
                )));
            }
            if !selected && present {
                return Err(SimError::Config(format!(
                    "section [{}] conflicts with scenario {:?}",
                    name,
                    self.scenario.name()
                )));
            }
        }
        let needs_profile = matches!(self.scenario, Scenario::Hop | Scenario::SignSweep);
        if needs_profile && self.profile.is_none() {
            return Err(SimError::Config(format!(
                "scenario {:?} requires a [profile] section",
                self.scenario.name()
            )));
        }
        if let Some(sm) = &self.spin_mixing {
            let derived_mapping = sm.chi_hz.is_none() && sm.calibrate_inverse_lambda_us.is_none();
            if derived_mapping && self.profile.is_none() {
                return Err(SimError::Config(
                    "spin_mixing needs chi_hz, calibrate_lambda_to_hz, or a [profile] \
                     to derive the coupling from"
                        .into(),
                ));
            }
            if sm.n_traj < 2 {
                return Err(SimError::Config("spin_mixing.n_traj must be >= 2".into()));
            }
        }
        if let Some(h) = &self.hop {
            if h.n_samples < 2 {
                return Err(SimError::Config("hop.n_samples must be >= 2".into()));
            }
            if !(h.t_final_s > 0.0) {
                return Err(SimError::Config("hop.t_final_s must be > 0".into()));
            }
        }
        if let Some(s) = &self.sign_sweep {
            if s.n_points < 2 {
                return Err(SimError::Config("sign_sweep.n_points must be >= 2".into()));
            }
            if !(s.delta_c_max_hz > s.delta_c_min_hz) {
                return Err(SimError::Config(
                    "sign_sweep detuning range must be increasing".into(),
                ));
            }
            if s.samples_per_point < 3 {
                return Err(SimError::Config(
                    "sign_sweep.samples_per_point must be >= 3".into(),
                ));
            }
        }
        if let Some(oc) = &self.oracle_compare {
            if oc.n_sites.iter().any(|&n| !(2..=4).contains(&n)) {
                return Err(SimError::Config(
                    "oracle_compare.n_sites entries must be in 2..=4".into(),
                ));
            }
        }
        if let Some(rc) = &self.response_curve {
            if rc.n_points < 3 {
                return Err(SimError::Config(
                    "response_curve.n_points must be >= 3".into(),
                ));
            }
        }
        Ok(())
    }

    /// Canonical text of the resolved configuration (defaults filled in).
    pub fn to_resolved_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL_HOP: &str = r#"
scenario = "hop"
seed = 7

[params]
kappa_hz = 200e3
g_hz = 1.5e6
gamma_atom_hz = 6e6
delta_atom_hz = -10e9
b_field_gauss = 4.0
delta_c_hz = -1.0992e6
n_bar = 3000.0
q_over_b2_hz_per_g2 = 144.0
n_atoms = 100000.0

[profile]
kind = "gaussian"
waist_um = 16.0
cloud_center_um = 600.0
cloud_rms_um = 125.0
omega_peak_hz = 100.0
n_sites = 32
x_min_um = 350.0
x_max_um = 850.0

[hop]
boundary_um = 650.0
cut_a_um = [650.0, 850.0]
cut_b_um = [350.0, 480.0]
t_final_s = 1.0e-3
"#;

    #[test]
    fn minimal_hop_parses_and_resolves_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL_HOP).unwrap();
        assert_eq!(cfg.scenario, Scenario::Hop);
        let hop = cfg.hop.as_ref().unwrap();
        assert_eq!(hop.n_samples, 200);
        assert_eq!(hop.rtol, 1.0e-8);
        // resolved echo parses back to the identical config
        let echo = cfg.to_resolved_toml();
        let back = ExperimentConfig::from_toml(&echo).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL_HOP.replace("seed = 7", "seed = 7\nbogus_knob = 1");
        assert!(matches!(
            ExperimentConfig::from_toml(&bad),
            Err(SimError::Config(_))
        ));
        let bad2 = MINIMAL_HOP.replace("n_bar = 3000.0", "n_bar = 3000.0\nunknown = 2");
        assert!(ExperimentConfig::from_toml(&bad2).is_err());
    }

    #[test]
    fn missing_physics_parameter_is_an_error() {
        let bad = MINIMAL_HOP.replace("n_bar = 3000.0\n", "");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn scenario_section_mismatch_is_rejected() {
        let bad = MINIMAL_HOP.replace("scenario = \"hop\"", "scenario = \"response_curve\"");
        let err = ExperimentConfig::from_toml(&bad);
        assert!(err.is_err());
        let extra = format!("{}\n[response_curve]\nn_points = 11\n", MINIMAL_HOP);
        assert!(ExperimentConfig::from_toml(&extra).is_err());
    }

    #[test]
    fn inconsistent_omega_z_is_rejected() {
        let bad = MINIMAL_HOP.replace(
            "b_field_gauss = 4.0",
            "b_field_gauss = 4.0\nomega_z_hz = 1.0e6",
        );
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        // consistent value accepted: ω_Z = 1.3996 MHz/G × 4 G / 2
        let good = MINIMAL_HOP.replace(
            "b_field_gauss = 4.0",
            "b_field_gauss = 4.0\nomega_z_hz = 2.7992e6",
        );
        assert!(ExperimentConfig::from_toml(&good).is_ok());
    }
}
