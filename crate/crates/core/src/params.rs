//! Physical constants of the cavity-atom system and derived quantities.
//!
//! [`PhysicalParams`] is validated once at construction and then shared
//! immutably by every engine. All frequencies are angular (rad/s); see
//! [`crate::units`].

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::units::MU_B_OVER_HBAR;

/// Relative tolerance for the `omega_z` ↔ `b_field` consistency check.
const OMEGA_Z_REL_TOL: f64 = 1.0e-9;

/// Validated cavity and atom constants.
///
/// Fields:
/// * `kappa` — cavity linewidth κ (rad/s),
/// * `g` — single-atom coupling, half the vacuum Rabi frequency (rad/s),
/// * `gamma_atom` — atomic excited-state linewidth Γ (rad/s),
/// * `delta_atom` — drive detuning from the atomic transition Δ (rad/s, signed),
/// * `omega_z` — linear Zeeman splitting ω_Z = μ_B B / (2ħ) (rad/s),
/// * `b_field` — magnetic field B (gauss),
/// * `delta_c` — drive detuning from the dressed cavity resonance δ_c (rad/s),
/// * `n_bar` — mean intracavity photon number,
/// * `q_over_b2` — quadratic Zeeman coefficient q/B² (rad/s per gauss²),
/// * `n_atoms` — atom number N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub kappa: f64,
    pub g: f64,
    pub gamma_atom: f64,
    pub delta_atom: f64,
    pub omega_z: f64,
    pub b_field: f64,
    pub delta_c: f64,
    pub n_bar: f64,
    pub q_over_b2: f64,
    pub n_atoms: f64,
}

/// Unvalidated input for [`PhysicalParams`]. `omega_z` may be omitted, in
/// which case it is derived from the magnetic field.
#[derive(Debug, Clone, Default)]
pub struct ParamsInput {
    pub kappa: f64,
    pub g: f64,
    pub gamma_atom: f64,
    pub delta_atom: f64,
    pub omega_z: Option<f64>,
    pub b_field: f64,
    pub delta_c: f64,
    pub n_bar: f64,
    pub q_over_b2: f64,
    pub n_atoms: f64,
}

impl PhysicalParams {
    /// Validate raw inputs into a `PhysicalParams`.
    ///
    /// If `omega_z` is given explicitly it must agree with
    /// `MU_B_OVER_HBAR * b_field / 2` to one part in 10⁹; otherwise it is
    /// derived from the field.
    pub fn new(input: ParamsInput) -> Result<Self> {
        let err = |m: String| Err(SimError::InvalidParams(m));
        if !(input.kappa > 0.0) {
            return err(format!("kappa must be > 0, got {}", input.kappa));
        }
        if !(input.gamma_atom > 0.0) {
            return err(format!("gamma_atom must be > 0, got {}", input.gamma_atom));
        }
        if !(input.g > 0.0) {
            return err(format!("g must be > 0, got {}", input.g));
        }
        if !(input.n_bar >= 0.0) {
            return err(format!("n_bar must be >= 0, got {}", input.n_bar));
        }
        if !(input.n_atoms >= 1.0) {
            return err(format!("n_atoms must be >= 1, got {}", input.n_atoms));
        }
        if !(input.b_field >= 0.0) {
            return err(format!("b_field must be >= 0, got {}", input.b_field));
        }
        let derived = MU_B_OVER_HBAR * input.b_field / 2.0;
        let omega_z = match input.omega_z {
            None => derived,
            Some(w) => {
                let scale = derived.abs().max(w.abs()).max(f64::MIN_POSITIVE);
                if (w - derived).abs() > OMEGA_Z_REL_TOL * scale {
                    return err(format!(
                        "omega_z = {} rad/s inconsistent with b_field = {} G \
                         (expected {} rad/s)",
                        w, input.b_field, derived
                    ));
                }
                w
            }
        };
        let fields = [
            input.kappa,
            input.g,
            input.gamma_atom,
            input.delta_atom,
            omega_z,
            input.b_field,
            input.delta_c,
            input.n_bar,
            input.q_over_b2,
            input.n_atoms,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return err("all parameters must be finite".into());
        }
        Ok(Self {
            kappa: input.kappa,
            g: input.g,
            gamma_atom: input.gamma_atom,
            delta_atom: input.delta_atom,
            omega_z,
            b_field: input.b_field,
            delta_c: input.delta_c,
            n_bar: input.n_bar,
            q_over_b2: input.q_over_b2,
            n_atoms: input.n_atoms,
        })
    }

    /// Single-atom cooperativity η = 4g²/(κΓ).
    pub fn cooperativity(&self) -> f64 {
        4.0 * self.g * self.g / (self.kappa * self.gamma_atom)
    }

    /// Detunings (δ₊, δ₋) = (δ_c − ω_Z, δ_c + ω_Z) of the drive from the two
    /// Raman resonances.
    pub fn raman_detunings(&self) -> (f64, f64) {
        (self.delta_c - self.omega_z, self.delta_c + self.omega_z)
    }

    /// Quadratic Zeeman shift q = (q/B²)·B² (rad/s).
    pub fn quadratic_zeeman(&self) -> f64 {
        self.q_over_b2 * self.b_field * self.b_field
    }

    /// Detuning scale √(Nη)·κ at which collective cavity decay and
    /// spontaneous emission are balanced.
    ///
    /// The proportionality constant is fixed to 1 by convention; only the
    /// scaling in N, η and κ is meaningful.
    pub fn optimal_detuning(&self) -> f64 {
        (self.n_atoms * self.cooperativity()).sqrt() * self.kappa
    }
}
