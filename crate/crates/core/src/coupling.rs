//! Spatial mode profile and the long-range coupling graph.
//!
//! A driven cavity mode with vector light shift Ω(x) mediates pairwise
//! spin-exchange couplings
//!
//! ```text
//! χ_ij^± = n̄ Ω_i Ω_j 𝒜(δ_±) / κ,    𝒜(δ) = δκ / (16 [δ² + (κ/2)²]),
//! ```
//!
//! between atoms pinned at positions x_i, x_j, where δ_± are the detunings
//! from the two Raman resonances and n̄ the intracavity photon number. The
//! absorptive counterpart ℬ(δ) of the same complex Lorentzian sets the
//! relaxation rate γ_i = n̄ Ω_i² [ℬ(δ₊) + ℬ(δ₋)] / κ; that rate formula is a
//! model choice of this crate, chosen so that dissipation peaks on the Raman
//! resonances while the coherent coupling vanishes there.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Result, SimError};
use crate::params::PhysicalParams;

/// Dispersive cavity response 𝒜(δ) = δκ / (16 [δ² + (κ/2)²]).
///
/// Odd in δ, extremal at δ = ±κ/2 with values ±1/16.
pub fn dispersive_response(delta: f64, kappa: f64) -> f64 {
    debug_assert!(kappa > 0.0);
    let half = 0.5 * kappa;
    delta * kappa / (16.0 * (delta * delta + half * half))
}

/// Absorptive cavity response ℬ(δ) = (κ/2)κ / (16 [δ² + (κ/2)²]).
///
/// Even in δ, positive, maximal at δ = 0 with value 1/8. Together with the
/// dispersive part it satisfies 𝒜² + ℬ² = (κ²/256)/(δ² + (κ/2)²), the
/// squared modulus of κ / (16 (δ − iκ/2)).
pub fn absorptive_response(delta: f64, kappa: f64) -> f64 {
    debug_assert!(kappa > 0.0);
    let half = 0.5 * kappa;
    half * kappa / (16.0 * (delta * delta + half * half))
}

/// Sampled cavity-axis profile of the coupling and the atomic density.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfile {
    /// Site positions along the cavity axis (μm), strictly increasing.
    pub grid: Vec<f64>,
    /// Per-site vector light shift Ω_i (rad/s per intracavity photon).
    pub omega: Vec<f64>,
    /// Per-site relative atomic density, peak-normalized to 1.
    pub density: Vec<f64>,
}

/// Geometry of a Gaussian stand-in profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianProfileSpec {
    /// Mode waist at cavity center (μm).
    pub waist_um: f64,
    /// Cloud center along the cavity axis, relative to cavity center (μm).
    pub cloud_center_um: f64,
    /// Cloud rms length (μm).
    pub cloud_rms_um: f64,
    /// Peak vector light shift at cavity center, as an ordinary frequency
    /// (Hz per photon); stored profiles carry the angular value.
    pub omega_peak_hz: f64,
    /// Mode wavelength (μm); sets the Rayleigh range of the envelope.
    #[serde(default = "default_wavelength_um")]
    pub wavelength_um: f64,
    /// Number of grid sites across the cloud.
    #[serde(default = "default_n_sites")]
    pub n_sites: usize,
    /// Lower grid edge (μm).
    pub x_min_um: f64,
    /// Upper grid edge (μm).
    pub x_max_um: f64,
    /// Transverse cloud rms size (μm). When set, per-site couplings are
    /// scattered by sampling radial positions in the transverse mode
    /// envelope (see [`ModeProfile::with_transverse_dispersion`]).
    #[serde(default)]
    pub transverse_rms_um: Option<f64>,
}

fn default_wavelength_um() -> f64 {
    0.78
}

fn default_n_sites() -> usize {
    128
}

impl ModeProfile {
    /// Gaussian-mode stand-in profile.
    ///
    /// The on-axis light shift per photon follows the longitudinal envelope
    /// of a fundamental Gaussian mode, Ω(x) = Ω₀ / (1 + (x/x_R)²) with
    /// Rayleigh range x_R = π w₀²/λ, and the density is a peak-normalized
    /// Gaussian. A cloud displaced from cavity center therefore sees a
    /// monotone coupling gradient.
    pub fn gaussian(spec: &GaussianProfileSpec) -> Result<Self> {
        if spec.n_sites == 0 {
            return Err(SimError::InvalidProfile("empty grid".into()));
        }
        if !(spec.waist_um > 0.0) {
            return Err(SimError::InvalidProfile(format!(
                "waist must be > 0, got {}",
                spec.waist_um
            )));
        }
        if !(spec.cloud_rms_um > 0.0) {
            return Err(SimError::InvalidProfile(format!(
                "cloud rms must be > 0, got {}",
                spec.cloud_rms_um
            )));
        }
        if !(spec.x_max_um > spec.x_min_um) && spec.n_sites > 1 {
            return Err(SimError::InvalidProfile(
                "grid upper edge must exceed lower edge".into(),
            ));
        }
        let rayleigh = std::f64::consts::PI * spec.waist_um * spec.waist_um / spec.wavelength_um;
        let n = spec.n_sites;
        let grid: Vec<f64> = if n == 1 {
            vec![0.5 * (spec.x_min_um + spec.x_max_um)]
        } else {
            (0..n)
                .map(|i| {
                    spec.x_min_um
                        + (spec.x_max_um - spec.x_min_um) * i as f64 / (n - 1) as f64
                })
                .collect()
        };
        let omega: Vec<f64> = grid
            .iter()
            .map(|&x| crate::units::hz(spec.omega_peak_hz) / (1.0 + (x / rayleigh).powi(2)))
            .collect();
        let mut density: Vec<f64> = grid
            .iter()
            .map(|&x| {
                let u = (x - spec.cloud_center_um) / spec.cloud_rms_um;
                (-0.5 * u * u).exp()
            })
            .collect();
        let peak = density.iter().cloned().fold(f64::MIN, f64::max);
        for d in &mut density {
            *d /= peak;
        }
        let profile = Self {
            grid,
            omega,
            density,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Profile from measured (x, Ω, ρ) records; density is renormalized to
    /// peak 1.
    pub fn tabulated(records: &[(f64, f64, f64)]) -> Result<Self> {
        if records.is_empty() {
            return Err(SimError::InvalidProfile("empty profile table".into()));
        }
        let mut grid = Vec::with_capacity(records.len());
        let mut omega = Vec::with_capacity(records.len());
        let mut density = Vec::with_capacity(records.len());
        for &(x, w, d) in records {
            if !(x.is_finite() && w.is_finite() && d.is_finite()) {
                return Err(SimError::InvalidProfile(
                    "profile entries must be finite".into(),
                ));
            }
            if d < 0.0 {
                return Err(SimError::InvalidProfile(format!(
                    "negative density {} at x = {}",
                    d, x
                )));
            }
            grid.push(x);
            omega.push(w);
            density.push(d);
        }
        let peak = density.iter().cloned().fold(f64::MIN, f64::max);
        if peak <= 0.0 {
            return Err(SimError::InvalidProfile(
                "density must be positive somewhere".into(),
            ));
        }
        for d in &mut density {
            *d /= peak;
        }
        let profile = Self {
            grid,
            omega,
            density,
        };
        profile.validate()?;
        Ok(profile)
    }

    /// Uniform-coupling profile on an evenly spaced grid: Ω_i = `omega`,
    /// density 1 everywhere. Used by oracle comparisons where every site is
    /// one spin.
    pub fn uniform(n_sites: usize, omega: f64) -> Result<Self> {
        if n_sites == 0 {
            return Err(SimError::InvalidProfile("empty grid".into()));
        }
        Ok(Self {
            grid: (0..n_sites).map(|i| i as f64).collect(),
            omega: vec![omega; n_sites],
            density: vec![1.0; n_sites],
        })
    }

    pub fn n_sites(&self) -> usize {
        self.grid.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(SimError::InvalidProfile("empty grid".into()));
        }
        if self.omega.len() != self.grid.len() || self.density.len() != self.grid.len() {
            return Err(SimError::InvalidProfile(
                "grid, omega and density must have equal lengths".into(),
            ));
        }
        for w in self.grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(SimError::InvalidProfile(format!(
                    "grid must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for &d in &self.density {
            if !(0.0..=1.0 + 1.0e-12).contains(&d) {
                return Err(SimError::InvalidProfile(format!(
                    "density {} outside [0, 1]",
                    d
                )));
            }
        }
        if self.omega.iter().any(|w| !w.is_finite()) {
            return Err(SimError::InvalidProfile("non-finite omega".into()));
        }
        Ok(())
    }

    /// Scatter the per-site couplings by the transverse extent of the cloud.
    ///
    /// Each site is assigned a radial offset drawn from a 2-D Gaussian of rms
    /// `transverse_rms_um` and its coupling is scaled by the transverse mode
    /// envelope exp(−2r²/w₀²) at that offset. Deterministic for a given
    /// `seed`.
    pub fn with_transverse_dispersion(
        &self,
        waist_um: f64,
        transverse_rms_um: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(waist_um > 0.0) || !(transverse_rms_um > 0.0) {
            return Err(SimError::InvalidProfile(
                "waist and transverse rms must be > 0".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = self.clone();
        for w in &mut out.omega {
            let y: f64 = rng.sample::<f64, _>(StandardNormal) * transverse_rms_um;
            let z: f64 = rng.sample::<f64, _>(StandardNormal) * transverse_rms_um;
            let r2 = y * y + z * z;
            *w *= (-2.0 * r2 / (waist_um * waist_um)).exp();
        }
        Ok(out)
    }

    /// Density-weighted mean of Ω² over the profile.
    pub fn mean_omega_sq(&self) -> f64 {
        let wsum: f64 = self.density.iter().sum();
        let s: f64 = self
            .omega
            .iter()
            .zip(&self.density)
            .map(|(w, d)| d * w * w)
            .sum();
        s / wsum
    }

    /// Write the profile as a plain-text table of `x_um omega_rad_per_s
    /// density` rows. Floats are printed in shortest round-trip form so that
    /// reading the table back reproduces the profile exactly.
    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# mode profile")?;
        writeln!(out, "# columns: x_um omega_rad_per_s density")?;
        for i in 0..self.n_sites() {
            writeln!(out, "{} {} {}", self.grid[i], self.omega[i], self.density[i])?;
        }
        Ok(())
    }

    /// Parse a table written by [`Self::write_table`] (or measured data in
    /// the same format). Lines starting with `#` are comments.
    pub fn read_table<R: BufRead>(reader: R) -> Result<Self> {
        let mut records = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(SimError::InvalidProfile(format!(
                    "line {}: expected 3 columns, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|_| {
                    SimError::InvalidProfile(format!("line {}: bad float {:?}", lineno + 1, s))
                })
            };
            records.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
        }
        Self::tabulated(&records)
    }

    pub fn read_table_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_table(std::io::BufReader::new(file))
    }
}

/// Exchange couplings, longitudinal fields and relaxation rates over the
/// site grid.
#[derive(Debug, Clone)]
pub struct CouplingGraph {
    /// χ_ij⁺ (rad/s), symmetric.
    pub chi_plus: Array2<f64>,
    /// χ_ij⁻ (rad/s), symmetric.
    pub chi_minus: Array2<f64>,
    /// χ_ij = χ_ij⁺ + χ_ij⁻ (rad/s).
    pub chi: Array2<f64>,
    /// Longitudinal field h_i = χ_ii⁺ − χ_ii⁻ (rad/s).
    pub h: Array1<f64>,
    /// Per-site relaxation rate γ_i ≥ 0 (rad/s).
    pub gamma: Array1<f64>,
}

impl CouplingGraph {
    pub fn n_sites(&self) -> usize {
        self.h.len()
    }

    /// Zero out the self-couplings χ_ii^± (and with them h_i).
    ///
    /// Useful for cross-engine comparisons where the mean-field engine, which
    /// keeps only the h_i part of the diagonal, must realize exactly the same
    /// Hamiltonian as the exact oracle.
    pub fn without_self_coupling(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.n_sites() {
            out.chi_plus[[i, i]] = 0.0;
            out.chi_minus[[i, i]] = 0.0;
            out.chi[[i, i]] = 0.0;
            out.h[i] = 0.0;
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_sites();
        let square = |m: &Array2<f64>| m.nrows() == n && m.ncols() == n;
        if !(square(&self.chi_plus) && square(&self.chi_minus) && square(&self.chi)) {
            return Err(SimError::InvalidProfile(
                "coupling matrices must be square and consistent".into(),
            ));
        }
        for i in 0..n {
            if self.gamma[i] < 0.0 {
                return Err(SimError::InvalidProfile(format!(
                    "gamma[{}] = {} < 0",
                    i, self.gamma[i]
                )));
            }
            for j in 0..n {
                if (self.chi_plus[[i, j]] - self.chi_plus[[j, i]]).abs() > 0.0
                    || (self.chi_minus[[i, j]] - self.chi_minus[[j, i]]).abs() > 0.0
                {
                    return Err(SimError::InvalidProfile("couplings must be symmetric".into()));
                }
                let sum = self.chi_plus[[i, j]] + self.chi_minus[[i, j]];
                if sum != self.chi[[i, j]] {
                    return Err(SimError::InvalidProfile(
                        "chi must equal chi_plus + chi_minus exactly".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Build the coupling graph for a profile and drive configuration:
/// χ_ij^± = n̄ Ω_i Ω_j 𝒜(δ_±)/κ and γ_i = n̄ Ω_i² [ℬ(δ₊) + ℬ(δ₋)]/κ.
pub fn build_coupling_graph(profile: &ModeProfile, p: &PhysicalParams) -> Result<CouplingGraph> {
    profile.validate()?;
    let n = profile.n_sites();
    let (delta_p, delta_m) = p.raman_detunings();
    let a_plus = dispersive_response(delta_p, p.kappa);
    let a_minus = dispersive_response(delta_m, p.kappa);
    let b_sum = absorptive_response(delta_p, p.kappa) + absorptive_response(delta_m, p.kappa);
    let scale = p.n_bar / p.kappa;

    let mut chi_plus = Array2::<f64>::zeros((n, n));
    let mut chi_minus = Array2::<f64>::zeros((n, n));
    let mut chi = Array2::<f64>::zeros((n, n));
    // fill the upper triangle and mirror so symmetry is bit-exact
    for i in 0..n {
        for j in i..n {
            let pair = scale * profile.omega[i] * profile.omega[j];
            let cp = pair * a_plus;
            let cm = pair * a_minus;
            chi_plus[[i, j]] = cp;
            chi_plus[[j, i]] = cp;
            chi_minus[[i, j]] = cm;
            chi_minus[[j, i]] = cm;
            chi[[i, j]] = cp + cm;
            chi[[j, i]] = cp + cm;
        }
    }
    let h = Array1::from_iter((0..n).map(|i| chi_plus[[i, i]] - chi_minus[[i, i]]));
    let gamma = Array1::from_iter(
        profile
            .omega
            .iter()
            .map(|&w| scale * w * w * b_sum),
    );
    let graph = CouplingGraph {
        chi_plus,
        chi_minus,
        chi,
        h,
        gamma,
    };
    graph.validate()?;
    Ok(graph)
}
