//! Three-bosonic-mode pair-creation dynamics.
//!
//! In the uniform-coupling limit the spin-exchange Hamiltonian restricted to
//! the Zeeman populations acts on three bosonic modes a, b, c (m = +1, −1, 0):
//!
//! ```text
//! H = 2χ c² a†b† + h.c. + (2χ c†c + q + χ)(a†a + b†b + 1),
//! ```
//!
//! so a large m = 0 population behaves as the pump of a parametric
//! amplifier. The pump is unstable against pair production when the
//! collective interaction 4N₀χ exceeds the quadratic Zeeman shift q in
//! magnitude with opposite sign, and in the undepleted-pump window
//! |χ| ≪ q ≪ N₀|χ| the side-mode population grows as
//!
//! ```text
//! N_s(t) = [4N₀χ/λ]² (N_s(0)+1)(cosh λt − 1) + N_s(0),  λ = 4√(N₀ q |χ|).
//! ```
//!
//! Beyond the analytic law this module integrates semiclassical trajectories
//! with vacuum noise in the initial conditions (truncated-Wigner sampling)
//! to estimate fluctuation statistics.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{dispersive_response, ModeProfile};
use crate::error::{Result, SimError};
use crate::integrate::{integrate, AdaptiveOptions};
use crate::params::PhysicalParams;

/// Parameters of the uniform three-mode model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeModeParams {
    /// Uniform exchange coupling χ (rad/s, signed).
    pub chi: f64,
    /// Quadratic Zeeman shift q (rad/s, signed).
    pub q: f64,
    /// Initial pump population N₀ in m = 0.
    pub n0: f64,
    /// Initial side-mode population (state-preparation imperfection),
    /// split equally and incoherently between the two side modes.
    pub ns0: f64,
}

impl ThreeModeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n0 >= 0.0) || !(self.ns0 >= 0.0) {
            return Err(SimError::InvalidParams(format!(
                "populations must be non-negative: n0 = {}, ns0 = {}",
                self.n0, self.ns0
            )));
        }
        Ok(())
    }

    /// Growth rate λ = 4√(N₀ |q| |χ|).
    pub fn growth_rate(&self) -> f64 {
        4.0 * (self.n0 * self.q.abs() * self.chi.abs()).sqrt()
    }

    /// Prefactor [4N₀χ/λ]² = N₀|χ|/|q| of the growth law.
    pub fn prefactor(&self) -> f64 {
        let lambda = self.growth_rate();
        (4.0 * self.n0 * self.chi / lambda).powi(2)
    }

    /// Uniform coupling derived from a drive configuration:
    /// χ = scale · n̄ ⟨Ω²⟩ 𝒜(δ₋) / κ with ⟨Ω²⟩ the density-weighted mean
    /// squared light shift. The rms-coupling mapping is approximate for
    /// inhomogeneous clouds; `scale` absorbs that (an effective-coupling
    /// scale factor, 1.0 for the bare mapping).
    pub fn from_drive(
        p: &PhysicalParams,
        profile: &ModeProfile,
        scale: f64,
        ns0: f64,
    ) -> Result<Self> {
        let (_, delta_m) = p.raman_detunings();
        let chi = scale * p.n_bar * profile.mean_omega_sq() * dispersive_response(delta_m, p.kappa)
            / p.kappa;
        let params = Self {
            chi,
            q: p.quadratic_zeeman(),
            n0: p.n_atoms,
            ns0,
        };
        params.validate()?;
        Ok(params)
    }
}

/// Outcome of the pair-production stability test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
}

/// Pair production is unstable when 4N₀χ and q have opposite signs and
/// |4N₀χ| > |q|. At q = 0 any nonzero coupling with a populated pump is
/// classified unstable (boundary convention).
pub fn instability_condition(p: &ThreeModeParams) -> Stability {
    let drive = 4.0 * p.n0 * p.chi;
    if p.q == 0.0 {
        return if drive != 0.0 {
            Stability::Unstable
        } else {
            Stability::Stable
        };
    }
    if drive * p.q < 0.0 && drive.abs() > p.q.abs() {
        Stability::Unstable
    } else {
        Stability::Stable
    }
}

/// Undepleted-pump growth law at time `t`.
///
/// Only meaningful in the unstable window; errors when λ is undefined
/// (q·N₀·χ = 0).
pub fn analytic_growth(p: &ThreeModeParams, t: f64) -> Result<f64> {
    p.validate()?;
    if p.q * p.n0 * p.chi == 0.0 {
        return Err(SimError::InvalidParams(
            "growth rate undefined: q, N0 and chi must all be nonzero".into(),
        ));
    }
    let lambda = p.growth_rate();
    Ok(p.prefactor() * (p.ns0 + 1.0) * ((lambda * t).cosh() - 1.0) + p.ns0)
}

/// Semiclassical trajectory ensemble of the three complex mode amplitudes.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    /// Sample times (s).
    pub times: Vec<f64>,
    /// `amplitudes[traj][sample]` = (a, b, c).
    pub amplitudes: Vec<Vec<[C64; 3]>>,
    /// Master seed the ensemble derives from.
    pub seed: u64,
}

impl TrajectoryEnsemble {
    pub fn n_traj(&self) -> usize {
        self.amplitudes.len()
    }
}

// Trajectory equations from the Weyl symbol of the Hamiltonian,
//
//   H_W = 2χ(c²a*b* + c.c.) + (2χ|c|² + q)(|a|² + |b|²) + const,
//
// rather than from naive classical substitution: the operator-ordering
// pieces of H (the +χ detuning and the c†c normal ordering) are carried by
// the half-quantum widths of the Wigner samples, so keeping them in the
// drift terms would double-count them. With this form the sampled linearized
// dynamics reproduce the quantum pair-creation rate exactly.
fn eom(y: &[f64], dy: &mut [f64], chi: f64, q: f64) {
    let a = C64::new(y[0], y[1]);
    let b = C64::new(y[2], y[3]);
    let c = C64::new(y[4], y[5]);
    let omega = 2.0 * chi * c.norm_sqr() + q;
    let c2 = c * c;
    // i ȧ = ∂H_W/∂a* = 2χ c² b* + ω a, and b likewise
    let da = -C64::i() * (2.0 * chi * c2 * b.conj() + omega * a);
    let db = -C64::i() * (2.0 * chi * c2 * a.conj() + omega * b);
    // i ċ = ∂H_W/∂c* = 4χ c* a b + 2χ (|a|² + |b|²) c
    let dc = -C64::i()
        * (4.0 * chi * c.conj() * a * b + 2.0 * chi * (a.norm_sqr() + b.norm_sqr()) * c);
    dy[0] = da.re;
    dy[1] = da.im;
    dy[2] = db.re;
    dy[3] = db.im;
    dy[4] = dc.re;
    dy[5] = dc.im;
}

/// Statistical model of the initial pump mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpSampling {
    /// Coherent pump: c = √N₀ + half-quantum Gaussian noise. Carries the
    /// √N₀ number uncertainty of a coherent state; the default.
    Coherent,
    /// Number-state pump: |c|² pinned to N₀ with a uniformly random phase.
    /// Matches the Fock-pump exact oracle, which has no pump-number noise.
    NumberState,
}

/// Integrate `n_traj` truncated-Wigner trajectories of the classical
/// equations of motion derived from the three-mode Hamiltonian.
///
/// Initial conditions per trajectory: the pump is drawn per `pump` (a
/// coherent state by default), the side modes carry vacuum noise plus a
/// thermal seed of ns0/2 quanta each (half-quantum variance per quadrature,
/// symmetrically ordered). Trajectory k draws its noise from stream k of a
/// counter-based generator seeded with `seed`, so results are deterministic
/// and independent of scheduling.
pub fn semiclassical_evolve(
    p: &ThreeModeParams,
    n_traj: usize,
    sample_times: &[f64],
    seed: u64,
    pump: PumpSampling,
) -> Result<TrajectoryEnsemble> {
    p.validate()?;
    if n_traj < 2 {
        return Err(SimError::InvalidParams(format!(
            "need at least 2 trajectories, got {}",
            n_traj
        )));
    }
    let opts = AdaptiveOptions {
        rtol: 1.0e-10,
        atol: 1.0e-12,
        ..Default::default()
    };
    // per-quadrature std: vacuum 1/2, side modes broadened by the thermal seed
    let sigma_pump = 0.5;
    let sigma_side = 0.5 * (p.ns0 + 1.0).sqrt();
    let results: Result<Vec<Vec<[C64; 3]>>> = (0..n_traj)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut draw = || -> f64 { rng.sample(StandardNormal) };
            let side = [
                sigma_side * draw(),
                sigma_side * draw(),
                sigma_side * draw(),
                sigma_side * draw(),
            ];
            let (c_re, c_im) = match pump {
                PumpSampling::Coherent => {
                    (p.n0.sqrt() + sigma_pump * draw(), sigma_pump * draw())
                }
                PumpSampling::NumberState => {
                    let phase = rng.random::<f64>() * crate::units::TWO_PI;
                    let r = p.n0.sqrt();
                    (r * phase.cos(), r * phase.sin())
                }
            };
            let y0 = [side[0], side[1], side[2], side[3], c_re, c_im];
            let samples = integrate(
                |_t, y, dy| eom(y, dy, p.chi, p.q),
                0.0,
                &y0,
                sample_times,
                &opts,
            )?;
            Ok(samples
                .iter()
                .map(|y| {
                    [
                        C64::new(y[0], y[1]),
                        C64::new(y[2], y[3]),
                        C64::new(y[4], y[5]),
                    ]
                })
                .collect())
        })
        .collect();
    Ok(TrajectoryEnsemble {
        times: sample_times.to_vec(),
        amplitudes: results?,
        seed,
    })
}

/// Moments of the side-mode populations at one sample time.
#[derive(Debug, Clone, Copy)]
pub struct MomentRecord {
    pub t: f64,
    /// Mean side-mode population ⟨a†a + b†b⟩ (symmetric-ordering corrected).
    pub ns_mean: f64,
    /// Side-mode population fluctuation: per-mode standard deviations added
    /// in quadrature, √(Var n_a + Var n_b), plus the detection-noise floor.
    pub ns_std: f64,
    /// Mean population difference ⟨a†a − b†b⟩.
    pub fz_mean: f64,
    /// Standard deviation of the population difference across trajectories
    /// (sensitive to the pair correlation), plus the detection-noise floor.
    pub fz_std: f64,
}

/// Ensemble means and fluctuations vs time.
///
/// `detection_noise` is an additive noise floor (in atoms) applied in
/// quadrature to both fluctuation channels after the dynamics; it models
/// technical state-preparation and detection noise and never enters the
/// equations of motion.
pub fn moments(ensemble: &TrajectoryEnsemble, detection_noise: f64) -> Vec<MomentRecord> {
    let n_traj = ensemble.n_traj();
    assert!(n_traj >= 2, "moments need at least 2 trajectories");
    let n_t = ensemble.times.len();
    let mut out = Vec::with_capacity(n_t);
    for s in 0..n_t {
        let mut na = Vec::with_capacity(n_traj);
        let mut nb = Vec::with_capacity(n_traj);
        for traj in &ensemble.amplitudes {
            let [a, b, _c] = traj[s];
            na.push(a.norm_sqr());
            nb.push(b.norm_sqr());
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var =
            |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
        let ma = mean(&na);
        let mb = mean(&nb);
        let va = var(&na, ma);
        let vb = var(&nb, mb);
        let fz: Vec<f64> = na.iter().zip(&nb).map(|(x, y)| x - y).collect();
        let mfz = mean(&fz);
        let vfz = var(&fz, mfz);
        out.push(MomentRecord {
            t: ensemble.times[s],
            // −1/2 per mode converts symmetric ordering to occupations
            ns_mean: ma + mb - 1.0,
            ns_std: (va + vb + detection_noise * detection_noise).sqrt(),
            fz_mean: mfz,
            fz_std: (vfz + detection_noise * detection_noise).sqrt(),
        });
    }
    out
}

/// Result of fitting the growth law to a population time series.
#[derive(Debug, Clone, Copy)]
pub struct GrowthFit {
    /// Fitted growth rate λ (rad/s).
    pub lambda: f64,
    /// 1σ confidence half-width on λ.
    pub lambda_sigma: f64,
    /// Fitted initial side-mode population.
    pub ns0: f64,
    /// 1σ confidence half-width on ns0.
    pub ns0_sigma: f64,
    /// Residual sum of squares at the optimum.
    pub sse: f64,
}

fn growth_model(lambda: f64, q: f64, ns0: f64, t: f64) -> f64 {
    let pref = lambda * lambda / (16.0 * q * q);
    pref * (ns0 + 1.0) * ((lambda * t).cosh() - 1.0) + ns0
}

fn growth_sse(lambda: f64, q: f64, series: &[(f64, f64)]) -> (f64, f64) {
    // model is linear in ns0: N_s = u + ns0 (u + 1), u = pref (cosh λt − 1)
    let pref = lambda * lambda / (16.0 * q * q);
    let mut num = 0.0;
    let mut den = 0.0;
    for &(t, y) in series {
        let u = pref * ((lambda * t).cosh() - 1.0);
        num += (u + 1.0) * (y - u);
        den += (u + 1.0) * (u + 1.0);
    }
    let ns0 = (num / den).max(0.0);
    let mut sse = 0.0;
    for &(t, y) in series {
        let r = y - growth_model(lambda, q, ns0, t);
        sse += r * r;
    }
    (sse, ns0)
}

/// Least-squares fit of the undepleted-pump growth law to (t, N_s) samples.
///
/// The prefactor is tied to the fitted rate through the known quadratic
/// Zeeman shift `q` ([4N₀χ/λ]² = λ²/(16q²)), leaving (λ, N_s(0)) free. The
/// series must show actual growth; a series never rising more than one count
/// above its start is rejected.
pub fn fit_growth(series: &[(f64, f64)], q: f64) -> Result<GrowthFit> {
    if series.len() < 4 {
        return Err(SimError::FitFailure(
            "need at least 4 samples to fit the growth law".into(),
        ));
    }
    if q == 0.0 {
        return Err(SimError::FitFailure(
            "q must be nonzero to tie the growth-law prefactor".into(),
        ));
    }
    let y0 = series[0].1;
    let y_max = series.iter().map(|&(_, y)| y).fold(f64::MIN, f64::max);
    if y_max < y0 + 1.0 {
        return Err(SimError::FitFailure(format!(
            "no growth signal: max {} never exceeds start {} by one count",
            y_max, y0
        )));
    }
    // rough rate guess from the exponential tail
    let t_span = series.last().unwrap().0 - series[0].0;
    if !(t_span > 0.0) {
        return Err(SimError::FitFailure("zero time span".into()));
    }
    let i_mid = series
        .iter()
        .position(|&(_, y)| y > y0 + 1.0)
        .unwrap_or(series.len() / 2)
        .min(series.len() - 2);
    let (t_a, y_a) = series[i_mid];
    let (t_b, y_b) = *series.last().unwrap();
    let mut guess = if y_b > y_a && t_b > t_a {
        ((y_b - y0 + 1.0) / (y_a - y0 + 1.0).max(1.0e-9)).ln() / (t_b - t_a)
    } else {
        1.0 / t_span
    };
    if !guess.is_finite() || guess <= 0.0 {
        guess = 1.0 / t_span;
    }
    // coarse log grid, then golden-section refinement
    let mut best = (f64::INFINITY, guess, 0.0);
    for k in 0..120 {
        let lambda = guess * 10.0_f64.powf(-1.5 + 3.0 * k as f64 / 119.0);
        let (sse, ns0) = growth_sse(lambda, q, series);
        if sse < best.0 {
            best = (sse, lambda, ns0);
        }
    }
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (best.1 / 1.3, best.1 * 1.3);
    for _ in 0..80 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        let s1 = growth_sse(m1, q, series).0;
        let s2 = growth_sse(m2, q, series).0;
        if s1 < s2 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let lambda = 0.5 * (lo + hi);
    let (sse, ns0) = growth_sse(lambda, q, series);

    // 1σ intervals from the Gauss–Newton covariance at the optimum
    let n = series.len();
    let dof = (n as f64 - 2.0).max(1.0);
    let sigma_sq = sse / dof;
    let eps_l = 1.0e-6 * lambda.max(1.0e-300);
    let eps_n = 1.0e-6;
    let mut jtj = [[0.0_f64; 2]; 2];
    for &(t, _) in series {
        let dl =
            (growth_model(lambda + eps_l, q, ns0, t) - growth_model(lambda - eps_l, q, ns0, t))
                / (2.0 * eps_l);
        let dn = (growth_model(lambda, q, ns0 + eps_n, t) - growth_model(lambda, q, ns0, t)) / eps_n;
        jtj[0][0] += dl * dl;
        jtj[0][1] += dl * dn;
        jtj[1][0] += dl * dn;
        jtj[1][1] += dn * dn;
    }
    let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
    let (lambda_sigma, ns0_sigma) = if det > 0.0 {
        (
            (sigma_sq * jtj[1][1] / det).sqrt(),
            (sigma_sq * jtj[0][0] / det).sqrt(),
        )
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(GrowthFit {
        lambda,
        lambda_sigma,
        ns0,
        ns0_sigma,
        sse,
    })
}
