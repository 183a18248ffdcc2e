//! Fock-space evolution of the three-mode pair-creation model.
//!
//! The basis spans occupation triples (n_a, n_b, n_c) with fixed total
//! n_a + n_b + n_c = N, optionally truncated per side mode. The Hamiltonian
//! conserves both the total and F_z = n_a − n_b exactly, so it is
//! block-diagonal; from the pump state (0, 0, N) the dynamics never leaves
//! the n_a = n_b ladder, and the engine verifies that as an invariant.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use std::collections::HashMap;

use crate::error::{Result, SimError};
use crate::linalg::expm;
use crate::spinmixing::ThreeModeParams;

/// Largest pump population the dense engine accepts.
pub const MAX_TOTAL: u32 = 64;

/// Occupation-triple basis of one total-number block.
#[derive(Debug, Clone)]
pub struct FockBasis3 {
    pub n_total: u32,
    pub cutoff: u32,
    /// Basis states (n_a, n_b, n_c), n_a + n_b + n_c = n_total.
    pub states: Vec<(u32, u32, u32)>,
    index: HashMap<(u32, u32, u32), usize>,
}

impl FockBasis3 {
    /// Enumerate the block with per-side-mode cutoff.
    pub fn new(n_total: u32, cutoff: u32) -> Result<Self> {
        if n_total > MAX_TOTAL {
            return Err(SimError::ResourceLimit(format!(
                "dense Fock evolution supports N ≤ {}, got {}",
                MAX_TOTAL, n_total
            )));
        }
        let mut states = Vec::new();
        let mut index = HashMap::new();
        for na in 0..=n_total.min(cutoff) {
            for nb in 0..=(n_total - na).min(cutoff) {
                let nc = n_total - na - nb;
                index.insert((na, nb, nc), states.len());
                states.push((na, nb, nc));
            }
        }
        Ok(Self {
            n_total,
            cutoff,
            states,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index_of(&self, state: (u32, u32, u32)) -> Option<usize> {
        self.index.get(&state).copied()
    }

    /// Amplitude vector for the pure pump state (0, 0, N).
    pub fn pump_state(&self) -> Array1<C64> {
        let mut v = Array1::<C64>::zeros(self.dim());
        let k = self
            .index_of((0, 0, self.n_total))
            .expect("pump state in basis");
        v[k] = C64::new(1.0, 0.0);
        v
    }
}

/// Build the three-mode Hamiltonian on the block:
/// diagonal (2χ n_c + q + χ)(n_a + n_b + 1) plus the pair term connecting
/// (n_a, n_b, n_c) ↔ (n_a+1, n_b+1, n_c−2) with amplitude
/// 2χ √((n_a+1)(n_b+1) n_c (n_c−1)).
pub fn build_threemode_hamiltonian(p: &ThreeModeParams, basis: &FockBasis3) -> Array2<C64> {
    let d = basis.dim();
    let mut h = Array2::<C64>::zeros((d, d));
    for (k, &(na, nb, nc)) in basis.states.iter().enumerate() {
        let diag = (2.0 * p.chi * nc as f64 + p.q + p.chi) * (na as f64 + nb as f64 + 1.0);
        h[[k, k]] = C64::new(diag, 0.0);
        if nc >= 2 {
            if let Some(k2) = basis.index_of((na + 1, nb + 1, nc - 2)) {
                let amp = 2.0
                    * p.chi
                    * ((na as f64 + 1.0) * (nb as f64 + 1.0) * nc as f64 * (nc as f64 - 1.0))
                        .sqrt();
                h[[k2, k]] = C64::new(amp, 0.0);
                h[[k, k2]] = C64::new(amp, 0.0);
            }
        }
    }
    h
}

/// Population moments of an evolved Fock state.
#[derive(Debug, Clone, Copy)]
pub struct FockMoments {
    pub t: f64,
    /// ⟨n_a + n_b⟩.
    pub ns_mean: f64,
    /// √(Var n_a + Var n_b): per-mode fluctuations added in quadrature.
    pub ns_std: f64,
    /// ⟨n_a − n_b⟩.
    pub fz_mean: f64,
    /// √Var(n_a − n_b), sensitive to the pair correlation.
    pub fz_std: f64,
}

fn moments_of(state: &Array1<C64>, basis: &FockBasis3, t: f64) -> FockMoments {
    let mut na_m = 0.0;
    let mut nb_m = 0.0;
    let mut na2 = 0.0;
    let mut nb2 = 0.0;
    let mut fz_m = 0.0;
    let mut fz2 = 0.0;
    for (k, &(na, nb, _)) in basis.states.iter().enumerate() {
        let p = state[k].norm_sqr();
        let (na, nb) = (na as f64, nb as f64);
        na_m += p * na;
        nb_m += p * nb;
        na2 += p * na * na;
        nb2 += p * nb * nb;
        fz_m += p * (na - nb);
        fz2 += p * (na - nb) * (na - nb);
    }
    let var_a = (na2 - na_m * na_m).max(0.0);
    let var_b = (nb2 - nb_m * nb_m).max(0.0);
    let var_fz = (fz2 - fz_m * fz_m).max(0.0);
    FockMoments {
        t,
        ns_mean: na_m + nb_m,
        ns_std: (var_a + var_b).sqrt(),
        fz_mean: fz_m,
        fz_std: var_fz.sqrt(),
    }
}

/// Evolve the pump state (0, 0, N₀) exactly and return population moments at
/// the sample times.
///
/// Errors if probability accumulates on the side-mode cutoff boundary
/// (truncation leakage) beyond 10⁻⁸.
pub fn exact_pair_creation(
    p: &ThreeModeParams,
    cutoff: u32,
    sample_times: &[f64],
) -> Result<Vec<FockMoments>> {
    p.validate()?;
    let n_total = p.n0.round() as u32;
    if (p.n0 - n_total as f64).abs() > 1.0e-9 {
        return Err(SimError::InvalidParams(format!(
            "exact evolution needs an integer pump population, got {}",
            p.n0
        )));
    }
    let basis = FockBasis3::new(n_total, cutoff)?;
    let h = build_threemode_hamiltonian(p, &basis);
    let states = evolve_block(&basis, &h, sample_times)?;
    let mut out = Vec::with_capacity(states.len());
    for (state, &t) in states.iter().zip(sample_times) {
        // truncation check: probability on the boundary states
        if cutoff < n_total {
            let mut boundary = 0.0;
            for (k, &(na, nb, _)) in basis.states.iter().enumerate() {
                if na == cutoff || nb == cutoff {
                    boundary += state[k].norm_sqr();
                }
            }
            if boundary > 1.0e-8 {
                return Err(SimError::CutoffLeakage(format!(
                    "probability {:.3e} on the cutoff boundary at t = {}",
                    boundary, t
                )));
            }
        }
        out.push(moments_of(state, &basis, t));
    }
    Ok(out)
}

/// Propagate a block state by exp(−iHΔt) with a cached propagator.
pub fn evolve_block(
    basis: &FockBasis3,
    hamiltonian: &Array2<C64>,
    sample_times: &[f64],
) -> Result<Vec<Array1<C64>>> {
    let mut cache: Vec<(f64, Array2<C64>)> = Vec::new();
    let mut psi = basis.pump_state();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        let dt = ts - t;
        if dt < 0.0 {
            return Err(SimError::InvalidParams(
                "sample times must be non-decreasing".into(),
            ));
        }
        if dt > 0.0 {
            let u = match cache.iter().find(|(d, _)| (*d - dt).abs() <= 1.0e-15 * dt) {
                Some((_, u)) => u.clone(),
                None => {
                    let gen = hamiltonian.mapv(|z| z * C64::new(0.0, -dt));
                    let u = expm(&gen);
                    cache.push((dt, u.clone()));
                    u
                }
            };
            psi = u.dot(&psi);
            t = ts;
        }
        out.push(psi.clone());
    }
    Ok(out)
}

/// Largest amplitude outside the n_a = n_b ladder reachable from the pump
/// state. Exactly zero when the block structure is respected.
pub fn fz_sector_leakage(state: &Array1<C64>, basis: &FockBasis3) -> f64 {
    basis
        .states
        .iter()
        .enumerate()
        .filter(|(_, &(na, nb, _))| na != nb)
        .map(|(k, _)| state[k].norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinmixing::{
        analytic_growth, fit_growth, instability_condition, moments, semiclassical_evolve,
        PumpSampling, Stability,
    };
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn unstable_small() -> ThreeModeParams {
        ThreeModeParams {
            chi: -1.0,
            q: 8.0,
            n0: 20.0,
            ns0: 0.0,
        }
    }

    #[test]
    fn basis_enumerates_the_block() {
        let b = FockBasis3::new(4, 4).unwrap();
        // triangle numbers: (N+1)(N+2)/2 states
        assert_eq!(b.dim(), 15);
        for &(na, nb, nc) in &b.states {
            assert_eq!(na + nb + nc, 4);
        }
        assert!(b.index_of((0, 0, 4)).is_some());
        assert!(b.index_of((5, 0, 0)).is_none());
    }

    #[test]
    fn zero_coupling_is_diagonal() {
        let p = ThreeModeParams {
            chi: 0.0,
            q: 3.0,
            n0: 6.0,
            ns0: 0.0,
        };
        let basis = FockBasis3::new(6, 6).unwrap();
        let h = build_threemode_hamiltonian(&p, &basis);
        for r in 0..basis.dim() {
            for c in 0..basis.dim() {
                if r != c {
                    assert_eq!(h[[r, c]], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn pair_matrix_element_formula() {
        let p = ThreeModeParams {
            chi: -0.7,
            q: 2.0,
            n0: 12.0,
            ns0: 0.0,
        };
        let basis = FockBasis3::new(12, 12).unwrap();
        let h = build_threemode_hamiltonian(&p, &basis);
        for &(na, nb, nc) in &basis.states {
            if nc >= 2 {
                let from = basis.index_of((na, nb, nc)).unwrap();
                let to = basis.index_of((na + 1, nb + 1, nc - 2)).unwrap();
                let expect = 2.0
                    * p.chi
                    * ((na as f64 + 1.0) * (nb as f64 + 1.0) * nc as f64 * (nc as f64 - 1.0))
                        .sqrt();
                assert_relative_eq!(h[[to, from]].re, expect, max_relative = 1e-14);
                assert_relative_eq!(h[[from, to]].re, expect, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn hamiltonian_commutes_with_population_difference() {
        let p = unstable_small();
        let basis = FockBasis3::new(10, 10).unwrap();
        let h = build_threemode_hamiltonian(&p, &basis);
        let d = basis.dim();
        let mut fz = Array2::<C64>::zeros((d, d));
        for (k, &(na, nb, _)) in basis.states.iter().enumerate() {
            fz[[k, k]] = C64::new(na as f64 - nb as f64, 0.0);
        }
        let comm = crate::linalg::commutator(&h, &fz);
        assert_eq!(crate::linalg::max_abs(&comm), 0.0);
    }

    #[test]
    fn pump_state_norm_and_sector_are_preserved() {
        let p = unstable_small();
        let lambda = p.growth_rate();
        let basis = FockBasis3::new(20, 20).unwrap();
        let h = build_threemode_hamiltonian(&p, &basis);
        let times: Vec<f64> = (0..6).map(|i| 0.4 * i as f64 / lambda).collect();
        let states = evolve_block(&basis, &h, &times).unwrap();
        for s in &states {
            let norm: f64 = s.iter().map(|z| z.norm_sqr()).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-9);
            // pair creation cannot leave the n_a = n_b ladder
            assert_eq!(fz_sector_leakage(s, &basis), 0.0);
        }
    }

    #[test]
    fn stable_regime_stays_bounded() {
        // same sign of 4N₀χ and q → no exponential growth
        let p = ThreeModeParams {
            chi: 1.0,
            q: 8.0,
            n0: 20.0,
            ns0: 0.0,
        };
        assert_eq!(instability_condition(&p), Stability::Stable);
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 0.01).collect();
        let mom = exact_pair_creation(&p, 20, &times).unwrap();
        let max_ns = mom.iter().map(|m| m.ns_mean).fold(0.0, f64::max);
        assert!(
            max_ns < 0.3 * p.n0,
            "stable regime grew to N_s = {}",
            max_ns
        );
        // oscillatory, not growing: the late half never exceeds the early
        // half (which already contains several periods)
        let early = mom[..20].iter().map(|m| m.ns_mean).fold(0.0, f64::max);
        let late = mom[20..].iter().map(|m| m.ns_mean).fold(0.0, f64::max);
        assert!(late <= 1.2 * early, "late {} vs early {}", late, early);
    }

    #[test]
    fn fz_is_exactly_zero_from_the_pump_state() {
        let p = unstable_small();
        let lambda = p.growth_rate();
        let times: Vec<f64> = (0..5).map(|i| 0.5 * i as f64 / lambda).collect();
        let mom = exact_pair_creation(&p, 20, &times).unwrap();
        for m in &mom {
            assert_eq!(m.fz_mean, 0.0);
            assert_eq!(m.fz_std, 0.0);
        }
    }

    #[test]
    fn unstable_growth_rate_fits_the_analytic_law() {
        let p = unstable_small();
        let lambda = p.growth_rate();
        // early-time window: N_s grows to ~N₀/4
        let times: Vec<f64> = (0..30).map(|i| 0.08 * i as f64 / lambda * 2.0).collect();
        let mom = exact_pair_creation(&p, 24, &times).unwrap();
        let series: Vec<(f64, f64)> = mom
            .iter()
            .filter(|m| m.ns_mean <= p.n0 / 4.0)
            .map(|m| (m.t, m.ns_mean))
            .collect();
        assert!(series.len() >= 8);
        let fit = fit_growth(&series, p.q).unwrap();
        assert_relative_eq!(fit.lambda, lambda, max_relative = 0.15);
    }

    #[test]
    fn wigner_tracks_exact_populations() {
        let p = unstable_small();
        let lambda = p.growth_rate();
        let times: Vec<f64> = (1..10).map(|i| 0.25 * i as f64 / lambda).collect();
        let exact = exact_pair_creation(&p, 24, &times).unwrap();
        let ens = semiclassical_evolve(&p, 2000, &times, 123, PumpSampling::NumberState).unwrap();
        let wigner = moments(&ens, 0.0);
        for (e, w) in exact.iter().zip(&wigner) {
            if e.ns_mean > p.n0 / 4.0 {
                break;
            }
            let stat = 3.0 * w.ns_std / (2000.0_f64).sqrt();
            assert!(
                (e.ns_mean - w.ns_mean).abs() <= 0.10 * e.ns_mean.max(0.5) + stat,
                "t = {}: exact {} vs wigner {}",
                e.t,
                e.ns_mean,
                w.ns_mean
            );
        }
    }

    #[test]
    fn cutoff_leakage_is_detected() {
        let p = unstable_small();
        let lambda = p.growth_rate();
        // tiny cutoff: growth slams into the boundary
        let times: Vec<f64> = (0..10).map(|i| 0.6 * i as f64 / lambda).collect();
        let res = exact_pair_creation(&p, 2, &times);
        assert!(matches!(res, Err(SimError::CutoffLeakage(_))));
    }

    #[test]
    fn oversized_pump_rejected() {
        let p = ThreeModeParams {
            chi: -1.0,
            q: 8.0,
            n0: 1.0e4,
            ns0: 0.0,
        };
        assert!(matches!(
            exact_pair_creation(&p, 24, &[0.0]),
            Err(SimError::ResourceLimit(_))
        ));
    }

    #[test]
    fn analytic_law_is_a_fair_early_proxy_for_exact() {
        // sanity alignment of the three routes at N₀ = 20
        let p = unstable_small();
        let lambda = p.growth_rate();
        let t = 1.2 / lambda;
        let exact = exact_pair_creation(&p, 24, &[t]).unwrap()[0].ns_mean;
        let law = analytic_growth(&p, t).unwrap();
        assert!(
            (exact - law).abs() / exact < 0.5,
            "exact {} vs law {}",
            exact,
            law
        );
    }
}
