//! Dense evolution of few-site spin-1 chains.
//!
//! The exchange Hamiltonian is built in two algebraically equivalent forms:
//!
//! ```text
//! H = Σ_{i,j} (χ⁺_ij f_i⁺ f_j⁻ + χ⁻_ij f_i⁻ f_j⁺) + q Σ_i (f_i^z)²
//!   = Σ_{i,j} χ_ij (f_i^x f_j^x + f_i^y f_j^y) + Σ_i h_i f_i^z
//!     + Σ_i χ_ii (2 − (f_i^z)²) + q Σ_i (f_i^z)²
//! ```
//!
//! with χ = χ⁺ + χ⁻ and h_i = χ_ii⁺ − χ_ii⁻ (both sums run over ordered
//! pairs including i = j). Keeping both constructions makes the equivalence
//! a testable identity rather than an assumption.

use ndarray::linalg::kron;
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::coupling::CouplingGraph;
use crate::error::{Result, SimError};
use crate::integrate::{integrate, AdaptiveOptions};
use crate::linalg::{anticommutator, dagger, expm};
use crate::spin1;

/// Hard cap on chain length for dense unitary evolution (3⁶ = 729).
pub const MAX_SITES_UNITARY: usize = 6;
/// Hard cap for density-matrix evolution (3⁴ = 81, so ρ is 81×81).
pub const MAX_SITES_LINDBLAD: usize = 4;

fn dim(n_sites: usize) -> usize {
    3usize.pow(n_sites as u32)
}

/// Embed a single-site operator at `site` in the `n_sites` tensor product.
pub fn embed(op: &Array2<C64>, site: usize, n_sites: usize) -> Array2<C64> {
    let mut out = Array2::<C64>::eye(1);
    for k in 0..n_sites {
        let factor = if k == site {
            op.clone()
        } else {
            Array2::<C64>::eye(3)
        };
        out = kron(&out, &factor);
    }
    out
}

fn check_unitary_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SITES_UNITARY {
        return Err(SimError::ResourceLimit(format!(
            "dense chain evolution supports 1..={} sites, got {}",
            MAX_SITES_UNITARY, n
        )));
    }
    Ok(())
}

/// Exchange Hamiltonian in flip-flop form plus the quadratic Zeeman term.
pub fn build_flipflop_hamiltonian(graph: &CouplingGraph, q: f64) -> Result<Array2<C64>> {
    let n = graph.n_sites();
    check_unitary_size(n)?;
    graph.validate()?;
    let d = dim(n);
    let mut h = Array2::<C64>::zeros((d, d));
    let fplus: Vec<Array2<C64>> = (0..n).map(|i| embed(&spin1::fplus(), i, n)).collect();
    let fminus: Vec<Array2<C64>> = (0..n).map(|i| embed(&spin1::fminus(), i, n)).collect();
    for i in 0..n {
        for j in 0..n {
            let cp = graph.chi_plus[[i, j]];
            let cm = graph.chi_minus[[i, j]];
            if cp != 0.0 {
                h = h + fplus[i].dot(&fminus[j]).mapv(|z| z * cp);
            }
            if cm != 0.0 {
                h = h + fminus[i].dot(&fplus[j]).mapv(|z| z * cm);
            }
        }
    }
    if q != 0.0 {
        for i in 0..n {
            let fz = embed(&spin1::fz(), i, n);
            h = h + fz.dot(&fz).mapv(|z| z * q);
        }
    }
    Ok(h)
}

/// The same Hamiltonian in XY form: Σ_{i,j} χ_ij (f_i^x f_j^x + f_i^y f_j^y)
/// over ordered pairs including i = j, plus Σ_i h_i f_i^z. The i = j terms
/// reproduce the single-site remainder χ_ii (2 − f_z²) of the flip-flop
/// diagonal automatically.
pub fn build_xy_hamiltonian(graph: &CouplingGraph, q: f64) -> Result<Array2<C64>> {
    let n = graph.n_sites();
    check_unitary_size(n)?;
    graph.validate()?;
    let d = dim(n);
    let mut h = Array2::<C64>::zeros((d, d));
    let fx: Vec<Array2<C64>> = (0..n).map(|i| embed(&spin1::fx(), i, n)).collect();
    let fy: Vec<Array2<C64>> = (0..n).map(|i| embed(&spin1::fy(), i, n)).collect();
    let fz: Vec<Array2<C64>> = (0..n).map(|i| embed(&spin1::fz(), i, n)).collect();
    for i in 0..n {
        for j in 0..n {
            let c = graph.chi[[i, j]];
            if c != 0.0 {
                h = h + (fx[i].dot(&fx[j]) + fy[i].dot(&fy[j])).mapv(|z| z * c);
            }
        }
    }
    for i in 0..n {
        let hi = graph.h[i];
        if hi != 0.0 {
            h = h + fz[i].mapv(|z| z * hi);
        }
        if q != 0.0 {
            let fz2 = fz[i].dot(&fz[i]);
            h = h + fz2.mapv(|z| z * q);
        }
    }
    Ok(h)
}

/// Total magnetization operator Σ_i f_i^z.
pub fn total_fz(n_sites: usize) -> Array2<C64> {
    let d = dim(n_sites);
    let mut out = Array2::<C64>::zeros((d, d));
    for i in 0..n_sites {
        out = out + embed(&spin1::fz(), i, n_sites);
    }
    out
}

/// Tensor product of single-site pure states.
pub fn product_state(site_states: &[Array1<C64>]) -> Array1<C64> {
    let mut out = Array1::<C64>::ones(1);
    for s in site_states {
        let mut next = Array1::<C64>::zeros(out.len() * s.len());
        for (i, a) in out.iter().enumerate() {
            for (j, b) in s.iter().enumerate() {
                next[i * s.len() + j] = a * b;
            }
        }
        out = next;
    }
    out
}

/// ⟨ψ|O|ψ⟩ (real part; O Hermitian).
pub fn expectation(state: &Array1<C64>, op: &Array2<C64>) -> f64 {
    let ov = op.dot(state);
    state
        .iter()
        .zip(ov.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum()
}

/// Schrödinger evolution by repeated application of exp(−iHΔt).
///
/// Propagators are cached per distinct step length, so uniformly sampled
/// series cost one matrix exponential.
pub fn evolve_exact(
    state: &Array1<C64>,
    hamiltonian: &Array2<C64>,
    sample_times: &[f64],
) -> Result<Vec<Array1<C64>>> {
    if hamiltonian.nrows() != state.len() {
        return Err(SimError::InvalidParams(format!(
            "state dimension {} does not match operator {}",
            state.len(),
            hamiltonian.nrows()
        )));
    }
    let mut cache: Vec<(f64, Array2<C64>)> = Vec::new();
    let mut psi = state.clone();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(sample_times.len());
    for &ts in sample_times {
        let dt = ts - t;
        if dt < 0.0 {
            return Err(SimError::InvalidParams(
                "sample times must be non-decreasing and start at t >= 0".into(),
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

/// Independent route for cross-checks: integrate dψ/dt = −iHψ adaptively.
pub fn evolve_schrodinger_ode(
    state: &Array1<C64>,
    hamiltonian: &Array2<C64>,
    sample_times: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Vec<Array1<C64>>> {
    let d = state.len();
    let mut y0 = Vec::with_capacity(2 * d);
    for z in state.iter() {
        y0.push(z.re);
        y0.push(z.im);
    }
    let mut psi = vec![C64::new(0.0, 0.0); d];
    let samples = integrate(
        |_t, y, dy| {
            for k in 0..d {
                psi[k] = C64::new(y[2 * k], y[2 * k + 1]);
            }
            let hpsi = hamiltonian.dot(&Array1::from_vec(psi.clone()));
            for k in 0..d {
                let v = -C64::i() * hpsi[k];
                dy[2 * k] = v.re;
                dy[2 * k + 1] = v.im;
            }
        },
        0.0,
        &y0,
        sample_times,
        opts,
    )?;
    Ok(samples
        .iter()
        .map(|y| Array1::from_iter((0..d).map(|k| C64::new(y[2 * k], y[2 * k + 1]))))
        .collect())
}

/// Dissipation channel layout for [`evolve_lindblad`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpModel {
    /// Independent per-site jumps √γ_i f_i⁺ (default; matches the
    /// mean-field engine's approximation).
    Local,
    /// One collective jump Σ_i √γ_i f_i⁺ through the shared cavity mode.
    Collective,
}

/// Build the jump operator list for per-site rates `gamma`.
pub fn build_jump_operators(gamma: &[f64], model: JumpModel, n_sites: usize) -> Vec<Array2<C64>> {
    match model {
        JumpModel::Local => gamma
            .iter()
            .enumerate()
            .filter(|(_, &g)| g > 0.0)
            .map(|(i, &g)| embed(&spin1::fplus(), i, n_sites).mapv(|z| z * g.sqrt()))
            .collect(),
        JumpModel::Collective => {
            let d = dim(n_sites);
            let mut op = Array2::<C64>::zeros((d, d));
            for (i, &g) in gamma.iter().enumerate() {
                if g > 0.0 {
                    op = op + embed(&spin1::fplus(), i, n_sites).mapv(|z| z * g.sqrt());
                }
            }
            vec![op]
        }
    }
}

/// Master-equation evolution dρ/dt = −i[H, ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ}).
pub fn evolve_lindblad(
    rho0: &Array2<C64>,
    hamiltonian: &Array2<C64>,
    jumps: &[Array2<C64>],
    sample_times: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Vec<Array2<C64>>> {
    let d = rho0.nrows();
    if d > dim(MAX_SITES_LINDBLAD) {
        return Err(SimError::ResourceLimit(format!(
            "density-matrix evolution limited to dimension {}, got {}",
            dim(MAX_SITES_LINDBLAD),
            d
        )));
    }
    let ldl: Vec<Array2<C64>> = jumps.iter().map(|l| dagger(l).dot(l)).collect();
    let ldag: Vec<Array2<C64>> = jumps.iter().map(dagger).collect();
    let mut y0 = Vec::with_capacity(2 * d * d);
    for z in rho0.iter() {
        y0.push(z.re);
        y0.push(z.im);
    }
    let samples = integrate(
        |_t, y, dy| {
            let rho = Array2::from_shape_fn((d, d), |(r, c)| {
                let k = 2 * (r * d + c);
                C64::new(y[k], y[k + 1])
            });
            let mut drho = hamiltonian.dot(&rho) - rho.dot(hamiltonian);
            drho.mapv_inplace(|z| C64::new(z.im, -z.re)); // multiply by −i
            for (k, l) in jumps.iter().enumerate() {
                let sandwich = l.dot(&rho).dot(&ldag[k]);
                let anti = anticommutator(&ldl[k], &rho);
                drho = drho + sandwich - anti.mapv(|z| z * 0.5);
            }
            for (k, z) in drho.iter().enumerate() {
                dy[2 * k] = z.re;
                dy[2 * k + 1] = z.im;
            }
        },
        0.0,
        &y0,
        sample_times,
        opts,
    )?;
    Ok(samples
        .iter()
        .map(|y| {
            Array2::from_shape_fn((d, d), |(r, c)| {
                let k = 2 * (r * d + c);
                C64::new(y[k], y[k + 1])
            })
        })
        .collect())
}
