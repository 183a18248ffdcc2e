//! Mean-field dynamics of an extended cloud of spin-1 sites.
//!
//! Each grid site carries a 3×3 density matrix ρ_i evolving under
//!
//! ```text
//! dρ_i/dt = −i [H_i, ρ_i] + γ_i D[f₊] ρ_i,
//! H_i = B_i^x f_x + B_i^y f_y + h_i f_z + q f_z²,
//! B_i^{x,y} = 2 Σ_{j≠i} χ_ij ⟨f_j^{x,y}⟩ w_j,
//! ```
//!
//! where the factor 2 counts both orderings of each exchange pair, w_j is the
//! relative atomic density of site j (each site is a bin of atoms), and
//! D[f₊] is the Lindblad dissipator driving relaxation toward m = +1. Mean
//! fields are recomputed at every integrator stage evaluation.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::coupling::{CouplingGraph, ModeProfile};
use crate::error::{Result, SimError};
use crate::integrate::{integrate, AdaptiveOptions};
use crate::linalg::min_eigenvalue;
use crate::spin1::{self, SpinAxis, ZeemanLevel};
use crate::units::TWO_PI;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Tolerances for [`EnsembleState::validate`].
pub const HERMITICITY_TOL: f64 = 1.0e-10;
pub const TRACE_TOL: f64 = 1.0e-9;
pub const POSITIVITY_TOL: f64 = 1.0e-9;

/// Per-site spin-1 density matrices on a 1-D grid with density weights.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    /// 3×3 density matrices in the (m = +1, 0, −1) basis.
    pub sites: Vec<Array2<C64>>,
    /// Relative density weights from the mode profile.
    pub weights: Vec<f64>,
    /// Time (s).
    pub time: f64,
}

impl EnsembleState {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    /// Check Hermiticity, unit trace and positivity of every site matrix.
    pub fn validate(&self) -> Result<()> {
        if self.sites.len() != self.weights.len() {
            return Err(SimError::InvalidProtocol(
                "sites and weights length mismatch".into(),
            ));
        }
        for (idx, rho) in self.sites.iter().enumerate() {
            if rho.nrows() != 3 || rho.ncols() != 3 {
                return Err(SimError::InvalidProtocol(format!(
                    "site {} matrix is not 3×3",
                    idx
                )));
            }
            let mut herm_dev = 0.0_f64;
            for r in 0..3 {
                for c in 0..3 {
                    herm_dev = herm_dev.max((rho[[r, c]] - rho[[c, r]].conj()).norm());
                }
            }
            if herm_dev > HERMITICITY_TOL {
                return Err(SimError::InvalidProtocol(format!(
                    "site {} not Hermitian (deviation {:.2e})",
                    idx, herm_dev
                )));
            }
            let trace: f64 = (0..3).map(|k| rho[[k, k]].re).sum();
            if (trace - 1.0).abs() > TRACE_TOL {
                return Err(SimError::InvalidProtocol(format!(
                    "site {} trace {} differs from 1",
                    idx, trace
                )));
            }
            let min_eig = min_eigenvalue(rho);
            if min_eig < -POSITIVITY_TOL {
                return Err(SimError::InvalidProtocol(format!(
                    "site {} has negative eigenvalue {:.2e}",
                    idx, min_eig
                )));
            }
        }
        Ok(())
    }

    /// (⟨f_x⟩, ⟨f_y⟩, ⟨f_z⟩) per site.
    pub fn spin_expectations(&self) -> Vec<[f64; 3]> {
        self.sites
            .iter()
            .map(|rho| {
                let c01 = rho[[0, 1]] + rho[[1, 2]];
                [
                    SQRT2 * c01.re,
                    -SQRT2 * c01.im,
                    rho[[0, 0]].re - rho[[2, 2]].re,
                ]
            })
            .collect()
    }

    /// Density-weighted total magnetization Σ_i w_i ⟨f_i^z⟩.
    pub fn total_magnetization(&self) -> f64 {
        self.sites
            .iter()
            .zip(&self.weights)
            .map(|(rho, w)| w * (rho[[0, 0]].re - rho[[2, 2]].re))
            .sum()
    }

    /// Density-weighted mean ⟨f^z⟩ over the masked sites.
    pub fn region_fz(&self, mask: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((rho, w), m) in self.sites.iter().zip(&self.weights).zip(mask) {
            if *m {
                num += w * (rho[[0, 0]].re - rho[[2, 2]].re);
                den += w;
            }
        }
        num / den
    }
}

/// Local spin-excitation density ρ_exc,i = w_i (1 + ⟨f_i^z⟩).
pub fn excitation_density(state: &EnsembleState) -> Vec<f64> {
    state
        .sites
        .iter()
        .zip(&state.weights)
        .map(|(rho, w)| w * (1.0 + rho[[0, 0]].re - rho[[2, 2]].re))
        .collect()
}

/// Initial rotation applied to one region of the cloud.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseSpec {
    /// Leave the region in the initial Zeeman level.
    None,
    /// Full spin rotation exp(−i θ f_axis).
    Spin { axis: SpinAxis, angle: f64 },
    /// Two-photon Raman rotation on the (initial, initial+1) level pair.
    Raman { angle: f64, phase: f64 },
}

/// Protocol families. `Hop` seeds one region with spin excitations;
/// `BipartiteXy` prepares a transverse spin texture whose precession reveals
/// the coupling sign; `Custom` is whatever the pulse list says.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Hop,
    BipartiteXy,
    Custom,
}

fn default_smoothing() -> f64 {
    0.0
}

/// Region layout and per-region pulses defining the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchProtocol {
    pub kind: ProtocolKind,
    /// Sorted positions (μm) splitting the grid into `boundaries.len() + 1`
    /// regions; a site at x belongs to region `#{b : b ≤ x}`.
    pub region_boundaries: Vec<f64>,
    /// One pulse per region.
    pub pulses: Vec<PulseSpec>,
    /// Zeeman level every atom starts in.
    pub initial_level: ZeemanLevel,
    /// Optional spatial width (μm) over which pulse areas ramp across the
    /// region boundaries; 0 means sharp edges.
    #[serde(default = "default_smoothing")]
    pub smoothing_um: f64,
}

impl QuenchProtocol {
    /// Excitation-hopping protocol: sites at `x ≥ boundary` receive a Raman
    /// π/2 pulse out of m = −1, the rest stay put.
    pub fn hop(boundary_um: f64) -> Self {
        Self {
            kind: ProtocolKind::Hop,
            region_boundaries: vec![boundary_um],
            pulses: vec![
                PulseSpec::None,
                PulseSpec::Raman {
                    angle: std::f64::consts::FRAC_PI_2,
                    phase: 0.0,
                },
            ],
            initial_level: ZeemanLevel::MinusOne,
            smoothing_um: 0.0,
        }
    }

    /// Bipartite transverse texture: region A (x < boundary) polarized along
    /// f̂_x, region B along f̂_y.
    pub fn bipartite_xy(boundary_um: f64) -> Self {
        Self {
            kind: ProtocolKind::BipartiteXy,
            region_boundaries: vec![boundary_um],
            pulses: vec![
                PulseSpec::Spin {
                    axis: SpinAxis::Y,
                    angle: 1.5 * std::f64::consts::PI,
                },
                PulseSpec::Spin {
                    axis: SpinAxis::X,
                    angle: std::f64::consts::FRAC_PI_2,
                },
            ],
            initial_level: ZeemanLevel::MinusOne,
            smoothing_um: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.region_boundaries.windows(2) {
            if !(w[1] > w[0]) {
                return Err(SimError::InvalidProtocol(
                    "region boundaries must be strictly increasing".into(),
                ));
            }
        }
        if !(self.smoothing_um >= 0.0) {
            return Err(SimError::InvalidProtocol(format!(
                "smoothing width must be >= 0, got {}",
                self.smoothing_um
            )));
        }
        if self.pulses.len() != self.region_boundaries.len() + 1 {
            return Err(SimError::InvalidProtocol(format!(
                "{} boundaries require {} pulses, got {}",
                self.region_boundaries.len(),
                self.region_boundaries.len() + 1,
                self.pulses.len()
            )));
        }
        for p in &self.pulses {
            let angle = match p {
                PulseSpec::None => 0.0,
                PulseSpec::Spin { angle, .. } | PulseSpec::Raman { angle, .. } => *angle,
            };
            if !(0.0..TWO_PI).contains(&angle) {
                return Err(SimError::InvalidProtocol(format!(
                    "pulse angle {} outside [0, 2π)",
                    angle
                )));
            }
        }
        Ok(())
    }

    /// Region index of a position.
    pub fn region_of(&self, x: f64) -> usize {
        self.region_boundaries.iter().filter(|&&b| b <= x).count()
    }

    /// Weight of each region's pulse at position `x`: an indicator function
    /// for sharp boundaries, logistic ramps of width `smoothing_um`
    /// otherwise. Weights sum to one.
    fn region_weights(&self, x: f64) -> Vec<f64> {
        let n_regions = self.pulses.len();
        if self.smoothing_um == 0.0 {
            let mut w = vec![0.0; n_regions];
            w[self.region_of(x)] = 1.0;
            return w;
        }
        let sigma = |u: f64| 1.0 / (1.0 + (-u).exp());
        (0..n_regions)
            .map(|r| {
                let lower = if r == 0 {
                    1.0
                } else {
                    sigma((x - self.region_boundaries[r - 1]) / self.smoothing_um)
                };
                let upper = if r == n_regions - 1 {
                    0.0
                } else {
                    sigma((x - self.region_boundaries[r]) / self.smoothing_um)
                };
                lower - upper
            })
            .collect()
    }

    /// Pure single-site state created by the pulses acting at `x`.
    ///
    /// With smoothing each region's rotation is applied with its angle scaled
    /// by the local region weight, in region order.
    pub fn site_state(&self, x: f64) -> Result<Array1<C64>> {
        let weights = self.region_weights(x);
        let mut state = self.initial_level.basis_vector();
        for (pulse, &w) in self.pulses.iter().zip(&weights) {
            if w == 0.0 {
                continue;
            }
            state = match *pulse {
                PulseSpec::None => state,
                PulseSpec::Spin { axis, angle } => {
                    spin1::rotation(axis, angle * w).dot(&state)
                }
                PulseSpec::Raman { angle, phase } => {
                    spin1::raman_rotation(self.initial_level, angle * w, phase)?.dot(&state)
                }
            };
        }
        Ok(state)
    }
}

/// Build the initial ensemble for a protocol on a profile.
pub fn initialize(protocol: &QuenchProtocol, profile: &ModeProfile) -> Result<EnsembleState> {
    protocol.validate()?;
    profile.validate()?;
    let mut sites = Vec::with_capacity(profile.n_sites());
    for &x in &profile.grid {
        let v = protocol.site_state(x)?;
        let mut rho = Array2::<C64>::zeros((3, 3));
        for r in 0..3 {
            for c in 0..3 {
                rho[[r, c]] = v[r] * v[c].conj();
            }
        }
        sites.push(rho);
    }
    let state = EnsembleState {
        sites,
        weights: profile.density.clone(),
        time: 0.0,
    };
    state.validate()?;
    Ok(state)
}

/// Uniformly spaced sample times [0, t_final] inclusive.
pub fn uniform_times(t_final: f64, n_samples: usize) -> Vec<f64> {
    assert!(n_samples >= 2);
    (0..n_samples)
        .map(|i| t_final * i as f64 / (n_samples - 1) as f64)
        .collect()
}

// Flat packing: 18 reals per site, row-major (re, im) pairs.
fn pack(state: &EnsembleState) -> Vec<f64> {
    let mut y = Vec::with_capacity(18 * state.n_sites());
    for rho in &state.sites {
        for r in 0..3 {
            for c in 0..3 {
                y.push(rho[[r, c]].re);
                y.push(rho[[r, c]].im);
            }
        }
    }
    y
}

fn unpack(y: &[f64], weights: &[f64], time: f64) -> EnsembleState {
    let n = weights.len();
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        let base = 18 * i;
        let mut rho = Array2::<C64>::zeros((3, 3));
        for r in 0..3 {
            for c in 0..3 {
                let k = base + 2 * (3 * r + c);
                rho[[r, c]] = C64::new(y[k], y[k + 1]);
            }
        }
        sites.push(rho);
    }
    EnsembleState {
        sites,
        weights: weights.to_vec(),
        time,
    }
}

#[inline]
fn site_transverse(y: &[f64], i: usize) -> (f64, f64) {
    // ⟨f_x⟩ = √2 Re(ρ01 + ρ12), ⟨f_y⟩ = −√2 Im(ρ01 + ρ12)
    let base = 18 * i;
    let re = y[base + 2] + y[base + 10];
    let im = y[base + 3] + y[base + 11];
    (SQRT2 * re, -SQRT2 * im)
}

struct Workspace {
    fx: Vec<f64>,
    fy: Vec<f64>,
    bx: Vec<f64>,
    by: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self {
            fx: vec![0.0; n],
            fy: vec![0.0; n],
            bx: vec![0.0; n],
            by: vec![0.0; n],
        }
    }
}

/// Mean-field right-hand side over the flat state vector.
fn rhs(
    y: &[f64],
    dy: &mut [f64],
    graph: &CouplingGraph,
    weights: &[f64],
    q: f64,
    ws: &mut Workspace,
) {
    let n = weights.len();
    for i in 0..n {
        let (fx, fy) = site_transverse(y, i);
        ws.fx[i] = fx * weights[i];
        ws.fy[i] = fy * weights[i];
    }
    for i in 0..n {
        let mut bx = 0.0;
        let mut by = 0.0;
        for j in 0..n {
            bx += graph.chi[[i, j]] * ws.fx[j];
            by += graph.chi[[i, j]] * ws.fy[j];
        }
        // remove the self term: the mean field sums over j ≠ i
        bx -= graph.chi[[i, i]] * ws.fx[i];
        by -= graph.chi[[i, i]] * ws.fy[i];
        ws.bx[i] = 2.0 * bx;
        ws.by[i] = 2.0 * by;
    }
    for i in 0..n {
        let base = 18 * i;
        let rho = |r: usize, c: usize| {
            let k = base + 2 * (3 * r + c);
            C64::new(y[k], y[k + 1])
        };
        // H = [[h+q, w*, 0], [w, 0, w*], [0, w, −h+q]], w = (Bx + iBy)/√2
        let h = graph.h[i];
        let w = C64::new(ws.bx[i] / SQRT2, ws.by[i] / SQRT2);
        let wc = w.conj();
        let zero = C64::new(0.0, 0.0);
        let hm = [
            C64::new(h + q, 0.0),
            wc,
            zero,
            w,
            zero,
            wc,
            zero,
            w,
            C64::new(-h + q, 0.0),
        ];
        let r = [
            rho(0, 0),
            rho(0, 1),
            rho(0, 2),
            rho(1, 0),
            rho(1, 1),
            rho(1, 2),
            rho(2, 0),
            rho(2, 1),
            rho(2, 2),
        ];
        // commutator [H, ρ]
        let mut comm = [zero; 9];
        for a in 0..3 {
            for b in 0..3 {
                let mut hr = zero;
                let mut rh = zero;
                for k in 0..3 {
                    hr += hm[3 * a + k] * r[3 * k + b];
                    rh += r[3 * a + k] * hm[3 * k + b];
                }
                comm[3 * a + b] = hr - rh;
            }
        }
        // D[f₊]ρ = 2 (shift-up of ρ) − ½{f₋f₊, ρ} with f₋f₊ = diag(0, 2, 2)
        let gamma = graph.gamma[i];
        let mdiag = [0.0, 2.0, 2.0];
        for a in 0..3 {
            for b in 0..3 {
                let minus_i_comm = C64::new(comm[3 * a + b].im, -comm[3 * a + b].re);
                let jump = if a < 2 && b < 2 {
                    r[3 * (a + 1) + (b + 1)] * 2.0
                } else {
                    zero
                };
                let anti = r[3 * a + b] * (0.5 * (mdiag[a] + mdiag[b]));
                let v = minus_i_comm + (jump - anti) * gamma;
                let k = base + 2 * (3 * a + b);
                dy[k] = v.re;
                dy[k + 1] = v.im;
            }
        }
    }
}

/// Evolve the ensemble under a coupling graph and quadratic Zeeman shift `q`,
/// returning states at the requested sample times (which must start at or
/// after `state.time`).
pub fn evolve(
    state: &EnsembleState,
    graph: &CouplingGraph,
    q: f64,
    sample_times: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Vec<EnsembleState>> {
    let n = state.n_sites();
    if graph.n_sites() != n {
        return Err(SimError::InvalidProtocol(format!(
            "graph has {} sites but state has {}",
            graph.n_sites(),
            n
        )));
    }
    let y0 = pack(state);
    let mut ws = Workspace::new(n);
    let weights = state.weights.clone();
    let samples = integrate(
        |_t, y, dy| rhs(y, dy, graph, &weights, q, &mut ws),
        state.time,
        &y0,
        sample_times,
        opts,
    )?;
    Ok(samples
        .iter()
        .zip(sample_times)
        .map(|(y, &t)| unpack(y, &weights, t))
        .collect())
}

/// d⟨f_i^z⟩/dt evaluated at the given state; the t = 0 slopes of a quench.
pub fn fz_time_derivative(state: &EnsembleState, graph: &CouplingGraph, q: f64) -> Vec<f64> {
    let n = state.n_sites();
    let y = pack(state);
    let mut dy = vec![0.0; y.len()];
    let mut ws = Workspace::new(n);
    rhs(&y, &mut dy, graph, &state.weights, q, &mut ws);
    (0..n)
        .map(|i| {
            // d tr(ρ f_z)/dt = dρ00 − dρ22
            dy[18 * i] - dy[18 * i + 16]
        })
        .collect()
}

/// Window choice for [`extract_couplings`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractionWindow {
    /// First `fraction` of the oscillation period observed in the series
    /// (period estimated from the first extremum of the region imbalance).
    PeriodFraction { fraction: f64 },
    /// All samples with t ≤ `t_max`.
    UpTo { t_max: f64 },
    /// The whole series.
    Full,
}

/// Couplings and relaxation rates recovered from a bipartite quench.
#[derive(Debug, Clone, Copy)]
pub struct ExtractedCouplings {
    /// Region-mean total coupling ⟨Σ_j χ_ij w_j⟩ over region A (rad/s).
    pub chi_a: f64,
    /// Same for region B.
    pub chi_b: f64,
    /// Region-mean relaxation rate ⟨γ_i⟩ over region A (rad/s).
    pub gamma_a: f64,
    /// Same for region B.
    pub gamma_b: f64,
}

fn fit_initial_slope(times: &[f64], values: &[f64]) -> f64 {
    // model: v(t) = c0 + s·t + A(1 − exp(−b t)) + d·t³. The exponential
    // carries the relaxation curvature, the cubic the leading curvature of
    // coherent precession (odd in t, so it must not contaminate the slope).
    // For each candidate rate b the remaining parameters are linear; the
    // reported initial slope is s + A·b.
    let t_span = times.last().unwrap() - times[0];
    let n = times.len();
    let mut best: Option<(f64, [f64; 4], f64)> = None; // (sse, coeffs, b)
    let mut candidates = vec![0.0];
    for k in 0..24 {
        candidates.push(10.0_f64.powf(-1.5 + 3.0 * k as f64 / 23.0) / t_span);
    }
    let tt: Vec<f64> = times.iter().map(|&t| t - times[0]).collect();
    for &b in &candidates {
        let u: Vec<f64> = tt
            .iter()
            .map(|&t| if b == 0.0 { 0.0 } else { 1.0 - (-b * t).exp() })
            .collect();
        // normal equations with a tiny ridge for the degenerate b → 0 limit
        let mut m = [[0.0_f64; 4]; 4];
        let mut rv = [0.0_f64; 4];
        for i in 0..n {
            // scale t and t³ by the span so the ridge is dimensionally fair
            let basis = [
                1.0,
                tt[i] / t_span,
                u[i],
                (tt[i] / t_span).powi(3),
            ];
            for a in 0..4 {
                for c in 0..4 {
                    m[a][c] += basis[a] * basis[c];
                }
                rv[a] += basis[a] * values[i];
            }
        }
        let ridge = 1.0e-12 * (m[0][0] + m[1][1] + m[2][2] + m[3][3]) / 4.0;
        for (a, row) in m.iter_mut().enumerate() {
            row[a] += ridge;
        }
        let coeffs = match solve4(&m, &rv) {
            Some(c) => c,
            None => continue,
        };
        let mut sse = 0.0;
        for i in 0..n {
            let s = tt[i] / t_span;
            let pred = coeffs[0] + coeffs[1] * s + coeffs[2] * u[i] + coeffs[3] * s * s * s;
            let res = values[i] - pred;
            sse += res * res;
        }
        if best.is_none() || sse < best.as_ref().unwrap().0 {
            best = Some((sse, coeffs, b));
        }
    }
    let (_, coeffs, b) = best.expect("at least one candidate rate");
    coeffs[1] / t_span + coeffs[2] * b
}

fn solve4(m: &[[f64; 4]; 4], rhs: &[f64; 4]) -> Option<[f64; 4]> {
    let mut a = *m;
    let mut b = *rhs;
    for col in 0..4 {
        let mut piv = col;
        for r in (col + 1)..4 {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..4 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..4 {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some([
        b[0] / a[0][0],
        b[1] / a[1][1],
        b[2] / a[2][2],
        b[3] / a[3][3],
    ])
}

/// Recover region-mean couplings and relaxation rates from a bipartite-xy
/// quench series.
///
/// The fitted initial slopes of ⟨f^z⟩ in the two regions are decomposed into
/// an exchange part (antisymmetric between the regions, weighted by the
/// calibrated Ω(x) profile) and a relaxation part (the dissipator raises
/// ⟨f^z⟩ of a fully transverse spin-1 state at rate 3γ/2):
///
/// ```text
/// s_A = −2 C Ω̄_A S_B + (3/2) G (Ω²)̄_A
/// s_B = +2 C Ω̄_B S_A + (3/2) G (Ω²)̄_B
/// ```
///
/// with S_R = Σ_{j∈R} Ω_j w_j. Solving for (C, G) yields
/// ⟨χ_i⟩_R = C Ω̄_R Σ_j Ω_j w_j and ⟨γ_i⟩_R = G (Ω²)̄_R.
pub fn extract_couplings(
    series: &[EnsembleState],
    profile: &ModeProfile,
    mask_a: &[bool],
    mask_b: &[bool],
    window: ExtractionWindow,
) -> Result<ExtractedCouplings> {
    if series.len() < 3 {
        return Err(SimError::FitFailure("window shorter than 3 samples".into()));
    }
    let times: Vec<f64> = series.iter().map(|s| s.time).collect();
    let fz_a: Vec<f64> = series.iter().map(|s| s.region_fz(mask_a)).collect();
    let fz_b: Vec<f64> = series.iter().map(|s| s.region_fz(mask_b)).collect();

    let end = match window {
        ExtractionWindow::Full => series.len(),
        ExtractionWindow::UpTo { t_max } => times.iter().take_while(|&&t| t <= t_max).count(),
        ExtractionWindow::PeriodFraction { fraction } => {
            // locate the first extremum of the region imbalance, read it as a
            // quarter period
            let g: Vec<f64> = fz_b
                .iter()
                .zip(&fz_a)
                .map(|(b, a)| (b - a) - (fz_b[0] - fz_a[0]))
                .collect();
            let mut i_ext = series.len() - 1;
            for i in 1..g.len() - 1 {
                if g[i].abs() >= g[i + 1].abs() && g[i].abs() > g[i - 1].abs() {
                    i_ext = i;
                    break;
                }
            }
            let t_window = 4.0 * fraction * (times[i_ext] - times[0]);
            times
                .iter()
                .take_while(|&&t| t - times[0] <= t_window)
                .count()
        }
    };
    let end = end.min(series.len());
    if end < 3 {
        return Err(SimError::FitFailure("window shorter than 3 samples".into()));
    }

    let slope_a = fit_initial_slope(&times[..end], &fz_a[..end]);
    let slope_b = fit_initial_slope(&times[..end], &fz_b[..end]);

    // density-weighted region statistics of the calibrated profile
    let stats = |mask: &[bool]| {
        let mut wsum = 0.0;
        let mut mean = 0.0;
        let mut mean_sq = 0.0;
        let mut region_sum = 0.0;
        for i in 0..profile.n_sites() {
            if mask[i] {
                let w = profile.density[i];
                let om = profile.omega[i];
                wsum += w;
                mean += w * om;
                mean_sq += w * om * om;
                region_sum += om * w;
            }
        }
        (mean / wsum, mean_sq / wsum, region_sum)
    };
    let (om_a, om2_a, s_a) = stats(mask_a);
    let (om_b, om2_b, s_b) = stats(mask_b);
    let s_total: f64 = profile
        .omega
        .iter()
        .zip(&profile.density)
        .map(|(om, w)| om * w)
        .sum();

    // [ −2 Ω̄_A S_B   1.5 (Ω²)̄_A ] [C]   [s_A]
    // [ +2 Ω̄_B S_A   1.5 (Ω²)̄_B ] [G] = [s_B]
    let m00 = -2.0 * om_a * s_b;
    let m01 = 1.5 * om2_a;
    let m10 = 2.0 * om_b * s_a;
    let m11 = 1.5 * om2_b;
    let det = m00 * m11 - m01 * m10;
    if det.abs() < 1.0e-300 {
        return Err(SimError::FitFailure(
            "degenerate region geometry: cannot separate coupling from relaxation".into(),
        ));
    }
    let c_scale = (slope_a * m11 - m01 * slope_b) / det;
    let g_scale = (m00 * slope_b - m10 * slope_a) / det;

    Ok(ExtractedCouplings {
        chi_a: c_scale * om_a * s_total,
        chi_b: c_scale * om_b * s_total,
        gamma_a: g_scale * om2_a,
        gamma_b: g_scale * om2_b,
    })
}

/// Boolean site mask for positions in [lo, hi].
pub fn mask_range(profile: &ModeProfile, lo: f64, hi: f64) -> Vec<bool> {
    profile.grid.iter().map(|&x| x >= lo && x <= hi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{build_coupling_graph, GaussianProfileSpec};
    use crate::params::{ParamsInput, PhysicalParams};
    use crate::units::{hz, khz, mhz};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn zero_graph(n: usize) -> CouplingGraph {
        CouplingGraph {
            chi_plus: Array2::zeros((n, n)),
            chi_minus: Array2::zeros((n, n)),
            chi: Array2::zeros((n, n)),
            h: Array1::zeros(n),
            gamma: Array1::zeros(n),
        }
    }

    fn uniform_graph(n: usize, chi: f64) -> CouplingGraph {
        // uniform exchange χ_ij = χ for all pairs, equal ± channels (h = 0)
        let m = Array2::from_elem((n, n), chi);
        CouplingGraph {
            chi_plus: m.mapv(|v| 0.5 * v),
            chi_minus: m.mapv(|v| 0.5 * v),
            chi: m,
            h: Array1::zeros(n),
            gamma: Array1::zeros(n),
        }
    }

    #[test]
    fn hop_initialization_half_excites_region_a() {
        let profile = ModeProfile::uniform(6, 1.0).unwrap();
        // boundary at x = 3: sites 3, 4, 5 pulsed
        let protocol = QuenchProtocol::hop(3.0);
        let state = initialize(&protocol, &profile).unwrap();
        let spins = state.spin_expectations();
        for s in spins.iter().take(3) {
            assert_relative_eq!(s[2], -1.0, max_relative = 1e-12);
        }
        for s in spins.iter().skip(3) {
            assert_relative_eq!(s[2], -0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn no_pulse_is_fully_polarized_with_zero_excitation() {
        let profile = ModeProfile::uniform(4, 1.0).unwrap();
        let protocol = QuenchProtocol {
            kind: ProtocolKind::Custom,
            region_boundaries: vec![],
            pulses: vec![PulseSpec::None],
            initial_level: ZeemanLevel::MinusOne,
            smoothing_um: 0.0,
        };
        let state = initialize(&protocol, &profile).unwrap();
        for s in state.spin_expectations() {
            assert_relative_eq!(s[2], -1.0, max_relative = 1e-12);
        }
        for e in excitation_density(&state) {
            assert_abs_diff_eq!(e, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bipartite_prepares_transverse_texture() {
        let profile = ModeProfile::uniform(4, 1.0).unwrap();
        let protocol = QuenchProtocol::bipartite_xy(2.0);
        let state = initialize(&protocol, &profile).unwrap();
        let spins = state.spin_expectations();
        for s in spins.iter().take(2) {
            assert_relative_eq!(s[0], 1.0, max_relative = 1e-12);
            assert_abs_diff_eq!(s[1], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s[2], 0.0, epsilon = 1e-12);
        }
        for s in spins.iter().skip(2) {
            assert_abs_diff_eq!(s[0], 0.0, epsilon = 1e-12);
            assert_relative_eq!(s[1], 1.0, max_relative = 1e-12);
            assert_abs_diff_eq!(s[2], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn pulse_rotation_matches_matrix_exponential_oracle() {
        // independent route: rotate |−1⟩ by expm(−iθ f_y) directly
        let protocol = QuenchProtocol {
            kind: ProtocolKind::Custom,
            region_boundaries: vec![],
            pulses: vec![PulseSpec::Spin {
                axis: SpinAxis::Y,
                angle: 0.77,
            }],
            initial_level: ZeemanLevel::MinusOne,
            smoothing_um: 0.0,
        };
        let v = protocol.site_state(0.0).unwrap();
        let gen = spin1::fy().mapv(|z| z * C64::new(0.0, -0.77));
        let u = crate::linalg::expm(&gen);
        let expect = u.dot(&ZeemanLevel::MinusOne.basis_vector());
        for k in 0..3 {
            assert_abs_diff_eq!((v[k] - expect[k]).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn excitation_density_levels() {
        let profile = ModeProfile::uniform(3, 1.0).unwrap();
        for (level, expected) in [
            (ZeemanLevel::MinusOne, 0.0),
            (ZeemanLevel::Zero, 1.0),
            (ZeemanLevel::PlusOne, 2.0),
        ] {
            let protocol = QuenchProtocol {
                kind: ProtocolKind::Custom,
                region_boundaries: vec![],
                pulses: vec![PulseSpec::None],
                initial_level: level,
                smoothing_um: 0.0,
            };
            let state = initialize(&protocol, &profile).unwrap();
            for e in excitation_density(&state) {
                assert_relative_eq!(e, expected, max_relative = 1e-12, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn free_state_is_stationary() {
        let profile = ModeProfile::uniform(3, 1.0).unwrap();
        let state = initialize(&QuenchProtocol::bipartite_xy(1.0), &profile).unwrap();
        let out = evolve(
            &state,
            &zero_graph(3),
            0.0,
            &uniform_times(1.0, 5),
            &AdaptiveOptions::default(),
        )
        .unwrap();
        let initial = state.spin_expectations();
        for snap in &out {
            for (a, b) in snap.spin_expectations().iter().zip(&initial) {
                for k in 0..3 {
                    assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn two_site_initial_slope_matches_commutator_oracle() {
        // oracle: d⟨f_i^z⟩/dt = 2 Σ_j χ_ij w_j (⟨f_i^y⟩⟨f_j^x⟩ − ⟨f_i^x⟩⟨f_j^y⟩);
        // site 1 along f̂_x, site 2 along f̂_y gives slopes (−2χ, +2χ)
        for chi in [hz(3.0), -hz(3.0)] {
            let profile = ModeProfile::uniform(2, 1.0).unwrap();
            let state = initialize(&QuenchProtocol::bipartite_xy(0.5), &profile).unwrap();
            let graph = uniform_graph(2, chi);
            let slopes = fz_time_derivative(&state, &graph, 0.0);
            assert_relative_eq!(slopes[0], -2.0 * chi, max_relative = 1e-10);
            assert_relative_eq!(slopes[1], 2.0 * chi, max_relative = 1e-10);
        }
    }

    #[test]
    fn sign_reversal_negates_initial_slopes() {
        let spec = GaussianProfileSpec {
            waist_um: 16.0,
            cloud_center_um: 600.0,
            cloud_rms_um: 125.0,
            omega_peak_hz: 100.0,
            wavelength_um: 0.78,
            n_sites: 16,
            x_min_um: 350.0,
            x_max_um: 850.0,
            transverse_rms_um: None,
        };
        let profile = ModeProfile::gaussian(&spec).unwrap();
        let params = PhysicalParams::new(ParamsInput {
            kappa: khz(200.0),
            g: mhz(1.5),
            gamma_atom: mhz(6.0),
            delta_atom: -mhz(10_000.0),
            omega_z: None,
            b_field: 1.43,
            delta_c: mhz(0.7),
            n_bar: 1000.0,
            q_over_b2: hz(144.0),
            n_atoms: 1.0e5,
        })
        .unwrap();
        let mut graph = build_coupling_graph(&profile, &params).unwrap();
        graph.gamma.fill(0.0);
        let mut flipped = graph.clone();
        flipped.chi_plus.mapv_inplace(|v| -v);
        flipped.chi_minus.mapv_inplace(|v| -v);
        flipped.chi.mapv_inplace(|v| -v);
        flipped.h.mapv_inplace(|v| -v);

        let state = initialize(&QuenchProtocol::bipartite_xy(600.0), &profile).unwrap();
        let s1 = fz_time_derivative(&state, &graph, 0.0);
        let s2 = fz_time_derivative(&state, &flipped, 0.0);
        for (a, b) in s1.iter().zip(&s2) {
            assert_relative_eq!(*a, -b, max_relative = 1e-10, epsilon = 1e-18);
        }
    }

    #[test]
    fn magnetization_conserved_without_dissipation() {
        let spec = GaussianProfileSpec {
            waist_um: 16.0,
            cloud_center_um: 600.0,
            cloud_rms_um: 125.0,
            omega_peak_hz: 100.0,
            wavelength_um: 0.78,
            n_sites: 24,
            x_min_um: 350.0,
            x_max_um: 850.0,
            transverse_rms_um: None,
        };
        let profile = ModeProfile::gaussian(&spec).unwrap();
        let params = PhysicalParams::new(ParamsInput {
            kappa: khz(200.0),
            g: mhz(1.5),
            gamma_atom: mhz(6.0),
            delta_atom: -mhz(10_000.0),
            omega_z: None,
            b_field: 1.43,
            delta_c: mhz(0.7),
            n_bar: 2000.0,
            q_over_b2: hz(144.0),
            n_atoms: 1.0e5,
        })
        .unwrap();
        let mut graph = build_coupling_graph(&profile, &params).unwrap();
        graph.gamma.fill(0.0);
        let state = initialize(&QuenchProtocol::hop(600.0), &profile).unwrap();
        let m0 = state.total_magnetization();
        let chi_scale = graph.chi.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let t_final = 1.0 / chi_scale; // a sizeable quench evolution
        let opts = AdaptiveOptions {
            rtol: 1.0e-10,
            atol: 1.0e-13,
            ..Default::default()
        };
        let out = evolve(&state, &graph, 0.0, &uniform_times(t_final, 9), &opts).unwrap();
        for snap in &out {
            assert!(
                (snap.total_magnetization() - m0).abs() / m0.abs() < 1.0e-6,
                "magnetization drift at t = {}",
                snap.time
            );
            snap.validate().unwrap();
        }
    }

    #[test]
    fn two_site_spin_length_conserved() {
        let profile = ModeProfile::uniform(2, 1.0).unwrap();
        let state = initialize(&QuenchProtocol::bipartite_xy(0.5), &profile).unwrap();
        let graph = uniform_graph(2, hz(5.0));
        let out = evolve(
            &state,
            &graph,
            0.0,
            &uniform_times(0.02, 11),
            &AdaptiveOptions::default(),
        )
        .unwrap();
        for snap in &out {
            for s in snap.spin_expectations() {
                let len = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
                assert_relative_eq!(len, 1.0, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn relaxation_drives_toward_plus_one() {
        let profile = ModeProfile::uniform(1, 1.0).unwrap();
        let protocol = QuenchProtocol {
            kind: ProtocolKind::Custom,
            region_boundaries: vec![],
            pulses: vec![PulseSpec::None],
            initial_level: ZeemanLevel::MinusOne,
            smoothing_um: 0.0,
        };
        let state = initialize(&protocol, &profile).unwrap();
        let mut graph = zero_graph(1);
        let gamma = 50.0;
        graph.gamma[0] = gamma;
        let times = uniform_times(0.1, 6);
        let out = evolve(&state, &graph, 0.0, &times, &AdaptiveOptions::default()).unwrap();
        // rate-equation oracle: p_{−1} = e^{−2γt}, p_0 = 2γt e^{−2γt}
        for snap in &out {
            let t = snap.time;
            let p_m1 = (-2.0 * gamma * t).exp();
            let p_0 = 2.0 * gamma * t * (-2.0 * gamma * t).exp();
            let p_p1 = 1.0 - p_m1 - p_0;
            let rho = &snap.sites[0];
            assert_abs_diff_eq!(rho[[2, 2]].re, p_m1, epsilon = 1e-7);
            assert_abs_diff_eq!(rho[[1, 1]].re, p_0, epsilon = 1e-7);
            assert_abs_diff_eq!(rho[[0, 0]].re, p_p1, epsilon = 1e-7);
            snap.validate().unwrap();
        }
    }

    #[test]
    fn extraction_recovers_uniform_coupling() {
        let n = 16;
        let profile = ModeProfile::uniform(n, 1.0).unwrap();
        let chi = hz(2.0);
        let graph = uniform_graph(n, chi);
        let state =
            initialize(&QuenchProtocol::bipartite_xy(n as f64 / 2.0 - 0.5), &profile).unwrap();
        // expected total coupling per site: Σ_j χ_ij w_j = n χ
        let expected = n as f64 * chi;
        let t_osc = TWO_PI / expected.abs();
        let times = uniform_times(0.1 * t_osc, 40);
        let series = evolve(&state, &graph, 0.0, &times, &AdaptiveOptions::default()).unwrap();
        let mask_a = mask_range(&profile, -0.5, n as f64 / 2.0 - 0.6);
        let mask_b = mask_range(&profile, n as f64 / 2.0 - 0.6, n as f64);
        let got =
            extract_couplings(&series, &profile, &mask_a, &mask_b, ExtractionWindow::Full)
                .unwrap();
        assert_relative_eq!(got.chi_a, expected, max_relative = 0.02);
        assert_relative_eq!(got.chi_b, expected, max_relative = 0.02);
        assert_abs_diff_eq!(got.gamma_a / expected, 0.0, epsilon = 0.02);
        assert_abs_diff_eq!(got.gamma_b / expected, 0.0, epsilon = 0.02);
    }

    #[test]
    fn extraction_recovers_pure_relaxation() {
        let n = 12;
        let profile = ModeProfile::uniform(n, 1.0).unwrap();
        let mut graph = zero_graph(n);
        let gamma = hz(1.5);
        graph.gamma.fill(gamma);
        let state =
            initialize(&QuenchProtocol::bipartite_xy(n as f64 / 2.0 - 0.5), &profile).unwrap();
        let times = uniform_times(0.02 / gamma, 40);
        let series = evolve(&state, &graph, 0.0, &times, &AdaptiveOptions::default()).unwrap();
        let mask_a = mask_range(&profile, -0.5, n as f64 / 2.0 - 0.6);
        let mask_b = mask_range(&profile, n as f64 / 2.0 - 0.6, n as f64);
        let got =
            extract_couplings(&series, &profile, &mask_a, &mask_b, ExtractionWindow::Full)
                .unwrap();
        assert_relative_eq!(got.gamma_a, gamma, max_relative = 0.02);
        assert_relative_eq!(got.gamma_b, gamma, max_relative = 0.02);
        assert_abs_diff_eq!(got.chi_a / gamma, 0.0, epsilon = 0.02);
        assert_abs_diff_eq!(got.chi_b / gamma, 0.0, epsilon = 0.02);
    }

    #[test]
    fn extraction_window_from_observed_period() {
        // give the extractor a full oscillation and let it pick the first
        // 10% itself
        let n = 16;
        let profile = ModeProfile::uniform(n, 1.0).unwrap();
        let chi = hz(2.0);
        let graph = uniform_graph(n, chi);
        let state =
            initialize(&QuenchProtocol::bipartite_xy(n as f64 / 2.0 - 0.5), &profile).unwrap();
        let expected = n as f64 * chi;
        let t_osc = TWO_PI / expected.abs();
        let times = uniform_times(1.2 * t_osc, 400);
        let series = evolve(&state, &graph, 0.0, &times, &AdaptiveOptions::default()).unwrap();
        let mask_a = mask_range(&profile, -0.5, n as f64 / 2.0 - 0.6);
        let mask_b = mask_range(&profile, n as f64 / 2.0 - 0.6, n as f64);
        let got = extract_couplings(
            &series,
            &profile,
            &mask_a,
            &mask_b,
            ExtractionWindow::PeriodFraction { fraction: 0.1 },
        )
        .unwrap();
        assert_relative_eq!(got.chi_a, expected, max_relative = 0.03);
        assert_relative_eq!(got.chi_b, expected, max_relative = 0.03);
    }

    #[test]
    fn extraction_rejects_short_windows() {
        let profile = ModeProfile::uniform(4, 1.0).unwrap();
        let state = initialize(&QuenchProtocol::bipartite_xy(1.5), &profile).unwrap();
        let graph = uniform_graph(4, hz(1.0));
        let times = uniform_times(1.0e-4, 2);
        let series = evolve(&state, &graph, 0.0, &times, &AdaptiveOptions::default()).unwrap();
        let a = mask_range(&profile, -0.5, 1.5);
        let b = mask_range(&profile, 1.5, 4.0);
        assert!(matches!(
            extract_couplings(&series, &profile, &a, &b, ExtractionWindow::Full),
            Err(SimError::FitFailure(_))
        ));
    }

    #[test]
    fn state_invariants_hold_through_dissipative_inhomogeneous_evolution() {
        // full model: inhomogeneous couplings, longitudinal fields,
        // relaxation, quadratic Zeeman — every sample must stay a valid
        // density-matrix ensemble
        let spec = GaussianProfileSpec {
            waist_um: 16.0,
            cloud_center_um: 600.0,
            cloud_rms_um: 125.0,
            omega_peak_hz: 630.0,
            wavelength_um: 0.78,
            n_sites: 16,
            x_min_um: 350.0,
            x_max_um: 850.0,
            transverse_rms_um: None,
        };
        let profile = ModeProfile::gaussian(&spec).unwrap();
        let params = PhysicalParams::new(ParamsInput {
            kappa: khz(200.0),
            g: mhz(1.5),
            gamma_atom: mhz(6.0),
            delta_atom: -mhz(10_000.0),
            omega_z: None,
            b_field: 1.43,
            delta_c: mhz(1.05), // near a Raman resonance: strong dissipation
            n_bar: 3000.0,
            q_over_b2: hz(144.0),
            n_atoms: 1.0e5,
        })
        .unwrap();
        let graph = build_coupling_graph(&profile, &params).unwrap();
        let state = initialize(&QuenchProtocol::hop(600.0), &profile).unwrap();
        let gamma_max = graph.gamma.iter().cloned().fold(0.0, f64::max);
        assert!(gamma_max > 0.0);
        let times = uniform_times(3.0 / gamma_max, 12);
        let out = evolve(
            &state,
            &graph,
            params.quadratic_zeeman(),
            &times,
            &AdaptiveOptions::default(),
        )
        .unwrap();
        for snap in &out {
            snap.validate().unwrap();
        }
        // dissipation really acted: the unpulsed region relaxed upward
        let fz_end = out.last().unwrap().spin_expectations()[0][2];
        assert!(fz_end > -0.9, "no relaxation visible: fz = {}", fz_end);
    }

    #[test]
    fn pulse_smoothing_ramps_across_the_boundary() {
        let profile = ModeProfile::tabulated(
            &(0..41)
                .map(|k| (k as f64 - 20.0, 1.0, 1.0))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let mut sharp = QuenchProtocol::hop(0.0);
        let sharp_state = initialize(&sharp, &profile).unwrap();
        sharp.smoothing_um = 3.0;
        let smooth_state = initialize(&sharp, &profile).unwrap();
        let fz_sharp: Vec<f64> = sharp_state.spin_expectations().iter().map(|s| s[2]).collect();
        let fz_smooth: Vec<f64> = smooth_state
            .spin_expectations()
            .iter()
            .map(|s| s[2])
            .collect();
        // far from the boundary the two agree; across it the smooth profile
        // interpolates monotonically instead of jumping
        assert_relative_eq!(fz_smooth[0], fz_sharp[0], epsilon = 1e-3);
        assert_relative_eq!(fz_smooth[40], fz_sharp[40], epsilon = 1e-3);
        let mid = 20;
        assert!(fz_smooth[mid] > -1.0 + 0.05 && fz_smooth[mid] < -0.5 - 0.05);
        for k in 1..fz_smooth.len() {
            assert!(fz_smooth[k] >= fz_smooth[k - 1] - 1.0e-12);
        }
        // zero smoothing reproduces the sharp construction exactly
        let resharp = QuenchProtocol::hop(0.0);
        let again = initialize(&resharp, &profile).unwrap();
        for (a, b) in again.sites.iter().zip(&sharp_state.sites) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn protocol_validation_errors() {
        let mut p = QuenchProtocol::hop(1.0);
        p.pulses.pop();
        assert!(p.validate().is_err());
        let p2 = QuenchProtocol {
            kind: ProtocolKind::Custom,
            region_boundaries: vec![2.0, 1.0],
            pulses: vec![PulseSpec::None; 3],
            initial_level: ZeemanLevel::MinusOne,
            smoothing_um: 0.0,
        };
        assert!(p2.validate().is_err());
        let p3 = QuenchProtocol {
            kind: ProtocolKind::Custom,
            region_boundaries: vec![],
            pulses: vec![PulseSpec::Spin {
                axis: SpinAxis::X,
                angle: 7.0,
            }],
            initial_level: ZeemanLevel::MinusOne,
            smoothing_um: 0.0,
        };
        assert!(p3.validate().is_err());
    }
}
