//! Spin-1 operators and single-site states.
//!
//! Basis ordering is fixed as (m = +1, 0, −1); every engine in the crate uses
//! this convention.

use ndarray::{array, Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// f_z = diag(1, 0, −1).
pub fn fz() -> Array2<C64> {
    array![
        [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)],
    ]
}

/// Raising operator f₊: f₊|0⟩ = √2 |+1⟩, f₊|−1⟩ = √2 |0⟩.
pub fn fplus() -> Array2<C64> {
    array![
        [c(0.0, 0.0), c(SQRT2, 0.0), c(0.0, 0.0)],
        [c(0.0, 0.0), c(0.0, 0.0), c(SQRT2, 0.0)],
        [c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
    ]
}

/// Lowering operator f₋ = f₊†.
pub fn fminus() -> Array2<C64> {
    crate::linalg::dagger(&fplus())
}

/// f_x = (f₊ + f₋)/2.
pub fn fx() -> Array2<C64> {
    let s = 1.0 / SQRT2;
    array![
        [c(0.0, 0.0), c(s, 0.0), c(0.0, 0.0)],
        [c(s, 0.0), c(0.0, 0.0), c(s, 0.0)],
        [c(0.0, 0.0), c(s, 0.0), c(0.0, 0.0)],
    ]
}

/// f_y = (f₊ − f₋)/(2i).
pub fn fy() -> Array2<C64> {
    let s = 1.0 / SQRT2;
    array![
        [c(0.0, 0.0), c(0.0, -s), c(0.0, 0.0)],
        [c(0.0, s), c(0.0, 0.0), c(0.0, -s)],
        [c(0.0, 0.0), c(0.0, s), c(0.0, 0.0)],
    ]
}

/// Spin axes for rotation pulses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

impl SpinAxis {
    pub fn operator(self) -> Array2<C64> {
        match self {
            SpinAxis::X => fx(),
            SpinAxis::Y => fy(),
            SpinAxis::Z => fz(),
        }
    }
}

/// Zeeman sublevel of the spin-1 manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeemanLevel {
    PlusOne,
    Zero,
    MinusOne,
}

impl ZeemanLevel {
    /// Basis index in the (+1, 0, −1) ordering.
    pub fn index(self) -> usize {
        match self {
            ZeemanLevel::PlusOne => 0,
            ZeemanLevel::Zero => 1,
            ZeemanLevel::MinusOne => 2,
        }
    }

    /// m quantum number.
    pub fn m(self) -> i32 {
        match self {
            ZeemanLevel::PlusOne => 1,
            ZeemanLevel::Zero => 0,
            ZeemanLevel::MinusOne => -1,
        }
    }

    pub fn basis_vector(self) -> Array1<C64> {
        let mut v = Array1::zeros(3);
        v[self.index()] = c(1.0, 0.0);
        v
    }
}

/// Rotation exp(−i θ f_axis) in closed form.
///
/// For spin 1 the generator satisfies F³ = F, so
/// exp(−iθF) = 1 − i sin θ · F + (cos θ − 1) · F².
pub fn rotation(axis: SpinAxis, angle: f64) -> Array2<C64> {
    let f = axis.operator();
    let f2 = f.dot(&f);
    let eye = Array2::<C64>::eye(3);
    eye + f.mapv(|z| z * c(0.0, -angle.sin())) + f2.mapv(|z| z * c(angle.cos() - 1.0, 0.0))
}

/// Two-photon (Raman) rotation acting only on the pair of levels
/// (`from`, `from`+1).
///
/// A pulse of area θ transfers population |from⟩ → |from+1⟩ with amplitude
/// sin(θ/2); `phase` sets the transverse spin orientation it creates.
pub fn raman_rotation(from: ZeemanLevel, angle: f64, phase: f64) -> Result<Array2<C64>> {
    let upper = match from {
        ZeemanLevel::MinusOne => ZeemanLevel::Zero,
        ZeemanLevel::Zero => ZeemanLevel::PlusOne,
        ZeemanLevel::PlusOne => {
            return Err(SimError::InvalidProtocol(
                "Raman pulse from m = +1 has no higher level in the spin-1 manifold".into(),
            ))
        }
    };
    let (lo, hi) = (from.index(), upper.index());
    let mut u = Array2::<C64>::eye(3);
    let half = 0.5 * angle;
    u[[lo, lo]] = c(half.cos(), 0.0);
    u[[hi, hi]] = c(half.cos(), 0.0);
    u[[hi, lo]] = c(0.0, -1.0) * C64::from_polar(half.sin(), phase);
    u[[lo, hi]] = c(0.0, -1.0) * C64::from_polar(half.sin(), -phase);
    Ok(u)
}

/// ⟨ψ|op|ψ⟩ for a pure state.
pub fn expect_state(state: &Array1<C64>, op: &Array2<C64>) -> f64 {
    let opv = op.dot(state);
    state
        .iter()
        .zip(opv.iter())
        .map(|(a, b)| (a.conj() * b).re)
        .sum()
}

/// tr(ρ op) for a density matrix.
pub fn expect_rho(rho: &Array2<C64>, op: &Array2<C64>) -> f64 {
    rho.dot(op).diag().iter().map(|z| z.re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, expm, max_abs};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn fz_is_diagonal_basis() {
        let f = fz();
        assert_eq!(f[[0, 0]], c(1.0, 0.0));
        assert_eq!(f[[1, 1]], c(0.0, 0.0));
        assert_eq!(f[[2, 2]], c(-1.0, 0.0));
    }

    #[test]
    fn ladder_algebra() {
        // f₊ |−1⟩ = √2 |0⟩
        let v = ZeemanLevel::MinusOne.basis_vector();
        let w = fplus().dot(&v);
        assert_relative_eq!(w[1].re, SQRT2, max_relative = 1e-15);
        assert_abs_diff_eq!(w[0].norm(), 0.0);
        assert_abs_diff_eq!(w[2].norm(), 0.0);
        // f₊ = f_x + i f_y
        let rebuilt = fx() + fy().mapv(|z| z * c(0.0, 1.0));
        assert!(max_abs(&(rebuilt - fplus())) < 1e-15);
    }

    #[test]
    fn casimir_is_two() {
        let total = fx().dot(&fx()) + fy().dot(&fy()) + fz().dot(&fz());
        let expect = Array2::<C64>::eye(3).mapv(|z| z * c(2.0, 0.0));
        assert!(max_abs(&(total - expect)) < 1e-15);
    }

    #[test]
    fn commutation_relations() {
        // [f_x, f_y] = i f_z and cyclic
        let lhs = commutator(&fx(), &fy());
        let rhs = fz().mapv(|z| z * c(0.0, 1.0));
        assert!(max_abs(&(lhs - rhs)) < 1e-15);
        let lhs = commutator(&fy(), &fz());
        let rhs = fx().mapv(|z| z * c(0.0, 1.0));
        assert!(max_abs(&(lhs - rhs)) < 1e-15);
    }

    #[test]
    fn rotation_matches_matrix_exponential() {
        for axis in [SpinAxis::X, SpinAxis::Y, SpinAxis::Z] {
            for angle in [0.0, 0.3, std::f64::consts::FRAC_PI_2, 2.1, 5.9] {
                let closed = rotation(axis, angle);
                let gen = axis.operator().mapv(|z| z * c(0.0, -angle));
                let reference = expm(&gen);
                assert!(
                    max_abs(&(closed - reference)) < 1e-13,
                    "axis {:?}, angle {}",
                    axis,
                    angle
                );
            }
        }
    }

    #[test]
    fn raman_half_pulse_splits_population() {
        let u = raman_rotation(ZeemanLevel::MinusOne, std::f64::consts::FRAC_PI_2, 0.0).unwrap();
        let v = u.dot(&ZeemanLevel::MinusOne.basis_vector());
        // equal superposition of |−1⟩ and |0⟩: ⟨f_z⟩ = −1/2
        assert_relative_eq!(expect_state(&v, &fz()), -0.5, max_relative = 1e-14);
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        assert_relative_eq!(norm, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn raman_from_top_level_rejected() {
        assert!(raman_rotation(ZeemanLevel::PlusOne, 0.1, 0.0).is_err());
    }
}
