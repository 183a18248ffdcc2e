//! Adaptive explicit Runge–Kutta integration (Dormand–Prince 5(4)).
//!
//! One embedded-pair stepper serves every ODE in the crate: mean-field
//! ensembles, semiclassical trajectories, and Lindblad density-matrix
//! evolution. States are flat `&[f64]` slices; callers pack complex data
//! themselves.

use crate::error::{Result, SimError};

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone)]
pub struct AdaptiveOptions {
    /// Relative tolerance per component.
    pub rtol: f64,
    /// Absolute tolerance per component.
    pub atol: f64,
    /// Initial step size; estimated from the interval when `None`.
    pub h_init: Option<f64>,
    /// Hard cap on accepted + rejected steps.
    pub max_steps: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rtol: 1.0e-8,
            atol: 1.0e-10,
            h_init: None,
            max_steps: 20_000_000,
        }
    }
}

// Dormand–Prince coefficients.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b − b̂ (5th-order solution minus 4th-order embedded estimate)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// Integrate `dy/dt = rhs(t, y)` from `t0`, returning the state at each of
/// the requested `sample_times` (which must be non-decreasing and ≥ `t0`).
///
/// Steps are clipped to land exactly on sample times, so the returned states
/// are solutions at those times rather than interpolants. Fails with
/// [`SimError::Integration`] carrying the last good time if the step size
/// underflows (e.g. the error estimate cannot be satisfied).
pub fn integrate<F>(
    mut rhs: F,
    t0: f64,
    y0: &[f64],
    sample_times: &[f64],
    opts: &AdaptiveOptions,
) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut samples = Vec::with_capacity(sample_times.len());
    if sample_times.is_empty() {
        return Ok(samples);
    }
    for w in sample_times.windows(2) {
        if w[1] < w[0] {
            return Err(SimError::Integration {
                t_reached: t0,
                message: "sample times must be non-decreasing".into(),
            });
        }
    }
    if sample_times[0] < t0 {
        return Err(SimError::Integration {
            t_reached: t0,
            message: "sample times must start at or after t0".into(),
        });
    }
    let t_end = *sample_times.last().unwrap();
    let span = (t_end - t0).max(f64::MIN_POSITIVE);

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut y_stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];

    rhs(t, &y, &mut k1);
    let mut h = opts.h_init.unwrap_or(1.0e-4 * span).min(span);
    let mut next_sample = 0usize;

    // emit any samples that coincide with t0
    while next_sample < sample_times.len() && sample_times[next_sample] <= t {
        samples.push(y.clone());
        next_sample += 1;
    }

    let mut steps = 0usize;
    while next_sample < sample_times.len() {
        if steps >= opts.max_steps {
            return Err(SimError::Integration {
                t_reached: t,
                message: format!("exceeded max_steps = {}", opts.max_steps),
            });
        }
        steps += 1;

        let target = sample_times[next_sample];
        if target - t <= span * 1.0e-15 {
            // target reached within round-off
            samples.push(y.clone());
            next_sample += 1;
            continue;
        }
        if h <= span * 1.0e-15 {
            return Err(SimError::Integration {
                t_reached: t,
                message: "step size underflow".into(),
            });
        }
        // clip onto the sample time without losing the controller's estimate
        let clipped = t + h >= target;
        let ht = if clipped { target - t } else { h };

        for i in 0..n {
            y_stage[i] = y[i] + ht * A21 * k1[i];
        }
        rhs(t + C2 * ht, &y_stage, &mut k2);
        for i in 0..n {
            y_stage[i] = y[i] + ht * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs(t + C3 * ht, &y_stage, &mut k3);
        for i in 0..n {
            y_stage[i] = y[i] + ht * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs(t + C4 * ht, &y_stage, &mut k4);
        for i in 0..n {
            y_stage[i] = y[i] + ht * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs(t + C5 * ht, &y_stage, &mut k5);
        for i in 0..n {
            y_stage[i] =
                y[i] + ht * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        rhs(t + ht, &y_stage, &mut k6);
        for i in 0..n {
            y_new[i] =
                y[i] + ht * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i]);
        }
        rhs(t + ht, &y_new, &mut k7);

        // weighted RMS error of the embedded 4th-order difference
        let mut err_sq = 0.0;
        for i in 0..n {
            let e = ht
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            let r = e / scale;
            err_sq += r * r;
        }
        let err = (err_sq / n as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            t += ht;
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7); // FSAL
            while next_sample < sample_times.len() && sample_times[next_sample] <= t {
                samples.push(y.clone());
                next_sample += 1;
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if clipped {
                // grow only relative to the natural step
                h = (h * factor.max(1.0)).min(span);
            } else {
                h = (ht * factor).min(span);
            }
        } else {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h = ht * factor;
        }
    }
    Ok(samples)
}

/// Convenience wrapper returning only the state at `t_end`.
pub fn integrate_to<F>(
    rhs: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    opts: &AdaptiveOptions,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut out = integrate(rhs, t0, y0, &[t_end], opts)?;
    Ok(out.pop().expect("one sample requested"))
}
