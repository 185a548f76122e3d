//! Adaptive Dormand-Prince 4(5) integration for the small fixed-size
//! moment systems in this crate.
//!
//! Hand-rolled rather than pulled in as a dependency: the systems here are
//! 4-dimensional, dense-output-free, and need deterministic behavior; a
//! 60-line classic tableau is easier to audit than an ODE framework.

use crate::error::{Error, Result};

const SAFETY: f64 = 0.9;
const MIN_SCALE: f64 = 0.2;
const MAX_SCALE: f64 = 5.0;

/// Integrates dy/dt = f(t, y) from `t0` to `t1`, returning y(t1).
///
/// Error control is the usual mixed norm: |e_i| / (atol + rtol * |y_i|),
/// RMS over components. Fails only if the step size underflows relative
/// to the interval (stiffness far beyond what the caller screened for).
pub fn integrate_to<const N: usize>(
    f: &dyn Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t1: f64,
    rtol: f64,
    atol: f64,
) -> Result<[f64; N]> {
    if !(t1 >= t0) {
        return Err(Error::invalid(format!(
            "integration interval reversed: {t0:e} -> {t1:e}"
        )));
    }
    if t1 == t0 {
        return Ok(y0);
    }

    // Dormand-Prince coefficients; the 5th-order weights are row a7.
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const B5: [f64; 7] = [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let span = t1 - t0;
    let mut t = t0;
    let mut y = y0;
    let mut h = span / 100.0;
    let h_min = span * 1e-14;

    while t < t1 {
        if h < h_min {
            return Err(Error::OdeFailure(format!(
                "step size underflow at t = {t:e} (h = {h:e})"
            )));
        }
        if t + h > t1 {
            h = t1 - t;
        }

        let mut k = [[0.0_f64; N]; 7];
        k[0] = f(t, &y);
        for stage in 0..6 {
            let mut arg = y;
            for (j, kj) in k.iter().enumerate().take(stage + 1) {
                let a = A[stage][j];
                if a != 0.0 {
                    for n in 0..N {
                        arg[n] += h * a * kj[n];
                    }
                }
            }
            k[stage + 1] = f(t + C[stage] * h, &arg);
        }

        let mut y5 = y;
        let mut err = [0.0_f64; N];
        for (j, kj) in k.iter().enumerate() {
            for n in 0..N {
                y5[n] += h * B5[j] * kj[n];
                err[n] += h * (B5[j] - B4[j]) * kj[n];
            }
        }

        let mut norm_sq = 0.0;
        for n in 0..N {
            let scale = atol + rtol * y[n].abs().max(y5[n].abs());
            let r = err[n] / scale;
            norm_sq += r * r;
        }
        let norm = (norm_sq / N as f64).sqrt();

        if norm <= 1.0 {
            t += h;
            y = y5;
        }
        let scale = if norm == 0.0 {
            MAX_SCALE
        } else {
            (SAFETY * norm.powf(-0.2)).clamp(MIN_SCALE, MAX_SCALE)
        };
        h *= scale;
    }
    Ok(y)
}
