//! Welch power spectral density estimation for complex records.
//!
//! Conventions: a record sampled at step `dt` holding a rotating-frame
//! process z(t); tones follow the physics sign e^{-i nu t}, so the record
//! is conjugated before the FFT to put a tone of detuning nu at the
//! standard DFT bin for +nu. Estimates are reported in continuous-time
//! units: a white process with E|z|^2 = V has a flat density V*dt.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Periodic Hann window (periodic form suits averaged periodograms).
pub(crate) fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * j as f64 / len as f64).cos()))
        .collect()
}

/// Largest power-of-two segment length that fits five segments into a
/// record of `samples`; `None` when even 64-sample segments do not fit.
pub(crate) fn pick_segment_len(samples: usize) -> Option<usize> {
    let cap = samples / 5;
    if cap < 64 {
        return None;
    }
    let mut len = 64;
    while len * 2 <= cap {
        len *= 2;
    }
    Some(len)
}

/// Averaged two-sided PSD over half-overlapping Hann segments.
pub(crate) struct WelchEstimate {
    /// Density per bin, continuous-time normalization.
    pub p: Vec<f64>,
    pub w1: f64,
    pub w2: f64,
    pub segment_len: usize,
    pub segments: usize,
    pub dt: f64,
}

impl WelchEstimate {
    /// Detuning of bin `k`, wrapped to (-pi/dt, pi/dt].
    pub fn nu_of(&self, k: usize) -> f64 {
        let m = self.segment_len;
        let step = 2.0 * std::f64::consts::PI / (m as f64 * self.dt);
        if k <= m / 2 {
            k as f64 * step
        } else {
            (k as f64 - m as f64) * step
        }
    }

    /// Bin whose center detuning is nearest `nu` (wraps negative values).
    pub fn bin_of(&self, nu: f64) -> usize {
        let m = self.segment_len as i64;
        let step = 2.0 * std::f64::consts::PI / (self.segment_len as f64 * self.dt);
        let k = (nu / step).round() as i64;
        k.rem_euclid(m) as usize
    }

    /// Converts the density excess at an on-bin spectral line back to the
    /// squared tone amplitude: |a|^2 = P_line * W2 / (dt * W1^2).
    pub fn line_factor(&self) -> f64 {
        self.w2 / (self.dt * self.w1 * self.w1)
    }

    /// Mean of `p` over `2*half + 1` bins centered on `k`, circular.
    pub fn band_mean(&self, k: usize, half: usize) -> f64 {
        let m = self.segment_len as i64;
        let mut acc = 0.0;
        for off in -(half as i64)..=(half as i64) {
            acc += self.p[(k as i64 + off).rem_euclid(m) as usize];
        }
        acc / (2 * half + 1) as f64
    }
}

pub(crate) fn welch_psd(record: &[Complex64], dt: f64, segment_len: usize) -> Result<WelchEstimate> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("welch: dt must be > 0 (got {dt:e})")));
    }
    if segment_len < 2 || record.len() < segment_len {
        return Err(Error::invalid(format!(
            "welch: record of {} samples cannot hold a segment of {}",
            record.len(),
            segment_len
        )));
    }
    let hop = segment_len / 2;
    let segments = (record.len() - segment_len) / hop + 1;
    let window = hann(segment_len);
    let w1: f64 = window.iter().sum();
    let w2: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::new().plan_fft_forward(segment_len);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); segment_len];
    let mut p = vec![0.0; segment_len];
    for s in 0..segments {
        let seg = &record[s * hop..s * hop + segment_len];
        for (b, (z, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = z.conj() * *w;
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (acc, v) in p.iter_mut().zip(&buf) {
            *acc += v.norm_sqr();
        }
    }
    let norm = dt / (w2 * segments as f64);
    for v in &mut p {
        *v *= norm;
    }
    Ok(WelchEstimate {
        p,
        w1,
        w2,
        segment_len,
        segments,
        dt,
    })
}
