//! Stochastic simulation of the homodyne readout record.
//!
//! The circuit amplitude obeys the linear Langevin equation
//!
//! ```text
//! db/dt = -(gamma + Gamma) b + i f(t) + sqrt(2 gamma) b_in - sqrt(2 Gamma) d_in
//! d_out = d_in + sqrt(2 Gamma) b
//! ```
//!
//! with the probe input d_in doubling as the damping channel, so the
//! output interferes with the circuit emission. The outgoing field is
//! split on a 50/50 beamsplitter against an independent auxiliary input
//! d_b of the same occupation, and the x quadrature of one port plus the
//! p quadrature of the other are recorded; the complex combination of the
//! two records equals d_out + conj(d_b), which is what this module
//! simulates and analyzes.
//!
//! Because the system is linear the integrator is exact: each step draws
//! the raw probe increment together with its exponentially filtered
//! integral from their joint Gaussian law, so the sampled record follows
//! the continuous-time process at any step size. The empirical SNR is the
//! on-bin spectral line of the signal run over the Daniell-smoothed noise
//! floor of a signal-free companion run.

use super::welch::{pick_segment_len, welch_psd, WelchEstimate};
use super::{ReadoutParams, SignalSpec};
use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Generator identifier for reproducibility metadata.
pub const RNG_ALGORITHM: &str = "chacha12";

/// Record length, resolution and reproducibility of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneConfig {
    /// Record span per trajectory in seconds (the signal-free companion
    /// record has the same span).
    pub duration: f64,
    /// Sample interval in seconds.
    pub dt: f64,
    /// Independent trajectory pairs to average.
    pub trajectories: usize,
    pub seed: u64,
}

/// Empirical SNR at one analysis bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalSnr {
    /// Bin-center detuning the requested value snapped to.
    pub nu: f64,
    pub s: f64,
    /// Standard error combining line and noise-floor uncertainty over
    /// the trajectory ensemble.
    pub stderr: f64,
}

/// Result of a homodyne simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneEstimate {
    pub bins: Vec<EmpiricalSnr>,
    /// Drive detuning after snapping to the analysis bin grid.
    pub tone_nu: f64,
    pub seed: u64,
    pub trajectories: usize,
    pub segment_len: usize,
    pub segments_per_record: usize,
    pub rng_algorithm: &'static str,
}

struct StepPlan {
    samples: usize,
    inv_dt: f64,
    rho: f64,
    phase_step: Complex64,
    /// i * f0 * (e^{-i nu dt} - e^{-lam dt}) / (lam - i nu), the exact
    /// one-step forcing integral for a unit phasor.
    forcing: Complex64,
    drive_mean: Complex64,
    sd_raw: f64,
    cxi_over_dt: f64,
    sd_res: f64,
    sb_filt: f64,
    sqrt_2gamma: f64,
    sqrt_2meas: f64,
    b_noise_std: f64,
}

impl StepPlan {
    fn new(params: &ReadoutParams, amp: Complex64, nu0: f64, dt: f64, samples: usize) -> Self {
        let lam = params.gamma + params.meas_rate;
        let x = lam * dt;
        let rho = (-x).exp();
        let v_i = (1.0 - (-2.0 * x).exp()) / (2.0 * lam);
        let c_xi = (1.0 - rho) / lam;
        // conditional residual variance; roundoff can push it barely negative
        let v_res = (v_i - c_xi * c_xi / dt).max(0.0);
        let sb2 = (params.n_b + 0.5) / 2.0;
        let sd2 = (params.n_d + 0.5) / 2.0;
        let pole = Complex64::new(lam, -nu0);
        let phase_step = Complex64::new(0.0, -nu0 * dt).exp();
        StepPlan {
            samples,
            inv_dt: 1.0 / dt,
            rho,
            phase_step,
            forcing: Complex64::new(0.0, 1.0) * amp * (phase_step - rho) / pole,
            drive_mean: Complex64::new(0.0, 1.0) * amp / pole,
            sd_raw: (sd2 * dt).sqrt(),
            cxi_over_dt: c_xi / dt,
            sd_res: (sd2 * v_res).sqrt(),
            sb_filt: (sb2 * v_i).sqrt(),
            sqrt_2gamma: (2.0 * params.gamma).sqrt(),
            sqrt_2meas: (2.0 * params.meas_rate).sqrt(),
            b_noise_std: ((params.gamma * (params.n_b + 0.5)
                + params.meas_rate * (params.n_d + 0.5))
                / (2.0 * lam))
                .sqrt(),
        }
    }

    /// Zero-amplitude copy for the signal-free companion record; draw
    /// counts are identical so the two runs stay stream-aligned.
    fn without_drive(&self) -> Self {
        StepPlan {
            forcing: Complex64::new(0.0, 0.0),
            drive_mean: Complex64::new(0.0, 0.0),
            ..*self
        }
    }
}

fn cnorm(rng: &mut ChaCha12Rng, scale: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// One record of the complex quadrature combination x_+ + i p_-.
fn run_record(plan: &StepPlan, rng: &mut ChaCha12Rng) -> Vec<Complex64> {
    // start in the stationary state: deterministic response plus noise
    let mut b = plan.drive_mean + cnorm(rng, plan.b_noise_std);
    let mut ph = Complex64::new(1.0, 0.0);
    let mut z = Vec::with_capacity(plan.samples);
    for _ in 0..plan.samples {
        let dd = cnorm(rng, plan.sd_raw);
        let id = dd * plan.cxi_over_dt + cnorm(rng, plan.sd_res);
        let ib = cnorm(rng, plan.sb_filt);
        let ddb = cnorm(rng, plan.sd_raw);
        let d_out = dd * plan.inv_dt + b * plan.sqrt_2meas;
        z.push(d_out + (ddb * plan.inv_dt).conj());
        b = b * plan.rho + plan.forcing * ph + ib * plan.sqrt_2gamma - id * plan.sqrt_2meas;
        ph *= plan.phase_step;
    }
    z
}

fn mean_and_var_of_mean(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var / n)
}

/// Simulates the homodyne record of a monochromatic drive and estimates
/// the SNR at each requested detuning (snapped to the analysis bin grid).
///
/// The drive detuning itself is snapped to the grid before simulation so
/// its spectral line occupies a single bin. Identical seeds give
/// bit-identical results; trajectory i uses generator streams 2i (signal
/// run) and 2i+1 (signal-free run).
pub fn simulate_homodyne(
    params: &ReadoutParams,
    signal: &SignalSpec,
    nu_eval: &[f64],
    cfg: &HomodyneConfig,
) -> Result<HomodyneEstimate> {
    params.validate()?;
    signal.validate()?;
    let (amp, nu_req) = match signal {
        SignalSpec::Tone { amplitude, nu } => (*amplitude, *nu),
        _ => {
            return Err(Error::HomodyneConfig(
                "time-domain simulation needs a single-tone signal".into(),
            ))
        }
    };
    if !(cfg.duration > 0.0) || !(cfg.dt > 0.0) || !cfg.duration.is_finite() || !cfg.dt.is_finite()
    {
        return Err(Error::HomodyneConfig(format!(
            "duration and dt must be positive (got {:e}, {:e})",
            cfg.duration, cfg.dt
        )));
    }
    if cfg.trajectories < 2 {
        return Err(Error::HomodyneConfig(
            "need at least 2 trajectories for a standard error".into(),
        ));
    }
    let fastest = cfg.dt * params.gamma.max(params.meas_rate);
    if fastest >= 0.05 {
        return Err(Error::HomodyneConfig(format!(
            "dt * max(gamma, Gamma) = {fastest:e} must stay below 0.05"
        )));
    }
    if cfg.duration * params.gamma < 10.0 {
        return Err(Error::HomodyneConfig(format!(
            "record spans only {:.2} circuit damping times; need at least 10",
            cfg.duration * params.gamma
        )));
    }
    if nu_req.abs() * cfg.dt > 0.1 {
        return Err(Error::HomodyneConfig(format!(
            "tone detuning {nu_req:e} is not resolved by dt = {:e} (need |nu| dt <= 0.1)",
            cfg.dt
        )));
    }
    if nu_eval.is_empty() {
        return Err(Error::invalid("need at least one evaluation detuning"));
    }
    let nyquist = std::f64::consts::PI / cfg.dt;
    if nu_eval.iter().any(|nu| !nu.is_finite() || nu.abs() >= nyquist) {
        return Err(Error::invalid(format!(
            "evaluation detunings must be finite and inside the Nyquist band (+-{nyquist:e})"
        )));
    }

    let samples = (cfg.duration / cfg.dt).floor() as usize;
    let segment_len = pick_segment_len(samples).ok_or_else(|| {
        Error::HomodyneConfig(format!(
            "record of {samples} samples is too short for spectral estimation"
        ))
    })?;
    let bin_step = 2.0 * std::f64::consts::PI / (segment_len as f64 * cfg.dt);
    // the ratio estimator reads the noise floor next to the line, so the
    // floor must look flat across the smoothing band: the band (0.05 of the
    // response width gamma + Gamma) has to cover at least the 3-bin minimum,
    // otherwise the "floor" samples sit far down the Lorentzian and the
    // estimate inflates without any warning from the statistics
    let lam = params.gamma + params.meas_rate;
    if 0.05 * lam < 3.0 * bin_step {
        return Err(Error::HomodyneConfig(format!(
            "Welch bins of {bin_step:e} rad/s cannot resolve the response width \
             gamma + Gamma = {lam:e} rad/s; lengthen the record until \
             duration * (gamma + Gamma) is at least {:.1e}",
            10.0 * 120.0 * std::f64::consts::PI
        )));
    }
    let tone_nu = (nu_req / bin_step).round() * bin_step;

    let plan = StepPlan::new(params, amp, tone_nu, cfg.dt, samples);
    let quiet = plan.without_drive();

    let runs: Vec<(WelchEstimate, WelchEstimate)> = (0..cfg.trajectories)
        .into_par_iter()
        .map(|r| {
            let mut rng_s = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng_s.set_stream(2 * r as u64);
            let sig = welch_psd(&run_record(&plan, &mut rng_s), cfg.dt, segment_len)?;
            let mut rng_n = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng_n.set_stream(2 * r as u64 + 1);
            let noise = welch_psd(&run_record(&quiet, &mut rng_n), cfg.dt, segment_len)?;
            Ok((sig, noise))
        })
        .collect::<Result<Vec<_>>>()?;

    // noise floor is smooth on the damping scale; smooth it over a band
    // much narrower than that but wide enough to beat per-bin scatter
    let half_band = ((0.05 * lam / bin_step).round() as usize).clamp(3, segment_len / 16);
    let line_factor = runs[0].0.line_factor();

    let bins = nu_eval
        .iter()
        .map(|&nu| {
            let k = runs[0].0.bin_of(nu);
            let line: Vec<f64> = runs.iter().map(|(s, _)| s.p[k]).collect();
            let floor: Vec<f64> = runs.iter().map(|(_, n)| n.band_mean(k, half_band)).collect();
            let (a, var_a) = mean_and_var_of_mean(&line);
            let (b, var_b) = mean_and_var_of_mean(&floor);
            let s = line_factor * (a - b) / b;
            let stderr = ((line_factor / b).powi(2) * var_a
                + (line_factor * a / (b * b)).powi(2) * var_b)
                .sqrt();
            EmpiricalSnr {
                nu: runs[0].0.nu_of(k),
                s,
                stderr,
            }
        })
        .collect();

    Ok(HomodyneEstimate {
        bins,
        tone_nu,
        seed: cfg.seed,
        trajectories: cfg.trajectories,
        segment_len,
        segments_per_record: runs[0].0.segments,
        rng_algorithm: RNG_ALGORITHM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::readout::snr_value;
    use approx::assert_relative_eq;

    fn params() -> ReadoutParams {
        ReadoutParams {
            meas_rate: 1.0,
            gamma: 1.0,
            n_b: 100.0,
            n_d: 0.0,
        }
    }

    fn tone(f_sq: f64, nu: f64) -> SignalSpec {
        SignalSpec::Tone {
            amplitude: Complex64::new(f_sq.sqrt(), 0.0),
            nu,
        }
    }

    fn cfg(duration: f64, seed: u64) -> HomodyneConfig {
        HomodyneConfig {
            duration,
            dt: 0.04,
            trajectories: 8,
            seed,
        }
    }

    #[test]
    fn resonant_tone_matches_the_analytic_snr() {
        let p = params();
        let sig = tone(2020.0, 0.0);
        let est = simulate_homodyne(&p, &sig, &[0.0], &cfg(1e4, 20_260_814)).unwrap();
        let bin = est.bins[0];
        let truth = snr_value(&p, 2020.0, 0.0);
        assert_relative_eq!(truth, 10.0, max_relative = 1e-12);
        assert!(
            (bin.s - truth).abs() <= 0.15 * truth,
            "S = {} vs {truth}",
            bin.s
        );
        assert!(
            (bin.s - truth).abs() <= 3.0 * bin.stderr,
            "S = {} +- {} vs {truth}",
            bin.s,
            bin.stderr
        );
        assert_eq!(est.tone_nu, 0.0);
        assert_eq!(est.rng_algorithm, "chacha12");
        assert!(est.segments_per_record >= 5);
    }

    #[test]
    fn detuned_tone_snaps_to_a_bin_and_matches() {
        let p = params();
        let est = simulate_homodyne(&p, &tone(2020.0, 1.5), &[1.5], &cfg(5e3, 7)).unwrap();
        let bin_step = 2.0 * std::f64::consts::PI / (est.segment_len as f64 * 0.04);
        assert!((est.tone_nu - 1.5).abs() <= 0.5 * bin_step);
        let bin = est.bins[0];
        assert_eq!(bin.nu, est.tone_nu);
        let truth = snr_value(&p, 2020.0, est.tone_nu);
        assert!(
            (bin.s - truth).abs() <= 0.15 * truth && (bin.s - truth).abs() <= 3.0 * bin.stderr,
            "S = {} +- {} vs {truth}",
            bin.s,
            bin.stderr
        );
    }

    #[test]
    fn noise_only_run_is_consistent_with_zero_everywhere() {
        let p = params();
        let grid = [0.0, -1.2, 3.0, 7.5, 20.0];
        let est = simulate_homodyne(&p, &tone(0.0, 0.0), &grid, &cfg(1e4, 99)).unwrap();
        for bin in &est.bins {
            assert!(bin.stderr > 0.0);
            assert!(
                bin.s.abs() <= 3.0 * bin.stderr,
                "nu = {}: {} +- {}",
                bin.nu,
                bin.s,
                bin.stderr
            );
        }
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let p = params();
        let sig = tone(500.0, 0.0);
        let c = HomodyneConfig {
            duration: 2e3,
            dt: 0.04,
            trajectories: 2,
            seed: 5,
        };
        let a = simulate_homodyne(&p, &sig, &[0.0, 2.0], &c).unwrap();
        let b = simulate_homodyne(&p, &sig, &[0.0, 2.0], &c).unwrap();
        assert_eq!(a, b);
        let other = simulate_homodyne(
            &p,
            &sig,
            &[0.0, 2.0],
            &HomodyneConfig { seed: 6, ..c },
        )
        .unwrap();
        assert_ne!(a.bins[0].s, other.bins[0].s);
    }

    #[test]
    fn invalid_requests_are_rejected_as_configuration_errors() {
        let p = params();
        let sig = tone(1.0, 0.0);
        let base = cfg(1e3, 1);

        let coarse = HomodyneConfig { dt: 0.06, ..base };
        assert!(matches!(
            simulate_homodyne(&p, &sig, &[0.0], &coarse),
            Err(Error::HomodyneConfig(_))
        ));

        let short = HomodyneConfig {
            duration: 5.0,
            ..base
        };
        assert!(simulate_homodyne(&p, &sig, &[0.0], &short).is_err());

        // long enough in damping times but too few samples to segment
        let tiny = HomodyneConfig {
            duration: 10.0,
            dt: 0.04,
            ..base
        };
        assert!(matches!(
            simulate_homodyne(&p, &sig, &[0.0], &tiny),
            Err(Error::HomodyneConfig(_))
        ));

        let lone = HomodyneConfig {
            trajectories: 1,
            ..base
        };
        assert!(simulate_homodyne(&p, &sig, &[0.0], &lone).is_err());

        let flat = SignalSpec::Flat {
            amplitude: Complex64::new(1.0, 0.0),
        };
        assert!(matches!(
            simulate_homodyne(&p, &flat, &[0.0], &base),
            Err(Error::HomodyneConfig(_))
        ));

        // tone faster than the sampling can resolve
        assert!(simulate_homodyne(&p, &tone(1.0, 5.0), &[0.0], &base).is_err());

        // evaluation outside the Nyquist band
        let err = simulate_homodyne(&p, &sig, &[100.0], &base).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn records_too_short_to_resolve_the_noise_floor_are_rejected() {
        // duration * (gamma + Gamma) = 2e3 passes the damping-time check
        // but leaves the Welch bins wider than a third of the smoothing
        // band, so the floor estimate would ride down the Lorentzian
        let p = params();
        let err = simulate_homodyne(&p, &tone(1.0, 0.0), &[0.0], &cfg(1e3, 4)).unwrap_err();
        match err {
            Error::HomodyneConfig(msg) => assert!(msg.contains("resolve"), "{msg}"),
            other => panic!("expected a config error, got {other}"),
        }
    }
}
