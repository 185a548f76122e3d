//! Steady-state and transient occupations of the coupled membrane/LC
//! system under optical cold damping of the membrane.
//!
//! The linearized Langevin system for the two mode amplitudes (a:
//! membrane, b: LC) in the rotating frame is
//!
//! ```text
//! da/dt = -(Gamma_opt + gamma_m) a - i (g/2) b + noise
//! db/dt = -gamma b - i (g/2) a + noise
//! ```
//!
//! All rates are amplitude rates (mode energy decays at twice the rate).
//! The exact second moments come from the steady-state Lyapunov equation;
//! the perturbative occupation formulas and the cooling limit are provided
//! alongside so every regime can be cross-checked against the exact
//! solution.

use crate::constants::{HBAR, K_B};
use crate::error::{Error, Result};
use crate::ode::integrate_to;
use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;
use std::fmt;

/// Rates and bath occupations of the cold-damping problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoolingParams {
    /// Coupling rate between the two modes.
    pub g: f64,
    /// Optically induced membrane damping (the cold channel).
    pub gamma_opt: f64,
    /// Intrinsic membrane damping.
    pub gamma_m: f64,
    /// LC damping.
    pub gamma: f64,
    /// Optical cavity linewidth; upper bound for useful gamma_opt.
    pub kappa: f64,
    /// Membrane bath occupation.
    pub n_a: f64,
    /// LC bath occupation.
    pub n_b: f64,
    /// Occupation of the optical damping channel (0 for an ideal cold
    /// drive).
    pub n_opt: f64,
}

impl CoolingParams {
    pub fn validate(&self) -> Result<()> {
        let mut faults = Vec::new();
        for (name, v) in [
            ("g", self.g),
            ("gamma_opt", self.gamma_opt),
            ("gamma_m", self.gamma_m),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("n_a", self.n_a),
            ("n_b", self.n_b),
            ("n_opt", self.n_opt),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                faults.push(format!("{name} must be finite and >= 0 (got {v:e})"));
            }
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(faults.join("; ")))
        }
    }

    /// Soft validity conditions that do not invalidate the math but mark
    /// the parameter point as outside the modeling assumptions.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.gamma_opt > self.kappa {
            w.push(format!(
                "gamma_opt = {:e} exceeds the cavity linewidth kappa = {:e}; cold damping this \
                 strong is not reachable",
                self.gamma_opt, self.kappa
            ));
        }
        w
    }

    /// Total membrane amplitude damping.
    pub fn membrane_damping(&self) -> f64 {
        self.gamma_opt + self.gamma_m
    }
}

/// Asymptotic-regime label for the perturbative formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoolingRegime {
    /// Membrane damping dominates the coupling (g is perturbative).
    StrongDamping,
    /// Coupling resolves the hybridized modes (damping is perturbative).
    WeakDampingResolved,
    /// Neither asymptotic formula is trustworthy.
    Intermediate,
}

impl fmt::Display for CoolingRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CoolingRegime::StrongDamping => "strong_damping",
            CoolingRegime::WeakDampingResolved => "weak_damping_resolved",
            CoolingRegime::Intermediate => "intermediate",
        };
        f.write_str(s)
    }
}

/// Exact and perturbative steady-state occupations at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateResult {
    pub n_a_exact: f64,
    pub n_b_exact: f64,
    /// Perturbative occupation valid in the strong-damping regime; absent
    /// where the formula is singular (g = 0 with a hot membrane bath).
    pub n_b_weak: Option<f64>,
    /// Leading-order occupation in the mode-resolved regime; absent when
    /// the membrane is undamped.
    pub n_b_strong: Option<f64>,
    /// Sympathetic cooling rate g^2 / (4 Gamma) of the LC mode.
    pub cooling_rate: f64,
    pub regime: CoolingRegime,
}

/// Bose-Einstein occupation 1 / (exp(hbar omega / k_B T) - 1); 0 at T = 0.
pub fn thermal_occupation(temperature: f64, omega: f64) -> f64 {
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

/// Rate at which the damped membrane extracts quanta from the LC mode.
/// `membrane_damping` must be positive.
pub fn cooling_rate(g: f64, membrane_damping: f64) -> f64 {
    g * g / (4.0 * membrane_damping)
}

fn regime(p: &CoolingParams) -> CoolingRegime {
    let damping = p.membrane_damping();
    if damping >= 3.0 * p.g {
        CoolingRegime::StrongDamping
    } else if p.g >= 3.0 * (p.gamma + damping) {
        CoolingRegime::WeakDampingResolved
    } else {
        CoolingRegime::Intermediate
    }
}

/// Both terms of the strong-damping occupation estimate: the cooled LC
/// bath contribution gamma/(Gamma+gamma) n_b and the membrane leak
/// (2 gamma_m / g) n_a.
pub fn occupation_weak_terms(p: &CoolingParams) -> Result<(f64, f64)> {
    p.validate()?;
    let damping = p.membrane_damping();
    let big_gamma = if damping > 0.0 {
        cooling_rate(p.g, damping)
    } else {
        f64::INFINITY
    };
    let lc_term = if big_gamma.is_infinite() {
        0.0
    } else {
        p.gamma / (big_gamma + p.gamma) * p.n_b
    };
    let leak_term = if p.gamma_m == 0.0 {
        0.0
    } else if p.g == 0.0 {
        return Err(Error::FormulaDomain(
            "membrane-leak term (2 gamma_m / g) n_a is singular at g = 0".into(),
        ));
    } else {
        2.0 * p.gamma_m / p.g * p.n_a
    };
    Ok((lc_term, leak_term))
}

/// Strong-damping occupation estimate (sum of [`occupation_weak_terms`]).
pub fn occupation_weak(p: &CoolingParams) -> Result<f64> {
    occupation_weak_terms(p).map(|(a, b)| a + b)
}

/// Mode-resolved occupation estimate gamma n_b / Gamma_m, leading order
/// in the damping rates.
pub fn occupation_strong(p: &CoolingParams) -> Result<f64> {
    p.validate()?;
    let damping = p.membrane_damping();
    if damping <= 0.0 {
        return Err(Error::FormulaDomain(
            "mode-resolved estimate needs membrane damping > 0".into(),
        ));
    }
    Ok(p.gamma * p.n_b / damping)
}

/// Floor of the achievable LC occupation: max(gamma n_b / g,
/// gamma n_b / kappa).
pub fn cooling_limit(p: &CoolingParams) -> Result<f64> {
    p.validate()?;
    if !(p.g > 0.0 && p.kappa > 0.0) {
        return Err(Error::FormulaDomain(format!(
            "cooling limit needs g, kappa > 0 (got {:e}, {:e})",
            p.g, p.kappa
        )));
    }
    Ok((p.gamma * p.n_b / p.g).max(p.gamma * p.n_b / p.kappa))
}

/// Drift matrix of the amplitude vector (a, b).
fn drift(p: &CoolingParams) -> Matrix2<Complex64> {
    let half_g = Complex64::new(0.0, -0.5 * p.g);
    Matrix2::new(
        Complex64::new(-p.membrane_damping(), 0.0),
        half_g,
        half_g,
        Complex64::new(-p.gamma, 0.0),
    )
}

/// Eigenvalues of the drift matrix (closed form for 2x2).
fn drift_eigenvalues(p: &CoolingParams) -> [Complex64; 2] {
    let a = p.membrane_damping();
    let mean = -0.5 * (a + p.gamma);
    let disc = Complex64::new(0.25 * (a - p.gamma).powi(2) - 0.25 * p.g * p.g, 0.0);
    let root = disc.sqrt();
    [mean + root, mean - root]
}

/// Exact steady state of the linear system via the Lyapunov equation
/// for the normal-ordered second moments N_ij = <v_i^dag v_j>:
///
/// ```text
/// conj(M) N + N M + D = 0,  D = diag(2 gamma_opt n_opt + 2 gamma_m n_a,
///                                    2 gamma n_b)
/// ```
///
/// Rejects parameter points whose drift is not Hurwitz (an undamped mode
/// never reaches a steady state).
pub fn lyapunov_steady_state(p: &CoolingParams) -> Result<SteadyStateResult> {
    p.validate()?;
    let worst = drift_eigenvalues(p)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst >= 0.0 {
        return Err(Error::NotHurwitz(worst));
    }

    let m = drift(p);
    let d = diffusion(p);

    // vec(conj(M) N + N M) = (I (x) conj(M) + M^T (x) I) vec(N), column-major
    let mut big = Matrix4::<Complex64>::zeros();
    let eye = Matrix2::<Complex64>::identity();
    let mc = m.map(|z| z.conj());
    let mt = m.transpose();
    for bi in 0..2 {
        for bj in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    big[(bi * 2 + i, bj * 2 + j)] =
                        eye[(bi, bj)] * mc[(i, j)] + mt[(bi, bj)] * eye[(i, j)];
                }
            }
        }
    }
    let rhs = Vector4::new(-d[0], Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), -d[1]);
    let n_vec = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::OdeFailure("Lyapunov system singular".into()))?;

    let n_a_exact = n_vec[0].re;
    let n_b_exact = n_vec[3].re;

    Ok(SteadyStateResult {
        n_a_exact,
        n_b_exact,
        n_b_weak: occupation_weak(p).ok(),
        n_b_strong: occupation_strong(p).ok(),
        cooling_rate: if p.membrane_damping() > 0.0 {
            cooling_rate(p.g, p.membrane_damping())
        } else {
            f64::INFINITY
        },
        regime: regime(p),
    })
}

fn diffusion(p: &CoolingParams) -> [Complex64; 2] {
    [
        Complex64::new(2.0 * (p.gamma_opt * p.n_opt + p.gamma_m * p.n_a), 0.0),
        Complex64::new(2.0 * p.gamma * p.n_b, 0.0),
    ]
}

/// One step of the occupation time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientSample {
    pub t: f64,
    pub n_a: f64,
    pub n_b: f64,
}

const TRANSIENT_RTOL: f64 = 1e-8;

/// Integrates the closed moment system (n_a, n_b, Re<a^dag b>, Im<a^dag b>)
/// from the given initial occupations (coherence starts at zero) and
/// returns `steps + 1` equally spaced samples including t = 0.
///
/// The sampling grid must resolve the fastest membrane rate:
/// `membrane_damping * duration / steps <= 0.1`, otherwise the request is
/// rejected as under-sampled (the integrator itself is adaptive between
/// samples, but a coarser grid cannot represent the transient it is asked
/// to report).
pub fn transient_occupations(
    p: &CoolingParams,
    initial: (f64, f64),
    duration: f64,
    steps: usize,
) -> Result<Vec<TransientSample>> {
    p.validate()?;
    if !(duration > 0.0) || steps == 0 {
        return Err(Error::invalid(format!(
            "need duration > 0 and steps >= 1 (got {duration:e}, {steps})"
        )));
    }
    if !(initial.0 >= 0.0 && initial.1 >= 0.0) {
        return Err(Error::invalid(format!(
            "initial occupations must be >= 0 (got {:e}, {:e})",
            initial.0, initial.1
        )));
    }
    let dt = duration / steps as f64;
    if p.membrane_damping() * dt > 0.1 {
        return Err(Error::invalid(format!(
            "sampling too coarse: membrane_damping * dt = {:e} > 0.1; raise steps above {}",
            p.membrane_damping() * dt,
            (10.0 * p.membrane_damping() * duration).ceil()
        )));
    }

    let a = p.membrane_damping();
    let d = diffusion(p);
    let (d_aa, d_bb) = (d[0].re, d[1].re);
    let g = p.g;
    let gamma = p.gamma;
    // state y = (n_a, n_b, Re c, Im c), c = <a^dag b>
    let f = move |_t: f64, y: &[f64; 4]| -> [f64; 4] {
        [
            -2.0 * a * y[0] + g * y[3] + d_aa,
            -2.0 * gamma * y[1] - g * y[3] + d_bb,
            -(a + gamma) * y[2],
            -(a + gamma) * y[3] + 0.5 * g * (y[1] - y[0]),
        ]
    };

    let atol = TRANSIENT_RTOL * (initial.0.max(initial.1).max(p.n_a).max(p.n_b).max(1.0));
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = [initial.0, initial.1, 0.0, 0.0];
    out.push(TransientSample {
        t: 0.0,
        n_a: y[0],
        n_b: y[1],
    });
    for k in 1..=steps {
        let (t0, t1) = ((k - 1) as f64 * dt, k as f64 * dt);
        y = integrate_to(&f, t0, y, t1, TRANSIENT_RTOL, atol)?;
        out.push(TransientSample {
            t: t1,
            n_a: y[0],
            n_b: y[1],
        });
    }
    Ok(out)
}
