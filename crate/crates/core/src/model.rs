//! Biased equilibrium of the membrane, electromechanical coupling and
//! normal modes of the coupled membrane/LC system.
//!
//! A DC bias V pulls the membrane from its relaxed position x_e toward the
//! wires until the elastic force balances the electrostatic one:
//!
//! ```text
//! X = x_e - C(X) V^2 / (2 m omega_m^2 zeta(X))
//! ```
//!
//! The balance is solved on a [`CapacitanceCurve`]; every capacitance and
//! zeta evaluation goes through the curve's local fit, so the equilibrium
//! inherits the curve's mesh-level accuracy.

use crate::constants::{EPS0, HBAR};
use crate::electrostatics::{CapacitanceCurve, ZetaEstimate};
use crate::error::{Error, Result};

/// Mechanical membrane parameters. Damping rates are amplitude rates in
/// rad/s throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneParams {
    pub mass: f64,
    pub omega_m: f64,
    /// Intrinsic amplitude damping (half the energy linewidth).
    pub gamma_m: f64,
    /// Zero-voltage equilibrium gap between membrane and wire tops.
    pub x_e: f64,
}

impl MembraneParams {
    pub fn validate(&self) -> Result<()> {
        let mut faults = Vec::new();
        if !(self.mass > 0.0) {
            faults.push(format!("mass must be > 0 (got {:e})", self.mass));
        }
        if !(self.omega_m > 0.0) {
            faults.push(format!("omega_m must be > 0 (got {:e})", self.omega_m));
        }
        if !(self.gamma_m >= 0.0) {
            faults.push(format!("gamma_m must be >= 0 (got {:e})", self.gamma_m));
        }
        if !(self.x_e > 0.0) {
            faults.push(format!("x_e must be > 0 (got {:e})", self.x_e));
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(faults.join("; ")))
        }
    }

    /// Zero-point displacement sqrt(hbar / (2 m omega_m)).
    pub fn x_zp(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.omega_m)).sqrt()
    }
}

/// LC circuit parameters. The capacitor plate area converts the
/// dimensionless curve values into farads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    pub inductance: f64,
    /// LC amplitude damping in rad/s.
    pub gamma: f64,
    pub plate_area: f64,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<()> {
        let mut faults = Vec::new();
        if !(self.inductance > 0.0) {
            faults.push(format!(
                "inductance must be > 0 (got {:e})",
                self.inductance
            ));
        }
        if !(self.gamma >= 0.0) {
            faults.push(format!("gamma must be >= 0 (got {:e})", self.gamma));
        }
        if !(self.plate_area > 0.0) {
            faults.push(format!(
                "plate_area must be > 0 (got {:e})",
                self.plate_area
            ));
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(faults.join("; ")))
        }
    }

    pub fn omega_0(&self, capacitance: f64) -> f64 {
        1.0 / (self.inductance * capacitance).sqrt()
    }

    /// Zero-point charge sqrt(hbar / (2 L omega_0)).
    pub fn q_zp(&self, omega_0: f64) -> f64 {
        (HBAR / (2.0 * self.inductance * omega_0)).sqrt()
    }
}

/// Converts a normalized curve value c into farads for a parallel-plate
/// capacitor of the given area and gap.
pub fn absolute_capacitance(c: f64, plate_area: f64, plate_gap: f64) -> f64 {
    c * EPS0 * plate_area / plate_gap
}

/// Inductance that puts the LC resonance at `omega` for the given
/// capacitance (the resonance condition is a tuning choice, not physics
/// of the capacitor).
pub fn resonant_inductance(omega: f64, capacitance: f64) -> f64 {
    1.0 / (omega * omega * capacitance)
}

/// Solved bias working point with every derived quantity the downstream
/// stages need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasEquilibrium {
    pub v_bias: f64,
    /// Equilibrium membrane position under bias.
    pub x_eq: f64,
    /// Static charge C(X) V on the capacitor.
    pub q_bias: f64,
    /// Absolute capacitance at X, in farads.
    pub cap_at_x: f64,
    /// zeta(X); infinite zeta cannot reach here (it forces X = x_e, g = 0
    /// and is stored as f64::INFINITY).
    pub zeta_at_x: f64,
    pub g: f64,
    pub omega_0_at_x: f64,
    pub stable: bool,
    pub iterations: usize,
}

/// Electromechanical coupling g = sqrt(omega_m omega_0) *
/// sqrt(displacement / (2 zeta)) with displacement = x_e - X.
pub fn coupling_constant(
    omega_m: f64,
    omega_0: f64,
    displacement: f64,
    zeta: f64,
) -> Result<f64> {
    let radicand = displacement / (2.0 * zeta);
    if radicand < 0.0 {
        return Err(Error::NegativeRadicand { displacement, zeta });
    }
    Ok((omega_m * omega_0).sqrt() * radicand.sqrt())
}

/// Same coupling written through the capacitance swing: g =
/// sqrt(omega_m omega_0) * sqrt(delta_c / (2 c)). Exact when dC/dx is
/// constant over the displacement; agrees with [`coupling_constant`] to
/// first order otherwise.
pub fn coupling_constant_from_dc(omega_m: f64, omega_0: f64, delta_c: f64, c: f64) -> Result<f64> {
    if delta_c < 0.0 || c <= 0.0 {
        return Err(Error::FormulaDomain(format!(
            "capacitance swing form needs delta_c >= 0 and c > 0 (got {delta_c:e}, {c:e})"
        )));
    }
    Ok((omega_m * omega_0).sqrt() * (delta_c / (2.0 * c)).sqrt())
}

/// True iff the biased working point is a stable minimum: g < sqrt(omega_0
/// omega_m). The boundary itself counts as unstable (zero-frequency mode).
pub fn check_stability(omega_0: f64, omega_m: f64, g: f64) -> bool {
    g * g < omega_0 * omega_m
}

/// Normal modes of the coupled quadratic form. When the working point is
/// unstable, the minus mode turns imaginary: `omega_minus` then holds the
/// growth rate |Im omega_minus| and the flag is set instead of failing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalModes {
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// Rows are the orthonormal (membrane, circuit) mode vectors for the
    /// plus and minus modes, in that order.
    pub mode_vectors: [[f64; 2]; 2],
    pub minus_mode_imaginary: bool,
}

/// Eigen-decomposition of the mass-weighted potential matrix
/// [[omega_m^2, g w], [g w, omega_0^2]] with w = sqrt(omega_m omega_0).
/// On resonance the frequencies reduce to omega sqrt(1 +- g/omega).
pub fn normal_modes(omega_0: f64, omega_m: f64, g: f64) -> Result<NormalModes> {
    if !(omega_0 > 0.0 && omega_m > 0.0) || g < 0.0 {
        return Err(Error::invalid(format!(
            "normal modes need omega_0, omega_m > 0 and g >= 0 (got {omega_0:e}, {omega_m:e}, {g:e})"
        )));
    }
    let a = omega_m * omega_m;
    let d = omega_0 * omega_0;
    let b = g * (omega_m * omega_0).sqrt();

    let mean = 0.5 * (a + d);
    // hypot keeps the splitting accurate when |a - d| and b differ by
    // many orders of magnitude
    let half_gap = f64::hypot(0.5 * (a - d), b);
    let lam_plus = mean + half_gap;
    let lam_minus = mean - half_gap;

    let vec_for = |lam: f64| -> [f64; 2] {
        // (b, lam - a) and (lam - d, b) span the same eigendirection;
        // take the larger to dodge cancellation
        let u = [b, lam - a];
        let v = [lam - d, b];
        let (nu, nv) = (f64::hypot(u[0], u[1]), f64::hypot(v[0], v[1]));
        let (w, n) = if nu >= nv { (u, nu) } else { (v, nv) };
        if n == 0.0 {
            // fully degenerate (g = 0, equal frequencies): any basis works
            return [f64::NAN, f64::NAN];
        }
        [w[0] / n, w[1] / n]
    };

    let mut v_plus = vec_for(lam_plus);
    let mut v_minus = vec_for(lam_minus);
    if v_plus[0].is_nan() || v_minus[0].is_nan() {
        v_plus = [1.0, 0.0];
        v_minus = [0.0, 1.0];
    } else {
        // enforce exact orthogonality: rotate the minus vector to the
        // plus vector's orthogonal complement, fixing the sign by overlap
        let perp = [-v_plus[1], v_plus[0]];
        let sign = if v_minus[0] * perp[0] + v_minus[1] * perp[1] < 0.0 {
            -1.0
        } else {
            1.0
        };
        v_minus = [sign * perp[0], sign * perp[1]];
    }

    Ok(NormalModes {
        omega_plus: lam_plus.sqrt(),
        omega_minus: lam_minus.abs().sqrt(),
        mode_vectors: [v_plus, v_minus],
        minus_mode_imaginary: lam_minus < 0.0,
    })
}

const EQ_STEP_TOL_OVER_D: f64 = 1e-6;
const EQ_FORCE_TOL_OVER_D: f64 = 1e-9;
const EQ_MAX_ITER: usize = 10_000;

/// Solves the biased working point on the curve.
///
/// Two phases: a damped fixed-point iteration (damping halved whenever the
/// step direction flips, which happens near pull-in where the map turns
/// expansive), then a secant polish that pushes the force residual to the
/// 1e-9 m omega_m^2 D level the step tolerance alone cannot guarantee.
pub fn solve_equilibrium(
    membrane: &MembraneParams,
    circuit: &CircuitParams,
    curve: &CapacitanceCurve,
    v_bias: f64,
) -> Result<BiasEquilibrium> {
    membrane.validate()?;
    circuit.validate()?;
    if !v_bias.is_finite() {
        return Err(Error::invalid(format!("v_bias must be finite (got {v_bias:e})")));
    }
    let d_gap = curve.geometry.plate_gap;
    if !(membrane.x_e > curve.x_min() && membrane.x_e < curve.x_max()) {
        return Err(Error::OutOfRange {
            x: membrane.x_e,
            lo: curve.x_min(),
            hi: curve.x_max(),
        });
    }

    let cap_at = |x: f64| -> Result<f64> {
        Ok(absolute_capacitance(
            curve.c_at(x)?,
            circuit.plate_area,
            d_gap,
        ))
    };

    // displacement the bias asks for at position x; infinite zeta means
    // the capacitor exerts no force there
    let pull = |x: f64| -> Result<f64> {
        match curve.zeta(x)? {
            ZetaEstimate::EffectivelyInfinite => Ok(0.0),
            ZetaEstimate::Finite(z) => {
                Ok(cap_at(x)? * v_bias * v_bias / (2.0 * membrane.mass * membrane.omega_m.powi(2) * z))
            }
        }
    };

    let finish = |x: f64, iterations: usize| -> Result<BiasEquilibrium> {
        let cap = cap_at(x)?;
        let omega_0 = circuit.omega_0(cap);
        let (zeta_at_x, g) = match curve.zeta(x)? {
            ZetaEstimate::EffectivelyInfinite => (f64::INFINITY, 0.0),
            ZetaEstimate::Finite(z) => (
                z,
                coupling_constant(membrane.omega_m, omega_0, membrane.x_e - x, z)?,
            ),
        };
        Ok(BiasEquilibrium {
            v_bias,
            x_eq: x,
            q_bias: cap * v_bias,
            cap_at_x: cap,
            zeta_at_x,
            g,
            omega_0_at_x: omega_0,
            stable: check_stability(omega_0, membrane.omega_m, g),
            iterations,
        })
    };

    if v_bias == 0.0 {
        return finish(membrane.x_e, 0);
    }

    // phase 1: damped fixed-point iteration toward X = x_e - pull(X)
    let mut x = membrane.x_e;
    let mut alpha = 0.5;
    let mut prev_step = 0.0_f64;
    let mut iterations = 0;
    loop {
        if iterations >= EQ_MAX_ITER {
            return Err(Error::PullIn {
                iterations,
                last_x: x,
            });
        }
        iterations += 1;
        let target = membrane.x_e - pull(x)?;
        let step = alpha * (target - x);
        if step * prev_step < 0.0 {
            alpha *= 0.5;
        }
        prev_step = step;
        x += step;
        if (x - target).abs() < EQ_STEP_TOL_OVER_D * d_gap && step.abs() < EQ_STEP_TOL_OVER_D * d_gap
        {
            break;
        }
    }

    // phase 2: secant polish of f(x) = x - x_e + pull(x)
    let f = |x: f64| -> Result<f64> { Ok(x - membrane.x_e + pull(x)?) };
    let mut x0 = x;
    let mut x1 = x + 1e-7 * d_gap;
    let mut f0 = f(x0)?;
    let mut f1 = f(x1)?;
    for _ in 0..30 {
        if f1.abs() < 0.1 * EQ_FORCE_TOL_OVER_D * d_gap || f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = f(x1)?;
        iterations += 1;
    }
    if f1.abs() > EQ_FORCE_TOL_OVER_D * d_gap {
        return Err(Error::PullIn {
            iterations,
            last_x: x1,
        });
    }

    finish(x1, iterations)
}

/// Finds the bias voltage that displaces the membrane by `displacement`
/// (toward the wires) and solves the working point at that voltage.
pub fn solve_equilibrium_for_displacement(
    membrane: &MembraneParams,
    circuit: &CircuitParams,
    curve: &CapacitanceCurve,
    displacement: f64,
) -> Result<BiasEquilibrium> {
    if displacement < 0.0 {
        return Err(Error::invalid(format!(
            "displacement must be >= 0 (got {displacement:e}); the DC pull is always attractive"
        )));
    }
    if displacement == 0.0 {
        return solve_equilibrium(membrane, circuit, curve, 0.0);
    }
    let x_target = membrane.x_e - displacement;
    let zeta = match curve.zeta(x_target)? {
        ZetaEstimate::Finite(z) if z > 0.0 => z,
        _ => {
            return Err(Error::FormulaDomain(
                "no finite positive zeta at the target position; a bias cannot hold the membrane there"
                    .into(),
            ))
        }
    };
    let cap = absolute_capacitance(
        curve.c_at(x_target)?,
        circuit.plate_area,
        curve.geometry.plate_gap,
    );
    // invert the force balance at the target position
    let v = (displacement * 2.0 * membrane.mass * membrane.omega_m.powi(2) * zeta / cap).sqrt();
    solve_equilibrium(membrane, circuit, curve, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::electrostatics::{capacitance_curve, CapacitorGeometry};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    const D: f64 = 2e-6;

    fn fig2_sans_x() -> CapacitorGeometry {
        CapacitorGeometry {
            plate_gap: D,
            wire_width: D / 4.0,
            wire_gap: 3.0 * D / 4.0,
            wire_thickness: D / 4.0,
            membrane_thickness: D / 20.0,
            eps_membrane: 7.6,
            x_m: 0.0,
        }
    }

    fn fig2_curve() -> CapacitanceCurve {
        capacitance_curve(&fig2_sans_x(), 0.05 * D, 0.6 * D, 23, 1).unwrap()
    }

    /// Effective mass chosen so the zero-point amplitude is 3 fm at
    /// 2 pi x 1 MHz: m = hbar / (2 omega x_zp^2).
    fn membrane() -> MembraneParams {
        MembraneParams {
            mass: 9.325e-13,
            omega_m: 2.0 * std::f64::consts::PI * 1e6,
            gamma_m: 2.0 * std::f64::consts::PI * 0.5,
            x_e: 0.2 * D + 1e-8,
        }
    }

    fn circuit(curve: &CapacitanceCurve, membrane: &MembraneParams) -> CircuitParams {
        let cap = absolute_capacitance(curve.c_at(membrane.x_e).unwrap(), 1e-6, D);
        CircuitParams {
            inductance: resonant_inductance(membrane.omega_m, cap),
            gamma: 2.0 * std::f64::consts::PI * 1e3,
            plate_area: 1e-6,
        }
    }

    #[test]
    fn coupling_reference_values() {
        // 10 nm displacement at zeta = 60 um, and 0.4 um at 800 um
        let w = 1.0;
        let g1 = coupling_constant(w, w, 10e-9, 60e-6).unwrap();
        assert_relative_eq!(g1, 0.009128709291752769, max_relative = 1e-12);
        let g2 = coupling_constant(w, w, 0.4e-6, 800e-6).unwrap();
        assert_relative_eq!(g2, 0.015811388300841896, max_relative = 1e-12);
    }

    #[test]
    fn coupling_rejects_repulsive_configuration() {
        assert!(matches!(
            coupling_constant(1.0, 1.0, -1e-9, 60e-6),
            Err(Error::NegativeRadicand { .. })
        ));
        assert!(matches!(
            coupling_constant(1.0, 1.0, 1e-9, -60e-6),
            Err(Error::NegativeRadicand { .. })
        ));
    }

    #[test]
    fn coupling_forms_agree_on_actual_curve() {
        let curve = fig2_curve();
        let (x_e, x) = (0.225 * D, 0.2 * D);
        let zeta = curve.zeta(x).unwrap().finite().unwrap();
        let g_zeta = coupling_constant(1.0, 1.0, x_e - x, zeta).unwrap();
        let (c_e, c_x) = (curve.c_at(x_e).unwrap(), curve.c_at(x).unwrap());
        let g_dc = coupling_constant_from_dc(1.0, 1.0, c_x - c_e, c_x).unwrap();
        assert_relative_eq!(g_zeta, g_dc, max_relative = 0.10);
    }

    #[test]
    fn resonance_frequencies_match_closed_form() {
        let w = 2.0 * std::f64::consts::PI * 1e6;
        for gr in [1e-4, 0.01, 0.5] {
            let m = normal_modes(w, w, gr * w).unwrap();
            assert_relative_eq!(m.omega_plus, w * (1.0 + gr).sqrt(), max_relative = 1e-12);
            assert_relative_eq!(m.omega_minus, w * (1.0 - gr).sqrt(), max_relative = 1e-12);
            assert!(!m.minus_mode_imaginary);
        }
    }

    #[test]
    fn resonance_frequency_product_invariant() {
        let w = 1.7e6;
        for gr in [1e-3, 0.2, 0.9] {
            let m = normal_modes(w, w, gr * w).unwrap();
            assert_relative_eq!(
                m.omega_plus * m.omega_minus,
                w * w * (1.0 - gr * gr).sqrt(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn uncoupled_modes_are_degenerate() {
        let m = normal_modes(3.0, 3.0, 0.0).unwrap();
        assert_eq!(m.omega_plus, 3.0);
        assert_eq!(m.omega_minus, 3.0);
        let [p, q] = m.mode_vectors;
        assert_abs_diff_eq!(p[0] * q[0] + p[1] * q[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn mode_vectors_orthonormal_and_reconstruct_matrix() {
        for (w0, wm, g) in [
            (1.0, 1.0, 0.3),
            (2.5e6, 1.0e6, 3.0e5),
            (1.0e6, 1.0e6, 1e-2),
            (5.0, 1.0, 2.0),
        ] {
            let m = normal_modes(w0, wm, g).unwrap();
            let [p, q] = m.mode_vectors;
            assert_abs_diff_eq!(f64::hypot(p[0], p[1]), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(f64::hypot(q[0], q[1]), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p[0] * q[0] + p[1] * q[1], 0.0, epsilon = 1e-12);

            let lam_p = m.omega_plus * m.omega_plus;
            let lam_m = if m.minus_mode_imaginary {
                -m.omega_minus * m.omega_minus
            } else {
                m.omega_minus * m.omega_minus
            };
            let k = [
                [wm * wm, g * (wm * w0).sqrt()],
                [g * (wm * w0).sqrt(), w0 * w0],
            ];
            let scale = k[0][0].abs().max(k[1][1].abs());
            for a in 0..2 {
                for b in 0..2 {
                    let rebuilt = lam_p * p[a] * p[b] + lam_m * q[a] * q[b];
                    assert_abs_diff_eq!(rebuilt, k[a][b], epsilon = 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn stability_boundary_counts_unstable() {
        assert!(check_stability(4.0, 1.0, 1.9999999));
        assert!(!check_stability(4.0, 1.0, 2.0));
        assert!(!check_stability(4.0, 1.0, 2.1));
        let m = normal_modes(4.0, 1.0, 2.0).unwrap();
        assert_eq!(m.omega_minus, 0.0);
        assert!(!m.minus_mode_imaginary); // boundary: zero, not imaginary
        let m = normal_modes(4.0, 1.0, 2.1).unwrap();
        assert!(m.minus_mode_imaginary);
        assert!(m.omega_minus > 0.0);
    }

    #[test]
    fn stability_flag_tracks_potential_matrix_eigenvalue() {
        for (w0, wm, g) in [
            (1.0_f64, 1.0_f64, 0.5_f64),
            (2.0, 0.5, 0.999),
            (2.0, 0.5, 1.0001),
            (3.0e6, 1.0e6, 1.7e6),
            (3.0e6, 1.0e6, 1.8e6),
        ] {
            let k = [
                [wm * wm, g * (wm * w0).sqrt()],
                [g * (wm * w0).sqrt(), w0 * w0],
            ];
            let mean = 0.5 * (k[0][0] + k[1][1]);
            let half = f64::hypot(0.5 * (k[0][0] - k[1][1]), k[0][1]);
            let min_eig = mean - half;
            assert_eq!(check_stability(w0, wm, g), min_eig > 0.0, "at g = {g}");
        }
    }

    #[test]
    fn zero_bias_is_identity() {
        let curve = fig2_curve();
        let mem = membrane();
        let eq = solve_equilibrium(&mem, &circuit(&curve, &mem), &curve, 0.0).unwrap();
        assert_eq!(eq.x_eq, mem.x_e);
        assert_eq!(eq.q_bias, 0.0);
        assert_eq!(eq.g, 0.0);
        assert!(eq.stable);
        assert_eq!(eq.iterations, 0);
    }

    #[test]
    fn ten_nanometer_displacement_gives_percent_coupling_at_a_few_volts() {
        let curve = fig2_curve();
        let mem = membrane();
        let cir = circuit(&curve, &mem);
        let eq = solve_equilibrium_for_displacement(&mem, &cir, &curve, 1e-8).unwrap();
        assert_relative_eq!(mem.x_e - eq.x_eq, 1e-8, max_relative = 1e-3);
        assert!(eq.stable);
        // g/omega ~ sqrt(10 nm / (2 * 25 D)) ~ 0.01
        assert_relative_eq!(eq.g / mem.omega_m, 0.01, max_relative = 0.15);
        assert!(
            eq.v_bias > 0.5 && eq.v_bias < 20.0,
            "bias {} V outside the bench-supply range",
            eq.v_bias
        );
    }

    #[test]
    fn force_balance_residual_below_tolerance() {
        let curve = fig2_curve();
        let mem = membrane();
        let cir = circuit(&curve, &mem);
        let eq = solve_equilibrium(&mem, &cir, &curve, 2.0).unwrap();
        let spring = mem.mass * mem.omega_m.powi(2);
        let residual =
            spring * (mem.x_e - eq.x_eq) - eq.q_bias * eq.q_bias / (2.0 * eq.cap_at_x * eq.zeta_at_x);
        assert!(
            residual.abs() < 1e-9 * spring * D,
            "residual {residual:e} vs bound {:e}",
            1e-9 * spring * D
        );
        assert_eq!(eq.q_bias, eq.cap_at_x * eq.v_bias);
    }

    #[test]
    fn solved_point_is_grid_search_energy_minimum() {
        let curve = fig2_curve();
        let mem = membrane();
        let cir = circuit(&curve, &mem);
        let eq = solve_equilibrium(&mem, &cir, &curve, 2.0).unwrap();
        let spring = mem.mass * mem.omega_m.powi(2);
        let energy = |x: f64| -> f64 {
            let cap = absolute_capacitance(curve.c_at(x).unwrap(), cir.plate_area, D);
            0.5 * spring * (x - mem.x_e).powi(2) - 0.5 * cap * eq.v_bias * eq.v_bias
        };
        let u_eq = energy(eq.x_eq);
        let (lo, hi) = (curve.x_min() * 1.001, curve.x_max() * 0.999);
        for k in 0..=1000 {
            let x = lo + (hi - lo) * k as f64 / 1000.0;
            assert!(
                energy(x) >= u_eq - 1e-12 * u_eq.abs().max(spring * D * D),
                "energy at {x:e} below solved point"
            );
        }
    }

    #[test]
    fn coupling_grows_with_bias() {
        let curve = fig2_curve();
        let mem = membrane();
        let cir = circuit(&curve, &mem);
        let mut last_g = -1.0;
        for v in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let eq = solve_equilibrium(&mem, &cir, &curve, v).unwrap();
            assert!(eq.g > last_g, "g not increasing at V = {v}");
            last_g = eq.g;
        }
    }

    #[test]
    fn runaway_bias_reports_pull_in_or_range_exit() {
        let curve = fig2_curve();
        let mem = membrane();
        let cir = circuit(&curve, &mem);
        let err = solve_equilibrium(&mem, &cir, &curve, 4000.0).unwrap_err();
        assert!(
            matches!(err, Error::PullIn { .. } | Error::OutOfRange { .. }),
            "unexpected error {err}"
        );
    }

    #[test]
    fn relaxed_position_must_sit_inside_curve() {
        let curve = fig2_curve();
        let mut mem = membrane();
        mem.x_e = 0.7 * D;
        let cir = circuit(&curve, &membrane());
        assert!(matches!(
            solve_equilibrium(&mem, &cir, &curve, 1.0),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn slab_geometry_feels_no_dc_force() {
        let mut g = fig2_sans_x();
        g.wire_gap = 0.0;
        let curve = capacitance_curve(&g, 0.1 * D, 0.5 * D, 9, 1).unwrap();
        let mem = MembraneParams {
            x_e: 0.3 * D,
            ..membrane()
        };
        let cir = circuit(&fig2_curve(), &mem);
        let eq = solve_equilibrium(&mem, &cir, &curve, 5.0).unwrap();
        assert_eq!(eq.x_eq, mem.x_e);
        assert_eq!(eq.g, 0.0);
        assert!(eq.zeta_at_x.is_infinite());
    }

    #[test]
    fn zero_point_scales() {
        let mem = membrane();
        let x_zp = mem.x_zp();
        assert_relative_eq!(
            x_zp,
            (HBAR / (2.0 * mem.mass * mem.omega_m)).sqrt(),
            max_relative = 1e-15
        );
        let cir = CircuitParams {
            inductance: 25.33e-3,
            gamma: 1.0,
            plate_area: 1e-6,
        };
        assert!(cir.q_zp(2.0 * std::f64::consts::PI * 1e6) > 0.0);
    }
}
