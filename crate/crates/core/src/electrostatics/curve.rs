//! Capacitance-versus-position curves and the characteristic length
//! zeta(x) = -c(x) / c'(x).
//!
//! The derivative comes from a local cubic fit over the 5 samples nearest
//! the query point (central differences would amplify solver noise; the
//! fit's analytic derivative filters it).

use super::{capacitance, solve_potential, CapacitorGeometry};
use crate::error::{Error, Result};
use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;

/// |c'| below c/D times this marks the curve as locally flat: zeta is
/// reported as effectively infinite instead of a noise-dominated number.
const FLAT_SLOPE_FLOOR: f64 = 1e-7;

/// zeta query result; the slab limit has no position dependence at all,
/// so a finite value would be pure solver noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZetaEstimate {
    Finite(f64),
    EffectivelyInfinite,
}

impl ZetaEstimate {
    pub fn finite(self) -> Option<f64> {
        match self {
            ZetaEstimate::Finite(z) => Some(z),
            ZetaEstimate::EffectivelyInfinite => None,
        }
    }
}

/// Sampled c(x_m) for one geometry and mesh level.
#[derive(Debug, Clone)]
pub struct CapacitanceCurve {
    /// Geometry of every sample; its `x_m` holds the first sample position.
    pub geometry: CapacitorGeometry,
    pub mesh_level: u32,
    /// Sample positions, strictly increasing.
    pub xs: Vec<f64>,
    /// Normalized capacitance per sample.
    pub cs: Vec<f64>,
    /// Relative change of c at the middle sample between this mesh level
    /// and the next: a Richardson-style resolution certificate.
    pub convergence_estimate: f64,
}

/// Solves the curve sample by sample. Each sample is an independent pure
/// solve (zero initial guess, fixed grid rule), so curve entries are
/// bit-identical to pointwise re-solves and sample order never matters;
/// samples may run in parallel.
pub fn capacitance_curve(
    geometry_sans_x: &CapacitorGeometry,
    x_min: f64,
    x_max: f64,
    n_samples: usize,
    mesh_level: u32,
) -> Result<CapacitanceCurve> {
    if n_samples < 3 {
        return Err(Error::invalid(format!(
            "curve needs at least 3 samples (got {n_samples})"
        )));
    }
    if !(x_min >= 0.0 && x_min < x_max) {
        return Err(Error::invalid(format!(
            "need 0 <= x_min < x_max (got {x_min:e}, {x_max:e})"
        )));
    }
    // worst case for the membrane-fits-in-gap invariant is x_max
    geometry_sans_x.with_x_m(x_max).validate()?;
    if mesh_level == 0 {
        return Err(Error::invalid("mesh_level must be >= 1"));
    }

    let xs: Vec<f64> = (0..n_samples)
        .map(|i| x_min + (x_max - x_min) * i as f64 / (n_samples - 1) as f64)
        .collect();

    let solve_at = |x: f64, level: u32| -> Result<f64> {
        capacitance(&solve_potential(&geometry_sans_x.with_x_m(x), level)?)
    };

    let cs: Vec<f64> = xs
        .par_iter()
        .enumerate()
        .map(|(index, &x)| {
            solve_at(x, mesh_level).map_err(|e| Error::CurveSample {
                index,
                x_m: x,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<f64>>>()?;

    let mid = n_samples / 2;
    let c_ref = solve_at(xs[mid], mesh_level + 1).map_err(|e| Error::CurveSample {
        index: mid,
        x_m: xs[mid],
        source: Box::new(e),
    })?;
    let convergence_estimate = ((cs[mid] - c_ref) / c_ref).abs();

    Ok(CapacitanceCurve {
        geometry: geometry_sans_x.with_x_m(xs[0]),
        mesh_level,
        xs,
        cs,
        convergence_estimate,
    })
}

impl CapacitanceCurve {
    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    /// Local cubic fit around `x`: returns (c, dc/dx). Window is the 5
    /// nearest samples (ties to the lower index), clamped at the ends.
    fn fit_at(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            let (di, dj) = ((self.xs[i] - x).abs(), (self.xs[j] - x).abs());
            di.partial_cmp(&dj).unwrap().then(i.cmp(&j))
        });
        let window = &order[..n.min(5)];

        // scale to u in [-1, 1] for conditioning of the normal equations
        let s = window
            .iter()
            .map(|&i| (self.xs[i] - x).abs())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);

        let mut gram = Matrix4::zeros();
        let mut moment = Vector4::zeros();
        for &i in window {
            let u = (self.xs[i] - x) / s;
            let row = [1.0, u, u * u, u * u * u];
            for a in 0..4 {
                for b in 0..4 {
                    gram[(a, b)] += row[a] * row[b];
                }
                moment[a] += row[a] * self.cs[i];
            }
        }
        // 5-point window with fewer than 4 distinct offsets cannot happen
        // for strictly increasing xs, so the LU solve is safe
        let coef = gram
            .lu()
            .solve(&moment)
            .expect("cubic fit normal equations singular");
        (coef[0], coef[1] / s)
    }

    /// Fitted c at `x` inside the sampled range.
    pub fn c_at(&self, x: f64) -> Result<f64> {
        self.check_inside(x)?;
        Ok(self.fit_at(x).0)
    }

    /// zeta(x) = -c/c' from the local cubic fit. `x` must lie strictly
    /// inside the sampled range.
    pub fn zeta(&self, x: f64) -> Result<ZetaEstimate> {
        self.check_inside(x)?;
        let (c, dc) = self.fit_at(x);
        Ok(Self::classify(c, dc, self.geometry.plate_gap))
    }

    fn classify(c: f64, dc: f64, d_gap: f64) -> ZetaEstimate {
        if dc.abs() < FLAT_SLOPE_FLOOR * c.abs() / d_gap {
            ZetaEstimate::EffectivelyInfinite
        } else {
            ZetaEstimate::Finite(-c / dc)
        }
    }

    /// zeta evaluated at every sample (endpoints use one-sided windows);
    /// this is what curve exports tabulate.
    pub fn zeta_samples(&self) -> Vec<ZetaEstimate> {
        self.xs
            .iter()
            .map(|&x| {
                let (c, dc) = self.fit_at(x);
                Self::classify(c, dc, self.geometry.plate_gap)
            })
            .collect()
    }

    fn check_inside(&self, x: f64) -> Result<()> {
        if x > self.x_min() && x < self.x_max() {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                x,
                lo: self.x_min(),
                hi: self.x_max(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fig2_sans_x() -> CapacitorGeometry {
        let d = 2e-6;
        CapacitorGeometry {
            plate_gap: d,
            wire_width: d / 4.0,
            wire_gap: 3.0 * d / 4.0,
            wire_thickness: d / 4.0,
            membrane_thickness: d / 20.0,
            eps_membrane: 7.6,
            x_m: 0.0,
        }
    }

    fn fig2_curve() -> CapacitanceCurve {
        let d = 2e-6;
        capacitance_curve(&fig2_sans_x(), 0.05 * d, 0.6 * d, 23, 1).unwrap()
    }

    #[test]
    fn curve_monotone_nonincreasing_for_dielectric_membrane() {
        // past ~0.5 D the true slope (|zeta| > 400 D) drops below level-1
        // mesh drift, so the strict check stops there; the production-level
        // integration suite covers the full export range
        let d = 2e-6;
        let curve = fig2_curve();
        for (i, w) in curve.cs.windows(2).enumerate() {
            if curve.xs[i + 1] > 0.5 * d + 1e-12 {
                break;
            }
            assert!(w[1] <= w[0] + 1e-12, "c rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn curve_matches_pointwise_resolve() {
        let curve = fig2_curve();
        for &i in &[1usize, 11, 21] {
            let g = fig2_sans_x().with_x_m(curve.xs[i]);
            let c = capacitance(&solve_potential(&g, 1).unwrap()).unwrap();
            assert!(
                ((c - curve.cs[i]) / c).abs() < 1e-10,
                "sample {i}: {c} vs {}",
                curve.cs[i]
            );
        }
    }

    #[test]
    fn zeta_positive_and_growing_away_from_wires() {
        let d = 2e-6;
        let curve = fig2_curve();
        let z1 = curve.zeta(0.2 * d).unwrap().finite().unwrap();
        let z2 = curve.zeta(0.4 * d).unwrap().finite().unwrap();
        assert!(z1 > 0.0);
        assert!(z2 > 5.0 * z1, "zeta(0.4D) = {z2:e} not >> zeta(0.2D) = {z1:e}");
    }

    #[test]
    fn zeta_reference_values_level1() {
        // frozen from the independent direct-solve reference of the same
        // discretization: zeta(0.2D) = 25.1024 D, zeta(0.4D) = 375.731 D
        let d = 2e-6;
        let curve = fig2_curve();
        let z1 = curve.zeta(0.2 * d).unwrap().finite().unwrap() / d;
        let z2 = curve.zeta(0.4 * d).unwrap().finite().unwrap() / d;
        assert_relative_eq!(z1, 25.1024, max_relative = 5e-3);
        assert_relative_eq!(z2, 375.731, max_relative = 5e-3);
    }

    #[test]
    fn zeta_agrees_with_central_difference_on_fresh_solves() {
        let d = 2e-6;
        let curve = fig2_curve();
        let x = 0.2 * d;
        let z_fit = curve.zeta(x).unwrap().finite().unwrap();
        let delta = 0.0125 * d;
        let c_at = |x: f64| {
            capacitance(&solve_potential(&fig2_sans_x().with_x_m(x), 1).unwrap()).unwrap()
        };
        let dc = (c_at(x + delta) - c_at(x - delta)) / (2.0 * delta);
        let z_cd = -c_at(x) / dc;
        assert_relative_eq!(z_fit, z_cd, max_relative = 0.05);
    }

    #[test]
    fn slab_curve_reports_infinite_zeta() {
        let d = 2e-6;
        let mut g = fig2_sans_x();
        g.wire_gap = 0.0; // solid plate: c independent of x_m
        let curve = capacitance_curve(&g, 0.1 * d, 0.5 * d, 9, 1).unwrap();
        assert_eq!(
            curve.zeta(0.3 * d).unwrap(),
            ZetaEstimate::EffectivelyInfinite
        );
    }

    #[test]
    fn queries_outside_range_rejected() {
        let d = 2e-6;
        let curve = fig2_curve();
        assert!(curve.zeta(0.05 * d).is_err(), "endpoint is not interior");
        assert!(curve.zeta(0.7 * d).is_err());
        assert!(curve.c_at(-0.1 * d).is_err());
        assert!(curve.zeta(0.3 * d).is_ok());
    }

    #[test]
    fn fitted_c_interpolates_samples() {
        let curve = fig2_curve();
        let x = 0.5 * (curve.xs[7] + curve.xs[8]);
        let c = curve.c_at(x).unwrap();
        assert!(c <= curve.cs[7] && c >= curve.cs[8]);
    }

    #[test]
    fn convergence_estimate_is_attached_and_small() {
        let curve = fig2_curve();
        assert!(curve.convergence_estimate > 0.0);
        assert!(curve.convergence_estimate < 1e-2);
    }

    #[test]
    fn bad_sampling_rejected() {
        let d = 2e-6;
        let g = fig2_sans_x();
        assert!(capacitance_curve(&g, 0.1 * d, 0.5 * d, 2, 1).is_err());
        assert!(capacitance_curve(&g, 0.5 * d, 0.1 * d, 9, 1).is_err());
        // membrane would hit the plate at x_max
        assert!(capacitance_curve(&g, 0.1 * d, 0.99 * d, 9, 1).is_err());
    }
}
