//! Parameter sweeps: re-solve the working point and one downstream stage
//! over a 1- or 2-axis grid.
//!
//! Geometry parameters are deliberately not sweepable: every point would
//! need a fresh FEM solve. A sweep reuses the run's capacitance curve and
//! varies post-FEM quantities only, so a point costs an interpolated
//! equilibrium solve and the grid can be generous. Points evaluate
//! independently (possibly in parallel under --jobs) and commit to the
//! table in input order.

use rayon::prelude::*;

use crate::exports::Cell;
use crate::pipeline::{
    cool_row, cooling_params_for, readout_for, solve_working_point, CliError, COOL_COLUMNS,
};
use crate::scenario::{
    BiasSpec, CircuitDamping, Scenario, SweepAxis, SweepBlock, SweepScale, SweepStage,
};
use emlc_core::{lyapunov_steady_state, normal_modes, rf_baseline_snr, snr_value, CapacitanceCurve};

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

pub(crate) fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn axis_values(axis: &SweepAxis) -> Vec<f64> {
    match axis.scale {
        SweepScale::Linear => linspace(axis.start, axis.stop, axis.points),
        SweepScale::Log => logspace(axis.start, axis.stop, axis.points),
    }
}

/// Writes `value` into the scenario field the dotted path names. The
/// parser admits only paths from [`crate::scenario::SWEEP_PATHS`], and the
/// pipeline checks the block exists before the sweep starts.
fn apply(scenario: &mut Scenario, path: &str, value: f64) {
    match path {
        "membrane.x_e" => scenario.membrane.as_mut().unwrap().x_e = value,
        "membrane.gamma_m" => scenario.membrane.as_mut().unwrap().gamma_m = value,
        "membrane.temperature" => scenario.membrane.as_mut().unwrap().temperature = value,
        "circuit.gamma" => {
            scenario.circuit.as_mut().unwrap().damping = CircuitDamping::Rate(value)
        }
        "circuit.temperature" => scenario.circuit.as_mut().unwrap().temperature = value,
        "optics.Gamma_m" => scenario.optics.as_mut().unwrap().gamma_opt = value,
        "optics.kappa" => scenario.optics.as_mut().unwrap().kappa = value,
        "optics.n_opt" => scenario.optics.as_mut().unwrap().n_opt = value,
        "bias.V" => *scenario.bias.as_mut().unwrap() = BiasSpec::Voltage(value),
        "bias.displacement" => *scenario.bias.as_mut().unwrap() = BiasSpec::Displacement(value),
        "signal.amplitude" => scenario.signal.as_mut().unwrap().amplitude = value,
        "signal.nu" => scenario.signal.as_mut().unwrap().nu = value,
        other => unreachable!("parser admitted sweep path {other}"),
    }
}

fn stage_columns(stage: SweepStage) -> Vec<&'static str> {
    match stage {
        SweepStage::Equilibrium => {
            vec!["x_eq_m", "g_rad_per_s", "omega_0_rad_per_s", "stable"]
        }
        SweepStage::Modes => vec![
            "omega_plus_rad_per_s",
            "omega_minus_rad_per_s",
            "minus_mode_imaginary",
        ],
        SweepStage::Cool => COOL_COLUMNS.to_vec(),
        SweepStage::Snr => vec!["S", "S_rf_baseline"],
    }
}

/// Stage outputs at one (already mutated) scenario point. The snr stage
/// reports the analytic value at the scenario's tone detuning; sweeps
/// never run the Monte-Carlo cross-check.
fn evaluate(
    scenario: &Scenario,
    curve: &CapacitanceCurve,
    stage: SweepStage,
) -> emlc_core::Result<Vec<Cell>> {
    let wp = solve_working_point(scenario, curve)?;
    match stage {
        SweepStage::Equilibrium => Ok(vec![
            Cell::Num(wp.eq.x_eq),
            Cell::Num(wp.eq.g),
            Cell::Num(wp.eq.omega_0_at_x),
            Cell::Bool(wp.eq.stable),
        ]),
        SweepStage::Modes => {
            let m = normal_modes(wp.eq.omega_0_at_x, wp.membrane.omega_m, wp.eq.g)?;
            Ok(vec![
                Cell::Num(m.omega_plus),
                Cell::Num(m.omega_minus),
                Cell::Bool(m.minus_mode_imaginary),
            ])
        }
        SweepStage::Cool => {
            let params = cooling_params_for(scenario, &wp);
            let result = lyapunov_steady_state(&params)?;
            Ok(cool_row(params.gamma_opt, &result))
        }
        SweepStage::Snr => {
            let setup = readout_for(scenario, &wp)?;
            let nu = scenario.signal.as_ref().expect("signal block checked").nu;
            let f_sq = setup.f_amp * setup.f_amp;
            Ok(vec![
                Cell::Num(snr_value(&setup.params, f_sq, nu)),
                Cell::Num(rf_baseline_snr(
                    setup.params.gamma,
                    setup.params.n_b,
                    setup.f_amp,
                )),
            ])
        }
    }
}

/// Evaluates the full grid and returns (columns, rows), axis-1 major.
pub(crate) fn sweep_table(
    scenario: &Scenario,
    curve: &CapacitanceCurve,
    sw: &SweepBlock,
) -> Result<(Vec<String>, Vec<Vec<Cell>>), CliError> {
    let v1 = axis_values(&sw.axis1);
    let points: Vec<(f64, Option<f64>)> = match &sw.axis2 {
        None => v1.iter().map(|&a| (a, None)).collect(),
        Some(axis2) => {
            let v2 = axis_values(axis2);
            v1.iter()
                .flat_map(|&a| v2.iter().map(move |&b| (a, Some(b))))
                .collect()
        }
    };

    // evaluate everything, then commit in input order; the first failing
    // point (by grid order) decides the error
    let results: Vec<emlc_core::Result<Vec<Cell>>> = points
        .par_iter()
        .map(|&(a, b)| {
            let mut local = scenario.clone();
            apply(&mut local, &sw.axis1.path, a);
            if let (Some(b), Some(axis2)) = (b, &sw.axis2) {
                apply(&mut local, &axis2.path, b);
            }
            evaluate(&local, curve, sw.stage)
        })
        .collect();

    let mut rows = Vec::with_capacity(points.len());
    for (&(a, b), result) in points.iter().zip(results) {
        match result {
            Ok(tail) => {
                let mut row = vec![Cell::Num(a)];
                if let Some(b) = b {
                    row.push(Cell::Num(b));
                }
                row.extend(tail);
                rows.push(row);
            }
            Err(source) => {
                let mut context = format!("sweep point {} = {a:e}", sw.axis1.path);
                if let (Some(b), Some(axis2)) = (b, &sw.axis2) {
                    use std::fmt::Write as _;
                    write!(context, ", {} = {b:e}", axis2.path).unwrap();
                }
                return Err(CliError::AtPoint { context, source });
            }
        }
    }

    let mut columns: Vec<String> = vec![sw.axis1.path.clone()];
    if let Some(axis2) = &sw.axis2 {
        columns.push(axis2.path.clone());
    }
    columns.extend(stage_columns(sw.stage).iter().map(|s| s.to_string()));
    Ok((columns, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;
    use emlc_core::{capacitance_curve, CapacitorGeometry};

    #[test]
    fn grids_cover_the_endpoints() {
        let lin = linspace(1.0, 3.0, 5);
        assert_eq!(lin, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        let log = logspace(1.0, 100.0, 3);
        assert!((log[0] - 1.0).abs() < 1e-12);
        assert!((log[1] - 10.0).abs() < 1e-12);
        assert!((log[2] - 100.0).abs() < 1e-12);
    }

    #[test]
    fn apply_reaches_every_sweepable_path() {
        let mut s = parse_scenario(
            "[membrane]\nmass = 1e-12 kg\nf_m = 1 MHz\ngamma_m = 1 Hz\nx_e = 0.4 um\ntemperature = 300 K\n\
             [circuit]\nL = 1 mH\nQ = 100\narea = 1 mm^2\ntemperature = 4 K\n\
             [optics]\nGamma_m = 1 kHz\nkappa = 100 kHz\n\
             [bias]\nV = 1 V\n\
             [signal]\namplitude = 1 nV\nnu_min = -1 kHz\nnu_max = 1 kHz\nnu_points = 3\n",
        )
        .unwrap();
        for (path, _) in crate::scenario::SWEEP_PATHS {
            apply(&mut s, path, 2.5);
        }
        assert_eq!(s.membrane.as_ref().unwrap().x_e, 2.5);
        assert_eq!(s.membrane.as_ref().unwrap().temperature, 2.5);
        // Q-specified damping is overridden by an explicit rate
        assert_eq!(
            s.circuit.as_ref().unwrap().damping,
            CircuitDamping::Rate(2.5)
        );
        assert_eq!(s.optics.as_ref().unwrap().n_opt, 2.5);
        assert_eq!(*s.bias.as_ref().unwrap(), BiasSpec::Displacement(2.5));
        assert_eq!(s.signal.as_ref().unwrap().nu, 2.5);
    }

    #[test]
    fn bias_sweep_rows_come_back_in_grid_order() {
        let s = parse_scenario(
            "[geometry]\nD = 2 um\nr = 0.5 um\nd = 1.5 um\nt = 0.5 um\nh = 0.1 um\neps = 7.6\n\
             [membrane]\nmass = 9.325e-13 kg\nf_m = 1 MHz\ngamma_m = 0 Hz\nx_e = 0.84 um\ntemperature = 300 K\n\
             [circuit]\nL = auto-resonant\ngamma = 1 kHz\narea = 1 mm^2\ntemperature = 300 K\n\
             [bias]\nV = 1 V\n\
             [sweep]\nstage = equilibrium\nparameter = bias.V\nstart = 0.5 V\nstop = 4 V\npoints = 6\n",
        )
        .unwrap();
        let g = s.geometry.as_ref().unwrap();
        let geometry = CapacitorGeometry {
            plate_gap: g.plate_gap,
            wire_width: g.wire_width,
            wire_gap: g.wire_gap,
            wire_thickness: g.wire_thickness,
            membrane_thickness: g.membrane_thickness,
            eps_membrane: g.eps,
            x_m: 0.0,
        };
        let curve =
            capacitance_curve(&geometry, 0.05 * g.plate_gap, 0.6 * g.plate_gap, 9, 1).unwrap();
        let sw = s.sweep.clone().unwrap();
        let (columns, rows) = sweep_table(&s, &curve, &sw).unwrap();
        assert_eq!(columns[0], "bias.V");
        assert_eq!(columns[1], "x_eq_m");
        assert_eq!(rows.len(), 6);
        let volts: Vec<f64> = rows
            .iter()
            .map(|r| match r[0] {
                Cell::Num(v) => v,
                _ => panic!("voltage column"),
            })
            .collect();
        assert_eq!(volts, linspace(0.5, 4.0, 6));
        // pull grows with bias: x_eq strictly decreasing
        let xs: Vec<f64> = rows
            .iter()
            .map(|r| match r[1] {
                Cell::Num(v) => v,
                _ => panic!("x_eq column"),
            })
            .collect();
        for pair in xs.windows(2) {
            assert!(pair[1] < pair[0], "x_eq not monotone: {xs:?}");
        }
    }
}
