//! Stage runner: scenario in, artifact tables out.
//!
//! Stages run in dependency order (capacitance, equilibrium, modes, cool,
//! snr, sweep); each writes its table and registers it in the manifest. A
//! failing stage aborts everything downstream, and the manifest records
//! the partial completion. The manifest is the only artifact carrying a
//! timestamp, so rerunning an identical scenario (and seed) reproduces
//! every other file byte for byte.

use std::path::PathBuf;

use num_complex::Complex64;

use crate::exports::{sha256_hex, write_table, Cell, TableMeta};
use crate::scenario::{BiasSpec, CircuitDamping, InductanceSpec, Scenario, SweepStage};
use crate::sweep;

use emlc_core::{
    capacitance_curve, cooling_rate, lyapunov_steady_state, normal_modes, resonant_inductance,
    simulate_homodyne, snr_spectrum, snr_value, solve_equilibrium,
    solve_equilibrium_for_displacement, thermal_occupation, transient_occupations,
    voltage_to_signal, BiasEquilibrium, CapacitanceCurve, CapacitorGeometry, CircuitParams,
    CoolingParams, HomodyneConfig, MembraneParams, ReadoutParams, SignalSpec, SteadyStateResult,
    ZetaEstimate,
};

#[derive(Debug)]
pub enum CliError {
    /// Scenario or stage-selection faults, aggregated. Exit code 1.
    Scenario(Vec<String>),
    /// Core failure; exit code 1 when it is a validation error, 2 when
    /// numerical.
    Core(emlc_core::Error),
    /// Core failure at one sweep point, with the point spelled out.
    AtPoint {
        context: String,
        source: emlc_core::Error,
    },
    /// Exit code 2.
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Scenario(_) => 1,
            CliError::Core(e) | CliError::AtPoint { source: e, .. } => {
                if e.is_validation() {
                    1
                } else {
                    2
                }
            }
            CliError::Io(_) => 2,
        }
    }

    /// Single-line form for manifest status fields.
    fn one_line(&self) -> String {
        self.to_string().replace('\n', "; ")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Scenario(faults) => {
                write!(f, "{} validation fault(s):", faults.len())?;
                for fault in faults {
                    write!(f, "\n  - {fault}")?;
                }
                Ok(())
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::AtPoint { context, source } => write!(f, "{context}: {source}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<emlc_core::Error> for CliError {
    fn from(e: emlc_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Capacitance,
    Equilibrium,
    Modes,
    Cool,
    Snr,
    Sweep,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Capacitance => "capacitance",
            Stage::Equilibrium => "equilibrium",
            Stage::Modes => "modes",
            Stage::Cool => "cool",
            Stage::Snr => "snr",
            Stage::Sweep => "sweep",
        }
    }
}

/// Stage list for `emlc run`: everything the scenario describes, in
/// dependency order. A bare-geometry scenario runs just the capacitance
/// solve.
pub fn full_run_stages(scenario: &Scenario) -> Vec<Stage> {
    let mut stages = vec![Stage::Capacitance];
    let has_working_point =
        scenario.membrane.is_some() && scenario.circuit.is_some() && scenario.bias.is_some();
    if has_working_point {
        stages.push(Stage::Equilibrium);
        stages.push(Stage::Modes);
        if scenario.optics.is_some() {
            stages.push(Stage::Cool);
            if scenario.signal.is_some() {
                stages.push(Stage::Snr);
            }
        }
    }
    if scenario.sweep.is_some() {
        stages.push(Stage::Sweep);
    }
    stages
}

fn block_present(scenario: &Scenario, block: &str) -> bool {
    match block {
        "geometry" => scenario.geometry.is_some(),
        "membrane" => scenario.membrane.is_some(),
        "circuit" => scenario.circuit.is_some(),
        "optics" => scenario.optics.is_some(),
        "bias" => scenario.bias.is_some(),
        "signal" => scenario.signal.is_some(),
        "sweep" => scenario.sweep.is_some(),
        other => unreachable!("unknown block {other}"),
    }
}

/// Scenario blocks a stage reads. All working-point stages need the
/// equilibrium inputs; sweep additionally needs whatever its target stage
/// and axis paths touch.
fn required_blocks(stage: Stage, scenario: &Scenario) -> Vec<&'static str> {
    const EQ: [&str; 4] = ["geometry", "membrane", "circuit", "bias"];
    match stage {
        Stage::Capacitance => vec!["geometry"],
        Stage::Equilibrium | Stage::Modes => EQ.to_vec(),
        Stage::Cool => {
            let mut v = EQ.to_vec();
            v.push("optics");
            v
        }
        Stage::Snr => {
            let mut v = EQ.to_vec();
            v.extend(["optics", "signal"]);
            v
        }
        Stage::Sweep => {
            let mut v = EQ.to_vec();
            v.push("sweep");
            if let Some(sw) = &scenario.sweep {
                match sw.stage {
                    SweepStage::Equilibrium | SweepStage::Modes => {}
                    SweepStage::Cool => v.push("optics"),
                    SweepStage::Snr => v.extend(["optics", "signal"]),
                }
                for axis in [Some(&sw.axis1), sw.axis2.as_ref()].into_iter().flatten() {
                    v.push(match axis.path.split('.').next().unwrap_or("") {
                        "membrane" => "membrane",
                        "circuit" => "circuit",
                        "optics" => "optics",
                        "bias" => "bias",
                        "signal" => "signal",
                        other => unreachable!("parser admitted sweep path block {other}"),
                    });
                }
            }
            v
        }
    }
}

/// Equilibrium solution together with the fully resolved parameter sets
/// downstream stages need.
pub(crate) struct WorkingPoint {
    pub membrane: MembraneParams,
    pub circuit: CircuitParams,
    pub eq: BiasEquilibrium,
}

/// Solves the working point, resolving `auto-resonant` inductance and
/// Q-specified damping against it.
///
/// The electrostatic pull knows nothing about L or gamma, so the solve
/// runs with placeholders first; the converged position then fixes C(X),
/// from which L (for auto-resonance, omega_0(X) = omega_m) and gamma
/// (from Q) follow, and a re-solve at the same bias voltage lands on the
/// identical position with the final circuit.
pub(crate) fn solve_working_point(
    scenario: &Scenario,
    curve: &CapacitanceCurve,
) -> emlc_core::Result<WorkingPoint> {
    let mem = scenario.membrane.as_ref().expect("membrane block checked");
    let circ = scenario.circuit.as_ref().expect("circuit block checked");
    let bias = scenario.bias.as_ref().expect("bias block checked");

    let membrane = MembraneParams {
        mass: mem.mass,
        omega_m: mem.omega_m,
        gamma_m: mem.gamma_m,
        x_e: mem.x_e,
    };
    let provisional = CircuitParams {
        inductance: match circ.inductance {
            InductanceSpec::Henries(l) => l,
            InductanceSpec::AutoResonant => 1.0,
        },
        gamma: match circ.damping {
            CircuitDamping::Rate(g) => g,
            CircuitDamping::QualityFactor(_) => 1.0,
        },
        plate_area: circ.area,
    };
    let first = match *bias {
        BiasSpec::Voltage(v) => solve_equilibrium(&membrane, &provisional, curve, v)?,
        BiasSpec::Displacement(d) => {
            solve_equilibrium_for_displacement(&membrane, &provisional, curve, d)?
        }
    };

    let inductance = match circ.inductance {
        InductanceSpec::Henries(l) => l,
        InductanceSpec::AutoResonant => resonant_inductance(membrane.omega_m, first.cap_at_x),
    };
    let gamma = match circ.damping {
        CircuitDamping::Rate(g) => g,
        CircuitDamping::QualityFactor(q) => {
            let omega_0 = 1.0 / (inductance * first.cap_at_x).sqrt();
            omega_0 / (2.0 * q)
        }
    };
    let circuit = CircuitParams {
        inductance,
        gamma,
        plate_area: circ.area,
    };
    let eq = if inductance == provisional.inductance && gamma == provisional.gamma {
        first
    } else {
        solve_equilibrium(&membrane, &circuit, curve, first.v_bias)?
    };
    Ok(WorkingPoint {
        membrane,
        circuit,
        eq,
    })
}

/// Cooling parameter set at the working point; bath occupations come from
/// the block temperatures at the respective mode frequencies.
pub(crate) fn cooling_params_for(scenario: &Scenario, wp: &WorkingPoint) -> CoolingParams {
    let mem = scenario.membrane.as_ref().expect("membrane block checked");
    let circ = scenario.circuit.as_ref().expect("circuit block checked");
    let optics = scenario.optics.as_ref().expect("optics block checked");
    CoolingParams {
        g: wp.eq.g,
        gamma_opt: optics.gamma_opt,
        gamma_m: wp.membrane.gamma_m,
        gamma: wp.circuit.gamma,
        kappa: optics.kappa,
        n_a: thermal_occupation(mem.temperature, wp.membrane.omega_m),
        n_b: thermal_occupation(circ.temperature, wp.eq.omega_0_at_x),
        n_opt: optics.n_opt,
    }
}

pub(crate) struct ReadoutSetup {
    pub params: ReadoutParams,
    /// Signal amplitude of the scenario's probe voltage, sqrt(rad/s).
    pub f_amp: f64,
}

/// Readout chain at the working point. The circuit is measured through
/// the optically damped membrane at the sympathetic rate g^2 / (4 (Gamma_m
/// + gamma_m)); the probe field occupation n_opt plays the detector noise
/// n_d.
pub(crate) fn readout_for(
    scenario: &Scenario,
    wp: &WorkingPoint,
) -> emlc_core::Result<ReadoutSetup> {
    let circ = scenario.circuit.as_ref().expect("circuit block checked");
    let optics = scenario.optics.as_ref().expect("optics block checked");
    let sig = scenario.signal.as_ref().expect("signal block checked");

    let membrane_damping = optics.gamma_opt + wp.membrane.gamma_m;
    if !(membrane_damping > 0.0) {
        return Err(emlc_core::Error::invalid(
            "readout needs a damped membrane: optics Gamma_m and membrane gamma_m are both zero",
        ));
    }
    let params = ReadoutParams {
        meas_rate: cooling_rate(wp.eq.g, membrane_damping),
        gamma: wp.circuit.gamma,
        n_b: thermal_occupation(circ.temperature, wp.eq.omega_0_at_x),
        n_d: optics.n_opt,
    };
    let f_amp = voltage_to_signal(sig.amplitude, wp.eq.cap_at_x, wp.circuit.inductance)?;
    Ok(ReadoutSetup { params, f_amp })
}

pub(crate) const COOL_COLUMNS: [&str; 7] = [
    "Gamma_m_rad_per_s",
    "Gamma_rad_per_s",
    "n_a_exact",
    "n_b_exact",
    "n_b_weak",
    "n_b_strong",
    "regime",
];

/// Row matching [`COOL_COLUMNS`]; perturbative values outside their
/// domain print as NaN.
pub(crate) fn cool_row(gamma_opt: f64, r: &SteadyStateResult) -> Vec<Cell> {
    vec![
        Cell::Num(gamma_opt),
        Cell::Num(r.cooling_rate),
        Cell::Num(r.n_a_exact),
        Cell::Num(r.n_b_exact),
        Cell::Num(r.n_b_weak.unwrap_or(f64::NAN)),
        Cell::Num(r.n_b_strong.unwrap_or(f64::NAN)),
        Cell::Text(r.regime.to_string()),
    ]
}

struct ManifestRow {
    stage: &'static str,
    artifact: String,
    sha: String,
    status: String,
}

pub struct Pipeline<'a> {
    scenario: &'a Scenario,
    scenario_sha: String,
    out_dir: PathBuf,
    seed_flag: Option<u64>,
    mesh_flag: Option<u32>,
    rows: Vec<ManifestRow>,
    curve: Option<CapacitanceCurve>,
    point: Option<WorkingPoint>,
    /// Seed actually consumed by a Monte-Carlo stage this run.
    used_seed: Option<u64>,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        scenario: &'a Scenario,
        raw_scenario: &[u8],
        out_dir: PathBuf,
        seed: Option<u64>,
        mesh_level: Option<u32>,
    ) -> Self {
        Pipeline {
            scenario,
            scenario_sha: sha256_hex(raw_scenario),
            out_dir,
            seed_flag: seed,
            mesh_flag: mesh_level,
            rows: Vec::new(),
            curve: None,
            point: None,
            used_seed: None,
        }
    }

    pub fn run(&mut self, stages: &[Stage]) -> Result<(), CliError> {
        self.prevalidate(stages)?;
        std::fs::create_dir_all(&self.out_dir)?;
        let mut failed = None;
        for (i, &stage) in stages.iter().enumerate() {
            match self.run_stage(stage) {
                Ok(()) => {}
                Err(err) => {
                    self.rows.push(ManifestRow {
                        stage: stage.name(),
                        artifact: "-".into(),
                        sha: "-".into(),
                        status: format!("failed: {}", err.one_line()),
                    });
                    for &later in &stages[i + 1..] {
                        self.rows.push(ManifestRow {
                            stage: later.name(),
                            artifact: "-".into(),
                            sha: "-".into(),
                            status: "skipped (upstream failure)".into(),
                        });
                    }
                    failed = Some(err);
                    break;
                }
            }
        }
        self.write_manifest()?;
        match failed {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }

    /// Everything checkable before the first solve, aggregated: missing
    /// blocks for the requested stages and the Monte-Carlo seed rule.
    fn prevalidate(&self, stages: &[Stage]) -> Result<(), CliError> {
        let mut faults: Vec<String> = Vec::new();
        let mut reported: Vec<&'static str> = Vec::new();
        for &stage in stages {
            for block in required_blocks(stage, self.scenario) {
                if !block_present(self.scenario, block) && !reported.contains(&block) {
                    reported.push(block);
                    faults.push(format!(
                        "the {} stage needs a [{block}] block",
                        stage.name()
                    ));
                }
            }
        }
        if stages.contains(&Stage::Snr) {
            if let Some(sig) = &self.scenario.signal {
                if sig.monte_carlo && self.seed_flag.is_none() && sig.mc_seed.is_none() {
                    faults.push(
                        "monte_carlo runs need a seed: set mc_seed in [signal] or pass --seed"
                            .into(),
                    );
                }
            }
        }
        if faults.is_empty() {
            Ok(())
        } else {
            Err(CliError::Scenario(faults))
        }
    }

    fn run_stage(&mut self, stage: Stage) -> Result<(), CliError> {
        match stage {
            Stage::Capacitance => self.stage_capacitance(),
            Stage::Equilibrium => self.stage_equilibrium(),
            Stage::Modes => self.stage_modes(),
            Stage::Cool => self.stage_cool(),
            Stage::Snr => self.stage_snr(),
            Stage::Sweep => self.stage_sweep(),
        }
    }

    fn meta(
        &self,
        name: &'static str,
        seed: Option<u64>,
        extras: Vec<(String, String)>,
    ) -> TableMeta {
        TableMeta {
            name,
            version: emlc_core::VERSION,
            scenario_sha: self.scenario_sha.clone(),
            seed,
            extras,
        }
    }

    fn write_artifact(
        &mut self,
        stage: &'static str,
        file: &str,
        meta: &TableMeta,
        columns: &[&str],
        rows: &[Vec<Cell>],
    ) -> Result<(), CliError> {
        let sha = write_table(&self.out_dir.join(file), meta, columns, rows)?;
        self.rows.push(ManifestRow {
            stage,
            artifact: file.into(),
            sha,
            status: "ok".into(),
        });
        Ok(())
    }

    fn stage_capacitance(&mut self) -> Result<(), CliError> {
        let g = self.scenario.geometry.as_ref().expect("geometry checked");
        let block = self.scenario.capacitance.clone().unwrap_or_default();
        let geometry = CapacitorGeometry {
            plate_gap: g.plate_gap,
            wire_width: g.wire_width,
            wire_gap: g.wire_gap,
            wire_thickness: g.wire_thickness,
            membrane_thickness: g.membrane_thickness,
            eps_membrane: g.eps,
            x_m: 0.0,
        };
        let x_min = block.x_min.unwrap_or(0.05 * g.plate_gap);
        let x_max = block.x_max.unwrap_or(0.6 * g.plate_gap);
        let mesh_level = self.mesh_flag.unwrap_or(block.mesh_level);
        let curve = capacitance_curve(&geometry, x_min, x_max, block.samples, mesh_level)?;

        let d = g.plate_gap;
        let zetas = curve.zeta_samples();
        let rows: Vec<Vec<Cell>> = curve
            .xs
            .iter()
            .zip(&curve.cs)
            .zip(&zetas)
            .map(|((&x, &c), z)| {
                let zeta_over_d = match z {
                    ZetaEstimate::Finite(z) => z / d,
                    ZetaEstimate::EffectivelyInfinite => f64::INFINITY,
                };
                vec![Cell::Num(x / d), Cell::Num(c), Cell::Num(zeta_over_d)]
            })
            .collect();
        let meta = self.meta(
            "capacitance curve",
            None,
            vec![
                ("plate_gap_m".into(), format!("{d}")),
                ("mesh_level".into(), mesh_level.to_string()),
                ("samples".into(), block.samples.to_string()),
                (
                    "convergence_estimate".into(),
                    format!("{:.3e}", curve.convergence_estimate),
                ),
            ],
        );
        self.write_artifact(
            "capacitance",
            "curve.txt",
            &meta,
            &["x_m_over_D", "c", "zeta_over_D"],
            &rows,
        )?;
        self.curve = Some(curve);
        Ok(())
    }

    fn stage_equilibrium(&mut self) -> Result<(), CliError> {
        let curve = self.curve.as_ref().expect("capacitance stage runs first");
        let wp = solve_working_point(self.scenario, curve)?;
        let d = curve.geometry.plate_gap;
        let eq = &wp.eq;
        let row = vec![
            Cell::Num(eq.v_bias),
            Cell::Num(eq.x_eq),
            Cell::Num(eq.x_eq / d),
            Cell::Num(wp.membrane.x_e - eq.x_eq),
            Cell::Num(eq.cap_at_x),
            Cell::Num(eq.zeta_at_x),
            Cell::Num(eq.g),
            Cell::Num(eq.omega_0_at_x),
            Cell::Num(wp.circuit.inductance),
            Cell::Bool(eq.stable),
            Cell::Int(eq.iterations as i64),
        ];
        let meta = self.meta(
            "bias equilibrium",
            None,
            vec![
                ("omega_m_rad_per_s".into(), format!("{}", wp.membrane.omega_m)),
                ("gamma_rad_per_s".into(), format!("{}", wp.circuit.gamma)),
            ],
        );
        self.write_artifact(
            "equilibrium",
            "equilibrium.txt",
            &meta,
            &[
                "v_bias_V",
                "x_eq_m",
                "x_eq_over_D",
                "displacement_m",
                "cap_F",
                "zeta_m",
                "g_rad_per_s",
                "omega_0_rad_per_s",
                "inductance_H",
                "stable",
                "iterations",
            ],
            &[row],
        )?;
        self.point = Some(wp);
        Ok(())
    }

    fn stage_modes(&mut self) -> Result<(), CliError> {
        let wp = self.point.as_ref().expect("equilibrium stage runs first");
        let modes = normal_modes(wp.eq.omega_0_at_x, wp.membrane.omega_m, wp.eq.g)?;
        let row = vec![
            Cell::Num(wp.membrane.omega_m),
            Cell::Num(wp.eq.omega_0_at_x),
            Cell::Num(wp.eq.g),
            Cell::Num(modes.omega_plus),
            Cell::Num(modes.omega_minus),
            Cell::Bool(modes.minus_mode_imaginary),
            Cell::Num(modes.mode_vectors[0][0]),
            Cell::Num(modes.mode_vectors[0][1]),
            Cell::Num(modes.mode_vectors[1][0]),
            Cell::Num(modes.mode_vectors[1][1]),
        ];
        let meta = self.meta("normal modes", None, Vec::new());
        self.write_artifact(
            "modes",
            "modes.txt",
            &meta,
            &[
                "omega_m_rad_per_s",
                "omega_0_rad_per_s",
                "g_rad_per_s",
                "omega_plus_rad_per_s",
                "omega_minus_rad_per_s",
                "minus_mode_imaginary",
                "plus_membrane",
                "plus_circuit",
                "minus_membrane",
                "minus_circuit",
            ],
            &[row],
        )
    }

    fn stage_cool(&mut self) -> Result<(), CliError> {
        let wp = self.point.as_ref().expect("equilibrium stage runs first");
        let optics = self.scenario.optics.as_ref().expect("optics checked");
        let params = cooling_params_for(self.scenario, wp);
        for warning in params.warnings() {
            eprintln!("warning: {warning}");
        }
        if optics.kappa >= wp.membrane.omega_m {
            eprintln!(
                "warning: kappa = {:e} >= omega_m = {:e}: outside the resolved-sideband \
                 regime the optical damping model assumes",
                optics.kappa, wp.membrane.omega_m
            );
        }
        let result = lyapunov_steady_state(&params)?;
        let extras = vec![
            ("g_rad_per_s".into(), format!("{}", params.g)),
            ("gamma_m_rad_per_s".into(), format!("{}", params.gamma_m)),
            ("gamma_rad_per_s".into(), format!("{}", params.gamma)),
            ("kappa_rad_per_s".into(), format!("{}", params.kappa)),
            ("n_a_bath".into(), format!("{}", params.n_a)),
            ("n_b_bath".into(), format!("{}", params.n_b)),
            ("n_opt".into(), format!("{}", params.n_opt)),
        ];
        let meta = self.meta("cooling steady state", None, extras);
        let columns: Vec<&str> = COOL_COLUMNS.to_vec();
        let row = cool_row(params.gamma_opt, &result);
        self.write_artifact("cool", "cooling.txt", &meta, &columns, &[row])?;

        if let (Some(duration), Some(steps)) = (optics.transient_duration, optics.transient_steps)
        {
            // switch-on transient from the pre-cooling thermal state
            let samples = transient_occupations(&params, (params.n_a, params.n_b), duration, steps)?;
            let rows: Vec<Vec<Cell>> = samples
                .iter()
                .map(|s| vec![Cell::Num(s.t), Cell::Num(s.n_a), Cell::Num(s.n_b)])
                .collect();
            let meta = self.meta("cooling transient", None, Vec::new());
            self.write_artifact(
                "cool",
                "cooling_transient.txt",
                &meta,
                &["t_s", "n_a", "n_b"],
                &rows,
            )?;
        }
        Ok(())
    }

    fn stage_snr(&mut self) -> Result<(), CliError> {
        let wp = self.point.as_ref().expect("equilibrium stage runs first");
        let sig = self.scenario.signal.as_ref().expect("signal checked");
        let setup = readout_for(self.scenario, wp)?;
        let p = &setup.params;

        let grid = sweep::linspace(sig.nu_min, sig.nu_max, sig.nu_points);
        let spectrum = snr_spectrum(
            p,
            &SignalSpec::Flat {
                amplitude: Complex64::new(setup.f_amp, 0.0),
            },
            &grid,
        )?;
        let rows: Vec<Vec<Cell>> = spectrum
            .samples
            .iter()
            .map(|s| vec![Cell::Num(s.nu), Cell::Num(s.s), Cell::Num(s.s_rf_baseline)])
            .collect();
        let extras = vec![
            ("meas_rate_rad_per_s".into(), format!("{}", p.meas_rate)),
            ("gamma_rad_per_s".into(), format!("{}", p.gamma)),
            ("n_b".into(), format!("{}", p.n_b)),
            ("n_d".into(), format!("{}", p.n_d)),
            ("amplitude_V".into(), format!("{}", sig.amplitude)),
            ("f_amp".into(), format!("{}", setup.f_amp)),
            (
                "delta_omega_rad_per_s".into(),
                format!("{}", spectrum.bandwidth.delta_omega),
            ),
            (
                "half_max_full_width_rad_per_s".into(),
                format!("{}", spectrum.bandwidth.half_max_full_width),
            ),
            ("plateau_regime".into(), spectrum.plateau_regime.to_string()),
            ("low_occupation".into(), spectrum.low_occupation.to_string()),
        ];
        let meta = self.meta("snr spectrum", None, extras.clone());
        self.write_artifact(
            "snr",
            "snr.txt",
            &meta,
            &["nu_rad_per_s", "S", "S_rf_baseline"],
            &rows,
        )?;

        if sig.monte_carlo {
            let seed = self
                .seed_flag
                .or(sig.mc_seed)
                .expect("prevalidate requires a seed for monte_carlo");
            self.used_seed = Some(seed);
            let cfg = HomodyneConfig {
                duration: sig.mc_duration.expect("parser requires mc_duration"),
                dt: sig.mc_dt.expect("parser requires mc_dt"),
                trajectories: sig.mc_trajectories.expect("parser requires mc_trajectories"),
                seed,
            };
            let tone = SignalSpec::Tone {
                amplitude: Complex64::new(setup.f_amp, 0.0),
                nu: sig.nu,
            };
            let estimate = simulate_homodyne(p, &tone, &[sig.nu], &cfg)?;
            let f_sq = setup.f_amp * setup.f_amp;
            let rf = f_sq / (4.0 * p.gamma * p.n_b);
            let rows: Vec<Vec<Cell>> = estimate
                .bins
                .iter()
                .map(|bin| {
                    vec![
                        Cell::Num(bin.nu),
                        Cell::Num(snr_value(p, f_sq, bin.nu)),
                        Cell::Num(rf),
                        Cell::Num(bin.s),
                        Cell::Num(bin.stderr),
                    ]
                })
                .collect();
            let mut mc_extras = extras;
            mc_extras.extend([
                ("rng_algorithm".into(), estimate.rng_algorithm.to_string()),
                ("trajectories".into(), estimate.trajectories.to_string()),
                ("segment_len".into(), estimate.segment_len.to_string()),
                (
                    "segments_per_record".into(),
                    estimate.segments_per_record.to_string(),
                ),
                ("tone_nu_rad_per_s".into(), format!("{}", estimate.tone_nu)),
            ]);
            let meta = self.meta("snr monte-carlo", Some(seed), mc_extras);
            self.write_artifact(
                "snr",
                "snr_mc.txt",
                &meta,
                &["nu_rad_per_s", "S", "S_rf_baseline", "S_empirical", "stderr"],
                &rows,
            )?;
        }
        Ok(())
    }

    fn stage_sweep(&mut self) -> Result<(), CliError> {
        let curve = self.curve.as_ref().expect("capacitance stage runs first");
        let sw = self.scenario.sweep.as_ref().expect("sweep checked");
        let (columns, rows) = sweep::sweep_table(self.scenario, curve, sw)?;
        let column_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
        let mut extras = vec![
            ("stage".into(), sw.stage.name().to_string()),
            ("points".into(), rows.len().to_string()),
        ];
        if sw.axis2.is_some() {
            extras.push(("axes".into(), "2".into()));
        }
        let meta = self.meta("parameter sweep", None, extras);
        self.write_artifact("sweep", "sweep.txt", &meta, &column_refs, &rows)
    }

    fn write_manifest(&mut self) -> Result<(), CliError> {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = self.meta(
            "run manifest",
            self.used_seed,
            vec![("created_unix_s".into(), created.to_string())],
        );
        let rows: Vec<Vec<Cell>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Text(r.stage.into()),
                    Cell::Text(r.artifact.clone()),
                    Cell::Text(r.sha.clone()),
                    Cell::Text(r.status.clone()),
                ]
            })
            .collect();
        write_table(
            &self.out_dir.join("manifest.txt"),
            &meta,
            &["stage", "artifact", "sha256", "status"],
            &rows,
        )?;
        Ok(())
    }
}
