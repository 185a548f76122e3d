//! Scenario files: line-oriented sections of `key = value [unit]` pairs.
//!
//! ```text
//! # comment
//! [membrane]
//! mass = 9.325e-13 kg
//! omega_m = 1 MHz          # Hz-family units mean 2 pi f in rad/s
//! Q = 1e6
//! x_e = 0.42 um
//! temperature = 300 K
//! ```
//!
//! Units are mandatory for dimensioned quantities and forbidden for
//! dimensionless ones. Parsing validates the whole file and reports every
//! fault at once, not just the first. Unknown sections and keys are
//! errors. Physics-critical quantities (damping rates, bias, temperatures)
//! have no defaults; plumbing quantities (sample counts, mesh level,
//! output directory) do, and the defaults are documented on the fields.

use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Every fault found in one parsing pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioErrors {
    pub faults: Vec<String>,
}

impl std::fmt::Display for ScenarioErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{} scenario fault(s):", self.faults.len())?;
        for fault in &self.faults {
            writeln!(f, "  - {fault}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioErrors {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dimension {
    Length,
    Mass,
    Time,
    /// Angular rate; Hz-family units convert as omega = 2 pi f.
    Frequency,
    Temperature,
    Voltage,
    Inductance,
    Area,
    Dimensionless,
}

impl Dimension {
    /// Scale factor to the canonical unit, or None if the token is not a
    /// unit of this dimension.
    fn scale(self, unit: &str) -> Option<f64> {
        use std::f64::consts::TAU;
        let table: &[(&str, f64)] = match self {
            Dimension::Length => &[
                ("m", 1.0),
                ("mm", 1e-3),
                ("um", 1e-6),
                ("nm", 1e-9),
                ("pm", 1e-12),
                ("fm", 1e-15),
            ],
            Dimension::Mass => &[("kg", 1.0), ("g", 1e-3), ("mg", 1e-6), ("ug", 1e-9)],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9)],
            Dimension::Frequency => &[
                ("rad/s", 1.0),
                ("Hz", TAU),
                ("kHz", TAU * 1e3),
                ("MHz", TAU * 1e6),
                ("GHz", TAU * 1e9),
            ],
            Dimension::Temperature => &[("K", 1.0), ("mK", 1e-3), ("uK", 1e-6)],
            Dimension::Voltage => &[("V", 1.0), ("mV", 1e-3), ("uV", 1e-6), ("nV", 1e-9)],
            Dimension::Inductance => &[("H", 1.0), ("mH", 1e-3), ("uH", 1e-6), ("nH", 1e-9)],
            Dimension::Area => &[("m^2", 1.0), ("mm^2", 1e-6), ("um^2", 1e-12)],
            Dimension::Dimensionless => &[],
        };
        table.iter().find(|(u, _)| *u == unit).map(|(_, s)| *s)
    }

    fn canonical_unit(self) -> &'static str {
        match self {
            Dimension::Length => "m",
            Dimension::Mass => "kg",
            Dimension::Time => "s",
            Dimension::Frequency => "rad/s",
            Dimension::Temperature => "K",
            Dimension::Voltage => "V",
            Dimension::Inductance => "H",
            Dimension::Area => "m^2",
            Dimension::Dimensionless => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryBlock {
    /// Plate to wire-top distance D, m.
    pub plate_gap: f64,
    /// Wire width r, m.
    pub wire_width: f64,
    /// Wire gap d, m.
    pub wire_gap: f64,
    /// Wire thickness t, m.
    pub wire_thickness: f64,
    /// Membrane thickness h, m.
    pub membrane_thickness: f64,
    /// Membrane relative permittivity.
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacitanceBlock {
    /// Lowest sampled membrane position, m. Default 0.05 D.
    pub x_min: Option<f64>,
    /// Highest sampled membrane position, m. Default 0.6 D.
    pub x_max: Option<f64>,
    /// Curve samples. Default 23 (0.025 D spacing over the default range).
    pub samples: usize,
    /// FEM refinement level. Default 2; the --mesh-level flag overrides.
    pub mesh_level: u32,
}

impl Default for CapacitanceBlock {
    fn default() -> Self {
        CapacitanceBlock {
            x_min: None,
            x_max: None,
            samples: 23,
            mesh_level: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembraneBlock {
    pub mass: f64,
    /// rad/s; the scenario key accepts `omega_m` (rad/s or Hz family) or
    /// `f_m` (Hz family only), exactly one.
    pub omega_m: f64,
    /// rad/s; from `gamma_m` directly or `Q` as omega_m / (2 Q).
    pub gamma_m: f64,
    /// Rest gap above the wire tops, m.
    pub x_e: f64,
    /// Bath temperature, K.
    pub temperature: f64,
}

/// Inductance is either explicit or tuned after the equilibrium solve so
/// omega_0(X) = omega_m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InductanceSpec {
    AutoResonant,
    Henries(f64),
}

/// Circuit damping as a rate now or a quality factor resolved against
/// omega_0(X) later (gamma = omega_0 / 2Q).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CircuitDamping {
    Rate(f64),
    QualityFactor(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitBlock {
    pub inductance: InductanceSpec,
    pub damping: CircuitDamping,
    /// Capacitor plate area, m^2.
    pub area: f64,
    /// Bath temperature, K.
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticsBlock {
    /// Optically induced membrane damping, rad/s (scenario key Gamma_m).
    pub gamma_opt: f64,
    /// Cavity linewidth, rad/s.
    pub kappa: f64,
    /// Occupation of the optical channel. Default 0 (ideal cold drive).
    pub n_opt: f64,
    /// When both set, the cool stage also integrates the approach to the
    /// steady state over this span with this many samples.
    pub transient_duration: Option<f64>,
    pub transient_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BiasSpec {
    Voltage(f64),
    /// Target displacement x_e - X, m; the solver finds the voltage.
    Displacement(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalBlock {
    /// Probe voltage amplitude, V.
    pub amplitude: f64,
    /// Tone detuning, rad/s. Default 0 (on resonance).
    pub nu: f64,
    /// Analytic spectrum grid.
    pub nu_min: f64,
    pub nu_max: f64,
    pub nu_points: usize,
    /// Cross-check the analytic value at `nu` with a time-domain run.
    pub monte_carlo: bool,
    pub mc_duration: Option<f64>,
    pub mc_dt: Option<f64>,
    pub mc_trajectories: Option<usize>,
    /// Generator seed; the --seed flag overrides. Required when
    /// monte_carlo is on and no flag is given.
    pub mc_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    /// Dotted parameter path, e.g. `optics.Gamma_m`; see sweep::AXES.
    pub path: String,
    /// Canonical-unit endpoints.
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    /// Default linear.
    pub scale: SweepScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStage {
    Equilibrium,
    Modes,
    Cool,
    Snr,
}

impl SweepStage {
    pub fn name(self) -> &'static str {
        match self {
            SweepStage::Equilibrium => "equilibrium",
            SweepStage::Modes => "modes",
            SweepStage::Cool => "cool",
            SweepStage::Snr => "snr",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub stage: SweepStage,
    pub axis1: SweepAxis,
    pub axis2: Option<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    /// Default "emlc-out"; the --out flag overrides.
    pub directory: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: "emlc-out".into(),
        }
    }
}

/// Parsed and locally validated scenario. Cross-block physics constraints
/// (membrane fits the gap, x_e inside the sampled range, ...) are checked
/// by the pipeline stages, which aggregate their own faults.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scenario {
    pub geometry: Option<GeometryBlock>,
    pub capacitance: Option<CapacitanceBlock>,
    pub membrane: Option<MembraneBlock>,
    pub circuit: Option<CircuitBlock>,
    pub optics: Option<OpticsBlock>,
    pub bias: Option<BiasSpec>,
    pub signal: Option<SignalBlock>,
    pub sweep: Option<SweepBlock>,
    pub output: Option<OutputBlock>,
}

/// One raw `key = rhs` entry with its source line for error messages.
struct Entry {
    rhs: String,
    line: usize,
    taken: bool,
}

struct Parser {
    entries: BTreeMap<(String, String), Entry>,
    /// Section names that appeared as headers, even with no keys: an empty
    /// block still selects its defaults.
    declared: Vec<String>,
    faults: Vec<String>,
}

impl Parser {
    fn new(text: &str) -> Self {
        let mut entries = BTreeMap::new();
        let mut declared: Vec<String> = Vec::new();
        let mut faults = Vec::new();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if stripped.is_empty() {
                continue;
            }
            if let Some(name) = stripped.strip_prefix('[') {
                match name.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => {
                        let name = name.trim().to_string();
                        if !SECTIONS.contains(&name.as_str()) {
                            faults.push(format!("line {line}: unknown section [{name}]"));
                        }
                        if !declared.contains(&name) {
                            declared.push(name.clone());
                        }
                        section = Some(name);
                    }
                    _ => faults.push(format!("line {line}: malformed section header `{stripped}`")),
                }
                continue;
            }
            let Some((key, rhs)) = stripped.split_once('=') else {
                faults.push(format!("line {line}: expected `key = value`, got `{stripped}`"));
                continue;
            };
            let Some(section) = section.clone() else {
                faults.push(format!("line {line}: entry before any [section]"));
                continue;
            };
            let key = key.trim().to_string();
            let prev = entries.insert(
                (section.clone(), key.clone()),
                Entry {
                    rhs: rhs.trim().to_string(),
                    line,
                    taken: false,
                },
            );
            if let Some(prev) = prev {
                faults.push(format!(
                    "line {line}: duplicate key `{key}` in [{section}] (first on line {})",
                    prev.line
                ));
            }
        }
        Parser {
            entries,
            declared,
            faults,
        }
    }

    fn fault(&mut self, msg: impl Into<String>) {
        self.faults.push(msg.into());
    }

    fn has_section(&self, section: &str) -> bool {
        self.declared.iter().any(|s| s == section)
    }

    /// Marks the entry taken and hands back its raw right-hand side.
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.entries
            .get_mut(&(section.to_string(), key.to_string()))
            .map(|e| {
                e.taken = true;
                (e.rhs.clone(), e.line)
            })
    }

    /// `value unit` in the given dimension, converted to canonical units.
    fn quantity(&mut self, section: &str, key: &str, dim: Dimension) -> Option<f64> {
        let (rhs, line) = self.take(section, key)?;
        let mut parts = rhs.split_whitespace();
        let value = parts.next().unwrap_or("");
        let unit = parts.next();
        if parts.next().is_some() {
            self.fault(format!(
                "line {line}: [{section}] {key}: expected `value unit`, got `{rhs}`"
            ));
            return None;
        }
        let Ok(num) = value.parse::<f64>() else {
            self.fault(format!(
                "line {line}: [{section}] {key}: `{value}` is not a number"
            ));
            return None;
        };
        match (dim, unit) {
            (Dimension::Dimensionless, None) => Some(num),
            (Dimension::Dimensionless, Some(u)) => {
                self.fault(format!(
                    "line {line}: [{section}] {key} is dimensionless; remove the unit `{u}`"
                ));
                None
            }
            (dim, None) => {
                self.fault(format!(
                    "line {line}: [{section}] {key} needs a unit (e.g. `{}`)",
                    dim.canonical_unit()
                ));
                None
            }
            (dim, Some(u)) => match dim.scale(u) {
                Some(scale) => Some(num * scale),
                None => {
                    self.fault(format!(
                        "line {line}: [{section}] {key}: `{u}` is not a {} unit (canonical: {})",
                        dimension_name(dim),
                        dim.canonical_unit()
                    ));
                    None
                }
            },
        }
    }

    fn required(&mut self, section: &str, key: &str, dim: Dimension) -> Option<f64> {
        if !self.entries.contains_key(&(section.to_string(), key.to_string())) {
            self.fault(format!("[{section}] is missing required key `{key}`"));
            return None;
        }
        self.quantity(section, key, dim)
    }

    fn integer(&mut self, section: &str, key: &str) -> Option<u64> {
        let (rhs, line) = self.take(section, key)?;
        match rhs.parse::<u64>() {
            Ok(n) => Some(n),
            Err(_) => {
                self.fault(format!(
                    "line {line}: [{section}] {key}: `{rhs}` is not a nonnegative integer"
                ));
                None
            }
        }
    }

    fn boolean(&mut self, section: &str, key: &str) -> Option<bool> {
        let (rhs, line) = self.take(section, key)?;
        match rhs.as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => {
                self.fault(format!(
                    "line {line}: [{section}] {key}: expected true or false, got `{rhs}`"
                ));
                None
            }
        }
    }

    fn string(&mut self, section: &str, key: &str) -> Option<String> {
        self.take(section, key).map(|(rhs, _)| rhs)
    }

    /// Remaining not-taken entries are unknown keys: hard errors. Keys in
    /// unknown sections are skipped; the header fault already covers them.
    fn finish_unknown_keys(&mut self) {
        let leftovers: Vec<String> = self
            .entries
            .iter()
            .filter(|((section, _), e)| !e.taken && SECTIONS.contains(&section.as_str()))
            .map(|((section, key), e)| {
                format!("line {}: unknown key `{key}` in [{section}]", e.line)
            })
            .collect();
        self.faults.extend(leftovers);
    }
}

fn dimension_name(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Length => "length",
        Dimension::Mass => "mass",
        Dimension::Time => "time",
        Dimension::Frequency => "frequency",
        Dimension::Temperature => "temperature",
        Dimension::Voltage => "voltage",
        Dimension::Inductance => "inductance",
        Dimension::Area => "area",
        Dimension::Dimensionless => "dimensionless",
    }
}

const SECTIONS: &[&str] = &[
    "geometry",
    "capacitance",
    "membrane",
    "circuit",
    "optics",
    "bias",
    "signal",
    "sweep",
    "output",
];

/// Checks a value is strictly positive, recording a fault otherwise.
fn positive(p: &mut Parser, section: &str, key: &str, v: Option<f64>) -> Option<f64> {
    match v {
        Some(v) if v > 0.0 && v.is_finite() => Some(v),
        Some(v) => {
            p.fault(format!("[{section}] {key} must be > 0 (got {v:e})"));
            None
        }
        None => None,
    }
}

fn nonnegative(p: &mut Parser, section: &str, key: &str, v: Option<f64>) -> Option<f64> {
    match v {
        Some(v) if v >= 0.0 && v.is_finite() => Some(v),
        Some(v) => {
            p.fault(format!("[{section}] {key} must be >= 0 (got {v:e})"));
            None
        }
        None => None,
    }
}

fn parse_geometry(p: &mut Parser) -> Option<GeometryBlock> {
    if !p.has_section("geometry") {
        return None;
    }
    let v = p.required("geometry", "D", Dimension::Length);
    let d = positive(p, "geometry", "D", v);
    let v = p.required("geometry", "r", Dimension::Length);
    let r = positive(p, "geometry", "r", v);
    let v = p.required("geometry", "d", Dimension::Length);
    let gap = nonnegative(p, "geometry", "d", v);
    let v = p.required("geometry", "t", Dimension::Length);
    let t = positive(p, "geometry", "t", v);
    let v = p.required("geometry", "h", Dimension::Length);
    let h = positive(p, "geometry", "h", v);
    let eps = p.required("geometry", "eps", Dimension::Dimensionless);
    let eps = match eps {
        Some(e) if e >= 1.0 => Some(e),
        Some(e) => {
            p.fault(format!("[geometry] eps must be >= 1 (got {e:e})"));
            None
        }
        None => None,
    };
    Some(GeometryBlock {
        plate_gap: d?,
        wire_width: r?,
        wire_gap: gap?,
        wire_thickness: t?,
        membrane_thickness: h?,
        eps: eps?,
    })
}

fn parse_capacitance(p: &mut Parser) -> Option<CapacitanceBlock> {
    if !p.has_section("capacitance") {
        return None;
    }
    let mut block = CapacitanceBlock::default();
    if let Some(v) = p.quantity("capacitance", "x_min", Dimension::Length) {
        block.x_min = nonnegative(p, "capacitance", "x_min", Some(v));
    }
    if let Some(v) = p.quantity("capacitance", "x_max", Dimension::Length) {
        block.x_max = positive(p, "capacitance", "x_max", Some(v));
    }
    if let Some(n) = p.integer("capacitance", "samples") {
        if n < 3 {
            p.fault(format!("[capacitance] samples must be >= 3 (got {n})"));
        } else {
            block.samples = n as usize;
        }
    }
    if let Some(n) = p.integer("capacitance", "mesh_level") {
        if n < 1 || n > 8 {
            p.fault(format!("[capacitance] mesh_level must be in 1..=8 (got {n})"));
        } else {
            block.mesh_level = n as u32;
        }
    }
    Some(block)
}

fn parse_membrane(p: &mut Parser) -> Option<MembraneBlock> {
    if !p.has_section("membrane") {
        return None;
    }
    let v = p.required("membrane", "mass", Dimension::Mass);
    let mass = positive(p, "membrane", "mass", v);

    let omega_key = p.entries.contains_key(&("membrane".into(), "omega_m".into()));
    let f_key = p.entries.contains_key(&("membrane".into(), "f_m".into()));
    let omega_m = match (omega_key, f_key) {
        (true, true) => {
            p.take("membrane", "omega_m");
            p.take("membrane", "f_m");
            p.fault("[membrane] give omega_m or f_m, not both");
            None
        }
        (true, false) => p.quantity("membrane", "omega_m", Dimension::Frequency),
        (false, true) => p.quantity("membrane", "f_m", Dimension::Frequency),
        (false, false) => {
            p.fault("[membrane] needs omega_m (rad/s or Hz family) or f_m (Hz family)");
            None
        }
    };
    let omega_m = positive(p, "membrane", "omega_m", omega_m);

    let gamma_key = p.entries.contains_key(&("membrane".into(), "gamma_m".into()));
    let q_key = p.entries.contains_key(&("membrane".into(), "Q".into()));
    let gamma_m = match (gamma_key, q_key) {
        (true, true) => {
            p.take("membrane", "gamma_m");
            p.take("membrane", "Q");
            p.fault("[membrane] give gamma_m or Q, not both");
            None
        }
        (true, false) => {
            let v = p.quantity("membrane", "gamma_m", Dimension::Frequency);
            nonnegative(p, "membrane", "gamma_m", v)
        }
        (false, true) => {
            let q = p.quantity("membrane", "Q", Dimension::Dimensionless);
            let q = positive(p, "membrane", "Q", q);
            // amplitude rate: half the energy linewidth omega / Q
            match (q, omega_m) {
                (Some(q), Some(w)) => Some(w / (2.0 * q)),
                _ => None,
            }
        }
        (false, false) => {
            p.fault("[membrane] needs gamma_m or Q (no default damping)");
            None
        }
    };

    let v = p.required("membrane", "x_e", Dimension::Length);
    let x_e = positive(p, "membrane", "x_e", v);
    let v = p.required("membrane", "temperature", Dimension::Temperature);
    let temperature = nonnegative(p, "membrane", "temperature", v);

    Some(MembraneBlock {
        mass: mass?,
        omega_m: omega_m?,
        gamma_m: gamma_m?,
        x_e: x_e?,
        temperature: temperature?,
    })
}

fn parse_circuit(p: &mut Parser) -> Option<CircuitBlock> {
    if !p.has_section("circuit") {
        return None;
    }
    let inductance = match p.take("circuit", "L") {
        None => {
            p.fault("[circuit] needs L (henries or `auto-resonant`)");
            None
        }
        Some((rhs, line)) => {
            if rhs == "auto-resonant" {
                Some(InductanceSpec::AutoResonant)
            } else {
                // re-inject for quantity parsing
                p.entries.insert(
                    ("circuit".into(), "L".into()),
                    Entry {
                        rhs,
                        line,
                        taken: false,
                    },
                );
                let v = p.quantity("circuit", "L", Dimension::Inductance);
                positive(p, "circuit", "L", v).map(InductanceSpec::Henries)
            }
        }
    };

    let gamma_key = p.entries.contains_key(&("circuit".into(), "gamma".into()));
    let q_key = p.entries.contains_key(&("circuit".into(), "Q".into()));
    let damping = match (gamma_key, q_key) {
        (true, true) => {
            p.take("circuit", "gamma");
            p.take("circuit", "Q");
            p.fault("[circuit] give gamma or Q, not both");
            None
        }
        (true, false) => {
            let v = p.quantity("circuit", "gamma", Dimension::Frequency);
            nonnegative(p, "circuit", "gamma", v).map(CircuitDamping::Rate)
        }
        (false, true) => {
            let q = p.quantity("circuit", "Q", Dimension::Dimensionless);
            positive(p, "circuit", "Q", q).map(CircuitDamping::QualityFactor)
        }
        (false, false) => {
            p.fault("[circuit] needs gamma or Q (no default damping)");
            None
        }
    };

    let v = p.required("circuit", "area", Dimension::Area);
    let area = positive(p, "circuit", "area", v);
    let v = p.required("circuit", "temperature", Dimension::Temperature);
    let temperature = nonnegative(p, "circuit", "temperature", v);

    Some(CircuitBlock {
        inductance: inductance?,
        damping: damping?,
        area: area?,
        temperature: temperature?,
    })
}

fn parse_optics(p: &mut Parser) -> Option<OpticsBlock> {
    if !p.has_section("optics") {
        return None;
    }
    let v = p.required("optics", "Gamma_m", Dimension::Frequency);
    let gamma_opt = nonnegative(p, "optics", "Gamma_m", v);
    let v = p.required("optics", "kappa", Dimension::Frequency);
    let kappa = positive(p, "optics", "kappa", v);
    let n_opt = match p.quantity("optics", "n_opt", Dimension::Dimensionless) {
        Some(v) => nonnegative(p, "optics", "n_opt", Some(v)),
        None => Some(0.0),
    };
    let v = p.quantity("optics", "transient_duration", Dimension::Time);
    let transient_duration = match v {
        Some(v) => positive(p, "optics", "transient_duration", Some(v)),
        None => None,
    };
    let transient_steps = p.integer("optics", "transient_steps").map(|n| n as usize);
    if transient_duration.is_some() != transient_steps.is_some() {
        p.fault("[optics] transient_duration and transient_steps go together");
    }
    Some(OpticsBlock {
        gamma_opt: gamma_opt?,
        kappa: kappa?,
        n_opt: n_opt?,
        transient_duration,
        transient_steps,
    })
}

fn parse_bias(p: &mut Parser) -> Option<BiasSpec> {
    if !p.has_section("bias") {
        return None;
    }
    let v_key = p.entries.contains_key(&("bias".into(), "V".into()));
    let d_key = p.entries.contains_key(&("bias".into(), "displacement".into()));
    match (v_key, d_key) {
        (true, true) => {
            p.take("bias", "V");
            p.take("bias", "displacement");
            p.fault("[bias] give V or displacement, not both");
            None
        }
        (true, false) => {
            let v = p.quantity("bias", "V", Dimension::Voltage);
            nonnegative(p, "bias", "V", v).map(BiasSpec::Voltage)
        }
        (false, true) => {
            let v = p.quantity("bias", "displacement", Dimension::Length);
            nonnegative(p, "bias", "displacement", v).map(BiasSpec::Displacement)
        }
        (false, false) => {
            p.fault("[bias] needs V or displacement (no default bias)");
            None
        }
    }
}

fn parse_signal(p: &mut Parser) -> Option<SignalBlock> {
    if !p.has_section("signal") {
        return None;
    }
    let v = p.required("signal", "amplitude", Dimension::Voltage);
    let amplitude = positive(p, "signal", "amplitude", v);
    let nu = p.quantity("signal", "nu", Dimension::Frequency).unwrap_or(0.0);
    let nu_min = p.required("signal", "nu_min", Dimension::Frequency);
    let nu_max = p.required("signal", "nu_max", Dimension::Frequency);
    if let (Some(lo), Some(hi)) = (nu_min, nu_max) {
        if !(lo < hi) {
            p.fault(format!("[signal] needs nu_min < nu_max (got {lo:e}, {hi:e})"));
        }
    }
    let nu_points = match p.integer("signal", "nu_points") {
        Some(n) if n >= 2 => Some(n as usize),
        Some(n) => {
            p.fault(format!("[signal] nu_points must be >= 2 (got {n})"));
            None
        }
        None => {
            p.fault("[signal] is missing required key `nu_points`");
            None
        }
    };

    let monte_carlo = p.boolean("signal", "monte_carlo").unwrap_or(false);
    let v = p.quantity("signal", "mc_duration", Dimension::Time);
    let mc_duration = match v {
        Some(v) => positive(p, "signal", "mc_duration", Some(v)),
        None => None,
    };
    let v = p.quantity("signal", "mc_dt", Dimension::Time);
    let mc_dt = match v {
        Some(v) => positive(p, "signal", "mc_dt", Some(v)),
        None => None,
    };
    let mc_trajectories = p.integer("signal", "mc_trajectories").map(|n| n as usize);
    let mc_seed = p.integer("signal", "mc_seed");
    if monte_carlo && (mc_duration.is_none() || mc_dt.is_none() || mc_trajectories.is_none()) {
        p.fault("[signal] monte_carlo = true needs mc_duration, mc_dt and mc_trajectories");
    }

    Some(SignalBlock {
        amplitude: amplitude?,
        nu,
        nu_min: nu_min?,
        nu_max: nu_max?,
        nu_points: nu_points?,
        monte_carlo,
        mc_duration,
        mc_dt,
        mc_trajectories,
        mc_seed,
    })
}

fn parse_axis(p: &mut Parser, suffix: &str) -> Option<SweepAxis> {
    let key = |base: &str| format!("{base}{suffix}");
    if !p.entries.contains_key(&("sweep".into(), key("parameter"))) {
        return None;
    }
    let path = p.string("sweep", &key("parameter"))?;
    let dim = sweep_path_dimension(&path);
    let Some(dim) = dim else {
        p.fault(format!(
            "[sweep] parameter{suffix} `{path}` is not sweepable; known paths: {}",
            SWEEP_PATHS
                .iter()
                .map(|(p, _)| *p)
                .collect::<Vec<_>>()
                .join(", ")
        ));
        // still consume the axis keys so they do not double-report
        p.take("sweep", &key("start"));
        p.take("sweep", &key("stop"));
        p.take("sweep", &key("points"));
        p.take("sweep", &key("scale"));
        return None;
    };
    let start = p.required("sweep", &key("start"), dim);
    let stop = p.required("sweep", &key("stop"), dim);
    let points = match p.integer("sweep", &key("points")) {
        Some(n) if n >= 2 => Some(n as usize),
        Some(n) => {
            p.fault(format!("[sweep] points{suffix} must be >= 2 (got {n})"));
            None
        }
        None => {
            p.fault(format!("[sweep] is missing required key `points{suffix}`"));
            None
        }
    };
    let scale = match p.string("sweep", &key("scale")).as_deref() {
        None => Some(SweepScale::Linear),
        Some("linear") => Some(SweepScale::Linear),
        Some("log") => Some(SweepScale::Log),
        Some(other) => {
            p.fault(format!(
                "[sweep] scale{suffix} must be linear or log (got `{other}`)"
            ));
            None
        }
    };
    let (start, stop, scale) = (start?, stop?, scale?);
    if scale == SweepScale::Log && !(start > 0.0 && stop > 0.0) {
        p.fault(format!(
            "[sweep] log scale needs positive endpoints (got {start:e}, {stop:e})"
        ));
        return None;
    }
    Some(SweepAxis {
        path,
        start,
        stop,
        points: points?,
        scale,
    })
}

fn parse_sweep(p: &mut Parser) -> Option<SweepBlock> {
    if !p.has_section("sweep") {
        return None;
    }
    let stage = match p.string("sweep", "stage").as_deref() {
        Some("equilibrium") => Some(SweepStage::Equilibrium),
        Some("modes") => Some(SweepStage::Modes),
        Some("cool") => Some(SweepStage::Cool),
        Some("snr") => Some(SweepStage::Snr),
        Some(other) => {
            p.fault(format!(
                "[sweep] stage must be equilibrium, modes, cool or snr (got `{other}`)"
            ));
            None
        }
        None => {
            p.fault("[sweep] is missing required key `stage`");
            None
        }
    };
    let axis1 = parse_axis(p, "");
    if axis1.is_none() {
        p.fault("[sweep] needs parameter/start/stop/points for the first axis");
    }
    let axis2 = parse_axis(p, "2");
    Some(SweepBlock {
        stage: stage?,
        axis1: axis1?,
        axis2,
    })
}

fn parse_output(p: &mut Parser) -> Option<OutputBlock> {
    if !p.has_section("output") {
        return None;
    }
    let mut block = OutputBlock::default();
    if let Some(dir) = p.string("output", "directory") {
        if dir.is_empty() {
            p.fault("[output] directory must not be empty");
        } else {
            block.directory = dir;
        }
    }
    Some(block)
}

/// Sweepable parameter paths and their dimensions.
pub const SWEEP_PATHS: &[(&str, &str)] = &[
    ("membrane.x_e", "length"),
    ("membrane.gamma_m", "frequency"),
    ("membrane.temperature", "temperature"),
    ("circuit.gamma", "frequency"),
    ("circuit.temperature", "temperature"),
    ("optics.Gamma_m", "frequency"),
    ("optics.kappa", "frequency"),
    ("optics.n_opt", "dimensionless"),
    ("bias.V", "voltage"),
    ("bias.displacement", "length"),
    ("signal.amplitude", "voltage"),
    ("signal.nu", "frequency"),
];

fn sweep_path_dimension(path: &str) -> Option<Dimension> {
    let name = SWEEP_PATHS.iter().find(|(p, _)| *p == path)?.1;
    Some(match name {
        "length" => Dimension::Length,
        "frequency" => Dimension::Frequency,
        "temperature" => Dimension::Temperature,
        "voltage" => Dimension::Voltage,
        "dimensionless" => Dimension::Dimensionless,
        _ => unreachable!("dimension table covers all sweep paths"),
    })
}

/// Parses and validates a scenario, reporting every fault at once.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioErrors> {
    let mut p = Parser::new(text);

    let scenario = Scenario {
        geometry: parse_geometry(&mut p),
        capacitance: parse_capacitance(&mut p),
        membrane: parse_membrane(&mut p),
        circuit: parse_circuit(&mut p),
        optics: parse_optics(&mut p),
        bias: parse_bias(&mut p),
        signal: parse_signal(&mut p),
        sweep: parse_sweep(&mut p),
        output: parse_output(&mut p),
    };

    p.finish_unknown_keys();
    if p.faults.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioErrors { faults: p.faults })
    }
}

/// Canonical text form; `parse_scenario(serialize_scenario(&s)) == s`.
/// All quantities are written in canonical units (m, kg, s, rad/s, K, V,
/// H, m^2) with shortest round-trip float formatting.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let q = |out: &mut String, key: &str, value: f64, dim: Dimension| {
        let unit = dim.canonical_unit();
        if unit.is_empty() {
            writeln!(out, "{key} = {value}").unwrap();
        } else {
            writeln!(out, "{key} = {value} {unit}").unwrap();
        }
    };

    if let Some(g) = &s.geometry {
        out.push_str("[geometry]\n");
        q(&mut out, "D", g.plate_gap, Dimension::Length);
        q(&mut out, "r", g.wire_width, Dimension::Length);
        q(&mut out, "d", g.wire_gap, Dimension::Length);
        q(&mut out, "t", g.wire_thickness, Dimension::Length);
        q(&mut out, "h", g.membrane_thickness, Dimension::Length);
        q(&mut out, "eps", g.eps, Dimension::Dimensionless);
    }
    if let Some(c) = &s.capacitance {
        out.push_str("[capacitance]\n");
        if let Some(x) = c.x_min {
            q(&mut out, "x_min", x, Dimension::Length);
        }
        if let Some(x) = c.x_max {
            q(&mut out, "x_max", x, Dimension::Length);
        }
        writeln!(out, "samples = {}", c.samples).unwrap();
        writeln!(out, "mesh_level = {}", c.mesh_level).unwrap();
    }
    if let Some(m) = &s.membrane {
        out.push_str("[membrane]\n");
        q(&mut out, "mass", m.mass, Dimension::Mass);
        q(&mut out, "omega_m", m.omega_m, Dimension::Frequency);
        q(&mut out, "gamma_m", m.gamma_m, Dimension::Frequency);
        q(&mut out, "x_e", m.x_e, Dimension::Length);
        q(&mut out, "temperature", m.temperature, Dimension::Temperature);
    }
    if let Some(c) = &s.circuit {
        out.push_str("[circuit]\n");
        match c.inductance {
            InductanceSpec::AutoResonant => writeln!(out, "L = auto-resonant").unwrap(),
            InductanceSpec::Henries(l) => q(&mut out, "L", l, Dimension::Inductance),
        }
        match c.damping {
            CircuitDamping::Rate(g) => q(&mut out, "gamma", g, Dimension::Frequency),
            CircuitDamping::QualityFactor(qf) => {
                q(&mut out, "Q", qf, Dimension::Dimensionless)
            }
        }
        q(&mut out, "area", c.area, Dimension::Area);
        q(&mut out, "temperature", c.temperature, Dimension::Temperature);
    }
    if let Some(o) = &s.optics {
        out.push_str("[optics]\n");
        q(&mut out, "Gamma_m", o.gamma_opt, Dimension::Frequency);
        q(&mut out, "kappa", o.kappa, Dimension::Frequency);
        q(&mut out, "n_opt", o.n_opt, Dimension::Dimensionless);
        if let (Some(d), Some(n)) = (o.transient_duration, o.transient_steps) {
            q(&mut out, "transient_duration", d, Dimension::Time);
            writeln!(out, "transient_steps = {n}").unwrap();
        }
    }
    if let Some(b) = &s.bias {
        out.push_str("[bias]\n");
        match b {
            BiasSpec::Voltage(v) => q(&mut out, "V", *v, Dimension::Voltage),
            BiasSpec::Displacement(d) => q(&mut out, "displacement", *d, Dimension::Length),
        }
    }
    if let Some(sig) = &s.signal {
        out.push_str("[signal]\n");
        q(&mut out, "amplitude", sig.amplitude, Dimension::Voltage);
        q(&mut out, "nu", sig.nu, Dimension::Frequency);
        q(&mut out, "nu_min", sig.nu_min, Dimension::Frequency);
        q(&mut out, "nu_max", sig.nu_max, Dimension::Frequency);
        writeln!(out, "nu_points = {}", sig.nu_points).unwrap();
        writeln!(out, "monte_carlo = {}", sig.monte_carlo).unwrap();
        if let Some(v) = sig.mc_duration {
            q(&mut out, "mc_duration", v, Dimension::Time);
        }
        if let Some(v) = sig.mc_dt {
            q(&mut out, "mc_dt", v, Dimension::Time);
        }
        if let Some(n) = sig.mc_trajectories {
            writeln!(out, "mc_trajectories = {n}").unwrap();
        }
        if let Some(n) = sig.mc_seed {
            writeln!(out, "mc_seed = {n}").unwrap();
        }
    }
    if let Some(sw) = &s.sweep {
        out.push_str("[sweep]\n");
        writeln!(out, "stage = {}", sw.stage.name()).unwrap();
        let axis = |out: &mut String, a: &SweepAxis, suffix: &str| {
            let dim = sweep_path_dimension(&a.path).expect("validated path");
            writeln!(out, "parameter{suffix} = {}", a.path).unwrap();
            q(out, &format!("start{suffix}"), a.start, dim);
            q(out, &format!("stop{suffix}"), a.stop, dim);
            writeln!(out, "points{suffix} = {}", a.points).unwrap();
            let scale = match a.scale {
                SweepScale::Linear => "linear",
                SweepScale::Log => "log",
            };
            writeln!(out, "scale{suffix} = {scale}").unwrap();
        };
        axis(&mut out, &sw.axis1, "");
        if let Some(a2) = &sw.axis2 {
            axis(&mut out, a2, "2");
        }
    }
    if let Some(o) = &s.output {
        out.push_str("[output]\n");
        writeln!(out, "directory = {}", o.directory).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
# reference scenario exercising every block
[geometry]
D = 2 um
r = 0.5 um
d = 1.5 um
t = 0.5 um
h = 0.1 um
eps = 7.6

[capacitance]
x_min = 0.1 um
x_max = 1.2 um
samples = 23
mesh_level = 2

[membrane]
mass = 9.325e-13 kg
f_m = 1 MHz
Q = 1e6
x_e = 0.42 um
temperature = 300 K

[circuit]
L = auto-resonant
gamma = 1 kHz
area = 1 mm^2
temperature = 4.2 K

[optics]
Gamma_m = 10 kHz
kappa = 100 MHz
n_opt = 0

[bias]
V = 3 V

[signal]
amplitude = 1 nV
nu_min = -10 kHz
nu_max = 10 kHz
nu_points = 201
monte_carlo = false

[sweep]
stage = cool
parameter = optics.Gamma_m
start = 1 kHz
stop = 1 MHz
points = 20
scale = log

[output]
directory = run-artifacts
"#;

    #[test]
    fn full_scenario_parses_with_unit_conversions() {
        let s = parse_scenario(FULL).unwrap();
        let g = s.geometry.unwrap();
        assert_eq!(g.plate_gap, 2e-6);
        assert_eq!(g.wire_gap, 1.5e-6);
        let m = s.membrane.unwrap();
        assert_eq!(m.omega_m, 2.0 * std::f64::consts::PI * 1e6);
        // Q = 1e6 at 1 MHz: amplitude rate pi
        assert!((m.gamma_m - std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(m.temperature, 300.0);
        let c = s.circuit.unwrap();
        assert_eq!(c.inductance, InductanceSpec::AutoResonant);
        assert_eq!(
            c.damping,
            CircuitDamping::Rate(2.0 * std::f64::consts::PI * 1e3)
        );
        assert_eq!(c.area, 1e-6);
        let o = s.optics.unwrap();
        assert_eq!(o.n_opt, 0.0);
        assert_eq!(s.bias.unwrap(), BiasSpec::Voltage(3.0));
        let sig = s.signal.unwrap();
        assert_eq!(sig.amplitude, 1e-9);
        assert_eq!(sig.nu, 0.0);
        let sw = s.sweep.unwrap();
        assert_eq!(sw.stage, SweepStage::Cool);
        assert_eq!(sw.axis1.scale, SweepScale::Log);
        assert!(sw.axis2.is_none());
        assert_eq!(s.output.unwrap().directory, "run-artifacts");
    }

    #[test]
    fn round_trip_is_identity() {
        let s = parse_scenario(FULL).unwrap();
        let text = serialize_scenario(&s);
        let s2 = parse_scenario(&text).unwrap();
        assert_eq!(s, s2);
        // and the canonical form is a fixed point
        assert_eq!(text, serialize_scenario(&s2));
    }

    #[test]
    fn faults_are_aggregated_not_first_only() {
        let bad = "[geometry]\nD = 2\nr = 0.5 um\nd = 1.5 um\nt = 0.5 kg\nh = 0.1 um\neps = 7.6\n\
                   [membrane]\nmass = 9e-13 kg\nx_e = 0.4 um\ntemperature = 300 K\n";
        let err = parse_scenario(bad).unwrap_err();
        let text = err.to_string();
        // missing unit on D, wrong dimension on t, missing frequency and
        // damping in the membrane block: all reported together
        assert!(text.contains("D needs a unit"), "{text}");
        assert!(text.contains("`kg` is not a length unit"), "{text}");
        assert!(text.contains("omega_m"), "{text}");
        assert!(text.contains("gamma_m or Q"), "{text}");
        assert!(err.faults.len() >= 4, "{text}");
    }

    #[test]
    fn unknown_keys_and_sections_are_errors() {
        let err = parse_scenario("[geometry]\nD = 2 um\nradius = 1 um\n[exotic]\nx = 1\n")
            .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("unknown key `radius` in [geometry]"), "{text}");
        assert!(text.contains("unknown section [exotic]"), "{text}");
        // the unknown section is reported once, not once per key inside it
        assert_eq!(text.matches("exotic").count(), 1, "{text}");
    }

    #[test]
    fn duplicate_keys_are_errors() {
        let err = parse_scenario("[bias]\nV = 1 V\nV = 2 V\n").unwrap_err();
        assert!(err.to_string().contains("duplicate key `V`"), "{err}");
    }

    #[test]
    fn exclusive_alternatives_are_enforced() {
        let err = parse_scenario(
            "[membrane]\nmass = 1e-12 kg\nomega_m = 1 MHz\nf_m = 1 MHz\ngamma_m = 1 Hz\n\
             x_e = 0.4 um\ntemperature = 1 K\n[bias]\nV = 1 V\ndisplacement = 1 nm\n",
        )
        .unwrap_err();
        let text = err.to_string();
        assert!(text.contains("omega_m or f_m, not both"), "{text}");
        assert!(text.contains("V or displacement, not both"), "{text}");
    }

    #[test]
    fn dimensionless_keys_reject_units() {
        let err = parse_scenario("[geometry]\nD = 2 um\nr = 0.5 um\nd = 1.5 um\nt = 0.5 um\nh = 0.1 um\neps = 7.6 K\n").unwrap_err();
        assert!(err.to_string().contains("eps is dimensionless"), "{err}");
    }

    #[test]
    fn hz_family_converts_to_angular_and_rad_s_is_direct() {
        let s = parse_scenario(
            "[optics]\nGamma_m = 1 kHz\nkappa = 6.283185307179586e8 rad/s\n",
        )
        .unwrap();
        let o = s.optics.unwrap();
        assert!((o.gamma_opt - 2.0 * std::f64::consts::PI * 1e3).abs() < 1e-9);
        assert_eq!(o.kappa, 6.283185307179586e8);
    }

    #[test]
    fn monte_carlo_requires_its_controls() {
        let err = parse_scenario(
            "[signal]\namplitude = 1 nV\nnu_min = -1 kHz\nnu_max = 1 kHz\nnu_points = 11\n\
             monte_carlo = true\n",
        )
        .unwrap_err();
        assert!(
            err.to_string().contains("mc_duration, mc_dt and mc_trajectories"),
            "{err}"
        );
    }

    #[test]
    fn sweep_rejects_unknown_parameter_paths() {
        let err = parse_scenario(
            "[sweep]\nstage = cool\nparameter = geometry.D\nstart = 1 um\nstop = 2 um\npoints = 5\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("not sweepable"), "{err}");
    }

    #[test]
    fn minimal_scenario_gets_documented_defaults() {
        let s = parse_scenario("[geometry]\nD = 2 um\nr = 0.5 um\nd = 1.5 um\nt = 0.5 um\nh = 0.1 um\neps = 7.6\n[capacitance]\n").unwrap();
        let c = s.capacitance.unwrap();
        assert_eq!(c.samples, 23);
        assert_eq!(c.mesh_level, 2);
        assert_eq!(c.x_min, None);
        assert_eq!(c.x_max, None);
    }

    #[test]
    fn two_axis_sweep_parses() {
        let s = parse_scenario(
            "[sweep]\nstage = snr\nparameter = optics.Gamma_m\nstart = 1 kHz\nstop = 1 MHz\n\
             points = 10\nscale = log\nparameter2 = bias.V\nstart2 = 1 V\nstop2 = 5 V\npoints2 = 3\n",
        )
        .unwrap();
        let sw = s.sweep.unwrap();
        let a2 = sw.axis2.unwrap();
        assert_eq!(a2.path, "bias.V");
        assert_eq!(a2.points, 3);
        assert_eq!(a2.scale, SweepScale::Linear);
    }
}
