//! Flat `key = value` scenario files with dotted key names.
//!
//! Every experiment has a fixed schema; unknown keys, duplicates and
//! out-of-range values are rejected with the offending line number. Values
//! are stored in canonical text form so that serialising and re-parsing a
//! config is the identity.

use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum Experiment {
    E1,
    E2,
    E3,
    E4,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Experiment::E1, Experiment::E2, Experiment::E3, Experiment::E4];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::E1 => "E1",
            Experiment::E2 => "E2",
            Experiment::E3 => "E3",
            Experiment::E4 => "E4",
        }
    }

    pub fn subcommand(self) -> &'static str {
        match self {
            Experiment::E1 => "energy",
            Experiment::E2 => "coverage",
            Experiment::E3 => "perceivability",
            Experiment::E4 => "landing",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.id().eq_ignore_ascii_case(id))
    }

    pub fn schema(self) -> &'static [Field] {
        match self {
            Experiment::E1 => E1_SCHEMA,
            Experiment::E2 => E2_SCHEMA,
            Experiment::E3 => E3_SCHEMA,
            Experiment::E4 => E4_SCHEMA,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// Finite real in `[min, max]`, or `(min, max]` when `open_min`.
    Real { min: f64, max: f64, open_min: bool },
    /// Integer in `[min, max]`.
    Count { min: u64, max: u64 },
    Choice(&'static [&'static str]),
    Path,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Field {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn real(key: &'static str, min: f64, max: f64, default: &'static str, doc: &'static str) -> Field {
    Field {
        key,
        kind: Kind::Real { min, max, open_min: false },
        default,
        doc,
    }
}

const fn positive(key: &'static str, default: &'static str, doc: &'static str) -> Field {
    Field {
        key,
        kind: Kind::Real {
            min: 0.0,
            max: f64::INFINITY,
            open_min: true,
        },
        default,
        doc,
    }
}

const fn nonneg(key: &'static str, default: &'static str, doc: &'static str) -> Field {
    real(key, 0.0, f64::INFINITY, default, doc)
}

const fn any(key: &'static str, default: &'static str, doc: &'static str) -> Field {
    real(key, f64::NEG_INFINITY, f64::INFINITY, default, doc)
}

const fn unit(key: &'static str, default: &'static str, doc: &'static str) -> Field {
    real(key, 0.0, 1.0, default, doc)
}

const fn count(key: &'static str, min: u64, max: u64, default: &'static str, doc: &'static str) -> Field {
    Field {
        key,
        kind: Kind::Count { min, max },
        default,
        doc,
    }
}

const fn choice(key: &'static str, options: &'static [&'static str], default: &'static str, doc: &'static str) -> Field {
    Field {
        key,
        kind: Kind::Choice(options),
        default,
        doc,
    }
}

const EXPERIMENTS: &[&str] = &["E1", "E2", "E3", "E4"];

const E1_SCHEMA: &[Field] = &[
    choice("experiment", EXPERIMENTS, "E1", "experiment id"),
    count("seed", 0, u64::MAX, "0", "random seed (Monte-Carlo checks only)"),
    Field {
        key: "output.dir",
        kind: Kind::Path,
        default: "out/e1",
        doc: "output directory",
    },
    positive("channel.C", "1", "sensing gain C"),
    positive("channel.R", "20", "measurement noise R"),
    positive("channel.Q", "0.001", "process noise Q"),
    unit("clarity.q0", "0", "initial clarity"),
    nonneg("energy.p0", "36000", "transit energy p0 [J]"),
    nonneg("energy.p1", "200", "hover power p1 [W]"),
    positive("sweep.t_step", "0.5", "spacing of the T grid [s]"),
    positive("sweep.t_max", "400", "largest T in the sweep [s]"),
];

const E2_SCHEMA: &[Field] = &[
    choice("experiment", EXPERIMENTS, "E2", "experiment id"),
    count("seed", 0, u64::MAX, "0", "random seed (Monte-Carlo checks only)"),
    Field {
        key: "output.dir",
        kind: Kind::Path,
        default: "out/e2",
        doc: "output directory",
    },
    count("output.snapshot_every", 0, u64::MAX, "5000", "map snapshot interval in steps (0 = none)"),
    count("map.side", 1, 1000, "20", "cells per side of the unit square"),
    unit("map.split_x", "0.5", "x boundary between the left and right regions"),
    unit("map.split_y", "0.5", "y boundary between the lower and upper right regions"),
    unit("target.left", "0.4", "target clarity for x < split_x"),
    unit("target.lower_right", "0.6", "target clarity for x >= split_x, y < split_y"),
    unit("target.upper_right", "0.8", "target clarity for x >= split_x, y >= split_y"),
    unit("prior.left", "0.7", "initial clarity for x < split_x (surveyed earlier)"),
    unit("prior.lower_right", "0", "initial clarity for x >= split_x, y < split_y"),
    unit("prior.upper_right", "0", "initial clarity for x >= split_x, y >= split_y"),
    nonneg("channel.C", "1", "sensing gain C inside the footprint"),
    positive("channel.R", "0.25", "measurement noise R"),
    positive("channel.Q", "0.001", "process noise Q"),
    positive("robot.u_max", "0.2", "speed cap [units/s]"),
    unit("robot.start_x", "0.5", "initial x"),
    unit("robot.start_y", "0.5", "initial y"),
    positive("footprint.radius", "0.05", "sensing disc radius"),
    positive("greedy.gain", "5", "proportional gain of the greedy controller"),
    nonneg("greedy.capture_radius", "0.005", "hover radius around the target cell"),
    count("ergodic.modes", 1, 64, "10", "cosine modes per axis"),
    positive("sim.horizon", "300", "simulated time [s]"),
    positive("sim.dt", "0.01", "time step [s]"),
    positive("metric.tolerance", "0.02", "settling band on |mean error|"),
];

const E3_SCHEMA: &[Field] = &[
    choice("experiment", EXPERIMENTS, "E3", "experiment id"),
    count("seed", 0, u64::MAX, "0", "random seed (Monte-Carlo checks only)"),
    Field {
        key: "output.dir",
        kind: Kind::Path,
        default: "out/e3",
        doc: "output directory",
    },
    unit("output.slice_q0", "0.7", "initial clarity of the exported domain slice"),
    any("flow.shear", "3", "w_x = max(0, shear * x2) [1/s]"),
    any("flow.drift_y", "-0.5", "w_y [m/s]"),
    positive("si.u_max", "2", "single integrator speed bound per axis [m/s]"),
    positive("dubins.speed", "2", "Dubins boat forward speed [m/s]"),
    positive("dubins.turn_max", "1", "Dubins boat turn-rate bound [rad/s]"),
    any("sensing.center_x", "0", "sensing square centre x1 [m]"),
    any("sensing.center_y", "1.25", "sensing square centre x2 [m]"),
    positive("sensing.half_width", "0.5", "sensing square half-width [m]"),
    nonneg("channel.C", "1", "sensing gain inside the square"),
    positive("channel.R", "1", "measurement noise R"),
    nonneg("channel.Q", "0.001", "process noise Q"),
    unit("target.q_star", "0.7", "required clarity"),
    positive("target.horizon", "10", "time budget T [s]"),
    any("si.x1_min", "-4", "single integrator grid lower bound on x1 [m]"),
    any("si.x1_max", "4", "single integrator grid upper bound on x1 [m]"),
    any("si.x2_min", "-2", "single integrator grid lower bound on x2 [m]"),
    any("si.x2_max", "3", "single integrator grid upper bound on x2 [m]"),
    count("si.nodes_x1", 3, 4001, "61", "single integrator nodes along x1"),
    count("si.nodes_x2", 3, 4001, "61", "single integrator nodes along x2"),
    count("si.nodes_q", 3, 4001, "41", "single integrator nodes along q"),
    any("dubins.x1_min", "-6", "Dubins grid lower bound on x1 [m]"),
    any("dubins.x1_max", "8", "Dubins grid upper bound on x1 [m]"),
    any("dubins.x2_min", "-6", "Dubins grid lower bound on x2 [m]"),
    any("dubins.x2_max", "3", "Dubins grid upper bound on x2 [m]"),
    count("dubins.nodes_x1", 3, 1001, "41", "Dubins nodes along x1"),
    count("dubins.nodes_x2", 3, 1001, "41", "Dubins nodes along x2"),
    count("dubins.nodes_heading", 3, 1001, "31", "Dubins nodes along the heading"),
    count("dubins.nodes_q", 3, 1001, "21", "Dubins nodes along q"),
    choice("scheme.integrator", &["euler", "tvd_rk2"], "euler", "HJB time stepping"),
    choice("scheme.dissipation", &["global", "local"], "local", "Lax-Friedrichs dissipation"),
    real("scheme.cfl", 0.0, 1.0, "0.5", "CFL number"),
    any("start.x1", "-1.5", "common initial x1 [m]"),
    any("start.x2", "1", "common initial x2 [m]"),
    any("start.heading", "0", "Dubins initial heading [rad]"),
    unit("start.q0", "0", "common initial clarity"),
    positive("rollout.dt", "0.01", "rollout step [s]"),
    count("consistency.samples", 0, 100_000, "20", "grid states checked against rollouts"),
    positive("consistency.delta", "0.03", "consistency margin"),
];

const E4_SCHEMA: &[Field] = &[
    choice("experiment", EXPERIMENTS, "E4", "experiment id"),
    count("seed", 0, u64::MAX, "0", "random seed (Monte-Carlo checks only)"),
    Field {
        key: "output.dir",
        kind: Kind::Path,
        default: "out/e4",
        doc: "output directory",
    },
    positive("quad.mass", "1", "mass m [kg]"),
    positive("quad.gravity", "9.81", "gravity g [m/s^2]"),
    positive("quad.inertia", "0.25", "moment of inertia J [kg m^2]"),
    positive("quad.thrust_max", "19.62", "thrust upper bound [N]"),
    positive("quad.torque_max", "2", "torque bound [N m]"),
    nonneg("channel.C", "1", "sensing gain while airborne"),
    positive("channel.R", "1", "measurement noise R"),
    nonneg("channel.Q", "0.001", "process noise Q"),
    positive("cbf.alpha1", "2", "first class-K gain"),
    positive("cbf.alpha2", "2", "second class-K gain"),
    any("nominal.target_x", "0", "landing point x1 [m]"),
    positive("nominal.descent_rate", "1", "maximum descent speed [m/s]"),
    positive("nominal.altitude_gain", "1", "descent speed per metre of altitude [1/s]"),
    nonneg("nominal.kp", "1", "horizontal position gain"),
    nonneg("nominal.kd", "2", "horizontal velocity gain"),
    nonneg("nominal.kv", "2", "vertical velocity gain"),
    nonneg("nominal.k_theta", "20", "pitch gain"),
    nonneg("nominal.k_omega", "8", "pitch-rate gain"),
    real("nominal.max_tilt", 0.0, 1.5, "0.5", "pitch command limit [rad]"),
    any("start.x1", "-2", "initial x1 [m]"),
    any("start.x2", "5", "initial altitude [m]"),
    unit("start.q0", "0.2", "initial clarity of the landing-site estimate"),
    positive("sim.dt", "0.01", "control and integration step [s]"),
    positive("sim.horizon", "20", "simulated time [s]"),
];

/// Problem with a config file or override, with its location when known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{message}", location(.source_name, *.line))]
pub struct ConfigError {
    pub source_name: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

fn location(source: &Option<String>, line: Option<usize>) -> String {
    match (source, line) {
        (Some(s), Some(l)) => format!("{s}:{l}: "),
        (Some(s), None) => format!("{s}: "),
        (None, Some(l)) => format!("line {l}: "),
        (None, None) => String::new(),
    }
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        Self {
            source_name: None,
            line: None,
            message: message.into(),
        }
    }

    fn at(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }
}

/// Validated scenario: one canonical value per schema field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    experiment: Experiment,
    values: Vec<String>,
}

fn canonical(field: &Field, raw: &str) -> Result<String, ConfigError> {
    let raw = raw.trim();
    match field.kind {
        Kind::Real { min, max, open_min } => {
            let v: f64 = raw
                .parse()
                .map_err(|_| ConfigError::new(format!("{}: expected a number, got `{raw}`", field.key)))?;
            let low_ok = if open_min { v > min } else { v >= min };
            if !v.is_finite() || !low_ok || v > max {
                let lb = if open_min { "(" } else { "[" };
                return Err(ConfigError::new(format!("{}: {v} is outside {lb}{min}, {max}]", field.key)));
            }
            Ok(format!("{v}"))
        }
        Kind::Count { min, max } => {
            let v: u64 = raw
                .parse()
                .map_err(|_| ConfigError::new(format!("{}: expected a non-negative integer, got `{raw}`", field.key)))?;
            if v < min || v > max {
                return Err(ConfigError::new(format!("{}: {v} is outside [{min}, {max}]", field.key)));
            }
            Ok(v.to_string())
        }
        Kind::Choice(options) => options
            .iter()
            .find(|o| o.eq_ignore_ascii_case(raw))
            .map(|o| o.to_string())
            .ok_or_else(|| ConfigError::new(format!("{}: expected one of {}, got `{raw}`", field.key, options.join(", ")))),
        Kind::Path => {
            if raw.is_empty() {
                Err(ConfigError::new(format!("{}: path must not be empty", field.key)))
            } else {
                Ok(raw.to_string())
            }
        }
    }
}

impl ScenarioConfig {
    /// All fields at their defaults.
    pub fn defaults(experiment: Experiment) -> Self {
        Self {
            experiment,
            values: experiment.schema().iter().map(|f| f.default.to_string()).collect(),
        }
    }

    /// Parses a scenario file. The `experiment` key is mandatory and must
    /// come before any other key; missing keys take their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: Option<Self> = None;
        let mut seen: Vec<(String, usize)> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let lineno = n + 1;
            let content = match line.find(" #") {
                Some(i) => &line[..i],
                None => line,
            }
            .trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::new(format!("expected `key = value`, got `{content}`")).at(lineno));
            };
            let key = key.trim();
            if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
                return Err(ConfigError::new(format!("duplicate key `{key}` (first set on line {first})")).at(lineno));
            }
            seen.push((key.to_string(), lineno));
            match cfg.as_mut() {
                None => {
                    if key != "experiment" {
                        return Err(ConfigError::new(format!("the first key must be `experiment`, got `{key}`")).at(lineno));
                    }
                    let id = value.trim();
                    let exp = Experiment::from_id(id)
                        .ok_or_else(|| ConfigError::new(format!("unknown experiment `{id}` (expected E1, E2, E3 or E4)")).at(lineno))?;
                    cfg = Some(Self::defaults(exp));
                }
                Some(c) => c.set_exact(key, value).map_err(|e| e.at(lineno))?,
            }
        }
        cfg.ok_or_else(|| ConfigError::new("config is empty; it must set `experiment`"))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source_name: Some(name.clone()),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text).map_err(|mut e| {
            e.source_name = Some(name);
            e
        })
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment
    }

    fn field_index(&self, key: &str) -> Option<usize> {
        self.experiment.schema().iter().position(|f| f.key == key)
    }

    fn set_exact(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let idx = self
            .field_index(key)
            .ok_or_else(|| ConfigError::new(format!("unknown key `{key}` for experiment {}", self.experiment)))?;
        if key == "experiment" && !value.trim().eq_ignore_ascii_case(self.experiment.id()) {
            return Err(ConfigError::new("`experiment` cannot be changed after it is set"));
        }
        self.values[idx] = canonical(&self.experiment.schema()[idx], value)?;
        Ok(())
    }

    /// Resolves `key` to a full field name: an exact match, or the unique
    /// field whose last dotted segments equal `key`.
    pub fn resolve_key(&self, key: &str) -> Result<&'static str, ConfigError> {
        let schema = self.experiment.schema();
        if let Some(f) = schema.iter().find(|f| f.key == key) {
            return Ok(f.key);
        }
        let suffix = format!(".{key}");
        let matches: Vec<&'static str> = schema.iter().filter(|f| f.key.ends_with(&suffix)).map(|f| f.key).collect();
        match matches.as_slice() {
            [one] => Ok(one),
            [] => Err(ConfigError::new(format!("unknown key `{key}` for experiment {}", self.experiment))),
            many => Err(ConfigError::new(format!("ambiguous key `{key}`: matches {}", many.join(", ")))),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| ConfigError::new(format!("override `{spec}` is not of the form key=value")))?;
        let key = self.resolve_key(key.trim())?;
        self.set_exact(key, value)
            .map_err(|e| ConfigError::new(format!("override `{spec}`: {}", e.message)))
    }

    pub fn set_output_dir(&mut self, dir: &Path) -> Result<(), ConfigError> {
        self.set_exact("output.dir", &dir.display().to_string())
    }

    pub fn text(&self, key: &str) -> &str {
        let idx = self.field_index(key).unwrap_or_else(|| panic!("no config key `{key}` for {}", self.experiment));
        &self.values[idx]
    }

    pub fn real(&self, key: &str) -> f64 {
        self.text(key).parse().expect("validated on set")
    }

    pub fn count(&self, key: &str) -> usize {
        self.text(key).parse().expect("validated on set")
    }

    pub fn seed(&self) -> u64 {
        self.text("seed").parse().expect("validated on set")
    }

    pub fn output_dir(&self) -> &Path {
        Path::new(self.text("output.dir"))
    }

    /// Canonical text form; re-parses to an equal config.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (field, value) in self.experiment.schema().iter().zip(&self.values) {
            out.push_str(&format!("# {}\n{} = {}\n", field.doc, field.key, value));
        }
        out
    }

    /// `(key, value)` pairs in schema order.
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &str)> {
        self.experiment.schema().iter().map(|f| f.key).zip(self.values.iter().map(String::as_str))
    }

    /// SHA-256 of the canonical `key = value` lines, excluding `output.dir`.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries().filter(|(k, _)| *k != "output.dir") {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
