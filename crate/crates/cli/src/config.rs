//! Run configuration: a flat TOML file plus one override flag per key.
//!
//! Physical quantities use laboratory units (μK, μm, mm, mW/cm²) and are
//! converted to SI when the configuration is resolved.

use std::collections::BTreeMap;
use std::path::Path;

use magnetomech::lsa::{OrientationOptions, Relaxation, RepumpModel};
use magnetomech::physics::{quarter_talbot_distance, AtomSpecies, SystemParams};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Float,
    Int,
    Bool,
    /// A number or the given keyword.
    FloatOr(&'static str),
    Choice(&'static [&'static str]),
    Text,
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

/// Keys that can be swept: the numeric physical parameters.
pub const SWEEPABLE: &[&str] = &[
    "temperature_uK",
    "delta",
    "b0",
    "reflectivity",
    "lattice_period_um",
    "mirror_distance_mm",
    "cloud_length_mm",
    "molasses_detuning",
    "molasses_sat",
    "pump_sat",
];

const fn key(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec {
        name,
        kind,
        default,
        help,
    }
}

pub const KEYS: &[KeySpec] = &[
    key("temperature_uK", Kind::Float, "150", "cloud temperature [μK]"),
    key("delta", Kind::Float, "-8.6", "pump detuning [linewidths]"),
    key("b0", Kind::Float, "80", "line-centre optical density"),
    key("reflectivity", Kind::Float, "1", "mirror power reflectivity"),
    key("lattice_period_um", Kind::Float, "100", "transverse lattice period [μm]"),
    key(
        "mirror_distance_mm",
        Kind::FloatOr("auto"),
        "auto",
        "cloud-mirror distance [mm]; auto = quarter Talbot distance",
    ),
    key("cloud_length_mm", Kind::Float, "5", "cloud length [mm]"),
    key("molasses_detuning", Kind::Float, "1.8", "molasses detuning magnitude [linewidths]"),
    key("molasses_sat", Kind::Float, "0", "saturation parameter of one molasses beam"),
    key("pump_sat", Kind::Float, "0", "pump saturation parameter per circular component"),
    key(
        "pump_reference",
        Kind::Choice(&["absolute", "density", "orientation"]),
        "absolute",
        "simulations: pump_sat is absolute or pump_factor times this threshold",
    ),
    key("pump_factor", Kind::Float, "1", "multiple of the reference threshold"),
    key(
        "sin_theta",
        Kind::FloatOr("optimal"),
        "optimal",
        "sin Θ for threshold commands; simulations use the mirror geometry",
    ),
    key("relaxation", Kind::Choice(&["diffusive", "ballistic"]), "diffusive", "orientation relaxation"),
    key("include_optomech", Kind::Bool, "true", "dipole-force drift in orientation thresholds and simulations"),
    key("include_molasses", Kind::Bool, "true", "molasses repumping term"),
    key("molasses_repump", Kind::Choice(&["literal", "scaled"]), "literal", "repump rate 6P_m, or scaled by a'"),
    key("sweep_param", Kind::Choice(SWEEPABLE), "temperature_uK", "parameter swept by `sweep`"),
    key("sweep_from", Kind::Float, "50", "first sweep value"),
    key("sweep_to", Kind::Float, "350", "last sweep value"),
    key("sweep_points", Kind::Int, "31", "number of sweep values"),
    key("sweep_scale", Kind::Choice(&["linear", "log"]), "linear", "sweep spacing"),
    key(
        "figure",
        Kind::Choice(&["all", "fig4", "fig5a", "fig5b", "fig6", "fig7"]),
        "all",
        "figure table(s) written by `figures`",
    ),
    key("output", Kind::Text, "-", "output file for lsa, sweep and growth (- = stdout)"),
    key("output_dir", Kind::Text, ".", "directory for figures and simulation output"),
    key("dims", Kind::Int, "1", "transverse dimensions (1 or 2)"),
    key("grid_points", Kind::Int, "256", "grid points per axis"),
    key("periods", Kind::Int, "4", "lattice periods per domain"),
    key("dt_ns", Kind::FloatOr("auto"), "auto", "time step [ns]"),
    key("steps", Kind::Int, "10000", "number of time steps"),
    key("seed", Kind::Int, "0", "noise seed"),
    key(
        "perturbation",
        Kind::Choice(&["orientation", "density", "noise"]),
        "orientation",
        "initial perturbation",
    ),
    key("perturbation_amplitude", Kind::Float, "1e-6", "initial perturbation amplitude"),
    key("snapshot_every", Kind::Int, "0", "snapshot cadence in steps (0 = final only)"),
    key("diagnostics_every", Kind::Int, "10", "diagnostics cadence in steps"),
    key("abort_on_violation", Kind::Bool, "true", "stop when positivity or conservation fails"),
    key("fit_from_us", Kind::FloatOr("auto"), "auto", "growth fit window start [μs]"),
    key("fit_to_us", Kind::FloatOr("auto"), "auto", "growth fit window end [μs]"),
];

pub fn spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

/// Command-line flag for a key: underscores become dashes.
pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Bool(bool),
    Word(String),
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Word(v) => write!(f, "{v}"),
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_text(spec: &KeySpec, raw: &str) -> Result<Value, String> {
    let raw = raw.trim();
    let number = || raw.parse::<f64>().ok().filter(|v| v.is_finite());
    match spec.kind {
        Kind::Float => number().map(Value::Num).ok_or_else(|| format!("expected a number, got `{raw}`")),
        Kind::Int => raw
            .parse::<u64>()
            .map(Value::Int)
            .map_err(|_| format!("expected a non-negative integer, got `{raw}`")),
        Kind::Bool => raw
            .parse::<bool>()
            .map(Value::Bool)
            .map_err(|_| format!("expected true or false, got `{raw}`")),
        Kind::FloatOr(word) => {
            if raw == word {
                Ok(Value::Word(word.to_string()))
            } else {
                number()
                    .map(Value::Num)
                    .ok_or_else(|| format!("expected a number or `{word}`, got `{raw}`"))
            }
        }
        Kind::Choice(options) => {
            if options.contains(&raw) {
                Ok(Value::Word(raw.to_string()))
            } else {
                Err(format!("expected one of {}, got `{raw}`", options.join(", ")))
            }
        }
        Kind::Text => Ok(Value::Word(raw.to_string())),
    }
}

fn from_toml(spec: &KeySpec, value: &toml::Value) -> Result<Value, String> {
    match value {
        toml::Value::String(s) => parse_text(spec, s),
        toml::Value::Integer(i) => parse_text(spec, &i.to_string()),
        toml::Value::Float(f) => parse_text(spec, &f.to_string()),
        toml::Value::Boolean(b) => parse_text(spec, &b.to_string()),
        other => Err(format!("unsupported value type `{}`", other.type_str())),
    }
}

fn line_of(text: &str, key: &str) -> Option<usize> {
    text.lines().position(|l| {
        let l = l.trim_start();
        l.strip_prefix(key)
            .map(|rest| rest.trim_start().starts_with('='))
            .unwrap_or(false)
    })
    .map(|i| i + 1)
}

#[derive(Debug, Clone)]
pub struct Config {
    values: BTreeMap<&'static str, (Value, Source)>,
}

impl Default for Config {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .map(|k| {
                let v = parse_text(k, k.default).expect("valid default");
                (k.name, (v, Source::Default))
            })
            .collect();
        Self { values }
    }
}

impl Config {
    /// Apply the keys of a TOML document.
    pub fn merge_toml(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| config_err(format!("{origin}: {e}")))?;
        for (name, value) in &table {
            let at = line_of(text, name)
                .map(|l| format!("{origin}:{l}"))
                .unwrap_or_else(|| origin.to_string());
            let spec = spec(name).ok_or_else(|| config_err(format!("{at}: unknown key `{name}`")))?;
            let v = from_toml(spec, value).map_err(|e| config_err(format!("{at}: key `{name}`: {e}")))?;
            self.values.insert(spec.name, (v, Source::File));
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        self.merge_toml(&text, &path.display().to_string())
    }

    pub fn set_flag(&mut self, name: &str, raw: &str) -> Result<(), CliError> {
        let spec = spec(name).ok_or_else(|| config_err(format!("unknown key `{name}`")))?;
        let v = parse_text(spec, raw)
            .map_err(|e| config_err(format!("--{}: {e}", flag_name(name))))?;
        self.values.insert(spec.name, (v, Source::Flag));
        Ok(())
    }

    pub fn set(&mut self, name: &str, value: Value) {
        let spec = spec(name).expect("known key");
        self.values.insert(spec.name, (value, Source::Flag));
    }

    fn get(&self, name: &str) -> &Value {
        &self.values.get(name).unwrap_or_else(|| panic!("unknown key {name}")).0
    }

    pub fn num(&self, name: &str) -> f64 {
        match self.get(name) {
            Value::Num(v) => *v,
            Value::Int(v) => *v as f64,
            other => panic!("{name} is not numeric: {other}"),
        }
    }

    /// Number, or None for the keyword alternative.
    pub fn num_or_word(&self, name: &str) -> Option<f64> {
        match self.get(name) {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn int(&self, name: &str) -> u64 {
        match self.get(name) {
            Value::Int(v) => *v,
            other => panic!("{name} is not an integer: {other}"),
        }
    }

    pub fn usize(&self, name: &str) -> Result<usize, CliError> {
        usize::try_from(self.int(name)).map_err(|_| config_err(format!("{name} is too large")))
    }

    pub fn flag(&self, name: &str) -> bool {
        match self.get(name) {
            Value::Bool(v) => *v,
            other => panic!("{name} is not a bool: {other}"),
        }
    }

    pub fn word(&self, name: &str) -> &str {
        match self.get(name) {
            Value::Word(w) => w,
            other => panic!("{name} is not a word: {other}"),
        }
    }

    /// Effective configuration as `key = value  (source)` lines.
    pub fn echo(&self) -> Vec<String> {
        KEYS.iter()
            .map(|k| {
                let (v, src) = &self.values[k.name];
                let tag = match src {
                    Source::Default => "default",
                    Source::File => "file",
                    Source::Flag => "flag",
                };
                format!("{} = {v} ({tag})", k.name)
            })
            .collect()
    }

    pub fn species(&self) -> AtomSpecies {
        AtomSpecies::rb87_d2()
    }

    /// Physical parameters in SI units.
    pub fn params(&self) -> Result<SystemParams, CliError> {
        let species = self.species();
        let lattice_period = self.num("lattice_period_um") * 1e-6;
        if lattice_period.is_nan() || lattice_period <= 0.0 {
            return Err(config_err("lattice_period_um must be positive"));
        }
        let mirror_distance = match self.num_or_word("mirror_distance_mm") {
            Some(mm) => mm * 1e-3,
            None => quarter_talbot_distance(lattice_period, &species),
        };
        let p = SystemParams {
            delta: self.num("delta"),
            b0: self.num("b0"),
            reflectivity: self.num("reflectivity"),
            mirror_distance,
            cloud_length: self.num("cloud_length_mm") * 1e-3,
            lattice_period,
            temperature: self.num("temperature_uK") * 1e-6,
            molasses_detuning: self.num("molasses_detuning"),
            molasses_sat: self.num("molasses_sat"),
            pump_sat: self.num("pump_sat"),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn orientation_options(&self) -> OrientationOptions {
        OrientationOptions {
            include_optomech: self.flag("include_optomech"),
            include_molasses: self.flag("include_molasses"),
            relaxation: match self.word("relaxation") {
                "ballistic" => Relaxation::Ballistic,
                _ => Relaxation::Diffusive,
            },
            repump: match self.word("molasses_repump") {
                "scaled" => RepumpModel::ScaledByAPrime,
                _ => RepumpModel::Literal,
            },
        }
    }

    /// Explicit sin Θ, or None for the sign-optimal choice.
    pub fn sin_theta(&self) -> Result<Option<f64>, CliError> {
        match self.num_or_word("sin_theta") {
            Some(s) if s.abs() > 1.0 => Err(config_err(format!("sin_theta must lie in [-1, 1], got {s}"))),
            other => Ok(other),
        }
    }
}
