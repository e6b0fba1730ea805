//! Run configuration: `key = value` lines, `#` comments, later sources win.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use omt_core::numerics::{McConfig, QuadratureConfig};
use omt_core::objective::Weights;
use omt_core::power_design::{Calibration, PowerMeasure};
use omt_core::procedures::ProcedureKind;

use crate::error::{CliError, CliResult};

/// Environment variable naming the default quadrature profile.
pub const QUADRATURE_ENV: &str = "OMT_QUADRATURE";

/// Every recognised key with its default; an empty default means unset.
pub const KEYS: &[(&str, &str)] = &[
    ("alpha", "0.025"),
    ("procedures", "table"),
    ("objective", "combo"),
    ("calibration", ""),
    ("theta1", ""),
    ("theta2", ""),
    ("rho", "0"),
    ("persons1", "2400"),
    ("persons2", "2400"),
    ("rate_control", "0.075"),
    ("rate_treat", "0.04875"),
    ("beta", "0.85"),
    ("reference_persons", "2400"),
    ("grid", "256"),
    ("z_min", "-6"),
    ("z_max", "2"),
    ("mc", "false"),
    ("reps", "1000000"),
    ("seed", "20240125"),
    ("total_n", "4800"),
    ("r_grid", "0,0.25,0.5,0.75,1"),
    ("allocation_objective", "matched"),
    ("measure", ""),
    ("reference_n", "4800"),
    ("split", "0.5"),
    ("comparator", "hommel"),
    ("n_cap", "10000000"),
    ("events_control1", "166"),
    ("n_control1", "1956"),
    ("events_treat1", "132"),
    ("n_treat1", "1914"),
    ("events_control2", "57"),
    ("n_control2", "1218"),
    ("events_treat2", "33"),
    ("n_treat2", "1198"),
    ("quadrature", ""),
    ("output", ""),
];

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses the text of a configuration file.
pub fn parse_config_text(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected 'key = value'", i + 1)))?;
        let key = key.trim();
        if !is_known(key) {
            return Err(config_err(format!("line {}: unknown key '{key}'", i + 1)));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Effective key/value pairs after defaults, file, and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
    explicit: Vec<&'static str>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v)| (*k, v.to_string())).collect(),
            explicit: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> CliResult<()> {
        let (k, _) = KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .ok_or_else(|| config_err(format!("unknown key '{key}'")))?;
        self.values.insert(k, value.into());
        if !self.explicit.contains(k) {
            self.explicit.push(k);
        }
        Ok(())
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> CliResult<()> {
        for (k, v) in pairs {
            self.set(k, v.clone())?;
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn is_set(&self, key: &str) -> bool {
        !self.raw(key).is_empty()
    }

    pub fn was_given(&self, key: &str) -> bool {
        self.explicit.iter().any(|k| *k == key)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<T> {
        let raw = self.raw(key);
        if raw.is_empty() {
            return Err(config_err(format!("'{key}' is required")));
        }
        raw.parse()
            .map_err(|_| config_err(format!("invalid value '{raw}' for '{key}'")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        if self.is_set(key) {
            self.get(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn get_f64(&self, key: &str) -> CliResult<f64> {
        let v: f64 = self.get(key)?;
        if !v.is_finite() {
            return Err(config_err(format!("'{key}' must be finite")));
        }
        Ok(v)
    }

    pub fn get_bool(&self, key: &str) -> CliResult<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" | "" => Ok(false),
            other => Err(config_err(format!("invalid value '{other}' for '{key}'"))),
        }
    }

    pub fn alpha(&self) -> CliResult<f64> {
        let a = self.get_f64("alpha")?;
        if !(a > 0.0 && a < 0.5) {
            return Err(config_err(format!("alpha {a} is outside (0, 0.5)")));
        }
        Ok(a)
    }

    pub fn f64_list(&self, key: &str) -> CliResult<Vec<f64>> {
        let raw = self.raw(key);
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| config_err(format!("invalid number '{s}' in '{key}'")))
            })
            .collect()
    }

    /// Quadrature profile from the `quadrature` key, else the environment,
    /// else `standard`.
    pub fn quadrature(&self, env: Option<&str>) -> CliResult<QuadratureConfig> {
        let name = if self.is_set("quadrature") {
            self.raw("quadrature").to_string()
        } else {
            env.filter(|s| !s.is_empty()).unwrap_or("standard").to_string()
        };
        QuadratureConfig::profile(&name).map_err(|e| config_err(e.to_string()))
    }

    pub fn mc(&self) -> CliResult<McConfig> {
        let cfg = McConfig {
            reps: self.get("reps")?,
            seed: self.get("seed")?,
        };
        cfg.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }

    pub fn weights(&self, key: &str) -> CliResult<Weights> {
        parse_weights(self.raw(key)).ok_or_else(|| {
            config_err(format!(
                "invalid value '{}' for '{key}' (any, avg, pi1, combo, or three weights)",
                self.raw(key)
            ))
        })
    }

    pub fn measure(&self) -> CliResult<Option<PowerMeasure>> {
        match self.raw("measure") {
            "" | "all" => Ok(None),
            m => m.parse().map(Some).map_err(|e: omt_core::OmtError| config_err(e.to_string())),
        }
    }

    pub fn procedure_kind(&self, key: &str) -> CliResult<ProcedureKind> {
        self.raw(key)
            .parse()
            .map_err(|e: omt_core::OmtError| config_err(e.to_string()))
    }

    /// Calibration mode: explicit, else direct when a shift was given, else `fallback`.
    pub fn calibration_mode(&self, fallback: CalibrationMode) -> CliResult<CalibrationMode> {
        if self.is_set("calibration") {
            return self.raw("calibration").parse();
        }
        if self.is_set("theta1") || self.is_set("theta2") {
            return Ok(CalibrationMode::Direct);
        }
        Ok(fallback)
    }

    /// Group-size calibration for modes other than direct.
    pub fn calibration(&self, mode: CalibrationMode) -> CliResult<Calibration> {
        let cal = match mode {
            CalibrationMode::Direct => {
                return Err(config_err("this command needs calibration = design or marginal"))
            }
            CalibrationMode::Design => Calibration::Design {
                rate_control: self.get_f64("rate_control")?,
                rate_treat: self.get_f64("rate_treat")?,
            },
            CalibrationMode::Marginal => Calibration::MarginalPower {
                beta: self.get_f64("beta")?,
                alpha: self.alpha()?,
                reference_persons: self.get("reference_persons")?,
            },
        };
        cal.validate().map_err(|e| config_err(e.to_string()))?;
        Ok(cal)
    }

    /// Shifts for commands that take a single pair of groups.
    pub fn thetas(&self, mode: CalibrationMode) -> CliResult<(f64, f64)> {
        if mode == CalibrationMode::Direct {
            let t1 = self.get_f64("theta1")?;
            let t2 = self.get_f64("theta2")?;
            return Ok((t1, t2));
        }
        for key in ["theta1", "theta2"] {
            if self.is_set(key) {
                return Err(config_err(format!("'{key}' needs calibration = direct")));
            }
        }
        let cal = self.calibration(mode)?;
        let t1 = cal.theta(self.get("persons1")?).map_err(|e| config_err(e.to_string()))?;
        let t2 = cal.theta(self.get("persons2")?).map_err(|e| config_err(e.to_string()))?;
        Ok((t1, t2))
    }

    /// `key = value` lines for `keys`, skipping unset values; readable by
    /// [`parse_config_text`].
    pub fn dump(&self, command: &str, keys: &[&str]) -> String {
        let mut out = format!("# omt {command}\n");
        for key in keys {
            let v = self.raw(key);
            if !v.is_empty() {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationMode {
    Direct,
    Design,
    Marginal,
}

impl CalibrationMode {
    pub fn name(&self) -> &'static str {
        match self {
            CalibrationMode::Direct => "direct",
            CalibrationMode::Design => "design",
            CalibrationMode::Marginal => "marginal",
        }
    }
}

impl FromStr for CalibrationMode {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "direct" => Ok(CalibrationMode::Direct),
            "design" => Ok(CalibrationMode::Design),
            "marginal" => Ok(CalibrationMode::Marginal),
            other => Err(config_err(format!(
                "unknown calibration '{other}' (direct, design, marginal)"
            ))),
        }
    }
}

/// `any`, `avg`, `pi1`, `combo`, or `w_any,w_avg,w_pi1`.
pub fn parse_weights(s: &str) -> Option<Weights> {
    match s {
        "any" | "pi_any" => return Some(Weights::ANY),
        "avg" | "pi_avg" => return Some(Weights::AVG),
        "pi1" | "pi_1" => return Some(Weights::PI1),
        "combo" | "pi_combo" => return Some(Weights::COMBO),
        _ => {}
    }
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    let [any, avg, pi1] = parts[..] else {
        return None;
    };
    let w = Weights { any, avg, pi1 };
    w.validate().ok().map(|_| w)
}
