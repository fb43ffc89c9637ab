//! Scenario definitions: strict key-value configuration files plus the
//! built-in figure-reproduction parameter sets.
//!
//! The file format is flat `key = value` lines grouped under `[section]`
//! headers, `#` comments; keys match the parameter names exactly. Unknown
//! sections or keys are rejected rather than ignored.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use menten::kinetics::{derive_constants, RateConstants, Totals};
use menten::ode::{Method, SolverConfig};

/// What a scenario run should produce beyond the primary dataset.
pub const OUTPUT_KINDS: [&str; 4] = ["trajectories", "reductions", "manifold", "analyses"];

/// A fully resolved run description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub rates: RateConstants,
    pub totals: Totals,
    pub x0: f64,
    pub c0: f64,
    /// Horizon in dimensional time; derived from the reduced slow time
    /// constant when absent.
    pub horizon: Option<f64>,
    pub solver: SolverConfig,
    pub outputs: Vec<String>,
    /// Literature caption values for this set, checked against the derived
    /// constants at run time; mismatches become warnings, never corrections.
    pub caption: Vec<(&'static str, f64)>,
}

#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError {
        message: msg.into(),
    }
}

impl Scenario {
    pub fn effective_horizon(&self) -> f64 {
        self.horizon
            .unwrap_or_else(|| menten::tihonov::default_horizon(&self.rates, &self.totals))
    }

    /// Warnings for caption values that disagree with the derived constants
    /// beyond 10% relative.
    pub fn caption_warnings(&self) -> Vec<String> {
        let d = derive_constants(&self.rates, &self.totals);
        let mut out = Vec::new();
        for (key, stated) in &self.caption {
            let derived = match *key {
                "K_M" => d.k_m,
                "K_D" => d.k_d,
                "K" => d.k,
                "eps_HTA" => d.eps_hta,
                "eps_SS" => d.eps_ss,
                "eps" => d.eps_tq,
                _ => continue,
            };
            if (derived - stated).abs() > 0.10 * stated.abs() {
                out.push(format!(
                    "caption states {key} = {stated} but the rates give {derived:.6}; \
                     values kept as configured"
                ));
            }
        }
        out
    }
}

/// Built-in scenario catalog. The two `fig1` variants carry the same caption
/// values with the two possible readings of its rate constants.
pub fn builtin(name: &str) -> Option<Scenario> {
    let (rates, totals, caption) = match name {
        "fig1_literal" => (
            RateConstants::new(1.0, 4.0, 1.0).unwrap(),
            Totals::new(89.0, 100.0).unwrap(),
            vec![("K_M", 5.0), ("K", 4.0), ("eps_SS", 0.85), ("eps", 0.01)],
        ),
        "fig1_consistent" => (
            RateConstants::new(1.0, 1.0, 4.0).unwrap(),
            Totals::new(89.0, 100.0).unwrap(),
            vec![("K_M", 5.0), ("K", 4.0), ("eps_SS", 0.85), ("eps", 0.01)],
        ),
        "fig2_left" => (
            RateConstants::new(0.1, 0.01, 10.0).unwrap(),
            Totals::new(0.1, 50.0).unwrap(),
            vec![
                ("K_M", 100.1),
                ("K", 100.0),
                ("eps_HTA", 0.002),
                ("eps_SS", 0.0007),
            ],
        ),
        "fig2_right" => (
            RateConstants::new(1.0, 0.1, 1.0).unwrap(),
            Totals::new(0.1, 1.0).unwrap(),
            vec![("K_M", 1.1), ("K", 1.0), ("eps_HTA", 0.1), ("eps_SS", 0.05)],
        ),
        "fig3_left" => (
            RateConstants::new(1.0, 3.0, 1.0).unwrap(),
            Totals::new(1.0, 1.0).unwrap(),
            vec![
                ("K_M", 4.0),
                ("K", 1.0),
                ("eps_HTA", 1.0),
                ("eps_SS", 0.2),
                ("eps", 0.03),
            ],
        ),
        "fig3_right" => (
            RateConstants::new(0.1, 0.01, 10.0).unwrap(),
            Totals::new(400.0, 100.0).unwrap(),
            vec![
                ("K_M", 100.1),
                ("K", 100.0),
                ("eps_HTA", 4.0),
                ("eps_SS", 2.0),
                ("eps", 0.11),
            ],
        ),
        _ => return None,
    };
    let x0 = totals.x_t;
    Some(Scenario {
        name: name.to_string(),
        rates,
        totals,
        x0,
        c0: 0.0,
        horizon: None,
        solver: SolverConfig::default(),
        outputs: vec!["trajectories".to_string()],
        caption,
    })
}

pub fn builtin_names() -> Vec<&'static str> {
    vec![
        "fig1_literal",
        "fig1_consistent",
        "fig2_left",
        "fig2_right",
        "fig3_left",
        "fig3_right",
    ]
}

const SECTIONS: [&str; 5] = ["scenario", "rates", "totals", "initial", "solver"];
const KEYS: [&str; 14] = [
    "name", "outputs", "k1", "k_minus1", "k2", "E_T", "X_T", "X0", "C0", "method", "rtol", "atol",
    "h_init", "h_max",
];
const INT_KEYS: [&str; 1] = ["max_steps"];
const RUN_KEYS: [&str; 1] = ["horizon"];

/// Parse a scenario file. Unknown keys and sections are errors; missing
/// optional keys take their documented defaults. Units are assumed
/// concentration/time consistent throughout.
pub fn parse_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<Scenario, ConfigError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(stripped) = line.strip_prefix('[') {
            let name = stripped
                .strip_suffix(']')
                .ok_or_else(|| err(format!("line {}: malformed section header", lineno + 1)))?
                .trim();
            if !SECTIONS.contains(&name) && name != "run" {
                return Err(err(format!(
                    "line {}: unknown section [{name}]",
                    lineno + 1
                )));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !KEYS.contains(&key.as_str())
            && !INT_KEYS.contains(&key.as_str())
            && !RUN_KEYS.contains(&key.as_str())
        {
            return Err(err(format!(
                "line {}: unknown key '{key}' (section [{section}])",
                lineno + 1
            )));
        }
        if !seen.insert(key.clone()) {
            return Err(err(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
        pairs.push((key, value));
    }

    let get = |key: &str| {
        pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    };
    let get_f64 = |key: &str| -> Result<Option<f64>, ConfigError> {
        match get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| err(format!("key '{key}': '{v}' is not a number"))),
        }
    };
    let require_f64 = |key: &str| -> Result<f64, ConfigError> {
        get_f64(key)?.ok_or_else(|| err(format!("missing required key '{key}'")))
    };

    let rates = RateConstants::new(
        require_f64("k1")?,
        require_f64("k_minus1")?,
        require_f64("k2")?,
    )
    .map_err(|e| err(e.to_string()))?;
    let totals =
        Totals::new(require_f64("E_T")?, require_f64("X_T")?).map_err(|e| err(e.to_string()))?;

    let mut solver = SolverConfig::default();
    if let Some(m) = get("method") {
        solver.method = parse_method(m)?;
    }
    if let Some(v) = get_f64("rtol")? {
        solver.rtol = v;
    }
    if let Some(v) = get_f64("atol")? {
        solver.atol = v;
    }
    solver.h_init = get_f64("h_init")?;
    solver.h_max = get_f64("h_max")?;
    if let Some(v) = get("max_steps") {
        solver.max_steps = v
            .parse::<usize>()
            .map_err(|_| err(format!("key 'max_steps': '{v}' is not a positive integer")))?;
    }
    solver.validate().map_err(|e| err(e.to_string()))?;

    let outputs = match get("outputs") {
        None => vec!["trajectories".to_string()],
        Some(list) => {
            let items: Vec<String> = list
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            for item in &items {
                if !OUTPUT_KINDS.contains(&item.as_str()) {
                    return Err(err(format!(
                        "key 'outputs': unknown kind '{item}' (expected one of {OUTPUT_KINDS:?})"
                    )));
                }
            }
            items
        }
    };

    let x0 = get_f64("X0")?.unwrap_or(totals.x_t);
    let c0 = get_f64("C0")?.unwrap_or(0.0);
    if x0 < 0.0 || c0 < 0.0 {
        return Err(err("initial conditions must be nonnegative"));
    }
    let horizon = get_f64("horizon")?;
    if let Some(h) = horizon {
        if !(h > 0.0) {
            return Err(err("key 'horizon': must be positive"));
        }
    }

    Ok(Scenario {
        name: get("name").unwrap_or("custom").to_string(),
        rates,
        totals,
        x0,
        c0,
        horizon,
        solver,
        outputs,
        caption: Vec::new(),
    })
}

pub fn parse_method(s: &str) -> Result<Method, ConfigError> {
    match s {
        "explicit" => Ok(Method::ExplicitAdaptive),
        "implicit" => Ok(Method::ImplicitStiff),
        other => Err(err(format!(
            "method must be 'explicit' or 'implicit', got '{other}'"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let s = parse_config_str(
            "[rates]\nk1 = 1.0\nk_minus1 = 3.0\nk2 = 1.0\n[totals]\nE_T = 1.0\nX_T = 1.0\n",
        )
        .unwrap();
        assert_eq!(s.name, "custom");
        assert_eq!(s.x0, 1.0);
        assert_eq!(s.c0, 0.0);
        assert_eq!(s.solver.rtol, 1e-8);
        assert_eq!(s.solver.atol, 1e-10);
        assert!(s.horizon.is_none());
        assert!((s.effective_horizon() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn builtin_fig3_left_matches_caption_rates() {
        let s = builtin("fig3_left").unwrap();
        assert_eq!(s.rates.k1, 1.0);
        assert_eq!(s.rates.k_minus1, 3.0);
        assert_eq!(s.rates.k2, 1.0);
        assert_eq!(s.totals.e_t, 1.0);
        assert_eq!(s.totals.x_t, 1.0);
        assert!(s.caption_warnings().is_empty());
    }

    #[test]
    fn fig1_literal_flags_caption_mismatch() {
        let warnings = builtin("fig1_literal").unwrap().caption_warnings();
        assert!(warnings.iter().any(|w| w.contains("K = 4")));
        assert!(warnings.iter().any(|w| w.contains("eps = 0.01")));
        assert!(builtin("fig1_consistent")
            .unwrap()
            .caption_warnings()
            .is_empty());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(parse_config_str("k1 = 1\nbogus = 2\n").is_err());
        assert!(parse_config_str("[nope]\nk1 = 1\n").is_err());
        let e = parse_config_str("k1 = 0\nk_minus1 = 3\nk2 = 1\nE_T = 1\nX_T = 1\n").unwrap_err();
        assert!(e.message.contains("k1"), "{}", e.message);
        assert!(parse_config_str("k1 = 1\nk_minus1 = 3\nk2 = 1\nE_T = 1\n").is_err());
        assert!(parse_config_str("k1 = 1\nk1 = 2\n").is_err());
        assert!(
            parse_config_str("k1=1\nk_minus1=3\nk2=1\nE_T=1\nX_T=1\noutputs = plots\n").is_err()
        );
    }

    #[test]
    fn solver_overrides_parse() {
        let s = parse_config_str(
            "k1=1\nk_minus1=3\nk2=1\nE_T=1\nX_T=1\n[solver]\nmethod = implicit\nrtol = 1e-6\n\
             atol = 1e-9\nmax_steps = 500\n[run]\nhorizon = 2.5\n",
        )
        .unwrap();
        assert_eq!(s.solver.method, Method::ImplicitStiff);
        assert_eq!(s.solver.rtol, 1e-6);
        assert_eq!(s.solver.max_steps, 500);
        assert_eq!(s.horizon, Some(2.5));
    }
}
